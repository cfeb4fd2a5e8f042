//! Bit-exact integer reference implementation of the transformer math the
//! host and device jointly compute.
//!
//! This is the oracle every netlist and protocol simulation is checked
//! against. The device-side path (projections, FFN under ReLU) is exact
//! integer arithmetic; attention runs host-side in f64 and is requantized
//! at a fixed boundary, identically wherever it is invoked.
//!
//! Fixed-point conventions: rounding is truncation toward negative
//! infinity (arithmetic right shift), saturation is a symmetric clamp to
//! the target signed range, and every clamp event is counted rather than
//! hidden. Requant shifts normalize worst-case bit growth per stage, so
//! the integer ranges are honest; residual additions operate on
//! same-width integer streams (per-tensor scale calibration is out of
//! scope for synthetic weights).

use crate::error::{Error, Result};
use crate::model::{signed_range, ModelBundle, QuantizedWeightMatrix};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A vector of quantized activations: `real = value * 2^scale_exp`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationVector {
    pub values: Vec<i32>,
    pub width: u32,
    pub scale_exp: i32,
}

impl ActivationVector {
    pub fn new(values: Vec<i32>, width: u32, scale_exp: i32) -> Result<Self> {
        let (lo, hi) = signed_range(width);
        for &v in &values {
            if (v as i64) < lo || (v as i64) > hi {
                return Err(Error::ValueOutOfRange { value: v as i64, width });
            }
        }
        Ok(Self { values, width, scale_exp })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Per-layer history of Key and Value vectors held by the host.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KvCache {
    layers: Vec<LayerKv>,
    transfer_width: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct LayerKv {
    keys: Vec<Vec<i32>>,
    values: Vec<Vec<i32>>,
}

impl KvCache {
    pub fn new(n_layers: u32, transfer_width: u32) -> Self {
        Self {
            layers: vec![LayerKv::default(); n_layers as usize],
            transfer_width,
        }
    }

    /// Sequence length, equal across layers at token boundaries.
    pub fn seq_len(&self, layer: usize) -> usize {
        self.layers[layer].keys.len()
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn append(&mut self, layer: usize, k: Vec<i32>, v: Vec<i32>) -> Result<()> {
        if k.len() != v.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("k and v of equal length"),
                found: format!("k: {}, v: {}", k.len(), v.len()),
            });
        }
        let (lo, hi) = signed_range(self.transfer_width);
        for &x in k.iter().chain(v.iter()) {
            if (x as i64) < lo || (x as i64) > hi {
                return Err(Error::ValueOutOfRange {
                    value: x as i64,
                    width: self.transfer_width,
                });
            }
        }
        let slot = &mut self.layers[layer];
        slot.keys.push(k);
        slot.values.push(v);
        Ok(())
    }

    pub fn keys(&self, layer: usize) -> &[Vec<i32>] {
        &self.layers[layer].keys
    }

    pub fn values(&self, layer: usize) -> &[Vec<i32>] {
        &self.layers[layer].values
    }
}

/// Per-stage arithmetic right-shift amounts applied before each clamp.
///
/// The defaults derived by [`QuantSpec::for_topology`] shift just enough
/// that the worst-case accumulator of each stage fits its target width,
/// so tiny models keep full precision and clamps stay exceptional.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantSpec {
    pub activation_width: u32,
    pub transfer_width: u32,
    /// Wide QKV accumulator -> transfer width.
    pub qkv_shift: u32,
    /// Attention output (transfer width) -> activation width.
    pub attn_residual_shift: u32,
    /// Wide FFN gate/up accumulators -> activation width.
    pub ffn_in_shift: u32,
    /// Gate x up product -> activation width.
    pub ffn_prod_shift: u32,
    /// Wide FFN down-projection accumulator -> activation width.
    pub ffn_out_shift: u32,
    /// Wide output-head accumulator -> transfer width.
    pub head_shift: u32,
}

/// Bits needed to represent the magnitude `m` unsigned.
fn unsigned_bits(m: u64) -> u32 {
    64 - m.leading_zeros()
}

/// Shift so a symmetric accumulator bound `m` fits a signed target width.
fn fit_shift(m: u64, target_width: u32) -> u32 {
    unsigned_bits(m).saturating_sub(target_width - 1)
}

/// Minimum overflow-free accumulator width for a dot product:
/// `activation_width + weight_width + ceil(log2(fan_in))`.
pub fn min_acc_width(activation_width: u32, weight_width: u32, fan_in: usize) -> u32 {
    let log = if fan_in <= 1 {
        0
    } else {
        (usize::BITS - (fan_in - 1).leading_zeros()) as u32
    };
    activation_width + weight_width + log
}

impl QuantSpec {
    pub fn for_topology(t: &crate::model::TransformerTopology) -> Self {
        let aw = t.activation_width;
        let ww = t.weight_width;
        let tw = t.transfer_width;
        let prod_bound = 1u64 << (aw - 1 + ww - 1);
        let matvec_bound = |fan_in: u64| prod_bound * fan_in;
        Self {
            activation_width: aw,
            transfer_width: tw,
            qkv_shift: fit_shift(matvec_bound(t.d_model as u64), tw),
            attn_residual_shift: tw.saturating_sub(aw),
            ffn_in_shift: fit_shift(matvec_bound(t.d_model as u64), aw),
            ffn_prod_shift: fit_shift(1u64 << (2 * (aw - 1)), aw),
            ffn_out_shift: fit_shift(matvec_bound(t.d_ffn as u64), aw),
            head_shift: fit_shift(matvec_bound(t.d_model as u64), tw),
        }
    }

    /// Shift right (floor) then clamp symmetrically into `width` bits,
    /// counting each saturation event.
    pub fn requant(&self, v: i64, shift: u32, width: u32, clamps: &mut u64) -> i32 {
        let shifted = v >> shift;
        let (lo, hi) = signed_range(width);
        if shifted < lo {
            *clamps += 1;
            lo as i32
        } else if shifted > hi {
            *clamps += 1;
            hi as i32
        } else {
            shifted as i32
        }
    }

    fn requant_vec(&self, vs: &[i64], shift: u32, width: u32, clamps: &mut u64) -> Vec<i32> {
        vs.iter().map(|&v| self.requant(v, shift, width, clamps)).collect()
    }

    /// Saturating elementwise add at `width` bits (residual connections).
    fn add_sat(&self, a: &[i32], b: &[i32], width: u32, clamps: &mut u64) -> Vec<i32> {
        debug_assert_eq!(a.len(), b.len());
        a.iter()
            .zip(b)
            .map(|(&x, &y)| self.requant(x as i64 + y as i64, 0, width, clamps))
            .collect()
    }
}

/// Exact integer matrix-vector product `y = x * W` with `x.len() == rows`.
///
/// `acc_width` must be at least [`min_acc_width`] for the shape; the
/// result is then provably overflow-free in i64.
pub fn matvec_int(
    w: &QuantizedWeightMatrix,
    x: &ActivationVector,
    acc_width: u32,
) -> Result<Vec<i64>> {
    if x.len() != w.rows() as usize {
        return Err(Error::ShapeMismatch {
            expected: format!("input of length {}", w.rows()),
            found: format!("length {}", x.len()),
        });
    }
    let required = min_acc_width(x.width, w.weight_width(), w.rows() as usize);
    if acc_width < required {
        return Err(Error::AccWidthTooSmall { required, given: acc_width });
    }
    Ok(matvec_raw(w, &x.values))
}

pub(crate) fn matvec_raw(w: &QuantizedWeightMatrix, xs: &[i32]) -> Vec<i64> {
    let cols = w.cols() as usize;
    let mut acc = vec![0i64; cols];
    for (row, &xv) in xs.iter().enumerate() {
        if xv == 0 {
            continue;
        }
        let weights = w.row(row as u32);
        for (j, &q) in weights.iter().enumerate() {
            acc[j] += xv as i64 * q as i64;
        }
    }
    debug_assert_eq!(acc.len(), cols);
    acc
}

/// Host-side attention: dequantize, softmax in f64, weighted sum of the
/// cached values, requantize back to the value scale at transfer width.
///
/// With a single cached position the softmax weight is exactly 1, so the
/// output equals the requantized value vector unchanged.
pub fn attention_host(
    q: &ActivationVector,
    keys: &[Vec<i32>],
    values: &[Vec<i32>],
    d_k: usize,
    quant: &QuantSpec,
    clamps: &mut u64,
) -> Result<ActivationVector> {
    if keys.is_empty() || values.is_empty() {
        return Err(Error::EmptyCache);
    }
    if keys.len() != values.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} value vectors", keys.len()),
            found: format!("{}", values.len()),
        });
    }
    let d = q.len();
    for (entry, name) in keys.iter().map(|k| (k, "key")).chain(values.iter().map(|v| (v, "value"))) {
        if entry.len() != d {
            return Err(Error::ShapeMismatch {
                expected: format!("{name} of length {d}"),
                found: format!("length {}", entry.len()),
            });
        }
    }

    let scale = (2.0f64).powi(q.scale_exp);
    let inv_sqrt_dk = 1.0 / (d_k as f64).sqrt();
    let scores: Vec<f64> = keys
        .iter()
        .map(|k| {
            let dot: i64 = q
                .values
                .iter()
                .zip(k)
                .map(|(&a, &b)| a as i64 * b as i64)
                .sum();
            dot as f64 * scale * scale * inv_sqrt_dk
        })
        .collect();

    // numerically stable softmax, deterministic evaluation order
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();

    let mut out = vec![0i32; d];
    for i in 0..d {
        let mut acc = 0.0f64;
        for (t, e) in exps.iter().enumerate() {
            acc += e / sum * values[t][i] as f64;
        }
        out[i] = quant.requant(acc.floor() as i64, 0, quant.transfer_width, clamps);
    }
    ActivationVector::new(out, quant.transfer_width, q.scale_exp)
}

/// Gate nonlinearity for the FFN.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    /// Exact integer path: the device never leaves integer arithmetic.
    #[default]
    Relu,
    /// Float diagnostics mode; not representative of device hardware.
    SiluFloat,
}

/// Gated feed-forward block: `W_2 * (act(W_1 x) ⊙ (W_3 x))`.
pub fn ffn_device(
    x: &ActivationVector,
    w_1: &QuantizedWeightMatrix,
    w_2: &QuantizedWeightMatrix,
    w_3: &QuantizedWeightMatrix,
    activation: Activation,
    quant: &QuantSpec,
    clamps: &mut u64,
) -> Result<ActivationVector> {
    if w_1.rows() != w_3.rows() || w_1.cols() != w_3.cols() || w_2.rows() != w_1.cols() {
        return Err(Error::ShapeMismatch {
            expected: format!("w_1/w_3 {}x{}, w_2 {}x*", w_1.rows(), w_1.cols(), w_1.cols()),
            found: format!(
                "w_3 {}x{}, w_2 {}x{}",
                w_3.rows(),
                w_3.cols(),
                w_2.rows(),
                w_2.cols()
            ),
        });
    }
    let aw = quant.activation_width;
    let acc = min_acc_width(x.width, w_1.weight_width(), w_1.rows() as usize);
    let gate_wide = matvec_int(w_1, x, acc)?;
    let up_wide = matvec_int(w_3, x, acc)?;

    let gate_scale_exp = x.scale_exp + w_1.scale_exp();
    let gate_act: Vec<i64> = match activation {
        Activation::Relu => gate_wide.iter().map(|&g| g.max(0)).collect(),
        Activation::SiluFloat => {
            let s = (2.0f64).powi(gate_scale_exp);
            gate_wide
                .iter()
                .map(|&g| {
                    let real = g as f64 * s;
                    let silu = real / (1.0 + (-real).exp());
                    (silu / s).floor() as i64
                })
                .collect()
        }
    };

    let g8 = quant.requant_vec(&gate_act, quant.ffn_in_shift, aw, clamps);
    let u8v = quant.requant_vec(&up_wide, quant.ffn_in_shift, aw, clamps);
    let prod: Vec<i64> = g8.iter().zip(&u8v).map(|(&g, &u)| g as i64 * u as i64).collect();
    let p8 = quant.requant_vec(&prod, quant.ffn_prod_shift, aw, clamps);

    let p_vec = ActivationVector::new(p8, aw, x.scale_exp)?;
    let acc2 = min_acc_width(aw, w_2.weight_width(), w_2.rows() as usize);
    let down_wide = matvec_int(w_2, &p_vec, acc2)?;
    let f8 = quant.requant_vec(&down_wide, quant.ffn_out_shift, aw, clamps);
    ActivationVector::new(f8, aw, x.scale_exp)
}

#[derive(Debug, Clone, Copy)]
pub struct ForwardOptions {
    /// Residual connections around attention and the FFN (on by default;
    /// disable to run the bare staged pipeline).
    pub residual: bool,
    pub activation: Activation,
}

impl Default for ForwardOptions {
    fn default() -> Self {
        Self {
            residual: true,
            activation: Activation::Relu,
        }
    }
}

/// Counters accumulated across a forward pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ForwardTrace {
    pub clamp_events: u64,
}

/// Monolithic single-token forward pass: embedding lookup, every layer's
/// projections + attention + FFN with the KV cache appended in place,
/// then the output head. Returns logits at transfer width.
pub fn forward_token(
    bundle: &ModelBundle,
    token_id: usize,
    cache: &mut KvCache,
    quant: &QuantSpec,
    opts: &ForwardOptions,
    trace: &mut ForwardTrace,
) -> Result<ActivationVector> {
    let t = &bundle.topology;
    if token_id >= t.vocab_size as usize {
        return Err(Error::TokenOutOfRange {
            token: token_id,
            vocab: t.vocab_size as usize,
        });
    }
    let aw = quant.activation_width;
    let clamps = &mut trace.clamp_events;

    // embedding lookup: INT4 rows fit the activation width directly
    let emb_row: Vec<i32> = bundle
        .embedding
        .row(token_id as u32)
        .iter()
        .map(|&q| q as i32)
        .collect();
    let mut x = ActivationVector::new(emb_row, aw, bundle.embedding.scale_exp())?;

    let acc_qkv = min_acc_width(aw, t.weight_width, t.d_model as usize);
    for (li, layer) in bundle.layers.iter().enumerate() {
        let q_wide = matvec_int(&layer.w_q, &x, acc_qkv)?;
        let k_wide = matvec_int(&layer.w_k, &x, acc_qkv)?;
        let v_wide = matvec_int(&layer.w_v, &x, acc_qkv)?;
        let kv_scale = x.scale_exp + layer.w_k.scale_exp() + quant.qkv_shift as i32;
        let q16 = quant.requant_vec(&q_wide, quant.qkv_shift, quant.transfer_width, clamps);
        let k16 = quant.requant_vec(&k_wide, quant.qkv_shift, quant.transfer_width, clamps);
        let v16 = quant.requant_vec(&v_wide, quant.qkv_shift, quant.transfer_width, clamps);
        cache.append(li, k16, v16)?;

        let q_vec = ActivationVector::new(q16, quant.transfer_width, kv_scale)?;
        let attn = attention_host(
            &q_vec,
            cache.keys(li),
            cache.values(li),
            t.d_model as usize,
            quant,
            clamps,
        )?;
        let a8 = quant.requant_vec(
            &attn.values.iter().map(|&v| v as i64).collect::<Vec<_>>(),
            quant.attn_residual_shift,
            aw,
            clamps,
        );
        let h_vals = if opts.residual {
            quant.add_sat(&x.values, &a8, aw, clamps)
        } else {
            a8
        };
        let h = ActivationVector::new(h_vals, aw, x.scale_exp)?;

        let ffn = ffn_device(&h, &layer.w_1, &layer.w_2, &layer.w_3, opts.activation, quant, clamps)?;
        let x_vals = if opts.residual {
            quant.add_sat(&h.values, &ffn.values, aw, clamps)
        } else {
            ffn.values
        };
        x = ActivationVector::new(x_vals, aw, h.scale_exp)?;
    }

    let acc_head = min_acc_width(aw, t.weight_width, t.d_model as usize);
    let logits_wide = matvec_int(&bundle.head, &x, acc_head)?;
    let logits = quant.requant_vec(&logits_wide, quant.head_shift, quant.transfer_width, clamps);
    ActivationVector::new(
        logits,
        quant.transfer_width,
        x.scale_exp + bundle.head.scale_exp() + quant.head_shift as i32,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleStrategy {
    /// Argmax with lowest-index tie-break.
    Greedy,
    /// Sample among the k largest logits.
    TopK(usize),
    /// Sample within the smallest probability mass >= p.
    Nucleus(f64),
}

/// One uniform draw in [0, 1) from a seeded ChaCha8 stream.
fn uniform_unit(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (rng.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
}

fn softmax_dequant(logits: &ActivationVector) -> Vec<f64> {
    let scale = (2.0f64).powi(logits.scale_exp);
    let max = logits.values.iter().cloned().max().unwrap() as f64 * scale;
    let exps: Vec<f64> = logits
        .values
        .iter()
        .map(|&v| (v as f64 * scale - max).exp())
        .collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Inverse-CDF draw over candidate indices scanned in ascending index
/// order with probabilities renormalized over the candidate set.
fn categorical_over(candidates: &[usize], probs: &[f64], u: f64) -> usize {
    let mass: f64 = candidates.iter().map(|&i| probs[i]).sum();
    let mut sorted: Vec<usize> = candidates.to_vec();
    sorted.sort_unstable();
    let mut cum = 0.0;
    for &i in &sorted {
        cum += probs[i] / mass;
        if u < cum {
            return i;
        }
    }
    *sorted.last().unwrap()
}

/// Draws the next token id from the logits.
///
/// Stochastic strategies are deterministic given the seed: a single
/// uniform draw from a ChaCha8 stream selects within the candidate set.
pub fn sample(logits: &ActivationVector, strategy: SampleStrategy, seed: u64) -> Result<usize> {
    if logits.is_empty() {
        return Err(Error::InvalidSampling("empty logits".into()));
    }
    match strategy {
        SampleStrategy::Greedy => {
            let mut best = 0usize;
            for (i, &v) in logits.values.iter().enumerate() {
                if v > logits.values[best] {
                    best = i;
                }
            }
            Ok(best)
        }
        SampleStrategy::TopK(k) => {
            if k == 0 {
                return Err(Error::InvalidSampling("top-k needs k >= 1".into()));
            }
            let k = k.min(logits.len());
            let mut order: Vec<usize> = (0..logits.len()).collect();
            // value descending, index ascending for ties
            order.sort_by(|&a, &b| {
                logits.values[b]
                    .cmp(&logits.values[a])
                    .then(a.cmp(&b))
            });
            let candidates = &order[..k];
            let probs = softmax_dequant(logits);
            Ok(categorical_over(candidates, &probs, uniform_unit(seed)))
        }
        SampleStrategy::Nucleus(p) => {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidSampling(format!(
                    "nucleus needs 0 < p <= 1, got {p}"
                )));
            }
            let probs = softmax_dequant(logits);
            let mut order: Vec<usize> = (0..logits.len()).collect();
            order.sort_by(|&a, &b| {
                logits.values[b]
                    .cmp(&logits.values[a])
                    .then(a.cmp(&b))
            });
            let mut cum = 0.0;
            let mut cut = order.len();
            for (rank, &i) in order.iter().enumerate() {
                cum += probs[i];
                if cum >= p {
                    cut = rank + 1;
                    break;
                }
            }
            let candidates = &order[..cut];
            Ok(categorical_over(candidates, &probs, uniform_unit(seed)))
        }
    }
}
