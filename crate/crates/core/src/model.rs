//! Transformer topology, quantized weight storage, and the `.itw` on-disk
//! weight format.
//!
//! Weights are plain signed integers with a shared power-of-two scale per
//! matrix (`real = q * 2^scale_exp`), so every downstream consumer can stay
//! in exact integer arithmetic. A seeded synthetic generator stands in for
//! real checkpoints; importing external checkpoint formats is out of scope.

use crate::error::{Error, Result};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Default power-of-two scale for synthetic weights: `real = q * 2^-3`.
/// Chosen so the representable grid includes small fractional values such
/// as 0.375 while keeping unit weights in range.
pub const DEFAULT_SCALE_EXP: i32 = -3;

/// Magic bytes at the start of every `.itw` (integer transformer weights) file.
pub const ITW_MAGIC: &[u8; 4] = b"ITW1";
/// Current `.itw` format version.
pub const ITW_VERSION: u8 = 1;

/// Model dimensions and the fixed-point widths used throughout the toolchain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformerTopology {
    pub n_layers: u32,
    pub d_model: u32,
    pub d_ffn: u32,
    pub vocab_size: u32,
    /// Bits per on-device activation (INT8 by default).
    pub activation_width: u32,
    /// Bits per hardwired weight (INT4 by default).
    pub weight_width: u32,
    /// Bits per value crossing the host/device link (INT16 by default).
    pub transfer_width: u32,
}

impl TransformerTopology {
    /// Topology with the default 8/4/16 bit widths.
    pub fn new(n_layers: u32, d_model: u32, d_ffn: u32, vocab_size: u32) -> Self {
        Self {
            n_layers,
            d_model,
            d_ffn,
            vocab_size,
            activation_width: 8,
            weight_width: 4,
            transfer_width: 16,
        }
    }

    /// 32 layers, d_model 4096, d_ffn 11008, 32000-entry vocabulary.
    pub fn llama2_7b() -> Self {
        Self::new(32, 4096, 11008, 32000)
    }

    /// 22 layers, d_model 2048, d_ffn 5632, 32000-entry vocabulary.
    pub fn tinyllama_1_1b() -> Self {
        Self::new(22, 2048, 5632, 32000)
    }

    /// Two-layer desk-scale model used throughout the test suite.
    pub fn tiny_test() -> Self {
        Self::new(2, 8, 16, 32)
    }

    /// Look up a named preset.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "llama2-7b" => Some(Self::llama2_7b()),
            "tinyllama-1.1b" => Some(Self::tinyllama_1_1b()),
            "tiny" => Some(Self::tiny_test()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.d_ffn == 0 || self.vocab_size == 0 {
            return Err(Error::InvalidTopology(
                "d_model, d_ffn and vocab_size must all be >= 1".into(),
            ));
        }
        for (name, w) in [
            ("activation_width", self.activation_width),
            ("weight_width", self.weight_width),
            ("transfer_width", self.transfer_width),
        ] {
            if !(2..=32).contains(&w) {
                return Err(Error::InvalidTopology(format!(
                    "{name} must be in 2..=32, got {w}"
                )));
            }
        }
        Ok(())
    }
}

/// Dense matrix of quantized weights. `rows` is the input dimension and
/// `cols` the output dimension, so `y = x * W` with `x.len() == rows`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedWeightMatrix {
    rows: u32,
    cols: u32,
    scale_exp: i32,
    weight_width: u32,
    values: Vec<i8>,
}

/// Inclusive signed range for a bit width: `[-(2^(w-1)), 2^(w-1) - 1]`.
pub fn signed_range(width: u32) -> (i64, i64) {
    debug_assert!((1..=63).contains(&width));
    (-(1i64 << (width - 1)), (1i64 << (width - 1)) - 1)
}

impl QuantizedWeightMatrix {
    pub fn new(
        rows: u32,
        cols: u32,
        weight_width: u32,
        scale_exp: i32,
        values: Vec<i8>,
    ) -> Result<Self> {
        if values.len() != rows as usize * cols as usize {
            return Err(Error::ShapeMismatch {
                expected: format!("{rows}x{cols} = {} values", rows as usize * cols as usize),
                found: format!("{} values", values.len()),
            });
        }
        let (lo, hi) = signed_range(weight_width);
        for &v in &values {
            if (v as i64) < lo || (v as i64) > hi {
                return Err(Error::ValueOutOfRange {
                    value: v as i64,
                    width: weight_width,
                });
            }
        }
        Ok(Self {
            rows,
            cols,
            scale_exp,
            weight_width,
            values,
        })
    }

    pub fn rows(&self) -> u32 {
        self.rows
    }

    pub fn cols(&self) -> u32 {
        self.cols
    }

    pub fn scale_exp(&self) -> i32 {
        self.scale_exp
    }

    pub fn weight_width(&self) -> u32 {
        self.weight_width
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn get(&self, row: u32, col: u32) -> i8 {
        debug_assert!(row < self.rows && col < self.cols);
        self.values[row as usize * self.cols as usize + col as usize]
    }

    /// One output column: the weights feeding output `col`.
    pub fn column(&self, col: u32) -> Vec<i8> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    /// One input row.
    pub fn row(&self, row: u32) -> &[i8] {
        let c = self.cols as usize;
        &self.values[row as usize * c..(row as usize + 1) * c]
    }

    pub fn element_count(&self) -> u64 {
        self.rows as u64 * self.cols as u64
    }

    pub(crate) fn with_values(&self, values: Vec<i8>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            values,
            ..self.clone()
        }
    }
}

/// The six per-layer projection matrices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerWeights {
    pub w_q: QuantizedWeightMatrix,
    pub w_k: QuantizedWeightMatrix,
    pub w_v: QuantizedWeightMatrix,
    pub w_1: QuantizedWeightMatrix,
    pub w_2: QuantizedWeightMatrix,
    pub w_3: QuantizedWeightMatrix,
}

impl LayerWeights {
    fn matrices(&self) -> [&QuantizedWeightMatrix; 6] {
        [&self.w_q, &self.w_k, &self.w_v, &self.w_1, &self.w_2, &self.w_3]
    }
}

/// A complete model: topology plus every weight matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelBundle {
    pub topology: TransformerTopology,
    /// `vocab_size x d_model` token embedding table.
    pub embedding: QuantizedWeightMatrix,
    pub layers: Vec<LayerWeights>,
    /// `d_model x vocab_size` output head.
    pub head: QuantizedWeightMatrix,
}

impl ModelBundle {
    /// Checks that every matrix shape is consistent with the topology.
    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        let t = &self.topology;
        let check = |m: &QuantizedWeightMatrix, r: u32, c: u32, name: &str| -> Result<()> {
            if m.rows != r || m.cols != c {
                return Err(Error::ShapeMismatch {
                    expected: format!("{name}: {r}x{c}"),
                    found: format!("{}x{}", m.rows, m.cols),
                });
            }
            Ok(())
        };
        check(&self.embedding, t.vocab_size, t.d_model, "embedding")?;
        check(&self.head, t.d_model, t.vocab_size, "head")?;
        if self.layers.len() != t.n_layers as usize {
            return Err(Error::ShapeMismatch {
                expected: format!("{} layers", t.n_layers),
                found: format!("{} layers", self.layers.len()),
            });
        }
        for (i, layer) in self.layers.iter().enumerate() {
            check(&layer.w_q, t.d_model, t.d_model, &format!("layer {i} w_q"))?;
            check(&layer.w_k, t.d_model, t.d_model, &format!("layer {i} w_k"))?;
            check(&layer.w_v, t.d_model, t.d_model, &format!("layer {i} w_v"))?;
            check(&layer.w_1, t.d_model, t.d_ffn, &format!("layer {i} w_1"))?;
            check(&layer.w_2, t.d_ffn, t.d_model, &format!("layer {i} w_2"))?;
            check(&layer.w_3, t.d_model, t.d_ffn, &format!("layer {i} w_3"))?;
        }
        Ok(())
    }

    /// Iterate over all matrices in the fixed serialization order:
    /// embedding, then per layer (w_q, w_k, w_v, w_1, w_2, w_3), then head.
    pub fn matrices(&self) -> Vec<&QuantizedWeightMatrix> {
        let mut out = vec![&self.embedding];
        for layer in &self.layers {
            out.extend(layer.matrices());
        }
        out.push(&self.head);
        out
    }
}

/// Total parameter count: the sum of all matrix element counts, including
/// the embedding table and the output head.
pub fn count_params(bundle: &ModelBundle) -> u64 {
    bundle.matrices().iter().map(|m| m.element_count()).sum()
}

/// Deterministic synthetic weights for a topology.
///
/// All weights come from a single ChaCha8 stream seeded with `seed`; each
/// weight takes the low `weight_width` bits of the next 64-bit output,
/// biased into the signed range. The mask divides 2^64 exactly, so the
/// draw is uniform and independent of any distribution machinery, which
/// keeps generated bundles byte-identical across platforms.
pub fn generate_synthetic(topology: &TransformerTopology, seed: u64) -> Result<ModelBundle> {
    topology.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = topology.weight_width;
    let mask = (1u64 << w) - 1;
    let offset = 1i64 << (w - 1);
    let mut draw = |rows: u32, cols: u32| -> Result<QuantizedWeightMatrix> {
        let n = rows as usize * cols as usize;
        let values: Vec<i8> = (0..n)
            .map(|_| ((rng.next_u64() & mask) as i64 - offset) as i8)
            .collect();
        QuantizedWeightMatrix::new(rows, cols, w, DEFAULT_SCALE_EXP, values)
    };

    let t = topology;
    let embedding = draw(t.vocab_size, t.d_model)?;
    let mut layers = Vec::with_capacity(t.n_layers as usize);
    for _ in 0..t.n_layers {
        layers.push(LayerWeights {
            w_q: draw(t.d_model, t.d_model)?,
            w_k: draw(t.d_model, t.d_model)?,
            w_v: draw(t.d_model, t.d_model)?,
            w_1: draw(t.d_model, t.d_ffn)?,
            w_2: draw(t.d_ffn, t.d_model)?,
            w_3: draw(t.d_model, t.d_ffn)?,
        });
    }
    let head = draw(t.d_model, t.vocab_size)?;

    Ok(ModelBundle {
        topology: *topology,
        embedding,
        layers,
        head,
    })
}

// --- .itw serialization ---------------------------------------------------
//
// Layout, all integers little-endian:
//   magic "ITW1" | version u8 | topology (7 x u32) |
//   matrices in bundle order, each: rows u32 | cols u32 | scale_exp i32 |
//   ceil(rows*cols/2) bytes of packed 4-bit two's-complement values,
//   low nibble first.

/// Packs 4-bit two's-complement values two per byte, low nibble first.
pub fn pack_int4(values: &[i8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len().div_ceil(2));
    for pair in values.chunks(2) {
        let lo = (pair[0] as u8) & 0x0f;
        let hi = if pair.len() == 2 { (pair[1] as u8) & 0x0f } else { 0 };
        out.push(lo | (hi << 4));
    }
    out
}

/// Inverse of [`pack_int4`]; `count` is the number of values to recover.
pub fn unpack_int4(bytes: &[u8], count: usize) -> Vec<i8> {
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let byte = bytes[i / 2];
        let nibble = if i % 2 == 0 { byte & 0x0f } else { byte >> 4 };
        // sign-extend from 4 bits
        out.push(((nibble << 4) as i8) >> 4);
    }
    out
}

pub fn bundle_to_bytes(bundle: &ModelBundle) -> Result<Vec<u8>> {
    bundle.validate()?;
    if bundle.topology.weight_width != 4 {
        return Err(Error::UnsupportedWeightWidth(bundle.topology.weight_width));
    }
    let t = &bundle.topology;
    let mut out = Vec::new();
    out.extend_from_slice(ITW_MAGIC);
    out.push(ITW_VERSION);
    for field in [
        t.n_layers,
        t.d_model,
        t.d_ffn,
        t.vocab_size,
        t.activation_width,
        t.weight_width,
        t.transfer_width,
    ] {
        out.extend_from_slice(&field.to_le_bytes());
    }
    for m in bundle.matrices() {
        out.extend_from_slice(&m.rows.to_le_bytes());
        out.extend_from_slice(&m.cols.to_le_bytes());
        out.extend_from_slice(&m.scale_exp.to_le_bytes());
        out.extend_from_slice(&pack_int4(&m.values));
    }
    Ok(out)
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::TruncatedFile);
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn bundle_from_bytes(data: &[u8]) -> Result<ModelBundle> {
    let mut r = Reader { data, pos: 0 };
    if r.take(4)? != ITW_MAGIC {
        return Err(Error::BadMagic);
    }
    let version = r.take(1)?[0];
    if version != ITW_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let topology = TransformerTopology {
        n_layers: r.u32()?,
        d_model: r.u32()?,
        d_ffn: r.u32()?,
        vocab_size: r.u32()?,
        activation_width: r.u32()?,
        weight_width: r.u32()?,
        transfer_width: r.u32()?,
    };
    topology.validate()?;
    if topology.weight_width != 4 {
        return Err(Error::UnsupportedWeightWidth(topology.weight_width));
    }

    let read_matrix = |r: &mut Reader| -> Result<QuantizedWeightMatrix> {
        let rows = r.u32()?;
        let cols = r.u32()?;
        let scale_exp = r.i32()?;
        let n = rows as usize * cols as usize;
        let packed = r.take(n.div_ceil(2))?;
        QuantizedWeightMatrix::new(rows, cols, 4, scale_exp, unpack_int4(packed, n))
    };

    let embedding = read_matrix(&mut r)?;
    let mut layers = Vec::with_capacity(topology.n_layers as usize);
    for _ in 0..topology.n_layers {
        layers.push(LayerWeights {
            w_q: read_matrix(&mut r)?,
            w_k: read_matrix(&mut r)?,
            w_v: read_matrix(&mut r)?,
            w_1: read_matrix(&mut r)?,
            w_2: read_matrix(&mut r)?,
            w_3: read_matrix(&mut r)?,
        });
    }
    let head = read_matrix(&mut r)?;
    if r.pos != data.len() {
        return Err(Error::TrailingData);
    }

    let bundle = ModelBundle {
        topology,
        embedding,
        layers,
        head,
    };
    bundle.validate()?;
    Ok(bundle)
}

pub fn save_bundle(bundle: &ModelBundle, path: &Path) -> Result<()> {
    let bytes = bundle_to_bytes(bundle)?;
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn load_bundle(path: &Path) -> Result<ModelBundle> {
    let data = std::fs::read(path)?;
    bundle_from_bytes(&data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn llama_preset_matches_published_dims() {
        let t = TransformerTopology::llama2_7b();
        assert_eq!(t.n_layers, 32);
        assert_eq!(t.d_model, 4096);
        assert_eq!(t.d_ffn, 11008);
        assert_eq!(t.vocab_size, 32000);
    }

    #[test]
    fn generation_is_deterministic() {
        let t = TransformerTopology::tiny_test();
        let a = generate_synthetic(&t, 1).unwrap();
        let b = generate_synthetic(&t, 1).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&t, 2).unwrap();
        assert_ne!(a, c, "different seeds must differ in at least one weight");
    }

    #[test]
    fn count_params_tiny() {
        // 2 layers x (3*8*8 + 3*8*16) + embedding 32*8 + head 8*32
        let t = TransformerTopology::tiny_test();
        let b = generate_synthetic(&t, 0).unwrap();
        let by_shapes = 2 * (3 * 64 + 3 * 128) + 256 + 256;
        assert_eq!(count_params(&b), by_shapes);
        assert_eq!(by_shapes, 1664);
    }

    #[test]
    fn count_params_zero_layers() {
        let t = TransformerTopology::new(0, 1, 1, 1);
        let b = generate_synthetic(&t, 0).unwrap();
        assert_eq!(count_params(&b), 2); // embedding + head
    }

    #[test]
    fn count_params_llama_preset() {
        // Six projection matrices per layer (no output projection), so the
        // exact count is 6.2e9; the published round figure of ~7B includes
        // an attention output projection this bundle does not carry.
        let per_layer = 3u64 * 4096 * 4096 + 3 * 4096 * 11008;
        let expected = 32 * per_layer + 2 * 32000 * 4096;
        assert_eq!(expected, 6_201_278_464);
        // Bundle is too large to materialize; check the closed form against
        // a tiny bundle instead, where both paths are exercised.
        let tiny = generate_synthetic(&TransformerTopology::tiny_test(), 0).unwrap();
        let closed = |t: &TransformerTopology| {
            t.n_layers as u64
                * (3 * t.d_model as u64 * t.d_model as u64
                    + 3 * t.d_model as u64 * t.d_ffn as u64)
                + 2 * t.vocab_size as u64 * t.d_model as u64
        };
        assert_eq!(count_params(&tiny), closed(&tiny.topology));
        assert!((5.0e9..7.5e9).contains(&(expected as f64)));
    }

    #[test]
    fn pack_unpack_exhaustive() {
        for v in -8i8..=7 {
            let packed = pack_int4(&[v]);
            assert_eq!(unpack_int4(&packed, 1), vec![v]);
        }
        // pairs exercise the high nibble
        for a in -8i8..=7 {
            for b in -8i8..=7 {
                let packed = pack_int4(&[a, b]);
                assert_eq!(packed.len(), 1);
                assert_eq!(unpack_int4(&packed, 2), vec![a, b]);
            }
        }
    }

    #[test]
    fn roundtrip_tiny() {
        let b = generate_synthetic(&TransformerTopology::tiny_test(), 7).unwrap();
        let bytes = bundle_to_bytes(&b).unwrap();
        let b2 = bundle_from_bytes(&bytes).unwrap();
        assert_eq!(b, b2);
        assert_eq!(count_params(&b), count_params(&b2));
    }

    #[test]
    fn truncated_file_detected() {
        let b = generate_synthetic(&TransformerTopology::tiny_test(), 7).unwrap();
        let bytes = bundle_to_bytes(&b).unwrap();
        let cut = &bytes[..bytes.len() - 1];
        assert!(matches!(bundle_from_bytes(cut), Err(Error::TruncatedFile)));
    }

    #[test]
    fn bad_magic_detected() {
        let b = generate_synthetic(&TransformerTopology::tiny_test(), 7).unwrap();
        let mut bytes = bundle_to_bytes(&b).unwrap();
        bytes[0] ^= 0xff;
        assert!(matches!(bundle_from_bytes(&bytes), Err(Error::BadMagic)));
    }

    #[test]
    fn version_mismatch_detected() {
        let b = generate_synthetic(&TransformerTopology::tiny_test(), 7).unwrap();
        let mut bytes = bundle_to_bytes(&b).unwrap();
        bytes[4] = 99;
        assert!(matches!(
            bundle_from_bytes(&bytes),
            Err(Error::UnsupportedVersion(99))
        ));
    }

    #[test]
    fn trailing_data_detected() {
        let b = generate_synthetic(&TransformerTopology::tiny_test(), 7).unwrap();
        let mut bytes = bundle_to_bytes(&b).unwrap();
        bytes.push(0);
        assert!(matches!(bundle_from_bytes(&bytes), Err(Error::TrailingData)));
    }

    #[test]
    fn non_int4_width_rejected_for_packing() {
        let mut t = TransformerTopology::tiny_test();
        t.weight_width = 8;
        let b = generate_synthetic(&t, 0).unwrap();
        assert!(matches!(
            bundle_to_bytes(&b),
            Err(Error::UnsupportedWeightWidth(8))
        ));
    }

    #[test]
    fn topology_width_bounds() {
        let mut t = TransformerTopology::tiny_test();
        t.activation_width = 1;
        assert!(t.validate().is_err());
        t.activation_width = 33;
        assert!(t.validate().is_err());
        let mut t2 = TransformerTopology::tiny_test();
        t2.d_model = 0;
        assert!(t2.validate().is_err());
    }
}
