//! Host/device split inference protocol: exact per-token traffic,
//! sustained bandwidth, per-interface latency, throughput scenarios, and
//! a functional token-generation loop checked against the monolithic
//! reference path.
//!
//! Per layer, only the Key/Value projections travel device-to-host and
//! the attention output travels back; logits cross once per token. The
//! query vector the host needs is carried alongside the KV upload but
//! deliberately kept out of the counted byte totals, which follow the
//! published accounting exactly; its bytes are reported separately.
//!
//! Timing is closed-form (bytes over effective rate plus fixed compute
//! terms), not event-driven; the pipeline stages are executed
//! functionally in order.

use crate::error::{Error, Result};
use crate::model::{ModelBundle, TransformerTopology};
use crate::netlist::{evaluate, synth_neuron, Netlist};
use crate::csd::{plan_weight, PlanMode};
use crate::reference::{
    attention_host, forward_token, matvec_int, min_acc_width, sample, ActivationVector,
    ForwardOptions, ForwardTrace, KvCache, QuantSpec, SampleStrategy,
};
use serde::Serialize;
use std::collections::BTreeMap;

/// A host/device link, reduced to an effective byte rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterfaceSpec {
    pub name: String,
    pub effective_bytes_per_sec: f64,
    pub phy_cost_usd: f64,
    pub line_rate_gbps: f64,
}

impl InterfaceSpec {
    pub fn pcie3x4() -> Self {
        Self {
            name: "pcie3x4".into(),
            effective_bytes_per_sec: 4e9,
            phy_cost_usd: 15.0,
            line_rate_gbps: 32.0,
        }
    }

    pub fn tb4() -> Self {
        Self {
            name: "tb4".into(),
            effective_bytes_per_sec: 5e9,
            phy_cost_usd: 30.0,
            line_rate_gbps: 40.0,
        }
    }

    pub fn usb3() -> Self {
        Self {
            name: "usb3".into(),
            effective_bytes_per_sec: 3e8,
            phy_cost_usd: 5.0,
            line_rate_gbps: 5.0,
        }
    }

    pub fn usb4() -> Self {
        Self {
            name: "usb4".into(),
            effective_bytes_per_sec: 2e9,
            phy_cost_usd: 10.0,
            line_rate_gbps: 40.0,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "pcie3x4" => Some(Self::pcie3x4()),
            "tb4" => Some(Self::tb4()),
            "usb3" => Some(Self::usb3()),
            "usb4" => Some(Self::usb4()),
            _ => None,
        }
    }

    pub fn all_presets() -> Vec<Self> {
        vec![Self::pcie3x4(), Self::tb4(), Self::usb3(), Self::usb4()]
    }
}

/// Fixed per-token compute terms on either side of the link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencyBudget {
    pub device_compute_s: f64,
    pub host_attention_s: f64,
}

impl Default for LatencyBudget {
    fn default() -> Self {
        Self {
            device_compute_s: 64e-6,
            host_attention_s: 5e-3,
        }
    }
}

/// Host attention latencies for the three published scenarios.
pub const ATTENTION_NPU_S: f64 = 5e-3;
pub const ATTENTION_CPU_LOW_S: f64 = 50e-3;
pub const ATTENTION_CPU_HIGH_S: f64 = 100e-3;

/// Exact per-token byte counts across the link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrafficProfile {
    pub n_layers: u64,
    /// Device-to-host K and V vectors, per layer.
    pub kv_up_bytes_per_layer: u64,
    /// Host-to-device attention output, per layer.
    pub attn_down_bytes_per_layer: u64,
    /// Device-to-host final logits, once per token.
    pub logits_bytes: u64,
    pub total_bytes_per_token: u64,
}

/// Which byte total feeds the latency model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ByteMode {
    /// Exact byte counts.
    Exact,
    /// The published mixed-unit convention: per-layer terms in KiB,
    /// logits in decimal KB, total re-expanded at 1000 B per "KB".
    Nominal,
}

impl TrafficProfile {
    pub fn bytes(&self, mode: ByteMode) -> f64 {
        match mode {
            ByteMode::Exact => self.total_bytes_per_token as f64,
            ByteMode::Nominal => self.nominal_bytes_per_token(),
        }
    }

    /// Mixed KiB/decimal-KB total, reproducing the published headline
    /// figure (832 "KB" -> 832,000 bytes for the 7B-class topology).
    pub fn nominal_bytes_per_token(&self) -> f64 {
        let per_layer_kib =
            (self.kv_up_bytes_per_layer + self.attn_down_bytes_per_layer) as f64 / 1024.0;
        let logits_kb = self.logits_bytes as f64 / 1000.0;
        (self.n_layers as f64 * per_layer_kib + logits_kb) * 1000.0
    }
}

/// Analytic traffic for one generated token.
pub fn per_token_traffic(topology: &TransformerTopology) -> Result<TrafficProfile> {
    topology.validate()?;
    let word = topology.transfer_width as u64 / 8;
    let kv_up = 2 * topology.d_model as u64 * word;
    let attn_down = topology.d_model as u64 * word;
    let logits = topology.vocab_size as u64 * word;
    let n_layers = topology.n_layers as u64;
    Ok(TrafficProfile {
        n_layers,
        kv_up_bytes_per_layer: kv_up,
        attn_down_bytes_per_layer: attn_down,
        logits_bytes: logits,
        total_bytes_per_token: n_layers * (kv_up + attn_down) + logits,
    })
}

/// Sustained link bandwidth at a token rate.
pub fn sustained_bandwidth(total_bytes_per_token: f64, tok_rate: f64) -> Result<f64> {
    if tok_rate < 0.0 {
        return Err(Error::InvalidModelInput("token rate must be >= 0".into()));
    }
    Ok(total_bytes_per_token * tok_rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TokenLatency {
    pub transfer_s: f64,
    pub total_s: f64,
    pub tok_per_s: f64,
}

/// Closed-form per-token latency: transfer + device compute + host
/// attention.
pub fn token_latency(
    profile: &TrafficProfile,
    iface: &InterfaceSpec,
    budget: &LatencyBudget,
    mode: ByteMode,
) -> Result<TokenLatency> {
    if iface.effective_bytes_per_sec <= 0.0 {
        return Err(Error::InvalidModelInput(
            "interface rate must be > 0".into(),
        ));
    }
    let transfer = profile.bytes(mode) / iface.effective_bytes_per_sec;
    let total = transfer + budget.device_compute_s + budget.host_attention_s;
    Ok(TokenLatency {
        transfer_s: transfer,
        total_s: total,
        tok_per_s: 1.0 / total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThroughputScenarios {
    /// Dedicated attention accelerator on the host (5 ms).
    pub npu_offload_tps: f64,
    /// Fast CPU attention (50 ms).
    pub cpu_low_tps: f64,
    /// Slow CPU attention (100 ms).
    pub cpu_high_tps: f64,
}

/// Token throughput across the three host-attention scenarios.
pub fn throughput_scenarios(
    profile: &TrafficProfile,
    iface: &InterfaceSpec,
    device_compute_s: f64,
    mode: ByteMode,
) -> Result<ThroughputScenarios> {
    let at = |host: f64| -> Result<f64> {
        let budget = LatencyBudget {
            device_compute_s,
            host_attention_s: host,
        };
        Ok(token_latency(profile, iface, &budget, mode)?.tok_per_s)
    };
    Ok(ThroughputScenarios {
        npu_offload_tps: at(ATTENTION_NPU_S)?,
        cpu_low_tps: at(ATTENTION_CPU_LOW_S)?,
        cpu_high_tps: at(ATTENTION_CPU_HIGH_S)?,
    })
}

// --- functional simulation ---------------------------------------------------

/// The staged device pipeline, executed in order for every layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PipelineStage {
    Input,
    QkvProjection,
    OutputSerdes,
    AttentionReceive,
    Ffn,
    Output,
}

pub const PIPELINE_STAGES: [PipelineStage; 6] = [
    PipelineStage::Input,
    PipelineStage::QkvProjection,
    PipelineStage::OutputSerdes,
    PipelineStage::AttentionReceive,
    PipelineStage::Ffn,
    PipelineStage::Output,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MessageKind {
    /// K and V vectors, device to host. Counted.
    KvUp,
    /// Attention output, host to device. Counted.
    AttnDown,
    /// Final logits, device to host. Counted.
    Logits,
    /// Query vector rider accompanying the KV upload. Reported, not
    /// counted: the published totals exclude it.
    QuerySideband,
    /// Initial token/activation injection. Reported, not counted.
    TokenIn,
}

impl MessageKind {
    pub fn counted(self) -> bool {
        matches!(self, MessageKind::KvUp | MessageKind::AttnDown | MessageKind::Logits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MessageEvent {
    pub layer: Option<u32>,
    pub kind: MessageKind,
    pub bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SimMode {
    SplitBrain,
    Monolithic,
}

/// How the device-side linear algebra is computed in split-brain mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DeviceBackend {
    /// Netlist evaluation for small topologies, integer matvec otherwise.
    Auto,
    Matvec,
    Netlist,
}

/// Netlist-backend size limit: one synthesized neuron per output column
/// stays tractable up to this many model dimensions.
pub const NETLIST_BACKEND_MAX_DIM: u32 = 16;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub mode: SimMode,
    pub iface: InterfaceSpec,
    pub budget: LatencyBudget,
    pub seed: u64,
    pub strategy: SampleStrategy,
    pub backend: DeviceBackend,
}

impl SimConfig {
    pub fn new(mode: SimMode) -> Self {
        Self {
            mode,
            iface: InterfaceSpec::pcie3x4(),
            budget: LatencyBudget::default(),
            seed: 0,
            strategy: SampleStrategy::Greedy,
            backend: DeviceBackend::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TokenRecord {
    pub token: usize,
    pub counted_bytes: u64,
    pub sideband_bytes: u64,
    pub transfer_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimTotals {
    pub counted_bytes: u64,
    pub sideband_bytes: u64,
    pub sim_time_s: f64,
    pub mean_tok_per_s: f64,
    pub clamp_events: u64,
    /// KV-cache sequence length after the run (prompt + generated).
    pub final_seq_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub tokens: Vec<usize>,
    pub per_token: Vec<TokenRecord>,
    pub totals: SimTotals,
    /// True when a netlist backend request fell back to matvec because
    /// the topology exceeds [`NETLIST_BACKEND_MAX_DIM`].
    pub netlist_fallback: bool,
    pub used_netlist_backend: bool,
}

/// Synthesized device: one neuron netlist per output column of each
/// matrix, evaluated row-parallel like the physical dataflow engine.
struct NetlistDevice {
    /// Per matrix: (fan_in, neuron netlists per output column).
    matrices: BTreeMap<String, (usize, Vec<Netlist>)>,
}

impl NetlistDevice {
    fn build(bundle: &ModelBundle) -> Result<Self> {
        let mut matrices = BTreeMap::new();
        let mut add = |name: String, m: &crate::model::QuantizedWeightMatrix| -> Result<()> {
            let fan_in = m.rows() as usize;
            let acc = min_acc_width(8, m.weight_width(), fan_in) + 4;
            let mut neurons = Vec::with_capacity(m.cols() as usize);
            for col in 0..m.cols() {
                let plans: Vec<_> = m
                    .column(col)
                    .iter()
                    .map(|&q| plan_weight(q as i64, m.weight_width(), 0, PlanMode::Csd))
                    .collect::<Result<_>>()?;
                neurons.push(synth_neuron(&plans, fan_in, 8, acc)?);
            }
            matrices.insert(name, (fan_in, neurons));
            Ok(())
        };
        for (li, layer) in bundle.layers.iter().enumerate() {
            add(format!("l{li}.w_q"), &layer.w_q)?;
            add(format!("l{li}.w_k"), &layer.w_k)?;
            add(format!("l{li}.w_v"), &layer.w_v)?;
            add(format!("l{li}.w_1"), &layer.w_1)?;
            add(format!("l{li}.w_2"), &layer.w_2)?;
            add(format!("l{li}.w_3"), &layer.w_3)?;
        }
        add("head".into(), &bundle.head)?;
        Ok(Self { matrices })
    }

    /// Dot products via netlist evaluation; bit-for-bit equal to the
    /// integer matvec by construction, asserted in tests.
    fn matvec(&self, name: &str, xs: &[i32]) -> Result<Vec<i64>> {
        let (fan_in, neurons) = self
            .matrices
            .get(name)
            .ok_or_else(|| Error::MalformedNetlist(format!("no device matrix '{name}'")))?;
        debug_assert_eq!(*fan_in, xs.len());
        let inputs: BTreeMap<String, Vec<i64>> = xs
            .iter()
            .enumerate()
            .map(|(i, &v)| (format!("x{i}"), vec![v as i64; 2]))
            .collect();
        let mut out = Vec::with_capacity(neurons.len());
        for nl in neurons {
            let traces = evaluate(nl, &inputs, 2)?;
            out.push(traces["y"][1]);
        }
        Ok(out)
    }
}

enum Device {
    Matvec,
    Netlist(Box<NetlistDevice>),
}

impl Device {
    fn matvec(&self, name: &str, m: &crate::model::QuantizedWeightMatrix, xs: &[i32]) -> Result<Vec<i64>> {
        match self {
            Device::Matvec => {
                let x = ActivationVector::new(xs.to_vec(), 8, 0)?;
                matvec_int(m, &x, min_acc_width(8, m.weight_width(), m.rows() as usize))
            }
            Device::Netlist(dev) => dev.matvec(name, xs),
        }
    }
}

/// Runs the full autoregressive loop: prompt ingestion followed by
/// `n_new_tokens` sampled continuations.
///
/// In split-brain mode each layer executes the six pipeline stages with
/// explicit host/device messages whose counted bytes match
/// [`per_token_traffic`] exactly; in monolithic mode the reference
/// forward pass runs with no protocol at all. Both modes share the
/// quantization spec, the attention implementation, and the sampler, so
/// their token sequences must agree.
pub fn simulate_generation(
    bundle: &ModelBundle,
    prompt_tokens: &[usize],
    n_new_tokens: usize,
    cfg: &SimConfig,
) -> Result<SimResult> {
    if prompt_tokens.is_empty() {
        return Err(Error::InvalidModelInput("prompt must be non-empty".into()));
    }
    if n_new_tokens == 0 {
        return Err(Error::InvalidModelInput("n_new_tokens must be >= 1".into()));
    }
    bundle.validate()?;
    let topo = &bundle.topology;
    let quant = QuantSpec::for_topology(topo);
    let profile = per_token_traffic(topo)?;

    let fits_netlist = topo.d_model <= NETLIST_BACKEND_MAX_DIM
        && topo.d_ffn <= 2 * NETLIST_BACKEND_MAX_DIM
        && topo.vocab_size <= 4 * NETLIST_BACKEND_MAX_DIM;
    let (device, fallback, used_netlist) = match (cfg.mode, cfg.backend) {
        (SimMode::Monolithic, _) => (Device::Matvec, false, false),
        (_, DeviceBackend::Matvec) => (Device::Matvec, false, false),
        (_, DeviceBackend::Netlist) if fits_netlist => {
            (Device::Netlist(Box::new(NetlistDevice::build(bundle)?)), false, true)
        }
        (_, DeviceBackend::Netlist) => (Device::Matvec, true, false),
        (_, DeviceBackend::Auto) if fits_netlist => {
            (Device::Netlist(Box::new(NetlistDevice::build(bundle)?)), false, true)
        }
        (_, DeviceBackend::Auto) => (Device::Matvec, false, false),
    };

    let mut cache = KvCache::new(topo.n_layers, quant.transfer_width);
    let mut trace = ForwardTrace::default();
    let opts = ForwardOptions::default();

    let mut tokens = Vec::with_capacity(n_new_tokens);
    let mut per_token = Vec::with_capacity(n_new_tokens);
    let mut counted_total = 0u64;
    let mut sideband_total = 0u64;
    let mut time_total = 0.0f64;

    let run_step = |token: usize,
                    cache: &mut KvCache,
                    trace: &mut ForwardTrace,
                    events: Option<&mut Vec<MessageEvent>>|
     -> Result<ActivationVector> {
        match cfg.mode {
            SimMode::Monolithic => forward_token(bundle, token, cache, &quant, &opts, trace),
            SimMode::SplitBrain => split_brain_token_step(
                bundle, &device, token, cache, &quant, &opts, trace, &profile, events,
            ),
        }
    };

    // prompt ingestion: every prompt token flows through the same path
    let mut last_logits = None;
    for (i, &tok) in prompt_tokens.iter().enumerate() {
        let mut events = Vec::new();
        let logits = run_step(tok, &mut cache, &mut trace, Some(&mut events))?;
        if i == prompt_tokens.len() - 1 {
            last_logits = Some(logits);
        }
    }

    let mut logits = last_logits.unwrap();
    for step in 0..n_new_tokens {
        let tok = sample(&logits, cfg.strategy, cfg.seed.wrapping_add(step as u64))?;
        tokens.push(tok);

        let mut events = Vec::new();
        logits = run_step(tok, &mut cache, &mut trace, Some(&mut events))?;

        let (counted, sideband) = match cfg.mode {
            SimMode::SplitBrain => {
                let counted: u64 = events
                    .iter()
                    .filter(|e| e.kind.counted())
                    .map(|e| e.bytes)
                    .sum();
                let sideband: u64 = events
                    .iter()
                    .filter(|e| !e.kind.counted())
                    .map(|e| e.bytes)
                    .sum();
                (counted, sideband)
            }
            // the monolithic path has no link; account the analytic
            // profile so both modes time identically
            SimMode::Monolithic => (profile.total_bytes_per_token, 0),
        };
        let transfer = counted as f64 / cfg.iface.effective_bytes_per_sec;
        let total = transfer + cfg.budget.device_compute_s + cfg.budget.host_attention_s;
        counted_total += counted;
        sideband_total += sideband;
        time_total += total;
        per_token.push(TokenRecord {
            token: tok,
            counted_bytes: counted,
            sideband_bytes: sideband,
            transfer_s: transfer,
            total_s: total,
        });
    }

    let final_seq_len = if cache.n_layers() > 0 { cache.seq_len(0) } else { 0 };
    Ok(SimResult {
        tokens,
        per_token,
        totals: SimTotals {
            counted_bytes: counted_total,
            sideband_bytes: sideband_total,
            sim_time_s: time_total,
            mean_tok_per_s: n_new_tokens as f64 / time_total,
            clamp_events: trace.clamp_events,
            final_seq_len,
        },
        netlist_fallback: fallback,
        used_netlist_backend: used_netlist,
    })
}

/// One token through the staged pipeline with explicit messages.
///
/// This re-implements the layer loop of the monolithic reference on
/// purpose: the shared pieces are exactly the quantization spec and the
/// host attention routine, which is what makes token-sequence equality
/// between the two paths a meaningful check.
#[allow(clippy::too_many_arguments)]
fn split_brain_token_step(
    bundle: &ModelBundle,
    device: &Device,
    token: usize,
    cache: &mut KvCache,
    quant: &QuantSpec,
    opts: &ForwardOptions,
    trace: &mut ForwardTrace,
    profile: &TrafficProfile,
    mut events: Option<&mut Vec<MessageEvent>>,
) -> Result<ActivationVector> {
    let topo = &bundle.topology;
    if token >= topo.vocab_size as usize {
        return Err(Error::TokenOutOfRange {
            token,
            vocab: topo.vocab_size as usize,
        });
    }
    let aw = quant.activation_width;
    let word = topo.transfer_width as u64 / 8;
    let mut push = |ev: MessageEvent| {
        if let Some(events) = events.as_deref_mut() {
            events.push(ev);
        }
    };

    // host: embedding lookup, activation injected into the device
    let mut x: Vec<i32> = bundle
        .embedding
        .row(token as u32)
        .iter()
        .map(|&q| q as i32)
        .collect();
    let x_scale = bundle.embedding.scale_exp();
    push(MessageEvent {
        layer: None,
        kind: MessageKind::TokenIn,
        bytes: topo.d_model as u64 * (aw as u64 / 8).max(1),
    });

    let clamps = &mut trace.clamp_events;
    for (li, layer) in bundle.layers.iter().enumerate() {
        // stage: input + QKV projection on the device
        let q_wide = device.matvec(&format!("l{li}.w_q"), &layer.w_q, &x)?;
        let k_wide = device.matvec(&format!("l{li}.w_k"), &layer.w_k, &x)?;
        let v_wide = device.matvec(&format!("l{li}.w_v"), &layer.w_v, &x)?;
        let kv_scale = x_scale + layer.w_k.scale_exp() + quant.qkv_shift as i32;
        let requant_vec = |vs: &[i64], shift: u32, width: u32, clamps: &mut u64| -> Vec<i32> {
            vs.iter().map(|&v| quant.requant(v, shift, width, clamps)).collect()
        };
        let q16 = requant_vec(&q_wide, quant.qkv_shift, quant.transfer_width, clamps);
        let k16 = requant_vec(&k_wide, quant.qkv_shift, quant.transfer_width, clamps);
        let v16 = requant_vec(&v_wide, quant.qkv_shift, quant.transfer_width, clamps);

        // stage: output serdes, K and V up to the host (Q rides along,
        // reported but not counted)
        push(MessageEvent {
            layer: Some(li as u32),
            kind: MessageKind::KvUp,
            bytes: profile.kv_up_bytes_per_layer,
        });
        push(MessageEvent {
            layer: Some(li as u32),
            kind: MessageKind::QuerySideband,
            bytes: topo.d_model as u64 * word,
        });
        cache.append(li, k16, v16)?;

        // host: attention over the cache
        let q_vec = ActivationVector::new(q16, quant.transfer_width, kv_scale)?;
        let attn = attention_host(
            &q_vec,
            cache.keys(li),
            cache.values(li),
            topo.d_model as usize,
            quant,
            clamps,
        )?;

        // stage: attention receive, host down to the device
        push(MessageEvent {
            layer: Some(li as u32),
            kind: MessageKind::AttnDown,
            bytes: profile.attn_down_bytes_per_layer,
        });
        let a8: Vec<i32> = attn
            .values
            .iter()
            .map(|&v| quant.requant(v as i64, quant.attn_residual_shift, aw, clamps))
            .collect();
        let h: Vec<i32> = if opts.residual {
            x.iter()
                .zip(&a8)
                .map(|(&a, &b)| quant.requant(a as i64 + b as i64, 0, aw, clamps))
                .collect()
        } else {
            a8
        };

        // stage: FFN on the device
        let gate_wide = device.matvec(&format!("l{li}.w_1"), &layer.w_1, &h)?;
        let up_wide = device.matvec(&format!("l{li}.w_3"), &layer.w_3, &h)?;
        let gate_act: Vec<i64> = match opts.activation {
            crate::reference::Activation::Relu => gate_wide.iter().map(|&g| g.max(0)).collect(),
            crate::reference::Activation::SiluFloat => {
                let s = (2.0f64).powi(x_scale + layer.w_1.scale_exp());
                gate_wide
                    .iter()
                    .map(|&g| {
                        let real = g as f64 * s;
                        ((real / (1.0 + (-real).exp())) / s).floor() as i64
                    })
                    .collect()
            }
        };
        let g8 = requant_vec(&gate_act, quant.ffn_in_shift, aw, clamps);
        let u8v = requant_vec(&up_wide, quant.ffn_in_shift, aw, clamps);
        let prod: Vec<i64> = g8.iter().zip(&u8v).map(|(&g, &u)| g as i64 * u as i64).collect();
        let p8 = requant_vec(&prod, quant.ffn_prod_shift, aw, clamps);
        let down_wide = device.matvec(&format!("l{li}.w_2"), &layer.w_2, &p8)?;
        let f8 = requant_vec(&down_wide, quant.ffn_out_shift, aw, clamps);

        // stage: output to the next layer
        x = if opts.residual {
            h.iter()
                .zip(&f8)
                .map(|(&a, &b)| quant.requant(a as i64 + b as i64, 0, aw, clamps))
                .collect()
        } else {
            f8
        };
    }

    // device: output head, logits up to the host
    let logits_wide = device.matvec("head", &bundle.head, &x)?;
    let logits: Vec<i32> = logits_wide
        .iter()
        .map(|&v| quant.requant(v, quant.head_shift, quant.transfer_width, clamps))
        .collect();
    push(MessageEvent {
        layer: None,
        kind: MessageKind::Logits,
        bytes: profile.logits_bytes,
    });
    ActivationVector::new(
        logits,
        quant.transfer_width,
        x_scale + bundle.head.scale_exp() + quant.head_shift as i32,
    )
}
