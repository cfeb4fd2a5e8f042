//! hardwire: compile quantized weights into hardwired netlists and RTL,
//! estimate the silicon, and simulate split host/device inference.

mod config;
mod report;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use config::ReferenceConfig;
use hardwire_core::csd::{plan_weight, PlanMode};
use hardwire_core::model::{
    generate_synthetic, load_bundle, save_bundle, ModelBundle, QuantizedWeightMatrix,
    TransformerTopology,
};
use hardwire_core::netlist::{
    count_gates, evaluate_const, structural_stats, synth_neuron, Netlist,
};
use hardwire_core::rtl::{
    emit_netlist_rtl, emit_network_rtl, emit_testbench, RtlVariant, TestVector,
};
use hardwire_core::splitbrain::{
    per_token_traffic, simulate_generation, sustained_bandwidth, token_latency, ByteMode,
    DeviceBackend, InterfaceSpec, LatencyBudget, SimConfig, SimMode, ATTENTION_CPU_HIGH_S,
    ATTENTION_CPU_LOW_S, ATTENTION_NPU_S,
};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use report::{full_report, OutputFormat, ReportDocument, Row, Section};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "hardwire",
    version,
    about = "Weight-to-silicon compiler, estimator, and split-inference simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile weights into netlists, gate reports, and Verilog.
    Compile(CompileArgs),
    /// Run the area/cost/power estimators for a model preset.
    Estimate(EstimateArgs),
    /// Simulate token generation over a host/device link.
    Simulate(SimulateArgs),
    /// Render the full computed-vs-reference report.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Variant {
    Hardwired,
    Generic,
}

impl From<Variant> for RtlVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Hardwired => RtlVariant::Hardwired,
            Variant::Generic => RtlVariant::GenericBaseline,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CompileTarget {
    /// Every device-side matrix of a model bundle.
    Model,
    /// A single dot-product neuron with seeded weights.
    Neuron,
    /// The layered benchmark network (see --sizes).
    Network,
}

#[derive(Args)]
struct CompileArgs {
    /// Load weights from an .itw file instead of generating them.
    #[arg(long, conflicts_with = "synthetic")]
    weights: Option<PathBuf>,
    /// Generate synthetic weights for a named preset (e.g. "tiny").
    #[arg(long)]
    synthetic: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = CompileTarget::Model)]
    target: CompileTarget,
    /// Neuron fan-in for --target neuron.
    #[arg(long, default_value_t = 64)]
    fanin: usize,
    /// Comma-separated layer sizes for --target network.
    #[arg(long, default_value = "64,128,64")]
    sizes: String,
    #[arg(long, value_enum, default_value_t = Variant::Hardwired)]
    variant: Variant,
    #[arg(long)]
    out: PathBuf,
    /// Accumulator width for synthesized arithmetic.
    #[arg(long, default_value_t = 24)]
    acc_width: u32,
}

#[derive(Args)]
struct EstimateArgs {
    /// Model preset: tinyllama-1.1b, llama2-7b, or custom.
    #[arg(long, default_value = "tinyllama-1.1b")]
    model: String,
    /// Parameter count for --model custom.
    #[arg(long)]
    params: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Markdown)]
    format: OutputFormat,
    /// Write to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AttentionScenario {
    /// Dedicated attention hardware on the host: 5 ms.
    Npu,
    /// Fast CPU attention: 50 ms.
    CpuLow,
    /// Slow CPU attention: 100 ms.
    CpuHigh,
}

impl AttentionScenario {
    fn seconds(self) -> f64 {
        match self {
            AttentionScenario::Npu => ATTENTION_NPU_S,
            AttentionScenario::CpuLow => ATTENTION_CPU_LOW_S,
            AttentionScenario::CpuHigh => ATTENTION_CPU_HIGH_S,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InterfaceName {
    Pcie3x4,
    Tb4,
    Usb3,
    Usb4,
}

impl InterfaceName {
    fn spec(self) -> InterfaceSpec {
        match self {
            InterfaceName::Pcie3x4 => InterfaceSpec::pcie3x4(),
            InterfaceName::Tb4 => InterfaceSpec::tb4(),
            InterfaceName::Usb3 => InterfaceSpec::usb3(),
            InterfaceName::Usb4 => InterfaceSpec::usb4(),
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Model preset (tiny, tinyllama-1.1b, llama2-7b) for the topology.
    #[arg(long, default_value = "tiny")]
    model: String,
    #[arg(long, value_enum, default_value_t = InterfaceName::Pcie3x4)]
    interface: InterfaceName,
    #[arg(long, value_enum, default_value_t = AttentionScenario::Npu)]
    attention: AttentionScenario,
    /// New tokens to generate (functional simulation, small models only).
    #[arg(long, default_value_t = 20)]
    tokens: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated prompt token ids.
    #[arg(long, default_value = "1")]
    prompt: String,
    /// Run both split and monolithic paths and compare token sequences.
    #[arg(long)]
    verify: bool,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Markdown)]
    format: OutputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Include every section (always on; kept for compatibility).
    #[arg(long, default_value_t = true)]
    all: bool,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Markdown)]
    format: OutputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Compile(args) => cmd_compile(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Report(args) => cmd_report(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn emit_output(text: &str, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
    }
}

// --- compile -----------------------------------------------------------------

#[derive(Serialize)]
struct MatrixGateReport {
    name: String,
    rows: u32,
    cols: u32,
    adds: usize,
    subs: usize,
    negates: usize,
    registers: usize,
    shift_wires: usize,
    total_nand2: f64,
}

#[derive(Serialize)]
struct GateReportFile {
    cost_table: hardwire_core::netlist::GateCostTable,
    matrices: Vec<MatrixGateReport>,
    total_nand2: f64,
}

/// Functional compilation stays desk-scale; larger models go through
/// `estimate`, which never materializes weights.
const MAX_COMPILE_DIM: u32 = 64;

fn cmd_compile(args: CompileArgs) -> anyhow::Result<()> {
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    match args.target {
        CompileTarget::Neuron => compile_neuron(&args),
        CompileTarget::Network => compile_network(&args),
        CompileTarget::Model => compile_model(&args),
    }
}

fn synth_weights_stream(seed: u64, count: usize) -> Vec<i8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| ((rng.next_u64() & 15) as i64 - 8) as i8).collect()
}

fn neuron_from_weights(weights: &[i8], acc_width: u32) -> anyhow::Result<Netlist> {
    let plans: Vec<_> = weights
        .iter()
        .map(|&q| plan_weight(q as i64, 4, 0, PlanMode::Csd))
        .collect::<hardwire_core::Result<_>>()?;
    Ok(synth_neuron(&plans, weights.len(), 8, acc_width)?)
}

fn compile_neuron(args: &CompileArgs) -> anyhow::Result<()> {
    let weights = synth_weights_stream(args.seed, args.fanin);
    let nl = neuron_from_weights(&weights, args.acc_width)?;
    let art = emit_netlist_rtl(&nl, "neuron")?;

    // ten self-checking vectors straight from the evaluator
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed ^ 0x74657374);
    let vectors: Vec<TestVector> = (0..10)
        .map(|_| {
            let inputs: BTreeMap<String, i64> = (0..args.fanin)
                .map(|i| (format!("x{i}"), (rng.next_u64() & 255) as i64 - 128))
                .collect();
            let out = evaluate_const(&nl, &inputs, 2).expect("synthesized neuron evaluates");
            let mut expected = BTreeMap::new();
            expected.insert("y".to_string(), out["y"][1]);
            TestVector { inputs, expected }
        })
        .collect();
    let tb = emit_testbench(&art, &vectors)?;

    let stats = structural_stats(&nl);
    let table = hardwire_core::netlist::GateCostTable::default();
    let gates = count_gates(&nl, &table);
    let report = GateReportFile {
        cost_table: table,
        matrices: vec![MatrixGateReport {
            name: "neuron".into(),
            rows: args.fanin as u32,
            cols: 1,
            adds: stats.adds,
            subs: stats.subs,
            negates: stats.negates,
            registers: stats.registers,
            shift_wires: stats.wires,
            total_nand2: gates.total,
        }],
        total_nand2: gates.total,
    };

    write_out(&args.out, "neuron.v", &art.source_text)?;
    write_out(&args.out, "neuron_tb.v", &tb)?;
    write_out(&args.out, "neuron.netlist.txt", &nl.to_text())?;
    write_out(&args.out, "gate_report.json", &to_json(&report)?)?;
    println!(
        "compiled neuron: fan-in {}, {:.0} NAND2-eq, artifacts in {}",
        args.fanin,
        gates.total,
        args.out.display()
    );
    Ok(())
}

fn compile_network(args: &CompileArgs) -> anyhow::Result<()> {
    let sizes: Vec<u32> = args
        .sizes
        .split(',')
        .map(|s| s.trim().parse().context("parsing --sizes"))
        .collect::<anyhow::Result<_>>()?;
    if sizes.len() < 2 {
        bail!("--sizes needs at least two comma-separated sizes");
    }
    if sizes.iter().any(|&s| s == 0 || s > 256) {
        bail!("network layer sizes must be in 1..=256");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut matrices = Vec::new();
    for pair in sizes.windows(2) {
        let (rows, cols) = (pair[0], pair[1]);
        let values: Vec<i8> = (0..rows as usize * cols as usize)
            .map(|_| ((rng.next_u64() & 15) as i64 - 8) as i8)
            .collect();
        matrices.push(QuantizedWeightMatrix::new(rows, cols, 4, -3, values)?);
    }
    let refs: Vec<&QuantizedWeightMatrix> = matrices.iter().collect();
    let art = emit_network_rtl(&refs, args.variant.into(), "net", 8, args.acc_width)?;
    write_out(&args.out, "network.v", &art.source_text)?;
    write_out(&args.out, "network_stats.json", &to_json(&art.stats)?)?;
    println!(
        "compiled network {}: {} MAC sites, {} instantiated, artifacts in {}",
        args.sizes,
        art.stats.mac_sites.unwrap_or(0),
        art.stats.instantiated_macs.unwrap_or(0),
        args.out.display()
    );
    Ok(())
}

fn load_or_generate(args: &CompileArgs) -> anyhow::Result<(ModelBundle, bool)> {
    if let Some(path) = &args.weights {
        return Ok((load_bundle(path)?, false));
    }
    let preset = args.synthetic.as_deref().unwrap_or("tiny");
    let topo = TransformerTopology::preset(preset)
        .ok_or_else(|| anyhow::anyhow!("unknown preset '{preset}'"))?;
    Ok((generate_synthetic(&topo, args.seed)?, true))
}

fn compile_model(args: &CompileArgs) -> anyhow::Result<()> {
    let (bundle, generated) = load_or_generate(args)?;
    let t = &bundle.topology;
    if t.d_model > MAX_COMPILE_DIM || t.d_ffn > 2 * MAX_COMPILE_DIM || t.vocab_size > 4 * MAX_COMPILE_DIM {
        bail!(
            "model too large to hardwire at desk scale (d_model {} > {}); use `estimate` for \
             large models",
            t.d_model,
            MAX_COMPILE_DIM
        );
    }
    if generated {
        save_bundle(&bundle, &args.out.join("model.itw"))?;
    }

    let table = hardwire_core::netlist::GateCostTable::default();
    let mut reports = Vec::new();
    let mut grand_total = 0.0;
    let mut named: Vec<(String, &QuantizedWeightMatrix)> = Vec::new();
    for (li, layer) in bundle.layers.iter().enumerate() {
        named.push((format!("l{li}_wq"), &layer.w_q));
        named.push((format!("l{li}_wk"), &layer.w_k));
        named.push((format!("l{li}_wv"), &layer.w_v));
        named.push((format!("l{li}_w1"), &layer.w_1));
        named.push((format!("l{li}_w2"), &layer.w_2));
        named.push((format!("l{li}_w3"), &layer.w_3));
    }
    named.push(("head".into(), &bundle.head));

    for (name, matrix) in &named {
        let art = emit_network_rtl(
            &[*matrix],
            args.variant.into(),
            &format!("m_{name}"),
            8,
            args.acc_width,
        )?;
        write_out(&args.out, &format!("{name}.v"), &art.source_text)?;

        let mut adds = 0;
        let mut subs = 0;
        let mut negates = 0;
        let mut registers = 0;
        let mut wires = 0;
        let mut total = 0.0;
        let mut dump = String::new();
        for col in 0..matrix.cols() {
            let plans: Vec<_> = matrix
                .column(col)
                .iter()
                .map(|&q| plan_weight(q as i64, matrix.weight_width(), 0, PlanMode::Csd))
                .collect::<hardwire_core::Result<_>>()?;
            let nl = synth_neuron(&plans, matrix.rows() as usize, 8, args.acc_width)?;
            let s = structural_stats(&nl);
            adds += s.adds;
            subs += s.subs;
            negates += s.negates;
            registers += s.registers;
            wires += s.wires;
            total += count_gates(&nl, &table).total;
            dump.push_str(&nl.to_text());
            dump.push('\n');
        }
        write_out(&args.out, &format!("{name}.netlist.txt"), &dump)?;
        grand_total += total;
        reports.push(MatrixGateReport {
            name: name.clone(),
            rows: matrix.rows(),
            cols: matrix.cols(),
            adds,
            subs,
            negates,
            registers,
            shift_wires: wires,
            total_nand2: total,
        });
    }

    let report = GateReportFile {
        cost_table: table,
        matrices: reports,
        total_nand2: grand_total,
    };
    write_out(&args.out, "gate_report.json", &to_json(&report)?)?;
    println!(
        "compiled {} device matrices: {:.0} NAND2-eq total, artifacts in {}",
        named.len(),
        grand_total,
        args.out.display()
    );
    Ok(())
}

fn write_out(dir: &Path, name: &str, content: &str) -> anyhow::Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, content).with_context(|| format!("writing {}", path.display()))
}

fn to_json<T: Serialize>(value: &T) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

// --- estimate ------------------------------------------------------------------

fn cmd_estimate(args: EstimateArgs) -> anyhow::Result<()> {
    let cfg = ReferenceConfig::load(args.config.as_deref())?;
    let model = match args.model.as_str() {
        "tinyllama-1.1b" => cfg.small_model.clone(),
        "llama2-7b" => cfg.large_model.clone(),
        "custom" => {
            let params = args
                .params
                .ok_or_else(|| anyhow::anyhow!("--model custom requires --params"))?;
            if params < 0.0 {
                bail!("--params must be >= 0");
            }
            config::ModelEstimate {
                name: "custom".into(),
                nominal_params: params,
                chiplets: 1,
                chiplet_die_cost_usd: 0.0,
                published_silicon_mm2: 0.0,
            }
        }
        other => bail!("unknown model '{other}' (expected tinyllama-1.1b, llama2-7b, custom)"),
    };

    let doc = if model.name == "custom" {
        // no published columns for arbitrary parameter counts
        let chain = hardwire_core::analytics::die_area(model.nominal_params, &cfg.area)?;
        ReportDocument {
            title: format!("estimate: custom ({} params)", model.nominal_params),
            sections: vec![Section {
                title: "Area chain".into(),
                rows: vec![
                    Row::computed_only("raw storage area", "mm^2", chain.raw_mm2),
                    Row::computed_only("with routing", "mm^2", chain.routed_mm2),
                    Row::computed_only("with control", "mm^2", chain.with_control_mm2),
                    Row::computed_only("final", "mm^2", chain.final_mm2),
                ],
                notes: vec![],
            }],
        }
    } else {
        ReportDocument {
            title: format!("estimate: {}", model.name),
            sections: vec![
                report::area_cost_section(&cfg, &model),
                report::volume_section(&cfg),
                report::power_section(&cfg),
            ],
        }
    };
    emit_output(&doc.render(args.format), args.out.as_deref())
}

// --- simulate ------------------------------------------------------------------

/// Functional simulation materializes every weight; cap the model size.
const MAX_SIM_PARAMS: u64 = 10_000_000;

fn cmd_simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let cfg = ReferenceConfig::load(args.config.as_deref())?;
    let topo = TransformerTopology::preset(&args.model)
        .ok_or_else(|| anyhow::anyhow!("unknown model preset '{}'", args.model))?;
    let iface = args.interface.spec();
    let budget = LatencyBudget {
        device_compute_s: cfg.latency.device_compute_s,
        host_attention_s: args.attention.seconds(),
    };
    let profile = per_token_traffic(&topo)?;
    let latency = token_latency(&profile, &iface, &budget, ByteMode::Nominal)?;
    let latency_exact = token_latency(&profile, &iface, &budget, ByteMode::Exact)?;

    let mut sections = vec![Section {
        title: format!("Link analytics: {} over {}", args.model, iface.name),
        rows: vec![
            Row::computed_only("per-token bytes (exact)", "B", profile.total_bytes_per_token as f64),
            Row::computed_only("per-token bytes (mixed-unit)", "B", profile.nominal_bytes_per_token()),
            Row::computed_only(
                "sustained bandwidth at 20 tok/s",
                "MB/s",
                sustained_bandwidth(profile.nominal_bytes_per_token(), 20.0)? / 1e6,
            ),
            Row::computed_only("transfer latency", "ms", latency.transfer_s * 1e3),
            Row::computed_only("total latency", "ms", latency.total_s * 1e3),
            Row::computed_only("throughput", "tok/s", latency.tok_per_s),
            Row::computed_only("throughput (exact bytes)", "tok/s", latency_exact.tok_per_s),
        ],
        notes: vec![format!(
            "host attention {} ms, device compute {} us",
            budget.host_attention_s * 1e3,
            budget.device_compute_s * 1e6
        )],
    }];

    // functional simulation for desk-scale models
    let params_estimate = topo.n_layers as u64
        * (3 * topo.d_model as u64 * topo.d_model as u64
            + 3 * topo.d_model as u64 * topo.d_ffn as u64)
        + 2 * topo.vocab_size as u64 * topo.d_model as u64;
    if params_estimate <= MAX_SIM_PARAMS {
        let bundle = generate_synthetic(&topo, args.seed)?;
        let prompt: Vec<usize> = args
            .prompt
            .split(',')
            .map(|s| s.trim().parse().context("parsing --prompt"))
            .collect::<anyhow::Result<_>>()?;
        let mut sim_cfg = SimConfig::new(SimMode::SplitBrain);
        sim_cfg.iface = iface.clone();
        sim_cfg.budget = budget;
        sim_cfg.seed = args.seed;
        sim_cfg.backend = DeviceBackend::Auto;
        let split = simulate_generation(&bundle, &prompt, args.tokens, &sim_cfg)?;

        let bytes_ok = split
            .per_token
            .iter()
            .all(|r| r.counted_bytes == profile.total_bytes_per_token);
        let mut rows = vec![
            Row::computed_only("tokens generated", "count", split.tokens.len() as f64),
            Row::computed_only("simulated throughput", "tok/s", split.totals.mean_tok_per_s),
            Row::computed_only("counted bytes per token", "B", split.per_token[0].counted_bytes as f64),
            Row::computed_only("query sideband per token", "B", split.per_token[0].sideband_bytes as f64),
            Row::computed_only("saturation events", "count", split.totals.clamp_events as f64),
            Row::computed_only("byte accounting matches analytic", "bool", bytes_ok as i64 as f64),
        ];
        let mut notes = vec![format!(
            "device backend: {}",
            if split.used_netlist_backend { "netlist evaluation" } else { "integer matvec" }
        )];
        if split.netlist_fallback {
            notes.push("warning: netlist backend requested but topology too large; fell back to matvec".into());
        }

        if args.verify {
            let mut mono_cfg = SimConfig::new(SimMode::Monolithic);
            mono_cfg.iface = iface.clone();
            mono_cfg.budget = budget;
            mono_cfg.seed = args.seed;
            let mono = simulate_generation(&bundle, &prompt, args.tokens, &mono_cfg)?;
            let identical = mono.tokens == split.tokens;
            rows.push(Row::computed_only(
                "split/monolithic sequences identical",
                "bool",
                identical as i64 as f64,
            ));
            notes.push(format!(
                "verdict: {} over {} tokens",
                if identical { "EQUIVALENT" } else { "MISMATCH" },
                split.tokens.len()
            ));
            if !identical {
                bail!("split-brain and monolithic token sequences diverged");
            }
        }
        sections.push(Section {
            title: "Functional simulation".into(),
            rows,
            notes,
        });
    } else if args.verify {
        bail!(
            "--verify requires a desk-scale model (<= {MAX_SIM_PARAMS} params); '{}' has ~{params_estimate}",
            args.model
        );
    } else {
        sections.push(Section {
            title: "Functional simulation".into(),
            rows: vec![],
            notes: vec![format!(
                "skipped: '{}' (~{params_estimate} params) exceeds the desk-scale cap of {MAX_SIM_PARAMS}; \
                 link analytics above are closed-form",
                args.model
            )],
        });
    }

    let doc = ReportDocument {
        title: format!("simulation: {}", args.model),
        sections,
    };
    emit_output(&doc.render(args.format), args.out.as_deref())
}

// --- report --------------------------------------------------------------------

fn cmd_report(args: ReportArgs) -> anyhow::Result<()> {
    let cfg = ReferenceConfig::load(args.config.as_deref())?;
    let doc = full_report(&cfg);
    emit_output(&doc.render(args.format), args.out.as_deref())
}
