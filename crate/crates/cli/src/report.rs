//! Report document model and the section builders that fill it with
//! computed-vs-reference comparisons. The tool always prints both
//! columns; computed values are never silently replaced by published
//! ones.

use crate::config::ReferenceConfig;
use hardwire_core::analytics::{
    amortized_cost, die_area, dies_per_wafer, dram_fetch_energy, improvement_vs_int8,
    kv_cache_area_mm2, mac_energy, physical_wire_energy, power_density, system_power, unit_cost,
    MacArch,
};
use hardwire_core::csd::{csd_stats, plan_weight, PlanMode};
use hardwire_core::model::TransformerTopology;
use hardwire_core::netlist::{count_gates, synth_const_mac, synth_generic_mac};
use hardwire_core::splitbrain::{
    per_token_traffic, sustained_bandwidth, throughput_scenarios, token_latency, ByteMode,
    InterfaceSpec,
};
use serde::Serialize;
use std::fmt::Write as _;

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub metric: String,
    pub unit: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub computed: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl Row {
    pub fn compare(metric: &str, unit: &str, computed: f64, reference: f64) -> Self {
        Self {
            metric: metric.into(),
            unit: unit.into(),
            computed: Some(computed),
            reference: Some(reference),
            delta: Some(computed - reference),
            note: String::new(),
        }
    }

    pub fn computed_only(metric: &str, unit: &str, computed: f64) -> Self {
        Self {
            metric: metric.into(),
            unit: unit.into(),
            computed: Some(computed),
            reference: None,
            delta: None,
            note: String::new(),
        }
    }

    pub fn with_note(mut self, note: &str) -> Self {
        self.note = note.into();
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Section {
    pub title: String,
    pub rows: Vec<Row>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportDocument {
    pub title: String,
    pub sections: Vec<Section>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Markdown,
    Json,
    Csv,
}

impl ReportDocument {
    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Json => serde_json::to_string_pretty(self).expect("report serializes"),
            OutputFormat::Markdown => self.render_markdown(),
            OutputFormat::Csv => self.render_csv(),
        }
    }

    fn render_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {}\n", self.title);
        for sec in &self.sections {
            let _ = writeln!(s, "## {}\n", sec.title);
            let _ = writeln!(s, "| metric | computed | reference | delta | unit | note |");
            let _ = writeln!(s, "|---|---|---|---|---|---|");
            for r in &sec.rows {
                let fmt = |v: Option<f64>| match v {
                    Some(x) => format_value(x),
                    None => String::new(),
                };
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {} | {} | {} |",
                    r.metric,
                    fmt(r.computed),
                    fmt(r.reference),
                    fmt(r.delta),
                    r.unit,
                    r.note
                );
            }
            let _ = writeln!(s);
            for note in &sec.notes {
                let _ = writeln!(s, "> {note}");
            }
            if !sec.notes.is_empty() {
                let _ = writeln!(s);
            }
        }
        s
    }

    fn render_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "section,metric,computed,reference,delta,unit,note");
        for sec in &self.sections {
            for r in &sec.rows {
                let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{}",
                    csv_field(&sec.title),
                    csv_field(&r.metric),
                    fmt(r.computed),
                    fmt(r.reference),
                    fmt(r.delta),
                    r.unit,
                    csv_field(&r.note)
                );
            }
        }
        s
    }
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn format_value(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if x.abs() >= 1e6 || x.abs() < 1e-3 {
        format!("{x:.4e}")
    } else if (x - x.round()).abs() < 1e-9 {
        format!("{}", x.round() as i64)
    } else {
        format!("{x:.4}")
    }
}

// --- section builders -------------------------------------------------------

/// Per-MAC gate counts under the configured cost table, with the
/// published counts alongside. The ratio is asserted by the acceptance
/// suite only as a bracket; exact totals are cost-model-dependent.
pub fn gate_section(cfg: &ReferenceConfig) -> Section {
    let generic = count_gates(&synth_generic_mac(8, 8, 20).unwrap(), &cfg.gates);
    let mut hw_total = 0.0;
    let mut hw_tree = 0.0;
    let mut hw_acc = 0.0;
    let mut hw_reg = 0.0;
    for q in -8i64..=7 {
        let plan = plan_weight(q, 4, 0, PlanMode::Csd).unwrap();
        let r = count_gates(&synth_const_mac(&plan, 8, 20).unwrap(), &cfg.gates);
        hw_total += r.total;
        hw_tree += r.shift_add_tree;
        hw_acc += r.accumulator;
        hw_reg += r.pipeline_register;
    }
    let hw_mean = hw_total / 16.0;
    let ratio = generic.total / hw_mean;
    let p = &cfg.published;
    let csd = csd_stats(8).unwrap();
    Section {
        title: "Per-MAC gate counts (NAND2-equivalent)".into(),
        rows: vec![
            Row::compare("generic INT8 MAC", "gates", generic.total, p.gate_count_generic),
            Row::compare("hardwired INT4 MAC (mean over weights)", "gates", hw_mean, p.gate_count_hardwired),
            Row::compare("  shift-add tree", "gates", hw_tree / 16.0, p.gate_breakdown_tree),
            Row::compare("  accumulator", "gates", hw_acc / 16.0, p.gate_breakdown_accumulator),
            Row::compare("  pipeline register", "gates", hw_reg / 16.0, p.gate_breakdown_register),
            Row::compare("generic/hardwired ratio", "x", ratio, p.gate_ratio_analytical)
                .with_note("asserted only as a bracket [3.5, 6.0]"),
            Row::computed_only("FPGA-measured ratio (reference)", "x", p.gate_ratio_fpga)
                .with_note("reported for comparison, not modeled here"),
            Row::compare("width-8 CSD term reduction", "fraction", csd.reduction_ratio, 0.35)
                .with_note("reference states 30-40%; midpoint shown"),
        ],
        notes: vec![
            "The published breakdown implies a ~3-bit pipeline register at these per-bit costs, \
             which is inconsistent with any plausible accumulator width; the cost table is \
             configuration, not a constant."
                .into(),
        ],
    }
}

pub fn energy_section(cfg: &ReferenceConfig) -> Section {
    let e = &cfg.energy;
    let fp16 = mac_energy(MacArch::GpuFp16, e);
    let int8 = mac_energy(MacArch::GpuInt8, e);
    let hw = mac_energy(MacArch::Hardwired, e);
    let wire = physical_wire_energy(e);
    let fetch = dram_fetch_energy(14e9, e.dram_pj_per_bit).unwrap();
    Section {
        title: "Energy per MAC operation".into(),
        rows: vec![
            Row::compare("GPU FP16 total", "pJ", fp16.total_pj(), 401.1),
            Row::compare("GPU INT8 total", "pJ", int8.total_pj(), 201.0),
            Row::compare("hardwired total", "pJ", hw.total_pj(), 4.05),
            Row::compare("hardwired wire component", "pJ", hw.wire_pj, 4.0),
            Row::compare("hardwired compute component", "pJ", hw.compute_pj, 0.05),
            Row::compare("INT8/hardwired improvement", "x", improvement_vs_int8(e), 49.6),
            Row::compare("14 GB model DRAM fetch", "J/token", fetch, 2.24),
            Row::computed_only("physical wire energy (5 mm, 0.2 fF/um)", "pJ/transition", wire.pj_per_transition)
                .with_note("first-principles mode; order-of-magnitude only"),
        ],
        notes: vec![
            "SRAM access energy appears in the total-energy decomposition but is never \
             quantified in the reference analysis; it is carried in the config (default 0) \
             rather than folded in silently."
                .into(),
        ],
    }
}

pub fn traffic_section(cfg: &ReferenceConfig) -> Section {
    let topo = TransformerTopology::llama2_7b();
    let p = per_token_traffic(&topo).unwrap();
    let nominal = p.nominal_bytes_per_token();
    let bw = sustained_bandwidth(nominal, 20.0).unwrap();
    let bw_exact = sustained_bandwidth(p.total_bytes_per_token as f64, 20.0).unwrap();
    Section {
        title: "Per-token link traffic (7B-class topology)".into(),
        rows: vec![
            Row::computed_only("K+V up, per layer", "B", p.kv_up_bytes_per_layer as f64),
            Row::computed_only("attention down, per layer", "B", p.attn_down_bytes_per_layer as f64),
            Row::computed_only("logits, per token", "B", p.logits_bytes as f64),
            Row::compare("total per token (exact)", "B", p.total_bytes_per_token as f64, cfg.published.per_token_kb * 1024.0)
                .with_note("reference column is the 832 KiB reading"),
            Row::compare("total per token (mixed-unit convention)", "B", nominal, cfg.published.per_token_kb * 1000.0),
            Row::compare("sustained at 20 tok/s (mixed-unit)", "MB/s", bw / 1e6, cfg.published.sustained_mb_per_s),
            Row::computed_only("sustained at 20 tok/s (exact)", "MB/s", bw_exact / 1e6),
        ],
        notes: vec![
            "The published totals mix KiB for per-layer terms with decimal KB for logits; both \
             conventions are shown and the exact byte count is authoritative."
                .into(),
            "The host also needs the query vector each layer; the published accounting excludes \
             it, so the simulator carries it as an uncounted sideband and reports its bytes \
             separately."
                .into(),
        ],
    }
}

pub fn latency_section(cfg: &ReferenceConfig) -> Section {
    let topo = TransformerTopology::llama2_7b();
    let p = per_token_traffic(&topo).unwrap();
    let mut rows = Vec::new();
    for published in &cfg.published.interface_rows {
        let iface = InterfaceSpec::preset(&published.interface).expect("known preset");
        let l = token_latency(&p, &iface, &cfg.latency, ByteMode::Nominal).unwrap();
        rows.push(Row::compare(
            &format!("{} transfer", iface.name),
            "ms",
            l.transfer_s * 1e3,
            published.transfer_ms,
        ));
        rows.push(Row::compare(
            &format!("{} total", iface.name),
            "ms",
            l.total_s * 1e3,
            published.total_ms,
        ));
        rows.push(Row::compare(
            &format!("{} throughput", iface.name),
            "tok/s",
            l.tok_per_s,
            published.tok_per_s,
        ));
    }
    let s = throughput_scenarios(&p, &InterfaceSpec::pcie3x4(), cfg.latency.device_compute_s, ByteMode::Nominal).unwrap();
    rows.push(Row::compare("attention on NPU (5 ms)", "tok/s", s.npu_offload_tps, cfg.published.scenario_npu_tps));
    rows.push(Row::compare("attention on CPU (50 ms)", "tok/s", s.cpu_low_tps, cfg.published.scenario_cpu_tps_max));
    rows.push(Row::compare("attention on CPU (100 ms)", "tok/s", s.cpu_high_tps, cfg.published.scenario_cpu_tps_min));
    Section {
        title: "Interface latency and throughput".into(),
        rows,
        notes: vec![
            "The 64 us device-compute figure is a stated constant with no published derivation; \
             it is a config value here."
                .into(),
        ],
    }
}

pub fn area_cost_section(cfg: &ReferenceConfig, model: &crate::config::ModelEstimate) -> Section {
    let p = &cfg.published;
    let chain = die_area(model.nominal_params, &cfg.area).unwrap();
    let mut rows = vec![
        Row::computed_only("parameters", "count", model.nominal_params),
        Row::compare(
            "raw storage area",
            "mm^2",
            chain.raw_mm2,
            if model.chiplets == 1 { p.area_raw_small_mm2 } else { p.area_raw_large_mm2 },
        ),
        Row::computed_only("with routing", "mm^2", chain.routed_mm2),
        Row::compare(
            "with control",
            "mm^2",
            chain.with_control_mm2,
            if model.chiplets == 1 { p.area_control_small_mm2 } else { p.area_control_large_mm2 },
        ),
        Row::computed_only("published post-optimization silicon", "mm^2", model.published_silicon_mm2)
            .with_note(&format!(
                "implies optimization factor {:.2}; stated without derivation",
                model.published_silicon_mm2 / chain.with_control_mm2
            )),
    ];
    if model.chiplets == 1 {
        let die = model.published_silicon_mm2;
        let dpw = dies_per_wafer(die, &cfg.cost).unwrap();
        let c75 = unit_cost(die, &cfg.cost, 1, None).unwrap();
        let mut cfg60 = cfg.cost;
        cfg60.yield_fraction = 0.60;
        let c60 = unit_cost(die, &cfg60, 1, None).unwrap();
        rows.push(Row::computed_only("dies per wafer", "count", dpw.count as f64));
        rows.push(Row::compare("die cost at 75% yield", "$", c75.die_cost_usd, p.die_cost_75_usd));
        rows.push(Row::compare("die cost at 60% yield", "$", c60.die_cost_usd, p.die_cost_60_usd));
        rows.push(Row::compare("unit cost (packaged, tested)", "$", c75.total_usd, p.unit_cost_small_usd));
    } else {
        let per_chiplet = model.published_silicon_mm2 / model.chiplets as f64;
        let c = unit_cost(per_chiplet, &cfg.cost, model.chiplets, Some(model.chiplet_die_cost_usd)).unwrap();
        rows.push(
            Row::computed_only("per-chiplet die cost (stated)", "$", model.chiplet_die_cost_usd)
                .with_note("not derivable from the wafer model; carried as config"),
        );
        rows.push(Row::compare("unit cost (interposer, assembled, tested)", "$", c.total_usd, p.unit_cost_large_usd));
    }
    Section {
        title: format!("Area and cost: {}", model.name),
        rows,
        notes: vec![
            "The two published post-optimization areas imply different optimization factors \
             (~0.61 vs ~0.68); no single factor reproduces both, so the factor defaults to 1.0 \
             and the published areas are carried explicitly."
                .into(),
        ],
    }
}

pub fn volume_section(cfg: &ReferenceConfig) -> Section {
    let small_unit = unit_cost(
        cfg.small_model.published_silicon_mm2,
        &cfg.cost,
        1,
        None,
    )
    .unwrap()
    .total_usd;
    let large_unit = unit_cost(
        cfg.large_model.published_silicon_mm2 / cfg.large_model.chiplets as f64,
        &cfg.cost,
        cfg.large_model.chiplets,
        Some(cfg.large_model.chiplet_die_cost_usd),
    )
    .unwrap()
    .total_usd;
    let mut rows = Vec::new();
    for row in &cfg.published.volume_rows {
        let small = amortized_cost(small_unit, row.volume, cfg.cost.nre_usd).unwrap();
        let large = amortized_cost(large_unit, row.volume, cfg.cost.nre_usd).unwrap();
        rows.push(Row::compare(
            &format!("{} units, {}", row.volume, cfg.small_model.name),
            "$",
            small,
            row.small_usd,
        ));
        rows.push(Row::compare(
            &format!("{} units, {}", row.volume, cfg.large_model.name),
            "$",
            large,
            row.large_usd,
        ));
    }
    Section {
        title: "Amortized unit cost vs production volume".into(),
        rows,
        notes: vec![],
    }
}

pub fn power_section(cfg: &ReferenceConfig) -> Section {
    let p = &cfg.published;
    let e = &cfg.energy;
    let dynamic = hardwire_core::analytics::device_power(
        cfg.large_model.nominal_params,
        20.0,
        e.hardwired.total_pj(),
        0.0,
        e,
    )
    .unwrap();
    let sys_lo = system_power(p.device_power_w, p.serdes_power_w, p.host_power_w_min);
    let sys_hi = system_power(p.device_power_w, p.serdes_power_w, p.host_power_w_max);
    let density_lo = power_density(1.0, cfg.large_model.published_silicon_mm2).unwrap();
    let density_hi = power_density(3.0, cfg.large_model.published_silicon_mm2).unwrap();
    let kv = kv_cache_area_mm2(p.kv_cache_bytes, p.kv_cache_um2_per_bit);
    Section {
        title: "Power and density".into(),
        rows: vec![
            Row::compare("device dynamic power at 20 tok/s", "W", dynamic.dynamic_w, p.device_power_w)
                .with_note("published total includes an unexplained residual over the dynamic term"),
            Row::compare("system power, low-end host", "W", sys_lo, 7.0),
            Row::compare("system power, high-end host", "W", sys_hi, 12.0),
            Row::compare("power density at 1 W", "mW/mm^2", density_lo, p.power_density_min_mw_mm2),
            Row::compare("power density at 3 W", "mW/mm^2", density_hi, p.power_density_max_mw_mm2),
            Row::compare("on-chip KV cache storage (256 MB eDRAM)", "mm^2", kv, p.kv_cache_mm2)
                .with_note("straightforward product gives 40.96; published value stated as 51.2"),
        ],
        notes: vec![],
    }
}

/// Modeling caveats surfaced in every full report.
pub fn caveats_section() -> Section {
    Section {
        title: "Model caveats".into(),
        rows: vec![],
        notes: vec![
            "Zero-threshold prune rates depend entirely on the weight distribution; the \
             published 15-25% rate is corpus-dependent and is not asserted.".into(),
            "Gate totals depend on the NAND2 cost table; only the generic/hardwired ratio \
             bracket is asserted.".into(),
            "The storage-density area model and the per-MAC logic model are incompatible if \
             every MAC is physically instantiated; they are reported as independent estimators.".into(),
            "Whether the query vector crosses the link is ambiguous in the published accounting; \
             the simulator transfers it as an uncounted sideband.".into(),
        ],
    }
}

pub fn full_report(cfg: &ReferenceConfig) -> ReportDocument {
    ReportDocument {
        title: "hardwire analysis report".into(),
        sections: vec![
            gate_section(cfg),
            energy_section(cfg),
            traffic_section(cfg),
            latency_section(cfg),
            area_cost_section(cfg, &cfg.small_model),
            area_cost_section(cfg, &cfg.large_model),
            volume_section(cfg),
            power_section(cfg),
            caveats_section(),
        ],
    }
}
