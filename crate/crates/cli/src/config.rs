//! One auditable home for every model constant and published reference
//! value the reports compare against. Defaults reproduce the published
//! analysis; a TOML file (via `--config` or `HARDWIRE_CONFIG`) can
//! override any of them. Unknown keys are rejected.

use anyhow::Context;
use hardwire_core::analytics::{AreaModelConfig, CostModelConfig, EnergyModelConfig};
use hardwire_core::netlist::GateCostTable;
use hardwire_core::splitbrain::LatencyBudget;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceConfig {
    pub energy: EnergyModelConfig,
    pub gates: GateCostTable,
    pub area: AreaModelConfig,
    pub cost: CostModelConfig,
    pub latency: LatencyBudget,
    pub small_model: ModelEstimate,
    pub large_model: ModelEstimate,
    pub published: PublishedValues,
}

/// Per-model estimation inputs, including values the published analysis
/// states without derivation (post-optimization silicon, chiplet die
/// price).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEstimate {
    pub name: String,
    /// Round parameter count the published chains start from.
    pub nominal_params: f64,
    pub chiplets: u32,
    /// Stated per-chiplet die cost; the wafer model cannot reproduce it.
    pub chiplet_die_cost_usd: f64,
    /// Stated post-optimization total silicon.
    pub published_silicon_mm2: f64,
}

/// Published table values reproduced as comparison columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PublishedValues {
    pub gate_count_generic: f64,
    pub gate_count_hardwired: f64,
    pub gate_breakdown_tree: f64,
    pub gate_breakdown_accumulator: f64,
    pub gate_breakdown_register: f64,
    pub gate_ratio_analytical: f64,
    pub gate_ratio_fpga: f64,
    pub per_token_kb: f64,
    pub sustained_mb_per_s: f64,
    pub interface_rows: Vec<PublishedLatencyRow>,
    pub scenario_npu_tps: f64,
    pub scenario_cpu_tps_min: f64,
    pub scenario_cpu_tps_max: f64,
    pub area_raw_small_mm2: f64,
    pub area_routed_small_mm2: f64,
    pub area_control_small_mm2: f64,
    pub area_raw_large_mm2: f64,
    pub area_control_large_mm2: f64,
    pub die_cost_75_usd: f64,
    pub die_cost_60_usd: f64,
    pub unit_cost_small_usd: f64,
    pub unit_cost_large_usd: f64,
    pub volume_rows: Vec<PublishedVolumeRow>,
    pub device_power_w: f64,
    pub serdes_power_w: f64,
    pub host_power_w_min: f64,
    pub host_power_w_max: f64,
    pub power_density_min_mw_mm2: f64,
    pub power_density_max_mw_mm2: f64,
    pub kv_cache_bytes: f64,
    pub kv_cache_um2_per_bit: f64,
    pub kv_cache_mm2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublishedLatencyRow {
    pub interface: String,
    pub transfer_ms: f64,
    pub total_ms: f64,
    pub tok_per_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublishedVolumeRow {
    pub volume: u64,
    pub nre_per_unit_usd: f64,
    pub small_usd: f64,
    pub large_usd: f64,
}

impl Default for ModelEstimate {
    fn default() -> Self {
        Self {
            name: "custom".into(),
            nominal_params: 0.0,
            chiplets: 1,
            chiplet_die_cost_usd: 0.0,
            published_silicon_mm2: 0.0,
        }
    }
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            energy: EnergyModelConfig::default(),
            gates: GateCostTable::default(),
            area: AreaModelConfig::default(),
            cost: CostModelConfig::default(),
            latency: LatencyBudget::default(),
            small_model: ModelEstimate {
                name: "tinyllama-1.1b".into(),
                nominal_params: 1.1e9,
                chiplets: 1,
                chiplet_die_cost_usd: 0.0,
                published_silicon_mm2: 520.0,
            },
            large_model: ModelEstimate {
                name: "llama2-7b".into(),
                nominal_params: 7.0e9,
                chiplets: 8,
                chiplet_die_cost_usd: 14.0,
                published_silicon_mm2: 3680.0,
            },
            published: PublishedValues::default(),
        }
    }
}

impl Default for PublishedValues {
    fn default() -> Self {
        Self {
            gate_count_generic: 1180.0,
            gate_count_hardwired: 243.0,
            gate_breakdown_tree: 156.0,
            gate_breakdown_accumulator: 68.0,
            gate_breakdown_register: 19.0,
            gate_ratio_analytical: 4.85,
            gate_ratio_fpga: 1.81,
            per_token_kb: 832.0,
            sustained_mb_per_s: 16.64,
            interface_rows: vec![
                PublishedLatencyRow {
                    interface: "pcie3x4".into(),
                    transfer_ms: 0.21,
                    total_ms: 5.3,
                    tok_per_s: 188.0,
                },
                PublishedLatencyRow {
                    interface: "tb4".into(),
                    transfer_ms: 0.17,
                    total_ms: 5.2,
                    tok_per_s: 192.0,
                },
                PublishedLatencyRow {
                    interface: "usb3".into(),
                    transfer_ms: 2.77,
                    total_ms: 7.9,
                    tok_per_s: 126.0,
                },
                PublishedLatencyRow {
                    interface: "usb4".into(),
                    transfer_ms: 0.42,
                    total_ms: 5.5,
                    tok_per_s: 182.0,
                },
            ],
            scenario_npu_tps: 188.0,
            scenario_cpu_tps_min: 10.0,
            scenario_cpu_tps_max: 20.0,
            area_raw_small_mm2: 528.0,
            area_routed_small_mm2: 739.0,
            area_control_small_mm2: 850.0,
            area_raw_large_mm2: 3360.0,
            area_control_large_mm2: 5410.0,
            die_cost_75_usd: 52.0,
            die_cost_60_usd: 65.0,
            unit_cost_small_usd: 64.0,
            unit_cost_large_usd: 165.0,
            volume_rows: vec![
                PublishedVolumeRow { volume: 10_000, nre_per_unit_usd: 250.0, small_usd: 314.0, large_usd: 415.0 },
                PublishedVolumeRow { volume: 100_000, nre_per_unit_usd: 25.0, small_usd: 89.0, large_usd: 190.0 },
                PublishedVolumeRow { volume: 1_000_000, nre_per_unit_usd: 2.5, small_usd: 66.0, large_usd: 167.0 },
            ],
            device_power_w: 1.13,
            serdes_power_w: 0.5,
            host_power_w_min: 5.0,
            host_power_w_max: 10.0,
            power_density_min_mw_mm2: 0.27,
            power_density_max_mw_mm2: 0.82,
            kv_cache_bytes: 256e6,
            kv_cache_um2_per_bit: 0.02,
            kv_cache_mm2: 51.2,
        }
    }
}

impl ReferenceConfig {
    /// Loads from `--config`, falling back to `HARDWIRE_CONFIG`, then to
    /// the built-in defaults.
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let from_env = std::env::var_os("HARDWIRE_CONFIG").map(std::path::PathBuf::from);
        let chosen = path.map(Path::to_path_buf).or(from_env);
        match chosen {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(&p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                let cfg: ReferenceConfig = toml::from_str(&text)
                    .with_context(|| format!("parsing config {}", p.display()))?;
                Ok(cfg)
            }
        }
    }
}
