//! Deterministic structural Verilog emission for synthesized netlists,
//! plus the two-variant benchmark network (hardwired constants vs a
//! memory-based generic baseline).
//!
//! Emission is a pure function of its inputs: identical netlists produce
//! byte-identical text, and every header embeds a content hash of the
//! source netlist so artifacts can be traced back.

use crate::csd::{plan_weight, PlanMode};
use crate::error::{Error, Result};
use crate::model::QuantizedWeightMatrix;
use crate::netlist::{synth_generic_mac, synth_neuron, Netlist, NodeKind};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// FNV-1a 64-bit content hash.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RtlVariant {
    Hardwired,
    GenericBaseline,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RtlStats {
    pub module_count: usize,
    pub input_ports: BTreeMap<String, u32>,
    pub output_ports: BTreeMap<String, u32>,
    /// Logical multiply-accumulate positions (for networks).
    pub mac_sites: Option<u64>,
    /// Physically instantiated MAC structures (for networks).
    pub instantiated_macs: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RtlArtifact {
    pub module_name: String,
    pub source_text: String,
    pub variant: RtlVariant,
    pub stats: RtlStats,
}

/// `expr` sign-extended from `from` to `to` bits, as emitted text.
fn sext(name: &str, from: u32, to: u32) -> String {
    debug_assert!(from <= to);
    if from == to {
        name.to_string()
    } else {
        format!("{{{{{}{{{name}[{}]}}}}, {name}}}", to - from, from - 1)
    }
}

fn zeros(width: u32) -> String {
    format!("{{{width}{{1'b0}}}}")
}

fn net_name(netlist: &Netlist, id: usize) -> String {
    match &netlist.node(id).kind {
        NodeKind::Input { name } => name.clone(),
        NodeKind::Output { name } => name.clone(),
        _ => format!("n{id}"),
    }
}

/// Emits one netlist as a self-contained structural Verilog-2001 module.
///
/// Shifts become bit-select/concatenation wiring, adders and subtractors
/// operate on explicitly sign-extended operands, and all registers share
/// one clocked process with synchronous reset to zero.
pub fn emit_netlist_rtl(netlist: &Netlist, module_name: &str) -> Result<RtlArtifact> {
    netlist.validate()?;
    let order = netlist.topo_order()?;
    let hash = fnv1a64(netlist.to_text().as_bytes());

    let has_registers = netlist
        .nodes()
        .iter()
        .any(|n| matches!(n.kind, NodeKind::Register));

    let mut input_ports = BTreeMap::new();
    let mut output_ports = BTreeMap::new();
    let mut port_list: Vec<String> = Vec::new();
    if has_registers {
        port_list.push("clk".into());
        port_list.push("rst".into());
    }
    for &id in netlist.input_ids() {
        if let NodeKind::Input { name } = &netlist.node(id).kind {
            port_list.push(name.clone());
            input_ports.insert(name.clone(), netlist.node(id).width);
        }
    }
    for &id in netlist.output_ids() {
        if let NodeKind::Output { name } = &netlist.node(id).kind {
            port_list.push(name.clone());
            output_ports.insert(name.clone(), netlist.node(id).width);
        }
    }

    let mut s = String::new();
    let _ = writeln!(s, "// module {module_name}");
    let _ = writeln!(s, "// netlist '{}' content hash fnv1a64:{hash:016x}", netlist.name);
    let _ = writeln!(s, "module {module_name} (");
    let _ = writeln!(s, "    {}", port_list.join(",\n    "));
    let _ = writeln!(s, ");");
    if has_registers {
        let _ = writeln!(s, "    input wire clk;");
        let _ = writeln!(s, "    input wire rst;");
    }
    for (name, w) in &input_ports {
        let _ = writeln!(s, "    input wire signed [{}:0] {name};", w - 1);
    }
    for (name, w) in &output_ports {
        let _ = writeln!(s, "    output wire signed [{}:0] {name};", w - 1);
    }
    let _ = writeln!(s);

    // internal declarations
    for &id in &order {
        let node = netlist.node(id);
        match &node.kind {
            NodeKind::Input { .. } | NodeKind::Output { .. } => {}
            NodeKind::Register => {
                let _ = writeln!(s, "    reg signed [{}:0] n{id};", node.width - 1);
            }
            _ => {
                let _ = writeln!(s, "    wire signed [{}:0] n{id};", node.width - 1);
            }
        }
    }
    let _ = writeln!(s);

    // combinational assigns in topological order
    for &id in &order {
        let node = netlist.node(id);
        let srcs: Vec<(String, u32)> = node
            .inputs
            .iter()
            .map(|&i| (net_name(netlist, i), netlist.node(i).width))
            .collect();
        match &node.kind {
            NodeKind::Zero => {
                let _ = writeln!(s, "    assign n{id} = {};", zeros(node.width));
            }
            NodeKind::ConstShiftWire { shift } => {
                let (src, sw) = &srcs[0];
                let text = if *shift == 0 {
                    sext(src, *sw, node.width)
                } else if *shift > 0 {
                    // left shift: append zeros
                    format!("{{{src}, {}}}", zeros(*shift as u32))
                } else {
                    // arithmetic right shift: replicate the sign bit
                    let k = (-shift) as u32;
                    format!("{{{{{k}{{{src}[{}]}}}}, {src}[{}:{k}]}}", sw - 1, sw - 1)
                };
                let _ = writeln!(s, "    assign n{id} = {text};");
            }
            NodeKind::Add => {
                let a = sext(&srcs[0].0, srcs[0].1, node.width);
                let b = sext(&srcs[1].0, srcs[1].1, node.width);
                let _ = writeln!(s, "    assign n{id} = {a} + {b};");
            }
            NodeKind::Sub => {
                let a = sext(&srcs[0].0, srcs[0].1, node.width);
                let b = sext(&srcs[1].0, srcs[1].1, node.width);
                let _ = writeln!(s, "    assign n{id} = {a} - {b};");
            }
            NodeKind::Negate => {
                let a = sext(&srcs[0].0, srcs[0].1, node.width);
                let _ = writeln!(s, "    assign n{id} = -{a};");
            }
            NodeKind::PartialProduct { bit } => {
                let (x, xw) = &srcs[0];
                let (w, _) = &srcs[1];
                let aligned = if *bit == 0 {
                    sext(x, *xw, node.width)
                } else {
                    format!("{{{}, {}}}", sext(x, *xw, node.width - bit), zeros(*bit))
                };
                let _ = writeln!(
                    s,
                    "    assign n{id} = {w}[{bit}] ? {aligned} : {};",
                    zeros(node.width)
                );
            }
            NodeKind::Output { name } => {
                let _ = writeln!(s, "    assign {name} = {};", srcs[0].0);
            }
            NodeKind::Input { .. } | NodeKind::Register => {}
        }
    }

    // one clocked process for all registers
    if has_registers {
        let _ = writeln!(s);
        let _ = writeln!(s, "    always @(posedge clk) begin");
        let _ = writeln!(s, "        if (rst) begin");
        for (id, node) in netlist.nodes().iter().enumerate() {
            if matches!(node.kind, NodeKind::Register) {
                let _ = writeln!(s, "            n{id} <= {};", zeros(node.width));
            }
        }
        let _ = writeln!(s, "        end else begin");
        for (id, node) in netlist.nodes().iter().enumerate() {
            if matches!(node.kind, NodeKind::Register) {
                let src = node.inputs.first().ok_or_else(|| {
                    Error::MalformedNetlist(format!("register n{id} unconnected"))
                })?;
                let src_name = net_name(netlist, *src);
                let src_w = netlist.node(*src).width;
                let _ = writeln!(s, "            n{id} <= {};", sext(&src_name, src_w, node.width));
            }
        }
        let _ = writeln!(s, "        end");
        let _ = writeln!(s, "    end");
    }
    let _ = writeln!(s, "endmodule");

    Ok(RtlArtifact {
        module_name: module_name.to_string(),
        source_text: s,
        variant: RtlVariant::Hardwired,
        stats: RtlStats {
            module_count: 1,
            input_ports,
            output_ports,
            mac_sites: None,
            instantiated_macs: None,
        },
    })
}

fn neuron_plans(matrix: &QuantizedWeightMatrix, col: u32) -> Result<Vec<crate::csd::ShiftAddPlan>> {
    matrix
        .column(col)
        .iter()
        .map(|&q| plan_weight(q as i64, matrix.weight_width(), 0, PlanMode::Csd))
        .collect()
}

/// Emits a feed-forward network (one matrix per layer, `rows -> cols`)
/// in one of the two benchmark variants.
///
/// Hardwired: one constant-coefficient neuron module per output, one
/// instance per neuron; weights exist only as wiring. Inter-layer
/// requantization is left to the integration level (activations are
/// truncated to the input width between layers).
///
/// Generic baseline: a single parameter-free MAC module with runtime
/// weight input, one instance per output, weights streamed from a plain
/// memory array initialized in an `initial` block and left to vendor
/// memory inference.
pub fn emit_network_rtl(
    layers: &[&QuantizedWeightMatrix],
    variant: RtlVariant,
    module_name: &str,
    in_width: u32,
    acc_width: u32,
) -> Result<RtlArtifact> {
    if layers.is_empty() {
        return Err(Error::InvalidModelInput("network needs >= 1 layer".into()));
    }
    for pair in layers.windows(2) {
        if pair[0].cols() != pair[1].rows() {
            return Err(Error::ShapeMismatch {
                expected: format!("next layer rows == {}", pair[0].cols()),
                found: format!("{}", pair[1].rows()),
            });
        }
    }
    let mac_sites: u64 = layers.iter().map(|m| m.element_count()).sum();
    let nonzero: u64 = layers
        .iter()
        .map(|m| m.values().iter().filter(|&&q| q != 0).count() as u64)
        .sum();

    match variant {
        RtlVariant::Hardwired => {
            emit_hardwired_network(layers, module_name, in_width, acc_width, mac_sites, nonzero)
        }
        RtlVariant::GenericBaseline => {
            emit_generic_network(layers, module_name, in_width, acc_width, mac_sites)
        }
    }
}

fn emit_hardwired_network(
    layers: &[&QuantizedWeightMatrix],
    module_name: &str,
    in_width: u32,
    acc_width: u32,
    mac_sites: u64,
    nonzero: u64,
) -> Result<RtlArtifact> {
    let mut modules = String::new();
    let mut module_count = 0usize;
    let mut instance_lines = String::new();
    let mut wire_lines = String::new();

    for (li, matrix) in layers.iter().enumerate() {
        let rows = matrix.rows();
        let cols = matrix.cols();
        for j in 0..cols {
            let plans = neuron_plans(matrix, j)?;
            let nl = synth_neuron(&plans, rows as usize, in_width, acc_width)?;
            let name = format!("{module_name}_l{li}_n{j}");
            let art = emit_netlist_rtl(&nl, &name)?;
            modules.push_str(&art.source_text);
            modules.push('\n');
            module_count += 1;

            let _ = writeln!(wire_lines, "    wire signed [{}:0] l{li}_o{j};", acc_width - 1);
            let mut conns: Vec<String> = vec![".clk(clk)".into(), ".rst(rst)".into()];
            for r in 0..rows {
                let src = if li == 0 {
                    format!("x{r}")
                } else {
                    // truncate the previous accumulator to the neuron input width
                    format!("l{}_o{r}[{}:0]", li - 1, in_width - 1)
                };
                conns.push(format!(".x{r}({src})"));
            }
            conns.push(format!(".y(l{li}_o{j})"));
            let _ = writeln!(
                instance_lines,
                "    {name} u_l{li}_n{j} ({});",
                conns.join(", ")
            );
        }
    }

    let first_in = layers[0].rows();
    let last = layers.len() - 1;
    let last_out = layers[last].cols();
    let mut top = String::new();
    let _ = writeln!(top, "// module {module_name} (hardwired network)");
    let _ = writeln!(top, "// mac sites: {mac_sites}, instantiated: {nonzero}");
    let mut ports: Vec<String> = vec!["clk".into(), "rst".into()];
    ports.extend((0..first_in).map(|i| format!("x{i}")));
    ports.extend((0..last_out).map(|j| format!("y{j}")));
    let _ = writeln!(top, "module {module_name} (");
    let _ = writeln!(top, "    {}", ports.join(",\n    "));
    let _ = writeln!(top, ");");
    let _ = writeln!(top, "    input wire clk;");
    let _ = writeln!(top, "    input wire rst;");
    for i in 0..first_in {
        let _ = writeln!(top, "    input wire signed [{}:0] x{i};", in_width - 1);
    }
    for j in 0..last_out {
        let _ = writeln!(top, "    output wire signed [{}:0] y{j};", acc_width - 1);
    }
    let _ = writeln!(top);
    top.push_str(&wire_lines);
    let _ = writeln!(top);
    top.push_str(&instance_lines);
    for j in 0..last_out {
        let _ = writeln!(top, "    assign y{j} = l{last}_o{j};");
    }
    let _ = writeln!(top, "endmodule");

    let mut source_text = top;
    source_text.push('\n');
    source_text.push_str(&modules);

    let mut input_ports = BTreeMap::new();
    for i in 0..first_in {
        input_ports.insert(format!("x{i}"), in_width);
    }
    let mut output_ports = BTreeMap::new();
    for j in 0..last_out {
        output_ports.insert(format!("y{j}"), acc_width);
    }

    Ok(RtlArtifact {
        module_name: module_name.to_string(),
        source_text,
        variant: RtlVariant::Hardwired,
        stats: RtlStats {
            module_count: module_count + 1,
            input_ports,
            output_ports,
            mac_sites: Some(mac_sites),
            instantiated_macs: Some(nonzero),
        },
    })
}

fn emit_generic_network(
    layers: &[&QuantizedWeightMatrix],
    module_name: &str,
    in_width: u32,
    acc_width: u32,
    mac_sites: u64,
) -> Result<RtlArtifact> {
    let w_width = layers[0].weight_width();
    let mac_nl = synth_generic_mac(w_width, in_width, acc_width)?;
    let mac_name = format!("{module_name}_mac");
    let mac_art = emit_netlist_rtl(&mac_nl, &mac_name)?;

    let mut s = String::new();
    let _ = writeln!(s, "// module {module_name} (generic baseline network)");
    let _ = writeln!(
        s,
        "// mac sites: {mac_sites}, physical MAC instances: {}",
        layers.iter().map(|m| m.cols() as u64).sum::<u64>()
    );
    let _ = writeln!(
        s,
        "// weights live in plain memory arrays (vendor-inferred storage)"
    );

    for (li, matrix) in layers.iter().enumerate() {
        let rows = matrix.rows();
        let cols = matrix.cols();
        let step_bits = 32 - (rows.max(2) - 1).leading_zeros();
        let _ = writeln!(s, "module {module_name}_l{li} (");
        let _ = writeln!(s, "    clk,");
        let _ = writeln!(s, "    rst,");
        let _ = writeln!(s, "    x_flat,");
        let ys: Vec<String> = (0..cols).map(|j| format!("y{j}")).collect();
        let _ = writeln!(s, "    {}", ys.join(",\n    "));
        let _ = writeln!(s, ");");
        let _ = writeln!(s, "    input wire clk;");
        let _ = writeln!(s, "    input wire rst;");
        let _ = writeln!(s, "    input wire [{}:0] x_flat;", rows * in_width - 1);
        for j in 0..cols {
            let _ = writeln!(s, "    output wire signed [{}:0] y{j};", acc_width - 1);
        }
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "    reg signed [{}:0] weights [0:{}];",
            w_width - 1,
            rows * cols - 1
        );
        let _ = writeln!(s, "    initial begin");
        for r in 0..rows {
            for c in 0..cols {
                let _ = writeln!(s, "        weights[{}] = {};", r * cols + c, matrix.get(r, c));
            }
        }
        let _ = writeln!(s, "    end");
        let _ = writeln!(s);
        let _ = writeln!(s, "    reg [{}:0] step;", step_bits.max(1) - 1);
        let _ = writeln!(s, "    always @(posedge clk) begin");
        let _ = writeln!(s, "        if (rst) step <= 0;");
        let _ = writeln!(s, "        else if (step < {rows}) step <= step + 1;");
        let _ = writeln!(s, "    end");
        let _ = writeln!(
            s,
            "    wire signed [{}:0] x_cur = (step < {rows}) ? x_flat[step*{in_width} +: {in_width}] : {};",
            in_width - 1,
            zeros(in_width)
        );
        for j in 0..cols {
            let _ = writeln!(
                s,
                "    wire signed [{}:0] w_cur{j} = (step < {rows}) ? weights[step*{cols} + {j}] : {};",
                w_width - 1,
                zeros(w_width)
            );
            let _ = writeln!(
                s,
                "    {mac_name} u{j} (.clk(clk), .rst(rst), .x(x_cur), .w(w_cur{j}), .y(y{j}));"
            );
        }
        let _ = writeln!(s, "endmodule");
        let _ = writeln!(s);
    }
    s.push_str(&mac_art.source_text);

    let first_rows = layers[0].rows();
    let mut input_ports = BTreeMap::new();
    input_ports.insert("x_flat".to_string(), first_rows * in_width);
    let mut output_ports = BTreeMap::new();
    for j in 0..layers[layers.len() - 1].cols() {
        output_ports.insert(format!("y{j}"), acc_width);
    }

    Ok(RtlArtifact {
        module_name: module_name.to_string(),
        source_text: s,
        variant: RtlVariant::GenericBaseline,
        stats: RtlStats {
            module_count: layers.len() + 1,
            input_ports,
            output_ports,
            mac_sites: Some(mac_sites),
            instantiated_macs: Some(layers.iter().map(|m| m.cols() as u64).sum()),
        },
    })
}

/// One stimulus/check pair for the self-checking testbench.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestVector {
    pub inputs: BTreeMap<String, i64>,
    pub expected: BTreeMap<String, i64>,
}

/// Emits a self-checking testbench. Each vector is applied from reset
/// for two clock cycles (one register stage of latency) and every
/// expected output is asserted. Expected values should come from
/// [`crate::netlist::evaluate`] on the source netlist.
pub fn emit_testbench(artifact: &RtlArtifact, vectors: &[TestVector]) -> Result<String> {
    for v in vectors {
        for (port, &value) in v.inputs.iter() {
            let width = artifact
                .stats
                .input_ports
                .get(port)
                .ok_or_else(|| Error::UnboundInput(port.clone()))?;
            check_port_fit(port, value, *width)?;
        }
        for (port, &value) in v.expected.iter() {
            let width = artifact
                .stats
                .output_ports
                .get(port)
                .ok_or_else(|| Error::UnboundInput(port.clone()))?;
            check_port_fit(port, value, *width)?;
        }
    }

    let dut = &artifact.module_name;
    let mut s = String::new();
    let _ = writeln!(s, "`timescale 1ns/1ps");
    let _ = writeln!(s, "// self-checking testbench for {dut}");
    let _ = writeln!(s, "module {dut}_tb;");
    let _ = writeln!(s, "    reg clk;");
    let _ = writeln!(s, "    reg rst;");
    for (name, w) in &artifact.stats.input_ports {
        let _ = writeln!(s, "    reg signed [{}:0] {name};", w - 1);
    }
    for (name, w) in &artifact.stats.output_ports {
        let _ = writeln!(s, "    wire signed [{}:0] {name};", w - 1);
    }
    let mut conns: Vec<String> = vec![".clk(clk)".into(), ".rst(rst)".into()];
    conns.extend(artifact.stats.input_ports.keys().map(|n| format!(".{n}({n})")));
    conns.extend(artifact.stats.output_ports.keys().map(|n| format!(".{n}({n})")));
    let _ = writeln!(s, "    {dut} dut ({});", conns.join(", "));
    let _ = writeln!(s, "    integer errors;");
    let _ = writeln!(s, "    always #5 clk = ~clk;");
    let _ = writeln!(s, "    initial begin");
    let _ = writeln!(s, "        errors = 0;");
    let _ = writeln!(s, "        clk = 0;");
    let _ = writeln!(s, "        rst = 1;");
    for name in artifact.stats.input_ports.keys() {
        let _ = writeln!(s, "        {name} = 0;");
    }
    for (i, v) in vectors.iter().enumerate() {
        let _ = writeln!(s, "        // vector {i}");
        let _ = writeln!(s, "        rst = 1;");
        let _ = writeln!(s, "        @(posedge clk);");
        let _ = writeln!(s, "        rst = 0;");
        for (name, value) in &v.inputs {
            let _ = writeln!(s, "        {name} = {value};");
        }
        let _ = writeln!(s, "        @(posedge clk);");
        let _ = writeln!(s, "        @(posedge clk);");
        let _ = writeln!(s, "        #1;");
        for (name, value) in &v.expected {
            let _ = writeln!(s, "        if ({name} !== {value}) begin");
            let _ = writeln!(
                s,
                "            $display(\"FAIL vector {i}: {name} = %0d, expected {value}\", {name});"
            );
            let _ = writeln!(s, "            errors = errors + 1;");
            let _ = writeln!(s, "        end");
        }
    }
    let _ = writeln!(s, "        if (errors == 0) $display(\"PASS: all {} vectors\");", vectors.len());
    let _ = writeln!(s, "        else $display(\"FAIL: %0d errors\", errors);");
    let _ = writeln!(s, "        $finish;");
    let _ = writeln!(s, "    end");
    let _ = writeln!(s, "endmodule");
    Ok(s)
}

fn check_port_fit(port: &str, value: i64, width: u32) -> Result<()> {
    let (lo, hi) = crate::model::signed_range(width.min(63));
    if value < lo || value > hi {
        return Err(Error::VectorWidthMismatch {
            port: port.to_string(),
            value,
            width,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csd::plan_weight;
    use crate::netlist::{evaluate_const, structural_stats, synth_const_mac};

    fn two_term_mac() -> Netlist {
        let plan = plan_weight(3, 4, -3, PlanMode::Binary).unwrap();
        synth_const_mac(&plan, 8, 20).unwrap()
    }

    #[test]
    fn zero_weight_module_has_no_adders() {
        let plan = plan_weight(0, 4, -3, PlanMode::Csd).unwrap();
        let nl = synth_const_mac(&plan, 8, 20).unwrap();
        let art = emit_netlist_rtl(&nl, "mac_zero").unwrap();
        assert!(!art.source_text.contains(" + "));
        assert!(!art.source_text.contains(" - "));
        assert!(art.source_text.contains("{20{1'b0}}"), "output tied to zero");
    }

    #[test]
    fn two_term_mac_has_exactly_two_adders_total() {
        // one tree adder plus the accumulator adder
        let art = emit_netlist_rtl(&two_term_mac(), "mac3").unwrap();
        let plus = art.source_text.matches(" + ").count();
        assert_eq!(plus, 2);
    }

    #[test]
    fn emission_is_deterministic() {
        let a = emit_netlist_rtl(&two_term_mac(), "mac3").unwrap();
        let b = emit_netlist_rtl(&two_term_mac(), "mac3").unwrap();
        assert_eq!(a.source_text, b.source_text);
        assert_eq!(fnv1a64(a.source_text.as_bytes()), fnv1a64(b.source_text.as_bytes()));
    }

    #[test]
    fn operator_count_matches_structural_stats() {
        for q in -8i64..=7 {
            let plan = plan_weight(q, 4, -3, PlanMode::Csd).unwrap();
            let nl = synth_const_mac(&plan, 8, 20).unwrap();
            let st = structural_stats(&nl);
            let art = emit_netlist_rtl(&nl, "m").unwrap();
            let plus = art.source_text.matches(" + ").count();
            let minus = art.source_text.matches(" - ").count();
            assert_eq!(plus + minus, st.adds + st.subs, "q={q}");
        }
    }

    #[test]
    fn network_reports_mac_sites() {
        let w1 = QuantizedWeightMatrix::new(2, 3, 4, -3, vec![1, 0, -2, 3, 0, 7]).unwrap();
        let w2 = QuantizedWeightMatrix::new(3, 2, 4, -3, vec![0, 0, 5, -1, 0, 2]).unwrap();
        let art =
            emit_network_rtl(&[&w1, &w2], RtlVariant::Hardwired, "net", 8, 20).unwrap();
        assert_eq!(art.stats.mac_sites, Some(12));
        assert_eq!(art.stats.instantiated_macs, Some(7));
    }

    #[test]
    fn all_zero_hardwired_network_has_no_arithmetic() {
        let w1 = QuantizedWeightMatrix::new(2, 2, 4, -3, vec![0; 4]).unwrap();
        let w2 = QuantizedWeightMatrix::new(2, 2, 4, -3, vec![0; 4]).unwrap();
        let art =
            emit_network_rtl(&[&w1, &w2], RtlVariant::Hardwired, "netz", 8, 20).unwrap();
        assert_eq!(art.stats.instantiated_macs, Some(0));
        assert!(!art.source_text.contains(" + "));
        assert!(!art.source_text.contains(" - "));
    }

    #[test]
    fn generic_network_embeds_weight_memory() {
        let w1 = QuantizedWeightMatrix::new(2, 2, 4, -3, vec![1, -2, 3, -4]).unwrap();
        let art =
            emit_network_rtl(&[&w1], RtlVariant::GenericBaseline, "netg", 8, 20).unwrap();
        assert!(art.source_text.contains("weights[0] = 1;"));
        assert!(art.source_text.contains("weights[3] = -4;"));
        assert!(art.source_text.contains("initial begin"));
        assert_eq!(art.stats.mac_sites, Some(4));
    }

    #[test]
    fn testbench_empty_vector_list_compiles_shape() {
        let art = emit_netlist_rtl(&two_term_mac(), "mac3").unwrap();
        let tb = emit_testbench(&art, &[]).unwrap();
        assert!(tb.contains("module mac3_tb;"));
        assert!(tb.contains("$finish;"));
    }

    #[test]
    fn testbench_embeds_expectations() {
        let nl = two_term_mac();
        let art = emit_netlist_rtl(&nl, "mac3").unwrap();
        let mut inputs = BTreeMap::new();
        inputs.insert("x".to_string(), 40i64);
        let out = evaluate_const(&nl, &inputs, 2).unwrap();
        let mut expected = BTreeMap::new();
        expected.insert("y".to_string(), out["y"][1]);
        let tb = emit_testbench(
            &art,
            &[TestVector {
                inputs,
                expected: expected.clone(),
            }],
        )
        .unwrap();
        assert!(tb.contains(&format!("if (y !== {})", expected["y"])));
    }

    #[test]
    fn testbench_rejects_oversized_vector() {
        let art = emit_netlist_rtl(&two_term_mac(), "mac3").unwrap();
        let mut inputs = BTreeMap::new();
        inputs.insert("x".to_string(), 1_000i64); // x is 8 bits
        let v = TestVector {
            inputs,
            expected: BTreeMap::new(),
        };
        assert!(matches!(
            emit_testbench(&art, &[v]),
            Err(Error::VectorWidthMismatch { .. })
        ));
    }
}
