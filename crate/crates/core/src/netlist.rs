//! Gate-level netlists for hardwired constant-coefficient arithmetic:
//! synthesis, bit-exact evaluation, and NAND2-equivalent gate costing.
//!
//! A netlist is a DAG of typed nodes; the only cycles allowed pass
//! through a register. Shifts are pure wiring and cost nothing. Add/Sub
//! outputs grow one bit per stage, capped at the declared accumulator
//! width.

use crate::csd::ShiftAddPlan;
use crate::error::{Error, Result};
use crate::model::signed_range;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    /// External input port.
    Input { name: String },
    /// Constant zero driver (used when a unit is eliminated entirely).
    Zero,
    /// Fixed shift implemented as wire routing; negative = arithmetic right.
    ConstShiftWire { shift: i32 },
    Add,
    Sub,
    Negate,
    /// One array-multiplier row: `bit` of the second operand gates a copy
    /// of the first operand pre-shifted left by `bit`.
    PartialProduct { bit: u32 },
    /// One-cycle delay, reset value 0.
    Register,
    /// External output port.
    Output { name: String },
}

/// Cost-report bucket a node belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostClass {
    ShiftAddTree,
    Accumulator,
    PipelineRegister,
    Free,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub kind: NodeKind,
    pub width: u32,
    pub inputs: Vec<NodeId>,
    pub class: CostClass,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Netlist {
    pub name: String,
    /// Cap on arithmetic widths; Add/Sub/Negate never grow past this.
    pub acc_width: u32,
    nodes: Vec<Node>,
    inputs: Vec<NodeId>,
    outputs: Vec<NodeId>,
}

impl Netlist {
    pub fn new(name: impl Into<String>, acc_width: u32) -> Self {
        Self {
            name: name.into(),
            acc_width,
            nodes: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn input_ids(&self) -> &[NodeId] {
        &self.inputs
    }

    pub fn output_ids(&self) -> &[NodeId] {
        &self.outputs
    }

    fn push(&mut self, kind: NodeKind, width: u32, inputs: Vec<NodeId>, class: CostClass) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node { kind, width, inputs, class });
        id
    }

    pub fn add_input(&mut self, name: impl Into<String>, width: u32) -> NodeId {
        let id = self.push(NodeKind::Input { name: name.into() }, width, vec![], CostClass::Free);
        self.inputs.push(id);
        id
    }

    pub fn add_zero(&mut self, width: u32) -> NodeId {
        self.push(NodeKind::Zero, width, vec![], CostClass::Free)
    }

    /// Shift as wiring. Left shifts widen; right shifts keep the width.
    pub fn add_shift(&mut self, src: NodeId, shift: i32) -> NodeId {
        let w = self.nodes[src].width;
        let width = if shift >= 0 { w + shift as u32 } else { w };
        self.push(
            NodeKind::ConstShiftWire { shift },
            width,
            vec![src],
            CostClass::Free,
        )
    }

    fn arith_width(&self, a: NodeId, b: NodeId) -> u32 {
        (self.nodes[a].width.max(self.nodes[b].width) + 1).min(self.acc_width)
    }

    pub fn add_add(&mut self, a: NodeId, b: NodeId, class: CostClass) -> NodeId {
        let w = self.arith_width(a, b);
        self.push(NodeKind::Add, w, vec![a, b], class)
    }

    pub fn add_sub(&mut self, a: NodeId, b: NodeId, class: CostClass) -> NodeId {
        let w = self.arith_width(a, b);
        self.push(NodeKind::Sub, w, vec![a, b], class)
    }

    pub fn add_negate(&mut self, a: NodeId, class: CostClass) -> NodeId {
        let w = (self.nodes[a].width + 1).min(self.acc_width);
        self.push(NodeKind::Negate, w, vec![a], class)
    }

    pub fn add_partial_product(&mut self, x: NodeId, w_in: NodeId, bit: u32, width: u32) -> NodeId {
        self.push(
            NodeKind::PartialProduct { bit },
            width,
            vec![x, w_in],
            CostClass::ShiftAddTree,
        )
    }

    /// Registers are created unconnected so feedback loops can close
    /// afterwards via [`Netlist::connect_register`].
    pub fn add_register(&mut self, width: u32) -> NodeId {
        self.push(NodeKind::Register, width, vec![], CostClass::PipelineRegister)
    }

    pub fn connect_register(&mut self, reg: NodeId, src: NodeId) {
        debug_assert!(matches!(self.nodes[reg].kind, NodeKind::Register));
        self.nodes[reg].inputs = vec![src];
    }

    pub fn add_output(&mut self, name: impl Into<String>, src: NodeId) -> NodeId {
        let w = self.nodes[src].width;
        let id = self.push(
            NodeKind::Output { name: name.into() },
            w,
            vec![src],
            CostClass::Free,
        );
        self.outputs.push(id);
        id
    }

    /// Topological order over combinational edges; register inputs are
    /// sequential and do not constrain the order.
    pub fn topo_order(&self) -> Result<Vec<NodeId>> {
        let n = self.nodes.len();
        let mut indegree = vec![0usize; n];
        let mut dependents: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        for (id, node) in self.nodes.iter().enumerate() {
            if matches!(node.kind, NodeKind::Register) {
                continue; // register reads its input only at the cycle edge
            }
            for &src in &node.inputs {
                indegree[id] += 1;
                dependents[src].push(id);
            }
        }
        let mut queue: Vec<NodeId> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(id) = queue.pop() {
            order.push(id);
            for &d in &dependents[id] {
                indegree[d] -= 1;
                if indegree[d] == 0 {
                    queue.push(d);
                }
            }
        }
        if order.len() != n {
            return Err(Error::MalformedNetlist("combinational cycle".into()));
        }
        order.sort_unstable(); // ids are created in dependency order; keep deterministic
        // ids are pushed parents-first by the builders, so ascending id order
        // is a valid topological order once acyclicity is verified
        Ok(order)
    }

    /// Structural sanity: every non-source node has drivers, every output
    /// traces back to an input or a constant-zero driver, and the
    /// combinational graph is acyclic.
    pub fn validate(&self) -> Result<()> {
        self.topo_order()?;
        for (id, node) in self.nodes.iter().enumerate() {
            let need = match node.kind {
                NodeKind::Input { .. } | NodeKind::Zero => 0,
                NodeKind::Add | NodeKind::Sub | NodeKind::PartialProduct { .. } => 2,
                _ => 1,
            };
            if node.inputs.len() != need {
                return Err(Error::MalformedNetlist(format!(
                    "node n{id} has {} inputs, needs {need}",
                    node.inputs.len()
                )));
            }
            if node.width == 0 {
                return Err(Error::MalformedNetlist(format!("node n{id} has width 0")));
            }
        }
        // reachability from sources
        let mut reach = vec![false; self.nodes.len()];
        for (id, node) in self.nodes.iter().enumerate() {
            match node.kind {
                NodeKind::Input { .. } | NodeKind::Zero => reach[id] = true,
                _ => {}
            }
        }
        let mut changed = true;
        while changed {
            changed = false;
            for id in 0..self.nodes.len() {
                if !reach[id] && self.nodes[id].inputs.iter().any(|&s| reach[s]) {
                    reach[id] = true;
                    changed = true;
                }
            }
        }
        for &out in &self.outputs {
            if !reach[out] {
                return Err(Error::MalformedNetlist(format!("output n{out} undriven")));
            }
        }
        Ok(())
    }

    /// Deterministic text dump for goldens and debugging.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "netlist {} acc_width={}", self.name, self.acc_width);
        for (id, node) in self.nodes.iter().enumerate() {
            let kind = match &node.kind {
                NodeKind::Input { name } => format!("input({name})"),
                NodeKind::Zero => "zero".to_string(),
                NodeKind::ConstShiftWire { shift } => format!("shift({shift})"),
                NodeKind::Add => "add".to_string(),
                NodeKind::Sub => "sub".to_string(),
                NodeKind::Negate => "neg".to_string(),
                NodeKind::PartialProduct { bit } => format!("pp(bit={bit})"),
                NodeKind::Register => "reg".to_string(),
                NodeKind::Output { name } => format!("output({name})"),
            };
            let ins: Vec<String> = node.inputs.iter().map(|i| format!("n{i}")).collect();
            let _ = writeln!(s, "n{id} {kind} w{} <- [{}]", node.width, ins.join(", "));
        }
        s
    }
}

// --- synthesis --------------------------------------------------------------

/// Balanced signed combine of `(sign, node)` leaves. Subtractions absorb
/// sign differences; a trailing all-negative result costs one negate.
fn combine_signed(nl: &mut Netlist, mut items: Vec<(i8, NodeId)>, class: CostClass) -> Option<NodeId> {
    if items.is_empty() {
        return None;
    }
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        for pair in items.chunks(2) {
            if pair.len() == 1 {
                next.push(pair[0]);
                continue;
            }
            let (s1, a) = pair[0];
            let (s2, b) = pair[1];
            let merged = match (s1 >= 0, s2 >= 0) {
                (true, true) => (1i8, nl.add_add(a, b, class)),
                (true, false) => (1, nl.add_sub(a, b, class)),
                (false, true) => (1, nl.add_sub(b, a, class)),
                (false, false) => (-1, nl.add_add(a, b, class)),
            };
            next.push(merged);
        }
        items = next;
    }
    let (sign, node) = items[0];
    Some(if sign < 0 {
        nl.add_negate(node, class)
    } else {
        node
    })
}

/// Builds the shift-add tree for one plan over an existing input node.
/// Returns `None` for an empty plan (eliminated multiplier).
///
/// Term shifts are taken relative to the plan's scale exponent, so the
/// tree computes the integer product `q * x` exactly; the power-of-two
/// scale stays a binary-point annotation outside the netlist.
fn plan_tree(nl: &mut Netlist, x: NodeId, plan: &ShiftAddPlan) -> Option<NodeId> {
    if plan.terms.is_empty() {
        return None;
    }
    let leaves: Vec<(i8, NodeId)> = plan
        .terms
        .iter()
        .map(|t| {
            let rel = t.shift - plan.scale_exp;
            debug_assert!(rel >= 0);
            let node = if rel == 0 { x } else { nl.add_shift(x, rel) };
            (t.sign, node)
        })
        .collect();
    combine_signed(nl, leaves, CostClass::ShiftAddTree)
}

fn plan_max_rel_shift(plan: &ShiftAddPlan) -> u32 {
    plan.terms
        .first()
        .map(|hi| (hi.shift - plan.scale_exp) as u32)
        .unwrap_or(0)
}

/// Hardwired constant-coefficient multiply-accumulate: a shift-add tree
/// for the planned weight feeding an accumulator register.
///
/// An empty plan (weight zero) eliminates the unit: the output is tied to
/// constant zero and the netlist carries no arithmetic at all.
pub fn synth_const_mac(plan: &ShiftAddPlan, in_width: u32, acc_width: u32) -> Result<Netlist> {
    let required = in_width + plan_max_rel_shift(plan) + 1;
    if !plan.terms.is_empty() && acc_width < required {
        return Err(Error::AccWidthTooSmall { required, given: acc_width });
    }
    let mut nl = Netlist::new("mac_const", acc_width);
    let x = nl.add_input("x", in_width);
    match plan_tree(&mut nl, x, plan) {
        None => {
            let z = nl.add_zero(acc_width);
            nl.add_output("y", z);
        }
        Some(tree) => {
            let reg = nl.add_register(acc_width);
            let acc = nl.add_add(tree, reg, CostClass::Accumulator);
            nl.connect_register(reg, acc);
            nl.add_output("y", reg);
        }
    }
    nl.validate()?;
    Ok(nl)
}

/// Generic multiplier-accumulator baseline: the weight stays a runtime
/// input, decomposed into array-multiplier partial-product rows summed by
/// an adder cascade (final row subtracts: two's-complement sign bit).
pub fn synth_generic_mac(w_width: u32, in_width: u32, acc_width: u32) -> Result<Netlist> {
    if w_width < 2 || in_width < 2 {
        return Err(Error::InvalidModelInput(
            "generic MAC needs widths >= 2".into(),
        ));
    }
    let product_width = in_width + w_width;
    if acc_width < product_width {
        return Err(Error::AccWidthTooSmall {
            required: product_width,
            given: acc_width,
        });
    }
    let mut nl = Netlist::new("mac_generic", acc_width);
    let x = nl.add_input("x", in_width);
    let w = nl.add_input("w", w_width);
    let rows: Vec<NodeId> = (0..w_width)
        .map(|bit| nl.add_partial_product(x, w, bit, product_width))
        .collect();
    let mut acc = rows[0];
    for (i, &row) in rows.iter().enumerate().skip(1) {
        acc = if i as u32 == w_width - 1 {
            nl.add_sub(acc, row, CostClass::ShiftAddTree)
        } else {
            nl.add_add(acc, row, CostClass::ShiftAddTree)
        };
    }
    let reg = nl.add_register(acc_width);
    let sum = nl.add_add(acc, reg, CostClass::Accumulator);
    nl.connect_register(reg, sum);
    nl.add_output("y", reg);
    nl.validate()?;
    Ok(nl)
}

/// Single-cycle dot-product neuron: one constant-coefficient subtree per
/// nonzero weight, merged by a balanced adder tree into one output
/// register. Zero weights contribute nothing.
pub fn synth_neuron(
    plans: &[ShiftAddPlan],
    fan_in: usize,
    in_width: u32,
    acc_width: u32,
) -> Result<Netlist> {
    if plans.len() != fan_in {
        return Err(Error::FanInMismatch {
            expected: fan_in,
            found: plans.len(),
        });
    }
    let worst_shift = plans.iter().map(plan_max_rel_shift).max().unwrap_or(0);
    let nonzero = plans.iter().filter(|p| !p.is_empty()).count();
    if nonzero > 0 {
        let merge_bits = (usize::BITS - (nonzero - 1).leading_zeros()).min(31);
        let required = in_width + worst_shift + 1 + merge_bits;
        if acc_width < required {
            return Err(Error::AccWidthTooSmall { required, given: acc_width });
        }
    }

    let mut nl = Netlist::new("neuron", acc_width);
    let xs: Vec<NodeId> = (0..fan_in)
        .map(|i| nl.add_input(format!("x{i}"), in_width))
        .collect();
    let mut parts = Vec::new();
    for (i, plan) in plans.iter().enumerate() {
        if let Some(tree) = plan_tree(&mut nl, xs[i], plan) {
            parts.push((1i8, tree));
        }
    }
    match combine_signed(&mut nl, parts, CostClass::ShiftAddTree) {
        None => {
            let z = nl.add_zero(acc_width);
            nl.add_output("y", z);
        }
        Some(dot) => {
            let reg = nl.add_register(acc_width);
            nl.connect_register(reg, dot);
            nl.add_output("y", reg);
        }
    }
    nl.validate()?;
    Ok(nl)
}

// --- evaluation -------------------------------------------------------------

fn check_width(id: NodeId, value: i64, width: u32) -> Result<i64> {
    let (lo, hi) = signed_range(width.min(63));
    if value < lo || value > hi {
        return Err(Error::WidthViolation { node: id, value, width });
    }
    Ok(value)
}

/// Cycle-accurate evaluation. Inputs are per-cycle traces; registers
/// reset to zero and latch at cycle end, so a registered output at cycle
/// `t` reflects inputs up to cycle `t - 1`. Returns one trace per output
/// port.
pub fn evaluate(
    netlist: &Netlist,
    inputs: &BTreeMap<String, Vec<i64>>,
    cycles: usize,
) -> Result<BTreeMap<String, Vec<i64>>> {
    let order = netlist.topo_order()?;
    // bind input traces
    let mut traces: Vec<Option<&Vec<i64>>> = vec![None; netlist.nodes().len()];
    for &id in netlist.input_ids() {
        if let NodeKind::Input { name } = &netlist.node(id).kind {
            let trace = inputs
                .get(name)
                .ok_or_else(|| Error::UnboundInput(name.clone()))?;
            if trace.len() < cycles {
                return Err(Error::UnboundInput(format!(
                    "{name}: trace has {} values, need {cycles}",
                    trace.len()
                )));
            }
            traces[id] = Some(trace);
        }
    }

    let n = netlist.nodes().len();
    let mut value = vec![0i64; n];
    let mut reg_state = vec![0i64; n];
    let mut out: BTreeMap<String, Vec<i64>> = BTreeMap::new();
    for &id in netlist.output_ids() {
        if let NodeKind::Output { name } = &netlist.node(id).kind {
            out.insert(name.clone(), Vec::with_capacity(cycles));
        }
    }

    for cycle in 0..cycles {
        for &id in &order {
            let node = netlist.node(id);
            let v = match &node.kind {
                NodeKind::Input { .. } => traces[id].unwrap()[cycle],
                NodeKind::Zero => 0,
                NodeKind::ConstShiftWire { shift } => {
                    let src = value[node.inputs[0]];
                    if *shift >= 0 { src << shift } else { src >> (-shift) }
                }
                NodeKind::Add => value[node.inputs[0]] + value[node.inputs[1]],
                NodeKind::Sub => value[node.inputs[0]] - value[node.inputs[1]],
                NodeKind::Negate => -value[node.inputs[0]],
                NodeKind::PartialProduct { bit } => {
                    let x = value[node.inputs[0]];
                    let w = value[node.inputs[1]];
                    if (w >> bit) & 1 != 0 { x << bit } else { 0 }
                }
                NodeKind::Register => reg_state[id],
                NodeKind::Output { .. } => value[node.inputs[0]],
            };
            value[id] = check_width(id, v, node.width)?;
        }
        for &id in netlist.output_ids() {
            if let NodeKind::Output { name } = &netlist.node(id).kind {
                out.get_mut(name).unwrap().push(value[id]);
            }
        }
        // latch registers
        for (id, node) in netlist.nodes().iter().enumerate() {
            if matches!(node.kind, NodeKind::Register) {
                if let Some(&src) = node.inputs.first() {
                    reg_state[id] = check_width(id, value[src], node.width)?;
                }
            }
        }
    }
    Ok(out)
}

/// Convenience wrapper: constant inputs held for every cycle.
pub fn evaluate_const(
    netlist: &Netlist,
    inputs: &BTreeMap<String, i64>,
    cycles: usize,
) -> Result<BTreeMap<String, Vec<i64>>> {
    let traces: BTreeMap<String, Vec<i64>> = inputs
        .iter()
        .map(|(k, &v)| (k.clone(), vec![v; cycles]))
        .collect();
    evaluate(netlist, &traces, cycles)
}

// --- costing ----------------------------------------------------------------

/// NAND2-equivalent per-bit costs. Shifts are wire routing: exactly zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateCostTable {
    pub nand2_per_fulladder_bit: f64,
    pub nand2_per_register_bit: f64,
    /// Per-bit cost of single-gate rows: negation and partial-product
    /// AND gating.
    pub nand2_per_negate_bit: f64,
}

/// Shift cost is structural, not configurable.
pub const SHIFT_COST: f64 = 0.0;

impl Default for GateCostTable {
    fn default() -> Self {
        Self {
            nand2_per_fulladder_bit: 7.0,
            nand2_per_register_bit: 6.0,
            nand2_per_negate_bit: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GateReport {
    pub total: f64,
    pub shift_add_tree: f64,
    pub accumulator: f64,
    pub pipeline_register: f64,
}

/// NAND2-equivalent gate count, bucketed by structural role.
/// The total is the exact sum of the breakdown.
pub fn count_gates(netlist: &Netlist, table: &GateCostTable) -> GateReport {
    let mut tree = 0.0;
    let mut acc = 0.0;
    let mut reg = 0.0;
    for node in netlist.nodes() {
        let cost = match &node.kind {
            NodeKind::Add | NodeKind::Sub => node.width as f64 * table.nand2_per_fulladder_bit,
            NodeKind::Negate => node.width as f64 * table.nand2_per_negate_bit,
            NodeKind::PartialProduct { .. } => {
                // physical gating covers the data bits of the x operand
                let x_width = netlist.node(node.inputs[0]).width;
                x_width as f64 * table.nand2_per_negate_bit
            }
            NodeKind::Register => node.width as f64 * table.nand2_per_register_bit,
            NodeKind::ConstShiftWire { .. } => SHIFT_COST,
            NodeKind::Input { .. } | NodeKind::Zero | NodeKind::Output { .. } => 0.0,
        };
        match node.class {
            CostClass::ShiftAddTree => tree += cost,
            CostClass::Accumulator => acc += cost,
            CostClass::PipelineRegister => reg += cost,
            CostClass::Free => debug_assert_eq!(cost, 0.0),
        }
    }
    GateReport {
        total: tree + acc + reg,
        shift_add_tree: tree,
        accumulator: acc,
        pipeline_register: reg,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StructuralStats {
    pub adds: usize,
    pub subs: usize,
    pub negates: usize,
    pub registers: usize,
    /// Shift-wire count.
    pub wires: usize,
    /// Longest combinational path, counted in arithmetic nodes.
    pub depth: usize,
}

pub fn structural_stats(netlist: &Netlist) -> StructuralStats {
    let mut s = StructuralStats {
        adds: 0,
        subs: 0,
        negates: 0,
        registers: 0,
        wires: 0,
        depth: 0,
    };
    for node in netlist.nodes() {
        match node.kind {
            NodeKind::Add => s.adds += 1,
            NodeKind::Sub => s.subs += 1,
            NodeKind::Negate => s.negates += 1,
            NodeKind::Register => s.registers += 1,
            NodeKind::ConstShiftWire { .. } => s.wires += 1,
            _ => {}
        }
    }
    // longest chain of arithmetic nodes along combinational edges;
    // registers start new paths
    let n = netlist.nodes().len();
    let mut depth = vec![0usize; n];
    for id in 0..n {
        let node = netlist.node(id);
        let own = matches!(
            node.kind,
            NodeKind::Add | NodeKind::Sub | NodeKind::Negate | NodeKind::PartialProduct { .. }
        ) as usize;
        let base = if matches!(node.kind, NodeKind::Register) {
            0
        } else {
            node.inputs.iter().map(|&i| depth[i]).max().unwrap_or(0)
        };
        depth[id] = base + own;
        s.depth = s.depth.max(depth[id]);
    }
    s
}
