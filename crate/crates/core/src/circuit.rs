//! The circuit IR: DAGs of `MOD_m^R` gates over labeled inputs, with weighted
//! multi-edges stored as a single wire record carrying an integer multiplicity.
//!
//! A closed [`Circuit`] has a designated root gate; an [`OpenCircuit`] instead
//! designates output wires whose weighted sum modulo `q` is the result.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the arity for exhaustive truth tables.
pub const DEFAULT_EXHAUSTIVE_CAP: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GateId(pub u32);

impl std::fmt::Display for GateId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Either an input gate labeled with a variable index in `1..=n`, or a
/// modular counting gate with an accepting set `R ⊆ Z_m`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GateKind {
    Input { var: usize },
    Mod { accept: BTreeSet<u64> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gate {
    pub id: GateId,
    #[serde(flatten)]
    pub kind: GateKind,
}

/// A directed multi-edge `from → to` with multiplicity `mult ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Wire {
    pub from: GateId,
    pub to: GateId,
    pub mult: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Circuit {
    pub modulus: u64,
    pub arity: usize,
    pub gates: Vec<Gate>,
    pub wires: Vec<Wire>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub root: Option<GateId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputWire {
    pub gate: GateId,
    pub mult: u64,
}

/// A circuit of output type `q`: the designated output wires are summed
/// modulo `q` instead of feeding a root gate. The output-wire layer counts
/// towards the depth.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpenCircuit {
    pub body: Circuit,
    pub outputs: Vec<OutputWire>,
    pub output_modulus: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OpenCircuitJson {
    modulus: u64,
    arity: usize,
    gates: Vec<Gate>,
    wires: Vec<Wire>,
    outputs: Vec<OutputWire>,
    output_modulus: u64,
}

impl Serialize for OpenCircuit {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        OpenCircuitJson {
            modulus: self.body.modulus,
            arity: self.body.arity,
            gates: self.body.gates.clone(),
            wires: self.body.wires.clone(),
            outputs: self.outputs.clone(),
            output_modulus: self.output_modulus,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for OpenCircuit {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = OpenCircuitJson::deserialize(d)?;
        Ok(OpenCircuit {
            body: Circuit {
                modulus: raw.modulus,
                arity: raw.arity,
                gates: raw.gates,
                wires: raw.wires,
                root: None,
            },
            outputs: raw.outputs,
            output_modulus: raw.output_modulus,
        })
    }
}

/// A length-`n` 0/1 assignment to the variables `x_1, …, x_n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    bits: Vec<bool>,
}

impl Assignment {
    pub fn new(bits: Vec<bool>) -> Self {
        Assignment { bits }
    }

    pub fn all_ones(n: usize) -> Self {
        Assignment {
            bits: vec![true; n],
        }
    }

    pub fn all_zeros(n: usize) -> Self {
        Assignment {
            bits: vec![false; n],
        }
    }

    /// The `idx`-th assignment in lexicographic order of `(x_1, …, x_n)`,
    /// i.e. `x_1` is the most significant bit of `idx`.
    pub fn from_index(n: usize, idx: u64) -> Self {
        let bits = (1..=n).map(|j| (idx >> (n - j)) & 1 == 1).collect();
        Assignment { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Value of `x_var` (1-based).
    pub fn get(&self, var: usize) -> bool {
        self.bits[var - 1]
    }

    pub fn set(&mut self, var: usize, value: bool) {
        self.bits[var - 1] = value;
    }

    pub fn weight(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

impl Circuit {
    pub fn gate(&self, id: GateId) -> Option<&Gate> {
        self.gates.iter().find(|g| g.id == id)
    }

    /// The unique input gate labeled `x_var`.
    pub fn input_gate(&self, var: usize) -> Option<GateId> {
        self.gates.iter().find_map(|g| match g.kind {
            GateKind::Input { var: v } if v == var => Some(g.id),
            _ => None,
        })
    }

    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }

    /// Total size `|C|`: gates plus wires counted with multiplicities.
    pub fn size(&self) -> u64 {
        self.gates.len() as u64 + self.wires.iter().map(|w| w.mult).sum::<u64>()
    }

    /// Checks the structural invariants (unique ids, one input gate per
    /// variable, accepting sets within `Z_m`, wire sanity, acyclicity, root
    /// present and modular for closed circuits).
    pub fn validate(&self) -> Result<()> {
        if self.modulus < 2 {
            return Err(Error::InvalidModulus(self.modulus));
        }
        if self.arity == 0 {
            return Err(Error::MalformedCircuit("arity must be positive".into()));
        }
        let mut ids = BTreeSet::new();
        let mut vars = BTreeSet::new();
        for g in &self.gates {
            if !ids.insert(g.id) {
                return Err(Error::MalformedCircuit(format!(
                    "duplicate gate id {}",
                    g.id
                )));
            }
            match &g.kind {
                GateKind::Input { var } => {
                    if *var == 0 || *var > self.arity {
                        return Err(Error::MalformedCircuit(format!(
                            "input variable x_{var} out of range 1..={}",
                            self.arity
                        )));
                    }
                    if !vars.insert(*var) {
                        return Err(Error::MalformedCircuit(format!(
                            "more than one input gate for x_{var}"
                        )));
                    }
                }
                GateKind::Mod { accept } => {
                    if let Some(&a) = accept.iter().next_back() {
                        if a >= self.modulus {
                            return Err(Error::MalformedCircuit(format!(
                                "accepting value {a} outside Z_{}",
                                self.modulus
                            )));
                        }
                    }
                }
            }
        }
        if vars.len() != self.arity {
            return Err(Error::MalformedCircuit(format!(
                "expected one input gate for each of {} variables, found {}",
                self.arity,
                vars.len()
            )));
        }
        let mut seen_pairs = BTreeSet::new();
        for w in &self.wires {
            if w.mult == 0 {
                return Err(Error::MalformedCircuit("wire multiplicity 0".into()));
            }
            if !ids.contains(&w.from) || !ids.contains(&w.to) {
                return Err(Error::MalformedCircuit(format!(
                    "wire {} -> {} references a missing gate",
                    w.from, w.to
                )));
            }
            if !seen_pairs.insert((w.from, w.to)) {
                return Err(Error::MalformedCircuit(format!(
                    "more than one wire record for {} -> {}",
                    w.from, w.to
                )));
            }
            match self.gate(w.to).map(|g| &g.kind) {
                Some(GateKind::Mod { .. }) => {}
                _ => {
                    return Err(Error::MalformedCircuit(format!(
                        "wire into non-modular gate {}",
                        w.to
                    )))
                }
            }
        }
        if let Some(root) = self.root {
            match self.gate(root).map(|g| &g.kind) {
                Some(GateKind::Mod { .. }) => {}
                Some(_) => return Err(Error::MalformedCircuit("root is not a MOD gate".into())),
                None => return Err(Error::MalformedCircuit("root gate missing".into())),
            }
        }
        Evaluator::new(self).map(|_| ())
    }

    /// Longest edge count on any path ending at the root (or, for rootless
    /// bodies, anywhere in the DAG).
    pub fn depth(&self) -> Result<usize> {
        let ev = Evaluator::new(self)?;
        Ok(ev.depth_to(self.root))
    }

    /// Reduce every wire multiplicity mod `m`, deleting wires that reduce
    /// to 0. Function-preserving because gate semantics depend only on the
    /// weighted sum mod `m`.
    pub fn normalize_multiplicities(&self) -> Circuit {
        let mut out = self.clone();
        out.wires = self
            .wires
            .iter()
            .filter_map(|w| {
                let mult = w.mult % self.modulus;
                (mult != 0).then_some(Wire { mult, ..*w })
            })
            .collect();
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("circuit serialization")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("circuit serialization")
    }

    pub fn from_json(s: &str) -> Result<Circuit> {
        serde_json::from_str(s).map_err(|e| Error::MalformedCircuit(e.to_string()))
    }

    /// Deterministic DOT rendering: one node per gate in ascending id order,
    /// one edge per wire record labeled with its multiplicity.
    pub fn to_dot(&self) -> String {
        let mut gates: Vec<&Gate> = self.gates.iter().collect();
        gates.sort_by_key(|g| g.id);
        let mut wires: Vec<&Wire> = self.wires.iter().collect();
        wires.sort_by_key(|w| (w.from, w.to));
        let mut out = String::from("digraph circuit {\n  rankdir=BT;\n");
        for g in gates {
            let label = match &g.kind {
                GateKind::Input { var } => format!("x_{var}"),
                GateKind::Mod { accept } => format!("MOD_{}^{{{}}}", self.modulus, fmt_set(accept)),
            };
            let shape = match g.kind {
                GateKind::Input { .. } => "plaintext",
                GateKind::Mod { .. } => "ellipse",
            };
            writeln!(out, "  g{} [label=\"{}\", shape={}];", g.id, label, shape).unwrap();
        }
        for w in wires {
            writeln!(out, "  g{} -> g{} [label=\"×{}\"];", w.from, w.to, w.mult).unwrap();
        }
        out.push_str("}\n");
        out
    }
}

fn fmt_set(s: &BTreeSet<u64>) -> String {
    s.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl OpenCircuit {
    pub fn validate(&self) -> Result<()> {
        self.body.validate()?;
        if self.output_modulus < 2 || !self.body.modulus.is_multiple_of(self.output_modulus) {
            return Err(Error::MalformedCircuit(format!(
                "output modulus {} does not divide circuit modulus {}",
                self.output_modulus, self.body.modulus
            )));
        }
        for o in &self.outputs {
            if self.body.gate(o.gate).is_none() {
                return Err(Error::MalformedCircuit(format!(
                    "output references missing gate {}",
                    o.gate
                )));
            }
            if o.mult == 0 || o.mult >= self.output_modulus {
                return Err(Error::MalformedCircuit(format!(
                    "output multiplicity {} outside 1..{}",
                    o.mult, self.output_modulus
                )));
            }
        }
        Ok(())
    }

    /// Depth including the output-wire layer.
    pub fn depth(&self) -> Result<usize> {
        let ev = Evaluator::new(&self.body)?;
        let deepest = self
            .outputs
            .iter()
            .map(|o| ev.depth_to(Some(o.gate)))
            .max()
            .unwrap_or(0);
        Ok(deepest + 1)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("open circuit serialization")
    }

    pub fn from_json(s: &str) -> Result<OpenCircuit> {
        serde_json::from_str(s).map_err(|e| Error::MalformedCircuit(e.to_string()))
    }

    pub fn to_dot(&self) -> String {
        let mut out = self.body.to_dot();
        out.truncate(out.len() - 2); // strip closing "}\n"
        writeln!(
            out,
            "  out [label=\"Σ mod {}\", shape=doubleoctagon];",
            self.output_modulus
        )
        .unwrap();
        let mut outputs = self.outputs.clone();
        outputs.sort_by_key(|o| o.gate);
        for o in outputs {
            writeln!(out, "  g{} -> out [label=\"×{}\"];", o.gate, o.mult).unwrap();
        }
        out.push_str("}\n");
        out
    }
}

/// Precomputed topological evaluation order and adjacency for a circuit.
///
/// Construction fails with `MalformedCircuit` on cyclic wiring. Evaluation is
/// a single pass in topological order and is deterministic regardless of how
/// gates and wires are listed.
pub struct Evaluator<'a> {
    circuit: &'a Circuit,
    index: HashMap<GateId, usize>,
    topo: Vec<usize>,
    children: Vec<Vec<(usize, u64)>>,
    accept: Vec<Option<Vec<bool>>>,
    input_var: Vec<Option<usize>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(circuit: &'a Circuit) -> Result<Self> {
        let n = circuit.gates.len();
        let mut index = HashMap::with_capacity(n);
        for (i, g) in circuit.gates.iter().enumerate() {
            index.insert(g.id, i);
        }
        let mut children: Vec<Vec<(usize, u64)>> = vec![Vec::new(); n];
        let mut indegree = vec![0usize; n];
        for w in &circuit.wires {
            let (&f, &t) = match (index.get(&w.from), index.get(&w.to)) {
                (Some(f), Some(t)) => (f, t),
                _ => {
                    return Err(Error::MalformedCircuit(format!(
                        "wire {} -> {} references a missing gate",
                        w.from, w.to
                    )))
                }
            };
            children[t].push((f, w.mult));
            indegree[t] += 1;
        }
        // Kahn's algorithm over the child→parent direction.
        let mut parents: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (t, ch) in children.iter().enumerate() {
            for &(f, _) in ch {
                parents[f].push(t);
            }
        }
        let mut queue: Vec<usize> = indegree
            .iter()
            .enumerate()
            .filter_map(|(i, &d)| (d == 0).then_some(i))
            .collect();
        let mut topo = Vec::with_capacity(n);
        let mut remaining = indegree;
        while let Some(i) = queue.pop() {
            topo.push(i);
            for &p in &parents[i] {
                remaining[p] -= 1;
                if remaining[p] == 0 {
                    queue.push(p);
                }
            }
        }
        if topo.len() != n {
            return Err(Error::MalformedCircuit("cyclic wiring".into()));
        }
        let mut accept = Vec::with_capacity(n);
        let mut input_var = Vec::with_capacity(n);
        for g in &circuit.gates {
            match &g.kind {
                GateKind::Input { var } => {
                    accept.push(None);
                    input_var.push(Some(*var));
                }
                GateKind::Mod { accept: r } => {
                    let mut table = vec![false; circuit.modulus as usize];
                    for &a in r {
                        if a < circuit.modulus {
                            table[a as usize] = true;
                        }
                    }
                    accept.push(Some(table));
                    input_var.push(None);
                }
            }
        }
        Ok(Evaluator {
            circuit,
            index,
            topo,
            children,
            accept,
            input_var,
        })
    }

    pub fn position(&self, g: GateId) -> Option<usize> {
        self.index.get(&g).copied()
    }

    /// Values of all gates under `a`, indexed by gate position in
    /// `circuit.gates`.
    pub fn values(&self, a: &Assignment) -> Result<Vec<bool>> {
        let mut vals = vec![false; self.circuit.gates.len()];
        self.values_into(a, &mut vals)?;
        Ok(vals)
    }

    pub fn values_into(&self, a: &Assignment, vals: &mut [bool]) -> Result<()> {
        if a.len() != self.circuit.arity {
            return Err(Error::InvalidAssignment {
                expected: self.circuit.arity,
                got: a.len(),
            });
        }
        let m = self.circuit.modulus;
        for &i in &self.topo {
            vals[i] = match self.input_var[i] {
                Some(var) => a.get(var),
                None => {
                    let mut sum = 0u64;
                    for &(c, mult) in &self.children[i] {
                        if vals[c] {
                            sum += mult % m;
                            if sum >= m {
                                sum -= m;
                            }
                        }
                    }
                    self.accept[i].as_ref().unwrap()[sum as usize]
                }
            };
        }
        Ok(())
    }

    /// Value of a single gate under `a`.
    pub fn value_at(&self, a: &Assignment, g: GateId) -> Result<bool> {
        let pos = self
            .position(g)
            .ok_or_else(|| Error::MalformedCircuit(format!("gate {g} not in circuit")))?;
        Ok(self.values(a)?[pos])
    }

    /// Longest edge count over paths ending at `target` (or anywhere when
    /// `target` is `None`).
    fn depth_to(&self, target: Option<GateId>) -> usize {
        // dist[i] = longest path from i down to any childless gate.
        let mut dist = vec![0usize; self.circuit.gates.len()];
        for &i in &self.topo {
            for &(c, _) in &self.children[i] {
                dist[i] = dist[i].max(dist[c] + 1);
            }
        }
        match target.and_then(|g| self.position(g)) {
            Some(pos) => dist[pos],
            None => dist.into_iter().max().unwrap_or(0),
        }
    }
}

/// Value at the root under semantics: each MOD gate outputs 1 iff the
/// multiplicity-weighted sum of its children mod `m` lies in its accepting
/// set.
pub fn evaluate(c: &Circuit, a: &Assignment) -> Result<bool> {
    let root = c
        .root
        .ok_or_else(|| Error::MalformedCircuit("closed evaluation needs a root".into()))?;
    Evaluator::new(c)?.value_at(a, root)
}

/// Weighted sum of the output wires modulo the output modulus.
pub fn evaluate_open(oc: &OpenCircuit, a: &Assignment) -> Result<u64> {
    let ev = Evaluator::new(&oc.body)?;
    let vals = ev.values(a)?;
    let q = oc.output_modulus;
    let mut sum = 0u64;
    for o in &oc.outputs {
        let pos = ev
            .position(o.gate)
            .ok_or_else(|| Error::MalformedCircuit(format!("output gate {} missing", o.gate)))?;
        if vals[pos] {
            sum = (sum + o.mult) % q;
        }
    }
    Ok(sum)
}

/// Evaluate over all `2^n` assignments in lexicographic order.
pub fn truth_table(c: &Circuit, max_arity: usize) -> Result<Vec<bool>> {
    if c.arity > max_arity {
        return Err(Error::TooLarge(format!(
            "truth table for arity {} exceeds cap {}",
            c.arity, max_arity
        )));
    }
    let root = c
        .root
        .ok_or_else(|| Error::MalformedCircuit("truth table needs a root".into()))?;
    let ev = Evaluator::new(c)?;
    let pos = ev
        .position(root)
        .ok_or_else(|| Error::MalformedCircuit("root gate missing".into()))?;
    let mut vals = vec![false; c.gates.len()];
    let mut out = Vec::with_capacity(1usize << c.arity);
    for idx in 0..(1u64 << c.arity) {
        let a = Assignment::from_index(c.arity, idx);
        ev.values_into(&a, &mut vals)?;
        out.push(vals[pos]);
    }
    Ok(out)
}

/// Incremental construction helper used by the builders and tests.
pub struct CircuitBuilder {
    modulus: u64,
    arity: usize,
    gates: Vec<Gate>,
    wires: Vec<Wire>,
    root: Option<GateId>,
    next_id: u32,
}

impl CircuitBuilder {
    /// Starts a circuit with input gates `0..n-1` labeled `x_1..x_n`.
    pub fn new(modulus: u64, arity: usize) -> Self {
        let gates = (0..arity)
            .map(|i| Gate {
                id: GateId(i as u32),
                kind: GateKind::Input { var: i + 1 },
            })
            .collect();
        CircuitBuilder {
            modulus,
            arity,
            gates,
            wires: Vec::new(),
            root: None,
            next_id: arity as u32,
        }
    }

    pub fn input(&self, var: usize) -> GateId {
        assert!(var >= 1 && var <= self.arity);
        GateId((var - 1) as u32)
    }

    pub fn add_mod(&mut self, accept: BTreeSet<u64>) -> GateId {
        let id = GateId(self.next_id);
        self.next_id += 1;
        self.gates.push(Gate {
            id,
            kind: GateKind::Mod { accept },
        });
        id
    }

    /// Adds `mult` to the wire `from → to` (wires accumulate into a single
    /// record per pair).
    pub fn wire(&mut self, from: GateId, to: GateId, mult: u64) {
        if mult == 0 {
            return;
        }
        if let Some(w) = self.wires.iter_mut().find(|w| w.from == from && w.to == to) {
            w.mult += mult;
        } else {
            self.wires.push(Wire { from, to, mult });
        }
    }

    pub fn set_root(&mut self, root: GateId) {
        self.root = Some(root);
    }

    pub fn finish(self) -> Result<Circuit> {
        let c = Circuit {
            modulus: self.modulus,
            arity: self.arity,
            gates: self.gates,
            wires: self.wires,
            root: self.root,
        };
        c.validate()?;
        Ok(c)
    }
}
