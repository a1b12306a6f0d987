//! Period analysis of (block-)symmetric circuit functions, the size
//! lower-bound calculators, and the seeded random generator for symmetric
//! circuits used by the property sweeps.
//!
//! Periods on finite tables are read over all positions where both compared
//! entries exist; a shift at least as long as the table is vacuously a
//! period. The bound checks therefore ask for *some* admissible period
//! length, recording the minimal non-vacuous period alongside.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::circuit::{
    Assignment, Circuit, CircuitBuilder, Evaluator, Gate, GateId, GateKind, Wire,
};
use crate::error::{Error, Result};
use crate::groups::{sym_generators, tree_aut_generators, Block, BlockTree, GeneratorSet, NodeId};
use crate::numtheory::{binomial, checked_pow, factorize, floor_log, integer_root};
use crate::symmetry::{extend_to_automorphism, is_rigid, is_symmetric, rigidify, SupportAnalyzer};

/// Default cap on `|supp(g)|` for per-gate period tables (2^|supp| fillings).
pub const DEFAULT_PERIOD_SUPPORT_CAP: usize = 6;

// ---------------------------------------------------------------------------
// periods of finite unary tables

/// Smallest `ℓ ∈ [1, len−1]` with `t[x] = t[x+ℓ]` wherever both sides exist;
/// `None` if no such shift exists.
pub fn minimal_period<T: PartialEq>(table: &[T]) -> Option<usize> {
    (1..table.len()).find(|&ell| is_period(table, ell))
}

fn is_period<T: PartialEq>(table: &[T], ell: usize) -> bool {
    (0..table.len().saturating_sub(ell)).all(|x| table[x] == table[x + ell])
}

/// Whether `ell` is a period of the table; shifts reaching past the table
/// are vacuously periods.
pub fn has_period<T: PartialEq>(table: &[T], ell: usize) -> bool {
    ell >= table.len() || is_period(table, ell)
}

/// Whether some `ℓ ≤ bound` (vacuous shifts included) is a period.
pub fn has_period_at_most<T: PartialEq>(table: &[T], bound: u64) -> bool {
    if bound >= table.len() as u64 {
        return true;
    }
    match minimal_period(table) {
        Some(ell) => ell as u64 <= bound,
        None => false,
    }
}

// ---------------------------------------------------------------------------
// weight tables

/// Value of a fully symmetric circuit as a function of the Hamming weight.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WeightTable {
    pub values: Vec<bool>,
}

impl WeightTable {
    pub fn is_and(&self) -> bool {
        let n = self.values.len() - 1;
        self.values.iter().enumerate().all(|(w, &v)| v == (w == n))
    }
}

/// Evaluates the circuit at the canonical assignments `1^w 0^{n−w}`.
/// Verifies `Sym_n`-symmetry first: the table is meaningless otherwise.
pub fn weight_table(c: &Circuit) -> Result<WeightTable> {
    if !is_symmetric(c, &sym_generators(c.arity))? {
        return Err(Error::PreconditionFailed(
            "weight table requires a Sym_n-symmetric circuit".into(),
        ));
    }
    weight_table_unchecked(c)
}

pub(crate) fn weight_table_unchecked(c: &Circuit) -> Result<WeightTable> {
    let root = c
        .root
        .ok_or_else(|| Error::MalformedCircuit("weight table needs a root".into()))?;
    let ev = Evaluator::new(c)?;
    let values = (0..=c.arity)
        .map(|w| {
            let mut a = Assignment::all_zeros(c.arity);
            for v in 1..=w {
                a.set(v, true);
            }
            ev.value_at(&a, root)
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(WeightTable { values })
}

// ---------------------------------------------------------------------------
// period bounds

/// `q(m,s) = m · ∏ p_i^{⌊log_{p_i}(s)⌋}`; an empty support contributes the
/// empty product, so `q(m,0) = m`.
pub fn q_bound(m: u64, s: usize) -> u64 {
    let fact = factorize(m).expect("modulus >= 2");
    let mut bound = m;
    if s >= 1 {
        for p in fact.distinct_primes() {
            bound *= checked_pow(p, floor_log(p, s as u64)).expect("q bound overflow");
        }
    }
    bound
}

/// All lengths of the form `1` or `m·∏ p_i^{c_i}` with `c_i ≤ ⌊log_{p_i}(s)⌋`,
/// ascending. These are the period lengths the layer-by-layer induction can
/// produce; the largest is `q(m,s)`.
pub fn admissible_periods(m: u64, s: usize) -> Vec<u64> {
    let fact = factorize(m).expect("modulus >= 2");
    let mut lengths = vec![m];
    for p in fact.distinct_primes() {
        let cap = if s >= 1 { floor_log(p, s as u64) } else { 0 };
        let mut next = Vec::new();
        for len in &lengths {
            for c in 0..=cap {
                next.push(len * checked_pow(p, c).expect("admissible period overflow"));
            }
        }
        lengths = next;
    }
    lengths.push(1);
    lengths.sort_unstable();
    lengths.dedup();
    lengths
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum PeriodSubject {
    Root,
    Gate(GateId),
    Block(NodeId),
}

/// Outcome of a period-versus-bound comparison.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PeriodReport {
    pub subject: PeriodSubject,
    /// Smallest non-vacuous period; `None` when even the full table has none.
    pub minimal_period: Option<usize>,
    pub bound: u64,
    /// Some period of length ≤ bound exists (vacuous shifts count once the
    /// bound reaches past the table).
    pub satisfied: bool,
}

/// Per-gate executable form of the layer induction: for every assignment α
/// to the support, the residual unary function must admit a period of
/// admissible form.
#[derive(Clone, Debug, Serialize)]
pub struct GatePeriodReport {
    pub gate: GateId,
    pub support: BTreeSet<usize>,
    /// Max over α of the minimal non-vacuous period (`None` if some α has no
    /// non-vacuous period at all).
    pub max_min_period: Option<usize>,
    /// Max over α of the smallest admissible period length that holds
    /// (vacuous shifts allowed); `None` signals a genuine bound violation.
    pub max_form_period: Option<u64>,
    pub bound: u64,
    pub satisfied: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PeriodAnalysis {
    pub max_support: usize,
    pub bound: u64,
    /// The analysis rigidified the circuit first; gate ids then refer to the
    /// rigidified circuit.
    pub rigidified: bool,
    pub reports: Vec<GatePeriodReport>,
}

fn rigid_view(c: &Circuit) -> Result<(Circuit, bool)> {
    if is_rigid(c)? {
        Ok((c.clone(), false))
    } else {
        Ok((rigidify(c)?, true))
    }
}

/// Per-gate period reports for a rigid `Sym_n`-symmetric circuit: for every
/// gate with `|supp(g)| ≤ support_cap`, tabulate `g_α` over the count of
/// ones outside the support (canonical fillings: ones at the smallest free
/// indices) and compare against `q(m, maxSup)`.
pub fn gate_period_reports(c: &Circuit, support_cap: usize) -> Result<PeriodAnalysis> {
    let (c, rigidified) = rigid_view(c)?;
    if !is_symmetric(&c, &sym_generators(c.arity))? {
        return Err(Error::PreconditionFailed(
            "per-gate periods require a Sym_n-symmetric circuit".into(),
        ));
    }
    let analyzer = SupportAnalyzer::new(&c)?;
    let supports = analyzer.all_supports()?;
    let mut max_support = 0usize;
    for r in &supports {
        match &r.support {
            Some(s) => max_support = max_support.max(s.len()),
            None => {
                return Err(Error::PreconditionFailed(format!(
                    "gate {} has no uniquely defined support",
                    r.gate
                )))
            }
        }
    }
    let bound = q_bound(c.modulus, max_support);
    let admissible = admissible_periods(c.modulus, max_support);
    let ev = Evaluator::new(&c)?;
    let mut reports = Vec::new();
    for r in supports {
        let support = r.support.expect("checked above");
        if support.len() > support_cap {
            return Err(Error::TooLarge(format!(
                "support of gate {} has {} elements, cap is {support_cap}",
                r.gate,
                support.len()
            )));
        }
        if c.arity - support.len() < 1 {
            return Err(Error::PreconditionFailed(format!(
                "gate {} is supported on all variables",
                r.gate
            )));
        }
        let outside: Vec<usize> = (1..=c.arity).filter(|v| !support.contains(v)).collect();
        let mut max_min: Option<usize> = Some(1);
        let mut max_form: Option<u64> = Some(1);
        for alpha in 0..(1u64 << support.len()) {
            let mut a = Assignment::all_zeros(c.arity);
            for (bit, &v) in support.iter().enumerate() {
                a.set(v, (alpha >> bit) & 1 == 1);
            }
            let table: Vec<bool> = (0..=outside.len())
                .map(|w| {
                    for (i, &v) in outside.iter().enumerate() {
                        a.set(v, i < w);
                    }
                    ev.value_at(&a, r.gate)
                })
                .collect::<Result<_>>()?;
            max_min = match (max_min, minimal_period(&table)) {
                (Some(acc), Some(p)) => Some(acc.max(p)),
                _ => None,
            };
            let form = admissible
                .iter()
                .copied()
                .find(|&ell| has_period(&table, ell as usize));
            max_form = match (max_form, form) {
                (Some(acc), Some(f)) => Some(acc.max(f)),
                _ => None,
            };
        }
        reports.push(GatePeriodReport {
            gate: r.gate,
            support,
            max_min_period: max_min,
            max_form_period: max_form,
            bound,
            satisfied: max_form.is_some(),
        });
    }
    Ok(PeriodAnalysis {
        max_support,
        bound,
        rigidified,
        reports,
    })
}

/// Report for a single gate (computes the full per-circuit analysis, which
/// the bound `q(m, maxSup)` needs anyway).
pub fn gate_period_report(c: &Circuit, g: GateId, support_cap: usize) -> Result<GatePeriodReport> {
    gate_period_reports(c, support_cap)?
        .reports
        .into_iter()
        .find(|r| r.gate == g)
        .ok_or_else(|| Error::InvalidArgument(format!("gate {g} not in circuit")))
}

/// Root period against `m · maxSup(C)^r` (an empty maximal support counts
/// as 1; the bound formula presumes a positive support bound).
pub fn root_period_check(c: &Circuit) -> Result<PeriodReport> {
    let (c, _) = rigid_view(c)?;
    let table = weight_table(&c)?;
    let analyzer = SupportAnalyzer::new(&c)?;
    let max_sup = analyzer
        .max_support()?
        .ok_or_else(|| Error::PreconditionFailed("some gate support is undefined".into()))?;
    let fact = factorize(c.modulus)?;
    let r = fact.num_distinct_primes() as u32;
    let bound =
        c.modulus * checked_pow(max_sup.max(1) as u64, r).expect("root period bound overflow");
    Ok(PeriodReport {
        subject: PeriodSubject::Root,
        minimal_period: minimal_period(&table.values),
        bound,
        satisfied: has_period_at_most(&table.values, bound),
    })
}

/// B-period of the circuit's function for one sibling block: assignments are
/// constant on each member subtree and constant (all-0 or all-1) outside the
/// block; the table is indexed by the number of members assigned all-1. The
/// bound is `m · maxSup_B(C)^r`.
pub fn block_period(c: &Circuit, block: &Block, t: &BlockTree) -> Result<PeriodReport> {
    if c.arity != t.leaf_count() {
        return Err(Error::InvalidArgument(
            "tree leaf count differs from circuit arity".into(),
        ));
    }
    if !is_symmetric(c, &tree_aut_generators(t))? {
        return Err(Error::PreconditionFailed(
            "B-periods require a tree-symmetric circuit".into(),
        ));
    }
    let (c, _) = rigid_view(c)?;
    let root = c
        .root
        .ok_or_else(|| Error::MalformedCircuit("block period needs a root".into()))?;
    let analyzer = SupportAnalyzer::new(&c)?;
    let max_sup_b = analyzer
        .max_block_support(block, t)?
        .ok_or_else(|| Error::PreconditionFailed("some blockwise support is undefined".into()))?;
    let fact = factorize(c.modulus)?;
    let r = fact.num_distinct_primes() as u32;
    let bound =
        c.modulus * checked_pow(max_sup_b.max(1) as u64, r).expect("block period bound overflow");

    let block_leaves: BTreeSet<usize> = block
        .members
        .iter()
        .flat_map(|&v| t.leaf_vars_under(v))
        .collect();
    let ev = Evaluator::new(&c)?;
    let mut minimal: Option<usize> = Some(1);
    let mut satisfied = true;
    for outside in [false, true] {
        let table: Vec<bool> = (0..=block.members.len())
            .map(|j| {
                let mut a = Assignment::all_zeros(c.arity);
                for v in 1..=c.arity {
                    if !block_leaves.contains(&v) {
                        a.set(v, outside);
                    }
                }
                for (idx, &member) in block.members.iter().enumerate() {
                    for v in t.leaf_vars_under(member) {
                        a.set(v, idx < j);
                    }
                }
                ev.value_at(&a, root)
            })
            .collect::<Result<_>>()?;
        minimal = match (minimal, minimal_period(&table)) {
            (Some(acc), Some(p)) => Some(acc.max(p)),
            _ => None,
        };
        satisfied &= has_period_at_most(&table, bound);
    }
    Ok(PeriodReport {
        subject: PeriodSubject::Block(block.parent),
        minimal_period: minimal,
        bound,
        satisfied,
    })
}

// ---------------------------------------------------------------------------
// size lower bounds

/// `k = ⌊(n/m)^{1/r}⌋` and `binom(n, k)`, plus the ceiling variant.
#[derive(Clone, Debug, Serialize)]
pub struct SizeBound {
    pub k: u64,
    #[serde(serialize_with = "crate::analysis::biguint_as_string")]
    pub bound: BigUint,
    pub k_ceil: u64,
    #[serde(serialize_with = "crate::analysis::biguint_as_string")]
    pub bound_ceil: BigUint,
}

pub(crate) fn biguint_as_string<S: serde::Serializer>(
    v: &BigUint,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

pub fn size_lower_bound(n: u64, m: u64) -> Result<SizeBound> {
    let fact = factorize(m)?;
    let r = fact.num_distinct_primes() as u32;
    if r < 2 {
        return Err(Error::UnsupportedModulus(m));
    }
    // largest k with m·k^r ≤ n, by exact integer comparison
    let k = integer_root(n / m, r);
    let k_ceil = {
        let mut kc = k;
        while checked_pow(kc, r).is_some_and(|v| v * m < n) {
            kc += 1;
        }
        kc
    };
    Ok(SizeBound {
        k,
        bound: binomial(n, k),
        k_ceil,
        bound_ceil: binomial(n, k_ceil),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct NestedSizeBound {
    pub k_max: u64,
    pub k: u64,
    #[serde(serialize_with = "crate::analysis::biguint_as_string")]
    pub bound: BigUint,
    /// Whether every branching factor exceeds 8 (the hypothesis of the
    /// nested bound); the value is still computed when it fails, merely
    /// flagged.
    pub hypothesis_met: bool,
}

/// `binom(k_max, ⌊(k_max/m)^{1/r}⌋)` over the largest block size.
pub fn nested_size_lower_bound(t: &BlockTree, m: u64) -> Result<NestedSizeBound> {
    let k_max = *t.branching().iter().max().expect("nonempty branching") as u64;
    let inner = size_lower_bound(k_max, m)?;
    Ok(NestedSizeBound {
        k_max,
        k: inner.k,
        bound: inner.bound,
        hypothesis_met: t.meets_bound_hypothesis(),
    })
}

// ---------------------------------------------------------------------------
// symmetric layer closure and the random circuit generator

/// A prospective gate: accepting set plus children with multiplicities.
#[derive(Clone, Debug)]
pub struct TemplateGate {
    pub accept: BTreeSet<u64>,
    pub children: Vec<(GateId, u64)>,
}

/// Accepting set plus canonical child map: the identity of a MOD gate.
type GateShape = (Vec<u64>, Vec<(GateId, u64)>);

fn canonical_children(children: &[(GateId, u64)]) -> Vec<(GateId, u64)> {
    let mut agg: BTreeMap<GateId, u64> = BTreeMap::new();
    for &(g, mult) in children {
        *agg.entry(g).or_insert(0) += mult;
    }
    agg.into_iter().collect()
}

/// Adds the full orbit of the template gate under the generators (children
/// permuted through the unique extensions), producing a Γ-closed layer.
/// Configurations already present as gates are reused rather than
/// duplicated, so repeated closure keeps the circuit rigid. The input
/// circuit must be Γ-symmetric.
pub fn symmetrize_template(
    c: &Circuit,
    template: &TemplateGate,
    gens: &GeneratorSet,
    cap: usize,
) -> Result<Circuit> {
    for &(child, _) in &template.children {
        if c.gate(child).is_none() {
            return Err(Error::InvalidArgument(format!(
                "template child {child} missing"
            )));
        }
    }
    let mut maps = Vec::new();
    for pi in gens.generators() {
        match extend_to_automorphism(c, pi)? {
            Some(m) => maps.push(m),
            None => return Err(Error::NotSymmetric),
        }
    }
    let start = canonical_children(&template.children);
    let mut orbit: BTreeSet<Vec<(GateId, u64)>> = [start.clone()].into();
    let mut queue = vec![start];
    while let Some(config) = queue.pop() {
        for m in &maps {
            let image = canonical_children(
                &config
                    .iter()
                    .map(|&(g, mult)| (m.apply(g), mult))
                    .collect::<Vec<_>>(),
            );
            if orbit.insert(image.clone()) {
                if orbit.len() > cap {
                    return Err(Error::TooLarge(format!("template orbit exceeds cap {cap}")));
                }
                queue.push(image);
            }
        }
    }
    let existing: BTreeSet<GateShape> = c
        .gates
        .iter()
        .filter_map(|g| match &g.kind {
            GateKind::Mod { accept } => {
                let children: Vec<(GateId, u64)> = canonical_children(
                    &c.wires
                        .iter()
                        .filter(|w| w.to == g.id)
                        .map(|w| (w.from, w.mult))
                        .collect::<Vec<_>>(),
                );
                Some((accept.iter().copied().collect(), children))
            }
            GateKind::Input { .. } => None,
        })
        .collect();
    let accept_key: Vec<u64> = template.accept.iter().copied().collect();
    let mut out = c.clone();
    let mut next_id = c.gates.iter().map(|g| g.id.0).max().unwrap_or(0) + 1;
    for config in orbit {
        if existing.contains(&(accept_key.clone(), config.clone())) {
            continue;
        }
        let id = GateId(next_id);
        next_id += 1;
        out.gates.push(Gate {
            id,
            kind: GateKind::Mod {
                accept: template.accept.clone(),
            },
        });
        for (child, mult) in config {
            out.wires.push(Wire {
                from: child,
                to: id,
                mult,
            });
        }
    }
    out.validate()?;
    Ok(out)
}

fn find_gate_by_shape(
    c: &Circuit,
    accept: &BTreeSet<u64>,
    config: &[(GateId, u64)],
) -> Option<GateId> {
    c.gates.iter().find_map(|g| match &g.kind {
        GateKind::Mod { accept: a } if a == accept => {
            let children = canonical_children(
                &c.wires
                    .iter()
                    .filter(|w| w.to == g.id)
                    .map(|w| (w.from, w.mult))
                    .collect::<Vec<_>>(),
            );
            (children == config).then_some(g.id)
        }
        _ => None,
    })
}

/// Parameters of the seeded random generator. Kept small so support
/// computation and exhaustive evaluation stay tractable.
#[derive(Clone, Debug)]
pub struct RandomCircuitParams {
    pub modulus: u64,
    pub arity: usize,
    pub layers: usize,
    pub templates_per_layer: usize,
    pub max_support: usize,
    pub orbit_cap: usize,
}

impl Default for RandomCircuitParams {
    fn default() -> Self {
        RandomCircuitParams {
            modulus: 6,
            arity: 6,
            layers: 2,
            templates_per_layer: 2,
            max_support: 3,
            orbit_cap: 4096,
        }
    }
}

/// Seeded, layered, orbit-closed random `Sym_n`-symmetric circuit, built by
/// repeated template symmetrization. Rigid by construction: gate shapes are
/// deduplicated during closure. Every template keeps the union of its
/// children's supports strictly below n/2 (that union is itself a support of
/// the new gate), so all minimal supports stay uniquely defined.
pub fn random_symmetric_circuit(params: &RandomCircuitParams, seed: u64) -> Result<Circuit> {
    let n = params.arity;
    let m = params.modulus;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gens = sym_generators(n);
    let mut c = CircuitBuilder::new(m, n).finish()?;
    let mut prev_layer: Vec<GateId> = (0..n as u32).map(GateId).collect();
    let mut support_of: BTreeMap<GateId, BTreeSet<usize>> = (0..n)
        .map(|i| (GateId(i as u32), BTreeSet::from([i + 1])))
        .collect();
    let union_cap = n.saturating_sub(1) / 2; // strictly below n/2
    let random_accept = |rng: &mut ChaCha8Rng| -> BTreeSet<u64> {
        loop {
            let accept: BTreeSet<u64> = (0..m).filter(|_| rng.gen_bool(0.5)).collect();
            if !accept.is_empty() && accept.len() < m as usize {
                return accept;
            }
        }
    };
    for _ in 1..params.layers {
        let before = c.gates.len();
        for _ in 0..params.templates_per_layer {
            // resample until the support union is small enough
            let mut children = Vec::new();
            for _ in 0..32 {
                let k = rng.gen_range(1..=params.max_support.min(prev_layer.len()));
                let mut pool = prev_layer.clone();
                let mut draw = Vec::new();
                let mut union: BTreeSet<usize> = BTreeSet::new();
                for _ in 0..k {
                    let i = rng.gen_range(0..pool.len());
                    let child = pool.swap_remove(i);
                    union.extend(support_of[&child].iter().copied());
                    draw.push((child, rng.gen_range(1..m)));
                }
                if union.len() <= union_cap.max(1) {
                    children = draw;
                    break;
                }
            }
            if children.is_empty() {
                continue;
            }
            let template = TemplateGate {
                accept: random_accept(&mut rng),
                children,
            };
            match symmetrize_template(&c, &template, &gens, params.orbit_cap) {
                Ok(next) => c = next,
                Err(Error::TooLarge(_)) => continue, // orbit too big, skip template
                Err(e) => return Err(e),
            }
        }
        if c.gates.len() > before {
            prev_layer = c.gates[before..].iter().map(|g| g.id).collect();
            for g in &c.gates[before..] {
                let union: BTreeSet<usize> = c
                    .wires
                    .iter()
                    .filter(|w| w.to == g.id)
                    .flat_map(|w| support_of[&w.from].iter().copied())
                    .collect();
                support_of.insert(g.id, union);
            }
        }
        // an all-skipped layer keeps the previous layer as the frontier
    }
    // root: one gate over the whole frontier with uniform multiplicity
    let root_accept = random_accept(&mut rng);
    let root_mult = rng.gen_range(1..m);
    let root_children: Vec<(GateId, u64)> = prev_layer.iter().map(|&g| (g, root_mult)).collect();
    let template = TemplateGate {
        accept: root_accept.clone(),
        children: root_children.clone(),
    };
    c = symmetrize_template(&c, &template, &gens, params.orbit_cap)?;
    let root = find_gate_by_shape(&c, &root_accept, &canonical_children(&root_children))
        .expect("root gate just closed");
    c.root = Some(root);
    c.validate()?;
    debug_assert!(is_symmetric(&c, &gens)?);
    Ok(c)
}
