//! Circuit automorphisms: extending input permutations to gate bijections,
//! symmetry and rigidity checking, rigidification by canonical merging, gate
//! orbits, and minimal (blockwise) gate supports.
//!
//! The extension search runs iterative partition refinement on gate
//! signatures (kind, accepting set, forced input class, child and parent
//! color multisets with wire multiplicities) and finishes with a backtracking
//! matcher over the refined classes.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;

use serde::Serialize;

use crate::circuit::{Circuit, Evaluator, Gate, GateId, GateKind, Wire};
use crate::error::{Error, Result};
use crate::groups::{
    block_sibling_generators, pointwise_stabilizer_generators, Block, BlockTree, GeneratorSet,
    NodeId, Permutation,
};

/// Cap on the gate count for rigidity / automorphism searches.
pub const DEFAULT_SEARCH_CAP: usize = 100_000;

/// Cap on `n` for exhaustive minimal-support enumeration.
pub const EXHAUSTIVE_SUPPORT_CAP: usize = 12;

/// A gate bijection extending an input permutation: preserves gate kinds,
/// accepting sets, input labels (up to the permutation) and all wire
/// multiplicities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CircuitAutomorphism {
    map: BTreeMap<GateId, GateId>,
}

impl CircuitAutomorphism {
    pub fn apply(&self, g: GateId) -> GateId {
        self.map[&g]
    }

    pub fn get(&self, g: GateId) -> Option<GateId> {
        self.map.get(&g).copied()
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().all(|(a, b)| a == b)
    }

    pub fn iter(&self) -> impl Iterator<Item = (GateId, GateId)> + '_ {
        self.map.iter().map(|(&a, &b)| (a, b))
    }
}

// ---------------------------------------------------------------------------
// indexed view of a circuit for the searches

struct CircuitIndex<'a> {
    c: &'a Circuit,
    ids: Vec<GateId>,
    children: Vec<Vec<(usize, u64)>>,
    parents: Vec<Vec<(usize, u64)>>,
    wire_mult: HashMap<(usize, usize), u64>,
    root_pos: Option<usize>,
}

impl<'a> CircuitIndex<'a> {
    fn new(c: &'a Circuit) -> Result<Self> {
        // Evaluator::new performs the cycle check.
        Evaluator::new(c)?;
        let mut pos = HashMap::new();
        let mut ids = Vec::with_capacity(c.gates.len());
        for (i, g) in c.gates.iter().enumerate() {
            pos.insert(g.id, i);
            ids.push(g.id);
        }
        let n = c.gates.len();
        let mut children: Vec<Vec<(usize, u64)>> = vec![Vec::new(); n];
        let mut parents: Vec<Vec<(usize, u64)>> = vec![Vec::new(); n];
        let mut wire_mult = HashMap::with_capacity(c.wires.len());
        for w in &c.wires {
            let (f, t) = (pos[&w.from], pos[&w.to]);
            children[t].push((f, w.mult));
            parents[f].push((t, w.mult));
            wire_mult.insert((f, t), w.mult);
        }
        let root_pos = c.root.map(|r| pos[&r]);
        Ok(CircuitIndex {
            c,
            ids,
            children,
            parents,
            wire_mult,
            root_pos,
        })
    }
}

// initial color tokens
#[derive(Clone, PartialEq, Eq, Hash)]
enum InitColor {
    Input(usize),
    Mod { accept: Vec<u64>, is_root: bool },
}

/// Partition refinement shared by both sides of the matching. Returns final
/// colors, or `None` if the color multisets ever diverge (no automorphism).
/// Refinement signature: own color, child (color, mult) multiset, parent
/// (color, mult) multiset.
type RefineSig = (u32, Vec<(u32, u64)>, Vec<(u32, u64)>);

fn refine(
    idx: &CircuitIndex,
    left_init: &[InitColor],
    right_init: &[InitColor],
) -> Option<(Vec<u32>, Vec<u32>)> {
    let n = idx.ids.len();
    let mut interner: HashMap<InitColor, u32> = HashMap::new();
    let mut color_l = vec![0u32; n];
    let mut color_r = vec![0u32; n];
    for i in 0..n {
        let next = interner.len() as u32;
        color_l[i] = *interner.entry(left_init[i].clone()).or_insert(next);
        let next = interner.len() as u32;
        color_r[i] = *interner.entry(right_init[i].clone()).or_insert(next);
    }
    if !same_multiset(&color_l, &color_r) {
        return None;
    }
    let mut distinct = count_distinct(&color_l, &color_r);
    loop {
        let mut sig_map: HashMap<RefineSig, u32> = HashMap::new();
        let mut next_l = vec![0u32; n];
        let mut next_r = vec![0u32; n];
        for (colors, next) in [(&color_l, &mut next_l), (&color_r, &mut next_r)] {
            for i in 0..n {
                let mut ch: Vec<(u32, u64)> = idx.children[i]
                    .iter()
                    .map(|&(c, m)| (colors[c], m))
                    .collect();
                ch.sort_unstable();
                let mut pa: Vec<(u32, u64)> = idx.parents[i]
                    .iter()
                    .map(|&(p, m)| (colors[p], m))
                    .collect();
                pa.sort_unstable();
                let fresh = sig_map.len() as u32;
                next[i] = *sig_map.entry((colors[i], ch, pa)).or_insert(fresh);
            }
        }
        if !same_multiset(&next_l, &next_r) {
            return None;
        }
        let new_distinct = count_distinct(&next_l, &next_r);
        color_l = next_l;
        color_r = next_r;
        if new_distinct == distinct {
            return Some((color_l, color_r));
        }
        distinct = new_distinct;
    }
}

fn count_distinct(a: &[u32], b: &[u32]) -> usize {
    a.iter().chain(b.iter()).collect::<BTreeSet<_>>().len()
}

fn same_multiset(a: &[u32], b: &[u32]) -> bool {
    let mut counts: HashMap<u32, i64> = HashMap::new();
    for &x in a {
        *counts.entry(x).or_default() += 1;
    }
    for &x in b {
        *counts.entry(x).or_default() -= 1;
    }
    counts.values().all(|&v| v == 0)
}

/// Backtracking matcher over refined classes. Calls `on_solution` for every
/// gate bijection consistent with colors and wires; stops when the callback
/// returns `false`.
struct Matcher<'a> {
    idx: &'a CircuitIndex<'a>,
    cand: Vec<Vec<usize>>,
    order: Vec<usize>,
    assign: Vec<Option<usize>>,
    used: Vec<bool>,
}

impl<'a> Matcher<'a> {
    fn new(idx: &'a CircuitIndex<'a>, color_l: &[u32], color_r: &[u32]) -> Self {
        let n = idx.ids.len();
        let mut by_color: HashMap<u32, Vec<usize>> = HashMap::new();
        for (i, &c) in color_r.iter().enumerate() {
            by_color.entry(c).or_default().push(i);
        }
        let cand: Vec<Vec<usize>> = color_l
            .iter()
            .map(|c| by_color.get(c).cloned().unwrap_or_default())
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| (cand[i].len(), i));
        Matcher {
            idx,
            cand,
            order,
            assign: vec![None; n],
            used: vec![false; n],
        }
    }

    fn consistent(&self, l: usize, r: usize) -> bool {
        for &(c, mult) in &self.idx.children[l] {
            if let Some(rc) = self.assign[c] {
                if self.idx.wire_mult.get(&(rc, r)) != Some(&mult) {
                    return false;
                }
            }
        }
        for &(p, mult) in &self.idx.parents[l] {
            if let Some(rp) = self.assign[p] {
                if self.idx.wire_mult.get(&(r, rp)) != Some(&mult) {
                    return false;
                }
            }
        }
        true
    }

    fn search(
        &mut self,
        depth: usize,
        on_solution: &mut dyn FnMut(&[Option<usize>]) -> bool,
    ) -> bool {
        if depth == self.order.len() {
            return on_solution(&self.assign);
        }
        let l = self.order[depth];
        for k in 0..self.cand[l].len() {
            let r = self.cand[l][k];
            if self.used[r] || !self.consistent(l, r) {
                continue;
            }
            self.assign[l] = Some(r);
            self.used[r] = true;
            let keep_going = self.search(depth + 1, on_solution);
            self.assign[l] = None;
            self.used[r] = false;
            if !keep_going {
                return false;
            }
        }
        true
    }
}

fn init_colors(idx: &CircuitIndex, relabel: impl Fn(usize) -> usize) -> Vec<InitColor> {
    idx.c
        .gates
        .iter()
        .enumerate()
        .map(|(i, g)| match &g.kind {
            GateKind::Input { var } => InitColor::Input(relabel(*var)),
            GateKind::Mod { accept } => InitColor::Mod {
                accept: accept.iter().copied().collect(),
                is_root: idx.root_pos == Some(i),
            },
        })
        .collect()
}

fn solution_to_map(idx: &CircuitIndex, assign: &[Option<usize>]) -> CircuitAutomorphism {
    let map = assign
        .iter()
        .enumerate()
        .map(|(l, r)| (idx.ids[l], idx.ids[r.expect("complete assignment")]))
        .collect();
    CircuitAutomorphism { map }
}

/// Extends the input permutation `pi` to a circuit automorphism, or reports
/// that none exists. The root, when present, is pinned.
pub fn extend_to_automorphism(
    c: &Circuit,
    pi: &Permutation,
) -> Result<Option<CircuitAutomorphism>> {
    if pi.degree() != c.arity {
        return Err(Error::InvalidArgument(format!(
            "permutation degree {} does not match circuit arity {}",
            pi.degree(),
            c.arity
        )));
    }
    let idx = CircuitIndex::new(c)?;
    let left = init_colors(&idx, |v| pi.apply(v));
    let right = init_colors(&idx, |v| v);
    let Some((color_l, color_r)) = refine(&idx, &left, &right) else {
        return Ok(None);
    };
    let mut found = None;
    Matcher::new(&idx, &color_l, &color_r).search(0, &mut |assign| {
        found = Some(solution_to_map(&idx, assign));
        false
    });
    Ok(found)
}

/// True iff every generator extends to an automorphism. Sufficient because
/// extensions compose along products of generators.
pub fn is_symmetric(c: &Circuit, gens: &GeneratorSet) -> Result<bool> {
    if gens.degree() != c.arity {
        return Err(Error::InvalidArgument(format!(
            "generator degree {} does not match circuit arity {}",
            gens.degree(),
            c.arity
        )));
    }
    for g in gens.generators() {
        if extend_to_automorphism(c, g)?.is_none() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// True iff the only automorphism fixing every input gate is the identity.
pub fn is_rigid(c: &Circuit) -> Result<bool> {
    is_rigid_with_cap(c, DEFAULT_SEARCH_CAP)
}

pub fn is_rigid_with_cap(c: &Circuit, cap: usize) -> Result<bool> {
    if c.gates.len() > cap {
        return Err(Error::TooLarge(format!(
            "rigidity search over {} gates exceeds cap {cap}",
            c.gates.len()
        )));
    }
    let idx = CircuitIndex::new(c)?;
    let init = init_colors(&idx, |v| v);
    let Some((color_l, color_r)) = refine(&idx, &init, &init) else {
        return Ok(true);
    };
    let mut solutions = 0usize;
    Matcher::new(&idx, &color_l, &color_r).search(0, &mut |_| {
        solutions += 1;
        solutions < 2
    });
    // the identity is always found, so rigid means exactly one solution
    Ok(solutions == 1)
}

/// Bottom-up canonical merge: gates with identical kind, accepting set and
/// child→multiplicity map collapse to one gate, with parent multiplicities
/// summed and reduced mod m. The result is rigid, computes the same function,
/// has size at most the input size, and stays symmetric under any group the
/// input was symmetric under.
pub fn rigidify(c: &Circuit) -> Result<Circuit> {
    rigidify_with_map(c).map(|(c, _)| c)
}

/// Like [`rigidify`], also returning the old-id → new-id merge map.
pub fn rigidify_with_map(c: &Circuit) -> Result<(Circuit, BTreeMap<GateId, GateId>)> {
    Evaluator::new(c)?;
    let mut pos_of = HashMap::new();
    for (i, g) in c.gates.iter().enumerate() {
        pos_of.insert(g.id, i);
    }
    let mut children_of: Vec<Vec<(usize, u64)>> = vec![Vec::new(); c.gates.len()];
    let mut parents_of: Vec<Vec<usize>> = vec![Vec::new(); c.gates.len()];
    let mut indeg = vec![0usize; c.gates.len()];
    for w in &c.wires {
        let (f, t) = (pos_of[&w.from], pos_of[&w.to]);
        children_of[t].push((f, w.mult));
        parents_of[f].push(t);
        indeg[t] += 1;
    }
    let order = {
        let mut queue: Vec<usize> = (0..c.gates.len()).filter(|&i| indeg[i] == 0).collect();
        let mut remaining = indeg;
        let mut out = Vec::new();
        while let Some(i) = queue.pop() {
            out.push(i);
            for &p in &parents_of[i] {
                remaining[p] -= 1;
                if remaining[p] == 0 {
                    queue.push(p);
                }
            }
        }
        out
    };

    #[derive(PartialEq, Eq, Hash)]
    enum Key {
        Input(usize),
        Mod(Vec<u64>, Vec<(GateId, u64)>),
    }

    let mut canon: HashMap<Key, GateId> = HashMap::new();
    let mut new_id_of: Vec<Option<GateId>> = vec![None; c.gates.len()];
    let mut new_gates: Vec<Gate> = Vec::new();
    let mut new_wires: BTreeMap<(GateId, GateId), u64> = BTreeMap::new();

    // inputs keep the conventional ids 0..n-1 ordered by variable
    let mut inputs: Vec<(usize, usize)> = c
        .gates
        .iter()
        .enumerate()
        .filter_map(|(i, g)| match g.kind {
            GateKind::Input { var } => Some((var, i)),
            _ => None,
        })
        .collect();
    inputs.sort();
    for (var, i) in inputs {
        let id = GateId((var - 1) as u32);
        canon.insert(Key::Input(var), id);
        new_id_of[i] = Some(id);
        new_gates.push(Gate {
            id,
            kind: GateKind::Input { var },
        });
    }
    let mut next_id = c.arity as u32;

    for &i in &order {
        let accept = match &c.gates[i].kind {
            GateKind::Input { .. } => continue,
            GateKind::Mod { accept } => accept,
        };
        let mut agg: BTreeMap<GateId, u64> = BTreeMap::new();
        for &(child, mult) in &children_of[i] {
            let child_id = new_id_of[child].expect("topological order");
            let entry = agg.entry(child_id).or_insert(0);
            *entry = (*entry + mult % c.modulus) % c.modulus;
        }
        let child_vec: Vec<(GateId, u64)> = agg.into_iter().filter(|&(_, m)| m != 0).collect();
        let key = Key::Mod(accept.iter().copied().collect(), child_vec.clone());
        let id = *canon.entry(key).or_insert_with(|| {
            let id = GateId(next_id);
            next_id += 1;
            new_gates.push(Gate {
                id,
                kind: GateKind::Mod {
                    accept: accept.clone(),
                },
            });
            for (child, mult) in child_vec {
                new_wires.insert((child, id), mult);
            }
            id
        });
        new_id_of[i] = Some(id);
    }

    let root = c.root.map(|r| new_id_of[pos_of[&r]].expect("root mapped"));
    let out = Circuit {
        modulus: c.modulus,
        arity: c.arity,
        gates: new_gates,
        wires: new_wires
            .into_iter()
            .map(|((from, to), mult)| Wire { from, to, mult })
            .collect(),
        root,
    };
    let map = c
        .gates
        .iter()
        .enumerate()
        .map(|(i, g)| (g.id, new_id_of[i].expect("all gates mapped")))
        .collect();
    Ok((out, map))
}

/// Orbit of a gate under the unique generator extensions. Requires a rigid
/// circuit so the group action on gates is well defined.
pub fn gate_orbit(c: &Circuit, g: GateId, gens: &GeneratorSet) -> Result<BTreeSet<GateId>> {
    if !is_rigid(c)? {
        return Err(Error::NotRigid);
    }
    let mut maps = Vec::new();
    for pi in gens.generators() {
        match extend_to_automorphism(c, pi)? {
            Some(m) => maps.push(m),
            None => return Err(Error::NotSymmetric),
        }
    }
    let mut seen: BTreeSet<GateId> = [g].into();
    let mut queue = vec![g];
    while let Some(x) = queue.pop() {
        for m in &maps {
            let y = m.apply(x);
            if seen.insert(y) {
                queue.push(y);
            }
        }
    }
    Ok(seen)
}

/// `maxOrb_Γ(C)`: largest gate orbit size. One rigidity check, then orbit
/// closure from the cached generator extensions.
pub fn max_orbit(c: &Circuit, gens: &GeneratorSet) -> Result<usize> {
    if !is_rigid(c)? {
        return Err(Error::NotRigid);
    }
    let mut maps = Vec::new();
    for pi in gens.generators() {
        match extend_to_automorphism(c, pi)? {
            Some(m) => maps.push(m),
            None => return Err(Error::NotSymmetric),
        }
    }
    let mut best = 0;
    let mut seen_global: BTreeSet<GateId> = BTreeSet::new();
    for g in &c.gates {
        if seen_global.contains(&g.id) {
            continue;
        }
        let mut seen: BTreeSet<GateId> = [g.id].into();
        let mut queue = vec![g.id];
        while let Some(x) = queue.pop() {
            for m in &maps {
                let y = m.apply(x);
                if seen.insert(y) {
                    queue.push(y);
                }
            }
        }
        best = best.max(seen.len());
        seen_global.extend(seen);
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SupportMethod {
    GreedyTransposition,
    ExhaustiveSubsets,
}

/// Minimal support of a gate under `Sym_n`. `support: None` means the unique
/// minimal support is undefined (no support smaller than n/2 exists, or the
/// instance exceeds the exhaustive cap).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SupportReport {
    pub gate: GateId,
    pub support: Option<BTreeSet<usize>>,
    pub method: SupportMethod,
}

/// Minimal blockwise support of a gate with respect to one sibling block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BlockSupportReport {
    pub gate: GateId,
    pub block_parent: NodeId,
    pub support: Option<BTreeSet<NodeId>>,
    pub method: SupportMethod,
}

/// Support queries against one rigid circuit, with automorphism extensions
/// cached per permutation. Every stabilizer generating set used by the
/// support tests consists of transpositions or subtree swaps, so one small
/// cache serves all gates of the circuit.
pub struct SupportAnalyzer<'a> {
    c: &'a Circuit,
    cache: RefCell<HashMap<Vec<usize>, Option<Rc<CircuitAutomorphism>>>>,
}

impl<'a> SupportAnalyzer<'a> {
    /// Fails with `NotRigid` when the circuit has a nontrivial input-fixing
    /// automorphism; supports presume a faithful group action on gates.
    pub fn new(c: &'a Circuit) -> Result<Self> {
        if !is_rigid(c)? {
            return Err(Error::NotRigid);
        }
        Ok(SupportAnalyzer {
            c,
            cache: RefCell::new(HashMap::new()),
        })
    }

    pub fn circuit(&self) -> &Circuit {
        self.c
    }

    pub fn extension(&self, pi: &Permutation) -> Result<Option<Rc<CircuitAutomorphism>>> {
        let key = pi.images().to_vec();
        if let Some(hit) = self.cache.borrow().get(&key) {
            return Ok(hit.clone());
        }
        let ext = extend_to_automorphism(self.c, pi)?.map(Rc::new);
        self.cache.borrow_mut().insert(key, ext.clone());
        Ok(ext)
    }

    /// Does every generator of the pointwise stabilizer of `s` extend to an
    /// automorphism fixing `g`?
    pub fn is_support(&self, s: &BTreeSet<usize>, g: GateId) -> Result<bool> {
        let gens = pointwise_stabilizer_generators(self.c.arity, s);
        self.fixes_under_all(gens.generators(), g)
    }

    fn fixes_under_all(&self, gens: &[Permutation], g: GateId) -> Result<bool> {
        for pi in gens {
            match self.extension(pi)? {
                Some(sigma) if sigma.apply(g) == g => {}
                _ => return Ok(false),
            }
        }
        Ok(true)
    }

    /// Greedy descent from `[n]`, falling back to exhaustive enumeration of
    /// small subsets when the terminal set is not provably minimal. Removals
    /// are tried in ascending order for determinism; a terminal set smaller
    /// than n/2 is the unique minimal support because supports below n/2 are
    /// closed under intersection.
    pub fn minimal_support(&self, g: GateId) -> Result<SupportReport> {
        let n = self.c.arity;
        let mut s: BTreeSet<usize> = (1..=n).collect();
        for i in 1..=n {
            let mut cand = s.clone();
            cand.remove(&i);
            if self.is_support(&cand, g)? {
                s = cand;
            }
        }
        if 2 * s.len() < n {
            return Ok(SupportReport {
                gate: g,
                support: Some(s),
                method: SupportMethod::GreedyTransposition,
            });
        }
        if n <= EXHAUSTIVE_SUPPORT_CAP {
            let all: Vec<usize> = (1..=n).collect();
            let mut k = 0;
            while 2 * k < n {
                if let Some(found) =
                    self.first_support_of_size(&all, k, |s| self.is_support(s, g))?
                {
                    return Ok(SupportReport {
                        gate: g,
                        support: Some(found),
                        method: SupportMethod::ExhaustiveSubsets,
                    });
                }
                k += 1;
            }
        }
        Ok(SupportReport {
            gate: g,
            support: None,
            method: SupportMethod::ExhaustiveSubsets,
        })
    }

    /// First (lexicographic) size-`k` subset of `universe` passing `test`.
    fn first_support_of_size<E: Ord + Copy>(
        &self,
        universe: &[E],
        k: usize,
        test: impl Fn(&BTreeSet<E>) -> Result<bool>,
    ) -> Result<Option<BTreeSet<E>>> {
        let n = universe.len();
        if k > n {
            return Ok(None);
        }
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            let subset: BTreeSet<E> = idx.iter().map(|&i| universe[i]).collect();
            if test(&subset)? {
                return Ok(Some(subset));
            }
            if k == 0 {
                return Ok(None);
            }
            // advance to the next combination
            let mut i = k;
            while i > 0 {
                i -= 1;
                if idx[i] != i + n - k {
                    idx[i] += 1;
                    for j in i + 1..k {
                        idx[j] = idx[j - 1] + 1;
                    }
                    break;
                }
                if i == 0 {
                    return Ok(None);
                }
            }
        }
    }

    /// Blockwise support test: the sibling-subtree-swap generators of
    /// `Stab^•_{Sym(B)}(S)` must extend to automorphisms fixing `g`.
    pub fn is_block_support(
        &self,
        t: &BlockTree,
        block: &Block,
        s: &BTreeSet<NodeId>,
        g: GateId,
    ) -> Result<bool> {
        let gens = block_sibling_generators(t, block, s)?;
        self.fixes_under_all(gens.generators(), g)
    }

    /// Greedy-within-block descent with the same exhaustive fallback.
    pub fn blockwise_support(
        &self,
        g: GateId,
        block: &Block,
        t: &BlockTree,
    ) -> Result<BlockSupportReport> {
        if !t.is_block(block) {
            return Err(Error::InvalidBlock(format!(
                "{:?} is not a block of the tree",
                block.members
            )));
        }
        let b = block.members.len();
        let mut s: BTreeSet<NodeId> = block.members.iter().copied().collect();
        for &v in &block.members {
            let mut cand = s.clone();
            cand.remove(&v);
            if self.is_block_support(t, block, &cand, g)? {
                s = cand;
            }
        }
        if 2 * s.len() < b {
            return Ok(BlockSupportReport {
                gate: g,
                block_parent: block.parent,
                support: Some(s),
                method: SupportMethod::GreedyTransposition,
            });
        }
        if b <= EXHAUSTIVE_SUPPORT_CAP {
            let mut k = 0;
            while 2 * k < b {
                if let Some(found) = self.first_support_of_size(&block.members, k, |s| {
                    self.is_block_support(t, block, s, g)
                })? {
                    return Ok(BlockSupportReport {
                        gate: g,
                        block_parent: block.parent,
                        support: Some(found),
                        method: SupportMethod::ExhaustiveSubsets,
                    });
                }
                k += 1;
            }
        }
        Ok(BlockSupportReport {
            gate: g,
            block_parent: block.parent,
            support: None,
            method: SupportMethod::ExhaustiveSubsets,
        })
    }

    /// Supports of every gate.
    pub fn all_supports(&self) -> Result<Vec<SupportReport>> {
        self.c
            .gates
            .iter()
            .map(|g| self.minimal_support(g.id))
            .collect()
    }

    /// `maxSup(C)`: None if some gate's support is undefined.
    pub fn max_support(&self) -> Result<Option<usize>> {
        let mut best = 0;
        for r in self.all_supports()? {
            match r.support {
                Some(s) => best = best.max(s.len()),
                None => return Ok(None),
            }
        }
        Ok(Some(best))
    }

    /// `maxSup_B(C)` for one block.
    pub fn max_block_support(&self, block: &Block, t: &BlockTree) -> Result<Option<usize>> {
        let mut best = 0;
        for g in &self.c.gates {
            match self.blockwise_support(g.id, block, t)?.support {
                Some(s) => best = best.max(s.len()),
                None => return Ok(None),
            }
        }
        Ok(Some(best))
    }
}

/// Convenience wrapper constructing a fresh analyzer; for bulk queries build
/// one [`SupportAnalyzer`] and reuse it.
pub fn minimal_support(c: &Circuit, g: GateId) -> Result<SupportReport> {
    SupportAnalyzer::new(c)?.minimal_support(g)
}

pub fn blockwise_support(
    c: &Circuit,
    g: GateId,
    block: &Block,
    t: &BlockTree,
) -> Result<BlockSupportReport> {
    SupportAnalyzer::new(c)?.blockwise_support(g, block, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{truth_table, CircuitBuilder};
    use crate::groups::sym_generators;

    /// Root over two sibling gates, one per input; symmetric under (1 2).
    fn two_arm_circuit(arm_mults: [u64; 2]) -> Circuit {
        let mut b = CircuitBuilder::new(6, 2);
        let g1 = b.add_mod([3].into());
        let g2 = b.add_mod([3].into());
        b.wire(b.input(1), g1, arm_mults[0]);
        b.wire(b.input(2), g2, arm_mults[1]);
        let root = b.add_mod([0].into());
        b.wire(g1, root, 3);
        b.wire(g2, root, 3);
        b.set_root(root);
        b.finish().unwrap()
    }

    #[test]
    fn extend_identity_is_identity() {
        let c = two_arm_circuit([3, 3]);
        let sigma = extend_to_automorphism(&c, &Permutation::identity(2))
            .unwrap()
            .unwrap();
        assert!(sigma.is_identity());
    }

    #[test]
    fn extend_swap_maps_arms() {
        let c = two_arm_circuit([3, 3]);
        let pi = Permutation::transposition(2, 1, 2);
        let sigma = extend_to_automorphism(&c, &pi).unwrap().unwrap();
        assert_eq!(sigma.apply(GateId(2)), GateId(3));
        assert_eq!(sigma.apply(GateId(3)), GateId(2));
        assert_eq!(sigma.apply(GateId(4)), GateId(4)); // root pinned
    }

    #[test]
    fn unequal_multiplicities_not_symmetric() {
        let mut b = CircuitBuilder::new(6, 2);
        let root = b.add_mod([0].into());
        b.wire(b.input(1), root, 2);
        b.wire(b.input(2), root, 1);
        b.set_root(root);
        let c = b.finish().unwrap();
        let pi = Permutation::transposition(2, 1, 2);
        assert!(extend_to_automorphism(&c, &pi).unwrap().is_none());
        assert!(!is_symmetric(&c, &sym_generators(2)).unwrap());
    }

    #[test]
    fn uniform_gate_is_symmetric() {
        let mut b = CircuitBuilder::new(6, 4);
        let root = b.add_mod([0].into());
        for v in 1..=4 {
            b.wire(b.input(v), root, 2);
        }
        b.set_root(root);
        let c = b.finish().unwrap();
        assert!(is_symmetric(&c, &sym_generators(4)).unwrap());
    }

    fn duplicate_gate_circuit() -> Circuit {
        let mut b = CircuitBuilder::new(6, 1);
        let g1 = b.add_mod([1].into());
        let g2 = b.add_mod([1].into());
        b.wire(b.input(1), g1, 2);
        b.wire(b.input(1), g2, 2);
        let root = b.add_mod([2].into());
        b.wire(g1, root, 1);
        b.wire(g2, root, 1);
        b.set_root(root);
        b.finish().unwrap()
    }

    #[test]
    fn rigidity_cases() {
        assert!(!is_rigid(&duplicate_gate_circuit()).unwrap());
        let mut b = CircuitBuilder::new(6, 2);
        let root = b.add_mod([2].into());
        b.wire(b.input(1), root, 1);
        b.wire(b.input(2), root, 1);
        b.set_root(root);
        assert!(is_rigid(&b.finish().unwrap()).unwrap());
    }

    #[test]
    fn rigidify_merges_duplicates() {
        let c = duplicate_gate_circuit();
        let r = rigidify(&c).unwrap();
        assert!(is_rigid(&r).unwrap());
        assert_eq!(r.gates.len(), c.gates.len() - 1);
        // parent multiplicities summed: 1 + 1 = 2 into the root
        let root = r.root.unwrap();
        let into_root: Vec<u64> = r
            .wires
            .iter()
            .filter(|w| w.to == root)
            .map(|w| w.mult)
            .collect();
        assert_eq!(into_root, vec![2]);
        assert!(r.size() <= c.size());
        assert_eq!(truth_table(&r, 20).unwrap(), truth_table(&c, 20).unwrap());
    }

    #[test]
    fn rigidify_fixpoint_on_rigid_input() {
        let c = two_arm_circuit([3, 3]);
        let r = rigidify(&c).unwrap();
        assert_eq!(r.gates.len(), c.gates.len());
        assert_eq!(r.size(), c.size());
        assert_eq!(truth_table(&r, 20).unwrap(), truth_table(&c, 20).unwrap());
        let rr = rigidify(&r).unwrap();
        assert_eq!(rr, r);
    }

    #[test]
    fn rigidify_preserves_symmetry() {
        // symmetric and non-rigid: two copies of the same uniform gate
        let mut b = CircuitBuilder::new(6, 3);
        let g1 = b.add_mod([0].into());
        let g2 = b.add_mod([0].into());
        for v in 1..=3 {
            b.wire(b.input(v), g1, 1);
            b.wire(b.input(v), g2, 1);
        }
        let root = b.add_mod([2].into());
        b.wire(g1, root, 1);
        b.wire(g2, root, 1);
        b.set_root(root);
        let c = b.finish().unwrap();
        assert!(is_symmetric(&c, &sym_generators(3)).unwrap());
        assert!(!is_rigid(&c).unwrap());
        let r = rigidify(&c).unwrap();
        assert!(is_rigid(&r).unwrap());
        assert!(is_symmetric(&r, &sym_generators(3)).unwrap());
        assert_eq!(truth_table(&r, 20).unwrap(), truth_table(&c, 20).unwrap());
    }

    #[test]
    fn gate_orbit_examples() {
        let c = two_arm_circuit([3, 3]);
        let gens = sym_generators(2);
        assert_eq!(
            gate_orbit(&c, c.root.unwrap(), &gens).unwrap(),
            [c.root.unwrap()].into()
        );
        let inputs = gate_orbit(&c, GateId(0), &gens).unwrap();
        assert_eq!(inputs, [GateId(0), GateId(1)].into());
        assert!(matches!(
            gate_orbit(&duplicate_gate_circuit(), GateId(0), &sym_generators(1)),
            Err(Error::NotRigid)
        ));
    }

    #[test]
    fn minimal_support_examples() {
        // uniform gate over all 5 inputs: empty support
        let mut b = CircuitBuilder::new(6, 5);
        let root = b.add_mod([0].into());
        for v in 1..=5 {
            b.wire(b.input(v), root, 1);
        }
        b.set_root(root);
        let c = b.finish().unwrap();
        let an = SupportAnalyzer::new(&c).unwrap();
        assert_eq!(
            an.minimal_support(root).unwrap().support,
            Some(BTreeSet::new())
        );
        // input gate x_3: support {3}
        assert_eq!(
            an.minimal_support(GateId(2)).unwrap().support,
            Some([3].into())
        );
    }

    #[test]
    fn minimal_support_of_weighted_subset_gate() {
        // one gate per 2-subset of 5 variables: a Sym_5-symmetric layer where
        // each gate is supported exactly on its pair
        let n = 5;
        let mut b = CircuitBuilder::new(6, n);
        let mut layer = Vec::new();
        for i in 1..=n {
            for j in i + 1..=n {
                let g = b.add_mod([1].into());
                b.wire(b.input(i), g, 2);
                b.wire(b.input(j), g, 2);
                layer.push(g);
            }
        }
        let root = b.add_mod([0].into());
        for g in layer {
            b.wire(g, root, 1);
        }
        b.set_root(root);
        let c = b.finish().unwrap();
        assert!(is_symmetric(&c, &sym_generators(n)).unwrap());
        let an = SupportAnalyzer::new(&c).unwrap();
        let first = GateId(n as u32); // reads x_1, x_2
        assert_eq!(
            an.minimal_support(first).unwrap().support,
            Some([1, 2].into())
        );
        assert_eq!(
            an.minimal_support(root).unwrap().support,
            Some(BTreeSet::new())
        );
        assert_eq!(an.max_support().unwrap(), Some(2));
        assert_eq!(max_orbit(&c, &sym_generators(n)).unwrap(), 10);
    }

    #[test]
    fn orbit_size_bounds_support_size() {
        // small orbits force small supports: whenever maxOrb < binom(n,k)
        // for some 1 ≤ k ≤ n/4 on a rigid Sym_n-symmetric circuit with
        // n > 8, every support has size below k
        let mut circuits = Vec::new();
        for n in [9usize, 12] {
            let mut b = CircuitBuilder::new(6, n);
            let root = b.add_mod([0].into());
            for v in 1..=n {
                b.wire(b.input(v), root, 1);
            }
            b.set_root(root);
            circuits.push(b.finish().unwrap());
        }
        {
            // one gate per 2-subset of 12 variables
            let n = 12;
            let mut b = CircuitBuilder::new(6, n);
            let mut layer = Vec::new();
            for i in 1..=n {
                for j in i + 1..=n {
                    let g = b.add_mod([1].into());
                    b.wire(b.input(i), g, 2);
                    b.wire(b.input(j), g, 2);
                    layer.push(g);
                }
            }
            let root = b.add_mod([0].into());
            for g in layer {
                b.wire(g, root, 1);
            }
            b.set_root(root);
            circuits.push(b.finish().unwrap());
        }
        circuits.push(crate::construct::build_and_depth2(6, 10).unwrap());
        for c in &circuits {
            let n = c.arity;
            let gens = sym_generators(n);
            assert!(is_symmetric(c, &gens).unwrap());
            let max_orb = max_orbit(c, &gens).unwrap();
            let an = SupportAnalyzer::new(c).unwrap();
            let max_sup = an.max_support().unwrap().expect("supports defined");
            for k in 1..=(n / 4) as u64 {
                let threshold = crate::numtheory::binomial(n as u64, k);
                if num_bigint::BigUint::from(max_orb) < threshold {
                    assert!(
                        (max_sup as u64) < k,
                        "n={n}: maxOrb {max_orb} < binom(n,{k}) but maxSup = {max_sup}"
                    );
                }
            }
        }
    }

    #[test]
    fn blockwise_support_examples() {
        let t = BlockTree::new(&[3, 2]).unwrap();
        let blocks = t.blocks();
        let leaf_block = &blocks[0];
        // a single uniform gate over all 6 inputs is Aut(T)-symmetric
        let mut b = CircuitBuilder::new(6, 6);
        let root = b.add_mod([0].into());
        for v in 1..=6 {
            b.wire(b.input(v), root, 1);
        }
        b.set_root(root);
        let c = b.finish().unwrap();
        let an = SupportAnalyzer::new(&c).unwrap();
        // x_1's gate: blockwise support in its own leaf block is {leaf 0}
        let rep = an.blockwise_support(GateId(0), leaf_block, &t).unwrap();
        assert_eq!(rep.support, Some([NodeId(0)].into()));
        // the root has empty blockwise support in every block
        for block in &blocks {
            let rep = an.blockwise_support(root, block, &t).unwrap();
            assert_eq!(rep.support, Some(BTreeSet::new()));
        }
        // an input gate outside the block has empty B-support too
        let rep = an.blockwise_support(GateId(5), leaf_block, &t).unwrap();
        assert_eq!(rep.support, Some(BTreeSet::new()));
    }
}
