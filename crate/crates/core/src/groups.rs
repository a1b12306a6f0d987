//! Permutations on `[n] = {1,…,n}`, generating sets for the symmetric group
//! and for block-tree automorphism groups, pointwise stabilizers, orbit
//! closures, and the symmetric trees whose leaves carry the input variables.

use std::collections::{BTreeSet, HashSet, VecDeque};

use crate::error::{Error, Result};

/// A permutation of `{1,…,n}` stored by its image vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation {
            images: (1..=n).collect(),
        }
    }

    /// Builds from images: `images[i-1] = π(i)`. Validates bijectivity.
    pub fn from_images(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n + 1];
        for &v in &images {
            if v == 0 || v > n || seen[v] {
                return Err(Error::InvalidArgument("not a permutation".into()));
            }
            seen[v] = true;
        }
        Ok(Permutation { images })
    }

    pub fn transposition(n: usize, a: usize, b: usize) -> Self {
        assert!(a >= 1 && a <= n && b >= 1 && b <= n && a != b);
        let mut images: Vec<usize> = (1..=n).collect();
        images.swap(a - 1, b - 1);
        Permutation { images }
    }

    /// The cycle `(1 2 … n)`.
    pub fn full_cycle(n: usize) -> Self {
        let images = (1..=n).map(|i| i % n + 1).collect();
        Permutation { images }
    }

    pub fn degree(&self) -> usize {
        self.images.len()
    }

    pub fn apply(&self, point: usize) -> usize {
        self.images[point - 1]
    }

    pub fn apply_set(&self, s: &BTreeSet<usize>) -> BTreeSet<usize> {
        s.iter().map(|&x| self.apply(x)).collect()
    }

    pub fn inverse(&self) -> Permutation {
        let mut images = vec![0; self.images.len()];
        for (i, &v) in self.images.iter().enumerate() {
            images[v - 1] = i + 1;
        }
        Permutation { images }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        assert_eq!(self.degree(), other.degree());
        let images = (1..=self.degree())
            .map(|i| self.apply(other.apply(i)))
            .collect();
        Permutation { images }
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &v)| v == i + 1)
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GeneratorDescription {
    FullSymmetric,
    TreeAutomorphism(BlockTree),
    PointwiseStabilizer(BTreeSet<usize>),
    Custom,
}

/// A generating set for a permutation group on `[n]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratorSet {
    degree: usize,
    generators: Vec<Permutation>,
    description: GeneratorDescription,
}

impl GeneratorSet {
    pub fn new(
        degree: usize,
        generators: Vec<Permutation>,
        description: GeneratorDescription,
    ) -> Self {
        for g in &generators {
            assert_eq!(g.degree(), degree, "generator degree mismatch");
        }
        GeneratorSet {
            degree,
            generators,
            description,
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn generators(&self) -> &[Permutation] {
        &self.generators
    }

    pub fn description(&self) -> &GeneratorDescription {
        &self.description
    }
}

/// `{(1 2), (1 2 … n)}` for `n ≥ 2`; empty for `n = 1`.
pub fn sym_generators(n: usize) -> GeneratorSet {
    let generators = match n {
        0 | 1 => Vec::new(),
        2 => vec![Permutation::transposition(2, 1, 2)],
        _ => vec![
            Permutation::transposition(n, 1, 2),
            Permutation::full_cycle(n),
        ],
    };
    GeneratorSet::new(n, generators, GeneratorDescription::FullSymmetric)
}

/// Chain of transpositions `(a_1 a_2), (a_2 a_3), …` over `[n] ∖ S` in
/// ascending order; generates the pointwise stabilizer of `S`.
pub fn pointwise_stabilizer_generators(n: usize, fixed: &BTreeSet<usize>) -> GeneratorSet {
    let moving: Vec<usize> = (1..=n).filter(|i| !fixed.contains(i)).collect();
    let generators = moving
        .windows(2)
        .map(|w| Permutation::transposition(n, w[0], w[1]))
        .collect();
    GeneratorSet::new(
        n,
        generators,
        GeneratorDescription::PointwiseStabilizer(fixed.clone()),
    )
}

/// Identifier of a node of a [`BlockTree`]. Leaves are `0..n-1` and carry the
/// variables `x_1..x_n` in order; higher levels follow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A sibling block: all children of one internal node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub parent: NodeId,
    pub members: Vec<NodeId>,
}

/// The symmetric tree of depth `h` with branching `(k_1, …, k_h)`: every node
/// on level `i` has `k_i` children, leaves sit on level 0 and are identified
/// with the variables `x_1, …, x_n` where `n = ∏ k_i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockTree {
    branching: Vec<usize>,
    /// level_start[i] = id of the first node on level i; level h is the root.
    level_start: Vec<usize>,
    level_count: Vec<usize>,
}

impl BlockTree {
    /// `branching` is listed level-1-first, so `branching[0]` is the leaf
    /// block size. Every entry must be ≥ 2.
    pub fn new(branching: &[usize]) -> Result<Self> {
        if branching.is_empty() {
            return Err(Error::InvalidArgument(
                "branching tuple must be nonempty".into(),
            ));
        }
        if branching.iter().any(|&k| k < 2) {
            return Err(Error::InvalidArgument(
                "every branching factor must be ≥ 2".into(),
            ));
        }
        let h = branching.len();
        // level i has ∏_{j>i} k_j nodes
        let mut level_count = vec![0usize; h + 1];
        level_count[h] = 1;
        for i in (0..h).rev() {
            level_count[i] = level_count[i + 1]
                .checked_mul(branching[i])
                .ok_or_else(|| Error::TooLarge("block tree".into()))?;
        }
        let mut level_start = vec![0usize; h + 1];
        for i in 1..=h {
            level_start[i] = level_start[i - 1] + level_count[i - 1];
        }
        Ok(BlockTree {
            branching: branching.to_vec(),
            level_start,
            level_count,
        })
    }

    pub fn branching(&self) -> &[usize] {
        &self.branching
    }

    pub fn height(&self) -> usize {
        self.branching.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.level_count[0]
    }

    pub fn node_count(&self) -> usize {
        self.level_count.iter().sum()
    }

    pub fn level_of(&self, v: NodeId) -> usize {
        (0..=self.height())
            .find(|&i| {
                v.0 >= self.level_start[i] && v.0 < self.level_start[i] + self.level_count[i]
            })
            .expect("node id out of range")
    }

    pub fn level_nodes(&self, level: usize) -> impl Iterator<Item = NodeId> {
        let start = self.level_start[level];
        (start..start + self.level_count[level]).map(NodeId)
    }

    pub fn root(&self) -> NodeId {
        NodeId(self.level_start[self.height()])
    }

    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        let level = self.level_of(v);
        if level == self.height() {
            return None;
        }
        let offset = v.0 - self.level_start[level];
        Some(NodeId(
            self.level_start[level + 1] + offset / self.branching[level],
        ))
    }

    pub fn children(&self, v: NodeId) -> Vec<NodeId> {
        let level = self.level_of(v);
        if level == 0 {
            return Vec::new();
        }
        let k = self.branching[level - 1];
        let offset = v.0 - self.level_start[level];
        let start = self.level_start[level - 1] + offset * k;
        (start..start + k).map(NodeId).collect()
    }

    /// All sibling blocks, one per internal node, level-0 blocks first.
    pub fn blocks(&self) -> Vec<Block> {
        let mut out = Vec::new();
        for level in 1..=self.height() {
            for v in self.level_nodes(level) {
                out.push(Block {
                    parent: v,
                    members: self.children(v),
                });
            }
        }
        out
    }

    pub fn is_block(&self, b: &Block) -> bool {
        self.level_of(b.parent) >= 1 && self.children(b.parent) == b.members
    }

    /// Leaf variables (1-based) of the subtree rooted at `v`. Contiguous by
    /// construction.
    pub fn leaf_vars_under(&self, v: NodeId) -> std::ops::RangeInclusive<usize> {
        let level = self.level_of(v);
        let width: usize = self.branching[..level].iter().product();
        let offset = v.0 - self.level_start[level];
        (offset * width + 1)..=((offset + 1) * width)
    }

    /// `L_0(W)`: all leaf variables with an ancestor in `W`.
    pub fn leaves_under(&self, nodes: &BTreeSet<NodeId>) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for &v in nodes {
            out.extend(self.leaf_vars_under(v));
        }
        out
    }

    /// The leaf permutation swapping the subtrees rooted at two same-level
    /// nodes (pointwise order-preserving on the two leaf ranges).
    pub fn subtree_swap(&self, a: NodeId, b: NodeId) -> Permutation {
        assert_eq!(
            self.level_of(a),
            self.level_of(b),
            "subtree swap requires same level"
        );
        let n = self.leaf_count();
        let ra = self.leaf_vars_under(a);
        let rb = self.leaf_vars_under(b);
        let mut images: Vec<usize> = (1..=n).collect();
        for (x, y) in ra.zip(rb) {
            images[x - 1] = y;
            images[y - 1] = x;
        }
        Permutation { images }
    }

    /// Whether every branching factor exceeds 8, the hypothesis under which
    /// the nested size lower bound applies.
    pub fn meets_bound_hypothesis(&self) -> bool {
        self.branching.iter().all(|&k| k > 8)
    }
}

/// Generators of `Aut(T)` acting on leaves: for every internal node, swaps of
/// adjacent child subtrees.
pub fn tree_aut_generators(t: &BlockTree) -> GeneratorSet {
    let mut generators = Vec::new();
    for level in 1..=t.height() {
        for v in t.level_nodes(level) {
            let ch = t.children(v);
            for pair in ch.windows(2) {
                generators.push(t.subtree_swap(pair[0], pair[1]));
            }
        }
    }
    GeneratorSet::new(
        t.leaf_count(),
        generators,
        GeneratorDescription::TreeAutomorphism(t.clone()),
    )
}

/// Leaf permutations realizing `Stab^•_{Sym(B)}(S)`: swaps of adjacent whole
/// subtrees rooted at the members of `B ∖ S`.
pub fn block_sibling_generators(
    t: &BlockTree,
    block: &Block,
    fixed: &BTreeSet<NodeId>,
) -> Result<GeneratorSet> {
    if !t.is_block(block) {
        return Err(Error::InvalidBlock(format!(
            "{:?} is not a block of the tree",
            block.members
        )));
    }
    if let Some(v) = fixed.iter().find(|v| !block.members.contains(v)) {
        return Err(Error::InvalidBlock(format!(
            "fixed node {v} is not a member of the block"
        )));
    }
    let moving: Vec<NodeId> = block
        .members
        .iter()
        .copied()
        .filter(|v| !fixed.contains(v))
        .collect();
    let generators = moving
        .windows(2)
        .map(|w| t.subtree_swap(w[0], w[1]))
        .collect();
    Ok(GeneratorSet::new(
        t.leaf_count(),
        generators,
        GeneratorDescription::Custom,
    ))
}

/// BFS closure of `{start}` under `action(generator, ·)`, capped.
pub fn orbit<T, F>(start: T, gens: &GeneratorSet, action: F, cap: usize) -> Result<BTreeSet<T>>
where
    T: Ord + Clone,
    F: Fn(&Permutation, &T) -> T,
{
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::new();
    seen.insert(start.clone());
    queue.push_back(start);
    while let Some(x) = queue.pop_front() {
        for g in gens.generators() {
            let y = action(g, &x);
            if seen.insert(y.clone()) {
                if seen.len() > cap {
                    return Err(Error::TooLarge(format!("orbit exceeds cap {cap}")));
                }
                queue.push_back(y);
            }
        }
    }
    Ok(seen)
}

/// Full closure enumeration of the generated group, capped. Used by tests and
/// the orbit-stabilizer checks; the main code paths never enumerate groups.
pub fn group_elements(gens: &GeneratorSet, cap: usize) -> Result<Vec<Permutation>> {
    let id = Permutation::identity(gens.degree());
    let mut seen: HashSet<Permutation> = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(id.clone());
    queue.push_back(id);
    while let Some(p) = queue.pop_front() {
        for g in gens.generators() {
            let q = g.compose(&p);
            if !seen.contains(&q) {
                if seen.len() + 1 > cap {
                    return Err(Error::TooLarge(format!("group order exceeds cap {cap}")));
                }
                seen.insert(q.clone());
                queue.push_back(q);
            }
        }
    }
    let mut out: Vec<Permutation> = seen.into_iter().collect();
    out.sort();
    Ok(out)
}

pub fn group_order(gens: &GeneratorSet, cap: usize) -> Result<u64> {
    Ok(group_elements(gens, cap)?.len() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sym_generators_examples() {
        assert_eq!(sym_generators(1).generators().len(), 0);
        assert_eq!(
            sym_generators(2).generators(),
            &[Permutation::transposition(2, 1, 2)]
        );
        let g3 = sym_generators(3);
        assert_eq!(
            g3.generators(),
            &[
                Permutation::transposition(3, 1, 2),
                Permutation::full_cycle(3)
            ]
        );
        assert_eq!(group_order(&g3, 10_000).unwrap(), 6);
    }

    #[test]
    fn pointwise_stabilizer_examples() {
        let s1: BTreeSet<usize> = [1].into();
        let gens = pointwise_stabilizer_generators(4, &s1);
        assert_eq!(
            gens.generators(),
            &[
                Permutation::transposition(4, 2, 3),
                Permutation::transposition(4, 3, 4)
            ]
        );
        let all: BTreeSet<usize> = [1, 2, 3, 4].into();
        assert!(pointwise_stabilizer_generators(4, &all)
            .generators()
            .is_empty());
        let none: BTreeSet<usize> = BTreeSet::new();
        let g = pointwise_stabilizer_generators(3, &none);
        assert_eq!(
            g.generators(),
            &[
                Permutation::transposition(3, 1, 2),
                Permutation::transposition(3, 2, 3)
            ]
        );
    }

    #[test]
    fn block_tree_structure() {
        let t = BlockTree::new(&[3, 2]).unwrap();
        assert_eq!(t.leaf_count(), 6);
        assert_eq!(t.node_count(), 6 + 2 + 1);
        assert_eq!(t.level_of(NodeId(0)), 0);
        assert_eq!(t.level_of(NodeId(6)), 1);
        assert_eq!(t.root(), NodeId(8));
        assert_eq!(t.children(NodeId(6)), vec![NodeId(0), NodeId(1), NodeId(2)]);
        assert_eq!(t.parent(NodeId(4)), Some(NodeId(7)));
        assert_eq!(t.blocks().len(), 3);
        assert!(!t.meets_bound_hypothesis());
    }

    #[test]
    fn leaves_under_examples() {
        let t = BlockTree::new(&[3, 2]).unwrap();
        let w: BTreeSet<NodeId> = [NodeId(6)].into();
        assert_eq!(t.leaves_under(&w), [1, 2, 3].into());
        let root: BTreeSet<NodeId> = [t.root()].into();
        assert_eq!(t.leaves_under(&root), (1..=6).collect());
        let leaf: BTreeSet<NodeId> = [NodeId(4)].into();
        assert_eq!(t.leaves_under(&leaf), [5].into());
    }

    #[test]
    fn tree_aut_generators_examples() {
        let t1 = BlockTree::new(&[2]).unwrap();
        assert_eq!(
            tree_aut_generators(&t1).generators(),
            &[Permutation::transposition(2, 1, 2)]
        );

        let t = BlockTree::new(&[2, 2]).unwrap();
        let gens = tree_aut_generators(&t);
        let expected_subtree_swap = Permutation::from_images(vec![3, 4, 1, 2]).unwrap(); // (1 3)(2 4)
        assert!(gens
            .generators()
            .contains(&Permutation::transposition(4, 1, 2)));
        assert!(gens
            .generators()
            .contains(&Permutation::transposition(4, 3, 4)));
        assert!(gens.generators().contains(&expected_subtree_swap));
    }

    #[test]
    fn tree_aut_group_orders() {
        // iterated wreath products: (k)-tree has order k!, (k1,k2) has (k1!)^k2 · k2!
        let t = BlockTree::new(&[3, 2]).unwrap();
        assert_eq!(group_order(&tree_aut_generators(&t), 10_000).unwrap(), 72);
        let t22 = BlockTree::new(&[2, 2]).unwrap();
        assert_eq!(group_order(&tree_aut_generators(&t22), 10_000).unwrap(), 8);
        let t4 = BlockTree::new(&[4]).unwrap();
        assert_eq!(group_order(&tree_aut_generators(&t4), 10_000).unwrap(), 24);
    }

    #[test]
    fn tree_aut_generators_preserve_blocks_and_levels() {
        let t = BlockTree::new(&[2, 3]).unwrap();
        let gens = tree_aut_generators(&t);
        for g in gens.generators() {
            // the induced map on leaves sends each leaf block onto a leaf block
            for b in t.blocks() {
                if t.level_of(b.members[0]) != 0 {
                    continue;
                }
                let vars: BTreeSet<usize> = b
                    .members
                    .iter()
                    .flat_map(|&v| t.leaf_vars_under(v))
                    .collect();
                let image = g.apply_set(&vars);
                let is_block = t.blocks().iter().any(|b2| {
                    t.level_of(b2.members[0]) == 0
                        && b2
                            .members
                            .iter()
                            .flat_map(|&v| t.leaf_vars_under(v))
                            .collect::<BTreeSet<usize>>()
                            == image
                });
                assert!(is_block);
            }
        }
    }

    #[test]
    fn block_sibling_generators_examples() {
        let t = BlockTree::new(&[3, 2]).unwrap();
        let leaf_block = Block {
            parent: NodeId(6),
            members: vec![NodeId(0), NodeId(1), NodeId(2)],
        };
        let gens = block_sibling_generators(&t, &leaf_block, &BTreeSet::new()).unwrap();
        assert_eq!(
            gens.generators(),
            &[
                Permutation::transposition(6, 1, 2),
                Permutation::transposition(6, 2, 3)
            ]
        );

        let t22 = BlockTree::new(&[2, 2]).unwrap();
        let level1 = Block {
            parent: NodeId(6),
            members: vec![NodeId(4), NodeId(5)],
        };
        let gens = block_sibling_generators(&t22, &level1, &BTreeSet::new()).unwrap();
        assert_eq!(
            gens.generators(),
            &[Permutation::from_images(vec![3, 4, 1, 2]).unwrap()]
        );

        let all: BTreeSet<NodeId> = leaf_block.members.iter().copied().collect();
        assert!(block_sibling_generators(&t, &leaf_block, &all)
            .unwrap()
            .generators()
            .is_empty());

        let bogus = Block {
            parent: NodeId(0),
            members: vec![NodeId(1)],
        };
        assert!(matches!(
            block_sibling_generators(&t, &bogus, &BTreeSet::new()),
            Err(Error::InvalidBlock(_))
        ));
    }

    #[test]
    fn orbit_examples() {
        let gens = sym_generators(3);
        let pts = orbit(1usize, &gens, |g, &x| g.apply(x), 100).unwrap();
        assert_eq!(pts, [1, 2, 3].into());

        let start: BTreeSet<usize> = [1, 2].into();
        let subsets = orbit(start, &gens, |g, s| g.apply_set(s), 100).unwrap();
        assert_eq!(subsets.len(), 3);
    }

    #[test]
    fn orbit_stabilizer_identity() {
        for gens in [
            sym_generators(4),
            tree_aut_generators(&BlockTree::new(&[2, 2]).unwrap()),
        ] {
            let elements = group_elements(&gens, 10_000).unwrap();
            for a in 1..=gens.degree() {
                let orb = orbit(a, &gens, |g, &x| g.apply(x), 10_000).unwrap();
                let stab = elements.iter().filter(|p| p.apply(a) == a).count();
                assert_eq!(orb.len() * stab, elements.len());
            }
        }
    }

    #[test]
    fn orbit_cap_enforced() {
        let gens = sym_generators(6);
        let start: BTreeSet<usize> = [1, 2, 3].into();
        assert!(matches!(
            orbit(start, &gens, |g, s| g.apply_set(s), 5),
            Err(Error::TooLarge(_))
        ));
    }
}
