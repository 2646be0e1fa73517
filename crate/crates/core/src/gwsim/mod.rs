//! The five-type Galton-Watson tree: one variable type and four clause
//! types. Every variable node has an independent Poisson(d/4) number of
//! clause children of each type, and every clause node has exactly one
//! variable child, so a clause is stored as a typed edge between two
//! variable nodes.

mod prob;
mod sample;
mod stats;

use num_rational::BigRational;

use crate::error::{invalid, Result};
use crate::transform::edge_message;
use crate::treebp::{ClauseType, Odds, TreeFormula};

pub use prob::{canonical_form, log_tree_probability, tree_probability};
pub use sample::{GwSampler, DEFAULT_NODE_BUDGET};
pub use stats::{
    coupled_increment_stats, extinct_odds, survival_thetas, truncated_thetas, HybridOptions,
    IncrementStat,
};

/// Extinction probability `eta` of a Poisson(d) branching process and its
/// complement, the survival probability `zeta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtinctionInfo {
    pub d: f64,
    pub eta: f64,
    pub zeta: f64,
}

pub const DEFAULT_EXTINCTION_TOL: f64 = 1e-13;

/// Smallest fixed point of `eta = exp(d (eta - 1))` in (0, 1], by monotone
/// iteration from 0. Exactly 1 for `d <= 1`.
pub fn extinction_probability(d: f64, tol: f64) -> Result<ExtinctionInfo> {
    if !(d > 0.0 && d < 2.0) {
        return Err(invalid(format!("density must lie in (0, 2), got {d}")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    if d <= 1.0 {
        return Ok(ExtinctionInfo {
            d,
            eta: 1.0,
            zeta: 0.0,
        });
    }
    // The iteration increases towards the fixed point with contraction
    // factor about d*eta, so the remaining error is at most
    // step * rate / (1 - rate).
    let mut eta = 0.0f64;
    loop {
        let next = (d * (eta - 1.0)).exp();
        let step = next - eta;
        eta = next;
        let rate = d * eta;
        if rate < 1.0 && step * rate <= tol * (1.0 - rate) {
            break;
        }
    }
    Ok(ExtinctionInfo {
        d,
        eta,
        zeta: 1.0 - eta,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Depth {
    /// Variable nodes exist only up to this generation.
    Truncated(usize),
    /// The whole (finite) tree.
    Complete,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct GwNode {
    edge_start: u32,
    edge_len: u32,
    generation: u32,
    surviving: bool,
}

/// A sampled tree stored as an arena in depth-first pre-order (root at
/// index 0, every child after its parent). The edges of a node are
/// contiguous.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GwTree {
    nodes: Vec<GwNode>,
    edges: Vec<(ClauseType, u32)>,
    depth: Depth,
    marked: bool,
}

/// Incremental pre-order construction shared by the samplers.
pub(crate) struct Builder {
    nodes: Vec<GwNode>,
    edges: Vec<(ClauseType, u32)>,
}

impl Builder {
    pub(crate) fn new() -> Self {
        Builder {
            nodes: Vec::new(),
            edges: Vec::new(),
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Adds a node and links it from the edge slot reserved by its parent.
    pub(crate) fn add_node(
        &mut self,
        slot: Option<usize>,
        generation: usize,
        surviving: bool,
    ) -> usize {
        let id = self.nodes.len();
        self.nodes.push(GwNode {
            edge_start: 0,
            edge_len: 0,
            generation: generation as u32,
            surviving,
        });
        if let Some(s) = slot {
            self.edges[s].1 = id as u32;
        }
        id
    }

    /// Reserves edge slots for all children of `node`; returns the first
    /// slot index.
    pub(crate) fn reserve_edges(
        &mut self,
        node: usize,
        types: impl IntoIterator<Item = ClauseType>,
    ) -> usize {
        let start = self.edges.len();
        self.edges
            .extend(types.into_iter().map(|ct| (ct, u32::MAX)));
        let n = &mut self.nodes[node];
        n.edge_start = start as u32;
        n.edge_len = (self.edges.len() - start) as u32;
        start
    }

    pub(crate) fn finish(self, depth: Depth, marked: bool) -> GwTree {
        GwTree {
            nodes: self.nodes,
            edges: self.edges,
            depth,
            marked,
        }
    }
}

impl GwTree {
    pub fn isolated_root() -> Self {
        let mut b = Builder::new();
        b.add_node(None, 0, false);
        b.finish(Depth::Complete, false)
    }

    pub fn depth(&self) -> Depth {
        self.depth
    }

    pub fn has_marks(&self) -> bool {
        self.marked
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn children(&self, v: usize) -> &[(ClauseType, u32)] {
        let n = &self.nodes[v];
        &self.edges[n.edge_start as usize..(n.edge_start + n.edge_len) as usize]
    }

    pub fn generation(&self, v: usize) -> usize {
        self.nodes[v].generation as usize
    }

    pub fn is_surviving(&self, v: usize) -> bool {
        self.nodes[v].surviving
    }

    pub fn root_child_count(&self) -> usize {
        self.children(0).len()
    }

    pub fn surviving_root_children(&self) -> usize {
        self.children(0)
            .iter()
            .filter(|&&(_, c)| self.is_surviving(c as usize))
            .count()
    }

    /// Largest generation present.
    pub fn height(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| n.generation as usize)
            .max()
            .unwrap_or(0)
    }

    /// Keeps the nodes of generation at most `levels`.
    pub fn truncate(&self, levels: usize) -> GwTree {
        let mut map = vec![u32::MAX; self.nodes.len()];
        let mut b = Builder::new();
        for (v, n) in self.nodes.iter().enumerate() {
            if n.generation as usize > levels {
                continue;
            }
            map[v] = b.nodes.len() as u32;
            b.nodes.push(*n);
        }
        for v in 0..self.nodes.len() {
            if map[v] == u32::MAX {
                continue;
            }
            let new = map[v] as usize;
            if self.nodes[v].generation as usize == levels {
                b.nodes[new].edge_start = b.edges.len() as u32;
                b.nodes[new].edge_len = 0;
                continue;
            }
            let edges: Vec<_> = self
                .children(v)
                .iter()
                .map(|&(ct, c)| (ct, map[c as usize]))
                .collect();
            b.nodes[new].edge_start = b.edges.len() as u32;
            b.nodes[new].edge_len = edges.len() as u32;
            b.edges.extend(edges);
        }
        let depth = match self.depth {
            Depth::Truncated(l) if l <= levels => Depth::Truncated(l),
            _ => Depth::Truncated(levels),
        };
        b.finish(depth, self.marked)
    }

    /// Exact root odds of the whole stored tree.
    pub fn root_odds(&self) -> Odds {
        let mut odds: Vec<Option<Odds>> = vec![None; self.nodes.len()];
        for v in (0..self.nodes.len()).rev() {
            let o = {
                let kids: Vec<(ClauseType, Odds)> = self
                    .children(v)
                    .iter()
                    .map(|&(ct, c)| (ct, odds[c as usize].take().expect("child is computed")))
                    .collect();
                Odds::from_children(kids.iter().map(|(ct, o)| (*ct, o)))
            };
            odds[v] = Some(o);
        }
        odds[0].take().expect("root is computed")
    }

    pub fn root_marginal(&self) -> BigRational {
        self.root_odds().marginal()
    }

    fn check_levels(&self, levels: usize) -> Result<()> {
        match self.depth {
            Depth::Truncated(l) if levels > l => Err(invalid(format!(
                "tree is truncated at generation {l}, cannot evaluate {levels} levels"
            ))),
            _ => Ok(()),
        }
    }

    /// Entry `l` is the exact root marginal of the tree truncated at
    /// generation `l`, for `l = 0..=levels`.
    pub fn marginal_sequence_to(&self, levels: usize) -> Result<Vec<BigRational>> {
        self.check_levels(levels)?;
        let seq = self.level_sequences(levels, Odds::even(), |kids| {
            Odds::from_children(kids.iter().map(|(ct, o)| (*ct, *o)))
        });
        Ok(seq.iter().map(Odds::marginal).collect())
    }

    /// [`GwTree::marginal_sequence_to`] up to the truncation depth.
    pub fn marginal_sequence(&self) -> Result<Vec<BigRational>> {
        match self.depth {
            Depth::Truncated(l) => self.marginal_sequence_to(l),
            Depth::Complete => Err(invalid("marginal sequence needs a truncated tree")),
        }
    }

    /// Floating-point log-likelihood ratios of the truncated root marginals,
    /// for `l = 0..=levels`.
    pub fn theta_sequence_to(&self, levels: usize) -> Result<Vec<f64>> {
        self.check_levels(levels)?;
        Ok(self.level_sequences(levels, 0.0, |kids| {
            kids.iter()
                .map(|(ct, th)| edge_message(ct.parent, ct.child, **th))
                .sum()
        }))
    }

    pub fn theta_sequence(&self) -> Result<Vec<f64>> {
        match self.depth {
            Depth::Truncated(l) => self.theta_sequence_to(l),
            Depth::Complete => Err(invalid("theta sequence needs a truncated tree")),
        }
    }

    /// Root value at every truncation level. A node of generation `g` keeps
    /// values for `levels - g + 1` truncation levels; level 0 is `base`.
    fn level_sequences<T: Clone>(
        &self,
        levels: usize,
        base: T,
        combine: impl Fn(&[(ClauseType, &T)]) -> T,
    ) -> Vec<T> {
        let mut seqs: Vec<Option<Vec<T>>> = vec![None; self.nodes.len()];
        for v in (0..self.nodes.len()).rev() {
            let g = self.generation(v);
            if g > levels {
                continue;
            }
            let kids: Vec<(ClauseType, Vec<T>)> = self
                .children(v)
                .iter()
                .filter_map(|&(ct, c)| seqs[c as usize].take().map(|s| (ct, s)))
                .collect();
            let mut seq = Vec::with_capacity(levels - g + 1);
            seq.push(base.clone());
            for l in 1..=levels - g {
                let args: Vec<(ClauseType, &T)> =
                    kids.iter().map(|(ct, s)| (*ct, &s[l - 1])).collect();
                seq.push(combine(&args));
            }
            seqs[v] = Some(seq);
        }
        seqs[0].take().expect("root is computed")
    }

    /// The same tree as a [`TreeFormula`], keeping survival marks.
    pub fn to_tree_formula(&self) -> TreeFormula {
        let mut built: Vec<Option<TreeFormula>> = vec![None; self.nodes.len()];
        for v in (0..self.nodes.len()).rev() {
            let children = self
                .children(v)
                .iter()
                .map(|&(ct, c)| (ct, built[c as usize].take().expect("child is built")))
                .collect();
            built[v] = Some(TreeFormula::with_mark(children, self.is_surviving(v)));
        }
        built[0].take().expect("root is built")
    }

    /// Expands a tree formula (duplicating shared subtrees) into a complete
    /// tree.
    pub fn from_tree_formula(t: &TreeFormula) -> GwTree {
        let mut b = Builder::new();
        let mut marked = false;
        let mut stack = vec![(t.clone(), None, 0usize)];
        while let Some((node, slot, g)) = stack.pop() {
            marked |= node.is_marked();
            let id = b.add_node(slot, g, node.is_marked());
            let first = b.reserve_edges(id, node.children().iter().map(|(ct, _)| *ct));
            for (k, (_, c)) in node.children().iter().enumerate().rev() {
                stack.push((c.clone(), Some(first + k), g + 1));
            }
        }
        b.finish(Depth::Complete, marked)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::transform::phi;
    use crate::treebp::random_tree;
    use crate::Sign;
    use num_bigint::BigInt;
    use num_traits::{One, ToPrimitive};

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(BigInt::from(a), BigInt::from(b))
    }

    /// Fixed-point oracle: plain iteration run far past convergence.
    fn eta_oracle(d: f64) -> f64 {
        let mut e = 0.0f64;
        for _ in 0..100_000 {
            e = (d * (e - 1.0)).exp();
        }
        e
    }

    #[test]
    fn extinction_values() {
        let tol = 1e-12;
        assert_eq!(extinction_probability(0.5, tol).unwrap().eta, 1.0);
        assert_eq!(extinction_probability(1.0, tol).unwrap().eta, 1.0);
        for (d, approx) in [(1.5, 0.4175), (1.9, 0.233)] {
            let e = extinction_probability(d, tol).unwrap();
            assert!((e.eta - eta_oracle(d)).abs() <= tol, "{d}");
            assert!((e.eta - approx).abs() < 5e-4);
            assert!((e.eta - (d * (e.eta - 1.0)).exp()).abs() <= tol);
            assert_eq!(e.zeta, 1.0 - e.eta);
        }
        assert!(extinction_probability(1.01, tol).unwrap().eta < 1.0);
        assert!(extinction_probability(2.0, tol).is_err());
        assert!(extinction_probability(0.0, tol).is_err());
    }

    fn one_clause(ct: ClauseType) -> GwTree {
        GwTree::from_tree_formula(&TreeFormula::new(vec![(ct, TreeFormula::leaf())]))
    }

    #[test]
    fn isolated_root_sequences() {
        let t = GwTree::isolated_root();
        assert_eq!(t.marginal_sequence_to(5).unwrap(), vec![q(1, 2); 6]);
        assert!(t.marginal_sequence().is_err());
    }

    #[test]
    fn one_clause_sequence() {
        let t = one_clause(ClauseType::new(Sign::Neg, Sign::Pos)).truncate(1);
        assert_eq!(t.depth(), Depth::Truncated(1));
        assert_eq!(t.marginal_sequence().unwrap(), vec![q(1, 2), q(1, 3)]);
        assert!(t.marginal_sequence_to(2).is_err());
    }

    fn sample_trees(k: u64) -> Vec<GwTree> {
        let s = GwSampler::new(1.6).unwrap();
        (0..k)
            .map(|i| s.sample_truncated(5, &mut stream(11, 0, i)))
            .collect()
    }

    #[test]
    fn sequence_entries_match_truncated_bp() {
        for t in sample_trees(40) {
            let seq = t.marginal_sequence().unwrap();
            assert_eq!(seq.len(), 6);
            for (l, m) in seq.iter().enumerate() {
                assert_eq!(*m, t.truncate(l).to_tree_formula().root_marginal());
                assert!(*m > q(0, 1) && *m < q(1, 1));
            }
        }
    }

    #[test]
    fn truncation_consistency() {
        for t in sample_trees(40) {
            let full = t.marginal_sequence().unwrap();
            for l in 0..5 {
                assert_eq!(t.truncate(l).marginal_sequence().unwrap(), full[..=l]);
            }
        }
    }

    #[test]
    fn theta_sequence_matches_exact() {
        for t in sample_trees(40) {
            let exact = t.marginal_sequence().unwrap();
            let th = t.theta_sequence().unwrap();
            for (m, x) in exact.iter().zip(&th) {
                let p = m.to_f64().unwrap();
                assert!((phi(p) - x).abs() < 1e-9 * (1.0 + x.abs()));
            }
        }
    }

    #[test]
    fn children_decomposition_identity() {
        // Root value at level l from the children's level l-1 marginals:
        // prod over s = - of m_i over that product plus the product over
        // s = +, where m_i is the child's probability of taking value s'.
        for t in sample_trees(40) {
            let root = t.marginal_sequence().unwrap();
            let kids: Vec<(ClauseType, Vec<BigRational>)> = t
                .children(0)
                .iter()
                .map(|&(ct, c)| {
                    let sub = subtree(&t, c as usize);
                    (ct, sub.marginal_sequence_to(4).unwrap())
                })
                .collect();
            for l in 1..=5 {
                let mut minus = BigRational::one();
                let mut plus = BigRational::one();
                for (ct, seq) in &kids {
                    let m = &seq[l - 1];
                    let m = if ct.child.is_pos() {
                        m.clone()
                    } else {
                        BigRational::one() - m
                    };
                    if ct.parent.is_pos() {
                        plus *= m;
                    } else {
                        minus *= m;
                    }
                }
                assert_eq!(root[l], &minus / (&minus + &plus));
            }
        }
    }

    fn subtree(t: &GwTree, v: usize) -> GwTree {
        fn build(t: &GwTree, v: usize) -> TreeFormula {
            TreeFormula::new(
                t.children(v)
                    .iter()
                    .map(|&(ct, c)| (ct, build(t, c as usize)))
                    .collect(),
            )
        }
        GwTree::from_tree_formula(&build(t, v))
    }

    #[test]
    fn tree_formula_round_trip() {
        for i in 0..30 {
            let tf = random_tree(1 + i as usize, &mut stream(5, 0, i));
            let g = GwTree::from_tree_formula(&tf);
            assert_eq!(g.num_nodes(), 1 + i as usize);
            assert_eq!(g.to_tree_formula(), tf);
            assert_eq!(g.root_marginal(), tf.root_marginal());
        }
    }

    #[test]
    fn arena_is_preorder() {
        for t in sample_trees(20) {
            for v in 0..t.num_nodes() {
                for &(_, c) in t.children(v) {
                    assert!(c as usize > v);
                    assert_eq!(t.generation(c as usize), t.generation(v) + 1);
                }
            }
        }
    }
}
