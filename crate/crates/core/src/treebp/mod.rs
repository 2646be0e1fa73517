//! Exact belief propagation on rooted tree formulas.
//!
//! A tree formula is a rooted tree of variable nodes; each parent-child edge
//! is a clause `(s·x ∨ s'·y)` where `x` is the parent, `y` the child and
//! `(s, s')` the clause type. Subtrees are reference counted, so a tree may
//! share identical substructure while still being read as an ordinary tree.

mod construct;
mod text;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rand::Rng;

use crate::error::{Error, Result};
use crate::formula::{Clause, Formula, Literal};
use crate::Sign;

pub use construct::construct_rational_tree;

/// Default bound on the number of variable nodes `to_formula` will expand.
pub const DEFAULT_EXPANSION_CAP: usize = 1 << 16;

/// Signs of a clause edge: `parent` for the parent variable and `child` for
/// the child variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClauseType {
    pub parent: Sign,
    pub child: Sign,
}

impl ClauseType {
    pub const ALL: [ClauseType; 4] = [
        ClauseType::new(Sign::Neg, Sign::Neg),
        ClauseType::new(Sign::Neg, Sign::Pos),
        ClauseType::new(Sign::Pos, Sign::Neg),
        ClauseType::new(Sign::Pos, Sign::Pos),
    ];

    pub const fn new(parent: Sign, child: Sign) -> Self {
        ClauseType { parent, child }
    }

    /// Position of this type in [`ClauseType::ALL`].
    pub fn index(self) -> usize {
        2 * self.parent.is_pos() as usize + self.child.is_pos() as usize
    }

    pub fn negated(self) -> Self {
        ClauseType::new(self.parent.flip(), self.child.flip())
    }
}

impl fmt::Display for ClauseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}{}]", self.parent, self.child)
    }
}

#[derive(PartialEq, Eq)]
pub struct TreeNode {
    children: Vec<(ClauseType, TreeFormula)>,
    marked: bool,
}

/// Shared handle to the root of an immutable tree formula.
#[derive(Clone, PartialEq, Eq)]
pub struct TreeFormula(Arc<TreeNode>);

/// Unnormalized root weights: the root marginal is `pos / (pos + neg)`.
/// Stored in lowest terms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Odds {
    pub pos: BigUint,
    pub neg: BigUint,
}

impl Odds {
    pub fn even() -> Self {
        Odds {
            pos: BigUint::one(),
            neg: BigUint::one(),
        }
    }

    fn reduced(pos: BigUint, neg: BigUint) -> Self {
        let g = pos.gcd(&neg);
        if g.is_one() {
            Odds { pos, neg }
        } else {
            Odds {
                pos: pos / &g,
                neg: neg / &g,
            }
        }
    }

    /// Odds of a parent from the odds of its children, one per clause edge.
    pub fn from_children<'a>(edges: impl IntoIterator<Item = (ClauseType, &'a Odds)>) -> Self {
        let mut pos = BigUint::one();
        let mut neg = BigUint::one();
        for (ct, c) in edges {
            // Parent value equal to ct.parent satisfies the clause whatever
            // the child does; otherwise the child must take value ct.child.
            let total = &c.pos + &c.neg;
            let forced = if ct.child.is_pos() { &c.pos } else { &c.neg };
            if ct.parent.is_pos() {
                neg *= forced;
                pos *= total;
            } else {
                pos *= forced;
                neg *= total;
            }
        }
        Odds::reduced(pos, neg)
    }

    pub fn marginal(&self) -> BigRational {
        BigRational::new(self.pos.clone().into(), (&self.pos + &self.neg).into())
    }

    /// `ln(pos / neg)`, accurate for arbitrarily large integers.
    pub fn log_ratio(&self) -> f64 {
        ln_big(&self.pos) - ln_big(&self.neg)
    }
}

pub(crate) fn ln_big(x: &BigUint) -> f64 {
    let shift = x.bits().saturating_sub(64);
    let top = (x >> shift)
        .to_f64()
        .expect("a 64-bit value converts to f64");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

impl TreeFormula {
    pub fn leaf() -> Self {
        TreeFormula::new(Vec::new())
    }

    pub fn new(children: Vec<(ClauseType, TreeFormula)>) -> Self {
        TreeFormula::with_mark(children, false)
    }

    /// A node carrying a boolean mark. Marks are annotations (used for
    /// survival marks of branching-process samples) and never affect
    /// marginals.
    pub fn with_mark(children: Vec<(ClauseType, TreeFormula)>, marked: bool) -> Self {
        TreeFormula(Arc::new(TreeNode { children, marked }))
    }

    pub fn children(&self) -> &[(ClauseType, TreeFormula)] {
        &self.0.children
    }

    pub fn is_marked(&self) -> bool {
        self.0.marked
    }

    fn key(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    /// Distinct shared nodes reachable from the root, each after all of its
    /// children.
    fn unique_postorder(&self) -> Vec<TreeFormula> {
        let mut seen = std::collections::HashSet::new();
        let mut order = Vec::new();
        let mut stack = vec![(self.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if expanded {
                order.push(t);
                continue;
            }
            if !seen.insert(t.key()) {
                continue;
            }
            stack.push((t.clone(), true));
            for (_, c) in t.children() {
                if !seen.contains(&c.key()) {
                    stack.push((c.clone(), false));
                }
            }
        }
        order
    }

    pub fn root_odds(&self) -> Odds {
        let mut memo: HashMap<usize, Odds> = HashMap::new();
        for t in self.unique_postorder() {
            let odds =
                Odds::from_children(t.children().iter().map(|(ct, c)| (*ct, &memo[&c.key()])));
            memo.insert(t.key(), odds);
        }
        memo.remove(&self.key()).expect("root is visited")
    }

    /// Probability that the root is true under the uniform measure on
    /// satisfying assignments.
    pub fn root_marginal(&self) -> BigRational {
        self.root_odds().marginal()
    }

    /// Log-likelihood ratio `ln(μ / (1 - μ))` of the root marginal `μ`.
    pub fn log_likelihood(&self) -> f64 {
        self.root_odds().log_ratio()
    }

    /// Flips both signs of every clause; the root marginal becomes `1 - μ`.
    pub fn negate(&self) -> TreeFormula {
        let mut memo: HashMap<usize, TreeFormula> = HashMap::new();
        for t in self.unique_postorder() {
            let children = t
                .children()
                .iter()
                .map(|(ct, c)| (ct.negated(), memo[&c.key()].clone()))
                .collect();
            memo.insert(t.key(), TreeFormula::with_mark(children, t.is_marked()));
        }
        memo.remove(&self.key()).expect("root is visited")
    }

    /// New root with a `(-,+)` edge to `t1` and a `(+,+)` edge to `t2`.
    /// Its marginal is `p / (p + q)` for child marginals `p` and `q`.
    pub fn join(t1: &TreeFormula, t2: &TreeFormula) -> TreeFormula {
        TreeFormula::new(vec![
            (ClauseType::new(Sign::Neg, Sign::Pos), t1.clone()),
            (ClauseType::new(Sign::Pos, Sign::Pos), t2.clone()),
        ])
    }

    /// Number of variable nodes once shared subtrees are duplicated,
    /// saturating at `u128::MAX`.
    pub fn expanded_size(&self) -> u128 {
        let mut memo: HashMap<usize, u128> = HashMap::new();
        for t in self.unique_postorder() {
            let s = t
                .children()
                .iter()
                .fold(1u128, |acc, (_, c)| acc.saturating_add(memo[&c.key()]));
            memo.insert(t.key(), s);
        }
        memo[&self.key()]
    }

    /// Longest root-to-leaf path, in variable levels.
    pub fn height(&self) -> usize {
        let mut memo: HashMap<usize, usize> = HashMap::new();
        for t in self.unique_postorder() {
            let h = t
                .children()
                .iter()
                .map(|(_, c)| memo[&c.key()] + 1)
                .max()
                .unwrap_or(0);
            memo.insert(t.key(), h);
        }
        memo[&self.key()]
    }

    /// Expands the tree into an explicit formula with the root as variable 1
    /// and the remaining variables numbered in breadth-first order.
    pub fn to_formula(&self, cap: usize) -> Result<Formula> {
        let size = self.expanded_size();
        if size > cap as u128 {
            return Err(Error::ResourceLimit {
                what: "expanded tree nodes",
                size: size.min(usize::MAX as u128) as usize,
                limit: cap,
            });
        }
        let n = size as usize;
        let mut clauses = Vec::with_capacity(n - 1);
        let mut queue = std::collections::VecDeque::from([(self.clone(), 1u32)]);
        let mut next = 2u32;
        while let Some((t, v)) = queue.pop_front() {
            for (ct, c) in t.children() {
                clauses.push(Clause::new(
                    Literal::new(v, ct.parent),
                    Literal::new(next, ct.child),
                ));
                queue.push_back((c.clone(), next));
                next += 1;
            }
        }
        Formula::new(n, clauses)
    }
}

impl fmt::Debug for TreeFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A uniformly random recursive tree on `nodes` variable nodes with
/// independent uniform clause types.
pub fn random_tree(nodes: usize, rng: &mut impl Rng) -> TreeFormula {
    assert!(nodes >= 1, "a tree has at least its root");
    let mut kids: Vec<Vec<(ClauseType, usize)>> = vec![Vec::new(); nodes];
    for i in 1..nodes {
        let p = rng.random_range(0..i);
        let ct = ClauseType::ALL[rng.random_range(0..4)];
        kids[p].push((ct, i));
    }
    let mut built: Vec<Option<TreeFormula>> = vec![None; nodes];
    for i in (0..nodes).rev() {
        let children = kids[i]
            .iter()
            .map(|&(ct, c)| (ct, built[c].take().expect("children have larger indices")))
            .collect();
        built[i] = Some(TreeFormula::new(children));
    }
    built[0].take().expect("root is built")
}
