//! 2-SAT formulas: the random ensemble, satisfiability, and exact
//! solution counting used as the ground-truth oracle for the tree and
//! Galton-Watson computations.

mod count;
mod eliminate;
mod io;
mod marginals;
mod sat;

pub use count::{count_solutions, SolutionStats, DEFAULT_ENUMERATION_CAP};
pub use eliminate::DEFAULT_WIDTH_CAP;
pub use marginals::{empirical_marginal_measure, exact_marginals, CountLimits, Marginals};

use petgraph::unionfind::UnionFind;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{invalid, Result};
use crate::rng::{self, domain};
use crate::sign::Sign;

/// A literal over a 1-based variable index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub var: u32,
    pub sign: Sign,
}

impl Literal {
    pub fn new(var: u32, sign: Sign) -> Self {
        Literal { var, sign }
    }

    pub fn pos(var: u32) -> Self {
        Literal::new(var, Sign::Pos)
    }

    pub fn neg(var: u32) -> Self {
        Literal::new(var, Sign::Neg)
    }

    /// Whether the literal holds when its variable takes `value` (true = +1).
    pub fn holds(self, value: bool) -> bool {
        value == self.sign.is_pos()
    }

    pub fn negated(self) -> Self {
        Literal::new(self.var, self.sign.flip())
    }
}

/// A disjunction of two literals over distinct variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Clause {
    pub first: Literal,
    pub second: Literal,
}

impl Clause {
    pub fn new(first: Literal, second: Literal) -> Self {
        Clause { first, second }
    }

    pub fn vars(&self) -> (u32, u32) {
        (self.first.var, self.second.var)
    }
}

/// A 2-SAT formula on variables `1..=n`. Clauses form a multiset; duplicates
/// are kept as drawn.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Formula {
    n: usize,
    clauses: Vec<Clause>,
}

/// A connected component of the factor graph: its variables (sorted) and
/// the indices of its clauses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    pub vars: Vec<u32>,
    pub clauses: Vec<usize>,
}

impl Formula {
    pub fn new(n: usize, clauses: Vec<Clause>) -> Result<Self> {
        for (k, c) in clauses.iter().enumerate() {
            let (i, j) = c.vars();
            if i == j {
                return Err(invalid(format!("clause {k} repeats variable {i}")));
            }
            for v in [i, j] {
                if v == 0 || v as usize > n {
                    return Err(invalid(format!(
                        "clause {k} mentions variable {v} outside 1..={n}"
                    )));
                }
            }
        }
        Ok(Formula { n, clauses })
    }

    pub fn empty(n: usize) -> Self {
        Formula {
            n,
            clauses: Vec::new(),
        }
    }

    /// Draws a formula from the random ensemble: `Po(d n / 2)` clauses, each
    /// uniform among the `4 * C(n, 2)` clauses on two distinct variables.
    pub fn generate(n: usize, d: f64, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("need at least 2 variables, got {n}")));
        }
        if !(d > 0.0 && d.is_finite()) {
            return Err(invalid(format!("density must be positive, got {d}")));
        }
        let mut rng = rng::stream(seed, domain::FORMULA, 0);
        let mean = d * n as f64 / 2.0;
        let m = Poisson::new(mean)
            .map_err(|e| invalid(format!("bad clause mean {mean}: {e}")))?
            .sample(&mut rng) as usize;
        let mut clauses = Vec::with_capacity(m);
        for _ in 0..m {
            let i = rng.random_range(1..=n as u32);
            let mut j = rng.random_range(1..n as u32);
            if j >= i {
                j += 1;
            }
            let (lo, hi) = (i.min(j), i.max(j));
            let s_lo = Sign::from_bool(rng.random());
            let s_hi = Sign::from_bool(rng.random());
            clauses.push(Clause::new(Literal::new(lo, s_lo), Literal::new(hi, s_hi)));
        }
        Ok(Formula { n, clauses })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    /// Variables that appear in at least one clause, sorted.
    pub fn present_vars(&self) -> Vec<u32> {
        let mut seen = vec![false; self.n + 1];
        for c in &self.clauses {
            seen[c.first.var as usize] = true;
            seen[c.second.var as usize] = true;
        }
        (1..=self.n as u32).filter(|&v| seen[v as usize]).collect()
    }

    /// Connected components of the factor graph that contain at least one
    /// clause, ordered by smallest variable. Isolated variables are omitted.
    pub fn components(&self) -> Vec<Component> {
        let mut uf = UnionFind::<usize>::new(self.n + 1);
        for c in &self.clauses {
            uf.union(c.first.var as usize, c.second.var as usize);
        }
        let mut slot = vec![usize::MAX; self.n + 1];
        let mut comps: Vec<Component> = Vec::new();
        for v in self.present_vars() {
            let r = uf.find(v as usize);
            if slot[r] == usize::MAX {
                slot[r] = comps.len();
                comps.push(Component {
                    vars: Vec::new(),
                    clauses: Vec::new(),
                });
            }
            comps[slot[r]].vars.push(v);
        }
        for (k, c) in self.clauses.iter().enumerate() {
            let r = uf.find(c.first.var as usize);
            comps[slot[r]].clauses.push(k);
        }
        comps
    }

    /// Decides satisfiability through the strongly connected components of
    /// the implication graph.
    pub fn is_satisfiable(&self) -> bool {
        sat::satisfiable(self)
    }

    /// Fraction `2m/n`, the realized mean number of clauses per variable.
    pub fn empirical_density(&self) -> f64 {
        2.0 * self.clauses.len() as f64 / self.n as f64
    }
}
