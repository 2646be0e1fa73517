use num_bigint::BigUint;

use super::Formula;
use crate::error::{invalid, Error, Result};

/// Default limit on enumerated variables (2^28 assignments).
pub const DEFAULT_ENUMERATION_CAP: usize = 28;
const MAX_ENUMERATION_CAP: usize = 62;

/// Solution count `Z` and, per variable, the number of solutions setting it
/// to true. `true_counts[v - 1]` belongs to variable `v`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolutionStats {
    pub count: BigUint,
    pub true_counts: Vec<BigUint>,
}

/// A sub-problem over local variable indices `0..k`; each clause literal is
/// `(var, wanted value)`.
#[derive(Clone, Debug)]
pub(crate) struct Local {
    pub k: usize,
    pub clauses: Vec<[(usize, bool); 2]>,
}

impl Local {
    /// Restricts `f` to `vars` (sorted) and the clauses at `clause_idx`.
    pub fn from_formula(
        f: &Formula,
        vars: &[u32],
        clause_idx: impl Iterator<Item = usize>,
    ) -> Self {
        let local = |v: u32| {
            vars.binary_search(&v)
                .expect("clause variable outside component")
        };
        let clauses = clause_idx
            .map(|k| {
                let c = f.clauses()[k];
                [
                    (local(c.first.var), c.first.sign.is_pos()),
                    (local(c.second.var), c.second.sign.is_pos()),
                ]
            })
            .collect();
        Local {
            k: vars.len(),
            clauses,
        }
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.k];
        for [(a, _), (b, _)] in &self.clauses {
            adj[*a].push(*b);
            adj[*b].push(*a);
        }
        adj
    }

    /// Breadth-first variable order, so that clauses close early during
    /// enumeration.
    fn bfs_order(&self) -> Vec<usize> {
        let adj = self.adjacency();
        let mut seen = vec![false; self.k];
        let mut order = Vec::with_capacity(self.k);
        for s in 0..self.k {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let start = order.len();
            order.push(s);
            let mut head = start;
            while head < order.len() {
                let u = order[head];
                head += 1;
                for &w in &adj[u] {
                    if !seen[w] {
                        seen[w] = true;
                        order.push(w);
                    }
                }
            }
        }
        order
    }

    /// Exhaustive enumeration with pruning of falsified clauses. Returns the
    /// number of solutions and the per-variable true counts.
    pub fn enumerate(&self) -> (u64, Vec<u64>) {
        let order = self.bfs_order();
        let mut pos_of = vec![0; self.k];
        for (p, &v) in order.iter().enumerate() {
            pos_of[v] = p;
        }
        // Each clause is checked once both of its variables are set, at the
        // position of the later one: (earlier position, wanted earlier, wanted later).
        let mut checks: Vec<Vec<(usize, bool, bool)>> = vec![Vec::new(); self.k];
        for [(a, wa), (b, wb)] in &self.clauses {
            let (pa, pb) = (pos_of[*a], pos_of[*b]);
            if pa < pb {
                checks[pb].push((pa, *wa, *wb));
            } else {
                checks[pa].push((pb, *wb, *wa));
            }
        }
        let mut values = vec![false; self.k];
        let mut true_by_pos = vec![0u64; self.k];
        let total = dfs(0, &mut values, &checks, &mut true_by_pos);
        let mut true_counts = vec![0u64; self.k];
        for (p, &v) in order.iter().enumerate() {
            true_counts[v] = true_by_pos[p];
        }
        (total, true_counts)
    }
}

fn dfs(
    pos: usize,
    values: &mut [bool],
    checks: &[Vec<(usize, bool, bool)>],
    true_by_pos: &mut [u64],
) -> u64 {
    if pos == values.len() {
        return 1;
    }
    let mut total = 0;
    for value in [false, true] {
        values[pos] = value;
        let ok = checks[pos].iter().all(|&(other, want_other, want_self)| {
            values[other] == want_other || value == want_self
        });
        if ok {
            let below = dfs(pos + 1, values, checks, true_by_pos);
            if value {
                true_by_pos[pos] += below;
            }
            total += below;
        }
    }
    total
}

/// Counts all satisfying assignments of `f` by exhaustive enumeration over
/// the variables that occur in clauses. Variables outside all clauses
/// double the count and are true in exactly half of the solutions.
pub fn count_solutions(f: &Formula, cap: usize) -> Result<SolutionStats> {
    if cap > MAX_ENUMERATION_CAP {
        return Err(invalid(format!(
            "enumeration cap {cap} above the supported maximum {MAX_ENUMERATION_CAP}"
        )));
    }
    let vars = f.present_vars();
    if vars.len() > cap {
        return Err(Error::ResourceLimit {
            what: "variables to enumerate",
            size: vars.len(),
            limit: cap,
        });
    }
    let local = Local::from_formula(f, &vars, 0..f.num_clauses());
    let (c, t) = local.enumerate();
    let free = f.n() - vars.len();
    let count = BigUint::from(c) << free;
    let half = if free == 0 {
        BigUint::from(0u32)
    } else {
        BigUint::from(c) << (free - 1)
    };
    let mut true_counts = vec![half; f.n()];
    for (v, tc) in vars.iter().zip(t) {
        true_counts[*v as usize - 1] = BigUint::from(tc) << free;
    }
    Ok(SolutionStats { count, true_counts })
}
