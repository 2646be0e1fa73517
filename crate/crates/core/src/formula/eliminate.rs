//! Exact model counting by variable elimination over big-integer tables.
//!
//! Used for components too large to enumerate. The cost is exponential only
//! in the induced width of the greedy min-degree order, which stays tiny for
//! the sparse, nearly acyclic components of subcritical formulas.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use super::count::Local;

/// Default limit on the induced width of the elimination order.
pub const DEFAULT_WIDTH_CAP: usize = 16;

struct Factor {
    vars: Vec<usize>,
    table: Vec<BigUint>,
}

impl Factor {
    fn clause(a: (usize, bool), b: (usize, bool)) -> Self {
        let (lo, hi) = if a.0 < b.0 { (a, b) } else { (b, a) };
        let table = (0..4u32)
            .map(|idx| {
                let lo_val = idx & 1 == 1;
                let hi_val = idx & 2 == 2;
                if lo_val == lo.1 || hi_val == hi.1 {
                    BigUint::one()
                } else {
                    BigUint::zero()
                }
            })
            .collect();
        Factor {
            vars: vec![lo.0, hi.0],
            table,
        }
    }

    fn pin(var: usize, value: bool) -> Self {
        let (f, t) = if value { (0u32, 1u32) } else { (1, 0) };
        Factor {
            vars: vec![var],
            table: vec![BigUint::from(f), BigUint::from(t)],
        }
    }
}

/// Greedy min-degree elimination order and its induced width (the largest
/// neighbourhood of a variable at the time it is eliminated).
pub(crate) fn min_degree_order(p: &Local) -> (Vec<usize>, usize) {
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); p.k];
    for [(a, _), (b, _)] in &p.clauses {
        adj[*a].insert(*b);
        adj[*b].insert(*a);
    }
    let mut alive = vec![true; p.k];
    let mut order = Vec::with_capacity(p.k);
    let mut width = 0;
    for _ in 0..p.k {
        let v = (0..p.k)
            .filter(|&v| alive[v])
            .min_by_key(|&v| (adj[v].len(), v))
            .expect("variables remain");
        let nbrs: Vec<usize> = adj[v].iter().copied().collect();
        width = width.max(nbrs.len());
        for &a in &nbrs {
            adj[a].remove(&v);
            for &b in &nbrs {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
        adj[v].clear();
        alive[v] = false;
        order.push(v);
    }
    (order, width)
}

/// Number of solutions of `p`, optionally with one variable pinned.
pub(crate) fn count(p: &Local, order: &[usize], pin: Option<(usize, bool)>) -> BigUint {
    let mut pool: Vec<Factor> = p
        .clauses
        .iter()
        .map(|[a, b]| Factor::clause(*a, *b))
        .collect();
    if let Some((v, val)) = pin {
        pool.push(Factor::pin(v, val));
    }
    let mut scalar = BigUint::one();
    for &v in order {
        let (mine, rest): (Vec<Factor>, Vec<Factor>) =
            pool.into_iter().partition(|f| f.vars.contains(&v));
        pool = rest;
        let mut scope: Vec<usize> = mine.iter().flat_map(|f| f.vars.iter().copied()).collect();
        scope.push(v);
        scope.sort_unstable();
        scope.dedup();
        let proj: Vec<Vec<usize>> = mine
            .iter()
            .map(|f| {
                f.vars
                    .iter()
                    .map(|x| scope.binary_search(x).unwrap())
                    .collect()
            })
            .collect();
        let vpos = scope.binary_search(&v).unwrap();
        let new_vars: Vec<usize> = scope.iter().copied().filter(|&x| x != v).collect();
        let mut table = vec![BigUint::zero(); 1 << new_vars.len()];
        for idx in 0usize..(1 << scope.len()) {
            let mut prod = BigUint::one();
            for (f, pos) in mine.iter().zip(&proj) {
                let mut fi = 0;
                for (bit, &sp) in pos.iter().enumerate() {
                    fi |= ((idx >> sp) & 1) << bit;
                }
                let entry = &f.table[fi];
                if entry.is_zero() {
                    prod = BigUint::zero();
                    break;
                }
                if !entry.is_one() {
                    prod *= entry;
                }
            }
            if prod.is_zero() {
                continue;
            }
            let low = idx & ((1 << vpos) - 1);
            let high = idx >> (vpos + 1);
            table[low | (high << vpos)] += prod;
        }
        if new_vars.is_empty() {
            scalar *= &table[0];
        } else {
            pool.push(Factor {
                vars: new_vars,
                table,
            });
        }
    }
    debug_assert!(pool.is_empty());
    scalar
}
