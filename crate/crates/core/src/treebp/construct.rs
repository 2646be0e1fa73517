use std::collections::HashMap;

use num_integer::Integer;

use super::{ClauseType, TreeFormula};
use crate::error::{invalid, Result};
use crate::Sign;

/// Builds a tree formula whose root marginal is exactly `a / b`.
///
/// After reducing to lowest terms: `1/2` is a single node; `1/b` hangs the
/// `1/(b-1)` tree below a `(-,+)` edge (mapping `m` to `m/(m+1)`); fractions
/// above one half negate the tree for `(b-a)/b`; everything else joins
/// `a/(b-1)` with the negation of `(a-1)/(b-1)`, using `p/(p+q)`.
/// Subtrees are shared, so the representation stays polynomial in `b`.
pub fn construct_rational_tree(a: u64, b: u64) -> Result<TreeFormula> {
    if a == 0 || a >= b {
        return Err(invalid(format!("need 0 < a < b, got {a}/{b}")));
    }
    Ok(Builder::default().build(a, b))
}

#[derive(Default)]
struct Builder {
    memo: HashMap<(u64, u64), TreeFormula>,
    /// Negation memo keyed by node address. Both directions are stored, and
    /// `keep` holds every keyed node so that addresses are never reused.
    neg: HashMap<usize, TreeFormula>,
    keep: Vec<TreeFormula>,
}

impl Builder {
    fn build(&mut self, a: u64, b: u64) -> TreeFormula {
        let g = a.gcd(&b);
        let (a, b) = (a / g, b / g);
        if let Some(t) = self.memo.get(&(a, b)) {
            return t.clone();
        }
        let t = if 2 * a == b {
            TreeFormula::leaf()
        } else if a == 1 {
            let inner = self.build(1, b - 1);
            TreeFormula::new(vec![(ClauseType::new(Sign::Neg, Sign::Pos), inner)])
        } else if 2 * a > b {
            let t = self.build(b - a, b);
            self.negate(&t)
        } else {
            let p = self.build(a, b - 1);
            let r = self.build(a - 1, b - 1);
            let q = self.negate(&r);
            TreeFormula::join(&p, &q)
        };
        self.memo.insert((a, b), t.clone());
        t
    }

    fn negate(&mut self, t: &TreeFormula) -> TreeFormula {
        if let Some(n) = self.neg.get(&t.key()) {
            return n.clone();
        }
        let children = t
            .children()
            .iter()
            .map(|(ct, c)| (ct.negated(), self.negate(c)))
            .collect();
        let n = TreeFormula::with_mark(children, t.is_marked());
        self.neg.insert(t.key(), n.clone());
        self.neg.insert(n.key(), t.clone());
        self.keep.push(t.clone());
        self.keep.push(n.clone());
        n
    }
}
