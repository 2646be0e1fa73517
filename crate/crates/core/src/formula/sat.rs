use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use super::{Formula, Literal};

fn node(l: Literal) -> NodeIndex {
    NodeIndex::new(2 * (l.var as usize - 1) + usize::from(!l.sign.is_pos()))
}

/// A 2-SAT formula is unsatisfiable iff some variable shares a strongly
/// connected component of the implication graph with its negation.
pub(crate) fn satisfiable(f: &Formula) -> bool {
    let n = f.n();
    let mut g: DiGraph<(), ()> = DiGraph::with_capacity(2 * n, 2 * f.num_clauses());
    for _ in 0..2 * n {
        g.add_node(());
    }
    for c in f.clauses() {
        g.add_edge(node(c.first.negated()), node(c.second), ());
        g.add_edge(node(c.second.negated()), node(c.first), ());
    }
    let mut comp = vec![usize::MAX; 2 * n];
    for (k, scc) in tarjan_scc(&g).into_iter().enumerate() {
        for v in scc {
            comp[v.index()] = k;
        }
    }
    (0..n).all(|v| comp[2 * v] != comp[2 * v + 1])
}

#[cfg(test)]
mod tests {
    use super::super::{count_solutions, Clause, DEFAULT_ENUMERATION_CAP};
    use super::*;

    #[test]
    fn empty_is_satisfiable() {
        assert!(Formula::empty(3).is_satisfiable());
    }

    #[test]
    fn contradiction_is_not() {
        let f = super::super::count::tests::contradiction();
        assert!(!f.is_satisfiable());
    }

    #[test]
    fn unit_chain_contradiction() {
        // x1 -> x2 -> ¬x1 and ¬x1 -> x3 -> x1
        let f = Formula::new(
            3,
            vec![
                Clause::new(Literal::neg(1), Literal::pos(2)),
                Clause::new(Literal::neg(2), Literal::neg(1)),
                Clause::new(Literal::pos(1), Literal::pos(3)),
                Clause::new(Literal::neg(3), Literal::pos(1)),
            ],
        )
        .unwrap();
        assert!(!f.is_satisfiable());
    }

    #[test]
    fn agrees_with_count() {
        let mut unsat = 0;
        for seed in 0..300 {
            let f = Formula::generate(12, 2.6, seed).unwrap();
            let z = count_solutions(&f, DEFAULT_ENUMERATION_CAP).unwrap().count;
            let sat = f.is_satisfiable();
            assert_eq!(sat, z > 0u32.into(), "seed {seed}");
            unsat += usize::from(!sat);
        }
        assert!(
            unsat > 10,
            "test ensemble should contain unsatisfiable formulas"
        );
    }
}
