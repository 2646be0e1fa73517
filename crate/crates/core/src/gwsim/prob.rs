use std::collections::HashMap;

use super::{Depth, GwTree};
use crate::error::{invalid, Result};

/// Text that identifies the tree up to reordering of children: each node
/// prints its children, tagged with clause type, in sorted order.
pub fn canonical_form(t: &GwTree) -> String {
    let mut forms: Vec<Option<String>> = vec![None; t.num_nodes()];
    for v in (0..t.num_nodes()).rev() {
        let mut kids: Vec<String> = t
            .children(v)
            .iter()
            .map(|&(ct, c)| {
                format!(
                    "{ct}{}",
                    forms[c as usize].take().expect("child is computed")
                )
            })
            .collect();
        kids.sort_unstable();
        forms[v] = Some(format!("({})", kids.concat()));
    }
    forms[0].take().expect("root is computed")
}

/// Natural log of the probability that the unconditioned tree at density
/// `d` equals `t` as an unordered rooted tree with typed edges.
///
/// With `lambda = d/4`, a node with `c_k` children of type `k` contributes
/// `prod_k pois(c_k; lambda) · c_k! / prod_j m_{k,j}!`, where `m_{k,j}`
/// counts children of type `k` in the same isomorphism class. Over the whole
/// tree this is `lambda^edges · e^{-d·nodes} / prod m!`.
pub fn log_tree_probability(t: &GwTree, d: f64) -> Result<f64> {
    if t.depth() != Depth::Complete {
        return Err(invalid("tree probability needs a complete tree"));
    }
    if d.is_nan() || d <= 0.0 {
        return Err(invalid(format!("density must be positive, got {d}")));
    }
    let lambda = d / 4.0;
    let mut classes: HashMap<Vec<(usize, u32)>, u32> = HashMap::new();
    let mut class = vec![0u32; t.num_nodes()];
    let mut log_p = 0.0;
    for v in (0..t.num_nodes()).rev() {
        let mut key: Vec<(usize, u32)> = t
            .children(v)
            .iter()
            .map(|&(ct, c)| (ct.index(), class[c as usize]))
            .collect();
        key.sort_unstable();
        log_p += key.len() as f64 * lambda.ln() - d;
        for run in key.chunk_by(|a, b| a == b) {
            log_p -= ln_factorial(run.len());
        }
        let next = classes.len() as u32;
        class[v] = *classes.entry(key).or_insert(next);
    }
    Ok(log_p)
}

pub fn tree_probability(t: &GwTree, d: f64) -> Result<f64> {
    log_tree_probability(t, d).map(f64::exp)
}

fn ln_factorial(m: usize) -> f64 {
    (2..=m).map(|k| (k as f64).ln()).sum()
}

#[cfg(test)]
mod tests {
    use super::super::GwSampler;
    use super::*;
    use crate::rng::stream;
    use crate::treebp::{construct_rational_tree, ClauseType, TreeFormula};
    use crate::Sign;

    fn gw(s: &str) -> GwTree {
        GwTree::from_tree_formula(&s.parse::<TreeFormula>().unwrap())
    }

    #[test]
    fn isolated_root() {
        let p = tree_probability(&GwTree::isolated_root(), 0.8).unwrap();
        assert!((p - (-0.8f64).exp()).abs() < 1e-15);
        assert!((p - 0.4493).abs() < 1e-4);
    }

    #[test]
    fn one_clause() {
        let p = tree_probability(&gw("(v [-+](v))"), 1.0).unwrap();
        assert!((p - 0.25 * (-2f64).exp()).abs() < 1e-15);
        assert!((p - 0.03383).abs() < 1e-5);
    }

    #[test]
    fn rejects_truncated() {
        assert!(tree_probability(&GwTree::isolated_root().truncate(3), 1.0).is_err());
    }

    #[test]
    fn canonical_form_ignores_child_order() {
        let a = gw("(v [++](v [--](v)) [-+](v) [++](v))");
        let b = gw("(v [++](v) [-+](v) [++](v [--](v)))");
        assert_eq!(canonical_form(&a), canonical_form(&b));
        assert_ne!(
            canonical_form(&a),
            canonical_form(&gw("(v [++](v) [-+](v) [+-](v [--](v)))"))
        );
    }

    #[test]
    fn multiplicity_correction() {
        // Two identical (+,+) leaves: pois(2; l) · 2!/2! = l^2 e^{-l} / 2.
        let d: f64 = 1.2;
        let l = d / 4.0;
        let p = tree_probability(&gw("(v [++](v) [++](v))"), d).unwrap();
        assert!((p - l * l / 2.0 * (-3.0 * d).exp()).abs() < 1e-15);
    }

    fn frequency(shape: &GwTree, d: f64, n: u64, seed: u64) -> f64 {
        let s = GwSampler::new(d).unwrap();
        let target = canonical_form(shape);
        let h = shape.height();
        let hits = (0..n)
            .filter(|&i| {
                canonical_form(&s.sample_truncated(h + 1, &mut stream(seed, 2, i))) == target
            })
            .count();
        hits as f64 / n as f64
    }

    fn assert_within_3se(shape: &GwTree, d: f64, n: u64) {
        let p = tree_probability(shape, d).unwrap();
        let f = frequency(shape, d, n, 1234);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!(
            (f - p).abs() <= 3.0 * se,
            "frequency {f}, probability {p}, se {se}"
        );
    }

    #[test]
    fn monte_carlo_one_clause() {
        assert_within_3se(&gw("(v [-+](v))"), 1.0, 1_000_000);
    }

    #[test]
    fn monte_carlo_various_shapes() {
        let shapes = [
            gw("(v [++](v) [++](v))"),
            gw("(v [-+](v [+-](v)) [--](v))"),
            GwTree::from_tree_formula(&construct_rational_tree(2, 5).unwrap()),
            GwTree::from_tree_formula(&TreeFormula::new(vec![(
                ClauseType::new(Sign::Pos, Sign::Neg),
                TreeFormula::leaf(),
            )])),
        ];
        for s in &shapes {
            assert_within_3se(s, 1.5, 400_000);
        }
    }
}
