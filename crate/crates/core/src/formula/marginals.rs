use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;

use super::count::{Local, DEFAULT_ENUMERATION_CAP};
use super::eliminate::{self, DEFAULT_WIDTH_CAP};
use super::Formula;
use crate::error::{Error, Result};
use crate::population::{Kind, PopMeta, Population};

/// Size limits for exact per-component counting.
///
/// Components with at most `enumeration_cap` variables are enumerated.
/// Larger ones are counted by variable elimination when `width_cap` is set
/// and the elimination order's induced width fits under it; otherwise the
/// computation fails with a resource-limit error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CountLimits {
    pub enumeration_cap: usize,
    pub width_cap: Option<usize>,
}

impl Default for CountLimits {
    fn default() -> Self {
        CountLimits {
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            width_cap: Some(DEFAULT_WIDTH_CAP),
        }
    }
}

impl CountLimits {
    pub fn enumeration_only(cap: usize) -> Self {
        CountLimits {
            enumeration_cap: cap,
            width_cap: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Marginals {
    Unsat,
    /// `values[v - 1]` is the probability that variable `v` is true under
    /// the uniform distribution over solutions.
    Sat(Vec<BigRational>),
}

impl Marginals {
    pub fn values(&self) -> Option<&[BigRational]> {
        match self {
            Marginals::Unsat => None,
            Marginals::Sat(v) => Some(v),
        }
    }
}

fn ratio(num: BigUint, den: &BigUint) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den.clone()))
}

/// Marginals of one component, or `None` if it has no solution.
fn component_marginals(local: &Local, limits: CountLimits) -> Result<Option<Vec<BigRational>>> {
    if local.k <= limits.enumeration_cap {
        let (c, t) = local.enumerate();
        if c == 0 {
            return Ok(None);
        }
        let den = BigUint::from(c);
        return Ok(Some(t.into_iter().map(|x| ratio(x.into(), &den)).collect()));
    }
    let Some(width_cap) = limits.width_cap else {
        return Err(Error::ResourceLimit {
            what: "component variables",
            size: local.k,
            limit: limits.enumeration_cap,
        });
    };
    let (order, width) = eliminate::min_degree_order(local);
    if width > width_cap {
        return Err(Error::ResourceLimit {
            what: "component elimination width",
            size: width,
            limit: width_cap,
        });
    }
    let z = eliminate::count(local, &order, None);
    if z.is_zero() {
        return Ok(None);
    }
    let out = (0..local.k)
        .map(|v| ratio(eliminate::count(local, &order, Some((v, true))), &z))
        .collect();
    Ok(Some(out))
}

/// Exact per-variable marginals, computed independently on each connected
/// component of the factor graph. Variables in no clause get exactly 1/2.
pub fn exact_marginals(f: &Formula, limits: CountLimits) -> Result<Marginals> {
    let comps = f.components();
    let per_comp: Vec<Option<Vec<BigRational>>> = comps
        .par_iter()
        .map(|c| {
            let local = Local::from_formula(f, &c.vars, c.clauses.iter().copied());
            component_marginals(&local, limits)
        })
        .collect::<Result<_>>()?;
    let half = BigRational::new(1.into(), 2.into());
    let mut values = vec![half; f.n()];
    for (c, m) in comps.iter().zip(per_comp) {
        let Some(m) = m else {
            return Ok(Marginals::Unsat);
        };
        for (v, q) in c.vars.iter().zip(m) {
            values[*v as usize - 1] = q;
        }
    }
    Ok(Marginals::Sat(values))
}

/// The empirical marginal measure: the `n` exact marginals as an equally
/// weighted sample.
pub fn empirical_marginal_measure(f: &Formula, limits: CountLimits) -> Result<Population> {
    let values = match exact_marginals(f, limits)? {
        Marginals::Unsat => return Err(Error::Unsatisfiable),
        Marginals::Sat(v) => v,
    };
    let samples = values
        .iter()
        .map(|q| q.to_f64().expect("marginal converts to f64"))
        .collect();
    Population::new(
        Kind::Mu,
        samples,
        PopMeta {
            d: f.empirical_density(),
            generation: 0,
            seed: 0,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::super::{count_solutions, Clause, Literal};
    use super::*;

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    #[test]
    fn isolated_variable_is_half() {
        let m = exact_marginals(&Formula::empty(1), CountLimits::default()).unwrap();
        assert_eq!(m, Marginals::Sat(vec![q(1, 2)]));
    }

    #[test]
    fn single_clause_two_thirds() {
        let f = Formula::new(2, vec![Clause::new(Literal::pos(1), Literal::pos(2))]).unwrap();
        let m = exact_marginals(&f, CountLimits::default()).unwrap();
        assert_eq!(m, Marginals::Sat(vec![q(2, 3), q(2, 3)]));
        let pop = empirical_marginal_measure(&f, CountLimits::default()).unwrap();
        assert_eq!(pop.samples(), &[2.0 / 3.0, 2.0 / 3.0]);
    }

    #[test]
    fn disjoint_copies() {
        let f = Formula::new(
            4,
            vec![
                Clause::new(Literal::pos(1), Literal::pos(2)),
                Clause::new(Literal::pos(3), Literal::pos(4)),
            ],
        )
        .unwrap();
        let m = exact_marginals(&f, CountLimits::default()).unwrap();
        assert_eq!(m, Marginals::Sat(vec![q(2, 3); 4]));
    }

    #[test]
    fn empty_population_is_all_halves() {
        let pop = empirical_marginal_measure(&Formula::empty(3), CountLimits::default()).unwrap();
        assert_eq!(pop.samples(), &[0.5, 0.5, 0.5]);
    }

    #[test]
    fn unsat_component_poisons_everything() {
        let mut clauses = super::super::count::tests::contradiction()
            .clauses()
            .to_vec();
        clauses.push(Clause::new(Literal::pos(3), Literal::pos(4)));
        let f = Formula::new(4, clauses).unwrap();
        assert_eq!(
            exact_marginals(&f, CountLimits::default()).unwrap(),
            Marginals::Unsat
        );
        assert!(matches!(
            empirical_marginal_measure(&f, CountLimits::default()),
            Err(Error::Unsatisfiable)
        ));
    }

    #[test]
    fn per_component_equals_whole_formula() {
        for seed in 0..40 {
            let f = Formula::generate(16, 1.0, seed).unwrap();
            let whole = count_solutions(&f, 28).unwrap();
            let m = exact_marginals(&f, CountLimits::default()).unwrap();
            match m {
                Marginals::Unsat => assert!(whole.count.is_zero()),
                Marginals::Sat(v) => {
                    for (x, t) in v.iter().zip(&whole.true_counts) {
                        assert_eq!(*x, ratio(t.clone(), &whole.count));
                    }
                }
            }
        }
    }

    #[test]
    fn large_components_need_elimination() {
        let clauses = (1..40)
            .map(|v| Clause::new(Literal::neg(v), Literal::pos(v + 1)))
            .collect();
        let f = Formula::new(40, clauses).unwrap();
        assert!(matches!(
            exact_marginals(&f, CountLimits::enumeration_only(28)),
            Err(Error::ResourceLimit {
                size: 40,
                limit: 28,
                ..
            })
        ));
        // Implication chain x1 -> x2 -> ... -> x40: solutions are the 41
        // monotone threshold assignments, x_v is true in v of them.
        let Marginals::Sat(v) = exact_marginals(&f, CountLimits::default()).unwrap() else {
            panic!("chain is satisfiable");
        };
        for (k, x) in v.iter().enumerate() {
            assert_eq!(*x, q(k as i64 + 1, 41));
        }
    }

    #[test]
    fn width_cap_is_enforced() {
        // Complete graph on 30 variables has induced width 29.
        let mut clauses = Vec::new();
        for i in 1..=30u32 {
            for j in i + 1..=30 {
                clauses.push(Clause::new(Literal::pos(i), Literal::pos(j)));
            }
        }
        let f = Formula::new(30, clauses).unwrap();
        assert!(matches!(
            exact_marginals(&f, CountLimits::default()),
            Err(Error::ResourceLimit {
                what: "component elimination width",
                size: 29,
                ..
            })
        ));
    }
}
