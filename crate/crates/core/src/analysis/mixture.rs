use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;

use super::atoms::ExactAtoms;
use super::{histogram, max_cluster_mass, support_coverage, Coverage};
use crate::distance::wasserstein1;
use crate::error::Result;
use crate::gwsim::{
    extinct_odds, extinction_probability, survival_thetas, tree_probability, GwTree, HybridOptions,
    DEFAULT_EXTINCTION_TOL, DEFAULT_NODE_BUDGET,
};
use crate::population::{Kind, PopMeta, Population};
use crate::rng::derive_seed;
use crate::transform::{psi_open, psi_rounds_to_boundary};
use crate::treebp::construct_rational_tree;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixtureOptions {
    pub hybrid: HybridOptions,
    pub window: f64,
    pub bins: usize,
    pub node_budget: usize,
    /// Also sample the continuous part two generations deeper and report the
    /// W1 drift between the two depths.
    pub drift: bool,
}

impl Default for MixtureOptions {
    fn default() -> Self {
        MixtureOptions {
            hybrid: HybridOptions::default(),
            window: 1e-6,
            bins: 20,
            node_budget: DEFAULT_NODE_BUDGET,
            drift: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuousSummary {
    pub levels: usize,
    pub histogram: Vec<usize>,
    pub max_cluster_mass: f64,
    pub window: f64,
    pub coverage: Coverage,
    /// W1 between the marginals at depth `levels` and `levels + 2`.
    pub drift_w1: Option<f64>,
    /// Log-likelihood ratios that were not finite.
    pub nonfinite: usize,
    /// Finite ratios whose logistic value rounds to 0 or 1 in double
    /// precision (stored clamped inside the interval).
    pub rounded_to_boundary: usize,
    pub marginals: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixtureReport {
    pub d: f64,
    /// Extinction probability: the weight of the discrete part.
    pub eta: f64,
    /// Exact root marginals of extinction-conditioned trees.
    pub discrete: ExactAtoms,
    /// Survival-conditioned marginals; absent for `d <= 1`.
    pub continuous: Option<ContinuousSummary>,
}

/// Splits the limiting root-marginal law into its part on finite trees
/// (exact rationals, weight `eta`) and its part on infinite trees
/// (depth-`levels` survival-conditioned samples, weight `1 - eta`).
pub fn mixture_decomposition(
    d: f64,
    n_discrete: usize,
    n_continuous: usize,
    levels: usize,
    seed: u64,
    opts: &MixtureOptions,
) -> Result<MixtureReport> {
    let info = extinction_probability(d, DEFAULT_EXTINCTION_TOL)?;
    let discrete = ExactAtoms::from_odds(extinct_odds(
        d,
        n_discrete,
        derive_seed(seed, 1),
        opts.node_budget,
    )?);
    let continuous = if d > 1.0 && n_continuous > 0 {
        let theta = survival_thetas(d, levels, n_continuous, derive_seed(seed, 2), opts.hybrid)?;
        let nonfinite = theta.iter().filter(|t| !t.is_finite()).count();
        let rounded = theta
            .iter()
            .filter(|&&t| t.is_finite() && psi_rounds_to_boundary(t))
            .count();
        let marginals: Vec<f64> = theta.iter().map(|&t| psi_open(t)).collect();
        let drift_w1 = if opts.drift {
            let deeper = survival_thetas(
                d,
                levels + 2,
                n_continuous,
                derive_seed(seed, 3),
                opts.hybrid,
            )?;
            let deeper: Vec<f64> = deeper.iter().map(|&t| psi_open(t)).collect();
            Some(wasserstein1(&marginals, &deeper)?)
        } else {
            None
        };
        let pop = Population::new(Kind::Mu, marginals.clone(), PopMeta::new(d, seed))?;
        Some(ContinuousSummary {
            levels,
            histogram: histogram(&marginals, opts.bins, 0.0, 1.0)?,
            max_cluster_mass: max_cluster_mass(&marginals, opts.window),
            window: opts.window,
            coverage: support_coverage(&pop, opts.bins)?,
            drift_w1,
            nonfinite,
            rounded_to_boundary: rounded,
            marginals,
        })
    } else {
        None
    };
    Ok(MixtureReport {
        d,
        eta: info.eta,
        discrete,
        continuous,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LowerBoundRow {
    pub value: BigRational,
    /// Mass at `value` among extinction-conditioned samples.
    pub mass: f64,
    /// `eta * mass`: the estimated atom of the limiting law at `value`.
    pub eta_mass: f64,
    /// Probability that the unconditioned tree is the constructed tree for
    /// `value`, a lower bound for the atom.
    pub lower_bound: f64,
    pub std_err: f64,
    pub pass: bool,
}

/// Compares the estimated atom at every reduced fraction with denominator
/// at most `max_den` against the probability of its constructed tree, with
/// a three-standard-error allowance.
pub fn atom_lower_bounds(d: f64, atoms: &ExactAtoms, max_den: u64) -> Result<Vec<LowerBoundRow>> {
    let eta = extinction_probability(d, DEFAULT_EXTINCTION_TOL)?.eta;
    let n = atoms.total() as f64;
    let mut rows = Vec::new();
    for b in 2..=max_den {
        for a in 1..b {
            if a.gcd(&b) != 1 {
                continue;
            }
            let value = BigRational::new(BigInt::from(a), BigInt::from(b));
            let shape = GwTree::from_tree_formula(&construct_rational_tree(a, b)?);
            let lower_bound = tree_probability(&shape, d)?;
            let mass = atoms.mass(&value);
            let std_err = eta * (mass * (1.0 - mass) / n).sqrt();
            let eta_mass = eta * mass;
            rows.push(LowerBoundRow {
                value,
                mass,
                eta_mass,
                lower_bound,
                std_err,
                pass: eta_mass >= lower_bound - 3.0 * std_err,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::{One, Zero};

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(BigInt::from(a), BigInt::from(b))
    }

    #[test]
    fn subcritical_has_no_continuous_part() {
        let r =
            mixture_decomposition(0.8, 20_000, 1000, 10, 3, &MixtureOptions::default()).unwrap();
        assert_eq!(r.eta, 1.0);
        assert!(r.continuous.is_none());
        assert_eq!(r.discrete.unresolved(), 0);
        for (v, _) in r.discrete.distinct() {
            assert!(*v > BigRational::zero() && *v < BigRational::one());
        }
        let m = r.discrete.mass(&q(1, 2));
        assert!(m >= (-0.8f64).exp() - 0.01, "{m}");
        let one_clause = 0.2 * (-1.6f64).exp() - 0.005;
        assert!(r.discrete.mass(&q(1, 3)) >= one_clause);
        assert!(r.discrete.mass(&q(2, 3)) >= one_clause);
    }

    #[test]
    fn supercritical_parts() {
        let opts = MixtureOptions {
            hybrid: HybridOptions {
                exact_levels: 6,
                pool_size: 20_000,
            },
            drift: true,
            ..MixtureOptions::default()
        };
        let r = mixture_decomposition(1.5, 10_000, 20_000, 12, 4, &opts).unwrap();
        assert!((r.eta - 0.4175).abs() < 5e-4);
        let c = r.continuous.unwrap();
        assert_eq!(c.marginals.len(), 20_000);
        assert_eq!(c.histogram.iter().sum::<usize>(), 20_000);
        assert_eq!(c.coverage.total, 20);
        assert!(c.max_cluster_mass <= 0.01);
        assert!(c.drift_w1.unwrap() < 0.05);
        assert_eq!(c.nonfinite, 0);
    }

    #[test]
    fn lower_bound_table() {
        let atoms = ExactAtoms::from_odds(extinct_odds(1.0, 50_000, 8, 4096).unwrap());
        let rows = atom_lower_bounds(1.0, &atoms, 6).unwrap();
        assert_eq!(rows.len(), 11);
        assert_eq!(rows[0].value, q(1, 2));
        assert!((rows[0].lower_bound - (-1f64).exp()).abs() < 1e-15);
        for r in &rows {
            assert!(r.pass, "{r:?}");
            assert!(r.lower_bound > 0.0);
        }
    }
}
