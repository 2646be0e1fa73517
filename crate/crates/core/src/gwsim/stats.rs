use rand::Rng;

use super::sample::GwSampler;
use crate::error::{invalid, Result};
use crate::rng::{derive_seed, domain, par_fill_chunked, par_map_streams};
use crate::transform::edge_message;
use crate::treebp::Odds;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IncrementStat {
    pub level: usize,
    /// Mean of `|theta^(level+1) - theta^(level)|` over the samples.
    pub mean: f64,
    pub std_err: f64,
}

/// Samples `n` trees truncated at generation `levels + 1` and, on each tree,
/// measures the change of the root log-likelihood ratio between consecutive
/// truncation levels `0..=levels`.
pub fn coupled_increment_stats(
    d: f64,
    levels: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<IncrementStat>> {
    if levels < 2 || n == 0 {
        return Err(invalid("coupled increments need levels >= 2 and n >= 1"));
    }
    let s = GwSampler::new(d)?;
    let incs = par_map_streams(n, seed, domain::TRUNCATED, |_, rng| {
        let th = s
            .sample_truncated(levels + 1, rng)
            .theta_sequence()
            .expect("sampled at the evaluated depth");
        th.windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .collect::<Vec<f64>>()
    });
    Ok((0..=levels)
        .map(|l| {
            let (sum, sq) = incs
                .iter()
                .fold((0.0, 0.0), |(a, b), v| (a + v[l], b + v[l] * v[l]));
            let nf = n as f64;
            let mean = sum / nf;
            let var = if n > 1 {
                (sq - nf * mean * mean).max(0.0) / (nf - 1.0)
            } else {
                0.0
            };
            IncrementStat {
                level: l,
                mean,
                std_err: (var / nf).sqrt(),
            }
        })
        .collect())
}

/// Exact root odds of `n` extinction-conditioned trees; `None` marks a
/// sample that exceeded the node budget.
pub fn extinct_odds(d: f64, n: usize, seed: u64, budget: usize) -> Result<Vec<Option<Odds>>> {
    let s = GwSampler::new(d)?;
    Ok(par_map_streams(n, seed, domain::EXTINCT, |_, rng| {
        s.sample_extinct(budget, rng).map(|t| t.root_odds())
    }))
}

/// Settings for deep survival-conditioned sampling.
///
/// The top `exact_levels` generations of every sample are drawn exactly.
/// Below them, each surviving subtree is summarised by its root
/// log-likelihood ratio, drawn from a pool of `pool_size` values built
/// generation by generation from the bottom up with the same offspring laws
/// (population dynamics). Dying subtrees are always drawn exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HybridOptions {
    pub exact_levels: usize,
    pub pool_size: usize,
}

impl Default for HybridOptions {
    fn default() -> Self {
        HybridOptions {
            exact_levels: 12,
            pool_size: 100_000,
        }
    }
}

struct Hybrid<'a> {
    s: &'a GwSampler,
    exact: usize,
    /// Ratios of surviving subtrees with `levels - exact` generations left.
    pool: Vec<f64>,
}

impl<'a> Hybrid<'a> {
    fn new(s: &'a GwSampler, levels: usize, seed: u64, opts: HybridOptions) -> Result<Self> {
        let exact = opts.exact_levels.min(levels);
        let deep = levels - exact;
        if deep > 0 && opts.pool_size == 0 {
            return Err(invalid("pool size must be positive"));
        }
        let mut pool = Vec::new();
        if deep > 0 {
            pool = vec![0.0; opts.pool_size];
            for j in 1..=deep {
                let prev = std::mem::take(&mut pool);
                pool = vec![0.0; opts.pool_size];
                par_fill_chunked(
                    &mut pool,
                    derive_seed(seed, j as u64),
                    domain::SURVIVAL_POOL,
                    |rng| pool_step(s, &prev, j, rng),
                );
            }
        }
        Ok(Hybrid { s, exact, pool })
    }

    /// Ratio of a surviving node with `exact_left` exact generations and
    /// `left` generations in total below it.
    fn surviving(&self, rng: &mut impl Rng, exact_left: usize, left: usize) -> f64 {
        if left == 0 {
            return 0.0;
        }
        if exact_left == 0 {
            return self.pool[rng.random_range(0..self.pool.len())];
        }
        let mut types = Vec::new();
        let ks = self.s.surviving_children(rng, &mut types);
        let values: Vec<f64> = (0..types.len())
            .map(|k| {
                if k < ks {
                    self.surviving(rng, exact_left - 1, left - 1)
                } else {
                    dying_theta(self.s, rng, left - 1)
                }
            })
            .collect();
        types
            .iter()
            .zip(&values)
            .map(|(ct, &th)| edge_message(ct.parent, ct.child, th))
            .sum()
    }
}

fn pool_step(s: &GwSampler, prev: &[f64], left: usize, rng: &mut impl Rng) -> f64 {
    let mut types = Vec::new();
    let ks = s.surviving_children(rng, &mut types);
    let values: Vec<f64> = (0..types.len())
        .map(|k| {
            if k < ks {
                prev[rng.random_range(0..prev.len())]
            } else {
                dying_theta(s, rng, left - 1)
            }
        })
        .collect();
    types
        .iter()
        .zip(&values)
        .map(|(ct, &th)| edge_message(ct.parent, ct.child, th))
        .sum()
}

/// Root ratio of an extinction-conditioned subtree truncated `left`
/// generations below its root, drawing randomness in the same order as the
/// tree samplers.
fn dying_theta(s: &GwSampler, rng: &mut impl Rng, left: usize) -> f64 {
    if left == 0 {
        return 0.0;
    }
    let mut types = Vec::new();
    s.dying_children(rng, &mut types);
    let values: Vec<f64> = types
        .iter()
        .map(|_| dying_theta(s, rng, left - 1))
        .collect();
    types
        .iter()
        .zip(&values)
        .map(|(ct, &th)| edge_message(ct.parent, ct.child, th))
        .sum()
}

/// Root log-likelihood ratios of `n` survival-conditioned trees truncated at
/// generation `levels`. With `exact_levels >= levels` every sample equals
/// the root ratio of [`GwSampler::sample_surviving`] on the same stream.
pub fn survival_thetas(
    d: f64,
    levels: usize,
    n: usize,
    seed: u64,
    opts: HybridOptions,
) -> Result<Vec<f64>> {
    let s = GwSampler::new(d)?;
    if d <= 1.0 {
        return Err(invalid(format!(
            "survival has probability zero at d = {d} <= 1"
        )));
    }
    if levels == 0 {
        return Err(invalid("survival-conditioned trees need depth at least 1"));
    }
    let h = Hybrid::new(&s, levels, seed, opts)?;
    Ok(par_map_streams(n, seed, domain::SURVIVING, |_, rng| {
        h.surviving(rng, h.exact, levels)
    }))
}

/// Root log-likelihood ratios of `n` unconditioned trees truncated at
/// generation `levels`.
///
/// When `d <= 1` or `levels <= exact_levels` the trees are sampled whole.
/// Otherwise each sample first decides survival (probability `zeta`) and
/// then uses the survival-conditioned hybrid or an exact dying tree; the
/// mixture has the unconditioned law.
pub fn truncated_thetas(
    d: f64,
    levels: usize,
    n: usize,
    seed: u64,
    opts: HybridOptions,
) -> Result<Vec<f64>> {
    let s = GwSampler::new(d)?;
    if d <= 1.0 || levels <= opts.exact_levels {
        return Ok(par_map_streams(n, seed, domain::TRUNCATED, |_, rng| {
            *s.sample_truncated(levels, rng)
                .theta_sequence()
                .expect("sampled at the evaluated depth")
                .last()
                .expect("nonempty sequence")
        }));
    }
    let h = Hybrid::new(&s, levels, seed, opts)?;
    let zeta = s.extinction().zeta;
    Ok(par_map_streams(n, seed, domain::TRUNCATED, |_, rng| {
        if rng.random_bool(zeta) {
            h.surviving(rng, h.exact, levels)
        } else {
            dying_theta(&s, rng, levels)
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::ks_statistic;
    use crate::rng::stream;

    #[test]
    fn argument_checks() {
        assert!(coupled_increment_stats(1.0, 1, 10, 0).is_err());
        assert!(coupled_increment_stats(1.0, 2, 0, 0).is_err());
        assert!(survival_thetas(0.9, 5, 10, 0, HybridOptions::default()).is_err());
        assert!(survival_thetas(1.5, 0, 10, 0, HybridOptions::default()).is_err());
    }

    #[test]
    fn increments_shape() {
        let st = coupled_increment_stats(1.0, 4, 2000, 3).unwrap();
        assert_eq!(st.len(), 5);
        assert!(st.iter().all(|s| s.mean >= 0.0 && s.std_err >= 0.0));
        // At level 0 only isolated roots contribute nothing.
        assert!(st[0].mean > 0.0);
    }

    #[test]
    fn exact_mode_matches_tree_sampler() {
        let s = GwSampler::new(1.5).unwrap();
        let opts = HybridOptions {
            exact_levels: 6,
            pool_size: 10,
        };
        let th = survival_thetas(1.5, 6, 300, 77, opts).unwrap();
        for (i, x) in th.iter().enumerate() {
            let t = s
                .sample_surviving(6, &mut stream(77, domain::SURVIVING, i as u64))
                .unwrap();
            assert_eq!(*x, *t.theta_sequence().unwrap().last().unwrap());
        }
    }

    #[test]
    fn dying_theta_matches_tree_sampler() {
        let s = GwSampler::new(1.5).unwrap();
        for i in 0..300 {
            let a = dying_theta(&s, &mut stream(5, 0, i), 7);
            let t = s.sample_extinct(usize::MAX, &mut stream(5, 0, i)).unwrap();
            // Nodes at generation 7 would draw counts in the complete sampler.
            if t.height() < 7 {
                assert_eq!(a, *t.theta_sequence_to(7).unwrap().last().unwrap());
            }
        }
    }

    #[test]
    fn hybrid_agrees_with_exact_in_law() {
        let n = 20_000;
        let exact = survival_thetas(
            1.5,
            8,
            n,
            1,
            HybridOptions {
                exact_levels: 8,
                pool_size: 1,
            },
        )
        .unwrap();
        let hybrid = survival_thetas(
            1.5,
            8,
            n,
            2,
            HybridOptions {
                exact_levels: 3,
                pool_size: 20_000,
            },
        )
        .unwrap();
        let ks = ks_statistic(&exact, &hybrid).unwrap();
        // Two-sample KS critical value at level 0.001.
        assert!(ks < 1.95 * (2.0 / n as f64).sqrt(), "ks {ks}");
    }

    #[test]
    fn unconditioned_mixture_agrees_with_exact_in_law() {
        let n = 20_000;
        let opts = HybridOptions {
            exact_levels: 3,
            pool_size: 20_000,
        };
        let exact = truncated_thetas(1.5, 7, n, 1, HybridOptions::default()).unwrap();
        let mixed = truncated_thetas(1.5, 7, n, 2, opts).unwrap();
        let ks = ks_statistic(&exact, &mixed).unwrap();
        assert!(ks < 1.95 * (2.0 / n as f64).sqrt(), "ks {ks}");
    }
}
