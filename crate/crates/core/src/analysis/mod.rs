//! Verdicts about sampled marginal distributions: atoms, support, and
//! distances.

mod atoms;
mod mixture;

use crate::distance::{ks_statistic, wasserstein1};
use crate::error::{invalid, Result};
use crate::population::{Kind, Population};

pub use atoms::{best_rational, detect_atoms, Atom, AtomReport, ExactAtoms};
pub use mixture::{
    atom_lower_bounds, mixture_decomposition, ContinuousSummary, LowerBoundRow, MixtureOptions,
    MixtureReport,
};

/// Largest fraction of samples inside any closed interval of length
/// `window`.
pub fn max_cluster_mass(samples: &[f64], window: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let mut best = 0;
    let mut lo = 0;
    for hi in 0..xs.len() {
        while xs[hi] - xs[lo] > window {
            lo += 1;
        }
        best = best.max(hi + 1 - lo);
    }
    best as f64 / xs.len() as f64
}

/// Counts of samples in `bins` equal-width bins over `[lo, hi]`; the last
/// bin is closed. Samples outside the range are ignored.
pub fn histogram(samples: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Vec<usize>> {
    if bins == 0 || hi.is_nan() || lo.is_nan() || hi <= lo {
        return Err(invalid(format!(
            "bad histogram range [{lo}, {hi}] with {bins} bins"
        )));
    }
    let mut counts = vec![0; bins];
    let width = (hi - lo) / bins as f64;
    for &x in samples {
        if x < lo || x > hi {
            continue;
        }
        let b = (((x - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    Ok(counts)
}

/// CSV rows `bin_lo,bin_hi,count` with a header line.
pub fn histogram_csv(counts: &[usize], lo: f64, hi: f64) -> String {
    let width = (hi - lo) / counts.len() as f64;
    let mut s = String::from("bin_lo,bin_hi,count\n");
    for (i, c) in counts.iter().enumerate() {
        s.push_str(&format!(
            "{},{},{}\n",
            lo + i as f64 * width,
            lo + (i + 1) as f64 * width,
            c
        ));
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Coverage {
    pub nonempty: usize,
    pub total: usize,
}

/// Nonempty equal-width bins: over [0, 1] for marginals, over the sample
/// range for log-likelihood ratios.
pub fn support_coverage(p: &Population, bins: usize) -> Result<Coverage> {
    if bins < 2 {
        return Err(invalid(format!("need at least 2 bins, got {bins}")));
    }
    let (lo, hi) = match p.kind() {
        Kind::Mu => (0.0, 1.0),
        Kind::Theta => {
            let s = p.sorted();
            let (lo, hi) = (s[0], s[s.len() - 1]);
            if lo == hi {
                return Ok(Coverage {
                    nonempty: 1,
                    total: bins,
                });
            }
            (lo, hi)
        }
    };
    let counts = histogram(p.samples(), bins, lo, hi)?;
    Ok(Coverage {
        nonempty: counts.iter().filter(|&&c| c > 0).count(),
        total: bins,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Comparison {
    pub w1: f64,
    pub ks: f64,
}

/// W1 (exact, by quantile alignment, any sizes) and the Kolmogorov-Smirnov
/// statistic between two samples.
pub fn compare_distributions(a: &[f64], b: &[f64]) -> Result<Comparison> {
    Ok(Comparison {
        w1: wasserstein1(a, b)?,
        ks: ks_statistic(a, b)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::PopMeta;

    fn mu(xs: Vec<f64>) -> Population {
        Population::new(Kind::Mu, xs, PopMeta::new(1.0, 0)).unwrap()
    }

    #[test]
    fn coverage_examples() {
        assert_eq!(support_coverage(&mu(vec![0.5; 10]), 2).unwrap().nonempty, 1);
        let grid = mu((1..100).map(|i| i as f64 / 100.0).collect());
        assert_eq!(
            support_coverage(&grid, 10).unwrap(),
            Coverage {
                nonempty: 10,
                total: 10
            }
        );
        assert!(support_coverage(&grid, 1).is_err());
        let th = Population::new(Kind::Theta, vec![-1.0, 1.5, 5.0], PopMeta::new(1.0, 0)).unwrap();
        assert_eq!(support_coverage(&th, 5).unwrap().nonempty, 3);
    }

    #[test]
    fn comparison_examples() {
        let a = vec![0.3, 0.6, 0.1];
        assert_eq!(
            compare_distributions(&a, &a).unwrap(),
            Comparison { w1: 0.0, ks: 0.0 }
        );
        let c = compare_distributions(&[0.2; 100], &[0.7; 100]).unwrap();
        assert!((c.w1 - 0.5).abs() < 1e-15);
        assert_eq!(c.ks, 1.0);
    }

    #[test]
    fn cluster_mass() {
        assert_eq!(max_cluster_mass(&[0.1, 0.2, 0.2000001, 0.5], 1e-6), 0.5);
        assert_eq!(max_cluster_mass(&[0.1, 0.2, 0.3, 0.4], 1e-6), 0.25);
        assert_eq!(max_cluster_mass(&[0.1, 0.2, 0.3, 0.4], 0.1 + 1e-9), 0.5);
    }

    #[test]
    fn histogram_edges() {
        let h = histogram(&[0.0, 0.04, 0.5, 1.0, 1.5], 20, 0.0, 1.0).unwrap();
        assert_eq!(h[0], 2);
        assert_eq!(h[10], 1);
        assert_eq!(h[19], 1);
        assert_eq!(h.iter().sum::<usize>(), 4);
        let csv = histogram_csv(&h[..2], 0.0, 0.1);
        assert_eq!(csv, "bin_lo,bin_hi,count\n0,0.05,2\n0.05,0.1,0\n");
    }
}
