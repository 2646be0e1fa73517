//! Distances between one-dimensional empirical measures.

use crate::error::{invalid, Result};

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Exact W2 between two equal-size empirical measures: the monotone
/// (sorted) pairing is optimal on the line.
pub fn wasserstein2(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(invalid(format!(
            "W2 needs equal sample counts, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(invalid("W2 of empty samples"));
    }
    let (sa, sb) = (sorted(a), sorted(b));
    Ok(w2_sorted(&sa, &sb))
}

pub(crate) fn w2_sorted(sa: &[f64], sb: &[f64]) -> f64 {
    let ss: f64 = sa.iter().zip(sb).map(|(x, y)| (x - y) * (x - y)).sum();
    (ss / sa.len() as f64).sqrt()
}

/// Exact W1 between two empirical measures of arbitrary sizes:
/// the integral over `u` in (0,1) of the gap between the quantile functions.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("W1 of empty samples"));
    }
    let (sa, sb) = (sorted(a), sorted(b));
    Ok(w1_sorted(&sa, &sb))
}

pub(crate) fn w1_sorted(sa: &[f64], sb: &[f64]) -> f64 {
    let (na, nb) = (sa.len(), sb.len());
    if na == nb {
        let s: f64 = sa.iter().zip(sb).map(|(x, y)| (x - y).abs()).sum();
        return s / na as f64;
    }
    // Walk the merged quantile breakpoints i/na and j/nb in integer units of
    // 1/(na*nb).
    let (mut i, mut j) = (0usize, 0usize);
    let (mut ua, mut ub) = (nb, na);
    let mut prev = 0usize;
    let mut acc = 0.0;
    while i < na && j < nb {
        let next = ua.min(ub);
        acc += (next - prev) as f64 * (sa[i] - sb[j]).abs();
        prev = next;
        if ua == next {
            i += 1;
            ua += nb;
        }
        if ub == next {
            j += 1;
            ub += na;
        }
    }
    acc / (na as f64 * nb as f64)
}

/// Kolmogorov-Smirnov statistic: the largest gap between the two empirical
/// CDFs.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("KS of empty samples"));
    }
    let (sa, sb) = (sorted(a), sorted(b));
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut best: f64 = 0.0;
    while i < sa.len() || j < sb.len() {
        let x = match (sa.get(i), sb.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < sa.len() && sa[i] <= x {
            i += 1;
        }
        while j < sb.len() && sb[j] <= x {
            j += 1;
        }
        best = best.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn w2_examples() {
        assert_eq!(wasserstein2(&[0.3, 0.1], &[0.1, 0.3]).unwrap(), 0.0);
        assert_eq!(wasserstein2(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(wasserstein2(&[0.0, 1.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert!(wasserstein2(&[0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn w2_sorted_pairing_beats_every_permutation() {
        let a = [0.3, -1.0, 2.5, 0.0];
        let b = [1.0, 1.1, -0.4, 3.0];
        let w = wasserstein2(&a, &b).unwrap();
        let mut idx = [0, 1, 2, 3];
        let mut best = f64::INFINITY;
        permute(&mut idx, 0, &mut |p| {
            let c: f64 = a
                .iter()
                .enumerate()
                .map(|(i, x)| (x - b[p[i]]).powi(2))
                .sum();
            best = best.min((c / 4.0).sqrt());
        });
        assert!((w - best).abs() < 1e-12);
    }

    fn permute(v: &mut [usize; 4], k: usize, f: &mut impl FnMut(&[usize; 4])) {
        if k == v.len() {
            f(v);
            return;
        }
        for i in k..v.len() {
            v.swap(k, i);
            permute(v, k + 1, f);
            v.swap(k, i);
        }
    }

    #[test]
    fn w1_and_ks_point_masses() {
        let a = vec![0.2; 50];
        let b = vec![0.7; 50];
        assert!((wasserstein1(&a, &b).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(ks_statistic(&a, &b).unwrap(), 1.0);
        assert_eq!(ks_statistic(&a, &a).unwrap(), 0.0);
        assert_eq!(wasserstein1(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn w1_unequal_sizes() {
        // {0, 1} against {0, 0, 1}: quantiles differ on u in (1/2, 2/3).
        let w = wasserstein1(&[0.0, 1.0], &[0.0, 0.0, 1.0]).unwrap();
        assert!((w - 1.0 / 6.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn w1_replication_invariant(xs in prop::collection::vec(-5.0f64..5.0, 1..30),
                                    ys in prop::collection::vec(-5.0f64..5.0, 1..30)) {
            // Replicating every sample k times leaves the measure unchanged.
            let rep = |v: &[f64], k: usize| v.iter().flat_map(|&x| std::iter::repeat_n(x, k)).collect::<Vec<_>>();
            let w = wasserstein1(&xs, &ys).unwrap();
            let w_eq = wasserstein1(&rep(&xs, ys.len()), &rep(&ys, xs.len())).unwrap();
            prop_assert!((w - w_eq).abs() < 1e-9);
        }
    }
}
