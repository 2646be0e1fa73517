use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;

use crate::error::{invalid, Result};
use crate::treebp::Odds;

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub value: BigRational,
    pub mass: f64,
    /// Spread of the samples assigned to the atom (0 for exact inputs).
    pub width: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AtomReport {
    pub atoms: Vec<Atom>,
    pub residual_mass: f64,
    pub residual_count: usize,
    pub total: usize,
    pub window: f64,
    pub max_den: u64,
    pub min_count: usize,
}

/// Exact value counts of a sample of rational marginals. Samples that could
/// not be resolved (for example, trees over a size budget) are kept as a
/// separate count and belong to no value.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExactAtoms {
    counts: BTreeMap<BigRational, usize>,
    total: usize,
    unresolved: usize,
}

impl ExactAtoms {
    pub fn from_values(values: impl IntoIterator<Item = Option<BigRational>>) -> Self {
        let mut a = ExactAtoms::default();
        for v in values {
            a.total += 1;
            match v {
                Some(q) => *a.counts.entry(q).or_default() += 1,
                None => a.unresolved += 1,
            }
        }
        a
    }

    pub fn from_odds(odds: impl IntoIterator<Item = Option<Odds>>) -> Self {
        ExactAtoms::from_values(odds.into_iter().map(|o| o.map(|o| o.marginal())))
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn unresolved(&self) -> usize {
        self.unresolved
    }

    pub fn count(&self, q: &BigRational) -> usize {
        self.counts.get(q).copied().unwrap_or(0)
    }

    /// Fraction of all samples (resolved or not) equal to `q`.
    pub fn mass(&self, q: &BigRational) -> f64 {
        self.count(q) as f64 / self.total as f64
    }

    pub fn distinct(&self) -> impl Iterator<Item = (&BigRational, usize)> {
        self.counts.iter().map(|(q, &c)| (q, c))
    }

    /// Resolved samples as doubles, in increasing order.
    pub fn sorted_f64(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total - self.unresolved);
        for (q, &c) in &self.counts {
            let x = q.to_f64().expect("marginals are in (0, 1)");
            out.extend(std::iter::repeat_n(x, c));
        }
        out
    }

    /// Values seen at least `min_count` times become atoms with their exact
    /// proportions; all other samples form the residual.
    pub fn report(&self, min_count: usize) -> AtomReport {
        let mut atoms = Vec::new();
        let mut residual = self.unresolved;
        for (q, &c) in &self.counts {
            if c >= min_count.max(1) {
                atoms.push(Atom {
                    value: q.clone(),
                    mass: c as f64 / self.total as f64,
                    width: 0.0,
                    count: c,
                });
            } else {
                residual += c;
            }
        }
        AtomReport {
            atoms,
            residual_mass: residual as f64 / self.total as f64,
            residual_count: residual,
            total: self.total,
            window: 0.0,
            max_den: 0,
            min_count,
        }
    }
}

/// Closest fraction `p/q` to `x` in `[0, 1]` with `1 <= q <= max_den`, by
/// continued fractions: the answer is the last convergent within the bound
/// or the best semiconvergent after it. Ties go to the smaller denominator.
pub fn best_rational(x: f64, max_den: u64) -> Result<(u64, u64)> {
    if !(0.0..=1.0).contains(&x) {
        return Err(invalid(format!("value {x} is outside [0, 1]")));
    }
    if max_den == 0 {
        return Err(invalid("max_den must be positive"));
    }
    let (mut p0, mut q0, mut p1, mut q1) = (0u64, 1u64, 1u64, 0u64);
    let mut r = x;
    loop {
        let a = r.floor();
        if a >= 1e15 {
            return Ok((p1, q1));
        }
        let a = a as u64;
        let q2 = a * q1 + q0;
        if q2 > max_den {
            let t = (max_den - q0) / q1;
            let (ps, qs) = (t * p1 + p0, t * q1 + q0);
            let e1 = (x - p1 as f64 / q1 as f64).abs();
            let es = (x - ps as f64 / qs as f64).abs();
            return Ok(if es < e1 { (ps, qs) } else { (p1, q1) });
        }
        let p2 = a * p1 + p0;
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = r - a as f64;
        if frac <= f64::EPSILON * r.max(1.0) {
            return Ok((p1, q1));
        }
        r = 1.0 / frac;
    }
}

/// Atom detection for real-valued samples in [0, 1].
///
/// Sorted samples are grouped greedily: a cluster starts at its smallest
/// sample and takes every sample at most `window` above it. A cluster with
/// at least `min_count` samples whose mean lies within `window` of a fraction
/// with denominator at most `max_den` contributes to the atom at that
/// fraction; every other sample is residual.
pub fn detect_atoms(
    samples: &[f64],
    window: f64,
    max_den: u64,
    min_count: usize,
) -> Result<AtomReport> {
    if window.is_nan() || window <= 0.0 {
        return Err(invalid(format!("window must be positive, got {window}")));
    }
    if max_den < 2 {
        return Err(invalid(format!(
            "max_den must be at least 2, got {max_den}"
        )));
    }
    if samples.is_empty() {
        return Err(invalid("atom detection needs samples"));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    if xs[0] < 0.0 || xs[xs.len() - 1] > 1.0 {
        return Err(invalid("samples must lie in [0, 1]"));
    }
    let total = xs.len();
    let mut found: BTreeMap<(u64, u64), (usize, f64, f64)> = BTreeMap::new();
    let mut residual = 0;
    let mut i = 0;
    while i < total {
        let j = i + xs[i..].partition_point(|&x| x <= xs[i] + window);
        let count = j - i;
        let center = xs[i..j].iter().sum::<f64>() / count as f64;
        let (p, q) = best_rational(center, max_den)?;
        if count >= min_count.max(1) && (center - p as f64 / q as f64).abs() <= window {
            let e = found.entry((p, q)).or_insert((0, xs[i], xs[j - 1]));
            e.0 += count;
            e.1 = e.1.min(xs[i]);
            e.2 = e.2.max(xs[j - 1]);
        } else {
            residual += count;
        }
        i = j;
    }
    let mut atoms: Vec<Atom> = found
        .into_iter()
        .map(|((p, q), (count, lo, hi))| Atom {
            value: BigRational::new(BigInt::from(p), BigInt::from(q)),
            mass: count as f64 / total as f64,
            width: hi - lo,
            count,
        })
        .collect();
    atoms.sort_by(|a, b| a.value.cmp(&b.value));
    Ok(AtomReport {
        atoms,
        residual_mass: residual as f64 / total as f64,
        residual_count: residual,
        total,
        window,
        max_den,
        min_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use num_integer::Integer;
    use proptest::prelude::*;
    use rand::Rng;

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(BigInt::from(a), BigInt::from(b))
    }

    fn brute(x: f64, max_den: u64) -> (u64, u64) {
        let mut best = (0, 1);
        let mut err = f64::INFINITY;
        for den in 1..=max_den {
            let num = (x * den as f64).round() as u64;
            let e = (x - num as f64 / den as f64).abs();
            if e < err - 1e-15 {
                err = e;
                let g = num.gcd(&den);
                best = (num / g, den / g);
            }
        }
        best
    }

    proptest! {
        #[test]
        fn best_rational_matches_brute_force(x in 0.0f64..=1.0, max_den in 1u64..60) {
            let (p, q) = best_rational(x, max_den).unwrap();
            let (bp, bq) = brute(x, max_den);
            prop_assert!(q <= max_den);
            prop_assert_eq!(p.gcd(&q), 1);
            let e = (x - p as f64 / q as f64).abs();
            let be = (x - bp as f64 / bq as f64).abs();
            prop_assert!(e <= be + 1e-15, "{}/{} vs {}/{}", p, q, bp, bq);
        }
    }

    #[test]
    fn best_rational_exact_inputs() {
        assert_eq!(best_rational(0.5, 12).unwrap(), (1, 2));
        assert_eq!(best_rational(2.0 / 7.0, 12).unwrap(), (2, 7));
        assert_eq!(best_rational(0.0, 5).unwrap(), (0, 1));
        assert_eq!(best_rational(1.0, 5).unwrap(), (1, 1));
        assert_eq!(
            best_rational(std::f64::consts::PI - 3.0, 10).unwrap(),
            (1, 7)
        );
        assert!(best_rational(1.5, 5).is_err());
    }

    #[test]
    fn point_mass() {
        let r = detect_atoms(&[0.5; 1000], 1e-6, 12, 2).unwrap();
        assert_eq!(r.atoms.len(), 1);
        assert_eq!(r.atoms[0].value, q(1, 2));
        assert_eq!(r.atoms[0].mass, 1.0);
        assert_eq!(r.residual_count, 0);
        let e = ExactAtoms::from_values(vec![Some(q(1, 2)); 1000]).report(1);
        assert_eq!(e.atoms.len(), 1);
        assert_eq!(e.atoms[0].mass, 1.0);
    }

    #[test]
    fn exact_proportions_partition_samples() {
        let vals = [q(1, 2), q(1, 3), q(1, 2), q(2, 7), q(1, 3), q(1, 2)];
        let mut input: Vec<Option<BigRational>> = vals.iter().cloned().map(Some).collect();
        input.push(None);
        let e = ExactAtoms::from_values(input);
        assert_eq!(e.total(), 7);
        assert_eq!(e.count(&q(1, 2)), 3);
        assert_eq!(e.mass(&q(1, 3)), 2.0 / 7.0);
        let r = e.report(2);
        assert_eq!(r.atoms.len(), 2);
        let counted: usize = r.atoms.iter().map(|a| a.count).sum();
        assert_eq!(counted + r.residual_count, r.total);
        assert_eq!(r.residual_count, 2);
        assert_eq!(e.sorted_f64().len(), 6);
    }

    #[test]
    fn recovers_planted_atoms() {
        let window = 1e-6;
        let planted = [
            (q(1, 3), 3000),
            (q(1, 2), 5000),
            (q(2, 5), 2000),
            (q(7, 11), 800),
        ];
        let mut rng = stream(42, 0, 0);
        let mut xs = Vec::new();
        for (v, k) in &planted {
            let c = v.to_f64().unwrap();
            for _ in 0..*k {
                xs.push(c + rng.random_range(-0.4 * window..0.4 * window));
            }
        }
        for _ in 0..200 {
            xs.push(rng.random_range(0.0..1.0));
        }
        let r = detect_atoms(&xs, window, 12, 2).unwrap();
        let got: Vec<(BigRational, usize)> =
            r.atoms.iter().map(|a| (a.value.clone(), a.count)).collect();
        let mut want: Vec<(BigRational, usize)> = planted.to_vec();
        want.sort();
        assert_eq!(got, want);
        assert_eq!(r.residual_count, 200);
    }

    #[test]
    fn unsnappable_clusters_are_residual() {
        // A tight cluster far from every fraction with denominator <= 5.
        let xs = vec![0.123456; 50];
        let r = detect_atoms(&xs, 1e-6, 5, 2).unwrap();
        assert!(r.atoms.is_empty());
        assert_eq!(r.residual_mass, 1.0);
    }
}
