//! Population dynamics for the distributional recursions on log-likelihood
//! ratios (`LL`) and on marginals (`DE`).

use rand::Rng;

use crate::distance::wasserstein2 as w2_samples;
use crate::error::{invalid, Result};
use crate::population::{Kind, PopMeta, Population};
use crate::rng::{derive_seed, domain, par_fill_chunked, Pois};
use crate::transform::{phi, psi_open, softplus};

fn check_density(d: f64) -> Result<()> {
    if d > 0.0 && d < 2.0 {
        Ok(())
    } else {
        Err(invalid(format!("density must lie in (0, 2), got {d}")))
    }
}

fn expect_kind(p: &Population, kind: Kind) -> Result<()> {
    if p.kind() == kind {
        Ok(())
    } else {
        Err(invalid(format!(
            "expected a {kind} population, got {}",
            p.kind()
        )))
    }
}

fn next_meta(p: &Population, d: f64, seed: u64) -> PopMeta {
    PopMeta {
        d,
        generation: p.meta().generation + 1,
        seed,
    }
}

fn sign(rng: &mut impl Rng) -> f64 {
    if rng.random_bool(0.5) {
        1.0
    } else {
        -1.0
    }
}

/// `ln((1 + s' tanh(t/2)) / 2)` in stable form.
fn ll_term(sp: f64, t: f64) -> f64 {
    -softplus(-sp * t)
}

/// Applies the `LL` operator once to a THETA population, keeping its size.
/// Output `i` is `sum_{k <= D} s_k ln((1 + s'_k tanh(t_k/2)) / 2)` with
/// `D ~ Poisson(d)`, uniform signs `s, s'`, and `t_k` resampled uniformly
/// from the input.
pub fn apply_ll(p: &Population, d: f64, seed: u64) -> Result<Population> {
    expect_kind(p, Kind::Theta)?;
    check_density(d)?;
    let xs = p.samples();
    let pois = Pois::new(d);
    let mut out = vec![0.0; xs.len()];
    par_fill_chunked(&mut out, seed, domain::LL, |rng| {
        let mut acc = 0.0;
        for _ in 0..pois.sample(rng) {
            let s = sign(rng);
            let sp = sign(rng);
            let j = rng.random_range(0..xs.len());
            acc += s * ll_term(sp, xs[j]);
        }
        acc
    });
    Population::new(Kind::Theta, out, next_meta(p, d, seed))
}

/// Applies `LL` to two equal-size THETA populations with shared randomness.
/// Both inputs are sorted first; each output index uses the same Poisson
/// count, signs and resampled rank for both, so the outputs are coupled
/// through the monotone pairing of the inputs.
pub fn apply_ll_coupled(
    a: &Population,
    b: &Population,
    d: f64,
    seed: u64,
) -> Result<(Population, Population)> {
    expect_kind(a, Kind::Theta)?;
    expect_kind(b, Kind::Theta)?;
    check_density(d)?;
    if a.len() != b.len() {
        return Err(invalid(format!(
            "coupled populations need equal sizes, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (sa, sb) = (a.sorted(), b.sorted());
    let pois = Pois::new(d);
    let mut out = vec![(0.0, 0.0); sa.len()];
    par_fill_chunked(&mut out, seed, domain::LL, |rng| {
        let (mut x, mut y) = (0.0, 0.0);
        for _ in 0..pois.sample(rng) {
            let s = sign(rng);
            let sp = sign(rng);
            let j = rng.random_range(0..sa.len());
            x += s * ll_term(sp, sa[j]);
            y += s * ll_term(sp, sb[j]);
        }
        (x, y)
    });
    let (xa, xb): (Vec<f64>, Vec<f64>) = out.into_iter().unzip();
    Ok((
        Population::new(Kind::Theta, xa, next_meta(a, d, seed))?,
        Population::new(Kind::Theta, xb, next_meta(b, d, seed))?,
    ))
}

/// Applies the `DE` operator once to a MU population: output `i` is
/// `P- / (P- + P+)` where `P-` and `P+` are products of `D-` and `D+`
/// resampled marginals, `D-, D+ ~ Poisson(d/2)` independent. Products are
/// taken as sums of logarithms.
pub fn apply_de(p: &Population, d: f64, seed: u64) -> Result<Population> {
    expect_kind(p, Kind::Mu)?;
    check_density(d)?;
    let logs: Vec<f64> = p.samples().iter().map(|m| m.ln()).collect();
    let pois = Pois::new(d / 2.0);
    let mut out = vec![0.0; logs.len()];
    par_fill_chunked(&mut out, seed, domain::DE, |rng| {
        let minus = pois.sample(rng);
        let plus = pois.sample(rng);
        let mut lm = 0.0;
        for _ in 0..minus {
            lm += logs[rng.random_range(0..logs.len())];
        }
        let mut lp = 0.0;
        for _ in 0..plus {
            lp += logs[rng.random_range(0..logs.len())];
        }
        psi_open(lm - lp)
    });
    Population::new(Kind::Mu, out, next_meta(p, d, seed))
}

/// Elementwise logistic map from THETA to MU, rounded into (0, 1).
pub fn psi_push(p: &Population) -> Result<Population> {
    expect_kind(p, Kind::Theta)?;
    Population::new(
        Kind::Mu,
        p.samples().iter().map(|&t| psi_open(t)).collect(),
        p.meta(),
    )
}

/// Elementwise log-odds map from MU to THETA.
pub fn phi_push(p: &Population) -> Result<Population> {
    expect_kind(p, Kind::Mu)?;
    Population::new(
        Kind::Theta,
        p.samples().iter().map(|&m| phi(m)).collect(),
        p.meta(),
    )
}

/// W2 between two populations of the same kind and size.
pub fn wasserstein2(a: &Population, b: &Population) -> Result<f64> {
    if a.kind() != b.kind() {
        return Err(invalid("W2 between populations of different kinds"));
    }
    w2_samples(a.samples(), b.samples())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    /// W2 between this iterate and the previous one.
    pub w2_step: f64,
    /// Fraction of samples whose marginal is exactly 1/2.
    pub mass_at_half: f64,
    /// W2 between this iterate and an independent regeneration from the
    /// same previous iterate.
    pub noise_floor: f64,
}

#[derive(Clone, Debug)]
pub struct FixpointResult {
    pub population: Population,
    pub trace: Vec<TraceRow>,
    /// Whether a step fell below `tol` plus the noise floor before
    /// `max_iter` iterations.
    pub converged: bool,
}

fn iterate(
    start: Population,
    max_iter: usize,
    tol: f64,
    seed: u64,
    half: f64,
    step: impl Fn(&Population, u64) -> Result<Population>,
) -> Result<FixpointResult> {
    if max_iter == 0 {
        return Err(invalid("max_iter must be positive"));
    }
    if tol.is_nan() || tol < 0.0 {
        return Err(invalid(format!(
            "tolerance must be non-negative, got {tol}"
        )));
    }
    let mut p = start;
    let mut trace = Vec::new();
    let mut converged = false;
    for k in 1..=max_iter {
        let s = derive_seed(seed, k as u64);
        let next = step(&p, s)?;
        let twin = step(&p, derive_seed(s, domain::NOISE))?;
        let w2_step = wasserstein2(&next, &p)?;
        let noise_floor = wasserstein2(&next, &twin)?;
        trace.push(TraceRow {
            iter: k,
            w2_step,
            mass_at_half: next.mass_at(half),
            noise_floor,
        });
        p = next;
        if w2_step <= tol + noise_floor {
            converged = true;
            break;
        }
    }
    Ok(FixpointResult {
        population: p,
        trace,
        converged,
    })
}

/// Iterates `LL` from the all-zeros population until the W2 step between
/// consecutive iterates is at most `tol` plus the Monte Carlo noise floor,
/// or `max_iter` is reached (then `converged` is false).
pub fn fixpoint(
    d: f64,
    size: usize,
    max_iter: usize,
    tol: f64,
    seed: u64,
) -> Result<FixpointResult> {
    check_density(d)?;
    if size == 0 {
        return Err(invalid("population size must be positive"));
    }
    let start = Population::zeros(size, PopMeta::new(d, seed))?;
    iterate(start, max_iter, tol, seed, 0.0, |p, s| apply_ll(p, d, s))
}

/// Iterates `DE` from the point mass at 1/2, with the same stopping rule as
/// [`fixpoint`].
pub fn fixpoint_de(
    d: f64,
    size: usize,
    max_iter: usize,
    tol: f64,
    seed: u64,
) -> Result<FixpointResult> {
    check_density(d)?;
    if size == 0 {
        return Err(invalid("population size must be positive"));
    }
    let start = Population::new(Kind::Mu, vec![0.5; size], PopMeta::new(d, seed))?;
    iterate(start, max_iter, tol, seed, 0.5, |p, s| apply_de(p, d, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::wasserstein1;

    fn meta() -> PopMeta {
        PopMeta::new(1.0, 0)
    }

    fn theta(xs: Vec<f64>) -> Population {
        Population::new(Kind::Theta, xs, meta()).unwrap()
    }

    #[test]
    fn ll_from_zeros_lands_on_log2_lattice() {
        let out = apply_ll(&Population::zeros(20_000, meta()).unwrap(), 1.3, 4).unwrap();
        let ln2 = 2f64.ln();
        for &x in out.samples() {
            let k = x / ln2;
            assert!((k - k.round()).abs() < 1e-9, "{x}");
        }
        assert_eq!(out.meta().generation, 1);
    }

    #[test]
    fn ll_zero_mass() {
        let out = apply_ll(&Population::zeros(100_000, meta()).unwrap(), 1.0, 8).unwrap();
        assert!(out.mass_at(0.0) >= (-1f64).exp() - 0.01);
    }

    #[test]
    fn ll_output_symmetric() {
        // Flipping s maps the output law to its reflection, whatever the input.
        let input = theta((0..100_000).map(|i| (i as f64 / 1e4) - 3.0).collect());
        let out = apply_ll(&input, 1.5, 2).unwrap();
        let xs = out.samples();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 4.0 * sd / n.sqrt(), "mean {mean}");
        let pos = xs.iter().filter(|&&x| x > 0.0).count() as f64;
        let neg = xs.iter().filter(|&&x| x < 0.0).count() as f64;
        assert!(
            (pos - neg).abs() < 4.0 * (pos + neg).sqrt(),
            "{pos} vs {neg}"
        );
    }

    #[test]
    fn de_from_half_is_dyadic() {
        let input = Population::new(Kind::Mu, vec![0.5; 20_000], meta()).unwrap();
        let out = apply_de(&input, 1.5, 3).unwrap();
        // Every value is 1 / (1 + 2^k) for an integer k.
        for &m in out.samples() {
            let k = (1.0 / m - 1.0).log2();
            assert!((k - k.round()).abs() < 1e-9, "{m}");
        }
        assert!(out.mass_at(0.5) > (-1.5f64).exp() - 0.01);
    }

    #[test]
    fn de_output_symmetric() {
        let input = Population::new(Kind::Mu, vec![0.5; 100_000], meta()).unwrap();
        let out = apply_de(&input, 1.2, 1).unwrap();
        let flip: Vec<f64> = out.samples().iter().map(|x| 1.0 - x).collect();
        assert!(wasserstein1(out.samples(), &flip).unwrap() < 0.005);
    }

    #[test]
    fn de_and_ll_agree_in_distribution() {
        let base = fixpoint(1.5, 100_000, 8, 0.0, 5).unwrap().population;
        let ll = apply_ll(&base, 1.5, 6).unwrap();
        let de = apply_de(&psi_push(&base).unwrap(), 1.5, 7).unwrap();
        let w_mu = wasserstein1(psi_push(&ll).unwrap().samples(), de.samples()).unwrap();
        assert!(w_mu <= 0.01, "mu-space W1 {w_mu}");
        let w_theta = wasserstein1(ll.samples(), phi_push(&de).unwrap().samples()).unwrap();
        assert!(w_theta <= 0.01, "theta-space W1 {w_theta}");
    }

    #[test]
    fn kind_checks() {
        let mu = Population::new(Kind::Mu, vec![0.5; 4], meta()).unwrap();
        let th = theta(vec![0.0; 4]);
        assert!(apply_ll(&mu, 1.0, 0).is_err());
        assert!(apply_de(&th, 1.0, 0).is_err());
        assert!(psi_push(&mu).is_err());
        assert!(phi_push(&th).is_err());
        assert!(wasserstein2(&mu, &th).is_err());
        assert!(apply_ll(&th, 2.0, 0).is_err());
    }

    #[test]
    fn pushes_are_inverse() {
        let grid = theta((-300..=300).map(|i| i as f64 / 10.0).collect());
        let back = phi_push(&psi_push(&grid).unwrap()).unwrap();
        for (a, b) in grid.samples().iter().zip(back.samples()) {
            // Rounding psi(a) to a double moves it by up to one ulp, which
            // is amplified by about e^|a| in the log-odds.
            let bound = 1e-12f64.max(4.0 * f64::EPSILON * (1.0 + a.abs().exp()));
            assert!((a - b).abs() <= bound, "{a} {b}");
            if a.abs() <= 9.0 {
                assert!((a - b).abs() <= 1e-12, "{a} {b}");
            }
        }
        let mu = psi_push(&theta(vec![0.0, 2f64.ln()])).unwrap();
        assert_eq!(mu.samples()[0], 0.5);
        assert!((mu.samples()[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn population_w2_examples() {
        assert_eq!(
            wasserstein2(&theta(vec![0.0, 0.0]), &theta(vec![1.0, 1.0])).unwrap(),
            1.0
        );
        assert_eq!(
            wasserstein2(&theta(vec![0.0, 1.0]), &theta(vec![1.0, 2.0])).unwrap(),
            1.0
        );
        assert!(wasserstein2(&theta(vec![0.0]), &theta(vec![1.0, 2.0])).is_err());
    }

    #[test]
    fn low_density_fixpoint_near_zero() {
        let r = fixpoint(0.05, 20_000, 50, 1e-3, 1).unwrap();
        let zeros = Population::zeros(20_000, meta()).unwrap();
        assert!(wasserstein1(r.population.samples(), zeros.samples()).unwrap() <= 0.1);
        // To first order in d each sample is a sum of Poisson(d) terms
        // of size ln 2, so the second moment is about d (ln 2)^2.
        let w2 = wasserstein2(&r.population, &zeros).unwrap();
        let oracle = 0.05f64.sqrt() * 2f64.ln();
        assert!((w2 - oracle).abs() < 0.05 * oracle, "{w2} vs {oracle}");
        assert!(r.converged);
    }

    #[test]
    fn fixpoint_trace_and_atom() {
        let r = fixpoint(1.5, 100_000, 100, 1e-3, 9).unwrap();
        assert!(r.converged);
        assert!(r.trace[0].w2_step > 10.0 * r.trace.last().unwrap().noise_floor);
        let mu = psi_push(&r.population).unwrap();
        assert!(mu.mass_at(0.5) >= (-1.5f64).exp() - 0.01);
    }

    /// Coupled W2 of the outputs and a standard error for it, from the
    /// squared gaps of the sorted pairing.
    fn w2_with_se(a: &Population, b: &Population) -> (f64, f64) {
        let sq: Vec<f64> = a
            .sorted()
            .iter()
            .zip(b.sorted())
            .map(|(x, y)| (x - y).powi(2))
            .collect();
        let n = sq.len() as f64;
        let m = sq.iter().sum::<f64>() / n;
        let var = sq.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m.sqrt(), (var / n).sqrt() / (2.0 * m.sqrt()))
    }

    #[test]
    fn coupled_contraction_bound() {
        // Each message is 1-Lipschitz in theta and the signed terms are
        // independent with mean zero, so the coupled second moment grows by at
        // most a factor d.
        for d in [0.5, 1.0, 1.5, 1.9] {
            let a = fixpoint(d, 100_000, 30, 0.0, 5).unwrap().population;
            let inputs = [
                fixpoint(d, 100_000, 2, 0.0, 6).unwrap().population,
                theta(a.samples().iter().map(|x| x + 0.1).collect()),
                theta(a.samples().iter().map(|x| x * 1.2).collect()),
            ];
            for b in &inputs {
                let (oa, ob) = apply_ll_coupled(&a, b, d, 7).unwrap();
                let w_in = wasserstein2(&a, b).unwrap();
                let (w_out, se) = w2_with_se(&oa, &ob);
                eprintln!("d={d}: coupled W2 rate {:.4}", w_out / w_in);
                assert!(
                    w_out <= d.sqrt() * w_in + 3.0 * se,
                    "d={d}: {w_out} vs {w_in}"
                );
            }
        }
    }

    #[test]
    fn coupled_outputs_match_plain_marginals() {
        let a = theta((0..5000).map(|i| (i as f64).sin() * 3.0).collect());
        let (oa, ob) = apply_ll_coupled(&a, &a, 1.2, 3).unwrap();
        assert_eq!(oa.samples(), ob.samples());
    }
}
