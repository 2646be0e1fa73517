//! Maps between log-likelihood ratios and probabilities.

use crate::Sign;

/// `ln(1 + e^x)` without overflow or cancellation.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic function `1 / (1 + e^{-z})`, equal to `(1 + tanh(z/2)) / 2`.
pub fn psi(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// [`psi`] rounded into the open unit interval. For finite `z` the exact
/// value is strictly between 0 and 1, but it may round to an endpoint in
/// double precision once `|z|` exceeds about 37 (near 1) or 745 (near 0).
pub fn psi_open(z: f64) -> f64 {
    psi(z).clamp(f64::MIN_POSITIVE, 1.0f64.next_down())
}

/// Whether [`psi`] rounds to 0 or 1 for this input.
pub fn psi_rounds_to_boundary(z: f64) -> bool {
    let p = psi(z);
    p <= 0.0 || p >= 1.0
}

/// Log-odds `ln(p / (1 - p))`.
pub fn phi(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

/// Contribution of one clause edge of type `(s, s')` to the parent's
/// log-likelihood ratio, given the child's ratio `theta`:
/// `-s · ln((1 + s' tanh(theta/2)) / 2) = s · softplus(-s' theta)`.
pub fn edge_message(parent: Sign, child: Sign, theta: f64) -> f64 {
    parent.as_f64() * softplus(-child.as_f64() * theta)
}
