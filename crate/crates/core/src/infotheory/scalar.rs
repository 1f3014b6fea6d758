//! Mutual information of the scalar binary-input AWGN channel y = A·x + z,
//! x ∈ {−1, +1} with prior {α, 1−α}, z ~ N(0, v).
//!
//! I(x; y) = h(y) − h(y|x), where h(y) is the differential entropy (bits) of
//! the two-component Gaussian mixture marginal and h(y|x) = ½·log2(2πe·v).
//! h(y) is evaluated by deterministic adaptive quadrature so results are
//! reproducible to all printed digits.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::infotheory::quad::adaptive_simpson;

/// Quadrature tolerance per entropy integral.
const ENTROPY_TOL: f64 = 1e-9;
/// Slack for clamping a slightly negative / slightly over-cap MI estimate.
const CLAMP_TOL: f64 = 1e-7;

/// A scalar binary-input AWGN channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarChannel {
    /// Effective gain A; the channel output means are ±A.
    pub amplitude: f64,
    /// Noise variance (> 0).
    pub variance: f64,
    /// Probability of transmitting +1, in (0, 1).
    pub alpha: f64,
}

impl ScalarChannel {
    pub fn new(amplitude: f64, variance: f64, alpha: f64) -> Result<Self> {
        if !amplitude.is_finite() {
            return Err(Error::invalid("amplitude must be finite"));
        }
        if !variance.is_finite() || variance <= 0.0 {
            return Err(Error::invalid("variance must be finite and positive"));
        }
        if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
            return Err(Error::invalid("alpha must lie strictly inside (0, 1)"));
        }
        Ok(ScalarChannel {
            amplitude,
            variance,
            alpha,
        })
    }

    /// Natural log of the output density α·N(y; A, v) + (1−α)·N(y; −A, v),
    /// computed by log-sum-exp so tails do not underflow pairwise.
    pub fn ln_marginal(&self, y: f64) -> f64 {
        let v = self.variance;
        let a = self.amplitude;
        let l1 = self.alpha.ln() - (y - a) * (y - a) / (2.0 * v);
        let l2 = (1.0 - self.alpha).ln() - (y + a) * (y + a) / (2.0 * v);
        let m = l1.max(l2);
        m + ((l1 - m).exp() + (l2 - m).exp()).ln() - 0.5 * (2.0 * PI * v).ln()
    }
}

/// Binary entropy H(p) in bits.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
}

/// I(x; y) in bits per symbol for the scalar channel, by quadrature of the
/// mixture entropy over [−A−12σ, A+12σ]. The result is clamped to
/// [0, H(alpha)]; an excursion beyond clamping slack is a numeric failure.
pub fn scalar_mi(ch: &ScalarChannel) -> Result<f64> {
    let ch = ScalarChannel::new(ch.amplitude, ch.variance, ch.alpha)?;
    let a = ch.amplitude.abs();
    let sigma = ch.variance.sqrt();
    let lo = -a - 12.0 * sigma;
    let hi = a + 12.0 * sigma;
    // Mixture peaks sit at ±A; align quadrature panels to them.
    let breakpoints = [-a, 0.0, a];
    let integrand = move |y: f64| {
        let lp = ch.ln_marginal(y);
        let p = lp.exp();
        if p == 0.0 {
            0.0
        } else {
            -p * lp / std::f64::consts::LN_2
        }
    };
    let h_y = adaptive_simpson(&integrand, lo, hi, &breakpoints, ENTROPY_TOL)?;
    let h_y_given_x = 0.5 * (2.0 * PI * std::f64::consts::E * ch.variance).log2();
    let mi = h_y - h_y_given_x;

    let cap = binary_entropy(ch.alpha);
    if mi < -CLAMP_TOL || mi > cap + CLAMP_TOL {
        return Err(Error::numeric(
            "scalar MI",
            format!("estimate {mi} outside [0, {cap}] beyond tolerance"),
        ));
    }
    Ok(mi.clamp(0.0, cap))
}
