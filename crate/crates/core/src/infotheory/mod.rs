//! Numerical mutual-information engine for the two-copy flipping-attack
//! channel: per-symbol rates of the Genie-aided receiver, the first-order
//! approximation for imperfect detectors, the exact small-n rate, and the
//! validity conditions under which the approximation is trustworthy.

pub mod exact;
pub mod quad;
pub mod scalar;

pub use exact::{conditional_attack_pdf, conditional_clean_pdf, exact_nongenie_rate};
pub use scalar::{binary_entropy, scalar_mi, ScalarChannel};

use crate::channel::ChannelParams;
use crate::error::{Error, Result};

/// A detector operating point (miss-detection rate, false-alarm rate).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePair {
    pub p_md: f64,
    pub p_fa: f64,
}

impl RatePair {
    pub fn new(p_md: f64, p_fa: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_md) || !p_md.is_finite() {
            return Err(Error::invalid("p_md must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&p_fa) || !p_fa.is_finite() {
            return Err(Error::invalid("p_fa must lie in [0, 1]"));
        }
        Ok(RatePair { p_md, p_fa })
    }
}

/// Per-symbol rates for one channel configuration and frame length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiReport {
    pub n: usize,
    /// I(x; y1), the protected-copy channel, bits/symbol.
    pub i_direct: f64,
    /// I(x; y_c) on the combined no-attack channel, bits/symbol.
    pub i_combined: f64,
    /// Genie-aided rate, bits/symbol.
    pub genie_per_symbol: f64,
    /// Conservative rate (always discard the vulnerable copy), bits/symbol.
    pub baseline_per_symbol: f64,
    /// First-order rate at a given false-alarm rate, bits/symbol.
    pub approx_per_symbol: Option<f64>,
    /// Exact rate (tractable for n ≤ 3 only), bits/symbol.
    pub exact_per_symbol: Option<f64>,
}

impl MiReport {
    pub fn genie_per_frame(&self) -> f64 {
        self.n as f64 * self.genie_per_symbol
    }

    pub fn baseline_per_frame(&self) -> f64 {
        self.n as f64 * self.baseline_per_symbol
    }
}

/// Scalar channel of the protected copy, y1 = γ1·x + z1.
pub fn direct_channel(params: &ChannelParams) -> Result<ScalarChannel> {
    ScalarChannel::new(params.gamma1, params.sigma2, params.alpha)
}

/// Scalar channel of the combined copies without attack,
/// y_c = (γ1² + γ2²)·x + z_c with Var(z_c) = (γ1² + γ2²)·σ².
pub fn combined_channel(params: &ChannelParams) -> Result<ScalarChannel> {
    ScalarChannel::new(params.combined_gain(), params.sigma2_eq(), params.alpha)
}

/// Rate of the compound channel under a Genie detector: half the frames are
/// clean and decoded from the combined copies, half are attacked and decoded
/// from the protected copy alone,
///
///   genie = ½·I(x; y_c) + ½·I(x; y1)   bits/symbol.
///
/// The rate expressions in this module assume the symmetric attack prior
/// (each frame attacked with probability ½).
pub fn genie_rate(params: &ChannelParams, n: usize) -> Result<MiReport> {
    params.validate()?;
    if n == 0 {
        return Err(Error::invalid("frame length must be at least 1"));
    }
    let i_combined = scalar_mi(&combined_channel(params)?)?;
    let i_direct = scalar_mi(&direct_channel(params)?)?;
    Ok(MiReport {
        n,
        i_direct,
        i_combined,
        genie_per_symbol: 0.5 * i_combined + 0.5 * i_direct,
        baseline_per_symbol: i_direct,
        approx_per_symbol: None,
        exact_per_symbol: None,
    })
}

/// First-order rate of an imperfect detector with false-alarm rate `p_fa`
/// (valid when the operating point lies deep in the μ-region and the pdf
/// dominance condition holds),
///
///   (n/2)·I(x; y_c)·(1−p_fa) + (n/2)·I(x; y1)·(1+p_fa)   bits/frame.
///
/// Affine in p_fa: equals the Genie rate at p_fa = 0 and the conservative
/// baseline n·I(x; y1) at p_fa = 1.
pub fn approx_rate(params: &ChannelParams, n: usize, p_fa: f64) -> Result<f64> {
    params.validate()?;
    if n == 0 {
        return Err(Error::invalid("frame length must be at least 1"));
    }
    if !(0.0..=1.0).contains(&p_fa) || !p_fa.is_finite() {
        return Err(Error::invalid("p_fa must lie in [0, 1]"));
    }
    let i_combined = scalar_mi(&combined_channel(params)?)?;
    let i_direct = scalar_mi(&direct_channel(params)?)?;
    let half_n = n as f64 / 2.0;
    Ok(half_n * i_combined * (1.0 - p_fa) + half_n * i_direct * (1.0 + p_fa))
}

/// Maximum squared distance of the 2ⁿ-point constellation reachable from one
/// codeword through flip patterns, (γ1² + b·γ2²) ∘ x̄ over b ∈ {−1, +1}ⁿ.
///
/// Coordinates of two points differ by 0 or 2γ2², so the diameter is
/// 4·n·γ2⁴ for every codeword; the closed form is cross-checked against full
/// enumeration for n ≤ 3.
pub fn constellation_d2max(params: &ChannelParams, n: usize) -> f64 {
    let g2sq = params.gamma2 * params.gamma2;
    let closed = 4.0 * n as f64 * (g2sq * g2sq);
    if n <= 3 {
        let g1sq = params.gamma1 * params.gamma1;
        let points: Vec<Vec<f64>> = (0..1usize << n)
            .map(|bits| {
                (0..n)
                    .map(|i| {
                        let b = if bits >> i & 1 == 1 { 1.0 } else { -1.0 };
                        g1sq + b * g2sq
                    })
                    .collect()
            })
            .collect();
        let mut enumerated: f64 = 0.0;
        for p in &points {
            for q in &points {
                let d2: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                enumerated = enumerated.max(d2);
            }
        }
        assert!(
            (enumerated - closed).abs() <= 1e-12 * closed.max(1.0),
            "constellation diameter mismatch: enumerated {enumerated}, closed form {closed}"
        );
    }
    closed
}

/// Outcome of the pdf dominance condition d²max ≤ 2·ln(2)·σ²_eq, under which
/// the attacked-frame mixture density never exceeds twice the clean density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominanceCheck {
    pub holds: bool,
    /// lhs / rhs; the condition holds iff margin ≤ 1.
    pub margin: f64,
    pub lhs: f64,
    pub rhs: f64,
}

/// Check 4·n·γ2⁴ ≤ 2·ln(2)·(γ1² + γ2²)·σ² for frames of length `n`.
pub fn dominance_condition(params: &ChannelParams, n: usize) -> DominanceCheck {
    let lhs = constellation_d2max(params, n);
    let rhs = 2.0 * std::f64::consts::LN_2 * params.sigma2_eq();
    DominanceCheck {
        holds: lhs <= rhs,
        margin: lhs / rhs,
        lhs,
        rhs,
    }
}

/// Whether an operating point lies inside the μ-region
/// p_md ≤ (μ/(1−μ))·(1−p_fa), the set of operating points for which the
/// first-order rate is a μ-accurate approximation.
pub fn within_mu_region(rates: &RatePair, mu: f64) -> Result<bool> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::invalid("mu must lie strictly inside (0, 1)"));
    }
    Ok(rates.p_md <= mu / (1.0 - mu) * (1.0 - rates.p_fa))
}

/// Smallest μ whose region contains the operating point,
/// μ = p_md / (p_md + 1 − p_fa).
///
/// The only degenerate point is (p_md, p_fa) = (0, 1), where the ratio is
/// 0/0; callers that sweep empirical profiles should map that point to 0
/// (it lies inside every region).
pub fn mu_of_point(rates: &RatePair) -> Result<f64> {
    let denom = rates.p_md + 1.0 - rates.p_fa;
    if denom == 0.0 {
        return Err(Error::invalid(
            "mu is undefined at (p_md, p_fa) = (0, 1)",
        ));
    }
    Ok(rates.p_md / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_params(sigma2: f64) -> ChannelParams {
        ChannelParams::new(1.0, 1.0, sigma2, 0.5).unwrap()
    }

    #[test]
    fn genie_saturates_at_one_bit_when_noiseless() {
        let report = genie_rate(&unit_params(1e-9), 10).unwrap();
        assert!(report.genie_per_symbol > 0.99999, "{}", report.genie_per_symbol);
    }

    #[test]
    fn genie_is_the_average_of_the_two_branch_rates() {
        let params = unit_params(1.0);
        let report = genie_rate(&params, 4).unwrap();
        let i1 = scalar_mi(&ScalarChannel::new(2.0, 2.0, 0.5).unwrap()).unwrap();
        let i2 = scalar_mi(&ScalarChannel::new(1.0, 1.0, 0.5).unwrap()).unwrap();
        assert_eq!(report.i_combined, i1);
        assert_eq!(report.i_direct, i2);
        assert_eq!(report.genie_per_symbol, 0.5 * i1 + 0.5 * i2);
        assert_eq!(report.baseline_per_frame(), 4.0 * i2);
    }

    #[test]
    fn approx_rate_endpoints_are_exact() {
        let params = unit_params(1.0);
        for n in [1usize, 7, 100] {
            let report = genie_rate(&params, n).unwrap();
            let at_zero = approx_rate(&params, n, 0.0).unwrap();
            let at_one = approx_rate(&params, n, 1.0).unwrap();
            assert!(
                (at_zero - report.genie_per_frame()).abs() < 1e-12,
                "p_fa=0: {at_zero} vs {}",
                report.genie_per_frame()
            );
            assert!(
                (at_one - report.baseline_per_frame()).abs() < 1e-12,
                "p_fa=1: {at_one} vs {}",
                report.baseline_per_frame()
            );
            let mid = approx_rate(&params, n, 0.5).unwrap();
            assert!((mid - 0.5 * (at_zero + at_one)).abs() < 1e-12);
        }
    }

    #[test]
    fn approx_rate_rejects_bad_p_fa() {
        let params = unit_params(1.0);
        assert!(approx_rate(&params, 2, -0.1).is_err());
        assert!(approx_rate(&params, 2, 1.1).is_err());
        assert!(approx_rate(&params, 2, f64::NAN).is_err());
    }

    #[test]
    fn constellation_diameter_reference_values() {
        let p = |g2: f64| ChannelParams::new(1.0, g2, 1.0, 0.5).unwrap();
        assert!((constellation_d2max(&p(1.0), 1) - 4.0).abs() < 1e-12);
        assert!((constellation_d2max(&p(1.0), 10) - 40.0).abs() < 1e-12);
        assert!((constellation_d2max(&p(0.5), 2) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dominance_condition_reference_values() {
        // 4 > 2·ln2·2 ≈ 2.7726 → violated.
        let check = dominance_condition(&unit_params(1.0), 1);
        assert!(!check.holds);
        assert!((check.rhs - 2.772588722239781).abs() < 1e-12);

        // 8 ≤ 2·ln2·8 ≈ 11.09 → holds.
        let check = dominance_condition(&unit_params(4.0), 2);
        assert!(check.holds);
        assert!((check.margin - 8.0 / 11.090354888959125).abs() < 1e-12);

        // Vanishing gain on the vulnerable copy: holds at any n.
        let tiny = ChannelParams::new(1.0, 1e-6, 1.0, 0.5).unwrap();
        assert!(dominance_condition(&tiny, 1_000_000).holds);
    }

    #[test]
    fn mu_region_reference_points() {
        let r = |md, fa| RatePair::new(md, fa).unwrap();
        assert!(within_mu_region(&r(0.0, 0.9), 1e-3).unwrap());
        assert!(within_mu_region(&r(1e-3, 0.3), 3e-3).unwrap());
        assert!(!within_mu_region(&r(0.5, 0.5), 3e-3).unwrap());
        assert!(within_mu_region(&r(0.0, 0.0), f64::NAN).is_err());
        assert!(within_mu_region(&r(0.0, 0.0), 1.0).is_err());
    }

    #[test]
    fn mu_of_point_reference_values() {
        let r = |md, fa| RatePair::new(md, fa).unwrap();
        assert_eq!(mu_of_point(&r(0.0, 0.3)).unwrap(), 0.0);
        let mu = mu_of_point(&r(1e-3, 0.3)).unwrap();
        assert!((mu - 1.426533523537803e-3).abs() < 1e-12, "mu was {mu}");
        assert_eq!(mu_of_point(&r(0.5, 0.5)).unwrap(), 0.5);
        assert!(mu_of_point(&r(0.0, 1.0)).is_err());
    }

    #[test]
    fn mu_of_point_is_the_region_boundary() {
        // For non-degenerate points, the point lies in R_mu exactly when
        // mu >= mu_of_point.
        for (md, fa) in [(0.01, 0.2), (0.3, 0.7), (1e-4, 0.99)] {
            let r = RatePair::new(md, fa).unwrap();
            let mu = mu_of_point(&r).unwrap();
            assert!(within_mu_region(&r, (mu * 1.001).min(0.999)).unwrap());
            assert!(!within_mu_region(&r, mu * 0.999).unwrap());
        }
    }

    proptest! {
        // Convex-combination bound behind the rate approximation: whenever
        // 0 ≤ a ≤ 2b and μ ≤ 1e-3, |μa + (1−μ)b − b| ≤ μ·b.
        #[test]
        fn convex_combination_stays_mu_close(
            b in 0.0f64..1e6,
            t in 0.0f64..2.0,
            mu in 1e-12f64..1e-3,
        ) {
            let a = t * b;
            let mixed = mu * a + (1.0 - mu) * b;
            prop_assert!((mixed - b).abs() <= mu * b + 1e-12 * b.max(1.0));
        }

        // Rate sandwich: baseline ≤ approx ≤ genie for every p_fa in [0, 1].
        #[test]
        fn rate_sandwich_holds(
            g1 in 0.3f64..2.0,
            g2 in 0.3f64..2.0,
            sigma2 in 0.05f64..10.0,
            alpha in 0.1f64..0.9,
            p_fa in 0.0f64..1.0,
        ) {
            let params = ChannelParams::new(g1, g2, sigma2, alpha).unwrap();
            let report = genie_rate(&params, 2).unwrap();
            let approx = approx_rate(&params, 2, p_fa).unwrap() / 2.0;
            prop_assert!(approx <= report.genie_per_symbol + 1e-6);
            prop_assert!(approx >= report.baseline_per_symbol - 1e-6);
        }
    }
}
