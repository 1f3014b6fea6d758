//! Exact rate of an imperfect detector for short frames (n ≤ 3).
//!
//! Conditioned on the detector keeping the vulnerable copy, the combined
//! output is a Gaussian mixture over codewords and (for missed attacks) flip
//! patterns; its differential entropy has no closed form and is evaluated on
//! a tensor-product Gauss–Legendre grid at two resolutions, which must agree
//! before a value is accepted. The cost is exponential in n, which is why the
//! exact rate is only offered as a small-n oracle for validating the
//! first-order approximation.

use std::f64::consts::PI;

use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::infotheory::quad::{gauss_legendre, scale_nodes, CompensatedSum};
use crate::infotheory::scalar::scalar_mi;
use crate::infotheory::{direct_channel, RatePair};

/// Grid sizes (coarse, fine) per axis; the two estimates must agree.
const GRID_1D_2D: (usize, usize) = (200, 280);
const GRID_3D: (usize, usize) = (120, 156);
/// Accepted disagreement between the two grid resolutions, in bits.
const GRID_AGREEMENT_TOL: f64 = 2e-4;

struct GaussianMixture {
    dim: usize,
    sigma2: f64,
    /// (mean, ln weight + ln normalisation); zero-weight components dropped.
    comps: Vec<(Vec<f64>, f64)>,
}

impl GaussianMixture {
    fn new(dim: usize, sigma2: f64, weighted_means: Vec<(Vec<f64>, f64)>) -> Self {
        let ln_norm = -0.5 * dim as f64 * (2.0 * PI * sigma2).ln();
        let comps = weighted_means
            .into_iter()
            .filter(|(_, w)| *w > 0.0)
            .map(|(mean, w)| (mean, w.ln() + ln_norm))
            .collect();
        GaussianMixture { dim, sigma2, comps }
    }

    fn ln_pdf(&self, y: &[f64]) -> f64 {
        debug_assert_eq!(y.len(), self.dim);
        let inv_two_var = 0.5 / self.sigma2;
        // Streaming log-sum-exp.
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for (mean, lnw) in &self.comps {
            let mut d2 = 0.0;
            for (yi, mi) in y.iter().zip(mean) {
                let d = yi - mi;
                d2 += d * d;
            }
            let v = lnw - d2 * inv_two_var;
            if v <= max {
                sum += (v - max).exp();
            } else {
                sum = sum * (max - v).exp() + 1.0;
                max = v;
            }
        }
        max + sum.ln()
    }

    /// −∫ p·log2 p over [−half_width, half_width]^dim with `m` nodes per axis.
    fn entropy_bits_on_grid(&self, half_width: f64, m: usize) -> f64 {
        let (nodes, weights) = gauss_legendre(m);
        let (xs, ws) = scale_nodes(&nodes, &weights, -half_width, half_width);
        let mut acc = CompensatedSum::new();
        let mut idx = vec![0usize; self.dim];
        let mut y = vec![0.0f64; self.dim];
        loop {
            let mut w = 1.0;
            for (d, &i) in idx.iter().enumerate() {
                y[d] = xs[i];
                w *= ws[i];
            }
            let lp = self.ln_pdf(&y);
            let p = lp.exp();
            if p > 0.0 {
                acc.add(-w * p * lp / std::f64::consts::LN_2);
            }
            // Odometer increment over the grid.
            let mut d = 0;
            loop {
                idx[d] += 1;
                if idx[d] < m {
                    break;
                }
                idx[d] = 0;
                d += 1;
                if d == self.dim {
                    return acc.value();
                }
            }
        }
    }

    fn entropy_bits(&self, half_width: f64, grids: (usize, usize)) -> Result<f64> {
        let coarse = self.entropy_bits_on_grid(half_width, grids.0);
        let fine = self.entropy_bits_on_grid(half_width, grids.1);
        if (coarse - fine).abs() > GRID_AGREEMENT_TOL {
            return Err(Error::numeric(
                "grid entropy",
                format!(
                    "resolutions {} and {} disagree: {coarse} vs {fine}",
                    grids.0, grids.1
                ),
            ));
        }
        Ok(fine)
    }
}

fn check_small_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("frame length must be at least 1"));
    }
    if n > 3 {
        return Err(Error::Unsupported(format!(
            "exact rate is only tractable for n <= 3, got n = {n}"
        )));
    }
    Ok(())
}

/// All codewords of length n with their prior probabilities.
fn codewords(n: usize, alpha: f64) -> Vec<(Vec<f64>, f64)> {
    (0..1usize << n)
        .map(|bits| {
            let mut prob = 1.0;
            let cw = (0..n)
                .map(|i| {
                    if bits >> i & 1 == 1 {
                        prob *= alpha;
                        1.0
                    } else {
                        prob *= 1.0 - alpha;
                        -1.0
                    }
                })
                .collect();
            (cw, prob)
        })
        .collect()
}

fn flip_patterns(n: usize) -> Vec<Vec<f64>> {
    (0..1usize << n)
        .map(|bits| {
            (0..n)
                .map(|i| if bits >> i & 1 == 1 { 1.0 } else { -1.0 })
                .collect()
        })
        .collect()
}

fn attack_means(params: &ChannelParams, codeword: &[f64]) -> Vec<Vec<f64>> {
    let g1sq = params.gamma1 * params.gamma1;
    let g2sq = params.gamma2 * params.gamma2;
    flip_patterns(codeword.len())
        .into_iter()
        .map(|b| {
            codeword
                .iter()
                .zip(&b)
                .map(|(x, bi)| (g1sq + bi * g2sq) * x)
                .collect()
        })
        .collect()
}

fn clean_mean(params: &ChannelParams, codeword: &[f64]) -> Vec<f64> {
    let gain = params.combined_gain();
    codeword.iter().map(|x| gain * x).collect()
}

/// Density of the combined output of a missed attacked frame given the
/// codeword: a uniform mixture over the 2ⁿ flip patterns.
pub fn conditional_attack_pdf(params: &ChannelParams, codeword: &[i8], y: &[f64]) -> Result<f64> {
    let n = codeword.len();
    if n == 0 || n > 16 {
        return Err(Error::invalid("codeword length must lie in 1..=16"));
    }
    if y.len() != n {
        return Err(Error::invalid("point dimension must match codeword length"));
    }
    let cw: Vec<f64> = codeword.iter().map(|&s| f64::from(s)).collect();
    let per = 1.0 / (1usize << n) as f64;
    let means: Vec<(Vec<f64>, f64)> = attack_means(params, &cw)
        .into_iter()
        .map(|m| (m, per))
        .collect();
    let mix = GaussianMixture::new(n, params.sigma2_eq(), means);
    Ok(mix.ln_pdf(y).exp())
}

/// Density of the combined output of a clean frame given the codeword.
pub fn conditional_clean_pdf(params: &ChannelParams, codeword: &[i8], y: &[f64]) -> Result<f64> {
    let n = codeword.len();
    if n == 0 {
        return Err(Error::invalid("codeword length must be at least 1"));
    }
    if y.len() != n {
        return Err(Error::invalid("point dimension must match codeword length"));
    }
    let cw: Vec<f64> = codeword.iter().map(|&s| f64::from(s)).collect();
    let mix = GaussianMixture::new(
        n,
        params.sigma2_eq(),
        vec![(clean_mean(params, &cw), 1.0)],
    );
    Ok(mix.ln_pdf(y).exp())
}

/// Exact rate (bits per frame) of a detector with the given aggregate
/// operating point, assuming the codeword-uniform profile
/// p_md|x̄ = p_md and p_fa|x̄ = p_fa, and the symmetric attack prior:
///
///   I(xⁿ; y_cⁿ | kept)·P(kept) + n·I(x; y1)·P(dropped),
///
/// with P(kept) = ½·(1 + p_md − p_fa). Conditioned on keeping, the output
/// density mixes the missed-attack and clean densities with weights
/// p_md and 1−p_fa (normalised); both the joint and the per-codeword
/// conditional entropies are evaluated by grid quadrature.
pub fn exact_nongenie_rate(params: &ChannelParams, n: usize, rates: &RatePair) -> Result<f64> {
    params.validate()?;
    check_small_n(n)?;
    let rates = RatePair::new(rates.p_md, rates.p_fa)?;

    let i_direct = scalar_mi(&direct_channel(params)?)?;
    let prob_keep = 0.5 * (1.0 + rates.p_md - rates.p_fa);
    let prob_drop = 1.0 - prob_keep;
    let drop_term = n as f64 * i_direct * prob_drop;
    if prob_keep <= 0.0 {
        // Detector never keeps the second copy: conservative rate only.
        return Ok(drop_term);
    }

    let w_attack = 0.5 * rates.p_md / prob_keep;
    let w_clean = 0.5 * (1.0 - rates.p_fa) / prob_keep;
    let sigma2_eq = params.sigma2_eq();
    let half_width = params.combined_gain() + 12.0 * sigma2_eq.sqrt();
    let grids = if n <= 2 { GRID_1D_2D } else { GRID_3D };
    let cws = codewords(n, params.alpha);
    let per_flip = 1.0 / (1usize << n) as f64;

    let mut joint_means: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut h_cond = 0.0;
    for (cw, p_cw) in &cws {
        let attacks = attack_means(params, cw);
        let clean = clean_mean(params, cw);

        let mut cond_means: Vec<(Vec<f64>, f64)> =
            Vec::with_capacity(attacks.len() + 1);
        for mean in &attacks {
            cond_means.push((mean.clone(), w_attack * per_flip));
            joint_means.push((mean.clone(), p_cw * w_attack * per_flip));
        }
        cond_means.push((clean.clone(), w_clean));
        joint_means.push((clean, p_cw * w_clean));

        let cond_mix = GaussianMixture::new(n, sigma2_eq, cond_means);
        h_cond += p_cw * cond_mix.entropy_bits(half_width, grids)?;
    }

    let joint_mix = GaussianMixture::new(n, sigma2_eq, joint_means);
    let h_joint = joint_mix.entropy_bits(half_width, grids)?;

    let mi_kept = h_joint - h_cond;
    Ok(mi_kept * prob_keep + drop_term)
}
