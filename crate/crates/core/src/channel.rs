//! Two-copy adversarial channel with an i.i.d. sign-flipping attack.
//!
//! A frame of BPSK symbols x ∈ {−1, +1}ⁿ is received twice over independent
//! AWGN channels. The second copy is vulnerable: when a frame is attacked,
//! each of its symbols is multiplied by an i.i.d. uniform ±1 mask before the
//! noise is added,
//!
//!   y1 = γ1·x + z1,    y2 = γ2·(b ∘ x) + z2,    z1, z2 ~ N(0, σ²I).
//!
//! Unattacked frames have b = 1. Whether a frame is attacked is itself an
//! i.i.d. coin flip with probability `attack_prob`. Gaussian noise is drawn
//! through the ziggurat sampler of `rand_distr::StandardNormal`; statistical
//! tests should use tolerances, not bit patterns.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::Stream;

/// Full configuration of the two-copy channel.
///
/// `alpha` is the probability of transmitting +1. The convention that the
/// attack flag is `true` when the frame is attacked is used everywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Gain on the protected copy (non-zero).
    pub gamma1: f64,
    /// Gain on the vulnerable copy (non-zero).
    pub gamma2: f64,
    /// Noise variance per copy, linear scale (> 0).
    pub sigma2: f64,
    /// Probability that a transmitted symbol is +1, in (0, 1).
    pub alpha: f64,
    /// Probability that a frame is attacked, in [0, 1].
    pub attack_prob: f64,
}

impl ChannelParams {
    pub fn new(gamma1: f64, gamma2: f64, sigma2: f64, alpha: f64) -> Result<Self> {
        Self::with_attack_prob(gamma1, gamma2, sigma2, alpha, 0.5)
    }

    pub fn with_attack_prob(
        gamma1: f64,
        gamma2: f64,
        sigma2: f64,
        alpha: f64,
        attack_prob: f64,
    ) -> Result<Self> {
        let params = ChannelParams {
            gamma1,
            gamma2,
            sigma2,
            alpha,
            attack_prob,
        };
        params.validate()?;
        Ok(params)
    }

    /// Unit-gain channel with uniform input at the given SNR, where
    /// SNR(dB) = 10·log10(1/σ²).
    pub fn for_snr_db(snr_db: f64) -> Result<Self> {
        Self::new(1.0, 1.0, sigma2_from_snr_db(snr_db), 0.5)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.gamma1.is_finite() || self.gamma1 == 0.0 {
            return Err(Error::invalid("gamma1 must be finite and non-zero"));
        }
        if !self.gamma2.is_finite() || self.gamma2 == 0.0 {
            return Err(Error::invalid("gamma2 must be finite and non-zero"));
        }
        if !self.sigma2.is_finite() || self.sigma2 <= 0.0 {
            return Err(Error::invalid("sigma2 must be finite and positive"));
        }
        if !self.alpha.is_finite() || self.alpha <= 0.0 || self.alpha >= 1.0 {
            return Err(Error::invalid("alpha must lie strictly inside (0, 1)"));
        }
        if !self.attack_prob.is_finite() || !(0.0..=1.0).contains(&self.attack_prob) {
            return Err(Error::invalid("attack_prob must lie in [0, 1]"));
        }
        Ok(())
    }

    /// γ1² + γ2², the amplitude of the combined no-attack channel.
    pub fn combined_gain(&self) -> f64 {
        self.gamma1 * self.gamma1 + self.gamma2 * self.gamma2
    }

    /// Variance of the combined noise, (γ1² + γ2²)·σ².
    pub fn sigma2_eq(&self) -> f64 {
        self.combined_gain() * self.sigma2
    }

    pub fn snr_db(&self) -> f64 {
        -10.0 * self.sigma2.log10()
    }
}

/// σ² = 10^(−snr_db/10).
pub fn sigma2_from_snr_db(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// A frame of BPSK symbols, each −1 or +1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    symbols: Vec<i8>,
}

impl Frame {
    /// Wrap raw symbols, checking they are all ±1.
    pub fn from_symbols(symbols: Vec<i8>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::invalid("frame length must be at least 1"));
        }
        if symbols.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::invalid("frame symbols must be -1 or +1"));
        }
        Ok(Frame { symbols })
    }

    pub fn symbols(&self) -> &[i8] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// The attack state of one frame: whether it was attacked and, if so, the
/// ±1 Hadamard mask applied to the vulnerable copy.
///
/// Unattacked frames always carry the all-ones mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlipMask {
    mask: Vec<i8>,
    attacked: bool,
}

impl FlipMask {
    /// The no-attack mask (all ones).
    pub fn clean(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("mask length must be at least 1"));
        }
        Ok(FlipMask {
            mask: vec![1; n],
            attacked: false,
        })
    }

    /// Draw a mask with the attack state forced. An attacked mask has i.i.d.
    /// uniform ±1 entries.
    pub fn forced(n: usize, attacked: bool, rng: &mut Stream) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("mask length must be at least 1"));
        }
        if !attacked {
            return Self::clean(n);
        }
        let mask = (0..n)
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        Ok(FlipMask {
            mask,
            attacked: true,
        })
    }

    pub fn mask(&self) -> &[i8] {
        &self.mask
    }

    pub fn attacked(&self) -> bool {
        self.attacked
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }
}

/// The two received copies of one frame, together with the ground truth used
/// by the Genie detector and by evaluation code.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedPair {
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    pub truth: FlipMask,
    pub frame: Frame,
}

impl ReceivedPair {
    pub fn len(&self) -> usize {
        self.y1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y1.is_empty()
    }
}

/// Output of the combining block, y_c = γ1·y1 + γ2·y2.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedFrame {
    pub yc: Vec<f64>,
}

/// Draw an n-symbol frame, each symbol independently +1 with probability
/// `params.alpha`.
pub fn generate_frame(n: usize, params: &ChannelParams, rng: &mut Stream) -> Result<Frame> {
    if n == 0 {
        return Err(Error::invalid("frame length must be at least 1"));
    }
    let symbols = (0..n)
        .map(|_| {
            if rng.random::<f64>() < params.alpha {
                1
            } else {
                -1
            }
        })
        .collect();
    Ok(Frame { symbols })
}

/// Draw the attack state for one frame: attacked with probability
/// `params.attack_prob`, with an i.i.d. uniform ±1 mask when attacked.
///
/// The attack coin is drawn first, then the mask entries.
pub fn draw_flip_mask(n: usize, params: &ChannelParams, rng: &mut Stream) -> Result<FlipMask> {
    if n == 0 {
        return Err(Error::invalid("mask length must be at least 1"));
    }
    let attacked = rng.random::<f64>() < params.attack_prob;
    FlipMask::forced(n, attacked, rng)
}

/// Push one frame through the channel: y1 = γ1·x + z1, y2 = γ2·(b ∘ x) + z2,
/// with z1 drawn in full before z2.
pub fn transmit(
    frame: Frame,
    mask: FlipMask,
    params: &ChannelParams,
    rng: &mut Stream,
) -> Result<ReceivedPair> {
    if frame.len() != mask.len() {
        return Err(Error::invalid(format!(
            "frame length {} does not match mask length {}",
            frame.len(),
            mask.len()
        )));
    }
    let sigma = params.sigma2.sqrt();
    let y1: Vec<f64> = frame
        .symbols
        .iter()
        .map(|&x| {
            let z: f64 = rng.sample(StandardNormal);
            params.gamma1 * f64::from(x) + sigma * z
        })
        .collect();
    let y2: Vec<f64> = frame
        .symbols
        .iter()
        .zip(mask.mask.iter())
        .map(|(&x, &b)| {
            let z: f64 = rng.sample(StandardNormal);
            params.gamma2 * f64::from(b * x) + sigma * z
        })
        .collect();
    Ok(ReceivedPair {
        y1,
        y2,
        truth: mask,
        frame,
    })
}

/// Combine the two copies, yc[i] = γ1·y1[i] + γ2·y2[i].
pub fn combine(pair: &ReceivedPair, params: &ChannelParams) -> CombinedFrame {
    let yc = pair
        .y1
        .iter()
        .zip(pair.y2.iter())
        .map(|(&a, &b)| params.gamma1 * a + params.gamma2 * b)
        .collect();
    CombinedFrame { yc }
}

/// Simulate one full frame (draw symbols, attack state, noise). `attacked`
/// forces the attack state; `None` draws it with probability `attack_prob`.
pub fn simulate_pair(
    n: usize,
    params: &ChannelParams,
    attacked: Option<bool>,
    rng: &mut Stream,
) -> Result<ReceivedPair> {
    let frame = generate_frame(n, params, rng)?;
    let mask = match attacked {
        Some(a) => FlipMask::forced(n, a, rng)?,
        None => draw_flip_mask(n, params, rng)?,
    };
    transmit(frame, mask, params, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn unit_params(sigma2: f64, alpha: f64) -> ChannelParams {
        ChannelParams::new(1.0, 1.0, sigma2, alpha).unwrap()
    }

    #[test]
    fn params_are_validated() {
        assert!(ChannelParams::new(0.0, 1.0, 1.0, 0.5).is_err());
        assert!(ChannelParams::new(1.0, 0.0, 1.0, 0.5).is_err());
        assert!(ChannelParams::new(1.0, 1.0, 0.0, 0.5).is_err());
        assert!(ChannelParams::new(1.0, 1.0, -1.0, 0.5).is_err());
        assert!(ChannelParams::new(1.0, 1.0, 1.0, 0.0).is_err());
        assert!(ChannelParams::new(1.0, 1.0, 1.0, 1.0).is_err());
        assert!(ChannelParams::with_attack_prob(1.0, 1.0, 1.0, 0.5, 1.5).is_err());
        assert!(ChannelParams::new(-2.0, 0.5, 1.0, 0.5).is_ok());
    }

    #[test]
    fn snr_conversion_matches_definition() {
        assert!((sigma2_from_snr_db(0.0) - 1.0).abs() < 1e-15);
        assert!((sigma2_from_snr_db(10.0) - 0.1).abs() < 1e-15);
        let p = ChannelParams::for_snr_db(5.0).unwrap();
        assert!((p.snr_db() - 5.0).abs() < 1e-12);
        assert!((p.sigma2_eq() - 2.0 * p.sigma2).abs() < 1e-15);
    }

    #[test]
    fn degenerate_alpha_one_forces_all_plus_one() {
        // alpha = 1 violates the params invariant; built directly, tests only.
        let params = ChannelParams {
            gamma1: 1.0,
            gamma2: 1.0,
            sigma2: 1.0,
            alpha: 1.0,
            attack_prob: 0.5,
        };
        let frame = generate_frame(1000, &params, &mut stream(1)).unwrap();
        assert!(frame.symbols().iter().all(|&s| s == 1));
    }

    #[test]
    fn zero_length_frame_is_rejected() {
        let params = unit_params(1.0, 0.5);
        assert!(generate_frame(0, &params, &mut stream(0)).is_err());
        assert!(draw_flip_mask(0, &params, &mut stream(0)).is_err());
    }

    #[test]
    fn frame_symbol_mean_tracks_alpha() {
        let n = 1_000_000;
        // alpha = 0.5: sample mean within a 5-sigma CLT band around 0.
        let frame = generate_frame(n, &unit_params(1.0, 0.5), &mut stream(2)).unwrap();
        let mean: f64 =
            frame.symbols().iter().map(|&s| f64::from(s)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "sample mean {mean} outside [-0.01, 0.01]");

        // alpha = 0.9: fraction of +1 within the CLT band [0.897, 0.903].
        let frame = generate_frame(n, &unit_params(1.0, 0.9), &mut stream(3)).unwrap();
        let frac =
            frame.symbols().iter().filter(|&&s| s == 1).count() as f64 / n as f64;
        assert!(
            (0.897..=0.903).contains(&frac),
            "fraction of +1 was {frac}"
        );
    }

    #[test]
    fn flip_mask_honours_attack_probability() {
        let n = 1_000_000;
        let never = ChannelParams::with_attack_prob(1.0, 1.0, 1.0, 0.5, 0.0).unwrap();
        let mask = draw_flip_mask(4, &never, &mut stream(4)).unwrap();
        assert!(!mask.attacked());
        assert!(mask.mask().iter().all(|&b| b == 1));

        let always = ChannelParams::with_attack_prob(1.0, 1.0, 1.0, 0.5, 1.0).unwrap();
        let mask = draw_flip_mask(n, &always, &mut stream(5)).unwrap();
        assert!(mask.attacked());
        let frac_flipped =
            mask.mask().iter().filter(|&&b| b == -1).count() as f64 / n as f64;
        assert!(
            (0.497..=0.503).contains(&frac_flipped),
            "flipped fraction was {frac_flipped}"
        );

        let fair = unit_params(1.0, 0.5);
        let mut rng = stream(6);
        let frames = 100_000;
        let attacked = (0..frames)
            .filter(|_| draw_flip_mask(1, &fair, &mut rng).unwrap().attacked())
            .count();
        let frac = attacked as f64 / frames as f64;
        assert!(
            (0.49..=0.51).contains(&frac),
            "attacked fraction was {frac}"
        );
    }

    #[test]
    fn transmit_is_noiseless_in_the_small_sigma_limit() {
        let params = ChannelParams::new(1.0, 1.0, 1e-12, 0.5).unwrap();
        let frame = Frame::from_symbols(vec![1, -1]).unwrap();
        let clean = FlipMask::clean(2).unwrap();
        let pair = transmit(frame.clone(), clean, &params, &mut stream(7)).unwrap();
        assert!((pair.y1[0] - 1.0).abs() < 1e-4 && (pair.y1[1] + 1.0).abs() < 1e-4);
        assert!((pair.y2[0] - 1.0).abs() < 1e-4 && (pair.y2[1] + 1.0).abs() < 1e-4);

        let flipping = FlipMask {
            mask: vec![-1, 1],
            attacked: true,
        };
        let pair = transmit(frame, flipping, &params, &mut stream(8)).unwrap();
        assert!((pair.y2[0] + 1.0).abs() < 1e-4 && (pair.y2[1] + 1.0).abs() < 1e-4);
    }

    #[test]
    fn transmit_rejects_length_mismatch() {
        let params = unit_params(1.0, 0.5);
        let frame = Frame::from_symbols(vec![1, 1]).unwrap();
        let mask = FlipMask::clean(3).unwrap();
        assert!(matches!(
            transmit(frame, mask, &params, &mut stream(0)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn received_copy_statistics_match_the_model() {
        let n = 1_000_000;
        let params = unit_params(1.0, 0.5);
        let frame = Frame {
            symbols: vec![1; n],
        };
        let clean = FlipMask::clean(n).unwrap();
        let pair = transmit(frame, clean, &params, &mut stream(9)).unwrap();
        let mean = pair.y1.iter().sum::<f64>() / n as f64;
        let var = pair.y1.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n as f64;
        assert!((0.995..=1.005).contains(&mean), "y1 mean was {mean}");
        assert!((0.99..=1.01).contains(&var), "y1 variance was {var}");
    }

    #[test]
    fn noise_on_the_two_copies_is_uncorrelated() {
        let n = 1_000_000;
        let params = unit_params(1.0, 0.5);
        let mut rng = stream(10);
        let pair = simulate_pair(n, &params, Some(true), &mut rng).unwrap();
        let z1: Vec<f64> = pair
            .y1
            .iter()
            .zip(pair.frame.symbols())
            .map(|(&y, &x)| y - params.gamma1 * f64::from(x))
            .collect();
        let z2: Vec<f64> = pair
            .y2
            .iter()
            .zip(pair.frame.symbols().iter().zip(pair.truth.mask()))
            .map(|(&y, (&x, &b))| y - params.gamma2 * f64::from(b * x))
            .collect();
        let var1 = z1.iter().map(|z| z * z).sum::<f64>() / n as f64;
        let var2 = z2.iter().map(|z| z * z).sum::<f64>() / n as f64;
        let corr = z1.iter().zip(&z2).map(|(a, b)| a * b).sum::<f64>() / n as f64
            / (var1 * var2).sqrt();
        // 5-sigma bands: sample variance sd ~ sqrt(2/n), correlation sd ~ 1/sqrt(n).
        assert!((var1 - 1.0).abs() < 5.0 * (2.0 / n as f64).sqrt());
        assert!((var2 - 1.0).abs() < 5.0 * (2.0 / n as f64).sqrt());
        assert!(corr.abs() < 5.0 / (n as f64).sqrt(), "correlation {corr}");
    }

    #[test]
    fn combine_matches_the_noiseless_identities() {
        let params = ChannelParams::new(1.0, 1.0, 1e-12, 0.5).unwrap();
        let frame = Frame::from_symbols(vec![1]).unwrap();

        let pair = transmit(
            frame.clone(),
            FlipMask::clean(1).unwrap(),
            &params,
            &mut stream(11),
        )
        .unwrap();
        let yc = combine(&pair, &params);
        assert!((yc.yc[0] - 2.0).abs() < 1e-4, "no attack: yc = (γ1²+γ2²)x");

        let flipped = FlipMask {
            mask: vec![-1],
            attacked: true,
        };
        let pair = transmit(frame, flipped, &params, &mut stream(12)).unwrap();
        let yc = combine(&pair, &params);
        assert!(yc.yc[0].abs() < 1e-4, "flipped: yc = (γ1²−γ2²)x = 0");
    }

    #[test]
    fn combined_noise_variance_is_sigma2_eq() {
        let n = 1_000_000;
        let params = unit_params(1.0, 0.5);
        let mut rng = stream(13);
        let pair = simulate_pair(n, &params, Some(false), &mut rng).unwrap();
        let yc = combine(&pair, &params);
        let gain = params.combined_gain();
        let resid: Vec<f64> = yc
            .yc
            .iter()
            .zip(pair.frame.symbols())
            .map(|(&y, &x)| y - gain * f64::from(x))
            .collect();
        let mean = resid.iter().sum::<f64>() / n as f64;
        let var = resid.iter().map(|z| (z - mean) * (z - mean)).sum::<f64>() / n as f64;
        assert!(
            (1.97..=2.03).contains(&var),
            "combined residual variance was {var}"
        );
        assert!(mean.abs() < 5.0 * (2.0f64 / n as f64).sqrt());
    }

    #[test]
    fn combine_is_linear_in_the_received_pair() {
        let params = ChannelParams::new(0.7, -1.3, 0.5, 0.3).unwrap();
        let mut rng = stream(14);
        let pair = simulate_pair(64, &params, None, &mut rng).unwrap();
        let base = combine(&pair, &params);
        for scale in [0.5, 2.0, -3.25] {
            let scaled = ReceivedPair {
                y1: pair.y1.iter().map(|y| scale * y).collect(),
                y2: pair.y2.iter().map(|y| scale * y).collect(),
                truth: pair.truth.clone(),
                frame: pair.frame.clone(),
            };
            let yc = combine(&scaled, &params);
            for (a, b) in yc.yc.iter().zip(&base.yc) {
                let want = scale * b;
                assert!(
                    (a - want).abs() <= 1e-12 * want.abs().max(1.0),
                    "combine not linear: {a} vs {want}"
                );
            }
        }
    }
}
