//! Attack detectors: the Genie oracle, a k-nearest-neighbour
//! mutual-information detector, and a neural classifier, each mapping one
//! received pair to a binary attack decision plus its raw score.

pub mod ksg;
pub mod mlp;

pub use ksg::ksg_mi_estimate;
pub use mlp::{batch_loss, batch_loss_and_grad, mlp_train, MlpModel, TrainConfig, TrainOutcome};

use crate::channel::{FlipMask, ReceivedPair};
use crate::error::{Error, Result};

/// Standard miss-detection target the practical detectors are calibrated to.
pub const MD_TARGET: f64 = 1e-3;

/// One detector verdict: the declared attack flag and the raw statistic it
/// was derived from (an MI estimate in nats, or a classifier probability).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorDecision {
    pub attack: bool,
    pub score: f64,
}

/// A per-frame attack detector. Implementations are immutable once built, so
/// decisions are deterministic and instances can be shared across threads.
pub trait Detector: Sync {
    fn name(&self) -> &str;
    fn detect(&self, pair: &ReceivedPair) -> DetectorDecision;
}

/// Oracle detector: reads the ground-truth attack flag.
///
/// Its miss-detection and false-alarm rates are exactly zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct GenieDetector;

/// Decision of the Genie detector for a known attack state.
pub fn genie_detect(truth: &FlipMask) -> DetectorDecision {
    DetectorDecision {
        attack: truth.attacked(),
        score: f64::from(u8::from(truth.attacked())),
    }
}

impl Detector for GenieDetector {
    fn name(&self) -> &str {
        "genie"
    }

    fn detect(&self, pair: &ReceivedPair) -> DetectorDecision {
        genie_detect(&pair.truth)
    }
}

/// Which side of the threshold means "attack".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdDirection {
    /// Low score means attack (e.g. MI estimate collapses under attack).
    AttackIfLow,
    /// High score means attack (e.g. classifier attack probability).
    AttackIfHigh,
}

/// Pick a decision threshold from scores observed on attacked frames so that
/// the miss-detection rate is bounded by `target_md`.
///
/// Ties at the threshold are resolved in favour of declaring an attack, i.e.
/// a miss requires the score to fall strictly on the "clean" side. For
/// `AttackIfLow` the threshold is the ceil-indexed empirical
/// (1−target)-quantile; for `AttackIfHigh`, the floor-indexed
/// target-quantile.
pub fn calibrate_threshold(
    scores_under_attack: &[f64],
    target_md: f64,
    direction: ThresholdDirection,
) -> Result<f64> {
    if scores_under_attack.is_empty() {
        return Err(Error::invalid("no calibration scores"));
    }
    if !(target_md > 0.0 && target_md < 1.0) {
        return Err(Error::invalid("target_md must lie strictly inside (0, 1)"));
    }
    if scores_under_attack.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("calibration scores must be finite"));
    }
    let mut sorted = scores_under_attack.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let idx = match direction {
        ThresholdDirection::AttackIfLow => {
            (((1.0 - target_md) * n as f64).ceil() as usize).min(n - 1)
        }
        ThresholdDirection::AttackIfHigh => ((target_md * n as f64).floor() as usize).min(n - 1),
    };
    Ok(sorted[idx])
}

/// Configuration of the kNN mutual-information detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsgConfig {
    /// Neighbour count of the estimator.
    pub k: usize,
    /// Calibrated decision threshold in nats; attack iff score <= threshold.
    pub threshold: f64,
    /// Number of leading samples of each frame fed to the estimator.
    pub n_prime: usize,
}

impl KsgConfig {
    pub fn new(k: usize, threshold: f64, n_prime: usize) -> Result<Self> {
        if n_prime < 8 {
            return Err(Error::invalid("n_prime must be at least 8"));
        }
        if k == 0 || k >= n_prime {
            return Err(Error::invalid("need 1 <= k < n_prime"));
        }
        if !threshold.is_finite() && !threshold.is_infinite() {
            return Err(Error::invalid("threshold must not be NaN"));
        }
        Ok(KsgConfig {
            k,
            threshold,
            n_prime,
        })
    }
}

/// Detector that estimates the mutual information between the two received
/// copies over the first n′ samples; a clean frame shows a clearly positive
/// dependence while an attacked one does not, so a low estimate means attack.
#[derive(Debug, Clone, Copy)]
pub struct KnnDetector {
    cfg: KsgConfig,
}

impl KnnDetector {
    pub fn new(cfg: KsgConfig) -> Self {
        KnnDetector { cfg }
    }

    pub fn config(&self) -> &KsgConfig {
        &self.cfg
    }

    /// Raw MI score of one pair; errors on frames shorter than n′.
    pub fn score_pair(&self, pair: &ReceivedPair) -> Result<f64> {
        if pair.len() < self.cfg.n_prime {
            return Err(Error::invalid(format!(
                "pair length {} shorter than detector prefix {}",
                pair.len(),
                self.cfg.n_prime
            )));
        }
        ksg_mi_estimate(
            &pair.y1[..self.cfg.n_prime],
            &pair.y2[..self.cfg.n_prime],
            self.cfg.k,
        )
    }
}

/// Decision of the kNN detector on one received pair.
pub fn knn_detect(pair: &ReceivedPair, cfg: &KsgConfig) -> Result<DetectorDecision> {
    let score = KnnDetector::new(*cfg).score_pair(pair)?;
    Ok(DetectorDecision {
        attack: score <= cfg.threshold,
        score,
    })
}

impl Detector for KnnDetector {
    fn name(&self) -> &str {
        "knn"
    }

    fn detect(&self, pair: &ReceivedPair) -> DetectorDecision {
        knn_detect(pair, &self.cfg).expect("pair shorter than configured n_prime")
    }
}

/// Neural detector: classifier probability of attack, thresholded from
/// above (attack iff score >= threshold).
#[derive(Debug, Clone)]
pub struct NnDetector {
    model: MlpModel,
}

impl NnDetector {
    pub fn new(model: MlpModel) -> Self {
        NnDetector { model }
    }

    pub fn model(&self) -> &MlpModel {
        &self.model
    }

    pub fn model_mut(&mut self) -> &mut MlpModel {
        &mut self.model
    }
}

impl Detector for NnDetector {
    fn name(&self) -> &str {
        "nn"
    }

    fn detect(&self, pair: &ReceivedPair) -> DetectorDecision {
        let score = self
            .model
            .score_pair(pair)
            .expect("pair shorter than the model input");
        DetectorDecision {
            attack: score >= self.model.threshold,
            score,
        }
    }
}
