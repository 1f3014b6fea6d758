//! Monte-Carlo evaluation: detector operating points with confidence
//! intervals, per-codeword performance profiles with μ statistics, and the
//! (SNR, n′, detector) sweep behind the rate tables.
//!
//! Sweep cells and profile codewords are independent jobs; each derives its
//! own seed from the experiment seed and its coordinates, so results are
//! identical regardless of thread count or scheduling order.

use rayon::prelude::*;

use crate::channel::{simulate_pair, sigma2_from_snr_db, ChannelParams};
use crate::detectors::{
    calibrate_threshold, mlp_train, Detector, GenieDetector, KnnDetector, KsgConfig, NnDetector,
    ThresholdDirection, TrainConfig,
};
use crate::error::{Error, Result};
use crate::infotheory::{dominance_condition, genie_rate, RatePair};
use crate::rng::{derive_seed, substream, Stream};

/// Wilson score interval for a binomial proportion at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Empirical operating point of a detector with 95% Wilson intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorMetrics {
    pub p_md: f64,
    pub p_fa: f64,
    pub trials_attacked: u64,
    pub trials_clean: u64,
    pub p_md_ci: (f64, f64),
    pub p_fa_ci: (f64, f64),
}

impl DetectorMetrics {
    pub fn rates(&self) -> RatePair {
        RatePair {
            p_md: self.p_md,
            p_fa: self.p_fa,
        }
    }
}

/// Simulate `trials_per_class` attacked and clean frames of length `n_prime`
/// and measure the detector's miss-detection and false-alarm rates.
pub fn measure_rates(
    detector: &dyn Detector,
    params: &ChannelParams,
    n_prime: usize,
    trials_per_class: usize,
    rng: &mut Stream,
) -> Result<DetectorMetrics> {
    params.validate()?;
    if n_prime == 0 {
        return Err(Error::invalid("n_prime must be at least 1"));
    }
    if trials_per_class == 0 {
        return Err(Error::invalid("need at least one trial per class"));
    }
    let mut missed = 0u64;
    for _ in 0..trials_per_class {
        let pair = simulate_pair(n_prime, params, Some(true), rng)?;
        if !detector.detect(&pair).attack {
            missed += 1;
        }
    }
    let mut false_alarms = 0u64;
    for _ in 0..trials_per_class {
        let pair = simulate_pair(n_prime, params, Some(false), rng)?;
        if detector.detect(&pair).attack {
            false_alarms += 1;
        }
    }
    let trials = trials_per_class as u64;
    Ok(DetectorMetrics {
        p_md: missed as f64 / trials as f64,
        p_fa: false_alarms as f64 / trials as f64,
        trials_attacked: trials,
        trials_clean: trials,
        p_md_ci: wilson_interval(missed, trials, 1.96),
        p_fa_ci: wilson_interval(false_alarms, trials, 1.96),
    })
}

/// Conditional operating point of one codeword.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileEntry {
    pub codeword_id: usize,
    pub p_md_cond: f64,
    pub p_fa_cond: f64,
    pub trials_per_class: usize,
}

impl ProfileEntry {
    /// Smallest μ whose region contains this entry; the degenerate corner
    /// (0, 1) lies inside every region and maps to 0.
    pub fn mu_point(&self) -> f64 {
        if self.p_md_cond == 0.0 {
            0.0
        } else {
            self.p_md_cond / (self.p_md_cond + 1.0 - self.p_fa_cond)
        }
    }
}

/// Sampled per-codeword conditional rates of one detector, with the μ
/// statistics that decide whether the first-order rate approximation applies.
#[derive(Debug, Clone)]
pub struct PerformanceProfile {
    pub entries: Vec<ProfileEntry>,
    pub mu_max: f64,
    /// 99th percentile of the per-codeword μ values (ceil-indexed): the
    /// headline accuracy figure. `mu_max` is diagnostic.
    pub mu_q99: f64,
}

impl PerformanceProfile {
    pub fn from_entries(entries: Vec<ProfileEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("profile needs at least one entry"));
        }
        let mut mus: Vec<f64> = entries.iter().map(ProfileEntry::mu_point).collect();
        mus.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = mus.len();
        let q99_idx = ((0.99 * n as f64).ceil() as usize).clamp(1, n) - 1;
        Ok(PerformanceProfile {
            mu_max: mus[n - 1],
            mu_q99: mus[q99_idx],
            entries,
        })
    }

    /// Fraction of entries inside the μ-region p_md ≤ (μ/(1−μ))·(1−p_fa).
    pub fn fraction_in_r_mu(&self, mu: f64) -> Result<f64> {
        if !(mu > 0.0 && mu < 1.0) {
            return Err(Error::invalid("mu must lie strictly inside (0, 1)"));
        }
        let slope = mu / (1.0 - mu);
        let inside = self
            .entries
            .iter()
            .filter(|e| e.p_md_cond <= slope * (1.0 - e.p_fa_cond))
            .count();
        Ok(inside as f64 / self.entries.len() as f64)
    }
}

/// Estimate conditional rate pairs for randomly drawn codewords held fixed
/// across their trials. Codewords are processed in parallel under seeds
/// derived from a master seed drawn once from `rng`.
pub fn sample_profile(
    detector: &dyn Detector,
    params: &ChannelParams,
    n_prime: usize,
    num_codewords: usize,
    trials_per_class: usize,
    rng: &mut Stream,
) -> Result<PerformanceProfile> {
    params.validate()?;
    if n_prime == 0 {
        return Err(Error::invalid("n_prime must be at least 1"));
    }
    if num_codewords == 0 || trials_per_class == 0 {
        return Err(Error::invalid("need at least one codeword and one trial"));
    }
    use rand::Rng;
    let master: u64 = rng.random();

    let entries: Result<Vec<ProfileEntry>> = (0..num_codewords)
        .into_par_iter()
        .map(|codeword_id| {
            let mut crng = substream(derive_seed(master, "profile"), codeword_id as u64);
            let frame = crate::channel::generate_frame(n_prime, params, &mut crng)?;
            let mut missed = 0usize;
            let mut false_alarms = 0usize;
            for _ in 0..trials_per_class {
                let mask = crate::channel::FlipMask::forced(n_prime, true, &mut crng)?;
                let pair = crate::channel::transmit(frame.clone(), mask, params, &mut crng)?;
                if !detector.detect(&pair).attack {
                    missed += 1;
                }
            }
            for _ in 0..trials_per_class {
                let mask = crate::channel::FlipMask::forced(n_prime, false, &mut crng)?;
                let pair = crate::channel::transmit(frame.clone(), mask, params, &mut crng)?;
                if detector.detect(&pair).attack {
                    false_alarms += 1;
                }
            }
            Ok(ProfileEntry {
                codeword_id,
                p_md_cond: missed as f64 / trials_per_class as f64,
                p_fa_cond: false_alarms as f64 / trials_per_class as f64,
                trials_per_class,
            })
        })
        .collect();
    PerformanceProfile::from_entries(entries?)
}

/// The detectors a sweep can exercise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorKind {
    Genie,
    Knn,
    Nn,
}

impl DetectorKind {
    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Genie => "genie",
            DetectorKind::Knn => "knn",
            DetectorKind::Nn => "nn",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "genie" => Ok(DetectorKind::Genie),
            "knn" => Ok(DetectorKind::Knn),
            "nn" => Ok(DetectorKind::Nn),
            other => Err(Error::invalid(format!(
                "unknown detector '{other}' (expected genie, knn or nn)"
            ))),
        }
    }
}

/// Configuration of a full (SNR × n′ × detector) sweep.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub gamma1: f64,
    pub gamma2: f64,
    pub alpha: f64,
    pub attack_prob: f64,
    pub snr_db: Vec<f64>,
    pub n_prime: Vec<usize>,
    pub detectors: Vec<DetectorKind>,
    /// Validation trials per class for the rate estimates.
    pub trials_per_class: usize,
    /// Training frames for the neural detector (split 50/50 across classes).
    pub train_frames: usize,
    /// Attacked frames used to calibrate decision thresholds.
    pub calib_frames: usize,
    pub knn_k: usize,
    pub target_md: f64,
    pub train: TrainConfig,
    pub seed: u64,
    /// When non-zero, sample a per-cell performance profile of this many
    /// codewords to report mu_q99.
    pub profile_codewords: usize,
    pub profile_trials: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            gamma1: 1.0,
            gamma2: 1.0,
            alpha: 0.5,
            attack_prob: 0.5,
            snr_db: vec![0.0, 5.0],
            n_prime: (1..=10).map(|i| 10 * i).collect(),
            detectors: vec![DetectorKind::Knn, DetectorKind::Nn],
            trials_per_class: 100_000,
            train_frames: 100_000,
            calib_frames: 100_000,
            knn_k: 3,
            target_md: 1e-3,
            train: TrainConfig::default(),
            seed: 0,
            profile_codewords: 0,
            profile_trials: 1000,
        }
    }
}

impl SweepConfig {
    pub fn cell_count(&self) -> usize {
        self.snr_db.len() * self.n_prime.len() * self.detectors.len()
    }

    fn params_at(&self, snr_db: f64) -> Result<ChannelParams> {
        ChannelParams::with_attack_prob(
            self.gamma1,
            self.gamma2,
            sigma2_from_snr_db(snr_db),
            self.alpha,
            self.attack_prob,
        )
    }
}

/// One sweep cell. Rates and rate columns are NaN when `status != "ok"`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub n_prime: usize,
    pub detector: String,
    pub p_md: f64,
    pub p_fa: f64,
    pub approx_per_symbol: f64,
    pub genie_per_symbol: f64,
    pub baseline_per_symbol: f64,
    pub dominance_margin: f64,
    pub mu_q99: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

/// The first-order rate recomputed from table columns; kept as the single
/// definition so rows are bit-exactly reproducible from their own fields.
pub fn approx_per_symbol_from_columns(
    genie_per_symbol: f64,
    baseline_per_symbol: f64,
    p_fa: f64,
) -> f64 {
    let i_combined = 2.0 * genie_per_symbol - baseline_per_symbol;
    0.5 * i_combined * (1.0 - p_fa) + 0.5 * baseline_per_symbol * (1.0 + p_fa)
}

/// Run every (SNR, n′, detector) cell: train or calibrate the detector,
/// measure its operating point, and fill in the rate columns. Cells run in
/// parallel with per-cell seeds; per-cell failures are recorded in the row
/// status and do not abort the sweep. Row order is the nested iteration
/// order snr → n′ → detector.
pub fn run_sweep(cfg: &SweepConfig) -> SweepResult {
    let cells: Vec<(f64, usize, DetectorKind)> = cfg
        .snr_db
        .iter()
        .flat_map(|&snr| {
            cfg.n_prime.iter().flat_map(move |&np| {
                cfg.detectors.iter().map(move |&det| (snr, np, det))
            })
        })
        .collect();

    let rows: Vec<SweepRow> = cells
        .into_par_iter()
        .map(|(snr, np, det)| match run_cell(cfg, snr, np, det) {
            Ok(row) => row,
            Err(err) => SweepRow {
                snr_db: snr,
                n_prime: np,
                detector: det.name().to_string(),
                p_md: f64::NAN,
                p_fa: f64::NAN,
                approx_per_symbol: f64::NAN,
                genie_per_symbol: f64::NAN,
                baseline_per_symbol: f64::NAN,
                dominance_margin: f64::NAN,
                mu_q99: None,
                status: err.to_string().replace([',', '\n'], ";"),
            },
        })
        .collect();

    SweepResult { rows }
}

fn cell_seed(cfg: &SweepConfig, snr_db: f64, n_prime: usize, kind: DetectorKind) -> u64 {
    derive_seed(
        cfg.seed,
        &format!(
            "cell:snr={:016x}:np={}:det={}",
            snr_db.to_bits(),
            n_prime,
            kind.name()
        ),
    )
}

// Sub-stream ids within one cell.
const STREAM_TRAIN: u64 = 0;
const STREAM_CALIB: u64 = 1;
const STREAM_VALIDATE: u64 = 2;
const STREAM_PROFILE: u64 = 3;

fn run_cell(
    cfg: &SweepConfig,
    snr_db: f64,
    n_prime: usize,
    kind: DetectorKind,
) -> Result<SweepRow> {
    let params = cfg.params_at(snr_db)?;
    let seed = cell_seed(cfg, snr_db, n_prime, kind);

    let detector: Box<dyn Detector> = match kind {
        DetectorKind::Genie => Box::new(GenieDetector),
        DetectorKind::Knn => {
            Box::new(build_knn(cfg, &params, n_prime, seed)?)
        }
        DetectorKind::Nn => Box::new(build_nn(cfg, &params, n_prime, seed)?),
    };

    let mut vrng = substream(seed, STREAM_VALIDATE);
    let metrics = measure_rates(
        detector.as_ref(),
        &params,
        n_prime,
        cfg.trials_per_class,
        &mut vrng,
    )?;

    let report = genie_rate(&params, n_prime)?;
    let approx = approx_per_symbol_from_columns(
        report.genie_per_symbol,
        report.baseline_per_symbol,
        metrics.p_fa,
    );
    let dominance = dominance_condition(&params, n_prime);

    let mu_q99 = if cfg.profile_codewords > 0 {
        let mut prng = substream(seed, STREAM_PROFILE);
        let profile = sample_profile(
            detector.as_ref(),
            &params,
            n_prime,
            cfg.profile_codewords,
            cfg.profile_trials,
            &mut prng,
        )?;
        Some(profile.mu_q99)
    } else {
        None
    };

    Ok(SweepRow {
        snr_db,
        n_prime,
        detector: kind.name().to_string(),
        p_md: metrics.p_md,
        p_fa: metrics.p_fa,
        approx_per_symbol: approx,
        genie_per_symbol: report.genie_per_symbol,
        baseline_per_symbol: report.baseline_per_symbol,
        dominance_margin: dominance.margin,
        mu_q99,
        status: "ok".to_string(),
    })
}

/// Calibrate a kNN detector for one cell from attacked frames only.
pub fn build_knn(
    cfg: &SweepConfig,
    params: &ChannelParams,
    n_prime: usize,
    seed: u64,
) -> Result<KnnDetector> {
    if cfg.calib_frames == 0 {
        return Err(Error::invalid("calib_frames must be positive"));
    }
    let probe = KnnDetector::new(KsgConfig::new(cfg.knn_k, 0.0, n_prime)?);
    let mut crng = substream(seed, STREAM_CALIB);
    let mut scores = Vec::with_capacity(cfg.calib_frames);
    for _ in 0..cfg.calib_frames {
        let pair = simulate_pair(n_prime, params, Some(true), &mut crng)?;
        scores.push(probe.score_pair(&pair)?);
    }
    let threshold = calibrate_threshold(&scores, cfg.target_md, ThresholdDirection::AttackIfLow)?;
    Ok(KnnDetector::new(KsgConfig::new(
        cfg.knn_k, threshold, n_prime,
    )?))
}

/// Train a neural detector for one cell and calibrate its threshold on a
/// disjoint partition of attacked frames.
pub fn build_nn(
    cfg: &SweepConfig,
    params: &ChannelParams,
    n_prime: usize,
    seed: u64,
) -> Result<NnDetector> {
    if cfg.train_frames < 2 {
        return Err(Error::invalid("train_frames must be at least 2"));
    }
    let mut trng = substream(seed, STREAM_TRAIN);
    let half = cfg.train_frames / 2;
    let mut pairs = Vec::with_capacity(cfg.train_frames);
    for i in 0..cfg.train_frames {
        pairs.push(simulate_pair(n_prime, params, Some(i < half), &mut trng)?);
    }
    let train_cfg = TrainConfig {
        train_frames: cfg.train_frames,
        seed: derive_seed(seed, "mlp-init"),
        ..cfg.train
    };
    let mut model = mlp_train(&pairs, n_prime, &train_cfg)?.model;

    // Threshold hygiene: recalibrate on a partition the trainer never saw.
    if cfg.calib_frames > 0 {
        let mut crng = substream(seed, STREAM_CALIB);
        let mut scores = Vec::with_capacity(cfg.calib_frames);
        for _ in 0..cfg.calib_frames {
            let pair = simulate_pair(n_prime, params, Some(true), &mut crng)?;
            scores.push(model.score_pair(&pair)?);
        }
        model.threshold =
            calibrate_threshold(&scores, cfg.target_md, ThresholdDirection::AttackIfHigh)?;
    }
    Ok(NnDetector::new(model))
}
