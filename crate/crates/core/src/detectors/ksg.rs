//! Kraskov–Stögbauer–Grassberger (variant 1) mutual-information estimator
//! for two scalar samples:
//!
//!   I ≈ ψ(k) + ψ(N) − ⟨ψ(n_x + 1) + ψ(n_y + 1)⟩,
//!
//! where the k-th nearest neighbour of each point is found in the max-norm on
//! the joint space and n_x, n_y count marginal neighbours strictly inside
//! that distance. Estimates are in nats and may be slightly negative on
//! independent data; they are deliberately not clamped.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::stream;

/// Seed of the deterministic jitter stream used to break exact duplicates.
const JITTER_SEED: u64 = 0x4b53_4731;
/// Relative jitter magnitude (scaled by the data range).
const JITTER_SCALE: f64 = 1e-10;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Digamma at a positive integer, ψ(m) = −γ + Σ_{j<m} 1/j, via a harmonic
/// prefix table shared across all lookups of one estimate.
struct DigammaTable {
    harmonic: Vec<f64>,
}

impl DigammaTable {
    fn up_to(max_arg: usize) -> Self {
        let mut harmonic = vec![0.0; max_arg];
        for j in 1..max_arg {
            harmonic[j] = harmonic[j - 1] + 1.0 / j as f64;
        }
        DigammaTable { harmonic }
    }

    fn psi(&self, m: usize) -> f64 {
        debug_assert!(m >= 1 && m <= self.harmonic.len());
        self.harmonic[m - 1] - EULER_GAMMA
    }
}

/// KSG-1 estimate of I(x; y) in nats from paired samples.
///
/// Marginals are standardised to zero mean and unit variance before the
/// neighbour search, so the estimate is invariant to affine rescaling of
/// either coordinate. Exact duplicate points in the joint space make the
/// k-th neighbour distance zero; when that happens the data is perturbed
/// once with deterministic jitter of magnitude 1e-10 times the
/// per-coordinate range (drawn from a fixed-seed stream) and the estimate
/// recomputed.
pub fn ksg_mi_estimate(xs: &[f64], ys: &[f64], k: usize) -> Result<f64> {
    let n = xs.len();
    if ys.len() != n {
        return Err(Error::invalid("sample vectors must have equal length"));
    }
    if n < 8 {
        return Err(Error::invalid("need at least 8 samples"));
    }
    if k == 0 || k >= n {
        return Err(Error::invalid("need 1 <= k < sample count"));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::invalid("samples must be finite"));
    }

    let xs = standardised(xs);
    let ys = standardised(ys);
    match ksg_pass(&xs, &ys, k) {
        Some(mi) => Ok(mi),
        None => {
            let (jx, jy) = jittered(&xs, &ys);
            ksg_pass(&jx, &jy, k).ok_or_else(|| {
                Error::numeric("ksg estimator", "duplicate points survived jitter")
            })
        }
    }
}

fn standardised(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = if var > 0.0 { var.sqrt() } else { 1.0 };
    v.iter().map(|x| (x - mean) / std).collect()
}

/// One estimation pass; `None` when a zero k-th neighbour distance is hit.
fn ksg_pass(xs: &[f64], ys: &[f64], k: usize) -> Option<f64> {
    let n = xs.len();
    let table = DigammaTable::up_to(n + 1);
    let mut acc = 0.0;
    let mut knn = vec![f64::INFINITY; k];
    for i in 0..n {
        knn.fill(f64::INFINITY);
        for j in 0..n {
            if j == i {
                continue;
            }
            let d = (xs[i] - xs[j]).abs().max((ys[i] - ys[j]).abs());
            if d < knn[k - 1] {
                // Insertion into the running k smallest.
                let mut pos = k - 1;
                while pos > 0 && knn[pos - 1] > d {
                    knn[pos] = knn[pos - 1];
                    pos -= 1;
                }
                knn[pos] = d;
            }
        }
        let eps = knn[k - 1];
        if eps == 0.0 {
            return None;
        }
        let mut nx = 0usize;
        let mut ny = 0usize;
        for j in 0..n {
            if j == i {
                continue;
            }
            if (xs[i] - xs[j]).abs() < eps {
                nx += 1;
            }
            if (ys[i] - ys[j]).abs() < eps {
                ny += 1;
            }
        }
        acc += table.psi(nx + 1) + table.psi(ny + 1);
    }
    Some(table.psi(k) + table.psi(n) - acc / n as f64)
}

fn jittered(xs: &[f64], ys: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut rng = stream(JITTER_SEED);
    let scale = |v: &[f64]| {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &x in v {
            lo = lo.min(x);
            hi = hi.max(x);
        }
        let range = hi - lo;
        if range > 0.0 {
            range
        } else {
            hi.abs().max(1.0)
        }
    };
    let sx = scale(xs) * JITTER_SCALE;
    let sy = scale(ys) * JITTER_SCALE;
    let jx = xs
        .iter()
        .map(|&x| x + sx * (2.0 * rng.random::<f64>() - 1.0))
        .collect();
    let jy = ys
        .iter()
        .map(|&y| y + sy * (2.0 * rng.random::<f64>() - 1.0))
        .collect();
    (jx, jy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn correlated_gaussians(n: usize, rho: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = stream(seed);
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        let tail = (1.0 - rho * rho).sqrt();
        for _ in 0..n {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            xs.push(a);
            ys.push(rho * a + tail * b);
        }
        (xs, ys)
    }

    #[test]
    fn digamma_table_matches_recurrence() {
        let t = DigammaTable::up_to(16);
        assert!((t.psi(1) + EULER_GAMMA).abs() < 1e-15);
        assert!((t.psi(2) - (1.0 - EULER_GAMMA)).abs() < 1e-15);
        assert!((t.psi(5) - (t.psi(4) + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn independent_data_scores_near_zero() {
        let (xs, _) = correlated_gaussians(2000, 0.0, 31);
        let (ys, _) = correlated_gaussians(2000, 0.0, 32);
        let mi = ksg_mi_estimate(&xs, &ys, 3).unwrap();
        assert!(mi.abs() <= 0.05, "estimate on independent data: {mi}");
    }

    #[test]
    fn correlated_data_matches_the_gaussian_closed_form() {
        let rho: f64 = 0.9;
        let expected = -0.5 * (1.0 - rho * rho).ln();
        let (xs, ys) = correlated_gaussians(2000, rho, 33);
        let mi = ksg_mi_estimate(&xs, &ys, 3).unwrap();
        assert!(
            (mi - expected).abs() <= 0.1,
            "estimate {mi} vs closed form {expected}"
        );
    }

    #[test]
    fn identical_coordinates_saturate_the_estimator() {
        let (xs, _) = correlated_gaussians(2000, 0.0, 34);
        let mi = ksg_mi_estimate(&xs, &xs, 3).unwrap();
        assert!(mi >= 2.0, "estimate on y = x: {mi}");
    }

    #[test]
    fn duplicate_points_take_the_jitter_path() {
        // 50 copies of each of 8 values: every k-th neighbour distance is 0.
        let xs: Vec<f64> = (0..400).map(|i| f64::from(i % 8)).collect();
        let ys = xs.clone();
        let mi = ksg_mi_estimate(&xs, &ys, 3).unwrap();
        assert!(mi.is_finite());
        // Deterministic: the jitter stream is fixed.
        let again = ksg_mi_estimate(&xs, &ys, 3).unwrap();
        assert_eq!(mi, again);
    }

    #[test]
    fn affine_rescaling_of_one_coordinate_barely_moves_the_estimate() {
        let (xs, ys) = correlated_gaussians(2000, 0.6, 35);
        let base = ksg_mi_estimate(&xs, &ys, 3).unwrap();
        let scaled: Vec<f64> = ys.iter().map(|y| 2.0 * y + 1.0).collect();
        let moved = ksg_mi_estimate(&xs, &scaled, 3).unwrap();
        assert!(
            (base - moved).abs() <= 0.02,
            "estimate moved from {base} to {moved}"
        );
    }

    #[test]
    fn input_validation() {
        let v = vec![0.0; 10];
        assert!(ksg_mi_estimate(&v, &v[..9], 3).is_err());
        assert!(ksg_mi_estimate(&v[..4], &v[..4], 3).is_err());
        assert!(ksg_mi_estimate(&v, &v, 0).is_err());
        assert!(ksg_mi_estimate(&v, &v, 10).is_err());
    }
}
