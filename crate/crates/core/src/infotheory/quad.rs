//! Deterministic quadrature: adaptive Simpson refinement over breakpointed
//! panels for scalar integrals, and Gauss–Legendre nodes for the
//! tensor-product grids used by the small-n oracle.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 60;

/// Integrate `f` over `[a, b]` to absolute tolerance `tol`.
///
/// `breakpoints` are interior abscissae the integrand is known to be peaked
/// around (mixture means); panels are aligned to them so that narrow peaks
/// cannot slip between the initial sample points. Fails with a numeric error
/// if the refinement depth cap is reached before the tolerance is met.
pub fn adaptive_simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    tol: f64,
) -> Result<f64> {
    assert!(b > a, "empty integration interval");
    let mut cuts: Vec<f64> = vec![a, b];
    cuts.extend(breakpoints.iter().copied().filter(|x| *x > a && *x < b));
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();

    let span = b - a;
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let panel_tol = tol * ((hi - lo) / span).max(1e-3);
        total += integrate_panel(f, lo, hi, panel_tol)?;
    }
    Ok(total)
}

fn integrate_panel(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    // Four seed sub-panels per segment so the first error estimate sees some
    // structure even on wide segments.
    let mut total = 0.0;
    let step = (hi - lo) / 4.0;
    for i in 0..4 {
        let a = lo + step * i as f64;
        let b = if i == 3 { hi } else { a + step };
        let m = 0.5 * (a + b);
        let (fa, fm, fb) = (f(a), f(m), f(b));
        let s = simpson(a, b, fa, fm, fb);
        total += refine(f, a, b, fa, fm, fb, s, tol / 4.0, MAX_DEPTH)?;
    }
    Ok(total)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn refine(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let err = left + right - whole;
    if err.abs() <= 15.0 * tol {
        return Ok(left + right + err / 15.0);
    }
    if depth == 0 {
        return Err(Error::numeric(
            "adaptive quadrature",
            format!("depth cap reached on [{a}, {b}] with residual {err:e}"),
        ));
    }
    let half = 0.5 * tol;
    Ok(refine(f, a, m, fa, flm, fm, left, half, depth - 1)?
        + refine(f, m, b, fm, frm, fb, right, half, depth - 1)?)
}

/// Gauss–Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 2);
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let half = m.div_ceil(2);
    for i in 0..half {
        // Tricomi initial guess, then Newton.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_and_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Affine map of nodes/weights from [-1, 1] onto [a, b].
pub fn scale_nodes(nodes: &[f64], weights: &[f64], a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        nodes.iter().map(|t| mid + half * t).collect(),
        weights.iter().map(|w| half * w).collect(),
    )
}

/// Neumaier compensated sum; used where grid sums must not depend on
/// accumulation noise.
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        CompensatedSum { sum: 0.0, comp: 0.0 }
    }

    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl Default for CompensatedSum {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_polynomials_exactly() {
        let f = |x: f64| 3.0 * x * x;
        let v = adaptive_simpson(&f, 0.0, 2.0, &[], 1e-12).unwrap();
        assert!((v - 8.0).abs() < 1e-10);
    }

    #[test]
    fn narrow_peak_between_breakpoints_is_not_missed() {
        // Unit-mass Gaussian of width 1e-3 at 0.3; without the breakpoint the
        // seed panels would all sample ~0.
        let s = 1e-3;
        let f = move |x: f64| {
            (-(x - 0.3) * (x - 0.3) / (2.0 * s * s)).exp()
                / (2.0 * std::f64::consts::PI).sqrt()
                / s
        };
        let v = adaptive_simpson(&f, -10.0, 10.0, &[0.3], 1e-9).unwrap();
        assert!((v - 1.0).abs() < 1e-8, "integral was {v}");
    }

    #[test]
    fn gauss_legendre_matches_known_rules() {
        let (n, w) = gauss_legendre(2);
        assert!((n[1] - 1.0 / 3f64.sqrt()).abs() < 1e-14);
        assert!((w[0] - 1.0).abs() < 1e-14);

        // High-order rule integrates a smooth non-polynomial accurately.
        let (n, w) = gauss_legendre(40);
        let (xs, ws) = scale_nodes(&n, &w, 0.0, std::f64::consts::PI);
        let v: f64 = xs.iter().zip(&ws).map(|(x, w)| x.sin() * w).sum();
        assert!((v - 2.0).abs() < 1e-13);
    }

    #[test]
    fn compensated_sum_handles_cancellation() {
        let mut s = CompensatedSum::new();
        s.add(1e16);
        for _ in 0..10 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 10.0);
    }
}
