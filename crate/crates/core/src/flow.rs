//! Per-piece transition maps by inverting the time integral `∫ dx/f`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::ScalarField;
use crate::numeric::{integrate, integrate_limited};

/// Paths along which `|f|` drops below this are reported as near-zero.
pub const NEAR_ZERO_GUARD: f64 = 1e-10;
const TIME_TOL: f64 = 1e-12;
const QUAD_TOL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("integrand 1/f is singular at {at}")]
    Singular { at: f64 },
    #[error("quadrature did not converge on [{a}, {b}]")]
    Quadrature { a: f64, b: f64 },
    #[error("reference integrator failed at t = {t}, x = {x}")]
    OracleFailure { t: f64, x: f64 },
    #[error("negative duration {0}")]
    NegativeDuration(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Ok,
    Equilibrium,
    Escaped,
    NearZero,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub end_value: f64,
    pub status: StepStatus,
}

impl StepOutcome {
    fn new(end_value: f64, status: StepStatus) -> Self {
        StepOutcome { end_value, status }
    }
}

fn segment_has_root(f: &ScalarField, a: f64, b: f64) -> Option<f64> {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    match f.cached_roots() {
        None => Some(lo),
        Some(r) => r.iter().copied().find(|&z| z >= lo && z <= hi),
    }
}

fn raw_time(f: &ScalarField, a: f64, b: f64) -> Result<f64, FlowError> {
    let q = integrate(|x| 1.0 / f.value(x), a, b, QUAD_TOL, 1e-15);
    if !q.value.is_finite() || q.error > TIME_TOL.max(1e-13 * q.value.abs()) {
        return Err(FlowError::Quadrature { a, b });
    }
    Ok(q.value)
}

/// Time increment inside the inversion loop. Accepted when the implied error
/// in position, not in time, is negligible: close to a zero of `f` the
/// integrand is dominated by rounding in `f` itself.
fn solver_time(f: &ScalarField, a: f64, b: f64) -> Result<f64, FlowError> {
    let q = integrate_limited(|x| 1.0 / f.value(x), a, b, QUAD_TOL, 1e-15, 400);
    if !q.value.is_finite() {
        return Err(FlowError::Quadrature { a, b });
    }
    let speed = f.value(a).abs().max(f.value(b).abs());
    if q.error <= TIME_TOL.max(1e-13 * q.value.abs())
        || q.error * speed <= 1e-15 * (1.0 + b.abs())
    {
        Ok(q.value)
    } else {
        Err(FlowError::Quadrature { a, b })
    }
}

/// `∫_{x_a}^{x_b} dx / f(x)`.
pub fn traverse_time(f: &ScalarField, x_a: f64, x_b: f64) -> Result<f64, FlowError> {
    if let Some(z) = segment_has_root(f, x_a, x_b) {
        return Err(FlowError::Singular { at: z });
    }
    raw_time(f, x_a, x_b)
}

/// Time to run from `x0` to `±∞` in direction `dir`, if finite.
fn time_to_infinity(f: &ScalarField, x0: f64, dir: f64) -> Option<f64> {
    let dn = f.numerator().degree().unwrap_or(0);
    let dd = f.denominator().degree().unwrap_or(0);
    if dn < dd + 2 {
        return None;
    }
    let l = 1.0_f64.max(x0.abs());
    let q = integrate(
        |u| {
            let x = x0 + dir * l * u / (1.0 - u);
            dir * l / ((1.0 - u) * (1.0 - u) * f.value(x))
        },
        0.0,
        1.0,
        QUAD_TOL,
        1e-14,
    );
    Some(q.value)
}

fn path_infimum(f: &ScalarField, a: f64, b: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    f.critical_points()
        .iter()
        .filter(|&&c| c > lo && c < hi)
        .map(|&c| f.value(c).abs())
        .fold(f.value(a).abs().min(f.value(b).abs()), f64::min)
}

/// Flow of `dx/dt = f(x)` from `x0` for `duration`.
pub fn step_map(f: &ScalarField, x0: f64, duration: f64) -> StepOutcome {
    let v = f.value(x0);
    let roots = match f.cached_roots() {
        None => return StepOutcome::new(x0, StepStatus::Equilibrium),
        Some(r) => r,
    };
    if v == 0.0 || roots.iter().any(|&r| (x0 - r).abs() <= 1e-14 * (1.0 + r.abs())) {
        return StepOutcome::new(x0, StepStatus::Equilibrium);
    }
    if duration <= 0.0 {
        let status = if v.abs() < NEAR_ZERO_GUARD { StepStatus::NearZero } else { StepStatus::Ok };
        return StepOutcome::new(x0, status);
    }
    let dir = v.signum();
    let dom = f.domain();
    let next_root = if dir > 0.0 {
        roots.iter().copied().filter(|&r| r > x0).fold(f64::INFINITY, f64::min)
    } else {
        roots.iter().copied().filter(|&r| r < x0).fold(f64::NEG_INFINITY, f64::max)
    };
    let edge = if dir > 0.0 { dom.hi } else { dom.lo };
    let root_first =
        next_root.is_finite() && if dir > 0.0 { next_root <= edge } else { next_root >= edge };
    let barrier = if root_first { next_root } else { edge };

    // G(x) = ∫_{x0}^{x} dx/f - duration is increasing along the motion.
    let (mut lo, mut g_lo) = (x0, -duration);
    let (mut hi, mut g_hi);
    if root_first {
        hi = barrier;
        g_hi = f64::INFINITY;
    } else if barrier.is_finite() {
        let tau = match solver_time(f, x0, barrier) {
            Ok(t) => t,
            Err(_) => return StepOutcome::new(barrier, StepStatus::Escaped),
        };
        if tau < duration {
            return StepOutcome::new(barrier, StepStatus::Escaped);
        }
        hi = barrier;
        g_hi = tau - duration;
    } else {
        if let Some(tau) = time_to_infinity(f, x0, dir) {
            if tau < duration {
                return StepOutcome::new(barrier, StepStatus::Escaped);
            }
        }
        let l = 1.0_f64.max(x0.abs());
        let mut span = l;
        let (mut prev, mut g_prev) = (x0, -duration);
        loop {
            let x = x0 + dir * span;
            if !x.is_finite() {
                return StepOutcome::new(barrier, StepStatus::Escaped);
            }
            let g = match solver_time(f, prev, x) {
                Ok(t) => g_prev + t,
                Err(_) => return StepOutcome::new(barrier, StepStatus::Escaped),
            };
            if g >= 0.0 {
                lo = prev;
                g_lo = g_prev;
                hi = x;
                g_hi = g;
                break;
            }
            prev = x;
            g_prev = g;
            span *= 2.0;
        }
    }

    let between = |c: f64, a: f64, b: f64| if a < b { c > a && c < b } else { c < a && c > b };
    let (mut x, mut g) = (lo, g_lo);
    if g_hi.is_finite() && g_hi.abs() < g_lo.abs() {
        x = hi;
        g = g_hi;
    }
    for _ in 0..200 {
        let fx = f.value(x);
        let newton = x - g * fx;
        let cand = if between(newton, lo, hi) { newton } else { 0.5 * (lo + hi) };
        let mut best = (x, g);
        if (cand - lo).abs() < (cand - best.0).abs() {
            best = (lo, g_lo);
        }
        if g_hi.is_finite() && (cand - hi).abs() < (cand - best.0).abs() {
            best = (hi, g_hi);
        }
        let gc = match solver_time(f, best.0, cand) {
            Ok(t) => best.1 + t,
            Err(_) => {
                // unresolved sub-integral, shrink by bisection only
                hi = cand;
                g_hi = f64::INFINITY;
                continue;
            }
        };
        if gc < 0.0 {
            lo = cand;
            g_lo = gc;
        } else {
            hi = cand;
            g_hi = gc;
        }
        x = cand;
        g = gc;
        let correction = (g * f.value(x)).abs();
        let scale = 1e-13 * (1.0 + x.abs());
        if (g.abs() < TIME_TOL && correction < scale) || (hi - lo).abs() < scale {
            break;
        }
    }
    let polished = x - g * f.value(x);
    if between(polished, lo, hi) || polished == x {
        x = polished;
    }
    let status = if path_infimum(f, x0, x) < NEAR_ZERO_GUARD {
        StepStatus::NearZero
    } else {
        StepStatus::Ok
    };
    StepOutcome::new(x, status)
}

// Dormand-Prince 5(4) tableau
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Reference solution by adaptive Dormand-Prince 5(4). Test oracle only.
pub fn rk_flow(f: &ScalarField, x0: f64, duration: f64, tol: f64) -> Result<f64, FlowError> {
    if duration < 0.0 {
        return Err(FlowError::NegativeDuration(duration));
    }
    let mut t = 0.0;
    let mut x = x0;
    let mut h = (duration * 1e-3).max(1e-6).min(duration);
    let mut k = [0.0; 7];
    let mut steps = 0usize;
    while t < duration {
        if steps > 5_000_000 {
            return Err(FlowError::OracleFailure { t, x });
        }
        steps += 1;
        h = h.min(duration - t);
        if h <= 1e-15 * (1.0 + t.abs()) && t + h < duration {
            return Err(FlowError::OracleFailure { t, x });
        }
        for i in 0..7 {
            let xi = x + h * (0..i).map(|j| A[i][j] * k[j]).sum::<f64>();
            k[i] = f.value(xi);
            let _ = C[i];
        }
        let x5 = x + h * (0..7).map(|i| B5[i] * k[i]).sum::<f64>();
        let x4 = x + h * (0..7).map(|i| B4[i] * k[i]).sum::<f64>();
        if !x5.is_finite() {
            h *= 0.25;
            continue;
        }
        let err = (x5 - x4).abs();
        let scale = tol * (1.0 + x.abs().max(x5.abs()));
        if err <= scale {
            t += h;
            x = x5;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * (scale / err).powf(0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    Ok(x)
}
