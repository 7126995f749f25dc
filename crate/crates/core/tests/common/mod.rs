#![allow(dead_code)]

use cyclescope::cycles::{annulus_integral, partition, CycleKind, LimitCycle};
use cyclescope::equation::{NormalizedEquation, PiecewiseEquation};
use cyclescope::field::{Domain, ScalarField};
use cyclescope::flow::rk_flow;
use cyclescope::models::AbelSpec;
use cyclescope::poincare::{displacement, knots};
use rand::Rng;

pub fn poly(c: &[f64], d: Domain) -> ScalarField {
    ScalarField::polynomial(c, d).unwrap()
}

/// Coefficients uniform in `[-s, s]`, `T = 1`, `T1` in `(0.2, 0.8)`.
pub fn random_abel<R: Rng>(rng: &mut R, s: f64) -> AbelSpec {
    let mut c = || rng.gen_range(-s..s);
    let first = [c(), c(), c()];
    let second = [c(), c(), c()];
    AbelSpec::new(first, second, 1.0, rng.gen_range(0.2..0.8))
}

/// `P(x0)` integrated piece by piece with the embedded RK solver.
pub fn rk_return(eq: &NormalizedEquation, x0: f64) -> Option<f64> {
    let mut x = x0;
    for f in eq.pieces() {
        x = rk_flow(f, x, eq.slot(), 1e-12).ok()?;
    }
    Some(x)
}

/// Same on the raw equation, with the original breakpoints.
pub fn rk_return_raw(eq: &PiecewiseEquation, x0: f64) -> Option<f64> {
    let mut x = x0;
    for (f, w) in eq.pieces().iter().zip(eq.breakpoints().windows(2)) {
        x = rk_flow(f, x, w[1] - w[0], 1e-12).ok()?;
    }
    Some(x)
}

/// Per-interval counts within verdict bounds, alternating stability, vanishing annulus integral.
pub fn soundness(eq: &NormalizedEquation, cycles: &[LimitCycle]) -> Result<(), String> {
    let report = partition(eq).map_err(|e| e.to_string())?;
    let mut counts = vec![0usize; report.intervals.len()];
    for c in cycles.iter().filter(|c| c.kind == CycleKind::NonConstant) {
        let i = report.locate(c.x0).ok_or(format!("cycle {} outside every interval", c.x0))?;
        counts[i] += c.multiplicity as usize;
    }
    for (iv, n) in report.intervals.iter().zip(&counts) {
        if let Some(b) = iv.verdict.bound() {
            if *n > b {
                return Err(format!("{n} cycles in ({}, {}) against {:?}", iv.lo, iv.hi, iv.verdict));
            }
        }
    }
    for w in cycles.windows(2) {
        let (lo, hi) = (&w[0], &w[1]);
        if !(lo.stability.is_hyperbolic_type() && hi.stability.is_hyperbolic_type()) {
            continue;
        }
        let connected = (1..8).all(|k| {
            let x = lo.x0 + (hi.x0 - lo.x0) * k as f64 / 8.0;
            displacement(eq, x).is_ok()
        });
        if connected && lo.stability == hi.stability {
            return Err(format!("adjacent cycles {} and {} share stability", lo.x0, hi.x0));
        }
    }
    if eq.n() == 2 {
        for c in cycles.iter().filter(|c| c.kind == CycleKind::NonConstant) {
            let a = annulus_integral(eq, c.x0).map_err(|e| e.to_string())?;
            if a.abs() > 1e-8 {
                return Err(format!("annulus integral {a:e} at {}", c.x0));
            }
        }
    }
    Ok(())
}

/// Whether `x0` gives a trajectory inside V.
pub fn in_v(eq: &NormalizedEquation, x0: f64) -> bool {
    knots(eq, x0).map(|k| k.in_v).unwrap_or(false)
}

/// Five-point central differences `(f', f'')` at `x`, `None` if any sample fails.
pub fn five_point<F: Fn(f64) -> Option<f64>>(f: F, x: f64, h: f64) -> Option<(f64, f64)> {
    let s = [f(x - 2.0 * h)?, f(x - h)?, f(x)?, f(x + h)?, f(x + 2.0 * h)?];
    let d1 = (s[0] - 8.0 * s[1] + 8.0 * s[3] - s[4]) / (12.0 * h);
    let d2 = (-s[0] + 16.0 * s[1] - 30.0 * s[2] + 16.0 * s[3] - s[4]) / (12.0 * h * h);
    Some((d1, d2))
}

/// Five-point differences over halving steps, taking the pair of successive estimates that agree best.
pub fn settled_difference<F: Fn(f64) -> Option<f64>>(f: F, x: f64) -> Option<(f64, f64)> {
    let mut best: Option<((f64, f64), f64)> = None;
    let mut prev: Option<(f64, f64)> = None;
    let mut h = 4e-3;
    while h > 1e-5 {
        let est = five_point(&f, x, h);
        if let (Some(p), Some(e)) = (prev, est) {
            let spread = ((e.0 - p.0) / e.0.abs().max(1.0)).abs() + ((e.1 - p.1) / e.1.abs().max(1.0)).abs();
            if best.is_none_or(|(_, s)| spread < s) {
                best = Some((e, spread));
            }
        }
        prev = est;
        h *= 0.5;
    }
    best.map(|(e, _)| e)
}
