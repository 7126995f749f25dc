//! Rotated families: sign certificates, branch tracking and fold thresholds.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cycles::{classify, find_cycles_with, CycleKind, CycleOptions, CyclesError, LimitCycle, HYPERBOLIC_TOL};
use crate::equation::{EquationError, NormalizedEquation, PiecewiseEquation};
use crate::numeric::brent;
use crate::poincare::{displacement, jet};

pub const CERT_GRID: usize = 64;
pub const THRESHOLD_WIDTH: f64 = 1e-9;
pub const STEP_FLOOR: f64 = 1e-7;
/// Last `|P' - 1|` below this when the corrector gives up reads as a fold.
const NEAR_FOLD: f64 = 1e-2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContinuationError {
    #[error("mixed signs of ∂f/∂α at t = {t}, x = {x}, α = {alpha}")]
    MixedSigns { t: f64, x: f64, alpha: f64 },
    #[error("∂f/∂α vanishes on ({lo}, {hi})")]
    Degenerate { lo: f64, hi: f64 },
    #[error("α = {0} outside the family range")]
    OutOfRange(f64),
    #[error("seed cycle is not hyperbolic")]
    NonHyperbolicSeed,
    #[error("bad bracket: {lo_count} cycle(s) at α_lo, {hi_count} at α_hi")]
    BadBracket { lo_count: u32, hi_count: u32 },
    #[error("no fold cycle near α = {0}")]
    NoMergedCycle(f64),
    #[error("family builder failed at α = {alpha}: {source}")]
    Builder { alpha: f64, source: EquationError },
    #[error(transparent)]
    Cycles(#[from] CyclesError),
}

type Builder = dyn Fn(f64) -> Result<PiecewiseEquation, EquationError> + Send + Sync;

/// A one-parameter family of equations on the range `J`.
#[derive(Clone)]
pub struct RotatedFamily {
    builder: Arc<Builder>,
    range: (f64, f64),
}

impl fmt::Debug for RotatedFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RotatedFamily").field("range", &self.range).finish_non_exhaustive()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// `1` for `∂f/∂α >= 0`, `-1` for `<= 0`.
    pub sign: i8,
    pub witness_piece: usize,
    pub witness_x: f64,
    pub witness_alpha: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    RangeEnd,
    Merged,
    Lost,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub alpha: f64,
    pub cycle: LimitCycle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    pub termination: Termination,
    pub last_alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub alpha: f64,
    pub bracket: (f64, f64),
    pub cycle: LimitCycle,
}

impl RotatedFamily {
    pub fn new<F>(builder: F, range: (f64, f64)) -> Self
    where
        F: Fn(f64) -> Result<PiecewiseEquation, EquationError> + Send + Sync + 'static,
    {
        RotatedFamily { builder: Arc::new(builder), range }
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    pub fn build(&self, alpha: f64) -> Result<PiecewiseEquation, ContinuationError> {
        (self.builder)(alpha).map_err(|source| ContinuationError::Builder { alpha, source })
    }

    pub fn normalized(&self, alpha: f64) -> Result<NormalizedEquation, ContinuationError> {
        Ok(self.build(alpha)?.normalized().clone())
    }

    /// `∂f_i/∂α` at `x` by central difference; exact for families affine in `α`.
    pub fn sensitivity(&self, alpha: f64, piece: usize, x: f64) -> Result<f64, ContinuationError> {
        let (lo, hi) = self.range;
        let h = 1e-6 * (1.0 + alpha.abs());
        let (a, b) = ((alpha - h).max(lo), (alpha + h).min(hi));
        let ea = self.normalized(a)?;
        let eb = self.normalized(b)?;
        Ok((eb.piece(piece).value(x) - ea.piece(piece).value(x)) / (b - a))
    }
}

/// Check that `∂f/∂α` keeps one sign on the sampled `(t, x, α)` grid.
pub fn certify(family: &RotatedFamily) -> Result<Certificate, ContinuationError> {
    let (lo, hi) = family.range;
    let alphas: Vec<f64> = (0..5).map(|k| lo + (hi - lo) * (k as f64 + 0.5) / 5.0).collect();
    let mut sign = 0i8;
    let mut witness: Option<(usize, f64, f64, f64)> = None;
    for &alpha in &alphas {
        let h = 1e-6 * (1.0 + alpha.abs());
        let (a, b) = ((alpha - h).max(lo), (alpha + h).min(hi));
        let ea = family.normalized(a)?;
        let eb = family.normalized(b)?;
        let n = ea.n();
        let (wlo, whi) = ea.window();
        let dx = ((whi - wlo) / CERT_GRID as f64).min(1e-3);
        let steps = (((whi - wlo) / dx).ceil() as usize).min(1 << 14);
        let xs: Vec<f64> = (0..=steps).map(|k| wlo + (whi - wlo) * k as f64 / steps as f64).collect();
        let sens = |i: usize, x: f64| (eb.piece(i).value(x) - ea.piece(i).value(x)) / (b - a);
        let scale = |i: usize, x: f64| 1e-9 * (1.0 + eb.piece(i).value(x).abs()) / (b - a).max(1e-300) * h;
        // (t, x) grid for signs
        for kt in 0..CERT_GRID {
            let t = (kt as f64 + 0.5) / CERT_GRID as f64;
            let i = ((t * n as f64) as usize).min(n - 1);
            for kx in 0..CERT_GRID {
                let x = wlo + (whi - wlo) * (kx as f64 + 0.5) / CERT_GRID as f64;
                let v = sens(i, x);
                if v.abs() <= scale(i, x) {
                    continue;
                }
                let s = if v > 0.0 { 1 } else { -1 };
                if sign != 0 && s != sign {
                    return Err(ContinuationError::MixedSigns { t, x, alpha });
                }
                sign = s;
                if witness.is_none_or(|w| v.abs() > w.3) {
                    witness = Some((i, x, alpha, v.abs()));
                }
            }
        }
        // strictness: no x-run of length >= 1e-3 where every piece is flat
        let mut run: Option<(f64, f64)> = None;
        for &x in &xs {
            if (0..n).all(|i| sens(i, x).abs() <= scale(i, x)) {
                let start = run.map_or(x, |r| r.0);
                if x - start >= 1e-3 {
                    return Err(ContinuationError::Degenerate { lo: start, hi: x });
                }
                run = Some((start, x));
            } else {
                run = None;
            }
        }
    }
    let (wp, wx, wa, _) = witness.ok_or(ContinuationError::Degenerate { lo, hi })?;
    Ok(Certificate { sign, witness_piece: wp, witness_x: wx, witness_alpha: wa })
}

/// Newton on the displacement from `x`, refusing to change the sign of `P' - 1`.
fn correct(eq: &NormalizedEquation, x: f64, side: f64) -> Option<LimitCycle> {
    let mut x = x;
    for _ in 0..40 {
        let d = displacement(eq, x).ok()?;
        let j = jet(eq, x, 1).ok()?;
        let slope = j.d1 - 1.0;
        if slope == 0.0 || slope.signum() != side {
            return None;
        }
        let step = d / slope;
        x -= step;
        if !x.is_finite() {
            return None;
        }
        if step.abs() <= 1e-13 * (1.0 + x.abs()) {
            let j = jet(eq, x, 3).ok()?;
            if (j.d1 - 1.0).signum() != side {
                return None;
            }
            let (multiplicity, stability) = classify(&j, HYPERBOLIC_TOL);
            return Some(LimitCycle { x0: x, kind: CycleKind::NonConstant, multiplicity, stability, jet: j });
        }
    }
    None
}

/// Track a hyperbolic cycle along the monotone parameter `path`.
pub fn continue_cycle(
    family: &RotatedFamily,
    seed: &LimitCycle,
    alpha0: f64,
    path: &[f64],
) -> Result<Branch, ContinuationError> {
    let side = seed.jet.d1 - 1.0;
    if side.abs() <= HYPERBOLIC_TOL {
        return Err(ContinuationError::NonHyperbolicSeed);
    }
    let side = side.signum();
    let (lo, hi) = family.range;
    let mut points = vec![BranchPoint { alpha: alpha0, cycle: seed.clone() }];
    let mut alpha = alpha0;
    for &target in path {
        if target < lo || target > hi {
            return Err(ContinuationError::OutOfRange(target));
        }
        let mut step = target - alpha;
        while alpha != target {
            let next = if (target - alpha).abs() <= step.abs() { target } else { alpha + step };
            let eq = family.normalized(next)?;
            let prev = &points[points.len() - 1];
            let guess = match points.len() {
                1 => prev.cycle.x0,
                k => {
                    let pp = &points[k - 2];
                    let slope = (prev.cycle.x0 - pp.cycle.x0) / (prev.alpha - pp.alpha);
                    prev.cycle.x0 + slope * (next - prev.alpha)
                }
            };
            let fixed = correct(&eq, guess, side).or_else(|| correct(&eq, prev.cycle.x0, side));
            match fixed {
                Some(c) => {
                    let merged = (c.jet.d1 - 1.0).abs() < HYPERBOLIC_TOL;
                    points.push(BranchPoint { alpha: next, cycle: c });
                    alpha = next;
                    if merged {
                        return Ok(Branch { points, termination: Termination::Merged, last_alpha: alpha });
                    }
                    step *= 1.5;
                }
                None => {
                    step *= 0.5;
                    if step.abs() < STEP_FLOOR {
                        let last = &points[points.len() - 1].cycle;
                        let termination = if (last.jet.d1 - 1.0).abs() < NEAR_FOLD {
                            Termination::Merged
                        } else {
                            Termination::Lost
                        };
                        return Ok(Branch { points, termination, last_alpha: alpha });
                    }
                }
            }
        }
    }
    Ok(Branch { points, termination: Termination::RangeEnd, last_alpha: alpha })
}

fn cycle_count(
    family: &RotatedFamily,
    alpha: f64,
    opts: &CycleOptions,
) -> Result<(u32, Vec<LimitCycle>), ContinuationError> {
    let eq = family.normalized(alpha)?;
    let cs: Vec<LimitCycle> =
        find_cycles_with(&eq, opts)?.into_iter().filter(|c| c.kind == CycleKind::NonConstant).collect();
    Ok((cs.iter().map(|c| c.multiplicity).sum(), cs))
}

/// Fold point by bisection on the cycle count, then `P' = 1` between the close pair.
pub fn saddle_node_threshold(
    family: &RotatedFamily,
    bracket: (f64, f64),
    opts: &CycleOptions,
) -> Result<Threshold, ContinuationError> {
    let (mut lo, mut hi) = bracket;
    let (lo_count, _) = cycle_count(family, lo, opts)?;
    let (hi_count, _) = cycle_count(family, hi, opts)?;
    if lo_count.abs_diff(hi_count) != 2 {
        return Err(ContinuationError::BadBracket { lo_count, hi_count });
    }
    // the many-cycle side keeps the tangential count
    let (many_is_lo, few) = if lo_count > hi_count { (true, hi_count) } else { (false, lo_count) };
    while hi - lo > THRESHOLD_WIDTH {
        let mid = 0.5 * (lo + hi);
        let (c, _) = cycle_count(family, mid, opts)?;
        let few_side = c == few;
        if few_side == many_is_lo {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let many = if many_is_lo { lo } else { hi };
    let (_, cycles) = cycle_count(family, many, opts)?;
    let eq = family.normalized(many)?;
    let cycle = merged_cycle(&eq, &cycles).ok_or(ContinuationError::NoMergedCycle(many))?;
    Ok(Threshold { alpha: 0.5 * (lo + hi), bracket: (lo, hi), cycle })
}

fn merged_cycle(eq: &NormalizedEquation, cycles: &[LimitCycle]) -> Option<LimitCycle> {
    let slope = |x: f64| jet(eq, x, 1).map_or(f64::NAN, |j| j.d1 - 1.0);
    let x = match cycles {
        [] => return None,
        [c] => {
            let h = 1e-3 * (1.0 + c.x0.abs());
            brent(slope, c.x0 - h, c.x0 + h, 1e-15).unwrap_or(c.x0)
        }
        _ => {
            let (a, b) = cycles
                .windows(2)
                .map(|w| (w[0].x0, w[1].x0))
                .min_by(|p, q| (p.1 - p.0).total_cmp(&(q.1 - q.0)))?;
            brent(slope, a, b, 1e-15)?
        }
    };
    let j = jet(eq, x, 3).ok()?;
    let (multiplicity, stability) = classify(&j, HYPERBOLIC_TOL);
    Some(LimitCycle { x0: x, kind: CycleKind::NonConstant, multiplicity, stability, jet: j })
}
