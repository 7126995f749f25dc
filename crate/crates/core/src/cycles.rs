//! Partition of the state interval, limit-cycle search and classification.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equation::NormalizedEquation;
use crate::field::{FieldError, Root, ScalarField, ZeroList};
use crate::flow::{traverse_time, FlowError};
use crate::numeric::{brent, golden_min};
use crate::poincare::{constant_jet, derivative_integral, displacement, jet, knots, PoincareError, PoincareJet, Route};

pub const HYPERBOLIC_TOL: f64 = 1e-7;
pub const DEFAULT_GRID: usize = 1024;
pub const MAX_GRID: usize = 1 << 16;
pub const MIN_GRID: usize = 64;
/// `|d|` below this at an interior extremum marks a tangential fixed point.
pub const TANGENT_TOL: f64 = 1e-10;
const MERGE_TOL: f64 = 1e-7;
const END_NUDGE: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CyclesError {
    #[error("f1+f2 ≡ 0: periodic annulus, no limit cycles")]
    Annulus,
    #[error("two-piece equation required, got {0} pieces")]
    NotTwoPiece(usize),
    #[error("grid {0} below the minimum of {MIN_GRID}")]
    GridTooSmall(usize),
    #[error("internal consistency alarm on ({lo}, {hi}): found {found} cycle(s), verdict allows {verdict:?}")]
    ConsistencyAlarm { lo: f64, hi: f64, found: usize, verdict: Verdict },
    #[error("f2 vanishes on the integration segment near {at}")]
    Singular { at: f64 },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Poincare(#[from] PoincareError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    None,
    AtMostOneHyperbolic,
    AtMostOne,
    NeedsAnalysis,
}

impl Verdict {
    /// Upper bound on non-constant cycles, if any.
    pub fn bound(self) -> Option<usize> {
        match self {
            Verdict::None => Some(0),
            Verdict::AtMostOne | Verdict::AtMostOneHyperbolic => Some(1),
            Verdict::NeedsAnalysis => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalReport {
    #[serde(with = "crate::field::extended_real")]
    pub lo: f64,
    #[serde(with = "crate::field::extended_real")]
    pub hi: f64,
    pub sign_changes: usize,
    pub sum_zeros: usize,
    pub verdict: Verdict,
}

impl IntervalReport {
    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub common_zeros: ZeroList,
    pub intervals: Vec<IntervalReport>,
}

impl PartitionReport {
    /// Index of the open interval holding `x`.
    pub fn locate(&self, x: f64) -> Option<usize> {
        self.intervals.iter().position(|i| i.contains(x))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CycleKind {
    Constant,
    NonConstant,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stability {
    Stable,
    Unstable,
    UpperStableLowerUnstable,
    UpperUnstableLowerStable,
}

impl Stability {
    pub fn is_hyperbolic_type(self) -> bool {
        matches!(self, Stability::Stable | Stability::Unstable)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitCycle {
    pub x0: f64,
    pub kind: CycleKind,
    pub multiplicity: u32,
    pub stability: Stability,
    pub jet: PoincareJet,
}

/// Multiplicity and stability from the displacement jet `d = P - id`.
pub fn classify(jet: &PoincareJet, tol: f64) -> (u32, Stability) {
    let d1 = jet.d1 - 1.0;
    if d1.abs() > tol || jet.d2.is_none() {
        let s = if d1 < 0.0 { Stability::Stable } else { Stability::Unstable };
        return (1, s);
    }
    let d2 = jet.d2.unwrap();
    if d2.abs() > tol || jet.d3.is_none() {
        let s = if d2 < 0.0 { Stability::UpperStableLowerUnstable } else { Stability::UpperUnstableLowerStable };
        return (2, s);
    }
    let s = if jet.d3.unwrap() < 0.0 { Stability::Stable } else { Stability::Unstable };
    (3, s)
}

/// Cycles counted with multiplicity.
pub fn count_with_multiplicity(cycles: &[LimitCycle]) -> u32 {
    cycles.iter().map(|c| c.multiplicity).sum()
}

fn require_two(eq: &NormalizedEquation) -> Result<(), CyclesError> {
    if eq.n() != 2 {
        return Err(CyclesError::NotTwoPiece(eq.n()));
    }
    Ok(())
}

fn same_point(a: f64, b: f64) -> bool {
    (a - b).abs() <= MERGE_TOL * (1.0 + a.abs().max(b.abs()))
}

fn window_zeros(f: &ScalarField, eq: &NormalizedEquation) -> Result<ZeroList, FieldError> {
    let d = eq.state_interval();
    f.zeros((d.lo, d.hi), 1e-12)
}

/// Zeros shared by every piece, with multiplicity as common zeros.
fn common_zero_list(eq: &NormalizedEquation) -> Result<ZeroList, CyclesError> {
    let mut lists = Vec::new();
    for f in eq.pieces() {
        if f.is_identically_zero() {
            continue;
        }
        lists.push(window_zeros(f, eq)?);
    }
    let Some((first, rest)) = lists.split_first() else {
        return Ok(ZeroList { roots: Vec::new(), certified: true });
    };
    let mut roots = Vec::new();
    for r in &first.roots {
        let mut m = r.multiplicity;
        let mut all = true;
        for l in rest {
            match l.roots.iter().find(|s| same_point(s.location, r.location)) {
                Some(s) => m = m.min(s.multiplicity),
                None => {
                    all = false;
                    break;
                }
            }
        }
        if all {
            roots.push(Root { location: r.location, multiplicity: m });
        }
    }
    let certified = lists.iter().all(|l| l.certified);
    Ok(ZeroList { roots, certified })
}

fn constant_cycles_any(eq: &NormalizedEquation, tol: f64) -> Result<Vec<LimitCycle>, CyclesError> {
    if eq.sum_is_zero() {
        return Err(CyclesError::Annulus);
    }
    let sum_zeros = window_zeros(eq.sum(), eq)?;
    let mut out = Vec::new();
    for r in common_zero_list(eq)?.roots {
        let x = r.location;
        let mult = sum_zeros.multiplicity_at(x, 1e-6 * (1.0 + x.abs())).unwrap_or(1).min(3);
        let jet = if eq.n() == 2 { constant_jet(eq, x)? } else { derivative_integral(eq, x, 3)? };
        let (_, stability) = classify(&jet, tol);
        out.push(LimitCycle { x0: x, kind: CycleKind::Constant, multiplicity: mult, stability, jet });
    }
    Ok(out)
}

/// Common zeros of `f1` and `f2` as constant limit cycles.
pub fn constant_cycles(eq: &NormalizedEquation) -> Result<Vec<LimitCycle>, CyclesError> {
    require_two(eq)?;
    constant_cycles_any(eq, HYPERBOLIC_TOL)
}

/// Split the state interval at the zeros of `f1 f2` and bound the cycles on each piece.
pub fn partition(eq: &NormalizedEquation) -> Result<PartitionReport, CyclesError> {
    require_two(eq)?;
    if eq.sum_is_zero() {
        return Err(CyclesError::Annulus);
    }
    let dom = eq.state_interval();
    let mut cuts: Vec<f64> = Vec::new();
    for f in eq.pieces() {
        if f.is_identically_zero() {
            continue;
        }
        for x in window_zeros(f, eq)?.locations() {
            let edge = 1e-12 * (1.0 + x.abs());
            if x > dom.lo + edge && x < dom.hi - edge {
                cuts.push(x);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| same_point(*a, *b));
    let mut bounds = vec![dom.lo];
    bounds.extend(&cuts);
    bounds.push(dom.hi);
    let sum = eq.sum();
    let sum_zeros = window_zeros(sum, eq)?;
    let mut intervals = Vec::with_capacity(bounds.len() - 1);
    for w in bounds.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let sc = sum.sign_changes((lo, hi))?;
        let inside = sum_zeros
            .roots
            .iter()
            .filter(|r| {
                let e = 1e-12 * (1.0 + r.location.abs());
                r.location > lo + e && r.location < hi - e
            })
            .count();
        let verdict = match sc.count {
            0 => Verdict::None,
            1 if inside == 1 => Verdict::AtMostOneHyperbolic,
            1 => Verdict::AtMostOne,
            _ => Verdict::NeedsAnalysis,
        };
        intervals.push(IntervalReport { lo, hi, sign_changes: sc.count, sum_zeros: inside, verdict });
    }
    Ok(PartitionReport { common_zeros: common_zero_list(eq)?, intervals })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CycleOptions {
    /// Starting grid per scanned region.
    pub grid: usize,
    pub hyperbolic_tol: f64,
    /// Restrict the scan (and constant cycles) to this closed window.
    pub window: Option<(f64, f64)>,
    /// Double the grid until the count settles.
    pub refine: bool,
}

impl Default for CycleOptions {
    fn default() -> Self {
        CycleOptions { grid: DEFAULT_GRID, hyperbolic_tol: HYPERBOLIC_TOL, window: None, refine: true }
    }
}

/// Scan region `(lo, hi)` with possibly infinite ends, parameterized by `u` in `[0, 1]`.
#[derive(Clone, Copy, Debug)]
struct Region {
    lo: f64,
    hi: f64,
    scale: f64,
    /// Partition interval index, if any.
    interval: Option<usize>,
}

impl Region {
    fn map(&self, u: f64) -> f64 {
        let u = u.clamp(END_NUDGE, 1.0 - END_NUDGE);
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) => self.lo + (self.hi - self.lo) * u,
            (true, false) => self.lo + self.scale * u / (1.0 - u),
            (false, true) => self.hi - self.scale * (1.0 - u) / u,
            (false, false) => self.scale * (2.0 * u - 1.0) / (u * (1.0 - u)),
        }
    }
}

/// Core and tails of `(lo, hi)` relative to the finite window.
fn split_region(lo: f64, hi: f64, window: (f64, f64), interval: Option<usize>, out: &mut Vec<Region>) {
    let scale = (window.1 - window.0).max(1.0);
    let core_lo = lo.max(window.0);
    let core_hi = hi.min(window.1);
    if core_lo < core_hi {
        if lo < core_lo {
            out.push(Region { lo, hi: core_lo, scale, interval });
        }
        out.push(Region { lo: core_lo, hi: core_hi, scale, interval });
        if hi > core_hi {
            out.push(Region { lo: core_hi, hi, scale, interval });
        }
    } else if lo < hi {
        out.push(Region { lo, hi, scale, interval });
    }
}

fn disp(eq: &NormalizedEquation, x: f64) -> Option<f64> {
    displacement(eq, x).ok().filter(|d| d.is_finite())
}

/// Candidate fixed points from sampled displacement.
fn detect(eq: &NormalizedEquation, samples: &[(f64, Option<f64>)]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..samples.len() {
        let (x, d) = samples[i];
        let Some(d) = d else { continue };
        if d == 0.0 {
            out.push(x);
            continue;
        }
        if let Some(&(xn, Some(dn))) = samples.get(i + 1) {
            if dn != 0.0 && (d > 0.0) != (dn > 0.0) {
                if let Some(r) = bracket_root(eq, x, xn) {
                    out.push(r);
                }
            }
        }
        if i == 0 || i + 1 >= samples.len() {
            continue;
        }
        let (xl, Some(dl)) = samples[i - 1] else { continue };
        let (xr, Some(dr)) = samples[i + 1] else { continue };
        let same = (dl > 0.0) == (d > 0.0) && (dr > 0.0) == (d > 0.0) && dl != 0.0 && dr != 0.0;
        if same && d.abs() <= dl.abs() && d.abs() <= dr.abs() {
            out.extend(tangential(eq, xl, xr, d > 0.0));
        }
    }
    out
}

fn bracket_root(eq: &NormalizedEquation, a: f64, b: f64) -> Option<f64> {
    let r = brent(|x| disp(eq, x).unwrap_or(f64::NAN), a, b, 1e-15 * (1.0 + a.abs().max(b.abs())))?;
    r.is_finite().then_some(r)
}

/// Closest approach of `d` to zero between `a` and `b` when sampling saw no crossing.
fn tangential(eq: &NormalizedEquation, a: f64, b: f64, positive: bool) -> Vec<f64> {
    let s = if positive { 1.0 } else { -1.0 };
    let (xm, vm) = golden_min(|x| disp(eq, x).map_or(f64::INFINITY, |d| s * d), a, b, 1e-12 * (1.0 + a.abs()));
    if !vm.is_finite() {
        return Vec::new();
    }
    let tol = TANGENT_TOL * xm.abs().max(1.0);
    if vm > tol {
        return Vec::new();
    }
    if vm >= 0.0 {
        return vec![xm];
    }
    // the extremum dips through zero: two nearby simple roots
    let left = bracket_root(eq, a, xm);
    let right = bracket_root(eq, xm, b);
    match (left, right) {
        (Some(l), Some(r)) if same_point(l, r) => vec![xm],
        (l, r) => l.into_iter().chain(r).collect(),
    }
}

fn polish(eq: &NormalizedEquation, x: f64) -> f64 {
    let Some(d) = disp(eq, x) else { return x };
    if d == 0.0 {
        return x;
    }
    let Ok(j) = jet(eq, x, 1) else { return x };
    let slope = j.d1 - 1.0;
    if slope.abs() < 1e-6 {
        return x;
    }
    let y = x - d / slope;
    match disp(eq, y) {
        Some(dy) if dy.abs() < d.abs() && (y - x).abs() < 1e-6 * (1.0 + x.abs()) => y,
        _ => x,
    }
}

fn cycle_jet(eq: &NormalizedEquation, x0: f64) -> Result<PoincareJet, CyclesError> {
    match jet(eq, x0, 3) {
        Ok(j) => Ok(j),
        Err(PoincareError::Unresolved { .. }) => {
            let h = 1e-5 * (1.0 + x0.abs());
            let p = |x| crate::poincare::poincare(eq, x);
            let (pp, pm, p0) = (p(x0 + h)?, p(x0 - h)?, p(x0)?);
            Ok(PoincareJet {
                value: p0,
                d1: (pp - pm) / (2.0 * h),
                d2: Some((pp - 2.0 * p0 + pm) / (h * h)),
                d3: None,
                route: Route::Difference,
            })
        }
        Err(e) => Err(e.into()),
    }
}

fn scan_region(eq: &NormalizedEquation, region: &Region, opts: &CycleOptions) -> Vec<f64> {
    let sample = |g: usize, js: Vec<usize>| -> Vec<(usize, f64, Option<f64>)> {
        js.into_par_iter()
            .map(|j| {
                let x = region.map(j as f64 / g as f64);
                (j, x, disp(eq, x))
            })
            .collect()
    };
    let mut g = opts.grid;
    let mut pts: Vec<(f64, Option<f64>)> = sample(g, (0..=g).collect()).into_iter().map(|(_, x, d)| (x, d)).collect();
    let mut found = dedup(detect(eq, &pts));
    while opts.refine && g < MAX_GRID {
        let fresh = sample(2 * g, (0..g).map(|j| 2 * j + 1).collect());
        let mut merged = Vec::with_capacity(2 * g + 1);
        for (i, p) in pts.iter().enumerate() {
            merged.push(*p);
            if let Some(&(_, x, d)) = fresh.get(i) {
                merged.push((x, d));
            }
        }
        pts = merged;
        g *= 2;
        let next = dedup(detect(eq, &pts));
        let settled = next.len() == found.len();
        found = next;
        if settled {
            break;
        }
    }
    found
}

fn dedup(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| same_point(*a, *b));
    xs
}

/// Limit cycles with the default options and the given starting grid.
pub fn find_cycles(eq: &NormalizedEquation, grid: usize) -> Result<Vec<LimitCycle>, CyclesError> {
    find_cycles_with(eq, &CycleOptions { grid, ..CycleOptions::default() })
}

/// Scan, refine and classify fixed points of the period map.
pub fn find_cycles_with(eq: &NormalizedEquation, opts: &CycleOptions) -> Result<Vec<LimitCycle>, CyclesError> {
    if opts.grid < MIN_GRID {
        return Err(CyclesError::GridTooSmall(opts.grid));
    }
    if eq.sum_is_zero() {
        return Err(CyclesError::Annulus);
    }
    let within = |x: f64| opts.window.is_none_or(|(lo, hi)| lo <= x && x <= hi);
    let clip = |lo: f64, hi: f64| -> (f64, f64) {
        opts.window.map_or((lo, hi), |(a, b)| (lo.max(a), hi.min(b)))
    };
    let report = if eq.n() == 2 { Some(partition(eq)?) } else { None };
    let mut regions = Vec::new();
    match &report {
        Some(rep) => {
            for (i, iv) in rep.intervals.iter().enumerate() {
                if iv.verdict == Verdict::None {
                    continue;
                }
                let (lo, hi) = clip(iv.lo, iv.hi);
                split_region(lo, hi, eq.window(), Some(i), &mut regions);
            }
        }
        None => {
            let d = eq.state_interval();
            let (lo, hi) = clip(d.lo, d.hi);
            split_region(lo, hi, eq.window(), None, &mut regions);
        }
    }

    let constants: Vec<LimitCycle> =
        constant_cycles_any(eq, opts.hyperbolic_tol)?.into_iter().filter(|c| within(c.x0)).collect();

    let mut xs: Vec<(f64, Option<usize>)> = Vec::new();
    for r in &regions {
        for x in scan_region(eq, r, opts) {
            xs.push((polish(eq, x), r.interval));
        }
    }
    xs.sort_by(|a, b| a.0.total_cmp(&b.0));
    xs.dedup_by(|a, b| same_point(a.0, b.0));

    let mut cycles = Vec::new();
    for (x, interval) in xs {
        if constants.iter().any(|c| same_point(c.x0, x)) {
            continue;
        }
        let jet = cycle_jet(eq, x)?;
        let (multiplicity, stability) = classify(&jet, opts.hyperbolic_tol);
        cycles.push((LimitCycle { x0: x, kind: CycleKind::NonConstant, multiplicity, stability, jet }, interval));
    }

    if let Some(rep) = &report {
        for (i, iv) in rep.intervals.iter().enumerate() {
            let inside: Vec<&LimitCycle> =
                cycles.iter().filter(|(_, k)| *k == Some(i)).map(|(c, _)| c).collect();
            let over = iv.verdict.bound().is_some_and(|b| inside.len() > b);
            let non_hyp = iv.verdict == Verdict::AtMostOneHyperbolic && inside.iter().any(|c| c.multiplicity > 1);
            if over || non_hyp {
                return Err(CyclesError::ConsistencyAlarm {
                    lo: iv.lo,
                    hi: iv.hi,
                    found: inside.len(),
                    verdict: iv.verdict,
                });
            }
        }
    }

    let mut out: Vec<LimitCycle> = constants;
    out.extend(cycles.into_iter().map(|(c, _)| c));
    out.sort_by(|a, b| a.x0.total_cmp(&b.x0));
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessBound {
    pub applicable: bool,
    /// Common sign of the order-`k` derivatives: 1, -1, or 0 when not applicable.
    pub sign: i8,
    pub bound: Option<usize>,
}

/// Sign of a field on the state interval: `Some(0)` if identically zero, `None` if it changes sign.
fn definite_sign(f: &ScalarField, eq: &NormalizedEquation) -> Result<Option<i8>, CyclesError> {
    if f.is_identically_zero() {
        return Ok(Some(0));
    }
    let d = eq.state_interval();
    if f.sign_changes((d.lo, d.hi))?.count > 0 {
        return Ok(None);
    }
    let (lo, hi) = eq.window();
    let probe = (0..=16)
        .map(|i| f.value(lo + (hi - lo) * (i as f64 + 0.5) / 17.0))
        .fold(0.0_f64, |m, v| if v.abs() > m.abs() { v } else { m });
    Ok(Some(if probe > 0.0 {
        1
    } else if probe < 0.0 {
        -1
    } else {
        0
    }))
}

/// At most `k` periodic solutions when every order-`k` derivative keeps one sign.
pub fn smoothness_bound(eq: &NormalizedEquation, k: usize) -> Result<SmoothnessBound, CyclesError> {
    if !(1..=3).contains(&k) {
        return Err(CyclesError::Precondition(format!("order {k} not in 1..=3")));
    }
    let none = SmoothnessBound { applicable: false, sign: 0, bound: None };
    let mut common = 0i8;
    for f in eq.pieces() {
        let Some(s) = definite_sign(&f.derivative_field(k)?, eq)? else {
            return Ok(none);
        };
        if s == 0 {
            continue;
        }
        if common != 0 && s != common {
            return Ok(none);
        }
        common = s;
    }
    if common == 0 {
        return Ok(none);
    }
    Ok(SmoothnessBound { applicable: true, sign: common, bound: Some(k) })
}

/// `∫ dx / f2` from `x0` to `P(x0)`; zero exactly at periodic `x0`.
pub fn annulus_integral(eq: &NormalizedEquation, x0: f64) -> Result<f64, CyclesError> {
    require_two(eq)?;
    let p = crate::poincare::poincare(eq, x0)?;
    traverse_time(eq.piece(1), x0, p).map_err(|e| match e {
        FlowError::Singular { at } => CyclesError::Singular { at },
        _ => CyclesError::Singular { at: x0 },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbelDiagnostics {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// `A x0 x1 - B (x0 + x1) - C`.
    pub g: f64,
    /// Sign of `x0 x1 (x1 - x0) / (f1(x0) f2(x1))`.
    pub alpha: f64,
    /// `P'` from the determinant form.
    pub p1_formula: f64,
    /// Side of the hyperbola `G = 0`: 1, -1 or 0 within tolerance.
    pub side: i8,
    pub sign_consistent: bool,
}

/// `(a, b, c)` of `a x^3 + b x^2 + c x`.
fn abel_coeffs(f: &ScalarField) -> Option<[f64; 3]> {
    if !f.is_polynomial() {
        return None;
    }
    let den = f.denominator().coeffs()[0];
    let n = f.numerator().coeffs();
    if n.len() > 4 || n.first().is_some_and(|c| *c != 0.0) {
        return None;
    }
    let at = |i: usize| n.get(i).copied().unwrap_or(0.0) / den;
    Some([at(3), at(2), at(1)])
}

/// The determinants `A, B, C` of a two-piece Abel equation.
pub fn abel_determinants(eq: &NormalizedEquation) -> Result<(f64, f64, f64), CyclesError> {
    require_two(eq)?;
    let not_abel = || CyclesError::Precondition("pieces are not cubics through the origin".into());
    let [a1, b1, c1] = abel_coeffs(eq.piece(0)).ok_or_else(not_abel)?;
    let [a2, b2, c2] = abel_coeffs(eq.piece(1)).ok_or_else(not_abel)?;
    Ok((a1 * b2 - a2 * b1, c1 * a2 - c2 * a1, c1 * b2 - c2 * b1))
}

/// Determinant form of `P'` at a non-constant cycle, cross-checked against its jet.
pub fn abel_diagnostics(eq: &NormalizedEquation, cycle: &LimitCycle) -> Result<AbelDiagnostics, CyclesError> {
    let (a, b, c) = abel_determinants(eq)?;
    if cycle.kind != CycleKind::NonConstant {
        return Err(CyclesError::Precondition("cycle must be non-constant".into()));
    }
    let k = knots(eq, cycle.x0)?;
    let (x0, x1) = (k.knots[0], k.knots[1]);
    let g = a * x0 * x1 - b * (x0 + x1) - c;
    let factor = x0 * x1 * (x1 - x0) / (eq.piece(0).value(x0) * eq.piece(1).value(x1));
    let p1_formula = 1.0 + factor * g;
    let alpha = factor.signum();
    let scale = a.abs() * (x0 * x1).abs() + b.abs() * (x0 + x1).abs() + c.abs();
    let side = if g.abs() <= 1e-9 * scale.max(1e-300) {
        0
    } else if g > 0.0 {
        1
    } else {
        -1
    };
    let d1 = cycle.jet.d1 - 1.0;
    let sign_consistent = if d1.abs() <= HYPERBOLIC_TOL || side == 0 {
        // non-hyperbolic: multiplicity at most two
        cycle.multiplicity <= 2
    } else {
        d1.signum() == alpha * side as f64
    };
    Ok(AbelDiagnostics { a, b, c, g, alpha, p1_formula, side, sign_consistent })
}
