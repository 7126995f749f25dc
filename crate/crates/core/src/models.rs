//! Preset equations: seasonal harvesting, two-season Abel, sterile-release mosquito suppression.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::continuation::RotatedFamily;
use crate::cycles::{find_cycles, CycleKind, CyclesError};
use crate::equation::{EquationError, PiecewiseEquation};
use crate::field::{Domain, FieldError, ScalarField};
use crate::numeric::golden_min;

pub const T3_GRID: usize = 4096;
const T3_CLIP: f64 = 1e-8;
const T3_TOL: f64 = 1e-10;
const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("growth law hypothesis fails: {0}")]
    Hypothesis(String),
    #[error("wrong release strategy: {0}")]
    WrongStrategy(String),
    #[error("degenerate model: {0}")]
    Degenerate(String),
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error(transparent)]
    Equation(#[from] EquationError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Cycles(#[from] CyclesError),
}

fn positive(name: &str, v: f64) -> Result<(), ModelError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ModelError::BadParameter(format!("{name} = {v} must be positive")))
    }
}

// ---------------------------------------------------------------- harvesting

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarvestSpec {
    pub g: ScalarField,
    pub h: f64,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "T1")]
    pub t1: f64,
}

impl HarvestSpec {
    /// Logistic growth `x (1 - x)`.
    pub fn logistic(h: f64, t: f64, t1: f64) -> Self {
        let g = ScalarField::polynomial(&[0.0, 1.0, -1.0], Domain::non_negative()).expect("valid polynomial");
        HarvestSpec { g, h, t, t1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarvestThresholds {
    pub k0: f64,
    pub capacity: f64,
    pub h_star: f64,
    /// `(h*, T/(T - T1) h*)`, the interval holding the fold.
    pub bracket: (f64, f64),
}

/// `(k0, K)` when `g` satisfies the growth law hypothesis on `[0, ∞)`.
pub fn check_hypothesis(g: &ScalarField) -> Result<(f64, f64), ModelError> {
    let g = g.with_domain(Domain::non_negative())?;
    let fail = |s: &str| Err(ModelError::Hypothesis(s.to_string()));
    if g.value(0.0).abs() > 1e-12 {
        return fail("g(0) = 0");
    }
    let eps = |x: f64| 1e-9 * (1.0 + x);
    let zeros: Vec<f64> = g.all_zeros()?.locations().into_iter().filter(|&x| x > eps(0.0)).collect();
    let [k] = zeros[..] else {
        return fail("g has exactly one positive zero K");
    };
    let dg = g.derivative_field(1)?;
    let crit: Vec<f64> = dg.all_zeros()?.locations().into_iter().filter(|&x| x > eps(0.0)).collect();
    let [k0] = crit[..] else {
        return fail("g' has exactly one positive zero k0");
    };
    if k0 >= k {
        return fail("0 < k0 < K");
    }
    // g' keeps its sign between critical points, so probes away from k0 suffice
    let below = [0.0, 0.5 * k0];
    if below.iter().any(|&x| dg.value(x) <= 0.0) {
        return fail("g'(x) > 0 on [0, k0)");
    }
    let above = [0.5 * (k0 + k), k, 2.0 * k + 1.0, 1e3 * (k + 1.0)];
    if above.iter().any(|&x| dg.value(x) >= 0.0) {
        return fail("g'(x) < 0 on (k0, ∞)");
    }
    Ok((k0, k))
}

pub fn harvest_thresholds(spec: &HarvestSpec) -> Result<HarvestThresholds, ModelError> {
    positive("T1", spec.t1)?;
    if spec.t <= spec.t1 {
        return Err(ModelError::BadParameter(format!("T = {} must exceed T1 = {}", spec.t, spec.t1)));
    }
    let (k0, capacity) = check_hypothesis(&spec.g)?;
    let h_star = spec.g.value(k0);
    Ok(HarvestThresholds { k0, capacity, h_star, bracket: (h_star, spec.t / (spec.t - spec.t1) * h_star) })
}

/// Growth `g` on `[0, T1)`, harvesting `g - h` on `[T1, T)`.
pub fn harvesting_model(spec: &HarvestSpec) -> Result<(PiecewiseEquation, HarvestThresholds), ModelError> {
    let th = harvest_thresholds(spec)?;
    if !(spec.h >= 0.0) {
        return Err(ModelError::BadParameter(format!("h = {} must be non-negative", spec.h)));
    }
    let eq = harvest_equation(&spec.g, spec.h, spec.t, spec.t1)?;
    Ok((eq, th))
}

fn harvest_equation(g: &ScalarField, h: f64, t: f64, t1: f64) -> Result<PiecewiseEquation, EquationError> {
    let d = Domain::non_negative();
    let g = g.with_domain(d).map_err(|source| EquationError::Piece { piece: 1, source })?;
    let shift = ScalarField::rational(&[-h], &[1.0], d).map_err(|source| EquationError::Piece { piece: 2, source })?;
    let g2 = g.add(&shift).map_err(|source| EquationError::Piece { piece: 2, source })?;
    PiecewiseEquation::two_piece(g, g2, t1, t, d)
}

/// The harvesting equation as a family in the yield `h`.
pub fn harvesting_family(spec: &HarvestSpec) -> Result<RotatedFamily, ModelError> {
    let th = harvest_thresholds(spec)?;
    let (g, t, t1) = (spec.g.clone(), spec.t, spec.t1);
    Ok(RotatedFamily::new(move |h| harvest_equation(&g, h, t, t1), (0.0, 2.0 * th.bracket.1)))
}

// ---------------------------------------------------------------------- Abel

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbelSpec {
    pub a1: f64,
    pub b1: f64,
    pub c1: f64,
    pub a2: f64,
    pub b2: f64,
    pub c2: f64,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "T1")]
    pub t1: f64,
    #[serde(default = "Domain::real_line")]
    pub state_interval: Domain,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbelDeterminants {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl AbelSpec {
    pub fn new(first: [f64; 3], second: [f64; 3], t: f64, t1: f64) -> Self {
        let [a1, b1, c1] = first;
        let [a2, b2, c2] = second;
        AbelSpec { a1, b1, c1, a2, b2, c2, t, t1, state_interval: Domain::real_line() }
    }

    /// Logistic growth `r x (1 - x / K)` for `T1`, then decay `-d x`.
    pub fn from_logistic_decay(r: f64, k: f64, d: f64, t: f64, t1: f64) -> Self {
        AbelSpec {
            state_interval: Domain::non_negative(),
            ..AbelSpec::new([0.0, -r / k, r], [0.0, 0.0, -d], t, t1)
        }
    }

    pub fn determinants(&self) -> AbelDeterminants {
        AbelDeterminants {
            a: self.a1 * self.b2 - self.a2 * self.b1,
            b: self.c1 * self.a2 - self.c2 * self.a1,
            c: self.c1 * self.b2 - self.c2 * self.b1,
        }
    }

    pub fn equation(&self) -> Result<PiecewiseEquation, ModelError> {
        positive("T1", self.t1)?;
        if self.t <= self.t1 {
            return Err(ModelError::BadParameter(format!("T = {} must exceed T1 = {}", self.t, self.t1)));
        }
        let d = self.state_interval;
        let f1 = ScalarField::polynomial(&[0.0, self.c1, self.b1, self.a1], d)?;
        let f2 = ScalarField::polynomial(&[0.0, self.c2, self.b2, self.a2], d)?;
        Ok(PiecewiseEquation::two_piece(f1, f2, self.t1, self.t, d)?)
    }
}

pub fn abel_model(spec: &AbelSpec) -> Result<(PiecewiseEquation, AbelDeterminants), ModelError> {
    Ok((spec.equation()?, spec.determinants()))
}

// ------------------------------------------------------------------ mosquito

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MosquitoSpec {
    pub a: f64,
    pub mu: f64,
    pub xi: f64,
    /// Release amount.
    pub c: f64,
    /// Waiting period between releases.
    #[serde(rename = "T")]
    pub t: f64,
    /// Sexual lifespan of released individuals.
    #[serde(rename = "T_bar")]
    pub t_bar: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    LongWait,
    ShortWait,
}

impl MosquitoSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (n, v) in [("a", self.a), ("mu", self.mu), ("xi", self.xi), ("c", self.c), ("T", self.t), ("T_bar", self.t_bar)]
        {
            positive(n, v)?;
        }
        if self.a <= self.mu {
            return Err(ModelError::BadParameter(format!("a = {} must exceed mu = {}", self.a, self.mu)));
        }
        Ok(())
    }

    /// Carrying capacity `(a - mu) / xi` without releases.
    pub fn capacity(&self) -> f64 {
        (self.a - self.mu) / self.xi
    }

    pub fn strategy(&self) -> Result<Strategy, ModelError> {
        self.validate()?;
        if self.t > self.t_bar {
            Ok(Strategy::LongWait)
        } else if self.t < self.t_bar {
            Ok(Strategy::ShortWait)
        } else {
            Err(ModelError::WrongStrategy("T = T_bar belongs to neither strategy".into()))
        }
    }

    /// `p = floor(T_bar / T)` and `q = T_bar - p T`.
    pub fn p_q(&self) -> (u32, f64) {
        let p = (self.t_bar / self.t).floor();
        (p as u32, self.t_bar - p * self.t)
    }
}

/// `w (a w / (w + s) - mu - xi (w + s))` with release level `s`.
fn release_piece(spec: &MosquitoSpec, s: f64) -> Result<ScalarField, FieldError> {
    let MosquitoSpec { a, mu, xi, .. } = *spec;
    ScalarField::rational(
        &[0.0, -(xi * s * s + mu * s), a - mu - 2.0 * xi * s, -xi],
        &[s, 1.0],
        Domain::non_negative(),
    )
}

/// Logistic piece `-xi (w - A) w`.
fn free_piece(spec: &MosquitoSpec) -> Result<ScalarField, FieldError> {
    ScalarField::polynomial(&[0.0, spec.a - spec.mu, -spec.xi], Domain::non_negative())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LongWaitThresholds {
    pub g_star: f64,
    pub c_star: f64,
    pub t_star: f64,
}

pub fn long_wait_thresholds(spec: &MosquitoSpec) -> LongWaitThresholds {
    let MosquitoSpec { a, mu, xi, c, t_bar, .. } = *spec;
    let g_star = (a - mu).powi(2) / (4.0 * xi * a);
    let c_star = (-a + (a * a + 4.0 * a * (a - mu)).sqrt()) / (2.0 * xi);
    let t_star = (a + xi * c) / (a - mu) * t_bar;
    debug_assert!(g_star < c_star);
    LongWaitThresholds { g_star, c_star, t_star }
}

/// Release active on `[0, T_bar)`, absent on `[T_bar, T)`.
pub fn mosquito_long_wait(spec: &MosquitoSpec) -> Result<(PiecewiseEquation, LongWaitThresholds), ModelError> {
    if spec.strategy()? != Strategy::LongWait {
        return Err(ModelError::WrongStrategy(format!("long-wait needs T > T_bar, got T = {}", spec.t)));
    }
    let eq = PiecewiseEquation::two_piece(
        release_piece(spec, spec.c)?,
        free_piece(spec)?,
        spec.t_bar,
        spec.t,
        Domain::non_negative(),
    )?;
    Ok((eq, long_wait_thresholds(spec)))
}

/// The long-wait equation as a family in the release amount `c`.
pub fn long_wait_family(spec: &MosquitoSpec) -> Result<RotatedFamily, ModelError> {
    mosquito_long_wait(spec)?;
    let base = *spec;
    let c_star = long_wait_thresholds(spec).c_star;
    Ok(RotatedFamily::new(
        move |c| {
            let s = MosquitoSpec { c, ..base };
            let d = Domain::non_negative();
            let f1 = release_piece(&s, c).map_err(|source| EquationError::Piece { piece: 1, source })?;
            let f2 = free_piece(&s).map_err(|source| EquationError::Piece { piece: 2, source })?;
            PiecewiseEquation::two_piece(f1, f2, s.t_bar, s.t, d)
        },
        (1e-6 * c_star, 4.0 * c_star),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShortWaitThresholds {
    pub p: u32,
    pub q: f64,
    pub g1_star: f64,
    pub g2_star: f64,
    /// Zero for `c <= g1*` or `c >= g2*`.
    pub t_triple_star: f64,
}

/// Positive zeros of `-xi w^2 + (a - mu - 2 xi s) w - (xi s^2 + mu s)`, ascending.
pub fn release_zeros(spec: &MosquitoSpec, s: f64) -> Option<(f64, f64)> {
    let MosquitoSpec { a, mu, xi, .. } = *spec;
    let b = a - mu - 2.0 * xi * s;
    let disc = (a - mu).powi(2) - 4.0 * xi * s * a;
    if disc < 0.0 {
        return None;
    }
    let r = disc.sqrt();
    let (lo, hi) = if b >= 0.0 { ((b - r) / (2.0 * xi), (b + r) / (2.0 * xi)) } else { return None };
    // the smaller root via the product of roots for accuracy
    let prod = (xi * s * s + mu * s) / xi;
    let lo = if hi > 0.0 { prod / hi } else { lo };
    Some((lo, hi))
}

fn hat(spec: &MosquitoSpec, s: f64, w: f64) -> f64 {
    let u = w + s;
    -spec.xi * u * u - spec.mu * u + spec.a * w
}

/// The quantity minimized in the definition of `T***`.
pub fn t3_objective(spec: &MosquitoSpec, w: f64) -> f64 {
    let (p, q) = spec.p_q();
    let (s1, s2) = ((p as f64 + 1.0) * spec.c, p as f64 * spec.c);
    q * (1.0 - (w + s2) / (w + s1) * hat(spec, s1, w) / hat(spec, s2, w))
}

/// `T***` by a dense grid and golden-section refinement.
pub fn t_triple_star_with(spec: &MosquitoSpec, grid: usize) -> f64 {
    let (p, _) = spec.p_q();
    let (g1, g2) = short_wait_g(spec, p);
    if spec.c <= g1 || spec.c >= g2 {
        return 0.0;
    }
    let Some((l1, l2)) = release_zeros(spec, p as f64 * spec.c) else {
        return 0.0;
    };
    let (lo, hi) = (l1 + T3_CLIP, l2 - T3_CLIP);
    let step = (hi - lo) / grid as f64;
    let best = (0..=grid)
        .map(|k| (k, t3_objective(spec, lo + step * k as f64)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| k)
        .unwrap_or(0);
    let a = lo + step * best.saturating_sub(1) as f64;
    let b = (lo + step * (best + 1) as f64).min(hi);
    golden_min(|w| t3_objective(spec, w), a, b, T3_TOL).1
}

pub fn t_triple_star(spec: &MosquitoSpec) -> f64 {
    t_triple_star_with(spec, T3_GRID)
}

fn short_wait_g(spec: &MosquitoSpec, p: u32) -> (f64, f64) {
    let base = (spec.a - spec.mu).powi(2) / (4.0 * spec.a * spec.xi);
    (base / (p as f64 + 1.0), base / p as f64)
}

/// Release `(p+1) c` on `[0, q)`, `p c` on `[q, T)`.
pub fn mosquito_short_wait(spec: &MosquitoSpec) -> Result<(PiecewiseEquation, ShortWaitThresholds), ModelError> {
    if spec.strategy()? != Strategy::ShortWait {
        return Err(ModelError::WrongStrategy(format!("short-wait needs T < T_bar, got T = {}", spec.t)));
    }
    let (p, q) = spec.p_q();
    if q <= 1e-12 * spec.t_bar {
        return Err(ModelError::Degenerate(format!("q = 0: T_bar is a multiple of T, single release level {p} c")));
    }
    let (g1_star, g2_star) = short_wait_g(spec, p);
    let eq = PiecewiseEquation::two_piece(
        release_piece(spec, (p as f64 + 1.0) * spec.c)?,
        release_piece(spec, p as f64 * spec.c)?,
        q,
        spec.t,
        Domain::non_negative(),
    )?;
    Ok((eq, ShortWaitThresholds { p, q, g1_star, g2_star, t_triple_star: t_triple_star(spec) }))
}

/// The long-wait equation in `x = w / (w + c)`, a cubic Abel equation on `[0, 1)`.
pub fn cherkas_transform(spec: &MosquitoSpec) -> Result<AbelSpec, ModelError> {
    if spec.strategy()? != Strategy::LongWait {
        return Err(ModelError::WrongStrategy("the transform applies to the long-wait model".into()));
    }
    let MosquitoSpec { a, mu, xi, c, t, t_bar } = *spec;
    let cap = spec.capacity();
    Ok(AbelSpec {
        state_interval: Domain::new(0.0, 1.0)?,
        ..AbelSpec::new([-a, a + mu, -(mu + xi * c)], [0.0, -xi * (cap + c), xi * cap], t, t_bar)
    })
}

/// `(h1 + h2) / (2 w)` for the long-wait model, and its derivative.
pub fn long_wait_g(spec: &MosquitoSpec, w: f64) -> (f64, f64) {
    let MosquitoSpec { a, mu, xi, c, t, t_bar } = *spec;
    let t_star = long_wait_thresholds(spec).t_star;
    let value = (a * t_bar / (w + c) - xi * t) * w + (a - mu) * (t - t_star);
    let slope = a * c * t_bar / (w + c).powi(2) - xi * t;
    (value, slope)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountKind {
    Exactly,
    AtMost,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeVerdict {
    pub strategy: Strategy,
    pub row: String,
    pub column: String,
    pub verdict: String,
    pub count_kind: CountKind,
    /// Non-constant cycles the cell prescribes.
    pub non_constant: u32,
    /// Boundaries the parameters sit on exactly.
    pub boundaries: Vec<String>,
}

fn on(x: f64, b: f64) -> bool {
    (x - b).abs() <= BOUNDARY_TOL * (1.0 + b.abs())
}

const TWO_LAS: &str = "exact two NC cycles + E0 LAS";
const AT_MOST_TWO: &str = "at most two NC cycles + E0 LAS";
const E0_GAS: &str = "E0 GAS";
const UNIQUE: &str = "unique GAS NC cycle, E0 US";

/// The table cell for `(T, c)`.
pub fn classify_regime(spec: &MosquitoSpec) -> Result<RegimeVerdict, ModelError> {
    let strategy = spec.strategy()?;
    let mut boundaries = Vec::new();
    let (row, column, verdict, kind, n) = match strategy {
        Strategy::LongWait => {
            let th = long_wait_thresholds(spec);
            let (t, c) = (spec.t, spec.c);
            for (name, x, b) in [("c = g*", c, th.g_star), ("c = c*", c, th.c_star), ("T = T*", t, th.t_star)] {
                if on(x, b) {
                    boundaries.push(name.to_string());
                }
            }
            let t_eq = on(t, th.t_star);
            let below = t < th.t_star && !t_eq;
            let row = if below { "T_bar < T < T*" } else if t_eq { "T = T*" } else { "T > T*" };
            let column = if c <= th.g_star || on(c, th.g_star) {
                "0 < c <= g*"
            } else if c < th.c_star && !on(c, th.c_star) {
                "g* < c < c*"
            } else {
                "c >= c*"
            };
            let cell = match (below, t_eq, column) {
                (true, _, "0 < c <= g*") => (TWO_LAS, CountKind::Exactly, 2),
                (true, _, "g* < c < c*") => (AT_MOST_TWO, CountKind::AtMost, 2),
                (_, false, "c >= c*") if below => (E0_GAS, CountKind::Exactly, 0),
                (false, true, "c >= c*") => (E0_GAS, CountKind::Exactly, 0),
                _ => (UNIQUE, CountKind::Exactly, 1),
            };
            (row, column, cell.0, cell.1, cell.2)
        }
        Strategy::ShortWait => {
            let (p, q) = spec.p_q();
            if q <= 1e-12 * spec.t_bar {
                return Err(ModelError::Degenerate("q = 0".into()));
            }
            let (g1, g2) = short_wait_g(spec, p);
            let t3 = t_triple_star(spec);
            let c = spec.c;
            for (name, x, b) in [("c = g1*", c, g1), ("c = g2*", c, g2)] {
                if on(x, b) {
                    boundaries.push(name.to_string());
                }
            }
            if t3 > 0.0 && on(spec.t, t3) {
                boundaries.push("T = T***".to_string());
            }
            let row = if t3 > 0.0 && on(spec.t, t3) {
                "T = T***"
            } else if spec.t < t3 {
                "0 < T < T***"
            } else {
                "T*** < T < T_bar"
            };
            let (column, cell) = if c <= g1 || on(c, g1) {
                ("0 < c <= g1*", (TWO_LAS, CountKind::Exactly, 2))
            } else if c < g2 && !on(c, g2) {
                let cell = if spec.t <= t3 || on(spec.t, t3) {
                    (E0_GAS, CountKind::Exactly, 0)
                } else {
                    (AT_MOST_TWO, CountKind::AtMost, 2)
                };
                ("g1* < c < g2*", cell)
            } else {
                ("c >= g2*", (E0_GAS, CountKind::Exactly, 0))
            };
            (row, column, cell.0, cell.1, cell.2)
        }
    };
    Ok(RegimeVerdict {
        strategy,
        row: row.to_string(),
        column: column.to_string(),
        verdict: verdict.to_string(),
        count_kind: kind,
        non_constant: n,
        boundaries,
    })
}

/// The mosquito equation for either strategy.
pub fn mosquito_model(spec: &MosquitoSpec) -> Result<PiecewiseEquation, ModelError> {
    match spec.strategy()? {
        Strategy::LongWait => Ok(mosquito_long_wait(spec)?.0),
        Strategy::ShortWait => Ok(mosquito_short_wait(spec)?.0),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeCheck {
    pub verdict: RegimeVerdict,
    pub found: u32,
    pub consistent: bool,
}

/// Compare the table cell with the non-constant cycles actually found.
pub fn cross_check(spec: &MosquitoSpec, grid: usize) -> Result<RegimeCheck, ModelError> {
    let verdict = classify_regime(spec)?;
    let eq = mosquito_model(spec)?;
    let cycles = find_cycles(eq.normalized(), grid)?;
    let found: u32 = cycles.iter().filter(|c| c.kind == CycleKind::NonConstant).map(|c| c.multiplicity).sum();
    let consistent = match verdict.count_kind {
        CountKind::Exactly => found == verdict.non_constant,
        CountKind::AtMost => found <= verdict.non_constant,
    };
    Ok(RegimeCheck { verdict, found, consistent })
}
