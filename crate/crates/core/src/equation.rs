//! Piecewise-autonomous periodic equations and their unit-period normal form.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{Domain, FieldError, ScalarField, ZeroList};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquationError {
    #[error("an equation needs at least one piece")]
    NoPieces,
    #[error("expected {expected} breakpoints for {pieces} pieces, got {got}")]
    BreakpointCount { pieces: usize, expected: usize, got: usize },
    #[error("first breakpoint must be 0, got {0}")]
    BadStart(f64),
    #[error("non-monotone breakpoints at piece {piece}: {left} >= {right}")]
    NonMonotone { piece: usize, left: f64, right: f64 },
    #[error("period {period} differs from the last breakpoint {last}")]
    PeriodMismatch { period: f64, last: f64 },
    #[error("piece {piece}: {source}")]
    Piece { piece: usize, source: FieldError },
    #[error("piece {piece} is identically zero")]
    ZeroPiece { piece: usize },
    #[error("piece {piece} has infinitely many zeros on the state interval")]
    UncountedZeros { piece: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// `dx/dt = f_i(x)` for `t` in `[T_{i-1}, T_i)`, extended with period `T_n`.
#[derive(Debug, Clone)]
pub struct PiecewiseEquation {
    pieces: Vec<ScalarField>,
    breakpoints: Vec<f64>,
    state_interval: Domain,
    normalized: OnceLock<NormalizedEquation>,
}

impl PartialEq for PiecewiseEquation {
    fn eq(&self, other: &Self) -> bool {
        self.pieces == other.pieces
            && self.breakpoints == other.breakpoints
            && self.state_interval == other.state_interval
    }
}

impl PiecewiseEquation {
    pub fn new(
        pieces: Vec<ScalarField>,
        breakpoints: Vec<f64>,
        state_interval: Domain,
    ) -> Result<Self, EquationError> {
        if pieces.is_empty() {
            return Err(EquationError::NoPieces);
        }
        if breakpoints.len() != pieces.len() + 1 {
            return Err(EquationError::BreakpointCount {
                pieces: pieces.len(),
                expected: pieces.len() + 1,
                got: breakpoints.len(),
            });
        }
        if breakpoints[0] != 0.0 {
            return Err(EquationError::BadStart(breakpoints[0]));
        }
        for (i, w) in breakpoints.windows(2).enumerate() {
            if !(w[0] < w[1]) || !w[1].is_finite() {
                return Err(EquationError::NonMonotone { piece: i + 1, left: w[0], right: w[1] });
            }
        }
        let mut shared = Vec::with_capacity(pieces.len());
        for (i, p) in pieces.into_iter().enumerate() {
            let piece = i + 1;
            let f = if p.domain() == state_interval {
                p
            } else {
                if !p.domain().contains_domain(&state_interval) {
                    return Err(EquationError::Piece {
                        piece,
                        source: FieldError::WindowOutsideDomain {
                            lo: state_interval.lo,
                            hi: state_interval.hi,
                        },
                    });
                }
                p.with_domain(state_interval)
                    .map_err(|source| EquationError::Piece { piece, source })?
            };
            if f.is_identically_zero() {
                return Err(EquationError::ZeroPiece { piece });
            }
            shared.push(f);
        }
        Ok(PiecewiseEquation {
            pieces: shared,
            breakpoints,
            state_interval,
            normalized: OnceLock::new(),
        })
    }

    /// Two pieces on `[0, t1)` and `[t1, period)`.
    pub fn two_piece(
        f1: ScalarField,
        f2: ScalarField,
        t1: f64,
        period: f64,
        state_interval: Domain,
    ) -> Result<Self, EquationError> {
        PiecewiseEquation::new(vec![f1, f2], vec![0.0, t1, period], state_interval)
    }

    pub fn pieces(&self) -> &[ScalarField] {
        &self.pieces
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn period(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn n(&self) -> usize {
        self.pieces.len()
    }

    pub fn state_interval(&self) -> Domain {
        self.state_interval
    }

    /// Unit-period form, computed once.
    pub fn normalized(&self) -> &NormalizedEquation {
        self.normalized.get_or_init(|| normalize(self))
    }

    /// Zero lists per piece plus the annulus check on the sum.
    pub fn validate(&self) -> ValidationReport {
        let window = analysis_window(&self.pieces, self.state_interval);
        let zero_lists = self
            .pieces
            .iter()
            .map(|p| p.zeros(window, 1e-12).unwrap_or(ZeroList { roots: Vec::new(), certified: false }))
            .collect();
        let norm = self.normalized();
        let mut warnings = Vec::new();
        if norm.sum_is_zero() {
            let msg = if self.n() == 2 {
                "f1+f2 ≡ 0: periodic annulus, no limit cycles".to_string()
            } else {
                "sum of pieces ≡ 0: every solution is periodic".to_string()
            };
            warnings.push(msg);
        }
        ValidationReport { n: self.n(), zero_lists, annulus: norm.sum_is_zero(), warnings }
    }

    pub fn to_model(&self) -> ModelFile {
        ModelFile {
            period: self.period(),
            breakpoints: self.breakpoints.clone(),
            pieces: self.pieces.clone(),
            state_interval: self.state_interval,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n: usize,
    pub zero_lists: Vec<ZeroList>,
    pub annulus: bool,
    pub warnings: Vec<String>,
}

/// Finite window holding every zero of the pieces and of their sum, padded by 1.
pub fn analysis_window(pieces: &[ScalarField], interval: Domain) -> (f64, f64) {
    if interval.is_bounded() {
        return (interval.lo, interval.hi);
    }
    let mut bound: f64 = 0.0;
    for p in pieces {
        bound = bound.max(p.numerator().cauchy_bound());
    }
    if let Some(sum) = sum_fields(pieces) {
        bound = bound.max(sum.numerator().cauchy_bound());
    }
    let lo = if interval.lo.is_finite() { interval.lo } else { -(bound + 1.0) };
    let hi = if interval.hi.is_finite() { interval.hi } else { bound + 1.0 };
    let hi = if interval.lo.is_finite() { hi.max(interval.lo + 1.0) } else { hi };
    let lo = if interval.hi.is_finite() { lo.min(interval.hi - 1.0) } else { lo };
    (lo, hi)
}

fn sum_fields(pieces: &[ScalarField]) -> Option<ScalarField> {
    let mut it = pieces.iter();
    let first = it.next()?.clone();
    it.try_fold(first, |acc, p| acc.add(p).ok())
}

/// The equation rescaled to period 1 with `n` slots of length `1/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedEquation {
    pieces: Vec<ScalarField>,
    scales: Vec<f64>,
    state_interval: Domain,
    window: (f64, f64),
    sum: ScalarField,
}

/// Piece `i` becomes `n (T_i - T_{i-1}) f_i` on `[(i-1)/n, i/n)`.
pub fn normalize(eq: &PiecewiseEquation) -> NormalizedEquation {
    let n = eq.n() as f64;
    let scales: Vec<f64> = eq.breakpoints.windows(2).map(|w| n * (w[1] - w[0])).collect();
    let pieces: Vec<ScalarField> =
        eq.pieces.iter().zip(&scales).map(|(f, s)| f.scale(*s)).collect();
    NormalizedEquation::assemble(pieces, scales, eq.state_interval)
}

impl NormalizedEquation {
    fn assemble(pieces: Vec<ScalarField>, scales: Vec<f64>, state_interval: Domain) -> Self {
        let window = analysis_window(&pieces, state_interval);
        let sum = sum_fields(&pieces).expect("pieces share the state interval");
        NormalizedEquation { pieces, scales, state_interval, window, sum }
    }

    /// Build directly from already-normalized pieces on equal slots.
    pub fn from_pieces(pieces: Vec<ScalarField>, state_interval: Domain) -> Result<Self, EquationError> {
        let n = pieces.len();
        let bps = (0..=n).map(|i| i as f64 / n as f64).collect();
        let eq = PiecewiseEquation::new(pieces, bps, state_interval)?;
        Ok(normalize(&eq))
    }

    pub fn pieces(&self) -> &[ScalarField] {
        &self.pieces
    }

    pub fn piece(&self, i: usize) -> &ScalarField {
        &self.pieces[i]
    }

    pub fn n(&self) -> usize {
        self.pieces.len()
    }

    pub fn slot(&self) -> f64 {
        1.0 / self.pieces.len() as f64
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn state_interval(&self) -> Domain {
        self.state_interval
    }

    /// Finite analysis window clipped from the state interval.
    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    /// `f_1 + ... + f_n`.
    pub fn sum(&self) -> &ScalarField {
        &self.sum
    }

    pub fn sum_is_zero(&self) -> bool {
        self.sum.is_identically_zero()
    }

    /// As a period-1 equation with breakpoints `i/n`.
    pub fn to_equation(&self) -> PiecewiseEquation {
        let n = self.n();
        PiecewiseEquation::new(
            self.pieces.clone(),
            (0..=n).map(|i| i as f64 / n as f64).collect(),
            self.state_interval,
        )
        .expect("normalized equation is valid")
    }
}

/// On-disk model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub period: f64,
    pub breakpoints: Vec<f64>,
    pub pieces: Vec<ScalarField>,
    pub state_interval: Domain,
}

impl ModelFile {
    pub fn build(&self) -> Result<PiecewiseEquation, EquationError> {
        let last = self.breakpoints.last().copied().unwrap_or(f64::NAN);
        let eq = PiecewiseEquation::new(self.pieces.clone(), self.breakpoints.clone(), self.state_interval)?;
        if (self.period - last).abs() > 1e-12 * (1.0 + last.abs()) {
            return Err(EquationError::PeriodMismatch { period: self.period, last });
        }
        Ok(eq)
    }
}

/// Structural validation of a model description followed by the zero report.
pub fn validate(model: &ModelFile) -> Result<ValidationReport, EquationError> {
    Ok(model.build()?.validate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(c: &[f64]) -> ScalarField {
        ScalarField::polynomial(c, Domain::non_negative()).unwrap()
    }

    fn harvesting(h: f64) -> PiecewiseEquation {
        PiecewiseEquation::two_piece(p(&[0.0, 1.0, -1.0]), p(&[-h, 1.0, -1.0]), 1.0, 2.0, Domain::non_negative())
            .unwrap()
    }

    #[test]
    fn two_equal_slots_double_pieces() {
        let eq = harvesting(0.1);
        let n = eq.normalized();
        assert_eq!(n.scales(), &[2.0, 2.0]);
        assert_eq!(n.piece(0).numerator().coeffs(), &[0.0, 2.0, -2.0]);
        assert_eq!(n.piece(1).numerator().coeffs(), &[-0.2, 2.0, -2.0]);
    }

    #[test]
    fn single_piece_scales_by_period() {
        let eq = PiecewiseEquation::new(vec![p(&[0.0, 1.0])], vec![0.0, 3.0], Domain::non_negative()).unwrap();
        assert_eq!(eq.normalized().scales(), &[3.0]);
    }

    #[test]
    fn three_equal_slots_scale_by_period() {
        let eq = PiecewiseEquation::new(
            vec![p(&[1.0]), p(&[2.0]), p(&[3.0])],
            vec![0.0, 0.5, 1.0, 1.5],
            Domain::non_negative(),
        )
        .unwrap();
        for s in eq.normalized().scales() {
            assert_relative_eq!(*s, 1.5);
        }
    }

    #[test]
    fn non_monotone_breakpoints_rejected() {
        let e = PiecewiseEquation::new(vec![p(&[1.0]), p(&[2.0])], vec![0.0, 2.0, 1.0], Domain::non_negative());
        let err = e.unwrap_err();
        assert!(matches!(err, EquationError::NonMonotone { piece: 2, .. }));
        assert!(err.to_string().contains("non-monotone breakpoints"));
    }

    #[test]
    fn validation_lists_zeros() {
        let r = harvesting(0.1).validate();
        assert!(!r.annulus);
        let z1 = r.zero_lists[0].locations();
        assert_eq!(z1.len(), 2);
        assert_relative_eq!(z1[1], 1.0, epsilon = 1e-13);
        let s = 0.6_f64.sqrt();
        let z2 = r.zero_lists[1].locations();
        assert_relative_eq!(z2[0], (1.0 - s) / 2.0, epsilon = 1e-13);
        assert_relative_eq!(z2[1], (1.0 + s) / 2.0, epsilon = 1e-13);
    }

    #[test]
    fn annulus_warning() {
        let f = ScalarField::polynomial(&[0.0, 1.0, 0.0, -1.0], Domain::real_line()).unwrap();
        let eq = PiecewiseEquation::two_piece(f.clone(), f.scale(-1.0), 0.5, 1.0, Domain::real_line()).unwrap();
        let r = eq.validate();
        assert!(r.annulus);
        assert!(r.warnings[0].contains("periodic annulus"));
    }

    #[test]
    fn normalize_is_idempotent() {
        let eq = PiecewiseEquation::new(
            vec![p(&[0.0, 1.0, -1.0]), p(&[-0.1, 0.5]), p(&[0.2, -1.0])],
            vec![0.0, 0.3, 1.1, 2.0],
            Domain::non_negative(),
        )
        .unwrap();
        let once = eq.normalized().clone();
        let twice = normalize(&once.to_equation());
        for (a, b) in once.pieces().iter().zip(twice.pieces()) {
            for (x, y) in a.numerator().coeffs().iter().zip(b.numerator().coeffs()) {
                assert_relative_eq!(x, y, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn model_file_round_trip() {
        let m = harvesting(0.1).to_model();
        let s = serde_json::to_string(&m).unwrap();
        let back: ModelFile = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.build().unwrap(), harvesting(0.1));
    }

    #[test]
    fn window_covers_zeros() {
        let eq = harvesting(0.1);
        let (lo, hi) = eq.normalized().window();
        assert_eq!(lo, 0.0);
        assert!(hi > 1.0);
    }
}
