//! The period map `P` and its first three derivatives by three routes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equation::NormalizedEquation;
use crate::field::ScalarField;
use crate::flow::{step_map, StepStatus};
use crate::numeric::{cheb_cumulative, lobatto};

/// Knots with `|f_i| <= V_GUARD` at a slot end leave the set V.
pub const V_GUARD: f64 = 1e-10;
const PANEL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoincareError {
    #[error("x0 = {x0} lies outside the state interval")]
    OutOfInterval { x0: f64 },
    #[error("x0 = {x0} is not in the map domain: escape during piece {piece}")]
    NotInDomain { x0: f64, piece: usize },
    #[error("knots are not in V: a piece nearly vanishes at a knot")]
    NotInV,
    #[error("derivative order {0} not in 1..=3")]
    BadOrder(usize),
    #[error("two-piece equation required, got {0} pieces")]
    NotTwoPiece(usize),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("integral route did not resolve the trajectory near x0 = {x0}")]
    Unresolved { x0: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryKnots {
    pub knots: Vec<f64>,
    pub statuses: Vec<StepStatus>,
    pub in_v: bool,
}

impl TrajectoryKnots {
    pub fn x0(&self) -> f64 {
        self.knots[0]
    }

    /// `P(x0)`.
    pub fn end(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    /// Smallest and largest knot.
    pub fn range(&self) -> (f64, f64) {
        self.knots.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Discrete,
    Integral,
    Constant,
    Difference,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoincareJet {
    pub value: f64,
    pub d1: f64,
    pub d2: Option<f64>,
    pub d3: Option<f64>,
    pub route: Route,
}

/// Knot values `x_0, ..., x_n` at the slot ends.
pub fn knots(eq: &NormalizedEquation, x0: f64) -> Result<TrajectoryKnots, PoincareError> {
    if !eq.state_interval().contains(x0) {
        return Err(PoincareError::OutOfInterval { x0 });
    }
    let slot = eq.slot();
    let mut xs = Vec::with_capacity(eq.n() + 1);
    let mut statuses = Vec::with_capacity(eq.n());
    xs.push(x0);
    let mut in_v = true;
    let mut x = x0;
    for (i, f) in eq.pieces().iter().enumerate() {
        let s = step_map(f, x, slot);
        match s.status {
            StepStatus::Escaped => return Err(PoincareError::NotInDomain { x0, piece: i + 1 }),
            StepStatus::Ok => {}
            _ => in_v = false,
        }
        if f.value(x).abs() <= V_GUARD || f.value(s.end_value).abs() <= V_GUARD {
            in_v = false;
        }
        x = s.end_value;
        xs.push(x);
        statuses.push(s.status);
    }
    Ok(TrajectoryKnots { knots: xs, statuses, in_v })
}

/// `P(x0)`.
pub fn poincare(eq: &NormalizedEquation, x0: f64) -> Result<f64, PoincareError> {
    knots(eq, x0).map(|k| k.end())
}

/// `P(x0) - x0`.
pub fn displacement(eq: &NormalizedEquation, x0: f64) -> Result<f64, PoincareError> {
    poincare(eq, x0).map(|p| p - x0)
}

fn check_order(order: usize) -> Result<(), PoincareError> {
    if (1..=3).contains(&order) {
        Ok(())
    } else {
        Err(PoincareError::BadOrder(order))
    }
}

/// Derivatives from the knot values alone.
pub fn derivative_discrete(
    eq: &NormalizedEquation,
    k: &TrajectoryKnots,
    order: usize,
) -> Result<PoincareJet, PoincareError> {
    check_order(order)?;
    if !k.in_v {
        return Err(PoincareError::NotInV);
    }
    let mut d1 = 1.0;
    // running d x_{i-1} / d x0
    let mut chain = 1.0;
    let mut s_sum = 0.0;
    let mut u_sum = 0.0;
    for (i, f) in eq.pieces().iter().enumerate() {
        let (a, b) = (k.knots[i], k.knots[i + 1]);
        let (fa, fb) = (f.value(a), f.value(b));
        let (da, db) = (f.d(a, 1), f.d(b, 1));
        let r = fb / fa;
        let s = (db - da) / fa;
        s_sum += s * chain;
        if order >= 3 {
            let (sa, sb) = (f.d(a, 2), f.d(b, 2));
            let u = (2.0 * sb * fb - db * db - 2.0 * sa * fa + da * da) / (2.0 * fa * fa);
            u_sum += u * chain * chain;
        }
        d1 *= r;
        chain *= r;
    }
    let d2 = d1 * s_sum;
    let d3 = d1 * (1.5 * s_sum * s_sum + u_sum);
    Ok(PoincareJet {
        value: k.end(),
        d1,
        d2: (order >= 2).then_some(d2),
        d3: (order >= 3).then_some(d3),
        route: Route::Discrete,
    })
}

#[derive(Clone, Copy, Debug)]
struct Accum {
    x: f64,
    e: f64,
    j2: f64,
    j3: f64,
}

fn panel_once(f: &ScalarField, len: f64, start: Accum, n: usize) -> Option<Accum> {
    let s = lobatto(n);
    let mut xs = vec![0.0; n + 1];
    xs[n] = start.x;
    let mut prev_t = 0.0;
    for k in (0..n).rev() {
        let t = 0.5 * (1.0 + s[k]) * len;
        let step = step_map(f, xs[k + 1], t - prev_t);
        if step.status == StepStatus::Escaped {
            return None;
        }
        xs[k] = step.end_value;
        prev_t = t;
    }
    let half = 0.5 * len;
    let v1: Vec<f64> = xs.iter().map(|&x| f.d(x, 1)).collect();
    let e: Vec<f64> = cheb_cumulative(&v1).iter().map(|c| start.e + half * c).collect();
    let v2: Vec<f64> = xs.iter().zip(&e).map(|(&x, &ek)| f.d(x, 2) * ek.exp()).collect();
    let v3: Vec<f64> = xs.iter().zip(&e).map(|(&x, &ek)| f.d(x, 3) * (2.0 * ek).exp()).collect();
    let j2 = half * cheb_cumulative(&v2)[0];
    let j3 = half * cheb_cumulative(&v3)[0];
    Some(Accum { x: xs[0], e: e[0], j2: start.j2 + j2, j3: start.j3 + j3 })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= PANEL_TOL * (1.0 + a.abs().max(b.abs()))
}

fn panel(f: &ScalarField, len: f64, start: Accum, depth: u32) -> Option<Accum> {
    let mut prev = panel_once(f, len, start, 32)?;
    for n in [64, 128, 256] {
        let next = panel_once(f, len, start, n)?;
        if close(prev.e, next.e) && close(prev.j2, next.j2) && close(prev.j3, next.j3) {
            return Some(next);
        }
        prev = next;
    }
    if depth >= 6 {
        return None;
    }
    let mid = panel(f, 0.5 * len, start, depth + 1)?;
    panel(f, 0.5 * len, mid, depth + 1)
}

/// Derivatives from time integrals of `∂f/∂x` along the trajectory.
pub fn derivative_integral(
    eq: &NormalizedEquation,
    x0: f64,
    order: usize,
) -> Result<PoincareJet, PoincareError> {
    check_order(order)?;
    let k = knots(eq, x0)?;
    let mut acc = Accum { x: x0, e: 0.0, j2: 0.0, j3: 0.0 };
    for (i, f) in eq.pieces().iter().enumerate() {
        acc = panel(f, eq.slot(), Accum { x: k.knots[i], ..acc }, 0)
            .ok_or(PoincareError::Unresolved { x0 })?;
    }
    let d1 = acc.e.exp();
    Ok(PoincareJet {
        value: k.end(),
        d1,
        d2: (order >= 2).then_some(d1 * acc.j2),
        d3: (order >= 3).then_some(d1 * (1.5 * acc.j2 * acc.j2 + acc.j3)),
        route: Route::Integral,
    })
}

/// Discrete route on V, integral route elsewhere.
pub fn jet(eq: &NormalizedEquation, x0: f64, order: usize) -> Result<PoincareJet, PoincareError> {
    let k = knots(eq, x0)?;
    if k.in_v {
        derivative_discrete(eq, &k, order)
    } else {
        derivative_integral(eq, x0, order)
    }
}

/// `P^(k)(λ)` at a common zero `λ` of a two-piece equation, closed form.
pub fn constant_multiplier(eq: &NormalizedEquation, lambda: f64, k: usize) -> Result<f64, PoincareError> {
    check_order(k)?;
    if eq.n() != 2 {
        return Err(PoincareError::NotTwoPiece(eq.n()));
    }
    let (f1, f2) = (eq.piece(0), eq.piece(1));
    for (i, f) in [f1, f2].iter().enumerate() {
        let tol = 1e-10 * (1.0 + f.d(lambda, 1).abs());
        if f.value(lambda).abs() > tol {
            return Err(PoincareError::Precondition(format!(
                "f{}({lambda}) = {} is not zero",
                i + 1,
                f.value(lambda)
            )));
        }
    }
    let p1 = (0.5 * (f1.d(lambda, 1) + f2.d(lambda, 1))).exp();
    if k == 1 {
        return Ok(p1);
    }
    if (p1 - 1.0).abs() > 1e-7 {
        return Err(PoincareError::Precondition(format!("P'({lambda}) = {p1} is not 1")));
    }
    let a = f1.d(lambda, 1);
    let weight = |m: f64| -> f64 {
        let z = m * a;
        if z.abs() < 1e-300 {
            0.5
        } else {
            (0.5 * z).exp_m1() / z
        }
    };
    let p2 = (f1.d(lambda, 2) + f2.d(lambda, 2)) * weight(1.0);
    if k == 2 {
        return Ok(p2);
    }
    if p2.abs() > 1e-7 {
        return Err(PoincareError::Precondition(format!("P''({lambda}) = {p2} is not 0")));
    }
    Ok((f1.d(lambda, 3) + f2.d(lambda, 3)) * weight(2.0))
}

/// Jet at a common zero built from [`constant_multiplier`].
pub fn constant_jet(eq: &NormalizedEquation, lambda: f64) -> Result<PoincareJet, PoincareError> {
    let d1 = constant_multiplier(eq, lambda, 1)?;
    let d2 = constant_multiplier(eq, lambda, 2).ok();
    let d3 = d2.and_then(|_| constant_multiplier(eq, lambda, 3).ok());
    Ok(PoincareJet { value: lambda, d1, d2, d3, route: Route::Constant })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equation::PiecewiseEquation;
    use crate::field::Domain;
    use crate::flow::rk_flow;
    use approx::assert_relative_eq;

    fn p(c: &[f64], d: Domain) -> ScalarField {
        ScalarField::polynomial(c, d).unwrap()
    }

    fn two(f1: &[f64], f2: &[f64], d: Domain) -> NormalizedEquation {
        NormalizedEquation::from_pieces(vec![p(f1, d), p(f2, d)], d).unwrap()
    }

    fn harvesting(h: f64) -> NormalizedEquation {
        let d = Domain::non_negative();
        PiecewiseEquation::two_piece(p(&[0.0, 1.0, -1.0], d), p(&[-h, 1.0, -1.0], d), 1.0, 2.0, d)
            .unwrap()
            .normalized()
            .clone()
    }

    #[test]
    fn linear_annulus_knots() {
        let eq = two(&[0.0, 1.0], &[0.0, -1.0], Domain::real_line());
        let k = knots(&eq, 2.0).unwrap();
        assert_relative_eq!(k.knots[1], 2.0 * 0.5_f64.exp(), epsilon = 1e-13);
        assert_relative_eq!(k.knots[2], 2.0, epsilon = 1e-13);
        let j = derivative_discrete(&eq, &k, 3).unwrap();
        assert_relative_eq!(j.d1, 1.0, epsilon = 1e-13);
        let i = derivative_integral(&eq, 2.0, 3).unwrap();
        assert_relative_eq!(i.d1, 1.0, epsilon = 1e-12);
        assert_relative_eq!(i.d2.unwrap(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(i.d3.unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn harvesting_knots_match_reference_integrator() {
        let eq = harvesting(0.1);
        let k = knots(&eq, 0.5).unwrap();
        let x1 = rk_flow(eq.piece(0), 0.5, 0.5, 1e-13).unwrap();
        let x2 = rk_flow(eq.piece(1), x1, 0.5, 1e-13).unwrap();
        assert_relative_eq!(k.knots[1], x1, epsilon = 1e-10);
        assert_relative_eq!(k.knots[2], x2, epsilon = 1e-10);
        // independent scipy solve_ivp (rtol 1e-13) value, frozen
        assert_relative_eq!(k.end(), 0.8065033133928815, epsilon = 1e-9);
    }

    #[test]
    fn cubic_blow_up_escapes() {
        let eq = two(&[0.0, 0.0, 0.0, 1.0], &[0.0, 0.0, 0.0, 1.0], Domain::real_line());
        assert!(matches!(knots(&eq, 2.0), Err(PoincareError::NotInDomain { piece: 1, .. })));
    }

    #[test]
    fn routes_agree_on_harvesting() {
        let eq = harvesting(0.1);
        for &x0 in &[0.3, 0.5, 0.8, 1.4] {
            let k = knots(&eq, x0).unwrap();
            let d = derivative_discrete(&eq, &k, 3).unwrap();
            let i = derivative_integral(&eq, x0, 3).unwrap();
            assert_relative_eq!(d.d1, i.d1, max_relative = 1e-9);
            assert_relative_eq!(d.d2.unwrap(), i.d2.unwrap(), epsilon = 1e-8, max_relative = 1e-8);
            assert_relative_eq!(d.d3.unwrap(), i.d3.unwrap(), epsilon = 1e-7, max_relative = 1e-7);
            let h = 1e-4;
            let fd = (poincare(&eq, x0 + h).unwrap() - poincare(&eq, x0 - h).unwrap()) / (2.0 * h);
            assert_relative_eq!(d.d1, fd, max_relative = 1e-7);
        }
    }

    #[test]
    fn theorem_determinant_form_at_cycle_like_points() {
        // P' = 1 - det / (f1(x0) f2(x1)) holds whenever x2 = x0; check the
        // product formula against the harvesting closed form at any x0 via
        // P' = f1(x1) f2(x2) / (f1(x0) f2(x1)).
        let eq = harvesting(0.1);
        let k = knots(&eq, 0.6).unwrap();
        let d = derivative_discrete(&eq, &k, 1).unwrap();
        let (f1, f2) = (eq.piece(0), eq.piece(1));
        let prod = f1.value(k.knots[1]) / f1.value(k.knots[0]) * f2.value(k.knots[2]) / f2.value(k.knots[1]);
        assert_relative_eq!(d.d1, prod, max_relative = 1e-14);
    }

    #[test]
    fn constant_multiplier_examples() {
        let eq = two(&[0.0, 1.0, -1.0], &[0.0, -1.0], Domain::real_line());
        assert_relative_eq!(constant_multiplier(&eq, 0.0, 1).unwrap(), 1.0);
        let p2 = constant_multiplier(&eq, 0.0, 2).unwrap();
        assert_relative_eq!(p2, -2.0 * (0.5_f64.exp() - 1.0), epsilon = 1e-14);
        assert_relative_eq!(p2, -1.29744254140, epsilon = 1e-10);
        assert!(constant_multiplier(&eq, 0.5, 1).is_err());
    }

    #[test]
    fn constant_multiplier_requires_unit_multiplier() {
        let eq = two(&[0.0, 1.0, -1.0], &[0.0, 1.0], Domain::real_line());
        assert!(matches!(constant_multiplier(&eq, 0.0, 2), Err(PoincareError::Precondition(_))));
    }

    #[test]
    fn constant_multiplier_matches_integral_route() {
        let eq = two(&[0.0, 1.0, -1.0], &[0.0, -3.0, 0.5], Domain::real_line());
        let c = constant_multiplier(&eq, 0.0, 1).unwrap();
        let i = derivative_integral(&eq, 0.0, 1).unwrap();
        assert_relative_eq!(c, i.d1, epsilon = 1e-9);
        assert_relative_eq!(c, (-1.0_f64).exp(), epsilon = 1e-14);
    }

    #[test]
    fn annulus_displacement_vanishes() {
        let eq = two(&[0.0, 1.0, 0.0, -0.5], &[0.0, -1.0, 0.0, 0.5], Domain::real_line());
        for &x in &[-0.9, -0.2, 0.3, 1.1] {
            assert!(displacement(&eq, x).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn third_derivative_matches_difference_of_second() {
        let eq = two(&[0.2, 1.0, -0.7, -0.4], &[-0.1, -0.6, 0.9, 0.2], Domain::real_line());
        let x0 = 0.35;
        let h = 1e-4;
        let j = derivative_integral(&eq, x0, 3).unwrap();
        let up = derivative_integral(&eq, x0 + h, 2).unwrap().d2.unwrap();
        let dn = derivative_integral(&eq, x0 - h, 2).unwrap().d2.unwrap();
        assert_relative_eq!(j.d3.unwrap(), (up - dn) / (2.0 * h), epsilon = 1e-5, max_relative = 1e-5);
    }
}
