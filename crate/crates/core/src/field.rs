//! Rational right-hand sides `N/D` with exact derivatives and certified zero
//! enumeration.

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::poly::Poly;

/// Numeric gcd cutoff on normalized coefficients.
pub const GCD_THRESHOLD: f64 = 1e-9;
/// A sum whose normalized coefficients all fall below this is treated as zero.
pub const ZERO_COEFF_THRESHOLD: f64 = 1e-13;
/// Highest derivative order carried by a field.
pub const MAX_ORDER: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("denominator is the zero polynomial")]
    ZeroDenominator,
    #[error("denominator vanishes at {at} inside the domain")]
    DenominatorVanishes { at: f64 },
    #[error("empty or invalid domain [{lo}, {hi}]")]
    BadDomain { lo: f64, hi: f64 },
    #[error("non-finite coefficient")]
    NonFinite,
    #[error("x = {x} lies outside the domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },
    #[error("derivative order {0} exceeds 3")]
    OrderTooHigh(usize),
    #[error("window [{lo}, {hi}] is not inside the domain")]
    WindowOutsideDomain { lo: f64, hi: f64 },
    #[error("tolerance must be positive")]
    BadTolerance,
    #[error("field is identically zero")]
    IdenticallyZero,
    #[error("field is identically zero on the window: periodic annulus")]
    Annulus,
    #[error("domains do not overlap")]
    DisjointDomains,
}

/// Closed interval whose ends may be infinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain {
    pub lo: f64,
    pub hi: f64,
}

impl Domain {
    pub fn new(lo: f64, hi: f64) -> Result<Self, FieldError> {
        if lo.is_nan() || hi.is_nan() || lo >= hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY
        {
            return Err(FieldError::BadDomain { lo, hi });
        }
        Ok(Domain { lo, hi })
    }

    pub fn real_line() -> Self {
        Domain { lo: f64::NEG_INFINITY, hi: f64::INFINITY }
    }

    pub fn non_negative() -> Self {
        Domain { lo: 0.0, hi: f64::INFINITY }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn contains_domain(&self, other: &Domain) -> bool {
        other.lo >= self.lo && other.hi <= self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn intersect(&self, other: &Domain) -> Option<Domain> {
        Domain::new(self.lo.max(other.lo), self.hi.min(other.hi)).ok()
    }

    /// Replace infinite ends by `-bound` / `bound`.
    pub fn clipped(&self, bound: f64) -> (f64, f64) {
        let lo = if self.lo.is_finite() { self.lo } else { -bound };
        let hi = if self.hi.is_finite() { self.hi } else { bound };
        (lo, hi)
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Serde adapter for reals that may be infinite, written as `"inf"` / `"-inf"`.
pub mod extended_real {
    use super::*;

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn parse(s: &str) -> Option<f64> {
        match s.trim() {
            "inf" | "+inf" | "infinity" => Some(f64::INFINITY),
            "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
            _ => None,
        }
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *x == f64::INFINITY {
            s.serialize_str("inf")
        } else if *x == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(*x)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => parse(&t).ok_or_else(|| D::Error::custom(format!("bad bound {t:?}"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct DomainRepr(
    #[serde(with = "extended_real")] f64,
    #[serde(with = "extended_real")] f64,
);

impl Serialize for Domain {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        DomainRepr(self.lo, self.hi).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Domain {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = DomainRepr::deserialize(d)?;
        Domain::new(r.0, r.1).map_err(D::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub location: f64,
    pub multiplicity: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroList {
    pub roots: Vec<Root>,
    pub certified: bool,
}

impl ZeroList {
    pub fn locations(&self) -> Vec<f64> {
        self.roots.iter().map(|r| r.location).collect()
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    /// Multiplicity of the root nearest `x`, if one lies within `tol`.
    pub fn multiplicity_at(&self, x: f64, tol: f64) -> Option<u32> {
        self.roots
            .iter()
            .filter(|r| (r.location - x).abs() <= tol)
            .min_by(|a, b| {
                (a.location - x).abs().total_cmp(&(b.location - x).abs())
            })
            .map(|r| r.multiplicity)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignChanges {
    pub count: usize,
    pub crossings: Vec<f64>,
    pub touches: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct FieldRepr {
    num: Vec<f64>,
    #[serde(default = "unit_den")]
    den: Vec<f64>,
    #[serde(default = "Domain::real_line")]
    domain: Domain,
}

fn unit_den() -> Vec<f64> {
    vec![1.0]
}

/// `num/den` restricted to `domain`.
#[derive(Clone, Debug)]
pub struct ScalarField {
    num: Poly,
    den: Poly,
    domain: Domain,
    // numerators of the k-th derivative over den^(k+1), k = 1..=3
    dnum: [Poly; MAX_ORDER],
    den_pow: [Poly; MAX_ORDER + 1],
    roots: Option<Vec<f64>>,
    crit: Vec<f64>,
}

impl PartialEq for ScalarField {
    fn eq(&self, other: &Self) -> bool {
        self.num == other.num && self.den == other.den && self.domain == other.domain
    }
}

impl Serialize for ScalarField {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        FieldRepr {
            num: self.num.coeffs().to_vec(),
            den: self.den.coeffs().to_vec(),
            domain: self.domain,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ScalarField {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = FieldRepr::deserialize(d)?;
        ScalarField::new(Poly::new(r.num), Poly::new(r.den), r.domain).map_err(D::Error::custom)
    }
}

impl ScalarField {
    pub fn new(num: Poly, den: Poly, domain: Domain) -> Result<Self, FieldError> {
        if num.coeffs().iter().chain(den.coeffs()).any(|c| !c.is_finite()) {
            return Err(FieldError::NonFinite);
        }
        if den.is_zero() {
            return Err(FieldError::ZeroDenominator);
        }
        if den.degree() != Some(0) {
            let (lo, hi) = domain.clipped(den.cauchy_bound() + 1.0);
            let bad = real_roots(&den, lo, hi);
            if let Some(r) = bad.roots.first() {
                return Err(FieldError::DenominatorVanishes { at: r.location });
            }
        }
        let dd = den.derivative();
        let mut dnum: [Poly; MAX_ORDER] = [Poly::zero(), Poly::zero(), Poly::zero()];
        let mut prev = num.clone();
        for (k, slot) in dnum.iter_mut().enumerate() {
            let next = prev
                .derivative()
                .mul(&den)
                .sub(&prev.mul(&dd).scale((k + 1) as f64));
            *slot = next.clone();
            prev = next;
        }
        let den_pow = [den.clone(), den.powi(2), den.powi(3), den.powi(4)];
        let (roots, crit) = if num.is_zero() {
            (None, Vec::new())
        } else {
            let (lo, hi) = domain.clipped(num.cauchy_bound() + 1.0);
            let r = real_roots(&num, lo, hi).locations();
            let c = if dnum[0].is_zero() {
                Vec::new()
            } else {
                let (lo, hi) = domain.clipped(dnum[0].cauchy_bound() + 1.0);
                real_roots(&dnum[0], lo, hi).locations()
            };
            (Some(r), c)
        };
        Ok(ScalarField { num, den, domain, dnum, den_pow, roots, crit })
    }

    /// Polynomial field from ascending coefficients.
    pub fn polynomial(coeffs: &[f64], domain: Domain) -> Result<Self, FieldError> {
        ScalarField::new(Poly::new(coeffs.to_vec()), Poly::constant(1.0), domain)
    }

    pub fn rational(num: &[f64], den: &[f64], domain: Domain) -> Result<Self, FieldError> {
        ScalarField::new(Poly::new(num.to_vec()), Poly::new(den.to_vec()), domain)
    }

    pub fn numerator(&self) -> &Poly {
        &self.num
    }

    pub fn denominator(&self) -> &Poly {
        &self.den
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.degree() == Some(0)
    }

    pub fn is_identically_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// Zeros of the numerator inside the domain, computed at construction.
    pub fn cached_roots(&self) -> Option<&[f64]> {
        self.roots.as_deref()
    }

    /// Zeros of the first derivative inside the domain.
    pub fn critical_points(&self) -> &[f64] {
        &self.crit
    }

    /// Checked evaluation of the `order`-th derivative.
    pub fn eval(&self, x: f64, order: usize) -> Result<f64, FieldError> {
        if order > MAX_ORDER {
            return Err(FieldError::OrderTooHigh(order));
        }
        if !self.domain.contains(x) {
            return Err(FieldError::OutOfDomain { x, lo: self.domain.lo, hi: self.domain.hi });
        }
        Ok(self.d(x, order))
    }

    /// Unchecked value.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        self.num.eval(x) / self.den.eval(x)
    }

    /// Unchecked `order`-th derivative, order in 0..=3.
    #[inline]
    pub fn d(&self, x: f64, order: usize) -> f64 {
        match order {
            0 => self.value(x),
            k => self.dnum[k - 1].eval(x) / self.den_pow[k].eval(x),
        }
    }

    /// The exact `k`-th derivative as a field of its own.
    pub fn derivative_field(&self, k: usize) -> Result<ScalarField, FieldError> {
        match k {
            0 => Ok(self.clone()),
            1..=MAX_ORDER => {
                ScalarField::new(self.dnum[k - 1].clone(), self.den_pow[k].clone(), self.domain)
            }
            _ => Err(FieldError::OrderTooHigh(k)),
        }
    }

    pub fn scale(&self, s: f64) -> ScalarField {
        let mut out = self.clone();
        out.num = self.num.scale(s);
        for p in out.dnum.iter_mut() {
            *p = p.scale(s);
        }
        if s == 0.0 {
            out.roots = None;
            out.crit.clear();
        }
        out
    }

    pub fn with_domain(&self, domain: Domain) -> Result<ScalarField, FieldError> {
        ScalarField::new(self.num.clone(), self.den.clone(), domain)
    }

    /// Real zeros of the numerator in the closed `window`.
    pub fn zeros(&self, window: (f64, f64), tol: f64) -> Result<ZeroList, FieldError> {
        if !(tol > 0.0) {
            return Err(FieldError::BadTolerance);
        }
        let (lo, hi) = window;
        if !(lo <= hi) || lo < self.domain.lo || hi > self.domain.hi {
            return Err(FieldError::WindowOutsideDomain { lo, hi });
        }
        if self.num.is_zero() {
            return Err(FieldError::IdenticallyZero);
        }
        let b = self.num.cauchy_bound() + 1.0;
        let (lo, hi) = (lo.max(-b), hi.min(b));
        if lo > hi {
            return Ok(ZeroList { roots: Vec::new(), certified: true });
        }
        Ok(real_roots(&self.num, lo, hi))
    }

    /// Zeros over the whole domain.
    pub fn all_zeros(&self) -> Result<ZeroList, FieldError> {
        self.zeros((self.domain.lo, self.domain.hi), 1e-12)
    }

    /// Strict sign alternations on the open `window`.
    pub fn sign_changes(&self, window: (f64, f64)) -> Result<SignChanges, FieldError> {
        if self.num.is_zero() {
            return Err(FieldError::Annulus);
        }
        let (lo, hi) = window;
        let zl = self.zeros((lo.max(self.domain.lo), hi.min(self.domain.hi)), 1e-12)?;
        let mut out = SignChanges { count: 0, crossings: Vec::new(), touches: Vec::new() };
        for r in zl.roots {
            let x = r.location;
            let eps = 1e-12 * (1.0 + x.abs());
            if x <= lo + eps || x >= hi - eps {
                continue;
            }
            if r.multiplicity % 2 == 1 {
                out.count += 1;
                out.crossings.push(x);
            } else {
                out.touches.push(x);
            }
        }
        Ok(out)
    }

    /// Rational sum over the common denominator, on the intersected domain.
    pub fn add(&self, other: &ScalarField) -> Result<ScalarField, FieldError> {
        let domain = self.domain.intersect(&other.domain).ok_or(FieldError::DisjointDomains)?;
        let (num, den, scale) = if self.den == other.den {
            let s = self.num.max_abs().max(other.num.max_abs());
            (self.num.add(&other.num), self.den.clone(), s)
        } else {
            let a = self.num.mul(&other.den);
            let b = other.num.mul(&self.den);
            let s = a.max_abs().max(b.max_abs());
            (a.add(&b), self.den.mul(&other.den), s)
        };
        let num = num.chop(ZERO_COEFF_THRESHOLD * scale);
        ScalarField::new(num, den, domain)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField, FieldError> {
        self.add(&other.scale(-1.0))
    }
}

fn sign_variations(p: &Poly) -> usize {
    let m = p.max_abs();
    let mut last = 0.0_f64;
    let mut v = 0;
    for &c in p.coeffs() {
        if c.abs() <= 1e-15 * m {
            continue;
        }
        if last != 0.0 && (c > 0.0) != (last > 0.0) {
            v += 1;
        }
        last = c;
    }
    v
}

/// |p(x)| below the rounding error of Horner evaluation.
fn vanishes_at(p: &Poly, x: f64) -> bool {
    let mut mag = 0.0;
    let mut xi = 1.0;
    for c in p.coeffs() {
        mag += (c * xi).abs();
        xi *= x.abs();
    }
    p.eval(x).abs() <= 16.0 * f64::EPSILON * mag
}

fn bisect_root(p: &Poly, mut a: f64, mut b: f64) -> f64 {
    let mut fa = p.eval(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = p.eval(m);
        if fm == 0.0 {
            return m;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Simple roots of a square-free polynomial in `[lo, hi]`.
fn isolate_simple(q: &Poly, lo: f64, hi: f64) -> (Vec<f64>, bool) {
    let mut roots = Vec::new();
    let mut certified = true;
    if vanishes_at(q, lo) {
        roots.push(lo);
    }
    if hi > lo && vanishes_at(q, hi) {
        roots.push(hi);
    }
    let mut stack = vec![(lo, hi, 0u32)];
    while let Some((a, b, depth)) = stack.pop() {
        if b <= a {
            continue;
        }
        let v = sign_variations(&q.mobius(a, b));
        if v == 0 {
            continue;
        }
        let (fa, fb) = (q.eval(a), q.eval(b));
        let ends_clean = !vanishes_at(q, a) && !vanishes_at(q, b);
        if v == 1 && ends_clean && (fa > 0.0) != (fb > 0.0) {
            roots.push(bisect_root(q, a, b));
            continue;
        }
        if depth > 80 || b - a <= 4.0 * f64::EPSILON * (1.0 + a.abs().max(b.abs())) {
            if (fa > 0.0) != (fb > 0.0) || v % 2 == 1 {
                roots.push(0.5 * (a + b));
            }
            certified = false;
            continue;
        }
        let mut m = 0.5 * (a + b);
        for frac in [0.5, 0.4871, 0.5129, 0.4423, 0.5577] {
            m = a + frac * (b - a);
            if !vanishes_at(q, m) {
                break;
            }
        }
        if vanishes_at(q, m) {
            roots.push(m);
        }
        stack.push((m, b, depth + 1));
        stack.push((a, m, depth + 1));
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * (1.0 + y.abs()));
    (roots, certified)
}

fn newton_polish(p: &Poly, x: f64, lo: f64, hi: f64) -> f64 {
    let dp = p.derivative();
    let mut x = x;
    for _ in 0..4 {
        let d = dp.eval(x);
        if d == 0.0 {
            break;
        }
        let nx = x - p.eval(x) / d;
        if !(nx >= lo && nx <= hi) || p.eval(nx).abs() > p.eval(x).abs() {
            break;
        }
        x = nx;
    }
    x
}

/// All real roots of `p` in `[lo, hi]` with multiplicities.
pub(crate) fn real_roots(p: &Poly, lo: f64, hi: f64) -> ZeroList {
    let p = p.normalized();
    if p.degree().unwrap_or(0) == 0 {
        return ZeroList { roots: Vec::new(), certified: true };
    }
    let dp = p.derivative();
    let g = p.gcd(&dp, GCD_THRESHOLD);
    let q = if g.degree().unwrap_or(0) > 0 { p.div_rem(&g).0 } else { p.clone() };
    let (simple, mut certified) = isolate_simple(&q, lo, hi);
    let inner = if g.degree().unwrap_or(0) > 0 {
        let pad = 1e-6 * (1.0 + lo.abs().max(hi.abs()));
        let z = real_roots(&g, lo - pad, hi + pad);
        certified &= z.certified;
        Some(z)
    } else {
        None
    };
    let mut roots = Vec::with_capacity(simple.len());
    for r in simple {
        let extra = inner
            .as_ref()
            .and_then(|z| z.multiplicity_at(r, 1e-6 * (1.0 + r.abs())))
            .unwrap_or(0);
        let m = 1 + extra;
        let mut target = p.clone();
        for _ in 1..m {
            target = target.derivative();
        }
        let x = newton_polish(&target, newton_polish(&q, r, lo, hi), lo, hi);
        roots.push(Root { location: x, multiplicity: m });
    }
    ZeroList { roots, certified }
}
