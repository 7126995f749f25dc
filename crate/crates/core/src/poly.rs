//! Dense real polynomials with ascending coefficients.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut p = Poly { coeffs };
        p.strip();
        p
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Poly::new(vec![c])
    }

    /// The monomial `c * x^k`.
    pub fn monomial(c: f64, k: usize) -> Self {
        let mut v = vec![0.0; k + 1];
        v[k] = c;
        Poly::new(v)
    }

    /// Product of `(x - r)` over the given roots, scaled by `lead`.
    pub fn from_roots(lead: f64, roots: &[f64]) -> Self {
        let mut p = Poly::constant(lead);
        for &r in roots {
            p = p.mul(&Poly::new(vec![-r, 1.0]));
        }
        p
    }

    fn strip(&mut self) {
        while matches!(self.coeffs.last(), Some(c) if *c == 0.0) {
            self.coeffs.pop();
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, with the zero polynomial reported as `None`.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::zero();
        }
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * i as f64)
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        Poly::new(
            (0..n)
                .map(|i| {
                    self.coeffs.get(i).copied().unwrap_or(0.0)
                        + other.coeffs.get(i).copied().unwrap_or(0.0)
                })
                .collect(),
        )
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn powi(&self, k: u32) -> Poly {
        (0..k).fold(Poly::constant(1.0), |acc, _| acc.mul(self))
    }

    /// Zero every coefficient whose magnitude is at most `threshold`.
    pub fn chop(&self, threshold: f64) -> Poly {
        Poly::new(
            self.coeffs
                .iter()
                .map(|&c| if c.abs() <= threshold { 0.0 } else { c })
                .collect(),
        )
    }

    /// Euclidean division; panics on a zero divisor.
    pub fn div_rem(&self, divisor: &Poly) -> (Poly, Poly) {
        let dd = divisor.degree().expect("division by zero polynomial");
        let lead = divisor.leading();
        let mut rem = self.coeffs.clone();
        if rem.len() <= dd {
            return (Poly::zero(), self.clone());
        }
        let mut quot = vec![0.0; rem.len() - dd];
        for k in (0..quot.len()).rev() {
            let q = rem[k + dd] / lead;
            quot[k] = q;
            for (j, d) in divisor.coeffs.iter().enumerate() {
                rem[k + j] -= q * d;
            }
            rem[k + dd] = 0.0;
        }
        rem.truncate(dd);
        (Poly::new(quot), Poly::new(rem))
    }

    /// Monic greatest common divisor, treating remainders whose normalized
    /// coefficients fall below `threshold` as zero.
    pub fn gcd(&self, other: &Poly, threshold: f64) -> Poly {
        let mut a = self.normalized();
        let mut b = other.normalized();
        if a.is_zero() {
            return b.monic();
        }
        while !b.is_zero() {
            if b.degree() == Some(0) {
                return Poly::constant(1.0);
            }
            let (_, r) = a.div_rem(&b);
            let scale = a.max_abs().max(b.max_abs());
            let r = r.chop(threshold * scale);
            a = b;
            b = r.normalized();
        }
        a.monic()
    }

    /// Scaled so the largest coefficient has magnitude one.
    pub fn normalized(&self) -> Poly {
        let m = self.max_abs();
        if m == 0.0 {
            Poly::zero()
        } else {
            self.scale(1.0 / m)
        }
    }

    pub fn monic(&self) -> Poly {
        if self.is_zero() {
            Poly::zero()
        } else {
            self.scale(1.0 / self.leading())
        }
    }

    /// Cauchy upper bound on the magnitude of every root.
    pub fn cauchy_bound(&self) -> f64 {
        let lead = self.leading();
        match self.degree() {
            None | Some(0) => 0.0,
            Some(n) => {
                1.0 + self.coeffs[..n]
                    .iter()
                    .fold(0.0_f64, |m, c| m.max((c / lead).abs()))
            }
        }
    }

    /// `(1+t)^n p((a + b t)/(1 + t))` with `n` the degree of `p`.
    pub(crate) fn mobius(&self, a: f64, b: f64) -> Poly {
        let n = match self.degree() {
            Some(n) => n,
            None => return Poly::zero(),
        };
        let num = Poly::new(vec![a, b]);
        let den = Poly::new(vec![1.0, 1.0]);
        let mut out = Poly::zero();
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let term = num.powi(i as u32).mul(&den.powi((n - i) as u32)).scale(c);
            out = out.add(&term);
        }
        out
    }
}

impl From<Vec<f64>> for Poly {
    fn from(v: Vec<f64>) -> Self {
        Poly::new(v)
    }
}
