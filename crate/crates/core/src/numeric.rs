//! Quadrature, bracketing and spectral helpers shared by the analysis modules.

use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One Gauss-Kronrod 7/15 panel: (Kronrod value, |K - G|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive G7K15 integration of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Quadrature {
    integrate_limited(f, a, b, abs_tol, rel_tol, 2000)
}

/// As [`integrate`] with an explicit cap on panel splits.
pub fn integrate_limited<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_splits: usize,
) -> Quadrature {
    if a == b {
        return Quadrature { value: 0.0, error: 0.0, converged: true };
    }
    let (sign, lo, hi) = if a < b { (1.0, a, b) } else { (-1.0, b, a) };
    let (v, e) = gk15(&f, lo, hi);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a: lo, b: hi, value: v, error: e });
    let mut total = v;
    let mut err = e;
    let mut iters = 0;
    while err > abs_tol.max(rel_tol * total.abs()) && iters < max_splits {
        let p = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            heap.push(p);
            break;
        }
        let (v1, e1) = gk15(&f, p.a, m);
        let (v2, e2) = gk15(&f, m, p.b);
        total += v1 + v2 - p.value;
        err += e1 + e2 - p.error;
        heap.push(Panel { a: p.a, b: m, value: v1, error: e1 });
        heap.push(Panel { a: m, b: p.b, value: v2, error: e2 });
        iters += 1;
    }
    // re-sum to shed the running-sum drift
    let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
    Quadrature {
        value: sign * value,
        error,
        converged: error <= abs_tol.max(rel_tol * value.abs()) && value.is_finite(),
    }
}

/// Brent's method on a sign-changing bracket. Returns `None` when the ends
/// share a sign.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, xtol: f64) -> Option<f64> {
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if (fa > 0.0) == (fb > 0.0) || !fa.is_finite() || !fb.is_finite() {
        return None;
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Some(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Some(b)
}

/// Golden-section minimization of `f` on `[a, b]`: (argmin, min).
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, xtol: f64) -> (f64, f64) {
    let r = 0.5 * (5.0_f64.sqrt() - 1.0);
    let (mut a, mut b) = (a, b);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > xtol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
        if c >= d {
            break;
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Chebyshev-Lobatto points `cos(k pi / n)`, k = 0..=n, descending from 1.
pub fn lobatto(n: usize) -> Vec<f64> {
    (0..=n).map(|k| (std::f64::consts::PI * k as f64 / n as f64).cos()).collect()
}

/// Chebyshev coefficients of the interpolant through values at `lobatto(n)`.
pub fn cheb_coeffs(values: &[f64]) -> Vec<f64> {
    let n = values.len() - 1;
    let pi = std::f64::consts::PI;
    (0..=n)
        .map(|j| {
            let mut s = 0.0;
            for (k, v) in values.iter().enumerate() {
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                s += w * v * (pi * (j * k) as f64 / n as f64).cos();
            }
            let c = 2.0 * s / n as f64;
            if j == 0 || j == n {
                0.5 * c
            } else {
                c
            }
        })
        .collect()
}

/// Cumulative integral from -1 of the interpolant through `values`, returned
/// at the same Lobatto points (index 0 is x = 1, the full integral).
pub fn cheb_cumulative(values: &[f64]) -> Vec<f64> {
    let n = values.len() - 1;
    let c = cheb_coeffs(values);
    let get = |j: usize| -> f64 {
        if j == 0 {
            2.0 * c[0]
        } else {
            c.get(j).copied().unwrap_or(0.0)
        }
    };
    let mut b = vec![0.0; n + 2];
    for k in 1..=n + 1 {
        b[k] = (get(k - 1) - get(k + 1)) / (2.0 * k as f64);
    }
    b[0] = -(1..=n + 1).map(|k| if k % 2 == 1 { -b[k] } else { b[k] }).sum::<f64>();
    let pi = std::f64::consts::PI;
    (0..=n)
        .map(|k| {
            b.iter()
                .enumerate()
                .map(|(j, bj)| bj * (pi * (j * k) as f64 / n as f64).cos())
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn integrates_log() {
        let q = integrate(|x| 1.0 / x, 1.0, std::f64::consts::E, 1e-13, 0.0);
        assert!(q.converged);
        assert_relative_eq!(q.value, 1.0, epsilon = 1e-13);
    }

    #[test]
    fn integral_is_oriented() {
        let a = integrate(|x| x.exp(), 0.0, 1.0, 1e-13, 0.0).value;
        let b = integrate(|x| x.exp(), 1.0, 0.0, 1e-13, 0.0).value;
        assert_relative_eq!(a, -b, epsilon = 1e-15);
    }

    #[test]
    fn sharp_integrand() {
        let q = integrate(|x| 1.0 / (x * x + 1e-6), -1.0, 1.0, 1e-10, 0.0);
        let exact = 2.0 * (1.0 / 1e-3_f64) * (1.0 / 1e-3_f64).atan();
        assert_relative_eq!(q.value, exact, max_relative = 1e-11);
    }

    #[test]
    fn brent_finds_cos_root() {
        let r = brent(f64::cos, 0.0, 3.0, 1e-15).unwrap();
        assert_relative_eq!(r, std::f64::consts::FRAC_PI_2, epsilon = 1e-14);
        assert!(brent(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_none());
    }

    #[test]
    fn golden_finds_parabola_vertex() {
        let (x, v) = golden_min(|x| (x - 0.3).powi(2) + 1.0, -1.0, 2.0, 1e-10);
        assert_relative_eq!(x, 0.3, epsilon = 1e-7);
        assert_relative_eq!(v, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn cumulative_integral_of_exp() {
        let n = 32;
        let xs = lobatto(n);
        let vals: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
        let cum = cheb_cumulative(&vals);
        for (x, c) in xs.iter().zip(&cum) {
            assert_relative_eq!(*c, x.exp() - (-1.0_f64).exp(), epsilon = 1e-14);
        }
    }
}
