//! Quadrature: adaptive Gauss-Kronrod, principal values, Gauss-Legendre rules.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const MAX_INTERVALS: usize = 4000;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> C64, a: f64, b: f64) -> (C64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += s * WGK[j];
        if j % 2 == 1 {
            g += s * WG[j / 2];
        }
    }
    ((k * h), ((k - g) * h).norm())
}

struct Piece {
    a: f64,
    b: f64,
    val: C64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.partial_cmp(&o.err).unwrap_or(Ordering::Equal)
    }
}

/// Globally adaptive 7/15-point Gauss-Kronrod quadrature with error
/// `<= tol * (1 + |result|)`.
pub fn quad_adaptive(f: impl Fn(f64) -> C64, a: f64, b: f64, tol: f64) -> Result<C64> {
    if !(a.is_finite() && b.is_finite()) || !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("bad quadrature [{a}, {b}], tol {tol}")));
    }
    if a == b {
        return Ok(C64::new(0.0, 0.0));
    }
    let (v, e) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, val: v, err: e });
    let mut total = v;
    let mut err = e;
    while err > tol * (1.0 + total.norm()) {
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature { a, b, estimate: err });
        }
        let p = heap.pop().expect("non-empty heap");
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            // cannot split further; accept what we have
            heap.push(p);
            break;
        }
        let (v1, e1) = gk15(&f, p.a, m);
        let (v2, e2) = gk15(&f, m, p.b);
        total += v1 + v2 - p.val;
        err += e1 + e2 - p.err;
        heap.push(Piece { a: p.a, b: m, val: v1, err: e1 });
        heap.push(Piece { a: m, b: p.b, val: v2, err: e2 });
    }
    // re-sum to shed accumulated rounding from the running updates
    let total: C64 = heap.iter().map(|p| p.val).sum();
    let err: f64 = heap.iter().map(|p| p.err).sum();
    if err > tol * (1.0 + total.norm()) * 10.0 {
        return Err(Error::Quadrature { a, b, estimate: err });
    }
    Ok(total)
}

/// `PV int_a^b f(tau) / (tau - t) dtau` by singularity subtraction.
pub fn quad_principal_value(f: impl Fn(f64) -> C64, a: f64, b: f64, t: f64, tol: f64) -> Result<C64> {
    if !(a < t && t < b) {
        return Err(Error::InvalidInput(format!("pole {t} not inside ({a}, {b})")));
    }
    let ft = f(t);
    let g = |tau: f64| {
        if tau == t {
            C64::new(0.0, 0.0)
        } else {
            (f(tau) - ft) / (tau - t)
        }
    };
    let left = quad_adaptive(g, a, t, tol)?;
    let right = quad_adaptive(g, t, b, tol)?;
    Ok(left + right + ft * ((b - t) / (t - a)).ln())
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite Gauss-Legendre rule: `panels` equal panels of `order` nodes on `[a, b]`.
#[derive(Clone, Debug)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeRule {
    pub fn new(a: f64, b: f64, panels: usize, order: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        let h = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let lo = a + p as f64 * h;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(lo + 0.5 * h * (xi + 1.0));
                weights.push(0.5 * h * wi);
            }
        }
        CompositeRule { nodes, weights }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> C64) -> C64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| f(x) * w)
            .sum()
    }

    /// `sum w_i u_i conj(v_i)` for samples on the nodes.
    pub fn inner(&self, u: &[C64], v: &[C64]) -> C64 {
        u.iter()
            .zip(v)
            .zip(&self.weights)
            .map(|((a, b), w)| a * b.conj() * w)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gtrig;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn constant_and_sqrt_singularity() {
        let v = quad_adaptive(|_| c(1.0), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 1.0).norm() < 1e-14);
        let v = quad_adaptive(|x| c(1.0 / x.sqrt()), 0.0, 1.0, 1e-10).unwrap();
        assert!((v - 2.0).norm() < 1e-8, "{v}");
    }

    #[test]
    fn oscillatory_product_matches_composite_rule() {
        let i = C64::new(0.0, 1.0);
        let f = |x: f64| gtrig::s(1, i * x) * gtrig::s(2, -i * x);
        let v = quad_adaptive(f, 0.0, 1.0, 1e-13).unwrap();
        let rule = CompositeRule::new(0.0, 1.0, 40, 20);
        let brute = rule.integrate(f);
        assert!((v - brute).norm() < 1e-10);
    }

    #[test]
    fn principal_values() {
        let v = quad_principal_value(|_| c(1.0), 0.0, 2.0, 1.0, 1e-12).unwrap();
        assert!(v.norm() < 1e-14);
        let v = quad_principal_value(c, 0.0, 2.0, 1.0, 1e-12).unwrap();
        assert!((v - 2.0).norm() < 1e-12);
        assert!(quad_principal_value(c, 0.0, 2.0, 3.0, 1e-12).is_err());
    }

    #[test]
    fn principal_value_matches_excision() {
        let f = |x: f64| C64::new((1.3 * x).sin() + x * x, (0.4 * x).cos());
        let (a, b, t) = (-0.5, 1.7, 0.3);
        let pv = quad_principal_value(f, a, b, t, 1e-13).unwrap();
        // symmetric excision of (t - eps, t + eps); the defect is 2 eps f'(t) + O(eps^3)
        let ex = |eps: f64| {
            let g = |x: f64| f(x) / (x - t);
            quad_adaptive(g, a, t - eps, 1e-14).unwrap() + quad_adaptive(g, t + eps, b, 1e-14).unwrap()
        };
        let (e1, e2, e3) = (ex(1e-2), ex(5e-3), ex(2.5e-3));
        let (r1, r2) = (e2 * 2.0 - e1, e3 * 2.0 - e2);
        let r = (r2 * 8.0 - r1) / 7.0;
        assert!((pv - r).norm() < 1e-8, "{pv} {r}");
    }

    #[test]
    fn gauss_legendre_exactness() {
        for n in [1, 2, 5, 12, 31] {
            let (x, w) = gauss_legendre(n);
            let s: f64 = w.iter().sum();
            assert!((s - 2.0).abs() < 1e-13);
            let deg = 2 * n - 2;
            let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((m - 2.0 / (deg + 1) as f64).abs() < 1e-13, "n={n}");
        }
    }
}
