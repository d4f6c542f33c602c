//! Panel Gauss-Legendre grid with spectral integration and differentiation.

use num_complex::Complex64 as C64;

use super::quad::gauss_legendre;
use crate::error::{Error, Result};

fn legendre_all(m: usize, x: f64) -> Vec<f64> {
    let mut p = vec![0.0; m + 1];
    p[0] = 1.0;
    if m >= 1 {
        p[1] = x;
    }
    for k in 2..=m {
        p[k] = ((2 * k - 1) as f64 * x * p[k - 1] - (k - 1) as f64 * p[k - 2]) / k as f64;
    }
    p
}

/// Composite Gauss-Legendre grid on `[a, b]`: `panels` equal panels of `order` nodes.
#[derive(Clone, Debug)]
pub struct PanelGrid {
    pub a: f64,
    pub b: f64,
    pub panels: usize,
    pub order: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    ref_nodes: Vec<f64>,
    bary: Vec<f64>,
    // indefinite integral matrix on [-1, 1]: cum[i][j] = int_{-1}^{t_i} L_j
    cum: Vec<Vec<f64>>,
    diff: Vec<Vec<f64>>,
}

impl PanelGrid {
    pub fn new(a: f64, b: f64, panels: usize, order: usize) -> Result<Self> {
        if !(b > a) || panels == 0 || order < 2 {
            return Err(Error::InvalidInput(format!(
                "bad panel grid [{a}, {b}] panels={panels} order={order}"
            )));
        }
        let (t, w) = gauss_legendre(order);
        let h = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let lo = a + p as f64 * h;
            for (ti, wi) in t.iter().zip(&w) {
                nodes.push(lo + 0.5 * h * (ti + 1.0));
                weights.push(0.5 * h * wi);
            }
        }
        let m = order;
        let pt: Vec<Vec<f64>> = t.iter().map(|&x| legendre_all(m, x)).collect();
        let mut cum = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in 0..m {
                let mut s = 0.5 * (t[i] + 1.0);
                for k in 1..m {
                    s += 0.5 * pt[j][k] * (pt[i][k + 1] - pt[i][k - 1]);
                }
                cum[i][j] = w[j] * s;
            }
        }
        let bary: Vec<f64> = (0..m)
            .map(|j| {
                1.0 / (0..m)
                    .filter(|&k| k != j)
                    .map(|k| t[j] - t[k])
                    .product::<f64>()
            })
            .collect();
        let mut diff = vec![vec![0.0; m]; m];
        for i in 0..m {
            let mut row = 0.0;
            for j in 0..m {
                if i != j {
                    diff[i][j] = (bary[j] / bary[i]) / (t[i] - t[j]);
                    row += diff[i][j];
                }
            }
            diff[i][i] = -row;
        }
        Ok(PanelGrid {
            a,
            b,
            panels,
            order,
            nodes,
            weights,
            ref_nodes: t,
            bary,
            cum,
            diff,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn half_width(&self) -> f64 {
        0.5 * (self.b - self.a) / self.panels as f64
    }

    pub fn sample(&self, f: impl Fn(f64) -> C64) -> Vec<C64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }

    pub fn integrate(&self, u: &[C64]) -> C64 {
        u.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// `int u conj(v)`.
    pub fn inner(&self, u: &[C64], v: &[C64]) -> C64 {
        u.iter()
            .zip(v)
            .zip(&self.weights)
            .map(|((a, b), w)| a * b.conj() * w)
            .sum()
    }

    pub fn norm(&self, u: &[C64]) -> f64 {
        self.inner(u, u).re.max(0.0).sqrt()
    }

    /// `int_a^{x_i} K(i, t_j) dt` for every node `i`, where `kern(i, j)` is the
    /// integrand at node `j`, smooth in `t` on each panel.
    pub fn volterra(&self, kern: impl Fn(usize, usize) -> C64) -> Vec<C64> {
        let m = self.order;
        let hw = self.half_width();
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let p = i / m;
            let li = i % m;
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..p * m {
                acc += kern(i, j) * self.weights[j];
            }
            for lj in 0..m {
                acc += kern(i, p * m + lj) * (self.cum[li][lj] * hw);
            }
            out.push(acc);
        }
        out
    }

    /// `int_a^{x_i} u` for every node.
    pub fn cumulative(&self, u: &[C64]) -> Vec<C64> {
        let m = self.order;
        let hw = self.half_width();
        let mut out = Vec::with_capacity(self.len());
        let mut base = C64::new(0.0, 0.0);
        for p in 0..self.panels {
            for li in 0..m {
                let mut acc = base;
                for lj in 0..m {
                    acc += u[p * m + lj] * (self.cum[li][lj] * hw);
                }
                out.push(acc);
            }
            for lj in 0..m {
                base += u[p * m + lj] * self.weights[p * m + lj];
            }
        }
        out
    }

    /// Panelwise spectral derivative.
    pub fn derivative(&self, u: &[C64]) -> Vec<C64> {
        let m = self.order;
        let hw = self.half_width();
        let mut out = vec![C64::new(0.0, 0.0); self.len()];
        for p in 0..self.panels {
            for i in 0..m {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..m {
                    acc += u[p * m + j] * self.diff[i][j];
                }
                out[p * m + i] = acc / hw;
            }
        }
        out
    }

    /// Barycentric interpolation of node samples at `x`.
    pub fn interpolate(&self, u: &[C64], x: f64) -> C64 {
        let m = self.order;
        let h = 2.0 * self.half_width();
        let p = (((x - self.a) / h).floor().max(0.0) as usize).min(self.panels - 1);
        let lo = self.a + p as f64 * h;
        let t = 2.0 * (x - lo) / h - 1.0;
        let mut num = C64::new(0.0, 0.0);
        let mut den = 0.0;
        for j in 0..m {
            let d = t - self.ref_nodes[j];
            if d == 0.0 {
                return u[p * m + j];
            }
            let c = self.bary[j] / d;
            num += u[p * m + j] * c;
            den += c;
        }
        num / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integration_and_derivative() {
        let g = PanelGrid::new(0.0, 2.0, 4, 12).unwrap();
        let f = |x: f64| C64::new((3.0 * x).sin(), x * x);
        let u = g.sample(f);
        let exact = C64::new((1.0 - 6f64.cos()) / 3.0, 8.0 / 3.0);
        assert!((g.integrate(&u) - exact).norm() < 1e-13);
        let cum = g.cumulative(&u);
        for (x, c) in g.nodes.iter().zip(&cum) {
            let e = C64::new((1.0 - (3.0 * x).cos()) / 3.0, x * x * x / 3.0);
            assert!((c - e).norm() < 1e-12);
        }
        let d = g.derivative(&u);
        for (x, v) in g.nodes.iter().zip(&d) {
            assert!((v - C64::new(3.0 * (3.0 * x).cos(), 2.0 * x)).norm() < 1e-8);
        }
        let vol = g.volterra(|_, j| u[j]);
        for (a, b) in vol.iter().zip(&cum) {
            assert!((a - b).norm() < 1e-13);
        }
        assert!((g.interpolate(&u, 0.77) - f(0.77)).norm() < 1e-10);
    }
}
