//! The unperturbed operator `L_0(theta) y = i y'''`: characteristic function,
//! real zeros, product form, eigenfunctions, resolvent and spectral projections.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gtrig::{self, SQRT3, ZETA};
use crate::numerics::{find_bracketed_root, truncated_product, PanelGrid, ProductValue};

const I: C64 = C64::new(0.0, 1.0);

/// Interval length `l` and boundary parameter `theta = exp(2 i phi)`, `phi in [0, pi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct L0Config {
    pub l: f64,
    pub phi: f64,
}

impl L0Config {
    pub fn new(l: f64, phi: f64) -> Result<Self> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidInput(format!("length l = {l} must be positive")));
        }
        if !phi.is_finite() {
            return Err(Error::InvalidInput(format!("phase phi = {phi} is not finite")));
        }
        Ok(L0Config { l, phi: phi.rem_euclid(PI) })
    }

    /// From a unimodular `theta`.
    pub fn from_theta(l: f64, theta: C64) -> Result<Self> {
        if (theta.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("|theta| = {} is not 1", theta.norm())));
        }
        Self::new(l, 0.5 * theta.arg())
    }

    pub fn theta(&self) -> C64 {
        C64::from_polar(1.0, 2.0 * self.phi)
    }

    /// `theta = -1`: zero is an eigenvalue and the real root count changes.
    pub fn is_degenerate(&self) -> bool {
        (self.phi - 0.5 * PI).abs() < 1e-12
    }

    /// Interval `(2/l (pi n + phi), 2/l (pi (n + 1) + phi))` holding `lambda_n`.
    pub fn interval(&self, n: i64) -> (f64, f64) {
        let s = 2.0 / self.l;
        (s * (PI * n as f64 + self.phi), s * (PI * (n + 1) as f64 + self.phi))
    }

    /// Large-`|n|` estimate of `lambda_n`, consistent with the interval labels:
    /// `2/l (pi (n+1) + phi - pi/6)` for `n >= 0`, `2/l (pi n + phi + pi/6)` for `n < 0`.
    pub fn asymptotic_zero(&self, n: i64) -> f64 {
        let s = 2.0 / self.l;
        if n >= 0 {
            s * (PI * (n + 1) as f64 + self.phi - PI / 6.0)
        } else {
            s * (PI * n as f64 + self.phi + PI / 6.0)
        }
    }
}

/// `s_2(i lam l) / (i lam)^2` as (scaled value, log scale).
fn s2_at_l(lam: C64, l: f64) -> (C64, f64) {
    let w = I * lam;
    if (w * l).norm() < gtrig::SWITCH_RADIUS {
        (gtrig::s_scaled_all(lam, l)[2], 0.0)
    } else {
        let (v, m) = gtrig::s_all_scaled(w * l);
        (v[2] / (w * w), m)
    }
}

/// `Delta_theta(0, lam) = -(theta s_2(i lam l) + s_2(-i lam l)) / (i lam)^2`.
pub fn delta0(cfg: &L0Config, lam: C64) -> C64 {
    let a = gtrig::s_scaled_all(lam, cfg.l)[2];
    let b = gtrig::s_scaled_all(-lam, cfg.l)[2];
    -(cfg.theta() * a + b)
}

/// `d/dlam Delta_theta(0, lam)`, using `d/dmu S_2(mu) = (l S_1(mu) - 2 S_2(mu)) / mu`
/// with `S_p(mu) = s_p(i mu l) / (i mu)^p` (series near the origin).
pub fn delta0_derivative(cfg: &L0Config, lam: C64) -> C64 {
    let d = |mu: C64| -> C64 {
        if (mu * cfg.l).norm() < 1e-3 {
            let w3 = (I * mu).powu(3);
            let l = cfg.l;
            3.0 * I * (I * mu).powu(2) * (l.powi(5) / 120.0 + 2.0 * w3 * l.powi(8) / 40320.0)
        } else {
            let s = gtrig::s_scaled_all(mu, cfg.l);
            (cfg.l * s[1] - 2.0 * s[2]) / mu
        }
    };
    -(cfg.theta() * d(lam) - d(-lam))
}

/// Sign-carrying real function `-2 Re(exp(i phi) S_2(lam))` times a positive factor;
/// on the real axis `Delta = exp(i phi) * (this) * positive`.
fn real_char(cfg: &L0Config, lam: f64) -> f64 {
    let (v, _) = s2_at_l(C64::new(lam, 0.0), cfg.l);
    -2.0 * (C64::from_polar(1.0, cfg.phi) * v).re
}

/// `|Re(exp(i phi) S_2)| / |S_2|` at `lam`, a scale-free residual of `Delta`.
pub fn relative_residual0(cfg: &L0Config, lam: f64) -> f64 {
    let (v, _) = s2_at_l(C64::new(lam, 0.0), cfg.l);
    (C64::from_polar(1.0, cfg.phi) * v).re.abs() / v.norm()
}

/// Real zeros `lambda_n(0, theta)` for `n_lo <= n <= n_hi`.
#[derive(Clone, Debug)]
pub struct L0Spectrum {
    pub config: L0Config,
    /// `(n, lambda_n)` in ascending `n`.
    pub zeros: Vec<(i64, f64)>,
    /// Scale-free residual of `Delta` at each zero.
    pub residuals: Vec<f64>,
}

impl L0Spectrum {
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.zeros.iter().map(|(_, z)| z * z * z).collect()
    }

    pub fn get(&self, n: i64) -> Option<f64> {
        let lo = self.zeros.first()?.0;
        let k = usize::try_from(n - lo).ok()?;
        self.zeros.get(k).map(|z| z.1)
    }

    pub fn indexed(&self) -> Vec<(i64, C64)> {
        self.zeros.iter().map(|&(n, z)| (n, C64::new(z, 0.0))).collect()
    }
}

/// Root in the bracketing interval `n`.
pub fn l0_zero(cfg: &L0Config, n: i64) -> Result<f64> {
    if cfg.is_degenerate() {
        return Err(Error::DegenerateTheta("-1".into()));
    }
    let (a, b) = cfg.interval(n);
    let f = |x: f64| real_char(cfg, x);
    let (fa, fb) = (f(a), f(b));
    if !(fa * fb < 0.0) {
        return Err(Error::RootSearch {
            index: n,
            reason: format!("no sign change on [{a}, {b}]"),
        });
    }
    find_bracketed_root(f, a, b, 1e-16).map_err(|e| Error::RootSearch {
        index: n,
        reason: e.to_string(),
    })
}

pub fn l0_real_zeros(cfg: &L0Config, n_lo: i64, n_hi: i64) -> Result<L0Spectrum> {
    if n_hi < n_lo {
        return Err(Error::InvalidInput(format!("empty index window [{n_lo}, {n_hi}]")));
    }
    if cfg.is_degenerate() {
        return Err(Error::DegenerateTheta("-1".into()));
    }
    let zeros: Vec<(i64, f64)> = (n_lo..=n_hi)
        .into_par_iter()
        .map(|n| l0_zero(cfg, n).map(|z| (n, z)))
        .collect::<Result<_>>()?;
    let residuals = zeros.iter().map(|&(_, z)| relative_residual0(cfg, z)).collect();
    Ok(L0Spectrum {
        config: *cfg,
        zeros,
        residuals,
    })
}

/// `-(l^2/2)(theta + 1) prod_{|n| <= N} (1 - lam^3/lambda_n^3)`.
pub fn delta0_product(spec: &L0Spectrum, lam: C64, n_max: usize) -> Result<ProductValue> {
    let cfg = &spec.config;
    if cfg.is_degenerate() {
        return Err(Error::Unsupported(
            "product form for theta = -1 (zero is a root)".into(),
        ));
    }
    let p = truncated_product(&spec.indexed(), lam, n_max, 2.0 * PI / cfg.l)?;
    let a = -0.5 * cfg.l * cfg.l * (cfg.theta() + 1.0);
    Ok(ProductValue {
        value: a * p.value,
        tail_bound: p.tail_bound,
    })
}

/// `x(x - l)` normalized: eigenfunction of the zero eigenvalue when `theta = -1`.
pub fn zero_mode(l: f64, x: f64) -> f64 {
    (30.0f64).sqrt() / l.powf(2.5) * (x * x - x * l)
}

/// Normalized eigenfunction `psi_n(0, lam, x)`, from the six-exponential form
/// `u = (s_0(i lam (x + zeta2 l)) - s_0(i lam (x + zeta3 l))) / (i sqrt3 (i lam)^3)`.
///
/// Phase convention: `psi'(0) > 0`.
#[derive(Clone, Debug)]
pub struct Eigen0 {
    pub lambda: C64,
    pub l: f64,
    // exponent coefficients and weights of the six terms
    terms: Vec<(C64, C64, C64)>,
    shift: f64,
    factor: C64,
}

impl Eigen0 {
    /// Eigenfunction attached to the root `lam` (real, or rotated by `zeta2^m`).
    pub fn new(l: f64, lam: C64) -> Result<Self> {
        if lam.norm() == 0.0 {
            return Err(Error::Unsupported("lambda = 0 eigenfunction; see zero_mode".into()));
        }
        let w = I * lam;
        let mut terms = Vec::with_capacity(6);
        // s_0(w(x + c l)) = (1/3) sum_k exp(w zeta_k x) exp(w zeta_k c l)
        for (j, sign) in [(1usize, 1.0), (2usize, -1.0)] {
            for zk in ZETA {
                let ax = w * zk;
                let al = w * zk * ZETA[j] * l;
                let coef = C64::new(sign / 3.0, 0.0) / (I * SQRT3 * w * w * w);
                terms.push((ax, al, coef));
            }
        }
        let shift = terms
            .iter()
            .map(|(ax, al, _)| al.re + ax.re.max(0.0) * l)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut e = Eigen0 {
            lambda: lam,
            l,
            terms,
            shift,
            factor: C64::new(1.0, 0.0),
        };
        let panels = ((lam.norm() * l).ceil() as usize).max(4);
        let grid = PanelGrid::new(0.0, l, panels, 16)?;
        let u = grid.sample(|x| e.raw(x, 0));
        let norm = grid.norm(&u);
        let d0 = e.raw(0.0, 1);
        if !(norm > 0.0) || !norm.is_finite() || d0.norm() == 0.0 {
            return Err(Error::InvalidInput(format!(
                "eigenfunction at lambda = {lam} is not normalizable"
            )));
        }
        e.factor = (d0.conj() / d0.norm()) / norm;
        Ok(e)
    }

    fn raw(&self, x: f64, order: u32) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for &(ax, al, coef) in &self.terms {
            acc += coef * ax.powu(order) * (ax * x + al - self.shift).exp();
        }
        acc
    }

    pub fn value(&self, x: f64) -> C64 {
        self.factor * self.raw(x, 0)
    }

    /// `d^order psi / dx^order`.
    pub fn deriv(&self, x: f64, order: u32) -> C64 {
        self.factor * self.raw(x, order)
    }
}

/// `psi_n(0, lambda_n, x)`.
pub fn eigenfunction0(cfg: &L0Config, n: i64, x: f64) -> Result<C64> {
    if !(0.0..=cfg.l).contains(&x) {
        return Err(Error::InvalidInput(format!("x = {x} outside [0, {}]", cfg.l)));
    }
    let lam = l0_zero(cfg, n)?;
    Ok(Eigen0::new(cfg.l, C64::new(lam, 0.0))?.value(x))
}

/// Distance proxy `|Delta| / (|S_2(lam)| + |S_2(-lam)|)` below which the resolvent refuses.
pub const NEAR_SPECTRUM: f64 = 1e-12;

/// `(L_0(theta) - lam^3)^{-1} f` on the nodes of `grid`.
pub fn resolvent0(cfg: &L0Config, lam: C64, grid: &PanelGrid, f: &[C64]) -> Result<Vec<C64>> {
    resolvent0_with(cfg, lam, grid, f, NEAR_SPECTRUM)
}

pub fn resolvent0_with(
    cfg: &L0Config,
    lam: C64,
    grid: &PanelGrid,
    f: &[C64],
    threshold: f64,
) -> Result<Vec<C64>> {
    if f.len() != grid.len() {
        return Err(Error::InvalidInput("f must be sampled on the grid".into()));
    }
    if (grid.a != 0.0) || (grid.b - cfg.l).abs() > 1e-14 * cfg.l {
        return Err(Error::InvalidInput("grid must span [0, l]".into()));
    }
    let l = cfg.l;
    let theta = cfg.theta();
    let s2 = |m: C64, x: f64| {
        if x >= 0.0 {
            gtrig::s_scaled_all(m, x)[2]
        } else {
            // s_2(i m x)/(i m)^2 = s_2(-i m |x|)/(-i m)^2
            gtrig::s_scaled_all(-m, -x)[2]
        }
    };
    let s2l = s2(lam, l);
    let s2ml = s2(-lam, l);
    let big = theta * s2l + s2ml;
    let dist = big.norm() / (s2l.norm() + s2ml.norm());
    if dist < threshold {
        return Err(Error::NearSpectrum { distance: dist });
    }
    // kernel form: y = -i/Delta_raw { int_0^l [S(x-l) S(-t) - theta S(x) S(l-t)] f
    //   + theta S(l) int_0^x S(x-t) f - S(-l) int_x^l S(x-t) f },  S(y) = s_2(i lam y)/(i lam)^2
    let xs = &grid.nodes;
    let n = xs.len();
    let fs_minus: Vec<C64> = xs.iter().zip(f).map(|(&t, &v)| s2(lam, -t) * v).collect();
    let fs_lt: Vec<C64> = xs.iter().zip(f).map(|(&t, &v)| s2(lam, l - t) * v).collect();
    let c1 = grid.integrate(&fs_minus);
    let c2 = grid.integrate(&fs_lt);
    let within = grid.volterra(|i, j| s2(lam, xs[i] - xs[j]) * f[j]);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let x = xs[i];
        let full: C64 = (0..n)
            .map(|j| s2(lam, x - xs[j]) * f[j] * grid.weights[j])
            .sum();
        let a = within[i];
        let body = s2(lam, x - l) * c1 - theta * s2(lam, x) * c2 + theta * s2l * a - s2ml * (full - a);
        out.push(I * body / (-big));
    }
    Ok(out)
}

/// `<f, psi> psi` on the grid nodes.
pub fn projection0(psi: &Eigen0, grid: &PanelGrid, f: &[C64]) -> Result<Vec<C64>> {
    if f.len() != grid.len() {
        return Err(Error::InvalidInput("f must be sampled on the grid".into()));
    }
    let p = grid.sample(|x| psi.value(x));
    let c = grid.inner(f, &p);
    Ok(p.into_iter().map(|v| c * v).collect())
}

/// `lim_{lam -> lambda_n} (lambda_n^3 - lam^3) R(lam^3) f`, by linear extrapolation in `delta`
/// from `lam = lambda_n (1 - delta)`.
pub fn resolvent_limit0(cfg: &L0Config, lambda_n: f64, grid: &PanelGrid, f: &[C64]) -> Result<Vec<C64>> {
    let eval = |delta: f64| -> Result<Vec<C64>> {
        let lam = C64::new(lambda_n * (1.0 - delta), 0.0);
        let r = resolvent0_with(cfg, lam, grid, f, 0.0)?;
        let k = lambda_n.powi(3) - lam.powu(3);
        Ok(r.into_iter().map(|v| k * v).collect())
    };
    let d = 1e-4;
    let a = eval(d)?;
    let b = eval(0.5 * d)?;
    Ok(a.iter().zip(&b).map(|(a, b)| 2.0 * b - a).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(phi: f64) -> L0Config {
        L0Config::new(1.0, phi).unwrap()
    }

    #[test]
    fn value_at_origin_and_symmetries() {
        let c = cfg(0.0);
        assert!((delta0(&c, C64::new(0.0, 0.0)) + 1.0).norm() < 1e-15);
        let c = cfg(0.7);
        let lam = C64::new(1.3, 0.4);
        let d = delta0(&c, lam);
        assert!((delta0(&c, lam * ZETA[1]) - d).norm() < 1e-13);
        assert!((d.conj() - c.theta().conj() * delta0(&c, lam.conj())).norm() < 1e-13);
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let c = cfg(0.3);
        for lam in [C64::new(0.0004, 0.0), C64::new(0.8, 0.2), C64::new(4.0, -1.0)] {
            let h = 1e-5;
            let fd = (delta0(&c, lam + h) - delta0(&c, lam - h)) / (2.0 * h);
            let an = delta0_derivative(&c, lam);
            assert!((fd - an).norm() < 1e-7 * (1.0 + an.norm()), "{lam}: {fd} {an}");
        }
    }

    #[test]
    fn zeros_in_their_intervals() {
        let c = cfg(0.7);
        let sp = l0_real_zeros(&c, -3, 5).unwrap();
        for (&(n, z), r) in sp.zeros.iter().zip(&sp.residuals) {
            let (a, b) = c.interval(n);
            assert!(a < z && z < b);
            assert!(*r < 1e-13, "n={n} residual {r}");
            // dense scan oracle: exactly one sign change of Re(e^{i phi} Delta e^{-i phi})
            let m = 2000;
            let changes = (0..m)
                .filter(|&k| {
                    let x0 = a + (b - a) * k as f64 / m as f64;
                    let x1 = a + (b - a) * (k + 1) as f64 / m as f64;
                    real_char(&c, x0) * real_char(&c, x1) < 0.0
                })
                .count();
            assert_eq!(changes, 1);
        }
        assert!(l0_real_zeros(&cfg(0.5 * PI), 0, 1).is_err());
    }

    #[test]
    fn cot_equation_root() {
        // the cot form cot(lam l/2 - phi) = f(lam)
        let c = cfg(0.7);
        let z = l0_zero(&c, 2).unwrap();
        let f = |x: f64| {
            let a = SQRT3 * x / 2.0;
            (SQRT3 * a.sinh() - (1.5 * x).sin()) / ((1.5 * x).cos() - a.cosh())
        };
        let lhs = 1.0 / (z / 2.0 - c.phi).tan();
        assert!((lhs - f(z)).abs() < 1e-10);
    }

    #[test]
    fn asymptotic_defects_shrink() {
        let c = cfg(0.7);
        let sp = l0_real_zeros(&c, -20, 20).unwrap();
        let defect = |n: i64| (sp.get(n).unwrap() - c.asymptotic_zero(n)).abs();
        for n in 15..20 {
            // exponentially small, so only monotone down to rounding
            assert!(defect(n + 1) <= defect(n) + 1e-13);
            assert!(defect(-n - 1) <= defect(-n) + 1e-13);
        }
        assert!(defect(20) < 1e-12);
    }

    #[test]
    fn product_matches_direct() {
        let c = L0Config::from_theta(1.0, C64::new(0.0, 1.0)).unwrap();
        let sp = l0_real_zeros(&c, -2000, 2000).unwrap();
        let lam = C64::new(2.0, 0.0);
        let p = delta0_product(&sp, lam, 2000).unwrap();
        let d = delta0(&c, lam);
        assert!(((p.value - d) / d).norm() < 1e-4);
        assert!(((p.value - d) / d).norm() < p.tail_bound.max(1e-12) * 10.0);
        let at_root = delta0_product(&sp, C64::new(sp.get(3).unwrap(), 0.0), 2000).unwrap();
        assert_eq!(at_root.value, C64::new(0.0, 0.0));
        let at_zero = delta0_product(&sp, C64::new(0.0, 0.0), 2000).unwrap();
        assert_eq!(at_zero.value, -0.5 * (c.theta() + 1.0));
    }

    #[test]
    fn eigenfunctions_orthonormal_and_satisfy_boundary_conditions() {
        let c = cfg(0.7);
        let grid = PanelGrid::new(0.0, 1.0, 20, 16).unwrap();
        let efs: Vec<Eigen0> = (-4..4)
            .map(|n| Eigen0::new(1.0, C64::new(l0_zero(&c, n).unwrap(), 0.0)).unwrap())
            .collect();
        let samples: Vec<Vec<C64>> = efs.iter().map(|e| grid.sample(|x| e.value(x))).collect();
        for (i, u) in samples.iter().enumerate() {
            for (j, v) in samples.iter().enumerate() {
                let g = grid.inner(u, v);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).norm() < 1e-8, "({i},{j}) {g}");
            }
        }
        for e in &efs {
            assert!(e.value(0.0).norm() < 1e-12);
            assert!(e.value(1.0).norm() < 1e-9);
            assert!((e.deriv(1.0, 1) - c.theta() * e.deriv(0.0, 1)).norm() < 1e-9 * e.deriv(0.0, 1).norm());
            let rot = Eigen0::new(1.0, e.lambda * ZETA[1]).unwrap();
            for x in [0.1, 0.5, 0.9] {
                assert!((rot.value(x) - e.value(x)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn product_form_of_eigenfunction_agrees() {
        let c = cfg(0.7);
        let lam = C64::new(l0_zero(&c, 1).unwrap(), 0.0);
        let e = Eigen0::new(1.0, lam).unwrap();
        let sl = gtrig::s_scaled_all(lam, 1.0);
        let u = |x: f64| {
            let s = gtrig::s_scaled_all(lam, x);
            s[2] * sl[1] - s[1] * sl[2]
        };
        let r = e.value(0.4) / u(0.4);
        for x in [0.1, 0.3, 0.7, 0.95] {
            assert!((e.value(x) - r * u(x)).norm() < 1e-9);
        }
    }

    fn variation_of_constants(c: &L0Config, lam: C64, grid: &PanelGrid, f: &[C64]) -> Vec<C64> {
        // y = c1 S1 + c2 S2 - i int_0^x S2(x - t) f ; y(l) = 0 and y'(l) = theta y'(0)
        let s = |x: f64| gtrig::s_scaled_all(lam, x);
        let xs = &grid.nodes;
        let i2 = grid.integrate(&xs.iter().zip(f).map(|(&t, v)| s(c.l - t)[2] * v).collect::<Vec<_>>());
        let i1 = grid.integrate(&xs.iter().zip(f).map(|(&t, v)| s(c.l - t)[1] * v).collect::<Vec<_>>());
        let sl = s(c.l);
        let (a11, a12, b1) = (sl[1], sl[2], I * i2);
        let (a21, a22, b2) = (sl[0] - c.theta(), sl[1], I * i1);
        let det = a11 * a22 - a12 * a21;
        let c1 = (b1 * a22 - a12 * b2) / det;
        let c2 = (a11 * b2 - a21 * b1) / det;
        let vol = grid.volterra(|i, j| s(xs[i] - xs[j])[2] * f[j]);
        xs.iter()
            .zip(&vol)
            .map(|(&x, v)| c1 * s(x)[1] + c2 * s(x)[2] - I * v)
            .collect()
    }

    #[test]
    fn resolvent_kernel_matches_variation_of_constants() {
        let c = cfg(0.7);
        let grid = PanelGrid::new(0.0, 1.0, 8, 16).unwrap();
        let f = grid.sample(|x| C64::new((3.0 * x).cos(), x * x));
        for lam in [C64::new(1.7, 0.0), C64::new(2.0, 0.7), C64::new(-3.1, 0.2)] {
            let y = resolvent0(&c, lam, &grid, &f).unwrap();
            let z = variation_of_constants(&c, lam, &grid, &f);
            for (a, b) in y.iter().zip(&z) {
                assert!((a - b).norm() < 1e-10 * (1.0 + b.norm()), "{lam}: {a} {b}");
            }
            // defining equation via spectral derivatives
            let d3 = grid.derivative(&grid.derivative(&grid.derivative(&y)));
            let l3 = lam.powu(3);
            for k in 0..grid.len() {
                assert!((I * d3[k] - l3 * y[k] - f[k]).norm() < 1e-6);
            }
            assert!(grid.interpolate(&y, 0.0).norm() < 1e-8);
        }
    }

    #[test]
    fn resolvent_of_eigenfunction_and_projection_limit() {
        let c = cfg(0.7);
        let grid = PanelGrid::new(0.0, 1.0, 12, 16).unwrap();
        let lam_n = l0_zero(&c, 1).unwrap();
        let e = Eigen0::new(1.0, C64::new(lam_n, 0.0)).unwrap();
        let psi = grid.sample(|x| e.value(x));
        let lam = C64::new(1.1, 0.3);
        let y = resolvent0(&c, lam, &grid, &psi).unwrap();
        let k = lam_n.powi(3) - lam.powu(3);
        for (a, b) in y.iter().zip(&psi) {
            assert!((a - b / k).norm() < 1e-6);
        }
        let f = grid.sample(|x| C64::new(x * (1.0 - x), 0.3 * x));
        let lim = resolvent_limit0(&c, lam_n, &grid, &f).unwrap();
        let proj = projection0(&e, &grid, &f).unwrap();
        for (a, b) in lim.iter().zip(&proj) {
            assert!((a - b).norm() < 1e-6, "{a} {b}");
        }
        let idem = projection0(&e, &grid, &psi).unwrap();
        for (a, b) in idem.iter().zip(&psi) {
            assert!((a - b).norm() < 1e-8);
        }
        assert!(matches!(
            resolvent0(&c, C64::new(lam_n, 0.0), &grid, &f),
            Err(Error::NearSpectrum { .. })
        ));
    }

    #[test]
    fn parseval_defect() {
        let c = cfg(0.7);
        let grid = PanelGrid::new(0.0, 1.0, 40, 16).unwrap();
        let f = grid.sample(|x| C64::new((x * (1.0 - x)).powi(2), 0.0));
        let total = grid.norm(&f).powi(2);
        let mut acc = 0.0;
        let mut prev = 0.0;
        for n in -25..=25 {
            let e = Eigen0::new(1.0, C64::new(l0_zero(&c, n).unwrap(), 0.0)).unwrap();
            let p = grid.sample(|x| e.value(x));
            acc += grid.inner(&f, &p).norm_sqr();
            assert!(acc >= prev);
            prev = acc;
        }
        assert!(acc <= total * (1.0 + 1e-10));
        assert!(acc >= 0.98 * total, "{acc} {total}");
    }
}
