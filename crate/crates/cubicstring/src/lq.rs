//! The perturbed operator `L_q(theta) y = i y''' + q y` and the auxiliary family
//! `L_q(theta, h)` with `y(0) = i h y''(0)`: fundamental system, transformation
//! operator oracle, characteristic functions, real spectra, eigenfunctions,
//! Green kernel and resolvent.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gtrig::{self, SQRT3};
use crate::l0::{self, L0Config};
use crate::numerics::{
    find_bracketed_root, integrate_system, null_solution, truncated_product, BoundaryRows, OdeTolerance,
    PanelGrid, ProductValue,
};
use crate::potential::Potential;

const I: C64 = C64::new(0.0, 1.0);
const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Largest `|lam| l` accepted by the ODE path.
pub const MAX_LAMBDA_L: f64 = 2.0e4;

/// `d(lam) = exp|Im lam| cosh(sqrt3 Re lam / 2)`, the growth majorant of `s_p(i lam)`.
pub fn growth_bound(lam: C64) -> f64 {
    lam.im.abs().exp() * (0.5 * SQRT3 * lam.re).cosh()
}

/// Boundary parameters: `theta = exp(2 i phi)` and, for the auxiliary family, `h`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Boundary {
    pub phi: f64,
    pub h: Option<f64>,
}

impl Boundary {
    pub fn theta(phi: f64) -> Self {
        Boundary {
            phi: phi.rem_euclid(PI),
            h: None,
        }
    }

    pub fn theta_h(phi: f64, h: f64) -> Result<Self> {
        if !(h != 0.0 && h.is_finite()) {
            return Err(Error::InvalidInput(format!("h = {h} must be finite and nonzero")));
        }
        Ok(Boundary {
            phi: phi.rem_euclid(PI),
            h: Some(h),
        })
    }

    pub fn theta_value(&self) -> C64 {
        C64::from_polar(1.0, 2.0 * self.phi)
    }
}

/// Knobs for the ODE path and the zero search.
#[derive(Clone, Copy, Debug)]
pub struct LqOptions {
    pub ode: OdeTolerance,
    /// Initial window half-width as a fraction of the neighbouring seed gaps.
    pub window: f64,
    /// Number of doublings of the window before the exhaustive fallback.
    pub expansions: usize,
}

impl Default for LqOptions {
    fn default() -> Self {
        LqOptions {
            ode: OdeTolerance::default(),
            window: 0.4,
            expansions: 3,
        }
    }
}

fn check_lambda(pot: &Potential, lam: C64) -> Result<()> {
    if !(lam.re.is_finite() && lam.im.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite lambda {lam}")));
    }
    if lam.norm() * pot.l() > MAX_LAMBDA_L {
        return Err(Error::Unsupported(format!(
            "|lambda| l = {} exceeds {MAX_LAMBDA_L}",
            lam.norm() * pot.l()
        )));
    }
    Ok(())
}

/// `y''' = c(x) y` with `c = -i(lam^3 - q)`, or `c = i(lam^3 - q)` for the starred equation.
fn coefficient(pot: &Potential, lam: C64, starred: bool) -> impl Fn(f64) -> C64 + '_ {
    let l3 = lam * lam * lam;
    let sign = if starred { I } else { -I };
    move |x| sign * (l3 - pot.q(x))
}

fn identity3() -> [[C64; 3]; 3] {
    [[ONE, ZERO, ZERO], [ZERO, ONE, ZERO], [ZERO, ZERO, ONE]]
}

/// Scaled states and log scales at the ascending points `xs` of `[0, l]`.
pub(crate) fn solve<const M: usize>(
    pot: &Potential,
    lam: C64,
    starred: bool,
    init: [[C64; 3]; M],
    xs: &[f64],
    tol: &OdeTolerance,
) -> Result<(Vec<[[C64; 3]; M]>, Vec<f64>)> {
    check_lambda(pot, lam)?;
    if xs.is_empty() || xs.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("evaluation points must be ascending".into()));
    }
    if xs[0] < 0.0 || xs[xs.len() - 1] > pot.l() * (1.0 + 1e-14) {
        return Err(Error::InvalidInput(format!("points outside [0, {}]", pot.l())));
    }
    let (grid, idx) = pot.with_breaks(xs);
    let tr = integrate_system(coefficient(pot, lam, starred), init, &grid, tol)?;
    Ok((
        idx.iter().map(|&i| tr.states[i]).collect(),
        idx.iter().map(|&i| tr.log_scale[i]).collect(),
    ))
}

/// `s_p(lam, x)` and derivatives (and optionally the starred `s_p^*`) at sample points.
///
/// Stored values are scaled: the true triple at `x[i]` is `plain[i][p] * exp(log_scale[i])`.
#[derive(Clone, Debug)]
pub struct FundamentalSystem {
    pub lambda: C64,
    pub x: Vec<f64>,
    pub plain: Vec<[[C64; 3]; 3]>,
    pub log_scale: Vec<f64>,
    pub starred: Option<(Vec<[[C64; 3]; 3]>, Vec<f64>)>,
}

impl FundamentalSystem {
    /// `(s_p, s_p', s_p'')` at `x[i]`.
    pub fn s(&self, i: usize, p: usize) -> [C64; 3] {
        let f = self.log_scale[i].exp();
        self.plain[i][p].map(|v| v * f)
    }

    /// `(s_p^*, s_p^*', s_p^*'')` at `x[i]`.
    pub fn s_star(&self, i: usize, p: usize) -> Option<[C64; 3]> {
        self.starred.as_ref().map(|(v, ls)| {
            let f = ls[i].exp();
            v[i][p].map(|z| z * f)
        })
    }

    pub fn last(&self) -> usize {
        self.x.len() - 1
    }

    /// `det [s_p^{(r)}]`, identically one.
    pub fn determinant(&self, i: usize) -> C64 {
        let m = [self.s(i, 0), self.s(i, 1), self.s(i, 2)];
        m[0][0] * (m[1][1] * m[2][2] - m[2][1] * m[1][2]) - m[1][0] * (m[0][1] * m[2][2] - m[2][1] * m[0][2])
            + m[2][0] * (m[0][1] * m[1][2] - m[1][1] * m[0][2])
    }

    /// Largest relative defect of `W_{0,1} = s_0^*`, `W_{1,2} = s_2^*`, `W_{0,2} = s_1^*` at `x[i]`.
    pub fn wronskian_residual(&self, i: usize) -> Option<f64> {
        let w = |j: usize, k: usize| {
            let (a, b) = (self.s(i, j), self.s(i, k));
            (a[0] * b[1] - b[0] * a[1], a[0].norm() * b[1].norm() + b[0].norm() * a[1].norm())
        };
        let mut worst: f64 = 0.0;
        for (j, k, p) in [(0, 1, 0), (1, 2, 2), (0, 2, 1)] {
            let (v, scale) = w(j, k);
            let star = self.s_star(i, p)?[0];
            worst = worst.max((v - star).norm() / scale.max(star.norm()).max(1.0));
        }
        Some(worst)
    }
}

/// Fundamental system at `x = l`.
pub fn fundamental_system(pot: &Potential, lam: C64, starred: bool) -> Result<FundamentalSystem> {
    fundamental_system_on(pot, lam, &[pot.l()], starred, &OdeTolerance::default())
}

/// Fundamental system at ascending points of `[0, l]`.
pub fn fundamental_system_on(
    pot: &Potential,
    lam: C64,
    xs: &[f64],
    starred: bool,
    tol: &OdeTolerance,
) -> Result<FundamentalSystem> {
    let (plain, log_scale) = solve(pot, lam, false, identity3(), xs, tol)?;
    let starred = if starred {
        Some(solve(pot, lam, true, identity3(), xs, tol)?)
    } else {
        None
    };
    Ok(FundamentalSystem {
        lambda: lam,
        x: xs.to_vec(),
        plain,
        log_scale,
        starred,
    })
}

/// Free values `[s_p(i lam l) / (i lam)^p]` as (scaled triple, log scale).
fn free_scaled(lam: C64, l: f64) -> ([C64; 3], f64) {
    let w = I * lam;
    if (w * l).norm() < gtrig::SWITCH_RADIUS {
        (gtrig::s_scaled_all(lam, l), 0.0)
    } else {
        let (v, m) = gtrig::s_all_scaled(w * l);
        ([v[0], v[1] / w, v[2] / (w * w)], m)
    }
}

/// Neumann-series estimate of `s_p(lam, x)`.
#[derive(Clone, Copy, Debug)]
pub struct NeumannEstimate {
    pub values: [C64; 3],
    /// Rigorous bound on the dropped terms, per `p`.
    pub tail_bound: [f64; 3],
    pub terms: usize,
}

/// Majorant of the dropped kernel terms: `sum_{n > N} sigma^{n-1} / ((n-1)! |lam|^{2n})`.
fn kernel_tail(sigma: f64, lam_abs: f64, n_terms: usize) -> f64 {
    let a = lam_abs * lam_abs;
    let mut term = 1.0 / a;
    for n in 1..=n_terms {
        term *= sigma / (n as f64 * a);
    }
    let mut sum = 0.0;
    let mut n = n_terms + 1;
    while term > 1e-18 * sum && n < n_terms + 400 {
        sum += term;
        term *= sigma / (n as f64 * a);
        n += 1;
    }
    sum
}

fn oracle_grid(lam: C64, a: f64, b: f64) -> Result<PanelGrid> {
    let panels = ((2.0 * lam.norm() * (b - a)).ceil() as usize).clamp(4, 400);
    PanelGrid::new(a, b, panels, 16)
}

/// `s_p(lam, x) = (I + T) s_p(i lam .)/(i lam)^p` summed through `n_terms`
/// Volterra iterations on a panel grid.
pub fn neumann_oracle(pot: &Potential, lam: C64, x: f64, n_terms: usize) -> Result<NeumannEstimate> {
    if n_terms > 6 {
        return Err(Error::InvalidInput(format!("n_terms = {n_terms} > 6")));
    }
    if lam.norm() == 0.0 {
        return Err(Error::Unsupported("neumann oracle at lambda = 0".into()));
    }
    if !(x > 0.0 && x <= pot.l()) {
        return Err(Error::InvalidInput(format!("x = {x} outside (0, {}]", pot.l())));
    }
    let grid = oracle_grid(lam, 0.0, x)?;
    let t = &grid.nodes;
    let n = t.len();
    let q: Vec<f64> = t.iter().map(|&s| pot.q(s)).collect();
    let k1 = |y: f64| gtrig::s_scaled_all(lam, y)[2];
    let table: Vec<Vec<C64>> = (0..n).map(|i| t.iter().map(|&s| k1(t[i] - s)).collect()).collect();
    let to_end: Vec<C64> = t.iter().map(|&s| k1(x - s)).collect();
    let sigma = pot.sigma(x)?;
    let tail = kernel_tail(sigma, lam.norm(), n_terms);

    let mut values = [ZERO; 3];
    let mut bounds = [0.0; 3];
    for p in 0..3 {
        let y0: Vec<C64> = t.iter().map(|&s| gtrig::s_scaled_all(lam, s)[p]).collect();
        let mut total = gtrig::s_scaled_all(lam, x)[p];
        let mut term = y0.clone();
        for _ in 0..n_terms {
            let g: Vec<C64> = term.iter().zip(&q).map(|(v, qq)| v * *qq).collect();
            total += I * grid.integrate(&to_end.iter().zip(&g).map(|(a, b)| a * b).collect::<Vec<_>>());
            term = grid
                .volterra(|i, j| table[i][j] * g[j])
                .into_iter()
                .map(|v| I * v)
                .collect();
        }
        let weight: Vec<C64> = t
            .iter()
            .zip(&q)
            .zip(&y0)
            .map(|((&s, qq), y)| C64::new(growth_bound(lam * (x - s)) * qq.abs() * y.norm(), 0.0))
            .collect();
        values[p] = total;
        bounds[p] = tail * grid.integrate(&weight).re * (1.0 + 1e-12);
    }
    Ok(NeumannEstimate {
        values,
        tail_bound: bounds,
        terms: n_terms,
    })
}

/// Transformation-operator kernel `T(lam, x, t) = q(t) sum_{n <= N} i^n K_n(lam, x, t)`.
#[derive(Clone, Copy, Debug)]
pub struct KernelEstimate {
    pub value: C64,
    pub tail_bound: f64,
}

pub fn transformation_kernel(pot: &Potential, lam: C64, x: f64, t: f64, n_terms: usize) -> Result<KernelEstimate> {
    if n_terms == 0 || n_terms > 6 {
        return Err(Error::InvalidInput(format!("n_terms = {n_terms} must be in 1..=6")));
    }
    if lam.norm() == 0.0 {
        return Err(Error::Unsupported("kernel at lambda = 0".into()));
    }
    if !(0.0 <= t && t < x && x <= pot.l()) {
        return Err(Error::InvalidInput(format!("need 0 <= t < x <= l, got t = {t}, x = {x}")));
    }
    let k1 = |y: f64| gtrig::s_scaled_all(lam, y)[2];
    let grid = oracle_grid(lam, t, x)?;
    let s = &grid.nodes;
    let q: Vec<f64> = s.iter().map(|&v| pot.q(v)).collect();
    // v_n(s_i) = K_n(s_i, t)
    let mut v: Vec<C64> = s.iter().map(|&si| k1(si - t)).collect();
    let mut sum = I * k1(x - t);
    let mut ipow = I;
    for _ in 1..n_terms {
        ipow *= I;
        let g: Vec<C64> = v.iter().zip(&q).map(|(a, b)| a * *b).collect();
        let at_x: Vec<C64> = s.iter().zip(&g).map(|(&sj, gj)| k1(x - sj) * gj).collect();
        sum += ipow * grid.integrate(&at_x);
        v = grid.volterra(|i, j| k1(s[i] - s[j]) * g[j]);
    }
    let sigma = pot.sigma(x)?;
    let tail = kernel_tail(sigma, lam.norm(), n_terms);
    Ok(KernelEstimate {
        value: pot.q(t) * sum,
        tail_bound: pot.q(t).abs() * growth_bound(lam * (x - t)) * tail,
    })
}

/// `Delta_theta(q, lam) = -(theta s_2(lam, l) + s_2^*(lam, l))` as (scaled value, log scale).
pub fn delta_q_scaled(pot: &Potential, theta: C64, lam: C64, tol: &OdeTolerance) -> Result<(C64, f64)> {
    let init = [[ZERO, ZERO, ONE]];
    let (p, lp) = solve(pot, lam, false, init, &[pot.l()], tol)?;
    let (s, ls) = solve(pot, lam, true, init, &[pot.l()], tol)?;
    let m = lp[0].max(ls[0]);
    let v = -(theta * p[0][0][0] * (lp[0] - m).exp() + s[0][0][0] * (ls[0] - m).exp());
    Ok((v, m))
}

pub fn delta_q(pot: &Potential, theta: C64, lam: C64) -> Result<C64> {
    let (v, m) = delta_q_scaled(pot, theta, lam, &OdeTolerance::default())?;
    Ok(v * m.exp())
}

/// `Delta_{theta,h}(q, lam) = Delta_theta(q, lam) - i h (theta s_0(lam, l) - s_0^*(lam, l))`.
pub fn delta_qh(pot: &Potential, theta: C64, h: f64, lam: C64) -> Result<C64> {
    if h == 0.0 {
        return delta_q(pot, theta, lam);
    }
    let tol = OdeTolerance::default();
    let init = [[ZERO, ZERO, ONE], [ONE, ZERO, ZERO]];
    let (p, lp) = solve(pot, lam, false, init, &[pot.l()], &tol)?;
    let (s, ls) = solve(pot, lam, true, init, &[pot.l()], &tol)?;
    let (fp, fs) = (lp[0].exp(), ls[0].exp());
    let (s2, s0) = (p[0][0][0] * fp, p[0][1][0] * fp);
    let (s2s, s0s) = (s[0][0][0] * fs, s[0][1][0] * fs);
    Ok(-(theta * s2 + s2s) - I * h * (theta * s0 - s0s))
}

/// `Q_theta(lam) = -i int_0^l q(t) {theta s_2(lam, t) S_2(lam, l - t) - s_2^*(lam, t) S_2(-lam, l - t)} dt`
/// with `S_2(mu, y) = s_2(i mu y)/(i mu)^2`.
pub fn q_theta(pot: &Potential, theta: C64, lam: C64) -> Result<C64> {
    let l = pot.l();
    let mut total = ZERO;
    let mut cuts = vec![0.0];
    cuts.extend_from_slice(pot.breaks());
    cuts.push(l);
    for w in cuts.windows(2) {
        let panels = ((lam.norm() * (w[1] - w[0])).ceil() as usize).max(8);
        let grid = PanelGrid::new(w[0], w[1], panels, 20)?;
        let fs = fundamental_system_on(pot, lam, &grid.nodes, true, &OdeTolerance::default())?;
        let vals: Vec<C64> = (0..grid.len())
            .map(|i| {
                let t = grid.nodes[i];
                let s2 = fs.s(i, 2)[0];
                let s2s = fs.s_star(i, 2).expect("starred requested")[0];
                pot.q(t) * (theta * s2 * gtrig::s_scaled_all(lam, l - t)[2] - s2s * gtrig::s_scaled_all(-lam, l - t)[2])
            })
            .collect();
        total += grid.integrate(&vals);
    }
    Ok(-I * total)
}

/// `|Delta_theta(q, lam) - Delta_theta(0, lam) - Q_theta(lam)|`.
pub fn delta_q_decomposition_residual(pot: &Potential, theta: C64, lam: C64) -> Result<f64> {
    let cfg = L0Config::from_theta(pot.l(), theta)?;
    let d = delta_q(pot, theta, lam)?;
    Ok((d - l0::delta0(&cfg, lam) - q_theta(pot, theta, lam)?).norm())
}

/// `lambda_n(q, theta) - lambda_n(0, theta)` from `Delta_theta(0, lam + d) + Q_theta(lam + d) = 0`,
/// expanding the free part to second order about the free zero. The shift keeps
/// its relative accuracy long after the two zeros agree to working precision.
pub fn zero_shift(pot: &Potential, phi: f64, n: i64) -> Result<f64> {
    let cfg = L0Config::new(pot.l(), phi)?;
    let theta = cfg.theta();
    let lam0 = l0::l0_zero(&cfg, n)?;
    if pot.is_zero() {
        return Ok(0.0);
    }
    let rot = C64::from_polar(1.0, -phi);
    let real = |v: C64| (rot * v).re;
    let z = C64::new(lam0, 0.0);
    let d0 = real(l0::delta0(&cfg, z));
    let d1 = real(l0::delta0_derivative(&cfg, z));
    let h = 1e-4 / pot.l();
    let d2 = real(
        (l0::delta0_derivative(&cfg, C64::new(lam0 + h, 0.0)) - l0::delta0_derivative(&cfg, C64::new(lam0 - h, 0.0)))
            / (2.0 * h),
    );
    let mut d = 0.0;
    for _ in 0..8 {
        let q = real(q_theta(pot, theta, C64::new(lam0 + d, 0.0))?);
        let next = -(d0 + q + 0.5 * d2 * d * d) / d1;
        let done = (next - d).abs() <= 1e-13 * next.abs();
        d = next;
        if done {
            return Ok(d);
        }
    }
    Err(Error::RootSearch { index: n, reason: format!("shift iteration stalled at {d}") })
}

/// Majorant of `|Q_theta(lam)|`:
/// `2 d(lam l) / |lam|^4 (sigma + sigma^2 / (2 |lam|^2) exp(sigma / |lam|^2))`.
pub fn q_theta_bound(pot: &Potential, lam: C64) -> f64 {
    let s = pot.sigma_l();
    let a2 = lam.norm_sqr();
    2.0 * growth_bound(lam * pot.l()) / (a2 * a2) * (s + s * s / (2.0 * a2) * (s / a2).exp())
}

/// `s_2(0, l)` and `s_0(0, l)`.
pub fn values_at_zero(pot: &Potential, tol: &OdeTolerance) -> Result<(C64, C64)> {
    let (v, ls) = solve(pot, ZERO, false, [[ZERO, ZERO, ONE], [ONE, ZERO, ZERO]], &[pot.l()], tol)?;
    let f = ls[0].exp();
    Ok((v[0][0][0] * f, v[0][1][0] * f))
}

/// Admissibility: `a != 0`, `theta + theta0 != 0`, and for the auxiliary family
/// `a (theta + theta0) + i h b (theta - theta1) != 0`.
pub fn check_admissible(a: C64, b: C64, boundary: &Boundary) -> Result<()> {
    const EPS: f64 = 1e-10;
    if a.norm() < EPS {
        return Err(Error::Inadmissible(format!("a = s_2(0, l) = {a} vanishes")));
    }
    let theta = boundary.theta_value();
    let theta0 = a.conj() / a;
    if (theta + theta0).norm() < EPS {
        return Err(Error::Inadmissible(format!("theta = -theta0 = {}", -theta0)));
    }
    if let Some(h) = boundary.h {
        if b.norm() < EPS {
            return Err(Error::Inadmissible(format!("b = s_0(0, l) = {b} vanishes")));
        }
        let theta1 = b.conj() / b;
        let c = a * (theta + theta0) + I * h * b * (theta - theta1);
        if c.norm() < EPS * (1.0 + a.norm() + h.abs() * b.norm()) {
            return Err(Error::Inadmissible("a(theta + theta0) + i h b (theta - theta1) = 0".into()));
        }
    }
    Ok(())
}

/// Sign-carrying real form on the real axis: the characteristic function equals
/// `exp(i phi)` times a positive multiple of this.
fn real_char(pot: &Potential, b: &Boundary, lam: f64, tol: &OdeTolerance) -> Result<f64> {
    let e = C64::from_polar(1.0, b.phi);
    let lam = C64::new(lam, 0.0);
    if pot.is_zero() {
        let (v, _) = free_scaled(lam, pot.l());
        return Ok(free_form(e, b.h, v[0], v[2]));
    }
    match b.h {
        None => {
            let (v, _) = solve(pot, lam, false, [[ZERO, ZERO, ONE]], &[pot.l()], tol)?;
            Ok(free_form(e, None, ZERO, v[0][0][0]))
        }
        Some(_) => {
            let (v, _) = solve(pot, lam, false, [[ZERO, ZERO, ONE], [ONE, ZERO, ZERO]], &[pot.l()], tol)?;
            Ok(free_form(e, b.h, v[0][1][0], v[0][0][0]))
        }
    }
}

fn free_form(e: C64, h: Option<f64>, s0: C64, s2: C64) -> f64 {
    let base = -2.0 * (e * s2).re;
    match h {
        None => base,
        Some(h) => base + 2.0 * h * (e * s0).im,
    }
}

/// Real zeros of the free auxiliary function `Delta_{theta,h}(0, lam)`, labeled so
/// that `lambda_m ~ 2 (pi m + phi) / l` for large `|m|`.
pub fn free_h_zeros(l: f64, phi: f64, h: f64, n_lo: i64, n_hi: i64) -> Result<Vec<(i64, f64)>> {
    if n_hi < n_lo {
        return Err(Error::InvalidInput(format!("empty index window [{n_lo}, {n_hi}]")));
    }
    if !(h != 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!("h = {h} must be finite and nonzero")));
    }
    let e = C64::from_polar(1.0, phi);
    let f = |lam: f64| {
        let (v, _) = free_scaled(C64::new(lam, 0.0), l);
        free_form(e, Some(h), v[0], v[2])
    };
    let gap = 2.0 * PI / l;
    let mid = (20.0 + 40.0 / h.abs().sqrt()) / l;
    let reach = |n: i64| (2.0 * (PI * n as f64 + phi) / l).abs();
    let top = (reach(n_lo).max(reach(n_hi)) + 3.0 * gap).max(mid + 3.0 * gap);
    let mut grid = Vec::new();
    let mut x = -top;
    while x < top {
        grid.push(x);
        x += if x.abs() < mid { gap / 128.0 } else { gap / 16.0 };
    }
    grid.push(top);
    let vals: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let mut roots = Vec::new();
    for k in 0..grid.len() - 1 {
        if vals[k] == 0.0 {
            roots.push(grid[k]);
        } else if vals[k] * vals[k + 1] < 0.0 {
            roots.push(find_bracketed_root(f, grid[k], grid[k + 1], 1e-16)?);
        }
    }
    let label_of = |r: f64| (r * l / 2.0 - phi) / PI;
    let (first, last) = match (roots.first(), roots.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::RootSearch { index: n_lo, reason: "no free zeros found".into() }),
    };
    let m_top = label_of(last).round();
    let m_bot = label_of(first).round();
    if (label_of(last) - m_top).abs() > 0.2
        || (label_of(first) - m_bot).abs() > 0.2
        || (m_top - m_bot) as usize + 1 != roots.len()
    {
        return Err(Error::RootSearch {
            index: n_lo,
            reason: format!(
                "free zero count {} inconsistent with asymptotic labels [{m_bot}, {m_top}]",
                roots.len()
            ),
        });
    }
    let base = m_bot as i64;
    Ok(roots
        .into_iter()
        .enumerate()
        .map(|(k, r)| (base + k as i64, r))
        .filter(|(n, _)| (n_lo..=n_hi).contains(n))
        .collect())
}

/// Real spectrum of `L_q(theta)` or `L_q(theta, h)` over an index window.
#[derive(Clone, Debug)]
pub struct LqSpectrum {
    pub l: f64,
    pub potential: String,
    pub boundary: Boundary,
    /// `(n, lambda_n)` in ascending `n`.
    pub zeros: Vec<(i64, f64)>,
    /// `|F(lambda_n)| / (|F'| gap)` for the sign-carrying real form `F`.
    pub residuals: Vec<f64>,
    /// `s_2(0, l)`.
    pub a: C64,
    /// `s_0(0, l)`.
    pub b: C64,
    pub theta0: C64,
    pub theta1: C64,
}

impl LqSpectrum {
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

    /// Characteristic function at the origin: `-a(theta + theta0) - i h b (theta - theta1)`.
    pub fn value_at_origin(&self) -> C64 {
        let theta = self.boundary.theta_value();
        let mut v = -self.a * (theta + self.theta0);
        if let Some(h) = self.boundary.h {
            v -= I * h * self.b * (theta - self.theta1);
        }
        v
    }

    /// Truncated product `value_at_origin * prod_{|n| <= N} (1 - lam^3 / lambda_n^3)`.
    pub fn product(&self, lam: C64, n_max: usize) -> Result<ProductValue> {
        let p = truncated_product(&self.indexed(), lam, n_max, 2.0 * PI / self.l)?;
        Ok(ProductValue {
            value: self.value_at_origin() * p.value,
            tail_bound: p.tail_bound,
        })
    }
}

/// Free seeds for indices `n_lo - 1 ..= n_hi + 1`.
fn seeds(l: f64, b: &Boundary, n_lo: i64, n_hi: i64) -> Result<Vec<(i64, f64)>> {
    match b.h {
        None => {
            let cfg = L0Config::new(l, b.phi)?;
            if cfg.is_degenerate() {
                return Err(Error::DegenerateTheta("-1".into()));
            }
            ((n_lo - 1)..=(n_hi + 1))
                .into_par_iter()
                .map(|n| l0::l0_zero(&cfg, n).map(|z| (n, z)))
                .collect()
        }
        Some(h) => {
            let z = free_h_zeros(l, b.phi, h, n_lo - 1, n_hi + 1)?;
            if z.len() as i64 != n_hi - n_lo + 3 {
                return Err(Error::RootSearch {
                    index: n_lo,
                    reason: "free seeds missing".into(),
                });
            }
            Ok(z)
        }
    }
}

fn sign_changes(xs: &[f64], fs: &[f64]) -> Vec<(f64, f64, f64, f64)> {
    let mut out = Vec::new();
    for k in 0..xs.len() - 1 {
        if fs[k] == 0.0 {
            out.push((xs[k], xs[k], 0.0, 0.0));
        } else if fs[k] * fs[k + 1] < 0.0 {
            out.push((xs[k], xs[k + 1], fs[k], fs[k + 1]));
        }
    }
    out
}

fn locate(
    f: &(impl Fn(f64) -> Result<f64> + Sync),
    n: i64,
    prev: f64,
    seed: f64,
    next: f64,
    hint: f64,
    opts: &LqOptions,
) -> Result<(f64, f64)> {
    let (gl, gr) = (seed - prev, next - seed);
    let refine = |a: f64, b: f64, fa: f64, fb: f64| -> Result<(f64, f64)> {
        if a == b {
            return Ok((a, 0.0));
        }
        let err = std::cell::OnceCell::new();
        let r = find_bracketed_root(
            |x| match f(x) {
                Ok(v) => v,
                Err(e) => {
                    let _ = err.set(e);
                    0.0
                }
            },
            a,
            b,
            1e-15,
        );
        if let Some(e) = err.into_inner() {
            return Err(e);
        }
        let r = r.map_err(|e| Error::RootSearch { index: n, reason: e.to_string() })?;
        let scale = (fb - fa).abs() / (b - a) * 0.5 * (gl + gr);
        Ok((r, f(r)?.abs() / scale))
    };
    let fs = f(seed)?;
    let mut w = hint.clamp(1e-9, opts.window);
    while w < opts.window {
        let xs = [seed - w * gl, seed, seed + w * gr];
        let fv = [f(xs[0])?, fs, f(xs[2])?];
        let ch = sign_changes(&xs, &fv);
        match ch.len() {
            1 => return refine(ch[0].0, ch[0].1, ch[0].2, ch[0].3),
            0 => w *= 16.0,
            _ => break,
        }
    }
    let mut w = opts.window;
    for _ in 0..=opts.expansions {
        let xs = [seed - w * gl, seed, seed + w * gr];
        let fv = [f(xs[0])?, fs, f(xs[2])?];
        let ch = sign_changes(&xs, &fv);
        match ch.len() {
            1 => return refine(ch[0].0, ch[0].1, ch[0].2, ch[0].3),
            0 => w *= 2.0,
            _ => break,
        }
    }
    // exhaustive fallback between the neighbouring seeds
    let xs: Vec<f64> = (0..=128).map(|k| prev + (next - prev) * k as f64 / 128.0).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect::<Result<_>>()?;
    let cell = (0.5 * (prev + seed), 0.5 * (seed + next));
    let inside: Vec<_> = sign_changes(&xs, &fs)
        .into_iter()
        .filter(|c| c.1 > cell.0 && c.0 < cell.1)
        .collect();
    match inside.as_slice() {
        [c] => refine(c.0, c.1, c.2, c.3),
        [] => Err(Error::RootSearch {
            index: n,
            reason: format!("no sign change near seed {seed}"),
        }),
        _ => Err(Error::RootSearch {
            index: n,
            reason: format!("{} sign changes near seed {seed}", inside.len()),
        }),
    }
}

/// Zeros `lambda_n(q, theta[, h])` for `n_lo <= n <= n_hi`, seeded by the free
/// spectrum with the same labels.
pub fn lq_real_zeros(
    pot: &Potential,
    boundary: Boundary,
    n_lo: i64,
    n_hi: i64,
    opts: &LqOptions,
) -> Result<LqSpectrum> {
    if n_hi < n_lo {
        return Err(Error::InvalidInput(format!("empty index window [{n_lo}, {n_hi}]")));
    }
    let (a, b) = values_at_zero(pot, &opts.ode)?;
    check_admissible(a, b, &boundary)?;
    let l = pot.l();
    let top = (2.0 * (PI * (n_hi.abs().max(n_lo.abs()) + 2) as f64 + PI) / l) * l;
    if top > MAX_LAMBDA_L {
        return Err(Error::Unsupported(format!("index window reaches |lambda| l = {top}")));
    }
    let seed = seeds(l, &boundary, n_lo, n_hi)?;
    let f = |x: f64| real_char(pot, &boundary, x, &opts.ode);
    let sig = pot.sigma_l();
    let found: Vec<(i64, f64, f64)> = (1..seed.len() - 1)
        .into_par_iter()
        .map(|k| {
            let (n, s) = seed[k];
            // expected shift from the free zero, as a fraction of the local gap
            let gap = (seed[k + 1].1 - seed[k - 1].1) / 2.0;
            let hint = 4.0 * (sig + sig * sig) / (l * (s * s * l * l).max(1.0) * gap);
            locate(&f, n, seed[k - 1].1, s, seed[k + 1].1, hint, opts).map(|(r, res)| (n, r, res))
        })
        .collect::<Result<_>>()?;
    if found.windows(2).any(|w| !(w[1].1 > w[0].1)) {
        return Err(Error::RootSearch {
            index: n_lo,
            reason: "zeros not strictly increasing".into(),
        });
    }
    Ok(LqSpectrum {
        l,
        potential: pot.label().to_string(),
        boundary,
        zeros: found.iter().map(|&(n, r, _)| (n, r)).collect(),
        residuals: found.iter().map(|&(_, _, e)| e).collect(),
        a,
        b,
        theta0: a.conj() / a,
        theta1: if b.norm() > 0.0 { b.conj() / b } else { ONE },
    })
}

/// Normalized eigenfunction of `L_q(theta)` (or `L_q(theta, h)`) on a panel grid.
///
/// Phase convention: `psi'(0) > 0`.
#[derive(Clone, Debug)]
pub struct EigenQ {
    pub n: i64,
    pub lambda: f64,
    pub grid: PanelGrid,
    /// `psi` at the grid nodes.
    pub values: Vec<C64>,
    /// `(psi, psi', psi'')` at `0` and at `l`.
    pub ends: [[C64; 3]; 2],
    /// Smallest over largest singular value of the shooting system.
    pub singular_ratio: f64,
}

impl EigenQ {
    pub fn value(&self, x: f64) -> C64 {
        if x <= self.grid.a {
            return self.ends[0][0];
        }
        if x >= self.grid.b {
            return self.ends[1][0];
        }
        self.grid.interpolate(&self.values, x)
    }

    /// Largest defect of the boundary conditions relative to `|psi'(0)|`.
    pub fn boundary_residual(&self, boundary: &Boundary) -> f64 {
        let theta = boundary.theta_value();
        let [y0, yl] = self.ends;
        let first = match boundary.h {
            None => y0[0],
            Some(h) => y0[0] - I * h * y0[2],
        };
        let scale = y0[1].norm().max(1e-300);
        [first, yl[0], yl[1] - theta * y0[1]]
            .iter()
            .map(|v| v.norm() / scale)
            .fold(0.0, f64::max)
    }
}

fn eigen_grid(lam: f64, l: f64) -> Result<PanelGrid> {
    let panels = ((lam.abs() * l / 2.0).ceil() as usize).max(4);
    PanelGrid::new(0.0, l, panels, 16)
}

/// Eigenfunction for the zero of index `n` in `spec`.
pub fn eigenfunction_q(pot: &Potential, spec: &LqSpectrum, n: i64) -> Result<EigenQ> {
    let lam = spec
        .get(n)
        .ok_or_else(|| Error::InvalidInput(format!("index {n} not in the spectrum window")))?;
    eigenfunction_at(pot, &spec.boundary, n, lam)
}

pub fn eigenfunction_at(pot: &Potential, boundary: &Boundary, n: i64, lam: f64) -> Result<EigenQ> {
    let l = pot.l();
    let lc = C64::new(lam, 0.0);
    check_lambda(pot, lc)?;
    let theta = boundary.theta_value();
    let first = match boundary.h {
        None => [ONE, ZERO, ZERO],
        Some(h) => [ONE, ZERO, -I * h],
    };
    let bc = BoundaryRows {
        left: [first, [ZERO; 3], [ZERO, -theta, ZERO]],
        right: [[ZERO; 3], [ONE, ZERO, ZERO], [ZERO, ONE, ZERO]],
    };
    let grid = eigen_grid(lam, l)?;
    let mut eval = Vec::with_capacity(grid.len() + 2);
    eval.push(0.0);
    eval.extend_from_slice(&grid.nodes);
    eval.push(l);
    let kappa = lam.abs().max(1.0);
    let seg = (1.5 / kappa).min(l);
    let sol = null_solution(coefficient(pot, lc, false), 0.0, l, &bc, kappa, seg, &eval, &OdeTolerance::default())?;
    let m = grid.len();
    let raw: Vec<C64> = sol.values[1..=m].iter().map(|v| v[0]).collect();
    let norm = grid.norm(&raw);
    let d0 = sol.values[0][1];
    if !(norm > 0.0) || d0.norm() == 0.0 {
        return Err(Error::InvalidInput(format!("degenerate eigenfunction at lambda = {lam}")));
    }
    let c = (d0.conj() / d0.norm()) / norm;
    Ok(EigenQ {
        n,
        lambda: lam,
        values: raw.into_iter().map(|v| v * c).collect(),
        ends: [sol.values[0].map(|v| v * c), sol.values[m + 1].map(|v| v * c)],
        singular_ratio: sol.singular_ratio,
        grid,
    })
}

/// `u(lam, x) = s_2(lam, x) s_1(lam, l) - s_1(lam, x) s_2(lam, l)` at ascending points.
pub fn u_function(pot: &Potential, lam: f64, xs: &[f64]) -> Result<Vec<C64>> {
    let mut pts = xs.to_vec();
    pts.push(pot.l());
    let fs = fundamental_system_on(pot, C64::new(lam, 0.0), &pts, false, &OdeTolerance::default())?;
    let e = fs.last();
    let (s1l, s2l) = (fs.s(e, 1)[0], fs.s(e, 2)[0]);
    Ok((0..xs.len()).map(|i| fs.s(i, 2)[0] * s1l - fs.s(i, 1)[0] * s2l).collect())
}

/// `-(theta s_2 + s_2^*) s_2 / (i (lambda_n^3 - lam^3))` in the limit `lam -> lambda_n`,
/// Richardson-extrapolated from `lam = lambda_n (1 - delta)`, `delta = 1e-6, 5e-7`.
pub fn an_squared(pot: &Potential, theta: C64, lambda_n: f64) -> Result<C64> {
    let tol = OdeTolerance::default();
    let g = |delta: f64| -> Result<C64> {
        let lam = C64::new(lambda_n * (1.0 - delta), 0.0);
        let init = [[ZERO, ZERO, ONE]];
        let (p, lp) = solve(pot, lam, false, init, &[pot.l()], &tol)?;
        let (s, ls) = solve(pot, lam, true, init, &[pot.l()], &tol)?;
        let s2 = p[0][0][0] * lp[0].exp();
        let s2s = s[0][0][0] * ls[0].exp();
        Ok(-(theta * s2 + s2s) * s2 / (I * (lambda_n.powi(3) - lam.powu(3))))
    };
    let (g1, g2) = (g(1e-6)?, g(5e-7)?);
    Ok(g2 * 2.0 - g1)
}

/// `G(lam, x, t) = s_0(x) s_2^*(t) - s_1(x) s_1^*(t) + s_2(x) s_0^*(t)`.
pub fn green_kernel(pot: &Potential, lam: C64, x: f64, t: f64) -> Result<C64> {
    Ok(green_kernel_derivs(pot, lam, x, t)?[0])
}

/// `(G, dG/dx, d^2G/dx^2)` at `(x, t)`.
pub fn green_kernel_derivs(pot: &Potential, lam: C64, x: f64, t: f64) -> Result<[C64; 3]> {
    let tol = OdeTolerance::default();
    let fx = fundamental_system_on(pot, lam, &[x], false, &tol)?;
    let ft = fundamental_system_on(pot, lam, &[t], true, &tol)?;
    let st = |p| ft.s_star(0, p).expect("starred requested")[0];
    let (a, b, c) = (fx.s(0, 0), fx.s(0, 1), fx.s(0, 2));
    let (s2s, s1s, s0s) = (st(2), st(1), st(0));
    Ok([0, 1, 2].map(|r| a[r] * s2s - b[r] * s1s + c[r] * s0s))
}

/// Distance proxy below which the resolvent refuses, as in the free case.
pub const NEAR_SPECTRUM: f64 = l0::NEAR_SPECTRUM;

/// `(L_q(theta) - lam^3)^{-1} f` on the nodes of a grid spanning `[0, l]`.
pub fn resolvent_q(pot: &Potential, theta: C64, lam: C64, grid: &PanelGrid, f: &[C64]) -> Result<Vec<C64>> {
    resolvent_q_with(pot, theta, lam, grid, f, NEAR_SPECTRUM)
}

pub fn resolvent_q_with(
    pot: &Potential,
    theta: C64,
    lam: C64,
    grid: &PanelGrid,
    f: &[C64],
    threshold: f64,
) -> Result<Vec<C64>> {
    let l = pot.l();
    if f.len() != grid.len() {
        return Err(Error::InvalidInput("f must be sampled on the grid".into()));
    }
    if grid.a != 0.0 || (grid.b - l).abs() > 1e-14 * l {
        return Err(Error::InvalidInput("grid must span [0, l]".into()));
    }
    let mut pts = grid.nodes.clone();
    pts.push(l);
    let fs = fundamental_system_on(pot, lam, &pts, true, &OdeTolerance::default())?;
    let n = grid.len();
    let s = |i: usize, p: usize| fs.s(i, p)[0];
    let ss = |i: usize, p: usize| fs.s_star(i, p).expect("starred requested")[0];
    let (s2l, s2sl) = (s(n, 2), ss(n, 2));
    let delta = -(theta * s2l + s2sl);
    let dist = delta.norm() / (s2l.norm() + s2sl.norm());
    if dist < threshold {
        return Err(Error::NearSpectrum { distance: dist });
    }
    let g = |i: usize, j: usize| s(i, 0) * ss(j, 2) - s(i, 1) * ss(j, 1) + s(i, 2) * ss(j, 0);
    // separable pieces: int_0^x s_p^* f and int_0^l s_p^* f
    let prod = |p: usize| (0..n).map(|j| ss(j, p) * f[j]).collect::<Vec<_>>();
    let cum: Vec<Vec<C64>> = (0..3).map(|p| grid.cumulative(&prod(p))).collect();
    let tot: Vec<C64> = (0..3).map(|p| grid.integrate(&prod(p))).collect();
    let c_s2s = grid.integrate(&(0..n).map(|j| ss(j, 2) * f[j]).collect::<Vec<_>>());
    let c_gl = grid.integrate(&(0..n).map(|j| g(n, j) * f[j]).collect::<Vec<_>>());
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let inner = |c: &dyn Fn(usize) -> C64| s(i, 0) * c(2) - s(i, 1) * c(1) + s(i, 2) * c(0);
        let below = inner(&|p| cum[p][i]);
        let above = inner(&|p| tot[p] - cum[p][i]);
        let gxl = g(i, n);
        let body = gxl * c_s2s - theta * s(i, 2) * c_gl + theta * s2l * below - s2sl * above;
        out.push(I * body / delta);
    }
    Ok(out)
}

/// `<f, psi> psi` on the eigenfunction grid.
pub fn projection_q(psi: &EigenQ, f: &[C64]) -> Result<Vec<C64>> {
    if f.len() != psi.grid.len() {
        return Err(Error::InvalidInput("f must be sampled on the eigenfunction grid".into()));
    }
    let c = psi.grid.inner(f, &psi.values);
    Ok(psi.values.iter().map(|v| c * v).collect())
}

/// `lim (lambda_n^3 - lam^3) R(lam^3) f`, linear extrapolation from `lam = lambda_n (1 - delta)`.
pub fn resolvent_limit_q(
    pot: &Potential,
    theta: C64,
    lambda_n: f64,
    grid: &PanelGrid,
    f: &[C64],
) -> Result<Vec<C64>> {
    let eval = |delta: f64| -> Result<Vec<C64>> {
        let lam = C64::new(lambda_n * (1.0 - delta), 0.0);
        let r = resolvent_q_with(pot, theta, lam, grid, f, 0.0)?;
        let k = lambda_n.powi(3) - lam.powu(3);
        Ok(r.into_iter().map(|v| v * k).collect())
    };
    let (a, b) = (eval(1e-4)?, eval(5e-5)?);
    Ok(a.iter().zip(&b).map(|(x, y)| y * 2.0 - x).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine() -> Potential {
        Potential::cosine(1.0, 0.3, 1.0).unwrap()
    }

    fn rel(a: C64, b: C64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn free_reduction_of_fundamental_system() {
        let pot = Potential::zero(1.3).unwrap();
        for lam in [C64::new(1.3, 0.4), C64::new(-4.0, 0.0), C64::new(0.2, -2.5)] {
            let fs = fundamental_system(&pot, lam, true).unwrap();
            let want = gtrig::s_scaled_all(lam, 1.3);
            let star = gtrig::s_scaled_all(-lam, 1.3);
            for p in 0..3 {
                assert!(rel(fs.s(0, p)[0], want[p]) < 1e-10, "{lam} p={p}");
                let sp = fs.s_star(0, p).unwrap()[0];
                // s_p^*(lam, x) = conj(s_p(conj lam, x)) = s_p(-i lam x)/(-i lam)^p
                assert!(rel(sp, star[p]) < 1e-10);
            }
        }
    }

    #[test]
    fn wronskians_determinant_and_rotation() {
        let pot = cosine();
        let xs: Vec<f64> = (1..=5).map(|k| k as f64 * 0.2).collect();
        let tol = OdeTolerance::default();
        let fs = fundamental_system_on(&pot, C64::new(1.7, 0.0), &xs, true, &tol).unwrap();
        for i in 0..xs.len() {
            assert!(fs.wronskian_residual(i).unwrap() < 1e-9);
            assert!((fs.determinant(i) - 1.0).norm() < 1e-10);
        }
        let lam = C64::new(0.9, 1.4);
        let a = fundamental_system(&pot, lam, false).unwrap();
        let b = fundamental_system(&pot, lam * gtrig::ZETA2, false).unwrap();
        for p in 0..3 {
            assert!(rel(b.s(0, p)[0], a.s(0, p)[0]) < 1e-9);
        }
        let c = fundamental_system_on(&pot, lam, &xs, true, &tol).unwrap();
        assert!(c.wronskian_residual(4).unwrap() < 1e-9);
    }

    #[test]
    fn starred_is_conjugate_on_real_axis() {
        let pot = cosine();
        let fs = fundamental_system(&pot, C64::new(3.1, 0.0), true).unwrap();
        for p in 0..3 {
            let a = fs.s(0, p)[0].conj();
            assert!((fs.s_star(0, p).unwrap()[0] - a).norm() <= 1e-11 * a.norm().max(1.0));
        }
    }

    #[test]
    fn neumann_oracle_agrees_within_tail() {
        let zero = Potential::zero(1.0).unwrap();
        let est = neumann_oracle(&zero, C64::new(2.0, 0.5), 1.0, 3).unwrap();
        let want = gtrig::s_scaled_all(C64::new(2.0, 0.5), 1.0);
        for p in 0..3 {
            assert_eq!(est.values[p], want[p]);
            assert_eq!(est.tail_bound[p], 0.0);
        }
        // sigma(l) = 0.2
        let pot = Potential::cosine(1.0, 0.1 * PI, 1.0).unwrap();
        assert!((pot.sigma_l() - 0.2).abs() < 1e-12);
        for lam in [C64::new(2.0, 0.0), C64::new(0.0, 2.0), C64::new(-1.5, 1.5)] {
            let est = neumann_oracle(&pot, lam, 1.0, 3).unwrap();
            let fs = fundamental_system(&pot, lam, false).unwrap();
            for p in 0..3 {
                let err = (est.values[p] - fs.s(0, p)[0]).norm();
                assert!(err <= est.tail_bound[p] + 1e-11, "{lam} p={p}: {err} vs {}", est.tail_bound[p]);
            }
        }
    }

    #[test]
    fn kernel_limit_on_the_diagonal() {
        let pot = cosine();
        let lam = C64::new(2.0, 0.3);
        for x in [0.15, 0.35, 0.5, 0.7, 0.9] {
            let ratio = |eps: f64| transformation_kernel(&pot, lam, x, x - eps, 4).unwrap().value / (eps * eps);
            let lim = ratio(5e-4) * 2.0 - ratio(1e-3);
            let want = I * pot.q(x) / 2.0;
            assert!(rel(lim, want) < 1e-3, "x={x}: {lim} vs {want}");
        }
    }

    #[test]
    fn delta_q_symmetries_and_free_reduction() {
        let zero = Potential::zero(1.0).unwrap();
        let cfg = L0Config::new(1.0, 0.7).unwrap();
        let th = cfg.theta();
        for lam in [C64::new(1.1, 0.3), C64::new(4.0, 0.0), C64::new(-2.0, -1.0)] {
            assert!(rel(delta_q(&zero, th, lam).unwrap(), l0::delta0(&cfg, lam)) < 1e-10);
        }
        let pot = cosine();
        let lam = C64::new(1.3, 0.7);
        let d = delta_q(&pot, th, lam).unwrap();
        assert!(rel(delta_q(&pot, th, lam * gtrig::ZETA2).unwrap(), d) < 1e-10);
        let dc = delta_q(&pot, th, lam.conj()).unwrap();
        assert!(rel(th.conj() * dc, d.conj()) < 1e-10);
        // real axis: exp(-i phi) Delta is real
        for x in [-3.0, -0.4, 0.8, 5.0] {
            let v = delta_q(&pot, th, C64::new(x, 0.0)).unwrap() * C64::from_polar(1.0, -0.7);
            assert!(v.im.abs() <= 1e-11 * v.norm().max(1.0));
        }
    }

    #[test]
    fn decomposition_and_bound() {
        let th = C64::from_polar(1.0, 1.4);
        let zero = Potential::zero(1.0).unwrap();
        assert!(delta_q_decomposition_residual(&zero, th, C64::new(3.0, 0.0)).unwrap() < 1e-12);
        let pot = Potential::cosine(1.0, 0.15 * PI, 1.0).unwrap();
        assert!((pot.sigma_l() - 0.3).abs() < 1e-12);
        assert!(delta_q_decomposition_residual(&pot, th, C64::new(3.0, 0.0)).unwrap() < 1e-7);
        assert!(delta_q_decomposition_residual(&pot, th, C64::new(2.0, 1.0)).unwrap() < 1e-7);
        for lam in [C64::new(5.0, 0.0), C64::new(0.0, 5.0), C64::new(3.0, -4.0)] {
            assert!(q_theta(&pot, th, lam).unwrap().norm() <= q_theta_bound(&pot, lam));
        }
    }

    #[test]
    fn auxiliary_characteristic_function() {
        let pot = cosine();
        let th = C64::from_polar(1.0, 0.8);
        let lam = C64::new(1.7, -0.6);
        let d = delta_q(&pot, th, lam).unwrap();
        assert!(rel(delta_qh(&pot, th, 0.0, lam).unwrap(), d) < 1e-14);
        let fs = fundamental_system(&pot, lam, true).unwrap();
        let (s0, s0s) = (fs.s(0, 0)[0], fs.s_star(0, 0).unwrap()[0]);
        let h = 0.5;
        let diff = d - delta_qh(&pot, th, h, lam).unwrap();
        assert!((diff - I * h * (th * s0 - s0s)).norm() <= 1e-12 * diff.norm().max(1.0));
        for x in [-4.0, -1.0, 0.5, 2.0, 6.0] {
            let v = delta_qh(&pot, th, h, C64::new(x, 0.0)).unwrap() * C64::from_polar(1.0, -0.4);
            assert!(v.im.abs() <= 1e-11 * v.norm().max(1.0));
        }
    }

    #[test]
    fn free_spectrum_is_reproduced() {
        let zero = Potential::zero(1.0).unwrap();
        let spec = lq_real_zeros(&zero, Boundary::theta(0.7), -20, 20, &LqOptions::default()).unwrap();
        let free = l0::l0_real_zeros(&L0Config::new(1.0, 0.7).unwrap(), -20, 20).unwrap();
        for (a, b) in spec.zeros.iter().zip(&free.zeros) {
            assert_eq!(a.0, b.0);
            assert!((a.1 - b.1).abs() < 1e-9);
        }
        assert!((spec.a - 0.5).norm() < 1e-13 && (spec.theta0 - 1.0).norm() < 1e-13);
    }

    #[test]
    fn cosine_spectrum_and_product() {
        let pot = cosine();
        let b = Boundary::theta(0.7);
        let spec = lq_real_zeros(&pot, b, -60, 60, &LqOptions::default()).unwrap();
        assert!(spec.residuals.iter().all(|&r| r < 1e-9));
        let th = b.theta_value();
        for k in 0..=12 {
            let lam = C64::new(-3.0 + 0.5 * k as f64, 0.0);
            let d = delta_q(&pot, th, lam).unwrap();
            let p = spec.product(lam, 60).unwrap();
            assert!((p.value - d).norm() <= 2.0 * p.tail_bound * d.norm() + 1e-12, "lam={lam}");
        }
    }

    #[test]
    fn zero_shift_matches_direct_difference() {
        let pot = cosine();
        let spec = lq_real_zeros(&pot, Boundary::theta(0.7), 5, 7, &LqOptions::default()).unwrap();
        let cfg = L0Config::new(1.0, 0.7).unwrap();
        for n in 5..=7 {
            let direct = spec.get(n).unwrap() - l0::l0_zero(&cfg, n).unwrap();
            let d = zero_shift(&pot, 0.7, n).unwrap();
            assert!((d - direct).abs() < 1e-3 * direct.abs(), "n={n}: {d} vs {direct}");
        }
        assert_eq!(zero_shift(&Potential::zero(1.0).unwrap(), 0.7, 9).unwrap(), 0.0);
    }

    #[test]
    fn auxiliary_spectra() {
        let zero = Potential::zero(1.0).unwrap();
        let b = Boundary::theta_h(0.4, 0.5).unwrap();
        let free = free_h_zeros(1.0, 0.4, 0.5, -15, 15).unwrap();
        assert_eq!(free.len(), 31);
        let spec = lq_real_zeros(&zero, b, -15, 15, &LqOptions::default()).unwrap();
        for (a, f) in spec.zeros.iter().zip(&free) {
            assert_eq!(a.0, f.0);
            assert!((a.1 - f.1).abs() < 1e-12);
        }
        // labels follow 2 (pi m + phi) / l far out
        let last = free.last().unwrap();
        assert!((last.1 / 2.0 - 0.4 - PI * last.0 as f64).abs() < 0.05);
        let pot = cosine();
        let spec = lq_real_zeros(&pot, b, -15, 15, &LqOptions::default()).unwrap();
        let th = b.theta_value();
        for &(_, z) in &spec.zeros {
            let v = delta_qh(&pot, th, 0.5, C64::new(z, 0.0)).unwrap();
            let scale = delta_qh(&pot, th, 0.5, C64::new(z + 0.3, 0.0)).unwrap().norm();
            assert!(v.norm() < 1e-9 * scale);
        }
        let p = spec.product(C64::new(1.2, 0.0), 15).unwrap();
        let d = delta_qh(&pot, th, 0.5, C64::new(1.2, 0.0)).unwrap();
        assert!((p.value - d).norm() <= 2.0 * p.tail_bound * d.norm() + 1e-12);
    }

    #[test]
    fn admissibility_rejections() {
        let a = C64::new(0.5, 0.0);
        assert!(check_admissible(a, ONE, &Boundary::theta(0.5 * PI)).is_err());
        assert!(check_admissible(ZERO, ONE, &Boundary::theta(0.3)).is_err());
        assert!(check_admissible(a, ONE, &Boundary::theta(0.3)).is_ok());
        assert!(Boundary::theta_h(0.3, 0.0).is_err());
    }

    #[test]
    fn eigenfunctions_orthonormal_and_consistent() {
        let pot = cosine();
        let b = Boundary::theta(0.7);
        let spec = lq_real_zeros(&pot, b, -3, 3, &LqOptions::default()).unwrap();
        let grid = PanelGrid::new(0.0, 1.0, 8, 16).unwrap();
        let mut samples = Vec::new();
        for n in -3..=3 {
            let e = eigenfunction_q(&pot, &spec, n).unwrap();
            assert!(e.value(0.0).norm() < 1e-10);
            assert!(e.boundary_residual(&b) < 1e-8, "n={n}");
            assert!(e.ends[0][1].im.abs() < 1e-12 && e.ends[0][1].re > 0.0);
            samples.push(grid.sample(|x| e.value(x)));
            // shooting vs u(lambda, x) / a_n; u cancels like exp(sqrt3 |lam| l / 2)
            let lam = e.lambda;
            if lam.abs() > 15.0 {
                continue;
            }
            let u = u_function(&pot, lam, &e.grid.nodes).unwrap();
            let nu = e.grid.norm(&u);
            let a2 = an_squared(&pot, b.theta_value(), lam).unwrap();
            assert!((a2.re - nu * nu).abs() < 1e-4 * nu * nu, "n={n}: {a2} vs {}", nu * nu);
            let c = e.grid.inner(&e.values, &u) / (nu * nu);
            let worst = e.values.iter().zip(&u).map(|(v, w)| (v - c * w).norm()).fold(0.0, f64::max);
            assert!(worst < 1e-8, "n={n}: {worst}");
        }
        for i in 0..samples.len() {
            for j in 0..samples.len() {
                let g = grid.inner(&samples[i], &samples[j]);
                let want = if i == j { ONE } else { ZERO };
                assert!((g - want).norm() < 1e-6, "({i},{j}) {g}");
            }
        }
    }

    #[test]
    fn green_kernel_properties() {
        let zero = Potential::zero(1.0).unwrap();
        let lam = C64::new(1.2, 0.5);
        for (x, t) in [(0.7, 0.2), (0.3, 0.8)] {
            let g = green_kernel(&zero, lam, x, t).unwrap();
            assert!(rel(g, gtrig::s_scaled_all(lam, x - t)[2]) < 1e-9);
        }
        let pot = cosine();
        for t in [0.1, 0.33, 0.5, 0.71, 0.95] {
            let d = green_kernel_derivs(&pot, lam, t, t).unwrap();
            assert!(d[0].norm() < 1e-8 && d[1].norm() < 1e-8 && (d[2] - 1.0).norm() < 1e-8);
        }
        let a = green_kernel(&pot, lam, 0.3, 0.8).unwrap();
        let b = green_kernel(&pot, lam.conj(), 0.8, 0.3).unwrap();
        assert!(rel(a.conj(), b) < 1e-9);
    }

    #[test]
    fn resolvent_limit_is_projection() {
        let pot = cosine();
        let b = Boundary::theta(0.7);
        let th = b.theta_value();
        let spec = lq_real_zeros(&pot, b, -2, 2, &LqOptions::default()).unwrap();
        for n in [-1, 0, 1] {
            let e = eigenfunction_q(&pot, &spec, n).unwrap();
            let f = e.grid.sample(|x| C64::new(x * (1.0 - x) + 0.3 * x, 0.2 * (3.0 * x).sin()));
            let lim = resolvent_limit_q(&pot, th, e.lambda, &e.grid, &f).unwrap();
            let proj = projection_q(&e, &f).unwrap();
            let worst = lim.iter().zip(&proj).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(worst < 1e-5, "n={n}: {worst}");
        }
        let grid = PanelGrid::new(0.0, 1.0, 6, 16).unwrap();
        let f = grid.sample(|x| C64::new(1.0 + x, 0.0));
        assert!(matches!(
            resolvent_q(&pot, th, C64::new(spec.get(0).unwrap(), 0.0), &grid, &f),
            Err(Error::NearSpectrum { .. })
        ));
    }
}
