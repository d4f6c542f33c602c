//! Exponential-type solutions `e_k(lambda, x)`, the coefficients `B_k` and
//! `c_2 = B_2 / B_1`, `c_3 = B_3 / B_1`, the pole set of the jump data, the
//! canonical factor `chi` and a collocation discretization of the singular
//! system for `E_2(i tau, x)`, `E_3(i tau, x)`.
//!
//! Starred quantities are `f*(lambda) = conj(f(conj lambda))`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gtrig::{SQRT3, ZETA};
use crate::lq;
use crate::numerics::{gauss_legendre, quad_adaptive, CubicSpline, OdeTolerance};
use crate::potential::Potential;

const I: C64 = C64::new(0.0, 1.0);
const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const Z2: C64 = ZETA[1];
const Z3: C64 = ZETA[2];

fn zeta(k: usize) -> Result<C64> {
    match k {
        1..=3 => Ok(ZETA[k - 1]),
        _ => Err(Error::InvalidInput(format!("index k = {k} not in 1..=3"))),
    }
}

fn nonzero(lam: C64) -> Result<()> {
    if lam.norm() == 0.0 || !lam.re.is_finite() || !lam.im.is_finite() {
        return Err(Error::InvalidInput(format!("lambda = {lam} must be finite and nonzero")));
    }
    Ok(())
}

fn rel_gap(a: C64, b: C64) -> f64 {
    let s = a.norm().max(b.norm());
    if s == 0.0 {
        0.0
    } else {
        (a - b).norm() / s
    }
}

fn wronskian(f: &[C64; 3], g: &[C64; 3]) -> C64 {
    f[0] * g[1] - f[1] * g[0]
}

/// `(e_k, e_k', e_k'')`: the solution with data `(1, i lam zeta_k, (i lam zeta_k)^2)` at `x = 0`.
pub fn e_k(pot: &Potential, k: usize, lam: C64, x: f64) -> Result<[C64; 3]> {
    let (v, ls) = e_k_scaled(pot, k, lam, x)?;
    let f = ls.exp();
    Ok(v.map(|z| z * f))
}

fn e_k_scaled(pot: &Potential, k: usize, lam: C64, x: f64) -> Result<([C64; 3], f64)> {
    let w = I * lam * zeta(k)?;
    let (st, ls) = lq::solve(pot, lam, false, [[ONE, w, w * w]], &[x], &OdeTolerance::default())?;
    Ok((st[0][0], ls[0]))
}

/// `(e_k*, e_k*', e_k*'')`.
pub fn e_k_star(pot: &Potential, k: usize, lam: C64, x: f64) -> Result<[C64; 3]> {
    Ok(e_k(pot, k, lam.conj(), x)?.map(|z| z.conj()))
}

/// `E_k = e_k exp(-i lam zeta_k x)`.
pub fn e_normalized(pot: &Potential, k: usize, lam: C64, x: f64) -> Result<C64> {
    let (v, ls) = e_k_scaled(pot, k, lam, x)?;
    Ok(v[0] * (ls - I * lam * zeta(k)? * x).exp())
}

/// `(s_hat_1, s_hat_2)` triples at ascending `xs`, `s_hat_p = (i lam)^p s_p`.
fn s_hat_on(pot: &Potential, lam: C64, xs: &[f64], tol: &OdeTolerance) -> Result<Vec<[[C64; 3]; 2]>> {
    let il = I * lam;
    let init = [[ZERO, il, ZERO], [ZERO, ZERO, il * il]];
    let (st, ls) = lq::solve(pot, lam, false, init, xs, tol)?;
    Ok(st
        .iter()
        .zip(&ls)
        .map(|(s, &l)| {
            let f = l.exp();
            [s[0].map(|z| z * f), s[1].map(|z| z * f)]
        })
        .collect())
}

/// Defect of `e_k = s_0 + zeta_k s_hat_1 + zeta_k^2 s_hat_2`.
pub fn euler_residual(pot: &Potential, k: usize, lam: C64, x: f64) -> Result<f64> {
    let e = e_k(pot, k, lam, x)?;
    let (st, ls) = lq::solve(
        pot,
        lam,
        false,
        [[ONE, ZERO, ZERO], [ZERO, I * lam, ZERO], [ZERO, ZERO, (I * lam).powu(2)]],
        &[x],
        &OdeTolerance::default(),
    )?;
    let f = ls[0].exp();
    let z = zeta(k)?;
    let rhs = (st[0][0][0] + z * st[0][1][0] + z * z * st[0][2][0]) * f;
    Ok(rel_gap(e[0], rhs))
}

/// Pairs `(k, s)` of the Wronskian identities for `e_k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EPair {
    /// `W(e_1, e_2) = sqrt3 lam zeta_3 e_2*`.
    E12,
    /// `W(e_2, e_3) = sqrt3 lam e_1*`.
    E23,
    /// `W(e_3, e_1) = sqrt3 lam zeta_2 e_3*`.
    E31,
}

/// `W(e_k, e_s)(lam, x)`.
pub fn wronskian_e(pot: &Potential, lam: C64, x: f64, pair: EPair) -> Result<C64> {
    let (k, s) = match pair {
        EPair::E12 => (1, 2),
        EPair::E23 => (2, 3),
        EPair::E31 => (3, 1),
    };
    Ok(wronskian(&e_k(pot, k, lam, x)?, &e_k(pot, s, lam, x)?))
}

/// Relative defect of the Wronskian identity for `pair`.
pub fn wronskian_e_residual(pot: &Potential, lam: C64, x: f64, pair: EPair) -> Result<f64> {
    nonzero(lam)?;
    let lhs = wronskian_e(pot, lam, x, pair)?;
    let (factor, k) = match pair {
        EPair::E12 => (Z3, 2),
        EPair::E23 => (ONE, 1),
        EPair::E31 => (Z2, 3),
    };
    let rhs = SQRT3 * lam * factor * e_k_star(pot, k, lam, x)?[0];
    Ok(rel_gap(lhs, rhs))
}

type EndFn = Arc<dyn Fn(C64) -> Result<[C64; 2]> + Send + Sync>;

/// `lam -> (s_hat_1(lam, l), s_hat_2(lam, l))`, from a potential or from
/// reconstructed functions.
#[derive(Clone)]
pub struct EndData {
    l: f64,
    f: EndFn,
}

impl fmt::Debug for EndData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EndData").field("l", &self.l).finish()
    }
}

/// `B_1, B_2, B_3` and the ratios `c_2`, `c_3` at one `lambda`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coefficients {
    pub b: [C64; 3],
    pub c2: C64,
    pub c3: C64,
}

impl Coefficients {
    fn from_b(b: [C64; 3], lam: C64) -> Result<Self> {
        if b[0].norm() == 0.0 || !(b[0].re.is_finite() && b[0].im.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "B_1 vanishes at lambda = {lam}: pole of c_2, c_3"
            )));
        }
        Ok(Coefficients {
            b,
            c2: b[1] / b[0],
            c3: b[2] / b[0],
        })
    }

    fn conj(self) -> Self {
        Coefficients {
            b: self.b.map(|z| z.conj()),
            c2: self.c2.conj(),
            c3: self.c3.conj(),
        }
    }
}

impl EndData {
    pub fn from_potential(pot: &Potential, tol: OdeTolerance) -> Self {
        let pot = pot.clone();
        let l = pot.l();
        EndData {
            l,
            f: Arc::new(move |lam| {
                let v = s_hat_on(&pot, lam, &[l], &tol)?;
                Ok([v[0][0][0], v[0][1][0]])
            }),
        }
    }

    pub fn from_fn(l: f64, f: impl Fn(C64) -> Result<[C64; 2]> + Send + Sync + 'static) -> Result<Self> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidInput(format!("length l = {l} must be positive")));
        }
        Ok(EndData { l, f: Arc::new(f) })
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn s_hat(&self, lam: C64) -> Result<[C64; 2]> {
        (self.f)(lam)
    }

    /// `B_k = (zeta_k s_hat_1 - zeta_k^2 s_hat_2) / 3`.
    pub fn b(&self, lam: C64) -> Result<[C64; 3]> {
        let [s1, s2] = self.s_hat(lam)?;
        Ok([0, 1, 2].map(|k| (ZETA[k] * s1 - ZETA[k] * ZETA[k] * s2) / 3.0))
    }

    pub fn b1(&self, lam: C64) -> Result<C64> {
        let [s1, s2] = self.s_hat(lam)?;
        Ok((s1 - s2) / 3.0)
    }

    pub fn coefficients(&self, lam: C64) -> Result<Coefficients> {
        Coefficients::from_b(self.b(lam)?, lam)
    }

    pub fn coefficients_star(&self, lam: C64) -> Result<Coefficients> {
        Ok(self.coefficients(lam.conj())?.conj())
    }

    /// `d(i tau, x) = -zeta_2 exp(i sqrt3 tau x) c_2*(i tau zeta_3)`, the multiplier on `i l_{zeta_1}`.
    pub fn multiplier(&self, tau: f64, x: f64) -> Result<C64> {
        Ok(-Z2 * C64::from_polar(1.0, SQRT3 * tau * x) * self.c2_star_ray(tau)?)
    }

    /// `c_2*(i tau zeta_3)`, continuous at `tau = 0` where it equals `zeta_3`.
    fn c2_star_ray(&self, tau: f64) -> Result<C64> {
        if tau == 0.0 {
            return Ok(Z3);
        }
        Ok(self.coefficients_star(I * tau * Z3)?.c2)
    }
}

/// Defects of `c_2(lam) c_2(lam zeta_2) c_2(lam zeta_3) = 1` and `c_2(lam zeta_3) c_3(lam) = 1`.
pub fn c_identity_residuals(end: &EndData, lam: C64) -> Result<[f64; 2]> {
    let c = end.coefficients(lam)?;
    let c_2 = end.coefficients(lam * Z2)?;
    let c_3 = end.coefficients(lam * Z3)?;
    Ok([
        (c.c2 * c_2.c2 * c_3.c2 - ONE).norm(),
        (c_3.c2 * c.c3 - ONE).norm(),
    ])
}

/// Defect of `zeta_3 c_2 c_3* + zeta_2 c_3 c_2* + 1 = s_hat_2 s_hat_2* / (3 B_1 B_1*)`.
pub fn conservation_residual(end: &EndData, lam: C64) -> Result<f64> {
    let c = end.coefficients(lam)?;
    let cs = end.coefficients_star(lam)?;
    let s2 = end.s_hat(lam)?[1];
    let s2s = end.s_hat(lam.conj())?[1].conj();
    let lhs = Z3 * c.c2 * cs.c3 + Z2 * c.c3 * cs.c2 + ONE;
    let rhs = s2 * s2s / (3.0 * c.b[0] * cs.b[0]);
    Ok((lhs - rhs).norm() / lhs.norm().max(rhs.norm()).max(1.0))
}

/// Defect of `conj(B_1(lam)) = B_1(-conj lam)`.
pub fn b1_symmetry_residual(end: &EndData, lam: C64) -> Result<f64> {
    Ok(rel_gap(end.b1(lam)?.conj(), end.b1(-lam.conj())?))
}

/// Zeros of `B_1*` near the imaginary axis.
#[derive(Clone, Debug, Serialize)]
pub struct PoleSet {
    /// `mu_n = conj(z_n)` with `B_1(z_n) = 0`, `z_n` near `2 pi i n / (sqrt3 l)`: the part inside `Omega_1`.
    pub mu: Vec<C64>,
    /// `B_1*'(mu) / B_3*(mu)`.
    pub a: Vec<C64>,
    /// `B_1*'(mu) / B_2*(mu)`.
    pub b: Vec<C64>,
    /// `|Re mu_n|`, the distance from the imaginary axis.
    pub axis_defect: Vec<f64>,
}

impl PoleSet {
    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }
}

/// `mu_n(0) = -2 pi i n / (sqrt3 l)`.
pub fn free_pole(l: f64, n: usize) -> C64 {
    C64::new(0.0, -2.0 * PI * n as f64 / (SQRT3 * l))
}

fn newton_zero(f: impl Fn(C64) -> Result<C64>, start: C64, scale: f64, index: i64) -> Result<C64> {
    let mut z = start;
    let h = 1e-6 * scale;
    let mut prev = f64::INFINITY;
    for _ in 0..60 {
        let fz = f(z)?;
        if fz.norm() == 0.0 {
            return Ok(z);
        }
        let d = (f(z + h)? - f(z - h)?) / (2.0 * h);
        let step = fz / d;
        if !(step.re.is_finite() && step.im.is_finite()) {
            break;
        }
        z -= step;
        let size = step.norm();
        // stagnation at the noise floor of f counts as convergence
        if size <= 1e-14 * scale || (size <= 1e-8 * scale && size >= 0.5 * prev) {
            return Ok(z);
        }
        prev = size;
    }
    Err(Error::RootSearch {
        index,
        reason: format!("complex Newton from {start} did not converge"),
    })
}

/// Zero of `B_1` continuing the free zero `2 pi i n / (sqrt3 l)`.
fn b1_zero(end: &EndData, n: i64) -> Result<C64> {
    let gap = 2.0 * PI / (SQRT3 * end.l);
    let seed = C64::new(0.0, gap * n as f64);
    let z = newton_zero(|z| end.b1(z), seed, seed.norm(), n)?;
    if (z - seed).norm() > 0.3 * gap {
        return Err(Error::RootSearch {
            index: n,
            reason: format!("Newton left the seed cell (reached {z})"),
        });
    }
    Ok(z)
}

/// First `count` zeros of `B_1*` in `Omega_1`, with residue constants.
pub fn lambda_q_zeros(end: &EndData, count: usize) -> Result<PoleSet> {
    let rows: Vec<Result<(C64, C64, C64)>> = (1..=count as i64)
        .into_par_iter()
        .map(|n| {
            let z = b1_zero(end, n)?;
            let h = 1e-5 * z.norm();
            let db1 = (end.b1(z + h)? - end.b1(z - h)?) / (2.0 * h);
            let bs = end.b(z)?.map(|v| v.conj());
            let d = db1.conj();
            Ok((z.conj(), d / bs[2], d / bs[1]))
        })
        .collect();
    let mut set = PoleSet {
        mu: Vec::with_capacity(count),
        a: Vec::with_capacity(count),
        b: Vec::with_capacity(count),
        axis_defect: Vec::with_capacity(count),
    };
    for r in rows {
        let (mu, a, b) = r?;
        set.axis_defect.push(mu.re.abs());
        set.mu.push(mu);
        set.a.push(a);
        set.b.push(b);
    }
    Ok(set)
}

/// The three rotations `(i)`, `(ii)`, `(iii)` of a relation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rotation {
    First,
    Second,
    Third,
}

/// Relations between `e_k`, `e_k*`, the coefficients and `omega_{p,s}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JumpRelation {
    /// `c_2(lam zeta^m) e* = zeta_2 e* + ... omega` family.
    C2Wronskian(Rotation),
    /// `c_3(lam zeta^m) e* = zeta_3 e* - ... omega` family.
    C3Wronskian(Rotation),
    /// `E_2 - f_12 = zeta_3 exp(i lam (1 - zeta_2) x) c_3*(lam) E_1`.
    F12,
    /// `E_1 - f_23 = zeta_3 exp(i lam (zeta_3 - 1) x) c_3*(lam zeta_3) E_3`.
    F23,
    /// `E_3 - f_31 = zeta_3 exp(i lam (zeta_2 - zeta_3) x) c_3*(lam zeta_2) E_2`.
    F31,
    /// `E_3 - g_13 = zeta_2 exp(i lam (1 - zeta_3) x) c_2*(lam) E_1`.
    G13,
    /// `E_2 - g_21 = zeta_2 exp(i lam (zeta_3 - zeta_2) x) c_2*(lam zeta_3) E_3`.
    G21,
    /// `E_1 - g_32 = zeta_2 exp(i lam (zeta_2 - 1) x) c_2*(lam zeta_2) E_2`.
    G32,
}

impl JumpRelation {
    pub fn all() -> Vec<JumpRelation> {
        let mut v = Vec::new();
        for r in [Rotation::First, Rotation::Second, Rotation::Third] {
            v.push(JumpRelation::C2Wronskian(r));
            v.push(JumpRelation::C3Wronskian(r));
        }
        v.extend([
            JumpRelation::F12,
            JumpRelation::F23,
            JumpRelation::F31,
            JumpRelation::G13,
            JumpRelation::G21,
            JumpRelation::G32,
        ]);
        v
    }
}

/// ODE data at one `(lam, x)`: `e_k` triples, `B_k` and `w = s_hat_2(x) s_hat_1(l) - s_hat_1(x) s_hat_2(l)`.
struct Side {
    e: [[C64; 3]; 3],
    b: [C64; 3],
    w: [C64; 3],
}

impl Side {
    fn new(pot: &Potential, lam: C64, x: f64) -> Result<Self> {
        let mut e = [[ZERO; 3]; 3];
        for k in 1..=3 {
            e[k - 1] = e_k(pot, k, lam, x)?;
        }
        let tol = OdeTolerance::default();
        let (at_x, at_l) = if x >= pot.l() {
            let v = s_hat_on(pot, lam, &[pot.l()], &tol)?;
            (v[0], v[0])
        } else {
            let v = s_hat_on(pot, lam, &[x, pot.l()], &tol)?;
            (v[0], v[1])
        };
        let (s1l, s2l) = (at_l[0][0], at_l[1][0]);
        let b = [0, 1, 2].map(|k| (ZETA[k] * s1l - ZETA[k] * ZETA[k] * s2l) / 3.0);
        let w = [0, 1, 2].map(|r| at_x[1][r] * s1l - at_x[0][r] * s2l);
        Ok(Side { e, b, w })
    }

    /// `omega_{p,s} = W(w / B_p, e_s)`, one-based indices.
    fn omega(&self, p: usize, s: usize) -> C64 {
        wronskian(&self.w, &self.e[s - 1]) / self.b[p - 1]
    }

    /// `c_k(lam zeta_2^m)` for `k = 2, 3`.
    fn c(&self, k: usize, m: usize) -> C64 {
        self.b[(k - 1 + m) % 3] / self.b[m % 3]
    }
}

struct Local {
    lam: C64,
    x: f64,
    at: Side,
    conj: Side,
}

impl Local {
    fn new(pot: &Potential, lam: C64, x: f64) -> Result<Self> {
        nonzero(lam)?;
        Ok(Local {
            lam,
            x,
            at: Side::new(pot, lam, x)?,
            conj: Side::new(pot, lam.conj(), x)?,
        })
    }

    fn e_star(&self, k: usize) -> C64 {
        self.conj.e[k - 1][0].conj()
    }

    fn big_e(&self, k: usize) -> C64 {
        self.at.e[k - 1][0] * (-I * self.lam * ZETA[k - 1] * self.x).exp()
    }

    /// `c_k*(lam zeta_2^m)`.
    fn c_star(&self, k: usize, m: usize) -> C64 {
        self.conj.c(k, (3 - m % 3) % 3).conj()
    }

    fn omega_star(&self, p: usize, s: usize) -> C64 {
        self.conj.omega(p, s).conj()
    }

    fn expo(&self, a: C64) -> C64 {
        (I * self.lam * a * self.x).exp()
    }

    /// `(lhs, rhs)` of a relation.
    fn sides(&self, rel: JumpRelation) -> (C64, C64) {
        let lam = self.lam;
        let r3l = SQRT3 * lam;
        let m = |r: Rotation| match r {
            Rotation::First => 0,
            Rotation::Second => 1,
            Rotation::Third => 2,
        };
        match rel {
            JumpRelation::C2Wronskian(r) => {
                let (lhs_e, rhs_e, f, p, s) = match r {
                    Rotation::First => (1, 3, ONE, 1, 3),
                    Rotation::Second => (3, 2, Z3, 2, 1),
                    Rotation::Third => (2, 1, Z2, 3, 2),
                };
                (
                    self.at.c(2, m(r)) * self.e_star(lhs_e),
                    Z2 * self.e_star(rhs_e) + f / r3l * self.at.omega(p, s),
                )
            }
            JumpRelation::C3Wronskian(r) => {
                let (lhs_e, rhs_e, f, p, s) = match r {
                    Rotation::First => (1, 2, ONE, 1, 2),
                    Rotation::Second => (3, 1, Z3, 2, 3),
                    Rotation::Third => (2, 3, Z2, 3, 1),
                };
                (
                    self.at.c(3, m(r)) * self.e_star(lhs_e),
                    Z3 * self.e_star(rhs_e) - f / r3l * self.at.omega(p, s),
                )
            }
            JumpRelation::F12 => (
                Z3 * self.expo(ONE - Z2) * self.c_star(3, 0) * self.big_e(1),
                self.big_e(2) - Z3 / r3l * self.expo(-Z2) * self.omega_star(1, 2),
            ),
            JumpRelation::F23 => (
                Z3 * self.expo(Z3 - ONE) * self.c_star(3, 2) * self.big_e(3),
                self.big_e(1) - ONE / r3l * self.expo(-ONE) * self.omega_star(2, 3),
            ),
            JumpRelation::F31 => (
                Z3 * self.expo(Z2 - Z3) * self.c_star(3, 1) * self.big_e(2),
                self.big_e(3) - Z2 / r3l * self.expo(-Z3) * self.omega_star(3, 1),
            ),
            JumpRelation::G13 => (
                Z2 * self.expo(ONE - Z3) * self.c_star(2, 0) * self.big_e(1),
                self.big_e(3) + Z2 / r3l * self.expo(-Z3) * self.omega_star(1, 3),
            ),
            JumpRelation::G21 => (
                Z2 * self.expo(Z3 - Z2) * self.c_star(2, 2) * self.big_e(3),
                self.big_e(2) + Z3 / r3l * self.expo(-Z2) * self.omega_star(2, 1),
            ),
            JumpRelation::G32 => (
                Z2 * self.expo(Z2 - ONE) * self.c_star(2, 1) * self.big_e(2),
                self.big_e(1) + ONE / r3l * self.expo(-ONE) * self.omega_star(3, 2),
            ),
        }
    }
}

/// Relative defect of `rel` at `(lam, x)`, every quantity from the ODE.
pub fn jump_residual(pot: &Potential, rel: JumpRelation, lam: C64, x: f64) -> Result<f64> {
    let loc = Local::new(pot, lam, x)?;
    let (a, b) = loc.sides(rel);
    Ok(rel_gap(a, b))
}

/// Gap between the first `c_2` relation multiplied by `B_1` and the second
/// `c_3` relation multiplied by `-zeta_2 B_2`; the two products coincide term by term.
pub fn rearrangement_gap(pot: &Potential, lam: C64, x: f64) -> Result<f64> {
    let loc = Local::new(pot, lam, x)?;
    let b = loc.at.b;
    let (a1, a2) = loc.sides(JumpRelation::C2Wronskian(Rotation::First));
    let (b1, b2) = loc.sides(JumpRelation::C3Wronskian(Rotation::Second));
    let ra = b[0] * (a1 - a2);
    let rb = -Z2 * b[1] * (b1 - b2);
    let scale = (b[1] * loc.e_star(1)).norm().max((b[0] * loc.e_star(3)).norm());
    Ok((ra - rb).norm() / scale)
}

/// `chi(lam) = exp{(1/2 pi i) int_0^T g(tau) / (tau + i lam) dtau}` for a log
/// datum `g(tau) = g0(tau) + i sqrt3 x tau + 2 pi i k`, `g0` sampled and splined.
#[derive(Clone, Debug)]
pub struct ChiFactor {
    cutoff: f64,
    re: CubicSpline,
    im: CubicSpline,
}

impl ChiFactor {
    /// `g0` samples on ascending `taus` spanning `[0, T]`.
    pub fn new(taus: Vec<f64>, g0: &[C64]) -> Result<Self> {
        if taus.len() < 4 || taus[0] != 0.0 || taus.len() != g0.len() {
            return Err(Error::InvalidInput("log datum needs >= 4 samples starting at 0".into()));
        }
        let cutoff = taus[taus.len() - 1];
        Ok(ChiFactor {
            cutoff,
            re: CubicSpline::new(taus.clone(), g0.iter().map(|z| z.re).collect())?,
            im: CubicSpline::new(taus, g0.iter().map(|z| z.im).collect())?,
        })
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn g0(&self, tau: f64) -> C64 {
        C64::new(self.re.eval(tau), self.im.eval(tau))
    }

    /// Branch shift `k` making `Im g(T)` principal.
    pub fn branch(&self, x: f64) -> f64 {
        let top = self.g0(self.cutoff).im + SQRT3 * x * self.cutoff;
        -((top + PI) / (2.0 * PI)).floor()
    }

    /// `g(tau)` at `x`.
    pub fn log_datum(&self, tau: f64, x: f64) -> C64 {
        self.g0(tau) + I * (SQRT3 * x * tau + 2.0 * PI * self.branch(x))
    }

    /// `int_0^T g0(tau) / (tau - z) dtau`.
    fn cauchy_g0(&self, z: C64, lg: C64) -> Result<C64> {
        let t = self.cutoff;
        let tc = z.re.clamp(0.0, t);
        let gc = self.g0(tc);
        let f = |tau: f64| {
            let d = C64::new(tau, 0.0) - z;
            if d.norm() == 0.0 {
                ZERO
            } else {
                (self.g0(tau) - gc) / d
            }
        };
        let mut s = gc * lg;
        if tc > 0.0 {
            s += quad_adaptive(f, 0.0, tc, 1e-12)?;
        }
        if tc < t {
            s += quad_adaptive(f, tc, t, 1e-12)?;
        }
        Ok(s)
    }

    /// `ln chi(lam, x)`.
    pub fn log_chi(&self, lam: C64, x: f64) -> Result<C64> {
        let z = -I * lam;
        let t = self.cutoff;
        if z.im.abs() <= 1e-14 * (1.0 + z.re.abs()) && z.re >= 0.0 && z.re <= t {
            return Err(Error::InvalidInput(format!("lambda = {lam} lies on the cut i l_(zeta_1)")));
        }
        let lg = (C64::new(t, 0.0) - z).ln() - (-z).ln();
        let a = I * 2.0 * PI * self.branch(x);
        let b = I * SQRT3 * x;
        let total = self.cauchy_g0(z, lg)? + b * t + (a + b * z) * lg;
        Ok(total / (2.0 * PI * I))
    }

    pub fn chi(&self, lam: C64, x: f64) -> Result<C64> {
        Ok(self.log_chi(lam, x)?.exp())
    }
}

/// Discretization knobs of the singular system.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct JumpConfig {
    /// Collocation nodes `M` on `(0, T]` (a multiple of `order`).
    pub nodes: usize,
    /// Gauss-Legendre points per panel.
    pub order: usize,
    /// Poles `N` of `Lambda_q^1` kept.
    pub poles: usize,
    /// Overrides `T = max(40 / l, 4 |mu_N|)`.
    pub cutoff: Option<f64>,
    /// Samples of the log datum per unit `tau l`.
    pub density: f64,
}

impl Default for JumpConfig {
    fn default() -> Self {
        JumpConfig {
            nodes: 200,
            order: 8,
            poles: 12,
            cutoff: None,
            density: 8.0,
        }
    }
}

/// Graded composite Gauss-Legendre rule on `(0, T]`: four geometric panels
/// below `1 / l`, uniform panels above.
pub fn tau_rule(l: f64, cutoff: f64, nodes: usize, order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if order == 0 || nodes % order != 0 || nodes / order < 5 {
        return Err(Error::InvalidInput(format!(
            "{nodes} nodes do not split into >= 5 panels of {order}"
        )));
    }
    let knee = (1.0 / l).min(0.25 * cutoff);
    let mut edges = vec![0.0, knee / 8.0, knee / 4.0, knee / 2.0, knee];
    let rest = nodes / order - 4;
    for j in 1..=rest {
        edges.push(knee + (cutoff - knee) * j as f64 / rest as f64);
    }
    let (gx, gw) = gauss_legendre(order);
    let mut tau = Vec::with_capacity(nodes);
    let mut w = Vec::with_capacity(nodes);
    for e in edges.windows(2) {
        let (c, h) = (0.5 * (e[0] + e[1]), 0.5 * (e[1] - e[0]));
        for (x, wt) in gx.iter().zip(&gw) {
            tau.push(c + h * x);
            w.push(h * wt);
        }
    }
    Ok((tau, w))
}

struct JumpInner {
    end: EndData,
    cfg: JumpConfig,
    poles: PoleSet,
    chi: ChiFactor,
    tau: Vec<f64>,
    w: Vec<f64>,
    /// `c_3*(i zeta_2 tau_j)`.
    c3s: Vec<C64>,
    /// `c_2*(i zeta_3 tau_j)`.
    c2s: Vec<C64>,
}

/// Everything the per-`x` solves share: coefficients, poles, log datum, nodes.
#[derive(Clone)]
pub struct JumpData {
    inner: Arc<JumpInner>,
}

impl fmt::Debug for JumpData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JumpData")
            .field("l", &self.inner.end.l)
            .field("cutoff", &self.inner.chi.cutoff)
            .field("nodes", &self.inner.tau.len())
            .field("poles", &self.inner.poles.len())
            .finish()
    }
}

fn unwrap_log(samples: &[(f64, C64)]) -> Result<Vec<C64>> {
    let mut out = Vec::with_capacity(samples.len());
    let mut prev = samples[0].1;
    let mut acc = C64::new(prev.norm().ln(), PI);
    out.push(acc);
    for &(tau, d) in &samples[1..] {
        let step = (d / prev).arg();
        if step.abs() > 0.5 * PI {
            return Err(Error::InvalidInput(format!(
                "log branch jump of {step:.3} rad at tau = {tau}; increase the sampling density"
            )));
        }
        acc = C64::new(d.norm().ln(), acc.im + step);
        out.push(acc);
        prev = d;
    }
    Ok(out)
}

impl JumpData {
    pub fn new(end: EndData, cfg: JumpConfig) -> Result<Self> {
        let l = end.l;
        let poles = lambda_q_zeros(&end, cfg.poles).map_err(|e| e.at_stage("pole set"))?;
        let top = poles.mu.last().map_or(0.0, |m| m.norm());
        let cutoff = cfg.cutoff.unwrap_or((40.0 / l).max(4.0 * top));
        if !(cutoff > 0.0) {
            return Err(Error::InvalidInput(format!("cutoff {cutoff} must be positive")));
        }
        let k = ((cfg.density * cutoff * l).ceil() as usize).max(400);
        let coarse: Vec<f64> = (0..=k).map(|j| cutoff * j as f64 / k as f64).collect();
        let mut samples: Vec<(f64, C64)> = coarse
            .par_iter()
            .map(|&t| Ok((t, -Z2 * end.c2_star_ray(t)?)))
            .collect::<Result<_>>()
            .map_err(|e: Error| e.at_stage("log datum"))?;
        // refine where the phase moves fast
        for _ in 0..6 {
            let bad: Vec<usize> = (1..samples.len())
                .filter(|&i| (samples[i].1 / samples[i - 1].1).arg().abs() > 0.25 * PI)
                .collect();
            if bad.is_empty() {
                break;
            }
            let mids: Vec<(f64, C64)> = bad
                .par_iter()
                .map(|&i| {
                    let t = 0.5 * (samples[i - 1].0 + samples[i].0);
                    Ok((t, -Z2 * end.c2_star_ray(t)?))
                })
                .collect::<Result<_>>()?;
            samples.extend(mids);
            samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        let g0 = unwrap_log(&samples)?;
        let chi = ChiFactor::new(samples.iter().map(|s| s.0).collect(), &g0)?;
        let (tau, w) = tau_rule(l, cutoff, cfg.nodes, cfg.order)?;
        let c3s = tau
            .par_iter()
            .map(|&t| end.coefficients_star(I * Z2 * t).map(|c| c.c3))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.at_stage("kernel D3"))?;
        let c2s = tau
            .par_iter()
            .map(|&t| end.c2_star_ray(t))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.at_stage("kernel D2"))?;
        Ok(JumpData {
            inner: Arc::new(JumpInner {
                end,
                cfg,
                poles,
                chi,
                tau,
                w,
                c3s,
                c2s,
            }),
        })
    }

    pub fn end(&self) -> &EndData {
        &self.inner.end
    }

    pub fn poles(&self) -> &PoleSet {
        &self.inner.poles
    }

    pub fn config(&self) -> &JumpConfig {
        &self.inner.cfg
    }

    pub fn chi_factor(&self) -> &ChiFactor {
        &self.inner.chi
    }

    pub fn cutoff(&self) -> f64 {
        self.inner.chi.cutoff
    }

    pub fn tau(&self) -> &[f64] {
        &self.inner.tau
    }

    pub fn weights(&self) -> &[f64] {
        &self.inner.w
    }

    pub fn chi(&self, lam: C64, x: f64) -> Result<C64> {
        self.inner.chi.chi(lam, x)
    }

    /// `D_3(i zeta_2 tau_j, x) = c_3*(i zeta_2 tau) chi^{-1}(i zeta_3 tau) exp(-i sqrt3 tau x)`
    /// and `D_2(i zeta_3 tau_j, x) = c_2*(i zeta_3 tau) chi^{-1}(i zeta_2 tau) exp(i sqrt3 tau x)`,
    /// with `chi(i zeta_2 tau_j)`, `chi(i zeta_3 tau_j)`.
    fn kernels(&self, x: f64) -> Result<Kernels> {
        let s = &*self.inner;
        let rows: Vec<[C64; 4]> = s
            .tau
            .par_iter()
            .enumerate()
            .map(|(j, &t)| {
                let chi2 = s.chi.chi(I * Z2 * t, x)?;
                let chi3 = s.chi.chi(I * Z3 * t, x)?;
                let ph = C64::from_polar(1.0, SQRT3 * t * x);
                Ok([s.c3s[j] / chi3 / ph, s.c2s[j] / chi2 * ph, chi2, chi3])
            })
            .collect::<Result<_>>()?;
        Ok(Kernels {
            d3: rows.iter().map(|r| r[0]).collect(),
            d2: rows.iter().map(|r| r[1]).collect(),
            chi2: rows.iter().map(|r| r[2]).collect(),
            chi3: rows.iter().map(|r| r[3]).collect(),
        })
    }

    /// Collocation system in `(E_2(i tau_j), E_3(i tau_j), r_n, p_n)`.
    pub fn assemble(&self, x: f64) -> Result<SingularSystem> {
        let s = &*self.inner;
        if !(0.0..=s.end.l).contains(&x) {
            return Err(Error::InvalidInput(format!("x = {x} outside [0, {}]", s.end.l)));
        }
        let ker = self.kernels(x)?;
        let m = s.tau.len();
        let n = s.poles.len();
        let size = 2 * m + 2 * n;
        let (e2, e3, rr, pp) = (0, m, 2 * m, 2 * m + n);
        let mut a = DMatrix::<C64>::zeros(size, size);
        let mut rhs = DVector::<C64>::from_element(size, ONE);
        let tpi = 2.0 * PI * I;
        let t_top = s.chi.cutoff;
        let mu = &s.poles.mu;
        for i in 0..m {
            let t = s.tau[i];
            let li = ((t_top - t) / t).ln();
            let ra = e2 + i;
            let rb = e3 + i;
            a[(ra, e2 + i)] += ONE / ker.chi2[i];
            a[(rb, e3 + i)] += ONE / ker.chi3[i];
            for j in 0..m {
                let wj = s.w[j];
                a[(ra, e2 + j)] += Z3 / tpi * wj * ker.d3[j] / (s.tau[j] - Z3 * t);
                a[(rb, e3 + j)] -= Z2 / tpi * wj * ker.d2[j] / (s.tau[j] - Z2 * t);
                if j != i {
                    let k = wj / (s.tau[j] - t);
                    a[(ra, e3 + j)] -= Z2 / tpi * k * ker.d2[j];
                    a[(ra, e3 + i)] += Z2 / tpi * k * ker.d2[i];
                    a[(rb, e2 + j)] += Z3 / tpi * k * ker.d3[j];
                    a[(rb, e2 + i)] -= Z3 / tpi * k * ker.d3[i];
                }
            }
            a[(ra, e3 + i)] -= Z2 / tpi * ker.d2[i] * li + 0.5 * Z2 * ker.d2[i];
            a[(rb, e2 + i)] += Z3 / tpi * ker.d3[i] * li - 0.5 * Z3 * ker.d3[i];
            for q in 0..n {
                for (row, lam) in [(ra, I * Z2 * t), (rb, I * Z3 * t)] {
                    a[(row, rr + q)] -= ONE / (lam - Z2 * mu[q]);
                    a[(row, pp + q)] -= ONE / (lam - Z3 * mu[q]);
                }
            }
        }
        // residue rows
        let chi_mu: Vec<[C64; 3]> = mu
            .par_iter()
            .map(|&u| Ok([s.chi.chi(u, x)?, s.chi.chi(Z2 * u, x)?, s.chi.chi(Z3 * u, x)?]))
            .collect::<Result<_>>()?;
        for q in 0..n {
            let u = mu[q];
            for (row, lam, own, coeff) in [
                (
                    pp + q,
                    Z3 * u,
                    pp + q,
                    Z3 * (-SQRT3 * Z2 * u * x).exp() * chi_mu[q][2] / chi_mu[q][0] * s.poles.a[q],
                ),
                (
                    rr + q,
                    Z2 * u,
                    rr + q,
                    Z2 * (SQRT3 * Z3 * u * x).exp() * chi_mu[q][1] / chi_mu[q][0] * s.poles.b[q],
                ),
            ] {
                for k in 0..n {
                    if rr + k != own {
                        a[(row, rr + k)] += ONE / (lam - Z2 * mu[k]);
                    }
                    if pp + k != own {
                        a[(row, pp + k)] += ONE / (lam - Z3 * mu[k]);
                    }
                }
                a[(row, own)] += coeff;
                for j in 0..m {
                    a[(row, e2 + j)] -= Z3 / tpi * s.w[j] * ker.d3[j] / (s.tau[j] + I * Z2 * lam);
                    a[(row, e3 + j)] += Z2 / tpi * s.w[j] * ker.d2[j] / (s.tau[j] + I * Z3 * lam);
                }
                rhs[row] = -ONE;
            }
        }
        Ok(SingularSystem {
            x,
            matrix: a,
            rhs,
            nodes: m,
            poles: n,
            kernels: ker,
        })
    }

    /// `det [[chi^{-1}(i zeta_2 t), -zeta_2 D_2 / 2], [-zeta_3 D_3 / 2, chi^{-1}(i zeta_3 t)]]`
    /// times `chi(i zeta_2 t) chi(i zeta_3 t)` at each node.
    pub fn local_determinants(&self, x: f64) -> Result<Vec<C64>> {
        let k = self.kernels(x)?;
        Ok((0..k.d2.len())
            .map(|i| {
                let det = ONE / (k.chi2[i] * k.chi3[i]) - 0.25 * k.d2[i] * k.d3[i];
                det * k.chi2[i] * k.chi3[i]
            })
            .collect())
    }

    /// Assemble and solve at `x`.
    pub fn solve(&self, x: f64) -> Result<JumpSolution> {
        let sys = self.assemble(x)?;
        if sys.matrix.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Singular { cond: f64::INFINITY });
        }
        let (a, b) = sys.row_scaled();
        let cols: Vec<f64> = (0..a.ncols())
            .map(|j| {
                let m = a.column(j).iter().map(|z| z.norm()).fold(0.0, f64::max);
                if m > 0.0 {
                    1.0 / m
                } else {
                    1.0
                }
            })
            .collect();
        let mut scaled = a.clone();
        for (j, c) in cols.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*c);
        }
        let y = scaled.clone().lu().solve(&b).ok_or(Error::Singular { cond: f64::INFINITY })?;
        let sol: Vec<C64> = y.iter().zip(&cols).map(|(v, c)| v * *c).collect();
        let sv = scaled.singular_values();
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        let residual = sys.residual(&sol);
        let (m, n) = (sys.nodes, sys.poles);
        Ok(JumpSolution {
            data: self.clone(),
            x,
            e2: sol[..m].to_vec(),
            e3: sol[m..2 * m].to_vec(),
            r: sol[2 * m..2 * m + n].to_vec(),
            p: sol[2 * m + n..].to_vec(),
            cond,
            residual,
            d2: sys.kernels.d2,
            d3: sys.kernels.d3,
        })
    }

    /// Injects ODE-computed `E_2(i tau_j, x)`, `E_3(i tau_j, x)` and fits `r`, `p`
    /// by least squares; relative residual of the collocation system.
    pub fn forward_consistency(&self, pot: &Potential, x: f64) -> Result<ForwardCheck> {
        let sys = self.assemble(x)?;
        let (m, n) = (sys.nodes, sys.poles);
        let tau = &self.inner.tau;
        let pairs: Vec<(C64, C64)> = tau
            .par_iter()
            .map(|&t| Ok((e_normalized(pot, 2, I * t, x)?, e_normalized(pot, 3, I * t, x)?)))
            .collect::<Result<_>>()?;
        let mut known = DVector::<C64>::zeros(2 * m);
        for (j, (a, b)) in pairs.iter().enumerate() {
            known[j] = *a;
            known[m + j] = *b;
        }
        let size = 2 * m + 2 * n;
        let (a, b) = sys.row_scaled();
        let target = &b - a.columns(0, 2 * m) * &known;
        let residual = if n > 0 {
            let cols = a.columns(2 * m, 2 * n).into_owned();
            let svd = cols.clone().svd(true, true);
            let rp = svd
                .solve(&target, 1e-14)
                .map_err(|e| Error::InvalidInput(e.to_string()))?;
            (&target - cols * rp).norm()
        } else {
            target.norm()
        };
        let solved = self.solve(x)?;
        let mismatch = pairs
            .iter()
            .zip(solved.e2.iter().zip(&solved.e3))
            .map(|((a, b), (c, d))| (a - c).norm().max((b - d).norm()))
            .fold(0.0, f64::max);
        Ok(ForwardCheck {
            x,
            residual: residual / b.norm(),
            e_mismatch: mismatch,
            size,
        })
    }
}

struct Kernels {
    d3: Vec<C64>,
    d2: Vec<C64>,
    chi2: Vec<C64>,
    chi3: Vec<C64>,
}

/// Dense collocation system at one `x`.
pub struct SingularSystem {
    pub x: f64,
    pub matrix: DMatrix<C64>,
    pub rhs: DVector<C64>,
    pub nodes: usize,
    pub poles: usize,
    kernels: Kernels,
}

impl SingularSystem {
    pub fn size(&self) -> usize {
        self.rhs.len()
    }

    /// Rows divided by their largest entry.
    pub fn row_scaled(&self) -> (DMatrix<C64>, DVector<C64>) {
        let mut a = self.matrix.clone();
        let mut b = self.rhs.clone();
        for i in 0..a.nrows() {
            let m = a.row(i).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if m > 0.0 {
                a.row_mut(i).scale_mut(1.0 / m);
                b[i] /= m;
            }
        }
        (a, b)
    }

    /// `|A v - rhs| / |rhs|` after row scaling.
    pub fn residual(&self, v: &[C64]) -> f64 {
        let (a, b) = self.row_scaled();
        let v = DVector::from_column_slice(v);
        (a * v - &b).norm() / b.norm()
    }
}

/// Injected-data check of the collocation system.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ForwardCheck {
    pub x: f64,
    /// Relative row-scaled residual with ODE `E_2`, `E_3` and least-squares `r`, `p`.
    pub residual: f64,
    /// `max_j |E_solved - E_ode|` on the nodes.
    pub e_mismatch: f64,
    pub size: usize,
}

/// Solution of the collocation system at one `x`.
#[derive(Clone)]
pub struct JumpSolution {
    data: JumpData,
    pub x: f64,
    /// `E_2(i tau_j, x)`.
    pub e2: Vec<C64>,
    /// `E_3(i tau_j, x)`.
    pub e3: Vec<C64>,
    pub r: Vec<C64>,
    pub p: Vec<C64>,
    /// Two-norm condition number after row and column equilibration.
    pub cond: f64,
    /// Relative row-scaled residual of the solved system.
    pub residual: f64,
    d2: Vec<C64>,
    d3: Vec<C64>,
}

impl fmt::Debug for JumpSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JumpSolution")
            .field("x", &self.x)
            .field("cond", &self.cond)
            .field("residual", &self.residual)
            .finish()
    }
}

/// Whether `lam` lies in `Omega_1 = {sqrt3 Im lam < -|Re lam|}`.
pub fn in_omega1(lam: C64) -> bool {
    SQRT3 * lam.im + lam.re < 0.0 && SQRT3 * lam.im - lam.re < 0.0
}

impl JumpSolution {
    pub fn tau(&self) -> &[f64] {
        self.data.tau()
    }

    /// `b(lam) = sum r_n / (lam - zeta_2 mu_n) + p_n / (lam - zeta_3 mu_n)`.
    pub fn pole_part(&self, lam: C64) -> C64 {
        let mu = &self.data.inner.poles.mu;
        mu.iter()
            .zip(self.r.iter().zip(&self.p))
            .map(|(&u, (&r, &p))| r / (lam - Z2 * u) + p / (lam - Z3 * u))
            .sum()
    }

    /// `E_1(lam, x)` for `lam` in `Omega_1`.
    pub fn e1(&self, lam: C64) -> Result<C64> {
        if !in_omega1(lam) {
            return Err(Error::InvalidInput(format!("lambda = {lam} is not in Omega_1")));
        }
        let s = &*self.data.inner;
        let tpi = 2.0 * PI * I;
        let mut f = ONE + self.pole_part(lam);
        for j in 0..s.tau.len() {
            f -= Z3 / tpi * s.w[j] * self.d3[j] * self.e2[j] / (s.tau[j] + I * Z2 * lam);
            f += Z2 / tpi * s.w[j] * self.d2[j] * self.e3[j] / (s.tau[j] + I * Z3 * lam);
        }
        Ok(self.data.chi(lam, self.x)? * f)
    }

    /// `(tau, E_2, E_3)` rows for a CSV dump.
    pub fn samples(&self) -> Vec<(f64, C64, C64)> {
        self.tau()
            .iter()
            .zip(self.e2.iter().zip(&self.e3))
            .map(|(&t, (&a, &b))| (t, a, b))
            .collect()
    }
}

/// Fit of `3 i lam^2 (E_1 - 1) = sum_p c_p lam^{-p}` along `lam = -i R`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct IntegralFit {
    /// `Re c_0`, the estimate of `int_0^x q`.
    pub value: f64,
    /// `Im c_0`, zero for exact data.
    pub imag: f64,
    /// Largest defect of the fitted model at the sample radii.
    pub defect: f64,
}

/// Radii `R_j` geometric in `[30 / l, 200 / l]`.
pub fn extraction_radii(l: f64, count: usize) -> Vec<f64> {
    let (a, b) = (30.0 / l, 200.0 / l);
    if count < 2 {
        return vec![a];
    }
    (0..count)
        .map(|j| a * (b / a).powf(j as f64 / (count - 1) as f64))
        .collect()
}

/// Least-squares fit of `3 i lam^2 (E_1(lam) - 1)` by `terms` powers of `1 / lam`
/// over `lam = -i R_j`.
pub fn extract_integral(e1: impl Fn(C64) -> Result<C64>, radii: &[f64], terms: usize) -> Result<IntegralFit> {
    if terms == 0 || radii.len() < terms {
        return Err(Error::InvalidInput(format!(
            "{} radii cannot fit {terms} terms",
            radii.len()
        )));
    }
    let mut a = DMatrix::<C64>::zeros(radii.len(), terms);
    let mut y = DVector::<C64>::zeros(radii.len());
    for (j, &r) in radii.iter().enumerate() {
        let lam = C64::new(0.0, -r);
        y[j] = 3.0 * I * lam * lam * (e1(lam)? - ONE);
        for p in 0..terms {
            a[(j, p)] = lam.powi(-(p as i32));
        }
    }
    let svd = a.clone().svd(true, true);
    let c = svd.solve(&y, 1e-15).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let defect = (&a * &c - &y).iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(IntegralFit {
        value: c[0].re,
        imag: c[0].im,
        defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine() -> Potential {
        Potential::cosine(1.0, 0.3, 1.0).unwrap()
    }

    #[test]
    fn free_e_k_are_exponentials() {
        let p = Potential::zero(1.0).unwrap();
        let lam = C64::new(1.3, -0.7);
        for k in 1..=3 {
            let v = e_k(&p, k, lam, 0.6).unwrap()[0];
            let want = (I * lam * ZETA[k - 1] * 0.6).exp();
            assert!((v - want).norm() < 1e-10 * want.norm(), "k = {k}");
        }
        assert!(e_k(&p, 4, lam, 0.5).is_err());
    }

    #[test]
    fn euler_relation() {
        for k in 1..=3 {
            assert!(euler_residual(&cosine(), k, C64::new(2.0, 0.5), 0.7).unwrap() < 1e-9);
        }
    }

    #[test]
    fn wronskians_of_e() {
        let z = Potential::zero(1.0).unwrap();
        let q = cosine();
        for pair in [EPair::E12, EPair::E23, EPair::E31] {
            assert!(wronskian_e_residual(&z, C64::new(2.0, 0.0), 0.5, pair).unwrap() < 1e-10);
            assert!(wronskian_e_residual(&q, C64::new(1.0, 0.5), 0.5, pair).unwrap() < 1e-8);
        }
        let lam = C64::new(1.7, 0.2);
        let w = wronskian_e(&q, lam, 0.0, EPair::E12).unwrap();
        assert!((w - I * lam * (Z2 - ONE)).norm() < 1e-14);
    }

    #[test]
    fn coefficient_identities() {
        let end = EndData::from_potential(&cosine(), OdeTolerance::default());
        for lam in [C64::new(0.7, 0.0), C64::new(2.5, -1.0), C64::new(-3.0, 0.4)] {
            let [a, b] = c_identity_residuals(&end, lam).unwrap();
            assert!(a < 1e-11 && b < 1e-11, "{lam}: {a:e} {b:e}");
            let b = end.b(lam).unwrap();
            assert!((b[1] - end.b1(lam * Z2).unwrap()).norm() < 1e-12 * b[1].norm());
            assert!((b[2] - end.b1(lam * Z3).unwrap()).norm() < 1e-12 * b[2].norm());
        }
        for lam in [0.5, 1.7, 4.0, -2.2] {
            assert!(conservation_residual(&end, C64::new(lam, 0.0)).unwrap() < 1e-9);
        }
        let free = EndData::from_potential(&Potential::zero(1.0).unwrap(), OdeTolerance::default());
        assert!(b1_symmetry_residual(&free, C64::new(1.1, 2.3)).unwrap() < 1e-10);
    }

    #[test]
    fn reflection_symmetry_needs_zero_q() {
        let end = EndData::from_potential(&cosine(), OdeTolerance::default());
        let d = b1_symmetry_residual(&end, C64::new(0.0, 3.0)).unwrap();
        assert!(d > 1e-4, "{d:e}");
    }

    #[test]
    fn free_poles_and_axis() {
        let end = EndData::from_potential(&Potential::zero(1.0).unwrap(), OdeTolerance::default());
        let set = lambda_q_zeros(&end, 4).unwrap();
        for (n, mu) in set.mu.iter().enumerate() {
            assert!((mu - free_pole(1.0, n + 1)).norm() < 1e-10);
        }
        let q = EndData::from_potential(&cosine(), OdeTolerance::default());
        let set = lambda_q_zeros(&q, 4).unwrap();
        for (mu, d) in set.mu.iter().zip(&set.axis_defect) {
            assert!(mu.im < 0.0 && in_omega1(*mu));
            assert!(q.b1(mu.conj()).unwrap().norm() < 1e-9 * q.b1(mu.conj() + 0.5).unwrap().norm());
            // the zeros drift off the axis at order q
            assert!(*d > 1e-6 && *d < 0.1, "{d:e}");
        }
    }

    #[test]
    fn relations_hold_for_true_q() {
        let q = cosine();
        for rel in JumpRelation::all() {
            let r = jump_residual(&q, rel, C64::new(2.0, 1.0), 0.4).unwrap();
            assert!(r < 1e-7, "{rel:?}: {r:e}");
        }
        let z = Potential::zero(1.0).unwrap();
        let r = jump_residual(&z, JumpRelation::C3Wronskian(Rotation::First), C64::new(1.5, 0.0), 0.7).unwrap();
        assert!(r < 1e-10);
        assert!(rearrangement_gap(&q, C64::new(2.0, 1.0), 0.4).unwrap() < 1e-12);
    }

    #[test]
    fn chi_of_unit_datum_is_one() {
        let taus: Vec<f64> = (0..=50).map(|j| j as f64).collect();
        let g0 = vec![ZERO; taus.len()];
        let chi = ChiFactor::new(taus, &g0).unwrap();
        for lam in [C64::new(0.0, -3.0), C64::new(5.0, 1.0), C64::new(-2.0, 7.0)] {
            assert!((chi.chi(lam, 0.0).unwrap() - ONE).norm() < 1e-12);
        }
        assert!(chi.chi(C64::new(0.0, 4.0), 0.0).is_err());
    }

    #[test]
    fn chi_jump_and_holomorphy() {
        let end = EndData::from_potential(&cosine(), OdeTolerance::default());
        let cfg = JumpConfig {
            poles: 3,
            ..JumpConfig::default()
        };
        let data = JumpData::new(end.clone(), cfg).unwrap();
        let x = 0.4;
        for tau in [2.0, 7.5] {
            let eps = 1e-7;
            let left = data.chi(C64::new(-eps, tau), x).unwrap();
            let right = data.chi(C64::new(eps, tau), x).unwrap();
            let d = end.multiplier(tau, x).unwrap();
            assert!((left / right - d).norm() < 1e-4, "tau {tau}");
        }
        let lam = C64::new(1.0, -2.0);
        let h = 1e-4;
        let dx = (data.chi(lam + h, x).unwrap() - data.chi(lam - h, x).unwrap()) / (2.0 * h);
        let dy = (data.chi(lam + I * h, x).unwrap() - data.chi(lam - I * h, x).unwrap()) / (2.0 * h);
        assert!((dx + I * dy).norm() < 1e-6 * dx.norm().max(1.0));
    }

    #[test]
    fn system_shape_and_local_blocks() {
        let end = EndData::from_potential(&cosine(), OdeTolerance::default());
        let cfg = JumpConfig {
            nodes: 80,
            poles: 3,
            ..JumpConfig::default()
        };
        let data = JumpData::new(end, cfg).unwrap();
        let sys = data.assemble(0.5).unwrap();
        assert_eq!(sys.size(), 2 * 80 + 2 * 3);
        for d in data.local_determinants(0.5).unwrap() {
            assert!((d - 0.75).norm() < 1e-8, "{d}");
        }
        let sol = data.solve(0.5).unwrap();
        assert!(sol.residual < 1e-8);
        assert!(sol.e1(C64::new(0.0, -10.0)).unwrap().is_finite());
        assert!(sol.e1(C64::new(0.0, 10.0)).is_err());
    }

    #[test]
    fn integral_from_ode_e1() {
        let q = cosine();
        let x = 0.3;
        let fit = extract_integral(|lam| e_normalized(&q, 1, lam, x), &extraction_radii(1.0, 10), 4).unwrap();
        let want = q.integral(x).unwrap();
        assert!((fit.value - want).abs() < 2e-4, "{} vs {want}", fit.value);
        assert!(fit.imag.abs() < 1e-4);
    }
}
