//! Generalized trigonometric functions
//! `s_p(z) = (1/3) * sum_k zeta_k^{-p} exp(z * zeta_k)`, `p = 0, 1, 2`,
//! the three solutions of `y''' = y` with unit initial data.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::numerics::roots::find_bracketed_root;

pub const SQRT3: f64 = 1.732_050_807_568_877_2;
const HALF_SQRT3: f64 = 0.866_025_403_784_438_6;

pub const ZETA1: C64 = C64::new(1.0, 0.0);
pub const ZETA2: C64 = C64::new(-0.5, HALF_SQRT3);
pub const ZETA3: C64 = C64::new(-0.5, -HALF_SQRT3);
pub const ZETA: [C64; 3] = [ZETA1, ZETA2, ZETA3];

/// `|z|` below which the Taylor series is summed instead of the exponential average.
pub const SWITCH_RADIUS: f64 = 1.5;

/// Default angular tolerance for ray classification, in radians.
pub const RAY_TOL: f64 = 1e-12;

const I: C64 = C64::new(0.0, 1.0);

/// The cube roots of unity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CubeRoots {
    pub zeta1: C64,
    pub zeta2: C64,
    pub zeta3: C64,
}

impl CubeRoots {
    pub const fn new() -> Self {
        CubeRoots {
            zeta1: ZETA1,
            zeta2: ZETA2,
            zeta3: ZETA3,
        }
    }

    /// `zeta_k` for `k = 1, 2, 3`.
    pub fn get(&self, k: usize) -> C64 {
        match k {
            1 => self.zeta1,
            2 => self.zeta2,
            3 => self.zeta3,
            _ => panic!("cube root index {k} out of 1..=3"),
        }
    }
}

impl Default for CubeRoots {
    fn default() -> Self {
        Self::new()
    }
}

/// `zeta^n` for the primitive root `zeta2`, reduced mod 3.
pub fn zeta2_pow(n: i64) -> C64 {
    ZETA[n.rem_euclid(3) as usize]
}

/// `zeta_k^n`, `k` in `0..3` (zero based).
fn zpow(k: usize, n: i64) -> C64 {
    zeta2_pow(k as i64 * n)
}

fn check_p(p: usize) -> Result<()> {
    if p > 2 {
        return Err(Error::InvalidInput(format!("index p = {p} not in 0..=2")));
    }
    Ok(())
}

fn check_finite(z: C64) -> Result<()> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite argument {z}")));
    }
    Ok(())
}

/// Taylor sums of all three functions.
pub fn series_all(z: C64) -> [C64; 3] {
    let mut out = [C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
    let mut term = C64::new(1.0, 0.0);
    let mut quiet = 0;
    let mut n = 0usize;
    while n < 1000 {
        n += 1;
        term *= z / n as f64;
        let b = n % 3;
        out[b] += term;
        if n as f64 > z.norm() && term.norm() <= 1e-18 * out[b].norm() {
            quiet += 1;
            if quiet >= 3 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    out
}

/// Exponential averages of all three functions, scaled by `exp(-m)`,
/// `m = max_k Re(z zeta_k)`. Returns the scaled values and `m`.
pub fn exponential_all_scaled(z: C64) -> ([C64; 3], f64) {
    let a = [z * ZETA1, z * ZETA2, z * ZETA3];
    let m = a.iter().map(|w| w.re).fold(f64::NEG_INFINITY, f64::max);
    let e = [(a[0] - m).exp(), (a[1] - m).exp(), (a[2] - m).exp()];
    let mut out = [C64::new(0.0, 0.0); 3];
    for (p, o) in out.iter_mut().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for (k, ek) in e.iter().enumerate() {
            acc += zpow(k, -(p as i64)) * ek;
        }
        *o = acc / 3.0;
    }
    (out, m)
}

pub fn exponential_all(z: C64) -> [C64; 3] {
    let (v, m) = exponential_all_scaled(z);
    let f = m.exp();
    [v[0] * f, v[1] * f, v[2] * f]
}

/// `[s_0(z), s_1(z), s_2(z)]`.
pub fn s_all(z: C64) -> [C64; 3] {
    if z.norm() < SWITCH_RADIUS {
        series_all(z)
    } else {
        exponential_all(z)
    }
}

/// `s_p(z)` scaled by the dominant exponential, with the scale exponent.
pub fn s_all_scaled(z: C64) -> ([C64; 3], f64) {
    if z.norm() < SWITCH_RADIUS {
        (series_all(z), 0.0)
    } else {
        exponential_all_scaled(z)
    }
}

/// Unchecked `s_p(z)`; `p` is taken mod 3.
pub fn s(p: usize, z: C64) -> C64 {
    s_all(z)[p % 3]
}

pub fn s_eval(p: usize, z: C64) -> Result<C64> {
    check_p(p)?;
    check_finite(z)?;
    Ok(s(p, z))
}

/// `[s_p(i lam x) / (i lam)^p]_p`, exact at `lam = 0` where it is `x^p / p!`.
pub fn s_scaled_all(lam: C64, x: f64) -> [C64; 3] {
    let w = I * lam;
    if (w * x).norm() < SWITCH_RADIUS {
        let w3 = w * w * w;
        let mut out = [C64::new(1.0, 0.0), C64::new(x, 0.0), C64::new(0.5 * x * x, 0.0)];
        let mut term = C64::new(0.5 * x * x, 0.0);
        let mut quiet = 0;
        let mut m = 2usize;
        while m < 1000 {
            m += 1;
            term *= x / m as f64;
            if m % 3 == 0 {
                term *= w3;
            }
            let b = m % 3;
            out[b] += term;
            if term.norm() <= 1e-18 * out[b].norm() {
                quiet += 1;
                if quiet >= 3 {
                    break;
                }
            } else {
                quiet = 0;
            }
        }
        out
    } else {
        let v = s_all(w * x);
        [v[0], v[1] / w, v[2] / (w * w)]
    }
}

/// `s_p(i lam x) / (i lam)^p`.
pub fn s_eval_scaled(p: usize, lam: C64, x: f64) -> Result<C64> {
    check_p(p)?;
    check_finite(lam)?;
    if !x.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite x = {x}")));
    }
    Ok(s_scaled_all(lam, x)[p])
}

/// `x`-derivatives of the triple returned by [`s_scaled_all`].
pub fn s_scaled_derivs(lam: C64, v: &[C64; 3]) -> [C64; 3] {
    let w = I * lam;
    [w * w * w * v[2], v[0], v[1]]
}

/// Catalogued identities.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Identity {
    /// `s_p' = s_{p-1}` (derivative checked by a contour rule).
    Derivative(u8),
    Conjugation(u8),
    PEvenness(u8),
    /// `exp(z zeta_k) = s_0 + zeta_k s_1 + zeta_k^2 s_2`, `k = 1..3`.
    Euler(u8),
    InitialData,
    Main,
    Addition(u8),
    /// `3 s_p(z) s_q(w) = sum_j zeta_j^{-q} s_{p+q}(z + zeta_j w)`.
    Product(u8, u8),
    Doubling(u8),
    Square(u8),
    /// Series and exponential evaluation agree.
    Taylor(u8),
    /// `s_2(z)s_1(w) - s_1(z)s_2(w) = (s_0(z + zeta_2 w) - s_0(z + zeta_3 w)) / (i sqrt 3)`.
    CrossDifference,
}

impl Identity {
    /// Every catalogued identity.
    pub fn all() -> Vec<Identity> {
        let mut v = Vec::new();
        for p in 0..3u8 {
            v.push(Identity::Derivative(p));
        }
        for p in 0..3u8 {
            v.push(Identity::Conjugation(p));
            v.push(Identity::PEvenness(p));
        }
        for k in 1..=3u8 {
            v.push(Identity::Euler(k));
        }
        v.push(Identity::InitialData);
        v.push(Identity::Main);
        for p in 0..3u8 {
            v.push(Identity::Addition(p));
        }
        for p in 0..3u8 {
            for q in 0..3u8 {
                v.push(Identity::Product(p, q));
            }
        }
        for p in 0..3u8 {
            v.push(Identity::Doubling(p));
            v.push(Identity::Square(p));
            v.push(Identity::Taylor(p));
        }
        v.push(Identity::CrossDifference);
        v
    }

    /// Whether the identity involves the second argument `w`.
    pub fn binary(&self) -> bool {
        matches!(
            self,
            Identity::Addition(_) | Identity::Product(..) | Identity::CrossDifference
        )
    }
}

impl fmt::Display for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Identity::Derivative(p) => write!(f, "derivative-s{p}"),
            Identity::Conjugation(p) => write!(f, "conjugation-s{p}"),
            Identity::PEvenness(p) => write!(f, "p-evenness-s{p}"),
            Identity::Euler(k) => write!(f, "euler-{k}"),
            Identity::InitialData => write!(f, "initial-data"),
            Identity::Main => write!(f, "main-identity"),
            Identity::Addition(p) => write!(f, "addition-s{p}"),
            Identity::Product(p, q) => write!(f, "product-{p}{q}"),
            Identity::Doubling(p) => write!(f, "doubling-s{p}"),
            Identity::Square(p) => write!(f, "square-s{p}"),
            Identity::Taylor(p) => write!(f, "taylor-s{p}"),
            Identity::CrossDifference => write!(f, "cross-difference"),
        }
    }
}

impl FromStr for Identity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Identity::all()
            .into_iter()
            .find(|id| id.to_string() == s)
            .ok_or_else(|| Error::UnknownIdentity(s.to_string()))
    }
}

/// Both sides of an identity and the magnitude of its largest constituent term.
#[derive(Clone, Copy, Debug)]
pub struct IdentityEval {
    pub lhs: C64,
    pub rhs: C64,
    pub term_scale: f64,
}

impl IdentityEval {
    pub fn residual(&self) -> f64 {
        (self.lhs - self.rhs).norm()
    }
}

/// Derivative of an entire function by the trapezoidal rule on a circle.
fn contour_derivative(f: impl Fn(C64) -> C64, z: C64) -> C64 {
    const N: usize = 32;
    let r = 0.75;
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..N {
        let w = C64::from_polar(r, 2.0 * PI * j as f64 / N as f64);
        acc += f(z + w) / w;
    }
    acc / N as f64
}

fn ev(lhs: C64, rhs: C64, terms: &[C64]) -> IdentityEval {
    IdentityEval {
        lhs,
        rhs,
        term_scale: terms.iter().map(|t| t.norm()).fold(0.0, f64::max),
    }
}

pub fn identity_eval(id: Identity, z: C64, w: C64) -> Result<IdentityEval> {
    check_finite(z)?;
    check_finite(w)?;
    let sz = s_all(z);
    let out = match id {
        Identity::Derivative(p) => {
            let p = p as usize;
            let d = contour_derivative(|u| s(p, u), z);
            let rhs = sz[(p + 2) % 3];
            ev(d, rhs, &[d, rhs])
        }
        Identity::Conjugation(p) => {
            let p = p as usize;
            let lhs = sz[p].conj();
            let rhs = s(p, z.conj());
            ev(lhs, rhs, &[lhs, rhs])
        }
        Identity::PEvenness(p) => {
            let lhs = s(p as usize, z * ZETA2);
            let rhs = zeta2_pow(p as i64) * sz[p as usize];
            ev(lhs, rhs, &[lhs, rhs])
        }
        Identity::Euler(k) => {
            let zk = ZETA[(k as usize + 2) % 3];
            let lhs = (z * zk).exp();
            let t = [sz[0], zk * sz[1], zk * zk * sz[2]];
            ev(lhs, t[0] + t[1] + t[2], &[lhs, t[0], t[1], t[2]])
        }
        Identity::InitialData => {
            let z0 = s_all(C64::new(0.0, 0.0));
            let mut worst = 0.0f64;
            for p in 0..3 {
                for j in 0..3 {
                    let val = z0[(p + 3 - j) % 3];
                    let want = if p == j { 1.0 } else { 0.0 };
                    worst = worst.max((val - want).norm());
                }
            }
            ev(C64::new(worst, 0.0), C64::new(0.0, 0.0), &[C64::new(1.0, 0.0)])
        }
        Identity::Main => {
            let t = [
                sz[0] * sz[0] * sz[0],
                sz[1] * sz[1] * sz[1],
                sz[2] * sz[2] * sz[2],
                -3.0 * sz[0] * sz[1] * sz[2],
            ];
            // a^3 + b^3 + c^3 - 3abc = (a + b + c)(a + zeta_2 b + zeta_3 c)(a + zeta_3 b + zeta_2 c)
            let lhs = (sz[0] + sz[1] + sz[2])
                * (sz[0] + ZETA2 * sz[1] + ZETA3 * sz[2])
                * (sz[0] + ZETA3 * sz[1] + ZETA2 * sz[2]);
            ev(lhs, C64::new(1.0, 0.0), &t)
        }
        Identity::Addition(r) => {
            let r = r as usize;
            let sw = s_all(w);
            let lhs = s(r, z + w);
            let t: Vec<C64> = (0..3).map(|p| sz[p] * sw[(r + 3 - p) % 3]).collect();
            let mut all = t.clone();
            all.push(lhs);
            ev(lhs, t.iter().sum(), &all)
        }
        Identity::Product(p, q) => {
            let (p, q) = (p as usize, q as usize);
            let sw = s_all(w);
            let lhs = 3.0 * sz[p] * sw[q];
            let t: Vec<C64> = (0..3)
                .map(|j| zpow(j, -(q as i64)) * s((p + q) % 3, z + ZETA[j] * w))
                .collect();
            let mut all = t.clone();
            all.push(lhs);
            ev(lhs, t.iter().sum(), &all)
        }
        Identity::Doubling(p) => {
            let p = p as usize;
            let lhs = 3.0 * sz[p] * sz[p];
            let t = [s(2 * p % 3, 2.0 * z), 2.0 * s(2 * p % 3, -z)];
            ev(lhs, t[0] + t[1], &[lhs, t[0], t[1]])
        }
        Identity::Square(p) => {
            let p = p as usize;
            let (a, b) = ((p + 1) % 3, (p + 2) % 3);
            let t = [sz[p] * sz[p], -sz[a] * sz[b]];
            let rhs = s((3 - p) % 3, -z);
            ev(t[0] + t[1], rhs, &[t[0], t[1], rhs])
        }
        Identity::Taylor(p) => {
            let p = p as usize;
            let lhs = series_all(z)[p];
            let rhs = exponential_all(z)[p];
            ev(lhs, rhs, &[lhs, rhs])
        }
        Identity::CrossDifference => {
            let sw = s_all(w);
            let t = [sz[2] * sw[1], -sz[1] * sw[2]];
            let u = [s(0, z + ZETA2 * w), s(0, z + ZETA3 * w)];
            let k = C64::new(0.0, SQRT3);
            let rhs = (u[0] - u[1]) / k;
            ev(t[0] + t[1], rhs, &[t[0], t[1], u[0] / k, u[1] / k])
        }
    };
    Ok(out)
}

/// Absolute residual `|LHS - RHS|` of an identity.
pub fn identity_residual(name: &str, z: C64, w: C64) -> Result<f64> {
    let id: Identity = name.parse()?;
    Ok(identity_eval(id, z, w)?.residual())
}

/// Equation whose nonnegative roots are the moduli of the zeros of `s_p`,
/// i.e. `s_p(-x) * exp(-x/2) * 3/2` rewritten in cosine form.
fn zero_equation(p: usize, x: f64) -> f64 {
    let e = 0.5 * (-1.5 * x).exp();
    let t = HALF_SQRT3 * x;
    match p {
        0 => t.cos() + e,
        1 => (t - PI / 3.0).cos() - e,
        _ => (t + PI / 3.0).cos() - e,
    }
}

/// `x_p(k)`: the `k`-th nonnegative root (in ascending order). The zeros of
/// `s_p` are `-x_p(k) * zeta2^m`, `m = 0, 1, 2`.
pub fn s_zero(p: usize, k: usize) -> Result<f64> {
    check_p(p)?;
    if k == 0 {
        return Err(Error::InvalidInput("zero index k starts at 1".into()));
    }
    if p > 0 && k == 1 {
        return Ok(0.0);
    }
    // phase window [lo, lo + pi] of the cosine argument holding exactly one root
    let (lo, shift) = match p {
        0 => ((k - 1) as f64 * PI, 0.0),
        1 => ((k - 2) as f64 * PI, -PI / 3.0),
        _ => ((k - 1) as f64 * PI, PI / 3.0),
    };
    let a = (lo - shift) / HALF_SQRT3;
    let b = (lo + PI - shift) / HALF_SQRT3;
    find_bracketed_root(|x| zero_equation(p, x), a.max(0.0), b, 1e-15)
}

/// `s_p(-x) * exp(-x/2)`, the value at a candidate zero scaled by the dominant exponential.
pub fn scaled_value_at_negative(p: usize, x: f64) -> C64 {
    let (v, m) = s_all_scaled(C64::new(-x, 0.0));
    v[p % 3] * (m - 0.5 * x).exp()
}

/// Sector classification of the spectral parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SectorId {
    Omega1,
    Omega2,
    Omega3,
    OmegaMinus1,
    OmegaMinus2,
    OmegaMinus3,
    /// Rays `i l_{zeta_k}` are `1..=3`, rays `-i l_{zeta_k}` are `4..=6`.
    RayBoundary(u8),
}

impl SectorId {
    /// Sector index `k` for `Omega_k` and `-Omega_k`.
    pub fn index(&self) -> Option<usize> {
        match self {
            SectorId::Omega1 | SectorId::OmegaMinus1 => Some(1),
            SectorId::Omega2 | SectorId::OmegaMinus2 => Some(2),
            SectorId::Omega3 | SectorId::OmegaMinus3 => Some(3),
            SectorId::RayBoundary(_) => None,
        }
    }
}

/// Family of sectors: `Omega_k` or their reflections `-Omega_k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SectorFamily {
    Plus,
    Minus,
}

fn wrap_angle(a: f64) -> f64 {
    let t = a.rem_euclid(2.0 * PI);
    if t >= 2.0 * PI {
        0.0
    } else {
        t
    }
}

/// Classify `lam` among the sectors where `exp(i lam zeta_k x)` dominates.
///
/// `Omega_1 = (7pi/6, 11pi/6)`, `Omega_2 = (pi/2, 7pi/6)`, `Omega_3 = (-pi/6, pi/2)`,
/// bounded by the rays `i l_{zeta_k}`; within `tol` radians of a ray the ray is returned.
pub fn sector_of_with(lam: C64, tol: f64, family: SectorFamily) -> Result<SectorId> {
    check_finite(lam)?;
    if lam.norm() == 0.0 {
        return Err(Error::InvalidInput("sector of lambda = 0 is undefined".into()));
    }
    let (arg, off) = match family {
        SectorFamily::Plus => (wrap_angle(lam.arg()), 0u8),
        SectorFamily::Minus => (wrap_angle(lam.arg() + PI), 3u8),
    };
    let rays = [(PI / 2.0, 1u8), (7.0 * PI / 6.0, 2u8), (11.0 * PI / 6.0, 3u8)];
    for (angle, k) in rays {
        let d = (arg - angle).abs();
        if d.min(2.0 * PI - d) <= tol {
            return Ok(SectorId::RayBoundary(k + off));
        }
    }
    let k = if arg > 7.0 * PI / 6.0 && arg < 11.0 * PI / 6.0 {
        1
    } else if arg > PI / 2.0 && arg < 7.0 * PI / 6.0 {
        2
    } else {
        3
    };
    Ok(match (family, k) {
        (SectorFamily::Plus, 1) => SectorId::Omega1,
        (SectorFamily::Plus, 2) => SectorId::Omega2,
        (SectorFamily::Plus, _) => SectorId::Omega3,
        (SectorFamily::Minus, 1) => SectorId::OmegaMinus1,
        (SectorFamily::Minus, 2) => SectorId::OmegaMinus2,
        (SectorFamily::Minus, _) => SectorId::OmegaMinus3,
    })
}

pub fn sector_of(lam: C64) -> Result<SectorId> {
    sector_of_with(lam, RAY_TOL, SectorFamily::Plus)
}

/// `3 zeta_k^p s_p(i lam x) exp(-i lam zeta_k x)`, evaluated without overflow.
/// Tends to 1 as `lam -> infinity` inside `Omega_k`.
pub fn asymptotic_factor(p: usize, k: usize, lam: C64, x: f64) -> Result<C64> {
    check_p(p)?;
    check_finite(lam)?;
    if !(1..=3).contains(&k) {
        return Err(Error::InvalidInput(format!("sector index {k} not in 1..=3")));
    }
    let kk = k - 1;
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..3 {
        let ratio = zpow(kk, p as i64) * zpow(j, -(p as i64));
        acc += ratio * (I * lam * x * (ZETA[j] - ZETA[kk])).exp();
    }
    Ok(acc)
}
