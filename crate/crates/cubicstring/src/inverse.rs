//! Recovery of `s_2(lam, l)`, `s_0(lam, l)`, `s_1(lam, l)` from four spectra and
//! the potential reconstruction built on the jump problem.

use std::fmt;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bvp::{extract_integral, EndData, JumpConfig, JumpData};
use crate::error::{Error, Result};
use crate::gtrig;
use crate::l0::{self, L0Config};
use crate::lq::{self, Boundary, LqOptions, LqSpectrum};
use crate::numerics::{differentiate_smooth, DiffMethod, OdeTolerance};
use crate::potential::Potential;

const I: C64 = C64::new(0.0, 1.0);
const ONE: C64 = C64::new(1.0, 0.0);

mod complex_obj {
    use num_complex::Complex64 as C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Obj {
        re: f64,
        im: f64,
    }

    pub fn serialize<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
        Obj { re: z.re, im: z.im }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        let o = Obj::deserialize(d)?;
        Ok(C64::new(o.re, o.im))
    }

    pub mod opt {
        use super::*;

        pub fn serialize<S: Serializer>(z: &Option<C64>, s: S) -> Result<S::Ok, S::Error> {
            z.map(|z| Obj { re: z.re, im: z.im }).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<C64>, D::Error> {
            Ok(Option::<Obj>::deserialize(d)?.map(|o| C64::new(o.re, o.im)))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SetKind {
    #[serde(rename = "theta")]
    Theta,
    #[serde(rename = "theta-h")]
    ThetaH,
}

/// `(a; theta; {lambda_n})` or `(a; b; theta; h; {lambda_n})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralSet {
    pub kind: SetKind,
    pub l: f64,
    #[serde(with = "complex_obj")]
    pub theta: C64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    /// `s_2(0, l)`.
    #[serde(with = "complex_obj")]
    pub a: C64,
    /// `s_0(0, l)`.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "complex_obj::opt")]
    pub b: Option<C64>,
    pub lambdas: Vec<f64>,
    /// Label of `lambdas[0]`.
    pub index_offset: i64,
}

impl SpectralSet {
    pub fn from_spectrum(spec: &LqSpectrum) -> Self {
        let h = spec.boundary.h;
        SpectralSet {
            kind: if h.is_some() { SetKind::ThetaH } else { SetKind::Theta },
            l: spec.l,
            theta: spec.boundary.theta_value(),
            h,
            a: spec.a,
            b: h.map(|_| spec.b),
            lambdas: spec.zeros.iter().map(|z| z.1).collect(),
            index_offset: spec.zeros.first().map_or(0, |z| z.0),
        }
    }

    pub fn boundary(&self) -> Result<Boundary> {
        let phi = 0.5 * self.theta.arg();
        match self.kind {
            SetKind::Theta => Ok(Boundary::theta(phi)),
            SetKind::ThetaH => {
                let h = self.h.ok_or_else(|| Error::InvalidInput("theta-h set without h".into()))?;
                Boundary::theta_h(phi, h)
            }
        }
    }

    pub fn theta0(&self) -> C64 {
        self.a.conj() / self.a
    }

    /// Labels `index_offset ..` paired with the zeros.
    pub fn indexed(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.lambdas.iter().enumerate().map(|(k, &z)| (self.index_offset + k as i64, z))
    }

    pub fn index_range(&self) -> (i64, i64) {
        (self.index_offset, self.index_offset + self.lambdas.len() as i64 - 1)
    }

    /// Shape checks plus admissibility of `(a, b, theta, h)`.
    pub fn validate(&self) -> Result<()> {
        if !(self.l > 0.0 && self.l.is_finite()) {
            return Err(Error::InvalidInput(format!("length l = {} must be positive", self.l)));
        }
        if (self.theta.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("theta = {} is not unimodular", self.theta)));
        }
        match (self.kind, self.h, self.b) {
            (SetKind::Theta, None, None) | (SetKind::ThetaH, Some(_), Some(_)) => {}
            _ => {
                return Err(Error::InvalidInput(format!(
                    "{:?} set needs h and b exactly when it is theta-h",
                    self.kind
                )))
            }
        }
        if self.lambdas.is_empty() {
            return Err(Error::InvalidInput("spectral set holds no zeros".into()));
        }
        if self.lambdas.iter().any(|z| !z.is_finite() || *z == 0.0) {
            return Err(Error::InvalidInput("zeros must be finite and nonzero".into()));
        }
        if self.lambdas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("zeros are not strictly increasing".into()));
        }
        lq::check_admissible(self.a, self.b.unwrap_or(ONE), &self.boundary()?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let set: SpectralSet = serde_json::from_str(text)?;
        set.validate()?;
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The set of the potential `s^3 q(s x)` on `[0, l / s]`, whose `s_p(lam, x)`
    /// are `s^{-p} s_p(lam / s, s x)`.
    pub fn scaled(&self, s: f64) -> Self {
        SpectralSet {
            l: self.l / s,
            a: self.a / (s * s),
            h: self.h.map(|h| h / (s * s)),
            lambdas: self.lambdas.iter().map(|z| z * s).collect(),
            ..self.clone()
        }
    }
}

/// `a = s_2(0, l)`, `b = s_0(0, l)` and the zeros with labels `n_lo..=n_hi`.
pub fn forward_spectral_data(
    pot: &Potential,
    boundary: Boundary,
    n_lo: i64,
    n_hi: i64,
    opts: &LqOptions,
) -> Result<SpectralSet> {
    let spec = lq::lq_real_zeros(pot, boundary, n_lo, n_hi, opts)?;
    let set = SpectralSet::from_spectrum(&spec);
    set.validate()?;
    Ok(set)
}

/// Characteristic function of the free operator with the same boundary data.
pub fn free_characteristic(l: f64, theta: C64, h: Option<f64>, lam: C64) -> C64 {
    let s = gtrig::s_scaled_all(lam, l);
    let t = gtrig::s_scaled_all(lam.conj(), l);
    let mut d = -(theta * s[2] + t[2].conj());
    if let Some(h) = h {
        d -= I * h * (theta * s[0] - t[0].conj());
    }
    d
}

/// How the factors beyond the supplied zeros are treated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProductTail {
    /// Plain truncated product.
    Truncated,
    /// Every missing zero replaced by the free zero with the same label,
    /// summed in closed form through the free characteristic function.
    Free,
}

/// `Delta(lam) = Delta(0) prod_n (1 - lam^3 / lambda_n^3)` from one spectral set.
#[derive(Clone, Debug)]
pub struct CharacteristicProduct {
    l: f64,
    theta: C64,
    h: Option<f64>,
    origin: C64,
    cubes: Vec<f64>,
    free_cubes: Option<Vec<f64>>,
    free_origin: C64,
}

impl CharacteristicProduct {
    pub fn new(set: &SpectralSet, tail: ProductTail) -> Result<Self> {
        set.validate()?;
        let theta0 = set.theta0();
        let mut origin = -set.a * (set.theta + theta0);
        if let (Some(h), Some(b)) = (set.h, set.b) {
            origin -= I * h * b * (set.theta - b.conj() / b);
        }
        let free_origin = {
            let l2 = 0.5 * set.l * set.l;
            let mut v = -l2 * (set.theta + ONE);
            if let Some(h) = set.h {
                v -= I * h * (set.theta - ONE);
            }
            v
        };
        let free_cubes = match tail {
            ProductTail::Truncated => None,
            ProductTail::Free => {
                if free_origin.norm() < 1e-12 {
                    return Err(Error::DegenerateTheta(format!("{} (free zero at the origin)", set.theta)));
                }
                Some(free_zeros(set)?.iter().map(|z| z * z * z).collect())
            }
        };
        Ok(CharacteristicProduct {
            l: set.l,
            theta: set.theta,
            h: set.h,
            origin,
            cubes: set.lambdas.iter().map(|z| z * z * z).collect(),
            free_cubes,
            free_origin,
        })
    }

    pub fn origin(&self) -> C64 {
        self.origin
    }

    pub fn value(&self, lam: C64) -> C64 {
        let l3 = lam * lam * lam;
        let mut v = self.origin;
        match &self.free_cubes {
            None => {
                for c in &self.cubes {
                    v *= ONE - l3 / *c;
                }
            }
            Some(free) => {
                v *= free_characteristic(self.l, self.theta, self.h, lam) / self.free_origin;
                for (c, f) in self.cubes.iter().zip(free) {
                    v *= (ONE - l3 / *c) / (ONE - l3 / *f);
                }
            }
        }
        v
    }
}

/// Free zeros carrying the labels of `set`.
fn free_zeros(set: &SpectralSet) -> Result<Vec<f64>> {
    let b = set.boundary()?;
    let (lo, hi) = set.index_range();
    let z: Vec<f64> = match b.h {
        None => {
            let cfg = L0Config::new(set.l, b.phi)?;
            (lo..=hi).map(|n| l0::l0_zero(&cfg, n)).collect::<Result<_>>()?
        }
        Some(h) => lq::free_h_zeros(set.l, b.phi, h, lo, hi)?.into_iter().map(|z| z.1).collect(),
    };
    if z.len() != set.lambdas.len() {
        return Err(Error::RootSearch {
            index: lo,
            reason: format!("free zeros for labels [{lo}, {hi}] incomplete"),
        });
    }
    Ok(z)
}

/// `s_2 = (Delta_thetahat - Delta_theta) / (theta - thetahat)`.
pub fn s2_from_characteristics(d_theta: C64, d_theta_hat: C64, theta: C64, theta_hat: C64) -> C64 {
    (d_theta_hat - d_theta) / (theta - theta_hat)
}

/// `s_0 = (Delta_theta - Delta_{theta,h} - Delta_thetahat + Delta_{thetahat,h}) / (i h (theta - thetahat))`.
pub fn s0_from_characteristics(d: [C64; 4], theta: C64, theta_hat: C64, h: f64) -> C64 {
    (d[0] - d[2] - d[1] + d[3]) / (I * h * (theta - theta_hat))
}

fn rel_diff(a: C64, b: C64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
}

fn pair_check(a: &SpectralSet, b: &SpectralSet) -> Result<()> {
    if rel_diff(C64::new(a.l, 0.0), C64::new(b.l, 0.0)) > 1e-14 {
        return Err(Error::InvalidInput(format!("lengths {} and {} differ", a.l, b.l)));
    }
    if rel_diff(a.a, b.a) > 1e-8 {
        return Err(Error::InvalidInput(format!("inconsistent a: {} vs {}", a.a, b.a)));
    }
    if (a.theta - b.theta).norm() < 1e-10 {
        return Err(Error::DegenerateTheta(format!("theta = thetahat = {}", a.theta)));
    }
    Ok(())
}

/// `s_2(lam, l)` from the spectra for `theta` and `thetahat`.
#[derive(Clone, Debug)]
pub struct RecoveredS2 {
    d: [CharacteristicProduct; 2],
    theta: [C64; 2],
}

impl RecoveredS2 {
    pub fn eval(&self, lam: C64) -> C64 {
        s2_from_characteristics(self.d[0].value(lam), self.d[1].value(lam), self.theta[0], self.theta[1])
    }
}

pub fn reconstruct_s2(set: &SpectralSet, set_hat: &SpectralSet, tail: ProductTail) -> Result<RecoveredS2> {
    for s in [set, set_hat] {
        if s.kind != SetKind::Theta {
            return Err(Error::InvalidInput("s_2 needs two theta-only sets".into()));
        }
    }
    pair_check(set, set_hat)?;
    Ok(RecoveredS2 {
        d: [CharacteristicProduct::new(set, tail)?, CharacteristicProduct::new(set_hat, tail)?],
        theta: [set.theta, set_hat.theta],
    })
}

/// The four sets by role.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourSets {
    pub theta: SpectralSet,
    pub theta_hat: SpectralSet,
    pub theta_h: SpectralSet,
    pub theta_hat_h: SpectralSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Theta,
    ThetaHat,
    ThetaH,
    ThetaHatH,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Theta, Role::ThetaHat, Role::ThetaH, Role::ThetaHatH];

    pub fn kind(self) -> SetKind {
        match self {
            Role::Theta | Role::ThetaHat => SetKind::Theta,
            _ => SetKind::ThetaH,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Theta => "theta",
            Role::ThetaHat => "theta-hat",
            Role::ThetaH => "(theta,h)",
            Role::ThetaHatH => "(theta-hat,h)",
        })
    }
}

impl FourSets {
    pub fn get(&self, role: Role) -> &SpectralSet {
        match role {
            Role::Theta => &self.theta,
            Role::ThetaHat => &self.theta_hat,
            Role::ThetaH => &self.theta_h,
            Role::ThetaHatH => &self.theta_hat_h,
        }
    }

    /// Forward data for `theta = exp(2 i phi)`, `thetahat = exp(2 i phi_hat)` and `h`.
    pub fn forward(pot: &Potential, phi: f64, phi_hat: f64, h: f64, n: i64, opts: &LqOptions) -> Result<Self> {
        let window = |b: Boundary| forward_spectral_data(pot, b, -n, n, opts);
        Ok(FourSets {
            theta: window(Boundary::theta(phi))?,
            theta_hat: window(Boundary::theta(phi_hat))?,
            theta_h: window(Boundary::theta_h(phi, h)?)?,
            theta_hat_h: window(Boundary::theta_h(phi_hat, h)?)?,
        })
    }

    pub fn l(&self) -> f64 {
        self.theta.l
    }

    pub fn h(&self) -> Option<f64> {
        self.theta_h.h
    }

    pub fn validate(&self) -> Result<()> {
        for role in Role::ALL {
            let s = self.get(role);
            if s.kind != role.kind() {
                return Err(Error::InvalidInput(format!("{role} set has kind {:?}", s.kind)));
            }
            s.validate().map_err(|e| Error::InvalidInput(format!("{role} set: {e}")))?;
        }
        pair_check(&self.theta, &self.theta_hat)?;
        pair_check(&self.theta_h, &self.theta_hat_h)?;
        if rel_diff(self.theta.a, self.theta_h.a) > 1e-8 {
            return Err(Error::InvalidInput("inconsistent a across the h sets".into()));
        }
        let (b, bh) = (self.theta_h.b, self.theta_hat_h.b);
        if let (Some(b), Some(bh)) = (b, bh) {
            if rel_diff(b, bh) > 1e-8 {
                return Err(Error::InvalidInput(format!("inconsistent b: {b} vs {bh}")));
            }
        }
        if self.theta_h.h != self.theta_hat_h.h {
            return Err(Error::InvalidInput("the two h sets carry different h".into()));
        }
        if (self.theta.theta - self.theta_h.theta).norm() > 1e-12
            || (self.theta_hat.theta - self.theta_hat_h.theta).norm() > 1e-12
        {
            return Err(Error::InvalidInput("h sets must share theta and thetahat with the plain sets".into()));
        }
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> Self {
        FourSets {
            theta: self.theta.scaled(s),
            theta_hat: self.theta_hat.scaled(s),
            theta_h: self.theta_h.scaled(s),
            theta_hat_h: self.theta_hat_h.scaled(s),
        }
    }
}

/// `s_0(lam, l)` from the four spectra.
#[derive(Clone, Debug)]
pub struct RecoveredS0 {
    d: [CharacteristicProduct; 4],
    theta: [C64; 2],
    h: f64,
}

impl RecoveredS0 {
    pub fn eval(&self, lam: C64) -> C64 {
        let d = [0, 1, 2, 3].map(|k| self.d[k].value(lam));
        s0_from_characteristics(d, self.theta[0], self.theta[1], self.h)
    }

    /// `i h (theta s_0 - s_0^*)` against `Delta_theta - Delta_{theta,h}`.
    pub fn consistency_residual(&self, lam: C64) -> f64 {
        let s0 = self.eval(lam);
        let s0s = self.eval(lam.conj()).conj();
        let lhs = I * self.h * (self.theta[0] * s0 - s0s);
        let rhs = self.d[0].value(lam) - self.d[2].value(lam);
        (lhs - rhs).norm() / rhs.norm().max(1.0)
    }
}

pub fn reconstruct_s0(sets: &FourSets, tail: ProductTail) -> Result<RecoveredS0> {
    sets.validate()?;
    let h = sets.h().ok_or_else(|| Error::InvalidInput("h sets carry no h".into()))?;
    if h == 0.0 {
        return Err(Error::InvalidInput("h = 0".into()));
    }
    let d = [
        CharacteristicProduct::new(&sets.theta, tail)?,
        CharacteristicProduct::new(&sets.theta_hat, tail)?,
        CharacteristicProduct::new(&sets.theta_h, tail)?,
        CharacteristicProduct::new(&sets.theta_hat_h, tail)?,
    ];
    Ok(RecoveredS0 {
        d,
        theta: [sets.theta.theta, sets.theta_hat.theta],
        h,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Flag {
    /// The secant limit lay in `Im lam^3 >= 0`; the conjugate nearer the free zero was kept.
    Reassigned,
    /// No zero of `P` with relative residual below the threshold was found near
    /// the seed; the free zero is kept.
    Unresolved,
}

/// `s_1(lam, l) = C (S_1(lam) / l) prod_k (1 - lam^3 / nu_k) / (1 - lam^3 / nu0_k)`,
/// where `S_1` is the free function and `nu0_k` its zeros in `lam^3`.
#[derive(Clone, Debug, Serialize)]
pub struct RecoveredS1 {
    pub l: f64,
    /// Zeros `nu_k` of `s_1` in the variable `lam^3`.
    pub nu: Vec<C64>,
    pub nu_free: Vec<C64>,
    pub constant: C64,
    /// Zeros that needed the fallback assignment.
    pub flagged: Vec<(usize, Flag)>,
    /// `|P(nu_k)| / (|s_2^* s_0| + |s_0^* s_2|)` at the accepted zeros.
    pub residuals: Vec<f64>,
    /// `|C| |prod nu0_k / nu_k| / l - 1`, zero when all zeros are kept.
    pub modulus_mismatch: f64,
}

impl RecoveredS1 {
    pub fn eval(&self, lam: C64) -> C64 {
        let l3 = lam * lam * lam;
        let mut v = self.constant * gtrig::s_scaled_all(lam, self.l)[1] / self.l;
        for (n, n0) in self.nu.iter().zip(&self.nu_free) {
            v *= (ONE - l3 / *n) / (ONE - l3 / *n0);
        }
        v
    }

    /// `3 (i lam) s_1(lam, l) exp(-i lam l)` at `lam = -i r`, tending to one.
    pub fn asymptotic_factor(&self, r: f64) -> C64 {
        let lam = C64::new(0.0, -r);
        3.0 * I * lam * self.eval(lam) * (-I * lam * self.l).exp()
    }
}

/// `P = s_2^* s_0 + s_0^* s_2`.
fn product_p(s2: &impl Fn(C64) -> C64, s0: &impl Fn(C64) -> C64, lam: C64) -> (C64, f64) {
    let (a, b) = (s2(lam.conj()).conj() * s0(lam), s0(lam.conj()).conj() * s2(lam));
    (a + b, a.norm() + b.norm())
}

/// Zeros of `P` seeded by the first `zeros` free zeros of `s_1`, sorted into `s_1` (`Im lam^3 < 0`)
/// and `s_1^*`; the modulus of the constant comes from `P(0) = |s_1(0)|^2` and its
/// phase from the `Omega_1` asymptotics.
pub fn reconstruct_s1(
    s2: impl Fn(C64) -> C64 + Sync,
    s0: impl Fn(C64) -> C64 + Sync,
    l: f64,
    zeros: usize,
    max_residual: f64,
) -> Result<RecoveredS1> {
    let seeds: Vec<f64> = (2..zeros + 2).map(|k| gtrig::s_zero(1, k)).collect::<Result<_>>()?;
    let found: Vec<(C64, C64, Option<Flag>, f64)> = seeds
        .par_iter()
        .enumerate()
        .map(|(k, &x)| {
            let start = C64::new(0.0, x / l);
            let nu0 = start * start * start;
            let z = match secant(|z| product_p(&s2, &s0, z).0, start, k as i64) {
                Ok(z) => z,
                Err(_) => return (nu0, nu0, Some(Flag::Unresolved), f64::INFINITY),
            };
            let (p, scale) = product_p(&s2, &s0, z);
            if !(p.norm() <= max_residual * scale) {
                return (nu0, nu0, Some(Flag::Unresolved), p.norm() / scale);
            }
            let nu = z * z * z;
            if nu.im < 0.0 {
                return (nu, nu0, None, p.norm() / scale);
            }
            let nu = if (nu.conj() - nu0).norm() < (nu - nu0).norm() { nu.conj() } else { nu };
            (nu, nu0, Some(Flag::Reassigned), p.norm() / scale)
        })
        .collect();
    let p0 = product_p(&s2, &s0, C64::new(0.0, 0.0)).0;
    if !(p0.re > 0.0) || p0.im.abs() > 1e-8 * p0.re {
        return Err(Error::InvalidInput(format!("P(0) = {p0} is not positive")));
    }
    let nu: Vec<C64> = found.iter().map(|f| f.0).collect();
    let nu_free: Vec<C64> = found.iter().map(|f| f.1).collect();
    let limit: C64 = nu.iter().zip(&nu_free).map(|(n, n0)| *n0 / *n).product();
    let modulus = p0.re.sqrt();
    Ok(RecoveredS1 {
        l,
        constant: C64::from_polar(modulus, -limit.arg()),
        modulus_mismatch: modulus * limit.norm() / l - 1.0,
        flagged: found.iter().enumerate().filter_map(|(k, f)| f.2.map(|g| (k, g))).collect(),
        residuals: found.iter().map(|f| f.3).collect(),
        nu,
        nu_free,
    })
}

fn secant(f: impl Fn(C64) -> C64, start: C64, index: i64) -> Result<C64> {
    let mut z0 = start * (1.0 + 1e-4);
    let mut z1 = start;
    let (mut f0, mut f1) = (f(z0), f(z1));
    let mut prev = f64::INFINITY;
    for _ in 0..60 {
        if f1.norm() == 0.0 {
            return Ok(z1);
        }
        let dz = f1 * (z1 - z0) / (f1 - f0);
        if !(dz.re.is_finite() && dz.im.is_finite()) {
            break;
        }
        z0 = z1;
        f0 = f1;
        z1 -= dz;
        f1 = f(z1);
        let step = dz.norm();
        // converged, or stagnating at the noise floor of P
        if step <= 1e-13 * z1.norm() || (step > 0.5 * prev && step <= 1e-7 * z1.norm()) {
            return Ok(z1);
        }
        prev = step;
    }
    Err(Error::RootSearch {
        index,
        reason: format!("secant iteration for a zero of P stalled near {z1}"),
    })
}

/// The three recovered functions at `x = l`.
#[derive(Clone, Debug)]
pub struct RecoveredEnd {
    pub l: f64,
    pub s2: RecoveredS2,
    pub s0: RecoveredS0,
    pub s1: RecoveredS1,
}

impl RecoveredEnd {
    pub fn new(sets: &FourSets, tail: ProductTail, s1_zeros: usize, s1_residual: f64) -> Result<Self> {
        let s2 = reconstruct_s2(&sets.theta, &sets.theta_hat, tail).map_err(|e| e.at_stage("s2"))?;
        let s0 = reconstruct_s0(sets, tail).map_err(|e| e.at_stage("s0"))?;
        let s1 = reconstruct_s1(|z| s2.eval(z), |z| s0.eval(z), sets.l(), s1_zeros, s1_residual).map_err(|e| e.at_stage("s1"))?;
        Ok(RecoveredEnd { l: sets.l(), s2, s0, s1 })
    }

    /// `s_p(lam, l)`.
    pub fn s(&self, p: usize, lam: C64) -> Result<C64> {
        match p {
            0 => Ok(self.s0.eval(lam)),
            1 => Ok(self.s1.eval(lam)),
            2 => Ok(self.s2.eval(lam)),
            _ => Err(Error::InvalidInput(format!("index p = {p} must be 0, 1 or 2"))),
        }
    }

    /// `|s_1^* s_1 - P| / |P|`.
    pub fn conservation_residual(&self, lam: C64) -> f64 {
        let s1 = self.s1.eval(lam) * self.s1.eval(lam.conj()).conj();
        let (p, scale) = product_p(&|z| self.s2.eval(z), &|z| self.s0.eval(z), lam);
        (s1 - p).norm() / scale.max(p.norm())
    }

    /// `[s_hat_1, s_hat_2] = [(i lam) s_1, (i lam)^2 s_2]` as jump-problem input.
    pub fn end_data(self: &Arc<Self>) -> Result<EndData> {
        let me = Arc::clone(self);
        EndData::from_fn(self.l, move |lam| {
            let il = I * lam;
            Ok([il * me.s1.eval(lam), il * il * me.s2.eval(lam)])
        })
    }
}

/// ODE values `[s_0, s_1, s_2](lam, l)`.
pub fn s_at_end(pot: &Potential, lam: C64, tol: &OdeTolerance) -> Result<[C64; 3]> {
    let fs = lq::fundamental_system_on(pot, lam, &[pot.l()], false, tol)?;
    Ok([fs.s(0, 0)[0], fs.s(0, 1)[0], fs.s(0, 2)[0]])
}

/// Knobs of the potential reconstruction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionConfig {
    /// Uniform nodes on `[0, x_max l]`.
    pub x_nodes: usize,
    /// Right end of the grid as a fraction of `l`; the jump system is singular at `x = l`.
    pub x_max: f64,
    pub tail: ProductTail,
    /// Free zeros of `s_1` used as seeds.
    pub s1_zeros: usize,
    /// Largest relative residual `|P| / (|s_2^* s_0| + |s_0^* s_2|)` of an accepted zero.
    pub s1_residual: f64,
    pub jump_nodes: usize,
    pub jump_order: usize,
    pub jump_poles: usize,
    /// Cutoff `T` in units of `1 / l`; `None` keeps the jump default.
    pub jump_cutoff: Option<f64>,
    pub jump_density: f64,
    /// Extraction radii `R l` on the ray `lam = -i R`, increasing.
    pub radii: Vec<f64>,
    /// Powers of `1 / lam` in the extraction fit.
    pub fit_terms: usize,
    /// Local polynomial smoothing for `q = F'`.
    pub diff_half_width: usize,
    pub diff_degree: usize,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        let j = JumpConfig::default();
        let (a, b): (f64, f64) = (30.0, 200.0);
        ReconstructionConfig {
            x_nodes: 20,
            x_max: 0.95,
            tail: ProductTail::Free,
            s1_zeros: 16,
            s1_residual: 1e-10,
            jump_nodes: j.nodes,
            jump_order: j.order,
            jump_poles: j.poles,
            jump_cutoff: None,
            jump_density: j.density,
            radii: (0..10).map(|k| a * (b / a).powf(k as f64 / 9.0)).collect(),
            fit_terms: 4,
            diff_half_width: 3,
            diff_degree: 3,
        }
    }
}

impl ReconstructionConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("x_nodes", self.x_nodes),
            ("s1_zeros", self.s1_zeros),
            ("jump_nodes", self.jump_nodes),
            ("jump_order", self.jump_order),
            ("jump_poles", self.jump_poles),
            ("fit_terms", self.fit_terms),
            ("diff_degree", self.diff_degree),
        ];
        if let Some((k, _)) = counts.iter().find(|c| c.1 == 0) {
            return Err(Error::InvalidInput(format!("{k} must be positive")));
        }
        if self.x_nodes < 2 * self.diff_half_width + 1 {
            return Err(Error::InvalidInput(format!(
                "{} nodes cannot carry a smoothing window of half width {}",
                self.x_nodes, self.diff_half_width
            )));
        }
        if self.jump_nodes % self.jump_order != 0 {
            return Err(Error::InvalidInput("jump_nodes must be a multiple of jump_order".into()));
        }
        if self.radii.len() < self.fit_terms {
            return Err(Error::InvalidInput(format!(
                "{} radii cannot fit {} terms",
                self.radii.len(),
                self.fit_terms
            )));
        }
        if self.radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) || self.radii.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("radii must be positive and increasing".into()));
        }
        if !(self.x_max > 0.0 && self.x_max <= 1.0) {
            return Err(Error::InvalidInput(format!("x_max = {} must lie in (0, 1]", self.x_max)));
        }
        if !(self.s1_residual > 0.0 && self.jump_density > 0.0) {
            return Err(Error::InvalidInput("s1_residual and jump_density must be positive".into()));
        }
        Ok(())
    }

    pub fn jump(&self, l: f64) -> JumpConfig {
        JumpConfig {
            nodes: self.jump_nodes,
            order: self.jump_order,
            poles: self.jump_poles,
            cutoff: self.jump_cutoff.map(|t| t / l),
            density: self.jump_density,
        }
    }

    pub fn diff(&self) -> DiffMethod {
        DiffMethod::Smoothed {
            half_width: self.diff_half_width,
            degree: self.diff_degree,
        }
    }
}

/// Per-node outcome of the jump solve and the extraction.
#[derive(Clone, Debug, Serialize)]
pub struct NodeDiagnostics {
    pub x: f64,
    pub cond: f64,
    pub residual: f64,
    pub fit_defect: f64,
    /// `Im` of the fitted limit, zero for exact data.
    pub fit_imag: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    /// `|s_2(0) - a| / |a|`.
    pub s2_origin_defect: f64,
    /// `|s_0(0) - b| / |b|`.
    pub s0_origin_defect: f64,
    pub s1_flagged: Vec<(usize, Flag)>,
    pub s1_modulus_mismatch: f64,
    /// `|3 (i lam) s_1 e^{-i lam l} - 1|` at `lam = -i R_max / l`.
    pub s1_asymptotic_defect: f64,
    pub poles: usize,
    /// Largest `|Re mu_n|`.
    pub pole_axis_defect: f64,
    pub cutoff: f64,
    pub nodes: Vec<NodeDiagnostics>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Reconstruction {
    pub x: Vec<f64>,
    /// `F(x)`, the estimate of `int_0^x q`, with `F(0) = 0`.
    pub f: Vec<f64>,
    pub q: Vec<f64>,
    pub diagnostics: Diagnostics,
}

/// Four spectra to `q` on a uniform grid of `[0, x_max l]`: `s_p(lam, l)`, the jump data, one jump
/// solve per node, `F` from `3 i lam^2 (E_1 - 1)`, then `q = F'`.
pub fn reconstruct_potential(sets: &FourSets, cfg: &ReconstructionConfig) -> Result<Reconstruction> {
    cfg.validate()?;
    sets.validate()?;
    let l = sets.l();
    let end = Arc::new(RecoveredEnd::new(sets, cfg.tail, cfg.s1_zeros, cfg.s1_residual)?);
    let b = sets.theta_h.b.unwrap_or(ONE);
    let zero = C64::new(0.0, 0.0);
    let s2_origin_defect = rel_diff(end.s2.eval(zero), sets.theta.a);
    let s0_origin_defect = rel_diff(end.s0.eval(zero), b);
    let r_max = cfg.radii[cfg.radii.len() - 1];
    let s1_asymptotic_defect = (end.s1.asymptotic_factor(r_max / l) - ONE).norm();
    let data = JumpData::new(end.end_data()?, cfg.jump(l)).map_err(|e| e.at_stage("jump data"))?;
    let radii: Vec<f64> = cfg.radii.iter().map(|r| r / l).collect();
    let top = cfg.x_max * l;
    let xs: Vec<f64> = (0..cfg.x_nodes).map(|k| top * k as f64 / (cfg.x_nodes - 1) as f64).collect();
    let per_node: Vec<(f64, NodeDiagnostics)> = xs
        .par_iter()
        .map(|&x| {
            let at = |e: Error| Error::AtNode { x, source: Box::new(e) };
            let sol = data.solve(x).map_err(|e| at(e).at_stage("jump solve"))?;
            let fit = extract_integral(|lam| sol.e1(lam), &radii, cfg.fit_terms)
                .map_err(|e| at(e).at_stage("extraction"))?;
            Ok((
                fit.value,
                NodeDiagnostics {
                    x,
                    cond: sol.cond,
                    residual: sol.residual,
                    fit_defect: fit.defect,
                    fit_imag: fit.imag,
                },
            ))
        })
        .collect::<Result<_>>()?;
    let f0 = per_node[0].0;
    let f: Vec<f64> = per_node.iter().map(|p| p.0 - f0).collect();
    let q = differentiate_smooth(&f, &xs, cfg.diff()).map_err(|e| e.at_stage("differentiation"))?;
    let poles = data.poles();
    Ok(Reconstruction {
        diagnostics: Diagnostics {
            s2_origin_defect,
            s0_origin_defect,
            s1_flagged: end.s1.flagged.clone(),
            s1_modulus_mismatch: end.s1.modulus_mismatch,
            s1_asymptotic_defect,
            poles: poles.len(),
            pole_axis_defect: poles.axis_defect.iter().copied().fold(0.0, f64::max),
            cutoff: data.cutoff(),
            nodes: per_node.into_iter().map(|p| p.1).collect(),
        },
        x: xs,
        f,
        q,
    })
}

/// Settings of a forward/inverse round trip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundtripConfig {
    pub phi: f64,
    pub phi_hat: f64,
    pub h: f64,
    /// Labels `-n..=n` in every set.
    pub n: i64,
    /// Relative ODE tolerance of the forward zero search.
    pub ode_rel: f64,
    /// Points of the check grid on `[-lam_max, lam_max]`.
    pub grid_points: usize,
    pub lam_max: f64,
    /// Skip the jump stage and report the function recovery only.
    pub functions_only: bool,
    pub reconstruction: ReconstructionConfig,
}

impl Default for RoundtripConfig {
    fn default() -> Self {
        RoundtripConfig {
            phi: 0.4,
            phi_hat: 1.1,
            h: 0.5,
            n: 500,
            ode_rel: 1e-10,
            grid_points: 61,
            lam_max: 3.0,
            functions_only: false,
            reconstruction: ReconstructionConfig::default(),
        }
    }
}

impl RoundtripConfig {
    pub fn lq_options(&self) -> LqOptions {
        let mut o = LqOptions::default();
        o.ode = o.ode.with_rel(self.ode_rel);
        o
    }

    pub fn lambda_grid(&self) -> Vec<f64> {
        let n = self.grid_points.max(2);
        (0..n)
            .map(|k| -self.lam_max + 2.0 * self.lam_max * k as f64 / (n - 1) as f64)
            .collect()
    }
}

/// Sup-norm errors of the recovered `s_p(lam, l)` on the check grid.
#[derive(Clone, Debug, Serialize)]
pub struct FunctionErrors {
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    /// Largest `|s_1^* s_1 - P| / |P|`.
    pub conservation: f64,
    /// Largest `i h (theta s_0 - s_0^*)` defect against the products.
    pub s0_consistency: f64,
    pub s1_flagged: usize,
}

impl FunctionErrors {
    pub fn worst(&self) -> f64 {
        self.s0.max(self.s1).max(self.s2)
    }
}

pub fn function_errors(pot: &Potential, end: &RecoveredEnd, grid: &[f64]) -> Result<FunctionErrors> {
    let tol = OdeTolerance::default();
    let rows: Vec<[f64; 5]> = grid
        .par_iter()
        .map(|&x| {
            let lam = C64::new(x, 0.0);
            let s = s_at_end(pot, lam, &tol)?;
            let e = |p: usize| -> Result<f64> { Ok((end.s(p, lam)? - s[p]).norm()) };
            Ok([e(0)?, e(1)?, e(2)?, end.conservation_residual(lam), end.s0.consistency_residual(lam)])
        })
        .collect::<Result<_>>()?;
    let col = |k: usize| rows.iter().map(|r| r[k]).fold(0.0, f64::max);
    Ok(FunctionErrors {
        s0: col(0),
        s1: col(1),
        s2: col(2),
        conservation: col(3),
        s0_consistency: col(4),
        s1_flagged: end.s1.flagged.len(),
    })
}

/// Errors of the reconstructed potential on `[0.05 l, 0.95 l]`.
#[derive(Clone, Debug, Serialize)]
pub struct PotentialErrors {
    pub sup: f64,
    /// `||q_rec - q||_2 / ||q||_2`, absent for `q = 0`.
    pub relative_l2: Option<f64>,
    /// `sup |F - int_0^x q|`.
    pub integral_sup: f64,
}

pub fn potential_errors(pot: &Potential, rec: &Reconstruction) -> Result<PotentialErrors> {
    let l = pot.l();
    let (mut sup, mut num, mut den, mut fsup) = (0.0f64, 0.0, 0.0, 0.0f64);
    for (k, &x) in rec.x.iter().enumerate() {
        fsup = fsup.max((rec.f[k] - pot.integral(x)?).abs());
        if x < 0.05 * l - 1e-12 || x > 0.95 * l + 1e-12 {
            continue;
        }
        let d = rec.q[k] - pot.q(x);
        sup = sup.max(d.abs());
        num += d * d;
        den += pot.q(x) * pot.q(x);
    }
    Ok(PotentialErrors {
        sup,
        relative_l2: (den > 0.0).then(|| (num / den).sqrt()),
        integral_sup: fsup,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PotentialStage {
    pub reconstruction: Option<Reconstruction>,
    pub errors: Option<PotentialErrors>,
    pub failure: Option<String>,
}

/// Per-stage error table of a round trip.
#[derive(Clone, Debug, Serialize)]
pub struct RoundtripReport {
    pub potential: String,
    pub l: f64,
    pub config: RoundtripConfig,
    pub forward_seconds: f64,
    pub functions: FunctionErrors,
    pub function_seconds: f64,
    pub reconstruction: Option<PotentialStage>,
    pub reconstruction_seconds: f64,
}

impl RoundtripReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Forward spectra, function recovery and (unless disabled) the potential stage.
pub fn roundtrip_report(pot: &Potential, cfg: &RoundtripConfig) -> Result<RoundtripReport> {
    let t = Instant::now();
    let sets = FourSets::forward(pot, cfg.phi, cfg.phi_hat, cfg.h, cfg.n, &cfg.lq_options())
        .map_err(|e| e.at_stage("forward spectra"))?;
    roundtrip_from_sets(pot, &sets, cfg, t.elapsed().as_secs_f64())
}

/// The report for precomputed forward data.
pub fn roundtrip_from_sets(
    pot: &Potential,
    sets: &FourSets,
    cfg: &RoundtripConfig,
    forward_seconds: f64,
) -> Result<RoundtripReport> {
    let rc = &cfg.reconstruction;
    let t = Instant::now();
    let end = RecoveredEnd::new(sets, rc.tail, rc.s1_zeros, rc.s1_residual)?;
    let functions = function_errors(pot, &end, &cfg.lambda_grid())?;
    let function_seconds = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let reconstruction = (!cfg.functions_only).then(|| match reconstruct_potential(sets, rc) {
        Ok(rec) => {
            let errors = potential_errors(pot, &rec);
            PotentialStage {
                failure: errors.as_ref().err().map(|e| e.to_string()),
                errors: errors.ok(),
                reconstruction: Some(rec),
            }
        }
        Err(e) => PotentialStage {
            reconstruction: None,
            errors: None,
            failure: Some(e.to_string()),
        },
    });
    Ok(RoundtripReport {
        potential: pot.label().to_string(),
        l: pot.l(),
        config: cfg.clone(),
        forward_seconds,
        functions,
        function_seconds,
        reconstruction,
        reconstruction_seconds: t.elapsed().as_secs_f64(),
    })
}
