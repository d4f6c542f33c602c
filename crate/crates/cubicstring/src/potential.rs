//! Real potentials `q` on `[0, l]`.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::numerics::{quad_adaptive, CubicSpline};

type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct Potential {
    l: f64,
    label: String,
    q: Profile,
    breaks: Vec<f64>,
    sigma_l: f64,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential")
            .field("l", &self.l)
            .field("label", &self.label)
            .field("breaks", &self.breaks)
            .finish()
    }
}

impl Potential {
    /// Arbitrary real profile; `breaks` lists interior points where `q` jumps.
    pub fn from_fn(
        l: f64,
        label: impl Into<String>,
        q: impl Fn(f64) -> f64 + Send + Sync + 'static,
        breaks: Vec<f64>,
    ) -> Result<Self> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidInput(format!("length l = {l} must be positive")));
        }
        let mut breaks: Vec<f64> = breaks.into_iter().filter(|&b| b > 0.0 && b < l).collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let mut p = Potential {
            l,
            label: label.into(),
            q: Arc::new(q),
            breaks,
            sigma_l: 0.0,
        };
        for k in 0..=16 {
            let v = p.q(l * k as f64 / 16.0);
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("potential `{}` is not finite", p.label)));
            }
        }
        p.sigma_l = p.sigma(l)?;
        Ok(p)
    }

    pub fn zero(l: f64) -> Result<Self> {
        Self::from_fn(l, "zero", |_| 0.0, vec![])
    }

    /// `a cos(2 pi k x / l)`.
    pub fn cosine(l: f64, a: f64, k: f64) -> Result<Self> {
        let w = 2.0 * PI * k / l;
        Self::from_fn(l, format!("cos:{a},{k}"), move |x| a * (w * x).cos(), vec![])
    }

    /// `a exp(-((x - x0)/w)^2)`.
    pub fn gaussian(l: f64, a: f64, x0: f64, w: f64) -> Result<Self> {
        if !(w > 0.0) {
            return Err(Error::InvalidInput(format!("gaussian width {w} must be positive")));
        }
        Self::from_fn(
            l,
            format!("gauss:{a},{x0},{w}"),
            move |x| a * (-((x - x0) / w).powi(2)).exp(),
            vec![],
        )
    }

    /// `a` on `[0, x0)`, zero after.
    pub fn step(l: f64, a: f64, x0: f64) -> Result<Self> {
        Self::from_fn(
            l,
            format!("step:{a},{x0}"),
            move |x| if x < x0 { a } else { 0.0 },
            vec![x0],
        )
    }

    /// Natural cubic spline through samples covering `[0, l]`.
    pub fn sampled(x: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        let (lo, hi) = match (x.first(), x.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => return Err(Error::InvalidInput("no potential samples".into())),
        };
        if lo.abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("samples must start at x = 0, got {lo}")));
        }
        let spline = CubicSpline::new(x, q)?;
        Self::from_fn(hi, "sampled", move |t| spline.eval(t), vec![])
    }

    /// `x,q` rows (header optional, `#` comments allowed).
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut xs = Vec::new();
        let mut qs = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed = (cols.len() >= 2)
                .then(|| (cols[0].parse::<f64>(), cols[1].parse::<f64>()))
                .and_then(|(a, b)| a.ok().zip(b.ok()));
            match parsed {
                Some((x, q)) => {
                    xs.push(x);
                    qs.push(q);
                }
                None if xs.is_empty() && k == 0 => continue,
                None => {
                    return Err(Error::InvalidInput(format!(
                        "{}:{}: expected `x,q`, got `{line}`",
                        path.display(),
                        k + 1
                    )))
                }
            }
        }
        Self::sampled(xs, qs)
    }

    /// `zero`, `cos:a,k`, `gauss:a,x0,w`, `step:a,x0`, or a CSV file path.
    pub fn parse(spec: &str, l: f64) -> Result<Self> {
        let (name, args) = spec.split_once(':').unwrap_or((spec, ""));
        let nums = || -> Result<Vec<f64>> {
            if args.trim().is_empty() {
                return Ok(vec![]);
            }
            args.split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidInput(format!("bad number `{s}` in `{spec}`")))
                })
                .collect()
        };
        let arity = |v: &[f64], n: usize| -> Result<()> {
            if v.len() == n {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("`{name}` takes {n} parameters, got {}", v.len())))
            }
        };
        match name {
            "zero" => Self::zero(l),
            "cos" | "cosine" => {
                let v = nums()?;
                arity(&v, 2)?;
                Self::cosine(l, v[0], v[1])
            }
            "gauss" | "gaussian" => {
                let v = nums()?;
                arity(&v, 3)?;
                Self::gaussian(l, v[0], v[1], v[2])
            }
            "step" => {
                let v = nums()?;
                arity(&v, 2)?;
                Self::step(l, v[0], v[1])
            }
            _ if Path::new(spec).exists() => Self::from_csv(Path::new(spec)),
            _ => Err(Error::InvalidInput(format!("unknown potential `{spec}`"))),
        }
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    #[inline]
    pub fn q(&self, x: f64) -> f64 {
        (self.q)(x)
    }

    pub fn is_zero(&self) -> bool {
        self.sigma_l == 0.0
    }

    fn pieces(&self, x: f64) -> Vec<(f64, f64)> {
        let mut cuts = vec![0.0];
        cuts.extend(self.breaks.iter().copied().filter(|&b| b < x));
        cuts.push(x);
        cuts.windows(2).map(|w| (w[0], w[1])).collect()
    }

    fn integrate(&self, x: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
        if !(0.0..=self.l * (1.0 + 1e-14)).contains(&x) {
            return Err(Error::InvalidInput(format!("x = {x} outside [0, {}]", self.l)));
        }
        let mut s = 0.0;
        for (a, b) in self.pieces(x) {
            s += quad_adaptive(|t| C64::new(f(t), 0.0), a, b, 1e-13)?.re;
        }
        Ok(s)
    }

    /// `int_0^x |q|`.
    pub fn sigma(&self, x: f64) -> Result<f64> {
        self.integrate(x, |t| self.q(t).abs())
    }

    pub fn sigma_l(&self) -> f64 {
        self.sigma_l
    }

    /// `int_0^x q`.
    pub fn integral(&self, x: f64) -> Result<f64> {
        self.integrate(x, |t| self.q(t))
    }

    /// Ascending grid over `[0, x]` holding `pts` plus every breakpoint below `x`.
    pub(crate) fn with_breaks(&self, pts: &[f64]) -> (Vec<f64>, Vec<usize>) {
        let top = pts.last().copied().unwrap_or(0.0);
        let mut all: Vec<f64> = pts.to_vec();
        all.push(0.0);
        all.extend(self.breaks.iter().copied().filter(|&b| b < top));
        all.sort_by(f64::total_cmp);
        all.dedup();
        let idx = pts
            .iter()
            .map(|p| all.partition_point(|v| v < p))
            .collect();
        (all, idx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_and_integral() {
        let p = Potential::cosine(1.0, 0.3, 1.0).unwrap();
        assert!((p.sigma_l() - 0.6 / PI).abs() < 1e-12);
        assert!(p.integral(1.0).unwrap().abs() < 1e-13);
        let s = Potential::step(2.0, -0.5, 0.7).unwrap();
        assert!((s.sigma(2.0).unwrap() - 0.35).abs() < 1e-13);
        assert!((s.integral(1.0).unwrap() + 0.35).abs() < 1e-13);
        assert!(Potential::zero(1.0).unwrap().is_zero());
    }

    #[test]
    fn parse_specs() {
        let p = Potential::parse("cos:0.3,1", 1.0).unwrap();
        assert!((p.q(0.0) - 0.3).abs() < 1e-15);
        assert!(Potential::parse("gauss:1,0.5,0.1", 1.0).is_ok());
        assert!(Potential::parse("cos:0.3", 1.0).is_err());
        assert!(Potential::parse("wobble", 1.0).is_err());
        assert!(Potential::parse("cos:a,b", 1.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = std::env::temp_dir().join(format!("cubicstring-pot-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let f = dir.join("q.csv");
        let mut text = String::from("x,q\n");
        for k in 0..=40 {
            let x = k as f64 / 40.0;
            text.push_str(&format!("{x},{}\n", (2.0 * PI * x).sin()));
        }
        std::fs::write(&f, text).unwrap();
        let p = Potential::from_csv(&f).unwrap();
        assert_eq!(p.l(), 1.0);
        assert!((p.q(0.3) - (0.6 * PI).sin()).abs() < 1e-4);
        std::fs::write(&f, "x,q\n0,1\n0.5,oops\n").unwrap();
        assert!(Potential::from_csv(&f).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }
}
