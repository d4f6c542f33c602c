//! Adaptive integration of `y''' = c(x) y` for complex `y`.

use num_complex::Complex64 as C64;

use super::dop853::{A, B, C, E3, E5, STAGES};
use crate::error::{Error, Result};

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const RESCALE_AT: f64 = 1e150;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeTolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_step: f64,
    pub min_step: f64,
}

impl OdeTolerance {
    pub fn new(rel: f64, abs: f64, max_step: f64, min_step: f64) -> Result<Self> {
        if !(rel > 0.0 && abs > 0.0) || !(min_step < max_step) || !(min_step > 0.0) {
            return Err(Error::InvalidInput(format!(
                "bad ode tolerance rel={rel} abs={abs} steps=[{min_step}, {max_step}]"
            )));
        }
        Ok(OdeTolerance {
            rel,
            abs,
            max_step,
            min_step,
        })
    }

    pub fn with_rel(mut self, rel: f64) -> Self {
        self.rel = rel;
        self
    }
}

impl Default for OdeTolerance {
    fn default() -> Self {
        OdeTolerance {
            rel: 1e-12,
            abs: 1e-300,
            max_step: f64::INFINITY,
            min_step: 1e-13,
        }
    }
}

/// Samples of `(y, y', y'')` on the grid.
///
/// True values are `y[i] * exp(log_scale[i])`; the scale stays zero unless the
/// solution grows past `1e150`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub grid: Vec<f64>,
    pub y: Vec<[C64; 3]>,
    pub log_scale: Vec<f64>,
}

impl Trajectory {
    /// Unscaled state at node `i`.
    pub fn state(&self, i: usize) -> [C64; 3] {
        let f = self.log_scale[i].exp();
        self.y[i].map(|v| v * f)
    }

    pub fn last(&self) -> [C64; 3] {
        self.state(self.y.len() - 1)
    }
}

/// Several solutions of the same equation integrated on shared steps.
#[derive(Clone, Debug)]
pub struct SystemTrajectory<const M: usize> {
    pub grid: Vec<f64>,
    pub states: Vec<[[C64; 3]; M]>,
    pub log_scale: Vec<f64>,
}

impl<const M: usize> SystemTrajectory<M> {
    pub fn state(&self, i: usize) -> [[C64; 3]; M] {
        let f = self.log_scale[i].exp();
        self.states[i].map(|s| s.map(|v| v * f))
    }

    pub fn last(&self) -> [[C64; 3]; M] {
        self.state(self.states.len() - 1)
    }
}

fn rhs<const M: usize>(c: C64, y: &[[C64; 3]; M]) -> [[C64; 3]; M] {
    let mut out = [[C64::new(0.0, 0.0); 3]; M];
    for j in 0..M {
        out[j] = [y[j][1], y[j][2], c * y[j][0]];
    }
    out
}

fn axpy<const M: usize>(y: &[[C64; 3]; M], h: f64, k: &[[[C64; 3]; M]], w: &[f64]) -> [[C64; 3]; M] {
    let mut out = *y;
    for (ks, &ws) in k.iter().zip(w) {
        if ws == 0.0 {
            continue;
        }
        let f = h * ws;
        for j in 0..M {
            for r in 0..3 {
                out[j][r] += ks[j][r] * f;
            }
        }
    }
    out
}

fn check_grid(grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty integration grid".into()));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite grid node".into()));
    }
    if grid.len() == 1 {
        return Ok(1.0);
    }
    let dir = (grid[1] - grid[0]).signum();
    if dir == 0.0 || grid.windows(2).any(|w| (w[1] - w[0]) * dir <= 0.0) {
        return Err(Error::InvalidInput("grid must be strictly monotone".into()));
    }
    Ok(dir)
}

/// Integrate `M` solutions of `y''' = c(x) y` with an embedded 8(5,3) Runge-Kutta
/// pair. Initial data are given at `grid[0]`; the grid may run either way.
pub fn integrate_system<const M: usize>(
    coeff: impl Fn(f64) -> C64,
    init: [[C64; 3]; M],
    grid: &[f64],
    tol: &OdeTolerance,
) -> Result<SystemTrajectory<M>> {
    let dir = check_grid(grid)?;
    let mut states = Vec::with_capacity(grid.len());
    let mut log_scale = Vec::with_capacity(grid.len());
    let mut y = init;
    let mut ls = 0.0;
    states.push(y);
    log_scale.push(ls);
    if grid.len() == 1 {
        return Ok(SystemTrajectory {
            grid: grid.to_vec(),
            states,
            log_scale,
        });
    }
    let mut t = grid[0];
    let mut f = rhs(coeff(t), &y);
    let span = (grid[grid.len() - 1] - grid[0]).abs();
    let c0 = coeff(t).norm();
    let mut h_abs = (0.1 / (1.0 + c0.cbrt())).min(tol.max_step).min(span);
    let mut k = vec![[[C64::new(0.0, 0.0); 3]; M]; STAGES + 1];
    let err_exp = -1.0 / 8.0;
    let nscale = (3 * M) as f64;

    for &target in &grid[1..] {
        while (target - t) * dir > 0.0 {
            let mut rejected = false;
            loop {
                let remaining = (target - t).abs();
                let last = h_abs >= remaining;
                let h_try = if last { remaining } else { h_abs.min(tol.max_step) };
                if h_try < tol.min_step * span.max(1.0) && !last {
                    return Err(Error::StepUnderflow { x: t });
                }
                let h = h_try * dir;
                k[0] = f;
                for s in 1..STAGES {
                    let ys = axpy(&y, h, &k[..s], &A[s][..s]);
                    k[s] = rhs(coeff(t + C[s] * h), &ys);
                }
                let y_new = axpy(&y, h, &k[..STAGES], &B);
                let t_new = if last { target } else { t + h };
                let f_new = rhs(coeff(t_new), &y_new);
                k[STAGES] = f_new;

                let mut e5 = 0.0;
                let mut e3 = 0.0;
                for j in 0..M {
                    for r in 0..3 {
                        let sc = tol.abs + tol.rel * y[j][r].norm().max(y_new[j][r].norm());
                        let mut a5 = C64::new(0.0, 0.0);
                        let mut a3 = C64::new(0.0, 0.0);
                        for (st, ks) in k.iter().enumerate() {
                            a5 += ks[j][r] * E5[st];
                            a3 += ks[j][r] * E3[st];
                        }
                        e5 += (a5 / sc).norm_sqr();
                        e3 += (a3 / sc).norm_sqr();
                    }
                }
                let err = if e5 == 0.0 && e3 == 0.0 {
                    0.0
                } else {
                    h_try * e5 / ((e5 + 0.01 * e3) * nscale).sqrt()
                };
                if !err.is_finite() {
                    h_abs = h_try * MIN_FACTOR;
                    rejected = true;
                    continue;
                }
                if err < 1.0 {
                    let mut factor = if err == 0.0 {
                        MAX_FACTOR
                    } else {
                        MAX_FACTOR.min(SAFETY * err.powf(err_exp))
                    };
                    if rejected {
                        factor = factor.min(1.0);
                    }
                    if !last || h_try >= h_abs {
                        h_abs = h_try * factor;
                    }
                    y = y_new;
                    f = f_new;
                    t = t_new;
                    break;
                }
                h_abs = h_try * MIN_FACTOR.max(SAFETY * err.powf(err_exp));
                rejected = true;
            }
            let big = y
                .iter()
                .flat_map(|s| s.iter())
                .map(|v| v.norm())
                .fold(0.0, f64::max);
            if big > RESCALE_AT {
                let inv = 1.0 / big;
                for s in y.iter_mut() {
                    for v in s.iter_mut() {
                        *v *= inv;
                    }
                }
                for s in f.iter_mut() {
                    for v in s.iter_mut() {
                        *v *= inv;
                    }
                }
                ls += big.ln();
            }
        }
        states.push(y);
        log_scale.push(ls);
    }
    Ok(SystemTrajectory {
        grid: grid.to_vec(),
        states,
        log_scale,
    })
}

/// Solve `y''' = c(x) y` from `init = (y, y', y'')` at `grid[0]`.
pub fn integrate_third_order(
    coeff: impl Fn(f64) -> C64,
    init: [C64; 3],
    grid: &[f64],
    tol: &OdeTolerance,
) -> Result<Trajectory> {
    let sys = integrate_system(coeff, [init], grid, tol)?;
    Ok(Trajectory {
        grid: sys.grid,
        y: sys.states.into_iter().map(|s| s[0]).collect(),
        log_scale: sys.log_scale,
    })
}
