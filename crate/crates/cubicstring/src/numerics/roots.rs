use crate::error::{Error, Result};

/// Root of `f` on a sign-changing bracket `[a, b]`.
///
/// Brent's method: inverse quadratic / secant steps that fall back to
/// bisection, so the bracket is never lost. Terminates once the bracket
/// is narrower than `|b - a| * tol + tol` (plus a few ulps).
pub fn find_bracketed_root(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || !(tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "bad bracket [{a}, {b}] or tolerance {tol}"
        )));
    }
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa * fb < 0.0) {
        return Err(Error::Bracketing { a, b });
    }
    let xtol = (b - a).abs() * tol + tol;
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
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
        let t = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= t || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= t && fa.abs() > fb.abs() {
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
            if 2.0 * p < (3.0 * m * q - (t * q).abs()).min((e * q).abs()) {
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
        b += if d.abs() > t { d } else { t.copysign(m) };
        fb = f(b);
    }
    Ok(b)
}

/// Scan `[a, b]` on `n` equal cells and return every sign-change bracket.
pub fn scan_brackets(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let h = (b - a) / n as f64;
    let mut x0 = a;
    let mut f0 = f(a);
    for i in 1..=n {
        let x1 = if i == n { b } else { a + i as f64 * h };
        let f1 = f(x1);
        if f0 == 0.0 || f0 * f1 < 0.0 {
            out.push((x0, x1));
        }
        x0 = x1;
        f0 = f1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn known_roots() {
        let r = find_bracketed_root(f64::cos, 1.0, 2.0, 1e-15).unwrap();
        assert!((r - PI / 2.0).abs() < 1e-14);
        let r = find_bracketed_root(|x| x * x * x - 2.0, 1.0, 2.0, 1e-15).unwrap();
        assert!((r - 2f64.powf(1.0 / 3.0)).abs() < 1e-14);
    }

    #[test]
    fn same_sign_is_an_error() {
        let e = find_bracketed_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12).unwrap_err();
        assert!(matches!(e, Error::Bracketing { .. }));
    }

    #[test]
    fn scan_finds_all() {
        let b = scan_brackets(|x| (3.0 * x).sin(), 0.1, 10.0, 1000);
        assert_eq!(b.len(), 9);
    }
}
