use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct ProductValue {
    pub value: C64,
    /// Estimated relative error from dropping the factors with `|n| > N`.
    pub tail_bound: f64,
}

/// `prod_{|n| <= N} (1 - lam^3 / lam_n^3)` over indexed zeros, pairing `n` with `-n`.
///
/// `spacing` is the asymptotic gap between consecutive zeros; it only
/// enters the tail estimate `|lam|^3 / (spacing^3 N^2)`.
pub fn truncated_product(
    zeros: &[(i64, C64)],
    lam: C64,
    n_max: usize,
    spacing: f64,
) -> Result<ProductValue> {
    let n_max = n_max as i64;
    let mut by_index = std::collections::BTreeMap::new();
    for &(n, z) in zeros {
        if n.abs() <= n_max {
            if z.norm() == 0.0 {
                return Err(Error::InvalidInput(format!("zero lambda_{n} = 0 in product")));
            }
            by_index.insert(n, z);
        }
    }
    if by_index.len() as i64 != 2 * n_max + 1 {
        return Err(Error::InvalidInput(format!(
            "product over |n| <= {n_max} needs {} zeros, got {}",
            2 * n_max + 1,
            by_index.len()
        )));
    }
    let l3 = lam * lam * lam;
    let factor = |z: C64| 1.0 - l3 / (z * z * z);
    let mut value = factor(by_index[&0]);
    for n in 1..=n_max {
        value *= factor(by_index[&n]) * factor(by_index[&-n]);
    }
    let tail_bound = if n_max == 0 {
        f64::INFINITY
    } else {
        l3.norm() / (spacing.powi(3) * (n_max as f64).powi(2))
    };
    Ok(ProductValue { value, tail_bound })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zs() -> Vec<(i64, C64)> {
        (-5..=5).map(|n| (n, C64::new(6.0 * n as f64 + 0.5, 0.0))).collect()
    }

    #[test]
    fn trivial_values() {
        let p = truncated_product(&zs(), C64::new(0.0, 0.0), 5, 6.0).unwrap();
        assert_eq!(p.value, C64::new(1.0, 0.0));
        let z = zs()[7].1;
        let p = truncated_product(&zs(), z, 5, 6.0).unwrap();
        assert_eq!(p.value, C64::new(0.0, 0.0));
    }

    #[test]
    fn insufficient_list() {
        assert!(truncated_product(&zs(), C64::new(1.0, 0.0), 6, 6.0).is_err());
        let bad = vec![(0, C64::new(0.0, 0.0))];
        assert!(truncated_product(&bad, C64::new(1.0, 0.0), 0, 6.0).is_err());
    }
}
