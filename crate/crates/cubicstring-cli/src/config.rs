//! Flat `key = value` configuration files.

use std::path::Path;

use cubicstring::inverse::{ProductTail, RoundtripConfig};

use crate::fail::Failure;

/// Keys understood by [`apply`], in file order of the documentation.
pub const KEYS: &[&str] = &[
    "phi",
    "phi_hat",
    "h",
    "n",
    "ode_rel",
    "grid_points",
    "lam_max",
    "functions_only",
    "x_nodes",
    "x_max",
    "tail",
    "s1_zeros",
    "s1_residual",
    "jump_nodes",
    "jump_order",
    "jump_poles",
    "jump_cutoff",
    "jump_density",
    "radii",
    "fit_terms",
    "diff_half_width",
    "diff_degree",
];

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("`{key}`: cannot parse `{v}`"))
}

fn set(cfg: &mut RoundtripConfig, key: &str, v: &str) -> Result<(), String> {
    let r = &mut cfg.reconstruction;
    match key {
        "phi" => cfg.phi = num(key, v)?,
        "phi_hat" => cfg.phi_hat = num(key, v)?,
        "h" => cfg.h = num(key, v)?,
        "n" => cfg.n = num(key, v)?,
        "ode_rel" => cfg.ode_rel = num(key, v)?,
        "grid_points" => cfg.grid_points = num(key, v)?,
        "lam_max" => cfg.lam_max = num(key, v)?,
        "functions_only" => cfg.functions_only = num(key, v)?,
        "x_nodes" => r.x_nodes = num(key, v)?,
        "x_max" => r.x_max = num(key, v)?,
        "tail" => {
            r.tail = match v {
                "free" => ProductTail::Free,
                "truncated" => ProductTail::Truncated,
                _ => return Err(format!("`tail`: expected `free` or `truncated`, got `{v}`")),
            }
        }
        "s1_zeros" => r.s1_zeros = num(key, v)?,
        "s1_residual" => r.s1_residual = num(key, v)?,
        "jump_nodes" => r.jump_nodes = num(key, v)?,
        "jump_order" => r.jump_order = num(key, v)?,
        "jump_poles" => r.jump_poles = num(key, v)?,
        "jump_cutoff" => r.jump_cutoff = if v == "auto" { None } else { Some(num(key, v)?) },
        "jump_density" => r.jump_density = num(key, v)?,
        "radii" => r.radii = v.split(',').map(|s| num(key, s.trim())).collect::<Result<_, _>>()?,
        "fit_terms" => r.fit_terms = num(key, v)?,
        "diff_half_width" => r.diff_half_width = num(key, v)?,
        "diff_degree" => r.diff_degree = num(key, v)?,
        _ => return Err(format!("unknown key `{key}`")),
    }
    Ok(())
}

/// Overrides `cfg` with the assignments in `text`; `#` starts a comment.
pub fn apply(cfg: &mut RoundtripConfig, text: &str) -> Result<(), String> {
    for (k, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`", k + 1))?;
        set(cfg, key.trim(), value.trim()).map_err(|e| format!("line {}: {e}", k + 1))?;
    }
    cfg.reconstruction.validate().map_err(|e| e.to_string())
}

pub fn load(path: Option<&Path>) -> Result<RoundtripConfig, Failure> {
    let mut cfg = RoundtripConfig::default();
    if let Some(p) = path {
        let text = std::fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
        apply(&mut cfg, &text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
    }
    Ok(cfg)
}

/// Every key with its current value, one per line.
pub fn render(cfg: &RoundtripConfig) -> String {
    let r = &cfg.reconstruction;
    let radii: Vec<String> = r.radii.iter().map(|x| x.to_string()).collect();
    let tail = match r.tail {
        ProductTail::Free => "free",
        ProductTail::Truncated => "truncated",
    };
    let values = [
        cfg.phi.to_string(),
        cfg.phi_hat.to_string(),
        cfg.h.to_string(),
        cfg.n.to_string(),
        cfg.ode_rel.to_string(),
        cfg.grid_points.to_string(),
        cfg.lam_max.to_string(),
        cfg.functions_only.to_string(),
        r.x_nodes.to_string(),
        r.x_max.to_string(),
        tail.to_string(),
        r.s1_zeros.to_string(),
        r.s1_residual.to_string(),
        r.jump_nodes.to_string(),
        r.jump_order.to_string(),
        r.jump_poles.to_string(),
        r.jump_cutoff.map_or("auto".to_string(), |t| t.to_string()),
        r.jump_density.to_string(),
        radii.join(","),
        r.fit_terms.to_string(),
        r.diff_half_width.to_string(),
        r.diff_degree.to_string(),
    ];
    KEYS.iter().zip(values).map(|(k, v)| format!("{k} = {v}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_then_apply_is_identity() {
        let mut cfg = RoundtripConfig::default();
        cfg.reconstruction.jump_cutoff = Some(150.0);
        cfg.reconstruction.tail = ProductTail::Truncated;
        cfg.n = 40;
        let mut back = RoundtripConfig::default();
        apply(&mut back, &render(&cfg)).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_lines() {
        let mut cfg = RoundtripConfig::default();
        assert!(apply(&mut cfg, "n = 10 # comment\n\n").is_ok());
        assert_eq!(cfg.n, 10);
        assert!(apply(&mut cfg, "wobble = 1").unwrap_err().contains("unknown key"));
        assert!(apply(&mut cfg, "n: 4").is_err());
        assert!(apply(&mut cfg, "fit_terms = 0").is_err());
        assert!(apply(&mut cfg, "tail = maybe").is_err());
    }
}
