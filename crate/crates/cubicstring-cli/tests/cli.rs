use std::path::Path;
use std::process::{Command, Output};

use cubicstring::l0::{self, L0Config};
use serde_json::Value;

fn bin(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cubicstring"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Data rows of a CSV written by the tool, header included.
fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# manifest: "));
    lines.map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn col(rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let j = rows[0].iter().position(|h| h == name).unwrap();
    rows[1..].iter().map(|r| r[j].parse().unwrap()).collect()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn help_and_usage_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&bin(&["--help"], d.path())), 0);
    assert_eq!(code(&bin(&["--version"], d.path())), 0);
    assert_eq!(code(&bin(&["frobnicate"], d.path())), 1);
    let o = bin(&["plotdata", "wobble"], d.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("wobble"));
}

#[test]
fn selftest_gtrig_passes() {
    let d = tempfile::tempdir().unwrap();
    let o = bin(&["selftest", "gtrig", "--samples", "200", "--out", "st.csv"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("main-identity") && out.contains("cross-difference"));
    let rows = csv_rows(&d.path().join("st.csv"));
    assert!(rows[1..].iter().all(|r| r[4] == "PASS"));
    assert!(d.path().join("st.csv.manifest.json").exists());
}

#[test]
fn selftest_degenerate_theta_is_skipped() {
    let d = tempfile::tempdir().unwrap();
    let phi = (std::f64::consts::FRAC_PI_2).to_string();
    let o = bin(&["selftest", "l0", "--theta-phi", &phi], d.path());
    assert_eq!(code(&o), 0);
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("SKIP") && out.contains("theta = -1"));
}

#[test]
fn spectrum_of_zero_potential_matches_free_zeros() {
    let d = tempfile::tempdir().unwrap();
    let o = bin(&["spectrum", "--theta-phi", "0.7", "--n-lo", "-5", "--n-hi", "5", "--out", "z.csv"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&d.path().join("z.csv"));
    assert_eq!(rows[0], ["n", "lambda_n", "lambda_n_cubed", "residual", "defect"]);
    let cfg = L0Config::new(1.0, 0.7).unwrap();
    for (n, z) in col(&rows, "n").iter().zip(col(&rows, "lambda_n")) {
        let want = l0::l0_zero(&cfg, *n as i64).unwrap();
        assert!((z - want).abs() < 1e-9 * want.abs().max(1.0), "n = {n}");
    }
    assert!(col(&rows, "defect").iter().all(|&v| v < 1e-6));
    let m = json(&d.path().join("z.csv.manifest.json"));
    for key in ["command", "version", "args", "config", "inputs", "outputs", "wall_clock_seconds"] {
        assert!(m.get(key).is_some(), "{key}");
    }
    assert_eq!(m["command"], "spectrum");
}

#[test]
fn cosine_defect_column_is_bounded() {
    let d = tempfile::tempdir().unwrap();
    let o = bin(&["spectrum", "--potential", "cos:0.3,1", "--out", "c.csv"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&d.path().join("c.csv"));
    let n = col(&rows, "n");
    let defect = col(&rows, "defect");
    assert_eq!(n.len(), 41);
    assert!(defect.iter().all(|&v| v < 0.5), "{defect:?}");
}

#[test]
fn malformed_potential_file_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("q.csv"), "0,0\n0.5,oops\n1,0\n").unwrap();
    let o = bin(&["spectrum", "--potential", "q.csv"], d.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("q.csv"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("bad.cfg"), "n = 10\nwobble = 2\n").unwrap();
    let o = bin(&["spectrum", "--config", "bad.cfg"], d.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("wobble"));
}

#[test]
fn inadmissible_theta_is_a_validation_failure() {
    let d = tempfile::tempdir().unwrap();
    let phi = (std::f64::consts::FRAC_PI_2).to_string();
    assert_eq!(code(&bin(&["spectrum", "--theta-phi", &phi], d.path())), 3);
}

#[test]
fn sfun_output_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let run = || {
        assert_eq!(code(&bin(&["plotdata", "sfun", "--out", "a.csv"], d.path())), 0);
        std::fs::read(d.path().join("a.csv")).unwrap()
    };
    assert_eq!(run(), run());
    let rows = csv_rows(&d.path().join("a.csv"));
    assert_eq!(rows[0], ["x", "s0_re", "s0_im", "s1_re", "s1_im", "s2_re", "s2_im"]);
    let x = col(&rows, "x");
    assert_eq!((x[0], *x.last().unwrap()), (0.0, 5.0));
    let s0 = col(&rows, "s0_re");
    assert!((s0[100] - cubicstring::gtrig::s(0, cubicstring::C64::new(1.0, 0.0)).re).abs() < 1e-15);
}

#[test]
fn charfun_changes_sign_at_free_zeros() {
    let d = tempfile::tempdir().unwrap();
    let o = bin(
        &["plotdata", "charfun", "--theta-phi", "0.7", "--n-lo", "-3", "--n-hi", "3", "--out", "c.csv"],
        d.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&d.path().join("c.csv"));
    let lam = col(&rows, "lambda");
    let mark = col(&rows, "sign_change");
    let imag = col(&rows, "imag_residual");
    let cfg = L0Config::new(1.0, 0.7).unwrap();
    let marked: Vec<usize> = (0..mark.len()).filter(|&k| mark[k] == 1.0).collect();
    assert_eq!(marked.len(), 7);
    for (k, n) in marked.into_iter().zip(-3..=3) {
        let z = l0::l0_zero(&cfg, n).unwrap();
        assert!(lam[k - 1] <= z && z <= lam[k], "n = {n}");
    }
    let real = col(&rows, "real_form");
    assert!(imag.iter().zip(&real).all(|(i, r)| i.abs() <= 1e-12 * r.abs().max(1.0)));
}

#[test]
fn eigfun_columns() {
    let d = tempfile::tempdir().unwrap();
    let o = bin(
        &["plotdata", "eigfun", "--potential", "cos:0.3,1", "--n-lo", "0", "--n-hi", "1", "--points", "11", "--out", "e.csv"],
        d.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&d.path().join("e.csv"));
    assert_eq!(rows[0], ["x", "psi_0_re", "psi_0_im", "psi_1_re", "psi_1_im"]);
    assert_eq!(rows.len(), 12);
    assert!(col(&rows, "psi_0_re")[0].abs() < 1e-9);
}

#[test]
fn roundtrip_report_is_written() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("rt.cfg"), "n = 10\nfunctions_only = true\n").unwrap();
    let o = bin(
        &["plotdata", "roundtrip", "--potential", "cos:0.3,1", "--config", "rt.cfg", "--out", "rt.csv"],
        d.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&d.path().join("rt.csv"));
    assert_eq!(rows.len(), 62);
    assert!(col(&rows, "s2_err").iter().all(|&e| e < 1e-6));
    let r = json(&d.path().join("rt.report.json"));
    assert_eq!(r["manifest"], "rt.csv.manifest.json");
    assert!(r["functions"]["s0"].as_f64().unwrap() < 1e-6);
    assert!(r["reconstruction"].is_null());
}

fn write_sets(dir: &Path, potential: &str) -> Vec<String> {
    let roles = [("theta", "0.4", None), ("theta-hat", "1.1", None), ("theta-h", "0.4", Some("0.5")), ("theta-hat-h", "1.1", Some("0.5"))];
    let mut args = Vec::new();
    for (role, phi, h) in roles {
        let file = format!("{role}.json");
        let mut a = vec!["spectrum", "--potential", potential, "--theta-phi", phi, "--n-lo", "-20", "--n-hi", "20", "--out", &file];
        if let Some(h) = h {
            a.extend(["--h", h]);
        }
        let o = bin(&a, dir);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let v = json(&dir.join(&file));
        assert_eq!(v["manifest"], format!("{file}.manifest.json"));
        args.extend([format!("--{role}-set"), file]);
    }
    args
}

#[test]
fn reconstruct_missing_role_names_it() {
    let d = tempfile::tempdir().unwrap();
    let mut sets = write_sets(d.path(), "zero");
    sets.drain(2..4);
    let mut args = vec!["reconstruct".to_string(), "--out".into(), "r.csv".into()];
    args.extend(sets);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let o = bin(&args, d.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("theta-hat (--theta-hat-set)"), "{}", stderr(&o));
}

#[test]
fn reconstruct_writes_report_with_stage_residuals() {
    let d = tempfile::tempdir().unwrap();
    let sets = write_sets(d.path(), "cos:0.3,1");
    std::fs::write(d.path().join("short.cfg"), "x_nodes = 8\nx_max = 0.7\ndiff_half_width = 2\ndiff_degree = 2\n").unwrap();
    let mut args: Vec<String> = ["reconstruct", "--potential", "cos:0.3,1", "--config", "short.cfg", "--out", "r.csv"]
        .map(String::from)
        .to_vec();
    args.extend(sets.clone());
    let a: Vec<&str> = args.iter().map(String::as_str).collect();
    let o = bin(&a, d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&d.path().join("r.csv"));
    assert_eq!(rows[0], ["x", "q_reconstructed", "q_true", "F", "F_true"]);
    assert_eq!(rows.len(), 9);
    let r = json(&d.path().join("r.report.json"));
    assert_eq!(r["manifest"], "r.csv.manifest.json");
    assert!(r["functions"]["conservation"].as_f64().unwrap() < 1e-9);
    assert!(r["functions"]["errors"]["s2"].as_f64().unwrap() < 5e-3);
    let diag = &r["reconstruction"]["diagnostics"];
    for key in ["s2_origin_defect", "s0_origin_defect", "s1_modulus_mismatch", "poles", "cutoff"] {
        assert!(diag[key].is_number(), "{key}");
    }
    assert_eq!(diag["nodes"].as_array().unwrap().len(), 8);
    assert!(r["errors"]["relative_l2"].is_number());

    // default grid reaches the singular jump matrices: exit 2, report still written
    let mut args: Vec<String> = ["reconstruct", "--out", "full.csv"].map(String::from).to_vec();
    args.extend(sets);
    let a: Vec<&str> = args.iter().map(String::as_str).collect();
    let o = bin(&a, d.path());
    assert_eq!(code(&o), 2);
    let r = json(&d.path().join("full.report.json"));
    assert!(r["failure"].as_str().unwrap().contains("jump solve"));
    assert!(r["functions"]["conservation"].is_number());
}
