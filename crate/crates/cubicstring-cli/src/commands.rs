use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cubicstring::inverse::{
    function_errors, reconstruct_potential, roundtrip_from_sets, s_at_end, FourSets, FunctionErrors, PotentialErrors,
    Reconstruction, ReconstructionConfig, RecoveredEnd, Role, RoundtripConfig, SpectralSet,
};
use cubicstring::l0::{self, L0Config};
use cubicstring::lq::{self, Boundary};
use cubicstring::numerics::OdeTolerance;
use cubicstring::potential::Potential;
use cubicstring::{gtrig, Error, C64};
use serde::Serialize;
use serde_json::json;

use crate::fail::Failure;
use crate::output::{cplx, num, sibling, Run, Table};
use crate::selftest::{self, Outcome, Scope, Setup};
use crate::{Common, PlotKind, SetPaths};

fn settings(c: &Common) -> Result<RoundtripConfig, Failure> {
    let mut cfg = crate::config::load(c.config.as_deref())?;
    if let Some(p) = c.theta_phi {
        cfg.phi = p;
    }
    if let Some(p) = c.theta_hat_phi {
        cfg.phi_hat = p;
    }
    if let Some(h) = c.h {
        cfg.h = h;
    }
    if !(c.l > 0.0 && c.l.is_finite()) {
        return Err(Failure::Usage(format!("--l {} must be positive", c.l)));
    }
    if c.n_hi < c.n_lo {
        return Err(Failure::Usage(format!("--n-lo {} exceeds --n-hi {}", c.n_lo, c.n_hi)));
    }
    Ok(cfg)
}

fn potential(spec: &str, l: f64, run: &mut Run) -> Result<Potential, Failure> {
    if Path::new(spec).exists() {
        run.input(Path::new(spec));
    }
    Potential::parse(spec, l).map_err(|e| Failure::Usage(format!("potential `{spec}`: {e}")))
}

fn snapshot(c: &Common, cfg: &RoundtripConfig, extra: serde_json::Value) -> serde_json::Value {
    json!({ "flags": c, "settings": cfg, "config_file": crate::config::render(cfg), "command": extra })
}

fn stdout_table(t: &Table) {
    t.print(&mut std::io::stdout().lock()).ok();
}

pub fn selftest(scope: Scope, samples: usize, seed: u64, c: &Common) -> Result<(), Failure> {
    let cfg = settings(c)?;
    let mut run = Run::new("selftest", snapshot(c, &cfg, json!({ "scope": format!("{scope:?}").to_lowercase(), "samples": samples, "seed": seed })));
    let spec = c.potential.as_deref().unwrap_or("cos:0.3,1");
    let setup = Setup {
        l: c.l,
        phi: c.theta_phi.unwrap_or(0.7),
        h: cfg.h,
        n_lo: c.n_lo,
        n_hi: c.n_hi,
        potential: potential(spec, c.l, &mut run)?,
        samples,
        seed,
    };
    let checks = selftest::run_scope(scope, &setup);
    let t = selftest::table(&checks);
    stdout_table(&t);
    let failed = checks.iter().filter(|c| c.outcome == Outcome::Fail).count();
    let passed = checks.iter().filter(|c| c.outcome == Outcome::Pass).count();
    println!("{passed} passed, {failed} failed");
    if let Some(out) = &c.out {
        run.write_csv(out, &t)?;
        run.finish(out)?;
    }
    if failed > 0 {
        return Err(Failure::Validation(format!("{failed} self-test check(s) failed")));
    }
    Ok(())
}

/// Zeros of the free problem with the labels of `boundary`.
fn free_zeros(l: f64, boundary: &Boundary, n_lo: i64, n_hi: i64) -> cubicstring::Result<Vec<(i64, f64)>> {
    match boundary.h {
        Some(h) => lq::free_h_zeros(l, boundary.phi, h, n_lo, n_hi),
        None => {
            let cfg = L0Config::new(l, boundary.phi)?;
            (n_lo..=n_hi).map(|n| Ok((n, l0::l0_zero(&cfg, n)?))).collect()
        }
    }
}

fn boundary(phi: f64, h: Option<f64>) -> Result<Boundary, Failure> {
    match h {
        Some(h) => Ok(Boundary::theta_h(phi, h)?),
        None => Ok(Boundary::theta(phi)),
    }
}

pub fn spectrum(c: &Common) -> Result<(), Failure> {
    let cfg = settings(c)?;
    let mut run = Run::new("spectrum", snapshot(c, &cfg, json!({})));
    let pot = potential(c.potential.as_deref().unwrap_or("zero"), c.l, &mut run)?;
    let b = boundary(cfg.phi, c.h)?;
    let spec = lq::lq_real_zeros(&pot, b, c.n_lo, c.n_hi, &cfg.lq_options())?;
    let free = free_zeros(c.l, &b, c.n_lo, c.n_hi)?;
    let mut t = Table::new(["n", "lambda_n", "lambda_n_cubed", "residual", "defect"]);
    for ((&(n, z), r), (_, z0)) in spec.zeros.iter().zip(&spec.residuals).zip(&free) {
        t.push(vec![n.to_string(), num(z), num(z * z * z), num(*r), num((z - z0).abs() * z * z)]);
    }
    stdout_table(&t);
    if let Some(out) = &c.out {
        if out.extension().is_some_and(|e| e == "json") {
            run.write_json(out, SpectralSet::from_spectrum(&spec))?;
        } else {
            run.write_csv(out, &t)?;
        }
        run.finish(out)?;
    }
    Ok(())
}

fn load_sets(p: &SetPaths, run: &mut Run) -> Result<FourSets, Failure> {
    let mut load = |role: Role, path: &Option<PathBuf>, flag: &str| -> Result<SpectralSet, Failure> {
        let path = path
            .as_ref()
            .ok_or_else(|| Failure::Usage(format!("missing spectral set for role {role} ({flag})")))?;
        run.input(path);
        match SpectralSet::load(path) {
            Ok(s) => Ok(s),
            Err(Error::Io(e)) => Err(Failure::Usage(format!("{role} set {}: {e}", path.display()))),
            Err(e) => Err(Failure::Validation(format!("{role} set {}: {e}", path.display()))),
        }
    };
    let sets = FourSets {
        theta: load(Role::Theta, &p.theta, "--theta-set")?,
        theta_hat: load(Role::ThetaHat, &p.theta_hat, "--theta-hat-set")?,
        theta_h: load(Role::ThetaH, &p.theta_h, "--theta-h-set")?,
        theta_hat_h: load(Role::ThetaHatH, &p.theta_hat_h, "--theta-hat-h-set")?,
    };
    sets.validate().map_err(|e| Failure::Validation(e.to_string()))?;
    Ok(sets)
}

/// Recovered end functions checked on the real grid.
#[derive(Serialize)]
struct FunctionStage {
    conservation: f64,
    s0_consistency: f64,
    s1_flagged: usize,
    s1_modulus_mismatch: f64,
    /// Errors against the ODE values of `--potential`.
    errors: Option<FunctionErrors>,
}

#[derive(Serialize)]
struct ReconstructReport {
    l: f64,
    h: Option<f64>,
    index_ranges: Vec<(String, i64, i64)>,
    config: ReconstructionConfig,
    potential: Option<String>,
    functions: Option<FunctionStage>,
    reconstruction: Option<Reconstruction>,
    errors: Option<PotentialErrors>,
    failure: Option<String>,
    seconds: f64,
}

fn function_stage(sets: &FourSets, cfg: &RoundtripConfig, pot: Option<&Potential>) -> cubicstring::Result<FunctionStage> {
    let rc = &cfg.reconstruction;
    let end = RecoveredEnd::new(sets, rc.tail, rc.s1_zeros, rc.s1_residual)?;
    let grid = cfg.lambda_grid();
    let worst = |f: &dyn Fn(C64) -> f64| grid.iter().map(|&x| f(C64::new(x, 0.0))).fold(0.0, f64::max);
    Ok(FunctionStage {
        conservation: worst(&|z| end.conservation_residual(z)),
        s0_consistency: worst(&|z| end.s0.consistency_residual(z)),
        s1_flagged: end.s1.flagged.len(),
        s1_modulus_mismatch: end.s1.modulus_mismatch,
        errors: pot.map(|p| function_errors(p, &end, &grid)).transpose()?,
    })
}

pub fn reconstruct(paths: &SetPaths, c: &Common) -> Result<(), Failure> {
    let cfg = settings(c)?;
    let out = c
        .out
        .clone()
        .ok_or_else(|| Failure::Usage("reconstruct needs --out".into()))?;
    let mut run = Run::new("reconstruct", snapshot(c, &cfg, json!({ "sets": paths })));
    run.primary(&out);
    let sets = load_sets(paths, &mut run)?;
    let pot = c
        .potential
        .as_deref()
        .map(|s| potential(s, sets.l(), &mut run))
        .transpose()?;
    let t = Instant::now();
    let mut report = ReconstructReport {
        l: sets.l(),
        h: sets.h(),
        index_ranges: Role::ALL
            .iter()
            .map(|&r| {
                let (lo, hi) = sets.get(r).index_range();
                (r.to_string(), lo, hi)
            })
            .collect(),
        config: cfg.reconstruction.clone(),
        potential: pot.as_ref().map(|p| p.label().to_string()),
        functions: None,
        reconstruction: None,
        errors: None,
        failure: None,
        seconds: 0.0,
    };
    let mut failure = None;
    match function_stage(&sets, &cfg, pot.as_ref()) {
        Ok(f) => report.functions = Some(f),
        Err(e) => failure = Some(e),
    }
    if failure.is_none() {
        match reconstruct_potential(&sets, &cfg.reconstruction) {
            Ok(rec) => {
                let tab = match &pot {
                    Some(p) => {
                        let mut t = Table::new(["x", "q_reconstructed", "q_true", "F", "F_true"]);
                        for k in 0..rec.x.len() {
                            let x = rec.x[k];
                            t.push(vec![num(x), num(rec.q[k]), num(p.q(x)), num(rec.f[k]), num(p.integral(x)?)]);
                        }
                        t
                    }
                    None => {
                        let mut t = Table::new(["x", "q_reconstructed", "F"]);
                        for k in 0..rec.x.len() {
                            t.push(vec![num(rec.x[k]), num(rec.q[k]), num(rec.f[k])]);
                        }
                        t
                    }
                };
                run.write_csv(&out, &tab)?;
                if let Some(p) = &pot {
                    report.errors = Some(potential_errors(p, &rec)?);
                }
                report.reconstruction = Some(rec);
            }
            Err(e) => failure = Some(e),
        }
    }
    report.failure = failure.as_ref().map(|e| e.to_string());
    report.seconds = t.elapsed().as_secs_f64();
    run.write_json(&sibling(&out, "report.json"), &report)?;
    run.finish(&out)?;
    match failure {
        Some(e) => Err(Failure::Numeric(format!("{e} (report written)"))),
        None => Ok(()),
    }
}

fn potential_errors(p: &Potential, rec: &Reconstruction) -> cubicstring::Result<PotentialErrors> {
    cubicstring::inverse::potential_errors(p, rec)
}

fn sfun(points: usize) -> Table {
    let mut t = Table::new(["x", "s0_re", "s0_im", "s1_re", "s1_im", "s2_re", "s2_im"]);
    let n = points.max(2);
    for k in 0..n {
        let x = 5.0 * k as f64 / (n - 1) as f64;
        let mut row = vec![num(x)];
        for p in 0..3 {
            row.extend(cplx(gtrig::s(p, C64::new(x, 0.0))));
        }
        t.push(row);
    }
    t
}

fn charfun(pot: &Potential, b: &Boundary, n_lo: i64, n_hi: i64, points: usize) -> cubicstring::Result<Table> {
    let l = pot.l();
    let cfg = L0Config::new(l, b.phi)?;
    let (lo, hi) = (cfg.interval(n_lo).0, cfg.interval(n_hi).1);
    let theta = b.theta_value();
    let rot = C64::from_polar(1.0, -b.phi);
    let mut t = Table::new(["lambda", "real_form", "imag_residual", "sign_change"]);
    let n = points.max(2);
    let mut prev: Option<f64> = None;
    for k in 0..n {
        let x = lo + (hi - lo) * k as f64 / (n - 1) as f64;
        let lam = C64::new(x, 0.0);
        let d = match b.h {
            Some(h) => lq::delta_qh(pot, theta, h, lam)?,
            None if pot.is_zero() => l0::delta0(&cfg, lam),
            None => lq::delta_q(pot, theta, lam)?,
        } * rot;
        let change = prev.is_some_and(|p| p * d.re < 0.0);
        prev = Some(d.re);
        t.push(vec![num(x), num(d.re), num(d.im), u8::from(change).to_string()]);
    }
    Ok(t)
}

fn eigfun(pot: &Potential, b: Boundary, c: &Common, cfg: &RoundtripConfig, points: usize) -> cubicstring::Result<Table> {
    let spec = lq::lq_real_zeros(pot, b, c.n_lo, c.n_hi, &cfg.lq_options())?;
    let psi: Vec<_> = spec
        .zeros
        .iter()
        .map(|&(n, _)| lq::eigenfunction_q(pot, &spec, n))
        .collect::<cubicstring::Result<_>>()?;
    let mut t = Table::new(["x".to_string()]);
    for e in &psi {
        t.header.extend([format!("psi_{}_re", e.n), format!("psi_{}_im", e.n)]);
    }
    let n = points.max(2);
    for k in 0..n {
        let x = pot.l() * k as f64 / (n - 1) as f64;
        let mut row = vec![num(x)];
        for e in &psi {
            row.extend(cplx(e.value(x)));
        }
        t.push(row);
    }
    Ok(t)
}

fn roundtrip(pot: &Potential, cfg: &RoundtripConfig, out: Option<&Path>, run: &mut Run) -> Result<Table, Failure> {
    let t = Instant::now();
    let sets = FourSets::forward(pot, cfg.phi, cfg.phi_hat, cfg.h, cfg.n, &cfg.lq_options())
        .map_err(|e| e.at_stage("forward spectra"))?;
    let forward_seconds = t.elapsed().as_secs_f64();
    let rc = &cfg.reconstruction;
    let end = RecoveredEnd::new(&sets, rc.tail, rc.s1_zeros, rc.s1_residual)?;
    let mut tab = Table::new(["lambda"]);
    for p in 0..3 {
        tab.header.extend([format!("s{p}_rec_re"), format!("s{p}_rec_im"), format!("s{p}_ode_re"), format!("s{p}_ode_im"), format!("s{p}_err")]);
    }
    for x in cfg.lambda_grid() {
        let lam = C64::new(x, 0.0);
        let ode = s_at_end(pot, lam, &OdeTolerance::default())?;
        let mut row = vec![num(x)];
        for (p, want) in ode.iter().enumerate() {
            let got = end.s(p, lam)?;
            row.extend(cplx(got));
            row.extend(cplx(*want));
            row.push(num((got - want).norm()));
        }
        tab.push(row);
    }
    let report = roundtrip_from_sets(pot, &sets, cfg, forward_seconds)?;
    let stage = report.reconstruction.as_ref().and_then(|s| s.failure.clone());
    println!("functions: s0 {} s1 {} s2 {}", num(report.functions.s0), num(report.functions.s1), num(report.functions.s2));
    match (&report.reconstruction, stage) {
        (None, _) => println!("potential stage: skipped"),
        (Some(_), Some(f)) => println!("potential stage failed: {f}"),
        (Some(s), None) => println!("potential stage: {}", serde_json::to_string(&s.errors).unwrap_or_default()),
    }
    if let Some(out) = out {
        run.write_json(&sibling(out, "report.json"), &report)?;
    }
    Ok(tab)
}

pub fn plotdata(kind: PlotKind, points: Option<usize>, c: &Common) -> Result<(), Failure> {
    let cfg = settings(c)?;
    let mut run = Run::new("plotdata", snapshot(c, &cfg, json!({ "kind": kind, "points": points })));
    if let Some(out) = &c.out {
        run.primary(out);
    }
    let pot = || -> Result<Potential, Failure> { Ok(Potential::parse(c.potential.as_deref().unwrap_or("zero"), c.l)?) };
    if let Some(p) = c.potential.as_deref().filter(|p| Path::new(p).exists()) {
        run.input(Path::new(p));
    }
    let table = match kind {
        PlotKind::Sfun => sfun(points.unwrap_or(501)),
        PlotKind::Charfun => charfun(&pot()?, &boundary(cfg.phi, c.h)?, c.n_lo, c.n_hi, points.unwrap_or(801))?,
        PlotKind::Eigfun => eigfun(&pot()?, boundary(cfg.phi, c.h)?, c, &cfg, points.unwrap_or(201))?,
        PlotKind::Roundtrip => roundtrip(&pot()?, &cfg, c.out.as_deref(), &mut run)?,
    };
    match &c.out {
        Some(out) => {
            run.write_csv(out, &table)?;
            run.finish(out)?;
        }
        None => {
            let mut o = std::io::stdout().lock();
            o.write_all(table.render().as_bytes()).ok();
        }
    }
    Ok(())
}
