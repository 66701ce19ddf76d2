use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use deforce_core::analysis::{gamma_fit, leading_pfa};
use deforce_core::engine::{
    blocki_energy, compare_methods, compute_jacobian, dilute_oracle, eval_blocki_force, eval_de2, eval_de4, eval_pfa, eval_sei,
    FunctionalResult, JacobianProfile,
};
use deforce_core::{Estimate, InteractionKernel, QuadratureSpec, SurfaceProfile};

use crate::config::{KernelConfig, Order, RunConfig};
use crate::output::Sink;
use crate::suites::{self, Ctx, SUITES};
use crate::CliError;

fn evaluate(order: Order, k: &InteractionKernel, p: &SurfaceProfile, spec: &QuadratureSpec) -> deforce_core::Result<FunctionalResult> {
    match order {
        Order::Pfa => eval_pfa(k, p, spec),
        Order::De2 => eval_de2(k, p, spec),
        Order::De4 => eval_de4(k, p, spec),
    }
}

#[derive(Serialize)]
struct PlanformCheck {
    rho_m: f64,
    rho_m_check: f64,
    total: Estimate,
    total_check: Estimate,
    relative_change: f64,
}

pub fn eval(cfg: &RunConfig, base: &Path, sink: &mut Sink) -> Result<(), CliError> {
    let pc = cfg.require_profile()?;
    let (p, k) = (pc.build(base)?, cfg.require_kernel()?.build(base)?);
    let ec = cfg.eval.clone().unwrap_or_default();
    let r = evaluate(ec.order, &k, &p, &cfg.quad)?;
    sink.write_json("result.json", &r)?;
    println!("F0    = {:.12e} ± {:.1e}", r.f0.value, r.f0.error);
    if let Some(f2) = r.f2 {
        println!("F2    = {:.12e} ± {:.1e}", f2.value, f2.error);
    }
    if let Some(f4) = r.f4 {
        println!("F4    = {:.12e} ± {:.1e}  (C(psi) structure only)", f4.value, f4.error);
    }
    println!("total = {:.12e} ± {:.1e}", r.total.value, r.total.error);

    if let Some((rho_m, radius)) = pc.compact() {
        let rho_check = ec.check_rho_m_frac * radius;
        let q = pc.with_rho_m(rho_check).build(base)?;
        let c = evaluate(ec.order, &k, &q, &cfg.quad)?;
        let change = ((r.total.value - c.total.value) / r.total.value).abs();
        println!("planform check: rho_M = {rho_check} changes the total by {change:.3e} (relative)");
        sink.write_json(
            "rho_m_check.json",
            &PlanformCheck {
                rho_m,
                rho_m_check: rho_check,
                total: r.total,
                total_check: c.total,
                relative_change: change,
            },
        )?;
    }
    Ok(())
}

pub fn gamma(cfg: &RunConfig, base: &Path, sink: &mut Sink) -> Result<(), CliError> {
    let g = cfg
        .gamma
        .as_ref()
        .ok_or_else(|| CliError::Config("gamma needs a `gamma` block or --preset".into()))?;
    let family = g
        .family
        .ok_or_else(|| CliError::Config("gamma block needs `family` (sphere, cylinder or sphere3) or a preset".into()))?;
    let k = cfg.require_kernel()?.build(base)?;
    let rep = gamma_fit(&k, family, &g.options(), &cfg.quad)?;
    sink.write_json("fit_report.json", &rep)?;
    let rows: Vec<Vec<f64>> = rep.rungs.iter().map(|r| vec![r.x, r.ratio, r.ratio_err]).collect();
    sink.write_csv("ratios.csv", &["a_over_R", "ratio", "ratio_err"], &rows)?;

    println!("kernel {} on {:?}, model {:?}", rep.kernel, rep.family, rep.model);
    println!("gamma     = {:.6} ± {:.1e}", rep.fit.gamma, rep.fit.gamma_err);
    if let (Some(gl), Some(e)) = (rep.fit.gamma_log, rep.fit.gamma_log_err) {
        println!("gamma_log = {gl:.6} ± {e:.1e}");
    }
    println!("amplitude = {:.6}", rep.amplitude);
    if let Some(r) = rep.reference {
        println!("reference gamma     {r:.6} (relative deviation {:.2e})", rep.relative_deviation().unwrap());
    }
    if let (Some(r), Some(d)) = (rep.reference_log, rep.relative_deviation_log()) {
        println!("reference gamma_log {r:.6} (relative deviation {d:.2e})");
    }
    if let Some(d) = rep.rho_m_drift {
        println!("rho_M drift ({} -> {}): {d:.2e}", rep.rho_m_frac, rep.alt_rho_m_frac.unwrap());
    }
    Ok(())
}

pub fn sweep(cfg: &RunConfig, base: &Path, sink: &mut Sink) -> Result<(), CliError> {
    let s = cfg.sweep.as_ref().ok_or_else(|| CliError::Config("sweep needs a `sweep` block".into()))?;
    if s.a_over_r.is_empty() {
        return Err(CliError::Config("sweep.a_over_r is empty".into()));
    }
    let k = cfg.require_kernel()?.build(base)?;
    let frac = s.rho_m_frac.unwrap_or(0.9);
    let law = k.power_law();
    let n = s.family.base_dim();
    let rows = s
        .a_over_r
        .par_iter()
        .map(|&x| {
            let a = x * s.radius;
            let p = s.family.profile(a, s.radius, frac * s.radius)?;
            let r = eval_de2(&k, &p, &cfg.quad)?;
            let lead = match &law {
                Some(l) => leading_pfa(l, a, s.radius, n)?,
                None => f64::NAN,
            };
            Ok(vec![x, r.f0.value, r.f2.map_or(0.0, |e| e.value), r.total.value, r.total.error, r.total.value / lead])
        })
        .collect::<deforce_core::Result<Vec<_>>>()?;
    sink.write_csv("sweep.csv", &["a_over_R", "F0", "F2", "total", "err", "ratio_to_lead"], &rows)?;
    println!("{} rows written to {}", rows.len(), sink.dir().join("sweep.csv").display());
    Ok(())
}

#[derive(Serialize)]
struct JacobianOutput {
    jacobian: JacobianProfile,
    #[serde(skip_serializing_if = "Option::is_none")]
    force: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    energy: Option<Estimate>,
}

pub fn jacobian(cfg: &RunConfig, base: &Path, sink: &mut Sink) -> Result<(), CliError> {
    let p = cfg.require_profile()?.build(base)?;
    let opts = cfg.jacobian.clone().unwrap_or_default();
    let jac = compute_jacobian(&p, &opts)?;
    let (mut force, mut energy) = (None, None);
    match (&cfg.kernel, &jac.fit) {
        (Some(kc), Some(fit)) => {
            let k = kc.build(base)?;
            force = Some(eval_blocki_force(&k, &jac, jac.d, &cfg.quad)?);
            energy = Some(blocki_energy(&k, fit.j0, fit.j1, jac.d, &cfg.quad)?);
        }
        (Some(_), None) => println!("Jacobian is degenerate (flat profile); no linear fit, no force"),
        _ => {}
    }
    let rows: Vec<Vec<f64>> = (0..jac.j.len())
        .map(|i| vec![jac.edges[i], jac.edges[i + 1], jac.centers[i], jac.j[i]])
        .collect();
    sink.write_csv("jacobian.csv", &["h_lo", "h_hi", "h_center", "J"], &rows)?;
    println!("method {}, {} bins from d = {}", jac.method, jac.j.len(), jac.d);
    if let Some(fit) = &jac.fit {
        println!("J0 = {:.9e}, J1 = {:.9e} over [{}, {}]", fit.j0, fit.j1, fit.window.0, fit.window.1);
    }
    if let Some(f) = force {
        println!("force = {f:.9e}");
    }
    sink.write_json("jacobian.json", &JacobianOutput { jacobian: jac, force, energy })?;
    Ok(())
}

#[derive(Serialize)]
struct SeiOutput {
    energy: Estimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    agrees: Option<bool>,
}

pub fn sei(cfg: &RunConfig, base: &Path, sink: &mut Sink) -> Result<(), CliError> {
    let s = cfg.sei.as_ref().ok_or_else(|| CliError::Config("sei needs a `sei` block with `near` and `far` profiles".into()))?;
    let (near, far) = (s.near.build(base)?, s.far.build(base)?);
    let kc = cfg.require_kernel()?;
    let energy = eval_sei(&kc.build(base)?, &near, &far, &cfg.quad)?;
    let oracle = match kc {
        KernelConfig::DiluteScalar { lambda_r } => Some(dilute_oracle(*lambda_r, &near, &far, &cfg.quad)?),
        _ => None,
    };
    let agrees = oracle.map(|o| (energy.value - o.value).abs() <= (energy.error + o.error).max(1e-12 * o.value.abs()));
    println!("SEI energy = {:.12e} ± {:.1e}", energy.value, energy.error);
    if let Some(o) = oracle {
        println!("dilute oracle = {:.12e} ± {:.1e} (agree: {})", o.value, o.error, agrees.unwrap());
    }
    sink.write_json("sei.json", &SeiOutput { energy, oracle, agrees })?;
    Ok(())
}

pub fn compare(cfg: &RunConfig, base: &Path, sink: &mut Sink) -> Result<(), CliError> {
    let p = cfg.require_profile()?.build(base)?;
    let k = cfg.require_kernel()?.build(base)?;
    let far = match cfg.compare.as_ref().and_then(|c| c.far_sheet.as_ref()) {
        Some(f) => Some(f.build(base)?),
        None => None,
    };
    let cmp = compare_methods(&k, &p, far.as_ref(), &cfg.quad)?;
    for row in &cmp.rows {
        match row.force {
            Some(f) => println!("{:<10} energy {:.9e}  force {:.9e}", row.method, row.energy.value, f),
            None => println!("{:<10} energy {:.9e}", row.method, row.energy.value),
        }
    }
    for (m, why) in &cmp.skipped {
        println!("{m:<10} skipped: {why}");
    }
    sink.write_json("comparison.json", &cmp)?;
    Ok(())
}

#[derive(Serialize)]
struct CheckReport {
    passed: bool,
    suites: Vec<suites::SuiteReport>,
}

pub fn check(cfg: &RunConfig, base: &Path, suite: Option<&str>, sink: &mut Sink) -> Result<(), CliError> {
    let cc = cfg.check.clone().unwrap_or_default();
    let names: Vec<String> = match (suite, cc.suites) {
        (Some(s), _) => vec![s.to_string()],
        (None, Some(list)) => list,
        (None, None) => SUITES.iter().map(|s| s.to_string()).collect(),
    };
    if let Some(bad) = names.iter().find(|n| !SUITES.contains(&n.as_str())) {
        return Err(CliError::Config(format!("unknown suite `{bad}`; available: {}", SUITES.join(", "))));
    }
    let em_kernel = match &cc.em_kernel {
        Some(k) => k.build(base)?,
        None => suites::default_em_kernel(),
    };
    let ctx = Ctx { spec: cfg.quad, em_kernel };
    let reports: Vec<_> = names.iter().map(|n| suites::run_suite(n, &ctx)).collect();
    for r in &reports {
        println!("[{}] {}", if r.passed { "PASS" } else { "FAIL" }, r.suite);
        for c in r.checks.iter().filter(|c| !c.passed) {
            println!("    {}: deviation {:.3e} > {:.1e}", c.name, c.deviation, c.tolerance);
        }
        if let Some(e) = &r.error {
            println!("    error: {e}");
        }
    }
    let failed: Vec<String> = reports.iter().filter(|r| !r.passed).map(|r| r.suite.clone()).collect();
    sink.write_json(
        "check_report.json",
        &CheckReport {
            passed: failed.is_empty(),
            suites: reports,
        },
    )?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::CheckFailed(failed))
    }
}
