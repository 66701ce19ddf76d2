//! Invariant suites run by `deforce check`.

use std::f64::consts::PI;

use serde::Serialize;

use deforce_core::analysis::{additivity_check, gamma_fit, scaling_check, Family, FitOptions};
use deforce_core::engine::{blocki_force, compute_jacobian, dilute_oracle, eval_de2, eval_derjaguin, eval_pfa, eval_sei, JacobianOptions};
use deforce_core::kernels::{
    bracket_weight, kernel_casimir_em, kernel_casimir_scalar, kernel_dilute_scalar, kernel_electrostatic, kernel_power_law,
    kernel_power_law_c, patch_v, patch_z, PatchCorrelation, ZETA3,
};
use deforce_core::profiles::{make_constant, make_cylinder, make_gaussian_bump, make_paraboloid, make_sphere};
use deforce_core::quadrature::integrate_improper;
use deforce_core::{Boundary, InteractionKernel, Planform, QuadratureSpec};

pub const SUITES: &[&str] = &["closed_forms", "scaling", "additivity", "patch", "sei", "blocki", "gamma", "convergence"];

#[derive(Debug, Clone, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub value: f64,
    pub reference: f64,
    /// Relative unless stated in the name.
    pub deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<CheckItem>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub struct Ctx {
    pub spec: QuadratureSpec,
    pub em_kernel: InteractionKernel,
}

type Items = deforce_core::Result<Vec<CheckItem>>;

fn rel(name: &str, value: f64, reference: f64, tolerance: f64) -> CheckItem {
    let deviation = ((value - reference) / reference).abs();
    CheckItem {
        name: name.into(),
        value,
        reference,
        deviation,
        tolerance,
        passed: deviation <= tolerance,
    }
}

fn bound(name: &str, deviation: f64, tolerance: f64) -> CheckItem {
    CheckItem {
        name: name.into(),
        value: deviation,
        reference: 0.0,
        deviation,
        tolerance,
        passed: deviation <= tolerance,
    }
}

fn closed_forms(c: &Ctx) -> Items {
    let s = &c.spec;
    let k = kernel_power_law(1.0, 1.0, 3.0)?;
    let r = eval_de2(&k, &make_paraboloid(1.0, 10.0)?, s)?;
    let e = kernel_electrostatic(1.0, 1.0);
    let disk = make_paraboloid(1.0, 10.0)?.with_planform(Planform::Ball { radius: 30.0 })?;
    let u: f64 = 9.0;
    let da = eval_derjaguin(&kernel_casimir_scalar(Boundary::Dirichlet), 1.0, 100.0, f64::INFINITY, s)?;
    Ok(vec![
        rel("paraboloid F0, p = 3", r.f0.value, 50.0 * PI, 1e-8),
        rel("paraboloid F2, p = 3", r.f2.unwrap().value, 2.0 * PI, 1e-8),
        rel("electrostatic F0 on disk", eval_pfa(&e, &disk, s)?.f0.value, 50.0 * PI * (1.0 + u).ln(), 1e-8),
        rel(
            "Derjaguin energy, Dirichlet, R = 100, d = 1",
            da.energy.value,
            -PI.powi(3) * 100.0 / 1440.0,
            1e-10,
        ),
        rel(
            "bracket integral",
            integrate_improper(bracket_weight, s)?.value,
            -(2.0 / 3.0) * (1.0 + 6.0 * ZETA3),
            1e-6,
        ),
    ])
}

fn scaling(c: &Ctx) -> Items {
    let k = kernel_power_law_c(1.0, 1.0, Some(1.0), 3.0)?;
    let rect = Planform::Rect {
        lo: vec![-10.0, -12.0],
        hi: vec![10.0, 12.0],
    };
    let cases = [
        ("paraboloid", make_paraboloid(1.0, 10.0)?.with_planform(Planform::Ball { radius: 25.0 })?),
        ("gaussian bump", make_gaussian_bump(1.0, 2.0, [3.0, 5.0], rect)?),
        ("cylinder", make_cylinder(0.1, 1.0, 0.9)?),
    ];
    let mut out = Vec::new();
    for (name, p) in &cases {
        let kk = if p.base_dim() == 1 { kernel_power_law(1.0, 1.0, 3.0)? } else { k.clone() };
        let rep = scaling_check(&kk, p, &[0.5, 2.0, 4.0], &c.spec)?;
        let w = rep.worst().unwrap();
        out.push(bound(&format!("{name}: worst term {} at lambda {}", w.term, w.lambda), rep.max_violation, rep.tolerance));
    }
    Ok(out)
}

fn additivity(c: &Ctx) -> Items {
    let parts = [kernel_casimir_scalar(Boundary::Dirichlet), kernel_casimir_scalar(Boundary::Neumann)];
    let profiles = [
        make_sphere(1e-3, 1.0, 0.9)?,
        make_cylinder(1e-3, 1.0, 0.9)?,
        make_constant(1.0, 2, Planform::Ball { radius: 1.0 })?,
    ];
    let rep = additivity_check(&c.em_kernel, &parts, &profiles, &c.spec)?;
    Ok(rep
        .rows
        .iter()
        .map(|r| CheckItem {
            name: format!("{} = D + N on {}", rep.kernel, r.profile),
            value: r.combined.value,
            reference: r.sum_of_parts.value,
            deviation: r.relative_mismatch,
            tolerance: r.allowed,
            passed: r.passed,
        })
        .collect())
}

fn patch(c: &Ctx) -> Items {
    let g = PatchCorrelation::gaussian();
    let xi: f64 = 1e-3;
    let g0 = g.g0();
    Ok(vec![
        rel("v small-xi", patch_v(xi, &g, &c.spec)?.value, -g0 * ZETA3 * xi * xi / (2.0 * PI), 1e-3),
        rel(
            "z small-xi",
            patch_z(xi, &g, &c.spec)?.value,
            -g0 * (1.0 + 6.0 * ZETA3) * xi * xi / (24.0 * PI),
            1e-3,
        ),
        rel("v large-xi", patch_v(1e3, &g, &c.spec)?.value, -2.0, 5e-3),
    ])
}

fn sei(c: &Ctx) -> Items {
    let k = kernel_dilute_scalar(1.0);
    let mut out = Vec::new();
    for (i, (a, r, frac, gap)) in [(0.1, 10.0, 0.9, 0.5), (1.0, 3.0, 0.5, 2.0), (0.01, 1.0, 0.7, 0.05)].into_iter().enumerate() {
        let near = make_sphere(a, r, frac * r)?;
        let top = a + r - (r * r - (frac * r) * (frac * r)).sqrt();
        let far = make_constant(top + gap, 2, near.planform().clone())?;
        let u = eval_sei(&k, &near, &far, &c.spec)?;
        let o = dilute_oracle(1.0, &near, &far, &c.spec)?;
        let allowed = (u.error + o.error).max(1e-12 * o.value.abs()) / o.value.abs();
        out.push(rel(&format!("SEI = dilute oracle, body {}", i + 1), u.value, o.value, allowed));
    }
    let sq = Planform::Rect {
        lo: vec![0.0, 0.0],
        hi: vec![1.0, 1.0],
    };
    let flat = eval_sei(&k, &make_constant(1.0, 2, sq.clone())?, &make_constant(2.0, 2, sq)?, &c.spec)?;
    out.push(rel("constant sheets", flat.value, 1.0 / (64.0 * PI * PI), 1e-12));
    Ok(out)
}

fn blocki(c: &Ctx) -> Items {
    let (r, d) = (100.0, 1.0);
    let k = kernel_casimir_scalar(Boundary::Dirichlet);
    let jac = compute_jacobian(&make_sphere(d, r, 0.9 * r)?, &JacobianOptions::default())?;
    let fit = jac.fit.expect("sphere Jacobian is never degenerate");
    let closed = -PI.powi(3) * r / (720.0 * d.powi(3)) - PI.powi(3) / (1440.0 * d * d);
    Ok(vec![
        rel("J0", fit.j0, 2.0 * PI * r, 0.01),
        rel("J1", fit.j1, -2.0 * PI, 0.01),
        rel("force, linear J", blocki_force(&k, 2.0 * PI * r, -2.0 * PI, d, &c.spec)?, closed, 1e-6),
    ])
}

fn gamma(c: &Ctx) -> Items {
    let opts = FitOptions {
        alt_rho_m_frac: None,
        ..Default::default()
    };
    let pi2 = PI * PI;
    let mut out = Vec::new();
    for (name, bc, family, truth) in [
        ("gamma, Dirichlet sphere", Boundary::Dirichlet, Family::Sphere, 1.0 / 3.0),
        ("gamma, Neumann sphere", Boundary::Neumann, Family::Sphere, 1.0 / 3.0 - 40.0 / pi2),
        ("gamma, Dirichlet cylinder", Boundary::Dirichlet, Family::Cylinder, 7.0 / 36.0),
        ("gamma, Neumann cylinder", Boundary::Neumann, Family::Cylinder, 7.0 / 36.0 - 40.0 / (3.0 * pi2)),
    ] {
        let rep = gamma_fit(&kernel_casimir_scalar(bc), family, &opts, &c.spec)?;
        out.push(rel(name, rep.fit.gamma, truth, 0.01));
    }
    Ok(out)
}

fn convergence(c: &Ctx) -> Items {
    let fine = c.spec.with_rel_tol(c.spec.rel_tol / 2.0);
    let k = kernel_casimir_scalar(Boundary::Dirichlet);
    let p = make_sphere(1e-3, 1.0, 0.9)?;
    let (a, b) = (eval_de2(&k, &p, &c.spec)?.total, eval_de2(&k, &p, &fine)?.total);
    let g = PatchCorrelation::gaussian();
    let (v, w) = (patch_v(1.0, &g, &c.spec)?, patch_v(1.0, &g, &fine)?);
    let shift = |x: f64, y: f64, err: f64| (x - y).abs() / err.max(4.0 * f64::EPSILON * x.abs());
    Ok(vec![
        bound("sphere DE2: shift / reported error", shift(a.value, b.value, a.error), 1.0),
        bound("patch v(1): shift / reported error", shift(v.value, w.value, v.error), 1.0),
    ])
}

pub fn run_suite(name: &str, c: &Ctx) -> SuiteReport {
    let f: fn(&Ctx) -> Items = match name {
        "closed_forms" => closed_forms,
        "scaling" => scaling,
        "additivity" => additivity,
        "patch" => patch,
        "sei" => sei,
        "blocki" => blocki,
        "gamma" => gamma,
        "convergence" => convergence,
        _ => unreachable!("suite names are validated by the caller"),
    };
    match f(c) {
        Ok(checks) => SuiteReport {
            suite: name.into(),
            passed: checks.iter().all(|c| c.passed),
            checks,
            error: None,
        },
        Err(e) => SuiteReport {
            suite: name.into(),
            passed: false,
            checks: Vec::new(),
            error: Some(e.to_string()),
        },
    }
}

pub fn default_em_kernel() -> InteractionKernel {
    kernel_casimir_em()
}
