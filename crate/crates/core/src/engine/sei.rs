//! Surface element integration for a body bounded by a near sheet `psi1`
//! and a far sheet `psi2` over a common planform, and the exact first-order
//! result of the dilute scalar model used to validate it.

use std::f64::consts::PI;

use parking_lot::Mutex;

use crate::error::{Error, Result};
use crate::kernels::InteractionKernel;
use crate::profiles::{Planform, SurfaceProfile};
use crate::quadrature::{integrate_nd_with_lines, integrate_radial_scaled, Estimate, QuadratureSpec};

fn check_sheets(psi1: &SurfaceProfile, psi2: &SurfaceProfile) -> Result<()> {
    if psi1.base_dim() != psi2.base_dim() {
        return Err(Error::param(
            "sheets",
            format!("base dimensions differ ({} vs {})", psi1.base_dim(), psi2.base_dim()),
        ));
    }
    if psi1.planform() != psi2.planform() {
        return Err(Error::param("sheets", "near and far sheets must share one planform"));
    }
    Ok(())
}

/// `int (E_par(psi1) - E_par(psi2))` over the shared planform; requires
/// `psi1 <= psi2` everywhere.
pub fn eval_sei(
    e_par: &InteractionKernel,
    psi1: &SurfaceProfile,
    psi2: &SurfaceProfile,
    spec: &QuadratureSpec,
) -> Result<Estimate> {
    check_sheets(psi1, psi2)?;
    e_par.check_dim(psi1.base_dim())?;
    spec.validate()?;
    let n = psi1.base_dim();
    let violation: Mutex<Option<(Vec<f64>, f64, f64)>> = Mutex::new(None);
    let body = |x: &[f64], h1: f64, h2: f64| {
        if h1 > h2 * (1.0 + 1e-12) {
            violation.lock().get_or_insert_with(|| (x.to_vec(), h1, h2));
            return f64::NAN;
        }
        if h1 == h2 {
            0.0
        } else {
            e_par.e_par(h1) - e_par.e_par(h2)
        }
    };
    let scale = psi1.feature_length().min(psi2.feature_length());
    let result = if spec.axisymmetric_reduction && psi1.radial_reduction_possible() && psi2.radial_reduction_possible() {
        let rho_max = psi1.planform().extent();
        let g = |rho: f64| {
            let (h1, h2) = (psi1.radial(rho).unwrap().height, psi2.radial(rho).unwrap().height);
            body(&[rho], h1, h2)
        };
        integrate_radial_scaled(g, rho_max, n, scale, spec)
    } else {
        let mut lines = psi1.grid_lines().unwrap_or_default();
        for (k, extra) in psi2.grid_lines().unwrap_or_default().into_iter().enumerate() {
            if k < lines.len() {
                lines[k].extend(extra);
                lines[k].sort_by(f64::total_cmp);
            } else {
                lines.push(extra);
            }
        }
        let g = |x: &[f64]| body(x, psi1.local(x).height, psi2.local(x).height);
        integrate_nd_with_lines(g, &psi1.planform().to_domain(n), scale, &lines, spec)
    };
    if let Some((point, near, far)) = violation.into_inner() {
        return Err(Error::SheetOrder { point, near, far });
    }
    Ok(result?)
}

/// `int 1/psi` over the planform, from closed forms where the shape allows
/// and from nested Cartesian/polar quadrature otherwise (never through the
/// radial reduction used by the functionals).
pub fn inverse_gap_integral(p: &SurfaceProfile, spec: &QuadratureSpec) -> Result<Estimate> {
    let desc = p.descriptor();
    let n = p.base_dim();
    let par = |k: &str| desc.params.get(k).copied().unwrap_or(f64::NAN);
    let radius = match p.planform() {
        Planform::Ball { radius } => Some(*radius),
        Planform::Rect { .. } => None,
    };
    match (desc.kind.as_str(), radius) {
        ("constant", _) => return Ok(Estimate::exact(p.planform().measure(n) / par("a"))),
        ("paraboloid", Some(rm)) if rm.is_infinite() => {
            return Err(Error::param("planform", "integral of 1/psi diverges on the unbounded plane"));
        }
        ("paraboloid", Some(rm)) => {
            let (a, s) = (par("a"), par("sigma"));
            return Ok(Estimate::exact(PI * s * s / a * (rm * rm / (s * s)).ln_1p()));
        }
        ("sphere", Some(rm)) if n == 2 => {
            let (a, r) = (par("a"), par("R"));
            let h_m = a + rm * rm / (r + (r * r - rm * rm).sqrt());
            // with h = psi, rho drho = (R + a - h) dh
            return Ok(Estimate::exact(2.0 * PI * ((r + a) * (h_m / a).ln() - (h_m - a))));
        }
        _ => {}
    }
    if !p.planform().is_bounded() {
        return Err(Error::param("planform", "integral of 1/psi diverges on an unbounded planform"));
    }
    let lines = p.grid_lines().unwrap_or_default();
    Ok(integrate_nd_with_lines(
        |x| 1.0 / p.local(x).height,
        &p.planform().to_domain(n),
        p.feature_length(),
        &lines,
        spec,
    )?)
}

/// First-order dilute result `(lambda_R / 32 pi^2) int (1/psi1 - 1/psi2)`.
pub fn dilute_oracle(lambda_r: f64, psi1: &SurfaceProfile, psi2: &SurfaceProfile, spec: &QuadratureSpec) -> Result<Estimate> {
    check_sheets(psi1, psi2)?;
    if lambda_r == 0.0 {
        return Ok(Estimate::exact(0.0));
    }
    let i1 = inverse_gap_integral(psi1, spec)?;
    let i2 = inverse_gap_integral(psi2, spec)?;
    Ok((i1 - i2) * (lambda_r / (32.0 * PI * PI)))
}
