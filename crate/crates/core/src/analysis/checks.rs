//! Scaling and additivity checks of the functionals.

use serde::{Deserialize, Serialize};

use crate::engine::{eval_de2, eval_de4};
use crate::error::Result;
use crate::kernels::{kernel_casimir_em, kernel_casimir_scalar, Boundary, InteractionKernel};
use crate::profiles::{scale_lateral, SurfaceProfile};
use crate::quadrature::{Estimate, QuadratureSpec};

/// Accepted relative violation of the scaling laws.
pub const SCALING_TOL: f64 = 1e-6;
/// Accepted relative mismatch of additive kernels (on top of quadrature error).
pub const ADDITIVITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub lambda: f64,
    /// "F0", "F2" or "F4"
    pub term: String,
    pub expected_factor: f64,
    pub observed_factor: f64,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub profile: String,
    pub base_dim: usize,
    pub rows: Vec<ScalingRow>,
    pub max_violation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl ScalingReport {
    pub fn worst(&self) -> Option<&ScalingRow> {
        self.rows.iter().max_by(|a, b| a.violation.total_cmp(&b.violation))
    }
}

fn terms(k: &InteractionKernel, p: &SurfaceProfile, spec: &QuadratureSpec) -> Result<Vec<(&'static str, usize, Estimate)>> {
    if k.has_c() {
        let r = eval_de4(k, p, spec)?;
        Ok(vec![("F0", 0, r.f0), ("F2", 1, r.f2.unwrap()), ("F4", 2, r.f4.unwrap())])
    } else {
        let r = eval_de2(k, p, spec)?;
        Ok(vec![("F0", 0, r.f0), ("F2", 1, r.f2.unwrap())])
    }
}

/// Check `F_2k[psi_lambda] = lambda^(2k - n) F_2k[psi]` for every implemented order.
pub fn scaling_check(k: &InteractionKernel, p: &SurfaceProfile, lambdas: &[f64], spec: &QuadratureSpec) -> Result<ScalingReport> {
    let n = p.base_dim() as i32;
    let base = terms(k, p, spec)?;
    let mut rows = Vec::new();
    for &lambda in lambdas {
        let q = scale_lateral(p, lambda)?;
        let scaled = terms(k, &q, spec)?;
        for ((name, order, b), (_, _, s)) in base.iter().zip(&scaled) {
            let expected = lambda.powi(2 * *order as i32 - n);
            let (observed, violation) = if b.value == 0.0 {
                (if s.value == 0.0 { expected } else { f64::NAN }, s.value.abs())
            } else {
                let o = s.value / b.value;
                (o, ((o - expected) / expected).abs())
            };
            rows.push(ScalingRow {
                lambda,
                term: name.to_string(),
                expected_factor: expected,
                observed_factor: observed,
                violation,
            });
        }
    }
    let max_violation = rows.iter().map(|r| r.violation).fold(0.0, f64::max);
    Ok(ScalingReport {
        profile: p.kind().to_string(),
        base_dim: p.base_dim(),
        rows,
        max_violation,
        tolerance: SCALING_TOL,
        passed: max_violation <= SCALING_TOL,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditivityRow {
    pub profile: String,
    pub combined: Estimate,
    pub sum_of_parts: Estimate,
    pub relative_mismatch: f64,
    pub allowed: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditivityReport {
    pub kernel: String,
    pub rows: Vec<AdditivityRow>,
    pub passed: bool,
}

/// `U_DE2[combined] = sum U_DE2[part]` on each profile, within
/// `max(1e-9, combined quadrature error)` relative.
pub fn additivity_check(
    combined: &InteractionKernel,
    parts: &[InteractionKernel],
    profiles: &[SurfaceProfile],
    spec: &QuadratureSpec,
) -> Result<AdditivityReport> {
    let mut rows = Vec::new();
    for p in profiles {
        let c = eval_de2(combined, p, spec)?.total;
        let mut sum = Estimate::exact(0.0);
        for k in parts {
            sum = sum + eval_de2(k, p, spec)?.total;
        }
        let scale = c.value.abs().max(sum.value.abs());
        let mismatch = if scale == 0.0 { 0.0 } else { (c.value - sum.value).abs() / scale };
        let allowed = if scale == 0.0 {
            0.0
        } else {
            ADDITIVITY_TOL.max((c.error + sum.error) / scale)
        };
        rows.push(AdditivityRow {
            profile: p.kind().to_string(),
            combined: c,
            sum_of_parts: sum,
            relative_mismatch: mismatch,
            allowed,
            passed: mismatch <= allowed,
        });
    }
    Ok(AdditivityReport {
        kernel: combined.name().to_string(),
        passed: rows.iter().all(|r| r.passed),
        rows,
    })
}

/// EM = Dirichlet + Neumann at the level of the DE2 functional.
pub fn em_additivity_check(profiles: &[SurfaceProfile], spec: &QuadratureSpec) -> Result<AdditivityReport> {
    additivity_check(
        &kernel_casimir_em(),
        &[kernel_casimir_scalar(Boundary::Dirichlet), kernel_casimir_scalar(Boundary::Neumann)],
        profiles,
        spec,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{kernel_power_law, kernel_power_law_c};
    use crate::profiles::{make_constant, make_cylinder, make_paraboloid, make_sphere, Planform};

    #[test]
    fn paraboloid_scaling_passes() {
        let k = kernel_power_law_c(1.0, 1.0, Some(1.0), 3.0).unwrap();
        let p = make_paraboloid(1.0, 10.0).unwrap().with_planform(Planform::Ball { radius: 20.0 }).unwrap();
        let rep = scaling_check(&k, &p, &[0.5, 2.0, 4.0], &QuadratureSpec::default()).unwrap();
        assert!(rep.passed, "{:?}", rep.worst());
        assert_eq!(rep.rows.len(), 9);
        let f0 = rep.rows.iter().find(|r| r.term == "F0" && r.lambda == 2.0).unwrap();
        assert_eq!(f0.expected_factor, 0.25);
    }

    #[test]
    fn cylinder_f0_scales_inverse_lambda() {
        let k = kernel_power_law(1.0, 1.0, 3.0).unwrap();
        let p = make_cylinder(0.1, 1.0, 0.9).unwrap();
        let rep = scaling_check(&k, &p, &[2.0], &QuadratureSpec::default()).unwrap();
        let f0 = rep.rows.iter().find(|r| r.term == "F0").unwrap();
        assert_eq!(f0.expected_factor, 0.5);
        assert!(rep.passed);
    }

    #[test]
    fn em_additivity_on_sphere_and_plates() {
        let profiles = vec![
            make_sphere(1e-3, 1.0, 0.9).unwrap(),
            make_constant(1.0, 2, Planform::Ball { radius: 1.0 }).unwrap(),
        ];
        let rep = em_additivity_check(&profiles, &QuadratureSpec::default()).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert_eq!(rep.rows[1].relative_mismatch, 0.0);
    }

    #[test]
    fn broken_additivity_is_detected() {
        let broken = kernel_power_law(-2.0 * crate::kernels::CASIMIR, 0.1, 3.0).unwrap();
        let rep = additivity_check(
            &broken,
            &[kernel_casimir_scalar(Boundary::Dirichlet), kernel_casimir_scalar(Boundary::Neumann)],
            &[make_sphere(1e-2, 1.0, 0.9).unwrap()],
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert!(!rep.passed);
    }
}
