use serde::{Deserialize, Serialize};

use super::{
    blocki_energy, compute_jacobian, eval_de2, eval_derjaguin, eval_sei, JacobianOptions, JacobianProfile,
};
use crate::error::Result;
use crate::kernels::InteractionKernel;
use crate::profiles::SurfaceProfile;
use crate::quadrature::{Estimate, QuadratureSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: String,
    pub energy: Estimate,
    /// Force where the method defines one directly.
    pub force: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<MethodRow>,
    /// `ratios[i][j] = energy_i / energy_j`.
    pub ratios: Vec<Vec<f64>>,
    /// Methods skipped and why.
    pub skipped: Vec<(String, String)>,
}

impl Comparison {
    pub fn energy(&self, method: &str) -> Option<Estimate> {
        self.rows.iter().find(|r| r.method == method).map(|r| r.energy)
    }
}

/// Evaluate every applicable method on one profile: PFA, DE2, Derjaguin
/// (needs an apex radius), Blocki's linearized Jacobian (needs a
/// non-degenerate Jacobian) and SEI (when a far sheet is given).
pub fn compare_methods(
    k: &InteractionKernel,
    p: &SurfaceProfile,
    far_sheet: Option<&SurfaceProfile>,
    spec: &QuadratureSpec,
) -> Result<Comparison> {
    let de = eval_de2(k, p, spec)?;
    let mut rows = vec![
        MethodRow {
            method: "pfa".into(),
            energy: de.f0,
            force: None,
        },
        MethodRow {
            method: "de2".into(),
            energy: de.total,
            force: None,
        },
    ];
    let mut skipped = Vec::new();

    match (p.closest_distance(), p.apex_radius()) {
        (Some(a), Some(r)) => match eval_derjaguin(k, a, r, f64::INFINITY, spec) {
            Ok(da) => rows.push(MethodRow {
                method: "derjaguin".into(),
                energy: da.energy,
                force: Some(da.force),
            }),
            Err(e) => skipped.push(("derjaguin".into(), e.to_string())),
        },
        _ => skipped.push(("derjaguin".into(), "profile has no apex radius".into())),
    }

    let jac: Result<JacobianProfile> = compute_jacobian(p, &JacobianOptions::default());
    match jac {
        Ok(j) if !j.degenerate => {
            let fit = j.fit.expect("non-degenerate Jacobian carries a fit");
            let energy = blocki_energy(k, fit.j0, fit.j1, j.d, spec);
            let force = super::blocki_force(k, fit.j0, fit.j1, j.d, spec);
            match (energy, force) {
                (Ok(e), Ok(f)) => rows.push(MethodRow {
                    method: "blocki".into(),
                    energy: e,
                    force: Some(f),
                }),
                (Err(e), _) | (_, Err(e)) => skipped.push(("blocki".into(), e.to_string())),
            }
        }
        Ok(_) => skipped.push(("blocki".into(), "degenerate Jacobian (flat profile)".into())),
        Err(e) => skipped.push(("blocki".into(), e.to_string())),
    }

    if let Some(far) = far_sheet {
        rows.push(MethodRow {
            method: "sei".into(),
            energy: eval_sei(k, p, far, spec)?,
            force: None,
        });
    }

    let ratios = rows
        .iter()
        .map(|a| rows.iter().map(|b| a.energy.value / b.energy.value).collect())
        .collect();
    Ok(Comparison { rows, ratios, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{kernel_casimir_scalar, kernel_power_law, Boundary};
    use crate::profiles::{make_constant, make_paraboloid, make_sphere, Planform};
    use std::f64::consts::PI;

    #[test]
    fn sphere_de2_over_da() {
        let k = kernel_casimir_scalar(Boundary::Dirichlet);
        let p = make_sphere(1e-3, 1.0, 0.9).unwrap();
        let c = compare_methods(&k, &p, None, &QuadratureSpec::default()).unwrap();
        let ratio = c.energy("de2").unwrap().value / c.energy("derjaguin").unwrap().value - 1.0;
        // (1/3) a/R plus the O(a/R) PFA-vs-DA curvature difference
        assert!(ratio > 0.0 && ratio < 1e-3, "{ratio}");
        assert!(c.rows.iter().any(|r| r.method == "blocki"));
    }

    #[test]
    fn paraboloid_pfa_is_closed_form() {
        let k = kernel_power_law(1.0, 1.0, 3.0).unwrap();
        let p = make_paraboloid(1.0, 10.0).unwrap();
        let c = compare_methods(&k, &p, None, &QuadratureSpec::default()).unwrap();
        assert!((c.energy("pfa").unwrap().value / (50.0 * PI) - 1.0).abs() < 1e-9);
        // osculating paraboloid: PFA over the full plane equals the Derjaguin energy
        assert!((c.energy("pfa").unwrap().value / c.energy("derjaguin").unwrap().value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn constant_profile_methods_agree() {
        let k = kernel_casimir_scalar(Boundary::Dirichlet);
        let plan = Planform::Ball { radius: 1.0 };
        let p = make_constant(2.0, 2, plan.clone()).unwrap();
        let far = make_constant(1e8, 2, plan).unwrap();
        let c = compare_methods(&k, &p, Some(&far), &QuadratureSpec::default()).unwrap();
        let truth = PI * k.v(2.0);
        for r in &c.rows {
            assert!((r.energy.value / truth - 1.0).abs() < 1e-12, "{}", r.method);
        }
        assert_eq!(c.skipped.len(), 2);
    }
}
