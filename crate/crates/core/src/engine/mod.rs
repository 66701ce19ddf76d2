//! Surface functionals: PFA (order 0), the derivative expansion to second
//! order, and the `|grad psi|^4 + 2 (d_i d_j psi)^2` fourth-order structure.
//!
//! Axisymmetric profiles on disk planforms are reduced to one radial
//! integral; everything else goes through nested multi-dimensional quadrature.

mod compare;
mod derjaguin;
mod jacobian;
mod sei;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{InteractionKernel, KernelDescriptor};
use crate::profiles::{Planform, ProfileDescriptor, SurfaceProfile};
use crate::quadrature::{integrate_nd_with_lines, integrate_radial_scaled, Estimate, QuadratureSpec};

pub use compare::{compare_methods, Comparison, MethodRow};
pub use derjaguin::{effective_radius, eval_derjaguin, DerjaguinResult};
pub use jacobian::{
    blocki_energy, blocki_force, compute_jacobian, eval_blocki_force, uniform_edges, JacobianFit, JacobianOptions,
    JacobianProfile,
};
pub use sei::{dilute_oracle, eval_sei, inverse_gap_integral};

/// Version of the serialized result layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultMeta {
    pub kernel: KernelDescriptor,
    pub profile: ProfileDescriptor,
    /// Planform radius for disk/strip planforms.
    pub rho_m: Option<f64>,
    pub spec: QuadratureSpec,
}

/// Values of the functional terms; energies per unit length for one-dimensional bases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalResult {
    pub schema_version: u32,
    pub f0: Estimate,
    pub f2: Option<Estimate>,
    /// The `C(psi)` fourth-order structure only; the other fourth-order
    /// terms have no known coefficients.
    pub f4: Option<Estimate>,
    pub partial_fourth_order: bool,
    pub total: Estimate,
    pub meta: ResultMeta,
}

impl FunctionalResult {
    fn new(k: &InteractionKernel, p: &SurfaceProfile, spec: &QuadratureSpec, f0: Estimate, f2: Option<Estimate>, f4: Option<Estimate>) -> Self {
        let mut total = f0;
        if let Some(e) = f2 {
            total = total + e;
        }
        if let Some(e) = f4 {
            total = total + e;
        }
        let rho_m = match p.planform() {
            Planform::Ball { radius } => Some(*radius),
            Planform::Rect { .. } => None,
        };
        Self {
            schema_version: SCHEMA_VERSION,
            f0,
            f2,
            f4,
            partial_fourth_order: f4.is_some(),
            total,
            meta: ResultMeta {
                kernel: k.descriptor(),
                profile: p.descriptor(),
                rho_m,
                spec: *spec,
            },
        }
    }
}

/// Local quantities handed to functional integrands.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Sample {
    pub height: f64,
    pub grad_sq: f64,
    pub hess_sq: Option<f64>,
}

/// `int d^n x f(sample(x))` over the planform of `p`.
pub(crate) fn integrate_profile<F>(p: &SurfaceProfile, spec: &QuadratureSpec, f: F) -> Result<Estimate>
where
    F: Fn(Sample) -> f64 + Sync,
{
    spec.validate()?;
    let n = p.base_dim();
    let scale = p.feature_length();
    if spec.axisymmetric_reduction && p.radial_reduction_possible() {
        let rho_max = p.planform().extent();
        let g = |rho: f64| {
            let r = p.radial(rho).expect("axisymmetric profile");
            f(Sample {
                height: r.height,
                grad_sq: r.grad_sq(),
                hess_sq: Some(r.hessian_sq(rho, n)),
            })
        };
        Ok(integrate_radial_scaled(g, rho_max, n, scale, spec)?)
    } else {
        let domain = p.planform().to_domain(n);
        let lines = p.grid_lines().unwrap_or_default();
        let g = |x: &[f64]| {
            let l = p.local(x);
            f(Sample {
                height: l.height,
                grad_sq: l.grad_sq(),
                hess_sq: l.hessian_sq(),
            })
        };
        Ok(integrate_nd_with_lines(g, &domain, scale, &lines, spec)?)
    }
}

fn f0_term(k: &InteractionKernel, p: &SurfaceProfile, spec: &QuadratureSpec) -> Result<Estimate> {
    integrate_profile(p, spec, |s| k.v(s.height))
}

fn f2_term(k: &InteractionKernel, p: &SurfaceProfile, spec: &QuadratureSpec) -> Result<Estimate> {
    integrate_profile(p, spec, |s| if s.grad_sq == 0.0 { 0.0 } else { k.z(s.height) * s.grad_sq })
}

/// Zeroth order: `F0 = int V(psi)`.
pub fn eval_pfa(k: &InteractionKernel, p: &SurfaceProfile, spec: &QuadratureSpec) -> Result<FunctionalResult> {
    k.check_dim(p.base_dim())?;
    let f0 = f0_term(k, p, spec)?;
    Ok(FunctionalResult::new(k, p, spec, f0, None, None))
}

/// Second order: `F0 + F2`, `F2 = int Z(psi) |grad psi|^2`.
pub fn eval_de2(k: &InteractionKernel, p: &SurfaceProfile, spec: &QuadratureSpec) -> Result<FunctionalResult> {
    k.check_dim(p.base_dim())?;
    let (f0, f2) = rayon::join(|| f0_term(k, p, spec), || f2_term(k, p, spec));
    Ok(FunctionalResult::new(k, p, spec, f0?, Some(f2?), None))
}

fn require_hessian(p: &SurfaceProfile) -> Result<()> {
    let probe: Vec<f64> = match p.planform() {
        Planform::Ball { .. } => vec![0.0; p.base_dim()],
        Planform::Rect { lo, hi } => lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect(),
    };
    if p.local(&probe).hessian.is_none() {
        return Err(Error::Unsupported(format!(
            "profile `{}` provides no second derivatives (gridded data needs at least 4 nodes per axis)",
            p.kind()
        )));
    }
    Ok(())
}

/// `F^(4,2) = (1/8) int C(psi) [ |grad psi|^4 + 2 sum_ij (d_i d_j psi)^2 ]`.
pub fn eval_de4_term<C>(c: C, p: &SurfaceProfile, spec: &QuadratureSpec) -> Result<Estimate>
where
    C: Fn(f64) -> f64 + Sync,
{
    require_hessian(p)?;
    let e = integrate_profile(p, spec, |s| {
        let h2 = s.hess_sq.unwrap_or(f64::NAN);
        let w = s.grad_sq * s.grad_sq + 2.0 * h2;
        if w == 0.0 {
            0.0
        } else {
            c(s.height) * w
        }
    })?;
    Ok(e * 0.125)
}

/// `F0 + F2 + F^(4,2)` for kernels carrying a fourth-order coefficient.
pub fn eval_de4(k: &InteractionKernel, p: &SurfaceProfile, spec: &QuadratureSpec) -> Result<FunctionalResult> {
    k.check_dim(p.base_dim())?;
    if !k.has_c() {
        return Err(Error::Unsupported(format!("kernel `{}` has no fourth-order coefficient", k.name())));
    }
    let ((f0, f2), f4) = rayon::join(
        || rayon::join(|| f0_term(k, p, spec), || f2_term(k, p, spec)),
        || eval_de4_term(|psi| k.c(psi).unwrap_or(f64::NAN), p, spec),
    );
    Ok(FunctionalResult::new(k, p, spec, f0?, Some(f2?), Some(f4?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{kernel_casimir_scalar, kernel_electrostatic, kernel_power_law, kernel_power_law_c, Boundary};
    use crate::profiles::{make_constant, make_gaussian_bump, make_grid, make_paraboloid, make_sphere, scale_lateral, GridData};
    use std::f64::consts::PI;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn paraboloid_closed_forms() {
        let p = make_paraboloid(1.0, 10.0).unwrap();
        let k = kernel_power_law(1.0, 1.0, 3.0).unwrap();
        let r = eval_de2(&k, &p, &spec()).unwrap();
        assert!(rel(r.f0.value, PI / 2.0 * 100.0) < 1e-9, "{}", r.f0.value);
        assert!(rel(r.f2.unwrap().value, 2.0 * PI) < 1e-9);
        assert!(rel(r.total.value, PI / 2.0 * 100.0 + 2.0 * PI) < 1e-9);
        assert_eq!(r.schema_version, SCHEMA_VERSION);
    }

    #[test]
    fn constant_profile_is_parallel_plates() {
        let p = make_constant(2.0, 2, Planform::Rect { lo: vec![0.0, 0.0], hi: vec![2.0, 3.0] }).unwrap();
        let k = kernel_casimir_scalar(Boundary::Dirichlet);
        let r = eval_de2(&k, &p, &spec()).unwrap();
        assert!(rel(r.f0.value, 6.0 * k.v(2.0)) < 1e-13);
        assert_eq!(r.f2.unwrap().value, 0.0);
        let c = eval_de4_term(|psi| 1.0 / psi, &p, &spec()).unwrap();
        assert_eq!(c.value, 0.0);
    }

    #[test]
    fn radial_and_nd_paths_agree() {
        let p = make_sphere(0.1, 1.0, 0.9).unwrap();
        let k = kernel_casimir_scalar(Boundary::Neumann);
        let a = eval_de2(&k, &p, &spec()).unwrap();
        let nd = QuadratureSpec {
            axisymmetric_reduction: false,
            rel_tol: 1e-9,
            ..spec()
        };
        let b = eval_de2(&k, &p, &nd).unwrap();
        assert!(rel(a.f0.value, b.f0.value) < 1e-8);
        assert!(rel(a.f2.unwrap().value, b.f2.unwrap().value) < 1e-8);
    }

    #[test]
    fn fourth_order_paraboloid_closed_form() {
        // C = 1/psi^3 on the disk rho <= 10, a = 1, sigma = 10
        let (a, s, rm) = (1.0f64, 10.0f64, 10.0f64);
        let p = make_paraboloid(a, s).unwrap().with_planform(Planform::Ball { radius: rm }).unwrap();
        let u = rm * rm / (s * s);
        let t1 = 16.0 * PI * a / (s * s) * ((1.0 + u).ln() + 2.0 / (1.0 + u) - 0.5 / (1.0 + u).powi(2) - 1.5);
        let t2 = 16.0 * PI / (a * s * s) * 0.5 * (1.0 - 1.0 / (1.0 + u).powi(2));
        let truth = (t1 + t2) / 8.0;
        let got = eval_de4_term(|psi| psi.powi(-3), &p, &spec()).unwrap();
        assert!(rel(got.value, truth) < 1e-9, "{} vs {truth}", got.value);
    }

    #[test]
    fn de4_needs_c_and_hessian() {
        let p = make_paraboloid(1.0, 10.0).unwrap();
        let k = kernel_casimir_scalar(Boundary::Dirichlet);
        assert!(matches!(eval_de4(&k, &p, &spec()), Err(Error::Unsupported(_))));
        let kc = kernel_power_law_c(1.0, 1.0, Some(1.0), 5.0).unwrap();
        let r = eval_de4(&kc, &p, &spec()).unwrap();
        assert!(r.partial_fourth_order && r.f4.is_some());

        let mut csv = String::from("# spacing: 0.5\nx1,x2,psi\n");
        for j in 0..5 {
            for i in 0..3 {
                csv.push_str(&format!("{},{},1.5\n", i as f64 * 0.5, j as f64 * 0.5));
            }
        }
        let g = make_grid(GridData::from_csv(csv.as_bytes()).unwrap()).unwrap();
        assert!(matches!(eval_de4_term(|_| 1.0, &g, &spec()), Err(Error::Unsupported(_))));
        // the second-order functional still works on it
        let r = eval_de2(&k, &g, &spec()).unwrap();
        assert!(rel(r.f0.value, 2.0 * k.v(1.5)) < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = crate::profiles::make_sphere_nd(1.0, 10.0, 9.0, 3).unwrap();
        let k = kernel_casimir_scalar(Boundary::Dirichlet);
        assert!(matches!(eval_pfa(&k, &p, &spec()), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn scaling_of_terms() {
        let k = kernel_power_law_c(-1.0, 0.7, Some(0.3), 3.0).unwrap();
        let base = make_gaussian_bump(1.0, 2.0, [1.0, 1.5], Planform::Ball { radius: 3.0 }).unwrap();
        let r0 = eval_de4(&k, &base, &spec()).unwrap();
        for lambda in [0.5, 2.0, 4.0] {
            let q = scale_lateral(&base, lambda).unwrap();
            let r = eval_de4(&k, &q, &spec()).unwrap();
            assert!(rel(r.f0.value, r0.f0.value / (lambda * lambda)) < 1e-8);
            assert!(rel(r.f2.unwrap().value, r0.f2.unwrap().value) < 1e-8);
            assert!(rel(r.f4.unwrap().value, r0.f4.unwrap().value * lambda * lambda) < 1e-6);
        }
    }

    #[test]
    fn electrostatic_f2_fraction_vanishes_for_small_gaps() {
        let k = kernel_electrostatic(1.0, 1.0);
        let mut last = f64::INFINITY;
        for a in [1e-1, 1e-2, 1e-3] {
            let p = make_sphere(a, 1.0, 0.9).unwrap();
            let r = eval_de2(&k, &p, &spec()).unwrap();
            let frac = (r.f2.unwrap().value / r.f0.value).abs();
            // F0 only grows like ln(R/a) for a 1/psi density, so the decay is slow
            assert!(frac < 0.9 * last, "{frac} {last}");
            last = frac;
        }
    }

    #[test]
    fn nonfinite_integrand_aborts_with_location() {
        let p = make_paraboloid(1.0, 1.0).unwrap().with_planform(Planform::Ball { radius: 2.0 }).unwrap();
        let k = kernel_power_law(1.0, 0.0, 1.0).unwrap();
        let bad = crate::kernels::kernel_sum("bad", vec![k]);
        // a kernel poisoned above psi = 3
        let err = integrate_profile(&p, &spec(), |s| if s.height > 3.0 { f64::NAN } else { bad.v(s.height) }).unwrap_err();
        assert!(matches!(err, Error::Quadrature(crate::quadrature::QuadError::NonFinite { .. })));
    }
}
