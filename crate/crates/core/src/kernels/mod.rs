//! Interaction densities `V(psi)`, `Z(psi)` (and optionally `C(psi)`).
//!
//! `V` is also the parallel-plate density `E_par(h)`. Built-in kernels are
//! power laws in the gap, sums of kernels (EM = Dirichlet + Neumann) or the
//! numerically integrated patch-potential kernels.

mod patch;
mod pchip;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{semi_infinite_with, Estimate, QuadratureSpec};

pub use patch::{bracket_weight, patch_v, patch_z, PatchCorrelation, PatchKernel, NORMALIZATION, NORMALIZATION_TOL};
pub use pchip::Pchip;

pub const ZETA3: f64 = 1.202_056_903_159_594_2;
pub const ZETA5: f64 = 1.036_927_755_143_369_9;

/// `pi^2 / 1440`, the scalar Casimir plate coefficient.
pub const CASIMIR: f64 = PI * PI / 1440.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Dirichlet,
    Neumann,
}

impl Boundary {
    /// `(alpha, beta)` in `V = -(pi^2/1440) alpha / psi^3`, `Z = -(pi^2/1440) beta / psi^3`.
    pub fn coefficients(self) -> (f64, f64) {
        match self {
            Boundary::Dirichlet => (1.0, 2.0 / 3.0),
            Boundary::Neumann => (1.0, 2.0 / 3.0 * (1.0 - 30.0 / (PI * PI))),
        }
    }
}

/// `V = v0 / psi^p`, `Z = z0 / psi^p`, `C = c0 / psi^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub v0: f64,
    pub z0: f64,
    pub c0: Option<f64>,
    pub p: f64,
}

#[derive(Debug, Clone)]
enum Form {
    Power(PowerLaw),
    Sum(Vec<InteractionKernel>),
    Patch(Arc<PatchKernel>),
}

#[derive(Debug, Clone)]
pub struct InteractionKernel {
    name: String,
    base_dim: usize,
    form: Form,
    params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelDescriptor {
    pub name: String,
    pub base_dim: usize,
    pub params: BTreeMap<String, f64>,
}

fn power(name: &str, base_dim: usize, law: PowerLaw, params: &[(&str, f64)]) -> InteractionKernel {
    InteractionKernel {
        name: name.to_string(),
        base_dim,
        form: Form::Power(law),
        params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
    }
}

/// Scalar Casimir kernel at zero temperature (d = 3) with the given boundary condition.
pub fn kernel_casimir_scalar(bc: Boundary) -> InteractionKernel {
    let (alpha, beta) = bc.coefficients();
    let name = match bc {
        Boundary::Dirichlet => "casimir_dirichlet",
        Boundary::Neumann => "casimir_neumann",
    };
    power(
        name,
        2,
        PowerLaw {
            v0: -CASIMIR * alpha,
            z0: -CASIMIR * beta,
            c0: None,
            p: 3.0,
        },
        &[("alpha", alpha), ("beta", beta)],
    )
}

/// Electromagnetic Casimir kernel for perfect conductors, the pointwise sum
/// of the Dirichlet and Neumann kernels.
pub fn kernel_casimir_em() -> InteractionKernel {
    kernel_sum(
        "casimir_em",
        vec![kernel_casimir_scalar(Boundary::Dirichlet), kernel_casimir_scalar(Boundary::Neumann)],
    )
}

/// Pointwise sum of kernels. Valid on the smallest base dimension of its parts.
pub fn kernel_sum(name: &str, parts: Vec<InteractionKernel>) -> InteractionKernel {
    let base_dim = parts.iter().map(|k| k.base_dim).min().unwrap_or(usize::MAX);
    InteractionKernel {
        name: name.to_string(),
        base_dim,
        form: Form::Sum(parts),
        params: BTreeMap::new(),
    }
}

/// Plates held at a potential difference `V0`: `V = eps0 V0^2 / (2 psi)`, `Z = V / 3`.
pub fn kernel_electrostatic(v0: f64, eps0: f64) -> InteractionKernel {
    let e = 0.5 * eps0 * v0 * v0;
    power(
        "electrostatic",
        2,
        PowerLaw {
            v0: e,
            z0: e / 3.0,
            c0: None,
            p: 1.0,
        },
        &[("V0", v0), ("eps0", eps0)],
    )
}

/// High-temperature Dirichlet free-energy kernel. `n = 2` is the d = 3
/// case with its `1/psi^2` densities; `n = 3` reduces to the zero-temperature
/// d = 3 coefficients times `1/beta`.
pub fn kernel_hight_dirichlet(beta: f64, n: usize) -> Result<InteractionKernel> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::param("beta", format!("inverse temperature must be positive, got {beta}")));
    }
    match n {
        2 => {
            let v0 = -ZETA3 / (16.0 * PI * beta);
            Ok(power(
                "hight_dirichlet_n2",
                2,
                PowerLaw {
                    v0,
                    z0: v0 * (1.0 + 6.0 * ZETA3) / (12.0 * ZETA3),
                    c0: None,
                    p: 2.0,
                },
                &[("beta", beta)],
            ))
        }
        3 => {
            let (alpha, b) = Boundary::Dirichlet.coefficients();
            Ok(power(
                "hight_dirichlet_n3",
                3,
                PowerLaw {
                    v0: -CASIMIR * alpha / beta,
                    z0: -CASIMIR * b / beta,
                    c0: None,
                    p: 3.0,
                },
                &[("beta", beta)],
            ))
        }
        _ => Err(Error::Unsupported(format!(
            "high-temperature Dirichlet kernel is only available for base dimension 2 or 3, not {n}"
        ))),
    }
}

/// Generic power-law kernel, valid in any base dimension.
pub fn kernel_power_law(v0: f64, z0: f64, p: f64) -> Result<InteractionKernel> {
    kernel_power_law_c(v0, z0, None, p)
}

/// Power-law kernel with an optional fourth-order coefficient `c0`.
pub fn kernel_power_law_c(v0: f64, z0: f64, c0: Option<f64>, p: f64) -> Result<InteractionKernel> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::param("p", format!("exponent must be positive, got {p}")));
    }
    if !v0.is_finite() || !z0.is_finite() || c0.is_some_and(|c| !c.is_finite()) {
        return Err(Error::param("v0", "coefficients must be finite"));
    }
    let mut params = vec![("v0", v0), ("z0", z0), ("p", p)];
    if let Some(c) = c0 {
        params.push(("c0", c));
    }
    Ok(power("power_law", 3, PowerLaw { v0, z0, c0, p }, &params))
}

/// Parallel-plate density of the dilute scalar model, `E_par = lambda_R / (32 pi^2 h)`.
pub fn kernel_dilute_scalar(lambda_r: f64) -> InteractionKernel {
    let v0 = lambda_r / (32.0 * PI * PI);
    power(
        "dilute_scalar",
        2,
        PowerLaw {
            v0,
            z0: 0.0,
            c0: None,
            p: 1.0,
        },
        &[("lambda_R", lambda_r)],
    )
}

/// Random patch potentials with correlation `corr`, rms voltage `V_rms`
/// and correlation length `ell`: `V = eps0 V_rms^2 v(ell/psi) / psi`.
pub fn kernel_patch(corr: PatchCorrelation, v_rms: f64, ell: f64, eps0: f64) -> Result<InteractionKernel> {
    if !(ell > 0.0 && ell.is_finite()) {
        return Err(Error::param("ell", format!("correlation length must be positive, got {ell}")));
    }
    let mut params = BTreeMap::new();
    params.insert("V_rms".to_string(), v_rms);
    params.insert("ell".to_string(), ell);
    params.insert("eps0".to_string(), eps0);
    params.insert("g0".to_string(), corr.g0());
    let name = format!("patch_{}", corr.name());
    Ok(InteractionKernel {
        name,
        base_dim: 2,
        form: Form::Patch(Arc::new(PatchKernel::new(corr, v_rms, ell, eps0)?)),
        params,
    })
}

impl InteractionKernel {
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Largest base dimension the kernel is valid for.
    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn renamed(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn check_dim(&self, profile_dim: usize) -> Result<()> {
        if profile_dim > self.base_dim {
            return Err(Error::DimensionMismatch {
                kernel: self.name.clone(),
                kernel_dim: self.base_dim,
                profile_dim,
            });
        }
        Ok(())
    }

    pub fn v(&self, psi: f64) -> f64 {
        match &self.form {
            Form::Power(l) => l.v0 * psi.powf(-l.p),
            Form::Sum(parts) => parts.iter().map(|k| k.v(psi)).sum(),
            Form::Patch(pk) => pk.v(psi),
        }
    }

    pub fn z(&self, psi: f64) -> f64 {
        match &self.form {
            Form::Power(l) => l.z0 * psi.powf(-l.p),
            Form::Sum(parts) => parts.iter().map(|k| k.z(psi)).sum(),
            Form::Patch(pk) => pk.z(psi),
        }
    }

    /// Parallel-plate energy density.
    pub fn e_par(&self, h: f64) -> f64 {
        self.v(h)
    }

    pub fn has_c(&self) -> bool {
        match &self.form {
            Form::Power(l) => l.c0.is_some(),
            Form::Sum(parts) => !parts.is_empty() && parts.iter().all(|k| k.has_c()),
            Form::Patch(_) => false,
        }
    }

    /// Fourth-order coefficient, when the kernel carries one.
    pub fn c(&self, psi: f64) -> Option<f64> {
        match &self.form {
            Form::Power(l) => l.c0.map(|c| c * psi.powf(-l.p)),
            Form::Sum(parts) => parts.iter().map(|k| k.c(psi)).sum(),
            Form::Patch(_) => None,
        }
    }

    /// Single power law equivalent to this kernel, if there is one.
    pub fn power_law(&self) -> Option<PowerLaw> {
        match &self.form {
            Form::Power(l) => Some(*l),
            Form::Sum(parts) => {
                let laws: Option<Vec<PowerLaw>> = parts.iter().map(|k| k.power_law()).collect();
                let laws = laws?;
                let p = laws.first()?.p;
                if laws.iter().any(|l| l.p != p) {
                    return None;
                }
                let c0 = if laws.iter().all(|l| l.c0.is_some()) {
                    Some(laws.iter().map(|l| l.c0.unwrap()).sum())
                } else {
                    None
                };
                Some(PowerLaw {
                    v0: laws.iter().map(|l| l.v0).sum(),
                    z0: laws.iter().map(|l| l.z0).sum(),
                    c0,
                    p,
                })
            }
            Form::Patch(_) => None,
        }
    }

    pub fn patch(&self) -> Option<&PatchKernel> {
        match &self.form {
            Form::Patch(pk) => Some(pk),
            _ => None,
        }
    }

    /// `int_d^inf E_par(h) dh`: closed form for power laws, quadrature otherwise.
    pub fn tail_integral(&self, d: f64, spec: &QuadratureSpec) -> Result<Estimate> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::param("d", format!("distance must be positive, got {d}")));
        }
        match &self.form {
            Form::Power(l) => {
                if l.v0 == 0.0 {
                    Ok(Estimate::exact(0.0))
                } else if l.p <= 1.0 {
                    Err(Error::DivergentTail { exponent: l.p })
                } else {
                    Ok(Estimate::exact(l.v0 * d.powf(1.0 - l.p) / (l.p - 1.0)))
                }
            }
            Form::Sum(parts) => {
                let mut acc = Estimate::exact(0.0);
                for k in parts {
                    acc = acc + k.tail_integral(d, spec)?;
                }
                Ok(acc)
            }
            Form::Patch(pk) => {
                // E_par ~ 1/h^3 at large h, so the mapped integrand is regular
                let f = |h: f64| Ok(Estimate::exact(pk.v(h)));
                let hints = [pk.ell, 10.0 * pk.ell];
                Ok(semi_infinite_with(&f, d, d, &hints, spec)?)
            }
        }
    }

    pub fn descriptor(&self) -> KernelDescriptor {
        let mut params = self.params.clone();
        if let Form::Sum(parts) = &self.form {
            for (i, k) in parts.iter().enumerate() {
                params.insert(format!("part{i}.{}", k.name), 1.0);
                for (key, v) in &k.params {
                    params.insert(format!("part{i}.{key}"), *v);
                }
            }
        }
        KernelDescriptor {
            name: self.name.clone(),
            base_dim: self.base_dim,
            params,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn casimir_values() {
        let d = kernel_casimir_scalar(Boundary::Dirichlet);
        assert!(rel(d.v(1.0), -6.85389e-3) < 1e-5);
        assert!(rel(d.v(2.0), -8.56737e-4) < 1e-5);
        let n = kernel_casimir_scalar(Boundary::Neumann);
        assert!(rel(n.coefficients_beta(), -1.359_757) < 1e-6);
        // -(pi^2/1440) (2/3)(1 - 30/pi^2)
        assert!(rel(n.z(1.0), 9.319_627_592e-3) < 1e-9);
        assert!(n.z(1.0) > 0.0);
    }

    impl InteractionKernel {
        fn coefficients_beta(&self) -> f64 {
            self.params["beta"]
        }
    }

    #[test]
    fn em_is_the_sum() {
        let em = kernel_casimir_em();
        assert!(rel(em.v(1.0), -1.37078e-2) < 1e-5);
        let law = em.power_law().unwrap();
        assert_eq!(law.p, 3.0);
        assert!(rel(law.v0, -2.0 * CASIMIR) < 1e-15);
        assert!(em.v(1e9).abs() < 1e-28);
    }

    #[test]
    fn electrostatic_values() {
        let k = kernel_electrostatic(1.0, 1.0);
        assert_eq!(k.v(1.0), 0.5);
        assert!(rel(k.z(1.0), 1.0 / 6.0) < 1e-15);
        assert_eq!(k.v(2.0), 0.25);
        assert!(matches!(k.tail_integral(1.0, &QuadratureSpec::default()), Err(Error::DivergentTail { .. })));
    }

    #[test]
    fn hight_values() {
        let k = kernel_hight_dirichlet(1.0, 2).unwrap();
        assert!(rel(k.v(1.0), -ZETA3 / (16.0 * PI)) < 1e-15);
        assert!(rel(k.v(1.0), -2.391_416e-2) < 1e-6);
        assert!(rel(k.z(3.0) / k.v(3.0), 0.569_325_614) < 1e-8);
        let k3 = kernel_hight_dirichlet(1.0, 3).unwrap();
        assert!(rel(k3.v(1.0), -CASIMIR) < 1e-15);
        assert!(matches!(kernel_hight_dirichlet(1.0, 4), Err(Error::Unsupported(_))));
        assert!(matches!(kernel_hight_dirichlet(1.0, 1), Err(Error::Unsupported(_))));
    }

    #[test]
    fn power_law_matches_builtins() {
        let v0 = -CASIMIR;
        let g = kernel_power_law(v0, 2.0 / 3.0 * v0, 3.0).unwrap();
        let d = kernel_casimir_scalar(Boundary::Dirichlet);
        let e = kernel_power_law(0.5, 1.0 / 6.0, 1.0).unwrap();
        let es = kernel_electrostatic(1.0, 1.0);
        for psi in [0.3, 1.0, 7.5] {
            assert!(rel(g.v(psi), d.v(psi)) < 1e-15 && rel(g.z(psi), d.z(psi)) < 1e-15);
            assert!(rel(e.v(psi), es.v(psi)) < 1e-15 && rel(e.z(psi), es.z(psi)) < 1e-15);
        }
        assert!(kernel_power_law(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn tail_integrals() {
        let d = kernel_casimir_scalar(Boundary::Dirichlet);
        let t = d.tail_integral(1.0, &QuadratureSpec::default()).unwrap();
        assert!(rel(t.value, -CASIMIR / 2.0) < 1e-15);
        let zero = kernel_power_law(0.0, 0.0, 0.5).unwrap();
        assert_eq!(zero.tail_integral(1.0, &QuadratureSpec::default()).unwrap().value, 0.0);
    }

    #[test]
    fn dimension_validity() {
        let d = kernel_casimir_scalar(Boundary::Dirichlet);
        assert!(d.check_dim(1).is_ok() && d.check_dim(2).is_ok());
        assert!(matches!(d.check_dim(3), Err(Error::DimensionMismatch { .. })));
        assert!(kernel_hight_dirichlet(1.0, 3).unwrap().check_dim(3).is_ok());
    }

    #[test]
    fn patch_kernel_scaling_and_limits() {
        let k = kernel_patch(PatchCorrelation::gaussian(), 2.0, 0.5, 1.0).unwrap();
        let pk = k.patch().unwrap();
        // far from the patches the kernel follows the small-xi law
        let psi = 500.0;
        let xi = 0.5 / psi;
        let lim = -4.0 * (4.0 * PI) * ZETA3 * xi * xi / (2.0 * PI) / psi;
        assert!(rel(k.v(psi), lim) < 1e-3);
        // close to the plate, V -> -2 eps0 V_rms^2 / psi
        let psi = 1e-4;
        assert!(rel(k.v(psi), -2.0 * 4.0 / psi) < 5e-3);
        assert!(rel(k.z(psi), -(2.0 / 3.0) * 4.0 / psi) < 5e-3);
        assert!(pk.cache_len() > 0);
        let t = k.tail_integral(1.0, &QuadratureSpec::default()).unwrap();
        assert!(t.value < 0.0 && t.value.is_finite());
    }

    #[test]
    fn patch_kernel_rejects_unnormalized() {
        let err = kernel_patch(PatchCorrelation::gaussian().scaled(0.5), 1.0, 1.0, 1.0).unwrap_err();
        assert!(err.to_string().contains("3.14"), "{err}");
    }

    #[test]
    fn patch_cache_is_thread_safe() {
        let k = kernel_patch(PatchCorrelation::exponential(), 1.0, 1.0, 1.0).unwrap();
        let expected: Vec<f64> = (1..40).map(|i| k.v(i as f64 * 0.1)).collect();
        std::thread::scope(|s| {
            for _ in 0..4 {
                s.spawn(|| {
                    for (i, e) in (1..40).zip(&expected) {
                        assert_eq!(k.v(i as f64 * 0.1), *e);
                    }
                });
            }
        });
    }

    proptest! {
        #[test]
        fn em_additivity_pointwise(psi in 0.1f64..100.0) {
            let (em, d, n) = (
                kernel_casimir_em(),
                kernel_casimir_scalar(Boundary::Dirichlet),
                kernel_casimir_scalar(Boundary::Neumann),
            );
            prop_assert_eq!(em.v(psi), d.v(psi) + n.v(psi));
            prop_assert_eq!(em.z(psi), d.z(psi) + n.z(psi));
        }

        #[test]
        fn electrostatic_ratio_is_a_third(psi in 1e-3f64..1e3) {
            let k = kernel_electrostatic(1.7, 0.3);
            prop_assert!(((k.z(psi) / k.v(psi)) - 1.0 / 3.0).abs() < 1e-15);
        }

        #[test]
        fn builtins_are_finite_and_decay(psi in 1e-2f64..1e2) {
            let ks = [
                kernel_casimir_scalar(Boundary::Dirichlet),
                kernel_casimir_scalar(Boundary::Neumann),
                kernel_casimir_em(),
                kernel_electrostatic(1.0, 1.0),
                kernel_hight_dirichlet(2.0, 2).unwrap(),
                kernel_hight_dirichlet(2.0, 3).unwrap(),
            ];
            for k in &ks {
                prop_assert!(k.v(psi).is_finite() && k.z(psi).is_finite());
                prop_assert!(k.v(psi * 1e6).abs() < k.v(psi).abs());
                prop_assert_eq!(k.e_par(psi), k.v(psi));
            }
        }
    }
}
