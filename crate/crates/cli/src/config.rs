//! Run configuration: one JSON document per run.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use deforce_core::analysis::{Family, FitModel, FitOptions};
use deforce_core::engine::JacobianOptions;
use deforce_core::kernels::{self, PatchCorrelation, ZETA3};
use deforce_core::profiles::{self, GridData};
use deforce_core::{InteractionKernel, Planform, QuadratureSpec, SurfaceProfile};

use crate::CliError;

/// Marker key identifying a manifest, which can be fed back as a config.
pub const MANIFEST_KEY: &str = "deforce_manifest";

fn default_frac() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileConfig {
    Sphere {
        a: f64,
        #[serde(rename = "R")]
        radius: f64,
        /// Planform radius; defaults to `rho_m_frac * R`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rho_m: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rho_m_frac: Option<f64>,
        #[serde(default = "two")]
        base_dim: usize,
    },
    Cylinder {
        a: f64,
        #[serde(rename = "R")]
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x_m: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rho_m_frac: Option<f64>,
    },
    Paraboloid {
        a: f64,
        sigma: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        planform: Option<Planform>,
    },
    Constant {
        a: f64,
        #[serde(default = "two")]
        base_dim: usize,
        planform: Planform,
    },
    GaussianBump {
        a: f64,
        amplitude: f64,
        widths: [f64; 2],
        planform: Planform,
    },
    Grid {
        path: PathBuf,
    },
    Scaled {
        lambda: f64,
        profile: Box<ProfileConfig>,
    },
}

fn two() -> usize {
    2
}

impl ProfileConfig {
    /// Fill defaults so the echoed config is fully explicit.
    pub fn resolve(&mut self, rho_m_frac: Option<f64>) {
        match self {
            ProfileConfig::Sphere {
                radius, rho_m, rho_m_frac: frac, ..
            } => {
                if let Some(f) = rho_m_frac.or(*frac).or(rho_m.is_none().then_some(default_frac())) {
                    *rho_m = Some(f * *radius);
                }
                *frac = None;
            }
            ProfileConfig::Cylinder {
                radius, x_m, rho_m_frac: frac, ..
            } => {
                if let Some(f) = rho_m_frac.or(*frac).or(x_m.is_none().then_some(default_frac())) {
                    *x_m = Some(f * *radius);
                }
                *frac = None;
            }
            ProfileConfig::Scaled { profile, .. } => profile.resolve(rho_m_frac),
            _ => {}
        }
    }

    pub fn build(&self, base: &Path) -> Result<SurfaceProfile, CliError> {
        let p = match self {
            ProfileConfig::Sphere {
                a,
                radius,
                rho_m,
                base_dim,
                ..
            } => profiles::make_sphere_nd(*a, *radius, rho_m.unwrap_or(default_frac() * radius), *base_dim)?,
            ProfileConfig::Cylinder { a, radius, x_m, .. } => {
                profiles::make_cylinder(*a, *radius, x_m.unwrap_or(default_frac() * radius))?
            }
            ProfileConfig::Paraboloid { a, sigma, planform } => {
                let p = profiles::make_paraboloid(*a, *sigma)?;
                match planform {
                    Some(pl) => p.with_planform(pl.clone())?,
                    None => p,
                }
            }
            ProfileConfig::Constant { a, base_dim, planform } => profiles::make_constant(*a, *base_dim, planform.clone())?,
            ProfileConfig::GaussianBump {
                a,
                amplitude,
                widths,
                planform,
            } => profiles::make_gaussian_bump(*a, *amplitude, *widths, planform.clone())?,
            ProfileConfig::Grid { path } => profiles::make_grid(GridData::from_path(base.join(path))?)?,
            ProfileConfig::Scaled { lambda, profile } => profiles::scale_lateral(&profile.build(base)?, *lambda)?,
        };
        Ok(p)
    }

    /// `(rho_m, R)` for compact profiles, used by the planform convergence check.
    pub fn compact(&self) -> Option<(f64, f64)> {
        match self {
            ProfileConfig::Sphere { radius, rho_m, .. } => Some((rho_m.unwrap_or(default_frac() * radius), *radius)),
            ProfileConfig::Cylinder { radius, x_m, .. } => Some((x_m.unwrap_or(default_frac() * radius), *radius)),
            _ => None,
        }
    }

    pub fn with_rho_m(&self, rho: f64) -> ProfileConfig {
        let mut c = self.clone();
        match &mut c {
            ProfileConfig::Sphere { rho_m, .. } => *rho_m = Some(rho),
            ProfileConfig::Cylinder { x_m, .. } => *x_m = Some(rho),
            _ => {}
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CorrelationConfig {
    /// `"gaussian"` or `"exponential"`
    Builtin(String),
    Table { table: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    CasimirDirichlet,
    CasimirNeumann,
    CasimirEm,
    Electrostatic {
        voltage: f64,
        #[serde(default = "one")]
        eps0: f64,
    },
    HightDirichlet {
        #[serde(default = "one")]
        beta: f64,
        #[serde(default = "two")]
        base_dim: usize,
    },
    PowerLaw {
        v0: f64,
        z0: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c0: Option<f64>,
        p: f64,
    },
    DiluteScalar {
        lambda_r: f64,
    },
    Patch {
        correlation: CorrelationConfig,
        v_rms: f64,
        ell: f64,
        #[serde(default = "one")]
        eps0: f64,
    },
    Sum {
        label: String,
        parts: Vec<KernelConfig>,
    },
}

fn one() -> f64 {
    1.0
}

impl KernelConfig {
    pub fn build(&self, base: &Path) -> Result<InteractionKernel, CliError> {
        use deforce_core::Boundary::*;
        let k = match self {
            KernelConfig::CasimirDirichlet => kernels::kernel_casimir_scalar(Dirichlet),
            KernelConfig::CasimirNeumann => kernels::kernel_casimir_scalar(Neumann),
            KernelConfig::CasimirEm => kernels::kernel_casimir_em(),
            KernelConfig::Electrostatic { voltage, eps0 } => kernels::kernel_electrostatic(*voltage, *eps0),
            KernelConfig::HightDirichlet { beta, base_dim } => kernels::kernel_hight_dirichlet(*beta, *base_dim)?,
            KernelConfig::PowerLaw { v0, z0, c0, p } => kernels::kernel_power_law_c(*v0, *z0, *c0, *p)?,
            KernelConfig::DiluteScalar { lambda_r } => kernels::kernel_dilute_scalar(*lambda_r),
            KernelConfig::Patch {
                correlation,
                v_rms,
                ell,
                eps0,
            } => {
                let corr = match correlation {
                    CorrelationConfig::Builtin(name) => match name.as_str() {
                        "gaussian" => PatchCorrelation::gaussian(),
                        "exponential" => PatchCorrelation::exponential(),
                        other => {
                            return Err(CliError::Config(format!(
                                "unknown correlation `{other}` (expected gaussian, exponential or {{\"table\": path}})"
                            )))
                        }
                    },
                    CorrelationConfig::Table { table } => PatchCorrelation::from_path(base.join(table))?,
                };
                kernels::kernel_patch(corr, *v_rms, *ell, *eps0)?
            }
            KernelConfig::Sum { label, parts } => {
                let parts = parts.iter().map(|p| p.build(base)).collect::<Result<Vec<_>, _>>()?;
                kernels::kernel_sum(label, parts)
            }
        };
        Ok(k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Preset {
    DirichletSphere,
    NeumannSphere,
    DirichletCylinder,
    NeumannCylinder,
    EmSphere,
    HightSphereD3,
    HightSphereD4,
}

struct PresetValues {
    kernel: KernelConfig,
    family: Family,
    model: FitModel,
    reference: Option<f64>,
    reference_log: Option<f64>,
}

impl Preset {
    fn values(self) -> PresetValues {
        let cubic = |kernel, family, reference| PresetValues {
            kernel,
            family,
            model: FitModel::Linear,
            reference: Some(reference),
            reference_log: None,
        };
        let pi2 = PI * PI;
        match self {
            Preset::DirichletSphere => cubic(KernelConfig::CasimirDirichlet, Family::Sphere, 1.0 / 3.0),
            Preset::NeumannSphere => cubic(KernelConfig::CasimirNeumann, Family::Sphere, 1.0 / 3.0 - 40.0 / pi2),
            Preset::DirichletCylinder => cubic(KernelConfig::CasimirDirichlet, Family::Cylinder, 7.0 / 36.0),
            Preset::NeumannCylinder => cubic(KernelConfig::CasimirNeumann, Family::Cylinder, 7.0 / 36.0 - 40.0 / (3.0 * pi2)),
            Preset::EmSphere => PresetValues {
                reference: None,
                ..cubic(KernelConfig::CasimirEm, Family::Sphere, 0.0)
            },
            Preset::HightSphereD3 => PresetValues {
                kernel: KernelConfig::HightDirichlet { beta: 1.0, base_dim: 2 },
                family: Family::Sphere,
                model: FitModel::Log,
                reference: None,
                reference_log: Some(-1.0 / (6.0 * ZETA3)),
            },
            Preset::HightSphereD4 => cubic(KernelConfig::HightDirichlet { beta: 1.0, base_dim: 3 }, Family::Sphere3, 0.25),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<FitModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<Vec<f64>>,
    #[serde(default, rename = "R", skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_m_frac: Option<f64>,
    /// Second planform for the drift report; `0` disables it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alt_rho_m_frac: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_log: Option<f64>,
}

impl GammaConfig {
    pub fn options(&self) -> FitOptions {
        let d = FitOptions::default();
        FitOptions {
            ladder: self.ladder.clone().unwrap_or(d.ladder),
            model: self.model.unwrap_or(d.model),
            radius: self.radius.unwrap_or(d.radius),
            rho_m_frac: self.rho_m_frac.unwrap_or(d.rho_m_frac),
            alt_rho_m_frac: match self.alt_rho_m_frac {
                Some(0.0) => None,
                Some(f) => Some(f),
                None => d.alt_rho_m_frac,
            },
            fit_tol: self.fit_tol.unwrap_or(d.fit_tol),
            reference: self.reference,
            reference_log: self.reference_log,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    Pfa,
    De2,
    De4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default = "default_order")]
    pub order: Order,
    /// Planform fraction of the convergence check for compact profiles.
    #[serde(default = "default_check_frac")]
    pub check_rho_m_frac: f64,
}

fn default_order() -> Order {
    Order::De2
}

fn default_check_frac() -> f64 {
    0.7
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            order: default_order(),
            check_rho_m_frac: default_check_frac(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub family: Family,
    #[serde(rename = "R", default = "one")]
    pub radius: f64,
    pub a_over_r: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_m_frac: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeiConfig {
    pub near: ProfileConfig,
    pub far: ProfileConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub far_sheet: Option<ProfileConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    /// Kernel checked for additivity against the Dirichlet + Neumann parts;
    /// defaults to the built-in EM kernel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub em_kernel: Option<KernelConfig>,
    /// Restrict to these suites (the `--suite` flag takes precedence).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suites: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelConfig>,
    #[serde(default)]
    pub quad: QuadratureSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<GammaConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jacobian: Option<JacobianOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sei: Option<SeiConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckConfig>,
    /// Output directory; the `--out` flag takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub quad_tol: Option<f64>,
    pub rho_m_frac: Option<f64>,
    pub preset: Option<Preset>,
}

impl RunConfig {
    /// Read a config, or the `config` member of a manifest.
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let value: Value = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let body = match value {
            Value::Object(mut m) if m.contains_key(MANIFEST_KEY) => m.remove("config").unwrap_or(Value::Null),
            v => v,
        };
        serde_json::from_value(body).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Apply overrides and defaults; the result is what the manifest echoes.
    pub fn resolve(mut self, o: &Overrides) -> Result<RunConfig, CliError> {
        if let Some(t) = o.quad_tol {
            self.quad.rel_tol = t;
        }
        self.quad.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(f) = o.rho_m_frac {
            if !(f > 0.0 && f < 1.0) {
                return Err(CliError::Config(format!("--rho-m-frac must lie in (0, 1), got {f}")));
            }
        }
        if let Some(p) = &mut self.profile {
            p.resolve(o.rho_m_frac);
        }
        if let Some(s) = &mut self.sei {
            s.near.resolve(o.rho_m_frac);
            s.far.resolve(o.rho_m_frac);
        }
        if let Some(s) = &mut self.sweep {
            s.rho_m_frac = o.rho_m_frac.or(s.rho_m_frac).or(Some(default_frac()));
        }
        if let Some(preset) = o.preset {
            self.gamma.get_or_insert_with(GammaConfig::default).preset = Some(preset);
        }
        if let Some(g) = &mut self.gamma {
            if let Some(preset) = g.preset {
                let v = preset.values();
                if self.kernel.is_none() {
                    self.kernel = Some(v.kernel);
                }
                g.family.get_or_insert(v.family);
                g.model.get_or_insert(v.model);
                if g.reference.is_none() {
                    g.reference = v.reference;
                }
                if g.reference_log.is_none() {
                    g.reference_log = v.reference_log;
                }
            }
            if let Some(f) = o.rho_m_frac {
                g.rho_m_frac = Some(f);
            }
            let opts = g.options();
            g.ladder = Some(opts.ladder);
            g.model = Some(opts.model);
            g.radius = Some(opts.radius);
            g.rho_m_frac = Some(opts.rho_m_frac);
            g.alt_rho_m_frac = Some(opts.alt_rho_m_frac.unwrap_or(0.0));
            g.fit_tol = Some(opts.fit_tol);
        }
        Ok(self)
    }

    pub fn require_profile(&self) -> Result<&ProfileConfig, CliError> {
        self.profile.as_ref().ok_or_else(|| CliError::Config("config has no `profile` block".into()))
    }

    pub fn require_kernel(&self) -> Result<&KernelConfig, CliError> {
        self.kernel.as_ref().ok_or_else(|| CliError::Config("config has no `kernel` block".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<RunConfig, serde_json::Error> {
        serde_json::from_str(s)
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse(r#"{"profile": {"kind": "sphere", "a": 1, "R": 10, "colour": 3}}"#).is_err());
        assert!(parse(r#"{"quad": {"rel_tol": 1e-8, "speed": 2}}"#).is_err());
        assert!(parse(r#"{"whatever": 1}"#).is_err());
        assert!(parse(r#"{"kernel": {"name": "casimir_dirichlet"}, "profile": {"kind": "paraboloid", "a": 1, "sigma": 10}}"#).is_ok());
    }

    #[test]
    fn resolution_is_idempotent() {
        let c = parse(
            r#"{"profile": {"kind": "sphere", "a": 0.01, "R": 1}, "kernel": {"name": "casimir_neumann"},
                "gamma": {"preset": "neumann_cylinder"}}"#,
        )
        .unwrap();
        let o = Overrides {
            rho_m_frac: Some(0.8),
            ..Default::default()
        };
        let once = c.resolve(&o).unwrap();
        assert_eq!(once.profile.as_ref().unwrap().compact(), Some((0.8, 1.0)));
        let twice = once.clone().resolve(&Overrides::default()).unwrap();
        assert_eq!(once, twice);
        let g = once.gamma.unwrap();
        assert_eq!(g.family, Some(Family::Cylinder));
        assert!((g.reference.unwrap() + 1.156_504_67).abs() < 1e-8);
    }

    #[test]
    fn bad_overrides_are_config_errors() {
        let o = Overrides {
            quad_tol: Some(0.5),
            ..Default::default()
        };
        assert!(matches!(RunConfig::default().resolve(&o), Err(CliError::Config(_))));
    }
}
