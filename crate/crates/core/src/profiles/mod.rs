//! Gap profiles `psi(x)` over an n-dimensional base plane.
//!
//! A [`SurfaceProfile`] is a height field describing the curved surface as a
//! single Monge patch above the plane `x_n+1 = 0`, together with the planform
//! on which it is integrated. Analytic shapes carry exact first and second
//! derivatives; gridded data uses finite differences (see [`grid`]).
//!
//! Profiles are immutable; every evaluation is a pure function of the point.

pub mod grid;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::Domain;

pub use grid::GridData;

/// Region of the base plane over which a profile is defined and integrated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Planform {
    /// Disk (n = 2), strip `|x| <= radius` (n = 1) or ball (n = 3). May be unbounded.
    Ball { radius: f64 },
    /// Axis-aligned rectangle or box.
    Rect { lo: Vec<f64>, hi: Vec<f64> },
}

impl Planform {
    pub fn unbounded() -> Self {
        Planform::Ball { radius: f64::INFINITY }
    }

    pub fn is_bounded(&self) -> bool {
        match self {
            Planform::Ball { radius } => radius.is_finite(),
            Planform::Rect { .. } => true,
        }
    }

    /// Largest distance from the origin to a planform point.
    pub fn extent(&self) -> f64 {
        match self {
            Planform::Ball { radius } => *radius,
            Planform::Rect { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(l, h)| l.abs().max(h.abs()).powi(2))
                .sum::<f64>()
                .sqrt(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let slack = 1e-12;
        match self {
            Planform::Ball { radius } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                r2.sqrt() <= radius * (1.0 + slack)
            }
            Planform::Rect { lo, hi } => x.iter().enumerate().all(|(i, &v)| {
                let w = (hi[i] - lo[i]) * slack;
                v >= lo[i] - w && v <= hi[i] + w
            }),
        }
    }

    /// Lebesgue measure in `n` dimensions.
    pub fn measure(&self, n: usize) -> f64 {
        match self {
            Planform::Ball { radius } => {
                crate::quadrature::sphere_surface(n) * radius.powi(n as i32) / n as f64
            }
            Planform::Rect { lo, hi } => lo.iter().zip(hi).map(|(l, h)| h - l).product(),
        }
    }

    pub fn to_domain(&self, n: usize) -> Domain {
        match self {
            Planform::Ball { radius } => Domain::Ball { dim: n, radius: *radius },
            Planform::Rect { lo, hi } => Domain::Box {
                lo: lo.clone(),
                hi: hi.clone(),
            },
        }
    }

    fn shrunk(&self, lambda: f64) -> Self {
        match self {
            Planform::Ball { radius } => Planform::Ball { radius: radius / lambda },
            Planform::Rect { lo, hi } => Planform::Rect {
                lo: lo.iter().map(|v| v / lambda).collect(),
                hi: hi.iter().map(|v| v / lambda).collect(),
            },
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            Planform::Ball { radius } => {
                if !(*radius > 0.0) {
                    return Err(Error::param("planform.radius", format!("must be positive, got {radius}")));
                }
            }
            Planform::Rect { lo, hi } => {
                if lo.len() != n || hi.len() != n {
                    return Err(Error::param(
                        "planform",
                        format!("rectangle bounds need {n} components, got {} and {}", lo.len(), hi.len()),
                    ));
                }
                if lo.iter().zip(hi).any(|(l, h)| !(h > l) || !l.is_finite() || !h.is_finite()) {
                    return Err(Error::param("planform", format!("empty or unbounded rectangle {lo:?}..{hi:?}")));
                }
            }
        }
        Ok(())
    }
}

/// Value, gradient and Hessian of a profile at one point. Only the first
/// `dim` components are meaningful.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalGeometry {
    pub dim: usize,
    pub height: f64,
    pub gradient: [f64; 3],
    /// `None` when the profile cannot supply second derivatives.
    pub hessian: Option<[[f64; 3]; 3]>,
}

impl LocalGeometry {
    pub fn grad_sq(&self) -> f64 {
        self.gradient[..self.dim].iter().map(|g| g * g).sum()
    }

    /// Sum of squared Hessian entries, `(d_i d_j psi)^2` summed over i, j.
    pub fn hessian_sq(&self) -> Option<f64> {
        self.hessian.map(|h| {
            let mut s = 0.0;
            for row in h.iter().take(self.dim) {
                for v in row.iter().take(self.dim) {
                    s += v * v;
                }
            }
            s
        })
    }

    pub fn hessian_trace(&self) -> Option<f64> {
        self.hessian.map(|h| (0..self.dim).map(|i| h[i][i]).sum())
    }

    fn flat(dim: usize, height: f64) -> Self {
        Self {
            dim,
            height,
            gradient: [0.0; 3],
            hessian: Some([[0.0; 3]; 3]),
        }
    }

    fn from_radial(x: &[f64], r: RadialGeometry) -> Self {
        let dim = x.len();
        let rho = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut gradient = [0.0; 3];
        let mut hessian = [[0.0; 3]; 3];
        if rho == 0.0 {
            for (i, row) in hessian.iter_mut().enumerate().take(dim) {
                row[i] = r.curvature;
            }
        } else {
            let tangential = r.slope / rho;
            for i in 0..dim {
                let ui = x[i] / rho;
                gradient[i] = r.slope * ui;
                for j in 0..dim {
                    let uj = x[j] / rho;
                    let delta = if i == j { 1.0 } else { 0.0 };
                    hessian[i][j] = r.curvature * ui * uj + tangential * (delta - ui * uj);
                }
            }
        }
        Self {
            dim,
            height: r.height,
            gradient,
            hessian: Some(hessian),
        }
    }
}

/// Height and radial derivatives of an axisymmetric profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGeometry {
    pub height: f64,
    /// d psi / d rho
    pub slope: f64,
    /// d^2 psi / d rho^2
    pub curvature: f64,
}

impl RadialGeometry {
    /// `|grad psi|^2`
    pub fn grad_sq(&self) -> f64 {
        self.slope * self.slope
    }

    /// Sum of squared Cartesian Hessian entries in `n` dimensions, at radius `rho`.
    pub fn hessian_sq(&self, rho: f64, n: usize) -> f64 {
        let tangential = if rho == 0.0 { self.curvature } else { self.slope / rho };
        self.curvature * self.curvature + (n as f64 - 1.0) * tangential * tangential
    }
}

#[derive(Debug, Clone)]
enum Shape {
    Sphere { a: f64, radius: f64 },
    Paraboloid { a: f64, sigma: f64 },
    Constant { a: f64 },
    GaussianBump { a: f64, amplitude: f64, widths: [f64; 3] },
    Grid(Arc<GridData>),
    Scaled { inner: Box<SurfaceProfile>, lambda: f64 },
}

/// Gap function `psi > 0` over a planform of the n-dimensional base plane.
#[derive(Debug, Clone)]
pub struct SurfaceProfile {
    shape: Shape,
    base_dim: usize,
    planform: Planform,
}

/// Serializable summary of a profile, echoed in result metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileDescriptor {
    pub kind: String,
    pub params: BTreeMap<String, f64>,
    pub base_dim: usize,
    pub planform: Planform,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive and finite, got {v}")))
    }
}

/// Sphere `psi = a + R (1 - sqrt(1 - rho^2/R^2))` over the disk `rho <= rho_m < R`.
pub fn make_sphere(a: f64, radius: f64, rho_m: f64) -> Result<SurfaceProfile> {
    make_sphere_nd(a, radius, rho_m, 2)
}

/// Sphere profile over an n-dimensional base (n = 3 for a 4-dimensional ball
/// in front of a hyperplane).
pub fn make_sphere_nd(a: f64, radius: f64, rho_m: f64, n: usize) -> Result<SurfaceProfile> {
    positive("a", a)?;
    positive("R", radius)?;
    positive("rho_m", rho_m)?;
    if !(1..=3).contains(&n) {
        return Err(Error::param("base_dim", format!("must be 1, 2 or 3, got {n}")));
    }
    if rho_m >= radius {
        return Err(Error::param(
            "rho_m",
            format!("planform radius must satisfy rho_m < R (got rho_m = {rho_m}, R = {radius}); the profile slope diverges at the rim"),
        ));
    }
    Ok(SurfaceProfile {
        shape: Shape::Sphere { a, radius },
        base_dim: n,
        planform: Planform::Ball { radius: rho_m },
    })
}

/// Cylinder of radius `R` with axis parallel to the plane; one-dimensional
/// base `|x| <= x_m`, results per unit length.
pub fn make_cylinder(a: f64, radius: f64, x_m: f64) -> Result<SurfaceProfile> {
    make_sphere_nd(a, radius, x_m, 1).map_err(|e| match e {
        Error::InvalidParameter { name: "rho_m", reason } => Error::InvalidParameter {
            name: "x_m",
            reason: reason.replace("rho_m", "x_m"),
        },
        other => other,
    })
}

/// Revolution paraboloid `psi = a (1 + rho^2 / sigma^2)` over the whole plane.
pub fn make_paraboloid(a: f64, sigma: f64) -> Result<SurfaceProfile> {
    positive("a", a)?;
    positive("sigma", sigma)?;
    Ok(SurfaceProfile {
        shape: Shape::Paraboloid { a, sigma },
        base_dim: 2,
        planform: Planform::unbounded(),
    })
}

/// Flat profile `psi = a`; the planform must be bounded.
pub fn make_constant(a: f64, base_dim: usize, planform: Planform) -> Result<SurfaceProfile> {
    positive("a", a)?;
    if !(1..=3).contains(&base_dim) {
        return Err(Error::param("base_dim", format!("must be 1, 2 or 3, got {base_dim}")));
    }
    if !planform.is_bounded() {
        return Err(Error::param("planform", "constant profile needs a bounded planform"));
    }
    planform.validate(base_dim)?;
    Ok(SurfaceProfile {
        shape: Shape::Constant { a },
        base_dim,
        planform,
    })
}

/// Gaussian well `psi = a + A (1 - exp(-sum x_i^2 / w_i^2))` in two dimensions.
/// Equal widths give an axisymmetric profile.
pub fn make_gaussian_bump(a: f64, amplitude: f64, widths: [f64; 2], planform: Planform) -> Result<SurfaceProfile> {
    positive("a", a)?;
    positive("width", widths[0])?;
    positive("width", widths[1])?;
    if !amplitude.is_finite() || a + amplitude.min(0.0) <= 0.0 {
        return Err(Error::param(
            "amplitude",
            format!("a + min(A, 0) must stay positive (a = {a}, A = {amplitude})"),
        ));
    }
    planform.validate(2)?;
    Ok(SurfaceProfile {
        shape: Shape::GaussianBump {
            a,
            amplitude,
            widths: [widths[0], widths[1], 1.0],
        },
        base_dim: 2,
        planform,
    })
}

/// Profile backed by gridded samples; see [`GridData`].
pub fn make_grid(data: GridData) -> Result<SurfaceProfile> {
    let planform = data.planform();
    Ok(SurfaceProfile {
        shape: Shape::Grid(Arc::new(data)),
        base_dim: 2,
        planform,
    })
}

/// `psi_lambda(x) = psi(lambda x)`, with the planform shrunk by `1/lambda`.
pub fn scale_lateral(p: &SurfaceProfile, lambda: f64) -> Result<SurfaceProfile> {
    positive("lambda", lambda)?;
    Ok(SurfaceProfile {
        shape: Shape::Scaled {
            inner: Box::new(p.clone()),
            lambda,
        },
        base_dim: p.base_dim,
        planform: p.planform.shrunk(lambda),
    })
}

/// Evaluate `(psi, grad psi, Hess psi)` at `x`, which must lie inside the planform.
pub fn eval_profile(p: &SurfaceProfile, x: &[f64]) -> Result<LocalGeometry> {
    p.eval(x)
}

impl SurfaceProfile {
    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn planform(&self) -> &Planform {
        &self.planform
    }

    /// Restrict (or change) the planform. Sphere-type profiles keep the
    /// requirement that every planform point stays strictly inside the rim.
    pub fn with_planform(mut self, planform: Planform) -> Result<Self> {
        planform.validate(self.base_dim)?;
        if let Some(limit) = self.rim_radius() {
            if planform.extent() >= limit {
                return Err(Error::param(
                    "rho_m",
                    format!("planform extent {} must stay below R = {limit}", planform.extent()),
                ));
            }
        }
        if matches!(self.shape, Shape::Constant { .. }) && !planform.is_bounded() {
            return Err(Error::param("planform", "constant profile needs a bounded planform"));
        }
        self.planform = planform;
        Ok(self)
    }

    fn rim_radius(&self) -> Option<f64> {
        match &self.shape {
            Shape::Sphere { radius, .. } => Some(*radius),
            Shape::Scaled { inner, lambda } => inner.rim_radius().map(|r| r / lambda),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match &self.shape {
            Shape::Sphere { .. } if self.base_dim == 1 => "cylinder",
            Shape::Sphere { .. } => "sphere",
            Shape::Paraboloid { .. } => "paraboloid",
            Shape::Constant { .. } => "constant",
            Shape::GaussianBump { .. } => "gaussian_bump",
            Shape::Grid(_) => "grid",
            Shape::Scaled { .. } => "scaled",
        }
    }

    pub fn is_axisymmetric(&self) -> bool {
        match &self.shape {
            Shape::Sphere { .. } | Shape::Paraboloid { .. } | Shape::Constant { .. } => true,
            Shape::GaussianBump { widths, .. } => widths[0] == widths[1],
            Shape::Grid(_) => false,
            Shape::Scaled { inner, .. } => inner.is_axisymmetric(),
        }
    }

    /// Whether the planform itself is rotation invariant, so that an
    /// axisymmetric integrand may be reduced to a radial integral.
    pub fn radial_reduction_possible(&self) -> bool {
        self.is_axisymmetric() && matches!(self.planform, Planform::Ball { .. })
    }

    /// Height and radial derivatives for axisymmetric profiles.
    pub fn radial(&self, rho: f64) -> Option<RadialGeometry> {
        match &self.shape {
            Shape::Sphere { a, radius } => {
                let r2 = radius * radius;
                let root = (r2 - rho * rho).sqrt();
                Some(RadialGeometry {
                    height: a + rho * rho / (radius + root),
                    slope: rho / root,
                    curvature: r2 / (root * root * root),
                })
            }
            Shape::Paraboloid { a, sigma } => {
                let s2 = sigma * sigma;
                Some(RadialGeometry {
                    height: a * (1.0 + rho * rho / s2),
                    slope: 2.0 * a * rho / s2,
                    curvature: 2.0 * a / s2,
                })
            }
            Shape::Constant { a } => Some(RadialGeometry {
                height: *a,
                slope: 0.0,
                curvature: 0.0,
            }),
            Shape::GaussianBump { a, amplitude, widths } if widths[0] == widths[1] => {
                let w2 = widths[0] * widths[0];
                let e = (-rho * rho / w2).exp();
                Some(RadialGeometry {
                    height: a + amplitude * (-(-rho * rho / w2).exp_m1()),
                    slope: amplitude * e * 2.0 * rho / w2,
                    curvature: amplitude * e * (2.0 / w2 - 4.0 * rho * rho / (w2 * w2)),
                })
            }
            Shape::Scaled { inner, lambda } => inner.radial(lambda * rho).map(|r| RadialGeometry {
                height: r.height,
                slope: lambda * r.slope,
                curvature: lambda * lambda * r.curvature,
            }),
            _ => None,
        }
    }

    /// Evaluate at a point of the planform.
    pub fn eval(&self, x: &[f64]) -> Result<LocalGeometry> {
        if x.len() != self.base_dim {
            return Err(Error::param(
                "point",
                format!("expected {} coordinates, got {}", self.base_dim, x.len()),
            ));
        }
        if !self.planform.contains(x) {
            return Err(Error::OutsidePlanform { point: x.to_vec() });
        }
        Ok(self.local(x))
    }

    /// Evaluate without the planform check; used inside integrations whose
    /// nodes lie in the planform by construction.
    pub(crate) fn local(&self, x: &[f64]) -> LocalGeometry {
        let n = self.base_dim;
        match &self.shape {
            Shape::Constant { a } => LocalGeometry::flat(n, *a),
            Shape::Sphere { .. } | Shape::Paraboloid { .. } => {
                let rho = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                LocalGeometry::from_radial(x, self.radial(rho).expect("axisymmetric shape"))
            }
            Shape::GaussianBump { a, amplitude, widths } => {
                let mut arg = 0.0;
                for i in 0..n {
                    arg += x[i] * x[i] / (widths[i] * widths[i]);
                }
                let e = (-arg).exp();
                let mut gradient = [0.0; 3];
                let mut hessian = [[0.0; 3]; 3];
                for i in 0..n {
                    let wi2 = widths[i] * widths[i];
                    gradient[i] = amplitude * e * 2.0 * x[i] / wi2;
                    for j in 0..n {
                        let wj2 = widths[j] * widths[j];
                        let delta = if i == j { 2.0 / wi2 } else { 0.0 };
                        hessian[i][j] = amplitude * e * (delta - 4.0 * x[i] * x[j] / (wi2 * wj2));
                    }
                }
                LocalGeometry {
                    dim: n,
                    height: a + amplitude * (-(-arg).exp_m1()),
                    gradient,
                    hessian: Some(hessian),
                }
            }
            Shape::Grid(data) => data.local(x),
            Shape::Scaled { inner, lambda } => {
                let mut y = [0.0; 3];
                for i in 0..n {
                    y[i] = lambda * x[i];
                }
                let g = inner.local(&y[..n]);
                let mut gradient = [0.0; 3];
                for i in 0..n {
                    gradient[i] = lambda * g.gradient[i];
                }
                let hessian = g.hessian.map(|h| {
                    let mut out = [[0.0; 3]; 3];
                    for i in 0..n {
                        for j in 0..n {
                            out[i][j] = lambda * lambda * h[i][j];
                        }
                    }
                    out
                });
                LocalGeometry {
                    dim: n,
                    height: g.height,
                    gradient,
                    hessian,
                }
            }
        }
    }

    /// Minimum gap, when it is attained at the origin.
    pub fn closest_distance(&self) -> Option<f64> {
        match &self.shape {
            Shape::Sphere { a, .. } | Shape::Paraboloid { a, .. } | Shape::Constant { a } => Some(*a),
            Shape::GaussianBump { a, amplitude, .. } if *amplitude >= 0.0 => Some(*a),
            Shape::Grid(data) => Some(data.min_height()),
            Shape::Scaled { inner, .. } => inner.closest_distance(),
            _ => None,
        }
    }

    /// Radius of curvature at the point of closest approach (isotropic
    /// profiles only); `None` for flat or saddle-like apexes.
    pub fn apex_radius(&self) -> Option<f64> {
        match &self.shape {
            Shape::Sphere { radius, .. } => Some(*radius),
            Shape::Paraboloid { a, sigma } => Some(sigma * sigma / (2.0 * a)),
            Shape::GaussianBump { amplitude, widths, .. } if *amplitude > 0.0 && widths[0] == widths[1] => {
                Some(widths[0] * widths[0] / (2.0 * amplitude))
            }
            Shape::Scaled { inner, lambda } => inner.apex_radius().map(|r| r / (lambda * lambda)),
            _ => None,
        }
    }

    /// Lateral length over which the profile changes appreciably; used to
    /// seed quadrature partitions.
    pub fn feature_length(&self) -> f64 {
        let ext = self.planform.extent();
        let raw = match &self.shape {
            Shape::Sphere { a, radius } => (2.0 * a * radius).sqrt(),
            Shape::Paraboloid { sigma, .. } => *sigma,
            Shape::Constant { .. } => ext,
            Shape::GaussianBump { widths, .. } => widths[0].min(widths[1]),
            Shape::Grid(data) => data.spacing().iter().cloned().fold(f64::INFINITY, f64::min),
            Shape::Scaled { inner, lambda } => inner.feature_length() / lambda,
        };
        if ext.is_finite() {
            raw.min(ext)
        } else {
            raw
        }
    }

    /// Interior grid lines for gridded profiles (integrand kinks).
    pub(crate) fn grid_lines(&self) -> Option<Vec<Vec<f64>>> {
        match &self.shape {
            Shape::Grid(data) => Some(data.lines()),
            Shape::Scaled { inner, lambda } => inner
                .grid_lines()
                .map(|ls| ls.into_iter().map(|l| l.into_iter().map(|v| v / lambda).collect()).collect()),
            _ => None,
        }
    }

    pub fn descriptor(&self) -> ProfileDescriptor {
        let mut params = BTreeMap::new();
        let kind = self.kind().to_string();
        match &self.shape {
            Shape::Sphere { a, radius } => {
                params.insert("a".into(), *a);
                params.insert("R".into(), *radius);
            }
            Shape::Paraboloid { a, sigma } => {
                params.insert("a".into(), *a);
                params.insert("sigma".into(), *sigma);
            }
            Shape::Constant { a } => {
                params.insert("a".into(), *a);
            }
            Shape::GaussianBump { a, amplitude, widths } => {
                params.insert("a".into(), *a);
                params.insert("amplitude".into(), *amplitude);
                params.insert("width_x".into(), widths[0]);
                params.insert("width_y".into(), widths[1]);
            }
            Shape::Grid(data) => {
                let s = data.spacing();
                params.insert("spacing_x".into(), s[0]);
                params.insert("spacing_y".into(), s[1]);
                params.insert("nodes".into(), data.node_count() as f64);
            }
            Shape::Scaled { inner, lambda } => {
                params.insert("lambda".into(), *lambda);
                for (k, v) in inner.descriptor().params {
                    params.insert(format!("inner.{k}"), v);
                }
                params.insert(format!("inner.{}", inner.kind()), 1.0);
            }
        }
        ProfileDescriptor {
            kind,
            params,
            base_dim: self.base_dim,
            planform: self.planform.clone(),
        }
    }
}
