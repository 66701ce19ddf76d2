//! Random patch potentials: the dimensionless DE functions v(xi) and z(xi).
//!
//! With `xi = l / psi` and the correlation shape `g`,
//!
//! ```text
//! v(xi) = -(2/pi) xi^2 int_0^inf x^2 g(x xi) / (e^{2x} - 1) dx
//! z(xi) = (1/16 pi) xi^2 int_0^inf g(x xi) w(x) dx,
//! w(x)  = x^2 [(1 - 8x^2) cosh x - cosh 3x + 12 x sinh x] / sinh^5 x
//! ```
//!
//! For `xi > 1` both integrals are taken in `u = x xi`, which keeps the
//! integration scale set by `g` instead of by the Bose factor.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;

use parking_lot::RwLock;

use super::pchip::Pchip;
use crate::error::{Error, Result};
use crate::quadrature::{adaptive, semi_infinite_with, Estimate, QuadratureSpec};

/// `int_0^inf u g(u) du` required of every correlation used in a kernel.
pub const NORMALIZATION: f64 = 2.0 * PI;
/// Relative slack accepted on the normalization integral (tables are
/// rarely normalized to better than this).
pub const NORMALIZATION_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Gaussian,
    Exponential,
    Constant,
    Table(Pchip),
}

/// Dimensionless correlation shape `g(u)` of the patch autocorrelation,
/// `amplitude * shape(u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchCorrelation {
    shape: Shape,
    amplitude: f64,
}

impl PatchCorrelation {
    /// `g(u) = 4 pi exp(-u^2)`.
    pub fn gaussian() -> Self {
        Self {
            shape: Shape::Gaussian,
            amplitude: 4.0 * PI,
        }
    }

    /// `g(u) = 2 pi exp(-u)`.
    pub fn exponential() -> Self {
        Self {
            shape: Shape::Exponential,
            amplitude: 2.0 * PI,
        }
    }

    /// `g(u) = c`. Not normalizable; useful for the bare bracket integrals.
    pub fn constant(c: f64) -> Self {
        Self {
            shape: Shape::Constant,
            amplitude: c,
        }
    }

    /// Tabulated `(u, g)` pairs starting at `u = 0`, interpolated with
    /// monotone cubics and taken as zero beyond the last node.
    pub fn table(u: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        if u.first() != Some(&0.0) {
            return Err(Error::Data("correlation table must start at u = 0".into()));
        }
        if let Some(bad) = g.iter().find(|v| **v < 0.0) {
            return Err(Error::Data(format!("correlation values must be non-negative, found {bad}")));
        }
        Ok(Self {
            shape: Shape::Table(Pchip::new(u, g)?),
            amplitude: 1.0,
        })
    }

    /// CSV with header `u,g`.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Data(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["u", "g"] {
            return Err(Error::Data(format!("expected columns u,g, got {headers:?}")));
        }
        let (mut us, mut gs) = (Vec::new(), Vec::new());
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Data(e.to_string()))?;
            let field = |k: usize| -> Result<f64> {
                rec.get(k)
                    .ok_or_else(|| Error::Data(format!("row {}: missing column", i + 1)))?
                    .parse::<f64>()
                    .map_err(|e| Error::Data(format!("row {}: {e}", i + 1)))
            };
            us.push(field(0)?);
            gs.push(field(1)?);
        }
        Self::table(us, gs)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        Self::from_csv(f)
    }

    /// Same shape, multiplied by `factor`.
    pub fn scaled(mut self, factor: f64) -> Self {
        self.amplitude *= factor;
        self
    }

    pub fn name(&self) -> &'static str {
        match self.shape {
            Shape::Gaussian => "gaussian",
            Shape::Exponential => "exponential",
            Shape::Constant => "constant",
            Shape::Table(_) => "table",
        }
    }

    pub fn g(&self, u: f64) -> f64 {
        let s = match &self.shape {
            Shape::Gaussian => (-u * u).exp(),
            Shape::Exponential => (-u).exp(),
            Shape::Constant => 1.0,
            Shape::Table(p) => {
                if u > p.x_max() {
                    0.0
                } else {
                    p.eval(u)
                }
            }
        };
        self.amplitude * s
    }

    pub fn g0(&self) -> f64 {
        self.g(0.0)
    }

    /// Kinks of `g` (table nodes), in `u`.
    fn kinks(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Table(p) => p.nodes()[1..].to_vec(),
            _ => Vec::new(),
        }
    }

    fn decays(&self) -> bool {
        !matches!(self.shape, Shape::Constant) || self.amplitude == 0.0
    }

    /// `int_0^inf u g(u) du`.
    pub fn normalization(&self, spec: &QuadratureSpec) -> Result<f64> {
        match &self.shape {
            Shape::Gaussian => Ok(self.amplitude * 0.5),
            Shape::Exponential => Ok(self.amplitude),
            Shape::Constant if self.amplitude == 0.0 => Ok(0.0),
            Shape::Constant => Ok(f64::INFINITY),
            Shape::Table(p) => {
                let f = |u: f64| Ok(Estimate::exact(u * self.g(u)));
                Ok(adaptive(&f, p.nodes(), spec)?.value)
            }
        }
    }

    /// Reject shapes whose normalization differs from `2 pi`.
    pub fn check_normalized(&self, spec: &QuadratureSpec) -> Result<()> {
        let computed = self.normalization(spec)?;
        if !computed.is_finite() || ((computed - NORMALIZATION) / NORMALIZATION).abs() > NORMALIZATION_TOL {
            return Err(Error::Normalization {
                computed,
                expected: NORMALIZATION,
            });
        }
        Ok(())
    }
}

/// `x^2 / (e^{2x} - 1)`, finite at zero.
fn bose(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x / (2.0 * x).exp_m1()
    }
}

// Taylor coefficients of w(x)/x in powers of x^2.
const BRACKET_SERIES: [f64; 10] = [
    -5.333_333_333_333_333_3,
    3.2,
    -1.134_391_534_391_534_4,
    0.307_019_400_352_733_69,
    -0.069_879_749_879_749_88,
    0.014_067_186_977_239_887,
    -0.002_582_985_242_597_235_5,
    0.000_441_614_384_969_504_8,
    -0.000_071_331_612_892_226_74,
    0.000_011_001_582_781_467_542,
];

/// `x^2 [(1 - 8x^2) cosh x - cosh 3x + 12 x sinh x] / sinh^5 x`.
///
/// The bracket cancels to O(x^4), so below 0.25 a ten-term series is used
/// (leading term `-(16/3) x`); above 20 the asymptotic exponential form.
pub fn bracket_weight(x: f64) -> f64 {
    if x < 0.25 {
        let x2 = x * x;
        x * BRACKET_SERIES.iter().rev().fold(0.0, |acc, c| acc * x2 + c)
    } else if x > 20.0 {
        let e2 = (-2.0 * x).exp();
        16.0 * x * x * ((1.0 - 8.0 * x * x + 12.0 * x) * e2 * e2 - e2)
    } else {
        let (s, c) = (x.sinh(), x.cosh());
        let b = (1.0 - 8.0 * x * x) * c - (3.0 * x).cosh() + 12.0 * x * s;
        x * x * b / s.powi(5)
    }
}

fn check_xi(xi: f64) -> Result<()> {
    if xi > 0.0 && xi.is_finite() {
        Ok(())
    } else {
        Err(Error::param("xi", format!("must be positive and finite, got {xi}")))
    }
}

fn kink_hints(corr: &PatchCorrelation, factor: f64) -> Vec<f64> {
    corr.kinks().into_iter().map(|u| u * factor).collect()
}

/// `v(xi)` with its quadrature error.
pub fn patch_v(xi: f64, corr: &PatchCorrelation, spec: &QuadratureSpec) -> Result<Estimate> {
    check_xi(xi)?;
    if xi <= 1.0 || !corr.decays() {
        let f = |x: f64| Ok(Estimate::exact(bose(x) * corr.g(x * xi)));
        let e = semi_infinite_with(&f, 0.0, 1.0, &kink_hints(corr, 1.0 / xi), spec)?;
        Ok(e * (-2.0 / PI * xi * xi))
    } else {
        // x = u / xi
        let f = |u: f64| {
            let t = 2.0 * u / xi;
            let b = if u == 0.0 { 0.0 } else { u * u / t.exp_m1() };
            Ok(Estimate::exact(b * corr.g(u)))
        };
        let e = semi_infinite_with(&f, 0.0, 1.0, &kink_hints(corr, 1.0), spec)?;
        Ok(e * (-2.0 / (PI * xi)))
    }
}

/// `z(xi)` with its quadrature error.
pub fn patch_z(xi: f64, corr: &PatchCorrelation, spec: &QuadratureSpec) -> Result<Estimate> {
    check_xi(xi)?;
    if xi <= 1.0 || !corr.decays() {
        let f = |x: f64| Ok(Estimate::exact(bracket_weight(x) * corr.g(x * xi)));
        let e = semi_infinite_with(&f, 0.0, 1.0, &kink_hints(corr, 1.0 / xi), spec)?;
        Ok(e * (xi * xi / (16.0 * PI)))
    } else {
        let f = |u: f64| Ok(Estimate::exact(bracket_weight(u / xi) * corr.g(u)));
        let e = semi_infinite_with(&f, 0.0, 1.0, &kink_hints(corr, 1.0), spec)?;
        Ok(e * (xi / (16.0 * PI)))
    }
}

const CACHE_LIMIT: usize = 1 << 16;

/// Patch-potential kernel state: correlation, prefactors and a memo of
/// `(v, z)` keyed by `xi`.
#[derive(Debug)]
pub struct PatchKernel {
    pub corr: PatchCorrelation,
    pub v_rms: f64,
    pub ell: f64,
    pub eps0: f64,
    spec: QuadratureSpec,
    memo: RwLock<HashMap<u64, (f64, f64)>>,
}

impl PatchKernel {
    pub(crate) fn new(corr: PatchCorrelation, v_rms: f64, ell: f64, eps0: f64) -> Result<Self> {
        let spec = QuadratureSpec::default().with_rel_tol(1e-11);
        corr.check_normalized(&spec)?;
        Ok(Self {
            corr,
            v_rms,
            ell,
            eps0,
            spec,
            memo: RwLock::new(HashMap::new()),
        })
    }

    fn prefactor(&self) -> f64 {
        self.eps0 * self.v_rms * self.v_rms
    }

    /// `(v, z)` at `xi`; NaN on quadrature failure so that an enclosing
    /// integration aborts with the offending point.
    pub fn vz(&self, xi: f64) -> (f64, f64) {
        let key = xi.to_bits();
        if let Some(hit) = self.memo.read().get(&key) {
            return *hit;
        }
        let v = patch_v(xi, &self.corr, &self.spec).map(|e| e.value).unwrap_or(f64::NAN);
        let z = patch_z(xi, &self.corr, &self.spec).map(|e| e.value).unwrap_or(f64::NAN);
        let mut memo = self.memo.write();
        if memo.len() >= CACHE_LIMIT {
            memo.clear();
        }
        memo.insert(key, (v, z));
        (v, z)
    }

    pub fn v(&self, psi: f64) -> f64 {
        self.prefactor() * self.vz(self.ell / psi).0 / psi
    }

    pub fn z(&self, psi: f64) -> f64 {
        self.prefactor() * self.vz(self.ell / psi).1 / psi
    }

    pub fn cache_len(&self) -> usize {
        self.memo.read().len()
    }
}
