//! Nested adaptive integration over balls and boxes in one to three dimensions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{adaptive, geometric_hints, semi_infinite_with, Estimate, QuadError, QuadratureSpec};

/// Integration domain in the base plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Domain {
    /// Ball of the given radius centred at the origin; the radius may be infinite.
    Ball { dim: usize, radius: f64 },
    /// Axis-aligned box, finite in every direction.
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Ball { dim, .. } => *dim,
            Domain::Box { lo, .. } => lo.len(),
        }
    }
}

type Inner<'a> = dyn Fn(f64) -> Result<Estimate, QuadError> + 'a;

fn interval(f: &Inner<'_>, lo: f64, hi: f64, spec: &QuadratureSpec) -> Result<Estimate, QuadError> {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => adaptive(&f, &[lo, hi], spec),
        (true, false) => semi_infinite_with(&f, lo, 1.0, &[], spec),
        (false, true) => {
            let g = |x: f64| f(-x);
            semi_infinite_with(&g, -hi, 1.0, &[], spec)
        }
        (false, false) => {
            let left = |x: f64| f(-x);
            let a = semi_infinite_with(&left, 0.0, 1.0, &[], spec)?;
            let b = semi_infinite_with(&f, 0.0, 1.0, &[], spec)?;
            Ok(a + b)
        }
    }
}

fn radial_range(f: &Inner<'_>, radius: f64, scale: f64, spec: &QuadratureSpec) -> Result<Estimate, QuadError> {
    if radius.is_finite() {
        let mut breaks = vec![0.0];
        breaks.extend(geometric_hints(scale, radius));
        breaks.push(radius);
        adaptive(&f, &breaks, spec)
    } else {
        let hints = geometric_hints(scale, scale * 1e6);
        semi_infinite_with(&f, 0.0, scale, &hints, spec)
    }
}

/// Integrate `f` over `domain` by nested one-dimensional adaptive quadrature.
/// Balls use polar (n = 2) or spherical (n = 3) coordinates; `scale` is a
/// feature length used to seed the radial partition.
pub fn integrate_nd<F>(f: F, domain: &Domain, scale: f64, spec: &QuadratureSpec) -> Result<Estimate, QuadError>
where
    F: Fn(&[f64]) -> f64,
{
    integrate_nd_with_lines(f, domain, scale, &[], spec)
}

/// As [`integrate_nd`], with known kink lines per axis for box domains
/// (ignored for balls).
pub fn integrate_nd_with_lines<F>(
    f: F,
    domain: &Domain,
    scale: f64,
    lines: &[Vec<f64>],
    spec: &QuadratureSpec,
) -> Result<Estimate, QuadError>
where
    F: Fn(&[f64]) -> f64,
{
    spec.validate()?;
    let inner_spec = spec.inner();
    let eval = |x: &[f64]| -> Result<Estimate, QuadError> {
        let v = f(x);
        if v.is_finite() {
            Ok(Estimate::exact(v))
        } else {
            Err(QuadError::NonFinite {
                location: x.to_vec(),
                value: v,
            })
        }
    };
    let scale = if scale > 0.0 { scale } else { 1.0 };

    match domain {
        Domain::Ball { dim, radius } => {
            if !(*radius > 0.0) {
                return Err(QuadError::InvalidSpec(format!("ball radius must be positive, got {radius}")));
            }
            match dim {
                1 => {
                    let g = |x: f64| eval(&[x]);
                    interval(&g, -radius, *radius, spec)
                }
                2 => {
                    let ring = |rho: f64| -> Result<Estimate, QuadError> {
                        if rho == 0.0 {
                            return Ok(Estimate::exact(0.0));
                        }
                        let around = |theta: f64| eval(&[rho * theta.cos(), rho * theta.sin()]);
                        let e = adaptive(&around, &[0.0, PI, 2.0 * PI], &inner_spec)?;
                        Ok(e * rho)
                    };
                    radial_range(&ring, *radius, scale, spec)
                }
                3 => {
                    let shell = |rho: f64| -> Result<Estimate, QuadError> {
                        if rho == 0.0 {
                            return Ok(Estimate::exact(0.0));
                        }
                        let polar = |theta: f64| -> Result<Estimate, QuadError> {
                            let (s, c) = theta.sin_cos();
                            let around = |phi: f64| eval(&[rho * s * phi.cos(), rho * s * phi.sin(), rho * c]);
                            let e = adaptive(&around, &[0.0, PI, 2.0 * PI], &inner_spec)?;
                            Ok(e * s)
                        };
                        let e = adaptive(&polar, &[0.0, PI], &inner_spec)?;
                        Ok(e * (rho * rho))
                    };
                    radial_range(&shell, *radius, scale, spec)
                }
                d => Err(QuadError::InvalidSpec(format!("unsupported dimension {d}"))),
            }
        }
        Domain::Box { lo, hi } => {
            if lo.len() != hi.len() || lo.is_empty() || lo.len() > 3 {
                return Err(QuadError::InvalidSpec("box bounds must have matching dimension 1..=3".into()));
            }
            if lo.iter().zip(hi).any(|(l, h)| !(h > l) || !l.is_finite() || !h.is_finite()) {
                return Err(QuadError::InvalidSpec(format!("degenerate or unbounded box {lo:?}..{hi:?}")));
            }
            let br: Vec<Vec<f64>> = (0..lo.len())
                .map(|k| {
                    let mut b = vec![lo[k]];
                    if let Some(ls) = lines.get(k) {
                        b.extend(ls.iter().copied().filter(|v| *v > lo[k] && *v < hi[k]));
                    }
                    b.push(hi[k]);
                    b
                })
                .collect();
            match lo.len() {
                1 => {
                    let g = |x: f64| eval(&[x]);
                    adaptive(&g, &br[0], spec)
                }
                2 => {
                    let outer = |x: f64| -> Result<Estimate, QuadError> {
                        let g = |y: f64| eval(&[x, y]);
                        adaptive(&g, &br[1], &inner_spec)
                    };
                    adaptive(&outer, &br[0], spec)
                }
                _ => {
                    let outer = |x: f64| -> Result<Estimate, QuadError> {
                        let mid = |y: f64| -> Result<Estimate, QuadError> {
                            let g = |z: f64| eval(&[x, y, z]);
                            adaptive(&g, &br[2], &inner_spec)
                        };
                        adaptive(&mid, &br[1], &inner_spec)
                    };
                    adaptive(&outer, &br[0], spec)
                }
            }
        }
    }
}
