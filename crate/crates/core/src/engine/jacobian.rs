//! Area-per-unit-gap histograms `J(h)` of a profile and Blocki's corrected
//! force built from their linear expansion `J(h) = J0 + J1 (h - d)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::InteractionKernel;
use crate::profiles::{Planform, SurfaceProfile};
use crate::quadrature::{semi_infinite_with, sphere_surface, Estimate, QuadratureSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JacobianOptions {
    /// Explicit bin edges; overrides `n_bins` and the default range.
    pub edges: Option<Vec<f64>>,
    pub n_bins: usize,
    /// Fit window; defaults to `[d, d + window_frac * R]`.
    pub window: Option<(f64, f64)>,
    pub window_frac: f64,
    /// Cells per axis for the general (non-axisymmetric) path.
    pub cells: usize,
}

impl Default for JacobianOptions {
    fn default() -> Self {
        Self {
            edges: None,
            n_bins: 50,
            window: None,
            window_frac: 0.1,
            cells: 256,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobianFit {
    pub window: (f64, f64),
    pub j0: f64,
    pub j1: f64,
    /// Largest relative deviation of a fitted bin from the line.
    pub residual_max: f64,
    pub bins_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobianProfile {
    pub d: f64,
    pub edges: Vec<f64>,
    pub centers: Vec<f64>,
    pub j: Vec<f64>,
    pub method: String,
    /// Flat profile: all area sits at one gap and no line can be fitted.
    pub degenerate: bool,
    pub fit: Option<JacobianFit>,
}

pub fn uniform_edges(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect()
}

fn bin_of(edges: &[f64], h: f64) -> Option<usize> {
    if h < edges[0] || h >= edges[edges.len() - 1] {
        return None;
    }
    Some(edges.partition_point(|&e| e <= h) - 1)
}

fn is_radially_monotone(p: &SurfaceProfile, rho_max: f64) -> bool {
    (0..=400).all(|k| p.radial(rho_max * k as f64 / 400.0).is_some_and(|r| r.slope >= 0.0))
}

/// Radius at which a radially increasing profile reaches height `h`.
fn level_radius(p: &SurfaceProfile, h: f64, rho_max: f64) -> f64 {
    let height = |rho: f64| p.radial(rho).unwrap().height;
    if h <= height(0.0) {
        return 0.0;
    }
    if h >= height(rho_max) {
        return rho_max;
    }
    let (mut lo, mut hi) = (0.0, rho_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if height(mid) < h {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Areas per bin and the sampled (min, max) height, by cell refinement.
fn cell_areas(p: &SurfaceProfile, edges: &[f64], cells: usize) -> Result<(Vec<f64>, f64, f64)> {
    let n = p.base_dim();
    let (lo, hi): (Vec<f64>, Vec<f64>) = match p.planform() {
        Planform::Ball { radius } if radius.is_finite() => (vec![-radius; n], vec![*radius; n]),
        Planform::Ball { .. } => {
            return Err(Error::param("planform", "level-set areas need a bounded planform"));
        }
        Planform::Rect { lo, hi } => (lo.clone(), hi.clone()),
    };
    if n > 2 {
        return Err(Error::Unsupported(
            "level-set binning of non-axisymmetric profiles is limited to base dimension 1 or 2".into(),
        ));
    }
    let planform = p.planform();
    let nb = edges.len() - 1;
    let hx = (hi[0] - lo[0]) / cells as f64;
    let ny = if n == 2 { cells } else { 1 };
    let hy = if n == 2 { (hi[1] - lo[1]) / cells as f64 } else { 1.0 };
    const SUB: usize = 8;

    let rows: Vec<(Vec<f64>, f64, f64)> = (0..ny)
        .into_par_iter()
        .map(|j| {
            let mut acc = vec![0.0; nb];
            let (mut hmin, mut hmax) = (f64::INFINITY, f64::NEG_INFINITY);
            let mut point = |x: &[f64]| -> Option<f64> {
                if !planform.contains(x) {
                    return None;
                }
                let h = p.local(x).height;
                hmin = hmin.min(h);
                hmax = hmax.max(h);
                Some(h)
            };
            for i in 0..cells {
                let x0 = lo[0] + i as f64 * hx;
                let y0 = if n == 2 { lo[1] + j as f64 * hy } else { 0.0 };
                let corners: Vec<Option<f64>> = if n == 2 {
                    [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (0.5, 0.5)]
                        .iter()
                        .map(|(a, b)| point(&[x0 + a * hx, y0 + b * hy]))
                        .collect()
                } else {
                    [0.0, 1.0, 0.5].iter().map(|a| point(&[x0 + a * hx])).collect()
                };
                let inside: Vec<f64> = corners.iter().flatten().copied().collect();
                if inside.is_empty() {
                    continue;
                }
                let (cmin, cmax) = inside.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &h| (a.min(h), b.max(h)));
                let straddles = inside.len() < corners.len() || bin_of(edges, cmin) != bin_of(edges, cmax);
                let centre = *corners.last().unwrap();
                if !straddles {
                    if let Some(k) = centre.and_then(|h| bin_of(edges, h)) {
                        acc[k] += hx * hy;
                    }
                    continue;
                }
                let sub_x = hx / SUB as f64;
                let sub_y = if n == 2 { hy / SUB as f64 } else { 1.0 };
                for a in 0..SUB {
                    for b in 0..(if n == 2 { SUB } else { 1 }) {
                        let xs = x0 + (a as f64 + 0.5) * sub_x;
                        let h = if n == 2 {
                            point(&[xs, y0 + (b as f64 + 0.5) * sub_y])
                        } else {
                            point(&[xs])
                        };
                        if let Some(k) = h.and_then(|h| bin_of(edges, h)) {
                            acc[k] += sub_x * sub_y;
                        }
                    }
                }
            }
            (acc, hmin, hmax)
        })
        .collect();

    let mut areas = vec![0.0; nb];
    let (mut hmin, mut hmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for (acc, a, b) in rows {
        for (t, v) in areas.iter_mut().zip(acc) {
            *t += v;
        }
        hmin = hmin.min(a);
        hmax = hmax.max(b);
    }
    Ok((areas, hmin, hmax))
}

fn fit_line(centers: &[f64], j: &[f64], edges: &[f64], d: f64, window: (f64, f64)) -> Result<JacobianFit> {
    let tol = 1e-12 * window.1.abs().max(1.0);
    let used: Vec<usize> = (0..j.len())
        .filter(|&k| edges[k] >= window.0 - tol && edges[k + 1] <= window.1 + tol)
        .collect();
    if used.iter().any(|&k| j[k] == 0.0) || used.len() < 2 {
        return Err(Error::EmptyBins {
            lo: window.0,
            hi: window.1,
        });
    }
    // weighted by bin width
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &k in &used {
        let w = edges[k + 1] - edges[k];
        let x = centers[k] - d;
        sw += w;
        sx += w * x;
        sy += w * j[k];
        sxx += w * x * x;
        sxy += w * x * j[k];
    }
    let det = sw * sxx - sx * sx;
    if !(det.abs() > 0.0) {
        return Err(Error::Fit("Jacobian fit window holds a single gap value".into()));
    }
    let j1 = (sw * sxy - sx * sy) / det;
    let j0 = (sy - j1 * sx) / sw;
    let residual_max = used
        .iter()
        .map(|&k| ((j0 + j1 * (centers[k] - d) - j[k]) / j[k]).abs())
        .fold(0.0, f64::max);
    Ok(JacobianFit {
        window,
        j0,
        j1,
        residual_max,
        bins_used: used.len(),
    })
}

/// Histogram of planform area per unit gap, `J_k = area{h in bin k} / width_k`,
/// with a linear fit over the near-contact window.
pub fn compute_jacobian(p: &SurfaceProfile, opts: &JacobianOptions) -> Result<JacobianProfile> {
    if opts.n_bins < 2 && opts.edges.is_none() {
        return Err(Error::param("n_bins", "need at least two bins"));
    }
    if !(opts.window_frac > 0.0) {
        return Err(Error::param("window_frac", "must be positive"));
    }
    let n = p.base_dim();
    let radial = p.radial_reduction_possible() && p.planform().is_bounded() && {
        let rm = p.planform().extent();
        is_radially_monotone(p, rm)
    };

    // closest distance and height range
    let (d, h_top) = if radial {
        let rm = p.planform().extent();
        (p.radial(0.0).unwrap().height, p.radial(rm).unwrap().height)
    } else {
        let probe = uniform_edges(0.0, 1.0, 1);
        let (_, lo, hi) = cell_areas(p, &probe, opts.cells.min(128))?;
        (p.closest_distance().unwrap_or(lo), hi)
    };
    if h_top - d <= 1e-12 * d.abs().max(f64::MIN_POSITIVE) {
        return Ok(JacobianProfile {
            d,
            edges: Vec::new(),
            centers: Vec::new(),
            j: Vec::new(),
            method: if radial { "level_set" } else { "cell_refinement" }.into(),
            degenerate: true,
            fit: None,
        });
    }

    let reach = p.apex_radius().map_or(h_top - d, |r| r);
    let window = opts.window.unwrap_or((d, d + opts.window_frac * reach));
    if !(window.1 > window.0) {
        return Err(Error::param("window", format!("empty fit window {window:?}")));
    }
    let edges = match &opts.edges {
        Some(e) => {
            if e.len() < 3 || e.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::param("edges", "bin edges must be strictly increasing, at least two bins"));
            }
            e.clone()
        }
        None => uniform_edges(window.0, window.1, opts.n_bins),
    };
    let centers: Vec<f64> = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();

    let (areas, method) = if radial {
        let rm = p.planform().extent();
        let cap = sphere_surface(n) / n as f64;
        let vol: Vec<f64> = edges.iter().map(|&h| cap * level_radius(p, h, rm).powi(n as i32)).collect();
        (vol.windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>(), "level_set")
    } else {
        (cell_areas(p, &edges, opts.cells)?.0, "cell_refinement")
    };
    let j: Vec<f64> = areas.iter().zip(edges.windows(2)).map(|(a, w)| a / (w[1] - w[0])).collect();
    let fit = fit_line(&centers, &j, &edges, d, window)?;
    Ok(JacobianProfile {
        d,
        edges,
        centers,
        j,
        method: method.into(),
        degenerate: false,
        fit: Some(fit),
    })
}

/// `f = J0 E_par(d) - J1 int_d^inf E_par`.
pub fn blocki_force(e_par: &InteractionKernel, j0: f64, j1: f64, d: f64, spec: &QuadratureSpec) -> Result<f64> {
    let tail = if j1 == 0.0 { 0.0 } else { e_par.tail_integral(d, spec)?.value };
    Ok(j0 * e_par.e_par(d) - j1 * tail)
}

/// Blocki force from a fitted Jacobian.
pub fn eval_blocki_force(e_par: &InteractionKernel, jac: &JacobianProfile, d: f64, spec: &QuadratureSpec) -> Result<f64> {
    let fit = jac
        .fit
        .ok_or_else(|| Error::Fit("Jacobian is degenerate; no linear expansion available".into()))?;
    blocki_force(e_par, fit.j0, fit.j1, d, spec)
}

/// `int_d^inf (J0 + J1 (h - d)) E_par(h) dh`, the energy of the linearized
/// Jacobian (equal to the PFA whenever J is exactly linear).
pub fn blocki_energy(e_par: &InteractionKernel, j0: f64, j1: f64, d: f64, spec: &QuadratureSpec) -> Result<Estimate> {
    let t1 = e_par.tail_integral(d, spec)?;
    if j1 == 0.0 {
        return Ok(t1 * j0);
    }
    let t2 = match e_par.power_law() {
        Some(l) if l.v0 == 0.0 => Estimate::exact(0.0),
        Some(l) if l.p <= 2.0 => return Err(Error::DivergentTail { exponent: l.p - 1.0 }),
        Some(l) => Estimate::exact(l.v0 * d.powf(2.0 - l.p) / ((l.p - 1.0) * (l.p - 2.0))),
        None => {
            let f = |h: f64| Ok(Estimate::exact((h - d) * e_par.e_par(h)));
            semi_infinite_with(&f, d, d, &[], spec)?
        }
    };
    Ok(t1 * j0 + t2 * j1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{kernel_casimir_scalar, kernel_power_law, Boundary};
    use crate::profiles::{make_constant, make_gaussian_bump, make_paraboloid, make_sphere};
    use std::f64::consts::PI;

    #[test]
    fn sphere_level_sets_are_linear() {
        let (a, r) = (1.0, 100.0);
        let p = make_sphere(a, r, 90.0).unwrap();
        let jac = compute_jacobian(&p, &JacobianOptions::default()).unwrap();
        assert_eq!(jac.method, "level_set");
        for (h, j) in jac.centers.iter().zip(&jac.j) {
            let truth = 2.0 * PI * (r + a - h);
            assert!(((j - truth) / truth).abs() < 1e-9);
        }
        let fit = jac.fit.unwrap();
        assert!((fit.j0 / (2.0 * PI * r) - 1.0).abs() < 1e-9);
        assert!((fit.j1 / (-2.0 * PI) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn osculating_paraboloid_has_constant_jacobian() {
        let (a, r) = (0.5f64, 20.0f64);
        let sigma = (2.0 * a * r).sqrt();
        let p = make_paraboloid(a, sigma).unwrap().with_planform(Planform::Ball { radius: 15.0 }).unwrap();
        let jac = compute_jacobian(&p, &JacobianOptions::default()).unwrap();
        for j in &jac.j {
            assert!((j / (2.0 * PI * r) - 1.0).abs() < 1e-9);
        }
        assert!(jac.fit.unwrap().j1.abs() < 1e-6);
    }

    #[test]
    fn general_path_matches_level_sets() {
        let p = make_gaussian_bump(1.0, 2.0, [1.0, 1.0], Planform::Rect { lo: vec![-3.0, -3.0], hi: vec![3.0, 3.0] }).unwrap();
        let opts = JacobianOptions {
            window: Some((1.0, 2.0)),
            n_bins: 10,
            ..Default::default()
        };
        let exact = {
            let q = make_gaussian_bump(1.0, 2.0, [1.0, 1.0], Planform::Ball { radius: 3.0 }).unwrap();
            compute_jacobian(&q, &opts).unwrap()
        };
        let general = compute_jacobian(&p, &JacobianOptions { cells: 400, ..opts.clone() }).unwrap();
        assert_eq!(general.method, "cell_refinement");
        for (g, e) in general.j.iter().zip(&exact.j) {
            assert!(((g - e) / e).abs() < 5e-3, "{g} {e}");
        }
    }

    #[test]
    fn constant_profile_is_degenerate() {
        let p = make_constant(2.0, 2, Planform::Ball { radius: 1.0 }).unwrap();
        let jac = compute_jacobian(&p, &JacobianOptions::default()).unwrap();
        assert!(jac.degenerate && jac.fit.is_none());
        let k = kernel_casimir_scalar(Boundary::Dirichlet);
        assert!(eval_blocki_force(&k, &jac, 2.0, &QuadratureSpec::default()).is_err());
    }

    #[test]
    fn window_beyond_profile_has_empty_bins() {
        let p = make_sphere(1.0, 10.0, 2.0).unwrap();
        let opts = JacobianOptions {
            window: Some((1.0, 5.0)),
            ..Default::default()
        };
        assert!(matches!(compute_jacobian(&p, &opts), Err(Error::EmptyBins { .. })));
    }

    #[test]
    fn blocki_closed_form() {
        let k = kernel_casimir_scalar(Boundary::Dirichlet);
        let (r, d) = (100.0, 1.0);
        let f = blocki_force(&k, 2.0 * PI * r, -2.0 * PI, d, &QuadratureSpec::default()).unwrap();
        let truth = -PI.powi(3) * r / (720.0 * d.powi(3)) - PI.powi(3) / (1440.0 * d * d);
        assert!(((f - truth) / truth).abs() < 1e-12);
        assert!((f + 4.327_959_453).abs() < 1e-8);
        // J1 = 0 reduces to the Derjaguin force
        let f_da = blocki_force(&k, 2.0 * PI * r, 0.0, d, &QuadratureSpec::default()).unwrap();
        assert!((f_da + 4.306_427_317).abs() < 1e-8);
        let zero = kernel_power_law(0.0, 0.0, 3.0).unwrap();
        assert_eq!(blocki_force(&zero, 1.0, 1.0, d, &QuadratureSpec::default()).unwrap(), 0.0);
    }

    #[test]
    fn linear_jacobian_energy_reproduces_pfa() {
        let (a, r, rm) = (0.01, 1.0, 0.9);
        let p = make_sphere(a, r, rm).unwrap();
        let k = kernel_casimir_scalar(Boundary::Dirichlet);
        let s = QuadratureSpec::default();
        let pfa = crate::engine::eval_pfa(&k, &p, &s).unwrap().f0.value;
        // full planform truncation: the linear J runs to h = R + a, the sphere stops at psi(rho_m)
        let full = blocki_energy(&k, 2.0 * PI * r, -2.0 * PI, a, &s).unwrap().value;
        let h_m = p.radial(rm).unwrap().height;
        let cut = {
            let f = |h: f64| 2.0 * PI * (r + a - h) * k.e_par(h);
            crate::quadrature::integrate_semi_infinite(f, h_m, h_m, &s).unwrap().value
        };
        assert!(((full - cut - pfa) / pfa).abs() < 1e-9);
    }
}
