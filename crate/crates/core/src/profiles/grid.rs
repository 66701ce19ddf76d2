//! Gridded two-dimensional profiles loaded from CSV.
//!
//! Format: a spacing header line followed by `x1,x2,psi` rows covering a
//! complete uniform grid (any row order):
//!
//! ```text
//! # spacing: 0.1, 0.1
//! x1,x2,psi
//! 0.0,0.0,1.0
//! ...
//! ```
//!
//! Nodal derivatives use second-order finite differences (central inside,
//! one-sided at the edges) and are interpolated bilinearly between nodes.
//! Second derivatives need at least four nodes per axis.

use std::io::Read;
use std::path::Path;

use super::{LocalGeometry, Planform};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GridData {
    origin: [f64; 2],
    spacing: [f64; 2],
    nx: usize,
    ny: usize,
    psi: Vec<f64>,
    // d/dx, d/dy
    grad: [Vec<f64>; 2],
    // xx, xy, yy
    hess: Option<[Vec<f64>; 3]>,
}

fn parse_spacing(line: &str) -> Result<[f64; 2]> {
    let body = line
        .trim()
        .strip_prefix('#')
        .map(str::trim)
        .and_then(|s| s.strip_prefix("spacing"))
        .ok_or_else(|| Error::Data(format!("first line must be a `# spacing: hx, hy` header, got {line:?}")))?;
    let body = body.trim_start_matches([':', '=', ' ']);
    let vals: Vec<f64> = body
        .split([',', ' ', '\t'])
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| Error::Data(format!("bad spacing value {s:?}: {e}"))))
        .collect::<Result<_>>()?;
    match vals.as_slice() {
        [h] => Ok([*h, *h]),
        [hx, hy] => Ok([*hx, *hy]),
        _ => Err(Error::Data(format!("spacing header needs one or two values, got {}", vals.len()))),
    }
}

/// First derivative along a line of samples, second order everywhere.
fn d1(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    (0..n)
        .map(|i| {
            if i == 0 {
                (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h)
            } else {
                (f[i + 1] - f[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

fn d2(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let h2 = h * h;
    (0..n)
        .map(|i| {
            if i == 0 {
                (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2
            } else if i == n - 1 {
                (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / h2
            } else {
                (f[i + 1] - 2.0 * f[i] + f[i - 1]) / h2
            }
        })
        .collect()
}

impl GridData {
    /// Build from node values stored row-major, `psi[i + nx * j]` at
    /// `(origin[0] + i hx, origin[1] + j hy)`.
    pub fn new(origin: [f64; 2], spacing: [f64; 2], nx: usize, ny: usize, psi: Vec<f64>) -> Result<Self> {
        if !(spacing[0] > 0.0 && spacing[1] > 0.0) || !spacing.iter().all(|h| h.is_finite()) {
            return Err(Error::param("spacing", format!("must be positive, got {spacing:?}")));
        }
        if nx < 3 || ny < 3 {
            return Err(Error::Data(format!("grid needs at least 3 nodes per axis, got {nx} x {ny}")));
        }
        if psi.len() != nx * ny {
            return Err(Error::Data(format!("expected {} samples, got {}", nx * ny, psi.len())));
        }
        if let Some(bad) = psi.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Data(format!(
                "gap must be positive and finite, node ({}, {}) has {}",
                bad % nx,
                bad / nx,
                psi[bad]
            )));
        }
        let idx = |i: usize, j: usize| i + nx * j;
        let along_x = |field: &[f64], op: fn(&[f64], f64) -> Vec<f64>| {
            let mut out = vec![0.0; nx * ny];
            for j in 0..ny {
                let row: Vec<f64> = (0..nx).map(|i| field[idx(i, j)]).collect();
                for (i, v) in op(&row, spacing[0]).into_iter().enumerate() {
                    out[idx(i, j)] = v;
                }
            }
            out
        };
        let along_y = |field: &[f64], op: fn(&[f64], f64) -> Vec<f64>| {
            let mut out = vec![0.0; nx * ny];
            for i in 0..nx {
                let col: Vec<f64> = (0..ny).map(|j| field[idx(i, j)]).collect();
                for (j, v) in op(&col, spacing[1]).into_iter().enumerate() {
                    out[idx(i, j)] = v;
                }
            }
            out
        };
        let gx = along_x(&psi, d1);
        let gy = along_y(&psi, d1);
        let hess = if nx >= 4 && ny >= 4 {
            Some([along_x(&psi, d2), along_y(&gx, d1), along_y(&psi, d2)])
        } else {
            None
        };
        Ok(Self {
            origin,
            spacing,
            nx,
            ny,
            psi,
            grad: [gx, gy],
            hess,
        })
    }

    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut text = String::new();
        let mut reader = reader;
        reader
            .read_to_string(&mut text)
            .map_err(|e| Error::Data(format!("read failed: {e}")))?;
        let (first, rest) = text.split_once('\n').unwrap_or((text.as_str(), ""));
        let spacing = parse_spacing(first)?;

        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(rest.as_bytes());
        let headers = rdr.headers().map_err(|e| Error::Data(e.to_string()))?.clone();
        let cols: Vec<&str> = headers.iter().collect();
        if cols != ["x1", "x2", "psi"] {
            return Err(Error::Data(format!("expected columns x1,x2,psi, got {cols:?}")));
        }
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Data(e.to_string()))?;
            let parse = |k: usize| -> Result<f64> {
                rec.get(k)
                    .ok_or_else(|| Error::Data(format!("row {}: missing column {k}", line + 1)))?
                    .parse::<f64>()
                    .map_err(|e| Error::Data(format!("row {}: {e}", line + 1)))
            };
            rows.push([parse(0)?, parse(1)?, parse(2)?]);
        }
        if rows.is_empty() {
            return Err(Error::Data("no grid rows".into()));
        }
        let x0 = rows.iter().map(|r| r[0]).fold(f64::INFINITY, f64::min);
        let y0 = rows.iter().map(|r| r[1]).fold(f64::INFINITY, f64::min);
        let x1 = rows.iter().map(|r| r[0]).fold(f64::NEG_INFINITY, f64::max);
        let y1 = rows.iter().map(|r| r[1]).fold(f64::NEG_INFINITY, f64::max);
        let nx = ((x1 - x0) / spacing[0]).round() as usize + 1;
        let ny = ((y1 - y0) / spacing[1]).round() as usize + 1;
        if nx * ny != rows.len() {
            return Err(Error::Data(format!(
                "{} rows do not fill a {nx} x {ny} grid with the declared spacing",
                rows.len()
            )));
        }
        let mut psi = vec![f64::NAN; nx * ny];
        for r in &rows {
            let fi = (r[0] - x0) / spacing[0];
            let fj = (r[1] - y0) / spacing[1];
            let (i, j) = (fi.round(), fj.round());
            if (fi - i).abs() > 1e-6 || (fj - j).abs() > 1e-6 {
                return Err(Error::Data(format!("node ({}, {}) is off the declared grid", r[0], r[1])));
            }
            let k = i as usize + nx * j as usize;
            if !psi[k].is_nan() {
                return Err(Error::Data(format!("duplicate node ({}, {})", r[0], r[1])));
            }
            psi[k] = r[2];
        }
        Self::new([x0, y0], spacing, nx, ny, psi)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        Self::from_csv(f)
    }

    pub fn spacing(&self) -> [f64; 2] {
        self.spacing
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn has_hessian(&self) -> bool {
        self.hess.is_some()
    }

    pub fn min_height(&self) -> f64 {
        self.psi.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn planform(&self) -> Planform {
        Planform::Rect {
            lo: self.origin.to_vec(),
            hi: vec![
                self.origin[0] + (self.nx - 1) as f64 * self.spacing[0],
                self.origin[1] + (self.ny - 1) as f64 * self.spacing[1],
            ],
        }
    }

    /// Interior grid lines per axis.
    pub(crate) fn lines(&self) -> Vec<Vec<f64>> {
        vec![
            (1..self.nx - 1).map(|i| self.origin[0] + i as f64 * self.spacing[0]).collect(),
            (1..self.ny - 1).map(|j| self.origin[1] + j as f64 * self.spacing[1]).collect(),
        ]
    }

    fn cell(&self, v: f64, axis: usize) -> (usize, f64) {
        let n = if axis == 0 { self.nx } else { self.ny };
        let t = ((v - self.origin[axis]) / self.spacing[axis]).clamp(0.0, (n - 1) as f64);
        let i = (t.floor() as usize).min(n - 2);
        (i, t - i as f64)
    }

    fn bilinear(&self, field: &[f64], i: usize, j: usize, tx: f64, ty: f64) -> f64 {
        let at = |a: usize, b: usize| field[a + self.nx * b];
        (1.0 - tx) * (1.0 - ty) * at(i, j) + tx * (1.0 - ty) * at(i + 1, j) + (1.0 - tx) * ty * at(i, j + 1)
            + tx * ty * at(i + 1, j + 1)
    }

    pub(crate) fn local(&self, x: &[f64]) -> LocalGeometry {
        let (i, tx) = self.cell(x[0], 0);
        let (j, ty) = self.cell(x[1], 1);
        let b = |f: &[f64]| self.bilinear(f, i, j, tx, ty);
        let hessian = self.hess.as_ref().map(|[hxx, hxy, hyy]| {
            let (xx, xy, yy) = (b(hxx), b(hxy), b(hyy));
            [[xx, xy, 0.0], [xy, yy, 0.0], [0.0; 3]]
        });
        LocalGeometry {
            dim: 2,
            height: b(&self.psi),
            gradient: [b(&self.grad[0]), b(&self.grad[1]), 0.0],
            hessian,
        }
    }
}
