use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::InteractionKernel;
use crate::quadrature::{Estimate, QuadratureSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerjaguinResult {
    pub r_eff: f64,
    pub energy: Estimate,
    pub force: f64,
}

/// `R1 R2 / (R1 + R2)`; an infinite `R2` (a plane) gives `R1`.
pub fn effective_radius(r1: f64, r2: f64) -> Result<f64> {
    if !(r1 > 0.0) || !(r2 > 0.0) {
        return Err(Error::param("R", format!("radii must be positive, got {r1} and {r2}")));
    }
    match (r1.is_finite(), r2.is_finite()) {
        (true, true) => Ok(r1 * r2 / (r1 + r2)),
        (true, false) => Ok(r1),
        (false, true) => Ok(r2),
        (false, false) => Err(Error::param("R", "at least one radius must be finite")),
    }
}

/// Derjaguin energy `2 pi R_eff int_d^inf E_par` and force `2 pi R_eff E_par(d)`.
pub fn eval_derjaguin(e_par: &InteractionKernel, d: f64, r1: f64, r2: f64, spec: &QuadratureSpec) -> Result<DerjaguinResult> {
    let r_eff = effective_radius(r1, r2)?;
    let tail = e_par.tail_integral(d, spec)?;
    Ok(DerjaguinResult {
        r_eff,
        energy: tail * (2.0 * PI * r_eff),
        force: 2.0 * PI * r_eff * e_par.e_par(d),
    })
}
