//! Coefficient extraction and consistency checks built on the engine.

mod checks;
mod fit;

pub use checks::{
    additivity_check, em_additivity_check, scaling_check, AdditivityReport, AdditivityRow, ScalingReport, ScalingRow,
    ADDITIVITY_TOL, SCALING_TOL,
};
pub use fit::{
    default_ladder, gamma_fit, gamma_fit_log, ladder_ratios, leading_pfa, CoefficientFit, Family, FitModel, FitOptions,
    FitReport, Rung,
};
