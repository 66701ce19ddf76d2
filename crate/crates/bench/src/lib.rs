//! Fixtures shared by the criterion benches.

use deforce_core::kernels::{kernel_casimir_scalar, kernel_patch, kernel_power_law_c, PatchCorrelation};
use deforce_core::profiles::{make_gaussian_bump, make_sphere};
use deforce_core::{Boundary, InteractionKernel, Planform, SurfaceProfile};

/// Dirichlet Casimir kernel and a sphere at `a/R = 1e-3`.
pub fn casimir_sphere() -> (InteractionKernel, SurfaceProfile) {
    (kernel_casimir_scalar(Boundary::Dirichlet), make_sphere(1e-3, 1.0, 0.9).unwrap())
}

/// Kernel with a fourth-order coefficient over an anisotropic bump, which
/// forces the nested two-dimensional quadrature.
pub fn bump_de4() -> (InteractionKernel, SurfaceProfile) {
    let plan = Planform::Rect {
        lo: vec![-4.0, -4.0],
        hi: vec![4.0, 4.0],
    };
    (
        kernel_power_law_c(-1.0, -0.5, Some(0.1), 3.0).unwrap(),
        make_gaussian_bump(0.5, 1.0, [1.0, 2.0], plan).unwrap(),
    )
}

pub fn patch_kernel(ell: f64) -> InteractionKernel {
    kernel_patch(PatchCorrelation::gaussian(), 1.0, ell, 1.0).unwrap()
}
