//! Laplacian spectra of metric graphs through the bond scattering matrix.

mod bonds;
mod decouple;
mod spectrum;

pub use bonds::{eigenphases, vertex_scattering, BondBasis, SecularOperator};
pub use decouple::dirichlet_decouple;
pub use spectrum::{
    count, eigenvalues_first, eigenvalues_up_to, weyl_ratio, zero_modes, Level, MetricSolver, Spectrum,
    DEFAULT_COUNT_TOL, PHASE_TOL,
};
