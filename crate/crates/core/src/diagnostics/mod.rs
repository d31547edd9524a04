//! Energy, dissipation and the invariant checks run over flow trajectories.

pub mod checks;
pub mod measures;

pub use checks::{
    boundary_asymptotics_fit, check_barrier_containment, check_boundary_asymptotics,
    check_energy_balance, check_gradient_quantity, check_height_bound, check_monotone,
    check_w_growth, divergence_identity_defect, AsymptoticsFit, CheckOutcome, CheckStatus, Side,
    VerificationReport,
};
pub use measures::{dissipation, energy, gradient_quantity, DiagnosticsRecord};
