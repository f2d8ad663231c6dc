//! Polarization and two-qubit linear algebra.

mod rotation;
mod state;
mod stokes;

pub(crate) use rotation::nearest_rotation;
pub use rotation::{
    poincare_from_su2, relative_angle, rotation_angle, stokes_paulis, su2_from_poincare, PoincareRotation,
    ROTATION_TOLERANCE,
};
pub use state::{
    apply_one_sided, bell_phi_plus, bell_psi_plus, coincidence_probability, fidelity_from_residual_rotation,
    fidelity_of_matrix, fidelity_to_phi_plus, werner_state, TwoQubitState,
};
pub use stokes::{MeasurementMode, StokesVector};
