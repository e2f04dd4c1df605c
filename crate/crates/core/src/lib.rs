//! Numerical workbench for the quantum geometry of harmonic Bloch bands over
//! elliptic Brillouin zones.
//!
//! The pipeline builds a degree-N holomorphic lift from level-N theta
//! functions, orthonormalizes its analytic jets into the tower of harmonic
//! bands, and verifies the quantitative identities of their quantum
//! geometry:
//!
//! - spectral calculus on periodic grids ([`spectral`]),
//! - theta evaluation with derivatives and the jet lift ([`theta`]),
//! - Gram–Schmidt frames, level/osculating projectors ([`frames`]),
//! - quantum metric, Berry curvature, plaquette Chern numbers, Wirtinger
//!   saturation, integrated trace, harmonicity ([`geometry`]),
//! - Ricci forms and the level recurrence with two-sided reconstruction
//!   ([`recurrence`]),
//! - unitary/projective recovery between isometric band pairs ([`rigidity`]),
//! - tight-binding ingestion and Fermi projectors ([`tightbinding`]).
//!
//! Everything grid-point-local runs data-parallel (feature `parallel`, on by
//! default, backed by rayon); reductions stay in fixed order so outputs are
//! bit-stable across runs and thread counts.

pub mod error;
pub mod par;

pub mod grid;
pub mod spectral;
pub mod theta;

pub mod frames;
pub mod geometry;
pub mod recurrence;
pub mod rigidity;
pub mod tightbinding;

pub use error::{Error, Result};
pub use frames::{
    check_no_hyperosculation, gram_schmidt_frames, level_projector, osculating_projector,
    HyperosculationReport, OrthoFrameField, ProjectorField,
};
pub use geometry::{
    associated_two_form, chern_number, degree_from_curvature, harmonicity_residual,
    integrated_trace, qgt, wirtinger_residual, ChernReport, QGTField,
};
pub use grid::{to_complex, BZGrid, ModularParameter, PeriodicField, TwoFormField};
pub use recurrence::{recurrence_residuals, reconstruct_sequence, ricci_form, RecurrenceReport};
pub use rigidity::{
    gl_conjugation_residual, metric_distance, random_unitary, recover_projective, recover_unitary,
    verify_conjugation, MetricDistance, UnitaryRecovery,
};
pub use spectral::{integrate_two_form, laplacian_z, spectral_derivative, Direction};
pub use theta::{
    embedding_lift, embedding_lift_shifted, theta_eval, JetFrameField, ThetaBasis,
};
pub use tightbinding::{
    atomic_insulator, bloch_hamiltonian, fermi_projector_field, kahler_deviation,
    parse_hopping_spec, two_band_model, BlochField, FermiProjector, HoppingSpec,
    DEFAULT_GAP_THRESHOLD,
};
