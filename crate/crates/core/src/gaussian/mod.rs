//! Covariance-matrix data model, physicality checks, local symplectic
//! transforms and seeded state generation.

mod covariance;
mod recipe;
mod symplectic;

pub use covariance::{
    characteristic_function, symplectic_form, uncertainty_margin, validate_physicality,
    LocalCovariance, Mode, PhysicalityReport, PhysicalityVerdict, TwoModeCovariance, EPS_PSD,
};
pub use recipe::{
    generate_random_state, generate_recipe, ElementaryOp, GenerationParams, GenerationRecipe,
    StateFamily,
};
pub use symplectic::{
    apply_all, apply_local_symplectic, invert_local_symplectic, undo_all, LocalSymplectic,
};
