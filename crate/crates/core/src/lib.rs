//! Age-direction editing toolkit for generator latent spaces.
//!
//! The crate works purely on serialized latent vectors and on scores produced
//! by external models. It fits a linear age direction with support vector
//! regression, selects latent components relevant to age and identity with
//! PCA/LDA subspace reconstruction, calibrates scalar steps against apparent
//! age with per-group polynomials, and summarises identity preservation from
//! face-verification scores.

pub mod calibrate;
pub mod direction;
pub mod evaluate;
pub mod format;
pub mod groups;
pub mod latent;
mod linalg;
pub mod scaler;
pub mod select;
mod svr;

pub use calibrate::{
    fit_group_curves, scalar_offset, solve_scalar_for_age, CalibrationError, CalibrationModel,
    CalibrationSample, GroupCurve, LinearFit, ScalarOffset, ScalarSolution,
};
pub use direction::{
    edit_latent, edit_latent_weighted, fit_age_direction, predict_age, AgeDirection,
    DirectionError, SvrConfig, TrainMeta,
};
pub use evaluate::{
    age_gain, gain_at_rate, sweep_curve, verification_rate, AgeGain, EditDirection, EvalError,
    EvaluationRecord, GainCurve, GainPoint,
};
pub use format::{load_latents, save_latents};
pub use groups::AgeGroupScheme;
pub use latent::{LabeledLatentSet, LatentError, LatentVector, SampleMeta};
pub use scaler::{standardize, Scaler};
pub use select::{
    combine_masks, component_distances, compose_phi, lda_basis, lda_mask, pca_mask, reconstruct,
    reduce_basis, threshold_mask, ComponentMask, DistanceMetric, DistanceProfile, LdaBasis,
    MaskProvenance, PhiWeights, SelectError,
};
