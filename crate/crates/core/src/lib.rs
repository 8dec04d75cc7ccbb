//! Learning rating predictors from missing-not-at-random explicit feedback.
//!
//! The crate provides the loss estimators (ideal, naive, inverse-propensity and
//! pseudo-label), seven propensity estimators, biased matrix factorization
//! trained with Adam, the asymmetric tri-training procedure with its bound
//! terms, recommender metrics, a synthetic ground-truth generator for Monte
//! Carlo checks, and the experiment drivers behind the `tritrain` CLI.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the bottom of this file fix the common `f64` instantiations.

// Positivity checks are written `!(x > 0)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod datasets;
pub mod domain;
pub mod error;
pub mod experiment;
pub mod loss;
pub mod metrics;
pub mod mf;
pub mod propensity;
pub mod rng;
pub mod scalar;
pub mod synthetic;
pub mod tri;

pub use domain::{
    clamp_rating, ConstantPredictor, DenseMatrix, InteractionRecord, Predictor, PseudoLabel,
    PseudoLabeledSet, RatingDataset,
};
pub use error::{Error, Result};
pub use loss::{ideal_loss, ips_loss, naive_loss, pseudo_loss, LossKind, PointwiseLoss};
pub use mf::{FactorModel, TrainConfig};
pub use propensity::{PropensityKind, PropensityModel, PropensityScore};
pub use scalar::Scalar;

pub type DenseRatingMatrix = DenseMatrix<f64>;
pub type FactorModel64 = FactorModel<f64>;
pub type FactorModel32 = FactorModel<f32>;
pub type PropensityModel64 = PropensityModel<f64>;
pub type PseudoLabeledSet64 = PseudoLabeledSet<f64>;
pub type PointwiseLoss64 = PointwiseLoss<f64>;
