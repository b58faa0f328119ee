//! Toolkit for studying whether synthetic tabular data can stand in for real
//! credit data when training risk models.
//!
//! The pieces fit together as a pipeline:
//!
//! * [`tabular`] holds column-typed datasets and CSV ingestion.
//! * [`transform`] turns mixed-type rows into the dense numeric matrices the
//!   generative models consume, and back.
//! * [`neural`] is a small dense-network layer with reverse-mode gradients,
//!   enough for the two deep generators.
//! * [`synth`] implements the generators themselves (a VAE, a conditional
//!   GAN, and an independent-marginals baseline).
//! * [`metrics`] measures marginal fidelity and downstream utility.
//! * [`models`] has the two supervised learners used for evaluation
//!   (logistic regression and gradient boosting).
//! * [`select`] filters and de-correlates features the same way on every
//!   training fold.
//! * [`simdata`] simulates a two-year credit dataset with network-derived
//!   features and controllable drift.
//! * [`bench`] wires everything into reproducible experiment runs and
//!   report tables.

pub mod bench;
pub mod metrics;
pub mod models;
pub mod neural;
pub mod select;
pub mod simdata;
pub mod synth;
pub mod tabular;
pub mod transform;

pub(crate) mod seed;
