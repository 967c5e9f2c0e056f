//! Domain-adaptive damage classification from ultrasonic coda waves.
//!
//! The crate pairs a coda-wave preprocessing front end (stretching-based
//! dv/v estimation and two-point statistics) with a 1D-CNN classifier
//! that is trained across a simulation-to-measurement domain gap using
//! adversarial feature alignment, a class-confusion penalty on the
//! unlabeled target domain, and BYOL-style self-supervision. A built-in
//! synthetic benchmark with a controllable domain shift exercises the
//! whole pipeline at desk scale.
//!
//! Modules follow the pipeline order:
//!
//! - [`signal`]: waveform primitives, the stretching estimator, lagged
//!   two-point statistics, augmentation.
//! - [`data`]: dataset format, loaders, batch iteration, and the
//!   synthetic source/target benchmark generator.
//! - [`model`]: the shared feature extractor, classifier, domain
//!   discriminator with gradient reversal, and the BYOL heads.
//! - [`losses`]: task, adversarial, class-confusion, and BYOL losses
//!   with hand-derived gradients.
//! - [`train`]: the joint optimization loop, Adam, checkpointing.
//! - [`eval`]: metrics, robustness studies, ablation tables.
//! - [`config`]: the run configuration file and the run manifest.
//! - [`report`]: CSV/SVG rendering of stored results.

pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod losses;
pub mod model;
pub mod nn;
pub mod report;
pub mod scalar;
pub mod seed;
pub mod signal;
pub mod train;

pub use error::{Error, Result};
