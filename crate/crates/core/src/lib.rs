//! Classification by constructive interference of routed signals.
//!
//! Image patches act as sources that emit unit "dipole" signals. Every class
//! owns a target site with a constant host vector and a table of route
//! probabilities over travel durations. A target's goal is the peak of the
//! cumulative host-guest interaction energy of the signals it receives, and
//! the predicted class is the target with the largest goal. Training shifts
//! route mass toward durations that deliver host-like signals, with a local
//! reward rule and no gradients.
//!
//! ```
//! use interference::{codec::encode_patch, engine::InterferenceModel, policy::LearningRates};
//!
//! let mut model = InterferenceModel::mnist(&[0, 1, 2, 4], LearningRates::default()).unwrap();
//! let white: Vec<_> = (0..81).map(|s| encode_patch(&[1; 9], s, 0)).collect();
//! model.train_episode(&white, 1);
//! assert_eq!(model.predict(&white).label, 1);
//! ```

pub mod baseline;
pub mod codec;
pub mod double_slit;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod meanfield;
pub mod metrics;
pub mod mnist;
pub mod policy;
pub mod trainer;

pub use error::{Error, IdxError, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/signals.md")]
    mod signals {}
    #[doc = include_str!("../../../book/src/routes.md")]
    mod routes {}
    #[doc = include_str!("../../../book/src/energy.md")]
    mod energy {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    mod diagnostics {}
    #[doc = include_str!("../../../book/src/double_slit.md")]
    mod double_slit {}
    #[doc = include_str!("../../../book/src/meanfield.md")]
    mod meanfield {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
