pub mod bench;
pub mod config;
pub mod dataset;
pub mod dimreduce;
pub mod error;
pub mod features;
pub mod fixedpoint;
pub mod logistic;
pub mod paillier;
pub mod protocol;
pub mod rng;
pub mod synth;
pub mod transport;
pub mod wire;

pub use error::{Error, Result};

/// The guide's chapters, compiled so that their code blocks run as doctests.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/paillier.md")]
    pub mod paillier {}
    #[doc = include_str!("../../../book/src/fixed-point.md")]
    pub mod fixed_point {}
    #[doc = include_str!("../../../book/src/logistic.md")]
    pub mod logistic {}
    #[doc = include_str!("../../../book/src/training.md")]
    pub mod training {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    pub mod evaluation {}
    #[doc = include_str!("../../../book/src/features.md")]
    pub mod features {}
    #[doc = include_str!("../../../book/src/dimreduce.md")]
    pub mod dimreduce {}
    #[doc = include_str!("../../../book/src/sessions.md")]
    pub mod sessions {}
    #[doc = include_str!("../../../book/src/parameters.md")]
    pub mod parameters {}
}
