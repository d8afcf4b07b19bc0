//! Evidential regression with a Weibull likelihood and an inverse-gamma prior
//! on `λᵏ`, alongside the normal-inverse-gamma benchmark.

pub mod cli;
pub mod datasets;
pub mod distributions;
pub mod error;
pub mod evidential_nig;
pub mod evidential_weibull;
pub mod mc_validation;
pub mod neural_net;
pub mod trainer;

pub use datasets::{Dataset, Standardizer};
pub use distributions::{fit_weibull_mle, InvGammaParams, WeibullParams};
pub use error::{Error, Result};
pub use evidential_nig::NigParams;
pub use evidential_weibull::{EvidentialParams, PredictiveSummary};
pub use neural_net::{Architecture, HeadKind, Mlp};
pub use trainer::{EvidentialModel, TrainConfig};
