//! Weibull and inverse-gamma distributions plus the special functions the
//! evidential formulas are built on.

mod inv_gamma;
mod special;
mod weibull;

pub use inv_gamma::InvGammaParams;
pub use special::{digamma, log_gamma};
pub(crate) use special::{digamma_unchecked, ln_gamma};
pub use weibull::{fit_weibull_mle, WeibullParams};
