//! Online learners that emit threshold predictions.

pub mod aci;
pub mod ftrl;
pub mod gcaci;
pub mod swap;

pub use aci::Aci;
pub use ftrl::{Euclidean, Ftrl, PNorm, Regularizer, RegularizerConfig};
pub use gcaci::{ThetaState, Update};
pub use swap::SwapLearner;
