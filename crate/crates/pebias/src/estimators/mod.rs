//! Loss estimators and trainable models: naive and IPS-weighted matrix
//! factorization, the exposure-model baseline, and the SNIPS estimator used
//! for hyperparameter selection.

pub mod expomf;
pub mod losses;
pub mod mf;

pub use expomf::{train_expomf, ExpoMfConfig, ExpoMfFit, ExpoMfModel};
pub use losses::{loss_ideal, loss_ips, loss_naive, snips_loss, LossKind};
pub use mf::{train_mf, MfFit, TrainConfig};
