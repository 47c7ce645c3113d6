//! The trainable user-preference model and its bootstrap ensemble.

mod ensemble;
mod kernel;
mod logistic;
mod model;
mod svm;

pub use ensemble::{EnsembleMember, ThompsonEnsemble, DEFAULT_INCLUSION, DEFAULT_MEMBERS};
pub use kernel::{kernel_width, nearest_rank, rbf, squared_distance};
pub use logistic::{fit_logistic, sigmoid, LogisticModel, GRADIENT_TOLERANCE, L2_PENALTY};
pub use model::{probability, train_preference, PreferenceModel};
pub use svm::{train_svm, train_svm_with, SmoParams, SvmModel, DEFAULT_C, KKT_TOLERANCE, MAX_PASSES};
