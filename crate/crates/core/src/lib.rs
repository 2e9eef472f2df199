//! Learning sparse convolutional regularisers by quotient minimisation, and
//! reconstruction with the learned filter banks.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod config;
pub mod conv;
pub mod error;
pub mod functionals;
pub mod io;
pub mod learning;
pub mod pd;
pub mod prox;
pub mod rng;
pub mod signal;
pub mod synth;

pub use certify::{certify, CertificationReport};
pub use config::{load_config, ExperimentConfig, SignalSource};
pub use conv::{convolve, convolve_with, operator_norm, ConvOperator, Extent, FilterOperator, LinearOperator};
pub use error::{Error, Result};
pub use functionals::{j_value, j_value_bank, quotient, HuberParams, Mode, QuotientProblem, QuotientValue};
pub use learning::{learn, learn_infimal, power_iterate, random_init, HuberPolicy, LearnConfig, LearnResult, Trajectory};
pub use pd::{solve_half_step, solve_reconstruction, HalfStep, PDConfig, Reconstruction};
pub use prox::BallConstraint;
pub use rng::CounterRng;
pub use signal::{FilterBank, Kernel, Shape, Signal};
