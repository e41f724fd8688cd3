//! Markovian models for categorical sequence data.
//!
//! The crate covers the model family used in life-course and log-data
//! sequence analysis: first-order Markov models (MM), hidden Markov models
//! (HMM), mixture Markov models (MMM), and mixture hidden Markov models
//! (MHMM) whose cluster memberships may depend on covariates through
//! multinomial-logistic coefficients. A process-mining layer estimates,
//! thresholds, compares, and exports transition graphs.
//!
//! Modules:
//!
//! - [`seqdata`]: alphabets, sequence panels with unknown/padding missing
//!   values, covariate frames, wide-format ingestion.
//! - [`markov`]: probability primitives and closed-form MM estimation.
//! - [`hmm`]: log-space forward/backward, Viterbi, Baum-Welch EM.
//! - [`mixture`]: cluster submodels, covariate-dependent priors, mixture EM
//!   with a Newton M-step for coefficients, posterior summaries.
//! - [`estimation`]: seeded random starting values, restart orchestration,
//!   and direct numerical maximum likelihood over softmax parameters.
//! - [`modelselect`]: free-parameter counting and BIC.
//! - [`procmine`]: transition-rate estimation and thresholded process maps
//!   with DOT/JSON export.
//! - [`cli`]: the batch front-end behind the `seqmarkov` binary.

pub mod cli;
pub mod error;
pub mod estimation;
pub mod hmm;
pub mod markov;
pub mod mixture;
pub mod modelselect;
pub mod procmine;
pub mod seqdata;

pub use error::{Error, Result};
