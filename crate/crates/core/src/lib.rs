//! Sequential weak-measurement Bell and Leggett-Garg tests.
//!
//! Exact state-vector simulation of Gaussian-pointer (von Neumann) weak
//! measurements on small qubit registers, closed-form finite-`sigma`
//! analytics for the sequential CHSH protocol, local-hidden-variable
//! adversaries, and the estimators that tie them together.
//!
//! ```
//! use weakbell::{bs_est, bs_exact, chsh_sequential_plan, run_ensemble};
//!
//! let plan = chsh_sequential_plan(2.0, 0).unwrap();
//! let records = run_ensemble(&plan, 20_000, 7).unwrap();
//! let est = bs_est(&records).unwrap();
//! assert!((est.bs_hat - bs_exact(2.0).unwrap()).abs() < 5.0 * est.se);
//! ```

pub mod closedform;
pub mod error;
pub mod estimator;
pub mod lhv;
pub mod meter;
pub mod qcore;
pub mod schedule;

pub use closedform::{bs_exact, bs_n, n_required, sigma_min, threshold_sigma, var_bs, Setting};
pub use error::{Error, Result};
pub use estimator::{bs_est, corr_est, corr_est_strong, cov_check, lg_est, significance, LgForm};
pub use lhv::{certificate_test, certify, run_additive_lhv, run_malicious_lhv, HiddenStrategy, Verdict};
pub use meter::{strong_measure, weak_measure, PointerSpec, Reading};
pub use qcore::{epr_state, Hamiltonian, Observable, StateVector, Subsystem};
pub use schedule::{certified_plan, chsh_sequential_plan, lg_plan, run_ensemble, MeasurementPlan, Pair, RecordSet};
