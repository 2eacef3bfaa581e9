//! Outcome labeling for quantum observables.
//!
//! Given the effects of an observable whose outcome labels have been lost,
//! this crate decides how well a single use of the device identifies the
//! labels: perfectly, with minimum error, partially, unambiguously, or only
//! by excluding effects. Every analytic answer can be cross-checked against
//! a brute-force probe search ([`oracle`]) and a seeded Monte Carlo
//! simulation of the experiment ([`simulate`]).

pub mod cli;
pub mod io;
pub mod labeling;
pub mod linalg;
pub mod oracle;
pub mod povm;
pub mod simulate;
pub mod tester;

pub use labeling::{DecisionRule, LabelingReport, Mode, ProbeState, Tolerances};
pub use povm::{Observable, Permutation};
