//! Mixed-observability Markov decision process model of diatonic pitch.
//!
//! [`momdp`] holds the domain-free factored-state machinery, [`pitch`] the
//! interval arithmetic, [`env`] the environment built from a training contour,
//! [`learner`] the Q-learner and its exact oracle, and [`report`] the output
//! files written by the command-line front end.

pub mod env;
pub mod error;
pub mod learner;
pub mod momdp;
pub mod pitch;
pub mod report;

pub use error::{Error, ParseError, Result};
