// SPDX-License-Identifier: MIT
//! Certification, synthesis and simulation toolkit for event- and
//! self-triggered neural-network feedback loops.
//!
//! The crate is organised bottom-up:
//!
//! - [`nnet`]: feed-forward controller, interval bounds, sector bounds,
//!   isolation maps and the activation quadratic constraint.
//! - [`uncertain_plant`]: nominal plant, static uncertainty, IQC filter,
//!   augmented interconnection and the pendulum factory.
//! - [`triggers`]: event-triggered state machine and self-triggered
//!   next-instant rule.
//! - [`lmi`]: affine matrix expressions, the two certificate assemblies,
//!   Schur utilities, a numerical oracle and the conic interchange format.
//! - [`synthesis`]: conic solves, sweeps and ellipsoid extraction.
//! - [`simulator`]: closed-loop rollouts and runtime monitors.
//! - [`cli`]: configuration handling and the command implementations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod linalg;
pub mod lmi;
pub mod nnet;
pub mod parallel;
pub mod simulator;
pub mod synthesis;
pub mod triggers;
pub mod uncertain_plant;

pub use error::{Error, Result};
