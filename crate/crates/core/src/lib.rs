//! Multi-issue bilateral negotiation between autonomous agents.
//!
//! Agents hold private weighted-additive preference profiles, generate offers
//! with time-, resource- or behavior-dependent concession tactics, and may
//! forecast the opponent's concessions to quit hopeless sessions early.
//! A coordinating buyer can negotiate with several suppliers at once, and
//! sellers advertise through an in-process registry.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coordination;
pub mod domain;
pub mod harness;
pub mod prediction;
pub mod protocol;
pub mod registry;
pub mod tactics;
