//! Experiment configuration, execution and reporting for the `spde` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod report;
pub mod suite;
