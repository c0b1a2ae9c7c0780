//! Region-of-interest CT reconstruction from few-view truncated
//! parallel-beam projections.
//!
//! The main entry points are [`solver::reweighted_solve`] (robust Cauchy
//! data fit minimized by majorize-minimize around a dual block
//! forward-backward solver), [`solver::unrolled_forward`] (the same
//! iterations with a fixed schedule and per-layer parameters) and the
//! baselines [`tomo::fbp`] and [`solver::hierarchical_tv_solve`].

pub mod bench;
pub mod cli;
pub mod config;
pub mod datafit;
pub mod error;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod reference;
pub mod regularizer;
pub mod sim;
pub mod solver;
pub mod tomo;

pub use error::{Error, Result};
