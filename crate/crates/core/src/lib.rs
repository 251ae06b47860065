//! Simulation and property checks for jump SDEs with super-linear,
//! non-Lipschitz coefficients.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod coefficients;
pub mod integrator;
pub mod lyapunov;
pub mod noise;
pub mod propertylab;
pub mod quadrature;
pub mod report;
pub mod stats;
