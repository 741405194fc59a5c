//! Thermodynamic flow operators, uncertainty relations and Haar-averaged
//! probes for small closed and open quantum systems.

pub mod dynamics;
pub mod finite_diff;
pub mod flows;
pub mod haar;
pub mod integrator;
pub mod kron_ops;
pub mod linalg;
pub mod measurement;
pub mod models;
pub mod operator;
pub mod sampling;
pub mod uncertainty;
