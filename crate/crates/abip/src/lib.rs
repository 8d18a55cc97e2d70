//! ADMM-based interior-point solver for linear programming.
//!
//! The solver follows the central path of a homogeneous self-dual
//! embedding, driving each path point to tolerance with an operator
//! splitting whose subproblems have closed-form solutions. It returns
//! either an optimal primal-dual pair or a certificate of primal or dual
//! infeasibility.
//!
//! Entry points: [`pipeline::solve_general`] for bounded problems from
//! MPS files, [`pipeline::solve_standard`] for problems already in
//! standard form, and [`ipm_driver::solve`] for the bare core without
//! presolve.

#![allow(non_snake_case)]

pub mod admm_core;
pub mod hsd_embed;
pub mod ingest;
pub mod ipm_driver;
pub mod linalg;
pub mod lp_model;
pub mod pipeline;
pub mod presolve;
pub mod sparse;
