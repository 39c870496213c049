//! Desk-scale wind turbine pitch-control testbed.
//!
//! The crate closes the whole loop that a wind-tunnel controller campaign
//! needs, entirely in software:
//!
//! * [`model`] — nonlinear truth model of a small pitch-regulated turbine
//!   (analytic power-coefficient surface, single rotational mode, first-order
//!   pitch actuator, optional tower fore-aft mode).
//! * [`sysid`] — discrete-time linear design models, either by analytic
//!   linearization of the truth model or by least-squares ARX identification
//!   from input–output data.
//! * [`inflow`] — seeded, bit-repeatable wind sequences (steps, gusts,
//!   filtered turbulence) and the upstream preview sensor.
//! * [`qp`] — dense warm-startable primal active-set solver for strictly
//!   convex QPs with box and general affine inequality constraints.
//! * [`control`] — gain-scheduled PI baseline, preview feedforward LQR, and
//!   constrained MPC behind one tick-in/command-out interface.
//! * [`sim`] — deterministic multi-rate closed-loop harness, metrics, the
//!   repeated side-by-side comparison protocol, and golden-trace comparison.
//! * [`hil`] — plant server and controller client separated by a framed
//!   binary TCP protocol with deadline monitoring and failsafe policies.
//! * [`config`] / [`cli`] — strict TOML configuration and the command-line
//!   front end tying the workflow together.
//!
//! Everything that consumes randomness takes an explicit seed; identical
//! configurations reproduce byte-identical logs, CSV files, and plots.

pub mod cli;
pub mod config;
pub mod control;
pub mod hil;
pub mod inflow;
pub mod model;
pub mod plot;
pub mod qp;
pub mod rng;
pub mod sim;
pub mod sysid;
