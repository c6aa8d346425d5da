//! Rigorous two-sided bounds on time-averaged observables of the periodically
//! forced double-well SDE
//!
//! ```text
//! dX = (X - X^3 + A cos(Ωt)) dt + sqrt(2D) dW
//! ```
//!
//! obtained from moment-matrix semidefinite relaxations of the stationary
//! Fokker–Planck equation of the autonomous lift `(X, y, z) = (X, cos Ωt, sin Ωt)`.
//! Independent Euler–Maruyama, Fokker–Planck and quadrature baselines live in
//! [`oracles`]; bound composition and noise scans live in [`analysis`].

pub mod analysis;
pub mod error;
pub mod model;
pub mod oracles;
pub mod poly;
pub mod sdp;

pub use error::{Error, Result};
