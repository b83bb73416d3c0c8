//! Numerical laboratory for the 3D wave-Klein-Gordon system
//! `(∂t² - Δ)u = |∇_{t,x} v|² + v²`, `(∂t² - Δ + 1)v = u Δv`
//! on a periodic box.

pub mod error;
pub mod asymptotics;
pub mod bilinear;
pub mod config;
pub mod constructor;
pub mod data;
pub mod lp;
pub mod norms;
pub mod run;
pub mod fields;
pub mod phase;
pub mod snapshot;
pub mod solver;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
