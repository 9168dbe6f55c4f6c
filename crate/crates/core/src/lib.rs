//! Tight-binding chains with a periodic on-site potential: Floquet bands,
//! block propagators, light cones and asymptotic transport velocities.

pub mod charpoly;
pub mod chebyshev;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod floquet;
pub mod linalg;
pub mod model;
pub mod poly;
pub mod tridiag;
pub mod velocity;
pub mod verify;

pub use error::{Error, Result};
