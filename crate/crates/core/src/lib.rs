//! Sinai billiard collision dynamics, twisted Ulam transfer operators on
//! Abelian covers, and their leading resonances near 1.

pub mod acceptance;
pub mod covariance;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod report;
pub mod rng;
pub mod spectra;
pub mod ulam;

pub use error::{Error, Result};
pub use geometry::{Disc, Lattice, Table, Twist};
pub use num_complex::Complex64;
