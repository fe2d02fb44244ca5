//! Staged constructions of exchangeable probability measures on countable
//! relational structures.
//!
//! The crate provides two engines and their shared foundations:
//!
//! * a finite staged graph construction whose uniform samples approximate an
//!   exchangeable random graph with prescribed extension properties, and
//! * an inverse-limit engine that builds finite mass-weighted stages over a
//!   tree of addresses, supports language expansion and type splitting through
//!   pluggable amalgamation classes, and samples countable structures from the
//!   limit measure.
//!
//! Everything quantitative is exact where the mathematics is exact (integer
//! counts, dyadic masses) and Monte Carlo with reported standard errors where
//! sampling is involved.

pub mod address;
pub mod classes;
pub mod density;
pub mod error;
pub mod formula;
pub mod limit;
pub mod mc;
pub mod morley;
pub mod qftype;
pub mod report;
pub mod schedule;
pub mod signature;
pub mod structure;
pub mod toy;

pub use error::{Error, Result};
