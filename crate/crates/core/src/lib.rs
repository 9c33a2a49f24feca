//! Chern–Simons counterterms for the gravitational anomaly on flat-chart
//! tori: exterior calculus on structured grids, Levi-Civita geometry,
//! Chern–Weil and transgression forms, mapping-torus characteristic numbers,
//! variational pairings and an exact mod-ℤ anomaly ledger.

pub mod charclass;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod ledger;
pub mod linalg;
pub mod torusbundle;
pub mod trig;
pub mod variational;

pub use error::{Error, Result};
