//! Metastability of the random-field Curie-Weiss model.

pub mod error;
pub mod glauber;
pub mod interface;
pub mod kramers;
pub mod landscape;
pub mod meso;
pub mod model;
pub mod potential;
pub mod rng;
pub mod saddleflow;
pub mod util;

pub use error::{Error, Result};
