//! Blind source separation with sparse representations and morphological
//! diversity.

pub mod adaptive;
pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod io;
pub mod learn;
pub mod linalg;
pub mod mca;
pub mod mixing;
pub mod sparse;
pub mod synth;
pub mod transforms;

pub use error::{Error, Result};
