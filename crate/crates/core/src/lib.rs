//! Content-based image retrieval: color, texture and edge feature extraction,
//! an Antipole-tree metric index, and on-disk catalogs that tie them together.

pub mod antipole;
pub mod catalog;
pub mod color;
pub mod edge;
pub mod error;
pub mod raster;
pub mod similarity;
pub mod texture;

pub use error::{Error, Result};
