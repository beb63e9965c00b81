//! Construction and auditing of geographically controlled satellite-imagery
//! pretraining datasets.
//!
//! The crate is organised around the life of a dataset:
//!
//! * [`sampler`] draws georeferenced points inside region polygons according to
//!   a target group allocation.
//! * [`manifest`] persists the resulting samples as JSONL and derives labelled
//!   downstream train/val/test subsets.
//! * [`ingest`] fetches, filters, normalises and stores the raster tiles.
//! * [`overlay`] maps tile footprints onto categorical class maps.
//! * [`diversity`] computes the entropy-based diversity measures.
//! * [`analysis`] ranks datasets by downstream scores and correlates diversity
//!   with performance.

pub mod analysis;
pub mod apportion;
pub mod crs;
pub mod diversity;
pub mod error;
pub mod fsutil;
pub mod geojson;
pub mod geometry;
pub mod ingest;
pub mod manifest;
pub mod overlay;
pub mod raster;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
