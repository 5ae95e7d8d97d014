//! Detection and accessible-width characterization of disability parking
//! spaces in aerial tile imagery.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! - [`imagery`] fetches and caches slippy-map tiles and assembles a [`imagery::Mosaic`]
//! - [`scanner`] runs the four-pass window scan so every object is located exactly once
//! - [`detector`] defines the backend contract, a scriptable mock and the sidecar client
//! - [`characterizer`] measures space and aisle widths from oriented boxes
//! - [`geo`] converts tile pixels to WGS84 and EPSG:3857
//! - [`pipeline`] ties the stages together and writes JSON and GeoJSON
//! - [`evaluate`] matches predictions to ground truth and computes metrics

pub mod characterizer;
pub mod detector;
pub mod evaluate;
pub mod geo;
pub mod geometry;
pub mod imagery;
pub mod pipeline;
pub mod scanner;
