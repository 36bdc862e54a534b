//! File formats: CSV histograms and matrices, PGM images, JSON traces, and
//! pixel-grid cost matrices.
//!
//! Everything here is a pure function of its input bytes, so the same files
//! always produce the same outputs.

mod csv;
mod grid;
mod pgm;
mod trace;

pub use csv::{read_cost_csv, read_histogram_csv, write_histogram_csv, write_matrix_csv};
pub use grid::{grid_cost, GridMetric, GridSpec};
pub use pgm::{read_pgm, write_pgm, PgmOptions};
pub use trace::{write_barycenter_trace_json, write_trace_json};
