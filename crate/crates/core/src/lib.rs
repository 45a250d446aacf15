pub mod classify;
pub mod cli;
pub mod ends;
pub mod error;
pub mod graphspec;
pub mod metric_graph;
pub mod radial;
pub mod scalar;
pub mod series;
pub mod spectral;

pub use error::{Error, Result, SpecError};
pub use graphspec::{parse_spec, seq_eval, seq_series_sum, ExtendedCount, Family, GraphFamilySpec, SequenceSpec};
