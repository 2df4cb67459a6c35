//! File formats, bundled data, reports and the command line for
//! [`scalekit_core`].

pub mod app;
pub mod bundled;
pub mod numfmt;
pub mod records;
pub mod report;
pub mod svg;

pub use records::{emit_records, parse_records, RecordError, RecordFile};
pub use svg::{emit_svg_plot, PlotError, PlotSeries, SeriesStyle};
