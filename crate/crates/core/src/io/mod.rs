//! Files on disk: sampled series, price preprocessing, fitted models,
//! fit configurations and plot-ready curve tables.

mod curves;
mod model;
mod series;

pub use curves::{read_curves, write_curves, CurveTable, CURVE_COLUMNS};
pub use model::{load_fit_config, load_model, parse_fit_config, parse_model, save_model, SavedModel, MODEL_FORMAT_VERSION};
pub use series::{
    load_series, log_returns, read_column, read_series, write_series, SeriesData, SPACING_TOLERANCE,
};

/// Line and column (both 1-based) of a byte offset.
pub(crate) fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
    (line, col)
}
