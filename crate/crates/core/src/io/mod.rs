//! Reading and writing schedules, covariates, bases, models, images and plots.

mod json;
mod plot;
mod ppm;
mod table;

pub use json::{load_basis, load_models, read_basis, write_basis, write_models};
pub use plot::{emit_plot, render_svg, PlotLabels, Series, SeriesStyle};
pub use ppm::{decode_ppm, load_ppm, write_ppm, PpmFormat, RgbImage};
pub use table::{
    load_covariates, load_matrix_csv, load_schedule_csv, parse_schedule_csv, read_labeled,
    read_labeled_file, write_labeled_csv, write_schedule_csv, LabeledTable,
};
