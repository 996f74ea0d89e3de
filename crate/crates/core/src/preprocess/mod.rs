//! Gap imputation and windowing.

mod kalman;
mod window;

pub use kalman::{
    calibrate_max_gap, fit_local_level, impute_series, impute_with_model, smooth, GapCalibration, ImputationConfig,
    LocalLevel,
};
pub use window::{
    dense_grid, impute_recording, make_windows, window_starts, windows_csv, windows_from_grid, Label, Window,
    WindowConfig,
};
