//! Single-cell probing: response curves, opponency classes, orientation
//! tuning and gradient receptive fields.

pub mod classify;
pub mod report;
pub mod response;
pub mod tuning;

pub use classify::{classify, extremal_hues, OpponencyClass, ResponseCurve, Tolerances};
pub use report::{
    double_class, format_records, parse_records, probe_cell, probe_layers, probe_model, CellRecord, CellReport,
    ProbeSettings, ProbeSweeps, RECORD_HEADER,
};
pub use response::{
    baseline_rate, cell_response, centre_responses, rf_approx, sweep_responses, CellId, LayerResponses,
    ReceptiveField, CENTRE,
};
pub use tuning::{orientation_tuning, OrientationTuning};
