//! Grid orchestration, population statistics and figure output.

pub mod ablation;
pub mod grid;
pub mod output;
pub mod summary;

pub use ablation::{depth_ablation, depth_profile, ranks, spearman, DepthAblation, DepthProfile, ShiftCorrelation};
pub use grid::{run_grid, trial_seed, write_outputs, ExperimentGrid, GridOutcome, ModelOutcome, TrialKey};
pub use output::{
    band_polygon, emit_csv, emit_hue_csvs, emit_svg, fraction_svg, hue_csv, hue_svg, read_summary_csv, summary_csv,
    HUE_HEADER, SUMMARY_HEADER,
};
pub use summary::{
    aggregate, class_fractions, compare_conditions, ConditionDelta, HueHistogram, Modality, ModelCells,
    PopulationSummary, Stat, SummaryKey, HUE_BINS, HUE_BIN_WIDTH,
};
