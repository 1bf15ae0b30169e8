//! Test-set evaluation: per-trajectory metrics, phase split at the switch,
//! physicality classification, ablation deltas and report files.

mod report;

pub use report::{
    ablation_delta, evaluate_model, merge_reports, evaluate_predictions, evaluate_states, read_csv, read_report, report_csv,
    write_csv, write_report, Aggregate, DeltaRow, EvalReport, MergedRow, MergedTable, TrajectoryRow, CSV_HEADER, LAMBDA_MIN_LIMIT,
    VHERM_LIMIT, VTR_LIMIT,
};

#[cfg(test)]
mod tests;
