//! Span-level scoring, the stage × task result matrix and transfer metrics.

mod metrics;
mod report;
mod transfer;

pub use metrics::{evaluate, predict_corpus, span_f1, EvalCounts, EvalSet, SpanScores};
pub use report::{fmt_num, mean_sd, MetricsRecord};
pub use transfer::{backward_transfer, cross_eval_grid, forgetting_curve, forward_transfer, result_matrix, ResultMatrix};
