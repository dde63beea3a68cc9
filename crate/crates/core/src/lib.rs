//! Bias auditing for tabular data.
//!
//! The crate is organized by stage of an audit:
//!
//! - [`tabular`]: loading and preprocessing delimiter-separated datasets.
//! - [`metrics`]: the 25 detection metrics across five scenarios.
//! - [`severity`]: raw metric value to 5-level bias severity, plus calibration.
//! - [`synthgen`]: seeded synthetic datasets with a controllable bias strength.
//! - [`methodlib`]: the detection-method library and its retrieval.
//! - [`orchestrator`]: the planner-driven detection workflow and its tools.
//! - [`reporting`]: SVG charts and the final report.
//! - [`bench`]: task sets, ground-truth levels, end-result and process scoring.
//! - [`net`]: the HTTP transport used by chat-backed planners, with a call counter.

// `!(x > 0.0)` deliberately rejects NaN together with zero and negatives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod methodlib;
pub mod metrics;
pub mod net;
pub mod orchestrator;
pub mod reporting;
pub mod severity;
pub mod stats;
pub mod synthgen;
pub mod tabular;
