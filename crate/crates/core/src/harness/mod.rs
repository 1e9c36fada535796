//! Experiment driver: configs, learning-curve traces, parallel actors,
//! plots and fixed-point certificates.

mod certify;
mod config;
mod parallel;
mod plot;
mod run;

pub use certify::{certify, write_certificate, CertificateRow, CertifyConfig, CERTIFICATE_COLUMNS};
pub use config::{AgentKind, EnvConfig, ExperimentConfig, PgqlMode};
pub use parallel::{run_async, SharedParams, SharedReplay};
pub use plot::{average_curves, emit_plot, render_svg, Curve};
pub use run::{parse_trace, read_trace, run_experiment, write_trace, ExperimentRun, TraceFile, TraceRow, TRACE_COLUMNS};
