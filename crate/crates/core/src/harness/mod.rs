//! Convergence studies: grids of exact moments next to their asymptotic
//! approximations, with fitted error slopes and pass flags.

mod config;
mod fit;
mod output;
mod study;

pub use config::{default_precision_bits, GridSpec, PathSpec, StudyConfig, StudyKind, PRECISION_ENV};
pub use fit::{fit_slope, SlopeFit};
pub use output::{result_json, write_csv, write_outputs, CSV_HEADER};
pub use study::{
    default_verify_config, joint_first_order_exponent, joint_remainder_exponent, run_study, McRecord,
    SlopeReport, StudyResult, StudyRow,
};
