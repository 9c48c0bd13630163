//! Independent reference implementations used by tests. Nothing here is on
//! any production path; enable with the `testing` feature.

pub mod ect_oracle;
pub mod regex_oracle;
