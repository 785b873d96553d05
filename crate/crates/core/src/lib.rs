//! Capital gains overhang (CGO) research toolkit.
//!
//! The pipeline ingests a stock panel, builds turnover-weighted reference
//! prices and CGO, five lagged risk proxies, dependent 5x5 double sorts and
//! monthly Fama-MacBeth regressions with Newey-West inference. A synthetic
//! market generator with planted effects backs the validation suite.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod calendar;
pub mod cgo;
pub mod double_sort;
pub mod error;
pub mod fama_macbeth;
pub mod linalg;
pub mod newey_west;
pub mod panel;
pub mod par;
pub mod preprocess;
pub mod proxies;
pub mod report;
pub mod stats;
pub mod synth;

pub use calendar::YearMonth;
pub use error::{Error, Result};
pub use panel::StockPanel;
