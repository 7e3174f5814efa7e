//! Monte Carlo and closed-form reference values.

mod black_scholes;
mod covariance;
mod euler;
mod report;
mod signature_mc;
mod stats;

pub use black_scholes::bs_closed_form;
pub use covariance::{
    covariance_diagnostics, CovarianceReport, CovarianceSample, ScalingCheck, COVARIANCE_BASIS,
};
pub use euler::{euler_expectation, fd_greek, malliavin_delta_m1, MalliavinReport};
pub use report::ReportRow;
pub use signature_mc::{signature_expectation_mc, TensorEstimate};
pub use stats::{GaussianStream, McConfig, McEstimate};
