//! Frame quality metrics and report aggregation.

mod quality;
mod report;

pub use quality::{
    gaussian_window, mse, psnr, ssim, ssim_from_moments, QualityPair, PSNR_CAP_DB, SSIM_K1, SSIM_K2, SSIM_L,
    SSIM_SIGMA, SSIM_WINDOW,
};
pub use report::{aggregate_report, Aggregate, PolicyRun, Report, ReportRow};
