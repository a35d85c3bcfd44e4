//! Linear-cost statistical independence testing and mutual-information
//! estimation.
//!
//! The pipeline: rank-normalize each coordinate of two paired samples into
//! the unit interval, expand an orthonormal Legendre product basis, and
//! estimate mixed moments between the samples in one O(n) pass per feature.
//! Under independence the sqrt(n)-scaled moments behave like N(0,1) draws,
//! which yields a family of tests (extreme order statistics, chi-square on
//! the score energy, log-likelihood, permutation calibration), a
//! mutual-information estimate as the sum of squared moments with a variance
//! correction, and a significance-filtered joint-density model. An HSIC
//! baseline with Gaussian kernels and gamma/permutation calibration is
//! included for comparison, along with the rotation-sweep benchmark used to
//! contrast their sensitivity.
//!
//! All numerics are generic over the [`Real`] scalar (f32 or f64); the `*64`
//! aliases below fix f64, which is what the CLI and the benchmarks use.

pub mod basis;
pub mod bench;
pub mod coeffs;
pub mod error;
pub mod hsic;
pub mod independence;
pub mod infotheory;
pub mod ingest;
pub mod normalize;
pub mod order_stats;
mod scalar;
pub mod special;
pub mod svd;

pub use error::{Error, Result};
pub use scalar::Real;

/// f64 instantiations of the main pipeline types.
pub type SampleMatrix64 = ingest::SampleMatrix<f64>;
pub type PairedSample64 = ingest::PairedSample<f64>;
pub type NormalizedSample64 = normalize::NormalizedSample<f64>;
pub type CdfSpec64 = normalize::CdfSpec<f64>;
pub type CoefficientTable64 = coeffs::CoefficientTable<f64>;
pub type MiEstimate64 = infotheory::MiEstimate<f64>;
pub type TestReport64 = independence::TestReport<f64>;
pub type SignificantModel64 = independence::SignificantModel<f64>;
pub type SvdDecomposition64 = svd::SvdDecomposition<f64>;
pub type SingularNull64 = svd::SingularNull<f64>;
pub type KernelMatrix64 = hsic::KernelMatrix<f64>;
pub type HsicResult64 = hsic::HsicResult<f64>;
pub type MixtureSpec64 = bench::MixtureSpec<f64>;
pub type RotationSweepConfig64 = bench::RotationSweepConfig<f64>;
pub type SweepResult64 = bench::SweepResult<f64>;
