//! Certified Gaussian sums over lattices.
//!
//! The crate evaluates Gaussian masses `ρ_s(L + x)`, periodic Gaussians
//! `f_{L,s}(x) = ρ_s(L + x)/ρ_s(L)`, their moments and derivatives, samples
//! discrete Gaussians, and checks inequalities between these quantities with
//! interval-safe verdicts. Every floating-point result carries a rigorous
//! absolute error bound covering truncation and rounding.
//!
//! Numeric routines are generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the common `f64` instantiation.

pub mod certified;
pub mod error;
pub mod exact;
pub mod interval;
pub mod lattice;
pub mod linalg;
pub mod mass;
pub mod moments;
pub mod sampler;
pub mod verify;
pub mod scalar;
pub mod summation;

pub use certified::CertifiedValue;
pub use error::{Error, Result};
pub use exact::Rational;
pub use interval::Interval;
pub use lattice::{
    enumerate_points, enumerate_points_capped, intersect, quotient_reps, sublattice, Coset, CosetReps, Lattice,
    PointList, SublatticeRep,
};
pub use mass::{
    cosine_moments, curve_family, dual_mass, mass, mass_relative, mass_with_shift_error, periodic_gaussian, rho_point,
    theta_split_identity, CosineMoments, CurvePoint, GaussianParam, MatrixParam, SplitReport,
};
pub use moments::{
    derivative_report, finite_difference_derivatives, fourth_moment_form, hessian_of_product, mean_norm, moment_report,
    DerivativeReport, MomentReport,
};
pub use sampler::{empirical_moments, sample, AliasTable, SampleBatch, SamplerTable};
pub use scalar::Real;
pub use verify::{run_campaign, CampaignSummary, CheckKind, EnsembleKind, InstanceEnsemble, Status, Verdict};

pub type CertifiedValue64 = CertifiedValue<f64>;
pub type CertifiedValue32 = CertifiedValue<f32>;
pub type Coset64 = Coset<f64>;
pub type Coset32 = Coset<f32>;
pub type Interval64 = Interval<f64>;
pub type Interval32 = Interval<f32>;
pub type GaussianParam64 = GaussianParam<f64>;
pub type GaussianParam32 = GaussianParam<f32>;
pub type MomentReport64 = MomentReport<f64>;
pub type MomentReport32 = MomentReport<f32>;
pub type DerivativeReport64 = DerivativeReport<f64>;
pub type DerivativeReport32 = DerivativeReport<f32>;
pub type SampleBatch64 = SampleBatch<f64>;
pub type SampleBatch32 = SampleBatch<f32>;
