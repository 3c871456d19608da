//! Spectral-efficiency limits of cooperative cellular networks.
//!
//! The crate turns a hexagonal tri-sector layout into a geometry profile
//! (normalized in-cluster gain shares plus out-of-cluster SIR) and evaluates
//! what cooperation can achieve on it:
//!
//! * [`coherent`]: pilot-assisted Network MIMO with MMSE channel estimates
//!   and optimized pilot overhead;
//! * [`noncoherent`]: high-power upper bounds without receiver CSI, by Monte
//!   Carlo and by large-system fixed points, including the infinite lattice;
//! * [`regimes`]: link budgets, the full-cooperation ceiling and its
//!   inversion, saturation diagnostics and SIR distributions;
//! * [`linksim`]: a small MIMO interference cluster with Max-SINR and TDMA.
//!
//! Every numeric routine is generic over [`Real`] (`f32` or `f64`); the
//! `*F64` aliases below name the common instantiations.

// `!(x > 0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coherent;
pub mod curve;
pub mod error;
pub mod fading;
pub mod geometry;
pub mod linalg;
pub mod linksim;
pub mod mc;
pub mod noncoherent;
pub mod quadrature;
pub mod regimes;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{from_db, to_db, Real};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type HexLayoutF64 = geometry::HexLayout<f64>;
pub type HexLayoutF32 = geometry::HexLayout<f32>;
pub type GeometryProfileF64 = geometry::GeometryProfile<f64>;
pub type GeometryProfileF32 = geometry::GeometryProfile<f32>;
pub type CurveF64 = curve::SpectralEfficiencyCurve<f64>;
