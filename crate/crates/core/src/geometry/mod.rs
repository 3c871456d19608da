//! Hexagonal tri-sector cellular universe.
//!
//! Cell `(u, v)` has its base station at `x = 3uR/2`, `y = sqrt(3)(v + u/2)R`.
//! Each cell holds three 120-degree sectors with one user per sector; the
//! antenna of a sector has unit gain over its span and `1/Q` elsewhere, and
//! average power decays as `d^-gamma`.

mod hex;
mod lattice;
mod profile;

pub use hex::{
    average_power_gain, bs_position, gain_to_point, sector_gain, sector_region_contains, user_position,
    HexLayout, Point, Sector, SectorId, UserPlacement,
};
pub use lattice::{hex_distance, ring, LatticeSum};
pub use profile::{
    geometry_profile, normalization_constant, out_of_cluster_sir, wraparound_fragment, ClusterSpec,
    GeometryProfile,
};

pub(crate) use lattice::{GainLattice, TailSeries};
#[allow(unused_imports)]
pub(crate) use profile::{cluster_sir_with_totals, InterferenceField};
