//! Geometry profiles: normalized in-cluster gain shares plus out-of-cluster SIR.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::hex::{average_power_gain, cell_center, pattern_gain, HexLayout, Sector, SectorId, UserPlacement};
use super::lattice::{GainLattice, LatticeSum, TailSeries};

/// The cooperating sectors. Every member contributes one transmitter (its
/// user) and one receiver (its antenna), so `K = N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClusterSpec {
    /// Sector 3 of the origin cell.
    Single,
    /// Three sectors of mutually adjacent cells whose spans point toward the
    /// shared corner `(R, 0)`.
    FacingThree,
    /// All sectors of the origin cell and its six neighbours (`K = 21`).
    SevenCell,
    /// Every sector of the infinite lattice.
    WholeSystem,
    Custom(Vec<SectorId>),
}

impl ClusterSpec {
    pub fn custom(members: Vec<SectorId>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::param("cluster", "a cluster needs at least one sector"));
        }
        let mut seen = HashSet::new();
        for m in &members {
            if !seen.insert(*m) {
                return Err(Error::param("cluster", format!("duplicate member {m:?}")));
            }
        }
        Ok(ClusterSpec::Custom(members))
    }

    /// Ordered member list. Fails for [`ClusterSpec::WholeSystem`], which
    /// has no finite member list.
    pub fn members(&self) -> Result<Vec<SectorId>> {
        use Sector::*;
        Ok(match self {
            ClusterSpec::Single => vec![SectorId::new(0, 0, S3)],
            ClusterSpec::FacingThree => vec![
                SectorId::new(0, 0, S3),
                SectorId::new(1, 0, S2),
                SectorId::new(1, -1, S1),
            ],
            ClusterSpec::SevenCell => {
                const CELLS: [(i64, i64); 7] = [(0, 0), (1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];
                CELLS
                    .iter()
                    .flat_map(|&(u, v)| Sector::ALL.map(|s| SectorId::new(u, v, s)))
                    .collect()
            }
            ClusterSpec::WholeSystem => {
                return Err(Error::param(
                    "cluster",
                    "the whole system has infinitely many members; use the infinite-system bound or a wraparound fragment",
                ))
            }
            ClusterSpec::Custom(m) => m.clone(),
        })
    }

    pub fn is_whole_system(&self) -> bool {
        matches!(self, ClusterSpec::WholeSystem)
    }
}

/// Normalized gain shares `g[n][k]` (row-stochastic) and per-receiver
/// out-of-cluster SIR (linear, possibly infinite).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GeometryProfile<T = f64> {
    receivers: usize,
    transmitters: usize,
    g: Vec<T>,
    sir: Vec<T>,
}

impl<T: Real> GeometryProfile<T> {
    /// Builds a profile from unnormalized gains `G[n][k]`, normalizing rows.
    pub fn from_gains(gains: Vec<Vec<T>>, sir: Vec<T>) -> Result<Self> {
        let rows = gains
            .into_iter()
            .enumerate()
            .map(|(n, row)| {
                let total: T = row.iter().copied().sum();
                if row.iter().any(|&x| !(x >= T::zero()) || !x.is_finite()) {
                    return Err(Error::param("g", format!("row {n} has a negative or non-finite gain")));
                }
                if !(total > T::zero()) {
                    return Err(Error::param("g", format!("row {n} has no positive gain")));
                }
                Ok(row.into_iter().map(|x| x / total).collect())
            })
            .collect::<Result<Vec<Vec<T>>>>()?;
        Self::from_shares(rows, sir)
    }

    /// Builds a profile from shares that already sum to one per row.
    pub fn from_shares(rows: Vec<Vec<T>>, sir: Vec<T>) -> Result<Self> {
        let receivers = rows.len();
        if receivers == 0 {
            return Err(Error::param("g", "profile needs at least one receiver"));
        }
        let transmitters = rows[0].len();
        if transmitters == 0 {
            return Err(Error::param("g", "profile needs at least one transmitter"));
        }
        if sir.len() != receivers {
            return Err(Error::param(
                "sir",
                format!("expected {receivers} SIR values, got {}", sir.len()),
            ));
        }
        let mut g = Vec::with_capacity(receivers * transmitters);
        for (n, row) in rows.into_iter().enumerate() {
            if row.len() != transmitters {
                return Err(Error::param("g", format!("row {n} has {} entries, expected {transmitters}", row.len())));
            }
            if row.iter().any(|&x| !(x >= T::zero())) {
                return Err(Error::param("g", format!("row {n} has a negative share")));
            }
            let s: T = row.iter().copied().sum();
            if (s - T::one()).abs() > T::SOLVER_RTOL {
                return Err(Error::param("g", format!("row {n} sums to {s}, expected 1")));
            }
            g.extend(row);
        }
        if let Some(n) = sir.iter().position(|&s| !(s > T::zero())) {
            return Err(Error::param("sir", format!("SIR of receiver {n} must be > 0")));
        }
        Ok(Self {
            receivers,
            transmitters,
            g,
            sir,
        })
    }

    /// `N` receivers each seeing `K` transmitters with share `1/K`.
    pub fn uniform(receivers: usize, transmitters: usize) -> Result<Self> {
        if transmitters == 0 {
            return Err(Error::param("k", "need at least one transmitter"));
        }
        let share = T::one() / T::from_usize_lossy(transmitters);
        Self::from_shares(
            vec![vec![share; transmitters]; receivers],
            vec![T::infinity(); receivers],
        )
    }

    /// Isotropic profile: row `n` is the common share set rotated by `n`.
    pub fn isotropic(shares: &[T], receivers: usize) -> Result<Self> {
        let k = shares.len();
        let rows = (0..receivers)
            .map(|n| (0..k).map(|j| shares[(j + n) % k.max(1)]).collect())
            .collect();
        Self::from_shares(rows, vec![T::infinity(); receivers])
    }

    pub fn receivers(&self) -> usize {
        self.receivers
    }

    pub fn transmitters(&self) -> usize {
        self.transmitters
    }

    #[inline]
    pub fn row(&self, n: usize) -> &[T] {
        &self.g[n * self.transmitters..(n + 1) * self.transmitters]
    }

    #[inline]
    pub fn g(&self, n: usize, k: usize) -> T {
        self.g[n * self.transmitters + k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.g.chunks(self.transmitters)
    }

    pub fn sir(&self) -> &[T] {
        &self.sir
    }

    pub fn with_sir(mut self, sir: Vec<T>) -> Result<Self> {
        if sir.len() != self.receivers || sir.iter().any(|&s| !(s > T::zero())) {
            return Err(Error::param("sir", "need one positive SIR per receiver"));
        }
        self.sir = sir;
        Ok(self)
    }

    /// Same shares with every out-of-cluster transmitter switched off.
    pub fn without_interference(mut self) -> Self {
        self.sir.iter_mut().for_each(|s| *s = T::infinity());
        self
    }
}

/// Lattice totals of centered-user gains for each receiving sector
/// orientation, computed lazily.
pub(crate) struct InterferenceField<T> {
    lattices: [GainLattice<T>; 3],
    totals: [Option<T>; 3],
}

impl<T: Real> InterferenceField<T> {
    pub fn new(layout: &HexLayout<T>) -> Self {
        Self {
            lattices: Sector::ALL.map(|s| GainLattice::new(*layout, s)),
            totals: [None; 3],
        }
    }

    fn index(s: Sector) -> usize {
        s.number() as usize - 1
    }

    pub fn total(&mut self, s: Sector) -> Result<T> {
        let i = Self::index(s);
        if let Some(t) = self.totals[i] {
            return Ok(t);
        }
        let LatticeSum { value, .. } = self.lattices[i].sum(|x| x, &TailSeries::linear(T::one()))?;
        self.totals[i] = Some(value);
        Ok(value)
    }

    /// Lattice totals for all three orientations.
    pub fn totals(&mut self) -> Result<[T; 3]> {
        Ok([self.total(Sector::S1)?, self.total(Sector::S2)?, self.total(Sector::S3)?])
    }

    pub fn layout(&self) -> HexLayout<T> {
        *self.lattices[0].layout()
    }

    pub fn cluster_sir(&mut self, members: &[SectorId], placement: UserPlacement) -> Result<Vec<T>> {
        let totals = self.totals()?;
        cluster_sir_with_totals(&self.layout(), members, placement, &totals)
    }
}

/// SIR at each member receiver: actual in-cluster signal over the
/// centered-lattice total (indexed by sector) minus the centered in-cluster
/// part.
pub(crate) fn cluster_sir_with_totals<T: Real>(
    layout: &HexLayout<T>,
    members: &[SectorId],
    placement: UserPlacement,
    totals: &[T; 3],
) -> Result<Vec<T>> {
    members
        .iter()
        .map(|&rx| {
            let mut signal = T::zero();
            let mut centered = T::zero();
            for &tx in members {
                signal += average_power_gain(rx, tx, placement, layout)?;
                centered += average_power_gain(rx, tx, UserPlacement::Centered, layout)?;
            }
            let interference = totals[rx.sector.number() as usize - 1] - centered;
            if !(interference > T::zero()) {
                return Err(Error::Numerical(format!(
                    "out-of-cluster interference at {rx:?} is not positive ({interference})"
                )));
            }
            Ok(signal / interference)
        })
        .collect()
}

/// `D`: the constant that makes the normalized gains of all users of the
/// infinite lattice, seen by `receiver`, sum to one.
pub fn normalization_constant<T: Real>(layout: &HexLayout<T>, receiver: SectorId) -> Result<T> {
    let mut lat = GainLattice::new(*layout, receiver.sector);
    Ok(T::one() / lat.sum(|x| x, &TailSeries::linear(T::one()))?.value)
}

/// Per-receiver out-of-cluster SIR (linear). In-cluster users follow
/// `placement`; everyone outside the cluster is centered.
pub fn out_of_cluster_sir<T: Real>(
    layout: &HexLayout<T>,
    cluster: &ClusterSpec,
    placement: UserPlacement,
) -> Result<Vec<T>> {
    if cluster.is_whole_system() {
        return Ok(vec![T::infinity()]);
    }
    InterferenceField::new(layout).cluster_sir(&cluster.members()?, placement)
}

pub fn geometry_profile<T: Real>(
    layout: &HexLayout<T>,
    cluster: &ClusterSpec,
    placement: UserPlacement,
) -> Result<GeometryProfile<T>> {
    let members = cluster.members()?;
    let gains = members
        .iter()
        .map(|&rx| {
            members
                .iter()
                .map(|&tx| average_power_gain(rx, tx, placement, layout))
                .collect::<Result<Vec<T>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let sir = InterferenceField::new(layout).cluster_sir(&members, placement)?;
    GeometryProfile::from_gains(gains, sir)
}

/// Profile of a `side x side` block of cells with periodic boundaries: each
/// receiver sees the minimal-image copy of every user, so all receivers see
/// the same environment and there is no out-of-cluster interference.
/// Members are ordered by `u`, then `v`, then sector.
pub fn wraparound_fragment<T: Real>(layout: &HexLayout<T>, side: usize) -> Result<GeometryProfile<T>> {
    if side == 0 {
        return Err(Error::param("side", "fragment needs at least one cell"));
    }
    let r = layout.cell_radius();
    let q = layout.front_to_back();
    let gamma = layout.decay_exponent();
    let s = side as i64;
    let wrap = |d: i64| (d + s / 2).rem_euclid(s) - s / 2;
    let members: Vec<SectorId> = (0..s)
        .flat_map(|u| (0..s).flat_map(move |v| Sector::ALL.map(|sec| SectorId::new(u, v, sec))))
        .collect();
    let offsets = Sector::ALL.map(|sec| sec.centered_offset::<T>().scale(r));
    let gains = members
        .iter()
        .map(|rx| {
            members
                .iter()
                .map(|tx| {
                    let d = cell_center(wrap(tx.u - rx.u), wrap(tx.v - rx.v), r)
                        + offsets[tx.sector.number() as usize - 1];
                    pattern_gain(rx.sector, d, q) * d.norm().powf(-gamma)
                })
                .collect()
        })
        .collect();
    GeometryProfile::from_gains(gains, vec![T::infinity(); members.len()])
}
