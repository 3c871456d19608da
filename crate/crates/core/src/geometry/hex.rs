//! Tri-sector hexagonal universe: coordinates, sector regions and the
//! two-level antenna pattern.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Domain};
use crate::scalar::{from_db, Real};

/// Cellular layout parameters. Distances are in units of `cell_radius`
/// (hexagon center-to-vertex).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct HexLayout<T = f64> {
    cell_radius: T,
    decay_exponent: T,
    front_to_back: T,
    lattice_tolerance: T,
    max_tier: usize,
}

impl<T: Real> HexLayout<T> {
    pub const DEFAULT_MAX_TIER: usize = 5000;

    /// Layout with unit cell radius. `decay_exponent` must exceed 2 so that
    /// the interference sums over the infinite lattice converge.
    pub fn new(decay_exponent: T, front_to_back_db: T) -> Result<Self> {
        if !(decay_exponent > T::lit(2.0)) || !decay_exponent.is_finite() {
            return Err(Error::param(
                "gamma",
                format!("decay exponent must be finite and > 2, got {decay_exponent}"),
            ));
        }
        if !(front_to_back_db >= T::zero()) || !front_to_back_db.is_finite() {
            return Err(Error::param(
                "q_db",
                format!("front-to-back ratio must be >= 0 dB, got {front_to_back_db}"),
            ));
        }
        Ok(Self {
            cell_radius: T::one(),
            decay_exponent,
            front_to_back: from_db(front_to_back_db),
            lattice_tolerance: T::LATTICE_TOL,
            max_tier: Self::DEFAULT_MAX_TIER,
        })
    }

    /// gamma = 3.8, Q = 20 dB.
    pub fn reference() -> Self {
        Self::new(T::lit(3.8), T::lit(20.0)).expect("reference parameters are valid")
    }

    pub fn with_cell_radius(mut self, r: T) -> Result<Self> {
        if !(r > T::zero()) || !r.is_finite() {
            return Err(Error::param("cell_radius", format!("must be finite and > 0, got {r}")));
        }
        self.cell_radius = r;
        Ok(self)
    }

    pub fn with_lattice_tolerance(mut self, tol: T) -> Result<Self> {
        if !(tol > T::zero()) {
            return Err(Error::param("lattice_tolerance", format!("must be > 0, got {tol}")));
        }
        self.lattice_tolerance = tol;
        Ok(self)
    }

    pub fn with_max_tier(mut self, max_tier: usize) -> Self {
        self.max_tier = max_tier.max(1);
        self
    }

    pub fn cell_radius(&self) -> T {
        self.cell_radius
    }

    pub fn decay_exponent(&self) -> T {
        self.decay_exponent
    }

    /// Linear front-to-back ratio `Q`.
    pub fn front_to_back(&self) -> T {
        self.front_to_back
    }

    pub fn lattice_tolerance(&self) -> T {
        self.lattice_tolerance
    }

    pub fn max_tier(&self) -> usize {
        self.max_tier
    }

    /// Exponent-free variant used to isolate the antenna pattern in tests.
    #[cfg(test)]
    pub(crate) fn with_exponent_unchecked(mut self, gamma: T) -> Self {
        self.decay_exponent = gamma;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sector {
    S1,
    S2,
    S3,
}

impl Sector {
    pub const ALL: [Sector; 3] = [Sector::S1, Sector::S2, Sector::S3];

    /// 1, 2 or 3.
    pub fn number(self) -> u8 {
        match self {
            Sector::S1 => 1,
            Sector::S2 => 2,
            Sector::S3 => 3,
        }
    }

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Sector::S1),
            2 => Ok(Sector::S2),
            3 => Ok(Sector::S3),
            _ => Err(Error::param("sector", format!("must be 1, 2 or 3, got {n}"))),
        }
    }

    /// Unit vector of the antenna boresight. Sector 3 points along +x,
    /// sectors 1 and 2 at +120 and -120 degrees.
    pub fn bisector<T: Real>(self) -> Point<T> {
        let h = T::lit(0.5);
        let s = T::lit(3.0).sqrt() * h;
        match self {
            Sector::S3 => Point::new(T::one(), T::zero()),
            Sector::S1 => Point::new(-h, s),
            Sector::S2 => Point::new(-h, -s),
        }
    }

    /// Clockwise (start) and counter-clockwise (end) edges of the 120-degree span.
    fn span_edges<T: Real>(self) -> (Point<T>, Point<T>) {
        let h = T::lit(0.5);
        let s = T::lit(3.0).sqrt() * h;
        match self {
            Sector::S3 => (Point::new(h, -s), Point::new(h, s)),
            Sector::S1 => (Point::new(h, s), Point::new(-T::one(), T::zero())),
            Sector::S2 => (Point::new(-T::one(), T::zero()), Point::new(h, -s)),
        }
    }

    /// Offset of the centered user from its BS, in units of `R`.
    pub fn centered_offset<T: Real>(self) -> Point<T> {
        let third = T::one() / T::lit(3.0);
        let y = T::one() / T::lit(3.0).sqrt();
        match self {
            Sector::S1 => Point::new(-third, y),
            Sector::S2 => Point::new(-third, -y),
            Sector::S3 => Point::new(T::lit(2.0) * third, T::zero()),
        }
    }

    /// Whether direction `d` lies inside the half-open span
    /// `[bisector - 60deg, bisector + 60deg)`.
    pub fn covers<T: Real>(self, d: Point<T>) -> bool {
        let (start, end) = self.span_edges::<T>();
        let slack = d.norm() * T::epsilon().sqrt();
        start.cross(d) >= -slack && end.cross(d) < -slack
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SectorId {
    pub u: i64,
    pub v: i64,
    pub sector: Sector,
}

impl SectorId {
    pub const fn new(u: i64, v: i64, sector: Sector) -> Self {
        Self { u, v, sector }
    }

    fn stream_index(&self) -> u64 {
        let zig = |x: i64| ((x << 1) ^ (x >> 63)) as u64;
        (zig(self.u) << 33) ^ (zig(self.v) << 2) ^ self.sector.number() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Point<T = f64> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point<T> {
    pub const fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    pub fn scale(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl<T: Real> std::ops::Add for Point<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Real> std::ops::Sub for Point<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

/// How users are placed inside their sectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UserPlacement {
    /// On the sector bisector at distance `2R/3` from the BS.
    Centered,
    /// Uniform over the sector region, seeded per sector.
    Randomized { seed: u64 },
}

/// BS coordinates of cell `(u, v)`: `x = 3uR/2`, `y = sqrt(3)(v + u/2)R`.
pub fn bs_position<T: Real>(id: SectorId, layout: &HexLayout<T>) -> Point<T> {
    cell_center(id.u, id.v, layout.cell_radius())
}

pub(crate) fn cell_center<T: Real>(u: i64, v: i64, r: T) -> Point<T> {
    let u_f = T::from_i64(u).expect("cell index fits");
    let v_f = T::from_i64(v).expect("cell index fits");
    Point::new(
        T::lit(1.5) * u_f * r,
        T::lit(3.0).sqrt() * (v_f + u_f * T::lit(0.5)) * r,
    )
}

/// The two non-BS edges of a sector's rhombus, as vectors from the BS.
fn rhombus_edges<T: Real>(sector: Sector, r: T) -> (Point<T>, Point<T>) {
    let (a, b) = sector.span_edges::<T>();
    (a.scale(r), b.scale(r))
}

pub fn user_position<T: Real>(id: SectorId, placement: UserPlacement, layout: &HexLayout<T>) -> Point<T> {
    let bs = bs_position(id, layout);
    match placement {
        UserPlacement::Centered => bs + id.sector.centered_offset::<T>().scale(layout.cell_radius()),
        UserPlacement::Randomized { seed } => {
            // The sector region is the rhombus spanned by its two edges.
            let mut rng = stream(seed, Domain::Placement, id.stream_index());
            let s = T::one() - T::unit_uniform(&mut rng);
            let t = T::one() - T::unit_uniform(&mut rng);
            let (e1, e2) = rhombus_edges(id.sector, layout.cell_radius());
            bs + e1.scale(s) + e2.scale(t)
        }
    }
}

/// Whether `p` lies in the closed rhombus covered by sector `id`.
pub fn sector_region_contains<T: Real>(id: SectorId, p: Point<T>, layout: &HexLayout<T>) -> bool {
    let d = p - bs_position(id, layout);
    let (e1, e2) = rhombus_edges(id.sector, layout.cell_radius());
    let det = e1.cross(e2);
    let s = d.cross(e2) / det;
    let t = e1.cross(d) / det;
    let tol = T::epsilon().sqrt();
    s >= -tol && t >= -tol && s <= T::one() + tol && t <= T::one() + tol
}

/// Antenna gain of `serving` toward `target`: 1 inside the 120-degree span,
/// `1/Q` outside.
pub fn sector_gain<T: Real>(serving: SectorId, target: Point<T>, layout: &HexLayout<T>) -> Result<T> {
    let d = target - bs_position(serving, layout);
    if d.norm() == T::zero() {
        return Err(Error::DegenerateGeometry(format!(
            "target coincides with the BS of cell ({}, {}); azimuth undefined",
            serving.u, serving.v
        )));
    }
    Ok(pattern_gain(serving.sector, d, layout.front_to_back()))
}

#[inline]
pub(crate) fn pattern_gain<T: Real>(sector: Sector, d: Point<T>, q: T) -> T {
    if sector.covers(d) {
        T::one()
    } else {
        T::one() / q
    }
}

/// Unnormalized average power gain `d^-gamma * pattern` from a point to the
/// receiving sector antenna.
pub fn gain_to_point<T: Real>(receiver: SectorId, target: Point<T>, layout: &HexLayout<T>) -> Result<T> {
    let d = (target - bs_position(receiver, layout)).norm();
    let pattern = sector_gain(receiver, target, layout)?;
    Ok(d.powf(-layout.decay_exponent()) * pattern)
}

/// Unnormalized gain between `receiver` and the user of `transmitter`.
pub fn average_power_gain<T: Real>(
    receiver: SectorId,
    transmitter: SectorId,
    placement: UserPlacement,
    layout: &HexLayout<T>,
) -> Result<T> {
    gain_to_point(receiver, user_position(transmitter, placement, layout), layout)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn origin(s: Sector) -> SectorId {
        SectorId::new(0, 0, s)
    }

    #[test]
    fn bs_coordinates() {
        let l = HexLayout::<f64>::reference();
        let p = bs_position(origin(Sector::S1), &l);
        assert_eq!((p.x, p.y), (0.0, 0.0));
        let p = bs_position(SectorId::new(1, 0, Sector::S1), &l);
        assert_relative_eq!(p.x, 1.5);
        assert_relative_eq!(p.y, 3f64.sqrt() / 2.0);
        let p = bs_position(SectorId::new(0, 1, Sector::S1), &l);
        assert_relative_eq!(p.x, 0.0);
        assert_relative_eq!(p.y, 3f64.sqrt());
    }

    #[test]
    fn centered_users_sit_at_two_thirds_radius() {
        let l = HexLayout::<f64>::reference();
        let p = user_position(origin(Sector::S3), UserPlacement::Centered, &l);
        assert_relative_eq!(p.x, 2.0 / 3.0);
        assert_relative_eq!(p.y, 0.0);
        let p = user_position(origin(Sector::S1), UserPlacement::Centered, &l);
        assert_relative_eq!(p.x, -1.0 / 3.0);
        assert_relative_eq!(p.y, 1.0 / 3f64.sqrt());
        for s in Sector::ALL {
            let p = user_position(origin(s), UserPlacement::Centered, &l);
            assert_relative_eq!(p.norm(), 2.0 / 3.0, epsilon = 1e-15);
            assert!(sector_region_contains(origin(s), p, &l));
        }
    }

    #[test]
    fn randomized_users_stay_in_their_sector() {
        let l = HexLayout::<f64>::reference();
        for seed in 0..200 {
            for (u, v) in [(0, 0), (3, -2), (-5, 7)] {
                for s in Sector::ALL {
                    let id = SectorId::new(u, v, s);
                    let p = user_position(id, UserPlacement::Randomized { seed }, &l);
                    assert!(sector_region_contains(id, p, &l), "{id:?} seed {seed}");
                    // the serving antenna always sees its own user in the main lobe
                    assert_eq!(sector_gain(id, p, &l).unwrap(), 1.0);
                }
            }
        }
    }

    #[test]
    fn pattern_main_lobe_and_back_lobe() {
        let l = HexLayout::<f64>::reference();
        let user3 = user_position(origin(Sector::S3), UserPlacement::Centered, &l);
        assert_eq!(sector_gain(origin(Sector::S3), user3, &l).unwrap(), 1.0);
        assert_relative_eq!(sector_gain(origin(Sector::S1), user3, &l).unwrap(), 0.01, epsilon = 1e-15);
        assert!(sector_gain(origin(Sector::S3), Point::new(0.0, 0.0), &l).is_err());
    }

    #[test]
    fn span_is_half_open_and_rotation_symmetric() {
        // exactly one of the three antennas covers each boundary direction
        let s3 = 3f64.sqrt() / 2.0;
        for d in [
            Point::new(0.5, s3),
            Point::new(0.5, -s3),
            Point::new(-1.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(-0.3, 0.9),
        ] {
            let n = Sector::ALL.iter().filter(|s| s.covers(d)).count();
            assert_eq!(n, 1, "{d:?}");
        }
        assert!(Sector::S3.covers(Point::new(0.5, -s3)));
        assert!(!Sector::S3.covers(Point::new(0.5, s3)));
        assert!(Sector::S1.covers(Point::new(0.5, s3)));
        assert!(Sector::S2.covers(Point::new(-1.0, 0.0)));
    }

    #[test]
    fn own_user_gain_is_power_law() {
        let l = HexLayout::<f64>::reference();
        let g = average_power_gain(origin(Sector::S3), origin(Sector::S3), UserPlacement::Centered, &l).unwrap();
        // (2/3)^-3.8 = 1.5^3.8, 30-digit reference value
        assert_relative_eq!(g, 4.668_171_301_876_247, max_relative = 1e-12);
    }

    #[test]
    fn zero_exponent_leaves_only_the_pattern() {
        let l = HexLayout::<f64>::reference().with_exponent_unchecked(0.0);
        let own = average_power_gain(origin(Sector::S3), origin(Sector::S3), UserPlacement::Centered, &l).unwrap();
        let other = average_power_gain(origin(Sector::S1), origin(Sector::S3), UserPlacement::Centered, &l).unwrap();
        assert_eq!(own, 1.0);
        assert_relative_eq!(other, 0.01);
    }

    #[test]
    fn layout_validation() {
        assert!(HexLayout::<f64>::new(1.5, 20.0).is_err());
        assert!(HexLayout::<f64>::new(2.0, 20.0).is_err());
        assert!(HexLayout::<f64>::new(3.0, -1.0).is_err());
        assert!(HexLayout::<f64>::reference().with_cell_radius(0.0).is_err());
        assert_relative_eq!(HexLayout::<f64>::reference().front_to_back(), 100.0, max_relative = 1e-14);
    }
}
