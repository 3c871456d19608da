//! Replayable random streams.
//!
//! Every Monte Carlo draw comes from a ChaCha8 generator keyed by the
//! experiment's master seed, with the 64-bit ChaCha stream id derived from
//! `(domain, index)` by SplitMix64 finalization. A draw therefore depends
//! only on `(master_seed, domain, index)`: trials can be evaluated in any
//! order, on any number of threads, and reproduce bit for bit.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::scalar::Real;

/// Stream domains keep unrelated consumers of the same master seed apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Channel = 1,
    Signal = 2,
    ReceiverSubsample = 3,
    Placement = 4,
    Beamformer = 5,
    Profile = 6,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for one `(domain, index)` cell of the master seed.
pub fn stream(master_seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(splitmix64(splitmix64(domain as u64) ^ index));
    rng
}

/// Circularly-symmetric complex Gaussian with unit variance.
#[inline]
pub fn complex_normal<T: Real, R: rand::Rng + ?Sized>(rng: &mut R) -> Complex<T> {
    let s = T::FRAC_1_SQRT_2();
    Complex::new(T::standard_normal(rng) * s, T::standard_normal(rng) * s)
}

/// Fills `out` with unit-variance complex Gaussians.
pub fn fill_complex_normal<T: Real, R: rand::Rng + ?Sized>(rng: &mut R, out: &mut [Complex<T>]) {
    for z in out.iter_mut() {
        *z = complex_normal(rng);
    }
}
