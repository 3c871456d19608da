//! Small-scale fading: block and continuous (rectangular Doppler) models,
//! their coherence equivalence, and seeded Rayleigh channel draws.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GeometryProfile;
use crate::linalg::CMatrix;
use crate::rng::{complex_normal, stream, Domain};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub enum FadingModel<T = f64> {
    /// Channel constant over blocks of `coherence` symbols, IID across blocks.
    Block { coherence: usize },
    /// Stationary fading with a rectangular Doppler spectrum of normalized
    /// half-width `doppler`.
    ContinuousRect { doppler: T },
}

impl<T: Real> FadingModel<T> {
    pub fn block(coherence: usize) -> Result<Self> {
        let m = FadingModel::Block { coherence };
        m.validate()?;
        Ok(m)
    }

    pub fn continuous_rect(doppler: T) -> Result<Self> {
        let m = FadingModel::ContinuousRect { doppler };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            FadingModel::Block { coherence: 0 } => {
                Err(Error::param("L", "coherence length must be at least 1 symbol"))
            }
            FadingModel::ContinuousRect { doppler } if !(doppler > T::zero() && doppler <= T::lit(0.5)) => Err(
                Error::param("fd", format!("normalized Doppler must lie in (0, 1/2], got {doppler}")),
            ),
            _ => Ok(()),
        }
    }
}

/// Coherence length in symbols; `1/(2 f_D)` for a rectangular spectrum.
pub fn effective_coherence<T: Real>(model: &FadingModel<T>) -> T {
    match *model {
        FadingModel::Block { coherence } => T::from_usize_lossy(coherence),
        FadingModel::ContinuousRect { doppler } => T::one() / (T::lit(2.0) * doppler),
    }
}

/// Normalized Doppler `v / (lambda B_c)` from velocity (m/s), carrier
/// wavelength (m) and coherence bandwidth (Hz).
pub fn doppler_from_physical<T: Real>(velocity: T, wavelength: T, coherence_bandwidth: T) -> Result<T> {
    for (name, x) in [
        ("velocity", velocity),
        ("wavelength", wavelength),
        ("coherence_bandwidth", coherence_bandwidth),
    ] {
        if !(x > T::zero()) || !x.is_finite() {
            return Err(Error::param(name, format!("must be finite and > 0, got {x}")));
        }
    }
    let fd = velocity / (wavelength * coherence_bandwidth);
    if fd > T::lit(0.5) {
        return Err(Error::param(
            "fd",
            format!("normalized Doppler {fd} exceeds 1/2; the channel is not underspread"),
        ));
    }
    Ok(fd)
}

/// One draw of the `N x K` channel, entry `(n, k)` ~ CN(0, g_nk).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSample<T> {
    pub h: CMatrix<T>,
    pub seed: u64,
    pub trial: u64,
}

/// Entries come from the `(seed, Channel, trial)` stream in row-major order.
pub fn sample_channel<T: Real>(profile: &GeometryProfile<T>, seed: u64, trial: u64) -> ChannelSample<T> {
    let mut rng = stream(seed, Domain::Channel, trial);
    let h = CMatrix::from_fn(profile.receivers(), profile.transmitters(), |n, k| {
        let z = complex_normal::<T, _>(&mut rng);
        z * profile.g(n, k).sqrt()
    });
    ChannelSample { h, seed, trial }
}
