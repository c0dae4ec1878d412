//! Downlink and uplink received-signal models, AWGN and Rayleigh sampling.
//!
//! Energy convention: `Eb = 1`, so a sweep point of `x` dB uses
//! `N0 = 10^(-x/10)`. Noise is circularly-symmetric complex Gaussian with
//! variance `N0` per complex sample. Rayleigh gains are unit-power complex
//! Gaussians drawn independently per resource element.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::codebook::Codeword;
use crate::error::{Error, Result};

/// Direction of transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Link {
    /// Base station broadcasts the superposition; receiver `i` sees it through `h_i`.
    Downlink,
    /// Each user's codeword goes through its own `h_j` before summing at the base station.
    Uplink,
}

/// Small-scale channel model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Fading {
    /// Unit gains, noise only.
    #[default]
    Awgn,
    /// Independent `CN(0, 1)` gain per resource element.
    Rayleigh,
}

impl Fading {
    /// `K` gains; the AWGN case draws nothing from `rng`.
    pub fn draw<R: Rng + ?Sized>(self, k: usize, rng: &mut R) -> Vec<Complex64> {
        match self {
            Fading::Awgn => vec![Complex64::new(1.0, 0.0); k],
            Fading::Rayleigh => sample_rayleigh(k, rng),
        }
    }
}

/// Additive noise on the `K` resources.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSample(pub Vec<Complex64>);

impl NoiseSample {
    pub fn zeros(k: usize) -> Self {
        Self(vec![Complex64::new(0.0, 0.0); k])
    }

    pub fn values(&self) -> &[Complex64] {
        &self.0
    }
}

/// Gains, powers and noise level for one transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub link: Link,
    /// Downlink: one vector per receiving user. Uplink: one per transmitting user.
    pub gains: Vec<Vec<Complex64>>,
    pub n0: f64,
    pub powers: Vec<f64>,
}

impl ChannelRealization {
    pub fn new(link: Link, gains: Vec<Vec<Complex64>>, n0: f64, powers: Vec<f64>) -> Result<Self> {
        if !(n0 > 0.0) {
            return Err(Error::InvalidArgument(format!("noise level {n0} must be positive")));
        }
        let k = gains.first().map_or(0, Vec::len);
        if gains.iter().any(|g| g.len() != k) {
            return Err(Error::Dimension("gain vectors differ in length".into()));
        }
        if powers.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidArgument("powers must be nonnegative".into()));
        }
        Ok(Self {
            link,
            gains,
            n0,
            powers,
        })
    }

    /// Gains as seen by the detector at downlink receiver `receiver`
    /// (ignored for uplink, where the base station sees every user's own gains).
    pub fn detector_gains(&self, receiver: usize) -> GainMatrix {
        match self.link {
            Link::Downlink => GainMatrix::downlink(&self.gains[receiver], self.powers.len()),
            Link::Uplink => GainMatrix::uplink(&self.gains),
        }
    }
}

/// Channel coefficient `h_kj` seen on resource `k` for user `j`'s signal.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix {
    resources: usize,
    users: usize,
    values: Vec<Complex64>,
}

impl GainMatrix {
    pub fn unit(resources: usize, users: usize) -> Self {
        Self {
            resources,
            users,
            values: vec![Complex64::new(1.0, 0.0); resources * users],
        }
    }

    /// Every user's signal goes through the same per-resource gain `h`.
    pub fn downlink(h: &[Complex64], users: usize) -> Self {
        let values = h.iter().flat_map(|&g| std::iter::repeat_n(g, users)).collect();
        Self {
            resources: h.len(),
            users,
            values,
        }
    }

    /// One length-`K` gain vector per user.
    pub fn uplink(per_user: &[Vec<Complex64>]) -> Self {
        let users = per_user.len();
        let resources = per_user.first().map_or(0, Vec::len);
        let mut values = vec![Complex64::new(0.0, 0.0); resources * users];
        for (j, g) in per_user.iter().enumerate() {
            for (k, &h) in g.iter().enumerate() {
                values[k * users + j] = h;
            }
        }
        Self {
            resources,
            users,
            values,
        }
    }

    pub fn resources(&self) -> usize {
        self.resources
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn get(&self, k: usize, j: usize) -> Complex64 {
        self.values[k * self.users + j]
    }
}

/// `y = diag(h) * sum_j sqrt(P_j) x_j + n`.
pub fn receive_downlink(
    codewords: &[Codeword],
    powers: &[f64],
    h: &[Complex64],
    noise: &NoiseSample,
) -> Result<Vec<Complex64>> {
    let sum = crate::codebook::superpose(codewords, powers)?;
    if sum.len() != h.len() || noise.0.len() != h.len() {
        return Err(Error::Dimension(format!(
            "codeword length {}, gain length {}, noise length {}",
            sum.len(),
            h.len(),
            noise.0.len()
        )));
    }
    Ok(sum.iter().zip(h).zip(&noise.0).map(|((s, g), n)| g * s + n).collect())
}

/// `y = sum_j sqrt(P_j) diag(h_j) x_j + n`.
pub fn receive_uplink(
    codewords: &[Codeword],
    powers: &[f64],
    gains: &[Vec<Complex64>],
    noise: &NoiseSample,
) -> Result<Vec<Complex64>> {
    if codewords.len() != powers.len() || codewords.len() != gains.len() {
        return Err(Error::Dimension(format!(
            "{} codewords, {} powers, {} gain vectors",
            codewords.len(),
            powers.len(),
            gains.len()
        )));
    }
    let k = noise.0.len();
    let mut y = noise.0.clone();
    for ((cw, &p), h) in codewords.iter().zip(powers).zip(gains) {
        if cw.len() != k || h.len() != k {
            return Err(Error::Dimension(format!(
                "codeword length {}, gain length {}, noise length {k}",
                cw.len(),
                h.len()
            )));
        }
        if !(p >= 0.0) {
            return Err(Error::InvalidArgument(format!("power {p} is negative")));
        }
        let a = p.sqrt();
        for ((yk, x), g) in y.iter_mut().zip(cw.values()).zip(h) {
            *yk += g * x * a;
        }
    }
    Ok(y)
}

/// `N0 = 10^(-Eb/N0 [dB] / 10)` with `Eb = 1`.
pub fn n0_from_ebn0(ebn0_db: f64) -> f64 {
    10f64.powf(-ebn0_db / 10.0)
}

/// `K` i.i.d. `CN(0, n0)` samples.
pub fn sample_awgn<R: Rng + ?Sized>(n0: f64, k: usize, rng: &mut R) -> Result<NoiseSample> {
    if !(n0 > 0.0) || !n0.is_finite() {
        return Err(Error::InvalidArgument(format!("noise level {n0} must be positive")));
    }
    let sigma = (n0 / 2.0).sqrt();
    Ok(NoiseSample(
        (0..k)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re * sigma, im * sigma)
            })
            .collect(),
    ))
}

/// `K` i.i.d. `CN(0, 1)` gains; envelopes are Rayleigh with `E|h|^2 = 1`.
pub fn sample_rayleigh<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<Complex64> {
    let sigma = std::f64::consts::FRAC_1_SQRT_2;
    (0..k)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * sigma, im * sigma)
        })
        .collect()
}

/// Independent generator for `stream` under `seed`.
///
/// Streams never overlap, so work split by stream index gives identical
/// results regardless of how it is scheduled.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
