//! Linear ISI channel with additive white Gaussian noise.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::trellis::TrellisSpec;
use crate::{math, Error, Result};

/// Symbol assumed to precede every frame.
pub const PRE_HISTORY: f64 = 1.0;

/// Time-invariant taps `h_1..h_L` (normalized to unit energy) and the noise
/// variance.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    taps: Vec<f64>,
    noise_variance: f64,
    rng_seed: u64,
}

impl ChannelSpec {
    pub fn new(taps: &[f64], noise_variance: f64, rng_seed: u64) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::Config("channel needs at least one tap"));
        }
        let energy: f64 = taps.iter().map(|h| h * h).sum();
        if !energy.is_finite() || energy <= 0.0 {
            return Err(Error::Config(
                "channel taps must have finite nonzero energy",
            ));
        }
        if !noise_variance.is_finite() || noise_variance <= 0.0 {
            return Err(Error::Config("noise variance must be positive"));
        }
        let norm = math::sqrt(energy);
        Ok(Self {
            taps: taps.iter().map(|h| h / norm).collect(),
            noise_variance,
            rng_seed,
        })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Channel memory `L` (number of taps).
    pub fn memory(&self) -> usize {
        self.taps.len()
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }
}

/// `z_t = sum_l h_l x_{t-l+1}`, with `history` standing in for symbols
/// before the start of `x`.
pub fn convolve(x: &[f64], taps: &[f64], history: f64) -> Vec<f64> {
    (0..x.len())
        .map(|t| {
            taps.iter()
                .enumerate()
                .map(|(l, h)| h * if t >= l { x[t - l] } else { history })
                .sum()
        })
        .collect()
}

/// Passes BPSK symbols through the channel. Returns the noiseless output
/// and the received samples.
pub fn apply_channel(symbols: &[f64], spec: &ChannelSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    if symbols.is_empty() {
        return Err(Error::Input("empty symbol sequence"));
    }
    if symbols.iter().any(|&x| x != 1.0 && x != -1.0) {
        return Err(Error::Input("symbols must be +1 or -1"));
    }
    let z = convolve(symbols, &spec.taps, PRE_HISTORY);
    let sigma = math::sqrt(spec.noise_variance);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let y = z
        .iter()
        .map(|&zt| {
            let w: f64 = StandardNormal.sample(&mut rng);
            zt + sigma * w
        })
        .collect();
    Ok((z, y))
}

/// Noiseless output of every emission parameter, i.e. of every `L`-symbol
/// window in parameter-index order.
pub fn true_param_table(spec: &ChannelSpec, trellis: &TrellisSpec) -> Result<Vec<f64>> {
    match trellis.isi_memory() {
        Some(l) if l == spec.memory() => {}
        Some(_) => return Err(Error::Config("trellis memory does not match the channel")),
        None => return Err(Error::Config("expected an ISI trellis")),
    }
    Ok((0..trellis.num_params())
        .map(|window| {
            spec.taps
                .iter()
                .enumerate()
                .map(|(i, h)| if (window >> i) & 1 == 0 { *h } else { -*h })
                .sum()
        })
        .collect())
}

/// Noise variance for an SNR in dB, given unit symbol energy and unit-norm
/// taps.
pub fn snr_to_variance(snr_db: f64) -> f64 {
    libm::pow(10.0, -snr_db / 10.0)
}
