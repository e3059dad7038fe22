//! Significance threshold from the responses of random filters.
//!
//! `n_null` single filters are drawn from the training initialization family,
//! convolved with the data, and all `n_null * T` response values are pooled
//! into one null distribution. The threshold is `alpha = z * sigma0 + mu0`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::conv;
use crate::error::{Error, Result};
use crate::filters::{FilterBank, Kernel, Variant};
use crate::rng;
use crate::spikes::SpikeMatrix;

pub const DEFAULT_N_NULL: usize = 1000;
pub const DEFAULT_Z: f64 = 4.0;

/// Which random filters populate the null. `Direct` and `Gaussian` repeat
/// the training initialization; `Uniform` draws every kernel entry from
/// U(0, 1) and normalizes rows to unit sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum NullFamily {
    Direct,
    Gaussian { sigma: f64, normalized: bool },
    Uniform,
}

impl NullFamily {
    /// Family matching a trained bank.
    pub fn of(bank: &FilterBank) -> Self {
        match bank.variant() {
            Variant::Direct => NullFamily::Direct,
            Variant::Gaussian => NullFamily::Gaussian {
                sigma: bank.sigma().unwrap_or(crate::filters::DEFAULT_SIGMA),
                normalized: bank.is_normalized(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullCalibration {
    pub mu0: f64,
    pub sigma0: f64,
    pub alpha: f64,
    pub n_null: usize,
    pub z: f64,
    pub seed: u64,
    pub family: NullFamily,
}

impl NullCalibration {
    pub fn from_moments(mu0: f64, sigma0: f64, z: f64) -> f64 {
        z * sigma0 + mu0
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Running count, mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let m2 = values.iter().map(|v| (v - mean).powi(2)).sum();
        Moments { n, mean, m2 }
    }

    fn merge(self, o: Moments) -> Moments {
        if self.n == 0.0 {
            return o;
        }
        let n = self.n + o.n;
        let delta = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + delta * o.n / n,
            m2: self.m2 + o.m2 + delta * delta * self.n * o.n / n,
        }
    }
}

fn uniform_kernel<R: Rng + ?Sized>(n: usize, width: usize, r: &mut R) -> Result<Kernel> {
    if width == 0 {
        return Err(Error::invalid("filter width must be positive"));
    }
    let mut data: Vec<f64> = (0..n * width).map(|_| r.random::<f64>()).collect();
    for row in data.chunks_mut(width) {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    Kernel::new(n, width, data)
}

pub fn calibrate_null(
    x: &SpikeMatrix,
    width: usize,
    family: NullFamily,
    n_null: usize,
    z: f64,
    seed: u64,
) -> Result<NullCalibration> {
    if n_null < 2 {
        return Err(Error::invalid("n_null must be at least 2"));
    }
    if x.n_bins() == 0 {
        return Err(Error::invalid("empty raster"));
    }
    let n = x.n_neurons();
    let per_filter: Vec<Moments> = (0..n_null)
        .into_par_iter()
        .map(|i| -> Result<Moments> {
            let mut r = rng::substream(seed, rng::STREAM_NULL_BASE + i as u64);
            let kernel = match family {
                NullFamily::Direct => FilterBank::init_direct_with(n, width, 1, &mut r)?.materialize(0),
                NullFamily::Gaussian { sigma, normalized } => FilterBank::init_gaussian_with(n, width, 1, sigma, &mut r)?
                    .with_normalization(normalized)
                    .materialize(0),
                NullFamily::Uniform => uniform_kernel(n, width, &mut r)?,
            };
            let trace = conv::convolve(&kernel, x)?;
            Ok(Moments::of(&trace))
        })
        .collect::<Result<_>>()?;
    let total = per_filter.into_iter().fold(Moments::default(), Moments::merge);
    let mu0 = total.mean;
    let sigma0 = (total.m2 / total.n).max(0.0).sqrt();
    Ok(NullCalibration {
        mu0,
        sigma0,
        alpha: NullCalibration::from_moments(mu0, sigma0, z),
        n_null,
        z,
        seed,
        family,
    })
}
