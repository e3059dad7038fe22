//! Filter banks.
//!
//! Each of the `K` filters is an `N x M` non-negative kernel with rows that sum
//! to one. Two parameterizations are supported:
//!
//! * [`Variant::Direct`]: a free `N x M` weight matrix per filter, pushed through
//!   a softmax over the time axis of every row.
//! * [`Variant::Gaussian`]: one learnable mean per row; the row is a Gaussian
//!   bump with fixed `sigma`, truncated to `[0, M)` and (by default) rescaled to
//!   unit sum.
//!
//! Row-stochastic kernels are what keep the total response of a filter equal to
//! the spike count of the data, which in turn makes a single significance
//! threshold meaningful for every filter.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::spikes::Permutation;

/// Standard deviation of the raw direct weights at initialization.
pub const DIRECT_INIT_SD: f64 = 0.01;
/// Default Gaussian row width, in bins.
pub const DEFAULT_SIGMA: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Direct,
    Gaussian,
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Variant::Direct),
            "gaussian" => Ok(Variant::Gaussian),
            other => Err(Error::invalid(format!("unknown filter variant '{other}'"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Direct => "direct",
            Variant::Gaussian => "gaussian",
        })
    }
}

/// Dense `N x M` kernel, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    n_rows: usize,
    width: usize,
    data: Vec<f64>,
}

impl Kernel {
    pub fn new(n_rows: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_rows * width {
            return Err(Error::dims(format!(
                "kernel data of length {} for {n_rows}x{width}",
                data.len()
            )));
        }
        Ok(Kernel {
            n_rows,
            width,
            data,
        })
    }

    pub fn zeros(n_rows: usize, width: usize) -> Self {
        Kernel {
            n_rows,
            width,
            data: vec![0.0; n_rows * width],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.data[n * self.width..(n + 1) * self.width]
    }

    pub fn row_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.data[n * self.width..(n + 1) * self.width]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, n: usize, m: usize) -> f64 {
        self.data[n * self.width + m]
    }
}

/// Neuron ordering obtained from one filter.
#[derive(Debug, Clone, PartialEq)]
pub struct SortResult {
    pub order: Permutation,
    /// Argmax bin of each row (direct) or the row mean (Gaussian).
    pub latencies: Vec<f64>,
}

/// `K` filters sharing one parameterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBank {
    variant: Variant,
    n_neurons: usize,
    width: usize,
    n_filters: usize,
    /// Gaussian row width in bins; `None` for direct banks.
    sigma: Option<f64>,
    /// Whether Gaussian rows are rescaled to unit sum after truncation.
    #[serde(default = "default_true")]
    normalized: bool,
    /// Direct: `K * N * M` raw weights. Gaussian: `K * N` means.
    params: Vec<f64>,
}

fn default_true() -> bool {
    true
}

impl FilterBank {
    pub fn init_direct(n_neurons: usize, width: usize, n_filters: usize, seed: u64) -> Result<Self> {
        let mut rng = rng::substream(seed, rng::STREAM_FILTER_INIT);
        Self::init_direct_with(n_neurons, width, n_filters, &mut rng)
    }

    pub fn init_direct_with<R: Rng + ?Sized>(
        n_neurons: usize,
        width: usize,
        n_filters: usize,
        rng: &mut R,
    ) -> Result<Self> {
        check_dims(n_neurons, width, n_filters)?;
        let normal = Normal::new(0.0, DIRECT_INIT_SD).expect("valid sd");
        let params = (0..n_filters * n_neurons * width)
            .map(|_| normal.sample(rng))
            .collect();
        Ok(FilterBank {
            variant: Variant::Direct,
            n_neurons,
            width,
            n_filters,
            sigma: None,
            normalized: true,
            params,
        })
    }

    pub fn init_gaussian(
        n_neurons: usize,
        width: usize,
        n_filters: usize,
        sigma: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = rng::substream(seed, rng::STREAM_FILTER_INIT);
        Self::init_gaussian_with(n_neurons, width, n_filters, sigma, &mut rng)
    }

    /// Means are drawn uniformly from `[0, M - 1]`.
    pub fn init_gaussian_with<R: Rng + ?Sized>(
        n_neurons: usize,
        width: usize,
        n_filters: usize,
        sigma: f64,
        rng: &mut R,
    ) -> Result<Self> {
        check_dims(n_neurons, width, n_filters)?;
        check_sigma(sigma)?;
        let uni = Uniform::new_inclusive(0.0, (width - 1) as f64).expect("valid range");
        let params = (0..n_filters * n_neurons).map(|_| uni.sample(rng)).collect();
        Ok(FilterBank {
            variant: Variant::Gaussian,
            n_neurons,
            width,
            n_filters,
            sigma: Some(sigma),
            normalized: true,
            params,
        })
    }

    /// Build a bank from explicit parameters (see [`FilterBank::params`] for the layout).
    pub fn from_params(
        variant: Variant,
        n_neurons: usize,
        width: usize,
        n_filters: usize,
        sigma: Option<f64>,
        params: Vec<f64>,
    ) -> Result<Self> {
        check_dims(n_neurons, width, n_filters)?;
        let bank = FilterBank {
            variant,
            n_neurons,
            width,
            n_filters,
            sigma,
            normalized: true,
            params,
        };
        bank.validate()?;
        Ok(bank)
    }

    fn validate(&self) -> Result<()> {
        check_dims(self.n_neurons, self.width, self.n_filters)?;
        let expected = self.n_filters * self.per_filter_params();
        if self.params.len() != expected {
            return Err(Error::dims(format!(
                "{} parameters, expected {expected}",
                self.params.len()
            )));
        }
        match (self.variant, self.sigma) {
            (Variant::Gaussian, Some(s)) => check_sigma(s)?,
            (Variant::Gaussian, None) => return Err(Error::invalid("Gaussian bank without sigma")),
            (Variant::Direct, _) => {}
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("non-finite filter parameter"));
        }
        Ok(())
    }

    /// Switch Gaussian rows between unit-sum and unit-amplitude.
    pub fn with_normalization(mut self, normalized: bool) -> Self {
        self.normalized = normalized;
        self
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn n_neurons(&self) -> usize {
        self.n_neurons
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_filters(&self) -> usize {
        self.n_filters
    }

    pub fn sigma(&self) -> Option<f64> {
        self.sigma
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn per_filter_params(&self) -> usize {
        match self.variant {
            Variant::Direct => self.n_neurons * self.width,
            Variant::Gaussian => self.n_neurons,
        }
    }

    /// Flat trainable parameters, filter-major.
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn filter_params(&self, k: usize) -> &[f64] {
        let p = self.per_filter_params();
        &self.params[k * p..(k + 1) * p]
    }

    /// Dense kernel of filter `k`.
    pub fn materialize(&self, k: usize) -> Kernel {
        assert!(k < self.n_filters, "filter {k} out of range");
        let mut kernel = Kernel::zeros(self.n_neurons, self.width);
        let params = self.filter_params(k);
        for n in 0..self.n_neurons {
            let row = kernel.row_mut(n);
            match self.variant {
                Variant::Direct => softmax_into(&params[n * self.width..(n + 1) * self.width], row),
                Variant::Gaussian => {
                    gaussian_row_into(params[n], self.sigma.unwrap_or(DEFAULT_SIGMA), self.normalized, row)
                }
            }
        }
        kernel
    }

    /// Chain a gradient w.r.t. the dense kernel of filter `k` back to the
    /// filter's parameters. `kernel` must be `self.materialize(k)`.
    pub fn backprop(&self, k: usize, kernel: &Kernel, kernel_grad: &Kernel, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.per_filter_params());
        let params = self.filter_params(k);
        match self.variant {
            Variant::Direct => {
                for n in 0..self.n_neurons {
                    let r = kernel.row(n);
                    let g = kernel_grad.row(n);
                    let dot: f64 = r.iter().zip(g).map(|(a, b)| a * b).sum();
                    let dst = &mut out[n * self.width..(n + 1) * self.width];
                    for ((d, &rm), &gm) in dst.iter_mut().zip(r).zip(g) {
                        *d = rm * (gm - dot);
                    }
                }
            }
            Variant::Gaussian => {
                let sigma = self.sigma.unwrap_or(DEFAULT_SIGMA);
                let inv_var = 1.0 / (sigma * sigma);
                for n in 0..self.n_neurons {
                    let mu = params[n];
                    let r = kernel.row(n);
                    let g = kernel_grad.row(n);
                    // d row_m / d mu = row_m * (m - mu) / sigma^2, minus the
                    // row-weighted mean of that term when rows are unit-sum.
                    let centred: f64 = if self.normalized {
                        r.iter()
                            .enumerate()
                            .map(|(m, &rm)| rm * (m as f64 - mu))
                            .sum::<f64>()
                    } else {
                        0.0
                    };
                    out[n] = r
                        .iter()
                        .zip(g)
                        .enumerate()
                        .map(|(m, (&rm, &gm))| gm * rm * ((m as f64 - mu) - centred))
                        .sum::<f64>()
                        * inv_var;
                }
            }
        }
    }

    /// Latency per neuron and the stable ordering by latency.
    pub fn sort_filter(&self, k: usize) -> SortResult {
        assert!(k < self.n_filters, "filter {k} out of range");
        let latencies: Vec<f64> = match self.variant {
            Variant::Direct => {
                let kernel = self.materialize(k);
                (0..self.n_neurons)
                    .map(|n| argmax_first(kernel.row(n)) as f64)
                    .collect()
            }
            Variant::Gaussian => self.filter_params(k).to_vec(),
        };
        SortResult {
            order: argsort_stable(&latencies),
            latencies,
        }
    }

    /// Bank whose row `n` is row `order[n]` of `self`, for every filter.
    pub fn reorder_rows(&self, order: &Permutation) -> Result<FilterBank> {
        if order.len() != self.n_neurons {
            return Err(Error::dims("row order length differs from N"));
        }
        let per_row = self.per_filter_params() / self.n_neurons;
        let mut params = Vec::with_capacity(self.params.len());
        for k in 0..self.n_filters {
            let fp = self.filter_params(k);
            for n in 0..self.n_neurons {
                let src = order[n];
                params.extend_from_slice(&fp[src * per_row..(src + 1) * per_row]);
            }
        }
        Ok(FilterBank {
            params,
            ..self.clone()
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<FilterBank> {
        let bank: FilterBank = serde_json::from_str(text)?;
        bank.validate()?;
        Ok(bank)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<FilterBank> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

fn check_dims(n: usize, m: usize, k: usize) -> Result<()> {
    if n == 0 || m == 0 || k == 0 {
        return Err(Error::invalid(format!(
            "filter dimensions must be positive (N={n}, M={m}, K={k})"
        )));
    }
    Ok(())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    Ok(())
}

/// Max-shifted softmax.
pub fn softmax_into(raw: &[f64], out: &mut [f64]) {
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &r) in out.iter_mut().zip(raw) {
        *o = (r - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Gaussian bump over bins `0..out.len()`. Normalized rows are computed with
/// the largest exponent shifted to zero so that means far outside the window
/// still produce a finite row.
pub fn gaussian_row_into(mu: f64, sigma: f64, normalized: bool, out: &mut [f64]) {
    let two_var = 2.0 * sigma * sigma;
    if normalized {
        let nearest = mu.round().clamp(0.0, (out.len() - 1) as f64);
        let shift = (nearest - mu).powi(2) / two_var;
        let mut sum = 0.0;
        for (m, o) in out.iter_mut().enumerate() {
            *o = (shift - (m as f64 - mu).powi(2) / two_var).exp();
            sum += *o;
        }
        for o in out.iter_mut() {
            *o /= sum;
        }
    } else {
        for (m, o) in out.iter_mut().enumerate() {
            *o = (-(m as f64 - mu).powi(2) / two_var).exp();
        }
    }
}

fn argmax_first(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Indices sorted by key, ties kept in index order.
pub fn argsort_stable(keys: &[f64]) -> Permutation {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]));
    Permutation::new(idx).expect("argsort is a permutation")
}
