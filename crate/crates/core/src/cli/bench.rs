//! Wall-clock measurements of the training loop.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::engine::{self, FitConfig};
use crate::error::Result;
use crate::filters::FilterBank;
use crate::presets::pick_members;
use crate::rng;
use crate::synth::{self, SequenceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchCase {
    pub n_neurons: usize,
    pub n_bins: usize,
    pub n_filters: usize,
    pub density: f64,
    pub width: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub case: BenchCase,
    pub seed: u64,
    pub seconds: f64,
    pub seconds_per_step: f64,
}

/// Background of the given density with one 40-neuron sequence every 200
/// bins (dropout 0.2, jitter 10).
pub fn bench_dataset(case: &BenchCase, seed: u64) -> Result<crate::spikes::SpikeMatrix> {
    let bg = synth::bernoulli_background(case.n_neurons, case.n_bins, case.density, seed)?;
    let members = pick_members(case.n_neurons, 40.min(case.n_neurons), seed)?;
    let spec = SequenceSpec::new(members, 0.2, 10.0, 200, 60.0);
    Ok(synth::embed_sequences(&bg, &[spec], seed)?.0)
}

/// Time `case.steps` optimization steps, excluding data generation.
pub fn time_fit(case: &BenchCase, seed: u64) -> Result<BenchResult> {
    let x = bench_dataset(case, seed)?;
    let bank = FilterBank::init_direct(case.n_neurons, case.width, case.n_filters, rng::child_seed(seed, 1))?;
    let config = FitConfig {
        n_steps: case.steps,
        seed,
        ..FitConfig::default()
    };
    let start = Instant::now();
    engine::fit(&x, bank, &config)?;
    let seconds = start.elapsed().as_secs_f64();
    Ok(BenchResult {
        case: *case,
        seed,
        seconds,
        seconds_per_step: seconds / case.steps as f64,
    })
}

/// Least-squares slope of `ln y` on `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
