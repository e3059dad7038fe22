//! Loss, gradients and the training loop.
//!
//! Gradients are computed in reverse mode by hand: loss terms produce a
//! gradient on each response trace ([`loss::trace_gradients`]), the adjoint
//! convolution scatters it onto the dense kernel
//! ([`conv::convolve_transpose`]), and the filter bank chains it through its
//! parameterization ([`FilterBank::backprop`]).
//!
//! Filters are processed in parallel; every reduction runs in a fixed order so
//! results are bit-identical between runs.

pub mod adam;
pub mod conv;
pub mod loss;

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::FilterBank;
use crate::spikes::SpikeMatrix;
use crate::stats::peaks::extract_detections;

pub use adam::{Adam, AdamState};
pub use loss::LossBreakdown;

pub const DEFAULT_STEPS: usize = 100;
pub const DEFAULT_LRATE: f64 = 0.1;
pub const DEFAULT_BETA_TV: f64 = 100.0;
/// Cross-correlation weight used when `K > 1`.
pub const DEFAULT_BETA_XCOR: f64 = 10.0;
pub const DEFAULT_WIDTH: usize = 100;

/// Response of filter `filter_index` to the data, one value per bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseTrace {
    pub filter_index: usize,
    pub values: Vec<f64>,
}

/// Stop once every filter has at least `min_peaks` peaks at or above `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    pub alpha: f64,
    pub min_peaks: usize,
    /// Peak suppression window; defaults to the filter width.
    #[serde(default)]
    pub window: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub n_steps: usize,
    pub lrate: f64,
    pub beta_tv: f64,
    /// `None` picks 0 for a single filter and [`DEFAULT_BETA_XCOR`] otherwise.
    pub beta_xcor: Option<f64>,
    /// Maximum cross-correlation lag; `None` means the filter width.
    pub j: Option<usize>,
    pub early_stop: Option<EarlyStop>,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            n_steps: DEFAULT_STEPS,
            lrate: DEFAULT_LRATE,
            beta_tv: DEFAULT_BETA_TV,
            beta_xcor: None,
            j: None,
            early_stop: None,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::invalid("n_steps must be at least 1"));
        }
        if !(self.lrate > 0.0 && self.lrate.is_finite()) {
            return Err(Error::invalid(format!("lrate must be positive, got {}", self.lrate)));
        }
        if !(self.beta_tv >= 0.0) || !self.beta_xcor.unwrap_or(0.0).is_finite() {
            return Err(Error::invalid("loss weights must be finite and beta_tv >= 0"));
        }
        Ok(())
    }

    /// Effective cross-correlation weight for a bank of `n_filters`.
    pub fn beta_xcor_for(&self, n_filters: usize) -> f64 {
        if n_filters < 2 {
            0.0
        } else {
            self.beta_xcor.unwrap_or(DEFAULT_BETA_XCOR)
        }
    }

    pub fn lag_for(&self, width: usize) -> usize {
        self.j.unwrap_or(width)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub bank: FilterBank,
    pub traces: Vec<ResponseTrace>,
    pub loss_history: Vec<LossBreakdown>,
    pub steps_run: usize,
}

fn check_shapes(bank: &FilterBank, x: &SpikeMatrix) -> Result<()> {
    if bank.n_neurons() != x.n_neurons() {
        return Err(Error::dims(format!(
            "bank has {} rows, data has {} neurons",
            bank.n_neurons(),
            x.n_neurons()
        )));
    }
    Ok(())
}

/// Response traces of every filter.
pub fn responses(bank: &FilterBank, x: &SpikeMatrix) -> Result<Vec<Vec<f64>>> {
    check_shapes(bank, x)?;
    (0..bank.n_filters())
        .into_par_iter()
        .map(|k| conv::convolve(&bank.materialize(k), x))
        .collect()
}

pub fn loss(bank: &FilterBank, x: &SpikeMatrix, config: &FitConfig) -> Result<LossBreakdown> {
    let traces = responses(bank, x)?;
    Ok(LossBreakdown::evaluate(
        &traces,
        config.beta_tv,
        config.beta_xcor_for(bank.n_filters()),
        config.lag_for(bank.width()),
    ))
}

/// Loss and its gradient with respect to `bank.params()`.
pub fn gradient(bank: &FilterBank, x: &SpikeMatrix, config: &FitConfig) -> Result<(LossBreakdown, Vec<f64>)> {
    check_shapes(bank, x)?;
    let kernels: Vec<_> = (0..bank.n_filters())
        .into_par_iter()
        .map(|k| bank.materialize(k))
        .collect();
    let traces: Vec<Vec<f64>> = kernels
        .par_iter()
        .map(|kern| conv::convolve(kern, x))
        .collect::<Result<_>>()?;
    let beta_xcor = config.beta_xcor_for(bank.n_filters());
    let j = config.lag_for(bank.width());
    let (breakdown, trace_grads) = loss::loss_and_gradients(&traces, config.beta_tv, beta_xcor, j);

    let per = bank.per_filter_params();
    let mut grads = vec![0.0; bank.params().len()];
    grads
        .par_chunks_mut(per)
        .zip(kernels.par_iter())
        .zip(trace_grads.par_iter())
        .enumerate()
        .try_for_each(|(k, ((out, kern), tg))| -> Result<()> {
            let kg = conv::convolve_transpose(tg, x, bank.width())?;
            bank.backprop(k, kern, &kg, out);
            Ok(())
        })?;
    Ok((breakdown, grads))
}

fn early_stop_met(stop: &EarlyStop, traces: &[Vec<f64>], width: usize) -> bool {
    let window = stop.window.unwrap_or(width).max(1);
    traces
        .iter()
        .all(|tr| extract_detections(tr, stop.alpha, window).len() >= stop.min_peaks)
}

/// Full-batch Adam on the loss, starting from `bank`.
pub fn fit(x: &SpikeMatrix, bank: FilterBank, config: &FitConfig) -> Result<FitResult> {
    fit_with_observer(x, bank, config, |_, _| {})
}

/// Like [`fit`], calling `observer(step, loss)` after every step.
pub fn fit_with_observer<F>(
    x: &SpikeMatrix,
    mut bank: FilterBank,
    config: &FitConfig,
    mut observer: F,
) -> Result<FitResult>
where
    F: FnMut(usize, &LossBreakdown),
{
    config.validate()?;
    check_shapes(&bank, x)?;
    let adam = Adam::new(config.lrate);
    let mut state = AdamState::new(bank.params().len());
    let mut history = Vec::with_capacity(config.n_steps);
    let mut steps_run = 0;
    while steps_run < config.n_steps {
        if let Some(stop) = &config.early_stop {
            if steps_run > 0 && early_stop_met(stop, &responses(&bank, x)?, bank.width()) {
                break;
            }
        }
        let (breakdown, grads) = gradient(&bank, x, config)?;
        adam.step(bank.params_mut(), &grads, &mut state)?;
        steps_run += 1;
        observer(steps_run, &breakdown);
        history.push(breakdown);
    }
    let traces = responses(&bank, x)?
        .into_iter()
        .enumerate()
        .map(|(filter_index, values)| ResponseTrace { filter_index, values })
        .collect();
    Ok(FitResult {
        bank,
        traces,
        loss_history: history,
        steps_run,
    })
}

/// Write traces as CSV: one column per filter, one row per bin, no header.
pub fn write_traces_csv<W: Write>(traces: &[Vec<f64>], mut w: W) -> Result<()> {
    let t_len = traces.first().map_or(0, |t| t.len());
    let mut line = String::new();
    for t in 0..t_len {
        line.clear();
        for (k, tr) in traces.iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            line.push_str(&format!("{}", tr[t]));
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn save_traces_csv(traces: &[Vec<f64>], path: &Path) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_traces_csv(traces, f)
}

/// Inverse of [`write_traces_csv`]; returns one vector per column.
pub fn parse_traces_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for (i, l) in text.lines().enumerate() {
        let l = l.trim();
        if l.is_empty() {
            continue;
        }
        let vals: Vec<f64> = l
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(i + 1, format!("bad trace value: {e}")))?;
        if cols.is_empty() {
            cols = vec![Vec::new(); vals.len()];
        } else if vals.len() != cols.len() {
            return Err(Error::parse(
                i + 1,
                format!("expected {} columns, found {}", cols.len(), vals.len()),
            ));
        }
        for (c, v) in cols.iter_mut().zip(vals) {
            c.push(v);
        }
    }
    Ok(cols)
}

pub fn load_traces_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    parse_traces_csv(&std::fs::read_to_string(path)?)
}
