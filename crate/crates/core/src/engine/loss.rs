//! Loss terms on response traces and their gradients with respect to the trace.
//!
//! For `K` traces `x_k` of length `T`:
//!
//! ```text
//! L = sum_k ( -Var(x_k) + beta_tv * TV(x_k) ) + beta_xcor * sum_{k<l} XC(x_k, x_l; j)
//! Var(x)      = (1/T) sum_t (x_t - mean)^2
//! TV(x)       = (1/T) sum_{t<T-1} (x_t - x_{t+1})^2
//! XC(a, b; j) = (1/T) sum_{|tau|<=j} sum_t a_t b_{t+tau}
//! ```

use serde::{Deserialize, Serialize};

/// Population variance.
pub fn variance(trace: &[f64]) -> f64 {
    let t = trace.len() as f64;
    let mean = trace.iter().sum::<f64>() / t;
    trace.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t
}

/// Mean squared difference of adjacent bins (normalized by `T`, not `T - 1`).
pub fn total_variation(trace: &[f64]) -> f64 {
    let t = trace.len() as f64;
    trace.windows(2).map(|w| (w[0] - w[1]).powi(2)).sum::<f64>() / t
}

/// Lag-summed raw cross-correlation over `|tau| <= j`, divided by `T`.
pub fn cross_correlation(a: &[f64], b: &[f64], j: usize) -> f64 {
    assert_eq!(a.len(), b.len(), "cross-correlation of unequal lengths");
    let wb = window_sums(b, j);
    a.iter().zip(&wb).map(|(x, w)| x * w).sum::<f64>() / a.len() as f64
}

/// `out[t] = sum of x[s] for |s - t| <= j`, zero outside the trace.
pub fn window_sums(x: &[f64], j: usize) -> Vec<f64> {
    let n = x.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &v in x {
        acc += v;
        prefix.push(acc);
    }
    (0..n)
        .map(|t| {
            let lo = t.saturating_sub(j);
            let hi = (t + j + 1).min(n);
            prefix[hi] - prefix[lo]
        })
        .collect()
}

/// Adds `scale * dVar/dx` to `out`.
pub fn add_variance_grad(trace: &[f64], scale: f64, out: &mut [f64]) {
    let t = trace.len() as f64;
    let mean = trace.iter().sum::<f64>() / t;
    let c = 2.0 * scale / t;
    for (o, v) in out.iter_mut().zip(trace) {
        *o += c * (v - mean);
    }
}

/// Adds `scale * dTV/dx` to `out`.
pub fn add_tv_grad(trace: &[f64], scale: f64, out: &mut [f64]) {
    let c = 2.0 * scale / trace.len() as f64;
    for (t, w) in trace.windows(2).enumerate() {
        let d = c * (w[0] - w[1]);
        out[t] += d;
        out[t + 1] -= d;
    }
}

/// Per-step loss values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub per_filter_variance: Vec<f64>,
    pub tv: Vec<f64>,
    /// Sum over filter pairs of the cross-correlation term (unweighted).
    pub xcorr: f64,
    pub beta_tv: f64,
    pub beta_xcor: f64,
    pub j: usize,
}

impl LossBreakdown {
    /// Evaluate every term on a set of traces.
    pub fn evaluate(traces: &[Vec<f64>], beta_tv: f64, beta_xcor: f64, j: usize) -> Self {
        Self::with_windows(traces, beta_tv, beta_xcor, j, Windows::of(traces, j).as_ref())
    }

    fn with_windows(traces: &[Vec<f64>], beta_tv: f64, beta_xcor: f64, j: usize, windows: Option<&Windows>) -> Self {
        let per_filter_variance: Vec<f64> = traces.iter().map(|x| variance(x)).collect();
        let tv: Vec<f64> = traces.iter().map(|x| total_variation(x)).collect();
        let beta_xcor = if traces.len() < 2 { 0.0 } else { beta_xcor };
        let xcorr = windows.map_or(0.0, |w| w.pair_sum(traces));
        let total = per_filter_variance
            .iter()
            .zip(&tv)
            .map(|(v, t)| -v + beta_tv * t)
            .sum::<f64>()
            + beta_xcor * xcorr;
        LossBreakdown {
            total,
            per_filter_variance,
            tv,
            xcorr,
            beta_tv,
            beta_xcor,
            j,
        }
    }
}

/// Window sums of every trace and their total `S`.
struct Windows {
    each: Vec<Vec<f64>>,
    total: Vec<f64>,
}

impl Windows {
    /// `None` for fewer than two traces.
    fn of(traces: &[Vec<f64>], j: usize) -> Option<Windows> {
        if traces.len() < 2 {
            return None;
        }
        let each: Vec<Vec<f64>> = traces.iter().map(|x| window_sums(x, j)).collect();
        let mut total = vec![0.0; traces[0].len()];
        for w in &each {
            for (t, v) in total.iter_mut().zip(w) {
                *t += v;
            }
        }
        Some(Windows { each, total })
    }

    /// `sum_{k<l} XC(x_k, x_l)`. The pair term is symmetric, so this is half
    /// of `sum_k x_k . (S - W(x_k)) / T`.
    fn pair_sum(&self, traces: &[Vec<f64>]) -> f64 {
        let mut acc = 0.0;
        for (x, w) in traces.iter().zip(&self.each) {
            acc += x.iter().zip(&self.total).zip(w).map(|((a, s), b)| a * (s - b)).sum::<f64>();
        }
        acc / (2.0 * traces[0].len() as f64)
    }

    fn add_grad(&self, k: usize, scale: f64, out: &mut [f64]) {
        for ((g, s), w) in out.iter_mut().zip(&self.total).zip(&self.each[k]) {
            *g += scale * (s - w);
        }
    }
}

fn gradients_with(traces: &[Vec<f64>], beta_tv: f64, beta_xcor: f64, windows: Option<&Windows>) -> Vec<Vec<f64>> {
    traces
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let mut g = vec![0.0; x.len()];
            add_variance_grad(x, -1.0, &mut g);
            if beta_tv != 0.0 {
                add_tv_grad(x, beta_tv, &mut g);
            }
            if let Some(w) = windows.filter(|_| beta_xcor != 0.0) {
                w.add_grad(k, beta_xcor / x.len() as f64, &mut g);
            }
            g
        })
        .collect()
}

/// `dL/dx_k` for every trace.
pub fn trace_gradients(traces: &[Vec<f64>], beta_tv: f64, beta_xcor: f64, j: usize) -> Vec<Vec<f64>> {
    let windows = if beta_xcor != 0.0 { Windows::of(traces, j) } else { None };
    gradients_with(traces, beta_tv, beta_xcor, windows.as_ref())
}

/// [`LossBreakdown::evaluate`] and [`trace_gradients`] sharing one pass of
/// window sums.
pub fn loss_and_gradients(
    traces: &[Vec<f64>],
    beta_tv: f64,
    beta_xcor: f64,
    j: usize,
) -> (LossBreakdown, Vec<Vec<f64>>) {
    let windows = Windows::of(traces, j);
    (
        LossBreakdown::with_windows(traces, beta_tv, beta_xcor, j, windows.as_ref()),
        gradients_with(traces, beta_tv, beta_xcor, windows.as_ref()),
    )
}
