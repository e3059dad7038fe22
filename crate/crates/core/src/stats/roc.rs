//! ROC curve of a response trace against occurrence centers.
//!
//! For a threshold `h`, an occurrence counts as detected when any bin within
//! `margin` of its center has a value `>= h` (true positive rate), and every
//! bin farther than `margin` from all centers is a negative bin (false
//! positive rate = fraction of negative bins `>= h`). Thresholds sweep the
//! distinct trace values from the top; the curve starts at `(0, 0)` and ends
//! at `(1, 1)`. Area by the trapezoid rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

pub fn roc_auc(trace: &[f64], centers: &[usize], margin: usize) -> Result<RocCurve> {
    if centers.is_empty() {
        return Err(Error::invalid("ROC needs at least one occurrence"));
    }
    let n = trace.len();
    if n == 0 {
        return Err(Error::invalid("empty trace"));
    }
    // Coverage of the margin windows via a difference array.
    let mut cover = vec![0i64; n + 1];
    let mut best_in_window = Vec::with_capacity(centers.len());
    for &c in centers {
        let lo = c.saturating_sub(margin).min(n);
        let hi = (c + margin + 1).min(n);
        if lo < hi {
            cover[lo] += 1;
            cover[hi] -= 1;
            best_in_window.push(trace[lo..hi].iter().copied().fold(f64::NEG_INFINITY, f64::max));
        } else {
            best_in_window.push(f64::NEG_INFINITY);
        }
    }
    let mut negatives = Vec::new();
    let mut run = 0i64;
    for (t, &v) in trace.iter().enumerate() {
        run += cover[t];
        if run == 0 {
            negatives.push(v);
        }
    }
    let desc = |a: &f64, b: &f64| b.total_cmp(a);
    negatives.sort_by(desc);
    best_in_window.sort_by(desc);
    let mut thresholds = trace.to_vec();
    thresholds.sort_by(desc);
    thresholds.dedup();

    let n_occ = centers.len() as f64;
    let n_neg = negatives.len();
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut i_pos, mut i_neg) = (0, 0);
    for &h in &thresholds {
        while i_pos < best_in_window.len() && best_in_window[i_pos] >= h {
            i_pos += 1;
        }
        while i_neg < n_neg && negatives[i_neg] >= h {
            i_neg += 1;
        }
        points.push(RocPoint {
            threshold: h,
            fpr: if n_neg == 0 { 0.0 } else { i_neg as f64 / n_neg as f64 },
            tpr: i_pos as f64 / n_occ,
        });
    }
    let last = *points.last().expect("non-empty");
    if last.fpr < 1.0 || last.tpr < 1.0 {
        points.push(RocPoint {
            threshold: f64::NEG_INFINITY,
            fpr: 1.0,
            tpr: 1.0,
        });
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum();
    Ok(RocCurve { points, auc })
}
