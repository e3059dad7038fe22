//! Occurrence-level detection scores.
//!
//! Filter `k` is scored against the occurrences of type `k`. A detection
//! matches an occurrence when it lies within `margin` bins of its center; each
//! occurrence and each detection is used at most once. Filters without a
//! corresponding type only produce false positives.
//!
//! Because filters are learned without labels, [`best_assignment`] finds the
//! filter-to-type mapping with the most matches before scoring.

use serde::{Deserialize, Serialize};

use super::peaks::Detection;
use crate::truth::GroundTruth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Match {
    pub filter: usize,
    pub detection_bin: usize,
    /// Index into `GroundTruth::occurrences`.
    pub occurrence: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeScore {
    pub type_index: usize,
    pub occurrences: usize,
    pub matched: usize,
    pub tp_rate: f64,
    /// Detections of this type's filter that match nothing.
    pub false_positives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub detections: Vec<Vec<Detection>>,
    pub matches: Vec<Match>,
    pub per_type: Vec<TypeScore>,
    /// Matched occurrences over all occurrences.
    pub tp_rate: f64,
    pub fn_rate: f64,
    /// Unmatched detections over all detections (0 without detections).
    pub fp_rate: f64,
    pub n_detections: usize,
    pub n_false_positives: usize,
    /// Detections per filter that match nothing.
    pub false_positives_per_filter: Vec<usize>,
    pub margin: usize,
}

/// Greedy one-to-one matching of one filter's detections to the occurrences of
/// one type, closest pairs first.
fn match_filter(
    detections: &[Detection],
    truth: &GroundTruth,
    type_index: usize,
    margin: usize,
) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
    for (di, d) in detections.iter().enumerate() {
        for (oi, o) in truth.occurrences.iter().enumerate() {
            if o.type_index != type_index {
                continue;
            }
            let dist = d.bin.abs_diff(o.center_bin);
            if dist <= margin {
                pairs.push((dist, di, oi));
            }
        }
    }
    pairs.sort_unstable();
    let mut det_used = vec![false; detections.len()];
    let mut occ_used = vec![false; truth.occurrences.len()];
    let mut out = Vec::new();
    for (_, di, oi) in pairs {
        if !det_used[di] && !occ_used[oi] {
            det_used[di] = true;
            occ_used[oi] = true;
            out.push((di, oi));
        }
    }
    out
}

pub fn score(detections: &[Vec<Detection>], truth: &GroundTruth, margin: usize) -> DetectionReport {
    let n_types = truth.n_types().max(
        truth
            .occurrences
            .iter()
            .map(|o| o.type_index + 1)
            .max()
            .unwrap_or(0),
    );
    let mut matches = Vec::new();
    let mut fp_per_filter = Vec::with_capacity(detections.len());
    let mut per_type: Vec<TypeScore> = (0..n_types)
        .map(|k| TypeScore {
            type_index: k,
            occurrences: truth.count_of(k),
            matched: 0,
            tp_rate: 0.0,
            false_positives: 0,
        })
        .collect();
    for (k, dets) in detections.iter().enumerate() {
        let m = if k < n_types {
            match_filter(dets, truth, k, margin)
        } else {
            Vec::new()
        };
        let fps = dets.len() - m.len();
        fp_per_filter.push(fps);
        if let Some(ts) = per_type.get_mut(k) {
            ts.matched = m.len();
            ts.false_positives = fps;
        }
        matches.extend(m.into_iter().map(|(di, oi)| Match {
            filter: k,
            detection_bin: dets[di].bin,
            occurrence: oi,
        }));
    }
    for ts in per_type.iter_mut() {
        ts.tp_rate = if ts.occurrences == 0 {
            0.0
        } else {
            ts.matched as f64 / ts.occurrences as f64
        };
    }
    let total_occ = truth.occurrences.len();
    let tp_rate = if total_occ == 0 {
        0.0
    } else {
        matches.len() as f64 / total_occ as f64
    };
    let n_detections: usize = detections.iter().map(|d| d.len()).sum();
    let n_false_positives = n_detections - matches.len();
    DetectionReport {
        detections: detections.to_vec(),
        matches,
        per_type,
        tp_rate,
        fn_rate: 1.0 - tp_rate,
        fp_rate: if n_detections == 0 {
            0.0
        } else {
            n_false_positives as f64 / n_detections as f64
        },
        n_detections,
        n_false_positives,
        false_positives_per_filter: fp_per_filter,
        margin,
    }
}

/// Filter-to-type mapping (`result[filter] = Some(type)`) maximizing the
/// number of matched occurrences. Exhaustive for up to 8 filters; greedy on
/// the match matrix beyond that.
pub fn best_assignment(
    detections: &[Vec<Detection>],
    truth: &GroundTruth,
    margin: usize,
) -> Vec<Option<usize>> {
    let n_filters = detections.len();
    let n_types = truth.n_types();
    let gain: Vec<Vec<usize>> = (0..n_filters)
        .map(|f| {
            (0..n_types)
                .map(|k| match_filter(&detections[f], truth, k, margin).len())
                .collect()
        })
        .collect();

    if n_filters <= 8 {
        let mut best = (0usize, vec![None; n_filters]);
        let mut current = vec![None; n_filters];
        let mut used = vec![false; n_types];
        search(0, &gain, &mut current, &mut used, 0, &mut best);
        best.1
    } else {
        let mut result = vec![None; n_filters];
        let mut used = vec![false; n_types];
        let mut cells: Vec<(usize, usize, usize)> = (0..n_filters)
            .flat_map(|f| (0..n_types).map(move |k| (f, k)))
            .map(|(f, k)| (gain[f][k], f, k))
            .collect();
        cells.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        for (_, f, k) in cells {
            if result[f].is_none() && !used[k] {
                result[f] = Some(k);
                used[k] = true;
            }
        }
        result
    }
}

fn search(
    f: usize,
    gain: &[Vec<usize>],
    current: &mut Vec<Option<usize>>,
    used: &mut Vec<bool>,
    acc: usize,
    best: &mut (usize, Vec<Option<usize>>),
) {
    if f == gain.len() {
        // Strictly better only, so the first optimum in search order wins.
        if acc > best.0 {
            *best = (acc, current.clone());
        }
        return;
    }
    for k in 0..used.len() {
        if !used[k] {
            used[k] = true;
            current[f] = Some(k);
            search(f + 1, gain, current, used, acc + gain[f][k], best);
            current[f] = None;
            used[k] = false;
        }
    }
    search(f + 1, gain, current, used, acc, best);
}

/// Reorder per-filter detections so that position `k` holds the filter
/// assigned to type `k`; unassigned filters follow in their original order.
/// Returns the reordered lists and the original filter index of each slot.
pub fn apply_assignment(
    detections: &[Vec<Detection>],
    assignment: &[Option<usize>],
    n_types: usize,
) -> (Vec<Vec<Detection>>, Vec<Option<usize>>) {
    let mut slots: Vec<Option<usize>> = vec![None; n_types];
    for (f, a) in assignment.iter().enumerate() {
        if let Some(k) = a {
            slots[*k] = Some(f);
        }
    }
    let mut lists: Vec<Vec<Detection>> = slots
        .iter()
        .map(|s| s.map(|f| detections[f].clone()).unwrap_or_default())
        .collect();
    for (f, a) in assignment.iter().enumerate() {
        if a.is_none() {
            lists.push(detections[f].clone());
            slots.push(Some(f));
        }
    }
    (lists, slots)
}
