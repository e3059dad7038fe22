//! Peak extraction from response traces.

use serde::{Deserialize, Serialize};

/// A significant peak of one response trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bin: usize,
    pub value: f64,
}

/// Local maxima with value `>= alpha`, accepted greedily from the highest down;
/// a candidate closer than `window` bins to an accepted peak is dropped.
/// Output is sorted by bin.
pub fn extract_detections(trace: &[f64], alpha: f64, window: usize) -> Vec<Detection> {
    let window = window.max(1);
    let n = trace.len();
    let mut candidates: Vec<Detection> = (0..n)
        .filter(|&t| {
            let v = trace[t];
            v >= alpha && (t == 0 || v >= trace[t - 1]) && (t + 1 == n || v >= trace[t + 1])
        })
        .map(|t| Detection {
            bin: t,
            value: trace[t],
        })
        .collect();
    candidates.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.bin.cmp(&b.bin)));

    // Accepted bins, kept sorted for the neighbour lookup.
    let mut taken: Vec<usize> = Vec::new();
    let mut accepted = Vec::new();
    for c in candidates {
        let pos = taken.partition_point(|&b| b < c.bin);
        let left_ok = pos == 0 || c.bin - taken[pos - 1] >= window;
        let right_ok = pos == taken.len() || taken[pos] - c.bin >= window;
        if left_ok && right_ok {
            taken.insert(pos, c.bin);
            accepted.push(c);
        }
    }
    accepted.sort_by_key(|d| d.bin);
    accepted
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bump(t_len: usize, center: usize, height: f64, half: usize) -> Vec<f64> {
        (0..t_len)
            .map(|t| {
                let d = t.abs_diff(center);
                if d <= half {
                    height * (1.0 - d as f64 / (half as f64 + 1.0))
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Direct statement of the greedy rule: repeatedly take the highest
    /// remaining local maximum not within `window` of anything taken.
    fn greedy_brute(trace: &[f64], alpha: f64, window: usize) -> Vec<usize> {
        let n = trace.len();
        let is_max = |t: usize| {
            (t == 0 || trace[t] >= trace[t - 1]) && (t + 1 == n || trace[t] >= trace[t + 1])
        };
        let mut taken: Vec<usize> = Vec::new();
        let mut remaining: Vec<usize> = (0..n).filter(|&t| is_max(t) && trace[t] >= alpha).collect();
        while !remaining.is_empty() {
            let best = *remaining
                .iter()
                .max_by(|&&a, &&b| trace[a].total_cmp(&trace[b]).then(b.cmp(&a)))
                .unwrap();
            taken.push(best);
            remaining.retain(|&t| t.abs_diff(best) >= window);
        }
        taken.sort();
        taken
    }

    #[test]
    fn below_alpha_is_empty() {
        assert!(extract_detections(&bump(1000, 500, 1.0, 20), 1.5, 100).is_empty());
    }

    #[test]
    fn single_bump() {
        let d = extract_detections(&bump(1000, 500, 2.0, 30), 1.0, 100);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].bin, 500);
        assert_eq!(d[0].value, 2.0);
    }

    #[test]
    fn close_bumps_keep_the_higher() {
        let a = bump(1000, 480, 2.0, 15);
        let b = bump(1000, 520, 3.0, 15);
        let trace: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect();
        let d = extract_detections(&trace, 1.0, 100);
        assert_eq!(d.iter().map(|d| d.bin).collect::<Vec<_>>(), greedy_brute(&trace, 1.0, 100));
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].bin, 520);
        // With a narrow window both survive.
        assert_eq!(extract_detections(&trace, 1.0, 10).len(), 2);
    }

    proptest! {
        #[test]
        fn matches_brute_force_and_invariants(
            trace in proptest::collection::vec(0.0f64..1.0, 1..200),
            alpha in 0.0f64..1.0,
            window in 1usize..40,
        ) {
            let d = extract_detections(&trace, alpha, window);
            let bins: Vec<usize> = d.iter().map(|d| d.bin).collect();
            prop_assert_eq!(&bins, &greedy_brute(&trace, alpha, window));
            for w in bins.windows(2) {
                prop_assert!(w[1] - w[0] >= window);
            }
            prop_assert!(d.iter().all(|d| d.value >= alpha));
        }
    }
}
