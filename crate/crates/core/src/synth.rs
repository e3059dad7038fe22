//! Synthetic benchmark data: background activity with embedded sequences, and
//! a place-cell population traversing a T-maze.

use log::warn;
use rand::Rng;
use rand_distr::{Distribution, Geometric, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::spikes::{Permutation, SpikeMatrix};
use crate::truth::{Direction, GroundTruth, Occurrence};

/// One sequence type and how it recurs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpec {
    /// Participating neurons in forward firing order.
    pub member_neurons: Vec<usize>,
    pub dropout_p: f64,
    /// Standard deviation of per-spike Gaussian timing noise, in bins.
    pub jitter_sd: f64,
    /// Bins between consecutive occurrence centers.
    pub isi: usize,
    /// Bins over which the members fire once, before warping.
    pub span: f64,
    /// Center of the first occurrence; defaults to `isi / 2`.
    #[serde(default)]
    pub offset: Option<usize>,
    /// Number of occurrences; defaults to `floor(T / isi)`.
    #[serde(default)]
    pub n_occurrences: Option<usize>,
    /// Per-occurrence direction, cycled; empty means all forward.
    #[serde(default)]
    pub direction_schedule: Vec<Direction>,
    /// Each occurrence draws its warp factor uniformly from this multiset;
    /// empty means no warping.
    #[serde(default)]
    pub warp_factors: Vec<f64>,
}

impl SequenceSpec {
    pub fn new(member_neurons: Vec<usize>, dropout_p: f64, jitter_sd: f64, isi: usize, span: f64) -> Self {
        SequenceSpec {
            member_neurons,
            dropout_p,
            jitter_sd,
            isi,
            span,
            offset: None,
            n_occurrences: None,
            direction_schedule: Vec::new(),
            warp_factors: Vec::new(),
        }
    }

    pub fn n_members(&self) -> usize {
        self.member_neurons.len()
    }

    fn validate(&self, n_neurons: usize) -> Result<()> {
        let mut seen = vec![false; n_neurons];
        for &m in &self.member_neurons {
            if m >= n_neurons {
                return Err(Error::OutOfRange(format!(
                    "member neuron {m} not below N={n_neurons}"
                )));
            }
            if seen[m] {
                return Err(Error::invalid(format!("member neuron {m} listed twice")));
            }
            seen[m] = true;
        }
        if !(0.0..=1.0).contains(&self.dropout_p) {
            return Err(Error::invalid(format!("dropout {} outside [0, 1]", self.dropout_p)));
        }
        if self.isi == 0 {
            return Err(Error::invalid("isi must be positive"));
        }
        if !(self.jitter_sd >= 0.0) || !(self.span >= 0.0) {
            return Err(Error::invalid("jitter and span must be non-negative"));
        }
        if self.warp_factors.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::invalid("warp factors must be positive"));
        }
        Ok(())
    }

    /// Occurrence centers for a raster of `n_bins`.
    pub fn centers(&self, n_bins: usize) -> Vec<usize> {
        let count = self.n_occurrences.unwrap_or(n_bins / self.isi);
        let offset = self.offset.unwrap_or(self.isi / 2);
        (0..count)
            .map(|i| offset + i * self.isi)
            .filter(|&c| c < n_bins)
            .collect()
    }

    /// Firing bin (before jitter and rounding) of the member at `position`.
    pub fn nominal_time(&self, center: f64, warp: f64, position: usize) -> f64 {
        let n = self.n_members();
        let frac = if n > 1 {
            position as f64 / (n - 1) as f64
        } else {
            0.5
        };
        center - warp * self.span / 2.0 + warp * self.span * frac
    }
}

/// Embed every spec into `background`; sequence spikes are OR-ed with it.
/// Type `k` of the ground truth is `specs[k]`.
pub fn embed_sequences(
    background: &SpikeMatrix,
    specs: &[SequenceSpec],
    seed: u64,
) -> Result<(SpikeMatrix, GroundTruth)> {
    let n_bins = background.n_bins();
    for s in specs {
        s.validate(background.n_neurons())?;
        let max_warp = s.warp_factors.iter().copied().fold(1.0, f64::max);
        if s.span * max_warp >= s.isi as f64 {
            warn!(
                "sequence span {} (max warp {max_warp}) reaches the interval {}; occurrences overlap",
                s.span, s.isi
            );
        }
    }
    let mut rng = rng::substream(seed, rng::STREAM_EMBED);
    let mut added = Vec::new();
    let mut occurrences = Vec::new();
    for (k, spec) in specs.iter().enumerate() {
        let normal = Normal::new(0.0, spec.jitter_sd.max(0.0)).expect("valid sd");
        for (i, center) in spec.centers(n_bins).into_iter().enumerate() {
            let direction = if spec.direction_schedule.is_empty() {
                Direction::Forward
            } else {
                spec.direction_schedule[i % spec.direction_schedule.len()]
            };
            let warp = if spec.warp_factors.is_empty() {
                1.0
            } else {
                spec.warp_factors[rng.random_range(0..spec.warp_factors.len())]
            };
            let n = spec.n_members();
            for (i_member, &neuron) in spec.member_neurons.iter().enumerate() {
                let position = match direction {
                    Direction::Forward => i_member,
                    Direction::Reverse => n - 1 - i_member,
                };
                let dropped = rng.random::<f64>() < spec.dropout_p;
                let eps = if spec.jitter_sd > 0.0 { normal.sample(&mut rng) } else { 0.0 };
                if dropped {
                    continue;
                }
                let t = (spec.nominal_time(center as f64, warp, position) + eps).round();
                if t >= 0.0 && t < n_bins as f64 {
                    added.push((neuron, t as usize));
                }
            }
            occurrences.push(Occurrence {
                type_index: k,
                center_bin: center,
                direction,
                warp,
            });
        }
    }
    occurrences.sort_by_key(|o| (o.center_bin, o.type_index));
    let seq = SpikeMatrix::new(background.n_neurons(), n_bins, added)?;
    let x = background.union(&seq)?;
    Ok((
        x,
        GroundTruth {
            occurrences,
            members_per_type: specs.iter().map(|s| s.member_neurons.clone()).collect(),
        },
    ))
}

/// Random row and column permutation of `template`.
pub fn generate_background(template: &SpikeMatrix, seed: u64) -> SpikeMatrix {
    let mut rng = rng::substream(seed, rng::STREAM_BACKGROUND);
    let rows = Permutation::random(template.n_neurons(), &mut rng);
    let cols = Permutation::random(template.n_bins(), &mut rng);
    template
        .permute(&rows, &cols)
        .expect("permutations sized to the template")
}

/// Independent Bernoulli(`density`) cells.
pub fn bernoulli_matrix<R: Rng + ?Sized>(n_neurons: usize, n_bins: usize, density: f64, rng: &mut R) -> Result<SpikeMatrix> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::invalid(format!("density {density} outside [0, 1]")));
    }
    let cells = (n_neurons * n_bins) as u64;
    let mut spikes = Vec::new();
    if density > 0.0 && cells > 0 {
        // Gaps between successive 1-cells are geometric.
        let geo = Geometric::new(density).expect("valid probability");
        let mut idx = geo.sample(rng);
        while idx < cells {
            let i = idx as usize;
            spikes.push((i / n_bins, i % n_bins));
            idx = idx.saturating_add(1).saturating_add(geo.sample(rng));
        }
    }
    SpikeMatrix::new(n_neurons, n_bins, spikes)
}

/// Bernoulli template of the given density, then permuted. Matches how
/// backgrounds are derived from a real recording when none is available.
pub fn bernoulli_background(n_neurons: usize, n_bins: usize, density: f64, seed: u64) -> Result<SpikeMatrix> {
    let mut rng = rng::substream(seed, rng::STREAM_BACKGROUND + 100);
    let template = bernoulli_matrix(n_neurons, n_bins, density, &mut rng)?;
    Ok(generate_background(&template, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Left,
    Right,
}

/// Place cells tiling a square enclosure, driven by an animal running a T-maze.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlaceCellSpec {
    pub grid_side: usize,
    pub enclosure_cm: f64,
    pub field_sd_cm: f64,
    pub n_bins: usize,
    pub traversal_period: usize,
    /// Arm chosen on each traversal, cycled; empty means a random choice.
    pub arm_schedule: Vec<Arm>,
    /// Bernoulli background density added after sampling.
    pub background_density: f64,
    /// Per-spike timing jitter, in bins.
    pub jitter_sd: f64,
}

impl Default for PlaceCellSpec {
    fn default() -> Self {
        PlaceCellSpec {
            grid_side: 13,
            enclosure_cm: 130.0,
            field_sd_cm: 10.0,
            n_bins: 6000,
            traversal_period: 300,
            arm_schedule: Vec::new(),
            background_density: 0.003,
            jitter_sd: 2.0,
        }
    }
}

impl PlaceCellSpec {
    pub fn n_cells(&self) -> usize {
        self.grid_side * self.grid_side
    }

    fn spacing(&self) -> f64 {
        self.enclosure_cm / self.grid_side as f64
    }

    /// `(x, y)` of the field center of neuron `n`, `y` measured up from the
    /// bottom wall. Neuron index is the row-major position in the grid, with
    /// grid row 0 at the top.
    pub fn field_center(&self, n: usize) -> (f64, f64) {
        let (row, col) = (n / self.grid_side, n % self.grid_side);
        let s = self.spacing();
        let x = s / 2.0 + col as f64 * s;
        let y = self.enclosure_cm - s / 2.0 - row as f64 * s;
        (x, y)
    }

    /// Grid `(row, col)` whose field is centered at `(x, y)`.
    pub fn grid_cell(&self, x: f64, y: f64) -> (usize, usize) {
        let s = self.spacing();
        let row = ((self.enclosure_cm - s / 2.0 - y) / s).round().max(0.0) as usize;
        let col = ((x - s / 2.0) / s).round().max(0.0) as usize;
        (row.min(self.grid_side - 1), col.min(self.grid_side - 1))
    }

    /// Animal position at phase `f` in `[0, 1)` of a traversal: up the vertical
    /// arm from the bottom to the junction, then along the horizontal arm.
    pub fn position(&self, f: f64, arm: Arm) -> (f64, f64) {
        let s = self.spacing();
        let mid = self.enclosure_cm / 2.0;
        let (bottom, top) = (s / 2.0, self.enclosure_cm - s / 2.0);
        let vertical = top - bottom;
        let horizontal = mid - s / 2.0;
        let d = f.clamp(0.0, 1.0) * (vertical + horizontal);
        if d <= vertical {
            (mid, bottom + d)
        } else {
            let h = d - vertical;
            match arm {
                Arm::Left => (mid - h, top),
                Arm::Right => (mid + h, top),
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if self.grid_side == 0 || !(self.field_sd_cm > 0.0) || !(self.enclosure_cm > 0.0) {
            return Err(Error::invalid("place-cell grid and field width must be positive"));
        }
        if self.traversal_period == 0 {
            return Err(Error::invalid("traversal period must be positive"));
        }
        Ok(())
    }

    /// Cells passed along one arm, in visiting order.
    pub fn path_members(&self, arm: Arm) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        let steps = 1000;
        for i in 0..steps {
            let (x, y) = self.position(i as f64 / steps as f64, arm);
            let (r, c) = self.grid_cell(x, y);
            let n = r * self.grid_side + c;
            if !out.contains(&n) {
                out.push(n);
            }
        }
        out
    }
}

/// Place-cell raster without noise: exactly one spike per bin.
pub fn place_cell_spikes(spec: &PlaceCellSpec, seed: u64) -> Result<(SpikeMatrix, GroundTruth)> {
    spec.validate()?;
    let mut rng = rng::substream(seed, rng::STREAM_PLACE);
    let n_cells = spec.n_cells();
    let centers: Vec<(f64, f64)> = (0..n_cells).map(|n| spec.field_center(n)).collect();
    let two_var = 2.0 * spec.field_sd_cm.powi(2);
    let n_trav = spec.n_bins.div_ceil(spec.traversal_period);
    let arms: Vec<Arm> = (0..n_trav)
        .map(|i| {
            if spec.arm_schedule.is_empty() {
                if rng.random::<bool>() {
                    Arm::Left
                } else {
                    Arm::Right
                }
            } else {
                spec.arm_schedule[i % spec.arm_schedule.len()]
            }
        })
        .collect();
    let mut weights = vec![0.0; n_cells];
    let mut spikes = Vec::with_capacity(spec.n_bins);
    for t in 0..spec.n_bins {
        let trav = t / spec.traversal_period;
        let f = (t % spec.traversal_period) as f64 / spec.traversal_period as f64;
        let (px, py) = spec.position(f, arms[trav]);
        let mut total = 0.0;
        for (w, &(cx, cy)) in weights.iter_mut().zip(&centers) {
            *w = (-((cx - px).powi(2) + (cy - py).powi(2)) / two_var).exp();
            total += *w;
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = n_cells - 1;
        for (n, &w) in weights.iter().enumerate() {
            if u < w {
                pick = n;
                break;
            }
            u -= w;
        }
        spikes.push((pick, t));
    }
    let members = vec![spec.path_members(Arm::Left), spec.path_members(Arm::Right)];
    let occurrences = (0..spec.n_bins / spec.traversal_period)
        .map(|i| Occurrence {
            type_index: match arms[i] {
                Arm::Left => 0,
                Arm::Right => 1,
            },
            center_bin: i * spec.traversal_period + spec.traversal_period / 2,
            direction: Direction::Forward,
            warp: 1.0,
        })
        .collect();
    Ok((
        SpikeMatrix::new(n_cells, spec.n_bins, spikes)?,
        GroundTruth {
            occurrences,
            members_per_type: members,
        },
    ))
}

/// Place-cell dataset: sampled spikes, jittered, over Bernoulli background.
/// Type 0 is the left arm, type 1 the right arm.
pub fn generate_place_cell_dataset(spec: &PlaceCellSpec, seed: u64) -> Result<(SpikeMatrix, GroundTruth)> {
    let (clean, truth) = place_cell_spikes(spec, seed)?;
    let mut rng = rng::substream(seed, rng::STREAM_PLACE + 100);
    let jittered = if spec.jitter_sd > 0.0 {
        let normal = Normal::new(0.0, spec.jitter_sd).expect("valid sd");
        let moved: Vec<(usize, usize)> = clean
            .iter()
            .filter_map(|(n, t)| {
                let nt = (t as f64 + normal.sample(&mut rng)).round();
                (nt >= 0.0 && nt < spec.n_bins as f64).then_some((n, nt as usize))
            })
            .collect();
        SpikeMatrix::new(clean.n_neurons(), spec.n_bins, moved)?
    } else {
        clean
    };
    let bg = bernoulli_matrix(spec.n_cells(), spec.n_bins, spec.background_density, &mut rng)?;
    Ok((jittered.union(&bg)?, truth))
}
