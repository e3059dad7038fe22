//! Named dataset recipes. A preset expands into one or more datasets, each a
//! raster plus ground truth.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::spikes::SpikeMatrix;
use crate::synth::{self, Arm, PlaceCellSpec, SequenceSpec};
use crate::truth::{Direction, GroundTruth};

/// Sequence span used when a preset is run without `span`. Sized so that one
/// occurrence plus jitter fits a 100-bin filter.
pub const DEFAULT_SPAN: f64 = 60.0;
pub const DEFAULT_DENSITY: f64 = 0.003;
pub const DEFAULT_NEURONS: usize = 452;
pub const DEFAULT_BINS: usize = 18137;

pub const WARP_FACTORS: [f64; 4] = [0.6, 1.0, 1.8, 2.2];

pub const GRID_DROPOUT: [f64; 3] = [0.2, 0.4, 0.6];
pub const GRID_ISI: [usize; 3] = [400, 600, 800];
pub const GRID_LENGTH: [usize; 3] = [40, 80, 120];
pub const GRID_JITTER: [f64; 3] = [10.0, 20.0, 30.0];

pub const BENCH_NEURONS: [usize; 2] = [76, 152];
pub const BENCH_BINS: [usize; 8] = [4441, 8882, 13323, 17764, 22205, 26646, 100_000, 500_000];
pub const BENCH_DENSITY: [f64; 3] = [0.0015, 0.0031, 0.0038];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    SingleSeq,
    #[serde(rename = "overlap-2seq")]
    Overlap2Seq,
    Bidirectional,
    Timewarp,
    Tmaze,
    BenchGrid,
    DetectionGrid,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::SingleSeq,
        Preset::Overlap2Seq,
        Preset::Bidirectional,
        Preset::Timewarp,
        Preset::Tmaze,
        Preset::BenchGrid,
        Preset::DetectionGrid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::SingleSeq => "single-seq",
            Preset::Overlap2Seq => "overlap-2seq",
            Preset::Bidirectional => "bidirectional",
            Preset::Timewarp => "timewarp",
            Preset::Tmaze => "tmaze",
            Preset::BenchGrid => "bench-grid",
            Preset::DetectionGrid => "detection-grid",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
                Error::invalid(format!("unknown preset '{s}' (expected one of {})", names.join(", ")))
            })
    }
}

/// Overrides for preset parameters; `None` keeps the preset's own value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PresetOptions {
    pub n_neurons: Option<usize>,
    pub n_bins: Option<usize>,
    pub density: Option<f64>,
    pub span: Option<f64>,
    pub n_members: Option<usize>,
    pub isi: Option<usize>,
    pub jitter_sd: Option<f64>,
    pub dropout_p: Option<f64>,
}

impl PresetOptions {
    fn neurons(&self) -> usize {
        self.n_neurons.unwrap_or(DEFAULT_NEURONS)
    }
    fn bins(&self) -> usize {
        self.n_bins.unwrap_or(DEFAULT_BINS)
    }
    fn density(&self) -> f64 {
        self.density.unwrap_or(DEFAULT_DENSITY)
    }
    fn span(&self) -> f64 {
        self.span.unwrap_or(DEFAULT_SPAN)
    }
    fn dropout(&self) -> f64 {
        self.dropout_p.unwrap_or(0.2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub x: SpikeMatrix,
    pub truth: GroundTruth,
    pub specs: Vec<SequenceSpec>,
}

/// `count` distinct neurons out of `n`, in random order.
pub fn pick_members(n: usize, count: usize, seed: u64) -> Result<Vec<usize>> {
    if count > n {
        return Err(Error::invalid(format!("{count} members requested from {n} neurons")));
    }
    let mut r = rng::substream(seed, rng::STREAM_MEMBERS);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut r);
    idx.truncate(count);
    Ok(idx)
}

fn embed(name: String, bg: &SpikeMatrix, specs: Vec<SequenceSpec>, seed: u64) -> Result<Dataset> {
    let (x, truth) = synth::embed_sequences(bg, &specs, seed)?;
    Ok(Dataset { name, x, truth, specs })
}

/// Two types alternating every `isi / 2` bins.
fn alternating(a: SequenceSpec, b: SequenceSpec) -> Vec<SequenceSpec> {
    let isi = a.isi;
    vec![
        SequenceSpec {
            offset: Some(isi / 4),
            ..a
        },
        SequenceSpec {
            offset: Some(isi / 4 + isi / 2),
            ..b
        },
    ]
}

/// Build every dataset of `preset` over Bernoulli backgrounds.
pub fn build(preset: Preset, opts: &PresetOptions, seed: u64) -> Result<Vec<Dataset>> {
    build_with_template(preset, opts, None, seed)
}

/// Like [`build`], permuting `template` for the background when given. The
/// template fixes N and T. Grid and place-cell presets ignore it.
pub fn build_with_template(
    preset: Preset,
    opts: &PresetOptions,
    template: Option<&SpikeMatrix>,
    seed: u64,
) -> Result<Vec<Dataset>> {
    let mut opts = opts.clone();
    if let Some(t) = template {
        opts.n_neurons = Some(t.n_neurons());
        opts.n_bins = Some(t.n_bins());
    }
    let src = Source { opts: &opts, template };
    match preset {
        Preset::SingleSeq => single_seq(&src, seed),
        Preset::Overlap2Seq => overlap(&src, seed),
        Preset::Bidirectional => bidirectional(&src, seed),
        Preset::Timewarp => timewarp(&src, seed),
        Preset::Tmaze => tmaze(&opts, seed),
        Preset::BenchGrid => bench_grid(&opts, seed),
        Preset::DetectionGrid => detection_grid(&src, seed),
    }
}

struct Source<'a> {
    opts: &'a PresetOptions,
    template: Option<&'a SpikeMatrix>,
}

impl Source<'_> {
    fn background(&self, seed: u64) -> Result<SpikeMatrix> {
        match self.template {
            Some(t) => Ok(synth::generate_background(t, seed)),
            None => synth::bernoulli_background(self.opts.neurons(), self.opts.bins(), self.opts.density(), seed),
        }
    }
}

fn single_seq(src: &Source, seed: u64) -> Result<Vec<Dataset>> {
    let opts = src.opts;
    let bg = src.background(seed)?;
    let members = pick_members(opts.neurons(), opts.n_members.unwrap_or(80), seed)?;
    let isis: Vec<usize> = opts.isi.map_or(GRID_ISI.to_vec(), |i| vec![i]);
    let jitters: Vec<f64> = opts.jitter_sd.map_or(GRID_JITTER.to_vec(), |j| vec![j]);
    let mut out = Vec::new();
    for &isi in &isis {
        for &jitter in &jitters {
            let spec = SequenceSpec::new(members.clone(), opts.dropout(), jitter, isi, opts.span());
            let i = out.len() as u64;
            out.push(embed(
                format!("single-seq_isi{isi}_jit{jitter}"),
                &bg,
                vec![spec],
                rng::child_seed(seed, i),
            )?);
        }
    }
    Ok(out)
}

fn overlap(src: &Source, seed: u64) -> Result<Vec<Dataset>> {
    let opts = src.opts;
    let n_members = opts.n_members.unwrap_or(100);
    let shared = n_members / 2;
    let pool = pick_members(opts.neurons(), 2 * n_members - shared, seed)?;
    let a = pool[..n_members].to_vec();
    let mut b = pool[n_members - shared..].to_vec();
    let mut r = rng::substream(seed, rng::STREAM_MEMBERS + 1);
    b.shuffle(&mut r);
    let (isi, jitter) = (opts.isi.unwrap_or(800), opts.jitter_sd.unwrap_or(10.0));
    let specs = alternating(
        SequenceSpec::new(a, opts.dropout(), jitter, isi, opts.span()),
        SequenceSpec::new(b, opts.dropout(), jitter, isi, opts.span()),
    );
    let bg = src.background(seed)?;
    Ok(vec![embed("overlap-2seq".into(), &bg, specs, rng::child_seed(seed, 0))?])
}

fn bidirectional(src: &Source, seed: u64) -> Result<Vec<Dataset>> {
    let opts = src.opts;
    let members = pick_members(opts.neurons(), opts.n_members.unwrap_or(100), seed)?;
    let (isi, jitter) = (opts.isi.unwrap_or(800), opts.jitter_sd.unwrap_or(10.0));
    let fwd = SequenceSpec::new(members.clone(), opts.dropout(), jitter, isi, opts.span());
    let rev = SequenceSpec {
        direction_schedule: vec![Direction::Reverse],
        ..fwd.clone()
    };
    let bg = src.background(seed)?;
    Ok(vec![embed(
        "bidirectional".into(),
        &bg,
        alternating(fwd, rev),
        rng::child_seed(seed, 0),
    )?])
}

fn timewarp(src: &Source, seed: u64) -> Result<Vec<Dataset>> {
    let opts = src.opts;
    let bg = src.background(seed)?;
    let span = opts.span();
    let random = SequenceSpec {
        warp_factors: WARP_FACTORS.to_vec(),
        ..SequenceSpec::new(
            pick_members(opts.neurons(), opts.n_members.unwrap_or(80), seed)?,
            opts.dropout(),
            opts.jitter_sd.unwrap_or(10.0),
            opts.isi.unwrap_or(400),
            span,
        )
    };
    let two_speed = SequenceSpec {
        warp_factors: vec![1.0, 3.0],
        ..SequenceSpec::new(
            pick_members(opts.neurons(), opts.n_members.unwrap_or(160).min(opts.neurons()), seed)?,
            opts.dropout(),
            opts.jitter_sd.unwrap_or(15.0),
            opts.isi.unwrap_or(600).max((3.0 * span).ceil() as usize + 1),
            span,
        )
    };
    Ok(vec![
        embed("timewarp".into(), &bg, vec![random], rng::child_seed(seed, 0))?,
        embed("timewarp_two-speed".into(), &bg, vec![two_speed], rng::child_seed(seed, 1))?,
    ])
}

fn tmaze(opts: &PresetOptions, seed: u64) -> Result<Vec<Dataset>> {
    let mut spec = PlaceCellSpec::default();
    if let Some(t) = opts.n_bins {
        spec.n_bins = t;
    }
    if let Some(s) = opts.density {
        spec.background_density = s;
    }
    if let Some(j) = opts.jitter_sd {
        spec.jitter_sd = j;
    }
    spec.arm_schedule = Vec::<Arm>::new();
    let (x, truth) = synth::generate_place_cell_dataset(&spec, seed)?;
    Ok(vec![Dataset {
        name: "tmaze".into(),
        x,
        truth,
        specs: Vec::new(),
    }])
}

/// Sequences of 40 neurons every 200 bins (dropout 0.2, jitter 10) across a
/// grid of sizes and background densities, plus `K` in 1..=6 interleaved
/// sequence types on the full-size background.
fn bench_grid(opts: &PresetOptions, seed: u64) -> Result<Vec<Dataset>> {
    let span = opts.span();
    let jitter = opts.jitter_sd.unwrap_or(10.0);
    let n_members = opts.n_members.unwrap_or(40);
    let isi = opts.isi.unwrap_or(200);
    let mut out = Vec::new();
    for &n in &BENCH_NEURONS {
        for &t in &BENCH_BINS {
            for &s in &BENCH_DENSITY {
                let i = out.len() as u64;
                let ds = rng::child_seed(seed, i);
                let bg = synth::bernoulli_background(n, t, s, ds)?;
                let spec = SequenceSpec::new(pick_members(n, n_members, ds)?, opts.dropout(), jitter, isi, span);
                out.push(embed(format!("bench_n{n}_t{t}_s{s}"), &bg, vec![spec], ds)?);
            }
        }
    }
    let (n, t) = (opts.neurons(), opts.bins());
    let bg = synth::bernoulli_background(n, t, opts.density(), seed)?;
    for k in 1..=6usize {
        let pool = pick_members(n, k * n_members, rng::child_seed(seed, 1000 + k as u64))?;
        let specs = (0..k)
            .map(|i| SequenceSpec {
                offset: Some(isi / 2 + i * isi),
                ..SequenceSpec::new(
                    pool[i * n_members..(i + 1) * n_members].to_vec(),
                    opts.dropout(),
                    jitter,
                    isi * k,
                    span,
                )
            })
            .collect();
        out.push(embed(format!("bench_k{k}"), &bg, specs, rng::child_seed(seed, 1000 + k as u64))?);
    }
    Ok(out)
}

fn detection_grid(src: &Source, seed: u64) -> Result<Vec<Dataset>> {
    let opts = src.opts;
    let bg = src.background(seed)?;
    let mut out = Vec::new();
    for &dropout in &GRID_DROPOUT {
        for &isi in &GRID_ISI {
            for &length in &GRID_LENGTH {
                for &jitter in &GRID_JITTER {
                    let i = out.len() as u64;
                    let ds = rng::child_seed(seed, i);
                    let spec = SequenceSpec::new(
                        pick_members(opts.neurons(), length, ds)?,
                        dropout,
                        jitter,
                        isi,
                        opts.span(),
                    );
                    out.push(embed(
                        format!("grid_drop{dropout}_isi{isi}_len{length}_jit{jitter}"),
                        &bg,
                        vec![spec],
                        ds,
                    )?);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PresetOptions {
        PresetOptions {
            n_neurons: Some(150),
            n_bins: Some(3000),
            ..Default::default()
        }
    }

    #[test]
    fn names_roundtrip() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
            let json = serde_json::to_string(&p).unwrap();
            assert_eq!(json, format!("\"{}\"", p.name()));
        }
        assert!("single".parse::<Preset>().is_err());
    }

    #[test]
    fn single_seq_has_nine_variants() {
        let sets = build(Preset::SingleSeq, &PresetOptions::default(), 7).unwrap();
        assert_eq!(sets.len(), 9);
        let counts: Vec<usize> = sets.iter().map(|d| d.truth.occurrences.len()).collect();
        assert_eq!(&counts[..], &[45, 45, 45, 30, 30, 30, 22, 22, 22]);
        assert!(sets.iter().all(|d| d.x.n_neurons() == 452 && d.x.n_bins() == 18137));
        assert!(sets.iter().all(|d| d.truth.members_per_type[0].len() == 80));
    }

    #[test]
    fn overlap_shares_half() {
        let d = &build(Preset::Overlap2Seq, &PresetOptions::default(), 1).unwrap()[0];
        let (a, b) = (&d.truth.members_per_type[0], &d.truth.members_per_type[1]);
        assert_eq!((a.len(), b.len()), (100, 100));
        assert_eq!(a.iter().filter(|n| b.contains(n)).count(), 50);
        assert_eq!(d.truth.count_of(0), 22);
        assert_eq!(d.truth.count_of(1), 22);
    }

    #[test]
    fn bidirectional_types() {
        let d = &build(Preset::Bidirectional, &small(), 1).unwrap()[0];
        assert_eq!(d.truth.members_per_type[0], d.truth.members_per_type[1]);
        assert!(d
            .truth
            .occurrences
            .iter()
            .all(|o| (o.type_index == 1) == (o.direction == Direction::Reverse)));
    }

    #[test]
    fn grids_have_expected_sizes() {
        let grid = build(Preset::DetectionGrid, &small(), 2).unwrap();
        assert_eq!(grid.len(), 81);
        let warp = build(Preset::Timewarp, &small(), 2).unwrap();
        assert!(warp[0]
            .truth
            .occurrences
            .iter()
            .all(|o| WARP_FACTORS.contains(&o.warp)));
        let maze = build(Preset::Tmaze, &PresetOptions::default(), 2).unwrap();
        assert_eq!(maze[0].x.n_neurons(), 169);
    }

    #[test]
    fn presets_are_deterministic() {
        let a = build(Preset::Overlap2Seq, &small(), 5).unwrap();
        let b = build(Preset::Overlap2Seq, &small(), 5).unwrap();
        assert_eq!(a, b);
    }
}
