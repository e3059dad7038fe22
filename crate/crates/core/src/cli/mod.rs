//! Command-line front end: `convseq {generate|fit|null|score|roc|sort|bench}`.

pub mod bench;
pub mod config;
pub mod plots;
pub mod report;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{self, EarlyStop, FitConfig};
use crate::filters::{FilterBank, Variant, DEFAULT_SIGMA};
use crate::presets::{self, Dataset, Preset};
use crate::rng;
use crate::spikes::{SpikeFormat, SpikeMatrix};
use crate::stats::null::{self, NullCalibration, NullFamily};
use crate::stats::peaks::extract_detections;
use crate::stats::roc::roc_auc;
use crate::stats::score::{apply_assignment, best_assignment, score, DetectionReport};
use crate::synth;
use crate::truth::GroundTruth;

use self::bench::{BenchCase, BenchResult};
use self::config::{resolve_seed, RunConfig};
use self::report::{DetectionSummary, LossSummary, Recorder};

#[derive(Debug, Parser)]
#[command(name = "convseq", version, about = "Unsupervised detection of neural firing sequences")]
pub struct Cli {
    /// TOML or JSON run configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for every output file.
    #[arg(short = 'o', long = "out-dir", global = true)]
    pub out_dir: Option<PathBuf>,
    /// Random seed (falls back to CONVSEQ_SEED, then 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic rasters and ground truth.
    Generate(GenerateArgs),
    /// Train a filter bank on a raster.
    Fit(FitArgs),
    /// Calibrate the detection threshold from random filters.
    Null(NullArgs),
    /// Score thresholded peaks against ground truth.
    Score(ScoreArgs),
    /// ROC curve and AUC of one response trace.
    Roc(RocArgs),
    /// Reorder raster rows by a trained filter.
    Sort(SortArgs),
    /// Time the training loop across data sizes and filter counts.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub neurons: Option<usize>,
    #[arg(long)]
    pub bins: Option<usize>,
    /// Background spike density.
    #[arg(long)]
    pub density: Option<f64>,
    /// Bins over which one unwarped occurrence unfolds.
    #[arg(long)]
    pub span: Option<f64>,
    #[arg(long)]
    pub members: Option<usize>,
    #[arg(long)]
    pub isi: Option<usize>,
    #[arg(long)]
    pub jitter: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Raster whose rows and columns are permuted into the background.
    #[arg(long)]
    pub template: Option<PathBuf>,
    /// Output format: coo or csv.
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub unnormalized_gaussian: bool,
    #[arg(long)]
    pub beta_tv: Option<f64>,
    #[arg(long)]
    pub beta_xcor: Option<f64>,
    /// Maximum cross-correlation lag (default M).
    #[arg(long)]
    pub j: Option<usize>,
    #[arg(long)]
    pub lrate: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Stop once every filter has this many peaks above the calibrated threshold.
    #[arg(long)]
    pub early_stop_peaks: Option<usize>,
    /// Calibration JSON from `null`; enables the threshold line and early stopping.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Bank output (default <out-dir>/bank.json).
    #[arg(long)]
    pub save: Option<PathBuf>,
    /// Trace CSV output (default <out-dir>/traces.csv).
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    #[arg(long)]
    pub plots: bool,
}

#[derive(Debug, Args)]
pub struct NullArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Take width and filter family from a saved bank.
    #[arg(long)]
    pub bank: Option<PathBuf>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub unnormalized_gaussian: bool,
    /// `init` repeats the training initialization; `uniform` uses random
    /// row-stochastic kernels.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub n_null: Option<usize>,
    #[arg(long)]
    pub z: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub traces: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, conflicts_with = "alpha")]
    pub calibration: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Filter width; sets the default margin (M/2) and suppression window (M).
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub margin: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    /// Map filters to sequence types before scoring.
    #[arg(long)]
    pub assign: bool,
}

#[derive(Debug, Args)]
pub struct RocArgs {
    #[arg(long)]
    pub traces: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub filter: usize,
    /// Restrict positives to one sequence type.
    #[arg(long = "type")]
    pub type_index: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub margin: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SortArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub bank: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub filter: usize,
    /// Reordered raster (default <out-dir>/sorted.<ext of input>).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub neurons: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub bins: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub filters: Option<Vec<usize>>,
    #[arg(long)]
    pub density: Option<f64>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Concurrent fits; timings are only comparable with 1.
    #[arg(long)]
    pub jobs: Option<usize>,
}

/// Parse `argv`, run the subcommand and return the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn execute(cli: Cli) -> anyhow::Result<()> {
    let config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let seed = resolve_seed(cli.seed, config.seed)?;
    let out_dir = cli
        .out_dir
        .clone()
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let ctx = Ctx { config, seed, out_dir };
    match cli.command {
        Command::Generate(a) => generate(&ctx, a),
        Command::Fit(a) => fit(&ctx, a),
        Command::Null(a) => null_cmd(&ctx, a),
        Command::Score(a) => score_cmd(&ctx, a),
        Command::Roc(a) => roc_cmd(&ctx, a),
        Command::Sort(a) => sort_cmd(&ctx, a),
        Command::Bench(a) => bench_cmd(&ctx, a),
    }
}

struct Ctx {
    config: RunConfig,
    seed: u64,
    out_dir: PathBuf,
}

fn to_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

fn load_spikes(path: &Path) -> anyhow::Result<SpikeMatrix> {
    SpikeMatrix::load(path, SpikeFormat::from_path(path)).with_context(|| format!("loading {}", path.display()))
}

fn load_traces(path: &Path) -> anyhow::Result<Vec<Vec<f64>>> {
    engine::load_traces_csv(path).with_context(|| format!("loading {}", path.display()))
}

fn load_truth(path: &Path) -> anyhow::Result<GroundTruth> {
    GroundTruth::load(path).with_context(|| format!("loading {}", path.display()))
}

fn load_calibration(path: &Path) -> anyhow::Result<NullCalibration> {
    NullCalibration::load(path).with_context(|| format!("loading {}", path.display()))
}

#[derive(Serialize)]
struct GenerateEcho {
    preset: Option<String>,
    options: presets::PresetOptions,
    template: Option<PathBuf>,
    format: String,
    datasets: Vec<DatasetEcho>,
}

#[derive(Serialize)]
struct DatasetEcho {
    name: String,
    n_neurons: usize,
    n_bins: usize,
    n_spikes: usize,
    n_occurrences: usize,
    sequences: Vec<synth::SequenceSpec>,
}

fn generate(ctx: &Ctx, a: GenerateArgs) -> anyhow::Result<()> {
    let g = &ctx.config.generate;
    let mut opts = g.preset_options();
    macro_rules! over {
        ($field:ident, $arg:expr) => {
            if let Some(v) = $arg {
                opts.$field = Some(v);
            }
        };
    }
    over!(n_neurons, a.neurons);
    over!(n_bins, a.bins);
    over!(density, a.density);
    over!(span, a.span);
    over!(n_members, a.members);
    over!(isi, a.isi);
    over!(jitter_sd, a.jitter);
    over!(dropout_p, a.dropout);
    let preset_name = a.preset.or_else(|| g.preset.clone());
    let template_path = a.template.or_else(|| g.template.clone());
    let format_name = a.format.or_else(|| g.format.clone()).unwrap_or_else(|| "coo".into());
    let format: SpikeFormat = format_name.parse()?;
    let ext = match format {
        SpikeFormat::CooText => "coo",
        SpikeFormat::DenseCsv => "csv",
    };
    if preset_name.is_some() && opts.span.is_none() {
        info!("no span given; using {} bins", presets::DEFAULT_SPAN);
    }

    let mut rec = Recorder::new("generate", ctx.seed, serde_json::Value::Null);
    let template = match &template_path {
        Some(p) => Some(rec.phase("load", || Ok(load_spikes(p)))??),
        None => None,
    };
    let datasets: Vec<Dataset> = rec.phase("generate", || {
        Ok(if let Some(name) = &preset_name {
            let preset: Preset = name.parse()?;
            presets::build_with_template(preset, &opts, template.as_ref(), ctx.seed)
        } else if !g.sequences.is_empty() {
            custom_dataset(&opts, template.as_ref(), &g.sequences, ctx.seed).map(|d| vec![d])
        } else if let Some(spec) = &g.place_cells {
            synth::generate_place_cell_dataset(spec, ctx.seed).map(|(x, truth)| {
                vec![Dataset {
                    name: "place-cells".into(),
                    x,
                    truth,
                    specs: Vec::new(),
                }]
            })
        } else {
            return Err(crate::Error::invalid(
                "nothing to generate: give --preset or list sequences in the config",
            ));
        })
    })??;

    let mut files = Vec::new();
    rec.phase("write", || {
        for d in &datasets {
            let raster = ctx.out_dir.join(format!("{}.{ext}", d.name));
            let truth = ctx.out_dir.join(format!("{}.truth", d.name));
            d.x.save(&raster, format)?;
            d.truth.save(&truth)?;
            files.push(raster);
            files.push(truth);
        }
        Ok(())
    })?;
    for f in files {
        rec.output(f);
    }
    let echo = GenerateEcho {
        preset: preset_name,
        options: opts,
        template: template_path,
        format: format_name,
        datasets: datasets
            .iter()
            .map(|d| DatasetEcho {
                name: d.name.clone(),
                n_neurons: d.x.n_neurons(),
                n_bins: d.x.n_bins(),
                n_spikes: d.x.nnz(),
                n_occurrences: d.truth.occurrences.len(),
                sequences: d.specs.clone(),
            })
            .collect(),
    };
    rec.config = to_json(&echo);
    let report = rec.finish(&ctx.out_dir)?;
    println!(
        "wrote {} dataset(s) to {} ({} files)",
        datasets.len(),
        ctx.out_dir.display(),
        report.manifest.len()
    );
    Ok(())
}

fn custom_dataset(
    opts: &presets::PresetOptions,
    template: Option<&SpikeMatrix>,
    specs: &[synth::SequenceSpec],
    seed: u64,
) -> crate::Result<Dataset> {
    let bg = match template {
        Some(t) => synth::generate_background(t, seed),
        None => synth::bernoulli_background(
            opts.n_neurons.unwrap_or(presets::DEFAULT_NEURONS),
            opts.n_bins.unwrap_or(presets::DEFAULT_BINS),
            opts.density.unwrap_or(presets::DEFAULT_DENSITY),
            seed,
        )?,
    };
    let (x, truth) = synth::embed_sequences(&bg, specs, seed)?;
    Ok(Dataset {
        name: "custom".into(),
        x,
        truth,
        specs: specs.to_vec(),
    })
}

#[derive(Debug, Serialize)]
struct FitEcho {
    input: PathBuf,
    k: usize,
    m: usize,
    variant: Variant,
    sigma: Option<f64>,
    normalized: bool,
    beta_tv: f64,
    beta_xcor: f64,
    j: usize,
    lrate: f64,
    n_steps: usize,
    early_stop: Option<EarlyStop>,
    calibration: Option<PathBuf>,
}

fn fit(ctx: &Ctx, a: FitArgs) -> anyhow::Result<()> {
    let f = &ctx.config.fit;
    let input = a
        .input
        .or_else(|| f.input.clone())
        .ok_or_else(|| anyhow!("fit needs --input"))?;
    let k = a.k.or(f.k).unwrap_or(1);
    let m = a.m.or(f.m).unwrap_or(engine::DEFAULT_WIDTH);
    let variant = a.variant.or(f.variant).unwrap_or(Variant::Direct);
    let sigma = a.sigma.or(f.sigma).unwrap_or(DEFAULT_SIGMA);
    let normalized = !(a.unnormalized_gaussian || f.unnormalized_gaussian.unwrap_or(false));
    let calibration = match &a.calibration {
        Some(p) => Some(load_calibration(p)?),
        None => None,
    };
    let early_peaks = a.early_stop_peaks.or(f.early_stop_peaks);
    let early_stop = match (early_peaks, &calibration) {
        (Some(min_peaks), Some(c)) => Some(EarlyStop {
            alpha: c.alpha,
            min_peaks,
            window: None,
        }),
        (Some(_), None) => bail!("--early-stop-peaks needs --calibration"),
        _ => None,
    };
    let config = FitConfig {
        n_steps: a.steps.or(f.steps).unwrap_or(engine::DEFAULT_STEPS),
        lrate: a.lrate.or(f.lrate).unwrap_or(engine::DEFAULT_LRATE),
        beta_tv: a.beta_tv.or(f.beta_tv).unwrap_or(engine::DEFAULT_BETA_TV),
        beta_xcor: a.beta_xcor.or(f.beta_xcor),
        j: a.j.or(f.j),
        early_stop,
        seed: ctx.seed,
    };
    config.validate()?;
    let echo = FitEcho {
        input: input.clone(),
        k,
        m,
        variant,
        sigma: (variant == Variant::Gaussian).then_some(sigma),
        normalized,
        beta_tv: config.beta_tv,
        beta_xcor: config.beta_xcor_for(k),
        j: config.lag_for(m),
        lrate: config.lrate,
        n_steps: config.n_steps,
        early_stop,
        calibration: a.calibration.clone(),
    };
    let mut rec = Recorder::new("fit", ctx.seed, to_json(&echo));
    let x = rec.phase("load", || Ok(load_spikes(&input)))??;
    let bank = rec.phase("init", || match variant {
        Variant::Direct => FilterBank::init_direct(x.n_neurons(), m, k, ctx.seed),
        Variant::Gaussian => {
            FilterBank::init_gaussian(x.n_neurons(), m, k, sigma, ctx.seed).map(|b| b.with_normalization(normalized))
        }
    })?;
    let result = rec.phase("fit", || {
        engine::fit_with_observer(&x, bank, &config, |step, l| {
            log::debug!("step {step}: loss {:.6}", l.total);
        })
    })?;
    info!("ran {} steps", result.steps_run);

    let bank_path = a.save.unwrap_or_else(|| ctx.out_dir.join("bank.json"));
    let trace_path = a.trace_out.unwrap_or_else(|| ctx.out_dir.join("traces.csv"));
    let traces: Vec<Vec<f64>> = result.traces.iter().map(|t| t.values.clone()).collect();
    rec.phase("write", || {
        result.bank.save(&bank_path)?;
        engine::save_traces_csv(&traces, &trace_path)
    })?;
    rec.output(bank_path);
    rec.output(trace_path);

    let alpha = calibration.as_ref().map(|c| c.alpha);
    rec.loss = LossSummary::from_history(&result.loss_history);
    if let Some(alpha) = alpha {
        rec.detection = Some(DetectionSummary {
            alpha: Some(alpha),
            detections_per_filter: traces.iter().map(|t| extract_detections(t, alpha, m).len()).collect(),
            tp_rate: None,
            fp_rate: None,
            fn_rate: None,
        });
    }
    if a.plots || f.plots.unwrap_or(false) {
        let sorted = x.reorder_rows(&result.bank.sort_filter(0).order)?;
        let files = rec.phase("plots", || {
            plots::emit_plots(
                &plots::PlotInputs {
                    raster: &x,
                    sorted: Some(&sorted),
                    traces: &traces,
                    alpha,
                    loss_history: &result.loss_history,
                },
                &ctx.out_dir,
            )
        })?;
        for p in files {
            rec.output(p);
        }
    }
    let report = rec.finish(&ctx.out_dir)?;
    if let Some(l) = &report.loss {
        println!("loss {:.6} -> {:.6} over {} steps", l.initial, l.last, l.steps_run);
    }
    Ok(())
}

fn null_cmd(ctx: &Ctx, a: NullArgs) -> anyhow::Result<()> {
    let input = a
        .input
        .or_else(|| ctx.config.fit.input.clone())
        .ok_or_else(|| anyhow!("null needs --input"))?;
    let (m, family) = match &a.bank {
        Some(p) => {
            let bank = FilterBank::load(p).with_context(|| format!("loading {}", p.display()))?;
            (bank.width(), NullFamily::of(&bank))
        }
        None => {
            let f = &ctx.config.fit;
            let m = a.m.or(f.m).unwrap_or(engine::DEFAULT_WIDTH);
            let family = match a.variant.or(f.variant).unwrap_or(Variant::Direct) {
                Variant::Direct => NullFamily::Direct,
                Variant::Gaussian => NullFamily::Gaussian {
                    sigma: a.sigma.or(f.sigma).unwrap_or(DEFAULT_SIGMA),
                    normalized: !(a.unnormalized_gaussian || f.unnormalized_gaussian.unwrap_or(false)),
                },
            };
            (m, family)
        }
    };
    let family = match a.family.as_deref().or(ctx.config.null.family.as_deref()) {
        None | Some("init") => family,
        Some("uniform") => NullFamily::Uniform,
        Some(other) => bail!("unknown null family '{other}' (init, uniform)"),
    };
    let n_null = a.n_null.or(ctx.config.null.n_null).unwrap_or(null::DEFAULT_N_NULL);
    let z = a.z.or(ctx.config.null.z).unwrap_or(null::DEFAULT_Z);
    let echo = serde_json::json!({
        "input": input, "m": m, "family": family, "n_null": n_null, "z": z,
    });
    let mut rec = Recorder::new("null", ctx.seed, echo);
    let x = rec.phase("load", || Ok(load_spikes(&input)))??;
    let cal = rec.phase("calibrate", || null::calibrate_null(&x, m, family, n_null, z, ctx.seed))?;
    let path = ctx.out_dir.join("calibration.json");
    rec.phase("write", || cal.save(&path))?;
    rec.output(path);
    rec.detection = Some(DetectionSummary {
        alpha: Some(cal.alpha),
        detections_per_filter: Vec::new(),
        tp_rate: None,
        fp_rate: None,
        fn_rate: None,
    });
    rec.finish(&ctx.out_dir)?;
    println!("mu0 {:.6} sigma0 {:.6} alpha {:.6}", cal.mu0, cal.sigma0, cal.alpha);
    Ok(())
}

#[derive(Serialize)]
struct ScoreOutput {
    alpha: f64,
    /// `assignment[filter] = type` when `--assign` is given.
    assignment: Option<Vec<Option<usize>>>,
    #[serde(flatten)]
    report: DetectionReport,
}

fn score_cmd(ctx: &Ctx, a: ScoreArgs) -> anyhow::Result<()> {
    let s = &ctx.config.score;
    let m = a.m.or(ctx.config.fit.m).unwrap_or(engine::DEFAULT_WIDTH);
    let margin = a.margin.or(s.margin).unwrap_or(crate::stats::default_margin(m));
    let window = a.window.or(s.window).unwrap_or(m).max(1);
    let assign = a.assign || s.assign.unwrap_or(false);
    let alpha = match (&a.calibration, a.alpha) {
        (Some(p), _) => load_calibration(p)?.alpha,
        (None, Some(v)) => v,
        (None, None) => bail!("score needs --calibration or --alpha"),
    };
    let echo = serde_json::json!({
        "traces": a.traces, "truth": a.truth, "alpha": alpha, "margin": margin,
        "window": window, "assign": assign,
    });
    let mut rec = Recorder::new("score", ctx.seed, echo);
    let (traces, truth) = rec.phase("load", || Ok((load_traces(&a.traces), load_truth(&a.truth))))?;
    let (traces, truth) = (traces?, truth?);
    let out = rec.phase("score", || {
        let detections: Vec<_> = traces.iter().map(|t| extract_detections(t, alpha, window)).collect();
        Ok(if assign {
            let mapping = best_assignment(&detections, &truth, margin);
            let (lists, _) = apply_assignment(&detections, &mapping, truth.n_types());
            ScoreOutput {
                alpha,
                assignment: Some(mapping),
                report: score(&lists, &truth, margin),
            }
        } else {
            ScoreOutput {
                alpha,
                assignment: None,
                report: score(&detections, &truth, margin),
            }
        })
    })?;
    let path = ctx.out_dir.join("score.json");
    std::fs::write(&path, serde_json::to_string_pretty(&out)?)?;
    rec.output(path);
    let r = &out.report;
    rec.detection = Some(DetectionSummary {
        alpha: Some(alpha),
        detections_per_filter: r.detections.iter().map(|d| d.len()).collect(),
        tp_rate: Some(r.tp_rate),
        fp_rate: Some(r.fp_rate),
        fn_rate: Some(r.fn_rate),
    });
    rec.finish(&ctx.out_dir)?;
    println!(
        "tp {:.3} fn {:.3} fp {:.3} ({} detections)",
        r.tp_rate, r.fn_rate, r.fp_rate, r.n_detections
    );
    Ok(())
}

fn roc_cmd(ctx: &Ctx, a: RocArgs) -> anyhow::Result<()> {
    let m = a.m.or(ctx.config.fit.m).unwrap_or(engine::DEFAULT_WIDTH);
    let margin = a
        .margin
        .or(ctx.config.score.margin)
        .unwrap_or(crate::stats::default_margin(m));
    let echo = serde_json::json!({
        "traces": a.traces, "truth": a.truth, "filter": a.filter, "type": a.type_index, "margin": margin,
    });
    let mut rec = Recorder::new("roc", ctx.seed, echo);
    let (traces, truth) = rec.phase("load", || Ok((load_traces(&a.traces), load_truth(&a.truth))))?;
    let (traces, truth) = (traces?, truth?);
    let trace = traces
        .get(a.filter)
        .ok_or_else(|| anyhow!("filter {} not in {} ({} columns)", a.filter, a.traces.display(), traces.len()))?;
    let centers = match a.type_index {
        Some(k) => truth.centers_of(k),
        None => truth.all_centers(),
    };
    let curve = rec.phase("roc", || roc_auc(trace, &centers, margin))?;
    let csv_path = ctx.out_dir.join("roc.csv");
    let mut csv = String::from("threshold,fpr,tpr\n");
    for p in &curve.points {
        let _ = writeln!(csv, "{},{},{}", p.threshold, p.fpr, p.tpr);
    }
    std::fs::write(&csv_path, csv)?;
    rec.output(csv_path);
    let json_path = ctx.out_dir.join("roc.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&serde_json::json!({
        "filter": a.filter, "type": a.type_index, "margin": margin,
        "auc": curve.auc, "n_points": curve.points.len(),
    }))?)?;
    rec.output(json_path);
    rec.finish(&ctx.out_dir)?;
    println!("auc {:.6}", curve.auc);
    Ok(())
}

fn sort_cmd(ctx: &Ctx, a: SortArgs) -> anyhow::Result<()> {
    let echo = serde_json::json!({ "input": a.input, "bank": a.bank, "filter": a.filter });
    let mut rec = Recorder::new("sort", ctx.seed, echo);
    let (x, bank) = rec.phase("load", || {
        Ok((
            load_spikes(&a.input),
            FilterBank::load(&a.bank).with_context(|| format!("loading {}", a.bank.display())),
        ))
    })?;
    let (x, bank) = (x?, bank?);
    if a.filter >= bank.n_filters() {
        bail!("filter {} not in bank of {}", a.filter, bank.n_filters());
    }
    let sorted = bank.sort_filter(a.filter);
    let reordered = rec.phase("sort", || x.reorder_rows(&sorted.order))?;
    let format = SpikeFormat::from_path(&a.input);
    let ext = match format {
        SpikeFormat::CooText => "coo",
        SpikeFormat::DenseCsv => "csv",
    };
    let out = a.output.unwrap_or_else(|| ctx.out_dir.join(format!("sorted.{ext}")));
    let order_path = ctx.out_dir.join("order.txt");
    rec.phase("write", || {
        reordered.save(&out, SpikeFormat::from_path(&out))?;
        let mut text = String::new();
        for &n in sorted.order.as_slice() {
            let _ = writeln!(text, "{n} {}", sorted.latencies[n]);
        }
        std::fs::write(&order_path, text)?;
        Ok(())
    })?;
    rec.output(out.clone());
    rec.output(order_path);
    rec.finish(&ctx.out_dir)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn bench_cmd(ctx: &Ctx, a: BenchArgs) -> anyhow::Result<()> {
    let b = &ctx.config.bench;
    let n = a.neurons.or(b.n_neurons).unwrap_or(152);
    let bins = a.bins.or_else(|| b.bins.clone()).unwrap_or_else(|| vec![5000, 20000, 80000]);
    let filters = a.filters.or_else(|| b.filters.clone()).unwrap_or_else(|| vec![1]);
    let density = a.density.or(b.density).unwrap_or(0.0031);
    let m = a.m.or(b.m).unwrap_or(engine::DEFAULT_WIDTH);
    let steps = a.steps.or(b.steps).unwrap_or(engine::DEFAULT_STEPS);
    let repeats = a.repeats.or(b.repeats).unwrap_or(1).max(1);
    let jobs = a.jobs.or(b.jobs).unwrap_or(1).max(1);
    let mut cases = Vec::new();
    for &t in &bins {
        for &k in &filters {
            for r in 0..repeats {
                cases.push((
                    BenchCase {
                        n_neurons: n,
                        n_bins: t,
                        n_filters: k,
                        density,
                        width: m,
                        steps,
                    },
                    r,
                ));
            }
        }
    }
    let echo = serde_json::json!({
        "n_neurons": n, "bins": bins, "filters": filters, "density": density, "m": m,
        "steps": steps, "repeats": repeats, "jobs": jobs,
    });
    let mut rec = Recorder::new("bench", ctx.seed, echo);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| anyhow!("thread pool: {e}"))?;
    let results: Vec<BenchResult> = rec.phase("bench", || {
        pool.install(|| {
            cases
                .par_iter()
                .enumerate()
                .map(|(i, (case, _))| bench::time_fit(case, rng::child_seed(ctx.seed, i as u64)))
                .collect()
        })
    })?;
    let path = ctx.out_dir.join("bench.csv");
    let mut csv = String::from("n_neurons,n_bins,k,m,steps,seconds,seconds_per_step\n");
    for r in &results {
        let c = &r.case;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            c.n_neurons, c.n_bins, c.n_filters, c.width, c.steps, r.seconds, r.seconds_per_step
        );
    }
    std::fs::write(&path, csv)?;
    rec.output(path);
    if jobs > 1 {
        warn!("timings were taken with {jobs} concurrent fits");
    }
    rec.finish(&ctx.out_dir)?;
    for r in &results {
        println!(
            "N={} T={} K={}: {:.4} s/step",
            r.case.n_neurons, r.case.n_bins, r.case.n_filters, r.seconds_per_step
        );
    }
    Ok(())
}
