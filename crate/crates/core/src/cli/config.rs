//! Run configuration files (TOML or JSON). Every field is optional; a value
//! given on the command line wins over the file, and the file wins over the
//! built-in default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::Variant;
use crate::presets::PresetOptions;
use crate::synth::{PlaceCellSpec, SequenceSpec};

pub const SEED_ENV: &str = "CONVSEQ_SEED";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub generate: GenerateSection,
    pub fit: FitSection,
    pub null: NullSection,
    pub score: ScoreSection,
    pub bench: BenchSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateSection {
    pub preset: Option<String>,
    pub n_neurons: Option<usize>,
    pub n_bins: Option<usize>,
    pub density: Option<f64>,
    pub span: Option<f64>,
    pub n_members: Option<usize>,
    pub isi: Option<usize>,
    pub jitter_sd: Option<f64>,
    pub dropout_p: Option<f64>,
    /// Background template to permute instead of a Bernoulli raster.
    pub template: Option<PathBuf>,
    /// Custom sequences, used when no preset is named.
    pub sequences: Vec<SequenceSpec>,
    pub place_cells: Option<PlaceCellSpec>,
    pub format: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub input: Option<PathBuf>,
    pub k: Option<usize>,
    pub m: Option<usize>,
    pub variant: Option<Variant>,
    pub sigma: Option<f64>,
    pub unnormalized_gaussian: Option<bool>,
    pub beta_tv: Option<f64>,
    pub beta_xcor: Option<f64>,
    pub j: Option<usize>,
    pub lrate: Option<f64>,
    pub steps: Option<usize>,
    pub early_stop_peaks: Option<usize>,
    pub plots: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NullSection {
    pub n_null: Option<usize>,
    pub z: Option<f64>,
    /// `init` (default) or `uniform`.
    pub family: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreSection {
    pub margin: Option<usize>,
    pub window: Option<usize>,
    pub assign: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub n_neurons: Option<usize>,
    pub bins: Option<Vec<usize>>,
    pub filters: Option<Vec<usize>>,
    pub density: Option<f64>,
    pub m: Option<usize>,
    pub steps: Option<usize>,
    pub repeats: Option<usize>,
    pub jobs: Option<usize>,
}

impl GenerateSection {
    pub fn preset_options(&self) -> PresetOptions {
        PresetOptions {
            n_neurons: self.n_neurons,
            n_bins: self.n_bins,
            density: self.density,
            span: self.span,
            n_members: self.n_members,
            isi: self.isi,
            jitter_sd: self.jitter_sd,
            dropout_p: self.dropout_p,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> Result<RunConfig> {
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
            || text.trim_start().starts_with('{');
        if is_json {
            Ok(serde_json::from_str(text)?)
        } else {
            toml::from_str(text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
        }
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path)
    }
}

/// First of: command-line value, config value, `CONVSEQ_SEED`, 0.
pub fn resolve_seed(cli: Option<u64>, config: Option<u64>) -> Result<u64> {
    if let Some(s) = cli.or(config) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_and_json_agree() {
        let toml_text = r#"
seed = 7
[fit]
k = 2
m = 200
variant = "gaussian"
[generate]
preset = "single-seq"
span = 50.0
n_bins = 6000
"#;
        let json_text = r#"{"seed":7,"fit":{"k":2,"m":200,"variant":"gaussian"},
            "generate":{"preset":"single-seq","span":50.0,"n_bins":6000}}"#;
        let a = RunConfig::parse(toml_text, Path::new("run.toml")).unwrap();
        let b = RunConfig::parse(json_text, Path::new("run.json")).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fit.variant, Some(Variant::Gaussian));
        assert_eq!(a.generate.preset_options().span, Some(50.0));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::parse("[fit]\nkk = 2\n", Path::new("x.toml")).is_err());
        assert!(RunConfig::parse("seed = \"x\"", Path::new("x.toml")).is_err());
    }

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(3), Some(4)).unwrap(), 3);
        assert_eq!(resolve_seed(None, Some(4)).unwrap(), 4);
    }
}
