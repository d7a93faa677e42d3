// SPDX-License-Identifier: Apache-2.0

//! Run configuration. A TOML recipe holds one table per subcommand plus a
//! top-level `seed`; command-line flags use the same keys and win on
//! conflict.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Context, Result};

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateArgs {
    /// ising1d-critical (exact), ising1d or ising2d (exact diagonalisation).
    #[arg(long)]
    pub model: Option<String>,
    /// Chain length, or rows of the rectangle.
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<usize>,
    /// Sites per row of the rectangle.
    #[arg(long = "Lx")]
    #[serde(rename = "Lx")]
    pub lx: Option<usize>,
    #[arg(long = "J")]
    #[serde(rename = "J")]
    pub j: Option<f64>,
    /// Pre-quench field; `inf` starts from the x-polarised state.
    #[arg(long = "gamma0", alias = "Gamma0")]
    #[serde(rename = "Gamma0")]
    pub gamma0: Option<f64>,
    #[arg(long = "gamma", alias = "Gamma")]
    #[serde(rename = "Gamma")]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Number of samples.
    #[arg(long, alias = "n-steps")]
    #[serde(alias = "n_steps")]
    pub n: Option<usize>,
    #[arg(long)]
    pub t0: Option<f64>,
    /// Separation: site index for cxx, unit-vector length for czz (1 = nearest neighbours).
    #[arg(long, allow_negative_numbers = true)]
    pub r: Option<i64>,
    /// czz (equal-time quench), cxx (|C^xx| unequal-time), cxx-complex, entropy.
    #[arg(long)]
    pub observable: Option<String>,
    /// Subsystem sizes L_A (rows for rectangles) for the entropy observable.
    #[arg(long, value_delimiter = ',')]
    pub partition: Option<Vec<usize>>,
    /// auto, spectral or krylov.
    #[arg(long)]
    pub method: Option<String>,
    /// spin-half or pauli.
    #[arg(long)]
    pub convention: Option<String>,
    #[arg(long)]
    pub output: Option<String>,
    /// additive or relative (power law t^-3/2).
    #[arg(long)]
    pub noise_kind: Option<String>,
    #[arg(long)]
    pub noise_epsilon: Option<f64>,
    #[arg(long)]
    pub noise_seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastArgs {
    #[arg(long)]
    pub input: Option<String>,
    /// Snapshot length.
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub m: Option<usize>,
    /// Training samples.
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    /// Singular-value cutoff ε (0 keeps every nonzero value).
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long = "R-upper", alias = "R_upper")]
    #[serde(rename = "R_upper")]
    pub r_upper: Option<usize>,
    /// first-row or average.
    #[arg(long)]
    pub readout: Option<String>,
    /// Training starts at this time instead of the first sample.
    #[arg(long)]
    pub t_shift: Option<f64>,
    /// Forecast end time (exclusive); defaults to the end of the input.
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Use the randomized SVD.
    #[arg(long)]
    pub randomized: Option<bool>,
    #[arg(long)]
    pub oversampling: Option<usize>,
    #[arg(long)]
    pub model_out: Option<String>,
    #[arg(long)]
    pub forecast_out: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub truth: Option<String>,
    #[arg(long)]
    pub prediction: Option<String>,
    /// Compare on [from, to) only.
    #[arg(long)]
    pub from: Option<f64>,
    #[arg(long)]
    pub to: Option<f64>,
    /// Peak threshold as a fraction of the largest nonzero-frequency bin.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Fit the envelope exponent of |f − asymptote| when given.
    #[arg(long, allow_negative_numbers = true)]
    pub asymptote: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub envelope_window: Option<Vec<f64>>,
    /// Estimate the noise level from the truth with this snapshot length.
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub m: Option<usize>,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    /// Prefix for every output file.
    #[arg(long)]
    pub prefix: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyArgs {
    /// error, noise-calibration, entanglement, gpr or cutoff-ladder.
    #[arg(long)]
    pub kind: Option<String>,
    /// Stored truth series; the error study otherwise uses the exact chain.
    #[arg(long)]
    pub truth: Option<String>,
    #[arg(long)]
    pub input: Option<String>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub m: Option<usize>,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub epsilons: Option<Vec<f64>>,
    #[arg(long = "R-upper", alias = "R_upper")]
    #[serde(rename = "R_upper")]
    pub r_upper: Option<usize>,
    #[arg(long)]
    pub readout: Option<String>,
    #[arg(long)]
    pub r: Option<i64>,
    #[arg(long)]
    pub n_origins: Option<usize>,
    #[arg(long)]
    pub origin_spacing: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Also report statistics over the first k origins for each k.
    #[arg(long, value_delimiter = ',')]
    pub subsets: Option<Vec<usize>>,
    #[arg(long)]
    pub envelope_width: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub noise_levels: Option<Vec<f64>>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// chain or rectangle.
    #[arg(long)]
    pub geometry: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long = "Lx")]
    #[serde(rename = "Lx")]
    pub lx: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub partition: Option<Vec<usize>>,
    #[arg(long = "J")]
    #[serde(rename = "J")]
    pub j: Option<f64>,
    #[arg(long = "gamma0", alias = "Gamma0")]
    #[serde(rename = "Gamma0")]
    pub gamma0: Option<f64>,
    #[arg(long = "gamma", alias = "Gamma")]
    #[serde(rename = "Gamma")]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub n_kernels: Option<Vec<usize>>,
    #[arg(long)]
    pub initial_points: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    /// DMD forecast to compare the GPR baseline against.
    #[arg(long)]
    pub dmd_forecast: Option<String>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Relative error bound defining the forecast horizon.
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub noise_kind: Option<String>,
    #[arg(long)]
    pub noise_epsilon: Option<f64>,
}

/// A recipe file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecipeFile {
    pub seed: Option<u64>,
    pub description: Option<String>,
    pub generate: Option<GenerateArgs>,
    pub forecast: Option<ForecastArgs>,
    pub analyze: Option<AnalyzeArgs>,
    pub study: Option<StudyArgs>,
}

impl RecipeFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).context(|| format!("parsing {}", path.display()))
    }
}

/// `top` over `base`: every key set in `top` replaces the one in `base`.
pub fn overlay<T: Serialize + DeserializeOwned>(base: Option<T>, top: &T) -> Result<T> {
    let ser = |v: &T| toml::Table::try_from(v).map_err(|e| CliError::config(e.to_string()));
    let mut table = match &base {
        Some(b) => ser(b)?,
        None => toml::Table::new(),
    };
    for (k, v) in ser(top)? {
        table.insert(k, v);
    }
    table.try_into().map_err(|e: toml::de::Error| CliError::config(e.to_string()))
}

pub fn require<T: Clone>(value: &Option<T>, key: &str, section: &str) -> Result<T> {
    value.clone().ok_or_else(|| CliError::config(format!("missing `{key}` (set --{key} or `{key}` under [{section}])")))
}

/// JSON has no infinity; fields such as `Gamma0 = inf` are written as strings.
pub fn field<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(&v.to_string())
    }
}

pub fn opt_field<S: serde::Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) => field(x, s),
        None => s.serialize_none(),
    }
}

/// Relative paths resolve against the output directory.
pub fn resolve(out: &Path, p: &str) -> PathBuf {
    let path = Path::new(p);
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        out.join(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file_values() {
        let file: RecipeFile = toml::from_str(
            r#"
            seed = 4
            [forecast]
            input = "series.csv"
            M = 1000
            N = 2000
            epsilon = 0.01
            "#,
        )
        .unwrap();
        let flags = ForecastArgs { m: Some(500), ..Default::default() };
        let merged = overlay(file.forecast, &flags).unwrap();
        assert_eq!(merged.m, Some(500));
        assert_eq!(merged.n, Some(2000));
        assert_eq!(merged.input.as_deref(), Some("series.csv"));
    }

    #[test]
    fn infinite_field_parses() {
        let g: GenerateArgs = toml::from_str("Gamma0 = inf\nGamma = 1.52219\nL = 3\nLx = 4").unwrap();
        assert_eq!(g.gamma0, Some(f64::INFINITY));
        assert_eq!((g.l, g.lx), (Some(3), Some(4)));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RecipeFile>("[forecast]\nMM = 3").is_err());
    }

    #[test]
    fn shipped_recipes_parse() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let mut count = 0;
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "toml") {
                RecipeFile::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
                count += 1;
            }
        }
        assert!(count > 0);
    }

    #[test]
    fn relative_paths_join_the_output_directory() {
        assert_eq!(resolve(Path::new("/tmp/run"), "a.csv"), PathBuf::from("/tmp/run/a.csv"));
        assert_eq!(resolve(Path::new("/tmp/run"), "/data/a.csv"), PathBuf::from("/data/a.csv"));
    }
}
