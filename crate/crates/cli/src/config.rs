//! Run configuration: one JSON document with nested sections. Values come
//! from built-in defaults, then the config file, then command-line flags.

use std::path::{Path, PathBuf};

use mdelm_core::classifier::ElasticNetConfig;
use mdelm_core::datasets::SubsampleMode;
use mdelm_core::detector::{DetectorConfig, FocusMode};
use mdelm_core::elm::{Activation, HiddenLayerConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub encoding: EncodingSection,
    pub elm: ElmSection,
    pub classifier: ClassifierSection,
    pub detector: DetectorSection,
    pub io: IoSection,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncodingSection {
    /// A fitted schema to apply.
    pub schema: Option<PathBuf>,
    /// Variable specs to fit a schema from.
    pub spec: Option<PathBuf>,
    /// Raw column holding integer class labels.
    pub label_column: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ElmSection {
    pub n_sigmoid: usize,
    pub n_rbf: usize,
    pub passthrough: bool,
    pub activation: Activation,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for ElmSection {
    fn default() -> Self {
        let h = HiddenLayerConfig::default();
        Self {
            n_sigmoid: h.n_sigmoid,
            n_rbf: h.n_rbf,
            passthrough: h.passthrough,
            activation: h.activation,
            lambda: 1.0,
            seed: 0,
        }
    }
}

impl ElmSection {
    pub fn hidden(&self) -> HiddenLayerConfig {
        HiddenLayerConfig {
            n_sigmoid: self.n_sigmoid,
            n_rbf: self.n_rbf,
            passthrough: self.passthrough,
            activation: self.activation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSection {
    pub alpha_grid: Vec<f64>,
    pub l1_ratio: f64,
    pub eta0: f64,
    pub k_folds: usize,
    pub epochs: usize,
    /// Balanced class weights; uniform weights when false.
    pub balanced: bool,
    pub seed: u64,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        let e = ElasticNetConfig::default();
        Self {
            alpha_grid: e.alpha_grid,
            l1_ratio: e.l1_ratio,
            eta0: e.eta0,
            k_folds: 5,
            epochs: e.epochs,
            balanced: true,
            seed: 0,
        }
    }
}

impl ClassifierSection {
    pub fn elasticnet(&self) -> ElasticNetConfig {
        ElasticNetConfig {
            alpha_grid: self.alpha_grid.clone(),
            l1_ratio: self.l1_ratio,
            eta0: self.eta0,
            epochs: self.epochs,
        }
    }
}

/// Detector settings; the hidden layer and ridge strength come from the
/// `elm` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub n_models: usize,
    pub feature_subset_size: Option<usize>,
    pub artificial_fraction: f64,
    pub flips_per_iteration: usize,
    pub focus_class: Option<usize>,
    pub focus_mode: FocusMode,
    pub n_other: Option<usize>,
    pub subsample_mode: SubsampleMode,
    pub target_artificial_score: f64,
    pub max_iterations: u64,
    pub quantiles: Vec<f64>,
    pub master_seed: u64,
    pub fit_includes_artificial: bool,
}

impl Default for DetectorSection {
    fn default() -> Self {
        let d = DetectorConfig::default();
        Self {
            n_models: d.n_models,
            feature_subset_size: d.feature_subset_size,
            artificial_fraction: d.artificial_fraction,
            flips_per_iteration: d.flips_per_iteration,
            focus_class: d.focus_class,
            focus_mode: d.focus_mode,
            n_other: d.n_other,
            subsample_mode: d.subsample_mode,
            target_artificial_score: d.target_artificial_score,
            max_iterations: d.max_iterations,
            quantiles: d.quantiles,
            master_seed: d.master_seed,
            fit_includes_artificial: d.fit_includes_artificial,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoSection {
    /// Directory for train/detect outputs.
    pub out_dir: Option<PathBuf>,
    /// Parallel detector models; defaults to the available cores.
    pub jobs: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::validation(format!("config {}: {e}", path.display())))
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self, CliError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn detector(&self) -> DetectorConfig {
        let d = &self.detector;
        DetectorConfig {
            n_models: d.n_models,
            feature_subset_size: d.feature_subset_size,
            artificial_fraction: d.artificial_fraction,
            flips_per_iteration: d.flips_per_iteration,
            focus_class: d.focus_class,
            focus_mode: d.focus_mode,
            n_other: d.n_other,
            subsample_mode: d.subsample_mode,
            target_artificial_score: d.target_artificial_score,
            max_iterations: d.max_iterations,
            quantiles: d.quantiles.clone(),
            lambda: self.elm.lambda,
            hidden: self.elm.hidden(),
            master_seed: d.master_seed,
            fit_includes_artificial: d.fit_includes_artificial,
        }
    }

    /// Checks every section that a command will use.
    pub fn validate(&self) -> Result<(), CliError> {
        self.elm.hidden().validate()?;
        if !(self.elm.lambda > 0.0 && self.elm.lambda.is_finite()) {
            return Err(CliError::validation("elm.lambda must be positive"));
        }
        self.classifier.elasticnet().validate()?;
        if self.classifier.k_folds < 2 {
            return Err(CliError::validation("classifier.k_folds must be at least 2"));
        }
        self.detector().validate()?;
        if self.io.jobs == Some(0) {
            return Err(CliError::validation("io.jobs must be at least 1"));
        }
        Ok(())
    }

    pub fn jobs(&self) -> usize {
        self.io
            .jobs
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, usize::from))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
