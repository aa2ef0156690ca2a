use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use mdelm_core::classifier::{
    balanced_class_weights, confusion_matrix, fit_elasticnet_sgd, selected_features, stratified_kfold,
};
use mdelm_core::datasets::{load_csv, synth_blobs, Dataset, SynthSpec};
use mdelm_core::detector::{detect, run_ensemble, ScoreReport};
use mdelm_core::elm::{make_hidden_layer, Standardizer};
use mdelm_core::encoding::{encode_dataset, fit_schema, read_records, EncodingSchema, RawRecord, VariableSpec};
use mdelm_core::model::{ElmModel, Readout};
use mdelm_core::rng::derive_seed;
use mdelm_core::stats::{mean, welch_t, WelchTest};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;

type CliResult<T = ()> = Result<T, CliError>;

fn read_text(path: &Path, what: &str) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::validation(format!("cannot read {what} {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::runtime(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

/// `d.csv` -> `d.<suffix>`.
fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

fn load_dataset(path: &Path, n_classes: Option<usize>) -> CliResult<Dataset> {
    if !path.exists() {
        return Err(CliError::validation(format!("data file {} does not exist", path.display())));
    }
    load_csv(path, n_classes).map_err(|e| CliError::context(path.display(), e))
}

fn out_dir(flag: Option<PathBuf>, config: &RunConfig) -> CliResult<PathBuf> {
    flag.or_else(|| config.io.out_dir.clone())
        .ok_or_else(|| CliError::validation("an output directory is required (--out-dir or io.out_dir)"))
}

pub struct SynthArgs {
    pub classes: usize,
    pub per_class: usize,
    pub minority: Option<usize>,
    pub dim: usize,
    pub noise: usize,
    pub spread: f64,
    pub flip: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub clean_out: Option<PathBuf>,
}

pub fn cmd_synth(a: SynthArgs) -> CliResult {
    let mut per_class = vec![a.per_class; a.classes];
    if let (Some(m), Some(last)) = (a.minority, per_class.last_mut()) {
        *last = m;
    }
    let spec = SynthSpec {
        per_class,
        dim: a.dim,
        spread: a.spread,
        noise_features: a.noise,
        flip_fraction: a.flip,
        seed: a.seed,
    };
    spec.validate()?;
    let out = synth_blobs(&spec)?;
    out.flipped.write_csv(create(&a.out)?)?;
    write_json(&sidecar(&a.out, "truth.json"), &out.truth)?;
    write_json(&sidecar(&a.out, "config.json"), &spec)?;
    if let Some(clean) = &a.clean_out {
        out.clean.write_csv(create(clean)?)?;
    }
    info!(
        "wrote {} samples ({} hidden flips) to {}",
        out.flipped.n_samples(),
        out.truth.hidden_flips.len(),
        a.out.display()
    );
    Ok(())
}

pub struct EncodeArgs {
    pub input: PathBuf,
    pub config: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub spec: Option<PathBuf>,
    pub label_column: Option<String>,
    pub classes: Option<usize>,
    pub fit_schema: bool,
    pub out: PathBuf,
}

#[derive(Serialize)]
struct EncodeEcho<'a> {
    input: &'a Path,
    schema: Option<&'a Path>,
    spec: Option<&'a Path>,
    label_column: Option<&'a str>,
    schema_hash: String,
    n_features: usize,
}

fn parse_labels(records: &[RawRecord], column: &str, n_classes: Option<usize>) -> CliResult<(Vec<usize>, usize)> {
    let mut labels = Vec::with_capacity(records.len());
    for r in records {
        let raw = r
            .get(column)
            .map(|v| v.as_category())
            .ok_or_else(|| CliError::validation(format!("record `{}` has no label in column `{column}`", r.id)))?;
        let label: usize = raw
            .parse::<f64>()
            .ok()
            .filter(|x| x.fract() == 0.0 && *x >= 0.0)
            .map(|x| x as usize)
            .ok_or_else(|| CliError::validation(format!("record `{}`: label `{raw}` is not a class index", r.id)))?;
        labels.push(label);
    }
    let c = n_classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
    Ok((labels, c))
}

pub fn cmd_encode(a: EncodeArgs) -> CliResult {
    let config = RunConfig::load_or_default(a.config.as_deref())?;
    let schema_path = a.schema.or(config.encoding.schema.clone());
    let spec_path = a.spec.or(config.encoding.spec.clone());
    let label_column = a.label_column.or(config.encoding.label_column.clone());

    if !a.input.exists() {
        return Err(CliError::validation(format!("input file {} does not exist", a.input.display())));
    }
    let records = read_records(&a.input).map_err(|e| CliError::context(a.input.display(), e))?;
    let schema = match (&schema_path, &spec_path) {
        (Some(path), _) => EncodingSchema::from_json(&read_text(path, "schema file")?)
            .map_err(|e| CliError::context(path.display(), e))?,
        (None, Some(path)) => {
            let specs: Vec<VariableSpec> = serde_json::from_str(&read_text(path, "spec file")?)
                .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
            fit_schema(&records, &specs)?
        }
        (None, None) => return Err(CliError::validation("encode needs --schema or --spec")),
    };
    if let Some(col) = &label_column {
        if schema.variables.iter().any(|v| &v.name == col) {
            return Err(CliError::validation(format!("label column `{col}` is also an encoded variable")));
        }
    }
    let features = encode_dataset(&records, &schema)?;
    match &label_column {
        Some(col) => {
            let (labels, c) = parse_labels(&records, col, a.classes)?;
            Dataset::new(features.clone(), labels, c)?.write_csv(create(&a.out)?)?;
        }
        None => features.write_csv(create(&a.out)?)?,
    }
    if a.fit_schema {
        write_text(&sidecar(&a.out, "schema.json"), &(schema.to_json()? + "\n"))?;
    }
    write_json(
        &sidecar(&a.out, "config.json"),
        &EncodeEcho {
            input: &a.input,
            schema: schema_path.as_deref(),
            spec: spec_path.as_deref(),
            label_column: label_column.as_deref(),
            schema_hash: schema.hash(),
            n_features: features.n_features(),
        },
    )?;
    info!(
        "encoded {} records into {} features",
        features.n_samples(),
        features.n_features()
    );
    Ok(())
}

#[derive(Default)]
pub struct TrainOverrides {
    pub seed: Option<u64>,
    pub n_sigmoid: Option<usize>,
    pub n_rbf: Option<usize>,
    pub no_passthrough: bool,
    pub lambda: Option<f64>,
    pub alpha_grid: Option<Vec<f64>>,
    pub l1_ratio: Option<f64>,
    pub folds: Option<usize>,
    pub epochs: Option<usize>,
    pub uniform_weights: bool,
}

impl TrainOverrides {
    fn apply(self, c: &mut RunConfig) {
        if let Some(s) = self.seed {
            c.elm.seed = s;
            c.classifier.seed = s;
        }
        if let Some(v) = self.n_sigmoid {
            c.elm.n_sigmoid = v;
        }
        if let Some(v) = self.n_rbf {
            c.elm.n_rbf = v;
        }
        if self.no_passthrough {
            c.elm.passthrough = false;
        }
        if let Some(v) = self.lambda {
            c.elm.lambda = v;
        }
        if let Some(v) = self.alpha_grid {
            c.classifier.alpha_grid = v;
        }
        if let Some(v) = self.l1_ratio {
            c.classifier.l1_ratio = v;
        }
        if let Some(v) = self.folds {
            c.classifier.k_folds = v;
        }
        if let Some(v) = self.epochs {
            c.classifier.epochs = v;
        }
        if self.uniform_weights {
            c.classifier.balanced = false;
        }
    }
}

pub struct TrainArgs {
    pub data: PathBuf,
    pub config: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub classes: Option<usize>,
    pub overrides: TrainOverrides,
}

/// Written by `train`, read by `detect`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectedFeatures {
    /// Input columns whose passthrough weight is nonzero, in input order.
    pub input_features: Vec<String>,
    /// All selected hidden-layer columns (inputs first when passed through).
    pub hidden_indices: Vec<usize>,
    pub n_hidden: usize,
}

#[derive(Serialize)]
struct TrainMetrics {
    balanced_accuracy: f64,
    accuracy: f64,
    recall: Vec<Option<f64>>,
    alpha: f64,
    n_selected: usize,
    n_hidden: usize,
    cv_warnings: Vec<String>,
}

pub fn cmd_train(a: TrainArgs) -> CliResult {
    let mut config = RunConfig::load_or_default(a.config.as_deref())?;
    a.overrides.apply(&mut config);
    config.validate()?;
    let dir = out_dir(a.out_dir, &config)?;
    let data = load_dataset(&a.data, a.classes)?;
    let c = data.n_classes;

    let standardizer = Standardizer::fit(data.x());
    let x = standardizer.transform(data.x())?;
    let hidden = config.elm.hidden();
    let layer = make_hidden_layer(x.ncols(), &hidden, config.elm.seed, Some(&x))?;
    let h = layer.transform(&x)?;

    let weights = if config.classifier.balanced {
        balanced_class_weights(&data.labels, c)?
    } else {
        vec![1.0; data.n_samples()]
    };
    let plan = stratified_kfold(&data.labels, config.classifier.k_folds, derive_seed(config.classifier.seed, 0))?;
    for w in &plan.warnings {
        warn!("{w}");
    }
    let fit = fit_elasticnet_sgd(
        &h,
        &data.labels,
        c,
        &weights,
        &plan,
        &config.classifier.elasticnet(),
        derive_seed(config.classifier.seed, 1),
    )?;
    let cm = confusion_matrix(&data.labels, &fit.oof_predictions, c)?;
    let hidden_indices = selected_features(&fit.model);
    let n_inputs = if hidden.passthrough { x.ncols() } else { 0 };
    let selected = SelectedFeatures {
        input_features: hidden_indices
            .iter()
            .filter(|&&j| j < n_inputs)
            .map(|&j| data.features.feature_names[j].clone())
            .collect(),
        hidden_indices: hidden_indices.clone(),
        n_hidden: h.ncols(),
    };
    let metrics = TrainMetrics {
        balanced_accuracy: cm.balanced_accuracy(),
        accuracy: cm.accuracy(),
        recall: cm.recall(),
        alpha: fit.model.alpha,
        n_selected: hidden_indices.len(),
        n_hidden: h.ncols(),
        cv_warnings: plan.warnings.clone(),
    };
    let model = ElmModel::new(
        data.features.feature_names.clone(),
        c,
        standardizer,
        layer,
        Readout::ElasticNet(fit.model.clone()),
    );

    write_text(&dir.join("model.json"), &(model.to_json()? + "\n"))?;
    write_text(&dir.join("confusion.csv"), &cm.to_csv())?;
    write_text(&dir.join("cv.csv"), &fit.cv_csv())?;
    write_json(&dir.join("selected_features.json"), &selected)?;
    write_json(&dir.join("metrics.json"), &metrics)?;
    write_text(&dir.join("config.resolved.json"), &(config.to_json() + "\n"))?;
    info!(
        "balanced accuracy {:.4} (alpha {}), {} of {} hidden columns selected",
        metrics.balanced_accuracy,
        metrics.alpha,
        metrics.n_selected,
        metrics.n_hidden
    );
    Ok(())
}

#[derive(Default)]
pub struct DetectOverrides {
    pub models: Option<usize>,
    pub target_score: Option<f64>,
    pub max_iterations: Option<u64>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub focus_class: Option<usize>,
    pub no_focus: bool,
    pub quantiles: Option<Vec<f64>>,
    pub feature_subset_size: Option<usize>,
}

impl DetectOverrides {
    fn apply(self, c: &mut RunConfig) {
        let d = &mut c.detector;
        if let Some(v) = self.models {
            d.n_models = v;
        }
        if let Some(v) = self.target_score {
            d.target_artificial_score = v;
        }
        if let Some(v) = self.max_iterations {
            d.max_iterations = v;
        }
        if let Some(v) = self.seed {
            d.master_seed = v;
        }
        if let Some(v) = self.focus_class {
            d.focus_class = Some(v);
        }
        if self.no_focus {
            d.focus_class = None;
            d.n_other = None;
        }
        if let Some(v) = self.quantiles {
            d.quantiles = v;
        }
        if let Some(v) = self.feature_subset_size {
            d.feature_subset_size = Some(v);
        }
        if let Some(v) = self.jobs {
            c.io.jobs = Some(v);
        }
    }
}

pub struct DetectArgs {
    pub data: PathBuf,
    pub config: Option<PathBuf>,
    pub selected: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub classes: Option<usize>,
    pub overrides: DetectOverrides,
}

/// Hidden-flip scores against all other scored samples.
#[derive(Debug, Serialize, Deserialize)]
pub struct TruthCheck {
    pub n_hidden_flips: usize,
    pub hidden_flip_mean: f64,
    pub clean_mean: f64,
    pub artificial_mean: f64,
    pub welch: Option<WelchTest>,
    pub detected_hidden_flips: Vec<(f64, usize)>,
}

fn truth_check(report: &ScoreReport, truth_path: &Path) -> CliResult<TruthCheck> {
    let truth: mdelm_core::datasets::SynthTruth = serde_json::from_str(&read_text(truth_path, "truth file")?)
        .map_err(|e| CliError::validation(format!("{}: {e}", truth_path.display())))?;
    let hidden: HashSet<&str> = truth.hidden_flips.iter().map(|f| f.id.as_str()).collect();
    let (mut flips, mut clean) = (Vec::new(), Vec::new());
    for (id, s) in report.sample_ids.iter().zip(&report.mean_scores) {
        if let Some(s) = s {
            if hidden.contains(id.as_str()) {
                flips.push(*s);
            } else {
                clean.push(*s);
            }
        }
    }
    let avg = |v: &[f64]| if v.is_empty() { f64::NAN } else { mean(v) };
    Ok(TruthCheck {
        n_hidden_flips: hidden.len(),
        hidden_flip_mean: avg(&flips),
        clean_mean: avg(&clean),
        artificial_mean: report.artificial_mean,
        welch: welch_t(&flips, &clean).ok(),
        detected_hidden_flips: report
            .thresholds
            .iter()
            .map(|t| (t.quantile, t.detected.iter().filter(|id| hidden.contains(id.as_str())).count()))
            .collect(),
    })
}

pub fn cmd_detect(a: DetectArgs) -> CliResult {
    let mut config = RunConfig::load_or_default(a.config.as_deref())?;
    a.overrides.apply(&mut config);
    config.validate()?;
    let dir = out_dir(a.out_dir, &config)?;
    let mut data = load_dataset(&a.data, a.classes)?;

    if let Some(path) = &a.selected {
        let selected: SelectedFeatures = serde_json::from_str(&read_text(path, "selected-features file")?)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        if selected.input_features.is_empty() {
            return Err(CliError::validation(format!("{} selects no input features", path.display())));
        }
        let names = &data.features.feature_names;
        let cols = selected
            .input_features
            .iter()
            .map(|f| {
                names
                    .iter()
                    .position(|n| n == f)
                    .ok_or_else(|| CliError::validation(format!("selected feature `{f}` is not in {}", a.data.display())))
            })
            .collect::<CliResult<Vec<_>>>()?;
        data = data.select_columns(&cols)?;
        info!("using {} selected input features", cols.len());
    }

    let detector = config.detector();
    let jobs = config.jobs();
    info!("running {} models on {} threads", detector.n_models, jobs);
    let report = run_ensemble(&data, &detector, jobs)?;
    for w in &report.warnings {
        warn!("{w}");
    }

    write_text(&dir.join("report.json"), &(report.to_json()? + "\n"))?;
    report.write_csv(create(&dir.join("scores.csv"))?)?;
    write_text(&dir.join("config.resolved.json"), &(config.to_json() + "\n"))?;
    if let Some(truth) = &a.truth {
        let check = truth_check(&report, truth)?;
        if let Some(w) = &check.welch {
            info!(
                "hidden flips {:.2} vs clean {:.2}, welch p = {:e}",
                check.hidden_flip_mean, check.clean_mean, w.p_value
            );
        }
        write_json(&dir.join("truth_check.json"), &check)?;
    }
    info!("artificial mean score {:.2}", report.artificial_mean);
    if let Some(w) = &report.welch {
        info!("artificial vs background welch p = {:e}", w.p_value);
    }
    for t in &report.thresholds {
        info!("quantile {}: {} detected", t.quantile, t.detected.len());
    }
    Ok(())
}

pub struct ReportArgs {
    pub scores: PathBuf,
    pub quantile: f64,
    pub out: PathBuf,
}

#[derive(Serialize)]
struct ReportEcho<'a> {
    scores: &'a Path,
    quantile: f64,
}

pub fn cmd_report(a: ReportArgs) -> CliResult {
    let report = ScoreReport::from_json(&read_text(&a.scores, "score report")?)
        .map_err(|e| CliError::context(a.scores.display(), e))?;
    let detected = detect(&report, a.quantile)?;
    let index: std::collections::HashMap<&str, usize> =
        report.sample_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let threshold = report
        .thresholds
        .iter()
        .find(|t| (t.quantile - a.quantile).abs() < 1e-12)
        .and_then(|t| t.threshold);

    let io = |e: std::io::Error| CliError::runtime(e.to_string());
    let mut w = create(&a.out)?;
    let mut csv = String::from("kind,index,id,value\n");
    let mut k = 0;
    for (i, id) in report.sample_ids.iter().enumerate() {
        if report.focus_class.is_some_and(|c| report.labels[i] != c) {
            continue;
        }
        if let Some(s) = report.mean_scores[i] {
            csv.push_str(&format!("sample,{k},{id},{s}\n"));
            k += 1;
        }
    }
    for t in &report.thresholds {
        let value = t.threshold.map(|v| v.to_string()).unwrap_or_default();
        csv.push_str(&format!("threshold,,q{},{value}\n", t.quantile));
    }
    w.write_all(csv.as_bytes()).map_err(io)?;
    w.flush().map_err(io)?;
    write_json(
        &sidecar(&a.out, "config.json"),
        &ReportEcho {
            scores: &a.scores,
            quantile: a.quantile,
        },
    )?;

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match threshold {
        Some(t) => writeln!(out, "quantile {}  threshold {t:.4}  detected {}", a.quantile, detected.len()).map_err(io)?,
        None => writeln!(out, "quantile {}  no threshold (degenerate scores)", a.quantile).map_err(io)?,
    }
    writeln!(out, "{:>5}  {:<20} {:>5} {:>12}", "rank", "id", "label", "score").map_err(io)?;
    for (rank, id) in detected.iter().enumerate() {
        let i = index[id.as_str()];
        let score = report.mean_scores[i].unwrap_or(f64::NAN);
        writeln!(out, "{:>5}  {:<20} {:>5} {:>12.4}", rank + 1, id, report.labels[i], score).map_err(io)?;
    }
    Ok(())
}
