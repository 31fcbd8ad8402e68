//! Experiment configuration, repeated runs, comparison tables and the
//! report files written by the command-line tool.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::Duration;
use serde::{Deserialize, Serialize};

use crate::cells::{CellKind, MixtureDims, ModelDescription};
use crate::checkpoint;
use crate::data::{
    self, bundled_corpus, generate_synthetic, read_dataset_dump, read_hourly_csv, split_fraction,
    split_half, tokenize_corpus, window_timeseries, SequenceSample,
};
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::mixture::Similarity;
use crate::model::{language_model_description, regression_description, Model};
use crate::train::{self, EpochReport, LossKind, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Synthetic,
    TimeseriesCsv,
    LanguageModel,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Synthetic => "synthetic",
            Task::TimeseriesCsv => "timeseries-csv",
            Task::LanguageModel => "language-model",
        }
    }

    fn default_metric(self) -> Metric {
        match self {
            Task::Synthetic => Metric::Mae,
            Task::TimeseriesCsv => Metric::Rmae,
            Task::LanguageModel => Metric::Perplexity,
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synthetic" => Ok(Task::Synthetic),
            "timeseries-csv" => Ok(Task::TimeseriesCsv),
            "language-model" => Ok(Task::LanguageModel),
            other => Err(config_err(
                "task",
                format!("unknown task `{other}` (expected synthetic, timeseries-csv or language-model)"),
            )),
        }
    }
}

/// How a cell receives its retrieval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixtureMode {
    None,
    Single,
    Bucketed,
}

impl MixtureMode {
    fn prefix(self) -> &'static str {
        match self {
            MixtureMode::None => "",
            MixtureMode::Single => "m-",
            MixtureMode::Bucketed => "pm-",
        }
    }
}

impl std::str::FromStr for MixtureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(MixtureMode::None),
            "single" => Ok(MixtureMode::Single),
            "bucketed" => Ok(MixtureMode::Bucketed),
            other => Err(config_err(
                "mixture",
                format!("unknown mixture `{other}` (expected none, single or bucketed)"),
            )),
        }
    }
}

/// Model label such as `lstm`, `m-lstm` or `pm-gru`.
pub fn variant_label(cell: CellKind, mode: MixtureMode) -> String {
    format!("{}{}", mode.prefix(), cell.name())
}

fn config_err(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    pub model: CellKind,
    /// Variants to train side by side.
    pub mixture: Vec<MixtureMode>,
    pub similarity: Similarity,
    pub hidden: usize,
    /// Token embedding width (language models).
    pub embed: usize,
    /// Prototype dimension.
    pub m: usize,
    /// Number of prototypes.
    pub n: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
    pub init_range: (f64, f64),
    pub validation_fraction: f64,
    pub repeats: usize,
    pub metric: Option<Metric>,
    /// Score the test split after every epoch, not only at the end.
    pub monitor: bool,
    pub out: Option<PathBuf>,
    /// Dataset file: a dump for `synthetic`, an hourly CSV, or a corpus.
    pub data: Option<PathBuf>,
    /// Synthetic sequence count `N` and length `M`.
    pub sequences: usize,
    pub length: usize,
    /// Days of history per time-series sample, and trailing test days.
    pub history_days: usize,
    pub test_days: usize,
    pub vocab: usize,
    /// Fraction of documents held out as the language-model test split.
    pub test_fraction: f64,
    pub checkpoints: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            task: Task::Synthetic,
            model: CellKind::Lstm,
            mixture: vec![MixtureMode::None, MixtureMode::Single, MixtureMode::Bucketed],
            similarity: Similarity::Cosine,
            hidden: 8,
            embed: 32,
            m: 4,
            n: 3,
            epochs: 10,
            batch: train::DEFAULT_BATCH_SIZE,
            lr: train::DEFAULT_LEARNING_RATE,
            seed: 1,
            init_range: train::DEFAULT_INIT_RANGE,
            validation_fraction: 0.0,
            repeats: 5,
            metric: None,
            monitor: true,
            out: None,
            data: None,
            sequences: 25_600,
            length: 128,
            history_days: 56,
            test_days: 7,
            vocab: 10_000,
            test_fraction: 0.2,
            checkpoints: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| config_err("config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn metric(&self) -> Metric {
        self.metric.unwrap_or(self.task.default_metric())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: usize| {
            if v == 0 {
                Err(config_err(field, format!("{field} ≥ 1")))
            } else {
                Ok(())
            }
        };
        positive("epochs", self.epochs)?;
        positive("batch", self.batch)?;
        positive("hidden", self.hidden)?;
        positive("repeats", self.repeats)?;
        if self.mixture.is_empty() {
            return Err(config_err("mixture", "name at least one variant"));
        }
        let mut seen = self.mixture.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.mixture.len() {
            return Err(config_err("mixture", "variants repeat"));
        }
        if self.mixture.iter().any(|&m| m != MixtureMode::None) {
            positive("m", self.m)?;
            positive("n", self.n)?;
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(config_err("lr", "learning rate must be positive"));
        }
        let metric_ok = matches!(
            (self.task, self.metric()),
            (Task::LanguageModel, Metric::Perplexity)
                | (Task::Synthetic | Task::TimeseriesCsv, Metric::Mae | Metric::Rmae)
        );
        if !metric_ok {
            return Err(config_err(
                "metric",
                format!("{} does not apply to the {} task", self.metric().name(), self.task.name()),
            ));
        }
        match self.task {
            Task::Synthetic => {
                if self.data.is_none() {
                    positive("sequences", self.sequences)?;
                    if self.sequences < 2 {
                        return Err(config_err("sequences", "need at least two sequences"));
                    }
                    if self.length < 2 {
                        return Err(config_err("length", "length ≥ 2"));
                    }
                }
            }
            Task::TimeseriesCsv => {
                positive("history-days", self.history_days)?;
                positive("test-days", self.test_days)?;
                if self.data.is_none() {
                    return Err(config_err("data", "the timeseries-csv task needs --data"));
                }
            }
            Task::LanguageModel => {
                positive("embed", self.embed)?;
                if self.vocab < 2 {
                    return Err(config_err("vocab", "vocab ≥ 2"));
                }
                if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
                    return Err(config_err("test-fraction", "must lie in (0, 1)"));
                }
            }
        }
        self.train_config(0).validate()
    }

    pub fn train_config(&self, repeat: usize) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch,
            seed: self.repeat_seed(repeat),
            init_range: self.init_range,
            learning_rate: self.lr,
            loss: match self.task {
                Task::LanguageModel => LossKind::CrossEntropy,
                _ => LossKind::L1,
            },
            validation_fraction: self.validation_fraction,
            metric: Some(self.metric()),
        }
    }

    pub fn repeat_seed(&self, repeat: usize) -> u64 {
        self.seed.wrapping_add(repeat as u64)
    }
}

/// Train/test splits and everything a model needs to know about them.
#[derive(Clone, Debug)]
pub struct TaskData {
    pub train: Vec<SequenceSample>,
    pub test: Vec<SequenceSample>,
    pub input_width: usize,
    pub buckets: usize,
    pub vocab: Option<usize>,
    /// Non-fatal notes, e.g. forward-filled gaps.
    pub warnings: Vec<String>,
}

fn max_bucket(samples: &[SequenceSample]) -> usize {
    samples.iter().map(|s| s.bucket).max().unwrap_or(1)
}

/// Build the dataset described by `config`; splits depend only on
/// `config.seed`.
pub fn build_dataset(config: &ExperimentConfig) -> Result<TaskData> {
    match config.task {
        Task::Synthetic => {
            let samples = match &config.data {
                Some(path) => {
                    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
                    read_dataset_dump(f)?
                }
                None => generate_synthetic(config.sequences, config.length)?,
            };
            if samples.len() < 2 {
                return Err(Error::Data("need at least two sequences".into()));
            }
            if samples.iter().any(|s| s.bucket == 0) {
                return Err(Error::Data("bucket ids are 1-based".into()));
            }
            let buckets = max_bucket(&samples);
            let (test, train) = split_half(&samples, config.seed);
            Ok(TaskData {
                train,
                test,
                input_width: 1,
                buckets,
                vocab: None,
                warnings: Vec::new(),
            })
        }
        Task::TimeseriesCsv => {
            let path = config
                .data
                .as_ref()
                .ok_or_else(|| config_err("data", "the timeseries-csv task needs --data"))?;
            let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
            let (series, warn) = read_hourly_csv(f, &path.display().to_string())?;
            let windows = window_timeseries(&series, config.history_days)?;
            let last = *windows.target_times.last().expect("non-empty windows");
            let cutoff = last - Duration::hours(24 * config.test_days as i64);
            let (mut train, mut test) = (Vec::new(), Vec::new());
            for (s, t) in windows.samples.into_iter().zip(&windows.target_times) {
                if *t > cutoff {
                    test.push(s);
                } else {
                    train.push(s);
                }
            }
            if train.is_empty() {
                return Err(Error::Data("no training windows before the test days".into()));
            }
            let mut warnings = Vec::new();
            if warn.filled_values + warn.filled_hours > 0 {
                warnings.push(format!(
                    "forward-filled {} missing values and {} absent hours",
                    warn.filled_values, warn.filled_hours
                ));
            }
            warnings.push(format!("skipped {} hours without full history", windows.skipped));
            Ok(TaskData {
                train,
                test,
                input_width: 3,
                buckets: 2,
                vocab: None,
                warnings,
            })
        }
        Task::LanguageModel => {
            let docs = match &config.data {
                Some(path) => data::read_corpus_file(path)?,
                None => bundled_corpus(),
            };
            let (test_docs, train_docs) = split_fraction(&docs, config.test_fraction, config.seed);
            if test_docs.is_empty() || train_docs.is_empty() {
                return Err(Error::Data("corpus too small to split".into()));
            }
            let corpus = tokenize_corpus(&train_docs, config.vocab)?;
            let test = corpus.encode(&test_docs)?;
            Ok(TaskData {
                buckets: corpus.groups.len(),
                vocab: Some(corpus.vocabulary.len()),
                input_width: config.embed,
                train: corpus.samples,
                test,
                warnings: Vec::new(),
            })
        }
    }
}

pub fn describe(config: &ExperimentConfig, data: &TaskData, mode: MixtureMode) -> ModelDescription {
    let mixture = (mode != MixtureMode::None).then_some(MixtureDims {
        m: config.m,
        n: config.n,
        buckets: data.buckets,
        bucketed: mode == MixtureMode::Bucketed,
        similarity: config.similarity,
    });
    match data.vocab {
        Some(v) => language_model_description(config.model, config.hidden, config.embed, v, mixture),
        None => regression_description(config.model, config.hidden, data.input_width, mixture),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub repeat: usize,
    pub seed: u64,
    pub initial_metric: f64,
    pub initial_dispersion: Option<f64>,
    /// `None` when the repeat diverged.
    pub final_metric: Option<f64>,
    pub final_dispersion: Option<f64>,
    pub diverged: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub repeat: usize,
    #[serde(flatten)]
    pub report: EpochReport,
}

/// Everything produced by one model variant across its repeats.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub label: String,
    pub task: Task,
    pub metric: Metric,
    pub config: ExperimentConfig,
    pub description: ModelDescription,
    pub rows: Vec<EpochRow>,
    pub repeats: Vec<RepeatSummary>,
    /// Mean final metric over repeats that did not diverge.
    pub mean_final: f64,
    pub seeds: Vec<u64>,
    /// Not serialized so report files stay byte-reproducible.
    #[serde(skip)]
    pub wall_clock_seconds: f64,
    #[serde(skip)]
    pub models: Vec<Model>,
}

impl RunReport {
    pub fn finals(&self) -> Vec<f64> {
        self.repeats.iter().filter_map(|r| r.final_metric).collect()
    }

    /// Repeat-averaged `(initial, final)` dispersion.
    pub fn mean_dispersion(&self) -> Option<(f64, f64)> {
        let pairs: Option<Vec<(f64, f64)>> = self
            .repeats
            .iter()
            .filter(|r| r.diverged.is_none())
            .map(|r| Some((r.initial_dispersion?, r.final_dispersion?)))
            .collect();
        let pairs = pairs.filter(|p| !p.is_empty())?;
        let n = pairs.len() as f64;
        Some((
            pairs.iter().map(|p| p.0).sum::<f64>() / n,
            pairs.iter().map(|p| p.1).sum::<f64>() / n,
        ))
    }

    /// Repeat-averaged `(initial, final)` metric.
    pub fn mean_metric_change(&self) -> (f64, f64) {
        let ok: Vec<&RepeatSummary> = self.repeats.iter().filter(|r| r.final_metric.is_some()).collect();
        let n = ok.len() as f64;
        (
            ok.iter().map(|r| r.initial_metric).sum::<f64>() / n,
            ok.iter().filter_map(|r| r.final_metric).sum::<f64>() / n,
        )
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Train one variant `config.repeats` times.
pub fn run_variant(config: &ExperimentConfig, data: &TaskData, mode: MixtureMode) -> Result<RunReport> {
    let started = Instant::now();
    let desc = describe(config, data, mode);
    let metric = config.metric();
    let mut rows = Vec::new();
    let mut repeats = Vec::new();
    let mut models = Vec::new();
    for r in 0..config.repeats {
        let cfg = config.train_config(r);
        let mut model = train::init_params(desc, cfg.seed, cfg.init_range)?;
        let initial_metric = model.evaluate(&data.test, metric)?;
        let initial_dispersion = model.dispersion();
        let monitor = config.monitor.then_some(&data.test[..]);
        let summary = match train::train(&mut model, &data.train, &cfg, monitor) {
            Ok(outcome) => {
                rows.extend(outcome.reports.into_iter().map(|report| EpochRow { repeat: r + 1, report }));
                let final_metric = model.evaluate(&data.test, metric)?;
                models.push(model.clone());
                RepeatSummary {
                    repeat: r + 1,
                    seed: cfg.seed,
                    initial_metric,
                    initial_dispersion,
                    final_metric: Some(final_metric),
                    final_dispersion: model.dispersion(),
                    diverged: None,
                }
            }
            Err(e @ Error::Diverged { .. }) => RepeatSummary {
                repeat: r + 1,
                seed: cfg.seed,
                initial_metric,
                initial_dispersion,
                final_metric: None,
                final_dispersion: None,
                diverged: Some(e.to_string()),
            },
            Err(e) => return Err(e),
        };
        repeats.push(summary);
    }
    let finals: Vec<f64> = repeats.iter().filter_map(|r| r.final_metric).collect();
    if finals.is_empty() {
        let first = repeats[0].diverged.clone().unwrap_or_default();
        return Err(Error::Metric(format!("every repeat diverged ({first})")));
    }
    Ok(RunReport {
        label: variant_label(config.model, mode),
        task: config.task,
        metric,
        config: config.clone(),
        description: desc,
        rows,
        seeds: repeats.iter().map(|r| r.seed).collect(),
        mean_final: mean(&finals),
        repeats,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        models,
    })
}

/// Build the dataset once and train every configured variant.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunReport>> {
    config.validate()?;
    let data = build_dataset(config)?;
    run_experiment_on(config, &data)
}

pub fn run_experiment_on(config: &ExperimentConfig, data: &TaskData) -> Result<Vec<RunReport>> {
    config.validate()?;
    config
        .mixture
        .iter()
        .map(|&mode| run_variant(config, data, mode))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub mean: f64,
    pub repeats: usize,
    pub best: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub task: Task,
    pub metric: Metric,
    pub rows: Vec<ComparisonRow>,
}

/// Model-by-metric table; the lowest mean is flagged best.
pub fn compare(reports: &[RunReport]) -> Result<Comparison> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Compare("no reports".into()))?;
    for r in reports {
        if r.task != first.task {
            return Err(Error::Compare(format!(
                "mixed tasks: {} and {}",
                first.task.name(),
                r.task.name()
            )));
        }
        if r.metric != first.metric {
            return Err(Error::Compare(format!(
                "mixed metrics: {} and {}",
                first.metric.name(),
                r.metric.name()
            )));
        }
    }
    let mut labels: Vec<&str> = reports.iter().map(|r| r.label.as_str()).collect();
    labels.sort_unstable();
    if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Compare(format!("model `{}` appears more than once", w[0])));
    }
    let best = reports.iter().map(|r| r.mean_final).fold(f64::INFINITY, f64::min);
    Ok(Comparison {
        task: first.task,
        metric: first.metric,
        rows: reports
            .iter()
            .map(|r| ComparisonRow {
                model: r.label.clone(),
                mean: r.mean_final,
                repeats: r.finals().len(),
                best: r.mean_final == best,
            })
            .collect(),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl Comparison {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["model", "metric", "mean", "repeats", "best"])?;
        for r in &self.rows {
            w.write_record([
                r.model.clone(),
                self.metric.name().to_string(),
                r.mean.to_string(),
                r.repeats.to_string(),
                r.best.to_string(),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Data(e.to_string()))?).expect("utf8"))
    }

    /// Aligned text with the best row starred.
    pub fn to_text(&self) -> String {
        let header = self.metric.name().to_uppercase();
        let width = self.rows.iter().map(|r| r.model.len()).max().unwrap_or(0).max(5);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>10}", "model", header);
        for r in &self.rows {
            let mark = if r.best { " *" } else { "" };
            let _ = writeln!(out, "{:<width$}  {:>10.4}{mark}", r.model, r.mean);
        }
        out
    }
}

/// Per-epoch rows for every report: `model,repeat,epoch,train_loss,eval_metric,dispersion`.
pub fn epoch_csv(reports: &[RunReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "repeat", "epoch", "train_loss", "eval_metric", "dispersion"])?;
    for rep in reports {
        for row in &rep.rows {
            w.write_record([
                rep.label.clone(),
                row.repeat.to_string(),
                row.report.epoch.to_string(),
                row.report.train_loss.to_string(),
                opt(row.report.eval_metric),
                opt(row.report.dispersion),
            ])?;
        }
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Data(e.to_string()))?).expect("utf8"))
}

pub fn manifest(reports: &[RunReport]) -> Result<String> {
    let mut out = String::new();
    if let Some(first) = reports.first() {
        let _ = writeln!(out, "config:\n{}", serde_json::to_string_pretty(&first.config)?);
    }
    for r in reports {
        let desc = serde_json::to_string(&r.description)?;
        let _ = writeln!(out, "\nmodel {}: {desc}", r.label);
        let _ = writeln!(out, "parameters: {:?}", crate::cells::parameter_count(&r.description));
        let seeds: Vec<String> = r.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "seeds: {}", seeds.join(" "));
        for s in &r.repeats {
            match (&s.diverged, s.final_metric) {
                (Some(msg), _) => {
                    let _ = writeln!(out, "repeat {}: aborted ({msg})", s.repeat);
                }
                (None, Some(m)) => {
                    let _ = writeln!(out, "repeat {}: {} {m}", s.repeat, r.metric.name());
                }
                (None, None) => {}
            }
        }
        let _ = writeln!(out, "mean {}: {}", r.metric.name(), r.mean_final);
    }
    Ok(out)
}

fn write(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Write `report.csv`, `summary.csv`, `summary.txt`, `runs.json`,
/// `manifest.txt` and (optionally) one checkpoint per repeat.
pub fn write_outputs(reports: &[RunReport], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let table = compare(reports)?;
    let mut files = vec![
        write(dir, "report.csv", epoch_csv(reports)?.as_bytes())?,
        write(dir, "summary.csv", table.to_csv()?.as_bytes())?,
        write(dir, "summary.txt", table.to_text().as_bytes())?,
        write(dir, "runs.json", serde_json::to_string_pretty(reports)?.as_bytes())?,
        write(dir, "manifest.txt", manifest(reports)?.as_bytes())?,
    ];
    if reports.first().is_some_and(|r| r.config.checkpoints) {
        let ckdir = dir.join("checkpoints");
        std::fs::create_dir_all(&ckdir).map_err(|e| Error::io(&ckdir, e))?;
        for r in reports {
            let trained = r.repeats.iter().filter(|s| s.diverged.is_none());
            for (s, model) in trained.zip(&r.models) {
                let path = ckdir.join(format!("{}-r{}.ckpt", r.label, s.repeat));
                checkpoint::emit_checkpoint(model, &path)?;
                files.push(path);
            }
        }
    }
    Ok(files)
}

/// Read reports previously written as `runs.json`.
pub fn read_reports(path: &Path) -> Result<Vec<RunReport>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

impl Error {
    /// Process exit code: 1 config, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Compare(_) | Error::Json(_) => 1,
            Error::Data(_)
            | Error::MalformedRow { .. }
            | Error::Io { .. }
            | Error::Csv(_)
            | Error::NotACheckpoint
            | Error::CheckpointVersion { .. }
            | Error::TruncatedCheckpoint
            | Error::CheckpointShape(_)
            | Error::UnknownBucket { .. }
            | Error::MissingBucket
            | Error::EmptySequence
            | Error::TargetOutOfRange { .. } => 2,
            _ => 3,
        }
    }
}
