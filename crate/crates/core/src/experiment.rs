//! End-to-end runs driven by one JSON config: corpus, preparation,
//! training (optionally tuned), evaluation and artifacts.
//!
//! Every random choice descends from the top-level `seed`:
//!
//! | stream | seed |
//! |---|---|
//! | synthetic corpus | `derive_seed(seed, 0)` |
//! | splits | `derive_seed(seed, 1)` |
//! | weight init | `derive_seed(seed, 2)` |
//! | shuffling and dropout | `derive_seed(seed, 3)` |
//! | tuner proposals | `derive_seed(seed, 4)` |
//! | abrupt-stall evaluation corpus | `derive_seed(seed, 5)` |

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::data::{
    apply_standardizer, parse_flight_csv, prepare, window_corpus, Dataset, PrepareConfig,
    PreparedDataset, TimeSeries,
};
use crate::error::{Error, Result};
use crate::hyperopt::{tune, DimKind, Dimension, ParamValue, SearchSpace, TuneResult};
use crate::metrics::{roc_curve, roc_curve_csv, EvalReport};
use crate::nn::{InitConfig, LayerSpec, Model, ModelSpec};
use crate::persist::save_model;
use crate::rng::derive_seed;
use crate::synth::{generate_corpus, CorpusConfig, FlightKind};
use crate::train::{fit, predict_dataset, TrainConfig, TrainHistory};

pub const EVAL_REPORT: &str = "eval_report.json";
pub const TRAIN_HISTORY: &str = "train_history.csv";
pub const MODEL_FILE: &str = "model.stallmdl";
pub const RESOLVED_CONFIG: &str = "resolved_config.json";
pub const ROC_CURVE: &str = "roc_curve.csv";
pub const TUNE_TRACE: &str = "tune_trace.csv";
pub const BEST_CONFIG: &str = "best_config.json";
pub const ABRUPT_REPORT: &str = "abrupt_report.json";
pub const PREPARED_DATASET: &str = "dataset.stallds";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    #[default]
    Synthetic,
    /// A flight CSV file, or a directory of them.
    Csv,
    /// A file written by the `prepare` step.
    Prepared,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    pub path: Option<PathBuf>,
    pub corpus: CorpusConfig,
    pub prepare: PrepareConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// `arch-a`, `arch-b` or `arch-c`; ignored when `spec` is given.
    pub preset: Option<String>,
    pub spec: Option<ModelSpec>,
    pub init: InitConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            preset: Some("arch-a".into()),
            spec: None,
            init: InitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneConfig {
    pub budget: usize,
    pub init: usize,
    /// Epochs per trial; the final model is then trained for `train.epochs`.
    pub trial_epochs: usize,
    /// Dimensions named `learning_rate`, `batch_size`, `dropout` or
    /// `units.<layer index>`. Empty means learning rate (log, 1e-5..1e-2)
    /// plus every LSTM and dense width between half and double its preset.
    pub space: Vec<Dimension>,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            budget: 25,
            init: 5,
            trial_epochs: 20,
            space: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub threshold: f64,
    /// Extra abrupt-stall flights scored by the trained model; 0 disables.
    pub abrupt_flights: usize,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            threshold: 0.5,
            abrupt_flights: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataConfig,
    pub model: ModelConfig,
    /// `train.seed` is replaced by the seed derived from `seed`.
    pub train: TrainConfig,
    pub tune: Option<TuneConfig>,
    pub evaluate: EvaluateConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            output_dir: PathBuf::from("stallcast-run"),
            data: DataConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            tune: None,
            evaluate: EvaluateConfig::default(),
        }
    }
}

/// Recursively overlays `patch` onto `base`; objects merge key by key, any
/// other value replaces.
pub fn merge_json(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge_json(b.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p.clone(),
    }
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read `{}`: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("`{}` is not valid JSON: {e}", path.display())))
}

impl ExperimentConfig {
    pub fn from_json(value: Value) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Reads a config file, overlaying each of `patches` (JSON files) in turn.
    pub fn load(path: impl AsRef<Path>, patches: &[PathBuf]) -> Result<Self> {
        let mut value = read_json(path.as_ref())?;
        for p in patches {
            merge_json(&mut value, &read_json(p)?);
        }
        Self::from_json(value)
    }

    /// Checks cross-field requirements that serde cannot express.
    pub fn check(&self) -> Result<()> {
        match self.data.source {
            DataSource::Csv | DataSource::Prepared if self.data.path.is_none() => {
                return Err(Error::Config(format!(
                    "missing key `data.path` (required when data.source is `{}`)",
                    match self.data.source {
                        DataSource::Csv => "csv",
                        _ => "prepared",
                    }
                )))
            }
            _ => {}
        }
        if self.model.spec.is_none() {
            let name = self.model.preset.as_deref().ok_or_else(|| {
                Error::Config("missing key `model.preset` or `model.spec`".into())
            })?;
            if ModelSpec::preset(name).is_none() {
                return Err(Error::Config(format!(
                    "`model.preset`: unknown preset `{name}` (expected arch-a, arch-b or arch-c)"
                )));
            }
        }
        self.train
            .validate()
            .map_err(|e| Error::Config(format!("`train`: {e}")))?;
        if let Some(t) = &self.tune {
            if t.init < 2 || t.budget < t.init || t.trial_epochs == 0 {
                return Err(Error::Config(
                    "`tune`: needs budget >= init >= 2 and trial_epochs >= 1".into(),
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.evaluate.threshold) {
            return Err(Error::Config("`evaluate.threshold` must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// The model spec, with its input geometry taken from the data settings.
    pub fn model_spec(&self) -> Result<ModelSpec> {
        let spec = match &self.model.spec {
            Some(s) => s.clone(),
            None => ModelSpec::preset(self.model.preset.as_deref().unwrap_or_default())
                .ok_or_else(|| Error::Config("`model.preset` is unknown".into()))?,
        };
        let spec = spec.with_input(crate::data::FEATURE_COUNT, self.data.prepare.window_len);
        spec.validate()
            .map_err(|e| Error::Config(format!("`model.spec`: {e}")))?;
        Ok(spec)
    }
}

/// Loads every flight CSV at `path` (a file, or a directory scanned in name
/// order). A file name starting with a flight-kind name records that kind.
pub fn load_flights(path: &Path) -> Result<Vec<TimeSeries>> {
    let files = if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        files
    } else {
        vec![path.to_path_buf()]
    };
    if files.is_empty() {
        return Err(Error::Format(format!("no .csv files in `{}`", path.display())));
    }
    files
        .iter()
        .map(|f| {
            let mut ts = parse_flight_csv(f)?;
            ts.kind = FlightKind::ALL
                .into_iter()
                .find(|k| ts.name.starts_with(k.name()));
            Ok(ts)
        })
        .collect()
}

/// Corpus and preparation stages; returns the standardized splits.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedDataset> {
    let series = match cfg.data.source {
        DataSource::Prepared => {
            let path = cfg.data.path.as_ref().expect("checked");
            return PreparedDataset::read(path).map_err(|e| e.in_stage("load"));
        }
        DataSource::Synthetic => generate_corpus(&cfg.data.corpus, derive_seed(cfg.seed, 0))
            .map_err(|e| e.in_stage("generate"))?,
        DataSource::Csv => {
            load_flights(cfg.data.path.as_ref().expect("checked")).map_err(|e| e.in_stage("load"))?
        }
    };
    prepare(&series, &cfg.data.prepare, derive_seed(cfg.seed, 1)).map_err(|e| e.in_stage("prepare"))
}

/// Applies tuned parameter values to a spec and training config.
pub fn apply_params(
    params: &BTreeMap<String, ParamValue>,
    spec: &mut ModelSpec,
    train: &mut TrainConfig,
) -> Result<()> {
    for (name, value) in params {
        let number = || {
            value
                .as_f64()
                .ok_or_else(|| Error::Config(format!("`{name}` needs a numeric dimension")))
        };
        match name.as_str() {
            "learning_rate" => train.learning_rate = number()?,
            "batch_size" => train.batch_size = number()? as usize,
            "dropout" => {
                let rate = number()?;
                for l in &mut spec.layers {
                    if let LayerSpec::Dropout { drop_rate } = l {
                        *drop_rate = rate;
                    }
                }
            }
            other => {
                let layer = other
                    .strip_prefix("units.")
                    .and_then(|i| i.parse::<usize>().ok())
                    .ok_or_else(|| Error::Config(format!("unknown tuning dimension `{other}`")))?;
                let units = number()? as usize;
                match spec.layers.get_mut(layer) {
                    Some(
                        LayerSpec::LstmUni { hidden_units }
                        | LayerSpec::LstmBi { hidden_units }
                        | LayerSpec::Dense { hidden_units, .. },
                    ) => *hidden_units = units,
                    _ => {
                        return Err(Error::Config(format!(
                            "`{other}`: layer {layer} has no hidden units"
                        )))
                    }
                }
            }
        }
    }
    Ok(())
}

/// Learning rate on a log scale plus every LSTM and dense width.
pub fn default_space(spec: &ModelSpec) -> Result<SearchSpace> {
    let mut dims = vec![Dimension {
        name: "learning_rate".into(),
        kind: DimKind::LogContinuous {
            low: 1e-5,
            high: 1e-2,
        },
    }];
    for (i, l) in spec.layers.iter().enumerate() {
        if let LayerSpec::LstmUni { hidden_units }
        | LayerSpec::LstmBi { hidden_units }
        | LayerSpec::Dense { hidden_units, .. } = l
        {
            let h = *hidden_units as i64;
            dims.push(Dimension {
                name: format!("units.{i}"),
                kind: DimKind::Integer {
                    low: (h / 2).max(1),
                    high: (2 * h).max(2),
                },
            });
        }
    }
    SearchSpace::new(dims)
}

/// Everything a run produced, also written to `output_dir`.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: EvalReport,
    pub history: TrainHistory,
    pub model: Model,
    pub prepared: PreparedDataset,
    pub tuning: Option<(SearchSpace, TuneResult)>,
    pub abrupt: Option<EvalReport>,
    pub output_dir: PathBuf,
}

/// Runs the configured tuning search. Each trial trains for
/// `trial_epochs` and scores validation accuracy.
pub fn run_tuning(
    cfg: &ExperimentConfig,
    tcfg: &TuneConfig,
    prepared: &PreparedDataset,
) -> Result<(SearchSpace, TuneResult)> {
    let base = cfg.model_spec()?;
    let space = if tcfg.space.is_empty() {
        default_space(&base)?
    } else {
        SearchSpace::new(tcfg.space.clone()).map_err(|e| Error::Config(format!("`tune.space`: {e}")))?
    };
    let objective = |u: &[f64]| -> f64 {
        let trial = || -> Result<f64> {
            let mut spec = base.clone();
            let mut train = cfg.train.clone();
            apply_params(&space.decode_named(u)?, &mut spec, &mut train)?;
            spec.validate()?;
            train.epochs = tcfg.trial_epochs;
            train.seed = derive_seed(cfg.seed, 3);
            let model = Model::with_init(spec, derive_seed(cfg.seed, 2), &cfg.model.init)?;
            let (_, history) = fit(model, &prepared.train, &prepared.val, &train)?;
            Ok(history.epochs.last().map_or(f64::NAN, |e| e.val_accuracy))
        };
        // a diverged or invalid trial is recorded as failed
        trial().unwrap_or(f64::NAN)
    };
    let result = tune(
        objective,
        &space,
        tcfg.budget,
        tcfg.init,
        derive_seed(cfg.seed, 4),
    )?;
    Ok((space, result))
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

/// Scores the model on every positive and clean negative window of a fresh
/// abrupt-stall corpus.
pub fn evaluate_abrupt(
    model: &Model,
    prepared: &PreparedDataset,
    cfg: &ExperimentConfig,
) -> Result<EvalReport> {
    let corpus = CorpusConfig {
        cruise: 0,
        gradual_stall: 0,
        abrupt_stall: cfg.evaluate.abrupt_flights,
        ..cfg.data.corpus.clone()
    };
    let flights = generate_corpus(&corpus, derive_seed(cfg.seed, 5))?;
    let windows = window_corpus(&flights, prepared.window_len, prepared.horizon)
        .into_iter()
        .filter(|w| w.label == 1 || !w.warning_in_window)
        .collect();
    let ds = apply_standardizer(&prepared.standardizer, &Dataset::new(windows))?;
    let scores = predict_dataset(model, &ds)?;
    EvalReport::from_scores(&scores, &ds.labels(), cfg.evaluate.threshold)
}

/// Runs the experiment in `cfg`. With `with_tuning`, the `tune` section (or
/// its defaults) selects hyperparameters before the final training run.
pub fn run_config(cfg: &ExperimentConfig, with_tuning: bool) -> Result<RunOutcome> {
    cfg.check()?;
    let out = cfg.output_dir.clone();
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e).in_stage("output"))?;
    let resolved = serde_json::to_string_pretty(cfg)? + "\n";
    write(&out, RESOLVED_CONFIG, resolved).map_err(|e| e.in_stage("output"))?;

    let prepared = prepare_data(cfg)?;
    let mut spec = cfg.model_spec().map_err(|e| e.in_stage("config"))?;
    if prepared.window_len != spec.window_len
        || prepared.standardizer.features() != spec.input_features
    {
        return Err(Error::Config(format!(
            "prepared windows are {}x{}, model expects {}x{}",
            prepared.standardizer.features(),
            prepared.window_len,
            spec.input_features,
            spec.window_len
        ))
        .in_stage("config"));
    }
    let mut train = cfg.train.clone();
    train.seed = derive_seed(cfg.seed, 3);

    let tuning = match (with_tuning, &cfg.tune) {
        (false, _) => None,
        (true, t) => {
            let tcfg = t.clone().unwrap_or_default();
            let (space, result) =
                run_tuning(cfg, &tcfg, &prepared).map_err(|e| e.in_stage("tune"))?;
            let params = result.best_params(&space)?;
            apply_params(&params, &mut spec, &mut train).map_err(|e| e.in_stage("tune"))?;
            let fragment = serde_json::json!({
                "model": { "spec": spec },
                "train": { "learning_rate": train.learning_rate, "batch_size": train.batch_size },
            });
            write(&out, TUNE_TRACE, result.trace_csv(&space)?)?;
            write(&out, BEST_CONFIG, serde_json::to_string_pretty(&fragment)? + "\n")?;
            Some((space, result))
        }
    };

    let model = Model::with_init(spec, derive_seed(cfg.seed, 2), &cfg.model.init)
        .map_err(|e| e.in_stage("train"))?;
    let (model, history) =
        fit(model, &prepared.train, &prepared.val, &train).map_err(|e| e.in_stage("train"))?;

    let scores = predict_dataset(&model, &prepared.test).map_err(|e| e.in_stage("evaluate"))?;
    let labels = prepared.test.labels();
    let report = EvalReport::from_scores(&scores, &labels, cfg.evaluate.threshold)
        .map_err(|e| e.in_stage("evaluate"))?;
    let abrupt = if cfg.evaluate.abrupt_flights > 0 {
        Some(evaluate_abrupt(&model, &prepared, cfg).map_err(|e| e.in_stage("evaluate"))?)
    } else {
        None
    };

    report.write_json(out.join(EVAL_REPORT))?;
    write(&out, TRAIN_HISTORY, history.to_csv())?;
    save_model(&model, &prepared.standardizer, out.join(MODEL_FILE))?;
    if let Ok(curve) = roc_curve(&scores, &labels) {
        write(&out, ROC_CURVE, roc_curve_csv(&curve))?;
    }
    if let Some(a) = &abrupt {
        a.write_json(out.join(ABRUPT_REPORT))?;
    }
    Ok(RunOutcome {
        report,
        history,
        model,
        prepared,
        tuning,
        abrupt,
        output_dir: out,
    })
}

/// Optional command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub patches: Vec<PathBuf>,
}

/// Loads `config_path`, applies `overrides` and runs it.
pub fn run_experiment(config_path: impl AsRef<Path>, overrides: &Overrides) -> Result<RunOutcome> {
    let mut cfg = ExperimentConfig::load(config_path, &overrides.patches)?;
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &overrides.output_dir {
        cfg.output_dir = dir.clone();
    }
    let tuning = cfg.tune.is_some();
    run_config(&cfg, tuning)
}
