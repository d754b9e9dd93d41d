use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use stallcast::data::flight::Row;
use stallcast::data::{
    apply_standardizer, window_corpus, write_flight_csv, ColumnMap, Dataset, PreparedDataset,
};
use stallcast::experiment::{
    load_flights, prepare_data, run_config, ExperimentConfig, PREPARED_DATASET,
};
use stallcast::metrics::EvalReport;
use stallcast::nn::Matrix;
use stallcast::persist::load_model;
use stallcast::synth::{generate_corpus, CorpusConfig};
use stallcast::train::predict_dataset;
use stallcast::{Error, Result};

/// Stall-warning prediction from flight-parameter time series.
///
/// Exit codes: 0 success, 1 other failure, 2 configuration, 3 data, 4 numeric.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// JSON fragments merged over the config, in order.
    #[arg(long = "merge")]
    merge: Vec<PathBuf>,
    /// Overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output_dir`.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config, &self.merge)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus as one CSV per flight.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 30)]
        cruise: usize,
        #[arg(long, default_value_t = 100)]
        gradual_stall: usize,
        #[arg(long, default_value_t = 0)]
        abrupt_stall: usize,
        #[arg(long, default_value_t = 300)]
        duration_s: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Window, balance and standardize the configured corpus.
    Prepare {
        #[command(flatten)]
        run: RunArgs,
        /// Output file; defaults to `<output_dir>/dataset.stallds`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate with the configured hyperparameters.
    Train {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Search hyperparameters, then train and evaluate the best setting.
    Tune {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Score a saved model on a prepared split or on flight CSVs.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        /// Prepared dataset file, flight CSV, or directory of flight CSVs.
        #[arg(long)]
        data: PathBuf,
        /// Split of a prepared dataset.
        #[arg(long, default_value = "test")]
        split: String,
        /// Steps between a CSV window's end and its label.
        #[arg(long, default_value_t = 10)]
        horizon: usize,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stall probability for every full window of a flight CSV.
    ///
    /// Reads standard input unless `--input` is given. Prints one JSON line
    /// `{"t", "probability", "alarm"}` per row once a window is buffered;
    /// `probability` is for the warning state `horizon` rows after `t`.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: Option<PathBuf>,
        /// Score each row as it arrives instead of reading everything first.
        #[arg(long)]
        follow: bool,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
}

#[derive(Serialize)]
struct Prediction {
    t: usize,
    probability: f64,
    alarm: bool,
}

fn print_json(value: &impl Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn predict(model: PathBuf, input: Option<PathBuf>, follow: bool, threshold: f64) -> Result<()> {
    let (model, standardizer) = load_model(&model)?;
    let window = model.spec().window_len;
    let reader: Box<dyn BufRead> = match &input {
        Some(p) => Box::new(io::BufReader::new(
            std::fs::File::open(p).map_err(|e| Error::Io { path: p.clone(), source: e })?,
        )),
        None => Box::new(io::stdin().lock()),
    };
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = csv
        .headers()
        .map_err(|e| Error::Format(format!("header: {e}")))?
        .clone();
    let columns = ColumnMap::from_header(&header, false)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut rows: Vec<Row> = Vec::new();
    let mut pending: Vec<(usize, Matrix)> = Vec::new();
    let emit = |items: &mut Vec<(usize, Matrix)>, out: &mut io::StdoutLock| -> Result<()> {
        if items.is_empty() {
            return Ok(());
        }
        let refs: Vec<&Matrix> = items.iter().map(|(_, m)| m).collect();
        for ((t, _), p) in items.iter().zip(model.predict_batch(&refs)?) {
            let line = serde_json::to_string(&Prediction {
                t: *t,
                probability: p,
                alarm: p >= threshold,
            })?;
            writeln!(out, "{line}").and_then(|_| out.flush()).map_err(|e| Error::Io {
                path: "<stdout>".into(),
                source: e,
            })?;
        }
        items.clear();
        Ok(())
    };
    for (i, record) in csv.records().enumerate() {
        let record = record.map_err(|e| Error::Format(format!("row {}: {e}", i + 2)))?;
        let mut row = columns.parse(&record, i + 2)?.values;
        standardizer.transform_row(&mut row)?;
        rows.push(row);
        if rows.len() > window {
            rows.remove(0);
        }
        if rows.len() == window {
            let x = Matrix::from_fn(row.len(), window, |f, k| rows[k][f]);
            pending.push((i, x));
            if follow || pending.len() == 256 {
                emit(&mut pending, &mut out)?;
            }
        }
    }
    emit(&mut pending, &mut out)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            out,
            cruise,
            gradual_stall,
            abrupt_stall,
            duration_s,
            seed,
        } => {
            let cfg = CorpusConfig {
                cruise,
                gradual_stall,
                abrupt_stall,
                duration_s,
                ..CorpusConfig::default()
            };
            std::fs::create_dir_all(&out).map_err(|e| Error::Io { path: out.clone(), source: e })?;
            let flights = generate_corpus(&cfg, seed)?;
            for ts in &flights {
                write_flight_csv(ts, out.join(format!("{}.csv", ts.name)))?;
            }
            eprintln!("wrote {} flights to {}", flights.len(), out.display());
            Ok(())
        }
        Command::Prepare { run, out } => {
            let cfg = run.load()?;
            let prepared = prepare_data(&cfg)?;
            let path = out.unwrap_or_else(|| cfg.output_dir.join(PREPARED_DATASET));
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
            }
            prepared.write(&path)?;
            print_json(&prepared.retention)?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        Command::Train { run } => {
            let cfg = run.load()?;
            let outcome = run_config(&cfg, false)?;
            print_json(&outcome.report)
        }
        Command::Tune { run } => {
            let cfg = run.load()?;
            let outcome = run_config(&cfg, true)?;
            print_json(&outcome.report)
        }
        Command::Evaluate {
            model,
            data,
            split,
            horizon,
            threshold,
            out,
        } => {
            let (model, standardizer) = load_model(&model)?;
            let ds = if data.is_file() && data.extension().is_none_or(|x| x != "csv") {
                let prepared = PreparedDataset::read(&data)?;
                prepared
                    .split(&split)
                    .cloned()
                    .ok_or_else(|| Error::InvalidArgument(format!("no split named `{split}`")))?
            } else {
                let flights = load_flights(&data)?;
                let spec = model.spec();
                let windows = window_corpus(&flights, spec.window_len, horizon)
                    .into_iter()
                    .filter(|w| w.label == 1 || !w.warning_in_window)
                    .collect();
                apply_standardizer(&standardizer, &Dataset::new(windows))?
            };
            let scores = predict_dataset(&model, &ds)?;
            let report = EvalReport::from_scores(&scores, &ds.labels(), threshold)?;
            if let Some(p) = out {
                report.write_json(p)?;
            }
            print_json(&report)
        }
        Command::Predict {
            model,
            input,
            follow,
            threshold,
        } => predict(model, input, follow, threshold),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
