//! Batch front end for the absorber inverse-design pipeline.
//!
//! Subcommands walk the workflow in order: `gen` simulates the parameter
//! catalogue into a dataset, `train` persists fitted models, `predict`
//! writes per-sample predicted images, `eval` scores the requested models,
//! `roundtrip` pushes predictions back through the physics against the
//! tolerance envelope, and `report` consolidates the artifacts into one
//! text table.
//!
//! Every command resolves its settings the same way: built-in defaults,
//! overridden by `--config FILE` (TOML), overridden by flags. The resolved
//! configuration is echoed as `run.toml` next to the command's outputs so
//! any artifact can be traced back to the settings that produced it.
//! Reruns with unchanged inputs and seed are byte-identical apart from
//! timing columns. Output directories are guarded by a lock file; inputs
//! are never mutated.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, ensure, Context, Result};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use fssinv_core::dataset::{self, Dataset, DatasetConfig, Sample};
use fssinv_core::em::{FrequencyGrid, LayerStack};
use fssinv_core::eval::{
    benchmark, envelope_csv, roundtrip_csv, roundtrip_model, BenchmarkOptions, BenchmarkReport,
    BenchmarkRow,
};
use fssinv_core::geometry::{CellConfig, LabelImage};
use fssinv_core::models::{ModelKind, ModelSpec, Prediction, TrainedModel, TrainingSet};
use fssinv_core::postprocess::ThresholdCase;

#[derive(Parser)]
#[command(
    name = "fssinv",
    version,
    about = "Inverse-design pipeline for Jerusalem-cross absorber cells"
)]
struct Cli {
    /// TOML settings file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// RNG seed for data generation and model fitting.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Raster resolution (image side in pixels; even, >= 16).
    #[arg(long, global = true, value_name = "N")]
    resolution: Option<usize>,

    /// Comma-separated model codes (dtc,dtr,rfc,rfr,knc,lir,rr,lr,er,svr,gsr) or `all`.
    #[arg(long, global = true, value_name = "LIST")]
    models: Option<String>,

    /// Threshold case used when quantizing regressor output: 1, 2, or 3.
    #[arg(long, global = true)]
    case: Option<u8>,

    /// Shorthand for --resolution 16 (fast smoke runs).
    #[arg(long, global = true)]
    quick: bool,

    /// Extra jittered samples appended to the catalogue by `gen`.
    #[arg(long, global = true, value_name = "K")]
    extra_jitter: Option<usize>,

    /// Output directory override for this command.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Simulate the parameter catalogue into a dataset on disk.
    Gen,
    /// Fit the requested models on the training split and persist them.
    Train,
    /// Write predicted images for every held-out sample.
    Predict,
    /// Score the requested models and write the benchmark files.
    Eval,
    /// Re-simulate model predictions and check the tolerance envelope.
    Roundtrip,
    /// Consolidate benchmark and roundtrip artifacts into one table.
    Report,
}

/// Resolved settings for one command invocation. The TOML config file
/// mirrors this struct; omitted keys keep their defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    /// Dataset directory, written by `gen` and read by everything else.
    data_dir: PathBuf,
    /// Trained-model directory, written by `train`.
    model_dir: PathBuf,
    /// Report directory: benchmark, prediction, and roundtrip artifacts.
    report_dir: PathBuf,
    seed: u64,
    /// Comma-separated model codes, or `all`.
    models: String,
    /// Threshold case id (1-3) for quantizing regressor output.
    case: u8,
    /// Extra jittered samples appended to the catalogued grid by `gen`.
    extra_jitter: usize,
    cell: CellConfig<f64>,
    stack: LayerStack<f64>,
    grid: FrequencyGrid<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data_dir: "data".into(),
            model_dir: "models".into(),
            report_dir: "reports".into(),
            seed: 42,
            models: "all".into(),
            case: 2,
            extra_jitter: 0,
            cell: CellConfig::default(),
            stack: LayerStack::default(),
            grid: FrequencyGrid::default(),
        }
    }
}

impl RunConfig {
    fn resolve(cli: &Cli) -> Result<Self> {
        let mut config = match &cli.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                toml::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        if cli.quick {
            config.cell.n = 16;
        }
        if let Some(n) = cli.resolution {
            config.cell.n = n;
        }
        if let Some(seed) = cli.seed {
            config.seed = seed;
        }
        if let Some(models) = &cli.models {
            config.models = models.clone();
        }
        if let Some(case) = cli.case {
            config.case = case;
        }
        if let Some(k) = cli.extra_jitter {
            config.extra_jitter = k;
        }
        if let Some(out) = &cli.out {
            match cli.command {
                Command::Gen => config.data_dir = out.clone(),
                Command::Train => config.model_dir = out.clone(),
                _ => config.report_dir = out.clone(),
            }
        }
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        let dirs = [&self.data_dir, &self.model_dir, &self.report_dir];
        for i in 0..dirs.len() {
            for j in i + 1..dirs.len() {
                if dirs[i] == dirs[j] {
                    bail!(
                        "data, model, and report directories must be distinct ({} is reused)",
                        dirs[i].display()
                    );
                }
            }
        }
        self.cell.validate()?;
        self.stack.validate()?;
        FrequencyGrid::new(self.grid.f_min(), self.grid.f_max(), self.grid.len())?;
        self.threshold_case()?;
        self.model_kinds()?;
        Ok(())
    }

    fn threshold_case(&self) -> Result<ThresholdCase> {
        ThresholdCase::from_id(self.case)
            .ok_or_else(|| anyhow!("threshold case must be 1, 2, or 3, got {}", self.case))
    }

    fn model_kinds(&self) -> Result<Vec<ModelKind>> {
        Ok(ModelKind::parse_list(&self.models)?)
    }

    fn dataset_config(&self) -> DatasetConfig {
        DatasetConfig {
            cell: self.cell,
            stack: self.stack,
            grid: self.grid,
            seed: self.seed,
            extra_jitter: self.extra_jitter,
        }
    }

    fn load_dataset(&self) -> Result<Dataset> {
        dataset::load(&self.data_dir).with_context(|| {
            format!(
                "loading dataset from {} (run `fssinv gen` first)",
                self.data_dir.display()
            )
        })
    }

    /// Echo the resolved settings next to a command's outputs.
    fn echo_into(&self, dir: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self).context("serializing resolved config")?;
        fs::write(dir.join("run.toml"), text)
            .with_context(|| format!("writing {}/run.toml", dir.display()))
    }
}

/// Exclusive-creation lock file released on drop; rejects concurrent runs
/// aimed at the same output directory.
struct DirLock {
    path: PathBuf,
}

impl DirLock {
    fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(".fssinv.lock");
        match fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(_) => Ok(DirLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => bail!(
                "{} is in use by another run (delete {} if that run is gone)",
                dir.display(),
                path.display()
            ),
            Err(e) => Err(e).with_context(|| format!("locking {}", dir.display())),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // One line, machine-parsable: the whole context chain inline.
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    configure_threads()?;
    let config = RunConfig::resolve(&cli)?;
    match cli.command {
        Command::Gen => cmd_gen(&config),
        Command::Train => cmd_train(&config),
        Command::Predict => cmd_predict(&config),
        Command::Eval => cmd_eval(&config),
        Command::Roundtrip => cmd_roundtrip(&config),
        Command::Report => cmd_report(&config),
    }
}

/// `FSSINV_THREADS` caps the worker pool; unset means one worker per core.
fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("FSSINV_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| anyhow!("FSSINV_THREADS must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("installing worker pool")
}

fn cmd_gen(config: &RunConfig) -> Result<()> {
    let _lock = DirLock::acquire(&config.data_dir)?;
    let started = Instant::now();
    let manifest = dataset::generate(&config.data_dir, &config.dataset_config())?;
    config.echo_into(&config.data_dir)?;
    println!(
        "generated {} samples ({} train / {} test) at n={} into {} in {:.2} s",
        manifest.samples.len(),
        manifest.split.train.len(),
        manifest.split.test.len(),
        config.cell.n,
        config.data_dir.display(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn cmd_train(config: &RunConfig) -> Result<()> {
    let kinds = config.model_kinds()?;
    let ds = config.load_dataset()?;
    let train = TrainingSet::<f64>::from_samples(&ds.train_samples())?;
    let _lock = DirLock::acquire(&config.model_dir)?;

    let mut failed = 0usize;
    let mut timings = String::from("model,seconds\n");
    for &kind in &kinds {
        match ModelSpec::new(kind, config.seed).fit(&train) {
            Ok(model) => {
                let path = config.model_dir.join(format!("{}.json", kind.code()));
                model.save(&path)?;
                timings.push_str(&format!("{},{:.3}\n", kind.code(), model.train_seconds));
                println!(
                    "trained {} in {:.3} s -> {}",
                    kind.code(),
                    model.train_seconds,
                    path.display()
                );
            }
            Err(e) => {
                eprintln!("warning: {} failed: {e}", kind.code());
                failed += 1;
            }
        }
    }
    fs::write(config.model_dir.join("timings.csv"), timings)
        .with_context(|| format!("writing {}/timings.csv", config.model_dir.display()))?;
    config.echo_into(&config.model_dir)?;
    if failed == kinds.len() {
        bail!("all {} models failed to train", kinds.len());
    }
    Ok(())
}

fn cmd_predict(config: &RunConfig) -> Result<()> {
    let kinds = config.model_kinds()?;
    let ds = config.load_dataset()?;
    let test = ds.test_samples();
    let _lock = DirLock::acquire(&config.report_dir)?;

    let mut failed = 0usize;
    for &kind in &kinds {
        match predict_one(config, kind, &test) {
            Ok(dir) => println!(
                "predicted {} images for {} -> {}",
                test.len(),
                kind.code(),
                dir.display()
            ),
            Err(e) => {
                eprintln!("warning: {} failed: {e:#}", kind.code());
                failed += 1;
            }
        }
    }
    config.echo_into(&config.report_dir)?;
    if failed == kinds.len() {
        bail!("all {} models failed to predict", kinds.len());
    }
    Ok(())
}

/// Predict every held-out sample with one saved model. Classifiers emit PGM
/// label images; regressors emit the raw real-valued field as CSV.
fn predict_one(config: &RunConfig, kind: ModelKind, test: &[&Sample]) -> Result<PathBuf> {
    let model = load_model(config, kind)?;
    let side = image_side(model.n_outputs())?;
    let dir = config.report_dir.join("predictions").join(kind.code());
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    for sample in test {
        match model.predict(sample.spectrum.values())? {
            Prediction::Labels(labels) => {
                let image = LabelImage::new(side, labels)?;
                let path = dir.join(format!("{:04}.pgm", sample.id));
                fs::write(&path, image.to_pgm())
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Prediction::Values(values) => {
                let mut csv = String::new();
                for row in values.chunks(side) {
                    let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                    csv.push_str(&cells.join(","));
                    csv.push('\n');
                }
                let path = dir.join(format!("{:04}.csv", sample.id));
                fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
            }
        }
    }
    Ok(dir)
}

fn cmd_eval(config: &RunConfig) -> Result<()> {
    let kinds = config.model_kinds()?;
    let ds = config.load_dataset()?;
    let _lock = DirLock::acquire(&config.report_dir)?;

    let specs: Vec<ModelSpec<f64>> = kinds
        .iter()
        .map(|&kind| ModelSpec::new(kind, config.seed))
        .collect();
    // The reduced support-vector grid only makes sense when it actually
    // reduces; at coarse resolutions keep the native side.
    let options = BenchmarkOptions {
        svr_output_side: (ds.manifest.config.cell.n > 32).then_some(32),
    };
    let report = benchmark(&specs, &ds, &options)?;
    let table = report.to_table();
    write_report_file(config, "benchmark.csv", &report.to_csv())?;
    write_report_file(config, "benchmark.txt", &table)?;
    config.echo_into(&config.report_dir)?;
    print!("{table}");

    let failed = report.rows.iter().filter(|r| r.error.is_some()).count();
    if failed == report.rows.len() {
        bail!("all {failed} models failed to score");
    }
    Ok(())
}

fn cmd_roundtrip(config: &RunConfig) -> Result<()> {
    let kinds = config.model_kinds()?;
    let case = config.threshold_case()?;
    let ds = config.load_dataset()?;
    let test = ds.test_samples();
    let _lock = DirLock::acquire(&config.report_dir)?;

    let mut failed = 0usize;
    for &kind in &kinds {
        let model = match load_model(config, kind) {
            Ok(model) => model,
            Err(e) => {
                eprintln!("warning: {} failed: {e:#}", kind.code());
                failed += 1;
                continue;
            }
        };
        let rows = roundtrip_model(
            &model,
            &test,
            case,
            &ds.manifest.config.cell,
            &ds.manifest.config.stack,
            &ds.manifest.config.grid,
        );
        write_report_file(
            config,
            &format!("roundtrip-{}.csv", kind.code()),
            &roundtrip_csv(&rows),
        )?;
        // Representative per-frequency artifact: the first sample that made
        // it all the way back through the physics.
        let complete = rows
            .iter()
            .find_map(|r| Some((r.envelope.as_ref()?, r.resimulated.as_ref()?)));
        if let Some((envelope, resimulated)) = complete {
            let csv = envelope_csv(envelope, resimulated.values())?;
            write_report_file(config, &format!("envelope-{}.csv", kind.code()), &csv)?;
        }
        let inside = rows
            .iter()
            .filter(|r| r.in_envelope_fraction == Some(1.0))
            .count();
        println!(
            "roundtrip {}: {}/{} fully inside the envelope",
            kind.code(),
            inside,
            rows.len()
        );
    }
    config.echo_into(&config.report_dir)?;
    if failed == kinds.len() {
        bail!("all {} models failed roundtrip", kinds.len());
    }
    Ok(())
}

fn cmd_report(config: &RunConfig) -> Result<()> {
    let _lock = DirLock::acquire(&config.report_dir)?;
    let csv_path = config.report_dir.join("benchmark.csv");
    let text = fs::read_to_string(&csv_path)
        .with_context(|| format!("reading {} (run `fssinv eval` first)", csv_path.display()))?;
    let report = parse_benchmark_csv(&text)?;
    let mut out = report.to_table();

    let mut summaries = Vec::new();
    for kind in ModelKind::parse_list("all").expect("`all` parses") {
        let path = config
            .report_dir
            .join(format!("roundtrip-{}.csv", kind.code()));
        let Ok(text) = fs::read_to_string(&path) else {
            continue;
        };
        summaries.push(summarize_roundtrip(kind, &text)?);
    }
    if !summaries.is_empty() {
        out.push('\n');
        out.push_str(&format!("Roundtrip (threshold case {})\n", config.case));
        for line in &summaries {
            out.push_str(line);
            out.push('\n');
        }
    }

    write_report_file(config, "report.txt", &out)?;
    config.echo_into(&config.report_dir)?;
    print!("{out}");
    Ok(())
}

fn load_model(config: &RunConfig, kind: ModelKind) -> Result<TrainedModel<f64>> {
    let path = config.model_dir.join(format!("{}.json", kind.code()));
    TrainedModel::load(&path)
        .with_context(|| format!("loading {} (run `fssinv train` first)", path.display()))
}

fn image_side(n_outputs: usize) -> Result<usize> {
    let side = (n_outputs as f64).sqrt().round() as usize;
    ensure!(
        side * side == n_outputs,
        "model output length {n_outputs} is not a square image"
    );
    Ok(side)
}

fn write_report_file(config: &RunConfig, name: &str, contents: &str) -> Result<()> {
    let path = config.report_dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Rebuild a benchmark report from its CSV; the error column is last and
/// commas inside it were flattened on write, so a plain split is exact.
fn parse_benchmark_csv(text: &str) -> Result<BenchmarkReport> {
    let parse_opt = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            Ok(Some(s.parse()?))
        }
    };
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.splitn(8, ',').collect();
        ensure!(
            fields.len() == 8,
            "benchmark.csv line {}: {} fields, expected 8",
            i + 1,
            fields.len()
        );
        rows.push(BenchmarkRow {
            kind: ModelKind::parse(fields[0])?,
            output_side: fields[1]
                .parse()
                .with_context(|| format!("benchmark.csv line {}: output side", i + 1))?,
            train_metric: parse_opt(fields[2])?,
            test_metric: parse_opt(fields[3])?,
            train_mse: parse_opt(fields[4])?,
            test_mse: parse_opt(fields[5])?,
            seconds: fields[6]
                .parse()
                .with_context(|| format!("benchmark.csv line {}: seconds", i + 1))?,
            error: (!fields[7].is_empty()).then(|| fields[7].to_string()),
        });
    }
    ensure!(!rows.is_empty(), "benchmark.csv has no rows");
    Ok(BenchmarkReport { rows })
}

/// One summary line per roundtrip CSV: how many held-out samples came back
/// fully inside the envelope, the mean fraction, and the failure count.
fn summarize_roundtrip(kind: ModelKind, text: &str) -> Result<String> {
    let mut total = 0usize;
    let mut inside = 0usize;
    let mut failures = 0usize;
    let mut sum = 0.0f64;
    let mut scored = 0usize;
    for line in text.lines().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.splitn(9, ',').collect();
        ensure!(
            fields.len() == 9,
            "roundtrip CSV row has {} fields, expected 9",
            fields.len()
        );
        total += 1;
        if !fields[8].is_empty() {
            failures += 1;
        }
        if !fields[7].is_empty() {
            let fraction: f64 = fields[7].parse()?;
            sum += fraction;
            scored += 1;
            if fraction == 1.0 {
                inside += 1;
            }
        }
    }
    let mean = if scored > 0 {
        sum / scored as f64
    } else {
        f64::NAN
    };
    Ok(format!(
        "{}: {inside}/{total} fully inside, mean in-envelope fraction {mean:.4}, {failures} failures",
        kind.code()
    ))
}
