use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use opponency::data::{convert_set, SIDE, load_cifar10, Cifar10Set, ColourSpace, Split};
use opponency::harness::{
    compare_conditions, depth_ablation, read_summary_csv, run_grid, write_outputs, ExperimentGrid, Modality,
};
use opponency::model::{build_model, evaluate, evaluate_shuffled, load_checkpoint, save_checkpoint, train, LayerId, ModelConfig};
use opponency::ndnum::OptimizerKind;
use opponency::probe::{format_records, probe_model, rf_approx, CellId, OpponencyClass, ProbeSettings, Tolerances};
use opponency::stimulus::write_png;
use opponency::Error;

const EVAL_BATCH: usize = 256;

#[derive(Parser)]
#[command(name = "opponency", version, about = "Train bottlenecked retina/ventral CNNs on CIFAR-10 and probe their cells for opponency")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and save its checkpoint.
    Train(TrainArgs),
    /// Probe every convolutional channel of a checkpoint and write one line per cell.
    Probe(ProbeArgs),
    /// Train and probe the bottleneck x depth x trial lattice, then write CSV and SVG summaries.
    Grid(GridArgs),
    /// Redraw figures from a summary CSV, optionally comparing it with a second condition.
    Report(ReportArgs),
    /// Export the gradient receptive field of one cell as a PNG.
    Rf(RfArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Space {
    Rgb,
    Lab,
    Grey,
}

impl From<Space> for ColourSpace {
    fn from(s: Space) -> Self {
        match s {
            Space::Rgb => ColourSpace::Rgb,
            Space::Lab => ColourSpace::Lab,
            Space::Grey => ColourSpace::Grey,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Optim {
    Adam,
    Sgd,
}

#[derive(Args)]
struct DataArgs {
    /// Directory holding the CIFAR-10 binary batches [default: none]
    #[arg(long, env = "OPPONENCY_DATA")]
    data: Option<PathBuf>,
    /// Train on the first N training images only [default: all]
    #[arg(long)]
    train_limit: Option<usize>,
}

#[derive(Args)]
struct TrainingArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 128)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-4)]
    lr: f32,
    #[arg(long, default_value_t = 1e-6)]
    weight_decay: f32,
    #[arg(long, value_enum, default_value_t = Optim::Adam)]
    optimizer: Optim,
    /// Input colour space
    #[arg(long, value_enum, default_value_t = Space::Rgb)]
    colour_space: Space,
    /// Randomly permute the colour channels of every training image [default: off]
    #[arg(long)]
    shuffle_channels: bool,
}

impl TrainingArgs {
    fn config(&self, bottleneck: usize, depth: usize) -> ModelConfig {
        ModelConfig {
            bottleneck,
            ventral_depth: depth,
            colour_space: self.colour_space.into(),
            shuffle_channels: self.shuffle_channels,
            seed: self.seed,
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            weight_decay: self.weight_decay,
            optimizer: match self.optimizer {
                Optim::Adam => OptimizerKind::adam(),
                Optim::Sgd => OptimizerKind::Sgd,
            },
        }
    }
}

#[derive(Args)]
struct ProbeOptions {
    /// Number of equally spaced probe hues
    #[arg(long, default_value_t = 256)]
    hues: usize,
    /// Band around the baseline that counts as no change
    #[arg(long, default_value_t = 1e-5)]
    delta: f64,
    /// Response range at or below which a cell is unresponsive
    #[arg(long, default_value_t = 1e-4)]
    epsilon: f64,
    /// Grating orientation step in degrees, covering [0, 180)
    #[arg(long, default_value_t = 5.0)]
    orientation_step: f64,
    /// Grating frequencies are 1..=N whole cycles per image width
    #[arg(long, default_value_t = 16)]
    cycles: usize,
    /// Number of grating phases, evenly spaced over a full period
    #[arg(long, default_value_t = 8)]
    phases: usize,
}

impl ProbeOptions {
    fn settings(&self) -> ProbeSettings {
        ProbeSettings {
            hues: self.hues,
            tolerances: Tolerances {
                delta: self.delta,
                epsilon: self.epsilon,
            },
            orientations: (0..)
                .map(|i| i as f64 * self.orientation_step)
                .take_while(|&t| self.orientation_step > 0.0 && t < 180.0)
                .collect(),
            frequencies: (1..=self.cycles).map(|k| TAU * k as f64 / SIDE as f64).collect(),
            phases: (0..self.phases).map(|i| TAU * i as f64 / self.phases as f64).collect(),
            receptive_fields: false,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Channels in the second retina layer
    #[arg(long, default_value_t = 32)]
    bottleneck: usize,
    /// Number of ventral convolutions
    #[arg(long, default_value_t = 2)]
    depth: usize,
    #[command(flatten)]
    training: TrainingArgs,
    #[command(flatten)]
    data: DataArgs,
    /// Checkpoint path
    #[arg(long)]
    out: PathBuf,
    /// Manifest path [default: <out>.manifest.json]
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct ProbeArgs {
    /// Checkpoint to probe
    #[arg(long)]
    model: PathBuf,
    /// Cell table path
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    probe: ProbeOptions,
    /// Manifest path [default: <out>.manifest.json]
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    /// Bottleneck widths [default: 1,2,4,8,16,32, or 1,4,32 with --ci]
    #[arg(long, value_delimiter = ',')]
    bottlenecks: Option<Vec<usize>>,
    /// Ventral depths [default: 0,1,2,3,4, or 0,2 with --ci]
    #[arg(long, value_delimiter = ',')]
    depths: Option<Vec<usize>>,
    /// Use the reduced lattice [default: off]
    #[arg(long)]
    ci: bool,
    #[arg(long, default_value_t = 3)]
    trials: usize,
    /// Worker threads; each runs one training job
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    training: TrainingArgs,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    probe: ProbeOptions,
    /// Output directory (checkpoints, cell tables, CSV, SVG)
    #[arg(long)]
    out: PathBuf,
    /// Manifest path [default: <out>/manifest.json]
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Summary CSV written by `grid`
    #[arg(long)]
    summary: PathBuf,
    /// Second summary CSV; writes per-row deltas (compare minus summary) to compare.csv [default: none]
    #[arg(long)]
    compare: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Manifest path [default: <out>/manifest.json]
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct RfArgs {
    /// Checkpoint
    #[arg(long)]
    model: PathBuf,
    /// Layer name, e.g. retina2 or ventral1
    #[arg(long, default_value = "retina2")]
    layer: String,
    #[arg(long, default_value_t = 0)]
    channel: usize,
    /// PNG path
    #[arg(long)]
    out: PathBuf,
    /// Manifest path [default: <out>.manifest.json]
    #[arg(long)]
    manifest: Option<PathBuf>,
}

fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn write_manifest(path: &Path, value: &Value) -> Result<(), Error> {
    if let Some(p) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(p)?;
    }
    let mut text = serde_json::to_string_pretty(value).expect("manifest serialises");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn load_data(args: &DataArgs) -> Result<(Cifar10Set, Cifar10Set), Error> {
    let dir = args
        .data
        .as_deref()
        .ok_or_else(|| Error::MissingFile(PathBuf::from("<dataset: pass --data or set OPPONENCY_DATA>")))?;
    let mut train_set = load_cifar10(dir, Split::Train)?;
    if let Some(n) = args.train_limit {
        train_set = train_set.truncated(n)?;
    }
    Ok((train_set, load_cifar10(dir, Split::Test)?))
}

fn data_json(args: &DataArgs) -> Value {
    json!({ "data": args.data, "train_limit": args.train_limit })
}

fn run_train(args: TrainArgs) -> Result<(), Error> {
    let config = args.training.config(args.bottleneck, args.depth);
    config.validate()?;
    let (mut train_set, mut test_set) = load_data(&args.data)?;
    convert_set(&mut train_set, config.colour_space);
    convert_set(&mut test_set, config.colour_space);
    let mut model = build_model(&config)?;
    train(&mut model, &train_set, &mut |s| {
        eprintln!(
            "epoch {} loss {:.4} train accuracy {:.4}",
            s.epoch + 1,
            s.mean_loss,
            s.train_accuracy
        )
    })?;
    let accuracy = evaluate(&model, &test_set, EVAL_BATCH)?;
    model.meta.test_accuracy = Some(accuracy as f32);
    if config.shuffle_channels {
        model.meta.shuffled_test_accuracy = Some(evaluate_shuffled(&model, &test_set, EVAL_BATCH, config.seed)? as f32);
    }
    save_checkpoint(&model, &args.out)?;
    println!("test accuracy {accuracy:.4}");
    let manifest = json!({
        "command": "train",
        "config": config,
        "dataset": data_json(&args.data),
        "out": args.out,
        "test_accuracy": model.meta.test_accuracy,
        "shuffled_test_accuracy": model.meta.shuffled_test_accuracy,
    });
    write_manifest(&args.manifest.unwrap_or_else(|| sidecar(&args.out)), &manifest)
}

fn model_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into())
}

fn run_probe(args: ProbeArgs) -> Result<(), Error> {
    let model = load_checkpoint(&args.model)?;
    let settings = args.probe.settings();
    settings.tolerances.validate()?;
    let reports = probe_model(&model, &model.config.conv_layers(), &settings)?;
    let id = model_id(&args.model);
    let records: Vec<_> = reports.iter().map(|r| r.record(&id)).collect();
    if let Some(p) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(p)?;
    }
    fs::write(&args.out, format_records(&records))?;
    let opponent = records.iter().filter(|r| r.spectral == OpponencyClass::Opponent).count();
    println!("{} cells, {opponent} spectrally opponent", records.len());
    let manifest = json!({
        "command": "probe",
        "model": args.model,
        "config": model.config,
        "hues": settings.hues,
        "orientations": settings.orientations,
        "frequencies": settings.frequencies,
        "phases": settings.phases,
        "tolerances": settings.tolerances,
        "cells": records.len(),
        "out": args.out,
    });
    write_manifest(&args.manifest.unwrap_or_else(|| sidecar(&args.out)), &manifest)
}

fn run_grid_command(args: GridArgs) -> Result<(), Error> {
    let mut grid = if args.ci {
        ExperimentGrid::ci(&args.out)
    } else {
        ExperimentGrid::new(&args.out)
    };
    if let Some(b) = args.bottlenecks {
        grid.bottlenecks = b;
    }
    if let Some(d) = args.depths {
        grid.depths = d;
    }
    grid.trials = args.trials;
    grid.jobs = args.jobs;
    grid.template = args.training.config(1, 0);
    grid.probe = args.probe.settings();
    grid.validate()?;
    let (train_set, test_set) = load_data(&args.data)?;
    let outcome = run_grid(&grid, &train_set, Some(&test_set), &|m| eprintln!("{m}"))?;
    for path in &outcome.written {
        println!("wrote {}", path.display());
    }
    let models: Vec<Value> = outcome
        .models
        .iter()
        .map(|m| {
            json!({
                "id": m.key.model_id(),
                "seed": grid.config_for(m.key).seed,
                "test_accuracy": m.test_accuracy,
                "shuffled_test_accuracy": m.shuffled_test_accuracy,
                "reused_checkpoint": m.reused_checkpoint,
            })
        })
        .collect();
    let excluded: Vec<Value> = outcome
        .excluded
        .iter()
        .map(|(k, reason)| json!({ "id": k.model_id(), "reason": reason }))
        .collect();
    let manifest = json!({
        "command": "grid",
        "bottlenecks": grid.bottlenecks,
        "depths": grid.depths,
        "trials": grid.trials,
        "jobs": grid.jobs,
        "template": grid.template,
        "dataset": data_json(&args.data),
        "hues": grid.probe.hues,
        "orientations": grid.probe.orientations,
        "frequencies": grid.probe.frequencies,
        "phases": grid.probe.phases,
        "tolerances": grid.probe.tolerances,
        "models": models,
        "excluded": excluded,
    });
    write_manifest(&args.manifest.unwrap_or_else(|| args.out.join("manifest.json")), &manifest)
}

fn run_report(args: ReportArgs) -> Result<(), Error> {
    let summary = read_summary_csv(&args.summary)?;
    fs::create_dir_all(&args.out)?;
    let mut written = write_outputs(&summary, &args.out)?;

    let mut shifts = String::from("bottleneck,shallow_depth,deep_depth,unshifted_spearman,shifted_spearman\n");
    let cell = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for b in summary.bottlenecks() {
        let ablation = depth_ablation(&summary, b, Modality::Spectral, OpponencyClass::Opponent);
        for s in &ablation.shifts {
            shifts.push_str(&format!("{b},{},{},{},{}\n", s.shallow, s.deep, cell(s.unshifted), cell(s.shifted)));
        }
    }
    let path = args.out.join("depth_shift.csv");
    fs::write(&path, shifts)?;
    written.push(path);

    let mut largest = None;
    if let Some(other) = &args.compare {
        let delta = compare_conditions(&summary, &read_summary_csv(other)?)?;
        let mut text = String::from("bottleneck,depth,layer,modality,class,delta\n");
        for (k, d) in &delta.deltas {
            text.push_str(&format!("{},{},{},{},{},{d:.6}\n", k.bottleneck, k.depth, k.layer, k.modality, k.class));
        }
        let path = args.out.join("compare.csv");
        fs::write(&path, text)?;
        written.push(path);
        largest = delta.deltas.values().map(|d| d.abs()).reduce(f64::max);
        if let Some(m) = largest {
            println!("largest absolute delta {m:.6}");
        }
    }
    for path in &written {
        println!("wrote {}", path.display());
    }
    let manifest = json!({
        "command": "report",
        "summary": args.summary,
        "compare": args.compare,
        "largest_abs_delta": largest,
        "written": written,
    });
    write_manifest(&args.manifest.unwrap_or_else(|| args.out.join("manifest.json")), &manifest)
}

fn run_rf(args: RfArgs) -> Result<(), Error> {
    let model = load_checkpoint(&args.model)?;
    let layer: LayerId = args.layer.parse()?;
    let cell = CellId::new(&model, layer, args.channel)?;
    let rf = rf_approx(&model, cell)?;
    if rf.dead {
        eprintln!("warning: {cell} has zero gradient at the blank image; the PNG is flat grey");
    }
    if let Some(p) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(p)?;
    }
    write_png(&args.out, &rf.image)?;
    let manifest = json!({
        "command": "rf",
        "model": args.model,
        "layer": layer,
        "channel": args.channel,
        "dead": rf.dead,
        "out": args.out,
    });
    write_manifest(&args.manifest.unwrap_or_else(|| sidecar(&args.out)), &manifest)
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numeric_error() {
        4
    } else if e.is_data_error() {
        3
    } else if matches!(e, Error::InvalidConfig(_) | Error::InvalidCell(_)) {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => run_train(a),
        Command::Probe(a) => run_probe(a),
        Command::Grid(a) => run_grid_command(a),
        Command::Report(a) => run_report(a),
        Command::Rf(a) => run_rf(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
