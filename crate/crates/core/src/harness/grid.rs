use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{convert_set, Cifar10Set, ColourSpace};
use crate::error::{Error, Result};
use crate::model::{
    build_model, evaluate, evaluate_shuffled, load_checkpoint, save_checkpoint, train, ModelConfig, VisualSystemModel,
};
use crate::ndnum::Rng;
use crate::probe::{format_records, parse_records, probe_layers, CellRecord, ProbeSettings, ProbeSweeps};

use super::output::{emit_csv, emit_hue_csvs, emit_svg};
use super::summary::{aggregate, ModelCells, PopulationSummary};

const EVAL_BATCH: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentGrid {
    pub bottlenecks: Vec<usize>,
    pub depths: Vec<usize>,
    pub trials: usize,
    /// Colour space, shuffle flag, optimiser and base seed shared by every job.
    pub template: ModelConfig,
    pub probe: ProbeSettings,
    pub out_dir: PathBuf,
    /// Worker threads for independent jobs.
    pub jobs: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct TrialKey {
    pub bottleneck: usize,
    pub depth: usize,
    pub trial: usize,
}

impl TrialKey {
    pub fn model_id(&self) -> String {
        format!("b{}_d{}_t{}", self.bottleneck, self.depth, self.trial)
    }
}

/// Seed of one trial, derived from the grid seed so jobs can run in any order.
pub fn trial_seed(base: u64, key: TrialKey) -> u64 {
    let stream = ((key.bottleneck as u64) << 40) ^ ((key.depth as u64) << 20) ^ key.trial as u64;
    Rng::derived(base, 0x6772_6964_0000_0000 ^ stream).next_u64()
}

impl ExperimentGrid {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            bottlenecks: vec![1, 2, 4, 8, 16, 32],
            depths: vec![0, 1, 2, 3, 4],
            trials: 3,
            template: ModelConfig::default(),
            probe: ProbeSettings::default(),
            out_dir: out_dir.into(),
            jobs: 1,
        }
    }

    /// Reduced grid for quick runs: bottlenecks {1, 4, 32}, depths {0, 2}.
    pub fn ci(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            bottlenecks: vec![1, 4, 32],
            depths: vec![0, 2],
            ..Self::new(out_dir)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bottlenecks.is_empty() || self.depths.is_empty() {
            return Err(Error::InvalidConfig("grid needs at least one bottleneck and one depth".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("grid needs at least one trial".into()));
        }
        for key in self.keys() {
            self.config_for(key).validate()?;
        }
        self.probe.tolerances.validate()
    }

    pub fn keys(&self) -> Vec<TrialKey> {
        let mut keys = Vec::new();
        for &bottleneck in &self.bottlenecks {
            for &depth in &self.depths {
                for trial in 0..self.trials {
                    keys.push(TrialKey { bottleneck, depth, trial });
                }
            }
        }
        keys
    }

    pub fn config_for(&self, key: TrialKey) -> ModelConfig {
        ModelConfig {
            bottleneck: key.bottleneck,
            ventral_depth: key.depth,
            seed: trial_seed(self.template.seed, key),
            ..self.template.clone()
        }
    }

    pub fn checkpoint_path(&self, key: TrialKey) -> PathBuf {
        self.out_dir.join("models").join(format!("{}.opnn", key.model_id()))
    }

    pub fn cells_path(&self, key: TrialKey) -> PathBuf {
        self.out_dir.join("cells").join(format!("{}.tsv", key.model_id()))
    }

    fn probe_fingerprint(&self) -> String {
        let p = &self.probe;
        format!(
            "# probe hues={} orientations={:?} frequencies={:?} phases={:?} delta={} epsilon={}",
            p.hues, p.orientations, p.frequencies, p.phases, p.tolerances.delta, p.tolerances.epsilon
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelOutcome {
    pub key: TrialKey,
    pub test_accuracy: Option<f32>,
    pub shuffled_test_accuracy: Option<f32>,
    pub reused_checkpoint: bool,
    #[serde(skip)]
    pub records: Vec<CellRecord>,
}

#[derive(Clone, Debug)]
pub struct GridOutcome {
    pub summary: PopulationSummary,
    pub models: Vec<ModelOutcome>,
    /// Diverged trials with their reason; they are left out of the summary.
    pub excluded: Vec<(TrialKey, String)>,
    pub written: Vec<PathBuf>,
}

fn same_run(a: &ModelConfig, b: &ModelConfig) -> bool {
    a.bottleneck == b.bottleneck
        && a.ventral_depth == b.ventral_depth
        && a.colour_space == b.colour_space
        && a.shuffle_channels == b.shuffle_channels
        && a.seed == b.seed
        && a.epochs == b.epochs
        && a.lr == b.lr
        && a.weight_decay == b.weight_decay
}

fn obtain_model(
    grid: &ExperimentGrid,
    key: TrialKey,
    train_set: &Cifar10Set,
    test_set: Option<&Cifar10Set>,
    log: &(dyn Fn(&str) + Sync),
) -> Result<(VisualSystemModel, bool)> {
    let path = grid.checkpoint_path(key);
    let wanted = grid.config_for(key);
    if path.exists() {
        let model = load_checkpoint(&path)?;
        if !same_run(&model.config, &wanted) {
            return Err(Error::InvalidConfig(format!(
                "{} was trained with other settings; remove it or choose another output directory",
                path.display()
            )));
        }
        log(&format!("{}: reusing {}", key.model_id(), path.display()));
        return Ok((model, true));
    }
    let mut model = build_model(&wanted)?;
    let id = key.model_id();
    train(&mut model, train_set, &mut |s| {
        log(&format!(
            "{id}: epoch {} loss {:.4} train accuracy {:.4}",
            s.epoch + 1,
            s.mean_loss,
            s.train_accuracy
        ))
    })?;
    if let Some(test) = test_set {
        model.meta.test_accuracy = Some(evaluate(&model, test, EVAL_BATCH)? as f32);
        if wanted.shuffle_channels {
            model.meta.shuffled_test_accuracy = Some(evaluate_shuffled(&model, test, EVAL_BATCH, wanted.seed)? as f32);
        }
    }
    save_checkpoint(&model, &path)?;
    Ok((model, false))
}

fn run_job(
    grid: &ExperimentGrid,
    key: TrialKey,
    train_set: &Cifar10Set,
    test_set: Option<&Cifar10Set>,
    sweeps: &ProbeSweeps,
    log: &(dyn Fn(&str) + Sync),
) -> Result<ModelOutcome> {
    let (model, reused) = obtain_model(grid, key, train_set, test_set, log)?;
    let cells_path = grid.cells_path(key);
    let fingerprint = grid.probe_fingerprint();
    let cached = if reused && cells_path.exists() {
        let text = fs::read_to_string(&cells_path)?;
        (text.lines().nth(1) == Some(fingerprint.as_str())).then(|| parse_records(&text)).transpose()?
    } else {
        None
    };
    let records = match cached {
        Some(r) => r,
        None => {
            let settings = ProbeSettings {
                receptive_fields: false,
                ..grid.probe.clone()
            };
            let reports = probe_layers(&model, &model.config.probed_layers(), sweeps, &settings)?;
            let records: Vec<CellRecord> = reports.iter().map(|r| r.record(&key.model_id())).collect();
            let text = format_records(&records);
            let (header, body) = text.split_once('\n').expect("header line");
            if let Some(p) = cells_path.parent() {
                fs::create_dir_all(p)?;
            }
            fs::write(&cells_path, format!("{header}\n{fingerprint}\n{body}"))?;
            log(&format!("{}: probed {} cells", key.model_id(), records.len()));
            records
        }
    };
    Ok(ModelOutcome {
        key,
        test_accuracy: model.meta.test_accuracy,
        shuffled_test_accuracy: model.meta.shuffled_test_accuracy,
        reused_checkpoint: reused,
        records,
    })
}

/// Train (or reuse), probe and aggregate every job of the grid, then write
/// `summary.csv`, hue CSVs and SVG figures into the output directory.
///
/// Data sets are given in RGB and converted to the grid's colour space here.
pub fn run_grid(
    grid: &ExperimentGrid,
    train_set: &Cifar10Set,
    test_set: Option<&Cifar10Set>,
    log: &(dyn Fn(&str) + Sync),
) -> Result<GridOutcome> {
    grid.validate()?;
    fs::create_dir_all(&grid.out_dir)?;
    let space = grid.template.colour_space;
    let convert = |set: &Cifar10Set| {
        let mut s = set.clone();
        convert_set(&mut s, space);
        s
    };
    let converted;
    let (train_set, test_set) = if space == ColourSpace::Rgb {
        (train_set, test_set)
    } else {
        converted = (convert(train_set), test_set.map(convert));
        (&converted.0, converted.1.as_ref())
    };
    let sweeps = grid.probe.sweeps(space)?;
    let keys = grid.keys();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(grid.jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    let results: Vec<(TrialKey, Result<ModelOutcome>)> = pool.install(|| {
        keys.par_iter()
            .map(|&k| (k, run_job(grid, k, train_set, test_set, &sweeps, log)))
            .collect()
    });

    let mut models = Vec::new();
    let mut excluded = Vec::new();
    for (key, result) in results {
        match result {
            Ok(m) => models.push(m),
            Err(Error::Diverged(reason)) => {
                log(&format!("warning: {} diverged and is excluded: {reason}", key.model_id()));
                excluded.push((key, reason));
            }
            Err(e) => return Err(e),
        }
    }
    let cells: Vec<ModelCells> = models
        .iter()
        .map(|m| ModelCells {
            bottleneck: m.key.bottleneck,
            depth: m.key.depth,
            trial: m.key.trial,
            records: m.records.clone(),
        })
        .collect();
    let summary = aggregate(&cells);
    let written = write_outputs(&summary, &grid.out_dir)?;
    Ok(GridOutcome {
        summary,
        models,
        excluded,
        written,
    })
}

pub fn write_outputs(summary: &PopulationSummary, dir: &Path) -> Result<Vec<PathBuf>> {
    let csv_path = dir.join("summary.csv");
    emit_csv(summary, &csv_path)?;
    let mut written = vec![csv_path];
    written.extend(emit_hue_csvs(summary, dir)?);
    written.extend(emit_svg(summary, dir)?);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_cover_the_lattice() {
        let mut g = ExperimentGrid::ci("x");
        g.trials = 2;
        assert_eq!(g.keys().len(), 3 * 2 * 2);
        g.validate().unwrap();
        g.trials = 0;
        assert!(g.validate().is_err());
        let g = ExperimentGrid::new("x");
        assert_eq!(g.keys().len(), 6 * 5 * 3);
    }

    #[test]
    fn trial_seeds_are_distinct_and_stable() {
        let g = ExperimentGrid::ci("x");
        let seeds: std::collections::BTreeSet<u64> = g.keys().iter().map(|&k| g.config_for(k).seed).collect();
        assert_eq!(seeds.len(), g.keys().len());
        let k = g.keys()[3];
        assert_eq!(trial_seed(0, k), trial_seed(0, k));
        assert_ne!(trial_seed(0, k), trial_seed(1, k));
    }
}
