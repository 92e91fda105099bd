//! Experiment runner: task setup, GA optimization, multi-seed evaluation,
//! result persistence, and the experiment matrix.
//!
//! Every experiment is a pure function of its config. The config carries one
//! 64-bit root seed; the task generator, the GA, the fitness template and
//! each final build seed get children derived with the crate's seed
//! splitting rule, so replaying a config reproduces identical numbers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::numerics::child_seed;
use crate::optimizer::{optimize, GaConfig, Genome};
use crate::readout::{nrmse, predict_sequence, train_readout_rows, FeatureSpec};
use crate::reservoir::{ArchKind, HyperParams, ReservoirNetwork, Topology};
use crate::tasks::{
    gen_mackey_glass, gen_mso12, load_santa_fe, narma10_raw, split_dataset, DatasetSplit,
    SplitLengths, TimeSeries,
};

// Seed-derivation indices off the root seed.
const SEED_TASK: u64 = 1;
const SEED_GA: u64 = 2;
const SEED_FITNESS: u64 = 3;
const SEED_MC: u64 = 4;
const SEED_FINAL_BASE: u64 = 100;

/// The benchmark task an experiment runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Narma10,
    SantaFe,
    MackeyGlass,
    Mso12,
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TaskKind::Narma10 => write!(f, "narma10"),
            TaskKind::SantaFe => write!(f, "santa_fe"),
            TaskKind::MackeyGlass => write!(f, "mackey_glass"),
            TaskKind::Mso12 => write!(f, "mso12"),
        }
    }
}

impl std::str::FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "narma10" => Ok(TaskKind::Narma10),
            "santa_fe" => Ok(TaskKind::SantaFe),
            "mackey_glass" => Ok(TaskKind::MackeyGlass),
            "mso12" => Ok(TaskKind::Mso12),
            other => Err(Error::InvalidArgument(format!("unknown task {other:?}"))),
        }
    }
}

impl TaskKind {
    /// Segment lengths: washout / train / validation / test.
    pub fn default_lengths(&self) -> SplitLengths {
        match self {
            TaskKind::Narma10 => SplitLengths::new(100, 3000, 100, 1000),
            TaskKind::SantaFe => SplitLengths::new(100, 3000, 1000, 1000),
            TaskKind::MackeyGlass => SplitLengths::new(100, 1000, 1000, 1000),
            // One-step-ahead prediction with NARMA10-style lengths.
            TaskKind::Mso12 => SplitLengths::new(100, 3000, 100, 1000),
        }
    }

    /// Prediction lead: the label for input `t` is the target at
    /// `t + horizon`.
    pub fn horizon(&self) -> usize {
        match self {
            TaskKind::MackeyGlass => 84,
            _ => 1,
        }
    }

    /// The readout sees the raw input alongside the reservoir state only
    /// for NARMA10, where the prediction needs the current drive.
    pub fn default_feature_spec(&self) -> FeatureSpec {
        FeatureSpec {
            append_raw_input: *self == TaskKind::Narma10,
            ..FeatureSpec::default()
        }
    }

    /// Produce the raw input and target series for this task, long enough
    /// for `lengths` plus the horizon.
    pub fn build_series(
        &self,
        lengths: SplitLengths,
        horizon: usize,
        seed: u64,
        data_path: Option<&Path>,
    ) -> Result<(TimeSeries, TimeSeries)> {
        let needed = lengths.total() + horizon;
        match self {
            TaskKind::Narma10 => narma10_raw(needed, seed),
            TaskKind::MackeyGlass => {
                let series = gen_mackey_glass(needed, 17.0, 0.1, 10, seed)?;
                Ok((series.clone(), series))
            }
            TaskKind::Mso12 => {
                let series = gen_mso12(needed);
                Ok((series.clone(), series))
            }
            TaskKind::SantaFe => {
                let path = data_path.ok_or_else(|| {
                    Error::InvalidArgument(
                        "santa_fe needs data_path pointing at the laser recording".into(),
                    )
                })?;
                let series = load_santa_fe(path)?;
                Ok((series.clone(), series))
            }
        }
    }

    /// Assemble the dataset split for this task.
    pub fn build_split(
        &self,
        lengths: SplitLengths,
        seed: u64,
        data_path: Option<&Path>,
    ) -> Result<DatasetSplit> {
        let horizon = self.horizon();
        let (input, target) = self.build_series(lengths, horizon, seed, data_path)?;
        split_dataset(&input, &target, lengths, horizon)
    }
}

/// GA settings as they appear in config files; seeds are derived from the
/// experiment root seed, not stored here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaSettings {
    pub generations: usize,
    pub population_size: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
}

impl Default for GaSettings {
    fn default() -> Self {
        // Desk-scale default; the stock budget is 1000 generations.
        Self {
            generations: 300,
            population_size: 15,
            crossover_rate: 0.33,
            mutation_rate: 0.33,
        }
    }
}

fn default_n_final_seeds() -> usize {
    10
}

fn default_lambda() -> f64 {
    1e-8
}

/// One experiment cell: a task, an architecture and its size, the GA
/// budget, and the root seed everything derives from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    pub architecture: ArchKind,
    pub total_nodes: usize,
    pub n_subs: usize,
    #[serde(default)]
    pub ga: GaSettings,
    #[serde(default = "default_n_final_seeds")]
    pub n_final_seeds: usize,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub root_seed: u64,
    #[serde(default)]
    pub data_path: Option<PathBuf>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Readout feature overrides; the task default applies when absent.
    #[serde(default)]
    pub append_raw_input: Option<bool>,
    #[serde(default)]
    pub append_bias: Option<bool>,
}

impl ExperimentConfig {
    pub fn new(task: TaskKind, architecture: ArchKind, total_nodes: usize, n_subs: usize) -> Self {
        Self {
            task,
            architecture,
            total_nodes,
            n_subs,
            ga: GaSettings::default(),
            n_final_seeds: default_n_final_seeds(),
            lambda: default_lambda(),
            root_seed: 0,
            data_path: None,
            out_dir: None,
            append_raw_input: None,
            append_bias: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.architecture == ArchKind::Shallow && self.n_subs != 1 {
            return Err(Error::InvalidArgument(format!(
                "shallow architecture requires n_subs = 1, got {}",
                self.n_subs
            )));
        }
        if self.n_subs == 0 || self.total_nodes < self.n_subs {
            return Err(Error::InvalidArgument(format!(
                "cannot split {} nodes into {} sub-reservoirs",
                self.total_nodes, self.n_subs
            )));
        }
        if self.n_final_seeds == 0 {
            return Err(Error::InvalidArgument("n_final_seeds must be >= 1".into()));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::InvalidArgument("lambda must be >= 0".into()));
        }
        Ok(())
    }

    pub fn feature_spec(&self) -> FeatureSpec {
        let mut spec = self.task.default_feature_spec();
        if let Some(v) = self.append_raw_input {
            spec.append_raw_input = v;
        }
        if let Some(v) = self.append_bias {
            spec.append_bias = v;
        }
        spec
    }

    /// Placeholder-hyperparameter topology used as the GA template.
    pub fn template_topology(&self) -> Result<Topology> {
        let hp = HyperParams::new(0.5, 0.5, 0.5)?;
        Topology::equal_split(
            self.architecture,
            self.total_nodes,
            self.n_subs,
            1,
            vec![hp; self.n_subs],
        )
    }

    pub fn ga_config(&self) -> GaConfig {
        GaConfig {
            generations: self.ga.generations,
            population_size: self.ga.population_size,
            crossover_rate: self.ga.crossover_rate,
            mutation_rate: self.ga.mutation_rate,
            duels_per_generation: 1,
            fitness_seed: child_seed(self.root_seed, SEED_FITNESS),
            ga_seed: child_seed(self.root_seed, SEED_GA),
        }
    }

    pub fn task_seed(&self) -> u64 {
        child_seed(self.root_seed, SEED_TASK)
    }

    pub fn mc_seed(&self) -> u64 {
        child_seed(self.root_seed, SEED_MC)
    }

    /// Build seeds for the final fresh-reservoir evaluations.
    pub fn final_seeds(&self) -> Vec<u64> {
        (0..self.n_final_seeds)
            .map(|i| child_seed(self.root_seed, SEED_FINAL_BASE + i as u64))
            .collect()
    }

    pub fn cell_name(&self) -> String {
        format!(
            "{}-{}-n{}-s{}",
            self.task, self.architecture, self.total_nodes, self.n_subs
        )
    }
}

/// Five-number summary plus mean; percentiles use linear interpolation
/// between order statistics.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SummaryStats {
    pub min: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub max: f64,
    pub mean: f64,
}

impl SummaryStats {
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("no samples to summarize".into()));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self {
            min: sorted[0],
            p25: percentile_linear(&sorted, 25.0),
            median: percentile_linear(&sorted, 50.0),
            p75: percentile_linear(&sorted, 75.0),
            max: sorted[sorted.len() - 1],
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        })
    }
}

/// Percentile of a sorted sample by linear interpolation: rank
/// `h = (n - 1) p / 100` interpolated between the surrounding order
/// statistics.
pub fn percentile_linear(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Result of one experiment cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub version: String,
    pub config: ExperimentConfig,
    pub best_genome: Vec<f64>,
    pub best_validation_nrmse: f64,
    pub ga_evaluations: usize,
    /// One (build seed, test NRMSE) pair per final evaluation.
    pub seed_nrmses: Vec<(u64, f64)>,
    pub summary: SummaryStats,
    /// Wall-clock seconds; excluded from the serialized result so replays
    /// are byte-identical.
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

impl ExperimentResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Test-segment NRMSE of one freshly built reservoir under a fixed genome.
pub fn test_nrmse(
    topology: &Topology,
    build_seed: u64,
    task: &DatasetSplit,
    spec: FeatureSpec,
    lambda: f64,
) -> Result<f64> {
    let mut net = ReservoirNetwork::build(topology, build_seed)?;
    let inputs = task.input_matrix();
    let targets = task.target_matrix();
    let trace = net.run_sequence(inputs.view(), true)?;
    let readout = train_readout_rows(
        &trace,
        inputs.view(),
        targets.view(),
        task.train_range(),
        spec,
        lambda,
    )?;
    let predictions = predict_sequence(&readout, &trace, inputs.view())?;
    let test = task.test_range();
    nrmse(
        predictions.slice(ndarray::s![test.clone(), 0]),
        targets.slice(ndarray::s![test, 0]),
    )
}

/// Run one experiment: generate or load the task data, optimize the
/// hyperparameters on validation NRMSE, then re-evaluate the winning genome
/// on fresh build seeds and summarize the test-segment NRMSEs.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    run_experiment_with_genome(config, None)
}

/// Like [`run_experiment`], but optionally skipping the GA in favor of a
/// preset genome (used when a genome is reused across matrix cells).
pub fn run_experiment_with_genome(
    config: &ExperimentConfig,
    preset: Option<&Genome>,
) -> Result<ExperimentResult> {
    let start = Instant::now();
    config.validate()?;

    let lengths = config.task.default_lengths();
    let split =
        config
            .task
            .build_split(lengths, config.task_seed(), config.data_path.as_deref())?;

    let template = config.template_topology()?;
    let spec = config.feature_spec();

    let (best_genome, best_validation, ga_evaluations, history) = match preset {
        Some(genome) => (genome.clone(), f64::NAN, 0, Vec::new()),
        None => {
            let ga = optimize(&config.ga_config(), &template, &split, spec, config.lambda)?;
            (
                ga.best_genome.clone(),
                ga.best_nrmse,
                ga.evaluations,
                ga.history,
            )
        }
    };

    let topology = template.with_hyper(best_genome.to_hyper_params()?)?;
    let seeds = config.final_seeds();
    let nrmses: Vec<(u64, f64)> = seeds
        .par_iter()
        .map(|&seed| {
            Ok((
                seed,
                test_nrmse(&topology, seed, &split, spec, config.lambda)?,
            ))
        })
        .collect::<Result<_>>()?;

    let values: Vec<f64> = nrmses.iter().map(|&(_, v)| v).collect();
    let result = ExperimentResult {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        best_genome: best_genome.genes().to_vec(),
        best_validation_nrmse: best_validation,
        ga_evaluations,
        seed_nrmses: nrmses,
        summary: SummaryStats::from_samples(&values)?,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };

    if let Some(dir) = &config.out_dir {
        write_experiment_outputs(dir, &result, &topology, &history)?;
    }
    log::info!(
        "{}: median test NRMSE {:.4} ({:.1}s)",
        config.cell_name(),
        result.summary.median,
        result.wall_clock_secs
    );
    Ok(result)
}

fn write_experiment_outputs(
    dir: &Path,
    result: &ExperimentResult,
    topology: &Topology,
    ga_history: &[f64],
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("result.json"), result.to_json()?)?;

    let mut seeds_csv = String::from("seed,nrmse\n");
    for (seed, v) in &result.seed_nrmses {
        seeds_csv.push_str(&format!("{seed},{v}\n"));
    }
    std::fs::write(dir.join("seeds.csv"), seeds_csv)?;

    if !ga_history.is_empty() {
        let mut history_csv = String::from("generation,best_nrmse\n");
        for (g, v) in ga_history.iter().enumerate() {
            history_csv.push_str(&format!("{},{v}\n", g + 1));
        }
        std::fs::write(dir.join("ga_history.csv"), history_csv)?;
    }

    // Optimized network, rebuildable from topology + seed, for the analyze
    // subcommands.
    let first_seed = result.seed_nrmses.first().map(|&(s, _)| s).unwrap_or(0);
    let net = ReservoirNetwork::build(topology, first_seed)?;
    std::fs::write(dir.join("network_best.json"), net.to_json()?)?;
    Ok(())
}

/// Outcome of one matrix cell.
#[derive(Debug)]
pub enum CellOutcome {
    Done(Box<ExperimentResult>),
    Failed { cell: String, error: Error },
}

/// Run a list of experiment cells (in parallel across cells) and write a
/// combined `matrix.csv` plus a `failures.csv` for cells that errored.
/// Failed cells do not stop the rest.
///
/// With `reuse_genome`, cells sharing `(task, architecture, n_subs)` run
/// the GA only once — on the cell with the smallest total size — and the
/// other cells reuse that genome for their final evaluations.
pub fn run_matrix(
    configs: &[ExperimentConfig],
    out_dir: Option<&Path>,
    reuse_genome: bool,
) -> Result<Vec<CellOutcome>> {
    if configs.is_empty() {
        return Err(Error::InvalidArgument("empty experiment matrix".into()));
    }
    for c in configs {
        c.validate()?;
    }

    let mut presets: Vec<Option<Genome>> = vec![None; configs.len()];
    if reuse_genome {
        // Group indices by (task, architecture, n_subs); optimize the
        // smallest cell of each group first.
        let mut groups: std::collections::HashMap<(TaskKind, ArchKind, usize), Vec<usize>> =
            std::collections::HashMap::new();
        for (i, c) in configs.iter().enumerate() {
            groups
                .entry((c.task, c.architecture, c.n_subs))
                .or_default()
                .push(i);
        }
        let mut leads: Vec<usize> = groups
            .values()
            .map(|idxs| {
                *idxs
                    .iter()
                    .min_by_key(|&&i| configs[i].total_nodes)
                    .expect("group is nonempty")
            })
            .collect();
        leads.sort_unstable();

        let lead_genomes: Vec<(usize, Result<Genome>)> = leads
            .par_iter()
            .map(|&i| {
                let c = &configs[i];
                let lengths = c.task.default_lengths();
                let genome = (|| {
                    let split =
                        c.task
                            .build_split(lengths, c.task_seed(), c.data_path.as_deref())?;
                    let ga = optimize(
                        &c.ga_config(),
                        &c.template_topology()?,
                        &split,
                        c.feature_spec(),
                        c.lambda,
                    )?;
                    Ok(ga.best_genome)
                })();
                (i, genome)
            })
            .collect();

        for (lead, genome) in lead_genomes {
            if let Ok(g) = genome {
                let key = (
                    configs[lead].task,
                    configs[lead].architecture,
                    configs[lead].n_subs,
                );
                for &i in &groups[&key] {
                    presets[i] = Some(g.clone());
                }
            }
            // A failed lead leaves its group to optimize per cell.
        }
    }

    let outcomes: Vec<CellOutcome> = configs
        .par_iter()
        .zip(presets.par_iter())
        .map(|(config, preset)| {
            let mut cell_config = config.clone();
            if cell_config.out_dir.is_none() {
                if let Some(dir) = out_dir {
                    cell_config.out_dir = Some(dir.join(cell_config.cell_name()));
                }
            }
            match run_experiment_with_genome(&cell_config, preset.as_ref()) {
                Ok(result) => CellOutcome::Done(Box::new(result)),
                Err(error) => CellOutcome::Failed {
                    cell: config.cell_name(),
                    error,
                },
            }
        })
        .collect();

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let mut matrix_csv = String::from("architecture,total_nodes,n_subs,task,seed,nrmse\n");
        let mut failures_csv = String::from("cell,error\n");
        for outcome in &outcomes {
            match outcome {
                CellOutcome::Done(r) => {
                    for (seed, v) in &r.seed_nrmses {
                        matrix_csv.push_str(&format!(
                            "{},{},{},{},{seed},{v}\n",
                            r.config.architecture,
                            r.config.total_nodes,
                            r.config.n_subs,
                            r.config.task
                        ));
                    }
                }
                CellOutcome::Failed { cell, error } => {
                    failures_csv.push_str(&format!("{cell},{error}\n"));
                }
            }
        }
        std::fs::write(dir.join("matrix.csv"), matrix_csv)?;
        if outcomes
            .iter()
            .any(|o| matches!(o, CellOutcome::Failed { .. }))
        {
            std::fs::write(dir.join("failures.csv"), failures_csv)?;
        }
    }

    Ok(outcomes)
}
