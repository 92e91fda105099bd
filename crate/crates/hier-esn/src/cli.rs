//! Command-line front end.
//!
//! Subcommands: `generate` emits task series as CSV, `optimize` runs the GA
//! and writes the result, `evaluate` re-runs a genome on fresh build seeds,
//! `analyze` runs the reservoir-quality probes, `experiment` runs one config
//! and `matrix` runs a list of configs. Exit status is 0 on success, 1 on a
//! runtime error and 2 on a usage error.

use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::{run_experiment, run_matrix, CellOutcome, ExperimentConfig, TaskKind};
use crate::optimizer::{optimize, Genome};
use crate::reservoir::ReservoirNetwork;
use crate::tasks::{gen_mackey_glass, gen_mso12, load_santa_fe, narma10_raw};
use crate::{analysis, harness};

#[derive(Parser)]
#[command(
    name = "hier-esn",
    version,
    about = "Hierarchical echo state network benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark series and write it as CSV.
    Generate {
        /// Task: narma10, santa_fe, mackey_glass or mso12.
        task: TaskKind,
        #[arg(long, default_value_t = 5000)]
        length: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Mackey-Glass delay.
        #[arg(long, default_value_t = 17.0)]
        tau: f64,
        /// Santa Fe recording (one sample per line).
        #[arg(long)]
        data_path: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the genetic algorithm for a config and write the GA result.
    Optimize {
        /// Experiment config (JSON).
        config: PathBuf,
        /// Override the config's root seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (defaults to the config's out_dir or ".").
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a genome on fresh build seeds and report test NRMSE stats.
    Evaluate {
        /// Experiment config (JSON).
        config: PathBuf,
        /// Genome JSON: either `{"genes": [...]}` or a GA result file.
        #[arg(long)]
        genome: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reservoir-quality probes on a serialized network.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Run one experiment config end to end.
    Experiment {
        /// Experiment config (JSON).
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a list of experiment configs (JSON array), in parallel.
    Matrix {
        /// Configs file (JSON array of experiment configs).
        configs: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Optimize once per (task, architecture, n_subs) group and reuse
        /// the genome across sizes.
        #[arg(long)]
        reuse_genome: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Node-state means and standard deviations per sub-reservoir.
    States(StatesArgs),
    /// Per-sub-reservoir frequency spectra under the MSO12 drive.
    Spectrum(SpectrumArgs),
    /// Memory capacity.
    Mc(McArgs),
}

#[derive(Args)]
struct StatesArgs {
    /// Serialized network (network_best.json from an experiment).
    #[arg(long)]
    network: PathBuf,
    /// Task supplying the test drive.
    #[arg(long)]
    task: TaskKind,
    #[arg(long)]
    data_path: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for states.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long)]
    network: PathBuf,
    /// MSO12 drive length.
    #[arg(long, default_value_t = 4196)]
    length: usize,
    /// FFT length (power of two).
    #[arg(long, default_value_t = 4096)]
    fft_len: usize,
    /// Output directory for spectrum.csv and peaks.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct McArgs {
    #[arg(long)]
    network: PathBuf,
    /// Maximum delay K.
    #[arg(long, default_value_t = 100)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for mc.csv and mc.json.
    #[arg(long)]
    out: PathBuf,
}

/// Parse `argv` and run; returns the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap uses 0 for --help/--version and 2 for usage errors.
            let _ = e.print();
            return e.exit_code();
        }
    };
    configure_thread_pool();
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Cap rayon's parallelism with `HIER_ESN_THREADS`; the default is the
/// number of available cores.
fn configure_thread_pool() {
    if let Ok(v) = std::env::var("HIER_ESN_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            _ => log::warn!("ignoring invalid HIER_ESN_THREADS={v:?}"),
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate {
            task,
            length,
            seed,
            tau,
            data_path,
            out,
        } => generate(task, length, seed, tau, data_path.as_deref(), &out),
        Command::Optimize { config, seed, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.root_seed = s;
            }
            let out_dir = out
                .or_else(|| cfg.out_dir.clone())
                .unwrap_or_else(|| PathBuf::from("."));
            run_optimize(&cfg, &out_dir)
        }
        Command::Evaluate {
            config,
            genome,
            seed,
            out,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.root_seed = s;
            }
            if let Some(dir) = out {
                cfg.out_dir = Some(dir);
            }
            let genome = load_genome(&genome)?;
            let result = harness::run_experiment_with_genome(&cfg, Some(&genome))?;
            print_summary(&result);
            Ok(())
        }
        Command::Analyze(cmd) => analyze(cmd),
        Command::Experiment { config, seed } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.root_seed = s;
            }
            if cfg.out_dir.is_none() {
                cfg.out_dir = Some(PathBuf::from(format!("out/{}", cfg.cell_name())));
            }
            let result = run_experiment(&cfg)?;
            print_summary(&result);
            Ok(())
        }
        Command::Matrix {
            configs,
            out,
            reuse_genome,
            seed,
        } => {
            let text = std::fs::read_to_string(&configs)?;
            let mut cells: Vec<ExperimentConfig> = serde_json::from_str(&text)?;
            if let Some(s) = seed {
                for c in &mut cells {
                    c.root_seed = s;
                }
            }
            let out_dir = out.unwrap_or_else(|| PathBuf::from("out/matrix"));
            let outcomes = run_matrix(&cells, Some(&out_dir), reuse_genome)?;
            let mut failed = 0;
            for outcome in &outcomes {
                match outcome {
                    CellOutcome::Done(r) => println!(
                        "{}: median test NRMSE {:.4}",
                        r.config.cell_name(),
                        r.summary.median
                    ),
                    CellOutcome::Failed { cell, error } => {
                        failed += 1;
                        eprintln!("{cell}: FAILED: {error}");
                    }
                }
            }
            println!(
                "matrix: {}/{} cells done, results in {}",
                outcomes.len() - failed,
                outcomes.len(),
                out_dir.display()
            );
            if failed == outcomes.len() {
                return Err(Error::InvalidArgument("every matrix cell failed".into()));
            }
            Ok(())
        }
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(serde::Deserialize)]
struct GenomeDoc {
    #[serde(alias = "best_genome")]
    genes: serde_json::Value,
}

fn load_genome(path: &Path) -> Result<Genome> {
    let text = std::fs::read_to_string(path)?;
    let doc: GenomeDoc = serde_json::from_str(&text)?;
    // Accept either a plain array of genes or a GA result's best_genome
    // object ({"genes": [...]}).
    let genes: Vec<f64> = match &doc.genes {
        serde_json::Value::Array(_) => serde_json::from_value(doc.genes.clone())?,
        serde_json::Value::Object(map) => match map.get("genes") {
            Some(v) => serde_json::from_value(v.clone())?,
            None => {
                return Err(Error::DataFormat(format!(
                    "{}: expected genes array",
                    path.display()
                )))
            }
        },
        _ => {
            return Err(Error::DataFormat(format!(
                "{}: expected genes array",
                path.display()
            )))
        }
    };
    Genome::new(genes)
}

fn generate(
    task: TaskKind,
    length: usize,
    seed: u64,
    tau: f64,
    data_path: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let mut csv = String::new();
    match task {
        TaskKind::Narma10 => {
            let (u, y) = narma10_raw(length, seed)?;
            csv.push_str("t,u,y\n");
            for t in 0..length {
                csv.push_str(&format!("{t},{},{}\n", u.values[t], y.values[t]));
            }
        }
        TaskKind::MackeyGlass => {
            let series = gen_mackey_glass(length, tau, 0.1, 10, seed)?;
            csv.push_str("t,value\n");
            for (t, v) in series.values.iter().enumerate() {
                csv.push_str(&format!("{t},{v}\n"));
            }
        }
        TaskKind::Mso12 => {
            let series = gen_mso12(length);
            csv.push_str("t,value\n");
            for (t, v) in series.values.iter().enumerate() {
                csv.push_str(&format!("{t},{v}\n"));
            }
        }
        TaskKind::SantaFe => {
            let path = data_path
                .ok_or_else(|| Error::InvalidArgument("santa_fe needs --data-path".into()))?;
            let series = load_santa_fe(path)?;
            csv.push_str("t,value\n");
            for (t, v) in series.values.iter().take(length).enumerate() {
                csv.push_str(&format!("{t},{v}\n"));
            }
        }
    }
    std::fs::write(out, csv)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn run_optimize(cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    cfg.validate()?;
    let lengths = cfg.task.default_lengths();
    let split = cfg
        .task
        .build_split(lengths, cfg.task_seed(), cfg.data_path.as_deref())?;
    let template = cfg.template_topology()?;
    let result = optimize(
        &cfg.ga_config(),
        &template,
        &split,
        cfg.feature_spec(),
        cfg.lambda,
    )?;

    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("ga_result.json"), result.to_json()?)?;
    let mut history = Vec::new();
    result.write_history_csv(&mut history)?;
    std::fs::write(out_dir.join("ga_history.csv"), history)?;

    let topology = template.with_hyper(result.best_genome.to_hyper_params()?)?;
    let net = ReservoirNetwork::build(&topology, cfg.final_seeds()[0])?;
    std::fs::write(out_dir.join("network_best.json"), net.to_json()?)?;

    println!(
        "best validation NRMSE {:.6} after {} evaluations; outputs in {}",
        result.best_nrmse,
        result.evaluations,
        out_dir.display()
    );
    Ok(())
}

fn analyze(cmd: AnalyzeCommand) -> Result<()> {
    match cmd {
        AnalyzeCommand::States(args) => {
            let mut net = load_network(&args.network)?;
            let lengths = args.task.default_lengths();
            let split = args
                .task
                .build_split(lengths, args.seed, args.data_path.as_deref())?;
            let inputs = split.input_matrix();
            let test = split.test_range();
            let test_inputs = inputs.slice(ndarray::s![test, ..]).to_owned();
            let dist = analysis::node_state_distribution(&mut net, test_inputs.view(), 100)?;

            std::fs::create_dir_all(&args.out)?;
            let mut buf = Vec::new();
            analysis::write_state_distribution_csv(&dist, &mut buf)?;
            std::fs::write(args.out.join("states.csv"), buf)?;
            println!("wrote {}", args.out.join("states.csv").display());
            Ok(())
        }
        AnalyzeCommand::Spectrum(args) => {
            let mut net = load_network(&args.network)?;
            let profile = analysis::sub_reservoir_spectrum(&mut net, args.length, args.fft_len)?;

            std::fs::create_dir_all(&args.out)?;
            let mut buf = Vec::new();
            analysis::write_spectrum_csv(&profile, &mut buf)?;
            std::fs::write(args.out.join("spectrum.csv"), buf)?;
            let mut buf = Vec::new();
            analysis::write_spectrum_peaks_csv(&profile, &mut buf)?;
            std::fs::write(args.out.join("peaks.csv"), buf)?;
            println!(
                "wrote {} and {}",
                args.out.join("spectrum.csv").display(),
                args.out.join("peaks.csv").display()
            );
            Ok(())
        }
        AnalyzeCommand::Mc(args) => {
            let mut net = load_network(&args.network)?;
            let cfg = analysis::McConfig {
                max_delay: args.k,
                ..analysis::McConfig::default()
            };
            let result = analysis::memory_capacity(&mut net, &cfg, args.seed)?;

            std::fs::create_dir_all(&args.out)?;
            let mut buf = Vec::new();
            analysis::write_memory_capacity_csv(&result, &mut buf)?;
            std::fs::write(args.out.join("mc.csv"), buf)?;
            std::fs::write(
                args.out.join("mc.json"),
                serde_json::to_string_pretty(&result)?,
            )?;
            println!("memory capacity {:.3} over {} delays", result.total, args.k);
            Ok(())
        }
    }
}

fn load_network(path: &Path) -> Result<ReservoirNetwork> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    ReservoirNetwork::from_json(&text)
}

fn print_summary(result: &harness::ExperimentResult) {
    println!(
        "{}: test NRMSE min {:.4} / p25 {:.4} / median {:.4} / p75 {:.4} / max {:.4} / mean {:.4}",
        result.config.cell_name(),
        result.summary.min,
        result.summary.p25,
        result.summary.median,
        result.summary.p75,
        result.summary.max,
        result.summary.mean
    );
    if let Some(dir) = &result.config.out_dir {
        println!("outputs in {}", dir.display());
    }
}
