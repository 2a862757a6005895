//! `qra` command-line interface.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qra::protocol::{
    generate_data, generate_keys, reconstruct, solve_qra, spectral_radius_probe, DecodePath,
    SolveOptions,
};
use qra::readout::mse;
use qra::streams::StreamKey;
use qra_harness::cache::compiled_pair;
use qra_harness::config::{ExperimentConfig, ExperimentId};
use qra_harness::experiment::{read_results, run_experiment, write_results_csv};
use qra_harness::selftest;
use qra_harness::summary::{summarize, write_summary};

#[derive(Parser)]
#[command(
    name = "qra",
    about = "Quantum reservoir autoencoder experiment runner",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment batch and write its results CSV.
    Run(RunArgs),
    /// Aggregate results CSVs into summary tables and pairwise comparisons.
    Summarize(SummarizeArgs),
    /// Estimate the spectral radius of the one-iteration map on converged
    /// ideal runs.
    Probe(ProbeArgs),
    /// Run the invariant self-test suite.
    Selftest,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment id: 1,2,3,5,6,7,8,henon,delay,nn,ttn.
    #[arg(long)]
    exp: ExperimentId,
    /// Comma-separated seeds (default per experiment).
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Trials per seed.
    #[arg(long)]
    trials: Option<u32>,
    /// Comma-separated data lengths.
    #[arg(long, value_delimiter = ',')]
    nc: Option<Vec<usize>>,
    /// Output directory (also OUTPUT_DIR env, default ./results).
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value config file applied before the other flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write 0 in the wall_time_ms column for byte-identical reruns.
    #[arg(long)]
    no_timing: bool,
    /// Dump reservoir specs and protocol states as JSON.
    #[arg(long)]
    dump_state: bool,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Results CSV file or directory containing *_results.csv files.
    #[arg(long = "in", value_name = "PATH")]
    input: PathBuf,
    /// Pairwise comparison EXPa:EXPb (repeatable).
    #[arg(long = "compare", value_name = "A:B")]
    compare: Vec<String>,
    /// Directory for summary.csv / comparisons.csv (defaults to the input
    /// directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProbeArgs {
    /// Reservoir seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated data lengths.
    #[arg(long, value_delimiter = ',', default_value = "10,20")]
    nc: Vec<usize>,
    /// Finite-difference step. The ideal-solve map is linear in the
    /// ciphertexts, so larger steps carry no truncation error and suppress
    /// differencing roundoff against the tiny sub-1 spectral gap.
    #[arg(long, default_value_t = 1e-2)]
    epsilon: f64,
    /// key=value config file (register size, reservoir parameters).
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse(); // clap exits with code 2 on usage errors
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Summarize(args) => cmd_summarize(args),
        Command::Probe(args) => cmd_probe(args),
        Command::Selftest => cmd_selftest(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<(), String> {
    let mut config = ExperimentConfig::for_experiment(args.exp);
    if let Some(path) = &args.config {
        config.apply_file(path)?;
        config.exp_id = args.exp;
    }
    if let Some(seeds) = args.seeds {
        config.seeds = seeds;
    }
    if let Some(trials) = args.trials {
        config.trials = trials;
    }
    if let Some(nc) = args.nc {
        config.nc_list = nc;
    }
    if let Some(out) = args.out {
        config.output_dir = out;
    }
    config.zero_wall_time |= args.no_timing;
    config.dump_state |= args.dump_state;
    config.validate()?;

    let results = run_experiment(&config)?;
    let path = config.results_file();
    write_results_csv(&path, &results).map_err(|e| format!("writing {}: {e}", path.display()))?;
    let (summary, _) = summarize(&results, &[]);
    for row in &summary {
        println!(
            "exp {} nc {:>3}: mean mse1 = {:.4e} (n = {})",
            row.exp_id, row.nc, row.mean_mse1, row.n_runs
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_summarize(args: SummarizeArgs) -> Result<(), String> {
    let results = read_results(&args.input)?;
    let comparisons: Vec<(String, String)> = args
        .compare
        .iter()
        .map(|spec| {
            spec.split_once(':')
                .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
                .ok_or_else(|| format!("bad --compare '{spec}', expected EXPa:EXPb"))
        })
        .collect::<Result<_, String>>()?;
    let (summary, comparison_rows) = summarize(&results, &comparisons);

    for row in &summary {
        println!(
            "exp {} nc {:>3}: mse1 {:.4e} +- {:.2e}, loss {:.4e} (n = {})",
            row.exp_id, row.nc, row.mean_mse1, row.std_mse1, row.mean_loss, row.n_runs
        );
    }
    for c in &comparison_rows {
        let stats = match (c.p_wilcoxon, c.p_t) {
            (Some(pw), Some(pt)) => format!(
                "W = {}, p_W = {:.3e}, |t| = {:.2}, p_t = {:.3e}",
                c.wilcoxon_w.unwrap(),
                pw,
                c.t_abs.unwrap(),
                pt
            ),
            _ => format!("({})", c.note),
        };
        println!(
            "exp {} vs {} at nc {:>3}: ratio {:.3} over {} pairs; {stats}",
            c.exp_a, c.exp_b, c.nc, c.mean_ratio, c.n_pairs
        );
    }

    let out_dir = args.out.unwrap_or_else(|| {
        if args.input.is_dir() {
            args.input.clone()
        } else {
            args.input
                .parent()
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("."))
        }
    });
    write_summary(&out_dir, &summary, &comparison_rows)
        .map_err(|e| format!("writing summary: {e}"))?;
    println!("wrote {}", out_dir.join("summary.csv").display());
    Ok(())
}

fn cmd_probe(args: ProbeArgs) -> Result<(), String> {
    let mut config = ExperimentConfig::for_experiment(ExperimentId::Exp1);
    if let Some(path) = &args.config {
        config.apply_file(path)?;
        config.exp_id = ExperimentId::Exp1;
    }
    if !config.noise.is_ideal() {
        return Err("the spectral probe runs on ideal-noise solves only".into());
    }
    let noise = config.noise;
    let opts = SolveOptions::default();
    let pair = compiled_pair(args.seed, config.n_data_qubits, &config.reservoir)
        .map_err(|e| e.to_string())?;
    for &nc in &args.nc {
        let streams = StreamKey::from_label(&config.run_label(args.seed, 0, nc));
        let keys = generate_keys(&mut streams.child("keys").rng(), nc, config.n_data_qubits);
        let data = generate_data(&mut streams.child("data").rng(), nc);
        let state = solve_qra(&pair.a, &pair.b, &data, &keys, &noise, &opts, &streams)
            .map_err(|e| e.to_string())?;
        let recon = reconstruct(
            DecodePath::One,
            &state,
            &pair.a,
            &pair.b,
            &keys,
            &noise,
            &streams,
        )
        .map_err(|e| e.to_string())?;
        let radius = spectral_radius_probe(
            &state,
            &pair.a,
            &pair.b,
            &data,
            &keys,
            &noise,
            &opts,
            &streams,
            args.epsilon,
        )
        .map_err(|e| e.to_string())?;
        println!(
            "seed {} nc {:>3}: spectral radius = {:.12}, converged_at = {:?}, mse1 = {:.3e}",
            args.seed,
            nc,
            radius,
            state.converged_at,
            mse(data.values(), &recon)
        );
    }
    Ok(())
}

fn cmd_selftest() -> Result<(), String> {
    let results = selftest::run_all();
    let mut failed = 0;
    for check in &results {
        let status = if check.passed { "PASS" } else { "FAIL" };
        println!("[{status}] {}: {}", check.name, check.detail);
        if !check.passed {
            failed += 1;
        }
    }
    if failed == 0 {
        println!("selftest: {} checks passed", results.len());
        Ok(())
    } else {
        Err(format!("{failed} selftest check(s) failed"))
    }
}
