//! Batch execution of protocol runs over (seed, trial, nc) tuples.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use qra::baselines::{build_circuit_baseline, solve_nn};
use qra::features::FeatureSource;
use qra::protocol::{
    generate_data, generate_keys, reconstruct, solve_qra, DecodePath, SolveOptions,
};
use qra::readout::mse;
use qra::streams::StreamKey;

use crate::cache::{compiled_pair, PARTNER_SEED_OFFSET};
use crate::config::{ExperimentConfig, ExperimentId};

/// Outcome of one protocol run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunResult {
    pub exp_id: String,
    pub seed: u64,
    pub trial: u32,
    pub nc: usize,
    pub mse_path1: f64,
    pub mse_path2: f64,
    pub final_loss: f64,
    pub converged_at: Option<usize>,
    pub wall_time_ms: u64,
    pub rng_fingerprint: String,
}

/// Fixed CSV schema.
pub const CSV_HEADER: &str =
    "exp_id,seed,trial,nc,mse_path1,mse_path2,final_loss,converged_at,wall_time_ms";

/// Run every (seed, trial, nc) tuple of the config in parallel and return the
/// results in canonical (seed, trial, nc) order.
///
/// Identical configs produce identical results; per-tuple randomness is
/// derived from the run label, so a tuple's outcome does not depend on which
/// other tuples run alongside it.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunResult>, String> {
    config.validate()?;

    let mut tuples = Vec::new();
    for &seed in &config.seeds {
        for trial in 0..config.trials {
            for &nc in &config.nc_list {
                tuples.push((seed, trial, nc));
            }
        }
    }

    // Compile shared reservoirs up front so parallel workers only read.
    if config.exp_id.is_reservoir() {
        for &seed in &config.seeds {
            compiled_pair(seed, config.n_data_qubits, &config.reservoir)
                .map_err(|e| e.to_string())?;
        }
    }

    let mut results: Vec<RunResult> = tuples
        .par_iter()
        .map(|&(seed, trial, nc)| run_tuple(config, seed, trial, nc))
        .collect::<Result<_, String>>()?;
    results.sort_by_key(|r| (r.seed, r.trial, r.nc));
    Ok(results)
}

fn run_tuple(
    config: &ExperimentConfig,
    seed: u64,
    trial: u32,
    nc: usize,
) -> Result<RunResult, String> {
    let streams = StreamKey::from_label(&config.run_label(seed, trial, nc));
    let started = Instant::now();

    let keys = generate_keys(
        &mut streams.child("keys").rng(),
        nc,
        config.n_data_qubits,
    );
    let data = generate_data(&mut streams.child("data").rng(), nc);

    let (mse_path1, mse_path2, final_loss, converged_at) = match config.exp_id {
        ExperimentId::Nn => {
            let outcome = solve_nn(&data, &keys, config.nn_hidden, &config.spsa, &streams)
                .map_err(|e| e.to_string())?;
            (
                outcome.mse_path1,
                outcome.mse_path2,
                outcome.final_loss,
                None,
            )
        }
        _ => {
            let opts = SolveOptions {
                n_iter: config.n_iter,
                loss_threshold: 1e-12,
                lambda: config.lambda,
            };
            let run =
                |a: &dyn FeatureSource, b: &dyn FeatureSource| -> Result<_, qra::Error> {
                    let state = solve_qra(a, b, &data, &keys, &config.noise, &opts, &streams)?;
                    let recon1 = reconstruct(
                        DecodePath::One,
                        &state,
                        a,
                        b,
                        &keys,
                        &config.noise,
                        &streams,
                    )?;
                    let recon2 = reconstruct(
                        DecodePath::Two,
                        &state,
                        a,
                        b,
                        &keys,
                        &config.noise,
                        &streams,
                    )?;
                    if config.dump_state {
                        dump_state_json(config, seed, trial, nc, &state)?;
                    }
                    Ok((
                        mse(data.values(), &recon1),
                        mse(data.values(), &recon2),
                        state.final_loss(),
                        state.converged_at,
                    ))
                };
            if let Some(kind) = config.exp_id.circuit_baseline_kind() {
                let mut rng = streams.child("baseline-params").rng();
                let a = build_circuit_baseline(kind, &config.baseline, &mut rng, 1)
                    .map_err(|e| e.to_string())?;
                let b = build_circuit_baseline(kind, &config.baseline, &mut rng, 2)
                    .map_err(|e| e.to_string())?;
                run(&a, &b).map_err(|e| e.to_string())?
            } else {
                let pair = compiled_pair(seed, config.n_data_qubits, &config.reservoir)
                    .map_err(|e| e.to_string())?;
                run(&pair.a, &pair.b).map_err(|e| e.to_string())?
            }
        }
    };

    let wall_time_ms = if config.zero_wall_time {
        0
    } else {
        started.elapsed().as_millis() as u64
    };
    Ok(RunResult {
        exp_id: config.exp_id.to_string(),
        seed,
        trial,
        nc,
        mse_path1,
        mse_path2,
        final_loss,
        converged_at,
        wall_time_ms,
        rng_fingerprint: streams.fingerprint(),
    })
}

fn dump_state_json(
    config: &ExperimentConfig,
    seed: u64,
    trial: u32,
    nc: usize,
    state: &qra::protocol::ProtocolState,
) -> Result<(), qra::Error> {
    let dir = config.output_dir.join("states");
    std::fs::create_dir_all(&dir).map_err(|_| qra::Error::NonFinite("output dir"))?;
    let path = dir.join(format!(
        "exp{}_seed{seed}_trial{trial}_nc{nc}.json",
        config.exp_id
    ));
    std::fs::write(&path, state.to_json()).map_err(|_| qra::Error::NonFinite("state dump"))?;
    if config.exp_id.is_reservoir() {
        for (label, res_seed) in [("a", seed), ("b", seed + PARTNER_SEED_OFFSET)] {
            let spec = qra::reservoir::build_reservoir(
                res_seed,
                config.n_data_qubits,
                &config.reservoir,
            )?;
            let path = dir.join(format!("reservoir_{label}_seed{seed}.json"));
            std::fs::write(&path, spec.to_json())
                .map_err(|_| qra::Error::NonFinite("reservoir dump"))?;
        }
    }
    Ok(())
}

/// Serialize results under the fixed CSV schema. `converged_at` is empty when
/// the run never crossed the loss threshold.
pub fn results_to_csv(results: &[RunResult]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in results {
        let converged = r
            .converged_at
            .map(|c| c.to_string())
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.exp_id,
            r.seed,
            r.trial,
            r.nc,
            r.mse_path1,
            r.mse_path2,
            r.final_loss,
            converged,
            r.wall_time_ms
        ));
    }
    out
}

pub fn write_results_csv(path: &Path, results: &[RunResult]) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(results_to_csv(results).as_bytes())
}

pub fn parse_results_csv(text: &str) -> Result<Vec<RunResult>, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty results file")?;
    if header.trim() != CSV_HEADER {
        return Err(format!("unexpected CSV header: {header}"));
    }
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(format!("line {}: expected 9 fields", lineno + 2));
        }
        let parse_f = |s: &str, what: &str| -> Result<f64, String> {
            s.parse()
                .map_err(|e| format!("line {}: bad {what}: {e}", lineno + 2))
        };
        out.push(RunResult {
            exp_id: fields[0].to_string(),
            seed: fields[1]
                .parse()
                .map_err(|e| format!("line {}: bad seed: {e}", lineno + 2))?,
            trial: fields[2]
                .parse()
                .map_err(|e| format!("line {}: bad trial: {e}", lineno + 2))?,
            nc: fields[3]
                .parse()
                .map_err(|e| format!("line {}: bad nc: {e}", lineno + 2))?,
            mse_path1: parse_f(fields[4], "mse_path1")?,
            mse_path2: parse_f(fields[5], "mse_path2")?,
            final_loss: parse_f(fields[6], "final_loss")?,
            converged_at: if fields[7].is_empty() {
                None
            } else {
                Some(
                    fields[7]
                        .parse()
                        .map_err(|e| format!("line {}: bad converged_at: {e}", lineno + 2))?,
                )
            },
            wall_time_ms: fields[8]
                .parse()
                .map_err(|e| format!("line {}: bad wall_time_ms: {e}", lineno + 2))?,
            rng_fingerprint: String::new(),
        });
    }
    Ok(out)
}

/// Read one results file or every `*_results.csv` in a directory.
pub fn read_results(path: &Path) -> Result<Vec<RunResult>, String> {
    let mut out = Vec::new();
    if path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)
            .map_err(|e| format!("cannot list {}: {e}", path.display()))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.ends_with("_results.csv"))
            })
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(format!("no *_results.csv files in {}", path.display()));
        }
        for file in files {
            let text = std::fs::read_to_string(&file)
                .map_err(|e| format!("cannot read {}: {e}", file.display()))?;
            out.extend(parse_results_csv(&text)?);
        }
    } else {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        out.extend(parse_results_csv(&text)?);
    }
    Ok(out)
}
