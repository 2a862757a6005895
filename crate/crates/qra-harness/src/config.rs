//! Experiment identifiers, configuration, and the key=value config file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use qra::baselines::{BaselineOptions, CircuitKind, SpsaOptions};
use qra::noise::{MeasureMode, NoiseConfig};
use qra::reservoir::ReservoirConfig;

/// Experimental condition or baseline backend.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExperimentId {
    /// Ideal: infinite shots, no channel noise, d = 76.
    Exp1,
    /// Shot noise at 1,000 shots.
    Exp2,
    /// Shot noise plus depolarizing (p = 0.005).
    Exp3,
    /// YOMO probability aggregation, 1,000 shots, d = 57.
    Exp5,
    /// YOMO plus depolarizing.
    Exp6,
    /// Asymmetric shots: 10 encode / 10^5 decode.
    Exp7,
    /// Asymmetric shots plus depolarizing.
    Exp8,
    /// Henon-map preprocessing + layered circuit backend.
    Henon,
    /// Delay-embedding preprocessing + layered circuit backend.
    Delay,
    /// Classical two-layer network trained with SPSA.
    Nn,
    /// Tree-of-blocks parameterized circuit backend.
    Ttn,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 11] = [
        ExperimentId::Exp1,
        ExperimentId::Exp2,
        ExperimentId::Exp3,
        ExperimentId::Exp5,
        ExperimentId::Exp6,
        ExperimentId::Exp7,
        ExperimentId::Exp8,
        ExperimentId::Henon,
        ExperimentId::Delay,
        ExperimentId::Nn,
        ExperimentId::Ttn,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentId::Exp1 => "1",
            ExperimentId::Exp2 => "2",
            ExperimentId::Exp3 => "3",
            ExperimentId::Exp5 => "5",
            ExperimentId::Exp6 => "6",
            ExperimentId::Exp7 => "7",
            ExperimentId::Exp8 => "8",
            ExperimentId::Henon => "henon",
            ExperimentId::Delay => "delay",
            ExperimentId::Nn => "nn",
            ExperimentId::Ttn => "ttn",
        }
    }

    /// Noise condition defaults for this experiment.
    pub fn default_noise(&self) -> NoiseConfig {
        match self {
            ExperimentId::Exp1 => NoiseConfig::ideal(),
            ExperimentId::Exp2 => NoiseConfig::shot(1000),
            ExperimentId::Exp3 => NoiseConfig::shot(1000).with_depolarizing(0.005),
            ExperimentId::Exp5 => NoiseConfig::shot(1000).with_yomo(56),
            ExperimentId::Exp6 => NoiseConfig::shot(1000).with_yomo(56).with_depolarizing(0.005),
            ExperimentId::Exp7 => NoiseConfig::asymmetric(10, 100_000),
            ExperimentId::Exp8 => NoiseConfig::asymmetric(10, 100_000).with_depolarizing(0.005),
            // Baselines run ideal by default; their noisy variants come from
            // config overrides (shots, p_dep = 0.01, p_dep_2q = 0.02).
            ExperimentId::Henon
            | ExperimentId::Delay
            | ExperimentId::Nn
            | ExperimentId::Ttn => NoiseConfig::ideal(),
        }
    }

    pub fn default_seeds(&self) -> Vec<u64> {
        match self {
            ExperimentId::Exp1 | ExperimentId::Exp2 | ExperimentId::Exp3 => vec![0, 1, 2, 3],
            _ => vec![0],
        }
    }

    pub fn circuit_baseline_kind(&self) -> Option<CircuitKind> {
        match self {
            ExperimentId::Henon => Some(CircuitKind::Henon),
            ExperimentId::Delay => Some(CircuitKind::Delay),
            ExperimentId::Ttn => Some(CircuitKind::Ttn),
            _ => None,
        }
    }

    pub fn is_reservoir(&self) -> bool {
        matches!(
            self,
            ExperimentId::Exp1
                | ExperimentId::Exp2
                | ExperimentId::Exp3
                | ExperimentId::Exp5
                | ExperimentId::Exp6
                | ExperimentId::Exp7
                | ExperimentId::Exp8
        )
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "exp1" => Ok(ExperimentId::Exp1),
            "2" | "exp2" => Ok(ExperimentId::Exp2),
            "3" | "exp3" => Ok(ExperimentId::Exp3),
            "5" | "exp5" => Ok(ExperimentId::Exp5),
            "6" | "exp6" => Ok(ExperimentId::Exp6),
            "7" | "exp7" => Ok(ExperimentId::Exp7),
            "8" | "exp8" => Ok(ExperimentId::Exp8),
            "henon" => Ok(ExperimentId::Henon),
            "delay" => Ok(ExperimentId::Delay),
            "nn" => Ok(ExperimentId::Nn),
            "ttn" => Ok(ExperimentId::Ttn),
            other => Err(format!(
                "unknown experiment '{other}' (expected 1,2,3,5,6,7,8,henon,delay,nn,ttn)"
            )),
        }
    }
}

pub const DEFAULT_NC_LIST: [usize; 10] = [5, 8, 10, 12, 15, 18, 20, 25, 30, 35];

/// Full description of one experiment batch.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub exp_id: ExperimentId,
    pub seeds: Vec<u64>,
    pub trials: u32,
    pub nc_list: Vec<usize>,
    pub noise: NoiseConfig,
    pub output_dir: PathBuf,
    pub n_iter: usize,
    pub lambda: f64,
    pub n_data_qubits: usize,
    pub reservoir: ReservoirConfig,
    pub baseline: BaselineOptions,
    pub spsa: SpsaOptions,
    pub nn_hidden: usize,
    /// Write 0 in the wall_time_ms column so reruns are byte-identical.
    pub zero_wall_time: bool,
    /// Also dump reservoir specs and protocol states as JSON.
    pub dump_state: bool,
}

impl ExperimentConfig {
    pub fn for_experiment(exp_id: ExperimentId) -> Self {
        Self {
            exp_id,
            seeds: exp_id.default_seeds(),
            trials: 3,
            nc_list: DEFAULT_NC_LIST.to_vec(),
            noise: exp_id.default_noise(),
            output_dir: default_output_dir(),
            n_iter: 30,
            lambda: 1e-10,
            n_data_qubits: 10,
            reservoir: ReservoirConfig::default(),
            baseline: BaselineOptions::default(),
            spsa: SpsaOptions::default(),
            nn_hidden: 11,
            zero_wall_time: false,
            dump_state: false,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        self.noise.validate().map_err(|e| e.to_string())?;
        if self.seeds.is_empty() || self.nc_list.is_empty() || self.trials == 0 {
            return Err("seeds, nc list and trials must be non-empty".into());
        }
        if self.n_iter == 0 {
            return Err("n_iter must be >= 1".into());
        }
        if !self.exp_id.is_reservoir() && self.noise.mode == MeasureMode::Yomo {
            return Err("yomo mode applies to reservoir experiments only".into());
        }
        Ok(())
    }

    /// Apply `key=value` overrides from a config file (CLI flags run after
    /// this, so flags win).
    pub fn apply_file(&mut self, path: &Path) -> Result<(), String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let entries = parse_key_values(&text)?;
        for (key, value) in entries {
            self.apply_key(&key, &value)?;
        }
        Ok(())
    }

    pub fn apply_key(&mut self, key: &str, value: &str) -> Result<(), String> {
        let bad = |e: &dyn fmt::Display| format!("config key '{key}': {e}");
        match key {
            "exp" => {
                self.exp_id = value.parse()?;
                self.noise = self.exp_id.default_noise();
            }
            "seeds" => self.seeds = parse_list(value)?,
            "trials" => self.trials = value.parse().map_err(|e| bad(&e))?,
            "nc" => self.nc_list = parse_list(value)?,
            "out" => self.output_dir = PathBuf::from(value),
            "n_iter" => self.n_iter = value.parse().map_err(|e| bad(&e))?,
            "lambda" => self.lambda = value.parse().map_err(|e| bad(&e))?,
            "shots_enc" => self.noise.shots_enc = value.parse().map_err(|e| bad(&e))?,
            "shots_dec" => self.noise.shots_dec = value.parse().map_err(|e| bad(&e))?,
            "p_dep" => self.noise.p_dep = value.parse().map_err(|e| bad(&e))?,
            "p_dep_2q" => {
                self.noise.p_dep_2q = if value.is_empty() {
                    None
                } else {
                    Some(value.parse().map_err(|e| bad(&e))?)
                }
            }
            "g1" => self.noise.g1 = value.parse().map_err(|e| bad(&e))?,
            "g2" => self.noise.g2 = value.parse().map_err(|e| bad(&e))?,
            "mode" => {
                self.noise.mode = match value {
                    "pauli" => MeasureMode::Pauli,
                    "yomo" => MeasureMode::Yomo,
                    other => return Err(format!("unknown mode '{other}'")),
                }
            }
            "yomo_k" => self.noise.yomo_k = value.parse().map_err(|e| bad(&e))?,
            "n_data_qubits" => {
                self.n_data_qubits = value.parse().map_err(|e| bad(&e))?;
                self.baseline.n_data_qubits = self.n_data_qubits;
            }
            "dt" => self.reservoir.dt = value.parse().map_err(|e| bad(&e))?,
            "input_angle_scale" => {
                self.reservoir.input_angle_scale = value.parse().map_err(|e| bad(&e))?
            }
            "zero_wall_time" => self.zero_wall_time = value.parse().map_err(|e| bad(&e))?,
            "spsa_c" => self.spsa.c = value.parse().map_err(|e| bad(&e))?,
            "spsa_a" => self.spsa.a = value.parse().map_err(|e| bad(&e))?,
            "spsa_iters" => self.spsa.iters = value.parse().map_err(|e| bad(&e))?,
            other => return Err(format!("unknown config key '{other}'")),
        }
        Ok(())
    }

    /// Stable label identifying the run for stream derivation.
    pub fn run_label(&self, seed: u64, trial: u32, nc: usize) -> String {
        format!("qra/v1/exp={}/seed={seed}/trial={trial}/nc={nc}", self.exp_id)
    }

    pub fn results_file(&self) -> PathBuf {
        self.output_dir
            .join(format!("exp{}_results.csv", self.exp_id))
    }
}

fn default_output_dir() -> PathBuf {
    std::env::var_os("OUTPUT_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn parse_list<T: FromStr>(value: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|e| format!("bad list entry '{s}': {e}")))
        .collect()
}

/// Line-oriented `key=value` parser; '#' starts a comment.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key=value, got '{line}'", lineno + 1))?;
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}
