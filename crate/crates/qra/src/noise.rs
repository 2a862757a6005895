//! Measurement and channel noise.
//!
//! Shot noise is binomial sampling of Pauli expectations; depolarizing noise
//! is applied analytically as multiplicative damping accumulated per gate
//! count and timestep; YOMO replaces per-Pauli measurement with a single
//! computational-basis measurement aggregated into grouped features.

use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::sim::{trace_out_qubit, StateVector};
use crate::{Error, Result};

/// Measurement shot budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shots {
    Finite(u64),
    Infinite,
}

impl Shots {
    pub fn is_infinite(self) -> bool {
        matches!(self, Shots::Infinite)
    }
}

impl std::fmt::Display for Shots {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Shots::Finite(n) => write!(f, "{n}"),
            Shots::Infinite => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for Shots {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinite" => Ok(Shots::Infinite),
            other => {
                let n: u64 = other
                    .parse()
                    .map_err(|_| Error::InvalidNoiseConfig(format!("bad shot count '{other}'")))?;
                if n == 0 {
                    return Err(Error::InvalidNoiseConfig("shots must be >= 1".into()));
                }
                Ok(Shots::Finite(n))
            }
        }
    }
}

/// Measurement scheme for feature extraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureMode {
    /// Per-observable Pauli expectations (d = 3 Nq + Nq(Nq-1)/2 + 1).
    Pauli,
    /// Single computational-basis measurement, grouped (d = K + 1).
    Yomo,
}

/// Shot budgets, depolarizing rate, damping schedule and measurement mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub shots_enc: Shots,
    pub shots_dec: Shots,
    /// Depolarizing probability per gate (single-qubit channel parameter).
    pub p_dep: f64,
    /// Separate two-qubit rate; falls back to `p_dep` when absent.
    pub p_dep_2q: Option<f64>,
    /// Effective single-qubit gates per qubit per timestep.
    pub g1: u32,
    /// Effective two-qubit gates per qubit per timestep.
    pub g2: u32,
    pub mode: MeasureMode,
    /// Number of YOMO groups.
    pub yomo_k: usize,
}

pub const DEFAULT_G1: u32 = 2;
pub const DEFAULT_G2: u32 = 4;
pub const DEFAULT_YOMO_K: usize = 56;

impl NoiseConfig {
    /// Exact expectations: infinite shots, no depolarizing.
    pub fn ideal() -> Self {
        Self {
            shots_enc: Shots::Infinite,
            shots_dec: Shots::Infinite,
            p_dep: 0.0,
            p_dep_2q: None,
            g1: DEFAULT_G1,
            g2: DEFAULT_G2,
            mode: MeasureMode::Pauli,
            yomo_k: DEFAULT_YOMO_K,
        }
    }

    /// Symmetric finite shot budget, no depolarizing.
    pub fn shot(shots: u64) -> Self {
        Self {
            shots_enc: Shots::Finite(shots),
            shots_dec: Shots::Finite(shots),
            ..Self::ideal()
        }
    }

    pub fn with_depolarizing(mut self, p: f64) -> Self {
        self.p_dep = p;
        self
    }

    pub fn with_yomo(mut self, k: usize) -> Self {
        self.mode = MeasureMode::Yomo;
        self.yomo_k = k;
        self
    }

    pub fn asymmetric(shots_enc: u64, shots_dec: u64) -> Self {
        Self {
            shots_enc: Shots::Finite(shots_enc),
            shots_dec: Shots::Finite(shots_dec),
            ..Self::ideal()
        }
    }

    pub fn p_dep_2q_effective(&self) -> f64 {
        self.p_dep_2q.unwrap_or(self.p_dep)
    }

    /// True when the pipeline reduces to exact expectation values.
    pub fn is_ideal(&self) -> bool {
        self.shots_enc.is_infinite()
            && self.shots_dec.is_infinite()
            && self.p_dep == 0.0
            && self.p_dep_2q_effective() == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_dep", self.p_dep), ("p_dep_2q", self.p_dep_2q_effective())] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::InvalidNoiseConfig(format!(
                    "{name} = {p} outside [0, 1)"
                )));
            }
        }
        if self.mode == MeasureMode::Yomo {
            if self.yomo_k == 0 {
                return Err(Error::InvalidNoiseConfig("yomo_k must be >= 1".into()));
            }
            if self.p_dep_2q.is_some() {
                return Err(Error::InvalidNoiseConfig(
                    "yomo uses a single global damping rate; p_dep_2q is not applicable".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Binomial estimate of a Pauli expectation from a finite number of shots.
///
/// p = (1 + <O>)/2, k ~ Binomial(shots, p), estimate = 2 k / shots - 1.
/// Infinite shots return the exact value unchanged.
pub fn shot_sample(exact: f64, shots: Shots, rng: &mut ChaCha12Rng) -> Result<f64> {
    if exact.abs() > 1.0 + 1e-9 {
        return Err(Error::ExpectationOutOfRange(exact));
    }
    match shots {
        Shots::Infinite => Ok(exact),
        Shots::Finite(n) => {
            let p = ((1.0 + exact) / 2.0).clamp(0.0, 1.0);
            let k = Binomial::new(n, p)
                .expect("valid binomial parameters")
                .sample(rng);
            Ok(2.0 * k as f64 / n as f64 - 1.0)
        }
    }
}

/// Multiplicative damping of a Pauli expectation under one depolarizing
/// application: 1 - 4p/3 for single-qubit observables, 1 - 16p/15 for
/// two-qubit correlators.
pub fn damping_factor(weight: u8, p_dep: f64) -> f64 {
    match weight {
        1 => 1.0 - 4.0 * p_dep / 3.0,
        2 => 1.0 - 16.0 * p_dep / 15.0,
        _ => panic!("damping_factor expects weight 1 or 2, got {weight}"),
    }
}

/// Accumulated per-qubit damping factor after timestep `t` (0-based):
/// (lambda_1q^g1 * lambda_2q^g2)^(t + 1).
pub fn accumulate_damping(g1: u32, g2: u32, p_1q: f64, p_2q: f64, t: usize) -> f64 {
    per_step_damping(g1, g2, p_1q, p_2q).powi(t as i32 + 1)
}

/// Damping contributed by one timestep of the gate schedule.
pub fn per_step_damping(g1: u32, g2: u32, p_1q: f64, p_2q: f64) -> f64 {
    damping_factor(1, p_1q).powi(g1 as i32) * damping_factor(2, p_2q).powi(g2 as i32)
}

/// Damp an exact expectation by the accumulated per-qubit factor raised to the
/// observable support size, then apply shot sampling. `support` 0 marks the
/// bias feature, which is never damped.
pub fn noisy_expectation(
    exact: f64,
    support: usize,
    a_factor: f64,
    shots: Shots,
    rng: &mut ChaCha12Rng,
) -> Result<f64> {
    let damped = exact * a_factor.powi(support as i32);
    shot_sample(damped, shots, rng)
}

/// Consecutive-block partition of `n_states` into `k` groups; the remainder is
/// absorbed by giving the first `n_states mod k` groups one extra element.
pub fn yomo_group_sizes(n_states: usize, k: usize) -> Vec<usize> {
    let base = n_states / k;
    let extra = n_states % k;
    (0..k)
        .map(|g| if g < extra { base + 1 } else { base })
        .collect()
}

/// Deterministic multinomial sample by sequential binomial conditioning.
pub fn multinomial(shots: u64, probs: &[f64], rng: &mut ChaCha12Rng) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = shots;
    let mut rest_p = 1.0f64;
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if rest_p <= 0.0 || i + 1 == probs.len() {
            counts[i] = remaining;
            break;
        }
        let cond = (p / rest_p).clamp(0.0, 1.0);
        let k = Binomial::new(remaining, cond)
            .expect("valid binomial parameters")
            .sample(rng);
        counts[i] = k;
        remaining -= k;
        rest_p -= p;
    }
    counts
}

/// YOMO feature vector from one reservoir state.
///
/// Born probabilities over the full register, ancilla traced out, the
/// depolarizing mix P -> lambda_global P + (1 - lambda_global)/2^Nq applied,
/// `shots` multinomial samples converted to empirical frequencies, group means
/// taken over `k` consecutive blocks, and a trailing bias 1 appended. Infinite
/// shots skip the sampling and use the mixed distribution directly.
pub fn yomo_features(
    state: &StateVector,
    ancilla: usize,
    shots: Shots,
    lambda_global: f64,
    k: usize,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<f64>> {
    let probs = state.born_probabilities();
    let reduced = trace_out_qubit(&probs, ancilla);
    let n_states = reduced.len();
    if k > n_states {
        return Err(Error::InvalidNoiseConfig(format!(
            "yomo_k = {k} exceeds the {n_states} reduced basis states"
        )));
    }

    let uniform = 1.0 / n_states as f64;
    let mixed: Vec<f64> = reduced
        .iter()
        .map(|&p| lambda_global * p + (1.0 - lambda_global) * uniform)
        .collect();
    debug_assert!((mixed.iter().sum::<f64>() - 1.0).abs() < 1e-10);

    let freqs: Vec<f64> = match shots {
        Shots::Infinite => mixed,
        Shots::Finite(n) => multinomial(n, &mixed, rng)
            .into_iter()
            .map(|c| c as f64 / n as f64)
            .collect(),
    };

    let mut out = Vec::with_capacity(k + 1);
    let mut offset = 0usize;
    for size in yomo_group_sizes(n_states, k) {
        let sum: f64 = freqs[offset..offset + size].iter().sum();
        out.push(sum / size as f64);
        offset += size;
    }
    out.push(1.0);
    Ok(out)
}
