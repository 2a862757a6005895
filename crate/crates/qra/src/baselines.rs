//! Baseline feature extractors: Henon-map and delay-embedding preprocessing in
//! front of a fixed layered circuit, a tree-of-blocks parameterized circuit,
//! and a classical two-layer network trained with SPSA.
//!
//! The circuit baselines start each extraction from a Haar-random state that
//! is fixed per trial; the register state carries over between timesteps, so
//! one input rotation per step accumulates into feature rows that depend on
//! the whole input prefix. (A per-step restart would leave every feature a
//! first-degree trigonometric polynomial of a single scalar, capping the
//! feature rank at 4.) Measured features are the 3 Nq single-qubit Paulis
//! plus a bias, d = 31 for ten data qubits. The extractors implement
//! [`FeatureSource`] and plug into the protocol solver unchanged.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::features::{FeatureMatrix, FeatureSource};
use crate::noise::{damping_factor, noisy_expectation, MeasureMode, NoiseConfig, Shots};
use crate::protocol::{encode, KeySet, SecretData};
use crate::sim::{haar_random_state, PauliAxis, PauliString, StateVector};
use crate::streams::StreamKey;
use crate::{Error, Result};

/// One step of the Henon recurrence.
pub fn henon_map_step(x: f64, y: f64, a: f64, b: f64) -> (f64, f64) {
    (1.0 - a * x * x + y, b * x)
}

/// Elementwise chaotic preprocessing: each input element seeds (x0 = u, y0 = 0)
/// and is replaced by x after `n_map` iterations.
pub fn henon_preprocess(u: &[f64], a: f64, b: f64, n_map: usize) -> Vec<f64> {
    u.iter()
        .map(|&u_t| {
            let (mut x, mut y) = (u_t, 0.0);
            for _ in 0..n_map {
                let (nx, ny) = henon_map_step(x, y, a, b);
                x = nx;
                y = ny;
            }
            x
        })
        .collect()
}

/// Takens delay embedding v(t) = [u(t), u(t - tau), ..., u(t - (d_e - 1) tau)],
/// zero-padded before the start of the sequence.
pub fn delay_embed(u: &[f64], tau: usize, d_e: usize) -> Vec<Vec<f64>> {
    u.iter()
        .enumerate()
        .map(|(t, _)| {
            (0..d_e)
                .map(|k| {
                    let lag = k * tau;
                    if t >= lag {
                        u[t - lag]
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// How a delay-embedding vector maps onto the circuit input gate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DelayInjection {
    /// RZ of the vector mean on the ancilla.
    Mean,
    /// RZ of the first (most recent) element on the ancilla.
    FirstElement,
    /// One RZ per qubit; requires d_e = Nq + 1.
    PerQubitRz,
}

/// Circuit flavor of a baseline extractor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CircuitKind {
    Henon,
    Delay,
    Ttn,
}

/// Construction parameters for the circuit baselines.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BaselineOptions {
    pub n_data_qubits: usize,
    pub henon_a_range: (f64, f64),
    pub henon_b_range: (f64, f64),
    pub n_map: usize,
    pub tau: usize,
    pub d_e: usize,
    pub delay_injection: DelayInjection,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        Self {
            n_data_qubits: 10,
            henon_a_range: (1.2, 1.4),
            henon_b_range: (0.25, 0.33),
            n_map: 3,
            tau: 1,
            d_e: 11,
            delay_injection: DelayInjection::Mean,
        }
    }
}

/// Number of circuit parameters for each kind on `n_total` qubits.
fn param_count(kind: CircuitKind, n_total: usize) -> usize {
    match kind {
        // 3 layers of (RY per qubit, CNOT ladder, RZ per qubit)
        CircuitKind::Henon | CircuitKind::Delay => 3 * 2 * n_total,
        // 10 two-qubit blocks of 24 parameters
        CircuitKind::Ttn => ttn_block_pairs(n_total).len() * 24,
    }
}

/// Binary-tree block layout over the register: five nearest-neighbour pairs,
/// then pairwise merges up to the root, folding the ancilla in at the ends.
fn ttn_block_pairs(n_total: usize) -> Vec<(usize, usize)> {
    assert_eq!(n_total, 11, "tree layout is defined for 11 qubits");
    vec![
        (0, 1),
        (2, 3),
        (4, 5),
        (6, 7),
        (8, 9),
        (1, 3),
        (5, 7),
        (9, 10),
        (3, 7),
        (7, 10),
    ]
}

/// Fixed random circuit plus preprocessing; one instance per trial.
#[derive(Clone)]
pub struct CircuitBaseline {
    kind: CircuitKind,
    n_data_qubits: usize,
    params: Vec<f64>,
    init_state: StateVector,
    henon_a: f64,
    henon_b: f64,
    n_map: usize,
    tau: usize,
    d_e: usize,
    delay_injection: DelayInjection,
    /// Per-data-qubit (single-qubit, two-qubit) gate touch counts, used for
    /// depolarizing damping.
    damping_exponents: Vec<(u32, u32)>,
    stream_id: u64,
}

/// Draw circuit parameters from U(-pi, pi), the initial state Haar-random, and
/// the Henon coefficients from their configured ranges.
pub fn build_circuit_baseline(
    kind: CircuitKind,
    opts: &BaselineOptions,
    rng: &mut ChaCha12Rng,
    stream_id: u64,
) -> Result<CircuitBaseline> {
    let n_total = opts.n_data_qubits + 1;
    if kind == CircuitKind::Delay
        && opts.delay_injection == DelayInjection::PerQubitRz
        && opts.d_e != n_total
    {
        return Err(Error::DimensionMismatch(format!(
            "per-qubit injection needs d_e = {n_total}, got {}",
            opts.d_e
        )));
    }
    let n_params = param_count(kind, n_total);
    let params: Vec<f64> = (0..n_params)
        .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
        .collect();
    let henon_a = rng.random_range(opts.henon_a_range.0..opts.henon_a_range.1);
    let henon_b = rng.random_range(opts.henon_b_range.0..opts.henon_b_range.1);
    let init_state = haar_random_state(n_total, rng)?;
    let damping_exponents = damping_exponents(kind, opts, n_total);
    Ok(CircuitBaseline {
        kind,
        n_data_qubits: opts.n_data_qubits,
        params,
        init_state,
        henon_a,
        henon_b,
        n_map: opts.n_map,
        tau: opts.tau,
        d_e: opts.d_e,
        delay_injection: opts.delay_injection,
        damping_exponents,
        stream_id,
    })
}

/// Gate touches per data qubit for one timestep of the circuit.
fn damping_exponents(
    kind: CircuitKind,
    opts: &BaselineOptions,
    n_total: usize,
) -> Vec<(u32, u32)> {
    let n_data = n_total - 1;
    let mut counts = vec![(0u32, 0u32); n_data];
    match kind {
        CircuitKind::Henon | CircuitKind::Delay => {
            for (q, c) in counts.iter_mut().enumerate() {
                // 3 layers x (RY + RZ)
                c.0 = 6;
                // ladder: interior qubits sit in two CNOTs per layer
                let per_layer = if q == 0 { 1 } else { 2 };
                c.1 = 3 * per_layer;
            }
            if kind == CircuitKind::Delay && opts.delay_injection == DelayInjection::PerQubitRz {
                for c in counts.iter_mut() {
                    c.0 += 1;
                }
            }
        }
        CircuitKind::Ttn => {
            for &(qa, qb) in &ttn_block_pairs(n_total) {
                for q in [qa, qb] {
                    if q < n_data {
                        // 4 rotation groups of 3 elementary rotations + 4 CNOTs
                        counts[q].0 += 12;
                        counts[q].1 += 4;
                    }
                }
            }
        }
    }
    counts
}

impl CircuitBaseline {
    pub fn kind(&self) -> CircuitKind {
        self.kind
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn henon_coefficients(&self) -> (f64, f64) {
        (self.henon_a, self.henon_b)
    }

    fn n_total(&self) -> usize {
        self.n_data_qubits + 1
    }

    fn ancilla(&self) -> usize {
        self.n_data_qubits
    }

    /// One timestep: encode the input into the carried state, run the
    /// circuit, measure 3 Nq singles + bias. Damping accumulates with the
    /// timestep index as every past circuit application touched the qubit.
    fn circuit_step(
        &self,
        state: &mut StateVector,
        input: &TimestepInput,
        t: usize,
        noise: &NoiseConfig,
        shots: Shots,
        rng: &mut ChaCha12Rng,
    ) -> Result<Vec<f64>> {
        match input {
            TimestepInput::Scalar(u) => state.apply_rz(self.ancilla(), *u)?,
            TimestepInput::Vector(v) => {
                for (q, &angle) in v.iter().enumerate() {
                    state.apply_rz(q, angle)?;
                }
            }
        }
        match self.kind {
            CircuitKind::Henon | CircuitKind::Delay => self.apply_layered(state)?,
            CircuitKind::Ttn => self.apply_ttn(state)?,
        }

        let p1 = noise.p_dep;
        let p2 = noise.p_dep_2q_effective();
        let axes = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];
        let mut row = Vec::with_capacity(3 * self.n_data_qubits + 1);
        for &ax in &axes {
            for q in 0..self.n_data_qubits {
                let exact = state.expectation(&PauliString::single(q, ax))?;
                let (g1, g2) = self.damping_exponents[q];
                let per_step =
                    damping_factor(1, p1).powi(g1 as i32) * damping_factor(2, p2).powi(g2 as i32);
                let a_factor = per_step.powi(t as i32 + 1);
                row.push(noisy_expectation(exact, 1, a_factor, shots, rng)?);
            }
        }
        row.push(noisy_expectation(1.0, 0, 1.0, shots, rng)?);
        Ok(row)
    }

    /// Three layers of (RY on every qubit, CNOT ladder, RZ on every qubit).
    fn apply_layered(&self, state: &mut StateVector) -> Result<()> {
        let n = self.n_total();
        for layer in 0..3 {
            let base = layer * 2 * n;
            for q in 0..n {
                state.apply_ry(q, self.params[base + q])?;
            }
            for q in 0..n - 1 {
                state.apply_cnot(q, q + 1)?;
            }
            for q in 0..n {
                state.apply_rz(q, self.params[base + n + q])?;
            }
        }
        Ok(())
    }

    /// Tree of 24-parameter two-qubit blocks; a block is four repetitions of
    /// (general rotation on each qubit, CNOT), so the all-zero parameter block
    /// is the identity.
    fn apply_ttn(&self, state: &mut StateVector) -> Result<()> {
        for (block, &(qa, qb)) in ttn_block_pairs(self.n_total()).iter().enumerate() {
            let p = &self.params[block * 24..(block + 1) * 24];
            for rep in 0..4 {
                let r = &p[rep * 6..(rep + 1) * 6];
                apply_general_rotation(state, qa, r[0], r[1], r[2])?;
                apply_general_rotation(state, qb, r[3], r[4], r[5])?;
                state.apply_cnot(qa, qb)?;
            }
        }
        Ok(())
    }

    fn preprocess(&self, inputs: &[f64]) -> Vec<TimestepInput> {
        match self.kind {
            CircuitKind::Henon => {
                henon_preprocess(inputs, self.henon_a, self.henon_b, self.n_map)
                    .into_iter()
                    .map(TimestepInput::Scalar)
                    .collect()
            }
            CircuitKind::Delay => delay_embed(inputs, self.tau, self.d_e)
                .into_iter()
                .map(|v| match self.delay_injection {
                    DelayInjection::Mean => {
                        TimestepInput::Scalar(v.iter().sum::<f64>() / v.len() as f64)
                    }
                    DelayInjection::FirstElement => TimestepInput::Scalar(v[0]),
                    DelayInjection::PerQubitRz => TimestepInput::Vector(v),
                })
                .collect(),
            CircuitKind::Ttn => inputs.iter().copied().map(TimestepInput::Scalar).collect(),
        }
    }
}

enum TimestepInput {
    Scalar(f64),
    Vector(Vec<f64>),
}

/// ZYZ general single-qubit rotation; all-zero angles give the identity.
fn apply_general_rotation(
    state: &mut StateVector,
    qubit: usize,
    a: f64,
    b: f64,
    c: f64,
) -> Result<()> {
    state.apply_rz(qubit, a)?;
    state.apply_ry(qubit, b)?;
    state.apply_rz(qubit, c)
}

impl FeatureSource for CircuitBaseline {
    fn features(
        &self,
        inputs: &[f64],
        noise: &NoiseConfig,
        shots: Shots,
        rng: &mut ChaCha12Rng,
    ) -> Result<FeatureMatrix> {
        noise.validate()?;
        if noise.mode == MeasureMode::Yomo {
            return Err(Error::InvalidNoiseConfig(
                "yomo aggregation applies to the reservoir extractor only".into(),
            ));
        }
        if !inputs.iter().all(|u| u.is_finite()) {
            return Err(Error::NonFinite("baseline input sequence"));
        }
        let mut state = self.init_state.clone();
        let rows = self
            .preprocess(inputs)
            .iter()
            .enumerate()
            .map(|(t, inp)| self.circuit_step(&mut state, inp, t, noise, shots, rng))
            .collect::<Result<Vec<_>>>()?;
        let axes = ["X", "Y", "Z"];
        let mut labels: Vec<String> = axes
            .iter()
            .flat_map(|ax| (0..self.n_data_qubits).map(move |q| format!("{ax}{q}")))
            .collect();
        labels.push("bias".into());
        FeatureMatrix::from_rows(rows, labels)
    }

    fn feature_dim(&self, _noise: &NoiseConfig) -> usize {
        3 * self.n_data_qubits + 1
    }

    fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

// ---------------------------------------------------------------------------
// Classical network + SPSA
// ---------------------------------------------------------------------------

/// SPSA hyperparameters.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SpsaOptions {
    pub c: f64,
    pub a: f64,
    pub iters: usize,
}

impl Default for SpsaOptions {
    fn default() -> Self {
        Self {
            c: 0.1,
            a: 0.01,
            iters: 100,
        }
    }
}

/// Parameter count of one nc -> hidden -> nc network.
pub fn nn_param_count(nc: usize, hidden: usize) -> usize {
    hidden * nc + hidden + nc * hidden + nc
}

/// Two-layer feedforward pass with tanh hidden units.
pub fn nn_forward(x: &[f64], params: &[f64], hidden: usize) -> Vec<f64> {
    let nc = x.len();
    assert_eq!(params.len(), nn_param_count(nc, hidden), "bad nn params");
    let (w1, rest) = params.split_at(hidden * nc);
    let (b1, rest) = rest.split_at(hidden);
    let (w2, b2) = rest.split_at(nc * hidden);
    let h: Vec<f64> = (0..hidden)
        .map(|i| {
            let mut s = b1[i];
            for (j, &xj) in x.iter().enumerate() {
                s += w1[i * nc + j] * xj;
            }
            s.tanh()
        })
        .collect();
    (0..nc)
        .map(|i| {
            let mut s = b2[i];
            for (j, &hj) in h.iter().enumerate() {
                s += w2[i * hidden + j] * hj;
            }
            s
        })
        .collect()
}

/// Simultaneous-perturbation gradient descent.
///
/// Per iteration: draw a Rademacher perturbation, estimate the gradient from
/// two loss evaluations, take a fixed-size step. Aborts with a diagnostic when
/// the loss turns non-finite.
pub fn spsa_optimize<F>(
    mut loss_fn: F,
    theta0: Vec<f64>,
    opts: &SpsaOptions,
    rng: &mut ChaCha12Rng,
) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut theta = theta0;
    let dim = theta.len();
    let mut history = Vec::with_capacity(opts.iters);
    for iter in 0..opts.iters {
        let delta: Vec<f64> = (0..dim)
            .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        let plus: Vec<f64> = theta
            .iter()
            .zip(&delta)
            .map(|(t, d)| t + opts.c * d)
            .collect();
        let minus: Vec<f64> = theta
            .iter()
            .zip(&delta)
            .map(|(t, d)| t - opts.c * d)
            .collect();
        let l_plus = loss_fn(&plus);
        let l_minus = loss_fn(&minus);
        if !l_plus.is_finite() || !l_minus.is_finite() {
            let theta_norm = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
            return Err(Error::SpsaNonFiniteLoss { iter, theta_norm });
        }
        let scale = (l_plus - l_minus) / (2.0 * opts.c);
        for (t, d) in theta.iter_mut().zip(&delta) {
            // Rademacher entries are their own inverse.
            *t -= opts.a * scale * d;
        }
        history.push((l_plus + l_minus) / 2.0);
    }
    Ok((theta, history))
}

/// Outcome of the classical-network route.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NnSolveOutcome {
    pub theta: Vec<f64>,
    pub loss_history: Vec<f64>,
    pub final_loss: f64,
    pub mse_path1: f64,
    pub mse_path2: f64,
}

/// Replace both reservoirs with independent networks mapping the encoded
/// sequence directly to a reconstruction, and minimize the combined
/// reconstruction loss over all network parameters with SPSA.
pub fn solve_nn(
    data: &SecretData,
    keys: &KeySet,
    hidden: usize,
    spsa: &SpsaOptions,
    streams: &StreamKey,
) -> Result<NnSolveOutcome> {
    let nc = data.len();
    let c = data.values();
    let per_net = nn_param_count(nc, hidden);

    let evaluate = |theta: &[f64]| -> (f64, f64, f64) {
        let (net_a, net_b) = theta.split_at(per_net);
        let run = || -> Result<(f64, f64)> {
            let gamma = nn_forward(&encode(&keys.a, c)?, net_a, hidden);
            let c_hat_1 = nn_forward(&encode(&keys.beta, &gamma)?, net_b, hidden);
            let gamma_prime = nn_forward(&encode(&keys.b, c)?, net_b, hidden);
            let c_hat_2 = nn_forward(&encode(&keys.alpha, &gamma_prime)?, net_a, hidden);
            Ok((
                crate::readout::mse(c, &c_hat_1),
                crate::readout::mse(c, &c_hat_2),
            ))
        };
        match run() {
            Ok((m1, m2)) => (m1, m2, (m1 + m2) / 2.0),
            Err(_) => (f64::NAN, f64::NAN, f64::NAN),
        }
    };

    let mut init_rng = streams.child("nn-init").rng();
    let theta0: Vec<f64> = (0..2 * per_net)
        .map(|_| init_rng.random_range(-0.5..0.5))
        .collect();
    let mut spsa_rng = streams.child("spsa").rng();
    let (theta, loss_history) =
        spsa_optimize(|t| evaluate(t).2, theta0, spsa, &mut spsa_rng)?;
    let (mse_path1, mse_path2, final_loss) = evaluate(&theta);
    Ok(NnSolveOutcome {
        theta,
        loss_history,
        final_loss,
        mse_path1,
        mse_path2,
    })
}
