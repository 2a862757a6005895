//! Cross-key encode/decode protocol and its alternating solver.
//!
//! Two feature extractors `a` and `b` are paired with distributed keys `A`,
//! `B` and secret keys `alpha`, `beta`. Path 1 encodes the secret data with
//! `A` on extractor `a`, producing ciphertext `gamma`, and decodes
//! `G(beta, gamma)` with extractor `b`; path 2 runs the mirrored route
//! producing `gamma'`. The alternating iteration re-solves the four Tikhonov
//! systems until the combined training loss falls below threshold.
//!
//! Encryption feature matrices are extracted exactly once per run, decryption
//! matrices exactly once per iteration per path; a fresh decryption extraction
//! is used when reconstructing, so under finite-shot noise the reported
//! reconstruction error reflects test-time measurement noise.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::features::{FeatureMatrix, FeatureSource, Phase};
use crate::noise::NoiseConfig;
use crate::readout::{mse, predict, tikhonov_solve, ReadoutWeights};
use crate::streams::StreamKey;
use crate::{Error, Result};

/// The four independent keys of one protocol instance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KeySet {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl KeySet {
    pub fn key_len(&self) -> usize {
        self.a.len()
    }
}

/// Secret data vector with entries in (-0.5, 0.5).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SecretData(Vec<f64>);

impl SecretData {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for &v in &values {
            if !(v > -0.5 && v < 0.5) {
                return Err(Error::DataOutOfRange(v));
            }
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Shared encode/decode map: out_i = tanh(key_i * x_i + key_{Nc + (i mod p)})
/// where p = key_len - Nc is the bias period. The same function serves both
/// roles, which is what couples the two paths.
pub fn encode(key: &[f64], data: &[f64]) -> Result<Vec<f64>> {
    let nc = data.len();
    if key.len() < nc + 1 {
        return Err(Error::KeyTooShort {
            need: nc + 1,
            got: key.len(),
        });
    }
    let period = key.len() - nc;
    Ok(data
        .iter()
        .enumerate()
        .map(|(i, &x)| (key[i] * x + key[nc + (i % period)]).tanh())
        .collect())
}

/// Draw the four keys, each of length nc + nq + 1, from U(-1, 1).
pub fn generate_keys<R: Rng + ?Sized>(rng: &mut R, nc: usize, nq: usize) -> KeySet {
    let len = nc + nq + 1;
    let mut draw = || -> Vec<f64> { (0..len).map(|_| rng.random_range(-1.0..1.0)).collect() };
    let a = draw();
    let b = draw();
    let alpha = draw();
    let beta = draw();
    KeySet { a, b, alpha, beta }
}

/// Draw secret data from U(-0.5, 0.5).
pub fn generate_data<R: Rng + ?Sized>(rng: &mut R, nc: usize) -> SecretData {
    SecretData(
        (0..nc)
            .map(|_| rng.random_range(-0.5..0.5))
            .collect(),
    )
}

/// Draw one initial ciphertext pair from U(-0.3, 0.3).
pub fn init_ciphertexts<R: Rng + ?Sized>(rng: &mut R, nc: usize) -> (Vec<f64>, Vec<f64>) {
    let mut draw = || -> Vec<f64> { (0..nc).map(|_| rng.random_range(-0.3..0.3)).collect() };
    let gamma = draw();
    let gamma_prime = draw();
    (gamma, gamma_prime)
}

/// Per-iteration training losses.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct IterationRecord {
    pub mse1: f64,
    pub mse2: f64,
    pub loss: f64,
}

/// Extraction counters, asserted by tests.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SolveStats {
    pub enc_extractions: usize,
    pub dec_extractions: usize,
    /// Measurement-pipeline calls per encryption matrix (rows x columns for
    /// the per-Pauli scheme).
    pub enc_measurement_calls_per_matrix: usize,
    /// Shot budget consumed by every encryption measurement.
    pub enc_shots: crate::noise::Shots,
    /// Shot budget consumed by every decryption measurement.
    pub dec_shots: crate::noise::Shots,
}

impl Default for SolveStats {
    fn default() -> Self {
        Self {
            enc_extractions: 0,
            dec_extractions: 0,
            enc_measurement_calls_per_matrix: 0,
            enc_shots: crate::noise::Shots::Infinite,
            dec_shots: crate::noise::Shots::Infinite,
        }
    }
}

/// Converged protocol instance: ciphertexts, weights, loss trajectory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProtocolState {
    pub gamma: Vec<f64>,
    pub gamma_prime: Vec<f64>,
    pub w_a_enc: ReadoutWeights,
    pub w_b_enc: ReadoutWeights,
    pub w_a_dec: ReadoutWeights,
    pub w_b_dec: ReadoutWeights,
    pub loss_history: Vec<IterationRecord>,
    /// 1-based iteration at which the loss first dropped below threshold.
    pub converged_at: Option<usize>,
    pub stats: SolveStats,
}

impl ProtocolState {
    pub fn final_loss(&self) -> f64 {
        self.loss_history.last().map_or(f64::NAN, |r| r.loss)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("protocol state serializes")
    }
}

/// Solver knobs with the protocol defaults.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SolveOptions {
    pub n_iter: usize,
    pub loss_threshold: f64,
    pub lambda: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            n_iter: 30,
            loss_threshold: 1e-12,
            lambda: 1e-10,
        }
    }
}

fn extraction_rng(
    streams: &StreamKey,
    source_id: u64,
    phase: Phase,
    iter: usize,
) -> rand_chacha::ChaCha12Rng {
    streams
        .child_indexed("extract", &[source_id, phase.stream_index(), iter as u64])
        .rng()
}

/// Alternating solve of the four-equation system.
///
/// All randomness (ciphertext initialization, per-extraction measurement
/// noise) is drawn from sub-streams of `streams` keyed by extractor identity,
/// phase, and iteration, so runs are reproducible and independent of
/// evaluation order.
pub fn solve_qra<S: FeatureSource + ?Sized>(
    source_a: &S,
    source_b: &S,
    data: &SecretData,
    keys: &KeySet,
    noise: &NoiseConfig,
    opts: &SolveOptions,
    streams: &StreamKey,
) -> Result<ProtocolState> {
    noise.validate()?;
    let nc = data.len();
    if nc == 0 {
        return Err(Error::DimensionMismatch("empty secret data".into()));
    }
    let d = source_a.feature_dim(noise);
    if nc > d {
        return Err(Error::DimensionMismatch(format!(
            "data length {nc} exceeds feature dimension {d}"
        )));
    }
    if opts.n_iter == 0 {
        return Err(Error::DimensionMismatch("n_iter must be >= 1".into()));
    }
    let c = data.values();

    let (mut gamma, _) = init_ciphertexts(
        &mut streams
            .child_indexed("ciphertext", &[source_a.stream_id()])
            .rng(),
        nc,
    );
    let (mut gamma_prime, _) = init_ciphertexts(
        &mut streams
            .child_indexed("ciphertext", &[source_b.stream_id()])
            .rng(),
        nc,
    );

    let mut stats = SolveStats::default();

    // Encryption feature matrices: computed once, the encode inputs are fixed.
    let v_a_enc = source_a.features(
        &encode(&keys.a, c)?,
        noise,
        noise.shots_enc,
        &mut extraction_rng(streams, source_a.stream_id(), Phase::Encode, 0),
    )?;
    let v_b_enc = source_b.features(
        &encode(&keys.b, c)?,
        noise,
        noise.shots_enc,
        &mut extraction_rng(streams, source_b.stream_id(), Phase::Encode, 0),
    )?;
    stats.enc_extractions = 2;
    stats.enc_measurement_calls_per_matrix = nc * v_a_enc.cols();
    stats.enc_shots = noise.shots_enc;
    stats.dec_shots = noise.shots_dec;

    let mut w_a_enc = None;
    let mut w_b_enc = None;
    let mut w_a_dec = None;
    let mut w_b_dec = None;
    let mut loss_history = Vec::new();
    let mut converged_at = None;

    for it in 1..=opts.n_iter {
        // Path 1: refresh gamma, then train the decoder of path 1 against C.
        let wa_enc = tikhonov_solve(&v_a_enc, &gamma, opts.lambda)?;
        gamma = predict(&v_a_enc, &wa_enc);
        w_a_enc = Some(wa_enc);
        let v_b_dec = source_b.features(
            &encode(&keys.beta, &gamma)?,
            noise,
            noise.shots_dec,
            &mut extraction_rng(streams, source_b.stream_id(), Phase::Decode, it),
        )?;
        let wb = tikhonov_solve(&v_b_dec, c, opts.lambda)?;
        let mse1 = mse(c, &predict(&v_b_dec, &wb));
        w_b_dec = Some(wb);

        // Path 2, mirrored.
        let wb_enc = tikhonov_solve(&v_b_enc, &gamma_prime, opts.lambda)?;
        gamma_prime = predict(&v_b_enc, &wb_enc);
        w_b_enc = Some(wb_enc);
        let v_a_dec = source_a.features(
            &encode(&keys.alpha, &gamma_prime)?,
            noise,
            noise.shots_dec,
            &mut extraction_rng(streams, source_a.stream_id(), Phase::Decode, it),
        )?;
        let wa = tikhonov_solve(&v_a_dec, c, opts.lambda)?;
        let mse2 = mse(c, &predict(&v_a_dec, &wa));
        w_a_dec = Some(wa);

        stats.dec_extractions += 2;
        let loss = (mse1 + mse2) / 2.0;
        loss_history.push(IterationRecord { mse1, mse2, loss });
        if loss < opts.loss_threshold {
            converged_at = Some(it);
            break;
        }
    }

    Ok(ProtocolState {
        gamma,
        gamma_prime,
        w_a_enc: w_a_enc.expect("at least one iteration ran"),
        w_b_enc: w_b_enc.expect("at least one iteration ran"),
        w_a_dec: w_a_dec.expect("at least one iteration ran"),
        w_b_dec: w_b_dec.expect("at least one iteration ran"),
        loss_history,
        converged_at,
        stats,
    })
}

/// Which decode route to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecodePath {
    /// gamma decoded with key beta on extractor b.
    One,
    /// gamma' decoded with key alpha on extractor a.
    Two,
}

/// Reconstruct the secret data from a stored solve.
///
/// Runs a fresh decryption feature extraction (new measurement noise draw) and
/// applies the stored decoder weights. Under ideal noise this reproduces the
/// training-time decode exactly.
pub fn reconstruct<S: FeatureSource + ?Sized>(
    path: DecodePath,
    state: &ProtocolState,
    source_a: &S,
    source_b: &S,
    keys: &KeySet,
    noise: &NoiseConfig,
    streams: &StreamKey,
) -> Result<Vec<f64>> {
    let (source, key, ciphertext, weights) = match path {
        DecodePath::One => (source_b, &keys.beta, &state.gamma, &state.w_b_dec),
        DecodePath::Two => (source_a, &keys.alpha, &state.gamma_prime, &state.w_a_dec),
    };
    let v_dec = source.features(
        &encode(key, ciphertext)?,
        noise,
        noise.shots_dec,
        &mut extraction_rng(streams, source.stream_id(), Phase::Reconstruct, 0),
    )?;
    Ok(predict(&v_dec, weights))
}

/// Spectral radius of the Jacobian of a map at a point, by central finite
/// differences followed by power iteration.
pub fn spectral_radius_of_map<F>(map: F, point: &[f64], epsilon: f64, power_iters: usize) -> f64
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = point.len();
    // Column j of the Jacobian, row-major storage.
    let mut jac = vec![0.0f64; n * n];
    for j in 0..n {
        let mut plus = point.to_vec();
        let mut minus = point.to_vec();
        plus[j] += epsilon;
        minus[j] -= epsilon;
        let f_plus = map(&plus);
        let f_minus = map(&minus);
        assert_eq!(f_plus.len(), n, "map must preserve dimension");
        for i in 0..n {
            jac[i * n + j] = (f_plus[i] - f_minus[i]) / (2.0 * epsilon);
        }
    }

    let mut v = vec![1.0f64 / (n as f64).sqrt(); n];
    let mut ratios = Vec::with_capacity(power_iters);
    for _ in 0..power_iters {
        let mut jv = vec![0.0f64; n];
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += jac[i * n + j] * v[j];
            }
            jv[i] = s;
        }
        let norm = jv.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        ratios.push(norm);
        for (vi, ji) in v.iter_mut().zip(&jv) {
            *vi = ji / norm;
        }
    }
    // Geometric mean of the last few growth ratios smooths the oscillation
    // from complex eigenvalue pairs.
    let tail = ratios.len().min(10);
    let log_mean: f64 = ratios[ratios.len() - tail..]
        .iter()
        .map(|r| r.ln())
        .sum::<f64>()
        / tail as f64;
    log_mean.exp()
}

/// Spectral radius of the one-iteration map Phi: (gamma, gamma') ->
/// (gamma+, gamma'+), linearized at the converged point.
///
/// Requires a converged state and ideal noise; under stochastic noise the
/// finite-difference linearization is not defined.
#[allow(clippy::too_many_arguments)]
pub fn spectral_radius_probe<S: FeatureSource + ?Sized>(
    state: &ProtocolState,
    source_a: &S,
    source_b: &S,
    data: &SecretData,
    keys: &KeySet,
    noise: &NoiseConfig,
    opts: &SolveOptions,
    streams: &StreamKey,
    epsilon: f64,
) -> Result<f64> {
    if state.converged_at.is_none() {
        return Err(Error::NotConverged);
    }
    if !noise.is_ideal() {
        return Err(Error::ProbeUnderNoise);
    }
    let nc = state.gamma.len();
    let c = data.values();

    // Extraction is deterministic under ideal noise, so re-deriving the
    // encryption matrices reproduces the solve-time ones exactly.
    let v_a_enc = source_a.features(
        &encode(&keys.a, c)?,
        noise,
        noise.shots_enc,
        &mut extraction_rng(streams, source_a.stream_id(), Phase::Encode, 0),
    )?;
    let v_b_enc = source_b.features(
        &encode(&keys.b, c)?,
        noise,
        noise.shots_enc,
        &mut extraction_rng(streams, source_b.stream_id(), Phase::Encode, 0),
    )?;

    let point: Vec<f64> = state
        .gamma
        .iter()
        .chain(state.gamma_prime.iter())
        .copied()
        .collect();

    let phi = |x: &[f64]| -> Vec<f64> {
        let (g, gp) = x.split_at(nc);
        let one_path = |v_enc: &FeatureMatrix,
                        dec_source: &S,
                        dec_key: &[f64],
                        cipher: &[f64]|
         -> Vec<f64> {
            let w_enc = tikhonov_solve(v_enc, cipher, opts.lambda).expect("ridge solve");
            let updated = predict(v_enc, &w_enc);
            // Faithful iteration body: the decode-side extraction and solve run
            // even though they do not feed back into the ciphertext update.
            let v_dec = dec_source
                .features(
                    &encode(dec_key, &updated).expect("encode"),
                    noise,
                    noise.shots_dec,
                    &mut extraction_rng(streams, dec_source.stream_id(), Phase::Decode, 0),
                )
                .expect("decode extraction");
            let _ = tikhonov_solve(&v_dec, c, opts.lambda).expect("decoder solve");
            updated
        };
        let mut out = one_path(&v_a_enc, source_b, &keys.beta, g);
        out.extend(one_path(&v_b_enc, source_a, &keys.alpha, gp));
        out
    };

    Ok(spectral_radius_of_map(phi, &point, epsilon, 50))
}
