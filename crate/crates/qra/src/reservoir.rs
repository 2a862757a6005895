//! Fixed random XYZ-Hamiltonian reservoirs and sequential feature extraction.
//!
//! A reservoir holds two independently drawn Hamiltonians whose evolution
//! unitaries alternate with period 6 (circuit 1 for t mod 6 < 3, circuit 2
//! otherwise). Inputs are injected through a rotation on the ancilla qubit,
//! which is reset to |0> before every timestep; the register state carries
//! over between timesteps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

pub use crate::features::FeatureMatrix;
use crate::features::FeatureSource;
use crate::linalg::CMatrix;
use crate::noise::{
    accumulate_damping, noisy_expectation, yomo_features, MeasureMode, NoiseConfig, Shots,
};
use crate::sim::{build_evolution_unitary, HamiltonianSpec, PauliAxis, PauliString, StateVector};
use crate::{Error, Result};

/// Input injection gate on the ancilla.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputGate {
    Ry,
    Rz,
}

/// Which interaction orders enter the random Hamiltonians.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermFamily {
    pub two_body: bool,
    pub three_body_zzz: bool,
    pub four_body_zzzz: bool,
}

impl Default for TermFamily {
    fn default() -> Self {
        Self {
            two_body: true,
            three_body_zzz: true,
            four_body_zzzz: true,
        }
    }
}

impl TermFamily {
    /// Single-body terms only; multi-qubit correlations then factorize.
    pub fn one_body_only() -> Self {
        Self {
            two_body: false,
            three_body_zzz: false,
            four_body_zzzz: false,
        }
    }
}

/// Tunable reservoir parameters other than size and seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReservoirConfig {
    pub dt: f64,
    pub input_angle_scale: f64,
    pub input_gate: InputGate,
    pub term_family: TermFamily,
}

impl Default for ReservoirConfig {
    fn default() -> Self {
        Self {
            dt: 1.0,
            input_angle_scale: 1.0,
            input_gate: InputGate::Ry,
            term_family: TermFamily::default(),
        }
    }
}

/// Feature dimension of the per-Pauli measurement scheme:
/// 3 Nq singles + Nq(Nq-1)/2 ZZ correlators + bias.
pub fn feature_dimension(n_data_qubits: usize) -> usize {
    3 * n_data_qubits + n_data_qubits * (n_data_qubits - 1) / 2 + 1
}

/// Fixed random reservoir: seed, geometry, and both Hamiltonians.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReservoirSpec {
    pub seed: u64,
    pub n_data_qubits: usize,
    pub dt: f64,
    pub input_angle_scale: f64,
    pub input_gate: InputGate,
    pub term_family: TermFamily,
    pub hamiltonian_1: HamiltonianSpec,
    pub hamiltonian_2: HamiltonianSpec,
    pub total_parameter_count: usize,
}

impl ReservoirSpec {
    pub fn n_total_qubits(&self) -> usize {
        self.n_data_qubits + 1
    }

    pub fn ancilla(&self) -> usize {
        self.n_data_qubits
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reservoir spec serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s)
            .map_err(|e| Error::InvalidHamiltonian(format!("bad reservoir JSON: {e}")))
    }
}

/// All Pauli strings of the configured family on `n_total` qubits, in a fixed
/// enumeration order: singles (qubit-major, X/Y/Z), pairs (9 axis
/// combinations), ZZZ triples, ZZZZ quadruples.
fn enumerate_terms(n_total: usize, family: TermFamily) -> Vec<PauliString> {
    let axes = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];
    let mut terms = Vec::new();
    for q in 0..n_total {
        for &ax in &axes {
            terms.push(PauliString::single(q, ax));
        }
    }
    if family.two_body {
        for i in 0..n_total {
            for j in i + 1..n_total {
                for &ai in &axes {
                    for &aj in &axes {
                        terms.push(PauliString::new(vec![(i, ai), (j, aj)]).unwrap());
                    }
                }
            }
        }
    }
    if family.three_body_zzz {
        for i in 0..n_total {
            for j in i + 1..n_total {
                for k in j + 1..n_total {
                    terms.push(
                        PauliString::new(vec![
                            (i, PauliAxis::Z),
                            (j, PauliAxis::Z),
                            (k, PauliAxis::Z),
                        ])
                        .unwrap(),
                    );
                }
            }
        }
    }
    if family.four_body_zzzz {
        for i in 0..n_total {
            for j in i + 1..n_total {
                for k in j + 1..n_total {
                    for l in k + 1..n_total {
                        terms.push(
                            PauliString::new(vec![
                                (i, PauliAxis::Z),
                                (j, PauliAxis::Z),
                                (k, PauliAxis::Z),
                                (l, PauliAxis::Z),
                            ])
                            .unwrap(),
                        );
                    }
                }
            }
        }
    }
    terms
}

/// Draw both Hamiltonians from the seeded stream; deterministic per seed.
pub fn build_reservoir(
    seed: u64,
    n_data_qubits: usize,
    config: &ReservoirConfig,
) -> Result<ReservoirSpec> {
    let n_total = n_data_qubits + 1;
    let term_list = enumerate_terms(n_total, config.term_family);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut draw = |terms: &[PauliString]| -> Result<HamiltonianSpec> {
        let weighted = terms
            .iter()
            .map(|p| (p.clone(), rng.random_range(-1.0..1.0)))
            .collect();
        HamiltonianSpec::new(n_total, weighted)
    };
    let hamiltonian_1 = draw(&term_list)?;
    let hamiltonian_2 = draw(&term_list)?;
    let total_parameter_count = 2 * term_list.len();
    Ok(ReservoirSpec {
        seed,
        n_data_qubits,
        dt: config.dt,
        input_angle_scale: config.input_angle_scale,
        input_gate: config.input_gate,
        term_family: config.term_family,
        hamiltonian_1,
        hamiltonian_2,
        total_parameter_count,
    })
}

/// Reservoir with its evolution unitaries materialized.
///
/// Building the unitaries is the expensive step (dense exponential of a
/// 2^11-dimensional matrix for the default geometry); compile once and share.
pub struct CompiledReservoir {
    spec: ReservoirSpec,
    u1: CMatrix,
    u2: CMatrix,
}

impl CompiledReservoir {
    pub fn compile(spec: ReservoirSpec) -> Result<Self> {
        let u1 = build_evolution_unitary(&spec.hamiltonian_1, spec.dt)?;
        let u2 = build_evolution_unitary(&spec.hamiltonian_2, spec.dt)?;
        Ok(Self { spec, u1, u2 })
    }

    pub fn spec(&self) -> &ReservoirSpec {
        &self.spec
    }

    pub fn unitary(&self, circuit: CircuitId) -> &CMatrix {
        match circuit {
            CircuitId::One => &self.u1,
            CircuitId::Two => &self.u2,
        }
    }
}

/// Which of the two alternating circuits was applied at a timestep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CircuitId {
    One,
    Two,
}

/// Alternation rule: circuit 1 while t mod 6 < 3, circuit 2 otherwise.
pub fn circuit_for_timestep(t: usize) -> CircuitId {
    if t % 6 < 3 {
        CircuitId::One
    } else {
        CircuitId::Two
    }
}

/// Per-extraction bookkeeping used by tests and the protocol counters.
#[derive(Clone, Debug, Default)]
pub struct ExtractionTrace {
    pub circuits: Vec<CircuitId>,
    /// Number of values routed through the measurement pipeline (bias included).
    pub measurement_calls: usize,
}

/// Observable list of the per-Pauli scheme, with labels.
fn pauli_observables(n_data: usize) -> Vec<(PauliString, usize)> {
    let axes = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];
    let mut obs = Vec::with_capacity(feature_dimension(n_data) - 1);
    for &ax in &axes {
        for q in 0..n_data {
            obs.push((PauliString::single(q, ax), 1));
        }
    }
    for i in 0..n_data {
        for j in i + 1..n_data {
            obs.push((PauliString::zz(i, j).unwrap(), 2));
        }
    }
    obs
}

fn pauli_labels(n_data: usize) -> Vec<String> {
    let mut labels: Vec<String> = pauli_observables(n_data)
        .iter()
        .map(|(p, _)| p.label())
        .collect();
    labels.push("bias".into());
    labels
}

fn yomo_labels(k: usize) -> Vec<String> {
    let mut labels: Vec<String> = (0..k).map(|g| format!("group{g}")).collect();
    labels.push("bias".into());
    labels
}

/// Run an input sequence through the reservoir and measure one feature row per
/// timestep. See the module docs for the evolution rule.
pub fn extract_features(
    reservoir: &CompiledReservoir,
    inputs: &[f64],
    noise: &NoiseConfig,
    shots: Shots,
    rng: &mut ChaCha12Rng,
) -> Result<FeatureMatrix> {
    extract_features_traced(reservoir, inputs, noise, shots, rng).map(|(m, _)| m)
}

pub fn extract_features_traced(
    reservoir: &CompiledReservoir,
    inputs: &[f64],
    noise: &NoiseConfig,
    shots: Shots,
    rng: &mut ChaCha12Rng,
) -> Result<(FeatureMatrix, ExtractionTrace)> {
    noise.validate()?;
    if !inputs.iter().all(|u| u.is_finite()) {
        return Err(Error::NonFinite("reservoir input sequence"));
    }
    let spec = &reservoir.spec;
    let n_data = spec.n_data_qubits;
    let ancilla = spec.ancilla();
    if noise.mode == MeasureMode::Yomo && noise.yomo_k > (1 << n_data) {
        return Err(Error::InvalidNoiseConfig(format!(
            "yomo_k = {} exceeds 2^{n_data} reduced states",
            noise.yomo_k
        )));
    }

    let observables = match noise.mode {
        MeasureMode::Pauli => pauli_observables(n_data),
        MeasureMode::Yomo => Vec::new(),
    };
    let p1 = noise.p_dep;
    let p2 = noise.p_dep_2q_effective();

    let mut state = StateVector::zero_state(spec.n_total_qubits())?;
    let mut rows = Vec::with_capacity(inputs.len());
    let mut trace = ExtractionTrace::default();

    for (t, &u) in inputs.iter().enumerate() {
        state.reset_qubit(ancilla)?;
        let angle = spec.input_angle_scale * u;
        match spec.input_gate {
            InputGate::Ry => state.apply_ry(ancilla, angle)?,
            InputGate::Rz => state.apply_rz(ancilla, angle)?,
        }
        let circuit = circuit_for_timestep(t);
        state.apply_unitary(reservoir.unitary(circuit));
        trace.circuits.push(circuit);

        let a_factor = accumulate_damping(noise.g1, noise.g2, p1, p2, t);
        let row = match noise.mode {
            MeasureMode::Pauli => {
                let mut row = Vec::with_capacity(observables.len() + 1);
                for (p, support) in &observables {
                    let exact = state.expectation(p)?;
                    row.push(noisy_expectation(exact, *support, a_factor, shots, rng)?);
                }
                // The bias is a constant observable with trivial support; it
                // passes through the same pipeline and always samples to 1.
                row.push(noisy_expectation(1.0, 0, a_factor, shots, rng)?);
                trace.measurement_calls += row.len();
                row
            }
            MeasureMode::Yomo => {
                let lambda_global = a_factor.powi(n_data as i32);
                let row = yomo_features(&state, ancilla, shots, lambda_global, noise.yomo_k, rng)?;
                trace.measurement_calls += 1;
                row
            }
        };
        rows.push(row);
    }

    let labels = match noise.mode {
        MeasureMode::Pauli => pauli_labels(n_data),
        MeasureMode::Yomo => yomo_labels(noise.yomo_k),
    };
    Ok((FeatureMatrix::from_rows(rows, labels)?, trace))
}

/// Shareable handle implementing [`FeatureSource`] for the protocol solver.
#[derive(Clone)]
pub struct ReservoirExtractor {
    compiled: std::sync::Arc<CompiledReservoir>,
}

impl ReservoirExtractor {
    pub fn new(compiled: std::sync::Arc<CompiledReservoir>) -> Self {
        Self { compiled }
    }

    pub fn compiled(&self) -> &CompiledReservoir {
        &self.compiled
    }
}

impl FeatureSource for ReservoirExtractor {
    fn features(
        &self,
        inputs: &[f64],
        noise: &NoiseConfig,
        shots: Shots,
        rng: &mut ChaCha12Rng,
    ) -> Result<FeatureMatrix> {
        extract_features(&self.compiled, inputs, noise, shots, rng)
    }

    fn feature_dim(&self, noise: &NoiseConfig) -> usize {
        match noise.mode {
            MeasureMode::Pauli => feature_dimension(self.compiled.spec.n_data_qubits),
            MeasureMode::Yomo => noise.yomo_k + 1,
        }
    }

    fn stream_id(&self) -> u64 {
        self.compiled.spec.seed
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::readout::condition_diagnostics;

    fn small_config() -> ReservoirConfig {
        ReservoirConfig::default()
    }

    fn compiled(seed: u64, n_data: usize) -> CompiledReservoir {
        let spec = build_reservoir(seed, n_data, &small_config()).unwrap();
        CompiledReservoir::compile(spec).unwrap()
    }

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    #[test]
    fn feature_dimension_values() {
        assert_eq!(feature_dimension(10), 76);
        assert_eq!(feature_dimension(15), 151);
        assert_eq!(feature_dimension(1), 4);
    }

    #[test]
    fn reservoir_coefficients_deterministic_and_bounded() {
        let cfg = small_config();
        let a = build_reservoir(0, 4, &cfg).unwrap();
        let b = build_reservoir(0, 4, &cfg).unwrap();
        let c = build_reservoir(1, 4, &cfg).unwrap();
        let coeffs =
            |s: &ReservoirSpec| -> Vec<f64> { s.hamiltonian_1.coefficients().collect() };
        assert_eq!(coeffs(&a), coeffs(&b));
        assert_ne!(coeffs(&a), coeffs(&c));
        for v in a
            .hamiltonian_1
            .coefficients()
            .chain(a.hamiltonian_2.coefficients())
        {
            assert!((-1.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn parameter_count_matches_family() {
        // n_total = 5: 15 singles + 10 pairs * 9 + 10 triples + 5 quadruples
        let spec = build_reservoir(3, 4, &small_config()).unwrap();
        let per_circuit = 15 + 90 + 10 + 5;
        assert_eq!(spec.hamiltonian_1.terms().len(), per_circuit);
        assert_eq!(spec.total_parameter_count, 2 * per_circuit);

        // full geometry: 33 + 495 + 165 + 330 = 1023 per circuit
        let cfg = small_config();
        let full = build_reservoir(0, 10, &cfg).unwrap();
        assert_eq!(full.hamiltonian_1.terms().len(), 1023);
        assert_eq!(full.total_parameter_count, 2046);
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = build_reservoir(7, 3, &small_config()).unwrap();
        let json = spec.to_json();
        let back = ReservoirSpec::from_json(&json).unwrap();
        assert_eq!(back.seed, spec.seed);
        assert_eq!(back.total_parameter_count, spec.total_parameter_count);
        let a: Vec<f64> = spec.hamiltonian_1.coefficients().collect();
        let b: Vec<f64> = back.hamiltonian_1.coefficients().collect();
        assert_eq!(a, b);
    }

    #[test]
    fn extraction_shape_bias_and_range() {
        let res = compiled(0, 4);
        let inputs = [0.3, -0.5, 0.8, 0.1, -0.9];
        let m = extract_features(
            &res,
            &inputs,
            &NoiseConfig::ideal(),
            Shots::Infinite,
            &mut rng(0),
        )
        .unwrap();
        assert_eq!(m.rows(), 5);
        assert_eq!(m.cols(), feature_dimension(4));
        for r in 0..m.rows() {
            assert_eq!(m.get(r, m.cols() - 1), 1.0);
            for c in 0..m.cols() - 1 {
                assert!(m.get(r, c).abs() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn extraction_deterministic() {
        let res = compiled(1, 4);
        let inputs = [0.2, 0.4, -0.6];
        let noise = NoiseConfig::shot(200);
        let a = extract_features(&res, &inputs, &noise, Shots::Finite(200), &mut rng(5)).unwrap();
        let b = extract_features(&res, &inputs, &noise, Shots::Finite(200), &mut rng(5)).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn circuit_alternation_has_period_six() {
        let res = compiled(2, 3);
        let inputs = vec![0.1; 14];
        let (_, trace) = extract_features_traced(
            &res,
            &inputs,
            &NoiseConfig::ideal(),
            Shots::Infinite,
            &mut rng(0),
        )
        .unwrap();
        for (t, &c) in trace.circuits.iter().enumerate() {
            let expected = if t % 6 < 3 {
                CircuitId::One
            } else {
                CircuitId::Two
            };
            assert_eq!(c, expected, "timestep {t}");
        }
    }

    #[test]
    fn one_body_reservoir_has_factorized_correlators() {
        // Product-state sanity check: without interactions, <Z_i Z_j> equals
        // <Z_i><Z_j> on every row.
        let cfg = ReservoirConfig {
            term_family: TermFamily::one_body_only(),
            ..ReservoirConfig::default()
        };
        let spec = build_reservoir(4, 4, &cfg).unwrap();
        let res = CompiledReservoir::compile(spec).unwrap();
        let inputs = [0.7, -0.3, 0.5, 0.2, -0.8, 0.9, 0.1];
        let m = extract_features(
            &res,
            &inputs,
            &NoiseConfig::ideal(),
            Shots::Infinite,
            &mut rng(0),
        )
        .unwrap();
        let n = 4;
        let z_col = |q: usize| 2 * n + q;
        let mut zz_col = 3 * n;
        for i in 0..n {
            for j in i + 1..n {
                for r in 0..m.rows() {
                    let prod = m.get(r, z_col(i)) * m.get(r, z_col(j));
                    assert!(
                        (m.get(r, zz_col) - prod).abs() < 1e-10,
                        "row {r}, pair ({i},{j})"
                    );
                }
                zz_col += 1;
            }
        }
    }

    #[test]
    fn yomo_mode_changes_dimension() {
        let res = compiled(5, 4);
        let noise = NoiseConfig::shot(500).with_yomo(6);
        let m = extract_features(&res, &[0.1, 0.2], &noise, Shots::Finite(500), &mut rng(1))
            .unwrap();
        assert_eq!(m.cols(), 7);
        assert_eq!(m.get(0, 6), 1.0);
        // group means of frequencies over 16 states times sizes sum to 1
        let sizes = crate::noise::yomo_group_sizes(16, 6);
        let total: f64 = (0..6).map(|g| m.get(0, g) * sizes[g] as f64).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn yomo_k_too_large_rejected() {
        let res = compiled(5, 3);
        let noise = NoiseConfig::shot(100).with_yomo(9);
        assert!(extract_features(&res, &[0.1], &noise, Shots::Finite(100), &mut rng(1)).is_err());
    }

    #[test]
    fn small_reservoir_features_have_full_row_rank() {
        // Rank condition at desk scale: Nc = 8 rows from a 4-data-qubit
        // reservoir (d = 19) across several seeds.
        for seed in 0..3 {
            let res = compiled(seed, 4);
            let mut input_rng = rng(100 + seed);
            let inputs: Vec<f64> = (0..8).map(|_| input_rng.random_range(-0.9..0.9)).collect();
            let m = extract_features(
                &res,
                &inputs,
                &NoiseConfig::ideal(),
                Shots::Infinite,
                &mut rng(0),
            )
            .unwrap();
            let rep = condition_diagnostics(&m);
            assert_eq!(rep.numerical_rank, 8, "seed {seed}");
        }
    }
}
