//! Dense state-vector simulation of small qubit registers.
//!
//! Qubit `q` corresponds to bit `q` of the basis-state index (qubit 0 is the
//! least significant bit). Up to 14 qubits are supported; the reservoirs in
//! this crate use 11.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::{eigh, CMatrix};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Hard cap on dense simulation size (2^14 amplitudes).
pub const MAX_QUBITS: usize = 14;

/// Normalized complex amplitude vector over the 2^n computational basis.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// |0...0> on `n_qubits` qubits.
    pub fn zero_state(n_qubits: usize) -> Result<Self> {
        if n_qubits > MAX_QUBITS {
            return Err(Error::DimensionOverflow(n_qubits));
        }
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[0] = ONE;
        Ok(Self { n_qubits, amps })
    }

    /// Build from explicit amplitudes; the squared norm must be 1 within 1e-10.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let n_qubits = amps.len().trailing_zeros() as usize;
        if amps.len() != 1 << n_qubits || amps.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "amplitude vector length {} is not a power of two",
                amps.len()
            )));
        }
        let state = Self { n_qubits, amps };
        let dev = (state.norm_sq() - 1.0).abs();
        if dev > 1e-10 {
            return Err(Error::NonFinite("unnormalized state vector"));
        }
        Ok(state)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return Err(Error::QubitOutOfRange {
                index: q,
                n_qubits: self.n_qubits,
            });
        }
        Ok(())
    }

    fn debug_check_norm(&self) {
        debug_assert!(
            (self.norm_sq() - 1.0).abs() < 1e-10,
            "norm drifted to {}",
            self.norm_sq()
        );
    }

    /// Apply an arbitrary single-qubit operator given by its 2x2 matrix.
    pub fn apply_single_qubit(&mut self, qubit: usize, m: &[[Complex64; 2]; 2]) -> Result<()> {
        self.check_qubit(qubit)?;
        let step = 1usize << qubit;
        let dim = self.amps.len();
        let mut base = 0;
        while base < dim {
            for offset in 0..step {
                let i0 = base + offset;
                let i1 = i0 | step;
                let a = self.amps[i0];
                let b = self.amps[i1];
                self.amps[i0] = m[0][0] * a + m[0][1] * b;
                self.amps[i1] = m[1][0] * a + m[1][1] * b;
            }
            base += 2 * step;
        }
        self.debug_check_norm();
        Ok(())
    }

    /// Rotation exp(-i angle Y / 2).
    pub fn apply_ry(&mut self, qubit: usize, angle: f64) -> Result<()> {
        let (s, c) = (angle / 2.0).sin_cos();
        let m = [
            [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
            [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
        ];
        self.apply_single_qubit(qubit, &m)
    }

    /// Rotation exp(-i angle Z / 2).
    pub fn apply_rz(&mut self, qubit: usize, angle: f64) -> Result<()> {
        let m = [
            [Complex64::from_polar(1.0, -angle / 2.0), ZERO],
            [ZERO, Complex64::from_polar(1.0, angle / 2.0)],
        ];
        self.apply_single_qubit(qubit, &m)
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::InvalidPauliString(
                "cnot control and target must differ".into(),
            ));
        }
        let cbit = 1usize << control;
        let tbit = 1usize << target;
        for x in 0..self.amps.len() {
            if x & cbit != 0 && x & tbit == 0 {
                self.amps.swap(x, x | tbit);
            }
        }
        self.debug_check_norm();
        Ok(())
    }

    /// Apply a general two-qubit unitary.
    ///
    /// `u` is indexed by basis states `|b_a b_b>` of the pair, with the bit of
    /// `qubit_a` the more significant: index = (bit_a << 1) | bit_b. The matrix
    /// is rejected unless U^dagger U = I within 1e-10.
    pub fn apply_two_qubit_unitary(
        &mut self,
        qubit_a: usize,
        qubit_b: usize,
        u: &[[Complex64; 4]; 4],
    ) -> Result<()> {
        self.check_qubit(qubit_a)?;
        self.check_qubit(qubit_b)?;
        if qubit_a == qubit_b {
            return Err(Error::InvalidPauliString(
                "two-qubit unitary requires distinct qubits".into(),
            ));
        }
        let dev = two_qubit_unitarity_deviation(u);
        if dev > 1e-10 {
            return Err(Error::NotUnitary { deviation: dev });
        }

        let abit = 1usize << qubit_a;
        let bbit = 1usize << qubit_b;
        let dim = self.amps.len();
        for base in 0..dim {
            if base & abit != 0 || base & bbit != 0 {
                continue;
            }
            let idx = [base, base | bbit, base | abit, base | abit | bbit];
            let old = [
                self.amps[idx[0]],
                self.amps[idx[1]],
                self.amps[idx[2]],
                self.amps[idx[3]],
            ];
            for (r, &i) in idx.iter().enumerate() {
                self.amps[i] =
                    u[r][0] * old[0] + u[r][1] * old[1] + u[r][2] * old[2] + u[r][3] * old[3];
            }
        }
        self.debug_check_norm();
        Ok(())
    }

    /// Apply a cached dense unitary to the full register.
    pub fn apply_unitary(&mut self, u: &CMatrix) {
        assert_eq!(u.cols(), self.amps.len(), "unitary dimension mismatch");
        self.amps = u.matvec(&self.amps);
        self.debug_check_norm();
    }

    /// Deterministic reset of one qubit to |0>.
    ///
    /// Projects onto the qubit-0 branch and renormalizes. When essentially no
    /// amplitude remains on that branch the qubit is in |1> up to entanglement
    /// with a vanishing branch, so the |1> branch is relabeled instead.
    pub fn reset_qubit(&mut self, qubit: usize) -> Result<()> {
        self.check_qubit(qubit)?;
        let bit = 1usize << qubit;
        let p0: f64 = self
            .amps
            .iter()
            .enumerate()
            .filter(|(x, _)| x & bit == 0)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        if p0 > 1e-12 {
            let scale = Complex64::new(1.0 / p0.sqrt(), 0.0);
            for x in 0..self.amps.len() {
                if x & bit == 0 {
                    self.amps[x] *= scale;
                } else {
                    self.amps[x] = ZERO;
                }
            }
        } else {
            let p1 = 1.0 - p0;
            let scale = Complex64::new(1.0 / p1.sqrt(), 0.0);
            for x in 0..self.amps.len() {
                if x & bit != 0 {
                    self.amps[x ^ bit] = self.amps[x] * scale;
                    self.amps[x] = ZERO;
                }
            }
        }
        self.debug_check_norm();
        Ok(())
    }

    /// Expectation value of a Pauli string, a real number in [-1, 1].
    pub fn expectation(&self, p: &PauliString) -> Result<f64> {
        let mut flip_mask = 0usize;
        let mut sign_mask = 0usize;
        let mut n_y = 0u32;
        for &(q, axis) in p.terms() {
            self.check_qubit(q)?;
            match axis {
                PauliAxis::X => flip_mask |= 1 << q,
                PauliAxis::Y => {
                    flip_mask |= 1 << q;
                    sign_mask |= 1 << q;
                    n_y += 1;
                }
                PauliAxis::Z => sign_mask |= 1 << q,
            }
        }
        // P|x> = i^{n_y} (-1)^{popcount(x & sign_mask)} |x ^ flip_mask>
        let prefactor = match n_y % 4 {
            0 => ONE,
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        let mut acc = ZERO;
        for (x, &ax) in self.amps.iter().enumerate() {
            if ax == ZERO {
                continue;
            }
            let sign = if (x & sign_mask).count_ones().is_multiple_of(2) {
                1.0
            } else {
                -1.0
            };
            acc += self.amps[x ^ flip_mask].conj() * ax * sign;
        }
        let value = (acc * prefactor).re;
        debug_assert!(
            value.abs() <= 1.0 + 1e-12,
            "pauli expectation out of range: {value}"
        );
        Ok(value)
    }

    /// Born probabilities |<x|psi>|^2 for all 2^n basis states.
    pub fn born_probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Sum out one qubit of a Born probability vector.
///
/// Entry `phi` of the result is `P(phi with qubit=0) + P(phi with qubit=1)`,
/// indexed over the remaining qubits with their relative order preserved.
pub fn trace_out_qubit(probs: &[f64], qubit: usize) -> Vec<f64> {
    let dim = probs.len();
    assert!(dim.is_power_of_two() && (1 << qubit) < dim);
    let bit = 1usize << qubit;
    let low_mask = bit - 1;
    let mut reduced = vec![0.0f64; dim / 2];
    for (x, &p) in probs.iter().enumerate() {
        let idx = (x & low_mask) | ((x >> 1) & !low_mask);
        reduced[idx] += p;
    }
    reduced
}

/// Haar-random pure state: normalized vector of iid complex Gaussians.
pub fn haar_random_state<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Result<StateVector> {
    if n_qubits > MAX_QUBITS {
        return Err(Error::DimensionOverflow(n_qubits));
    }
    let dim = 1usize << n_qubits;
    let mut amps = Vec::with_capacity(dim);
    for _ in 0..dim {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        amps.push(Complex64::new(re, im));
    }
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let scale = Complex64::new(1.0 / norm, 0.0);
    for a in &mut amps {
        *a *= scale;
    }
    Ok(StateVector {
        n_qubits,
        amps,
    })
}

fn two_qubit_unitarity_deviation(u: &[[Complex64; 4]; 4]) -> f64 {
    let mut dev = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            let mut dot = ZERO;
            for row in u {
                dot += row[i].conj() * row[j];
            }
            let expected = if i == j { ONE } else { ZERO };
            dev = dev.max((dot - expected).norm());
        }
    }
    dev
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

/// Product of single-qubit Pauli operators on distinct qubits, weight 1..=4.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliString {
    terms: Vec<(usize, PauliAxis)>,
}

impl PauliString {
    pub fn new(mut terms: Vec<(usize, PauliAxis)>) -> Result<Self> {
        if terms.is_empty() || terms.len() > 4 {
            return Err(Error::InvalidPauliString(format!(
                "weight {} outside 1..=4",
                terms.len()
            )));
        }
        terms.sort_by_key(|&(q, _)| q);
        for w in terms.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidPauliString(format!(
                    "duplicate qubit index {}",
                    w[0].0
                )));
            }
        }
        Ok(Self { terms })
    }

    pub fn single(qubit: usize, axis: PauliAxis) -> Self {
        Self {
            terms: vec![(qubit, axis)],
        }
    }

    /// Z_i Z_j correlator.
    pub fn zz(i: usize, j: usize) -> Result<Self> {
        Self::new(vec![(i, PauliAxis::Z), (j, PauliAxis::Z)])
    }

    pub fn terms(&self) -> &[(usize, PauliAxis)] {
        &self.terms
    }

    pub fn weight(&self) -> usize {
        self.terms.len()
    }

    pub fn max_qubit(&self) -> usize {
        self.terms.iter().map(|&(q, _)| q).max().unwrap()
    }

    pub fn label(&self) -> String {
        self.terms
            .iter()
            .map(|&(q, axis)| format!("{:?}{}", axis, q))
            .collect::<Vec<_>>()
            .join("")
    }
}

/// Weighted sum of Pauli strings defining a Hamiltonian.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    n_qubits: usize,
    terms: Vec<(PauliString, f64)>,
}

impl HamiltonianSpec {
    /// Coefficients must lie in [-1, 1] and Pauli strings must be distinct.
    pub fn new(n_qubits: usize, terms: Vec<(PauliString, f64)>) -> Result<Self> {
        if n_qubits > MAX_QUBITS {
            return Err(Error::DimensionOverflow(n_qubits));
        }
        let mut seen = std::collections::HashSet::new();
        for (p, c) in &terms {
            if p.max_qubit() >= n_qubits {
                return Err(Error::InvalidHamiltonian(format!(
                    "term {} exceeds register size {}",
                    p.label(),
                    n_qubits
                )));
            }
            if !(-1.0..=1.0).contains(c) {
                return Err(Error::InvalidHamiltonian(format!(
                    "coefficient {c} outside [-1, 1]"
                )));
            }
            if !seen.insert(p.clone()) {
                return Err(Error::InvalidHamiltonian(format!(
                    "duplicate term {}",
                    p.label()
                )));
            }
        }
        Ok(Self { n_qubits, terms })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[(PauliString, f64)] {
        &self.terms
    }

    pub fn coefficients(&self) -> impl Iterator<Item = f64> + '_ {
        self.terms.iter().map(|&(_, c)| c)
    }

    /// Dense matrix representation.
    pub fn to_matrix(&self) -> CMatrix {
        let dim = 1usize << self.n_qubits;
        let mut h = CMatrix::zeros(dim, dim);
        for (p, coeff) in &self.terms {
            let mut flip_mask = 0usize;
            let mut sign_mask = 0usize;
            let mut n_y = 0u32;
            for &(q, axis) in p.terms() {
                match axis {
                    PauliAxis::X => flip_mask |= 1 << q,
                    PauliAxis::Y => {
                        flip_mask |= 1 << q;
                        sign_mask |= 1 << q;
                        n_y += 1;
                    }
                    PauliAxis::Z => sign_mask |= 1 << q,
                }
            }
            let prefactor = match n_y % 4 {
                0 => ONE,
                1 => Complex64::new(0.0, 1.0),
                2 => Complex64::new(-1.0, 0.0),
                _ => Complex64::new(0.0, -1.0),
            } * Complex64::new(*coeff, 0.0);
            for col in 0..dim {
                let sign = if (col & sign_mask).count_ones().is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                };
                h[(col ^ flip_mask, col)] += prefactor * sign;
            }
        }
        h
    }
}

/// exp(-i H dt) as a dense unitary.
///
/// H is Hermitian by construction, so the exponential is assembled from its
/// eigendecomposition; the result is unitary to roundoff. Intended to be
/// computed once per circuit and cached by the caller.
pub fn build_evolution_unitary(h: &HamiltonianSpec, dt: f64) -> Result<CMatrix> {
    if h.n_qubits() > MAX_QUBITS {
        return Err(Error::DimensionOverflow(h.n_qubits()));
    }
    let m = h.to_matrix();
    let (vals, vecs) = eigh(&m)?;
    let mut scaled = vecs.clone();
    for (k, &w) in vals.iter().enumerate() {
        scaled.scale_column(k, Complex64::from_polar(1.0, -w * dt));
    }
    Ok(scaled.matmul_adjoint_rhs(&vecs))
}
