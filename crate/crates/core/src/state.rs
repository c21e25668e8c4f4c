//! Two-register trial states.
//!
//! The departure and arrival registers each hold `n = ⌈log₂ N⌉` qubits. City
//! `c` (1-based) is basis index `c − 1` in either register, and the joint
//! basis state `|i⟩_d ⊗ |j⟩_a` lives at amplitude index `i·2ⁿ + j`.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{compose_mesh, rectangular_block_count, ComplexMatrix, MeshSpec, UNITARY_TOL};

/// Largest register width accepted; keeps a statevector at 2²⁶ amplitudes.
pub const MAX_REGISTER_QUBITS: usize = 13;

/// Qubits per register for `n_cities` cities.
pub fn register_qubits(n_cities: usize) -> usize {
    n_cities.next_power_of_two().trailing_zeros() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n: usize,
    amplitudes: Vec<Complex64>,
}

impl Statevector {
    /// Wraps raw amplitudes for `n` qubits per register; they must be unit norm.
    pub fn from_amplitudes(n: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if n == 0 || n > MAX_REGISTER_QUBITS {
            return Err(Error::Capacity(format!(
                "{n} qubits per register (supported: 1..={MAX_REGISTER_QUBITS})"
            )));
        }
        if amplitudes.len() != 1 << (2 * n) {
            return Err(Error::Dimension(format!(
                "{} amplitudes for two {n}-qubit registers",
                amplitudes.len()
            )));
        }
        let s = Self { n, amplitudes };
        let defect = (s.norm() - 1.0).abs();
        if !(defect <= 1e-12) {
            return Err(Error::InvalidArgument(format!("state norm off by {defect:e}")));
        }
        Ok(s)
    }

    pub fn qubits_per_register(&self) -> usize {
        self.n
    }

    /// Register dimension `2ⁿ`.
    pub fn register_dim(&self) -> usize {
        1 << self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// Amplitude of `|departure⟩ ⊗ |arrival⟩` (0-based indices).
    pub fn amplitude(&self, departure: usize, arrival: usize) -> Complex64 {
        self.amplitudes[departure * self.register_dim() + arrival]
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Outcome probabilities `|⟨ij|ψ⟩|²`, row-major in `(i, j)`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Reduced density matrix of the departure register (arrival traced out).
    pub fn reduced_departure(&self) -> ComplexMatrix {
        let dim = self.register_dim();
        let mut rho = ComplexMatrix::zeros(dim, dim);
        for i in 0..dim {
            for m in 0..dim {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..dim {
                    acc += self.amplitude(i, j) * self.amplitude(m, j).conj();
                }
                rho[(i, m)] = acc;
            }
        }
        rho
    }

    /// Reduced density matrix of the arrival register (departure traced out).
    pub fn reduced_arrival(&self) -> ComplexMatrix {
        let dim = self.register_dim();
        let mut rho = ComplexMatrix::zeros(dim, dim);
        for j in 0..dim {
            for n in 0..dim {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..dim {
                    acc += self.amplitude(i, j) * self.amplitude(i, n).conj();
                }
                rho[(j, n)] = acc;
            }
        }
        rho
    }

    fn as_matrix(&self) -> ComplexMatrix {
        let dim = self.register_dim();
        ComplexMatrix::from_vec(dim, dim, self.amplitudes.clone()).expect("square by construction")
    }
}

/// `2^{−n/2} Σ_k |k⟩_d ⊗ |k⟩_a`.
pub fn prepare_bell_registers(n: usize) -> Result<Statevector> {
    if n == 0 || n > MAX_REGISTER_QUBITS {
        return Err(Error::Capacity(format!(
            "{n} qubits per register (supported: 1..={MAX_REGISTER_QUBITS})"
        )));
    }
    let dim = 1usize << n;
    let weight = Complex64::new((dim as f64).sqrt().recip(), 0.0);
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim * dim];
    for k in 0..dim {
        amplitudes[k * dim + k] = weight;
    }
    Ok(Statevector { n, amplitudes })
}

/// Departure and arrival unitaries acting on one register each.
#[derive(Debug, Clone, PartialEq)]
pub struct RegisterUnitaries {
    u_d: ComplexMatrix,
    u_a: ComplexMatrix,
    n_cities: usize,
}

impl RegisterUnitaries {
    /// Validates unitarity and the spectator rule: indices `≥ n_cities`
    /// must be untouched by both maps.
    pub fn new(u_d: ComplexMatrix, u_a: ComplexMatrix, n_cities: usize) -> Result<Self> {
        let dim = u_d.rows();
        if !u_d.is_square() || u_a.rows() != dim || u_a.cols() != dim {
            return Err(Error::Dimension(
                "register unitaries must be square and equal size".into(),
            ));
        }
        if n_cities > dim {
            return Err(Error::Dimension(format!(
                "{n_cities} cities exceed register dimension {dim}"
            )));
        }
        for (name, u) in [("departure", &u_d), ("arrival", &u_a)] {
            let defect = u.unitarity_defect();
            if defect > UNITARY_TOL {
                return Err(Error::InvalidArgument(format!(
                    "{name} map is not unitary (defect {defect:e})"
                )));
            }
            for s in n_cities..dim {
                for k in 0..dim {
                    let want = if k == s { 1.0 } else { 0.0 };
                    let row = (u[(s, k)] - want).norm();
                    let col = (u[(k, s)] - want).norm();
                    if row > UNITARY_TOL || col > UNITARY_TOL {
                        return Err(Error::InvalidArgument(format!(
                            "{name} map acts on spectator index {s}"
                        )));
                    }
                }
            }
        }
        Ok(Self { u_d, u_a, n_cities })
    }

    pub fn departure(&self) -> &ComplexMatrix {
        &self.u_d
    }

    pub fn arrival(&self) -> &ComplexMatrix {
        &self.u_a
    }

    pub fn n_cities(&self) -> usize {
        self.n_cities
    }
}

/// Applies `U_d ⊗ U_a`.
///
/// With the state laid out as a `2ⁿ × 2ⁿ` matrix `Ψ[i][j]`, the update is
/// `Ψ ← U_d · Ψ · U_aᵀ`.
pub fn apply_register_unitaries(state: &Statevector, regs: &RegisterUnitaries) -> Result<Statevector> {
    let dim = state.register_dim();
    if regs.u_d.rows() != dim {
        return Err(Error::Dimension(format!(
            "register dimension {dim} but unitaries are {}x{}",
            regs.u_d.rows(),
            regs.u_d.cols()
        )));
    }
    let psi = state.as_matrix();
    let out = regs.u_d.matmul(&psi)?.matmul(&regs.u_a.transpose())?;
    Ok(Statevector {
        n: state.n,
        amplitudes: out.as_slice().to_vec(),
    })
}

/// The variational angle vector for an `n_cities` instance.
///
/// Four cities use the reduced six-angle form `(α₁, α₂, α₃ | α₄, α₅, α₆)`
/// that pins city 1 as first departure and last arrival. Every other size
/// uses a full real rectangular mesh per register over the city modes,
/// `N(N−1)/2` angles each, departure angles first.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalParams {
    n_cities: usize,
    angles: Vec<f64>,
}

impl VariationalParams {
    pub fn new(n_cities: usize, angles: Vec<f64>) -> Result<Self> {
        let expected = Self::expected_len(n_cities)?;
        if angles.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "{n_cities} cities take {expected} angles, got {}",
                angles.len()
            )));
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("variational angle".into()));
        }
        Ok(Self { n_cities, angles })
    }

    /// Parameter count for `n_cities` cities.
    pub fn expected_len(n_cities: usize) -> Result<usize> {
        if n_cities < 3 {
            return Err(Error::InvalidArgument(format!(
                "{n_cities} cities: no fixed-point-free tour exists"
            )));
        }
        if register_qubits(n_cities) > MAX_REGISTER_QUBITS {
            return Err(Error::Capacity(format!("{n_cities} cities")));
        }
        Ok(if n_cities == 4 {
            6
        } else {
            2 * rectangular_block_count(n_cities)
        })
    }

    pub fn n_cities(&self) -> usize {
        self.n_cities
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn into_angles(self) -> Vec<f64> {
        self.angles
    }

    /// Departure-register angles.
    pub fn departure(&self) -> &[f64] {
        &self.angles[..self.angles.len() / 2]
    }

    /// Arrival-register angles.
    pub fn arrival(&self) -> &[f64] {
        &self.angles[self.angles.len() / 2..]
    }
}

/// Builds `U_d ⊗ U_a` from the angle vector by mesh composition.
pub fn register_unitaries(params: &VariationalParams) -> Result<RegisterUnitaries> {
    let n_cities = params.n_cities;
    let dim = 1usize << register_qubits(n_cities);
    let (u_d, u_a) = if n_cities == 4 {
        let d = params.departure();
        let a = params.arrival();
        let h = FRAC_PI_2;
        // Departure: θ₁ = θ₂ = θ₄ = π/2 keeps |1⟩ fixed.
        let u_d = compose_mesh(&MeshSpec::rectangular4([h, h, d[0], h, d[1], d[2]]));
        // Arrival: θ₁ = θ₃ = θ₅ = 0 sends |4⟩ to |1⟩.
        let u_a = compose_mesh(&MeshSpec::rectangular4([0.0, a[0], 0.0, a[1], 0.0, a[2]]));
        (u_d, u_a)
    } else {
        let u_d = compose_mesh(&MeshSpec::rectangular(dim, n_cities, params.departure())?);
        let u_a = compose_mesh(&MeshSpec::rectangular(dim, n_cities, params.arrival())?);
        (u_d, u_a)
    };
    RegisterUnitaries::new(u_d, u_a, n_cities)
}

/// `(U_d ⊗ U_a)|ψ₀⟩` for the given angles.
pub fn build_trial_state(params: &VariationalParams) -> Result<Statevector> {
    let regs = register_unitaries(params)?;
    let psi0 = prepare_bell_registers(register_qubits(params.n_cities))?;
    apply_register_unitaries(&psi0, &regs)
}
