//! Route adjacency matrix readout: exact, or from emulated coincidence counts.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::RoutePermutation;
use crate::rng::stream_rng;
use crate::state::Statevector;

/// Default number of coincidence events per evaluation.
pub const DEFAULT_SHOTS: u64 = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReadoutMode {
    Exact,
    Sampled { shots: u64 },
}

/// The matrix `X` over the `2ⁿ × 2ⁿ` register basis, row-major, with
/// `X_ij = 2ⁿ · P(departure = i, arrival = j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    dim: usize,
    entries: Vec<f64>,
    mode: ReadoutMode,
}

impl CorrelationMatrix {
    /// Wraps a square non-negative matrix given row by row.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Dimension(
                "correlation matrix must be square and non-empty".into(),
            ));
        }
        Self::from_entries(dim, rows.concat(), ReadoutMode::Exact)
    }

    pub fn from_entries(dim: usize, entries: Vec<f64>, mode: ReadoutMode) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::Dimension(format!(
                "{} entries for a {dim}x{dim} matrix",
                entries.len()
            )));
        }
        if let Some(bad) = entries.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "entry {bad} is not a finite non-negative number"
            )));
        }
        Ok(Self { dim, entries, mode })
    }

    /// Permutation matrix of `route`, padded with identity on spectator indices.
    pub fn from_route(route: &RoutePermutation, dim: usize) -> Result<Self> {
        let x = padded_route_matrix(route, dim)?;
        Self::from_entries(dim, x, ReadoutMode::Exact)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> ReadoutMode {
        self.mode
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|k| self.get(k, k)).sum()
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Raw coincidence counts behind a sampled matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoincidenceRecord {
    pub dim: usize,
    /// Row-major `CC[i][j]`.
    pub counts: Vec<u64>,
    pub total: u64,
    pub seed: u64,
}

/// Exact readout: `X_ij = 2ⁿ |⟨ij|ψ⟩|²`.
pub fn correlation_exact(state: &Statevector) -> CorrelationMatrix {
    let dim = state.register_dim() as f64;
    CorrelationMatrix {
        dim: state.register_dim(),
        entries: state.amplitudes().iter().map(|z| dim * z.norm_sqr()).collect(),
        mode: ReadoutMode::Exact,
    }
}

/// Draws `shots` joint outcomes and normalizes: `X_ij = 2ⁿ CC[i,j] / CC^tot`.
pub fn correlation_sampled(
    state: &Statevector,
    shots: u64,
    seed: u64,
) -> Result<(CorrelationMatrix, CoincidenceRecord)> {
    counts_to_correlation(state.register_dim(), &state.probabilities(), shots, seed)
}

/// Samples counts for a `dim × dim` outcome grid and builds the normalized matrix.
pub(crate) fn counts_to_correlation(
    dim: usize,
    probabilities: &[f64],
    shots: u64,
    seed: u64,
) -> Result<(CorrelationMatrix, CoincidenceRecord)> {
    let counts = sample_counts(probabilities, shots, seed)?;
    let total: u64 = counts.iter().sum();
    let scale = dim as f64 / total as f64;
    let entries = counts.iter().map(|&c| c as f64 * scale).collect();
    Ok((
        CorrelationMatrix {
            dim,
            entries,
            mode: ReadoutMode::Sampled { shots },
        },
        CoincidenceRecord {
            dim,
            counts,
            total,
            seed,
        },
    ))
}

/// One multinomial draw of `shots` events over `probabilities`.
///
/// Each event inverts the cumulative distribution at a fresh uniform, so two
/// nearby distributions sampled under the same seed share most of their
/// events. Finite-difference probes rely on that coupling.
pub fn sample_counts(probabilities: &[f64], shots: u64, seed: u64) -> Result<Vec<u64>> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be at least 1".into()));
    }
    let mut cumulative = Vec::with_capacity(probabilities.len());
    let mut acc = 0.0;
    for &p in probabilities {
        if !(p.is_finite() && p >= 0.0) {
            return Err(Error::InvalidArgument(format!("invalid outcome probability {p}")));
        }
        acc += p;
        cumulative.push(acc);
    }
    if !(acc > 0.0) {
        return Err(Error::InvalidArgument("outcome probabilities sum to zero".into()));
    }
    let mut rng = stream_rng(seed, 0);
    let mut counts = vec![0u64; probabilities.len()];
    let last_positive = probabilities.iter().rposition(|&p| p > 0.0).expect("acc > 0");
    for _ in 0..shots {
        let u = rng.random::<f64>() * acc;
        // First bin whose cumulative mass exceeds u; zero-probability bins are never hit.
        let k = cumulative.partition_point(|&c| c <= u).min(last_positive);
        counts[k] += 1;
    }
    Ok(counts)
}

/// Route matrix padded with ones on the spectator diagonal.
pub(crate) fn padded_route_matrix(route: &RoutePermutation, dim: usize) -> Result<Vec<f64>> {
    let n = route.n_cities();
    if n > dim || dim > n.next_power_of_two() {
        return Err(Error::Dimension(format!(
            "a {n}-city route does not fit a {dim}x{dim} readout"
        )));
    }
    let mut x = vec![0.0; dim * dim];
    for k in 0..n {
        x[k * dim + route.successor(k)] = 1.0;
    }
    for s in n..dim {
        x[s * dim + s] = 1.0;
    }
    Ok(x)
}

/// `2^{−n} Tr[X·xᵀ]`, with `x` padded by identity on spectator indices.
pub fn overlap(x_hat: &CorrelationMatrix, reference: &RoutePermutation) -> Result<f64> {
    let x = padded_route_matrix(reference, x_hat.dim)?;
    let dot: f64 = x_hat.entries.iter().zip(&x).map(|(a, b)| a * b).sum();
    Ok(dot / x_hat.dim as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StochasticityReport {
    pub max_row_deviation: f64,
    pub max_col_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Checks every row and column sum against 1.
pub fn assert_doubly_stochastic(x: &CorrelationMatrix, tol: f64) -> StochasticityReport {
    let d = x.dim;
    let row_dev = (0..d)
        .map(|i| ((0..d).map(|j| x.get(i, j)).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let col_dev = (0..d)
        .map(|j| ((0..d).map(|i| x.get(i, j)).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    StochasticityReport {
        max_row_deviation: row_dev,
        max_col_deviation: col_dev,
        tolerance: tol,
        passed: row_dev <= tol && col_dev <= tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{build_trial_state, prepare_bell_registers, VariationalParams};
    use num_complex::Complex64;

    fn route(seq: &[usize]) -> RoutePermutation {
        RoutePermutation::from_route(seq).unwrap()
    }

    fn route_state_1234() -> Statevector {
        let mut amps = vec![Complex64::new(0.0, 0.0); 16];
        for (i, j) in [(0, 1), (1, 2), (2, 3), (3, 0)] {
            amps[i * 4 + j] = Complex64::new(0.5, 0.0);
        }
        Statevector::from_amplitudes(2, amps).unwrap()
    }

    #[test]
    fn bell_state_reads_identity() {
        let x = correlation_exact(&prepare_bell_registers(2).unwrap());
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(x.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn route_state_reads_route_matrix() {
        let x = correlation_exact(&route_state_1234());
        let expected = CorrelationMatrix::from_route(&route(&[1, 2, 3, 4]), 4).unwrap();
        assert_eq!(x.max_abs_diff(&expected), 0.0);
    }

    #[test]
    fn phases_on_route_terms_do_not_change_readout() {
        let base = route_state_1234();
        let phased: Vec<_> = base
            .amplitudes()
            .iter()
            .enumerate()
            .map(|(k, z)| z * Complex64::from_polar(1.0, 0.7 * k as f64))
            .collect();
        let phased = Statevector::from_amplitudes(2, phased).unwrap();
        assert!(correlation_exact(&phased).max_abs_diff(&correlation_exact(&base)) <= 1e-12);
    }

    #[test]
    fn sampled_entries_sum_to_dimension() {
        let state = build_trial_state(&VariationalParams::new(4, vec![0.4, 1.1, 2.0, 0.3, 2.5, 1.4]).unwrap()).unwrap();
        let (x, rec) = correlation_sampled(&state, DEFAULT_SHOTS, 11).unwrap();
        assert_eq!(rec.total, DEFAULT_SHOTS);
        assert_eq!(rec.counts.iter().sum::<u64>(), rec.total);
        assert!((x.total() - 4.0).abs() < 1e-12);
        assert_eq!(x.mode(), ReadoutMode::Sampled { shots: DEFAULT_SHOTS });
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let state = route_state_1234();
        let a = correlation_sampled(&state, 500, 3).unwrap().1;
        let b = correlation_sampled(&state, 500, 3).unwrap().1;
        let c = correlation_sampled(&state, 500, 4).unwrap().1;
        assert_eq!(a, b);
        assert_ne!(a.counts, c.counts);
    }

    #[test]
    fn zero_shots_rejected() {
        let err = correlation_sampled(&route_state_1234(), 0, 1).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn zero_probability_outcomes_never_drawn() {
        let counts = sample_counts(&[0.0, 0.5, 0.0, 0.5, 0.0], 10_000, 9).unwrap();
        assert_eq!(counts[0] + counts[2] + counts[4], 0);
    }

    #[test]
    fn overlap_extremes() {
        let r = route(&[1, 2, 3, 4]);
        let x = CorrelationMatrix::from_route(&r, 4).unwrap();
        assert_eq!(overlap(&x, &r).unwrap(), 1.0);
        let identity = correlation_exact(&prepare_bell_registers(2).unwrap());
        assert_eq!(overlap(&identity, &r).unwrap(), 0.0);
        assert!(matches!(
            overlap(&identity, &route(&[1, 2, 3, 4, 5])),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn overlap_pads_spectators() {
        let r = route(&[1, 3, 2]);
        let x = CorrelationMatrix::from_route(&r, 4).unwrap();
        assert_eq!(x.get(3, 3), 1.0);
        assert_eq!(overlap(&x, &r).unwrap(), 1.0);
    }

    #[test]
    fn stochasticity_report() {
        let good = correlation_exact(&route_state_1234());
        assert!(assert_doubly_stochastic(&good, 1e-10).passed);

        let bad = CorrelationMatrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 0.5]]).unwrap();
        let rep = assert_doubly_stochastic(&bad, 1e-10);
        assert!(!rep.passed);
        assert!((rep.max_row_deviation - 0.5).abs() < 1e-15);
        assert!((rep.max_col_deviation - 0.0).abs() < 1e-15);
    }

    #[test]
    fn negative_entries_rejected() {
        assert!(CorrelationMatrix::from_rows(&[vec![1.0, -0.1], vec![0.0, 1.0]]).is_err());
        assert!(CorrelationMatrix::from_rows(&[vec![1.0, 0.0]]).is_err());
    }
}
