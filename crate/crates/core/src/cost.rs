//! Variational cost: route length plus subtour-elimination reward.
//!
//! `C(X) = Σ_ij D_ij X_ij − A_sub · Σ_{S active} Σ_{i∈S} Σ_{j∈[N]∖S} X_ij`
//!
//! In full mode every proper non-empty `S ⊆ [N]` is active. In lazy mode only
//! an explicit list of subsets is, grown from the subtours found after each
//! converged run.

use std::fmt;

use crate::error::{Error, Result};
use crate::measurement::CorrelationMatrix;
use crate::oracle::RoutePermutation;

pub const DEFAULT_DIAG_PENALTY: f64 = 100.0;
pub const DEFAULT_A_SUB: f64 = 50.0;
/// Full-mode enumeration is capped here (about 10⁶ subsets).
pub const FULL_MODE_MAX_CITIES: usize = 20;
/// City subsets are 64-bit masks.
pub const MAX_CITIES: usize = 64;

/// Distances `D_ij` from city `i` to city `j`, diagonal set to the penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    entries: Vec<f64>,
    diag_penalty: f64,
}

impl DistanceMatrix {
    /// Takes `rows` as given and overwrites the diagonal with `diag_penalty`.
    pub fn new(rows: Vec<Vec<f64>>, diag_penalty: f64) -> Result<Self> {
        let n = rows.len();
        if n < 3 {
            return Err(Error::InvalidArgument(format!(
                "{n} cities: no fixed-point-free tour exists"
            )));
        }
        if n > MAX_CITIES {
            return Err(Error::Capacity(format!("{n} cities (at most {MAX_CITIES})")));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::Dimension(format!(
                "row {} has {} entries, expected {n}",
                i + 1,
                rows[i].len()
            )));
        }
        if !(diag_penalty.is_finite() && diag_penalty >= 0.0) {
            return Err(Error::InvalidArgument(format!("diagonal penalty {diag_penalty}")));
        }
        let mut entries = rows.concat();
        for (k, v) in entries.iter().enumerate() {
            if !(v.is_finite() && *v >= 0.0) && k / n != k % n {
                return Err(Error::InvalidArgument(format!(
                    "D[{}][{}] = {v} is not a finite non-negative distance",
                    k / n + 1,
                    k % n + 1
                )));
            }
        }
        for k in 0..n {
            entries[k * n + k] = diag_penalty;
        }
        Ok(Self {
            n,
            entries,
            diag_penalty,
        })
    }

    pub fn n_cities(&self) -> usize {
        self.n
    }

    pub fn diag_penalty(&self) -> f64 {
        self.diag_penalty
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.n).map(<[f64]>::to_vec).collect()
    }
}

/// A set of cities as a bitmask over 0-based indices.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CitySubset(u64);

impl CitySubset {
    pub fn from_bits(bits: u64) -> Self {
        Self(bits)
    }

    /// From 0-based city indices.
    pub fn from_indices(indices: impl IntoIterator<Item = usize>) -> Self {
        Self(indices.into_iter().fold(0, |m, k| m | (1u64 << k)))
    }

    /// From 1-based city labels.
    pub fn from_cities(cities: &[usize]) -> Result<Self> {
        if let Some(&c) = cities.iter().find(|&&c| c == 0 || c > MAX_CITIES) {
            return Err(Error::InvalidArgument(format!("city {c} in subset")));
        }
        Ok(Self::from_indices(cities.iter().map(|c| c - 1)))
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, k: usize) -> bool {
        k < 64 && self.0 >> k & 1 == 1
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// 0-based members in ascending order.
    pub fn indices(self) -> Vec<usize> {
        (0..64).filter(|&k| self.contains(k)).collect()
    }

    /// 1-based members in ascending order.
    pub fn cities(self) -> Vec<usize> {
        self.indices().into_iter().map(|k| k + 1).collect()
    }

    fn all(n: usize) -> u64 {
        if n == 64 {
            u64::MAX
        } else {
            (1u64 << n) - 1
        }
    }

    pub fn complement(self, n: usize) -> Self {
        Self(!self.0 & Self::all(n))
    }

    /// The member of `{S, [N]∖S}` containing city 1.
    ///
    /// For a permutation matrix the mass leaving `S` equals the mass entering
    /// it, so `S` and its complement express the same constraint.
    pub fn canonical(self, n: usize) -> Self {
        if self.contains(0) {
            self
        } else {
            self.complement(n)
        }
    }

    fn check(self, n: usize) -> Result<()> {
        if self.is_empty() || self.0 & !Self::all(n) != 0 || self.0 == Self::all(n) {
            return Err(Error::InvalidArgument(format!(
                "subset {self} is not a proper non-empty subset of cities 1..={n}"
            )));
        }
        Ok(())
    }
}

impl fmt::Debug for CitySubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for CitySubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cities: Vec<String> = self.cities().iter().map(ToString::to_string).collect();
        write!(f, "{{{}}}", cities.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubtourMode {
    Full,
    Lazy,
    Off,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostConfig {
    pub a_sub: f64,
    pub mode: SubtourMode,
    /// Active subsets for lazy mode; ignored otherwise.
    pub active: Vec<CitySubset>,
}

impl CostConfig {
    pub fn full(a_sub: f64) -> Self {
        Self {
            a_sub,
            mode: SubtourMode::Full,
            active: Vec::new(),
        }
    }

    pub fn lazy(a_sub: f64, active: Vec<CitySubset>) -> Self {
        Self {
            a_sub,
            mode: SubtourMode::Lazy,
            active,
        }
    }

    pub fn off() -> Self {
        Self {
            a_sub: 0.0,
            mode: SubtourMode::Off,
            active: Vec::new(),
        }
    }
}

impl Default for CostConfig {
    fn default() -> Self {
        Self::lazy(DEFAULT_A_SUB, Vec::new())
    }
}

/// Distance matrix zero-padded to the `2ⁿ × 2ⁿ` register basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedProblem {
    dim: usize,
    n_cities: usize,
    distances: Vec<f64>,
}

impl PaddedProblem {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_cities(&self) -> usize {
        self.n_cities
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.distances[i * self.dim + j]
    }

    /// Spectator indices `N..2ⁿ` (0-based).
    pub fn spectators(&self) -> std::ops::Range<usize> {
        self.n_cities..self.dim
    }

    /// Every proper non-empty subset of the cities, in mask order.
    pub fn full_subsets(&self) -> impl Iterator<Item = CitySubset> {
        (1..CitySubset::all(self.n_cities)).map(CitySubset)
    }
}

pub fn pad_problem(d: &DistanceMatrix) -> PaddedProblem {
    let n = d.n_cities();
    let dim = n.next_power_of_two();
    let mut distances = vec![0.0; dim * dim];
    for i in 0..n {
        for j in 0..n {
            distances[i * dim + j] = d.get(i, j);
        }
    }
    PaddedProblem {
        dim,
        n_cities: n,
        distances,
    }
}

/// `Σ_ij D_ij X_ij`.
pub fn route_length_term(padded: &PaddedProblem, x: &CorrelationMatrix) -> Result<f64> {
    if x.dim() != padded.dim {
        return Err(Error::Dimension(format!(
            "readout is {0}x{0}, problem is {1}x{1}",
            x.dim(),
            padded.dim
        )));
    }
    Ok(padded.distances.iter().zip(x.entries()).map(|(d, v)| d * v).sum())
}

/// Mass of `X` leaving `S` towards the other cities.
fn crossing(x: &CorrelationMatrix, s: CitySubset, n: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..n {
        if !s.contains(i) {
            continue;
        }
        for j in 0..n {
            if !s.contains(j) {
                acc += x.get(i, j);
            }
        }
    }
    acc
}

/// The subtour sum (positive; [`total_cost`] subtracts `A_sub` times it).
pub fn subtour_term(x: &CorrelationMatrix, config: &CostConfig, n: usize) -> Result<f64> {
    if n > x.dim() {
        return Err(Error::Dimension(format!("{n} cities but readout is {0}x{0}", x.dim())));
    }
    match config.mode {
        SubtourMode::Off => Ok(0.0),
        SubtourMode::Full => {
            if n > FULL_MODE_MAX_CITIES {
                return Err(Error::Capacity(format!(
                    "full subtour enumeration is limited to {FULL_MODE_MAX_CITIES} cities, got {n}"
                )));
            }
            Ok((1..CitySubset::all(n))
                .map(|bits| crossing(x, CitySubset(bits), n))
                .sum())
        }
        SubtourMode::Lazy => {
            let mut acc = 0.0;
            for &s in &config.active {
                s.check(n)?;
                acc += crossing(x, s, n);
            }
            Ok(acc)
        }
    }
}

/// `route_length_term − a_sub · subtour_term`.
pub fn total_cost(padded: &PaddedProblem, x: &CorrelationMatrix, config: &CostConfig) -> Result<f64> {
    let length = route_length_term(padded, x)?;
    if config.mode == SubtourMode::Off {
        return Ok(length);
    }
    Ok(length - config.a_sub * subtour_term(x, config, padded.n_cities)?)
}

/// Vertex sets of every cycle shorter than `N`; empty iff `x` is a tour.
pub fn detect_violated_subsets(x: &RoutePermutation) -> Vec<CitySubset> {
    let cycles = x.cycles();
    if cycles.len() == 1 {
        return Vec::new();
    }
    cycles.into_iter().map(CitySubset::from_indices).collect()
}
