//! Exact classical machinery: tour solvers, route/matrix conversion,
//! assignment-based rounding and Birkhoff–von Neumann peeling.

use itertools::Itertools;

use crate::cost::DistanceMatrix;
use crate::error::{Error, Result};
use crate::measurement::{assert_doubly_stochastic, CorrelationMatrix};

/// Largest instance the exhaustive solver accepts.
pub const BRUTE_FORCE_MAX_CITIES: usize = 11;
/// Largest instance the Held–Karp solver accepts.
pub const HELD_KARP_MAX_CITIES: usize = 20;

/// A permutation `σ` of `{0..n}`; `σ(k)` is the city visited after city `k`.
///
/// Labels are 0-based internally. The `*_route` helpers speak the 1-based
/// city sequences used at the edges of the program.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RoutePermutation {
    sigma: Vec<usize>,
}

impl RoutePermutation {
    pub fn from_successors(sigma: Vec<usize>) -> Result<Self> {
        let n = sigma.len();
        let mut seen = vec![false; n];
        for &s in &sigma {
            if s >= n || std::mem::replace(&mut seen[s], true) {
                return Err(Error::InvalidArgument(format!("{sigma:?} is not a permutation")));
            }
        }
        Ok(Self { sigma })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            sigma: (0..n).collect(),
        }
    }

    /// Builds the permutation of a closed route given as a 1-based city
    /// sequence, e.g. `[1, 3, 2, 4]` for 1→3→2→4→1. A trailing repeat of the
    /// first city is accepted.
    pub fn from_route(sequence: &[usize]) -> Result<Self> {
        let seq = match sequence {
            [first, .., last] if sequence.len() > 1 && first == last => &sequence[..sequence.len() - 1],
            _ => sequence,
        };
        let n = seq.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty route".into()));
        }
        let mut seen = vec![false; n];
        for &c in seq {
            if c == 0 || c > n {
                return Err(Error::InvalidArgument(format!("city {c} outside 1..={n}")));
            }
            if std::mem::replace(&mut seen[c - 1], true) {
                return Err(Error::InvalidArgument(format!("city {c} visited twice")));
            }
        }
        let mut sigma = vec![0; n];
        for k in 0..n {
            sigma[seq[k] - 1] = seq[(k + 1) % n] - 1;
        }
        Ok(Self { sigma })
    }

    /// Reads a 0/1 permutation matrix given row-major.
    pub fn from_matrix(n: usize, x: &[f64]) -> Result<Self> {
        if x.len() != n * n {
            return Err(Error::Dimension(format!("{} entries for a {n}x{n} matrix", x.len())));
        }
        let mut sigma = Vec::with_capacity(n);
        for i in 0..n {
            let row = &x[i * n..(i + 1) * n];
            if row.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::InvalidArgument(format!("row {} is not 0/1", i + 1)));
            }
            match row.iter().positions(|&v| v == 1.0).exactly_one() {
                Ok(j) => sigma.push(j),
                Err(_) => return Err(Error::InvalidArgument(format!("row {} needs exactly one 1", i + 1))),
            }
        }
        Self::from_successors(sigma)
    }

    pub fn n_cities(&self) -> usize {
        self.sigma.len()
    }

    pub fn successor(&self, k: usize) -> usize {
        self.sigma[k]
    }

    pub fn successors(&self) -> &[usize] {
        &self.sigma
    }

    /// Row-major 0/1 matrix with `x[k][σ(k)] = 1`.
    pub fn matrix(&self) -> Vec<f64> {
        let n = self.sigma.len();
        let mut x = vec![0.0; n * n];
        for (k, &s) in self.sigma.iter().enumerate() {
            x[k * n + s] = 1.0;
        }
        x
    }

    /// Cycles as sorted vertex lists, ordered by smallest member.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let n = self.sigma.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut k = start;
            while !seen[k] {
                seen[k] = true;
                cycle.push(k);
                k = self.sigma[k];
            }
            cycle.sort_unstable();
            out.push(cycle);
        }
        out
    }

    /// True iff `σ` is one cycle through every city (no fixed points, no subtours).
    pub fn is_valid_tour(&self) -> bool {
        let n = self.sigma.len();
        n >= 2 && self.cycles().len() == 1
    }

    /// 1-based visiting order starting at city 1.
    pub fn to_route(&self) -> Result<Vec<usize>> {
        if !self.is_valid_tour() {
            let parts = self
                .cycles()
                .iter()
                .map(|c| format!("{{{}}}", c.iter().map(|k| k + 1).join(",")))
                .join(" ∪ ");
            return Err(Error::NotATour(parts));
        }
        let mut seq = Vec::with_capacity(self.sigma.len());
        let mut k = 0;
        for _ in 0..self.sigma.len() {
            seq.push(k + 1);
            k = self.sigma[k];
        }
        Ok(seq)
    }

    /// `Σ_k D[k][σ(k)]`.
    pub fn length(&self, d: &DistanceMatrix) -> f64 {
        self.sigma.iter().enumerate().map(|(k, &s)| d.get(k, s)).sum()
    }
}

/// `route_to_matrix`: 1-based closed route to its permutation.
pub fn route_to_matrix(sequence: &[usize]) -> Result<RoutePermutation> {
    RoutePermutation::from_route(sequence)
}

/// `matrix_to_route`: permutation matrix to the 1-based sequence starting at city 1.
pub fn matrix_to_route(n: usize, x: &[f64]) -> Result<Vec<usize>> {
    RoutePermutation::from_matrix(n, x)?.to_route()
}

fn sequence_length(d: &DistanceMatrix, seq: &[usize]) -> f64 {
    let n = seq.len();
    (0..n).map(|k| d.get(seq[k], seq[(k + 1) % n])).sum()
}

/// Exhaustive search over the `(N−1)!` tours that start at city 1.
///
/// Ties go to the lexicographically smallest city sequence.
pub fn brute_force_tsp(d: &DistanceMatrix) -> Result<(RoutePermutation, f64)> {
    let n = d.n_cities();
    if n > BRUTE_FORCE_MAX_CITIES {
        return Err(Error::Capacity(format!(
            "exhaustive search is limited to {BRUTE_FORCE_MAX_CITIES} cities, got {n}"
        )));
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for rest in (1..n).permutations(n - 1) {
        let mut seq = Vec::with_capacity(n);
        seq.push(0);
        seq.extend(rest);
        let len = sequence_length(d, &seq);
        if best.as_ref().is_none_or(|(_, b)| len < *b) {
            best = Some((seq, len));
        }
    }
    let (seq, len) = best.expect("n >= 3 has at least one tour");
    let one_based: Vec<usize> = seq.iter().map(|k| k + 1).collect();
    Ok((RoutePermutation::from_route(&one_based)?, len))
}

/// Optimal tour length by dynamic programming over (visited set, last city).
pub fn held_karp(d: &DistanceMatrix) -> Result<f64> {
    let n = d.n_cities();
    if n > HELD_KARP_MAX_CITIES {
        return Err(Error::Capacity(format!(
            "Held–Karp is limited to {HELD_KARP_MAX_CITIES} cities, got {n}"
        )));
    }
    // City 0 is the fixed start; masks range over cities 1..n (bit k-1 ↔ city k).
    let m = n - 1;
    let full = 1usize << m;
    let mut dp = vec![f64::INFINITY; full * m];
    for k in 0..m {
        dp[(1 << k) * m + k] = d.get(0, k + 1);
    }
    for mask in 1..full {
        for last in 0..m {
            let here = dp[mask * m + last];
            if mask & (1 << last) == 0 || !here.is_finite() {
                continue;
            }
            for next in 0..m {
                if mask & (1 << next) != 0 {
                    continue;
                }
                let slot = &mut dp[(mask | (1 << next)) * m + next];
                let cand = here + d.get(last + 1, next + 1);
                if cand < *slot {
                    *slot = cand;
                }
            }
        }
    }
    Ok((0..m)
        .map(|last| dp[(full - 1) * m + last] + d.get(last + 1, 0))
        .fold(f64::INFINITY, f64::min))
}

/// Minimum-cost perfect assignment on a square cost matrix, O(n³).
///
/// Returns `assignment[row] = column`.
fn hungarian(n: usize, cost: &[f64]) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Best achievable `Σ w[i][σ(i)]` over permutations extending `prefix`.
fn best_completion(n: usize, weights: &[f64], prefix: &[usize]) -> f64 {
    let fixed: f64 = prefix.iter().enumerate().map(|(i, &j)| weights[i * n + j]).sum();
    let rows: Vec<usize> = (prefix.len()..n).collect();
    let cols: Vec<usize> = (0..n).filter(|j| !prefix.contains(j)).collect();
    let m = rows.len();
    let cost: Vec<f64> = rows
        .iter()
        .flat_map(|&i| cols.iter().map(move |&j| -weights[i * n + j]))
        .collect();
    let assign = hungarian(m, &cost);
    fixed
        + assign
            .iter()
            .enumerate()
            .map(|(r, &c)| weights[rows[r] * n + cols[c]])
            .sum::<f64>()
}

/// Permutation maximizing `Σ w[i][σ(i)]`; among optimal ones, the
/// lexicographically smallest successor vector.
fn max_weight_permutation(n: usize, weights: &[f64]) -> Vec<usize> {
    let optimum = best_completion(n, weights, &[]);
    let scale = weights.iter().fold(1.0f64, |m, w| m.max(w.abs()));
    let tol = 1e-12 * scale * n as f64;
    let mut prefix: Vec<usize> = Vec::with_capacity(n);
    for _ in 0..n {
        let free: Vec<usize> = (0..n).filter(|j| !prefix.contains(j)).collect();
        let next = free
            .into_iter()
            .find(|&j| {
                prefix.push(j);
                let ok = best_completion(n, weights, &prefix) >= optimum - tol;
                prefix.pop();
                ok
            })
            .expect("some column keeps the optimum reachable");
        prefix.push(next);
    }
    prefix
}

/// Rounds `X` to the permutation maximizing `Tr[X·xᵀ]` (ties: lexicographic).
pub fn nearest_permutation(x: &CorrelationMatrix) -> RoutePermutation {
    RoutePermutation {
        sigma: max_weight_permutation(x.dim(), x.entries()),
    }
}

/// Rounds the leading `n × n` city block of `X`, ignoring spectator indices.
pub fn nearest_city_permutation(x: &CorrelationMatrix, n: usize) -> RoutePermutation {
    assert!(n <= x.dim());
    let block: Vec<f64> = (0..n).flat_map(|i| (0..n).map(move |j| x.get(i, j))).collect();
    RoutePermutation {
        sigma: max_weight_permutation(n, &block),
    }
}

/// `X ≈ Σ λ_k x_k` with `λ_k ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BirkhoffDecomposition {
    pub terms: Vec<(f64, RoutePermutation)>,
    /// `max |X − Σ λ_k x_k|`.
    pub residual: f64,
}

impl BirkhoffDecomposition {
    pub fn weight_sum(&self) -> f64 {
        self.terms.iter().map(|(w, _)| w).sum()
    }

    pub fn reconstruct(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim * dim];
        for (w, p) in &self.terms {
            for (k, &s) in p.successors().iter().enumerate() {
                out[k * dim + s] += w;
            }
        }
        out
    }
}

const SUPPORT_EPS: f64 = 1e-13;
const PEEL_STOP: f64 = 1e-12;

/// Greedy Birkhoff peeling: repeatedly pick a perfect matching inside the
/// positive support, remove the largest multiple of it that keeps the
/// remainder non-negative, and stop once the remaining mass vanishes.
pub fn birkhoff_decompose(x: &CorrelationMatrix) -> Result<BirkhoffDecomposition> {
    let report = assert_doubly_stochastic(x, 1e-6);
    if !report.passed {
        return Err(Error::InvalidArgument(format!(
            "matrix is not doubly stochastic (row deviation {:e}, column deviation {:e})",
            report.max_row_deviation, report.max_col_deviation
        )));
    }
    let n = x.dim();
    let mut rest = x.entries().to_vec();
    let mut terms = Vec::new();
    let max_terms = (n - 1) * (n - 1) + 1;
    while terms.len() < max_terms {
        let mass = (0..n)
            .map(|i| rest[i * n..(i + 1) * n].iter().sum::<f64>())
            .fold(0.0, f64::max);
        if mass < PEEL_STOP {
            break;
        }
        let support: Vec<f64> = rest.iter().map(|&v| if v > SUPPORT_EPS { 1.0 } else { 0.0 }).collect();
        let sigma = max_weight_permutation(n, &support);
        if sigma.iter().enumerate().any(|(i, &j)| support[i * n + j] == 0.0) {
            break;
        }
        let lambda = sigma
            .iter()
            .enumerate()
            .map(|(i, &j)| rest[i * n + j])
            .fold(f64::INFINITY, f64::min);
        for (i, &j) in sigma.iter().enumerate() {
            let v = &mut rest[i * n + j];
            *v -= lambda;
            if *v <= SUPPORT_EPS {
                *v = 0.0;
            }
        }
        terms.push((lambda, RoutePermutation { sigma }));
    }
    let mut dec = BirkhoffDecomposition { terms, residual: 0.0 };
    dec.residual = dec
        .reconstruct(n)
        .iter()
        .zip(x.entries())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(dec)
}
