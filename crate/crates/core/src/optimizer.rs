//! Gradient-descent outer loop with lazy subtour activation and multi-start.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{
    detect_violated_subsets, pad_problem, total_cost, CitySubset, CostConfig, DistanceMatrix, PaddedProblem,
    SubtourMode, DEFAULT_A_SUB,
};
use crate::error::{Error, Result};
use crate::fourcity::{emulate_16_projectors, x_4_analytic, FourCityParams};
use crate::measurement::{correlation_exact, counts_to_correlation, overlap, CorrelationMatrix, ReadoutMode};
use crate::oracle::{nearest_city_permutation, RoutePermutation};
use crate::rng::{child_seed, stream_rng};
use crate::state::{build_trial_state, VariationalParams};

/// How `X` is read out at each cost evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    /// Full detection behind a pair of universal meshes.
    Universal,
    /// Sixteen triangular-mesh projector settings (four cities only).
    Projectors,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub fd_step: f64,
    pub max_iters: usize,
    /// Plateau threshold on `|ΔC|`; `None` picks the default for the readout.
    pub cost_tol: Option<f64>,
    pub patience: usize,
    pub n_starts: usize,
    pub readout: ReadoutMode,
    pub protocol: Protocol,
    pub seed: u64,
    pub a_sub: f64,
    pub subtour: SubtourMode,
    /// Subsets active from the first round (lazy mode).
    pub initial_active: Vec<CitySubset>,
    /// Upper bound on descents per start in lazy mode.
    pub max_rounds: usize,
}

pub const DEFAULT_LEARNING_RATE: f64 = 0.002;
pub const DEFAULT_FD_STEP: f64 = 0.05;
pub const DEFAULT_MAX_ITERS: usize = 500;
pub const DEFAULT_COST_TOL_EXACT: f64 = 1e-4;
pub const DEFAULT_COST_TOL_SAMPLED: f64 = 1.0;
pub const DEFAULT_PATIENCE: usize = 10;
pub const DEFAULT_STARTS: usize = 5;
pub const DEFAULT_MAX_ROUNDS: usize = 8;

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: DEFAULT_LEARNING_RATE,
            fd_step: DEFAULT_FD_STEP,
            max_iters: DEFAULT_MAX_ITERS,
            cost_tol: None,
            patience: DEFAULT_PATIENCE,
            n_starts: DEFAULT_STARTS,
            readout: ReadoutMode::Exact,
            protocol: Protocol::Universal,
            seed: 0,
            a_sub: DEFAULT_A_SUB,
            subtour: SubtourMode::Lazy,
            initial_active: Vec::new(),
            max_rounds: DEFAULT_MAX_ROUNDS,
        }
    }
}

impl OptimizerConfig {
    pub fn effective_cost_tol(&self) -> f64 {
        self.cost_tol.unwrap_or(match self.readout {
            ReadoutMode::Exact => DEFAULT_COST_TOL_EXACT,
            ReadoutMode::Sampled { .. } => DEFAULT_COST_TOL_SAMPLED,
        })
    }

    fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.learning_rate) {
            return Err(Error::InvalidArgument(format!("learning rate {}", self.learning_rate)));
        }
        if !positive(self.fd_step) {
            return Err(Error::InvalidArgument(format!(
                "finite-difference step {}",
                self.fd_step
            )));
        }
        if !(self.effective_cost_tol().is_finite() && self.effective_cost_tol() >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cost tolerance {}",
                self.effective_cost_tol()
            )));
        }
        if self.patience == 0 || self.n_starts == 0 || self.max_rounds == 0 {
            return Err(Error::InvalidArgument(
                "patience, starts and rounds must be at least 1".into(),
            ));
        }
        if self.readout == (ReadoutMode::Sampled { shots: 0 }) {
            return Err(Error::InvalidArgument("shots must be at least 1".into()));
        }
        if !(self.a_sub.is_finite() && self.a_sub >= 0.0) {
            return Err(Error::InvalidArgument(format!("A_sub {}", self.a_sub)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub alpha: Vec<f64>,
    pub cost: f64,
    pub grad_norm: f64,
}

/// One descent from a fresh initial point under a fixed active set.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace {
    pub active: Vec<CitySubset>,
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    pub final_x: CorrelationMatrix,
    pub route: RoutePermutation,
    /// Cycles of `route` shorter than `N`.
    pub violated: Vec<CitySubset>,
}

impl RoundTrace {
    pub fn final_alpha(&self) -> &[f64] {
        &self.records.last().expect("at least the initial point").alpha
    }

    pub fn final_cost(&self) -> f64 {
        self.records.last().expect("at least the initial point").cost
    }
}

/// Result of one start, or the best of several.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub start: usize,
    pub seed: u64,
    pub rounds: Vec<RoundTrace>,
    /// Index into `rounds` of the reported answer.
    pub chosen: usize,
    pub route: RoutePermutation,
    pub route_length: f64,
    pub overlap: f64,
    pub converged: bool,
}

impl RunTrace {
    pub fn final_round(&self) -> &RoundTrace {
        &self.rounds[self.chosen]
    }

    pub fn final_x(&self) -> &CorrelationMatrix {
        &self.final_round().final_x
    }

    pub fn is_valid_tour(&self) -> bool {
        self.route.is_valid_tour()
    }

    /// Active set of every round, in order.
    pub fn active_history(&self) -> Vec<Vec<CitySubset>> {
        self.rounds.iter().map(|r| r.active.clone()).collect()
    }

    pub fn total_iterations(&self) -> usize {
        self.rounds.iter().map(|r| r.records.len()).sum()
    }
}

/// Angles i.i.d. uniform on `[0, π)`.
pub fn random_init(n_cities: usize, seed: u64) -> Result<VariationalParams> {
    let len = VariationalParams::expected_len(n_cities)?;
    let mut rng = stream_rng(seed, 0);
    let angles = (0..len).map(|_| rng.random_range(0.0..std::f64::consts::PI)).collect();
    VariationalParams::new(n_cities, angles)
}

/// Central differences `(C(α + h e_k) − C(α − h e_k)) / 2h`.
pub fn finite_diff_gradient<F>(cost_at: F, alpha: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidArgument(format!("finite-difference step {h}")));
    }
    let mut probe = alpha.to_vec();
    let mut grad = Vec::with_capacity(alpha.len());
    for k in 0..alpha.len() {
        probe[k] = alpha[k] + h;
        let plus = cost_at(&probe)?;
        probe[k] = alpha[k] - h;
        let minus = cost_at(&probe)?;
        probe[k] = alpha[k];
        let g = (plus - minus) / (2.0 * h);
        if !g.is_finite() {
            return Err(Error::NonFinite(format!("gradient component {k}")));
        }
        grad.push(g);
    }
    Ok(grad)
}

/// Cost `C(α)` for one problem under one readout.
#[derive(Debug, Clone)]
pub struct Objective {
    padded: PaddedProblem,
    n_cities: usize,
    readout: ReadoutMode,
    protocol: Protocol,
    cost: CostConfig,
}

impl Objective {
    pub fn new(problem: &DistanceMatrix, readout: ReadoutMode, protocol: Protocol, cost: CostConfig) -> Result<Self> {
        let n = problem.n_cities();
        VariationalParams::expected_len(n)?;
        if protocol == Protocol::Projectors && n != 4 {
            return Err(Error::InvalidArgument(format!(
                "the projector protocol needs exactly 4 cities, got {n}"
            )));
        }
        Ok(Self {
            padded: pad_problem(problem),
            n_cities: n,
            readout,
            protocol,
            cost,
        })
    }

    pub fn with_cost(&self, cost: CostConfig) -> Self {
        Self { cost, ..self.clone() }
    }

    pub fn cost_config(&self) -> &CostConfig {
        &self.cost
    }

    pub fn n_cities(&self) -> usize {
        self.n_cities
    }

    /// `X(α)`; `seed` drives shot sampling and is ignored in exact mode.
    pub fn readout(&self, alpha: &[f64], seed: u64) -> Result<CorrelationMatrix> {
        if self.protocol == Protocol::Projectors {
            let p = FourCityParams::from_slice(alpha)?;
            return Ok(emulate_16_projectors(&p, self.readout, seed)?.0);
        }
        let exact = if self.n_cities == 4 {
            x_4_analytic(&FourCityParams::from_slice(alpha)?)
        } else {
            correlation_exact(&build_trial_state(&VariationalParams::new(
                self.n_cities,
                alpha.to_vec(),
            )?)?)
        };
        match self.readout {
            ReadoutMode::Exact => Ok(exact),
            ReadoutMode::Sampled { shots } => {
                let dim = exact.dim();
                let probs: Vec<f64> = exact.entries().iter().map(|x| x / dim as f64).collect();
                Ok(counts_to_correlation(dim, &probs, shots, seed)?.0)
            }
        }
    }

    pub fn cost(&self, alpha: &[f64], seed: u64) -> Result<f64> {
        let c = total_cost(&self.padded, &self.readout(alpha, seed)?, &self.cost)?;
        if !c.is_finite() {
            return Err(Error::NonFinite("cost".into()));
        }
        Ok(c)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|g| g * g).sum::<f64>().sqrt()
}

/// Plain gradient descent from `init` until the cost plateaus or the
/// iteration budget runs out. Each record carries the gradient at its point.
pub fn descend(
    objective: &Objective,
    config: &OptimizerConfig,
    init: Vec<f64>,
    seed: u64,
) -> Result<(Vec<IterationRecord>, bool, CorrelationMatrix)> {
    let tol = config.effective_cost_tol();
    let mut alpha = init;
    let mut records = Vec::new();
    let mut prev_cost: Option<f64> = None;
    let mut stall = 0;
    let mut converged = false;
    for iteration in 0..=config.max_iters {
        // One sampling seed per iteration, shared by every probe.
        let it_seed = child_seed(seed, &[iteration as u64]);
        let cost = objective.cost(&alpha, it_seed)?;
        if let Some(prev) = prev_cost {
            stall = if (cost - prev).abs() < tol { stall + 1 } else { 0 };
            converged = stall >= config.patience;
        }
        let grad = finite_diff_gradient(|a| objective.cost(a, it_seed), &alpha, config.fd_step)?;
        records.push(IterationRecord {
            iteration,
            alpha: alpha.clone(),
            cost,
            grad_norm: norm(&grad),
        });
        if converged || iteration == config.max_iters {
            let x = objective.readout(&alpha, it_seed)?;
            return Ok((records, converged, x));
        }
        for (a, g) in alpha.iter_mut().zip(&grad) {
            *a -= config.learning_rate * g;
        }
        prev_cost = Some(cost);
    }
    unreachable!("loop returns at iteration == max_iters")
}

/// A rounded candidate: its route, the route's length and the overlap of the
/// readout with it.
struct Candidate<'a> {
    route: &'a RoutePermutation,
    length: f64,
    converged: bool,
    overlap: f64,
}

impl<'a> Candidate<'a> {
    fn of_run(r: &'a RunTrace) -> Self {
        Self {
            route: &r.route,
            length: r.route_length,
            converged: r.converged,
            overlap: r.overlap,
        }
    }
}

/// Preference: valid tours, then shorter routes, then converged descents,
/// then readouts closer to their route. Costs are not compared since rounds differ in active sets.
fn better(a: &Candidate, b: &Candidate) -> bool {
    use std::cmp::Ordering::*;
    match a.route.is_valid_tour().cmp(&b.route.is_valid_tour()) {
        Greater => return true,
        Less => return false,
        Equal => {}
    }
    match a.length.total_cmp(&b.length) {
        Less => true,
        Greater => false,
        Equal if a.converged != b.converged => a.converged,
        Equal => a.overlap > b.overlap,
    }
}

/// One start: descend, round, and in lazy mode activate the subsets the
/// rounded route violates and descend again from a fresh point.
pub fn run_start(problem: &DistanceMatrix, config: &OptimizerConfig, start: usize) -> Result<RunTrace> {
    config.validate()?;
    let n = problem.n_cities();
    let cost = match config.subtour {
        SubtourMode::Full => CostConfig::full(config.a_sub),
        SubtourMode::Lazy => CostConfig::lazy(config.a_sub, config.initial_active.clone()),
        SubtourMode::Off => CostConfig::off(),
    };
    let mut objective = Objective::new(problem, config.readout, config.protocol, cost)?;
    let start_seed = child_seed(config.seed, &[start as u64]);
    let rounds_allowed = if config.subtour == SubtourMode::Lazy {
        config.max_rounds
    } else {
        1
    };

    let mut rounds: Vec<RoundTrace> = Vec::new();
    for round in 0..rounds_allowed {
        let round_seed = child_seed(start_seed, &[round as u64]);
        let init = random_init(n, child_seed(round_seed, &[0]))?.into_angles();
        let (records, converged, final_x) = descend(&objective, config, init, child_seed(round_seed, &[1]))?;
        let route = nearest_city_permutation(&final_x, n);
        let violated = detect_violated_subsets(&route);
        rounds.push(RoundTrace {
            active: objective.cost_config().active.clone(),
            records,
            converged,
            final_x,
            route,
            violated: violated.clone(),
        });
        if violated.is_empty() || config.subtour != SubtourMode::Lazy {
            break;
        }
        let mut active = objective.cost_config().active.clone();
        let before = active.len();
        for s in violated {
            let s = s.canonical(n);
            if !active.contains(&s) {
                active.push(s);
            }
        }
        if active.len() == before {
            break;
        }
        objective = objective.with_cost(CostConfig::lazy(config.a_sub, active));
    }

    let overlaps = rounds
        .iter()
        .map(|r| overlap(&r.final_x, &r.route))
        .collect::<Result<Vec<_>>>()?;
    let candidate = |k: usize| Candidate {
        route: &rounds[k].route,
        length: rounds[k].route.length(problem),
        converged: rounds[k].converged,
        overlap: overlaps[k],
    };
    let mut chosen = 0;
    for k in 1..rounds.len() {
        if better(&candidate(k), &candidate(chosen)) {
            chosen = k;
        }
    }
    let r = &rounds[chosen];
    Ok(RunTrace {
        start,
        seed: start_seed,
        chosen,
        route: r.route.clone(),
        route_length: r.route.length(problem),
        overlap: overlaps[chosen],
        converged: r.converged,
        rounds,
    })
}

/// Runs `n_starts` independent starts in parallel and returns the best one.
///
/// The answer does not depend on thread scheduling: starts are compared in
/// index order and ties keep the lower index.
pub fn optimize(problem: &DistanceMatrix, config: &OptimizerConfig) -> Result<RunTrace> {
    let runs = optimize_all(problem, config)?;
    let mut best = 0;
    for k in 1..runs.len() {
        if better(&Candidate::of_run(&runs[k]), &Candidate::of_run(&runs[best])) {
            best = k;
        }
    }
    Ok(runs.into_iter().nth(best).expect("n_starts >= 1"))
}

/// Every start's trace, in start order.
pub fn optimize_all(problem: &DistanceMatrix, config: &OptimizerConfig) -> Result<Vec<RunTrace>> {
    config.validate()?;
    (0..config.n_starts)
        .into_par_iter()
        .map(|s| run_start(problem, config, s))
        .collect()
}
