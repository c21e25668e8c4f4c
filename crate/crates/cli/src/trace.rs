//! JSON-lines trace records.

use std::io::Write;

use serde::Serialize;
use tspvqa::{CitySubset, RoutePermutation, RunTrace};

pub const TRACE_FORMAT: &str = "tspvqa-trace/1";

/// Settings echoed into the header and the final record.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub command: &'static str,
    pub protocol: tspvqa::Protocol,
    /// `null` in exact mode.
    pub shots: Option<u64>,
    pub seed: u64,
    pub learning_rate: f64,
    pub fd_step: f64,
    pub max_iters: usize,
    pub starts: usize,
    pub cost_tol: f64,
    pub patience: usize,
    pub max_rounds: usize,
    pub a_sub: f64,
    pub diag_penalty: f64,
    pub subtour: &'static str,
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "lowercase")]
enum Record<'a> {
    Header {
        format: &'static str,
        n: usize,
        config: &'a ConfigEcho,
    },
    Iteration {
        /// Counts across rounds, so it increases strictly.
        iteration: usize,
        round: usize,
        round_iteration: usize,
        active: Vec<Vec<usize>>,
        cost: f64,
        grad_norm: f64,
        alpha: &'a [f64],
    },
    Final {
        dim: usize,
        #[serde(rename = "X")]
        x: &'a [f64],
        /// 1-based city sequence starting at city 1; `null` for a subtour.
        route: Option<Vec<usize>>,
        cycles: Vec<Vec<usize>>,
        valid_tour: bool,
        length: f64,
        overlap: f64,
        converged: bool,
        start: usize,
        rounds: usize,
        seed: u64,
        config: &'a ConfigEcho,
    },
}

fn subsets(active: &[CitySubset]) -> Vec<Vec<usize>> {
    active.iter().map(|s| s.cities()).collect()
}

fn one_based_cycles(route: &RoutePermutation) -> Vec<Vec<usize>> {
    route
        .cycles()
        .into_iter()
        .map(|c| c.into_iter().map(|k| k + 1).collect())
        .collect()
}

fn line<W: Write>(out: &mut W, record: &Record) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, record)?;
    out.write_all(b"\n")
}

/// Header, every iteration of the chosen start, then the final record.
pub fn write_trace<W: Write>(out: &mut W, n: usize, config: &ConfigEcho, run: &RunTrace) -> std::io::Result<()> {
    line(
        out,
        &Record::Header {
            format: TRACE_FORMAT,
            n,
            config,
        },
    )?;
    let mut iteration = 0;
    for (round, rd) in run.rounds.iter().enumerate() {
        for rec in &rd.records {
            line(
                out,
                &Record::Iteration {
                    iteration,
                    round,
                    round_iteration: rec.iteration,
                    active: subsets(&rd.active),
                    cost: rec.cost,
                    grad_norm: rec.grad_norm,
                    alpha: &rec.alpha,
                },
            )?;
            iteration += 1;
        }
    }
    let x = run.final_x();
    line(
        out,
        &Record::Final {
            dim: x.dim(),
            x: x.entries(),
            route: run.route.to_route().ok(),
            cycles: one_based_cycles(&run.route),
            valid_tour: run.is_valid_tour(),
            length: run.route_length,
            overlap: run.overlap,
            converged: run.converged,
            start: run.start,
            rounds: run.rounds.len(),
            seed: run.seed,
            config,
        },
    )?;
    out.flush()
}
