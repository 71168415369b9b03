//! Seeded Monte Carlo ensembles.
//!
//! Runs are simulated in parallel in fixed-size batches and folded into the
//! ensemble statistics strictly in run-index order, so results do not depend
//! on the number of worker threads.

use rayon::prelude::*;

use crate::analysis::tracking_error;
use crate::controller::Mode;
use crate::error::{Error, Result};
use crate::rng::RunStreams;
use crate::scenario::Scenario;

const BATCH: usize = 64;

/// Everything recorded for one run, indexed `[k][agent]` for `k = 0..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run: usize,
    pub final_stage: Vec<Vec<f64>>,
    pub r_true: Vec<Vec<f64>>,
    pub r_hat: Vec<Vec<f64>>,
    /// Recorded stages only, `[k][agent][stage]`; present for the first
    /// `trajectory_runs` runs.
    pub states: Option<Vec<Vec<Vec<f64>>>>,
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    pub count: usize,
    pub mean: f64,
    pub m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Sample variance; NaN with fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            f64::NAN
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub runs: usize,
    pub horizon: usize,
    pub mode: Mode,
    /// `[k][agent]` ensemble means.
    pub mean_final_stage: Vec<Vec<f64>>,
    pub mean_r_true: Vec<Vec<f64>>,
    pub mean_r_hat: Vec<Vec<f64>>,
    /// Tracking error of the ensemble-mean final stage, per step.
    pub error_norm: Vec<f64>,
    /// Ensemble mean of `r_bar(k) - x_i^n(k)`, `[k][agent]`.
    pub mean_agent_error: Vec<Vec<f64>>,
    /// `sqrt(sum_i var_i / M)` of the per-run agent errors; NaN below two runs.
    pub stderr: Vec<f64>,
    /// Stages stored in `trajectories`, 0-indexed.
    pub recorded_stages: Vec<usize>,
    pub trajectories: Vec<RunRecord>,
}

impl Ensemble {
    /// Ensemble mean of `r_hat - r` at step `k`, per agent.
    pub fn estimate_bias(&self, k: usize) -> Vec<f64> {
        self.mean_r_hat[k]
            .iter()
            .zip(&self.mean_r_true[k])
            .map(|(a, b)| a - b)
            .collect()
    }

    /// Mean tracking error over the steps `from..=horizon`.
    pub fn tail_mean_error(&self, from: usize) -> f64 {
        let tail = &self.error_norm[from.min(self.horizon)..];
        tail.iter().sum::<f64>() / tail.len() as f64
    }
}

pub fn simulate_run(scenario: &Scenario, run: usize, mode: Mode) -> Result<RunRecord> {
    let run_id = u32::try_from(run).map_err(|_| Error::Usage(format!("run index {run} too large")))?;
    let mut world = scenario.world(run_id)?;
    let mut streams = RunStreams::new(scenario.seed, run_id, &scenario.graph)?;
    let keep_states = run < scenario.trajectory_runs;
    let stages = scenario.recorded_stages();
    let steps = scenario.horizon + 1;
    let mut record = RunRecord {
        run,
        final_stage: Vec::with_capacity(steps),
        r_true: Vec::with_capacity(steps),
        r_hat: Vec::with_capacity(steps),
        states: keep_states.then(|| Vec::with_capacity(steps)),
    };
    for k in 0..steps {
        if k > 0 {
            world.step(mode, &mut streams)?;
        }
        record.final_stage.push(world.final_stage());
        let refs = world.references();
        record.r_true.push(refs.iter().map(|r| r.r).collect());
        record.r_hat.push(refs.iter().map(|r| r.r_hat).collect());
        if let Some(states) = record.states.as_mut() {
            states.push(
                world
                    .agents()
                    .iter()
                    .map(|a| stages.iter().map(|&p| a.x[p]).collect())
                    .collect(),
            );
        }
    }
    Ok(record)
}

/// Ensemble over `scenario.runs` runs in `scenario.mode`, using rayon's
/// global pool.
pub fn run_monte_carlo(scenario: &Scenario) -> Result<Ensemble> {
    run_ensemble(scenario, scenario.mode)
}

pub fn run_ensemble(scenario: &Scenario, mode: Mode) -> Result<Ensemble> {
    let n = scenario.node_count();
    let steps = scenario.horizon + 1;
    let mut final_stage = vec![vec![Welford::default(); n]; steps];
    let mut r_true = vec![vec![Welford::default(); n]; steps];
    let mut r_hat = vec![vec![Welford::default(); n]; steps];
    let mut agent_error = vec![vec![Welford::default(); n]; steps];
    let mut trajectories = Vec::new();

    for start in (0..scenario.runs).step_by(BATCH) {
        let end = (start + BATCH).min(scenario.runs);
        let batch: Vec<RunRecord> = (start..end)
            .into_par_iter()
            .map(|run| simulate_run(scenario, run, mode))
            .collect::<Result<_>>()?;
        for record in batch {
            for k in 0..steps {
                let r_bar = record.r_true[k].iter().sum::<f64>() / n as f64;
                for i in 0..n {
                    final_stage[k][i].push(record.final_stage[k][i]);
                    r_true[k][i].push(record.r_true[k][i]);
                    r_hat[k][i].push(record.r_hat[k][i]);
                    agent_error[k][i].push(r_bar - record.final_stage[k][i]);
                }
            }
            if record.states.is_some() {
                trajectories.push(record);
            }
        }
    }

    let means = |acc: &[Vec<Welford>]| -> Vec<Vec<f64>> {
        acc.iter().map(|row| row.iter().map(|w| w.mean).collect()).collect()
    };
    let mean_final_stage = means(&final_stage);
    let mean_r_true = means(&r_true);
    let error_norm = if scenario.runs == 0 {
        Vec::new()
    } else {
        tracking_error(&mean_final_stage, &mean_r_true)?.norm
    };
    let stderr = agent_error
        .iter()
        .map(|row| {
            let total: f64 = row.iter().map(Welford::variance).sum();
            (total / scenario.runs as f64).sqrt()
        })
        .collect();

    Ok(Ensemble {
        runs: scenario.runs,
        horizon: scenario.horizon,
        mode,
        mean_r_hat: means(&r_hat),
        mean_agent_error: means(&agent_error),
        mean_final_stage,
        mean_r_true,
        error_norm,
        stderr,
        recorded_stages: scenario.recorded_stages(),
        trajectories,
    })
}

/// [`run_ensemble`] on a dedicated pool with `threads` workers.
pub fn run_ensemble_with_threads(scenario: &Scenario, mode: Mode, threads: usize) -> Result<Ensemble> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Usage(format!("cannot build thread pool: {e}")))?;
    pool.install(|| run_ensemble(scenario, mode))
}
