//! Multi-stage control law and the closed-loop stochastic stepper.
//!
//! One call to [`World::step`] is one global tick `k`:
//!
//! 1. every predictor consumes the state, input and Kalman estimate from
//!    `tau` ticks ago and is rolled forward to `k`;
//! 2. one Bernoulli draw per undirected edge decides which links deliver;
//! 3. the control law computes `u(k)` from the predicted quantities;
//! 4. the plant integrates it, `x(k + 1) = x(k) + u(k)`, and `u(k)` enters
//!    the input history;
//! 5. references advance to `k + 1` and their filters absorb the new
//!    measurement.
//!
//! The delay sits on the information path: at tick `k` an agent knows its
//! states and Kalman estimate only up to `k - tau`, plus its own inputs up
//! to `k - 1`. The input `u(k)` is therefore a function of data that is
//! `tau` ticks old, and the predictor closes that gap exactly when its
//! filter has locked.
//!
//! Inputs, states and estimates at negative times equal their initial
//! values (inputs are zero), so the same schedule runs from `k = 0`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::{weighted_laplacian, DropModel, Graph, WeightedLaplacian};
use crate::prediction::{DelayLine, PredictorState};
use crate::reference::{advance, ReferenceParams, ReferenceState};
use crate::rng::{RunStreams, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlGains {
    /// Consensus gain.
    pub epsilon: f64,
    /// Tracking gain.
    pub alpha: f64,
    pub n_stages: usize,
    /// Input delay in ticks.
    pub tau: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictorGains {
    pub k_x: f64,
    pub k_r: f64,
}

/// What the control law is fed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Predicted states `x^(k|k-tau)` and predicted Kalman estimates.
    #[default]
    Compensated,
    /// Raw delayed states `x(k - tau)` and raw measurements `z(k) / h`.
    Naive,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "compensated" => Ok(Mode::Compensated),
            "naive" => Ok(Mode::Naive),
            other => Err(Error::Usage(format!(
                "mode must be `compensated` or `naive`, got `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Compensated => "compensated",
            Mode::Naive => "naive",
        })
    }
}

/// Which links delivered during one tick; one flag per edge in
/// `Graph::edges` order. Non-edges never deliver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkRealization {
    pub theta: Vec<bool>,
}

impl LinkRealization {
    pub fn all_up(graph: &Graph) -> Self {
        Self {
            theta: vec![true; graph.edge_count()],
        }
    }

    pub fn all_down(graph: &Graph) -> Self {
        Self {
            theta: vec![false; graph.edge_count()],
        }
    }

    pub fn is_up(&self, graph: &Graph, i: usize, j: usize) -> bool {
        graph.edge_index(i, j).is_some_and(|e| self.theta[e])
    }

    /// Laplacian of the realized graph.
    pub fn laplacian(&self, graph: &Graph) -> WeightedLaplacian {
        let w: Vec<f64> = self.theta.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect();
        weighted_laplacian(graph, &w)
    }
}

/// One independent draw per edge: the link is down with probability `p`.
/// `drop_probs` and `streams` are both in edge order.
pub fn sample_links(drop_probs: &[f64], streams: &mut [Stream]) -> LinkRealization {
    LinkRealization {
        theta: drop_probs
            .iter()
            .zip(streams.iter_mut())
            .map(|(&p, s)| s.random::<f64>() >= p)
            .collect(),
    }
}

/// Per-agent, per-stage control inputs
///
/// ```text
/// u_i^p = -eps * sum_j theta_ij a_ij (x^_i^p - x^_j^p) + alpha (d_i^p - x^_i^p)
/// ```
///
/// with driver `d_i^1 = r^_i` and `d_i^p = x^_i^(p-1)`.
pub fn control_input(
    predicted_states: &[Vec<f64>],
    predicted_refs: &[f64],
    graph: &Graph,
    links: &LinkRealization,
    gains: &ControlGains,
) -> Result<Vec<Vec<f64>>> {
    let n = graph.node_count();
    if predicted_states.len() != n || predicted_refs.len() != n {
        return Err(Error::Usage(format!(
            "expected {n} agents, got {} states and {} references",
            predicted_states.len(),
            predicted_refs.len()
        )));
    }
    if let Some(bad) = predicted_states.iter().position(|s| s.len() != gains.n_stages) {
        return Err(Error::Usage(format!(
            "agent {} has {} stages, expected {}",
            bad + 1,
            predicted_states[bad].len(),
            gains.n_stages
        )));
    }
    if links.theta.len() != graph.edge_count() {
        return Err(Error::Usage("link realization does not match the graph".into()));
    }

    let mut u: Vec<Vec<f64>> = predicted_states
        .iter()
        .zip(predicted_refs)
        .map(|(x, &r)| {
            (0..x.len())
                .map(|p| {
                    let driver = if p == 0 { r } else { x[p - 1] };
                    gains.alpha * (driver - x[p])
                })
                .collect()
        })
        .collect();
    for (&(i, j), _) in graph.edges().iter().zip(&links.theta).filter(|(_, &up)| up) {
        for p in 0..gains.n_stages {
            let diff = gains.epsilon * (predicted_states[i][p] - predicted_states[j][p]);
            u[i][p] -= diff;
            u[j][p] += diff;
        }
    }
    Ok(u)
}

/// Everything one agent carries between ticks.
#[derive(Debug, Clone)]
pub struct Agent {
    /// Stage states at the current tick.
    pub x: Vec<f64>,
    pub reference: ReferenceState,
    pub predictor: PredictorState,
    /// `u(k - tau) .. u(k - 1)`.
    inputs: DelayLine<Vec<f64>>,
    /// `x(k - tau) .. x(k - 1)`.
    past_states: DelayLine<Vec<f64>>,
    /// Reference and filter states at `k - tau .. k - 1`.
    past_refs: DelayLine<ReferenceState>,
    /// `v(k - tau) .. v(k - 1)`.
    past_v: DelayLine<f64>,
}

/// Initial conditions for every agent.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialConditions {
    /// `x_i^p(0)`, agent-major.
    pub x0: Vec<Vec<f64>>,
    pub r0: Vec<f64>,
    /// First measurement `z(0)`, used only by the naive controller.
    pub z0: Vec<f64>,
    pub r_hat0: Vec<f64>,
    pub p0: Vec<f64>,
    /// Initial error of every stage predictor.
    pub x_prediction_error: f64,
    /// Initial error of the reference predictor.
    pub r_prediction_error: f64,
}

impl InitialConditions {
    /// States at zero, exact filter prior, noise-free first measurement.
    pub fn at_rest(r0: &[f64], params: &[ReferenceParams], n_stages: usize, p0: f64) -> Self {
        Self {
            x0: vec![vec![0.0; n_stages]; r0.len()],
            r0: r0.to_vec(),
            z0: r0.iter().zip(params).map(|(r, p)| p.h * r).collect(),
            r_hat0: r0.to_vec(),
            p0: vec![p0; r0.len()],
            x_prediction_error: 0.0,
            r_prediction_error: 0.0,
        }
    }
}

/// Per-tick record of what the controller saw and did.
#[derive(Debug, Clone, PartialEq)]
pub struct TickReport {
    pub k: usize,
    /// Quantities fed to the control law as states (predicted or raw).
    pub predicted_states: Vec<Vec<f64>>,
    pub predicted_refs: Vec<f64>,
    pub links: LinkRealization,
    pub inputs: Vec<Vec<f64>>,
}

/// Complete closed-loop system: topology, gains, agents and the tick count.
#[derive(Debug, Clone)]
pub struct World {
    graph: Graph,
    drop_probs: Vec<f64>,
    gains: ControlGains,
    predictor_gains: PredictorGains,
    params: Vec<ReferenceParams>,
    noise: bool,
    agents: Vec<Agent>,
    k: usize,
    last: Option<TickReport>,
}

impl World {
    pub fn new(
        graph: Graph,
        drops: &DropModel,
        gains: ControlGains,
        predictor_gains: PredictorGains,
        params: Vec<ReferenceParams>,
        init: &InitialConditions,
        noise: bool,
    ) -> Result<Self> {
        let n = graph.node_count();
        if gains.n_stages == 0 {
            return Err(Error::Config("at least one stage is required".into()));
        }
        for (name, len) in [
            ("reference parameters", params.len()),
            ("x0", init.x0.len()),
            ("r0", init.r0.len()),
            ("z0", init.z0.len()),
            ("r_hat0", init.r_hat0.len()),
            ("p0", init.p0.len()),
        ] {
            if len != n {
                return Err(Error::Config(format!("{name}: expected {n} entries, got {len}")));
            }
        }
        if init.x0.iter().any(|x| x.len() != gains.n_stages) {
            return Err(Error::Config(format!(
                "x0: every agent needs {} stage values",
                gains.n_stages
            )));
        }
        let drop_probs = drops.aligned(&graph)?;
        let tau = gains.tau;
        let agents = (0..n)
            .map(|i| {
                let x = init.x0[i].clone();
                let reference = ReferenceState::new(init.r0[i], init.z0[i], init.r_hat0[i], init.p0[i]);
                let predictor = PredictorState::new(
                    x.iter().map(|v| v - init.x_prediction_error).collect(),
                    init.r_hat0[i] - init.r_prediction_error,
                    predictor_gains.k_x,
                    predictor_gains.k_r,
                );
                Agent {
                    inputs: DelayLine::new(tau, vec![0.0; gains.n_stages]),
                    past_states: DelayLine::new(tau, x.clone()),
                    past_refs: DelayLine::new(tau, reference),
                    past_v: DelayLine::new(tau, 0.0),
                    x,
                    reference,
                    predictor,
                }
            })
            .collect();
        Ok(Self {
            graph,
            drop_probs,
            gains,
            predictor_gains,
            params,
            noise,
            agents,
            k: 0,
            last: None,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn gains(&self) -> &ControlGains {
        &self.gains
    }

    pub fn predictor_gains(&self) -> &PredictorGains {
        &self.predictor_gains
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    /// Index of the current tick (number of completed steps).
    pub fn time(&self) -> usize {
        self.k
    }

    pub fn last_tick(&self) -> Option<&TickReport> {
        self.last.as_ref()
    }

    pub fn states(&self) -> Vec<Vec<f64>> {
        self.agents.iter().map(|a| a.x.clone()).collect()
    }

    /// Final-stage state of every agent.
    pub fn final_stage(&self) -> Vec<f64> {
        self.agents.iter().map(|a| a.x[self.gains.n_stages - 1]).collect()
    }

    pub fn references(&self) -> Vec<ReferenceState> {
        self.agents.iter().map(|a| a.reference).collect()
    }

    /// `e^p(m) = x^p(m) - s^p(m)` for the newest filter index
    /// `m = k - tau`; `None` without delay (predictor bypassed).
    pub fn prediction_errors(&self) -> Option<Vec<Vec<f64>>> {
        if self.gains.tau == 0 {
            return None;
        }
        Some(
            self.agents
                .iter()
                .map(|a| {
                    let x = a.past_states.oldest().expect("tau > 0");
                    x.iter().zip(&a.predictor.x_filt).map(|(x, s)| x - s).collect()
                })
                .collect(),
        )
    }

    /// Reference predictor errors at `m = k - tau`, as pairs
    /// `(r_hat(m) - q(m), r_hat_minus(m) - q(m))`.
    pub fn reference_prediction_errors(&self) -> Option<Vec<(f64, f64)>> {
        if self.gains.tau == 0 {
            return None;
        }
        Some(
            self.agents
                .iter()
                .map(|a| {
                    let past = a.past_refs.oldest().expect("tau > 0");
                    (past.r_hat - a.predictor.r_filt, past.r_hat_minus - a.predictor.r_filt)
                })
                .collect(),
        )
    }

    /// `x(m)` for `m = k - tau`, the state paired with the filter estimate
    /// in [`prediction_errors`](Self::prediction_errors); `None` without
    /// delay.
    pub fn delayed_states(&self) -> Option<Vec<Vec<f64>>> {
        if self.gains.tau == 0 {
            return None;
        }
        Some(
            self.agents
                .iter()
                .map(|a| a.past_states.oldest().expect("tau > 0").clone())
                .collect(),
        )
    }

    /// Newest entry of the state history, `x(k - 1)`; `None` before the
    /// first tick or without delay.
    pub fn previous_states(&self) -> Option<Vec<Vec<f64>>> {
        if self.k == 0 || self.gains.tau == 0 {
            return None;
        }
        Some(
            self.agents
                .iter()
                .map(|a| a.past_states.newest().expect("tau > 0").clone())
                .collect(),
        )
    }

    /// Advances one tick in the given mode.
    pub fn step(&mut self, mode: Mode, streams: &mut RunStreams) -> Result<()> {
        if streams.links.len() != self.graph.edge_count() || streams.noise.len() != self.agents.len() {
            return Err(Error::Usage("streams do not match the world".into()));
        }
        let tau = self.gains.tau;
        let mut predicted_states = Vec::with_capacity(self.agents.len());
        let mut predicted_refs = Vec::with_capacity(self.agents.len());
        for (agent, params) in self.agents.iter_mut().zip(&self.params) {
            if tau > 0 {
                let x_old = agent.past_states.oldest().expect("tau > 0");
                let u_old = agent.inputs.oldest().expect("tau > 0");
                agent.predictor.update_states(x_old, u_old);
                let r_old = agent.past_refs.oldest().expect("tau > 0").r_hat;
                let v_old = *agent.past_v.oldest().expect("tau > 0");
                agent.predictor.update_reference(r_old, v_old);
            }
            let (xs, r) = match (mode, tau) {
                (Mode::Compensated, 0) => (agent.x.clone(), agent.reference.r_hat),
                (Mode::Compensated, _) => (
                    agent.predictor.predict_states(agent.inputs.after_oldest()),
                    agent.predictor.predict_reference(agent.past_v.after_oldest()),
                ),
                (Mode::Naive, 0) => (agent.x.clone(), agent.reference.z / params.h),
                (Mode::Naive, _) => (
                    agent.past_states.oldest().expect("tau > 0").clone(),
                    agent.reference.z / params.h,
                ),
            };
            predicted_states.push(xs);
            predicted_refs.push(r);
        }

        let links = sample_links(&self.drop_probs, &mut streams.links);
        let inputs = control_input(&predicted_states, &predicted_refs, &self.graph, &links, &self.gains)?;

        for ((agent, params), (u, rng)) in self
            .agents
            .iter_mut()
            .zip(&self.params)
            .zip(inputs.iter().zip(streams.noise.iter_mut()))
        {
            agent.inputs.push(u.clone());
            agent.past_states.push(agent.x.clone());
            for (x, du) in agent.x.iter_mut().zip(u) {
                *x += du;
            }
            let v = params.input.value(self.k as i64);
            agent.past_refs.push(agent.reference);
            agent.past_v.push(v);
            let noise = if self.noise {
                [StandardNormal.sample(rng), StandardNormal.sample(rng)]
            } else {
                [0.0, 0.0]
            };
            agent.reference = advance(&agent.reference, params, v, noise)?;
        }

        self.last = Some(TickReport {
            k: self.k,
            predicted_states,
            predicted_refs,
            links,
            inputs,
        });
        self.k += 1;
        Ok(())
    }

    pub fn step_naive(&mut self, streams: &mut RunStreams) -> Result<()> {
        self.step(Mode::Naive, streams)
    }
}
