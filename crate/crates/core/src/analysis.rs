//! Closed-form predictions for a scenario: parameter gate, expected steady
//! states, the convergence matrix, the stage bound and error metrics.
//!
//! Everything here depends on the scenario only (expected Laplacian, gains,
//! reference limits), never on simulation state.

use nalgebra::{DMatrix, DVector};

use crate::controller::{ControlGains, PredictorGains};
use crate::error::{Error, Result};
use crate::graph::WeightedLaplacian;

/// Eigenvalues this close to zero count as the structural zero mode.
pub const ZERO_MODE_TOL: f64 = 1e-10;
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-10;
pub const BOUND_SLACK: f64 = 1e-9;

/// One open-interval condition `lower < value < upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub name: &'static str,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub passed: bool,
}

impl ParamCheck {
    fn open(name: &'static str, value: f64, lower: f64, upper: f64) -> Self {
        Self {
            name,
            value,
            lower,
            upper,
            passed: value > lower && value < upper,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidityReport {
    /// Maximum degree of the expected graph.
    pub d_max: f64,
    pub checks: Vec<ParamCheck>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ParamCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Checks `eps in (0, 1/(2 d_max))`, `alpha in (0, 1 - eps d_max)` and
/// `k_x, k_r in (0, 1)`.
pub fn validate_params(
    gains: &ControlGains,
    predictor: &PredictorGains,
    expected: &WeightedLaplacian,
) -> Result<ValidityReport> {
    if !expected.is_connected() {
        return Err(Error::Disconnected("the expected graph is not connected".into()));
    }
    let d_max = expected.max_degree();
    Ok(ValidityReport {
        d_max,
        checks: vec![
            ParamCheck::open("epsilon", gains.epsilon, 0.0, 1.0 / (2.0 * d_max)),
            ParamCheck::open("alpha", gains.alpha, 0.0, 1.0 - gains.epsilon * d_max),
            ParamCheck::open("k_x", predictor.k_x, 0.0, 1.0),
            ParamCheck::open("k_r", predictor.k_r, 0.0, 1.0),
        ],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStatePrediction {
    pub r_star: Vec<f64>,
    pub r_bar: f64,
    /// `|| r* - r_bar 1 ||_2`.
    pub r_tilde_norm: f64,
    /// `x^{p,*}` for `p = 1..=n`.
    pub x_star: Vec<Vec<f64>>,
}

impl SteadyStatePrediction {
    /// `|| r_bar 1 - x^{n,*} ||_2` for the last stage.
    pub fn final_stage_error(&self) -> f64 {
        let last = self.x_star.last().expect("at least one stage");
        last.iter().map(|x| (self.r_bar - x).powi(2)).sum::<f64>().sqrt()
    }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn deviation_norm(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>().sqrt()
}

/// `x^{p,*} = (alpha I + eps L)^{-p} alpha^p r*`, by `n` successive
/// Cholesky solves.
pub fn steady_state(
    expected: &WeightedLaplacian,
    gains: &ControlGains,
    r_star: &[f64],
) -> Result<SteadyStatePrediction> {
    let n = expected.size();
    if r_star.len() != n {
        return Err(Error::Usage(format!(
            "r* has {} entries for {n} agents",
            r_star.len()
        )));
    }
    if n == 0 {
        return Err(Error::Usage("no agents".into()));
    }
    let a = DMatrix::<f64>::identity(n, n) * gains.alpha + expected.matrix() * gains.epsilon;
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Contract("alpha I + eps L is not positive definite".into()))?;

    let mut y = DVector::from_column_slice(r_star);
    let mut x_star = Vec::with_capacity(gains.n_stages);
    for p in 0..gains.n_stages {
        let rhs = &y * gains.alpha;
        let next = chol.solve(&rhs);
        let residual = (&a * &next - &rhs).norm();
        if !(residual <= SOLVE_RESIDUAL_TOL * rhs.norm().max(1.0)) {
            return Err(Error::Contract(format!(
                "stage {} solve residual {residual:e}",
                p + 1
            )));
        }
        x_star.push(next.iter().copied().collect());
        y = next;
    }
    Ok(SteadyStatePrediction {
        r_star: r_star.to_vec(),
        r_bar: mean(r_star),
        r_tilde_norm: deviation_norm(r_star),
        x_star,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub lambda2: f64,
    /// `alpha / (alpha + eps lambda2)`.
    pub ratio: f64,
    /// `ratio^n || r~* ||`.
    pub bound: f64,
    pub r_tilde_norm: f64,
    /// `|| r_bar* 1 - x^{n,*} ||` from the steady-state solve.
    pub steady_error: f64,
}

/// Second-smallest eigenvalue after snapping near-zero values to zero.
pub fn algebraic_connectivity(expected: &WeightedLaplacian) -> Result<f64> {
    if expected.size() < 2 {
        return Err(Error::Usage("algebraic connectivity needs two agents".into()));
    }
    let values = expected.eigen(false)?.values;
    let snapped: Vec<f64> = values
        .into_iter()
        .map(|v| if v.abs() <= ZERO_MODE_TOL { 0.0 } else { v })
        .collect();
    let lambda2 = snapped[1];
    if lambda2 <= ZERO_MODE_TOL {
        return Err(Error::Disconnected(format!("lambda_2 = {lambda2:e}")));
    }
    Ok(lambda2)
}

pub fn theorem_bound(
    expected: &WeightedLaplacian,
    gains: &ControlGains,
    r_star: &[f64],
) -> Result<BoundReport> {
    let lambda2 = algebraic_connectivity(expected)?;
    let ss = steady_state(expected, gains, r_star)?;
    let ratio = gains.alpha / (gains.alpha + gains.epsilon * lambda2);
    let bound = ratio.powi(gains.n_stages as i32) * ss.r_tilde_norm;
    let steady_error = ss.final_stage_error();
    if steady_error > bound + BOUND_SLACK * ss.r_tilde_norm.max(1.0) {
        return Err(Error::Contract(format!(
            "steady error {steady_error:e} exceeds bound {bound:e}"
        )));
    }
    Ok(BoundReport {
        lambda2,
        ratio,
        bound,
        r_tilde_norm: ss.r_tilde_norm,
        steady_error,
    })
}

/// Smallest `n` with `ratio^n r_tilde_norm <= delta`.
pub fn stages_for_target(delta: f64, ratio: f64, r_tilde_norm: f64) -> Result<usize> {
    if !(delta > 0.0) || !(r_tilde_norm >= 0.0) {
        return Err(Error::Usage(format!(
            "need delta > 0 and a non-negative norm, got {delta} and {r_tilde_norm}"
        )));
    }
    if r_tilde_norm <= delta {
        return Ok(0);
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Infeasible(format!(
            "contraction ratio {ratio} does not lie in (0, 1)"
        )));
    }
    let bound = |n: usize| ratio.powi(n as i32) * r_tilde_norm;
    let mut n = ((delta / r_tilde_norm).ln() / ratio.ln()).ceil().max(1.0) as usize;
    // the logarithm can land one off near exact boundaries
    while n > 1 && bound(n - 1) <= delta {
        n -= 1;
    }
    while bound(n) > delta {
        n += 1;
    }
    Ok(n)
}

/// The block matrix
///
/// ```text
/// [ (1 - alpha) I - eps L   alpha I + eps L   -alpha I    ]
/// [ 0                       (1 - k_x) I       0           ]
/// [ 0                       0                 (1 - k_r) I ]
/// ```
pub fn convergence_matrix(
    expected: &WeightedLaplacian,
    gains: &ControlGains,
    predictor: &PredictorGains,
) -> DMatrix<f64> {
    let n = expected.size();
    let l = expected.matrix();
    let eye = DMatrix::<f64>::identity(n, n);
    let mut m = DMatrix::zeros(3 * n, 3 * n);
    m.view_mut((0, 0), (n, n))
        .copy_from(&(&eye * (1.0 - gains.alpha) - l * gains.epsilon));
    m.view_mut((0, n), (n, n))
        .copy_from(&(&eye * gains.alpha + l * gains.epsilon));
    m.view_mut((0, 2 * n), (n, n)).copy_from(&(&eye * -gains.alpha));
    m.view_mut((n, n), (n, n)).copy_from(&(&eye * (1.0 - predictor.k_x)));
    m.view_mut((2 * n, 2 * n), (n, n))
        .copy_from(&(&eye * (1.0 - predictor.k_r)));
    m
}

/// Eigenvalues of [`convergence_matrix`], ascending. The matrix is block
/// upper-triangular, so its spectrum is the union of the diagonal blocks'
/// spectra; only the symmetric top-left block needs an eigensolve.
pub fn convergence_matrix_spectrum(
    expected: &WeightedLaplacian,
    gains: &ControlGains,
    predictor: &PredictorGains,
) -> Result<Vec<f64>> {
    let n = expected.size();
    let top = DMatrix::<f64>::identity(n, n) * (1.0 - gains.alpha) - expected.matrix() * gains.epsilon;
    let mut values = crate::eigen::symmetric_eigen(&top, false)?.values;
    values.extend(std::iter::repeat_n(1.0 - predictor.k_x, n));
    values.extend(std::iter::repeat_n(1.0 - predictor.k_r, n));
    values.sort_by(f64::total_cmp);
    Ok(values)
}

pub fn spectral_radius(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingError {
    /// `|| r_bar(k) 1 - x^n(k) ||_2` per step.
    pub norm: Vec<f64>,
    /// `r_bar(k) - x_i^n(k)` per step and agent.
    pub per_agent: Vec<Vec<f64>>,
}

/// Tracking error of final-stage states against the instantaneous
/// reference average. Both inputs are indexed `[k][agent]`.
pub fn tracking_error(final_stage: &[Vec<f64>], references: &[Vec<f64>]) -> Result<TrackingError> {
    if final_stage.len() != references.len() {
        return Err(Error::Usage(format!(
            "horizons differ: {} state steps, {} reference steps",
            final_stage.len(),
            references.len()
        )));
    }
    let mut norm = Vec::with_capacity(final_stage.len());
    let mut per_agent = Vec::with_capacity(final_stage.len());
    for (k, (x, r)) in final_stage.iter().zip(references).enumerate() {
        if x.len() != r.len() || x.is_empty() {
            return Err(Error::Usage(format!("step {k}: agent counts differ or are zero")));
        }
        let r_bar = mean(r);
        let d: Vec<f64> = x.iter().map(|xi| r_bar - xi).collect();
        norm.push(d.iter().map(|v| v * v).sum::<f64>().sqrt());
        per_agent.push(d);
    }
    Ok(TrackingError { norm, per_agent })
}

/// Everything the analysis report contains; computed from the scenario
/// alone.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub validity: ValidityReport,
    pub bound: BoundReport,
    pub steady: SteadyStatePrediction,
    pub spectral_radius: f64,
}

pub fn analyze(
    expected: &WeightedLaplacian,
    gains: &ControlGains,
    predictor: &PredictorGains,
    r_star: &[f64],
) -> Result<AnalysisReport> {
    let validity = validate_params(gains, predictor, expected)?;
    let bound = theorem_bound(expected, gains, r_star)?;
    let steady = steady_state(expected, gains, r_star)?;
    let spectral_radius = spectral_radius(&convergence_matrix_spectrum(expected, gains, predictor)?);
    Ok(AnalysisReport {
        validity,
        bound,
        steady,
        spectral_radius,
    })
}
