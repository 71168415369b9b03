//! Noisy reference processes and their scalar Kalman filters.
//!
//! Each agent owns one reference `r(k+1) = r(k) + v(k) + w(k)` observed as
//! `z(k) = h r(k) + noise`. The filter alternates a time update
//! (`r^-`, `p^-`) and a measurement update (gain, `r^`, `p`).

use crate::error::{Error, Result};

/// Known input `v(k)` driving a reference. All variants are absolutely
/// summable, so `E[r(k)]` settles to `r(0) + total()`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputProfile {
    Zero,
    /// `v(k) = c * gamma^k`, `0 < gamma < 1`.
    Geometric { c: f64, gamma: f64 },
    /// `v(k) = c` for `k < until`, then 0.
    FiniteRamp { c: f64, until: usize },
}

impl InputProfile {
    /// `v(k)`; negative times yield 0.
    pub fn value(&self, k: i64) -> f64 {
        if k < 0 {
            return 0.0;
        }
        match *self {
            InputProfile::Zero => 0.0,
            InputProfile::Geometric { c, gamma } => c * gamma.powi(k as i32),
            InputProfile::FiniteRamp { c, until } => {
                if (k as usize) < until {
                    c
                } else {
                    0.0
                }
            }
        }
    }

    /// `sum_k v(k)` over all `k >= 0`.
    pub fn total(&self) -> f64 {
        match *self {
            InputProfile::Zero => 0.0,
            InputProfile::Geometric { c, gamma } => c / (1.0 - gamma),
            InputProfile::FiniteRamp { c, until } => c * until as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            InputProfile::Geometric { gamma, c } if !(gamma > 0.0 && gamma < 1.0) || !c.is_finite() => {
                Err(Error::Domain(format!(
                    "geometric input needs 0 < gamma < 1 and finite c, got gamma = {gamma}, c = {c}"
                )))
            }
            InputProfile::FiniteRamp { c, .. } if !c.is_finite() => {
                Err(Error::Domain("ramp input needs a finite level".into()))
            }
            _ => Ok(()),
        }
    }
}

impl std::fmt::Display for InputProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InputProfile::Zero => write!(f, "zero"),
            InputProfile::Geometric { c, gamma } => write!(f, "geometric {c} {gamma}"),
            InputProfile::FiniteRamp { c, until } => write!(f, "ramp {c} {until}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceParams {
    /// Measurement gain `h > 0`.
    pub h: f64,
    /// Process-noise variance per step.
    pub phi: f64,
    /// Measurement-noise variance per step.
    pub psi: f64,
    pub input: InputProfile,
}

impl ReferenceParams {
    pub fn new(h: f64, phi: f64, psi: f64, input: InputProfile) -> Result<Self> {
        let params = Self { h, phi, psi, input };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("h", self.h), ("phi", self.phi), ("psi", self.psi)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        self.input.validate()
    }

    /// Fixed point of the variance recursion for constant `phi`, `psi`.
    pub fn stationary_variance(&self) -> f64 {
        stationary_variance(self.h, self.phi, self.psi)
    }
}

/// Positive root of `h^2 p^2 + h^2 phi p - phi psi = 0`, i.e. the posteriori
/// variance the filter settles to.
pub fn stationary_variance(h: f64, phi: f64, psi: f64) -> f64 {
    let h2 = h * h;
    (-h2 * phi + (h2 * h2 * phi * phi + 4.0 * h2 * phi * psi).sqrt()) / (2.0 * h2)
}

/// True reference, its latest measurement, and the filter state at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceState {
    pub r: f64,
    pub z: f64,
    pub r_hat_minus: f64,
    pub r_hat: f64,
    pub p_minus: f64,
    pub p: f64,
    pub gain: f64,
}

impl ReferenceState {
    /// Filter starting from `r_hat(0)`, `p(0)`; priori quantities mirror the
    /// posteriori ones until the first update.
    pub fn new(r0: f64, z0: f64, r_hat0: f64, p0: f64) -> Self {
        Self {
            r: r0,
            z: z0,
            r_hat_minus: r_hat0,
            r_hat: r_hat0,
            p_minus: p0,
            p: p0,
            gain: 0.0,
        }
    }
}

/// Advances the true reference and draws its next measurement.
/// `noise` holds two standard-normal draws.
pub fn reference_step(state: &ReferenceState, params: &ReferenceParams, v: f64, noise: [f64; 2]) -> ReferenceState {
    let w = params.phi.sqrt() * noise[0];
    let r = state.r + v + w;
    let z = params.h * r + params.psi.sqrt() * noise[1];
    ReferenceState { r, z, ..*state }
}

/// One time update plus measurement update with the variances in force for
/// this step (`phi_k`, `psi_k`). Leaves `r` and `z` untouched.
pub fn kalman_step(
    state: &ReferenceState,
    h: f64,
    v: f64,
    z_new: f64,
    phi_k: f64,
    psi_k: f64,
) -> Result<ReferenceState> {
    let r_hat_minus = state.r_hat + v;
    let p_minus = state.p + phi_k;
    let innovation_var = h * h * p_minus + psi_k;
    if !(innovation_var > 0.0) {
        return Err(Error::Domain(format!(
            "innovation variance h^2 p^- + psi = {innovation_var} is not positive"
        )));
    }
    let gain = h * p_minus / innovation_var;
    Ok(ReferenceState {
        r_hat_minus,
        p_minus,
        gain,
        r_hat: r_hat_minus + gain * (z_new - h * r_hat_minus),
        p: (1.0 - gain * h) * p_minus,
        ..*state
    })
}

/// Advances truth and filter together by one step, using constant variances.
pub fn advance(state: &ReferenceState, params: &ReferenceParams, v: f64, noise: [f64; 2]) -> Result<ReferenceState> {
    let next = reference_step(state, params, v, noise);
    kalman_step(&next, params.h, v, next.z, params.phi, params.psi)
}

/// Per-step ensemble mean of `r_hat - r`. Every run is a sequence of
/// `(r, r_hat)` pairs of the same length.
pub fn estimate_bias(runs: &[Vec<(f64, f64)>]) -> Result<Vec<f64>> {
    if runs.len() < 2 {
        return Err(Error::Usage(format!(
            "bias estimate needs at least two runs, got {}",
            runs.len()
        )));
    }
    let horizon = runs[0].len();
    if runs.iter().any(|r| r.len() != horizon) {
        return Err(Error::Usage("runs have different horizons".into()));
    }
    let m = runs.len() as f64;
    Ok((0..horizon)
        .map(|k| runs.iter().map(|run| run[k].1 - run[k].0).sum::<f64>() / m)
        .collect())
}
