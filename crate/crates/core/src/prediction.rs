//! Delay compensation: input delay lines and the one-step predictor rolled
//! forward over buffered inputs.
//!
//! With `s(m)` the one-step estimate of `x(m)` made at `m - 1`, the filter is
//!
//! ```text
//! s(m + 1) = s(m) + k_x (x(m) - s(m)) + u(m)
//! ```
//!
//! and the prediction of `x(k)` from data up to `k - tau` is
//! `s(k - tau + 1) + u(k - tau + 1) + ... + u(k - 1)`. Because the plant is
//! `x(m + 1) = x(m) + u(m)`, the error `e(m) = x(m) - s(m)` contracts by
//! exactly `1 - k_x` each step. The reference branch runs the same filter
//! on the Kalman estimate with gain `k_r` and the known input `v`.

use std::collections::VecDeque;

/// FIFO holding the last `depth` values. Entries for times before the start
/// are the fill value given at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayLine<T> {
    depth: usize,
    buffer: VecDeque<T>,
}

impl<T: Clone> DelayLine<T> {
    pub fn new(depth: usize, fill: T) -> Self {
        Self {
            depth,
            buffer: std::iter::repeat_n(fill, depth).collect(),
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Appends `value` and returns the entry it displaces, i.e. the value
    /// pushed `depth` calls ago. With depth 0 the value comes straight back.
    pub fn push(&mut self, value: T) -> T {
        if self.depth == 0 {
            return value;
        }
        self.buffer.push_back(value);
        self.buffer.pop_front().expect("delay line holds depth entries")
    }

    /// Value from `depth` steps ago, `None` when depth is 0.
    pub fn oldest(&self) -> Option<&T> {
        self.buffer.front()
    }

    /// Everything newer than [`oldest`](Self::oldest), oldest first.
    pub fn after_oldest(&self) -> impl Iterator<Item = &T> {
        self.buffer.iter().skip(1)
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.buffer.iter()
    }

    pub fn newest(&self) -> Option<&T> {
        self.buffer.back()
    }
}

/// `s' = s + gain (measured - s) + input`.
pub fn one_step_update(previous: f64, measured: f64, gain: f64, input: f64) -> f64 {
    previous + gain * (measured - previous) + input
}

/// Filtered estimate plus the inputs applied since.
pub fn roll_forward<'a, I>(filtered: f64, buffered_inputs: I) -> f64
where
    I: IntoIterator<Item = &'a f64>,
{
    buffered_inputs.into_iter().fold(filtered, |acc, u| acc + u)
}

/// One-step filtered estimates for one agent: all stages plus the reference.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorState {
    /// `s^p(m)` per stage.
    pub x_filt: Vec<f64>,
    /// Reference analogue `q(m)`.
    pub r_filt: f64,
    pub k_x: f64,
    pub k_r: f64,
}

impl PredictorState {
    pub fn new(x_filt: Vec<f64>, r_filt: f64, k_x: f64, k_r: f64) -> Self {
        Self { x_filt, r_filt, k_x, k_r }
    }

    /// Consumes `x(m)` and `u(m)` per stage.
    pub fn update_states(&mut self, measured_state: &[f64], delayed_input: &[f64]) {
        debug_assert_eq!(measured_state.len(), self.x_filt.len());
        debug_assert_eq!(delayed_input.len(), self.x_filt.len());
        for ((s, &x), &u) in self.x_filt.iter_mut().zip(measured_state).zip(delayed_input) {
            *s = one_step_update(*s, x, self.k_x, u);
        }
    }

    /// Consumes the Kalman estimate `r_hat(m)` and the known input `v(m)`.
    pub fn update_reference(&mut self, measured_estimate: f64, delayed_input: f64) {
        self.r_filt = one_step_update(self.r_filt, measured_estimate, self.k_r, delayed_input);
    }

    /// Stage-wise predictions `x^(k | k - tau)` given `u(k - tau + 1)` ..
    /// `u(k - 1)` (the inputs already folded into the filter are excluded).
    pub fn predict_states<'a, I>(&self, buffered_inputs: I) -> Vec<f64>
    where
        I: IntoIterator<Item = &'a Vec<f64>>,
    {
        let mut out = self.x_filt.clone();
        for u in buffered_inputs {
            for (o, du) in out.iter_mut().zip(u) {
                *o += du;
            }
        }
        out
    }

    pub fn predict_reference<'a, I>(&self, buffered_inputs: I) -> f64
    where
        I: IntoIterator<Item = &'a f64>,
    {
        roll_forward(self.r_filt, buffered_inputs)
    }
}
