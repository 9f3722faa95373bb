use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters a [`NoiseSchedule`] is rebuilt from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleParams {
    #[serde(rename = "T")]
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self {
            steps: 100,
            beta_start: 1e-4,
            beta_end: 0.02,
        }
    }
}

/// Linear β schedule with cumulative signal-retention products.
///
/// `alpha_bars[0] = 1` and `alpha_bars[t] = alpha_bars[t-1] * (1 - betas[t-1])`
/// for `t = 1..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    params: ScheduleParams,
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    pub fn new(params: ScheduleParams) -> Result<Self> {
        make_schedule(params.steps, params.beta_start, params.beta_end)
    }

    pub fn params(&self) -> ScheduleParams {
        self.params
    }

    /// Number of diffusion steps `T`.
    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    /// ᾱ_t for `t ∈ 0..=T`.
    #[inline]
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t]
    }

    pub(crate) fn check_step(&self, t: usize, min: usize) -> Result<()> {
        if t < min || t > self.len() {
            return Err(Error::invalid(
                "t",
                format!("step {t} outside {min}..={}", self.len()),
            ));
        }
        Ok(())
    }

    /// Uniform-stride sub-sequence `τ_1 < … < τ_steps = T` of `1..=T`,
    /// `τ_k = ⌊k·T / steps⌋`.
    pub fn sub_sequence(&self, steps: usize) -> Result<Vec<usize>> {
        let t = self.len();
        if steps == 0 || steps > t {
            return Err(Error::invalid(
                "steps",
                format!("{steps} sampling steps with a {t}-step schedule"),
            ));
        }
        Ok((1..=steps).map(|k| k * t / steps).collect())
    }
}

/// Builds a linearly spaced β schedule of length `t`.
pub fn make_schedule(t: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    if t == 0 {
        return Err(Error::invalid("T", "must be at least 1"));
    }
    if !(beta_start > 0.0 && beta_start < 1.0) {
        return Err(Error::invalid(
            "beta_start",
            format!("{beta_start} not in (0, 1)"),
        ));
    }
    if !(beta_end > 0.0 && beta_end < 1.0) {
        return Err(Error::invalid(
            "beta_end",
            format!("{beta_end} not in (0, 1)"),
        ));
    }
    if beta_start > beta_end {
        return Err(Error::invalid(
            "beta_start",
            format!("{beta_start} exceeds beta_end {beta_end}"),
        ));
    }
    let betas: Vec<f64> = if t == 1 {
        vec![beta_start]
    } else {
        (0..t)
            .map(|i| beta_start + (beta_end - beta_start) * i as f64 / (t - 1) as f64)
            .collect()
    };
    let mut alpha_bars = Vec::with_capacity(t + 1);
    alpha_bars.push(1.0);
    for (i, b) in betas.iter().enumerate() {
        alpha_bars.push(alpha_bars[i] * (1.0 - b));
    }
    Ok(NoiseSchedule {
        params: ScheduleParams {
            steps: t,
            beta_start,
            beta_end,
        },
        betas,
        alpha_bars,
    })
}
