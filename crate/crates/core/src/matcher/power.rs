//! Power iterations for the relaxed second- and third-order assignment
//! problems.

use crate::error::{Error, Result};

use super::compat::{ensure_nonzero, H2Matrix, H3Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSettings {
    pub max_iterations: usize,
    /// Stop once `‖Y_new − Y_old‖₂` falls below this.
    pub tolerance: f64,
}

impl Default for PowerSettings {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerOutcome {
    pub y: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

fn step_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Iterates `Y ← H·Y / ‖H·Y‖₂` from a uniform positive start.
pub fn power_iteration_2_with(h: &H2Matrix, s: PowerSettings) -> Result<PowerOutcome> {
    ensure_nonzero(h)?;
    let n = h.len();
    let mut y = vec![1.0 / (n as f64).sqrt(); n];
    let mut next = vec![0.0; n];
    for it in 1..=s.max_iterations {
        for (a, out) in next.iter_mut().enumerate() {
            *out = h.row(a).iter().zip(&y).map(|(h, y)| h * y).sum();
        }
        if normalize(&mut next) == 0.0 {
            return Err(Error::ZeroMatrix);
        }
        let delta = step_distance(&next, &y);
        std::mem::swap(&mut y, &mut next);
        if delta < s.tolerance {
            return Ok(PowerOutcome {
                y,
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(PowerOutcome {
        y,
        iterations: s.max_iterations,
        converged: false,
    })
}

pub fn power_iteration_2(h: &H2Matrix) -> Result<Vec<f64>> {
    power_iteration_2_with(h, PowerSettings::default()).map(|o| o.y)
}

/// Iterates `Y_i ← Σ_{j,k} H_{ijk} Y_j Y_k`, normalised, from a uniform
/// positive start.
pub fn power_iteration_3_with(h: &H3Tensor, s: PowerSettings) -> Result<PowerOutcome> {
    if h.entries.is_empty() {
        return Err(Error::ZeroTensor);
    }
    let n = h.n;
    let mut y = vec![1.0 / (n as f64).sqrt(); n];
    let mut next = vec![0.0; n];
    for it in 1..=s.max_iterations {
        next.iter_mut().for_each(|v| *v = 0.0);
        for ([a, b, c], v) in &h.entries {
            let (a, b, c) = (*a as usize, *b as usize, *c as usize);
            // each stored entry appears twice in the ordered sum over (j, k)
            let w = 2.0 * v;
            next[a] += w * y[b] * y[c];
            next[b] += w * y[a] * y[c];
            next[c] += w * y[a] * y[b];
        }
        if normalize(&mut next) == 0.0 {
            return Err(Error::ZeroTensor);
        }
        let delta = step_distance(&next, &y);
        std::mem::swap(&mut y, &mut next);
        if delta < s.tolerance {
            return Ok(PowerOutcome {
                y,
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(PowerOutcome {
        y,
        iterations: s.max_iterations,
        converged: false,
    })
}

pub fn power_iteration_3(h: &H3Tensor) -> Result<Vec<f64>> {
    power_iteration_3_with(h, PowerSettings::default()).map(|o| o.y)
}
