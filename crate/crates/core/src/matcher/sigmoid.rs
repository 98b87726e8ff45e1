use std::f64::consts::{FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

/// Parameters of the truncated sigmoid: centre `mu`, slope `tau` and cut-off `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmoidParams {
    pub mu: f64,
    pub tau: f64,
    pub t: f64,
}

impl SigmoidParams {
    /// Tolerance on differences of Euclidean distances (pixels).
    pub const EUCLIDEAN: SigmoidParams = SigmoidParams {
        mu: 15.0,
        tau: -1.0 / 5.0,
        t: 40.0,
    };

    /// Tolerance on angular differences (radians), centre taken literally as 1/12.
    pub const DIRECTIONAL: SigmoidParams = SigmoidParams {
        mu: 1.0 / 12.0,
        tau: -15.0,
        t: FRAC_PI_4,
    };

    /// Angular tolerance with the centre read as π/12 instead.
    pub const DIRECTIONAL_PI_12: SigmoidParams = SigmoidParams {
        mu: PI / 12.0,
        tau: -15.0,
        t: FRAC_PI_4,
    };

    #[inline]
    pub fn eval(&self, v: f64) -> f64 {
        truncated_sigmoid(v, self)
    }
}

/// `1 / (1 + exp(-tau (v - mu)))` for `v <= t`, zero beyond the cut-off.
#[inline]
pub fn truncated_sigmoid(v: f64, p: &SigmoidParams) -> f64 {
    if v <= p.t {
        1.0 / (1.0 + (-p.tau * (v - p.mu)).exp())
    } else {
        0.0
    }
}
