//! Built-in equations. Each acts elementwise on the state, so the dimension
//! is the length of `u0`, and each has a closed-form solution used as the
//! reference in rate studies and for simulating data.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemName {
    /// `u_t = 0`.
    Constant,
    /// `u_t = −θ₁ u`.
    LinearDecay,
    /// `u_t = 1`.
    Forced,
    /// `u_t = θ₁ u (1 − u/θ₂)`.
    Logistic,
}

pub type Field = fn(f64, &[f64], &[f64]) -> Vec<f64>;

fn constant(_: f64, u: &[f64], _: &[f64]) -> Vec<f64> {
    vec![0.0; u.len()]
}

fn linear_decay(_: f64, u: &[f64], th: &[f64]) -> Vec<f64> {
    u.iter().map(|v| -th[0] * v).collect()
}

fn forced(_: f64, u: &[f64], _: &[f64]) -> Vec<f64> {
    vec![1.0; u.len()]
}

fn logistic(_: f64, u: &[f64], th: &[f64]) -> Vec<f64> {
    u.iter().map(|v| th[0] * v * (1.0 - v / th[1])).collect()
}

impl ProblemName {
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemName::Constant => "constant",
            ProblemName::LinearDecay => "linear-decay",
            ProblemName::Forced => "forced",
            ProblemName::Logistic => "logistic",
        }
    }

    pub fn theta_len(self) -> usize {
        match self {
            ProblemName::Constant | ProblemName::Forced => 0,
            ProblemName::LinearDecay => 1,
            ProblemName::Logistic => 2,
        }
    }

    pub fn field(self) -> Field {
        match self {
            ProblemName::Constant => constant,
            ProblemName::LinearDecay => linear_decay,
            ProblemName::Forced => forced,
            ProblemName::Logistic => logistic,
        }
    }

    /// Exact solution at `t` from `u(0) = u0`.
    pub fn analytic(self, theta: &[f64], u0: &[f64], t: f64) -> Vec<f64> {
        u0.iter()
            .map(|&a| match self {
                ProblemName::Constant => a,
                ProblemName::LinearDecay => a * (-theta[0] * t).exp(),
                ProblemName::Forced => a + t,
                ProblemName::Logistic => {
                    let (r, k) = (theta[0], theta[1]);
                    k * a / (a + (k - a) * (-r * t).exp())
                }
            })
            .collect()
    }
}
