use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Converged,
    MaxIter,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimator_name: String,
    pub param_names: Vec<String>,
    pub phi_hat: Vec<f64>,
    /// α̂ for dual estimators, ξ for the semiparametric ones.
    pub inner_variable: Option<Vec<f64>>,
    pub objective_trace: Vec<f64>,
    pub status: Status,
    pub wall_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl EstimateReport {
    pub fn new(name: &str, param_names: Vec<String>, phi_hat: Vec<f64>, status: Status) -> Self {
        EstimateReport {
            estimator_name: name.to_string(),
            param_names,
            phi_hat,
            inner_variable: None,
            objective_trace: vec![],
            status,
            wall_time: 0.0,
            diagnostic: None,
        }
    }

    pub fn with_inner(mut self, v: Vec<f64>) -> Self {
        self.inner_variable = Some(v);
        self
    }

    pub fn with_trace(mut self, t: Vec<f64>) -> Self {
        self.objective_trace = t;
        self
    }

    pub fn with_diagnostic(mut self, d: impl Into<String>) -> Self {
        self.diagnostic = Some(d.into());
        self
    }

    pub fn timed(mut self, start: Instant) -> Self {
        self.wall_time = start.elapsed().as_secs_f64();
        self
    }

    pub fn is_degenerate(&self) -> bool {
        self.status == Status::Degenerate
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.objective_trace.last().copied()
    }
}
