//! Estimators of the composite parameters `θ = [h₁²h₂², h₁h₂g₁g₂]` from the
//! re-encoded pilot `z₃` that T₁ receives, plus the end-node estimate of
//! `[h₁², h₁h₂]` from its first-hop observation `z₁`.

pub mod lmmse;
pub mod ml;

pub use lmmse::{end_node_lmmse_z1, lmmse_estimate, LmmseEstimator, LmmseIntermediates};
pub use ml::{ml_estimate, ml_grid_oracle, ml_objective, ml_objective_derivative, MlEstimator, MlIntermediates};

use crate::numeric::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Lmmse,
    Ml,
    MlGridOracle,
    P2pBaseline,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Lmmse => "lmmse",
            Method::Ml => "ml",
            Method::MlGridOracle => "ml-grid-oracle",
            Method::P2pBaseline => "p2p-baseline",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaEstimate {
    pub theta1_hat: C64,
    pub theta2_hat: C64,
    pub method: Method,
}

impl ThetaEstimate {
    /// `(|θ̂₁ − θ₁|², |θ̂₂ − θ₂|²)`.
    pub fn squared_errors(&self, truth: (C64, C64)) -> (f64, f64) {
        ((self.theta1_hat - truth.0).norm_sqr(), (self.theta2_hat - truth.1).norm_sqr())
    }
}
