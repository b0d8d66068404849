//! Reference scheme without network coding: every hop is trained on its own
//! with pilot `t₁`, and `θ` is assembled from the per-hop LS estimates.

use crate::channel::{composite_theta, ChannelRealization};
use crate::error::{domain, Result};
use crate::estimators::{Method, ThetaEstimate};
use crate::numeric::{inner, RngStream, C64};
use crate::training::TrainingSet;

use super::noise;

/// `ĥ = t₁ᴴ(h·t₁ + n)/Q₁` for each of `h₁, h₂, g₁, g₂`, then
/// `θ̂₁ = ĥ₁²ĥ₂²`, `θ̂₂ = ĥ₁ĥ₂ĝ₁ĝ₂`.
pub fn point_to_point_baseline(
    ch: &ChannelRealization,
    ts: &TrainingSet,
    sigma_n2: f64,
    rng: &mut RngStream,
) -> Result<ThetaEstimate> {
    if ch.n_pairs() != 2 {
        return domain("the baseline needs a 2-pair realization");
    }
    if !(sigma_n2 >= 0.0) {
        return domain("noise variance must be nonnegative");
    }
    let l = ts.len();
    let mut hop = |h: C64| inner(&ts.t1, &(&ts.t1 * h + noise(l, sigma_n2, rng))) / ts.q1;
    let (h1, h2, g1, g2) = (hop(ch.h[0]), hop(ch.h[1]), hop(ch.g[0]), hop(ch.g[1]));
    Ok(ThetaEstimate { theta1_hat: h1 * h1 * h2 * h2, theta2_hat: h1 * h2 * g1 * g2, method: Method::P2pBaseline })
}

/// Squared errors of the baseline against the true `θ`.
pub fn baseline_squared_errors(
    ch: &ChannelRealization,
    ts: &TrainingSet,
    sigma_n2: f64,
    rng: &mut RngStream,
) -> Result<(f64, f64)> {
    Ok(point_to_point_baseline(ch, ts, sigma_n2, rng)?.squared_errors(composite_theta(ch)))
}
