//! Training round of the 4-hop chain `T₁ – R₁ – R₃ – R₂ – T₂`.
//!
//! Phase 1: T₁, T₂ send `t₁`, `t₂` while R₃ sends `t_r`.
//! Phase 2: R₁, R₂ forward; T₁, T₂ and R₃ listen.
//! R₃ then least-squares estimates `[h₁h₂, g₁g₂, α₁h₂²+α₂g₂²]`, re-encodes
//! the first two entries onto `T = [t₁, t₂]` and broadcasts; R₁ forwards the
//! result to T₁, which observes `z₃ = α₁α̃₃·T·Λ·θ + ñ`.

use crate::channel::{composite_theta, ChannelRealization, Gains};
use crate::error::{domain, Result};
use crate::numeric::{pseudo_inverse, CVec, RngStream, C64};
use crate::training::TrainingSet;

use super::noise;

/// R₃'s estimate of `[h₁h₂, g₁g₂, α₁h₂² + α₂g₂²]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelaySelfEstimate {
    pub h_r1_hat: [C64; 3],
}

impl RelaySelfEstimate {
    /// Coefficient of R₃'s own previous transmission in what it receives.
    pub fn echo(&self) -> C64 {
        self.h_r1_hat[2]
    }
}

#[derive(Clone, Debug)]
pub struct FourHopTrainingObservation {
    pub r1: CVec,
    pub r2: CVec,
    pub r3: CVec,
    pub z1: CVec,
    pub z2: CVec,
    pub z3: CVec,
    pub relay_estimate: RelaySelfEstimate,
    /// Noise left on R₃'s re-encoded pilot before scaling by `α̃₃`.
    pub relay_residual: CVec,
    /// `z₃ − α₁α̃₃·T·Λ·θ`.
    pub equivalent_noise: CVec,
    pub true_theta: (C64, C64),
}

/// `ĥ_{r1} = Λ₀⁻¹ T_r† r₃` with `Λ₀ = diag(α₁, α₂, 1)`.
pub fn ls_estimate_relay(r3: &CVec, ts: &TrainingSet, gains: &Gains) -> Result<RelaySelfEstimate> {
    let v = pseudo_inverse(&ts.tr_matrix())? * r3;
    Ok(RelaySelfEstimate { h_r1_hat: [v[0] / gains.alpha1, v[1] / gains.alpha2, v[2]] })
}

pub fn run_training_round_4hop(
    ch: &ChannelRealization,
    gains: &Gains,
    ts: &TrainingSet,
    sigma_n2: f64,
    rng: &mut RngStream,
) -> Result<FourHopTrainingObservation> {
    if !(sigma_n2 >= 0.0) {
        return domain("noise variance must be nonnegative");
    }
    if ch.n_pairs() != 2 {
        return domain("4-hop training needs a 2-pair realization");
    }
    let l = ts.len();
    let (h1, h2, g1, g2) = (ch.h[0], ch.h[1], ch.g[0], ch.g[1]);
    let (a1, a2, at3) = (gains.alpha1, gains.alpha2, gains.alpha3_tilde);

    let n1 = noise(l, sigma_n2, rng);
    let n2 = noise(l, sigma_n2, rng);
    let n3 = noise(l, sigma_n2, rng);
    let nz1 = noise(l, sigma_n2, rng);
    let nz2 = noise(l, sigma_n2, rng);
    let n1b = noise(l, sigma_n2, rng);
    let nz3 = noise(l, sigma_n2, rng);

    let r1 = &ts.t1 * h1 + &ts.tr * h2 + &n1;
    let r2 = &ts.t2 * g1 + &ts.tr * g2 + &n2;
    let z1 = &r1 * (h1 * a1) + nz1;
    let z2 = &r2 * (g1 * a2) + nz2;
    let r3 = &r1 * (h2 * a1) + &r2 * (g2 * a2) + n3;

    let est = ls_estimate_relay(&r3, ts, gains)?;
    let [e1, e2, _] = est.h_r1_hat;
    let reencoded = &ts.t1 * (e1 * a1) + &ts.t2 * (e2 * a2);
    let clean = &ts.t1 * (h1 * h2 * a1) + &ts.t2 * (g1 * g2 * a2);
    let relay_residual = &reencoded - &clean;
    let r3_tilde = reencoded * C64::from(at3);
    let z3 = (&r3_tilde * h2 + n1b) * (h1 * a1) + nz3;

    let theta = composite_theta(ch);
    let signal = &ts.t1 * (theta.0 * a1 * a1 * at3) + &ts.t2 * (theta.1 * a1 * a2 * at3);
    let equivalent_noise = &z3 - signal;
    Ok(FourHopTrainingObservation {
        r1,
        r2,
        r3,
        z1,
        z2,
        z3,
        relay_estimate: est,
        relay_residual,
        equivalent_noise,
        true_theta: theta,
    })
}
