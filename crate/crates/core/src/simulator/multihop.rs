//! Pilot relaying over a `2N`-hop chain.
//!
//! `t₁` and `t₂` are amplified and forwarded hop by hop towards the centre,
//! each relay adding its own noise. The centre sends `t_r` while its two
//! neighbours forward, so its echo arrives alongside the pilots and is removed
//! by least squares on `[t₁, t₂, t_r]`. The centre re-encodes the remaining
//! two coefficients onto `T`, and the result travels back through the left
//! relays to T₁:
//!
//! ```text
//! z₁⁽ᴺ⁾ = α_c·G₁·T·diag(G₁, G₂)·[ϖ₁, ϖ₂]ᵀ + ñ_z,   G₁ = ∏α_{2i−1}, G₂ = ∏α_{2i}
//! ```
//!
//! For `N > 2` every cancelling relay, the centre included, learns one echo
//! coefficient per neighbour in dedicated slots: it sends `t_r`, one
//! neighbour forwards it once, and it projects what comes back onto `t_r`.
//! For `N = 2` the centre's neighbours do not cancel, so only the sum of its
//! two coefficients matters and the LS estimate above supplies it. T₁
//! overhears R₁'s forwarding in the first hop and in position 2's left echo
//! slot, which gives it `h₁²` and `h₁h₂`.

use std::cmp::Ordering;

use crate::channel::{composite_varpi, ChainGains, ChannelRealization};
use crate::error::{domain, Error, Result};
use crate::numeric::{inner, pseudo_inverse, CVec, RngStream, C64, ZERO};
use crate::training::TrainingSet;

use super::exchange::{EndNodeCsi, EstimatedCsi};
use super::noise;

#[derive(Clone, Debug)]
pub struct MultiHopTrainingObservation {
    pub n_pairs: usize,
    /// Re-encoded pilot as received by T₁.
    pub z1n: CVec,
    /// T₁'s copy of R₁'s first forwarding slot.
    pub z1_first: CVec,
    /// T₁'s copy of R₁ forwarding position 2's echo pilot (`N > 2` only).
    pub z1_echo: Option<CVec>,
    /// LS coefficients of `[t₁, t₂, t_r]` at the centre.
    pub center_ls: [C64; 3],
    /// Echo coefficients `[via left, via right]` per chain position (zero
    /// where unused).
    pub relay_echo: Vec<[C64; 2]>,
    pub true_varpi: (C64, C64),
}

fn check(ch: &ChannelRealization, gains: &ChainGains, sigma_n2: f64) -> Result<usize> {
    let n = ch.n_pairs();
    if n < 2 {
        return domain("need at least 2 hop pairs");
    }
    if gains.n_pairs() != n || gains.right.len() != n - 1 {
        return Err(Error::Config("chain gains do not match the realization".into()));
    }
    if !(sigma_n2 >= 0.0) {
        return domain("noise variance must be nonnegative");
    }
    Ok(n)
}

pub fn run_training_2nhop(
    ch: &ChannelRealization,
    gains: &ChainGains,
    ts: &TrainingSet,
    sigma_n2: f64,
    rng: &mut RngStream,
) -> Result<MultiHopTrainingObservation> {
    let n = check(ch, gains, sigma_n2)?;
    let l = ts.len();
    let last = 2 * n;

    // towards the centre; the last relay on each side also hears t_r
    let forward = |first: &CVec, links: &[C64], amp: &[f64], rng: &mut RngStream| -> (CVec, CVec) {
        let mut sig = first.clone();
        let mut overheard = CVec::zeros(l);
        for i in 0..n - 1 {
            let mut y = &sig * links[i] + noise(l, sigma_n2, rng);
            if i == n - 2 {
                y += &ts.tr * links[n - 1];
            }
            sig = y * C64::from(amp[i]);
            if i == 0 {
                overheard = &sig * links[0] + noise(l, sigma_n2, rng);
            }
        }
        (sig, overheard)
    };
    let (left_out, z1_first) = forward(&ts.t1, &ch.h, &gains.left, rng);
    let (right_out, _) = forward(&ts.t2, &ch.g, &gains.right, rng);

    let yc = &left_out * ch.h[n - 1] + &right_out * ch.g[n - 1] + noise(l, sigma_n2, rng);
    let v = pseudo_inverse(&ts.tr_matrix())? * &yc;
    let center_ls = [v[0], v[1], v[2]];

    let mut sig = (&ts.t1 * v[0] + &ts.t2 * v[1]) * C64::from(gains.center_pilot);
    for i in (0..n - 1).rev() {
        sig = (&sig * ch.h[i + 1] + noise(l, sigma_n2, rng)) * C64::from(gains.left[i]);
    }
    let z1n = &sig * ch.h[0] + noise(l, sigma_n2, rng);

    // echo slots of the cancelling relays, one per neighbour
    let mut relay_echo = vec![[ZERO; 2]; last + 1];
    let mut z1_echo = None;
    let links: Vec<C64> = ch.h.iter().chain(ch.g.iter().rev()).copied().collect();
    let gain_at = |p: usize| match p.cmp(&n) {
        Ordering::Less => gains.left[p - 1],
        Ordering::Equal => gains.center,
        Ordering::Greater => gains.right[last - p - 1],
    };
    for p in 2..=last - 2 {
        if n == 2 {
            relay_echo[p] = [v[2], ZERO];
            continue;
        }
        for (side, q) in [(0, p - 1), (1, p + 1)] {
            let link = links[p.min(q)];
            let fwd = (&ts.tr * link + noise(l, sigma_n2, rng)) * C64::from(gain_at(q));
            if p == 2 && q == 1 {
                z1_echo = Some(&fwd * links[0] + noise(l, sigma_n2, rng));
            }
            let back = fwd * link + noise(l, sigma_n2, rng);
            relay_echo[p][side] = inner(&ts.tr, &back) / ts.qr;
        }
    }

    Ok(MultiHopTrainingObservation {
        n_pairs: n,
        z1n,
        z1_first,
        z1_echo,
        center_ls,
        relay_echo,
        true_varpi: composite_varpi(ch),
    })
}

/// `(G₁, G₂)`: products of left and right relay gains.
pub fn side_gain_products(gains: &ChainGains) -> (f64, f64) {
    (gains.left.iter().product(), gains.right.iter().product())
}

/// Least-squares `(ϖ̂₁, ϖ̂₂)` from `z₁⁽ᴺ⁾`.
pub fn ls_varpi(z1n: &CVec, ts: &TrainingSet, gains: &ChainGains) -> Result<(C64, C64)> {
    let v = pseudo_inverse(&ts.t_matrix())? * z1n;
    let (g1, g2) = side_gain_products(gains);
    let k = gains.center_pilot * g1;
    Ok((v[0] / (k * g1), v[1] / (k * g2)))
}

/// CSI for the data exchange learned from one training round.
pub fn estimated_csi(obs: &MultiHopTrainingObservation, ts: &TrainingSet, gains: &ChainGains) -> Result<EstimatedCsi> {
    let a1 = gains.left[0];
    let h1_sq = inner(&ts.t1, &obs.z1_first) / (a1 * ts.q1);
    let h1h2 = match &obs.z1_echo {
        Some(z) => inner(&ts.tr, z) / (a1 * ts.qr),
        None => inner(&ts.tr, &obs.z1_first) / (a1 * ts.qr),
    };
    let (_, cross) = ls_varpi(&obs.z1n, ts, gains)?;
    Ok(EstimatedCsi { end: EndNodeCsi { h1_sq, bounce: h1h2 * h1h2, cross }, relay_echo: obs.relay_echo.clone() })
}
