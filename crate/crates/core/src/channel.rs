//! Channel draws, power bookkeeping and amplification factors.
//!
//! Hop variances are indexed `σ²_{2i−1}` for the T₁ side (`h_i`) and `σ²_{2i}`
//! for the T₂ side (`g_i`). Relay `R_k` has power `pr[k − 1]`; in a chain of
//! `N` hop pairs the centre relay is `R_{2N−1}`.

use crate::error::{domain, Error, Result};
use crate::numeric::{projection_onto_columns, CMat, RngStream, C64};
use crate::training::TrainingSet;

#[derive(Clone, Debug, PartialEq)]
pub struct PowerProfile {
    pub p1: f64,
    pub p2: f64,
    /// Relay powers `P_{r1} .. P_{r(2N−1)}`.
    pub pr: Vec<f64>,
    /// Hop variances `σ₁² .. σ²_{2N}`.
    pub sigma2: Vec<f64>,
    pub sigma_n2: f64,
}

impl PowerProfile {
    /// Every node transmits with `power`; every hop has variance `variance`.
    pub fn equal_power(n_pairs: usize, power: f64, variance: f64, sigma_n2: f64) -> Result<Self> {
        let p = Self {
            p1: power,
            p2: power,
            pr: vec![power; 2 * n_pairs.max(1) - 1],
            sigma2: vec![variance; 2 * n_pairs],
            sigma_n2,
        };
        p.validate()?;
        Ok(p)
    }

    /// Equal powers at `snr_db` with unit noise and unit hop variances.
    pub fn from_snr_db(n_pairs: usize, snr_db: f64) -> Result<Self> {
        Self::equal_power(n_pairs, db_to_linear(snr_db), 1.0, 1.0)
    }

    pub fn n_pairs(&self) -> usize {
        self.sigma2.len() / 2
    }

    /// `σ²` of `h_i` (1-based).
    pub fn var_h(&self, i: usize) -> f64 {
        self.sigma2[2 * i - 2]
    }

    /// `σ²` of `g_i` (1-based).
    pub fn var_g(&self, i: usize) -> f64 {
        self.sigma2[2 * i - 1]
    }

    pub fn center_power(&self) -> f64 {
        self.pr[self.pr.len() - 1]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_pairs();
        if n < 2 || self.sigma2.len() != 2 * n {
            return Err(Error::Config(format!(
                "need an even number (≥ 4) of hop variances, got {}",
                self.sigma2.len()
            )));
        }
        if self.pr.len() != 2 * n - 1 {
            return Err(Error::Config(format!(
                "{} hop pairs need {} relay powers, got {}",
                n,
                2 * n - 1,
                self.pr.len()
            )));
        }
        let powers_ok = [self.p1, self.p2].iter().chain(&self.pr).all(|p| p.is_finite() && *p > 0.0);
        if !powers_ok {
            return Err(Error::Config("transmit powers must be finite and positive".into()));
        }
        if !self.sigma2.iter().all(|s| s.is_finite() && *s >= 0.0) {
            return Err(Error::Config("hop variances must be finite and nonnegative".into()));
        }
        if !(self.sigma_n2.is_finite() && self.sigma_n2 >= 0.0) {
            return Err(Error::Config("noise variance must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub h: Vec<C64>,
    pub g: Vec<C64>,
}

impl ChannelRealization {
    pub fn new(h: Vec<C64>, g: Vec<C64>) -> Result<Self> {
        if h.len() != g.len() || h.len() < 2 {
            return domain("h and g must have equal length ≥ 2");
        }
        if !h.iter().chain(&g).all(|z| z.re.is_finite() && z.im.is_finite()) {
            return domain("channel gains must be finite");
        }
        Ok(Self { h, g })
    }

    pub fn n_pairs(&self) -> usize {
        self.h.len()
    }

    pub fn conj(&self) -> Self {
        Self { h: self.h.iter().map(|z| z.conj()).collect(), g: self.g.iter().map(|z| z.conj()).collect() }
    }
}

/// Independent `h_i ~ CN(0, σ²_{2i−1})`, `g_i ~ CN(0, σ²_{2i})`.
pub fn draw_channels(profile: &PowerProfile, rng: &mut RngStream) -> Result<ChannelRealization> {
    profile.validate()?;
    let n = profile.n_pairs();
    let h = (1..=n).map(|i| rng.cgauss(profile.var_h(i))).collect();
    let g = (1..=n).map(|i| rng.cgauss(profile.var_g(i))).collect();
    Ok(ChannelRealization { h, g })
}

/// `(θ₁, θ₂) = (h₁²h₂², h₁h₂g₁g₂)` of a 4-hop realization.
pub fn composite_theta(ch: &ChannelRealization) -> (C64, C64) {
    let (h1, h2, g1, g2) = (ch.h[0], ch.h[1], ch.g[0], ch.g[1]);
    (h1 * h1 * h2 * h2, h1 * h2 * g1 * g2)
}

/// `(ϖ₁, ϖ₂) = (∏h_i², ∏h_i g_i)` over all hop pairs.
pub fn composite_varpi(ch: &ChannelRealization) -> (C64, C64) {
    let ph: C64 = ch.h.iter().product();
    let pg: C64 = ch.g.iter().product();
    (ph * ph, ph * pg)
}

/// Amplification factors of the 4-hop protocol.
#[derive(Clone, Debug, PartialEq)]
pub struct Gains {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    /// First-round gains `(α̃₁, α̃₂)` used before any relay echo exists.
    pub alpha_tilde: [f64; 2],
    /// Gain of the re-encoded pilot broadcast by R₃.
    pub alpha3_tilde: f64,
    pub xi: f64,
    pub eps: f64,
    pub a0: f64,
}

fn ratio_sqrt(num: f64, den: f64) -> Result<f64> {
    if !(den > 0.0) {
        return domain("amplification factor has a non-positive denominator");
    }
    Ok((num / den).sqrt())
}

/// All 4-hop amplification factors; `l` is the training length.
pub fn compute_gains(profile: &PowerProfile, l: usize) -> Result<Gains> {
    profile.validate()?;
    if profile.n_pairs() != 2 {
        return Err(Error::Config("4-hop gains need exactly 2 hop pairs".into()));
    }
    let [s1, s2, s3, s4] = [profile.sigma2[0], profile.sigma2[1], profile.sigma2[2], profile.sigma2[3]];
    let (p1, p2, pr1, pr2, pr3, sn) =
        (profile.p1, profile.p2, profile.pr[0], profile.pr[1], profile.pr[2], profile.sigma_n2);
    let at1 = ratio_sqrt(pr1, p1 * s1 + sn)?;
    let at2 = ratio_sqrt(pr2, p2 * s2 + sn)?;
    let a1 = ratio_sqrt(pr1, p1 * s1 + pr3 * s3 + sn)?;
    let a2 = ratio_sqrt(pr2, p2 * s2 + pr3 * s4 + sn)?;
    let a3 = ratio_sqrt(pr3, pr1 * s3 + pr2 * s4 + sn)?;
    let lf = l as f64;
    // α₁ and α₂ enter the signal terms unsquared, as printed for α̃₃
    let at3 = ratio_sqrt(
        lf * pr3,
        a1 * s1 * s3 * lf * p1 + a2 * s2 * s4 * lf * p2 + 2.0 * (a1 * a1 * s3 + a2 * a2 * s4 + 1.0) * sn,
    )?;
    let xi = 1.0 + a1 * a1 * s1;
    let eps = 2.0 * a1 * a1 * s3 + a2 * a2 * s4 + 1.0;
    let a0 = a1 * a1 * at3 * at3 * eps / xi;
    Ok(Gains { alpha1: a1, alpha2: a2, alpha3: a3, alpha_tilde: [at1, at2], alpha3_tilde: at3, xi, eps, a0 })
}

/// Prior variances of the composite parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaStatistics {
    /// `4σ₁⁴σ₃⁴`
    pub sigma_theta1_2: f64,
    /// `σ₁²σ₂²σ₃²σ₄²`
    pub sigma_theta2_2: f64,
}

impl ThetaStatistics {
    pub fn from_profile(profile: &PowerProfile) -> Self {
        let [s1, s2, s3, s4] = [profile.sigma2[0], profile.sigma2[1], profile.sigma2[2], profile.sigma2[3]];
        Self { sigma_theta1_2: 4.0 * s1 * s1 * s3 * s3, sigma_theta2_2: s1 * s2 * s3 * s4 }
    }

    /// `σ₁²σ₃²`, recovered from `σ²_{θ1}`.
    pub fn h_side_product(&self) -> f64 {
        (self.sigma_theta1_2 / 4.0).sqrt()
    }
}

/// Covariance `σ_n²(ξI + α₁²α̃₃²σ₁²σ₃²ε·P_T)` of the equivalent noise in z₃.
pub fn noise_cov_z3_lmmse(ts: &TrainingSet, gains: &Gains, stats: &ThetaStatistics, sigma_n2: f64) -> Result<CMat> {
    let pt = projection_onto_columns(&ts.t_matrix())?;
    let l = pt.nrows();
    let c = gains.alpha1.powi(2) * gains.alpha3_tilde.powi(2) * stats.h_side_product() * gains.eps;
    Ok((CMat::identity(l, l).scale(gains.xi) + pt.scale(c)).scale(sigma_n2))
}

/// Relay gains of a `2N`-hop chain.
///
/// `left[i]` is the gain of `R_{2i+1}` and `right[i]` of `R_{2i+2}`
/// (0-based `i < N − 1`). `startup` holds the first-slot gains of R₁ and R₂,
/// which forward only the end-node signal. `center` forwards data;
/// `center_pilot` scales the re-encoded pilot.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainGains {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub center: f64,
    pub center_pilot: f64,
    pub startup: [f64; 2],
}

impl ChainGains {
    pub fn n_pairs(&self) -> usize {
        self.left.len() + 1
    }

    /// Every relay, including the centre, forwards with gain 1.
    pub fn unit(n_pairs: usize) -> Self {
        let k = n_pairs - 1;
        Self { left: vec![1.0; k], right: vec![1.0; k], center: 1.0, center_pilot: 1.0, startup: [1.0; 2] }
    }

    /// Power-normalizing gains. Each non-centre relay normalizes by the two
    /// signals superimposed at it; the centre gain extends the 4-hop pilot
    /// re-encoding gain to the whole chain. Reduces to [`compute_gains`] at `N = 2`.
    pub fn from_profile(profile: &PowerProfile, l: usize) -> Result<Self> {
        profile.validate()?;
        let n = profile.n_pairs();
        let pr = &profile.pr;
        let sn = profile.sigma_n2;
        let pc = profile.center_power();
        let mut left = Vec::with_capacity(n - 1);
        let mut right = Vec::with_capacity(n - 1);
        for i in 1..n {
            let p_out = if i == 1 { profile.p1 } else { pr[2 * i - 4] };
            let p_in = if i == n - 1 { pc } else { pr[2 * i] };
            left.push(ratio_sqrt(pr[2 * i - 2], p_out * profile.var_h(i) + p_in * profile.var_h(i + 1) + sn)?);
            let p_out = if i == 1 { profile.p2 } else { pr[2 * i - 3] };
            let p_in = if i == n - 1 { pc } else { pr[2 * i + 1] };
            right.push(ratio_sqrt(pr[2 * i - 1], p_out * profile.var_g(i) + p_in * profile.var_g(i + 1) + sn)?);
        }
        let lf = l as f64;
        let prod_h: f64 = (1..=n).map(|i| profile.var_h(i)).product();
        let prod_g: f64 = (1..=n).map(|i| profile.var_g(i)).product();
        let g1: f64 = left.iter().product();
        let g2: f64 = right.iter().product();
        let mut fwd = 1.0;
        for k in 1..n {
            fwd += (k..n).map(|i| left[i - 1].powi(2) * profile.var_h(i + 1)).product::<f64>();
            fwd += (k..n).map(|i| right[i - 1].powi(2) * profile.var_g(i + 1)).product::<f64>();
        }
        let center_pilot =
            ratio_sqrt(lf * pc, g1 * prod_h * lf * profile.p1 + g2 * prod_g * lf * profile.p2 + 2.0 * fwd * sn)?;
        let (pl, pr_) = (pr[2 * n - 4], pr[2 * n - 3]);
        let center = ratio_sqrt(pc, pl * profile.var_h(n) + pr_ * profile.var_g(n) + sn)?;
        let startup = [
            ratio_sqrt(pr[0], profile.p1 * profile.var_h(1) + sn)?,
            ratio_sqrt(pr[1], profile.p2 * profile.var_g(1) + sn)?,
        ];
        Ok(Self { left, right, center, center_pilot, startup })
    }

    /// 4-hop chain gains with `α̃₁, α̃₂` as the first-round gains of R₁, R₂.
    pub fn from_gains(g: &Gains) -> Self {
        Self {
            left: vec![g.alpha1],
            right: vec![g.alpha2],
            center: g.alpha3,
            center_pilot: g.alpha3_tilde,
            startup: g.alpha_tilde,
        }
    }
}
