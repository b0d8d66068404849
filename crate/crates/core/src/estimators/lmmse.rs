//! Linear MMSE estimation of `θ` from `z₃ = α₁α̃₃·T·Λ·θ + ñ`.
//!
//! `θ̂ = α₁α̃₃·R_θ·Λ·Tᴴ·R_{z₃}⁻¹·z₃` with
//! `R_{z₃} = α₁²α̃₃²·T·Λ·R_θ·Λ·Tᴴ + R_ñ`. The gain matrix depends only on the
//! configuration, so [`LmmseEstimator`] computes it once.

use crate::channel::{noise_cov_z3_lmmse, Gains, PowerProfile, ThetaStatistics};
use crate::error::{domain, Error, Result};
use crate::numeric::{inner, CMat, CVec, C64};
use crate::training::TrainingSet;

use super::{Method, ThetaEstimate};

/// Scalars of the rank-two form
/// `R_{z₃} = σ_n²ξ(I + A₁t₁t₁ᴴ + A₂t₂t₂ᴴ + A₃t₁t₂ᴴ + A₃*t₂t₁ᴴ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LmmseIntermediates {
    pub a1: f64,
    pub a2: f64,
    pub a3: C64,
    /// `det(I + TᴴT·A)` with `A = [[A₁, A₃], [A₃*, A₂]]`.
    pub tau: f64,
    /// The same determinant with the signal terms of `A₁, A₂` removed.
    pub tau_star: f64,
    /// `b / (1 + a)²`
    pub nu: f64,
    /// `1 − |ρ|²`
    pub x: f64,
    /// `α₁²α̃₃²σ₁²σ₃²ε / ξ`
    pub a: f64,
    /// `α₁²α̃₃² / (σ_n²ξ)`
    pub b: f64,
}

fn rank_two_det(a1: f64, a2: f64, a3: C64, ts: &TrainingSet, x: f64) -> f64 {
    let sq = (ts.q1 * ts.q2).sqrt();
    1.0 + a1 * ts.q1 + a2 * ts.q2 + 2.0 * (a3 * ts.rho.conj()).re * sq + (a1 * a2 - a3.norm_sqr()) * x * ts.q1 * ts.q2
}

impl LmmseIntermediates {
    pub fn compute(ts: &TrainingSet, gains: &Gains, stats: &ThetaStatistics, sigma_n2: f64) -> Result<Self> {
        if !(sigma_n2 > 0.0) {
            return domain("LMMSE needs a positive noise variance");
        }
        let x = 1.0 - ts.rho.norm_sqr();
        if !(x > 0.0) {
            return domain("LMMSE needs |rho| < 1");
        }
        let g2 = gains.alpha1.powi(2) * gains.alpha3_tilde.powi(2);
        let a = g2 * stats.h_side_product() * gains.eps / gains.xi;
        let b = g2 / (sigma_n2 * gains.xi);
        let n1 = a / (ts.q1 * x);
        let n2 = a / (ts.q2 * x);
        let a3 = -ts.rho * (a / ((ts.q1 * ts.q2).sqrt() * x));
        let a1 = b * gains.alpha1.powi(2) * stats.sigma_theta1_2 + n1;
        let a2 = b * gains.alpha2.powi(2) * stats.sigma_theta2_2 + n2;
        Ok(Self {
            a1,
            a2,
            a3,
            tau: rank_two_det(a1, a2, a3, ts, x),
            tau_star: rank_two_det(n1, n2, a3, ts, x),
            nu: b / (1.0 + a).powi(2),
            x,
            a,
            b,
        })
    }

    /// `t₁ᴴR_{z₃}⁻¹t₁` and `t₂ᴴR_{z₃}⁻¹t₂` in rational form.
    pub fn quadratic_forms(&self, ts: &TrainingSet, gains: &Gains, sigma_n2: f64) -> (f64, f64) {
        let d = self.tau * gains.xi * sigma_n2;
        let qq = self.x * ts.q1 * ts.q2;
        ((ts.q1 + self.a2 * qq) / d, (ts.q2 + self.a1 * qq) / d)
    }
}

#[derive(Clone, Debug)]
pub struct LmmseEstimator {
    w: CMat,
    r_z: CMat,
    pub intermediates: LmmseIntermediates,
}

impl LmmseEstimator {
    /// The gain is formed through the `2 × 2` system
    /// `Tᴴ·R_{z₃}⁻¹ = (I + TᴴT·A)⁻¹·Tᴴ / (σ_n²ξ)`, which stays well conditioned
    /// as `σ_n² → 0`.
    pub fn new(ts: &TrainingSet, gains: &Gains, stats: &ThetaStatistics, sigma_n2: f64) -> Result<Self> {
        let im = LmmseIntermediates::compute(ts, gains, stats, sigma_n2)?;
        let t = ts.t_matrix();
        let k = gains.alpha1 * gains.alpha3_tilde;
        let lam_rt = CMat::from_diagonal(&CVec::from_vec(vec![
            C64::from(gains.alpha1 * stats.sigma_theta1_2),
            C64::from(gains.alpha2 * stats.sigma_theta2_2),
        ]));
        let lam = CMat::from_diagonal(&CVec::from_vec(vec![C64::from(gains.alpha1), C64::from(gains.alpha2)]));
        let r_z = (&t * &lam_rt * &lam * t.adjoint()).scale(k * k) + noise_cov_z3_lmmse(ts, gains, stats, sigma_n2)?;
        let a = CMat::from_row_slice(2, 2, &[C64::from(im.a1), im.a3, im.a3.conj(), C64::from(im.a2)]);
        let core = CMat::identity(2, 2) + t.adjoint() * &t * a;
        let core_inv = core.try_inverse().ok_or_else(|| Error::Singular("LMMSE core matrix".into()))?;
        let w = (lam_rt * core_inv * t.adjoint()).scale(k / (sigma_n2 * gains.xi));
        Ok(Self { w, r_z, intermediates: im })
    }

    pub fn r_z3(&self) -> &CMat {
        &self.r_z
    }

    /// The `2 × L` matrix mapping `z₃` to `θ̂`.
    pub fn gain_matrix(&self) -> &CMat {
        &self.w
    }

    pub fn estimate(&self, z3: &CVec) -> ThetaEstimate {
        let v = &self.w * z3;
        ThetaEstimate { theta1_hat: v[0], theta2_hat: v[1], method: Method::Lmmse }
    }
}

pub fn lmmse_estimate(
    z3: &CVec,
    ts: &TrainingSet,
    gains: &Gains,
    stats: &ThetaStatistics,
    sigma_n2: f64,
) -> Result<ThetaEstimate> {
    Ok(LmmseEstimator::new(ts, gains, stats, sigma_n2)?.estimate(z3))
}

/// Scalar LMMSE estimates of `[h₁², h₁h₂]` from
/// `z₁ = α₁(h₁²t₁ + h₁h₂t_r) + α₁h₁n₁ + n_{z₁}`, using the priors
/// `E|h₁²|² = 2σ₁⁴`, `E|h₁h₂|² = σ₁²σ₃²` and the channel-averaged noise
/// variance `σ_n²ξ`. The pilots are orthogonal so the two decouple.
pub fn end_node_lmmse_z1(
    z1: &CVec,
    ts: &TrainingSet,
    gains: &Gains,
    profile: &PowerProfile,
    sigma_n2: f64,
) -> (C64, C64) {
    let a1 = gains.alpha1;
    let (s1, s3) = (profile.var_h(1), profile.var_h(2));
    let est = |t: &CVec, q: f64, v: f64| inner(t, z1) * (a1 * v / (a1 * a1 * v * q + sigma_n2 * gains.xi));
    (est(&ts.t1, ts.q1, 2.0 * s1 * s1), est(&ts.tr, ts.qr, s1 * s3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::compute_gains;
    use crate::numeric::{invert_hermitian, max_abs_diff, RngStream};
    use crate::training::build_training;
    use proptest::prelude::*;

    fn setup(snr_db: f64, rho: C64, qk: f64) -> (PowerProfile, Gains, ThetaStatistics, TrainingSet) {
        let p = PowerProfile::from_snr_db(2, snr_db).unwrap();
        let g = compute_gains(&p, 8).unwrap();
        let st = ThetaStatistics::from_profile(&p);
        let ts = build_training(8, rho, qk * 8.0 * p.p1, qk * 8.0 * p.p2, 8.0 * p.pr[2]).unwrap();
        (p, g, st, ts)
    }

    #[test]
    fn zero_input_gives_zero() {
        let (_, g, st, ts) = setup(10.0, C64::new(0.5, 0.0), 1.0);
        let e = lmmse_estimate(&CVec::zeros(8), &ts, &g, &st, 1.0).unwrap();
        assert_eq!((e.theta1_hat, e.theta2_hat), (C64::new(0.0, 0.0), C64::new(0.0, 0.0)));
        assert_eq!(e.method, Method::Lmmse);
    }

    #[test]
    fn consistent_as_noise_vanishes() {
        let (_, g, st, ts) = setup(10.0, C64::new(0.3, 0.0), 1.0);
        let theta = (C64::new(0.8, -0.4), C64::new(-0.2, 1.1));
        let z = (&ts.t1 * (theta.0 * g.alpha1) + &ts.t2 * (theta.1 * g.alpha2)) * C64::from(g.alpha1 * g.alpha3_tilde);
        let e = lmmse_estimate(&z, &ts, &g, &st, 1e-8).unwrap();
        assert!((e.theta1_hat - theta.0).norm() < 1e-3 * theta.0.norm());
        assert!((e.theta2_hat - theta.1).norm() < 1e-3 * theta.1.norm());
    }

    #[test]
    fn gain_matches_direct_inverse() {
        for (snr, rho) in [(0.0, 0.0), (10.0, 0.5), (25.0, 0.9)] {
            let (_, g, st, ts) = setup(snr, C64::new(rho, 0.0), 1.0);
            let est = LmmseEstimator::new(&ts, &g, &st, 1.0).unwrap();
            let t = ts.t_matrix();
            let rt = CMat::from_diagonal(&CVec::from_vec(vec![
                C64::from(st.sigma_theta1_2 * g.alpha1),
                C64::from(st.sigma_theta2_2 * g.alpha2),
            ]));
            let direct = (rt * t.adjoint() * invert_hermitian(est.r_z3()).unwrap()).scale(g.alpha1 * g.alpha3_tilde);
            let scale = direct.iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(max_abs_diff(est.gain_matrix(), &direct) < 1e-10 * scale);
        }
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let (_, g, st, ts) = setup(10.0, C64::new(0.3, 0.0), 1.0);
        assert!(LmmseEstimator::new(&ts, &g, &st, 0.0).is_err());
    }

    #[test]
    fn end_node_estimate_is_exact_without_noise() {
        let (p, g, _, ts) = setup(10.0, C64::new(0.0, 0.0), 1.0);
        let (h1, h2) = (C64::new(0.7, 0.2), C64::new(-1.1, 0.4));
        let z1 = (&ts.t1 * (h1 * h1) + &ts.tr * (h1 * h2)) * C64::from(g.alpha1);
        let (a, b) = end_node_lmmse_z1(&z1, &ts, &g, &p, 0.0);
        assert!((a - h1 * h1).norm() < 1e-12 && (b - h1 * h2).norm() < 1e-12);
    }

    /// The expanded per-parameter estimators, with the conjugations and the
    /// second pilot of each bracket fixed: the `t₂ᴴ` inside the second term of
    /// θ̂₂ multiplies `t₁ᴴ`, and the cross terms carry `A₃, ρ` (θ̂₁) and
    /// `A₃*, ρ*` (θ̂₂). For real ρ only the pilot swap matters.
    fn expanded(z: &CVec, ts: &TrainingSet, g: &Gains, st: &ThetaStatistics, sn: f64) -> (C64, C64) {
        let im = LmmseIntermediates::compute(ts, g, st, sn).unwrap();
        let sq = (ts.q1 * ts.q2).sqrt();
        let d = im.tau * g.xi * sn;
        let (t1z, t2z) = (inner(&ts.t1, z), inner(&ts.t2, z));
        let c1 = C64::from(1.0 + im.a2 * ts.q2) + im.a3.conj() * ts.rho * sq;
        let c2 = im.a3 * ts.q1 + ts.rho * (im.a2 * sq);
        let th1 = (c1 * t1z - c2 * t2z) * (g.alpha1.powi(2) * g.alpha3_tilde * st.sigma_theta1_2 / d);
        let c3 = C64::from(1.0 + im.a1 * ts.q1) + im.a3.conj() * ts.rho * sq;
        let c4 = im.a3.conj() * ts.q2 + ts.rho.conj() * (im.a1 * sq);
        let th2 = (c3 * t2z - c4 * t1z) * (g.alpha1 * g.alpha2 * g.alpha3_tilde * st.sigma_theta2_2 / d);
        (th1, th2)
    }

    #[test]
    fn tau_star_identity() {
        for (snr, rho) in [(0.0, 0.0), (10.0, 0.5), (20.0, 0.9), (30.0, 0.3)] {
            let (_, g, st, ts) = setup(snr, C64::new(rho, 0.0), 1.0);
            let im = LmmseIntermediates::compute(&ts, &g, &st, 1.0).unwrap();
            assert!((im.tau_star - (1.0 + im.a).powi(2)).abs() < 1e-12 * im.tau_star);
        }
    }

    proptest! {
        #[test]
        fn matrix_and_expanded_forms_agree(snr in -5.0f64..35.0, re in -0.9f64..0.9, im in -0.4f64..0.4,
                                           qk in 0.2f64..4.0, seed in any::<u64>()) {
            prop_assume!(re * re + im * im < 0.95);
            let (_, g, st, ts) = setup(snr, C64::new(re, im), qk);
            let mut rng = RngStream::new(seed, 0);
            let z = crate::numeric::sample_cgauss(8, 3.0, &mut rng).unwrap();
            let est = lmmse_estimate(&z, &ts, &g, &st, 1.0).unwrap();
            let (e1, e2) = expanded(&z, &ts, &g, &st, 1.0);
            prop_assert!((est.theta1_hat - e1).norm() <= 1e-9 * e1.norm().max(1e-12));
            prop_assert!((est.theta2_hat - e2).norm() <= 1e-9 * e2.norm().max(1e-12));
        }

        #[test]
        fn rank_two_form_reproduces_r_z(snr in -5.0f64..35.0, re in -0.9f64..0.9, im in -0.4f64..0.4) {
            prop_assume!(re * re + im * im < 0.95);
            let (_, g, st, ts) = setup(snr, C64::new(re, im), 1.0);
            let est = LmmseEstimator::new(&ts, &g, &st, 1.0).unwrap();
            let i = est.intermediates;
            let (t1, t2) = (&ts.t1, &ts.t2);
            let m = CMat::identity(8, 8)
                + (t1 * t1.adjoint()).scale(i.a1)
                + (t2 * t2.adjoint()).scale(i.a2)
                + t1 * t2.adjoint() * i.a3
                + t2 * t1.adjoint() * i.a3.conj();
            let want = m.scale(g.xi);
            prop_assert!(max_abs_diff(est.r_z3(), &want) < 1e-9 * want.iter().map(|z| z.norm()).fold(0.0, f64::max));
            let inv = invert_hermitian(est.r_z3()).unwrap();
            let (f1, f2) = i.quadratic_forms(&ts, &g, 1.0);
            prop_assert!(((t1.adjoint() * &inv * t1)[(0, 0)].re - f1).abs() < 1e-9 * f1);
            prop_assert!(((t2.adjoint() * &inv * t2)[(0, 0)].re - f2).abs() < 1e-9 * f2);
        }
    }
}
