//! Maximum-likelihood estimation of `θ` from `z₃`, treating `θ` as
//! deterministic.
//!
//! The equivalent noise has covariance `R = s(I + a·P_T)` with
//! `s = σ_n²ξ` and `a = a₀|θ₁|`, so the likelihood depends on `|θ₁|` through
//! both the mean and the covariance. Concentrating out `θ₂` and the phase of
//! `θ₁` leaves a scalar objective `f(a)` whose stationary points solve a
//! quadratic `C₁a² + C₂a + C₃ = 0`.

use crate::channel::Gains;
use crate::error::{domain, Result};
use crate::numeric::{inner, projection_onto_columns, CMat, CVec, C64};
use crate::training::TrainingSet;

use super::{Method, ThetaEstimate};

/// Below this `1 − |ρ|²` the pilots are treated as collinear.
const COLLINEAR_TOL: f64 = 1e-10;

/// Points of the brute-force search in [`ml_grid_oracle`].
pub const GRID_POINTS: usize = 100_000;

/// Per-observation quantities of the closed-form ML solution.
#[derive(Clone, Debug)]
pub struct MlIntermediates {
    /// `B` at the estimate: the concentrated quadratic form with `Bt₂ = 0`.
    pub b: CMat,
    /// Rank of `P_T`.
    pub r: usize,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub a_hat: f64,
    /// Phase of `θ̂₁`.
    pub phase1: f64,
}

/// Sufficient statistics of one observation.
struct Stats {
    norm2: f64,
    /// `zᴴP_Tz`
    proj: f64,
    /// `|zᴴt₂|²/Q₂`
    t2_energy: f64,
    /// `zᴴt₁ − ρ*√(Q₁/Q₂)·zᴴt₂`
    u: C64,
}

#[derive(Clone, Debug)]
pub struct MlEstimator {
    ts: TrainingSet,
    pt: CMat,
    r: usize,
    x: f64,
    s: f64,
    a0: f64,
    /// `α₁²α̃₃`
    k1: f64,
    /// `α₁α₂α̃₃`
    k2: f64,
}

impl MlEstimator {
    pub fn new(ts: &TrainingSet, gains: &Gains, sigma_n2: f64) -> Result<Self> {
        if !(sigma_n2 > 0.0) {
            return domain("ML needs a positive noise variance");
        }
        if !(gains.a0 > 0.0) {
            return domain("ML needs a0 > 0");
        }
        let x = (1.0 - ts.rho.norm_sqr()).max(0.0);
        let pt = if x < COLLINEAR_TOL {
            (&ts.t1 * ts.t1.adjoint()).unscale(ts.q1)
        } else {
            projection_onto_columns(&ts.t_matrix())?
        };
        let r = pt.trace().re.round() as usize;
        Ok(Self {
            ts: ts.clone(),
            pt,
            r,
            x,
            s: sigma_n2 * gains.xi,
            a0: gains.a0,
            k1: gains.alpha1.powi(2) * gains.alpha3_tilde,
            k2: gains.alpha1 * gains.alpha2 * gains.alpha3_tilde,
        })
    }

    pub fn rank(&self) -> usize {
        self.r
    }

    fn stats(&self, z: &CVec) -> Stats {
        let ts = &self.ts;
        let zt1 = inner(z, &ts.t1);
        let zt2 = inner(z, &ts.t2);
        Stats {
            norm2: z.norm_squared(),
            proj: (z.adjoint() * &self.pt * z)[(0, 0)].re,
            t2_energy: zt2.norm_sqr() / ts.q2,
            u: zt1 - ts.rho.conj() * (ts.q1 / ts.q2).sqrt() * zt2,
        }
    }

    /// `c = α₁²α̃₃/a₀`, so that `α₁²α̃₃|θ₁| = c·a`.
    fn c(&self) -> f64 {
        self.k1 / self.a0
    }

    fn objective_from(&self, st: &Stats, a: f64) -> f64 {
        let (s, c) = (self.s, self.c());
        let quad = (st.norm2 - a / (1.0 + a) * st.proj - st.t2_energy / (1.0 + a)) / s;
        quad - 2.0 * c * a * st.u.norm() / (s * (1.0 + a))
            + (c * a).powi(2) * self.x * self.ts.q1 / (s * (1.0 + a))
            + self.r as f64 * (1.0 + a).ln()
    }

    fn coefficients(&self, st: &Stats) -> (f64, f64, f64) {
        let (a0, s, r) = (self.a0, self.s, self.r as f64);
        let c1 = self.k1 * self.k1 * self.x * self.ts.q1;
        let c2 = 2.0 * c1 + r * a0 * a0 * s;
        let c3 = a0 * a0 * (st.t2_energy - st.proj) - 2.0 * self.k1 * a0 * st.u.norm() + r * a0 * a0 * s;
        (c1, c2, c3)
    }

    /// Concentrated negative log-likelihood `f(a)` up to a constant.
    pub fn objective(&self, z: &CVec, a: f64) -> Result<f64> {
        if !(a >= 0.0) {
            return domain(format!("a must be nonnegative, got {a}"));
        }
        Ok(self.objective_from(&self.stats(z), a))
    }

    /// `ḟ(a) = (C₁a² + C₂a + C₃) / (s·a₀²(1 + a)²)`.
    pub fn objective_derivative(&self, z: &CVec, a: f64) -> Result<f64> {
        if !(a >= 0.0) {
            return domain(format!("a must be nonnegative, got {a}"));
        }
        let (c1, c2, c3) = self.coefficients(&self.stats(z));
        Ok((c1 * a * a + c2 * a + c3) / (self.s * self.a0 * self.a0 * (1.0 + a).powi(2)))
    }

    /// `B = R⁻¹ − t₂t₂ᴴ/(s(1 + a)Q₂)` with `R⁻¹ = (I − a/(1 + a)·P_T)/s`.
    pub fn b_matrix(&self, a: f64) -> CMat {
        let l = self.ts.len();
        let t2 = &self.ts.t2;
        let r_inv = (CMat::identity(l, l) - self.pt.scale(a / (1.0 + a))).unscale(self.s);
        r_inv - (t2 * t2.adjoint()).unscale(self.s * (1.0 + a) * self.ts.q2)
    }

    fn finish(&self, z: &CVec, a: f64, phase1: f64, method: Method) -> ThetaEstimate {
        let theta1 = C64::from_polar(a / self.a0, phase1);
        let resid = z - &self.ts.t1 * (theta1 * self.k1);
        let theta2 = inner(&self.ts.t2, &resid) / (self.k2 * self.ts.q2);
        ThetaEstimate { theta1_hat: theta1, theta2_hat: theta2, method }
    }

    pub fn intermediates(&self, z: &CVec) -> MlIntermediates {
        let st = self.stats(z);
        let (c1, c2, c3) = self.coefficients(&st);
        let a_hat = if c1 > 0.0 {
            let disc = c2 * c2 - 4.0 * c1 * c3;
            if disc < 0.0 {
                0.0
            } else {
                ((-c2 + disc.sqrt()) / (2.0 * c1)).max(0.0)
            }
        } else {
            (-c3 / c2).max(0.0)
        };
        MlIntermediates { b: self.b_matrix(a_hat), r: self.r, c1, c2, c3, a_hat, phase1: -st.u.arg() }
    }

    pub fn estimate(&self, z: &CVec) -> ThetaEstimate {
        let im = self.intermediates(z);
        self.finish(z, im.a_hat, im.phase1, Method::Ml)
    }

    /// Minimizes `f` over a uniform grid on `[0, a₀·max(10, 4|θ̂₁^LS|)]`.
    pub fn grid_oracle(&self, z: &CVec) -> ThetaEstimate {
        let st = self.stats(z);
        let ls = inner(&self.ts.t1, &(z - &self.ts.t2 * (inner(&self.ts.t2, z) / self.ts.q2)));
        let ls1 = if self.x < COLLINEAR_TOL { 0.0 } else { ls.norm() / (self.k1 * self.x * self.ts.q1) };
        let top = self.a0 * (4.0 * ls1).max(10.0);
        let step = top / (GRID_POINTS - 1) as f64;
        let best = (0..GRID_POINTS)
            .map(|i| i as f64 * step)
            .map(|a| (a, self.objective_from(&st, a)))
            .fold((0.0, f64::INFINITY), |b, p| if p.1 < b.1 { p } else { b });
        self.finish(z, best.0, -st.u.arg(), Method::MlGridOracle)
    }
}

pub fn ml_estimate(z3: &CVec, ts: &TrainingSet, gains: &Gains, sigma_n2: f64) -> Result<ThetaEstimate> {
    Ok(MlEstimator::new(ts, gains, sigma_n2)?.estimate(z3))
}

pub fn ml_grid_oracle(z3: &CVec, ts: &TrainingSet, gains: &Gains, sigma_n2: f64) -> Result<ThetaEstimate> {
    Ok(MlEstimator::new(ts, gains, sigma_n2)?.grid_oracle(z3))
}

pub fn ml_objective(z3: &CVec, a: f64, ts: &TrainingSet, gains: &Gains, sigma_n2: f64) -> Result<f64> {
    MlEstimator::new(ts, gains, sigma_n2)?.objective(z3, a)
}

pub fn ml_objective_derivative(z3: &CVec, a: f64, ts: &TrainingSet, gains: &Gains, sigma_n2: f64) -> Result<f64> {
    MlEstimator::new(ts, gains, sigma_n2)?.objective_derivative(z3, a)
}
