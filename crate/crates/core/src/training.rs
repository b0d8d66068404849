//! Pilot sequences with exact power and cross-correlation.
//!
//! `t₁`, `t₂` and the relay pilot `t_r` are built from the first three columns
//! of the unitary DFT matrix, so `t_r` is orthogonal to both end-node pilots
//! and `t₁ᴴt₂ / √(Q₁Q₂)` equals the requested `ρ` exactly.

use std::f64::consts::PI;

use crate::error::{domain, Result};
use crate::numeric::{inner, CMat, CVec, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    pub t1: CVec,
    pub t2: CVec,
    pub tr: CVec,
    pub q1: f64,
    pub q2: f64,
    pub qr: f64,
    pub rho: C64,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.t1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t1.is_empty()
    }

    /// `T = [t₁, t₂]`.
    pub fn t_matrix(&self) -> CMat {
        CMat::from_columns(&[self.t1.clone(), self.t2.clone()])
    }

    /// `T_r = [t₁, t₂, t_r]`.
    pub fn tr_matrix(&self) -> CMat {
        CMat::from_columns(&[self.t1.clone(), self.t2.clone(), self.tr.clone()])
    }

    /// The same pilots with every power multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        let s = k.sqrt();
        Self {
            t1: self.t1.scale(s),
            t2: self.t2.scale(s),
            tr: self.tr.scale(s),
            q1: self.q1 * k,
            q2: self.q2 * k,
            qr: self.qr * k,
            rho: self.rho,
        }
    }
}

/// Column `k` of the unitary `L`-point DFT matrix.
fn dft_column(l: usize, k: usize) -> CVec {
    let norm = 1.0 / (l as f64).sqrt();
    CVec::from_fn(l, |n, _| C64::from_polar(norm, -2.0 * PI * (k * n) as f64 / l as f64))
}

fn build(l: usize, rho: C64, q1: f64, q2: f64, qr: f64, allow_full: bool) -> Result<TrainingSet> {
    if l < 3 {
        return domain(format!("training length must be at least 3, got {l}"));
    }
    let r = rho.norm();
    if !(r <= 1.0) || (!allow_full && r >= 1.0) {
        return domain(format!("|rho| = {r} out of range"));
    }
    if ![q1, q2, qr].iter().all(|q| q.is_finite() && *q > 0.0) {
        return domain("training powers must be positive");
    }
    let (u1, u2, u3) = (dft_column(l, 0), dft_column(l, 1), dft_column(l, 2));
    let t1 = u1.scale(q1.sqrt());
    let t2 = (u1 * rho + u2 * C64::from((1.0 - r * r).max(0.0).sqrt())).scale(q2.sqrt());
    let tr = u3.scale(qr.sqrt());
    Ok(TrainingSet { t1, t2, tr, q1, q2, qr, rho })
}

/// Pilots of length `l` with powers `Q₁, Q₂, Q_r` and correlation `ρ`, `|ρ| < 1`.
pub fn build_training(l: usize, rho: C64, q1: f64, q2: f64, qr: f64) -> Result<TrainingSet> {
    build(l, rho, q1, q2, qr, false)
}

/// As [`build_training`] but also admits the fully correlated case `|ρ| = 1`.
pub fn build_training_degenerate(l: usize, rho: C64, q1: f64, q2: f64, qr: f64) -> Result<TrainingSet> {
    build(l, rho, q1, q2, qr, true)
}

/// `t₁ᴴt₂ / √(Q₁Q₂)` computed from the vectors themselves.
pub fn measured_rho(ts: &TrainingSet) -> Result<C64> {
    let (n1, n2) = (ts.t1.norm_squared(), ts.t2.norm_squared());
    if n1 == 0.0 || n2 == 0.0 {
        return domain("zero-power training sequence");
    }
    Ok(inner(&ts.t1, &ts.t2) / (n1 * n2).sqrt())
}
