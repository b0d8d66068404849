//! Closed-form performance bounds.
//!
//! * LMMSE error variances of the 4-hop estimator, in rational form and in
//!   the simplified total form used for training design.
//! * Cramér–Rao bounds of the 4-hop composite parameters, from the complex
//!   Fisher information `F_θθ = [[D₁, D₂], [D₂*, D₃]]`, `F_θθ* = [[D₄, 0], [0, 0]]`.
//! * `2N`-hop bounds under equal hop statistics, where the end-to-end noise
//!   grows like a geometric series in `ω = α²σ²`.

use crate::channel::{Gains, ThetaStatistics};
use crate::error::{domain, Result};
use crate::estimators::LmmseIntermediates;
use crate::numeric::{invert_hermitian, CMat, C64, J, ONE, RANK_TOL, ZERO};
use crate::training::TrainingSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundKind {
    LmmseMse,
    Crlb,
    AsymptoticMse,
    AsymptoticCrlb,
}

impl BoundKind {
    pub fn name(self) -> &'static str {
        match self {
            BoundKind::LmmseMse => "lmmse_mse",
            BoundKind::Crlb => "crlb",
            BoundKind::AsymptoticMse => "asymptotic_mse",
            BoundKind::AsymptoticCrlb => "asymptotic_crlb",
        }
    }
}

/// A bound for the pair `(θ₁, θ₂)` or `(ϖ₁, ϖ₂)`.
///
/// `valid` is false when the inputs fall outside the regime the expression
/// holds in; the values are still reported.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundResult {
    pub per_param: (f64, f64),
    pub kind: BoundKind,
    pub valid: bool,
}

impl BoundResult {
    fn new(per_param: (f64, f64), kind: BoundKind) -> Self {
        Self { per_param, kind, valid: true }
    }

    pub fn total(&self) -> f64 {
        self.per_param.0 + self.per_param.1
    }
}

fn end_to_end_gain2(gains: &Gains) -> f64 {
    gains.alpha1.powi(2) * gains.alpha3_tilde.powi(2)
}

/// `(e_θ1, e_θ2)` from `e_θi = σ²_θi − k²αᵢ²σ⁴_θi·tᵢᴴR_{z₃}⁻¹tᵢ`, with the
/// quadratic forms in rational form.
pub fn lmmse_mse_closed_form(
    ts: &TrainingSet,
    gains: &Gains,
    stats: &ThetaStatistics,
    sigma_n2: f64,
) -> Result<BoundResult> {
    let im = LmmseIntermediates::compute(ts, gains, stats, sigma_n2)?;
    let (f1, f2) = im.quadratic_forms(ts, gains, sigma_n2);
    let k2 = end_to_end_gain2(gains);
    let (s1, s2) = (stats.sigma_theta1_2, stats.sigma_theta2_2);
    let e1 = s1 - k2 * gains.alpha1.powi(2) * s1 * s1 * f1;
    let e2 = s2 - k2 * gains.alpha2.powi(2) * s2 * s2 * f2;
    Ok(BoundResult::new((e1.max(0.0), e2.max(0.0)), BoundKind::LmmseMse))
}

/// LMMSE error covariance in information form,
/// `(R_θ⁻¹ + c·ΛTᴴTΛ)⁻¹` with `c = b/(1 + a)`.
pub fn lmmse_error_covariance(ts: &TrainingSet, gains: &Gains, stats: &ThetaStatistics, sigma_n2: f64) -> Result<CMat> {
    let im = LmmseIntermediates::compute(ts, gains, stats, sigma_n2)?;
    let c = im.b / (1.0 + im.a);
    let lam =
        CMat::from_diagonal(&crate::numeric::CVec::from_vec(vec![C64::from(gains.alpha1), C64::from(gains.alpha2)]));
    let t = ts.t_matrix();
    let prior_inv = CMat::from_diagonal(&crate::numeric::CVec::from_vec(vec![
        C64::from(1.0 / stats.sigma_theta1_2),
        C64::from(1.0 / stats.sigma_theta2_2),
    ]));
    invert_hermitian(&(prior_inv + (&lam * t.adjoint() * &t * &lam).scale(c)))
}

/// Total LMMSE error `e_θ1 + e_θ2` through the scalar `λ`:
///
/// ```text
/// σ²_θ = [σ²_θ1 + σ²_θ2 + c(α₂²Q₂ + α₁²Q₁)σ²_θ1σ²_θ2] / (λσ²_θ1σ²_θ2)
/// λ    = 1/(σ²_θ1σ²_θ2) + cα₂²Q₂/σ²_θ1 + cα₁²Q₁/σ²_θ2 + c²xα₁²α₂²Q₁Q₂
/// ```
pub fn lmmse_total_mse_simplified(
    ts: &TrainingSet,
    gains: &Gains,
    stats: &ThetaStatistics,
    sigma_n2: f64,
) -> Result<f64> {
    let im = LmmseIntermediates::compute(ts, gains, stats, sigma_n2)?;
    let c = im.b / (1.0 + im.a);
    let (s1, s2) = (stats.sigma_theta1_2, stats.sigma_theta2_2);
    let (p1, p2) = (gains.alpha1.powi(2) * ts.q1, gains.alpha2.powi(2) * ts.q2);
    let lambda = 1.0 / (s1 * s2) + c * p2 / s1 + c * p1 / s2 + c * c * im.x * p1 * p2;
    Ok((s1 + s2 + c * (p1 + p2) * s1 * s2) / (lambda * s1 * s2))
}

/// Entries of the complex Fisher information of `θ` observed through `z₃`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrlbCoefficients {
    pub d1: f64,
    pub d2: C64,
    pub d3: f64,
    pub d4: C64,
}

impl CrlbCoefficients {
    /// With `a = a₀|θ₁|` and `r = rank(T)`:
    ///
    /// ```text
    /// D₁ = α₁⁴α̃₃²Q₁/(σ_n²ξ(1+a)) + a₀²(r−2)²/(4(1+a)²)
    /// D₂ = α₁³α₂α̃₃²ρ√(Q₁Q₂)/(σ_n²ξ(1+a))
    /// D₃ = α₁²α₂²α̃₃²Q₂/(σ_n²ξ(1+a))
    /// D₄ = a₀²(r−2)²·e^{2j∠θ₁}/(4(1+a)²)
    /// ```
    pub fn compute(ts: &TrainingSet, gains: &Gains, theta1: C64, sigma_n2: f64) -> Result<Self> {
        if !(sigma_n2 > 0.0) {
            return domain("the CRLB needs a positive noise variance");
        }
        if !(gains.a0 > 0.0) || !(gains.xi > 0.0) {
            return domain("the CRLB needs a0 > 0 and xi > 0");
        }
        let a = gains.a0 * theta1.norm();
        let r = if 1.0 - ts.rho.norm_sqr() < RANK_TOL { 1.0 } else { 2.0 };
        let den = sigma_n2 * gains.xi * (1.0 + a);
        let (a1, a2, at3) = (gains.alpha1, gains.alpha2, gains.alpha3_tilde);
        let extra = gains.a0.powi(2) * (r - 2.0_f64).powi(2) / (4.0 * (1.0 + a).powi(2));
        let phase = if theta1.norm() > 0.0 { (theta1 / theta1.norm()).powi(2) } else { ONE };
        Ok(Self {
            d1: a1.powi(4) * at3 * at3 * ts.q1 / den + extra,
            d2: ts.rho * (a1.powi(3) * a2 * at3 * at3 * (ts.q1 * ts.q2).sqrt() / den),
            d3: a1 * a1 * a2 * a2 * at3 * at3 * ts.q2 / den,
            d4: phase * extra,
        })
    }

    /// `|D₄| < D₁`, the regime in which both bounds grow with `|ρ|`.
    pub fn in_regime(&self) -> bool {
        self.d4.norm() < self.d1
    }

    fn denominator(&self) -> f64 {
        let y = self.d2.norm_sqr();
        (y - self.d1 * self.d3).powi(2) - self.d4.norm_sqr() * self.d3 * self.d3
    }

    /// `(CRLB_θ1, CRLB_θ2)` in rational form.
    pub fn crlb(&self) -> (f64, f64) {
        let (d1, d3, y, w) = (self.d1, self.d3, self.d2.norm_sqr(), self.d4.norm_sqr());
        let den = self.denominator();
        (d3 * (d1 * d3 - y) / den, (d1 * d1 * d3 - d1 * y - w * d3) / den)
    }

    /// `∂CRLB_θi/∂|D₂|²`.
    pub fn derivatives_in_d2(&self) -> (f64, f64) {
        let (d1, d3, y, w) = (self.d1, self.d3, self.d2.norm_sqr(), self.d4.norm_sqr());
        let den2 = self.denominator().powi(2);
        let c1 = d3 * ((y - d1 * d3).powi(2) + w * d3 * d3) / den2;
        let c2 = (d1 * y * y - 2.0 * d3 * (d1 * d1 - w) * y + d1 * d3 * d3 * (d1 * d1 - w)) / den2;
        (c1, c2)
    }

    /// The real-parameter information `M·[[F, G], [G*, F*]]·Mᴴ` with
    /// `M = [[I, I], [−jI, jI]]`.
    pub fn real_fim(&self) -> CMat {
        let f = [[C64::from(self.d1), self.d2], [self.d2.conj(), C64::from(self.d3)]];
        let g = [[self.d4, ZERO], [ZERO, ZERO]];
        let aug = CMat::from_fn(4, 4, |i, j| match (i / 2, j / 2) {
            (0, 0) => f[i][j],
            (0, 1) => g[i][j - 2],
            (1, 0) => g[i - 2][j].conj(),
            _ => f[i - 2][j - 2].conj(),
        });
        let m = CMat::from_fn(4, 4, |i, j| match (i / 2, j / 2, i % 2 == j % 2) {
            (_, _, false) => ZERO,
            (0, _, true) => ONE,
            (1, 0, true) => -J,
            _ => J,
        });
        &m * aug * m.adjoint()
    }
}

/// `(CRLB_θ1, CRLB_θ2)` evaluated at the true `θ₁`.
pub fn crlb_4hop(ts: &TrainingSet, gains: &Gains, theta1: C64, sigma_n2: f64) -> Result<BoundResult> {
    let d = CrlbCoefficients::compute(ts, gains, theta1, sigma_n2)?;
    let (c1, c2) = d.crlb();
    let valid = d.in_regime() && d.denominator() > 0.0 && c1 >= 0.0 && c2 >= 0.0;
    Ok(BoundResult { per_param: (c1, c2), kind: BoundKind::Crlb, valid })
}

/// The same bounds by inverting the assembled real-parameter FIM and summing
/// the real and imaginary variances of each parameter.
pub fn fim_crlb_oracle(ts: &TrainingSet, gains: &Gains, theta1: C64, sigma_n2: f64) -> Result<BoundResult> {
    let d = CrlbCoefficients::compute(ts, gains, theta1, sigma_n2)?;
    fim_crlb_from_coefficients(&d)
}

pub fn fim_crlb_from_coefficients(d: &CrlbCoefficients) -> Result<BoundResult> {
    let inv = invert_hermitian(&d.real_fim())?;
    let c1 = inv[(0, 0)].re + inv[(2, 2)].re;
    let c2 = inv[(1, 1)].re + inv[(3, 3)].re;
    Ok(BoundResult { per_param: (c1, c2), kind: BoundKind::Crlb, valid: d.in_regime() })
}

/// Derivatives of both CRLBs with respect to `|D₂|²`; positive in the regime
/// `|D₄| < D₁`, so correlated pilots never help.
pub fn crlb_rho_derivative_sign(ts: &TrainingSet, gains: &Gains, theta1: C64, sigma_n2: f64) -> Result<(f64, f64)> {
    Ok(CrlbCoefficients::compute(ts, gains, theta1, sigma_n2)?.derivatives_in_d2())
}

/// Equal-statistics description of a `2N`-hop chain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsymptoticParams {
    /// `ω = α²σ²`
    pub omega: f64,
    /// `κ = α²`
    pub kappa: f64,
    /// Common channel variance `σ²`.
    pub sigma2: f64,
    pub n_pairs: usize,
}

impl AsymptoticParams {
    /// `ω ∈ (0, 1)` and `κ = 1`.
    pub fn convergent(&self) -> bool {
        self.omega > 0.0 && self.omega < 1.0 && (self.kappa - 1.0).abs() < 1e-12
    }
}

/// End-to-end noise variance of the `N`-pair chain in units of `σ_n²`:
///
/// ```text
/// (1 − ωᴺ + ω^{N+1} − ω^{2N})/(1 − ω) + 2ω^{N+1}(1 − (2ω)^{N−1})/(1 − 2ω)
/// ```
///
/// Summed as finite geometric series, so `ω = 1/2` and `ω = 1` need no
/// special casing.
pub fn finite_n_noise_factor(omega: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return domain("need at least one hop pair");
    }
    if !(omega >= 0.0) || !omega.is_finite() {
        return domain("omega must be finite and nonnegative");
    }
    let geo = |r: f64, terms: usize| (0..terms).map(|k| r.powi(k as i32)).sum::<f64>();
    let tail = omega.powi(n as i32 + 1);
    Ok(geo(omega, n) + tail * geo(omega, n - 1) + 2.0 * tail * geo(2.0 * omega, n - 1))
}

/// Limit of [`finite_n_noise_factor`] as `N → ∞` for `ω < 1/2`: `1/(1 − ω)`.
pub fn limit_noise_factor(omega: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&omega) {
        return domain("the noise factor diverges for omega >= 1");
    }
    Ok(1.0 / (1.0 - omega))
}

/// `σ²_ϖi = CRLB_ϖi = σ_n² / ((1 − ω)(1 − |ρ|²)Qᵢ)` for the MSE and the CRLB.
/// Outside `ω ∈ (0, 1)`, `κ = 1` both results are flagged invalid.
pub fn asymptotic_2nhop_bounds(
    params: &AsymptoticParams,
    ts: &TrainingSet,
    sigma_n2: f64,
) -> Result<(BoundResult, BoundResult)> {
    if !(sigma_n2 > 0.0) {
        return domain("asymptotic bounds need a positive noise variance");
    }
    let x = 1.0 - ts.rho.norm_sqr();
    if !(x > 0.0) {
        return domain("asymptotic bounds need |rho| < 1");
    }
    let valid = params.convergent();
    let per_param = if valid {
        let s = sigma_n2 / ((1.0 - params.omega) * x);
        (s / ts.q1, s / ts.q2)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    Ok((
        BoundResult { per_param, kind: BoundKind::AsymptoticMse, valid },
        BoundResult { per_param, kind: BoundKind::AsymptoticCrlb, valid },
    ))
}

/// Finite-`N` LMMSE MSE and CRLB of `(ϖ₁, ϖ₂)` under the Gaussian-residual
/// model: prior `diag(2ᴺσ^{4N}, σ^{4N})` and information
/// `J = κ^{2N−1}/(σ_n²·F_N(ω))·TᴴT`, where `F_N` is the finite-`N` noise factor.
pub fn multihop_bounds(
    params: &AsymptoticParams,
    ts: &TrainingSet,
    sigma_n2: f64,
) -> Result<(BoundResult, BoundResult)> {
    if !(sigma_n2 > 0.0) {
        return domain("multihop bounds need a positive noise variance");
    }
    if !(params.kappa > 0.0 && params.sigma2 > 0.0) {
        return domain("kappa and sigma2 must be positive");
    }
    let n = params.n_pairs;
    let x = 1.0 - ts.rho.norm_sqr();
    if !(x > 0.0) {
        return domain("multihop bounds need |rho| < 1");
    }
    let fac = finite_n_noise_factor(params.omega, n)?;
    let s = params.kappa.powi(2 * n as i32 - 1) / (sigma_n2 * fac);
    let (j11, j22, j12) = (s * ts.q1, s * ts.q2, ts.rho * (s * (ts.q1 * ts.q2).sqrt()));
    let v2 = params.sigma2.powi(2 * n as i32);
    let v1 = 2f64.powi(n as i32) * v2;
    let (p11, p22) = (1.0 / v1 + j11, 1.0 / v2 + j22);
    let det = p11 * p22 - j12.norm_sqr();
    let lmmse = BoundResult::new((p22 / det, p11 / det), BoundKind::LmmseMse);
    let jdet = j11 * j22 - j12.norm_sqr();
    let crlb = BoundResult::new((j22 / jdet, j11 / jdet), BoundKind::Crlb);
    Ok((lmmse, crlb))
}

/// Behaviour of the prior-limited MSE `(1 + 2ᴺ)σ^{4N}` that remains when the
/// relays attenuate (`κ < 1`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PriorRegime {
    /// `σ² < √2/2`: the MSE goes to zero.
    Vanishing,
    /// `σ² = √2/2`: the MSE goes to one.
    Unit,
    /// `σ² > √2/2`: the MSE grows without bound.
    Unbounded,
}

pub fn classify_prior_regime(sigma2: f64) -> PriorRegime {
    let edge = std::f64::consts::FRAC_1_SQRT_2;
    if (sigma2 - edge).abs() <= 1e-12 {
        PriorRegime::Unit
    } else if sigma2 < edge {
        PriorRegime::Vanishing
    } else {
        PriorRegime::Unbounded
    }
}

/// `(1 + 2ᴺ)σ^{4N}`
pub fn attenuating_chain_mse(sigma2: f64, n: usize) -> f64 {
    (1.0 + 2f64.powi(n as i32)) * sigma2.powi(2 * n as i32)
}
