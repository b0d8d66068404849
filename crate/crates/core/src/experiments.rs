//! Monte-Carlo experiment driver.
//!
//! Every grid point `(snr, ρ[, N])` runs `trials` independent draws. Trial
//! `k` of grid point `g` uses `RngStream(seed ⊕ g, k)`, per-trial results are
//! collected in index order and summed sequentially, so output does not depend
//! on the number of worker threads.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Deserialize;

use crate::bounds::{
    asymptotic_2nhop_bounds, crlb_4hop, finite_n_noise_factor, lmmse_mse_closed_form, multihop_bounds, AsymptoticParams,
};
use crate::channel::{
    compute_gains, db_to_linear, draw_channels, ChainGains, ChannelRealization, Gains, PowerProfile, ThetaStatistics,
};
use crate::error::{Error, Result};
use crate::estimators::{LmmseEstimator, MlEstimator};
use crate::numeric::{RngStream, C64};
use crate::simulator::multihop::{estimated_csi, ls_varpi};
use crate::simulator::{
    baseline_squared_errors, effective_snr_at_t1, run_data_exchange, run_training_2nhop, run_training_round_4hop,
    theoretical_aesnr_4hop, CsiMode, ExchangeConfig,
};
use crate::training::{build_training, TrainingSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    FourhopLmmse,
    FourhopMl,
    FourhopAesnr,
    FourhopBaseline,
    MultihopSweep,
    AsymptoticCheck,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::FourhopLmmse,
        Scenario::FourhopMl,
        Scenario::FourhopAesnr,
        Scenario::FourhopBaseline,
        Scenario::MultihopSweep,
        Scenario::AsymptoticCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::FourhopLmmse => "fourhop-lmmse",
            Scenario::FourhopMl => "fourhop-ml",
            Scenario::FourhopAesnr => "fourhop-aesnr",
            Scenario::FourhopBaseline => "fourhop-baseline",
            Scenario::MultihopSweep => "multihop-sweep",
            Scenario::AsymptoticCheck => "asymptotic-check",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Scenario::FourhopLmmse => "4-hop LMMSE MSE of theta1, theta2 vs the closed-form MSE",
            Scenario::FourhopMl => "4-hop ML MSE of theta1, theta2 vs the CRLB at the true theta1",
            Scenario::FourhopAesnr => "4-hop data exchange AESNR with perfect and trained CSI",
            Scenario::FourhopBaseline => "4-hop LMMSE vs per-hop point-to-point estimation",
            Scenario::MultihopSweep => "closed-form LMMSE MSE and CRLB of varpi1, varpi2 for N = 2..n_hops",
            Scenario::AsymptoticCheck => "simulated 2N-hop LS MSE of varpi vs its large-N closed form",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario '{s}'")))
    }
}

fn default_snr() -> Vec<f64> {
    vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]
}

fn default_rho() -> Vec<f64> {
    vec![0.0, 0.5, 0.9]
}

/// Flat key/value experiment description, read from TOML.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    #[serde(default = "default_snr")]
    pub snr_db: Vec<f64>,
    #[serde(default = "default_rho")]
    pub rho: Vec<f64>,
    #[serde(default = "ExperimentConfig::default_trials")]
    pub trials: usize,
    /// Training length `L`.
    #[serde(default = "ExperimentConfig::default_l", alias = "L")]
    pub l: usize,
    /// Hop pairs `N` (the chain has `2N` hops); multihop scenarios only.
    #[serde(default = "ExperimentConfig::default_n", alias = "N")]
    pub n_hops: usize,
    #[serde(default)]
    pub seed: u64,
    /// Relay power as a multiple of the end-node power.
    #[serde(default = "ExperimentConfig::default_power_model")]
    pub power_model: f64,
    /// `ω = α²σ²` of the equal-statistics chain (multihop scenarios).
    #[serde(default = "ExperimentConfig::default_omega")]
    pub omega: f64,
    /// Common channel variance `σ²` setting the prior of `ϖ` in the
    /// closed-form multihop sweep.
    #[serde(default = "ExperimentConfig::default_prior_variance")]
    pub prior_variance: f64,
    /// Data symbols decoded per trial in the AESNR scenario.
    #[serde(default = "ExperimentConfig::default_rounds")]
    pub rounds: usize,
    /// Worker threads; 0 uses the global pool.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub out_path: Option<PathBuf>,
}

impl ExperimentConfig {
    fn default_trials() -> usize {
        10_000
    }
    fn default_l() -> usize {
        8
    }
    fn default_n() -> usize {
        8
    }
    fn default_power_model() -> f64 {
        1.0
    }
    fn default_omega() -> f64 {
        0.5
    }
    fn default_prior_variance() -> f64 {
        2.0
    }
    fn default_rounds() -> usize {
        16
    }

    /// Defaults for `scenario` with every optional key at its default.
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            snr_db: default_snr(),
            rho: default_rho(),
            trials: Self::default_trials(),
            l: Self::default_l(),
            n_hops: Self::default_n(),
            seed: 0,
            power_model: Self::default_power_model(),
            omega: Self::default_omega(),
            prior_variance: Self::default_prior_variance(),
            rounds: Self::default_rounds(),
            workers: 0,
            out_path: None,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.snr_db.is_empty() || !self.snr_db.iter().all(|s| s.is_finite()) {
            return bad("snr_db must be a nonempty list of finite values");
        }
        if self.rho.is_empty() || !self.rho.iter().all(|r| (0.0..1.0).contains(r)) {
            return bad("rho must be a nonempty list of values in [0, 1)");
        }
        if self.l < 3 {
            return bad("L must be at least 3");
        }
        if self.n_hops < 2 {
            return bad("n_hops must be at least 2");
        }
        if !(self.power_model.is_finite() && self.power_model > 0.0) {
            return bad("power_model must be positive");
        }
        if !(self.omega > 0.0 && self.omega < 1.0) {
            return bad("omega must lie in (0, 1)");
        }
        if !(self.prior_variance.is_finite() && self.prior_variance > 0.0) {
            return bad("prior_variance must be positive");
        }
        if self.rounds == 0 {
            return bad("rounds must be at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub scenario: Scenario,
    pub snr_db: f64,
    pub rho: f64,
    pub n_hops: usize,
    pub metric: String,
    pub empirical: Option<f64>,
    pub closed_form: Option<f64>,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn find(&self, metric: &str, snr_db: f64, rho: f64, n_hops: usize) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.metric == metric && r.snr_db == snr_db && r.rho == rho && r.n_hops == n_hops)
    }
}

struct Point<'a> {
    cfg: &'a ExperimentConfig,
    snr_db: f64,
    rho: f64,
    n_hops: usize,
    seed: u64,
}

impl Point<'_> {
    fn row(&self, metric: &str, empirical: Option<f64>, closed_form: Option<f64>, trials: usize) -> ResultRow {
        ResultRow {
            scenario: self.cfg.scenario,
            snr_db: self.snr_db,
            rho: self.rho,
            n_hops: self.n_hops,
            metric: metric.into(),
            empirical,
            closed_form,
            trials,
            seed: self.cfg.seed,
        }
    }

    /// End-node power `P = SNR` with unit noise.
    fn power(&self) -> f64 {
        db_to_linear(self.snr_db)
    }

    /// Pilots at the largest allowed power `L·P`.
    fn training(&self) -> Result<TrainingSet> {
        let q = self.cfg.l as f64 * self.power();
        build_training(self.cfg.l, C64::from(self.rho), q, q, q)
    }

    fn profile(&self, n_pairs: usize, variance: f64) -> Result<PowerProfile> {
        let p = self.power();
        let profile = PowerProfile {
            p1: p,
            p2: p,
            pr: vec![p * self.cfg.power_model; 2 * n_pairs - 1],
            sigma2: vec![variance; 2 * n_pairs],
            sigma_n2: 1.0,
        };
        profile.validate()?;
        Ok(profile)
    }

    /// Mean of the per-trial vectors `f(rng)`, summed in trial order.
    fn monte_carlo<F>(&self, f: F) -> Result<Vec<f64>>
    where
        F: Fn(&mut RngStream) -> Result<Vec<f64>> + Sync,
    {
        let trials = self.cfg.trials;
        let per: Vec<Vec<f64>> =
            (0..trials).into_par_iter().map(|k| f(&mut RngStream::new(self.seed, k as u64))).collect::<Result<_>>()?;
        let mut acc = vec![0.0; per.first().map_or(0, Vec::len)];
        for row in &per {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
        Ok(acc.into_iter().map(|a| a / trials as f64).collect())
    }
}

struct FourHop {
    profile: PowerProfile,
    gains: Gains,
    stats: ThetaStatistics,
    ts: TrainingSet,
}

impl FourHop {
    fn new(pt: &Point) -> Result<Self> {
        let profile = pt.profile(2, 1.0)?;
        let gains = compute_gains(&profile, pt.cfg.l)?;
        let stats = ThetaStatistics::from_profile(&profile);
        Ok(Self { profile, gains, stats, ts: pt.training()? })
    }

    fn sigma_n2(&self) -> f64 {
        self.profile.sigma_n2
    }

    fn draw(&self, rng: &mut RngStream) -> Result<ChannelRealization> {
        draw_channels(&self.profile, rng)
    }
}

fn fourhop_lmmse(pt: &Point, out: &mut Vec<ResultRow>) -> Result<()> {
    let s = FourHop::new(pt)?;
    let est = LmmseEstimator::new(&s.ts, &s.gains, &s.stats, s.sigma_n2())?;
    let m = pt.monte_carlo(|rng| {
        let ch = s.draw(rng)?;
        let obs = run_training_round_4hop(&ch, &s.gains, &s.ts, s.sigma_n2(), rng)?;
        let (e1, e2) = est.estimate(&obs.z3).squared_errors(obs.true_theta);
        Ok(vec![e1, e2])
    })?;
    let cf = lmmse_mse_closed_form(&s.ts, &s.gains, &s.stats, s.sigma_n2())?.per_param;
    out.push(pt.row("mse_theta1", Some(m[0]), Some(cf.0), pt.cfg.trials));
    out.push(pt.row("mse_theta2", Some(m[1]), Some(cf.1), pt.cfg.trials));
    Ok(())
}

fn fourhop_ml(pt: &Point, out: &mut Vec<ResultRow>) -> Result<()> {
    let s = FourHop::new(pt)?;
    let est = MlEstimator::new(&s.ts, &s.gains, s.sigma_n2())?;
    let m = pt.monte_carlo(|rng| {
        let ch = s.draw(rng)?;
        let obs = run_training_round_4hop(&ch, &s.gains, &s.ts, s.sigma_n2(), rng)?;
        let (e1, e2) = est.estimate(&obs.z3).squared_errors(obs.true_theta);
        let b = crlb_4hop(&s.ts, &s.gains, obs.true_theta.0, s.sigma_n2())?;
        let (c1, c2) = if b.valid { b.per_param } else { (f64::NAN, f64::NAN) };
        Ok(vec![e1, e2, c1, c2])
    })?;
    let closed = |v: f64| v.is_finite().then_some(v);
    out.push(pt.row("mse_theta1", Some(m[0]), closed(m[2]), pt.cfg.trials));
    out.push(pt.row("mse_theta2", Some(m[1]), closed(m[3]), pt.cfg.trials));
    Ok(())
}

fn fourhop_aesnr(pt: &Point, out: &mut Vec<ResultRow>) -> Result<()> {
    let s = FourHop::new(pt)?;
    let cg = ChainGains::from_gains(&s.gains);
    let xcfg = ExchangeConfig::from_profile(&s.profile, pt.cfg.rounds);
    let lin = |db: f64| db_to_linear(db);
    let m = pt.monte_carlo(|rng| {
        let ch = s.draw(rng)?;
        let perfect = run_data_exchange(&ch, &cg, &xcfg, &CsiMode::Perfect, rng)?;
        let theory = theoretical_aesnr_4hop(&ch, &s.gains, &xcfg)?;
        let obs = run_training_2nhop(&ch, &cg, &s.ts, s.sigma_n2(), rng)?;
        let csi = estimated_csi(&obs, &s.ts, &cg)?;
        let trained = run_data_exchange(&ch, &cg, &xcfg, &CsiMode::Estimated(csi), rng)?;
        Ok(vec![lin(effective_snr_at_t1(&perfect)?), lin(theory), lin(effective_snr_at_t1(&trained)?)])
    })?;
    let db = |x: f64| 10.0 * x.log10();
    out.push(pt.row("aesnr_db_perfect_csi", Some(db(m[0])), Some(db(m[1])), pt.cfg.trials));
    out.push(pt.row("aesnr_db_trained_csi", Some(db(m[2])), None, pt.cfg.trials));
    Ok(())
}

fn fourhop_baseline(pt: &Point, out: &mut Vec<ResultRow>) -> Result<()> {
    let s = FourHop::new(pt)?;
    let est = LmmseEstimator::new(&s.ts, &s.gains, &s.stats, s.sigma_n2())?;
    let m = pt.monte_carlo(|rng| {
        let ch = s.draw(rng)?;
        let obs = run_training_round_4hop(&ch, &s.gains, &s.ts, s.sigma_n2(), rng)?;
        let (e1, e2) = est.estimate(&obs.z3).squared_errors(obs.true_theta);
        let (b1, b2) = baseline_squared_errors(&ch, &s.ts, s.sigma_n2(), rng)?;
        Ok(vec![e1, e2, b1, b2])
    })?;
    let cf = lmmse_mse_closed_form(&s.ts, &s.gains, &s.stats, s.sigma_n2())?.per_param;
    out.push(pt.row("mse_theta1_lmmse", Some(m[0]), Some(cf.0), pt.cfg.trials));
    out.push(pt.row("mse_theta2_lmmse", Some(m[1]), Some(cf.1), pt.cfg.trials));
    out.push(pt.row("mse_theta1_baseline", Some(m[2]), None, pt.cfg.trials));
    out.push(pt.row("mse_theta2_baseline", Some(m[3]), None, pt.cfg.trials));
    Ok(())
}

fn params(cfg: &ExperimentConfig, n_pairs: usize) -> AsymptoticParams {
    AsymptoticParams { omega: cfg.omega, kappa: 1.0, sigma2: cfg.prior_variance, n_pairs }
}

fn multihop_sweep(pt: &Point, out: &mut Vec<ResultRow>) -> Result<()> {
    let ts = pt.training()?;
    let (lmmse, crlb) = multihop_bounds(&params(pt.cfg, pt.n_hops), &ts, 1.0)?;
    out.push(pt.row("lmmse_mse_varpi1", None, Some(lmmse.per_param.0), 0));
    out.push(pt.row("lmmse_mse_varpi2", None, Some(lmmse.per_param.1), 0));
    out.push(pt.row("crlb_varpi1", None, Some(crlb.per_param.0), 0));
    out.push(pt.row("crlb_varpi2", None, Some(crlb.per_param.1), 0));
    Ok(())
}

/// Unit relay gains and hop variance `ω`, the `κ = 1` chain.
fn asymptotic_check(pt: &Point, out: &mut Vec<ResultRow>) -> Result<()> {
    let n = pt.n_hops;
    let profile = pt.profile(n, pt.cfg.omega)?;
    let gains = ChainGains::unit(n);
    let ts = pt.training()?;
    let m = pt.monte_carlo(|rng| {
        let ch = draw_channels(&profile, rng)?;
        let obs = run_training_2nhop(&ch, &gains, &ts, profile.sigma_n2, rng)?;
        let (v1, v2) = ls_varpi(&obs.z1n, &ts, &gains)?;
        Ok(vec![(v1 - obs.true_varpi.0).norm_sqr(), (v2 - obs.true_varpi.1).norm_sqr()])
    })?;
    let (mse, _) = asymptotic_2nhop_bounds(&params(pt.cfg, n), &ts, profile.sigma_n2)?;
    out.push(pt.row("mse_varpi1", Some(m[0]), Some(mse.per_param.0), pt.cfg.trials));
    out.push(pt.row("mse_varpi2", Some(m[1]), Some(mse.per_param.1), pt.cfg.trials));
    out.push(pt.row("noise_factor", None, Some(finite_n_noise_factor(pt.cfg.omega, n)?), 0));
    Ok(())
}

fn point_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn run_points(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let n_values: Vec<usize> = match cfg.scenario {
        Scenario::MultihopSweep => (2..=cfg.n_hops).collect(),
        Scenario::AsymptoticCheck => vec![cfg.n_hops],
        _ => vec![2],
    };
    let mut rows = Vec::new();
    let mut index = 0;
    for &snr_db in &cfg.snr_db {
        for &rho in &cfg.rho {
            for &n_hops in &n_values {
                let pt = Point { cfg, snr_db, rho, n_hops, seed: point_seed(cfg.seed, index) };
                index += 1;
                match cfg.scenario {
                    Scenario::FourhopLmmse => fourhop_lmmse(&pt, &mut rows)?,
                    Scenario::FourhopMl => fourhop_ml(&pt, &mut rows)?,
                    Scenario::FourhopAesnr => fourhop_aesnr(&pt, &mut rows)?,
                    Scenario::FourhopBaseline => fourhop_baseline(&pt, &mut rows)?,
                    Scenario::MultihopSweep => multihop_sweep(&pt, &mut rows)?,
                    Scenario::AsymptoticCheck => asymptotic_check(&pt, &mut rows)?,
                }
            }
        }
    }
    for r in &rows {
        if r.empirical.is_some_and(|v| !v.is_finite()) || r.closed_form.is_some_and(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value in metric {}", r.metric)));
        }
    }
    Ok(ResultTable { rows })
}

/// Runs the grid on `cfg.workers` threads (the global pool when 0).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    run_experiment_with_workers(cfg, cfg.workers)
}

pub fn run_experiment_with_workers(cfg: &ExperimentConfig, workers: usize) -> Result<ResultTable> {
    cfg.validate()?;
    if workers == 0 {
        return run_points(cfg);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    pool.install(|| run_points(cfg))
}

pub const CSV_HEADER: &str = "scenario,snr_db,rho,n_hops,metric,empirical,closed_form,trials,seed";

/// `x` with 10 significant digits, in fixed notation when that stays short.
pub fn format_sig10(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..10).contains(&exp) {
        let s = format!("{:.*}", (9 - exp).max(0) as usize, x);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{x:.9e}");
        let (mant, e) = s.split_once('e').expect("exponent form");
        let mant = if mant.contains('.') { mant.trim_end_matches('0').trim_end_matches('.') } else { mant };
        format!("{mant}e{e}")
    }
}

pub fn csv_string(table: &ResultTable) -> String {
    let opt = |v: Option<f64>| v.map(format_sig10).unwrap_or_default();
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in &table.rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.scenario,
            format_sig10(r.snr_db),
            format_sig10(r.rho),
            r.n_hops,
            r.metric,
            opt(r.empirical),
            opt(r.closed_form),
            r.trials,
            r.seed
        ));
    }
    s
}

pub fn emit_csv(table: &ResultTable, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(csv_string(table).as_bytes())?;
    Ok(())
}

/// A gnuplot script that plots every metric of `table` from the CSV at
/// `csv_path`: empirical values as points, closed forms as lines.
pub fn gnuplot_script(table: &ResultTable, csv_path: &Path) -> String {
    let mut metrics: Vec<&str> = Vec::new();
    for r in &table.rows {
        if !metrics.contains(&r.metric.as_str()) {
            metrics.push(&r.metric);
        }
    }
    let sweep_n = table.rows.first().is_some_and(|r| r.scenario == Scenario::MultihopSweep);
    let (xcol, xlabel) = if sweep_n { (4, "N (hop pairs)") } else { (2, "SNR (dB)") };
    let csv = csv_path.display();
    let mut s = format!(
        "set datafile separator \",\"\nset datafile missing \"\"\nset logscale y\nset xlabel \"{xlabel}\"\nset grid\n"
    );
    let mut plots = Vec::new();
    for m in metrics {
        let src = format!("\"< awk -F, '$5 == \\\"{m}\\\"' {csv}\"");
        plots.push(format!("{src} using {xcol}:6 with points title \"{m} empirical\""));
        plots.push(format!("{src} using {xcol}:7 with lines title \"{m} closed form\""));
    }
    s.push_str("plot ");
    s.push_str(&plots.join(", \\\n     "));
    s.push('\n');
    s
}
