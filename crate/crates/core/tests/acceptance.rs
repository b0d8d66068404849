//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Monte-Carlo criteria use the default config seed.

use std::process::ExitCode;
use std::time::Instant;

use ncrelay::bounds::{
    crlb_4hop, fim_crlb_from_coefficients, fim_crlb_oracle, finite_n_noise_factor, lmmse_mse_closed_form,
    CrlbCoefficients,
};
use ncrelay::channel::{compute_gains, draw_channels, ChainGains, PowerProfile, ThetaStatistics};
use ncrelay::estimators::MlEstimator;
use ncrelay::experiments::{
    csv_string, run_experiment, run_experiment_with_workers, ExperimentConfig, ResultTable, Scenario,
};
use ncrelay::numeric::sample_cgauss;
use ncrelay::simulator::multihop::estimated_csi;
use ncrelay::simulator::{
    run_data_exchange, run_data_exchange_4hop, run_training_2nhop, run_training_round_4hop, CsiMode, ExchangeConfig,
};
use ncrelay::training::build_training;
use ncrelay::{RngStream, C64};

type Criterion = (&'static str, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn cfg(scenario: Scenario, snr: &[f64], rho: &[f64], trials: usize) -> ExperimentConfig {
    ExperimentConfig { snr_db: snr.to_vec(), rho: rho.to_vec(), trials, ..ExperimentConfig::new(scenario) }
}

fn worst_rel(table: &ResultTable, metrics: &[&str]) -> (f64, String) {
    let mut worst = (0.0, String::new());
    for r in table.rows.iter().filter(|r| metrics.contains(&r.metric.as_str())) {
        let d = rel(r.empirical.unwrap(), r.closed_form.unwrap());
        if d >= worst.0 {
            worst = (d, format!("{} at {} dB, rho {}", r.metric, r.snr_db, r.rho));
        }
    }
    worst
}

fn lmmse_fidelity(trials: usize, tol: f64) -> Outcome {
    let t = run_experiment(&cfg(Scenario::FourhopLmmse, &[0.0, 10.0, 20.0], &[0.0, 0.5], trials)).unwrap();
    let (w, at) = worst_rel(&t, &["mse_theta1", "mse_theta2"]);
    let fails = t.rows.iter().filter(|r| rel(r.empirical.unwrap(), r.closed_form.unwrap()) > tol).count();
    outcome(
        w <= tol,
        format!("{trials} trials: worst relative gap {:.4} ({at}), {fails}/{} above {tol}", w, t.rows.len()),
    )
}

fn c1() -> Outcome {
    lmmse_fidelity(10_000, 0.05)
}

fn c1_full() -> Outcome {
    lmmse_fidelity(100_000, 0.03)
}

fn c2() -> Outcome {
    let mut rng = RngStream::new(0, 2);
    let thetas: Vec<C64> = (0..3)
        .map(|_| {
            let h = sample_cgauss(2, 1.0, &mut rng).unwrap();
            h[0] * h[0] * h[1] * h[1]
        })
        .collect();
    let mut checks = 0;
    let mut bad = Vec::new();
    for snr in [0.0, 10.0, 20.0] {
        let profile = PowerProfile::from_snr_db(2, snr).unwrap();
        let gains = compute_gains(&profile, 8).unwrap();
        let stats = ThetaStatistics::from_profile(&profile);
        let sn = profile.sigma_n2;
        for scale in [0.5, 1.0, 2.0] {
            let q = scale * 8.0 * profile.p1;
            let ts0 = build_training(8, C64::from(0.0), q, q, q).unwrap();
            for &th in &thetas {
                let m0 = lmmse_mse_closed_form(&ts0, &gains, &stats, sn).unwrap().per_param;
                let c0 = crlb_4hop(&ts0, &gains, th, sn).unwrap();
                for rho in [0.3, 0.6, 0.9] {
                    let ts = build_training(8, C64::from(rho), q, q, q).unwrap();
                    let m = lmmse_mse_closed_form(&ts, &gains, &stats, sn).unwrap().per_param;
                    let c = crlb_4hop(&ts, &gains, th, sn).unwrap();
                    checks += 1;
                    let ok = m0.0 <= m.0
                        && m0.1 <= m.1
                        && c0.valid
                        && c.valid
                        && c0.per_param.0 <= c.per_param.0
                        && c0.per_param.1 <= c.per_param.1;
                    if !ok {
                        bad.push(format!("snr {snr} scale {scale} rho {rho}"));
                    }
                }
            }
        }
    }
    outcome(bad.is_empty(), format!("{checks} comparisons, {} violations {:?}", bad.len(), bad))
}

fn c3() -> Outcome {
    let mut rng = RngStream::new(0, 3);
    let (mut worst_gap, mut worst_deriv) = (f64::NEG_INFINITY, 0.0f64);
    let instances = 1000;
    for i in 0..instances {
        let snr = 30.0 * (i % 7) as f64 / 6.0;
        let rho = [0.0, 0.3, 0.6, 0.9][i % 4];
        let profile = PowerProfile::from_snr_db(2, snr).unwrap();
        let gains = compute_gains(&profile, 8).unwrap();
        let q = 8.0 * profile.p1;
        let ts = build_training(8, C64::from_polar(rho, 0.7 * i as f64), q, q, q).unwrap();
        let ch = draw_channels(&profile, &mut rng).unwrap();
        let obs = run_training_round_4hop(&ch, &gains, &ts, profile.sigma_n2, &mut rng).unwrap();
        let est = MlEstimator::new(&ts, &gains, profile.sigma_n2).unwrap();
        let z = &obs.z3;
        let a_hat = est.intermediates(z).a_hat;
        let a_grid = est.grid_oracle(z).theta1_hat.norm() * gains.a0;
        let gap = est.objective(z, a_hat).unwrap() - est.objective(z, a_grid).unwrap();
        worst_gap = worst_gap.max(gap);
        let a = 2.0 * a_hat + 0.5 * gains.a0;
        let h = 1e-6;
        let fd = (est.objective(z, a + h).unwrap() - est.objective(z, a - h).unwrap()) / (2.0 * h);
        worst_deriv = worst_deriv.max(rel(fd, est.objective_derivative(z, a).unwrap()));
    }
    outcome(
        worst_gap <= 1e-9 && worst_deriv <= 1e-5,
        format!(
            "{instances} instances: max f(a_hat) - min grid f = {worst_gap:.3e}, max derivative gap {worst_deriv:.3e}"
        ),
    )
}

fn c4() -> Outcome {
    let mut rng = RngStream::new(0, 4);
    let mut u = |lo: f64, hi: f64| lo + (hi - lo) * (rng.cgauss(2.0).re.abs().min(3.0) / 3.0);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let profile = PowerProfile::from_snr_db(2, u(-5.0, 30.0)).unwrap();
        let gains = compute_gains(&profile, 8).unwrap();
        let q = 8.0 * profile.p1;
        let ts = build_training(8, C64::from_polar(u(0.0, 0.95), u(-3.0, 3.0)), q * u(0.2, 2.0), q * u(0.2, 2.0), q)
            .unwrap();
        let th = C64::new(u(-2.0, 2.0), u(-2.0, 2.0));
        let a = crlb_4hop(&ts, &gains, th, profile.sigma_n2).unwrap();
        let b = fim_crlb_oracle(&ts, &gains, th, profile.sigma_n2).unwrap();
        worst = worst.max(rel(a.per_param.0, b.per_param.0)).max(rel(a.per_param.1, b.per_param.1));
    }
    // coefficient sets with a nonzero improper term, which physical rank-2 pilots never produce
    let mut worst_d4: f64 = 0.0;
    for _ in 0..1000 {
        let (d1, d3) = (u(0.1, 50.0), u(0.1, 50.0));
        let c = u(0.0, 0.95);
        let d = CrlbCoefficients {
            d1,
            d2: C64::from_polar(c * (d1 * d3).sqrt(), u(-3.0, 3.0)),
            d3,
            d4: C64::from_polar(u(0.0, 0.95) * d1 * (1.0 - c * c), u(-3.0, 3.0)),
        };
        let (x, y) = d.crlb();
        let o = fim_crlb_from_coefficients(&d).unwrap();
        worst_d4 = worst_d4.max(rel(x, o.per_param.0)).max(rel(y, o.per_param.1));
    }
    outcome(
        worst <= 1e-8 && worst_d4 <= 1e-8,
        format!("1000 configs: max relative gap {worst:.3e}; 1000 coefficient sets with D4 != 0: {worst_d4:.3e}"),
    )
}

fn c5() -> Outcome {
    let t = run_experiment(&cfg(Scenario::FourhopMl, &[30.0], &[0.0], 10_000)).unwrap();
    let ratios: Vec<f64> = t.rows.iter().map(|r| r.empirical.unwrap() / r.closed_form.unwrap()).collect();
    outcome(
        ratios.iter().all(|q| (0.95..=1.5).contains(q)),
        format!("MSE/CRLB theta1 {:.4}, theta2 {:.4}", ratios[0], ratios[1]),
    )
}

fn c6() -> Outcome {
    let t = run_experiment(&cfg(Scenario::FourhopBaseline, &[20.0], &[0.0], 10_000)).unwrap();
    let get = |m: &str| t.rows.iter().find(|r| r.metric == m).unwrap().empirical.unwrap();
    let (l, b) = (get("mse_theta1_lmmse"), get("mse_theta1_baseline"));
    outcome(l < b, format!("LMMSE {l:.5e} vs point-to-point {b:.5e}"))
}

fn c7() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut rng = RngStream::new(0, 7);
    let profile = PowerProfile::equal_power(2, 10.0, 1.0, 0.0).unwrap();
    let gains = compute_gains(&profile, 8).unwrap();
    let xcfg = ExchangeConfig::from_profile(&profile, 16);
    let ch = draw_channels(&profile, &mut rng).unwrap();
    let rec = run_data_exchange_4hop(&ch, &gains, &xcfg, &CsiMode::Perfect, &mut rng).unwrap();
    worst = worst.max(rec.max_symbol_error());
    let mut decoded = rec.decoded.len();
    for n in [2, 4, 8] {
        let profile = PowerProfile::equal_power(n, 10.0, 1.0, 0.0).unwrap();
        let gains = ChainGains::from_profile(&profile, 8).unwrap();
        let xcfg = ExchangeConfig::from_profile(&profile, 16);
        let ts = build_training(8, C64::from(0.0), 80.0, 80.0, 80.0).unwrap();
        let ch = draw_channels(&profile, &mut rng).unwrap();
        let rec = run_data_exchange(&ch, &gains, &xcfg, &CsiMode::Perfect, &mut rng).unwrap();
        worst = worst.max(rec.max_symbol_error());
        decoded += rec.decoded.len();
        let obs = run_training_2nhop(&ch, &gains, &ts, 0.0, &mut rng).unwrap();
        let csi = estimated_csi(&obs, &ts, &gains).unwrap();
        let rec = run_data_exchange(&ch, &gains, &xcfg, &CsiMode::Estimated(csi), &mut rng).unwrap();
        worst = worst.max(rec.max_symbol_error());
        decoded += rec.decoded.len();
    }
    outcome(worst < 1e-9, format!("{decoded} symbols, max decoding error {worst:.3e}"))
}

fn asymptotic_gap(n: usize) -> f64 {
    let c = ExperimentConfig { n_hops: n, ..cfg(Scenario::AsymptoticCheck, &[0.0], &[0.0], 10_000) };
    let t = run_experiment(&c).unwrap();
    let r = t.rows.iter().find(|r| r.metric == "mse_varpi1").unwrap();
    rel(r.empirical.unwrap(), r.closed_form.unwrap())
}

fn c8() -> Outcome {
    let g8 = asymptotic_gap(8);
    let f = finite_n_noise_factor(0.5, 16).unwrap();
    let fgap = rel(f, 2.0);
    outcome(g8 < 0.10 && fgap < 1e-3, format!("N=8 MSE gap {g8:.4}; noise factor at N=16 {f:.6} (gap {fgap:.2e})"))
}

fn c9() -> Outcome {
    let t = run_experiment(&ExperimentConfig { n_hops: 8, ..cfg(Scenario::MultihopSweep, &[0.0], &[0.0, 0.5], 1) })
        .unwrap();
    let mut pass = true;
    let mut notes = Vec::new();
    for rho in [0.0, 0.5] {
        for p in ["varpi1", "varpi2"] {
            let v = |m: &str, n: usize| t.find(&format!("{m}_{p}"), 0.0, rho, n).unwrap().closed_form.unwrap();
            let below = v("lmmse_mse", 2) <= v("crlb", 2);
            let gap = rel(v("lmmse_mse", 8), v("crlb", 8));
            pass &= below && gap < 0.05;
            notes.push(format!("rho {rho} {p}: N=2 below {below}, N=8 gap {gap:.2e}"));
        }
    }
    outcome(pass, notes.join("; "))
}

fn c10() -> Outcome {
    let configs = [
        cfg(Scenario::FourhopLmmse, &[0.0, 20.0], &[0.0, 0.5], 2000),
        cfg(Scenario::FourhopMl, &[10.0], &[0.5], 2000),
        cfg(Scenario::FourhopAesnr, &[20.0], &[0.0], 300),
        ExperimentConfig { n_hops: 4, ..cfg(Scenario::AsymptoticCheck, &[0.0], &[0.0], 1000) },
    ];
    let mut same = true;
    for c in &configs {
        let outs: Vec<String> =
            [1, 4, 8].iter().map(|&w| csv_string(&run_experiment_with_workers(c, w).unwrap())).collect();
        same &= outs.windows(2).all(|p| p[0] == p[1]);
    }
    outcome(same, format!("{} scenarios under 1, 4 and 8 workers", configs.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("1", "LMMSE closed-form fidelity, 1e4 trials at 5%", c1),
        ("1", "LMMSE closed-form fidelity, 1e5 trials at 3%", c1_full),
        ("2", "orthogonal training optimal for MSE and CRLB", c2),
        ("3", "ML closed-form root vs brute-force grid", c3),
        ("4", "CRLB rational form vs FIM inverse", c4),
        ("5", "ML MSE within [0.95, 1.5] x CRLB at 30 dB", c5),
        ("6", "LMMSE beats point-to-point at 20 dB", c6),
        ("7", "noiseless exchange decodes exactly", c7),
        ("8", "2N-hop asymptotics", c8),
        ("9", "multihop LMMSE/CRLB crossover", c9),
        ("10", "byte-identical CSV across worker counts", c10),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        let start = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        println!("{verdict} criterion {id:>2}: {name} | {} | {:.1}s", o.detail, start.elapsed().as_secs_f64());
    }
    println!("{} of {} checks passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
