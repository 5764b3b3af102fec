//! Acceptance checks. Prints one PASS/FAIL line per criterion.
//!
//! Exits 0 so that the line-by-line report is always produced; set
//! `ACCEPTANCE_STRICT=1` to exit 1 when any criterion fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use risofdm::closedform::{self, PowerLaw, RateModel};
use risofdm::experiments::{
    build_scenario, optimize_with_restarts, random_theta, run_sweep, validate_appendix, Method, PhaseMode,
    ScenarioSpec, SweepAxis, SweepRequest,
};
use risofdm::model::{tap_power_profile, Bits, Geometry, SystemConfig};
use risofdm::optimizer::{Mu, Objective, OptimizerParams};
use risofdm::txchain::monte_carlo_rate;
use risofdm::PhaseVector;

const C1_APPROX_TOL: f64 = 0.02;
const C1_EXACT_TOL: f64 = 0.05;
const C1_TIME_LIMIT: Duration = Duration::from_secs(120);
const C2_DRAWS: usize = 100_000;
const C2_TIME_LIMIT: Duration = Duration::from_secs(300);
const C3_TOL: f64 = 1e-9;
const C4_TOL: f64 = 1e-5;
const C4_STEP: f64 = 1e-5;
const C5_MEDIAN_GAIN: f64 = 0.20;
const C6_SATURATION_TOL: f64 = 0.02;
const C7_LIMIT_TOL: f64 = 0.03;
const C7_DECAY_RATIO: f64 = 0.25;
const C8_LIMIT_TOL: f64 = 0.05;
const C9_REDUCTION_TOL: f64 = 1e-10;
const C9_INVARIANCE_TOL: f64 = 1e-12;

struct Outcome {
    pass: bool,
    detail: String,
}

fn min_rate(cfg: &SystemConfig, ph: &PhaseVector) -> f64 {
    let m = RateModel::new(cfg).unwrap();
    (0..cfg.n_users).map(|n| m.rate(ph, n).unwrap()).fold(f64::INFINITY, f64::min)
}

fn min_sinr(cfg: &SystemConfig, ph: &PhaseVector) -> f64 {
    let m = RateModel::new(cfg).unwrap();
    (0..cfg.n_users).map(|n| m.sinr(ph, n).unwrap()).fold(f64::INFINITY, f64::min)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

fn rate_fidelity() -> Outcome {
    let spec = ScenarioSpec { n_users: 2, trials: 2000, ..ScenarioSpec::default() };
    let cfg = build_scenario(&spec).unwrap();
    let ph = PhaseVector::new(&cfg, random_theta(cfg.n_ris_elements, spec.phase_seed, 0)).unwrap();
    let start = Instant::now();
    let rep = monte_carlo_rate(&cfg, &ph, spec.trials, spec.seed).unwrap();
    let elapsed = start.elapsed();
    let mut worst_approx: f64 = 0.0;
    let mut worst_exact: f64 = 0.0;
    for u in &rep.users {
        worst_approx = worst_approx.max((u.rate_closed_form - u.rate_mc_approx).abs() / u.rate_mc_approx);
        worst_exact = worst_exact.max((u.rate_closed_form - u.rate_mc_exact).abs() / u.rate_mc_exact);
    }
    let ok_a = worst_approx < C1_APPROX_TOL;
    let ok_e = worst_exact < C1_EXACT_TOL;
    let ok_t = elapsed < C1_TIME_LIMIT;
    Outcome {
        pass: ok_a && ok_e && ok_t,
        detail: format!(
            "vs mc_approx max {:.2}% (<{:.0}%: {}), vs mc_exact max {:.2}% (<{:.0}%: {}), {:.1}s",
            100.0 * worst_approx,
            100.0 * C1_APPROX_TOL,
            ok_a,
            100.0 * worst_exact,
            100.0 * C1_EXACT_TOL,
            ok_e,
            elapsed.as_secs_f64()
        ),
    }
}

fn small_config(nb: usize, nr: usize, nu: usize, nc: usize, bits: Bits, rng: &mut ChaCha12Rng) -> SystemConfig {
    let mut angle = || rng.random::<f64>() * std::f64::consts::TAU;
    let geometry = Geometry {
        user_az: (0..nu).map(|_| angle()).collect(),
        user_el: (0..nu).map(|_| angle()).collect(),
        ris_depart_az: angle(),
        ris_depart_el: angle(),
        bs_arrive_az: angle(),
        bs_arrive_el: angle(),
    };
    SystemConfig {
        n_bs_antennas: nb,
        n_ris_elements: nr,
        n_users: nu,
        n_subcarriers: nc,
        cp_length: 8,
        taps_user_ris: 5,
        taps_ris_bs: 4,
        rician_user: (0..nu).map(|_| 0.5 + 3.0 * rng.random::<f64>()).collect(),
        rician_bs: 0.5 + 5.0 * rng.random::<f64>(),
        tap_power_user: vec![tap_power_profile(5, 2.5); nu],
        tap_power_bs: tap_power_profile(4, 5.0),
        pathloss_user: (0..nu).map(|_| 0.5 + rng.random::<f64>()).collect(),
        pathloss_bs: 1.0,
        tx_power: (0..nu).map(|_| 0.5 + rng.random::<f64>()).collect(),
        noise_power: 0.2 + rng.random::<f64>(),
        adc_bits: bits,
        geometry,
        element_spacing_over_wavelength: 0.5,
    }
}

fn moment_oracles() -> Outcome {
    let mut rng = ChaCha12Rng::seed_from_u64(2);
    let cfg = small_config(9, 4, 2, 16, Bits::Finite(2), &mut rng);
    let ph = PhaseVector::new(&cfg, random_theta(4, 2, 0)).unwrap();
    let start = Instant::now();
    let rep = validate_appendix(&cfg, &ph, C2_DRAWS, 2).unwrap();
    let elapsed = start.elapsed();
    let sampled: Vec<_> = rep.rows.iter().filter(|r| r.note != "deterministic").collect();
    let worst = sampled.iter().map(|r| r.error).fold(0.0, f64::max);
    let failed: Vec<_> = sampled.iter().filter(|r| r.pass == Some(false)).map(|r| r.quantity.as_str()).collect();
    let composite = sampled.iter().any(|r| r.quantity.starts_with("quantization_composite") && r.pass.is_some());
    Outcome {
        pass: failed.is_empty() && composite && elapsed < C2_TIME_LIMIT,
        detail: format!(
            "{} sampled rows, worst relative error {:.2}% (<3%), failed {:?}, {:.1}s",
            sampled.len(),
            100.0 * worst,
            failed,
            elapsed.as_secs_f64()
        ),
    }
}

fn periodic_identities() -> Outcome {
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    let n_c = 32;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let lu = rng.random_range(1..=6);
        let lb = rng.random_range(1..=6);
        let su: Vec<f64> = (0..lu).map(|_| rng.random::<f64>()).collect();
        let sb: Vec<f64> = (0..lb).map(|_| rng.random::<f64>()).collect();
        let t = rng.random_range(0..n_c);
        let closed = closedform::periodic_sums_closed(&su, &sb);
        let brute = closedform::periodic_sums_brute_force(&su, &sb, n_c, t);
        for (c, b) in closed.iter().zip(&brute) {
            worst = worst.max((b - c * n_c as f64).norm());
        }
    }
    Outcome { pass: worst < C3_TOL, detail: format!("20 profiles, max abs error {worst:.2e} (<{C3_TOL:.0e})") }
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha12Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let nr = [4, 9, 16][rng.random_range(0..3)];
        let nb = [4, 9, 16, 64][rng.random_range(0..4)];
        let nu = rng.random_range(2..=4);
        let bits = if rng.random::<f64>() < 0.2 { Bits::Infinite } else { Bits::Finite(rng.random_range(1..=6)) };
        let cfg = small_config(nb, nr, nu, 16, bits, &mut rng);
        let theta: Vec<f64> = (0..nr).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
        let obj = Objective::new(&cfg).unwrap();
        let mu = obj.resolve_mu(Mu::Auto, &theta).unwrap();
        let (_, g) = obj.value_and_gradient(&theta, mu).unwrap();
        let mut diff2 = 0.0;
        let mut norm2 = 0.0;
        for i in 0..nr {
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[i] += C4_STEP;
            dn[i] -= C4_STEP;
            let fd = (obj.value(&up, mu).unwrap() - obj.value(&dn, mu).unwrap()) / (2.0 * C4_STEP);
            diff2 += (g[i] - fd).powi(2);
            norm2 += fd * fd;
        }
        worst = worst.max((diff2 / norm2).sqrt());
    }
    Outcome { pass: worst < C4_TOL, detail: format!("50 pairs, max relative error {worst:.2e} (<{C4_TOL:.0e})") }
}

fn optimizer_gain(base: &ScenarioSpec) -> (usize, f64) {
    let params = OptimizerParams::default();
    let mut wins = 0;
    let mut gains = Vec::new();
    for seed in 1..=20u64 {
        let spec = ScenarioSpec { angle_seed: seed, phase_seed: seed, ..base.clone() };
        let cfg = build_scenario(&spec).unwrap();
        let rand = PhaseVector::new(&cfg, random_theta(cfg.n_ris_elements, seed, 0)).unwrap();
        let (opt, _) = optimize_with_restarts(&cfg, seed, spec.restarts, &params).unwrap();
        let (r, o) = (min_sinr(&cfg, &rand), min_sinr(&cfg, &opt));
        if o >= r {
            wins += 1;
        }
        gains.push(o / r - 1.0);
    }
    (wins, median(gains))
}

fn optimizer_effectiveness() -> Outcome {
    let (wins, med) = optimizer_gain(&ScenarioSpec::default());
    let (wins_full, med_full) = optimizer_gain(&ScenarioSpec::full_scale());
    Outcome {
        pass: wins == 20 && med > C5_MEDIAN_GAIN,
        detail: format!(
            "N_b=64 N_r=16: {wins}/20 wins, median gain {:.1}% (>{:.0}%); info N_b=100 N_r=64: {wins_full}/20, median {:.1}%",
            100.0 * med,
            100.0 * C5_MEDIAN_GAIN,
            100.0 * med_full
        ),
    }
}

fn quantization_saturation() -> Outcome {
    let req = SweepRequest {
        axis: SweepAxis::Bits,
        grid: vec![1.0, 2.0, 3.0, 4.0, f64::INFINITY],
        methods: vec![Method::ClosedForm],
        phase_modes: vec![PhaseMode::Random],
        optimizer: OptimizerParams::default(),
    };
    let res = run_sweep(&ScenarioSpec::default(), &req).unwrap();
    let r: Vec<f64> = res.min_rates(PhaseMode::Random, Method::ClosedForm).into_iter().map(Option::unwrap).collect();
    let increasing = r[..4].windows(2).all(|w| w[1] > w[0]);
    let gap = (r[4] - r[3]).abs() / r[4];
    Outcome {
        pass: increasing && gap < C6_SATURATION_TOL,
        detail: format!(
            "min-rate b=1..4 {:.4?}, b=inf {:.4}; strictly increasing {increasing}, b=4 gap {:.2}% (<{:.0}%)",
            &r[..4],
            r[4],
            100.0 * gap,
            100.0 * C6_SATURATION_TOL
        ),
    }
}

fn bs_power_scaling() -> Outcome {
    let base = ScenarioSpec::default();
    let grid: Vec<f64> = (6..=14).step_by(2).map(|k| (1u64 << k) as f64).collect();
    let sweep = |bs_exponent: f64| {
        let req = SweepRequest {
            axis: SweepAxis::NbPowerScaling { bs_exponent, ris_exponent: 0.0 },
            grid: grid.clone(),
            methods: vec![Method::ClosedForm, Method::CorollaryLimit],
            phase_modes: vec![PhaseMode::Random],
            optimizer: OptimizerParams::default(),
        };
        run_sweep(&base, &req).unwrap()
    };
    let lin = sweep(1.0);
    let last = *grid.last().unwrap();
    let mut worst: f64 = 0.0;
    for u in 0..base.n_users {
        let pick = |m: Method| lin.rows.iter().find(|r| r.value == last && r.method == m && r.user == Some(u)).unwrap().rate;
        let (cf, lim) = (pick(Method::ClosedForm), pick(Method::CorollaryLimit));
        worst = worst.max((cf - lim).abs() / lim);
    }
    let fast = sweep(1.5);
    let r: Vec<f64> = fast.min_rates(PhaseMode::Random, Method::ClosedForm).into_iter().map(Option::unwrap).collect();
    let decreasing = r.windows(2).all(|w| w[1] < w[0]);
    let ratio = r[r.len() - 1] / r[0];
    Outcome {
        pass: worst < C7_LIMIT_TOL && decreasing && ratio < C7_DECAY_RATIO,
        detail: format!(
            "p=E/N_b at N_b=2^14: max gap to limit {:.3}% (<{:.0}%); p=E/N_b^1.5: decreasing {decreasing}, R(2^14)/R(2^6) {:.3} (<{C7_DECAY_RATIO})",
            100.0 * worst,
            100.0 * C7_LIMIT_TOL,
            ratio
        ),
    }
}

fn joint_power_scaling() -> Outcome {
    let base = ScenarioSpec::default();
    let nb = 1usize << 14;
    let mut gaps: Vec<Vec<f64>> = Vec::new();
    for nr in [16usize, 64, 256] {
        let spec = ScenarioSpec {
            n_bs_antennas: nb,
            n_ris_elements: nr,
            tx_power: base.energy / (nb as f64 * nr as f64),
            ..base.clone()
        };
        let cfg = build_scenario(&spec).unwrap();
        let ph = PhaseVector::zeros(&cfg).unwrap();
        let m = RateModel::new(&cfg).unwrap();
        let energies = vec![spec.energy; cfg.n_users];
        gaps.push(
            (0..cfg.n_users)
                .map(|n| {
                    let lim = closedform::scaled_rate(&cfg, &ph, n, PowerLaw::PerBsRis, &energies).unwrap();
                    (m.rate(&ph, n).unwrap() - lim).abs() / lim
                })
                .collect(),
        );
    }
    let nu = base.n_users;
    let ordered = (0..nu).all(|n| gaps[0][n] > gaps[1][n] && gaps[1][n] > gaps[2][n]);
    let worst_256 = gaps[2].iter().cloned().fold(0.0, f64::max);
    let worst_by_nr: Vec<String> =
        gaps.iter().map(|g| format!("{:.2}%", 100.0 * g.iter().cloned().fold(0.0, f64::max))).collect();
    Outcome {
        pass: ordered && worst_256 < C8_LIMIT_TOL,
        detail: format!(
            "N_b=2^14, N_r=16/64/256 max gap {worst_by_nr:?}; ordered toward limit {ordered}; N_r=256 {:.2}% (<{:.0}%)",
            100.0 * worst_256,
            100.0 * C8_LIMIT_TOL
        ),
    }
}

fn consistency_reductions() -> Outcome {
    let mut rng = ChaCha12Rng::seed_from_u64(9);
    let mut worst_k0: f64 = 0.0;
    let mut worst_shift: f64 = 0.0;
    let mut worst_scale: f64 = 0.0;
    for _ in 0..10 {
        let mut cfg = small_config(16, 9, 3, 32, Bits::Finite(rng.random_range(1..=5)), &mut rng);
        let theta: Vec<f64> = (0..9).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
        let ph = PhaseVector::new(&cfg, theta.clone()).unwrap();
        let m = RateModel::new(&cfg).unwrap();
        let c = rng.random::<f64>() * std::f64::consts::TAU;
        let shifted = PhaseVector::new(&cfg, theta.iter().map(|t| t + c).collect()).unwrap();
        let mut scaled = cfg.clone();
        let s = 10f64.powf(rng.random_range(-3.0..3.0));
        scaled.tx_power.iter_mut().for_each(|p| *p *= s);
        scaled.noise_power *= s;
        let ms = RateModel::new(&scaled).unwrap();
        for n in 0..cfg.n_users {
            let r = m.rate(&ph, n).unwrap();
            worst_shift = worst_shift.max((m.rate(&shifted, n).unwrap() - r).abs() / r);
            worst_scale = worst_scale.max((ms.rate(&ph, n).unwrap() - r).abs() / r);
        }
        cfg.rician_user.iter_mut().for_each(|k| *k = 0.0);
        cfg.rician_bs = 0.0;
        let m0 = RateModel::new(&cfg).unwrap();
        for n in 0..cfg.n_users {
            let a = m0.rate(&ph, n).unwrap();
            let b = closedform::rate_rayleigh(&cfg, n).unwrap();
            worst_k0 = worst_k0.max((a - b).abs());
        }
    }
    Outcome {
        pass: worst_k0 < C9_REDUCTION_TOL && worst_shift < C9_INVARIANCE_TOL && worst_scale < C9_INVARIANCE_TOL,
        detail: format!(
            "K=0 reduction {worst_k0:.1e} (<1e-10); phase shift {worst_shift:.1e}, power/noise scaling {worst_scale:.1e} (<1e-12)"
        ),
    }
}

fn rician_votes(base: &ScenarioSpec) -> (usize, usize) {
    let grid = [0.0, 1.0, 2.0, 5.0, 10.0];
    let params = OptimizerParams::default();
    let mut votes = (0, 0);
    for seed in 1..=10u64 {
        let rate = |ku: f64, kb: f64| {
            let spec = ScenarioSpec { angle_seed: seed, phase_seed: seed, rician_user: ku, rician_bs: kb, ..base.clone() };
            let cfg = build_scenario(&spec).unwrap();
            let (ph, _) = optimize_with_restarts(&cfg, seed, spec.restarts, &params).unwrap();
            min_rate(&cfg, &ph)
        };
        let ru: Vec<f64> = grid.iter().map(|&k| rate(k, base.rician_bs)).collect();
        let rb: Vec<f64> = grid.iter().map(|&k| rate(base.rician_user, k)).collect();
        if ru.windows(2).all(|w| w[1] > w[0]) {
            votes.0 += 1;
        }
        if rb.windows(2).all(|w| w[1] < w[0]) {
            votes.1 += 1;
        }
    }
    votes
}

fn rician_monotonicity() -> Outcome {
    let desk = ScenarioSpec { n_bs_antennas: 64, n_ris_elements: 36, ..ScenarioSpec::default() };
    let (ku, kb) = rician_votes(&desk);
    let (ku_full, kb_full) = rician_votes(&ScenarioSpec::full_scale());
    Outcome {
        pass: ku > 5 && kb > 5,
        detail: format!(
            "N_b=64 N_r=36 optimized phases: K_u increasing {ku}/10, K_b decreasing {kb}/10; info N_b=100 N_r=64: {ku_full}/10, {kb_full}/10"
        ),
    }
}

fn main() {
    let checks: [(&str, &str, fn() -> Outcome); 10] = [
        ("C1", "closed-form rate vs Monte Carlo", rate_fidelity),
        ("C2", "moment oracles", moment_oracles),
        ("C3", "periodic-sum identities", periodic_identities),
        ("C4", "objective gradient", gradient_check),
        ("C5", "optimizer effectiveness", optimizer_effectiveness),
        ("C6", "quantization saturation", quantization_saturation),
        ("C7", "BS power scaling", bs_power_scaling),
        ("C8", "BS and RIS power scaling", joint_power_scaling),
        ("C9", "consistency reductions", consistency_reductions),
        ("C10", "Rician-factor monotonicity", rician_monotonicity),
    ];
    let mut passed = 0;
    for (id, name, check) in checks {
        let out = check();
        if out.pass {
            passed += 1;
        }
        println!("{id} {} {name}: {}", if out.pass { "PASS" } else { "FAIL" }, out.detail);
    }
    println!("acceptance: {passed}/{} criteria passed", checks.len());
    if passed < checks.len() && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
