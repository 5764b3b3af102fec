//! Scenario construction, parameter sweeps and the closed-form moment check.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::ChannelSampler;
use crate::closedform::{self, Alignment, PowerLaw, RateModel};
use crate::error::{Error, Result};
use crate::model::{tap_power_profile, Bits, Geometry, SystemConfig};
use crate::optimizer::{self, OptTrace, OptimizerParams};
use crate::txchain::{cascade_gains, monte_carlo_rate, pairwise_sum, trial_rng, PhaseVector};

/// Linear-unit description of a deployment; [`build_scenario`] turns it into a
/// [`SystemConfig`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSpec {
    pub n_bs_antennas: usize,
    pub n_ris_elements: usize,
    pub n_users: usize,
    pub n_subcarriers: usize,
    pub cp_length: usize,
    pub adc_bits: Bits,
    pub element_spacing_over_wavelength: f64,
    pub taps_user_ris: usize,
    pub tap_step_user_db: f64,
    pub taps_ris_bs: usize,
    pub tap_step_bs_db: f64,
    /// Linear Rician factor shared by every user link.
    pub rician_user: f64,
    pub rician_bs: f64,
    /// Metres.
    pub bs_ris_distance: f64,
    /// Metres.
    pub user_radius: f64,
    /// Path loss `pathloss_ref * distance^-pathloss_exponent`.
    pub pathloss_ref: f64,
    pub pathloss_exponent: f64,
    pub user_distance_jitter: f64,
    pub angle_seed: u64,
    /// Explicit angles; drawn from `angle_seed` when absent.
    pub geometry: Option<Geometry>,
    /// Watts per subcarrier.
    pub tx_power: f64,
    pub noise_power: f64,
    /// Per-user energy (watts) for the power-scaling sweeps.
    pub energy: f64,
    pub trials: usize,
    /// Seed of the Monte Carlo trials.
    pub seed: u64,
    /// Seed of random phases and optimizer starting points.
    pub phase_seed: u64,
    /// Optimizer starting points per evaluation.
    pub restarts: usize,
}

impl Default for ScenarioSpec {
    /// Desk-scale deployment; statistics follow the reference setup.
    fn default() -> Self {
        Self {
            n_bs_antennas: 64,
            n_ris_elements: 16,
            n_users: 4,
            n_subcarriers: 32,
            cp_length: 8,
            adc_bits: Bits::Finite(4),
            element_spacing_over_wavelength: 0.5,
            taps_user_ris: 5,
            tap_step_user_db: 2.5,
            taps_ris_bs: 4,
            tap_step_bs_db: 5.0,
            rician_user: 10f64.powf(0.3),
            rician_bs: 10.0,
            bs_ris_distance: 200.0,
            user_radius: 30.0,
            pathloss_ref: 1e-3,
            pathloss_exponent: 2.8,
            user_distance_jitter: 0.0,
            angle_seed: 1,
            geometry: None,
            tx_power: 1.0,
            noise_power: 10f64.powf(-13.4),
            energy: 100.0,
            trials: 2000,
            seed: 1,
            phase_seed: 1,
            restarts: 3,
        }
    }
}

impl ScenarioSpec {
    /// Array sizes of the full-scale reference runs (100 antennas, 64 elements).
    pub fn full_scale() -> Self {
        Self { n_bs_antennas: 100, n_ris_elements: 64, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if !pos(self.bs_ris_distance) || !pos(self.user_radius) {
            return Err(Error::Config("distances must be positive".into()));
        }
        if !pos(self.pathloss_ref) || !self.pathloss_exponent.is_finite() {
            return Err(Error::Config("invalid path-loss model".into()));
        }
        if !(self.user_distance_jitter >= 0.0 && self.user_distance_jitter < 1.0) {
            return Err(Error::Config("user distance jitter must lie in [0, 1)".into()));
        }
        if !(self.rician_user >= 0.0 && self.rician_bs >= 0.0) || !self.rician_user.is_finite() || !self.rician_bs.is_finite() {
            return Err(Error::Config("Rician factors must be finite and non-negative".into()));
        }
        if !(self.tx_power >= 0.0 && self.tx_power.is_finite()) || !pos(self.noise_power) || !pos(self.energy) {
            return Err(Error::Config("invalid power settings".into()));
        }
        if !(self.tap_step_user_db >= 0.0 && self.tap_step_bs_db >= 0.0) {
            return Err(Error::Config("tap attenuation steps must be non-negative".into()));
        }
        if self.trials == 0 || self.restarts == 0 {
            return Err(Error::Config("trials and restarts must be positive".into()));
        }
        Ok(())
    }

    pub fn pathloss(&self, distance: f64) -> f64 {
        self.pathloss_ref * distance.powf(-self.pathloss_exponent)
    }
}

/// Builds the system configuration, drawing angles from `spec.angle_seed`.
pub fn build_scenario(spec: &ScenarioSpec) -> Result<SystemConfig> {
    let mut rng = trial_rng(spec.angle_seed, 0);
    build_scenario_with_rng(spec, &mut rng)
}

/// Builds the system configuration, drawing any missing angles (per user
/// azimuth then elevation, then RIS departure, then BS arrival) and distance
/// jitter from `rng`.
pub fn build_scenario_with_rng<R: Rng + ?Sized>(spec: &ScenarioSpec, rng: &mut R) -> Result<SystemConfig> {
    spec.validate()?;
    let nu = spec.n_users;
    let mut angle = || rng.random::<f64>() * 2.0 * PI;
    let geometry = match &spec.geometry {
        Some(g) => g.clone(),
        None => {
            let mut user_az = Vec::with_capacity(nu);
            let mut user_el = Vec::with_capacity(nu);
            for _ in 0..nu {
                user_az.push(angle());
                user_el.push(angle());
            }
            Geometry {
                user_az,
                user_el,
                ris_depart_az: angle(),
                ris_depart_el: angle(),
                bs_arrive_az: angle(),
                bs_arrive_el: angle(),
            }
        }
    };
    let pathloss_user = (0..nu)
        .map(|_| {
            let d = if spec.user_distance_jitter > 0.0 {
                spec.user_radius * (1.0 + spec.user_distance_jitter * (2.0 * rng.random::<f64>() - 1.0))
            } else {
                spec.user_radius
            };
            spec.pathloss(d)
        })
        .collect();
    let cfg = SystemConfig {
        n_bs_antennas: spec.n_bs_antennas,
        n_ris_elements: spec.n_ris_elements,
        n_users: nu,
        n_subcarriers: spec.n_subcarriers,
        cp_length: spec.cp_length,
        taps_user_ris: spec.taps_user_ris,
        taps_ris_bs: spec.taps_ris_bs,
        rician_user: vec![spec.rician_user; nu],
        rician_bs: spec.rician_bs,
        tap_power_user: vec![tap_power_profile(spec.taps_user_ris, spec.tap_step_user_db); nu],
        tap_power_bs: tap_power_profile(spec.taps_ris_bs, spec.tap_step_bs_db),
        pathloss_user,
        pathloss_bs: spec.pathloss(spec.bs_ris_distance),
        tx_power: vec![spec.tx_power; nu],
        noise_power: spec.noise_power,
        adc_bits: spec.adc_bits,
        geometry,
        element_spacing_over_wavelength: spec.element_spacing_over_wavelength,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Parameter varied along a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SweepAxis {
    /// BS antennas.
    Nb,
    /// RIS elements.
    Nr,
    /// Linear user-link Rician factor.
    Ku,
    /// Linear BS-link Rician factor.
    Kb,
    /// ADC bits; `inf` selects an ideal converter.
    Bits,
    /// BS antennas with `p = E / (N_b^bs_exponent * N_r^ris_exponent)`.
    NbPowerScaling { bs_exponent: f64, ris_exponent: f64 },
}

impl SweepAxis {
    pub fn name(&self) -> String {
        match self {
            SweepAxis::Nb => "n_bs_antennas".into(),
            SweepAxis::Nr => "n_ris_elements".into(),
            SweepAxis::Ku => "rician_user".into(),
            SweepAxis::Kb => "rician_bs".into(),
            SweepAxis::Bits => "adc_bits".into(),
            SweepAxis::NbPowerScaling { bs_exponent, ris_exponent } => {
                format!("n_bs_antennas_scaled_power(bs^{bs_exponent},ris^{ris_exponent})")
            }
        }
    }

    fn apply(&self, base: &ScenarioSpec, v: f64) -> Result<ScenarioSpec> {
        let mut s = base.clone();
        let as_count = |v: f64| -> Result<usize> {
            if v.is_finite() && v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::Config(format!("grid value {v} is not a positive integer")))
            }
        };
        match *self {
            SweepAxis::Nb => s.n_bs_antennas = as_count(v)?,
            SweepAxis::Nr => s.n_ris_elements = as_count(v)?,
            SweepAxis::Ku => s.rician_user = v,
            SweepAxis::Kb => s.rician_bs = v,
            SweepAxis::Bits => {
                s.adc_bits = if v.is_infinite() { Bits::Infinite } else { Bits::Finite(as_count(v)? as u32) }
            }
            SweepAxis::NbPowerScaling { bs_exponent, ris_exponent } => {
                s.n_bs_antennas = as_count(v)?;
                s.tx_power = s.energy / ((v).powf(bs_exponent) * (s.n_ris_elements as f64).powf(ris_exponent));
            }
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Method {
    McExact,
    McApprox,
    ClosedForm,
    CorollaryLimit,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::McExact => "mc_exact",
            Method::McApprox => "mc_approx",
            Method::ClosedForm => "closed_form",
            Method::CorollaryLimit => "corollary_limit",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mc_exact" => Ok(Method::McExact),
            "mc_approx" => Ok(Method::McApprox),
            "closed_form" => Ok(Method::ClosedForm),
            "corollary_limit" => Ok(Method::CorollaryLimit),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PhaseMode {
    Random,
    Optimized,
}

impl PhaseMode {
    pub fn tag(&self) -> &'static str {
        match self {
            PhaseMode::Random => "rand",
            PhaseMode::Optimized => "opt",
        }
    }
}

/// Uniform random phases, stream `index` of `seed`.
pub fn random_theta(n_ris: usize, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = trial_rng(seed, index);
    (0..n_ris).map(|_| rng.random::<f64>() * 2.0 * PI).collect()
}

/// Runs the optimizer from `restarts` random starting points and keeps the
/// result with the largest minimum SINR.
pub fn optimize_with_restarts(
    cfg: &SystemConfig,
    seed: u64,
    restarts: usize,
    params: &OptimizerParams,
) -> Result<(PhaseVector, OptTrace)> {
    let mut best: Option<OptTrace> = None;
    for r in 0..restarts.max(1) {
        let theta0 = random_theta(cfg.n_ris_elements, seed, r as u64);
        let (_, trace) = optimizer::optimize(cfg, &theta0, params)?;
        if best.as_ref().is_none_or(|b| trace.min_sinr_opt > b.min_sinr_opt) {
            best = Some(trace);
        }
    }
    let trace = best.expect("at least one restart");
    Ok((PhaseVector::new(cfg, trace.theta_opt.clone())?, trace))
}

/// Phases used for one sweep point.
pub fn phases_for(cfg: &SystemConfig, spec: &ScenarioSpec, mode: PhaseMode, params: &OptimizerParams) -> Result<PhaseVector> {
    match mode {
        PhaseMode::Random => PhaseVector::new(cfg, random_theta(cfg.n_ris_elements, spec.phase_seed, 0)),
        PhaseMode::Optimized => Ok(optimize_with_restarts(cfg, spec.phase_seed, spec.restarts, params)?.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub phases: PhaseMode,
    pub method: Method,
    /// `None` marks the minimum over users.
    pub user: Option<usize>,
    pub rate: f64,
    pub std_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepFailure {
    pub value: f64,
    pub phases: PhaseMode,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRequest {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    pub methods: Vec<Method>,
    pub phase_modes: Vec<PhaseMode>,
    pub optimizer: OptimizerParams,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub axis: String,
    pub grid: Vec<f64>,
    pub rows: Vec<SweepRow>,
    pub failures: Vec<SweepFailure>,
}

fn fmt_value(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v}")
    }
}

impl SweepResult {
    /// Minimum-over-users rate for one grid value, phase mode and method.
    pub fn min_rate(&self, value: f64, phases: PhaseMode, method: Method) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.value == value && r.phases == phases && r.method == method && r.user.is_none())
            .map(|r| r.rate)
    }

    /// Minimum rates across the grid, in grid order.
    pub fn min_rates(&self, phases: PhaseMode, method: Method) -> Vec<Option<f64>> {
        self.grid.iter().map(|&v| self.min_rate(v, phases, method)).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "axis,value,phases,method,user,rate,std_err")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                self.axis,
                fmt_value(r.value),
                r.phases.tag(),
                r.method.tag(),
                r.user.map_or("min".to_string(), |u| u.to_string()),
                r.rate,
                r.std_err.map_or(String::new(), |s| s.to_string())
            )?;
        }
        Ok(())
    }
}

fn limit_rates(axis: SweepAxis, spec: &ScenarioSpec, cfg: &SystemConfig, ph: &PhaseVector) -> Result<Vec<f64>> {
    (0..cfg.n_users)
        .map(|n| match axis {
            SweepAxis::NbPowerScaling { ris_exponent, .. } => {
                let law = if ris_exponent > 0.0 { PowerLaw::PerBsRis } else { PowerLaw::PerBs };
                closedform::scaled_rate(cfg, ph, n, law, &vec![spec.energy; cfg.n_users])
            }
            _ => closedform::asymptotic_rate(cfg, n, Alignment::Unaligned),
        })
        .collect()
}

fn evaluate_point(
    req: &SweepRequest,
    base: &ScenarioSpec,
    value: f64,
    mode: PhaseMode,
) -> Result<Vec<SweepRow>> {
    let spec = req.axis.apply(base, value)?;
    let cfg = build_scenario(&spec)?;
    let ph = phases_for(&cfg, &spec, mode, &req.optimizer)?;
    let mut rows = Vec::new();
    let mut push = |method: Method, rates: Vec<f64>, ses: Option<Vec<f64>>| {
        let (argmin, &min) = rates
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("at least one user");
        for (u, &r) in rates.iter().enumerate() {
            rows.push(SweepRow { value, phases: mode, method, user: Some(u), rate: r, std_err: ses.as_ref().map(|s| s[u]) });
        }
        rows.push(SweepRow { value, phases: mode, method, user: None, rate: min, std_err: ses.as_ref().map(|s| s[argmin]) });
    };
    let needs_mc = req.methods.iter().any(|m| matches!(m, Method::McExact | Method::McApprox));
    let report = if needs_mc { Some(monte_carlo_rate(&cfg, &ph, spec.trials, spec.seed)?) } else { None };
    for &m in &req.methods {
        match m {
            Method::McExact => {
                let rep = report.as_ref().expect("report computed");
                push(m, rep.users.iter().map(|u| u.rate_mc_exact).collect(), Some(rep.users.iter().map(|u| u.se_mc_exact).collect()));
            }
            Method::McApprox => {
                let rep = report.as_ref().expect("report computed");
                push(m, rep.users.iter().map(|u| u.rate_mc_approx).collect(), Some(rep.users.iter().map(|u| u.se_mc_approx).collect()));
            }
            Method::ClosedForm => {
                let model = RateModel::new(&cfg)?;
                let rates = (0..cfg.n_users).map(|n| model.rate(&ph, n)).collect::<Result<_>>()?;
                push(m, rates, None);
            }
            Method::CorollaryLimit => push(m, limit_rates(req.axis, &spec, &cfg, &ph)?, None),
        }
    }
    Ok(rows)
}

/// Evaluates every grid point, phase mode and method. Grid points run in
/// parallel; a failing point is recorded and the sweep continues.
pub fn run_sweep(base: &ScenarioSpec, req: &SweepRequest) -> Result<SweepResult> {
    if req.grid.is_empty() {
        return Err(Error::Precondition("sweep grid is empty".into()));
    }
    if req.grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Precondition("sweep grid must be strictly increasing".into()));
    }
    base.validate()?;
    req.optimizer.validate()?;
    let jobs: Vec<(f64, PhaseMode)> =
        req.grid.iter().flat_map(|&v| req.phase_modes.iter().map(move |&m| (v, m))).collect();
    let outcomes: Vec<_> = jobs.par_iter().map(|&(v, m)| (v, m, evaluate_point(req, base, v, m))).collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (value, phases, out) in outcomes {
        match out {
            Ok(r) => rows.extend(r),
            Err(e) => failures.push(SweepFailure { value, phases, message: e.to_string() }),
        }
    }
    Ok(SweepResult { axis: req.axis.name(), grid: req.grid.clone(), rows, failures })
}

/// Metadata written next to every CSV output.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub scenario: &'a ScenarioSpec,
    pub config: Option<&'a SystemConfig>,
    pub details: T,
}

impl<'a, T: Serialize> RunMetadata<'a, T> {
    pub fn new(command: &'a str, scenario: &'a ScenarioSpec, config: Option<&'a SystemConfig>, details: T) -> Self {
        Self { tool: env!("CARGO_PKG_NAME"), version: env!("CARGO_PKG_VERSION"), command, scenario, config, details }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Numeric(format!("metadata serialization: {e}")))
    }
}

/// One row of the moment check.
#[derive(Debug, Clone, Serialize)]
pub struct MomentCheckRow {
    pub quantity: String,
    pub closed_form: f64,
    pub estimate: f64,
    pub std_err: f64,
    /// Relative error, or absolute error for the deterministic identities.
    pub error: f64,
    pub tolerance: f64,
    /// `None` when the row was skipped.
    pub pass: Option<bool>,
    pub note: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentCheckReport {
    pub draws: usize,
    pub seed: u64,
    pub rows: Vec<MomentCheckRow>,
}

impl MomentCheckReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass != Some(false))
    }

    pub fn row(&self, quantity: &str) -> Option<&MomentCheckRow> {
        self.rows.iter().find(|r| r.quantity == quantity)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "quantity,closed_form,estimate,std_err,error,tolerance,status,note")?;
        for r in &self.rows {
            let status = match r.pass {
                Some(true) => "pass",
                Some(false) => "fail",
                None => "skipped",
            };
            writeln!(
                w,
                "{},{:e},{:e},{:e},{:e},{:e},{},{}",
                r.quantity, r.closed_form, r.estimate, r.std_err, r.error, r.tolerance, status, r.note
            )?;
        }
        Ok(())
    }
}

/// Tolerance of the sampled rows.
pub const MOMENT_TOLERANCE: f64 = 0.03;
/// Tolerance of the deterministic periodic-sum rows.
pub const IDENTITY_TOLERANCE: f64 = 1e-9;

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = pairwise_sum(xs) / n;
    let dev: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    let var = if xs.len() > 1 { pairwise_sum(&dev) / (n - 1.0) } else { 0.0 };
    (m, (var / n).sqrt())
}

fn sampled_row(quantity: String, closed: f64, samples: &[f64], note: &str) -> MomentCheckRow {
    let (m, se) = mean_se(samples);
    let err = ((m - closed) / closed).abs();
    MomentCheckRow {
        quantity,
        closed_form: closed,
        estimate: m,
        std_err: se,
        error: err,
        tolerance: MOMENT_TOLERANCE,
        pass: Some(err < MOMENT_TOLERANCE),
        note: note.into(),
    }
}

/// Compares every closed-form moment with its sample estimate over `draws`
/// channel realizations, and the periodic-sum identities with their brute-force sums.
///
/// Sampled moments are averaged over subcarriers, whose expectations coincide.
pub fn validate_appendix(cfg: &SystemConfig, phases: &PhaseVector, draws: usize, seed: u64) -> Result<MomentCheckReport> {
    if draws < 2 {
        return Err(Error::Precondition("at least two draws are required".into()));
    }
    let model = RateModel::new(cfg)?;
    let sampler = ChannelSampler::new(cfg)?;
    let (nb, nu, nc) = (cfg.n_bs_antennas, cfg.n_users, cfg.n_subcarriers);
    let a = model.quant.alpha;
    let mut rows = Vec::new();

    for n in 0..nu {
        let su = &cfg.tap_power_user[n];
        let closed = closedform::periodic_sums_closed(su, &cfg.tap_power_bs);
        let brute = closedform::periodic_sums_brute_force(su, &cfg.tap_power_bs, nc, 0);
        for (j, (c, b)) in closed.iter().zip(&brute).enumerate() {
            let err = (b - Complex64::new(c * nc as f64, 0.0)).norm();
            rows.push(MomentCheckRow {
                quantity: format!("periodic_sum_{}[user={n}]", j + 1),
                closed_form: c * nc as f64,
                estimate: b.re,
                std_err: 0.0,
                error: err,
                tolerance: IDENTITY_TOLERANCE,
                pass: Some(err < IDENTITY_TOLERANCE),
                note: "deterministic".into(),
            });
        }
    }

    // Per draw: [per user: |v|^4, |v|^2, quant form] ++ [per ordered pair: |v_n^H v_u|^2]
    // ++ scattered-entry statistics.
    let pairs: Vec<(usize, usize)> = (0..nu).flat_map(|n| (0..nu).filter(move |&u| u != n).map(move |u| (n, u))).collect();
    let width = 3 * nu + pairs.len() + 6;
    let (s_lag, t_lag) = (0usize, 1usize.min(nc - 1));
    let per_draw: Vec<Vec<f64>> = (0..draws as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = trial_rng(seed, k);
            let freq = sampler.draw(&mut rng);
            let v = cascade_gains(&freq, phases);
            let power: Vec<f64> = (0..nb)
                .map(|b| {
                    (0..nu)
                        .map(|u| cfg.tx_power[u] * (0..nc).map(|t| v[(b * nu + u) * nc + t].norm_sqr()).sum::<f64>())
                        .sum::<f64>()
                        / nc as f64
                })
                .collect();
            let mut out = vec![0.0; width];
            for t in 0..nc {
                for n in 0..nu {
                    let mut e = 0.0;
                    let mut q = 0.0;
                    for b in 0..nb {
                        let x = v[(b * nu + n) * nc + t].norm_sqr();
                        e += x;
                        q += x * (power[b] + cfg.noise_power);
                    }
                    out[3 * n] += e * e / nc as f64;
                    out[3 * n + 1] += e / nc as f64;
                    out[3 * n + 2] += q / nc as f64;
                }
                for (j, &(n, u)) in pairs.iter().enumerate() {
                    let ip: Complex64 = (0..nb).map(|b| v[(b * nu + n) * nc + t].conj() * v[(b * nu + u) * nc + t]).sum();
                    out[3 * nu + j] += ip.norm_sqr() / nc as f64;
                }
            }
            let o = 3 * nu + pairs.len();
            let gu_s = freq.g_user_nlos[s_lag];
            let gu_t = freq.g_user_nlos[t_lag];
            let gb_s = freq.g_bs_nlos[s_lag];
            let gb_t = freq.g_bs_nlos[t_lag];
            let cu = gu_s.conj() * gu_t;
            let cb = gb_s.conj() * gb_t;
            out[o] = cu.re;
            out[o + 1] = cu.im;
            out[o + 2] = cb.re;
            out[o + 3] = cb.im;
            out[o + 4] = gu_s.norm_sqr() * gu_t.norm_sqr();
            out[o + 5] = (cu * cb).re;
            out
        })
        .collect();
    let column = |j: usize| -> Vec<f64> { per_draw.iter().map(|r| r[j]).collect() };

    for n in 0..nu {
        let aux = model.aux_terms(phases, n)?;
        rows.push(sampled_row(format!("signal_moment[user={n}]"), aux.varpi, &column(3 * n), ""));
        rows.push(sampled_row(format!("noise_moment[user={n}]"), aux.eps, &column(3 * n + 1), ""));
        if a == 1.0 {
            rows.push(MomentCheckRow {
                quantity: format!("quantization_composite[user={n}]"),
                closed_form: 0.0,
                estimate: 0.0,
                std_err: 0.0,
                error: 0.0,
                tolerance: MOMENT_TOLERANCE,
                pass: None,
                note: "ideal ADC: the quantization term is multiplied by zero".into(),
            });
        } else {
            let scale = a * (1.0 - a);
            let closed = scale * (aux.xi + cfg.noise_power * aux.eps);
            let samples: Vec<f64> = column(3 * n + 2).into_iter().map(|x| scale * x).collect();
            rows.push(sampled_row(format!("quantization_composite[user={n}]"), closed, &samples, ""));
        }
    }
    for (j, &(n, u)) in pairs.iter().enumerate() {
        let closed = model.eta(phases, n, u)?;
        rows.push(sampled_row(format!("interference_moment[user={n},other={u}]"), closed, &column(3 * nu + j), ""));
    }

    let o = 3 * nu + pairs.len();
    let (bu, ku, su) = (cfg.pathloss_user[0], cfg.rician_user[0], &cfg.tap_power_user[0]);
    let (bb, kb, sb) = (cfg.pathloss_bs, cfg.rician_bs, &cfg.tap_power_bs);
    let corr_u = closedform::nlos_correlation(bu, ku, su, nc, s_lag, t_lag);
    let corr_b = closedform::nlos_correlation(bb, kb, sb, nc, s_lag, t_lag);
    let complex_row = |name: &str, closed: Complex64, re: Vec<f64>, im: Vec<f64>| -> MomentCheckRow {
        let (mr, ser) = mean_se(&re);
        let (mi, sei) = mean_se(&im);
        let err = (Complex64::new(mr, mi) - closed).norm() / closed.norm();
        MomentCheckRow {
            quantity: name.into(),
            closed_form: closed.norm(),
            estimate: Complex64::new(mr, mi).norm(),
            std_err: ser.hypot(sei),
            error: err,
            tolerance: MOMENT_TOLERANCE,
            pass: Some(err < MOMENT_TOLERANCE),
            note: format!("subcarriers {s_lag} and {t_lag}"),
        }
    };
    rows.push(complex_row("user_link_correlation", corr_u, column(o), column(o + 1)));
    rows.push(complex_row("bs_link_correlation", corr_b, column(o + 2), column(o + 3)));
    rows.push(sampled_row(
        "user_link_fourth_moment".into(),
        closedform::nlos_fourth_moment(bu, ku, su, nc, s_lag, t_lag),
        &column(o + 4),
        &format!("subcarriers {s_lag} and {t_lag}"),
    ));
    rows.push(sampled_row(
        "joint_link_correlation".into(),
        (corr_u * corr_b).re,
        &column(o + 5),
        &format!("subcarriers {s_lag} and {t_lag}"),
    ));

    Ok(MomentCheckReport { draws, seed, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_pathloss_values() {
        let s = ScenarioSpec::default();
        assert!((s.pathloss(200.0) - 1e-3 * 200f64.powf(-2.8)).abs() < 1e-25);
        let cfg = build_scenario(&s).unwrap();
        assert!((cfg.pathloss_user[0] - 1e-3 * 30f64.powf(-2.8)).abs() < 1e-22);
    }

    #[test]
    fn zero_radius_is_rejected() {
        let s = ScenarioSpec { user_radius: 0.0, ..ScenarioSpec::default() };
        assert!(build_scenario(&s).is_err());
    }

    #[test]
    fn build_is_deterministic() {
        let s = ScenarioSpec::default();
        assert_eq!(build_scenario(&s).unwrap(), build_scenario(&s).unwrap());
    }
}
