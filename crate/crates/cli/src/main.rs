use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::json;

use risofdm::closedform::{asymptotic_rate, Alignment, RateModel};
use risofdm::config::load_scenario_over;
use risofdm::experiments::{
    build_scenario, optimize_with_restarts, random_theta, run_sweep, validate_appendix, Method, PhaseMode,
    RunMetadata, ScenarioSpec, SweepAxis, SweepRequest,
};
use risofdm::optimizer::{Mu, OptimizerParams};
use risofdm::txchain::monte_carlo_rate;
use risofdm::{ErrorCategory, PhaseVector, SystemConfig};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_VALIDATION: u8 = 4;

/// Rate analysis and RIS phase design for a quantized multi-user OFDM uplink.
#[derive(Debug, Parser)]
#[command(name = "risofdm", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file (TOML). Defaults apply to missing keys.
    #[arg(long, short = 'c', global = true)]
    config: Option<PathBuf>,
    /// Starting point for the scenario before the file and overrides are applied.
    #[arg(long, value_enum, default_value_t = Preset::Desk, global = true)]
    preset: Preset,
    /// Override a scenario key, e.g. `--set system.n_bs_antennas=100`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Seed for Monte Carlo trials and random phases (default 1, or the file's run.seed / run.phase_seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, short = 'o', default_value = "out", global = true)]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(long, short = 'v', action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Only errors on stderr.
    #[arg(long, short = 'q', global = true)]
    quiet: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    /// 64 BS antennas, 16 RIS elements.
    Desk,
    /// 100 BS antennas, 64 RIS elements.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PhaseChoice {
    /// Uniform random phases drawn from the phase seed.
    Rand,
    /// Optimized phases (multi-start).
    Opt,
    /// All phases zero.
    Zero,
}

#[derive(Debug, Args)]
struct PhaseArgs {
    /// RIS phase configuration.
    #[arg(long, value_enum, default_value_t = PhaseChoice::Rand)]
    phases: PhaseChoice,
    /// Read phases from a CSV written by `optimize` (overrides --phases).
    #[arg(long)]
    theta: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OptArgs {
    /// Smoothing sharpness: `auto` or a positive number.
    #[arg(long, default_value = "auto")]
    mu: String,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
}

impl OptArgs {
    fn params(&self) -> anyhow::Result<OptimizerParams> {
        let mu = if self.mu == "auto" {
            Mu::Auto
        } else {
            Mu::Fixed(self.mu.parse().with_context(|| format!("--mu expects `auto` or a number, got '{}'", self.mu))?)
        };
        let p = OptimizerParams { mu, max_iters: self.max_iters, tol: self.tol, ..OptimizerParams::default() };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AxisChoice {
    Nb,
    Nr,
    Ku,
    Kb,
    Bits,
    /// BS antennas with `p = E / (N_b^a N_r^b)`, see --bs-exponent / --ris-exponent.
    NbPower,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo rates next to the closed form.
    Simulate {
        #[command(flatten)]
        phases: PhaseArgs,
        #[command(flatten)]
        opt: OptArgs,
        /// Number of channel realizations (default: run.trials).
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Closed-form moments, SINR and rates per user.
    ClosedForm {
        #[command(flatten)]
        phases: PhaseArgs,
        #[command(flatten)]
        opt: OptArgs,
    },
    /// Max-min phase design.
    Optimize {
        #[command(flatten)]
        opt: OptArgs,
    },
    /// Rates along one scenario parameter.
    Sweep {
        #[arg(long, value_enum)]
        axis: AxisChoice,
        /// Comma-separated, strictly increasing grid; `inf` is allowed on the bits axis.
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "closed_form")]
        methods: Vec<String>,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "rand")]
        phases: Vec<PhaseChoice>,
        #[arg(long, default_value_t = 1.0)]
        bs_exponent: f64,
        #[arg(long, default_value_t = 0.0)]
        ris_exponent: f64,
        #[command(flatten)]
        opt: OptArgs,
    },
    /// Closed-form moments against sample moments.
    Validate {
        #[arg(long, default_value_t = 100_000)]
        draws: usize,
        #[command(flatten)]
        phases: PhaseArgs,
    },
}

fn resolve_spec(common: &Common) -> anyhow::Result<ScenarioSpec> {
    let base = match common.preset {
        Preset::Desk => ScenarioSpec::default(),
        Preset::Full => ScenarioSpec::full_scale(),
    };
    let mut spec = load_scenario_over(&base, common.config.as_deref(), &common.overrides)?;
    apply_seed(&mut spec, common.seed);
    Ok(spec)
}

fn apply_seed(spec: &mut ScenarioSpec, seed: Option<u64>) {
    if let Some(s) = seed {
        spec.seed = s;
        spec.phase_seed = s;
    }
}

fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    info!("writing {}", path.display());
    Ok(BufWriter::new(f))
}

fn write_metadata(dir: &Path, name: &str, meta: &RunMetadata<'_, serde_json::Value>) -> anyhow::Result<()> {
    let mut w = create(dir, name)?;
    w.write_all(meta.to_json()?.as_bytes())?;
    w.write_all(b"\n")?;
    Ok(())
}

fn read_theta(path: &Path) -> anyhow::Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut theta = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("element")) {
            continue;
        }
        let value = line.rsplit(',').next().unwrap_or(line);
        theta.push(value.trim().parse::<f64>().with_context(|| format!("{}:{}: bad phase", path.display(), i + 1))?);
    }
    Ok(theta)
}

fn choose_phases(
    cfg: &SystemConfig,
    spec: &ScenarioSpec,
    args: &PhaseArgs,
    opt: Option<&OptArgs>,
) -> anyhow::Result<(PhaseVector, &'static str)> {
    if let Some(path) = &args.theta {
        return Ok((PhaseVector::new(cfg, read_theta(path)?)?, "file"));
    }
    Ok(match args.phases {
        PhaseChoice::Rand => (PhaseVector::new(cfg, random_theta(cfg.n_ris_elements, spec.phase_seed, 0))?, "rand"),
        PhaseChoice::Zero => (PhaseVector::zeros(cfg)?, "zero"),
        PhaseChoice::Opt => {
            let params = match opt {
                Some(o) => o.params()?,
                None => OptimizerParams::default(),
            };
            (optimize_with_restarts(cfg, spec.phase_seed, spec.restarts, &params)?.0, "opt")
        }
    })
}

fn parse_grid(axis: AxisChoice, raw: &[String]) -> anyhow::Result<Vec<f64>> {
    raw.iter()
        .map(|s| {
            let s = s.trim();
            if matches!(axis, AxisChoice::Bits) && (s == "inf" || s == "infinite") {
                return Ok(f64::INFINITY);
            }
            s.parse::<f64>().with_context(|| format!("bad grid value '{s}'"))
        })
        .collect()
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let common = &cli.common;
    let spec = resolve_spec(common)?;
    fs::create_dir_all(&common.out).with_context(|| format!("cannot create {}", common.out.display()))?;
    let out = common.out.as_path();

    match &cli.command {
        Command::Simulate { phases, opt, trials } => {
            let cfg = build_scenario(&spec)?;
            let (ph, tag) = choose_phases(&cfg, &spec, phases, Some(opt))?;
            let trials = trials.unwrap_or(spec.trials);
            info!("simulating {trials} trials, seed {}", spec.seed);
            let rep = monte_carlo_rate(&cfg, &ph, trials, spec.seed)?;
            let mut w = create(out, "simulate.csv")?;
            writeln!(w, "user,rate_mc_exact,se_mc_exact,rate_mc_approx,se_mc_approx,rate_closed_form")?;
            for u in &rep.users {
                writeln!(
                    w,
                    "{},{},{:e},{},{:e},{}",
                    u.user, u.rate_mc_exact, u.se_mc_exact, u.rate_mc_approx, u.se_mc_approx, u.rate_closed_form
                )?;
            }
            w.flush()?;
            let details = json!({ "seed": spec.seed, "trials": trials, "phases": tag, "theta": ph.theta, "report": rep });
            write_metadata(out, "simulate.json", &RunMetadata::new("simulate", &spec, Some(&cfg), details))?;
        }
        Command::ClosedForm { phases, opt } => {
            let cfg = build_scenario(&spec)?;
            let (ph, tag) = choose_phases(&cfg, &spec, phases, Some(opt))?;
            let model = RateModel::new(&cfg)?;
            let mut w = create(out, "closed_form.csv")?;
            writeln!(w, "user,signal_moment,interference_moment,quantization_moment,noise_moment,sinr,rate,rate_limit_unaligned")?;
            for n in 0..cfg.n_users {
                let aux = model.aux_terms(&ph, n)?;
                let eta: f64 = aux.eta.iter().sum();
                let limit = asymptotic_rate(&cfg, n, Alignment::Unaligned)?;
                writeln!(
                    w,
                    "{n},{:e},{eta:e},{:e},{:e},{},{},{limit}",
                    aux.varpi,
                    aux.xi,
                    aux.eps,
                    model.sinr(&ph, n)?,
                    model.rate(&ph, n)?
                )?;
            }
            w.flush()?;
            let details = json!({ "phase_seed": spec.phase_seed, "phases": tag, "theta": ph.theta });
            write_metadata(out, "closed_form.json", &RunMetadata::new("closed-form", &spec, Some(&cfg), details))?;
        }
        Command::Optimize { opt } => {
            let cfg = build_scenario(&spec)?;
            let params = opt.params()?;
            let (ph, trace) = optimize_with_restarts(&cfg, spec.phase_seed, spec.restarts, &params)?;
            info!(
                "min SINR {:.4} -> {:.4} after {} iterations",
                trace.min_sinr_start,
                trace.min_sinr_opt,
                trace.iterations.len()
            );
            let mut w = create(out, "theta_opt.csv")?;
            writeln!(w, "element,theta")?;
            for (r, t) in ph.theta.iter().enumerate() {
                writeln!(w, "{r},{t}")?;
            }
            w.flush()?;
            let mut w = create(out, "optimize_trace.csv")?;
            trace.write_csv(&mut w)?;
            w.flush()?;
            let details = json!({ "phase_seed": spec.phase_seed, "restarts": spec.restarts, "params": params, "trace": trace });
            write_metadata(out, "optimize.json", &RunMetadata::new("optimize", &spec, Some(&cfg), details))?;
        }
        Command::Sweep { axis, grid, methods, phases, bs_exponent, ris_exponent, opt } => {
            let axis_v = match axis {
                AxisChoice::Nb => SweepAxis::Nb,
                AxisChoice::Nr => SweepAxis::Nr,
                AxisChoice::Ku => SweepAxis::Ku,
                AxisChoice::Kb => SweepAxis::Kb,
                AxisChoice::Bits => SweepAxis::Bits,
                AxisChoice::NbPower => {
                    SweepAxis::NbPowerScaling { bs_exponent: *bs_exponent, ris_exponent: *ris_exponent }
                }
            };
            let mut modes = Vec::new();
            for p in phases {
                let m = match p {
                    PhaseChoice::Rand => PhaseMode::Random,
                    PhaseChoice::Opt => PhaseMode::Optimized,
                    PhaseChoice::Zero => bail!(risofdm::Error::Config("sweeps support rand and opt phases".into())),
                };
                if !modes.contains(&m) {
                    modes.push(m);
                }
            }
            let req = SweepRequest {
                axis: axis_v,
                grid: parse_grid(*axis, grid)?,
                methods: methods.iter().map(|m| Method::parse(m.trim())).collect::<risofdm::Result<_>>()?,
                phase_modes: modes,
                optimizer: opt.params()?,
            };
            let res = run_sweep(&spec, &req)?;
            for f in &res.failures {
                log::warn!("grid value {} ({}) failed: {}", f.value, f.phases.tag(), f.message);
            }
            let mut w = create(out, "sweep.csv")?;
            res.write_csv(&mut w)?;
            w.flush()?;
            let details = json!({
                "seed": spec.seed,
                "phase_seed": spec.phase_seed,
                "request": req,
                "failures": res.failures,
            });
            write_metadata(out, "sweep.json", &RunMetadata::new("sweep", &spec, None, details))?;
            if !res.failures.is_empty() {
                eprintln!("{} of {} sweep points failed", res.failures.len(), req.grid.len() * req.phase_modes.len());
                return Ok(ExitCode::from(EXIT_NUMERIC));
            }
        }
        Command::Validate { draws, phases } => {
            let cfg = build_scenario(&spec)?;
            let (ph, tag) = choose_phases(&cfg, &spec, phases, None)?;
            let rep = validate_appendix(&cfg, &ph, *draws, spec.seed)?;
            let mut w = create(out, "validate.csv")?;
            rep.write_csv(&mut w)?;
            w.flush()?;
            let details = json!({ "seed": spec.seed, "phases": tag, "theta": ph.theta, "report": rep });
            write_metadata(out, "validate.json", &RunMetadata::new("validate", &spec, Some(&cfg), details))?;
            let failed: Vec<_> = rep.rows.iter().filter(|r| r.pass == Some(false)).map(|r| r.quantity.clone()).collect();
            if !failed.is_empty() {
                eprintln!("validation failed for: {}", failed.join(", "));
                return Ok(ExitCode::from(EXIT_VALIDATION));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<risofdm::Error>().map(|e| e.category()) {
        Some(ErrorCategory::Numeric) => EXIT_NUMERIC,
        Some(ErrorCategory::Validation) => EXIT_VALIDATION,
        _ => EXIT_CONFIG,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.common.quiet {
        "error"
    } else {
        match cli.common.verbose {
            0 => "warn",
            1 => "info",
            _ => "debug",
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
