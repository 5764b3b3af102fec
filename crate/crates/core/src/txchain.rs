//! Uplink signal chain: cyclic prefix, cyclic convolution, the received block,
//! quantization, MRC combining, per-subcarrier SINR terms and Monte Carlo rates.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{complex_normal, dft_entry, ChannelSampler, FreqChannel, TapSet};
use crate::closedform;
use crate::error::{Error, Result};
use crate::model::{QuantizationModel, SystemConfig};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Phase-independent part of the RIS steering products:
/// `base[n * n_r + r] = conj(a_r(depart)) * a_r(user n)`.
#[derive(Debug, Clone)]
pub struct PhaseBasis {
    pub n_users: usize,
    pub n_ris: usize,
    pub base: Vec<Complex64>,
}

impl PhaseBasis {
    pub fn new(cfg: &SystemConfig) -> Result<Self> {
        let st = cfg.steering()?;
        let (nu, nr) = (cfg.n_users, cfg.n_ris_elements);
        let mut base = Vec::with_capacity(nu * nr);
        for n in 0..nu {
            for r in 0..nr {
                base.push(st.ris_depart[r].conj() * st.user[n][r]);
            }
        }
        Ok(Self { n_users: nu, n_ris: nr, base })
    }
}

/// RIS phase angles together with the derived steering products.
///
/// `phi[n * n_r + r]` is the phase-rotated product for user `n`, element `r`;
/// `phi_sum[n]` sums it over the elements.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseVector {
    pub theta: Vec<f64>,
    #[serde(skip)]
    pub phi: Vec<Complex64>,
    #[serde(skip)]
    pub phi_sum: Vec<Complex64>,
}

impl PhaseVector {
    pub fn new(cfg: &SystemConfig, theta: Vec<f64>) -> Result<Self> {
        Self::from_basis(&PhaseBasis::new(cfg)?, theta)
    }

    pub fn from_basis(basis: &PhaseBasis, theta: Vec<f64>) -> Result<Self> {
        let nr = basis.n_ris;
        if theta.len() != nr {
            return Err(Error::Precondition(format!(
                "phase vector has {} entries, RIS has {nr} elements",
                theta.len()
            )));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Numeric("non-finite RIS phase".into()));
        }
        let rot: Vec<Complex64> = theta.iter().map(|&t| Complex64::from_polar(1.0, t)).collect();
        let mut phi = Vec::with_capacity(basis.base.len());
        let mut phi_sum = Vec::with_capacity(basis.n_users);
        for n in 0..basis.n_users {
            let mut acc = ZERO;
            for r in 0..nr {
                let v = rot[r] * basis.base[n * nr + r];
                acc += v;
                phi.push(v);
            }
            phi_sum.push(acc);
        }
        Ok(Self { theta, phi, phi_sum })
    }

    /// All-zero phases.
    pub fn zeros(cfg: &SystemConfig) -> Result<Self> {
        Self::new(cfg, vec![0.0; cfg.n_ris_elements])
    }

    /// Independent uniform phases on `[0, 2 pi)`.
    pub fn random<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<Self> {
        let theta = (0..cfg.n_ris_elements).map(|_| rng.random::<f64>() * 2.0 * PI).collect();
        Self::new(cfg, theta)
    }

    /// Phases that co-phase every element towards user `n`.
    pub fn aligned_to(cfg: &SystemConfig, n: usize) -> Result<Self> {
        let basis = PhaseBasis::new(cfg)?;
        let nr = basis.n_ris;
        let theta = (0..nr)
            .map(|r| (-basis.base[n * nr + r].arg()).rem_euclid(2.0 * PI))
            .collect();
        Self::from_basis(&basis, theta)
    }

    pub fn n_users(&self) -> usize {
        self.phi_sum.len()
    }

    pub fn n_ris(&self) -> usize {
        self.theta.len()
    }
}

/// Prepends the last `n_cp` samples of `symbol`.
pub fn add_cyclic_prefix(symbol: &[Complex64], n_cp: usize) -> Result<Vec<Complex64>> {
    let n = symbol.len();
    if n_cp > n {
        return Err(Error::Precondition(format!("cyclic prefix {n_cp} longer than symbol {n}")));
    }
    Ok((0..n + n_cp).map(|m| symbol[(m + n - n_cp) % n]).collect())
}

/// Drops the first `n_cp` samples.
pub fn remove_cyclic_prefix(block: &[Complex64], n_cp: usize) -> Vec<Complex64> {
    block[n_cp..].to_vec()
}

/// `out[m] = sum_k h[k] s[(m - k) mod N]`.
pub fn cyclic_convolve(h: &[Complex64], s: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = s.len();
    if h.len() != n {
        return Err(Error::Precondition(format!("length mismatch: {} vs {n}", h.len())));
    }
    Ok((0..n)
        .map(|m| (0..n).map(|k| h[k] * s[(m + n - k) % n]).sum())
        .collect())
}

/// Unitary DFT.
pub fn dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n).map(|t| (0..n).map(|k| dft_entry(t, k, n) * x[k]).sum()).collect()
}

/// Unitary inverse DFT.
pub fn idft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n).map(|k| (0..n).map(|t| dft_entry(t, k, n).conj() * x[t]).sum()).collect()
}

/// Which implementation of the received block to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RxPath {
    /// Per-subcarrier products followed by an inverse DFT.
    Frequency,
    /// Literal chain: IDFT, cyclic prefix, two linear convolutions, prefix removal.
    Time,
}

fn check_symbols(cfg: &SystemConfig, symbols: &[Vec<Complex64>]) -> Result<()> {
    if symbols.len() != cfg.n_users || symbols.iter().any(|s| s.len() != cfg.n_subcarriers) {
        return Err(Error::Precondition("symbols must be N_u x N_c".into()));
    }
    Ok(())
}

/// Received time-domain block at every BS antenna after prefix removal,
/// indexed `[antenna][sample]`.
///
/// `symbols[n][t]` is user `n`'s frequency-domain symbol on subcarrier `t`.
/// When `noise` is given, `CN(0, noise_power)` samples are added.
pub fn simulate_rx<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    taps: &TapSet,
    phases: &PhaseVector,
    symbols: &[Vec<Complex64>],
    path: RxPath,
    noise: Option<&mut R>,
) -> Result<Vec<Vec<Complex64>>> {
    cfg.validate()?;
    check_symbols(cfg, symbols)?;
    let (nb, nr, nu, nc, ncp) =
        (cfg.n_bs_antennas, cfg.n_ris_elements, cfg.n_users, cfg.n_subcarriers, cfg.cp_length);
    let rot: Vec<Complex64> = phases.theta.iter().map(|&t| Complex64::from_polar(1.0, t)).collect();

    let mut out = match path {
        RxPath::Frequency => {
            let freq = ChannelSampler::new(cfg)?.freq_entries(taps);
            let mut out = Vec::with_capacity(nb);
            for b in 0..nb {
                let yf: Vec<Complex64> = (0..nc)
                    .map(|t| {
                        let mut acc = ZERO;
                        for r in 0..nr {
                            let mut at_ris = ZERO;
                            for n in 0..nu {
                                at_ris += freq.user(r, n, t) * cfg.tx_power[n].sqrt() * symbols[n][t];
                            }
                            acc += freq.bs(b, r, t) * rot[r] * at_ris;
                        }
                        acc
                    })
                    .collect();
                out.push(idft(&yf));
            }
            out
        }
        RxPath::Time => {
            let len = nc + ncp;
            let tx: Vec<Vec<Complex64>> = (0..nu)
                .map(|n| {
                    let s: Vec<Complex64> =
                        idft(&symbols[n]).into_iter().map(|x| x * cfg.tx_power[n].sqrt()).collect();
                    add_cyclic_prefix(&s, ncp)
                })
                .collect::<Result<_>>()?;
            // Signal reflected by each RIS element, truncated to one block.
            let reflected: Vec<Vec<Complex64>> = (0..nr)
                .map(|r| {
                    let mut y = vec![ZERO; len];
                    for n in 0..nu {
                        let sb = cfg.pathloss_user[n].sqrt();
                        for l in 0..cfg.taps_user_ris {
                            let h = taps.user_tap(r, n, l) * sb;
                            for m in l..len {
                                y[m] += h * tx[n][m - l];
                            }
                        }
                    }
                    y.iter().map(|v| v * rot[r]).collect()
                })
                .collect();
            let sb = cfg.pathloss_bs.sqrt();
            (0..nb)
                .map(|b| {
                    let mut y = vec![ZERO; len];
                    for r in 0..nr {
                        for l in 0..cfg.taps_ris_bs {
                            let h = taps.bs_tap(b, r, l) * sb;
                            for m in l..len {
                                y[m] += h * reflected[r][m - l];
                            }
                        }
                    }
                    remove_cyclic_prefix(&y, ncp)
                })
                .collect()
        }
    };

    if let Some(rng) = noise {
        let sd = cfg.noise_power.sqrt();
        for row in out.iter_mut() {
            for y in row.iter_mut() {
                *y += complex_normal(rng) * sd;
            }
        }
    }
    Ok(out)
}

/// Effective per-subcarrier gains through the RIS:
/// `v[(b * n_u + u) * n_c + t] = sum_r g_b(b, r, t) e^{j theta_r} g_u(r, u, t)`.
pub fn cascade_gains(freq: &FreqChannel, phases: &PhaseVector) -> Vec<Complex64> {
    let (nb, nr, nu, nc) = (freq.n_bs, freq.n_ris, freq.n_users, freq.n_subcarriers);
    let mut w = vec![ZERO; nr * nu * nc];
    for r in 0..nr {
        let rot = Complex64::from_polar(1.0, phases.theta[r]);
        for u in 0..nu {
            for t in 0..nc {
                w[(r * nu + u) * nc + t] = rot * freq.user(r, u, t);
            }
        }
    }
    let mut v = vec![ZERO; nb * nu * nc];
    for b in 0..nb {
        let vb = &mut v[b * nu * nc..(b + 1) * nu * nc];
        for r in 0..nr {
            let gb = &freq.g_bs[(b * nr + r) * nc..(b * nr + r + 1) * nc];
            for u in 0..nu {
                let wr = &w[(r * nu + u) * nc..(r * nu + u + 1) * nc];
                let dst = &mut vb[u * nc..(u + 1) * nc];
                for t in 0..nc {
                    dst[t] += gb[t] * wr[t];
                }
            }
        }
    }
    v
}

/// Per-antenna received power, averaged over the block (the diagonal of the
/// conditional received covariance is constant in time for each antenna).
fn antenna_power(cfg: &SystemConfig, v: &[Complex64]) -> Vec<f64> {
    let (nb, nu, nc) = (cfg.n_bs_antennas, cfg.n_users, cfg.n_subcarriers);
    (0..nb)
        .map(|b| {
            let mut acc = 0.0;
            for u in 0..nu {
                let row = &v[(b * nu + u) * nc..(b * nu + u + 1) * nc];
                acc += cfg.tx_power[u] * row.iter().map(|x| x.norm_sqr()).sum::<f64>();
            }
            acc / nc as f64
        })
        .collect()
}

/// Diagonal of the received covariance conditioned on the realization,
/// `diag(H_b Phi H_u P P^H H_u^H Phi^H H_b^H) + noise_power`, flattened as
/// `[antenna * N_c + sample]`.
pub fn received_covariance_diag(cfg: &SystemConfig, freq: &FreqChannel, phases: &PhaseVector) -> Vec<f64> {
    let v = cascade_gains(freq, phases);
    let nc = cfg.n_subcarriers;
    antenna_power(cfg, &v)
        .into_iter()
        .flat_map(|p| std::iter::repeat(p + cfg.noise_power).take(nc))
        .collect()
}

/// `alpha * y + z_q` with independent `CN(0, alpha (1 - alpha) cov[i])` noise.
pub fn quantize_aqnm<R: Rng + ?Sized>(
    y: &[Complex64],
    quant: &QuantizationModel,
    covariance_diag: &[f64],
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if y.len() != covariance_diag.len() {
        return Err(Error::Precondition("covariance length mismatch".into()));
    }
    if let Some(c) = covariance_diag.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
        return Err(Error::Numeric(format!("invalid covariance entry {c}")));
    }
    let a = quant.alpha;
    if quant.rho == 0.0 {
        return Ok(y.iter().map(|v| v * a).collect());
    }
    Ok(y.iter()
        .zip(covariance_diag)
        .map(|(v, c)| v * a + complex_normal(rng) * (a * (1.0 - a) * c).sqrt())
        .collect())
}

/// MRC output `r[n * N_c + t] = sum_b conj(v_n[b, t]) y_qf[b * N_c + t]`.
pub fn mrc_combine(freq: &FreqChannel, phases: &PhaseVector, y_qf: &[Complex64]) -> Vec<Complex64> {
    let v = cascade_gains(freq, phases);
    combine_with(&v, freq, y_qf)
}

fn combine_with(v: &[Complex64], freq: &FreqChannel, y_qf: &[Complex64]) -> Vec<Complex64> {
    let (nb, nu, nc) = (freq.n_bs, freq.n_users, freq.n_subcarriers);
    let mut r = vec![ZERO; nu * nc];
    for b in 0..nb {
        for n in 0..nu {
            for t in 0..nc {
                r[n * nc + t] += v[(b * nu + n) * nc + t].conj() * y_qf[b * nc + t];
            }
        }
    }
    r
}

/// The four additive parts of the MRC output, each indexed `[n * N_c + t]`.
#[derive(Debug, Clone)]
pub struct MrcTerms {
    pub desired: Vec<Complex64>,
    pub interference: Vec<Complex64>,
    pub noise: Vec<Complex64>,
    pub quantization: Vec<Complex64>,
}

/// Splits the MRC output for `y_qf = alpha (H x + z_f) + zq_f` into its parts.
///
/// `noise_f` and `zq_f` are the frequency-domain thermal and quantization
/// noises, flattened `[antenna * N_c + t]`.
pub fn mrc_terms(
    cfg: &SystemConfig,
    freq: &FreqChannel,
    phases: &PhaseVector,
    quant: &QuantizationModel,
    symbols: &[Vec<Complex64>],
    noise_f: &[Complex64],
    zq_f: &[Complex64],
) -> Result<MrcTerms> {
    check_symbols(cfg, symbols)?;
    let (nb, nu, nc) = (cfg.n_bs_antennas, cfg.n_users, cfg.n_subcarriers);
    let a = quant.alpha;
    let v = cascade_gains(freq, phases);
    let mut desired = vec![ZERO; nu * nc];
    let mut interference = vec![ZERO; nu * nc];
    for n in 0..nu {
        for t in 0..nc {
            for u in 0..nu {
                let mut ip = ZERO;
                for b in 0..nb {
                    ip += v[(b * nu + n) * nc + t].conj() * v[(b * nu + u) * nc + t];
                }
                let term = ip * a * cfg.tx_power[u].sqrt() * symbols[u][t];
                if u == n {
                    desired[n * nc + t] = term;
                } else {
                    interference[n * nc + t] += term;
                }
            }
        }
    }
    let noise = combine_with(&v, freq, noise_f).into_iter().map(|x| x * a).collect();
    let quantization = combine_with(&v, freq, zq_f);
    Ok(MrcTerms { desired, interference, noise, quantization })
}

/// Signal and the three interference-plus-noise parts for one user and subcarrier.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SinrSample {
    pub signal: f64,
    pub interference: f64,
    pub noise_term: f64,
    pub quant_term: f64,
}

impl SinrSample {
    pub fn disturbance(&self) -> f64 {
        self.interference + self.noise_term + self.quant_term
    }
}

/// Every `(user, subcarrier)` SINR sample of one realization, indexed `[n * N_c + t]`.
pub fn sinr_table(
    cfg: &SystemConfig,
    freq: &FreqChannel,
    phases: &PhaseVector,
    quant: &QuantizationModel,
) -> Vec<SinrSample> {
    let v = cascade_gains(freq, phases);
    sinr_table_from_gains(cfg, quant, &v)
}

fn sinr_table_from_gains(cfg: &SystemConfig, quant: &QuantizationModel, v: &[Complex64]) -> Vec<SinrSample> {
    let (nb, nu, nc) = (cfg.n_bs_antennas, cfg.n_users, cfg.n_subcarriers);
    let a = quant.alpha;
    let (a2, aq) = (a * a, a * (1.0 - a));
    let s2 = cfg.noise_power;
    let power = antenna_power(cfg, v);
    let mut out = vec![SinrSample::default(); nu * nc];
    let mut ip = vec![ZERO; nu];
    for t in 0..nc {
        for n in 0..nu {
            ip.iter_mut().for_each(|x| *x = ZERO);
            let mut quad = 0.0;
            for b in 0..nb {
                let vn = v[(b * nu + n) * nc + t];
                quad += vn.norm_sqr() * (power[b] + s2);
                for u in 0..nu {
                    ip[u] += vn.conj() * v[(b * nu + u) * nc + t];
                }
            }
            let gain = ip[n].re;
            let inter: f64 = (0..nu)
                .filter(|&u| u != n)
                .map(|u| cfg.tx_power[u] * ip[u].norm_sqr())
                .sum();
            out[n * nc + t] = SinrSample {
                signal: a2 * cfg.tx_power[n] * gain * gain,
                interference: a2 * inter,
                noise_term: s2 * a2 * gain,
                quant_term: aq * quad,
            };
        }
    }
    out
}

/// SINR terms of user `n` on subcarrier `t` for one realization.
pub fn sinr_components(
    cfg: &SystemConfig,
    freq: &FreqChannel,
    phases: &PhaseVector,
    quant: &QuantizationModel,
    n: usize,
    t: usize,
) -> Result<SinrSample> {
    if n >= cfg.n_users || t >= cfg.n_subcarriers {
        return Err(Error::Precondition(format!("user {n} / subcarrier {t} out of range")));
    }
    Ok(sinr_table(cfg, freq, phases, quant)[n * cfg.n_subcarriers + t])
}

/// Sum with a fixed binary-tree order, so results do not depend on thread count.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Deterministic random source for trial `trial` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Monte Carlo and closed-form rates of one user.
#[derive(Debug, Clone, Serialize)]
pub struct UserRate {
    pub user: usize,
    /// Expectation of the log, bit/s/Hz.
    pub rate_mc_exact: f64,
    pub se_mc_exact: f64,
    /// Log of the ratio of sample means.
    pub rate_mc_approx: f64,
    /// Delta-method standard error of `rate_mc_approx`.
    pub se_mc_approx: f64,
    pub rate_closed_form: f64,
    /// Sample means of the SINR parts, averaged over subcarriers.
    pub mean_terms: SinrSample,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub trials: usize,
    pub seed: u64,
    pub users: Vec<UserRate>,
}

impl RateReport {
    pub fn min_rate_mc_exact(&self) -> f64 {
        self.users.iter().map(|u| u.rate_mc_exact).fold(f64::INFINITY, f64::min)
    }

    pub fn min_rate_mc_approx(&self) -> f64 {
        self.users.iter().map(|u| u.rate_mc_approx).fold(f64::INFINITY, f64::min)
    }

    pub fn min_rate_closed_form(&self) -> f64 {
        self.users.iter().map(|u| u.rate_closed_form).fold(f64::INFINITY, f64::min)
    }
}

/// Estimates every user's rate over `trials` independent channel draws.
///
/// Trials run in parallel; trial `k` uses [`trial_rng`]`(seed, k)` and all
/// reductions are pairwise in trial order, so the report is reproducible.
pub fn monte_carlo_rate(cfg: &SystemConfig, phases: &PhaseVector, trials: usize, seed: u64) -> Result<RateReport> {
    if trials == 0 {
        return Err(Error::Precondition("at least one trial is required".into()));
    }
    let sampler = ChannelSampler::new(cfg)?;
    let quant = cfg.quantization()?;
    let (nu, nc) = (cfg.n_users, cfg.n_subcarriers);

    let samples: Vec<Vec<SinrSample>> = (0..trials as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = trial_rng(seed, k);
            let freq = sampler.draw(&mut rng);
            sinr_table(cfg, &freq, phases, &quant)
        })
        .collect();

    let pref = 1.0 / (cfg.cp_length + nc) as f64;
    let ln2 = std::f64::consts::LN_2;
    let mut users = Vec::with_capacity(nu);
    for n in 0..nu {
        let column = |t: usize, f: &dyn Fn(&SinrSample) -> f64| -> Vec<f64> {
            samples.iter().map(|s| f(&s[n * nc + t])).collect()
        };
        let mut mean_s = vec![0.0; nc];
        let mut mean_i = vec![0.0; nc];
        let mut mean_terms = SinrSample::default();
        for t in 0..nc {
            mean_s[t] = pairwise_sum(&column(t, &|s| s.signal)) / trials as f64;
            mean_i[t] = pairwise_sum(&column(t, &|s| s.disturbance())) / trials as f64;
            mean_terms.signal += mean_s[t] / nc as f64;
            mean_terms.interference += pairwise_sum(&column(t, &|s| s.interference)) / (trials * nc) as f64;
            mean_terms.noise_term += pairwise_sum(&column(t, &|s| s.noise_term)) / (trials * nc) as f64;
            mean_terms.quant_term += pairwise_sum(&column(t, &|s| s.quant_term)) / (trials * nc) as f64;
        }

        let per_trial_exact: Vec<f64> = samples
            .iter()
            .map(|s| {
                pref * (0..nc)
                    .map(|t| {
                        let x = s[n * nc + t];
                        (1.0 + x.signal / x.disturbance()).log2()
                    })
                    .sum::<f64>()
            })
            .collect();
        let (rate_exact, se_exact) = mean_and_se(&per_trial_exact);

        let rate_approx = pref * (0..nc).map(|t| (1.0 + mean_s[t] / mean_i[t]).log2()).sum::<f64>();
        // Linearised influence of each trial on the ratio-of-means estimator.
        let influence: Vec<f64> = samples
            .iter()
            .map(|s| {
                pref * (0..nc)
                    .map(|t| {
                        let x = s[n * nc + t];
                        let ratio = mean_s[t] / mean_i[t];
                        (x.signal - ratio * x.disturbance()) / ((mean_i[t] + mean_s[t]) * ln2)
                    })
                    .sum::<f64>()
            })
            .collect();
        let (_, se_approx) = mean_and_se(&influence);

        users.push(UserRate {
            user: n,
            rate_mc_exact: rate_exact,
            se_mc_exact: se_exact,
            rate_mc_approx: rate_approx,
            se_mc_approx: se_approx,
            rate_closed_form: closedform::rate_closed_form(cfg, phases, n)?,
            mean_terms,
        });
    }
    Ok(RateReport { trials, seed, users })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn cyclic_prefix_examples() {
        let s = [c(1.0), c(2.0), c(3.0), c(4.0)];
        let out = add_cyclic_prefix(&s, 2).unwrap();
        assert_eq!(out, vec![c(3.0), c(4.0), c(1.0), c(2.0), c(3.0), c(4.0)]);
        assert_eq!(add_cyclic_prefix(&s, 0).unwrap(), s.to_vec());
        assert!(add_cyclic_prefix(&s, 5).is_err());
    }

    #[test]
    fn convolution_with_impulses() {
        let s: Vec<Complex64> = (0..5).map(|i| Complex64::new(i as f64, -(i as f64))).collect();
        let mut d0 = vec![ZERO; 5];
        d0[0] = c(1.0);
        assert_eq!(cyclic_convolve(&d0, &s).unwrap(), s);
        let mut d1 = vec![ZERO; 5];
        d1[1] = c(1.0);
        let shifted = cyclic_convolve(&d1, &s).unwrap();
        for m in 0..5 {
            assert_eq!(shifted[m], s[(m + 4) % 5]);
        }
        assert!(cyclic_convolve(&d1[..4], &s).is_err());
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let xs: Vec<f64> = (0..1001).map(|i| i as f64 * 0.5).collect();
        assert!((pairwise_sum(&xs) - xs.iter().sum::<f64>()).abs() < 1e-9);
    }
}
