//! Max-min RIS phase design: log-sum-exp smoothed objective, its analytic
//! gradient and an accelerated gradient ascent with backtracking.

use std::io::Write;

use serde::Serialize;

use crate::closedform::{AuxTerms, RateModel};
use crate::error::{Error, Result};
use crate::model::SystemConfig;
use crate::txchain::{PhaseBasis, PhaseVector};

/// Smoothing sharpness of the objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Mu {
    /// `10 / median(SINR)` evaluated once at the starting point.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizerParams {
    pub mu: Mu,
    /// Sufficient-increase constant of the line search.
    pub backtrack_alpha: f64,
    /// Step shrink factor of the line search.
    pub backtrack_beta: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub max_backtracks: usize,
}

impl Default for OptimizerParams {
    fn default() -> Self {
        Self {
            mu: Mu::Auto,
            backtrack_alpha: 0.3,
            backtrack_beta: 0.8,
            tol: 1e-4,
            max_iters: 500,
            max_backtracks: 60,
        }
    }
}

impl OptimizerParams {
    pub fn validate(&self) -> Result<()> {
        let ok = match self.mu {
            Mu::Auto => true,
            Mu::Fixed(m) => m.is_finite() && m > 0.0,
        } && self.backtrack_alpha > 0.0
            && self.backtrack_alpha <= 0.5
            && self.backtrack_beta > 0.0
            && self.backtrack_beta < 1.0
            && self.tol > 0.0
            && self.max_iters > 0
            && self.max_backtracks > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid optimizer parameters {self:?}")))
        }
    }
}

/// Closed-form SINR of user `n`.
pub fn sinr_n(cfg: &SystemConfig, ph: &PhaseVector, n: usize) -> Result<f64> {
    RateModel::new(cfg)?.sinr(ph, n)
}

/// `-(1/mu) ln sum_n exp(-mu x_n)`, evaluated with a max shift.
pub fn soft_min(x: &[f64], mu: f64) -> f64 {
    let m = x.iter().copied().fold(f64::INFINITY, f64::min);
    let s: f64 = x.iter().map(|v| (-mu * (v - m)).exp()).sum();
    m - s.ln() / mu
}

/// Weights `exp(-mu x_n) / sum_u exp(-mu x_u)`.
pub fn soft_min_weights(x: &[f64], mu: f64) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::INFINITY, f64::min);
    let e: Vec<f64> = x.iter().map(|v| (-mu * (v - m)).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Cached model for repeated objective and gradient evaluations.
#[derive(Debug, Clone)]
pub struct Objective {
    pub model: RateModel,
    pub basis: PhaseBasis,
}

impl Objective {
    pub fn new(cfg: &SystemConfig) -> Result<Self> {
        Ok(Self { model: RateModel::new(cfg)?, basis: PhaseBasis::new(cfg)? })
    }

    pub fn phases(&self, theta: &[f64]) -> Result<PhaseVector> {
        PhaseVector::from_basis(&self.basis, theta.to_vec())
    }

    fn aux(&self, ph: &PhaseVector) -> Result<Vec<AuxTerms>> {
        (0..self.model.n_users()).map(|n| self.model.aux_terms(ph, n)).collect()
    }

    pub fn sinrs(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let ph = self.phases(theta)?;
        (0..self.model.n_users()).map(|n| self.model.sinr(&ph, n)).collect()
    }

    /// Resolves the smoothing sharpness at `theta`.
    pub fn resolve_mu(&self, mu: Mu, theta: &[f64]) -> Result<f64> {
        match mu {
            Mu::Fixed(m) => Ok(m),
            Mu::Auto => {
                let med = median(&self.sinrs(theta)?);
                if med > 0.0 && med.is_finite() {
                    Ok(10.0 / med)
                } else {
                    Err(Error::Numeric(format!("cannot derive smoothing from median SINR {med}")))
                }
            }
        }
    }

    pub fn value(&self, theta: &[f64], mu: f64) -> Result<f64> {
        Ok(soft_min(&self.sinrs(theta)?, mu))
    }

    /// SINR of every user and its gradient with respect to every phase,
    /// `grad[n][i]`.
    pub fn sinr_gradients(&self, theta: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let ph = self.phases(theta)?;
        let aux = self.aux(&ph)?;
        let m = &self.model;
        let c = &m.cfg;
        let (nu, nr) = (c.n_users, c.n_ris_elements);
        let (nb, nrf) = (c.n_bs_antennas as f64, nr as f64);
        let a = m.quant.alpha;
        let (sb, k, bb) = (c.tap_power_bs[0], c.rician_bs, c.pathloss_bs);
        let vb = c.nlos_weight_bs();
        let k1 = k + 1.0;

        // c1[n][i] = Im(Phi(n,i) * sum_{r != i} conj(Phi(n,r)))
        let c1: Vec<Vec<f64>> = (0..nu)
            .map(|n| {
                let total = ph.phi_sum[n].conj();
                (0..nr)
                    .map(|i| {
                        let p = ph.phi[n * nr + i];
                        (p * (total - p.conj())).im
                    })
                    .collect()
            })
            .collect();
        // Im(c2(n, u, i) * rho(u, n)), c2 = conj(PhiN(n)) Phi(u,i) - conj(Phi(n,i)) PhiN(u)
        let c2_rho = |n: usize, u: usize, i: usize| -> f64 {
            let c2 = ph.phi_sum[n].conj() * ph.phi[u * nr + i] - ph.phi[n * nr + i].conj() * ph.phi_sum[u];
            (c2 * m.rho(u, n)).im
        };
        let p2: Vec<f64> = ph.phi_sum.iter().map(|x| x.norm_sqr()).collect();
        let s: Vec<f64> = (0..nu).map(|u| c.tap_power_user[u][0]).collect();
        let ku: Vec<f64> = c.rician_user.clone();
        let z: Vec<f64> = (0..nu).map(|u| c.nlos_weight_user(u)).collect();
        let bu = &c.pathloss_user;
        let (w, v) = m.user_weights();
        let sum_w: f64 = w.iter().sum();
        let sum_v: f64 = v.iter().sum();

        let mut sinr = Vec::with_capacity(nu);
        let mut grad = Vec::with_capacity(nu);
        for n in 0..nu {
            let (num, den) = m.sinr_parts(&aux[n]);
            if !(den > 0.0) {
                return Err(Error::Numeric(format!("non-positive SINR denominator for user {n}")));
            }
            let kn = ku[n];
            let kn1 = kn + 1.0;
            let pre_w = -4.0 * bu[n] * bu[n] * bb * bb * s[n] * sb * kn * k * nb / (kn1 * kn1 * k1 * k1);
            let in_w = s[n] * sb * kn * k * nb * p2[n]
                + 2.0 * sb * z[n] * k * nb * nrf
                + (s[n] * vb * kn + z[n] * vb) * (nb + 1.0) * nrf
                + 2.0 * z[n] * vb * (nb + 1.0);
            let pre_e = -2.0 * bu[n] * bb * s[n] * sb * kn * k * nb / (kn1 * k1);
            let pre_x = -2.0 * bu[n] * bb * bb * sb * k * nb / (kn1 * k1 * k1);
            let x_own = c.tx_power[n] * 2.0 * bu[n] * s[n] * s[n] * kn / kn1 * (sb * k * nrf + sb * nrf + 2.0 * vb);
            let x_mix = s[n] * vb * kn * nrf + sb * z[n] * k * nrf + z[n] * vb * nrf + 2.0 * sb * z[n];
            let x_flat = s[n] * vb * kn * nrf * sum_w + s[n] * kn * (vb * nrf + 2.0 * sb + sb * k * nrf) * sum_v;

            let others: Vec<usize> = (0..nu).filter(|&u| u != n).collect();
            let pre_eta: Vec<f64> = others
                .iter()
                .map(|&u| -2.0 * bu[n] * bu[u] * bb * bb * sb * k * nb / (kn1 * (ku[u] + 1.0) * k1 * k1))
                .collect();

            let mut g = Vec::with_capacity(nr);
            for i in 0..nr {
                let c1n = c1[n][i];
                let d_varpi = pre_w * c1n * in_w;
                let d_eps = pre_e * c1n;
                let mut inter = 0.0;
                for (j, &u) in others.iter().enumerate() {
                    let c1u = c1[u][i];
                    let d_eta = pre_eta[j]
                        * (s[n] * s[u] * sb * kn * ku[u] * k * nb * (p2[u] * c1n + p2[n] * c1u)
                            + ((sb * z[u] * k * nb + s[u] * vb * ku[u] + z[u] * vb) * nrf + 2.0 * z[u] * vb * nb)
                                * s[n]
                                * kn
                                * c1n
                            + ((sb * z[n] * k * nb + s[n] * vb * kn + z[n] * vb) * nrf + 2.0 * z[n] * vb * nb)
                                * s[u]
                                * ku[u]
                                * c1u
                            + s[n] * s[u] * vb * kn * ku[u] * nb * c2_rho(n, u, i));
                    inter += c.tx_power[u] * d_eta;
                }
                let mut sw_pc = 0.0;
                let mut sw_c = 0.0;
                let mut sw_c2 = 0.0;
                for u in 0..nu {
                    sw_pc += w[u] * (p2[u] * c1n + p2[n] * c1[u][i]);
                    sw_c += w[u] * c1[u][i];
                    sw_c2 += w[u] * c2_rho(n, u, i);
                }
                let d_xi = pre_x
                    * (x_own * c1n + s[n] * sb * k * kn * sw_pc + x_mix * sw_c + s[n] * sb * kn * sw_c2 + x_flat * c1n);
                let d_den = a * a * inter + a * (1.0 - a) * d_xi + c.noise_power * a * d_eps;
                let d_num = a * a * c.tx_power[n] * d_varpi;
                g.push((d_num * den - num * d_den) / (den * den));
            }
            sinr.push(num / den);
            grad.push(g);
        }
        Ok((sinr, grad))
    }

    /// Objective value and gradient.
    pub fn value_and_gradient(&self, theta: &[f64], mu: f64) -> Result<(f64, Vec<f64>)> {
        let (sinr, grads) = self.sinr_gradients(theta)?;
        let wts = soft_min_weights(&sinr, mu);
        let nr = theta.len();
        let mut g = vec![0.0; nr];
        for (wn, gn) in wts.iter().zip(&grads) {
            for i in 0..nr {
                g[i] += wn * gn[i];
            }
        }
        Ok((soft_min(&sinr, mu), g))
    }
}

/// Smoothed max-min objective at the given phases.
pub fn objective(cfg: &SystemConfig, ph: &PhaseVector, mu: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::Precondition("smoothing sharpness must be positive".into()));
    }
    Objective::new(cfg)?.value(&ph.theta, mu)
}

/// Gradient of the smoothed objective with respect to the phases.
pub fn gradient(cfg: &SystemConfig, ph: &PhaseVector, mu: f64) -> Result<Vec<f64>> {
    if !(mu > 0.0) {
        return Err(Error::Precondition("smoothing sharpness must be positive".into()));
    }
    Ok(Objective::new(cfg)?.value_and_gradient(&ph.theta, mu)?.1)
}

#[derive(Debug, Clone, Serialize)]
pub struct IterRecord {
    pub iter: usize,
    /// Objective at the extrapolated iterate.
    pub f: f64,
    /// Objective at the line-search point.
    pub f_step: f64,
    pub min_sinr: f64,
    pub step: f64,
    pub grad_norm: f64,
    pub backtracks: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptTrace {
    pub mu: f64,
    pub iterations: Vec<IterRecord>,
    /// Final phases, wrapped into `[0, 2 pi)`.
    pub theta_opt: Vec<f64>,
    pub f_opt: f64,
    pub min_sinr_opt: f64,
    pub f_start: f64,
    pub min_sinr_start: f64,
    pub converged: bool,
    /// `max_iters` ran out before the stopping test passed.
    pub truncated: bool,
    /// Some line search hit `max_backtracks` and took its smallest step.
    pub backtrack_limit_hit: bool,
    /// Momentum was reset after a negative improvement.
    pub momentum_restarted: bool,
}

impl OptTrace {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iteration,f,f_step,min_sinr,step,grad_norm,backtracks")?;
        for r in &self.iterations {
            writeln!(
                w,
                "{},{:e},{:e},{:e},{:e},{:e},{}",
                r.iter, r.f, r.f_step, r.min_sinr, r.step, r.grad_norm, r.backtracks
            )?;
        }
        Ok(())
    }
}

pub fn wrap_phase(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let w = x.rem_euclid(two_pi);
    if w >= two_pi {
        0.0
    } else {
        w
    }
}

/// Accelerated gradient ascent of the smoothed max-min SINR from `theta0`.
///
/// Returns the best phases seen among all evaluated iterates.
pub fn optimize(cfg: &SystemConfig, theta0: &[f64], params: &OptimizerParams) -> Result<(Vec<f64>, OptTrace)> {
    params.validate()?;
    let obj = Objective::new(cfg)?;
    if theta0.len() != cfg.n_ris_elements {
        return Err(Error::Precondition(format!(
            "starting point has {} phases, RIS has {} elements",
            theta0.len(),
            cfg.n_ris_elements
        )));
    }
    let mu = obj.resolve_mu(params.mu, theta0)?;
    let min_of = |t: &[f64]| -> Result<f64> { Ok(obj.sinrs(t)?.into_iter().fold(f64::INFINITY, f64::min)) };

    let mut theta = theta0.to_vec();
    let mut x_prev = theta.clone();
    let mut a = 1.0_f64;
    let mut f_theta = obj.value(&theta, mu)?;
    let f_start = f_theta;
    let mut best = (f_theta, theta.clone());
    let mut trace = OptTrace {
        mu,
        iterations: Vec::new(),
        theta_opt: Vec::new(),
        f_opt: f_theta,
        min_sinr_opt: 0.0,
        f_start,
        min_sinr_start: min_of(&theta)?,
        converged: false,
        truncated: false,
        backtrack_limit_hit: false,
        momentum_restarted: false,
    };

    for iter in 0..params.max_iters {
        let (_, g) = obj.value_and_gradient(&theta, mu)?;
        let gn2: f64 = g.iter().map(|x| x * x).sum();
        if gn2 == 0.0 || !gn2.is_finite() {
            if !gn2.is_finite() {
                return Err(Error::Numeric("non-finite gradient".into()));
            }
            trace.converged = true;
            break;
        }
        let step_point = |k: f64| -> Vec<f64> { theta.iter().zip(&g).map(|(t, d)| t + k * d).collect() };
        let mut k = 1.0;
        let mut backtracks = 0;
        let mut x = step_point(k);
        let mut f_x = obj.value(&x, mu)?;
        while f_x < f_theta + params.backtrack_alpha * k * gn2 {
            if backtracks == params.max_backtracks {
                trace.backtrack_limit_hit = true;
                break;
            }
            k *= params.backtrack_beta;
            backtracks += 1;
            x = step_point(k);
            f_x = obj.value(&x, mu)?;
        }
        let a_next = (1.0 + (4.0 * a * a + 1.0).sqrt()) / 2.0;
        let theta_next: Vec<f64> =
            x.iter().zip(&x_prev).map(|(xi, xp)| xi + (a - 1.0) * (xi - xp) / a_next).collect();
        let f_next = obj.value(&theta_next, mu)?;
        trace.iterations.push(IterRecord {
            iter,
            f: f_next,
            f_step: f_x,
            min_sinr: min_of(&theta_next)?,
            step: k,
            grad_norm: gn2.sqrt(),
            backtracks,
        });
        if f_x > best.0 {
            best = (f_x, x.clone());
        }
        if f_next > best.0 {
            best = (f_next, theta_next.clone());
        }
        let improvement = f_next - f_theta;
        x_prev = x.clone();
        a = a_next;
        if improvement < params.tol {
            if improvement < 0.0 && !trace.momentum_restarted {
                // Extrapolation overshot: drop the momentum and resume from the line-search point.
                trace.momentum_restarted = true;
                a = 1.0;
                theta = x;
                f_theta = f_x;
                continue;
            }
            trace.converged = true;
            break;
        }
        theta = theta_next;
        f_theta = f_next;
    }
    if !trace.converged && !trace.iterations.is_empty() {
        trace.truncated = true;
    }

    let theta_opt: Vec<f64> = best.1.iter().map(|&t| wrap_phase(t)).collect();
    trace.f_opt = best.0;
    trace.min_sinr_opt = min_of(&theta_opt)?;
    trace.theta_opt = theta_opt.clone();
    Ok((theta_opt, trace))
}

/// `|Phi_N(n)|` for every user.
pub fn steering_sum_magnitudes(ph: &PhaseVector) -> Vec<f64> {
    ph.phi_sum.iter().map(|x| x.norm()).collect()
}
