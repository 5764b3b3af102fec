//! Closed-form approximate rate: the four moment terms, the tap-sum constants
//! they rely on, the Rayleigh special case and the large-array limits.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{QuantizationModel, SystemConfig};
use crate::txchain::PhaseVector;

/// Tap-profile constants for one user.
///
/// All sums over taps use half-open ranges; empty ranges give zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TapSumConstants {
    /// `sum_{k=1}^{min(L_b, L_u)-1} su_k sb_k`.
    pub s1: f64,
    /// `sum_{k1=1}^{L_u-1} sum_{k2=k1+1}^{min(L_u, L_b+k1)-1} su_k1 su_k2 sb_{k2-k1}`.
    pub s2: f64,
    /// `sum_{k1=1}^{L_b-1} sum_{k2=k1+1}^{min(L_b, L_u+k1)-1} sb_k1 sb_k2 su_{k2-k1}`.
    pub s3: f64,
    /// `sum_{k1=1}^{L_b-1} sum_{k2=k1+1}^{min(L_b, L_u+k1-1)-1} sum_{k3=k2-k1+1}^{L_u-1}
    /// sb_k1 sb_k2 su_k3 su_{k1-k2+k3}` (the identity carries an extra factor 2).
    pub s4: f64,
    /// `sum_{k>=1} su_k^2`.
    pub quartic_user: f64,
    /// `sum_{k>=1} sb_k^2`.
    pub quartic_bs: f64,
    /// `quartic_user * quartic_bs`.
    pub quartic_cross: f64,
    /// Triple sum of the quantization term, starting at `k1 = 0`:
    /// `sum_{k1=0}^{L_b-1} sum_{k2=k1+1}^{min(L_b, L_u+k1)-1} sum_{k3=k2-k1}^{L_u-1}
    /// sb_k1 sb_k2 su_k3 su_{k1-k2+k3}`.
    pub triple: f64,
    pub tau_b: f64,
    pub tau_u: f64,
    pub varsigma_u: f64,
    pub varsigma_b: f64,
}

/// Fourth-moment constant `(K^2+1)/(K+1)^2 s0^2 - 2K/(K+1) s0 + 1` for first-tap power `s0`.
pub fn tau(k: f64, s0: f64) -> f64 {
    (k * k + 1.0) / ((k + 1.0) * (k + 1.0)) * s0 * s0 - 2.0 * k / (k + 1.0) * s0 + 1.0
}

/// `(1 - s0) K + 1`.
pub fn varsigma(k: f64, s0: f64) -> f64 {
    (1.0 - s0) * k + 1.0
}

/// The four periodic-sum identities in closed form, `[s1, s2, s3, 2 s4]`.
///
/// Multiplying by `N_c` gives the brute-force sums of [`periodic_sums_brute_force`]
/// whenever `N_c` exceeds every tap-index combination.
pub fn periodic_sums_closed(su: &[f64], sb: &[f64]) -> [f64; 4] {
    let (lu, lb) = (su.len(), sb.len());
    let mut s1 = 0.0;
    for k in 1..lu.min(lb) {
        s1 += su[k] * sb[k];
    }
    let mut s2 = 0.0;
    for k1 in 1..lu {
        for k2 in k1 + 1..lu.min(lb + k1) {
            s2 += su[k1] * su[k2] * sb[k2 - k1];
        }
    }
    let mut s3 = 0.0;
    for k1 in 1..lb {
        for k2 in k1 + 1..lb.min(lu + k1) {
            s3 += sb[k1] * sb[k2] * su[k2 - k1];
        }
    }
    let mut s4 = 0.0;
    for k1 in 1..lb {
        for k2 in k1 + 1..lb.min(lu + k1 - 1) {
            for k3 in k2 - k1 + 1..lu {
                s4 += sb[k1] * sb[k2] * su[k3] * su[k1 + k3 - k2];
            }
        }
    }
    [s1, s2, s3, 2.0 * s4]
}

fn periodic(x: i64, t: usize, n_c: usize) -> Complex64 {
    let n = n_c as i64;
    (0..n_c)
        .map(|s| {
            let e = (x * (s as i64 - t as i64)).rem_euclid(n);
            Complex64::from_polar(1.0, -2.0 * PI * e as f64 / n_c as f64)
        })
        .sum()
}

/// Left-hand sides of the four periodic-sum identities, evaluated literally
/// over every subcarrier `s` relative to subcarrier `t`.
pub fn periodic_sums_brute_force(su: &[f64], sb: &[f64], n_c: usize, t: usize) -> [Complex64; 4] {
    let (lu, lb) = (su.len() as i64, sb.len() as i64);
    let idx = |k: i64| k as usize;
    let zero = Complex64::new(0.0, 0.0);
    let mut out = [zero; 4];
    for k1 in 1..lu {
        for k2 in 1..lb {
            out[0] += periodic(k1 - k2, t, n_c) * (su[idx(k1)] * sb[idx(k2)]);
        }
    }
    for k1 in 1..lu {
        for k2 in (1..lu).filter(|&k| k != k1) {
            for k3 in 1..lb {
                out[1] += periodic(k2 - k1 - k3, t, n_c) * (su[idx(k1)] * su[idx(k2)] * sb[idx(k3)]);
            }
        }
    }
    for k1 in 1..lb {
        for k2 in (1..lb).filter(|&k| k != k1) {
            for k3 in 1..lu {
                out[2] += periodic(k1 - k2 - k3, t, n_c) * (sb[idx(k1)] * sb[idx(k2)] * su[idx(k3)]);
            }
        }
    }
    for k1 in 1..lb {
        for k2 in (1..lb).filter(|&k| k != k1) {
            for k3 in 1..lu {
                for k4 in (1..lu).filter(|&k| k != k3) {
                    let w = sb[idx(k1)] * sb[idx(k2)] * su[idx(k3)] * su[idx(k4)];
                    out[3] += periodic(k1 - k2 + k3 - k4, t, n_c) * w;
                }
            }
        }
    }
    out
}

impl TapSumConstants {
    pub fn from_profiles(su: &[f64], sb: &[f64], k_u: f64, k_b: f64) -> Self {
        let [s1, s2, s3, s4x2] = periodic_sums_closed(su, sb);
        let (lu, lb) = (su.len(), sb.len());
        let quartic_user: f64 = su.iter().skip(1).map(|x| x * x).sum();
        let quartic_bs: f64 = sb.iter().skip(1).map(|x| x * x).sum();
        let mut triple = 0.0;
        for k1 in 0..lb {
            for k2 in k1 + 1..lb.min(lu + k1) {
                for k3 in k2 - k1..lu {
                    triple += sb[k1] * sb[k2] * su[k3] * su[k1 + k3 - k2];
                }
            }
        }
        Self {
            s1,
            s2,
            s3,
            s4: s4x2 / 2.0,
            quartic_user,
            quartic_bs,
            quartic_cross: quartic_user * quartic_bs,
            triple,
            tau_b: tau(k_b, sb[0]),
            tau_u: tau(k_u, su[0]),
            varsigma_u: varsigma(k_u, su[0]),
            varsigma_b: varsigma(k_b, sb[0]),
        }
    }
}

pub fn tap_sum_constants(cfg: &SystemConfig, n: usize) -> Result<TapSumConstants> {
    check_user(cfg, n)?;
    Ok(TapSumConstants::from_profiles(
        &cfg.tap_power_user[n],
        &cfg.tap_power_bs,
        cfg.rician_user[n],
        cfg.rician_bs,
    ))
}

/// Cross-subcarrier correlation `E[conj(g(s)) g(t)]` of a scattered
/// frequency entry with path loss `beta`, Rician factor `k` and tap powers `sigma2`.
pub fn nlos_correlation(beta: f64, k: f64, sigma2: &[f64], n_c: usize, s: usize, t: usize) -> Complex64 {
    let mut acc = Complex64::new(sigma2[0] / (k + 1.0), 0.0);
    for (l, p) in sigma2.iter().enumerate().skip(1) {
        acc += lag_phase(l as i64 * (t as i64 - s as i64), n_c) * *p;
    }
    acc * beta
}

/// `E[|g(s)|^2 |g(t)|^2]` of a scattered frequency entry.
pub fn nlos_fourth_moment(beta: f64, k: f64, sigma2: &[f64], n_c: usize, s: usize, t: usize) -> f64 {
    let s0 = sigma2[0] / (k + 1.0);
    let d = s as i64 - t as i64;
    let mut acc = Complex64::new(tau(k, sigma2[0]), 0.0);
    for (l, p) in sigma2.iter().enumerate().skip(1) {
        acc += p * p;
        acc += lag_phase(l as i64 * d, n_c) * (s0 * p);
        acc += lag_phase(-(l as i64) * d, n_c) * (s0 * p);
    }
    for (k1, p1) in sigma2.iter().enumerate().skip(1) {
        for (k2, p2) in sigma2.iter().enumerate().skip(1) {
            if k1 != k2 {
                acc += lag_phase((k1 as i64 - k2 as i64) * d, n_c) * (p1 * p2);
            }
        }
    }
    acc.re * beta * beta
}

fn lag_phase(x: i64, n_c: usize) -> Complex64 {
    let e = x.rem_euclid(n_c as i64);
    Complex64::from_polar(1.0, -2.0 * PI * e as f64 / n_c as f64)
}

/// Moment terms of one user for a given phase vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuxTerms {
    pub user: usize,
    /// Second moment of the desired-signal gain.
    pub varpi: f64,
    /// Interference moments indexed by the interfering user; the own entry is zero.
    pub eta: Vec<f64>,
    /// Quantization-noise moment.
    pub xi: f64,
    /// Noise-gain moment.
    pub eps: f64,
}

fn check_user(cfg: &SystemConfig, n: usize) -> Result<()> {
    if n >= cfg.n_users {
        return Err(Error::Precondition(format!("user {n} out of range (N_u = {})", cfg.n_users)));
    }
    Ok(())
}

/// Per-configuration constants shared by every closed-form evaluation.
#[derive(Debug, Clone)]
pub struct RateModel {
    pub cfg: SystemConfig,
    pub quant: QuantizationModel,
    pub consts: Vec<TapSumConstants>,
    /// `gram[a * n_u + b] = a_a^H a_b` over the users' RIS responses.
    pub gram: Vec<Complex64>,
}

impl RateModel {
    pub fn new(cfg: &SystemConfig) -> Result<Self> {
        cfg.validate()?;
        let consts = (0..cfg.n_users).map(|n| tap_sum_constants(cfg, n)).collect::<Result<_>>()?;
        Ok(Self {
            cfg: cfg.clone(),
            quant: cfg.quantization()?,
            consts,
            gram: cfg.user_gram()?,
        })
    }

    pub fn n_users(&self) -> usize {
        self.cfg.n_users
    }

    /// `h_a^H h_b`.
    pub fn rho(&self, a: usize, b: usize) -> Complex64 {
        self.gram[a * self.cfg.n_users + b]
    }

    fn check_phases(&self, ph: &PhaseVector) -> Result<()> {
        if ph.n_users() != self.cfg.n_users || ph.n_ris() != self.cfg.n_ris_elements {
            return Err(Error::Precondition("phase vector does not match the configuration".into()));
        }
        Ok(())
    }

    pub fn varpi(&self, ph: &PhaseVector, n: usize) -> f64 {
        let c = &self.cfg;
        let (nb, nr) = (c.n_bs_antennas as f64, c.n_ris_elements as f64);
        let (kn, k) = (c.rician_user[n], c.rician_bs);
        let (s, sb) = (c.tap_power_user[n][0], c.tap_power_bs[0]);
        let (vu, vb) = (self.consts[n].varsigma_u, self.consts[n].varsigma_b);
        let p2 = ph.phi_sum[n].norm_sqr();
        let (bu, bb) = (c.pathloss_user[n], c.pathloss_bs);
        let pre = bu * bu * bb * bb * nb / ((kn + 1.0).powi(2) * (k + 1.0).powi(2));
        let val = s * s * sb * sb * kn * kn * k * k * nb * p2 * p2
            + 2.0 * s * sb * kn * k * p2
                * (2.0 * sb * vu * k * nb * nr + (s * vb * kn + vu * vb) * (nb + 1.0) * nr + 2.0 * vu * vb * (nb + 1.0))
            + (s * s * vb * vb * kn * kn + 2.0 * s * sb * vu * vb * kn * k) * (nb + 1.0) * nr * nr
            + 2.0 * sb * sb * vu * vu * k * k * nb * nr * nr
            + (2.0 * s * vu * vb * vb * kn + 2.0 * sb * vu * vu * vb * k + vu * vu * vb * vb) * (nb + 1.0) * nr * (nr + 1.0);
        pre * val
    }

    pub fn eta(&self, ph: &PhaseVector, n: usize, u: usize) -> Result<f64> {
        if u == n {
            return Err(Error::Precondition(format!("interference term needs two distinct users (got {n}, {u})")));
        }
        check_user(&self.cfg, u)?;
        let c = &self.cfg;
        let (nb, nr) = (c.n_bs_antennas as f64, c.n_ris_elements as f64);
        let (kn, ku, k) = (c.rician_user[n], c.rician_user[u], c.rician_bs);
        let (sn, su, s) = (c.tap_power_user[n][0], c.tap_power_user[u][0], c.tap_power_bs[0]);
        let (vn, vu, vb) = (self.consts[n].varsigma_u, self.consts[u].varsigma_u, self.consts[n].varsigma_b);
        let (p2n, p2u) = (ph.phi_sum[n].norm_sqr(), ph.phi_sum[u].norm_sqr());
        let pre = c.pathloss_user[n] * c.pathloss_user[u] * c.pathloss_bs * c.pathloss_bs * nb
            / ((kn + 1.0) * (ku + 1.0) * (k + 1.0).powi(2));
        let cross = (ph.phi_sum[n].conj() * ph.phi_sum[u] * self.rho(u, n)).re;
        let val = sn * su * s * s * kn * ku * k * k * nb * p2n * p2u
            + ((s * vu * k * nb + su * vb * ku + vu * vb) * nr + 2.0 * vu * vb * nb) * sn * s * kn * k * p2n
            + ((s * vn * k * nb + sn * vb * kn + vn * vb) * nr + 2.0 * vn * vb * nb) * su * s * ku * k * p2u
            + (vn * vu * s * s * k * k * nb + sn * su * vb * vb * kn * ku + (sn * vu * kn + su * vn * ku) * s * vb * k)
                * nr
                * nr
            + (su * vn * vb * vb * ku + sn * vu * vb * vb * kn + vn * vu * (2.0 * s * vb * k + vb * vb)) * nr * (nb + nr)
            + sn * su * vb * vb * kn * ku * nb * self.rho(n, u).norm_sqr()
            + 2.0 * sn * su * s * vb * kn * ku * k * nb * cross;
        Ok(pre * val)
    }

    /// Weights `p_u beta_u K_u s_u / (K_u + 1)` and `p_u beta_u varsigma_u / (K_u + 1)`.
    pub(crate) fn user_weights(&self) -> (Vec<f64>, Vec<f64>) {
        let c = &self.cfg;
        (0..c.n_users)
            .map(|u| {
                let base = c.tx_power[u] * c.pathloss_user[u] / (c.rician_user[u] + 1.0);
                (base * c.rician_user[u] * c.tap_power_user[u][0], base * self.consts[u].varsigma_u)
            })
            .unzip()
    }

    pub fn xi(&self, ph: &PhaseVector, n: usize) -> f64 {
        let c = &self.cfg;
        let cs = &self.consts[n];
        let (nb, nr) = (c.n_bs_antennas as f64, c.n_ris_elements as f64);
        let (kn, k) = (c.rician_user[n], c.rician_bs);
        let (s, sb) = (c.tap_power_user[n][0], c.tap_power_bs[0]);
        let (vn, vb) = (cs.varsigma_u, cs.varsigma_b);
        let (tb, tu, qb, qu) = (cs.tau_b, cs.tau_u, cs.quartic_bs, cs.quartic_user);
        let (bn, bb, pn) = (c.pathloss_user[n], c.pathloss_bs, c.tx_power[n]);
        let k1 = (k + 1.0).powi(2);
        let kn1 = kn + 1.0;
        let p2n = ph.phi_sum[n].norm_sqr();

        let c1 = bn * bb * bb * nb / (kn1 * k1);
        let c2 = bn * bb * bb * nb / kn1;
        let c3 = pn * bn * bn * bb * bb * sb * nb / (kn1 * kn1 * k1);
        let c4 = pn * bn * bn * bb * bb * nb * nr;

        let (w, v) = self.user_weights();
        let nu = c.n_users;
        let sum_wp2: f64 = (0..nu).map(|u| w[u] * ph.phi_sum[u].norm_sqr()).sum();
        let sum_w: f64 = w.iter().sum();
        let sum_v: f64 = v.iter().sum();
        let sum_v_others: f64 = (0..nu).filter(|&u| u != n).map(|u| v[u]).sum();
        let cross: Complex64 = (0..nu).map(|u| ph.phi_sum[u] * self.rho(u, n) * w[u]).sum();
        let cross = (ph.phi_sum[n].conj() * cross).re;
        let sum_wrho: f64 = (0..nu).map(|u| w[u] * self.rho(n, u).norm_sqr()).sum();

        let t1 = s * sb * sb * kn * k * p2n + s * sb * vb * kn * nr + sb * sb * vn * k * nr + sb * vn * vb * nr + 2.0 * sb * sb * vn;
        let t2 = s * sb * vb * kn * k * p2n + s * vb * vb * kn * (nr - 1.0) + sb * vn * vb * k * nr + vn * vb * vb * (nr - 1.0)
            - s * sb * sb * kn
            + k1 * (s * tb * kn + vn * tb + vn * qb);
        let t3 = (vb * nr + 2.0 * sb + sb * k * nr) * s * sb * kn * k * p2n
            + s * sb * vb * kn * k * nr * nr
            + s * kn * k1 * (tb + qb) * nr
            + (s * kn + vn) * vb * vb * nr * (nr - 1.0);
        let t4 = tb + qb + sb * vb * k / k1 * (nr - 1.0) + 2.0 * sb * sb * k / k1 + sb * k / k1 * nr * (sb * k + vb);
        let t5 = s * s * sb * (nr - 1.0)
            + 2.0 * s * s * sb * kn * k * nr
            + 2.0 * s * s * sb * (k + kn) * (nr - 1.0)
            + k * (s * s * sb * k + sb * vn * vn * k + 2.0 * vn * vn * vb) * (nr - 1.0);
        let t6 = tb * tu
            + 2.0 * s * s * kn / (kn1 * kn1) * tb
            + sb * k / k1 * (sb * k + 2.0 * sb + 2.0 * vb) * tu
            + (tb + sb / k1 * (sb * (k * k * nr + 2.0 * k * nr + nr - 1.0) + 2.0 * vb * k)) * qu
            + (tu + s * s / (kn1 * kn1) * (2.0 * kn * nr + nr - 1.0)) * qb
            + nr * qb * qu
            + 2.0 * nr * cs.triple;

        t1 * k * c1 * sum_wp2
            + 2.0 * s * sb * sb * kn * k * c1 * cross
            + t2 * nr * c1 * sum_w
            + t3 * c1 * sum_v
            + (sb * sb / k1 + qb) * s * kn * c2 * sum_wrho
            + t4 * vn * nr * c2 * sum_v_others
            + t5 * nr * c3
            + t6 * c4
            + (sb * k * nr + sb * nr + 2.0 * vb) * 2.0 * s * s * kn * k * c3 * p2n
    }

    pub fn epsilon(&self, ph: &PhaseVector, n: usize) -> f64 {
        let c = &self.cfg;
        let (nb, nr) = (c.n_bs_antennas as f64, c.n_ris_elements as f64);
        let (kn, k) = (c.rician_user[n], c.rician_bs);
        let (s, sb) = (c.tap_power_user[n][0], c.tap_power_bs[0]);
        let (vn, vb) = (self.consts[n].varsigma_u, self.consts[n].varsigma_b);
        c.pathloss_user[n] * c.pathloss_bs * nb / ((kn + 1.0) * (k + 1.0))
            * (s * kn * sb * k * ph.phi_sum[n].norm_sqr() + (s * kn * vb + sb * k * vn + vn * vb) * nr)
    }

    pub fn aux_terms(&self, ph: &PhaseVector, n: usize) -> Result<AuxTerms> {
        check_user(&self.cfg, n)?;
        self.check_phases(ph)?;
        let eta = (0..self.cfg.n_users)
            .map(|u| if u == n { Ok(0.0) } else { self.eta(ph, n, u) })
            .collect::<Result<_>>()?;
        Ok(AuxTerms {
            user: n,
            varpi: self.varpi(ph, n),
            eta,
            xi: self.xi(ph, n),
            eps: self.epsilon(ph, n),
        })
    }

    /// Numerator and denominator of the closed-form SINR.
    pub fn sinr_parts(&self, aux: &AuxTerms) -> (f64, f64) {
        let c = &self.cfg;
        let a = self.quant.alpha;
        let n = aux.user;
        let inter: f64 = (0..c.n_users).filter(|&u| u != n).map(|u| c.tx_power[u] * aux.eta[u]).sum();
        let num = a * a * c.tx_power[n] * aux.varpi;
        let den = a * a * inter + a * (1.0 - a) * aux.xi + c.noise_power * a * aux.eps;
        (num, den)
    }

    pub fn sinr(&self, ph: &PhaseVector, n: usize) -> Result<f64> {
        let aux = self.aux_terms(ph, n)?;
        let (num, den) = self.sinr_parts(&aux);
        if !(den > 0.0) {
            return Err(Error::Numeric(format!("non-positive SINR denominator {den} for user {n}")));
        }
        Ok(num / den)
    }

    pub fn rate(&self, ph: &PhaseVector, n: usize) -> Result<f64> {
        Ok(self.cfg.rate_prefactor() * (1.0 + self.sinr(ph, n)?).log2())
    }
}

/// Products `Phi(n, .)` and their sum for user `n`.
pub fn phi_products(ph: &PhaseVector, n: usize) -> Result<(Vec<Complex64>, Complex64)> {
    if n >= ph.n_users() {
        return Err(Error::Precondition(format!("user {n} out of range")));
    }
    let nr = ph.n_ris();
    Ok((ph.phi[n * nr..(n + 1) * nr].to_vec(), ph.phi_sum[n]))
}

pub fn varpi(cfg: &SystemConfig, ph: &PhaseVector, n: usize) -> Result<f64> {
    Ok(RateModel::new(cfg)?.aux_terms(ph, n)?.varpi)
}

pub fn eta(cfg: &SystemConfig, ph: &PhaseVector, n: usize, u: usize) -> Result<f64> {
    check_user(cfg, n)?;
    RateModel::new(cfg)?.eta(ph, n, u)
}

pub fn xi(cfg: &SystemConfig, ph: &PhaseVector, n: usize) -> Result<f64> {
    Ok(RateModel::new(cfg)?.aux_terms(ph, n)?.xi)
}

pub fn epsilon(cfg: &SystemConfig, ph: &PhaseVector, n: usize) -> Result<f64> {
    Ok(RateModel::new(cfg)?.aux_terms(ph, n)?.eps)
}

/// Closed-form approximate rate of user `n` in bit/s/Hz.
pub fn rate_closed_form(cfg: &SystemConfig, ph: &PhaseVector, n: usize) -> Result<f64> {
    RateModel::new(cfg)?.rate(ph, n)
}

/// Quantization constant of the pure-scattering case.
pub fn rayleigh_quant_constant(cfg: &SystemConfig, n: usize) -> Result<f64> {
    check_user(cfg, n)?;
    let nr = cfg.n_ris_elements as f64;
    let total: f64 = (0..cfg.n_users).map(|u| cfg.tx_power[u] * cfg.pathloss_user[u]).sum();
    let qb: f64 = cfg.tap_power_bs.iter().map(|x| x * x).sum();
    let qu: f64 = cfg.tap_power_user[n].iter().map(|x| x * x).sum();
    let own = cfg.tx_power[n] * cfg.pathloss_user[n];
    let triple = tap_sum_constants(cfg, n)?.triple;
    Ok(nr * total + total * qb + own * qu + own * nr * qb * qu + 2.0 * own * nr * triple)
}

/// Rate of user `n` when both hops have no line-of-sight component.
pub fn rate_rayleigh(cfg: &SystemConfig, n: usize) -> Result<f64> {
    cfg.validate()?;
    check_user(cfg, n)?;
    if cfg.rician_bs != 0.0 || cfg.rician_user.iter().any(|&k| k != 0.0) {
        return Err(Error::Precondition("the scattering-only rate requires every Rician factor to be zero".into()));
    }
    let q = cfg.quantization()?;
    let a = q.alpha;
    let (nb, nr) = (cfg.n_bs_antennas as f64, cfg.n_ris_elements as f64);
    let num = a * a * cfg.tx_power[n] * cfg.pathloss_user[n] * (nb + 1.0) * (nr + 1.0);
    let inter: f64 = (0..cfg.n_users)
        .filter(|&u| u != n)
        .map(|u| cfg.tx_power[u] * cfg.pathloss_user[u] * (nb + nr))
        .sum();
    let den = a * a * inter + a * (1.0 - a) * rayleigh_quant_constant(cfg, n)? + cfg.noise_power * a / cfg.pathloss_bs;
    Ok(cfg.rate_prefactor() * (1.0 + num / den).log2())
}

/// RIS state assumed by the large-array limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alignment {
    /// The RIS is co-phased with no user; the steering sums stay bounded.
    Unaligned,
    /// The RIS is co-phased with the evaluated user and has `n_ris` elements.
    Aligned { n_ris: usize },
}

/// `p_u beta_u (K_n + 1) / (p_n beta_n (K_u + 1))`.
fn power_ratio(cfg: &SystemConfig, pw: &[f64], n: usize, u: usize) -> f64 {
    pw[u] * cfg.pathloss_user[u] * (cfg.rician_user[n] + 1.0) / (pw[n] * cfg.pathloss_user[n] * (cfg.rician_user[u] + 1.0))
}

fn log_rate(cfg: &SystemConfig, num: f64, den: f64) -> f64 {
    let snr = if den == 0.0 { f64::INFINITY } else { num / den };
    cfg.rate_prefactor() * (1.0 + snr).log2()
}

fn unaligned_signal(s: f64, sb: f64, kn: f64, k: f64, vn: f64, vb: f64) -> f64 {
    let mix = sb * vn * k + s * vb * kn + vn * vb;
    sb * sb * vn * vn * k * k + mix * mix
}

/// Limit of the closed-form rate as both array sizes grow with fixed powers.
///
/// With a single user the limit is unbounded and `+inf` is returned.
pub fn asymptotic_rate(cfg: &SystemConfig, n: usize, alignment: Alignment) -> Result<f64> {
    cfg.validate()?;
    check_user(cfg, n)?;
    let (kn, k) = (cfg.rician_user[n], cfg.rician_bs);
    let (s, sb) = (cfg.tap_power_user[n][0], cfg.tap_power_bs[0]);
    let (vn, vb) = (cfg.nlos_weight_user(n), cfg.nlos_weight_bs());
    let others = (0..cfg.n_users).filter(|&u| u != n);
    let pw = &cfg.tx_power;
    Ok(match alignment {
        Alignment::Unaligned => {
            let den: f64 = others
                .map(|u| power_ratio(cfg, pw, n, u) * sb * sb * vn * cfg.nlos_weight_user(u) * k * k)
                .sum();
            log_rate(cfg, unaligned_signal(s, sb, kn, k, vn, vb), den)
        }
        Alignment::Aligned { n_ris } => {
            let den: f64 = others.map(|u| power_ratio(cfg, pw, n, u) * cfg.nlos_weight_user(u)).sum();
            log_rate(cfg, s * kn * n_ris as f64, den)
        }
    })
}

/// How transmit power shrinks with the array sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerLaw {
    /// `p_j = E_j / N_b`.
    PerBs,
    /// `p_j = E_j / (N_b N_r)`, RIS aligned with no user.
    PerBsRis,
    /// `p_n = E_n / (N_b N_r^2)` for the served user, `E_u / (N_b N_r)` otherwise; RIS aligned with user `n`.
    Aligned,
}

/// Limit of the closed-form rate under a power-scaling law with fixed energies `energies` (watts).
///
/// `PerBs` depends on the phase vector through the steering sums; the other
/// laws ignore `ph`.
pub fn scaled_rate(cfg: &SystemConfig, ph: &PhaseVector, n: usize, law: PowerLaw, energies: &[f64]) -> Result<f64> {
    cfg.validate()?;
    check_user(cfg, n)?;
    if energies.len() != cfg.n_users || energies.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::Precondition("one positive energy per user is required".into()));
    }
    let a = cfg.quantization()?.alpha;
    let nr = cfg.n_ris_elements as f64;
    let (kn, k) = (cfg.rician_user[n], cfg.rician_bs);
    let (s, sb) = (cfg.tap_power_user[n][0], cfg.tap_power_bs[0]);
    let (vn, vb) = (cfg.nlos_weight_user(n), cfg.nlos_weight_bs());
    let noise = cfg.noise_power * (kn + 1.0) * (k + 1.0) / (a * cfg.pathloss_user[n] * cfg.pathloss_bs * energies[n]);
    let others: Vec<usize> = (0..cfg.n_users).filter(|&u| u != n).collect();

    Ok(match law {
        PowerLaw::PerBs => {
            if ph.n_users() != cfg.n_users || ph.n_ris() != cfg.n_ris_elements {
                return Err(Error::Precondition("phase vector does not match the configuration".into()));
            }
            let gram = cfg.user_gram()?;
            let nu = cfg.n_users;
            let p2n = ph.phi_sum[n].norm_sqr();
            let mix = sb * vn * k + s * vb * kn + vn * vb;
            let g1 = s * s * sb * sb * kn * kn * k * k * p2n * p2n
                + (2.0 * s * vn * vb * vb * kn + 2.0 * sb * vn * vn * vb * k + vn * vn * vb * vb) * nr
                + 2.0 * s * sb * kn * k * p2n * ((2.0 * sb * vn * k + s * vb * kn + vn * vb) * nr + 2.0 * vn * vb)
                + (sb * sb * vn * vn * k * k + mix * mix) * nr * nr;
            let g3 = s * kn * sb * k * p2n + (s * kn * vb + sb * k * vn + vn * vb) * nr;
            let inter: f64 = others
                .iter()
                .map(|&u| {
                    let (ku, su) = (cfg.rician_user[u], cfg.tap_power_user[u][0]);
                    let vu = cfg.nlos_weight_user(u);
                    let p2u = ph.phi_sum[u].norm_sqr();
                    let rho_nu = gram[n * nu + u];
                    let rho_un = gram[u * nu + n];
                    let g2 = s * su * sb * sb * kn * ku * k * k * p2n * p2u
                        + vn * vu * sb * sb * k * k * nr * nr
                        + (sb * vu * k * nr + 2.0 * vu * vb) * s * sb * kn * k * p2n
                        + (sb * vn * k * nr + 2.0 * vn * vb) * su * sb * ku * k * p2u
                        + (su * vn * vb * vb * ku + s * vu * vb * vb * kn + vn * vu * (2.0 * sb * vb * k + vb * vb)) * nr
                        + s * su * vb * vb * kn * ku * rho_nu.norm_sqr()
                        + 2.0 * s * su * sb * vb * kn * ku * k * (ph.phi_sum[n].conj() * ph.phi_sum[u] * rho_un).re;
                    power_ratio(cfg, energies, n, u) * g2
                })
                .sum();
            log_rate(cfg, g1, inter + noise * g3)
        }
        PowerLaw::PerBsRis => {
            let g1 = unaligned_signal(s, sb, kn, k, vn, vb);
            let g3 = s * kn * vb + sb * k * vn + vn * vb;
            let inter: f64 = others
                .iter()
                .map(|&u| power_ratio(cfg, energies, n, u) * vn * cfg.nlos_weight_user(u) * sb * sb * k * k)
                .sum();
            log_rate(cfg, g1, inter + noise * g3)
        }
        PowerLaw::Aligned => {
            let inter: f64 = others
                .iter()
                .map(|&u| power_ratio(cfg, energies, n, u) * sb * cfg.nlos_weight_user(u) * k)
                .sum();
            log_rate(cfg, s * sb * kn * k, inter + noise)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_tap_sums_are_empty() {
        assert_eq!(periodic_sums_closed(&[1.0], &[1.0]), [0.0; 4]);
        let c = TapSumConstants::from_profiles(&[1.0], &[1.0], 0.0, 0.0);
        assert_eq!(c.triple, 0.0);
        assert_eq!(c.tau_b, 2.0);
    }

    #[test]
    fn tau_at_zero_k() {
        // Only the s0^2 and constant terms survive at K = 0.
        assert!((tau(0.0, 0.4) - (0.16 + 1.0)).abs() < 1e-15);
        assert!((varsigma(3.0, 0.25) - 3.25).abs() < 1e-15);
    }

    #[test]
    fn flat_two_tap_sums() {
        let h = [0.5, 0.5];
        let [s1, s2, s3, s4] = periodic_sums_closed(&h, &h);
        assert_eq!(s1, 0.25);
        assert_eq!((s2, s3, s4), (0.0, 0.0, 0.0));
    }
}
