//! Frequency-selective Rician channel draws and their per-subcarrier
//! frequency-domain entries, split into line-of-sight and scattered parts.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::model::SystemConfig;

/// Entry `(t, k)` of the unitary DFT matrix of size `n_c`.
pub fn dft_entry(t: usize, k: usize, n_c: usize) -> Complex64 {
    let phase = -2.0 * PI * ((t * k) % n_c) as f64 / n_c as f64;
    Complex64::from_polar(1.0 / (n_c as f64).sqrt(), phase)
}

/// Dense unitary DFT matrix, row-major.
pub fn dft_matrix(n_c: usize) -> Vec<Complex64> {
    let mut f = Vec::with_capacity(n_c * n_c);
    for t in 0..n_c {
        for k in 0..n_c {
            f.push(dft_entry(t, k, n_c));
        }
    }
    f
}

/// Standard circularly-symmetric complex Gaussian sample, `CN(0, 1)`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Time-domain taps of both hops for one channel realization.
///
/// Layouts: `user_ris[(i * n_u + j) * l_u + l]` for RIS element `i`, user `j`;
/// `ris_bs[(i * n_r + j) * l_b + l]` for BS antenna `i`, RIS element `j`.
/// `user_los` / `bs_los` hold the line-of-sight part of tap 0 (same
/// `(i, j)` indexing), so tap 0 minus that value is the scattered part.
#[derive(Debug, Clone)]
pub struct TapSet {
    pub n_bs: usize,
    pub n_ris: usize,
    pub n_users: usize,
    pub taps_user: usize,
    pub taps_bs: usize,
    pub user_ris: Vec<Complex64>,
    pub ris_bs: Vec<Complex64>,
    pub user_los: Vec<Complex64>,
    pub bs_los: Vec<Complex64>,
}

impl TapSet {
    pub fn user_tap(&self, ris: usize, user: usize, l: usize) -> Complex64 {
        self.user_ris[(ris * self.n_users + user) * self.taps_user + l]
    }

    pub fn bs_tap(&self, bs: usize, ris: usize, l: usize) -> Complex64 {
        self.ris_bs[(bs * self.n_ris + ris) * self.taps_bs + l]
    }

    /// Writes one row per tap: `link,i,j,l,re,im`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "link,i,j,l,re,im")?;
        for i in 0..self.n_ris {
            for j in 0..self.n_users {
                for l in 0..self.taps_user {
                    let h = self.user_tap(i, j, l);
                    writeln!(w, "user_ris,{i},{j},{l},{:e},{:e}", h.re, h.im)?;
                }
            }
        }
        for i in 0..self.n_bs {
            for j in 0..self.n_ris {
                for l in 0..self.taps_bs {
                    let h = self.bs_tap(i, j, l);
                    writeln!(w, "ris_bs,{i},{j},{l},{:e},{:e}", h.re, h.im)?;
                }
            }
        }
        Ok(())
    }
}

/// Per-subcarrier diagonal entries of both frequency-domain channels.
///
/// Layouts: `g_user[(i * n_u + j) * n_c + t]`, `g_bs[(i * n_r + j) * n_c + t]`;
/// the LoS parts are subcarrier independent and drop the `t` index.
#[derive(Debug, Clone)]
pub struct FreqChannel {
    pub n_bs: usize,
    pub n_ris: usize,
    pub n_users: usize,
    pub n_subcarriers: usize,
    pub g_user: Vec<Complex64>,
    pub g_bs: Vec<Complex64>,
    /// LoS parts are flat across subcarriers and indexed without `t`.
    pub g_user_los: Vec<Complex64>,
    pub g_bs_los: Vec<Complex64>,
    pub g_user_nlos: Vec<Complex64>,
    pub g_bs_nlos: Vec<Complex64>,
}

impl FreqChannel {
    pub fn user(&self, ris: usize, user: usize, t: usize) -> Complex64 {
        self.g_user[(ris * self.n_users + user) * self.n_subcarriers + t]
    }

    pub fn bs(&self, bs: usize, ris: usize, t: usize) -> Complex64 {
        self.g_bs[(bs * self.n_ris + ris) * self.n_subcarriers + t]
    }
}

/// Draws channel realizations for a fixed configuration.
///
/// Caches the deterministic LoS tap values and the DFT twiddles so that
/// repeated draws only pay for the random part.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    n_bs: usize,
    n_ris: usize,
    n_users: usize,
    n_c: usize,
    taps_user: usize,
    taps_bs: usize,
    user_amp: Vec<Vec<f64>>,
    bs_amp: Vec<f64>,
    user_los: Vec<Complex64>,
    bs_los: Vec<Complex64>,
    sqrt_beta_user: Vec<f64>,
    sqrt_beta_bs: f64,
    /// `twiddle[t * l_max + k] = exp(-j 2 pi t k / N_c)`.
    twiddle: Vec<Complex64>,
    l_max: usize,
}

impl ChannelSampler {
    pub fn new(cfg: &SystemConfig) -> Result<Self> {
        cfg.validate()?;
        let st = cfg.steering()?;
        let (nb, nr, nu) = (cfg.n_bs_antennas, cfg.n_ris_elements, cfg.n_users);

        // Scattered amplitudes: tap 0 is scaled by 1/sqrt(K+1), the rest are pure.
        let user_amp = (0..nu)
            .map(|j| {
                let k = cfg.rician_user[j];
                cfg.tap_power_user[j]
                    .iter()
                    .enumerate()
                    .map(|(l, p)| if l == 0 { (p / (k + 1.0)).sqrt() } else { p.sqrt() })
                    .collect()
            })
            .collect();
        let kb = cfg.rician_bs;
        let bs_amp = cfg
            .tap_power_bs
            .iter()
            .enumerate()
            .map(|(l, p)| if l == 0 { (p / (kb + 1.0)).sqrt() } else { p.sqrt() })
            .collect();

        let mut user_los = Vec::with_capacity(nr * nu);
        for i in 0..nr {
            for j in 0..nu {
                let k = cfg.rician_user[j];
                let w = (k / (k + 1.0)).sqrt() * cfg.tap_power_user[j][0].sqrt();
                user_los.push(st.user[j][i] * w);
            }
        }
        let wb = (kb / (kb + 1.0)).sqrt() * cfg.tap_power_bs[0].sqrt();
        let mut bs_los = Vec::with_capacity(nb * nr);
        for i in 0..nb {
            for j in 0..nr {
                bs_los.push(st.bs[i] * st.ris_depart[j].conj() * wb);
            }
        }

        let n_c = cfg.n_subcarriers;
        let l_max = cfg.taps_user_ris.max(cfg.taps_ris_bs);
        let mut twiddle = Vec::with_capacity(n_c * l_max);
        for t in 0..n_c {
            for k in 0..l_max {
                twiddle.push(dft_entry(t, k, n_c) * (n_c as f64).sqrt());
            }
        }

        Ok(Self {
            n_bs: nb,
            n_ris: nr,
            n_users: nu,
            n_c,
            taps_user: cfg.taps_user_ris,
            taps_bs: cfg.taps_ris_bs,
            user_amp,
            bs_amp,
            user_los,
            bs_los,
            sqrt_beta_user: cfg.pathloss_user.iter().map(|b| b.sqrt()).collect(),
            sqrt_beta_bs: cfg.pathloss_bs.sqrt(),
            twiddle,
            l_max,
        })
    }

    /// Draws every tap of both hops, independently per `(i, j)` pair.
    pub fn draw_taps<R: Rng + ?Sized>(&self, rng: &mut R) -> TapSet {
        let (nb, nr, nu, lu, lb) = (self.n_bs, self.n_ris, self.n_users, self.taps_user, self.taps_bs);
        let mut user_ris = Vec::with_capacity(nr * nu * lu);
        for i in 0..nr {
            for j in 0..nu {
                for l in 0..lu {
                    let mut h = complex_normal(rng) * self.user_amp[j][l];
                    if l == 0 {
                        h += self.user_los[i * nu + j];
                    }
                    user_ris.push(h);
                }
            }
        }
        let mut ris_bs = Vec::with_capacity(nb * nr * lb);
        for i in 0..nb {
            for j in 0..nr {
                for l in 0..lb {
                    let mut h = complex_normal(rng) * self.bs_amp[l];
                    if l == 0 {
                        h += self.bs_los[i * nr + j];
                    }
                    ris_bs.push(h);
                }
            }
        }
        TapSet {
            n_bs: nb,
            n_ris: nr,
            n_users: nu,
            taps_user: lu,
            taps_bs: lb,
            user_ris,
            ris_bs,
            user_los: self.user_los.clone(),
            bs_los: self.bs_los.clone(),
        }
    }

    /// Frequency response `sqrt(beta) * sum_k exp(-j 2 pi t k / N_c) h_k` of every link.
    pub fn freq_entries(&self, taps: &TapSet) -> FreqChannel {
        let (nb, nr, nu, n_c) = (self.n_bs, self.n_ris, self.n_users, self.n_c);
        let (lu, lb) = (self.taps_user, self.taps_bs);

        let mut nlos_buf = vec![Complex64::new(0.0, 0.0); lu.max(lb)];
        let mut g_user = Vec::with_capacity(nr * nu * n_c);
        let mut g_user_los = Vec::with_capacity(nr * nu);
        let mut g_user_nlos = Vec::with_capacity(nr * nu * n_c);
        for i in 0..nr {
            for j in 0..nu {
                let base = (i * nu + j) * lu;
                let sb = self.sqrt_beta_user[j];
                let los = taps.user_los[i * nu + j];
                let nl = &mut nlos_buf[..lu];
                nl.copy_from_slice(&taps.user_ris[base..base + lu]);
                nl[0] -= los;
                let los_f = los * sb;
                g_user_los.push(los_f);
                for t in 0..n_c {
                    let tw = &self.twiddle[t * self.l_max..t * self.l_max + lu];
                    let acc: Complex64 = nl.iter().zip(tw).map(|(h, w)| h * w).sum();
                    let nlos_f = acc * sb;
                    g_user_nlos.push(nlos_f);
                    g_user.push(los_f + nlos_f);
                }
            }
        }

        let sb = self.sqrt_beta_bs;
        let mut g_bs = Vec::with_capacity(nb * nr * n_c);
        let mut g_bs_los = Vec::with_capacity(nb * nr);
        let mut g_bs_nlos = Vec::with_capacity(nb * nr * n_c);
        for i in 0..nb {
            for j in 0..nr {
                let base = (i * nr + j) * lb;
                let los = taps.bs_los[i * nr + j];
                let nl = &mut nlos_buf[..lb];
                nl.copy_from_slice(&taps.ris_bs[base..base + lb]);
                nl[0] -= los;
                let los_f = los * sb;
                g_bs_los.push(los_f);
                for t in 0..n_c {
                    let tw = &self.twiddle[t * self.l_max..t * self.l_max + lb];
                    let acc: Complex64 = nl.iter().zip(tw).map(|(h, w)| h * w).sum();
                    let nlos_f = acc * sb;
                    g_bs_nlos.push(nlos_f);
                    g_bs.push(los_f + nlos_f);
                }
            }
        }

        FreqChannel {
            n_bs: nb,
            n_ris: nr,
            n_users: nu,
            n_subcarriers: n_c,
            g_user,
            g_bs,
            g_user_los,
            g_bs_los,
            g_user_nlos,
            g_bs_nlos,
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> FreqChannel {
        let taps = self.draw_taps(rng);
        self.freq_entries(&taps)
    }
}

/// Draws one set of taps for `cfg`.
pub fn draw_taps<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<TapSet> {
    Ok(ChannelSampler::new(cfg)?.draw_taps(rng))
}

/// Frequency-domain entries of `taps` under `cfg`.
pub fn freq_entries(taps: &TapSet, cfg: &SystemConfig) -> Result<FreqChannel> {
    Ok(ChannelSampler::new(cfg)?.freq_entries(taps))
}
