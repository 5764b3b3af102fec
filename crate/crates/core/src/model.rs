//! Parameter types, unit conversions, the planar-array response, tap power
//! profiles and the ADC distortion table.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Tolerance on the unit-sum constraint of a tap power profile.
pub const TAP_SUM_TOL: f64 = 1e-12;

/// Tabulated distortion factor for 1..=5 bits.
const RHO_TABLE: [f64; 5] = [0.3634, 0.1175, 0.03454, 0.009497, 0.002499];

pub fn db_to_linear(x_db: f64) -> f64 {
    10f64.powf(x_db / 10.0)
}

pub fn dbm_to_watts(x_dbm: f64) -> f64 {
    10f64.powf((x_dbm - 30.0) / 10.0)
}

/// Integer square root of `x` when `x` is a perfect square.
pub fn exact_sqrt(x: usize) -> Option<usize> {
    let r = (x as f64).sqrt().round() as usize;
    (r * r == x).then_some(r)
}

/// Response of element `index` of a `side` x `side` uniform square planar array.
pub fn array_response(side: usize, index: usize, az: f64, el: f64, spacing: f64) -> Result<Complex64> {
    if side == 0 || index >= side * side {
        return Err(Error::Precondition(format!(
            "array index {index} out of range for a {side}x{side} array"
        )));
    }
    let x = (index % side) as f64;
    let y = (index / side) as f64;
    let phase = 2.0 * PI * spacing * (x * az.sin() * el.sin() + y * el.cos());
    Ok(Complex64::from_polar(1.0, phase))
}

/// Full response vector of an `n`-element square array (`n` a perfect square).
pub fn steering_vector(n: usize, az: f64, el: f64, spacing: f64) -> Result<Vec<Complex64>> {
    let side = exact_sqrt(n)
        .ok_or_else(|| Error::Precondition(format!("{n} elements is not a perfect square")))?;
    (0..n).map(|i| array_response(side, i, az, el, spacing)).collect()
}

/// Exponentially decaying tap profile normalised to unit total power.
pub fn tap_power_profile(n_taps: usize, step_db: f64) -> Vec<f64> {
    assert!(n_taps >= 1, "a tap profile needs at least one tap");
    let raw: Vec<f64> = (0..n_taps)
        .map(|l| 10f64.powf(-(l as f64) * step_db / 10.0))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / total).collect()
}

/// ADC resolution. `Infinite` models an ideal converter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bits {
    Finite(u32),
    Infinite,
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bits::Finite(b) => write!(f, "{b}"),
            Bits::Infinite => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for Bits {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinite" | "infinity" => Ok(Bits::Infinite),
            other => other
                .parse::<u32>()
                .map(Bits::Finite)
                .map_err(|_| Error::Parse(format!("invalid ADC bits '{s}'"))),
        }
    }
}

impl Serialize for Bits {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Bits::Finite(b) => s.serialize_u32(*b),
            Bits::Infinite => s.serialize_str("infinite"),
        }
    }
}

impl<'de> Deserialize<'de> for Bits {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Float(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(b) if b >= 0 && b <= u32::MAX as i64 => Ok(Bits::Finite(b as u32)),
            Raw::Int(b) => Err(serde::de::Error::custom(format!("invalid ADC bits {b}"))),
            Raw::Float(f) if f == f64::INFINITY => Ok(Bits::Infinite),
            Raw::Float(f) => Err(serde::de::Error::custom(format!("invalid ADC bits {f}"))),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Distortion factor of a `bits`-bit quantizer: table for 1..=5 bits,
/// high-resolution approximation above, zero for an ideal converter.
pub fn rho_for_bits(bits: Bits) -> Result<f64> {
    match bits {
        Bits::Finite(0) => Err(Error::InvalidBits(0)),
        Bits::Finite(b) if b <= 5 => Ok(RHO_TABLE[(b - 1) as usize]),
        Bits::Finite(b) => Ok(PI * 3f64.sqrt() / 2.0 * 2f64.powi(-2 * b as i32)),
        Bits::Infinite => Ok(0.0),
    }
}

/// Linear gain / distortion split of the additive quantization noise model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantizationModel {
    pub bits: Bits,
    pub rho: f64,
    pub alpha: f64,
}

impl QuantizationModel {
    pub fn new(bits: Bits) -> Result<Self> {
        let rho = rho_for_bits(bits)?;
        Ok(Self { bits, rho, alpha: 1.0 - rho })
    }
}

/// Angles of arrival/departure, radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// Azimuth of arrival at the RIS, per user.
    pub user_az: Vec<f64>,
    /// Elevation of arrival at the RIS, per user.
    pub user_el: Vec<f64>,
    /// Azimuth of departure from the RIS towards the BS.
    pub ris_depart_az: f64,
    pub ris_depart_el: f64,
    /// Azimuth of arrival at the BS.
    pub bs_arrive_az: f64,
    pub bs_arrive_el: f64,
}

/// Line-of-sight array responses derived from a [`Geometry`].
#[derive(Debug, Clone)]
pub struct Steering {
    /// `user[j][r]`: RIS response towards user `j`.
    pub user: Vec<Vec<Complex64>>,
    /// RIS response in the BS direction.
    pub ris_depart: Vec<Complex64>,
    /// BS response in the RIS direction.
    pub bs: Vec<Complex64>,
}

/// Every dimensional and statistical parameter of one uplink.
///
/// Rician factors are linear, powers in watts (per subcarrier, per user).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub n_bs_antennas: usize,
    pub n_ris_elements: usize,
    pub n_users: usize,
    pub n_subcarriers: usize,
    pub cp_length: usize,
    pub taps_user_ris: usize,
    pub taps_ris_bs: usize,
    pub rician_user: Vec<f64>,
    pub rician_bs: f64,
    pub tap_power_user: Vec<Vec<f64>>,
    pub tap_power_bs: Vec<f64>,
    pub pathloss_user: Vec<f64>,
    pub pathloss_bs: f64,
    pub tx_power: Vec<f64>,
    pub noise_power: f64,
    pub adc_bits: Bits,
    pub geometry: Geometry,
    pub element_spacing_over_wavelength: f64,
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

fn check_profile(name: &str, p: &[f64], len: usize) -> Result<()> {
    check(p.len() == len, || format!("{name} has {} taps, expected {len}", p.len()))?;
    check(p.iter().all(|&x| x.is_finite() && x >= 0.0), || {
        format!("{name} has a negative or non-finite tap power")
    })?;
    let sum: f64 = p.iter().sum();
    check((sum - 1.0).abs() <= TAP_SUM_TOL, || {
        format!("{name} sums to {sum}, expected 1 within {TAP_SUM_TOL:e}")
    })
}

impl SystemConfig {
    /// Checks every structural invariant; returns the first violation found.
    pub fn validate(&self) -> Result<()> {
        check(self.n_bs_antennas > 0 && exact_sqrt(self.n_bs_antennas).is_some(), || {
            format!("N_b = {} is not a positive perfect square", self.n_bs_antennas)
        })?;
        check(self.n_ris_elements > 0 && exact_sqrt(self.n_ris_elements).is_some(), || {
            format!("N_r = {} is not a positive perfect square", self.n_ris_elements)
        })?;
        check(self.n_users > 0, || "N_u must be positive".into())?;
        check(self.n_subcarriers > 0, || "N_c must be positive".into())?;
        check(self.taps_user_ris > 0 && self.taps_ris_bs > 0, || "tap counts must be positive".into())?;
        let required = self.taps_ris_bs + self.taps_user_ris - 2;
        if self.cp_length < required {
            return Err(Error::CyclicPrefix { cp: self.cp_length, required });
        }
        check(self.cp_length <= self.n_subcarriers, || {
            format!("N_cp = {} exceeds N_c = {}", self.cp_length, self.n_subcarriers)
        })?;
        check(self.taps_user_ris + self.taps_ris_bs <= self.n_subcarriers, || {
            "N_c must exceed the combined channel length L_u + L_b".into()
        })?;
        let nu = self.n_users;
        check(self.rician_user.len() == nu, || "rician_user needs one entry per user".into())?;
        check(self.rician_user.iter().all(|k| k.is_finite() && *k >= 0.0), || {
            "user Rician factors must be finite and non-negative".into()
        })?;
        check(self.rician_bs.is_finite() && self.rician_bs >= 0.0, || {
            "BS Rician factor must be finite and non-negative".into()
        })?;
        check(self.tap_power_user.len() == nu, || "tap_power_user needs one profile per user".into())?;
        for (j, p) in self.tap_power_user.iter().enumerate() {
            check_profile(&format!("tap_power_user[{j}]"), p, self.taps_user_ris)?;
        }
        check_profile("tap_power_bs", &self.tap_power_bs, self.taps_ris_bs)?;
        check(self.pathloss_user.len() == nu, || "pathloss_user needs one entry per user".into())?;
        check(self.pathloss_user.iter().all(|b| b.is_finite() && *b > 0.0), || {
            "user path losses must be positive".into()
        })?;
        check(self.pathloss_bs.is_finite() && self.pathloss_bs > 0.0, || "BS path loss must be positive".into())?;
        check(self.tx_power.len() == nu, || "tx_power needs one entry per user".into())?;
        check(self.tx_power.iter().all(|p| p.is_finite() && *p >= 0.0), || {
            "transmit powers must be finite and non-negative".into()
        })?;
        check(self.noise_power.is_finite() && self.noise_power > 0.0, || "noise power must be positive".into())?;
        if let Bits::Finite(0) = self.adc_bits {
            return Err(Error::InvalidBits(0));
        }
        check(
            self.element_spacing_over_wavelength.is_finite() && self.element_spacing_over_wavelength > 0.0,
            || "element spacing must be positive".into(),
        )?;
        let g = &self.geometry;
        check(g.user_az.len() == nu && g.user_el.len() == nu, || {
            "geometry needs one azimuth and one elevation per user".into()
        })?;
        let all_angles = g
            .user_az
            .iter()
            .chain(&g.user_el)
            .chain([&g.ris_depart_az, &g.ris_depart_el, &g.bs_arrive_az, &g.bs_arrive_el]);
        check(all_angles.into_iter().all(|a| a.is_finite()), || "angles must be finite".into())?;
        Ok(())
    }

    pub fn quantization(&self) -> Result<QuantizationModel> {
        QuantizationModel::new(self.adc_bits)
    }

    /// `N_c / (N_cp + N_c)`, the cyclic-prefix rate loss.
    pub fn rate_prefactor(&self) -> f64 {
        self.n_subcarriers as f64 / (self.cp_length + self.n_subcarriers) as f64
    }

    /// Non-line-of-sight weight `(1 - sigma0^2) K + 1` of user `j`.
    pub fn nlos_weight_user(&self, j: usize) -> f64 {
        (1.0 - self.tap_power_user[j][0]) * self.rician_user[j] + 1.0
    }

    pub fn nlos_weight_bs(&self) -> f64 {
        (1.0 - self.tap_power_bs[0]) * self.rician_bs + 1.0
    }

    pub fn steering(&self) -> Result<Steering> {
        let g = &self.geometry;
        let d = self.element_spacing_over_wavelength;
        let user = (0..self.n_users)
            .map(|j| steering_vector(self.n_ris_elements, g.user_az[j], g.user_el[j], d))
            .collect::<Result<Vec<_>>>()?;
        Ok(Steering {
            user,
            ris_depart: steering_vector(self.n_ris_elements, g.ris_depart_az, g.ris_depart_el, d)?,
            bs: steering_vector(self.n_bs_antennas, g.bs_arrive_az, g.bs_arrive_el, d)?,
        })
    }

    /// Inner products `a_a^H a_b` between the users' RIS responses, row-major `n_u x n_u`.
    pub fn user_gram(&self) -> Result<Vec<Complex64>> {
        let st = self.steering()?;
        let nu = self.n_users;
        let mut out = vec![Complex64::new(0.0, 0.0); nu * nu];
        for a in 0..nu {
            for b in 0..nu {
                out[a * nu + b] = st.user[a].iter().zip(&st.user[b]).map(|(x, y)| x.conj() * y).sum();
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_table_and_formula() {
        assert_eq!(rho_for_bits(Bits::Finite(1)).unwrap(), 0.3634);
        assert_eq!(rho_for_bits(Bits::Finite(4)).unwrap(), 0.009497);
        assert_eq!(rho_for_bits(Bits::Infinite).unwrap(), 0.0);
        assert!(matches!(rho_for_bits(Bits::Finite(0)), Err(Error::InvalidBits(0))));
        let r6 = rho_for_bits(Bits::Finite(6)).unwrap();
        assert!((r6 - PI * 3f64.sqrt() / 2.0 / 4096.0).abs() < 1e-18);
        let q = QuantizationModel::new(Bits::Finite(3)).unwrap();
        assert_eq!(q.alpha + q.rho, 1.0);
    }

    #[test]
    fn conversions() {
        assert_eq!(db_to_linear(0.0), 1.0);
        assert!((db_to_linear(10.0) - 10.0).abs() < 1e-12);
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bits_parse() {
        assert_eq!("inf".parse::<Bits>().unwrap(), Bits::Infinite);
        assert_eq!("3".parse::<Bits>().unwrap(), Bits::Finite(3));
        assert!("x".parse::<Bits>().is_err());
    }

    #[test]
    fn exact_sqrt_detects_squares() {
        assert_eq!(exact_sqrt(64), Some(8));
        assert_eq!(exact_sqrt(8), None);
        assert_eq!(exact_sqrt(1), Some(1));
    }
}
