//! Scenario files: TOML with dB / dBm units, dotted-key overrides, and the
//! conversion into a linear-unit [`ScenarioSpec`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::ScenarioSpec;
use crate::model::{db_to_linear, dbm_to_watts, Bits, Geometry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub n_bs_antennas: usize,
    pub n_ris_elements: usize,
    pub n_users: usize,
    pub n_subcarriers: usize,
    pub cp_length: usize,
    pub adc_bits: Bits,
    pub element_spacing_over_wavelength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub taps_user_ris: usize,
    pub tap_step_user_db: f64,
    pub taps_ris_bs: usize,
    pub tap_step_bs_db: f64,
    pub rician_user_db: f64,
    pub rician_bs_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub bs_ris_distance_m: f64,
    pub user_radius_m: f64,
    pub pathloss_ref: f64,
    pub pathloss_exponent: f64,
    /// Relative spread of user distances around the radius; 0 keeps every user on the circle.
    pub user_distance_jitter: f64,
    pub angle_seed: u64,
    /// Explicit angles in radians; all six must be given together.
    pub user_az: Option<Vec<f64>>,
    pub user_el: Option<Vec<f64>>,
    pub ris_depart_az: Option<f64>,
    pub ris_depart_el: Option<f64>,
    pub bs_arrive_az: Option<f64>,
    pub bs_arrive_el: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerSection {
    pub tx_power_dbm: f64,
    pub noise_power_dbm: f64,
    /// Fixed per-user energy for the power-scaling sweeps.
    pub energy_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub trials: usize,
    pub seed: u64,
    pub phase_seed: u64,
    pub restarts: usize,
}

/// On-disk scenario description. Missing keys take the defaults of
/// [`ScenarioSpec::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    pub system: SystemSection,
    pub channel: ChannelSection,
    pub geometry: GeometrySection,
    pub power: PowerSection,
    pub run: RunSection,
}

fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

impl From<&ScenarioSpec> for ScenarioFile {
    fn from(s: &ScenarioSpec) -> Self {
        let g = s.geometry.as_ref();
        Self {
            system: SystemSection {
                n_bs_antennas: s.n_bs_antennas,
                n_ris_elements: s.n_ris_elements,
                n_users: s.n_users,
                n_subcarriers: s.n_subcarriers,
                cp_length: s.cp_length,
                adc_bits: s.adc_bits,
                element_spacing_over_wavelength: s.element_spacing_over_wavelength,
            },
            channel: ChannelSection {
                taps_user_ris: s.taps_user_ris,
                tap_step_user_db: s.tap_step_user_db,
                taps_ris_bs: s.taps_ris_bs,
                tap_step_bs_db: s.tap_step_bs_db,
                rician_user_db: linear_to_db(s.rician_user),
                rician_bs_db: linear_to_db(s.rician_bs),
            },
            geometry: GeometrySection {
                bs_ris_distance_m: s.bs_ris_distance,
                user_radius_m: s.user_radius,
                pathloss_ref: s.pathloss_ref,
                pathloss_exponent: s.pathloss_exponent,
                user_distance_jitter: s.user_distance_jitter,
                angle_seed: s.angle_seed,
                user_az: g.map(|g| g.user_az.clone()),
                user_el: g.map(|g| g.user_el.clone()),
                ris_depart_az: g.map(|g| g.ris_depart_az),
                ris_depart_el: g.map(|g| g.ris_depart_el),
                bs_arrive_az: g.map(|g| g.bs_arrive_az),
                bs_arrive_el: g.map(|g| g.bs_arrive_el),
            },
            power: PowerSection {
                tx_power_dbm: watts_to_dbm(s.tx_power),
                noise_power_dbm: watts_to_dbm(s.noise_power),
                energy_dbm: watts_to_dbm(s.energy),
            },
            run: RunSection { trials: s.trials, seed: s.seed, phase_seed: s.phase_seed, restarts: s.restarts },
        }
    }
}

macro_rules! section_default {
    ($t:ty, $field:ident) => {
        impl Default for $t {
            fn default() -> Self {
                ScenarioFile::from(&ScenarioSpec::default()).$field
            }
        }
    };
}

section_default!(SystemSection, system);
section_default!(ChannelSection, channel);
section_default!(GeometrySection, geometry);
section_default!(PowerSection, power);
section_default!(RunSection, run);

impl Default for ScenarioFile {
    fn default() -> Self {
        ScenarioFile::from(&ScenarioSpec::default())
    }
}

impl ScenarioFile {
    pub fn to_spec(&self) -> Result<ScenarioSpec> {
        let g = &self.geometry;
        let given = [
            g.user_az.is_some(),
            g.user_el.is_some(),
            g.ris_depart_az.is_some(),
            g.ris_depart_el.is_some(),
            g.bs_arrive_az.is_some(),
            g.bs_arrive_el.is_some(),
        ];
        let geometry = if given.iter().all(|&x| x) {
            Some(Geometry {
                user_az: g.user_az.clone().unwrap_or_default(),
                user_el: g.user_el.clone().unwrap_or_default(),
                ris_depart_az: g.ris_depart_az.unwrap_or_default(),
                ris_depart_el: g.ris_depart_el.unwrap_or_default(),
                bs_arrive_az: g.bs_arrive_az.unwrap_or_default(),
                bs_arrive_el: g.bs_arrive_el.unwrap_or_default(),
            })
        } else if given.iter().any(|&x| x) {
            return Err(Error::Config("explicit geometry needs all six angle entries".into()));
        } else {
            None
        };
        let spec = ScenarioSpec {
            n_bs_antennas: self.system.n_bs_antennas,
            n_ris_elements: self.system.n_ris_elements,
            n_users: self.system.n_users,
            n_subcarriers: self.system.n_subcarriers,
            cp_length: self.system.cp_length,
            adc_bits: self.system.adc_bits,
            element_spacing_over_wavelength: self.system.element_spacing_over_wavelength,
            taps_user_ris: self.channel.taps_user_ris,
            tap_step_user_db: self.channel.tap_step_user_db,
            taps_ris_bs: self.channel.taps_ris_bs,
            tap_step_bs_db: self.channel.tap_step_bs_db,
            rician_user: db_to_linear(self.channel.rician_user_db),
            rician_bs: db_to_linear(self.channel.rician_bs_db),
            bs_ris_distance: g.bs_ris_distance_m,
            user_radius: g.user_radius_m,
            pathloss_ref: g.pathloss_ref,
            pathloss_exponent: g.pathloss_exponent,
            user_distance_jitter: g.user_distance_jitter,
            angle_seed: g.angle_seed,
            geometry,
            tx_power: dbm_to_watts(self.power.tx_power_dbm),
            noise_power: dbm_to_watts(self.power.noise_power_dbm),
            energy: dbm_to_watts(self.power.energy_dbm),
            trials: self.run.trials,
            seed: self.run.seed,
            phase_seed: self.run.phase_seed,
            restarts: self.run.restarts,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Parses an override value as a TOML literal, falling back to a bare string.
fn parse_literal(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Applies `section.key=value` to a parsed document.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Parse(format!("override '{assignment}' is not of the form key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').map(str::trim).collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Parse(format!("override '{assignment}' has an empty key")));
    }
    let mut table = doc;
    for k in &keys[..keys.len() - 1] {
        let entry = table.entry(k.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Parse(format!("override '{assignment}': '{k}' is not a section")))?;
    }
    table.insert(keys[keys.len() - 1].to_string(), parse_literal(raw.trim()));
    Ok(())
}

fn merge(into: &mut toml::Table, from: toml::Table) {
    for (k, v) in from {
        match (into.get_mut(&k), v) {
            (Some(toml::Value::Table(a)), toml::Value::Table(b)) => merge(a, b),
            (_, v) => {
                into.insert(k, v);
            }
        }
    }
}

fn parse_table(text: &str) -> Result<toml::Table> {
    toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

fn finish(mut doc: toml::Table, overrides: &[String]) -> Result<ScenarioSpec> {
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let file: ScenarioFile =
        ScenarioFile::deserialize(toml::Value::Table(doc)).map_err(|e| Error::Parse(e.to_string()))?;
    file.to_spec()
}

/// Parses scenario text, applies overrides in order and converts to linear units.
pub fn parse_scenario(text: &str, overrides: &[String]) -> Result<ScenarioSpec> {
    finish(parse_table(text)?, overrides)
}

/// Like [`parse_scenario`], but keys missing from `text` come from `base`
/// instead of the defaults.
pub fn parse_scenario_over(base: &ScenarioSpec, text: &str, overrides: &[String]) -> Result<ScenarioSpec> {
    let mut doc = parse_table(&to_toml(base)?)?;
    merge(&mut doc, parse_table(text)?);
    finish(doc, overrides)
}

/// Loads a scenario file; `None` starts from the defaults.
pub fn load_scenario(path: Option<&Path>, overrides: &[String]) -> Result<ScenarioSpec> {
    load_scenario_over(&ScenarioSpec::default(), path, overrides)
}

/// Loads a scenario file on top of `base`.
pub fn load_scenario_over(base: &ScenarioSpec, path: Option<&Path>, overrides: &[String]) -> Result<ScenarioSpec> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p)?,
        None => String::new(),
    };
    parse_scenario_over(base, &text, overrides)
}

/// Renders a spec back into scenario-file TOML.
pub fn to_toml(spec: &ScenarioSpec) -> Result<String> {
    toml::to_string_pretty(&ScenarioFile::from(spec)).map_err(|e| Error::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let spec = parse_scenario("", &[]).unwrap();
        let d = ScenarioSpec::default();
        assert_eq!(spec.n_bs_antennas, d.n_bs_antennas);
        assert!((spec.rician_bs - d.rician_bs).abs() < 1e-12);
        assert!((spec.tx_power - 1.0).abs() < 1e-12);
    }

    #[test]
    fn overrides_are_typed() {
        let spec = parse_scenario(
            "",
            &["system.n_bs_antennas=100".into(), "system.adc_bits=\"infinite\"".into(), "channel.rician_bs_db=0".into()],
        )
        .unwrap();
        assert_eq!(spec.n_bs_antennas, 100);
        assert_eq!(spec.adc_bits, Bits::Infinite);
        assert!((spec.rician_bs - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_key_is_rejected() {
        assert!(parse_scenario("[system]\nbogus = 1\n", &[]).is_err());
        assert!(parse_scenario("", &["nonsense".into()]).is_err());
    }

    #[test]
    fn ideal_adc_spellings() {
        for v in ["inf", "\"inf\"", "\"infinite\""] {
            let spec = parse_scenario("", &[format!("system.adc_bits={v}")]).unwrap();
            assert_eq!(spec.adc_bits, Bits::Infinite);
        }
        assert!(parse_scenario("", &["system.adc_bits=2.5".into()]).is_err());
    }

    #[test]
    fn file_keys_override_base() {
        let base = ScenarioSpec::full_scale();
        let spec = parse_scenario_over(&base, "[system]\nn_users = 2\n", &[]).unwrap();
        assert_eq!(spec.n_users, 2);
        assert_eq!(spec.n_ris_elements, 64);
    }

    #[test]
    fn round_trip_through_toml() {
        let d = ScenarioSpec::default();
        let text = to_toml(&d).unwrap();
        let back = parse_scenario(&text, &[]).unwrap();
        assert_eq!(back.n_ris_elements, d.n_ris_elements);
        assert!((back.noise_power / d.noise_power - 1.0).abs() < 1e-12);
    }
}
