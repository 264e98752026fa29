//! Bundled DE, AE and AO component models and the two optical scaling
//! profiles, plus calibration of a library against a reference breakdown.
//!
//! Absolute figures are order-of-magnitude values from published device
//! surveys. They are a starting point for calibration, not ground truth.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::spec::{ActionKind, ComponentClass, ComponentSpec, Domain, Library};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileName {
    Aggressive,
    Conservative,
}

impl fmt::Display for ProfileName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProfileName::Aggressive => "aggressive",
            ProfileName::Conservative => "conservative",
        })
    }
}

impl FromStr for ProfileName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "aggressive" => Ok(ProfileName::Aggressive),
            "conservative" => Ok(ProfileName::Conservative),
            _ => Err(format!("unknown profile `{s}` (expected aggressive|conservative)")),
        }
    }
}

/// Projected energy parameters for future optical components. Aggressive
/// scaling means lower optical energy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingProfile {
    pub name: ProfileName,
    /// Energy scale factor per optical component name.
    pub multipliers: BTreeMap<String, f64>,
    pub laser_wall_plug_efficiency: f64,
    /// Optical power each wavelength must deliver at the detectors.
    pub laser_power_per_wavelength_mw: f64,
}

/// Optical components the profiles scale.
pub const OPTICAL_COMPONENTS: [&str; 5] = ["mzm_modulator", "ring_driver", "photodiode", "microring", "laser"];

/// Wavelengths the bundled laser provides.
pub const LASER_WAVELENGTHS: u32 = 8;

impl ScalingProfile {
    pub fn builtin(name: ProfileName) -> ScalingProfile {
        let (scale, wpe, per_lambda) = match name {
            ProfileName::Conservative => (1.0, 0.2, 15.0),
            ProfileName::Aggressive => (0.04, 0.3, 0.1),
        };
        ScalingProfile {
            name,
            multipliers: OPTICAL_COMPONENTS.iter().map(|n| (n.to_string(), scale)).collect(),
            laser_wall_plug_efficiency: wpe,
            laser_power_per_wavelength_mw: per_lambda,
        }
    }

    pub fn multiplier(&self, component: &str) -> f64 {
        self.multipliers.get(component).copied().unwrap_or(1.0)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.multipliers.values().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err("multipliers must be positive".into());
        }
        if !(self.laser_wall_plug_efficiency > 0.0 && self.laser_wall_plug_efficiency <= 1.0) {
            return Err("laser wall-plug efficiency must be in (0, 1]".into());
        }
        Ok(())
    }

    pub fn laser(&self) -> LaserModel {
        LaserModel {
            optical_power_per_wavelength_mw: self.laser_power_per_wavelength_mw,
            wavelengths: LASER_WAVELENGTHS,
            wall_plug_efficiency: self.laser_wall_plug_efficiency,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaserModel {
    pub optical_power_per_wavelength_mw: f64,
    pub wavelengths: u32,
    pub wall_plug_efficiency: f64,
}

impl LaserModel {
    /// Electrical power drawn from the wall, in mW.
    pub fn electrical_power_mw(&self) -> f64 {
        self.optical_power_per_wavelength_mw * self.wavelengths as f64 / self.wall_plug_efficiency
    }

    /// Energy in pJ for a run lasting `latency_s` seconds.
    pub fn energy_pj(&self, latency_s: f64) -> f64 {
        self.electrical_power_mw() * latency_s * 1e9
    }
}

struct Entry {
    name: &'static str,
    class: ComponentClass,
    domains: (Domain, Domain),
    energy: &'static [(ActionKind, f64)],
    static_mw: f64,
    area: f64,
    capacity: Option<u64>,
    width: u32,
    bandwidth: f64,
    provenance: &'static str,
}

use ActionKind::*;
use ComponentClass as CC;
use Domain::*;

const ENTRIES: &[Entry] = &[
    Entry {
        name: "dram",
        class: CC::Storage,
        domains: (DE, DE),
        energy: &[(Read, 480.0), (Write, 480.0), (Update, 480.0)],
        static_mw: 0.0,
        area: 0.0,
        capacity: Some(1 << 36),
        width: 64,
        bandwidth: 2.0,
        provenance: "off-chip LPDDR-class interface, ~7.5 pJ/bit",
    },
    Entry {
        name: "global_buffer_sram",
        class: CC::Storage,
        domains: (DE, DE),
        energy: &[(Read, 8.0), (Write, 9.0), (Update, 9.0)],
        static_mw: 0.0,
        area: 2.0e6,
        capacity: Some(8 << 20),
        width: 64,
        bandwidth: 32.0,
        provenance: "1 MiB banked SRAM, ~0.13 pJ/bit",
    },
    Entry {
        name: "register",
        class: CC::Storage,
        domains: (DE, DE),
        energy: &[(Read, 0.02), (Write, 0.03), (Update, 0.03)],
        static_mw: 0.0,
        area: 20.0,
        capacity: Some(64),
        width: 8,
        bandwidth: 1.0,
        provenance: "flip-flop register file",
    },
    Entry {
        name: "ae_buffer",
        class: CC::Storage,
        domains: (AE, AE),
        energy: &[(Read, 0.02), (Write, 0.05), (Update, 0.05)],
        static_mw: 0.0,
        area: 400.0,
        capacity: Some(4096),
        width: 8,
        bandwidth: 16.0,
        provenance: "capacitive sample-and-hold array",
    },
    Entry {
        name: "dac",
        class: CC::Converter,
        domains: (DE, AE),
        energy: &[(Convert, 0.3)],
        static_mw: 0.0,
        area: 500.0,
        capacity: None,
        width: 8,
        bandwidth: 1.0,
        provenance: "8-bit current-steering DAC at GS/s rates",
    },
    Entry {
        name: "adc",
        class: CC::Converter,
        domains: (AE, DE),
        energy: &[(Convert, 2.0)],
        static_mw: 0.0,
        area: 2000.0,
        capacity: None,
        width: 8,
        bandwidth: 1.0,
        provenance: "8-bit SAR ADC at GS/s rates",
    },
    Entry {
        name: "mzm_modulator",
        class: CC::Converter,
        domains: (AE, AO),
        energy: &[(Convert, 4.0)],
        static_mw: 0.0,
        area: 5000.0,
        capacity: None,
        width: 8,
        bandwidth: 1.0,
        provenance: "Mach-Zehnder modulator with driver",
    },
    Entry {
        name: "ring_driver",
        class: CC::Converter,
        domains: (AE, AO),
        energy: &[(Convert, 1.0)],
        static_mw: 0.0,
        area: 100.0,
        capacity: None,
        width: 8,
        bandwidth: 1.0,
        provenance: "electro-optic microring weight driver",
    },
    Entry {
        name: "photodiode",
        class: CC::Converter,
        domains: (AO, AE),
        energy: &[(Convert, 2.0)],
        static_mw: 0.0,
        area: 200.0,
        capacity: None,
        width: 8,
        bandwidth: 1.0,
        provenance: "Ge photodiode with transimpedance amplifier",
    },
    Entry {
        name: "microring",
        class: CC::Compute,
        domains: (AO, AO),
        energy: &[(Compute, 0.0)],
        static_mw: 0.5,
        area: 100.0,
        capacity: None,
        width: 8,
        bandwidth: 1.0,
        provenance: "passive weighting ring; thermal tuning as static power",
    },
    Entry {
        name: "star_coupler",
        class: CC::Network,
        domains: (AO, AO),
        energy: &[],
        static_mw: 0.0,
        area: 10000.0,
        capacity: None,
        width: 8,
        bandwidth: 1.0,
        provenance: "passive optical fan-in/fan-out",
    },
    Entry {
        name: "digital_mac",
        class: CC::Compute,
        domains: (DE, DE),
        energy: &[(Compute, 0.25)],
        static_mw: 0.0,
        area: 300.0,
        capacity: None,
        width: 8,
        bandwidth: 1.0,
        provenance: "8-bit integer MAC",
    },
    Entry {
        name: "analog_mac",
        class: CC::Compute,
        domains: (AE, AE),
        energy: &[(Compute, 0.05)],
        static_mw: 0.0,
        area: 50.0,
        capacity: None,
        width: 8,
        bandwidth: 1.0,
        provenance: "charge-domain analog multiply-accumulate",
    },
];

/// The bundled component library under `profile`.
pub fn builtin_components(profile: &ScalingProfile) -> Library {
    let mut lib: Library = ENTRIES
        .iter()
        .map(|e| {
            let m = profile.multiplier(e.name);
            ComponentSpec {
                name: e.name.to_string(),
                class: e.class,
                domain_in: e.domains.0,
                domain_out: e.domains.1,
                energy_per_action: e.energy.iter().map(|(a, v)| (*a, v * m)).collect(),
                static_power_mw: e.static_mw * m,
                area_um2: e.area,
                capacity_bits: e.capacity,
                width_bits: e.width,
                bandwidth: e.bandwidth,
                provenance: e.provenance.to_string(),
            }
        })
        .collect();
    lib.insert(ComponentSpec {
        name: "laser".into(),
        class: CC::Source,
        domain_in: AO,
        domain_out: AO,
        energy_per_action: BTreeMap::new(),
        static_power_mw: profile.laser().electrical_power_mw(),
        area_um2: 0.0,
        capacity_bits: None,
        width_bits: 8,
        bandwidth: 1.0,
        provenance: "off-chip comb laser; power = per-wavelength optical power x wavelengths / wall-plug efficiency".into(),
    });
    lib
}

pub fn builtin_library(name: ProfileName) -> Library {
    builtin_components(&ScalingProfile::builtin(name))
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum CalibrationError {
    #[error("component `{0}` has zero modeled energy; its fraction cannot be matched by scaling")]
    ZeroCount(String),
    #[error("reference names unknown component `{0}`")]
    UnknownComponent(String),
    #[error("reference fractions sum to {0}, expected 1")]
    BadFractions(f64),
}

/// A reported energy breakdown: per-component fractions, optionally with an
/// absolute total.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceBreakdown {
    pub workload: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_energy_pj: Option<f64>,
    pub fractions: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl ReferenceBreakdown {
    /// Reference energies in pJ given a total to distribute.
    pub fn energies(&self, total_pj: f64) -> BTreeMap<String, f64> {
        let total = self.total_energy_pj.unwrap_or(total_pj);
        self.fractions.iter().map(|(k, f)| (k.clone(), f * total)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    pub library: Library,
    pub factors: BTreeMap<String, f64>,
}

/// Scale per-component energies so that `modeled` (the per-component
/// energies of the base library under fixed mappings) reproduces the
/// reference fractions. Because energy is linear in each component's
/// parameters and the mappings are held fixed, the scaled library
/// reproduces the reference exactly.
pub fn calibrate(
    reference: &ReferenceBreakdown,
    base: &Library,
    modeled: &BTreeMap<String, f64>,
) -> Result<Calibration, CalibrationError> {
    let sum: f64 = reference.fractions.values().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(CalibrationError::BadFractions(sum));
    }
    let modeled_total: f64 = reference.fractions.keys().map(|k| modeled.get(k).copied().unwrap_or(0.0)).sum();
    let target_total = reference.total_energy_pj.unwrap_or(modeled_total);
    let mut library = base.clone();
    let mut factors = BTreeMap::new();
    for (name, frac) in &reference.fractions {
        if !base.contains(name) {
            return Err(CalibrationError::UnknownComponent(name.clone()));
        }
        let e = modeled.get(name).copied().unwrap_or(0.0);
        if e <= 0.0 {
            return Err(CalibrationError::ZeroCount(name.clone()));
        }
        let factor = frac * target_total / e;
        let scaled = base.get(name).expect("checked").scaled(factor);
        library.insert(scaled);
        factors.insert(name.clone(), factor);
    }
    Ok(Calibration { library, factors })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_valid() {
        for p in [ProfileName::Aggressive, ProfileName::Conservative] {
            let lib = builtin_library(p);
            for c in lib.iter() {
                c.validate().unwrap_or_else(|e| panic!("{p}: {e}"));
            }
            for name in [
                "dram", "global_buffer_sram", "register", "dac", "adc", "mzm_modulator", "photodiode", "microring",
                "star_coupler", "laser", "digital_mac", "analog_mac",
            ] {
                assert!(lib.contains(name), "{name} missing");
            }
        }
    }

    #[test]
    fn dram_dominates_sram() {
        let lib = builtin_library(ProfileName::Conservative);
        let dram = lib.get("dram").unwrap().energy(Read) / lib.get("dram").unwrap().width_bits as f64;
        let sram = lib.get("global_buffer_sram").unwrap().energy(Read)
            / lib.get("global_buffer_sram").unwrap().width_bits as f64;
        assert!(dram > sram);
    }

    #[test]
    fn aggressive_optics_cheaper() {
        let a = builtin_library(ProfileName::Aggressive);
        let c = builtin_library(ProfileName::Conservative);
        assert!(a.get("mzm_modulator").unwrap().energy(Convert) < c.get("mzm_modulator").unwrap().energy(Convert));
        for name in OPTICAL_COMPONENTS {
            let (ca, cc) = (a.get(name).unwrap(), c.get(name).unwrap());
            for act in ActionKind::ALL {
                assert!(ca.energy(act) <= cc.energy(act));
            }
            assert!(ca.static_power_mw <= cc.static_power_mw);
        }
        // Electrical parts are untouched.
        assert_eq!(a.get("adc"), c.get("adc"));
    }

    #[test]
    fn passive_optics_have_zero_action_energy() {
        let lib = builtin_library(ProfileName::Conservative);
        for name in ["star_coupler", "microring"] {
            let c = lib.get(name).unwrap();
            assert!(ActionKind::ALL.iter().all(|a| c.energy(*a) == 0.0));
        }
    }

    #[test]
    fn laser_energy_arithmetic() {
        let laser = LaserModel { optical_power_per_wavelength_mw: 1.0, wavelengths: 10, wall_plug_efficiency: 0.2 };
        // 10 mW optical at 20% efficiency for 1 ms = 50 uJ.
        let e = laser.energy_pj(1e-3);
        assert!((e - 50e6).abs() < 1e-3, "{e}");
        assert_eq!(laser.energy_pj(2e-3), 2.0 * e);
    }

    #[test]
    fn profile_validation() {
        let mut p = ScalingProfile::builtin(ProfileName::Aggressive);
        assert!(p.validate().is_ok());
        p.laser_wall_plug_efficiency = 1.5;
        assert!(p.validate().is_err());
        p.laser_wall_plug_efficiency = 0.5;
        p.multipliers.insert("mzm_modulator".into(), 0.0);
        assert!(p.validate().is_err());
    }

    fn reference(pairs: &[(&str, f64)]) -> ReferenceBreakdown {
        ReferenceBreakdown {
            workload: "w".into(),
            total_energy_pj: None,
            fractions: pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            note: String::new(),
        }
    }

    #[test]
    fn calibrate_fixed_point_is_identity() {
        let lib = builtin_library(ProfileName::Conservative);
        let modeled: BTreeMap<String, f64> = [("adc".to_string(), 30.0), ("dac".to_string(), 70.0)].into();
        let cal = calibrate(&reference(&[("adc", 0.3), ("dac", 0.7)]), &lib, &modeled).unwrap();
        for f in cal.factors.values() {
            assert!((f - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn calibrate_raises_boosted_component() {
        let lib = builtin_library(ProfileName::Conservative);
        let modeled: BTreeMap<String, f64> = [("adc".to_string(), 30.0), ("dac".to_string(), 70.0)].into();
        // Double adc's 0.3 and renormalize: 0.6 / 1.3.
        let r = reference(&[("adc", 0.6 / 1.3), ("dac", 0.7 / 1.3)]);
        let cal = calibrate(&r, &lib, &modeled).unwrap();
        assert!(cal.factors["adc"] > 1.0);
        assert!(cal.factors["dac"] < 1.0);
    }

    #[test]
    fn calibrate_errors() {
        let lib = builtin_library(ProfileName::Conservative);
        let modeled: BTreeMap<String, f64> = [("adc".to_string(), 30.0)].into();
        assert_eq!(
            calibrate(&reference(&[("adc", 0.5), ("dac", 0.5)]), &lib, &modeled),
            Err(CalibrationError::ZeroCount("dac".into()))
        );
        assert_eq!(
            calibrate(&reference(&[("nope", 1.0)]), &lib, &modeled),
            Err(CalibrationError::UnknownComponent("nope".into()))
        );
        assert!(matches!(
            calibrate(&reference(&[("adc", 0.5)]), &lib, &modeled),
            Err(CalibrationError::BadFractions(_))
        ));
    }
}
