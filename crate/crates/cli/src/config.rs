//! Parameter file: sectioned TOML in lab units, merged key by key over the
//! built-in reference file. Unknown keys are rejected.

use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sideband_osc::controller::{CycleConfig, ExcursionPolicy};
use sideband_osc::slowflow::{default_step, DetectionModel, NoiseConfig};
use sideband_osc::stability::phase_diffusion_rates;
use sideband_osc::{pump_map, stationary_state, PumpCalibration, SystemParams};

use crate::error::{CliError, CliResult};

pub const DEFAULT_PARAMS: &str = include_str!("default_params.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamFile {
    pub device: Device,
    pub pump: Pump,
    pub noise: Noise,
    pub detector: Detector,
    pub controller: Controller,
    #[serde(default)]
    pub integrator: Integrator,
}

/// Mode constants. Frequencies and damping rates in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Device {
    pub omega1: f64,
    pub omega2: f64,
    pub gamma1_damp: f64,
    pub gamma2_damp: f64,
    pub g11: f64,
    pub g22: f64,
    pub g12: f64,
    pub g21: f64,
    pub dispersive_gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pump {
    /// Pump-current amplitude (A).
    pub current: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_f: Option<f64>,
    pub mass_scale: f64,
    /// Detuning from the sum frequency (Hz).
    pub delta_f: f64,
    pub theta_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Noise {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_minus_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Detector {
    pub tau_lockin: f64,
    pub sample_period: f64,
    pub sigma_det1: f64,
    pub sigma_det2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Controller {
    pub target_mode: u8,
    pub t_wait: f64,
    pub t_measure: f64,
    pub cycles: usize,
    pub theta_limit_deg: f64,
    pub excursion: ExcursionPolicy,
    /// Phase-split constant; computed from the operating point when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Integrator {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            // a noise section is taken as a whole so the two ways of giving
            // the intensity never mix
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) if k != "noise" => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl ParamFile {
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_PARAMS, "<builtin>").expect("built-in parameter file is valid")
    }

    pub fn parse(text: &str, origin: &str) -> CliResult<Self> {
        let mut base: toml::Table = DEFAULT_PARAMS.parse().expect("built-in parameter file is valid TOML");
        let over: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(format!("{origin}: {}", e.message())))?;
        merge(&mut base, over);
        let pf: ParamFile = toml::Value::Table(base)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(format!("{origin}: {}", e.message())))?;
        pf.check()?;
        Ok(pf)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn check(&self) -> CliResult<()> {
        let n = &self.noise;
        if n.phi_minus_rate.is_some() && (n.d1.is_some() || n.d2.is_some()) {
            return Err(CliError::Config("[noise] takes either phi_minus_rate or d1/d2, not both".into()));
        }
        if ![1, 2].contains(&self.controller.target_mode) {
            return Err(CliError::Config(format!(
                "[controller] target_mode must be 1 or 2, got {}",
                self.controller.target_mode
            )));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("parameters serialize");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn calibration(&self) -> PumpCalibration {
        PumpCalibration {
            kappa_f: self.pump.kappa_f.unwrap_or(PumpCalibration::reference().kappa_f),
            mass_scale: self.pump.mass_scale,
        }
    }

    /// Device constants in angular units with the pump off.
    pub fn template(&self) -> SystemParams {
        let d = &self.device;
        SystemParams {
            omega1: TAU * d.omega1,
            omega2: TAU * d.omega2,
            gamma1_damp: TAU * d.gamma1_damp,
            gamma2_damp: TAU * d.gamma2_damp,
            g11: d.g11,
            g22: d.g22,
            g12: d.g12,
            g21: d.g21,
            f1: 0.0,
            f2: 0.0,
            delta_f: 0.0,
            theta_f: 0.0,
        }
    }

    pub fn system_params(&self) -> CliResult<SystemParams> {
        Ok(pump_map(self.pump.current, &self.calibration(), &self.template())?
            .with_detuning(TAU * self.pump.delta_f)
            .with_pump_phase(self.pump.theta_f))
    }

    pub fn dt(&self, p: &SystemParams) -> f64 {
        self.integrator.dt.unwrap_or_else(|| default_step(p))
    }

    pub fn noise(&self, p: &SystemParams, seed: u64) -> CliResult<NoiseConfig> {
        if let Some(rate) = self.noise.phi_minus_rate {
            if !(rate >= 0.0) {
                return Err(CliError::Config("phi_minus_rate must be >= 0".into()));
            }
            if rate == 0.0 {
                return Ok(NoiseConfig { seed, ..NoiseConfig::none() });
            }
            let s = stationary_state(p)?;
            let (u1, u2) = (s.r1 * s.r1, s.r2 * s.r2);
            let unit = phase_diffusion_rates(p, u1, u2)?.minus;
            return Ok(NoiseConfig {
                d1: rate / unit * u1,
                d2: rate / unit * u2,
                seed,
            });
        }
        let n = NoiseConfig {
            d1: self.noise.d1.unwrap_or(0.0),
            d2: self.noise.d2.unwrap_or(0.0),
            seed,
        };
        n.validate()?;
        Ok(n)
    }

    pub fn detection(&self, seed: u64) -> DetectionModel {
        let d = &self.detector;
        DetectionModel {
            tau_lockin: d.tau_lockin,
            sample_period: d.sample_period,
            sigma_det1: d.sigma_det1,
            sigma_det2: d.sigma_det2,
            seed,
        }
    }

    pub fn cycle_config(&self, g: f64) -> CycleConfig {
        let c = &self.controller;
        CycleConfig {
            t_wait: c.t_wait,
            t_measure: c.t_measure,
            target_mode: c.target_mode,
            g,
            theta_limit: c.theta_limit_deg.to_radians(),
            excursion: c.excursion,
            feedback: true,
        }
    }
}

/// Flag overrides applied on top of the parameter file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Pump-current amplitude (A).
    #[arg(long, global = true)]
    pub current: Option<f64>,
    /// Pump detuning (Hz).
    #[arg(long = "delta-hz", global = true, allow_negative_numbers = true)]
    pub delta_hz: Option<f64>,
    /// Pump phase (rad).
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    /// Linearized phi1 - phi2 diffusion rate (rad^2/s); replaces d1/d2.
    #[arg(long = "phi-minus-rate", global = true)]
    pub phi_minus_rate: Option<f64>,
    /// Noise intensity on mode 1 (m^2/s per quadrature); replaces phi_minus_rate.
    #[arg(long, global = true)]
    pub d1: Option<f64>,
    /// Noise intensity on mode 2 (m^2/s per quadrature); replaces phi_minus_rate.
    #[arg(long, global = true)]
    pub d2: Option<f64>,
    /// Integrator step (s).
    #[arg(long, global = true)]
    pub dt: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, pf: &mut ParamFile) -> CliResult<()> {
        if let Some(v) = self.current {
            pf.pump.current = v;
        }
        if let Some(v) = self.delta_hz {
            pf.pump.delta_f = v;
        }
        if let Some(v) = self.theta {
            pf.pump.theta_f = v;
        }
        if self.phi_minus_rate.is_some() && (self.d1.is_some() || self.d2.is_some()) {
            return Err(CliError::Config("--phi-minus-rate conflicts with --d1/--d2".into()));
        }
        if let Some(v) = self.phi_minus_rate {
            pf.noise = Noise {
                phi_minus_rate: Some(v),
                d1: None,
                d2: None,
            };
        }
        if self.d1.is_some() || self.d2.is_some() {
            pf.noise.phi_minus_rate = None;
            if let Some(v) = self.d1 {
                pf.noise.d1 = Some(v);
            }
            if let Some(v) = self.d2 {
                pf.noise.d2 = Some(v);
            }
        }
        if let Some(v) = self.dt {
            pf.integrator.dt = Some(v);
        }
        pf.check()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_file_reproduces_reference_device() {
        let pf = ParamFile::builtin();
        assert_eq!(pf.template(), SystemParams::reference_device());
        assert_eq!(pf.calibration(), PumpCalibration::reference());
    }

    #[test]
    fn partial_file_merges_over_defaults() {
        let pf = ParamFile::parse("[pump]\ndelta_f = 250.0\n", "t").unwrap();
        assert_eq!(pf.pump.delta_f, 250.0);
        assert_eq!(pf.pump.current, 379e-6);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ParamFile::parse("[pump]\ndelta_hz = 250.0\n", "t").unwrap_err();
        assert!(matches!(err, CliError::Config(_)), "{err:?}");
        assert!(ParamFile::parse("[pumps]\n", "t").is_err());
    }

    #[test]
    fn noise_section_replaces_rather_than_merges() {
        let pf = ParamFile::parse("[noise]\nd1 = 1e-20\n", "t").unwrap();
        assert_eq!(pf.noise.phi_minus_rate, None);
        assert!(ParamFile::parse("[noise]\nd1 = 1e-20\nphi_minus_rate = 1.0\n", "t").is_err());
    }

    #[test]
    fn phi_minus_rate_sets_the_linearized_rate() {
        let pf = ParamFile::builtin();
        let p = pf.system_params().unwrap();
        let n = pf.noise(&p, 0).unwrap();
        let rate = phase_diffusion_rates(&p, n.d1, n.d2).unwrap().minus;
        assert!((rate / pf.noise.phi_minus_rate.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hash_tracks_content() {
        let a = ParamFile::builtin();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.pump.theta_f = 0.1;
        assert_ne!(a.hash(), b.hash());
    }
}
