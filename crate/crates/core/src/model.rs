//! System parameters and closed-form quantities of the two-mode slow flow.
//!
//! Everything here is angular (rad/s); conversion from Hz happens once, in
//! [`crate::config`]. The nonlinearity constants `g11 .. g21` and the pump
//! amplitudes `f1`, `f2` are the renormalized coefficients of the
//! rotating-frame equations and are taken as given.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, TAU};

use crate::error::{Error, Result};

/// Below this, `Xi^2 - 1` is treated as exactly zero.
pub const THRESHOLD_EPS: f64 = 1e-12;

/// Parameters of the rotating-frame equations for the complex amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Mode eigenfrequencies (rad/s).
    pub omega1: f64,
    pub omega2: f64,
    /// Amplitude decay rates (rad/s).
    pub gamma1_damp: f64,
    pub gamma2_damp: f64,
    /// Renormalized nonlinearities (rad^2 s^-2 m^-2).
    pub g11: f64,
    pub g22: f64,
    pub g12: f64,
    pub g21: f64,
    /// Renormalized pump amplitudes (rad^2 s^-2 m^-1).
    pub f1: f64,
    pub f2: f64,
    /// Pump detuning from the sum frequency (rad/s).
    pub delta_f: f64,
    /// Pump phase (rad).
    pub theta_f: f64,
}

impl SystemParams {
    /// Device constants of the reference resonator, with the pump switched off.
    pub fn reference_device() -> Self {
        Self {
            omega1: TAU * 47_030.7,
            omega2: TAU * 1_867_195.4,
            gamma1_damp: TAU * 0.48,
            gamma2_damp: TAU * 36.2,
            g11: 1.91e22,
            g22: 7.38e25,
            g12: 8.41e22,
            g21: 1.26e25,
            f1: 0.0,
            f2: 0.0,
            delta_f: 0.0,
            theta_f: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.omega1,
            self.omega2,
            self.gamma1_damp,
            self.gamma2_damp,
            self.g11,
            self.g22,
            self.g12,
            self.g21,
            self.f1,
            self.f2,
            self.delta_f,
            self.theta_f,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("all fields must be finite".into()));
        }
        if self.omega1 <= 0.0 || self.gamma1_damp <= 0.0 || self.gamma2_damp <= 0.0 {
            return Err(Error::InvalidParams(
                "eigenfrequencies and damping rates must be positive".into(),
            ));
        }
        if self.omega2 <= self.omega1 {
            return Err(Error::InvalidParams("omega2 must exceed omega1".into()));
        }
        if self.gamma2_damp < self.gamma1_damp {
            return Err(Error::InvalidParams(
                "gamma2_damp must not be smaller than gamma1_damp".into(),
            ));
        }
        if self.f1 < 0.0 || self.f2 < 0.0 {
            return Err(Error::InvalidParams("pump amplitudes must be >= 0".into()));
        }
        // f1 / f2 = g12 / g21
        let lhs = self.f1 * self.g21;
        let rhs = self.f2 * self.g12;
        if (lhs - rhs).abs() > 1e-12 * lhs.abs().max(rhs.abs()) {
            return Err(Error::InvalidParams(format!(
                "pump ratio f1/f2 must equal g12/g21 (f1 = {}, f2 = {})",
                self.f1, self.f2
            )));
        }
        Ok(())
    }

    /// Ratio f2/f1, well defined even with the pump off.
    pub fn pump_ratio(&self) -> f64 {
        self.g21 / self.g12
    }

    pub fn with_detuning(mut self, delta_f: f64) -> Self {
        self.delta_f = delta_f;
        self
    }

    pub fn with_pump_phase(mut self, theta_f: f64) -> Self {
        self.theta_f = theta_f;
        self
    }

    /// Sets `f1` and derives `f2` from the nonlinearity ratio.
    pub fn with_f1(mut self, f1: f64) -> Self {
        self.f1 = f1;
        self.f2 = f1 * self.pump_ratio();
        self
    }

    /// Scales both pump amplitudes by the same factor.
    pub fn with_pump_scale(mut self, factor: f64) -> Self {
        self.f1 *= factor;
        self.f2 *= factor;
        self
    }

    /// Sets the pump so that the dimensionless strength equals `xi`.
    pub fn with_xi(self, xi: f64) -> Self {
        let f1 = xi
            * 4.0
            * (self.omega1 * self.omega2 * self.gamma1_damp * self.gamma2_damp
                / self.pump_ratio())
            .sqrt();
        self.with_f1(f1)
    }
}

/// Parameters of the full second-order equations for the two displacements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullModelParams {
    /// Effective masses (kg).
    pub m1: f64,
    pub m2: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub gamma1_damp: f64,
    pub gamma2_damp: f64,
    /// Bare Duffing coefficients (kg rad^2 s^-2 m^-2).
    pub gamma1_duff: f64,
    pub gamma2_duff: f64,
    /// Dispersive coupling (kg rad^2 s^-2 m^-2).
    pub gamma_coupling: f64,
    /// Bare pump amplitude (N/m).
    pub f: f64,
}

impl FullModelParams {
    pub fn validate(&self) -> Result<()> {
        let v = [
            self.m1,
            self.m2,
            self.omega1,
            self.omega2,
            self.gamma1_damp,
            self.gamma2_damp,
            self.gamma1_duff,
            self.gamma2_duff,
            self.gamma_coupling,
            self.f,
        ];
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("all fields must be finite".into()));
        }
        if self.m1 <= 0.0 || self.m2 <= 0.0 {
            return Err(Error::InvalidParams("masses must be positive".into()));
        }
        Ok(())
    }

    /// Dimensionless toy device small enough for the full-model oracle, pumped
    /// to `xi = 1.5`.
    pub fn toy() -> Self {
        let (m1, m2, omega1, omega2, gamma1_damp, gamma2_damp): (f64, f64, f64, f64, f64, f64) = (1.0, 0.5, 1.0, 4.3, 1e-3, 2e-2);
        let xi: f64 = 1.5;
        // xi^2 = f^2 / (16 m1 m2 w1 w2 G1 G2)
        let f = xi * (16.0 * m1 * m2 * omega1 * omega2 * gamma1_damp * gamma2_damp).sqrt();
        Self {
            m1,
            m2,
            omega1,
            omega2,
            gamma1_damp,
            gamma2_damp,
            gamma1_duff: 0.1,
            gamma2_duff: 0.1,
            gamma_coupling: 0.2,
            f,
        }
    }

    /// Rotating-frame parameters obtained by averaging the fast equations
    /// without renormalization.
    pub fn slow_params(&self, delta_f: f64, theta_f: f64) -> SystemParams {
        SystemParams {
            omega1: self.omega1,
            omega2: self.omega2,
            gamma1_damp: self.gamma1_damp,
            gamma2_damp: self.gamma2_damp,
            g11: self.gamma1_duff / self.m1,
            g22: self.gamma2_duff / self.m2,
            g12: self.gamma_coupling / self.m1,
            g21: self.gamma_coupling / self.m2,
            f1: self.f / self.m1,
            f2: self.f / self.m2,
            delta_f,
            theta_f,
        }
    }
}

/// Combinations of the system constants that recur in the analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub gamma_plus_12: f64,
    pub gamma_minus_12: f64,
    pub gamma_plus_21: f64,
    pub gamma_minus_21: f64,
    /// Dimensionless pump strength.
    pub xi: f64,
    /// Stationary amplitude ratio r2/r1.
    pub zeta0: f64,
    /// Critical detuning (rad/s); `None` below threshold.
    pub omega_c: Option<f64>,
    /// Stationary lag between pump phase and total phase (rad); `None` below threshold.
    pub theta0: Option<f64>,
}

impl DerivedConstants {
    pub fn require_omega_c(&self) -> Result<f64> {
        self.omega_c.ok_or(Error::BelowThreshold { xi: self.xi })
    }

    pub fn require_theta0(&self) -> Result<f64> {
        self.theta0.ok_or(Error::BelowThreshold { xi: self.xi })
    }

    /// `sqrt(Xi^2 - 1)`, the recurring threshold excess.
    pub fn excess(&self) -> Result<f64> {
        let e2 = self.xi * self.xi - 1.0;
        if e2 < -THRESHOLD_EPS {
            return Err(Error::BelowThreshold { xi: self.xi });
        }
        Ok(e2.max(0.0).sqrt())
    }
}

pub fn derive_constants(p: &SystemParams) -> Result<DerivedConstants> {
    p.validate()?;
    let ratio_w = p.omega1 / p.omega2;
    let shift_12 = 1.5 * p.g22 * ratio_w;
    let shift_21 = 1.5 * p.g11 / ratio_w;
    let xi = (p.f1 * p.f2 / (16.0 * p.omega1 * p.omega2 * p.gamma1_damp * p.gamma2_damp)).sqrt();
    let zeta0 = (p.gamma1_damp * p.pump_ratio() * p.omega1 / (p.gamma2_damp * p.omega2)).sqrt();
    let e2 = xi * xi - 1.0;
    let (omega_c, theta0) = if e2 < -THRESHOLD_EPS {
        (None, None)
    } else if e2 <= THRESHOLD_EPS {
        (Some(0.0), Some(FRAC_PI_2))
    } else {
        // cos(theta0) > 0 branch
        (
            Some((p.gamma1_damp + p.gamma2_damp) * e2.sqrt()),
            Some((1.0 / xi).asin()),
        )
    };
    Ok(DerivedConstants {
        gamma_plus_12: p.g12 + shift_12,
        gamma_minus_12: p.g12 - shift_12,
        gamma_plus_21: p.g21 + shift_21,
        gamma_minus_21: p.g21 - shift_21,
        xi,
        zeta0,
        omega_c,
        theta0,
    })
}

/// Self-oscillation fixed point of the slow flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryState {
    pub r1: f64,
    pub r2: f64,
    /// Stationary total phase phi1 + phi2 (rad).
    pub phi_plus: f64,
    /// Rotating-frame oscillation frequency (rad/s).
    pub delta_omega: f64,
    /// Lab-frame self-oscillation frequencies (rad/s).
    pub omega_self1: f64,
    pub omega_self2: f64,
    /// Set when `delta_f >= omega_c`: the zero state is stable as well.
    pub zero_state_stable: bool,
}

/// `r1^2 / (delta_f + omega_c)`: slope of the squared stationary amplitude.
pub(crate) fn amplitude_slope(p: &SystemParams, d: &DerivedConstants) -> f64 {
    let f_ratio = p.pump_ratio();
    p.gamma2_damp * p.omega2
        / (d.gamma_plus_21 * p.gamma2_damp + d.gamma_plus_12 * p.gamma1_damp * f_ratio)
}

/// Nonlinear pulling coefficient multiplying `r1^2` in the frequency shift.
pub(crate) fn pulling_coefficient(p: &SystemParams, d: &DerivedConstants) -> f64 {
    p.g12 * d.zeta0 * d.zeta0 / p.omega1 + 1.5 * p.g11 / p.omega1
}

pub fn stationary_state(p: &SystemParams) -> Result<StationaryState> {
    let d = derive_constants(p)?;
    if d.xi * d.xi - 1.0 <= THRESHOLD_EPS {
        return Err(Error::BelowThreshold { xi: d.xi });
    }
    let omega_c = d.require_omega_c()?;
    let theta0 = d.require_theta0()?;
    let excess = d.delta_f_excess(p.delta_f);
    if excess < 0.0 {
        return Err(Error::ZeroStateStable {
            delta_f: p.delta_f,
            neg_omega_c: -omega_c,
        });
    }
    let r1_sq = amplitude_slope(p, &d) * excess;
    let r1 = r1_sq.sqrt();
    let delta_omega = pulling_coefficient(p, &d) * r1_sq - p.gamma1_damp * d.excess()?;
    Ok(StationaryState {
        r1,
        r2: d.zeta0 * r1,
        phi_plus: p.theta_f - theta0,
        delta_omega,
        omega_self1: p.omega1 + delta_omega,
        omega_self2: p.omega2 + p.delta_f - delta_omega,
        zero_state_stable: p.delta_f >= omega_c,
    })
}

impl DerivedConstants {
    /// `delta_f + omega_c`, or `-inf` below threshold.
    pub fn delta_f_excess(&self, delta_f: f64) -> f64 {
        match self.omega_c {
            Some(wc) => delta_f + wc,
            None => f64::NEG_INFINITY,
        }
    }
}

/// Settled split of a pump-phase step between the two modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSplit {
    /// Settled response of `phi1 - phi2` to a unit pump-phase step.
    pub c: f64,
    /// Share taken up by mode 2; mode 1 takes `1 - g`.
    pub g: f64,
    /// Slope of the rotating-frame frequency with respect to the detuning.
    pub ddelta_omega_ddelta_f: f64,
}

/// Phase-split constants from the detuning slope of the frequency pulling.
///
/// The frequency shift is affine in the detuning, so the result depends only
/// on the ratio of the pump amplitudes, not on their scale or on `delta_f`.
pub fn coupling_g(p: &SystemParams) -> Result<PhaseSplit> {
    let d = derive_constants(p)?;
    if d.xi * d.xi - 1.0 <= THRESHOLD_EPS {
        return Err(Error::BelowThreshold { xi: d.xi });
    }
    let slope = pulling_coefficient(p, &d) * amplitude_slope(p, &d);
    // Quasi-static tracking of the stationary state: a slow pump-phase ramp at
    // rate w moves phi_- at rate (2 slope - 1) w.
    let c = 2.0 * slope - 1.0;
    Ok(PhaseSplit {
        c,
        g: 0.5 * (1.0 - c),
        ddelta_omega_ddelta_f: slope,
    })
}

/// Linear map from pump-current amplitude to the bare pump amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpCalibration {
    /// Bare pump amplitude per ampere (N m^-1 A^-1).
    pub kappa_f: f64,
    /// Effective mass of mode 1 (kg), mapping bare F to f1 = F / m1.
    pub mass_scale: f64,
}

/// Reference (current, bare pump) pairs: (189 uA, 2.3 mN/m) and (379 uA, 4.5 mN/m).
pub const REFERENCE_PUMP_POINTS: [(f64, f64); 2] = [(189e-6, 2.3e-3), (379e-6, 4.5e-3)];

/// Plate mass estimated from its dimensions and polysilicon density (kg).
pub const REFERENCE_MASS_SCALE: f64 = 8.15e-11;

impl PumpCalibration {
    /// Least-squares line through the origin over (current, F) pairs.
    pub fn fit_through_origin(points: &[(f64, f64)], mass_scale: f64) -> Result<Self> {
        let sxx: f64 = points.iter().map(|(i, _)| i * i).sum();
        let sxy: f64 = points.iter().map(|(i, f)| i * f).sum();
        if sxx <= 0.0 {
            return Err(Error::InvalidCalibration("no non-zero currents".into()));
        }
        let cal = Self {
            kappa_f: sxy / sxx,
            mass_scale,
        };
        cal.validate()?;
        Ok(cal)
    }

    pub fn reference() -> Self {
        Self::fit_through_origin(&REFERENCE_PUMP_POINTS, REFERENCE_MASS_SCALE)
            .expect("reference calibration is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_f > 0.0 && self.kappa_f.is_finite()) {
            return Err(Error::InvalidCalibration(format!(
                "kappa_f must be positive, got {}",
                self.kappa_f
            )));
        }
        if !(self.mass_scale > 0.0 && self.mass_scale.is_finite()) {
            return Err(Error::InvalidCalibration(format!(
                "mass_scale must be positive, got {}",
                self.mass_scale
            )));
        }
        Ok(())
    }

    pub fn bare_pump(&self, current: f64) -> f64 {
        self.kappa_f * current
    }
}

/// Fills in the pump amplitudes of `template` for a pump-current amplitude (A).
pub fn pump_map(current: f64, cal: &PumpCalibration, template: &SystemParams) -> Result<SystemParams> {
    cal.validate()?;
    if !(current >= 0.0 && current.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "pump current must be >= 0, got {current}"
        )));
    }
    let p = template.with_f1(cal.bare_pump(current) / cal.mass_scale);
    p.validate()?;
    Ok(p)
}
