use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{derive_constants, pump_map, stationary_state, PumpCalibration, SystemParams};
use crate::stability::build_jacobian;

/// Largest real part of the two eigenvalues of the slow flow linearized about
/// `u = 0` (rad/s). Positive means the zero state is unstable.
pub fn zero_state_growth_rate(p: &SystemParams) -> Result<f64> {
    p.validate()?;
    // d/dt (u1, u2*) = [[-G1, c1], [c2, -G2 + i Df]] (u1, u2*), |c1 c2| = f1 f2 / (16 w1 w2)
    let a = Complex64::new(-p.gamma1_damp, 0.0);
    let d = Complex64::new(-p.gamma2_damp, p.delta_f);
    let bc = Complex64::new(p.f1 * p.f2 / (16.0 * p.omega1 * p.omega2), 0.0);
    let mean = (a + d) * 0.5;
    let root = ((a - d) * (a - d) * 0.25 + bc).sqrt();
    Ok((mean + root).re.max((mean - root).re))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeCurve {
    /// Detuning grid (rad/s).
    pub delta_f: Vec<f64>,
    /// Squared stationary amplitudes, zero where no self-oscillation exists (m^2).
    pub r1_sq: Vec<f64>,
    pub r2_sq: Vec<f64>,
    /// Whether the zero state is linearly stable at each grid point.
    pub zero_state_stable: Vec<bool>,
    pub omega_c: f64,
}

impl AmplitudeCurve {
    /// First grid detuning with a self-oscillating state.
    pub fn onset(&self) -> Option<f64> {
        self.r1_sq.iter().position(|&r| r > 0.0).map(|k| self.delta_f[k])
    }

    /// First grid detuning above the onset where the zero state is stable again.
    pub fn restabilization(&self) -> Option<f64> {
        let start = self.r1_sq.iter().position(|&r| r > 0.0)?;
        (start..self.delta_f.len())
            .find(|&k| self.zero_state_stable[k])
            .map(|k| self.delta_f[k])
    }

    /// Grid points where both the zero state and self-oscillation are stable.
    pub fn bistable(&self) -> Vec<bool> {
        self.r1_sq.iter().zip(&self.zero_state_stable).map(|(&r, &z)| r > 0.0 && z).collect()
    }
}

/// Stationary squared amplitudes over a detuning grid (rad/s) that must lie
/// within `(-2 omega_c, 2 omega_c)`.
pub fn sweep_amplitude_vs_detuning(p: &SystemParams, grid: &[f64]) -> Result<AmplitudeCurve> {
    let omega_c = derive_constants(p)?.require_omega_c()?;
    if omega_c <= 0.0 {
        return Err(Error::BelowThreshold { xi: 1.0 });
    }
    if let Some(&bad) = grid.iter().find(|d| !(d.abs() < 2.0 * omega_c)) {
        return Err(Error::InvalidParams(format!(
            "detuning {bad} outside (-2 omega_c, 2 omega_c) = ({}, {})",
            -2.0 * omega_c,
            2.0 * omega_c
        )));
    }
    let mut curve = AmplitudeCurve {
        delta_f: grid.to_vec(),
        r1_sq: Vec::with_capacity(grid.len()),
        r2_sq: Vec::with_capacity(grid.len()),
        zero_state_stable: Vec::with_capacity(grid.len()),
        omega_c,
    };
    for &d in grid {
        let q = p.with_detuning(d);
        let (r1, r2) = match stationary_state(&q) {
            Ok(s) => (s.r1 * s.r1, s.r2 * s.r2),
            Err(Error::ZeroStateStable { .. }) => (0.0, 0.0),
            Err(e) => return Err(e),
        };
        curve.r1_sq.push(r1);
        curve.r2_sq.push(r2);
        curve.zero_state_stable.push(zero_state_growth_rate(&q)? < 0.0);
    }
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lambda3Point {
    /// Pump-current amplitude (A).
    pub current: f64,
    /// Real eigenvalue of the slow-flow linearization (rad/s).
    pub lambda3: Option<f64>,
    /// Why `lambda3` is missing, e.g. below threshold.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lambda3Curve {
    pub delta_f: f64,
    pub points: Vec<Lambda3Point>,
}

/// Real eigenvalue `lambda3` against pump current at fixed detuning. Points
/// without a self-oscillating state, or with no real eigenvalue, carry the
/// reason instead of a value.
pub fn sweep_lambda3_vs_pump(
    template: &SystemParams,
    cal: &PumpCalibration,
    currents: &[f64],
    delta_f: f64,
) -> Result<Lambda3Curve> {
    cal.validate()?;
    let mut points = Vec::with_capacity(currents.len());
    for &current in currents {
        let value = pump_map(current, cal, template)
            .map(|p| p.with_detuning(delta_f))
            .and_then(|p| build_jacobian(&p))
            .and_then(|j| j.eigensystem())
            .and_then(|es| {
                let l3 = es.lambdas[2];
                if l3.im != 0.0 {
                    Err(Error::DegenerateSpectrum {
                        a: format!("{l3}"),
                        b: "no real eigenvalue".into(),
                    })
                } else {
                    Ok(l3.re)
                }
            });
        points.push(match value {
            Ok(v) => Lambda3Point { current, lambda3: Some(v), error: None },
            Err(e @ Error::InvalidParams(_)) | Err(e @ Error::InvalidCalibration(_)) => return Err(e),
            Err(e) => Lambda3Point { current, lambda3: None, error: Some(e.to_string()) },
        });
    }
    Ok(Lambda3Curve { delta_f, points })
}
