//! Direct integration of the two driven second-order equations, demodulated
//! into slow amplitudes. Only meant for toy-scale parameter sets where the
//! fast oscillations can be resolved in reasonable time.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use super::{PumpSchedule, Trajectory};
use crate::error::{Error, Result};
use crate::model::{stationary_state, FullModelParams};

/// Maximum number of periods of the upper mode per run.
pub const FULL_MODEL_CYCLE_BUDGET: f64 = 1e6;
/// Maximum ratio of the two eigenfrequencies.
pub const FULL_MODEL_MAX_RATIO: f64 = 50.0;
/// Minimum number of steps per period of the upper mode.
pub const FULL_MODEL_STEPS_PER_PERIOD: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullModelRun {
    pub params: FullModelParams,
    /// Pump frequency (rad/s) and phase (rad).
    pub omega_f: f64,
    pub theta_f: f64,
    /// Initial slow amplitudes, in the same frames as the slow flow.
    pub init: [Complex64; 2],
    pub t_end: f64,
    pub dt: f64,
    /// Boxcar length for demodulation, in periods of the lower mode.
    pub average_periods: usize,
}

/// Integrates the fast equations with RK4 and returns block-averaged slow
/// amplitudes `u1 = (q1 - i q1'/w1) e^{-i w1 t} / 2` and
/// `u2 = (q2 - i q2'/w2) e^{-i (wF - w1) t} / 2`, timestamped at block centers.
pub fn full_model_oracle(run: &FullModelRun) -> Result<Trajectory> {
    let fp = &run.params;
    fp.validate()?;
    if fp.omega2 / fp.omega1 > FULL_MODEL_MAX_RATIO {
        return Err(Error::ScaleTooLarge(format!(
            "omega2/omega1 = {} exceeds {FULL_MODEL_MAX_RATIO}",
            fp.omega2 / fp.omega1
        )));
    }
    let cycles = run.t_end * fp.omega2 / TAU;
    if cycles > FULL_MODEL_CYCLE_BUDGET {
        return Err(Error::ScaleTooLarge(format!(
            "{cycles:.3e} fast cycles exceed the budget of {FULL_MODEL_CYCLE_BUDGET:.0e}"
        )));
    }
    let limit = TAU / (FULL_MODEL_STEPS_PER_PERIOD * fp.omega2);
    if !(run.dt > 0.0) || run.dt > limit {
        return Err(Error::StepTooLarge { dt: run.dt, limit });
    }

    let (w1, w2) = (fp.omega1, fp.omega2);
    let frame2 = run.omega_f - w1;
    let k = Coefficients {
        w1sq: w1 * w1,
        w2sq: w2 * w2,
        damp1: 2.0 * fp.gamma1_damp,
        damp2: 2.0 * fp.gamma2_damp,
        duff1: fp.gamma1_duff / fp.m1,
        duff2: fp.gamma2_duff / fp.m2,
        cross1: fp.gamma_coupling / fp.m1,
        cross2: fp.gamma_coupling / fp.m2,
        pump1: fp.f / fp.m1,
        pump2: fp.f / fp.m2,
        omega_f: run.omega_f,
        theta_f: run.theta_f,
    };

    let [u1, u2] = run.init;
    let mut y = [2.0 * u1.re, -2.0 * w1 * u1.im, 2.0 * u2.re, -2.0 * w2 * u2.im];
    let steps_per_block = ((run.average_periods.max(1) as f64 * TAU / w1) / run.dt).round().max(1.0) as usize;
    let n_steps = (run.t_end / run.dt).round() as usize;

    let delta_f = run.omega_f - w1 - w2;
    let frame_delta_omega = stationary_state(&fp.slow_params(delta_f, run.theta_f)).map_or(0.0, |s| s.delta_omega);
    let mut traj = Trajectory {
        t: Vec::new(),
        u1: Vec::new(),
        u2: Vec::new(),
        theta: Vec::new(),
        schedule: PumpSchedule::constant(run.theta_f),
        seed: 0,
        dt: run.dt,
        frame_delta_omega,
    };

    let demod = |t: f64, y: &[f64; 4]| -> [Complex64; 2] {
        [
            Complex64::new(y[0], -y[1] / w1) * Complex64::from_polar(0.5, -w1 * t),
            Complex64::new(y[2], -y[3] / w2) * Complex64::from_polar(0.5, -frame2 * t),
        ]
    };

    let mut acc = [Complex64::new(0.0, 0.0); 2];
    let mut in_block = 0usize;
    for n in 0..n_steps {
        let t = n as f64 * run.dt;
        y = k.rk4(t, y, run.dt);
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { t: t + run.dt });
        }
        let u = demod(t + run.dt, &y);
        acc[0] += u[0];
        acc[1] += u[1];
        in_block += 1;
        if in_block == steps_per_block {
            let scale = 1.0 / steps_per_block as f64;
            let t_end_block = (n + 1) as f64 * run.dt;
            traj.t.push(t_end_block - 0.5 * (steps_per_block - 1) as f64 * run.dt);
            traj.u1.push(acc[0] * scale);
            traj.u2.push(acc[1] * scale);
            traj.theta.push(run.theta_f);
            acc = [Complex64::new(0.0, 0.0); 2];
            in_block = 0;
        }
    }
    Ok(traj)
}

struct Coefficients {
    w1sq: f64,
    w2sq: f64,
    damp1: f64,
    damp2: f64,
    duff1: f64,
    duff2: f64,
    cross1: f64,
    cross2: f64,
    pump1: f64,
    pump2: f64,
    omega_f: f64,
    theta_f: f64,
}

impl Coefficients {
    fn rhs(&self, t: f64, y: [f64; 4]) -> [f64; 4] {
        let [q1, v1, q2, v2] = y;
        let drive = (self.omega_f * t + self.theta_f).cos();
        [
            v1,
            -self.w1sq * q1 - self.damp1 * v1 - self.duff1 * q1 * q1 * q1 - self.cross1 * q1 * q2 * q2
                + self.pump1 * q2 * drive,
            v2,
            -self.w2sq * q2 - self.damp2 * v2 - self.duff2 * q2 * q2 * q2 - self.cross2 * q2 * q1 * q1
                + self.pump2 * q1 * drive,
        ]
    }

    fn rk4(&self, t: f64, y: [f64; 4], dt: f64) -> [f64; 4] {
        let add = |a: [f64; 4], b: [f64; 4], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2], a[3] + s * b[3]];
        let k1 = self.rhs(t, y);
        let k2 = self.rhs(t + 0.5 * dt, add(y, k1, 0.5 * dt));
        let k3 = self.rhs(t + 0.5 * dt, add(y, k2, 0.5 * dt));
        let k4 = self.rhs(t + dt, add(y, k3, dt));
        let mut out = y;
        for i in 0..4 {
            out[i] += dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(f: f64) -> FullModelParams {
        FullModelParams {
            m1: 1.0,
            m2: 0.5,
            omega1: 1.0,
            omega2: 4.3,
            gamma1_damp: 1e-3,
            gamma2_damp: 2e-2,
            gamma1_duff: 0.1,
            gamma2_duff: 0.1,
            gamma_coupling: 0.2,
            f,
        }
    }

    #[test]
    fn linear_ringdown() {
        let fp = toy(0.0);
        let run = FullModelRun {
            params: fp,
            omega_f: 5.3,
            theta_f: 0.0,
            init: [Complex64::new(1e-4, 0.0), Complex64::new(0.0, 0.0)],
            t_end: 400.0,
            dt: 0.02,
            average_periods: 2,
        };
        let tr = full_model_oracle(&run).unwrap();
        let phases = tr.phases();
        for (k, &t) in tr.t.iter().enumerate().skip(1) {
            let expected = 1e-4 * (-fp.gamma1_damp * t).exp();
            assert!((tr.u1[k].norm() / expected - 1.0).abs() < 1e-3, "t = {t}");
            // lab frequency w1 (1 + O(gamma^2 / w^2)): no drift in the slow frame
            assert!(phases.phi1[k].abs() < 1e-3);
        }
    }

    #[test]
    fn budget_and_step_guards() {
        let mut fp = toy(0.05);
        let base = FullModelRun {
            params: fp,
            omega_f: 5.3,
            theta_f: 0.0,
            init: [Complex64::new(1e-3, 0.0), Complex64::new(1e-3, 0.0)],
            t_end: 10.0,
            dt: 0.02,
            average_periods: 4,
        };
        let long = FullModelRun { t_end: 2e6, ..base };
        assert!(matches!(full_model_oracle(&long), Err(Error::ScaleTooLarge(_))));
        let coarse = FullModelRun { dt: 0.1, ..base };
        assert!(matches!(full_model_oracle(&coarse), Err(Error::StepTooLarge { .. })));
        fp.omega2 = 60.0;
        let wide = FullModelRun { params: fp, ..base };
        assert!(matches!(full_model_oracle(&wide), Err(Error::ScaleTooLarge(_))));
    }
}
