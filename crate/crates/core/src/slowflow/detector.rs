//! Lock-in detection of the two slow amplitudes.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use super::{Trajectory, UNWRAP_JUMP_LIMIT};
use crate::error::{Error, Result};
use crate::model::{StationaryState, SystemParams};

/// First-order low-pass lock-in sampled at a fixed period, with additive
/// Gaussian noise on each output quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionModel {
    pub tau_lockin: f64,
    pub sample_period: f64,
    /// Quadrature noise per sample (m).
    pub sigma_det1: f64,
    pub sigma_det2: f64,
    pub seed: u64,
}

impl Default for DetectionModel {
    fn default() -> Self {
        Self {
            tau_lockin: 1e-3,
            sample_period: 4.4e-3,
            sigma_det1: 0.0,
            sigma_det2: 0.0,
            seed: 0,
        }
    }
}

impl DetectionModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_lockin > 0.0 && self.tau_lockin.is_finite()) {
            return Err(Error::InvalidParams("tau_lockin must be positive".into()));
        }
        if !(self.sample_period >= self.tau_lockin) {
            return Err(Error::InvalidParams(
                "sample_period must be at least tau_lockin".into(),
            ));
        }
        if !(self.sigma_det1 >= 0.0 && self.sigma_det2 >= 0.0) {
            return Err(Error::InvalidParams("detection noise must be >= 0".into()));
        }
        Ok(())
    }
}

/// Reference oscillators of the two lock-ins, expressed relative to the
/// rotating frames of the slow amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LockInReference {
    /// Reference frequency minus the slow-frame frequency (rad/s), per mode.
    pub offset: [f64; 2],
    /// Reference phase subtracted from each measured phase (rad).
    pub phase: [f64; 2],
}

impl LockInReference {
    /// References at lab-frame frequencies `omega_ref` (rad/s).
    pub fn from_lab(p: &SystemParams, omega_ref: [f64; 2]) -> Self {
        Self {
            offset: [omega_ref[0] - p.omega1, omega_ref[1] - (p.omega2 + p.delta_f)],
            phase: [0.0, 0.0],
        }
    }

    /// References locked to the self-oscillation frequencies.
    pub fn from_stationary(p: &SystemParams, s: &StationaryState) -> Self {
        Self::from_lab(p, [s.omega_self1, s.omega_self2])
    }

    /// Zeroes the measured phases of the amplitudes `u0` at `t = 0`.
    pub fn zeroed_at(mut self, u0: [Complex64; 2]) -> Self {
        self.phase = [u0[0].arg(), u0[1].arg()];
        self
    }
}

/// One detector output sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSample {
    pub t: f64,
    pub phi: [f64; 2],
    pub amp: [f64; 2],
    pub unwrap_fault: bool,
}

/// Measured phases and amplitudes at the detector cadence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub t: Vec<f64>,
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
    pub amp1: Vec<f64>,
    pub amp2: Vec<f64>,
    pub unwrap_flags: Vec<usize>,
}

impl PhaseRecord {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn push(&mut self, s: PhaseSample) {
        if s.unwrap_fault {
            self.unwrap_flags.push(self.t.len());
        }
        self.t.push(s.t);
        self.phi1.push(s.phi[0]);
        self.phi2.push(s.phi[1]);
        self.amp1.push(s.amp[0]);
        self.amp2.push(s.amp[1]);
    }
}

/// Nearest-branch continuation of `raw` from `prev`; returns the unwrapped
/// value and the jump relative to `prev`.
pub fn unwrap_step(prev: f64, raw: f64) -> (f64, f64) {
    let jump = (raw - prev + PI).rem_euclid(TAU) - PI;
    (prev + jump, jump)
}

/// Streaming lock-in fed at the integrator cadence.
#[derive(Debug, Clone)]
pub struct LockIn {
    model: DetectionModel,
    reference: LockInReference,
    filtered: Option<[Complex64; 2]>,
    next_tick: u64,
    last_phase: [f64; 2],
    noise: [Normal<f64>; 2],
    rng: ChaCha8Rng,
}

impl LockIn {
    pub fn new(model: DetectionModel, reference: LockInReference) -> Result<Self> {
        model.validate()?;
        Ok(Self {
            noise: [
                Normal::new(0.0, model.sigma_det1).expect("validated"),
                Normal::new(0.0, model.sigma_det2).expect("validated"),
            ],
            rng: ChaCha8Rng::seed_from_u64(model.seed),
            model,
            reference,
            filtered: None,
            next_tick: 0,
            last_phase: [0.0, 0.0],
        })
    }

    pub fn model(&self) -> &DetectionModel {
        &self.model
    }

    /// Time of the next output sample.
    pub fn next_sample_time(&self) -> f64 {
        self.next_tick as f64 * self.model.sample_period
    }

    /// Feeds the amplitudes at time `t`, `h` seconds after the previous input.
    /// Returns a sample when `t` reaches the next detector tick.
    pub fn push(&mut self, t: f64, h: f64, u: [Complex64; 2]) -> Option<PhaseSample> {
        let z = [
            u[0] * Complex64::from_polar(1.0, -self.reference.offset[0] * t),
            u[1] * Complex64::from_polar(1.0, -self.reference.offset[1] * t),
        ];
        let y = match self.filtered {
            // already settled at the first input
            None => z,
            Some(mut y) => {
                let a = -(-h / self.model.tau_lockin).exp_m1();
                y[0] += (z[0] - y[0]) * a;
                y[1] += (z[1] - y[1]) * a;
                y
            }
        };
        self.filtered = Some(y);
        if t + 1e-9 * h.max(1e-12) < self.next_sample_time() {
            return None;
        }
        self.next_tick += 1;
        let mut phi = [0.0; 2];
        let mut amp = [0.0; 2];
        let mut fault = false;
        for k in 0..2 {
            let noisy = if self.noise[k].std_dev() > 0.0 {
                y[k] + Complex64::new(
                    self.noise[k].sample(&mut self.rng),
                    self.noise[k].sample(&mut self.rng),
                )
            } else {
                y[k]
            };
            let raw = noisy.arg() - self.reference.phase[k];
            let (unwrapped, jump) = unwrap_step(self.last_phase[k], raw);
            fault |= jump.abs() > UNWRAP_JUMP_LIMIT;
            self.last_phase[k] = unwrapped;
            phi[k] = unwrapped;
            amp[k] = noisy.norm();
        }
        Some(PhaseSample {
            t,
            phi,
            amp,
            unwrap_fault: fault,
        })
    }
}

/// Runs a recorded trajectory through the lock-in model.
pub fn observe(traj: &Trajectory, det: &DetectionModel, reference: &LockInReference) -> Result<PhaseRecord> {
    det.validate()?;
    if traj.len() < 2 {
        return Err(Error::InsufficientResolution("trajectory has fewer than two samples".into()));
    }
    let spacing = traj.t[1] - traj.t[0];
    if spacing > det.tau_lockin / 10.0 * (1.0 + 1e-9) {
        return Err(Error::InsufficientResolution(format!(
            "trajectory spacing {spacing} s exceeds tau_lockin / 10 = {} s",
            det.tau_lockin / 10.0
        )));
    }
    let mut lockin = LockIn::new(*det, *reference)?;
    let mut rec = PhaseRecord::default();
    let mut prev_t = traj.t[0];
    for k in 0..traj.len() {
        let t = traj.t[k];
        if let Some(s) = lockin.push(t, t - prev_t, [traj.u1[k], traj.u2[k]]) {
            rec.push(s);
        }
        prev_t = t;
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slowflow::PumpSchedule;

    fn rotating_trajectory(r: [f64; 2], dw: f64, phase_rate: f64, t_end: f64, dt: f64) -> Trajectory {
        let n = (t_end / dt).round() as usize;
        let t: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
        Trajectory {
            u1: t
                .iter()
                .map(|&t| Complex64::from_polar(r[0], dw * t + phase_rate * t))
                .collect(),
            u2: t
                .iter()
                .map(|&t| Complex64::from_polar(r[1], -dw * t - phase_rate * t))
                .collect(),
            theta: vec![0.0; t.len()],
            t,
            schedule: PumpSchedule::constant(0.0),
            seed: 0,
            dt,
            frame_delta_omega: dw,
        }
    }

    fn reference(dw: f64) -> LockInReference {
        LockInReference {
            offset: [dw, -dw],
            phase: [0.0, 0.0],
        }
    }

    #[test]
    fn unwrap_picks_nearest_branch() {
        let (v, j) = unwrap_step(3.0, -3.0);
        assert!((v - (TAU - 3.0)).abs() < 1e-12);
        assert!((j - (TAU - 6.0)).abs() < 1e-12);
        let (v, _) = unwrap_step(10.0 * TAU + 0.1, 0.2);
        assert!((v - (10.0 * TAU + 0.2)).abs() < 1e-9);
    }

    #[test]
    fn noiseless_observer_tracks_phase_with_filter_lag() {
        let rate = 2.0; // rad/s drift in the reference frame
        let tr = rotating_trajectory([1e-8, 2e-9], 5.0, rate, 1.0, 1e-5);
        let det = DetectionModel::default();
        let rec = observe(&tr, &det, &reference(5.0)).unwrap();
        assert!(rec.len() > 200);
        // first-order lag of a linear ramp: rate * tau, up to the input spacing
        let tol = rate * 1e-5;
        for k in 10..rec.len() {
            let t = rec.t[k];
            assert!((rec.phi1[k] - (rate * t - rate * det.tau_lockin)).abs() < tol);
            assert!((rec.phi2[k] + (rate * t - rate * det.tau_lockin)).abs() < tol);
        }
        assert!(rec.unwrap_flags.is_empty());
    }

    #[test]
    fn cadence_follows_sample_period() {
        let tr = rotating_trajectory([1.0, 1.0], 0.0, 0.0, 0.1, 1e-4);
        let rec = observe(&tr, &DetectionModel::default(), &reference(0.0)).unwrap();
        for w in rec.t.windows(2) {
            assert!((w[1] - w[0] - 4.4e-3).abs() <= 1e-4 + 1e-12);
        }
    }

    #[test]
    fn coarse_trajectory_rejected() {
        let tr = rotating_trajectory([1.0, 1.0], 0.0, 0.0, 0.1, 2e-4);
        assert!(matches!(
            observe(&tr, &DetectionModel::default(), &reference(0.0)),
            Err(Error::InsufficientResolution(_))
        ));
    }

    #[test]
    fn readout_variance_matches_small_angle_estimate() {
        // Var(phase error) ~ sigma^2 / r^2 for r >> sigma
        let r = [1.0, 2.0];
        let sigma = 0.02;
        let tr = rotating_trajectory(r, 0.0, 0.0, 60.0, 1e-4);
        let det = DetectionModel {
            sigma_det1: sigma,
            sigma_det2: sigma,
            seed: 3,
            ..DetectionModel::default()
        };
        let rec = observe(&tr, &det, &reference(0.0)).unwrap();
        assert!(rec.len() >= 10_000);
        let var = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
        let v1 = var(&rec.phi1);
        let v2 = var(&rec.phi2);
        assert!((v1 / (sigma * sigma) - 1.0).abs() < 0.1, "v1 = {v1}");
        assert!((v2 / (sigma * sigma / 4.0) - 1.0).abs() < 0.1, "v2 = {v2}");
        // doubling the amplitude halves the standard deviation
        assert!(((v1 / v2).sqrt() - 2.0).abs() < 0.1);
    }
}
