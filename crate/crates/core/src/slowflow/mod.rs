//! Rotating-frame integration of the two complex amplitudes.
//!
//! The deterministic vector field is advanced with classical fixed-step RK4.
//! Additive complex white forcing is added after each step (Euler-Maruyama),
//! which is strong order 1/2 for additive noise and reduces exactly to the
//! RK4 path when both intensities are zero.

mod detector;
mod full_model;

pub use detector::{observe, unwrap_step, DetectionModel, LockIn, LockInReference, PhaseRecord, PhaseSample};
pub use full_model::{full_model_oracle, FullModelRun, FULL_MODEL_CYCLE_BUDGET};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SystemParams;

/// Upper bound on `dt * max(gamma2_damp, |delta_f|)`.
pub const MAX_STEP_PRODUCT: f64 = 1e-2;

/// Largest phase jump between adjacent samples accepted by the unwrapper.
pub const UNWRAP_JUMP_LIMIT: f64 = std::f64::consts::FRAC_PI_2;

/// Coefficients of the rotating-frame vector field.
#[derive(Debug, Clone, Copy)]
pub struct SlowFlowField {
    gamma1: f64,
    gamma2: f64,
    delta_f: f64,
    self1: f64,
    cross1: f64,
    self2: f64,
    cross2: f64,
    pump1: f64,
    pump2: f64,
    /// `-i e^{i theta}`, shared by both pump terms.
    pump_phasor: Complex64,
}

impl SlowFlowField {
    pub fn new(p: &SystemParams) -> Self {
        let mut field = Self {
            gamma1: p.gamma1_damp,
            gamma2: p.gamma2_damp,
            delta_f: p.delta_f,
            self1: 1.5 * p.g11 / p.omega1,
            cross1: p.g12 / p.omega1,
            self2: 1.5 * p.g22 / p.omega2,
            cross2: p.g21 / p.omega2,
            pump1: p.f1 / (4.0 * p.omega1),
            pump2: p.f2 / (4.0 * p.omega2),
            pump_phasor: Complex64::new(0.0, 0.0),
        };
        field.set_pump_phase(p.theta_f);
        field
    }

    pub fn set_pump_phase(&mut self, theta: f64) {
        self.pump_phasor = Complex64::new(0.0, -1.0) * Complex64::from_polar(1.0, theta);
    }

    pub fn set_detuning(&mut self, delta_f: f64) {
        self.delta_f = delta_f;
    }

    #[inline]
    pub fn eval(&self, u: [Complex64; 2]) -> [Complex64; 2] {
        let [u1, u2] = u;
        let n1 = u1.norm_sqr();
        let n2 = u2.norm_sqr();
        let i = Complex64::i();
        let du1 = u1 * (-self.gamma1 + i * (self.self1 * n1 + self.cross1 * n2))
            + self.pump_phasor * self.pump1 * u2.conj();
        let du2 = u2 * Complex64::new(-self.gamma2, self.self2 * n2 + self.cross2 * n1 - self.delta_f)
            + self.pump_phasor * self.pump2 * u1.conj();
        [du1, du2]
    }

    #[inline]
    pub fn rk4_step(&self, u: [Complex64; 2], dt: f64) -> [Complex64; 2] {
        let add = |a: [Complex64; 2], b: [Complex64; 2], s: f64| [a[0] + b[0] * s, a[1] + b[1] * s];
        let k1 = self.eval(u);
        let k2 = self.eval(add(u, k1, 0.5 * dt));
        let k3 = self.eval(add(u, k2, 0.5 * dt));
        let k4 = self.eval(add(u, k3, dt));
        let w = dt / 6.0;
        [
            u[0] + (k1[0] + (k2[0] + k3[0]) * 2.0 + k4[0]) * w,
            u[1] + (k1[1] + (k2[1] + k3[1]) * 2.0 + k4[1]) * w,
        ]
    }
}

/// Intensities of independent complex white forcing on the two amplitudes.
///
/// Each quadrature of the forcing on mode `i` has spectral density `d_i`, so
/// one step of length `dt` adds a Gaussian kick of variance `d_i dt` per
/// quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub d1: f64,
    pub d2: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn none() -> Self {
        Self {
            d1: 0.0,
            d2: 0.0,
            seed: 0,
        }
    }

    pub fn is_silent(&self) -> bool {
        self.d1 == 0.0 && self.d2 == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d1 >= 0.0 && self.d2 >= 0.0 && self.d1.is_finite() && self.d2.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "noise intensities must be finite and >= 0 (d1 = {}, d2 = {})",
                self.d1, self.d2
            )));
        }
        Ok(())
    }
}

/// Piecewise-constant pump phase. A change at `t_c` takes effect from the
/// first integrator step starting at or after `t_c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpSchedule {
    initial: f64,
    changes: Vec<(f64, f64)>,
}

impl PumpSchedule {
    pub fn constant(theta: f64) -> Self {
        Self {
            initial: theta,
            changes: Vec::new(),
        }
    }

    /// Appends a change; times must be non-decreasing.
    pub fn then(mut self, t: f64, theta: f64) -> Self {
        if let Some(&(last, _)) = self.changes.last() {
            assert!(t >= last, "pump schedule times must be non-decreasing");
        }
        self.changes.push((t, theta));
        self
    }

    pub fn initial(&self) -> f64 {
        self.initial
    }

    pub fn changes(&self) -> &[(f64, f64)] {
        &self.changes
    }

    pub fn at(&self, t: f64) -> f64 {
        self.changes
            .iter()
            .take_while(|(tc, _)| *tc <= t)
            .last()
            .map_or(self.initial, |&(_, th)| th)
    }
}

/// Sampled solution of the slow flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub u1: Vec<Complex64>,
    pub u2: Vec<Complex64>,
    /// Pump phase in effect at each sample.
    pub theta: Vec<f64>,
    pub schedule: PumpSchedule,
    pub seed: u64,
    pub dt: f64,
    /// Rotating-frame frequency used to define the phases.
    pub frame_delta_omega: f64,
}

/// Phases of a trajectory in the frame of the self-oscillation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPhases {
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
    /// Sample indices where an adjacent-sample jump exceeded the unwrap limit.
    pub unwrap_flags: Vec<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn r1(&self) -> Vec<f64> {
        self.u1.iter().map(|u| u.norm()).collect()
    }

    pub fn r2(&self) -> Vec<f64> {
        self.u2.iter().map(|u| u.norm()).collect()
    }

    /// Unwrapped phases with `u1 = r1 e^{i(phi1 + dw t)}`, `u2 = r2 e^{i(phi2 - dw t)}`.
    pub fn phases(&self) -> TrajectoryPhases {
        let dw = self.frame_delta_omega;
        let mut out = TrajectoryPhases {
            phi1: Vec::with_capacity(self.len()),
            phi2: Vec::with_capacity(self.len()),
            unwrap_flags: Vec::new(),
        };
        for (k, ((&t, u1), u2)) in self.t.iter().zip(&self.u1).zip(&self.u2).enumerate() {
            let raw1 = u1.arg() - dw * t;
            let raw2 = u2.arg() + dw * t;
            if k == 0 {
                out.phi1.push(raw1);
                out.phi2.push(raw2);
                continue;
            }
            let (p1, j1) = unwrap_step(out.phi1[k - 1], raw1);
            let (p2, j2) = unwrap_step(out.phi2[k - 1], raw2);
            if j1.abs() > UNWRAP_JUMP_LIMIT || j2.abs() > UNWRAP_JUMP_LIMIT {
                out.unwrap_flags.push(k);
            }
            out.phi1.push(p1);
            out.phi2.push(p2);
        }
        out
    }

    /// True phases and amplitudes as a record, without detector filtering.
    pub fn phase_record(&self) -> PhaseRecord {
        let ph = self.phases();
        PhaseRecord {
            t: self.t.clone(),
            phi1: ph.phi1,
            phi2: ph.phi2,
            amp1: self.r1(),
            amp2: self.r2(),
            unwrap_flags: ph.unwrap_flags,
        }
    }

    pub fn last_state(&self) -> Option<[Complex64; 2]> {
        Some([*self.u1.last()?, *self.u2.last()?])
    }
}

/// Streaming fixed-step integrator; the building block for trajectories and
/// closed-loop plants.
#[derive(Debug, Clone)]
pub struct SlowFlowIntegrator {
    field: SlowFlowField,
    state: [Complex64; 2],
    theta: f64,
    step: u64,
    dt: f64,
    noise_scale: [f64; 2],
    rng: ChaCha8Rng,
}

impl SlowFlowIntegrator {
    pub fn new(p: &SystemParams, init: [Complex64; 2], noise: &NoiseConfig, dt: f64) -> Result<Self> {
        p.validate()?;
        noise.validate()?;
        check_step(p, dt)?;
        if !(init[0].norm().is_finite() && init[1].norm().is_finite()) {
            return Err(Error::InvalidParams("initial amplitudes must be finite".into()));
        }
        Ok(Self {
            field: SlowFlowField::new(p),
            state: init,
            theta: p.theta_f,
            step: 0,
            dt,
            noise_scale: [(noise.d1 * dt).sqrt(), (noise.d2 * dt).sqrt()],
            rng: ChaCha8Rng::seed_from_u64(noise.seed),
        })
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn state(&self) -> [Complex64; 2] {
        self.state
    }

    pub fn pump_phase(&self) -> f64 {
        self.theta
    }

    pub fn set_pump_phase(&mut self, theta: f64) {
        self.theta = theta;
        self.field.set_pump_phase(theta);
    }

    pub fn set_detuning(&mut self, delta_f: f64) {
        self.field.set_detuning(delta_f);
    }

    /// Adds a Gaussian kick of variance `fraction * d_i * dt` per quadrature.
    fn kick(&mut self, u: &mut [Complex64; 2], fraction: f64) {
        let f = fraction.sqrt();
        for (u, s) in u.iter_mut().zip(self.noise_scale) {
            let re: f64 = StandardNormal.sample(&mut self.rng);
            let im: f64 = StandardNormal.sample(&mut self.rng);
            *u += Complex64::new(re, im) * (s * f);
        }
    }

    /// One step: half the noise, the deterministic RK4 step, then the other
    /// half. The symmetric split keeps the stationary fluctuation spectrum
    /// accurate to second order in `dt`.
    pub fn advance(&mut self) -> Result<[Complex64; 2]> {
        let noisy = self.noise_scale[0] > 0.0 || self.noise_scale[1] > 0.0;
        let mut start = self.state;
        if noisy {
            self.kick(&mut start, 0.5);
        }
        let mut next = self.field.rk4_step(start, self.dt);
        if noisy {
            self.kick(&mut next, 0.5);
        }
        self.step += 1;
        if !(next[0].re.is_finite()
            && next[0].im.is_finite()
            && next[1].re.is_finite()
            && next[1].im.is_finite())
        {
            return Err(Error::NonFinite { t: self.time() });
        }
        self.state = next;
        Ok(next)
    }
}

pub fn check_step(p: &SystemParams, dt: f64) -> Result<()> {
    let rate = p.gamma2_damp.max(p.delta_f.abs());
    let limit = MAX_STEP_PRODUCT / rate;
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge { dt, limit });
    }
    Ok(())
}

/// Largest admissible step for `p`, rounded down to `1/steps_per_ms` fractions of a millisecond.
pub fn default_step(p: &SystemParams) -> f64 {
    let limit = MAX_STEP_PRODUCT / p.gamma2_damp.max(p.delta_f.abs());
    // round down onto a grid that divides typical detector periods
    let per_ms = (1e-3 / limit).ceil();
    1e-3 / per_ms
}

/// Integrates the slow flow over `[0, t_end]`, recording every `stride`-th step.
pub fn integrate_slowflow_strided(
    p: &SystemParams,
    init: [Complex64; 2],
    schedule: &PumpSchedule,
    noise: &NoiseConfig,
    t_end: f64,
    dt: f64,
    stride: usize,
) -> Result<Trajectory> {
    let stride = stride.max(1);
    let mut integ = SlowFlowIntegrator::new(&p.with_pump_phase(schedule.initial()), init, noise, dt)?;
    let n_steps = (t_end / dt).round() as u64;
    let frame_delta_omega = crate::model::stationary_state(p).map_or(0.0, |s| s.delta_omega);
    let cap = (n_steps as usize) / stride + 1;
    let mut traj = Trajectory {
        t: Vec::with_capacity(cap),
        u1: Vec::with_capacity(cap),
        u2: Vec::with_capacity(cap),
        theta: Vec::with_capacity(cap),
        schedule: schedule.clone(),
        seed: noise.seed,
        dt,
        frame_delta_omega,
    };
    traj.t.push(0.0);
    traj.u1.push(init[0]);
    traj.u2.push(init[1]);
    traj.theta.push(schedule.initial());
    let changes = schedule.changes();
    let mut next_change = 0;
    for n in 0..n_steps {
        let t = n as f64 * dt;
        while next_change < changes.len() && changes[next_change].0 <= t + 1e-9 * dt {
            integ.set_pump_phase(changes[next_change].1);
            next_change += 1;
        }
        let u = integ.advance()?;
        if (n + 1) % stride as u64 == 0 {
            traj.t.push((n + 1) as f64 * dt);
            traj.u1.push(u[0]);
            traj.u2.push(u[1]);
            traj.theta.push(integ.pump_phase());
        }
    }
    Ok(traj)
}

/// Integrates the slow flow over `[0, t_end]`, recording every step.
pub fn integrate_slowflow(
    p: &SystemParams,
    init: [Complex64; 2],
    schedule: &PumpSchedule,
    noise: &NoiseConfig,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    integrate_slowflow_strided(p, init, schedule, noise, t_end, dt, 1)
}

/// Complex amplitudes at the self-oscillation fixed point, with phases
/// chosen so that `phi1 = 0` and `phi2 = phi_plus`.
pub fn stationary_amplitudes(p: &SystemParams) -> Result<[Complex64; 2]> {
    let s = crate::model::stationary_state(p)?;
    Ok([
        Complex64::new(s.r1, 0.0),
        Complex64::from_polar(s.r2, s.phi_plus),
    ])
}
