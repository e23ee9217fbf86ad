//! Plants the feedback loop can drive: the full nonlinear slow flow with a
//! lock-in, and its linearization for cheap ensembles.

use std::collections::HashMap;

use nalgebra::SMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{derive_constants, stationary_state, StationaryState, SystemParams};
use crate::slowflow::{
    default_step, stationary_amplitudes, unwrap_step, DetectionModel, LockIn, LockInReference, NoiseConfig,
    PhaseSample, SlowFlowIntegrator,
};
use crate::stability::{build_jacobian, eigensystem, noise_kicks, phi_minus_vector};

/// Amplitude fraction below which the oscillation counts as collapsed.
pub const COLLAPSE_FRACTION: f64 = 0.1;

/// A self-oscillating system with a settable pump phase and a phase detector.
///
/// All phases are relative to the start of the run, where the pump phase and
/// both oscillator phases are defined to be zero.
pub trait Plant {
    fn time(&self) -> f64;
    fn pump_phase(&self) -> f64;
    fn set_pump_phase(&mut self, theta: f64);
    fn attach_detector(&mut self, det: &DetectionModel) -> Result<()>;
    /// Advances to `t_end`, handing each detector sample and the true phases
    /// at that instant to `sink`.
    fn advance_to(&mut self, t_end: f64, sink: &mut dyn FnMut(&PhaseSample, [f64; 2])) -> Result<()>;
    /// Slowest relaxation time of the operating point.
    fn relaxation_time(&self) -> f64;
}

/// Nonlinear slow flow with additive noise, read out by the lock-in model.
pub struct SlowFlowPlant {
    integ: SlowFlowIntegrator,
    stationary: StationaryState,
    theta0: f64,
    phase0: [f64; 2],
    phases: [f64; 2],
    lockin: Option<LockIn>,
    t_relax: f64,
}

impl SlowFlowPlant {
    /// Starts on the fixed point; `dt = None` picks the default step.
    pub fn new(p: &SystemParams, noise: &NoiseConfig, dt: Option<f64>) -> Result<Self> {
        let stationary = stationary_state(p)?;
        let init = stationary_amplitudes(p)?;
        let dt = dt.unwrap_or_else(|| default_step(p));
        let t_relax = eigensystem(&build_jacobian(p)?)?.relaxation_time();
        Ok(Self {
            integ: SlowFlowIntegrator::new(p, init, noise, dt)?,
            stationary,
            theta0: p.theta_f,
            phase0: [init[0].arg(), init[1].arg()],
            phases: [0.0, 0.0],
            lockin: None,
            t_relax,
        })
    }

    pub fn state(&self) -> [Complex64; 2] {
        self.integ.state()
    }

    pub fn stationary(&self) -> &StationaryState {
        &self.stationary
    }

    fn update_phases(&mut self) {
        let t = self.integ.time();
        let dw = self.stationary.delta_omega;
        let u = self.integ.state();
        let raw = [u[0].arg() - dw * t - self.phase0[0], u[1].arg() + dw * t - self.phase0[1]];
        for k in 0..2 {
            self.phases[k] = unwrap_step(self.phases[k], raw[k]).0;
        }
    }
}

impl Plant for SlowFlowPlant {
    fn time(&self) -> f64 {
        self.integ.time()
    }

    fn pump_phase(&self) -> f64 {
        self.integ.pump_phase() - self.theta0
    }

    fn set_pump_phase(&mut self, theta: f64) {
        self.integ.set_pump_phase(self.theta0 + theta);
    }

    fn attach_detector(&mut self, det: &DetectionModel) -> Result<()> {
        if self.integ.dt() > det.tau_lockin / 10.0 * (1.0 + 1e-9) {
            return Err(Error::InsufficientResolution(format!(
                "integrator step {} s exceeds tau_lockin / 10",
                self.integ.dt()
            )));
        }
        let p_ref = LockInReference {
            offset: [self.stationary.delta_omega, -self.stationary.delta_omega],
            phase: [0.0, 0.0],
        }
        .zeroed_at(self.integ.state());
        self.lockin = Some(LockIn::new(*det, p_ref)?);
        Ok(())
    }

    fn advance_to(&mut self, t_end: f64, sink: &mut dyn FnMut(&PhaseSample, [f64; 2])) -> Result<()> {
        let dt = self.integ.dt();
        let floor = COLLAPSE_FRACTION * self.stationary.r1;
        while self.integ.time() + 0.5 * dt < t_end {
            let u = self.integ.advance()?;
            let t = self.integ.time();
            if let Some(lockin) = self.lockin.as_mut() {
                if let Some(s) = lockin.push(t, dt, u) {
                    self.update_phases();
                    if u[0].norm() < floor {
                        return Err(Error::AmplitudeCollapse { t });
                    }
                    sink(&s, self.phases);
                }
            }
        }
        Ok(())
    }

    fn relaxation_time(&self) -> f64 {
        self.t_relax
    }
}

/// Linearized plant. Between pump updates the deviations `x`, `phi_-` and
/// the two lock-in filter outputs obey a linear stochastic equation, which is
/// propagated exactly from one detector tick to the next: the mean with the
/// matrix exponential, the noise with its exact covariance. Read-out noise of
/// standard deviation `sigma_det_i / r_i` is added at each tick.
///
/// Time advances on a grid of spacing `h`, which only sets how finely cycle
/// boundaries are resolved.
pub struct LinearPlant {
    lambda: [[f64; 3]; 3],
    phi_row: [f64; 3],
    noise_cov: [[f64; 4]; 4],
    /// `(x1, x2, x3, phi_-, f1 - theta / 2, f2 - theta / 2)`.
    state: [f64; 6],
    theta: f64,
    step: u64,
    h: f64,
    amp: [f64; 2],
    t_relax: f64,
    tau: Option<f64>,
    cache: HashMap<u64, Propagator>,
    rng: ChaCha8Rng,
    det: Option<LinearDetector>,
}

struct LinearDetector {
    model: DetectionModel,
    sigma: [f64; 2],
    next_tick: u64,
    rng: ChaCha8Rng,
}

/// Exact transition over a fixed number of grid steps: mean map and a
/// square root of the accumulated noise covariance.
struct Propagator {
    mean: [[f64; 6]; 6],
    noise: [[f64; 6]; 6],
    noisy: bool,
}

impl LinearPlant {
    pub fn new(p: &SystemParams, noise: &NoiseConfig, h: f64) -> Result<Self> {
        noise.validate()?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParams(format!("step must be positive, got {h}")));
        }
        let s = stationary_state(p)?;
        let z0 = derive_constants(p)?.zeta0;
        let jac = build_jacobian(p)?;
        let es = eigensystem(&jac)?;
        let kicks = noise_kicks(p)?;
        let intensity = [noise.d1, noise.d1, noise.d2, noise.d2];
        let mut noise_cov = [[0.0; 4]; 4];
        for ((dx, dm), d) in kicks.iter().zip(intensity) {
            let v = [dx[0], dx[1], dx[2], *dm];
            for i in 0..4 {
                for j in 0..4 {
                    noise_cov[i][j] += d * v[i] * v[j];
                }
            }
        }
        Ok(Self {
            lambda: jac.lambda_mat,
            phi_row: phi_minus_vector(p)?,
            noise_cov,
            state: [0.0; 6],
            theta: 0.0,
            step: 0,
            h,
            amp: [s.r1, z0 * s.r1],
            t_relax: es.relaxation_time(),
            tau: None,
            cache: HashMap::new(),
            rng: ChaCha8Rng::seed_from_u64(noise.seed),
            det: None,
        })
    }

    /// True `(phi1, phi2)`.
    pub fn phases(&self) -> [f64; 2] {
        let plus = self.theta - self.state[1];
        [0.5 * (plus + self.state[3]), 0.5 * (plus - self.state[3])]
    }

    fn generator(&self) -> SMatrix<f64, 6, 6> {
        let mut a = SMatrix::<f64, 6, 6>::zeros();
        for i in 0..3 {
            for j in 0..3 {
                a[(i, j)] = self.lambda[i][j];
            }
            a[(3, i)] = self.phi_row[i];
        }
        if let Some(tau) = self.tau {
            // f_k' = (phi_k - f_k) / tau with phi_{1,2} - theta / 2 = (-x2 +- phi_-) / 2
            let r = 1.0 / tau;
            for (k, sign) in [(4, 1.0), (5, -1.0)] {
                a[(k, 1)] = -0.5 * r;
                a[(k, 3)] = 0.5 * sign * r;
                a[(k, k)] = -r;
            }
        }
        a
    }

    /// Van Loan: exp([[-A, Q], [0, A^T]] t) holds exp(A t) and the noise covariance.
    fn propagator(&self, steps: u64) -> Propagator {
        let t = steps as f64 * self.h;
        let a = self.generator();
        let mut q = SMatrix::<f64, 6, 6>::zeros();
        for i in 0..4 {
            for j in 0..4 {
                q[(i, j)] = self.noise_cov[i][j];
            }
        }
        let mut big = SMatrix::<f64, 12, 12>::zeros();
        big.fixed_view_mut::<6, 6>(0, 0).copy_from(&(-a * t));
        big.fixed_view_mut::<6, 6>(0, 6).copy_from(&(q * t));
        big.fixed_view_mut::<6, 6>(6, 6).copy_from(&(a.transpose() * t));
        let e = big.exp();
        let phi = e.fixed_view::<6, 6>(6, 6).transpose();
        let cov = phi * e.fixed_view::<6, 6>(0, 6);
        let cov = (cov + cov.transpose()) * 0.5;
        let eig = cov.symmetric_eigen();
        let root = eig.eigenvectors * SMatrix::<f64, 6, 6>::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
        let noisy = eig.eigenvalues.iter().any(|&v| v > 0.0);
        Propagator {
            mean: std::array::from_fn(|i| std::array::from_fn(|j| phi[(i, j)])),
            noise: std::array::from_fn(|i| std::array::from_fn(|j| root[(i, j)])),
            noisy,
        }
    }

    fn advance_steps(&mut self, steps: u64) {
        if steps == 0 {
            return;
        }
        if !self.cache.contains_key(&steps) {
            let prop = self.propagator(steps);
            self.cache.insert(steps, prop);
        }
        let prop = &self.cache[&steps];
        let x = self.state;
        let mut next = [0.0; 6];
        for (i, row) in prop.mean.iter().enumerate() {
            next[i] = row.iter().zip(&x).map(|(m, v)| m * v).sum();
        }
        if prop.noisy {
            let w: [f64; 6] = std::array::from_fn(|_| StandardNormal.sample(&mut self.rng));
            for (i, row) in prop.noise.iter().enumerate() {
                next[i] += row.iter().zip(&w).map(|(m, v)| m * v).sum::<f64>();
            }
        }
        self.state = next;
        self.step += steps;
    }

    fn step_at_or_after(&self, t: f64) -> u64 {
        ((t / self.h) - 1e-9).ceil().max(0.0) as u64
    }
}

impl Plant for LinearPlant {
    fn time(&self) -> f64 {
        self.step as f64 * self.h
    }

    fn pump_phase(&self) -> f64 {
        self.theta
    }

    fn set_pump_phase(&mut self, theta: f64) {
        let d = theta - self.theta;
        self.state[1] += d;
        self.state[4] -= 0.5 * d;
        self.state[5] -= 0.5 * d;
        self.theta = theta;
    }

    fn attach_detector(&mut self, det: &DetectionModel) -> Result<()> {
        det.validate()?;
        if self.h > det.tau_lockin / 10.0 * (1.0 + 1e-9) {
            return Err(Error::InsufficientResolution(format!(
                "plant step {} s exceeds tau_lockin / 10",
                self.h
            )));
        }
        if self.tau != Some(det.tau_lockin) {
            self.tau = Some(det.tau_lockin);
            self.cache.clear();
        }
        let ph = self.phases();
        self.state[4] = ph[0] - 0.5 * self.theta;
        self.state[5] = ph[1] - 0.5 * self.theta;
        self.det = Some(LinearDetector {
            model: *det,
            sigma: [det.sigma_det1 / self.amp[0], det.sigma_det2 / self.amp[1]],
            next_tick: (self.time() / det.sample_period - 1e-9).ceil().max(0.0) as u64,
            rng: ChaCha8Rng::seed_from_u64(det.seed),
        });
        Ok(())
    }

    fn advance_to(&mut self, t_end: f64, sink: &mut dyn FnMut(&PhaseSample, [f64; 2])) -> Result<()> {
        // same grid rule as stepping while t + h/2 < t_end
        let target = ((t_end / self.h) - 0.5).ceil().max(0.0) as u64;
        // long detector-free stretches are split to keep the exponent small
        let max_chunk = (1e-2 / self.h).ceil().max(1.0) as u64;
        while self.step < target {
            let tick_step = self.det.as_ref().map(|d| {
                let tick = d.next_tick as f64 * d.model.sample_period;
                self.step_at_or_after(tick).max(self.step + 1)
            });
            let next = match tick_step {
                Some(s) => s.min(target),
                None => target.min(self.step + max_chunk),
            };
            self.advance_steps(next - self.step);
            if tick_step == Some(next) {
                let t = self.time();
                let phases = self.phases();
                let half_theta = 0.5 * self.theta;
                let (x0, x2) = (self.state[0], self.state[2]);
                let amp = [self.amp[0] * (1.0 + x2), self.amp[1] * (1.0 + x2) + self.amp[0] * x0];
                let d = self.det.as_mut().expect("tick implies a detector");
                d.next_tick += 1;
                let mut phi = [self.state[4] + half_theta, self.state[5] + half_theta];
                for k in 0..2 {
                    if d.sigma[k] > 0.0 {
                        let w: f64 = StandardNormal.sample(&mut d.rng);
                        phi[k] += d.sigma[k] * w;
                    }
                }
                sink(&PhaseSample { t, phi, amp, unwrap_fault: false }, phases);
            }
        }
        Ok(())
    }

    fn relaxation_time(&self) -> f64 {
        self.t_relax
    }
}
