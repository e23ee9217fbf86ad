//! Linearization about the self-oscillation state: the 3x3 matrix for
//! `x = (delta zeta, theta_F - delta phi_+ - Theta0, delta r1 / r1)`, its
//! eigensystem, the coupling vector `Phi` driving `phi_-`, and the transients
//! that follow a pump-phase step or a slow detuning pulse.

mod eigen;

pub use eigen::{char_poly, char_residual, cubic_roots, det, dot, dot_real, eigensystem_of, EigenSystem, DEGENERACY_TOL};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{coupling_g, derive_constants, stationary_state, SystemParams};
use crate::slowflow::{stationary_amplitudes, NoiseConfig, SlowFlowIntegrator};

/// Largest pump-phase step treated as linear (rad).
pub const LINEAR_STEP_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jacobian3 {
    pub lambda_mat: [[f64; 3]; 3],
}

impl Jacobian3 {
    pub fn eigensystem(&self) -> Result<EigenSystem> {
        eigensystem(self)
    }
}

pub fn build_jacobian(p: &SystemParams) -> Result<Jacobian3> {
    let d = derive_constants(p)?;
    let s = stationary_state(p)?;
    let e = d.excess()?;
    let (g1, g2) = (p.gamma1_damp, p.gamma2_damp);
    let z = d.zeta0;
    let r1sq = s.r1 * s.r1;
    let l23 = -2.0 * (d.gamma_plus_12 / p.omega1 * z * z + d.gamma_plus_21 / p.omega2) * r1sq;
    Ok(Jacobian3 {
        lambda_mat: [
            [-(g1 + g2), (g2 - g1) * z * e, 0.0],
            [-(g2 - g1) * e / z - 2.0 * d.gamma_plus_12 / p.omega1 * r1sq * z, -(g1 + g2), l23],
            [g1 / z, g1 * e, 0.0],
        ],
    })
}

pub fn eigensystem(j: &Jacobian3) -> Result<EigenSystem> {
    eigensystem_of(&j.lambda_mat)
}

/// Coefficients of `d(delta phi_-)/dt = Phi . x`.
pub fn phi_minus_vector(p: &SystemParams) -> Result<[f64; 3]> {
    let d = derive_constants(p)?;
    let s = stationary_state(p)?;
    let e = d.excess()?;
    let (g1, g2) = (p.gamma1_damp, p.gamma2_damp);
    let z = d.zeta0;
    let r1sq = s.r1 * s.r1;
    Ok([
        -(g1 + g2) * e / z + 2.0 * d.gamma_minus_12 / p.omega1 * r1sq * z,
        g1 - g2,
        2.0 * (d.gamma_minus_12 / p.omega1 * z * z - d.gamma_minus_21 / p.omega2) * r1sq,
    ])
}

/// Settled response of `phi_-` to a unit pump-phase step, summed over modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralC {
    pub c: f64,
    /// Imaginary part left over by the modal sum; zero up to rounding.
    pub imag_residual: f64,
}

pub fn compute_c_spectral(p: &SystemParams) -> Result<SpectralC> {
    let es = eigensystem(&build_jacobian(p)?)?;
    let phi = phi_minus_vector(p)?;
    let mut sum = Complex64::new(0.0, 0.0);
    for k in 0..3 {
        sum -= es.left[k][1] * dot_real(&phi, &es.right[k]) / es.lambdas[k];
    }
    Ok(SpectralC {
        c: sum.re,
        imag_residual: sum.im,
    })
}

/// Near-threshold limits of the spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BifurcationEigs {
    /// Complex pair at `delta_f = -omega_c`, positive imaginary part.
    pub lambda12: Complex64,
    /// `d lambda_3 / d delta_f` at `delta_f = -omega_c`.
    pub lambda3_slope: f64,
}

/// Analytic eigenvalues at onset. Setting `r1 = 0` decouples `(x1, x2)`; the
/// slow root follows from eliminating them adiabatically, with
/// `Lambda_23 = -2 (delta_f + omega_c)` to leading order.
pub fn bifurcation_eigs(p: &SystemParams) -> Result<BifurcationEigs> {
    let d = derive_constants(p)?;
    if d.xi * d.xi - 1.0 <= crate::model::THRESHOLD_EPS {
        return Err(Error::BelowThreshold { xi: d.xi });
    }
    let wc = d.require_omega_c()?;
    let e = d.excess()?;
    let (g1, g2) = (p.gamma1_damp, p.gamma2_damp);
    let det2 = (g1 + g2).powi(2) + (g2 - g1).powi(2) * e * e;
    Ok(BifurcationEigs {
        lambda12: Complex64::new(-(g1 + g2), wc * (g2 - g1) / (g2 + g1)),
        lambda3_slope: -4.0 * g1 * g2 * e / det2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResponse {
    pub t: Vec<f64>,
    pub dphi1: Vec<f64>,
    pub dphi2: Vec<f64>,
    pub dr1: Vec<f64>,
    pub dr2: Vec<f64>,
    /// Settled phase changes.
    pub settled_dphi1: f64,
    pub settled_dphi2: f64,
    /// `1 / min |Re lambda|`.
    pub t_relax: f64,
}

/// `(e^{lambda t} - 1) / lambda`, accurate for small `lambda t`.
fn expm1_over(lambda: Complex64, t: f64) -> Complex64 {
    let z = lambda * t;
    if z.norm() < 1e-4 {
        t * (1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0)
    } else {
        (z.exp() - 1.0) / lambda
    }
}

/// Linear response to a pump-phase step `dtheta` applied at `t = 0`.
pub fn step_response(p: &SystemParams, dtheta: f64, times: &[f64]) -> Result<StepResponse> {
    if !(dtheta.abs() <= LINEAR_STEP_LIMIT) {
        return Err(Error::NonlinearRegime {
            delta_theta: dtheta,
            limit: LINEAR_STEP_LIMIT,
        });
    }
    let s = stationary_state(p)?;
    let z0 = derive_constants(p)?.zeta0;
    let es = eigensystem(&build_jacobian(p)?)?;
    let phi = phi_minus_vector(p)?;
    let coef: [Complex64; 3] = std::array::from_fn(|k| es.left[k][1] * dtheta);
    let phi_dot_y: [Complex64; 3] = std::array::from_fn(|k| dot_real(&phi, &es.right[k]));

    let mut out = StepResponse {
        t: times.to_vec(),
        dphi1: Vec::with_capacity(times.len()),
        dphi2: Vec::with_capacity(times.len()),
        dr1: Vec::with_capacity(times.len()),
        dr2: Vec::with_capacity(times.len()),
        settled_dphi1: 0.0,
        settled_dphi2: 0.0,
        t_relax: es.relaxation_time(),
    };
    for &t in times {
        let mut x = [Complex64::new(0.0, 0.0); 3];
        let mut dminus = Complex64::new(0.0, 0.0);
        for k in 0..3 {
            let a = coef[k] * (es.lambdas[k] * t).exp();
            for i in 0..3 {
                x[i] += a * es.right[k][i];
            }
            dminus += coef[k] * phi_dot_y[k] * expm1_over(es.lambdas[k], t);
        }
        let dplus = dtheta - x[1].re;
        out.dphi1.push(0.5 * (dplus + dminus.re));
        out.dphi2.push(0.5 * (dplus - dminus.re));
        out.dr1.push(s.r1 * x[2].re);
        out.dr2.push(s.r1 * (z0 * x[2].re + x[0].re));
    }
    let mut settled_minus = Complex64::new(0.0, 0.0);
    for k in 0..3 {
        settled_minus -= coef[k] * phi_dot_y[k] / es.lambdas[k];
    }
    out.settled_dphi1 = 0.5 * (dtheta + settled_minus.re);
    out.settled_dphi2 = 0.5 * (dtheta - settled_minus.re);
    Ok(out)
}

/// Response of the full slow flow to a pump-phase step, measured against an
/// unstepped twin run on the same grid so frame drift and integrator phase
/// error cancel. `times` must be non-decreasing and are snapped to the step grid.
pub fn nonlinear_step_response(p: &SystemParams, dtheta: f64, times: &[f64], dt: f64) -> Result<StepResponse> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::InvalidParams("step times must be non-negative and sorted".into()));
    }
    let init = stationary_amplitudes(p)?;
    let quiet = NoiseConfig::none();
    let mut reference = SlowFlowIntegrator::new(p, init, &quiet, dt)?;
    let mut stepped = SlowFlowIntegrator::new(p, init, &quiet, dt)?;
    stepped.set_pump_phase(p.theta_f + dtheta);
    let t_relax = eigensystem(&build_jacobian(p)?)?.relaxation_time();
    let mut out = StepResponse {
        t: Vec::with_capacity(times.len()),
        dphi1: Vec::with_capacity(times.len()),
        dphi2: Vec::with_capacity(times.len()),
        dr1: Vec::with_capacity(times.len()),
        dr2: Vec::with_capacity(times.len()),
        settled_dphi1: 0.0,
        settled_dphi2: 0.0,
        t_relax,
    };
    let mut n = 0u64;
    for &t in times {
        let target = (t / dt).round() as u64;
        while n < target {
            reference.advance()?;
            stepped.advance()?;
            n += 1;
        }
        let (a, b) = (stepped.state(), reference.state());
        out.t.push(n as f64 * dt);
        out.dphi1.push((a[0] / b[0]).arg());
        out.dphi2.push((a[1] / b[1]).arg());
        out.dr1.push(a[0].norm() - b[0].norm());
        out.dr2.push(a[1].norm() - b[1].norm());
    }
    out.settled_dphi1 = out.dphi1.last().copied().unwrap_or(0.0);
    out.settled_dphi2 = out.dphi2.last().copied().unwrap_or(0.0);
    Ok(out)
}

/// Smooth detuning pulse: raised-cosine ramps of length `rise` around a flat
/// top of length `hold`, peak `amplitude` (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetuningPulse {
    pub amplitude: f64,
    pub rise: f64,
    pub hold: f64,
}

impl DetuningPulse {
    pub fn duration(&self) -> f64 {
        2.0 * self.rise + self.hold
    }

    /// Frequency-time area of the pulse (rad).
    pub fn area(&self) -> f64 {
        self.amplitude * (self.rise + self.hold)
    }

    pub fn value(&self, t: f64) -> f64 {
        let (r, h) = (self.rise, self.hold);
        let ramp = |s: f64| 0.5 * (1.0 - (std::f64::consts::PI * s / r).cos());
        if t <= 0.0 || t >= self.duration() {
            0.0
        } else if t < r {
            self.amplitude * ramp(t)
        } else if t <= r + h {
            self.amplitude
        } else {
            self.amplitude * ramp(self.duration() - t)
        }
    }

    /// Integral of the pulse from 0 to `t`.
    pub fn integral(&self, t: f64) -> f64 {
        let (r, h) = (self.rise, self.hold);
        let pi = std::f64::consts::PI;
        let ramp_area = |s: f64| 0.5 * (s - r / pi * (pi * s / r).sin());
        let a = self.amplitude;
        if t <= 0.0 {
            0.0
        } else if t < r {
            a * ramp_area(t)
        } else if t <= r + h {
            a * (0.5 * r + (t - r))
        } else if t < self.duration() {
            self.area() - a * ramp_area(self.duration() - t)
        } else {
            self.area()
        }
    }

    /// `t_r max|d(dD)/dt| / max|dD|`; small for an adiabatic pulse.
    pub fn adiabaticity(&self, t_relax: f64) -> f64 {
        t_relax * std::f64::consts::FRAC_PI_2 / self.rise
    }
}

/// Ratio above which a pulse is rejected as non-adiabatic.
pub const ADIABATIC_LIMIT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseResponse {
    pub t: Vec<f64>,
    pub dphi_plus: Vec<f64>,
    pub dphi_minus: Vec<f64>,
    /// Pulse area (rad).
    pub area: f64,
    /// Net changes after the pulse has ended and the transient has decayed.
    pub settled_dphi_plus: f64,
    pub settled_dphi_minus: f64,
    /// `|x|` at the end of the record.
    pub x_residual: f64,
    /// Largest deviation of `phi_-` from quasi-static tracking during the
    /// record, relative to the pulse area.
    pub tracking_error: f64,
    pub adiabaticity: f64,
}

/// Response of the linearized flow to a slow detuning pulse,
/// `x' = Lambda x - dD(t) e_2`, integrated in the eigenbasis.
///
/// A pulse of area `A` is a pump-phase change of `-A` spread over the pulse,
/// so `phi_+` ends shifted by `-A` and `phi_-` by `-C A`. Quasi-statically
/// `x = Lambda^{-1} e_2 dD(t)` and `phi_-` tracks `-C` times the running area.
pub fn adiabatic_pulse_response(p: &SystemParams, pulse: &DetuningPulse, t_end: f64, n: usize) -> Result<PulseResponse> {
    let es = eigensystem(&build_jacobian(p)?)?;
    let t_relax = es.relaxation_time();
    let eta = pulse.adiabaticity(t_relax);
    if !(eta <= ADIABATIC_LIMIT) {
        return Err(Error::NotAdiabatic(format!(
            "ramp time {} s against relaxation time {t_relax} s (ratio {eta:.3} > {ADIABATIC_LIMIT})",
            pulse.rise
        )));
    }
    let phi = phi_minus_vector(p)?;
    let c = coupling_g(p)?.c;
    let phi_dot_y: [Complex64; 3] = std::array::from_fn(|k| dot_real(&phi, &es.right[k]));
    let drive: [Complex64; 3] = std::array::from_fn(|k| -es.left[k][1]);

    let fast = es.lambdas.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let h_target = (0.02 / fast).min(pulse.rise / 200.0);
    let n = n.max(2);
    let substeps = ((t_end / (n - 1) as f64) / h_target).ceil().max(1.0) as usize;
    let h = t_end / ((n - 1) * substeps) as f64;

    // modal amplitudes and phi_- as one complex state (phi_- real)
    let rhs = |t: f64, cm: &[Complex64; 3]| -> ([Complex64; 3], f64) {
        let dd = pulse.value(t);
        let dc = std::array::from_fn(|k| es.lambdas[k] * cm[k] + drive[k] * dd);
        let dphi: f64 = (0..3).map(|k| (cm[k] * phi_dot_y[k]).re).sum();
        (dc, dphi)
    };

    let mut cm = [Complex64::new(0.0, 0.0); 3];
    let mut pm = 0.0;
    let mut out = PulseResponse {
        t: Vec::with_capacity(n),
        dphi_plus: Vec::with_capacity(n),
        dphi_minus: Vec::with_capacity(n),
        area: pulse.area(),
        settled_dphi_plus: 0.0,
        settled_dphi_minus: 0.0,
        x_residual: 0.0,
        tracking_error: 0.0,
        adiabaticity: eta,
    };
    let x2 = |cm: &[Complex64; 3]| (0..3).map(|k| (cm[k] * es.right[k][1]).re).sum::<f64>();
    let mut t = 0.0;
    for i in 0..n {
        if i > 0 {
            for _ in 0..substeps {
                let add = |a: &[Complex64; 3], b: &[Complex64; 3], s: f64| -> [Complex64; 3] {
                    std::array::from_fn(|k| a[k] + b[k] * s)
                };
                let (k1, q1) = rhs(t, &cm);
                let (k2, q2) = rhs(t + 0.5 * h, &add(&cm, &k1, 0.5 * h));
                let (k3, q3) = rhs(t + 0.5 * h, &add(&cm, &k2, 0.5 * h));
                let (k4, q4) = rhs(t + h, &add(&cm, &k3, h));
                for k in 0..3 {
                    cm[k] += (k1[k] + (k2[k] + k3[k]) * 2.0 + k4[k]) * (h / 6.0);
                }
                pm += h / 6.0 * (q1 + 2.0 * (q2 + q3) + q4);
                t += h;
            }
        }
        let running = pulse.integral(t);
        out.t.push(t);
        out.dphi_plus.push(-running - x2(&cm));
        out.dphi_minus.push(pm);
        out.tracking_error = out.tracking_error.max((pm + c * running).abs() / pulse.area().abs());
    }
    let x: Vec<Complex64> = (0..3).map(|i| (0..3).map(|k| cm[k] * es.right[k][i]).sum()).collect();
    out.x_residual = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    out.settled_dphi_plus = *out.dphi_plus.last().unwrap();
    out.settled_dphi_minus = pm;
    Ok(out)
}

/// Kick vectors for one unit of each independent noise source, in the order
/// (tangential mode 1, radial mode 1, tangential mode 2, radial mode 2):
/// `(dx, d phi_-)` per unit displacement of the complex amplitude.
pub fn noise_kicks(p: &SystemParams) -> Result<[([f64; 3], f64); 4]> {
    let s = stationary_state(p)?;
    let z0 = derive_constants(p)?.zeta0;
    let (r1, r2) = (s.r1, s.r2);
    Ok([
        ([0.0, -1.0 / r1, 0.0], 1.0 / r1),
        ([-z0 / r1, 0.0, 1.0 / r1], 0.0),
        ([0.0, -1.0 / r2, 0.0], -1.0 / r2),
        ([1.0 / r1, 0.0, 0.0], 0.0),
    ])
}

/// Long-time diffusion coefficients of the phase difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionRates {
    /// `d Var[phi_-] / dt` of the linearized Langevin equations.
    pub minus: f64,
    /// Same, ignoring the coupling through `x`: `d1 / r1^2 + d2 / r2^2`.
    pub minus_uncoupled: f64,
}

/// Over times long against `t_r` each noise source moves `phi_-` by its
/// direct kick plus `-Phi . Lambda^{-1}` applied to its kick on `x`.
pub fn phase_diffusion_rates(p: &SystemParams, d1: f64, d2: f64) -> Result<DiffusionRates> {
    let es = eigensystem(&build_jacobian(p)?)?;
    let phi = phi_minus_vector(p)?;
    let s = stationary_state(p)?;
    // row vector Phi . Lambda^{-1}
    let w: [f64; 3] = std::array::from_fn(|j| {
        (0..3)
            .map(|k| dot_real(&phi, &es.right[k]) * es.left[k][j] / es.lambdas[k])
            .sum::<Complex64>()
            .re
    });
    let kicks = noise_kicks(p)?;
    let intens = [d1, d1, d2, d2];
    let minus = kicks
        .iter()
        .zip(intens)
        .map(|((dx, dm), d)| {
            let gain = dm - (w[0] * dx[0] + w[1] * dx[1] + w[2] * dx[2]);
            gain * gain * d
        })
        .sum();
    Ok(DiffusionRates {
        minus,
        minus_uncoupled: d1 / (s.r1 * s.r1) + d2 / (s.r2 * s.r2),
    })
}

#[cfg(test)]
mod tests;
