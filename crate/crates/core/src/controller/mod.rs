//! Cyclic pump-phase feedback. Each cycle waits for the transient of the
//! previous correction to settle, averages the measured phase of the
//! observed mode, and sets the pump phase so that the other mode's phase
//! returns to zero.

mod plant;

pub use plant::{LinearPlant, Plant, SlowFlowPlant, COLLAPSE_FRACTION};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::slowflow::{DetectionModel, PhaseSample};

/// `g` must lie in `(G_MARGIN, 1 - G_MARGIN)`.
pub const G_MARGIN: f64 = 1e-3;
/// Default pump-phase excursion warning level (20 degrees).
pub const DEFAULT_THETA_LIMIT: f64 = 20.0 * std::f64::consts::PI / 180.0;
/// Minimum number of cycles for run statistics.
pub const MIN_STAT_CYCLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExcursionPolicy {
    /// Log the excursion and carry on.
    Warn,
    /// Log and clamp the pump phase to the limit.
    Clamp,
    /// Stop the run with an error.
    Abort,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleConfig {
    pub t_wait: f64,
    pub t_measure: f64,
    /// Mode whose phase is held at zero (1 or 2).
    pub target_mode: u8,
    pub g: f64,
    pub theta_limit: f64,
    pub excursion: ExcursionPolicy,
    /// With feedback off the pump phase is never changed; used for the
    /// unstabilized reference run.
    pub feedback: bool,
}

impl CycleConfig {
    pub fn new(target_mode: u8, g: f64, t_measure: f64) -> Self {
        Self {
            t_wait: 0.3,
            t_measure,
            target_mode,
            g,
            theta_limit: DEFAULT_THETA_LIMIT,
            excursion: ExcursionPolicy::Warn,
            feedback: true,
        }
    }

    pub fn period(&self) -> f64 {
        self.t_wait + self.t_measure
    }

    pub fn validate(&self, det: &DetectionModel) -> Result<()> {
        if self.target_mode != 1 && self.target_mode != 2 {
            return Err(Error::InvalidParams(format!("target mode must be 1 or 2, got {}", self.target_mode)));
        }
        if !(self.g > G_MARGIN && self.g < 1.0 - G_MARGIN) {
            return Err(Error::InvalidParams(format!(
                "g = {} outside ({G_MARGIN}, {})",
                self.g,
                1.0 - G_MARGIN
            )));
        }
        if !(self.t_wait >= 0.0 && self.t_measure >= det.sample_period) {
            return Err(Error::InvalidParams(format!(
                "t_measure = {} s shorter than one detector sample ({} s)",
                self.t_measure, det.sample_period
            )));
        }
        if !(self.theta_limit > 0.0) {
            return Err(Error::InvalidParams("theta_limit must be positive".into()));
        }
        Ok(())
    }
}

/// Next pump phase when holding mode 2, from the averaged phase of mode 1.
pub fn next_theta_mode2(g: f64, theta: f64, phi1_meas: f64) -> f64 {
    (phi1_meas - (1.0 - g) * theta) / g
}

/// Next pump phase when holding mode 1, from the averaged phase of mode 2.
pub fn next_theta_mode1(g: f64, theta: f64, phi2_meas: f64) -> f64 {
    (phi2_meas - g * theta) / (1.0 - g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub p: usize,
    /// Cycle start time (s).
    pub t: f64,
    /// Pump phase applied during the cycle.
    pub theta: f64,
    /// Averaged measured phase of the observed mode.
    pub phi_meas: f64,
    /// Number of detector samples averaged.
    pub n_samples: usize,
    /// True phases at the end of the cycle, just before the next correction.
    pub phi1: f64,
    pub phi2: f64,
    /// Residual of the held mode at the end of the cycle.
    pub eps: f64,
}

/// Commanded pump phase beyond the configured limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcursionWarning {
    /// Cycle the command was meant for.
    pub cycle: usize,
    pub theta: f64,
    pub limit: f64,
}

impl From<ExcursionWarning> for Error {
    fn from(w: ExcursionWarning) -> Self {
        Error::Excursion {
            cycle: w.cycle,
            theta: w.theta,
            limit: w.limit,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTrace {
    pub t: Vec<f64>,
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
    pub meas1: Vec<f64>,
    pub meas2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilizationRun {
    pub target_mode: u8,
    pub g: f64,
    pub feedback: bool,
    pub cycles: Vec<CycleRecord>,
    /// True and measured phases at every detector sample.
    pub trace: PhaseTrace,
    /// Excursion warnings, in order.
    pub warnings: Vec<ExcursionWarning>,
}

impl StabilizationRun {
    /// True phase of the held mode at every detector sample.
    pub fn held_phase(&self) -> &[f64] {
        if self.target_mode == 1 {
            &self.trace.phi1
        } else {
            &self.trace.phi2
        }
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.cycles.iter().map(|c| c.theta).collect()
    }
}

pub fn stabilize_mode2<P: Plant>(plant: &mut P, det: &DetectionModel, cfg: &CycleConfig, n_cycles: usize) -> Result<StabilizationRun> {
    if cfg.target_mode != 2 {
        return Err(Error::InvalidParams("stabilize_mode2 needs target_mode = 2".into()));
    }
    run_cycles(plant, det, cfg, n_cycles)
}

pub fn stabilize_mode1<P: Plant>(plant: &mut P, det: &DetectionModel, cfg: &CycleConfig, n_cycles: usize) -> Result<StabilizationRun> {
    if cfg.target_mode != 1 {
        return Err(Error::InvalidParams("stabilize_mode1 needs target_mode = 1".into()));
    }
    run_cycles(plant, det, cfg, n_cycles)
}

/// Runs `n_cycles` feedback cycles starting at the plant's current time. The
/// first averaged sample of a cycle is the first detector tick at or after
/// the end of the wait.
pub fn run_cycles<P: Plant>(plant: &mut P, det: &DetectionModel, cfg: &CycleConfig, n_cycles: usize) -> Result<StabilizationRun> {
    cfg.validate(det)?;
    let t_r = plant.relaxation_time();
    if cfg.t_wait < t_r {
        return Err(Error::InvalidParams(format!(
            "t_wait = {} s shorter than the relaxation time {t_r} s",
            cfg.t_wait
        )));
    }
    plant.attach_detector(det)?;
    let observed = if cfg.target_mode == 2 { 0 } else { 1 };
    let mut run = StabilizationRun {
        target_mode: cfg.target_mode,
        g: cfg.g,
        feedback: cfg.feedback,
        cycles: Vec::with_capacity(n_cycles),
        trace: PhaseTrace::default(),
        warnings: Vec::new(),
    };
    let t0 = plant.time();
    let period = cfg.period();
    plant.set_pump_phase(0.0);
    for p in 0..n_cycles {
        let t_p = t0 + p as f64 * period;
        let theta = plant.pump_phase();
        let measure_from = t_p + cfg.t_wait;
        let mut sum = 0.0;
        let mut count = 0usize;
        let mut last_true = [0.0; 2];
        let mut fault = None;
        let trace = &mut run.trace;
        plant.advance_to(t_p + period, &mut |s: &PhaseSample, truth: [f64; 2]| {
            if s.unwrap_fault && fault.is_none() {
                fault = Some(s.t);
            }
            trace.t.push(s.t);
            trace.phi1.push(truth[0]);
            trace.phi2.push(truth[1]);
            trace.meas1.push(s.phi[0]);
            trace.meas2.push(s.phi[1]);
            if s.t >= measure_from {
                sum += s.phi[observed];
                count += 1;
            }
            last_true = truth;
        })?;
        if let Some(t) = fault {
            return Err(Error::UnwrapFault { t, jump: f64::NAN });
        }
        if count == 0 {
            return Err(Error::InsufficientResolution(format!("no detector sample in the measurement window of cycle {p}")));
        }
        let phi_meas = sum / count as f64;
        let eps = if cfg.target_mode == 2 { last_true[1] } else { last_true[0] };
        run.cycles.push(CycleRecord {
            p,
            t: t_p,
            theta,
            phi_meas,
            n_samples: count,
            phi1: last_true[0],
            phi2: last_true[1],
            eps,
        });
        if cfg.feedback {
            let mut next = if cfg.target_mode == 2 {
                next_theta_mode2(cfg.g, theta, phi_meas)
            } else {
                next_theta_mode1(cfg.g, theta, phi_meas)
            };
            if next.abs() > cfg.theta_limit {
                let warning = ExcursionWarning {
                    cycle: p + 1,
                    theta: next,
                    limit: cfg.theta_limit,
                };
                match cfg.excursion {
                    ExcursionPolicy::Abort => return Err(warning.into()),
                    ExcursionPolicy::Clamp => next = next.clamp(-cfg.theta_limit, cfg.theta_limit),
                    ExcursionPolicy::Warn => {}
                }
                run.warnings.push(warning);
            }
            plant.set_pump_phase(next);
        }
    }
    Ok(run)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerStats {
    pub n_cycles: usize,
    /// RMS of the held mode's true phase over all detector samples (rad).
    pub sigma_phi: f64,
    /// Mean of `eps_p^2`.
    pub mean_sq_eps: f64,
    /// Mean squared pump-phase increment, the slope of `Var(theta_p)` in `p`.
    pub theta_step_var: f64,
    /// `<eps^2> / g^2` (mode 2) or `<eps^2> / (1 - g)^2` (mode 1).
    pub predicted_step_var: f64,
}

pub fn controller_statistics(run: &StabilizationRun) -> Result<ControllerStats> {
    let n = run.cycles.len();
    if n < MIN_STAT_CYCLES {
        return Err(Error::TooShort { got: n, need: MIN_STAT_CYCLES });
    }
    let held = run.held_phase();
    let sigma_phi = if held.is_empty() {
        0.0
    } else {
        (held.iter().map(|v| v * v).sum::<f64>() / held.len() as f64).sqrt()
    };
    let mean_sq_eps = run.cycles.iter().map(|c| c.eps * c.eps).sum::<f64>() / n as f64;
    let steps: Vec<f64> = run.cycles.windows(2).map(|w| w[1].theta - w[0].theta).collect();
    let theta_step_var = steps.iter().map(|d| d * d).sum::<f64>() / steps.len() as f64;
    let gain = if run.target_mode == 2 { run.g } else { 1.0 - run.g };
    Ok(ControllerStats {
        n_cycles: n,
        sigma_phi,
        mean_sq_eps,
        theta_step_var,
        predicted_step_var: mean_sq_eps / (gain * gain),
    })
}

/// Ratio of the held mode's mean-square phase without and with feedback.
pub fn on_off_variance_ratio(on: &StabilizationRun, off: &StabilizationRun) -> f64 {
    let ms = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() / v.len().max(1) as f64;
    ms(off.held_phase()) / ms(on.held_phase())
}

#[cfg(test)]
mod tests;
