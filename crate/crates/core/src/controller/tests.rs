use super::*;
use crate::model::{coupling_g, pump_map, stationary_state, PumpCalibration, SystemParams};
use crate::slowflow::NoiseConfig;

fn operating_point() -> SystemParams {
    pump_map(379e-6, &PumpCalibration::reference(), &SystemParams::reference_device()).unwrap()
}

/// Noise giving each mode a bare phase-diffusion rate `rate` (rad^2/s).
fn noise_for(p: &SystemParams, rate: f64, seed: u64) -> NoiseConfig {
    let s = stationary_state(p).unwrap();
    NoiseConfig {
        d1: rate * s.r1 * s.r1,
        d2: rate * s.r2 * s.r2,
        seed,
    }
}

#[test]
fn control_law_direct_values() {
    let t2 = next_theta_mode2(0.94, 0.0, 0.01);
    assert!((t2 - 0.01 / 0.94).abs() < 1e-15);
    assert!((t2 - 0.010638).abs() < 1e-6);
    let t1 = next_theta_mode1(0.94, 0.0, 0.01);
    assert!((t1 - 0.1666666).abs() < 1e-6);
    // with the held mode at zero, phi_+ = theta puts the observed mode at theta
    for &theta in &[-0.3, 0.0, 0.2] {
        assert!((next_theta_mode2(0.94, theta, theta) - theta).abs() < 4.0 * f64::EPSILON);
        assert!((next_theta_mode1(0.94, theta, theta) - theta).abs() < 4.0 * f64::EPSILON);
        // no accumulated diffusion: the settled split of theta itself brings theta back to 0
        assert!(next_theta_mode2(0.94, theta, (1.0 - 0.94) * theta).abs() < 4.0 * f64::EPSILON);
        assert!(next_theta_mode1(0.94, theta, 0.94 * theta).abs() < 4.0 * f64::EPSILON);
    }
}

#[test]
fn g_outside_margin_rejected() {
    let det = DetectionModel::default();
    for g in [0.0, 5e-4, 1.0 - 5e-4, 1.0, f64::NAN] {
        let cfg = CycleConfig::new(1, g, 0.1);
        assert!(matches!(cfg.validate(&det), Err(Error::InvalidParams(_))), "g = {g}");
    }
    assert!(CycleConfig::new(1, 0.94, 0.1).validate(&det).is_ok());
    let short = CycleConfig::new(2, 0.94, 1e-3);
    assert!(short.validate(&det).is_err());
}

#[test]
fn noiseless_loop_sits_at_fixed_point() {
    let p = operating_point();
    let g = coupling_g(&p).unwrap().g;
    let det = DetectionModel::default();
    for mode in [1u8, 2] {
        let mut plant = SlowFlowPlant::new(&p, &NoiseConfig::none(), None).unwrap();
        let run = run_cycles(&mut plant, &det, &CycleConfig::new(mode, g, 0.1), 5).unwrap();
        // only the O(dt^4) error of the RK4 rotation rate moves the phases
        for c in &run.cycles {
            assert!(c.theta.abs() < 1e-8, "theta {}", c.theta);
            assert!(c.phi1.abs() < 1e-8 && c.phi2.abs() < 1e-8);
        }
        let mut lin = LinearPlant::new(&p, &NoiseConfig::none(), 1e-4).unwrap();
        let run = run_cycles(&mut lin, &det, &CycleConfig::new(mode, g, 0.1), 5).unwrap();
        assert!(run.cycles.iter().all(|c| c.theta == 0.0 && c.phi1 == 0.0 && c.phi2 == 0.0));
    }
}

/// Records when the pump phase is written.
struct Audited<P> {
    inner: P,
    writes: Vec<(f64, f64)>,
}

impl<P: Plant> Plant for Audited<P> {
    fn time(&self) -> f64 {
        self.inner.time()
    }
    fn pump_phase(&self) -> f64 {
        self.inner.pump_phase()
    }
    fn set_pump_phase(&mut self, theta: f64) {
        self.writes.push((self.inner.time(), theta));
        self.inner.set_pump_phase(theta)
    }
    fn attach_detector(&mut self, det: &DetectionModel) -> Result<()> {
        self.inner.attach_detector(det)
    }
    fn advance_to(&mut self, t_end: f64, sink: &mut dyn FnMut(&PhaseSample, [f64; 2])) -> Result<()> {
        self.inner.advance_to(t_end, sink)
    }
    fn relaxation_time(&self) -> f64 {
        self.inner.relaxation_time()
    }
}

#[test]
fn pump_phase_changes_only_at_cycle_boundaries() {
    let p = operating_point();
    let g = coupling_g(&p).unwrap().g;
    let h = 1e-4;
    let mut plant = Audited {
        inner: LinearPlant::new(&p, &noise_for(&p, 1e-3, 3), h).unwrap(),
        writes: Vec::new(),
    };
    let cfg = CycleConfig::new(2, g, 0.05);
    let run = run_cycles(&mut plant, &DetectionModel::default(), &cfg, 20).unwrap();
    assert_eq!(plant.writes.len(), 21);
    for (k, &(t, _)) in plant.writes.iter().enumerate() {
        let boundary = k as f64 * cfg.period();
        assert!((t - boundary).abs() <= h, "write {k} at {t}");
    }
    for (c, w) in run.cycles.iter().zip(&plant.writes) {
        assert_eq!(c.theta, w.1);
    }
}

#[test]
fn increments_follow_residuals() {
    let p = operating_point();
    let g = coupling_g(&p).unwrap().g;
    let mut plant = LinearPlant::new(&p, &noise_for(&p, 1e-3, 11), 1e-4).unwrap();
    let cfg = CycleConfig::new(2, g, 0.02);
    let run = run_cycles(&mut plant, &DetectionModel::default(), &cfg, 200).unwrap();
    let mut num = 0.0;
    let mut den = 0.0;
    for w in run.cycles.windows(2) {
        let predicted = -w[0].eps / g;
        let actual = w[1].theta - w[0].theta;
        num += (actual - predicted).powi(2);
        den += actual * actual;
    }
    // residual changes during the short measurement window only
    assert!(num / den < 0.1, "relative mismatch {}", num / den);
}

#[test]
fn mode1_needs_larger_corrections() {
    let p = operating_point();
    let g = coupling_g(&p).unwrap().g;
    let det = DetectionModel::default();
    let rms_steps = |mode: u8| {
        let mut plant = LinearPlant::new(&p, &noise_for(&p, 1e-3, 21), 1e-4).unwrap();
        let run = run_cycles(&mut plant, &det, &CycleConfig::new(mode, g, 0.02), 400).unwrap();
        controller_statistics(&run).unwrap().theta_step_var.sqrt()
    };
    let ratio = rms_steps(1) / rms_steps(2);
    let expected = g / (1.0 - g);
    assert!((ratio / expected - 1.0).abs() < 0.15, "ratio {ratio} vs {expected}");
}

#[test]
fn statistics_need_enough_cycles() {
    let p = operating_point();
    let g = coupling_g(&p).unwrap().g;
    let mut plant = LinearPlant::new(&p, &NoiseConfig::none(), 1e-4).unwrap();
    let run = run_cycles(&mut plant, &DetectionModel::default(), &CycleConfig::new(2, g, 0.01), 10).unwrap();
    assert!(matches!(controller_statistics(&run), Err(Error::TooShort { got: 10, need: 100 })));
    let mut plant = LinearPlant::new(&p, &NoiseConfig::none(), 1e-4).unwrap();
    let run = run_cycles(&mut plant, &DetectionModel::default(), &CycleConfig::new(2, g, 0.01), 100).unwrap();
    let st = controller_statistics(&run).unwrap();
    assert_eq!(st.sigma_phi, 0.0);
    assert_eq!(st.theta_step_var, 0.0);
}

#[test]
fn excursion_policies() {
    let p = operating_point();
    let g = coupling_g(&p).unwrap().g;
    let det = DetectionModel::default();
    let mut cfg = CycleConfig::new(1, g, 0.05);
    cfg.theta_limit = 1e-3;
    let mut plant = LinearPlant::new(&p, &noise_for(&p, 1e-2, 5), 1e-4).unwrap();
    let run = run_cycles(&mut plant, &det, &cfg, 30).unwrap();
    assert!(!run.warnings.is_empty());
    assert!(run.warnings.iter().all(|w| w.theta.abs() > w.limit));
    assert_eq!(Error::from(run.warnings[0]).class(), "ExcursionWarning");

    cfg.excursion = ExcursionPolicy::Clamp;
    let mut plant = LinearPlant::new(&p, &noise_for(&p, 1e-2, 5), 1e-4).unwrap();
    let run = run_cycles(&mut plant, &det, &cfg, 30).unwrap();
    assert!(run.cycles.iter().all(|c| c.theta.abs() <= 1e-3));

    cfg.excursion = ExcursionPolicy::Abort;
    let mut plant = LinearPlant::new(&p, &noise_for(&p, 1e-2, 5), 1e-4).unwrap();
    assert!(matches!(run_cycles(&mut plant, &det, &cfg, 30), Err(Error::Excursion { .. })));
}

#[test]
fn linear_plant_tracks_nonlinear_plant() {
    // same step response through both plants, noise off
    let p = operating_point();
    let det = DetectionModel::default();
    let dtheta = 0.01;
    let mut traces = Vec::new();
    let mut nl = SlowFlowPlant::new(&p, &NoiseConfig::none(), None).unwrap();
    let mut lin = LinearPlant::new(&p, &NoiseConfig::none(), nl_step(&p)).unwrap();
    for plant in [&mut nl as &mut dyn Plant, &mut lin as &mut dyn Plant] {
        plant.attach_detector(&det).unwrap();
        plant.set_pump_phase(dtheta);
        let mut v = Vec::new();
        plant.advance_to(1.0, &mut |_s, truth| v.push(truth)).unwrap();
        traces.push(v);
    }
    assert_eq!(traces[0].len(), traces[1].len());
    for (a, b) in traces[0].iter().zip(&traces[1]) {
        assert!((a[0] - b[0]).abs() < 2e-4 * dtheta * 10.0 && (a[1] - b[1]).abs() < 2e-3 * dtheta);
    }
}

fn nl_step(p: &SystemParams) -> f64 {
    crate::slowflow::default_step(p)
}
