use num_complex::Complex64;

use sideband_osc::slowflow::{default_step, integrate_slowflow_strided, NoiseConfig, PumpSchedule};
use sideband_osc::stability::build_jacobian;
use sideband_osc::{derive_constants, pump_map, stationary_state, PumpCalibration, SystemParams};

#[test]
fn perturbed_state_relaxes_to_the_fixed_point() {
    let cal = PumpCalibration::reference();
    for (current, delta_hz) in [(189e-6, 0.0), (379e-6, 300.0)] {
        let p = pump_map(current, &cal, &SystemParams::reference_device())
            .unwrap()
            .with_detuning(std::f64::consts::TAU * delta_hz)
            .with_pump_phase(0.4);
        let s = stationary_state(&p).unwrap();
        let theta0 = derive_constants(&p).unwrap().theta0.unwrap();
        let t_r = build_jacobian(&p).unwrap().eigensystem().unwrap().relaxation_time();
        let init = [Complex64::from_polar(1.3 * s.r1, 1.0), Complex64::from_polar(0.7 * s.r2, -0.2)];
        let dt = default_step(&p);
        let tr = integrate_slowflow_strided(&p, init, &PumpSchedule::constant(0.4), &NoiseConfig::none(), 30.0 * t_r, dt, 1000)
            .unwrap();
        let [u1, u2] = tr.last_state().unwrap();
        assert!((u1.norm() / s.r1 - 1.0).abs() < 1e-6, "r1 {}", u1.norm() / s.r1);
        assert!((u2.norm() / s.r2 - 1.0).abs() < 1e-6, "r2 {}", u2.norm() / s.r2);
        // the frames rotate oppositely, so the phase sum locks to theta_F - Theta0
        let lag = (u1 * u2).arg() - (0.4 - theta0);
        let wrapped = (lag + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
        assert!(wrapped.abs() < 1e-6, "phase sum off by {wrapped}");
    }
}
