use std::f64::consts::TAU;

use num_complex::Complex64;
use proptest::prelude::*;

use sideband_osc::analysis::{linear_fit, phase_diffusion_stats, spectrum, Signal, SpectrumConfig, Window};
use sideband_osc::controller::{next_theta_mode1, next_theta_mode2, G_MARGIN};
use sideband_osc::slowflow::PhaseRecord;
use sideband_osc::stability::{build_jacobian, compute_c_spectral, dot, step_response};
use sideband_osc::{coupling_g, derive_constants, pump_map, PumpCalibration, SystemParams};

/// Operating point from a current (uA) and a detuning in units of omega_c.
fn operating_point(current_ua: f64, delta_over_wc: f64) -> SystemParams {
    let p = pump_map(current_ua * 1e-6, &PumpCalibration::reference(), &SystemParams::reference_device()).unwrap();
    let wc = derive_constants(&p).unwrap().omega_c.unwrap();
    p.with_detuning(delta_over_wc * wc)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigenvectors_are_biorthonormal(i in 150.0..400.0f64, d in -0.9..3.0f64) {
        let p = operating_point(i, d);
        let es = build_jacobian(&p).unwrap().eigensystem();
        prop_assume!(es.is_ok());
        let es = es.unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let want = if a == b { 1.0 } else { 0.0 };
                prop_assert!((dot(&es.left[a], &es.right[b]) - Complex64::new(want, 0.0)).norm() < 1e-9);
            }
        }
        prop_assert!(es.is_stable());
    }

    #[test]
    fn settled_step_sums_to_pump_step(i in 150.0..400.0f64, d in -0.5..3.0f64, dtheta in -0.1..0.1f64) {
        let p = operating_point(i, d);
        let r = step_response(&p, dtheta, &[0.0]).unwrap();
        prop_assert!((r.settled_dphi1 + r.settled_dphi2 - dtheta).abs() <= 1e-9 * dtheta.abs().max(1e-300));
        let g = coupling_g(&p).unwrap().g;
        prop_assert!((r.settled_dphi2 - g * dtheta).abs() <= 1e-6 * dtheta.abs() + 1e-300);
    }

    #[test]
    fn split_is_independent_of_pump_scale(i in 150.0..400.0f64, scale in 1.0..3.0f64, d in 0.0..2.0f64) {
        let p = operating_point(i, d);
        let a = compute_c_spectral(&p).unwrap().c;
        let b = compute_c_spectral(&p.with_pump_scale(scale)).unwrap().c;
        prop_assert!((a - b).abs() < 1e-8);
        prop_assert!((coupling_g(&p).unwrap().g - 0.5 * (1.0 - a)).abs() < 1e-6);
    }

    #[test]
    fn control_laws_hold_theta_when_observed_phase_equals_it(
        g in G_MARGIN..(1.0 - G_MARGIN), theta in -3.0..3.0f64
    ) {
        prop_assert!((next_theta_mode2(g, theta, theta) - theta).abs() <= 1e-12 * (1.0 + theta.abs()) / g);
        prop_assert!((next_theta_mode1(g, theta, theta) - theta).abs() <= 1e-12 * (1.0 + theta.abs()) / (1.0 - g));
    }

    #[test]
    fn diffusion_stats_are_bounded(steps in prop::collection::vec(-1.0..1.0f64, 1000..1500), mix in -1.0..1.0f64) {
        let n = steps.len();
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        for k in 1..n {
            a[k] = a[k - 1] + steps[k];
            b[k] = b[k - 1] + mix * steps[k] + (1.0 - mix.abs()) * steps[n - k];
        }
        let rec = PhaseRecord {
            t: (0..n).map(|k| k as f64 * 1e-3).collect(),
            phi1: a,
            phi2: b,
            amp1: vec![1.0; n],
            amp2: vec![1.0; n],
            unwrap_flags: Vec::new(),
        };
        let s = phase_diffusion_stats(&rec, 12).unwrap();
        prop_assert!((-1.0..=1.0).contains(&s.rho));
        for v in s.var1.iter().chain(&s.var2).chain(&s.var_plus).chain(&s.var_minus) {
            prop_assert!(*v >= 0.0);
        }
    }

    #[test]
    fn line_fit_is_exact_on_lines(slope in -1e3..1e3f64, icpt in -1e3..1e3f64, n in 3usize..50) {
        let x: Vec<f64> = (0..n).map(|k| k as f64 * 0.7 - 3.0).collect();
        let y: Vec<f64> = x.iter().map(|v| slope * v + icpt).collect();
        let f = linear_fit(&x, &y).unwrap();
        prop_assert!((f.slope - slope).abs() <= 1e-9 * (1.0 + slope.abs() + icpt.abs()));
        prop_assert!((f.intercept - icpt).abs() <= 1e-9 * (1.0 + slope.abs() + icpt.abs()));
    }

    #[test]
    fn rectangular_periodogram_obeys_parseval(xs in prop::collection::vec(-5.0..5.0f64, 512), f in 1.0..100.0f64) {
        let t: Vec<f64> = (0..xs.len()).map(|k| k as f64 * 1e-3).collect();
        let x: Vec<f64> = xs.iter().zip(&t).map(|(v, t)| v + (TAU * f * t).sin()).collect();
        let cfg = SpectrumConfig { segment_len: 128, overlap: 0.0, window: Window::Rect };
        let real = spectrum(&t, Signal::Real(&x), &cfg).unwrap();
        prop_assert!((real.parseval_ratio - 1.0).abs() < 1e-9);
        let z: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.5 * v)).collect();
        let cplx = spectrum(&t, Signal::Complex(&z), &cfg).unwrap();
        prop_assert!((cplx.parseval_ratio - 1.0).abs() < 1e-9);
    }
}
