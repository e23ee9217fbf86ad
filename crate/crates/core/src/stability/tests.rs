use super::*;
use crate::model::{pump_map, PumpCalibration};
use crate::slowflow::SlowFlowField;
use std::f64::consts::TAU;

fn device_at(current: f64, delta_hz: f64) -> SystemParams {
    pump_map(current, &PumpCalibration::reference(), &SystemParams::reference_device())
        .unwrap()
        .with_detuning(TAU * delta_hz)
}

/// Rates of `(zeta, -phi_+, r1 / r1_0)` and of `phi_-` from the nonlinear
/// field, at the point `x` around the fixed point.
fn nonlinear_rates(p: &SystemParams, x: [f64; 3]) -> ([f64; 3], f64) {
    let d = derive_constants(p).unwrap();
    let s = stationary_state(p).unwrap();
    let r1 = s.r1 * (1.0 + x[2]);
    let r2 = (d.zeta0 + x[0]) * r1;
    let plus = s.phi_plus - x[1];
    let u = [Complex64::from_polar(r1, 0.3 * plus), Complex64::from_polar(r2, 0.7 * plus)];
    let du = SlowFlowField::new(p).eval(u);
    let r1dot = (du[0] * u[0].conj()).re / r1;
    let r2dot = (du[1] * u[1].conj()).re / r2;
    let w1 = (du[0] / u[0]).im - s.delta_omega;
    let w2 = (du[1] / u[1]).im + s.delta_omega;
    ([(r2dot * r1 - r2 * r1dot) / (r1 * r1), -(w1 + w2), r1dot / s.r1], w1 - w2)
}

fn grid() -> Vec<SystemParams> {
    let mut v = Vec::new();
    for &hz in &[0.0, 300.0, 1000.0] {
        for &i in &[189e-6, 379e-6] {
            v.push(device_at(i, hz));
        }
    }
    v
}

#[test]
fn jacobian_matches_finite_differences() {
    for p in grid() {
        let j = build_jacobian(&p).unwrap().lambda_mat;
        let phi = phi_minus_vector(&p).unwrap();
        let scale = eigen::mat_norm(&j);
        let h = 1e-6;
        for col in 0..3 {
            let mut xp = [0.0; 3];
            let mut xm = [0.0; 3];
            xp[col] = h;
            xm[col] = -h;
            let (fp, gp) = nonlinear_rates(&p, xp);
            let (fm, gm) = nonlinear_rates(&p, xm);
            for row in 0..3 {
                let fd = (fp[row] - fm[row]) / (2.0 * h);
                let tol = 1e-6 * j[row][col].abs().max(1e-3 * scale);
                assert!((fd - j[row][col]).abs() < tol, "L{}{}: fd {fd} vs {}", row + 1, col + 1, j[row][col]);
            }
            let fd = (gp - gm) / (2.0 * h);
            assert!((fd - phi[col]).abs() < 1e-6 * phi[col].abs().max(1e-3 * scale), "Phi{}", col + 1);
        }
        let (f0, g0) = nonlinear_rates(&p, [0.0; 3]);
        assert!(f0.iter().all(|v| v.abs() < 1e-9 * scale) && g0.abs() < 1e-9 * scale);
    }
}

#[test]
fn structural_entries() {
    for p in grid() {
        let d = derive_constants(&p).unwrap();
        let j = build_jacobian(&p).unwrap().lambda_mat;
        let g = p.gamma1_damp + p.gamma2_damp;
        assert_eq!(j[0][2], 0.0);
        assert_eq!(j[2][2], 0.0);
        assert_eq!(j[0][0], -g);
        assert_eq!(j[1][1], -g);
        let excess = p.delta_f + d.omega_c.unwrap();
        assert!((j[1][2] + 2.0 * excess).abs() < 1e-10 * excess);
        assert_eq!(phi_minus_vector(&p).unwrap()[1], p.gamma1_damp - p.gamma2_damp);
    }
}

#[test]
fn onset_limit_of_amplitude_terms() {
    let p = device_at(379e-6, 0.0);
    let wc = derive_constants(&p).unwrap().omega_c.unwrap();
    let at = p.with_detuning(-wc * (1.0 - 1e-12));
    let j = build_jacobian(&at).unwrap().lambda_mat;
    let phi = phi_minus_vector(&at).unwrap();
    let scale = eigen::mat_norm(&j);
    assert!(j[1][2].abs() < 1e-10 * scale);
    assert!(phi[2].abs() < 1e-10 * scale);
}

#[test]
fn eigensystem_identities() {
    for p in grid() {
        let jm = build_jacobian(&p).unwrap().lambda_mat;
        let es = eigensystem(&Jacobian3 { lambda_mat: jm }).unwrap();
        let n = eigen::mat_norm(&jm);
        for i in 0..3 {
            assert!(char_residual(&jm, es.lambdas[i]).norm() < 1e-8 * n * n * n);
            for k in 0..3 {
                let bo = dot(&es.left[i], &es.right[k]);
                let want = if i == k { 1.0 } else { 0.0 };
                assert!((bo - want).norm() < 1e-10, "biorthonormality {i}{k}: {bo}");
                let ly: [Complex64; 3] = std::array::from_fn(|r| dot_real(&jm[r], &es.right[k]));
                let proj = dot(&es.left[i], &ly);
                let want = if i == k { es.lambdas[i] } else { Complex64::new(0.0, 0.0) };
                assert!((proj - want).norm() < 1e-8 * n);
            }
        }
        assert!(es.is_stable());
        assert_eq!(es.lambdas[2].im, 0.0);
        assert!(es.lambdas[0].im > 0.0 && es.lambdas[1] == es.lambdas[0].conj());
        // slow root sets the relaxation time
        assert_eq!(es.relaxation_time(), -1.0 / es.lambdas[2].re);
    }
}

#[test]
fn equal_damping_gives_real_pair_at_onset() {
    let mut p = SystemParams::reference_device();
    p.gamma2_damp = p.gamma1_damp;
    let p = p.with_xi(2.0);
    let b = bifurcation_eigs(&p).unwrap();
    assert_eq!(b.lambda12.im, 0.0);
    assert_eq!(phi_minus_vector(&p.with_detuning(0.0)).unwrap()[1], 0.0);
}

#[test]
fn spectrum_near_onset_matches_analytic_limit() {
    for &i in &[189e-6, 379e-6] {
        let p = device_at(i, 0.0);
        let wc = derive_constants(&p).unwrap().omega_c.unwrap();
        let b = bifurcation_eigs(&p).unwrap();
        let es = eigensystem(&build_jacobian(&p.with_detuning(-wc * (1.0 - 1e-3))).unwrap()).unwrap();
        assert!((es.lambdas[0] - b.lambda12).norm() < 0.01 * b.lambda12.norm());
        let l3 = es.lambdas[2].re;
        let predicted = b.lambda3_slope * wc * 1e-3;
        assert!((l3 / predicted - 1.0).abs() < 1e-2, "{l3} vs {predicted}");
    }
}

#[test]
fn spectral_c_equals_detuning_slope_form() {
    for p in grid() {
        let sc = compute_c_spectral(&p).unwrap();
        let c = coupling_g(&p).unwrap().c;
        assert!((sc.c - c).abs() < 1e-6, "{} vs {c}", sc.c);
        assert!(sc.imag_residual.abs() < 1e-9);
        let scaled = compute_c_spectral(&p.with_pump_scale(1.3)).unwrap();
        assert!((scaled.c - sc.c).abs() < 1e-9);
    }
}

#[test]
fn step_response_split_and_limits() {
    let p = device_at(379e-6, 1000.0);
    let dtheta = 1f64.to_radians();
    let times: Vec<f64> = (0..=200).map(|k| k as f64 * 0.01).collect();
    let r = step_response(&p, dtheta, &times).unwrap();
    assert!(((r.settled_dphi1 + r.settled_dphi2) - dtheta).abs() <= 1e-9 * dtheta);
    let g = coupling_g(&p).unwrap().g;
    assert!((r.settled_dphi2 / dtheta - g).abs() < 1e-9);
    assert!((r.settled_dphi2 / dtheta - 0.94).abs() < 0.01);
    // phases start unchanged, amplitudes end unchanged
    assert!(r.dphi1[0].abs() < 1e-15 && r.dphi2[0].abs() < 1e-15);
    let k_end = r.t.len() - 1;
    let decay = (-r.t[k_end] / r.t_relax).exp();
    assert!(r.dr1[k_end].abs() < 10.0 * decay * dtheta * stationary_state(&p).unwrap().r1);
    assert!((r.dphi2[k_end] - r.settled_dphi2).abs() < 10.0 * decay * dtheta);

    let zero = step_response(&p, 0.0, &times).unwrap();
    assert!(zero.dphi1.iter().chain(&zero.dphi2).chain(&zero.dr1).chain(&zero.dr2).all(|&v| v == 0.0));
    assert!(matches!(step_response(&p, 0.2, &times), Err(Error::NonlinearRegime { .. })));
}

#[test]
fn detuning_pulse_shifts_phases_by_area() {
    let p = device_at(379e-6, 1000.0);
    let es = eigensystem(&build_jacobian(&p).unwrap()).unwrap();
    let tr = es.relaxation_time();
    let c = coupling_g(&p).unwrap().c;
    let mut errors = Vec::new();
    for &rise in &[4.0 * tr, 8.0 * tr, 16.0 * tr] {
        let pulse = DetuningPulse {
            amplitude: 0.05 / (3.0 * tr),
            rise,
            hold: rise,
        };
        let t_end = pulse.duration() + 30.0 * tr;
        let r = adiabatic_pulse_response(&p, &pulse, t_end, 400).unwrap();
        let a = pulse.area();
        assert!((r.settled_dphi_plus + a).abs() < 1e-6 * a);
        assert!((r.settled_dphi_minus + c * a).abs() < 1e-6 * a, "{} vs {}", r.settled_dphi_minus, -c * a);
        assert!(r.x_residual < 1e-6 * a);
        errors.push(r.tracking_error);
    }
    // lag of the quasi-static picture shrinks with the ramp slope
    assert!(errors[1] < 0.6 * errors[0] && errors[2] < 0.6 * errors[1], "{errors:?}");
    let sharp = DetuningPulse {
        amplitude: 1.0,
        rise: 0.1 * tr,
        hold: tr,
    };
    assert!(matches!(
        adiabatic_pulse_response(&p, &sharp, 10.0 * tr, 10),
        Err(Error::NotAdiabatic(_))
    ));
}

#[test]
fn pulse_area_bookkeeping() {
    let pulse = DetuningPulse {
        amplitude: 2.0,
        rise: 0.3,
        hold: 0.5,
    };
    let n = 200_000;
    let h = pulse.duration() / n as f64;
    let mid: f64 = (0..n).map(|k| pulse.value((k as f64 + 0.5) * h) * h).sum();
    assert!((mid - pulse.area()).abs() < 1e-9);
    assert!((pulse.integral(pulse.duration()) - pulse.area()).abs() < 1e-15);
    let m = 81_000;
    let partial: f64 = (0..m).map(|k| pulse.value((k as f64 + 0.5) * h) * h).sum();
    assert!((pulse.integral(m as f64 * h) - partial).abs() < 1e-9);
}


#[test]
fn diffusion_gain_of_tangential_kicks() {
    // a phase kick on one mode is shared through the pump-phase channel with
    // the same split as a pump-phase step
    let p = device_at(379e-6, 0.0);
    let s = stationary_state(&p).unwrap();
    let g = coupling_g(&p).unwrap().g;
    let only1 = phase_diffusion_rates(&p, 1.0, 0.0).unwrap();
    let radial: f64 = {
        let es = eigensystem(&build_jacobian(&p).unwrap()).unwrap();
        let phi = phi_minus_vector(&p).unwrap();
        let k = noise_kicks(&p).unwrap()[1].0;
        let v: Complex64 = (0..3)
            .map(|n| dot_real(&phi, &es.right[n]) * dot_real(&k, &es.left[n]) / es.lambdas[n])
            .sum();
        v.re * v.re
    };
    let tangential = (2.0 * g / s.r1).powi(2);
    assert!((only1.minus - tangential - radial).abs() < 1e-9 * only1.minus);
    let only2 = phase_diffusion_rates(&p, 0.0, 1.0).unwrap();
    assert!(only2.minus >= (2.0 * (1.0 - g) / s.r2).powi(2) * (1.0 - 1e-12));
}

#[test]
fn nonlinear_step_overlays_linear_response() {
    let p = device_at(379e-6, 1000.0);
    let dtheta = 1e-3;
    let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.02).collect();
    let lin = step_response(&p, dtheta, &times).unwrap();
    let nl = nonlinear_step_response(&p, dtheta, &times, crate::slowflow::default_step(&p)).unwrap();
    for k in 0..times.len() {
        assert!((nl.dphi1[k] - lin.dphi1[k]).abs() < 1e-2 * dtheta, "t = {}", times[k]);
        assert!((nl.dphi2[k] - lin.dphi2[k]).abs() < 1e-2 * dtheta, "t = {}", times[k]);
    }
    let c_nl = (nl.settled_dphi1 - nl.settled_dphi2) / dtheta;
    let c = coupling_g(&p).unwrap().c;
    assert!((c_nl - c).abs() < 1e-3, "{c_nl} vs {c}");
}
