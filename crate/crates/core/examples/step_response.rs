//! Eigenvalues of the linearized dynamics and the response of both phases
//! to a one-degree pump-phase step, linear against the full slow flow.

use std::f64::consts::TAU;

use sideband_osc::slowflow::default_step;
use sideband_osc::stability::{build_jacobian, nonlinear_step_response, step_response};
use sideband_osc::{pump_map, PumpCalibration, SystemParams};

fn main() -> sideband_osc::Result<()> {
    let p = pump_map(379e-6, &PumpCalibration::reference(), &SystemParams::reference_device())?
        .with_detuning(TAU * 1000.0);
    let es = build_jacobian(&p)?.eigensystem()?;
    for (k, l) in es.lambdas.iter().enumerate() {
        println!("lambda{} = {:.3} {:+.3}i  1/s", k + 1, l.re, l.im);
    }
    let dtheta = 1f64.to_radians();
    let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.5 * es.relaxation_time()).collect();
    let lin = step_response(&p, dtheta, &times)?;
    let nl = nonlinear_step_response(&p, dtheta, &times, default_step(&p))?;
    println!("{:>8} {:>10} {:>10} {:>10} {:>10}", "t (s)", "dphi1", "dphi1 nl", "dphi2", "dphi2 nl");
    for k in 0..times.len() {
        println!(
            "{:>8.4} {:>10.3e} {:>10.3e} {:>10.3e} {:>10.3e}",
            times[k], lin.dphi1[k], nl.dphi1[k], lin.dphi2[k], nl.dphi2[k]
        );
    }
    println!(
        "settled split: {:.2}% / {:.2}%",
        100.0 * lin.settled_dphi1 / dtheta,
        100.0 * lin.settled_dphi2 / dtheta
    );
    Ok(())
}
