//! Full second-order equations of a small toy device against the stationary
//! state of its slow flow.

use sideband_osc::slowflow::{full_model_oracle, stationary_amplitudes, FullModelRun};
use sideband_osc::{derive_constants, stationary_state, FullModelParams};

fn main() -> sideband_osc::Result<()> {
    let fp = FullModelParams::toy();
    let wc = derive_constants(&fp.slow_params(0.0, 0.0))?.require_omega_c()?;
    for ratio in [-0.5, 0.0, 0.5] {
        let delta_f = ratio * wc;
        let p = fp.slow_params(delta_f, 0.3);
        let run = FullModelRun {
            params: fp,
            omega_f: fp.omega1 + fp.omega2 + delta_f,
            theta_f: 0.3,
            init: stationary_amplitudes(&p)?,
            t_end: 4000.0,
            dt: 0.02,
            average_periods: 4,
        };
        let tr = full_model_oracle(&run)?;
        let s = stationary_state(&p)?;
        let [u1, u2] = tr.last_state().expect("non-empty run");
        println!(
            "delta/omega_c = {ratio:+.1}: r1 {:+.3}%, r2 {:+.3}% from the slow flow",
            100.0 * (u1.norm() / s.r1 - 1.0),
            100.0 * (u2.norm() / s.r2 - 1.0)
        );
    }
    Ok(())
}
