//! Derived constants, stationary state and phase split at the two reference
//! pump currents.

use std::f64::consts::TAU;

use sideband_osc::{coupling_g, derive_constants, pump_map, stationary_state, PumpCalibration, SystemParams};

fn main() -> sideband_osc::Result<()> {
    let cal = PumpCalibration::reference();
    for current in [189e-6, 379e-6] {
        let p = pump_map(current, &cal, &SystemParams::reference_device())?;
        let d = derive_constants(&p)?;
        let s = stationary_state(&p)?;
        let split = coupling_g(&p)?;
        println!("I = {:.0} uA", current * 1e6);
        println!("  xi = {:.4}, omega_c = {:.2} Hz, zeta0 = {:.4}", d.xi, d.require_omega_c()? / TAU, d.zeta0);
        println!("  r1 = {:.4e} m, r2 = {:.4e} m, delta_omega = {:.3} Hz", s.r1, s.r2, s.delta_omega / TAU);
        println!("  C = {:.5}, g = {:.4}", split.c, split.g);
    }
    Ok(())
}
