//! Stationary amplitudes across the pump detuning, with the onset of
//! self-oscillation and the bistable window.

use std::f64::consts::TAU;

use sideband_osc::analysis::sweep_amplitude_vs_detuning;
use sideband_osc::{derive_constants, pump_map, PumpCalibration, SystemParams};

fn main() -> sideband_osc::Result<()> {
    let p = pump_map(189e-6, &PumpCalibration::reference(), &SystemParams::reference_device())?;
    let wc = derive_constants(&p)?.require_omega_c()?;
    let grid: Vec<f64> = (0..=16).map(|k| wc * (-1.6 + 0.2 * k as f64)).collect();
    let curve = sweep_amplitude_vs_detuning(&p, &grid)?;
    let bistable = curve.bistable();
    println!("{:>12} {:>12} {:>12} {:>9}", "delta (Hz)", "r1^2", "r2^2", "bistable");
    for k in 0..grid.len() {
        println!(
            "{:>12.2} {:>12.4e} {:>12.4e} {:>9}",
            grid[k] / TAU,
            curve.r1_sq[k],
            curve.r2_sq[k],
            bistable[k]
        );
    }
    println!("omega_c = {:.2} Hz", wc / TAU);
    Ok(())
}
