//! Slowest eigenvalue against pump current at zero detuning.

use sideband_osc::analysis::sweep_lambda3_vs_pump;
use sideband_osc::{PumpCalibration, SystemParams};

fn main() -> sideband_osc::Result<()> {
    let currents: Vec<f64> = (0..=12).map(|k| 100e-6 + 25e-6 * k as f64).collect();
    let curve = sweep_lambda3_vs_pump(&SystemParams::reference_device(), &PumpCalibration::reference(), &currents, 0.0)?;
    for pt in &curve.points {
        match (pt.lambda3, &pt.error) {
            (Some(l), _) => println!("{:>6.0} uA  lambda3 = {l:8.3} 1/s", pt.current * 1e6),
            (None, Some(e)) => println!("{:>6.0} uA  {e}", pt.current * 1e6),
            (None, None) => unreachable!(),
        }
    }
    Ok(())
}
