//! Pump-phase feedback holding the phase of mode 2, against the same run
//! with the pump phase frozen.

use sideband_osc::controller::{controller_statistics, on_off_variance_ratio, run_cycles, CycleConfig, SlowFlowPlant};
use sideband_osc::slowflow::{DetectionModel, NoiseConfig};
use sideband_osc::stability::phase_diffusion_rates;
use sideband_osc::{coupling_g, pump_map, stationary_state, PumpCalibration, SystemParams};

fn main() -> sideband_osc::Result<()> {
    let p = pump_map(379e-6, &PumpCalibration::reference(), &SystemParams::reference_device())?;
    let s = stationary_state(&p)?;
    let (u1, u2) = (s.r1 * s.r1, s.r2 * s.r2);
    let k = 1e-3 / phase_diffusion_rates(&p, u1, u2)?.minus;
    let noise = NoiseConfig { d1: k * u1, d2: k * u2, seed: 11 };
    let det = DetectionModel {
        sigma_det1: 1e-3 * s.r1,
        sigma_det2: 1e-3 * s.r2,
        seed: 12,
        ..DetectionModel::default()
    };
    let g = coupling_g(&p)?.g;
    let mut on_cfg = CycleConfig::new(2, g, 0.1);
    on_cfg.theta_limit = f64::INFINITY;
    let off_cfg = CycleConfig { feedback: false, ..on_cfg };

    let on = run_cycles(&mut SlowFlowPlant::new(&p, &noise, None)?, &det, &on_cfg, 150)?;
    let off = run_cycles(&mut SlowFlowPlant::new(&p, &noise, None)?, &det, &off_cfg, 150)?;
    let stats = controller_statistics(&on)?;
    println!("g = {g:.4}");
    println!("sigma_phi2 with feedback: {:.3e} rad", stats.sigma_phi);
    println!("sigma_phi2 without:       {:.3e} rad", controller_statistics(&off)?.sigma_phi);
    println!("variance reduction: x{:.0}", on_off_variance_ratio(&on, &off));
    println!(
        "pump-phase step variance {:.3e} rad^2 per cycle (from residuals: {:.3e})",
        stats.theta_step_var, stats.predicted_step_var
    );
    Ok(())
}
