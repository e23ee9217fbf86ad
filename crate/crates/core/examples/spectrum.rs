//! Welch spectrum of the mode-1 complex amplitude of a noisy trajectory, in
//! the frame rotating at the self-oscillation frequency.

use num_complex::Complex64;
use sideband_osc::analysis::{spectrum, Signal, SpectrumConfig, Window};
use sideband_osc::slowflow::{default_step, integrate_slowflow_strided, stationary_amplitudes, NoiseConfig, PumpSchedule};
use sideband_osc::{pump_map, stationary_state, PumpCalibration, SystemParams};

fn main() -> sideband_osc::Result<()> {
    let p = pump_map(379e-6, &PumpCalibration::reference(), &SystemParams::reference_device())?;
    let s = stationary_state(&p)?;
    let noise = NoiseConfig { d1: 1e-2 * s.r1 * s.r1, d2: 1e-2 * s.r2 * s.r2, seed: 3 };
    let dt = default_step(&p);
    let stride = 50;
    let tr = integrate_slowflow_strided(&p, stationary_amplitudes(&p)?, &PumpSchedule::constant(0.0), &noise, 60.0, dt, stride)?;
    let z: Vec<Complex64> = tr
        .t
        .iter()
        .zip(&tr.u1)
        .map(|(t, u)| u * Complex64::from_polar(1.0, -s.delta_omega * t))
        .collect();
    let cfg = SpectrumConfig { segment_len: 1 << 12, overlap: 0.5, window: Window::Hann };
    let est = spectrum(&tr.t, Signal::Complex(&z), &cfg)?;
    println!("segments: {}, resolution {:.4} Hz", est.n_segments, est.rbw);
    println!("peak at {:.4} Hz, half-power width {:.4} Hz", est.peak_frequency(), est.linewidth());
    println!("Parseval ratio {:.4} (ok: {})", est.parseval_ratio, est.parseval_ok());
    Ok(())
}
