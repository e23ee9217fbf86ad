//! Dispersive coupling constant from noisy frequency-shift data.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sideband_osc::analysis::{fit_dispersive_coupling, ModeScale, REFERENCE_DISPERSIVE_GAMMA};
use sideband_osc::REFERENCE_MASS_SCALE;

fn main() -> sideband_osc::Result<()> {
    let mode = ModeScale {
        mass: REFERENCE_MASS_SCALE,
        omega: std::f64::consts::TAU * 47_030.7,
    };
    // frequency shift (Hz) per squared amplitude of the other mode
    let slope = REFERENCE_DISPERSIVE_GAMMA / (4.0 * mode.mass * mode.omega * std::f64::consts::TAU);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let jitter = Normal::new(0.0, 0.02).unwrap();
    let points: Vec<(f64, f64)> = (1..=8)
        .map(|k| {
            let a2 = k as f64 * 1e-17;
            (a2, slope * a2 * (1.0 + jitter.sample(&mut rng)))
        })
        .collect();
    let fit = fit_dispersive_coupling(&points, Some(mode))?;
    let gamma = fit.gamma.unwrap();
    println!("slope {:.4e} Hz/m^2, residual {:.2e} Hz", fit.slope, fit.residual_rms);
    println!(
        "gamma = {gamma:.4e} N/m^3 ({:+.2}% from {REFERENCE_DISPERSIVE_GAMMA:.3e})",
        100.0 * (gamma / REFERENCE_DISPERSIVE_GAMMA - 1.0)
    );
    Ok(())
}
