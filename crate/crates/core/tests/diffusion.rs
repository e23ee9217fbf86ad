use sideband_osc::analysis::{ensemble_diffusion, linear_fit};
use sideband_osc::controller::{LinearPlant, Plant};
use sideband_osc::slowflow::{DetectionModel, NoiseConfig, PhaseRecord};
use sideband_osc::stability::phase_diffusion_rates;
use sideband_osc::{pump_map, stationary_state, PumpCalibration, SystemParams};

fn operating_point() -> SystemParams {
    pump_map(379e-6, &PumpCalibration::reference(), &SystemParams::reference_device()).unwrap()
}

fn noise(p: &SystemParams, rate: f64, seed: u64) -> NoiseConfig {
    let s = stationary_state(p).unwrap();
    NoiseConfig {
        d1: rate * s.r1 * s.r1,
        d2: rate * s.r2 * s.r2,
        seed,
    }
}

/// Free-running linearized plant read at the detector ticks.
fn free_run(p: &SystemParams, rate: f64, seed: u64, t_end: f64) -> PhaseRecord {
    let mut plant = LinearPlant::new(p, &noise(p, rate, seed), 1e-4).unwrap();
    plant.attach_detector(&DetectionModel::default()).unwrap();
    let mut rec = PhaseRecord::default();
    plant
        .advance_to(t_end, &mut |s, truth| {
            rec.t.push(s.t);
            rec.phi1.push(truth[0]);
            rec.phi2.push(truth[1]);
            rec.amp1.push(s.amp[0]);
            rec.amp2.push(s.amp[1]);
        })
        .unwrap();
    rec
}

#[test]
fn linear_plant_diffuses_at_the_linearized_rate() {
    let p = operating_point();
    let rate = 1e-6;
    let records: Vec<PhaseRecord> = (0..2000).map(|seed| free_run(&p, rate, seed, 5.0)).collect();
    let ens = ensemble_diffusion(&records).unwrap();
    let start = ens.t.iter().position(|&t| t > 1.0).unwrap();
    let fit = linear_fit(&ens.t[start..], &ens.var_minus[start..]).unwrap();
    let n = noise(&p, rate, 0);
    let predicted = phase_diffusion_rates(&p, n.d1, n.d2).unwrap().minus;
    assert!((fit.slope / predicted - 1.0).abs() < 0.1, "{} vs {predicted}", fit.slope);
    assert!(ens.rho < -0.95);
}

#[test]
fn ensemble_variance_error_shrinks_as_inverse_sqrt_n() {
    let p = operating_point();
    let sizes = [16usize, 32, 64, 128];
    let batches = 24;
    let mut seed = 0u64;
    let mut log_n = Vec::new();
    let mut log_spread = Vec::new();
    for &n in &sizes {
        let mut estimates = Vec::new();
        for _ in 0..batches {
            let recs: Vec<PhaseRecord> = (0..n)
                .map(|_| {
                    seed += 1;
                    free_run(&p, 1e-6, seed, 1.0)
                })
                .collect();
            let ens = ensemble_diffusion(&recs).unwrap();
            estimates.push(*ens.var_minus.last().unwrap());
        }
        let m = estimates.iter().sum::<f64>() / batches as f64;
        let sd = (estimates.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (batches - 1) as f64).sqrt();
        log_n.push((n as f64).ln());
        log_spread.push((sd / m).ln());
    }
    let fit = linear_fit(&log_n, &log_spread).unwrap();
    assert!((fit.slope + 0.5).abs() < 0.2, "log-log slope {}", fit.slope);
}
