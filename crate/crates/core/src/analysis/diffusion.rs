use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::slowflow::PhaseRecord;

/// Minimum record length for diffusion statistics.
pub const MIN_RECORD_LEN: usize = 1000;

/// Lag-dependent increment variances of a single record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionStats {
    /// Lags (s).
    pub lag: Vec<f64>,
    pub var1: Vec<f64>,
    pub var2: Vec<f64>,
    pub var_plus: Vec<f64>,
    pub var_minus: Vec<f64>,
    /// Correlation of `phi1(t) - phi1(0)` with `phi2(t) - phi2(0)` over the record.
    pub rho: f64,
}

fn variance_at_lag(x: &[f64], k: usize) -> f64 {
    let n = x.len() - k;
    let d: Vec<f64> = (0..n).map(|i| x[i + k] - x[i]).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
    }
}

/// Increment variances at `n_lags` lags spaced roughly logarithmically up to
/// a tenth of the record, plus the anti-correlation coefficient.
pub fn phase_diffusion_stats(rec: &PhaseRecord, n_lags: usize) -> Result<DiffusionStats> {
    let n = rec.len();
    if n < MIN_RECORD_LEN {
        return Err(Error::TooShort { got: n, need: MIN_RECORD_LEN });
    }
    let dt = (rec.t[n - 1] - rec.t[0]) / (n - 1) as f64;
    let max_lag = n / 10;
    let mut lags: Vec<usize> = (0..n_lags.max(1))
        .map(|i| {
            let f = if n_lags <= 1 { 1.0 } else { i as f64 / (n_lags - 1) as f64 };
            (max_lag as f64).powf(f).round() as usize
        })
        .collect();
    lags.dedup();
    let plus: Vec<f64> = rec.phi1.iter().zip(&rec.phi2).map(|(a, b)| a + b).collect();
    let minus: Vec<f64> = rec.phi1.iter().zip(&rec.phi2).map(|(a, b)| a - b).collect();
    let inc1: Vec<f64> = rec.phi1.iter().map(|v| v - rec.phi1[0]).collect();
    let inc2: Vec<f64> = rec.phi2.iter().map(|v| v - rec.phi2[0]).collect();
    Ok(DiffusionStats {
        lag: lags.iter().map(|&k| k as f64 * dt).collect(),
        var1: lags.iter().map(|&k| variance_at_lag(&rec.phi1, k)).collect(),
        var2: lags.iter().map(|&k| variance_at_lag(&rec.phi2, k)).collect(),
        var_plus: lags.iter().map(|&k| variance_at_lag(&plus, k)).collect(),
        var_minus: lags.iter().map(|&k| variance_at_lag(&minus, k)).collect(),
        rho: correlation(&inc1, &inc2),
    })
}

/// Ensemble statistics of `phi(t) - phi(0)` over independent realizations
/// sharing one time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleDiffusion {
    pub t: Vec<f64>,
    pub var1: Vec<f64>,
    pub var2: Vec<f64>,
    pub var_plus: Vec<f64>,
    pub var_minus: Vec<f64>,
    /// Correlation of the final increments across realizations.
    pub rho: f64,
}

pub fn ensemble_diffusion(records: &[PhaseRecord]) -> Result<EnsembleDiffusion> {
    if records.len() < 2 {
        return Err(Error::TooShort { got: records.len(), need: 2 });
    }
    let n = records.iter().map(|r| r.len()).min().unwrap_or(0);
    if n < 2 {
        return Err(Error::TooShort { got: n, need: 2 });
    }
    let m = records.len() as f64;
    let var = |f: &dyn Fn(&PhaseRecord, usize) -> f64, k: usize| {
        let vals: Vec<f64> = records.iter().map(|r| f(r, k) - f(r, 0)).collect();
        let mean = vals.iter().sum::<f64>() / m;
        vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0)
    };
    let p1 = |r: &PhaseRecord, k: usize| r.phi1[k];
    let p2 = |r: &PhaseRecord, k: usize| r.phi2[k];
    let pp = |r: &PhaseRecord, k: usize| r.phi1[k] + r.phi2[k];
    let pm = |r: &PhaseRecord, k: usize| r.phi1[k] - r.phi2[k];
    let fin1: Vec<f64> = records.iter().map(|r| r.phi1[n - 1] - r.phi1[0]).collect();
    let fin2: Vec<f64> = records.iter().map(|r| r.phi2[n - 1] - r.phi2[0]).collect();
    Ok(EnsembleDiffusion {
        t: records[0].t[..n].iter().map(|t| t - records[0].t[0]).collect(),
        var1: (0..n).map(|k| var(&p1, k)).collect(),
        var2: (0..n).map(|k| var(&p2, k)).collect(),
        var_plus: (0..n).map(|k| var(&pp, k)).collect(),
        var_minus: (0..n).map(|k| var(&pm, k)).collect(),
        rho: correlation(&fin1, &fin2),
    })
}

/// Ordinary least squares `y = slope x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len().min(y.len());
    if n < 2 {
        return Err(Error::DegenerateData("need at least two points".into()));
    }
    let nf = n as f64;
    let mx = x[..n].iter().sum::<f64>() / nf;
    let my = y[..n].iter().sum::<f64>() / nf;
    let sxx: f64 = x[..n].iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateData("all abscissae equal".into()));
    }
    let sxy: f64 = x[..n].iter().zip(&y[..n]).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y[..n].iter().map(|v| (v - my) * (v - my)).sum();
    let ss_res: f64 = x[..n].iter().zip(&y[..n]).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(LinearFit { slope, intercept, r2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(phi1: Vec<f64>, phi2: Vec<f64>) -> PhaseRecord {
        let n = phi1.len();
        PhaseRecord {
            t: (0..n).map(|k| k as f64 * 1e-3).collect(),
            phi1,
            phi2,
            amp1: vec![1.0; n],
            amp2: vec![1.0; n],
            unwrap_flags: Vec::new(),
        }
    }

    #[test]
    fn noiseless_record_has_zero_variance() {
        let r = record(vec![0.3; 2000], vec![-0.1; 2000]);
        let s = phase_diffusion_stats(&r, 10).unwrap();
        assert!(s.var1.iter().chain(&s.var2).chain(&s.var_plus).chain(&s.var_minus).all(|&v| v == 0.0));
    }

    #[test]
    fn short_record_rejected() {
        let r = record(vec![0.0; 999], vec![0.0; 999]);
        assert!(matches!(phase_diffusion_stats(&r, 10), Err(Error::TooShort { got: 999, need: 1000 })));
    }

    #[test]
    fn mirrored_walk_is_anticorrelated() {
        let mut w = vec![0.0];
        let mut s = 1u64;
        for _ in 1..5000 {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let step = ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
            w.push(w.last().unwrap() + step);
        }
        let r = record(w.clone(), w.iter().map(|v| -v).collect());
        let st = phase_diffusion_stats(&r, 20).unwrap();
        assert!((st.rho + 1.0).abs() < 1e-12);
        assert!(st.var_plus.iter().all(|&v| v.abs() < 1e-20));
        // random walk: variance grows linearly with lag
        let fit = linear_fit(&st.lag, &st.var_minus).unwrap();
        assert!(fit.slope > 0.0 && fit.r2 > 0.9);
    }

    #[test]
    fn exact_line_fit() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = linear_fit(&x, &y).unwrap();
        assert_eq!((f.slope, f.intercept, f.r2), (2.0, 1.0, 1.0));
    }
}
