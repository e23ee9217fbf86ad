//! One function per subcommand. Each returns its tables and a few summary
//! lines; writing is left to the caller so the manifest can go first.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use num_complex::Complex64;
use rayon::prelude::*;

use sideband_osc::analysis::{
    ensemble_diffusion, fit_dispersive_coupling, linear_fit, spectrum, sweep_amplitude_vs_detuning,
    sweep_lambda3_vs_pump, ModeScale, Signal, SpectrumConfig, Window,
};
use sideband_osc::controller::{
    controller_statistics, on_off_variance_ratio, run_cycles, LinearPlant, SlowFlowPlant, StabilizationRun,
};
use sideband_osc::slowflow::{
    full_model_oracle, integrate_slowflow_strided, stationary_amplitudes, FullModelRun, PumpSchedule,
};
use sideband_osc::stability::{
    build_jacobian, compute_c_spectral, nonlinear_step_response, phase_diffusion_rates, step_response,
};
use sideband_osc::{coupling_g, derive_constants, stationary_state, FullModelParams, SystemParams};

use crate::config::ParamFile;
use crate::error::{CliError, CliResult};
use crate::output::{fmt_f64, Cell, Format, Table};

#[derive(Debug, Default)]
pub struct Output {
    pub tables: Vec<Table>,
    pub lines: Vec<String>,
    /// Integrator step, reported in the data headers.
    pub dt: Option<f64>,
    /// Set by self-checks that ran to completion but did not pass.
    pub failure: Option<String>,
}

fn omega_c(p: &SystemParams) -> CliResult<f64> {
    Ok(derive_constants(p)?.require_omega_c()?)
}

fn grid(from: f64, to: f64, points: usize) -> CliResult<Vec<f64>> {
    if points < 2 || !(from < to) {
        return Err(CliError::Config(format!(
            "grid needs from < to and at least 2 points (got {from}..{to}, {points})"
        )));
    }
    Ok((0..points).map(|k| from + (to - from) * k as f64 / (points - 1) as f64).collect())
}

pub fn constants(pf: &ParamFile) -> CliResult<Output> {
    let p = pf.system_params()?;
    let d = derive_constants(&p)?;
    let mut t = Table::new("constants", &["name", "value", "unit"]);
    let mut row = |name: &str, v: Option<f64>, unit: &str| t.push(vec![name.into(), v.into(), unit.into()]);
    row("xi", Some(d.xi), "");
    row("omega_c", d.omega_c.map(|w| w / TAU), "Hz");
    row("zeta0", Some(d.zeta0), "");
    row("theta0", d.theta0, "rad");
    let split = coupling_g(&p).ok();
    row("c", split.map(|s| s.c), "");
    row("g", split.map(|s| s.g), "");
    row("ddelta_omega_ddelta_f", split.map(|s| s.ddelta_omega_ddelta_f), "");
    row("gamma_plus_12", Some(d.gamma_plus_12), "");
    row("gamma_minus_12", Some(d.gamma_minus_12), "");
    row("gamma_plus_21", Some(d.gamma_plus_21), "");
    row("gamma_minus_21", Some(d.gamma_minus_21), "");
    row("f1", Some(p.f1), "rad^2 s^-2 m^-1");
    row("f2", Some(p.f2), "rad^2 s^-2 m^-1");
    let lines = t
        .rows
        .iter()
        .map(|r| {
            let v = match &r[1] {
                Cell::F(v) => fmt_f64(*v),
                _ => "-".into(),
            };
            let (Cell::S(name), Cell::S(unit)) = (&r[0], &r[2]) else { unreachable!() };
            format!("{name:<22} {v:>24} {unit}")
        })
        .collect();
    Ok(Output {
        tables: vec![t],
        lines,
        ..Default::default()
    })
}

#[derive(Debug, Clone, Args)]
pub struct SteadyArgs {
    /// Also integrate the slow flow for this long (s) and write the trajectory.
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Relative amplitude offset of the initial state from the fixed point.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub perturb: f64,
    /// Record every n-th integrator step.
    #[arg(long, default_value_t = 100)]
    pub stride: usize,
}

pub fn steady(pf: &ParamFile, seed: u64, a: &SteadyArgs) -> CliResult<Output> {
    let p = pf.system_params()?;
    let s = stationary_state(&p)?;
    let es = build_jacobian(&p)?.eigensystem()?;
    let mut t = Table::new(
        "steady",
        &[
            "r1", "r2", "phi_plus", "delta_omega_hz", "omega_self1_hz", "omega_self2_hz", "zero_state_stable", "t_relax",
        ],
    );
    t.push(vec![
        s.r1.into(),
        s.r2.into(),
        s.phi_plus.into(),
        (s.delta_omega / TAU).into(),
        (s.omega_self1 / TAU).into(),
        (s.omega_self2 / TAU).into(),
        s.zero_state_stable.into(),
        es.relaxation_time().into(),
    ]);
    let mut out = Output {
        lines: vec![format!(
            "r1 = {:.6e} m, r2 = {:.6e} m, phi+ = {:.6} rad, t_relax = {:.4} s",
            s.r1,
            s.r2,
            s.phi_plus,
            es.relaxation_time()
        )],
        tables: vec![t],
        ..Default::default()
    };
    if let Some(t_end) = a.t_end {
        let dt = pf.dt(&p);
        let init = stationary_amplitudes(&p)?.map(|u| u * (1.0 + a.perturb));
        let noise = pf.noise(&p, seed)?;
        let tr = integrate_slowflow_strided(&p, init, &PumpSchedule::constant(p.theta_f), &noise, t_end, dt, a.stride)?;
        let mut traj = Table::new("trajectory", &["t", "re_u1", "im_u1", "re_u2", "im_u2", "theta_F"]);
        for k in 0..tr.len() {
            traj.push(vec![
                tr.t[k].into(),
                tr.u1[k].re.into(),
                tr.u1[k].im.into(),
                tr.u2[k].re.into(),
                tr.u2[k].im.into(),
                tr.theta[k].into(),
            ]);
        }
        out.lines.push(format!("trajectory: {} samples, dt = {dt:e} s", tr.len()));
        out.tables.push(traj);
        out.dt = Some(dt);
    }
    Ok(out)
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Lower detuning (Hz); defaults depend on the subcommand.
    #[arg(long, allow_negative_numbers = true)]
    pub from_hz: Option<f64>,
    /// Upper detuning (Hz).
    #[arg(long, allow_negative_numbers = true)]
    pub to_hz: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
}

pub fn sweep_detune(pf: &ParamFile, a: &GridArgs) -> CliResult<Output> {
    let p = pf.system_params()?;
    let wc = omega_c(&p)? / TAU;
    let hz = grid(
        a.from_hz.unwrap_or(-1.9 * wc),
        a.to_hz.unwrap_or(1.9 * wc),
        a.points.unwrap_or(401),
    )?;
    let rad: Vec<f64> = hz.iter().map(|h| TAU * h).collect();
    let curve = sweep_amplitude_vs_detuning(&p, &rad)?;
    let bistable = curve.bistable();
    let mut t = Table::new("sweep_detune", &["delta_f_hz", "r1_sq", "r2_sq", "zero_state_stable", "bistable"]);
    for k in 0..hz.len() {
        t.push(vec![
            hz[k].into(),
            curve.r1_sq[k].into(),
            curve.r2_sq[k].into(),
            curve.zero_state_stable[k].into(),
            bistable[k].into(),
        ]);
    }
    let edge = |v: Option<f64>| v.map_or("none in range".to_string(), |w| format!("{:.3} Hz", w / TAU));
    Ok(Output {
        tables: vec![t],
        lines: vec![format!(
            "omega_c = {wc:.3} Hz, onset {}, zero state restabilizes {}",
            edge(curve.onset()),
            edge(curve.restabilization())
        )],
        ..Default::default()
    })
}

pub fn eig(pf: &ParamFile, a: &GridArgs) -> CliResult<Output> {
    let p = pf.system_params()?;
    let wc = omega_c(&p)? / TAU;
    let hz = grid(
        a.from_hz.unwrap_or(-0.9 * wc),
        a.to_hz.unwrap_or(3.0 * wc),
        a.points.unwrap_or(40),
    )?;
    let mut t = Table::new(
        "eig",
        &[
            "delta_f_hz", "re_l1", "im_l1", "re_l2", "im_l2", "re_l3", "im_l3", "c", "g", "error",
        ],
    );
    let mut failed = 0;
    for &h in &hz {
        let q = p.with_detuning(TAU * h);
        let row = build_jacobian(&q)
            .and_then(|j| j.eigensystem())
            .and_then(|es| compute_c_spectral(&q).map(|c| (es, c.c)));
        match row {
            Ok((es, c)) => {
                let mut r: Vec<Cell> = vec![h.into()];
                for l in es.lambdas {
                    r.push(l.re.into());
                    r.push(l.im.into());
                }
                r.extend([c.into(), (0.5 * (1.0 - c)).into(), Cell::Empty]);
                t.push(r);
            }
            Err(e) => {
                failed += 1;
                let mut r: Vec<Cell> = vec![h.into()];
                r.extend(std::iter::repeat_n(Cell::Empty, 8));
                r.push(e.class().into());
                t.push(r);
            }
        }
    }
    Ok(Output {
        tables: vec![t],
        lines: vec![format!("{} detunings, {failed} without an oscillating state", hz.len())],
        ..Default::default()
    })
}

#[derive(Debug, Clone, Args)]
pub struct StepArgs {
    /// Pump-phase step (rad).
    #[arg(long, default_value_t = 1f64.to_radians(), allow_negative_numbers = true)]
    pub dtheta: f64,
    /// Response window (s); ten relaxation times when absent.
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long, default_value_t = 201)]
    pub points: usize,
    /// Integrate the full slow flow instead of using the linearization.
    #[arg(long)]
    pub nonlinear: bool,
}

pub fn step(pf: &ParamFile, a: &StepArgs) -> CliResult<Output> {
    let p = pf.system_params()?;
    let t_r = build_jacobian(&p)?.eigensystem()?.relaxation_time();
    let t_end = a.t_end.unwrap_or(10.0 * t_r);
    let times = grid(0.0, t_end, a.points)?;
    let (r, dt) = if a.nonlinear {
        let dt = pf.dt(&p);
        (nonlinear_step_response(&p, a.dtheta, &times, dt)?, Some(dt))
    } else {
        (step_response(&p, a.dtheta, &times)?, None)
    };
    let mut t = Table::new("step", &["t", "dphi1", "dphi2", "dr1", "dr2"]);
    for k in 0..r.t.len() {
        t.push(vec![
            r.t[k].into(),
            r.dphi1[k].into(),
            r.dphi2[k].into(),
            r.dr1[k].into(),
            r.dr2[k].into(),
        ]);
    }
    let share = |v: f64| if a.dtheta == 0.0 { 0.0 } else { 100.0 * v / a.dtheta };
    Ok(Output {
        tables: vec![t],
        lines: vec![format!(
            "{} response: settled dphi1 {:.2}%, dphi2 {:.2}% of the step, t_relax = {:.4} s",
            if a.nonlinear { "nonlinear" } else { "linear" },
            share(r.settled_dphi1),
            share(r.settled_dphi2),
            r.t_relax
        )],
        dt,
        ..Default::default()
    })
}

#[derive(Debug, Clone, Args)]
pub struct DiffuseArgs {
    #[arg(long, default_value_t = 32)]
    pub realizations: usize,
    /// Length of each realization (s).
    #[arg(long, default_value_t = 10.0)]
    pub t_end: f64,
    /// Record every n-th integrator step.
    #[arg(long, default_value_t = 100)]
    pub stride: usize,
    /// Also write the phase record of the first realization.
    #[arg(long)]
    pub record: bool,
}

pub fn diffuse(pf: &ParamFile, seed: u64, a: &DiffuseArgs) -> CliResult<Output> {
    let p = pf.system_params()?;
    let dt = pf.dt(&p);
    let init = stationary_amplitudes(&p)?;
    let base = pf.noise(&p, seed)?;
    let records = (0..a.realizations as u64)
        .into_par_iter()
        .map(|k| {
            let noise = sideband_osc::slowflow::NoiseConfig { seed: seed + k, ..base };
            integrate_slowflow_strided(&p, init, &PumpSchedule::constant(p.theta_f), &noise, a.t_end, dt, a.stride)
                .map(|tr| tr.phase_record())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let ens = ensemble_diffusion(&records)?;
    let mut t = Table::new("diffusion", &["t", "var1", "var2", "var_plus", "var_minus"]);
    for k in 0..ens.t.len() {
        t.push(vec![
            ens.t[k].into(),
            ens.var1[k].into(),
            ens.var2[k].into(),
            ens.var_plus[k].into(),
            ens.var_minus[k].into(),
        ]);
    }
    // skip the first fifth, where the amplitude-to-phase transfer is still building up
    let start = ens.t.iter().position(|&x| x >= 0.2 * a.t_end).unwrap_or(0);
    let fit = linear_fit(&ens.t[start..], &ens.var_minus[start..])?;
    let predicted = phase_diffusion_rates(&p, base.d1, base.d2)?.minus;
    let mut s = Table::new(
        "diffusion_summary",
        &["realizations", "rho", "rate_minus", "rate_minus_r2", "rate_minus_linearized", "var_plus_final"],
    );
    let n = ens.t.len();
    s.push(vec![
        a.realizations.into(),
        ens.rho.into(),
        fit.slope.into(),
        fit.r2.into(),
        predicted.into(),
        ens.var_plus[n - 1].into(),
    ]);
    let mut out = Output {
        lines: vec![format!(
            "rho = {:.4}, phi- rate {:.4e} rad^2/s (linearized {:.4e}), final Var+ {:.3e} rad^2",
            ens.rho,
            fit.slope,
            predicted,
            ens.var_plus[n - 1]
        )],
        tables: vec![t, s],
        dt: Some(dt),
        ..Default::default()
    };
    if a.record {
        let r = &records[0];
        let mut rec = Table::new("phase_record", &["t", "phi1", "phi2", "amp1", "amp2"]);
        for k in 0..r.len() {
            rec.push(vec![r.t[k].into(), r.phi1[k].into(), r.phi2[k].into(), r.amp1[k].into(), r.amp2[k].into()]);
        }
        out.tables.push(rec);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlantKind {
    /// Nonlinear slow flow with the lock-in model.
    Slowflow,
    /// Exact propagation of the linearized dynamics.
    Linear,
}

#[derive(Debug, Clone, Args)]
pub struct StabilizeArgs {
    /// Mode whose phase is held (1 or 2).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub mode: Option<u8>,
    #[arg(long)]
    pub cycles: Option<usize>,
    #[arg(long)]
    pub t_wait: Option<f64>,
    #[arg(long)]
    pub t_measure: Option<f64>,
    #[arg(long, value_enum, default_value_t = PlantKind::Slowflow)]
    pub plant: PlantKind,
    /// Run with the pump phase frozen.
    #[arg(long)]
    pub no_feedback: bool,
    /// Also run without feedback on the same noise and report the variance ratio.
    #[arg(long)]
    pub compare_off: bool,
    /// Write the phases at every detector sample.
    #[arg(long)]
    pub trace: bool,
}

fn run_plant(p: &SystemParams, pf: &ParamFile, seed: u64, kind: PlantKind, cfg: &sideband_osc::controller::CycleConfig, n: usize) -> CliResult<StabilizationRun> {
    let noise = pf.noise(p, seed)?;
    let det = pf.detection(seed.wrapping_add(1));
    let run = match kind {
        PlantKind::Slowflow => run_cycles(&mut SlowFlowPlant::new(p, &noise, pf.integrator.dt)?, &det, cfg, n),
        PlantKind::Linear => run_cycles(&mut LinearPlant::new(p, &noise, pf.dt(p))?, &det, cfg, n),
    };
    Ok(run?)
}

pub fn stabilize(pf: &ParamFile, seed: u64, a: &StabilizeArgs) -> CliResult<Output> {
    let mut pf = pf.clone();
    let c = &mut pf.controller;
    if let Some(v) = a.mode {
        c.target_mode = v;
    }
    if let Some(v) = a.cycles {
        c.cycles = v;
    }
    if let Some(v) = a.t_wait {
        c.t_wait = v;
    }
    if let Some(v) = a.t_measure {
        c.t_measure = v;
    }
    let p = pf.system_params()?;
    let g = match pf.controller.g {
        Some(g) => g,
        None => coupling_g(&p)?.g,
    };
    let mut cfg = pf.cycle_config(g);
    cfg.feedback = !a.no_feedback;
    let n = pf.controller.cycles;
    let run = run_plant(&p, &pf, seed, a.plant, &cfg, n)?;
    let off = if a.compare_off {
        Some(run_plant(&p, &pf, seed, a.plant, &sideband_osc::controller::CycleConfig { feedback: false, ..cfg }, n)?)
    } else {
        None
    };

    let mut cycles = Table::new(
        "cycles",
        &["p", "t", "theta", "phi_meas", "n_samples", "phi1", "phi2", "eps", "excursion"],
    );
    cycles.format = Some(Format::Ndjson);
    for c in &run.cycles {
        let flagged = run.warnings.iter().any(|w| w.cycle == c.p);
        cycles.push(vec![
            c.p.into(),
            c.t.into(),
            c.theta.into(),
            c.phi_meas.into(),
            c.n_samples.into(),
            c.phi1.into(),
            c.phi2.into(),
            c.eps.into(),
            flagged.into(),
        ]);
    }
    let stats = controller_statistics(&run).ok();
    let ratio = off.as_ref().map(|o| on_off_variance_ratio(&run, o));
    let sigma_off = off.as_ref().and_then(|o| controller_statistics(o).ok()).map(|s| s.sigma_phi);
    let mut summary = Table::new(
        "stabilize_summary",
        &[
            "target_mode",
            "g",
            "cycles",
            "feedback",
            "sigma_phi",
            "mean_sq_eps",
            "theta_step_var",
            "predicted_step_var",
            "excursions",
            "sigma_phi_off",
            "variance_ratio",
        ],
    );
    summary.push(vec![
        (cfg.target_mode as u64).into(),
        g.into(),
        n.into(),
        cfg.feedback.into(),
        stats.map(|s| s.sigma_phi).into(),
        stats.map(|s| s.mean_sq_eps).into(),
        stats.map(|s| s.theta_step_var).into(),
        stats.map(|s| s.predicted_step_var).into(),
        run.warnings.len().into(),
        sigma_off.into(),
        ratio.into(),
    ]);
    let mut lines = vec![match stats {
        Some(s) => format!(
            "mode {} held over {n} cycles: sigma_phi = {:.3e} rad, theta step variance {:.3e} (predicted {:.3e})",
            cfg.target_mode, s.sigma_phi, s.theta_step_var, s.predicted_step_var
        ),
        None => format!("{n} cycles: too few for run statistics"),
    }];
    if let Some(r) = ratio {
        lines.push(format!("variance reduction with feedback: x{r:.1}"));
    }
    for w in &run.warnings {
        lines.push(format!(
            "warning: pump phase {:.2} deg beyond {:.2} deg at cycle {}",
            w.theta.to_degrees(),
            w.limit.to_degrees(),
            w.cycle
        ));
    }
    let mut tables = vec![cycles, summary];
    if a.trace {
        let tr = &run.trace;
        let mut t = Table::new("trace", &["t", "phi1", "phi2", "meas1", "meas2"]);
        for k in 0..tr.t.len() {
            t.push(vec![tr.t[k].into(), tr.phi1[k].into(), tr.phi2[k].into(), tr.meas1[k].into(), tr.meas2[k].into()]);
        }
        tables.push(t);
    }
    Ok(Output {
        tables,
        lines,
        dt: Some(pf.dt(&p)),
        ..Default::default()
    })
}

/// Reads named numeric columns from a CSV file with a header row; lines
/// starting with `#` are skipped.
pub fn read_columns(path: &Path, names: &[&str]) -> CliResult<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => CliError::Io {
                path: path.display().to_string(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => CliError::Input(format!("{}: {e}", path.display())),
        })?;
    let headers = rdr.headers().map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?.clone();
    let idx: Vec<usize> = names
        .iter()
        .map(|n| {
            headers.iter().position(|h| h == *n).ok_or_else(|| {
                CliError::Input(format!(
                    "{}: no column '{n}' (have {})",
                    path.display(),
                    headers.iter().collect::<Vec<_>>().join(", ")
                ))
            })
        })
        .collect::<CliResult<_>>()?;
    let mut cols = vec![Vec::new(); names.len()];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        for (c, &i) in idx.iter().enumerate() {
            let v: f64 = rec.get(i).unwrap_or("").parse().map_err(|_| {
                CliError::Input(format!(
                    "{}: record {}: '{}' in column '{}' is not a number",
                    path.display(),
                    line + 1,
                    rec.get(i).unwrap_or(""),
                    names[c]
                ))
            })?;
            cols[c].push(v);
        }
    }
    Ok(cols)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WindowKind {
    Hann,
    Rect,
}

#[derive(Debug, Clone, Args)]
pub struct SpectrumArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "t")]
    pub time_column: String,
    /// Real-valued signal column.
    #[arg(long, conflicts_with = "complex", required_unless_present = "complex")]
    pub column: Option<String>,
    /// Complex signal as RE,IM column names.
    #[arg(long, value_delimiter = ',', value_name = "RE,IM")]
    pub complex: Option<Vec<String>>,
    #[arg(long, default_value_t = 4096)]
    pub segment: usize,
    #[arg(long, default_value_t = 0.5)]
    pub overlap: f64,
    #[arg(long, value_enum, default_value_t = WindowKind::Hann)]
    pub window: WindowKind,
    /// Offsets at which to report single-sideband phase noise (Hz).
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 1.0, 10.0])]
    pub offsets_hz: Vec<f64>,
}

pub fn spectrum_cmd(a: &SpectrumArgs) -> CliResult<Output> {
    let cfg = SpectrumConfig {
        segment_len: a.segment,
        overlap: a.overlap,
        window: match a.window {
            WindowKind::Hann => Window::Hann,
            WindowKind::Rect => Window::Rect,
        },
    };
    let est = match (&a.column, &a.complex) {
        (Some(c), _) => {
            let cols = read_columns(&a.input, &[&a.time_column, c])?;
            spectrum(&cols[0], Signal::Real(&cols[1]), &cfg)?
        }
        (None, Some(pair)) => {
            if pair.len() != 2 {
                return Err(CliError::Config("--complex takes two column names, RE,IM".into()));
            }
            let cols = read_columns(&a.input, &[&a.time_column, &pair[0], &pair[1]])?;
            let z: Vec<Complex64> = cols[1].iter().zip(&cols[2]).map(|(&re, &im)| Complex64::new(re, im)).collect();
            spectrum(&cols[0], Signal::Complex(&z), &cfg)?
        }
        (None, None) => return Err(CliError::Config("spectrum needs --column or --complex".into())),
    };
    let ssb = est.ssb_phase_noise();
    let mut t = Table::new("spectrum", &["freq_hz", "psd", "ssb_dbc_hz"]);
    for k in 0..est.freq.len() {
        t.push(vec![est.freq[k].into(), est.psd[k].into(), ssb[k].into()]);
    }
    let mut s = Table::new(
        "spectrum_summary",
        &["n_segments", "rbw_hz", "one_sided", "peak_hz", "linewidth_hz", "parseval_ratio", "parseval_ok"],
    );
    s.push(vec![
        est.n_segments.into(),
        est.rbw.into(),
        est.one_sided.into(),
        est.peak_frequency().into(),
        est.linewidth().into(),
        est.parseval_ratio.into(),
        est.parseval_ok().into(),
    ]);
    let mut pn = Table::new("phase_noise", &["offset_hz", "bin_hz", "ssb_dbc_hz"]);
    for &f in &a.offsets_hz {
        let k = (0..est.freq.len()).min_by(|&i, &j| (est.freq[i] - f).abs().total_cmp(&(est.freq[j] - f).abs()));
        if let Some(k) = k {
            pn.push(vec![f.into(), est.freq[k].into(), ssb[k].into()]);
        }
    }
    let mut lines = vec![format!(
        "{} segments, rbw {:.4} Hz, peak at {:.4} Hz, linewidth {:.4} Hz",
        est.n_segments,
        est.rbw,
        est.peak_frequency(),
        est.linewidth()
    )];
    if !est.parseval_ok() {
        lines.push(format!("warning: Parseval ratio {:.4} outside tolerance", est.parseval_ratio));
    }
    Ok(Output {
        tables: vec![t, s, pn],
        lines,
        ..Default::default()
    })
}

#[derive(Debug, Clone, Args)]
pub struct FitGammaArgs {
    /// CSV with squared drive amplitude (m^2) and frequency shift (Hz).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "a_sq")]
    pub a_column: String,
    #[arg(long, default_value = "delta_f_hz")]
    pub shift_column: String,
    /// Mode whose frequency shift was measured.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub mode: u8,
}

pub fn fit_gamma(pf: &ParamFile, a: &FitGammaArgs) -> CliResult<Output> {
    let cols = read_columns(&a.input, &[&a.a_column, &a.shift_column])?;
    let points: Vec<(f64, f64)> = cols[0].iter().copied().zip(cols[1].iter().copied()).collect();
    let m1 = pf.pump.mass_scale;
    let d = &pf.device;
    // f2 / f1 = g21 / g12 fixes the second effective mass
    let scale = match a.mode {
        1 => ModeScale { mass: m1, omega: TAU * d.omega1 },
        _ => ModeScale { mass: m1 * d.g12 / d.g21, omega: TAU * d.omega2 },
    };
    let fit = fit_dispersive_coupling(&points, Some(scale))?;
    let gamma = fit.gamma.unwrap_or(f64::NAN);
    let reference = d.dispersive_gamma;
    let mut t = Table::new(
        "fit_gamma",
        &["n_points", "slope_hz_per_m2", "residual_rms_hz", "gamma", "reference_gamma", "rel_diff"],
    );
    t.push(vec![
        points.len().into(),
        fit.slope.into(),
        fit.residual_rms.into(),
        gamma.into(),
        reference.into(),
        (gamma / reference - 1.0).into(),
    ]);
    Ok(Output {
        tables: vec![t],
        lines: vec![format!(
            "gamma = {gamma:.4e} N/m^3 from {} points ({:+.1}% from {reference:.3e})",
            points.len(),
            100.0 * (gamma / reference - 1.0)
        )],
        ..Default::default()
    })
}

#[derive(Debug, Clone, Args)]
pub struct Lambda3Args {
    /// Lowest pump current (A).
    #[arg(long, default_value_t = 100e-6)]
    pub from: f64,
    /// Highest pump current (A).
    #[arg(long, default_value_t = 400e-6)]
    pub to: f64,
    #[arg(long, default_value_t = 31)]
    pub points: usize,
}

pub fn lambda3_sweep(pf: &ParamFile, a: &Lambda3Args) -> CliResult<Output> {
    let currents = grid(a.from, a.to, a.points)?;
    let curve = sweep_lambda3_vs_pump(&pf.template(), &pf.calibration(), &currents, TAU * pf.pump.delta_f)?;
    let mut t = Table::new("lambda3", &["current_a", "lambda3", "error"]);
    for pt in &curve.points {
        t.push(vec![pt.current.into(), pt.lambda3.into(), pt.error.clone().into()]);
    }
    let valid = curve.points.iter().filter(|p| p.lambda3.is_some()).count();
    Ok(Output {
        tables: vec![t],
        lines: vec![format!("{valid} of {} currents self-oscillate", curve.points.len())],
        ..Default::default()
    })
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    /// Detunings in units of the critical detuning.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_values_t = [-0.5, 0.0, 0.5])]
    pub ratios: Vec<f64>,
    /// Simulated time in units of the toy device's inverse mode-1 frequency.
    #[arg(long, default_value_t = 4000.0)]
    pub t_end: f64,
    /// Relative amplitude tolerance.
    #[arg(long, default_value_t = 0.05)]
    pub tol: f64,
}

/// Full second-order equations of a toy device against its slow flow.
pub fn oracle_check(a: &OracleArgs) -> CliResult<Output> {
    let fp = FullModelParams::toy();
    let wc = omega_c(&fp.slow_params(0.0, 0.0))?;
    let theta_f = 0.3;
    let dt = 0.02;
    let rows = a
        .ratios
        .par_iter()
        .map(|&ratio| -> CliResult<[f64; 5]> {
            let delta_f = ratio * wc;
            let p = fp.slow_params(delta_f, theta_f);
            let run = FullModelRun {
                params: fp,
                omega_f: fp.omega1 + fp.omega2 + delta_f,
                theta_f,
                init: stationary_amplitudes(&p)?,
                t_end: a.t_end,
                dt,
                average_periods: 4,
            };
            let tr = full_model_oracle(&run)?;
            let s = stationary_state(&p)?;
            let n = tr.len();
            let tail = n / 2..n;
            let m = tail.len() as f64;
            let r1 = tail.clone().map(|k| tr.u1[k].norm()).sum::<f64>() / m;
            let r2 = tail.clone().map(|k| tr.u2[k].norm()).sum::<f64>() / m;
            let ph = tr.phases();
            let t: Vec<f64> = tail.clone().map(|k| tr.t[k]).collect();
            let plus: Vec<f64> = tail.map(|k| ph.phi1[k] + ph.phi2[k]).collect();
            let drift = linear_fit(&t, &plus)?.slope;
            let resolution = TAU / (t[t.len() - 1] - t[0]);
            Ok([ratio, r1 / s.r1, r2 / s.r2, drift, resolution])
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut t = Table::new(
        "oracle",
        &["delta_over_wc", "r1_ratio", "r2_ratio", "phase_sum_drift", "resolution", "pass"],
    );
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for r in &rows {
        let pass = (r[1] - 1.0).abs() <= a.tol && (r[2] - 1.0).abs() <= a.tol && r[3].abs() < 1e-2 * r[4];
        if !pass {
            failures.push(fmt_f64(r[0]));
        }
        lines.push(format!(
            "{} delta/omega_c = {:+.2}: r1 {:+.3}%, r2 {:+.3}%, phase-sum drift {:.1e} (resolution {:.1e})",
            if pass { "PASS" } else { "FAIL" },
            r[0],
            100.0 * (r[1] - 1.0),
            100.0 * (r[2] - 1.0),
            r[3],
            r[4]
        ));
        t.push(r.iter().map(|&v| Cell::F(v)).chain([Cell::B(pass)]).collect());
    }
    Ok(Output {
        tables: vec![t],
        lines,
        dt: Some(dt),
        failure: (!failures.is_empty()).then(|| format!("full model disagrees with the slow flow at delta/omega_c = {}", failures.join(", "))),
    })
}
