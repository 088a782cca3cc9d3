//! The five subcommands. Each writes its files through a [`Sink`] and returns
//! an error that maps onto the process exit code.

use std::path::PathBuf;

use otto_core::lindblad::{Observables, Propagator};
use otto_core::model::{is_stable, max_stable_nbar_h};
use otto_core::moments::{integrate_moments, moment_limit_cycle, MomentOptions, MomentSample, MomentState};
use otto_core::states::{default_axis, effective_temperature, partial_trace, quadrature_stats, symmetric_axis, thermal_entropy, wigner};
use otto_core::thermo::{
    self, compare_with, cycle_work, engine_foms, log_grid, sweep_with, CycleDiagram, CycleRun, CycleWork, EngineFoms,
    RowStatus, SweepAxis, SweepRow,
};
use otto_core::{
    build_liouvillian, limit_cycle, Backend, CouplingKind, DensityMatrix, DriveSchedule, EngineParams, Mode,
    RecordMode, SolverOptions,
};
use serde_json::{json, Value};

use crate::config::{Format, Method, RunConfig};
use crate::output::{fmt_f64, Provenance, Sink, Table};
use crate::svg::{self, Axes, Panel, Series};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{0} (pass --force to run anyway)")]
    Unstable(String),
    #[error(transparent)]
    Solver(#[from] otto_core::Error),
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use otto_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Unstable(_) => 4,
            CliError::Solver(e) => match e {
                E::NonConvergence { .. }
                | E::Divergence { .. }
                | E::InvariantViolation { .. }
                | E::StepUnderflow { .. }
                | E::OpenCycle(_) => 3,
                E::InvalidParameter { .. } | E::InvalidArgument(_) | E::InvalidDimension(_) | E::Unsupported(_) => 2,
                _ => 1,
            },
            CliError::Io(_) => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Effective configuration after command-line overrides.
pub struct Context {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub force: bool,
}

impl Context {
    pub fn params(&self) -> &EngineParams {
        &self.cfg.engine
    }

    pub fn schedule(&self) -> DriveSchedule {
        self.cfg.schedule()
    }

    fn backend_name(&self, method: Method) -> &'static str {
        match method {
            Method::Moments => "moments",
            Method::Master => match self.cfg.solver.backend {
                Backend::Auto if self.params().dim_a * self.params().dim_b <= 100 => "expm",
                Backend::Auto => "rk4",
                b => b.name(),
            },
        }
    }

    fn sink(&self, method: Method) -> CliResult<Sink> {
        let p = self.params();
        let prov = Provenance::new(self.cfg.hash(), self.backend_name(method), (p.dim_a, p.dim_b));
        Ok(Sink::new(&self.out, prov)?)
    }

    fn wants(&self, f: Format) -> bool {
        self.cfg.outputs.wants(f)
    }

    /// Refuses parameters outside the stability bound unless forced.
    fn require_stable(&self, params: &EngineParams) -> CliResult<()> {
        if is_stable(params) {
            return Ok(());
        }
        let msg = stability_message(params);
        if self.force {
            log::warn!("{msg}; continuing because of --force");
            Ok(())
        } else {
            Err(CliError::Unstable(msg))
        }
    }
}

pub fn stability_message(params: &EngineParams) -> String {
    format!(
        "stability bound violated: heated cavity occupation {:.4} gives omega_b + 4 g n_a = {:.4} <= 0 (largest stable nbar_h is {:.4})",
        params.stationary_occupation(true),
        params.omega_b + 4.0 * params.g * params.stationary_occupation(true),
        max_stable_nbar_h(params)
    )
}

const OBS_COLUMNS: [&str; 10] = ["t", "n_a", "n_b", "q2", "p2", "S_a", "omega_eff", "U_a", "T_eff", "drive"];

struct ObsRow {
    t: f64,
    n_a: f64,
    n_b: f64,
    q2: f64,
    p2: f64,
    s_a: f64,
    omega_eff: f64,
    drive: bool,
}

impl ObsRow {
    fn from_master(t: f64, drive: bool, o: &Observables, params: &EngineParams) -> Self {
        let omega_eff = thermo::effective_frequency_from(params, o.q, o.q2);
        Self { t, n_a: o.n_a, n_b: o.n_b, q2: o.q2, p2: o.p2, s_a: o.s_a, omega_eff, drive }
    }

    fn from_moments(s: &MomentSample, params: &EngineParams) -> Self {
        let m = &s.state;
        let omega_eff = thermo::effective_frequency_from(params, 0.0, m.q2);
        Self { t: s.t, n_a: m.n_a, n_b: m.n_b, q2: m.q2, p2: m.p2, s_a: thermal_entropy(m.n_a), omega_eff, drive: s.drive_on }
    }

    fn values(&self) -> Vec<String> {
        let u_a = self.omega_eff * self.n_a;
        let t_eff = effective_temperature(self.n_a, self.omega_eff);
        let mut v: Vec<String> =
            [self.t, self.n_a, self.n_b, self.q2, self.p2, self.s_a, self.omega_eff, u_a, t_eff].iter().map(|&x| fmt_f64(x)).collect();
        v.push(u8::from(self.drive).to_string());
        v
    }
}

fn sample_times(t_final: f64, every: f64) -> Vec<f64> {
    if t_final <= 0.0 {
        return Vec::new();
    }
    let n = (t_final / every * (1.0 + 1e-12)).floor() as usize;
    let mut times: Vec<f64> = (0..=n).map(|k| k as f64 * every).collect();
    if t_final - times[times.len() - 1] > 1e-9 * every {
        times.push(t_final);
    }
    times
}

fn series(rows: &[ObsRow], f: impl Fn(&ObsRow) -> f64) -> Vec<(f64, f64)> {
    rows.iter().map(|r| (r.t, f(r))).collect()
}

/// Integrates from the thermal initial state and writes the observables
/// table; on failure the rows computed so far are kept and marked.
pub fn simulate(ctx: &Context) -> CliResult<()> {
    let params = ctx.params().clone();
    let sim = &ctx.cfg.simulate;
    ctx.require_stable(&params)?;
    let schedule = ctx.schedule();
    let every = ctx.cfg.outputs.sample_every.unwrap_or(schedule.period / 64.0);
    let times = sample_times(sim.t_final, every);

    let mut rows = Vec::with_capacity(times.len());
    let mut failure: Option<CliError> = None;
    let mut max_trace_error: f64 = 0.0;
    let mut min_eigenvalue = f64::INFINITY;
    match sim.method {
        Method::Master if !times.is_empty() => {
            let opts = SolverOptions { record_mode: RecordMode::ObservablesOnly, ..ctx.cfg.solver.clone() };
            let result = (|| -> CliResult<()> {
                let l = build_liouvillian(&params)?;
                let rho0 = DensityMatrix::initial(&params);
                let mut prop = Propagator::new(&l, &rho0, &opts)?;
                let mut x = prop.pack(&rho0)?;
                let mut t = 0.0;
                for &ts in &times {
                    prop.advance(&mut x, &schedule, t, ts);
                    t = ts;
                    let s = prop.sample(&x, t, &schedule, &opts)?;
                    if let Some(d) = s.diagnostics {
                        max_trace_error = max_trace_error.max(d.trace_error);
                        min_eigenvalue = min_eigenvalue.min(d.min_eigenvalue);
                    }
                    rows.push(ObsRow::from_master(s.t, s.drive_on, &s.obs, &params));
                }
                Ok(())
            })();
            failure = result.err();
        }
        Method::Moments if !times.is_empty() => {
            let mopts = MomentOptions { dt: ctx.cfg.solver.dt, ..MomentOptions::default() };
            let mut state = MomentState::thermal(&params);
            let mut t = 0.0;
            rows.push(ObsRow::from_moments(&MomentSample { t, drive_on: schedule.is_on_after(t), state }, &params));
            for &ts in &times[1..] {
                match integrate_moments(&state, &params, &schedule, t, ts, ts - t, &mopts) {
                    Ok(samples) => {
                        let last = *samples.last().expect("end point is sampled");
                        state = last.state;
                        t = ts;
                        rows.push(ObsRow::from_moments(&last, &params));
                    }
                    Err(e) => {
                        failure = Some(e.into());
                        break;
                    }
                }
            }
        }
        _ => {}
    }

    let mut sink = ctx.sink(sim.method)?;
    let error_text = failure.as_ref().map(|e| e.to_string());
    if ctx.wants(Format::Csv) {
        let mut table = Table::new(&OBS_COLUMNS);
        for r in &rows {
            table.push(r.values());
        }
        if let Some(e) = &error_text {
            table.fail(e);
        }
        sink.csv("observables.csv", &table)?;
    }
    if ctx.wants(Format::Json) {
        let last = rows.last();
        let peak = |f: fn(&ObsRow) -> f64| rows.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        let foms = if rows.is_empty() {
            json!({})
        } else {
            json!({
                "n_a_final": last.map(|r| r.n_a),
                "n_b_final": last.map(|r| r.n_b),
                "n_b_max": peak(|r| r.n_b),
                "omega_eff_min": -peak(|r| -r.omega_eff),
                "omega_eff_max": peak(|r| r.omega_eff),
                "dip_max": params.omega_b * params.kappa_b * (peak(|r| r.n_b) - params.nbar_b),
            })
        };
        let body = json!({
            "params": params,
            "schedule": schedule,
            "convergence": {
                "method": sim.method,
                "t_final": sim.t_final,
                "samples": rows.len(),
                "requested_samples": times.len(),
                "max_trace_error": (max_trace_error > 0.0).then_some(max_trace_error),
                "min_eigenvalue": min_eigenvalue.is_finite().then_some(min_eigenvalue),
            },
            "foms": foms,
        });
        sink.json("summary.json", body, error_text.as_deref())?;
    }
    if ctx.wants(Format::Svg) {
        let plot = svg::line_plot(
            "occupations",
            "omega_b t",
            "occupation",
            &[Series::new("n_a", series(&rows, |r| r.n_a)), Series::new("n_b", series(&rows, |r| r.n_b))],
            Axes::default(),
        );
        sink.svg("observables.svg", &plot)?;
    }
    failure.map_or(Ok(()), Err)
}

fn time_tag(t: f64) -> String {
    fmt_f64(t).replace('.', "p")
}

/// Mechanical Wigner functions at the requested times.
pub fn wigner_cmd(ctx: &Context, times: &[f64]) -> CliResult<()> {
    let params = ctx.params().clone();
    ctx.require_stable(&params)?;
    let schedule = ctx.schedule();
    let mut times = times.to_vec();
    times.sort_by(f64::total_cmp);
    times.dedup();

    let opts = SolverOptions { record_mode: RecordMode::ObservablesOnly, ..ctx.cfg.solver.clone() };
    let mut states = Vec::with_capacity(times.len());
    let result = (|| -> CliResult<()> {
        let l = build_liouvillian(&params)?;
        let rho0 = DensityMatrix::initial(&params);
        let mut prop = Propagator::new(&l, &rho0, &opts)?;
        let mut x = prop.pack(&rho0)?;
        let mut t = 0.0;
        for &ts in &times {
            prop.advance(&mut x, &schedule, t, ts);
            t = ts;
            prop.sample(&x, t, &schedule, &opts)?;
            states.push(partial_trace(&prop.unpack(&x, t), Mode::Mechanical));
        }
        Ok(())
    })();
    let failure = result.err();

    let half_width = ctx.cfg.wigner.half_width.unwrap_or_else(|| {
        states.iter().map(|s| default_axis(s).last().copied().unwrap_or(6.0)).fold(0.0, f64::max)
    });
    let axis = symmetric_axis(half_width, ctx.cfg.wigner.points);
    let mut grids = Vec::with_capacity(states.len());
    for rho in &states {
        grids.push(wigner(rho, &axis, &axis)?);
    }

    let mut sink = ctx.sink(Method::Master)?;
    let error_text = failure.as_ref().map(|e| e.to_string());
    if ctx.wants(Format::Csv) {
        for (t, g) in times.iter().zip(&grids) {
            let mut table = Table::new(&["q", "p", "W"]);
            for (i, q) in g.q_axis.iter().enumerate() {
                for (j, p) in g.p_axis.iter().enumerate() {
                    table.push_values(&[*q, *p, g.values[i][j]]);
                }
            }
            sink.csv(&format!("wigner_t{}.csv", time_tag(*t)), &table)?;
        }
        if let Some(e) = &error_text {
            let mut table = Table::new(&["q", "p", "W"]);
            table.fail(e);
            sink.csv("wigner_failed.csv", &table)?;
        }
    }
    if ctx.wants(Format::Json) {
        let panels: Vec<Value> = times
            .iter()
            .zip(states.iter().zip(&grids))
            .map(|(t, (rho, g))| {
                let qs = quadrature_stats(rho);
                json!({
                    "t": t,
                    "n_b": rho.mean_number(),
                    "integral": g.integral(),
                    "min": g.min_value(),
                    "max": g.max_value(),
                    "imag_residue": g.imag_residue,
                    "var_q": qs.q2 - qs.mean_q * qs.mean_q,
                    "var_p": qs.p2 - qs.mean_p * qs.mean_p,
                    "min_variance": qs.min_variance,
                    "max_variance": qs.max_variance,
                })
            })
            .collect();
        let body = json!({
            "params": params,
            "convergence": { "requested_times": times, "computed": states.len(), "grid_points": axis.len(), "half_width": half_width },
            "foms": { "panels": panels },
        });
        sink.json("wigner.json", body, error_text.as_deref())?;
    }
    if ctx.wants(Format::Svg) && !grids.is_empty() {
        let panels: Vec<Panel> = times
            .iter()
            .zip(&grids)
            .map(|(t, g)| Panel { title: format!("omega_b t = {}", fmt_f64(*t)), x_axis: &g.q_axis, y_axis: &g.p_axis, values: &g.values })
            .collect();
        sink.svg("wigner.svg", &svg::heatmaps("mechanical Wigner function", "q", "p", &panels))?;
    }
    failure.map_or(Ok(()), Err)
}

fn cycle_json(work: Option<&CycleWork>, params: &EngineParams) -> Value {
    match work {
        Some(w) => json!({
            "W_a": w.work,
            "W_a_u_omega": w.work_u_omega,
            "Q_in": w.heat_in,
            "eta": w.efficiency,
            "W_a_over_omega_a": w.work / params.omega_a,
            "Q_in_over_omega_a": w.heat_in / params.omega_a,
        }),
        None => Value::Null,
    }
}

fn engine_json(f: &EngineFoms) -> Value {
    json!({
        "omega_eff_min": f.omega_eff_min,
        "omega_eff_max": f.omega_eff_max,
        "n_b": f.n_b,
        "dip": f.dip,
        "load_power": f.load_power,
        "delta_f": f.delta_f,
        "ergotropy": f.ergotropy,
        "min_variance": f.min_variance,
    })
}

fn write_diagram(ctx: &Context, sink: &mut Sink, diagram: &CycleDiagram) -> CliResult<()> {
    if ctx.wants(Format::Csv) {
        let mut table = Table::new(&["t", "omega_eff", "n_a", "U_a", "S_a", "T_eff", "drive", "branch"]);
        for p in &diagram.samples {
            let mut row: Vec<String> = [p.t, p.omega_eff, p.n_a, p.u_a, p.s_a, p.t_eff].iter().map(|&v| fmt_f64(v)).collect();
            row.push(u8::from(p.drive_on).to_string());
            row.push(p.branch.name().to_string());
            table.push(row);
        }
        sink.csv("cycle.csv", &table)?;
    }
    if ctx.wants(Format::Svg) {
        let closed = Axes { log_x: false, closed: true };
        let u: Vec<(f64, f64)> = diagram.samples.iter().map(|p| (p.omega_eff, p.u_a)).collect();
        let ts: Vec<(f64, f64)> = diagram.samples.iter().map(|p| (p.s_a, p.t_eff)).collect();
        sink.svg("cycle_u_omega.svg", &svg::line_plot("effective cycle", "omega_eff", "U_a", &[Series::new("cycle", u)], closed))?;
        sink.svg("cycle_t_s.svg", &svg::line_plot("effective cycle", "S_a", "T_eff", &[Series::new("cycle", ts)], closed))?;
    }
    Ok(())
}

/// Limit cycle and its effective Otto cycle.
pub fn cycle(ctx: &Context) -> CliResult<()> {
    let params = ctx.params().clone();
    ctx.require_stable(&params)?;
    let schedule = ctx.schedule();
    let method = ctx.cfg.cycle.method;
    let mut sink = ctx.sink(method)?;

    let outcome: CliResult<(CycleDiagram, Value, Value)> = match method {
        Method::Master => (|| {
            let l = build_liouvillian(&params)?;
            let opts = SolverOptions { record_mode: RecordMode::ReducedStates, ..ctx.cfg.solver.clone() };
            let (converged, trajectory) = limit_cycle(&DensityMatrix::initial(&params), &l, &schedule, &opts)?;
            let diagram = CycleDiagram::from_trajectory(&trajectory, &params)?;
            let run = CycleRun { params: params.clone(), converged, trajectory, diagram };
            let foms = engine_foms(&run)?;
            let conv = json!({
                "method": method,
                "cycles": foms.cycles,
                "residual": foms.residual,
                "closed": run.diagram.closed,
                "closure_error": run.diagram.closure_error,
            });
            let mut f = engine_json(&foms);
            f["cycle"] = cycle_json(foms.cycle.as_ref(), &params);
            Ok((run.diagram, conv, f))
        })(),
        Method::Moments => (|| {
            let c = &ctx.cfg.cycle;
            let mopts = MomentOptions { variant: c.variant, closure: c.closure, dt: ctx.cfg.solver.dt };
            let s = &ctx.cfg.solver;
            let (samples, cycles) =
                moment_limit_cycle(&MomentState::thermal(&params), &params, &schedule, &mopts, s.samples_per_period, s.tol, s.max_cycles)?;
            let diagram = CycleDiagram::from_moments(&samples, &params)?;
            let work = cycle_work(&diagram).ok();
            let (lo, hi) = diagram.omega_range();
            let conv = json!({
                "method": method,
                "variant": c.variant,
                "closure": c.closure,
                "cycles": cycles,
                "closed": diagram.closed,
                "closure_error": diagram.closure_error,
            });
            let n_b: Vec<f64> = samples.iter().map(|s| s.state.n_b).collect();
            let f = json!({
                "omega_eff_min": lo,
                "omega_eff_max": hi,
                "n_b_max": n_b.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                "cycle": cycle_json(work.as_ref(), &params),
            });
            Ok((diagram, conv, f))
        })(),
    };

    match outcome {
        Ok((diagram, conv, foms)) => {
            write_diagram(ctx, &mut sink, &diagram)?;
            if ctx.wants(Format::Json) {
                sink.json("cycle.json", json!({ "params": params, "schedule": schedule, "convergence": conv, "foms": foms }), None)?;
            }
            Ok(())
        }
        Err(e) => {
            let text = e.to_string();
            if ctx.wants(Format::Json) {
                sink.json("cycle.json", json!({ "params": params, "schedule": schedule, "convergence": null, "foms": null }), Some(&text))?;
            }
            if ctx.wants(Format::Csv) {
                let mut table = Table::new(&["t", "omega_eff", "n_a", "U_a", "S_a", "T_eff", "drive", "branch"]);
                table.fail(&text);
                sink.csv("cycle.csv", &table)?;
            }
            Err(e)
        }
    }
}

const SWEEP_COLUMNS: [&str; 20] = [
    "axis", "value", "coupling", "stable", "status", "W_a", "Q_in", "eta", "dip_max", "dip_mean", "load_power_max",
    "load_power_mean", "delta_f_max", "delta_f_mean", "ergotropy_max", "n_b_mean", "min_variance", "omega_eff_min",
    "omega_eff_max", "cycles",
];

fn sweep_row(r: &SweepRow) -> Vec<String> {
    let status = match &r.status {
        RowStatus::Ok => "ok".to_string(),
        RowStatus::Unstable => "unstable".to_string(),
        RowStatus::Failed(e) => format!("failed: {e}"),
    };
    let mut row = vec![r.axis.name().to_string(), fmt_f64(r.value), r.coupling.name().to_string(), r.stable.to_string(), status];
    let nan = f64::NAN;
    let vals = match &r.foms {
        Some(f) => {
            let (w, q, eta) = f.cycle.map_or((nan, nan, nan), |c| (c.work, c.heat_in, c.efficiency));
            vec![
                w,
                q,
                eta,
                f.dip.max,
                f.dip.mean,
                f.load_power.max,
                f.load_power.mean,
                f.delta_f.max,
                f.delta_f.mean,
                f.ergotropy.max,
                f.n_b.mean,
                f.min_variance,
                f.omega_eff_min,
                f.omega_eff_max,
                f.cycles as f64,
            ]
        }
        None => vec![nan; 15],
    };
    row.extend(vals.into_iter().map(fmt_f64));
    row
}

fn first_failure(rows: &[&SweepRow]) -> Option<String> {
    rows.iter().find_map(|r| match &r.status {
        RowStatus::Failed(e) => Some(format!("{} = {} ({}): {e}", r.axis.name(), fmt_f64(r.value), r.coupling.name())),
        _ => None,
    })
}

fn metric_series(rows: &[SweepRow], coupling: CouplingKind, f: impl Fn(&EngineFoms) -> f64) -> Vec<(f64, f64)> {
    rows.iter().filter(|r| r.coupling == coupling).filter_map(|r| r.foms.as_ref().map(|m| (r.value, f(m)))).collect()
}

/// Figures of merit along one parameter axis for each coupling.
pub fn sweep_cmd(ctx: &Context, axis: SweepAxis, values: &[f64], couplings: &[CouplingKind]) -> CliResult<()> {
    let base = ctx.params().clone();
    if values.is_empty() || couplings.is_empty() {
        return Err(CliError::Usage("a sweep needs at least one value and one coupling".into()));
    }
    for &c in couplings {
        for &v in values {
            let p = match axis {
                SweepAxis::NbarH => base.clone().with_nbar_h(v),
                SweepAxis::KappaL => base.clone().with_kappa_l(v),
            }
            .with_coupling(c);
            ctx.require_stable(&p)?;
        }
    }
    let rows = sweep_with(&base, axis, values, couplings, &ctx.cfg.solver, ctx.force);
    let failure = first_failure(&rows.iter().collect::<Vec<_>>());

    let mut sink = ctx.sink(Method::Master)?;
    if ctx.wants(Format::Csv) {
        let mut table = Table::new(&SWEEP_COLUMNS);
        for r in &rows {
            table.push(sweep_row(r));
        }
        if let Some(e) = &failure {
            table.fail(e);
        }
        sink.csv("sweep.csv", &table)?;
    }
    if ctx.wants(Format::Json) {
        let body = json!({
            "params": base,
            "convergence": { "axis": axis, "values": values, "couplings": couplings },
            "foms": { "rows": rows },
        });
        sink.json("sweep.json", body, failure.as_deref())?;
    }
    if ctx.wants(Format::Svg) {
        let log_x = axis == SweepAxis::KappaL;
        let mut dip = Vec::new();
        let mut df = Vec::new();
        for &c in couplings {
            dip.push(Series::new(c.name(), metric_series(&rows, c, |f| f.dip.max)));
            df.push(Series::new(c.name(), metric_series(&rows, c, |f| f.delta_f.max)));
        }
        let axes = Axes { log_x, closed: false };
        sink.svg("sweep_dip.svg", &svg::line_plot("dissipated internal power", axis.name(), "DIP max", &dip, axes))?;
        sink.svg("sweep_delta_f.svg", &svg::line_plot("piston work capacity", axis.name(), "delta F max", &df, axes))?;
    }
    match failure {
        Some(msg) => Err(CliError::Solver(classify(&rows, msg))),
        None => Ok(()),
    }
}

/// Recovers the error category of a failed row from its message so the exit
/// code reflects the first failure.
fn classify<'a>(rows: impl IntoIterator<Item = &'a SweepRow>, msg: String) -> otto_core::Error {
    let failed = rows.into_iter().find_map(|r| match &r.status {
        RowStatus::Failed(e) => Some(e.as_str()),
        _ => None,
    });
    match failed {
        Some(e) if e.starts_with("invalid") || e.starts_with("unsupported") => otto_core::Error::InvalidArgument(msg),
        _ => otto_core::Error::NonConvergence { cycles: 0, residual: f64::NAN },
    }
}

/// Quadratic against linear coupling at identical parameters, plus the load
/// power curves.
pub fn compare_cmd(ctx: &Context) -> CliResult<()> {
    let params = ctx.params().clone();
    for c in [CouplingKind::Quadratic, CouplingKind::Linear] {
        ctx.require_stable(&params.clone().with_coupling(c))?;
    }
    let cc = &ctx.cfg.compare;
    let grid = log_grid(cc.load_min, cc.load_max, cc.load_points);
    let cmp = compare_with(&params, &grid, &ctx.cfg.solver, ctx.force);
    let all: Vec<&SweepRow> = [&cmp.quadratic, &cmp.linear].into_iter().chain(cmp.load.iter()).collect();
    let failure = first_failure(&all);

    let mut sink = ctx.sink(Method::Master)?;
    if ctx.wants(Format::Csv) {
        let mut table = Table::new(&["quantity", "quadratic", "linear"]);
        let get = |r: &SweepRow, f: &dyn Fn(&EngineFoms) -> f64| r.foms.as_ref().map_or(f64::NAN, f);
        let quantities: [(&str, &dyn Fn(&EngineFoms) -> f64); 10] = [
            ("W_a", &|f| f.cycle.map_or(f64::NAN, |c| c.work)),
            ("Q_in", &|f| f.cycle.map_or(f64::NAN, |c| c.heat_in)),
            ("eta", &|f| f.cycle.map_or(f64::NAN, |c| c.efficiency)),
            ("dip_max", &|f| f.dip.max),
            ("dip_mean", &|f| f.dip.mean),
            ("delta_f_max", &|f| f.delta_f.max),
            ("ergotropy_max", &|f| f.ergotropy.max),
            ("n_b_mean", &|f| f.n_b.mean),
            ("omega_eff_min", &|f| f.omega_eff_min),
            ("omega_eff_max", &|f| f.omega_eff_max),
        ];
        for (name, f) in quantities {
            table.push(vec![name.to_string(), fmt_f64(get(&cmp.quadratic, f)), fmt_f64(get(&cmp.linear, f))]);
        }
        let q = cmp.best_load(CouplingKind::Quadratic);
        let l = cmp.best_load(CouplingKind::Linear);
        table.push(vec!["best_kappa_l".into(), fmt_f64(q.map_or(f64::NAN, |b| b.0)), fmt_f64(l.map_or(f64::NAN, |b| b.0))]);
        table.push(vec!["best_load_power".into(), fmt_f64(q.map_or(f64::NAN, |b| b.1)), fmt_f64(l.map_or(f64::NAN, |b| b.1))]);
        if let Some(e) = &failure {
            table.fail(e);
        }
        sink.csv("compare.csv", &table)?;

        let mut load = Table::new(&["kappa_l", "p_load_max_quadratic", "p_load_max_linear", "p_load_mean_quadratic", "p_load_mean_linear"]);
        for &k in &grid {
            let pick = |c: CouplingKind, f: fn(&EngineFoms) -> f64| {
                cmp.load.iter().find(|r| r.coupling == c && r.value == k).and_then(|r| r.foms.as_ref()).map_or(f64::NAN, f)
            };
            load.push_values(&[
                k,
                pick(CouplingKind::Quadratic, |f| f.load_power.max),
                pick(CouplingKind::Linear, |f| f.load_power.max),
                pick(CouplingKind::Quadratic, |f| f.load_power.mean),
                pick(CouplingKind::Linear, |f| f.load_power.mean),
            ]);
        }
        if let Some(e) = &failure {
            load.fail(e);
        }
        sink.csv("compare_load.csv", &load)?;
    }
    if ctx.wants(Format::Json) {
        let best = |c| cmp.best_load(c).map(|(k, p)| json!({ "kappa_l": k, "power": p }));
        let body = json!({
            "params": params,
            "convergence": {
                "quadratic": cmp.quadratic.foms.as_ref().map(|f| json!({ "cycles": f.cycles, "residual": f.residual })),
                "linear": cmp.linear.foms.as_ref().map(|f| json!({ "cycles": f.cycles, "residual": f.residual })),
                "load_grid": grid,
            },
            "foms": {
                "quadratic": cmp.quadratic,
                "linear": cmp.linear,
                "best_load": { "quadratic": best(CouplingKind::Quadratic), "linear": best(CouplingKind::Linear) },
                "load": cmp.load,
            },
        });
        sink.json("compare.json", body, failure.as_deref())?;
    }
    if ctx.wants(Format::Svg) {
        let s: Vec<Series> = [CouplingKind::Quadratic, CouplingKind::Linear]
            .into_iter()
            .map(|c| Series::new(c.name(), metric_series(&cmp.load, c, |f| f.load_power.max)))
            .collect();
        sink.svg("compare_load.svg", &svg::line_plot("power under load", "kappa_L", "P_L max", &s, Axes { log_x: true, closed: false }))?;
    }
    match failure {
        Some(msg) => Err(CliError::Solver(classify(all, msg))),
        None => Ok(()),
    }
}
