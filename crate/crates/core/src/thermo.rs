//! Effective Otto cycle of the optical mode and the engine figures of merit.
//!
//! The optical mode is treated as a thermal oscillator of frequency
//! `omega_eff = omega_a + g <q^k>` (`k` the coupling power). Its cycle is
//! traced in the `(omega_eff, U_a)` and `(S_a, T_eff)` planes; the piston is
//! characterised by its dissipated power, power under an added load and its
//! free-energy work capacity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{number, JointOperators};
use crate::lindblad::{
    build_liouvillian, limit_cycle, DensityMatrix, Observables, RecordMode, SolverOptions, Trajectory,
};
use crate::model::{is_stable, temperature_from_occupation, CouplingKind, EngineParams};
use crate::moments::MomentSample;
use crate::states::{
    effective_temperature, ergotropy, max_extractable_work, quadrature_stats, thermal_entropy, ReducedState,
};

/// Minimum number of samples a cycle diagram is built from.
pub const MIN_CYCLE_SAMPLES: usize = 200;

/// Largest relative endpoint mismatch for a diagram to count as closed.
pub const CLOSURE_TOL: f64 = 1e-6;

/// `omega_a + g <q^k>` for the joint state.
pub fn effective_frequency(rho: &DensityMatrix, params: &EngineParams) -> Result<f64> {
    let (dim_a, dim_b) = rho.dims();
    let ops = JointOperators::new(dim_a, dim_b)?;
    let x = ops.q.powi(params.coupling.power());
    Ok(params.omega_a + params.g * rho.expectation(&x).re)
}

/// `omega_eff` from recorded quadrature moments.
pub fn effective_frequency_from(params: &EngineParams, q: f64, q2: f64) -> f64 {
    match params.coupling {
        CouplingKind::Quadratic => params.omega_a + params.g * q2,
        CouplingKind::Linear => params.omega_a + params.g * q,
    }
}

/// Stage of the effective cycle a sample belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Drive on, occupation still rising at nearly fixed frequency.
    Heating,
    /// Drive on, frequency falling.
    Expansion,
    /// Drive on, frequency rising again before the drive switches off.
    TransitionExpansion,
    /// Drive off, occupation falling.
    Cooling,
    /// Drive off, frequency rising.
    Compression,
    /// Drive off, frequency falling again before the next heating stage.
    TransitionCompression,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Heating => "heating",
            Branch::Expansion => "expansion",
            Branch::TransitionExpansion => "transition_expansion",
            Branch::Cooling => "cooling",
            Branch::Compression => "compression",
            Branch::TransitionCompression => "transition_compression",
        }
    }
}

/// One point of the effective cycle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CyclePoint {
    pub t: f64,
    pub omega_eff: f64,
    pub n_a: f64,
    pub u_a: f64,
    pub s_a: f64,
    pub t_eff: f64,
    pub drive_on: bool,
    pub branch: Branch,
}

/// Which plane a cycle area is measured in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Plane {
    UVsOmega,
    TVsS,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleDiagram {
    pub samples: Vec<CyclePoint>,
    pub closed: bool,
    /// Largest endpoint mismatch over `omega_eff`, `U_a`, `S_a`, `T_eff`,
    /// each relative to the column's largest magnitude (at least 1).
    pub closure_error: f64,
}

/// Fraction of the occupation swing after which a heating or cooling stage
/// counts as finished.
const STAGE_FRACTION: f64 = 0.95;

fn label_branches(points: &mut [CyclePoint]) {
    let n = points.len();
    let mut start = 0;
    while start < n {
        let on = points[start].drive_on;
        let mut end = start;
        while end + 1 < n && points[end + 1].drive_on == on {
            end += 1;
        }
        let n0 = points[start].n_a;
        let extreme = points[start..=end]
            .iter()
            .map(|p| p.n_a)
            .fold(n0, |acc, v| if on { acc.max(v) } else { acc.min(v) });
        let swing = extreme - n0;
        let mut stage_done = false;
        for i in start..=end {
            if !stage_done {
                let progress = if swing.abs() > 0.0 { (points[i].n_a - n0) / swing } else { 1.0 };
                stage_done = i > start && progress >= STAGE_FRACTION;
            }
            let slope = if i < end {
                points[i + 1].omega_eff - points[i].omega_eff
            } else if i > start {
                points[i].omega_eff - points[i - 1].omega_eff
            } else {
                0.0
            };
            points[i].branch = match (on, stage_done) {
                (true, false) => Branch::Heating,
                (true, true) if slope <= 0.0 => Branch::Expansion,
                (true, true) => Branch::TransitionExpansion,
                (false, false) => Branch::Cooling,
                (false, true) if slope >= 0.0 => Branch::Compression,
                (false, true) => Branch::TransitionCompression,
            };
        }
        start = end + 1;
    }
}

fn point(t: f64, drive_on: bool, omega_eff: f64, n_a: f64, s_a: f64) -> CyclePoint {
    CyclePoint {
        t,
        omega_eff,
        n_a,
        u_a: omega_eff * n_a,
        s_a,
        t_eff: effective_temperature(n_a, omega_eff),
        drive_on,
        branch: Branch::Heating,
    }
}

impl CycleDiagram {
    /// Builds the diagram from labelled-less points; branch labels are
    /// assigned here.
    pub fn from_points(mut samples: Vec<CyclePoint>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidArgument("a cycle needs at least two samples".into()));
        }
        label_branches(&mut samples);
        let columns: [fn(&CyclePoint) -> f64; 4] = [|p| p.omega_eff, |p| p.u_a, |p| p.s_a, |p| p.t_eff];
        let (first, last) = (&samples[0], &samples[samples.len() - 1]);
        let closure_error = columns
            .iter()
            .map(|f| {
                let scale = samples.iter().map(|p| f(p).abs()).fold(1.0_f64, f64::max);
                (f(first) - f(last)).abs() / scale
            })
            .fold(0.0_f64, f64::max);
        Ok(Self { samples, closed: closure_error < CLOSURE_TOL, closure_error })
    }

    /// Diagram of one converged period of the master equation. The
    /// entropy is the von Neumann entropy of the reduced optical state.
    pub fn from_trajectory(traj: &Trajectory, params: &EngineParams) -> Result<Self> {
        if traj.cycle_residual.is_none() {
            return Err(Error::InvalidArgument("trajectory is not a converged limit cycle".into()));
        }
        if traj.len() < MIN_CYCLE_SAMPLES {
            return Err(Error::InvalidArgument(format!(
                "a cycle diagram needs at least {MIN_CYCLE_SAMPLES} samples, got {}",
                traj.len()
            )));
        }
        let points = traj
            .samples
            .iter()
            .map(|s| point(s.t, s.drive_on, effective_frequency_from(params, s.obs.q, s.obs.q2), s.obs.n_a, s.obs.s_a))
            .collect();
        Self::from_points(points)
    }

    /// Diagram of a moment-hierarchy period. The optical mode is taken as
    /// thermal, so its entropy follows from the occupation.
    pub fn from_moments(samples: &[MomentSample], params: &EngineParams) -> Result<Self> {
        let points = samples
            .iter()
            .map(|s| {
                let st = &s.state;
                point(s.t, s.drive_on, effective_frequency_from(params, 0.0, st.q2), st.n_a, thermal_entropy(st.n_a))
            })
            .collect();
        Self::from_points(points)
    }

    pub fn branches(&self) -> Vec<Branch> {
        let mut seen = Vec::new();
        for p in &self.samples {
            if !seen.contains(&p.branch) {
                seen.push(p.branch);
            }
        }
        seen
    }

    pub fn omega_range(&self) -> (f64, f64) {
        self.samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.omega_eff), hi.max(p.omega_eff)))
    }

    /// Mean `omega_eff` over the samples of one branch.
    pub fn branch_mean_omega(&self, branch: Branch) -> Option<f64> {
        let v: Vec<f64> = self.samples.iter().filter(|p| p.branch == branch).map(|p| p.omega_eff).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Last sample of the final contiguous run of `branch`.
    pub fn branch_end(&self, branch: Branch) -> Option<&CyclePoint> {
        self.samples.iter().rev().find(|p| p.branch == branch)
    }

    /// Sample at the end of the drive-on stage.
    pub fn end_of_heating(&self) -> Option<&CyclePoint> {
        self.samples.windows(2).find(|w| w[0].drive_on && !w[1].drive_on).map(|w| &w[1])
    }

    /// Sample at the end of the drive-off stage.
    pub fn end_of_cooling(&self) -> Option<&CyclePoint> {
        self.samples.windows(2).find(|w| !w[0].drive_on && w[1].drive_on).map(|w| &w[1])
    }
}

/// `sum_i (y_i + y_{i+1})/2 (x_{i+1} - x_i)` around the closed polygon.
fn loop_integral(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    (0..n).map(|i| {
        let j = (i + 1) % n;
        0.5 * (ys[i] + ys[j]) * (xs[j] - xs[i])
    }).sum()
}

/// Signed polygon area of the cycle, oriented so that engine operation is
/// positive: `∮ T dS` in the T–S plane and `-∮ U dω` in the U–ω plane.
pub fn cycle_area(diagram: &CycleDiagram, plane: Plane) -> Result<f64> {
    if !diagram.closed {
        return Err(Error::OpenCycle(format!("endpoint mismatch {:.3e}", diagram.closure_error)));
    }
    let col = |f: fn(&CyclePoint) -> f64| diagram.samples.iter().map(f).collect::<Vec<_>>();
    Ok(match plane {
        Plane::TVsS => loop_integral(&col(|p| p.s_a), &col(|p| p.t_eff)),
        Plane::UVsOmega => -loop_integral(&col(|p| p.omega_eff), &col(|p| p.u_a)),
    })
}

/// Heat taken in: `∫ T dS` over drive-on intervals on which the entropy
/// increases.
pub fn heat_in(diagram: &CycleDiagram) -> f64 {
    diagram
        .samples
        .windows(2)
        .filter(|w| w[0].drive_on && w[1].s_a > w[0].s_a)
        .map(|w| 0.5 * (w[0].t_eff + w[1].t_eff) * (w[1].s_a - w[0].s_a))
        .sum()
}

/// Work, heat intake and efficiency of one diagram.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleWork {
    pub work: f64,
    pub work_u_omega: f64,
    pub heat_in: f64,
    pub efficiency: f64,
}

pub fn cycle_work(diagram: &CycleDiagram) -> Result<CycleWork> {
    let work = cycle_area(diagram, Plane::TVsS)?;
    let work_u_omega = cycle_area(diagram, Plane::UVsOmega)?;
    let q = heat_in(diagram);
    let efficiency = if q > 0.0 { work / q } else { 0.0 };
    Ok(CycleWork { work, work_u_omega, heat_in: q, efficiency })
}

/// Dissipated internal power `omega_b kappa_b (<n_b> - nbar_b)` per sample.
pub fn dip_series(traj: &Trajectory, params: &EngineParams) -> Vec<f64> {
    traj.column(|o: &Observables| params.omega_b * params.kappa_b * (o.n_b - params.nbar_b))
}

/// Maximum and cycle average of a series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakMean {
    pub max: f64,
    pub mean: f64,
}

impl PeakMean {
    fn of(v: &[f64]) -> Self {
        if v.is_empty() {
            return Self { max: 0.0, mean: 0.0 };
        }
        // the last sample of a period repeats the first
        let body = if v.len() > 1 { &v[..v.len() - 1] } else { v };
        Self {
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: body.iter().sum::<f64>() / body.len() as f64,
        }
    }
}

pub fn dissipated_internal_power(traj: &Trajectory, params: &EngineParams) -> (Vec<f64>, PeakMean) {
    let series = dip_series(traj, params);
    let pm = PeakMean::of(&series);
    (series, pm)
}

/// Power into the load channel, `omega_b kappa_L (<n_b> - nbar_b)`, for a
/// trajectory already solved with the load attached.
pub fn load_power_series(traj: &Trajectory, params: &EngineParams) -> Vec<f64> {
    traj.column(|o: &Observables| params.omega_b * params.kappa_l * (o.n_b - params.nbar_b))
}

/// Mechanical bath temperature from its occupation.
pub fn bath_temperature(params: &EngineParams) -> Result<f64> {
    temperature_from_occupation(params.nbar_b, params.omega_b)
}

/// Free-energy work capacity of a mechanical state relative to the Gibbs
/// state of `omega_b n_b` at the bath temperature.
pub fn delta_free_energy(rho_b: &ReducedState, params: &EngineParams) -> Result<f64> {
    let h = number(rho_b.dim())?.scale_re(params.omega_b);
    max_extractable_work(rho_b, &h, bath_temperature(params)?)
}

/// A converged limit cycle together with its effective-cycle diagram.
#[derive(Clone, Debug)]
pub struct CycleRun {
    pub params: EngineParams,
    pub converged: DensityMatrix,
    pub trajectory: Trajectory,
    pub diagram: CycleDiagram,
}

/// Solves the limit cycle from the thermal initial state, recording reduced
/// states at every sample.
pub fn solve_cycle(params: &EngineParams, opts: &SolverOptions) -> Result<CycleRun> {
    params.validate()?;
    let mut opts = opts.clone();
    if opts.record_mode == RecordMode::ObservablesOnly {
        opts.record_mode = RecordMode::ReducedStates;
    }
    let l = build_liouvillian(params)?;
    let rho0 = DensityMatrix::initial(params);
    let (converged, trajectory) = limit_cycle(&rho0, &l, &params.schedule(), &opts)?;
    let diagram = CycleDiagram::from_trajectory(&trajectory, params)?;
    Ok(CycleRun { params: params.clone(), converged, trajectory, diagram })
}

/// Every figure of merit of one converged cycle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineFoms {
    pub cycles: usize,
    pub residual: f64,
    /// `None` when the diagram does not close.
    pub cycle: Option<CycleWork>,
    pub omega_eff_min: f64,
    pub omega_eff_max: f64,
    pub n_b: PeakMean,
    pub dip: PeakMean,
    pub load_power: PeakMean,
    pub delta_f: PeakMean,
    pub ergotropy: PeakMean,
    /// Smallest rotated-quadrature variance of the piston over the cycle.
    pub min_variance: f64,
}

pub fn engine_foms(run: &CycleRun) -> Result<EngineFoms> {
    let params = &run.params;
    let traj = &run.trajectory;
    let h = number(params.dim_b)?.scale_re(params.omega_b);
    let mut delta_f = Vec::with_capacity(traj.len());
    let mut ergo = Vec::with_capacity(traj.len());
    let mut min_variance = f64::INFINITY;
    for s in &traj.samples {
        let rho_b = s
            .rho_b
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("trajectory does not record reduced states".into()))?;
        delta_f.push(delta_free_energy(rho_b, params)?);
        ergo.push(ergotropy(rho_b, &h)?);
        min_variance = min_variance.min(quadrature_stats(rho_b).min_variance);
    }
    let (omega_eff_min, omega_eff_max) = run.diagram.omega_range();
    Ok(EngineFoms {
        cycles: traj.cycles,
        residual: traj.cycle_residual.unwrap_or(f64::NAN),
        cycle: cycle_work(&run.diagram).ok(),
        omega_eff_min,
        omega_eff_max,
        n_b: PeakMean::of(&traj.column(|o| o.n_b)),
        dip: dissipated_internal_power(traj, params).1,
        load_power: PeakMean::of(&load_power_series(traj, params)),
        delta_f: PeakMean::of(&delta_f),
        ergotropy: PeakMean::of(&ergo),
        min_variance,
    })
}

/// Power under load at `kappa_l`: re-solves the cycle with total mechanical
/// damping `kappa_b + kappa_l`. Zero without a load.
pub fn power_under_load(params: &EngineParams, kappa_l: f64, opts: &SolverOptions) -> Result<PeakMean> {
    if !(kappa_l >= 0.0 && kappa_l.is_finite()) {
        return Err(Error::InvalidParameter { name: "kappa_l", reason: format!("must be finite and >= 0, got {kappa_l}") });
    }
    if kappa_l == 0.0 {
        return Ok(PeakMean { max: 0.0, mean: 0.0 });
    }
    let loaded = params.clone().with_kappa_l(kappa_l);
    let run = solve_cycle(&loaded, &SolverOptions { record_mode: RecordMode::ObservablesOnly, ..opts.clone() })?;
    Ok(PeakMean::of(&load_power_series(&run.trajectory, &loaded)))
}

/// `n` logarithmically spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
        }
    }
}

/// Default load grid: 25 points over `[1e-3, 1e2] omega_b`.
pub fn default_load_grid() -> Vec<f64> {
    log_grid(1e-3, 1e2, 25)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    NbarH,
    KappaL,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::NbarH => "nbar_h",
            SweepAxis::KappaL => "kappa_l",
        }
    }

    fn apply(self, params: &EngineParams, value: f64) -> EngineParams {
        match self {
            SweepAxis::NbarH => params.clone().with_nbar_h(value),
            SweepAxis::KappaL => params.clone().with_kappa_l(value),
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nbar_h" => Ok(SweepAxis::NbarH),
            "kappa_l" | "kappa_L" => Ok(SweepAxis::KappaL),
            other => Err(Error::InvalidArgument(format!("unknown sweep axis '{other}' (expected nbar_h or kappa_l)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "detail", rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    /// Outside the mean-field stability bound; not simulated.
    Unstable,
    Failed(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub coupling: CouplingKind,
    /// Inside the mean-field stability bound.
    pub stable: bool,
    pub status: RowStatus,
    pub foms: Option<EngineFoms>,
}

/// Independent limit-cycle solves for every value and coupling, run in
/// parallel and returned in input order (values outer, couplings inner).
/// Points outside the stability bound are skipped.
pub fn sweep(
    base: &EngineParams,
    axis: SweepAxis,
    values: &[f64],
    couplings: &[CouplingKind],
    opts: &SolverOptions,
) -> Vec<SweepRow> {
    sweep_with(base, axis, values, couplings, opts, false)
}

/// [`sweep`], optionally also solving points outside the stability bound.
pub fn sweep_with(
    base: &EngineParams,
    axis: SweepAxis,
    values: &[f64],
    couplings: &[CouplingKind],
    opts: &SolverOptions,
    include_unstable: bool,
) -> Vec<SweepRow> {
    let jobs: Vec<(f64, CouplingKind)> =
        values.iter().flat_map(|&v| couplings.iter().map(move |&c| (v, c))).collect();
    jobs.par_iter()
        .map(|&(value, coupling)| {
            let params = axis.apply(base, value).with_coupling(coupling);
            let stable = is_stable(&params);
            let row = |status, foms| SweepRow { axis, value, coupling, stable, status, foms };
            if let Err(e) = params.validate() {
                return row(RowStatus::Failed(e.to_string()), None);
            }
            if !stable && !include_unstable {
                return row(RowStatus::Unstable, None);
            }
            match solve_cycle(&params, opts).and_then(|run| engine_foms(&run)) {
                Ok(f) => row(RowStatus::Ok, Some(f)),
                Err(e) => row(RowStatus::Failed(e.to_string()), None),
            }
        })
        .collect()
}

/// Quadratic and linear coupling side by side at identical parameters,
/// with the best load found on `load_grid`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub quadratic: SweepRow,
    pub linear: SweepRow,
    pub load: Vec<SweepRow>,
}

impl Comparison {
    /// Largest time-maximal load power over the grid and where it occurs.
    pub fn best_load(&self, coupling: CouplingKind) -> Option<(f64, f64)> {
        self.load
            .iter()
            .filter(|r| r.coupling == coupling)
            .filter_map(|r| r.foms.as_ref().map(|f| (r.value, f.load_power.max)))
            .fold(None, |best, (k, p)| match best {
                Some((_, bp)) if bp >= p => best,
                _ => Some((k, p)),
            })
    }
}

pub fn compare(params: &EngineParams, load_grid: &[f64], opts: &SolverOptions) -> Comparison {
    compare_with(params, load_grid, opts, false)
}

/// [`compare`], optionally also solving points outside the stability bound.
pub fn compare_with(params: &EngineParams, load_grid: &[f64], opts: &SolverOptions, include_unstable: bool) -> Comparison {
    let both = [CouplingKind::Quadratic, CouplingKind::Linear];
    let mut base = sweep_with(params, SweepAxis::NbarH, &[params.nbar_h], &both, opts, include_unstable).into_iter();
    let quadratic = base.next().expect("one row per coupling");
    let linear = base.next().expect("one row per coupling");
    let load = sweep_with(params, SweepAxis::KappaL, load_grid, &both, opts, include_unstable);
    Comparison { quadratic, linear, load }
}

/// Kinds of figure of merit reported with provenance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FomKind {
    CycleWork,
    HeatIn,
    Efficiency,
    DipMax,
    DipMean,
    LoadPower,
    LoadPowerMean,
    DeltaF,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FigureOfMerit {
    pub kind: FomKind,
    pub value: f64,
    pub params_hash: String,
}

/// Flattens [`EngineFoms`] into tagged values. Non-finite entries (for
/// example the work of an open diagram) are omitted.
pub fn figures_of_merit(foms: &EngineFoms, params: &EngineParams) -> Vec<FigureOfMerit> {
    let hash = params.fingerprint();
    let mut out = Vec::new();
    if let Some(c) = foms.cycle {
        out.extend([(FomKind::CycleWork, c.work), (FomKind::HeatIn, c.heat_in), (FomKind::Efficiency, c.efficiency)]);
    }
    out.extend([
        (FomKind::DipMax, foms.dip.max),
        (FomKind::DipMean, foms.dip.mean),
        (FomKind::LoadPower, foms.load_power.max),
        (FomKind::LoadPowerMean, foms.load_power.mean),
        (FomKind::DeltaF, foms.delta_f.max),
    ]);
    out.into_iter()
        .filter(|(_, v)| v.is_finite())
        .map(|(kind, value)| FigureOfMerit { kind, value, params_hash: hash.clone() })
        .collect()
}
