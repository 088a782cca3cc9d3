//! Time integration of the piecewise-constant master equation and the
//! stroboscopic limit-cycle search.
//!
//! States are propagated as real vectors on a [`PackedSpace`]. Two backends
//! are available: fixed-step RK4 and exact exponentials of the packed
//! generator, cached per (segment, step length).

use std::collections::HashMap;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{DensityMatrix, Liouvillian, PackedSpace, POSITIVITY_TOL, TRACE_TOL};
use crate::error::{Error, Result};
use crate::fock::JointOperators;
use crate::linalg;
use crate::model::DriveSchedule;
use crate::sparse::Csr;
use crate::states::{Mode, ReducedState};
use crate::C64;

/// Integration backend.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Rk4,
    Expm,
    /// `Expm` for joint dimensions up to 100, `Rk4` above.
    #[default]
    Auto,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Rk4 => "rk4",
            Backend::Expm => "expm",
            Backend::Auto => "auto",
        }
    }

    fn resolve(self, dim_a: usize, dim_b: usize) -> Backend {
        match self {
            Backend::Auto if dim_a * dim_b <= 100 => Backend::Expm,
            Backend::Auto => Backend::Rk4,
            other => other,
        }
    }
}

impl FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk4" => Ok(Backend::Rk4),
            "expm" => Ok(Backend::Expm),
            "auto" => Ok(Backend::Auto),
            other => Err(Error::InvalidArgument(format!("unknown backend `{other}`"))),
        }
    }
}

/// What each trajectory sample keeps besides the observables.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordMode {
    FullState,
    ReducedStates,
    #[default]
    ObservablesOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub backend: Backend,
    /// RK4 step; `None` means one thousandth of the drive period.
    pub dt: Option<f64>,
    pub samples_per_period: usize,
    pub record_mode: RecordMode,
    /// Stroboscopic trace-distance tolerance of the limit-cycle search.
    pub tol: f64,
    pub max_cycles: usize,
    /// Check trace and positivity of every sample.
    pub check_invariants: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            backend: Backend::Auto,
            dt: None,
            samples_per_period: 1024,
            record_mode: RecordMode::ObservablesOnly,
            tol: 1e-7,
            max_cycles: 2000,
            check_invariants: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::InvalidParameter { name: "dt", reason: format!("must be > 0, got {dt}") });
            }
        }
        if self.samples_per_period < 2 {
            return Err(Error::InvalidParameter { name: "samples_per_period", reason: "must be at least 2".into() });
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter { name: "tol", reason: format!("must be > 0, got {}", self.tol) });
        }
        if self.max_cycles == 0 {
            return Err(Error::InvalidParameter { name: "max_cycles", reason: "must be at least 1".into() });
        }
        Ok(())
    }
}

/// Expectation values recorded at every sample.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub trace: f64,
    pub n_a: f64,
    pub n_b: f64,
    pub q: f64,
    pub p: f64,
    pub q2: f64,
    pub p2: f64,
    /// `<qp + pq> / 2`.
    pub qp_sym: f64,
    /// Von Neumann entropy of the reduced optical state.
    pub s_a: f64,
}

/// Trace error and smallest eigenvalue of a sampled state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub trace_error: f64,
    pub min_eigenvalue: f64,
}

#[derive(Clone, Debug)]
pub struct Sample {
    pub t: f64,
    /// Drive state on the interval that starts at `t`.
    pub drive_on: bool,
    pub obs: Observables,
    pub diagnostics: Option<Diagnostics>,
    pub rho_a: Option<ReducedState>,
    pub rho_b: Option<ReducedState>,
    pub state: Option<DensityMatrix>,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub dims: (usize, usize),
    /// Backend actually used (never `Auto`).
    pub backend: Backend,
    pub samples: Vec<Sample>,
    /// Whole periods iterated by a limit-cycle search.
    pub cycles: usize,
    /// Final stroboscopic trace distance of a limit-cycle search.
    pub cycle_residual: Option<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// One observable as a column.
    pub fn column(&self, f: impl Fn(&Observables) -> f64) -> Vec<f64> {
        self.samples.iter().map(|s| f(&s.obs)).collect()
    }
}

struct Weights {
    trace: Vec<f64>,
    n_a: Vec<f64>,
    n_b: Vec<f64>,
    q: Vec<f64>,
    p: Vec<f64>,
    q2: Vec<f64>,
    p2: Vec<f64>,
    qp_sym: Vec<f64>,
}

fn real_weights(space: &PackedSpace, op: &crate::CMatrix) -> Vec<f64> {
    space.functional(op).into_iter().map(|w| w.re).collect()
}

fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Propagates packed states under a [`Liouvillian`] and a drive schedule.
pub struct Propagator {
    space: PackedSpace,
    gen_off: Csr<f64>,
    gen_on: Csr<f64>,
    backend: Backend,
    max_step_off: f64,
    max_step_on: f64,
    cache: HashMap<(bool, i64), DMatrix<f64>>,
    weights: Weights,
}

const STEP_QUANTUM: f64 = 1e-12;

impl Propagator {
    /// Restricts the generator to the entries reachable from the support of
    /// `seed`.
    pub fn new(l: &Liouvillian, seed: &DensityMatrix, opts: &SolverOptions) -> Result<Self> {
        opts.validate()?;
        let (dim_a, dim_b) = l.dims();
        if seed.dims() != (dim_a, dim_b) {
            return Err(Error::DimensionMismatch(format!(
                "state dims {:?} do not match generator dims ({dim_a}, {dim_b})",
                seed.dims()
            )));
        }
        let cols_off = l.segment_off.transpose();
        let cols_on = l.segment_on.transpose();
        let m = seed.matrix();
        let n = seed.dim();
        let seeds: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| m[(i, j)] != C64::new(0.0, 0.0))
            .collect();
        let space = PackedSpace::reachable(dim_a, dim_b, &[&cols_off, &cols_on], seeds);
        let gen_off = space.real_generator(&cols_off)?;
        let gen_on = space.real_generator(&cols_on)?;
        let period = l.params().drive_period();
        let dt = opts.dt.unwrap_or(1e-3 * period);
        let cap = |g: &Csr<f64>| dt.min(2.5 / g.norm_inf().max(1e-300));
        let backend = opts.backend.resolve(dim_a, dim_b);
        let ops = JointOperators::new(dim_a, dim_b)?;
        let q2 = &ops.q * &ops.q;
        let p2 = &ops.p * &ops.p;
        let qp = (&(&ops.q * &ops.p) + &(&ops.p * &ops.q)).scale_re(0.5);
        let weights = Weights {
            trace: space.trace_weights(),
            n_a: real_weights(&space, ops.n_a.matrix()),
            n_b: real_weights(&space, ops.n_b.matrix()),
            q: real_weights(&space, ops.q.matrix()),
            p: real_weights(&space, ops.p.matrix()),
            q2: real_weights(&space, q2.matrix()),
            p2: real_weights(&space, p2.matrix()),
            qp_sym: real_weights(&space, qp.matrix()),
        };
        log::debug!(
            "propagator: dims ({dim_a}, {dim_b}), {} tracked entries, real dimension {}, backend {}",
            space.n_pairs(),
            space.real_dim(),
            backend.name()
        );
        Ok(Self {
            max_step_off: cap(&gen_off),
            max_step_on: cap(&gen_on),
            space,
            gen_off,
            gen_on,
            backend,
            cache: HashMap::new(),
            weights,
        })
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn space(&self) -> &PackedSpace {
        &self.space
    }

    pub fn generator(&self, drive_on: bool) -> &Csr<f64> {
        if drive_on {
            &self.gen_on
        } else {
            &self.gen_off
        }
    }

    pub fn pack(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        self.space.pack(rho.matrix())
    }

    pub fn unpack(&self, x: &[f64], time: f64) -> DensityMatrix {
        let (a, b) = self.space.dims();
        DensityMatrix::new(a, b, self.space.unpack(x), time).expect("packed dimensions are consistent")
    }

    /// Dense `exp(G tau)`; cached.
    pub fn exponential(&mut self, drive_on: bool, tau: f64) -> &DMatrix<f64> {
        let key = (drive_on, (tau / STEP_QUANTUM).round() as i64);
        let gen = if drive_on { &self.gen_on } else { &self.gen_off };
        self.cache.entry(key).or_insert_with(|| {
            let dense = gen.to_dense() * tau;
            linalg::expm(&dense)
        })
    }

    fn step_constant(&mut self, x: &mut Vec<f64>, drive_on: bool, tau: f64) {
        if tau <= 0.0 {
            return;
        }
        match self.backend {
            Backend::Expm => {
                let p = self.exponential(drive_on, tau);
                let v = DVector::from_column_slice(x);
                let out = p * v;
                x.copy_from_slice(out.as_slice());
            }
            _ => {
                let cap = if drive_on { self.max_step_on } else { self.max_step_off };
                let steps = (tau / cap).ceil().max(1.0) as usize;
                let h = tau / steps as f64;
                let gen = if drive_on { &self.gen_on } else { &self.gen_off };
                rk4(gen, x, h, steps);
            }
        }
    }

    /// Advances `x` from `t0` to `t1`, switching generators at drive edges.
    pub fn advance(&mut self, x: &mut Vec<f64>, schedule: &DriveSchedule, t0: f64, t1: f64) {
        let mut t = t0;
        let eps = 1e-12 * schedule.period.max(1.0);
        while t < t1 - eps {
            let edge = schedule.next_edge(t);
            let end = if edge < t1 - eps { edge } else { t1 };
            let on = schedule.is_on_after(t);
            self.step_constant(x, on, end - t);
            t = end;
        }
    }

    /// Dense propagator over `[t0, t1]` (expm backend only).
    pub fn interval_map(&mut self, schedule: &DriveSchedule, t0: f64, t1: f64) -> DMatrix<f64> {
        let n = self.space.real_dim();
        let mut total = DMatrix::<f64>::identity(n, n);
        let mut t = t0;
        let eps = 1e-12 * schedule.period.max(1.0);
        while t < t1 - eps {
            let edge = schedule.next_edge(t);
            let end = if edge < t1 - eps { edge } else { t1 };
            let on = schedule.is_on_after(t);
            let p = self.exponential(on, end - t);
            total = p * total;
            t = end;
        }
        total
    }

    pub fn observables(&self, x: &[f64]) -> Observables {
        let w = &self.weights;
        let rho_a = self.space.reduce_optical(x);
        let probs: Vec<f64> = linalg::hermitian_eigenvalues_blocked(&rho_a).into_iter().map(|v| v.max(0.0)).collect();
        Observables {
            trace: dot(&w.trace, x),
            n_a: dot(&w.n_a, x),
            n_b: dot(&w.n_b, x),
            q: dot(&w.q, x),
            p: dot(&w.p, x),
            q2: dot(&w.q2, x),
            p2: dot(&w.p2, x),
            qp_sym: dot(&w.qp_sym, x),
            s_a: linalg::shannon_entropy(&probs),
        }
    }

    pub fn diagnostics(&self, x: &[f64]) -> Diagnostics {
        let eig = self.space.eigenvalues(x);
        Diagnostics {
            trace_error: (self.space.trace(x) - 1.0).abs(),
            min_eigenvalue: eig.first().copied().unwrap_or(0.0),
        }
    }

    /// Observables, optional diagnostics and reduced states of a packed state.
    pub fn sample(&self, x: &[f64], t: f64, schedule: &DriveSchedule, opts: &SolverOptions) -> Result<Sample> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { time: t });
        }
        let diagnostics = if opts.check_invariants {
            let d = self.diagnostics(x);
            enforce(&d, t)?;
            Some(d)
        } else {
            None
        };
        let (rho_a, rho_b) = match opts.record_mode {
            RecordMode::ObservablesOnly => (None, None),
            _ => (
                Some(ReducedState::new(Mode::Optical, self.space.reduce_optical(x))?),
                Some(ReducedState::new(Mode::Mechanical, self.space.reduce_mechanical(x))?),
            ),
        };
        let state = match opts.record_mode {
            RecordMode::FullState => Some(self.unpack(x, t)),
            _ => None,
        };
        Ok(Sample {
            t,
            drive_on: schedule.is_on_after(t),
            obs: self.observables(x),
            diagnostics,
            rho_a,
            rho_b,
            state,
        })
    }
}

/// Warns at ten times the state tolerances and aborts at a hundred times.
fn enforce(d: &Diagnostics, time: f64) -> Result<()> {
    let trace_ratio = d.trace_error / TRACE_TOL;
    let pos_ratio = (-d.min_eigenvalue).max(0.0) / POSITIVITY_TOL;
    let worst = trace_ratio.max(pos_ratio);
    if worst > 100.0 {
        return Err(Error::InvariantViolation {
            time,
            detail: format!("|tr - 1| = {:e}, min eigenvalue {:e}", d.trace_error, d.min_eigenvalue),
        });
    }
    if worst > 10.0 {
        log::warn!(
            "state invariants degraded at t = {time}: |tr - 1| = {:e}, min eigenvalue {:e}",
            d.trace_error,
            d.min_eigenvalue
        );
    }
    Ok(())
}

fn rk4(gen: &Csr<f64>, x: &mut [f64], h: f64, steps: usize) {
    let n = x.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    for _ in 0..steps {
        gen.matvec_into(x, &mut k1);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        gen.matvec_into(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        gen.matvec_into(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = x[i] + h * k3[i];
        }
        gen.matvec_into(&tmp, &mut k4);
        for i in 0..n {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

fn sample_times(t0: f64, t_final: f64, every: f64) -> Vec<f64> {
    let n = ((t_final - t0) / every * (1.0 + 1e-12)).floor() as usize;
    let mut times: Vec<f64> = (0..=n).map(|k| t0 + k as f64 * every).collect();
    if t_final - times[times.len() - 1] > 1e-9 * every {
        times.push(t_final);
    }
    times
}

/// Integrates from `rho0.time` to the absolute time `t_final`, sampling every
/// `sample_every` (the end point is always sampled).
pub fn evolve(
    rho0: &DensityMatrix,
    l: &Liouvillian,
    schedule: &DriveSchedule,
    t_final: f64,
    sample_every: f64,
    opts: &SolverOptions,
) -> Result<Trajectory> {
    schedule.validate()?;
    if !(t_final > rho0.time) {
        return Err(Error::InvalidArgument(format!("t_final = {t_final} must exceed the start time {}", rho0.time)));
    }
    if !(sample_every > 0.0) {
        return Err(Error::InvalidArgument(format!("sample spacing must be > 0, got {sample_every}")));
    }
    let mut prop = Propagator::new(l, rho0, opts)?;
    let mut x = prop.pack(rho0)?;
    let times = sample_times(rho0.time, t_final, sample_every);
    let mut samples = Vec::with_capacity(times.len());
    let mut t = rho0.time;
    for &ts in &times {
        prop.advance(&mut x, schedule, t, ts);
        t = ts;
        samples.push(prop.sample(&x, t, schedule, opts)?);
    }
    Ok(Trajectory { dims: l.dims(), backend: prop.backend(), samples, cycles: 0, cycle_residual: None })
}

/// Iterates whole drive periods, starting at the first heating onset at or
/// after `rho0.time`, until successive stroboscopic states are closer than
/// `opts.tol` in trace distance. Returns the converged state at a heating
/// onset and one period sampled `opts.samples_per_period` times (both end
/// points included).
pub fn limit_cycle(
    rho0: &DensityMatrix,
    l: &Liouvillian,
    schedule: &DriveSchedule,
    opts: &SolverOptions,
) -> Result<(DensityMatrix, Trajectory)> {
    schedule.validate()?;
    let mut prop = Propagator::new(l, rho0, opts)?;
    let mut x = prop.pack(rho0)?;
    let period = schedule.period;
    let mut t = schedule.next_onset(rho0.time);
    prop.advance(&mut x, schedule, rho0.time, t);

    let one_period = match prop.backend() {
        Backend::Expm => Some(prop.interval_map(schedule, t, t + period)),
        _ => None,
    };
    let mut residual = f64::INFINITY;
    let mut cycles = 0;
    while cycles < opts.max_cycles {
        let prev = x.clone();
        match &one_period {
            Some(m) => {
                let out = m * DVector::from_column_slice(&x);
                x.copy_from_slice(out.as_slice());
            }
            None => prop.advance(&mut x, schedule, t, t + period),
        }
        t += period;
        cycles += 1;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { time: t });
        }
        residual = prop.space().trace_distance(&x, &prev);
        if residual < opts.tol {
            break;
        }
    }
    if residual >= opts.tol {
        return Err(Error::NonConvergence { cycles, residual });
    }
    log::info!("limit cycle after {cycles} periods, residual {residual:e}");

    let converged = prop.unpack(&x, t);
    let dt = period / opts.samples_per_period as f64;
    let mut samples = Vec::with_capacity(opts.samples_per_period + 1);
    let t_start = t;
    samples.push(prop.sample(&x, t, schedule, opts)?);
    for k in 1..=opts.samples_per_period {
        let tk = t_start + k as f64 * dt;
        prop.advance(&mut x, schedule, t, tk);
        t = tk;
        samples.push(prop.sample(&x, t, schedule, opts)?);
    }
    let traj = Trajectory { dims: l.dims(), backend: prop.backend(), samples, cycles, cycle_residual: Some(residual) };
    Ok((converged, traj))
}
