//! Moment hierarchy for the quadratic model, closed at sixth order.
//!
//! Expectations of the form `<n_a X>` with `X` a mechanical quadratic are
//! propagated together with the mechanical second moments. The only
//! unclosed terms are `<n_a^2 q^2>` and `<n_a^2 (qp + pq)>`, replaced by a
//! [`Closure`]. Two equation sets are provided: one derived from the adjoint
//! master equation (the default) and an alternative form kept for
//! comparison.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::JointOperators;
use crate::lindblad::DensityMatrix;
use crate::model::{CouplingKind, DriveSchedule, EngineParams};
use crate::C64;

/// Which equation set to integrate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Derived from the adjoint master equation. Couples `<n_a X>` to the
    /// bare `<X>` through the optical pumping term `A <X>`.
    #[default]
    Rederived,
    /// Alternative form with constant `A` terms, `+g` in the occupation
    /// equation and complex damping coefficients.
    AsPrinted,
}

/// Factorisation of `<n_a^2 X>`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Closure {
    /// `<n_a^2 X> ≈ <n_a> <n_a X>`.
    #[default]
    MeanField,
    /// `<n_a^2 X> ≈ (<n_a^2> / <n_a>) <n_a X>`, exact when the photon number
    /// and `X` are independent.
    OpticalRatio,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentOptions {
    pub variant: Variant,
    pub closure: Closure,
    /// RK4 step; `None` means one thousandth of the drive period.
    pub dt: Option<f64>,
}

impl Default for MomentOptions {
    fn default() -> Self {
        Self { variant: Variant::Rederived, closure: Closure::MeanField, dt: None }
    }
}

/// Moments tracked by the hierarchy. `qp` and `c_qp` use the symmetric
/// product `C = qp + pq`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MomentState {
    pub n_a: f64,
    /// `<n_a^2>`.
    pub n_a2: f64,
    pub n_b: f64,
    pub q2: f64,
    pub p2: f64,
    /// `<qp + pq>`.
    pub qp: f64,
    /// `<n_a (qp + pq)>`.
    pub c_qp: C64,
    pub c_q2: C64,
    pub c_p2: C64,
    /// `<n_a n_b>`.
    pub c_nn: C64,
    /// `<n_a b†²>`.
    pub c_b2: C64,
}

/// Exact sixth-order correlators `<n_a^2 q^2>` and `<n_a^2 (qp + pq)>`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SixthOrder {
    pub n2_q2: C64,
    pub n2_qp: C64,
}

impl MomentState {
    /// Product of thermal states at the cold occupations.
    pub fn thermal(params: &EngineParams) -> Self {
        let n = params.nbar_a;
        let nb = params.nbar_b;
        let x2 = 2.0 * nb + 1.0;
        Self {
            n_a: n,
            n_a2: n + 2.0 * n * n,
            n_b: nb,
            q2: x2,
            p2: x2,
            qp: 0.0,
            c_qp: C64::new(0.0, 0.0),
            c_q2: C64::new(n * x2, 0.0),
            c_p2: C64::new(n * x2, 0.0),
            c_nn: C64::new(n * nb, 0.0),
            c_b2: C64::new(0.0, 0.0),
        }
    }

    /// Moments of a joint density matrix, plus its exact sixth-order terms.
    pub fn from_density(rho: &DensityMatrix) -> Result<(Self, SixthOrder)> {
        let (dim_a, dim_b) = rho.dims();
        let ops = JointOperators::new(dim_a, dim_b)?;
        let q2 = &ops.q * &ops.q;
        let p2 = &ops.p * &ops.p;
        let c = &(&ops.q * &ops.p) + &(&ops.p * &ops.q);
        let n2 = &ops.n_a * &ops.n_a;
        let bd2 = &ops.b.adjoint() * &ops.b.adjoint();
        let ev = |op: &crate::Operator| rho.expectation(op);
        let state = Self {
            n_a: ev(&ops.n_a).re,
            n_a2: ev(&n2).re,
            n_b: ev(&ops.n_b).re,
            q2: ev(&q2).re,
            p2: ev(&p2).re,
            qp: ev(&c).re,
            c_qp: ev(&(&ops.n_a * &c)),
            c_q2: ev(&(&ops.n_a * &q2)),
            c_p2: ev(&(&ops.n_a * &p2)),
            c_nn: ev(&(&ops.n_a * &ops.n_b)),
            c_b2: ev(&(&ops.n_a * &bd2)),
        };
        let six = SixthOrder { n2_q2: ev(&(&n2 * &q2)), n2_qp: ev(&(&n2 * &c)) };
        Ok((state, six))
    }

    fn combine(&self, other: &Self, h: f64) -> Self {
        Self {
            n_a: self.n_a + h * other.n_a,
            n_a2: self.n_a2 + h * other.n_a2,
            n_b: self.n_b + h * other.n_b,
            q2: self.q2 + h * other.q2,
            p2: self.p2 + h * other.p2,
            qp: self.qp + h * other.qp,
            c_qp: self.c_qp + other.c_qp * h,
            c_q2: self.c_q2 + other.c_q2 * h,
            c_p2: self.c_p2 + other.c_p2 * h,
            c_nn: self.c_nn + other.c_nn * h,
            c_b2: self.c_b2 + other.c_b2 * h,
        }
    }

    fn is_finite(&self) -> bool {
        [self.n_a, self.n_a2, self.n_b, self.q2, self.p2, self.qp].iter().all(|v| v.is_finite())
            && [self.c_qp, self.c_q2, self.c_p2, self.c_nn, self.c_b2].iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

fn closure_terms(s: &MomentState, closure: Closure) -> SixthOrder {
    let factor = match closure {
        Closure::MeanField => s.n_a,
        Closure::OpticalRatio if s.n_a > 0.0 => s.n_a2 / s.n_a,
        Closure::OpticalRatio => 0.0,
    };
    SixthOrder { n2_q2: s.c_q2 * factor, n2_qp: s.c_qp * factor }
}

/// Time derivative of every moment, closing the hierarchy with `closure`.
pub fn moment_rhs(state: &MomentState, params: &EngineParams, drive_on: bool, opts: &MomentOptions) -> MomentState {
    let six = closure_terms(state, opts.closure);
    moment_rhs_with(state, params, drive_on, opts.variant, &six)
}

/// Time derivative with the sixth-order correlators supplied explicitly.
pub fn moment_rhs_with(
    s: &MomentState,
    params: &EngineParams,
    drive_on: bool,
    variant: Variant,
    six: &SixthOrder,
) -> MomentState {
    match variant {
        Variant::Rederived => rederived(s, params, drive_on, six),
        Variant::AsPrinted => as_printed(s, params, drive_on, six),
    }
}

fn rederived(s: &MomentState, params: &EngineParams, drive_on: bool, six: &SixthOrder) -> MomentState {
    let (down, up) = params.optical_rates(drive_on);
    let (a, b) = (up, down - up);
    let w = params.omega_b;
    let g = params.g;
    let k = params.kappa_mech();
    let x_th = 2.0 * params.nbar_b + 1.0;
    let n = s.n_a;
    let (cq2, cp2, cqp) = (s.c_q2.re, s.c_p2.re, s.c_qp.re);
    let (n2q2, n2qp) = (six.n2_q2.re, six.n2_qp.re);

    let dn = a - b * n;
    let dn2 = -2.0 * b * s.n_a2 + (down + 3.0 * up) * n + up;
    let dq2 = w * s.qp - k * (s.q2 - x_th);
    let dp2 = -w * s.qp - 4.0 * g * cqp - k * (s.p2 - x_th);
    let dqp = 2.0 * w * (s.p2 - s.q2) - 8.0 * g * cq2 - k * s.qp;
    let dcq2 = w * cqp - k * (cq2 - x_th * n) + a * s.q2 - b * cq2;
    let dcp2 = -w * cqp - 4.0 * g * n2qp - k * (cp2 - x_th * n) + a * s.p2 - b * cp2;
    let dcqp = 2.0 * w * (cp2 - cq2) - 8.0 * g * n2q2 - k * cqp + a * s.qp - b * cqp;

    let re = |x: f64| C64::new(x, 0.0);
    MomentState {
        n_a: dn,
        n_a2: dn2,
        n_b: 0.25 * (dq2 + dp2),
        q2: dq2,
        p2: dp2,
        qp: dqp,
        c_qp: re(dcqp),
        c_q2: re(dcq2),
        c_p2: re(dcp2),
        c_nn: re(0.25 * (dcq2 + dcp2 - 2.0 * dn)),
        c_b2: C64::new(0.25 * (dcq2 - dcp2), -0.25 * dcqp),
    }
}

fn as_printed(s: &MomentState, params: &EngineParams, drive_on: bool, six: &SixthOrder) -> MomentState {
    let (a, b) = params.rate_coefficients(drive_on);
    let w = params.omega_b;
    let g = params.g;
    let k = params.kappa_mech();
    let nb_th = params.nbar_b;
    let i = C64::new(0.0, 1.0);
    let ac = C64::new(a, 0.0);
    let n = s.n_a;

    let dn = a - b * n;
    let dnb = k * (nb_th - s.n_b) + g * s.c_qp.re;
    let dcqp = ac - s.c_qp * b - (C64::new(w, 0.0) - i * k) * (s.c_q2 - s.c_p2) + i * 8.0 * g * six.n2_q2
        - i * 4.0 * k * s.c_b2;
    let bath = (C64::new(nb_th, 0.0) - s.c_nn + s.c_b2) * (2.0 * k);
    let dcq2 = ac - s.c_q2 * b + (C64::new(w, 0.0) - i * (0.5 * k)) * s.c_qp + bath;
    let dcp2 = ac - s.c_p2 * b - (C64::new(w, 0.0) + i * (0.5 * k)) * s.c_qp + bath + six.n2_qp * (4.0 * g);
    let dcnn = ac - s.c_nn * b + (C64::new(nb_th, 0.0) - s.c_nn) * k + six.n2_qp * (2.0 * g);
    let dcb2 = ac + (i * (2.0 * (w + 2.0 * g)) - b - k * nb_th) * s.c_b2 - i * (2.0 * g) * (s.c_nn * 2.0 + n);

    let (down, up) = params.optical_rates(drive_on);
    MomentState {
        n_a: dn,
        n_a2: -2.0 * b * s.n_a2 + (down + 3.0 * up) * n + up,
        n_b: dnb,
        // Not part of this equation set; kept isotropic and consistent with n_b.
        q2: 2.0 * dnb,
        p2: 2.0 * dnb,
        qp: 0.0,
        c_qp: dcqp,
        c_q2: dcq2,
        c_p2: dcp2,
        c_nn: dcnn,
        c_b2: dcb2,
    }
}

/// One recorded point of a moment trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSample {
    pub t: f64,
    pub drive_on: bool,
    pub state: MomentState,
}

const DIVERGENCE_LIMIT: f64 = 1e6;

struct Stepper<'a> {
    params: &'a EngineParams,
    schedule: &'a DriveSchedule,
    opts: &'a MomentOptions,
    dt: f64,
}

impl Stepper<'_> {
    fn rk4(&self, s: &MomentState, on: bool, h: f64) -> MomentState {
        let f = |x: &MomentState| moment_rhs(x, self.params, on, self.opts);
        let k1 = f(s);
        let k2 = f(&s.combine(&k1, 0.5 * h));
        let k3 = f(&s.combine(&k2, 0.5 * h));
        let k4 = f(&s.combine(&k3, h));
        s.combine(&k1, h / 6.0).combine(&k2, h / 3.0).combine(&k3, h / 3.0).combine(&k4, h / 6.0)
    }

    fn advance(&self, s: &mut MomentState, t0: f64, t1: f64) -> Result<()> {
        let mut t = t0;
        let eps = 1e-12 * self.schedule.period.max(1.0);
        while t < t1 - eps {
            let edge = self.schedule.next_edge(t);
            let end = if edge < t1 - eps { edge } else { t1 };
            let on = self.schedule.is_on_after(t);
            let steps = ((end - t) / self.dt).ceil().max(1.0) as usize;
            let h = (end - t) / steps as f64;
            for _ in 0..steps {
                *s = self.rk4(s, on, h);
            }
            t = end;
            if !s.is_finite() || s.n_a.abs() > DIVERGENCE_LIMIT || s.n_b.abs() > DIVERGENCE_LIMIT {
                return Err(Error::Divergence { time: t });
            }
        }
        Ok(())
    }
}

fn check_supported(params: &EngineParams) -> Result<()> {
    params.validate()?;
    if params.coupling != CouplingKind::Quadratic {
        return Err(Error::Unsupported("the moment hierarchy is implemented for quadratic coupling only".into()));
    }
    Ok(())
}

/// RK4 integration from `t0` to `t_final`, sampling every `sample_every`.
pub fn integrate_moments(
    initial: &MomentState,
    params: &EngineParams,
    schedule: &DriveSchedule,
    t0: f64,
    t_final: f64,
    sample_every: f64,
    opts: &MomentOptions,
) -> Result<Vec<MomentSample>> {
    check_supported(params)?;
    schedule.validate()?;
    if !(t_final > t0) {
        return Err(Error::InvalidArgument(format!("t_final = {t_final} must exceed the start time {t0}")));
    }
    if !(sample_every > 0.0) {
        return Err(Error::InvalidArgument(format!("sample spacing must be > 0, got {sample_every}")));
    }
    let stepper = Stepper { params, schedule, opts, dt: opts.dt.unwrap_or(1e-3 * schedule.period) };
    let n = ((t_final - t0) / sample_every * (1.0 + 1e-12)).floor() as usize;
    let mut times: Vec<f64> = (0..=n).map(|k| t0 + k as f64 * sample_every).collect();
    if t_final - times[times.len() - 1] > 1e-9 * sample_every {
        times.push(t_final);
    }
    let mut s = *initial;
    let mut t = t0;
    let mut out = Vec::with_capacity(times.len());
    for ts in times {
        stepper.advance(&mut s, t, ts)?;
        t = ts;
        out.push(MomentSample { t, drive_on: schedule.is_on_after(t), state: s });
    }
    Ok(out)
}

/// Iterates whole periods from the first heating onset until successive
/// stroboscopic states differ by less than `tol` (largest absolute change of
/// the tracked moments), then samples one period. Returns the period and the
/// number of cycles iterated.
pub fn moment_limit_cycle(
    initial: &MomentState,
    params: &EngineParams,
    schedule: &DriveSchedule,
    opts: &MomentOptions,
    samples_per_period: usize,
    tol: f64,
    max_cycles: usize,
) -> Result<(Vec<MomentSample>, usize)> {
    check_supported(params)?;
    schedule.validate()?;
    let stepper = Stepper { params, schedule, opts, dt: opts.dt.unwrap_or(1e-3 * schedule.period) };
    let mut s = *initial;
    let mut t = schedule.next_onset(0.0);
    let period = schedule.period;
    let mut residual = f64::INFINITY;
    let mut cycles = 0;
    while cycles < max_cycles {
        let prev = s;
        stepper.advance(&mut s, t, t + period)?;
        t += period;
        cycles += 1;
        residual = distance(&s, &prev);
        if residual < tol {
            break;
        }
    }
    if residual >= tol {
        return Err(Error::NonConvergence { cycles, residual });
    }
    let dt = period / samples_per_period.max(1) as f64;
    let start = t;
    let mut out = vec![MomentSample { t, drive_on: schedule.is_on_after(t), state: s }];
    for k in 1..=samples_per_period {
        let tk = start + k as f64 * dt;
        stepper.advance(&mut s, t, tk)?;
        t = tk;
        out.push(MomentSample { t, drive_on: schedule.is_on_after(t), state: s });
    }
    Ok((out, cycles))
}

fn distance(a: &MomentState, b: &MomentState) -> f64 {
    let reals = [a.n_a - b.n_a, a.n_a2 - b.n_a2, a.n_b - b.n_b, a.q2 - b.q2, a.p2 - b.p2, a.qp - b.qp];
    let cplx = [a.c_qp - b.c_qp, a.c_q2 - b.c_q2, a.c_p2 - b.c_p2, a.c_nn - b.c_nn, a.c_b2 - b.c_b2];
    reals.iter().map(|x| x.abs()).chain(cplx.iter().map(|z| z.norm())).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn occupation_line_is_stationary_at_a_over_b() {
        let params = EngineParams::baseline();
        let mut s = MomentState::thermal(&params);
        for on in [true, false] {
            let (a, b) = params.rate_coefficients(on);
            s.n_a = a / b;
            let d = moment_rhs(&s, &params, on, &MomentOptions::default());
            assert!(d.n_a.abs() < 1e-15);
        }
    }

    #[test]
    fn uncoupled_mechanics_relaxes() {
        let params = EngineParams::baseline().with_g(0.0);
        let mut s = MomentState::thermal(&params);
        s.q2 = 3.0;
        s.p2 = 3.0;
        s.n_b = 1.0;
        for variant in [Variant::Rederived, Variant::AsPrinted] {
            let opts = MomentOptions { variant, ..MomentOptions::default() };
            let d = moment_rhs(&s, &params, true, &opts);
            assert!((d.n_b - params.kappa_b * (params.nbar_b - s.n_b)).abs() < 1e-14, "{variant:?}");
        }
    }

    #[test]
    fn linear_coupling_is_rejected() {
        let params = EngineParams::baseline().with_coupling(CouplingKind::Linear);
        let s = MomentState::thermal(&params);
        let r = integrate_moments(&s, &params, &params.schedule(), 0.0, 1.0, 0.5, &MomentOptions::default());
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }

    #[test]
    fn thermal_start_is_consistent() {
        let params = EngineParams::baseline().with_dims(8, 16);
        let rho = DensityMatrix::initial(&params);
        let (exact, _) = MomentState::from_density(&rho).unwrap();
        let s = MomentState::thermal(&params);
        assert!(distance(&exact, &s) < 1e-9);
    }
}
