//! Physical parameterisation of the engine: parameters, Hamiltonians, bath
//! occupations, the stability bound and the square-wave drive.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fock::{JointOperators, Operator};

/// Form of the optomechanical interaction `g n_a q^k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingKind {
    /// `g n_a (b + b†)^2`.
    Quadratic,
    /// `g n_a (b + b†)`.
    Linear,
}

impl CouplingKind {
    pub fn power(self) -> u32 {
        match self {
            CouplingKind::Quadratic => 2,
            CouplingKind::Linear => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CouplingKind::Quadratic => "quadratic",
            CouplingKind::Linear => "linear",
        }
    }
}

impl std::str::FromStr for CouplingKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" => Ok(CouplingKind::Quadratic),
            "linear" => Ok(CouplingKind::Linear),
            other => Err(Error::InvalidArgument(format!("unknown coupling kind `{other}`"))),
        }
    }
}

/// How the square wave acts on the hot channel of the optical mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveMode {
    /// `kappa_h(t) = kappa_h s(t)`: the hot channel is disconnected while the
    /// drive is off, and the cavity relaxes to `nbar_a`.
    SwitchedCoupling,
    /// The hot channel stays connected with rate `kappa_h` and only its
    /// occupation is switched, `nbar_h(t) = nbar_h s(t)`; while off it acts as
    /// a zero-temperature bath and the cavity relaxes to
    /// `kappa_a nbar_a / (kappa_a + kappa_h)`.
    SwitchedOccupation,
}

/// All physical constants of one engine configuration. Frequencies and rates
/// are in units of `omega_b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineParams {
    pub omega_a: f64,
    pub omega_b: f64,
    pub g: f64,
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub kappa_h: f64,
    /// Additional mechanical damping representing an external load. It
    /// couples to the same thermal occupation `nbar_b`.
    pub kappa_l: f64,
    pub nbar_a: f64,
    pub nbar_b: f64,
    pub nbar_h: f64,
    pub coupling: CouplingKind,
    pub drive_mode: DriveMode,
    pub dim_a: usize,
    pub dim_b: usize,
}

impl Default for EngineParams {
    fn default() -> Self {
        Self::baseline()
    }
}

impl EngineParams {
    /// Reference working point: `kappa_a = 4`, `kappa_b = 0.04`, `g = -0.6`,
    /// cold occupations 0.01, hot occupation 0.45, `kappa_h = kappa_a`,
    /// `omega_a = 2`, truncation (6, 14).
    pub fn baseline() -> Self {
        Self {
            omega_a: 2.0,
            omega_b: 1.0,
            g: -0.6,
            kappa_a: 4.0,
            kappa_b: 0.04,
            kappa_h: 4.0,
            kappa_l: 0.0,
            nbar_a: 0.01,
            nbar_b: 0.01,
            nbar_h: 0.45,
            coupling: CouplingKind::Quadratic,
            drive_mode: DriveMode::SwitchedOccupation,
            dim_a: 6,
            dim_b: 14,
        }
    }

    pub fn with_coupling(mut self, coupling: CouplingKind) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn with_nbar_h(mut self, nbar_h: f64) -> Self {
        self.nbar_h = nbar_h;
        self
    }

    pub fn with_dims(mut self, dim_a: usize, dim_b: usize) -> Self {
        self.dim_a = dim_a;
        self.dim_b = dim_b;
        self
    }

    pub fn with_g(mut self, g: f64) -> Self {
        self.g = g;
        self
    }

    pub fn with_kappa_l(mut self, kappa_l: f64) -> Self {
        self.kappa_l = kappa_l;
        self
    }

    pub fn with_drive_mode(mut self, mode: DriveMode) -> Self {
        self.drive_mode = mode;
        self
    }

    /// Checks every physical invariant and names the first offending field.
    pub fn validate(&self) -> Result<()> {
        let non_negative = [
            ("omega_a", self.omega_a),
            ("kappa_a", self.kappa_a),
            ("kappa_b", self.kappa_b),
            ("kappa_h", self.kappa_h),
            ("kappa_l", self.kappa_l),
            ("nbar_a", self.nbar_a),
            ("nbar_b", self.nbar_b),
            ("nbar_h", self.nbar_h),
        ];
        for (name, value) in non_negative {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidParameter { name, reason: format!("must be finite and >= 0, got {value}") });
            }
        }
        if !self.omega_b.is_finite() || self.omega_b <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "omega_b",
                reason: format!("must be finite and > 0, got {}", self.omega_b),
            });
        }
        if !self.g.is_finite() {
            return Err(Error::InvalidParameter { name: "g", reason: "must be finite".into() });
        }
        for (name, dim) in [("dim_a", self.dim_a), ("dim_b", self.dim_b)] {
            if dim < 2 {
                return Err(Error::InvalidParameter { name, reason: format!("truncation must be >= 2, got {dim}") });
            }
        }
        Ok(())
    }

    /// One drive period, `2 pi / omega_b`.
    pub fn drive_period(&self) -> f64 {
        2.0 * PI / self.omega_b
    }

    /// Square wave with equal heating and cooling stages, heating first.
    pub fn schedule(&self) -> DriveSchedule {
        DriveSchedule { period: self.drive_period(), duty: 0.5, phase: 0.0 }
    }

    /// Total mechanical damping including the load.
    pub fn kappa_mech(&self) -> f64 {
        self.kappa_b + self.kappa_l
    }

    /// Optical emission and absorption rates `(gamma_down, gamma_up)` with the
    /// drive on or off. The cavity occupation obeys
    /// `d<n_a>/dt = A - B <n_a>` with `A = gamma_up`, `B = gamma_down - gamma_up`.
    pub fn optical_rates(&self, drive_on: bool) -> (f64, f64) {
        let mut down = self.kappa_a * (self.nbar_a + 1.0);
        let mut up = self.kappa_a * self.nbar_a;
        match (self.drive_mode, drive_on) {
            (_, true) => {
                down += self.kappa_h * (self.nbar_h + 1.0);
                up += self.kappa_h * self.nbar_h;
            }
            (DriveMode::SwitchedOccupation, false) => down += self.kappa_h,
            (DriveMode::SwitchedCoupling, false) => {}
        }
        (down, up)
    }

    /// `(A, B)` of the cavity rate equation.
    pub fn rate_coefficients(&self, drive_on: bool) -> (f64, f64) {
        let (down, up) = self.optical_rates(drive_on);
        (up, down - up)
    }

    /// Stationary cavity occupation `A / B` under a constant drive state.
    pub fn stationary_occupation(&self, drive_on: bool) -> f64 {
        let (a, b) = self.rate_coefficients(drive_on);
        a / b
    }

    /// Short stable digest of the parameters, used as provenance.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("parameters serialise");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Periodic square wave `s(t)`: 1 on `[phase + kT, phase + kT + duty T)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveSchedule {
    pub period: f64,
    pub duty: f64,
    pub phase: f64,
}

impl Default for DriveSchedule {
    fn default() -> Self {
        Self { period: 2.0 * PI, duty: 0.5, phase: 0.0 }
    }
}

impl DriveSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.period.is_finite() && self.period > 0.0) {
            return Err(Error::InvalidParameter { name: "period", reason: format!("must be > 0, got {}", self.period) });
        }
        if !(self.duty > 0.0 && self.duty < 1.0) {
            return Err(Error::InvalidParameter { name: "duty", reason: format!("must lie in (0, 1), got {}", self.duty) });
        }
        if !self.phase.is_finite() {
            return Err(Error::InvalidParameter { name: "phase", reason: "must be finite".into() });
        }
        Ok(())
    }

    fn position(&self, t: f64) -> f64 {
        ((t - self.phase) / self.period).rem_euclid(1.0)
    }

    pub fn is_on(&self, t: f64) -> bool {
        self.position(t) < self.duty
    }

    /// Drive state on the open interval just after `t`; differs from
    /// [`Self::is_on`] only when `t` sits on an edge up to rounding.
    pub fn is_on_after(&self, t: f64) -> bool {
        let next = self.next_edge(t);
        self.is_on(0.5 * (t + next))
    }

    fn edge_eps(&self) -> f64 {
        1e-12 * self.period.max(1.0)
    }

    /// First switching time strictly after `t` (beyond rounding noise).
    pub fn next_edge(&self, t: f64) -> f64 {
        let eps = self.edge_eps();
        let k = ((t - self.phase) / self.period).floor();
        let base = self.phase + k * self.period;
        for offset in [0.0, self.duty * self.period, self.period, (1.0 + self.duty) * self.period] {
            let edge = base + offset;
            if edge > t + eps {
                return edge;
            }
        }
        base + 2.0 * self.period
    }

    /// First heating onset at or after `t`.
    pub fn next_onset(&self, t: f64) -> f64 {
        let eps = self.edge_eps();
        let k = ((t - self.phase - eps) / self.period).ceil();
        self.phase + k * self.period
    }
}

/// `s(t)` as 0 or 1.
pub fn drive_value(schedule: &DriveSchedule, t: f64) -> u8 {
    u8::from(schedule.is_on(t))
}

/// Bose–Einstein occupation `1 / (exp(omega / T) - 1)` with `hbar = k_B = 1`.
pub fn mean_occupation(omega: f64, temperature: f64) -> Result<f64> {
    if temperature < 0.0 || temperature.is_nan() {
        return Err(Error::InvalidParameter { name: "temperature", reason: format!("must be >= 0, got {temperature}") });
    }
    if !(omega > 0.0) {
        return Err(Error::InvalidParameter { name: "omega", reason: format!("must be > 0, got {omega}") });
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (omega / temperature).exp_m1())
}

/// Inverse of [`mean_occupation`]: `omega / ln(1 + 1/nbar)`.
pub fn temperature_from_occupation(nbar: f64, omega: f64) -> Result<f64> {
    if !(nbar > 0.0) {
        return Err(Error::UndefinedTemperature(nbar));
    }
    Ok(omega / (1.0 / nbar).ln_1p())
}

/// `H = omega_a n_a + omega_b n_b + g n_a q^k` on the joint space, with
/// `k = 2` (quadratic) or `k = 1` (linear). `q^2` is the square of the
/// truncated quadrature.
pub fn build_hamiltonian(params: &EngineParams) -> Result<Operator> {
    params.validate()?;
    let ops = JointOperators::new(params.dim_a, params.dim_b)?;
    Ok(hamiltonian_from(params, &ops))
}

pub(crate) fn hamiltonian_from(params: &EngineParams, ops: &JointOperators) -> Operator {
    let free = &ops.n_a.scale_re(params.omega_a) + &ops.n_b.scale_re(params.omega_b);
    let interaction = (&ops.n_a * &ops.q.powi(params.coupling.power())).scale_re(params.g);
    &free + &interaction
}

/// Mean-field stability of the quadratic model, `omega_b + 4 nbar g > 0`,
/// for intracavity occupation `nbar_cavity`. The linear model has no such
/// bound and always reports stable.
pub fn stability_check(params: &EngineParams, nbar_cavity: f64) -> bool {
    match params.coupling {
        CouplingKind::Quadratic => params.omega_b + 4.0 * nbar_cavity * params.g > 0.0,
        CouplingKind::Linear => true,
    }
}

/// Largest hot occupation that keeps the heated cavity occupation inside the
/// stability bound; infinite when the bound never binds.
pub fn max_stable_nbar_h(params: &EngineParams) -> f64 {
    if params.coupling == CouplingKind::Linear || params.g >= 0.0 || params.kappa_h == 0.0 {
        return f64::INFINITY;
    }
    let nbar_limit = params.omega_b / (-4.0 * params.g);
    // A/B = (kappa_a nbar_a + kappa_h nbar_h) / (kappa_a + kappa_h) = nbar_limit
    (nbar_limit * (params.kappa_a + params.kappa_h) - params.kappa_a * params.nbar_a) / params.kappa_h
}

/// Stability of the configuration at its heated cavity occupation.
pub fn is_stable(params: &EngineParams) -> bool {
    stability_check(params, params.stationary_occupation(true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::Space;
    use crate::C64;
    use proptest::prelude::*;

    #[test]
    fn occupation_limits() {
        assert!(mean_occupation(1.0, 1e-3).unwrap() < 1e-300);
        assert!((mean_occupation(2f64.ln(), 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(mean_occupation(1.0, 0.0).unwrap(), 0.0);
        assert!(mean_occupation(1.0, -1.0).is_err());
    }

    #[test]
    fn temperature_inversion() {
        let nbar = 1.0 / (std::f64::consts::E - 1.0);
        assert!((temperature_from_occupation(nbar, 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!(matches!(temperature_from_occupation(0.0, 1.0), Err(Error::UndefinedTemperature(_))));
        assert!(temperature_from_occupation(-0.1, 1.0).is_err());

        // Equal cold occupations imply T_a / T_b = omega_a / omega_b.
        let ta = temperature_from_occupation(0.01, 20.8).unwrap();
        let tb = temperature_from_occupation(0.01, 1.0).unwrap();
        assert!((ta / tb - 20.8).abs() < 1e-12);

        let th = temperature_from_occupation(0.45, 2.0).unwrap();
        assert!((th - 2.0 / (1.0f64 + 1.0 / 0.45).ln()).abs() < 1e-14);
        assert!((2.0 / th / 1.1712 - 1.0).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn occupation_round_trip(omega in 0.01f64..50.0, temp in 0.05f64..50.0) {
            let n = mean_occupation(omega, temp).unwrap();
            let back = temperature_from_occupation(n, omega).unwrap();
            prop_assert!((back / temp - 1.0).abs() < 1e-12);
        }

        #[test]
        fn occupation_decreases_with_ratio(x in 0.01f64..30.0, dx in 1e-3f64..5.0) {
            let lo = mean_occupation(x, 1.0).unwrap();
            let hi = mean_occupation(x + dx, 1.0).unwrap();
            prop_assert!(hi < lo);
        }

        #[test]
        fn drive_is_periodic_square_wave(t in 0.0f64..1e3, k in 1u32..20) {
            let s = DriveSchedule::default();
            let v = drive_value(&s, t);
            prop_assert!(v == 0 || v == 1);
            let shifted = t + k as f64 * s.period;
            // stay clear of edges where rounding could flip the comparison
            let pos = s.position(t);
            prop_assume!((pos - 0.5).abs() > 1e-9 && pos > 1e-9 && pos < 1.0 - 1e-9);
            prop_assert_eq!(drive_value(&s, shifted), v);
        }

        #[test]
        fn hamiltonian_is_hermitian(g in -1.0f64..1.0, wa in 0.0f64..5.0, quad in any::<bool>()) {
            let coupling = if quad { CouplingKind::Quadratic } else { CouplingKind::Linear };
            let p = EngineParams { g, omega_a: wa, coupling, ..EngineParams::baseline() }.with_dims(3, 6);
            let h = build_hamiltonian(&p).unwrap();
            prop_assert!(h.is_hermitian(1e-14));
        }
    }

    #[test]
    fn drive_values() {
        let s = DriveSchedule::default();
        assert_eq!(drive_value(&s, 0.0), 1);
        assert_eq!(drive_value(&s, s.period / 2.0), 0);
        assert_eq!(drive_value(&s, s.period), 1);
        let n = 10_000;
        let on = (0..n).filter(|&i| s.is_on((i as f64 + 0.5) * s.period / n as f64)).count();
        assert_eq!(on, n / 2);
    }

    #[test]
    fn edges() {
        let s = DriveSchedule::default();
        let half = s.period / 2.0;
        assert!((s.next_edge(0.0) - half).abs() < 1e-12);
        assert!((s.next_edge(half) - s.period).abs() < 1e-12);
        assert!((s.next_edge(half - 1e-15) - s.period).abs() < 1e-12);
        assert!(s.is_on_after(0.0));
        assert!(!s.is_on_after(half));
        assert!((s.next_onset(0.0)).abs() < 1e-12);
        assert!((s.next_onset(0.1) - s.period).abs() < 1e-12);
    }

    #[test]
    fn hamiltonian_examples() {
        let p = EngineParams { g: 0.0, ..EngineParams::baseline() }.with_dims(3, 4);
        let h = build_hamiltonian(&p).unwrap();
        for m in 0..3 {
            for n in 0..4 {
                let i = m * 4 + n;
                assert!((h.element(i, i) - C64::new(p.omega_a * m as f64 + p.omega_b * n as f64, 0.0)).norm() < 1e-14);
            }
        }
        assert!((h.matrix().sum() - h.matrix().diagonal().sum()).norm() < 1e-14);

        let p = EngineParams::baseline().with_dims(3, 5);
        let h = build_hamiltonian(&p).unwrap();
        // |1⟩_a ⊗ |0⟩_b has joint index 5.
        assert!((h.element(5, 5).re - (p.omega_a + p.g)).abs() < 1e-14);

        for coupling in [CouplingKind::Quadratic, CouplingKind::Linear] {
            let p = p.clone().with_coupling(coupling);
            let ops = JointOperators::new(p.dim_a, p.dim_b).unwrap();
            let h = build_hamiltonian(&p).unwrap();
            assert_eq!(h.space(), Space::Joint { dim_a: 3, dim_b: 5 });
            assert!(h.commutator(&ops.n_a).matrix().camax() < 1e-13);
        }
    }

    #[test]
    fn stability_examples() {
        let p = EngineParams::baseline();
        assert!(stability_check(&p, 0.23));
        assert!((p.omega_b + 4.0 * 0.23 * p.g - 0.448).abs() < 1e-12);
        assert!(!stability_check(&p, 1.0 / 2.4));
        let bound = max_stable_nbar_h(&p);
        assert!((bound - (2.0 / 2.4 - 0.01)).abs() < 1e-12);
        assert!(bound > 0.80 && bound < 0.83);
        assert!(is_stable(&p.clone().with_nbar_h(0.8)));
        assert!(!is_stable(&p.clone().with_nbar_h(0.9)));
        assert!(stability_check(&p.with_coupling(CouplingKind::Linear), 10.0));
    }

    #[test]
    fn validation_names_field() {
        let p = EngineParams { kappa_b: -1.0, ..EngineParams::baseline() };
        match p.validate() {
            Err(Error::InvalidParameter { name, .. }) => assert_eq!(name, "kappa_b"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(EngineParams::baseline().validate().is_ok());
    }

    #[test]
    fn stationary_occupations() {
        let p = EngineParams::baseline().with_nbar_h(0.125);
        assert!((p.stationary_occupation(true) - 0.0675).abs() < 1e-15);
        assert!((p.stationary_occupation(false) - 0.005).abs() < 1e-15);
        let p = p.with_drive_mode(DriveMode::SwitchedCoupling);
        assert!((p.stationary_occupation(true) - 0.0675).abs() < 1e-15);
        assert!((p.stationary_occupation(false) - 0.01).abs() < 1e-15);
    }
}
