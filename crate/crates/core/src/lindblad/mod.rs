//! Master-equation dynamics.
//!
//! The generator is piecewise constant in time: one superoperator while the
//! hot drive is on and one while it is off. Superoperators act on the
//! column-stacked density matrix, `vec(rho)[i + j * D] = rho[i, j]`, so that
//! `vec(A rho B) = (B^T ⊗ A) vec(rho)`.

mod evolve;
mod packed;

pub use evolve::{
    evolve, limit_cycle, Backend, Observables, Propagator, RecordMode, Sample, SolverOptions, Trajectory,
};
pub use packed::PackedSpace;

use crate::error::{Error, Result};
use crate::fock::{JointOperators, Operator, Space};
use crate::linalg;
use crate::model::{hamiltonian_from, DriveMode, EngineParams};
use crate::sparse::Csr;
use crate::states::ReducedState;
use crate::{CMatrix, C64};

/// Density matrix on the joint optical ⊗ mechanical space.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    dim_a: usize,
    dim_b: usize,
    data: CMatrix,
    /// Simulation time the state refers to.
    pub time: f64,
}

/// Tolerances a physical density matrix must meet.
pub const TRACE_TOL: f64 = 1e-8;
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-8;

impl DensityMatrix {
    pub fn new(dim_a: usize, dim_b: usize, data: CMatrix, time: f64) -> Result<Self> {
        let n = dim_a * dim_b;
        if data.nrows() != n || data.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "density matrix is {}x{}, expected {n}x{n} for dims ({dim_a}, {dim_b})",
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(Self { dim_a, dim_b, data, time })
    }

    /// `rho_a ⊗ rho_b`.
    pub fn product(rho_a: &ReducedState, rho_b: &ReducedState) -> Self {
        let data = rho_a.matrix().kronecker(rho_b.matrix());
        Self { dim_a: rho_a.dim(), dim_b: rho_b.dim(), data, time: 0.0 }
    }

    /// Product of thermal states with the given occupations.
    pub fn thermal(dim_a: usize, dim_b: usize, nbar_a: f64, nbar_b: f64) -> Self {
        let a = crate::states::thermal_state(dim_a, nbar_a);
        let b = crate::states::thermal_state(dim_b, nbar_b);
        Self::product(&a, &b)
    }

    /// The engine's initial state: both modes thermal at their cold-bath
    /// occupations.
    pub fn initial(params: &EngineParams) -> Self {
        Self::thermal(params.dim_a, params.dim_b, params.nbar_a, params.nbar_b)
    }

    /// `|psi⟩⟨psi|` for a normalised joint state vector.
    pub fn pure(dim_a: usize, dim_b: usize, psi: &nalgebra::DVector<C64>) -> Result<Self> {
        let data = psi * psi.adjoint();
        Self::new(dim_a, dim_b, data, 0.0)
    }

    pub fn at_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.dim_a, self.dim_b)
    }

    pub fn dim(&self) -> usize {
        self.dim_a * self.dim_b
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.data)
    }

    pub fn hermiticity_residual(&self) -> f64 {
        linalg::hermiticity_residual(&self.data)
    }

    /// Ascending spectrum, computed block-wise over the sparsity pattern.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues_blocked(&self.data)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// `tr(O rho)`.
    pub fn expectation(&self, op: &Operator) -> C64 {
        (op.matrix() * &self.data).trace()
    }

    /// `0.5 * ||self - other||_1`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        let diff = &self.data - &other.data;
        0.5 * linalg::hermitian_eigenvalues_blocked(&diff).iter().map(|x| x.abs()).sum::<f64>()
    }

    /// Checks trace, Hermiticity and positivity against the state tolerances.
    pub fn check_invariants(&self) -> Result<()> {
        let trace_err = (self.trace() - C64::new(1.0, 0.0)).norm();
        let herm = self.hermiticity_residual();
        let min_eig = self.min_eigenvalue();
        if trace_err > TRACE_TOL || herm > HERMITICITY_TOL || min_eig < -POSITIVITY_TOL {
            return Err(Error::InvariantViolation {
                time: self.time,
                detail: format!("|tr - 1| = {trace_err:e}, hermiticity {herm:e}, min eigenvalue {min_eig:e}"),
            });
        }
        Ok(())
    }

    /// Copies the state into a larger truncation, padding with zeros.
    pub fn embed(&self, dim_a: usize, dim_b: usize) -> Result<Self> {
        if dim_a < self.dim_a || dim_b < self.dim_b {
            return Err(Error::InvalidDimension(format!(
                "cannot embed ({}, {}) into smaller ({dim_a}, {dim_b})",
                self.dim_a, self.dim_b
            )));
        }
        let mut data = CMatrix::zeros(dim_a * dim_b, dim_a * dim_b);
        for i in 0..self.dim() {
            let (ma, kb) = (i / self.dim_b, i % self.dim_b);
            for j in 0..self.dim() {
                let (mj, kj) = (j / self.dim_b, j % self.dim_b);
                data[(ma * dim_b + kb, mj * dim_b + kj)] = self.data[(i, j)];
            }
        }
        Ok(Self { dim_a, dim_b, data, time: self.time })
    }
}

/// `D[L] rho = L rho L† - (1/2) L†L rho - (1/2) rho L†L`.
pub fn dissipator_apply(jump: &Operator, rho: &CMatrix) -> Result<CMatrix> {
    let n = jump.dim();
    if rho.nrows() != n || rho.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "jump operator has dimension {n} but the state is {}x{}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    let l = jump.matrix();
    let ld = l.adjoint();
    let ldl = &ld * l;
    Ok(l * rho * &ld - (&ldl * rho + rho * &ldl) * C64::new(0.5, 0.0))
}

/// `-i [H, rho]`.
pub fn unitary_apply(h: &Operator, rho: &CMatrix) -> CMatrix {
    let hm = h.matrix();
    (hm * rho - rho * hm) * C64::new(0.0, -1.0)
}

/// One dissipation channel `rate * D[jump]`.
#[derive(Clone, Debug)]
pub struct Channel {
    pub label: &'static str,
    pub rate: f64,
    pub jump: Operator,
}

/// Dissipation channels active with the drive on or off.
pub fn channels(params: &EngineParams, ops: &JointOperators, drive_on: bool) -> Vec<Channel> {
    let ad = ops.a.adjoint();
    let bd = ops.b.adjoint();
    let kb = params.kappa_mech();
    let mut out = vec![
        Channel { label: "cavity emission", rate: params.kappa_a * (params.nbar_a + 1.0), jump: ops.a.clone() },
        Channel { label: "cavity absorption", rate: params.kappa_a * params.nbar_a, jump: ad.clone() },
        Channel { label: "mechanical emission", rate: kb * (params.nbar_b + 1.0), jump: ops.b.clone() },
        Channel { label: "mechanical absorption", rate: kb * params.nbar_b, jump: bd },
    ];
    out.extend(hot_channels(params, ops, drive_on));
    out
}

/// The hot-drive channels alone.
pub fn hot_channels(params: &EngineParams, ops: &JointOperators, drive_on: bool) -> Vec<Channel> {
    let ad = ops.a.adjoint();
    match (drive_on, params.drive_mode) {
        (true, _) => vec![
            Channel { label: "hot emission", rate: params.kappa_h * (params.nbar_h + 1.0), jump: ops.a.clone() },
            Channel { label: "hot absorption", rate: params.kappa_h * params.nbar_h, jump: ad },
        ],
        (false, DriveMode::SwitchedOccupation) => {
            vec![Channel { label: "hot emission", rate: params.kappa_h, jump: ops.a.clone() }]
        }
        (false, DriveMode::SwitchedCoupling) => Vec::new(),
    }
}

/// Superoperator of `-i[H, .]` under column stacking.
pub fn hamiltonian_superop(h: &Operator) -> Csr<C64> {
    let n = h.dim();
    let id = Csr::<C64>::identity(n);
    let hs = h.to_sparse();
    let left = id.kron(&hs).scale(C64::new(0.0, -1.0));
    let right = h.transpose().to_sparse().kron(&id).scale(C64::new(0.0, 1.0));
    left.add(&right)
}

/// Superoperator of `D[L]` under column stacking.
pub fn dissipator_superop(jump: &Operator) -> Csr<C64> {
    let n = jump.dim();
    let id = Csr::<C64>::identity(n);
    let l = jump.to_sparse();
    let ldl = (&jump.adjoint() * jump).to_sparse();
    let sandwich = l.conj().kron(&l);
    let left = id.kron(&ldl).scale(C64::new(-0.5, 0.0));
    let right = ldl.transpose().kron(&id).scale(C64::new(-0.5, 0.0));
    sandwich.add(&left).add(&right)
}

fn channels_superop(n: usize, chans: &[Channel]) -> Csr<C64> {
    chans
        .iter()
        .filter(|c| c.rate != 0.0)
        .fold(Csr::zeros(n * n, n * n), |acc, c| acc.add(&dissipator_superop(&c.jump).scale(C64::new(c.rate, 0.0))))
}

/// Piecewise-constant Liouvillian of the driven engine.
#[derive(Clone, Debug)]
pub struct Liouvillian {
    params: EngineParams,
    pub segment_off: Csr<C64>,
    pub segment_on: Csr<C64>,
}

/// Builds both generator segments from the parameters.
pub fn build_liouvillian(params: &EngineParams) -> Result<Liouvillian> {
    params.validate()?;
    let ops = JointOperators::new(params.dim_a, params.dim_b)?;
    let n = ops.n_a.dim();
    let h = hamiltonian_from(params, &ops);
    let off = hamiltonian_superop(&h).add(&channels_superop(n, &channels(params, &ops, false)));
    let on = hamiltonian_superop(&h).add(&channels_superop(n, &channels(params, &ops, true)));
    Ok(Liouvillian { params: params.clone(), segment_off: off, segment_on: on })
}

impl Liouvillian {
    pub fn params(&self) -> &EngineParams {
        &self.params
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.params.dim_a, self.params.dim_b)
    }

    pub fn space(&self) -> Space {
        Space::Joint { dim_a: self.params.dim_a, dim_b: self.params.dim_b }
    }

    pub fn segment(&self, drive_on: bool) -> &Csr<C64> {
        if drive_on {
            &self.segment_on
        } else {
            &self.segment_off
        }
    }

    /// `L rho` for a joint-space matrix.
    pub fn apply(&self, drive_on: bool, rho: &CMatrix) -> CMatrix {
        let n = rho.nrows();
        // nalgebra storage is column-major, i.e. already column-stacked.
        let out = self.segment(drive_on).matvec(rho.as_slice());
        CMatrix::from_column_slice(n, n, &out)
    }
}
