//! Truncated Fock-space operators for one or two bosonic modes.
//!
//! Joint operators always use the ordering *optical ⊗ mechanical*: the joint
//! basis index of `|m⟩_a ⊗ |k⟩_b` is `m * dim_b + k`. Partial traces and the
//! photon-number block structure used by the solver rely on this ordering.

use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};
use crate::sparse::Csr;
use crate::{CMatrix, C64};

/// Hilbert space an [`Operator`] acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    Single(usize),
    Joint { dim_a: usize, dim_b: usize },
}

impl Space {
    pub fn dim(&self) -> usize {
        match *self {
            Space::Single(n) => n,
            Space::Joint { dim_a, dim_b } => dim_a * dim_b,
        }
    }
}

/// Dense operator on a truncated single-mode or two-mode space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    space: Space,
    data: CMatrix,
}

impl Operator {
    pub fn new(space: Space, data: CMatrix) -> Result<Self> {
        let n = space.dim();
        if data.nrows() != n || data.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{} but the space has dimension {n}",
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(Self { space, data })
    }

    pub fn identity(space: Space) -> Self {
        let n = space.dim();
        Self { space, data: CMatrix::identity(n, n) }
    }

    pub fn zeros(space: Space) -> Self {
        let n = space.dim();
        Self { space, data: CMatrix::zeros(n, n) }
    }

    pub fn from_diagonal(dim: usize, diag: impl Fn(usize) -> f64) -> Self {
        let data = CMatrix::from_fn(dim, dim, |i, j| if i == j { C64::new(diag(i), 0.0) } else { C64::new(0.0, 0.0) });
        Self { space: Space::Single(dim), data }
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn adjoint(&self) -> Self {
        Self { space: self.space, data: self.data.adjoint() }
    }

    pub fn transpose(&self) -> Self {
        Self { space: self.space, data: self.data.transpose() }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { space: self.space, data: &self.data * s }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn powi(&self, k: u32) -> Self {
        let mut out = Self::identity(self.space);
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    /// `[self, other]`.
    pub fn commutator(&self, other: &Operator) -> Operator {
        &(self * other) - &(other * self)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        crate::linalg::hermiticity_residual(&self.data) <= tol
    }

    pub fn to_sparse(&self) -> Csr<C64> {
        Csr::from_dense(&self.data)
    }

    /// `⟨n|self|m⟩`.
    pub fn element(&self, n: usize, m: usize) -> C64 {
        self.data[(n, m)]
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "operator spaces differ");
        Operator { space: self.space, data: &self.data * &rhs.data }
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "operator spaces differ");
        Operator { space: self.space, data: &self.data + &rhs.data }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "operator spaces differ");
        Operator { space: self.space, data: &self.data - &rhs.data }
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::InvalidDimension(format!("Fock truncation must be at least 2, got {dim}")));
    }
    Ok(())
}

/// Annihilation operator `a` with `a|n⟩ = sqrt(n)|n-1⟩`.
pub fn annihilation(dim: usize) -> Result<Operator> {
    check_dim(dim)?;
    let data = CMatrix::from_fn(dim, dim, |r, c| {
        if c == r + 1 {
            C64::new((c as f64).sqrt(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    Ok(Operator { space: Space::Single(dim), data })
}

pub fn creation(dim: usize) -> Result<Operator> {
    Ok(annihilation(dim)?.adjoint())
}

/// Number operator `a†a`, built directly as `diag(0, 1, ..)`.
pub fn number(dim: usize) -> Result<Operator> {
    check_dim(dim)?;
    Ok(Operator::from_diagonal(dim, |n| n as f64))
}

/// Kronecker product `a ⊗ b` with `a` the optical (left, slow) factor.
pub fn tensor(a: &Operator, b: &Operator) -> Result<Operator> {
    let (Space::Single(dim_a), Space::Single(dim_b)) = (a.space, b.space) else {
        return Err(Error::InvalidArgument("tensor expects two single-mode operators".into()));
    };
    Ok(Operator { space: Space::Joint { dim_a, dim_b }, data: a.data.kronecker(&b.data) })
}

/// Position- and momentum-like quadratures `q = b + b†`, `p = i(b† - b)`.
/// The vacuum has `⟨q²⟩ = ⟨p²⟩ = 1` in this convention.
pub fn quadrature_ops(dim: usize) -> Result<(Operator, Operator)> {
    let b = annihilation(dim)?;
    let bd = b.adjoint();
    let q = &b + &bd;
    let p = (&bd - &b).scale(C64::new(0.0, 1.0));
    Ok((q, p))
}

/// Ladder and quadrature operators of the two-mode space, embedded with the
/// fixed optical ⊗ mechanical ordering.
#[derive(Clone, Debug)]
pub struct JointOperators {
    pub dim_a: usize,
    pub dim_b: usize,
    pub a: Operator,
    pub b: Operator,
    pub n_a: Operator,
    pub n_b: Operator,
    pub q: Operator,
    pub p: Operator,
}

impl JointOperators {
    pub fn new(dim_a: usize, dim_b: usize) -> Result<Self> {
        let id_a = Operator::identity(Space::Single(dim_a));
        let id_b = Operator::identity(Space::Single(dim_b));
        let (q, p) = quadrature_ops(dim_b)?;
        Ok(Self {
            dim_a,
            dim_b,
            a: tensor(&annihilation(dim_a)?, &id_b)?,
            b: tensor(&id_a, &annihilation(dim_b)?)?,
            n_a: tensor(&number(dim_a)?, &id_b)?,
            n_b: tensor(&id_a, &number(dim_b)?)?,
            q: tensor(&id_a, &q)?,
            p: tensor(&id_a, &p)?,
        })
    }

    pub fn space(&self) -> Space {
        Space::Joint { dim_a: self.dim_a, dim_b: self.dim_b }
    }

    pub fn identity(&self) -> Operator {
        Operator::identity(self.space())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn annihilation_dim2() {
        let a = annihilation(2).unwrap();
        assert_eq!(a.element(0, 1), c(1.0, 0.0));
        assert_eq!(a.element(0, 0), c(0.0, 0.0));
        assert_eq!(a.element(1, 0), c(0.0, 0.0));
        assert_eq!(a.element(1, 1), c(0.0, 0.0));
    }

    #[test]
    fn annihilation_rejects_small_dims() {
        assert!(matches!(annihilation(1), Err(Error::InvalidDimension(_))));
        assert!(matches!(annihilation(0), Err(Error::InvalidDimension(_))));
        assert!(quadrature_ops(1).is_err());
    }

    #[test]
    fn ladder_action_is_exact() {
        let a = annihilation(7).unwrap();
        for n in 1..7 {
            assert_eq!(a.element(n - 1, n), c((n as f64).sqrt(), 0.0));
        }
    }

    #[test]
    fn number_from_ladder_dim4() {
        let a = annihilation(4).unwrap();
        let n = &a.adjoint() * &a;
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { i as f64 } else { 0.0 };
                assert!((n.element(i, j) - c(expect, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn truncated_commutator_corner() {
        for dim in 2..9 {
            let a = annihilation(dim).unwrap();
            let comm = a.commutator(&a.adjoint());
            for i in 0..dim {
                for j in 0..dim {
                    let expect = match (i == j, i == dim - 1) {
                        (true, true) => -((dim - 1) as f64),
                        (true, false) => 1.0,
                        _ => 0.0,
                    };
                    assert!((comm.element(i, j) - c(expect, 0.0)).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn tensor_identities_and_dims() {
        let i2 = Operator::identity(Space::Single(2));
        let i3 = Operator::identity(Space::Single(3));
        let i6 = tensor(&i2, &i3).unwrap();
        assert_eq!(i6.matrix(), &CMatrix::identity(6, 6));

        let a3 = annihilation(3).unwrap();
        let a4 = annihilation(4).unwrap();
        assert_eq!(tensor(&a3, &a4).unwrap().dim(), 12);
        assert_eq!(tensor(&a3, &a4).unwrap().space(), Space::Joint { dim_a: 3, dim_b: 4 });
    }

    #[test]
    fn tensor_acts_on_left_factor() {
        let a = annihilation(2).unwrap();
        let i2 = Operator::identity(Space::Single(2));
        let op = tensor(&a, &i2).unwrap();
        // |1⟩⊗|0⟩ has joint index 1 * 2 + 0 = 2.
        let mut psi = nalgebra::DVector::<C64>::zeros(4);
        psi[2] = c(1.0, 0.0);
        let out = op.matrix() * psi;
        let mut expect = nalgebra::DVector::<C64>::zeros(4);
        expect[0] = c(1.0, 0.0);
        assert_eq!(out, expect);
    }

    #[test]
    fn quadratures_dim2() {
        let (q, p) = quadrature_ops(2).unwrap();
        assert_eq!(q.matrix(), &CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]));
        assert_eq!(p.matrix(), &CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]));
        let q2 = q.powi(2);
        assert_eq!(q2.element(0, 0), c(1.0, 0.0));
    }

    #[test]
    fn quadratures_hermitian_and_canonical() {
        let dim = 9;
        let (q, p) = quadrature_ops(dim).unwrap();
        let n = number(dim).unwrap();
        for op in [&q, &p, &n] {
            assert_eq!(crate::linalg::hermiticity_residual(op.matrix()), 0.0);
        }
        let comm = q.commutator(&p);
        for i in 0..dim {
            for j in 0..dim {
                if i == dim - 1 && j == dim - 1 {
                    continue;
                }
                let expect = if i == j { c(0.0, 2.0) } else { c(0.0, 0.0) };
                assert!((comm.element(i, j) - expect).norm() < 1e-13, "({i},{j})");
            }
        }
    }

    #[test]
    fn joint_operator_bundle() {
        let ops = JointOperators::new(3, 4).unwrap();
        assert!((ops.n_a.matrix() - (&ops.a.adjoint() * &ops.a).matrix()).camax() < 1e-14);
        assert!(ops.n_a.commutator(&ops.q).matrix().camax() < 1e-15);
    }
}
