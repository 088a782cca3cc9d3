//! Minimal compressed-sparse-row matrix used for superoperators.
//!
//! Only the handful of operations the solver needs are provided: assembly
//! from triplets, Kronecker products, linear combinations, transposition and
//! matrix-vector products.

use std::ops::{AddAssign, Mul};

use nalgebra::DMatrix;
use num_traits::Zero;

use crate::C64;

/// Scalar types storable in a [`Csr`].
pub trait SparseScalar:
    Copy + Zero + PartialEq + AddAssign + Mul<Output = Self> + Send + Sync + std::fmt::Debug + 'static
{
    fn magnitude(self) -> f64;
}

impl SparseScalar for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl SparseScalar for C64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Csr<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: SparseScalar> Csr<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self where T: num_traits::One {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    /// Assembles a matrix from `(row, col, value)` triplets. Duplicates are
    /// summed and exact zeros dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        let mut m = Self { nrows, ncols, indptr, indices, values };
        m.prune();
        m
    }

    pub fn from_dense(dense: &DMatrix<T>) -> Self {
        let mut triplets = Vec::new();
        for r in 0..dense.nrows() {
            for c in 0..dense.ncols() {
                let v = dense[(r, c)];
                if v != T::zero() {
                    triplets.push((r, c, v));
                }
            }
        }
        Self::from_triplets(dense.nrows(), dense.ncols(), triplets)
    }

    fn prune(&mut self) {
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.values[k] != T::zero() {
                    indices.push(self.indices[k]);
                    values.push(self.values[k]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.values = values;
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn transpose(&self) -> Self {
        let triplets = self.triplets().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, triplets)
    }

    pub fn map<F: Fn(T) -> T>(&self, f: F) -> Self {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v = f(*v));
        m.prune();
        m
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    /// `self + other`.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let triplets = self.triplets().chain(other.triplets()).collect();
        Self::from_triplets(self.nrows, self.ncols, triplets)
    }

    /// Kronecker product `self ⊗ other`; `self` is the outer (slow) index.
    pub fn kron(&self, other: &Self) -> Self {
        let (rb, cb) = (other.nrows, other.ncols);
        let mut triplets = Vec::with_capacity(self.nnz() * other.nnz());
        for (ra, ca, va) in self.triplets() {
            for (rbi, cbi, vb) in other.triplets() {
                triplets.push((ra * rb + rbi, ca * cb + cbi, va * vb));
            }
        }
        Self::from_triplets(self.nrows * rb, self.ncols * cb, triplets)
    }

    /// `out = self * x`.
    pub fn matvec_into(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(out.len(), self.nrows);
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = T::zero();
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *o = acc;
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.nrows];
        self.matvec_into(x, &mut out);
        out
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let mut d = DMatrix::from_element(self.nrows, self.ncols, T::zero());
        for (r, c, v) in self.triplets() {
            d[(r, c)] += v;
        }
        d
    }

    /// Largest absolute row sum (the induced infinity norm).
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|r| self.row(r).map(|(_, v)| v.magnitude()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.magnitude()).fold(0.0, f64::max)
    }
}

impl Csr<C64> {
    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }
}
