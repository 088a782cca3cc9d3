//! Real packing of Hermitian density matrices restricted to the entries the
//! dynamics can reach.
//!
//! The Liouvillian maps Hermitian matrices to Hermitian matrices, so it is a
//! real-linear map on the upper triangle: a diagonal entry contributes one
//! real coordinate and an off-diagonal entry two (real and imaginary part).
//! Starting from a state whose support is a subset of the tracked entries,
//! closure under the generator's sparsity pattern gives an invariant
//! subspace. Photon-number conservation of the Hamiltonian and the phase
//! covariance of the dissipators keep a photon-diagonal initial state
//! block-diagonal, and the quadratic coupling also preserves mechanical
//! parity coherences, so only a small fraction of the `D^2` entries is ever
//! populated.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::linalg;
use crate::sparse::Csr;
use crate::{CMatrix, C64};

const UNTRACKED: u32 = u32::MAX;

/// Set of tracked upper-triangular entries of a joint density matrix and
/// the layout of the corresponding real vector.
#[derive(Clone, Debug)]
pub struct PackedSpace {
    dim_a: usize,
    dim_b: usize,
    pairs: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    lookup: Vec<u32>,
    real_dim: usize,
    blocks: Vec<Vec<usize>>,
}

impl PackedSpace {
    fn from_pairs(dim_a: usize, dim_b: usize, mut pairs: Vec<(usize, usize)>) -> Self {
        let dim = dim_a * dim_b;
        pairs.sort_unstable();
        pairs.dedup();
        let mut lookup = vec![UNTRACKED; dim * dim];
        let mut offsets = Vec::with_capacity(pairs.len());
        let mut real_dim = 0;
        for (k, &(i, j)) in pairs.iter().enumerate() {
            lookup[i * dim + j] = k as u32;
            offsets.push(real_dim);
            real_dim += if i == j { 1 } else { 2 };
        }
        let edges = pairs.iter().copied().filter(|&(i, j)| i != j);
        let blocks = linalg::connected_components(dim, edges)
            .into_iter()
            .filter(|b| b.len() > 1 || lookup[b[0] * dim + b[0]] != UNTRACKED)
            .collect();
        Self { dim_a, dim_b, pairs, offsets, lookup, real_dim, blocks }
    }

    /// Every entry of the upper triangle.
    pub fn full(dim_a: usize, dim_b: usize) -> Self {
        let dim = dim_a * dim_b;
        let pairs = (0..dim).flat_map(|i| (i..dim).map(move |j| (i, j))).collect();
        Self::from_pairs(dim_a, dim_b, pairs)
    }

    /// Closure of `seeds` (plus the diagonal) under the sparsity pattern of
    /// the given generators. `columns` are the transposed generators so that
    /// row `c` lists column `c` of the superoperator.
    pub fn reachable(
        dim_a: usize,
        dim_b: usize,
        columns: &[&Csr<C64>],
        seeds: impl IntoIterator<Item = (usize, usize)>,
    ) -> Self {
        let dim = dim_a * dim_b;
        let mut seen = vec![false; dim * dim];
        let mut queue = VecDeque::new();
        let push = |i: usize, j: usize, seen: &mut Vec<bool>, queue: &mut VecDeque<(usize, usize)>| {
            let (i, j) = (i.min(j), i.max(j));
            if !seen[i * dim + j] {
                seen[i * dim + j] = true;
                queue.push_back((i, j));
            }
        };
        for i in 0..dim {
            push(i, i, &mut seen, &mut queue);
        }
        for (i, j) in seeds {
            push(i, j, &mut seen, &mut queue);
        }
        let mut pairs = Vec::new();
        while let Some((i, j)) = queue.pop_front() {
            pairs.push((i, j));
            for gen in columns {
                for col in [i + j * dim, j + i * dim] {
                    for (v, _) in gen.row(col) {
                        push(v % dim, v / dim, &mut seen, &mut queue);
                    }
                }
            }
        }
        Self::from_pairs(dim_a, dim_b, pairs)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.dim_a, self.dim_b)
    }

    pub fn dim(&self) -> usize {
        self.dim_a * self.dim_b
    }

    pub fn real_dim(&self) -> usize {
        self.real_dim
    }

    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    fn index(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = (i.min(j), i.max(j));
        match self.lookup[i * self.dim() + j] {
            UNTRACKED => None,
            k => Some(k as usize),
        }
    }

    /// Whether every nonzero entry of `rho` is tracked.
    pub fn supports(&self, rho: &CMatrix) -> bool {
        let dim = self.dim();
        (0..dim).all(|i| (i..dim).all(|j| rho[(i, j)] == C64::new(0.0, 0.0) || self.index(i, j).is_some()))
    }

    pub fn pack(&self, rho: &CMatrix) -> Result<Vec<f64>> {
        if rho.nrows() != self.dim() || rho.ncols() != self.dim() {
            return Err(Error::DimensionMismatch(format!("state is {}x{}, expected {}", rho.nrows(), rho.ncols(), self.dim())));
        }
        if !self.supports(rho) {
            return Err(Error::InvalidArgument("state has support outside the tracked subspace".into()));
        }
        let mut x = vec![0.0; self.real_dim];
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            let o = self.offsets[k];
            let v = rho[(i, j)];
            x[o] = v.re;
            if i != j {
                x[o + 1] = v.im;
            }
        }
        Ok(x)
    }

    pub fn unpack(&self, x: &[f64]) -> CMatrix {
        let dim = self.dim();
        let mut rho = CMatrix::zeros(dim, dim);
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            let o = self.offsets[k];
            if i == j {
                rho[(i, i)] = C64::new(x[o], 0.0);
            } else {
                let v = C64::new(x[o], x[o + 1]);
                rho[(i, j)] = v;
                rho[(j, i)] = v.conj();
            }
        }
        rho
    }

    /// Restricts a superoperator to the packed coordinates. `columns` is the
    /// transposed superoperator. Fails if the tracked set is not invariant.
    pub fn real_generator(&self, columns: &Csr<C64>) -> Result<Csr<f64>> {
        let dim = self.dim();
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        let scatter = |col: usize, out: &mut Vec<(usize, usize, f64)>, src: &[(usize, C64)]| -> Result<()> {
            for &(v, val) in src {
                let (r, c) = (v % dim, v / dim);
                if r > c {
                    continue;
                }
                let Some(k) = self.index(r, c) else {
                    if val.norm() > 0.0 {
                        return Err(Error::InvalidArgument(format!(
                            "generator leaves the tracked subspace at entry ({r}, {c})"
                        )));
                    }
                    continue;
                };
                let o = self.offsets[k];
                out.push((o, col, val.re));
                if r != c {
                    out.push((o + 1, col, val.im));
                }
            }
            Ok(())
        };
        let i_unit = C64::new(0.0, 1.0);
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            let o = self.offsets[k];
            let col_ij: Vec<(usize, C64)> = columns.row(i + j * dim).collect();
            if i == j {
                scatter(o, &mut triplets, &col_ij)?;
                continue;
            }
            let col_ji: Vec<(usize, C64)> = columns.row(j + i * dim).collect();
            // E_ij + E_ji
            let re: Vec<(usize, C64)> = col_ij.iter().chain(col_ji.iter()).copied().collect();
            scatter(o, &mut triplets, &re)?;
            // i E_ij - i E_ji
            let im: Vec<(usize, C64)> = col_ij
                .iter()
                .map(|&(v, x)| (v, x * i_unit))
                .chain(col_ji.iter().map(|&(v, x)| (v, -x * i_unit)))
                .collect();
            scatter(o + 1, &mut triplets, &im)?;
        }
        Ok(Csr::from_triplets(self.real_dim, self.real_dim, triplets))
    }

    /// Weights `w` with `tr(O rho) = sum_k w_k x_k` for the packed `x`.
    pub fn functional(&self, op: &CMatrix) -> Vec<C64> {
        let mut w = vec![C64::new(0.0, 0.0); self.real_dim];
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            let o = self.offsets[k];
            if i == j {
                w[o] = op[(i, i)];
            } else {
                // O_ji rho_ij + O_ij rho_ji with rho_ij = x + i y
                w[o] = op[(j, i)] + op[(i, j)];
                w[o + 1] = (op[(j, i)] - op[(i, j)]) * C64::new(0.0, 1.0);
            }
        }
        w
    }

    /// Functional weights for the trace.
    pub fn trace_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.real_dim];
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            if i == j {
                w[self.offsets[k]] = 1.0;
            }
        }
        w
    }

    pub fn trace(&self, x: &[f64]) -> f64 {
        self.pairs.iter().zip(&self.offsets).filter(|((i, j), _)| i == j).map(|(_, &o)| x[o]).sum()
    }

    /// Reduced optical state `Tr_b rho`.
    pub fn reduce_optical(&self, x: &[f64]) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim_a, self.dim_a);
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            let (mi, ki) = (i / self.dim_b, i % self.dim_b);
            let (mj, kj) = (j / self.dim_b, j % self.dim_b);
            if ki != kj {
                continue;
            }
            let o = self.offsets[k];
            if i == j {
                out[(mi, mi)] += C64::new(x[o], 0.0);
            } else {
                let v = C64::new(x[o], x[o + 1]);
                out[(mi, mj)] += v;
                out[(mj, mi)] += v.conj();
            }
        }
        out
    }

    /// Reduced mechanical state `Tr_a rho`.
    pub fn reduce_mechanical(&self, x: &[f64]) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim_b, self.dim_b);
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            let (mi, ki) = (i / self.dim_b, i % self.dim_b);
            let (mj, kj) = (j / self.dim_b, j % self.dim_b);
            if mi != mj {
                continue;
            }
            let o = self.offsets[k];
            if i == j {
                out[(ki, ki)] += C64::new(x[o], 0.0);
            } else {
                let v = C64::new(x[o], x[o + 1]);
                out[(ki, kj)] += v;
                out[(kj, ki)] += v.conj();
            }
        }
        out
    }

    /// Spectrum of the unpacked Hermitian matrix, assembled block by block.
    pub fn eigenvalues(&self, x: &[f64]) -> Vec<f64> {
        let mut vals = Vec::with_capacity(self.dim());
        for block in &self.blocks {
            let sub = CMatrix::from_fn(block.len(), block.len(), |r, c| {
                let (i, j) = (block[r], block[c]);
                match self.index(i, j) {
                    None => C64::new(0.0, 0.0),
                    Some(k) => {
                        let o = self.offsets[k];
                        if i == j {
                            C64::new(x[o], 0.0)
                        } else if i < j {
                            C64::new(x[o], x[o + 1])
                        } else {
                            C64::new(x[o], -x[o + 1])
                        }
                    }
                }
            });
            vals.extend(linalg::hermitian_eigenvalues(&sub));
        }
        vals.sort_by(f64::total_cmp);
        vals
    }

    /// `0.5 * || rho(x) - rho(y) ||_1`.
    pub fn trace_distance(&self, x: &[f64], y: &[f64]) -> f64 {
        let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        0.5 * self.eigenvalues(&diff).iter().map(|v| v.abs()).sum::<f64>()
    }
}
