//! Single-mode state analysis: partial traces, thermal and Gibbs states,
//! entropies, ergotropy, free-energy work capacity, quadrature statistics and
//! the Wigner function.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{quadrature_ops, Operator};
use crate::lindblad::DensityMatrix;
use crate::linalg;
use crate::{CMatrix, C64};

/// Which mode a reduced state belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Optical,
    Mechanical,
}

/// Density matrix of one mode.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedState {
    data: CMatrix,
    mode: Mode,
}

impl ReducedState {
    pub fn new(mode: Mode, data: CMatrix) -> Result<Self> {
        if data.nrows() != data.ncols() || data.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!("reduced state must be square, got {}x{}", data.nrows(), data.ncols())));
        }
        Ok(Self { data, mode })
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.data).re
    }

    /// Ascending spectrum.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues_blocked(&self.data)
    }

    /// `tr(O rho)`.
    pub fn expectation(&self, op: &Operator) -> Result<C64> {
        if op.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!("operator dimension {} vs state {}", op.dim(), self.dim())));
        }
        Ok((op.matrix() * &self.data).trace())
    }

    /// `<n>` in the Fock basis.
    pub fn mean_number(&self) -> f64 {
        (0..self.dim()).map(|n| n as f64 * self.data[(n, n)].re).sum()
    }
}

/// Reduces a joint state to one mode by tracing out the other.
pub fn partial_trace(rho: &DensityMatrix, keep: Mode) -> ReducedState {
    let (dim_a, dim_b) = rho.dims();
    let m = rho.matrix();
    let data = match keep {
        Mode::Optical => CMatrix::from_fn(dim_a, dim_a, |i, j| (0..dim_b).map(|k| m[(i * dim_b + k, j * dim_b + k)]).sum()),
        Mode::Mechanical => {
            CMatrix::from_fn(dim_b, dim_b, |i, j| (0..dim_a).map(|a| m[(a * dim_b + i, a * dim_b + j)]).sum())
        }
    };
    ReducedState { data, mode: keep }
}

/// Thermal state `p_n ∝ (nbar / (1 + nbar))^n` renormalised on `dim` levels.
/// Tagged as mechanical; use [`ReducedState::with_mode`] to retag.
pub fn thermal_state(dim: usize, nbar: f64) -> ReducedState {
    let ratio = if nbar > 0.0 { nbar / (1.0 + nbar) } else { 0.0 };
    let weights: Vec<f64> = (0..dim).map(|n| ratio.powi(n as i32)).collect();
    let z: f64 = weights.iter().sum();
    let data = CMatrix::from_fn(dim, dim, |i, j| if i == j { C64::new(weights[i] / z, 0.0) } else { C64::new(0.0, 0.0) });
    ReducedState { data, mode: Mode::Mechanical }
}

/// Entropy of a thermal mode with occupation `n`, `(1+n) ln(1+n) - n ln n`.
pub fn thermal_entropy(n: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    (1.0 + n) * n.ln_1p() - n * n.ln()
}

/// Von Neumann entropy in nats.
pub fn entropy_vn(rho: &ReducedState) -> f64 {
    let vals: Vec<f64> = rho.eigenvalues().into_iter().map(|v| v.max(0.0)).collect();
    linalg::shannon_entropy(&vals)
}

/// `T_eff = omega_eff / ln(1 + 1/n)`, zero for an empty mode.
pub fn effective_temperature(n: f64, omega_eff: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    omega_eff / (1.0 / n).ln_1p()
}

fn check_same_dim(rho: &ReducedState, h: &Operator) -> Result<()> {
    if h.dim() != rho.dim() {
        return Err(Error::DimensionMismatch(format!("operator dimension {} vs state {}", h.dim(), rho.dim())));
    }
    Ok(())
}

/// Work extractable by a cyclic unitary: `tr(rho H)` minus the energy of the
/// passive state with the same spectrum.
pub fn ergotropy(rho: &ReducedState, h: &Operator) -> Result<f64> {
    check_same_dim(rho, h)?;
    if let Some(passive) = diagonal_passivity(rho, h) {
        if passive {
            return Ok(0.0);
        }
    }
    let energy = rho.expectation(h)?.re;
    let mut r = linalg::hermitian_eigenvalues(rho.matrix());
    r.reverse();
    let eps = linalg::hermitian_eigenvalues(h.matrix());
    let passive: f64 = r.iter().zip(&eps).map(|(p, e)| p * e).sum();
    Ok((energy - passive).max(0.0))
}

/// For `rho` and `h` both diagonal, whether the populations are
/// non-increasing in energy. `None` if either has off-diagonal weight.
fn diagonal_passivity(rho: &ReducedState, h: &Operator) -> Option<bool> {
    let (r, m) = (rho.matrix(), h.matrix());
    let d = r.nrows();
    let off_diag = |a: &CMatrix| (0..d).any(|i| (0..d).any(|j| i != j && a[(i, j)].norm() != 0.0));
    if off_diag(r) || off_diag(m) {
        return None;
    }
    let mut levels: Vec<(f64, f64)> = (0..d).map(|i| (m[(i, i)].re, r[(i, i)].re)).collect();
    levels.sort_by(|a, b| a.0.total_cmp(&b.0));
    Some(levels.windows(2).all(|w| w[0].1 >= w[1].1 || w[0].0 == w[1].0))
}

/// `exp(-H/T) / Z` on the space of `h`.
pub fn gibbs_state(h: &Operator, temperature: f64) -> Result<ReducedState> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidParameter { name: "temperature", reason: format!("must be > 0, got {temperature}") });
    }
    let (vals, vecs) = linalg::hermitian_eigen(h.matrix());
    let e0 = vals[0];
    let w: Vec<f64> = vals.iter().map(|e| (-(e - e0) / temperature).exp()).collect();
    let z: f64 = w.iter().sum();
    let diag = CMatrix::from_fn(w.len(), w.len(), |i, j| if i == j { C64::new(w[i] / z, 0.0) } else { C64::new(0.0, 0.0) });
    let data = &vecs * diag * vecs.adjoint();
    Ok(ReducedState { data, mode: Mode::Mechanical })
}

/// Quantum relative entropy `S(rho || sigma) = tr rho (ln rho - ln sigma)`.
/// Infinite when `rho` has weight outside the support of `sigma`.
pub fn relative_entropy(rho: &ReducedState, sigma: &ReducedState) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(format!("states of dimension {} and {}", rho.dim(), sigma.dim())));
    }
    let neg_entropy = -entropy_vn(rho);
    let (vals, vecs) = linalg::hermitian_eigen(sigma.matrix());
    let mut cross = 0.0;
    for (j, &s) in vals.iter().enumerate() {
        let v = vecs.column(j);
        let weight = (v.adjoint() * rho.matrix() * v)[(0, 0)].re;
        if weight.abs() < 1e-300 {
            continue;
        }
        if s <= 0.0 {
            return Ok(f64::INFINITY);
        }
        cross += weight * s.ln();
    }
    Ok(neg_entropy - cross)
}

/// Free-energy bound on extractable work relative to the Gibbs state of `h`
/// at temperature `T`: `F(rho) - F(rho_G)` with `F = tr(rho H) - T S(rho)`.
pub fn max_extractable_work(rho: &ReducedState, h: &Operator, temperature: f64) -> Result<f64> {
    check_same_dim(rho, h)?;
    let gibbs = gibbs_state(h, temperature)?;
    let free = |s: &ReducedState| -> Result<f64> { Ok(s.expectation(h)?.re - temperature * entropy_vn(s)) };
    Ok(free(rho)? - free(&gibbs)?)
}

/// First and second moments of the quadratures `q = b + b†`, `p = i(b† - b)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureStats {
    pub mean_q: f64,
    pub mean_p: f64,
    pub q2: f64,
    pub p2: f64,
    /// Symmetrised covariance `<qp + pq>/2 - <q><p>`.
    pub cov_qp: f64,
    /// Smallest variance of `q cos(theta) + p sin(theta)` over `theta`.
    pub min_variance: f64,
    /// Largest variance over `theta`.
    pub max_variance: f64,
}

pub fn quadrature_stats(rho: &ReducedState) -> QuadratureStats {
    let (q, p) = quadrature_ops(rho.dim()).expect("state dimension is at least 2");
    let m = rho.matrix();
    let ev = |op: &CMatrix| (op * m).trace().re;
    let mean_q = ev(q.matrix());
    let mean_p = ev(p.matrix());
    let q2 = ev(&(q.matrix() * q.matrix()));
    let p2 = ev(&(p.matrix() * p.matrix()));
    let sym = 0.5 * ev(&(q.matrix() * p.matrix() + p.matrix() * q.matrix()));
    let vq = q2 - mean_q * mean_q;
    let vp = p2 - mean_p * mean_p;
    let cov_qp = sym - mean_q * mean_p;
    let mid = 0.5 * (vq + vp);
    let radius = (0.25 * (vq - vp).powi(2) + cov_qp * cov_qp).sqrt();
    QuadratureStats { mean_q, mean_p, q2, p2, cov_qp, min_variance: mid - radius, max_variance: mid + radius }
}

/// Wigner function sampled on a rectangular `(q, p)` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub q_axis: Vec<f64>,
    pub p_axis: Vec<f64>,
    /// `values[i][j] = W(q_axis[i], p_axis[j])`.
    pub values: Vec<Vec<f64>>,
    /// Largest imaginary part discarded when forming the real function.
    pub imag_residue: f64,
}

impl WignerGrid {
    /// Trapezoidal `∬ W dq dp`.
    pub fn integral(&self) -> f64 {
        let inner: Vec<f64> = self.values.iter().map(|row| trapezoid(&self.p_axis, row)).collect();
        trapezoid(&self.q_axis, &inner)
    }

    /// `∫ W dp` as a function of `q`.
    pub fn q_marginal(&self) -> Vec<f64> {
        self.values.iter().map(|row| trapezoid(&self.p_axis, row)).collect()
    }

    /// `∫ W dq` as a function of `p`.
    pub fn p_marginal(&self) -> Vec<f64> {
        (0..self.p_axis.len())
            .map(|j| {
                let col: Vec<f64> = self.values.iter().map(|row| row[j]).collect();
                trapezoid(&self.q_axis, &col)
            })
            .collect()
    }

    /// `(mean, variance)` of the `q` marginal.
    pub fn q_moments(&self) -> (f64, f64) {
        moments(&self.q_axis, &self.q_marginal())
    }

    pub fn p_moments(&self) -> (f64, f64) {
        moments(&self.p_axis, &self.p_marginal())
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1])).sum()
}

fn moments(x: &[f64], w: &[f64]) -> (f64, f64) {
    let norm = trapezoid(x, w);
    let m1: Vec<f64> = x.iter().zip(w).map(|(a, b)| a * b).collect();
    let mean = trapezoid(x, &m1) / norm;
    let m2: Vec<f64> = x.iter().zip(w).map(|(a, b)| (a - mean).powi(2) * b).collect();
    (mean, trapezoid(x, &m2) / norm)
}

/// `n` evenly spaced points on `[-half_width, half_width]`.
pub fn symmetric_axis(half_width: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![0.0];
    }
    (0..n).map(|i| -half_width + 2.0 * half_width * i as f64 / (n - 1) as f64).collect()
}

/// Default axis: 201 points over six widths of the broadest quadrature,
/// never narrower than six vacuum widths.
pub fn default_axis(rho: &ReducedState) -> Vec<f64> {
    let stats = quadrature_stats(rho);
    let width = stats.q2.max(stats.p2).max(1.0).sqrt();
    let shift = stats.mean_q.abs().max(stats.mean_p.abs());
    symmetric_axis(6.0 * width + shift, 201)
}

/// Wigner function normalised to `∬ W dq dp = 1` in the `q = b + b†`
/// convention, so the vacuum is `exp(-(q² + p²)/2) / 2π`.
///
/// Uses the Fock-basis expansion `W = (1/2π) e^{-2|α|²} Σ_{mn} ρ_mn W_mn(α)`
/// with `α = (q + ip)/2` and generalised Laguerre polynomials.
pub fn wigner(rho: &ReducedState, q_axis: &[f64], p_axis: &[f64]) -> Result<WignerGrid> {
    if q_axis.is_empty() || p_axis.is_empty() {
        return Err(Error::InvalidArgument("Wigner axes must be non-empty".into()));
    }
    let dim = rho.dim();
    let m = rho.matrix();
    // sqrt(m!/n!) for n >= m
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..dim).scan(0.0, |acc, k| {
            *acc += (k as f64).ln();
            Some(*acc)
        }))
        .collect();
    let rows: Vec<(Vec<f64>, f64)> = q_axis
        .par_iter()
        .map(|&q| {
            let mut row = Vec::with_capacity(p_axis.len());
            let mut imag = 0.0f64;
            let mut lag = vec![0.0; dim];
            for &p in p_axis {
                let alpha = C64::new(q, p) * 0.5;
                let x = 4.0 * alpha.norm_sqr();
                let two_alpha = alpha * 2.0;
                let mut total = C64::new(0.0, 0.0);
                let mut power = C64::new(1.0, 0.0);
                for d in 0..dim {
                    laguerre_column(d as f64, x, &mut lag[..dim - d]);
                    for k in 0..dim - d {
                        let n = k + d;
                        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                        let c = sign * (0.5 * (ln_fact[k] - ln_fact[n])).exp() * lag[k];
                        total += m[(k, n)] * power * c;
                        if d > 0 {
                            total += m[(n, k)] * power.conj() * c;
                        }
                    }
                    power *= two_alpha;
                }
                let w = total * ((-0.5 * x).exp() / (2.0 * std::f64::consts::PI));
                imag = imag.max(w.im.abs());
                row.push(w.re);
            }
            (row, imag)
        })
        .collect();
    let imag_residue = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let values: Vec<Vec<f64>> = rows.into_iter().map(|r| r.0).collect();
    let grid = WignerGrid { q_axis: q_axis.to_vec(), p_axis: p_axis.to_vec(), values, imag_residue };
    if q_axis.len() > 2 && p_axis.len() > 2 {
        let norm = grid.integral();
        if (norm - 1.0).abs() > 1e-3 {
            log::warn!("Wigner grid captures {norm:.6} of the state; widen the axes");
        }
    }
    Ok(grid)
}

/// Fills `out[k] = L_k^{alpha}(x)` for `k = 0..out.len()`.
fn laguerre_column(alpha: f64, x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = 1.0 + alpha - x;
    }
    for k in 1..out.len().saturating_sub(1) {
        let kf = k as f64;
        out[k + 1] = ((2.0 * kf + 1.0 + alpha - x) * out[k] - (kf + alpha) * out[k - 1]) / (kf + 1.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::number;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn fock(dim: usize, n: usize) -> ReducedState {
        let data = CMatrix::from_fn(dim, dim, |i, j| if i == n && j == n { c(1.0) } else { c(0.0) });
        ReducedState::new(Mode::Mechanical, data).unwrap()
    }

    #[test]
    fn laguerre_matches_closed_forms() {
        let mut out = [0.0; 4];
        laguerre_column(0.0, 1.5, &mut out);
        let x: f64 = 1.5;
        assert!((out[2] - (x * x - 4.0 * x + 2.0) / 2.0).abs() < 1e-14);
        assert!((out[3] - (-x.powi(3) + 9.0 * x * x - 18.0 * x + 6.0) / 6.0).abs() < 1e-14);
        laguerre_column(2.0, x, &mut out);
        // L_2^2(x) = x²/2 - 4x + 6
        assert!((out[2] - (x * x / 2.0 - 4.0 * x + 6.0)).abs() < 1e-14);
    }

    #[test]
    fn thermal_state_basics() {
        let vac = thermal_state(5, 0.0);
        assert_eq!(vac.matrix()[(0, 0)], c(1.0));
        assert_eq!(vac.trace(), 1.0);
        let th = thermal_state(14, 0.01);
        assert!((th.mean_number() - 0.01).abs() < 1e-10);
        assert!((entropy_vn(&th) - thermal_entropy(0.01)).abs() < 1e-10);
    }

    #[test]
    fn entropy_examples() {
        assert!(entropy_vn(&fock(4, 2)).abs() < 1e-14);
        let mixed = ReducedState::new(Mode::Optical, CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.5), c(0.5)]))).unwrap();
        assert!((entropy_vn(&mixed) - 2f64.ln()).abs() < 1e-14);
        let n: f64 = 0.0675;
        let direct = (1.0 + n) * (1.0 + n).ln() - n * n.ln();
        assert!((thermal_entropy(n) - direct).abs() < 1e-15);
        assert!((thermal_entropy(n) - 0.2513).abs() < 1e-3);
    }

    #[test]
    fn effective_temperature_examples() {
        let n = 1.0 / (std::f64::consts::E - 1.0);
        assert!((effective_temperature(n, 1.0) - 1.0).abs() < 1e-14);
        let t = effective_temperature(0.0675, 1.292);
        assert!((t - 1.292 / (1.0f64 + 1.0 / 0.0675).ln()).abs() < 1e-14);
        assert!((effective_temperature(0.3, 2.4) - 2.0 * effective_temperature(0.3, 1.2)).abs() < 1e-14);
        assert_eq!(effective_temperature(0.0, 1.0), 0.0);
    }

    #[test]
    fn ergotropy_examples() {
        let h = number(6).unwrap().scale_re(1.3);
        assert_eq!(ergotropy(&thermal_state(6, 0.4), &h).unwrap(), 0.0);
        assert!((ergotropy(&fock(6, 1), &h).unwrap() - 1.3).abs() < 1e-12);
        assert!(ergotropy(&fock(5, 1), &h).is_err());
    }

    #[test]
    fn free_energy_of_gibbs_is_zero() {
        let h = number(8).unwrap().scale_re(1.0);
        let temp = 0.7;
        let g = gibbs_state(&h, temp).unwrap();
        assert!(max_extractable_work(&g, &h, temp).unwrap().abs() < 1e-12);
        let th = thermal_state(8, crate::model::mean_occupation(1.0, temp).unwrap());
        assert!((g.matrix() - th.matrix()).camax() < 1e-12);
    }

    #[test]
    fn quadrature_stats_vacuum_and_thermal() {
        let s = quadrature_stats(&thermal_state(10, 0.0));
        assert!(s.mean_q.abs() < 1e-15 && s.mean_p.abs() < 1e-15);
        assert!((s.q2 - 1.0).abs() < 1e-14 && (s.p2 - 1.0).abs() < 1e-14);
        assert!((s.min_variance - 1.0).abs() < 1e-14);
        let s = quadrature_stats(&thermal_state(30, 0.3));
        assert!((s.q2 - 1.6).abs() < 1e-8 && (s.p2 - 1.6).abs() < 1e-8);
        assert!((s.max_variance - s.min_variance).abs() < 1e-12);
    }

    #[test]
    fn partial_trace_of_bell_state() {
        let mut psi = nalgebra::DVector::<C64>::zeros(4);
        psi[0] = c(std::f64::consts::FRAC_1_SQRT_2);
        psi[3] = c(std::f64::consts::FRAC_1_SQRT_2);
        let rho = DensityMatrix::pure(2, 2, &psi).unwrap();
        let b = partial_trace(&rho, Mode::Mechanical);
        assert!((b.matrix() - CMatrix::identity(2, 2) * c(0.5)).camax() < 1e-15);
        assert_eq!(b.mode(), Mode::Mechanical);
    }

    #[test]
    fn vacuum_wigner_peak() {
        let axis = symmetric_axis(6.0, 121);
        let grid = wigner(&thermal_state(6, 0.0), &axis, &axis).unwrap();
        assert!((grid.values[60][60] - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-12);
        assert!((grid.integral() - 1.0).abs() < 1e-6);
        assert!(grid.imag_residue < 1e-12);
    }

    #[test]
    fn coherent_state_wigner_is_displaced() {
        // Truncated coherent state with beta = 0.8: peak near q = 2 Re(beta) = 1.6.
        let dim = 20;
        let beta: f64 = 0.8;
        let mut psi: Vec<f64> = Vec::new();
        let mut coeff = (-beta * beta / 2.0).exp();
        for n in 0..dim {
            if n > 0 {
                coeff *= beta / (n as f64).sqrt();
            }
            psi.push(coeff);
        }
        let data = CMatrix::from_fn(dim, dim, |i, j| c(psi[i] * psi[j]));
        let rho = ReducedState::new(Mode::Mechanical, data).unwrap();
        let axis = symmetric_axis(8.0, 161);
        let grid = wigner(&rho, &axis, &axis).unwrap();
        let (mean_q, var_q) = grid.q_moments();
        assert!((mean_q - 1.6).abs() < 1e-4, "{mean_q}");
        assert!((var_q - 1.0).abs() < 1e-3);
    }
}
