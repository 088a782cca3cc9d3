//! Dense linear-algebra helpers: Hermitian spectra and the real matrix
//! exponential used by the propagator backend.

use nalgebra::DMatrix;

use crate::{CMatrix, C64};

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut vals: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues ascending and
/// eigenvectors as the matching columns.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// `-sum(l ln l)` over the given probabilities with `0 ln 0 = 0`.
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum()
}

/// Largest absolute deviation from Hermiticity, `max |m - m^dagger|`.
pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Groups indices `0..n` into the connected components of the graph whose
/// edges are the index pairs yielded by `edges`.
pub fn connected_components(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> Vec<Vec<usize>> {
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut parent: Vec<usize> = (0..n).collect();
    for (i, j) in edges {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            parent[ri.max(rj)] = ri.min(rj);
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = std::collections::BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Eigenvalues of a Hermitian matrix computed block by block over the
/// connected components of its sparsity pattern, ascending.
pub fn hermitian_eigenvalues_blocked(m: &CMatrix) -> Vec<f64> {
    let n = m.nrows();
    let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| m[(i, j)] != C64::new(0.0, 0.0));
    let blocks = connected_components(n, edges);
    let mut vals = Vec::with_capacity(n);
    for block in blocks {
        let sub = CMatrix::from_fn(block.len(), block.len(), |r, c| m[(block[r], block[c])]);
        vals.extend(hermitian_eigenvalues(&sub));
    }
    vals.sort_by(f64::total_cmp);
    vals
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().copied().sum()
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068),
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with diagonal Padé
/// approximants of degree 3 to 13, selected from the 1-norm.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.nrows();
    let ident = DMatrix::<f64>::identity(n, n);
    let norm = one_norm(a);

    for &(order, theta) in &THETA {
        if norm <= theta {
            let coeffs: &[f64] = match order {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            return pade_low(a, coeffs, &ident);
        }
    }

    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let scaled = a * 2f64.powi(-s);
    let mut r = pade13(&scaled, &ident);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

fn solve_pade(u: DMatrix<f64>, v: DMatrix<f64>) -> DMatrix<f64> {
    let p = &v + &u;
    let q = v - u;
    q.lu().solve(&p).expect("Padé denominator is singular")
}

fn pade_low(a: &DMatrix<f64>, b: &[f64], ident: &DMatrix<f64>) -> DMatrix<f64> {
    let a2 = a * a;
    let mut powers = vec![ident.clone()];
    for k in 1..b.len() / 2 {
        let next = &powers[k - 1] * &a2;
        powers.push(next);
    }
    let mut u_inner = DMatrix::<f64>::zeros(a.nrows(), a.ncols());
    let mut v = DMatrix::<f64>::zeros(a.nrows(), a.ncols());
    for (k, p) in powers.iter().enumerate() {
        u_inner += p * b[2 * k + 1];
        v += p * b[2 * k];
    }
    solve_pade(a * u_inner, v)
}

fn pade13(a: &DMatrix<f64>, ident: &DMatrix<f64>) -> DMatrix<f64> {
    let b = &PADE13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_high = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u_inner = u_high + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + ident * b[1];
    let u = a * u_inner;
    let v_high = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = v_high + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + ident * b[0];
    solve_pade(u, v)
}
