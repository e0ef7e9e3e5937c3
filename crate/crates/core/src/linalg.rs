//! Symmetric eigendecomposition by cyclic Jacobi rotations.

use ndarray::{Array1, Array2};

const MAX_SWEEPS: usize = 100;

/// Eigenvalues and eigenvectors (as columns) of a symmetric matrix.
///
/// Eigenvalues are sorted non-increasing; each eigenvector has its
/// largest-magnitude component made positive (first such component on ties).
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
}

/// Sweeps until the off-diagonal Frobenius norm drops to
/// `1e-12 * ||A||_F` or `MAX_SWEEPS` is reached.
pub fn symmetric_eigen(a: &Array2<f64>) -> SymmetricEigen {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    let frob = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-12 * frob;

    for _ in 0..MAX_SWEEPS {
        let off = off_diagonal_norm(&m);
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                m[[p, q]] = 0.0;
                m[[q, p]] = 0.0;
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[j, j]].total_cmp(&m[[i, i]]).then(i.cmp(&j)));
    let values = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src).to_owned();
        let lead = col
            .iter()
            .enumerate()
            .fold((0usize, 0.0f64), |best, (k, x)| {
                if x.abs() > best.1 {
                    (k, x.abs())
                } else {
                    best
                }
            })
            .0;
        if col[lead] < 0.0 {
            col.mapv_inplace(|x| -x);
        }
        vectors.column_mut(dst).assign(&col);
    }
    SymmetricEigen { values, vectors }
}

fn off_diagonal_norm(m: &Array2<f64>) -> f64 {
    let mut s = 0.0;
    for ((i, j), x) in m.indexed_iter() {
        if i != j {
            s += x * x;
        }
    }
    s.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn two_by_two() {
        // eigenvalues of [[2,1],[1,2]] are 3 and 1
        let e = symmetric_eigen(&array![[2.0, 1.0], [1.0, 2.0]]);
        assert_abs_diff_eq!(e.values[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 1.0, epsilon = 1e-14);
        let h = 0.5f64.sqrt();
        assert_abs_diff_eq!(e.vectors[[0, 0]], h, epsilon = 1e-14);
        assert_abs_diff_eq!(e.vectors[[1, 0]], h, epsilon = 1e-14);
    }

    #[test]
    fn reconstructs_random_spd() {
        let n = 7;
        let b = Array2::from_shape_fn((n, n), |(i, j)| ((i * 7 + j * 13) % 11) as f64 - 5.0);
        let a = b.t().dot(&b);
        let e = symmetric_eigen(&a);
        let recon = e
            .vectors
            .dot(&Array2::from_diag(&e.values))
            .dot(&e.vectors.t());
        for (x, y) in recon.iter().zip(a.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-9);
        }
        let gram = e.vectors.t().dot(&e.vectors);
        for ((i, j), x) in gram.indexed_iter() {
            assert_abs_diff_eq!(*x, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-12);
        }
        for w in e.values.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn diagonal_input_is_sorted() {
        let e = symmetric_eigen(&array![[1.0, 0.0, 0.0], [0.0, 5.0, 0.0], [0.0, 0.0, 3.0]]);
        assert_eq!(e.values.to_vec(), vec![5.0, 3.0, 1.0]);
        assert_eq!(e.vectors.column(0).to_vec(), vec![0.0, 1.0, 0.0]);
    }
}
