//! Small dense complex helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Averages `a` with its conjugate transpose in place.
pub fn hermitize(a: &mut DMatrix<Complex64>) {
    let n = a.nrows();
    for j in 0..n {
        a[(j, j)] = Complex64::new(a[(j, j)].re, 0.0);
        for i in (j + 1)..n {
            let v = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = v;
            a[(j, i)] = v.conj();
        }
    }
}

/// Largest absolute deviation from Hermitian symmetry relative to the
/// largest entry modulus.
pub fn hermitian_defect(a: &DMatrix<Complex64>) -> f64 {
    let scale = a.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in j..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst / scale
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order. Equal eigenvalues keep the solver's original order, so
/// the result is deterministic for a given input.
pub struct SortedEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
}

pub fn hermitian_eigen(a: &DMatrix<Complex64>) -> SortedEigen {
    let eig = a.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(a.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    SortedEigen { values, vectors }
}

pub fn trace_re(a: &DMatrix<Complex64>) -> f64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)].re).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_descending_and_reconstructs() {
        let a = DMatrix::from_row_slice(
            3,
            3,
            &[
                Complex64::new(2.0, 0.0),
                Complex64::new(0.5, 0.5),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.5, -0.5),
                Complex64::new(5.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(1.0, 0.0),
            ],
        );
        let e = hermitian_eigen(&a);
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            3,
            e.values.iter().map(|&v| Complex64::new(v, 0.0)),
        ));
        let back = &e.vectors * d * e.vectors.adjoint();
        assert!((back - a).norm() < 1e-10);
    }
}
