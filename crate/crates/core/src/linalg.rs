//! Small dense helpers on top of nalgebra for 2×2 and 3×3 symmetric matrices.

use nalgebra::{Matrix2, Matrix3, SymmetricEigen, Vector3};

/// Relative eigenvalue cutoff used for pseudo-inverses and rank decisions.
pub const PINV_RELATIVE_CUTOFF: f64 = 1e-12;

/// Moore-Penrose pseudo-inverse of a symmetric 3×3 matrix by eigendecomposition.
///
/// Eigenvalues below `rel_cutoff * max|eigenvalue|` are treated as zero.
pub fn pinv_sym3(m: &Matrix3<f64>, rel_cutoff: f64) -> Matrix3<f64> {
    let eig = SymmetricEigen::new(*m);
    let scale = eig.eigenvalues.amax();
    let mut out = Matrix3::zeros();
    if scale == 0.0 {
        return out;
    }
    for (k, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev.abs() > rel_cutoff * scale {
            let v = eig.eigenvectors.column(k);
            out += (v * v.transpose()) / ev;
        }
    }
    out
}

/// Generalized inverse `D (D M D)^+ D` with `D = diag(m_ii^{-1/2})`.
///
/// Satisfies `M G M = M` and is far more accurate than [`pinv_sym3`] when
/// the rows of `m` differ wildly in scale. Zero diagonal entries are left
/// unscaled.
pub fn ginv_sym3_scaled(m: &Matrix3<f64>, rel_cutoff: f64) -> Matrix3<f64> {
    let (scaled, d) = equilibrate(m);
    d * pinv_sym3(&scaled, rel_cutoff) * d
}

/// `(D M D, D)` with `D = diag(m_ii^{-1/2})`, leaving zero diagonals unscaled.
/// `D M D` has the same rank as `M`, and `e_i` lies in the range of one iff
/// it lies in the range of the other.
pub fn equilibrate(m: &Matrix3<f64>) -> (Matrix3<f64>, Matrix3<f64>) {
    let d = Matrix3::from_diagonal(
        &m.diagonal()
            .map(|v| if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 }),
    );
    (d * m * d, d)
}

pub fn pinv_sym2(m: &Matrix2<f64>, rel_cutoff: f64) -> Matrix2<f64> {
    let eig = SymmetricEigen::new(*m);
    let scale = eig.eigenvalues.amax();
    let mut out = Matrix2::zeros();
    if scale == 0.0 {
        return out;
    }
    for (k, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev.abs() > rel_cutoff * scale {
            let v = eig.eigenvectors.column(k);
            out += (v * v.transpose()) / ev;
        }
    }
    out
}

/// Numerical rank of a symmetric 3×3 matrix under the relative cutoff.
pub fn rank_sym3(m: &Matrix3<f64>, rel_cutoff: f64) -> usize {
    let eig = SymmetricEigen::new(*m);
    let scale = eig.eigenvalues.amax();
    if scale == 0.0 {
        return 0;
    }
    eig.eigenvalues
        .iter()
        .filter(|ev| ev.abs() > rel_cutoff * scale)
        .count()
}

/// Norm of `v - P v`, where `P` projects onto the numerical range of `m`.
pub fn range_residual(m: &Matrix3<f64>, v: &Vector3<f64>, rel_cutoff: f64) -> f64 {
    let eig = SymmetricEigen::new(*m);
    let scale = eig.eigenvalues.amax();
    let mut projected = Vector3::zeros();
    if scale > 0.0 {
        for (k, &ev) in eig.eigenvalues.iter().enumerate() {
            if ev.abs() > rel_cutoff * scale {
                let u = eig.eigenvectors.column(k);
                projected += u * u.dot(v);
            }
        }
    }
    (v - projected).norm()
}
