use nalgebra::DMatrix;

/// Symmetric eigendecomposition, ascending, each eigenvector gauge-fixed so
/// that its largest-magnitude component is positive.
pub fn eigh(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let mut best = 0;
        for r in 0..n {
            // prefer the first index on near-ties so the gauge is platform stable
            if col[r].abs() > col[best].abs() * (1.0 + 1e-12) {
                best = r;
            }
        }
        let s = if col[best] < 0.0 { -1.0 } else { 1.0 };
        vecs.column_mut(dst).copy_from(&(col * s));
    }
    (vals, vecs)
}

/// Vᵀ O V.
pub fn congruence(v: &DMatrix<f64>, op: &DMatrix<f64>) -> DMatrix<f64> {
    let ov = matmul(op, v);
    matmul(&v.transpose(), &ov)
}

/// Dense real product through matrixmultiply (nalgebra's own gemm is column-major and
/// considerably slower for the shapes used here without BLAS).
pub fn matmul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.ncols(), b.nrows());
    let (m, k, n) = (a.nrows(), a.ncols(), b.ncols());
    let mut c = DMatrix::<f64>::zeros(m, n);
    // nalgebra storage is column-major: row stride 1, column stride nrows
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            1,
            m as isize,
            b.as_ptr(),
            1,
            k as isize,
            0.0,
            c.as_mut_ptr(),
            1,
            m as isize,
        );
    }
    c
}

/// Relative Frobenius asymmetry ‖M − Mᵀ‖/‖M‖ (0 for the zero matrix).
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let norm = m.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (m - m.transpose()).norm() / norm
}

/// Relative Frobenius deviation from antisymmetry ‖M + Mᵀ‖/‖M‖.
pub fn antisymmetry_defect(m: &DMatrix<f64>) -> f64 {
    let norm = m.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (m + m.transpose()).norm() / norm
}

/// Kronecker product of three factors, first index slowest.
pub fn kron3(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b).kronecker(c)
}
