use nalgebra::{DMatrix, DVector};

pub(crate) fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows().max(1) as f64;
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n))
}

pub(crate) fn center_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let means = column_means(m);
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] - means[j])
}

/// Population covariance of the columns.
pub(crate) fn covariance(m: &DMatrix<f64>) -> DMatrix<f64> {
    let c = center_columns(m);
    let mut cov = c.tr_mul(&c) / m.nrows() as f64;
    symmetrize(&mut cov);
    cov
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Flips a vector so its largest-magnitude entry is positive (first one on ties).
pub(crate) fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Orders eigenpairs by descending eigenvalue; eigenvectors are columns.
pub(crate) fn sort_eigenpairs(
    values: &[f64],
    vectors: &DMatrix<f64>,
) -> (Vec<f64>, DMatrix<f64>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let sorted_values = order.iter().map(|&i| values[i]).collect();
    let mut sorted = DMatrix::zeros(vectors.nrows(), order.len());
    for (k, &i) in order.iter().enumerate() {
        let mut col: Vec<f64> = vectors.column(i).iter().copied().collect();
        fix_sign(&mut col);
        sorted.set_column(k, &DVector::from_vec(col));
    }
    (sorted_values, sorted)
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues descending.
pub(crate) fn symmetric_eigen_sorted(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = m.symmetric_eigen();
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    sort_eigenpairs(&values, &eig.eigenvectors)
}

/// Moore-Penrose pseudoinverse with a cutoff relative to the largest singular value.
pub(crate) fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(c, r);
    }
    let svd = m.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    if max_sv == 0.0 {
        return DMatrix::zeros(c, r);
    }
    let eps = max_sv * r.max(c) as f64 * f64::EPSILON;
    svd.pseudo_inverse(eps).expect("both singular vector sets computed")
}

/// Dot product with four independent accumulators, summed in a fixed order.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let (ha, ta) = a.split_at(n - n % 4);
    let (hb, tb) = b.split_at(n - n % 4);
    for (x, y) in ha.chunks_exact(4).zip(hb.chunks_exact(4)) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ta.iter().zip(tb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
