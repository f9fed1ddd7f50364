//! Dense least squares for the small systems the curve fit builds.

use alloc::vec;
use alloc::vec::Vec;

/// Row-major dense matrix.
#[derive(Debug, Clone)]
pub(crate) struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Dense {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }
}

/// Minimises `|A x - b|` by Householder QR on column-equilibrated `A`.
/// Returns `None` when `A` is numerically rank deficient.
pub(crate) fn least_squares(a: &Dense, b: &[f64]) -> Option<Vec<f64>> {
    let (m, n) = (a.rows, a.cols);
    debug_assert_eq!(b.len(), m);
    if m < n {
        return None;
    }

    let mut scale = vec![0.0; n];
    for (c, s) in scale.iter_mut().enumerate() {
        let norm = libm::sqrt((0..m).map(|r| a.at(r, c) * a.at(r, c)).sum::<f64>());
        *s = if norm > 0.0 { 1.0 / norm } else { 0.0 };
    }
    if scale.contains(&0.0) {
        return None;
    }

    // column-major working copy
    let mut q: Vec<Vec<f64>> = (0..n)
        .map(|c| (0..m).map(|r| a.at(r, c) * scale[c]).collect())
        .collect();
    let mut rhs = b.to_vec();
    let mut diag = vec![0.0; n];

    for k in 0..n {
        let norm = libm::sqrt(q[k][k..].iter().map(|v| v * v).sum::<f64>());
        if norm == 0.0 {
            return None;
        }
        let alpha = if q[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = q[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm_sq: f64 = v.iter().map(|x| x * x).sum();
        diag[k] = alpha;
        if vnorm_sq == 0.0 {
            continue;
        }
        for col in q.iter_mut().skip(k + 1) {
            let dot: f64 = v.iter().zip(&col[k..]).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vnorm_sq;
            for (x, vi) in col[k..].iter_mut().zip(&v) {
                *x -= f * vi;
            }
        }
        let dot: f64 = v.iter().zip(&rhs[k..]).map(|(a, b)| a * b).sum();
        let f = 2.0 * dot / vnorm_sq;
        for (x, vi) in rhs[k..].iter_mut().zip(&v) {
            *x -= f * vi;
        }
    }

    let max_diag = diag.iter().fold(0.0f64, |acc, d| acc.max(libm::fabs(*d)));
    if diag.iter().any(|d| libm::fabs(*d) <= 1e-12 * max_diag) {
        return None;
    }

    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut acc = rhs[k];
        for (j, xj) in x.iter().enumerate().skip(k + 1) {
            acc -= q[j][k] * xj;
        }
        x[k] = acc / diag[k];
    }
    for (xi, s) in x.iter_mut().zip(&scale) {
        *xi *= s;
    }
    Some(x)
}
