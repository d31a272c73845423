//! Small dense linear-algebra helpers on top of nalgebra.
//!
//! Every rank decision goes through [`rank_threshold`]: a singular value
//! counts when it exceeds `rtol * scale * max(rows, cols)`, where `scale` is
//! the largest singular value unless the caller supplies an external one.

use nalgebra::{ComplexField, DMatrix, DVector};

use crate::{Complex, Mat, Vector};

/// Singular value decomposition `m = U diag(s) V^H`.
///
/// Computed by one-sided Jacobi rotations on the triangular factor of a
/// Householder QR. nalgebra's bidiagonal SVD can lose accuracy in the
/// dominant singular pair when a second singular value is near rounding
/// level (errors of order `1e-5` relative were observed on `4 x 2` inputs),
/// which would rotate image bases in the per-sensor splits.
#[derive(Clone, Debug)]
pub struct Svd<T: ComplexField<RealField = f64>> {
    /// `rows x min(rows, cols)` left singular vectors; columns for zero
    /// singular values are zero.
    pub u: DMatrix<T>,
    /// Singular values in descending order, `min(rows, cols)` of them
    /// (`cols` for wide inputs, padded with zeros).
    pub s: Vec<f64>,
    /// `cols x cols` unitary matrix of right singular vectors.
    pub v: DMatrix<T>,
}

const JACOBI_SWEEPS: usize = 80;

/// Orthogonalizes the columns of a square `w` in place, accumulating the
/// rotations into `v` when given.
fn jacobi_columns<T>(w: &mut DMatrix<T>, mut v: Option<&mut DMatrix<T>>)
where
    T: ComplexField<RealField = f64>,
{
    let n = w.ncols();
    for _ in 0..JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta) = (0.0, 0.0);
                let mut gamma = T::zero();
                for i in 0..w.nrows() {
                    let (a, b) = (w[(i, p)].clone(), w[(i, q)].clone());
                    alpha += a.clone().modulus_squared();
                    beta += b.clone().modulus_squared();
                    gamma += a.conjugate() * b;
                }
                let g = gamma.clone().modulus();
                if g == 0.0 || g <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                // make the inner product real, then rotate in the real plane
                let phase = gamma.conjugate().unscale(g);
                let zeta = (beta - alpha) / (2.0 * g);
                let t = if zeta == 0.0 {
                    1.0
                } else {
                    zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                let rotate = |m: &mut DMatrix<T>| {
                    for i in 0..m.nrows() {
                        let a = m[(i, p)].clone();
                        let b = m[(i, q)].clone() * phase.clone();
                        m[(i, p)] = a.clone().scale(c) - b.clone().scale(sn);
                        m[(i, q)] = a.scale(sn) + b.scale(c);
                    }
                };
                rotate(w);
                if let Some(v) = v.as_deref_mut() {
                    rotate(v);
                }
            }
        }
        if !rotated {
            break;
        }
    }
}

/// Full SVD; `want_u` / `want_v` skip the corresponding factors (returned empty).
pub fn svd<T>(m: &DMatrix<T>, want_u: bool, want_v: bool) -> Svd<T>
where
    T: ComplexField<RealField = f64>,
{
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Svd {
            u: DMatrix::zeros(if want_u { rows } else { 0 }, 0),
            s: Vec::new(),
            v: if want_v { DMatrix::identity(cols, cols) } else { DMatrix::zeros(0, 0) },
        };
    }
    // square working matrix W with the same singular values and right vectors
    let (q, mut w) = if rows >= cols {
        let qr = m.clone().qr();
        (Some(qr.q()), qr.r())
    } else {
        let mut p = DMatrix::<T>::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        (None, p)
    };
    let n = cols;
    let mut v = want_v.then(|| DMatrix::<T>::identity(n, n));
    jacobi_columns(&mut w, v.as_mut());
    let norms: Vec<f64> = (0..n).map(|k| w.column(k).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let s: Vec<f64> = order.iter().map(|&k| norms[k]).collect();
    let k_out = if rows >= cols { cols } else { n };
    let u = if want_u {
        let mut uw = DMatrix::<T>::zeros(w.nrows(), k_out);
        for (dst, &src) in order.iter().enumerate().take(k_out) {
            if norms[src] > 0.0 {
                uw.set_column(dst, &w.column(src).unscale(norms[src]));
            }
        }
        match q {
            Some(q) => q * uw,
            None => uw.rows(0, rows).into_owned(),
        }
    } else {
        DMatrix::zeros(0, 0)
    };
    let v = match v {
        Some(v) => DMatrix::from_fn(n, n, |i, j| v[(i, order[j])].clone()),
        None => DMatrix::zeros(0, 0),
    };
    Svd { u, s, v }
}

/// Singular values in descending order. Empty matrices have none.
pub fn singular_values<T>(m: &DMatrix<T>) -> Vec<f64>
where
    T: ComplexField<RealField = f64>,
{
    let mut s = svd(m, false, false).s;
    s.truncate(m.nrows().min(m.ncols()));
    s
}

pub fn rank_threshold(rtol: f64, scale: f64, rows: usize, cols: usize) -> f64 {
    rtol * scale * rows.max(cols) as f64
}

/// Numerical rank relative to the matrix's own largest singular value.
pub fn rank<T>(m: &DMatrix<T>, rtol: f64) -> usize
where
    T: ComplexField<RealField = f64>,
{
    let sv = singular_values(m);
    match sv.first() {
        Some(&top) if top > 0.0 => {
            let thr = rank_threshold(rtol, top, m.nrows(), m.ncols());
            sv.iter().filter(|&&s| s > thr).count()
        }
        _ => 0,
    }
}

/// Numerical rank against an externally supplied scale.
pub fn rank_scaled<T>(m: &DMatrix<T>, rtol: f64, scale: f64) -> usize
where
    T: ComplexField<RealField = f64>,
{
    let thr = rank_threshold(rtol, scale, m.nrows(), m.ncols());
    singular_values(m).iter().filter(|&&s| s > thr).count()
}

/// Full SVD with `V` guaranteed square.
fn full_svd<T>(m: &DMatrix<T>) -> (Vec<f64>, DMatrix<T>)
where
    T: ComplexField<RealField = f64>,
{
    let d = svd(m, false, true);
    (d.s, d.v)
}

/// Orthonormal basis of the kernel.
pub fn null_space<T>(m: &DMatrix<T>, rtol: f64) -> DMatrix<T>
where
    T: ComplexField<RealField = f64>,
{
    let cols = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(cols, cols);
    }
    let (sv, v) = full_svd(m);
    let top = sv.first().copied().unwrap_or(0.0);
    let thr = rank_threshold(rtol, top, m.nrows(), cols);
    let r = if top > 0.0 { sv.iter().filter(|&&s| s > thr).count() } else { 0 };
    v.columns(r, cols - r).into_owned()
}

/// The `count` right singular vectors belonging to the smallest singular values.
pub fn smallest_right_singular_vectors<T>(m: &DMatrix<T>, count: usize) -> DMatrix<T>
where
    T: ComplexField<RealField = f64>,
{
    let cols = m.ncols();
    let (_, v) = full_svd(m);
    v.columns(cols - count, count).into_owned()
}

/// Orthonormal basis of the column space, trimmed at `rtol * scale`.
pub fn column_space(m: &Mat, rtol: f64, scale: f64) -> Mat {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Mat::zeros(rows, 0);
    }
    let thr = rank_threshold(rtol, scale, rows, cols);
    let d = svd(m, true, false);
    let r = d.s.iter().filter(|&&s| s > thr).count().min(d.u.ncols());
    d.u.columns(0, r).into_owned()
}

/// Orthonormal basis of the column space, relative to the matrix's own norm.
pub fn orthonormal_columns(m: &Mat, rtol: f64) -> Mat {
    let scale = singular_values(m).first().copied().unwrap_or(0.0);
    column_space(m, rtol, scale)
}

/// Minimum-norm least-squares solution of `m x = y`.
pub fn lstsq(m: &Mat, y: &Vector, rtol: f64) -> Vector {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Vector::zeros(cols);
    }
    let d = svd(m, true, true);
    let top = d.s.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return Vector::zeros(cols);
    }
    let thr = rank_threshold(rtol, top, rows, cols);
    let mut x = Vector::zeros(cols);
    for (k, &sk) in d.s.iter().enumerate().take(d.u.ncols()) {
        if sk > thr {
            let coef = d.u.column(k).dot(y) / sk;
            x += d.v.column(k) * coef;
        }
    }
    x
}

/// Largest singular value.
pub fn spectral_norm<T>(m: &DMatrix<T>) -> f64
where
    T: ComplexField<RealField = f64>,
{
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Stacks matrices with a common column count vertically.
pub fn vstack<'a, I>(blocks: I, cols: usize) -> Mat
where
    I: IntoIterator<Item = &'a Mat>,
{
    let blocks: Vec<&Mat> = blocks.into_iter().collect();
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        debug_assert_eq!(b.ncols(), cols);
        out.view_mut((at, 0), (b.nrows(), cols)).copy_from(b);
        at += b.nrows();
    }
    out
}

/// Concatenates vectors.
pub fn vcat<'a, I>(parts: I) -> Vector
where
    I: IntoIterator<Item = &'a Vector>,
{
    let data: Vec<f64> = parts.into_iter().flat_map(|v| v.iter().copied()).collect();
    Vector::from_vec(data)
}

/// Places matrices with a common row count side by side.
pub fn hstack<'a, I>(blocks: I, rows: usize) -> Mat
where
    I: IntoIterator<Item = &'a Mat>,
{
    let blocks: Vec<&Mat> = blocks.into_iter().collect();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.view_mut((0, at), (rows, b.ncols())).copy_from(b);
        at += b.ncols();
    }
    out
}

/// `m^k` by repeated squaring, rescaling each product to unit spectral norm.
/// Only the kernel and the column space of the result are meaningful.
pub fn normalized_power<T>(m: &DMatrix<T>, k: usize) -> DMatrix<T>
where
    T: ComplexField<RealField = f64>,
{
    let n = m.nrows();
    let normalize = |x: DMatrix<T>| {
        let s = x.norm();
        if s > 0.0 {
            x.unscale(s)
        } else {
            x
        }
    };
    let mut result = DMatrix::<T>::identity(n, n);
    let mut base = normalize(m.clone());
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            result = normalize(&result * &base);
        }
        e >>= 1;
        if e > 0 {
            base = normalize(&base * &base);
        }
    }
    result
}

pub fn to_complex(m: &Mat) -> DMatrix<Complex> {
    m.map(|x| Complex::new(x, 0.0))
}

/// Max-abs entry, 0 for empty input.
pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, &x| a.max(x.abs()))
}

/// Builds a matrix from row-major nested vectors; `None` if ragged.
pub fn from_rows(rows: &[Vec<f64>], cols: usize) -> Option<Mat> {
    if rows.iter().any(|r| r.len() != cols) {
        return None;
    }
    Some(Mat::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn to_columns(m: &Mat) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

pub fn dvec(v: &[f64]) -> Vector {
    DVector::from_column_slice(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn check_factorization<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) {
        let d = svd(m, true, true);
        let k = d.u.ncols();
        let sigma = DMatrix::<T>::from_fn(k, k, |i, j| if i == j { T::from_real(d.s[i]) } else { T::zero() });
        let back = &d.u * sigma * d.v.columns(0, k).adjoint();
        assert!((back - m).norm() <= 1e-13 * (1.0 + m.norm()));
        let vv = d.v.adjoint() * &d.v;
        assert!((vv - DMatrix::<T>::identity(m.ncols(), m.ncols())).norm() < 1e-13);
        assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn svd_factorizes() {
        let tall = Mat::from_fn(5, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 - 1.5 + 0.1 * j as f64);
        check_factorization(&tall);
        check_factorization(&tall.transpose());
        check_factorization(&Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]));
        let c = DMatrix::<Complex>::from_fn(3, 4, |i, j| Complex::new(i as f64 - j as f64, (i * j) as f64 * 0.5));
        check_factorization(&c);
        check_factorization(&c.adjoint());
    }

    #[test]
    fn svd_keeps_dominant_pair_of_nearly_rank_one_matrix() {
        // columns are multiples of a geometric sequence plus a rounding-level bump
        let ratio: f64 = -1.404;
        let coef = [0.7, -1.1];
        let m = Mat::from_fn(4, 2, |i, j| coef[j] * ratio.powi(i as i32) + if (i, j) == (1, 0) { 1e-13 } else { 0.0 });
        let d = svd(&m, true, false);
        let geo = Vector::from_fn(4, |i, _| ratio.powi(i as i32)).normalize();
        let u0 = d.u.column(0).into_owned();
        assert!((u0.dot(&geo).abs() - 1.0).abs() < 1e-12);
        let exact = (coef[0] * coef[0] + coef[1] * coef[1]).sqrt() * Vector::from_fn(4, |i, _| ratio.powi(i as i32)).norm();
        assert_relative_eq!(d.s[0], exact, max_relative = 1e-12);
        assert!(d.s[1] < 1e-12);
    }

    #[test]
    fn rank_of_rank_one() {
        let m = Mat::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert_eq!(rank(&m, 1e-10), 1);
        assert_eq!(rank(&Mat::zeros(3, 3), 1e-10), 0);
        assert_eq!(rank(&Mat::zeros(0, 3), 1e-10), 0);
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let m = Mat::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
        let k = null_space(&m, 1e-10);
        assert_eq!(k.ncols(), 2);
        assert!((&m * &k).norm() < 1e-12);
        assert_relative_eq!((k.transpose() * &k), Mat::identity(2, 2), epsilon = 1e-12);
    }

    #[test]
    fn lstsq_is_min_norm() {
        let m = Mat::from_row_slice(1, 2, &[1.0, 1.0]);
        let x = lstsq(&m, &dvec(&[2.0]), 1e-10);
        assert_relative_eq!(x, dvec(&[1.0, 1.0]), epsilon = 1e-12);
    }

    #[test]
    fn normalized_power_keeps_kernel() {
        // nilpotent Jordan block: N^2 = 0, N has a 1-D kernel
        let n = Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(rank(&normalized_power(&n, 1), 1e-10), 1);
        assert_eq!(rank(&normalized_power(&n, 2), 1e-10), 0);
        let big = Mat::from_row_slice(2, 2, &[1e3, 1.0, 0.0, 2e3]);
        let p = normalized_power(&big, 9);
        assert!((p.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn column_space_trims_external_scale() {
        let m = Mat::from_row_slice(2, 1, &[1e-14, 0.0]);
        assert_eq!(column_space(&m, 1e-10, 1.0).ncols(), 0);
        assert_eq!(orthonormal_columns(&m, 1e-10).ncols(), 1);
    }
}
