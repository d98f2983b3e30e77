//! Dense helpers shared by the algebra, loop and geometry code.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

pub fn commutator(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * b - b * a
}

pub fn frob_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

pub fn flatten(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

pub fn unflatten(v: &DVector<f64>, n: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(n, n, v.as_slice())
}

/// Stack matrices as columns of flattened entries.
pub fn stack(mats: &[DMatrix<f64>]) -> DMatrix<f64> {
    let len = mats.first().map_or(0, |m| m.len());
    let mut out = DMatrix::zeros(len, mats.len());
    for (j, m) in mats.iter().enumerate() {
        out.column_mut(j).copy_from_slice(m.as_slice());
    }
    out
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above `rel_tol * s_max` (zero for a zero matrix).
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = singular_values(m);
    let smax = s.first().copied().unwrap_or(0.0);
    if smax <= f64::MIN_POSITIVE {
        return 0;
    }
    s.iter().filter(|&&x| x > rel_tol * smax).count()
}

/// Thin SVD with singular values in descending order.
pub fn svd_sorted(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let svd = m.clone().svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let rec = &u * DMatrix::from_diagonal(&svd.singular_values) * &vt;
    // nalgebra occasionally returns a factorization that does not reproduce m
    if (rec - m).norm() > 1e-11 * m.norm().max(1.0) {
        return jacobi_svd(m);
    }
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let s: Vec<f64> = idx.iter().map(|&i| svd.singular_values[i]).collect();
    let u_sorted = DMatrix::from_fn(u.nrows(), idx.len(), |r, c| u[(r, idx[c])]);
    let v_sorted = DMatrix::from_fn(vt.ncols(), idx.len(), |r, c| vt[(idx[c], r)]);
    (u_sorted, s, v_sorted)
}

/// One-sided Jacobi SVD, thin, sorted descending.
fn jacobi_svd(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let transposed = m.nrows() < m.ncols();
    let mut a = if transposed { m.transpose() } else { m.clone() };
    let n = a.ncols();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut a, &mut v] {
                    for r in 0..mat.nrows() {
                        let x = mat[(r, p)];
                        let y = mat[(r, q)];
                        mat[(r, p)] = c * x - s * y;
                        mat[(r, q)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| a.column(j).norm()).collect();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let s: Vec<f64> = idx.iter().map(|&i| norms[i]).collect();
    let mut u = DMatrix::zeros(a.nrows(), n);
    for (c, &i) in idx.iter().enumerate() {
        if norms[i] > 0.0 {
            u.set_column(c, &(a.column(i) / norms[i]));
        }
    }
    // fill columns for zero singular values with an orthonormal completion
    let mut filled: Vec<DVector<f64>> = Vec::new();
    for c in 0..n {
        if s[c] > 0.0 {
            filled.push(u.column(c).into_owned());
            continue;
        }
        for e in 0..a.nrows() {
            let mut w = DVector::<f64>::zeros(a.nrows());
            w[e] = 1.0;
            for f in &filled {
                let d = f.dot(&w);
                w -= f * d;
            }
            for f in &filled {
                let d = f.dot(&w);
                w -= f * d;
            }
            let nw = w.norm();
            if nw > 1e-6 {
                let w = w / nw;
                u.set_column(c, &w);
                filled.push(w);
                break;
            }
        }
    }
    let vs = DMatrix::from_fn(n, n, |r, c| v[(r, idx[c])]);
    if transposed {
        (vs, s, u)
    } else {
        (u, s, vs)
    }
}

/// Orthonormal basis (as columns) of the column space, cut at `rel_tol * s_max`.
pub fn column_space(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let (u, s, _) = svd_sorted(m);
    let smax = s.first().copied().unwrap_or(0.0);
    let keep = if smax <= f64::MIN_POSITIVE { 0 } else { s.iter().filter(|&&x| x > rel_tol * smax).count() };
    u.columns(0, keep).into_owned()
}

/// Orthonormal basis (as columns) of the kernel, cut at `rel_tol * s_max`.
pub fn null_space(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = m.ncols();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    // pad so the decomposition returns a full right basis
    let padded = if m.nrows() < n {
        let mut p = DMatrix::zeros(n, n);
        p.rows_mut(0, m.nrows()).copy_from(m);
        p
    } else {
        m.clone()
    };
    let (_, s, v) = svd_sorted(&padded);
    let smax = s.first().copied().unwrap_or(0.0);
    let rank = if smax <= f64::MIN_POSITIVE { 0 } else { s.iter().filter(|&&x| x > rel_tol * smax).count() };
    v.columns(rank, n - rank).into_owned()
}

/// Kernel basis from reduced row echelon form; one vector per free column,
/// in increasing free-column order. Returns the basis and the free columns.
pub fn rref_null_space(m: &DMatrix<f64>, tol: f64) -> (Vec<DVector<f64>>, Vec<usize>) {
    let mut a = m.clone();
    let (rows, cols) = a.shape();
    let scale = a.amax().max(1.0);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (mut best, mut best_val) = (r, 0.0);
        for i in r..rows {
            if a[(i, c)].abs() > best_val {
                best = i;
                best_val = a[(i, c)].abs();
            }
        }
        if best_val <= tol * scale {
            continue;
        }
        a.swap_rows(r, best);
        let p = a[(r, c)];
        for j in 0..cols {
            a[(r, j)] /= p;
        }
        for i in 0..rows {
            if i != r {
                let f = a[(i, c)];
                if f != 0.0 {
                    for j in 0..cols {
                        a[(i, j)] -= f * a[(r, j)];
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    let basis = free
        .iter()
        .map(|&f| {
            let mut v = DVector::zeros(cols);
            v[f] = 1.0;
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = -a[(row, f)];
            }
            v
        })
        .collect();
    (basis, free)
}

/// Modified Gram-Schmidt with a second pass; drops vectors whose residual
/// falls below `tol` relative to their original norm.
pub fn gram_schmidt(vecs: &[DVector<f64>], tol: f64) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    for v in vecs {
        let n0 = v.norm();
        if n0 == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        let n = w.norm();
        if n > tol * n0 {
            out.push(w / n);
        }
    }
    out
}

/// Frobenius-orthonormalize a list of square matrices, order preserving.
pub fn orthonormalize_matrices(mats: &[DMatrix<f64>], tol: f64) -> Vec<DMatrix<f64>> {
    let Some(first) = mats.first() else { return Vec::new() };
    let n = first.nrows();
    let vecs: Vec<DVector<f64>> = mats.iter().map(flatten).collect();
    gram_schmidt(&vecs, tol).iter().map(|v| unflatten(v, n)).collect()
}

/// Principal square root by the Denman-Beavers iteration.
pub fn sqrtm(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let mut y = m.clone();
    let mut z = DMatrix::<f64>::identity(n, n);
    for _ in 0..100 {
        let yi = y.clone().try_inverse().ok_or_else(|| Error::Degenerate("sqrtm: singular iterate".into()))?;
        let zi = z.clone().try_inverse().ok_or_else(|| Error::Degenerate("sqrtm: singular iterate".into()))?;
        let y_next = (&y + zi) * 0.5;
        let z_next = (&z + yi) * 0.5;
        let delta = (&y_next - &y).norm();
        y = y_next;
        z = z_next;
        if delta <= 1e-15 * y.norm().max(1.0) {
            return Ok(y);
        }
    }
    let resid = (&y * &y - m).norm();
    if resid <= 1e-12 * m.norm().max(1.0) {
        Ok(y)
    } else {
        Err(Error::Degenerate(format!("sqrtm did not converge (residual {resid:.3e})")))
    }
}

/// Real 2n x 2n form of a complex n x n matrix: A + iB -> [[A, -B], [B, A]].
pub fn realify(z: &DMatrix<C64>) -> DMatrix<f64> {
    let n = z.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let c = z[(i, j)];
            out[(i, j)] = c.re;
            out[(i + n, j + n)] = c.re;
            out[(i, j + n)] = -c.im;
            out[(i + n, j)] = c.im;
        }
    }
    out
}

/// Inverse of [`realify`] reading the left column blocks.
pub fn complexify(r: &DMatrix<f64>) -> DMatrix<C64> {
    let n = r.nrows() / 2;
    DMatrix::from_fn(n, n, |i, j| C64::new(r[(i, j)], r[(i + n, j)]))
}

/// Multiplication by i in the realified picture.
pub fn complex_structure(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i + n, i)] = 1.0;
        j[(i, i + n)] = -1.0;
    }
    j
}

pub fn block_diag(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        out.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(b);
        off += b.nrows();
    }
    out
}

pub fn diag(entries: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_column_slice(entries))
}

/// diag(I_a, -I_b).
pub fn signature(a: usize, b: usize) -> DMatrix<f64> {
    let mut v = vec![1.0; a];
    v.extend(std::iter::repeat(-1.0).take(b));
    diag(&v)
}

pub fn unit(n: usize, i: usize, j: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    m[(i, j)] = 1.0;
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn null_space_of_rank_one() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let k = null_space(&m, 1e-12);
        assert_eq!(k.ncols(), 2);
        assert!((&m * &k).norm() < 1e-14);
    }

    #[test]
    fn rref_orders_by_free_columns() {
        let m = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 0.0, 1.0, 0.0, 0.0, 1.0, 3.0]);
        let (basis, free) = rref_null_space(&m, 1e-12);
        assert_eq!(free, vec![1, 3]);
        for v in &basis {
            assert!((&m * v).norm() < 1e-14);
        }
        assert_eq!(basis[0][1], 1.0);
    }

    #[test]
    fn sqrtm_squares_back() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, -0.2, 1.5, 0.4, 0.0, 0.1, 1.2]);
        let r = sqrtm(&m).unwrap();
        assert!((&r * &r - &m).norm() < 1e-12);
    }

    #[test]
    fn realify_is_multiplicative() {
        let a = DMatrix::from_fn(3, 3, |i, j| C64::new(i as f64 - j as f64, (i * j) as f64 * 0.3));
        let b = DMatrix::from_fn(3, 3, |i, j| C64::new(0.5 * j as f64, i as f64 - 1.0));
        let lhs = realify(&(&a * &b));
        let rhs = realify(&a) * realify(&b);
        assert!((lhs - rhs).norm() < 1e-12);
        let jj = complex_structure(3);
        assert_relative_eq!((&jj * &jj + DMatrix::identity(6, 6)).norm(), 0.0);
        assert!((complexify(&realify(&a)) - a).norm() < 1e-15);
    }

    #[test]
    fn jacobi_svd_reconstructs() {
        for (r, c) in [(5, 3), (3, 5), (4, 4)] {
            let m = DMatrix::from_fn(r, c, |i, j| ((i * 7 + j * 3) as f64).sin() + if i == j { 0.5 } else { 0.0 });
            let (u, s, v) = jacobi_svd(&m);
            let rec = &u * DMatrix::from_diagonal(&DVector::from_vec(s.clone())) * v.transpose();
            assert!((rec - &m).norm() < 1e-12);
            assert!(s.windows(2).all(|w| w[0] >= w[1]));
            let k = s.len();
            assert!((u.transpose() * &u - DMatrix::identity(k, k)).norm() < 1e-12);
        }
    }

    #[test]
    fn rank_deficient_projector_column_space() {
        let p = DMatrix::from_fn(6, 6, |i, j| if i == j && i < 3 { 1.0 } else { 0.0 });
        let q = DMatrix::from_fn(6, 6, |i, j| ((i + 2 * j) as f64).cos() + if i == j { 3.0 } else { 0.0 });
        let proj = &q * p * q.try_inverse().unwrap();
        let cols = column_space(&proj, 1e-8);
        assert_eq!(cols.ncols(), 3);
        assert!((&proj * &cols - &cols).norm() < 1e-10);
    }
}
