//! Birkhoff splitting x = x⁺ x⁻ of truncated loops with x⁺(0) = I.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lie::PairwiseSymmetricAlgebra;
use crate::loops::involutions::{apply_involution, LoopInvolution};
use crate::loops::laurent::{sample_lambdas, LaurentLoop, Scalar};

#[derive(Clone, Debug)]
pub struct BirkhoffOptions {
    pub degree: usize,
    pub max_degree: usize,
    pub tol: f64,
    pub cond_max: f64,
}

impl Default for BirkhoffOptions {
    fn default() -> Self {
        BirkhoffOptions { degree: 12, max_degree: 40, tol: 1e-10, cond_max: 1e12 }
    }
}

#[derive(Clone, Debug)]
pub struct BirkhoffFactors<T: Scalar> {
    pub plus: LaurentLoop<T>,
    pub minus: LaurentLoop<T>,
    /// Largest recomposition error over the residual sample set.
    pub residual: f64,
    pub degree: usize,
    /// 1-norm condition number of the Toeplitz system.
    pub condition: f64,
}

/// 16 points on the unit circle and four real radii.
pub fn residual_lambdas() -> Vec<crate::linalg::C64> {
    sample_lambdas(16, &[0.5, 0.8, 1.25, 2.0])
}

fn norm1<T: Scalar>(m: &DMatrix<T>) -> f64 {
    (0..m.ncols()).map(|j| m.column(j).iter().map(|v| v.modulus()).sum::<f64>()).fold(0.0, f64::max)
}

fn factorize_at<T: Scalar>(x: &LaurentLoop<T>, d: usize, cond_max: f64) -> Result<BirkhoffFactors<T>> {
    let n = x.size();
    let dn = d * n;
    let mut t = DMatrix::<T>::zeros(dn, dn);
    let mut rhs = DMatrix::<T>::zeros(dn, n);
    for m in 1..=d {
        for k in 1..=d {
            if let Some(c) = x.coeff_ref(k as i32 - m as i32) {
                t.view_mut(((m - 1) * n, (k - 1) * n), (n, n)).copy_from(c);
            }
        }
        if let Some(c) = x.coeff_ref(-(m as i32)) {
            rhs.view_mut(((m - 1) * n, 0), (n, n)).copy_from(&(-c));
        }
    }
    let inv = t
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::OutsideBigCell("singular Toeplitz system".into()))?;
    let condition = norm1(&t) * norm1(&inv);
    if !condition.is_finite() || condition > cond_max {
        return Err(Error::OutsideBigCell(format!("Toeplitz condition {condition:.3e}")));
    }
    let sol = inv * rhs;
    // y = I + sum_k Y_k lambda^{-k}
    let mut ycoeffs: Vec<DMatrix<T>> = (1..=d).rev().map(|k| sol.view(((k - 1) * n, 0), (n, n)).into_owned()).collect();
    ycoeffs.push(DMatrix::identity(n, n));
    let y = LaurentLoop { low: -(d as i32), coeffs: ycoeffs, trunc_bound: 0.0, annulus: x.annulus };
    let xy = x.mul(&y);
    let p = xy.coeff(0);
    let p_inv = p.clone().try_inverse().ok_or_else(|| Error::OutsideBigCell("singular normalization".into()))?;
    let mut plus = xy.truncate(0, xy.high().max(0)).mul_const(&p_inv);
    plus.coeffs[0] = DMatrix::identity(n, n);
    plus.trunc_bound = 0.0;
    // z = y^{-1} by Neumann recursion, then minus = P z
    let ycoef = |k: usize| sol.view(((k - 1) * n, 0), (n, n)).into_owned();
    let mut z: Vec<DMatrix<T>> = vec![DMatrix::identity(n, n)];
    for m in 1..=d {
        let mut acc = DMatrix::<T>::zeros(n, n);
        for k in 1..=m {
            acc -= ycoef(k) * &z[m - k];
        }
        z.push(acc);
    }
    let minus_coeffs: Vec<DMatrix<T>> = z.iter().rev().map(|zm| &p * zm).collect();
    let minus = LaurentLoop { low: -(d as i32), coeffs: minus_coeffs, trunc_bound: 0.0, annulus: x.annulus };
    let residual = residual_lambdas()
        .into_iter()
        .map(|lam| (plus.evaluate(lam) * minus.evaluate(lam) - x.evaluate(lam)).norm())
        .fold(0.0, f64::max);
    if !residual.is_finite() {
        return Err(Error::OutsideBigCell("non-finite factors".into()));
    }
    Ok(BirkhoffFactors { plus, minus, residual, degree: d, condition })
}

/// Factorize with degree retries d, d+4, ... up to `max_degree`.
pub fn factorize<T: Scalar>(x: &LaurentLoop<T>, opts: &BirkhoffOptions) -> Result<BirkhoffFactors<T>> {
    let mut d = opts.degree.max(1);
    loop {
        let f = factorize_at(x, d, opts.cond_max)?;
        if f.residual <= opts.tol {
            return Ok(f);
        }
        if d + 4 > opts.max_degree {
            return Err(Error::Truncation { residual: f.residual, degree: d });
        }
        d += 4;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FixedSet {
    RhoSigma,
    RhoTildeSigma,
}

impl FixedSet {
    fn involutions(self) -> [LoopInvolution; 2] {
        match self {
            FixedSet::RhoSigma => [LoopInvolution::Rho, LoopInvolution::Sigma],
            FixedSet::RhoTildeSigma => [LoopInvolution::RhoTilde, LoopInvolution::Sigma],
        }
    }
}

pub fn fixed_set_residual<T: Scalar>(x: &LaurentLoop<T>, pair: &PairwiseSymmetricAlgebra, set: FixedSet) -> f64 {
    set.involutions()
        .into_iter()
        .map(|w| apply_involution(x, w, pair).max_coeff_diff(x))
        .fold(0.0, f64::max)
}

/// Factorization of a loop in a fixed-point subgroup; returns the factors and
/// the largest fixedness defect of the two factors.
pub fn factorize_in_subgroup<T: Scalar>(
    x: &LaurentLoop<T>,
    pair: &PairwiseSymmetricAlgebra,
    set: FixedSet,
    opts: &BirkhoffOptions,
) -> Result<(BirkhoffFactors<T>, f64)> {
    let r_in = fixed_set_residual(x, pair, set);
    if r_in > 1e-9 {
        return Err(Error::Validation(format!("input loop is not in the fixed subgroup (residual {r_in:.3e})")));
    }
    let f = factorize(x, opts)?;
    let r_out = fixed_set_residual(&f.plus, pair, set).max(fixed_set_residual(&f.minus, pair, set));
    if r_out > 1e-7 {
        return Err(Error::Internal(format!("factors left the fixed subgroup (residual {r_out:.3e})")));
    }
    Ok((f, r_out))
}

/// Ratio |factors(x + eps dx) - factors(x)| / (eps |dx|), factor distance
/// measured on coefficients.
pub fn lipschitz_probe<T: Scalar>(
    x: &LaurentLoop<T>,
    dx: &LaurentLoop<T>,
    eps: f64,
    opts: &BirkhoffOptions,
) -> Result<f64> {
    let f0 = factorize(x, opts)?;
    let f1 = factorize(&x.add(&dx.scale(T::from_real(eps))), opts)?;
    let num = f0.plus.max_coeff_diff(&f1.plus).max(f0.minus.max_coeff_diff(&f1.minus));
    let den = eps * dx.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::unit;

    #[test]
    fn identity_splits_trivially() {
        let f = factorize(&LaurentLoop::<f64>::identity(3), &BirkhoffOptions::default()).unwrap();
        assert_eq!(f.residual, 0.0);
        assert!((f.plus.evaluate_scalar(0.7) - DMatrix::identity(3, 3)).norm() == 0.0);
        assert!((f.minus.evaluate_scalar(0.7) - DMatrix::identity(3, 3)).norm() == 0.0);
    }

    #[test]
    fn nilpotent_minus_loop() {
        let a = unit(3, 2, 0) * 0.7;
        let x = LaurentLoop::new(-1, vec![a.clone(), DMatrix::identity(3, 3)]);
        let f = factorize(&x, &BirkhoffOptions::default()).unwrap();
        assert!(f.plus.max_coeff_diff(&LaurentLoop::identity(3)) < 1e-15);
        assert!(f.minus.max_coeff_diff(&x) < 1e-15);
    }

    #[test]
    fn constant_loop_goes_to_minus() {
        let g = DMatrix::from_row_slice(2, 2, &[0.6, -0.8, 0.8, 0.6]);
        let f = factorize(&LaurentLoop::constant(g.clone()), &BirkhoffOptions::default()).unwrap();
        assert!(f.plus.max_coeff_diff(&LaurentLoop::identity(2)) < 1e-15);
        assert!((f.minus.coeff(0) - g).norm() < 1e-15);
        assert_eq!(f.residual, 0.0);
    }
}
