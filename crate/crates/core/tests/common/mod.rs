#![allow(dead_code)]

use loopflat::lie::{PairwiseSymmetricAlgebra, Subspace};
use loopflat::loops::LaurentLoop;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gaussian_in<R: Rng>(s: &Subspace, rng: &mut R) -> DMatrix<f64> {
    let n = s.basis[0].nrows();
    let mut x = DMatrix::zeros(n, n);
    for b in &s.basis {
        x += b * rng.sample::<f64, _>(StandardNormal);
    }
    x
}

/// exp(sum_{|k| <= 2} lambda^k X_k) with sum |X_k| = `size`. With `twisted`
/// the coefficients alternate between u_+ (even k) and u_- (odd k), so the
/// loop lies in the sigma-fixed subgroup.
pub fn random_loop<R: Rng>(pair: &PairwiseSymmetricAlgebra, size: f64, twisted: bool, rng: &mut R) -> LaurentLoop<f64> {
    let all = Subspace::new(&pair.algebra.basis);
    let mut coeffs: Vec<DMatrix<f64>> = (-2..=2)
        .map(|k: i32| {
            let s = match (twisted, k.rem_euclid(2)) {
                (false, _) => &all,
                (true, 0) => &pair.u_plus,
                (true, _) => &pair.u_minus,
            };
            gaussian_in(s, rng)
        })
        .collect();
    let total: f64 = coeffs.iter().map(|c| c.norm()).sum();
    for c in &mut coeffs {
        *c *= size / total;
    }
    LaurentLoop::new(-2, coeffs).exp(40)
}
