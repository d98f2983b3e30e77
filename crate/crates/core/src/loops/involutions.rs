use nalgebra::DMatrix;

use super::laurent::{LaurentLoop, Scalar};
use crate::lie::{Involution, PairwiseSymmetricAlgebra};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoopInvolution {
    /// (rho X)(lambda) = conj X(conj lambda).
    Rho,
    /// (sigma X)(lambda) = sigma X(-lambda).
    Sigma,
    /// (tau X)(lambda) = tau X(-1/lambda).
    Tau,
    /// (rho2 X)(lambda) = conj X(1/conj lambda).
    Rho2,
    /// (rho~ X)(lambda) = conj tau sigma X(conj lambda).
    RhoTilde,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reality {
    Rho,
    Rho2,
    RhoTilde,
}

fn apply_map<T: Scalar>(inv: &Involution, pair: &PairwiseSymmetricAlgebra, x: &DMatrix<T>) -> DMatrix<T> {
    let z = x.map(|v| v.to_c64());
    inv.apply_complex(&pair.algebra, &z).map(T::from_c64)
}

fn sign(i: i32) -> f64 {
    if i.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn apply_involution<T: Scalar>(
    x: &LaurentLoop<T>,
    which: LoopInvolution,
    pair: &PairwiseSymmetricAlgebra,
) -> LaurentLoop<T> {
    let reflect = |f: &dyn Fn(i32, &DMatrix<T>) -> DMatrix<T>| {
        let (a, b) = x.window();
        let coeffs: Vec<DMatrix<T>> = (-b..=-a).map(|j| f(j, x.coeff_ref(-j).unwrap())).collect();
        LaurentLoop { low: -b, coeffs, trunc_bound: x.trunc_bound, annulus: (1.0 / x.annulus.1, 1.0 / x.annulus.0) }
    };
    match which {
        LoopInvolution::Rho => x.map_coeffs(|_, c| c.map(|v| v.conjugate())),
        LoopInvolution::Sigma => x.map_coeffs(|i, c| apply_map(&pair.sigma, pair, c) * T::from_real(sign(i))),
        LoopInvolution::Tau => reflect(&|j, c| apply_map(&pair.tau, pair, c) * T::from_real(sign(j))),
        LoopInvolution::Rho2 => reflect(&|_, c| c.map(|v| v.conjugate())),
        LoopInvolution::RhoTilde => x.map_coeffs(|_, c| {
            let ts = apply_map(&pair.tau, pair, &apply_map(&pair.sigma, pair, c));
            ts.map(|v| v.conjugate())
        }),
    }
}

/// Residual of fixedness under tau, sigma and the chosen reality condition.
pub fn fixedness_residual<T: Scalar>(
    x: &LaurentLoop<T>,
    pair: &PairwiseSymmetricAlgebra,
    reality: Reality,
) -> f64 {
    let real = match reality {
        Reality::Rho => LoopInvolution::Rho,
        Reality::Rho2 => LoopInvolution::Rho2,
        Reality::RhoTilde => LoopInvolution::RhoTilde,
    };
    [LoopInvolution::Tau, LoopInvolution::Sigma, real]
        .into_iter()
        .map(|w| apply_involution(x, w, pair).max_coeff_diff(x))
        .fold(0.0, f64::max)
}

pub const H_TOL: f64 = 1e-9;

/// Membership in the three-involution fixed subgroup, with its residual.
pub fn is_in_h<T: Scalar>(x: &LaurentLoop<T>, pair: &PairwiseSymmetricAlgebra, reality: Reality) -> (bool, f64) {
    let r = fixedness_residual(x, pair, reality);
    (r <= H_TOL, r)
}
