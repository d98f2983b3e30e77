use nalgebra::DMatrix;

use super::algebra::LieAlgebraBasis;
use super::involution::Involution;
use super::pair::{decompose, PairwiseSymmetricAlgebra};
use crate::error::Result;
use crate::linalg::{block_diag, complex_structure};

/// How the ambient space is complexified for the twist.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Complexification {
    /// The ambient already carries a complex structure compatible with u, tau, sigma.
    Intrinsic,
    /// X -> diag(X, X) inside gl(2N, R) with i = [[0, -I], [I, 0]].
    Doubled,
}

fn intrinsic_ok(pair: &PairwiseSymmetricAlgebra) -> Option<DMatrix<f64>> {
    let j = pair.algebra.complex_structure.clone()?;
    for inv in [&pair.tau, &pair.sigma] {
        if matches!(inv, Involution::BasisSigns(_)) {
            return None;
        }
    }
    for b in &pair.algebra.basis {
        if (&j * b - b * &j).norm() > 1e-12 {
            return None;
        }
        let jb = &j * b;
        for inv in [&pair.tau, &pair.sigma] {
            let lhs = inv.apply(&pair.algebra, &jb);
            let rhs = &j * inv.apply(&pair.algebra, b);
            if (lhs - rhs).norm() > 1e-10 {
                return None;
            }
        }
    }
    Some(j)
}

/// The fixed algebra of rho∘tau∘sigma in the complexification,
/// u^{++} + u^{--} + i (u^{+-} + u^{-+}), with tau and sigma restricted.
pub fn twist(pair: &PairwiseSymmetricAlgebra) -> Result<(PairwiseSymmetricAlgebra, Complexification)> {
    let (embed, j, mode): (Box<dyn Fn(&DMatrix<f64>) -> DMatrix<f64>>, DMatrix<f64>, Complexification) =
        match intrinsic_ok(pair) {
            Some(j) => (Box::new(|x: &DMatrix<f64>| x.clone()), j, Complexification::Intrinsic),
            None => {
                let n = pair.algebra.ambient_dim;
                (Box::new(|x: &DMatrix<f64>| block_diag(&[x, x])), complex_structure(n), Complexification::Doubled)
            }
        };
    let mut basis = Vec::new();
    let mut tau_s = Vec::new();
    let mut sigma_s = Vec::new();
    // (block index, tau sign, sigma sign, multiply by i)
    for (blk, t, s, times_i) in [(0, 1.0, 1.0, false), (3, -1.0, -1.0, false), (1, 1.0, -1.0, true), (2, -1.0, 1.0, true)] {
        for b in &pair.blocks[blk].basis {
            let e = embed(b);
            basis.push(if times_i { &j * e } else { e });
            tau_s.push(t);
            sigma_s.push(s);
        }
    }
    let alg = LieAlgebraBasis::new(&format!("{}~", pair.algebra.name), basis, None)?;
    let twisted = decompose(&alg, Involution::BasisSigns(tau_s), Involution::BasisSigns(sigma_s))?;
    Ok((twisted, mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::catalog::{build_algebra, Family};
    use crate::linalg::signature;

    #[test]
    fn twist_of_sphere_pair_is_noncompact() {
        let a = build_algebra(Family::So, 4).unwrap();
        let pair = decompose(
            &a,
            Involution::conjugation(signature(3, 1)).unwrap(),
            Involution::conjugation(signature(2, 2)).unwrap(),
        )
        .unwrap();
        let (tw, mode) = twist(&pair).unwrap();
        assert_eq!(mode, Complexification::Doubled);
        assert_eq!(tw.algebra.dim(), 6);
        assert!(!tw.compact);
        assert_eq!(tw.p_prime().dim(), pair.p_prime().dim());
    }
}
