use nalgebra::{DMatrix, DVector};

use super::algebra::LieAlgebraBasis;
use super::involution::Involution;
use crate::error::{Error, Result};
use crate::linalg::{column_space, commutator, frob_inner, orthonormalize_matrices};

/// A subspace of ambient matrices with a Frobenius-orthonormal basis.
#[derive(Clone, Debug, Default)]
pub struct Subspace {
    pub basis: Vec<DMatrix<f64>>,
}

impl Subspace {
    pub fn new(mats: &[DMatrix<f64>]) -> Self {
        Subspace { basis: orthonormalize_matrices(mats, 1e-10) }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn coords(&self, x: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.basis.iter().map(|b| frob_inner(b, x)))
    }

    pub fn element(&self, c: &DVector<f64>) -> DMatrix<f64> {
        let n = self.basis.first().map_or(0, |b| b.nrows());
        let mut out = DMatrix::zeros(n, n);
        for (b, &ci) in self.basis.iter().zip(c.iter()) {
            out += b * ci;
        }
        out
    }

    pub fn project(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        if self.basis.is_empty() {
            return DMatrix::zeros(x.nrows(), x.ncols());
        }
        self.element(&self.coords(x))
    }

    /// Distance from x to the subspace.
    pub fn residual(&self, x: &DMatrix<f64>) -> f64 {
        (x - self.project(x)).norm()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    PlusPlus = 0,
    PlusMinus = 1,
    MinusPlus = 2,
    MinusMinus = 3,
}

/// (u, tau, sigma) with the simultaneous eigenspace splitting. Superscripts
/// are (tau sign, sigma sign): u^{++} = k', u^{--} = p'.
#[derive(Clone, Debug)]
pub struct PairwiseSymmetricAlgebra {
    pub algebra: LieAlgebraBasis,
    pub tau: Involution,
    pub sigma: Involution,
    /// Coordinate projectors onto u^{++}, u^{+-}, u^{-+}, u^{--}.
    pub projectors: [DMatrix<f64>; 4],
    pub blocks: [Subspace; 4],
    pub k: Subspace,
    pub p: Subspace,
    pub u_plus: Subspace,
    pub u_minus: Subspace,
    /// -Killing positive definite.
    pub compact: bool,
}

fn subspace_from_projector(alg: &LieAlgebraBasis, proj: &DMatrix<f64>) -> Subspace {
    let cols = column_space(proj, 1e-8);
    let mats: Vec<DMatrix<f64>> = (0..cols.ncols()).map(|j| alg.element(&cols.column(j).into_owned())).collect();
    Subspace::new(&mats)
}

pub fn decompose(alg: &LieAlgebraBasis, tau: Involution, sigma: Involution) -> Result<PairwiseSymmetricAlgebra> {
    tau.validate(alg, "tau")?;
    sigma.validate(alg, "sigma")?;
    let t = tau.coordinate_matrix(alg);
    let s = sigma.coordinate_matrix(alg);
    let comm = (&t * &s - &s * &t).norm();
    if comm > 1e-10 {
        return Err(Error::Validation(format!("tau∘sigma != sigma∘tau (residual {comm:.3e})")));
    }
    let d = alg.dim();
    let id = DMatrix::<f64>::identity(d, d);
    let half = |m: &DMatrix<f64>, sign: f64| (&id + m * sign) * 0.5;
    let projectors = [
        half(&t, 1.0) * half(&s, 1.0),
        half(&t, 1.0) * half(&s, -1.0),
        half(&t, -1.0) * half(&s, 1.0),
        half(&t, -1.0) * half(&s, -1.0),
    ];
    let blocks = [
        subspace_from_projector(alg, &projectors[0]),
        subspace_from_projector(alg, &projectors[1]),
        subspace_from_projector(alg, &projectors[2]),
        subspace_from_projector(alg, &projectors[3]),
    ];
    let total: usize = blocks.iter().map(Subspace::dim).sum();
    if total != d {
        return Err(Error::Validation(format!("eigenspace dimensions sum to {total}, expected {d}")));
    }
    let join = |a: usize, b: usize| {
        let mut m = blocks[a].basis.clone();
        m.extend(blocks[b].basis.iter().cloned());
        Subspace::new(&m)
    };
    let k = join(0, 1);
    let p = join(2, 3);
    let u_plus = join(0, 2);
    let u_minus = join(1, 3);
    let neg_killing_min = (-&alg.killing).symmetric_eigen().eigenvalues.min();
    Ok(PairwiseSymmetricAlgebra {
        algebra: alg.clone(),
        tau,
        sigma,
        projectors,
        blocks,
        k,
        p,
        u_plus,
        u_minus,
        compact: neg_killing_min > 1e-8,
    })
}

impl PairwiseSymmetricAlgebra {
    pub fn block(&self, b: Block) -> &Subspace {
        &self.blocks[b as usize]
    }

    pub fn k_prime(&self) -> &Subspace {
        self.block(Block::PlusPlus)
    }

    pub fn p_prime(&self) -> &Subspace {
        self.block(Block::MinusMinus)
    }

    /// Projection of an algebra element onto one of the four blocks.
    pub fn project(&self, b: Block, x: &DMatrix<f64>) -> DMatrix<f64> {
        let (c, _) = self.algebra.coords_with_residual(x);
        self.algebra.element(&(&self.projectors[b as usize] * c))
    }

    /// Largest |Pi_a^T K Pi_b| over a != b.
    pub fn projector_killing_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    let m = self.projectors[a].transpose() * &self.algebra.killing * &self.projectors[b];
                    worst = worst.max(m.amax());
                }
            }
        }
        worst
    }

    /// Residuals of [k',p'] ⊆ p', [[p',p'],p'] ⊆ p', [k∩u_-, p'] ⊆ p ∩ u_+.
    pub fn bracket_relation_residuals(&self) -> [f64; 3] {
        let kp = self.k_prime();
        let pp = self.p_prime();
        let km = self.block(Block::PlusMinus);
        let perp = self.block(Block::MinusPlus);
        let mut r = [0.0f64; 3];
        for a in &pp.basis {
            for b in &kp.basis {
                r[0] = r[0].max(pp.residual(&commutator(b, a)));
            }
            for b in &pp.basis {
                let ab = commutator(a, b);
                for c in &pp.basis {
                    r[1] = r[1].max(pp.residual(&commutator(&ab, c)));
                }
            }
            for b in &km.basis {
                r[2] = r[2].max(perp.residual(&commutator(b, a)));
            }
        }
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::catalog::{build_algebra, Family};
    use crate::linalg::signature;

    fn sphere_pair(n: usize, k: usize) -> PairwiseSymmetricAlgebra {
        let a = build_algebra(Family::So, n + 1).unwrap();
        let tau = Involution::conjugation(signature(n, 1)).unwrap();
        let sigma = Involution::conjugation(signature(k, n + 1 - k)).unwrap();
        decompose(&a, tau, sigma).unwrap()
    }

    #[test]
    fn sphere_p_prime_is_corner_block() {
        let pair = sphere_pair(4, 2);
        assert_eq!(pair.p_prime().dim(), 2);
        for b in &pair.p_prime().basis {
            for i in 0..5 {
                for j in 0..5 {
                    let corner = (i < 2 && j == 4) || (j < 2 && i == 4);
                    if !corner {
                        assert!(b[(i, j)].abs() < 1e-12);
                    }
                }
            }
        }
        let sum = pair.projectors.iter().fold(DMatrix::zeros(10, 10), |acc, p| acc + p);
        assert!((sum - DMatrix::identity(10, 10)).norm() < 1e-12);
        assert!(pair.projector_killing_defect() < 1e-10);
        for r in pair.bracket_relation_residuals() {
            assert!(r < 1e-10);
        }
        assert!(pair.compact);
    }

    #[test]
    fn identity_sigma_gives_empty_minus() {
        let a = build_algebra(Family::So, 4).unwrap();
        let pair = decompose(&a, Involution::conjugation(signature(3, 1)).unwrap(), Involution::Identity).unwrap();
        assert_eq!(pair.u_minus.dim(), 0);
        assert_eq!(pair.p_prime().dim(), 0);
    }

    #[test]
    fn noncommuting_pair_rejected() {
        let a = build_algebra(Family::So, 3).unwrap();
        let tau = Involution::conjugation(signature(2, 1)).unwrap();
        let (c, s) = (0.5f64.sqrt() * 1.2, 0.4);
        let n = (c * c + s * s).sqrt();
        let (c, s) = (c / n, s / n);
        let r = DMatrix::from_row_slice(3, 3, &[c, 0.0, -s, 0.0, 1.0, 0.0, s, 0.0, c]);
        let p = &r * signature(1, 2) * r.transpose();
        let sigma = Involution::conjugation(p).unwrap();
        match decompose(&a, tau, sigma) {
            Err(Error::Validation(msg)) => assert!(msg.contains("tau∘sigma")),
            other => panic!("expected validation error, got {other:?}"),
        }
    }
}
