use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::pair::Subspace;
use crate::error::{Error, Result};
use crate::linalg::{commutator, null_space, stack};

const DRAWS: usize = 5;
const ROUNDS: usize = 4;

pub fn random_element<R: Rng + ?Sized>(sub: &Subspace, rng: &mut R) -> DMatrix<f64> {
    let c = DVector::from_fn(sub.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
    let x = sub.element(&c);
    let n = x.norm();
    if n > 0.0 {
        x / n
    } else {
        x
    }
}

/// Orthonormal coordinates (columns) of {y in sub : [x, y] = 0}.
pub fn centralizer_coords(sub: &Subspace, x: &DMatrix<f64>) -> DMatrix<f64> {
    let images: Vec<DMatrix<f64>> = sub.basis.iter().map(|e| commutator(x, e)).collect();
    let m = stack(&images);
    if m.amax() <= 1e-14 {
        return DMatrix::identity(sub.dim(), sub.dim());
    }
    null_space(&m, 1e-8)
}

pub fn centralizer_dim(sub: &Subspace, x: &DMatrix<f64>) -> usize {
    centralizer_coords(sub, x).ncols()
}

/// Dimension of a maximal abelian subspace of `u_minus`, by majority vote of
/// centralizer dimensions of random elements.
pub fn rank_of<R: Rng + ?Sized>(u_minus: &Subspace, rng: &mut R) -> Result<usize> {
    if u_minus.dim() == 0 {
        return Err(Error::Parameter("rank requested for a zero (-1)-eigenspace".into()));
    }
    for _ in 0..ROUNDS {
        let mut counts = std::collections::BTreeMap::new();
        for _ in 0..DRAWS {
            let x = random_element(u_minus, rng);
            *counts.entry(centralizer_dim(u_minus, &x)).or_insert(0usize) += 1;
        }
        if let Some((&dim, &n)) = counts.iter().max_by_key(|(_, &n)| n) {
            if 2 * n > DRAWS {
                return Ok(dim);
            }
        }
    }
    Err(Error::Degenerate("centralizer dimensions disagree across random draws".into()))
}

/// Largest pairwise commutator norm in a list.
pub fn commutation_residual(mats: &[DMatrix<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..mats.len() {
        for j in (i + 1)..mats.len() {
            worst = worst.max(commutator(&mats[i], &mats[j]).norm());
        }
    }
    worst
}

/// Centralizer of a random regular element: a maximal abelian subspace.
pub fn maximal_abelian_in<R: Rng + ?Sized>(sub: &Subspace, rng: &mut R) -> Result<Subspace> {
    let rank = rank_of(sub, rng)?;
    for _ in 0..10 {
        let x = random_element(sub, rng);
        let kern = centralizer_coords(sub, &x);
        if kern.ncols() != rank {
            continue;
        }
        let mats: Vec<DMatrix<f64>> = (0..rank).map(|j| sub.element(&kern.column(j).into_owned())).collect();
        let cand = Subspace::new(&mats);
        if cand.dim() == rank && commutation_residual(&cand.basis) <= 1e-10 {
            return Ok(cand);
        }
    }
    Err(Error::SearchFailure(format!("no abelian centralizer of dimension {rank} found")))
}

/// An element is regular when its centralizer in `sub` has dimension `rank`.
pub fn is_regular(sub: &Subspace, x: &DMatrix<f64>, rank: usize) -> bool {
    centralizer_dim(sub, x) == rank
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::catalog::{build_algebra, Family};
    use crate::lie::involution::Involution;
    use crate::lie::pair::decompose;
    use crate::linalg::signature;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn so5_rank_and_flat() {
        let a = build_algebra(Family::So, 5).unwrap();
        let pair = decompose(&a, Involution::Identity, Involution::conjugation(signature(2, 3)).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(rank_of(&pair.u_minus, &mut rng).unwrap(), 2);
        let m = maximal_abelian_in(&pair.u_minus, &mut rng).unwrap();
        assert_eq!(m.dim(), 2);
        assert!(commutation_residual(&m.basis) < 1e-10);
        for b in &m.basis {
            assert!(pair.u_minus.residual(b) < 1e-10);
        }
    }

    #[test]
    fn line_is_its_own_flat() {
        let a = build_algebra(Family::So, 3).unwrap();
        let line = Subspace::new(&[a.basis[0].clone()]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = maximal_abelian_in(&line, &mut rng).unwrap();
        assert_eq!(m.dim(), 1);
        assert!((m.basis[0].abs() - a.basis[0].abs()).norm() < 1e-12);
    }

    #[test]
    fn zero_space_has_no_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(rank_of(&Subspace::default(), &mut rng).is_err());
    }
}
