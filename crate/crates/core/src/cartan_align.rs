//! Constructive alignment of a maximal abelian subspace of u_- to a given
//! subspace V, so that the orthogonal projection onto V is surjective.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::rank::{centralizer_dim, commutation_residual};
use crate::lie::{maximal_abelian_in, rank_of, PairwiseSymmetricAlgebra, Subspace};
use crate::linalg::{commutator, numerical_rank, singular_values, stack};

pub const SV_FLOOR: f64 = 1e-6;
const RESTARTS: usize = 5;
const RANDOM_DRAWS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignMode {
    Constructive,
    Randomized,
}

#[derive(Clone, Debug)]
pub struct AlignmentResult {
    pub cartan: Vec<DMatrix<f64>>,
    pub steps: usize,
    pub projection_rank: usize,
    /// Smallest singular value of the projection of the cartan basis onto V.
    pub smallest_singular: f64,
    pub mode: AlignMode,
    pub restarts: usize,
}

/// Trace form on u_- is definite (all eigenvalues of one sign, margin 1e-8).
pub fn minus_is_riemannian(pair: &PairwiseSymmetricAlgebra) -> bool {
    let b = &pair.u_minus.basis;
    if b.is_empty() {
        return true;
    }
    let g = DMatrix::from_fn(b.len(), b.len(), |i, j| (&b[i] * &b[j]).trace());
    let ev = g.symmetric_eigen().eigenvalues;
    ev.iter().all(|&v| v > 1e-8) || ev.iter().all(|&v| v < -1e-8)
}

fn projection_matrix(v: &Subspace, a: &[DMatrix<f64>]) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(v.dim(), a.len());
    for (j, x) in a.iter().enumerate() {
        p.set_column(j, &v.coords(x));
    }
    p
}

fn proj_rank(v: &Subspace, a: &[DMatrix<f64>]) -> (usize, f64) {
    if a.is_empty() {
        return (0, 0.0);
    }
    let s = singular_values(&projection_matrix(v, a));
    let r = s.iter().filter(|&&x| x >= SV_FLOOR).count();
    (r, s.get(r.saturating_sub(1)).copied().unwrap_or(0.0))
}

/// Reorder `a` so the first j elements project independently onto V, with
/// j = dim pi_V span(a).
fn greedy_order(v: &Subspace, a: &mut Vec<DMatrix<f64>>) -> usize {
    let mut chosen: Vec<DMatrix<f64>> = Vec::new();
    let mut rest = Vec::new();
    for x in a.drain(..) {
        let mut trial = chosen.clone();
        trial.push(x.clone());
        if proj_rank(v, &trial).0 == trial.len() {
            chosen = trial;
        } else {
            rest.push(x);
        }
    }
    let j = chosen.len();
    chosen.extend(rest);
    *a = chosen;
    j
}

fn random_rotation<R: Rng + ?Sized>(r: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(r, r, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

/// Orthonormal basis of `m` made of regular elements.
fn regular_basis<R: Rng + ?Sized>(pair: &PairwiseSymmetricAlgebra, m: &Subspace, rng: &mut R) -> Option<Vec<DMatrix<f64>>> {
    let r = m.dim();
    for _ in 0..20 {
        let q = random_rotation(r, rng);
        let a: Vec<DMatrix<f64>> = (0..r).map(|i| m.element(&q.column(i).into_owned())).collect();
        if a.iter().all(|x| centralizer_dim(&pair.u_minus, x) == r) {
            return Some(a);
        }
    }
    None
}

fn finish(v: &Subspace, a: Vec<DMatrix<f64>>, steps: usize, mode: AlignMode, restarts: usize) -> AlignmentResult {
    let (rank, _) = proj_rank(v, &a);
    let s = singular_values(&projection_matrix(v, &a));
    let smallest = s.get(v.dim().saturating_sub(1)).copied().unwrap_or(0.0);
    AlignmentResult { cartan: a, steps, projection_rank: rank, smallest_singular: smallest, mode, restarts }
}

/// Run the flow iteration from a given maximal abelian subspace.
pub fn align_from<R: Rng + ?Sized>(
    pair: &PairwiseSymmetricAlgebra,
    v: &Subspace,
    start: &Subspace,
    rng: &mut R,
) -> Result<(Vec<DMatrix<f64>>, usize)> {
    let mut a = regular_basis(pair, start, rng)
        .ok_or_else(|| Error::SearchFailure("start subspace has no regular basis".into()))?;
    let mut steps = 0;
    let mut j = greedy_order(v, &mut a);
    while j < v.dim() {
        if steps >= v.dim() {
            return Err(Error::SearchFailure("alignment exceeded its step budget".into()));
        }
        // y: unit vector of V orthogonal to pi_V(m), hence orthogonal to m
        let p = projection_matrix(v, &a[..j]);
        let y_coords = if j == 0 {
            let mut c = DVector::zeros(v.dim());
            c[0] = 1.0;
            c
        } else {
            let full = p.clone().svd(true, false).u.unwrap();
            let mut c = DVector::from_fn(v.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
            for k in 0..full.ncols().min(j) {
                let q = full.column(k);
                let dot = q.dot(&c);
                c.axpy(-dot, &q, 1.0);
            }
            c.normalize()
        };
        let y = v.element(&y_coords);
        let z = commutator(&a[j], &y);
        let zn = z.norm();
        if zn < 1e-12 {
            return Err(Error::SearchFailure("degenerate flow direction".into()));
        }
        let mut accepted = None;
        for k in 0..=20 {
            let t = 0.5f64.powi(k) / zn;
            let g = (&z * t).exp();
            let g_inv = g.clone().try_inverse().unwrap_or_else(|| g.transpose());
            let moved: Vec<DMatrix<f64>> = a.iter().map(|x| &g * x * &g_inv).collect();
            let (r, _) = proj_rank(v, &moved[..=j]);
            if r == j + 1 && commutation_residual(&moved) <= 1e-9 {
                accepted = Some(moved);
                break;
            }
        }
        let Some(moved) = accepted else {
            return Err(Error::SearchFailure("line search stalled".into()));
        };
        a = moved;
        steps += 1;
        let new_j = greedy_order(v, &mut a);
        assert!(new_j > j, "projection rank must increase at every step");
        j = new_j;
    }
    Ok((a, steps))
}

pub fn align_cartan<R: Rng + ?Sized>(
    pair: &PairwiseSymmetricAlgebra,
    v_basis: &[DMatrix<f64>],
    mode: AlignMode,
    rng: &mut R,
) -> Result<AlignmentResult> {
    if !minus_is_riemannian(pair) {
        return Err(Error::Parameter("alignment needs a definite inner product on u_-".into()));
    }
    for x in v_basis {
        let r = pair.u_minus.residual(x);
        if r > 1e-9 * x.norm().max(1.0) {
            return Err(Error::Domain { residual: r });
        }
    }
    if !v_basis.is_empty() && numerical_rank(&stack(v_basis), 1e-9) < v_basis.len() {
        return Err(Error::Degenerate("V basis is rank deficient".into()));
    }
    let v = Subspace::new(v_basis);
    let rank = rank_of(&pair.u_minus, rng)?;
    if v.dim() > rank {
        return Err(Error::Obstruction { dim: v.dim(), rank });
    }
    if v.dim() == rank && commutation_residual(&v.basis) <= 1e-10 {
        return Ok(finish(&v, v.basis.clone(), 0, mode, 0));
    }
    match mode {
        AlignMode::Constructive => {
            let mut last = None;
            for restart in 0..RESTARTS {
                let start = maximal_abelian_in(&pair.u_minus, rng)?;
                match align_from(pair, &v, &start, rng) {
                    Ok((a, steps)) => return Ok(finish(&v, a, steps, mode, restart)),
                    Err(e) => last = Some(e),
                }
            }
            Err(last.unwrap_or_else(|| Error::SearchFailure("alignment failed".into())))
        }
        AlignMode::Randomized => {
            for draw in 0..RANDOM_DRAWS {
                let m = maximal_abelian_in(&pair.u_minus, rng)?;
                if proj_rank(&v, &m.basis).0 == v.dim() {
                    return Ok(finish(&v, m.basis, 0, mode, draw));
                }
            }
            Err(Error::SearchFailure("no random maximal abelian subspace projects onto V".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{build_algebra, decompose, Family, Involution};
    use crate::linalg::signature;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sphere_pair() -> PairwiseSymmetricAlgebra {
        let a = build_algebra(Family::So, 5).unwrap();
        decompose(
            &a,
            Involution::conjugation(signature(4, 1)).unwrap(),
            Involution::conjugation(signature(2, 3)).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn aligned_to_p_prime_across_starts() {
        let pair = sphere_pair();
        let v = pair.p_prime().basis.clone();
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let res = align_cartan(&pair, &v, AlignMode::Constructive, &mut rng).unwrap();
            assert_eq!(res.projection_rank, 2);
            assert!(res.smallest_singular >= SV_FLOOR);
            assert!(commutation_residual(&res.cartan) <= 1e-10);
        }
    }

    #[test]
    fn flat_itself_needs_no_steps() {
        let pair = sphere_pair();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = maximal_abelian_in(&pair.u_minus, &mut rng).unwrap();
        let res = align_cartan(&pair, &m.basis, AlignMode::Constructive, &mut rng).unwrap();
        assert_eq!(res.steps, 0);
        assert_eq!(res.projection_rank, 2);
    }

    #[test]
    fn too_large_v_is_obstructed() {
        let pair = sphere_pair();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v: Vec<DMatrix<f64>> = pair.u_minus.basis[..3].to_vec();
        assert!(matches!(
            align_cartan(&pair, &v, AlignMode::Constructive, &mut rng),
            Err(Error::Obstruction { dim: 3, rank: 2 })
        ));
    }

    #[test]
    fn steps_taken_when_v_is_orthogonal_to_start() {
        let pair = sphere_pair();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let start = maximal_abelian_in(&pair.u_minus, &mut rng).unwrap();
            // V: two directions of u_- orthogonal to the start flat
            let mut perp = Vec::new();
            for b in &pair.u_minus.basis {
                perp.push(b - start.project(b));
            }
            let perp = Subspace::new(&perp);
            let v = Subspace::new(&perp.basis[..2]);
            let (a, steps) = align_from(&pair, &v, &start, &mut rng).unwrap();
            assert!((1..=2).contains(&steps));
            assert_eq!(proj_rank(&v, &a).0, 2);
            assert!(commutation_residual(&a) <= 1e-9);
        }
    }
}
