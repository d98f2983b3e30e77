//! End-to-end construction: aligned curved-flat seed, then the lift.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::birkhoff::BirkhoffOptions;
use crate::cartan_align::{align_cartan, AlignMode, AlignmentResult};
use crate::error::{Error, Result};
use crate::flows::{kdpw_lift, CurvedFlatSeed, LiftOptions, LiftedFamily};
use crate::lie::{PairwiseSymmetricAlgebra, Subspace};
use crate::linalg::singular_values;
use crate::loops::Reality;
use crate::obstruction::{g2_tangent_v, p_prime_basis, CaseKind, GeometryCase, DEFAULT_SEED};

pub const SEED_SCALE: f64 = 0.2;

/// Where the commuting seed generators come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedMode {
    /// Aligned Cartan basis with prescribed V-components.
    Aligned,
    /// Generators given as row-major matrices.
    Explicit(Vec<Vec<f64>>),
    /// Gaussian combinations of the aligned Cartan basis.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructOptions {
    pub half_width: f64,
    pub spacing: f64,
    /// Norm scale of the seed generators relative to their V-components.
    pub scale: f64,
    /// Starting Birkhoff truncation degree.
    pub degree: usize,
    pub rng_seed: u64,
    pub mode: AlignMode,
    /// Construct with the first rank(U/U_+) directions of V when dim V > rank.
    pub force: bool,
    pub seed_mode: SeedMode,
    /// Domain dimension; defaults to dim V (or the generator count).
    pub dims: Option<usize>,
}

impl Default for ConstructOptions {
    fn default() -> Self {
        ConstructOptions {
            half_width: 1.0,
            spacing: 1.0 / 16.0,
            scale: SEED_SCALE,
            degree: BirkhoffOptions::default().degree,
            rng_seed: DEFAULT_SEED,
            mode: AlignMode::Constructive,
            force: false,
            seed_mode: SeedMode::Aligned,
            dims: None,
        }
    }
}

/// The subspace of p' whose directions the curved flat should realize at
/// the base point.
pub fn target_subspace(case: &GeometryCase, pair: &PairwiseSymmetricAlgebra) -> Vec<DMatrix<f64>> {
    match case.kind {
        CaseKind::G2 => g2_tangent_v(pair),
        _ => p_prime_basis(pair),
    }
}

/// Commuting A_i in the aligned Cartan subspace with pi_V(A_i) = scale * v_i.
pub fn aligned_generators(
    pair: &PairwiseSymmetricAlgebra,
    v_basis: &[DMatrix<f64>],
    scale: f64,
    mode: AlignMode,
    rng_seed: u64,
) -> Result<(Vec<DMatrix<f64>>, AlignmentResult)> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut res = align_cartan(pair, v_basis, mode, &mut rng)?;
    let v = Subspace::new(v_basis);
    res.cartan = condition_alignment(pair, &v, res.cartan);
    res.smallest_singular = smallest_projection_sv(&v, &res.cartan);
    let p = DMatrix::from_fn(v.dim(), res.cartan.len(), |i, j| v.coords(&res.cartan[j])[i]);
    let pinv = p
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::Degenerate(format!("projection onto V: {e}")))?;
    let gens = v_basis
        .iter()
        .map(|x| {
            let c: DVector<f64> = &pinv * v.coords(x);
            let mut a = DMatrix::zeros(x.nrows(), x.ncols());
            for (ck, h) in c.iter().zip(&res.cartan) {
                a += h * (*ck * scale);
            }
            a
        })
        .collect();
    Ok((gens, res))
}

fn smallest_projection_sv(v: &Subspace, a: &[DMatrix<f64>]) -> f64 {
    let p = DMatrix::from_fn(v.dim(), a.len(), |i, j| v.coords(&a[j])[i]);
    let s = singular_values(&p);
    s.get(v.dim().saturating_sub(1)).copied().unwrap_or(0.0)
}

/// Conjugate an aligned Cartan basis by exp(u_+) to push up the smallest
/// singular value of its projection onto V (compass search). Larger values
/// mean smaller generators for the same base-point coframe.
pub fn condition_alignment(pair: &PairwiseSymmetricAlgebra, v: &Subspace, cartan: Vec<DMatrix<f64>>) -> Vec<DMatrix<f64>> {
    let mut cur = cartan;
    let mut best = smallest_projection_sv(v, &cur);
    let mut step = 0.5;
    let mut iters = 0;
    while step > 1e-4 && iters < 2000 {
        iters += 1;
        let mut improved = false;
        for z in &pair.u_plus.basis {
            for sgn in [1.0, -1.0] {
                let g = (z * (sgn * step)).exp();
                let Some(g_inv) = g.clone().try_inverse() else { continue };
                let cand: Vec<DMatrix<f64>> = cur.iter().map(|a| &g * a * &g_inv).collect();
                let sc = smallest_projection_sv(v, &cand);
                if sc > best + 1e-12 {
                    best = sc;
                    cur = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    cur
}

#[derive(Clone, Debug)]
pub struct Construction {
    pub case: GeometryCase,
    pub pair: PairwiseSymmetricAlgebra,
    pub seed: CurvedFlatSeed,
    pub alignment: Option<AlignmentResult>,
    pub family: LiftedFamily,
    /// dim V was larger than the rank and V was truncated under `force`.
    pub truncated: bool,
}

fn explicit_generators(pair: &PairwiseSymmetricAlgebra, rows: &[Vec<f64>]) -> Result<Vec<DMatrix<f64>>> {
    let n = pair.algebra.ambient_dim;
    rows.iter()
        .map(|r| {
            if r.len() != n * n {
                return Err(Error::Config(format!("explicit generator has {} entries, expected {}", r.len(), n * n)));
            }
            let g = DMatrix::from_row_slice(n, n, r);
            let res = pair.u_minus.residual(&g);
            if res > 1e-10 * g.norm().max(1.0) {
                return Err(Error::Config(format!("explicit generator is not in u_- (residual {res:.3e})")));
            }
            Ok(g)
        })
        .collect()
}

/// Build the case, choose seed generators, lift. Non-compact cases are
/// rejected.
pub fn construct(case: &GeometryCase, opts: &ConstructOptions) -> Result<Construction> {
    if !case.compact || case.kind == CaseKind::RSpace {
        return Err(Error::Config(format!("case {} is not constructible (compact catalog cases only)", case.key)));
    }
    let pair = case.build()?;
    let mut truncated = false;
    let (gens, alignment) = match &opts.seed_mode {
        SeedMode::Explicit(rows) => {
            let gens = explicit_generators(&pair, rows)?;
            if opts.dims.is_some_and(|r| r != gens.len()) {
                return Err(Error::Config("grid dimension differs from the number of explicit generators".into()));
            }
            (gens, None)
        }
        mode => {
            let mut v = target_subspace(case, &pair);
            let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed);
            let rank = crate::lie::rank_of(&pair.u_minus, &mut rng)?;
            if v.len() > rank {
                if !opts.force {
                    return Err(Error::Obstruction { dim: v.len(), rank });
                }
                v.truncate(rank);
                truncated = true;
            }
            if let Some(r) = opts.dims {
                if r == 0 || r > v.len() {
                    return Err(Error::Config(format!("grid dimension {r} must lie in 1..={}", v.len())));
                }
                v.truncate(r);
            }
            let (gens, res) = aligned_generators(&pair, &v, opts.scale, opts.mode, opts.rng_seed)?;
            let gens = if *mode == SeedMode::Random { random_combinations(&res.cartan, &gens, &mut rng) } else { gens };
            (gens, Some(res))
        }
    };
    let seed = CurvedFlatSeed::new(gens, opts.half_width, opts.spacing)?;
    let lift = LiftOptions { birkhoff: BirkhoffOptions { degree: opts.degree, ..BirkhoffOptions::default() }, ..LiftOptions::default() };
    let family = kdpw_lift(&seed, &pair, Reality::Rho, &lift)?;
    Ok(Construction { case: case.clone(), pair, seed, alignment, family, truncated })
}

/// As many Gaussian combinations of `cartan` as `like`, each rescaled to
/// the norm of its counterpart.
fn random_combinations(cartan: &[DMatrix<f64>], like: &[DMatrix<f64>], rng: &mut ChaCha8Rng) -> Vec<DMatrix<f64>> {
    like.iter()
        .map(|g| {
            let mut a = DMatrix::zeros(g.nrows(), g.ncols());
            for h in cartan {
                let c: f64 = StandardNormal.sample(rng);
                a += h * c;
            }
            let nrm = a.norm();
            if nrm > 0.0 {
                a * (g.norm() / nrm)
            } else {
                a
            }
        })
        .collect()
}
