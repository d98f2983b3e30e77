//! Catalog of pairwise symmetric algebras and the rank obstruction verdicts.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::cartan_align::minus_is_riemannian;
use crate::error::{Error, Result};
use crate::lie::catalog::{so_pq, sp_pq, su_pq};
use crate::lie::rank::commutation_residual;
use crate::lie::twist::twist;
use crate::lie::{build_algebra, decompose, rank_of, Family, Involution, PairwiseSymmetricAlgebra, Subspace};
use crate::linalg::{block_diag, complexify, diag, numerical_rank, signature, singular_values, unit, C64};
use crate::loops::{apply_involution, LaurentLoop, LoopInvolution};

pub const DEFAULT_SEED: u64 = 20240607;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RealityMode {
    Rho,
    RhoTilde,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CaseKind {
    Sphere { n: usize, k: usize },
    CpnComplex { n: usize, k: usize },
    CpnReal { n: usize },
    Hpn { n: usize },
    HypSphere { n: usize, k: usize },
    ChnComplex { n: usize, k: usize },
    ChnReal { n: usize },
    Hhn { n: usize },
    G2,
    RSpace,
}

#[derive(Clone, Debug, Serialize)]
pub struct GeometryCase {
    pub key: String,
    pub kind: CaseKind,
    pub description: String,
    pub compact: bool,
    pub reality_mode: RealityMode,
    /// Verdict stated in the literature, used only to compare output.
    pub expected_verdict: Option<bool>,
}

fn parse_params(s: &str) -> Result<Vec<(String, usize)>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|kv| {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("expected name=value, got '{kv}'")))?;
            let v = v.trim().parse::<usize>().map_err(|_| Error::Config(format!("bad integer in '{kv}'")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn get(params: &[(String, usize)], name: &str, key: &str) -> Result<usize> {
    params
        .iter()
        .find(|(k, _)| k == name)
        .map(|(_, v)| *v)
        .ok_or_else(|| Error::Config(format!("case '{key}' needs parameter {name}")))
}

impl CaseKind {
    pub fn key(&self) -> String {
        match *self {
            CaseKind::Sphere { n, k } => format!("sphere:n={n},k={k}"),
            CaseKind::CpnComplex { n, k } => format!("cpn-complex:n={n},k={k}"),
            CaseKind::CpnReal { n } => format!("cpn-real:n={n}"),
            CaseKind::Hpn { n } => format!("hpn:n={n}"),
            CaseKind::HypSphere { n, k } => format!("rhn:n={n},k={k}"),
            CaseKind::ChnComplex { n, k } => format!("chn-complex:n={n},k={k}"),
            CaseKind::ChnReal { n } => format!("chn-real:n={n}"),
            CaseKind::Hhn { n } => format!("hhn:n={n}"),
            CaseKind::G2 => "g2".into(),
            CaseKind::RSpace => "r-space".into(),
        }
    }
}

impl GeometryCase {
    pub fn parse(key: &str) -> Result<Self> {
        let key = key.trim();
        let (name, rest) = key.split_once(':').unwrap_or((key, ""));
        let p = parse_params(rest)?;
        let kind = match name {
            "sphere" => CaseKind::Sphere { n: get(&p, "n", key)?, k: get(&p, "k", key)? },
            "cpn-complex" => CaseKind::CpnComplex { n: get(&p, "n", key)?, k: get(&p, "k", key)? },
            "cpn-real" => CaseKind::CpnReal { n: get(&p, "n", key)? },
            "hpn" => CaseKind::Hpn { n: get(&p, "n", key)? },
            "rhn" => CaseKind::HypSphere { n: get(&p, "n", key)?, k: get(&p, "k", key)? },
            "chn-complex" => CaseKind::ChnComplex { n: get(&p, "n", key)?, k: get(&p, "k", key)? },
            "chn-real" => CaseKind::ChnReal { n: get(&p, "n", key)? },
            "hhn" => CaseKind::Hhn { n: get(&p, "n", key)? },
            "g2" => CaseKind::G2,
            "r-space" => CaseKind::RSpace,
            _ => return Err(Error::Config(format!("unknown case '{key}'"))),
        };
        Self::from_kind(kind)
    }

    pub fn from_kind(kind: CaseKind) -> Result<Self> {
        let bad = |msg: &str| Err(Error::Config(format!("{}: {msg}", kind.key())));
        let (description, compact, expected) = match kind {
            CaseKind::Sphere { n, k } | CaseKind::HypSphere { n, k } => {
                if n < 2 || k == 0 || k >= n {
                    return bad("needs n >= 2 and 0 < k < n");
                }
                let compact = matches!(kind, CaseKind::Sphere { .. });
                let space = if compact { "S" } else { "H" };
                (format!("{k}-dim submanifolds of {space}^{n}"), compact, Some(2 * k <= n + 1))
            }
            CaseKind::CpnComplex { n, k } | CaseKind::ChnComplex { n, k } => {
                if n < 2 || k == 0 || k >= n {
                    return bad("needs n >= 2 and 0 < k < n");
                }
                let compact = matches!(kind, CaseKind::CpnComplex { .. });
                let space = if compact { "CP" } else { "CH" };
                (format!("complex {k}-dim submanifolds of {space}^{n}"), compact, Some(false))
            }
            CaseKind::CpnReal { n } | CaseKind::ChnReal { n } => {
                if n < 1 {
                    return bad("needs n >= 1");
                }
                let compact = matches!(kind, CaseKind::CpnReal { .. });
                let space = if compact { "CP" } else { "CH" };
                (format!("totally real {n}-dim submanifolds of {space}^{n}"), compact, Some(true))
            }
            CaseKind::Hpn { n } | CaseKind::Hhn { n } => {
                if n < 2 {
                    return bad("needs n >= 2");
                }
                let compact = matches!(kind, CaseKind::Hpn { .. });
                let space = if compact { "HP" } else { "HH" };
                (format!("totally complex {}-dim submanifolds of {space}^{n}", 2 * n), compact, Some(false))
            }
            CaseKind::G2 => ("surfaces in S^6 with G2 frames".to_string(), true, None),
            CaseKind::RSpace => ("geometries of symmetric R-spaces".to_string(), true, None),
        };
        Ok(GeometryCase {
            key: kind.key(),
            kind,
            description,
            compact,
            reality_mode: if compact { RealityMode::Rho } else { RealityMode::RhoTilde },
            expected_verdict: expected,
        })
    }

    /// The pairwise symmetric algebra (u, tau, sigma).
    pub fn build(&self) -> Result<PairwiseSymmetricAlgebra> {
        let ad = |m: DMatrix<f64>| Involution::conjugation(m);
        let twice = |m: DMatrix<f64>| block_diag(&[&m, &m]);
        match self.kind {
            CaseKind::Sphere { n, k } | CaseKind::HypSphere { n, k } => {
                let alg = if self.compact { build_algebra(Family::So, n + 1)? } else { so_pq(n, 1)? };
                decompose(&alg, ad(signature(n, 1))?, ad(signature(k, n + 1 - k))?)
            }
            CaseKind::CpnComplex { n, k } | CaseKind::ChnComplex { n, k } => {
                let alg = if self.compact { build_algebra(Family::SuReal, n)? } else { su_pq(n, 1)? };
                decompose(&alg, ad(twice(signature(n, 1)))?, ad(twice(signature(k, n + 1 - k)))?)
            }
            CaseKind::CpnReal { n } => {
                let alg = build_algebra(Family::SuReal, n)?;
                decompose(&alg, ad(twice(signature(n, 1)))?, ad(signature(n + 1, n + 1))?)
            }
            CaseKind::ChnReal { n } => {
                let alg = su_pq(n, 1)?;
                let j = signature(n, 1);
                let m = block_diag(&[&j, &(-&j)]);
                decompose(&alg, ad(twice(j))?, Involution::neg_transpose(m)?)
            }
            CaseKind::Hpn { n } | CaseKind::Hhn { n } => {
                let alg = if self.compact { sp_pq(n + 1, 0)? } else { sp_pq(n, 1)? };
                let k = twice(signature(n, 1));
                let s = signature(n + 1, n + 1);
                decompose(&alg, ad(twice(k))?, ad(twice(s))?)
            }
            CaseKind::G2 => {
                let alg = build_algebra(Family::G2, 0)?;
                let q = diag(&[1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0]);
                decompose(&alg, ad(q)?, ad(signature(3, 4))?)
            }
            CaseKind::RSpace => Err(Error::Parameter("symmetric R-space geometries are not computed".into())),
        }
    }

    /// The pair whose sigma-quotient carries the obstruction: the algebra
    /// itself for compact cases, the rho~-twisted real form otherwise.
    pub fn secondary(&self, pair: &PairwiseSymmetricAlgebra) -> Result<PairwiseSymmetricAlgebra> {
        match self.reality_mode {
            RealityMode::Rho => Ok(pair.clone()),
            RealityMode::RhoTilde => Ok(twist(pair)?.0),
        }
    }

    /// Column of the frame giving the map into U/K (or its Hopf lift).
    pub fn f_col(&self) -> usize {
        match self.kind {
            CaseKind::Sphere { n, .. } | CaseKind::HypSphere { n, .. } => n,
            CaseKind::CpnComplex { n, .. }
            | CaseKind::ChnComplex { n, .. }
            | CaseKind::CpnReal { n }
            | CaseKind::ChnReal { n }
            | CaseKind::Hpn { n }
            | CaseKind::Hhn { n } => n,
            CaseKind::G2 | CaseKind::RSpace => 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessReport {
    pub commutator: f64,
    pub membership: f64,
    pub projection_rank: usize,
    pub target_dim: usize,
    pub smallest_singular: f64,
}

impl WitnessReport {
    pub fn ok(&self) -> bool {
        self.commutator <= 1e-12 && self.membership <= 1e-12 && self.projection_rank == self.target_dim
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerdictRow {
    pub key: String,
    pub description: String,
    pub reality: RealityMode,
    pub dim_p_prime: Option<usize>,
    pub rank: Option<usize>,
    pub riemannian_secondary: Option<bool>,
    pub exists: Option<bool>,
    /// "rank", "rank+witness", "witness" or "excluded".
    pub method: String,
    pub witness: Option<WitnessReport>,
    pub expected: Option<bool>,
    pub note: String,
}

impl VerdictRow {
    pub fn matches(&self) -> Option<bool> {
        match (self.exists, self.expected) {
            (Some(a), Some(b)) => Some(a == b),
            _ => None,
        }
    }
}

const COMPLETENESS_NOTE: &str = "local solutions only; geodesic completeness is not computed";

/// The abelian subalgebra {E_1, ..., E_{n-1}, E^} of the totally real
/// hyperbolic case, checked in sl(n+1, R) with sigma x = -S x^T S,
/// tau = Ad S, S = diag(I_n, -1).
pub fn chn_real_witness(n: usize) -> WitnessReport {
    let m = n + 1;
    let (a, b) = (n - 1, n);
    let mut gens = Vec::new();
    for i in 0..n - 1 {
        gens.push(unit(m, i, a) + unit(m, i, b) + unit(m, a, i) - unit(m, b, i));
    }
    gens.push(unit(m, a, a) + unit(m, a, b) - unit(m, b, a) - unit(m, b, b));
    let s = signature(n, 1);
    let sigma = |x: &DMatrix<f64>| -(&s * x.transpose() * &s);
    let tau = |x: &DMatrix<f64>| &s * x * &s;
    let membership = gens
        .iter()
        .map(|x| (sigma(x) + x).norm().max(x.trace().abs()))
        .fold(0.0, f64::max);
    // p~ ∩ u~_-: tau-odd and sigma-odd, the last row and column
    let target: Vec<DMatrix<f64>> = (0..n).map(|i| unit(m, i, b) - unit(m, b, i)).collect();
    let tsub = Subspace::new(&target);
    let proj: Vec<DMatrix<f64>> = gens.iter().map(|x| tsub.project(&((x - tau(x)) * 0.5))).collect();
    let coords = DMatrix::from_fn(n, gens.len(), |i, j| tsub.coords(&proj[j])[i]);
    let sv = singular_values(&coords);
    WitnessReport {
        commutator: commutation_residual(&gens),
        membership,
        projection_rank: numerical_rank(&coords, 1e-9),
        target_dim: tsub.dim(),
        smallest_singular: sv.last().copied().unwrap_or(0.0),
    }
}

pub fn verdict(case: &GeometryCase, seed: u64) -> Result<VerdictRow> {
    let mut row = VerdictRow {
        key: case.key.clone(),
        description: case.description.clone(),
        reality: case.reality_mode,
        dim_p_prime: None,
        rank: None,
        riemannian_secondary: None,
        exists: None,
        method: "excluded".into(),
        witness: None,
        expected: case.expected_verdict,
        note: COMPLETENESS_NOTE.into(),
    };
    if case.kind == CaseKind::RSpace {
        row.note = "excluded by cited results: only homothetic solutions with R < 1".into();
        return Ok(row);
    }
    let pair = case.build()?;
    let secondary = case.secondary(&pair)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = pair.p_prime().dim();
    let rank = rank_of(&secondary.u_minus, &mut rng)?;
    let riemannian = minus_is_riemannian(&secondary);
    row.dim_p_prime = Some(dim);
    row.rank = Some(rank);
    row.riemannian_secondary = Some(riemannian);
    if riemannian {
        row.exists = Some(dim <= rank);
        row.method = "rank".into();
    }
    if let CaseKind::ChnReal { n } = case.kind {
        let w = chn_real_witness(n);
        if w.ok() {
            row.exists = Some(true);
            row.method = if riemannian { "rank+witness".into() } else { "witness".into() };
        }
        row.witness = Some(w);
    }
    Ok(row)
}

/// Every row of the classification at desk scale.
pub fn table_cases() -> Vec<GeometryCase> {
    let mut kinds = Vec::new();
    for n in 2..=7 {
        for k in 1..n {
            kinds.push(CaseKind::Sphere { n, k });
        }
    }
    for n in 2..=3 {
        for k in 1..n {
            kinds.push(CaseKind::CpnComplex { n, k });
        }
    }
    kinds.extend([CaseKind::CpnReal { n: 2 }, CaseKind::CpnReal { n: 3 }, CaseKind::Hpn { n: 2 }]);
    for n in 2..=7 {
        for k in 1..n {
            kinds.push(CaseKind::HypSphere { n, k });
        }
    }
    for n in 2..=3 {
        for k in 1..n {
            kinds.push(CaseKind::ChnComplex { n, k });
        }
    }
    kinds.extend([CaseKind::ChnReal { n: 2 }, CaseKind::ChnReal { n: 3 }, CaseKind::Hhn { n: 2 }, CaseKind::RSpace]);
    kinds.into_iter().map(|k| GeometryCase::from_kind(k).expect("catalog entries are valid")).collect()
}

pub fn full_table(seed: u64) -> Result<Vec<VerdictRow>> {
    table_cases().par_iter().map(|c| verdict(c, seed)).collect()
}

/// For the hyperbolic sphere analogue: conjugating the twisted algebra by
/// T = diag(I_k, i I_{n-k}, 1) lands in so(k, n+1-k). Returns the largest
/// imaginary part and the largest distance to so(k, n+1-k).
pub fn phi_check(n: usize, k: usize) -> Result<(f64, f64, usize)> {
    let case = GeometryCase::from_kind(CaseKind::HypSphere { n, k })?;
    let pair = case.build()?;
    let tw = case.secondary(&pair)?;
    let m = n + 1;
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i != j {
            C64::new(0.0, 0.0)
        } else if i >= k && i < n {
            C64::new(0.0, 1.0)
        } else {
            C64::new(1.0, 0.0)
        }
    });
    let t_inv = t.clone().try_inverse().expect("diagonal T is invertible");
    let target = so_pq(k, m - k)?;
    let mut im: f64 = 0.0;
    let mut dist: f64 = 0.0;
    for b in &tw.algebra.basis {
        let z = complexify(b);
        let y = &t * z * &t_inv;
        im = im.max(y.map(|c| c.im).norm());
        let (_, r) = target.coords_with_residual(&y.map(|c| c.re));
        dist = dist.max(r);
    }
    Ok((im, dist, tw.algebra.dim()))
}

/// Averages a random complex loop over the group generated by tau, sigma and
/// `reality`, then measures its defect under the other reality condition.
pub fn reality_switch_defect(pair: &PairwiseSymmetricAlgebra, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = pair.algebra.ambient_dim;
    let mut worst: f64 = 0.0;
    for (source, other) in [(LoopInvolution::Rho2, LoopInvolution::RhoTilde), (LoopInvolution::RhoTilde, LoopInvolution::Rho2)] {
        let coeffs: Vec<DMatrix<C64>> = (0..5)
            .map(|_| {
                let c: Vec<f64> = (0..pair.algebra.dim() * 2).map(|_| rng.sample(StandardNormal)).collect();
                let re = pair.algebra.element(&nalgebra::DVector::from_column_slice(&c[..pair.algebra.dim()]));
                let im = pair.algebra.element(&nalgebra::DVector::from_column_slice(&c[pair.algebra.dim()..]));
                DMatrix::from_fn(n, n, |i, j| C64::new(re[(i, j)], im[(i, j)]))
            })
            .collect();
        let mut x = LaurentLoop::new(-2, coeffs);
        for w in [LoopInvolution::Tau, LoopInvolution::Sigma, source] {
            let y = apply_involution(&x, w, pair);
            x = x.add(&y).scale(C64::new(0.5, 0.0));
        }
        let fixed = [LoopInvolution::Tau, LoopInvolution::Sigma, source]
            .into_iter()
            .map(|w| apply_involution(&x, w, pair).max_coeff_diff(&x))
            .fold(0.0, f64::max);
        worst = worst.max(fixed).max(apply_involution(&x, other, pair).max_coeff_diff(&x));
    }
    worst
}

/// An orthonormal basis of p' for seeding.
pub fn p_prime_basis(pair: &PairwiseSymmetricAlgebra) -> Vec<DMatrix<f64>> {
    pair.p_prime().basis.clone()
}

/// The two-dimensional V of the G2 surface case: the p'-projection of the
/// rotations in the (f, Y_1) and (f, Y_2) planes.
pub fn g2_tangent_v(pair: &PairwiseSymmetricAlgebra) -> Vec<DMatrix<f64>> {
    [5usize, 6]
        .iter()
        .map(|&j| pair.p_prime().project(&(unit(7, 0, j) - unit(7, j, 0))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_round_trip() {
        for c in table_cases() {
            assert_eq!(GeometryCase::parse(&c.key).unwrap().key, c.key);
        }
        assert!(GeometryCase::parse("sphere:n=4").is_err());
        assert!(GeometryCase::parse("torus:n=2").is_err());
    }

    #[test]
    fn sphere_and_hpn_rows() {
        let r = verdict(&GeometryCase::parse("sphere:n=4,k=2").unwrap(), DEFAULT_SEED).unwrap();
        assert_eq!((r.dim_p_prime, r.rank, r.exists), (Some(2), Some(2), Some(true)));
        let r = verdict(&GeometryCase::parse("hpn:n=2").unwrap(), DEFAULT_SEED).unwrap();
        assert_eq!((r.dim_p_prime, r.rank, r.exists), (Some(4), Some(3), Some(false)));
    }

    #[test]
    fn witness_is_abelian_and_surjective() {
        for n in 2..=4 {
            let w = chn_real_witness(n);
            assert!(w.ok(), "{w:?}");
        }
    }

    #[test]
    fn phi_lands_in_split_form() {
        let (im, dist, d) = phi_check(4, 2).unwrap();
        assert!(im < 1e-9 && dist < 1e-9);
        assert_eq!(d, 10);
    }
}
