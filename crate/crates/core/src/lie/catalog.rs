//! Matrix realizations of the classical algebras and g2.
//!
//! Size conventions: `so` takes the matrix size m (so(m)); every other family
//! takes n and builds the rank-n algebra on n+1 (complex) dimensions, so
//! `su_real, 2` is su(3) realified to 6x6 and `sp, 2` is sp(3) realified to
//! 12x12.

use nalgebra::{DMatrix, DVector};

use super::algebra::LieAlgebraBasis;
use super::octonion;
use crate::error::{Error, Result};
use crate::linalg::{
    complex_structure, complexify, null_space, orthonormalize_matrices, realify, rref_null_space, signature, unit, C64,
};

pub const MAX_AMBIENT: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    So,
    SuReal,
    Sp,
    SlReal,
    SpReal,
    G2,
}

pub fn build_algebra(family: Family, n: usize) -> Result<LieAlgebraBasis> {
    let ambient = match family {
        Family::So => n,
        Family::SuReal => 2 * (n + 1),
        Family::Sp => 4 * (n + 1),
        Family::SlReal => n + 1,
        Family::SpReal => 2 * (n + 1),
        Family::G2 => 7,
    };
    let too_small = match family {
        Family::So => n < 3,
        Family::G2 => false,
        _ => n < 1,
    };
    if too_small || ambient > MAX_AMBIENT {
        return Err(Error::Config(format!("{family:?} with n = {n} is outside the supported range")));
    }
    let alg = match family {
        Family::So => so_pq(n, 0)?,
        Family::SuReal => su_pq(n + 1, 0)?,
        Family::Sp => sp_pq(n + 1, 0)?,
        Family::SlReal => sl_real(n + 1)?,
        Family::SpReal => sp_real(n + 1)?,
        Family::G2 => g2()?,
    };
    Ok(alg)
}

/// Look up an algebra by key: "so:5", "su:2", "sp:2", "sl:2", "spr:2", "g2",
/// and the indefinite forms "so:4,1", "su:2,1", "sp:2,1" (signature p,q).
pub fn algebra_from_key(key: &str) -> Result<LieAlgebraBasis> {
    let key = key.trim();
    if key == "g2" {
        return build_algebra(Family::G2, 0);
    }
    let (fam, args) = key
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("unknown algebra key '{key}'")))?;
    let nums: Vec<usize> = args
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| Error::Config(format!("bad size in '{key}'"))))
        .collect::<Result<_>>()?;
    match (fam, nums.as_slice()) {
        ("so", [n]) => build_algebra(Family::So, *n),
        ("su", [n]) => build_algebra(Family::SuReal, *n),
        ("sp", [n]) => build_algebra(Family::Sp, *n),
        ("sl", [n]) => build_algebra(Family::SlReal, *n),
        ("spr", [n]) => build_algebra(Family::SpReal, *n),
        ("so", [p, q]) if p + q <= MAX_AMBIENT => so_pq(*p, *q),
        ("su", [p, q]) if 2 * (p + q) <= MAX_AMBIENT => su_pq(*p, *q),
        ("sp", [p, q]) if 4 * (p + q) <= MAX_AMBIENT => sp_pq(*p, *q),
        _ => Err(Error::Config(format!("unknown or oversized algebra key '{key}'"))),
    }
}

fn finish(name: &str, mats: Vec<DMatrix<f64>>, cs: Option<DMatrix<f64>>) -> Result<LieAlgebraBasis> {
    let basis = orthonormalize_matrices(&mats, 1e-10);
    let alg = LieAlgebraBasis::new(name, basis, cs)?;
    if alg.killing_conditioning() < 1e-8 {
        return Err(Error::Validation(format!("{name}: Killing form is degenerate")));
    }
    Ok(alg)
}

/// so(p,q): X^T S + S X = 0 with S = diag(I_p, -I_q).
pub fn so_pq(p: usize, q: usize) -> Result<LieAlgebraBasis> {
    let m = p + q;
    let mut mats = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            let same = (i < p) == (j < p);
            let sgn = if same { -1.0 } else { 1.0 };
            mats.push(unit(m, i, j) + unit(m, j, i) * sgn);
        }
    }
    let name = if q == 0 { format!("so({m})") } else { format!("so({p},{q})") };
    finish(&name, mats, None)
}

/// Real algebra cut out of gl(m, C) by complex-linear or antilinear
/// constraints, returned in the realified 2m x 2m picture.
fn complex_constrained(
    name: &str,
    m: usize,
    constraints: &[&dyn Fn(&DMatrix<C64>) -> DMatrix<C64>],
) -> Result<LieAlgebraBasis> {
    let mut span = Vec::with_capacity(2 * m * m);
    for i in 0..m {
        for j in 0..m {
            let mut e = DMatrix::<C64>::zeros(m, m);
            e[(i, j)] = C64::new(1.0, 0.0);
            span.push(e.clone());
            e[(i, j)] = C64::new(0.0, 1.0);
            span.push(e);
        }
    }
    let rows: usize = constraints.len() * 2 * m * m;
    let mut a = DMatrix::zeros(rows, span.len());
    for (col, z) in span.iter().enumerate() {
        let mut r = 0;
        for c in constraints {
            for v in c(z).iter() {
                a[(r, col)] = v.re;
                a[(r + 1, col)] = v.im;
                r += 2;
            }
        }
    }
    let kernel = null_space(&a, 1e-12);
    let mats: Vec<DMatrix<f64>> = (0..kernel.ncols())
        .map(|k| {
            let mut z = DMatrix::<C64>::zeros(m, m);
            for (col, e) in span.iter().enumerate() {
                z += e * C64::new(kernel[(col, k)], 0.0);
            }
            realify(&z)
        })
        .collect();
    finish(name, mats, Some(complex_structure(m)))
}

fn hermitian_signature(p: usize, q: usize) -> DMatrix<C64> {
    signature(p, q).map(|v| C64::new(v, 0.0))
}

/// su(p,q) realified: Z* S + S Z = 0, tr Z = 0. q = 0 gives su(p).
pub fn su_pq(p: usize, q: usize) -> Result<LieAlgebraBasis> {
    let m = p + q;
    let s = hermitian_signature(p, q);
    let herm = move |z: &DMatrix<C64>| z.adjoint() * &s + &s * z;
    let trace = |z: &DMatrix<C64>| {
        let mut t = DMatrix::<C64>::zeros(1, 1);
        t[(0, 0)] = z.trace();
        t
    };
    let name = if q == 0 { format!("su({m})") } else { format!("su({p},{q})") };
    complex_constrained(&name, m, &[&herm, &trace])
}

/// sp(p,q) realified: the complex symplectic algebra on C^{2(p+q)} intersected
/// with u(2p, 2q) for K = diag(I_p, -I_q, I_p, -I_q). q = 0 gives compact sp(p).
pub fn sp_pq(p: usize, q: usize) -> Result<LieAlgebraBasis> {
    let m = p + q;
    let omega = symplectic_form(m).map(|v| C64::new(v, 0.0));
    let mut kd = vec![1.0; p];
    kd.extend(std::iter::repeat(-1.0).take(q));
    let kd2: Vec<f64> = kd.iter().chain(kd.iter()).copied().collect();
    let k = DMatrix::from_diagonal(&DVector::from_vec(kd2)).map(|v| C64::new(v, 0.0));
    let symp = move |z: &DMatrix<C64>| z.transpose() * &omega + &omega * z;
    let unitary = move |z: &DMatrix<C64>| z.adjoint() * &k + &k * z;
    let name = if q == 0 { format!("sp({m})") } else { format!("sp({p},{q})") };
    complex_constrained(&name, 2 * m, &[&symp, &unitary])
}

/// [[0, I], [-I, 0]] on R^{2m}.
pub fn symplectic_form(m: usize) -> DMatrix<f64> {
    let mut o = DMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        o[(i, i + m)] = 1.0;
        o[(i + m, i)] = -1.0;
    }
    o
}

pub fn sl_real(m: usize) -> Result<LieAlgebraBasis> {
    let mut mats = Vec::new();
    for i in 0..m {
        for j in 0..m {
            if i != j {
                mats.push(unit(m, i, j));
            }
        }
    }
    for i in 0..m - 1 {
        mats.push(unit(m, i, i) - unit(m, i + 1, i + 1));
    }
    finish(&format!("sl({m},R)"), mats, None)
}

/// sp(2m, R) = {X : X^T Omega + Omega X = 0}.
pub fn sp_real(m: usize) -> Result<LieAlgebraBasis> {
    let n = 2 * m;
    let mut mats = Vec::new();
    for i in 0..m {
        for j in 0..m {
            // [[A, 0], [0, -A^T]]
            mats.push(unit(n, i, j) - unit(n, j + m, i + m));
        }
    }
    for i in 0..m {
        for j in i..m {
            let b = if i == j { unit(n, i, j + m) } else { unit(n, i, j + m) + unit(n, j, i + m) };
            mats.push(b);
            let c = if i == j { unit(n, i + m, j) } else { unit(n, i + m, j) + unit(n, j + m, i) };
            mats.push(c);
        }
    }
    finish(&format!("sp({m},R)"), mats, None)
}

/// Derivations of the octonion product on Im O = R^7, ordered by the free
/// columns of the reduced constraint system (row-major entry order), then
/// Gram-Schmidt orthonormalized in that order.
pub fn g2() -> Result<LieAlgebraBasis> {
    let (kernel, _free) = rref_null_space(&octonion::derivation_constraints(), 1e-12);
    let mats: Vec<DMatrix<f64>> = kernel.iter().map(|v| DMatrix::from_row_slice(7, 7, v.as_slice())).collect();
    finish("g2", mats, None)
}

/// The complex matrix underlying a realified algebra element.
pub fn as_complex(x: &DMatrix<f64>) -> DMatrix<C64> {
    complexify(x)
}
