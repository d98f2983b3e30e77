//! Extraction of the connection-order (-1, 1) Maurer–Cartan form
//! alpha = A + B (lambda - 1/lambda) + C (lambda + 1/lambda) from frames.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flows::FrameField;
use crate::grid::Grid;
use crate::lie::{Block, PairwiseSymmetricAlgebra};
use crate::stencil::stencil_width;

pub const FIT_TOL: f64 = 1e-6;
/// Nominal width of the derivative stencils (sixth order when central).
pub const STENCIL_WIDTH: usize = 7;
const FIT_FLOOR: f64 = 1e-10;

/// Per point and direction: projected coefficients, raw fitted
/// coefficients, and fit diagnostics.
#[derive(Clone, Debug)]
pub struct ConnectionData11 {
    pub grid: Grid,
    pub valid: Vec<bool>,
    /// All derivative stencils at the point are full-width central ones.
    pub central: Vec<bool>,
    pub alpha0_pp: Vec<Vec<DMatrix<f64>>>,
    pub alpha1_pm: Vec<Vec<DMatrix<f64>>>,
    pub alpha1_mm: Vec<Vec<DMatrix<f64>>>,
    pub raw: [Vec<Vec<DMatrix<f64>>>; 3],
    /// Relative least-squares residual over lambda, max over directions.
    pub fit_residual: Vec<f64>,
    /// Relative mass of the raw coefficients outside their blocks.
    pub off_pattern: Vec<f64>,
}

impl ConnectionData11 {
    pub fn max_fit_residual(&self) -> f64 {
        self.masked_max(&self.fit_residual)
    }

    pub fn max_off_pattern(&self) -> f64 {
        self.masked_max(&self.off_pattern)
    }

    fn masked_max(&self, v: &[f64]) -> f64 {
        v.iter().zip(&self.valid).filter(|(_, &ok)| ok).map(|(x, _)| *x).fold(0.0, f64::max)
    }

    /// alpha^lambda in direction `dir` at point `idx`.
    pub fn alpha(&self, idx: usize, dir: usize, lambda: f64) -> DMatrix<f64> {
        &self.alpha0_pp[idx][dir]
            + &self.alpha1_pm[idx][dir] * (lambda - 1.0 / lambda)
            + &self.alpha1_mm[idx][dir] * (lambda + 1.0 / lambda)
    }

    /// Largest norm of any stored coefficient, used to scale tolerances.
    pub fn form_scale(&self) -> f64 {
        let mut s: f64 = 0.0;
        for i in (0..self.valid.len()).filter(|&i| self.valid[i]) {
            for f in [&self.alpha0_pp, &self.alpha1_pm, &self.alpha1_mm] {
                for m in &f[i] {
                    s = s.max(m.norm());
                }
            }
        }
        s
    }
}

/// F^{-1} dF/dx_axis at every valid point for one lambda.
pub fn log_derivative(field: &FrameField, l: usize, axis: usize) -> Vec<Option<(DMatrix<f64>, bool)>> {
    log_derivative_width(field, l, axis, STENCIL_WIDTH)
}

/// As [`log_derivative`] with a given nominal stencil width.
pub fn log_derivative_width(field: &FrameField, l: usize, axis: usize, width: usize) -> Vec<Option<(DMatrix<f64>, bool)>> {
    let g = &field.grid;
    let frames = &field.frames[l];
    (0..g.len())
        .into_par_iter()
        .map(|i| {
            let s = stencil_width(g, &field.valid, i, axis, 1, width)?;
            let mut d = DMatrix::zeros(frames[i].nrows(), frames[i].ncols());
            for &(q, w) in &s.terms {
                d += &frames[q] * w;
            }
            let inv = frames[i].clone().try_inverse()?;
            Some((inv * d, s.central))
        })
        .collect()
}

fn fit_matrix(lambdas: &[f64]) -> Result<DMatrix<f64>> {
    let phi = DMatrix::from_fn(lambdas.len(), 3, |l, k| {
        let x = lambdas[l];
        [1.0, x - 1.0 / x, x + 1.0 / x][k]
    });
    phi.clone()
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::Parameter(format!("degenerate lambda set: {e}")))
}

/// Extraction without the connection-order check; the residual is reported.
pub fn extract_connection_unchecked(field: &FrameField, pair: &PairwiseSymmetricAlgebra) -> Result<ConnectionData11> {
    let mut distinct = field.lambdas.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(Error::Parameter("the fit needs at least four distinct lambda".into()));
    }
    let pinv = fit_matrix(&field.lambdas)?;
    let g = &field.grid;
    let r = g.dims;
    let n = field.size();
    // derivs[l][axis][i]
    let derivs: Vec<Vec<Vec<Option<(DMatrix<f64>, bool)>>>> =
        (0..field.lambdas.len()).map(|l| (0..r).map(|a| log_derivative(field, l, a)).collect()).collect();
    let zero = DMatrix::<f64>::zeros(n, n);
    let nl = field.lambdas.len();
    let per_point: Vec<_> = (0..g.len())
        .into_par_iter()
        .map(|i| {
            let mut ok = field.valid[i];
            let mut central = true;
            let mut out = [vec![zero.clone(); r], vec![zero.clone(); r], vec![zero.clone(); r]];
            let mut raw = out.clone();
            let mut fit_res: f64 = 0.0;
            let mut off: f64 = 0.0;
            for a in 0..r {
                let ds: Vec<&DMatrix<f64>> = match (0..nl).map(|l| derivs[l][a][i].as_ref()).collect::<Option<Vec<_>>>() {
                    Some(v) => {
                        central &= v.iter().all(|(_, c)| *c);
                        v.into_iter().map(|(d, _)| d).collect()
                    }
                    None => {
                        ok = false;
                        break;
                    }
                };
                let coef: Vec<DMatrix<f64>> = (0..3)
                    .map(|k| {
                        let mut m = zero.clone();
                        for (l, d) in ds.iter().enumerate() {
                            m += *d * pinv[(k, l)];
                        }
                        m
                    })
                    .collect();
                let mut res2 = 0.0;
                let mut tot2 = 0.0;
                for (l, d) in ds.iter().enumerate() {
                    let x = field.lambdas[l];
                    let fit = &coef[0] + &coef[1] * (x - 1.0 / x) + &coef[2] * (x + 1.0 / x);
                    res2 += (*d - fit).norm_squared();
                    tot2 += d.norm_squared();
                }
                fit_res = fit_res.max(res2.sqrt() / tot2.sqrt().max(FIT_FLOOR));
                let blocks = [Block::PlusPlus, Block::PlusMinus, Block::MinusMinus];
                let mut off2 = 0.0;
                let mut all2 = 0.0;
                for k in 0..3 {
                    let p = pair.project(blocks[k], &coef[k]);
                    off2 += (&coef[k] - &p).norm_squared();
                    all2 += coef[k].norm_squared();
                    out[k][a] = p;
                    raw[k][a] = coef[k].clone();
                }
                off = off.max(off2.sqrt() / all2.sqrt().max(FIT_FLOOR));
            }
            (ok, central && ok, out, raw, fit_res, off)
        })
        .collect();
    let mut conn = ConnectionData11 {
        grid: g.clone(),
        valid: Vec::with_capacity(g.len()),
        central: Vec::with_capacity(g.len()),
        alpha0_pp: Vec::with_capacity(g.len()),
        alpha1_pm: Vec::with_capacity(g.len()),
        alpha1_mm: Vec::with_capacity(g.len()),
        raw: [Vec::new(), Vec::new(), Vec::new()],
        fit_residual: Vec::with_capacity(g.len()),
        off_pattern: Vec::with_capacity(g.len()),
    };
    for (ok, central, out, raw, fr, off) in per_point {
        conn.valid.push(ok);
        conn.central.push(central);
        let [a, b, c] = out;
        conn.alpha0_pp.push(a);
        conn.alpha1_pm.push(b);
        conn.alpha1_mm.push(c);
        for (k, m) in raw.into_iter().enumerate() {
            conn.raw[k].push(m);
        }
        conn.fit_residual.push(if ok { fr } else { 0.0 });
        conn.off_pattern.push(if ok { off } else { 0.0 });
    }
    Ok(conn)
}

/// Extraction that fails when the lambda-dependence is not of the form
/// A + B (lambda - 1/lambda) + C (lambda + 1/lambda).
pub fn extract_connection(field: &FrameField, pair: &PairwiseSymmetricAlgebra) -> Result<ConnectionData11> {
    let conn = extract_connection_unchecked(field, pair)?;
    let r = conn.max_fit_residual();
    if r > FIT_TOL {
        return Err(Error::ConnectionOrder { residual: r });
    }
    Ok(conn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::{curved_flat_field, CurvedFlatSeed, DEFAULT_LAMBDAS};
    use crate::lie::{build_algebra, decompose, Family, Involution};
    use crate::linalg::{signature, unit};

    fn sphere_pair() -> PairwiseSymmetricAlgebra {
        let a = build_algebra(Family::So, 4).unwrap();
        decompose(
            &a,
            Involution::conjugation(signature(3, 1)).unwrap(),
            Involution::conjugation(signature(2, 2)).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn constant_field_has_zero_connection() {
        let pair = sphere_pair();
        let seed = CurvedFlatSeed::zero(4, 2, 1.0, 0.25);
        let field = curved_flat_field(&seed, &DEFAULT_LAMBDAS).unwrap();
        let conn = extract_connection(&field, &pair).unwrap();
        assert_eq!(conn.form_scale(), 0.0);
    }

    #[test]
    fn exponential_frame_is_linear_in_lambda() {
        // the MC form of exp(lambda x A) is lambda A dx: raw B + C = A, raw A = 0
        let pair = sphere_pair();
        let a = (unit(4, 0, 3) - unit(4, 3, 0)) * 0.3;
        let seed = CurvedFlatSeed::new(vec![a.clone()], 1.0, 0.125).unwrap();
        let field = curved_flat_field(&seed, &DEFAULT_LAMBDAS).unwrap();
        let conn = extract_connection(&field, &pair).unwrap();
        for i in 0..field.grid.len() {
            let tol = if conn.central[i] { 2e-6 } else { 5e-5 };
            assert!(conn.raw[0][i][0].norm() < tol, "point {i}");
            let sum = &conn.raw[1][i][0] + &conn.raw[2][i][0];
            assert!((sum - &a).norm() < tol, "point {i}");
        }
    }

    #[test]
    fn wrong_lambda_dependence_is_rejected() {
        // frames exp(lambda^2 x A) have a lambda^2 term
        let pair = sphere_pair();
        let a = (unit(4, 0, 3) - unit(4, 3, 0)) * 0.3;
        let seed = CurvedFlatSeed::new(vec![a.clone()], 1.0, 0.125).unwrap();
        let mut field = curved_flat_field(&seed, &DEFAULT_LAMBDAS).unwrap();
        for (l, row) in field.frames.iter_mut().enumerate() {
            let lam = DEFAULT_LAMBDAS[l];
            for (i, f) in row.iter_mut().enumerate() {
                *f = (&a * (lam * lam * seed.grid().unwrap().point(i)[0])).exp();
            }
        }
        assert!(matches!(extract_connection(&field, &pair), Err(Error::ConnectionOrder { .. })));
    }
}
