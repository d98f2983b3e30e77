//! Curved-flat seeds and the lift to connection-order (-1, 1) frame fields.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::birkhoff::{factorize, BirkhoffOptions};
use crate::error::{Error, Result};
use crate::grid::{connected_component, Grid};
use crate::lie::rank::commutation_residual;
use crate::lie::{Block, PairwiseSymmetricAlgebra};
use crate::linalg::{singular_values, sqrtm, stack, C64};
use crate::loops::connection::extract_connection_unchecked;
use crate::loops::{LaurentLoop, Reality};

/// Default lambda samples for fits.
pub const DEFAULT_LAMBDAS: [f64; 5] = [0.5, 0.8, 1.0, 1.25, 2.0];

#[derive(Clone, Debug)]
pub struct CurvedFlatSeed {
    pub generators: Vec<DMatrix<f64>>,
    pub half_width: f64,
    pub spacing: f64,
}

impl CurvedFlatSeed {
    pub fn new(generators: Vec<DMatrix<f64>>, half_width: f64, spacing: f64) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::Config("a seed needs at least one generator".into()));
        }
        let c = commutation_residual(&generators);
        if c > 1e-10 {
            return Err(Error::Validation(format!("seed generators do not commute (residual {c:.3e})")));
        }
        let nonzero = generators.iter().any(|g| g.norm() > 0.0);
        if nonzero {
            let s = singular_values(&stack(&generators));
            let smin = s.last().copied().unwrap_or(0.0);
            if smin < 1e-8 {
                return Err(Error::Degenerate(format!("seed generators are dependent (smallest singular value {smin:.3e})")));
            }
        }
        Ok(CurvedFlatSeed { generators, half_width, spacing })
    }

    /// The zero seed of dimension r: no checks beyond shape.
    pub fn zero(size: usize, r: usize, half_width: f64, spacing: f64) -> Self {
        CurvedFlatSeed { generators: vec![DMatrix::zeros(size, size); r], half_width, spacing }
    }

    pub fn dims(&self) -> usize {
        self.generators.len()
    }

    pub fn size(&self) -> usize {
        self.generators[0].nrows()
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.dims(), self.half_width, self.spacing)
    }

    pub fn psi(&self, x: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.size(), self.size());
        for (a, &xi) in self.generators.iter().zip(x) {
            out += a * xi;
        }
        out
    }

    /// Restrict to members of u_- of the pair.
    pub fn check_in(&self, pair: &PairwiseSymmetricAlgebra) -> Result<()> {
        for g in &self.generators {
            let r = pair.u_minus.residual(g);
            if r > 1e-9 * g.norm().max(1.0) {
                return Err(Error::Domain { residual: r });
            }
        }
        Ok(())
    }
}

/// exp(lambda * sum x_i A_i).
pub fn curved_flat_frame(seed: &CurvedFlatSeed, x: &[f64], lambda: f64) -> DMatrix<f64> {
    (seed.psi(x) * lambda).exp()
}

/// Frames F(x; lambda) on a grid, `frames[l][i]` for lambda l and grid index i.
/// Masked points hold zero matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameField {
    pub grid: Grid,
    pub lambdas: Vec<f64>,
    pub frames: Vec<Vec<DMatrix<f64>>>,
    pub valid: Vec<bool>,
    pub base_index: usize,
}

impl FrameField {
    pub fn size(&self) -> usize {
        self.frames[0][self.base_index].nrows()
    }

    pub fn lambda_index(&self, lambda: f64) -> Result<usize> {
        self.lambdas
            .iter()
            .position(|&l| (l - lambda).abs() <= 1e-12 * lambda.abs().max(1.0))
            .ok_or_else(|| Error::Parameter(format!("lambda {lambda} is not sampled")))
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn masked_fraction(&self) -> f64 {
        1.0 - self.valid_count() as f64 / self.valid.len() as f64
    }

    /// Right-multiply every frame by a constant.
    pub fn gauge(&self, h: &DMatrix<f64>) -> FrameField {
        let mut out = self.clone();
        for row in &mut out.frames {
            for (f, &v) in row.iter_mut().zip(&self.valid) {
                if v {
                    *f = &*f * h;
                }
            }
        }
        out
    }

    /// Largest |F^T F - I| over valid points and lambdas.
    pub fn orthogonality_residual(&self) -> f64 {
        let n = self.size();
        let id = DMatrix::<f64>::identity(n, n);
        let mut worst: f64 = 0.0;
        for row in &self.frames {
            for (f, &v) in row.iter().zip(&self.valid) {
                if v {
                    worst = worst.max((f.transpose() * f - &id).norm());
                }
            }
        }
        worst
    }
}

/// Frames of the curved flat itself on the seed grid.
pub fn curved_flat_field(seed: &CurvedFlatSeed, lambdas: &[f64]) -> Result<FrameField> {
    let grid = seed.grid()?;
    let frames = lambdas
        .iter()
        .map(|&l| (0..grid.len()).map(|i| curved_flat_frame(seed, &grid.point(i), l)).collect())
        .collect();
    Ok(FrameField { base_index: grid.base_index(), valid: vec![true; grid.len()], lambdas: lambdas.to_vec(), frames, grid })
}

#[derive(Clone, Debug)]
pub struct LiftOptions {
    pub birkhoff: BirkhoffOptions,
    /// Tail bound targeted by the exponential windows.
    pub exp_tol: f64,
    pub min_exp_terms: usize,
}

impl Default for LiftOptions {
    fn default() -> Self {
        LiftOptions { birkhoff: BirkhoffOptions::default(), exp_tol: 1e-14, min_exp_terms: 12 }
    }
}

/// Per-point lift data: F(lambda) = exp(-tau(psi)/lambda) plus(lambda) sqrt(P).
#[derive(Clone, Debug)]
pub struct PointLift {
    pub tau_psi: DMatrix<f64>,
    pub plus: LaurentLoop<f64>,
    pub sqrt_p: DMatrix<f64>,
    pub residual: f64,
    pub degree: usize,
    pub exp_terms: usize,
}

impl PointLift {
    pub fn frame(&self, lambda: f64) -> DMatrix<f64> {
        (&self.tau_psi * (-1.0 / lambda)).exp() * self.plus.evaluate_scalar(lambda) * &self.sqrt_p
    }

    pub fn frame_complex(&self, lambda: C64) -> DMatrix<C64> {
        let tp = self.tau_psi.map(|v| C64::new(v, 0.0)) * (-C64::new(1.0, 0.0) / lambda);
        let sp = self.sqrt_p.map(|v| C64::new(v, 0.0));
        tp.exp() * self.plus.evaluate(lambda) * sp
    }

    /// The frame as a truncated Laurent loop.
    pub fn frame_loop(&self) -> LaurentLoop<f64> {
        let e = LaurentLoop::exp_monomial(&(-&self.tau_psi), -1, self.exp_terms, self.plus.annulus);
        e.mul(&self.plus).mul_const(&self.sqrt_p)
    }
}

#[derive(Clone, Debug)]
pub struct LiftedFamily {
    pub grid: Grid,
    pub points: Vec<Option<PointLift>>,
    pub valid: Vec<bool>,
    pub base_index: usize,
    pub failures: usize,
}

impl LiftedFamily {
    pub fn frame(&self, idx: usize, lambda: f64) -> Option<DMatrix<f64>> {
        self.valid[idx].then(|| self.points[idx].as_ref().map(|p| p.frame(lambda))).flatten()
    }

    pub fn frame_complex(&self, idx: usize, lambda: C64) -> Option<DMatrix<C64>> {
        self.valid[idx].then(|| self.points[idx].as_ref().map(|p| p.frame_complex(lambda))).flatten()
    }

    pub fn field(&self, lambdas: &[f64]) -> FrameField {
        let n = self.points[self.base_index].as_ref().map_or(0, |p| p.sqrt_p.nrows());
        let frames = lambdas
            .iter()
            .map(|&l| {
                (0..self.grid.len())
                    .into_par_iter()
                    .map(|i| self.frame(i, l).unwrap_or_else(|| DMatrix::zeros(n, n)))
                    .collect()
            })
            .collect();
        FrameField {
            grid: self.grid.clone(),
            lambdas: lambdas.to_vec(),
            frames,
            valid: self.valid.clone(),
            base_index: self.base_index,
        }
    }

    pub fn max_residual(&self) -> f64 {
        self.points
            .iter()
            .zip(&self.valid)
            .filter(|(_, &v)| v)
            .filter_map(|(p, _)| p.as_ref().map(|p| p.residual))
            .fold(0.0, f64::max)
    }
}

fn exp_terms(psi_norm: f64, radius: f64, tol: f64, min_terms: usize) -> usize {
    let t = psi_norm * radius;
    let mut k = min_terms;
    let mut term = t.powi(k as i32 + 1) / (1..=k + 1).fold(1.0, |a, b| a * b as f64);
    while term * t.exp() > tol && k < 200 {
        k += 1;
        term *= t / (k + 1) as f64;
    }
    k
}

fn lift_point(psi: &DMatrix<f64>, pair: &PairwiseSymmetricAlgebra, opts: &LiftOptions) -> Result<PointLift> {
    let tau_psi = pair.tau.apply(&pair.algebra, psi);
    let k = exp_terms(psi.norm(), 2.0, opts.exp_tol, opts.min_exp_terms);
    let annulus = crate::loops::laurent::DEFAULT_ANNULUS;
    // W = (tau F_+)^{-1} F_+ = exp(tau(psi)/lambda) exp(lambda psi)
    let w = LaurentLoop::exp_monomial(&tau_psi, -1, k, annulus).mul(&LaurentLoop::exp_monomial(psi, 1, k, annulus));
    let f = factorize(&w, &opts.birkhoff)?;
    let p = f.minus.coeff(0);
    let sqrt_p = sqrtm(&p)?;
    Ok(PointLift { tau_psi, plus: f.plus, sqrt_p, residual: f.residual, degree: f.degree, exp_terms: k })
}

/// KDPW lift of the seed's curved flat: F = F_+ G_- per grid point, with
/// failed points masked and the component of the base point kept.
pub fn kdpw_lift(
    seed: &CurvedFlatSeed,
    pair: &PairwiseSymmetricAlgebra,
    reality: Reality,
    opts: &LiftOptions,
) -> Result<LiftedFamily> {
    if reality != Reality::Rho || !pair.compact {
        return Err(Error::Parameter("the lift is built for compact real forms under rho".into()));
    }
    seed.check_in(pair)?;
    let grid = seed.grid()?;
    let points: Vec<Option<PointLift>> = (0..grid.len())
        .into_par_iter()
        .map(|i| lift_point(&seed.psi(&grid.point(i)), pair, opts).ok())
        .collect();
    let ok: Vec<bool> = points.iter().map(Option::is_some).collect();
    let failures = ok.iter().filter(|&&v| !v).count();
    let base_index = grid.base_index();
    let valid = connected_component(&grid, &ok, base_index);
    if !valid[base_index] {
        return Err(Error::EmptyDomain);
    }
    Ok(LiftedFamily { grid, points, valid, base_index, failures })
}

/// Per-point regularity: the r coefficients of alpha_1^{--} are independent.
pub fn regularity_probe(field: &FrameField, pair: &PairwiseSymmetricAlgebra) -> Result<Vec<bool>> {
    let conn = extract_connection_unchecked(field, pair)?;
    Ok((0..field.grid.len())
        .map(|i| {
            if !conn.valid[i] {
                return false;
            }
            let c = &conn.alpha1_mm[i];
            if c.iter().all(|m| m.norm() == 0.0) {
                return false;
            }
            let s = singular_values(&stack(c));
            s.last().copied().unwrap_or(0.0) >= 1e-6
        })
        .collect())
}

/// The seed generators' projection onto p' (the base-point value of
/// alpha_1^{--}).
pub fn base_projection(seed: &CurvedFlatSeed, pair: &PairwiseSymmetricAlgebra) -> Vec<DMatrix<f64>> {
    seed.generators.iter().map(|a| pair.project(Block::MinusMinus, a)).collect()
}
