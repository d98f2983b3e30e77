//! Discrete residuals of the component equations of dα + α∧α = 0 for
//! α = α0 + α1p (λ - 1/λ) + α1m (λ + 1/λ).
//!
//! Each equation is evaluated at face centres of the grid: values are
//! averaged over the four corners, derivatives are edge-averaged differences.

use nalgebra::DMatrix;
use serde::Serialize;

use rayon::prelude::*;

use super::connection::ConnectionData11;
use crate::grid::Grid;

pub const EQUATION_NAMES: [&str; 6] = [
    "d a0 + a0^a0 + 2(a1m^a1m - a1p^a1p)",
    "d a1p + a0^a1p + a1p^a0",
    "d a1m + a0^a1m + a1m^a0",
    "a1p^a1m + a1m^a1p",
    "a1m^a1m + a1p^a1p",
    "d a0 + a0^a0 + 4 a1m^a1m",
];

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct FieldStats {
    pub max: f64,
    pub rms: f64,
    /// RMS over faces whose centre lies in |x_i| <= 0.75 L.
    pub inner_rms: f64,
    pub faces: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct McResiduals {
    pub equations: [FieldStats; 6],
    /// Per-face residual of each equation, keyed by lower-corner index.
    #[serde(skip)]
    pub per_face: Vec<(usize, usize, usize, [f64; 6])>,
    pub spacing: f64,
    pub form_scale: f64,
}

impl McResiduals {
    pub fn worst_max(&self) -> f64 {
        self.equations.iter().map(|e| e.max).fold(0.0, f64::max)
    }
}

/// (a∧b)(e_i, e_j) = a_i b_j - a_j b_i for matrix-valued 1-forms.
pub fn wedge(a: &[DMatrix<f64>], b: &[DMatrix<f64>], i: usize, j: usize) -> DMatrix<f64> {
    &a[i] * &b[j] - &a[j] * &b[i]
}

/// An elementary square of the grid in the (i, j) coordinate plane.
#[derive(Clone, Copy, Debug)]
pub struct Face {
    /// Corners ordered (0,0), (+i,0), (0,+j), (+i,+j).
    pub corners: [usize; 4],
    pub i: usize,
    pub j: usize,
    pub h: f64,
    /// Centre lies in |x_a| <= 0.75 L.
    pub inner: bool,
}

impl Face {
    pub fn avg(&self, field: &[Vec<DMatrix<f64>>], dir: usize) -> DMatrix<f64> {
        let c = &self.corners;
        (&field[c[0]][dir] + &field[c[1]][dir] + &field[c[2]][dir] + &field[c[3]][dir]) * 0.25
    }

    /// (d a)(e_i, e_j) at the centre.
    pub fn d(&self, field: &[Vec<DMatrix<f64>>]) -> DMatrix<f64> {
        let c = &self.corners;
        let (i, j) = (self.i, self.j);
        let di_aj = (&field[c[1]][j] - &field[c[0]][j] + &field[c[3]][j] - &field[c[2]][j]) / (2.0 * self.h);
        let dj_ai = (&field[c[2]][i] - &field[c[0]][i] + &field[c[3]][i] - &field[c[1]][i]) / (2.0 * self.h);
        di_aj - dj_ai
    }

    /// Centre values in the two face directions.
    pub fn values(&self, field: &[Vec<DMatrix<f64>>]) -> [DMatrix<f64>; 2] {
        [self.avg(field, self.i), self.avg(field, self.j)]
    }

    /// Centre scalar average of a per-point quantity.
    pub fn avg_scalar(&self, v: &[f64]) -> f64 {
        self.corners.iter().map(|&c| v[c]).sum::<f64>() * 0.25
    }
}

/// All faces whose four corners are usable.
pub fn faces(grid: &Grid, usable: &[bool]) -> Vec<Face> {
    let h = grid.spacing;
    let inner = 0.75 * grid.half_width + 1e-12;
    let mut out = Vec::new();
    for p in 0..grid.len() {
        for i in 0..grid.dims {
            for j in i + 1..grid.dims {
                let (Some(pi), Some(pj)) = (grid.neighbor(p, i, 1), grid.neighbor(p, j, 1)) else { continue };
                let Some(pij) = grid.neighbor(pi, j, 1) else { continue };
                let corners = [p, pi, pj, pij];
                if !corners.iter().all(|&c| usable[c]) {
                    continue;
                }
                let centre_inner = grid
                    .point(p)
                    .iter()
                    .enumerate()
                    .all(|(a, &x)| (if a == i || a == j { x + h / 2.0 } else { x }).abs() <= inner);
                out.push(Face { corners, i, j, h, inner: centre_inner });
            }
        }
    }
    out
}

/// Max, RMS and inner RMS of per-face values.
pub fn face_stats(values: &[f64], faces: &[Face]) -> FieldStats {
    let n = values.len();
    let mut inner = 0usize;
    let mut inner_sum = 0.0;
    for (v, f) in values.iter().zip(faces) {
        if f.inner {
            inner += 1;
            inner_sum += v * v;
        }
    }
    FieldStats {
        max: values.iter().copied().fold(0.0, f64::max),
        rms: if n > 0 { (values.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt() } else { 0.0 },
        inner_rms: if inner > 0 { (inner_sum / inner as f64).sqrt() } else { 0.0 },
        faces: n,
    }
}

fn w(a: &[DMatrix<f64>; 2], b: &[DMatrix<f64>; 2]) -> DMatrix<f64> {
    wedge(a, b, 0, 1)
}

pub fn mc_residuals(conn: &ConnectionData11) -> McResiduals {
    let usable: Vec<bool> = conn.valid.iter().zip(&conn.central).map(|(&v, &c)| v && c).collect();
    let fs = faces(&conn.grid, &usable);
    let per_face: Vec<(usize, usize, usize, [f64; 6])> = fs
        .par_iter()
        .map(|f| {
            let (a0, ap, am) = (f.values(&conn.alpha0_pp), f.values(&conn.alpha1_pm), f.values(&conn.alpha1_mm));
            let (d0, dp, dm) = (f.d(&conn.alpha0_pp), f.d(&conn.alpha1_pm), f.d(&conn.alpha1_mm));
            let r = [
                (&d0 + w(&a0, &a0) + (w(&am, &am) - w(&ap, &ap)) * 2.0).norm(),
                (&dp + w(&a0, &ap) + w(&ap, &a0)).norm(),
                (&dm + w(&a0, &am) + w(&am, &a0)).norm(),
                (w(&ap, &am) + w(&am, &ap)).norm(),
                (w(&am, &am) + w(&ap, &ap)).norm(),
                (&d0 + w(&a0, &a0) + w(&am, &am) * 4.0).norm(),
            ];
            (f.corners[0], f.i, f.j, r)
        })
        .collect();
    let equations = std::array::from_fn(|k| {
        let v: Vec<f64> = per_face.iter().map(|r| r.3[k]).collect();
        face_stats(&v, &fs)
    });
    McResiduals { equations, per_face, spacing: conn.grid.spacing, form_scale: conn.form_scale() }
}
