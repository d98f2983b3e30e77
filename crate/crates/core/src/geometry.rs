//! Projections of frame fields to U/K, U/U_+ and U/(K∩U_+), with metric,
//! curvature and second-fundamental-form diagnostics.
//!
//! Column conventions of the adapted frames (0-based):
//! - sphere S^k ⊂ S^n: f = column n, tangent at λ = 1 = columns 0..k,
//!   normal = columns k..n;
//! - totally real ⊂ CP^n (realified, m = n+1): X = 0..n, f = n,
//!   JX = m..m+n, Jf = m+n; the metric is the horizontal (Fubini–Study) one;
//! - g2: f = 0, N = 1,2, X = 3,4, Y = 5,6.

use std::collections::BTreeMap;

use nalgebra::{ComplexField, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::{FrameField, LiftedFamily};
use crate::grid::Grid;
use crate::lie::octonion::right_mul_matrix;
use crate::lie::PairwiseSymmetricAlgebra;
use crate::linalg::{complex_structure, singular_values, C64};
use crate::loops::connection::{log_derivative, ConnectionData11};
use crate::loops::mc::{face_stats, faces, Face, FieldStats};
use crate::obstruction::{CaseKind, GeometryCase};
use crate::stencil::stencil_width;

/// Nominal stencil width for sample and metric derivatives.
pub const METRIC_STENCIL: usize = 7;
/// Metrics with det / trace^r below this are treated as singular.
const DEGENERATE_METRIC: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// U/K: the distinguished column.
    Uk,
    /// U/U_+: the Cartan embedding F S F^{-1}.
    UUplus,
    /// U/(K ∩ U_+): both Cartan embeddings, concatenated.
    UkCapUplus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutKind {
    Sphere,
    TotallyReal,
    G2,
    /// Only the distinguished column is interpreted.
    Plain,
}

#[derive(Clone, Debug, Serialize)]
pub struct Layout {
    pub kind: LayoutKind,
    pub size: usize,
    pub f: usize,
    pub tangent: Vec<usize>,
    pub normal: Vec<usize>,
    /// Complex structure for the horizontal metric of a Hopf lift.
    #[serde(skip)]
    pub hopf: Option<DMatrix<f64>>,
}

impl Layout {
    pub fn for_case(case: &GeometryCase, size: usize) -> Layout {
        let plain = |hopf: Option<DMatrix<f64>>| Layout { kind: LayoutKind::Plain, size, f: case.f_col(), tangent: vec![], normal: vec![], hopf };
        match case.kind {
            CaseKind::Sphere { n, k } => {
                Layout { kind: LayoutKind::Sphere, size, f: n, tangent: (0..k).collect(), normal: (k..n).collect(), hopf: None }
            }
            CaseKind::CpnReal { n } => {
                let m = n + 1;
                let mut normal: Vec<usize> = (0..n).collect();
                normal.push(m + n);
                Layout {
                    kind: LayoutKind::TotallyReal,
                    size,
                    f: n,
                    tangent: (m..m + n).collect(),
                    normal,
                    hopf: Some(complex_structure(m)),
                }
            }
            CaseKind::CpnComplex { .. } => plain(Some(complex_structure(size / 2))),
            CaseKind::G2 => Layout { kind: LayoutKind::G2, size, f: 0, tangent: vec![5, 6], normal: vec![1, 2, 3, 4], hopf: None },
            _ => plain(None),
        }
    }

    /// X columns of the totally real frame.
    fn x_cols(&self) -> Vec<usize> {
        (0..self.f).collect()
    }

    fn jf(&self) -> usize {
        self.size / 2 + self.f
    }
}

#[derive(Clone, Debug)]
pub struct ImmersionSamples {
    pub case: String,
    pub target: Target,
    pub lambda: f64,
    pub grid: Grid,
    pub valid: Vec<bool>,
    /// Projected point per grid index (zeros where masked).
    pub points: Vec<DVector<f64>>,
    /// Coset representatives F(x) for the U/K target, empty otherwise.
    pub frames: Vec<DMatrix<f64>>,
    pub layout: Layout,
}

impl ImmersionSamples {
    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Largest | |f| - 1 | over valid points.
    pub fn unit_residual(&self) -> f64 {
        self.points.iter().zip(&self.valid).filter(|(_, &v)| v).map(|(p, _)| (p.norm() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Raw F^{-1} ∂_i F per point (U/K target only).
    pub fn log_derivatives(&self) -> Vec<Option<Vec<DMatrix<f64>>>> {
        let field = FrameField {
            grid: self.grid.clone(),
            lambdas: vec![self.lambda],
            frames: vec![self.frames.clone()],
            valid: self.valid.clone(),
            base_index: self.grid.base_index(),
        };
        let per_axis: Vec<Vec<Option<(DMatrix<f64>, bool)>>> = (0..self.grid.dims).map(|a| log_derivative(&field, 0, a)).collect();
        (0..self.grid.len())
            .map(|i| (0..self.grid.dims).map(|a| per_axis[a][i].as_ref().map(|(m, _)| m.clone())).collect())
            .collect()
    }
}

fn cartan_embedding(f: &DMatrix<f64>, s: &DMatrix<f64>) -> DVector<f64> {
    let q = f * s * f.transpose();
    DVector::from_column_slice(q.as_slice())
}

/// Project the field at `lambda` to the chosen target.
pub fn project(
    field: &FrameField,
    case: &GeometryCase,
    pair: &PairwiseSymmetricAlgebra,
    target: Target,
    lambda: f64,
) -> Result<ImmersionSamples> {
    let l = field.lambda_index(lambda)?;
    let n = field.size();
    let layout = Layout::for_case(case, n);
    let frames = &field.frames[l];
    let inner = |inv: &crate::lie::Involution, what: &str| {
        inv.matrix().cloned().ok_or_else(|| Error::Parameter(format!("{what} is not inner; no Cartan embedding")))
    };
    let points: Vec<DVector<f64>> = match target {
        Target::Uk => frames.iter().map(|f| f.column(layout.f).into_owned()).collect(),
        Target::UUplus => {
            let s = inner(&pair.sigma, "sigma")?;
            frames.iter().map(|f| cartan_embedding(f, &s)).collect()
        }
        Target::UkCapUplus => {
            let s = inner(&pair.sigma, "sigma")?;
            let t = inner(&pair.tau, "tau")?;
            frames
                .iter()
                .map(|f| {
                    let a = cartan_embedding(f, &t);
                    let b = cartan_embedding(f, &s);
                    DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
                })
                .collect()
        }
    };
    let points = points.into_iter().zip(&field.valid).map(|(p, &v)| if v { p } else { DVector::zeros(p.len()) }).collect();
    Ok(ImmersionSamples {
        case: case.key.clone(),
        target,
        lambda,
        grid: field.grid.clone(),
        valid: field.valid.clone(),
        points,
        frames: if target == Target::Uk { frames.clone() } else { Vec::new() },
        layout,
    })
}

/// Per-point partial derivatives of a vector field on the grid.
pub fn derivatives<T>(grid: &Grid, valid: &[bool], values: &[DVector<T>], width: usize) -> Vec<Option<Vec<DVector<T>>>>
where
    T: ComplexField<RealField = f64> + Copy + Send + Sync,
{
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            if !valid[i] {
                return None;
            }
            let mut out = Vec::with_capacity(grid.dims);
            for a in 0..grid.dims {
                let s = stencil_width(grid, valid, i, a, 1, width)?;
                let mut d = DVector::<T>::zeros(values[i].len());
                for &(q, w) in &s.terms {
                    d += &values[q] * T::from_real(w);
                }
                out.push(d);
            }
            Some(out)
        })
        .collect()
}

/// g_ab = <∂_a f, ∂_b f> (bilinear), minus the vertical part along J f.
fn metric_at<T>(d: &[DVector<T>], f: &DVector<T>, hopf: Option<&DMatrix<f64>>) -> DMatrix<T>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let r = d.len();
    let jf = hopf.map(|j| j.map(T::from_real) * f);
    DMatrix::from_fn(r, r, |a, b| {
        let mut g = d[a].dot(&d[b]);
        if let Some(jf) = &jf {
            g -= jf.dot(&d[a]) * jf.dot(&d[b]);
        }
        g
    })
}

fn nondegenerate(g: &DMatrix<f64>) -> bool {
    let tr = g.trace();
    tr > 0.0 && g.determinant() > DEGENERATE_METRIC * tr.powi(g.nrows() as i32)
}

fn metric_field_of<T>(grid: &Grid, valid: &[bool], points: &[DVector<T>], hopf: Option<&DMatrix<f64>>) -> Vec<Option<DMatrix<T>>>
where
    T: ComplexField<RealField = f64> + Copy + Send + Sync,
{
    derivatives(grid, valid, points, METRIC_STENCIL)
        .into_par_iter()
        .enumerate()
        .map(|(i, d)| d.map(|d| metric_at(&d, &points[i], hopf)))
        .collect()
}

/// First fundamental form per point; singular metrics are masked.
pub fn first_fundamental_form(samples: &ImmersionSamples) -> Vec<Option<DMatrix<f64>>> {
    let hopf = if samples.target == Target::Uk { samples.layout.hopf.as_ref() } else { None };
    metric_field_of(&samples.grid, &samples.valid, &samples.points, hopf)
        .into_iter()
        .map(|g| g.filter(nondegenerate))
        .collect()
}

/// R_λ = (λ + 1/λ)^2 / 4.
pub fn r_lambda(lambda: f64) -> f64 {
    (lambda + 1.0 / lambda).powi(2) / 4.0
}

pub fn r_lambda_complex(lambda: C64) -> C64 {
    let s = lambda + C64::new(1.0, 0.0) / lambda;
    s * s / 4.0
}

#[derive(Clone, Debug, Serialize)]
pub struct MetricScaling {
    pub lambda: [f64; 2],
    pub reference: f64,
    pub expected: f64,
    /// Per point Frobenius quotient <g, g_ref> / <g_ref, g_ref> (real part).
    pub ratio: Vec<Option<f64>>,
    pub mean: f64,
    /// (max - min) / |mean| over the unmasked domain.
    pub rel_spread: f64,
    pub max_rel_error: f64,
    /// Largest imaginary part of the quotient (complex λ only).
    pub imag_max: f64,
    pub points: usize,
}

fn summarize_ratio(lambda: [f64; 2], reference: f64, expected: f64, ratio: Vec<Option<f64>>, imag_max: f64) -> MetricScaling {
    let vals: Vec<f64> = ratio.iter().flatten().copied().collect();
    let n = vals.len();
    let mean = if n > 0 { vals.iter().sum::<f64>() / n as f64 } else { f64::NAN };
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let max_rel_error = vals.iter().map(|v| (v - expected).abs() / expected.abs()).fold(0.0, f64::max);
    MetricScaling {
        lambda,
        reference,
        expected,
        ratio,
        mean,
        rel_spread: if n > 0 { (max - min) / mean.abs() } else { f64::NAN },
        max_rel_error,
        imag_max,
        points: n,
    }
}

/// Quotient of the first fundamental forms at `lambda` and `reference`.
pub fn metric_scaling(
    field: &FrameField,
    case: &GeometryCase,
    pair: &PairwiseSymmetricAlgebra,
    lambda: f64,
    reference: f64,
) -> Result<MetricScaling> {
    let a = first_fundamental_form(&project(field, case, pair, Target::Uk, lambda)?);
    let b = first_fundamental_form(&project(field, case, pair, Target::Uk, reference)?);
    let ratio = a
        .iter()
        .zip(&b)
        .map(|(ga, gb)| match (ga, gb) {
            (Some(ga), Some(gb)) => Some(ga.dot(gb) / gb.norm_squared()),
            _ => None,
        })
        .collect();
    Ok(summarize_ratio([lambda, 0.0], reference, r_lambda(lambda) / r_lambda(reference), ratio, 0.0))
}

/// Bilinear metric quotient at a complex λ against λ = 1, from the lifted
/// loops evaluated off the real axis.
pub fn metric_scaling_complex(family: &LiftedFamily, case: &GeometryCase, lambda: C64) -> Result<MetricScaling> {
    let base = family.points[family.base_index].as_ref().ok_or(Error::EmptyDomain)?;
    let size = base.sqrt_p.nrows();
    let layout = Layout::for_case(case, size);
    let g = &family.grid;
    let zero_c = DVector::<C64>::zeros(size);
    let zero_r = DVector::<f64>::zeros(size);
    let (pc, pr): (Vec<DVector<C64>>, Vec<DVector<f64>>) = (0..g.len())
        .into_par_iter()
        .map(|i| match (family.frame_complex(i, lambda), family.frame(i, 1.0)) {
            (Some(fc), Some(fr)) => (fc.column(layout.f).into_owned(), fr.column(layout.f).into_owned()),
            _ => (zero_c.clone(), zero_r.clone()),
        })
        .unzip();
    let hopf = layout.hopf.as_ref();
    let gc = metric_field_of(g, &family.valid, &pc, hopf);
    let gr = metric_field_of(g, &family.valid, &pr, hopf);
    let mut imag_max: f64 = 0.0;
    let ratio = gc
        .iter()
        .zip(&gr)
        .map(|(a, b)| match (a, b) {
            (Some(a), Some(b)) if nondegenerate(b) => {
                let num: C64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
                let q = num / b.norm_squared();
                imag_max = imag_max.max(q.im.abs());
                Some(q.re)
            }
            _ => None,
        })
        .collect();
    let expected = r_lambda_complex(lambda);
    Ok(summarize_ratio([lambda.re, lambda.im], 1.0, expected.re, ratio, imag_max))
}

fn sub(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Per point, per direction block of the log-derivative.
fn block_field(alpha: &[Option<Vec<DMatrix<f64>>>], rows: &[usize], cols: &[usize], dims: usize) -> Vec<Vec<DMatrix<f64>>> {
    alpha
        .iter()
        .map(|a| match a {
            Some(a) => a.iter().map(|m| sub(m, rows, cols)).collect(),
            None => vec![DMatrix::zeros(rows.len(), cols.len()); dims],
        })
        .collect()
}

fn pointwise_norm(alpha: &[Option<Vec<DMatrix<f64>>>], rows: &[usize], cols: &[usize]) -> Vec<Option<f64>> {
    alpha
        .iter()
        .map(|a| a.as_ref().map(|a| a.iter().map(|m| sub(m, rows, cols).norm_squared()).sum::<f64>().sqrt()))
        .collect()
}

fn masked_max(v: &[Option<f64>]) -> f64 {
    v.iter().flatten().copied().fold(0.0, f64::max)
}

/// (a ∧ b^T)(e_i, e_j) for column-vector valued 1-forms.
fn wedge_outer(a: &[DMatrix<f64>; 2], b: &[DMatrix<f64>; 2]) -> DMatrix<f64> {
    &a[0] * b[1].transpose() - &a[1] * b[0].transpose()
}

/// (a^T ∧ b)(e_i, e_j).
fn wedge_inner(a: &[DMatrix<f64>; 2], b: &[DMatrix<f64>; 2]) -> DMatrix<f64> {
    a[0].transpose() * &b[1] - a[1].transpose() * &b[0]
}

fn wedge2(a: &[DMatrix<f64>; 2], b: &[DMatrix<f64>; 2]) -> DMatrix<f64> {
    &a[0] * &b[1] - &a[1] * &b[0]
}

/// Per-face value written at the lower corner (max over planes when r > 2).
fn anchored(n: usize, fs: &[Face], values: &[f64]) -> Vec<Option<f64>> {
    let mut out: Vec<Option<f64>> = vec![None; n];
    for (f, &v) in fs.iter().zip(values) {
        let slot = &mut out[f.corners[0]];
        *slot = Some(slot.map_or(v, |x: f64| x.max(v)));
    }
    out
}

/// Least-squares c in dω + ω∧ω = c θ∧θ^T over inner faces.
#[derive(Clone, Debug, Serialize)]
pub struct ConnectionCurvature {
    pub c: f64,
    /// sqrt(Σ|L - cR|^2 / Σ|L|^2) over inner faces.
    pub rel_residual: f64,
    pub per_face: Vec<Option<f64>>,
    pub faces: usize,
}

fn connection_curvature(grid: &Grid, alpha: &[Option<Vec<DMatrix<f64>>>], tangent: &[usize], f: usize) -> Option<ConnectionCurvature> {
    let dims = grid.dims;
    let usable: Vec<bool> = alpha.iter().map(Option::is_some).collect();
    let omega = block_field(alpha, tangent, tangent, dims);
    let theta = block_field(alpha, tangent, &[f], dims);
    let fs = faces(grid, &usable);
    let terms: Vec<(DMatrix<f64>, DMatrix<f64>)> = fs
        .iter()
        .map(|face| {
            let w = face.values(&omega);
            let t = face.values(&theta);
            (face.d(&omega) + wedge2(&w, &w), wedge_outer(&t, &t))
        })
        .collect();
    let (mut lr, mut rr, mut ll) = (0.0, 0.0, 0.0);
    for (face, (l, r)) in fs.iter().zip(&terms) {
        if face.inner {
            lr += l.dot(r);
            rr += r.norm_squared();
            ll += l.norm_squared();
        }
    }
    if rr <= 0.0 {
        return None;
    }
    let c = lr / rr;
    let res2: f64 = fs.iter().zip(&terms).filter(|(fc, _)| fc.inner).map(|(_, (l, r))| (l - r * c).norm_squared()).sum();
    let per: Vec<f64> = terms.iter().map(|(l, r)| if r.norm_squared() > 0.0 { l.dot(r) / r.norm_squared() } else { f64::NAN }).collect();
    Some(ConnectionCurvature {
        c,
        rel_residual: (res2 / ll.max(f64::MIN_POSITIVE)).sqrt(),
        per_face: anchored(grid.len(), &fs, &per),
        faces: fs.iter().filter(|f| f.inner).count(),
    })
}

fn flatten_mats(ms: &[DMatrix<f64>]) -> DVector<f64> {
    DVector::from_iterator(ms.iter().map(|m| m.len()).sum(), ms.iter().flat_map(|m| m.iter().copied()))
}

fn unflatten_mats(v: &DVector<f64>, count: usize, r: usize) -> Vec<DMatrix<f64>> {
    (0..count).map(|k| DMatrix::from_column_slice(r, r, &v.as_slice()[k * r * r..(k + 1) * r * r])).collect()
}

/// Sectional curvatures of the coordinate planes (i < j, lexicographic)
/// from the Christoffel symbols of a metric field.
pub fn metric_curvature(grid: &Grid, metric: &[Option<DMatrix<f64>>]) -> Vec<Option<Vec<f64>>> {
    let r = grid.dims;
    let ok: Vec<bool> = metric.iter().map(Option::is_some).collect();
    let gvec: Vec<DVector<f64>> =
        metric.iter().map(|g| g.as_ref().map_or_else(|| DVector::zeros(r * r), |g| flatten_mats(std::slice::from_ref(g)))).collect();
    let dg = derivatives(grid, &ok, &gvec, METRIC_STENCIL);
    // gamma[p][a][(b, c)] = Γ^a_{bc}
    let gamma: Vec<Option<Vec<DMatrix<f64>>>> = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let g = metric[p].as_ref()?;
            let d = dg[p].as_ref()?;
            let ginv = g.clone().try_inverse()?;
            let dgm: Vec<DMatrix<f64>> = d.iter().map(|v| DMatrix::from_column_slice(r, r, v.as_slice())).collect();
            Some(
                (0..r)
                    .map(|a| {
                        DMatrix::from_fn(r, r, |b, c| {
                            (0..r).map(|l| 0.5 * ginv[(a, l)] * (dgm[b][(c, l)] + dgm[c][(b, l)] - dgm[l][(b, c)])).sum()
                        })
                    })
                    .collect(),
            )
        })
        .collect();
    let gok: Vec<bool> = gamma.iter().map(Option::is_some).collect();
    let gvecs: Vec<DVector<f64>> = gamma
        .iter()
        .map(|gm| gm.as_ref().map_or_else(|| DVector::zeros(r * r * r), |gm| flatten_mats(gm)))
        .collect();
    let dgamma = derivatives(grid, &gok, &gvecs, METRIC_STENCIL);
    (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let g = metric[p].as_ref()?;
            let gm = gamma[p].as_ref()?;
            let dgm: Vec<Vec<DMatrix<f64>>> = dgamma[p].as_ref()?.iter().map(|v| unflatten_mats(v, r, r)).collect();
            // R^a_{bcd} = ∂_c Γ^a_{db} - ∂_d Γ^a_{cb} + Γ^a_{ce} Γ^e_{db} - Γ^a_{de} Γ^e_{cb}
            let riem = |a: usize, b: usize, c: usize, d: usize| {
                let mut v = dgm[c][a][(d, b)] - dgm[d][a][(c, b)];
                for e in 0..r {
                    v += gm[a][(c, e)] * gm[e][(d, b)] - gm[a][(d, e)] * gm[e][(c, b)];
                }
                v
            };
            let mut ks = Vec::new();
            for c in 0..r {
                for d in c + 1..r {
                    let num: f64 = (0..r).map(|a| g[(c, a)] * riem(a, d, c, d)).sum();
                    let den = g[(c, c)] * g[(d, d)] - g[(c, d)] * g[(c, d)];
                    ks.push(num / den);
                }
            }
            Some(ks)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct CurvatureEstimate {
    pub expected: Option<f64>,
    pub connection: Option<ConnectionCurvature>,
    /// Metric route, per point: mean over coordinate planes.
    pub metric_per_point: Vec<Option<f64>>,
    /// Metric route, inner-domain mean per coordinate plane.
    pub metric_planes: Vec<f64>,
    pub metric_mean: f64,
    /// Largest |K - mean| over the inner domain.
    pub metric_max_dev: f64,
    pub agreement: Option<f64>,
    pub agreement_tol: f64,
    pub resolution_warning: bool,
}

fn inner_points(grid: &Grid) -> Vec<bool> {
    let lim = 0.75 * grid.half_width + 1e-12;
    (0..grid.len()).map(|i| grid.point(i).iter().all(|x| x.abs() <= lim)).collect()
}

fn curvature_from_metric(grid: &Grid, metric: &[Option<DMatrix<f64>>]) -> (Vec<Option<f64>>, Vec<f64>, f64, f64) {
    let ks = metric_curvature(grid, metric);
    let inner = inner_points(grid);
    let planes = grid.dims * (grid.dims - 1) / 2;
    let per_point: Vec<Option<f64>> = ks.iter().map(|k| k.as_ref().map(|k| k.iter().sum::<f64>() / k.len() as f64)).collect();
    let mut sums = vec![0.0; planes];
    let mut count = 0usize;
    for (k, &inn) in ks.iter().zip(&inner) {
        if let (Some(k), true) = (k, inn) {
            for (s, v) in sums.iter_mut().zip(k) {
                *s += v;
            }
            count += 1;
        }
    }
    let plane_means: Vec<f64> = sums.iter().map(|s| s / count.max(1) as f64).collect();
    let mean = if count > 0 { plane_means.iter().sum::<f64>() / planes as f64 } else { f64::NAN };
    let max_dev = ks
        .iter()
        .zip(&inner)
        .filter(|(_, &i)| i)
        .filter_map(|(k, _)| k.as_ref())
        .flat_map(|k| k.iter().map(|v| (v - mean).abs()))
        .fold(0.0, f64::max);
    (per_point, plane_means, mean, max_dev)
}

/// Intrinsic curvature by the connection-form route (adapted frame) and by
/// the metric route (finite-difference Christoffel symbols).
pub fn curvature_report(samples: &ImmersionSamples) -> Result<CurvatureEstimate> {
    if samples.grid.dims < 2 {
        return Err(Error::Parameter("curvature needs a domain of dimension >= 2".into()));
    }
    let metric = first_fundamental_form(samples);
    let (metric_per_point, metric_planes, metric_mean, metric_max_dev) = curvature_from_metric(&samples.grid, &metric);
    let lay = &samples.layout;
    let connection = match (samples.target, lay.kind) {
        (Target::Uk, LayoutKind::Sphere | LayoutKind::TotallyReal) => {
            connection_curvature(&samples.grid, &samples.log_derivatives(), &lay.tangent, lay.f)
        }
        _ => None,
    };
    let expected = match (samples.target, lay.kind) {
        (Target::Uk, LayoutKind::Sphere | LayoutKind::TotallyReal) => Some(1.0 / r_lambda(samples.lambda)),
        (Target::UUplus, _) => Some(0.0),
        _ => None,
    };
    let h = samples.grid.spacing;
    let agreement_tol = 10.0 * h * h;
    let agreement = connection.as_ref().map(|c| (c.c - metric_mean).abs());
    Ok(CurvatureEstimate {
        expected,
        connection,
        metric_per_point,
        metric_planes,
        metric_mean,
        metric_max_dev,
        agreement,
        agreement_tol,
        resolution_warning: agreement.is_some_and(|a| !(a <= agreement_tol)),
    })
}

/// Norm of the second fundamental form of the adapted frame, per point.
pub fn second_fundamental_form(samples: &ImmersionSamples, alpha: &[Option<Vec<DMatrix<f64>>>]) -> Vec<Option<f64>> {
    let lay = &samples.layout;
    match lay.kind {
        LayoutKind::Sphere => pointwise_norm(alpha, &lay.normal, &lay.tangent),
        LayoutKind::TotallyReal => {
            let mut rows = lay.x_cols();
            rows.push(lay.jf());
            pointwise_norm(alpha, &rows, &lay.tangent)
        }
        LayoutKind::G2 => pointwise_norm(alpha, &[1, 2, 3, 4], &[5, 6]),
        LayoutKind::Plain => vec![None; alpha.len()],
    }
}

/// |dω_N + ω_N∧ω_N| per face for the normal connection block.
pub fn normal_curvature(grid: &Grid, alpha: &[Option<Vec<DMatrix<f64>>>], normal: &[usize]) -> (Vec<Option<f64>>, FieldStats) {
    let usable: Vec<bool> = alpha.iter().map(Option::is_some).collect();
    let omega = block_field(alpha, normal, normal, grid.dims);
    let fs = faces(grid, &usable);
    let vals: Vec<f64> = fs
        .iter()
        .map(|face| {
            let w = face.values(&omega);
            (face.d(&omega) + wedge2(&w, &w)).norm()
        })
        .collect();
    (anchored(grid.len(), &fs, &vals), face_stats(&vals, &fs))
}

#[derive(Clone, Debug, Serialize)]
pub struct LagrangianDiagnostics {
    /// |X^T df| per point.
    pub totally_real: Vec<Option<f64>>,
    /// |(Jf)^T df| per point.
    pub legendrian: Vec<Option<f64>>,
    /// Smallest singular value of (JX)^T df per point.
    pub transversality: Vec<Option<f64>>,
    /// max |<J ∂_i f, ∂_j f>| per point.
    pub symplectic: Vec<Option<f64>>,
    pub totally_real_max: f64,
    pub legendrian_max: f64,
    pub transversality_min: f64,
    pub symplectic_max: f64,
    pub degenerate: bool,
}

pub fn lagrangian_diagnostics(samples: &ImmersionSamples, alpha: &[Option<Vec<DMatrix<f64>>>]) -> Result<LagrangianDiagnostics> {
    let lay = &samples.layout;
    if lay.kind != LayoutKind::TotallyReal {
        return Err(Error::Parameter("Lagrangian diagnostics need the totally real case".into()));
    }
    let f = [lay.f];
    let totally_real = pointwise_norm(alpha, &lay.x_cols(), &f);
    let legendrian = pointwise_norm(alpha, &[lay.jf()], &f);
    let j = complex_structure(lay.size / 2);
    let transversality: Vec<Option<f64>> = alpha
        .iter()
        .map(|a| {
            a.as_ref().map(|a| {
                let m = DMatrix::from_fn(lay.tangent.len(), a.len(), |r, i| a[i][(lay.tangent[r], lay.f)]);
                singular_values(&m).last().copied().unwrap_or(0.0)
            })
        })
        .collect();
    let symplectic: Vec<Option<f64>> = alpha
        .iter()
        .map(|a| {
            a.as_ref().map(|a| {
                let cols: Vec<DVector<f64>> = a.iter().map(|m| m.column(lay.f).into_owned()).collect();
                let mut worst: f64 = 0.0;
                for p in 0..cols.len() {
                    for q in p + 1..cols.len() {
                        worst = worst.max((&j * &cols[p]).dot(&cols[q]).abs());
                    }
                }
                worst
            })
        })
        .collect();
    let transversality_min = transversality.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    Ok(LagrangianDiagnostics {
        totally_real_max: masked_max(&totally_real),
        legendrian_max: masked_max(&legendrian),
        symplectic_max: masked_max(&symplectic),
        degenerate: !(transversality_min > 1e-8),
        transversality_min,
        totally_real,
        legendrian,
        transversality,
        symplectic,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct G2Report {
    pub lambda: f64,
    /// Largest relative mass of the fitted coefficients outside the
    /// 1+2+2+2 block pattern.
    pub off_pattern: f64,
    /// dω_i + ω_i∧ω_i against 4β_1∧β_1^T, 4β_1^T∧β_1, 4θ_2∧θ_2^T.
    pub sub_bundle_equations: [FieldStats; 3],
    /// Largest |(I - P_i) R_f P_i| per sub-bundle η_1, η_2, η_3.
    pub j_invariance: [f64; 3],
    /// |[f, N, X]^T df|: tangent space inside span Y.
    pub tangent_outside_y: f64,
    pub sff_max: f64,
    pub coframe_min_singular: f64,
    pub flags: BTreeMap<String, bool>,
}

/// Block-pattern, sub-bundle and complex-curve checks for the g2 case.
pub fn g2_report(samples: &ImmersionSamples, conn: &ConnectionData11) -> Result<G2Report> {
    if samples.layout.kind != LayoutKind::G2 || samples.target != Target::Uk {
        return Err(Error::Parameter("g2 report needs U/K samples of the g2 case".into()));
    }
    const N: [usize; 2] = [1, 2];
    const X: [usize; 2] = [3, 4];
    const Y: [usize; 2] = [5, 6];
    let grid = &conn.grid;
    let usable: Vec<bool> = conn.valid.iter().zip(&conn.central).map(|(&v, &c)| v && c).collect();
    let fs = faces(grid, &usable);
    let opt = |f: &Vec<Vec<DMatrix<f64>>>| -> Vec<Option<Vec<DMatrix<f64>>>> { f.iter().map(|m| Some(m.clone())).collect() };
    let a0 = opt(&conn.alpha0_pp);
    let c1 = opt(&conn.alpha1_mm);
    let dims = grid.dims;
    let w: Vec<Vec<Vec<DMatrix<f64>>>> = [N, X, Y].iter().map(|b| block_field(&a0, b, b, dims)).collect();
    let beta = block_field(&c1, &N, &X, dims);
    let theta = block_field(&c1, &Y, &[0], dims);
    let mut vals = [Vec::new(), Vec::new(), Vec::new()];
    for face in &fs {
        let b = face.values(&beta);
        let t = face.values(&theta);
        let rhs = [wedge_outer(&b, &b) * 4.0, wedge_inner(&b, &b) * 4.0, wedge_outer(&t, &t) * 4.0];
        for k in 0..3 {
            let wk = face.values(&w[k]);
            vals[k].push((face.d(&w[k]) + wedge2(&wk, &wk) - &rhs[k]).norm());
        }
    }
    let sub_bundle_equations = std::array::from_fn(|k| face_stats(&vals[k], &fs));

    let mut j_invariance = [0.0f64; 3];
    for (fr, _) in samples.frames.iter().zip(&samples.valid).filter(|(_, &v)| v) {
        let r = right_mul_matrix(&fr.column(0).into_owned());
        for (k, b) in [N, X, Y].iter().enumerate() {
            let p = DMatrix::from_fn(7, 2, |i, j| fr[(i, b[j])]);
            let img = &r * &p;
            let resid = &img - &p * (p.transpose() * &img);
            j_invariance[k] = j_invariance[k].max(resid.norm());
        }
    }
    let alpha = samples.log_derivatives();
    let tangent_outside_y = masked_max(&pointwise_norm(&alpha, &[0, 1, 2, 3, 4], &[0]));
    let sff_max = masked_max(&second_fundamental_form(samples, &alpha));
    let coframe_min_singular = alpha
        .iter()
        .flatten()
        .map(|a| {
            let m = DMatrix::from_fn(2, a.len(), |r, i| a[i][(Y[r], 0)]);
            singular_values(&m).last().copied().unwrap_or(0.0)
        })
        .fold(f64::INFINITY, f64::min);
    let off_pattern = conn.max_off_pattern();
    let mut flags = BTreeMap::new();
    let regular = coframe_min_singular > 1e-8;
    flags.insert("regular".into(), regular);
    flags.insert("block_pattern".into(), off_pattern <= 1e-7);
    flags.insert("j_invariant".into(), j_invariance.iter().all(|&v| v <= 1e-7));
    if (samples.lambda - 1.0).abs() < 1e-12 {
        flags.insert("tangent_in_y".into(), regular && tangent_outside_y <= 1e-6);
        flags.insert("complex_tangent".into(), regular && j_invariance[2] <= 1e-7);
        flags.insert("totally_geodesic".into(), regular && sff_max <= 1e-6);
    }
    Ok(G2Report {
        lambda: samples.lambda,
        off_pattern,
        sub_bundle_equations,
        j_invariance,
        tangent_outside_y,
        sff_max,
        coframe_min_singular,
        flags,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FlatnessReport {
    /// max |a_i a_j - a_j a_i| / max |a|^2 for a = α_{u_-}
    /// = (λ - 1/λ) α_1^{+-} + (λ + 1/λ) α_1^{--}.
    pub wedge_residual: f64,
    /// max |α_{u_-}∧α_{u_-} - 4 α_1^{--}∧α_1^{--}|, same normalization.
    pub identity_residual: f64,
    /// Inner-domain max |K| of the U/U_+ pull-back metric.
    pub intrinsic_curvature: f64,
    pub intrinsic_mean: f64,
    pub riemannian: bool,
}

/// Curved-flat checks for the projection to U/U_+.
pub fn flatness_report(
    field: &FrameField,
    conn: &ConnectionData11,
    case: &GeometryCase,
    pair: &PairwiseSymmetricAlgebra,
    lambda: f64,
) -> Result<FlatnessReport> {
    let (p, q) = (lambda - 1.0 / lambda, lambda + 1.0 / lambda);
    let (mut wedge, mut ident, mut scale) = (0.0f64, 0.0f64, 0.0f64);
    for i in (0..conn.grid.len()).filter(|&i| conn.valid[i]) {
        let b = &conn.alpha1_pm[i];
        let c = &conn.alpha1_mm[i];
        let a: Vec<DMatrix<f64>> = b.iter().zip(c).map(|(b, c)| b * p + c * q).collect();
        for j in 0..a.len() {
            scale = scale.max(a[j].norm_squared());
            for k in j + 1..a.len() {
                let w = &a[j] * &a[k] - &a[k] * &a[j];
                let cc = (&c[j] * &c[k] - &c[k] * &c[j]) * 4.0;
                wedge = wedge.max(w.norm());
                ident = ident.max((w - cc).norm());
            }
        }
    }
    let scale = scale.max(f64::MIN_POSITIVE);
    let riemannian = crate::cartan_align::minus_is_riemannian(pair);
    let proj = project(field, case, pair, Target::UUplus, lambda)?;
    let metric = first_fundamental_form(&proj);
    let (_, _, mean, _) = curvature_from_metric(&proj.grid, &metric);
    let inner = inner_points(&proj.grid);
    let worst = metric_curvature(&proj.grid, &metric)
        .iter()
        .zip(&inner)
        .filter(|(_, &i)| i)
        .filter_map(|(k, _)| k.as_ref())
        .flatten()
        .map(|v| v.abs())
        .fold(0.0, f64::max);
    Ok(FlatnessReport {
        wedge_residual: wedge / scale,
        identity_residual: ident / scale,
        intrinsic_curvature: worst,
        intrinsic_mean: mean,
        riemannian,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SpanFit {
    /// Numerical dimension of the linear span of the samples.
    pub span_dim: usize,
    /// Largest distance from a sample to the best (k+1)-dimensional span.
    pub max_distance: f64,
}

/// Fit the linear span of the valid sample points by SVD.
pub fn span_fit(samples: &ImmersionSamples, dim: usize) -> SpanFit {
    let pts: Vec<&DVector<f64>> = samples.points.iter().zip(&samples.valid).filter(|(_, &v)| v).map(|(p, _)| p).collect();
    let n = pts.first().map_or(0, |p| p.len());
    let m = DMatrix::from_fn(n, pts.len(), |i, j| pts[j][i]);
    let (u, sv, _) = crate::linalg::svd_sorted(&m);
    let smax = sv.first().copied().unwrap_or(0.0);
    let span_dim = sv.iter().filter(|&&s| s > 1e-6 * smax).count();
    let basis = u.columns(0, dim.min(sv.len())).into_owned();
    let max_distance = pts.iter().map(|p| (*p - &basis * (basis.transpose() * *p)).norm()).fold(0.0, f64::max);
    SpanFit { span_dim, max_distance }
}

#[derive(Clone, Debug, Serialize)]
pub struct GeometryReport {
    pub case: String,
    pub lambda: f64,
    pub masked_fraction: f64,
    pub unit_residual: f64,
    pub metric: MetricScaling,
    pub curvature: Option<CurvatureEstimate>,
    pub sff_norm: Vec<Option<f64>>,
    pub sff_max: f64,
    pub normal_curvature_norm: Vec<Option<f64>>,
    pub normal_curvature: Option<FieldStats>,
    pub lagrangian: Option<LagrangianDiagnostics>,
    pub g2: Option<G2Report>,
    pub span: Option<SpanFit>,
    pub flatness: Option<FlatnessReport>,
    pub flags: BTreeMap<String, bool>,
}

/// Full per-λ report; `conn` is the connection of the same field.
pub fn geometry_report(
    field: &FrameField,
    conn: &ConnectionData11,
    case: &GeometryCase,
    pair: &PairwiseSymmetricAlgebra,
    lambda: f64,
) -> Result<GeometryReport> {
    let samples = project(field, case, pair, Target::Uk, lambda)?;
    let reference = if field.lambda_index(1.0).is_ok() { 1.0 } else { lambda };
    let metric = metric_scaling(field, case, pair, lambda, reference)?;
    let alpha = samples.log_derivatives();
    let lay = samples.layout.clone();
    let sff_norm = second_fundamental_form(&samples, &alpha);
    let sff_max = masked_max(&sff_norm);
    let curvature = if field.grid.dims >= 2 { Some(curvature_report(&samples)?) } else { None };
    let (normal_curvature_norm, normal_curvature) = if lay.kind == LayoutKind::Sphere && field.grid.dims >= 2 {
        let (v, s) = normal_curvature(&field.grid, &alpha, &lay.normal);
        (v, Some(s))
    } else {
        (vec![None; field.grid.len()], None)
    };
    let lagrangian = if lay.kind == LayoutKind::TotallyReal { Some(lagrangian_diagnostics(&samples, &alpha)?) } else { None };
    let g2 = if lay.kind == LayoutKind::G2 { Some(g2_report(&samples, conn)?) } else { None };
    let at_one = (lambda - 1.0).abs() < 1e-12;
    let span = (lay.kind == LayoutKind::Sphere && at_one).then(|| span_fit(&samples, lay.tangent.len() + 1));
    let flatness = if field.grid.dims >= 2 && pair.sigma.matrix().is_some() {
        Some(flatness_report(field, conn, case, pair, lambda)?)
    } else {
        None
    };
    let h2 = field.grid.spacing.powi(2);
    let mut flags = BTreeMap::new();
    if matches!(lay.kind, LayoutKind::Sphere | LayoutKind::TotallyReal) {
        flags.insert("metric_scaling".into(), metric.rel_spread <= 1e-6 && metric.max_rel_error <= 1e-6);
    }
    if let Some(c) = &curvature {
        flags.insert("curvature_resolved".into(), !c.resolution_warning);
    }
    if at_one && lay.kind != LayoutKind::Plain {
        flags.insert("totally_geodesic".into(), sff_max <= 1e-6);
    }
    if let Some(s) = &span {
        flags.insert("on_great_sphere".into(), s.max_distance <= 1e-6);
    }
    if let Some(nc) = &normal_curvature {
        flags.insert("flat_normal_bundle".into(), nc.inner_rms <= h2);
    }
    if let Some(fl) = &flatness {
        flags.insert("curved_flat_projection".into(), fl.wedge_residual <= h2);
    }
    if let Some(l) = &lagrangian {
        flags.insert("totally_real".into(), l.totally_real_max <= 1e-7);
        flags.insert("transversal".into(), !l.degenerate);
        if at_one {
            flags.insert("legendrian".into(), l.legendrian_max <= 1e-7);
        }
    }
    if let Some(g) = &g2 {
        for (k, v) in &g.flags {
            flags.insert(format!("g2_{k}"), *v);
        }
    }
    Ok(GeometryReport {
        case: case.key.clone(),
        lambda,
        masked_fraction: field.masked_fraction(),
        unit_residual: samples.unit_residual(),
        metric,
        curvature,
        sff_norm,
        sff_max,
        normal_curvature_norm,
        normal_curvature,
        lagrangian,
        g2,
        span,
        flatness,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_metric(grid: &Grid) -> Vec<Option<DMatrix<f64>>> {
        // f(u, v) = (cos u cos v, cos u sin v, sin u): g = diag(1, cos^2 u)
        (0..grid.len())
            .map(|i| {
                let p = grid.point(i);
                Some(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, p[0].cos().powi(2)]))
            })
            .collect()
    }

    #[test]
    fn unit_sphere_has_curvature_one() {
        let g = Grid::new(2, 0.5, 0.0625).unwrap();
        let ks = metric_curvature(&g, &sphere_metric(&g));
        let inner = inner_points(&g);
        for (k, i) in ks.iter().zip(&inner) {
            let e = (k.as_ref().unwrap()[0] - 1.0).abs();
            assert!(e < if *i { 1e-6 } else { 1e-4 }, "{e:e}");
        }
    }

    #[test]
    fn flat_metric_in_polar_form() {
        // g = diag(1, r^2) on r in [1.5, 2.5]
        let g = Grid::new(2, 0.5, 0.0625).unwrap();
        let m: Vec<Option<DMatrix<f64>>> = (0..g.len())
            .map(|i| {
                let r = 2.0 + g.point(i)[0];
                Some(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, r * r]))
            })
            .collect();
        for k in metric_curvature(&g, &m).iter().flatten() {
            assert!(k[0].abs() < 1e-6);
        }
    }

    #[test]
    fn sample_derivatives_complex() {
        let g = Grid::new(1, 1.0, 0.125).unwrap();
        let vals: Vec<DVector<C64>> = (0..g.len()).map(|i| DVector::from_element(1, C64::new(0.0, g.coord(i)).exp())).collect();
        let d = derivatives(&g, &vec![true; g.len()], &vals, 7);
        for (i, di) in d.iter().enumerate() {
            let x = g.coord(i);
            let expect = C64::new(0.0, 1.0) * C64::new(0.0, x).exp();
            assert!((di.as_ref().unwrap()[0][0] - expect).norm() < 1e-6);
        }
    }

    #[test]
    fn r_lambda_values() {
        assert!((r_lambda(2.0) / r_lambda(1.0) - 1.5625).abs() < 1e-15);
        let z = C64::from_polar(1.0, std::f64::consts::PI / 6.0);
        assert!((r_lambda_complex(z).re - 0.75).abs() < 1e-15);
    }
}
