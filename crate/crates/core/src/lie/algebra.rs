use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{commutator, flatten, numerical_rank, stack};

/// Membership tolerance, relative to max(1, |X|) with a unit-norm basis.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// A real matrix Lie algebra given by a basis of ambient matrices.
#[derive(Clone, Debug)]
pub struct LieAlgebraBasis {
    pub name: String,
    pub ambient_dim: usize,
    pub basis: Vec<DMatrix<f64>>,
    /// Killing form in basis coordinates, trace(ad b_i ad b_j).
    pub killing: DMatrix<f64>,
    /// Multiplication by i when the ambient space is a realified complex one.
    pub complex_structure: Option<DMatrix<f64>>,
    /// Largest bracket-closure residual seen while building structure constants.
    pub closure_residual: f64,
    stacked: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
    ad: Vec<DMatrix<f64>>,
}

impl LieAlgebraBasis {
    pub fn new(name: &str, basis: Vec<DMatrix<f64>>, complex_structure: Option<DMatrix<f64>>) -> Result<Self> {
        let Some(first) = basis.first() else {
            return Err(Error::Config(format!("{name}: empty basis")));
        };
        let n = first.nrows();
        let d = basis.len();
        let stacked = stack(&basis);
        if numerical_rank(&stacked, 1e-10) < d {
            return Err(Error::Validation(format!("{name}: basis is linearly dependent")));
        }
        let gram = stacked.transpose() * &stacked;
        let gram_inv = gram
            .try_inverse()
            .ok_or_else(|| Error::Validation(format!("{name}: singular Gram matrix")))?;
        let mut alg = LieAlgebraBasis {
            name: name.to_string(),
            ambient_dim: n,
            basis,
            killing: DMatrix::zeros(d, d),
            complex_structure,
            closure_residual: 0.0,
            stacked,
            gram_inv,
            ad: Vec::new(),
        };
        let mut ad = vec![DMatrix::zeros(d, d); d];
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let br = commutator(&alg.basis[i], &alg.basis[j]);
                let (c, res) = alg.coords_with_residual(&br);
                worst = worst.max(res);
                ad[i].set_column(j, &c);
            }
        }
        if worst > 1e-10 {
            return Err(Error::Validation(format!("{name}: bracket closure residual {worst:.3e}")));
        }
        alg.closure_residual = worst;
        let mut killing = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let v = (&ad[i] * &ad[j]).trace();
                killing[(i, j)] = v;
                killing[(j, i)] = v;
            }
        }
        alg.killing = killing;
        alg.ad = ad;
        Ok(alg)
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Least-squares coordinates and the residual of the fit.
    pub fn coords_with_residual(&self, x: &DMatrix<f64>) -> (DVector<f64>, f64) {
        let v = flatten(x);
        let c = &self.gram_inv * (self.stacked.transpose() * &v);
        let res = (&self.stacked * &c - v).norm();
        (c, res)
    }

    pub fn coords(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        let (c, res) = self.coords_with_residual(x);
        if res > MEMBERSHIP_TOL * x.norm().max(1.0) {
            return Err(Error::Domain { residual: res });
        }
        Ok(c)
    }

    pub fn contains(&self, x: &DMatrix<f64>) -> bool {
        self.coords(x).is_ok()
    }

    pub fn element(&self, c: &DVector<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.ambient_dim, self.ambient_dim);
        for (b, &ci) in self.basis.iter().zip(c.iter()) {
            if ci != 0.0 {
                out += b * ci;
            }
        }
        out
    }

    /// ad of the basis element i, acting on coordinates.
    pub fn ad_basis(&self, i: usize) -> &DMatrix<f64> {
        &self.ad[i]
    }

    pub fn ad_coords(&self, c: &DVector<f64>) -> DMatrix<f64> {
        let d = self.dim();
        let mut out = DMatrix::zeros(d, d);
        for (i, &ci) in c.iter().enumerate() {
            if ci != 0.0 {
                out += &self.ad[i] * ci;
            }
        }
        out
    }

    pub fn killing_coords(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        (x.transpose() * &self.killing * y)[(0, 0)]
    }

    pub fn killing_form(&self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
        Ok(self.killing_coords(&self.coords(x)?, &self.coords(y)?))
    }

    /// Gram matrix of the ambient trace form tr(b_i b_j).
    pub fn trace_form(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| (&self.basis[i] * &self.basis[j]).trace())
    }

    /// Ratio of smallest to largest absolute Killing eigenvalue.
    pub fn killing_conditioning(&self) -> f64 {
        let ev = self.killing.clone().symmetric_eigen().eigenvalues;
        let max = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let min = ev.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        if max == 0.0 {
            0.0
        } else {
            min / max
        }
    }

    /// Largest Jacobi-identity defect over all basis triples.
    pub fn jacobi_residual(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let (a, b, c) = (&self.basis[i], &self.basis[j], &self.basis[k]);
                    let r = commutator(a, &commutator(b, c))
                        + commutator(b, &commutator(c, a))
                        + commutator(c, &commutator(a, b));
                    worst = worst.max(r.norm());
                }
            }
        }
        worst
    }

    /// Killing form recomputed from brackets of ambient matrices, bypassing the
    /// cached structure constants.
    pub fn killing_bruteforce(&self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
        let d = self.dim();
        let mut t = 0.0;
        for i in 0..d {
            let inner = commutator(y, &self.basis[i]);
            let outer = commutator(x, &inner);
            t += self.coords(&outer)?[i];
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::unit;

    fn so3() -> LieAlgebraBasis {
        let b = vec![
            unit(3, 0, 1) - unit(3, 1, 0),
            unit(3, 0, 2) - unit(3, 2, 0),
            unit(3, 1, 2) - unit(3, 2, 1),
        ];
        LieAlgebraBasis::new("so3", b, None).unwrap()
    }

    #[test]
    fn so3_killing_value() {
        let a = so3();
        let x = unit(3, 0, 1) - unit(3, 1, 0);
        assert!((a.killing_form(&x, &x).unwrap() + 2.0).abs() < 1e-12);
        assert!((a.killing_bruteforce(&x, &x).unwrap() + 2.0).abs() < 1e-12);
        assert_eq!(a.killing_form(&x, &DMatrix::zeros(3, 3)).unwrap(), 0.0);
    }

    #[test]
    fn outside_span_is_domain_error() {
        let a = so3();
        assert!(matches!(a.coords(&DMatrix::identity(3, 3)), Err(Error::Domain { .. })));
    }

    #[test]
    fn dependent_basis_rejected() {
        let x = unit(3, 0, 1) - unit(3, 1, 0);
        assert!(LieAlgebraBasis::new("bad", vec![x.clone(), x * 2.0], None).is_err());
    }
}
