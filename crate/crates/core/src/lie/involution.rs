use nalgebra::DMatrix;

use super::algebra::LieAlgebraBasis;
use crate::error::{Error, Result};
use crate::linalg::{commutator, C64};

#[derive(Clone, Debug)]
pub enum Involution {
    Identity,
    /// X -> P X P^{-1}.
    Conjugation { p: DMatrix<f64>, p_inv: DMatrix<f64> },
    /// X -> -M X^T M^{-1}.
    NegTranspose { m: DMatrix<f64>, m_inv: DMatrix<f64> },
    /// First apply the second map, then the first.
    Composite(Box<Involution>, Box<Involution>),
    /// Diagonal action in the algebra's own basis.
    BasisSigns(Vec<f64>),
}

impl Involution {
    pub fn conjugation(p: DMatrix<f64>) -> Result<Self> {
        let p_inv = p.clone().try_inverse().ok_or_else(|| Error::Validation("singular conjugating matrix".into()))?;
        Ok(Involution::Conjugation { p, p_inv })
    }

    pub fn neg_transpose(m: DMatrix<f64>) -> Result<Self> {
        let m_inv = m.clone().try_inverse().ok_or_else(|| Error::Validation("singular form matrix".into()))?;
        Ok(Involution::NegTranspose { m, m_inv })
    }

    pub fn compose(a: Involution, b: Involution) -> Self {
        Involution::Composite(Box::new(a), Box::new(b))
    }

    /// The conjugating matrix, when the map is Ad_P.
    pub fn matrix(&self) -> Option<&DMatrix<f64>> {
        match self {
            Involution::Conjugation { p, .. } => Some(p),
            _ => None,
        }
    }

    pub fn apply(&self, alg: &LieAlgebraBasis, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Involution::Identity => x.clone(),
            Involution::Conjugation { p, p_inv } => p * x * p_inv,
            Involution::NegTranspose { m, m_inv } => -(m * x.transpose() * m_inv),
            Involution::Composite(a, b) => a.apply(alg, &b.apply(alg, x)),
            Involution::BasisSigns(signs) => {
                let (c, _) = alg.coords_with_residual(x);
                let c = c.zip_map(&nalgebra::DVector::from_column_slice(signs), |a, s| a * s);
                alg.element(&c)
            }
        }
    }

    /// Complex-linear extension, acting on real and imaginary parts.
    pub fn apply_complex(&self, alg: &LieAlgebraBasis, z: &DMatrix<C64>) -> DMatrix<C64> {
        let re = self.apply(alg, &z.map(|c| c.re));
        let im = self.apply(alg, &z.map(|c| c.im));
        re.zip_map(&im, C64::new)
    }

    /// Matrix of the action in basis coordinates.
    pub fn coordinate_matrix(&self, alg: &LieAlgebraBasis) -> DMatrix<f64> {
        let d = alg.dim();
        if let Involution::BasisSigns(s) = self {
            return DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(s));
        }
        let mut t = DMatrix::zeros(d, d);
        for (j, b) in alg.basis.iter().enumerate() {
            let (c, _) = alg.coords_with_residual(&self.apply(alg, b));
            t.set_column(j, &c);
        }
        t
    }

    /// Check that the map preserves the algebra, squares to one and respects
    /// brackets on all basis pairs.
    pub fn validate(&self, alg: &LieAlgebraBasis, label: &str) -> Result<()> {
        if let Involution::BasisSigns(s) = self {
            if s.len() != alg.dim() || s.iter().any(|v| v.abs() != 1.0) {
                return Err(Error::Validation(format!("{label}: sign vector does not match the basis")));
            }
        }
        let images: Vec<DMatrix<f64>> = alg.basis.iter().map(|b| self.apply(alg, b)).collect();
        for (b, im) in alg.basis.iter().zip(&images) {
            let (_, res) = alg.coords_with_residual(im);
            if res > 1e-10 {
                return Err(Error::Validation(format!("{label} does not preserve {} (residual {res:.3e})", alg.name)));
            }
            let back = self.apply(alg, im);
            let r = (&back - b).norm();
            if r > 1e-10 {
                return Err(Error::Validation(format!("{label}^2 != id (residual {r:.3e})")));
            }
        }
        for i in 0..alg.dim() {
            for j in (i + 1)..alg.dim() {
                let lhs = self.apply(alg, &commutator(&alg.basis[i], &alg.basis[j]));
                let rhs = commutator(&images[i], &images[j]);
                let r = (lhs - rhs).norm();
                if r > 1e-10 {
                    return Err(Error::Validation(format!("{label}([X,Y]) != [{label}X,{label}Y] (residual {r:.3e})")));
                }
            }
        }
        Ok(())
    }
}
