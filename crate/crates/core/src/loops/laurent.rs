use nalgebra::{ComplexField, DMatrix};

use crate::linalg::C64;

/// Scalars a loop may carry: real or complex.
pub trait Scalar: ComplexField<RealField = f64> + Copy {
    fn to_c64(self) -> C64;
    /// Real part for real scalars.
    fn from_c64(c: C64) -> Self;
}

impl Scalar for f64 {
    fn to_c64(self) -> C64 {
        C64::new(self, 0.0)
    }
    fn from_c64(c: C64) -> Self {
        c.re
    }
}

impl Scalar for C64 {
    fn to_c64(self) -> C64 {
        self
    }
    fn from_c64(c: C64) -> Self {
        c
    }
}

pub const DEFAULT_ANNULUS: (f64, f64) = (0.5, 2.0);

/// Truncated Laurent series sum_{i=a}^{b} c_i lambda^i with a certified bound
/// on the discarded tail over the annulus r_- <= |lambda| <= r_+.
#[derive(Clone, Debug, PartialEq)]
pub struct LaurentLoop<T: Scalar> {
    pub low: i32,
    pub coeffs: Vec<DMatrix<T>>,
    pub trunc_bound: f64,
    pub annulus: (f64, f64),
}

fn radius_weight(annulus: (f64, f64), i: i32) -> f64 {
    annulus.0.powi(i).max(annulus.1.powi(i))
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |a, b| a * b as f64)
}

impl<T: Scalar> LaurentLoop<T> {
    pub fn new(low: i32, coeffs: Vec<DMatrix<T>>) -> Self {
        assert!(!coeffs.is_empty(), "a loop needs at least one coefficient");
        LaurentLoop { low, coeffs, trunc_bound: 0.0, annulus: DEFAULT_ANNULUS }
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(DMatrix::identity(n, n))
    }

    pub fn constant(c: DMatrix<T>) -> Self {
        Self::new(0, vec![c])
    }

    pub fn monomial(c: DMatrix<T>, degree: i32) -> Self {
        Self::new(degree, vec![c])
    }

    pub fn high(&self) -> i32 {
        self.low + self.coeffs.len() as i32 - 1
    }

    pub fn window(&self) -> (i32, i32) {
        (self.low, self.high())
    }

    pub fn size(&self) -> usize {
        self.coeffs[0].nrows()
    }

    pub fn coeff(&self, i: i32) -> DMatrix<T> {
        if i < self.low || i > self.high() {
            DMatrix::zeros(self.size(), self.size())
        } else {
            self.coeffs[(i - self.low) as usize].clone()
        }
    }

    pub fn coeff_ref(&self, i: i32) -> Option<&DMatrix<T>> {
        if i < self.low || i > self.high() {
            None
        } else {
            Some(&self.coeffs[(i - self.low) as usize])
        }
    }

    pub fn evaluate(&self, lambda: C64) -> DMatrix<C64> {
        let n = self.size();
        let mut out = DMatrix::<C64>::zeros(n, n);
        for (k, c) in self.coeffs.iter().enumerate() {
            let w = lambda.powi(self.low + k as i32);
            out += c.map(|v| v.to_c64() * w);
        }
        out
    }

    pub fn evaluate_scalar(&self, lambda: T) -> DMatrix<T> {
        let n = self.size();
        let mut out = DMatrix::<T>::zeros(n, n);
        for (k, c) in self.coeffs.iter().enumerate() {
            let i = self.low + k as i32;
            let w = if i >= 0 { lambda.powi(i) } else { lambda.recip().powi(-i) };
            out += c * w;
        }
        out
    }

    /// sum |c_i| max(r_-^i, r_+^i): a bound on the sup norm over the annulus.
    pub fn sup_norm(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c.norm() * radius_weight(self.annulus, self.low + k as i32))
            .sum()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.size();
        let len = self.coeffs.len() + other.coeffs.len() - 1;
        let mut coeffs = vec![DMatrix::<T>::zeros(n, n); len];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        let bound = self.sup_norm() * other.trunc_bound
            + other.sup_norm() * self.trunc_bound
            + self.trunc_bound * other.trunc_bound;
        LaurentLoop { low: self.low + other.low, coeffs, trunc_bound: bound, annulus: self.annulus }
    }

    pub fn add(&self, other: &Self) -> Self {
        let lo = self.low.min(other.low);
        let hi = self.high().max(other.high());
        let coeffs = (lo..=hi).map(|i| self.coeff(i) + other.coeff(i)).collect();
        LaurentLoop { low: lo, coeffs, trunc_bound: self.trunc_bound + other.trunc_bound, annulus: self.annulus }
    }

    pub fn scale(&self, s: T) -> Self {
        LaurentLoop {
            low: self.low,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
            trunc_bound: self.trunc_bound * s.modulus(),
            annulus: self.annulus,
        }
    }

    /// Right multiplication by a constant matrix.
    pub fn mul_const(&self, m: &DMatrix<T>) -> Self {
        LaurentLoop {
            low: self.low,
            coeffs: self.coeffs.iter().map(|c| c * m).collect(),
            trunc_bound: self.trunc_bound * m.norm(),
            annulus: self.annulus,
        }
    }

    pub fn const_mul(&self, m: &DMatrix<T>) -> Self {
        LaurentLoop {
            low: self.low,
            coeffs: self.coeffs.iter().map(|c| m * c).collect(),
            trunc_bound: self.trunc_bound * m.norm(),
            annulus: self.annulus,
        }
    }

    /// Keep degrees in [lo, hi]; the dropped mass is added to the bound.
    pub fn truncate(&self, lo: i32, hi: i32) -> Self {
        let n = self.size();
        let mut dropped = 0.0;
        for (k, c) in self.coeffs.iter().enumerate() {
            let i = self.low + k as i32;
            if i < lo || i > hi {
                dropped += c.norm() * radius_weight(self.annulus, i);
            }
        }
        let coeffs: Vec<DMatrix<T>> = (lo..=hi).map(|i| self.coeff(i)).collect();
        let coeffs = if coeffs.is_empty() { vec![DMatrix::zeros(n, n)] } else { coeffs };
        LaurentLoop { low: lo, coeffs, trunc_bound: self.trunc_bound + dropped, annulus: self.annulus }
    }

    /// Largest coefficient difference over the union of windows.
    pub fn max_coeff_diff(&self, other: &Self) -> f64 {
        let lo = self.low.min(other.low);
        let hi = self.high().max(other.high());
        (lo..=hi).map(|i| (self.coeff(i) - other.coeff(i)).norm()).fold(0.0, f64::max)
    }

    /// exp(lambda^s psi) truncated after `terms` powers of psi.
    pub fn exp_monomial(psi: &DMatrix<T>, s: i32, terms: usize, annulus: (f64, f64)) -> Self {
        assert!(s == 1 || s == -1, "exp_monomial takes lambda or 1/lambda");
        let n = psi.nrows();
        let mut powers = vec![DMatrix::<T>::identity(n, n)];
        for k in 1..=terms {
            let next = &powers[k - 1] * psi * T::from_real(1.0 / k as f64);
            powers.push(next);
        }
        let coeffs: Vec<DMatrix<T>> = if s == 1 { powers } else { powers.into_iter().rev().collect() };
        let low = if s == 1 { 0 } else { -(terms as i32) };
        let t = psi.norm() * radius_weight(annulus, s);
        let tail = t.powi(terms as i32 + 1) / factorial(terms + 1) * t.exp();
        LaurentLoop { low, coeffs, trunc_bound: tail, annulus }
    }

    /// exp of a loop, truncated to degrees [-max_degree, max_degree].
    pub fn exp(&self, max_degree: i32) -> Self {
        let n = self.size();
        let t = self.sup_norm();
        let mut sum = LaurentLoop { low: 0, coeffs: vec![DMatrix::identity(n, n)], trunc_bound: 0.0, annulus: self.annulus };
        let mut term = sum.clone();
        let mut k = 1usize;
        loop {
            term = term.mul(self).scale(T::from_real(1.0 / k as f64));
            term.trunc_bound = 0.0;
            term = term.truncate(term.low.max(-max_degree), term.high().min(max_degree));
            let discarded = term.trunc_bound;
            term.trunc_bound = 0.0;
            sum = sum.add(&term);
            sum.trunc_bound += discarded;
            let tail = t.powi(k as i32 + 1) / factorial(k + 1) * t.exp();
            if tail < 1e-18 || k > 200 {
                sum.trunc_bound += tail;
                return sum;
            }
            k += 1;
        }
    }

    pub fn map_coeffs(&self, f: impl Fn(i32, &DMatrix<T>) -> DMatrix<T>) -> Self {
        LaurentLoop {
            low: self.low,
            coeffs: self.coeffs.iter().enumerate().map(|(k, c)| f(self.low + k as i32, c)).collect(),
            trunc_bound: self.trunc_bound,
            annulus: self.annulus,
        }
    }

    pub fn to_complex(&self) -> LaurentLoop<C64> {
        LaurentLoop {
            low: self.low,
            coeffs: self.coeffs.iter().map(|c| c.map(|v| v.to_c64())).collect(),
            trunc_bound: self.trunc_bound,
            annulus: self.annulus,
        }
    }
}

/// Sample points used for evaluation checks: unit circle plus real radii.
pub fn sample_lambdas(on_circle: usize, radii: &[f64]) -> Vec<C64> {
    let mut out: Vec<C64> = (0..on_circle)
        .map(|k| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / on_circle as f64))
        .collect();
    out.extend(radii.iter().map(|&r| C64::new(r, 0.0)));
    out
}
