//! Dense complex polynomials and a simultaneous root finder.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{cast_c, cone, czero, Real, C};

/// Polynomial with coefficients stored in ascending degree.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial<T> {
    coeffs: Vec<C<T>>,
}

impl<T: Real> Polynomial<T> {
    /// Builds from ascending coefficients; trailing exact zeros are dropped.
    pub fn new(mut coeffs: Vec<C<T>>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == czero() {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(czero());
        }
        Polynomial { coeffs }
    }

    pub fn from_descending(mut coeffs: Vec<C<T>>) -> Self {
        coeffs.reverse();
        Self::new(coeffs)
    }

    pub fn constant(c: C<T>) -> Self {
        Self::new(vec![c])
    }

    /// The monomial `z`.
    pub fn identity() -> Self {
        Self::new(vec![czero(), cone()])
    }

    pub fn coeffs(&self) -> &[C<T>] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == czero()
    }

    pub fn leading(&self) -> C<T> {
        *self.coeffs.last().unwrap()
    }

    /// Coefficient of `z^k`, zero past the degree.
    pub fn coeff(&self, k: usize) -> C<T> {
        self.coeffs.get(k).copied().unwrap_or_else(czero)
    }

    /// Largest coefficient modulus.
    pub fn scale(&self) -> T {
        self.coeffs.iter().map(|c| c.norm()).fold(T::zero(), T::max)
    }

    pub fn eval(&self, z: C<T>) -> C<T> {
        self.coeffs
            .iter()
            .rev()
            .fold(czero(), |acc, &c| acc * z + c)
    }

    /// Value and first derivative in one Horner pass.
    pub fn eval_with_derivative(&self, z: C<T>) -> (C<T>, C<T>) {
        let mut p = czero();
        let mut dp = czero();
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    /// `Σ |a_k| |z|^k`, the natural scale for relative residuals.
    pub fn abs_eval(&self, z: C<T>) -> T {
        let r = z.norm();
        self.coeffs
            .iter()
            .rev()
            .fold(T::zero(), |acc, c| acc * r + c.norm())
    }

    pub fn derivative(&self) -> Self {
        if self.degree() == 0 {
            return Self::constant(czero());
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * T::lit(k as f64))
                .collect(),
        )
    }

    /// `z^d p(1/z)`, the polynomial in the chart at infinity. `d` must be at least the degree.
    pub fn reversed(&self, d: usize) -> Self {
        let mut out = vec![czero(); d + 1];
        for (k, &c) in self.coeffs.iter().enumerate() {
            out[d - k] = c;
        }
        Self::new(out)
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|k| self.coeff(k) + other.coeff(k)).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|k| self.coeff(k) - other.coeff(k)).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = vec![czero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn scale_by(&self, c: C<T>) -> Self {
        Self::new(self.coeffs.iter().map(|&a| a * c).collect())
    }

    pub fn pow(&self, k: usize) -> Self {
        (0..k).fold(Self::constant(cone()), |acc, _| acc.mul(self))
    }

    /// Drops trailing coefficients whose modulus is below `rel · scale`.
    pub fn trimmed(&self, rel: T) -> Self {
        let cut = rel * self.scale();
        let mut c = self.coeffs.clone();
        while c.len() > 1 && c.last().unwrap().norm() <= cut {
            c.pop();
        }
        Self::new(c)
    }

    /// Relative backward error of `z` as a root.
    pub fn relative_residual(&self, z: C<T>) -> T {
        let s = self.abs_eval(z);
        if s == T::zero() {
            return T::zero();
        }
        self.eval(z).norm() / s
    }

    /// All roots with multiplicity, by Aberth–Ehrlich iteration; falls back to
    /// companion-matrix eigenvalues when the iteration stalls. Every root is
    /// checked to relative residual below `1e-10`.
    pub fn roots(&self) -> Result<Vec<C<T>>> {
        let d = self.degree();
        if d == 0 {
            return Ok(Vec::new());
        }
        if self.leading() == czero() {
            return Err(Error::RootFindingFailure("zero leading coefficient".into()));
        }
        let tol = T::tol(1e-10);
        // exact zero roots are split off before iterating
        let zeros = self.coeffs.iter().take_while(|c| **c == czero()).count();
        let rest = Polynomial::new(self.coeffs[zeros..].to_vec());
        let mut roots = vec![czero(); zeros];
        if rest.degree() > 0 {
            let found = match aberth(&rest) {
                Some(r) => r,
                None => companion_roots(&rest)?,
            };
            roots.extend(found.into_iter().map(|z| polish(&rest, z)));
        }
        for z in &roots {
            let res = self.relative_residual(*z);
            if !(res < tol) {
                return Err(Error::RootFindingFailure(format!(
                    "root {z} has relative residual {res}"
                )));
            }
        }
        Ok(roots)
    }

    pub fn cast<U: Real>(&self) -> Polynomial<U> {
        Polynomial::new(self.coeffs.iter().map(|&c| cast_c(c)).collect())
    }
}

fn polish<T: Real>(p: &Polynomial<T>, mut z: C<T>) -> C<T> {
    for _ in 0..3 {
        let (v, dv) = p.eval_with_derivative(z);
        if dv == czero() || v == czero() {
            break;
        }
        let next = z - v / dv;
        if p.relative_residual(next) < p.relative_residual(z) {
            z = next;
        } else {
            break;
        }
    }
    z
}

fn aberth<T: Real>(p: &Polynomial<T>) -> Option<Vec<C<T>>> {
    let d = p.degree();
    let lead = p.leading().norm();
    // Cauchy bound on root moduli
    let bound = T::one()
        + p.coeffs[..d]
            .iter()
            .map(|c| c.norm() / lead)
            .fold(T::zero(), T::max);
    let radius = bound * T::lit(0.5);
    let offset = T::lit(0.4);
    let mut z: Vec<C<T>> = (0..d)
        .map(|k| {
            let angle = T::TAU() * T::lit(k as f64) / T::lit(d as f64) + offset;
            Complex::from_polar(radius, angle)
        })
        .collect();
    let eps = T::epsilon() * T::lit(8.0);
    for _ in 0..1000 {
        let mut converged = true;
        for i in 0..d {
            let (v, dv) = p.eval_with_derivative(z[i]);
            if v == czero() {
                continue;
            }
            let ratio = v / dv;
            let repulsion: C<T> = (0..d)
                .filter(|&j| j != i)
                .map(|j| {
                    let diff = z[i] - z[j];
                    if diff == czero() {
                        czero()
                    } else {
                        diff.inv()
                    }
                })
                .fold(czero(), |a, b| a + b);
            let denom = cone::<T>() - ratio * repulsion;
            let step = if denom == czero() {
                ratio
            } else {
                ratio / denom
            };
            if !(step.re.is_finite() && step.im.is_finite()) {
                return None;
            }
            z[i] -= step;
            if step.norm() > eps * (T::one() + z[i].norm()) {
                converged = false;
            }
        }
        if converged {
            return Some(z);
        }
    }
    let tol = T::tol(1e-10);
    if z.iter().all(|&r| p.relative_residual(r) < tol) {
        Some(z)
    } else {
        None
    }
}

fn companion_roots<T: Real>(p: &Polynomial<T>) -> Result<Vec<C<T>>> {
    let d = p.degree();
    let lead: Complex<f64> = cast_c(p.leading());
    let mut m = DMatrix::<Complex<f64>>::zeros(d, d);
    for i in 1..d {
        m[(i, i - 1)] = Complex::new(1.0, 0.0);
    }
    for i in 0..d {
        let c: Complex<f64> = cast_c(p.coeff(i));
        m[(i, d - 1)] = -c / lead;
    }
    let eig = m
        .schur()
        .eigenvalues()
        .ok_or_else(|| Error::RootFindingFailure("companion eigenvalues unavailable".into()))?;
    Ok(eig.iter().map(|&z| cast_c(z)).collect())
}

/// Sylvester resultant of two polynomials, computed after normalising each to unit scale.
pub fn normalized_resultant<T: Real>(p: &Polynomial<T>, q: &Polynomial<T>) -> T {
    let (m, n) = (p.degree(), q.degree());
    if m == 0 && n == 0 {
        return T::one();
    }
    let (sp, sq) = (p.scale().as_f64(), q.scale().as_f64());
    let size = m + n;
    let mut s = DMatrix::<Complex<f64>>::zeros(size, size);
    for row in 0..n {
        for k in 0..=m {
            let c: Complex<f64> = cast_c(p.coeff(m - k));
            s[(row, row + k)] = c / sp;
        }
    }
    for row in 0..m {
        for k in 0..=n {
            let c: Complex<f64> = cast_c(q.coeff(n - k));
            s[(n + row, row + k)] = c / sq;
        }
    }
    T::lit(s.determinant().norm())
}
