//! The dynamical maps: rational maps given by a coprime polynomial pair, and
//! the exponential family `z ↦ λ·e^z`.

use std::fmt;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::poly::{normalized_resultant, Polynomial};
use crate::scalar::{cone, czero, Real, C};
use crate::sphere::{spherical_distance, SpherePoint};

/// Rational map `p/q` with cached charts at infinity.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalMap<T = f64> {
    num: Polynomial<T>,
    den: Polynomial<T>,
    degree: usize,
    num_inf: Polynomial<T>,
    den_inf: Polynomial<T>,
}

impl<T: Real> RationalMap<T> {
    fn build(num: Polynomial<T>, den: Polynomial<T>, min_degree: usize) -> Result<Self> {
        if num.is_zero() || den.is_zero() {
            return Err(Error::InvalidMap("zero numerator or denominator".into()));
        }
        let degree = num.degree().max(den.degree());
        if degree < min_degree {
            return Err(Error::InvalidMap(format!(
                "degree {degree} below the required {min_degree}"
            )));
        }
        let res = normalized_resultant(&num, &den);
        if !(res > T::lit(1e-12)) {
            return Err(Error::InvalidMap(format!(
                "numerator and denominator share a root (normalized resultant {res})"
            )));
        }
        Ok(RationalMap {
            num_inf: num.reversed(degree),
            den_inf: den.reversed(degree),
            num,
            den,
            degree,
        })
    }

    pub fn numerator(&self) -> &Polynomial<T> {
        &self.num
    }

    pub fn denominator(&self) -> &Polynomial<T> {
        &self.den
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// The pair `(P, Q)` representing the map in the chart of the source point.
    fn chart_pair(&self, inverted: bool) -> (&Polynomial<T>, &Polynomial<T>) {
        if inverted {
            (&self.num_inf, &self.den_inf)
        } else {
            (&self.num, &self.den)
        }
    }
}

/// A holomorphic self-map of the sphere (rational) or of the plane (exponential family).
#[derive(Clone, Debug, PartialEq)]
pub enum HolomorphicMap<T = f64> {
    Rational(RationalMap<T>),
    /// `z ↦ λ·e^z`, defined on `ℂ` only.
    Exp(C<T>),
}

/// A critical point with its local multiplicity (order of vanishing of `f'`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticalPoint<T = f64> {
    pub point: SpherePoint<T>,
    pub multiplicity: usize,
}

/// A forward orbit segment.
#[derive(Clone, Debug, PartialEq)]
pub struct Orbit<T = f64> {
    pub start: SpherePoint<T>,
    pub points: Vec<SpherePoint<T>>,
    /// The orbit left the domain of definition before the requested length.
    pub truncated: bool,
}

impl<T: Real> HolomorphicMap<T> {
    /// A rational map of degree at least two with coprime numerator and denominator.
    pub fn rational(num: Polynomial<T>, den: Polynomial<T>) -> Result<Self> {
        Ok(HolomorphicMap::Rational(RationalMap::build(num, den, 2)?))
    }

    /// Like [`HolomorphicMap::rational`] but accepts Möbius maps (degree one).
    /// Elementary maps are useful for compositions and tests.
    pub fn rational_any_degree(num: Polynomial<T>, den: Polynomial<T>) -> Result<Self> {
        Ok(HolomorphicMap::Rational(RationalMap::build(num, den, 1)?))
    }

    /// The polynomial with the given descending coefficients.
    pub fn polynomial(descending: &[C<T>]) -> Result<Self> {
        Self::rational(
            Polynomial::from_descending(descending.to_vec()),
            Polynomial::constant(cone()),
        )
    }

    /// `z² + c`.
    pub fn quadratic(c: C<T>) -> Self {
        Self::polynomial(&[cone(), czero(), c]).expect("z^2 + c is a valid map")
    }

    pub fn exp_family(lambda: C<T>) -> Result<Self> {
        if lambda == czero() || !(lambda.re.is_finite() && lambda.im.is_finite()) {
            return Err(Error::InvalidMap(
                "exponential family needs finite λ ≠ 0".into(),
            ));
        }
        Ok(HolomorphicMap::Exp(lambda))
    }

    pub fn is_exp(&self) -> bool {
        matches!(self, HolomorphicMap::Exp(_))
    }

    pub fn degree(&self) -> Option<usize> {
        match self {
            HolomorphicMap::Rational(r) => Some(r.degree),
            HolomorphicMap::Exp(_) => None,
        }
    }

    pub fn evaluate(&self, z: &SpherePoint<T>) -> Result<SpherePoint<T>> {
        match self {
            HolomorphicMap::Rational(r) => {
                let (w, inv) = z.chart();
                let (p, q) = r.chart_pair(inv);
                Ok(SpherePoint::from_homogeneous(p.eval(w), q.eval(w)))
            }
            HolomorphicMap::Exp(lambda) => {
                let z = exp_domain(z)?;
                Ok(SpherePoint::new(*lambda * z.exp()))
            }
        }
    }

    /// Norm of the derivative with respect to the spherical metric on both sides.
    pub fn spherical_derivative(&self, z: &SpherePoint<T>) -> Result<T> {
        match self {
            HolomorphicMap::Rational(r) => {
                let (w, inv) = z.chart();
                let (p, q) = r.chart_pair(inv);
                let (pv, dp) = p.eval_with_derivative(w);
                let (qv, dq) = q.eval_with_derivative(w);
                let wr = dp * qv - pv * dq;
                Ok(wr.norm() * (T::one() + w.norm_sqr()) / (pv.norm_sqr() + qv.norm_sqr()))
            }
            HolomorphicMap::Exp(lambda) => {
                let z = exp_domain(z)?;
                let log_a = lambda.norm().ln() + z.re;
                Ok((T::one() + z.norm_sqr()) / (T::lit(2.0) * log_a.cosh()))
            }
        }
    }

    /// Ordinary derivative `f'(z)` at a finite point (infinite at poles).
    pub fn derivative(&self, z: C<T>) -> C<T> {
        match self {
            HolomorphicMap::Rational(r) => {
                let (pv, dp) = r.num.eval_with_derivative(z);
                let (qv, dq) = r.den.eval_with_derivative(z);
                (dp * qv - pv * dq) / (qv * qv)
            }
            HolomorphicMap::Exp(lambda) => *lambda * z.exp(),
        }
    }

    /// Spherical derivative of the `n`-th iterate by the chain rule along the orbit.
    pub fn iterate_spherical_derivative(&self, z: &SpherePoint<T>, n: usize) -> Result<T> {
        let mut p = *z;
        let mut acc = T::one();
        for _ in 0..n {
            acc *= self.spherical_derivative(&p)?;
            p = self.evaluate(&p)?;
        }
        Ok(acc)
    }

    /// Euclidean derivative modulus of the `n`-th iterate; all orbit points must be finite.
    pub fn iterate_euclidean_derivative(&self, z: &SpherePoint<T>, n: usize) -> Result<T> {
        let mut p = *z;
        let mut acc = T::one();
        for _ in 0..n {
            let w = p
                .finite()
                .ok_or_else(|| Error::DomainError("orbit reaches infinity".into()))?;
            acc *= self.derivative(w).norm();
            p = self.evaluate(&p)?;
        }
        Ok(acc)
    }

    /// Critical points on the sphere, multiplicities merged within `1e-6`.
    pub fn critical_points(&self) -> Result<Vec<CriticalPoint<T>>> {
        let r = match self {
            HolomorphicMap::Rational(r) => r,
            HolomorphicMap::Exp(_) => return Ok(Vec::new()),
        };
        let wronskian = |p: &Polynomial<T>, q: &Polynomial<T>| {
            p.derivative().mul(q).sub(&p.mul(&q.derivative()))
        };
        let trim = T::tol(1e-13);
        let finite = wronskian(&r.num, &r.den).trimmed(trim);
        let mut out: Vec<CriticalPoint<T>> = Vec::new();
        for z in finite.roots()? {
            let p = SpherePoint::new(z);
            match out
                .iter_mut()
                .find(|c| spherical_distance(&c.point, &p) < T::lit(1e-6))
            {
                Some(c) => c.multiplicity += 1,
                None => out.push(CriticalPoint {
                    point: p,
                    multiplicity: 1,
                }),
            }
        }
        let at_inf = wronskian(&r.num_inf, &r.den_inf);
        let cut = trim * at_inf.scale();
        let order = at_inf
            .coeffs()
            .iter()
            .take_while(|c| c.norm() <= cut)
            .count();
        if order > 0 {
            out.push(CriticalPoint {
                point: SpherePoint::Infinity,
                multiplicity: order,
            });
        }
        Ok(out)
    }

    /// Critical values for rational maps; the omitted/asymptotic values `{0, ∞}` for `λe^z`.
    pub fn singular_values(&self) -> Result<Vec<SpherePoint<T>>> {
        match self {
            HolomorphicMap::Exp(_) => Ok(vec![SpherePoint::zero(), SpherePoint::Infinity]),
            HolomorphicMap::Rational(_) => {
                let mut out: Vec<SpherePoint<T>> = Vec::new();
                for c in self.critical_points()? {
                    let v = self.evaluate(&c.point)?;
                    if !out.iter().any(|u| spherical_distance(u, &v) < T::lit(1e-9)) {
                        out.push(v);
                    }
                }
                Ok(out)
            }
        }
    }

    /// All preimages of `w` for rational maps (with multiplicity). For `λe^z`
    /// the logarithm branches with imaginary shift `2πk`, `|k| ≤ 1`.
    pub fn preimages(&self, w: &SpherePoint<T>) -> Result<Vec<SpherePoint<T>>> {
        match self {
            HolomorphicMap::Rational(r) => {
                let mut out = Vec::new();
                let eq = match w.finite() {
                    Some(wv) => r.num.sub(&r.den.scale_by(wv)),
                    None => r.den.clone(),
                };
                let eq = eq.trimmed(T::tol(1e-14));
                for z in eq.roots()? {
                    out.push(SpherePoint::new(z));
                }
                // missing degree means ∞ is a preimage
                for _ in eq.degree()..r.degree {
                    out.push(SpherePoint::Infinity);
                }
                Ok(out)
            }
            HolomorphicMap::Exp(lambda) => {
                let wv = w
                    .finite()
                    .filter(|v| *v != czero())
                    .ok_or_else(|| Error::DomainError("λe^z omits 0 and ∞".into()))?;
                let base = (wv / *lambda).ln();
                Ok((-1..=1)
                    .map(|k| {
                        SpherePoint::new(
                            base + Complex::new(T::zero(), T::TAU() * T::lit(k as f64)),
                        )
                    })
                    .collect())
            }
        }
    }

    /// The preimage of `target` continued from `guess`: Newton's method in the
    /// charts of the guess and the target for rational maps, and the
    /// logarithm branch nearest the guess for `λe^z`.
    pub fn preimage_near(
        &self,
        target: &SpherePoint<T>,
        guess: &SpherePoint<T>,
        tol: T,
    ) -> Result<SpherePoint<T>> {
        match self {
            HolomorphicMap::Exp(lambda) => {
                let wv = target
                    .finite()
                    .filter(|v| *v != czero())
                    .ok_or_else(|| Error::DomainError("λe^z omits 0 and ∞".into()))?;
                let g = exp_domain(guess)?;
                let base = (wv / *lambda).ln();
                let k = ((g.im - base.im) / T::TAU()).round();
                Ok(SpherePoint::new(Complex::new(
                    base.re,
                    base.im + k * T::TAU(),
                )))
            }
            HolomorphicMap::Rational(r) => newton_preimage(r, target, guess, tol),
        }
    }

    pub fn iterate_orbit(&self, z0: &SpherePoint<T>, n: usize) -> Orbit<T> {
        let mut points = vec![*z0];
        let mut truncated = false;
        for _ in 0..n {
            match self.evaluate(points.last().unwrap()) {
                Ok(next) => points.push(next),
                Err(_) => {
                    truncated = true;
                    break;
                }
            }
        }
        Orbit {
            start: *z0,
            points,
            truncated,
        }
    }

    /// `f ∘ g` for rational maps.
    pub fn compose(&self, g: &HolomorphicMap<T>) -> Result<HolomorphicMap<T>> {
        let (HolomorphicMap::Rational(f), HolomorphicMap::Rational(g)) = (self, g) else {
            return Err(Error::DomainError(
                "composition needs two rational maps".into(),
            ));
        };
        let d = f.degree;
        let (a, b) = (&g.num, &g.den);
        let mut num = Polynomial::constant(czero());
        let mut den = Polynomial::constant(czero());
        for i in 0..=d {
            let term = a.pow(i).mul(&b.pow(d - i));
            num = num.add(&term.scale_by(f.num.coeff(i)));
            den = den.add(&term.scale_by(f.den.coeff(i)));
        }
        Ok(HolomorphicMap::Rational(RationalMap::build(num, den, 1)?))
    }

    /// Canonical literal, e.g. `rational: (1,0,-2)/(1)` or `exp: 0.5+0i`.
    pub fn to_literal(&self) -> String {
        match self {
            HolomorphicMap::Rational(r) => {
                let list = |p: &Polynomial<T>| {
                    p.coeffs()
                        .iter()
                        .rev()
                        .map(|c| format_complex(*c))
                        .collect::<Vec<_>>()
                        .join(",")
                };
                format!("rational: ({})/({})", list(&r.num), list(&r.den))
            }
            HolomorphicMap::Exp(l) => format!("exp: {}", format_complex(*l)),
        }
    }

    /// Parses `rational: (a_d,…,a_0)/(b_e,…,b_0)` with coefficients listed from
    /// the highest degree down, or `exp: λ`. Complex coefficients are written
    /// `x`, `x+yi`, `x-yi`, `yi` or `i`. A bare `(…)` without a denominator is
    /// a polynomial.
    pub fn parse(literal: &str) -> Result<Self> {
        let bad = |msg: &str| Error::ConfigParseError(format!("map literal {literal:?}: {msg}"));
        let (kind, body) = literal
            .split_once(':')
            .ok_or_else(|| bad("missing `kind:` prefix"))?;
        let body = body.trim();
        match kind.trim() {
            "exp" => Self::exp_family(parse_complex(body).ok_or_else(|| bad("bad λ"))?)
                .map_err(|e| bad(&e.to_string())),
            "rational" => {
                let (n, d) = match body.split_once('/') {
                    Some((n, d)) => (n.trim(), Some(d.trim())),
                    None => (body, None),
                };
                let list = |s: &str| -> Result<Polynomial<T>> {
                    let inner = s
                        .strip_prefix('(')
                        .and_then(|s| s.strip_suffix(')'))
                        .ok_or_else(|| bad("coefficient list must be parenthesised"))?;
                    let coeffs = inner
                        .split(',')
                        .map(|c| parse_complex(c.trim()).ok_or_else(|| bad("bad coefficient")))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(Polynomial::from_descending(coeffs))
                };
                let num = list(n)?;
                let den = match d {
                    Some(d) => list(d)?,
                    None => Polynomial::constant(cone()),
                };
                Self::rational(num, den).map_err(|e| bad(&e.to_string()))
            }
            other => Err(bad(&format!("unknown map kind {other:?}"))),
        }
    }
}

impl<T: Real> fmt::Display for HolomorphicMap<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_literal())
    }
}

fn exp_domain<T: Real>(z: &SpherePoint<T>) -> Result<C<T>> {
    z.finite()
        .ok_or_else(|| Error::DomainError("λe^z is undefined at ∞".into()))
}

fn newton_preimage<T: Real>(
    r: &RationalMap<T>,
    target: &SpherePoint<T>,
    guess: &SpherePoint<T>,
    tol: T,
) -> Result<SpherePoint<T>> {
    let (t, target_inv) = target.chart();
    let residual = |u: &SpherePoint<T>| -> T {
        let (w, inv) = u.chart();
        let (p, q) = r.chart_pair(inv);
        spherical_distance(&SpherePoint::from_homogeneous(p.eval(w), q.eval(w)), target)
    };
    let floor = tol.max(T::epsilon() * T::lit(64.0));
    let mut u = *guess;
    let mut res = residual(&u);
    for _ in 0..200 {
        if res <= tol {
            return Ok(u);
        }
        let (w, inv) = u.chart();
        let (p, q) = r.chart_pair(inv);
        let (pv, dp) = p.eval_with_derivative(w);
        let (qv, dq) = q.eval_with_derivative(w);
        // polynomial form of f(u) = target, free of poles
        let (h, dh) = if target_inv {
            (qv - pv * t, dq - dp * t)
        } else {
            (pv - qv * t, dp - dq * t)
        };
        let step = h / dh;
        if !(step.re.is_finite() && step.im.is_finite()) {
            break;
        }
        let mut scale = T::one();
        let mut accepted = None;
        for _ in 0..30 {
            let cand = SpherePoint::from_chart(w - step * scale, inv);
            let r2 = residual(&cand);
            if r2 < res {
                accepted = Some((cand, r2));
                break;
            }
            scale *= T::lit(0.5);
        }
        match accepted {
            Some((cand, r2)) => {
                u = cand;
                res = r2;
            }
            None => break,
        }
    }
    if res <= floor {
        return Ok(u);
    }
    Err(Error::NewtonDivergence(format!(
        "no preimage of {target} near {guess} to tolerance {tol}"
    )))
}

pub(crate) fn parse_complex<T: Real>(s: &str) -> Option<C<T>> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return None;
    }
    let num = |x: &str| -> Option<T> { x.parse::<f64>().ok().map(T::lit) };
    if let Some(body) = s.strip_suffix('i') {
        let bytes = body.as_bytes();
        let split = (1..bytes.len()).rev().find(|&k| {
            (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E')
        });
        let imag = |x: &str| -> Option<T> {
            match x {
                "" | "+" => Some(T::one()),
                "-" => Some(-T::one()),
                _ => num(x),
            }
        };
        match split {
            Some(k) => Some(Complex::new(num(&body[..k])?, imag(&body[k..])?)),
            None => Some(Complex::new(T::zero(), imag(body)?)),
        }
    } else {
        Some(Complex::new(num(&s)?, T::zero()))
    }
}

pub(crate) fn format_complex<T: Real>(c: C<T>) -> String {
    let (re, im) = (c.re.as_f64(), c.im.as_f64());
    if im == 0.0 {
        format!("{re}")
    } else if im < 0.0 {
        format!("{re}{im}i")
    } else {
        format!("{re}+{im}i")
    }
}
