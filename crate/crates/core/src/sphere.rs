//! Geometry of the Riemann sphere with the round metric of curvature +1
//! (great-circle distance, so antipodal points are `π` apart).
//!
//! Points near infinity are handled in the chart `w = 1/z`; every routine
//! switches charts at `|z| = 1`.

use std::fmt;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cone, czero, Real, C};

/// A point of the extended complex plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SpherePoint<T = f64> {
    Finite(C<T>),
    Infinity,
}

impl<T: Real> SpherePoint<T> {
    /// Wraps a complex number; non-finite parts collapse to the single point at infinity.
    pub fn new(z: C<T>) -> Self {
        if z.re.is_finite() && z.im.is_finite() {
            SpherePoint::Finite(z)
        } else {
            SpherePoint::Infinity
        }
    }

    pub fn from_parts(re: T, im: T) -> Self {
        Self::new(Complex::new(re, im))
    }

    pub fn real(x: T) -> Self {
        Self::new(Complex::new(x, T::zero()))
    }

    pub fn zero() -> Self {
        SpherePoint::Finite(czero())
    }

    /// `e^{iφ}` on the unit circle.
    pub fn unit(angle: T) -> Self {
        SpherePoint::Finite(Complex::from_polar(T::one(), angle))
    }

    /// The point `x / y` of projective coordinates `[x : y]`.
    pub fn from_homogeneous(x: C<T>, y: C<T>) -> Self {
        if y == czero() {
            return SpherePoint::Infinity;
        }
        if x.norm() <= y.norm() {
            Self::new(x / y)
        } else {
            let r = y / x;
            if r == czero() {
                SpherePoint::Infinity
            } else {
                Self::new(r.inv())
            }
        }
    }

    /// Projective coordinates scaled so that both entries have modulus at most one.
    pub fn homogeneous(&self) -> (C<T>, C<T>) {
        match *self {
            SpherePoint::Infinity => (cone(), czero()),
            SpherePoint::Finite(z) => {
                if z.norm() <= T::one() {
                    (z, cone())
                } else {
                    (cone(), z.inv())
                }
            }
        }
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, SpherePoint::Infinity)
    }

    pub fn finite(&self) -> Option<C<T>> {
        match *self {
            SpherePoint::Finite(z) => Some(z),
            SpherePoint::Infinity => None,
        }
    }

    /// `1/z`, exchanging `0` and `∞`.
    pub fn recip(&self) -> Self {
        match *self {
            SpherePoint::Infinity => Self::zero(),
            SpherePoint::Finite(z) if z == czero() => SpherePoint::Infinity,
            SpherePoint::Finite(z) => Self::new(z.inv()),
        }
    }

    /// Chart coordinate: `(z, false)` when `|z| ≤ 1`, otherwise `(1/z, true)`.
    pub fn chart(&self) -> (C<T>, bool) {
        match *self {
            SpherePoint::Infinity => (czero(), true),
            SpherePoint::Finite(z) => {
                if z.norm() <= T::one() {
                    (z, false)
                } else {
                    (z.inv(), true)
                }
            }
        }
    }

    /// Inverse of [`SpherePoint::chart`].
    pub fn from_chart(w: C<T>, inverted: bool) -> Self {
        if inverted {
            if w == czero() {
                SpherePoint::Infinity
            } else {
                Self::new(w.inv())
            }
        } else {
            Self::new(w)
        }
    }

    /// Image on the unit sphere in `R³` under inverse stereographic projection.
    pub fn to_unit_vector(&self) -> [T; 3] {
        let (x, y) = self.homogeneous();
        let (nx, ny) = (x.norm_sqr(), y.norm_sqr());
        let s = nx + ny;
        let p = x * y.conj();
        let two = T::lit(2.0);
        [two * p.re / s, two * p.im / s, (nx - ny) / s]
    }

    /// Inverse of [`SpherePoint::to_unit_vector`]; the vector is normalised first.
    pub fn from_unit_vector(v: [T; 3]) -> Self {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let (x, y, z) = (v[0] / n, v[1] / n, v[2] / n);
        let xy = Complex::new(x, y);
        if z < T::zero() {
            Self::from_homogeneous(xy, Complex::new(T::one() - z, T::zero()))
        } else {
            Self::from_homogeneous(Complex::new(T::one() + z, T::zero()), xy.conj())
        }
    }

    pub fn cast<U: Real>(&self) -> SpherePoint<U> {
        match *self {
            SpherePoint::Infinity => SpherePoint::Infinity,
            SpherePoint::Finite(z) => SpherePoint::new(crate::scalar::cast_c(z)),
        }
    }
}

impl<T: Real> From<C<T>> for SpherePoint<T> {
    fn from(z: C<T>) -> Self {
        SpherePoint::new(z)
    }
}

impl<T: Real> fmt::Display for SpherePoint<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpherePoint::Infinity => write!(f, "inf"),
            SpherePoint::Finite(z) => write!(f, "{}{:+}i", z.re, z.im),
        }
    }
}

/// Great-circle distance on the unit sphere, in `[0, π]`.
pub fn spherical_distance<T: Real>(a: &SpherePoint<T>, b: &SpherePoint<T>) -> T {
    let two = T::lit(2.0);
    match (*a, *b) {
        (SpherePoint::Infinity, SpherePoint::Infinity) => T::zero(),
        (SpherePoint::Finite(z), SpherePoint::Infinity)
        | (SpherePoint::Infinity, SpherePoint::Finite(z)) => two * T::one().atan2(z.norm()),
        (SpherePoint::Finite(z), SpherePoint::Finite(w)) => {
            let (zs, ws) = (z.norm() <= T::one(), w.norm() <= T::one());
            let (num, den) = match (zs, ws) {
                (true, true) => (z - w, cone::<T>() + z.conj() * w),
                // z -> 1/z is an isometry
                (false, false) => {
                    let (zi, wi) = (z.inv(), w.inv());
                    (zi - wi, cone::<T>() + zi.conj() * wi)
                }
                (true, false) => {
                    let v = w.inv();
                    (z * v - cone::<T>(), v + z.conj())
                }
                (false, true) => {
                    let v = z.inv();
                    (w * v - cone::<T>(), v + w.conj())
                }
            };
            two * num.norm().atan2(den.norm())
        }
    }
}

/// A Möbius transformation acting on projective coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mobius<T> {
    pub a: C<T>,
    pub b: C<T>,
    pub c: C<T>,
    pub d: C<T>,
}

impl<T: Real> Mobius<T> {
    /// A rotation of the sphere carrying `p` to `0`.
    pub fn centering(p: &SpherePoint<T>) -> Self {
        let one = cone::<T>();
        match *p {
            SpherePoint::Finite(c) if c.norm() <= T::one() => Mobius {
                a: one,
                b: -c,
                c: c.conj(),
                d: one,
            },
            _ => {
                let c = p.recip().finite().unwrap_or_else(czero);
                Mobius {
                    a: -c,
                    b: one,
                    c: one,
                    d: c.conj(),
                }
            }
        }
    }

    pub fn apply(&self, p: &SpherePoint<T>) -> SpherePoint<T> {
        let (x, y) = p.homogeneous();
        SpherePoint::from_homogeneous(self.a * x + self.b * y, self.c * x + self.d * y)
    }

    pub fn inverse(&self) -> Self {
        Mobius {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }
}

/// An open metric disk on the sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphericalDisk<T = f64> {
    pub center: SpherePoint<T>,
    pub radius: T,
}

impl<T: Real> SphericalDisk<T> {
    pub fn new(center: SpherePoint<T>, radius: T) -> Result<Self> {
        if !(radius > T::zero() && radius < T::PI()) {
            return Err(Error::DomainError(format!(
                "disk radius {radius} outside (0, π)"
            )));
        }
        Ok(SphericalDisk { center, radius })
    }

    /// The spherical disk whose trace in the plane is the Euclidean disk
    /// `|z − center| < radius`. The Euclidean disk must not contain infinity,
    /// which it never does; the spherical radius must stay below `π`.
    pub fn from_euclidean(center: C<T>, radius: T) -> Result<Self> {
        let dir = if center.norm() > T::zero() {
            center / center.norm()
        } else {
            cone()
        };
        let along = center.norm();
        let angle = |t: T| T::lit(2.0) * t.atan();
        let (lo, hi) = (angle(along - radius), angle(along + radius));
        let mid = (lo + hi) / T::lit(2.0);
        let c = SpherePoint::new(dir * (mid / T::lit(2.0)).tan());
        SphericalDisk::new(c, (hi - lo) / T::lit(2.0))
    }

    /// Flag used throughout: the disk lies strictly inside a hemisphere.
    pub fn is_simply_connected(&self) -> bool {
        self.radius < T::FRAC_PI_2()
    }

    pub fn contains(&self, p: &SpherePoint<T>) -> bool {
        spherical_distance(&self.center, p) < self.radius
    }

    /// True iff `other` lies inside `self` with at least `margin` to spare.
    pub fn contains_disk(&self, other: &SphericalDisk<T>, margin: T) -> bool {
        spherical_distance(&self.center, &other.center) + other.radius + margin < self.radius
    }

    pub fn scaled(&self, factor: T) -> Self {
        SphericalDisk {
            center: self.center,
            radius: self.radius * factor,
        }
    }

    pub fn doubled(&self) -> Self {
        self.scaled(T::lit(2.0))
    }

    /// The point at distance `dist` from the centre in direction `angle`
    /// (direction measured in the tangent plane at the centre).
    pub fn point_at(&self, dist: T, angle: T) -> SpherePoint<T> {
        offset_point(&self.center, dist, angle)
    }

    pub fn boundary_samples(&self, count: usize) -> Vec<SpherePoint<T>> {
        let step = T::TAU() / T::lit(count as f64);
        (0..count)
            .map(|k| self.point_at(self.radius, step * T::lit(k as f64)))
            .collect()
    }

    /// The centre followed by `rings` concentric rings of `per_ring` points at
    /// radii `radius·i/(rings+1)`. `rings = 3, per_ring = 8` gives 25 points.
    pub fn interior_samples(&self, rings: usize, per_ring: usize) -> Vec<SpherePoint<T>> {
        let mut out = vec![self.center];
        let step = T::TAU() / T::lit(per_ring as f64);
        for i in 1..=rings {
            let r = self.radius * T::lit(i as f64) / T::lit((rings + 1) as f64);
            let shift = step * T::lit(0.5 * (i % 2) as f64);
            for k in 0..per_ring {
                out.push(self.point_at(r, shift + step * T::lit(k as f64)));
            }
        }
        out
    }
}

/// Closures of the two disks are disjoint.
pub fn disk_separation<T: Real>(d1: &SphericalDisk<T>, d2: &SphericalDisk<T>) -> bool {
    spherical_distance(&d1.center, &d2.center) > d1.radius + d2.radius
}

pub fn disk_contains<T: Real>(disk: &SphericalDisk<T>, p: &SpherePoint<T>) -> bool {
    disk.contains(p)
}

/// The point at distance `dist` from `p`, leaving in tangent direction `angle`.
pub fn offset_point<T: Real>(p: &SpherePoint<T>, dist: T, angle: T) -> SpherePoint<T> {
    let m = Mobius::centering(p);
    let w = Complex::from_polar((dist / T::lit(2.0)).tan(), angle);
    m.inverse().apply(&SpherePoint::new(w))
}

/// `count + 1` points along the shorter great-circle arc from `p` to `q`,
/// equally spaced in arc length, endpoints included.
pub fn geodesic<T: Real>(
    p: &SpherePoint<T>,
    q: &SpherePoint<T>,
    count: usize,
) -> Vec<SpherePoint<T>> {
    let count = count.max(1);
    let m = Mobius::centering(p);
    let minv = m.inverse();
    let s = spherical_distance(p, q);
    let dir = match m.apply(q) {
        SpherePoint::Finite(w) if w.norm() > T::zero() => w / w.norm(),
        _ => cone(),
    };
    (0..=count)
        .map(|k| {
            if k == 0 {
                return *p;
            }
            if k == count {
                return *q;
            }
            let sigma = s * T::lit(k as f64) / T::lit(count as f64);
            minv.apply(&SpherePoint::new(dir * (sigma / T::lit(2.0)).tan()))
        })
        .collect()
}

/// A disk containing the region bounded by the closed curve sampled by
/// `ring` (in order). The centre approximates the minimal enclosing one;
/// the radius adds a little over half the largest gap between neighbouring
/// samples to the largest sampled distance, since every point of the curve is
/// within half an arc of a sample and short arcs are nearly chords. The region must not contain the antipode of the
/// centre, which holds whenever the result is simply connected.
pub fn enclosing_disk<T: Real>(ring: &[SpherePoint<T>]) -> SphericalDisk<T> {
    let mut acc = [T::zero(); 3];
    for p in ring {
        let v = p.to_unit_vector();
        for i in 0..3 {
            acc[i] += v[i];
        }
    }
    let norm = (acc[0] * acc[0] + acc[1] * acc[1] + acc[2] * acc[2]).sqrt();
    let mut center = if norm > T::epsilon() {
        SpherePoint::from_unit_vector(acc)
    } else {
        ring[0]
    };
    let mut best = (max_distance(&center, ring), center);
    // Bădoiu–Clarkson steps towards the farthest sample
    for i in 1..=200 {
        let far = ring
            .iter()
            .max_by(|a, b| {
                spherical_distance(&center, a)
                    .partial_cmp(&spherical_distance(&center, b))
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        let (c, f) = (center.to_unit_vector(), far.to_unit_vector());
        let w = T::one() / T::lit((i + 1) as f64);
        center = SpherePoint::from_unit_vector([0, 1, 2].map(|k| c[k] + (f[k] - c[k]) * w));
        let reach = max_distance(&center, ring);
        if reach < best.0 {
            best = (reach, center);
        }
    }
    let (reach, center) = best;
    let gap = (0..ring.len())
        .map(|i| spherical_distance(&ring[i], &ring[(i + 1) % ring.len()]))
        .fold(T::zero(), T::max);
    SphericalDisk {
        center,
        radius: (reach + T::lit(0.55) * gap).max(T::epsilon()),
    }
}

/// Largest distance from `center` to any of `points`.
pub fn max_distance<T: Real>(center: &SpherePoint<T>, points: &[SpherePoint<T>]) -> T {
    points
        .iter()
        .map(|p| spherical_distance(center, p))
        .fold(T::zero(), T::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    type P = SpherePoint<f64>;

    // Independent oracle: embed via the textbook stereographic formulas and take the angle.
    fn embed(p: &P) -> [f64; 3] {
        match p {
            P::Infinity => [0.0, 0.0, 1.0],
            P::Finite(z) => {
                let n = z.norm_sqr();
                [
                    2.0 * z.re / (1.0 + n),
                    2.0 * z.im / (1.0 + n),
                    (n - 1.0) / (n + 1.0),
                ]
            }
        }
    }

    fn oracle_distance(a: &P, b: &P) -> f64 {
        let (u, v) = (embed(a), embed(b));
        let dot: f64 = u.iter().zip(v.iter()).map(|(x, y)| x * y).sum();
        let cross = [
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        ];
        let cn = (cross[0].powi(2) + cross[1].powi(2) + cross[2].powi(2)).sqrt();
        cn.atan2(dot)
    }

    fn pt(re: f64, im: f64) -> P {
        P::from_parts(re, im)
    }

    #[test]
    fn distance_examples() {
        assert_abs_diff_eq!(spherical_distance(&P::zero(), &P::Infinity), PI);
        let z = pt(0.3, -2.0);
        assert_eq!(spherical_distance(&z, &z), 0.0);
        assert_abs_diff_eq!(
            spherical_distance(&P::zero(), &pt(1.0, 0.0)),
            FRAC_PI_2,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            oracle_distance(&P::zero(), &pt(1.0, 0.0)),
            FRAC_PI_2,
            epsilon = 1e-15
        );
    }

    #[test]
    fn disk_examples() {
        let d = SphericalDisk::new(P::zero(), 1.0).unwrap();
        assert!(d.contains(&P::zero()));
        assert!(!d.contains(&P::Infinity));
        let h = SphericalDisk::new(P::zero(), FRAC_PI_2).unwrap();
        assert!(!h.contains(&pt(1.0, 0.0)));
        assert!(!h.is_simply_connected());
        assert!(d.is_simply_connected());
        assert!(SphericalDisk::new(P::zero(), 0.0).is_err());
        assert!(SphericalDisk::new(P::zero(), 4.0).is_err());
    }

    #[test]
    fn separation_examples() {
        let disk = |c: P, r: f64| SphericalDisk::new(c, r).unwrap();
        assert!(disk_separation(
            &disk(P::zero(), 0.1),
            &disk(P::Infinity, 0.1)
        ));
        assert!(!disk_separation(
            &disk(P::zero(), 0.5),
            &disk(P::zero(), 0.5)
        ));
        assert!(disk_separation(
            &disk(P::zero(), 0.3),
            &disk(pt(1.0, 0.0), 0.3)
        ));
    }

    #[test]
    fn offsets_land_at_requested_distance() {
        for c in [
            P::zero(),
            pt(0.4, 0.2),
            pt(3.0, -7.0),
            P::Infinity,
            pt(1.0, 0.0),
        ] {
            let d = SphericalDisk::new(c, 0.7).unwrap();
            for b in d.boundary_samples(16) {
                assert_abs_diff_eq!(oracle_distance(&c, &b), 0.7, epsilon = 1e-12);
            }
            assert_eq!(d.interior_samples(3, 8).len(), 25);
        }
    }

    #[test]
    fn geodesic_is_evenly_spaced() {
        let (p, q) = (pt(0.2, 0.1), pt(-3.0, 4.0));
        let path = geodesic(&p, &q, 10);
        let s = spherical_distance(&p, &q);
        for w in path.windows(2) {
            assert_abs_diff_eq!(spherical_distance(&w[0], &w[1]), s / 10.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn euclidean_disk_conversion() {
        let d = SphericalDisk::from_euclidean(Complex::new(0.5, 0.0), 0.75).unwrap();
        assert_abs_diff_eq!(
            spherical_distance(&d.center, &pt(-0.25, 0.0)),
            d.radius,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            spherical_distance(&d.center, &pt(1.25, 0.0)),
            d.radius,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            spherical_distance(&d.center, &pt(0.5, 0.75)),
            d.radius,
            epsilon = 1e-12
        );
    }

    #[test]
    fn single_precision_distance() {
        let a = SpherePoint::<f32>::zero();
        let b = SpherePoint::<f32>::real(1.0);
        assert!((spherical_distance(&a, &b) - std::f32::consts::FRAC_PI_2).abs() < 1e-6);
    }

    #[test]
    fn triangle_inequality_million_triples() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut draw = || {
            let s = 10f64.powi(rng.random_range(-3..4));
            pt(
                rng.random_range(-3.0..3.0) * s,
                rng.random_range(-3.0..3.0) * s,
            )
        };
        for _ in 0..1_000_000 {
            let (a, b, c) = (draw(), draw(), draw());
            let slack = spherical_distance(&a, &b) + spherical_distance(&b, &c)
                - spherical_distance(&a, &c);
            assert!(slack >= -1e-12);
        }
    }

    #[test]
    fn unit_vector_round_trip() {
        for p in [
            pt(0.3, -2.0),
            pt(0.0, 0.0),
            pt(1e5, 1.0),
            P::Infinity,
            pt(-0.7, 0.7),
        ] {
            let q = P::from_unit_vector(p.to_unit_vector());
            assert!(spherical_distance(&p, &q) < 1e-12, "{p}");
        }
    }

    #[test]
    fn enclosing_disk_covers_a_round_disk() {
        let d = SphericalDisk::new(pt(0.4, 0.2), 0.5).unwrap();
        let e = enclosing_disk(&d.boundary_samples(64));
        assert!(spherical_distance(&e.center, &d.center) < 1e-9);
        assert!(e.radius >= d.radius && e.radius < d.radius * 1.1);
    }

    fn arb_point() -> impl Strategy<Value = P> {
        prop_oneof![
            1 => Just(P::Infinity),
            12 => (-3.0f64..3.0, -3.0f64..3.0, -4i32..4).prop_map(|(r, i, e)| {
                let s = 10f64.powi(e);
                pt(r * s, i * s)
            }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]
        #[test]
        fn matches_embedding_oracle(a in arb_point(), b in arb_point()) {
            prop_assert!((spherical_distance(&a, &b) - oracle_distance(&a, &b)).abs() < 1e-12);
        }

        #[test]
        fn triangle_inequality(a in arb_point(), b in arb_point(), c in arb_point()) {
            let (ab, bc, ac) = (spherical_distance(&a, &b), spherical_distance(&b, &c), spherical_distance(&a, &c));
            prop_assert!(ac <= ab + bc + 1e-12);
            prop_assert!((ab - spherical_distance(&b, &a)).abs() < 1e-15);
        }

        #[test]
        fn inversion_is_isometry(a in arb_point(), b in arb_point()) {
            let d = spherical_distance(&a, &b);
            prop_assert!((spherical_distance(&a.recip(), &b.recip()) - d).abs() < 1e-12);
        }

        #[test]
        fn homogeneous_round_trip(a in arb_point()) {
            let (x, y) = a.homogeneous();
            prop_assert!(spherical_distance(&P::from_homogeneous(x, y), &a) < 1e-14);
            let (w, inv) = a.chart();
            prop_assert!(spherical_distance(&P::from_chart(w, inv), &a) < 1e-14);
        }
    }
}
