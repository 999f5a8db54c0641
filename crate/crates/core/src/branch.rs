//! Univalent inverse branches of iterates `fⁿ` over spherical disks.
//!
//! A branch is certified one `f`-step at a time: the disk being inverted must
//! avoid every singular value of `f`, so the local inverse continues
//! analytically over it. The preimage is then enclosed in a new disk (the
//! next hull) by tracking its boundary, and the procedure repeats.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::HolomorphicMap;
use crate::scalar::Real;
use crate::sphere::{
    enclosing_disk, geodesic, max_distance, spherical_distance, SpherePoint, SphericalDisk,
};

/// Koebe bound `((1+r)/(1−r))⁴` on `|g′(a)|/|g′(b)|` for `g` univalent on the
/// unit disk and `|a|, |b| ≤ r`.
pub fn koebe_distortion<T: Real>(r: T) -> Result<T> {
    if !(r >= T::zero() && r < T::one()) {
        return Err(Error::DomainError(format!(
            "Koebe radius {r} outside [0, 1)"
        )));
    }
    Ok(((T::one() + r) / (T::one() - r)).powi(4))
}

/// Covering constant `C = 4 · K(1/2) · 2`, where 2 is the largest ratio of the
/// spherical metric to the flat metric of either chart on its unit disk.
pub fn univalence_constant<T: Real>() -> T {
    let k = koebe_distortion(T::lit(0.5)).unwrap_or_else(|_| T::lit(81.0));
    T::lit(4.0) * k * T::lit(2.0)
}

/// Derivative norm used when applying a branch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricMode {
    Spherical,
    PlanarEuclidean,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Certificate {
    /// Every singular value of `f` lies outside each inverted disk.
    CriticalValueExclusion,
    /// Logarithm branches of the exponential family, continued along paths
    /// avoiding the omitted values.
    NewtonTracked,
}

#[derive(Clone, Debug)]
pub struct BranchConfig<T = f64> {
    pub newton_tol: T,
    pub boundary_samples: usize,
    pub interior_rings: usize,
    pub interior_per_ring: usize,
    /// Factor applied to the sampled hull radius to cover sampling gaps.
    pub hull_padding: T,
    /// Longest spherical step along a continuation path.
    pub path_step: T,
    pub max_refinements: usize,
}

impl<T: Real> Default for BranchConfig<T> {
    fn default() -> Self {
        BranchConfig {
            newton_tol: T::tol(1e-12),
            boundary_samples: 64,
            interior_rings: 3,
            interior_per_ring: 8,
            hull_padding: T::lit(1.05),
            path_step: T::lit(0.05),
            max_refinements: 12,
        }
    }
}

/// A disk enclosing the pullback at one level of the branch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hull<T = f64> {
    pub center: SpherePoint<T>,
    pub radius: T,
}

/// Certified univalent branch `g` of `f^{-n}` over `base_disk`, the one
/// sending `fⁿ(anchor)` back to `anchor`.
#[derive(Clone, Debug)]
pub struct InverseBranch<T = f64> {
    pub map: HolomorphicMap<T>,
    pub depth: usize,
    pub base_disk: SphericalDisk<T>,
    pub anchor: SpherePoint<T>,
    /// Sampled `sup ‖Dfⁿ‖` over `g(base_disk)`.
    pub theta: T,
    /// Sampled `inf ‖Dfⁿ‖` over `g(base_disk)`.
    pub theta_min: T,
    /// `koebe · theta`.
    pub theta_bound: T,
    /// `1/theta`, the sampled infimum of `‖Dg‖`.
    pub lambda: T,
    /// `lambda / koebe`.
    pub lambda_certified: T,
    pub koebe: T,
    /// Disk enclosing the image `g(base_disk)`, from its sampled boundary.
    pub image_disk: SphericalDisk<T>,
    /// Sampled spherical diameter of `g(base_disk)`.
    pub diameter: T,
    /// Measured constant `theta · diameter / 2`.
    pub footprint: T,
    pub certificate: Certificate,
    config: BranchConfig<T>,
    /// `hulls[k]` encloses the pullback to level `k`; `hulls[depth]` is the doubled base disk.
    hulls: Vec<Hull<T>>,
}

impl<T: Real> InverseBranch<T> {
    pub fn hulls(&self) -> &[Hull<T>] {
        &self.hulls
    }

    pub fn config(&self) -> &BranchConfig<T> {
        &self.config
    }

    /// The points `[u₀, …, uₙ]` with `uₙ = w`, `f(u_k) = u_{k+1}` and `u₀ = g(w)`.
    pub fn evaluate_chain(&self, w: &SpherePoint<T>) -> Result<Vec<SpherePoint<T>>> {
        let top = &self.hulls[self.depth];
        if spherical_distance(&top.center, w) >= top.radius {
            return Err(Error::DomainError(format!(
                "{w} lies outside the certified hull of the branch"
            )));
        }
        let steps = steps_for(spherical_distance(&top.center, w), self.config.path_step);
        let mut path = geodesic(&top.center, w, steps);
        let mut chain = vec![*w];
        for k in (0..self.depth).rev() {
            path = pull_path(&self.map, &path, self.hulls[k].center, &self.config)?;
            chain.push(*path.last().unwrap());
        }
        chain.reverse();
        Ok(chain)
    }

    /// `g(w)`.
    pub fn evaluate(&self, w: &SpherePoint<T>) -> Result<SpherePoint<T>> {
        Ok(self.evaluate_chain(w)?[0])
    }

    /// `g(w)` together with `‖Dg(w)‖` in the requested metric.
    pub fn apply(&self, w: &SpherePoint<T>, metric: MetricMode) -> Result<(SpherePoint<T>, T)> {
        let chain = self.evaluate_chain(w)?;
        let forward = chain_derivative(&self.map, &chain, metric)?;
        Ok((chain[0], forward.recip()))
    }
}

/// `‖Dfⁿ(u₀)‖` along a chain `[u₀, …, uₙ]`.
pub fn chain_derivative<T: Real>(
    f: &HolomorphicMap<T>,
    chain: &[SpherePoint<T>],
    metric: MetricMode,
) -> Result<T> {
    let mut acc = T::one();
    for u in &chain[..chain.len().saturating_sub(1)] {
        acc *= match metric {
            MetricMode::Spherical => f.spherical_derivative(u)?,
            MetricMode::PlanarEuclidean => {
                let z = u
                    .finite()
                    .ok_or_else(|| Error::DomainError("planar derivative at infinity".into()))?;
                f.derivative(z).norm()
            }
        };
    }
    Ok(acc)
}

fn steps_for<T: Real>(length: T, step: T) -> usize {
    (length / step).ceil().to_usize().unwrap_or(1).max(1)
}

/// Lifts `path` through one inverse step of `f`, starting at `start`, a
/// preimage of `path[0]`.
fn pull_path<T: Real>(
    f: &HolomorphicMap<T>,
    path: &[SpherePoint<T>],
    start: SpherePoint<T>,
    cfg: &BranchConfig<T>,
) -> Result<Vec<SpherePoint<T>>> {
    let mut out = Vec::with_capacity(path.len());
    out.push(start);
    for pair in path.windows(2) {
        let prev = *out.last().unwrap();
        out.push(pull_segment(f, &pair[0], &prev, &pair[1], cfg, 0)?);
    }
    Ok(out)
}

fn pull_segment<T: Real>(
    f: &HolomorphicMap<T>,
    a: &SpherePoint<T>,
    ua: &SpherePoint<T>,
    b: &SpherePoint<T>,
    cfg: &BranchConfig<T>,
    level: usize,
) -> Result<SpherePoint<T>> {
    let step = spherical_distance(a, b);
    if step == T::zero() {
        return Ok(*ua);
    }
    let deriv = f.spherical_derivative(ua)?;
    if step <= cfg.path_step && deriv > T::zero() {
        if let Ok(u) = f.preimage_near(b, ua, cfg.newton_tol) {
            // reject jumps to another preimage
            let predicted = step / deriv;
            let slack = T::lit(10.0) * cfg.newton_tol.max(T::epsilon() * T::lit(64.0));
            if spherical_distance(ua, &u) <= T::lit(2.0) * predicted + slack {
                return Ok(u);
            }
        }
    }
    if level >= cfg.max_refinements {
        return Err(Error::NewtonDivergence(format!(
            "continuation from {ua} towards a preimage of {b} did not converge"
        )));
    }
    let mid = geodesic(a, b, 2)[1];
    let um = pull_segment(f, a, ua, &mid, cfg, level + 1)?;
    pull_segment(f, &mid, &um, b, cfg, level + 1)
}

/// Certify the branch of `f^{-n}` over `disk` that sends `fⁿ(anchor)` to `anchor`.
pub fn pull_back_univalent<T: Real>(
    f: &HolomorphicMap<T>,
    n: usize,
    disk: &SphericalDisk<T>,
    anchor: &SpherePoint<T>,
) -> Result<InverseBranch<T>> {
    pull_back_univalent_with(f, n, disk, anchor, &BranchConfig::default())
}

pub fn pull_back_univalent_with<T: Real>(
    f: &HolomorphicMap<T>,
    n: usize,
    disk: &SphericalDisk<T>,
    anchor: &SpherePoint<T>,
    cfg: &BranchConfig<T>,
) -> Result<InverseBranch<T>> {
    if n == 0 {
        return Err(Error::DomainError("branch depth must be at least 1".into()));
    }
    let doubled = disk.doubled();
    if !disk.is_simply_connected() || !doubled.is_simply_connected() {
        return Err(Error::DomainError(format!(
            "disk of radius {} or its double is not simply connected",
            disk.radius
        )));
    }
    let orbit = f.iterate_orbit(anchor, n);
    if orbit.truncated {
        return Err(Error::DomainError(format!(
            "orbit of {anchor} leaves the domain"
        )));
    }
    if !disk.contains(&orbit.points[n]) {
        return Err(Error::DomainError(format!(
            "f^{n}({anchor}) = {} is not in the disk",
            orbit.points[n]
        )));
    }
    let singular = f.singular_values()?;
    let certificate = if f.is_exp() {
        Certificate::NewtonTracked
    } else {
        Certificate::CriticalValueExclusion
    };

    let mut hulls = vec![
        Hull {
            center: disk.center,
            radius: doubled.radius,
        };
        n + 1
    ];
    for k in (1..=n).rev() {
        let step = n - k + 1;
        let hull = hulls[k];
        if !(hull.radius < T::FRAC_PI_2()) {
            return Err(Error::UnivalenceFailure {
                step,
                reason: format!("hull radius {} reaches a hemisphere", hull.radius),
            });
        }
        if let Some(s) = singular
            .iter()
            .find(|s| spherical_distance(&hull.center, s) <= hull.radius)
        {
            return Err(Error::UnivalenceFailure {
                step,
                reason: format!("singular value {s} inside the disk being inverted"),
            });
        }
        // centre of the next hull: continue from the orbit point to the hull centre
        let o = orbit.points[k];
        let to_center = geodesic(
            &o,
            &hull.center,
            steps_for(spherical_distance(&o, &hull.center), cfg.path_step),
        );
        let center = *pull_path(f, &to_center, orbit.points[k - 1], cfg)?
            .last()
            .unwrap();
        let ring = SphericalDisk {
            center: hull.center,
            radius: hull.radius,
        }
        .boundary_samples(cfg.boundary_samples);
        let steps = steps_for(hull.radius, cfg.path_step);
        let lifted: Vec<SpherePoint<T>> = ring
            .par_iter()
            .map(|b| {
                let path = geodesic(&hull.center, b, steps);
                pull_path(f, &path, center, cfg).map(|p| *p.last().unwrap())
            })
            .collect::<Result<_>>()?;
        hulls[k - 1] = Hull {
            center,
            radius: cfg.hull_padding * max_distance(&center, &lifted),
        };
    }

    let mut partial = InverseBranch {
        map: f.clone(),
        depth: n,
        base_disk: *disk,
        anchor: *anchor,
        theta: T::zero(),
        theta_min: T::zero(),
        theta_bound: T::zero(),
        lambda: T::zero(),
        lambda_certified: T::zero(),
        koebe: koebe_distortion(T::lit(0.5))?,
        image_disk: *disk,
        diameter: T::zero(),
        footprint: T::zero(),
        certificate,
        config: cfg.clone(),
        hulls,
    };

    let boundary = disk.boundary_samples(cfg.boundary_samples);
    let mut samples = boundary.clone();
    samples.extend(disk.interior_samples(cfg.interior_rings, cfg.interior_per_ring));
    let evaluated: Vec<(SpherePoint<T>, T)> = samples
        .par_iter()
        .map(|w| {
            let chain = partial.evaluate_chain(w)?;
            Ok((
                chain[0],
                chain_derivative(f, &chain, MetricMode::Spherical)?,
            ))
        })
        .collect::<Result<_>>()?;
    let theta = evaluated.iter().map(|e| e.1).fold(T::zero(), T::max);
    let theta_min = evaluated.iter().map(|e| e.1).fold(T::infinity(), T::min);
    let images: Vec<SpherePoint<T>> = evaluated.iter().map(|e| e.0).collect();

    let mut diameter = T::zero();
    for (i, a) in images.iter().enumerate() {
        for b in &images[i + 1..] {
            diameter = diameter.max(spherical_distance(a, b));
        }
    }

    partial.theta = theta;
    partial.theta_min = theta_min;
    partial.theta_bound = partial.koebe * theta;
    partial.lambda = theta.recip();
    partial.lambda_certified = partial.lambda / partial.koebe;
    partial.image_disk = enclosing_disk(&images[..boundary.len()]);
    partial.diameter = diameter;
    partial.footprint = theta * diameter / T::lit(2.0);
    Ok(partial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type P = SpherePoint<f64>;

    fn z2() -> HolomorphicMap {
        HolomorphicMap::quadratic(Complex::new(0.0, 0.0))
    }

    #[test]
    fn koebe_values() {
        assert_eq!(koebe_distortion(0.0f64).unwrap(), 1.0);
        assert!((koebe_distortion(0.5f64).unwrap() - 81.0).abs() < 1e-12);
        assert!((koebe_distortion(1.0f64 / 3.0).unwrap() - 16.0).abs() < 1e-12);
        assert!(koebe_distortion(1.0f64).is_err());
        assert!(koebe_distortion(-0.1f64).is_err());
        assert_eq!(univalence_constant::<f64>(), 648.0);
    }

    #[test]
    fn square_root_branches() {
        let d = SphericalDisk::new(P::real(1.0), 0.2).unwrap();
        let plus = pull_back_univalent(&z2(), 1, &d, &P::real(1.0)).unwrap();
        let minus = pull_back_univalent(&z2(), 1, &d, &P::real(-1.0)).unwrap();
        assert!(spherical_distance(&plus.evaluate(&P::real(1.0)).unwrap(), &P::real(1.0)) < 1e-12);
        assert!(
            spherical_distance(&minus.evaluate(&P::real(1.0)).unwrap(), &P::real(-1.0)) < 1e-12
        );
        // principal square root of an interior point
        let w = P::from_parts(1.1, 0.05);
        let expect = P::new(Complex::new(1.1, 0.05).sqrt());
        assert!(spherical_distance(&plus.evaluate(&w).unwrap(), &expect) < 1e-12);
    }

    #[test]
    fn depth_five_theta_matches_closed_form() {
        let d = SphericalDisk::new(P::real(1.0), 0.2).unwrap();
        let anchor = P::unit(0.1 / 32.0);
        let f = z2();
        assert!(d.contains(&f.iterate_orbit(&anchor, 5).points[5]));
        let b = pull_back_univalent(&f, 5, &d, &anchor).unwrap();
        // on the unit circle the derivative of z^32 is exactly 32
        assert!(b.theta >= 32.0 * (1.0 - 1e-9));
        assert!(b.theta < 32.0 * 1.05);
        assert!(b.theta_min <= 32.0 && b.theta_min > 32.0 / 1.2);
        assert!(b.lambda <= b.koebe / b.theta + 1e-15);
        assert!(b.diameter <= 2.0 * univalence_constant::<f64>() / b.theta);
        assert!((b.lambda_certified * b.koebe - b.lambda).abs() < 1e-15);
    }

    #[test]
    fn critical_value_in_disk_fails_first_step() {
        let d = SphericalDisk::new(P::real(0.1), 0.3).unwrap();
        match pull_back_univalent(&z2(), 1, &d, &P::real(0.1f64.sqrt())) {
            Err(Error::UnivalenceFailure { step, .. }) => assert_eq!(step, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_simply_connected_disk_rejected() {
        let d = SphericalDisk::new(P::real(1.0), 1.0).unwrap();
        assert!(matches!(
            pull_back_univalent(&z2(), 1, &d, &P::real(1.0)),
            Err(Error::DomainError(_))
        ));
    }

    #[test]
    fn anchor_outside_disk_rejected() {
        let d = SphericalDisk::new(P::real(1.0), 0.2).unwrap();
        assert!(pull_back_univalent(&z2(), 1, &d, &P::real(3.0)).is_err());
    }

    #[test]
    fn exponential_branch_is_logarithm() {
        let f = HolomorphicMap::exp_family(Complex::new(0.5, 0.0)).unwrap();
        let d = SphericalDisk::new(P::real(0.5), 0.1).unwrap();
        let b = pull_back_univalent(&f, 1, &d, &P::zero()).unwrap();
        assert_eq!(b.certificate, Certificate::NewtonTracked);
        assert!(spherical_distance(&b.evaluate(&P::real(0.5)).unwrap(), &P::zero()) < 1e-12);
        let w = Complex::new(0.55, 0.03);
        let expect = P::new((w * 2.0).ln());
        assert!(spherical_distance(&b.evaluate(&P::new(w)).unwrap(), &expect) < 1e-12);
        // |g'(w)| = 1/|w| in the plane
        let (_, dg) = b.apply(&P::new(w), MetricMode::PlanarEuclidean).unwrap();
        assert!((dg - 1.0 / w.norm()).abs() < 1e-12);
    }

    #[test]
    fn round_trip_and_contraction_on_random_points() {
        let f = HolomorphicMap::quadratic(Complex::new(-0.12, 0.74));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // a repelling fixed point of f lies in the Julia set
        let fixed = {
            let c = Complex::new(-0.12, 0.74);
            let disc = (Complex::new(1.0, 0.0) - c * 4.0).sqrt();
            P::new((Complex::new(1.0, 0.0) + disc) / 2.0)
        };
        let d = SphericalDisk::new(fixed, 0.15).unwrap();
        let b = pull_back_univalent(&f, 4, &d, &fixed).unwrap();
        let pts: Vec<P> = (0..100)
            .map(|_| {
                let r = 0.15 * rng.random::<f64>().sqrt();
                d.point_at(r, rng.random::<f64>() * std::f64::consts::TAU)
            })
            .collect();
        let images: Vec<P> = pts.iter().map(|w| b.evaluate(w).unwrap()).collect();
        for (w, u) in pts.iter().zip(&images) {
            let back = f.iterate_orbit(u, 4).points[4];
            assert!(spherical_distance(&back, w) < 1e-9);
        }
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let dw = spherical_distance(&pts[i], &pts[j]);
                if dw < 1e-6 {
                    continue;
                }
                let ratio = spherical_distance(&images[i], &images[j]) / dw;
                assert!(ratio >= b.lambda_certified, "ratio {ratio}");
                assert!(ratio <= b.koebe / b.theta_min, "ratio {ratio}");
            }
        }
    }

    #[test]
    fn single_precision_branch() {
        let f = HolomorphicMap::<f32>::quadratic(Complex::new(0.0, 0.0));
        let d = SphericalDisk::new(SpherePoint::real(1.0f32), 0.2).unwrap();
        let b = pull_back_univalent(&f, 3, &d, &SpherePoint::real(1.0)).unwrap();
        assert!((b.theta - 8.0).abs() < 0.5);
    }
}
