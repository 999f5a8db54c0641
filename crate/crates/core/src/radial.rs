//! Finite evidence for radial points: the times at which a fixed-size disk
//! around `fⁿ(z₀)` pulls back univalently along the orbit.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::branch::{pull_back_univalent_with, BranchConfig, InverseBranch};
use crate::error::{Error, Result};
use crate::maps::HolomorphicMap;
use crate::scalar::Real;
use crate::sphere::{SpherePoint, SphericalDisk};

/// Default number of good times required before a disk of univalence is sought.
pub const MIN_GOOD_TIMES: usize = 10;

#[derive(Clone, Debug)]
pub struct RadialCertificate<T = f64> {
    pub z0: SpherePoint<T>,
    pub delta: T,
    /// `f⁰(z₀), …, f^{n_max}(z₀)`, shorter if the orbit left the domain.
    pub orbit: Vec<SpherePoint<T>>,
    /// Branches over `𝔻_{2δ}(fⁿ(z₀))` sending `fⁿ(z₀)` back to `z₀`, by increasing `n`.
    pub good_times: Vec<(usize, InverseBranch<T>)>,
    pub limit_disk: Option<SphericalDisk<T>>,
}

impl<T: Real> RadialCertificate<T> {
    pub fn times(&self) -> Vec<usize> {
        self.good_times.iter().map(|(n, _)| *n).collect()
    }

    pub fn max_theta(&self) -> T {
        self.good_times
            .iter()
            .map(|(_, b)| b.theta)
            .fold(T::zero(), T::max)
    }

    /// Good times whose iterate lands in `disk`.
    pub fn hits(&self, disk: &SphericalDisk<T>) -> Vec<usize> {
        self.good_times
            .iter()
            .filter(|(n, _)| disk.contains(&self.orbit[*n]))
            .map(|(n, _)| *n)
            .collect()
    }
}

pub fn detect_radial<T: Real>(
    f: &HolomorphicMap<T>,
    z0: &SpherePoint<T>,
    delta: T,
    n_max: usize,
) -> Result<RadialCertificate<T>> {
    detect_radial_with(f, z0, delta, n_max, &BranchConfig::default())
}

pub fn detect_radial_with<T: Real>(
    f: &HolomorphicMap<T>,
    z0: &SpherePoint<T>,
    delta: T,
    n_max: usize,
    config: &BranchConfig<T>,
) -> Result<RadialCertificate<T>> {
    let base_radius = T::lit(2.0) * delta;
    if !(delta > T::zero() && base_radius < T::FRAC_PI_2()) {
        return Err(Error::DomainError(format!(
            "delta {delta}: the doubled disk is not simply connected"
        )));
    }
    let orbit = f.iterate_orbit(z0, n_max).points;
    let good_times: Vec<(usize, InverseBranch<T>)> = (1..orbit.len())
        .into_par_iter()
        .filter_map(|n| {
            let disk = SphericalDisk::new(orbit[n], base_radius).ok()?;
            pull_back_univalent_with(f, n, &disk, z0, config)
                .ok()
                .map(|b| (n, b))
        })
        .collect();
    let mut cert = RadialCertificate {
        z0: *z0,
        delta,
        orbit,
        good_times,
        limit_disk: None,
    };
    cert.limit_disk = disk_of_univalence(&cert, MIN_GOOD_TIMES).ok();
    Ok(cert)
}

/// A disk `𝔻_δ′(w₀)` with `δ′ = 0.45·delta` around a cluster point `w₀` of the
/// good-time iterates: the iterates are binned into cells of diameter
/// `delta/4` and `w₀` is the earliest iterate in the fullest cell.
pub fn disk_of_univalence<T: Real>(
    cert: &RadialCertificate<T>,
    min_good: usize,
) -> Result<SphericalDisk<T>> {
    let min_good = min_good.max(1);
    if cert.good_times.len() < min_good {
        return Err(Error::InsufficientData(format!(
            "{} good times, {min_good} required",
            cert.good_times.len()
        )));
    }
    // cube cells on the embedded sphere; side chosen so the cell diameter is delta/4
    let side = (cert.delta / T::lit(4.0) / T::lit(3.0).sqrt()).as_f64();
    let mut cells: BTreeMap<[i64; 3], (usize, usize)> = BTreeMap::new();
    for (n, _) in &cert.good_times {
        let v = cert.orbit[*n].to_unit_vector();
        let key = [0, 1, 2].map(|i| (v[i].as_f64() / side).floor() as i64);
        let entry = cells.entry(key).or_insert((0, *n));
        entry.0 += 1;
        entry.1 = entry.1.min(*n);
    }
    let (_, earliest) = cells
        .values()
        .copied()
        .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
        .expect("at least one good time");
    SphericalDisk::new(cert.orbit[earliest], T::lit(0.45) * cert.delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branch::koebe_distortion;
    use crate::sphere::spherical_distance;
    use num_complex::Complex;

    type P = SpherePoint<f64>;

    fn z2() -> HolomorphicMap {
        HolomorphicMap::quadratic(Complex::new(0.0, 0.0))
    }

    #[test]
    fn circle_point_is_certified_at_every_time() {
        let cert = detect_radial(&z2(), &P::unit(1.0), 0.3, 8).unwrap();
        assert_eq!(cert.times(), (1..=8).collect::<Vec<_>>());
        let k = koebe_distortion(0.5).unwrap();
        let mut last = 0.0;
        for (n, b) in &cert.good_times {
            let exact = 2f64.powi(*n as i32);
            assert!(b.theta <= k * exact && b.theta >= exact / k, "n = {n}");
            assert!(b.theta > last);
            last = b.theta;
            assert!(spherical_distance(&b.evaluate(&cert.orbit[*n]).unwrap(), &cert.z0) < 1e-9);
            assert!(b
                .base_disk
                .contains_disk(&SphericalDisk::new(cert.orbit[*n], 0.3).unwrap(), 0.0));
        }
    }

    #[test]
    fn superattracting_point_is_never_certified() {
        let cert = detect_radial(&z2(), &P::zero(), 0.1, 5).unwrap();
        assert!(cert.good_times.is_empty());
        assert!(cert.limit_disk.is_none());
        assert!(matches!(
            disk_of_univalence(&cert, MIN_GOOD_TIMES),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn repelling_fixed_point_of_chebyshev() {
        let f = HolomorphicMap::quadratic(Complex::new(-2.0, 0.0));
        let cert = detect_radial(&f, &P::real(2.0), 0.05, 6).unwrap();
        assert!(!cert.good_times.is_empty());
    }

    #[test]
    fn constant_orbit_clusters_at_the_fixed_point() {
        let f = HolomorphicMap::quadratic(Complex::new(-2.0, 0.0));
        let cert = detect_radial(&f, &P::real(2.0), 0.05, 12).unwrap();
        assert!(cert.good_times.len() >= 10);
        let d = cert.limit_disk.unwrap();
        assert!(spherical_distance(&d.center, &P::real(2.0)) < 1e-12);
        assert!(d.radius < 0.025);
        assert_eq!(cert.hits(&d).len(), cert.good_times.len());
    }

    #[test]
    fn circle_orbit_gives_a_disk_of_univalence() {
        let cert = detect_radial(&z2(), &P::unit(1.0), 0.3, 16).unwrap();
        let d = cert.limit_disk.unwrap();
        assert!(d.is_simply_connected() && d.doubled().is_simply_connected());
        assert!(d.radius < 0.15);
        assert!((d.center.finite().unwrap().norm() - 1.0).abs() < 1e-9);
        assert!(!cert.hits(&d).is_empty());
    }

    #[test]
    fn recertifies_with_finer_tolerance() {
        let coarse = detect_radial(&z2(), &P::unit(1.0), 0.3, 8).unwrap();
        let cfg = BranchConfig {
            newton_tol: 1e-14,
            ..BranchConfig::default()
        };
        let fine = detect_radial_with(&z2(), &P::unit(1.0), 0.3, 8, &cfg).unwrap();
        assert_eq!(coarse.times(), fine.times());
    }

    #[test]
    fn preimages_inherit_good_times() {
        let z0 = P::unit(1.0);
        let cert = detect_radial(&z2(), &z0, 0.3, 6).unwrap();
        for w in z2().preimages(&z0).unwrap() {
            let back = detect_radial(&z2(), &w, 0.3, 7).unwrap();
            for n in cert.times() {
                let later = back.good_times.iter().find(|(m, _)| *m == n + 1).unwrap();
                assert!(spherical_distance(&later.1.base_disk.center, &cert.orbit[n]) < 1e-12);
            }
        }
    }
}
