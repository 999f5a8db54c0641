//! Constructive lower bounds for the hyperbolic dimension: the 5r covering
//! selection, branch selection by derivative threshold, the mass check, and
//! the sample-level verification of the resulting hyperbolic set. Also the
//! box-counting estimator used as an independent check.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::branch::{pull_back_univalent, MetricMode};
use crate::error::{Error, Result};
use crate::ifs::{
    enumerate_words, mass_check, moran_solve, ConformalIFS, DimensionEstimate, EstimateMethod,
    IfsMap, DEFAULT_WORD_CAP,
};
use crate::maps::HolomorphicMap;
use crate::radial::RadialCertificate;
use crate::scalar::{Real, C};
use crate::sphere::{disk_separation, spherical_distance, SpherePoint, SphericalDisk};

/// Greedy Vitali selection over a finite family of balls.
#[derive(Clone, Debug)]
pub struct CoveringSelection<T = f64> {
    pub input_balls: Vec<(SpherePoint<T>, T)>,
    pub selected: Vec<usize>,
    pub expansion: T,
}

impl<T: Real> CoveringSelection<T> {
    /// Selected balls are pairwise disjoint and every input centre lies in
    /// the `expansion`-fold enlargement of some selected ball.
    pub fn verify(&self) -> bool {
        let ball = |i: usize| SphericalDisk {
            center: self.input_balls[i].0,
            radius: self.input_balls[i].1,
        };
        for (k, &i) in self.selected.iter().enumerate() {
            for &j in &self.selected[..k] {
                if !disk_separation(&ball(i), &ball(j)) {
                    return false;
                }
            }
        }
        self.input_balls.iter().all(|(c, _)| {
            self.selected.iter().any(|&s| {
                let (sc, sr) = self.input_balls[s];
                spherical_distance(c, &sc) < self.expansion * sr
            })
        })
    }
}

/// Visits balls by decreasing radius (ties by index) and keeps each one
/// disjoint from all balls kept so far.
pub fn five_r_cover<T: Real>(balls: &[(SpherePoint<T>, T)]) -> CoveringSelection<T> {
    let mut order: Vec<usize> = (0..balls.len()).collect();
    order.sort_by(|&a, &b| balls[b].1.partial_cmp(&balls[a].1).unwrap().then(a.cmp(&b)));
    let mut selected: Vec<usize> = Vec::new();
    for i in order {
        let (c, r) = balls[i];
        let clear = selected.iter().all(|&s| {
            let (sc, sr) = balls[s];
            spherical_distance(&c, &sc) > r + sr
        });
        if clear {
            selected.push(i);
        }
    }
    CoveringSelection {
        input_balls: balls.to_vec(),
        selected,
        expansion: T::lit(5.0),
    }
}

/// `count` scales from `hi` down to `lo`, evenly spaced in log scale.
pub fn geometric_scales(hi: f64, lo: f64, count: usize) -> Vec<f64> {
    let count = count.max(2);
    let ratio = (lo / hi).ln() / (count - 1) as f64;
    (0..count).map(|k| hi * (ratio * k as f64).exp()).collect()
}

/// Grid offset in cell units, keeping coordinate planes (where the real
/// axis and the unit circle embed) away from cell faces.
const GRID_OFFSET: [f64; 3] = [0.5137, 0.4829, 0.5071];

/// Largest residual (in `log N`) tolerated by [`box_counting`].
pub const BOX_FIT_THRESHOLD: f64 = 0.25;

/// Slope of `log N(ε)` against `log(1/ε)`, with `N(ε)` the number of occupied
/// cubes of side `ε` once the points are placed on the unit sphere in `R³`.
pub fn box_counting<T: Real>(
    points: &[SpherePoint<T>],
    scales: &[f64],
) -> Result<DimensionEstimate> {
    if points.len() < 1000 {
        return Err(Error::InsufficientData(format!(
            "{} points, at least 1000 required",
            points.len()
        )));
    }
    let mut scales: Vec<f64> = scales.iter().copied().filter(|s| *s > 0.0).collect();
    scales.sort_by(|a, b| b.partial_cmp(a).unwrap());
    scales.dedup();
    if scales.len() < 4 || scales[0] / scales[scales.len() - 1] < 100.0 * (1.0 - 1e-12) {
        return Err(Error::InsufficientData(
            "box counting needs at least 4 scales spanning 2 decades".into(),
        ));
    }
    let vectors: Vec<[f64; 3]> = points
        .iter()
        .map(|p| p.to_unit_vector().map(|x| x.as_f64()))
        .collect();
    let counts: Vec<usize> = scales
        .par_iter()
        .map(|eps| {
            let mut cells: Vec<[i64; 3]> = vectors
                .iter()
                .map(|v| [0, 1, 2].map(|i| (v[i] / eps + GRID_OFFSET[i]).floor() as i64))
                .collect();
            cells.sort_unstable();
            cells.dedup();
            cells.len()
        })
        .collect();
    let xs: Vec<f64> = scales.iter().map(|e| -e.ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|n| (*n as f64).ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    if !(residual <= BOX_FIT_THRESHOLD) || !slope.is_finite() {
        return Err(Error::DegenerateFit(format!(
            "slope {slope} with rms residual {residual}"
        )));
    }
    let mut metadata = BTreeMap::new();
    metadata.insert("points".into(), points.len().to_string());
    metadata.insert("residual".into(), residual.to_string());
    metadata.insert(
        "counts".into(),
        scales
            .iter()
            .zip(&counts)
            .map(|(e, c)| format!("{e:.3e}:{c}"))
            .collect::<Vec<_>>()
            .join(","),
    );
    Ok(DimensionEstimate {
        t: slope,
        method: EstimateMethod::BoxCounting,
        depth: scales.len(),
        tolerance: residual,
        metadata,
    })
}

/// A branch admitted by [`build_hyperbolic_ifs`] before the covering step.
#[derive(Clone, Debug)]
pub struct Candidate<T = f64> {
    pub seed: usize,
    pub anchor: SpherePoint<T>,
    pub depth: usize,
    pub theta: T,
}

#[derive(Clone, Debug)]
pub struct HyperbolicBuild<T = f64> {
    pub ifs: ConformalIFS<T>,
    pub candidates: Vec<Candidate<T>>,
    pub covering: CoveringSelection<T>,
    pub mass: T,
    pub estimate: DimensionEstimate,
}

/// Assembles an IFS over `disk` from radial certificates: for each seed the
/// earliest good time `n` with `fⁿ(seed) ∈ disk`, `θ > 10C/δ` and branch image
/// inside `disk`; the candidate balls `𝔻_{C/θ}(seed)` are thinned by the 5r
/// covering and the survivors must satisfy `Σ λ_jᵈ′ ≥ 1`.
pub fn build_hyperbolic_ifs<T: Real>(
    f: &HolomorphicMap<T>,
    certs: &[RadialCertificate<T>],
    disk: &SphericalDisk<T>,
    d_prime: T,
    delta: T,
    covering_constant: T,
) -> Result<HyperbolicBuild<T>> {
    if !(d_prime >= T::zero() && d_prime < T::lit(2.0)) || !(delta > T::zero()) {
        return Err(Error::DomainError(format!(
            "d' = {d_prime} must lie in [0, 2) and delta = {delta} be positive"
        )));
    }
    let threshold = T::lit(10.0) * covering_constant / delta;
    let picks: Vec<Option<(Candidate<T>, IfsMap<T>)>> = certs
        .par_iter()
        .enumerate()
        .map(|(i, cert)| {
            if !disk.contains(&cert.z0) {
                return None;
            }
            cert.times().into_iter().find_map(|n| {
                if !disk.contains(cert.orbit.get(n)?) {
                    return None;
                }
                let b = pull_back_univalent(f, n, disk, &cert.z0).ok()?;
                if !(b.theta > threshold) || !disk.contains_disk(&b.image_disk, T::zero()) {
                    return None;
                }
                Some((
                    Candidate {
                        seed: i,
                        anchor: cert.z0,
                        depth: n,
                        theta: b.theta,
                    },
                    IfsMap::Inverse(b),
                ))
            })
        })
        .collect();
    let (candidates, maps): (Vec<Candidate<T>>, Vec<IfsMap<T>>) =
        picks.into_iter().flatten().unzip();
    if candidates.is_empty() {
        return Err(Error::NoQualifyingBranch(format!(
            "no good time with θ above 10C/δ = {threshold}"
        )));
    }
    let balls: Vec<(SpherePoint<T>, T)> = candidates
        .iter()
        .map(|c| (c.anchor, covering_constant / c.theta))
        .collect();
    let covering = five_r_cover(&balls);
    let mut chosen = covering.selected.clone();
    chosen.sort_unstable();
    let maps: Vec<IfsMap<T>> = chosen.iter().map(|&i| maps[i].clone()).collect();
    let lambdas: Vec<T> = maps
        .iter()
        .map(|m| m.as_branch().map(|b| b.lambda).unwrap_or(T::one()))
        .collect();
    let mass: T = lambdas.iter().map(|l| l.powf(d_prime)).sum();
    if !mass_check(&lambdas, d_prime) {
        return Err(Error::InsufficientMass { sum: mass.as_f64() });
    }
    let ifs = ConformalIFS::new(*disk, maps, MetricMode::Spherical)?;
    let mut metadata = BTreeMap::new();
    metadata.insert(
        "covering_constant".into(),
        covering_constant.as_f64().to_string(),
    );
    metadata.insert("delta".into(), delta.as_f64().to_string());
    metadata.insert("threshold".into(), threshold.as_f64().to_string());
    metadata.insert("mass".into(), mass.as_f64().to_string());
    metadata.insert("branches".into(), ifs.len().to_string());
    metadata.insert("candidates".into(), candidates.len().to_string());
    let depth = chosen
        .iter()
        .map(|&i| candidates[i].depth)
        .max()
        .unwrap_or(0);
    Ok(HyperbolicBuild {
        ifs,
        candidates,
        covering,
        mass,
        estimate: DimensionEstimate {
            t: d_prime.as_f64(),
            method: EstimateMethod::MassLowerBound,
            depth,
            tolerance: 0.0,
            metadata,
        },
    })
}

/// A periodic point found by the two-branch search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeriodicPoint<T = f64> {
    pub point: SpherePoint<T>,
    pub period: usize,
    pub multiplier: T,
}

/// `fᵏ(z)` and `(fᵏ)′(z)` in the plane; `None` if the orbit reaches infinity.
fn iterate_with_derivative<T: Real>(
    f: &HolomorphicMap<T>,
    z: C<T>,
    k: usize,
) -> Option<(C<T>, C<T>)> {
    let mut w = z;
    let mut d = Complex::new(T::one(), T::zero());
    for _ in 0..k {
        d *= f.derivative(w);
        w = f.evaluate(&SpherePoint::new(w)).ok()?.finite()?;
        if !(d.re.is_finite() && d.im.is_finite()) {
            return None;
        }
    }
    Some((w, d))
}

fn newton_periodic<T: Real>(f: &HolomorphicMap<T>, seed: C<T>, k: usize) -> Option<C<T>> {
    let mut z = seed;
    for _ in 0..80 {
        let (w, d) = iterate_with_derivative(f, z, k)?;
        let denom = d - Complex::new(T::one(), T::zero());
        if denom.norm() == T::zero() {
            return None;
        }
        let step = (w - z) / denom;
        z -= step;
        if !(z.re.is_finite() && z.im.is_finite()) || z.norm() > T::lit(1e8) {
            return None;
        }
        if step.norm() <= T::epsilon() * T::lit(64.0) * (T::one() + z.norm()) {
            return Some(z);
        }
    }
    let (w, _) = iterate_with_derivative(f, z, k)?;
    ((w - z).norm() < T::tol(1e-10) * (T::one() + z.norm())).then_some(z)
}

/// Repelling periodic points of period at most `max_period` inside `disk`,
/// ordered by period and then by distance to the centre.
pub fn repelling_periodic_points<T: Real>(
    f: &HolomorphicMap<T>,
    disk: &SphericalDisk<T>,
    max_period: usize,
    seed: u64,
) -> Vec<PeriodicPoint<T>> {
    let mut seeds: Vec<SpherePoint<T>> = disk.interior_samples(6, 12);
    seeds.extend(
        julia_samples(f, 4000, seed)
            .into_iter()
            .filter(|p| disk.contains(p))
            .take(400),
    );
    let tol = T::tol(1e-8);
    let mut found: Vec<PeriodicPoint<T>> = Vec::new();
    for k in 1..=max_period {
        let roots: Vec<C<T>> = seeds
            .par_iter()
            .filter_map(|s| newton_periodic(f, s.finite()?, k))
            .collect();
        for z in roots {
            let p = SpherePoint::new(z);
            if !disk.contains(&p) || found.iter().any(|q| spherical_distance(&q.point, &p) < tol) {
                continue;
            }
            // minimal period
            if (1..k).any(|j| {
                iterate_with_derivative(f, z, j)
                    .map(|(w, _)| spherical_distance(&SpherePoint::new(w), &p) < tol)
                    .unwrap_or(false)
            }) {
                continue;
            }
            let Some((_, d)) = iterate_with_derivative(f, z, k) else {
                continue;
            };
            if d.norm() > T::one() {
                found.push(PeriodicPoint {
                    point: p,
                    period: k,
                    multiplier: d.norm(),
                });
            }
        }
    }
    let center = disk.center;
    found.sort_by(|a, b| {
        a.period.cmp(&b.period).then(
            spherical_distance(&a.point, &center)
                .partial_cmp(&spherical_distance(&b.point, &center))
                .unwrap(),
        )
    });
    found
}

/// Points near the Julia set by random backward iteration from a repelling
/// fixed point (the first 20 steps are discarded).
pub fn julia_samples<T: Real>(
    f: &HolomorphicMap<T>,
    count: usize,
    seed: u64,
) -> Vec<SpherePoint<T>> {
    let start = (1..=1)
        .flat_map(|k| {
            let mut pts = Vec::new();
            let mut probe = SphericalDisk {
                center: SpherePoint::zero(),
                radius: T::lit(3.0),
            }
            .interior_samples(4, 16);
            probe.push(SpherePoint::real(T::lit(0.7)));
            for s in probe {
                if let Some(z) = s.finite().and_then(|z| newton_periodic(f, z, k)) {
                    if let Some((_, d)) = iterate_with_derivative(f, z, k) {
                        if d.norm() > T::one() {
                            pts.push(SpherePoint::new(z));
                        }
                    }
                }
            }
            pts
        })
        .next();
    let Some(mut p) = start else {
        return Vec::new();
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for step in 0..count + 20 {
        let pre = match f.preimages(&p) {
            Ok(v) if !v.is_empty() => v,
            _ => break,
        };
        p = pre[rng.random_range(0..pre.len())];
        if step >= 20 {
            out.push(p);
        }
    }
    out
}

/// Two inverse branches of iterates of `f` mapping `disk` into itself with
/// disjoint images, anchored at repelling periodic points inside it.
pub fn two_branch_construction<T: Real>(
    f: &HolomorphicMap<T>,
    disk: &SphericalDisk<T>,
    search_depth: usize,
) -> Result<ConformalIFS<T>> {
    let points = repelling_periodic_points(f, disk, search_depth, 7);
    let mut chosen: Vec<IfsMap<T>> = Vec::new();
    let mut images: Vec<SphericalDisk<T>> = Vec::new();
    for p in &points {
        let Ok(b) = pull_back_univalent(f, p.period, disk, &p.point) else {
            continue;
        };
        if !disk.contains_disk(&b.image_disk, T::zero()) || !(b.lambda < T::one()) {
            continue;
        }
        if images.iter().all(|u| disk_separation(u, &b.image_disk)) {
            images.push(b.image_disk);
            chosen.push(IfsMap::Inverse(b));
            if chosen.len() == 2 {
                return ConformalIFS::new(*disk, chosen, MetricMode::Spherical);
            }
        }
    }
    Err(Error::SearchExhausted(format!(
        "{} repelling periodic points of period ≤ {search_depth} in the disk, no two usable",
        points.len()
    )))
}

#[derive(Clone, Debug)]
pub struct HyperbolicSetReport<T = f64> {
    pub sample: Vec<SpherePoint<T>>,
    /// Largest branch depth, the iterate used for the expansion bound.
    pub n: usize,
    /// Smallest `‖Dfⁿʲ‖` over the sample, `n_j` the depth of the outer branch.
    pub lambda_expansion: T,
    /// Largest distance from the image of a sample point to the sample
    /// together with its intermediate forward images.
    pub invariance_defect: T,
    pub images_disjoint: bool,
    pub defect_tolerance: T,
    pub dimension_lower_bound: DimensionEstimate,
}

impl<T: Real> HyperbolicSetReport<T> {
    pub fn verified(&self) -> bool {
        self.lambda_expansion > T::one()
            && self.invariance_defect < self.defect_tolerance
            && self.images_disjoint
    }
}

pub const DEFAULT_DEFECT_TOLERANCE: f64 = 1e-3;

/// Fixed point of the first generator, by iterating it from the centre of `V`.
fn first_fixed_point<T: Real>(ifs: &ConformalIFS<T>) -> Result<SpherePoint<T>> {
    let mut p = ifs.ambient.center;
    for _ in 0..200 {
        let (q, _) = ifs.maps[0].apply(&p, ifs.metric)?;
        let moved = spherical_distance(&p, &q);
        p = q;
        if moved <= T::epsilon() * T::lit(4.0) {
            break;
        }
    }
    Ok(p)
}

/// Sample-level check that the limit set is a hyperbolic set. With `f`
/// given, inverse branches are undone by forward iteration of `f`; otherwise
/// (and for similarities) by inverting the generator.
pub fn verify_hyperbolic<T: Real>(
    f: Option<&HolomorphicMap<T>>,
    ifs: &ConformalIFS<T>,
    depth: usize,
) -> Result<HyperbolicSetReport<T>> {
    let base = first_fixed_point(ifs)?;
    let leaves = enumerate_words(ifs, depth.max(1), &base, DEFAULT_WORD_CAP)?;
    let sample: Vec<SpherePoint<T>> = leaves.iter().map(|l| l.point).collect();
    let per_letter = sample.len() / ifs.len();
    // leaves are ordered by outer letter
    let results: Vec<(T, SpherePoint<T>, Vec<SpherePoint<T>>)> = sample
        .par_iter()
        .enumerate()
        .map(|(i, z)| {
            let g = &ifs.maps[i / per_letter];
            match (g, f) {
                (IfsMap::Inverse(b), Some(f)) => {
                    let orbit = f.iterate_orbit(z, b.depth).points;
                    let expansion = match ifs.metric {
                        MetricMode::Spherical => f.iterate_spherical_derivative(z, b.depth)?,
                        MetricMode::PlanarEuclidean => {
                            f.iterate_euclidean_derivative(z, b.depth)?
                        }
                    };
                    let image = orbit[b.depth];
                    Ok((expansion, image, orbit[1..b.depth].to_vec()))
                }
                (IfsMap::Inverse(b), None) => {
                    let chain_end = b.map.iterate_orbit(z, b.depth).points[b.depth];
                    let (_, d) = b.apply(&chain_end, ifs.metric)?;
                    Ok((d.recip(), chain_end, Vec::new()))
                }
                (IfsMap::Similarity { a, b }, _) => {
                    let w = z.finite().ok_or_else(|| {
                        Error::DomainError("similarity sample at infinity".into())
                    })?;
                    let pre = (w - *b) / *a;
                    let d = match ifs.metric {
                        MetricMode::PlanarEuclidean => a.norm().recip(),
                        MetricMode::Spherical => {
                            (T::one() + w.norm_sqr()) / (a.norm() * (T::one() + pre.norm_sqr()))
                        }
                    };
                    Ok((d, SpherePoint::new(pre), Vec::new()))
                }
            }
        })
        .collect::<Result<_>>()?;
    let lambda_expansion = results.iter().map(|r| r.0).fold(T::infinity(), T::min);
    let mut closure = sample.clone();
    for r in &results {
        closure.extend(r.2.iter().copied());
    }
    let index = PointIndex::new(&closure, T::lit(1e-3));
    let invariance_defect = results
        .par_iter()
        .map(|r| index.nearest_distance(&r.1))
        .reduce(|| T::zero(), T::max);
    let mut images_disjoint = true;
    for (j, u) in ifs.images.iter().enumerate() {
        if !ifs.ambient.contains_disk(u, T::zero())
            || ifs.images[..j].iter().any(|v| !disk_separation(u, v))
        {
            images_disjoint = false;
        }
    }
    let lambdas: Vec<T> = ifs
        .lambdas
        .iter()
        .map(|l| l.min(T::one() - T::epsilon()))
        .collect();
    let t = if lambdas.iter().all(|l| *l > T::zero()) {
        moran_solve(&lambdas)?
    } else {
        T::zero()
    };
    let mut metadata = BTreeMap::new();
    metadata.insert("base_point".into(), base.to_string());
    metadata.insert("sample_depth".into(), depth.to_string());
    let n = ifs
        .maps
        .iter()
        .map(|m| m.as_branch().map(|b| b.depth).unwrap_or(1))
        .max()
        .unwrap_or(1);
    Ok(HyperbolicSetReport {
        sample,
        n,
        lambda_expansion,
        invariance_defect,
        images_disjoint,
        defect_tolerance: T::lit(DEFAULT_DEFECT_TOLERANCE),
        dimension_lower_bound: DimensionEstimate {
            t: t.as_f64(),
            method: EstimateMethod::MassLowerBound,
            depth,
            tolerance: 0.0,
            metadata,
        },
    })
}

/// Nearest-neighbour lookup on the embedded sphere via a uniform cube grid.
struct PointIndex<T> {
    cell: f64,
    grid: HashMap<[i64; 3], Vec<usize>>,
    points: Vec<SpherePoint<T>>,
}

impl<T: Real> PointIndex<T> {
    fn new(points: &[SpherePoint<T>], cell: T) -> Self {
        let cell = cell.as_f64();
        let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            grid.entry(Self::key(p, cell)).or_default().push(i);
        }
        PointIndex {
            cell,
            grid,
            points: points.to_vec(),
        }
    }

    fn key(p: &SpherePoint<T>, cell: f64) -> [i64; 3] {
        p.to_unit_vector()
            .map(|x| (x.as_f64() / cell).floor() as i64)
    }

    fn nearest_distance(&self, p: &SpherePoint<T>) -> T {
        let k = Self::key(p, self.cell);
        let mut best = T::infinity();
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = self.grid.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        for &i in ids {
                            best = best.min(spherical_distance(p, &self.points[i]));
                        }
                    }
                }
            }
        }
        // anything outside the neighbouring cells is farther than one cell
        if best.as_f64() <= self.cell {
            return best;
        }
        self.points
            .iter()
            .map(|q| spherical_distance(p, q))
            .fold(T::infinity(), T::min)
    }
}
