//! Finite conformal iterated function systems: limit-set sampling, the Moran
//! equation, and the pressure function with its root.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::branch::{koebe_distortion, pull_back_univalent, InverseBranch, MetricMode};
use crate::error::{Error, Result};
use crate::maps::HolomorphicMap;
use crate::scalar::{Real, C};
use crate::sphere::{
    disk_separation, enclosing_disk, spherical_distance, SpherePoint, SphericalDisk,
};

pub const DEFAULT_WORD_CAP: usize = 1_000_000;

/// One generator of a system.
#[derive(Clone, Debug)]
pub enum IfsMap<T = f64> {
    Inverse(InverseBranch<T>),
    /// `z ↦ a·z + b`.
    Similarity {
        a: C<T>,
        b: C<T>,
    },
}

impl<T: Real> IfsMap<T> {
    /// Image of `w` and the derivative norm there.
    pub fn apply(&self, w: &SpherePoint<T>, metric: MetricMode) -> Result<(SpherePoint<T>, T)> {
        match self {
            IfsMap::Inverse(b) => b.apply(w, metric),
            IfsMap::Similarity { a, b } => {
                let z = w
                    .finite()
                    .ok_or_else(|| Error::DomainError("similarity applied at infinity".into()))?;
                let image = *a * z + *b;
                let d = match metric {
                    MetricMode::PlanarEuclidean => a.norm(),
                    MetricMode::Spherical => {
                        a.norm() * (T::one() + z.norm_sqr()) / (T::one() + image.norm_sqr())
                    }
                };
                Ok((SpherePoint::new(image), d))
            }
        }
    }

    pub fn as_branch(&self) -> Option<&InverseBranch<T>> {
        match self {
            IfsMap::Inverse(b) => Some(b),
            IfsMap::Similarity { .. } => None,
        }
    }
}

/// Ambient disk `V`, generators `g_j: V → U_j`, and the metric derivatives are taken in.
#[derive(Clone, Debug)]
pub struct ConformalIFS<T = f64> {
    pub ambient: SphericalDisk<T>,
    pub maps: Vec<IfsMap<T>>,
    pub metric: MetricMode,
    /// Contraction bound `λ_j` of each generator.
    pub lambdas: Vec<T>,
    /// Sampled disks enclosing the images `U_j`.
    pub images: Vec<SphericalDisk<T>>,
}

impl<T: Real> ConformalIFS<T> {
    /// Validates the system: images enclosed in pairwise separated disks, each
    /// inside `V`, and every `λ_j ∈ (0, 1)`.
    pub fn new(
        ambient: SphericalDisk<T>,
        maps: Vec<IfsMap<T>>,
        metric: MetricMode,
    ) -> Result<Self> {
        let (images, lambdas) = Self::survey(&ambient, &maps, metric)?;
        for (j, l) in lambdas.iter().enumerate() {
            if !(*l > T::zero() && *l < T::one()) {
                return Err(Error::InvalidIfs(format!(
                    "generator {} has λ = {l}",
                    j + 1
                )));
            }
        }
        for (j, u) in images.iter().enumerate() {
            if !ambient.contains_disk(u, T::zero()) {
                return Err(Error::InvalidIfs(format!(
                    "image of generator {} is not compactly inside V",
                    j + 1
                )));
            }
            for (i, v) in images[..j].iter().enumerate() {
                if !disk_separation(u, v) {
                    return Err(Error::InvalidIfs(format!(
                        "images of generators {} and {} overlap",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(ConformalIFS {
            ambient,
            maps,
            metric,
            lambdas,
            images,
        })
    }

    /// Builds the system without the disjointness and containment checks, for
    /// negative controls and diagnostics.
    pub fn new_unchecked(
        ambient: SphericalDisk<T>,
        maps: Vec<IfsMap<T>>,
        metric: MetricMode,
    ) -> Result<Self> {
        let (images, lambdas) = Self::survey(&ambient, &maps, metric)?;
        Ok(ConformalIFS {
            ambient,
            maps,
            metric,
            lambdas,
            images,
        })
    }

    fn survey(
        ambient: &SphericalDisk<T>,
        maps: &[IfsMap<T>],
        metric: MetricMode,
    ) -> Result<(Vec<SphericalDisk<T>>, Vec<T>)> {
        if maps.is_empty() {
            return Err(Error::InvalidIfs("no generators".into()));
        }
        let ring = ambient.boundary_samples(64);
        let mut probes = ring.clone();
        probes.extend(ambient.interior_samples(3, 8));
        let mut images = Vec::with_capacity(maps.len());
        let mut lambdas = Vec::with_capacity(maps.len());
        for (j, g) in maps.iter().enumerate() {
            if let IfsMap::Inverse(b) = g {
                if !(b.base_disk.contains_disk(ambient, T::zero()) || b.base_disk == *ambient) {
                    return Err(Error::InvalidIfs(format!(
                        "branch {} is not defined on all of V",
                        j + 1
                    )));
                }
            }
            let applied: Vec<(SpherePoint<T>, T)> = probes
                .par_iter()
                .map(|w| g.apply(w, metric))
                .collect::<Result<_>>()?;
            let boundary: Vec<SpherePoint<T>> = applied[..ring.len()].iter().map(|a| a.0).collect();
            images.push(enclosing_disk(&boundary));
            let lambda = match (g, metric) {
                (IfsMap::Inverse(b), MetricMode::Spherical) => b.lambda,
                (IfsMap::Similarity { a, .. }, MetricMode::PlanarEuclidean) => a.norm(),
                _ => applied.iter().map(|a| a.1).fold(T::infinity(), T::min),
            };
            lambdas.push(lambda);
        }
        Ok((images, lambdas))
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    /// Image of `z` under the word `g_{j₁} ∘ … ∘ g_{jₙ}` and the log of its derivative norm.
    pub fn apply_word(
        &self,
        word: &SymbolicWord,
        z: &SpherePoint<T>,
    ) -> Result<(SpherePoint<T>, T)> {
        let mut p = *z;
        let mut log_d = T::zero();
        for &j in word.letters.iter().rev() {
            let g = self.maps.get(j).ok_or_else(|| {
                Error::DomainError(format!("letter {} outside the alphabet", j + 1))
            })?;
            let (q, d) = g.apply(&p, self.metric)?;
            p = q;
            log_d += d.ln();
        }
        Ok((p, log_d))
    }

    /// The system of branches of `z ↦ z²` of depth `k` over the disk of
    /// spherical radius `radius` centred at 1: one branch per `2ᵏ`-th root of
    /// unity whose image lies inside the disk.
    pub fn squaring_arc(k: usize, radius: T) -> Result<Self> {
        let f = HolomorphicMap::quadratic(Complex::new(T::zero(), T::zero()));
        let v = SphericalDisk::new(SpherePoint::real(T::one()), radius)?;
        let count = 1usize << k;
        let mut maps = Vec::new();
        for j in 0..count {
            let signed = if j <= count / 2 {
                j as f64
            } else {
                j as f64 - count as f64
            };
            let anchor = SpherePoint::unit(T::TAU() * T::lit(signed / count as f64));
            if !v.contains(&anchor) {
                continue;
            }
            let b = pull_back_univalent(&f, k, &v, &anchor)?;
            if v.contains_disk(&b.image_disk, T::zero()) {
                maps.push((signed, b));
            }
        }
        maps.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        Self::new(
            v,
            maps.into_iter().map(|(_, b)| IfsMap::Inverse(b)).collect(),
            MetricMode::Spherical,
        )
    }
}

/// A word `(j₁, …, jₙ)` over the generators, stored zero-based.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SymbolicWord {
    pub letters: Vec<usize>,
}

impl SymbolicWord {
    pub fn new(letters: Vec<usize>) -> Self {
        SymbolicWord { letters }
    }

    pub fn empty() -> Self {
        SymbolicWord::default()
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }
}

impl fmt::Display for SymbolicWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, j) in self.letters.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", j + 1)?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimateMethod {
    MoranRoot,
    PressureRoot,
    BoxCounting,
    MassLowerBound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub t: f64,
    pub method: EstimateMethod,
    pub depth: usize,
    pub tolerance: f64,
    pub metadata: BTreeMap<String, String>,
}

/// Solves `Σ λ_jᵗ = 1`.
pub fn moran_solve<T: Real>(lambdas: &[T]) -> Result<T> {
    check_ratios(lambdas)?;
    if lambdas.len() == 1 {
        return Ok(T::zero());
    }
    let excess = |t: T| lambdas.iter().map(|l| l.powf(t)).sum::<T>() - T::one();
    let mut hi = T::one();
    while excess(hi) > T::zero() {
        hi *= T::lit(2.0);
        if hi > T::lit(1e6) {
            return Err(Error::BracketFailure(
                "Moran sum does not drop below 1".into(),
            ));
        }
    }
    let mut lo = T::zero();
    let target = T::tol(1e-12);
    for _ in 0..300 {
        let mid = (lo + hi) / T::lit(2.0);
        let e = excess(mid);
        if e.abs() < target * T::lit(1e-3) || hi - lo <= T::epsilon() * hi {
            return Ok(mid);
        }
        if e > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / T::lit(2.0))
}

/// `Σ λ_jᵗ ≥ 1`.
pub fn mass_check<T: Real>(lambdas: &[T], t: T) -> bool {
    lambdas.iter().map(|l| l.powf(t)).sum::<T>() >= T::one()
}

fn check_ratios<T: Real>(lambdas: &[T]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(Error::DomainError("no contraction ratios".into()));
    }
    if let Some(l) = lambdas
        .iter()
        .find(|l| !(**l > T::zero() && **l < T::one()))
    {
        return Err(Error::DomainError(format!("ratio {l} outside (0, 1)")));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct EnumerationOptions {
    pub cap: usize,
    /// Number of uniformly drawn words and the seed, used when `mⁿ` exceeds the cap.
    pub sampling: Option<(usize, u64)>,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        EnumerationOptions {
            cap: DEFAULT_WORD_CAP,
            sampling: None,
        }
    }
}

/// Image of the base point and log derivative norm for one word.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Leaf<T = f64> {
    pub point: SpherePoint<T>,
    pub log_deriv: T,
}

fn word_count(m: usize, n: usize) -> u128 {
    (0..n).fold(1u128, |acc, _| acc.saturating_mul(m as u128))
}

/// Every depth-`n` word applied to `z0`, in lexicographic order of `(j₁, …, jₙ)`.
pub fn enumerate_words<T: Real>(
    ifs: &ConformalIFS<T>,
    depth: usize,
    z0: &SpherePoint<T>,
    cap: usize,
) -> Result<Vec<Leaf<T>>> {
    let words = word_count(ifs.len(), depth);
    if words > cap as u128 {
        return Err(Error::EnumerationOverflow { words, cap });
    }
    let mut level = vec![Leaf {
        point: *z0,
        log_deriv: T::zero(),
    }];
    // the innermost letter is applied first; each pass prepends an outer letter
    for _ in 0..depth {
        let next: Vec<Vec<Leaf<T>>> = ifs
            .maps
            .par_iter()
            .map(|g| {
                level
                    .iter()
                    .map(|leaf| {
                        let (p, d) = g.apply(&leaf.point, ifs.metric)?;
                        Ok(Leaf {
                            point: p,
                            log_deriv: leaf.log_deriv + d.ln(),
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        level = next.into_iter().flatten().collect();
    }
    Ok(level)
}

/// Log derivative norms of depth-`n` words, enumerated or sampled; evaluates
/// `Pₙ(t)` for any `t` without recomputing the words.
#[derive(Clone, Debug)]
pub struct PressureSurface<T = f64> {
    pub depth: usize,
    pub log_derivs: Vec<T>,
    /// Added to the log-sum: `n·log m − log N` when sampling, otherwise 0.
    pub log_scale: T,
    pub sampled: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PressureValue<T = f64> {
    pub value: T,
    /// Standard error of a sampled estimate.
    pub std_error: Option<T>,
}

impl<T: Real> PressureSurface<T> {
    pub fn build(
        ifs: &ConformalIFS<T>,
        depth: usize,
        z0: &SpherePoint<T>,
        opts: &EnumerationOptions,
    ) -> Result<Self> {
        if depth == 0 {
            return Err(Error::DomainError("pressure needs depth at least 1".into()));
        }
        let words = word_count(ifs.len(), depth);
        if words <= opts.cap as u128 {
            let leaves = enumerate_words(ifs, depth, z0, opts.cap)?;
            return Ok(PressureSurface {
                depth,
                log_derivs: leaves.into_iter().map(|l| l.log_deriv).collect(),
                log_scale: T::zero(),
                sampled: false,
            });
        }
        let Some((count, seed)) = opts.sampling else {
            return Err(Error::EnumerationOverflow {
                words,
                cap: opts.cap,
            });
        };
        let count = count.max(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let drawn: Vec<SymbolicWord> = (0..count)
            .map(|_| {
                SymbolicWord::new((0..depth).map(|_| rng.random_range(0..ifs.len())).collect())
            })
            .collect();
        let log_derivs = drawn
            .par_iter()
            .map(|w| ifs.apply_word(w, z0).map(|r| r.1))
            .collect::<Result<Vec<_>>>()?;
        Ok(PressureSurface {
            depth,
            log_derivs,
            log_scale: T::lit(depth as f64) * T::lit(ifs.len() as f64).ln()
                - T::lit(count as f64).ln(),
            sampled: true,
        })
    }

    /// `Pₙ(t)`.
    pub fn value(&self, t: T) -> T {
        (self.log_scale + log_sum_exp(&self.log_derivs, t)) / T::lit(self.depth as f64)
    }

    pub fn evaluate(&self, t: T) -> PressureValue<T> {
        let value = self.value(t);
        if !self.sampled {
            return PressureValue {
                value,
                std_error: None,
            };
        }
        let top = self
            .log_derivs
            .iter()
            .map(|l| *l * t)
            .fold(T::neg_infinity(), T::max);
        let xs: Vec<T> = self
            .log_derivs
            .iter()
            .map(|l| (*l * t - top).exp())
            .collect();
        let n = T::lit(xs.len() as f64);
        let mean = xs.iter().copied().sum::<T>() / n;
        let var = xs.iter().map(|x| (*x - mean).powi(2)).sum::<T>() / (n - T::one());
        let rel = (var / n).sqrt() / mean;
        PressureValue {
            value,
            std_error: Some(rel / T::lit(self.depth as f64)),
        }
    }
}

/// `log Σ exp(t·xᵢ)`, summed in fixed-size blocks so the result does not
/// depend on the thread count.
pub fn log_sum_exp<T: Real>(xs: &[T], t: T) -> T {
    if xs.is_empty() {
        return T::neg_infinity();
    }
    let top = xs.iter().map(|x| *x * t).fold(T::neg_infinity(), T::max);
    if !top.is_finite() {
        return top;
    }
    let blocks: Vec<T> = xs
        .par_chunks(4096)
        .map(|c| {
            c.iter()
                .map(|x| (*x * t - top).exp())
                .fold(T::zero(), |a, b| a + b)
        })
        .collect();
    top + blocks.into_iter().fold(T::zero(), |a, b| a + b).ln()
}

/// `Pₙ(t)` at base point `z0`.
pub fn pressure<T: Real>(
    ifs: &ConformalIFS<T>,
    t: T,
    depth: usize,
    z0: &SpherePoint<T>,
    opts: &EnumerationOptions,
) -> Result<PressureValue<T>> {
    Ok(PressureSurface::build(ifs, depth, z0, opts)?.evaluate(t))
}

/// Root of `t ↦ Pₙ(t)` on `[0, 2]` by bisection, with the probe values checked
/// for monotonicity.
pub fn surface_root<T: Real>(surface: &PressureSurface<T>, tol: T) -> Result<T> {
    let p0 = surface.value(T::zero());
    if p0.abs() <= T::epsilon() * T::lit(8.0) {
        // single generator: P(0) = 0 and the root convention is t = 0
        return Ok(T::zero());
    }
    let two = T::lit(2.0);
    let p2 = surface.value(two);
    if p0 < T::zero() || p2 > T::zero() {
        return Err(Error::BracketFailure(format!(
            "P(0) = {p0}, P(2) = {p2} at depth {}",
            surface.depth
        )));
    }
    let mut probes = vec![(T::zero(), p0), (two, p2)];
    let (mut lo, mut hi) = (T::zero(), two);
    while hi - lo > tol {
        let mid = (lo + hi) / two;
        let p = surface.value(mid);
        probes.push((mid, p));
        if p > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= T::epsilon() * two {
            break;
        }
    }
    probes.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let slack = T::epsilon() * T::lit(64.0) * (T::one() + p0.abs());
    for w in probes.windows(2) {
        if w[1].1 > w[0].1 + slack {
            return Err(Error::NonMonotonePressure(format!(
                "P({}) = {} < P({}) = {}",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
    }
    Ok((lo + hi) / two)
}

/// Pressure roots at every scheduled depth, base point the centre of `V`.
pub fn pressure_roots<T: Real>(
    ifs: &ConformalIFS<T>,
    depth_schedule: &[usize],
    tol: T,
    opts: &EnumerationOptions,
) -> Result<Vec<(usize, T)>> {
    depth_schedule
        .iter()
        .map(|&n| {
            let s = PressureSurface::build(ifs, n, &ifs.ambient.center, opts)?;
            Ok((n, surface_root(&s, tol)?))
        })
        .collect()
}

/// The pressure root at the deepest scheduled level; the tolerance is the
/// larger of `tol` and the spread between the last two levels.
pub fn pressure_root<T: Real>(
    ifs: &ConformalIFS<T>,
    depth_schedule: &[usize],
    tol: T,
) -> Result<DimensionEstimate> {
    pressure_root_with(ifs, depth_schedule, tol, &EnumerationOptions::default())
}

pub fn pressure_root_with<T: Real>(
    ifs: &ConformalIFS<T>,
    depth_schedule: &[usize],
    tol: T,
    opts: &EnumerationOptions,
) -> Result<DimensionEstimate> {
    if depth_schedule.is_empty() || !(tol > T::zero()) {
        return Err(Error::DomainError(
            "empty depth schedule or non-positive tolerance".into(),
        ));
    }
    let mut schedule = depth_schedule.to_vec();
    schedule.sort_unstable();
    schedule.dedup();
    let roots = pressure_roots(ifs, &schedule, tol, opts)?;
    let (depth, t) = *roots.last().unwrap();
    let spread = if roots.len() >= 2 {
        (t - roots[roots.len() - 2].1).abs()
    } else {
        T::zero()
    };
    let mut metadata = BTreeMap::new();
    metadata.insert("base_point".into(), ifs.ambient.center.to_string());
    metadata.insert("metric".into(), format!("{:?}", ifs.metric));
    metadata.insert("generators".into(), ifs.len().to_string());
    metadata.insert(
        "roots_by_depth".into(),
        roots
            .iter()
            .map(|(n, t)| format!("{n}:{}", t.as_f64()))
            .collect::<Vec<_>>()
            .join(","),
    );
    metadata.insert("spread".into(), spread.as_f64().to_string());
    metadata.insert("koebe".into(), koebe_distortion(0.5f64)?.to_string());
    Ok(DimensionEstimate {
        t: t.as_f64(),
        method: EstimateMethod::PressureRoot,
        depth,
        tolerance: tol.max(spread).as_f64(),
        metadata,
    })
}

/// Images of the centre of `V` under every depth-`n` word.
pub fn limit_set_sample<T: Real>(
    ifs: &ConformalIFS<T>,
    depth: usize,
    cap: usize,
) -> Result<Vec<SpherePoint<T>>> {
    Ok(enumerate_words(ifs, depth, &ifs.ambient.center, cap)?
        .into_iter()
        .map(|l| l.point)
        .collect())
}

/// Smallest pairwise distance among the points, `∞` for fewer than two.
pub fn min_separation<T: Real>(points: &[SpherePoint<T>]) -> T {
    (0..points.len())
        .into_par_iter()
        .map(|i| {
            points[i + 1..]
                .iter()
                .map(|q| spherical_distance(&points[i], q))
                .fold(T::infinity(), T::min)
        })
        .reduce(|| T::infinity(), T::min)
}
