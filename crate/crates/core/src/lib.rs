//! Radial Julia sets, conformal iterated function systems and constructive
//! lower bounds for hyperbolic dimension, on the Riemann sphere.
//!
//! Everything numeric is generic over a [`Real`] scalar; the aliases below fix
//! it to `f64`.

pub mod branch;
pub mod error;
pub mod hyperdim;
pub mod ifs;
pub mod maps;
pub mod poly;
pub mod radial;
pub mod scalar;
pub mod serial;
pub mod sphere;

pub use branch::{
    koebe_distortion, pull_back_univalent, univalence_constant, BranchConfig, MetricMode,
};
pub use error::{Error, Result};
pub use hyperdim::{
    box_counting, build_hyperbolic_ifs, five_r_cover, two_branch_construction, verify_hyperbolic,
};
pub use ifs::{
    limit_set_sample, moran_solve, pressure, pressure_root, DimensionEstimate, EstimateMethod,
    IfsMap, SymbolicWord,
};
pub use maps::HolomorphicMap;
pub use radial::{detect_radial, disk_of_univalence};
pub use scalar::Real;
pub use sphere::{disk_contains, disk_separation, spherical_distance};

pub type SpherePoint = sphere::SpherePoint<f64>;
pub type SphericalDisk = sphere::SphericalDisk<f64>;
pub type Map = maps::HolomorphicMap<f64>;
pub type InverseBranch = branch::InverseBranch<f64>;
pub type ConformalIFS = ifs::ConformalIFS<f64>;
pub type RadialCertificate = radial::RadialCertificate<f64>;
pub type HyperbolicBuild = hyperdim::HyperbolicBuild<f64>;
pub type HyperbolicSetReport = hyperdim::HyperbolicSetReport<f64>;
