//! Numerical toolkit for the dual Brunn-Minkowski theory: dual
//! quermassintegrals of origin-symmetric convex bodies in three equivalent
//! formulations, John-position normalization, and inequality
//! checking/searching.
//!
//! Modules:
//! - [`bodies`]: convex body representations with radial/support/gauge
//!   evaluation, constructors, and seeded random generation
//! - [`lp`]: dense two-phase simplex backing the V-polytope queries
//! - [`quad`]: sphere quadrature rules and Gaussian sampling
//! - [`functionals`]: dual quermassintegrals Ṽ_q, V̄_q and dual entropies
//! - [`john`]: maximum-volume inscribed ellipsoid and contact diagnostics
//! - [`verify`]: inequality checkers and the counterexample-search harness

pub mod bodies;
pub mod error;
pub mod functionals;
pub mod john;
pub mod lp;
pub mod numeric;
pub mod quad;
pub mod verify;

pub use bodies::{ConvexBody, Direction, EllipsoidMatrix, GeneratorSpec, Vector};
pub use error::{Error, Result};
pub use functionals::{
    dual_entropy, dual_querm, normalized_dual_querm, omega, DualVolumeResult, EntropyResult,
};
pub use quad::{sphere_rule, GaussianSample, Scheme, SphereRule};
pub use verify::{CheckReport, Finding, SearchConfig, Verdict};
