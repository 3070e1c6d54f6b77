//! Origin-symmetric convex bodies with exact or LP-backed evaluation of the
//! radial, support and gauge functions.
//!
//! Symmetry is structural: H-polytopes and V-polytopes store one
//! representative per ± pair and mirror at evaluation time, so `K = −K` cannot
//! be violated by construction. The one escape hatch is the non-mirrored
//! V-polytope used by the counterexample search for non-symmetric probing.

mod generate;
mod io;

pub use generate::{random_body, BodyFamily, GeneratorSpec};

use crate::error::{Error, Result};
use crate::lp;
use nalgebra::{DMatrix, DVector};

/// Point or direction coordinates in ℝⁿ.
pub type Vector = DVector<f64>;

const DEGENERATE_DOT: f64 = 1e-14;
const CONDITION_LIMIT: f64 = 1e12;

/// Unit vector on 𝕊^{n−1}, validated to 1e-12.
#[derive(Clone, Debug, PartialEq)]
pub struct Direction(Vector);

impl Direction {
    pub fn new(v: Vector) -> Result<Self> {
        let norm = v.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidBody(format!(
                "direction must have unit norm, got ‖v‖ = {norm}"
            )));
        }
        Ok(Self(v))
    }

    /// Normalizes an arbitrary non-zero vector.
    pub fn from_vector(v: &Vector) -> Result<Self> {
        let norm = v.norm();
        if !norm.is_finite() || norm < 1e-300 {
            return Err(Error::InvalidBody("cannot normalize a zero vector".into()));
        }
        Ok(Self(v / norm))
    }

    pub fn as_vector(&self) -> &Vector {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn flipped(&self) -> Self {
        Self(-&self.0)
    }
}

/// Symmetric positive-definite matrix M encoding the ellipsoid
/// {x : xᵀ M⁻¹ x ≤ 1}. The inverse is cached at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct EllipsoidMatrix {
    m: DMatrix<f64>,
    inv: DMatrix<f64>,
}

impl EllipsoidMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if n < 1 || m.ncols() != n {
            return Err(Error::InvalidBody("ellipsoid matrix must be square".into()));
        }
        let scale = m.amax();
        if !scale.is_finite() {
            return Err(Error::NonFiniteValue("ellipsoid matrix".into()));
        }
        for i in 0..n {
            for j in 0..n {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * (1.0 + scale) {
                    return Err(Error::InvalidBody(
                        "ellipsoid matrix must be symmetric within 1e-12".into(),
                    ));
                }
            }
        }
        // exact symmetrization, then SPD check via Cholesky
        let sym = (&m + m.transpose()) * 0.5;
        let chol = sym
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidBody("ellipsoid matrix must be positive definite".into()))?;
        let inv = chol.inverse();
        Ok(Self { m: sym, inv })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inv
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    /// √det M, the volume of the ellipsoid divided by ω_n.
    pub fn det_sqrt(&self) -> f64 {
        self.m
            .clone()
            .cholesky()
            .map(|c| c.l().determinant())
            .unwrap_or(f64::NAN)
    }

    pub fn volume(&self) -> f64 {
        crate::numeric::unit_ball_volume(self.dim()) * self.det_sqrt()
    }

    /// Symmetric inverse square root M^{−1/2} via eigendecomposition.
    pub fn inv_sqrt(&self) -> DMatrix<f64> {
        let eig = self.m.clone().symmetric_eigen();
        let n = self.dim();
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            d[(i, i)] = 1.0 / eig.eigenvalues[i].max(0.0).sqrt();
        }
        &eig.eigenvectors * d * eig.eigenvectors.transpose()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.m
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.m
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Tagged representation of a convex body with the origin in its interior.
#[derive(Clone, Debug, PartialEq)]
pub enum ConvexBody {
    /// {x : |⟨a_i, x⟩| ≤ b_i}, one row per ± facet pair, all b_i > 0.
    HPolytope {
        normals: Vec<Vector>,
        offsets: Vec<f64>,
    },
    /// conv{±p_1, …, ±p_k} when `mirror`, conv{p_1, …, p_k} otherwise.
    VPolytope { points: Vec<Vector>, mirror: bool },
    /// {x : ‖x‖_p ≤ r}, p ∈ [1, ∞].
    LpBall { dim: usize, p: f64, r: f64 },
    Ellipsoid(EllipsoidMatrix),
    /// Minkowski sum node; evaluation requires both sides to reduce to
    /// V-polytopes.
    Sum(Box<ConvexBody>, Box<ConvexBody>),
    /// Linear image T·K for invertible T; the inverse is cached.
    Image {
        transform: DMatrix<f64>,
        inverse: DMatrix<f64>,
        inner: Box<ConvexBody>,
    },
}

fn check_dim(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidBody(format!(
            "ambient dimension must be at least 2, got {n}"
        )));
    }
    Ok(())
}

fn spans(vectors: &[Vector], n: usize) -> bool {
    if vectors.len() < n {
        return false;
    }
    let m = DMatrix::from_fn(vectors.len(), n, |i, j| vectors[i][j]);
    m.rank(1e-10) == n
}

impl ConvexBody {
    pub fn hpolytope(normals: Vec<Vector>, offsets: Vec<f64>) -> Result<Self> {
        if normals.is_empty() || normals.len() != offsets.len() {
            return Err(Error::InvalidBody(
                "H-polytope needs matching, non-empty normals and offsets".into(),
            ));
        }
        let n = normals[0].len();
        check_dim(n)?;
        for a in &normals {
            if a.len() != n {
                return Err(Error::DimensionMismatch("facet normal dimension".into()));
            }
            if !a.iter().all(|v| v.is_finite()) || a.norm() < 1e-300 {
                return Err(Error::InvalidBody("facet normal must be finite and non-zero".into()));
            }
        }
        if offsets.iter().any(|&b| !(b > 0.0) || !b.is_finite()) {
            return Err(Error::InvalidBody(
                "H-polytope offsets must be positive (origin interior)".into(),
            ));
        }
        if !spans(&normals, n) {
            return Err(Error::InvalidBody(
                "facet normals must span ℝⁿ (bounded body)".into(),
            ));
        }
        Ok(Self::HPolytope { normals, offsets })
    }

    pub fn vpolytope(points: Vec<Vector>) -> Result<Self> {
        Self::vpolytope_inner(points, true)
    }

    /// Non-mirrored V-polytope for the non-symmetric search probes. The
    /// origin must be interior; this is only fully verified at evaluation
    /// time by the radial LP.
    pub fn vpolytope_nonsymmetric(points: Vec<Vector>) -> Result<Self> {
        Self::vpolytope_inner(points, false)
    }

    fn vpolytope_inner(points: Vec<Vector>, mirror: bool) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidBody("V-polytope needs points".into()));
        }
        let n = points[0].len();
        check_dim(n)?;
        for p in &points {
            if p.len() != n {
                return Err(Error::DimensionMismatch("point dimension".into()));
            }
            if !p.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFiniteValue("V-polytope point".into()));
            }
        }
        if !spans(&points, n) {
            return Err(Error::InvalidBody("points must span ℝⁿ".into()));
        }
        Ok(Self::VPolytope { points, mirror })
    }

    pub fn lp_ball(dim: usize, p: f64, r: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(p >= 1.0) {
            return Err(Error::InvalidBody(format!("ℓp exponent must be ≥ 1, got {p}")));
        }
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidBody(format!("ℓp radius must be positive, got {r}")));
        }
        Ok(Self::LpBall { dim, p, r })
    }

    /// The cube r·B∞ⁿ.
    pub fn cube(dim: usize, r: f64) -> Result<Self> {
        Self::lp_ball(dim, f64::INFINITY, r)
    }

    /// The Euclidean ball r·B₂ⁿ.
    pub fn ball(dim: usize, r: f64) -> Result<Self> {
        Self::lp_ball(dim, 2.0, r)
    }

    /// The cross-polytope r·B₁ⁿ.
    pub fn cross_polytope(dim: usize, r: f64) -> Result<Self> {
        Self::lp_ball(dim, 1.0, r)
    }

    pub fn ellipsoid(m: EllipsoidMatrix) -> Self {
        Self::Ellipsoid(m)
    }

    /// Minkowski sum node K + L. Composition errors (operands that do not
    /// reduce to V-polytopes) surface at evaluation time.
    pub fn minkowski_sum(left: ConvexBody, right: ConvexBody) -> Result<Self> {
        if left.dim() != right.dim() {
            return Err(Error::DimensionMismatch(format!(
                "Minkowski sum of dimensions {} and {}",
                left.dim(),
                right.dim()
            )));
        }
        Ok(Self::Sum(Box::new(left), Box::new(right)))
    }

    /// Linear image T·K for invertible T (condition number below 1e12).
    pub fn linear_image(transform: DMatrix<f64>, inner: ConvexBody) -> Result<Self> {
        let n = inner.dim();
        if transform.nrows() != n || transform.ncols() != n {
            return Err(Error::DimensionMismatch("transform must be n×n".into()));
        }
        if !transform.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteValue("transform".into()));
        }
        let svd = transform.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if !(smin > 0.0) || smax / smin > CONDITION_LIMIT {
            return Err(Error::SingularTransform);
        }
        let inverse = transform
            .clone()
            .try_inverse()
            .ok_or(Error::SingularTransform)?;
        Ok(Self::Image {
            transform,
            inverse,
            inner: Box::new(inner),
        })
    }

    /// Dilate t·K for t > 0, applied structurally per variant.
    pub fn scale(&self, t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidBody(format!("scale factor must be positive, got {t}")));
        }
        Ok(match self {
            Self::HPolytope { normals, offsets } => Self::HPolytope {
                normals: normals.clone(),
                offsets: offsets.iter().map(|b| b * t).collect(),
            },
            Self::VPolytope { points, mirror } => Self::VPolytope {
                points: points.iter().map(|p| p * t).collect(),
                mirror: *mirror,
            },
            Self::LpBall { dim, p, r } => Self::LpBall {
                dim: *dim,
                p: *p,
                r: r * t,
            },
            Self::Ellipsoid(e) => Self::Ellipsoid(EllipsoidMatrix::new(e.matrix() * (t * t))?),
            Self::Sum(l, r) => Self::Sum(Box::new(l.scale(t)?), Box::new(r.scale(t)?)),
            Self::Image {
                transform, inner, ..
            } => Self::linear_image(transform * t, (**inner).clone())?,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::HPolytope { normals, .. } => normals[0].len(),
            Self::VPolytope { points, .. } => points[0].len(),
            Self::LpBall { dim, .. } => *dim,
            Self::Ellipsoid(e) => e.dim(),
            Self::Sum(l, _) => l.dim(),
            Self::Image { inner, .. } => inner.dim(),
        }
    }

    /// Structural origin symmetry; false only for non-mirrored V-polytopes.
    pub fn is_origin_symmetric(&self) -> bool {
        match self {
            Self::VPolytope { mirror, .. } => *mirror,
            Self::Sum(l, r) => l.is_origin_symmetric() && r.is_origin_symmetric(),
            Self::Image { inner, .. } => inner.is_origin_symmetric(),
            _ => true,
        }
    }

    /// Full point list of a V-polytope including mirrored partners.
    pub fn symmetric_points(&self) -> Result<Vec<Vector>> {
        match self {
            Self::VPolytope { points, mirror } => {
                let mut out = points.clone();
                if *mirror {
                    out.extend(points.iter().map(|p| -p));
                }
                Ok(out)
            }
            _ => Err(Error::UnsupportedComposition(
                "symmetric_points is defined for V-polytopes".into(),
            )),
        }
    }

    /// Homogeneous radial function ρ_K(x) = sup{λ ≥ 0 : λx ∈ K}; +∞ at the
    /// origin, degree −1 homogeneous elsewhere.
    pub fn radial_homog(&self, x: &Vector) -> Result<f64> {
        RadialEvaluator::new(self)?.eval(x)
    }

    /// Radial function on the sphere.
    pub fn radial_unit(&self, u: &Direction) -> Result<f64> {
        self.radial_homog(u.as_vector())
    }

    /// Gauge (Minkowski functional) ‖x‖_K = inf{t > 0 : x ∈ tK}; 0 at the
    /// origin.
    pub fn gauge(&self, x: &Vector) -> Result<f64> {
        RadialEvaluator::new(self)?.gauge(x)
    }

    /// Support function h_K(u) = max_{x∈K} ⟨x, u⟩, evaluated for an arbitrary
    /// vector u (degree 1 homogeneous).
    pub fn support(&self, u: &Vector) -> Result<f64> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch("support direction".into()));
        }
        match self {
            Self::HPolytope { normals, offsets } => lp::support_hpolytope(normals, offsets, u),
            Self::VPolytope { points, mirror } => {
                let mut best = f64::NEG_INFINITY;
                for p in points {
                    let d = p.dot(u);
                    best = best.max(if *mirror { d.abs() } else { d });
                }
                Ok(best)
            }
            Self::LpBall { p, r, .. } => Ok(r * dual_norm(u, *p)),
            Self::Ellipsoid(e) => Ok((u.dot(&(e.matrix() * u))).sqrt()),
            Self::Sum(l, r) => Ok(l.support(u)? + r.support(u)?),
            Self::Image {
                transform, inner, ..
            } => inner.support(&(transform.transpose() * u)),
        }
    }

    /// Polar body K° = {y : ⟨x, y⟩ ≤ 1 ∀x ∈ K}, swapping H- and
    /// V-representations of symmetric polytopes.
    pub fn polar(&self) -> Result<Self> {
        match self {
            Self::VPolytope { points, mirror } => {
                if !mirror {
                    return Err(Error::UnsupportedComposition(
                        "polar of a non-symmetric V-polytope".into(),
                    ));
                }
                let offsets = vec![1.0; points.len()];
                Self::hpolytope(points.clone(), offsets)
            }
            Self::HPolytope { normals, offsets } => {
                let pts = normals
                    .iter()
                    .zip(offsets)
                    .map(|(a, &b)| a / b)
                    .collect::<Vec<_>>();
                Self::vpolytope(pts)
            }
            _ => Err(Error::UnsupportedComposition(
                "polar is defined for symmetric H- and V-polytopes".into(),
            )),
        }
    }

    /// H-representation (one row per ± pair) where one exists without vertex
    /// or facet enumeration.
    pub fn to_hpolytope(&self) -> Result<(Vec<Vector>, Vec<f64>)> {
        match self {
            Self::HPolytope { normals, offsets } => Ok((normals.clone(), offsets.clone())),
            Self::LpBall { dim, p, r } => {
                if *p == f64::INFINITY {
                    let normals = (0..*dim)
                        .map(|i| {
                            let mut e = Vector::zeros(*dim);
                            e[i] = 1.0;
                            e
                        })
                        .collect();
                    Ok((normals, vec![*r; *dim]))
                } else if *p == 1.0 {
                    let mut normals = Vec::new();
                    // sign vectors with first coordinate fixed at +1: one per ± pair
                    for mask in 0..(1u32 << (*dim - 1)) {
                        let mut v = Vector::from_element(*dim, 1.0);
                        for j in 0..(*dim - 1) {
                            if mask & (1 << j) != 0 {
                                v[j + 1] = -1.0;
                            }
                        }
                        normals.push(v);
                    }
                    let m = normals.len();
                    Ok((normals, vec![*r; m]))
                } else {
                    Err(Error::UnsupportedComposition(format!(
                        "no H-representation for ℓ{p} balls"
                    )))
                }
            }
            Self::Image {
                inverse, inner, ..
            } => {
                let (normals, offsets) = inner.to_hpolytope()?;
                let mapped = normals
                    .iter()
                    .map(|a| inverse.transpose() * a)
                    .collect::<Vec<_>>();
                Ok((mapped, offsets))
            }
            _ => Err(Error::UnsupportedComposition(
                "body has no available H-representation".into(),
            )),
        }
    }

    /// V-representation as (representatives, mirror flag). Minkowski sums are
    /// expanded into pairwise point sums; redundant (non-extreme) candidates
    /// are allowed, the per-direction LP tolerates them.
    pub fn reduce_to_vpolytope(&self) -> Result<(Vec<Vector>, bool)> {
        match self {
            Self::VPolytope { points, mirror } => Ok((points.clone(), *mirror)),
            Self::LpBall { dim, p, r } => lp_ball_vertices(*dim, *p, *r),
            Self::Sum(l, r) => {
                let (pl, ml) = l.reduce_to_vpolytope()?;
                let (pr, mr) = r.reduce_to_vpolytope()?;
                if ml && mr {
                    // representatives p_i ± q_j cover all of (±p) + (±q)
                    let mut pts = Vec::with_capacity(2 * pl.len() * pr.len());
                    for p in &pl {
                        for q in &pr {
                            pts.push(p + q);
                            pts.push(p - q);
                        }
                    }
                    Ok((pts, true))
                } else {
                    let full = |pts: Vec<Vector>, mirror: bool| -> Vec<Vector> {
                        if mirror {
                            let mut out = pts.clone();
                            out.extend(pts.iter().map(|p| -p));
                            out
                        } else {
                            pts
                        }
                    };
                    let fl = full(pl, ml);
                    let fr = full(pr, mr);
                    let mut pts = Vec::with_capacity(fl.len() * fr.len());
                    for p in &fl {
                        for q in &fr {
                            pts.push(p + q);
                        }
                    }
                    Ok((pts, false))
                }
            }
            Self::Image {
                transform, inner, ..
            } => {
                let (pts, mirror) = inner.reduce_to_vpolytope()?;
                Ok((pts.iter().map(|p| transform * p).collect(), mirror))
            }
            Self::HPolytope { .. } => Err(Error::UnsupportedComposition(
                "H-polytope vertex enumeration is not provided".into(),
            )),
            Self::Ellipsoid(_) => Err(Error::UnsupportedComposition(
                "ellipsoids do not reduce to V-polytopes".into(),
            )),
        }
    }

    /// Rigorous upper bound on the circumradius, where the representation
    /// provides one.
    pub fn circumradius_bound(&self) -> Option<f64> {
        match self {
            Self::VPolytope { points, .. } => {
                Some(points.iter().map(|p| p.norm()).fold(0.0, f64::max))
            }
            Self::LpBall { dim, p, r } => {
                let n = *dim as f64;
                Some(if *p >= 2.0 {
                    r * n.powf(0.5 - 1.0 / p)
                } else {
                    *r
                })
            }
            Self::Ellipsoid(e) => Some(e.max_eigenvalue().sqrt()),
            Self::Sum(l, r) => Some(l.circumradius_bound()? + r.circumradius_bound()?),
            Self::Image {
                transform, inner, ..
            } => {
                let op_norm = transform.clone().svd(false, false).singular_values.max();
                Some(op_norm * inner.circumradius_bound()?)
            }
            Self::HPolytope { .. } => None,
        }
    }

    /// Rigorous lower bound on the inradius, where the representation
    /// provides one.
    pub fn inradius_bound(&self) -> Option<f64> {
        match self {
            Self::HPolytope { normals, offsets } => Some(
                normals
                    .iter()
                    .zip(offsets)
                    .map(|(a, &b)| b / a.norm())
                    .fold(f64::INFINITY, f64::min),
            ),
            Self::LpBall { dim, p, r } => {
                let n = *dim as f64;
                Some(if *p >= 2.0 {
                    *r
                } else {
                    r * n.powf(0.5 - 1.0 / p)
                })
            }
            Self::Ellipsoid(e) => Some(e.min_eigenvalue().sqrt()),
            Self::Sum(l, r) => Some(l.inradius_bound()? + r.inradius_bound()?),
            Self::Image {
                transform, inner, ..
            } => {
                let smin = transform.clone().svd(false, false).singular_values.min();
                Some(smin * inner.inradius_bound()?)
            }
            Self::VPolytope { .. } => None,
        }
    }

    /// Decomposition of a (possibly nested) Minkowski sum into V-polytope
    /// summand blocks, distributing linear images over the sum.
    fn summand_sets(&self) -> Result<Vec<(Vec<Vector>, bool)>> {
        match self {
            Self::Sum(l, r) => {
                let mut out = l.summand_sets()?;
                out.extend(r.summand_sets()?);
                Ok(out)
            }
            Self::Image {
                transform, inner, ..
            } => {
                let inner_sets = inner.summand_sets()?;
                Ok(inner_sets
                    .into_iter()
                    .map(|(pts, m)| (pts.iter().map(|p| transform * p).collect(), m))
                    .collect())
            }
            _ => Ok(vec![self.reduce_to_vpolytope()?]),
        }
    }
}

fn lp_ball_vertices(dim: usize, p: f64, r: f64) -> Result<(Vec<Vector>, bool)> {
    if p == 1.0 {
        let pts = (0..dim)
            .map(|i| {
                let mut e = Vector::zeros(dim);
                e[i] = r;
                e
            })
            .collect();
        Ok((pts, true))
    } else if p == f64::INFINITY {
        if dim > 6 {
            return Err(Error::UnsupportedComposition(format!(
                "cube-to-V-polytope conversion is limited to n ≤ 6, got n = {dim}"
            )));
        }
        let mut pts = Vec::with_capacity(1 << (dim - 1));
        for mask in 0..(1u32 << (dim - 1)) {
            let mut v = Vector::from_element(dim, r);
            for j in 0..(dim - 1) {
                if mask & (1 << j) != 0 {
                    v[j + 1] = -r;
                }
            }
            pts.push(v);
        }
        Ok((pts, true))
    } else {
        Err(Error::UnsupportedComposition(format!(
            "ℓ{p} balls do not reduce to V-polytopes"
        )))
    }
}

fn dual_norm(u: &Vector, p: f64) -> f64 {
    if p == 1.0 {
        u.amax()
    } else if p == f64::INFINITY {
        u.iter().map(|v| v.abs()).sum()
    } else if p == 2.0 {
        u.norm()
    } else {
        let q = p / (p - 1.0);
        u.iter().map(|v| v.abs().powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

fn lp_norm(x: &Vector, p: f64) -> f64 {
    if p == f64::INFINITY {
        x.amax()
    } else if p == 1.0 {
        x.iter().map(|v| v.abs()).sum()
    } else if p == 2.0 {
        x.norm()
    } else {
        x.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Prepared radial evaluator. Building one flattens Minkowski sums and pushes
/// linear images into closed forms, so repeated evaluations (quadrature nodes,
/// Monte Carlo points) avoid re-deriving structure per call.
pub struct RadialEvaluator {
    kind: EvalKind,
    dim: usize,
}

enum EvalKind {
    HRep {
        normals: Vec<Vector>,
        offsets: Vec<f64>,
    },
    Blocks(Vec<(Vec<Vector>, bool)>),
    Ball {
        p: f64,
        r: f64,
    },
    Quad {
        inv: DMatrix<f64>,
    },
    Mapped {
        inverse: DMatrix<f64>,
        inner: Box<EvalKind>,
    },
}

impl RadialEvaluator {
    pub fn new(body: &ConvexBody) -> Result<Self> {
        Ok(Self {
            kind: Self::build(body)?,
            dim: body.dim(),
        })
    }

    fn build(body: &ConvexBody) -> Result<EvalKind> {
        Ok(match body {
            ConvexBody::HPolytope { normals, offsets } => EvalKind::HRep {
                normals: normals.clone(),
                offsets: offsets.clone(),
            },
            ConvexBody::VPolytope { points, mirror } => {
                EvalKind::Blocks(vec![(points.clone(), *mirror)])
            }
            ConvexBody::LpBall { p, r, .. } => EvalKind::Ball { p: *p, r: *r },
            ConvexBody::Ellipsoid(e) => EvalKind::Quad {
                inv: e.inverse().clone(),
            },
            ConvexBody::Sum(..) => EvalKind::Blocks(body.summand_sets()?),
            ConvexBody::Image {
                transform,
                inverse,
                inner,
            } => {
                let inner_kind = Self::build(inner)?;
                match inner_kind {
                    EvalKind::HRep { normals, offsets } => EvalKind::HRep {
                        normals: normals.iter().map(|a| inverse.transpose() * a).collect(),
                        offsets,
                    },
                    EvalKind::Blocks(blocks) => EvalKind::Blocks(
                        blocks
                            .into_iter()
                            .map(|(pts, m)| (pts.iter().map(|p| transform * p).collect(), m))
                            .collect(),
                    ),
                    EvalKind::Quad { inv } => EvalKind::Quad {
                        inv: inverse.transpose() * inv * inverse,
                    },
                    other => EvalKind::Mapped {
                        inverse: inverse.clone(),
                        inner: Box::new(other),
                    },
                }
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// ρ_K(x); +∞ at the origin.
    pub fn eval(&self, x: &Vector) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch("radial argument".into()));
        }
        if x.amax() == 0.0 {
            return Ok(f64::INFINITY);
        }
        eval_kind(&self.kind, x)
    }

    /// ‖x‖_K = 1/ρ_K(x); 0 at the origin.
    pub fn gauge(&self, x: &Vector) -> Result<f64> {
        Ok(1.0 / self.eval(x)?)
    }
}

fn eval_kind(kind: &EvalKind, x: &Vector) -> Result<f64> {
    match kind {
        EvalKind::HRep { normals, offsets } => {
            let tiny = DEGENERATE_DOT * x.amax().max(1e-300);
            let mut best = f64::INFINITY;
            for (a, &b) in normals.iter().zip(offsets) {
                let d = a.dot(x).abs();
                if d > tiny * a.amax().max(1.0) {
                    best = best.min(b / d);
                }
            }
            assert!(
                best.is_finite(),
                "degenerate direction: every facet normal is orthogonal to the query; \
                 the body is malformed"
            );
            Ok(best)
        }
        EvalKind::Blocks(blocks) => {
            let summands: Vec<lp::VSummand<'_>> = blocks
                .iter()
                .map(|(pts, m)| lp::VSummand {
                    points: pts,
                    mirror: *m,
                })
                .collect();
            lp::radial_sum_of_vpolytopes(&summands, x)
        }
        EvalKind::Ball { p, r } => Ok(r / lp_norm(x, *p)),
        EvalKind::Quad { inv } => {
            let q = x.dot(&(inv * x));
            Ok(1.0 / q.sqrt())
        }
        EvalKind::Mapped { inverse, inner } => eval_kind(inner, &(inverse * x)),
    }
}
