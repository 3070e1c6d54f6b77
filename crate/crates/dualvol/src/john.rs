//! Maximum-volume inscribed ellipsoid, John-position normalization, contact
//! diagnostics, and the Z∞ polar construction.
//!
//! The inscribed ellipsoid is computed by polarity: for an origin-symmetric
//! H-polytope, the polar of the minimum-volume enclosing ellipsoid of the
//! polar's vertices is the John ellipsoid, and the duality is exact. The MVEE
//! itself runs Khachiyan coordinate ascent with Wolfe-Atwood away steps on
//! the log-det objective.

use crate::bodies::{ConvexBody, EllipsoidMatrix, Vector};
use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Default tolerance for identifying contact facets.
pub const CONTACT_TOL: f64 = 1e-5;

const MVEE_MAX_ITER: usize = 200_000;

/// MVEE output: the matrix, the iteration count, and the per-iteration
/// log-det objective (monotone nondecreasing by construction).
#[derive(Clone, Debug)]
pub struct MveeResult {
    pub ellipsoid: EllipsoidMatrix,
    pub iterations: usize,
    pub objective_trace: Vec<f64>,
    /// max_i pᵢᵀM⁻¹pᵢ − 1 at termination (≤ eps).
    pub max_violation: f64,
}

/// Minimum-volume origin-centered ellipsoid enclosing {±p_1, …, ±p_k}.
///
/// The input holds one representative per ± pair. Returns M with
/// pᵢᵀM⁻¹pᵢ ≤ 1 + eps for every point and det M within (1+eps)ⁿ of optimal.
pub fn mvee(points: &[Vector], eps: f64) -> Result<MveeResult> {
    if points.is_empty() {
        return Err(Error::DegenerateSpan);
    }
    let n = points[0].len();
    let k = points.len();
    if points.iter().any(|p| p.len() != n) {
        return Err(Error::DimensionMismatch("mvee point dimensions".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidConfig("mvee tolerance must be positive".into()));
    }
    {
        let m = DMatrix::from_fn(k, n, |i, j| points[i][j]);
        if m.rank(1e-10) < n {
            return Err(Error::DegenerateSpan);
        }
    }

    let mut lambda = vec![1.0 / k as f64; k];
    let scatter = |lambda: &[f64]| -> DMatrix<f64> {
        let mut x = DMatrix::zeros(n, n);
        for (w, p) in lambda.iter().zip(points) {
            if *w > 0.0 {
                x.syger(*w, p, p, 1.0);
            }
        }
        // syger touches only the lower triangle
        for i in 0..n {
            for l in (i + 1)..n {
                x[(i, l)] = x[(l, i)];
            }
        }
        x
    };
    let mut x = scatter(&lambda);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut max_violation;

    loop {
        let chol = x
            .clone()
            .cholesky()
            .ok_or(Error::DegenerateSpan)?;
        let logdet = 2.0 * (0..n).map(|i| chol.l()[(i, i)].ln()).sum::<f64>();
        if let Some(last) = trace.last() {
            debug_assert!(
                logdet >= last - 1e-10,
                "mvee objective decreased: {last} -> {logdet}"
            );
        }
        trace.push(logdet);

        let inv = chol.inverse();
        let nf = n as f64;
        let mut g_max = f64::NEG_INFINITY;
        let mut j_max = 0;
        let mut g_min_support = f64::INFINITY;
        let mut j_min = usize::MAX;
        for (i, p) in points.iter().enumerate() {
            let g = p.dot(&(&inv * p));
            if g > g_max {
                g_max = g;
                j_max = i;
            }
            if lambda[i] > 0.0 && g < g_min_support {
                g_min_support = g;
                j_min = i;
            }
        }
        let up = g_max / nf - 1.0;
        let down = 1.0 - g_min_support / nf;
        max_violation = up.max(0.0);
        if up <= eps && down <= eps {
            break;
        }
        if iterations >= MVEE_MAX_ITER {
            return Err(Error::IterationLimit(format!(
                "mvee did not reach eps = {eps} in {MVEE_MAX_ITER} iterations \
                 (violation {max_violation:.3e})"
            )));
        }

        let (j, g) = if up >= down {
            (j_max, g_max)
        } else {
            (j_min, g_min_support)
        };
        // optimal 1D step for log det((1−β)X + β ppᵀ); for g ≤ 1 the
        // objective increases all the way to the drop boundary
        let beta_floor = -lambda[j] / (1.0 - lambda[j]).max(1e-300);
        let beta = if g > 1.0 + 1e-14 {
            ((g - nf) / (nf * (g - 1.0))).max(beta_floor)
        } else {
            beta_floor
        };
        for w in lambda.iter_mut() {
            *w *= 1.0 - beta;
        }
        lambda[j] += beta;
        if lambda[j] < 0.0 {
            lambda[j] = 0.0;
        }
        iterations += 1;
        if iterations % 1024 == 0 {
            // periodic rebuild to shed rank-1 update drift
            x = scatter(&lambda);
        } else {
            let p = &points[j];
            x *= 1.0 - beta;
            x.syger(beta, p, p, 1.0);
        }
        // mirror the lower triangle updated by syger
        for i in 0..n {
            for l in (i + 1)..n {
                x[(i, l)] = x[(l, i)];
            }
        }
    }

    let m = x * (n as f64);
    Ok(MveeResult {
        ellipsoid: EllipsoidMatrix::new(m)?,
        iterations,
        objective_trace: trace,
        max_violation,
    })
}

/// Maximum-volume inscribed ellipsoid of an origin-symmetric polytope given
/// in H-representation (cubes and cross-polytopes convert automatically).
///
/// V-polytope inputs are rejected: the polar-MVEE route needs the polar's
/// vertices, which for a V-polytope would require facet enumeration.
pub fn john_ellipsoid(body: &ConvexBody, eps: f64) -> Result<EllipsoidMatrix> {
    let (normals, offsets) = body.to_hpolytope().map_err(|_| {
        Error::UnsupportedComposition(
            "john_ellipsoid needs an H-representation (H-polytope, cube, or cross-polytope)"
                .into(),
        )
    })?;
    let polar_points: Vec<Vector> = normals
        .iter()
        .zip(&offsets)
        .map(|(a, &b)| a / b)
        .collect();
    let mvee_res = mvee(&polar_points, eps)?;
    let m_john = EllipsoidMatrix::new(mvee_res.ellipsoid.inverse().clone())?;
    // containment certificate: h_E(a_i) ≤ b_i up to the eps slack
    for (a, &b) in normals.iter().zip(&offsets) {
        let h = a.dot(&(m_john.matrix() * a)).sqrt();
        assert!(
            h <= b * (1.0 + 16.0 * eps.max(1e-12)),
            "inscribed ellipsoid violates facet: h = {h}, b = {b}"
        );
    }
    Ok(m_john)
}

/// A body moved to John position, together with the transform that got it
/// there and the inscribed ellipsoid it had before.
#[derive(Clone, Debug)]
pub struct JohnPosition {
    pub body: ConvexBody,
    pub transform: DMatrix<f64>,
    pub ellipsoid_before: EllipsoidMatrix,
}

/// Applies T = M_john^{−1/2}, so the result has the unit ball as its maximal
/// inscribed ellipsoid. The output stays in H-representation so the pipeline
/// can be re-run on it.
pub fn to_john_position(body: &ConvexBody) -> Result<JohnPosition> {
    let m_john = john_ellipsoid(body, 1e-7)?;
    let t = m_john.inv_sqrt();
    let (normals, offsets) = body.to_hpolytope()?;
    // T·K in H-rep has normals T⁻ᵀ a_i = M^{1/2} a_i, since T is symmetric
    let sqrt_m = {
        let eig = m_john.matrix().clone().symmetric_eigen();
        let n = body.dim();
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            d[(i, i)] = eig.eigenvalues[i].max(0.0).sqrt();
        }
        &eig.eigenvectors * d * eig.eigenvectors.transpose()
    };
    let mapped: Vec<Vector> = normals.iter().map(|a| &sqrt_m * a).collect();
    let positioned = ConvexBody::hpolytope(mapped, offsets)?;
    Ok(JohnPosition {
        body: positioned,
        transform: t,
        ellipsoid_before: m_john,
    })
}

/// Contact directions of the inscribed unit ball with ∂K and isotropy
/// weights.
#[derive(Clone, Debug)]
pub struct ContactData {
    /// Unit contact directions, one representative per ± pair.
    pub directions: Vec<Vector>,
    /// Nonnegative weights with Σ c_i u_i u_iᵀ ≈ I (per representative).
    pub weights: Vec<f64>,
    /// Frobenius distance of Σ c_i u_i u_iᵀ from the identity.
    pub residual: f64,
}

/// Finds the facets the inscribed unit ball touches (distance within `tol`
/// of 1) and solves nonnegative least squares for John-decomposition weights.
pub fn contact_points(body_in_john: &ConvexBody, tol: f64) -> Result<ContactData> {
    let (normals, offsets) = body_in_john.to_hpolytope().map_err(|_| {
        Error::UnsupportedComposition("contact detection needs an H-representation".into())
    })?;
    let n = body_in_john.dim();
    let mut directions = Vec::new();
    for (a, &b) in normals.iter().zip(&offsets) {
        let dist = b / a.norm();
        if dist <= 1.0 + tol {
            directions.push(a / a.norm());
        }
    }
    if directions.is_empty() {
        return Err(Error::NoContacts);
    }
    let weights = isotropy_weights(&directions, n);
    let mut s = DMatrix::<f64>::zeros(n, n);
    for (u, &c) in directions.iter().zip(&weights) {
        s.syger(c, u, u, 1.0);
    }
    for i in 0..n {
        for l in (i + 1)..n {
            s[(i, l)] = s[(l, i)];
        }
    }
    let residual = (&s - DMatrix::<f64>::identity(n, n)).norm();
    Ok(ContactData {
        directions,
        weights,
        residual,
    })
}

/// Projected-gradient NNLS for min ‖Σ c_i u_i u_iᵀ − I‖_F², c ≥ 0.
fn isotropy_weights(directions: &[Vector], n: usize) -> Vec<f64> {
    let k = directions.len();
    // Gram over the rank-1 frame: G_ij = (u_i·u_j)², h_i = |u_i|² = 1
    let mut gram = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let d = directions[i].dot(&directions[j]);
            gram[(i, j)] = d * d;
        }
    }
    let lip = 2.0 * (0..k)
        .map(|i| (0..k).map(|j| gram[(i, j)].abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let mut c = vec![n as f64 / k as f64; k];
    for _ in 0..200_000 {
        let mut max_step = 0.0_f64;
        let mut next = c.clone();
        for i in 0..k {
            let mut g = -1.0; // −h_i
            for j in 0..k {
                g += gram[(i, j)] * c[j];
            }
            let updated = (c[i] - 2.0 * g / lip).max(0.0);
            max_step = max_step.max((updated - c[i]).abs());
            next[i] = updated;
        }
        c = next;
        if max_step <= 1e-15 {
            break;
        }
    }
    c
}

/// Z∞* = {x : |⟨x, u_i⟩| ≤ 1 for every contact direction}: the polar of the
/// body spanned by the contact measure's support.
pub fn z_infinity_polar(contacts: &ContactData) -> Result<ConvexBody> {
    let offsets = vec![1.0; contacts.directions.len()];
    ConvexBody::hpolytope(contacts.directions.clone(), offsets)
        .map_err(|_| Error::DegenerateSpan)
}

/// Verifies the stated John-position precondition: the unit ball is inscribed
/// (radial ≥ 1 − 1e-5 wherever the representation lets us check exactly) and
/// touches the boundary (contact within 1e-4).
pub fn assert_john_position(body: &ConvexBody) -> Result<()> {
    const LOW: f64 = 1.0 - 1e-5;
    const HIGH: f64 = 1.0 + 1e-4;
    let inradius = match body.to_hpolytope() {
        Ok((normals, offsets)) => normals
            .iter()
            .zip(&offsets)
            .map(|(a, &b)| b / a.norm())
            .fold(f64::INFINITY, f64::min),
        Err(_) => match body {
            ConvexBody::LpBall { dim, p, r } => {
                if *p >= 2.0 {
                    *r
                } else {
                    r * (*dim as f64).powf(0.5 - 1.0 / p)
                }
            }
            ConvexBody::Ellipsoid(e) => e.min_eigenvalue().sqrt(),
            _ => {
                return Err(Error::NotInJohnPosition(
                    "cannot verify John position for this representation; \
                     provide an H-polytope or use auto-John"
                        .into(),
                ))
            }
        },
    };
    if inradius < LOW {
        return Err(Error::NotInJohnPosition(format!(
            "inscribed ball check failed: inradius {inradius} < {LOW}"
        )));
    }
    if inradius > HIGH {
        return Err(Error::NotInJohnPosition(format!(
            "no contact within tolerance: inradius {inradius} > {HIGH}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::GeneratorSpec;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn identity_err(m: &DMatrix<f64>) -> f64 {
        (m - DMatrix::<f64>::identity(m.nrows(), m.ncols())).norm()
    }

    fn axis_points(n: usize) -> Vec<Vector> {
        (0..n)
            .map(|i| {
                let mut e = Vector::zeros(n);
                e[i] = 1.0;
                e
            })
            .collect()
    }

    #[test]
    fn mvee_of_cross_polytope_vertices_is_identity() {
        for n in 2..=6 {
            let res = mvee(&axis_points(n), 1e-7).unwrap();
            assert!(
                identity_err(res.ellipsoid.matrix()) < 1e-6,
                "n = {n}: {:?}",
                res.ellipsoid.matrix()
            );
        }
    }

    #[test]
    fn mvee_of_square_vertices() {
        let pts = vec![
            Vector::from_row_slice(&[1.0, 1.0]),
            Vector::from_row_slice(&[1.0, -1.0]),
        ];
        let res = mvee(&pts, 1e-9).unwrap();
        let expected = DMatrix::from_diagonal_element(2, 2, 2.0);
        assert!((res.ellipsoid.matrix() - expected).norm() < 1e-6);
    }

    #[test]
    fn mvee_objective_monotone_and_contains_points() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        let pts: Vec<Vector> = (0..30)
            .map(|_| crate::quad::random_direction(4, &mut rng) * 2.0)
            .collect();
        let res = mvee(&pts, 1e-7).unwrap();
        for w in res.objective_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-10, "objective must not decrease");
        }
        let inv = res.ellipsoid.inverse();
        for p in &pts {
            let g = p.dot(&(inv * p));
            assert!(g <= 1.0 + 2e-7, "containment violated: {g}");
        }
    }

    #[test]
    fn mvee_degenerate_span_rejected() {
        let pts = vec![
            Vector::from_row_slice(&[1.0, 0.0, 0.0]),
            Vector::from_row_slice(&[0.0, 1.0, 0.0]),
        ];
        assert!(matches!(mvee(&pts, 1e-6), Err(Error::DegenerateSpan)));
    }

    #[test]
    fn john_ellipsoid_of_cube_is_unit_ball() {
        for n in 2..=4 {
            let cube = ConvexBody::cube(n, 1.0).unwrap();
            let e = john_ellipsoid(&cube, 1e-7).unwrap();
            assert!(identity_err(e.matrix()) < 1e-5, "n = {n}");
        }
    }

    #[test]
    fn john_ellipsoid_of_scaled_cross_polytope() {
        let n = 3;
        let body = ConvexBody::cross_polytope(n, (n as f64).sqrt()).unwrap();
        let e = john_ellipsoid(&body, 1e-7).unwrap();
        assert!(identity_err(e.matrix()) < 1e-5);
    }

    #[test]
    fn john_affine_equivariance_on_cube_images() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(9);
        let t = {
            let mut m = crate::numeric::random_rotation(3, &mut rng);
            m[(0, 0)] *= 1.8;
            m[(1, 0)] += 0.3;
            m
        };
        let cube = ConvexBody::cube(3, 1.0).unwrap();
        let mapped = ConvexBody::linear_image(t.clone(), cube).unwrap();
        let e = john_ellipsoid(&mapped, 1e-9).unwrap();
        // John ellipsoid of T·B∞ⁿ is T·(unit ball), matrix TTᵀ
        let expected = &t * t.transpose();
        let vol_ratio = e.det_sqrt() / (&t * t.transpose()).determinant().sqrt();
        assert_relative_eq!(vol_ratio, 1.0, epsilon = 1e-4);
        assert!((e.matrix() - &expected).norm() / expected.norm() < 1e-4);
    }

    #[test]
    fn john_rotation_equivariance_random_polytope() {
        let body = crate::bodies::random_body(&GeneratorSpec::symmetric_hpolytope(3, 14), 21)
            .unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(2);
        let r = crate::numeric::random_rotation(3, &mut rng);
        let rotated = ConvexBody::linear_image(r.clone(), body.clone()).unwrap();
        let e1 = john_ellipsoid(&body, 1e-9).unwrap();
        let e2 = john_ellipsoid(&rotated, 1e-9).unwrap();
        let transported = &r * e1.matrix() * r.transpose();
        assert!((e2.matrix() - &transported).norm() < 1e-6 * (1.0 + transported.norm()));
    }

    #[test]
    fn volume_product_duality() {
        let body = crate::bodies::random_body(&GeneratorSpec::symmetric_hpolytope(3, 10), 8)
            .unwrap();
        let (normals, offsets) = body.to_hpolytope().unwrap();
        let polar_points: Vec<Vector> = normals
            .iter()
            .zip(&offsets)
            .map(|(a, &b)| a / b)
            .collect();
        let enclosing = mvee(&polar_points, 1e-9).unwrap().ellipsoid;
        let inscribed = john_ellipsoid(&body, 1e-9).unwrap();
        let omega = crate::numeric::unit_ball_volume(3);
        assert_relative_eq!(
            inscribed.volume() * enclosing.volume(),
            omega * omega,
            max_relative = 1e-6
        );
    }

    #[test]
    fn to_john_position_scaled_cube() {
        let body = ConvexBody::cube(3, 3.0).unwrap();
        let jp = to_john_position(&body).unwrap();
        // transform is I/3 up to tolerance
        assert!((jp.transform.clone() * 3.0 - DMatrix::<f64>::identity(3, 3)).norm() < 1e-5);
        // radial along facet normals is 1
        let u = crate::bodies::Direction::from_vector(&Vector::from_row_slice(&[1.0, 0.0, 0.0]))
            .unwrap();
        assert_relative_eq!(jp.body.radial_unit(&u).unwrap(), 1.0, epsilon = 1e-5);
    }

    #[test]
    fn to_john_position_idempotent() {
        let body = crate::bodies::random_body(&GeneratorSpec::symmetric_hpolytope(3, 16), 4)
            .unwrap();
        let once = to_john_position(&body).unwrap();
        let twice = to_john_position(&once.body).unwrap();
        // second transform is within 1e-5 of orthogonal (here: identity-like)
        let ttt = twice.transform.transpose() * &twice.transform;
        assert!(identity_err(&ttt) < 1e-5);
        // re-running the ellipsoid gives the identity
        let e = john_ellipsoid(&once.body, 1e-7).unwrap();
        assert!(identity_err(e.matrix()) < 1e-4);
    }

    #[test]
    fn john_position_precondition_checks() {
        assert!(assert_john_position(&ConvexBody::cube(3, 1.0).unwrap()).is_ok());
        assert!(assert_john_position(&ConvexBody::ball(3, 1.0).unwrap()).is_ok());
        assert!(matches!(
            assert_john_position(&ConvexBody::cube(3, 2.0).unwrap()),
            Err(Error::NotInJohnPosition(_))
        ));
        assert!(matches!(
            assert_john_position(&ConvexBody::cube(3, 0.5).unwrap()),
            Err(Error::NotInJohnPosition(_))
        ));
    }

    #[test]
    fn cube_contacts_are_axes_with_unit_weights() {
        let jp = to_john_position(&ConvexBody::cube(3, 1.0).unwrap()).unwrap();
        let contacts = contact_points(&jp.body, CONTACT_TOL).unwrap();
        assert_eq!(contacts.directions.len(), 3);
        for (u, &w) in contacts.directions.iter().zip(&contacts.weights) {
            assert_relative_eq!(w, 1.0, epsilon = 1e-8);
            let mx = u.amax();
            assert_relative_eq!(mx, 1.0, epsilon = 1e-9);
        }
        assert!(contacts.residual <= 1e-8, "residual {}", contacts.residual);
    }

    #[test]
    fn cross_polytope_contacts_residual() {
        let n = 3;
        let body = ConvexBody::cross_polytope(n, (n as f64).sqrt()).unwrap();
        let jp = to_john_position(&body).unwrap();
        let contacts = contact_points(&jp.body, CONTACT_TOL).unwrap();
        assert_eq!(contacts.directions.len(), 4); // 2ⁿ⁻¹ sign classes
        assert!(contacts.residual <= 1e-8, "residual {}", contacts.residual);
        // z∞ polar of the sign-vector contacts contains the body
        let z = z_infinity_polar(&contacts).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(6);
        for _ in 0..200 {
            let u = crate::quad::random_direction(n, &mut rng);
            let rk = jp.body.radial_homog(&u).unwrap();
            let rz = z.radial_homog(&u).unwrap();
            assert!(rk <= rz * (1.0 + 1e-7), "containment K ⊆ Z∞* violated");
        }
    }

    #[test]
    fn rotated_cube_contacts_are_rotated_axes() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(13);
        let r = crate::numeric::random_rotation(3, &mut rng);
        let cube = ConvexBody::cube(3, 1.0).unwrap();
        let rotated = ConvexBody::linear_image(r.clone(), cube).unwrap();
        let jp = to_john_position(&rotated).unwrap();
        let contacts = contact_points(&jp.body, CONTACT_TOL).unwrap();
        assert_eq!(contacts.directions.len(), 3);
        assert!(contacts.residual <= 1e-6);
        // each contact direction is (±) a rotated axis
        for u in &contacts.directions {
            let back = r.transpose() * u;
            let aligned = back.amax();
            assert_relative_eq!(aligned, 1.0, epsilon = 1e-5);
        }
    }

    #[test]
    fn contact_of_z_infinity_cube_case() {
        let contacts = ContactData {
            directions: axis_points(3),
            weights: vec![1.0; 3],
            residual: 0.0,
        };
        let z = z_infinity_polar(&contacts).unwrap();
        let cube = ConvexBody::cube(3, 1.0).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1);
        for _ in 0..50 {
            let u = crate::quad::random_direction(3, &mut rng);
            assert_relative_eq!(
                z.radial_homog(&u).unwrap(),
                cube.radial_homog(&u).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn degenerate_contacts_rejected() {
        let contacts = ContactData {
            directions: axis_points(3)[..2].to_vec(),
            weights: vec![1.0; 2],
            residual: 0.0,
        };
        assert!(matches!(
            z_infinity_polar(&contacts),
            Err(Error::DegenerateSpan)
        ));
    }
}
