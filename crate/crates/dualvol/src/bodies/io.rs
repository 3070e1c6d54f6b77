//! JSON serialization of bodies.
//!
//! Format: `{"dim": n, "type": "...", ...}` with per-variant fields. Decimal
//! encoding uses the shortest representation that round-trips f64 exactly, so
//! save/load is lossless.

use super::{ConvexBody, EllipsoidMatrix, Vector};
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum BodyRepr {
    Hpolytope {
        dim: usize,
        normals: Vec<Vec<f64>>,
        offsets: Vec<f64>,
    },
    Vpolytope {
        dim: usize,
        points: Vec<Vec<f64>>,
        #[serde(default = "default_true", skip_serializing_if = "is_true")]
        mirror: bool,
    },
    Lpball {
        dim: usize,
        p: PRepr,
        r: f64,
    },
    Ellipsoid {
        dim: usize,
        matrix: Vec<Vec<f64>>,
    },
    Sum {
        dim: usize,
        left: Box<BodyRepr>,
        right: Box<BodyRepr>,
    },
    Image {
        dim: usize,
        transform: Vec<Vec<f64>>,
        inner: Box<BodyRepr>,
    },
}

fn default_true() -> bool {
    true
}

#[allow(clippy::trivially_copy_pass_by_ref)]
fn is_true(b: &bool) -> bool {
    *b
}

/// ℓp exponent: a number, or the string "inf" for p = ∞.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PRepr {
    Num(f64),
    Word(String),
}

impl PRepr {
    fn to_f64(&self) -> Result<f64> {
        match self {
            PRepr::Num(p) => Ok(*p),
            PRepr::Word(w) if w == "inf" => Ok(f64::INFINITY),
            PRepr::Word(w) => Err(Error::InvalidConfig(format!("unknown ℓp exponent {w:?}"))),
        }
    }

    fn from_f64(p: f64) -> Self {
        if p.is_infinite() {
            PRepr::Word("inf".into())
        } else {
            PRepr::Num(p)
        }
    }
}

fn vec_of(v: &Vector) -> Vec<f64> {
    v.iter().cloned().collect()
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(Error::InvalidConfig("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(n, rows[0].len(), |i, j| rows[i][j]))
}

impl ConvexBody {
    fn to_repr(&self) -> BodyRepr {
        let dim = self.dim();
        match self {
            ConvexBody::HPolytope { normals, offsets } => BodyRepr::Hpolytope {
                dim,
                normals: normals.iter().map(vec_of).collect(),
                offsets: offsets.clone(),
            },
            ConvexBody::VPolytope { points, mirror } => BodyRepr::Vpolytope {
                dim,
                points: points.iter().map(vec_of).collect(),
                mirror: *mirror,
            },
            ConvexBody::LpBall { p, r, .. } => BodyRepr::Lpball {
                dim,
                p: PRepr::from_f64(*p),
                r: *r,
            },
            ConvexBody::Ellipsoid(e) => BodyRepr::Ellipsoid {
                dim,
                matrix: rows_of(e.matrix()),
            },
            ConvexBody::Sum(l, r) => BodyRepr::Sum {
                dim,
                left: Box::new(l.to_repr()),
                right: Box::new(r.to_repr()),
            },
            ConvexBody::Image {
                transform, inner, ..
            } => BodyRepr::Image {
                dim,
                transform: rows_of(transform),
                inner: Box::new(inner.to_repr()),
            },
        }
    }

    fn from_repr(repr: &BodyRepr) -> Result<Self> {
        match repr {
            BodyRepr::Hpolytope {
                normals, offsets, ..
            } => ConvexBody::hpolytope(
                normals.iter().map(|r| Vector::from_row_slice(r)).collect(),
                offsets.clone(),
            ),
            BodyRepr::Vpolytope { points, mirror, .. } => {
                let pts = points.iter().map(|r| Vector::from_row_slice(r)).collect();
                if *mirror {
                    ConvexBody::vpolytope(pts)
                } else {
                    ConvexBody::vpolytope_nonsymmetric(pts)
                }
            }
            BodyRepr::Lpball { dim, p, r } => ConvexBody::lp_ball(*dim, p.to_f64()?, *r),
            BodyRepr::Ellipsoid { matrix, .. } => Ok(ConvexBody::Ellipsoid(EllipsoidMatrix::new(
                matrix_from_rows(matrix)?,
            )?)),
            BodyRepr::Sum { left, right, .. } => ConvexBody::minkowski_sum(
                ConvexBody::from_repr(left)?,
                ConvexBody::from_repr(right)?,
            ),
            BodyRepr::Image {
                transform, inner, ..
            } => ConvexBody::linear_image(
                matrix_from_rows(transform)?,
                ConvexBody::from_repr(inner)?,
            ),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self.to_repr()).expect("body serialization cannot fail")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_repr()).expect("body serialization cannot fail")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let repr: BodyRepr = serde_json::from_value(value.clone())?;
        Self::from_repr(&repr)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let repr: BodyRepr = serde_json::from_str(text)?;
        Self::from_repr(&repr)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    /// Content hash (first 16 hex digits of SHA-256 over the canonical JSON),
    /// used for archive filenames and result fingerprints.
    pub fn content_hash(&self) -> String {
        let canonical =
            serde_json::to_string(&self.to_repr()).expect("body serialization cannot fail");
        let digest = Sha256::digest(canonical.as_bytes());
        digest
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect::<String>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::GeneratorSpec;

    fn roundtrip(body: &ConvexBody) {
        let text = body.to_json_string();
        let back = ConvexBody::from_json_str(&text).unwrap();
        assert_eq!(body, &back, "JSON roundtrip must be lossless");
    }

    #[test]
    fn roundtrips_all_variants() {
        let cube = ConvexBody::cube(3, 1.0).unwrap();
        roundtrip(&cube);
        roundtrip(&ConvexBody::ball(2, 0.123456789012345678).unwrap());
        roundtrip(&crate::bodies::random_body(&GeneratorSpec::symmetric_vpolytope(3, 8), 1).unwrap());
        roundtrip(&crate::bodies::random_body(&GeneratorSpec::symmetric_hpolytope(3, 8), 2).unwrap());
        let e = EllipsoidMatrix::new(DMatrix::from_row_slice(
            2,
            2,
            &[2.0, 0.3, 0.3, 1.0],
        ))
        .unwrap();
        roundtrip(&ConvexBody::Ellipsoid(e));
        let sum = ConvexBody::minkowski_sum(
            cube.clone(),
            crate::bodies::random_body(&GeneratorSpec::symmetric_vpolytope(3, 6), 3).unwrap(),
        )
        .unwrap();
        roundtrip(&sum);
        let img = ConvexBody::linear_image(
            DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.0, 1.0, 0.1, 0.0, 0.0, 1.0]),
            cube,
        )
        .unwrap();
        roundtrip(&img);
    }

    #[test]
    fn infinity_exponent_encoded_as_word() {
        let cube = ConvexBody::cube(2, 1.0).unwrap();
        let text = cube.to_json_string();
        assert!(text.contains("\"inf\""), "got {text}");
    }

    #[test]
    fn hashes_distinguish_bodies() {
        let a = ConvexBody::cube(3, 1.0).unwrap();
        let b = ConvexBody::cube(3, 1.0 + 1e-15).unwrap();
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash(), ConvexBody::cube(3, 1.0).unwrap().content_hash());
    }
}
