use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::unit_ball_volume;

/// Largest supported lattice dimension.
pub const MAX_DIM: usize = 4;

/// Lattice point; coordinates beyond the model dimension are zero.
pub type Point = [i64; MAX_DIM];

pub const ORIGIN: Point = [0; MAX_DIM];

/// Relative slack applied to every `‖x‖ ≤ r` comparison, so that points whose
/// norm is within rounding of a boundary are counted on the inner side.
const BOUNDARY_SLACK: f64 = 4.0 * f64::EPSILON;

#[inline]
pub fn within(dist: f64, r: f64) -> bool {
    dist <= r * (1.0 + BOUNDARY_SLACK)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormFamily {
    ScaledSup,
    #[serde(alias = "scaled-euclid")]
    ScaledEuclidean,
}

/// Norm normalized so that its unit ball has Lebesgue measure one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub family: NormFamily,
    pub d: usize,
    pub scale_constant: f64,
}

impl NormSpec {
    pub fn new(family: NormFamily, d: usize) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::domain(format!("dimension {d} outside 1..={MAX_DIM}")));
        }
        let scale_constant = match family {
            NormFamily::ScaledSup => 2.0,
            NormFamily::ScaledEuclidean => unit_ball_volume(d).powf(1.0 / d as f64),
        };
        Ok(Self {
            family,
            d,
            scale_constant,
        })
    }

    pub fn scaled_sup(d: usize) -> Self {
        Self::new(NormFamily::ScaledSup, d).expect("dimension in range")
    }

    pub fn scaled_euclidean(d: usize) -> Self {
        Self::new(NormFamily::ScaledEuclidean, d).expect("dimension in range")
    }

    /// Norm of a real vector of length `d`.
    pub fn norm_value(&self, x: &[f64]) -> f64 {
        let x = &x[..self.d];
        match self.family {
            NormFamily::ScaledSup => self.scale_constant * x.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            NormFamily::ScaledEuclidean => self.scale_constant * x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }

    /// Norm of a lattice point. Exact for the scaled sup norm.
    #[inline]
    pub fn lattice_norm(&self, x: &Point) -> f64 {
        match self.family {
            NormFamily::ScaledSup => {
                let m = x[..self.d].iter().map(|v| v.unsigned_abs()).max().unwrap_or(0);
                2.0 * m as f64
            }
            NormFamily::ScaledEuclidean => self.scale_constant * (sq_len(x, self.d) as f64).sqrt(),
        }
    }

    #[inline]
    pub fn lattice_distance(&self, x: &Point, y: &Point) -> f64 {
        self.lattice_norm(&sub(x, y))
    }

    /// Largest coordinate magnitude of a lattice point of norm at most `r`.
    pub fn coordinate_bound(&self, r: f64) -> i64 {
        if r < 0.0 {
            return -1;
        }
        let mut m = (r / self.scale_constant).floor() as i64;
        let mut e = ORIGIN;
        loop {
            e[0] = m + 1;
            if within(self.lattice_norm(&e), r) {
                m += 1;
            } else {
                break;
            }
        }
        while m > 0 {
            e[0] = m;
            if within(self.lattice_norm(&e), r) {
                break;
            }
            m -= 1;
        }
        m
    }
}

/// Exact squared Euclidean length; `i128` because coordinates beyond `3·10⁹`
/// occur at large cut-offs.
#[inline]
pub fn sq_len(x: &Point, d: usize) -> i128 {
    x[..d].iter().map(|&v| v as i128 * v as i128).sum()
}

#[inline]
pub fn sub(x: &Point, y: &Point) -> Point {
    [x[0] - y[0], x[1] - y[1], x[2] - y[2], x[3] - y[3]]
}

#[inline]
pub fn add(x: &Point, y: &Point) -> Point {
    [x[0] + y[0], x[1] + y[1], x[2] + y[2], x[3] + y[3]]
}

#[inline]
pub fn neg(x: &Point) -> Point {
    [-x[0], -x[1], -x[2], -x[3]]
}

/// Euclidean squared length as a float, used by the spatial power sums.
#[inline]
pub fn euclid_sq(x: &Point) -> f64 {
    sq_len(x, MAX_DIM) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn scale_constants() {
        assert_eq!(NormSpec::scaled_sup(3).scale_constant, 2.0);
        let e2 = NormSpec::scaled_euclidean(2).scale_constant;
        assert!((e2 - std::f64::consts::PI.sqrt()).abs() < 1e-14);
        let e1 = NormSpec::scaled_euclidean(1).scale_constant;
        assert!((e1 - 2.0).abs() < 1e-14);
    }

    #[test]
    fn squared_length_does_not_overflow() {
        let x = [5_000_000_000, -4_000_000_000, 0, 0];
        assert_eq!(euclid_sq(&x), 4.1e19);
        let e = NormSpec::scaled_euclidean(2);
        assert!((e.lattice_norm(&x) / (e.scale_constant * 4.1e19f64.sqrt()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coordinate_bound_matches_definition() {
        let n = NormSpec::scaled_sup(1);
        assert_eq!(n.coordinate_bound(4.0), 2);
        assert_eq!(n.coordinate_bound(1.0), 0);
        assert_eq!(n.coordinate_bound(3.999), 1);
    }

    fn vec3() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-50.0f64..50.0, 3)
    }

    proptest! {
        #[test]
        fn norm_axioms(x in vec3(), y in vec3(), lam in -10.0f64..10.0, euclid in any::<bool>()) {
            let n = if euclid { NormSpec::scaled_euclidean(3) } else { NormSpec::scaled_sup(3) };
            prop_assert_eq!(n.norm_value(&[0.0, 0.0, 0.0]), 0.0);
            let lx: Vec<f64> = x.iter().map(|v| lam * v).collect();
            let lhs = n.norm_value(&lx);
            let rhs = lam.abs() * n.norm_value(&x);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs));
            let s: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            prop_assert!(n.norm_value(&s) <= n.norm_value(&x) + n.norm_value(&y) + 1e-9);
        }
    }
}
