//! Leaf-labelled binary trees, double factorials and monomial splittings.

mod splittings;
mod trees;

pub use splittings::{enumerate_splittings, Splitting};
pub use trees::{distinct_codes, enumerate_trees, leaf_path, TreeDiagram, MAX_TREE_LEAVES};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `k!!` for odd `k ≥ -1` and `k = 0`, in exact arithmetic.
pub fn double_factorial(k: i64) -> Result<BigUint> {
    if k < -1 || (k > 0 && k % 2 == 0) {
        return Err(Error::domain(format!("double factorial needs odd k >= -1 or k = 0, got {k}")));
    }
    let mut acc = BigUint::from(1u32);
    let mut j = k;
    while j > 1 {
        acc *= j as u64;
        j -= 2;
    }
    Ok(acc)
}

/// `(2p-3)!!` as a float, for moment formulas.
pub fn double_factorial_f64(k: i64) -> f64 {
    let mut acc = 1.0;
    let mut j = k;
    while j > 1 {
        acc *= j as f64;
        j -= 2;
    }
    acc
}

fn binomial_big(n: u64, k: u64) -> BigUint {
    let k = k.min(n - k);
    let mut acc = BigUint::from(1u32);
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvolutionCheck {
    pub n: u64,
    pub lhs: String,
    pub rhs: String,
    pub holds: bool,
}

/// `Σ_{k<n} C(n,k) (2k-1)!! (2n-2k-3)!!` against `(2n-1)!!`.
pub fn verify_convolution_identity(n: u64) -> Result<ConvolutionCheck> {
    if n < 2 {
        return Err(Error::domain(format!("identity needs n >= 2, got {n}")));
    }
    let n_i = n as i64;
    let mut lhs = BigUint::from(0u32);
    for k in 0..n_i {
        lhs += binomial_big(n, k as u64) * double_factorial(2 * k - 1)? * double_factorial(2 * n_i - 2 * k - 3)?;
    }
    let rhs = double_factorial(2 * n_i - 1)?;
    Ok(ConvolutionCheck {
        n,
        holds: lhs == rhs,
        lhs: lhs.to_string(),
        rhs: rhs.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_factorial_values() {
        assert_eq!(double_factorial(-1).unwrap(), BigUint::from(1u32));
        assert_eq!(double_factorial(0).unwrap(), BigUint::from(1u32));
        assert_eq!(double_factorial(3).unwrap(), BigUint::from(3u32));
        assert_eq!(double_factorial(7).unwrap(), BigUint::from(105u32));
        assert!(double_factorial(4).is_err());
        assert!(double_factorial(-3).is_err());
        assert_eq!(double_factorial_f64(9), 945.0);
    }

    #[test]
    fn convolution_small_cases() {
        let c = verify_convolution_identity(2).unwrap();
        assert_eq!((c.lhs.as_str(), c.rhs.as_str(), c.holds), ("3", "3", true));
        let c = verify_convolution_identity(3).unwrap();
        assert_eq!((c.lhs.as_str(), c.rhs.as_str(), c.holds), ("15", "15", true));
    }

    #[test]
    fn convolution_holds_to_fifty() {
        for n in 2..=50 {
            assert!(verify_convolution_identity(n).unwrap().holds, "n = {n}");
        }
        // 39!! already exceeds u64.
        let c = verify_convolution_identity(20).unwrap();
        assert!(c.rhs.len() > 20);
    }
}
