use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, ToPrimitive};

/// Scalar field for probability-mass computations.
///
/// `f64` is the working type; `BigRational` gives exact answers for oracles.
pub trait Scalar: Clone + Debug + PartialOrd + Num + Send + Sync + 'static {
    /// Conversion from a double. Exact for rationals.
    fn from_f64(x: f64) -> Self;
    fn from_u64(n: u64) -> Self;
    fn to_f64(&self) -> f64;

    fn half() -> Self {
        Self::one() / Self::from_u64(2)
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn from_u64(n: u64) -> Self {
        n as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn half() -> Self {
        0.5
    }
}

impl Scalar for BigRational {
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).expect("finite value")
    }
    fn from_u64(n: u64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_from_f64_is_exact() {
        let q = <BigRational as Scalar>::from_f64(0.375);
        assert_eq!(q, BigRational::new(3.into(), 8.into()));
        assert_eq!(Scalar::to_f64(&q), 0.375);
    }

    #[test]
    fn half_matches() {
        assert_eq!(<f64 as Scalar>::half(), 0.5);
        assert_eq!(<BigRational as Scalar>::half(), BigRational::new(1.into(), 2.into()));
    }
}
