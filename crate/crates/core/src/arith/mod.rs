//! Exact arithmetic: primes, symbolic prime sets, characteristics and types.

mod characteristic;
pub mod primes;
mod primeset;

use alloc::string::String;
use alloc::vec::Vec;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub use characteristic::{
    char_equivalent, characteristic_in_label, disagreements, type_leq, Characteristic, LeqFailure, TypeClass,
    TypeOrder,
};
pub use primes::{is_prime, nth_prime, prime_index, PrimeIndexed};
pub use primeset::{
    almost_disjoint_family, AlmostDisjointFamily, BranchCode, PrimeOracle, PrimeSet, SetSize,
    MAX_BRANCH_DEPTH,
};

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ArithError {
    #[error("zero has no characteristic")]
    ZeroValue,
    #[error("cofactor too large to factor")]
    Unfactorable,
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("invalid branch code: {0}")]
    InvalidBranch(String),
    #[error("branch prefix of length {0} exceeds the coding range")]
    BranchTooDeep(usize),
    #[error("prime {0} lies beyond the coded range")]
    OutOfRange(u64),
    #[error("invalid progression {residue} mod {modulus}")]
    InvalidProgression { modulus: u64, residue: u64 },
    #[error("enumeration exhausted at index {0}")]
    Exhausted(usize),
    #[error("undecidable: {0}")]
    Undecidable(String),
}

/// A divisibility exponent in `ℕ ∪ {∞}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Exponent {
    Finite(u32),
    Infinite,
}

impl Exponent {
    pub const ZERO: Exponent = Exponent::Finite(0);

    pub fn is_finite(self) -> bool {
        matches!(self, Exponent::Finite(_))
    }
}

impl core::fmt::Display for Exponent {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Exponent::Finite(k) => write!(f, "{k}"),
            Exponent::Infinite => f.write_str("inf"),
        }
    }
}

pub fn rat(n: i64, d: i64) -> Rational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

/// `v_p(q)` for nonzero `q`.
pub fn rational_valuation(q: &Rational, p: u64) -> i64 {
    let num = q.numer().magnitude();
    let den = q.denom().magnitude();
    primes::valuation(num, p) as i64 - primes::valuation(den, p) as i64
}

/// Prime factors of the denominator, or `None` if it is not squarefree.
pub fn squarefree_denominator(q: &Rational) -> Result<Option<Vec<u64>>, ArithError> {
    let den = q.denom().magnitude();
    if den.is_one() {
        return Ok(Some(Vec::new()));
    }
    let f = primes::factor_biguint(den)?;
    if f.iter().any(|&(_, e)| e > 1) {
        return Ok(None);
    }
    Ok(Some(f.into_iter().map(|(p, _)| p).collect()))
}

pub fn product_of(primes: &[u64]) -> BigUint {
    primes.iter().fold(BigUint::one(), |acc, &p| acc * p)
}

/// `q` divided by `p`.
pub fn div_prime(q: &Rational, p: u64) -> Rational {
    q / BigRational::from_integer(BigInt::from(p))
}

pub fn is_integer(q: &Rational) -> bool {
    q.denom().is_one()
}

/// Least common multiple of the denominators.
pub fn common_denominator<'a, I: IntoIterator<Item = &'a Rational>>(qs: I) -> BigInt {
    qs.into_iter()
        .fold(BigInt::one(), |acc, q| acc.lcm(q.denom()))
}

pub fn sign_of(q: &Rational) -> Sign {
    if q.is_zero() {
        Sign::NoSign
    } else if q.is_positive() {
        Sign::Plus
    } else {
        Sign::Minus
    }
}
