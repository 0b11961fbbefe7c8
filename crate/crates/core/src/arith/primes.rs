//! Prime enumeration, deterministic primality and small factorisation.
//!
//! The prime list is kept in a process-wide table that grows on demand by
//! segmented sieving, so `nth_prime` and `prime_index` are cheap after the
//! first call at a given size.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use spin::RwLock;

use super::ArithError;

static TABLE: RwLock<Vec<u64>> = RwLock::new(Vec::new());

/// A prime together with its 0-based position in the increasing list of primes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PrimeIndexed {
    pub index: usize,
    pub value: u64,
}

impl PrimeIndexed {
    pub fn nth(index: usize) -> Self {
        PrimeIndexed {
            index,
            value: nth_prime(index),
        }
    }

    pub fn of(value: u64) -> Option<Self> {
        prime_index(value).map(|index| PrimeIndexed { index, value })
    }
}

fn grow(table: &mut Vec<u64>) {
    if table.is_empty() {
        table.extend_from_slice(&[2, 3, 5, 7, 11, 13]);
        return;
    }
    let lo = table[table.len() - 1] + 1;
    let hi = lo.saturating_mul(2).max(lo + 1024).min((lo - 1) * (lo - 1));
    let mut composite = vec![false; (hi - lo) as usize];
    for &p in table.iter() {
        if p.saturating_mul(p) >= hi {
            break;
        }
        let mut m = lo.div_ceil(p) * p;
        if m < p * p {
            m = p * p;
        }
        while m < hi {
            composite[(m - lo) as usize] = true;
            m += p;
        }
    }
    for (off, c) in composite.into_iter().enumerate() {
        if !c {
            table.push(lo + off as u64);
        }
    }
}

fn ensure<F: Fn(&[u64]) -> bool>(done: F) {
    if done(&TABLE.read()) {
        return;
    }
    let mut table = TABLE.write();
    while !done(&table) {
        grow(&mut table);
    }
}

/// The `i`-th prime, 0-indexed (`nth_prime(0) == 2`).
pub fn nth_prime(i: usize) -> u64 {
    ensure(|t| t.len() > i);
    TABLE.read()[i]
}

/// Position of `p` in the list of primes, or `None` when `p` is not prime.
pub fn prime_index(p: u64) -> Option<usize> {
    if p < 2 {
        return None;
    }
    ensure(|t| t.last().is_some_and(|&last| last >= p));
    TABLE.read().binary_search(&p).ok()
}

/// All primes strictly below `bound`, increasing.
pub fn primes_below(bound: u64) -> Vec<u64> {
    if bound <= 2 {
        return Vec::new();
    }
    ensure(|t| t.last().is_some_and(|&last| last >= bound));
    let t = TABLE.read();
    let end = t.partition_point(|&p| p < bound);
    t[..end].to_vec()
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    r
}

/// Deterministic Miller-Rabin, exact for every `u64`.
pub fn is_prime(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &BASES {
        if n % p == 0 {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn pollard_brent(n: u64) -> u64 {
    if n % 2 == 0 {
        return 2;
    }
    let mut c = 1u64;
    loop {
        let f = |x: u64| (mul_mod(x, x, n) + c) % n;
        let (mut x, mut y, mut g) = (2u64, 2u64, 1u64);
        while g == 1 {
            x = f(x);
            y = f(f(y));
            g = x.abs_diff(y).gcd(&n);
        }
        if g != n {
            return g;
        }
        c += 1;
    }
}

/// Prime factorisation of a `u64` as increasing `(prime, exponent)` pairs.
pub fn factor_u64(n: u64) -> Vec<(u64, u32)> {
    let mut out: Vec<(u64, u32)> = Vec::new();
    let mut stack = Vec::new();
    let mut n = n;
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut e = 0;
        while n > 1 && n % p == 0 {
            n /= p;
            e += 1;
        }
        if e > 0 {
            out.push((p, e));
        }
    }
    if n > 1 {
        stack.push(n);
    }
    let mut found: Vec<u64> = Vec::new();
    while let Some(m) = stack.pop() {
        if m == 1 {
            continue;
        }
        if is_prime(m) {
            found.push(m);
            continue;
        }
        let d = pollard_brent(m);
        stack.push(d);
        stack.push(m / d);
    }
    found.sort_unstable();
    for p in found {
        match out.last_mut() {
            Some((q, e)) if *q == p => *e += 1,
            _ => out.push((p, 1)),
        }
    }
    out.sort_unstable();
    out
}

/// Factorisation of an arbitrary-precision natural number.
///
/// Trial division by the first few thousand primes, then Pollard-Brent once
/// the cofactor fits a machine word. Cofactors that stay above `u64::MAX`
/// after trial division are reported as [`ArithError::Unfactorable`].
pub fn factor_biguint(n: &BigUint) -> Result<Vec<(u64, u32)>, ArithError> {
    if n.is_zero() {
        return Err(ArithError::ZeroValue);
    }
    if let Some(small) = n.to_u64() {
        return Ok(factor_u64(small));
    }
    let mut rest = n.clone();
    let mut out = Vec::new();
    let mut i = 0;
    while rest.to_u64().is_none() {
        if i > 20_000 {
            return Err(ArithError::Unfactorable);
        }
        let p = nth_prime(i);
        let bp = BigUint::from(p);
        let mut e = 0;
        loop {
            let (q, r) = rest.div_rem(&bp);
            if !r.is_zero() {
                break;
            }
            rest = q;
            e += 1;
        }
        if e > 0 {
            out.push((p, e));
        }
        i += 1;
    }
    if !rest.is_one() {
        let tail = factor_u64(rest.to_u64().unwrap_or(1));
        for (p, e) in tail {
            match out.iter_mut().find(|(q, _)| *q == p) {
                Some((_, f)) => *f += e,
                None => out.push((p, e)),
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Exponent of `p` in `n` (`n` nonzero).
pub fn valuation(n: &BigUint, p: u64) -> u32 {
    let bp = BigUint::from(p);
    let mut n = n.clone();
    let mut e = 0;
    while !n.is_zero() {
        let (q, r) = n.div_rem(&bp);
        if !r.is_zero() {
            break;
        }
        n = q;
        e += 1;
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sieve(limit: usize) -> Vec<u64> {
        let mut comp = vec![false; limit];
        let mut out = Vec::new();
        for i in 2..limit {
            if !comp[i] {
                out.push(i as u64);
                let mut j = i * i;
                while j < limit {
                    comp[j] = true;
                    j += i;
                }
            }
        }
        out
    }

    #[test]
    fn first_primes() {
        assert_eq!(nth_prime(0), 2);
        assert_eq!(nth_prime(1), 3);
        assert_eq!(nth_prime(5), 13);
    }

    #[test]
    fn table_matches_plain_sieve() {
        let reference = sieve(200_000);
        for (i, &p) in reference.iter().enumerate() {
            assert_eq!(nth_prime(i), p);
            assert_eq!(prime_index(p), Some(i));
        }
        assert_eq!(prime_index(1), None);
        assert_eq!(prime_index(91), None);
        assert_eq!(primes_below(20), vec![2, 3, 5, 7, 11, 13, 17, 19]);
    }

    #[test]
    fn miller_rabin_agrees_with_table() {
        let reference = sieve(50_000);
        let set: alloc::collections::BTreeSet<u64> = reference.into_iter().collect();
        for n in 0..50_000u64 {
            assert_eq!(is_prime(n), set.contains(&n), "n = {n}");
        }
        assert!(is_prime(18_446_744_073_709_551_557));
        assert!(!is_prime(3_215_031_751));
    }

    #[test]
    fn factorisation() {
        assert_eq!(factor_u64(360), vec![(2, 3), (3, 2), (5, 1)]);
        assert_eq!(factor_u64(1), vec![]);
        let big = 4_294_967_291u64 * 4_294_967_279u64;
        assert_eq!(factor_u64(big), vec![(4_294_967_279, 1), (4_294_967_291, 1)]);
        let n = BigUint::from(u64::MAX) * BigUint::from(6u32);
        let f = factor_biguint(&n).unwrap();
        let back = f
            .iter()
            .fold(BigUint::one(), |acc, &(p, e)| acc * BigUint::from(p).pow(e));
        assert_eq!(back, n);
        assert_eq!(valuation(&BigUint::from(48u32), 2), 4);
    }
}
