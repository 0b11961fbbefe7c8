//! The rank-2 group `K = ⟨x₀, x₁, (x₀ + k_p x₁)/p : p ∈ P⟩ ≤ ℚ²` and its
//! free approximations `G*_n`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::arith::{is_prime, Characteristic, Exponent, Rational};
use crate::lattice;

pub type Vec2 = [Rational; 2];

/// Seed of the default coefficient rule.
pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PontryaginError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("coefficient {k} for {p} is outside 1..{p}")]
    BadCoefficient { p: u64, k: u64 },
    #[error("coefficient list has {found} entries for {expected} primes")]
    WrongLength { expected: usize, found: usize },
    #[error("level {n} exceeds the {len} primes")]
    BeyondPrimes { n: usize, len: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PontryaginGroup {
    /// Increasing.
    primes: Vec<u64>,
    coeffs: BTreeMap<u64, u64>,
}

pub fn vec2(a: Rational, b: Rational) -> Vec2 {
    [a, b]
}

fn residue(q: &Rational, p: u64) -> u64 {
    let p = BigInt::from(p);
    let inv = q.denom().extended_gcd(&p).x;
    (q.numer() * inv).mod_floor(&p).to_u64().expect("below p")
}

impl PontryaginGroup {
    pub fn new(primes: &[u64], coeffs: &[u64]) -> Result<Self, PontryaginError> {
        if primes.len() != coeffs.len() {
            return Err(PontryaginError::WrongLength {
                expected: primes.len(),
                found: coeffs.len(),
            });
        }
        let mut map = BTreeMap::new();
        for (&p, &k) in primes.iter().zip(coeffs) {
            if !is_prime(p) {
                return Err(PontryaginError::NotPrime(p));
            }
            if k == 0 || k >= p {
                return Err(PontryaginError::BadCoefficient { p, k });
            }
            map.insert(p, k);
        }
        Ok(PontryaginGroup {
            primes: map.keys().copied().collect(),
            coeffs: map,
        })
    }

    /// `k_p` drawn uniformly from `1..p` by a seeded stream.
    pub fn seeded(primes: &[u64], seed: u64) -> Result<Self, PontryaginError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sorted = primes.to_vec();
        sorted.sort_unstable();
        let coeffs: Vec<u64> = sorted
            .iter()
            .map(|&p| if p == 2 { 1 } else { 1 + rng.next_u64() % (p - 1) })
            .collect();
        Self::new(&sorted, &coeffs)
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn coefficient(&self, p: u64) -> Option<u64> {
        self.coeffs.get(&p).copied()
    }

    pub fn x(i: usize) -> Vec2 {
        let mut v = [Rational::zero(), Rational::zero()];
        v[i] = Rational::one();
        v
    }

    /// `y_p = (x₀ + k_p x₁) / p`.
    pub fn y(&self, p: u64) -> Option<Vec2> {
        let k = self.coefficient(p)?;
        Some([Rational::new(1.into(), p.into()), Rational::new(k.into(), p.into())])
    }

    /// Membership, prime by prime: a denominator `p` must be in the list,
    /// squarefree, and `p·v ≡ c (1, k_p) mod p`.
    pub fn is_member(&self, v: &Vec2) -> bool {
        let den = v[0].denom().lcm(v[1].denom());
        if den.is_one() {
            return true;
        }
        let mut rest = den.clone();
        for (&p, &k) in &self.coeffs {
            let pb = BigInt::from(p);
            if !(&rest % &pb).is_zero() {
                continue;
            }
            rest /= &pb;
            if (&rest % &pb).is_zero() {
                return false;
            }
            let a = residue(&(&v[0] * BigRational::from_integer(pb.clone())), p);
            let b = residue(&(&v[1] * BigRational::from_integer(pb)), p);
            if b != (k as u128 * a as u128 % p as u128) as u64 {
                return false;
            }
        }
        rest.is_one()
    }

    pub fn divisible_by(&self, v: &Vec2, p: u64) -> bool {
        let d = BigRational::from_integer(p.into());
        self.is_member(&[&v[0] / &d, &v[1] / &d])
    }

    /// Largest `k` with `v / p^k` in the group; `v` must be a nonzero member.
    pub fn height(&self, v: &Vec2, p: u64) -> Exponent {
        if v[0].is_zero() && v[1].is_zero() {
            return Exponent::Infinite;
        }
        let d = BigRational::from_integer(p.into());
        let mut w = v.clone();
        let mut k = 0;
        loop {
            let next = [&w[0] / &d, &w[1] / &d];
            if !self.is_member(&next) {
                return Exponent::Finite(k);
            }
            w = next;
            k += 1;
        }
    }

    /// Primes where the height is positive, with their heights.
    pub fn characteristic(&self, v: &Vec2) -> Characteristic {
        if v[0].is_zero() && v[1].is_zero() {
            return Characteristic {
                support_exponent: Exponent::Infinite,
                ..Characteristic::on_set(crate::arith::PrimeSet::all_primes())
            };
        }
        Characteristic::from_exceptional(
            candidate_primes(v, &self.primes)
                .into_iter()
                .map(|p| (p, self.height(v, p)))
                .filter(|(_, e)| *e != Exponent::ZERO),
        )
    }

    /// `G*_n = ⟨x₀, x₁, y_{p_i} : i < n⟩` with a basis.
    pub fn gstar_level(&self, n: usize) -> Result<GStarLevel, PontryaginError> {
        if n > self.primes.len() {
            return Err(PontryaginError::BeyondPrimes { n, len: self.primes.len() });
        }
        let mut generators = alloc::vec![Self::x(0), Self::x(1)];
        for &p in &self.primes[..n] {
            generators.push(self.y(p).expect("listed prime"));
        }
        let scale: BigInt = self.primes[..n].iter().map(|&p| BigInt::from(p)).product();
        let scaled: Vec<Vec<BigInt>> = generators
            .iter()
            .map(|g| g.iter().map(|c| (c * BigRational::from_integer(scale.clone())).to_integer()).collect())
            .collect();
        let basis_int = lattice::lattice_basis(&scaled, 2);
        let basis: Vec<Vec2> = basis_int
            .iter()
            .map(|b| [BigRational::new(b[0].clone(), scale.clone()), BigRational::new(b[1].clone(), scale.clone())])
            .collect();
        let covolume = BigRational::new(lattice::determinant(&basis_int).abs(), &scale * &scale);
        Ok(GStarLevel {
            n,
            generators,
            basis,
            covolume,
        })
    }
}

/// Primes that can divide `v`: the listed ones and those of the gcd of the
/// numerators.
fn candidate_primes(v: &Vec2, listed: &[u64]) -> Vec<u64> {
    let mut out: Vec<u64> = listed.to_vec();
    let g = v[0].numer().gcd(v[1].numer());
    if let Ok(f) = crate::arith::primes::factor_biguint(g.magnitude()) {
        out.extend(f.into_iter().map(|(p, _)| p));
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// A free subgroup given by generators and a basis of the same lattice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GStarLevel {
    pub n: usize,
    pub generators: Vec<Vec2>,
    pub basis: Vec<Vec2>,
    /// `|det(basis)|`.
    pub covolume: Rational,
}

impl GStarLevel {
    /// Integer coordinates of `v` in the basis, if `v` lies in the lattice.
    pub fn coordinates(&self, v: &Vec2) -> Option<Vec<BigInt>> {
        let rows: Vec<Vec<Rational>> = self.basis.iter().map(|b| b.to_vec()).collect();
        let c = lattice::solve(&rows, v)?;
        c.iter().all(|x| x.is_integer()).then(|| c.iter().map(|x| x.to_integer()).collect())
    }

    pub fn contains(&self, v: &Vec2) -> bool {
        self.coordinates(v).is_some()
    }

    /// Generators and basis span the same lattice.
    pub fn verify(&self) -> Result<(), String> {
        if self.basis.len() != 2 {
            return Err(format!("basis has {} vectors", self.basis.len()));
        }
        for g in &self.generators {
            if !self.contains(g) {
                return Err(format!("generator {g:?} is not an integer combination of the basis"));
            }
        }
        Ok(())
    }
}

/// `G*_n` for `n = 0..=levels`, each checked against the next.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GStarChain {
    pub levels: Vec<GStarLevel>,
    /// `[G*_{n+1} : G*_n]`.
    pub indices: Vec<Rational>,
    /// Each level is contained in the next.
    pub increasing: bool,
    /// Each level is contained in the previous one.
    pub decreasing: bool,
}

pub fn gstar_chain(g: &PontryaginGroup, levels: usize) -> Result<GStarChain, PontryaginError> {
    let ls: Vec<GStarLevel> = (0..=levels).map(|n| g.gstar_level(n)).collect::<Result<_, _>>()?;
    let mut increasing = true;
    let mut decreasing = true;
    let mut indices = Vec::new();
    for w in ls.windows(2) {
        increasing &= w[0].basis.iter().all(|b| w[1].contains(b));
        decreasing &= w[1].basis.iter().all(|b| w[0].contains(b));
        indices.push(&w[0].covolume / &w[1].covolume);
    }
    Ok(GStarChain {
        levels: ls,
        indices,
        increasing,
        decreasing,
    })
}

/// One sampled element of `∏ K_i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductSample {
    pub element: Vec<Vec2>,
    /// Primes where every nonzero component has positive height, with the
    /// least height; finitely many and all finite means type 0.
    pub divisors: Vec<(u64, Exponent)>,
    pub type_zero: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductReport {
    pub samples: Vec<ProductSample>,
    /// `[G*_{i+1} : G*_i] = p_i` inside the first factor: `⟨x₀, x₁⟩*`
    /// needs a new generator for every listed prime.
    pub diagonal_indices: Vec<(u64, Rational)>,
}

impl ProductReport {
    pub fn passed(&self) -> bool {
        self.samples.iter().all(|s| s.type_zero)
            && self
                .diagonal_indices
                .iter()
                .all(|(p, i)| *i == Rational::from_integer((*p).into()))
    }
}

pub fn product_group_check(factors: &[PontryaginGroup], samples: &[Vec<Vec2>]) -> Result<ProductReport, PontryaginError> {
    let mut out = Vec::new();
    for s in samples {
        let mut mins: Option<BTreeMap<u64, Exponent>> = None;
        for (g, v) in factors.iter().zip(s) {
            if v[0].is_zero() && v[1].is_zero() {
                continue;
            }
            let here: BTreeMap<u64, Exponent> = g.characteristic(v).exceptional.into_iter().collect();
            mins = Some(match mins {
                None => here,
                Some(m) => m
                    .into_iter()
                    .filter_map(|(p, e)| here.get(&p).map(|&f| (p, e.min(f))))
                    .collect(),
            });
        }
        let divisors: Vec<(u64, Exponent)> = mins.unwrap_or_default().into_iter().collect();
        let zero = s.iter().all(|v| v[0].is_zero() && v[1].is_zero());
        out.push(ProductSample {
            element: s.clone(),
            type_zero: !zero && divisors.iter().all(|(_, e)| e.is_finite()),
            divisors,
        });
    }
    let mut diagonal_indices = Vec::new();
    if let Some(first) = factors.first() {
        let chain = gstar_chain(first, first.primes().len())?;
        diagonal_indices = first.primes().iter().copied().zip(chain.indices).collect();
    }
    Ok(ProductReport {
        samples: out,
        diagonal_indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;

    fn k() -> PontryaginGroup {
        PontryaginGroup::new(&[3, 5, 7], &[1, 2, 3]).unwrap()
    }

    #[test]
    fn membership_basics() {
        let g = k();
        for p in [3, 5, 7] {
            assert!(g.is_member(&g.y(p).unwrap()));
            assert!(!g.divisible_by(&PontryaginGroup::x(0), p));
        }
        assert!(g.divisible_by(&[rat(1, 1), rat(2, 1)], 5));
        assert!(!g.is_member(&[rat(1, 9), rat(1, 9)]));
        assert!(!g.is_member(&[rat(1, 11), rat(0, 1)]));
        assert!(PontryaginGroup::new(&[3], &[3]).is_err());
    }

    #[test]
    fn gstar_chain_grows() {
        let g = k();
        let c = gstar_chain(&g, 3).unwrap();
        for l in &c.levels {
            l.verify().unwrap();
        }
        assert_eq!(c.levels[0].covolume, rat(1, 1));
        assert!(c.increasing);
        assert!(!c.decreasing);
        assert_eq!(c.indices, alloc::vec![rat(3, 1), rat(5, 1), rat(7, 1)]);
    }

    #[test]
    fn heights() {
        let g = k();
        let v = [rat(3, 1), rat(3, 1)];
        assert_eq!(g.height(&[rat(3, 1), rat(6, 1)], 3), Exponent::Finite(1));
        assert_eq!(g.height(&v, 3), Exponent::Finite(2));
        assert_eq!(g.height(&v, 2), Exponent::Finite(0));
        let r = product_group_check(&[g.clone(), g], &[alloc::vec![v.clone(), [rat(0, 1), rat(0, 1)]]]).unwrap();
        assert!(r.passed());
        assert_eq!(r.samples[0].divisors, alloc::vec![(3, Exponent::Finite(2))]);
        assert!(product_group_check(&[], &[]).unwrap().passed());
    }
}
