//! Exact arithmetic in Z/nZ and F_p.
//!
//! Everything here works on fully reduced `u64` values with `u128`
//! intermediates, so no operation can overflow for moduli up to `u64::MAX`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModularError {
    #[error("{value} is not invertible modulo {modulus}")]
    NotInvertible { value: u64, modulus: u64 },
    #[error("{0} is not an odd prime")]
    NotPrime(u64),
    #[error("modulus must be at least 1")]
    ZeroModulus,
}

/// An element of Z/nZ, always stored reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Residue {
    value: u64,
    modulus: u64,
}

impl Residue {
    /// Reduces `value` modulo `modulus`.
    ///
    /// Panics if `modulus == 0`.
    pub fn new(value: u64, modulus: u64) -> Self {
        assert!(modulus >= 1, "modulus must be at least 1");
        Residue { value: value % modulus, modulus }
    }

    /// Reduces a signed value, so `Residue::from_i64(-1, 7)` is 6.
    pub fn from_i64(value: i64, modulus: u64) -> Self {
        assert!(modulus >= 1, "modulus must be at least 1");
        let m = modulus as i128;
        let v = (value as i128).rem_euclid(m);
        Residue { value: v as u64, modulus }
    }

    /// The fraction `num / den` in Z/nZ.
    pub fn ratio(num: i64, den: i64, modulus: u64) -> Result<Self, ModularError> {
        let d = Residue::from_i64(den, modulus);
        Ok(Residue::from_i64(num, modulus) * d.inverse()?)
    }

    pub fn value(self) -> u64 {
        self.value
    }

    pub fn modulus(self) -> u64 {
        self.modulus
    }

    pub fn is_zero(self) -> bool {
        self.value == 0
    }

    pub fn inverse(self) -> Result<Self, ModularError> {
        mod_inverse(self)
    }

    pub fn pow(self, exp: u64) -> Self {
        Residue { value: pow_mod(self.value, exp, self.modulus), modulus: self.modulus }
    }

    fn check(self, other: Self) {
        assert_eq!(self.modulus, other.modulus, "residues with different moduli");
    }
}

impl fmt::Display for Residue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (mod {})", self.value, self.modulus)
    }
}

impl Add for Residue {
    type Output = Residue;
    fn add(self, rhs: Residue) -> Residue {
        self.check(rhs);
        Residue { value: add_mod(self.value, rhs.value, self.modulus), modulus: self.modulus }
    }
}

impl Sub for Residue {
    type Output = Residue;
    fn sub(self, rhs: Residue) -> Residue {
        self.check(rhs);
        Residue { value: sub_mod(self.value, rhs.value, self.modulus), modulus: self.modulus }
    }
}

impl Mul for Residue {
    type Output = Residue;
    fn mul(self, rhs: Residue) -> Residue {
        self.check(rhs);
        Residue { value: mul_mod(self.value, rhs.value, self.modulus), modulus: self.modulus }
    }
}

impl Neg for Residue {
    type Output = Residue;
    fn neg(self) -> Residue {
        Residue { value: sub_mod(0, self.value, self.modulus), modulus: self.modulus }
    }
}

#[inline]
pub fn add_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 + b as u128) % m as u128) as u64
}

#[inline]
pub fn sub_mod(a: u64, b: u64, m: u64) -> u64 {
    if a >= b {
        (a - b) % m
    } else {
        (m - (b - a) % m) % m
    }
}

#[inline]
pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut base = base % m;
    let mut acc = 1u64;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Multiplicative inverse by the extended Euclidean algorithm.
pub fn mod_inverse(a: Residue) -> Result<Residue, ModularError> {
    let m = a.modulus;
    if m == 1 {
        return Ok(Residue { value: 0, modulus: 1 });
    }
    let (mut old_r, mut r) = (a.value as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r != 1 {
        return Err(ModularError::NotInvertible { value: a.value, modulus: m });
    }
    Ok(Residue { value: old_s.rem_euclid(m as i128) as u64, modulus: m })
}

/// Legendre symbol by Euler's criterion. The modulus must be an odd prime.
pub fn legendre(a: Residue) -> Result<i8, ModularError> {
    let p = a.modulus;
    if p == 2 || !is_prime(p) {
        return Err(ModularError::NotPrime(p));
    }
    Ok(legendre_unchecked(a.value, p))
}

/// Euler's criterion without the primality check.
#[inline]
pub fn legendre_unchecked(a: u64, p: u64) -> i8 {
    let a = a % p;
    if a == 0 {
        return 0;
    }
    if pow_mod(a, (p - 1) / 2, p) == 1 {
        1
    } else {
        -1
    }
}

// Strong-pseudoprime witnesses: the first twelve primes are a deterministic
// witness set for every n < 3.3 * 10^24.
const MR_WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Deterministic Miller-Rabin, correct for every `u64`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &MR_WITNESSES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &MR_WITNESSES {
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

/// Smallest prime `>= n`.
pub fn next_prime(mut n: u64) -> u64 {
    while !is_prime(n) {
        n += 1;
    }
    n
}

/// Primes in `[lo, hi]`.
pub fn primes_between(lo: u64, hi: u64) -> Vec<u64> {
    (lo..=hi).filter(|&n| is_prime(n)).collect()
}

/// Inverses of `1..p` mod `p`, with `inv[0] = 0`. Linear time.
pub fn inverse_table(p: u64) -> Vec<u64> {
    let n = p as usize;
    let mut inv = vec![0u64; n.max(2)];
    if n > 1 {
        inv[1] = 1;
    }
    for i in 2..n {
        let q = p / i as u64;
        let r = (p % i as u64) as usize;
        inv[i] = mul_mod(p - q % p, inv[r], p);
    }
    inv.truncate(n);
    inv
}

/// A polynomial over F_p, constant term first, with no trailing zeros.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PolyOverFp {
    coefficients: Vec<u64>,
    prime: u64,
}

impl PolyOverFp {
    pub fn new(coefficients: Vec<u64>, prime: u64) -> Self {
        let mut coefficients: Vec<u64> = coefficients.into_iter().map(|c| c % prime).collect();
        while coefficients.last() == Some(&0) {
            coefficients.pop();
        }
        PolyOverFp { coefficients, prime }
    }

    pub fn from_i64(coefficients: &[i64], prime: u64) -> Self {
        PolyOverFp::new(coefficients.iter().map(|&c| Residue::from_i64(c, prime).value()).collect(), prime)
    }

    pub fn zero(prime: u64) -> Self {
        PolyOverFp { coefficients: Vec::new(), prime }
    }

    pub fn constant(c: u64, prime: u64) -> Self {
        PolyOverFp::new(vec![c], prime)
    }

    /// `a*y + b`.
    pub fn linear(a: i64, b: i64, prime: u64) -> Self {
        PolyOverFp::from_i64(&[b, a], prime)
    }

    pub fn coefficients(&self) -> &[u64] {
        &self.coefficients
    }

    pub fn prime(&self) -> u64 {
        self.prime
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Degree, with the zero polynomial reported as `None`.
    pub fn degree(&self) -> Option<usize> {
        self.coefficients.len().checked_sub(1)
    }

    pub fn leading(&self) -> u64 {
        self.coefficients.last().copied().unwrap_or(0)
    }

    /// Horner evaluation.
    pub fn eval(&self, x: Residue) -> Residue {
        assert_eq!(x.modulus(), self.prime, "evaluation point has the wrong modulus");
        Residue::new(self.eval_raw(x.value()), self.prime)
    }

    #[inline]
    pub fn eval_raw(&self, x: u64) -> u64 {
        let p = self.prime;
        self.coefficients.iter().rev().fold(0u64, |acc, &c| add_mod(mul_mod(acc, x, p), c, p))
    }

    pub fn mul(&self, other: &PolyOverFp) -> PolyOverFp {
        assert_eq!(self.prime, other.prime);
        if self.is_zero() || other.is_zero() {
            return PolyOverFp::zero(self.prime);
        }
        let p = self.prime;
        let mut out = vec![0u64; self.coefficients.len() + other.coefficients.len() - 1];
        for (i, &a) in self.coefficients.iter().enumerate() {
            for (j, &b) in other.coefficients.iter().enumerate() {
                out[i + j] = add_mod(out[i + j], mul_mod(a, b, p), p);
            }
        }
        PolyOverFp::new(out, p)
    }

    pub fn scale(&self, c: u64) -> PolyOverFp {
        let p = self.prime;
        PolyOverFp::new(self.coefficients.iter().map(|&a| mul_mod(a, c, p)).collect(), p)
    }

    pub fn sub(&self, other: &PolyOverFp) -> PolyOverFp {
        assert_eq!(self.prime, other.prime);
        let p = self.prime;
        let len = self.coefficients.len().max(other.coefficients.len());
        let out = (0..len)
            .map(|i| {
                let a = self.coefficients.get(i).copied().unwrap_or(0);
                let b = other.coefficients.get(i).copied().unwrap_or(0);
                sub_mod(a, b, p)
            })
            .collect();
        PolyOverFp::new(out, p)
    }

    pub fn derivative(&self) -> PolyOverFp {
        let p = self.prime;
        let out = self.coefficients.iter().enumerate().skip(1).map(|(i, &c)| mul_mod(c, i as u64 % p, p)).collect();
        PolyOverFp::new(out, p)
    }

    /// Scaled to leading coefficient 1 (zero stays zero).
    pub fn monic(&self) -> PolyOverFp {
        if self.is_zero() {
            return self.clone();
        }
        let inv = pow_mod(self.leading(), self.prime - 2, self.prime);
        self.scale(inv)
    }

    /// Euclidean division. Panics on division by zero.
    pub fn div_rem(&self, divisor: &PolyOverFp) -> (PolyOverFp, PolyOverFp) {
        assert!(!divisor.is_zero(), "polynomial division by zero");
        let p = self.prime;
        let dd = divisor.coefficients.len() - 1;
        let inv_lead = pow_mod(divisor.leading(), p - 2, p);
        let mut rem = self.coefficients.clone();
        if rem.len() <= dd {
            return (PolyOverFp::zero(p), self.clone());
        }
        let mut quot = vec![0u64; rem.len() - dd];
        for k in (0..quot.len()).rev() {
            let c = mul_mod(rem[k + dd], inv_lead, p);
            quot[k] = c;
            if c == 0 {
                continue;
            }
            for (j, &d) in divisor.coefficients.iter().enumerate() {
                rem[k + j] = sub_mod(rem[k + j], mul_mod(c, d, p), p);
            }
        }
        rem.truncate(dd);
        (PolyOverFp::new(quot, p), PolyOverFp::new(rem, p))
    }

    /// Monic gcd.
    pub fn gcd(&self, other: &PolyOverFp) -> PolyOverFp {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let r = a.div_rem(&b).1;
            a = b;
            b = r;
        }
        a.monic()
    }

    /// Square-free decomposition `f = c * prod a_i^i` (Yun). Returns the
    /// factors `a_1, a_2, ...` (monic, possibly constant 1).
    ///
    /// Only valid when `deg f < p`, which rules out p-th power factors.
    pub fn squarefree_decomposition(&self) -> Vec<PolyOverFp> {
        assert!(!self.is_zero(), "decomposition of the zero polynomial");
        assert!(
            (self.coefficients.len() as u64) <= self.prime,
            "Yun's algorithm needs degree below the characteristic"
        );
        let f = self.monic();
        if f.degree() == Some(0) {
            return Vec::new();
        }
        let fp = f.derivative();
        let a = f.gcd(&fp);
        let mut b = f.div_rem(&a).0;
        let mut c = fp.div_rem(&a).0;
        let mut d = c.sub(&b.derivative());
        let mut factors = Vec::new();
        loop {
            let ai = b.gcd(&d);
            b = b.div_rem(&ai).0;
            c = d.div_rem(&ai).0;
            factors.push(ai);
            if b.degree() == Some(0) {
                break;
            }
            d = c.sub(&b.derivative());
        }
        factors
    }

    /// Product of the odd-multiplicity square-free parts, i.e. `f` with every
    /// square factor stripped off (monic).
    pub fn odd_part(&self) -> PolyOverFp {
        let mut out = PolyOverFp::constant(1, self.prime);
        for (i, a) in self.squarefree_decomposition().iter().enumerate() {
            if (i + 1) % 2 == 1 {
                out = out.mul(a);
            }
        }
        out
    }

    /// Whether `f = c * h^2` for a constant `c` and some polynomial `h`.
    pub fn is_constant_times_square(&self) -> bool {
        self.odd_part().degree() == Some(0)
    }
}

impl fmt::Display for PolyOverFp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, &c) in self.coefficients.iter().enumerate().rev() {
            if c == 0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match i {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c}y")?,
                _ => write!(f, "{c}y^{i}")?,
            }
        }
        write!(f, " (mod {})", self.prime)
    }
}

/// Horner evaluation of `f` at `x`.
pub fn eval_poly(f: &PolyOverFp, x: Residue) -> Residue {
    f.eval(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trial_division(n: u64) -> bool {
        if n < 2 {
            return false;
        }
        let mut d = 2;
        while d * d <= n {
            if n.is_multiple_of(d) {
                return false;
            }
            d += 1;
        }
        true
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(Residue::new(1, 7).inverse().unwrap().value(), 1);
        assert_eq!(Residue::new(2, 11).inverse().unwrap().value(), 6);
        assert_eq!(Residue::new(4, 8).inverse(), Err(ModularError::NotInvertible { value: 4, modulus: 8 }));
    }

    #[test]
    fn legendre_examples() {
        for p in [3u64, 5, 7, 11, 13, 101] {
            assert_eq!(legendre(Residue::new(1, p)), Ok(1));
        }
        assert_eq!(legendre(Residue::new(3, 7)), Ok(-1));
        assert_eq!(legendre(Residue::new(0, 11)), Ok(0));
        assert_eq!(legendre(Residue::new(3, 15)), Err(ModularError::NotPrime(15)));
        assert_eq!(legendre(Residue::new(1, 2)), Err(ModularError::NotPrime(2)));
    }

    #[test]
    fn legendre_matches_square_table() {
        for p in (3..=200u64).filter(|&p| trial_division(p)) {
            let mut is_square = vec![false; p as usize];
            for x in 1..p {
                is_square[(x * x % p) as usize] = true;
            }
            for a in 0..p {
                let want = if a == 0 {
                    0
                } else if is_square[a as usize] {
                    1
                } else {
                    -1
                };
                assert_eq!(legendre(Residue::new(a, p)).unwrap(), want, "a={a} p={p}");
            }
        }
    }

    #[test]
    fn legendre_is_multiplicative() {
        for p in (3..=100u64).filter(|&p| trial_division(p)) {
            for a in 0..p {
                for b in 0..p {
                    let ab = legendre_unchecked(a * b, p);
                    assert_eq!(ab, legendre_unchecked(a, p) * legendre_unchecked(b, p));
                }
            }
        }
    }

    #[test]
    fn primality_examples() {
        assert!(is_prime(2));
        assert!(!is_prime(341));
        assert!(!is_prime(1));
        assert!(!is_prime(0));
        // strong pseudoprime to bases 2..=37 would need n > 3.3e24
        assert!(is_prime(18_446_744_073_709_551_557));
        assert!(!is_prime(3_215_031_751)); // spsp(2,3,5,7)
        assert!(!is_prime(18_446_744_073_709_551_615));
    }

    #[test]
    fn primality_matches_trial_division() {
        for n in 0..=1_000_000u64 {
            assert_eq!(is_prime(n), trial_division(n), "n={n}");
        }
    }

    #[test]
    fn inverse_table_matches_extended_euclid() {
        for p in [2u64, 3, 11, 97, 1009] {
            let table = inverse_table(p);
            assert_eq!(table.len(), p as usize);
            for a in 1..p {
                assert_eq!(table[a as usize], Residue::new(a, p).inverse().unwrap().value());
            }
        }
    }

    #[test]
    fn eval_examples() {
        let five = PolyOverFp::constant(5, 11);
        for x in 0..11 {
            assert_eq!(five.eval(Residue::new(x, 11)).value(), 5);
        }
        // y^2 (4t-1)^2 - 2(4t+1) y + 1 with t = 2
        let p = 31;
        let t = 2i64;
        let f1 = PolyOverFp::from_i64(&[1, -2 * (4 * t + 1), (4 * t - 1) * (4 * t - 1)], p);
        assert_eq!(f1.eval(Residue::new(0, p)).value(), 1);
        let f = PolyOverFp::from_i64(&[0, -1, 1], 7);
        assert_eq!(f.eval(Residue::new(3, 7)).value(), 6);
    }

    #[test]
    fn squares_are_detected() {
        let p = 31;
        let a = PolyOverFp::linear(1, -1, p);
        let b = PolyOverFp::linear(9, -1, p);
        let sq = a.mul(&a).mul(&b).mul(&b).scale(7);
        assert!(sq.is_constant_times_square());
        assert!(!a.mul(&a).mul(&b).is_constant_times_square());
        assert_eq!(a.mul(&a).mul(&b).odd_part(), b.monic());
        // y^2 - 3 is irreducible mod 7 (3 is a non-residue) and square-free
        assert!(!PolyOverFp::from_i64(&[-3, 0, 1], 7).is_constant_times_square());
        assert!(PolyOverFp::constant(3, 7).is_constant_times_square());
    }

    #[test]
    fn div_rem_reconstructs() {
        let p = 101;
        let f = PolyOverFp::from_i64(&[3, -7, 0, 11, 5], p);
        let g = PolyOverFp::from_i64(&[2, 9, 4], p);
        let (q, r) = f.div_rem(&g);
        let back = q.mul(&g);
        let diff = f.sub(&back).sub(&r);
        assert!(diff.is_zero());
        assert!(r.degree().unwrap_or(0) < 2);
    }

    proptest! {
        #[test]
        fn inverse_is_an_involution(a in 1u64..10_000, m in 2u64..10_000) {
            let r = Residue::new(a, m);
            if gcd(r.value(), m) == 1 {
                let inv = r.inverse().unwrap();
                prop_assert_eq!((r * inv).value(), 1 % m);
                prop_assert_eq!(inv.inverse().unwrap(), r);
            } else {
                prop_assert!(r.inverse().is_err());
            }
        }

        #[test]
        fn ratio_times_denominator(num in -1000i64..1000, den in 1i64..1000) {
            let p = 1_000_003u64;
            let q = Residue::ratio(num, den, p).unwrap();
            prop_assert_eq!(q * Residue::from_i64(den, p), Residue::from_i64(num, p));
        }
    }
}
