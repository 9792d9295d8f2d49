//! Character sums over Z/pZ and the existence sums behind the parameter
//! searches of the glued constructions.
//!
//! Each existence sum has the shape `sum_t prod_i (1 + s_i (g_i(t) / p))`
//! with signs `s_i = -1` for a factor that must be a non-residue and
//! `s_i = +1` for one that must be a residue. Expanding the product gives
//! `p` plus one signed character sum per nonempty subset of factors.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constructions::{check_t, f1_poly, CaseKind};
use crate::modular::{is_prime, legendre_unchecked, PolyOverFp, Residue};
use crate::par::{self, Execution};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CharSumError {
    #[error("{0} is not an odd prime")]
    NotOddPrime(u64),
    #[error("the {id} sum needs p >= {min}, got p = {p}")]
    OutOfRange { id: LemmaId, p: u64, min: u64 },
    #[error("no admissible t for the 2p sum over y with p = {0}")]
    NoParameter(u64),
}

/// Quadratic characters of `0..p`, built from the squares.
#[derive(Debug, Clone)]
pub struct LegendreTable {
    p: u64,
    symbols: Vec<i8>,
}

impl LegendreTable {
    /// Largest prime for which a table is built.
    pub const MAX_PRIME: u64 = 1 << 24;

    pub fn new(p: u64) -> LegendreTable {
        assert!(p <= Self::MAX_PRIME && p > 2, "table size out of range");
        let mut symbols = vec![-1i8; p as usize];
        symbols[0] = 0;
        for x in 1..=(p / 2) {
            symbols[(x * x % p) as usize] = 1;
        }
        LegendreTable { p, symbols }
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    #[inline]
    pub fn symbol(&self, a: u64) -> i8 {
        self.symbols[(a % self.p) as usize]
    }
}

fn symbol_fn(p: u64) -> Box<dyn Fn(u64) -> i8 + Sync + Send> {
    if p <= LegendreTable::MAX_PRIME {
        let table = LegendreTable::new(p);
        Box::new(move |a| table.symbol(a))
    } else {
        Box::new(move |a| legendre_unchecked(a, p))
    }
}

fn isqrt_ceil(p: u64) -> u64 {
    let s = p.isqrt();
    if s * s == p {
        s
    } else {
        s + 1
    }
}

/// An exact character sum together with its Hasse-Weil bound.
#[derive(Debug, Clone, PartialEq)]
pub struct CharSumResult {
    pub p: u64,
    pub polynomial: PolyOverFp,
    pub sum: i64,
    pub genus_bound_g: u64,
    /// `2g sqrt(p) + 1`.
    pub bound: f64,
}

impl CharSumResult {
    /// `2g ceil(sqrt p) + 1`, an integer upper bound for `bound`.
    pub fn integer_bound(&self) -> i64 {
        (2 * self.genus_bound_g * isqrt_ceil(self.p) + 1) as i64
    }

    /// `|sum| <= 2g ceil(sqrt p) + 1`. Only meaningful when the polynomial
    /// is not a constant times a square.
    pub fn within_bound(&self) -> bool {
        self.sum.abs() <= self.integer_bound()
    }
}

/// `floor((deg - 1) / 2)`, so that `deg` is `2g + 1` or `2g + 2`.
pub fn genus_for_degree(deg: usize) -> u64 {
    (deg.saturating_sub(1) / 2) as u64
}

/// `sum_y (f(y) / p)` over all of Z/pZ.
pub fn char_sum(f: &PolyOverFp) -> CharSumResult {
    char_sum_with(f, Execution::default())
}

pub fn char_sum_with(f: &PolyOverFp, exec: Execution) -> CharSumResult {
    let p = f.prime();
    assert!(p > 2 && is_prime(p), "character sums need an odd prime");
    assert!(!f.is_zero(), "character sum of the zero polynomial");
    let chi = symbol_fn(p);
    let sum = par::sum_range_i64(exec, 0..p as usize, |y| chi(f.eval_raw(y as u64)) as i64);
    let g = genus_for_degree(f.degree().unwrap_or(0));
    CharSumResult { p, polynomial: f.clone(), sum, genus_bound_g: g, bound: 2.0 * g as f64 * (p as f64).sqrt() + 1.0 }
}

/// The five existence sums, named by the construction they feed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LemmaId {
    /// `t` for 2p: `(1 - t)` and `t(t - 1)` non-residues.
    #[serde(rename = "2p-t")]
    TwoPT,
    /// `y` for 2p at a fixed admissible `t`.
    #[serde(rename = "2p-y")]
    TwoPY,
    #[serde(rename = "3p")]
    ThreeP,
    #[serde(rename = "5p")]
    FiveP,
    #[serde(rename = "7p")]
    SevenP,
}

impl LemmaId {
    pub const ALL: [LemmaId; 5] = [LemmaId::TwoPT, LemmaId::TwoPY, LemmaId::ThreeP, LemmaId::FiveP, LemmaId::SevenP];

    pub fn name(self) -> &'static str {
        match self {
            LemmaId::TwoPT => "2p-t",
            LemmaId::TwoPY => "2p-y",
            LemmaId::ThreeP => "3p",
            LemmaId::FiveP => "5p",
            LemmaId::SevenP => "7p",
        }
    }

    /// Smallest prime for which [`verify_lemma_sums`] is defined.
    pub fn min_prime(self) -> u64 {
        match self {
            LemmaId::TwoPT | LemmaId::ThreeP => 31,
            LemmaId::TwoPY | LemmaId::FiveP => 501,
            LemmaId::SevenP => 67,
        }
    }

    /// Whether the factors are polynomials in a parameter `t` fixed in advance.
    pub fn needs_parameter(self) -> bool {
        self == LemmaId::TwoPY
    }
}

impl fmt::Display for LemmaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LemmaId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        LemmaId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| format!("unknown sum {s:?} (expected 2p-t, 2p-y, 3p, 5p or 7p)"))
    }
}

/// One factor `1 + sign * (poly / p)` of an existence sum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SumFactor {
    pub sign: i8,
    pub poly: PolyOverFp,
}

/// One nonempty-subset term `sign * sum (poly / p)` of an expansion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpansionTerm {
    /// Bit `i` set when factor `i` takes part.
    pub subset: u32,
    pub sign: i8,
    pub poly: PolyOverFp,
}

fn lin(a: i64, b: i64, p: u64) -> PolyOverFp {
    PolyOverFp::linear(a, b, p)
}

/// The admissible `t` used for the 2p sum over `y`: the first `t >= 2`
/// accepted by the 2p hypotheses.
pub fn default_parameter(p: u64) -> Option<u64> {
    (2..p).find(|&t| check_t(CaseKind::TwoP, p, t).is_ok())
}

/// Factors of the sum `id` over Z/pZ. For [`LemmaId::TwoPY`] the variable is
/// `y` and `t` is the fixed parameter; otherwise `t` is ignored.
pub fn factors(id: LemmaId, p: u64, t: u64) -> Vec<SumFactor> {
    let f = |sign: i8, poly: PolyOverFp| SumFactor { sign, poly };
    match id {
        LemmaId::TwoPT => vec![f(-1, lin(-1, 1, p)), f(-1, lin(1, 0, p).mul(&lin(1, -1, p)))],
        LemmaId::TwoPY => {
            let t = Residue::new(t, p);
            let minus_t = (-t).value() as i64;
            vec![f(-1, lin(minus_t, 1, p)), f(-1, lin(-1, 1, p)), f(-1, f1_poly(p, t.value())), f(1, lin(-9, 1, p))]
        }
        LemmaId::ThreeP => vec![f(-1, lin(1, -1, p).mul(&lin(1, -9, p))), f(-1, lin(1, 0, p).mul(&lin(1, -1, p)))],
        LemmaId::FiveP => vec![
            f(-1, lin(9, -16, p)),
            f(-1, lin(-16, 9, p)),
            f(-1, lin(1, 1, p)),
            f(-1, lin(1, -1, p).mul(&lin(1, -9, p))),
            f(-1, lin(1, -1, p).mul(&lin(9, -1, p))),
            f(1, lin(1, 0, p)),
        ],
        LemmaId::SevenP => vec![f(-1, lin(1, -9, p).mul(&lin(1, -1, p))), f(-1, lin(9, -1, p).mul(&lin(1, -1, p)))],
    }
}

/// All `2^k - 1` nonconstant terms of the expanded product.
pub fn expansion(factors: &[SumFactor]) -> Vec<ExpansionTerm> {
    let p = factors.first().map(|f| f.poly.prime()).expect("at least one factor");
    (1u32..(1 << factors.len()))
        .map(|subset| {
            let mut sign = 1i8;
            let mut poly = PolyOverFp::constant(1, p);
            for (i, fac) in factors.iter().enumerate() {
                if subset & (1 << i) != 0 {
                    sign *= fac.sign;
                    poly = poly.mul(&fac.poly);
                }
            }
            ExpansionTerm { subset, sign, poly }
        })
        .collect()
}

/// Number of expansion terms by degree of their square-free odd part, i.e.
/// the degree that governs the Hasse-Weil bound once squared linear
/// factors are discounted.
pub fn degree_census(factors: &[SumFactor]) -> BTreeMap<usize, usize> {
    let mut census = BTreeMap::new();
    for term in expansion(factors) {
        let d = term.poly.odd_part().degree().unwrap_or(0);
        *census.entry(d).or_insert(0) += 1;
    }
    census
}

/// `sum_x prod_i (1 + s_i (g_i(x) / p))`, computed directly.
pub fn product_sum(factors: &[SumFactor], exec: Execution) -> i64 {
    let p = factors.first().map(|f| f.poly.prime()).expect("at least one factor");
    let chi = symbol_fn(p);
    par::sum_range_i64(exec, 0..p as usize, |x| {
        factors.iter().map(|fac| 1 + fac.sign as i64 * chi(fac.poly.eval_raw(x as u64)) as i64).product()
    })
}

/// Number of `x` where every factor has its required symbol (non-residue
/// for sign -1, residue for sign +1).
pub fn count_symbol_solutions(factors: &[SumFactor], exec: Execution) -> u64 {
    let p = factors.first().map(|f| f.poly.prime()).expect("at least one factor");
    let chi = symbol_fn(p);
    par::sum_range(exec, 0..p as usize, |x| {
        factors.iter().all(|fac| chi(fac.poly.eval_raw(x as u64)) == fac.sign) as u64
    })
}

/// Lower bound a sum has to meet, as `p - c - k sqrt(p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LowerBound {
    pub c: i64,
    pub k: i64,
}

impl LowerBound {
    pub fn value(self, p: u64) -> f64 {
        p as f64 - self.c as f64 - self.k as f64 * (p as f64).sqrt()
    }

    /// Exact test of `sum >= p - c - k sqrt(p)`.
    pub fn holds(self, sum: i64, p: u64) -> bool {
        let lhs = sum - p as i64 + self.c;
        if lhs >= 0 {
            return true;
        }
        (lhs as i128).pow(2) <= (self.k as i128).pow(2) * p as i128
    }
}

pub fn lower_bound(id: LemmaId) -> LowerBound {
    match id {
        LemmaId::TwoPT | LemmaId::ThreeP | LemmaId::SevenP => LowerBound { c: 4, k: 0 },
        LemmaId::TwoPY => LowerBound { c: 15, k: 60 },
        // p - 13 - 35(2 sqrt p + 1) - 15(4 sqrt p + 1)
        LemmaId::FiveP => LowerBound { c: 63, k: 130 },
    }
}

/// One row of a sum check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaSumRow {
    pub p: u64,
    pub id: LemmaId,
    /// The fixed `t` for the 2p sum over `y`.
    pub parameter: Option<u64>,
    pub sum: i64,
    pub bound: f64,
    pub pass: bool,
}

impl LemmaSumRow {
    pub const CSV_HEADER: &'static str = "p,id,sum,bound,pass";

    pub fn to_csv(&self) -> String {
        format!("{},{},{},{:.3},{}", self.p, self.id, self.sum, self.bound, self.pass)
    }
}

/// Evaluates the existence sum `id` at `p` exactly and compares it with its
/// lower bound.
pub fn lemma_sum(id: LemmaId, p: u64, exec: Execution) -> Result<LemmaSumRow, CharSumError> {
    if p < 3 || !is_prime(p) {
        return Err(CharSumError::NotOddPrime(p));
    }
    let min = id.min_prime();
    if p < min {
        return Err(CharSumError::OutOfRange { id, p, min });
    }
    let parameter =
        if id.needs_parameter() { Some(default_parameter(p).ok_or(CharSumError::NoParameter(p))?) } else { None };
    let sum = product_sum(&factors(id, p, parameter.unwrap_or(0)), exec);
    let lb = lower_bound(id);
    let mut pass = lb.holds(sum, p);
    if id == LemmaId::SevenP {
        // enough room past the 13 excluded values and 2 extra roots
        pass &= sum >= 61;
    }
    Ok(LemmaSumRow { p, id, parameter, sum, bound: lb.value(p), pass })
}

pub fn verify_lemma_sums(id: LemmaId, p: u64) -> bool {
    lemma_sum(id, p, Execution::default()).map(|row| row.pass).unwrap_or(false)
}

/// Rows for every prime in `[p_min, p_max]` that is in range for `id`.
pub fn lemma_sum_rows(id: LemmaId, p_min: u64, p_max: u64, exec: Execution) -> Vec<Result<LemmaSumRow, CharSumError>> {
    let primes: Vec<u64> = crate::modular::primes_between(p_min.max(id.min_prime()), p_max);
    par::map_slice(exec, &primes, |&p| lemma_sum(id, p, Execution::Sequential))
}

/// Hasse-Weil check for every expansion term of `id` at `p` that is not a
/// constant times a square. Returns the offending results.
pub fn hasse_weil_violations(id: LemmaId, p: u64, t: u64, exec: Execution) -> Vec<CharSumResult> {
    expansion(&factors(id, p, t))
        .into_iter()
        .filter(|term| !term.poly.is_constant_times_square())
        .map(|term| char_sum_with(&term.poly, exec))
        .filter(|r| !r.within_bound())
        .collect()
}

/// Whether `2^28 t^3 (t-9)^2 (t-4)^2 (t-1)^8 (9t-1)^2` is nonzero mod p,
/// the discriminant of `(y-1)(9y-1)(ty-1) f_1`.
pub fn discriminant_distinct_roots(t: Residue) -> bool {
    let p = t.modulus();
    if p == 2 {
        return false;
    }
    let c = |k: i64| Residue::from_i64(k, p);
    let one = c(1);
    let disc =
        c(2).pow(28) * t.pow(3) * (t - c(9)).pow(2) * (t - c(4)).pow(2) * (t - one).pow(8) * (c(9) * t - one).pow(2);
    !disc.is_zero()
}
