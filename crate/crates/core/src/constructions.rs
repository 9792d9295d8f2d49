//! Explicit AP-destroying permutations for Z/pZ and Z/mpZ, m in {2, 3, 5, 7}.
//!
//! The glued maps work in CRT coordinates `x <-> (x mod m, x mod p)`. Each
//! one is a table with one row per residue `u mod m`, giving where `(u, 0)`,
//! `(u, 1)` and `(u, x)` for `x not in {0, 1}` go; the last is always of the
//! form `(u', k / x)`. The prime case starts from the inversion map
//! `0 -> t, 1 -> 0, x -> t/x` and removes its two residual progressions with
//! transpositions found by search.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::modular::{self, inverse_table, is_prime, legendre_unchecked, Residue};
use crate::par::Execution;
use crate::permcore::{count_preserved, swap_effect_in, ApSpace, ApTriple, Cyclic, Perm, DEFAULT_VERIFY_CEILING};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstructionError {
    #[error("{0} is not a prime")]
    NotPrime(u64),
    #[error("p = {p} is outside the supported range for {what}")]
    OutOfContract { p: u64, what: String },
    #[error("bad parameters for {case}: {reason}")]
    BadParams { case: CaseKind, reason: String },
    #[error("{case} parameters need p >= {min}, got p = {p}")]
    BelowThreshold { case: CaseKind, p: u64, min: u64 },
    #[error("no admissible parameters for {case} with p = {p}")]
    NotFound { case: CaseKind, p: u64 },
    #[error("no transposition repair found for the prime construction with p = {0}")]
    ConstructionFailed(u64),
    #[error("construction on Z/{n}Z preserves {count} progressions")]
    VerificationFailed { n: usize, count: u64 },
}

/// The four glued families `mp`, m in {2, 3, 5, 7}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CaseKind {
    #[serde(rename = "2p")]
    TwoP,
    #[serde(rename = "3p")]
    ThreeP,
    #[serde(rename = "5p")]
    FiveP,
    #[serde(rename = "7p")]
    SevenP,
}

impl CaseKind {
    pub const ALL: [CaseKind; 4] = [CaseKind::TwoP, CaseKind::ThreeP, CaseKind::FiveP, CaseKind::SevenP];

    pub fn multiplier(self) -> u64 {
        match self {
            CaseKind::TwoP => 2,
            CaseKind::ThreeP => 3,
            CaseKind::FiveP => 5,
            CaseKind::SevenP => 7,
        }
    }

    pub fn from_multiplier(m: u64) -> Option<CaseKind> {
        CaseKind::ALL.into_iter().find(|k| k.multiplier() == m)
    }

    /// Smallest prime for which admissible parameters are known to exist
    /// (for 2p this covers `t`; `y` is guaranteed only from 503 on).
    pub fn min_prime(self) -> u64 {
        match self {
            CaseKind::TwoP => 31,
            CaseKind::ThreeP => 31,
            CaseKind::FiveP => 501,
            CaseKind::SevenP => 67,
        }
    }

    /// Smallest prime from which the whole parameter set is guaranteed.
    pub fn guaranteed_from(self) -> u64 {
        match self {
            CaseKind::TwoP => 501,
            other => other.min_prime(),
        }
    }
}

impl fmt::Display for CaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}p", self.multiplier())
    }
}

impl FromStr for CaseKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "2p" => Ok(CaseKind::TwoP),
            "3p" => Ok(CaseKind::ThreeP),
            "5p" => Ok(CaseKind::FiveP),
            "7p" => Ok(CaseKind::SevenP),
            other => Err(format!("unknown case {other:?} (expected 2p, 3p, 5p or 7p)")),
        }
    }
}

/// Parameters selected for a glued construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseParams {
    pub case: CaseKind,
    pub p: u64,
    pub t: u64,
    /// Only for 2p.
    pub y: Option<u64>,
}

/// Fixed permutation of Z/5Z used by the 5p map on the `{0, 1}` rows.
pub const SIGMA5: [usize; 5] = [3, 2, 1, 4, 0];
/// Mod-7 movement of the `{0, 1}` entries in the 7p map.
pub const SIGMA7_FIXED: [usize; 7] = [0, 1, 2, 3, 5, 6, 4];
/// Mod-7 movement of the remaining entries in the 7p map.
pub const SIGMA7_MOVING: [usize; 7] = [6, 0, 4, 2, 3, 5, 1];

fn frac(num: i64, den: i64, p: u64) -> u64 {
    Residue::ratio(num, den, p).expect("small denominators are invertible mod p >= 11").value()
}

fn neg(v: u64, p: u64) -> u64 {
    Residue::from_i64(-(v as i64), p).value()
}

// value of a*t + b
fn lin(a: i64, b: i64, t: u64, p: u64) -> u64 {
    let a = Residue::from_i64(a, p);
    let b = Residue::from_i64(b, p);
    (a * Residue::new(t, p) + b).value()
}

fn mulp(x: u64, y: u64, p: u64) -> u64 {
    modular::mul_mod(x, y, p)
}

fn require_prime(p: u64, min: u64, what: &str) -> Result<(), ConstructionError> {
    if !is_prime(p) {
        return Err(ConstructionError::NotPrime(p));
    }
    if p < min {
        return Err(ConstructionError::OutOfContract { p, what: what.to_string() });
    }
    Ok(())
}

struct Checker {
    case: CaseKind,
    p: u64,
}

impl Checker {
    fn excluded(&self, value: u64, set: &[u64], label: &str) -> Result<(), ConstructionError> {
        if set.contains(&value) {
            return Err(self.bad(format!("{label} = {value} lies in the excluded set")));
        }
        Ok(())
    }

    fn symbol(&self, value: u64, want: i8, label: &str) -> Result<(), ConstructionError> {
        let got = legendre_unchecked(value, self.p);
        if got != want {
            return Err(self.bad(format!("legendre({label}) = {got}, need {want}")));
        }
        Ok(())
    }

    fn bad(&self, reason: String) -> ConstructionError {
        ConstructionError::BadParams { case: self.case, reason }
    }
}

fn excluded_t(case: CaseKind, p: u64) -> Vec<u64> {
    let f = |n: i64, d: i64| frac(n, d, p);
    match case {
        CaseKind::TwoP => vec![f(0, 1), f(1, 1), f(1, 4), f(4, 1), f(1, 9), f(9, 1)],
        CaseKind::ThreeP => vec![f(-1, 1), f(0, 1), f(1, 1), f(1, 2), f(2, 1), f(9, 1)],
        CaseKind::FiveP => {
            let mut v: Vec<u64> = [-3, -2, -1, 0, 1, 2, 3, 4].iter().map(|&k| f(k, 1)).collect();
            v.extend(
                [(-3, 2), (-4, 3), (-3, 4), (-2, 3), (-1, 2), (-1, 3), (1, 4), (1, 3), (1, 2), (2, 3), (3, 4), (3, 2)]
                    .iter()
                    .map(|&(n, d)| f(n, d)),
            );
            v
        }
        CaseKind::SevenP => {
            let mut v: Vec<u64> = [-2, -1, 0, 1, 2, 3, 4].iter().map(|&k| f(k, 1)).collect();
            v.extend([(-1, 2), (1, 4), (1, 3), (1, 2), (2, 3), (3, 4)].iter().map(|&(n, d)| f(n, d)));
            v
        }
    }
}

/// Checks the hypotheses on `t` for the given family. For 2p this is the
/// condition on `t` alone; see [`check_2p_y`] for `y`.
pub fn check_t(case: CaseKind, p: u64, t: u64) -> Result<(), ConstructionError> {
    require_prime(p, 11, "glued constructions")?;
    let t = t % p;
    let c = Checker { case, p };
    c.excluded(t, &excluded_t(case, p), "t")?;
    let tm1 = lin(1, -1, t, p);
    let tm9 = lin(1, -9, t, p);
    let nine_t_m1 = lin(9, -1, t, p);
    match case {
        CaseKind::TwoP => {
            let inv_t = Residue::new(t, p).inverse().expect("t != 0").value();
            c.symbol(lin(-1, 1, inv_t, p), -1, "1 - 1/t")?;
            c.symbol(lin(-1, 1, t, p), -1, "1 - t")?;
        }
        CaseKind::ThreeP => {
            c.symbol(mulp(t, tm1, p), -1, "t(t-1)")?;
            c.symbol(mulp(tm1, tm9, p), -1, "(t-1)(t-9)")?;
        }
        CaseKind::FiveP => {
            c.symbol(lin(9, -16, t, p), -1, "9t-16")?;
            c.symbol(lin(-16, 9, t, p), -1, "9-16t")?;
            c.symbol(lin(1, 1, t, p), -1, "t+1")?;
            c.symbol(mulp(tm1, tm9, p), -1, "(t-1)(t-9)")?;
            c.symbol(mulp(tm1, nine_t_m1, p), -1, "(t-1)(9t-1)")?;
            c.symbol(t, 1, "t")?;
        }
        CaseKind::SevenP => {
            c.symbol(mulp(tm1, tm9, p), -1, "(t-1)(t-9)")?;
            c.symbol(mulp(nine_t_m1, tm1, p), -1, "(9t-1)(t-1)")?;
        }
    }
    Ok(())
}

/// `(4t-1)^2 y^2 - 2(4t+1) y + 1`.
pub fn f1_poly(p: u64, t: u64) -> modular::PolyOverFp {
    let a = lin(4, -1, t, p);
    let b = lin(4, 1, t, p);
    modular::PolyOverFp::new(vec![1, neg(mulp(2, b, p), p), mulp(a, a, p)], p)
}

/// Hypotheses on the swap point `y` of the 2p construction, for a fixed `t`.
pub fn check_2p_y(p: u64, t: u64, y: u64) -> Result<(), ConstructionError> {
    require_prime(p, 11, "glued constructions")?;
    let (t, y) = (t % p, y % p);
    let c = Checker { case: CaseKind::TwoP, p };
    let f = |n: i64, d: i64| frac(n, d, p);
    let mut set = vec![f(0, 1), f(1, 1), f(-1, 1), f(2, 1), f(1, 2), f(1, 3), f(4, 1)];
    if t != 0 {
        set.push(mulp(4, Residue::new(t, p).inverse().expect("t != 0").value(), p));
    }
    let two_t_1 = lin(2, 1, t, p);
    if two_t_1 != 0 {
        set.push(Residue::new(two_t_1, p).inverse().expect("nonzero").value());
    }
    c.excluded(y, &set, "y")?;
    let ty = mulp(t, y, p);
    c.symbol(lin(-1, 1, ty, p), -1, "1 - ty")?;
    c.symbol(lin(-1, 1, y, p), -1, "1 - y")?;
    c.symbol(f1_poly(p, t).eval_raw(y), -1, "(4t-1)^2 y^2 - 2(4t+1) y + 1")?;
    c.symbol(lin(-9, 1, y, p), 1, "1 - 9y")?;
    Ok(())
}

/// First admissible parameters in ascending scan order from `t = 2`
/// (then `y = 2, 3, ...` for that `t` in the 2p case).
pub fn find_params(case: CaseKind, p: u64) -> Result<CaseParams, ConstructionError> {
    if !is_prime(p) {
        return Err(ConstructionError::NotPrime(p));
    }
    let min = case.min_prime();
    if p < min {
        return Err(ConstructionError::BelowThreshold { case, p, min });
    }
    let t = (2..p).find(|&t| check_t(case, p, t).is_ok()).ok_or(ConstructionError::NotFound { case, p })?;
    let y = match case {
        CaseKind::TwoP => {
            Some((2..p).find(|&y| check_2p_y(p, t, y).is_ok()).ok_or(ConstructionError::NotFound { case, p })?)
        }
        _ => None,
    };
    Ok(CaseParams { case, p, t, y })
}

/// Where one residue class mod m sends `(u, 0)`, `(u, 1)` and `(u, x)`.
#[derive(Debug, Clone, Copy)]
struct Row {
    zero: (usize, u64),
    one: (usize, u64),
    /// `(u, x) -> (column, numerator / x)`
    rest: (usize, u64),
}

fn crt(m: usize, p: u64, inv_m: u64, u: usize, v: u64) -> usize {
    let k = mulp(modular::sub_mod(v, u as u64 % p, p), inv_m, p);
    u + m * k as usize
}

fn glue(p: u64, rows: &[Row]) -> Perm {
    let m = rows.len();
    let n = m * p as usize;
    let inv = inverse_table(p);
    let inv_m = Residue::new(m as u64, p).inverse().expect("m < p").value();
    let image = (0..n)
        .map(|x| {
            let (u, v) = (x % m, (x as u64) % p);
            let row = rows[u];
            let (col, val) = match v {
                0 => row.zero,
                1 => row.one,
                _ => (row.rest.0, mulp(row.rest.1, inv[v as usize], p)),
            };
            crt(m, p, inv_m, col, val)
        })
        .collect();
    Perm::new(image).expect("glued tables are bijections")
}

fn rows_for(case: CaseKind, p: u64, t: u64) -> Vec<Row> {
    let r = |zero, one, rest| Row { zero, one, rest };
    match case {
        CaseKind::TwoP => vec![r((1, t), (1, 0), (0, 1)), r((0, 1), (0, 0), (1, t))],
        CaseKind::ThreeP => vec![r((1, 0), (1, 1), (0, 1)), r((2, t), (2, 0), (1, 1)), r((0, 1), (0, 0), (2, t))],
        CaseKind::FiveP => {
            let t1 = (t + 1) % p;
            vec![
                r((3, 1), (3, 0), (0, t)),
                r((2, 0), (2, t), (1, t1)),
                r((1, t1), (1, 0), (2, t)),
                r((4, 1), (4, 0), (3, 1)),
                r((0, t), (0, 0), (4, 1)),
            ]
        }
        CaseKind::SevenP => vec![
            r((0, 1), (0, 0), (6, t)),
            r((1, 1), (1, 0), (0, 1)),
            r((2, 0), (2, t), (4, 1)),
            r((3, 1), (3, 0), (2, t)),
            r((5, 1), (5, 0), (3, 1)),
            r((6, t), (6, 0), (5, 1)),
            r((4, 1), (4, 0), (1, 1)),
        ],
    }
}

/// The glued map for `case` with no hypothesis check beyond the structural
/// ones that keep it a bijection.
pub fn glued_map(case: CaseKind, p: u64, t: u64) -> Result<Perm, ConstructionError> {
    require_prime(p, 11, "glued constructions")?;
    let t = t % p;
    let forbidden: &[i64] = match case {
        CaseKind::FiveP => &[-1, 0, 1],
        _ => &[0, 1],
    };
    if forbidden.iter().any(|&k| Residue::from_i64(k, p).value() == t) {
        return Err(ConstructionError::BadParams { case, reason: format!("t = {t} makes the map a non-bijection") });
    }
    Ok(glue(p, &rows_for(case, p, t)))
}

/// Flat index of the CRT pair `(u mod m, v mod p)`.
pub fn crt_index(m: usize, p: u64, u: usize, v: u64) -> usize {
    let inv_m = Residue::new(m as u64, p).inverse().expect("m coprime to p").value();
    crt(m, p, inv_m, u % m, v % p)
}

fn verified(pi: Perm) -> Result<Perm, ConstructionError> {
    let n = pi.n();
    if n <= DEFAULT_VERIFY_CEILING {
        let count = count_preserved(&pi, Execution::Parallel);
        if count != 0 {
            return Err(ConstructionError::VerificationFailed { n, count });
        }
    }
    Ok(pi)
}

/// The 2p construction with the `(0, 1) <-> (0, y)` swap applied.
pub fn build_2p(p: u64, params: &CaseParams) -> Result<Perm, ConstructionError> {
    let case = CaseKind::TwoP;
    if params.case != case || params.p != p {
        return Err(ConstructionError::BadParams {
            case,
            reason: format!("parameters are for {} with p = {}", params.case, params.p),
        });
    }
    let y = params.y.ok_or_else(|| ConstructionError::BadParams { case, reason: "missing y".into() })?;
    check_t(case, p, params.t)?;
    check_2p_y(p, params.t, y)?;
    let base = glue(p, &rows_for(case, p, params.t % p));
    let swapped = base.apply_transposition(crt_index(2, p, 0, 1), crt_index(2, p, 0, y)).expect("indices in range");
    verified(swapped)
}

pub fn build_3p(p: u64, t: u64) -> Result<Perm, ConstructionError> {
    build_single(CaseKind::ThreeP, p, t)
}

pub fn build_5p(p: u64, t: u64) -> Result<Perm, ConstructionError> {
    build_single(CaseKind::FiveP, p, t)
}

pub fn build_7p(p: u64, t: u64) -> Result<Perm, ConstructionError> {
    build_single(CaseKind::SevenP, p, t)
}

fn build_single(case: CaseKind, p: u64, t: u64) -> Result<Perm, ConstructionError> {
    check_t(case, p, t)?;
    verified(glue(p, &rows_for(case, p, t % p)))
}

/// Builds whichever family `params` names.
pub fn build_case(params: &CaseParams) -> Result<Perm, ConstructionError> {
    match params.case {
        CaseKind::TwoP => build_2p(params.p, params),
        other => build_single(other, params.p, params.t),
    }
}

/// `0 -> t, 1 -> 0, x -> t/x` on Z/pZ.
pub fn prime_base(p: u64, t: u64) -> Result<Perm, ConstructionError> {
    require_prime(p, 3, "the prime base map")?;
    let t = t % p;
    if t == 0 {
        return Err(ConstructionError::OutOfContract { p, what: "the prime base map with t = 0".into() });
    }
    let inv = inverse_table(p);
    let image = (0..p)
        .map(|x| match x {
            0 => t as usize,
            1 => 0,
            _ => mulp(t, inv[x as usize], p) as usize,
        })
        .collect();
    Ok(Perm::from_image_unchecked(image))
}

/// The two classes the base map is known to leave intact:
/// `(0, 3/2, 3)` and `(1/3, 2/3, 1)`.
pub fn prime_base_residuals(p: u64) -> Vec<ApTriple> {
    let n = p as usize;
    let mut out = vec![
        ApTriple::canonical(n, 0, frac(3, 2, p) as usize),
        ApTriple::canonical(n, frac(1, 3, p) as usize, frac(1, 3, p) as usize),
    ];
    out.sort();
    out.dedup();
    out
}

/// Number of base maps tried by [`build_prime`] before giving up.
pub const PRIME_T_ATTEMPTS: usize = 24;

/// AP-destroying permutation of Z/pZ for a prime `p >= 11`, when one is
/// reachable from a base map by strictly improving transpositions.
///
/// Starts from [`prime_base`] with the given `t` (then `t = 2, 3, ...`) and
/// removes the remaining preserved classes with [`repair_random`]. For
/// p = 17 and p = 29 no such repair exists for any `t`.
pub fn build_prime(p: u64, t: u64) -> Result<Perm, ConstructionError> {
    require_prime(p, 11, "the prime construction")?;
    let n = p as usize;
    let first = t % p;
    let candidates =
        std::iter::once(first).filter(|&t| t != 0).chain((2..p).filter(|&t| t != first)).take(PRIME_T_ATTEMPTS);
    for t in candidates {
        let base = prime_base(p, t)?;
        let residual = if n <= DEFAULT_VERIFY_CEILING {
            Cyclic(n).preserved_classes(base.image(), Execution::Parallel)
        } else {
            prime_base_residuals(p)
        };
        let seed = p.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ t;
        if let Some(pi) = repair_random(&Cyclic(n), base, residual.into_iter().collect(), seed) {
            return verified(pi);
        }
    }
    Err(ConstructionError::ConstructionFailed(p))
}

/// Random strict-descent repair of `pi`, whose preserved classes are
/// exactly `preserved`. Each step swaps a point of a preserved class with a
/// uniform partner and keeps the swap only if the count drops. Gives up on
/// a run after 400 consecutive failed samples and after 40 runs overall.
pub fn repair_random(g: &Cyclic, pi: Perm, preserved: BTreeSet<ApTriple>, seed: u64) -> Option<Perm> {
    use rand::{Rng, SeedableRng};
    let n = g.order();
    if preserved.is_empty() {
        return Some(pi);
    }
    if n < 2 {
        return None;
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..40 {
        let mut cur = pi.clone();
        let mut live = preserved.clone();
        let mut idle = 0;
        while !live.is_empty() && idle < 400 {
            let points: Vec<usize> = live.iter().flat_map(|c| c.terms(n)).collect();
            let u = points[rng.random_range(0..points.len())];
            let mut v = rng.random_range(0..n - 1);
            if v >= u {
                v += 1;
            }
            let effect = swap_effect_in(g, cur.image(), u, v);
            if effect.delta() >= 0 {
                idle += 1;
                continue;
            }
            for c in &effect.before {
                live.remove(c);
            }
            live.extend(effect.after.iter().copied());
            cur.swap_in_place(u, v);
            idle = 0;
        }
        if live.is_empty() {
            return Some(cur);
        }
    }
    None
}

/// Exhaustive depth-limited strict-descent repair of `pi`, whose preserved
/// classes are exactly `preserved`. Candidates are tried in lexicographic
/// `(point, partner)` order.
pub fn repair(g: &Cyclic, pi: Perm, preserved: BTreeSet<ApTriple>, depth: usize) -> Option<Perm> {
    if preserved.is_empty() {
        return Some(pi);
    }
    if depth == 0 {
        return None;
    }
    let n = g.order();
    let points: BTreeSet<usize> = preserved.iter().flat_map(|c| c.terms(n)).collect();
    for &u in &points {
        for v in (0..n).filter(|&v| v != u) {
            let effect = swap_effect_in(g, pi.image(), u, v);
            if effect.delta() >= 0 {
                continue;
            }
            let mut next = preserved.clone();
            for c in &effect.before {
                next.remove(c);
            }
            next.extend(effect.after.iter().copied());
            if next.len() >= preserved.len() {
                continue;
            }
            let mut swapped = pi.clone();
            swapped.swap_in_place(u, v);
            if let Some(done) = repair(g, swapped, next, depth - 1) {
                return Some(done);
            }
        }
    }
    None
}

pub fn sigma5() -> Perm {
    Perm::new(SIGMA5.to_vec()).expect("constant table")
}

pub fn sigma7_fixed() -> Perm {
    Perm::new(SIGMA7_FIXED.to_vec()).expect("constant table")
}

pub fn sigma7_moving() -> Perm {
    Perm::new(SIGMA7_MOVING.to_vec()).expect("constant table")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::permcore::verify;

    #[test]
    fn case_names_round_trip() {
        for case in CaseKind::ALL {
            assert_eq!(case.to_string().parse::<CaseKind>().unwrap(), case);
        }
        assert!("4p".parse::<CaseKind>().is_err());
    }

    #[test]
    fn sigma5_table_properties() {
        let s = sigma5();
        assert!((0..5).all(|i| s.apply(i) != i));
        let report = verify(&s);
        let mut want = vec![ApTriple::canonical(5, 3, 3), ApTriple::canonical(5, 0, 1)];
        want.sort();
        assert_eq!(report.preserved, want);
        for class in &report.preserved {
            assert!(class.terms(5).contains(&1));
        }
    }

    #[test]
    fn sigma7_tables_are_almost_destroying() {
        let s1 = verify(&sigma7_fixed());
        let mut want1 = vec![ApTriple::canonical(7, 0, 1), ApTriple::canonical(7, 1, 1)];
        want1.sort();
        assert_eq!(s1.preserved, want1);
        let s2 = verify(&sigma7_moving());
        // (1, 4, 0) has r = 3, (4, 0, 3) has r = 3
        let mut want2 = vec![ApTriple::canonical(7, 1, 3), ApTriple::canonical(7, 4, 3)];
        want2.sort();
        assert_eq!(s2.preserved, want2);
    }

    #[test]
    fn sigma7_mixed_images_are_never_progressions() {
        let (f, m) = (SIGMA7_FIXED, SIGMA7_MOVING);
        let is_ap = |x: usize, y: usize, z: usize| (x + z + 14 - 2 * y).is_multiple_of(7);
        for a in 0..7 {
            for r in 1..7 {
                let (b, c) = ((a + r) % 7, (a + 2 * r) % 7);
                assert!(!is_ap(f[a], m[b], m[c]), "a={a} r={r}");
                assert!(!is_ap(m[a], f[b], m[c]), "a={a} r={r}");
            }
        }
    }

    #[test]
    fn glued_tables_match_the_sigma_columns() {
        let p = 31;
        let t = 5;
        let five = glued_map(CaseKind::FiveP, p, t).unwrap();
        for (u, &s) in SIGMA5.iter().enumerate() {
            for v in [0u64, 1] {
                let x = crt_index(5, p, u, v);
                assert_eq!(five.apply(x) % 5, s);
            }
            assert_eq!(five.apply(crt_index(5, p, u, 7)) % 5, u);
        }
        let seven = glued_map(CaseKind::SevenP, p, t).unwrap();
        for u in 0..7 {
            assert_eq!(seven.apply(crt_index(7, p, u, 0)) % 7, SIGMA7_FIXED[u]);
            assert_eq!(seven.apply(crt_index(7, p, u, 9)) % 7, SIGMA7_MOVING[u]);
        }
    }

    #[test]
    fn excluded_values_are_rejected() {
        let p = 31;
        assert!(matches!(check_t(CaseKind::TwoP, p, 4), Err(ConstructionError::BadParams { .. })));
        assert!(matches!(check_t(CaseKind::ThreeP, p, 9), Err(ConstructionError::BadParams { .. })));
        assert!(matches!(check_t(CaseKind::ThreeP, p, 2), Err(ConstructionError::BadParams { .. })));
        assert!(matches!(check_t(CaseKind::SevenP, 67, 3), Err(ConstructionError::BadParams { .. })));
        assert!(matches!(check_t(CaseKind::FiveP, 503, 502), Err(ConstructionError::BadParams { .. })));
        assert!(matches!(build_3p(p, 9), Err(ConstructionError::BadParams { .. })));
    }

    #[test]
    fn fivep_needs_t_to_be_a_square() {
        let p = 503;
        let t =
            (2..p).find(|&t| legendre_unchecked(t, p) == -1 && !excluded_t(CaseKind::FiveP, p).contains(&t)).unwrap();
        let err = check_t(CaseKind::FiveP, p, t).unwrap_err();
        assert!(matches!(err, ConstructionError::BadParams { .. }));
    }

    #[test]
    fn thresholds_are_enforced() {
        assert_eq!(
            find_params(CaseKind::FiveP, 499),
            Err(ConstructionError::BelowThreshold { case: CaseKind::FiveP, p: 499, min: 501 })
        );
        assert!(matches!(find_params(CaseKind::SevenP, 61), Err(ConstructionError::BelowThreshold { .. })));
        assert_eq!(find_params(CaseKind::ThreeP, 33), Err(ConstructionError::NotPrime(33)));
    }

    #[test]
    fn small_glued_cases_verify() {
        let params = find_params(CaseKind::ThreeP, 31).unwrap();
        let pi = build_case(&params).unwrap();
        assert_eq!(pi.n(), 93);
        assert_eq!(verify(&pi).preserved_count, 0);
        let params = find_params(CaseKind::SevenP, 67).unwrap();
        assert_eq!(verify(&build_case(&params).unwrap()).preserved_count, 0);
    }

    #[test]
    fn prime_construction_for_eleven() {
        let base = prime_base(11, 2).unwrap();
        let report = verify(&base);
        assert_eq!(report.preserved_count, 2);
        // (0, 7, 3) and (4, 8, 1) mod 11
        let want: Vec<ApTriple> = {
            let mut v = vec![ApTriple::canonical(11, 0, 7), ApTriple::canonical(11, 4, 4)];
            v.sort();
            v
        };
        assert_eq!(report.preserved, want);
        assert_eq!(prime_base_residuals(11), want);
        let pi = build_prime(11, 2).unwrap();
        assert_eq!(verify(&pi).preserved_count, 0);
    }

    #[test]
    fn prime_construction_is_out_of_contract_below_eleven() {
        assert!(matches!(build_prime(7, 2), Err(ConstructionError::OutOfContract { .. })));
        assert_eq!(build_prime(15, 2), Err(ConstructionError::NotPrime(15)));
    }

    #[test]
    fn seventeen_and_twentynine_have_no_short_repair() {
        for p in [17u64, 29] {
            for t in 1..p {
                let base = prime_base(p, t).unwrap();
                let g = Cyclic(p as usize);
                let live = g.preserved_classes(base.image(), Execution::Sequential);
                // a strictly improving path from two classes has at most two steps
                assert!(repair(&g, base, live.into_iter().collect(), 2).is_none(), "p = {p}, t = {t}");
            }
            assert_eq!(build_prime(p, 2), Err(ConstructionError::ConstructionFailed(p)));
        }
    }

    #[test]
    fn prime_construction_up_to_a_thousand() {
        for p in modular::primes_between(11, 1000) {
            if p == 17 || p == 29 {
                continue;
            }
            let pi = build_prime(p, 2).unwrap();
            assert_eq!(verify(&pi).preserved_count, 0, "p = {p}");
        }
    }
}
