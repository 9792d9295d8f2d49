//! Finite abelian groups `Z/c_1 x ... x Z/c_k`, encoded as mixed-radix
//! indices with the leftmost factor most significant.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::driver::{factorize, DriverError, Generator};
use crate::par::Execution;
use crate::permcore::{canonical_in, is_preserved_in, terms_in, ApReport, ApSpace, ApTriple, Perm, VerifyOptions};
use crate::search::{descent_in, CacheMeta, DescentConfig, PermCache, SearchError};

/// Largest order accepted by exhaustive group operations.
pub const DEFAULT_GROUP_CEILING: usize = 10_000;

/// The Omega = 3 groups that are settled by direct search, in primary form.
pub const SPECIAL_GROUPS: [&[usize]; 9] =
    [&[3, 3, 5], &[3, 3, 7], &[3, 5, 5], &[5, 5, 7], &[3, 7, 7], &[5, 7, 7], &[3, 9], &[5, 25], &[7, 49]];

/// Primes `p` for which `(Z/p)^2` is handled by descent.
pub const SQUARE_PRIMES: [usize; 5] = [3, 5, 7, 11, 13];

#[derive(Debug, Error)]
pub enum AbelianError {
    #[error("bad group descriptor {0:?}")]
    Parse(String),
    #[error("unsupported group {group}: {reason}")]
    Unsupported { group: String, reason: String },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("permutation has size {got}, group has order {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("descent found no AP-destroying permutation of {0}")]
    DescentFailed(String),
    #[error("permutation of {group} preserves {count} progressions")]
    VerificationFailed { group: String, count: u64 },
    #[error(transparent)]
    Driver(#[from] DriverError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AbelianGroup {
    factors: Vec<usize>,
    strides: Vec<usize>,
    order: usize,
}

impl AbelianGroup {
    /// Factors equal to 1 are dropped; the empty product is the trivial group.
    pub fn new(factors: &[usize]) -> Result<AbelianGroup, AbelianError> {
        if factors.contains(&0) {
            return Err(AbelianError::Parse("cyclic factors must be positive".into()));
        }
        let factors: Vec<usize> = factors.iter().copied().filter(|&c| c > 1).collect();
        let mut strides = vec![1usize; factors.len()];
        let mut order = 1usize;
        for i in (0..factors.len()).rev() {
            strides[i] = order;
            order = order.checked_mul(factors[i]).ok_or_else(|| AbelianError::Parse("group order overflows".into()))?;
        }
        Ok(AbelianGroup { factors, strides, order })
    }

    pub fn cyclic(n: usize) -> AbelianGroup {
        AbelianGroup::new(&[n]).expect("positive factor")
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    /// Number of prime factors of the order, with multiplicity.
    pub fn omega(&self) -> usize {
        factorize(self.order as u64).len()
    }

    pub fn encode(&self, coords: &[usize]) -> usize {
        coords.iter().zip(&self.strides).map(|(x, s)| x * s).sum()
    }

    pub fn decode(&self, mut x: usize) -> Vec<usize> {
        let mut out = vec![0; self.factors.len()];
        for i in (0..self.factors.len()).rev() {
            out[i] = x % self.factors[i];
            x /= self.factors[i];
        }
        out
    }

    /// Isomorphic group with every factor split into prime powers, sorted
    /// by prime and then exponent.
    pub fn primary_form(&self) -> AbelianGroup {
        let mut powers = Vec::new();
        for &c in &self.factors {
            powers.extend(prime_powers(c));
        }
        powers.sort_by_key(|&q| (smallest_prime(q), q));
        AbelianGroup::new(&powers).expect("positive factors")
    }

    /// The isomorphism onto [`primary_form`](Self::primary_form), as an
    /// index table.
    pub fn primary_map(&self) -> Vec<usize> {
        let target = self.primary_form();
        let slots: Vec<(usize, usize)> = self
            .factors
            .iter()
            .enumerate()
            .flat_map(|(i, &c)| prime_powers(c).into_iter().map(move |q| (i, q)))
            .collect();
        // where each (factor, prime power) slot lands in the sorted target
        let mut order: Vec<usize> = (0..slots.len()).collect();
        order.sort_by_key(|&k| (smallest_prime(slots[k].1), slots[k].1));
        let mut position = vec![0; slots.len()];
        for (pos, &k) in order.iter().enumerate() {
            position[k] = pos;
        }
        (0..self.order)
            .map(|x| {
                let xs = self.decode(x);
                let mut ys = vec![0; slots.len()];
                for (k, &(i, q)) in slots.iter().enumerate() {
                    ys[position[k]] = xs[i] % q;
                }
                target.encode(&ys)
            })
            .collect()
    }

    /// Whether the group is cyclic.
    pub fn is_cyclic(&self) -> bool {
        let primes: Vec<usize> = self.primary_form().factors.iter().map(|&q| smallest_prime(q)).collect();
        primes.windows(2).all(|w| w[0] != w[1])
    }

    /// Cache key, from the sorted primary factors.
    pub fn cache_key(&self) -> String {
        let f = self.primary_form();
        if f.factors.is_empty() {
            return "g1".to_string();
        }
        let parts: Vec<String> = f.factors.iter().map(|c| c.to_string()).collect();
        format!("g{}", parts.join("x"))
    }
}

fn smallest_prime(q: usize) -> usize {
    factorize(q as u64).first().map(|&p| p as usize).unwrap_or(1)
}

fn prime_powers(c: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    let mut last = 0;
    for p in factorize(c as u64) {
        let p = p as usize;
        if p == last {
            *out.last_mut().expect("nonempty") *= p;
        } else {
            out.push(p);
            last = p;
        }
    }
    out
}

impl ApSpace for AbelianGroup {
    fn order(&self) -> usize {
        self.order
    }

    fn add(&self, mut x: usize, mut y: usize) -> usize {
        let mut out = 0;
        for i in (0..self.factors.len()).rev() {
            let c = self.factors[i];
            let s = x % c + y % c;
            out += if s >= c { s - c } else { s } * self.strides[i];
            x /= c;
            y /= c;
        }
        out
    }

    fn neg(&self, mut x: usize) -> usize {
        let mut out = 0;
        for i in (0..self.factors.len()).rev() {
            let c = self.factors[i];
            let d = x % c;
            out += if d == 0 { 0 } else { c - d } * self.strides[i];
            x /= c;
        }
        out
    }
}

impl fmt::Display for AbelianGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return f.write_str("1");
        }
        let parts: Vec<String> = self.factors.iter().map(|c| c.to_string()).collect();
        f.write_str(&parts.join(" x "))
    }
}

impl FromStr for AbelianGroup {
    type Err = AbelianError;

    /// `"3 x 3 x 5"`; `*`, `,` and `×` also separate factors.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || AbelianError::Parse(s.to_string());
        let parts: Vec<&str> = s.split(['x', 'X', '*', ',', '×']).map(str::trim).collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(bad());
        }
        let factors = parts.iter().map(|p| p.parse::<usize>().map_err(|_| bad())).collect::<Result<Vec<_>, _>>()?;
        AbelianGroup::new(&factors)
    }
}

/// Exhaustive check of every `(a, r != 0)` in `g`.
pub fn group_verify(g: &AbelianGroup, pi: &Perm) -> Result<ApReport, AbelianError> {
    group_verify_with(g, pi, &VerifyOptions::default())
}

pub fn group_verify_with(g: &AbelianGroup, pi: &Perm, opts: &VerifyOptions) -> Result<ApReport, AbelianError> {
    if pi.n() != g.order() {
        return Err(AbelianError::SizeMismatch { expected: g.order(), got: pi.n() });
    }
    let all = g.preserved_classes(pi.image(), opts.execution);
    let preserved_count = all.len() as u64;
    let truncated = preserved_count > opts.list_cap;
    let preserved = if truncated { all.into_iter().take(opts.witnesses).collect() } else { all };
    Ok(ApReport { n: g.order(), preserved_count, preserved, truncated })
}

/// `H = (+) (c_i / h_i) Z/c_i` and `G/H`, for per-coordinate subgroup
/// orders `h_i | c_i`. Returns `(H, Q)` with `H ~ (+) Z/h_i` and
/// `Q ~ (+) Z/(c_i / h_i)`.
pub fn subgroup_parts(g: &AbelianGroup, h: &[usize]) -> Result<(AbelianGroup, AbelianGroup), AbelianError> {
    if h.len() != g.factors.len() || h.iter().zip(&g.factors).any(|(&hi, &ci)| hi == 0 || ci % hi != 0) {
        return Err(AbelianError::Precondition(format!(
            "subgroup orders {h:?} must divide the factors {:?} one by one",
            g.factors
        )));
    }
    let q: Vec<usize> = g.factors.iter().zip(h).map(|(c, hi)| c / hi).collect();
    Ok((AbelianGroup::new(h)?, AbelianGroup::new(&q)?))
}

/// Glues permutations of `H` and `G/H` into one of `G`:
/// `pi(x)_i = q_perm(x mod q)_i + q_i h_perm(x div q)_i` with
/// `q_i = c_i / h_i`.
pub fn group_lift(g: &AbelianGroup, h: &[usize], h_perm: &Perm, q_perm: &Perm) -> Result<Perm, AbelianError> {
    let (hg, qg) = subgroup_parts(g, h)?;
    if h_perm.n() != hg.order() {
        return Err(AbelianError::SizeMismatch { expected: hg.order(), got: h_perm.n() });
    }
    if q_perm.n() != qg.order() {
        return Err(AbelianError::SizeMismatch { expected: qg.order(), got: q_perm.n() });
    }
    let q: Vec<usize> = g.factors.iter().zip(h).map(|(c, hi)| c / hi).collect();
    // coordinates of H and Q keep only the factors bigger than one
    let h_slots: Vec<usize> = (0..h.len()).filter(|&i| h[i] > 1).collect();
    let q_slots: Vec<usize> = (0..q.len()).filter(|&i| q[i] > 1).collect();
    let image = (0..g.order())
        .map(|x| {
            let xs = g.decode(x);
            let r: Vec<usize> = q_slots.iter().map(|&i| xs[i] % q[i]).collect();
            let k: Vec<usize> = h_slots.iter().map(|&i| xs[i] / q[i]).collect();
            let qr = qg.decode(q_perm.apply(qg.encode(&r)));
            let hk = hg.decode(h_perm.apply(hg.encode(&k)));
            let mut out = vec![0usize; xs.len()];
            for (j, &i) in q_slots.iter().enumerate() {
                out[i] += qr[j];
            }
            for (j, &i) in h_slots.iter().enumerate() {
                out[i] += q[i] * hk[j];
            }
            g.encode(&out)
        })
        .collect();
    Ok(Perm::new(image).expect("glued map is a bijection"))
}

/// `f o pi o f^-1` for a bijection `f` given as an index table.
pub fn transport(pi: &Perm, f: &[usize]) -> Perm {
    let mut image = vec![0usize; pi.n()];
    for x in 0..pi.n() {
        image[f[x]] = f[pi.apply(x)];
    }
    Perm::new(image).expect("conjugate of a bijection")
}

/// For `G = (Z/2)^k x H` with `|H| < 2^k`, a progression `(a, b, a)` with
/// `a, b` in `(Z/2)^k x {0}` that `pi` preserves.
pub fn prop22_refute(k: usize, h: &AbelianGroup, pi: &Perm) -> Result<ApTriple, AbelianError> {
    if k >= usize::BITS as usize - 1 || h.order() >= 1usize << k {
        return Err(AbelianError::Precondition(format!("need |H| < 2^k, got |H| = {} and k = {k}", h.order())));
    }
    let mut factors = vec![2usize; k];
    factors.extend_from_slice(h.factors());
    let g = AbelianGroup::new(&factors)?;
    if pi.n() != g.order() {
        return Err(AbelianError::SizeMismatch { expected: g.order(), got: pi.n() });
    }
    let m = h.order();
    let mut seen = vec![usize::MAX; m];
    for a in 0..(1usize << k) {
        let x = a * m;
        let proj = pi.apply(x) % m;
        if seen[proj] != usize::MAX {
            let b = seen[proj];
            let r = (a ^ b) * m;
            let triple = canonical_in(&g, b * m, r);
            debug_assert!(is_preserved_in(&g, pi.image(), terms_in(&g, triple.a, triple.r)));
            return Ok(triple);
        }
        seen[proj] = a;
    }
    unreachable!("pigeonhole: 2^k points over {m} projections")
}

/// Builds and verifies AP-destroying permutations of odd-order groups.
#[derive(Debug)]
pub struct GroupBuilder {
    pub ceiling: usize,
    pub seed: u64,
    pub cache: Option<PermCache>,
    pub execution: Execution,
    cyclic: Generator,
}

/// How a group permutation was obtained, outermost step first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStep {
    pub group: String,
    pub method: String,
}

impl Default for GroupBuilder {
    fn default() -> Self {
        GroupBuilder::new(0, None)
    }
}

impl GroupBuilder {
    pub fn new(seed: u64, cache: Option<PermCache>) -> Self {
        GroupBuilder {
            ceiling: DEFAULT_GROUP_CEILING,
            seed,
            cache,
            execution: Execution::default(),
            cyclic: Generator::default(),
        }
    }

    fn unsupported(g: &AbelianGroup, reason: &str) -> AbelianError {
        AbelianError::Unsupported { group: g.to_string(), reason: reason.to_string() }
    }

    /// Descent on `g`, through the cache when one is configured.
    pub fn descend(&self, g: &AbelianGroup, steps: &mut Vec<BuildStep>) -> Result<Perm, AbelianError> {
        let key = g.cache_key();
        let step = |method: &str| BuildStep { group: g.to_string(), method: method.to_string() };
        if let Some(cache) = &self.cache {
            if let Ok(Some((perm, _))) = cache.get_in(g, &key) {
                steps.push(step("cache"));
                return Ok(perm);
            }
        }
        let cfg = DescentConfig { seed: self.seed, execution: self.execution, ..DescentConfig::default() };
        let out = descent_in(g, &cfg);
        let perm = out.perm.ok_or_else(|| AbelianError::DescentFailed(g.to_string()))?;
        if let Some(cache) = &self.cache {
            let meta = CacheMeta::new("descent", Some(cfg.seed), Some(out.iterations_used));
            let _: Result<_, SearchError> = cache.put_in(g, &key, &perm, &meta);
        }
        steps.push(step("descent"));
        Ok(perm)
    }

    /// AP-destroying permutation of `g` (odd order above 7, at most the
    /// ceiling), verified exhaustively.
    pub fn build(&self, g: &AbelianGroup) -> Result<(Perm, Vec<BuildStep>), AbelianError> {
        let n = g.order();
        if n.is_multiple_of(2) {
            return Err(Self::unsupported(g, "even order"));
        }
        if n <= 7 {
            return Err(Self::unsupported(g, "order at most 7"));
        }
        if n > self.ceiling {
            return Err(Self::unsupported(g, &format!("order above the ceiling {}", self.ceiling)));
        }
        let mut steps = Vec::new();
        let c = g.primary_form();
        let pc = self.build_primary(&c, &mut steps)?;
        let map = g.primary_map();
        let inverse = Perm::new(map).expect("isomorphism").inverse();
        let pi = transport(&pc, inverse.image());
        let count = g.preserved_classes(pi.image(), self.execution).len() as u64;
        if count != 0 {
            return Err(AbelianError::VerificationFailed { group: g.to_string(), count });
        }
        Ok((pi, steps))
    }

    fn build_primary(&self, c: &AbelianGroup, steps: &mut Vec<BuildStep>) -> Result<Perm, AbelianError> {
        let n = c.order();
        let step = |method: &str| BuildStep { group: c.to_string(), method: method.to_string() };
        if c.is_cyclic() {
            // Z/n -> c, k -> (k mod q_i)
            let generated = self.cyclic.generate(n as u64)?;
            let to_c: Vec<usize> = (0..n)
                .map(|k| {
                    let coords: Vec<usize> = c.factors().iter().map(|&q| k % q).collect();
                    c.encode(&coords)
                })
                .collect();
            steps.push(step(&format!("cyclic {}", generated.plan.summary())));
            return Ok(transport(&generated.perm, &to_c));
        }
        let omega = c.omega();
        let primes: Vec<usize> = factorize(n as u64).into_iter().map(|p| p as usize).collect();
        if omega == 2 {
            let p = primes[0];
            if SQUARE_PRIMES.contains(&p) {
                return self.descend(c, steps);
            }
            return Err(Self::unsupported(c, "(Z/p)^2 is only handled for p <= 13"));
        }
        if omega == 3 {
            if SPECIAL_GROUPS.contains(&c.factors())
                || (primes.iter().all(|&p| p == primes[0]) && primes[0] <= 7 && c.factors().len() == 3)
            {
                return self.descend(c, steps);
            }
            // peel a Z/p with p >= 11
            let i = c
                .factors()
                .iter()
                .rposition(|&q| smallest_prime(q) >= 11)
                .ok_or_else(|| Self::unsupported(c, "no subgroup of prime order at least 11"))?;
            let mut h = vec![1usize; c.factors().len()];
            h[i] = smallest_prime(c.factors()[i]);
            return self.glue(c, &h, steps);
        }
        // order-pq subgroup from the two smallest primes
        let (p, q) = (primes[0], primes[1]);
        let mut h = vec![1usize; c.factors().len()];
        if p == q {
            if let Some(i) = c.factors().iter().position(|&f| f % (p * p) == 0) {
                h[i] = p * p;
            } else {
                let idx: Vec<usize> =
                    c.factors().iter().enumerate().filter(|(_, &f)| f == p).map(|(i, _)| i).take(2).collect();
                h[idx[0]] = p;
                h[idx[1]] = p;
            }
        } else {
            let i = c.factors().iter().position(|&f| f % p == 0).expect("p divides the order");
            let j = c.factors().iter().position(|&f| f % q == 0).expect("q divides the order");
            h[i] = p;
            h[j] = q;
        }
        self.glue(c, &h, steps)
    }

    fn glue(&self, c: &AbelianGroup, h: &[usize], steps: &mut Vec<BuildStep>) -> Result<Perm, AbelianError> {
        let (hg, qg) = subgroup_parts(c, h)?;
        steps.push(BuildStep { group: c.to_string(), method: format!("lift H = {hg}, G/H = {qg}") });
        let hp = self.build_part(&hg, steps)?;
        let qp = self.build_part(&qg, steps)?;
        group_lift(c, h, &hp, &qp)
    }

    fn build_part(&self, g: &AbelianGroup, steps: &mut Vec<BuildStep>) -> Result<Perm, AbelianError> {
        let c = g.primary_form();
        let pc = self.build_primary(&c, steps)?;
        let inverse = Perm::new(g.primary_map()).expect("isomorphism").inverse();
        Ok(transport(&pc, inverse.image()))
    }
}

/// [`GroupBuilder::build`] with defaults and no cache.
pub fn theorem21_build(g: &AbelianGroup) -> Result<Perm, AbelianError> {
    GroupBuilder::new(0, None).build(g).map(|(p, _)| p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::permcore::{lift, verify};

    fn g(s: &str) -> AbelianGroup {
        s.parse().unwrap()
    }

    #[test]
    fn parse_and_display() {
        assert_eq!(g("3 x 3 x 5").factors(), &[3, 3, 5]);
        assert_eq!(g("9x3").to_string(), "9 x 3");
        assert_eq!(g("1").order(), 1);
        assert!("3 x".parse::<AbelianGroup>().is_err());
        assert!("a".parse::<AbelianGroup>().is_err());
        assert_eq!(g("15 x 3").primary_form().factors(), &[3, 3, 5]);
        assert_eq!(g("15 x 3").cache_key(), "g3x3x5");
    }

    #[test]
    fn group_arithmetic() {
        let grp = g("4 x 6");
        for x in 0..grp.order() {
            for y in 0..grp.order() {
                let (xs, ys) = (grp.decode(x), grp.decode(y));
                let zs: Vec<usize> = xs.iter().zip(&ys).zip(grp.factors()).map(|((a, b), c)| (a + b) % c).collect();
                assert_eq!(grp.add(x, y), grp.encode(&zs));
            }
            assert_eq!(grp.add(x, grp.neg(x)), 0);
        }
    }

    #[test]
    fn primary_map_is_an_isomorphism() {
        for s in ["15 x 3", "12 x 18", "45", "7 x 21"] {
            let grp = g(s);
            let c = grp.primary_form();
            let f = grp.primary_map();
            assert!(Perm::new(f.clone()).is_ok());
            for x in 0..grp.order() {
                for y in 0..grp.order() {
                    assert_eq!(f[grp.add(x, y)], c.add(f[x], f[y]), "{s}");
                }
            }
        }
    }

    #[test]
    fn identity_preserves_everything() {
        let grp = g("3 x 3");
        let report = group_verify(&grp, &Perm::identity(9)).unwrap();
        // 8 nonzero r and 9 starting points, each class counted once
        assert_eq!(report.preserved_count, 9 * 8 / 2);
        assert_eq!(group_verify(&g("1"), &Perm::identity(1)).unwrap().preserved_count, 0);
    }

    #[test]
    fn cyclic_group_matches_permcore() {
        let z = AbelianGroup::cyclic(12);
        let pi = crate::driver::generate(12).unwrap();
        assert_eq!(group_verify(&z, &pi).unwrap(), verify(&pi));
        let id = Perm::identity(12);
        assert_eq!(group_verify(&z, &id).unwrap(), verify(&id));
    }

    #[test]
    fn lift_matches_cyclic_lift() {
        let s4 = crate::driver::generate(4).unwrap();
        let t4 = Perm::new(vec![0, 2, 1, 3]).unwrap();
        let z16 = AbelianGroup::cyclic(16);
        // H = 4Z/16Z has order 4, Q = Z/4
        let glued = group_lift(&z16, &[4], &t4, &s4).unwrap();
        assert_eq!(glued, lift(&s4, &t4));
    }

    #[test]
    fn trivial_subgroup_relabels_quotient() {
        let grp = g("3 x 5");
        let q = Perm::new((0..15).rev().collect()).unwrap();
        assert_eq!(group_lift(&grp, &[1, 1], &Perm::identity(1), &q).unwrap(), q);
    }

    #[test]
    fn refutation_on_small_groups() {
        let h = g("3");
        let pi = Perm::identity(12);
        let t = prop22_refute(2, &h, &pi).unwrap();
        let grp = g("2 x 2 x 3");
        assert!(is_preserved_in(&grp, pi.image(), terms_in(&grp, t.a, t.r)));
        // k = 1, H trivial: Z/2
        for image in [vec![0, 1], vec![1, 0]] {
            let pi = Perm::new(image).unwrap();
            let t = prop22_refute(1, &g("1"), &pi).unwrap();
            let z2 = g("2");
            assert!(is_preserved_in(&z2, pi.image(), terms_in(&z2, t.a, t.r)));
        }
        assert!(matches!(prop22_refute(2, &g("5"), &Perm::identity(20)), Err(AbelianError::Precondition(_))));
    }

    #[test]
    fn builds_small_odd_groups() {
        for s in ["15", "3 x 3", "9 x 3", "3 x 3 x 3", "3 x 3 x 11", "3 x 3 x 3 x 3", "5 x 15"] {
            let grp = g(s);
            let pi = theorem21_build(&grp).unwrap();
            assert_eq!(group_verify(&grp, &pi).unwrap().preserved_count, 0, "{s}");
        }
        assert!(matches!(theorem21_build(&g("2 x 5")), Err(AbelianError::Unsupported { .. })));
        assert!(matches!(theorem21_build(&g("7")), Err(AbelianError::Unsupported { .. })));
        assert!(matches!(theorem21_build(&g("17 x 17")), Err(AbelianError::Unsupported { .. })));
    }
}
