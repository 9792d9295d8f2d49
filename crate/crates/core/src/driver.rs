//! End-to-end generation for Z/nZ.
//!
//! `n = s * prod p_i^{b_i}` with `s` the {2, 3, 5, 7}-smooth part. If `s` is
//! not itself one of 2, 3, 5, 7 it is split into products of two or three
//! small primes, each found by descent. Otherwise `s` is attached to the
//! smallest large prime as an `sp` leaf. Every remaining prime factor
//! `p >= 11` is a prime-construction leaf, and the leaves are folded left
//! with [`lift`].

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constructions::{build_case, build_prime, find_params, CaseKind, CaseParams, ConstructionError};
use crate::modular::{gcd, is_prime, mul_mod};
use crate::par::{self, Execution};
use crate::permcore::{count_preserved, lift, Perm, DEFAULT_VERIFY_CEILING};
use crate::search::{descent, CacheMeta, DescentConfig, PermCache};

/// Default largest `n` that [`Generator::generate`] will construct.
pub const DEFAULT_SIZE_CEILING: u64 = 1_000_000;
/// Leaves up to this size may fall back to descent.
pub const DESCENT_LEAF_LIMIT: u64 = 2500;

const SMALL_PRIMES: [u64; 4] = [2, 3, 5, 7];

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("Z/{0}Z has no AP-destroying permutation (n = 2, 3, 5, 7 are the exceptions)")]
    Unsupported(u64),
    #[error("n must be positive")]
    Zero,
    #[error("n = {n} exceeds the size ceiling {ceiling}")]
    TooLarge { n: u64, ceiling: u64 },
    #[error(transparent)]
    Construction(#[from] ConstructionError),
    #[error("descent found no AP-destroying permutation of Z/{0}Z")]
    DescentFailed(u64),
    #[error("generated permutation of Z/{n}Z preserves {count} progressions")]
    VerificationFailed { n: u64, count: u64 },
}

/// How a leaf of the plan is constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    PrimeConstruction,
    #[serde(rename = "case_2p")]
    Case2p,
    #[serde(rename = "case_3p")]
    Case3p,
    #[serde(rename = "case_5p")]
    Case5p,
    #[serde(rename = "case_7p")]
    Case7p,
    Descent,
    Cache,
}

impl Method {
    fn for_case(case: CaseKind) -> Method {
        match case {
            CaseKind::TwoP => Method::Case2p,
            CaseKind::ThreeP => Method::Case3p,
            CaseKind::FiveP => Method::Case5p,
            CaseKind::SevenP => Method::Case7p,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::PrimeConstruction => "prime_construction",
            Method::Case2p => "case_2p",
            Method::Case3p => "case_3p",
            Method::Case5p => "case_5p",
            Method::Case7p => "case_7p",
            Method::Descent => "descent",
            Method::Cache => "cache",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Leaf {
    pub modulus: u64,
    pub method: Method,
    /// Parameters for the glued cases.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<CaseParams>,
}

/// Leaves of `n` in fold order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorPlan {
    pub n: u64,
    pub leaves: Vec<Leaf>,
}

impl FactorPlan {
    pub fn product(&self) -> u64 {
        self.leaves.iter().map(|l| l.modulus).product()
    }

    /// `12:descent * 22:descent`, or `1:trivial` for the empty plan.
    pub fn summary(&self) -> String {
        if self.leaves.is_empty() {
            return "1:trivial".to_string();
        }
        self.leaves.iter().map(|l| format!("{}:{}", l.modulus, l.method)).collect::<Vec<_>>().join(" * ")
    }
}

fn pollard_rho(n: u64) -> u64 {
    if n.is_multiple_of(2) {
        return 2;
    }
    let mut c = 1u64;
    loop {
        let f = |x: u64| (mul_mod(x, x, n) + c) % n;
        let (mut x, mut y, mut d) = (2u64, 2u64, 1u64);
        while d == 1 {
            x = f(x);
            y = f(f(y));
            d = gcd(x.abs_diff(y), n);
        }
        if d != n {
            return d;
        }
        c += 1;
    }
}

fn factor_into(n: u64, out: &mut Vec<u64>) {
    if n == 1 {
        return;
    }
    if is_prime(n) {
        out.push(n);
        return;
    }
    let d = pollard_rho(n);
    factor_into(d, out);
    factor_into(n / d, out);
}

/// Prime factors of `n` with multiplicity, ascending.
pub fn factorize(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        while n.is_multiple_of(p) {
            out.push(p);
            n /= p;
        }
    }
    factor_into(n, &mut out);
    out.sort_unstable();
    out
}

/// Prime factorization as `prime -> exponent`.
pub fn factorization(n: u64) -> BTreeMap<u64, u32> {
    let mut map = BTreeMap::new();
    for p in factorize(n) {
        *map.entry(p).or_insert(0) += 1;
    }
    map
}

fn descent_leaf(modulus: u64) -> Leaf {
    Leaf { modulus, method: Method::Descent, params: None }
}

fn case_leaf(case: CaseKind, p: u64) -> Result<Leaf, DriverError> {
    let modulus = case.multiplier() * p;
    let downgrade = modulus <= DESCENT_LEAF_LIMIT;
    if p < case.min_prime() {
        return Ok(descent_leaf(modulus));
    }
    match find_params(case, p) {
        Ok(params) => Ok(Leaf { modulus, method: Method::for_case(case), params: Some(params) }),
        Err(_) if downgrade => Ok(descent_leaf(modulus)),
        Err(e) => Err(e.into()),
    }
}

/// Splits `n` into leaves.
pub fn plan(n: u64) -> Result<FactorPlan, DriverError> {
    if n == 0 {
        return Err(DriverError::Zero);
    }
    if SMALL_PRIMES.contains(&n) {
        return Err(DriverError::Unsupported(n));
    }
    let factors = factorize(n);
    let (small, mut large): (Vec<u64>, Vec<u64>) = factors.into_iter().partition(|p| *p <= 7);
    let mut leaves = Vec::new();
    match small.len() {
        0 => {}
        1 => {
            let case = CaseKind::from_multiplier(small[0]).expect("small prime");
            let p = large.remove(0);
            leaves.push(case_leaf(case, p)?);
        }
        len => {
            let mut rest = &small[..];
            if len % 2 == 1 {
                leaves.push(descent_leaf(rest[..3].iter().product()));
                rest = &rest[3..];
            }
            for pair in rest.chunks(2) {
                leaves.push(descent_leaf(pair.iter().product()));
            }
        }
    }
    for p in large {
        leaves.push(Leaf { modulus: p, method: Method::PrimeConstruction, params: None });
    }
    Ok(FactorPlan { n, leaves })
}

/// Where a leaf permutation came from in a particular run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeafReport {
    pub modulus: u64,
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generated {
    pub perm: Perm,
    pub plan: FactorPlan,
    pub leaves: Vec<LeafReport>,
    /// Whether the final permutation was checked exhaustively.
    pub verified: bool,
    /// Preserved count from the final check (zero when unverified).
    pub preserved_count: u64,
}

#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    pub size_ceiling: u64,
    pub verify_ceiling: u64,
    /// Skip the final exhaustive check.
    pub no_verify: bool,
    pub seed: u64,
    pub cache: Option<PermCache>,
    pub execution: Execution,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            size_ceiling: DEFAULT_SIZE_CEILING,
            verify_ceiling: DEFAULT_VERIFY_CEILING as u64,
            no_verify: false,
            seed: 0,
            cache: None,
            execution: Execution::default(),
        }
    }
}

/// Runs plans, remembering leaf permutations across calls.
#[derive(Debug, Default)]
pub struct Generator {
    pub config: GeneratorConfig,
    memo: Mutex<HashMap<u64, (Perm, LeafReport)>>,
}

impl Generator {
    pub fn new(config: GeneratorConfig) -> Self {
        Generator { config, memo: Mutex::new(HashMap::new()) }
    }

    fn descend(&self, modulus: u64) -> Result<(Perm, LeafReport), DriverError> {
        let n = modulus as usize;
        if let Some(cache) = &self.config.cache {
            // entries that fail to load or re-verify are rebuilt below
            if let Ok(Some((perm, meta))) = cache.get(n) {
                return Ok((perm, LeafReport { modulus, method: Method::Cache, seed: meta.seed }));
            }
        }
        let cfg = DescentConfig { seed: self.config.seed, ..DescentConfig::default() };
        let out = descent(n, &cfg);
        let perm = out.perm.ok_or(DriverError::DescentFailed(modulus))?;
        if let Some(cache) = &self.config.cache {
            let meta = CacheMeta::new("descent", Some(cfg.seed), Some(out.iterations_used));
            let _ = cache.put(&perm, &meta);
        }
        Ok((perm, LeafReport { modulus, method: Method::Descent, seed: Some(cfg.seed) }))
    }

    fn build_leaf(&self, leaf: &Leaf) -> Result<(Perm, LeafReport), DriverError> {
        if let Some(hit) = self.memo.lock().expect("memo lock").get(&leaf.modulus) {
            return Ok(hit.clone());
        }
        let report = |method| LeafReport { modulus: leaf.modulus, method, seed: None };
        let built = match leaf.method {
            Method::PrimeConstruction => match build_prime(leaf.modulus, 2) {
                Ok(perm) => (perm, report(leaf.method)),
                Err(ConstructionError::ConstructionFailed(_)) if leaf.modulus <= DESCENT_LEAF_LIMIT => {
                    self.descend(leaf.modulus)?
                }
                Err(e) => return Err(e.into()),
            },
            Method::Case2p | Method::Case3p | Method::Case5p | Method::Case7p => {
                let params = leaf.params.as_ref().expect("case leaves carry parameters");
                (build_case(params)?, report(leaf.method))
            }
            Method::Descent | Method::Cache => self.descend(leaf.modulus)?,
        };
        self.memo.lock().expect("memo lock").insert(leaf.modulus, built.clone());
        Ok(built)
    }

    /// An AP-destroying permutation of Z/nZ.
    pub fn generate(&self, n: u64) -> Result<Generated, DriverError> {
        if n > self.config.size_ceiling {
            return Err(DriverError::TooLarge { n, ceiling: self.config.size_ceiling });
        }
        let plan = plan(n)?;
        let mut distinct: Vec<&Leaf> = Vec::new();
        for leaf in &plan.leaves {
            if !distinct.iter().any(|d| d.modulus == leaf.modulus) {
                distinct.push(leaf);
            }
        }
        let built = par::map_slice(self.config.execution, &distinct, |leaf| self.build_leaf(leaf));
        let mut by_modulus = HashMap::new();
        for (leaf, res) in distinct.iter().zip(built) {
            by_modulus.insert(leaf.modulus, res?);
        }
        let mut perm = Perm::identity(1);
        let mut leaves = Vec::new();
        for leaf in &plan.leaves {
            let (p, rep) = &by_modulus[&leaf.modulus];
            perm = lift(&perm, p);
            leaves.push(rep.clone());
        }
        let verified = !self.config.no_verify && n <= self.config.verify_ceiling;
        let mut preserved_count = 0;
        if verified {
            preserved_count = count_preserved(&perm, self.config.execution);
            if preserved_count != 0 {
                return Err(DriverError::VerificationFailed { n, count: preserved_count });
            }
        }
        Ok(Generated { perm, plan, leaves, verified, preserved_count })
    }
}

/// [`Generator::generate`] with the default configuration.
pub fn generate(n: u64) -> Result<Perm, DriverError> {
    Generator::default().generate(n).map(|g| g.perm)
}
