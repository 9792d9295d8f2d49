//! Descent search, exhaustive existence search for tiny moduli, and an
//! on-disk cache of verified permutations.
//!
//! Descent starts from a uniformly random permutation and applies random
//! transpositions only when they strictly lower the number of preserved
//! progressions. A restart happens after `10 n` consecutive rejected
//! samples or when the per-restart budget runs out.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par::{self, Execution};
use crate::permcore::{
    count_preserved_generic, swap_delta_in, swap_effect_in, terms_in, ApSpace, Cyclic, Perm, PermError,
};

pub const DEFAULT_MAX_RESTARTS: u32 = 20;
/// Largest modulus accepted by [`exhaustive_exists`].
pub const EXHAUSTIVE_LIMIT: usize = 8;
pub const CACHE_ENV: &str = "APDPERM_CACHE_DIR";

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("exhaustive search is limited to n <= {EXHAUSTIVE_LIMIT}, got n = {0}")]
    TooLarge(usize),
    #[error("modulus must be positive")]
    EmptyModulus,
    #[error("corrupt cache entry {path}: {reason}")]
    CorruptEntry { path: PathBuf, reason: String },
    #[error("refusing to cache a permutation that preserves {0} progressions")]
    NotDestroying(u64),
    #[error("cache entry has size {got}, expected {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("cache i/o: {0}")]
    Io(#[from] io::Error),
}

/// Descent parameters. `None` fields take their size-dependent defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescentConfig {
    pub seed: u64,
    /// Samples per restart; `50 n^2` by default.
    pub max_iterations_per_restart: Option<u64>,
    pub max_restarts: u32,
    /// Consecutive rejected samples before a restart; `10 n` by default.
    pub stagnation: Option<u64>,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for DescentConfig {
    fn default() -> Self {
        DescentConfig {
            seed: 0,
            max_iterations_per_restart: None,
            max_restarts: DEFAULT_MAX_RESTARTS,
            stagnation: None,
            execution: Execution::default(),
        }
    }
}

impl DescentConfig {
    pub fn with_seed(seed: u64) -> Self {
        DescentConfig { seed, ..Default::default() }
    }

    pub fn iterations_for(&self, n: usize) -> u64 {
        self.max_iterations_per_restart.unwrap_or(50 * (n as u64).pow(2)).max(1)
    }

    pub fn stagnation_for(&self, n: usize) -> u64 {
        self.stagnation.unwrap_or(10 * n as u64).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescentOutcome {
    pub success: bool,
    pub perm: Option<Perm>,
    pub restarts_used: u32,
    pub iterations_used: u64,
    /// Zero on success; otherwise the lowest count any restart reached.
    pub final_preserved_count: u64,
    pub seed: u64,
}

struct RestartResult {
    image: Vec<usize>,
    count: u64,
    iterations: u64,
}

/// Preserved-class bookkeeping for one descent run.
struct State<'g, G: ApSpace + ?Sized> {
    g: &'g G,
    image: Vec<usize>,
    count: u64,
    /// Number of preserved classes (with multiplicity of terms) at each point.
    hits: Vec<u32>,
}

impl<'g, G: ApSpace + ?Sized> State<'g, G> {
    fn new(g: &'g G, image: Vec<usize>) -> Self {
        let classes = g.preserved_classes(&image, Execution::Sequential);
        let mut hits = vec![0u32; g.order()];
        for c in &classes {
            for x in terms_in(g, c.a, c.r) {
                hits[x] += 1;
            }
        }
        State { g, image, count: classes.len() as u64, hits }
    }

    /// Applies the swap if it strictly lowers the count.
    fn try_swap(&mut self, i: usize, j: usize) -> bool {
        if self.hits[i] == 0 && self.hits[j] == 0 {
            // nothing to destroy, so the count cannot go down
            return false;
        }
        let effect = swap_effect_in(self.g, &self.image, i, j);
        if effect.delta() >= 0 {
            return false;
        }
        for c in &effect.before {
            for x in terms_in(self.g, c.a, c.r) {
                self.hits[x] -= 1;
            }
        }
        for c in &effect.after {
            for x in terms_in(self.g, c.a, c.r) {
                self.hits[x] += 1;
            }
        }
        self.image.swap(i, j);
        self.count = (self.count as i64 + effect.delta()) as u64;
        true
    }
}

fn restart_seed(seed: u64, index: u32) -> u64 {
    seed ^ index as u64
}

fn run_restart<G: ApSpace + ?Sized>(g: &G, cfg: &DescentConfig, index: u32) -> RestartResult {
    let n = g.order();
    let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(cfg.seed, index));
    let mut image: Vec<usize> = (0..n).collect();
    image.shuffle(&mut rng);
    let mut state = State::new(g, image);
    let budget = cfg.iterations_for(n);
    let patience = cfg.stagnation_for(n);
    let mut iterations = 0u64;
    let mut idle = 0u64;
    while state.count > 0 && n >= 2 && iterations < budget && idle < patience {
        iterations += 1;
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        if state.try_swap(i, j) {
            idle = 0;
        } else {
            idle += 1;
        }
    }
    RestartResult { image: state.image, count: state.count, iterations }
}

/// Descent over any [`ApSpace`]. Restarts are independent and may run in
/// parallel; the reported winner is always the lowest successful restart
/// index, so the outcome does not depend on the number of threads.
pub fn descent_in<G: ApSpace + ?Sized>(g: &G, cfg: &DescentConfig) -> DescentOutcome {
    let n = g.order();
    let chunk = par::workers(cfg.execution).max(1) as u32;
    let mut iterations_used = 0u64;
    let mut best = u64::MAX;
    let mut next = 0u32;
    while next < cfg.max_restarts {
        let end = (next + chunk).min(cfg.max_restarts);
        let indices: Vec<u32> = (next..end).collect();
        let results = par::map_slice(cfg.execution, &indices, |&k| run_restart(g, cfg, k));
        for (k, res) in indices.iter().zip(results) {
            iterations_used += res.iterations;
            // re-check from scratch before reporting success
            let count = if res.count == 0 { count_preserved_generic(g, &res.image, cfg.execution) } else { res.count };
            if count == 0 {
                return DescentOutcome {
                    success: true,
                    perm: Some(Perm::new(res.image).expect("descent keeps a bijection")),
                    restarts_used: k + 1,
                    iterations_used,
                    final_preserved_count: 0,
                    seed: cfg.seed,
                };
            }
            best = best.min(count);
        }
        next = end;
    }
    DescentOutcome {
        success: false,
        perm: None,
        restarts_used: cfg.max_restarts,
        iterations_used,
        final_preserved_count: if best == u64::MAX { count_all_identity(n) } else { best },
        seed: cfg.seed,
    }
}

fn count_all_identity(n: usize) -> u64 {
    if n == 0 {
        0
    } else {
        crate::permcore::count_canonical_aps(n)
    }
}

/// Descent on Z/nZ.
pub fn descent(n: usize, cfg: &DescentConfig) -> DescentOutcome {
    assert!(n >= 1, "descent needs n >= 1");
    descent_in(&Cyclic(n), cfg)
}

/// Change in the preserved count if the images of `i` and `j` are swapped.
pub fn incremental_delta(pi: &Perm, i: usize, j: usize) -> i64 {
    swap_delta_in(&Cyclic(pi.n()), pi.image(), i, j)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExhaustiveResult {
    pub n: usize,
    pub exists: bool,
    /// Number of AP-destroying permutations among all `n!`.
    pub destroying_count: u64,
    /// Lexicographically first AP-destroying permutation.
    pub witness: Option<Perm>,
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = v.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = v.iter().rposition(|&x| x > v[i]).expect("a larger element exists");
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

/// Enumerates every permutation of Z/nZ.
pub fn exhaustive_exists(n: usize) -> Result<ExhaustiveResult, SearchError> {
    if n == 0 {
        return Err(SearchError::EmptyModulus);
    }
    if n > EXHAUSTIVE_LIMIT {
        return Err(SearchError::TooLarge(n));
    }
    let g = Cyclic(n);
    let mut image: Vec<usize> = (0..n).collect();
    let mut count = 0u64;
    let mut witness = None;
    loop {
        if count_preserved_generic(&g, &image, Execution::Sequential) == 0 {
            count += 1;
            if witness.is_none() {
                witness = Some(Perm::new(image.clone()).expect("a permutation"));
            }
        }
        if !next_permutation(&mut image) {
            break;
        }
    }
    Ok(ExhaustiveResult { n, exists: count > 0, destroying_count: count, witness })
}

/// How a cached permutation was produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheMeta {
    pub method: String,
    pub seed: Option<u64>,
    pub iterations: Option<u64>,
    pub version: String,
}

impl CacheMeta {
    pub fn new(method: &str, seed: Option<u64>, iterations: Option<u64>) -> Self {
        CacheMeta { method: method.to_string(), seed, iterations, version: env!("CARGO_PKG_VERSION").to_string() }
    }
}

/// A directory of verified permutations, one file per key. Line one holds
/// the permutation as JSON, line two the [`CacheMeta`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermCache {
    dir: PathBuf,
}

impl PermCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        PermCache { dir: dir.into() }
    }

    /// `$APDPERM_CACHE_DIR`, else `$XDG_CACHE_HOME/apdperm`, else
    /// `$HOME/.cache/apdperm`, else a directory under the system temp dir.
    pub fn from_env() -> Self {
        if let Some(dir) = std::env::var_os(CACHE_ENV).filter(|d| !d.is_empty()) {
            return PermCache::new(dir);
        }
        if let Some(dir) = std::env::var_os("XDG_CACHE_HOME").filter(|d| !d.is_empty()) {
            return PermCache::new(Path::new(&dir).join("apdperm"));
        }
        if let Some(home) = std::env::var_os("HOME").filter(|d| !d.is_empty()) {
            return PermCache::new(Path::new(&home).join(".cache").join("apdperm"));
        }
        PermCache::new(std::env::temp_dir().join("apdperm"))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Cache key for Z/nZ.
    pub fn cyclic_key(n: usize) -> String {
        format!("z{n}")
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.perm"))
    }

    /// Loads and re-verifies the entry for `key` as a permutation of `g`.
    pub fn get_in<G: ApSpace + ?Sized>(&self, g: &G, key: &str) -> Result<Option<(Perm, CacheMeta)>, SearchError> {
        let path = self.path_for(key);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let corrupt = |reason: String| SearchError::CorruptEntry { path: path.clone(), reason };
        let mut lines = text.lines();
        let perm = Perm::from_json(lines.next().unwrap_or("")).map_err(|e: PermError| corrupt(e.to_string()))?;
        let meta: CacheMeta =
            serde_json::from_str(lines.next().unwrap_or("")).map_err(|e| corrupt(format!("metadata: {e}")))?;
        if perm.n() != g.order() {
            return Err(corrupt(format!("size {} but expected {}", perm.n(), g.order())));
        }
        let count = count_preserved_generic(g, perm.image(), Execution::default());
        if count != 0 {
            return Err(corrupt(format!("preserves {count} progressions")));
        }
        Ok(Some((perm, meta)))
    }

    /// Verifies `perm` on `g` and stores it under `key`.
    pub fn put_in<G: ApSpace + ?Sized>(
        &self,
        g: &G,
        key: &str,
        perm: &Perm,
        meta: &CacheMeta,
    ) -> Result<PathBuf, SearchError> {
        if perm.n() != g.order() {
            return Err(SearchError::SizeMismatch { expected: g.order(), got: perm.n() });
        }
        let count = count_preserved_generic(g, perm.image(), Execution::default());
        if count != 0 {
            return Err(SearchError::NotDestroying(count));
        }
        fs::create_dir_all(&self.dir)?;
        let path = self.path_for(key);
        let tmp = self.dir.join(format!(".{key}.{}.tmp", std::process::id()));
        let body = format!("{}\n{}\n", perm.to_json(), serde_json::to_string(meta).expect("serializable"));
        fs::write(&tmp, body)?;
        fs::rename(&tmp, &path)?;
        Ok(path)
    }

    pub fn get(&self, n: usize) -> Result<Option<(Perm, CacheMeta)>, SearchError> {
        self.get_in(&Cyclic(n), &Self::cyclic_key(n))
    }

    pub fn put(&self, perm: &Perm, meta: &CacheMeta) -> Result<PathBuf, SearchError> {
        self.put_in(&Cyclic(perm.n()), &Self::cyclic_key(perm.n()), perm, meta)
    }
}
