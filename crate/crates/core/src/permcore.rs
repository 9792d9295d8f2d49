//! Permutations of Z/nZ, the exhaustive AP-preservation checker, and the
//! product lift `Z/mZ x Z/nZ -> Z/mnZ`.
//!
//! A three-term progression is a pair `(a, r)` with `r != 0`, denoting
//! `(a, a+r, a+2r)`. It is *preserved* by `pi` when
//! `pi(a) - 2 pi(a+r) + pi(a+2r) = 0`. A progression and its reverse
//! `(a+2r, -r)` are the same class; the class is stored as the
//! lexicographically smaller pair. For even `n` the classes with `r = n/2`
//! are their own reverse and count once.
//!
//! The counting routines are written against [`ApSpace`], so the same code
//! serves Z/nZ ([`Cyclic`]) and finite abelian groups.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par::{self, Execution};

/// Exhaustive verification is skipped above this order unless asked for.
pub const DEFAULT_VERIFY_CEILING: usize = 20_000;

/// Reports list every preserved class when the modulus has at most this
/// many classes in total.
pub const DEFAULT_LIST_CAP: u64 = 1_000_000;

/// Witnesses kept in a truncated report.
pub const DEFAULT_WITNESSES: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PermError {
    #[error("a permutation needs n >= 1")]
    EmptyModulus,
    #[error("image is not a bijection on 0..{n}: {detail}")]
    NotBijection { n: usize, detail: String },
    #[error("index {index} out of range for n = {n}")]
    OutOfRange { index: usize, n: usize },
    #[error("parse error: {0}")]
    Parse(String),
}

/// Additive structure that progressions live in. Elements are indices
/// `0..order()`.
pub trait ApSpace: Sync {
    fn order(&self) -> usize;
    fn add(&self, x: usize, y: usize) -> usize;
    fn neg(&self, x: usize) -> usize;

    fn sub(&self, x: usize, y: usize) -> usize {
        self.add(x, self.neg(y))
    }

    /// All preserved classes, sorted. Implementors may override with a
    /// faster scan.
    fn preserved_classes(&self, image: &[usize], exec: Execution) -> Vec<ApTriple> {
        preserved_classes_generic(self, image, exec)
    }
}

/// Z/nZ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cyclic(pub usize);

impl ApSpace for Cyclic {
    #[inline]
    fn order(&self) -> usize {
        self.0
    }

    #[inline]
    fn add(&self, x: usize, y: usize) -> usize {
        let s = x + y;
        if s >= self.0 {
            s - self.0
        } else {
            s
        }
    }

    #[inline]
    fn neg(&self, x: usize) -> usize {
        if x == 0 {
            0
        } else {
            self.0 - x
        }
    }

    fn preserved_classes(&self, image: &[usize], exec: Execution) -> Vec<ApTriple> {
        let (_, list) = scan_cyclic(image, exec, ListMode::All);
        list
    }
}

/// A bijection on `0..n`, stored as its image sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "PermRecord", into = "PermRecord")]
pub struct Perm {
    image: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PermRecord {
    n: usize,
    image: Vec<usize>,
}

impl TryFrom<PermRecord> for Perm {
    type Error = PermError;

    fn try_from(rec: PermRecord) -> Result<Self, PermError> {
        if rec.image.len() != rec.n {
            return Err(PermError::Parse(format!("declared n = {} but image has {} entries", rec.n, rec.image.len())));
        }
        Perm::new(rec.image)
    }
}

impl From<Perm> for PermRecord {
    fn from(p: Perm) -> Self {
        PermRecord { n: p.image.len(), image: p.image }
    }
}

impl Perm {
    /// Checks that `image` is a bijection on `0..image.len()`.
    pub fn new(image: Vec<usize>) -> Result<Perm, PermError> {
        let n = image.len();
        if n == 0 {
            return Err(PermError::EmptyModulus);
        }
        let mut seen = vec![false; n];
        for (i, &v) in image.iter().enumerate() {
            if v >= n {
                return Err(PermError::NotBijection { n, detail: format!("image[{i}] = {v} is out of range") });
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(PermError::NotBijection { n, detail: format!("value {v} repeated") });
            }
        }
        Ok(Perm { image })
    }

    pub(crate) fn from_image_unchecked(image: Vec<usize>) -> Perm {
        debug_assert!(Perm::new(image.clone()).is_ok());
        Perm { image }
    }

    pub fn identity(n: usize) -> Perm {
        assert!(n >= 1, "identity needs n >= 1");
        Perm { image: (0..n).collect() }
    }

    pub fn n(&self) -> usize {
        self.image.len()
    }

    pub fn image(&self) -> &[usize] {
        &self.image
    }

    pub fn into_image(self) -> Vec<usize> {
        self.image
    }

    #[inline]
    pub fn apply(&self, x: usize) -> usize {
        self.image[x]
    }

    pub fn inverse(&self) -> Perm {
        let mut inv = vec![0; self.n()];
        for (i, &v) in self.image.iter().enumerate() {
            inv[v] = i;
        }
        Perm { image: inv }
    }

    /// A copy with the images of `i` and `j` exchanged.
    pub fn apply_transposition(&self, i: usize, j: usize) -> Result<Perm, PermError> {
        let n = self.n();
        for index in [i, j] {
            if index >= n {
                return Err(PermError::OutOfRange { index, n });
            }
        }
        let mut image = self.image.clone();
        image.swap(i, j);
        Ok(Perm { image })
    }

    pub(crate) fn swap_in_place(&mut self, i: usize, j: usize) {
        self.image.swap(i, j);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("permutations always serialize")
    }

    pub fn from_json(s: &str) -> Result<Perm, PermError> {
        serde_json::from_str(s).map_err(|e| PermError::Parse(e.to_string()))
    }

    /// `n` on its own line, then the images separated by single spaces.
    pub fn to_plain(&self) -> String {
        let mut out = format!("{}\n", self.n());
        let body: Vec<String> = self.image.iter().map(|v| v.to_string()).collect();
        out.push_str(&body.join(" "));
        out.push('\n');
        out
    }

    pub fn from_plain(s: &str) -> Result<Perm, PermError> {
        let mut lines = s.lines().skip_while(|l| l.trim().is_empty());
        let header = lines.next().ok_or_else(|| PermError::Parse("empty input".into()))?;
        let n: usize = header.trim().parse().map_err(|_| PermError::Parse(format!("bad length line {header:?}")))?;
        let image = lines
            .flat_map(str::split_whitespace)
            .map(|tok| tok.parse::<usize>().map_err(|_| PermError::Parse(format!("bad entry {tok:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if image.len() != n {
            return Err(PermError::Parse(format!("declared n = {n} but found {} entries", image.len())));
        }
        Perm::new(image)
    }

    /// Accepts either serialization.
    pub fn parse(s: &str) -> Result<Perm, PermError> {
        if s.trim_start().starts_with('{') {
            Perm::from_json(s)
        } else {
            Perm::from_plain(s)
        }
    }
}

impl FromStr for Perm {
    type Err = PermError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Perm::parse(s)
    }
}

/// Canonical representative of a progression class: `(a, a+r, a+2r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ApTriple {
    pub a: usize,
    pub r: usize,
}

impl ApTriple {
    /// Canonical class of `(a, r)` in Z/nZ. `r` must be nonzero mod `n`.
    pub fn canonical(n: usize, a: usize, r: usize) -> ApTriple {
        canonical_in(&Cyclic(n), a % n, r % n)
    }

    pub fn terms(&self, n: usize) -> [usize; 3] {
        terms_in(&Cyclic(n), self.a, self.r)
    }
}

impl fmt::Display for ApTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(a={}, r={})", self.a, self.r)
    }
}

#[inline]
pub fn terms_in<G: ApSpace + ?Sized>(g: &G, a: usize, r: usize) -> [usize; 3] {
    let b = g.add(a, r);
    [a, b, g.add(b, r)]
}

#[inline]
pub fn canonical_in<G: ApSpace + ?Sized>(g: &G, a: usize, r: usize) -> ApTriple {
    let c = g.add(g.add(a, r), r);
    let nr = g.neg(r);
    if (a, r) <= (c, nr) {
        ApTriple { a, r }
    } else {
        ApTriple { a: c, r: nr }
    }
}

#[inline]
fn is_canonical_in<G: ApSpace + ?Sized>(g: &G, a: usize, r: usize, c: usize) -> bool {
    (a, r) <= (c, g.neg(r))
}

/// `pi(a) + pi(c) == 2 pi(b)` in the group.
#[inline]
pub fn is_preserved_in<G: ApSpace + ?Sized>(g: &G, image: &[usize], t: [usize; 3]) -> bool {
    let (pa, pb, pc) = (image[t[0]], image[t[1]], image[t[2]]);
    g.add(pa, pc) == g.add(pb, pb)
}

/// Result of an exhaustive check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApReport {
    pub n: usize,
    pub preserved_count: u64,
    /// Sorted canonical classes; the smallest `DEFAULT_WITNESSES` only when
    /// `truncated` is set.
    pub preserved: Vec<ApTriple>,
    pub truncated: bool,
}

impl ApReport {
    pub fn is_ap_destroying(&self) -> bool {
        self.preserved_count == 0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub list_cap: u64,
    pub witnesses: usize,
    pub execution: Execution,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { list_cap: DEFAULT_LIST_CAP, witnesses: DEFAULT_WITNESSES, execution: Execution::Parallel }
    }
}

/// Number of progression classes in Z/nZ.
pub fn count_canonical_aps(n: usize) -> u64 {
    let n = n as u64;
    let half = n.saturating_sub(1) / 2;
    n * half + if n.is_multiple_of(2) { n } else { 0 }
}

pub fn verify(pi: &Perm) -> ApReport {
    verify_with(pi, &VerifyOptions::default())
}

pub fn verify_with(pi: &Perm, opts: &VerifyOptions) -> ApReport {
    let n = pi.n();
    let full = count_canonical_aps(n) <= opts.list_cap;
    let mode = if full { ListMode::All } else { ListMode::First(opts.witnesses) };
    let (count, preserved) = scan_cyclic(&pi.image, opts.execution, mode);
    let truncated = (preserved.len() as u64) < count;
    ApReport { n, preserved_count: count, preserved, truncated }
}

/// Count only; the hot path for checking constructions.
pub fn count_preserved(pi: &Perm, exec: Execution) -> u64 {
    scan_cyclic(&pi.image, exec, ListMode::None).0
}

pub fn is_ap_destroying(pi: &Perm) -> bool {
    count_preserved(pi, Execution::Parallel) == 0
}

#[derive(Clone, Copy)]
enum ListMode {
    None,
    All,
    First(usize),
}

// One canonical class per (a, r) with 1 <= r <= n/2: for 2r < n the reverse
// has difference n - r > n/2, and for r = n/2 the class is self-reverse.
fn scan_cyclic(image: &[usize], exec: Execution, mode: ListMode) -> (u64, Vec<ApTriple>) {
    let n = image.len();
    let rows = n / 2;
    if rows == 0 {
        return (0, Vec::new());
    }
    if let ListMode::None = mode {
        return (par::sum_range(exec, 1..rows + 1, |r| scan_row(image, r, |_| {})), Vec::new());
    }
    let per_row = par::map_range(exec, 1..rows + 1, |r| {
        let mut hits = Vec::new();
        let count = scan_row(image, r, |a| hits.push(row_canonical(n, a, r)));
        if let ListMode::First(k) = mode {
            if hits.len() > k {
                hits.sort_unstable();
                hits.truncate(k);
            }
        }
        (count, hits)
    });
    let count = per_row.iter().map(|(c, _)| c).sum();
    let mut list: Vec<ApTriple> = per_row.into_iter().flat_map(|(_, h)| h).collect();
    list.sort_unstable();
    if let ListMode::First(k) = mode {
        list.truncate(k);
    }
    (count, list)
}

#[inline]
fn row_canonical(n: usize, a: usize, r: usize) -> ApTriple {
    if 2 * r == n {
        return ApTriple { a, r };
    }
    let c = (a + 2 * r) % n;
    if a < c {
        ApTriple { a, r }
    } else {
        ApTriple { a: c, r: n - r }
    }
}

#[inline]
fn scan_row(image: &[usize], r: usize, mut on_hit: impl FnMut(usize)) -> u64 {
    let n = image.len();
    let mut b = r;
    let mut c = (2 * r) % n;
    let mut count = 0u64;
    for (a, &pa) in image.iter().enumerate() {
        let s = pa + image[c];
        let t = 2 * image[b];
        if s == t || s + n == t || s == t + n {
            count += 1;
            on_hit(a);
        }
        b += 1;
        if b == n {
            b = 0;
        }
        c += 1;
        if c == n {
            c = 0;
        }
    }
    count
}

/// Exhaustive scan over all `(a, r != 0)` in any [`ApSpace`].
pub fn preserved_classes_generic<G: ApSpace + ?Sized>(g: &G, image: &[usize], exec: Execution) -> Vec<ApTriple> {
    let order = g.order();
    let rows = par::map_range(exec, 1..order, |r| {
        let mut hits = Vec::new();
        for a in 0..order {
            let t = terms_in(g, a, r);
            if is_canonical_in(g, a, r, t[2]) && is_preserved_in(g, image, t) {
                hits.push(ApTriple { a, r });
            }
        }
        hits
    });
    let mut out: Vec<ApTriple> = rows.into_iter().flatten().collect();
    out.sort_unstable();
    out
}

/// Preserved-class count in any [`ApSpace`].
pub fn count_preserved_generic<G: ApSpace + ?Sized>(g: &G, image: &[usize], exec: Execution) -> u64 {
    let order = g.order();
    par::sum_range(exec, 1..order, |r| {
        (0..order)
            .filter(|&a| {
                let t = terms_in(g, a, r);
                is_canonical_in(g, a, r, t[2]) && is_preserved_in(g, image, t)
            })
            .count() as u64
    })
}

/// Calls `visit(class, terms)` once for every class with a term at
/// position `i` or `j`.
pub fn for_each_class_touching<G, F>(g: &G, i: usize, j: usize, mut visit: F)
where
    G: ApSpace + ?Sized,
    F: FnMut(ApTriple, [usize; 3]),
{
    let order = g.order();
    let sources: &[usize] = if i == j { &[i] } else { &[i, j] };
    for (s, &x) in sources.iter().enumerate() {
        for r in 1..order {
            let nr = g.neg(r);
            let mut a = x;
            for k in 0..3 {
                if k > 0 {
                    a = g.add(a, nr);
                }
                let t = terms_in(g, a, r);
                if !is_canonical_in(g, a, r, t[2]) {
                    continue;
                }
                // first generator wins: earlier source, then earlier slot
                if s == 1 && t.contains(&i) {
                    continue;
                }
                if t[..k].contains(&x) {
                    continue;
                }
                visit(ApTriple { a, r }, t);
            }
        }
    }
}

/// Change in the preserved count if the images of `i` and `j` are swapped.
pub fn swap_delta_in<G: ApSpace + ?Sized>(g: &G, image: &[usize], i: usize, j: usize) -> i64 {
    if i == j {
        return 0;
    }
    let swapped = SwappedView { image, i, j };
    let mut delta = 0i64;
    for_each_class_touching(g, i, j, |_, t| {
        let before = is_preserved_in(g, image, t);
        let after = swapped.preserved(g, t);
        delta += after as i64 - before as i64;
    });
    delta
}

/// The touched classes preserved before and after swapping `i` and `j`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SwapEffect {
    pub before: Vec<ApTriple>,
    pub after: Vec<ApTriple>,
}

impl SwapEffect {
    pub fn delta(&self) -> i64 {
        self.after.len() as i64 - self.before.len() as i64
    }
}

pub fn swap_effect_in<G: ApSpace + ?Sized>(g: &G, image: &[usize], i: usize, j: usize) -> SwapEffect {
    let mut effect = SwapEffect::default();
    if i == j {
        return effect;
    }
    let swapped = SwappedView { image, i, j };
    for_each_class_touching(g, i, j, |class, t| {
        if is_preserved_in(g, image, t) {
            effect.before.push(class);
        }
        if swapped.preserved(g, t) {
            effect.after.push(class);
        }
    });
    effect
}

struct SwappedView<'a> {
    image: &'a [usize],
    i: usize,
    j: usize,
}

impl SwappedView<'_> {
    #[inline]
    fn at(&self, x: usize) -> usize {
        if x == self.i {
            self.image[self.j]
        } else if x == self.j {
            self.image[self.i]
        } else {
            self.image[x]
        }
    }

    #[inline]
    fn preserved<G: ApSpace + ?Sized>(&self, g: &G, t: [usize; 3]) -> bool {
        let (pa, pb, pc) = (self.at(t[0]), self.at(t[1]), self.at(t[2]));
        g.add(pa, pc) == g.add(pb, pb)
    }
}

/// Product lift: `pi(r + m h) = sigma_q(r) + m sigma_h(h)` for
/// `r < m`, `h < n`. Destroys every progression when both inputs do,
/// whether or not `m` and `n` are coprime.
pub fn lift(sigma_q: &Perm, sigma_h: &Perm) -> Perm {
    let m = sigma_q.n();
    let n = sigma_h.n();
    let mut image = vec![0usize; m * n];
    for h in 0..n {
        let high = m * sigma_h.image[h];
        for r in 0..m {
            image[r + m * h] = sigma_q.image[r] + high;
        }
    }
    Perm { image }
}
