//! Acceptance suite. Prints one `criterion N: PASS|FAIL` line per check and
//! exits nonzero if any fail. Pass criterion numbers as arguments to run a
//! subset: `cargo test --test acceptance -- 3 5`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use apdperm::abelian::{group_verify, prop22_refute, AbelianGroup, SPECIAL_GROUPS};
use apdperm::charsum::{
    count_symbol_solutions, default_parameter, discriminant_distinct_roots, factors, hasse_weil_violations,
    verify_lemma_sums, LemmaId,
};
use apdperm::constructions::{build_case, check_t, crt_index, find_params, glued_map, prime_base, CaseKind};
use apdperm::driver::{Generator, GeneratorConfig};
use apdperm::modular::{next_prime, primes_between, Residue};
use apdperm::par::Execution;
use apdperm::permcore::{count_preserved, is_preserved_in, lift, terms_in, verify, ApSpace, ApTriple, Cyclic, Perm};
use apdperm::search::{descent, descent_in, exhaustive_exists, incremental_delta, DescentConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

const NO_SOLUTION: [u64; 4] = [2, 3, 5, 7];

fn full_range() -> Check {
    let gen = Generator::new(GeneratorConfig { no_verify: true, ..GeneratorConfig::default() });
    let mut sizes = 0;
    for n in (1..=2500u64).filter(|n| !NO_SOLUTION.contains(n)) {
        let out = gen.generate(n).map_err(|e| format!("n = {n}: {e}"))?;
        ensure(out.perm.n() as u64 == n, || format!("n = {n}: wrong size"))?;
        let report = verify(&out.perm);
        ensure(report.is_ap_destroying(), || format!("n = {n}: {} preserved", report.preserved_count))?;
        sizes += 1;
    }
    Ok(format!("{sizes} sizes generated and verified"))
}

fn small_existence() -> Check {
    let expected: [(usize, u64); 8] = [(1, 1), (2, 0), (3, 0), (4, 16), (5, 0), (6, 72), (7, 0), (8, 768)];
    for (n, count) in expected {
        let res = exhaustive_exists(n).map_err(|e| e.to_string())?;
        ensure(res.exists == (count > 0), || format!("n = {n}: exists = {}", res.exists))?;
        ensure(res.destroying_count == count, || format!("n = {n}: count {}", res.destroying_count))?;
        if let Some(w) = &res.witness {
            ensure(verify(w).is_ap_destroying(), || format!("n = {n}: witness preserves progressions"))?;
        }
    }
    Ok("exists exactly for 1, 4, 6, 8".into())
}

fn ratio(n: i64, d: i64, p: u64) -> usize {
    Residue::ratio(n, d, p).expect("invertible").value() as usize
}

fn base_map_exact() -> Check {
    let mut maps = 0;
    for p in primes_between(11, 97) {
        let n = p as usize;
        let mut expected =
            vec![ApTriple::canonical(n, 0, ratio(3, 2, p)), ApTriple::canonical(n, ratio(1, 3, p), ratio(1, 3, p))];
        expected.sort();
        for t in 1..p {
            let base = prime_base(p, t).map_err(|e| e.to_string())?;
            let got = Cyclic(n).preserved_classes(base.image(), Execution::Sequential);
            ensure(got == expected, || format!("p = {p}, t = {t}: {got:?}"))?;
            maps += 1;
        }
    }
    Ok(format!("{maps} base maps"))
}

fn two_p_residual() -> Check {
    let mut maps = 0;
    for p in primes_between(31, 97) {
        let n = 2 * p as usize;
        let a = crt_index(2, p, 0, 1);
        let b = crt_index(2, p, 1, 1);
        let mut expected = vec![ApTriple::canonical(n, a, b + n - a), ApTriple::canonical(n, b, a + n - b)];
        expected.sort();
        for t in (2..p).filter(|&t| check_t(CaseKind::TwoP, p, t).is_ok()) {
            let pi = glued_map(CaseKind::TwoP, p, t).map_err(|e| e.to_string())?;
            let got = Cyclic(n).preserved_classes(pi.image(), Execution::Sequential);
            ensure(got == expected, || format!("p = {p}, t = {t}: {got:?}"))?;
            maps += 1;
        }
    }
    ensure(maps > 0, || "no admissible t".into())?;
    Ok(format!("{maps} maps"))
}

fn glued_cases() -> Check {
    let runs: [(CaseKind, [u64; 5]); 4] = [
        (CaseKind::TwoP, [503, 509, 521, 523, 541]),
        (CaseKind::ThreeP, [31, 37, 41, 43, 47]),
        (CaseKind::FiveP, [503, 509, 521, 523, 541]),
        (CaseKind::SevenP, [67, 71, 73, 79, 83]),
    ];
    for (case, primes) in runs {
        for p in primes {
            let params = find_params(case, p).map_err(|e| e.to_string())?;
            let pi = build_case(&params).map_err(|e| e.to_string())?;
            let count = count_preserved(&pi, Execution::Parallel);
            ensure(count == 0, || format!("{case:?} p = {p}: {count} preserved"))?;
        }
    }
    Ok("20 glued permutations".into())
}

fn counting_bounds() -> Check {
    for p in primes_between(31, 199) {
        for id in [LemmaId::TwoPT, LemmaId::ThreeP] {
            let count = count_symbol_solutions(&factors(id, p, 0), Execution::Sequential);
            ensure(4 * count + 5 >= p, || format!("{id} p = {p}: {count} solutions"))?;
        }
    }
    Ok("4 count >= p - 5 throughout".into())
}

fn hasse_weil() -> Check {
    let mut skipped = 0;
    let mut checked = 0;
    for p in primes_between(11, 499) {
        for id in LemmaId::ALL {
            let t = if id.needs_parameter() {
                match default_parameter(p) {
                    Some(t) if discriminant_distinct_roots(Residue::new(t, p)) => t,
                    _ => {
                        skipped += 1;
                        continue;
                    }
                }
            } else {
                0
            };
            let bad = hasse_weil_violations(id, p, t, Execution::Sequential);
            ensure(bad.is_empty(), || format!("{id} p = {p}: {} violations", bad.len()))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} expansions, {skipped} without an admissible parameter"))
}

fn lemma_sums() -> Check {
    let ranges = [(LemmaId::TwoPT, 31, 499), (LemmaId::ThreeP, 31, 499), (LemmaId::SevenP, 67, 499)];
    for (id, lo, hi) in ranges {
        for p in primes_between(lo, hi) {
            ensure(verify_lemma_sums(id, p), || format!("{id} p = {p}"))?;
        }
    }
    let sample: Vec<u64> = (0..10).map(|k| next_prime(501 + 2050 * k)).collect();
    for id in [LemmaId::TwoPY, LemmaId::FiveP] {
        for &p in &sample {
            ensure(verify_lemma_sums(id, p), || format!("{id} p = {p}"))?;
        }
    }
    Ok(format!("large primes {sample:?}"))
}

fn lift_pairs() -> Check {
    let sizes = [4usize, 8, 9, 12, 16];
    let mut inputs = Vec::new();
    for n in sizes {
        let pi = descent(n, &DescentConfig::default()).perm.ok_or(format!("no input for {n}"))?;
        ensure(verify(&pi).is_ap_destroying(), || format!("input {n} preserves progressions"))?;
        inputs.push(pi);
    }
    for q in &inputs {
        for h in &inputs {
            let count = count_preserved(&lift(q, h), Execution::Parallel);
            ensure(count == 0, || format!("{} x {}: {count} preserved", q.n(), h.n()))?;
        }
    }
    Ok("25 ordered pairs".into())
}

fn descent_soundness() -> Check {
    let cfg = DescentConfig::with_seed(5);
    let a = descent(97, &cfg);
    ensure(a == descent(97, &cfg), || "repeat run differs".into())?;
    let seq = DescentConfig { execution: Execution::Sequential, ..cfg };
    ensure(descent(97, &seq) == a, || "sequential run differs".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..200 {
        let n = rng.random_range(2..=40);
        let mut image: Vec<usize> = (0..n).collect();
        image.shuffle(&mut rng);
        let pi = Perm::new(image).map_err(|e| e.to_string())?;
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        let after = pi.apply_transposition(i, j).map_err(|e| e.to_string())?;
        let oracle =
            count_preserved(&after, Execution::Sequential) as i64 - count_preserved(&pi, Execution::Sequential) as i64;
        let d = incremental_delta(&pi, i, j);
        ensure(d == oracle, || format!("n = {n}, ({i}, {j}): {d} vs {oracle}"))?;
    }

    for n in 8..=200 {
        let pi = descent(n, &DescentConfig::default()).perm.ok_or(format!("descent failed at {n}"))?;
        ensure(verify(&pi).is_ap_destroying(), || format!("n = {n}: unsound success"))?;
    }
    for n in NO_SOLUTION {
        for seed in 0..10 {
            let out = descent(n as usize, &DescentConfig::with_seed(seed));
            ensure(!out.success && out.perm.is_none(), || format!("n = {n}, seed {seed}: success"))?;
        }
    }
    Ok("deterministic, 200 deltas, 8..=200 found".into())
}

fn abelian_groups() -> Check {
    for factors in SPECIAL_GROUPS {
        let g = AbelianGroup::new(factors).map_err(|e| e.to_string())?;
        let pi = descent_in(&g, &DescentConfig::default()).perm.ok_or(format!("descent failed on {g}"))?;
        let report = group_verify(&g, &pi).map_err(|e| e.to_string())?;
        ensure(report.is_ap_destroying(), || format!("{g}: {} preserved", report.preserved_count))?;
    }
    let g = AbelianGroup::new(&[2, 2, 3]).map_err(|e| e.to_string())?;
    let h = AbelianGroup::new(&[3]).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut image: Vec<usize> = (0..g.order()).collect();
    for _ in 0..10_000 {
        image.shuffle(&mut rng);
        let pi = Perm::new(image.clone()).map_err(|e| e.to_string())?;
        let t = prop22_refute(2, &h, &pi).map_err(|e| e.to_string())?;
        ensure(t.r != 0 && is_preserved_in(&g, pi.image(), terms_in(&g, t.a, t.r)), || {
            format!("{t} is not preserved by {:?}", pi.image())
        })?;
    }
    Ok("nine special groups, 10000 refutations".into())
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Check); 11] = [
        (1, full_range),
        (2, small_existence),
        (3, base_map_exact),
        (4, two_p_residual),
        (5, glued_cases),
        (6, counting_bounds),
        (7, hasse_weil),
        (8, lemma_sums),
        (9, lift_pairs),
        (10, descent_soundness),
        (11, abelian_groups),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, check) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => {
                println!("criterion {id}: PASS");
                eprintln!("  {detail} ({secs:.1} s)");
            }
            Err(why) => {
                failed += 1;
                println!("criterion {id}: FAIL");
                eprintln!("  {why} ({secs:.1} s)");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
