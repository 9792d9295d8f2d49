use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use apdperm::abelian::{group_verify, prop22_refute, AbelianError, AbelianGroup, GroupBuilder};
use apdperm::charsum::{lemma_sum_rows, LemmaId, LemmaSumRow};
use apdperm::constructions::{find_params, CaseKind, ConstructionError};
use apdperm::driver::{DriverError, Generator, GeneratorConfig};
use apdperm::par::Execution;
use apdperm::permcore::{terms_in, verify, ApReport, ApSpace, ApTriple, Perm};
use apdperm::search::{descent, DescentConfig, PermCache};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "apdperm",
    version,
    about = "Permutations of Z/nZ that destroy every three-term arithmetic progression"
)]
struct Cli {
    /// Worker threads for parallel loops (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Do not read or write the permutation cache.
    #[arg(long, global = true)]
    no_cache: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Plain,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an AP-destroying permutation of Z/nZ.
    Gen {
        n: u64,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Write the permutation here instead of embedding it in the report.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_verify: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check a permutation file.
    Verify { file: PathBuf },
    /// Parameters for a glued construction (2p, 3p, 5p, 7p).
    Params { case: String, p: u64 },
    /// CSV of existence sums for primes in [p_min, p_max].
    Charsum { id: String, p_min: u64, p_max: u64 },
    /// Run descent on Z/nZ.
    Descent {
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Samples per restart (default 50 n^2).
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long)]
        restarts: Option<u32>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Operations on a finite abelian group such as "3 x 3 x 5".
    Abelian {
        group: String,
        #[command(subcommand)]
        action: AbelianAction,
    },
}

#[derive(Subcommand)]
enum AbelianAction {
    /// Build a verified AP-destroying permutation (odd order above 7).
    Gen {
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check a permutation of the group's indices.
    Verify { file: PathBuf },
    /// For a group 2 x ... x 2 x H with |H| < 2^k, exhibit a preserved
    /// progression of the given permutation (identity by default).
    Refute {
        #[arg(long)]
        file: Option<PathBuf>,
    },
}

#[derive(Serialize, Default)]
struct CliReport {
    command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    group: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<String>,
    verified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    preserved_count: Option<u64>,
    timing_ms: u64,
    version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    permutation: Option<Perm>,
    #[serde(skip_serializing_if = "Option::is_none")]
    details: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

struct Outcome {
    report: CliReport,
    code: u8,
}

fn emit(report: &CliReport) {
    println!("{}", serde_json::to_string(report).expect("report serializes"));
}

fn write_perm(pi: &Perm, format: Format, path: &Path) -> Result<(), String> {
    let body = match format {
        Format::Json => pi.to_json() + "\n",
        Format::Plain => pi.to_plain(),
    };
    fs::write(path, body).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn read_perm(path: &Path) -> Result<Perm, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    Perm::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn cache(no_cache: bool) -> Option<PermCache> {
    (!no_cache).then(PermCache::from_env)
}

fn place(report: &mut CliReport, pi: Perm, format: Format, out: Option<PathBuf>) -> Result<(), String> {
    match out {
        Some(path) => {
            write_perm(&pi, format, &path)?;
            report.output = Some(path);
        }
        None => report.permutation = Some(pi),
    }
    Ok(())
}

fn failure(mut report: CliReport, code: u8, message: String) -> Outcome {
    eprintln!("error: {message}");
    report.error = Some(message);
    Outcome { report, code }
}

fn cmd_gen(
    base: CliReport,
    n: u64,
    format: Format,
    out: Option<PathBuf>,
    no_verify: bool,
    seed: u64,
    no_cache: bool,
) -> Outcome {
    let mut report = CliReport { n: Some(n), seed: Some(seed), ..base };
    let config = GeneratorConfig { no_verify, seed, cache: cache(no_cache), ..GeneratorConfig::default() };
    let generated = match Generator::new(config).generate(n) {
        Ok(g) => g,
        Err(e @ DriverError::Unsupported(_)) => return failure(report, 2, e.to_string()),
        Err(e @ DriverError::Zero) => return failure(report, 2, e.to_string()),
        Err(e) => return failure(report, 1, e.to_string()),
    };
    report.method = Some(generated.plan.summary());
    report.verified = generated.verified;
    report.preserved_count = generated.verified.then_some(generated.preserved_count);
    report.details = serde_json::to_value(&generated.leaves).ok();
    if let Err(e) = place(&mut report, generated.perm, format, out) {
        return failure(report, 1, e);
    }
    Outcome { report, code: 0 }
}

fn report_details(report: &ApReport) -> Option<serde_json::Value> {
    serde_json::to_value(report).ok()
}

fn cmd_verify(base: CliReport, file: &Path) -> Outcome {
    let pi = match read_perm(file) {
        Ok(p) => p,
        Err(e) => return failure(base, 1, e),
    };
    let ap = verify(&pi);
    let ok = ap.is_ap_destroying();
    let report = CliReport {
        n: Some(pi.n() as u64),
        verified: ok,
        preserved_count: Some(ap.preserved_count),
        details: report_details(&ap),
        ..base
    };
    Outcome { report, code: if ok { 0 } else { 1 } }
}

fn cmd_params(base: CliReport, case: &str, p: u64) -> Outcome {
    let case: CaseKind = match case.parse() {
        Ok(c) => c,
        Err(e) => return failure(base, 1, e),
    };
    let report = CliReport { n: Some(case.multiplier() * p), method: Some(format!("case_{case}")), ..base };
    match find_params(case, p) {
        Ok(params) => Outcome { report: CliReport { details: serde_json::to_value(params).ok(), ..report }, code: 0 },
        Err(e @ (ConstructionError::BelowThreshold { .. } | ConstructionError::NotPrime(_))) => {
            failure(report, 2, e.to_string())
        }
        Err(e) => failure(report, 1, e.to_string()),
    }
}

fn cmd_charsum(id: &str, p_min: u64, p_max: u64) -> u8 {
    let id: LemmaId = match id.parse() {
        Ok(id) => id,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    println!("{}", LemmaSumRow::CSV_HEADER);
    let mut code = 0;
    for row in lemma_sum_rows(id, p_min, p_max, Execution::default()) {
        match row {
            Ok(row) => {
                println!("{}", row.to_csv());
                if !row.pass {
                    code = 1;
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                code = 1;
            }
        }
    }
    code
}

fn cmd_descent(
    base: CliReport,
    n: usize,
    seed: u64,
    budget: Option<u64>,
    restarts: Option<u32>,
    format: Format,
    out: Option<PathBuf>,
) -> Outcome {
    let mut report = CliReport { n: Some(n as u64), seed: Some(seed), method: Some("descent".into()), ..base };
    if n == 0 {
        return failure(report, 2, "n must be positive".into());
    }
    let mut cfg = DescentConfig::with_seed(seed);
    cfg.max_iterations_per_restart = budget;
    if let Some(r) = restarts {
        cfg.max_restarts = r;
    }
    let mut outcome = descent(n, &cfg);
    report.verified = outcome.success;
    report.preserved_count = Some(outcome.final_preserved_count);
    let perm = outcome.perm.take();
    report.details = serde_json::to_value(&outcome).ok();
    let Some(pi) = perm else {
        return failure(report, 1, format!("no AP-destroying permutation of Z/{n}Z found"));
    };
    if let Err(e) = place(&mut report, pi, format, out) {
        return failure(report, 1, e);
    }
    Outcome { report, code: 0 }
}

fn abelian_code(e: &AbelianError) -> u8 {
    match e {
        AbelianError::Unsupported { .. } | AbelianError::Precondition(_) | AbelianError::Parse(_) => 2,
        _ => 1,
    }
}

fn cmd_abelian(base: CliReport, group: &str, action: AbelianAction, no_cache: bool) -> Outcome {
    let report = CliReport { group: Some(group.to_string()), ..base };
    let g: AbelianGroup = match group.parse() {
        Ok(g) => g,
        Err(e) => return failure(report, 2, e.to_string()),
    };
    let report = CliReport { group: Some(g.to_string()), ..report };
    match action {
        AbelianAction::Gen { format, out, seed } => {
            let builder = GroupBuilder::new(seed, cache(no_cache));
            let (pi, steps) = match builder.build(&g) {
                Ok(x) => x,
                Err(e) => return failure(report, abelian_code(&e), e.to_string()),
            };
            let mut report = CliReport {
                seed: Some(seed),
                method: steps.first().map(|s| s.method.clone()),
                verified: true,
                preserved_count: Some(0),
                details: serde_json::to_value(&steps).ok(),
                ..report
            };
            if let Err(e) = place(&mut report, pi, format, out) {
                return failure(report, 1, e);
            }
            Outcome { report, code: 0 }
        }
        AbelianAction::Verify { file } => {
            let pi = match read_perm(&file) {
                Ok(p) => p,
                Err(e) => return failure(report, 1, e),
            };
            match group_verify(&g, &pi) {
                Ok(ap) => {
                    let ok = ap.is_ap_destroying();
                    let report = CliReport {
                        verified: ok,
                        preserved_count: Some(ap.preserved_count),
                        details: report_details(&ap),
                        ..report
                    };
                    Outcome { report, code: if ok { 0 } else { 1 } }
                }
                Err(e) => failure(report, 1, e.to_string()),
            }
        }
        AbelianAction::Refute { file } => {
            let k = g.factors().iter().take_while(|&&c| c == 2).count();
            let h = AbelianGroup::new(&g.factors()[k..]).expect("factors of a valid group");
            let pi = match file {
                Some(f) => match read_perm(&f) {
                    Ok(p) => p,
                    Err(e) => return failure(report, 1, e),
                },
                None => Perm::identity(g.order()),
            };
            match prop22_refute(k, &h, &pi) {
                Ok(t) => {
                    #[derive(Serialize)]
                    struct Witness {
                        class: ApTriple,
                        terms: [usize; 3],
                    }
                    let w = Witness { class: t, terms: terms_in(&g, t.a, t.r) };
                    let report = CliReport { preserved_count: None, details: serde_json::to_value(w).ok(), ..report };
                    Outcome { report, code: 0 }
                }
                Err(e) => failure(report, abelian_code(&e), e.to_string()),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global() {
            eprintln!("warning: could not configure threads: {e}");
        }
    }
    let start = Instant::now();
    let base = CliReport {
        command: std::env::args().skip(1).collect::<Vec<_>>().join(" "),
        version: VERSION,
        ..CliReport::default()
    };
    let no_cache = cli.no_cache;
    let outcome = match cli.command {
        Command::Gen { n, format, out, no_verify, seed } => cmd_gen(base, n, format, out, no_verify, seed, no_cache),
        Command::Verify { file } => cmd_verify(base, &file),
        Command::Params { case, p } => cmd_params(base, &case, p),
        Command::Charsum { id, p_min, p_max } => return ExitCode::from(cmd_charsum(&id, p_min, p_max)),
        Command::Descent { n, seed, budget, restarts, format, out } => {
            cmd_descent(base, n, seed, budget, restarts, format, out)
        }
        Command::Abelian { group, action } => cmd_abelian(base, &group, action, no_cache),
    };
    let mut report = outcome.report;
    report.timing_ms = start.elapsed().as_millis() as u64;
    emit(&report);
    ExitCode::from(outcome.code)
}
