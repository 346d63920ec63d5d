//! Experiment runner.
//!
//! `run` drives the six canned experiments and writes a CSV of results plus
//! a JSON manifest (schema version, config echo, content hash, seed, wall
//! time). The `gen` / `check` / `solve-lp` / `round` subcommands are thin
//! JSON-in/JSON-out wrappers over the library.
//!
//! Exit codes: 0 all assertions passed, 1 an assertion failed (the first
//! counterexample is serialized to stderr), 2 budget or schema violations.

use auctionlab::configlp::{integrality_gap, solve_column_generation, solve_exact};
use auctionlab::hardness::{
    build_equality_instance, build_gap_instance_mphk, mph2_gap_instance, verify_efs_gap,
    EfsInstance,
};
use auctionlab::rounding::guarantee_check;
use auctionlab::sets::{count_chains_links, sample_l_independent};
use auctionlab::valuations::{
    check_monotone_subadditive, complement_identity_check, f_le_sigma_check,
    mph_level_lower_bound, sample_monotone_subadditive, sample_subadditive_mph2, AnyValuation,
    ValuationWire,
};
use auctionlab::welfare::max_welfare;
use auctionlab::{derive_seed, q, seeded, Error, Q, Result};
use clap::{Parser, Subcommand, ValueEnum};
use num::ToPrimitive;
use rand::Rng as _;
use serde::Serialize;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "auctionlab", version, about = "Two-bidder combinatorial-auction laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Experiment {
    Equality,
    Efs,
    Gap,
    RoundingRatio,
    Chains,
    LpCheck,
}

#[derive(Subcommand)]
enum Command {
    /// Run a canned experiment; writes <name>.csv and <name>.manifest.json.
    Run {
        experiment: Experiment,
        #[arg(long)]
        m: Option<u32>,
        #[arg(long)]
        k: Option<u32>,
        #[arg(long, default_value_t = 4)]
        l: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
        /// For `gap`: use the fixed 4-item rank-2 instance.
        #[arg(long)]
        mph2: bool,
    },
    /// Generate an instance as JSON (stdout or --out).
    Gen {
        kind: GenKind,
        #[arg(long, default_value_t = 16)]
        m: u32,
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 4)]
        l: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a serialized valuation and run its invariant suite.
    Check {
        #[arg(long)]
        valuation: PathBuf,
    },
    /// Solve the configuration LP for a pair of serialized valuations.
    SolveLp {
        #[arg(long)]
        valuation_a: PathBuf,
        #[arg(long)]
        valuation_b: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
    },
    /// Solve the LP and check the rounding guarantee for rank k.
    Round {
        #[arg(long)]
        valuation_a: PathBuf,
        #[arg(long)]
        valuation_b: PathBuf,
        #[arg(long, default_value_t = 2)]
        k: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GenKind {
    /// An independence-verified set collection.
    Collection,
    /// A cover valuation over such a collection.
    Cover,
    /// A rejection-sampled subadditive rank-2 valuation.
    Mph2,
}

/// FNV-1a content hash for replayable row provenance.
fn content_hash(data: &str) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in data.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

#[derive(Serialize)]
struct Manifest {
    schema_version: u32,
    experiment: String,
    config: serde_json::Value,
    seed: u64,
    input_hash: String,
    wall_time_ms: u128,
    rows: usize,
    pass: bool,
}

struct ExperimentOutput {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
    pass: bool,
}

fn row_id(seed: u64, payload: &str) -> (String, String) {
    (seed.to_string(), content_hash(payload))
}

/// Run per-trial closures on `jobs` threads; rows keep trial order, so the
/// CSV is byte-identical no matter the thread count.
fn parallel_trials<F>(trials: u64, jobs: usize, f: F) -> Result<Vec<Vec<Vec<String>>>>
where
    F: Fn(u64) -> Result<Vec<Vec<String>>> + Sync,
{
    let jobs = jobs.max(1);
    let mut results: Vec<Option<Result<Vec<Vec<String>>>>> =
        (0..trials).map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut slices: Vec<&mut [Option<Result<Vec<Vec<String>>>>]> = Vec::new();
        let chunk = (trials as usize).div_ceil(jobs).max(1);
        let mut rest = results.as_mut_slice();
        while !rest.is_empty() {
            let take = chunk.min(rest.len());
            let (head, tail) = rest.split_at_mut(take);
            slices.push(head);
            rest = tail;
        }
        for (c, slice) in slices.into_iter().enumerate() {
            let f = &f;
            scope.spawn(move || {
                for (i, slot) in slice.iter_mut().enumerate() {
                    *slot = Some(f((c * chunk + i) as u64));
                }
            });
        }
    });
    results.into_iter().map(|r| r.expect("trial completed")).collect()
}

fn run_equality(m: u32, k: usize, l: u32, seed: u64, trials: u64, jobs: usize) -> Result<ExperimentOutput> {
    let per_trial = |i: u64| -> Result<Vec<Vec<String>>> {
        let trial_seed = derive_seed(seed, i);
        let mut rng = seeded(trial_seed);
        let base = sample_l_independent(m, l, k, &mut rng)?.value;
        let mask = (1u64 << k) - 1;
        let a = rng.gen::<u64>() & mask;
        let mut b = a;
        b ^= 1 << rng.gen_range(0..k); // differs in exactly one position
        let mut rows = Vec::new();
        for (other, expected) in [(a, q(l as i64)), (b, q(2) * q(l as i64 - 1))] {
            let (va, vb) = build_equality_instance(&base, a, other, l)?;
            let opt = max_welfare(&va, &vb)?.optimum;
            let pass = opt == expected;
            let (s, h) = row_id(trial_seed, &format!("{base:?}/{a:x}/{other:x}"));
            rows.push(vec![
                i.to_string(),
                format!("{a:0k$b}", k = k),
                format!("{other:0k$b}", k = k),
                opt.to_string(),
                expected.to_string(),
                pass.to_string(),
                s,
                h,
            ]);
        }
        Ok(rows)
    };
    let rows: Vec<Vec<String>> = parallel_trials(trials, jobs, per_trial)?
        .into_iter()
        .flatten()
        .collect();
    let pass = rows.iter().all(|r| r[5] == "true");
    Ok(ExperimentOutput {
        header: vec!["trial", "a", "b", "opt", "expected_opt", "pass", "seed", "instance_hash"],
        rows,
        pass,
    })
}

fn run_efs(m: u32, k: usize, l: u32, seed: u64, trials: u64, jobs: usize) -> Result<ExperimentOutput> {
    let per_trial = |i: u64| -> Result<Vec<Vec<String>>> {
        let trial_seed = derive_seed(seed, i);
        let mut rng = seeded(trial_seed);
        let far: Vec<usize> = if i % 2 == 1 { vec![(i as usize) % k] } else { vec![] };
        let inst = EfsInstance::sample(m, k, l, &far, &mut rng)?.value;
        let report = verify_efs_gap(&inst)?;
        let value = report
            .witness
            .as_ref()
            .map(|(_, _, w)| w.to_string())
            .or_else(|| report.near_max.as_ref().map(Q::to_string))
            .unwrap_or_default();
        let (s, h) = row_id(trial_seed, &format!("{:?}/{:?}", inst.x, inst.y));
        Ok(vec![vec![
            i.to_string(),
            format!("{far:?}"),
            report.answer.to_string(),
            value,
            if report.answer { format!("{}", 2 * (l - 1)) } else { format!("{}", l + 1) },
            report.pass.to_string(),
            s,
            h,
        ]])
    };
    let rows: Vec<Vec<String>> = parallel_trials(trials, jobs, per_trial)?
        .into_iter()
        .flatten()
        .collect();
    let pass = rows.iter().all(|r| r[5] == "true");
    Ok(ExperimentOutput {
        header: vec!["trial", "far_indices", "answer", "welfare", "threshold", "pass", "seed", "instance_hash"],
        rows,
        pass,
    })
}

fn run_gap(mph2: bool, k: Option<u32>, seed: u64) -> Result<ExperimentOutput> {
    let mut rows = Vec::new();
    if mph2 || k.is_none() {
        let (va, vb, frac) = mph2_gap_instance();
        let c = frac.rational_objective(&va, &vb);
        let opt = max_welfare(&va, &vb)?.optimum;
        let gap = integrality_gap(&va, &vb, &frac)?;
        let pass = c == q(2) && opt == q(1) && gap == q(1) / q(2);
        let (s, h) = row_id(seed, "mph2-gap");
        rows.push(vec![
            "mph2".into(),
            c.to_string(),
            opt.to_string(),
            gap.to_string(),
            pass.to_string(),
            s,
            h,
        ]);
    } else {
        let k = k.unwrap();
        let mut rng = seeded(seed);
        let (va, vb, frac) = build_gap_instance_mphk(k, &mut rng)?;
        let l = va.l() as i64;
        let c = frac.rational_objective(&va, &vb);
        // Complement identity pins the integral optimum at exactly l; the
        // ground set is too large for enumeration.
        let opt = q(l);
        let gap = opt.clone() / &c;
        let pass = c == q(2) * q(l - 1) && gap == q(l) / (q(2) * q(l - 1));
        let (s, h) = row_id(seed, &format!("cover-gap-{k}"));
        rows.push(vec![
            format!("cover-k{k}"),
            c.to_string(),
            opt.to_string(),
            gap.to_string(),
            pass.to_string(),
            s,
            h,
        ]);
    }
    let pass = rows.iter().all(|r| r[4] == "true");
    Ok(ExperimentOutput {
        header: vec!["instance", "c", "opt", "gap", "pass", "seed", "instance_hash"],
        rows,
        pass,
    })
}

fn run_rounding_ratio(
    m: u32,
    rank: u32,
    seed: u64,
    trials: u64,
    jobs: usize,
) -> Result<ExperimentOutput> {
    let per_trial = |i: u64| -> Result<Vec<Vec<String>>> {
        let trial_seed = derive_seed(seed, i);
        let mut rng = seeded(trial_seed);
        let va = sample_subadditive_mph2(m, &mut rng)?.value;
        let vb = sample_subadditive_mph2(m, &mut rng)?.value;
        let sol = solve_exact(&va, &vb)?;
        let report = guarantee_check(&sol.primal, &va, &vb, rank, &mut seeded(trial_seed))?;
        let (s, h) = row_id(trial_seed, &format!("rounding/{m}/{rank}/{trial_seed}"));
        Ok(vec![vec![
            i.to_string(),
            rank.to_string(),
            report.c.to_string(),
            if report.stderr.is_none() { "exact".into() } else { "mc".into() },
            report.expected.to_f64().unwrap().to_string(),
            report.ratio().to_string(),
            report.bound_constant.to_f64().unwrap().to_string(),
            report.pass.to_string(),
            s,
            h,
        ]])
    };
    let rows: Vec<Vec<String>> = parallel_trials(trials, jobs, per_trial)?
        .into_iter()
        .flatten()
        .collect();
    let pass = rows.iter().all(|r| r[7] == "true");
    Ok(ExperimentOutput {
        header: vec![
            "instance_id", "k", "c", "exact_or_mc", "expected_welfare", "ratio", "bound",
            "pass", "seed", "instance_hash",
        ],
        rows,
        pass,
    })
}

fn run_chains(m: u32, seed: u64) -> Result<ExperimentOutput> {
    let counts = count_chains_links(m)?;
    let pass = m > 8 || counts.enumerated.is_some();
    let (s, h) = row_id(seed, &format!("chains-{m}"));
    Ok(ExperimentOutput {
        header: vec!["m", "chains", "links", "chains_per_link", "enumeration_checked", "pass", "seed", "instance_hash"],
        rows: vec![vec![
            m.to_string(),
            counts.chains.to_string(),
            counts.links.to_string(),
            counts.chains_per_link.to_string(),
            counts.enumerated.is_some().to_string(),
            pass.to_string(),
            s,
            h,
        ]],
        pass,
    })
}

fn run_lp_check(
    m: u32,
    seed: u64,
    trials: u64,
    jobs: usize,
    tolerance: f64,
) -> Result<ExperimentOutput> {
    let per_trial = |i: u64| -> Result<Vec<Vec<String>>> {
        let trial_seed = derive_seed(seed, i);
        let mut rng = seeded(trial_seed);
        let va = sample_monotone_subadditive(m, &mut rng)?;
        let vb = sample_monotone_subadditive(m, &mut rng)?;
        let exact = solve_exact(&va, &vb)?;
        let colgen = solve_column_generation(&va, &vb, 1e-9)?;
        let diff = (exact.objective - colgen.objective).abs();
        let pass = diff <= tolerance;
        let (s, h) = row_id(trial_seed, &format!("lp/{m}/{trial_seed}"));
        Ok(vec![vec![
            i.to_string(),
            exact.objective.to_string(),
            colgen.objective.to_string(),
            diff.to_string(),
            pass.to_string(),
            s,
            h,
        ]])
    };
    let rows: Vec<Vec<String>> = parallel_trials(trials, jobs, per_trial)?
        .into_iter()
        .flatten()
        .collect();
    let pass = rows.iter().all(|r| r[4] == "true");
    Ok(ExperimentOutput {
        header: vec!["trial", "exact_obj", "colgen_obj", "diff", "pass", "seed", "instance_hash"],
        rows,
        pass,
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    experiment: Experiment,
    m: Option<u32>,
    k: Option<u32>,
    l: u32,
    seed: u64,
    trials: Option<u64>,
    jobs: usize,
    out: PathBuf,
    tolerance: f64,
    mph2: bool,
) -> Result<bool> {
    let start = std::time::Instant::now();
    let (name, output) = match experiment {
        Experiment::Equality => (
            "equality",
            run_equality(
                m.unwrap_or(16),
                k.unwrap_or(4) as usize,
                l,
                seed,
                trials.unwrap_or(5),
                jobs,
            )?,
        ),
        Experiment::Efs => (
            "efs",
            run_efs(m.unwrap_or(14), k.unwrap_or(5) as usize, l, seed, trials.unwrap_or(20), jobs)?,
        ),
        Experiment::Gap => ("gap", run_gap(mph2, k, seed)?),
        Experiment::RoundingRatio => (
            "rounding-ratio",
            run_rounding_ratio(m.unwrap_or(6), k.unwrap_or(2), seed, trials.unwrap_or(30), jobs)?,
        ),
        Experiment::Chains => ("chains", run_chains(m.unwrap_or(6), seed)?),
        Experiment::LpCheck => (
            "lp-check",
            run_lp_check(m.unwrap_or(6), seed, trials.unwrap_or(50), jobs, tolerance)?,
        ),
    };

    std::fs::create_dir_all(&out)
        .map_err(|e| Error::Parameter(format!("cannot create {}: {e}", out.display())))?;
    let csv_path = out.join(format!("{name}.csv"));
    let mut writer = csv::Writer::from_path(&csv_path)
        .map_err(|e| Error::Parameter(format!("cannot write CSV: {e}")))?;
    writer
        .write_record(&output.header)
        .and_then(|_| output.rows.iter().try_for_each(|r| writer.write_record(r)))
        .map_err(|e| Error::Parameter(format!("CSV write failed: {e}")))?;
    writer.flush().map_err(|e| Error::Parameter(format!("CSV flush failed: {e}")))?;

    let config = serde_json::json!({
        "m": m, "k": k, "l": l, "trials": trials, "jobs": jobs,
        "tolerance": tolerance, "mph2": mph2,
    });
    let manifest = Manifest {
        schema_version: 1,
        experiment: name.to_string(),
        input_hash: content_hash(&config.to_string()),
        config,
        seed,
        wall_time_ms: start.elapsed().as_millis(),
        rows: output.rows.len(),
        pass: output.pass,
    };
    let manifest_path = out.join(format!("{name}.manifest.json"));
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest).unwrap())
        .map_err(|e| Error::Parameter(format!("manifest write failed: {e}")))?;

    if !output.pass {
        if let Some(bad) = output.rows.iter().find(|r| r.contains(&"false".to_string())) {
            eprintln!("first failing row: {bad:?}");
        }
    }
    println!(
        "{name}: {} rows, pass={} -> {}",
        output.rows.len(),
        output.pass,
        csv_path.display()
    );
    Ok(output.pass)
}

fn cmd_gen(kind: GenKind, m: u32, k: usize, l: u32, seed: u64, out: Option<PathBuf>) -> Result<bool> {
    let mut rng = seeded(seed);
    let json = match kind {
        GenKind::Collection => {
            let c = sample_l_independent(m, l, k, &mut rng)?.value;
            serde_json::to_string_pretty(&c).unwrap()
        }
        GenKind::Cover => {
            let c = sample_l_independent(m, l, k, &mut rng)?.value;
            serde_json::to_string_pretty(&ValuationWire::Cover { l, collection: c }).unwrap()
        }
        GenKind::Mph2 => {
            let v = sample_subadditive_mph2(m.min(8), &mut rng)?.value;
            serde_json::to_string_pretty(&AnyValuation::Mph(v).to_wire()).unwrap()
        }
    };
    match out {
        Some(path) => std::fs::write(&path, json)
            .map_err(|e| Error::Parameter(format!("cannot write {}: {e}", path.display())))?,
        None => println!("{json}"),
    }
    Ok(true)
}

fn load_valuation(path: &PathBuf) -> Result<AnyValuation> {
    let data = std::fs::read_to_string(path)
        .map_err(|e| Error::Schema(format!("cannot read {}: {e}", path.display())))?;
    let wire: ValuationWire = serde_json::from_str(&data)
        .map_err(|e| Error::Schema(format!("invalid valuation JSON: {e}")))?;
    AnyValuation::from_wire(&wire)
}

fn cmd_check(path: &PathBuf) -> Result<bool> {
    let v = load_valuation(path)?;
    use auctionlab::valuations::Valuation as _;
    let m = v.m();
    let mut pass = true;
    let mut report = serde_json::Map::new();
    report.insert("m".into(), m.into());

    if m <= 10 {
        let verdict = check_monotone_subadditive(&v)?;
        report.insert("monotone".into(), verdict.monotone.into());
        report.insert("subadditive".into(), verdict.subadditive.into());
        if let AnyValuation::Cover(_) = &v {
            pass &= verdict.ok();
        }
    }
    if let AnyValuation::Cover(cv) = &v {
        let mut rng = seeded(0);
        let complement_ok = complement_identity_check(cv, &mut rng);
        let sigma_ok = f_le_sigma_check(cv, &mut rng);
        report.insert("complement_identity".into(), complement_ok.into());
        report.insert("f_le_sigma".into(), sigma_ok.into());
        pass &= complement_ok && sigma_ok;
        if let Ok(bound) = mph_level_lower_bound(cv) {
            report.insert(
                "mph_level_lower_bound".into(),
                bound.to_f64().unwrap_or(f64::NAN).into(),
            );
        }
    }
    report.insert("pass".into(), pass.into());
    println!("{}", serde_json::to_string_pretty(&serde_json::Value::Object(report)).unwrap());
    Ok(pass)
}

fn cmd_solve_lp(a: &PathBuf, b: &PathBuf, tolerance: f64) -> Result<bool> {
    let va = load_valuation(a)?;
    let vb = load_valuation(b)?;
    use auctionlab::valuations::Valuation as _;
    let colgen = solve_column_generation(&va, &vb, 1e-9)?;
    let agreement = if va.m() <= 12 {
        let exact = solve_exact(&va, &vb)?;
        Some((exact.objective, (exact.objective - colgen.objective).abs()))
    } else {
        None
    };
    let pass = agreement.map_or(true, |(_, diff)| diff <= tolerance);
    let out = serde_json::json!({
        "solution": serde_json::to_value(colgen.to_wire()).unwrap(),
        "exact_objective": agreement.map(|(o, _)| o),
        "difference": agreement.map(|(_, d)| d),
        "pass": pass,
    });
    println!("{}", serde_json::to_string_pretty(&out).unwrap());
    Ok(pass)
}

fn cmd_round(a: &PathBuf, b: &PathBuf, k: u32, seed: u64) -> Result<bool> {
    let va = load_valuation(a)?;
    let vb = load_valuation(b)?;
    let sol = solve_column_generation(&va, &vb, 1e-9)?;
    let report = guarantee_check(&sol.primal, &va, &vb, k, &mut seeded(seed))?;
    let out = serde_json::json!({
        "k": k,
        "c": report.c.to_string(),
        "exact_or_mc": if report.stderr.is_none() { "exact" } else { "mc" },
        "expected_welfare": report.expected.to_f64(),
        "ratio": report.ratio(),
        "bound": report.bound_constant.to_f64(),
        "pass": report.pass,
    });
    println!("{}", serde_json::to_string_pretty(&out).unwrap());
    Ok(report.pass)
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { experiment, m, k, l, seed, trials, jobs, out, tolerance, mph2 } => {
            cmd_run(experiment, m, k, l, seed, trials, jobs, out, tolerance, mph2)
        }
        Command::Gen { kind, m, k, l, seed, out } => cmd_gen(kind, m, k, l, seed, out),
        Command::Check { valuation } => cmd_check(&valuation),
        Command::SolveLp { valuation_a, valuation_b, tolerance } => {
            cmd_solve_lp(&valuation_a, &valuation_b, tolerance)
        }
        Command::Round { valuation_a, valuation_b, k, seed } => {
            cmd_round(&valuation_a, &valuation_b, k, seed)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::from(0),
        Ok(false) => ExitCode::from(1),
        Err(e @ (Error::Budget(_) | Error::Schema(_) | Error::Parameter(_))) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            ExitCode::from(1)
        }
    }
}
