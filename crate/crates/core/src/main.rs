use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use indinv::infer::{
    check_induction, infer_inductive_invariant, result_file, run_round_stats, CheckMode, InferenceConfig, Status,
    StatsRow,
};
use indinv::instance::{state_space_size, Instance};
use indinv::reachability::{compute_reach, load_reach, save_reach};
use indinv::spec_lang::{parse_conjuncts, parse_grammar, parse_protocol, Protocol};

/// Exit status for a completed run whose verdict is negative.
const NEGATIVE: u8 = 2;

#[derive(Parser)]
#[command(name = "indinv", version, about = "Inductive invariant inference by CTI elimination")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Infer an inductive invariant strengthening the safety property.
    Infer(InferArgs),
    /// Count the reachable states of an instance.
    Reach(ReachArgs),
    /// Check whether a conjunction of invariants is inductive.
    Check(CheckArgs),
}

#[derive(Args)]
struct Target {
    /// Protocol file.
    protocol: PathBuf,
    /// Sort bindings such as "Server=s1,s2 Client=c1,c2". Defaults to the
    /// contents of a sibling .instance file.
    #[arg(long)]
    instance: Option<String>,
}

#[derive(Args)]
struct InferArgs {
    #[command(flatten)]
    target: Target,
    /// Grammar file. Defaults to a sibling .grammar file.
    #[arg(long)]
    grammar: Option<PathBuf>,
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    seed: u64,
    #[arg(long, default_value_t = 15_000)]
    n_lemmas: usize,
    #[arg(long, default_value_t = 50_000)]
    n_ctis: u64,
    #[arg(long, default_value_t = 10_000)]
    cti_cap: usize,
    /// Random walk depth for CTI generation.
    #[arg(long, default_value_t = 3)]
    depth: usize,
    #[arg(long, default_value_t = 3)]
    max_regen: usize,
    #[arg(long, default_value_t = 8)]
    workers_check: usize,
    #[arg(long, default_value_t = 4)]
    workers_cti: usize,
    #[arg(long, default_value_t = 4)]
    workers_elim: usize,
    #[arg(long, default_value_t = 5_000_000)]
    reach_limit: usize,
    /// Largest state space validated exhaustively; larger ones are sampled.
    #[arg(long, default_value_t = 10_000_000)]
    check_limit: u64,
    /// Write the structured result file here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReachArgs {
    #[command(flatten)]
    target: Target,
    #[arg(long, default_value_t = 5_000_000)]
    reach_limit: usize,
    /// Reuse or write a reachable-state cache at this path.
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    target: Target,
    /// File listing the conjuncts, one expression after another.
    invariants: PathBuf,
    #[arg(long, default_value_t = 10_000_000)]
    check_limit: u64,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn sibling(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

fn load(target: &Target) -> Result<(Protocol, Instance)> {
    let p = &target.protocol;
    let protocol = parse_protocol(&read(p)?).with_context(|| format!("in {}", p.display()))?;
    let text = match &target.instance {
        Some(s) => s.clone(),
        None => {
            let path = sibling(p, "instance");
            read(&path).context("no --instance given")?
        }
    };
    let inst = Instance::parse(&protocol, text.trim()).context("invalid instance")?;
    Ok((protocol, inst))
}

fn infer(a: &InferArgs) -> Result<u8> {
    let (protocol, inst) = load(&a.target)?;
    let gpath = a.grammar.clone().unwrap_or_else(|| sibling(&a.target.protocol, "grammar"));
    let grammar = parse_grammar(&read(&gpath)?, &protocol).with_context(|| format!("in {}", gpath.display()))?;
    for w in &grammar.warnings {
        eprintln!("warning: {w}");
    }
    let config = InferenceConfig {
        n_lemmas: a.n_lemmas,
        n_ctis: a.n_ctis,
        cti_cap: a.cti_cap,
        walk_depth: a.depth,
        max_regen_rounds: a.max_regen,
        seed: a.seed,
        reach_limit: a.reach_limit,
        term_schedule: None,
        workers_check: a.workers_check,
        workers_cti: a.workers_cti,
        workers_elim: a.workers_elim,
    };
    let result = infer_inductive_invariant(&protocol, &inst, &grammar, &config)?;

    let validated = if result.status == Status::Success {
        let mode = match state_space_size(&protocol, &inst) {
            Ok(n) if n <= a.check_limit => CheckMode::Exhaustive { limit: a.check_limit },
            _ => CheckMode::Sampled {
                samples: a.check_limit,
                seed: a.seed,
            },
        };
        let report = check_induction(&protocol, &inst, &result.conjuncts, mode)?;
        if !report.passed() {
            eprint!("{}", report.describe(&protocol, &inst, &result.conjuncts));
        }
        Some(report.passed())
    } else {
        None
    };

    let name = a.target.protocol.file_stem().unwrap_or_default().to_string_lossy();
    let row = run_round_stats(&result);
    println!(
        "{name}: {} in {:.2}s, {} conjuncts{}",
        result.status,
        row.time,
        result.conjuncts.len(),
        match validated {
            Some(true) => ", inductive on this instance",
            Some(false) => ", NOT inductive on this instance",
            None => "",
        }
    );
    for (i, c) in result.conjuncts.iter().enumerate() {
        println!("  [{i}] {}", c.text());
    }
    println!("{}", StatsRow::HEADER);
    println!("{}", row.text());
    println!("{}", row.machine());
    if let Some(out) = &a.out {
        fs::write(out, result_file(&result, &config, &inst, validated))
            .with_context(|| format!("cannot write {}", out.display()))?;
    }
    Ok(if validated == Some(true) { 0 } else { NEGATIVE })
}

fn reach(a: &ReachArgs) -> Result<u8> {
    let (protocol, inst) = load(&a.target)?;
    let set = match &a.cache {
        Some(path) if path.exists() => load_reach(path, &protocol, &inst)?,
        cache => {
            let t = Instant::now();
            let set = compute_reach(&protocol, &inst, a.reach_limit)?;
            eprintln!("explored to depth {} in {:.2}s", set.depth(), t.elapsed().as_secs_f64());
            if let Some(path) = cache {
                save_reach(&set, path)?;
            }
            set
        }
    };
    println!("{}", set.len());
    Ok(0)
}

fn check(a: &CheckArgs) -> Result<u8> {
    let (protocol, inst) = load(&a.target)?;
    let ind = parse_conjuncts(&read(&a.invariants)?, &protocol)
        .with_context(|| format!("in {}", a.invariants.display()))?;
    if ind.is_empty() {
        bail!("{} lists no conjuncts", a.invariants.display());
    }
    let report = check_induction(&protocol, &inst, &ind, CheckMode::Exhaustive { limit: a.check_limit })?;
    print!("{}", report.describe(&protocol, &inst, &ind));
    Ok(if report.passed() { 0 } else { NEGATIVE })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let r = match &cli.cmd {
        Cmd::Infer(a) => infer(a),
        Cmd::Reach(a) => reach(a),
        Cmd::Check(a) => check(a),
    };
    match r {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
