use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use finegrain::instances::{deserialize, generate, serialize, validate, GenParams, Instance, Provenance};
use finegrain::ledger::{parse_ledger, BoundCheck, LedgerRow, ReductionError};
use finegrain::pipeline::{generate_source, lookup, run, shrink, verify, Options, PipelineError, PIPELINES};
use rayon::prelude::*;
use serde_json::json;

#[derive(Parser)]
#[command(name = "finegrain", version, about = "Run fine-grained reductions and check them against brute force")]
struct Cli {
    /// Worker threads for independent oracle calls.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a seeded random instance.
    Gen {
        kind: String,
        /// Generator settings as key=value; a bare word sets the variant.
        params: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reduce one source instance and write the targets and the decoded answer.
    Reduce {
        pipeline: String,
        input: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        knobs: Knobs,
    },
    /// Compare decoded answers with the reference oracle over seeded trials.
    Verify {
        pipeline: String,
        /// Fixed source instance; otherwise a fresh one is generated per trial.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Generator overrides as key=value.
        params: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        /// Size of generated instances.
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[command(flatten)]
        knobs: Knobs,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Print measured sizes against their bounds from a ledger file.
    Account { ledger: PathBuf },
    /// List the registered pipelines.
    Pipelines,
}

#[derive(Args, Clone)]
struct Knobs {
    /// Strip width, block size or bucket parameter.
    #[arg(long)]
    d: Option<usize>,
    /// Bucket count for 3SUM to exact triangle.
    #[arg(long)]
    g: Option<usize>,
    /// Exponent of the heavy cutoffs.
    #[arg(long)]
    eps: Option<f64>,
    /// Low-triple threshold of the min-plus bit rounds.
    #[arg(long)]
    threshold: Option<usize>,
    /// Largest range searched for a progression-free color set.
    #[arg(long)]
    limit: Option<u64>,
    /// Seal source reals so only counted comparisons can read them.
    #[arg(long)]
    tattle: bool,
}

impl Knobs {
    fn options(&self) -> Options {
        Options { d: self.d, g: self.g, eps: self.eps, threshold: self.threshold, limit: self.limit, tattle: self.tattle, fault: false }
    }
}

/// Exit status carried through anyhow.
#[derive(Debug)]
struct Mismatch;

impl std::fmt::Display for Mismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
        f.write_str("verification failed")
    }
}

impl std::error::Error for Mismatch {}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.is::<Mismatch>() {
        return 1;
    }
    let budget = |r: &ReductionError| matches!(r, ReductionError::RetryBudgetExhausted { .. });
    for cause in e.chain() {
        if let Some(PipelineError::Reduction(r)) = cause.downcast_ref::<PipelineError>() {
            if budget(r) {
                return 3;
            }
        }
        if cause.downcast_ref::<ReductionError>().is_some_and(budget) {
            return 3;
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let res = match cli.cmd {
        Cmd::Gen { kind, params, seed, out } => cmd_gen(&kind, &params, seed, out.as_deref()),
        Cmd::Reduce { pipeline, input, seed, out, knobs } => cmd_reduce(&pipeline, &input, seed, &out, &knobs),
        Cmd::Verify { pipeline, input, params, seed, trials, n, knobs, inject_fault } => {
            cmd_verify(&pipeline, input.as_deref(), &params, seed, trials, n, &knobs, inject_fault)
        }
        Cmd::Account { ledger } => cmd_account(&ledger),
        Cmd::Pipelines => {
            for p in PIPELINES {
                println!("{:<18} {:<14} -> {:<9} {}", p.id, p.source, p.target, p.chain);
            }
            Ok(())
        }
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !e.is::<Mismatch>() {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Writes through a temporary file in the same directory, then renames.
fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating a file in {}", dir.display()))?;
    tmp.write_all(text.as_bytes())?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn load(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let (inst, _) = deserialize(&text).with_context(|| format!("parsing {}", path.display()))?;
    validate(&inst).map_err(|v| anyhow::anyhow!("{}: {v}", path.display()))?;
    Ok(inst)
}

fn require_seed(pipeline: &str, seed: Option<u64>) -> Result<u64> {
    let p = lookup(pipeline)?;
    match seed {
        Some(s) => Ok(s),
        None if p.randomized => bail!("pipeline {pipeline} is randomized; pass --seed"),
        None => Ok(0),
    }
}

fn cmd_gen(kind: &str, params: &[String], seed: Option<u64>, out: Option<&Path>) -> Result<()> {
    let mut seed = seed;
    let mut pairs = Vec::new();
    for p in params {
        match p.split_once('=') {
            Some(("seed", v)) => seed = Some(v.parse().with_context(|| format!("bad seed {v:?}"))?),
            Some(_) => pairs.push(p.clone()),
            None => pairs.push(format!("variant={p}")),
        }
    }
    let seed = seed.unwrap_or(0);
    let inst = generate(kind, &GenParams::from_pairs(&pairs)?, seed)?;
    let prov = Provenance { seed: Some(seed), construction: Some(format!("gen {kind}")), ..Default::default() };
    let text = serialize(&inst, &prov);
    match out {
        Some(path) => write_atomic(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_reduce(pipeline: &str, input: &Path, seed: Option<u64>, out: &Path, knobs: &Knobs) -> Result<()> {
    let p = lookup(pipeline)?;
    let seed = require_seed(pipeline, seed)?;
    let src = load(input)?;
    let res = run(pipeline, &src, &knobs.options(), seed, true)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut names = Vec::new();
    for (i, t) in res.targets.iter().enumerate() {
        let name = format!("target-{i:04}.json");
        let prov = Provenance {
            pipeline: Some(pipeline.to_string()),
            seed: Some(seed),
            construction: Some(p.chain.to_string()),
            key: Some(i.to_string()),
        };
        write_atomic(&out.join(&name), &serialize(t, &prov))?;
        names.push(name);
    }
    let decode = json!({
        "pipeline": pipeline,
        "seed": seed,
        "source": input.file_name().map(|f| f.to_string_lossy().into_owned()),
        "targets": names,
        "answer": res.answer.to_json(),
    });
    write_atomic(&out.join("decode.json"), &(serde_json::to_string_pretty(&decode)? + "\n"))?;
    let mut ledger = OpenOptions::new().create(true).append(true).open(out.join("ledger.jsonl"))?;
    ledger.write_all((res.ledger.to_line() + "\n").as_bytes())?;
    println!("{pipeline}: {} targets, {} edges, {} comparisons in {}", names.len(), res.ledger.edges, res.ledger.comparisons, out.display());
    for v in res.ledger.violations() {
        eprintln!("warning: {} measured {} over bound {} ({})", v.name, v.measured, v.bound, v.formula);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    pipeline: &str,
    input: Option<&Path>,
    params: &[String],
    seed: Option<u64>,
    trials: usize,
    n: usize,
    knobs: &Knobs,
    fault: bool,
) -> Result<()> {
    let seed = require_seed(pipeline, seed)?;
    let fixed = input.map(load).transpose()?;
    if trials == 0 {
        eprintln!("warning: zero trials requested; nothing was checked");
        println!("{pipeline}: 0/0 trials agree (vacuous)");
        return Ok(());
    }
    let opts = Options { fault, ..knobs.options() };
    let outcomes: Vec<Result<(Instance, bool, usize)>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = seed.wrapping_add(t as u64);
            let src = match &fixed {
                Some(x) => x.clone(),
                None => generate_source(pipeline, n, params, s)?,
            };
            let trial = verify(pipeline, &src, &opts, s)?;
            Ok((src, trial.agree, trial.run.ledger.violations().len()))
        })
        .collect();
    let mut failed = None;
    let mut passed = 0;
    for (t, o) in outcomes.into_iter().enumerate() {
        let (src, agree, over) = o?;
        let s = seed.wrapping_add(t as u64);
        println!("trial {t} seed {s}: {}{}", if agree { "agree" } else { "MISMATCH" }, if over > 0 { format!(", {over} bounds exceeded") } else { String::new() });
        if agree {
            passed += 1;
        } else if failed.is_none() {
            failed = Some((src, s));
        }
    }
    println!("{pipeline}: {passed}/{trials} trials agree");
    if let Some((src, s)) = failed {
        let small = shrink(pipeline, &src, &opts, s);
        println!("smallest failing instance (seed {s}):");
        print!("{}", serialize(&small, &Provenance { pipeline: Some(pipeline.to_string()), seed: Some(s), ..Default::default() }));
        return Err(Mismatch.into());
    }
    Ok(())
}

fn cmd_account(path: &Path) -> Result<()> {
    let text = fs::read_to_string(path).map_err(|e| anyhow::anyhow!("MissingLedger: {}: {e}", path.display()))?;
    let rows = parse_ledger(&text).with_context(|| format!("parsing {}", path.display()))?;
    if rows.is_empty() {
        bail!("MissingLedger: {} has no rows", path.display());
    }
    let mut groups: BTreeMap<&str, Vec<&LedgerRow>> = BTreeMap::new();
    for r in &rows {
        groups.entry(r.pipeline.as_str()).or_default().push(r);
    }
    let mut over = 0;
    for (pipeline, rows) in groups {
        println!("== {pipeline} ({} runs)", rows.len());
        println!("  {:>8} {:>9} {:>10} {:>10} {:>6} {:>12} {:>7}", "seed", "instances", "edges", "nodes", "degen", "comparisons", "rounds");
        for r in &rows {
            println!("  {:>8} {:>9} {:>10} {:>10} {:>6} {:>12} {:>7}", r.seed, r.instances, r.edges, r.nodes, r.degeneracy, r.comparisons, r.rounds);
        }
        // worst run per check name
        let mut worst: Vec<&BoundCheck> = Vec::new();
        for c in rows.iter().flat_map(|r| &r.checks) {
            match worst.iter_mut().find(|w| w.name == c.name) {
                Some(w) if c.ratio() > w.ratio() => *w = c,
                Some(_) => {}
                None => worst.push(c),
            }
        }
        if !worst.is_empty() {
            println!("  {:<36} {:>10} {:>10} {:>7}  formula", "check", "measured", "bound", "ratio");
        }
        for c in worst {
            let flag = if c.ratio() > 1.0 {
                over += 1;
                "  OVER"
            } else {
                ""
            };
            println!("  {:<36} {:>10} {:>10} {:>7.3}  {}{flag}", c.name, c.measured, c.bound, c.ratio(), c.formula);
        }
    }
    if over > 0 {
        println!("{over} checks exceed their bound");
    }
    Ok(())
}
