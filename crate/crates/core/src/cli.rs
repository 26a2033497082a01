//! Command-line front end. Every command prints canonical JSON (sorted keys,
//! one value per line) and maps errors to exit codes 2 (bad input),
//! 3 (unmet precondition) and 4 (internal failure).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::checkers::{check_property, Property};
use crate::efx_fpo::{build_fisher_certificate, run_efx_fpo, RunOptions};
use crate::error::{Error, Result};
use crate::exante::{
    draw_from, empirical_lottery, enumerate_lottery, exact_report, random_permutation, sample_outcomes, MixtureMode,
    DEFAULT_PERMUTATION_BUDGET,
};
use crate::mixed_bobw::{Permutation, PropEfmSolver};
use crate::model::{
    to_canonical_json, validate_instance, Instance, IntegralAllocation, LotteryEntry, RandomizedAllocation,
    RawInstance,
};
use crate::rational::Rational;
use crate::two_agent::{solve_two_agent_efm, solve_two_agent_efx};

#[derive(Debug, Parser)]
#[command(name = "fairdiv", version, about = "Fair division solvers and certifying checkers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a solver on an instance.
    Solve(SolveArgs),
    /// Check a fairness or efficiency property of an allocation.
    Check(CheckArgs),
    /// Generate a random instance.
    Gen(GenArgs),
    /// Verify ex-ante and ex-post guarantees of a solver on an instance.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    TwoEfx,
    TwoEfm,
    PropEfm,
    EfxFpo,
}

impl Algorithm {
    /// The property every outcome of the algorithm is guaranteed to have.
    pub fn ex_post_guarantee(self) -> Property {
        match self {
            Algorithm::TwoEfx | Algorithm::EfxFpo => Property::Efx,
            Algorithm::TwoEfm => Property::Efxm,
            Algorithm::PropEfm => Property::Efm,
        }
    }

    fn uses_order(self) -> bool {
        matches!(self, Algorithm::PropEfm | Algorithm::EfxFpo)
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum)]
    algo: Algorithm,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Explicit picking order, e.g. "2,0,1".
    #[arg(long)]
    perm: Option<String>,
    /// Also emit the lottery over all picking orders.
    #[arg(long)]
    enumerate: bool,
    /// Emit market-equilibrium prices (efx-fpo only).
    #[arg(long)]
    certificate: bool,
    /// Emit per-round events as JSON lines before the result.
    #[arg(long)]
    trace: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[arg(long)]
    instance: PathBuf,
    /// An allocation, or a solver result with an "allocation" field.
    #[arg(long)]
    allocation: PathBuf,
    #[arg(long)]
    property: Property,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Family {
    BiValued,
    Binary,
    Uniform,
    Mixed,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    family: Family,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    a: u64,
    #[arg(long, default_value_t = 2)]
    b: u64,
    /// Probability that an entry takes the high value.
    #[arg(long, default_value_t = 0.5)]
    density: f64,
    /// Largest utility for the uniform family.
    #[arg(long, default_value_t = 10)]
    max: u64,
    /// Number of divisible goods for the mixed family.
    #[arg(long, default_value_t = 1)]
    divisible: usize,
    /// Largest utility of a divisible good for the mixed family.
    #[arg(long, default_value_t = 4)]
    mass: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Exact,
    Sample,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum)]
    algo: Algorithm,
    #[arg(long)]
    property: Property,
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    mode: Mode,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))
}

pub fn load_instance(path: &Path) -> Result<Instance> {
    validate_instance(read_json::<RawInstance>(path)?)
}

fn load_allocation(path: &Path) -> Result<IntegralAllocation> {
    let v: Value = read_json(path)?;
    let v = match v {
        Value::Object(mut o) if o.contains_key("allocation") => o.remove("allocation").expect("checked"),
        v => v,
    };
    serde_json::from_value(v).map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))
}

fn parse_perm(s: &str, n: usize) -> Result<Permutation> {
    let order = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| Error::Malformed(format!("permutation entry {t:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if order.len() != n {
        return Err(Error::WrongAgentCount { expected: n, found: order.len() });
    }
    Permutation::new(order)
}

fn two_agent_lottery(algo: Algorithm, inst: &Instance) -> Result<RandomizedAllocation> {
    match algo {
        Algorithm::TwoEfx => solve_two_agent_efx(inst),
        Algorithm::TwoEfm => solve_two_agent_efm(inst),
        _ => unreachable!("order-based algorithm"),
    }
}

type OrderSolver<'a> = Box<dyn Fn(&Permutation) -> Result<IntegralAllocation> + Sync + 'a>;

/// Solver as a function of the picking order.
fn order_solver(algo: Algorithm, inst: &Instance) -> Result<OrderSolver<'_>> {
    Ok(match algo {
        Algorithm::PropEfm => {
            let solver = PropEfmSolver::new(inst)?;
            Box::new(move |p| solver.solve(p))
        }
        Algorithm::EfxFpo => Box::new(move |p| Ok(run_efx_fpo(inst, p, RunOptions::default())?.0)),
        _ => unreachable!("two-agent algorithm"),
    })
}

struct Output {
    lines: Vec<String>,
    result: String,
}

fn cmd_solve(args: &SolveArgs) -> Result<Output> {
    let inst = load_instance(&args.instance)?;
    let n = inst.n();
    let mut lines = Vec::new();
    let mut result = serde_json::Map::new();
    if args.certificate && args.algo != Algorithm::EfxFpo {
        return Err(Error::Malformed("--certificate is only available for efx-fpo".into()));
    }
    if !args.algo.uses_order() {
        if args.perm.is_some() || args.trace {
            return Err(Error::Malformed("--perm and --trace need an order-based algorithm".into()));
        }
        let lottery = two_agent_lottery(args.algo, &inst)?;
        let drawn = draw_from(&lottery, &mut ChaCha8Rng::seed_from_u64(args.seed));
        result.insert("allocation".into(), serde_json::to_value(&drawn).expect("serializable"));
        result.insert("lottery".into(), serde_json::to_value(&lottery).expect("serializable"));
        return Ok(Output { lines, result: to_canonical_json(&result) });
    }

    let order = match &args.perm {
        Some(s) => parse_perm(s, n)?,
        None => Permutation::from_seed(n, args.seed),
    };
    let allocation = match args.algo {
        Algorithm::PropEfm => {
            let solver = PropEfmSolver::new(&inst)?;
            let draw = solver.solve_detailed(&order)?;
            if args.trace {
                if let Some(p) = solver.partial() {
                    lines.push(to_canonical_json(&json!({"event": "reduction", "partial": p})));
                }
                lines.push(to_canonical_json(&json!({"event": "before_fill", "goods": draw.before_fill})));
            }
            draw.allocation
        }
        Algorithm::EfxFpo => {
            let (alloc, trace) = run_efx_fpo(&inst, &order, RunOptions::default())?;
            if args.trace {
                for r in &trace.rounds {
                    let mut v = serde_json::to_value(r).expect("serializable");
                    v["event"] = json!("round");
                    lines.push(to_canonical_json(&v));
                }
                let mut v = serde_json::to_value(&trace.final_stage).expect("serializable");
                v["event"] = json!("final");
                lines.push(to_canonical_json(&v));
            }
            if args.certificate {
                let cert = build_fisher_certificate(&inst, &alloc, &trace)?;
                result.insert("certificate".into(), serde_json::to_value(&cert).expect("serializable"));
            }
            alloc
        }
        _ => unreachable!(),
    };
    result.insert("allocation".into(), serde_json::to_value(&allocation).expect("serializable"));
    result.insert("permutation".into(), serde_json::to_value(&order).expect("serializable"));
    if args.enumerate {
        let solver = order_solver(args.algo, &inst)?;
        let orders: Vec<Permutation> = itertools::Itertools::permutations(0..n, n)
            .map(|p| Permutation::new(p).expect("permutation"))
            .collect();
        let total = orders.len();
        if total as u128 > DEFAULT_PERMUTATION_BUDGET {
            return Err(Error::BudgetExceeded { required: total as u128, budget: DEFAULT_PERMUTATION_BUDGET });
        }
        let p = Rational::new(1, total as i64);
        let lottery = orders
            .iter()
            .map(|o| Ok(LotteryEntry { p: p.clone(), allocation: solver(o)? }))
            .collect::<Result<Vec<_>>>()?;
        result.insert("lottery".into(), serde_json::to_value(&lottery).expect("serializable"));
        result.insert("permutations".into(), serde_json::to_value(&orders).expect("serializable"));
    }
    Ok(Output { lines, result: to_canonical_json(&result) })
}

fn cmd_check(args: &CheckArgs) -> Result<(Output, bool)> {
    let inst = load_instance(&args.instance)?;
    let alloc = load_allocation(&args.allocation)?;
    let report = check_property(&inst, &alloc, args.property)?;
    let holds = report.holds;
    Ok((Output { lines: vec![], result: to_canonical_json(&report) }, holds))
}

fn generate(args: &GenArgs) -> Result<RawInstance> {
    if !(0.0..=1.0).contains(&args.density) {
        return Err(Error::Malformed(format!("density {} outside [0,1]", args.density)));
    }
    if matches!(args.family, Family::BiValued | Family::Mixed) && args.a >= args.b {
        return Err(Error::Malformed(format!("need a < b, got a = {}, b = {}", args.a, args.b)));
    }
    if args.n == 0 {
        return Err(Error::EmptyAgentSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let (lo, hi) = match args.family {
        Family::Binary => (0, 1),
        _ => (args.a, args.b),
    };
    let m_bar = if args.family == Family::Mixed { args.divisible } else { 0 };
    let utilities = (0..args.n)
        .map(|_| {
            let mut row: Vec<Rational> = (0..args.m)
                .map(|_| {
                    let v = match args.family {
                        Family::Uniform => rng.gen_range(0..=args.max),
                        _ if rng.gen_bool(args.density) => hi,
                        _ => lo,
                    };
                    Rational::from_integer(v as i64)
                })
                .collect();
            row.extend((0..m_bar).map(|_| Rational::from_integer(rng.gen_range(0..=args.mass) as i64)));
            row
        })
        .collect();
    Ok(RawInstance {
        agents: args.n,
        indivisible: (0..args.m).map(|g| format!("g{g}")).collect(),
        divisible: (0..m_bar).map(|k| format!("d{k}")).collect(),
        utilities,
    })
}

fn cmd_gen(args: &GenArgs) -> Result<Output> {
    let raw = generate(args)?;
    validate_instance(raw.clone())?;
    Ok(Output { lines: vec![], result: to_canonical_json(&raw) })
}

#[derive(Serialize)]
struct Guarantee {
    property: Property,
    holds: bool,
}

fn cmd_verify(args: &VerifyArgs) -> Result<(Output, bool)> {
    let inst = load_instance(&args.instance)?;
    if !matches!(args.property, Property::Ef | Property::Prop) {
        return Err(Error::Malformed("ex-ante verification supports ef and prop".into()));
    }
    let n = inst.n();
    let lottery = match (args.mode, args.algo.uses_order()) {
        (Mode::Exact, false) => two_agent_lottery(args.algo, &inst)?,
        (Mode::Exact, true) => enumerate_lottery(n, order_solver(args.algo, &inst)?, DEFAULT_PERMUTATION_BUDGET)?,
        (Mode::Sample, false) => {
            let lottery = two_agent_lottery(args.algo, &inst)?;
            empirical_lottery(sample_outcomes(args.seed, args.trials, |rng| Ok(draw_from(&lottery, rng)))?)
        }
        (Mode::Sample, true) => {
            let solver = order_solver(args.algo, &inst)?;
            empirical_lottery(sample_outcomes(args.seed, args.trials, |rng| solver(&random_permutation(n, rng)))?)
        }
    };
    let mut report = exact_report(&inst, &lottery, args.property)?;
    if args.mode == Mode::Sample {
        report.mode = MixtureMode::Sampled { trials: args.trials };
    }
    let guarantee = args.algo.ex_post_guarantee();
    let mut ex_post_ok = true;
    for e in &lottery.support {
        ex_post_ok &= check_property(&inst, &e.allocation, guarantee)?.holds;
    }
    let ok = report.verdicts.ex_ante.holds && ex_post_ok;
    let out = json!({
        "report": report,
        "guarantee": Guarantee { property: guarantee, holds: ex_post_ok },
    });
    Ok((Output { lines: vec![], result: to_canonical_json(&out) }, ok))
}

fn emit(out: &Output, file: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    let io = |e: std::io::Error| Error::Malformed(format!("write failed: {e}"));
    for l in &out.lines {
        stdout.write_all(l.as_bytes()).map_err(io)?;
    }
    match file {
        Some(path) => std::fs::write(path, &out.result).map_err(io),
        None => stdout.write_all(out.result.as_bytes()).map_err(io),
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match &cli.command {
        Command::Solve(a) => cmd_solve(a).and_then(|o| emit(&o, a.out.as_deref(), stdout).map(|_| 0)),
        Command::Check(a) => cmd_check(a).and_then(|(o, ok)| emit(&o, None, stdout).map(|_| if ok { 0 } else { 1 })),
        Command::Gen(a) => cmd_gen(a).and_then(|o| emit(&o, None, stdout).map(|_| 0)),
        Command::Verify(a) => {
            cmd_verify(a).and_then(|(o, ok)| emit(&o, None, stdout).map(|_| if ok { 0 } else { 1 }))
        }
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
