//! `haar-wtga`: greedy traces, boundary-case divergence runs, the Walsh
//! experiment and the verification suites.
//!
//! Exit status: 0 on success, 1 when a reported inequality or verdict fails,
//! 2 for usage errors and invalid parameters, 3 for unreadable input or
//! unwritable output.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use haar_wtga::constructions::{self, DivergenceReport};
use haar_wtga::greedy::{run, uniform_bound_constant};
use haar_wtga::io;
use haar_wtga::scalar::{format_decimal, format_rational, parse_rational};
use haar_wtga::verify::{self, Suite};
use haar_wtga::{Expansion, GreedyParams, Rational, Scalar, SelectionRule};
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "haar-wtga", version, about = "Weak thresholding greedy algorithm for the multivariate Haar basis, in exact arithmetic")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the greedy algorithm on an expansion file or a named construction.
    Run(RunArgs),
    /// Boundary-parameter runs that show the approximants are unbounded.
    Diverge {
        #[command(subcommand)]
        which: Diverge,
    },
    /// Greedy approximant of a Rademacher product in the Walsh system.
    Walsh(WalshArgs),
    /// Run a verification suite.
    Verify(VerifyArgs),
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    /// Expansion or grid JSON file, or one of `fN:N`, `fNeps:N:eps`,
    /// `gNeps:N:eps:t`, `rademacher:N:u`, `zero:d`.
    input: String,
    #[arg(long, default_value = "3/4", value_parser = rational)]
    s: Rational,
    #[arg(long, default_value = "1/2", value_parser = rational)]
    t: Rational,
    #[arg(long, value_enum, default_value_t = Variant::A)]
    variant: Variant,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Never select the constant term.
    #[arg(long)]
    no_constant: bool,
    #[arg(long, default_value = "haar-wtga-out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
}

#[derive(Subcommand, Debug)]
enum Diverge {
    /// `s = 1` on `f_{2k}^ε` for `3k + 1` steps.
    S1 {
        #[arg(long)]
        k: u32,
        #[arg(long, value_parser = rational)]
        eps: Rational,
        #[arg(long, default_value = "1/2", value_parser = rational)]
        t: Rational,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// `s = t` on `g_N^ε` for `2N + 1` steps.
    St {
        #[arg(long)]
        n: u32,
        #[arg(long, value_parser = rational)]
        eps: Rational,
        #[arg(long, default_value = "1/2", value_parser = rational)]
        t: Rational,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args, Debug)]
struct WalshArgs {
    #[arg(long)]
    n: u32,
    #[arg(long, value_parser = rational)]
    u: Rational,
    #[arg(long, default_value = "1/2", value_parser = rational)]
    t: Rational,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct VerifyArgs {
    /// One of norm-lemmas, mgcr, key-lemmas, bound, branch, roundtrip, all.
    suite: String,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Variant {
    A,
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Both,
}

impl Format {
    fn json(self) -> bool {
        self != Format::Csv
    }

    fn csv(self) -> bool {
        self != Format::Json
    }
}

fn rational(s: &str) -> Result<Rational, String> {
    parse_rational(s).ok_or_else(|| format!("expected a rational like 3/4, got {s:?}"))
}

/// Failure classes, mapped to exit codes in `main`.
enum Failure {
    Usage(anyhow::Error),
    Io(anyhow::Error),
    Check,
}

impl From<haar_wtga::Error> for Failure {
    fn from(e: haar_wtga::Error) -> Self {
        match e {
            haar_wtga::Error::Parse(_) => Failure::Io(e.into()),
            other => Failure::Usage(other.into()),
        }
    }
}

fn io_err(e: anyhow::Error) -> Failure {
    Failure::Io(e)
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Diverge { which } => cmd_diverge(which),
        Command::Walsh(args) => cmd_walsh(args),
        Command::Verify(args) => cmd_verify(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn field<T: std::str::FromStr>(parts: &[&str], i: usize, input: &str) -> Result<T, Failure> {
    parts
        .get(i)
        .and_then(|p| p.parse().ok())
        .ok_or_else(|| Failure::Usage(anyhow::anyhow!("malformed construction {input:?}")))
}

fn rational_field(parts: &[&str], i: usize, input: &str) -> Result<Rational, Failure> {
    parts
        .get(i)
        .and_then(|p| parse_rational(p))
        .ok_or_else(|| Failure::Usage(anyhow::anyhow!("malformed construction {input:?}")))
}

/// Named construction, or a JSON file when the name is not recognised.
fn load_input(input: &str) -> Result<Expansion, Failure> {
    let parts: Vec<&str> = input.split(':').collect();
    let arity = |n: usize| -> Result<(), Failure> {
        if parts.len() == n {
            Ok(())
        } else {
            Err(Failure::Usage(anyhow::anyhow!("construction {input:?} takes {} fields", n - 1)))
        }
    };
    let f = match parts[0] {
        "fN" => {
            arity(2)?;
            constructions::build_f_n(field(&parts, 1, input)?)?
        }
        "fNeps" => {
            arity(3)?;
            constructions::build_f_n_eps(field(&parts, 1, input)?, &rational_field(&parts, 2, input)?)?
        }
        "gNeps" => {
            arity(4)?;
            let (eps, t) = (rational_field(&parts, 2, input)?, rational_field(&parts, 3, input)?);
            constructions::build_g_n_eps(field(&parts, 1, input)?, &eps, &t)?
        }
        "rademacher" => {
            arity(3)?;
            constructions::build_rademacher_product(field(&parts, 1, input)?, &rational_field(&parts, 2, input)?)?
        }
        "zero" => {
            arity(2)?;
            let dim: usize = field(&parts, 1, input)?;
            if !(1..=8).contains(&dim) {
                return Err(Failure::Usage(anyhow::anyhow!("dimension {dim} out of range 1..=8")));
            }
            Expansion::zero(dim)
        }
        _ => {
            let text = fs::read_to_string(input).with_context(|| format!("reading {input}")).map_err(io_err)?;
            io::read_function(&text).with_context(|| format!("parsing {input}")).map_err(io_err)?
        }
    };
    Ok(f)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(io_err)?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display())).map_err(io_err)
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn show(r: &Rational) -> String {
    format!("{} ({})", format_rational(r), format_decimal(r.approx_f64()))
}

fn cmd_run(args: RunArgs) -> Outcome {
    let rule = match args.variant {
        Variant::A => SelectionRule::A,
        Variant::B => SelectionRule::B,
    };
    let mut params = GreedyParams::new(args.s.clone(), args.t.clone())?.with_rule(rule).with_constant(!args.no_constant);
    if let Some(m) = args.max_steps {
        params = params.with_max_steps(m);
    }
    params.validate()?;
    let f = load_input(&args.input)?;
    let trace = run(&f, &params)?;

    let mut summary = io::trace_summary(&trace);
    let bound = (!trace.boundary_regime).then(|| uniform_bound_constant(f.dim(), &params.s, &params.t));
    summary["bound_constant"] = json!(bound.as_ref().map(format_rational));
    if args.format.json() {
        write(&args.out, "trace.jsonl", &io::trace_to_jsonl(&trace))?;
        write(&args.out, "summary.json", &pretty(&summary))?;
    }
    if args.format.csv() {
        write(&args.out, "trace.csv", &io::trace_to_csv(&trace))?;
    }

    println!("steps            {}", trace.steps.len());
    println!("terminated       {}", trace.terminated);
    match trace.max_ratio() {
        Some(r) => println!("max ||G_m||/||f|| {}", show(&r)),
        None => println!("max ||G_m||/||f|| n/a (f = 0)"),
    }
    match &bound {
        Some(c) => println!("bound C(s,t,d)   {}", show(c)),
        None => println!("bound C(s,t,d)   n/a (s = 1 or s = t: no uniform bound)"),
    }
    if let (Some(r), Some(c)) = (trace.max_ratio(), &bound) {
        if r > *c {
            eprintln!("uniform bound violated");
            return Err(Failure::Check);
        }
    }
    Ok(())
}

fn divergence_json(label: &str, r: &DivergenceReport<Rational>) -> Value {
    json!({
        "construction": label,
        "steps": r.steps,
        "function_norm": format_rational(&r.function_norm),
        "approximant_norm": format_rational(&r.approximant_norm),
        "ratio": format_rational(&r.ratio),
        "ratio_decimal": format_decimal(r.ratio.approx_f64()),
        "lower_bound": format_rational(&r.lower_bound),
        "lower_bound_decimal": format_decimal(r.lower_bound.approx_f64()),
        "bound_holds": r.bound_holds(),
        "matches_closed_form": r.matches_closed_form,
    })
}

fn cmd_diverge(which: Diverge) -> Outcome {
    let (label, report, out) = match which {
        Diverge::S1 { k, eps, t, out } => {
            (format!("fNeps:{}:{}", 2 * k, format_rational(&eps)), constructions::diverge_s_one(k, &eps, &t)?, out)
        }
        Diverge::St { n, eps, t, out } => (
            format!("gNeps:{n}:{}:{}", format_rational(&eps), format_rational(&t)),
            constructions::diverge_s_eq_t(n, &eps, &t)?,
            out,
        ),
    };
    println!("construction      {label}");
    println!("steps             {}", report.steps);
    println!("||f||             {}", show(&report.function_norm));
    println!("||G||             {}", show(&report.approximant_norm));
    println!("ratio             {}", show(&report.ratio));
    println!("lower bound       {}", show(&report.lower_bound));
    println!("closed form       {}", if report.matches_closed_form { "matches" } else { "differs" });
    if let Some(dir) = out {
        write(&dir, "divergence.json", &pretty(&divergence_json(&label, &report)))?;
        write(&dir, "trace.jsonl", &io::trace_to_jsonl(&report.trace))?;
        write(&dir, "trace.csv", &io::trace_to_csv(&report.trace))?;
    }
    if report.bound_holds() && report.matches_closed_form {
        Ok(())
    } else {
        eprintln!("ratio below the lower bound or approximant differs from the closed form");
        Err(Failure::Check)
    }
}

fn cmd_walsh(args: WalshArgs) -> Outcome {
    let r = constructions::walsh_experiment(args.n, &args.u, &args.t)?;
    let holds = r.greedy_norm >= r.lower_bound;
    println!("N                 {}", r.n);
    println!("||G_(N+1)(f_N)||  {}", show(&r.greedy_norm));
    println!("u*K(N) - 1        {}", show(&r.lower_bound));
    println!("K(N)              {}", show(&r.khinchine));
    println!("K(N)/sqrt(N)      {}", format_decimal(r.khinchine_over_sqrt_n));
    println!("selection         {}", if r.selection_is_first_order { "1 + u*sum r_n" } else { "other" });
    if let Some(dir) = &args.out {
        let v = json!({
            "n": r.n,
            "u": format_rational(&r.u),
            "t": format_rational(&r.t),
            "greedy_norm": format_rational(&r.greedy_norm),
            "greedy_norm_decimal": format_decimal(r.greedy_norm.approx_f64()),
            "lower_bound": format_rational(&r.lower_bound),
            "lower_bound_decimal": format_decimal(r.lower_bound.approx_f64()),
            "khinchine": format_rational(&r.khinchine),
            "khinchine_over_sqrt_n_decimal": format_decimal(r.khinchine_over_sqrt_n),
            "selection_is_first_order": r.selection_is_first_order,
            "bound_holds": holds,
        });
        write(dir, "walsh.json", &pretty(&v))?;
    }
    if holds && r.selection_is_first_order {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn cmd_verify(args: VerifyArgs) -> Outcome {
    let suite: Suite = args.suite.parse().map_err(|e: haar_wtga::Error| Failure::Usage(e.into()))?;
    if args.trials == 0 {
        return Err(Failure::Usage(anyhow::anyhow!("--trials must be positive")));
    }
    let verdicts = verify::run_suite(suite, args.trials, args.seed);
    let summary = io::summarize(&verdicts);
    println!("{:<10} {:>7} {:>8}", "lemma_id", "trials", "failures");
    for (id, n, failed) in &summary {
        println!("{:<10} {n:>7} {failed:>8}", id.as_str());
    }
    let failures: Vec<_> = verdicts.iter().filter(|v| !v.holds).cloned().collect();
    if let Some(dir) = &args.out {
        if args.format.json() {
            write(dir, "verdicts.jsonl", &io::verdicts_to_jsonl(&verdicts))?;
        }
        if args.format.csv() {
            write(dir, "summary.csv", &io::summary_csv(&verdicts))?;
        }
        if !failures.is_empty() {
            write(dir, "failures.jsonl", &io::verdicts_to_jsonl(&failures))?;
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        eprintln!("{} verdict(s) failed", failures.len());
        for v in failures.iter().take(3) {
            eprintln!("{}", io::verdict_to_json(v));
        }
        Err(Failure::Check)
    }
}
