//! `fieldsearch`: run tensor derivations from the command line.
//!
//! Exit status is 0 on success, 1 when a search ends without reaching its
//! goal, and 2 on usage, file or parse errors.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fieldsearch::expr::{Canonicalizer, ComponentExpander, Expr, Registry};
use fieldsearch::physics::{
    canonical_tem, check_conservation, divergence, improvement_term, symmetrize_tem_with, Conservation, FieldTheory,
    TEMResult, TemVariant,
};
use fieldsearch::rules::{load_rules_with, RuleSet};
use fieldsearch::search::{explain, search, DerivationState, Goal, SearchBudget, SearchOutcome, Statistics};
use serde_json::json;

#[derive(Parser)]
#[command(name = "fieldsearch", version, about = "Breadth-first derivation search over Lorentz-tensor expressions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Options,
}

#[derive(Args)]
struct Options {
    /// Rule file; may be repeated. Defaults to the built-in seed rules.
    #[arg(long = "rules", global = true, value_name = "PATH")]
    rules: Vec<PathBuf>,
    /// Theory file. Its equation-of-motion rules join the rule set.
    #[arg(long, global = true, value_name = "PATH")]
    theory: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 12)]
    max_depth: usize,
    #[arg(long, global = true, default_value_t = 200_000)]
    max_states: usize,
    #[arg(long, global = true, default_value_t = 60.0)]
    max_seconds: f64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Spacetime dimension used for traces and component expansion.
    #[arg(long, global = true, default_value_t = 4)]
    dimension: u32,
    /// Input expression. Read from standard input when absent.
    #[arg(long, global = true, value_name = "EXPR", allow_hyphen_values = true)]
    expr: Option<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    /// One JSON object per line.
    Structured,
}

#[derive(Subcommand)]
enum Command {
    /// Print the canonical form of the input.
    Simplify,
    /// Search for a derivation from the input to a goal.
    Derive {
        /// `is-zero`, `equals <expr>`, `matches <pattern>` or `symmetric-in <i> <j>`.
        #[arg(long)]
        goal: String,
    },
    /// Energy-momentum tensor of a theory.
    Tem {
        /// Also print the symmetrized tensor.
        #[arg(long)]
        symmetrize: bool,
        /// Also derive conservation of each printed tensor.
        #[arg(long)]
        check: bool,
    },
    /// Symmetrized energy-momentum tensor of a theory.
    Symmetrize {
        #[arg(long)]
        check: bool,
    },
    /// Derive conservation of the input tensor, or of the theory's
    /// energy-momentum tensor when no input is given.
    CheckConserved {
        /// Check the symmetrized tensor instead of the canonical one.
        #[arg(long)]
        symmetrized: bool,
    },
    /// Print every component of the input.
    Expand,
}

/// Failure that maps to exit status 2.
struct Fatal(String);

impl<E: std::fmt::Display> From<E> for Fatal {
    fn from(e: E) -> Self {
        Fatal(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = Output { format: cli.opts.format, stdout: PipeStdout { inner: io::stdout().lock(), closed: false } };
    match run(&cli, &mut out) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Fatal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

struct Context {
    registry: Registry,
    theory: Option<FieldTheory>,
    rules: RuleSet,
    budget: SearchBudget,
}

fn read_file(path: &Path) -> Result<String, Fatal> {
    fs::read_to_string(path).map_err(|e| Fatal(format!("{}: {e}", path.display())))
}

fn context(opts: &Options) -> Result<Context, Fatal> {
    if opts.max_depth == 0 || opts.max_states == 0 || opts.max_seconds.is_nan() || opts.max_seconds <= 0.0 {
        return Err(Fatal("budget limits must be positive".into()));
    }
    if opts.dimension == 0 {
        return Err(Fatal("dimension must be positive".into()));
    }
    let theory = match &opts.theory {
        Some(path) => {
            let name = path.file_stem().map_or("theory".into(), |s| s.to_string_lossy().into_owned());
            let text = read_file(path)?;
            Some(FieldTheory::parse(&name, &text).map_err(|e| Fatal(format!("{}: {e}", path.display())))?)
        }
        None => None,
    };
    let mut registry = theory.as_ref().map_or_else(Registry::default, |t| t.registry.clone());
    let mut rules = if opts.rules.is_empty() {
        RuleSet::seed()
    } else {
        let mut rs = RuleSet::new();
        for path in &opts.rules {
            let loaded = load_rules_with(&read_file(path)?, &mut registry)
                .map_err(|e| Fatal(format!("{}: {e}", path.display())))?;
            rs.merge(&loaded).map_err(|e| Fatal(format!("{}: {e}", path.display())))?;
        }
        rs
    };
    if let Some(t) = &theory {
        rules.merge(&t.eom_rules)?;
    }
    rules.dimension = opts.dimension;
    let budget =
        SearchBudget { max_depth: opts.max_depth, max_states: opts.max_states, max_seconds: opts.max_seconds };
    Ok(Context { registry, theory, rules, budget })
}

fn input(opts: &Options, registry: &mut Registry) -> Result<Expr, Fatal> {
    let text = match &opts.expr {
        Some(s) => s.clone(),
        None => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s)?;
            s
        }
    };
    fieldsearch::expr::Parser::new(registry).ground(text.trim()).map_err(|e| Fatal(format!("input {e}")))
}

fn run(cli: &Cli, out: &mut Output<impl Write>) -> Result<bool, Fatal> {
    let mut cx = context(&cli.opts)?;
    let canon = Canonicalizer::new(cli.opts.dimension);
    match &cli.command {
        Command::Simplify => {
            let e = input(&cli.opts, &mut cx.registry)?;
            out.expr("canonical", &canon.canonicalize(&e))?;
            Ok(true)
        }
        Command::Expand => {
            let e = input(&cli.opts, &mut cx.registry)?;
            let mut x = ComponentExpander::new(cli.opts.dimension);
            if let Some(t) = &cx.theory {
                for d in &t.definitions {
                    x.define(&d.head.name, d.params.clone(), d.body.clone());
                }
            }
            let table = x.expand(&e)?;
            for (key, value) in &table.entries {
                out.component(key, &value.to_string())?;
            }
            Ok(true)
        }
        Command::Derive { goal } => {
            let goal = Goal::parse(goal, &mut cx.registry).map_err(|e| Fatal(format!("--goal: {e}")))?;
            let start = input(&cli.opts, &mut cx.registry)?;
            derive(out, "derivation", &start, &cx.rules, &goal, &cx.budget)
        }
        Command::Tem { symmetrize, check } => tem(out, &cx, *symmetrize, *check, true),
        Command::Symmetrize { check } => tem(out, &cx, true, *check, false),
        Command::CheckConserved { symmetrized } => {
            let t = match &cx.theory {
                Some(theory) if cli.opts.expr.is_none() => {
                    let t = canonical_tem(theory)?;
                    if *symmetrized {
                        symmetrize_tem_with(&t, theory, &cx.rules, &cx.budget)?
                    } else {
                        t
                    }
                }
                _ => TEMResult::new(input(&cli.opts, &mut cx.registry)?, TemVariant::Canonical)
                    .map_err(|e| Fatal(format!("input must have free indices ^mu,^nu: {e}")))?,
            };
            conservation(out, "conservation", &t, &cx)
        }
    }
}

fn tem(out: &mut Output<impl Write>, cx: &Context, symmetrize: bool, check: bool, show_canonical: bool) -> Result<bool, Fatal> {
    let theory = cx.theory.as_ref().ok_or_else(|| Fatal("--theory is required".into()))?;
    let t = canonical_tem(theory)?;
    let mut ok = true;
    if show_canonical {
        out.expr("canonical-tem", &t.tensor)?;
        if check {
            ok &= conservation(out, "canonical-conservation", &t, cx)?;
        }
    }
    if symmetrize {
        let s = symmetrize_tem_with(&t, theory, &cx.rules, &cx.budget)?;
        if let Some(d) = &s.derivation {
            let start = cx.rules.canonicalizer().canonicalize(&Expr::sum(vec![
                t.tensor.clone(),
                improvement_term(theory, &t.tensor.index_names())?,
            ]));
            out.transcript("symmetrization", d, &start, &cx.rules)?;
        }
        out.expr("symmetrized-tem", &s.tensor)?;
        if check {
            ok &= conservation(out, "symmetrized-conservation", &s, cx)?;
        }
    }
    Ok(ok)
}

fn conservation(out: &mut Output<impl Write>, label: &str, t: &TEMResult, cx: &Context) -> Result<bool, Fatal> {
    let start = divergence(t);
    match check_conservation(t, &cx.rules, &cx.budget) {
        Conservation::Conserved(d, stats) => {
            out.transcript(label, &d, &start, &cx.rules)?;
            report(label, "conserved", &stats);
            Ok(true)
        }
        Conservation::NotShown(stats, limit) => {
            let why = limit.map_or("search space exhausted".to_string(), |l| format!("{l} reached"));
            out.note(label, &format!("not shown ({why})"))?;
            report(label, "not shown", &stats);
            Ok(false)
        }
    }
}

fn derive(
    out: &mut Output<impl Write>,
    label: &str,
    start: &Expr,
    rules: &RuleSet,
    goal: &Goal,
    budget: &SearchBudget,
) -> Result<bool, Fatal> {
    match search(start, rules, goal, budget) {
        SearchOutcome::Found(d, stats) => {
            out.transcript(label, &d, start, rules)?;
            report(label, &format!("found at depth {}", d.depth), &stats);
            Ok(true)
        }
        SearchOutcome::Exhausted(stats) => {
            out.note(label, "exhausted")?;
            report(label, "exhausted", &stats);
            Ok(false)
        }
        SearchOutcome::BudgetExceeded(stats, limit) => {
            out.note(label, &format!("budget exceeded ({limit})"))?;
            report(label, &format!("budget exceeded ({limit})"), &stats);
            Ok(false)
        }
    }
}

fn report(label: &str, outcome: &str, stats: &Statistics) {
    eprintln!("{label}: {outcome}; {stats}");
}

/// Standard output that goes quiet once the reader hangs up, so that
/// piping into `head` is not reported as an error.
struct PipeStdout<W: Write> {
    inner: W,
    closed: bool,
}

impl<W: Write> PipeStdout<W> {
    fn guard<T>(&mut self, r: io::Result<T>, quiet: T) -> io::Result<T> {
        match r {
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => {
                self.closed = true;
                Ok(quiet)
            }
            r => r,
        }
    }
}

impl<W: Write> Write for PipeStdout<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        if self.closed {
            return Ok(buf.len());
        }
        let r = self.inner.write(buf);
        self.guard(r, buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        if self.closed {
            return Ok(());
        }
        let r = self.inner.flush();
        self.guard(r, ())
    }
}

struct Output<W: Write> {
    format: Format,
    stdout: W,
}

impl<W: Write> Output<W> {
    fn expr(&mut self, label: &str, e: &Expr) -> io::Result<()> {
        match self.format {
            Format::Text => writeln!(self.stdout, "{label}: {e}"),
            Format::Structured => {
                writeln!(self.stdout, "{}", json!({"kind": "expr", "label": label, "expr": e.to_string()}))
            }
        }
    }

    fn note(&mut self, label: &str, text: &str) -> io::Result<()> {
        match self.format {
            Format::Text => writeln!(self.stdout, "{label}: {text}"),
            Format::Structured => {
                writeln!(self.stdout, "{}", json!({"kind": "outcome", "label": label, "outcome": text}))
            }
        }
    }

    fn component(&mut self, key: &[u32], value: &str) -> io::Result<()> {
        match self.format {
            Format::Text => {
                let k: Vec<String> = key.iter().map(u32::to_string).collect();
                writeln!(self.stdout, "({}): {value}", k.join(","))
            }
            Format::Structured => {
                writeln!(self.stdout, "{}", json!({"kind": "component", "index": key, "value": value}))
            }
        }
    }

    fn transcript(&mut self, label: &str, d: &DerivationState, start: &Expr, rules: &RuleSet) -> Result<(), Fatal> {
        let t = explain(d, start, rules)?;
        match self.format {
            Format::Text => {
                writeln!(self.stdout, "{label}:")?;
                write!(self.stdout, "{t}")?;
            }
            Format::Structured => {
                for line in &t.lines {
                    let mut record = serde_json::to_value(line)?;
                    record["kind"] = json!("step");
                    record["label"] = json!(label);
                    writeln!(self.stdout, "{record}")?;
                }
            }
        }
        Ok(())
    }
}
