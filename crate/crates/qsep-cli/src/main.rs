//! `qsep`: command-line front end for the linear quantum calculus toolkit.
//!
//! Subcommands: `typecheck`, `run`, `abstract`, `sat`, `prove`, `oracle`.
//! Exit codes: 0 for success / accepted / true, 1 for a failed check
//! (type error, runtime fault, rejected proof, unsatisfied assertion),
//! 2 for usage, file, or syntax problems.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use qsep::abstract_sem::{abstract_semantics, Aqs, DEFAULT_ABSTRACT_BUDGET};
use qsep::concrete::{run_exhaustive, run_sampled, MachineState};
use qsep::logic::{satisfies, AbstractValue, Model};
use qsep::parser::{parse_assertion, parse_program, parse_term, parse_type};
use qsep::proof::{check_judgment, parse_proof_script, ProofError, Verdict};
use qsep::qstate::{QuantumState, Tolerances};
use qsep::syntax::Term;
use qsep::typecheck::typecheck;

#[derive(Parser)]
#[command(
    name = "qsep",
    about = "Type checking, evaluation, abstraction, and proof checking for a linear quantum calculus",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Trajectory seed for sampled evaluation.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Step budget for evaluation and abstraction.
    #[arg(long, global = true)]
    max_steps: Option<usize>,
    /// Register size override (otherwise taken from the input file).
    #[arg(long, global = true)]
    qubits: Option<usize>,
    /// Allowed deviation of a state's squared norm from 1.
    #[arg(long, global = true)]
    tol_norm: Option<f64>,
    /// Probability below which a measurement branch is dropped.
    #[arg(long, global = true)]
    tol_prob: Option<f64>,
    /// Tolerance for purity / base-state decisions.
    #[arg(long, global = true)]
    tol_purity: Option<f64>,
}

impl Common {
    fn tolerances(&self) -> Tolerances {
        let mut tol = Tolerances::default();
        if let Some(v) = self.tol_norm {
            tol.norm = v;
        }
        if let Some(v) = self.tol_prob {
            tol.prob = v;
        }
        if let Some(v) = self.tol_purity {
            tol.purity = v;
        }
        tol
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse and type-check a program, printing its type.
    Typecheck { file: PathBuf },
    /// Evaluate a program: one seeded trajectory, or the whole branch tree.
    Run {
        file: PathBuf,
        /// Enumerate every measurement branch instead of sampling one.
        #[arg(long)]
        exhaustive: bool,
    },
    /// Run the abstract semantics and print each terminal value with its
    /// abstraction.
    #[command(name = "abstract")]
    Abstraction {
        program: PathBuf,
        /// Initial abstraction file (`block:` / `pure:` lines); all-pure
        /// when omitted.
        aqs: Option<PathBuf>,
    },
    /// Decide whether a model satisfies an assertion.
    Sat {
        /// Model file: `qubits N`, `block:`/`pure:` lines, and
        /// `bind NAME : TYPE = TERM` value bindings.
        model: PathBuf,
        /// File holding the assertion to check.
        assertion: Option<PathBuf>,
        /// Inline assertion text instead of a file.
        #[arg(short, long)]
        expr: Option<String>,
    },
    /// Check a proof script (JSON).
    Prove { file: PathBuf },
    /// Read an amplitude file and print its entanglement partition and
    /// base-state flags.
    Oracle { file: PathBuf },
}

fn main() {
    // Die quietly when a downstream pipe closes (e.g. `qsep ... | head`),
    // like any other filter, instead of panicking on the failed write.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let args: Vec<String> = std::env::args().collect();
    std::process::exit(dispatch(&args));
}

/// Parses the argument list and runs the chosen subcommand, translating
/// every outcome into the exit-code contract.
pub fn dispatch(args: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes; everything else is
            // a usage error.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_command(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

/// `Ok(code)` is a decided verdict; `Err` means bad input (exit 2).
fn run_command(cli: &Cli) -> Result<i32> {
    let tol = cli.common.tolerances();
    match &cli.command {
        Command::Typecheck { file } => {
            let program = load_program(file)?;
            match typecheck(&program.term) {
                Ok(ty) => {
                    println!("{ty}");
                    Ok(0)
                }
                Err(e) => {
                    eprintln!("type error: {e}");
                    Ok(1)
                }
            }
        }

        Command::Run { file, exhaustive } => {
            let program = load_program(file)?;
            if let Err(e) = typecheck(&program.term) {
                eprintln!("type error: {e}");
                return Ok(1);
            }
            let n = cli.common.qubits.unwrap_or(program.qubits).max(1);
            let state = QuantumState::initial(n).map_err(|e| anyhow!("cannot build the initial state: {e}"))?;
            let machine = MachineState {
                state,
                term: program.term.clone(),
            };
            let max_steps = cli.common.max_steps.unwrap_or(100_000);
            if *exhaustive {
                match run_exhaustive(machine, &tol, max_steps) {
                    Ok(leaves) => {
                        for leaf in &leaves {
                            println!(
                                "p={} term={} state={}",
                                leaf.probability,
                                leaf.machine.term,
                                amplitude_list(&leaf.machine.state)
                            );
                        }
                        Ok(0)
                    }
                    Err(e) => {
                        eprintln!("evaluation failed: {e}");
                        Ok(1)
                    }
                }
            } else {
                match run_sampled(machine, cli.common.seed, &tol, max_steps) {
                    Ok((probability, machine)) => {
                        println!(
                            "p={} term={} state={}",
                            probability,
                            machine.term,
                            amplitude_list(&machine.state)
                        );
                        Ok(0)
                    }
                    Err(e) => {
                        eprintln!("evaluation failed: {e}");
                        Ok(1)
                    }
                }
            }
        }

        Command::Abstraction { program, aqs } => {
            let program = load_program(program)?;
            if let Err(e) = typecheck(&program.term) {
                eprintln!("type error: {e}");
                return Ok(1);
            }
            let n = cli.common.qubits.unwrap_or(program.qubits).max(1);
            let initial = match aqs {
                Some(path) => {
                    let src = read_file(path)?;
                    Aqs::parse(&src, n)
                        .with_context(|| format!("malformed abstraction file {}", path.display()))?
                }
                None => Aqs::all_pure(n),
            };
            let budget = cli.common.max_steps.unwrap_or(DEFAULT_ABSTRACT_BUDGET);
            match abstract_semantics(initial, program.term.clone(), budget) {
                Ok(terminals) => {
                    let mut first = true;
                    for (aqs, value) in &terminals {
                        if !first {
                            println!();
                        }
                        first = false;
                        println!("value: {value}");
                        print!("{}", aqs.render());
                    }
                    Ok(0)
                }
                Err(e) => {
                    eprintln!("abstraction failed: {e}");
                    Ok(1)
                }
            }
        }

        Command::Sat {
            model,
            assertion,
            expr,
        } => {
            let model = load_model(model, cli.common.qubits)?;
            let src = match (assertion, expr) {
                (Some(path), None) => read_file(path)?,
                (None, Some(text)) => text.clone(),
                (Some(_), Some(_)) => bail!("pass either an assertion file or --expr, not both"),
                (None, None) => bail!("an assertion file or --expr is required"),
            };
            let assertion = parse_assertion(src.trim())
                .map_err(|e| anyhow!("malformed assertion: {e}"))?;
            match satisfies(&model, &assertion) {
                Ok(true) => {
                    println!("true");
                    Ok(0)
                }
                Ok(false) => {
                    println!("false");
                    Ok(1)
                }
                Err(e) => Err(anyhow!("cannot decide the assertion: {e}")),
            }
        }

        Command::Prove { file } => {
            let src = read_file(file)?;
            let tree = match parse_proof_script(&src) {
                Ok(tree) => tree,
                Err(ProofError::UnknownRule { location, name }) => {
                    // An unrecognized rule is a checking failure at a node,
                    // not a malformed file.
                    println!("rejected at {location}: unknown rule name `{name}`");
                    return Ok(1);
                }
                Err(e) => return Err(anyhow!(e)),
            };
            match check_judgment(&tree) {
                Verdict::Accepted => {
                    println!("accepted");
                    Ok(0)
                }
                Verdict::Rejected { path, reason } => {
                    println!("rejected at {path}: {reason}");
                    Ok(1)
                }
            }
        }

        Command::Oracle { file } => {
            let src = read_file(file)?;
            let state = load_amplitudes(&src, cli.common.qubits, &tol)
                .with_context(|| format!("malformed amplitude file {}", file.display()))?;
            let blocks = state
                .entanglement_relation(&tol)
                .map_err(|e| anyhow!("cannot analyze the state: {e}"))?;
            let mut pure: Vec<usize> = Vec::new();
            for q in 1..=state.qubits() {
                if state
                    .qubit_is_base(q, &tol)
                    .map_err(|e| anyhow!("cannot analyze qubit q{q}: {e}"))?
                {
                    pure.push(q);
                }
            }
            for block in blocks.entangled_blocks() {
                let names: Vec<String> = block.iter().map(|q| format!("q{q}")).collect();
                println!("block: {}", names.join(" "));
            }
            if !pure.is_empty() {
                let names: Vec<String> = pure.iter().map(|q| format!("q{q}")).collect();
                println!("pure: {}", names.join(" "));
            }
            Ok(0)
        }
    }
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_program(path: &Path) -> Result<qsep::parser::Program> {
    let src = read_file(path)?;
    parse_program(&src).map_err(|e| anyhow!("cannot parse {}: {e}", path.display()))
}

/// One-line amplitude rendering for `run` output: `[re im, re im, ...]` in
/// basis order.
fn amplitude_list(state: &QuantumState) -> String {
    let mut out = String::from("[");
    for (i, amp) in state.amplitudes().iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{} {}", amp.re, amp.im);
    }
    out.push(']');
    out
}

/// Model files: a `qubits N` header, `block:` / `pure:` abstraction lines,
/// and `bind NAME : TYPE = TERM` lines giving values to assertion names.
fn load_model(path: &Path, qubits_override: Option<usize>) -> Result<Model> {
    let src = read_file(path)?;
    let mut declared: Option<usize> = None;
    let mut aqs_lines = String::new();
    let mut bindings: Vec<(String, qsep::syntax::Type, Term)> = Vec::new();
    for (lineno, raw) in src.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = |message: String| anyhow!("{}:{}: {message}", path.display(), lineno + 1);
        if let Some(rest) = line.strip_prefix("qubits") {
            let n: usize = rest
                .trim()
                .parse()
                .map_err(|_| at(format!("bad register count `{}`", rest.trim())))?;
            if declared.replace(n).is_some() {
                return Err(at("duplicate `qubits` line".into()));
            }
        } else if let Some(rest) = line.strip_prefix("bind") {
            let (name, rest) = rest
                .split_once(':')
                .ok_or_else(|| at("expected `bind NAME : TYPE = TERM`".into()))?;
            let (ty_src, term_src) = rest
                .split_once('=')
                .ok_or_else(|| at("expected `bind NAME : TYPE = TERM`".into()))?;
            let name = name.trim().to_string();
            if name.is_empty() {
                return Err(at("missing name in `bind`".into()));
            }
            let ty = parse_type(ty_src.trim()).map_err(|e| at(format!("bad type: {e}")))?;
            let term = parse_term(term_src.trim()).map_err(|e| at(format!("bad term: {e}")))?;
            let found = typecheck(&term).map_err(|e| at(format!("ill-typed value: {e}")))?;
            if found != ty {
                return Err(at(format!("`{term}` has type `{found}`, not `{ty}`")));
            }
            bindings.push((name, ty, term));
        } else {
            aqs_lines.push_str(line);
            aqs_lines.push('\n');
        }
    }
    let mentioned = bindings
        .iter()
        .map(|(_, _, t)| t.max_qubit_index())
        .max()
        .unwrap_or(0);
    let n = qubits_override
        .or(declared)
        .unwrap_or(mentioned)
        .max(1);
    let aqs = Aqs::parse(&aqs_lines, n).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    let mut model = Model::new(aqs);
    for (name, _ty, term) in &bindings {
        let value = AbstractValue::of_value_term(term)
            .map_err(|e| anyhow!("{}: binding `{name}`: {e}", path.display()))?;
        model = model
            .extend(name, value)
            .map_err(|e| anyhow!("{}: binding `{name}`: {e}", path.display()))?;
    }
    Ok(model)
}

/// Amplitude files come in two shapes: the labeled state format (with a
/// `qubits` header and `BITS: RE IM` lines) and a bare list with one
/// `re im` pair per line in basis order, whose size fixes the register
/// unless `--qubits` says otherwise.
fn load_amplitudes(src: &str, qubits_override: Option<usize>, tol: &Tolerances) -> Result<QuantumState> {
    let meaningful: Vec<&str> = src
        .lines()
        .map(|raw| raw.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .collect();
    let labeled = meaningful
        .iter()
        .any(|l| l.starts_with("qubits") || l.contains(':'));
    if labeled {
        return QuantumState::parse_state_file(src, tol).map_err(|e| anyhow!("{e}"));
    }
    let mut amps = Vec::with_capacity(meaningful.len());
    for (i, line) in meaningful.iter().enumerate() {
        let mut parts = line.split_whitespace();
        let re: f64 = parts
            .next()
            .ok_or_else(|| anyhow!("entry {i}: empty amplitude line"))?
            .parse()
            .map_err(|_| anyhow!("entry {i}: bad real part `{line}`"))?;
        let im: f64 = match parts.next() {
            Some(s) => s
                .parse()
                .map_err(|_| anyhow!("entry {i}: bad imaginary part `{line}`"))?,
            None => 0.0,
        };
        if parts.next().is_some() {
            bail!("entry {i}: expected `re im`, found `{line}`");
        }
        amps.push(num_complex::Complex64::new(re, im));
    }
    let n = match qubits_override {
        Some(n) => n,
        None => {
            let len = amps.len();
            if len == 0 || len & (len - 1) != 0 {
                bail!("{len} amplitudes is not a power of two; pass --qubits");
            }
            len.trailing_zeros() as usize
        }
    };
    QuantumState::from_amplitudes(n, amps, tol).map_err(|e| anyhow!("{e}"))
}
