//! The `covercfg` command line.
//!
//! Exit codes: 0 success, 1 counterexample found by `check-cover`, 2 bad
//! input, 3 bound violation, 4 any other internal failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::automaton::{cover_equal, Comparison};
use crate::grammar::Cfg;
use crate::learner::{check_bounds, learn_cover, learn_exact, Bound, LearnError, LearnResult, LearnerConfig, SessionStats};
use crate::random::{random_grammar, RandomParams};
use crate::teacher::{CounterexamplePolicy, Teacher};

pub const EXIT_OK: i32 = 0;
pub const EXIT_COUNTEREXAMPLE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_BOUND: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "covercfg", version, about = "Learn cover context-free grammars from skeletons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Learn a cover grammar of the target with respect to --ell.
    Learn {
        #[command(flatten)]
        io: LearnArgs,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        ell: u64,
    },
    /// Learn a structurally equivalent grammar (the exact baseline).
    LearnExact {
        #[command(flatten)]
        io: LearnArgs,
    },
    /// List the skeletons of depth at most --ell in tree order.
    Enum {
        #[arg(long)]
        grammar: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        ell: u64,
    },
    /// Compare the skeletons of two grammars up to depth --ell.
    CheckCover {
        #[arg(long)]
        grammar: PathBuf,
        #[arg(long)]
        hypothesis: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        ell: u64,
    },
    /// Print a seeded random grammar.
    Random {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        nonterminals: usize,
        #[arg(long, default_value_t = 3)]
        terminals: usize,
        #[arg(long, default_value_t = 3)]
        rhs: usize,
        #[arg(long, default_value_t = 8)]
        productions: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Summarize a directory of stats records against the bounds.
    Stats { dir: PathBuf },
}

#[derive(Debug, Args)]
struct LearnArgs {
    /// Target grammar in the text format.
    #[arg(long)]
    grammar: PathBuf,
    #[arg(long, value_enum, default_value_t = Policy::Minimal)]
    policy: Policy,
    /// Seed for the random counterexample policy.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the learned grammar here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    automaton: Option<PathBuf>,
    #[arg(long)]
    dot: Option<PathBuf>,
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Write a table snapshot after every mutation here.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Policy {
    Minimal,
    MaximalDepth,
    Random,
}

/// The stats document written by `learn` and read by `stats`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsRecord {
    #[serde(flatten)]
    pub stats: SessionStats,
    pub bounds_ok: bool,
    pub violated: Vec<Bound>,
}

impl StatsRecord {
    pub fn new(stats: SessionStats) -> StatsRecord {
        let violated = check_bounds(&stats).err().unwrap_or_default();
        StatsRecord {
            bounds_ok: violated.is_empty(),
            stats,
            violated,
        }
    }
}

struct Failure {
    code: i32,
    message: String,
}

fn input_error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message: message.into(),
    }
}

fn internal(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INTERNAL,
        message: message.into(),
    }
}

/// Runs the command line and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            let code = e.exit_code();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
                return EXIT_INPUT;
            }
            let _ = write!(out, "{text}");
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32, Failure> {
    match command {
        Command::Learn { io, ell } => cmd_learn(&io, Some(ell as usize), out),
        Command::LearnExact { io } => cmd_learn(&io, None, out),
        Command::Enum { grammar, ell } => {
            let g = load_grammar(&grammar)?;
            let alphabet = g.skeletal_alphabet().map_err(|e| input_error(e.to_string()))?;
            let trees = g.skeletons_upto(ell as usize).map_err(|e| input_error(e.to_string()))?;
            let mut text = String::new();
            for t in &trees {
                let _ = writeln!(text, "{}", alphabet.show(t));
            }
            emit(out, &text)?;
            Ok(EXIT_OK)
        }
        Command::CheckCover { grammar, hypothesis, ell } => {
            let target = load_grammar(&grammar)?;
            let hyp = load_grammar(&hypothesis)?;
            if target.terminals != hyp.terminals {
                return Err(input_error("the grammars declare different terminals"));
            }
            let a1 = target.na().map_err(|e| input_error(e.to_string()))?;
            let a2 = hyp.na().map_err(|e| input_error(e.to_string()))?;
            match cover_equal(&a1, &a2, ell as usize) {
                Comparison::Equal => {
                    emit(out, "equal\n")?;
                    Ok(EXIT_OK)
                }
                Comparison::Counterexample(t) => {
                    emit(out, &format!("{}\n", a1.alphabet().show(&t)))?;
                    Ok(EXIT_COUNTEREXAMPLE)
                }
            }
        }
        Command::Random {
            seed,
            nonterminals,
            terminals,
            rhs,
            productions,
            output,
        } => {
            let params = RandomParams {
                max_nonterminals: nonterminals,
                max_terminals: terminals,
                max_rhs: rhs,
                max_productions: productions,
                ..RandomParams::default()
            };
            let g = random_grammar(seed, &params).map_err(|e| input_error(e.to_string()))?;
            match output {
                Some(path) => write_file(&path, &g.to_string())?,
                None => emit(out, &g.to_string())?,
            }
            Ok(EXIT_OK)
        }
        Command::Stats { dir } => cmd_stats(&dir, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    out.write_all(text.as_bytes())
        .map_err(|e| internal(format!("cannot write output: {e}")))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| input_error(format!("cannot write {}: {e}", path.display())))
}

fn load_grammar(path: &Path) -> Result<Cfg, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))?;
    Cfg::parse(&text).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn cmd_learn(io: &LearnArgs, ell: Option<usize>, out: &mut dyn Write) -> Result<i32, Failure> {
    let target = load_grammar(&io.grammar)?;
    let policy = match io.policy {
        Policy::Minimal => CounterexamplePolicy::Minimal,
        Policy::MaximalDepth => CounterexamplePolicy::MaximalDepth,
        Policy::Random => CounterexamplePolicy::Random(io.seed),
    };
    let config = LearnerConfig {
        trace: io.trace.is_some(),
        ..LearnerConfig::default()
    };
    let outcome = match ell {
        Some(ell) => {
            let mut teacher = Teacher::cover(&target, ell, policy).map_err(|e| input_error(e.to_string()))?;
            learn_cover(&mut teacher, &config)
        }
        None => {
            let mut teacher = Teacher::exact(&target, policy).map_err(|e| input_error(e.to_string()))?;
            learn_exact(&mut teacher, &config)
        }
    };
    match outcome {
        Ok(result) => {
            write_artifacts(io, &result, out)?;
            Ok(EXIT_OK)
        }
        Err(LearnError::Bounds { violated, result }) => {
            write_artifacts(io, &result, out)?;
            let list: Vec<String> = violated.iter().map(ToString::to_string).collect();
            Err(Failure {
                code: EXIT_BOUND,
                message: format!("bound violated: {}", list.join("; ")),
            })
        }
        Err(e) => Err(internal(e.to_string())),
    }
}

fn write_artifacts(io: &LearnArgs, result: &LearnResult, out: &mut dyn Write) -> Result<(), Failure> {
    let grammar = result.grammar.to_string();
    match &io.output {
        Some(path) => write_file(path, &grammar)?,
        None => emit(out, &grammar)?,
    }
    if let Some(path) = &io.automaton {
        write_file(path, &(result.automaton.to_json() + "\n"))?;
    }
    if let Some(path) = &io.dot {
        write_file(path, &result.automaton.to_dot())?;
    }
    if let Some(path) = &io.stats {
        let record = StatsRecord::new(result.stats.clone());
        let text = serde_json::to_string_pretty(&record).expect("stats serialize");
        write_file(path, &(text + "\n"))?;
    }
    if let Some(path) = &io.trace {
        let text = serde_json::to_string_pretty(&result.trace).expect("trace serializes");
        write_file(path, &(text + "\n"))?;
    }
    Ok(())
}

fn cmd_stats(dir: &Path, out: &mut dyn Write) -> Result<i32, Failure> {
    let entries = fs::read_dir(dir).map_err(|e| input_error(format!("cannot read {}: {e}", dir.display())))?;
    let mut records = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|e| input_error(e.to_string()))?.path();
        if path.extension().is_none_or(|x| x != "json") {
            continue;
        }
        let text = fs::read_to_string(&path).map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))?;
        let record: StatsRecord = serde_json::from_str(&text)
            .map_err(|e| input_error(format!("{}: not a stats record: {e}", path.display())))?;
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        records.insert(name, record);
    }
    let mut text = format!(
        "{:<24} {:>4} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>6}\n",
        "record", "n", "closed", "<=", "consist", "<=", "eq", "<=", "ok"
    );
    let mut failures = 0;
    for (name, r) in &records {
        let n = r.stats.final_states;
        let ok = check_bounds(&r.stats).is_ok();
        failures += usize::from(!ok);
        let _ = writeln!(
            text,
            "{:<24} {:>4} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>6}",
            name,
            n,
            r.stats.failed_closedness,
            n * (n + 1) / 2,
            r.stats.failed_consistency,
            n * n.saturating_sub(1) / 2,
            r.stats.failed_equivalence,
            n,
            if ok { "yes" } else { "no" }
        );
    }
    let _ = writeln!(text, "{} records, {} violating a bound", records.len(), failures);
    emit(out, &text)?;
    Ok(if failures == 0 { EXIT_OK } else { EXIT_BOUND })
}
