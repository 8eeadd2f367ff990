//! The cover learner `LA^ℓ` and the exact baseline `LA`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::TreeAutomaton;
use crate::grammar::{g_of, Cfg};
use crate::table::{ObservationTable, TableError, TableSnapshot};
use crate::teacher::{EquivalenceAnswer, Teacher, TeacherError};
use crate::tree::Tree;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LearnerConfig {
    /// Snapshot the table after every mutation.
    pub trace: bool,
    /// Fail with [`LearnError::Bounds`] when a counter exceeds its bound.
    pub enforce_bounds: bool,
    /// The loop gives up after `ceiling_factor · (|S|² + 1)` turns.
    pub ceiling_factor: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            trace: false,
            enforce_bounds: true,
            ceiling_factor: 10,
        }
    }
}

/// Counters of one session.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionStats {
    /// `ℓ`, absent for the exact learner.
    pub ell: Option<usize>,
    pub failed_closedness: usize,
    pub failed_consistency: usize,
    /// All equivalence queries, including the final successful one.
    pub equivalence_queries: usize,
    pub failed_equivalence: usize,
    pub membership_queries: usize,
    /// `n`: states of the final automaton.
    pub final_states: usize,
    /// `m`: largest counterexample size.
    pub max_counterexample_size: usize,
    /// `p`: number of terminals.
    pub terminals: usize,
    /// `d`: largest arity of σ.
    pub max_arity: usize,
    pub rows: usize,
    pub columns: usize,
    /// State count of each hypothesis, in query order.
    pub hypothesis_states: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    Closedness,
    Consistency,
    Equivalence,
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Bound::Closedness => "failed closedness checks exceed n(n+1)/2",
            Bound::Consistency => "failed consistency checks exceed n(n-1)/2",
            Bound::Equivalence => "failed equivalence queries exceed n",
        })
    }
}

/// With `n = final_states`: at most `n(n+1)/2` failed closedness checks,
/// `n(n−1)/2` failed consistency checks and `n` failed equivalence queries.
pub fn check_bounds(stats: &SessionStats) -> Result<(), Vec<Bound>> {
    let n = stats.final_states;
    let mut violated = Vec::new();
    if stats.failed_closedness > n * (n + 1) / 2 {
        violated.push(Bound::Closedness);
    }
    if stats.failed_consistency > n * n.saturating_sub(1) / 2 {
        violated.push(Bound::Consistency);
    }
    if stats.failed_equivalence > n {
        violated.push(Bound::Equivalence);
    }
    if violated.is_empty() {
        Ok(())
    } else {
        Err(violated)
    }
}

/// One trace entry: what happened and the table right after it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub event: String,
    pub table: TableSnapshot,
}

#[derive(Debug, Clone)]
pub struct LearnResult {
    /// `G(𝒜(𝕋))`, or the trivial grammar when the first query succeeds.
    pub grammar: Cfg,
    pub automaton: TreeAutomaton,
    /// The tree behind each state of `automaton`.
    pub representatives: Vec<Tree>,
    pub stats: SessionStats,
    pub trace: Vec<TraceEvent>,
    /// The final table; absent when the first query succeeds.
    pub table: Option<ObservationTable>,
}

#[derive(Debug, Error)]
pub enum LearnError {
    #[error(transparent)]
    Teacher(#[from] TeacherError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("no progress after {turns} turns")]
    Ceiling { turns: usize },
    #[error("bound violated: {}", .violated.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Bounds {
        violated: Vec<Bound>,
        result: Box<LearnResult>,
    },
}

/// Learns a cover grammar of the teacher's target with respect to its bound.
pub fn learn_cover(teacher: &mut Teacher, config: &LearnerConfig) -> Result<LearnResult, LearnError> {
    assert!(teacher.ell().is_some(), "learn_cover needs a cover-mode teacher");
    learn(teacher, config)
}

/// Learns a grammar structurally equivalent to the teacher's target.
pub fn learn_exact(teacher: &mut Teacher, config: &LearnerConfig) -> Result<LearnResult, LearnError> {
    assert!(teacher.ell().is_none(), "learn_exact needs an exact-mode teacher");
    learn(teacher, config)
}

struct Session<'a> {
    teacher: &'a mut Teacher,
    table: ObservationTable,
    stats: SessionStats,
    trace: Option<Vec<TraceEvent>>,
}

impl Session<'_> {
    fn record(&mut self, event: impl FnOnce() -> String) {
        if let Some(trace) = &mut self.trace {
            trace.push(TraceEvent {
                event: event(),
                table: self.table.snapshot(),
            });
        }
    }

    fn add_counterexample(&mut self, t: &Tree) -> Result<(), LearnError> {
        for s in t.subterms() {
            if self.table.add_row(self.teacher, &s)? {
                let shown = self.table.alphabet().show(&s);
                self.record(|| format!("row {shown} from counterexample"));
            }
        }
        Ok(())
    }
}

fn learn(teacher: &mut Teacher, config: &LearnerConfig) -> Result<LearnResult, LearnError> {
    let alphabet = teacher.alphabet().clone();
    let ell = teacher.ell();
    let mut stats = SessionStats {
        ell,
        terminals: alphabet.terminal_count(),
        max_arity: alphabet.max_arity(),
        ..SessionStats::default()
    };
    let trivial = Cfg::trivial(alphabet.terminals());
    let first = teacher.equivalence(&trivial)?;
    let EquivalenceAnswer::Counterexample(t) = first else {
        stats.equivalence_queries = teacher.stats().equivalence_queries;
        stats.membership_queries = teacher.stats().membership_queries;
        let automaton = TreeAutomaton::new(alphabet, Vec::new(), Default::default(), Vec::new())
            .expect("empty automaton");
        return finish(
            LearnResult {
                grammar: trivial,
                automaton,
                representatives: Vec::new(),
                stats,
                trace: Vec::new(),
                table: None,
            },
            config,
        );
    };
    stats.failed_equivalence += 1;
    let mut session = Session {
        table: ObservationTable::new(alphabet, ell),
        teacher,
        stats,
        trace: config.trace.then(Vec::new),
    };
    session.add_counterexample(&t)?;
    let mut turns = 0usize;
    loop {
        loop {
            turns += 1;
            let s = session.table.rows().len();
            if turns > config.ceiling_factor * (s * s + 1) {
                return Err(LearnError::Ceiling { turns });
            }
            if let Some(inc) = session.table.find_inconsistency() {
                session.stats.failed_consistency += 1;
                let column = inc.new_column();
                session.table.add_column(session.teacher, &column)?;
                let shown = session.table.alphabet().show_context(&column);
                session.record(|| format!("column {shown} from inconsistency"));
                continue;
            }
            if let Some(x) = session.table.find_unclosed() {
                session.stats.failed_closedness += 1;
                session.table.add_row(session.teacher, &x)?;
                let shown = session.table.alphabet().show(&x);
                session.record(|| format!("row {shown} from closedness"));
                continue;
            }
            break;
        }
        let (automaton, representatives) = session.table.build_automaton()?;
        session.stats.hypothesis_states.push(automaton.num_states());
        let grammar = g_of(&automaton);
        match session.teacher.equivalence(&grammar)? {
            EquivalenceAnswer::Yes => {
                let Session {
                    teacher,
                    table,
                    mut stats,
                    trace,
                } = session;
                stats.final_states = automaton.num_states();
                stats.equivalence_queries = teacher.stats().equivalence_queries;
                stats.membership_queries = teacher.stats().membership_queries;
                stats.max_counterexample_size = teacher.stats().max_counterexample_size;
                stats.rows = table.rows().len();
                stats.columns = table.columns().len();
                return finish(
                    LearnResult {
                        grammar,
                        automaton,
                        representatives,
                        stats,
                        trace: trace.unwrap_or_default(),
                        table: Some(table),
                    },
                    config,
                );
            }
            EquivalenceAnswer::Counterexample(t) => {
                session.stats.failed_equivalence += 1;
                session.add_counterexample(&t)?;
            }
        }
    }
}

fn finish(result: LearnResult, config: &LearnerConfig) -> Result<LearnResult, LearnError> {
    if config.enforce_bounds {
        if let Err(violated) = check_bounds(&result.stats) {
            return Err(LearnError::Bounds {
                violated,
                result: Box::new(result),
            });
        }
    }
    Ok(result)
}
