//! A mechanized teacher for a hidden grammar: structural membership and
//! equivalence queries with query accounting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{level_walk, TreeAutomaton};
use crate::grammar::{Cfg, GrammarError};
use crate::tree::{SkeletalAlphabet, Tree};

/// Which witness the teacher returns when the hypothesis is wrong.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CounterexamplePolicy {
    /// The `≺_T`-least witness.
    #[default]
    Minimal,
    /// The `≺_T`-least witness among the deepest ones.
    MaximalDepth,
    /// The least witness of a depth drawn from the given seed.
    Random(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EquivalenceAnswer {
    Yes,
    Counterexample(Tree),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TeacherError {
    #[error("membership query of depth {depth} exceeds the bound {ell}")]
    QueryTooDeep { depth: usize, ell: usize },
    #[error("membership queries need a tree of depth at least 1")]
    LeafQuery,
    #[error("hypothesis terminals differ from the target's")]
    TerminalMismatch,
    #[error("invalid hypothesis: {0}")]
    Hypothesis(#[from] GrammarError),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeacherStats {
    pub membership_queries: usize,
    pub equivalence_queries: usize,
    pub max_counterexample_size: usize,
}

#[derive(Debug, Clone)]
pub struct Teacher {
    target: TreeAutomaton,
    ell: Option<usize>,
    policy: CounterexamplePolicy,
    rng: ChaCha8Rng,
    stats: TeacherStats,
    max_query_depth: usize,
}

impl Teacher {
    /// A teacher answering cover queries with respect to `ell`.
    pub fn cover(target: &Cfg, ell: usize, policy: CounterexamplePolicy) -> Result<Teacher, GrammarError> {
        assert!(ell >= 1, "the depth bound must be positive");
        Teacher::build(target, Some(ell), policy)
    }

    /// A teacher answering exact structural-equivalence queries.
    pub fn exact(target: &Cfg, policy: CounterexamplePolicy) -> Result<Teacher, GrammarError> {
        Teacher::build(target, None, policy)
    }

    fn build(target: &Cfg, ell: Option<usize>, policy: CounterexamplePolicy) -> Result<Teacher, GrammarError> {
        let seed = match policy {
            CounterexamplePolicy::Random(seed) => seed,
            _ => 0,
        };
        Ok(Teacher {
            target: target.na()?.determinize(),
            ell,
            policy,
            rng: ChaCha8Rng::seed_from_u64(seed),
            stats: TeacherStats::default(),
            max_query_depth: 0,
        })
    }

    pub fn alphabet(&self) -> &SkeletalAlphabet {
        self.target.alphabet()
    }

    /// The cover bound, or `None` in exact mode.
    pub fn ell(&self) -> Option<usize> {
        self.ell
    }

    pub fn policy(&self) -> CounterexamplePolicy {
        self.policy
    }

    /// The determinized target automaton.
    pub fn target(&self) -> &TreeAutomaton {
        &self.target
    }

    pub fn stats(&self) -> &TeacherStats {
        &self.stats
    }

    /// Depth of the deepest membership query asked so far.
    pub fn max_query_depth(&self) -> usize {
        self.max_query_depth
    }

    pub fn membership(&mut self, s: &Tree) -> Result<bool, TeacherError> {
        let depth = s.depth();
        if depth == 0 {
            return Err(TeacherError::LeafQuery);
        }
        if let Some(ell) = self.ell {
            if depth > ell {
                return Err(TeacherError::QueryTooDeep { depth, ell });
            }
        }
        self.stats.membership_queries += 1;
        self.max_query_depth = self.max_query_depth.max(depth);
        Ok(self.target.accepts(s))
    }

    pub fn equivalence(&mut self, hypothesis: &Cfg) -> Result<EquivalenceAnswer, TeacherError> {
        if hypothesis.terminals != self.target.alphabet().terminals() {
            return Err(TeacherError::TerminalMismatch);
        }
        let hyp = hypothesis.na()?.determinize();
        self.stats.equivalence_queries += 1;
        let first_only = self.policy == CounterexamplePolicy::Minimal;
        let mut witnesses = level_walk(&self.target, &hyp, self.ell, first_only);
        if witnesses.is_empty() {
            return Ok(EquivalenceAnswer::Yes);
        }
        let pick = match self.policy {
            CounterexamplePolicy::Minimal => 0,
            CounterexamplePolicy::MaximalDepth => witnesses.len() - 1,
            CounterexamplePolicy::Random(_) => self.rng.gen_range(0..witnesses.len()),
        };
        let t = witnesses.swap_remove(pick);
        self.stats.max_counterexample_size = self.stats.max_counterexample_size.max(t.size());
        Ok(EquivalenceAnswer::Counterexample(t))
    }
}
