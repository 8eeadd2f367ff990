//! Learning cover context-free grammars from structural descriptions.
//!
//! A hidden ε-free grammar is known to a [`teacher::Teacher`] only through
//! its skeletons (derivation trees with every internal label replaced by
//! σ). The [`learner`] recovers a grammar whose skeletons of depth at most
//! `ℓ` agree with the hidden one, by filling an [`table::ObservationTable`]
//! with membership answers and proposing hypotheses until the teacher
//! accepts. An exact learner that ignores the depth bound is included as a
//! baseline.

pub mod automaton;
pub mod cli;
pub mod grammar;
pub mod learner;
pub mod random;
pub mod table;
pub mod teacher;
pub mod tree;

pub use automaton::{Comparison, Input, MinStates, Rule, StateId, TreeAutomaton};
pub use grammar::{Cfg, DerivationTree, Production, Violation};
pub use learner::{learn_cover, learn_exact, LearnResult, LearnerConfig, SessionStats};
pub use table::{ObservationTable, TValue};
pub use teacher::{CounterexamplePolicy, EquivalenceAnswer, Teacher};
pub use tree::{enumerate_trees, Context, Position, SkeletalAlphabet, Terminal, Tree};
