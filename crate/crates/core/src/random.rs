//! Seeded random ε-free grammars for experiments.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grammar::{Cfg, Production};

const NONTERMINALS: [&str; 8] = ["S", "A", "B", "C", "D", "E", "F", "G"];
const TERMINALS: [&str; 8] = ["a", "b", "c", "d", "e", "f", "g", "h"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomParams {
    pub max_nonterminals: usize,
    pub max_terminals: usize,
    pub max_rhs: usize,
    pub max_productions: usize,
    /// Reject grammars with more skeletons than this up to `cap_depth`.
    pub skeleton_cap: u128,
    pub cap_depth: usize,
    pub max_tries: usize,
}

impl Default for RandomParams {
    fn default() -> Self {
        RandomParams {
            max_nonterminals: 4,
            max_terminals: 3,
            max_rhs: 3,
            max_productions: 8,
            skeleton_cap: 5000,
            cap_depth: 4,
            max_tries: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RandomError {
    #[error("parameters out of range: {0}")]
    Params(String),
    #[error("no acceptable grammar after {0} tries")]
    Exhausted(usize),
}

/// A grammar whose nonterminals are all productive and reachable, drawn
/// from a ChaCha8 stream seeded with `seed`.
pub fn random_grammar(seed: u64, params: &RandomParams) -> Result<Cfg, RandomError> {
    let p = params;
    if p.max_nonterminals == 0 || p.max_nonterminals > NONTERMINALS.len() {
        return Err(RandomError::Params(format!(
            "nonterminals must be in 1..={}",
            NONTERMINALS.len()
        )));
    }
    if p.max_terminals == 0 || p.max_terminals > TERMINALS.len() {
        return Err(RandomError::Params(format!("terminals must be in 1..={}", TERMINALS.len())));
    }
    if p.max_rhs == 0 {
        return Err(RandomError::Params("rhs length must be positive".into()));
    }
    if p.max_productions == 0 {
        return Err(RandomError::Params("at least one production is needed".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..p.max_tries {
        if let Some(g) = attempt(&mut rng, p) {
            return Ok(g);
        }
    }
    Err(RandomError::Exhausted(p.max_tries))
}

fn attempt(rng: &mut ChaCha8Rng, p: &RandomParams) -> Option<Cfg> {
    let n = rng.gen_range(1..=p.max_nonterminals.min(p.max_productions));
    let t = rng.gen_range(1..=p.max_terminals);
    let count = rng.gen_range(n..=p.max_productions);
    let nts: Vec<String> = NONTERMINALS[..n].iter().map(|s| s.to_string()).collect();
    let terminals: Vec<String> = TERMINALS[..t].iter().map(|s| s.to_string()).collect();
    let symbols: Vec<&String> = nts.iter().chain(terminals.iter()).collect();
    let mut seen = BTreeSet::new();
    let mut productions = Vec::new();
    for i in 0..count {
        let lhs = if i < n { nts[i].clone() } else { nts.choose(rng)?.clone() };
        let len = rng.gen_range(1..=p.max_rhs);
        let rhs: Vec<String> = (0..len).map(|_| symbols.choose(rng).map(|s| s.to_string())).collect::<Option<_>>()?;
        let prod = Production { lhs, rhs };
        if seen.insert(prod.clone()) {
            productions.push(prod);
        }
    }
    let g = Cfg {
        nonterminals: nts.clone(),
        terminals,
        productions,
        start: "S".to_string(),
    };
    if g.productive().len() != n || g.reachable().len() != n {
        return None;
    }
    // renumber nonterminals in order of first appearance so text round-trips
    let g = Cfg::parse(&g.to_string()).ok()?;
    let counts = g.na().ok()?.count_accepted_upto(p.cap_depth);
    let total = counts.iter().fold(0u128, |acc, c| acc.saturating_add(*c));
    (total <= p.skeleton_cap).then_some(g)
}
