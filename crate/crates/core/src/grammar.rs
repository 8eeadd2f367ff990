//! ε-free context-free grammars, their derivation trees and skeletons, and
//! the translations between grammars and tree automata.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::automaton::{Input, Rule, TreeAutomaton};
use crate::tree::{SkeletalAlphabet, Tree, TreeError, HOLE};

/// The first invariant a grammar breaks.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("empty rhs in a production of `{lhs}`")]
    EmptyRhs { lhs: String },
    #[error("unknown symbol `{symbol}`")]
    UnknownSymbol { symbol: String },
    #[error("left-hand side `{symbol}` is not a nonterminal")]
    BadLhs { symbol: String },
    #[error("start symbol `{symbol}` is not a nonterminal")]
    BadStart { symbol: String },
    #[error("`{symbol}` is both a terminal and a nonterminal")]
    Overlap { symbol: String },
    #[error("duplicate symbol `{symbol}`")]
    Duplicate { symbol: String },
    #[error("no terminals declared")]
    NoTerminals,
    #[error("symbol name `{symbol}` cannot be written in the text formats")]
    BadName { symbol: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrammarError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid grammar: {0}")]
    Invalid(#[from] Violation),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("derivation tree does not match the grammar")]
    NotADerivation,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Production {
    pub lhs: String,
    pub rhs: Vec<String>,
}

impl Production {
    pub fn new(lhs: &str, rhs: &[&str]) -> Self {
        Production {
            lhs: lhs.to_string(),
            rhs: rhs.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// `G = (N, Σ, P, S)`. Symbol order in `nonterminals` and `terminals` is
/// significant: terminal order is the order used to compare trees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cfg {
    pub nonterminals: Vec<String>,
    pub terminals: Vec<String>,
    pub productions: Vec<Production>,
    pub start: String,
}

impl Cfg {
    /// `({S}, Σ, ∅, S)`, the grammar with no skeletons at all.
    pub fn trivial(terminals: &[String]) -> Cfg {
        Cfg {
            nonterminals: vec!["S".to_string()],
            terminals: terminals.to_vec(),
            productions: Vec::new(),
            start: "S".to_string(),
        }
    }

    pub fn validate(&self) -> Result<(), Violation> {
        if self.terminals.is_empty() {
            return Err(Violation::NoTerminals);
        }
        let mut seen = BTreeSet::new();
        for t in &self.terminals {
            if !tree_identifier(t) {
                return Err(Violation::BadName { symbol: t.clone() });
            }
            if !seen.insert(t.as_str()) {
                return Err(Violation::Duplicate { symbol: t.clone() });
            }
        }
        let mut nts = BTreeSet::new();
        for n in &self.nonterminals {
            if !grammar_identifier(n) {
                return Err(Violation::BadName { symbol: n.clone() });
            }
            if seen.contains(n.as_str()) {
                return Err(Violation::Overlap { symbol: n.clone() });
            }
            if !nts.insert(n.as_str()) {
                return Err(Violation::Duplicate { symbol: n.clone() });
            }
        }
        if !nts.contains(self.start.as_str()) {
            return Err(Violation::BadStart {
                symbol: self.start.clone(),
            });
        }
        for p in &self.productions {
            if !nts.contains(p.lhs.as_str()) {
                return Err(Violation::BadLhs {
                    symbol: p.lhs.clone(),
                });
            }
            if p.rhs.is_empty() {
                return Err(Violation::EmptyRhs { lhs: p.lhs.clone() });
            }
            for u in &p.rhs {
                if !nts.contains(u.as_str()) && !seen.contains(u.as_str()) {
                    return Err(Violation::UnknownSymbol { symbol: u.clone() });
                }
            }
        }
        Ok(())
    }

    /// `{σ} ∪ Σ` with `ar(σ)` the set of right-hand-side lengths.
    pub fn skeletal_alphabet(&self) -> Result<SkeletalAlphabet, GrammarError> {
        self.validate()?;
        let arities = self.productions.iter().map(|p| p.rhs.len());
        Ok(SkeletalAlphabet::new(arities, self.terminals.clone())?)
    }

    pub fn is_terminal(&self, symbol: &str) -> bool {
        self.terminals.iter().any(|t| t == symbol)
    }

    fn nonterminal_index(&self) -> HashMap<&str, usize> {
        self.nonterminals
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect()
    }

    /// Nonterminals that derive at least one terminal tree.
    pub fn productive(&self) -> BTreeSet<String> {
        let mut productive: BTreeSet<String> = BTreeSet::new();
        loop {
            let before = productive.len();
            for p in &self.productions {
                if p
                    .rhs
                    .iter()
                    .all(|u| self.is_terminal(u) || productive.contains(u))
                {
                    productive.insert(p.lhs.clone());
                }
            }
            if productive.len() == before {
                return productive;
            }
        }
    }

    /// Nonterminals reachable from the start symbol.
    pub fn reachable(&self) -> BTreeSet<String> {
        let mut reached = BTreeSet::from([self.start.clone()]);
        let mut stack = vec![self.start.clone()];
        while let Some(x) = stack.pop() {
            for p in self.productions.iter().filter(|p| p.lhs == x) {
                for u in &p.rhs {
                    if !self.is_terminal(u) && reached.insert(u.clone()) {
                        stack.push(u.clone());
                    }
                }
            }
        }
        reached
    }

    /// Reads the line-oriented text format:
    ///
    /// ```text
    /// # comment
    /// start: S
    /// terminals: a b
    /// S -> A b
    /// A -> a
    /// ```
    ///
    /// Nonterminals are the start symbol and every other non-terminal symbol
    /// in order of first appearance.
    pub fn parse(text: &str) -> Result<Cfg, GrammarError> {
        let mut start: Option<String> = None;
        let mut terminals: Option<Vec<String>> = None;
        let mut productions = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = i + 1;
            let err = |msg: &str| GrammarError::Parse {
                line: lineno,
                msg: msg.to_string(),
            };
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("start:") {
                if start.is_some() {
                    return Err(err("duplicate `start:` line"));
                }
                let words: Vec<&str> = rest.split_whitespace().collect();
                if words.len() != 1 {
                    return Err(err("`start:` takes exactly one symbol"));
                }
                start = Some(words[0].to_string());
                continue;
            }
            if let Some(rest) = line.strip_prefix("terminals:") {
                if start.is_none() {
                    return Err(err("`start:` must come first"));
                }
                if terminals.is_some() {
                    return Err(err("duplicate `terminals:` line"));
                }
                terminals = Some(rest.split_whitespace().map(str::to_string).collect());
                continue;
            }
            if start.is_none() || terminals.is_none() {
                return Err(err("productions must follow `start:` and `terminals:`"));
            }
            let words: Vec<&str> = line.split_whitespace().collect();
            if words.len() < 2 || words[1] != "->" {
                return Err(err("expected `X -> U1 U2 …`"));
            }
            if words.len() == 2 {
                return Err(err("empty rhs (ε-productions are not allowed)"));
            }
            if words[2..].contains(&"->") {
                return Err(err("more than one `->`"));
            }
            productions.push(Production {
                lhs: words[0].to_string(),
                rhs: words[2..].iter().map(|s| s.to_string()).collect(),
            });
        }
        let start = start.ok_or(GrammarError::Parse {
            line: 0,
            msg: "missing `start:` line".into(),
        })?;
        let terminals = terminals.ok_or(GrammarError::Parse {
            line: 0,
            msg: "missing `terminals:` line".into(),
        })?;
        let mut nonterminals = vec![start.clone()];
        let mut add = |s: &String| {
            if !terminals.contains(s) && !nonterminals.contains(s) {
                nonterminals.push(s.clone());
            }
        };
        for p in &productions {
            add(&p.lhs);
            p.rhs.iter().for_each(&mut add);
        }
        let g = Cfg {
            nonterminals,
            terminals,
            productions,
            start,
        };
        g.validate()?;
        Ok(g)
    }

    /// Skeletons of all derivation trees of depth at most `ell`.
    ///
    /// Computed bottom-up per (nonterminal, exact depth), so derivation
    /// trees are never materialised. A nonterminal is only expanded to the
    /// depth at which it can still occur in a tree of depth at most `ell`,
    /// which keeps sink-like nonterminals from dominating the cost.
    pub fn skeletons_upto(&self, ell: usize) -> Result<BTreeSet<Tree>, GrammarError> {
        let alphabet = self.skeletal_alphabet()?;
        let index = self.nonterminal_index();
        let n = self.nonterminals.len();
        let budget = self.depth_budgets(&index, ell);
        // exact[x][d]: skeletons from nonterminal x of depth exactly d
        let mut exact: Vec<Vec<BTreeSet<Tree>>> = vec![vec![BTreeSet::new()]; n];
        let leaf = |u: &str| alphabet.terminal(u).map(Tree::leaf);
        for d in 1..=ell {
            let mut level: Vec<BTreeSet<Tree>> = vec![BTreeSet::new(); n];
            for p in &self.productions {
                if budget[index[p.lhs.as_str()]].is_none_or(|b| d > b) {
                    continue;
                }
                let options: Vec<(Vec<Tree>, Vec<Tree>)> = p
                    .rhs
                    .iter()
                    .map(|u| match leaf(u) {
                        Some(t) if d == 1 => (Vec::new(), vec![t]),
                        Some(t) => (vec![t], Vec::new()),
                        None => {
                            let x = index[u.as_str()];
                            let shallow: Vec<Tree> = exact[x][..d - 1]
                                .iter()
                                .flat_map(|s| s.iter().cloned())
                                .collect();
                            let deep: Vec<Tree> = exact[x][d - 1].iter().cloned().collect();
                            (shallow, deep)
                        }
                    })
                    .collect();
                let target = &mut level[index[p.lhs.as_str()]];
                product_with_one_deep(&options, &mut |children| {
                    target.insert(Tree::node(children));
                });
            }
            for (x, set) in level.into_iter().enumerate() {
                exact[x].push(set);
            }
        }
        let s = index[self.start.as_str()];
        Ok(exact[s].iter().flat_map(|set| set.iter().cloned()).collect())
    }

    /// Least depth of a skeleton derivable from each nonterminal.
    fn min_depths(&self, index: &HashMap<&str, usize>) -> Vec<Option<usize>> {
        let mut least: Vec<Option<usize>> = vec![None; self.nonterminals.len()];
        loop {
            let mut changed = false;
            for p in &self.productions {
                let children: Option<Vec<usize>> = p
                    .rhs
                    .iter()
                    .map(|u| match index.get(u.as_str()) {
                        Some(&x) => least[x],
                        None => Some(0),
                    })
                    .collect();
                let Some(d) = children.map(|c| 1 + c.into_iter().max().unwrap_or(0)) else {
                    continue;
                };
                let x = index[p.lhs.as_str()];
                if least[x].is_none_or(|old| d < old) {
                    least[x] = Some(d);
                    changed = true;
                }
            }
            if !changed {
                return least;
            }
        }
    }

    /// For each nonterminal, the largest depth a subtree rooted at it can
    /// have inside a skeleton of depth at most `ell`; `None` if it never
    /// occurs in one.
    fn depth_budgets(&self, index: &HashMap<&str, usize>, ell: usize) -> Vec<Option<usize>> {
        let least = self.min_depths(index);
        let mut budget: Vec<Option<usize>> = vec![None; self.nonterminals.len()];
        budget[index[self.start.as_str()]] = Some(ell);
        loop {
            let mut changed = false;
            for p in &self.productions {
                let Some(b) = budget[index[p.lhs.as_str()]] else { continue };
                if b == 0 {
                    continue;
                }
                let nts: Vec<usize> = p.rhs.iter().filter_map(|u| index.get(u.as_str()).copied()).collect();
                if !nts.iter().all(|&u| least[u].is_some_and(|m| m < b)) {
                    continue;
                }
                for u in nts {
                    if budget[u].is_none_or(|old| old < b - 1) {
                        budget[u] = Some(b - 1);
                        changed = true;
                    }
                }
            }
            if !changed {
                return budget;
            }
        }
    }

    /// The nondeterministic tree automaton whose language is the set of
    /// skeletons: states are nonterminals, `σ(U₁,…,U_m) → X` per production.
    pub fn na(&self) -> Result<TreeAutomaton, GrammarError> {
        let alphabet = self.skeletal_alphabet()?;
        let index = self.nonterminal_index();
        let rules = self
            .productions
            .iter()
            .map(|p| Rule {
                inputs: p
                    .rhs
                    .iter()
                    .map(|u| match alphabet.terminal(u) {
                        Some(a) => Input::Terminal(a),
                        None => Input::State(index[u.as_str()]),
                    })
                    .collect(),
                target: index[p.lhs.as_str()],
            })
            .collect();
        let finals = BTreeSet::from([index[self.start.as_str()]]);
        TreeAutomaton::new(alphabet, self.nonterminals.clone(), finals, rules)
            .map_err(|e| GrammarError::Parse {
                line: 0,
                msg: e.to_string(),
            })
    }
}

/// Enumerates child tuples where slot `i` ranges over `shallow_i ∪ deep_i`
/// and at least one slot takes a `deep` option.
fn product_with_one_deep(options: &[(Vec<Tree>, Vec<Tree>)], f: &mut impl FnMut(Vec<Tree>)) {
    let m = options.len();
    for first_deep in 0..m {
        let slots: Vec<Vec<&Tree>> = options
            .iter()
            .enumerate()
            .map(|(i, (shallow, deep))| match i.cmp(&first_deep) {
                std::cmp::Ordering::Less => shallow.iter().collect(),
                std::cmp::Ordering::Equal => deep.iter().collect(),
                std::cmp::Ordering::Greater => shallow.iter().chain(deep.iter()).collect(),
            })
            .collect();
        if slots.iter().any(Vec::is_empty) {
            continue;
        }
        let lens: Vec<usize> = slots.iter().map(Vec::len).collect();
        let mut idx = vec![0usize; m];
        'outer: loop {
            f(idx.iter().zip(&slots).map(|(&k, s)| s[k].clone()).collect());
            for k in (0..m).rev() {
                idx[k] += 1;
                if idx[k] < lens[k] {
                    continue 'outer;
                }
                idx[k] = 0;
            }
            break;
        }
    }
}

fn tree_identifier(s: &str) -> bool {
    grammar_identifier(s) && s != HOLE && !s.contains(['(', ')', ','])
}

fn grammar_identifier(s: &str) -> bool {
    !s.is_empty() && !s.contains(char::is_whitespace) && s != "->" && !s.starts_with('#')
}

/// `G(𝒜)`: a production `q → q₁…q_m` per rule `σ(q₁,…,q_m) → q`, plus
/// `S' → q₁…q_m` when `q` is final, with `S'` a fresh start symbol.
pub fn g_of(a: &TreeAutomaton) -> Cfg {
    let terminals = a.alphabet().terminals().to_vec();
    let taken: BTreeSet<&str> = terminals.iter().map(String::as_str).collect();
    let mut used: BTreeSet<String> = BTreeSet::new();
    let mut names = Vec::with_capacity(a.num_states());
    for label in a.labels() {
        let mut name = label.clone();
        while taken.contains(name.as_str()) || used.contains(&name) || !grammar_identifier(&name) {
            name = format!("{name}'");
        }
        used.insert(name.clone());
        names.push(name);
    }
    let mut start = "S'".to_string();
    while taken.contains(start.as_str()) || used.contains(&start) {
        start.push('\'');
    }
    let show = |x: &Input| match x {
        Input::Terminal(t) => a.alphabet().name(*t).to_string(),
        Input::State(q) => names[*q].clone(),
    };
    let mut productions: Vec<Production> = a
        .rules()
        .iter()
        .map(|r| Production {
            lhs: names[r.target].clone(),
            rhs: r.inputs.iter().map(show).collect(),
        })
        .collect();
    let mut start_rhs = BTreeSet::new();
    for r in a.rules().iter().filter(|r| a.is_final(r.target)) {
        let rhs: Vec<String> = r.inputs.iter().map(show).collect();
        if start_rhs.insert(rhs.clone()) {
            productions.push(Production {
                lhs: start.clone(),
                rhs,
            });
        }
    }
    let mut nonterminals = names;
    nonterminals.push(start.clone());
    Cfg {
        nonterminals,
        terminals,
        productions,
        start,
    }
}

impl fmt::Display for Cfg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "start: {}", self.start)?;
        writeln!(f, "terminals: {}", self.terminals.join(" "))?;
        for p in &self.productions {
            writeln!(f, "{} -> {}", p.lhs, p.rhs.join(" "))?;
        }
        Ok(())
    }
}

/// A derivation tree: terminal leaves and nonterminal-labelled nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DerivationTree {
    Leaf(String),
    Node {
        label: String,
        children: Vec<DerivationTree>,
    },
}

impl DerivationTree {
    pub fn node(label: &str, children: Vec<DerivationTree>) -> Self {
        DerivationTree::Node {
            label: label.to_string(),
            children,
        }
    }

    pub fn leaf(a: &str) -> Self {
        DerivationTree::Leaf(a.to_string())
    }

    pub fn root_symbol(&self) -> &str {
        match self {
            DerivationTree::Leaf(a) => a,
            DerivationTree::Node { label, .. } => label,
        }
    }

    /// The skeleton: every internal label becomes σ.
    pub fn sk(&self, alphabet: &SkeletalAlphabet) -> Result<Tree, GrammarError> {
        match self {
            DerivationTree::Leaf(a) => alphabet
                .terminal(a)
                .map(Tree::leaf)
                .ok_or_else(|| TreeError::UnknownTerminal(a.clone()).into()),
            DerivationTree::Node { children, .. } => {
                if children.is_empty() {
                    return Err(GrammarError::NotADerivation);
                }
                let kids = children
                    .iter()
                    .map(|c| c.sk(alphabet))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Tree::node(kids))
            }
        }
    }

    /// Whether every node matches a production of `g`.
    pub fn conforms_to(&self, g: &Cfg) -> bool {
        match self {
            DerivationTree::Leaf(a) => g.is_terminal(a),
            DerivationTree::Node { label, children } => {
                let rhs: Vec<&str> = children.iter().map(|c| c.root_symbol()).collect();
                g.productions
                    .iter()
                    .any(|p| &p.lhs == label && p.rhs.iter().map(String::as_str).eq(rhs.iter().copied()))
                    && children.iter().all(|c| c.conforms_to(g))
            }
        }
    }

    pub fn yield_word(&self) -> Vec<&str> {
        match self {
            DerivationTree::Leaf(a) => vec![a.as_str()],
            DerivationTree::Node { children, .. } => {
                children.iter().flat_map(|c| c.yield_word()).collect()
            }
        }
    }
}
