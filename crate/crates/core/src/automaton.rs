//! Bottom-up tree automata over a skeletal alphabet.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tree::{for_each_tuple, Context, SkeletalAlphabet, Terminal, Tree};

pub type StateId = usize;

/// One argument of a rule: a terminal leaf or a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Input {
    Terminal(Terminal),
    State(StateId),
}

/// `σ(inputs) → target`; the arity is `inputs.len()`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rule {
    pub inputs: Vec<Input>,
    pub target: StateId,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AutomatonError {
    #[error("rule {index}: {msg}")]
    BadRule { index: usize, msg: String },
    #[error("final state {0} does not exist")]
    BadFinal(StateId),
    #[error("automaton too large to index")]
    TooLarge,
    #[error("malformed automaton document: {0}")]
    Malformed(String),
}

/// Result of comparing two automata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Comparison {
    Equal,
    Counterexample(Tree),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinStates {
    Found(usize),
    Exceeded,
}

/// An NFTA or DFTA. States are `0..labels.len()`; rules keep insertion
/// order, which every algorithm here follows.
#[derive(Debug, Clone)]
pub struct TreeAutomaton {
    alphabet: SkeletalAlphabet,
    labels: Vec<String>,
    finals: BTreeSet<StateId>,
    rules: Vec<Rule>,
    deterministic: bool,
    base: u128,
    // encoded input tuple -> targets in rule order
    index: HashMap<u128, Vec<StateId>>,
}

impl PartialEq for TreeAutomaton {
    fn eq(&self, other: &Self) -> bool {
        self.alphabet == other.alphabet
            && self.labels == other.labels
            && self.finals == other.finals
            && self.rules == other.rules
    }
}

impl Eq for TreeAutomaton {}

impl TreeAutomaton {
    pub fn new(
        alphabet: SkeletalAlphabet,
        labels: Vec<String>,
        finals: BTreeSet<StateId>,
        rules: Vec<Rule>,
    ) -> Result<Self, AutomatonError> {
        let n = labels.len();
        if let Some(&q) = finals.iter().find(|&&q| q >= n) {
            return Err(AutomatonError::BadFinal(q));
        }
        let base = (alphabet.terminal_count() + n + 1) as u128;
        if base.checked_pow(alphabet.max_arity() as u32).is_none() {
            return Err(AutomatonError::TooLarge);
        }
        let mut a = TreeAutomaton {
            alphabet,
            labels,
            finals,
            rules: Vec::with_capacity(rules.len()),
            deterministic: true,
            base,
            index: HashMap::new(),
        };
        for (i, r) in rules.into_iter().enumerate() {
            let bad = |msg: String| AutomatonError::BadRule { index: i, msg };
            if !a.alphabet.arities().contains(&r.inputs.len()) {
                return Err(bad(format!("arity {} is not declared", r.inputs.len())));
            }
            if r.target >= n {
                return Err(bad(format!("target {} does not exist", r.target)));
            }
            for x in &r.inputs {
                match *x {
                    Input::State(q) if q >= n => {
                        return Err(bad(format!("state {q} does not exist")))
                    }
                    Input::Terminal(t) if t.index() >= a.alphabet.terminal_count() => {
                        return Err(bad(format!("terminal {} does not exist", t.index())))
                    }
                    _ => {}
                }
            }
            let targets = a.index.entry(a.key(r.inputs.iter().copied())).or_default();
            if targets.contains(&r.target) {
                continue;
            }
            targets.push(r.target);
            if targets.len() > 1 {
                a.deterministic = false;
            }
            a.rules.push(r);
        }
        Ok(a)
    }

    pub fn alphabet(&self) -> &SkeletalAlphabet {
        &self.alphabet
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn num_states(&self) -> usize {
        self.labels.len()
    }

    pub fn finals(&self) -> &BTreeSet<StateId> {
        &self.finals
    }

    pub fn is_final(&self, q: StateId) -> bool {
        self.finals.contains(&q)
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// At most one target per input tuple.
    pub fn is_deterministic(&self) -> bool {
        self.deterministic
    }

    fn key(&self, inputs: impl Iterator<Item = Input>) -> u128 {
        let p = self.alphabet.terminal_count();
        inputs.fold(0u128, |acc, x| {
            let sym = match x {
                Input::Terminal(t) => t.index(),
                Input::State(q) => p + q,
            };
            acc * self.base + sym as u128 + 1
        })
    }

    /// Targets of all rules with exactly these inputs.
    pub fn targets(&self, inputs: &[Input]) -> &[StateId] {
        self.targets_iter(inputs.iter().copied())
    }

    fn targets_iter(&self, inputs: impl Iterator<Item = Input>) -> &[StateId] {
        self.index
            .get(&self.key(inputs))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    fn input_of(&self, t: &Tree) -> Option<Input> {
        match t.terminal() {
            Some(a) => Some(Input::Terminal(a)),
            None => self.run(t).map(Input::State),
        }
    }

    /// `δ*(t)` following the first rule for each input tuple; `None` when
    /// some lookup is undefined or `t` is a leaf. Meant for deterministic
    /// automata.
    pub fn run(&self, t: &Tree) -> Option<StateId> {
        if t.is_leaf() {
            return None;
        }
        let inputs = t
            .children()
            .iter()
            .map(|c| self.input_of(c))
            .collect::<Option<Vec<_>>>()?;
        self.targets(&inputs).first().copied()
    }

    /// Every state some run on `t` reaches, ascending.
    pub fn states_of(&self, t: &Tree) -> BTreeSet<StateId> {
        let mut out = BTreeSet::new();
        if t.is_leaf() {
            return out;
        }
        let options: Vec<Vec<Input>> = t
            .children()
            .iter()
            .map(|c| match c.terminal() {
                Some(a) => vec![Input::Terminal(a)],
                None => self.states_of(c).into_iter().map(Input::State).collect(),
            })
            .collect();
        if options.iter().any(Vec::is_empty) {
            return out;
        }
        let mut buf = vec![Input::State(0); options.len()];
        let mut idx = vec![0usize; options.len()];
        loop {
            for (j, &k) in idx.iter().enumerate() {
                buf[j] = options[j][k];
            }
            out.extend(self.targets(&buf));
            let mut j = idx.len();
            loop {
                if j == 0 {
                    return out;
                }
                j -= 1;
                idx[j] += 1;
                if idx[j] < options[j].len() {
                    break;
                }
                idx[j] = 0;
            }
        }
    }

    pub fn accepts(&self, t: &Tree) -> bool {
        if self.deterministic {
            self.run(t).is_some_and(|q| self.is_final(q))
        } else {
            self.states_of(t).iter().any(|q| self.is_final(*q))
        }
    }

    /// Subset construction over reachable subsets. The result is partial: a
    /// tuple whose target set would be empty has no rule.
    pub fn determinize(&self) -> TreeAutomaton {
        let p = self.alphabet.terminal_count();
        let mut subsets: Vec<BTreeSet<StateId>> = Vec::new();
        let mut ids: HashMap<BTreeSet<StateId>, StateId> = HashMap::new();
        let mut rules: Vec<Rule> = Vec::new();
        let by_arity: BTreeMap<usize, Vec<&Rule>> =
            self.alphabet.arities().iter().map(|&m| (m, self.rules.iter().filter(|r| r.inputs.len() == m).collect())).collect();
        // symbols: 0..p terminals, p.. subsets; tuples must use a symbol >= old
        let mut old = 0;
        loop {
            let total = p + subsets.len();
            if old == total {
                break;
            }
            let mut found: Vec<(Vec<usize>, BTreeSet<StateId>)> = Vec::new();
            for (&m, nrules) in &by_arity {
                for_each_tuple(total, m, &mut |idx| {
                    if idx.iter().all(|&s| s < old) {
                        return;
                    }
                    let target: BTreeSet<StateId> = nrules
                        .iter()
                        .filter(|r| {
                            r.inputs.iter().zip(idx).all(|(x, &s)| match *x {
                                Input::Terminal(a) => s < p && a.index() == s,
                                Input::State(q) => s >= p && subsets[s - p].contains(&q),
                            })
                        })
                        .map(|r| r.target)
                        .collect();
                    if !target.is_empty() {
                        found.push((idx.to_vec(), target));
                    }
                });
            }
            old = total;
            for (idx, target) in found {
                let id = *ids.entry(target.clone()).or_insert_with(|| {
                    subsets.push(target);
                    subsets.len() - 1
                });
                let inputs = idx
                    .iter()
                    .map(|&s| {
                        if s < p {
                            Input::Terminal(Terminal::new(s))
                        } else {
                            Input::State(s - p)
                        }
                    })
                    .collect();
                rules.push(Rule { inputs, target: id });
            }
        }
        let labels = subsets
            .iter()
            .map(|set| {
                let names: Vec<&str> = set.iter().map(|&q| self.labels[q].as_str()).collect();
                format!("{{{}}}", names.join(","))
            })
            .collect();
        let finals = subsets
            .iter()
            .enumerate()
            .filter(|(_, set)| set.iter().any(|q| self.is_final(*q)))
            .map(|(i, _)| i)
            .collect();
        TreeAutomaton::new(self.alphabet.clone(), labels, finals, rules)
            .expect("subset construction yields a well-formed automaton")
    }

    fn deterministic_view(&self) -> std::borrow::Cow<'_, TreeAutomaton> {
        if self.deterministic {
            std::borrow::Cow::Borrowed(self)
        } else {
            std::borrow::Cow::Owned(self.determinize())
        }
    }

    /// Number of accepted trees of each depth `1..=ell` (index 0 is depth 1),
    /// saturating at `u128::MAX`.
    pub fn count_accepted_upto(&self, ell: usize) -> Vec<u128> {
        let a = self.deterministic_view();
        let n = a.num_states();
        // le[d][q]: trees of depth <= d reaching q
        let mut le: Vec<Vec<u128>> = vec![vec![0; n]];
        let count_le = |le: &Vec<Vec<u128>>, d: isize, x: &Input| -> u128 {
            if d < 0 {
                return 0;
            }
            match x {
                Input::Terminal(_) => 1,
                Input::State(q) => le[d as usize][*q],
            }
        };
        let mut out = Vec::with_capacity(ell);
        for d in 1..=ell as isize {
            let mut exact = vec![0u128; n];
            for r in &a.rules {
                let prod = |e: isize| {
                    r.inputs
                        .iter()
                        .fold(1u128, |acc, x| acc.saturating_mul(count_le(&le, e, x)))
                };
                let hi = prod(d - 1);
                let lo = prod(d - 2);
                exact[r.target] = exact[r.target].saturating_add(hi.saturating_sub(lo));
            }
            let accepted = a
                .finals
                .iter()
                .fold(0u128, |acc, &q| acc.saturating_add(exact[q]));
            out.push(accepted);
            let last = le.last().unwrap();
            let next = last.iter().zip(&exact).map(|(x, y)| x.saturating_add(*y)).collect();
            le.push(next);
        }
        out
    }

    /// States reachable by some tree, ascending.
    pub fn reachable_states(&self) -> BTreeSet<StateId> {
        let mut reached = BTreeSet::new();
        loop {
            let before = reached.len();
            for r in &self.rules {
                if r.inputs.iter().all(|x| match x {
                    Input::Terminal(_) => true,
                    Input::State(q) => reached.contains(q),
                }) {
                    reached.insert(r.target);
                }
            }
            if reached.len() == before {
                return reached;
            }
        }
    }

    /// The automaton restricted to reachable states, renumbered in order.
    pub fn trim(&self) -> TreeAutomaton {
        let keep = self.reachable_states();
        let new_id: HashMap<StateId, StateId> =
            keep.iter().enumerate().map(|(i, &q)| (q, i)).collect();
        let rules = self
            .rules
            .iter()
            .filter(|r| {
                new_id.contains_key(&r.target)
                    && r.inputs.iter().all(|x| match x {
                        Input::State(q) => new_id.contains_key(q),
                        Input::Terminal(_) => true,
                    })
            })
            .map(|r| Rule {
                inputs: r
                    .inputs
                    .iter()
                    .map(|x| match *x {
                        Input::State(q) => Input::State(new_id[&q]),
                        t => t,
                    })
                    .collect(),
                target: new_id[&r.target],
            })
            .collect();
        TreeAutomaton::new(
            self.alphabet.clone(),
            keep.iter().map(|&q| self.labels[q].clone()).collect(),
            self.finals.iter().filter_map(|q| new_id.get(q).copied()).collect(),
            rules,
        )
        .expect("trimming keeps the automaton well-formed")
    }

    pub fn to_dump(&self) -> AutomatonDump {
        let show = |x: &Input| match *x {
            Input::Terminal(t) => DumpInput::Terminal(self.alphabet.name(t).to_string()),
            Input::State(q) => DumpInput::State(q),
        };
        AutomatonDump {
            version: DUMP_VERSION,
            arities: self.alphabet.arities().iter().copied().collect(),
            terminals: self.alphabet.terminals().to_vec(),
            states: (0..self.num_states()).collect(),
            labels: self.labels.clone(),
            finals: self.finals.iter().copied().collect(),
            transitions: self
                .rules
                .iter()
                .map(|r| DumpTransition {
                    arity: r.inputs.len(),
                    inputs: r.inputs.iter().map(show).collect(),
                    to: r.target,
                })
                .collect(),
            deterministic: self.deterministic,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_dump()).expect("dump serializes")
    }

    pub fn from_json(text: &str) -> Result<TreeAutomaton, AutomatonError> {
        let dump: AutomatonDump =
            serde_json::from_str(text).map_err(|e| AutomatonError::Malformed(e.to_string()))?;
        TreeAutomaton::from_dump(&dump)
    }

    pub fn from_dump(d: &AutomatonDump) -> Result<TreeAutomaton, AutomatonError> {
        let bad = |msg: String| AutomatonError::Malformed(msg);
        if d.version != DUMP_VERSION {
            return Err(bad(format!("unsupported version {}", d.version)));
        }
        if d.states != (0..d.states.len()).collect::<Vec<_>>() {
            return Err(bad("states must be 0..n in order".into()));
        }
        let labels = if d.labels.is_empty() {
            d.states.iter().map(|q| format!("q{q}")).collect()
        } else if d.labels.len() == d.states.len() {
            d.labels.clone()
        } else {
            return Err(bad("one label per state expected".into()));
        };
        let alphabet = SkeletalAlphabet::new(d.arities.iter().copied(), d.terminals.clone())
            .map_err(|e| bad(e.to_string()))?;
        let mut rules = Vec::with_capacity(d.transitions.len());
        for tr in &d.transitions {
            if tr.arity != tr.inputs.len() {
                return Err(bad(format!("arity {} with {} inputs", tr.arity, tr.inputs.len())));
            }
            let inputs = tr
                .inputs
                .iter()
                .map(|x| match x {
                    DumpInput::State(q) => Ok(Input::State(*q)),
                    DumpInput::Terminal(name) => alphabet
                        .terminal(name)
                        .map(Input::Terminal)
                        .ok_or_else(|| bad(format!("unknown terminal `{name}`"))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            rules.push(Rule {
                inputs,
                target: tr.to,
            });
        }
        let a = TreeAutomaton::new(alphabet, labels, d.finals.iter().copied().collect(), rules)?;
        if a.deterministic != d.deterministic {
            return Err(bad("deterministic flag does not match the transitions".into()));
        }
        Ok(a)
    }

    /// Hypergraph rendering: one node per state and terminal, one box per rule.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph automaton {\n  rankdir=BT;\n");
        for (q, label) in self.labels.iter().enumerate() {
            let shape = if self.is_final(q) { "doublecircle" } else { "circle" };
            let _ = writeln!(out, "  q{q} [label=\"{}\", shape={shape}];", escape(label));
        }
        for (i, name) in self.alphabet.terminals().iter().enumerate() {
            let _ = writeln!(out, "  t{i} [label=\"{}\", shape=plaintext];", escape(name));
        }
        for (i, r) in self.rules.iter().enumerate() {
            let _ = writeln!(out, "  r{i} [label=\"σ\", shape=box];");
            for (j, x) in r.inputs.iter().enumerate() {
                let src = match *x {
                    Input::Terminal(t) => format!("t{}", t.index()),
                    Input::State(q) => format!("q{q}"),
                };
                let _ = writeln!(out, "  {src} -> r{i} [label=\"{}\"];", j + 1);
            }
            let _ = writeln!(out, "  r{i} -> q{};", r.target);
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub const DUMP_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutomatonDump {
    pub version: u32,
    pub arities: Vec<usize>,
    pub terminals: Vec<String>,
    pub states: Vec<StateId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
    pub finals: Vec<StateId>,
    pub transitions: Vec<DumpTransition>,
    pub deterministic: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpTransition {
    pub arity: usize,
    pub inputs: Vec<DumpInput>,
    pub to: StateId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DumpInput {
    State(StateId),
    Terminal(String),
}

type Sig = (Option<StateId>, Option<StateId>);

/// Walks both automata depth by depth and returns, for every depth that has
/// one, the `≺_T`-least tree accepted by exactly one of them (ascending
/// depth). Without a bound the walk stops once no new state pair appears.
///
/// Per depth `d` and state pair, the least tree reaching that pair has every
/// child equal to either the overall least tree of its pair or the least one
/// of depth exactly `d - 1`, so only those candidates are combined.
pub(crate) fn level_walk(
    a: &TreeAutomaton,
    b: &TreeAutomaton,
    bound: Option<usize>,
    first_only: bool,
) -> Vec<Tree> {
    debug_assert!(a.is_deterministic() && b.is_deterministic());
    let arities: BTreeSet<usize> = a
        .alphabet()
        .arities()
        .union(b.alphabet().arities())
        .copied()
        .collect();
    let leaves = a.alphabet().leaves();
    let as_inputs = |s: &Sig| [s.0.map(Input::State), s.1.map(Input::State)];
    let mut global: HashMap<Sig, Tree> = HashMap::new();
    let mut exact_prev: Vec<(Sig, Tree)> = Vec::new();
    let mut witnesses = Vec::new();
    let mut d = 1;
    while bound.is_none_or(|l| d <= l) {
        let mut cands: Vec<(Tree, [Option<Input>; 2], bool)> = leaves
            .iter()
            .map(|t| {
                let x = Some(Input::Terminal(t.terminal().unwrap()));
                (t.clone(), [x, x], d == 1)
            })
            .collect();
        for (s, t) in &global {
            if t.depth() + 1 < d {
                cands.push((t.clone(), as_inputs(s), false));
            }
        }
        for (s, t) in &exact_prev {
            cands.push((t.clone(), as_inputs(s), true));
        }
        cands.sort_by(|x, y| x.0.cmp(&y.0));

        let mut level: HashMap<Sig, Tree> = HashMap::new();
        let mut buf: Vec<[Option<Input>; 2]> = Vec::new();
        for &m in &arities {
            for_each_tuple(cands.len(), m, &mut |idx| {
                if !idx.iter().any(|&i| cands[i].2) {
                    return;
                }
                buf.clear();
                buf.extend(idx.iter().map(|&i| cands[i].1));
                let side = |k: usize, aut: &TreeAutomaton| {
                    let xs: Option<Vec<Input>> = buf.iter().map(|c| c[k]).collect();
                    xs.and_then(|xs| aut.targets(&xs).first().copied())
                };
                let sig = (side(0, a), side(1, b));
                if sig == (None, None) {
                    return;
                }
                // tuples come lexicographically within one arity, but a
                // longer tuple can still precede a shorter one
                let tree = || Tree::node(idx.iter().map(|&i| cands[i].0.clone()).collect());
                match level.entry(sig) {
                    Entry::Vacant(e) => {
                        e.insert(tree());
                    }
                    Entry::Occupied(mut e) => {
                        let t = tree();
                        if t < *e.get() {
                            e.insert(t);
                        }
                    }
                }
            });
        }
        if level.is_empty() {
            break;
        }
        let accepting = |q: Option<StateId>, aut: &TreeAutomaton| q.is_some_and(|q| aut.is_final(q));
        let witness = level
            .iter()
            .filter(|(s, _)| accepting(s.0, a) != accepting(s.1, b))
            .map(|(_, t)| t)
            .min();
        if let Some(w) = witness {
            witnesses.push(w.clone());
            if first_only {
                break;
            }
        }
        let mut new = false;
        for (s, t) in &level {
            if !global.contains_key(s) {
                global.insert(*s, t.clone());
                new = true;
            }
        }
        if bound.is_none() && !new {
            break;
        }
        exact_prev = level.into_iter().collect();
        d += 1;
    }
    witnesses
}

/// Equal iff both accept the same trees of depth at most `ell`; otherwise
/// the `≺_T`-least tree of depth at most `ell` accepted by exactly one.
/// The automata must share terminals; their σ-arities may differ.
pub fn cover_equal(a1: &TreeAutomaton, a2: &TreeAutomaton, ell: usize) -> Comparison {
    compare(a1, a2, Some(ell))
}

/// Equal iff the languages coincide; otherwise the `≺_T`-least witness,
/// which in particular has minimal depth.
pub fn exact_equal(a1: &TreeAutomaton, a2: &TreeAutomaton) -> Comparison {
    compare(a1, a2, None)
}

fn compare(a1: &TreeAutomaton, a2: &TreeAutomaton, bound: Option<usize>) -> Comparison {
    assert_eq!(
        a1.alphabet().terminals(),
        a2.alphabet().terminals(),
        "compared automata must share terminals"
    );
    let (d1, d2) = (a1.deterministic_view(), a2.deterministic_view());
    match level_walk(&d1, &d2, bound, true).into_iter().next() {
        Some(t) => Comparison::Counterexample(t),
        None => Comparison::Equal,
    }
}

/// Whether a bijection of states maps finals onto finals and rules onto
/// rules. Rules force the image of a state once its inputs are mapped;
/// states left over (unreachable ones) are matched by backtracking.
pub fn isomorphic(a1: &TreeAutomaton, a2: &TreeAutomaton) -> bool {
    if a1.alphabet() != a2.alphabet()
        || a1.num_states() != a2.num_states()
        || a1.finals().len() != a2.finals().len()
        || a1.rules().len() != a2.rules().len()
    {
        return false;
    }
    let n = a1.num_states();
    iso_search(a1, a2, vec![None; n], vec![None; n])
}

fn iso_search(
    a1: &TreeAutomaton,
    a2: &TreeAutomaton,
    mut phi: Vec<Option<StateId>>,
    mut inv: Vec<Option<StateId>>,
) -> bool {
    let map_input = |phi: &[Option<StateId>], x: &Input| match *x {
        Input::Terminal(t) => Some(Input::Terminal(t)),
        Input::State(q) => phi[q].map(Input::State),
    };
    loop {
        let mut changed = false;
        for r in a1.rules() {
            let Some(image) = r.inputs.iter().map(|x| map_input(&phi, x)).collect::<Option<Vec<_>>>() else {
                continue;
            };
            let targets = a2.targets(&image);
            if targets.len() != a1.targets(&r.inputs).len() {
                return false;
            }
            match phi[r.target] {
                Some(q2) => {
                    if !targets.contains(&q2) {
                        return false;
                    }
                }
                None if targets.len() == 1 => {
                    let q2 = targets[0];
                    if inv[q2].is_some() || a1.is_final(r.target) != a2.is_final(q2) {
                        return false;
                    }
                    phi[r.target] = Some(q2);
                    inv[q2] = Some(r.target);
                    changed = true;
                }
                None => {}
            }
        }
        if !changed {
            break;
        }
    }
    match phi.iter().position(Option::is_none) {
        None => a1.rules().iter().all(|r| {
            let image: Vec<Input> = r.inputs.iter().map(|x| map_input(&phi, x).unwrap()).collect();
            a2.targets(&image).contains(&phi[r.target].unwrap())
        }),
        Some(q) => (0..a2.num_states()).any(|q2| {
            if inv[q2].is_some() || a1.is_final(q) != a2.is_final(q2) {
                return false;
            }
            let (mut phi, mut inv) = (phi.clone(), inv.clone());
            phi[q] = Some(q2);
            inv[q2] = Some(q);
            iso_search(a1, a2, phi, inv)
        }),
    }
}

/// Smallest `k ≤ max_states` such that some total DFTA with `k` states
/// accepts exactly `target` among the trees of depth at most `ell`.
///
/// The search runs the candidate automaton in lockstep with a trie over the
/// subterms of `target`, in which every other tree falls into a dead node.
/// Pairs of (candidate state, trie node) are generated depth by depth and a
/// transition is chosen the first time a pair needs it, introducing new
/// states in order. Two trees may share a state only if no context keeping
/// both within depth `ell` puts exactly one of them into `target`.
///
/// Panics if `max_states > 3` or a target tree is deeper than `ell`.
pub fn brute_min_cover_states(
    target: &BTreeSet<Tree>,
    alphabet: &SkeletalAlphabet,
    ell: usize,
    max_states: usize,
) -> MinStates {
    assert!(max_states <= 3, "exhaustive search is limited to 3 states");
    assert!(target.iter().all(|t| t.depth() <= ell), "target tree deeper than the bound");
    let shared = MinShared::new(target, alphabet, ell);
    for k in 1..=max_states {
        let mut start = MinSearch {
            k,
            used: 0,
            delta: HashMap::new(),
            held: vec![Vec::new(); k],
            older: BTreeSet::new(),
            prev: BTreeSet::new(),
            current: BTreeSet::new(),
            depth: 1,
            combos: Rc::new(Vec::new()),
            next: 0,
        };
        start.combos = Rc::new(shared.combos(&start));
        if start.run(&shared) {
            return MinStates::Found(k);
        }
    }
    MinStates::Exceeded
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum TrieInput {
    Leaf(Terminal),
    Node(usize),
}

/// A candidate state paired with a trie node, `None` being the dead node.
type Pair = (StateId, Option<usize>);

#[derive(Clone, Copy)]
enum Slot {
    Leaf(Terminal),
    Pair(Pair),
}

struct MinShared {
    leaves: Vec<Terminal>,
    arities: Vec<usize>,
    trie: HashMap<Vec<TrieInput>, usize>,
    /// Trie nodes are items `0..n`; a dead tree of depth `d` is item `n + d − 1`.
    nodes: usize,
    /// `apart[i][j]`: items `i` and `j` cannot share a state.
    apart: Vec<Vec<bool>>,
    ell: usize,
}

impl MinShared {
    fn new(target: &BTreeSet<Tree>, alphabet: &SkeletalAlphabet, ell: usize) -> MinShared {
        let trees: Vec<Tree> = target
            .iter()
            .flat_map(|t| t.subterms())
            .filter(|t| !t.is_leaf())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let position: HashMap<&Tree, usize> = trees.iter().enumerate().map(|(i, t)| (t, i)).collect();
        let trie = trees
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let key = t
                    .children()
                    .iter()
                    .map(|c| c.terminal().map_or_else(|| TrieInput::Node(position[c]), TrieInput::Leaf))
                    .collect();
                (key, i)
            })
            .collect();
        // contexts that put each subterm into the target
        let mut into: Vec<HashSet<Context>> = vec![HashSet::new(); trees.len()];
        for t in target {
            for p in t.positions() {
                let (c, sub) = t.split_at(&p).expect("own position");
                if !sub.is_leaf() {
                    into[position[&sub]].insert(c);
                }
            }
        }
        let n = trees.len();
        let items = n + ell;
        let depth = |i: usize| if i < n { trees[i].depth() } else { i - n + 1 };
        let empty = HashSet::new();
        let contexts = |i: usize| if i < n { &into[i] } else { &empty };
        let mut apart = vec![vec![false; items]; items];
        #[allow(clippy::needless_range_loop)] // fills both halves at once
        for i in 0..items {
            for j in 0..i {
                let budget = ell - depth(i).max(depth(j));
                let differs = |a: &HashSet<Context>, b: &HashSet<Context>| {
                    a.iter().any(|c| c.hole_depth() <= budget && !b.contains(c))
                };
                let d = differs(contexts(i), contexts(j)) || differs(contexts(j), contexts(i));
                apart[i][j] = d;
                apart[j][i] = d;
            }
        }
        MinShared {
            leaves: alphabet.leaves().iter().filter_map(Tree::terminal).collect(),
            arities: alphabet.arities().iter().copied().collect(),
            trie,
            nodes: n,
            apart,
            ell,
        }
    }

    /// Child tuples for the current depth: each uses at least one slot of
    /// depth exactly `depth − 1` (a leaf when `depth = 1`).
    fn combos(&self, s: &MinSearch) -> Vec<Vec<Slot>> {
        let mut slots: Vec<(Slot, bool)> = self.leaves.iter().map(|&a| (Slot::Leaf(a), s.depth == 1)).collect();
        slots.extend(s.older.iter().map(|&p| (Slot::Pair(p), false)));
        slots.extend(s.prev.iter().map(|&p| (Slot::Pair(p), true)));
        let mut out = Vec::new();
        for &m in &self.arities {
            for_each_tuple(slots.len(), m, &mut |idx| {
                if idx.iter().any(|&i| slots[i].1) {
                    out.push(idx.iter().map(|&i| slots[i].0).collect());
                }
            });
        }
        out
    }

    fn trie_step(&self, combo: &[Slot]) -> Option<usize> {
        let key: Option<Vec<TrieInput>> = combo
            .iter()
            .map(|s| match *s {
                Slot::Leaf(a) => Some(TrieInput::Leaf(a)),
                Slot::Pair((_, p)) => p.map(TrieInput::Node),
            })
            .collect();
        key.and_then(|k| self.trie.get(&k).copied())
    }
}

#[derive(Clone)]
struct MinSearch {
    k: usize,
    used: usize,
    delta: HashMap<Vec<Input>, StateId>,
    /// Items reached in each state so far.
    held: Vec<Vec<usize>>,
    /// Pairs reached at depths below `depth − 1`.
    older: BTreeSet<Pair>,
    /// Pairs reached at depth exactly `depth − 1`.
    prev: BTreeSet<Pair>,
    /// Pairs reached so far at depth exactly `depth`.
    current: BTreeSet<Pair>,
    depth: usize,
    combos: Rc<Vec<Vec<Slot>>>,
    next: usize,
}

impl MinSearch {
    fn run(&mut self, shared: &MinShared) -> bool {
        loop {
            if self.next == self.combos.len() {
                if self.depth == shared.ell {
                    return true;
                }
                let prev = std::mem::take(&mut self.prev);
                self.older.extend(prev);
                self.prev = std::mem::take(&mut self.current);
                self.depth += 1;
                self.combos = Rc::new(shared.combos(self));
                self.next = 0;
                continue;
            }
            let combos = Rc::clone(&self.combos);
            let combo = &combos[self.next];
            let inputs: Vec<Input> = combo
                .iter()
                .map(|s| match *s {
                    Slot::Leaf(a) => Input::Terminal(a),
                    Slot::Pair((q, _)) => Input::State(q),
                })
                .collect();
            let p = shared.trie_step(combo);
            let item = p.unwrap_or(shared.nodes + self.depth - 1);
            if let Some(&q) = self.delta.get(&inputs) {
                if !self.settle(shared, q, p, item) {
                    return false;
                }
                self.next += 1;
                continue;
            }
            for q in 0..(self.used + 1).min(self.k) {
                let mut branch = self.clone();
                if !branch.settle(shared, q, p, item) {
                    continue;
                }
                branch.delta.insert(inputs.clone(), q);
                branch.used = branch.used.max(q + 1);
                branch.next += 1;
                if branch.run(shared) {
                    return true;
                }
            }
            return false;
        }
    }

    fn settle(&mut self, shared: &MinShared, q: StateId, p: Option<usize>, item: usize) -> bool {
        if !self.held[q].contains(&item) {
            if self.held[q].iter().any(|&j| shared.apart[item][j]) {
                return false;
            }
            self.held[q].push(item);
        }
        self.current.insert((q, p));
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::Cfg;
    use crate::tree::enumerate_trees;

    fn ab(arities: &[usize]) -> SkeletalAlphabet {
        SkeletalAlphabet::new(arities.iter().copied(), vec!["a", "b"]).unwrap()
    }

    fn example_one() -> Cfg {
        Cfg::parse("start: S\nterminals: a b\nS -> a\nS -> b\nS -> A b\nA -> a\nA -> A b\n")
            .unwrap()
    }

    fn chain() -> TreeAutomaton {
        let alpha = ab(&[1, 2]);
        let a = Input::Terminal(alpha.terminal("a").unwrap());
        let b = Input::Terminal(alpha.terminal("b").unwrap());
        TreeAutomaton::new(
            alpha,
            vec!["q".into(), "r".into()],
            BTreeSet::from([1]),
            vec![
                Rule { inputs: vec![a], target: 0 },
                Rule { inputs: vec![Input::State(0), b], target: 1 },
            ],
        )
        .unwrap()
    }

    #[test]
    fn run_examples() {
        let aut = chain();
        let alpha = aut.alphabet().clone();
        let t = |s: &str| alpha.parse_tree(s).unwrap();
        assert_eq!(aut.run(&t("s(a)")), Some(0));
        assert_eq!(aut.run(&t("s(s(a),b)")), Some(1));
        assert_eq!(aut.run(&t("s(b)")), None);
        assert!(aut.is_deterministic());
        let empty = TreeAutomaton::new(alpha.clone(), vec!["q".into()], BTreeSet::from([0]), vec![]).unwrap();
        assert!(!empty.accepts(&t("s(a)")));
    }

    #[test]
    fn na_accepts_example_one() {
        let g = example_one();
        let na = g.na().unwrap();
        let alpha = g.skeletal_alphabet().unwrap();
        assert!(na.accepts(&alpha.parse_tree("s(s(a),b)").unwrap()));
        assert!(!na.accepts(&alpha.parse_tree("s(s(b),b)").unwrap()));
        assert!(!na.is_deterministic());
    }

    #[test]
    fn determinize_preserves_language() {
        let g = example_one();
        let na = g.na().unwrap();
        let dfa = na.determinize();
        assert!(dfa.is_deterministic());
        let expected = g.skeletons_upto(3).unwrap();
        for t in enumerate_trees(na.alphabet(), 3) {
            assert_eq!(dfa.accepts(&t), expected.contains(&t), "{t:?}");
            assert_eq!(na.accepts(&t), expected.contains(&t), "{t:?}");
        }
        let again = dfa.determinize();
        assert_eq!(again.num_states(), dfa.num_states());
        let none = TreeAutomaton::new(ab(&[1]), vec![], BTreeSet::new(), vec![]).unwrap();
        assert_eq!(none.determinize().num_states(), 0);
    }

    #[test]
    fn counts_match_enumeration() {
        let g = example_one();
        let na = g.na().unwrap();
        let counts = na.count_accepted_upto(4);
        let sk = g.skeletons_upto(4).unwrap();
        for d in 1..=4 {
            let n = sk.iter().filter(|t| t.depth() == d).count() as u128;
            assert_eq!(counts[d - 1], n, "depth {d}");
        }
    }

    #[test]
    fn cover_equal_examples() {
        let g = example_one();
        let na = g.na().unwrap();
        assert_eq!(cover_equal(&na, &na, 3), Comparison::Equal);
        let alpha = g.skeletal_alphabet().unwrap();
        let empty = TreeAutomaton::new(alpha.clone(), vec![], BTreeSet::new(), vec![]).unwrap();
        assert_eq!(
            cover_equal(&empty, &na, 2),
            Comparison::Counterexample(alpha.parse_tree("s(a)").unwrap())
        );
        let sa = Cfg::parse("start: S\nterminals: a b\nS -> a\n").unwrap().na().unwrap();
        let sb = Cfg::parse("start: S\nterminals: a b\nS -> b\n").unwrap().na().unwrap();
        assert_eq!(
            cover_equal(&sa, &sb, 1),
            Comparison::Counterexample(alpha.parse_tree("s(a)").unwrap())
        );
    }

    #[test]
    fn cover_ignores_deep_differences() {
        let alpha = SkeletalAlphabet::new([1], vec!["a"]).unwrap();
        let short = Cfg::parse("start: S\nterminals: a\nS -> a\n").unwrap().na().unwrap();
        let long = Cfg::parse("start: S\nterminals: a\nS -> a\nS -> T\nT -> U\nU -> a\n")
            .unwrap()
            .na()
            .unwrap();
        assert_eq!(cover_equal(&short, &long, 2), Comparison::Equal);
        assert_eq!(
            cover_equal(&short, &long, 3),
            Comparison::Counterexample(alpha.parse_tree("s(s(s(a)))").unwrap())
        );
        assert_eq!(
            exact_equal(&short, &long),
            Comparison::Counterexample(alpha.parse_tree("s(s(s(a)))").unwrap())
        );
    }

    #[test]
    fn exact_equal_examples() {
        let g = example_one();
        let na = g.na().unwrap();
        assert_eq!(exact_equal(&na, &na.determinize()), Comparison::Equal);
        let a = Cfg::parse("start: S\nterminals: a\nS -> a\n").unwrap().na().unwrap();
        let b = Cfg::parse("start: S\nterminals: a\nS -> a\nS -> a S\n").unwrap().na().unwrap();
        match exact_equal(&a, &b) {
            Comparison::Counterexample(t) => assert_ne!(a.accepts(&t), b.accepts(&t)),
            Comparison::Equal => panic!("languages differ"),
        }
    }

    #[test]
    fn isomorphism() {
        let aut = chain();
        assert!(isomorphic(&aut, &aut));
        let alpha = aut.alphabet().clone();
        let a = Input::Terminal(alpha.terminal("a").unwrap());
        let b = Input::Terminal(alpha.terminal("b").unwrap());
        let swapped = TreeAutomaton::new(
            alpha.clone(),
            vec!["x".into(), "y".into()],
            BTreeSet::from([0]),
            vec![
                Rule { inputs: vec![Input::State(1), b], target: 0 },
                Rule { inputs: vec![a], target: 1 },
            ],
        )
        .unwrap();
        assert!(isomorphic(&aut, &swapped));
        let more_finals =
            TreeAutomaton::new(alpha, aut.labels().to_vec(), BTreeSet::from([0, 1]), aut.rules().to_vec())
                .unwrap();
        assert!(!isomorphic(&aut, &more_finals));
    }

    #[test]
    fn brute_force_examples() {
        let alpha = SkeletalAlphabet::new([1], vec!["a"]).unwrap();
        let t = |s: &str| alpha.parse_tree(s).unwrap();
        assert_eq!(brute_min_cover_states(&BTreeSet::new(), &alpha, 2, 3), MinStates::Found(1));
        assert_eq!(
            brute_min_cover_states(&BTreeSet::from([t("s(a)")]), &alpha, 2, 3),
            MinStates::Found(2)
        );
        assert_eq!(
            brute_min_cover_states(&BTreeSet::from([t("s(a)"), t("s(s(a))")]), &alpha, 2, 3),
            MinStates::Found(1)
        );
        assert_eq!(
            brute_min_cover_states(&BTreeSet::from([t("s(a)")]), &alpha, 2, 1),
            MinStates::Exceeded
        );
    }

    #[test]
    fn dump_round_trip() {
        let aut = example_one().na().unwrap().determinize();
        let back = TreeAutomaton::from_json(&aut.to_json()).unwrap();
        assert_eq!(back, aut);
        let dump = aut.to_dump();
        assert_eq!(dump.arities, vec![1, 2]);
        let empty = TreeAutomaton::new(ab(&[1]), vec![], BTreeSet::new(), vec![]).unwrap();
        assert!(empty.to_dump().transitions.is_empty());
        assert_eq!(TreeAutomaton::from_json(&empty.to_json()).unwrap(), empty);
        assert!(matches!(
            TreeAutomaton::from_json("{\"version\": 1}"),
            Err(AutomatonError::Malformed(_))
        ));
        let dot = aut.to_dot();
        assert!(dot.starts_with("digraph"));
        assert!(dot.contains("doublecircle"));
    }

    #[test]
    fn rejects_bad_rules() {
        let alpha = ab(&[1]);
        let a = Input::Terminal(alpha.terminal("a").unwrap());
        assert!(TreeAutomaton::new(alpha.clone(), vec!["q".into()], BTreeSet::new(), vec![Rule { inputs: vec![a, a], target: 0 }]).is_err());
        assert!(TreeAutomaton::new(alpha.clone(), vec!["q".into()], BTreeSet::new(), vec![Rule { inputs: vec![a], target: 1 }]).is_err());
        assert!(TreeAutomaton::new(alpha, vec!["q".into()], BTreeSet::from([2]), vec![]).is_err());
    }
}
