//! The observation table `(S, E, T, ℓ)`.
//!
//! Rows are kept for `S ∪ X(S)_[ℓ]` only; a tree deeper than `ℓ` has the
//! value −1 in every column and is never sent to the teacher. With no bound
//! the table degenerates to the classical one, whose rows are compared for
//! equality instead of similarity.

use std::borrow::Cow;
use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{Input, Rule, TreeAutomaton};
use crate::teacher::{Teacher, TeacherError};
use crate::tree::{for_each_tuple, Context, SkeletalAlphabet, Terminal, Tree, TreeError};

/// An entry of the table: `1` member, `0` non-member, `-1` deeper than `ℓ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TValue {
    Beyond,
    Zero,
    One,
}

impl TValue {
    pub fn as_i8(self) -> i8 {
        match self {
            TValue::One => 1,
            TValue::Zero => 0,
            TValue::Beyond => -1,
        }
    }

    pub fn from_i8(v: i8) -> Option<TValue> {
        match v {
            1 => Some(TValue::One),
            0 => Some(TValue::Zero),
            -1 => Some(TValue::Beyond),
            _ => None,
        }
    }
}

impl fmt::Display for TValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_i8())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    #[error(transparent)]
    Teacher(#[from] TeacherError),
    #[error("row {0:?} has depth 0")]
    LeafRow(Tree),
    #[error(transparent)]
    Alphabet(#[from] TreeError),
    #[error("row {0:?} is deeper than the bound")]
    RowTooDeep(Tree),
    #[error("adding {row:?} breaks subterm closure: {missing:?} is not a row")]
    NotSubtermClosed { row: Tree, missing: Tree },
    #[error("column {0:?} is not an extension of a column by a one-level context")]
    NotPrefixClosed(Context),
    #[error("column {0:?} is too deep for the bound")]
    ColumnTooDeep(Context),
    #[error("{0:?} is similar to no row")]
    NoRepresentative(Tree),
    #[error("the table has no rows")]
    Empty,
}

/// A witness that the table is not consistent: `C[C₁]` separates `s₁` and
/// `s₂`, which are `k`-similar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inconsistency {
    pub column: Context,
    pub extension: Context,
    pub s1: Tree,
    pub s2: Tree,
    pub k: usize,
}

impl Inconsistency {
    /// The column to add, `C[C₁]`.
    pub fn new_column(&self) -> Context {
        self.column.compose(&self.extension)
    }
}

#[derive(Debug, Clone)]
pub struct ObservationTable {
    alphabet: SkeletalAlphabet,
    bound: Option<usize>,
    leaves: Vec<Tree>,
    rows: Vec<Tree>,
    sorted_rows: BTreeSet<Tree>,
    columns: Vec<Context>,
    hole_depths: Vec<usize>,
    /// σ•⟨S⟩, in `≺_C` order.
    sigma: BTreeSet<Context>,
    /// X(S)_[ℓ], or all of X(S) without a bound.
    ext: BTreeSet<Tree>,
    values: HashMap<Tree, Vec<TValue>>,
    answers: HashMap<Tree, bool>,
}

impl ObservationTable {
    /// An empty table with `E = {•}`; `bound` is `ℓ`, or `None` for the
    /// unbounded table.
    pub fn new(alphabet: SkeletalAlphabet, bound: Option<usize>) -> ObservationTable {
        let leaves = alphabet.leaves();
        let sigma = one_level_contexts(&alphabet, &leaves, None);
        ObservationTable {
            leaves,
            alphabet,
            bound,
            rows: Vec::new(),
            sorted_rows: BTreeSet::new(),
            columns: vec![Context::hole()],
            hole_depths: vec![0],
            sigma,
            ext: BTreeSet::new(),
            values: HashMap::new(),
            answers: HashMap::new(),
        }
    }

    pub fn alphabet(&self) -> &SkeletalAlphabet {
        &self.alphabet
    }

    pub fn bound(&self) -> Option<usize> {
        self.bound
    }

    /// S in insertion order.
    pub fn rows(&self) -> &[Tree] {
        &self.rows
    }

    /// S in `≺_T` order.
    pub fn sorted_rows(&self) -> impl Iterator<Item = &Tree> {
        self.sorted_rows.iter()
    }

    pub fn contains_row(&self, t: &Tree) -> bool {
        self.sorted_rows.contains(t)
    }

    /// E in insertion order; the first column is `•`.
    pub fn columns(&self) -> &[Context] {
        &self.columns
    }

    /// σ•⟨S⟩ in `≺_C` order.
    pub fn sigma_hole(&self) -> &BTreeSet<Context> {
        &self.sigma
    }

    /// X(S)_[ℓ] in `≺_T` order (all of X(S) for the unbounded table).
    pub fn x_of_depth_le_ell(&self) -> &BTreeSet<Tree> {
        &self.ext
    }

    /// X(S) in full, including trees deeper than `ℓ`.
    pub fn x_of(&self) -> BTreeSet<Tree> {
        let mut out = BTreeSet::new();
        for c in &self.sigma {
            for f in self.fillers() {
                let x = c.plug(f);
                if !self.sorted_rows.contains(&x) {
                    out.insert(x);
                }
            }
        }
        out
    }

    fn fillers(&self) -> impl Iterator<Item = &Tree> + '_ {
        self.leaves.iter().chain(self.sorted_rows.iter())
    }

    /// The stored answer, if `t` has been asked about.
    pub fn cached(&self, t: &Tree) -> Option<bool> {
        self.answers.get(t).copied()
    }

    /// Number of distinct trees sent to the teacher.
    pub fn answered(&self) -> usize {
        self.answers.len()
    }

    /// `T(t)`: −1 beyond the bound, otherwise the teacher's answer.
    pub fn t_value(&mut self, teacher: &mut Teacher, t: &Tree) -> Result<TValue, TeacherError> {
        if self.bound.is_some_and(|l| t.depth() > l) {
            return Ok(TValue::Beyond);
        }
        if let Some(&b) = self.answers.get(t) {
            return Ok(if b { TValue::One } else { TValue::Zero });
        }
        let b = teacher.membership(t)?;
        self.answers.insert(t.clone(), b);
        Ok(if b { TValue::One } else { TValue::Zero })
    }

    /// The stored row of `x ∈ S ∪ X(S)_[ℓ]`, or all −1 for `x` deeper
    /// than `ℓ`.
    ///
    /// Panics for any other tree.
    pub fn row(&self, x: &Tree) -> Cow<'_, [TValue]> {
        match self.values.get(x) {
            Some(v) => Cow::Borrowed(v),
            None if self.bound.is_some_and(|l| x.depth() > l) => {
                Cow::Owned(vec![TValue::Beyond; self.columns.len()])
            }
            None => panic!("{x:?} is not a row of the table"),
        }
    }

    /// The stored row of `x`, if any.
    pub fn try_row(&self, x: &Tree) -> Option<&[TValue]> {
        self.values.get(x).map(Vec::as_slice)
    }

    /// `T(C[x])` read from the row of `x`.
    pub fn value(&self, x: &Tree, column: usize) -> TValue {
        self.row(x)[column]
    }

    fn compute_row(&mut self, teacher: &mut Teacher, x: &Tree) -> Result<Vec<TValue>, TeacherError> {
        let columns = self.columns.clone();
        columns.iter().map(|c| self.t_value(teacher, &c.plug(x))).collect()
    }

    fn agree_upto(&self, a: &[TValue], b: &[TValue], limit: isize) -> bool {
        self.hole_depths
            .iter()
            .zip(a.iter().zip(b))
            .all(|(&i, (x, y))| i as isize > limit || x == y)
    }

    /// `s ∼_k t`: equal values on every column of hole depth at most
    /// `k − max(d(s), d(t))`. Without a bound, plain row equality.
    pub fn similar_k(&self, s: &Tree, t: &Tree, k: usize) -> bool {
        if self.bound.is_none() {
            return self.row(s) == self.row(t);
        }
        let limit = k as isize - s.depth().max(t.depth()) as isize;
        if limit < 0 {
            return true;
        }
        self.agree_upto(&self.row(s), &self.row(t), limit)
    }

    /// `s ∼ t`, i.e. `∼_ℓ` (row equality without a bound).
    pub fn similar(&self, s: &Tree, t: &Tree) -> bool {
        match self.bound {
            Some(l) => self.similar_k(s, t, l),
            None => self.row(s) == self.row(t),
        }
    }

    /// Whether column `c` ℓ-distinguishes `s1` and `s2`.
    pub fn distinguishes(&self, c: &Context, s1: &Tree, s2: &Tree) -> bool {
        let Some(j) = self.columns.iter().position(|x| x == c) else {
            return false;
        };
        if let Some(l) = self.bound {
            if c.hole_depth() as isize > l as isize - s1.depth().max(s2.depth()) as isize {
                return false;
            }
        }
        self.value(s1, j) != self.value(s2, j)
    }

    /// `r(x)`: the `≺_T`-least row similar to `x`.
    pub fn representative(&self, x: &Tree) -> Result<Tree, TableError> {
        if self.rows.is_empty() {
            return Err(TableError::Empty);
        }
        if self.bound.is_some_and(|l| x.depth() > l) {
            return Ok(self.sorted_rows.first().unwrap().clone());
        }
        let rx = self.row(x);
        self.sorted_rows
            .iter()
            .find(|s| match self.bound {
                Some(l) => {
                    let limit = l as isize - x.depth().max(s.depth()) as isize;
                    limit < 0 || self.agree_upto(&rx, &self.row(s), limit)
                }
                None => *rx == *self.row(s),
            })
            .cloned()
            .ok_or_else(|| TableError::NoRepresentative(x.clone()))
    }

    /// `{r(s) : s ∈ S}` in `≺_T` order.
    pub fn representatives(&self) -> Result<Vec<Tree>, TableError> {
        let set: BTreeSet<Tree> = self
            .sorted_rows
            .iter()
            .map(|s| self.representative(s))
            .collect::<Result<_, _>>()?;
        Ok(set.into_iter().collect())
    }

    /// Adds `s` to S. Returns `false` if it was already there.
    pub fn add_row(&mut self, teacher: &mut Teacher, s: &Tree) -> Result<bool, TableError> {
        if s.is_leaf() {
            return Err(TableError::LeafRow(s.clone()));
        }
        self.alphabet.check(s)?;
        if self.bound.is_some_and(|l| s.depth() > l) {
            return Err(TableError::RowTooDeep(s.clone()));
        }
        if self.sorted_rows.contains(s) {
            return Ok(false);
        }
        for c in s.children() {
            if !c.is_leaf() && !self.sorted_rows.contains(c) {
                return Err(TableError::NotSubtermClosed {
                    row: s.clone(),
                    missing: c.clone(),
                });
            }
        }
        let mut candidates: Vec<Tree> = self.sigma.iter().map(|c| c.plug(s)).collect();
        if self.rows.is_empty() {
            // X(∅): the terminal-only trees
            for c in &self.sigma {
                candidates.extend(self.leaves.iter().map(|a| c.plug(a)));
            }
        }
        let mut slots: Vec<Tree> = self.fillers().cloned().collect();
        slots.push(s.clone());
        let created = one_level_contexts(&self.alphabet, &slots, Some(slots.len() - 1));
        for c in &created {
            candidates.extend(slots.iter().map(|f| c.plug(f)));
        }
        self.sigma.extend(created);

        self.rows.push(s.clone());
        self.sorted_rows.insert(s.clone());
        if !self.ext.remove(s) {
            let row = self.compute_row(teacher, s)?;
            self.values.insert(s.clone(), row);
        }
        for x in candidates {
            if self.sorted_rows.contains(&x)
                || self.ext.contains(&x)
                || self.bound.is_some_and(|l| x.depth() > l)
            {
                continue;
            }
            let row = self.compute_row(teacher, &x)?;
            self.values.insert(x.clone(), row);
            self.ext.insert(x);
        }
        Ok(true)
    }

    /// Adds column `c`, which must be `C'[C₁]` for some `C' ∈ E` and
    /// `C₁ ∈ σ•⟨S⟩`. Returns `false` if it was already there.
    pub fn add_column(&mut self, teacher: &mut Teacher, c: &Context) -> Result<bool, TableError> {
        if self.columns.contains(c) {
            return Ok(false);
        }
        let Some((outer, inner)) = c.split_innermost() else {
            return Err(TableError::NotPrefixClosed(c.clone()));
        };
        if !self.columns.contains(&outer) || !self.sigma.contains(&inner) {
            return Err(TableError::NotPrefixClosed(c.clone()));
        }
        if let Some(l) = self.bound {
            if c.hole_depth() + 1 > l || c.depth() > l {
                return Err(TableError::ColumnTooDeep(c.clone()));
            }
        }
        self.columns.push(c.clone());
        self.hole_depths.push(c.hole_depth());
        let mut keys: Vec<Tree> = self.values.keys().cloned().collect();
        keys.sort();
        for x in keys {
            let v = self.t_value(teacher, &c.plug(&x))?;
            self.values.get_mut(&x).unwrap().push(v);
        }
        Ok(true)
    }

    /// The first inconsistency in scan order: columns by hole depth then
    /// insertion, row pairs in `≺_T` order, extensions in `≺_C` order.
    pub fn find_inconsistency(&self) -> Option<Inconsistency> {
        let Some(ell) = self.bound else {
            return self.find_inconsistency_exact();
        };
        let mut order: Vec<usize> = (0..self.columns.len()).collect();
        order.sort_by_key(|&j| self.hole_depths[j]);
        let rows: Vec<&Tree> = self.sorted_rows.iter().collect();
        for j in order {
            let c = &self.columns[j];
            let i = self.hole_depths[j];
            if ell < i + 2 {
                continue;
            }
            let max_d = ell - i - 1;
            let eligible: Vec<&Tree> = rows.iter().copied().take_while(|s| s.depth() <= max_d).collect();
            for (a, s1) in eligible.iter().enumerate() {
                for s2 in &eligible[a + 1..] {
                    let k = s1.depth().max(s2.depth()) + i + 1;
                    if !self.similar_k(s1, s2, k) {
                        continue;
                    }
                    for c1 in &self.sigma {
                        if i + c1.depth() > ell {
                            break;
                        }
                        let x1 = c1.plug(s1);
                        let x2 = c1.plug(s2);
                        if c.plugged_depth(&x1) > ell || c.plugged_depth(&x2) > ell {
                            continue;
                        }
                        if self.value(&x1, j) != self.value(&x2, j) {
                            return Some(Inconsistency {
                                column: c.clone(),
                                extension: c1.clone(),
                                s1: (*s1).clone(),
                                s2: (*s2).clone(),
                                k,
                            });
                        }
                    }
                }
            }
        }
        None
    }

    fn find_inconsistency_exact(&self) -> Option<Inconsistency> {
        let rows: Vec<&Tree> = self.sorted_rows.iter().collect();
        for (a, s1) in rows.iter().enumerate() {
            for s2 in &rows[a + 1..] {
                if self.row(s1) != self.row(s2) {
                    continue;
                }
                for c1 in &self.sigma {
                    let (r1, r2) = (self.row(&c1.plug(s1)), self.row(&c1.plug(s2)));
                    if let Some(j) = (0..self.columns.len()).find(|&j| r1[j] != r2[j]) {
                        return Some(Inconsistency {
                            column: self.columns[j].clone(),
                            extension: c1.clone(),
                            s1: (*s1).clone(),
                            s2: (*s2).clone(),
                            k: 0,
                        });
                    }
                }
            }
        }
        None
    }

    pub fn is_consistent(&self) -> bool {
        self.find_inconsistency().is_none()
    }

    fn is_unclosed(&self, x: &Tree) -> bool {
        let rx = self.row(x);
        match self.bound {
            Some(l) => {
                let limit = l as isize - x.depth() as isize;
                !self
                    .sorted_rows
                    .iter()
                    .take_while(|t| t.depth() <= x.depth())
                    .any(|t| self.agree_upto(&rx, &self.row(t), limit))
            }
            None => !self.sorted_rows.iter().any(|t| *self.row(t) == *rx),
        }
    }

    /// The first `C₁[s]` (fillers `s ∈ Σ ∪ S` by depth and `≺_T`, then
    /// `C₁ ∈ σ•⟨S⟩` in `≺_C` order) similar to no row of at most its depth.
    pub fn find_unclosed(&self) -> Option<Tree> {
        let unclosed: BTreeSet<&Tree> = self.ext.iter().filter(|x| self.is_unclosed(x)).collect();
        if unclosed.is_empty() {
            return None;
        }
        for s in self.fillers() {
            for c1 in &self.sigma {
                if self.bound.is_some_and(|l| c1.depth() > l) {
                    break;
                }
                let x = c1.plug(s);
                if unclosed.contains(&x) {
                    return Some(x);
                }
            }
        }
        unreachable!("every element of X(S) is some C1[s]")
    }

    pub fn is_closed(&self) -> bool {
        self.ext.iter().all(|x| !self.is_unclosed(x))
    }

    /// `𝒜(𝕋)`: states are the representatives in `≺_T` order (labelled
    /// `q0, q1, …`), final when `T(r) = 1`, and
    /// `δ(σ)(q₁,…,q_m) = r(σ(q₁,…,q_m))` over every input tuple.
    pub fn build_automaton(&self) -> Result<(TreeAutomaton, Vec<Tree>), TableError> {
        let reps = self.representatives()?;
        let id: HashMap<&Tree, usize> = reps.iter().enumerate().map(|(i, r)| (r, i)).collect();
        let p = self.alphabet.terminal_count();
        let symbols: Vec<(Input, Tree)> = (0..p)
            .map(|i| (Input::Terminal(Terminal::new(i)), Tree::leaf(Terminal::new(i))))
            .chain(reps.iter().enumerate().map(|(q, r)| (Input::State(q), r.clone())))
            .collect();
        let mut rules = Vec::new();
        let mut failure = None;
        for &m in self.alphabet.arities() {
            for_each_tuple(symbols.len(), m, &mut |idx| {
                if failure.is_some() {
                    return;
                }
                let x = Tree::node(idx.iter().map(|&i| symbols[i].1.clone()).collect());
                match self.representative(&x) {
                    Ok(r) => match id.get(&r) {
                        Some(&q) => rules.push(Rule {
                            inputs: idx.iter().map(|&i| symbols[i].0).collect(),
                            target: q,
                        }),
                        None => failure = Some(TableError::NoRepresentative(x)),
                    },
                    Err(e) => failure = Some(e),
                }
            });
        }
        if let Some(e) = failure {
            return Err(e);
        }
        let finals = reps
            .iter()
            .enumerate()
            .filter(|(_, r)| self.value(r, 0) == TValue::One)
            .map(|(i, _)| i)
            .collect();
        let labels = (0..reps.len()).map(|i| format!("q{i}")).collect();
        let a = TreeAutomaton::new(self.alphabet.clone(), labels, finals, rules)
            .expect("table automaton is well-formed");
        Ok((a, reps))
    }

    /// Cells `(x, C)` with `d(C[x]) ≤ ℓ` where `a` accepts `C[x]` but
    /// `T(C[x]) ≠ 1`, or the other way round.
    pub fn theorem_violations(&self, a: &TreeAutomaton) -> Vec<(Tree, Context)> {
        let mut out = Vec::new();
        for x in self.sorted_rows.iter().chain(self.ext.iter()) {
            for (j, c) in self.columns.iter().enumerate() {
                if self.bound.is_some_and(|l| c.plugged_depth(x) > l) {
                    continue;
                }
                let accepted = a.accepts(&c.plug(x));
                if accepted != (self.value(x, j) == TValue::One) {
                    out.push((x.clone(), c.clone()));
                }
            }
        }
        out
    }

    /// Checks the structural invariants: S subterm closed and within the
    /// bound, E •-prefix closed and within the bound, cached `−1` cells
    /// never asked.
    pub fn audit(&self) -> Result<(), String> {
        for s in &self.rows {
            if self.bound.is_some_and(|l| s.depth() > l) {
                return Err(format!("row {s:?} deeper than the bound"));
            }
            if let Some(missing) = s.subterms().into_iter().find(|t| !self.sorted_rows.contains(t)) {
                return Err(format!("row {s:?} has subterm {missing:?} outside S"));
            }
        }
        if self.columns.first() != Some(&Context::hole()) {
            return Err("first column is not the hole".into());
        }
        for c in &self.columns[1..] {
            let (outer, inner) = c.split_innermost().ok_or("duplicate hole column")?;
            if !self.columns.contains(&outer) || !self.sigma.contains(&inner) {
                return Err(format!("column {c:?} is not prefix closed"));
            }
            if let Some(l) = self.bound {
                if c.hole_depth() + 1 > l || c.depth() > l {
                    return Err(format!("column {c:?} too deep"));
                }
            }
        }
        if let Some(l) = self.bound {
            if let Some(t) = self.answers.keys().find(|t| t.depth() > l) {
                return Err(format!("{t:?} was asked despite exceeding the bound"));
            }
        }
        for (x, row) in &self.values {
            for (j, c) in self.columns.iter().enumerate() {
                let beyond = self.bound.is_some_and(|l| c.plugged_depth(x) > l);
                if beyond != (row[j] == TValue::Beyond) {
                    return Err(format!("cell ({x:?}, {c:?}) has value {}", row[j]));
                }
            }
        }
        Ok(())
    }

    /// A copy of S, X(S)_[ℓ], E and their values in printable form.
    pub fn snapshot(&self) -> TableSnapshot {
        let show_rows = |rows: &mut dyn Iterator<Item = &Tree>| -> (Vec<String>, Vec<Vec<i8>>) {
            rows.map(|x| {
                (
                    self.alphabet.show(x),
                    self.row(x).iter().map(|v| v.as_i8()).collect(),
                )
            })
            .unzip()
        };
        let (rows, values) = show_rows(&mut self.rows.iter());
        let (extension, extension_values) = show_rows(&mut self.ext.iter());
        TableSnapshot {
            ell: self.bound,
            rows,
            columns: self.columns.iter().map(|c| self.alphabet.show_context(c)).collect(),
            values,
            extension,
            extension_values,
        }
    }
}

/// One-level contexts with the other arguments drawn from `slots`; with
/// `required`, only those using that slot at least once.
fn one_level_contexts(
    alphabet: &SkeletalAlphabet,
    slots: &[Tree],
    required: Option<usize>,
) -> BTreeSet<Context> {
    let mut out = BTreeSet::new();
    for &m in alphabet.arities() {
        for hole in 0..m {
            for_each_tuple(slots.len(), m - 1, &mut |idx| {
                if required.is_some_and(|r| !idx.contains(&r)) {
                    return;
                }
                let args: Vec<Tree> = idx.iter().map(|&i| slots[i].clone()).collect();
                let (before, after) = args.split_at(hole);
                out.insert(Context::one_level(before.to_vec(), after.to_vec()));
            });
        }
    }
    out
}

/// Printable copy of a table. Rows are in insertion order, the extension
/// `X(S)_[ℓ]` in `≺_T` order, columns in insertion order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSnapshot {
    pub ell: Option<usize>,
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub values: Vec<Vec<i8>>,
    pub extension: Vec<String>,
    pub extension_values: Vec<Vec<i8>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::Cfg;
    use crate::teacher::CounterexamplePolicy;

    fn example_one() -> Cfg {
        Cfg::parse("start: S\nterminals: a b\nS -> a\nS -> b\nS -> A b\nA -> a\nA -> A b\n")
            .unwrap()
    }

    /// The table of the worked example: S = {σ(a), σ(b), σ(σ(a),b)},
    /// E = {•, σ(•,b)}, ℓ = 2.
    fn worked_example() -> (ObservationTable, Teacher) {
        let g = example_one();
        let mut teacher = Teacher::cover(&g, 2, CounterexamplePolicy::Minimal).unwrap();
        let alpha = g.skeletal_alphabet().unwrap();
        let mut table = ObservationTable::new(alpha.clone(), Some(2));
        for s in ["s(a)", "s(b)", "s(s(a),b)"] {
            table.add_row(&mut teacher, &alpha.parse_tree(s).unwrap()).unwrap();
        }
        table
            .add_column(&mut teacher, &alpha.parse_context("s(_,b)").unwrap())
            .unwrap();
        (table, teacher)
    }

    #[test]
    fn worked_example_values() {
        let (mut table, mut teacher) = worked_example();
        let alpha = table.alphabet().clone();
        let t = |s: &str| alpha.parse_tree(s).unwrap();
        let (t1, t2, t3) = (t("s(a)"), t("s(s(a),b)"), t("s(b)"));
        assert!(table.similar_k(&t1, &t2, 2));
        assert!(table.similar_k(&t2, &t3, 2));
        assert!(!table.similar_k(&t1, &t3, 2));
        assert!(table.similar_k(&t1, &t1, 2));
        assert_eq!(table.t_value(&mut teacher, &t("s(s(b),b)")), Ok(TValue::Zero));
        assert_eq!(table.t_value(&mut teacher, &t1), Ok(TValue::One));
        let asked = teacher.stats().membership_queries;
        assert_eq!(table.t_value(&mut teacher, &t("s(s(s(a)))")), Ok(TValue::Beyond));
        assert_eq!(teacher.stats().membership_queries, asked);
        let c = alpha.parse_context("s(_,b)").unwrap();
        assert!(table.distinguishes(&c, &t1, &t3));
        assert!(!table.distinguishes(&Context::hole(), &t1, &t1));
        // hole depth 1 > ℓ − d(σ(σ(a),b)) = 0
        assert!(!table.distinguishes(&c, &t1, &t2));
        assert_eq!(table.representative(&t2).unwrap(), t1);
        assert_eq!(table.representative(&t1).unwrap(), t1);
        assert_eq!(table.representative(&t("s(s(s(a)))")).unwrap(), t1);
        assert_eq!(table.audit(), Ok(()));
    }

    #[test]
    fn sigma_hole_and_x() {
        let g = Cfg::parse("start: S\nterminals: a b\nS -> a\n").unwrap();
        let mut teacher = Teacher::cover(&g, 2, CounterexamplePolicy::Minimal).unwrap();
        let alpha = g.skeletal_alphabet().unwrap();
        let mut table = ObservationTable::new(alpha.clone(), Some(2));
        table.add_row(&mut teacher, &alpha.parse_tree("s(a)").unwrap()).unwrap();
        let shown: Vec<String> = table.sigma_hole().iter().map(|c| alpha.show_context(c)).collect();
        assert_eq!(shown, ["s(_)"]);

        let one = SkeletalAlphabet::new([1], vec!["a"]).unwrap();
        let g1 = Cfg::parse("start: S\nterminals: a\nS -> a\n").unwrap();
        let mut t1 = Teacher::cover(&g1, 2, CounterexamplePolicy::Minimal).unwrap();
        let mut tab = ObservationTable::new(one.clone(), Some(2));
        tab.add_row(&mut t1, &one.parse_tree("s(a)").unwrap()).unwrap();
        let x: Vec<String> = tab.x_of().iter().map(|t| one.show(t)).collect();
        assert_eq!(x, ["s(s(a))"]);
        let mut shallow = ObservationTable::new(one.clone(), Some(1));
        let mut t2 = Teacher::cover(&g1, 1, CounterexamplePolicy::Minimal).unwrap();
        shallow.add_row(&mut t2, &one.parse_tree("s(a)").unwrap()).unwrap();
        assert!(shallow.x_of_depth_le_ell().is_empty());

        let two = SkeletalAlphabet::new([2], vec!["a"]).unwrap();
        let g2 = Cfg::parse("start: S\nterminals: a\nS -> a a\n").unwrap();
        let mut t3 = Teacher::cover(&g2, 2, CounterexamplePolicy::Minimal).unwrap();
        let mut tab2 = ObservationTable::new(two.clone(), Some(2));
        tab2.add_row(&mut t3, &two.parse_tree("s(a,a)").unwrap()).unwrap();
        let shown: Vec<String> = tab2.sigma_hole().iter().map(|c| two.show_context(c)).collect();
        assert_eq!(shown, ["s(_,a)", "s(a,_)", "s(_,s(a,a))", "s(s(a,a),_)"]);
    }

    #[test]
    fn add_row_and_column_preconditions() {
        let (mut table, mut teacher) = worked_example();
        let alpha = table.alphabet().clone();
        let t = |s: &str| alpha.parse_tree(s).unwrap();
        assert_eq!(table.add_row(&mut teacher, &t("s(a)")), Ok(false));
        assert!(matches!(table.add_row(&mut teacher, &t("s(s(s(a)))")), Err(TableError::RowTooDeep(_))));
        let wide = Tree::node(vec![t("a"), t("a"), t("a")]);
        assert!(matches!(table.add_row(&mut teacher, &wide), Err(TableError::Alphabet(_))));
        assert!(matches!(
            table.add_row(&mut teacher, &t("s(s(a,a),b)")),
            Err(TableError::NotSubtermClosed { .. })
        ));
        let deep = alpha.parse_context("s(s(_,b),b)").unwrap();
        assert!(matches!(table.add_column(&mut teacher, &deep), Err(TableError::ColumnTooDeep(_))));
        assert_eq!(table.columns().len(), 2);
        assert_eq!(table.audit(), Ok(()));
    }

    #[test]
    fn constructed_inconsistency() {
        let g = example_one();
        let mut teacher = Teacher::cover(&g, 2, CounterexamplePolicy::Minimal).unwrap();
        let alpha = g.skeletal_alphabet().unwrap();
        let mut table = ObservationTable::new(alpha.clone(), Some(2));
        for s in ["s(a)", "s(b)"] {
            table.add_row(&mut teacher, &alpha.parse_tree(s).unwrap()).unwrap();
        }
        let inc = table.find_inconsistency().expect("σ(•,b) separates the rows");
        assert_eq!(alpha.show(&inc.s1), "s(a)");
        assert_eq!(alpha.show(&inc.s2), "s(b)");
        assert_eq!(inc.k, 2);
        assert_eq!(alpha.show_context(&inc.new_column()), "s(_,b)");

        let mut single = ObservationTable::new(alpha.clone(), Some(2));
        single.add_row(&mut teacher, &alpha.parse_tree("s(a)").unwrap()).unwrap();
        assert_eq!(single.find_inconsistency(), None);
    }

    #[test]
    fn closedness_of_worked_example() {
        let (table, _) = worked_example();
        let alpha = table.alphabet().clone();
        // σ(a,a) has T = 0 and only σ(a) and σ(b) are of depth 1
        match table.find_unclosed() {
            Some(x) => assert!(table
                .sorted_rows()
                .filter(|t| t.depth() <= x.depth())
                .all(|t| !table.similar(&x, t))),
            None => assert!(table.is_closed()),
        }
        assert!(table.x_of_depth_le_ell().contains(&alpha.parse_tree("s(a,a)").unwrap()));
    }

    #[test]
    fn built_automaton_fixes_representatives() {
        let g = Cfg::parse("start: S\nterminals: a\nS -> a\nS -> S\n").unwrap();
        let alpha = g.skeletal_alphabet().unwrap();
        let mut teacher = Teacher::cover(&g, 2, CounterexamplePolicy::Minimal).unwrap();
        let mut table = ObservationTable::new(alpha.clone(), Some(2));
        table.add_row(&mut teacher, &alpha.parse_tree("s(a)").unwrap()).unwrap();
        assert!(table.is_closed() && table.is_consistent());
        let (a, reps) = table.build_automaton().unwrap();
        assert_eq!(a.num_states(), 1);
        assert!(a.is_final(0));
        for (q, r) in reps.iter().enumerate() {
            assert_eq!(a.run(r), Some(q));
        }
        assert!(table.theorem_violations(&a).is_empty());
    }

    #[test]
    fn unbounded_table_uses_row_equality() {
        let g = example_one();
        let mut teacher = Teacher::exact(&g, CounterexamplePolicy::Minimal).unwrap();
        let alpha = g.skeletal_alphabet().unwrap();
        let mut table = ObservationTable::new(alpha.clone(), None);
        for s in ["s(a)", "s(b)"] {
            table.add_row(&mut teacher, &alpha.parse_tree(s).unwrap()).unwrap();
        }
        let inc = table.find_inconsistency().unwrap();
        table.add_column(&mut teacher, &inc.new_column()).unwrap();
        let (t1, t3) = (alpha.parse_tree("s(a)").unwrap(), alpha.parse_tree("s(b)").unwrap());
        assert!(!table.similar(&t1, &t3));
        assert!(table.x_of_depth_le_ell().iter().any(|x| x.depth() == 2));
    }

    #[test]
    fn snapshot_lists_rows_and_values() {
        let (table, _) = worked_example();
        let snap = table.snapshot();
        assert_eq!(snap.rows, ["s(a)", "s(b)", "s(s(a),b)"]);
        assert_eq!(snap.columns, ["_", "s(_,b)"]);
        assert_eq!(snap.values, vec![vec![1, 1], vec![1, 0], vec![1, -1]]);
    }
}
