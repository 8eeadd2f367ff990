//! Skeletal trees and contexts over a skeletal set `{σ} ∪ Σ`.
//!
//! Internal nodes all carry the single skeletal symbol σ, so a tree is fully
//! described by its shape and its terminal leaves. The [`Ord`] instances on
//! [`Tree`] and [`Context`] are the canonical total orders used everywhere a
//! deterministic choice is needed: depth first, then terminal order, then the
//! leftmost differing child, then the shorter child list.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Printed name of the skeletal symbol σ.
pub const SIGMA: &str = "s";
/// Printed form of the hole of a context.
pub const HOLE: &str = "_";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("invalid position {0}")]
    InvalidPosition(Position),
    #[error("unknown terminal `{0}`")]
    UnknownTerminal(String),
    #[error("arity {0} is not declared for the skeletal symbol")]
    BadArity(usize),
    #[error("terminal index {0} is out of range")]
    BadTerminal(usize),
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("expected a tree without holes")]
    UnexpectedHole,
    #[error("expected exactly one hole, found {0}")]
    HoleCount(usize),
    #[error("invalid alphabet: {0}")]
    Alphabet(String),
}

/// A terminal symbol, identified by its rank in the alphabet's declared order.
///
/// Index 0 of the internal representation is reserved for the hole of a
/// context so that the derived order puts the hole below every terminal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Terminal(u32);

impl Terminal {
    pub(crate) const HOLE: Terminal = Terminal(0);

    pub fn new(index: usize) -> Self {
        Terminal(index as u32 + 1)
    }

    pub fn index(self) -> usize {
        debug_assert!(self.0 > 0, "hole has no terminal index");
        self.0 as usize - 1
    }

    fn is_hole(self) -> bool {
        self.0 == 0
    }
}

/// The ranked alphabet `{σ} ∪ Σ`: the arities of σ and the ordered terminals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SkeletalAlphabet {
    arities: BTreeSet<usize>,
    terminals: Vec<String>,
}

impl SkeletalAlphabet {
    /// Builds an alphabet; the terminal order is the order given.
    ///
    /// The arity set may be empty (a grammar without productions has no
    /// σ-trees at all); every arity must be positive.
    pub fn new<I, S>(arities: I, terminals: Vec<S>) -> Result<Self, TreeError>
    where
        I: IntoIterator<Item = usize>,
        S: Into<String>,
    {
        let arities: BTreeSet<usize> = arities.into_iter().collect();
        if arities.contains(&0) {
            return Err(TreeError::Alphabet("σ cannot have arity 0".into()));
        }
        let terminals: Vec<String> = terminals.into_iter().map(Into::into).collect();
        if terminals.is_empty() {
            return Err(TreeError::Alphabet("no terminals".into()));
        }
        let mut seen = BTreeSet::new();
        for t in &terminals {
            if !is_identifier(t) || t == HOLE {
                return Err(TreeError::Alphabet(format!("bad terminal name `{t}`")));
            }
            if !seen.insert(t.as_str()) {
                return Err(TreeError::Alphabet(format!("duplicate terminal `{t}`")));
            }
        }
        Ok(SkeletalAlphabet { arities, terminals })
    }

    pub fn arities(&self) -> &BTreeSet<usize> {
        &self.arities
    }

    pub fn max_arity(&self) -> usize {
        self.arities.iter().next_back().copied().unwrap_or(0)
    }

    pub fn terminals(&self) -> &[String] {
        &self.terminals
    }

    pub fn terminal_count(&self) -> usize {
        self.terminals.len()
    }

    /// All terminals as depth-0 trees, in declared order.
    pub fn leaves(&self) -> Vec<Tree> {
        (0..self.terminals.len())
            .map(|i| Tree::leaf(Terminal::new(i)))
            .collect()
    }

    pub fn terminal(&self, name: &str) -> Option<Terminal> {
        self.terminals
            .iter()
            .position(|t| t == name)
            .map(Terminal::new)
    }

    pub fn name(&self, t: Terminal) -> &str {
        if t.is_hole() {
            HOLE
        } else {
            &self.terminals[t.index()]
        }
    }

    /// The same terminals with a different arity set.
    pub fn with_arities<I: IntoIterator<Item = usize>>(&self, arities: I) -> SkeletalAlphabet {
        SkeletalAlphabet {
            arities: arities.into_iter().filter(|&m| m > 0).collect(),
            terminals: self.terminals.clone(),
        }
    }

    /// Checks that `t` only uses declared arities and terminals.
    pub fn check(&self, t: &Tree) -> Result<(), TreeError> {
        match t {
            Tree::Leaf(a) if a.is_hole() => Err(TreeError::UnexpectedHole),
            Tree::Leaf(a) if a.index() >= self.terminals.len() => {
                Err(TreeError::BadTerminal(a.index()))
            }
            Tree::Leaf(_) => Ok(()),
            Tree::Node(node) => {
                if !self.arities.contains(&node.children.len()) {
                    return Err(TreeError::BadArity(node.children.len()));
                }
                node.children.iter().try_for_each(|c| self.check(c))
            }
        }
    }

    pub fn show(&self, t: &Tree) -> String {
        let mut out = String::new();
        self.write_tree(t, &mut out);
        out
    }

    pub fn show_context(&self, c: &Context) -> String {
        self.show(&c.tree)
    }

    fn write_tree(&self, t: &Tree, out: &mut String) {
        match t {
            Tree::Leaf(a) => out.push_str(self.name(*a)),
            Tree::Node(node) => {
                out.push_str(SIGMA);
                out.push('(');
                for (i, c) in node.children.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    self.write_tree(c, out);
                }
                out.push(')');
            }
        }
    }

    /// Yield of a tree as terminal names.
    pub fn yield_of(&self, t: &Tree) -> Vec<&str> {
        t.leaves().into_iter().map(|a| self.name(a)).collect()
    }

    pub fn parse_tree(&self, text: &str) -> Result<Tree, TreeError> {
        let (tree, holes) = self.parse_term(text)?;
        if holes != 0 {
            return Err(TreeError::UnexpectedHole);
        }
        Ok(tree)
    }

    pub fn parse_context(&self, text: &str) -> Result<Context, TreeError> {
        let (tree, holes) = self.parse_term(text)?;
        if holes != 1 {
            return Err(TreeError::HoleCount(holes));
        }
        Ok(Context::from_tree(tree))
    }

    fn parse_term(&self, text: &str) -> Result<(Tree, usize), TreeError> {
        let mut parser = Parser {
            text,
            pos: 0,
            alphabet: self,
            holes: 0,
        };
        let tree = parser.term()?;
        parser.skip_ws();
        if parser.pos != text.len() {
            return Err(parser.error("trailing input"));
        }
        Ok((tree, parser.holes))
    }
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| !c.is_whitespace() && c != '(' && c != ')' && c != ',')
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
    alphabet: &'a SkeletalAlphabet,
    holes: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> TreeError {
        TreeError::Syntax {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        let rest = &self.text[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn ident(&mut self) -> &str {
        let rest = &self.text[self.pos..];
        let len = rest
            .find(|c: char| c.is_whitespace() || c == '(' || c == ')' || c == ',')
            .unwrap_or(rest.len());
        self.pos += len;
        &rest[..len]
    }

    fn term(&mut self) -> Result<Tree, TreeError> {
        self.skip_ws();
        let start = self.pos;
        let name = self.ident().to_string();
        if name.is_empty() {
            return Err(self.error("expected a symbol"));
        }
        self.skip_ws();
        if self.peek() == Some('(') {
            if name != SIGMA {
                self.pos = start;
                return Err(self.error("only the skeletal symbol `s` takes arguments"));
            }
            self.pos += 1;
            let mut children = vec![self.term()?];
            loop {
                self.skip_ws();
                match self.peek() {
                    Some(',') => {
                        self.pos += 1;
                        children.push(self.term()?);
                    }
                    Some(')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(self.error("expected `,` or `)`")),
                }
            }
            if !self.alphabet.arities.contains(&children.len()) {
                return Err(TreeError::BadArity(children.len()));
            }
            return Ok(Tree::node(children));
        }
        if name == HOLE {
            self.holes += 1;
            return Ok(Tree::Leaf(Terminal::HOLE));
        }
        self.alphabet
            .terminal(&name)
            .map(Tree::leaf)
            .ok_or(TreeError::UnknownTerminal(name))
    }
}

/// A position: the path of 1-based child indices from the root.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Position(pub Vec<usize>);

impl Position {
    pub fn root() -> Self {
        Position(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ε");
        }
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join("."))
    }
}

/// A ranked tree over `{σ} ∪ Σ`: a terminal leaf or a σ-node.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Tree {
    Leaf(Terminal),
    Node(Arc<Node>),
}

#[derive(PartialEq, Eq, Hash)]
pub struct Node {
    depth: usize,
    children: Box<[Tree]>,
}

impl Tree {
    pub fn leaf(a: Terminal) -> Tree {
        Tree::Leaf(a)
    }

    /// `σ(children…)`. Panics on an empty child list.
    pub fn node(children: Vec<Tree>) -> Tree {
        assert!(!children.is_empty(), "σ-nodes need at least one child");
        let depth = 1 + children.iter().map(Tree::depth).max().unwrap_or(0);
        Tree::Node(Arc::new(Node {
            depth,
            children: children.into_boxed_slice(),
        }))
    }

    pub fn depth(&self) -> usize {
        match self {
            Tree::Leaf(_) => 0,
            Tree::Node(n) => n.depth,
        }
    }

    pub fn children(&self) -> &[Tree] {
        match self {
            Tree::Leaf(_) => &[],
            Tree::Node(n) => &n.children,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Tree::Leaf(_))
    }

    pub fn terminal(&self) -> Option<Terminal> {
        match self {
            Tree::Leaf(a) => Some(*a),
            Tree::Node(_) => None,
        }
    }

    /// Number of positions whose length differs from the depth.
    pub fn size(&self) -> usize {
        let depth = self.depth();
        let mut count = 0;
        self.visit(0, &mut |level, _| {
            if level != depth {
                count += 1;
            }
        });
        count
    }

    pub fn positions(&self) -> Vec<Position> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        self.collect_positions(&mut path, &mut out);
        out
    }

    fn collect_positions(&self, path: &mut Vec<usize>, out: &mut Vec<Position>) {
        out.push(Position(path.clone()));
        for (i, c) in self.children().iter().enumerate() {
            path.push(i + 1);
            c.collect_positions(path, out);
            path.pop();
        }
    }

    fn visit(&self, level: usize, f: &mut impl FnMut(usize, &Tree)) {
        f(level, self);
        for c in self.children() {
            c.visit(level + 1, f);
        }
    }

    /// Terminal leaves from left to right.
    pub fn leaves(&self) -> Vec<Terminal> {
        let mut out = Vec::new();
        self.visit(0, &mut |_, t| {
            if let Tree::Leaf(a) = t {
                out.push(*a);
            }
        });
        out
    }

    pub fn subterm_at(&self, p: &Position) -> Result<&Tree, TreeError> {
        let mut cur = self;
        for &i in &p.0 {
            cur = i
                .checked_sub(1)
                .and_then(|i| cur.children().get(i))
                .ok_or_else(|| TreeError::InvalidPosition(p.clone()))?;
        }
        Ok(cur)
    }

    /// All distinct subterms of depth at least 1, this tree included.
    pub fn subterms(&self) -> BTreeSet<Tree> {
        let mut out = BTreeSet::new();
        self.visit(0, &mut |_, t| {
            if t.depth() >= 1 {
                out.insert(t.clone());
            }
        });
        out
    }

    /// Punches a hole at `p`: returns the context and the removed subterm.
    pub fn split_at(&self, p: &Position) -> Result<(Context, Tree), TreeError> {
        let sub = self.subterm_at(p)?.clone();
        let path: Vec<usize> = p.0.iter().map(|i| i - 1).collect();
        let tree = replace_at(self, &path, Tree::Leaf(Terminal::HOLE));
        Ok((Context { tree, path }, sub))
    }

    fn contains_hole(&self) -> bool {
        match self {
            Tree::Leaf(a) => a.is_hole(),
            Tree::Node(n) => n.children.iter().any(Tree::contains_hole),
        }
    }
}

fn replace_at(t: &Tree, path: &[usize], u: Tree) -> Tree {
    match path.split_first() {
        None => u,
        Some((&i, rest)) => {
            let mut children = t.children().to_vec();
            children[i] = replace_at(&children[i], rest, u);
            Tree::node(children)
        }
    }
}

impl Ord for Tree {
    fn cmp(&self, other: &Self) -> Ordering {
        self.depth().cmp(&other.depth()).then_with(|| match (self, other) {
            (Tree::Leaf(a), Tree::Leaf(b)) => a.cmp(b),
            (Tree::Leaf(_), Tree::Node(_)) => Ordering::Less,
            (Tree::Node(_), Tree::Leaf(_)) => Ordering::Greater,
            (Tree::Node(x), Tree::Node(y)) => {
                if Arc::ptr_eq(x, y) {
                    Ordering::Equal
                } else {
                    x.children.iter().cmp(y.children.iter())
                }
            }
        })
    }
}

impl PartialOrd for Tree {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tree::Leaf(a) if a.is_hole() => f.write_str(HOLE),
            Tree::Leaf(a) => write!(f, "#{}", a.index()),
            Tree::Node(n) => {
                f.write_str(SIGMA)?;
                f.write_str("(")?;
                for (i, c) in n.children.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{c:?}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// A tree with exactly one hole.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Context {
    tree: Tree,
    /// 0-based child indices from the root down to the hole.
    path: Vec<usize>,
}

impl Context {
    /// The trivial context `•`.
    pub fn hole() -> Context {
        Context {
            tree: Tree::Leaf(Terminal::HOLE),
            path: Vec::new(),
        }
    }

    /// `σ(before…, •, after…)`.
    pub fn one_level(before: Vec<Tree>, after: Vec<Tree>) -> Context {
        let index = before.len();
        let mut children = before;
        children.push(Tree::Leaf(Terminal::HOLE));
        children.extend(after);
        Context {
            tree: Tree::node(children),
            path: vec![index],
        }
    }

    fn from_tree(tree: Tree) -> Context {
        fn find(t: &Tree, path: &mut Vec<usize>) -> bool {
            match t {
                Tree::Leaf(a) => a.is_hole(),
                Tree::Node(n) => {
                    for (i, c) in n.children.iter().enumerate() {
                        path.push(i);
                        if find(c, path) {
                            return true;
                        }
                        path.pop();
                    }
                    false
                }
            }
        }
        let mut path = Vec::new();
        let found = find(&tree, &mut path);
        debug_assert!(found);
        Context { tree, path }
    }

    pub fn hole_depth(&self) -> usize {
        self.path.len()
    }

    pub fn hole_position(&self) -> Position {
        Position(self.path.iter().map(|i| i + 1).collect())
    }

    /// Depth of the context read as a tree in which the hole is a leaf.
    pub fn depth(&self) -> usize {
        self.tree.depth()
    }

    /// The context as a term over `Σ ∪ {•}`.
    pub fn as_tree(&self) -> &Tree {
        &self.tree
    }

    /// `C[t]`.
    pub fn plug(&self, t: &Tree) -> Tree {
        debug_assert!(!t.contains_hole());
        replace_at(&self.tree, &self.path, t.clone())
    }

    /// Depth of `C[t]`, computed without building it.
    pub fn plugged_depth(&self, t: &Tree) -> usize {
        self.tree.depth().max(self.path.len() + t.depth())
    }

    /// `C[D]`: the context obtained by putting `inner` into the hole.
    pub fn compose(&self, inner: &Context) -> Context {
        let tree = replace_at(&self.tree, &self.path, inner.tree.clone());
        let mut path = self.path.clone();
        path.extend_from_slice(&inner.path);
        Context { tree, path }
    }

    /// Splits off the innermost one-level context: `C = outer[inner]`.
    /// Returns `None` for `•`.
    pub fn split_innermost(&self) -> Option<(Context, Context)> {
        let (&last, prefix) = self.path.split_last()?;
        let parent = subtree(&self.tree, prefix);
        let inner = Context {
            tree: parent.clone(),
            path: vec![last],
        };
        let outer = Context {
            tree: replace_at(&self.tree, prefix, Tree::Leaf(Terminal::HOLE)),
            path: prefix.to_vec(),
        };
        Some((outer, inner))
    }

    /// For a one-level context `σ(u₁,…,•,…,u_m)`: the arity, hole index and
    /// the non-hole arguments.
    pub fn one_level_parts(&self) -> Option<(usize, usize, Vec<&Tree>)> {
        if self.path.len() != 1 {
            return None;
        }
        let hole = self.path[0];
        let children = self.tree.children();
        let others = children
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != hole)
            .map(|(_, c)| c)
            .collect();
        Some((children.len(), hole, others))
    }

    pub fn check(&self, alphabet: &SkeletalAlphabet) -> Result<(), TreeError> {
        fn go(t: &Tree, alphabet: &SkeletalAlphabet) -> Result<(), TreeError> {
            match t {
                Tree::Leaf(a) if a.is_hole() => Ok(()),
                Tree::Leaf(_) => alphabet.check(t),
                Tree::Node(n) => {
                    if !alphabet.arities.contains(&n.children.len()) {
                        return Err(TreeError::BadArity(n.children.len()));
                    }
                    n.children.iter().try_for_each(|c| go(c, alphabet))
                }
            }
        }
        go(&self.tree, alphabet)
    }
}

fn subtree<'a>(t: &'a Tree, path: &[usize]) -> &'a Tree {
    path.iter().fold(t, |cur, &i| &cur.children()[i])
}

impl Ord for Context {
    fn cmp(&self, other: &Self) -> Ordering {
        self.hole_depth()
            .cmp(&other.hole_depth())
            .then_with(|| self.tree.cmp(&other.tree))
    }
}

impl PartialOrd for Context {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.tree)
    }
}

/// All σ-trees of depth `1..=max_depth`, in increasing tree order.
///
/// Built level by level: the trees of depth exactly `k` are assembled from
/// shallower trees with at least one child of depth `k - 1`, then sorted.
pub fn enumerate_trees(alphabet: &SkeletalAlphabet, max_depth: usize) -> Vec<Tree> {
    let mut all: Vec<Tree> = Vec::new();
    // children available so far, with the start of the previous level
    let mut pool: Vec<Tree> = alphabet.leaves();
    let mut prev_start = 0;
    for _ in 1..=max_depth {
        let prev_end = pool.len();
        let mut level = Vec::new();
        for &m in alphabet.arities() {
            for_each_tuple(pool.len(), m, &mut |idx| {
                if idx.iter().any(|&i| i >= prev_start && i < prev_end) {
                    level.push(Tree::node(idx.iter().map(|&i| pool[i].clone()).collect()));
                }
            });
        }
        level.sort();
        prev_start = pool.len();
        pool.extend(level.iter().cloned());
        all.extend(level);
    }
    all
}

/// Calls `f` on every tuple in `0..base` of length `len`, lexicographically.
pub(crate) fn for_each_tuple(base: usize, len: usize, f: &mut impl FnMut(&[usize])) {
    if base == 0 && len > 0 {
        return;
    }
    let mut idx = vec![0usize; len];
    loop {
        f(&idx);
        let mut k = len;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < base {
                break;
            }
            idx[k] = 0;
        }
    }
}
