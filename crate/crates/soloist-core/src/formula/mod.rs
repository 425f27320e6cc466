//! Formula AST with interned subformula identity.
//!
//! A [`Formula`] owns an arena of [`Connective`] nodes; structurally equal
//! subformulae are interned to a single [`FormulaId`], so the arena is the
//! set of distinct subformulae and identity is cheap integer equality.
//! Conjunction and disjunction are n-ary with set semantics: children are
//! deduplicated and kept in a canonical order, and a single-child `And`/`Or`
//! collapses to its child.

mod parse;
mod rewrite;
mod table;

pub use parse::{parse_formula, ParseError};
pub use rewrite::{expand_avg_count, expand_derived};
pub use table::{build_table, FormulaTable};

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Identifier of one distinct subformula within a [`Formula`] arena.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct FormulaId(pub u32);

impl FormulaId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for FormulaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Comparison operator used by the aggregate modalities.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Comparator {
    Lt,
    Le,
    Ge,
    Gt,
    Eq,
}

impl Comparator {
    pub fn test(self, lhs: u64, rhs: u64) -> bool {
        match self {
            Comparator::Lt => lhs < rhs,
            Comparator::Le => lhs <= rhs,
            Comparator::Ge => lhs >= rhs,
            Comparator::Gt => lhs > rhs,
            Comparator::Eq => lhs == rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Ge => ">=",
            Comparator::Gt => ">",
            Comparator::Eq => "=",
        }
    }
}

/// A nonempty interval over the naturals, with explicit endpoint closure.
/// `hi == None` means the interval is unbounded above.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Interval {
    pub lo: u64,
    pub hi: Option<u64>,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn new(
        lo: u64,
        hi: Option<u64>,
        lo_closed: bool,
        hi_closed: bool,
    ) -> Result<Self, FormulaError> {
        if let Some(hi) = hi {
            let nonempty = lo < hi || (lo == hi && lo_closed && hi_closed);
            if !nonempty {
                return Err(FormulaError::EmptyInterval { lo, hi });
            }
        }
        Ok(Interval {
            lo,
            hi,
            lo_closed,
            hi_closed,
        })
    }

    /// Membership test for a time distance.
    pub fn contains(&self, d: u64) -> bool {
        let above_lo = if self.lo_closed { d >= self.lo } else { d > self.lo };
        let below_hi = match self.hi {
            None => true,
            Some(hi) => {
                if self.hi_closed {
                    d <= hi
                } else {
                    d < hi
                }
            }
        };
        above_lo && below_hi
    }

    /// True once `d` (and hence any larger distance) can no longer lie in
    /// the interval. Used to retire tracked positions.
    pub fn beyond(&self, d: u64) -> bool {
        match self.hi {
            None => false,
            Some(hi) => {
                if self.hi_closed {
                    d > hi
                } else {
                    d >= hi
                }
            }
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let open = if self.lo_closed { '[' } else { '(' };
        let close = if self.hi_closed { ']' } else { ')' };
        match self.hi {
            Some(hi) => write!(f, "{}{},{}{}", open, self.lo, hi, close),
            None => write!(f, "{}{},inf{}", open, self.lo, close),
        }
    }
}

/// One node of the AST. Children are referenced by [`FormulaId`].
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Connective {
    Atom(String),
    True,
    False,
    Not(FormulaId),
    /// N-ary conjunction; children pairwise distinct, sorted by id.
    And(Vec<FormulaId>),
    /// N-ary disjunction; children pairwise distinct, sorted by id.
    Or(Vec<FormulaId>),
    Until(Interval, FormulaId, FormulaId),
    Since(Interval, FormulaId, FormulaId),
    /// Eventually in the future (`F`).
    Eventually(Interval, FormulaId),
    /// Always in the future (`G`).
    Always(Interval, FormulaId),
    /// Next (`X`).
    Next(Interval, FormulaId),
    /// Eventually in the past (`P`).
    Once(Interval, FormulaId),
    /// Always in the past (`H`).
    Historically(Interval, FormulaId),
    /// Previous (`Y`).
    Prev(Interval, FormulaId),
    /// Bound on the number of child occurrences in the last `window` time
    /// units.
    Count {
        cmp: Comparator,
        bound: u64,
        window: u64,
        child: FormulaId,
    },
    /// Bound on the average number of child occurrences per `subwindow`
    /// within the last `window` time units (tail remainder ignored).
    AvgCount {
        cmp: Comparator,
        bound: u64,
        window: u64,
        subwindow: u64,
        child: FormulaId,
    },
    /// Bound on the maximum number of child occurrences over the
    /// right-aligned `subwindow`-length subintervals of the last `window`
    /// time units (tail remainder included).
    MaxCount {
        cmp: Comparator,
        bound: u64,
        window: u64,
        subwindow: u64,
        child: FormulaId,
    },
    /// Bound on the average distance between adjacent (left, right) pairs
    /// in the last `window` time units.
    AvgDist {
        cmp: Comparator,
        bound: u64,
        window: u64,
        left: FormulaId,
        right: FormulaId,
    },
}

impl Connective {
    /// Direct children in syntactic order (possibly with repeats, e.g. for
    /// `a U a`).
    pub fn children(&self) -> Vec<FormulaId> {
        match self {
            Connective::Atom(_) | Connective::True | Connective::False => vec![],
            Connective::Not(c) => vec![*c],
            Connective::And(cs) | Connective::Or(cs) => cs.clone(),
            Connective::Until(_, l, r) | Connective::Since(_, l, r) => vec![*l, *r],
            Connective::Eventually(_, c)
            | Connective::Always(_, c)
            | Connective::Next(_, c)
            | Connective::Once(_, c)
            | Connective::Historically(_, c)
            | Connective::Prev(_, c) => vec![*c],
            Connective::Count { child, .. }
            | Connective::AvgCount { child, .. }
            | Connective::MaxCount { child, .. } => vec![*child],
            Connective::AvgDist { left, right, .. } => vec![*left, *right],
        }
    }
}

/// Validation errors raised while constructing formulae.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormulaError {
    #[error("empty interval: lower bound {lo} meets upper bound {hi} on an open end")]
    EmptyInterval { lo: u64, hi: u64 },
    #[error("subwindow length must be at least 1")]
    ZeroSubwindow,
    #[error("window {window} is smaller than subwindow {subwindow}")]
    WindowSmallerThanSubwindow { window: u64, subwindow: u64 },
    #[error("conjunction/disjunction requires at least one child")]
    EmptyJunction,
    #[error("atom name {0:?} is not a valid identifier")]
    BadAtomName(String),
}

fn valid_atom_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Incrementally interns nodes; finished off with [`FormulaBuilder::build`].
#[derive(Default)]
pub struct FormulaBuilder {
    nodes: Vec<Connective>,
    index: HashMap<Connective, FormulaId>,
}

impl FormulaBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn intern(&mut self, node: Connective) -> FormulaId {
        if let Some(&id) = self.index.get(&node) {
            return id;
        }
        let id = FormulaId(self.nodes.len() as u32);
        self.nodes.push(node.clone());
        self.index.insert(node, id);
        id
    }

    pub fn atom(&mut self, name: &str) -> Result<FormulaId, FormulaError> {
        if !valid_atom_name(name) {
            return Err(FormulaError::BadAtomName(name.to_owned()));
        }
        Ok(self.intern(Connective::Atom(name.to_owned())))
    }

    pub fn tt(&mut self) -> FormulaId {
        self.intern(Connective::True)
    }

    pub fn ff(&mut self) -> FormulaId {
        self.intern(Connective::False)
    }

    pub fn not(&mut self, child: FormulaId) -> FormulaId {
        self.intern(Connective::Not(child))
    }

    /// N-ary conjunction with set semantics: dedup, canonical child order,
    /// singleton collapse.
    pub fn and(&mut self, children: Vec<FormulaId>) -> Result<FormulaId, FormulaError> {
        self.junction(children, true)
    }

    /// N-ary disjunction; same normalization as [`FormulaBuilder::and`].
    pub fn or(&mut self, children: Vec<FormulaId>) -> Result<FormulaId, FormulaError> {
        self.junction(children, false)
    }

    fn junction(
        &mut self,
        mut children: Vec<FormulaId>,
        conj: bool,
    ) -> Result<FormulaId, FormulaError> {
        if children.is_empty() {
            return Err(FormulaError::EmptyJunction);
        }
        children.sort_unstable();
        children.dedup();
        if children.len() == 1 {
            return Ok(children[0]);
        }
        let node = if conj {
            Connective::And(children)
        } else {
            Connective::Or(children)
        };
        Ok(self.intern(node))
    }

    pub fn until(&mut self, interval: Interval, left: FormulaId, right: FormulaId) -> FormulaId {
        self.intern(Connective::Until(interval, left, right))
    }

    pub fn since(&mut self, interval: Interval, left: FormulaId, right: FormulaId) -> FormulaId {
        self.intern(Connective::Since(interval, left, right))
    }

    pub fn eventually(&mut self, interval: Interval, child: FormulaId) -> FormulaId {
        self.intern(Connective::Eventually(interval, child))
    }

    pub fn always(&mut self, interval: Interval, child: FormulaId) -> FormulaId {
        self.intern(Connective::Always(interval, child))
    }

    pub fn next(&mut self, interval: Interval, child: FormulaId) -> FormulaId {
        self.intern(Connective::Next(interval, child))
    }

    pub fn once(&mut self, interval: Interval, child: FormulaId) -> FormulaId {
        self.intern(Connective::Once(interval, child))
    }

    pub fn historically(&mut self, interval: Interval, child: FormulaId) -> FormulaId {
        self.intern(Connective::Historically(interval, child))
    }

    pub fn prev(&mut self, interval: Interval, child: FormulaId) -> FormulaId {
        self.intern(Connective::Prev(interval, child))
    }

    pub fn count(&mut self, cmp: Comparator, bound: u64, window: u64, child: FormulaId) -> FormulaId {
        self.intern(Connective::Count {
            cmp,
            bound,
            window,
            child,
        })
    }

    pub fn avg_count(
        &mut self,
        cmp: Comparator,
        bound: u64,
        window: u64,
        subwindow: u64,
        child: FormulaId,
    ) -> Result<FormulaId, FormulaError> {
        check_subwindow(window, subwindow)?;
        Ok(self.intern(Connective::AvgCount {
            cmp,
            bound,
            window,
            subwindow,
            child,
        }))
    }

    pub fn max_count(
        &mut self,
        cmp: Comparator,
        bound: u64,
        window: u64,
        subwindow: u64,
        child: FormulaId,
    ) -> Result<FormulaId, FormulaError> {
        check_subwindow(window, subwindow)?;
        Ok(self.intern(Connective::MaxCount {
            cmp,
            bound,
            window,
            subwindow,
            child,
        }))
    }

    pub fn avg_dist(
        &mut self,
        cmp: Comparator,
        bound: u64,
        window: u64,
        left: FormulaId,
        right: FormulaId,
    ) -> FormulaId {
        self.intern(Connective::AvgDist {
            cmp,
            bound,
            window,
            left,
            right,
        })
    }

    pub fn build(self, root: FormulaId) -> Formula {
        assert!(
            root.index() < self.nodes.len(),
            "root id does not belong to this builder"
        );
        Formula {
            nodes: self.nodes,
            root,
        }
    }
}

fn check_subwindow(window: u64, subwindow: u64) -> Result<(), FormulaError> {
    if subwindow == 0 {
        return Err(FormulaError::ZeroSubwindow);
    }
    if window < subwindow {
        return Err(FormulaError::WindowSmallerThanSubwindow { window, subwindow });
    }
    Ok(())
}

/// An interned formula: arena of distinct subformulae plus a root id.
#[derive(Clone, Debug)]
pub struct Formula {
    nodes: Vec<Connective>,
    root: FormulaId,
}

impl Formula {
    pub fn root(&self) -> FormulaId {
        self.root
    }

    pub fn node(&self, id: FormulaId) -> &Connective {
        &self.nodes[id.index()]
    }

    /// Number of interned nodes (an upper bound on the reachable lattice
    /// size; see [`FormulaTable`] for the reachable count).
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn ids(&self) -> impl Iterator<Item = FormulaId> + '_ {
        (0..self.nodes.len() as u32).map(FormulaId)
    }

    /// Renders one subformula in the concrete surface syntax.
    pub fn render(&self, id: FormulaId) -> String {
        let mut out = String::new();
        self.render_prec(id, 0, &mut out);
        out
    }

    // Precedence levels: 1 implication (unused in output), 2 or, 3 and,
    // 4 until/since, 5 unary, 6 atoms. Parenthesize when a child's level
    // is below the context's.
    fn render_prec(&self, id: FormulaId, min: u8, out: &mut String) {
        let level = match self.node(id) {
            Connective::Or(_) => 2,
            Connective::And(_) => 3,
            Connective::Until(..) | Connective::Since(..) => 4,
            Connective::Not(_)
            | Connective::Eventually(..)
            | Connective::Always(..)
            | Connective::Next(..)
            | Connective::Once(..)
            | Connective::Historically(..)
            | Connective::Prev(..) => 5,
            _ => 6,
        };
        let parens = level < min;
        if parens {
            out.push('(');
        }
        match self.node(id) {
            Connective::Atom(name) => out.push_str(name),
            Connective::True => out.push_str("true"),
            Connective::False => out.push_str("false"),
            Connective::Not(c) => {
                out.push('!');
                self.render_prec(*c, 6, out);
            }
            Connective::And(cs) => {
                for (k, c) in cs.iter().enumerate() {
                    if k > 0 {
                        out.push_str(" & ");
                    }
                    self.render_prec(*c, 4, out);
                }
            }
            Connective::Or(cs) => {
                for (k, c) in cs.iter().enumerate() {
                    if k > 0 {
                        out.push_str(" | ");
                    }
                    self.render_prec(*c, 3, out);
                }
            }
            Connective::Until(i, l, r) => {
                self.render_prec(*l, 5, out);
                out.push_str(&format!(" U{} ", i));
                self.render_prec(*r, 4, out);
            }
            Connective::Since(i, l, r) => {
                self.render_prec(*l, 5, out);
                out.push_str(&format!(" S{} ", i));
                self.render_prec(*r, 4, out);
            }
            Connective::Eventually(i, c) => self.render_unary('F', *i, *c, out),
            Connective::Always(i, c) => self.render_unary('G', *i, *c, out),
            Connective::Next(i, c) => self.render_unary('X', *i, *c, out),
            Connective::Once(i, c) => self.render_unary('P', *i, *c, out),
            Connective::Historically(i, c) => self.render_unary('H', *i, *c, out),
            Connective::Prev(i, c) => self.render_unary('Y', *i, *c, out),
            Connective::Count {
                cmp,
                bound,
                window,
                child,
            } => {
                out.push_str(&format!("C[{}{},{}](", cmp.symbol(), bound, window));
                self.render_prec(*child, 0, out);
                out.push(')');
            }
            Connective::AvgCount {
                cmp,
                bound,
                window,
                subwindow,
                child,
            } => {
                out.push_str(&format!(
                    "A[{}{},{},{}](",
                    cmp.symbol(),
                    bound,
                    window,
                    subwindow
                ));
                self.render_prec(*child, 0, out);
                out.push(')');
            }
            Connective::MaxCount {
                cmp,
                bound,
                window,
                subwindow,
                child,
            } => {
                out.push_str(&format!(
                    "M[{}{},{},{}](",
                    cmp.symbol(),
                    bound,
                    window,
                    subwindow
                ));
                self.render_prec(*child, 0, out);
                out.push(')');
            }
            Connective::AvgDist {
                cmp,
                bound,
                window,
                left,
                right,
            } => {
                out.push_str(&format!("D[{}{},{}](", cmp.symbol(), bound, window));
                self.render_prec(*left, 0, out);
                out.push_str(", ");
                self.render_prec(*right, 0, out);
                out.push(')');
            }
        }
        if parens {
            out.push(')');
        }
    }

    fn render_unary(&self, op: char, interval: Interval, child: FormulaId, out: &mut String) {
        out.push(op);
        out.push_str(&format!("{} ", interval));
        self.render_prec(child, 5, out);
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(self.root))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interning_shares_structurally_equal_nodes() {
        let mut b = FormulaBuilder::new();
        let a1 = b.atom("a").unwrap();
        let a2 = b.atom("a").unwrap();
        assert_eq!(a1, a2);
        let x = b.atom("x").unwrap();
        let and1 = b.and(vec![a1, x]).unwrap();
        let and2 = b.and(vec![x, a2]).unwrap();
        assert_eq!(and1, and2, "conjunction children form a set");
    }

    #[test]
    fn singleton_junction_collapses() {
        let mut b = FormulaBuilder::new();
        let a = b.atom("a").unwrap();
        let and = b.and(vec![a, a]).unwrap();
        assert_eq!(and, a);
        let f = b.build(and);
        assert!(matches!(f.node(f.root()), Connective::Atom(n) if n == "a"));
    }

    #[test]
    fn empty_interval_rejected() {
        assert!(Interval::new(5, Some(5), true, false).is_err());
        assert!(Interval::new(5, Some(4), true, true).is_err());
        assert!(Interval::new(5, Some(5), true, true).is_ok());
        assert!(Interval::new(5, None, false, false).is_ok());
    }

    #[test]
    fn interval_membership_honors_closure() {
        let open = Interval::new(1, Some(5), false, false).unwrap();
        assert!(!open.contains(1));
        assert!(open.contains(2));
        assert!(open.contains(4));
        assert!(!open.contains(5));
        let closed = Interval::new(1, Some(5), true, true).unwrap();
        assert!(closed.contains(1));
        assert!(closed.contains(5));
        let unbounded = Interval::new(3, None, false, false).unwrap();
        assert!(unbounded.contains(1_000_000));
        assert!(!unbounded.contains(3));
    }

    #[test]
    fn max_count_validates_bounds() {
        let mut b = FormulaBuilder::new();
        let a = b.atom("a").unwrap();
        assert!(b.max_count(Comparator::Le, 1, 2, 3, a).is_err());
        assert!(b.max_count(Comparator::Le, 1, 3, 0, a).is_err());
        assert!(b.max_count(Comparator::Le, 1, 6, 2, a).is_ok());
    }
}
