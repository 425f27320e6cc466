//! Sequential reference evaluator.
//!
//! Implements the satisfaction relation directly, clause by clause, on the
//! finite trace: all position quantifiers range over `1..=H`. It makes no
//! attempt to be fast — it exists as ground truth for differential testing
//! of the pipeline.
//!
//! Window conventions, for position `i` with timestamp `t_i`:
//!
//! * `c(a, b, p)` counts positions `s` with `a < t_s <= b` where `p` holds;
//! * count:     `c(t_i - K, t_i, p) cmp n`, guarded by `t_i >= K`;
//! * max count: subinterval `m` of length `h` spans
//!   `(max(t_i - K, t_i - (m+1)h), t_i - mh]` for `m = 0..=K/h` (the tail
//!   remainder is included); the maximum of the counts is compared;
//! * avg dist:  over pairs `(s, t)` where `p` holds at `s` in the window
//!   and `t` is the earliest later position `<= i` where `q` holds; the
//!   average distance is compared exactly, as `dist cmp n * pairs`.

use crate::formula::{Connective, Formula, FormulaId, FormulaTable, Interval};
use crate::holds::HoldsSet;
use crate::trace::Trace;

/// Result of a full evaluation: holds-sets for every subformula plus any
/// warnings raised on the way.
#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub holds: HoldsSet,
    pub warnings: Vec<EvalWarning>,
}

/// Non-fatal conditions detected during evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalWarning {
    /// The two average-distance arguments did not hold in alternation
    /// within some evaluated window: either two left occurrences share one
    /// matching right occurrence, or a position satisfies both arguments.
    DistAlternation { formula: FormulaId },
}

impl std::fmt::Display for EvalWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EvalWarning::DistAlternation { formula } => write!(
                f,
                "average-distance arguments of subformula {} do not alternate",
                formula
            ),
        }
    }
}

/// Number of positions `s` with `tau_a < t_s <= tau_b` at which `phi`
/// holds. `holds` must already contain `phi`'s positions.
pub fn count_occurrences(
    trace: &Trace,
    holds: &HoldsSet,
    phi: FormulaId,
    tau_a: u64,
    tau_b: u64,
) -> u64 {
    debug_assert!(tau_a <= tau_b);
    holds
        .positions(phi)
        .iter()
        .filter(|&&s| {
            let tau = trace.timestamp(s);
            tau_a < tau && tau <= tau_b
        })
        .count() as u64
}

/// The matched pairs `(s, t)` of the average-distance window at timestamp
/// `tau_i`: `phi` holds at `s` with `tau_i - K < t_s <= tau_i`, and `t` is
/// the earliest position after `s` with `t_t <= tau_i` where `psi` holds.
pub fn matching_pairs(
    trace: &Trace,
    holds: &HoldsSet,
    phi: FormulaId,
    psi: FormulaId,
    tau_i: u64,
    window: u64,
) -> Vec<(u32, u32)> {
    let mut pairs = Vec::new();
    let lo = tau_i.saturating_sub(window);
    for &s in holds.positions(phi) {
        let tau_s = trace.timestamp(s);
        if tau_s <= lo || tau_s > tau_i {
            continue;
        }
        let t = holds
            .positions(psi)
            .iter()
            .copied()
            .find(|&u| u > s && trace.timestamp(u) <= tau_i);
        if let Some(t) = t {
            pairs.push((s, t));
        }
    }
    pairs
}

struct Evaluator<'a> {
    trace: &'a Trace,
    formula: &'a Formula,
    holds: HoldsSet,
    warnings: Vec<EvalWarning>,
}

impl<'a> Evaluator<'a> {
    fn len(&self) -> u32 {
        self.trace.len()
    }

    fn tau(&self, i: u32) -> u64 {
        self.trace.timestamp(i)
    }

    fn bitmap(&self, id: FormulaId) -> Vec<bool> {
        let mut map = vec![false; self.len() as usize + 1];
        for &p in self.holds.positions(id) {
            map[p as usize] = true;
        }
        map
    }

    fn eval_node(&mut self, id: FormulaId) -> Vec<u32> {
        let h = self.len();
        match self.formula.node(id).clone() {
            Connective::Atom(name) => self
                .trace
                .entries()
                .iter()
                .filter(|e| e.atoms.iter().any(|a| *a == name))
                .map(|e| e.position)
                .collect(),
            Connective::True => (1..=h).collect(),
            Connective::False => Vec::new(),
            Connective::Not(c) => {
                let child = self.bitmap(c);
                (1..=h).filter(|&i| !child[i as usize]).collect()
            }
            Connective::And(cs) => {
                let maps: Vec<_> = cs.iter().map(|c| self.bitmap(*c)).collect();
                (1..=h)
                    .filter(|&i| maps.iter().all(|m| m[i as usize]))
                    .collect()
            }
            Connective::Or(cs) => {
                let maps: Vec<_> = cs.iter().map(|c| self.bitmap(*c)).collect();
                (1..=h)
                    .filter(|&i| maps.iter().any(|m| m[i as usize]))
                    .collect()
            }
            Connective::Until(interval, l, r) => self.eval_until(interval, l, r),
            Connective::Since(interval, l, r) => self.eval_since(interval, l, r),
            Connective::Eventually(interval, c) => {
                let child = self.bitmap(c);
                (1..=h)
                    .filter(|&i| {
                        for j in i + 1..=h {
                            let d = self.tau(j) - self.tau(i);
                            if interval.beyond(d) {
                                break;
                            }
                            if interval.contains(d) && child[j as usize] {
                                return true;
                            }
                        }
                        false
                    })
                    .collect()
            }
            Connective::Always(interval, c) => {
                let child = self.bitmap(c);
                (1..=h)
                    .filter(|&i| {
                        for j in i + 1..=h {
                            let d = self.tau(j) - self.tau(i);
                            if interval.beyond(d) {
                                break;
                            }
                            if interval.contains(d) && !child[j as usize] {
                                return false;
                            }
                        }
                        true
                    })
                    .collect()
            }
            Connective::Next(interval, c) => {
                let child = self.bitmap(c);
                (1..h)
                    .filter(|&i| {
                        child[(i + 1) as usize]
                            && interval.contains(self.tau(i + 1) - self.tau(i))
                    })
                    .collect()
            }
            Connective::Once(interval, c) => {
                let child = self.bitmap(c);
                (1..=h)
                    .filter(|&i| {
                        for j in (1..i).rev() {
                            let d = self.tau(i) - self.tau(j);
                            if interval.beyond(d) {
                                break;
                            }
                            if interval.contains(d) && child[j as usize] {
                                return true;
                            }
                        }
                        false
                    })
                    .collect()
            }
            Connective::Historically(interval, c) => {
                let child = self.bitmap(c);
                (1..=h)
                    .filter(|&i| {
                        for j in (1..i).rev() {
                            let d = self.tau(i) - self.tau(j);
                            if interval.beyond(d) {
                                break;
                            }
                            if interval.contains(d) && !child[j as usize] {
                                return false;
                            }
                        }
                        true
                    })
                    .collect()
            }
            Connective::Prev(interval, c) => {
                let child = self.bitmap(c);
                (2..=h)
                    .filter(|&i| {
                        child[(i - 1) as usize]
                            && interval.contains(self.tau(i) - self.tau(i - 1))
                    })
                    .collect()
            }
            Connective::Count {
                cmp,
                bound,
                window,
                child,
            } => (1..=h)
                .filter(|&i| {
                    let tau_i = self.tau(i);
                    if tau_i < window {
                        return false;
                    }
                    let c = count_occurrences(
                        self.trace,
                        &self.holds,
                        child,
                        tau_i - window,
                        tau_i,
                    );
                    cmp.test(c, bound)
                })
                .collect(),
            // Average count is defined by its rewrite into count; evaluate
            // the rewritten parameters directly.
            Connective::AvgCount {
                cmp,
                bound,
                window,
                subwindow,
                child,
            } => {
                let slices = window / subwindow;
                let eff_window = slices * subwindow;
                let eff_bound = bound * slices;
                (1..=h)
                    .filter(|&i| {
                        let tau_i = self.tau(i);
                        if tau_i < eff_window {
                            return false;
                        }
                        let c = count_occurrences(
                            self.trace,
                            &self.holds,
                            child,
                            tau_i - eff_window,
                            tau_i,
                        );
                        cmp.test(c, eff_bound)
                    })
                    .collect()
            }
            Connective::MaxCount {
                cmp,
                bound,
                window,
                subwindow,
                child,
            } => (1..=h)
                .filter(|&i| {
                    let tau_i = self.tau(i);
                    if tau_i < window {
                        return false;
                    }
                    let slices = window / subwindow;
                    let max = (0..=slices)
                        .map(|m| {
                            let lb = std::cmp::max(
                                tau_i - window,
                                tau_i.saturating_sub((m + 1) * subwindow),
                            );
                            let rb = tau_i - m * subwindow;
                            count_occurrences(self.trace, &self.holds, child, lb, rb)
                        })
                        .max()
                        .expect("at least one subinterval");
                    cmp.test(max, bound)
                })
                .collect(),
            Connective::AvgDist {
                cmp,
                bound,
                window,
                left,
                right,
            } => {
                let left_map = self.bitmap(left);
                let right_map = self.bitmap(right);
                let mut warned = (1..=h)
                    .any(|p| left_map[p as usize] && right_map[p as usize]);
                if warned {
                    self.warnings
                        .push(EvalWarning::DistAlternation { formula: id });
                }
                // next_right[p]: earliest right-position strictly after p.
                let mut next_right = vec![None; h as usize + 2];
                let mut carry = None;
                for p in (1..=h).rev() {
                    next_right[p as usize] = carry;
                    if right_map[p as usize] {
                        carry = Some(p);
                    }
                }
                let lefts = self.holds.positions(left).to_vec();
                let mut out = Vec::new();
                let mut win_start = 0usize; // index into lefts
                for i in 1..=h {
                    let tau_i = self.tau(i);
                    while win_start < lefts.len()
                        && self.tau(lefts[win_start]) + window <= tau_i
                    {
                        win_start += 1;
                    }
                    let mut pairs = 0u64;
                    let mut dist = 0u64;
                    let mut prev_t = None;
                    for &s in &lefts[win_start..] {
                        if s > i {
                            break;
                        }
                        if let Some(t) = next_right[s as usize] {
                            if t <= i {
                                pairs += 1;
                                dist += self.tau(t) - self.tau(s);
                                if prev_t == Some(t) && !warned {
                                    self.warnings
                                        .push(EvalWarning::DistAlternation { formula: id });
                                    warned = true;
                                }
                                prev_t = Some(t);
                            }
                        }
                    }
                    if tau_i >= window && pairs > 0 && cmp.test(dist, bound * pairs) {
                        out.push(i);
                    }
                }
                out
            }
        }
    }

    fn eval_until(&self, interval: Interval, l: FormulaId, r: FormulaId) -> Vec<u32> {
        let h = self.len();
        let left = self.bitmap(l);
        let right = self.bitmap(r);
        let mut out = Vec::new();
        for i in 1..=h {
            let tau_i = self.tau(i);
            let mut chain = true;
            for j in i + 1..=h {
                let d = self.tau(j) - tau_i;
                if interval.beyond(d) {
                    break;
                }
                if interval.contains(d) && right[j as usize] && chain {
                    out.push(i);
                    break;
                }
                chain &= left[j as usize];
                if !chain {
                    break;
                }
            }
        }
        out
    }

    fn eval_since(&self, interval: Interval, l: FormulaId, r: FormulaId) -> Vec<u32> {
        let h = self.len();
        let left = self.bitmap(l);
        let right = self.bitmap(r);
        let mut out = Vec::new();
        for i in 1..=h {
            let tau_i = self.tau(i);
            let mut chain = true;
            for j in (1..i).rev() {
                let d = tau_i - self.tau(j);
                if interval.beyond(d) {
                    break;
                }
                if interval.contains(d) && right[j as usize] && chain {
                    out.push(i);
                    break;
                }
                chain &= left[j as usize];
                if !chain {
                    break;
                }
            }
        }
        out
    }
}

/// Evaluates every subformula bottom-up over the lattice, producing the
/// full holds-set.
pub fn eval_positions(trace: &Trace, formula: &Formula, table: &FormulaTable) -> EvalOutcome {
    let mut ev = Evaluator {
        trace,
        formula,
        holds: HoldsSet::new(formula.node_count()),
        warnings: Vec::new(),
    };
    for h in 0..=table.root_height() {
        for &id in table.by_height(h) {
            let positions = ev.eval_node(id);
            ev.holds.set(id, positions);
        }
    }
    EvalOutcome {
        holds: ev.holds,
        warnings: ev.warnings,
    }
}

/// Truth of `formula` at one position.
pub fn eval_at(trace: &Trace, formula: &Formula, position: u32) -> bool {
    assert!(
        position >= 1 && position <= trace.len(),
        "position out of range"
    );
    let table = crate::formula::build_table(formula);
    let outcome = eval_positions(trace, formula, &table);
    outcome.holds.contains(formula.root(), position)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{build_table, parse_formula};
    use crate::trace::load_trace;

    fn t1() -> Trace {
        load_trace("1,1,a\n2,3,a;b\n3,6,b\n4,10,a;c\n5,12,c\n".as_bytes()).unwrap()
    }

    fn t2() -> Trace {
        load_trace("1,2,req\n2,4,res\n3,7,req\n4,9,res\n5,11,req\n6,13,res\n".as_bytes()).unwrap()
    }

    fn t3() -> Trace {
        load_trace("1,1,a\n2,2,z\n3,3,a\n4,5,a\n5,7,z\n".as_bytes()).unwrap()
    }

    fn holds_of(trace: &Trace, text: &str) -> Vec<u32> {
        let f = parse_formula(text).unwrap();
        let table = build_table(&f);
        let outcome = eval_positions(trace, &f, &table);
        outcome.holds.positions(f.root()).to_vec()
    }

    #[test]
    fn count_occurrences_clause() {
        let trace = t1();
        let f = parse_formula("a").unwrap();
        let table = build_table(&f);
        let outcome = eval_positions(&trace, &f, &table);
        let a = table.atom_id("a").unwrap();
        assert_eq!(outcome.holds.positions(a), &[1, 2, 4]);
        assert_eq!(count_occurrences(&trace, &outcome.holds, a, 5, 10), 1);
        assert_eq!(count_occurrences(&trace, &outcome.holds, a, 0, 12), 3);
        for tau in [0, 1, 6, 12] {
            assert_eq!(count_occurrences(&trace, &outcome.holds, a, tau, tau), 0);
        }
    }

    #[test]
    fn matching_pairs_clause() {
        let trace = t2();
        let f = parse_formula("req & res").unwrap();
        let table = build_table(&f);
        let outcome = eval_positions(&trace, &f, &table);
        let req = table.atom_id("req").unwrap();
        let res = table.atom_id("res").unwrap();
        assert_eq!(
            matching_pairs(&trace, &outcome.holds, req, res, 13, 12),
            vec![(1, 2), (3, 4), (5, 6)]
        );
        // No left occurrence inside the window.
        assert_eq!(
            matching_pairs(&trace, &outcome.holds, req, res, 2, 1),
            vec![]
        );
        // A left occurrence with no later right occurrence contributes
        // nothing: at tau_i = 11 the request at position 5 is unmatched.
        assert_eq!(
            matching_pairs(&trace, &outcome.holds, req, res, 11, 12),
            vec![(1, 2), (3, 4)]
        );
    }

    #[test]
    fn boolean_clauses() {
        let trace = t1();
        assert_eq!(holds_of(&trace, "!c"), vec![1, 2, 3]);
        assert_eq!(holds_of(&trace, "a & b"), vec![2]);
        assert_eq!(holds_of(&trace, "a | b"), vec![1, 2, 3, 4]);
        assert_eq!(holds_of(&trace, "true"), vec![1, 2, 3, 4, 5]);
        assert_eq!(holds_of(&trace, "false"), vec![]);
    }

    #[test]
    fn until_clause() {
        let trace = t1();
        assert_eq!(holds_of(&trace, "a U(1,5) b"), vec![1, 2]);
        assert!(eval_at(&trace, &parse_formula("a U(1,5) b").unwrap(), 1));
        assert!(!eval_at(&trace, &parse_formula("a U(1,5) b").unwrap(), 3));
    }

    #[test]
    fn since_clause() {
        let trace = t1();
        // Position 5 is witnessed by position 4: tau5 - tau4 = 2 lies in
        // (1,5), `a` holds at 4 and the chain between is empty.
        assert_eq!(holds_of(&trace, "b S(1,5) a"), vec![2, 3, 5]);
    }

    #[test]
    fn count_clause_guard() {
        let trace = t1();
        assert_eq!(holds_of(&trace, "C[>=1,5](a)"), vec![3, 4, 5]);
        // Guard: position 1 has tau = 1 < 5 even though the window counts.
        assert!(!holds_of(&trace, "C[>=1,5](a)").contains(&1));
        // n = 0 with >= holds wherever the guard does.
        assert_eq!(holds_of(&trace, "C[>=0,5](a)"), vec![3, 4, 5]);
    }

    #[test]
    fn max_count_clause() {
        let trace = t3();
        assert_eq!(holds_of(&trace, "M[<=1,6,2](a)"), vec![5]);
        // Never-holding child: max = 0.
        assert_eq!(holds_of(&trace, "M[>=1,6,2](nope)"), vec![]);
        // Position 4 has tau = 5 < 6, so only position 5 passes the guard.
        assert_eq!(holds_of(&trace, "M[=0,6,2](nope)"), vec![5]);
    }

    #[test]
    fn avg_dist_clause() {
        let trace = t2();
        assert_eq!(holds_of(&trace, "D[<3,12](req, res)"), vec![6]);
        // Average is exactly 2.
        assert_eq!(holds_of(&trace, "D[=2,12](req, res)"), vec![6]);
        assert_eq!(holds_of(&trace, "D[<2,12](req, res)"), vec![]);
        // No complete pair in the window: no emission.
        assert_eq!(holds_of(&trace, "D[>=0,1](req, res)"), vec![]);
    }

    #[test]
    fn avg_dist_alternation_warning() {
        // Two `p` in a row share the matching `q`.
        let trace = load_trace("1,10,p\n2,11,p\n3,12,q\n".as_bytes()).unwrap();
        let f = parse_formula("D[<5,10](p, q)").unwrap();
        let table = build_table(&f);
        let outcome = eval_positions(&trace, &f, &table);
        assert_eq!(outcome.warnings.len(), 1);

        // Alternating arguments raise no warning.
        let ok = t2();
        let f = parse_formula("D[<3,12](req, res)").unwrap();
        let table = build_table(&f);
        let outcome = eval_positions(&ok, &f, &table);
        assert!(outcome.warnings.is_empty());
    }

    #[test]
    fn eval_positions_whole_lattice() {
        let trace = t2();
        let f = parse_formula("D[<3,12](req, res)").unwrap();
        let table = build_table(&f);
        let outcome = eval_positions(&trace, &f, &table);
        let req = table.atom_id("req").unwrap();
        assert_eq!(outcome.holds.positions(req), &[1, 3, 5]);
        assert_eq!(outcome.holds.positions(f.root()), &[6]);
    }

    #[test]
    fn derived_modalities() {
        let trace = t1();
        // F/G against explicit expectations on T1.
        assert_eq!(holds_of(&trace, "F(0,5) b"), vec![1, 2]);
        assert_eq!(holds_of(&trace, "G(0,5) c"), vec![3, 4, 5]);
        assert_eq!(holds_of(&trace, "X(0,5) b"), vec![1, 2]);
        assert_eq!(holds_of(&trace, "Y(0,5) a"), vec![2, 3, 5]);
        assert_eq!(holds_of(&trace, "P(0,10) a"), vec![2, 3, 4, 5]);
        // H over an interval nothing reaches is vacuous everywhere.
        assert_eq!(holds_of(&trace, "H(50,60) a"), vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn eval_at_respects_guard() {
        let trace = t1();
        let f = parse_formula("C[>=1,5](a)").unwrap();
        assert!(!eval_at(&trace, &f, 1));
        assert!(eval_at(&trace, &f, 3));
    }
}
