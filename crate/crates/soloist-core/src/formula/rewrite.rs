//! Rewrites between the derived temporal modalities and the until/since
//! core.
//!
//! * `F_I p  == true U_I p`
//! * `G_I p  == !(true U_I !p)`
//! * `X_I p  == false U_I p`
//! * `P_I p  == true S_I p`
//! * `H_I p  == !(true S_I !p)`
//! * `Y_I p  == false S_I p`
//! * `A[cmp n, K, h](p) == C[cmp n*floor(K/h), floor(K/h)*h](p)`
//!
//! The average-count rewrite is the only one the evaluators rely on (there
//! is no dedicated average-count reducer); the others exist so the derived
//! modalities can be checked differentially against their defining
//! expansions.

use std::collections::HashMap;

use super::{Connective, Formula, FormulaBuilder, FormulaId};

fn rebuild(
    f: &Formula,
    id: FormulaId,
    full: bool,
    b: &mut FormulaBuilder,
    memo: &mut HashMap<FormulaId, FormulaId>,
) -> FormulaId {
    if let Some(&done) = memo.get(&id) {
        return done;
    }
    let out = match f.node(id) {
        Connective::Atom(name) => b.atom(name).expect("atom name was validated"),
        Connective::True => b.tt(),
        Connective::False => b.ff(),
        Connective::Not(c) => {
            let c = rebuild(f, *c, full, b, memo);
            b.not(c)
        }
        Connective::And(cs) => {
            let cs: Vec<_> = cs.iter().map(|c| rebuild(f, *c, full, b, memo)).collect();
            b.and(cs).expect("arity preserved")
        }
        Connective::Or(cs) => {
            let cs: Vec<_> = cs.iter().map(|c| rebuild(f, *c, full, b, memo)).collect();
            b.or(cs).expect("arity preserved")
        }
        Connective::Until(i, l, r) => {
            let l = rebuild(f, *l, full, b, memo);
            let r = rebuild(f, *r, full, b, memo);
            b.until(*i, l, r)
        }
        Connective::Since(i, l, r) => {
            let l = rebuild(f, *l, full, b, memo);
            let r = rebuild(f, *r, full, b, memo);
            b.since(*i, l, r)
        }
        Connective::Eventually(i, c) => {
            let c = rebuild(f, *c, full, b, memo);
            if full {
                let tt = b.tt();
                b.until(*i, tt, c)
            } else {
                b.eventually(*i, c)
            }
        }
        Connective::Always(i, c) => {
            let c = rebuild(f, *c, full, b, memo);
            if full {
                let tt = b.tt();
                let nc = b.not(c);
                let until = b.until(*i, tt, nc);
                b.not(until)
            } else {
                b.always(*i, c)
            }
        }
        Connective::Next(i, c) => {
            let c = rebuild(f, *c, full, b, memo);
            if full {
                let ff = b.ff();
                b.until(*i, ff, c)
            } else {
                b.next(*i, c)
            }
        }
        Connective::Once(i, c) => {
            let c = rebuild(f, *c, full, b, memo);
            if full {
                let tt = b.tt();
                b.since(*i, tt, c)
            } else {
                b.once(*i, c)
            }
        }
        Connective::Historically(i, c) => {
            let c = rebuild(f, *c, full, b, memo);
            if full {
                let tt = b.tt();
                let nc = b.not(c);
                let since = b.since(*i, tt, nc);
                b.not(since)
            } else {
                b.historically(*i, c)
            }
        }
        Connective::Prev(i, c) => {
            let c = rebuild(f, *c, full, b, memo);
            if full {
                let ff = b.ff();
                b.since(*i, ff, c)
            } else {
                b.prev(*i, c)
            }
        }
        Connective::Count {
            cmp,
            bound,
            window,
            child,
        } => {
            let child = rebuild(f, *child, full, b, memo);
            b.count(*cmp, *bound, *window, child)
        }
        Connective::AvgCount {
            cmp,
            bound,
            window,
            subwindow,
            child,
        } => {
            let child = rebuild(f, *child, full, b, memo);
            let slices = window / subwindow;
            b.count(*cmp, bound * slices, slices * subwindow, child)
        }
        Connective::MaxCount {
            cmp,
            bound,
            window,
            subwindow,
            child,
        } => {
            let child = rebuild(f, *child, full, b, memo);
            b.max_count(*cmp, *bound, *window, *subwindow, child)
                .expect("bounds preserved")
        }
        Connective::AvgDist {
            cmp,
            bound,
            window,
            left,
            right,
        } => {
            let left = rebuild(f, *left, full, b, memo);
            let right = rebuild(f, *right, full, b, memo);
            b.avg_dist(*cmp, *bound, *window, left, right)
        }
    };
    memo.insert(id, out);
    out
}

fn rewrite(f: &Formula, full: bool) -> Formula {
    let mut b = FormulaBuilder::new();
    let mut memo = HashMap::new();
    let root = rebuild(f, f.root(), full, &mut b, &mut memo);
    b.build(root)
}

/// Expands every derived modality (F/G/X/P/H/Y and average count) into the
/// until/since core.
pub fn expand_derived(f: &Formula) -> Formula {
    rewrite(f, true)
}

/// Expands only average count into plain count, leaving the other derived
/// modalities in place. This is the normalization the pipeline requires.
pub fn expand_avg_count(f: &Formula) -> Formula {
    rewrite(f, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;

    #[test]
    fn eventually_becomes_until_from_true() {
        let f = parse_formula("F(0,5) b").unwrap();
        let g = expand_derived(&f);
        assert_eq!(g.to_string(), "true U(0,5) b");
    }

    #[test]
    fn avg_count_becomes_count() {
        // floor(10/3) = 3 slices: window 9, bound 2*3 = 6.
        let f = parse_formula("A[<2,10,3](a)").unwrap();
        assert_eq!(expand_derived(&f).to_string(), "C[<6,9](a)");
        assert_eq!(expand_avg_count(&f).to_string(), "C[<6,9](a)");
    }

    #[test]
    fn core_connectives_are_fixpoints() {
        for text in [
            "C[>=3,40](a & b) U(30,100) !c",
            "a S[1,7) (b | c)",
            "D[=4,30](p, q)",
            "M[>0,12,5](x)",
        ] {
            let f = parse_formula(text).unwrap();
            assert_eq!(expand_derived(&f).to_string(), f.to_string());
        }
    }

    #[test]
    fn always_becomes_negated_until() {
        let f = parse_formula("G(2,8] p").unwrap();
        assert_eq!(expand_derived(&f).to_string(), "!(true U(2,8] !p)");
    }

    #[test]
    fn past_duals_use_since() {
        let f = parse_formula("P(0,5) p & H(0,5) q & Y[1,3] r").unwrap();
        let g = expand_derived(&f);
        let text = g.to_string();
        assert!(text.contains("true S(0,5) p"));
        assert!(text.contains("!(true S(0,5) !q)"));
        assert!(text.contains("false S[1,3] r"));
    }

    #[test]
    fn avg_count_only_expansion_keeps_always() {
        let f = parse_formula("G(0,5) A[>1,6,2](a)").unwrap();
        assert_eq!(expand_avg_count(&f).to_string(), "G(0,5) C[>3,6](a)");
    }
}
