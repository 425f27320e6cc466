//! The subformula lattice: direct subformulae, superformulae, heights and
//! the atom leaves, for every subformula reachable from the root.
//!
//! Heights drive the pipeline: height 0 for atoms and the constants,
//! otherwise one more than the tallest direct subformula. The number of
//! pipeline iterations equals the root's height.

use std::collections::HashMap;

use super::{Connective, Formula, FormulaId};

/// Lattice data for one formula. Immutable once built; shared read-only by
/// concurrent workers.
#[derive(Debug, Clone)]
pub struct FormulaTable {
    root: FormulaId,
    reachable: Vec<FormulaId>,
    height: Vec<u32>,
    sub_d: Vec<Vec<FormulaId>>,
    sup: Vec<Vec<FormulaId>>,
    by_height: Vec<Vec<FormulaId>>,
    atoms: HashMap<String, FormulaId>,
    true_id: Option<FormulaId>,
    false_id: Option<FormulaId>,
}

impl FormulaTable {
    pub fn root(&self) -> FormulaId {
        self.root
    }

    /// Height of the root formula; the number of evaluation iterations.
    pub fn root_height(&self) -> u32 {
        self.height[self.root.index()]
    }

    pub fn height(&self, id: FormulaId) -> u32 {
        self.height[id.index()]
    }

    /// Ids reachable from the root (the root itself included), ascending.
    pub fn reachable(&self) -> &[FormulaId] {
        &self.reachable
    }

    /// Number of proper subformulae (the root is not its own subformula).
    pub fn subformula_count(&self) -> usize {
        self.reachable.len() - 1
    }

    /// Distinct direct subformulae, ascending by id.
    pub fn sub_d(&self, id: FormulaId) -> &[FormulaId] {
        &self.sub_d[id.index()]
    }

    /// Superformulae of `id` within the root formula, ascending by id.
    pub fn sup(&self, id: FormulaId) -> &[FormulaId] {
        &self.sup[id.index()]
    }

    /// All reachable subformulae of the given height, ascending by id.
    pub fn by_height(&self, h: u32) -> &[FormulaId] {
        self.by_height
            .get(h as usize)
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    /// Named atom leaves (the `sub_a` set).
    pub fn atoms(&self) -> &HashMap<String, FormulaId> {
        &self.atoms
    }

    pub fn atom_id(&self, name: &str) -> Option<FormulaId> {
        self.atoms.get(name).copied()
    }

    /// Id of the `true` constant, when the formula contains it.
    pub fn true_id(&self) -> Option<FormulaId> {
        self.true_id
    }

    pub fn false_id(&self) -> Option<FormulaId> {
        self.false_id
    }
}

/// Builds the lattice for everything reachable from the formula root.
pub fn build_table(f: &Formula) -> FormulaTable {
    let n = f.node_count();
    let mut seen = vec![false; n];
    let mut order = Vec::new(); // post-order: children before parents
    let mut stack = vec![(f.root(), false)];
    while let Some((id, expanded)) = stack.pop() {
        if expanded {
            order.push(id);
            continue;
        }
        if seen[id.index()] {
            continue;
        }
        seen[id.index()] = true;
        stack.push((id, true));
        for child in f.node(id).children() {
            if !seen[child.index()] {
                stack.push((child, false));
            }
        }
    }

    let mut height = vec![0u32; n];
    let mut sub_d: Vec<Vec<FormulaId>> = vec![Vec::new(); n];
    let mut sup: Vec<Vec<FormulaId>> = vec![Vec::new(); n];
    let mut atoms = HashMap::new();
    let mut true_id = None;
    let mut false_id = None;

    for &id in &order {
        let mut children = f.node(id).children();
        children.sort_unstable();
        children.dedup();
        if !children.is_empty() {
            height[id.index()] = children
                .iter()
                .map(|c| height[c.index()])
                .max()
                .expect("nonempty")
                + 1;
        }
        sub_d[id.index()] = children;
        match f.node(id) {
            Connective::Atom(name) => {
                atoms.insert(name.clone(), id);
            }
            Connective::True => true_id = Some(id),
            Connective::False => false_id = Some(id),
            _ => {}
        }
    }

    let mut reachable: Vec<FormulaId> = order.clone();
    reachable.sort_unstable();
    reachable.dedup();

    for &id in &reachable {
        for &child in &sub_d[id.index()] {
            sup[child.index()].push(id);
        }
    }
    for v in &mut sup {
        v.sort_unstable();
        v.dedup();
    }

    let max_h = height[f.root().index()] as usize;
    let mut by_height = vec![Vec::new(); max_h + 1];
    for &id in &reachable {
        by_height[height[id.index()] as usize].push(id);
    }

    FormulaTable {
        root: f.root(),
        reachable,
        height,
        sub_d,
        sup,
        by_height,
        atoms,
        true_id,
        false_id,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;

    #[test]
    fn gamma_lattice_matches_worked_example() {
        // gamma = C[>=3,40](a & b) U(30,100) !c
        let f = parse_formula("C[>=3,40](a & b) U(30,100) !c").unwrap();
        let t = build_table(&f);

        assert_eq!(t.subformula_count(), 6);
        let mut atom_names: Vec<_> = t.atoms().keys().cloned().collect();
        atom_names.sort();
        assert_eq!(atom_names, vec!["a", "b", "c"]);
        assert_eq!(t.sub_d(t.root()).len(), 2);
        assert_eq!(t.root_height(), 3);

        let a = t.atom_id("a").unwrap();
        let b = t.atom_id("b").unwrap();
        let c = t.atom_id("c").unwrap();
        assert_eq!(t.height(a), 0);

        // sup(a) = sup(b) = {a & b}
        assert_eq!(t.sup(a), t.sup(b));
        assert_eq!(t.sup(a).len(), 1);
        let and_ab = t.sup(a)[0];
        assert_eq!(t.height(and_ab), 1);

        // The count node sits above the conjunction, the negation above c.
        let count = t.sup(and_ab)[0];
        assert_eq!(t.height(count), 2);
        let not_c = t.sup(c)[0];
        assert_eq!(t.height(not_c), 1);
        assert_eq!(t.sup(count), &[t.root()]);
        assert_eq!(t.sup(not_c), &[t.root()]);
        assert_eq!(t.sup(t.root()), &[]);
    }

    #[test]
    fn single_atom_has_height_zero() {
        let f = parse_formula("a").unwrap();
        let t = build_table(&f);
        assert_eq!(t.root_height(), 0);
        assert_eq!(t.sub_d(t.root()), &[]);
        assert_eq!(t.subformula_count(), 0);
    }

    #[test]
    fn shared_subformula_counted_once() {
        let f = parse_formula("(a0 & (a1 & a2)) U(50,200) ((a1 & a2) | a1)").unwrap();
        let t = build_table(&f);
        assert_eq!(t.root_height(), 3);
        // a0, a1, a2, a1&a2, a0&(a1&a2), (a1&a2)|a1
        assert_eq!(t.subformula_count(), 6);
        let a1 = t.atom_id("a1").unwrap();
        // a1 feeds both the inner conjunction and the disjunction.
        assert_eq!(t.sup(a1).len(), 2);
    }

    #[test]
    fn sup_and_sub_d_are_converse() {
        let f = parse_formula("G(0,9) (C[>=1,4](a | b) -> P[0,3) (b & a))").unwrap();
        let t = build_table(&f);
        for &id in t.reachable() {
            for &child in t.sub_d(id) {
                assert!(t.sup(child).contains(&id));
            }
            for &parent in t.sup(id) {
                assert!(t.sub_d(parent).contains(&id));
            }
            let h = t.height(id);
            if t.sub_d(id).is_empty() {
                assert_eq!(h, 0);
            } else {
                let max_child = t.sub_d(id).iter().map(|c| t.height(*c)).max().unwrap();
                assert_eq!(h, max_child + 1);
            }
        }
    }

    #[test]
    fn height_of_until_both_children_same_atom() {
        let f = parse_formula("a U(0,5) a").unwrap();
        let t = build_table(&f);
        assert_eq!(t.root_height(), 1);
        assert_eq!(t.sub_d(t.root()).len(), 1);
    }
}
