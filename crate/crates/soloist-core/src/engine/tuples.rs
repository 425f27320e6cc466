//! Tuple types and the read/map/shuffle phases of the pipeline.
//!
//! The input reader turns trace entries into `(formula, position)` tuples
//! for the atom leaves. Mappers lift each tuple to every superformula of
//! its formula, keyed by a composite `(superformula, position)` key. The
//! shuffle groups intermediate tuples by the first key component only and
//! sorts each group by the second, so every reducer sees the tuples of
//! exactly one superformula in ascending position order.

use crate::formula::{FormulaId, FormulaTable};
use crate::trace::TraceEntry;

/// A `(formula, position)` record: the formula holds at the position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tuple {
    pub formula: FormulaId,
    pub position: u32,
}

/// Two-part shuffle key: grouping uses only `superformula`; `position`
/// orders tuples within a group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CompositeKey {
    pub superformula: FormulaId,
    pub position: u32,
}

/// A mapper output: the value's formula is a direct subformula of the
/// key's superformula, at the same position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntermediateTuple {
    pub key: CompositeKey,
    pub value: Tuple,
}

/// Emits one tuple per atom occurrence the formula can observe, for one
/// contiguous trace fragment. Atoms outside the formula's leaf set are
/// dropped; the `true` constant, when present in the formula, holds at
/// every position. Also returns the fragment's timestamp contributions.
pub fn input_reader(
    fragment: &[TraceEntry],
    table: &FormulaTable,
) -> (Vec<Tuple>, Vec<(u32, u64)>) {
    let mut tuples = Vec::new();
    let mut stamps = Vec::with_capacity(fragment.len());
    for entry in fragment {
        stamps.push((entry.position, entry.timestamp));
        if let Some(tt) = table.true_id() {
            tuples.push(Tuple {
                formula: tt,
                position: entry.position,
            });
        }
        for atom in &entry.atoms {
            if let Some(id) = table.atom_id(atom) {
                tuples.push(Tuple {
                    formula: id,
                    position: entry.position,
                });
            }
        }
    }
    (tuples, stamps)
}

/// Lifts one tuple to all superformulae of its formula: exactly
/// `|sup(formula)|` outputs. Tuples of the root formula have no
/// superformula and produce nothing; the driver routes them to the final
/// output instead.
pub fn map_lift(tuple: Tuple, table: &FormulaTable) -> impl Iterator<Item = IntermediateTuple> + '_ {
    table.sup(tuple.formula).iter().map(move |&sup| IntermediateTuple {
        key: CompositeKey {
            superformula: sup,
            position: tuple.position,
        },
        value: tuple,
    })
}

/// One reducer group: all values share the superformula and arrive sorted
/// ascending by position (stable for equal composite keys).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub superformula: FormulaId,
    pub values: Vec<Tuple>,
}

/// Groups intermediate tuples by superformula with secondary sort by
/// position. Group order is ascending by superformula id.
pub fn shuffle(mut intermediate: Vec<IntermediateTuple>) -> Vec<Group> {
    intermediate.sort_by_key(|t| (t.key.superformula, t.key.position));
    let mut groups: Vec<Group> = Vec::new();
    for tuple in intermediate {
        debug_assert_eq!(tuple.key.position, tuple.value.position);
        match groups.last_mut() {
            Some(g) if g.superformula == tuple.key.superformula => g.values.push(tuple.value),
            _ => groups.push(Group {
                superformula: tuple.key.superformula,
                values: vec![tuple.value],
            }),
        }
    }
    groups
}

/// Reducer slot for a group: stable hash of the superformula id modulo the
/// slot count, so a group is never split across workers.
pub fn partition_slot(id: FormulaId, slots: usize) -> usize {
    debug_assert!(slots > 0);
    (splitmix64(id.0 as u64) % slots as u64) as usize
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{build_table, parse_formula};
    use crate::trace::load_trace;

    #[test]
    fn reader_filters_foreign_atoms() {
        let trace = load_trace("1,1,a\n2,3,a;b\n3,6,b\n4,10,a;c\n5,12,c\n".as_bytes()).unwrap();
        let f = parse_formula("a U(1,5) b").unwrap();
        let table = build_table(&f);
        let (tuples, stamps) = input_reader(trace.entries(), &table);
        let a = table.atom_id("a").unwrap();
        let b = table.atom_id("b").unwrap();
        // Entry 2 contributes both atoms; entries 4 and 5 drop `c`.
        let expected = vec![
            Tuple { formula: a, position: 1 },
            Tuple { formula: a, position: 2 },
            Tuple { formula: b, position: 2 },
            Tuple { formula: b, position: 3 },
            Tuple { formula: a, position: 4 },
        ];
        assert_eq!(tuples, expected);
        assert_eq!(stamps, vec![(1, 1), (2, 3), (3, 6), (4, 10), (5, 12)]);
    }

    #[test]
    fn reader_emits_true_everywhere() {
        let trace = load_trace("1,1,a\n2,3,b\n3,6,b\n".as_bytes()).unwrap();
        let f = parse_formula("true U(0,9) b").unwrap();
        let table = build_table(&f);
        let (tuples, _) = input_reader(trace.entries(), &table);
        let tt = table.true_id().unwrap();
        let true_positions: Vec<u32> = tuples
            .iter()
            .filter(|t| t.formula == tt)
            .map(|t| t.position)
            .collect();
        assert_eq!(true_positions, vec![1, 2, 3]);
    }

    #[test]
    fn lift_emits_one_tuple_per_superformula() {
        let f = parse_formula("(a & b) | !a").unwrap();
        let table = build_table(&f);
        let a = table.atom_id("a").unwrap();
        let lifted: Vec<_> = map_lift(Tuple { formula: a, position: 5 }, &table).collect();
        assert_eq!(lifted.len(), table.sup(a).len());
        assert_eq!(lifted.len(), 2);
        for t in &lifted {
            assert_eq!(t.key.position, 5);
            assert_eq!(t.value, Tuple { formula: a, position: 5 });
            assert!(table.sub_d(t.key.superformula).contains(&a));
        }
        // The root lifts to nothing.
        let root_lift: Vec<_> = map_lift(Tuple { formula: f.root(), position: 1 }, &table).collect();
        assert!(root_lift.is_empty());
    }

    #[test]
    fn shuffle_groups_and_sorts() {
        let psi = FormulaId(7);
        let chi = FormulaId(3);
        let mk = |sup: FormulaId, pos: u32, child: u32| IntermediateTuple {
            key: CompositeKey { superformula: sup, position: pos },
            value: Tuple { formula: FormulaId(child), position: pos },
        };
        let groups = shuffle(vec![mk(psi, 9, 0), mk(psi, 2, 1), mk(chi, 4, 0)]);
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].superformula, chi);
        assert_eq!(groups[1].superformula, psi);
        let positions: Vec<u32> = groups[1].values.iter().map(|v| v.position).collect();
        assert_eq!(positions, vec![2, 9]);
    }

    #[test]
    fn shuffle_is_stable_for_equal_keys() {
        let psi = FormulaId(7);
        let mk = |pos: u32, child: u32| IntermediateTuple {
            key: CompositeKey { superformula: psi, position: pos },
            value: Tuple { formula: FormulaId(child), position: pos },
        };
        let groups = shuffle(vec![mk(4, 2), mk(4, 1), mk(1, 9)]);
        assert_eq!(groups.len(), 1);
        let children: Vec<u32> = groups[0].values.iter().map(|v| v.formula.0).collect();
        // Position 1 first, then position 4 in arrival order.
        assert_eq!(children, vec![9, 2, 1]);
    }

    #[test]
    fn partition_keeps_groups_whole() {
        let slots = 4;
        for id in 0..100u32 {
            let s = partition_slot(FormulaId(id), slots);
            assert!(s < slots);
            assert_eq!(s, partition_slot(FormulaId(id), slots));
        }
    }
}
