//! Per-subformula holds-sets: for each formula id, the sorted positions at
//! which it holds. This is the unit of comparison between the pipeline and
//! the sequential reference evaluator.

use crate::formula::FormulaId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HoldsSet {
    sets: Vec<Vec<u32>>,
}

impl HoldsSet {
    pub fn new(num_formulae: usize) -> Self {
        HoldsSet {
            sets: vec![Vec::new(); num_formulae],
        }
    }

    /// Positions where `id` holds, ascending.
    pub fn positions(&self, id: FormulaId) -> &[u32] {
        &self.sets[id.index()]
    }

    pub fn set(&mut self, id: FormulaId, positions: Vec<u32>) {
        debug_assert!(positions.windows(2).all(|w| w[0] < w[1]));
        self.sets[id.index()] = positions;
    }

    pub fn contains(&self, id: FormulaId, position: u32) -> bool {
        self.sets[id.index()].binary_search(&position).is_ok()
    }

    /// Number of formula slots (not positions).
    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// `(id, positions)` pairs ascending by id.
    pub fn iter(&self) -> impl Iterator<Item = (FormulaId, &[u32])> {
        self.sets
            .iter()
            .enumerate()
            .map(|(i, v)| (FormulaId(i as u32), v.as_slice()))
    }
}
