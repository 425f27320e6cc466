//! Per-connective reduce functions.
//!
//! A reducer receives all tuples of one superformula for the current
//! iteration, sorted ascending by position. Dispatch compares the
//! superformula's height `h` with the iteration index `l`:
//!
//! * `h == l` — finalize: run the connective's algorithm and emit the
//!   positions where the superformula holds;
//! * `h > l`  — the tuples arrived early; re-emit them unchanged so they
//!   come around again. Each value is re-emitted by exactly one group (the
//!   lowest-id superformula that still awaits it), which keeps every tuple
//!   single-copied in flight;
//! * `h < l`  — the tuples are recirculating copies a taller group also
//!   received; this group is already finalized, drop them.
//!
//! The windowed reducers (until/since, the derived temporal modalities and
//! the aggregates) track only positions whose distance from the current
//! position still fits the window; the peak tracked count is reported per
//! group.

use std::collections::VecDeque;

use crate::formula::{Comparator, Connective, Formula, FormulaId, FormulaTable, Interval};
use crate::oracle::EvalWarning;
use crate::trace::TimestampMap;

use super::tuples::Tuple;

/// Instrumentation collected while reducing one group.
#[derive(Debug, Clone, Copy, Default)]
pub struct GroupStats {
    /// Peak number of simultaneously tracked positions.
    pub peak_tracked: u64,
    pub alternation_warning: bool,
}

/// Result of reducing one group.
#[derive(Debug)]
pub struct ReduceOutput {
    pub tuples: Vec<Tuple>,
    /// True when the group's superformula was finalized this iteration.
    pub finalized: bool,
    pub stats: GroupStats,
}

/// Reduces one group. `values` must be sorted ascending by position.
pub fn reduce_group(
    formula: &Formula,
    table: &FormulaTable,
    ts: &TimestampMap,
    superformula: FormulaId,
    values: &[Tuple],
    iteration: u32,
) -> ReduceOutput {
    debug_assert!(values.windows(2).all(|w| w[0].position <= w[1].position));
    let height = table.height(superformula);
    if height < iteration {
        // Stale copies; the group has already been finalized.
        return ReduceOutput {
            tuples: Vec::new(),
            finalized: false,
            stats: GroupStats::default(),
        };
    }
    if height > iteration {
        let tuples = values
            .iter()
            .filter(|v| carrier(table, v.formula, iteration) == Some(superformula))
            .copied()
            .collect();
        return ReduceOutput {
            tuples,
            finalized: false,
            stats: GroupStats::default(),
        };
    }

    let mut stats = GroupStats::default();
    let mut tuples = match formula.node(superformula) {
        Connective::Not(_) => reduce_negation(superformula, values, ts),
        Connective::And(children) => {
            reduce_conjunction(superformula, values, children.len())
        }
        Connective::Or(_) => reduce_disjunction(superformula, values),
        Connective::Until(interval, left, right) => {
            reduce_until(superformula, values, ts, *interval, *left, *right, &mut stats)
        }
        Connective::Since(interval, left, right) => {
            reduce_since(superformula, values, ts, *interval, *left, *right, &mut stats)
        }
        Connective::Eventually(interval, _) => {
            reduce_eventually(superformula, values, ts, *interval, &mut stats)
        }
        Connective::Always(interval, _) => {
            reduce_always(superformula, values, ts, *interval, &mut stats)
        }
        Connective::Next(interval, _) => reduce_next(superformula, values, ts, *interval),
        Connective::Once(interval, _) => {
            reduce_once(superformula, values, ts, *interval, &mut stats)
        }
        Connective::Historically(interval, _) => {
            reduce_historically(superformula, values, ts, *interval, &mut stats)
        }
        Connective::Prev(interval, _) => reduce_prev(superformula, values, ts, *interval),
        Connective::Count { cmp, bound, window, .. } => {
            reduce_count(superformula, values, ts, *cmp, *bound, *window, &mut stats)
        }
        Connective::MaxCount {
            cmp,
            bound,
            window,
            subwindow,
            ..
        } => reduce_max(
            superformula,
            values,
            ts,
            *cmp,
            *bound,
            *window,
            *subwindow,
            &mut stats,
        ),
        Connective::AvgDist {
            cmp,
            bound,
            window,
            left,
            right,
        } => reduce_dist(
            superformula,
            values,
            ts,
            *cmp,
            *bound,
            *window,
            *left,
            *right,
            &mut stats,
        ),
        Connective::AvgCount { .. } => {
            unreachable!("average count must be rewritten into count before running the pipeline")
        }
        Connective::Atom(_) | Connective::True | Connective::False => {
            unreachable!("height-0 formulae are produced by the input reader, not reducers")
        }
    };
    tuples.sort_unstable();
    tuples.dedup();
    ReduceOutput {
        tuples,
        finalized: true,
        stats,
    }
}

/// The unique group that re-emits an early tuple of `f` at iteration `l`:
/// the lowest-id superformula whose height exceeds `l`.
fn carrier(table: &FormulaTable, f: FormulaId, iteration: u32) -> Option<FormulaId> {
    table
        .sup(f)
        .iter()
        .copied()
        .find(|s| table.height(*s) > iteration)
}

/// Warnings detected while reducing (propagated into the run result).
pub fn stats_warning(superformula: FormulaId, stats: &GroupStats) -> Option<EvalWarning> {
    stats
        .alternation_warning
        .then_some(EvalWarning::DistAlternation {
            formula: superformula,
        })
}

fn emit(out: &mut Vec<Tuple>, formula: FormulaId, position: u32) {
    out.push(Tuple { formula, position });
}

/// Consecutive values sharing a position.
struct Batches<'a> {
    values: &'a [Tuple],
    idx: usize,
}

impl<'a> Batches<'a> {
    fn new(values: &'a [Tuple]) -> Self {
        Batches { values, idx: 0 }
    }
}

impl<'a> Iterator for Batches<'a> {
    type Item = (u32, &'a [Tuple]);

    fn next(&mut self) -> Option<Self::Item> {
        if self.idx >= self.values.len() {
            return None;
        }
        let start = self.idx;
        let pos = self.values[start].position;
        while self.idx < self.values.len() && self.values[self.idx].position == pos {
            self.idx += 1;
        }
        Some((pos, &self.values[start..self.idx]))
    }
}

fn track_peak(stats: &mut GroupStats, len: usize) {
    stats.peak_tracked = stats.peak_tracked.max(len as u64);
}

/// Negation: emit exactly the positions absent from the values.
pub fn reduce_negation(psi: FormulaId, values: &[Tuple], ts: &TimestampMap) -> Vec<Tuple> {
    let mut out = Vec::new();
    let mut expected = 1u32;
    for (pos, _) in Batches::new(values) {
        for j in expected..pos {
            emit(&mut out, psi, j);
        }
        expected = pos + 1;
    }
    for j in expected..=ts.size() {
        emit(&mut out, psi, j);
    }
    out
}

/// Conjunction: a position holds when every distinct child reported it.
pub fn reduce_conjunction(psi: FormulaId, values: &[Tuple], arity: usize) -> Vec<Tuple> {
    let mut out = Vec::new();
    let mut batch_children: Vec<FormulaId> = Vec::new();
    for (pos, batch) in Batches::new(values) {
        batch_children.clear();
        batch_children.extend(batch.iter().map(|t| t.formula));
        batch_children.sort_unstable();
        batch_children.dedup();
        if batch_children.len() == arity {
            emit(&mut out, psi, pos);
        }
    }
    out
}

/// Disjunction: any child occurrence makes the position hold.
pub fn reduce_disjunction(psi: FormulaId, values: &[Tuple]) -> Vec<Tuple> {
    let mut out = Vec::new();
    for (pos, _) in Batches::new(values) {
        emit(&mut out, psi, pos);
    }
    out
}

/// Until: scan ascending, tracking candidate start positions whose
/// continuation chain is still unbroken; a right-child occurrence at `j`
/// emits every tracked candidate whose distance to `j` lies in the
/// interval. A position gap or a missing left child breaks all chains; the
/// last position of a gap is itself a fresh candidate (nothing lies
/// strictly between it and the current position).
#[allow(clippy::too_many_arguments)]
pub fn reduce_until(
    psi: FormulaId,
    values: &[Tuple],
    ts: &TimestampMap,
    interval: Interval,
    left: FormulaId,
    right: FormulaId,
    stats: &mut GroupStats,
) -> Vec<Tuple> {
    let mut out = Vec::new();
    let mut cands: VecDeque<u32> = VecDeque::new();
    let mut prev = 0u32;
    for (j, batch) in Batches::new(values) {
        let tau_j = ts.get(j);
        if j > prev + 1 {
            cands.clear();
            cands.push_back(j - 1);
        }
        // Retire candidates the window has moved past.
        while let Some(&z) = cands.front() {
            if interval.beyond(tau_j - ts.get(z)) {
                cands.pop_front();
            } else {
                break;
            }
        }
        let has_left = batch.iter().any(|t| t.formula == left);
        let has_right = batch.iter().any(|t| t.formula == right);
        if has_right {
            // In-window candidates sit at the front (distance decreases
            // towards the back); emit and retire them.
            while let Some(&z) = cands.front() {
                if interval.contains(tau_j - ts.get(z)) {
                    emit(&mut out, psi, z);
                    cands.pop_front();
                } else {
                    break;
                }
            }
        }
        if !has_left {
            cands.clear();
        }
        cands.push_back(j);
        track_peak(stats, cands.len());
        prev = j;
    }
    out
}

/// Since: the time reversal of until, scanning descending.
#[allow(clippy::too_many_arguments)]
pub fn reduce_since(
    psi: FormulaId,
    values: &[Tuple],
    ts: &TimestampMap,
    interval: Interval,
    left: FormulaId,
    right: FormulaId,
    stats: &mut GroupStats,
) -> Vec<Tuple> {
    let mut out = Vec::new();
    let mut cands: VecDeque<u32> = VecDeque::new();
    let mut prev = ts.size() + 1;
    let mut batches: Vec<(u32, &[Tuple])> = Batches::new(values).collect();
    batches.reverse();
    for (j, batch) in batches {
        let tau_j = ts.get(j);
        if j + 1 < prev {
            cands.clear();
            cands.push_back(j + 1);
        }
        while let Some(&z) = cands.front() {
            if interval.beyond(ts.get(z) - tau_j) {
                cands.pop_front();
            } else {
                break;
            }
        }
        let has_left = batch.iter().any(|t| t.formula == left);
        let has_right = batch.iter().any(|t| t.formula == right);
        if has_right {
            while let Some(&z) = cands.front() {
                if interval.contains(ts.get(z) - tau_j) {
                    emit(&mut out, psi, z);
                    cands.pop_front();
                } else {
                    break;
                }
            }
        }
        if !has_left {
            cands.clear();
        }
        cands.push_back(j);
        track_peak(stats, cands.len());
        prev = j;
    }
    out
}

/// Iterator flag: does the child hold at the position currently scanned?
struct Presence<'a> {
    values: &'a [Tuple],
    idx: usize,
}

impl<'a> Presence<'a> {
    fn new(values: &'a [Tuple]) -> Self {
        Presence { values, idx: 0 }
    }

    fn at(&mut self, position: u32) -> bool {
        while self.idx < self.values.len() && self.values[self.idx].position < position {
            self.idx += 1;
        }
        self.idx < self.values.len() && self.values[self.idx].position == position
    }
}

/// Eventually: every position is a potential site; a child occurrence
/// emits all sites whose distance lies in the interval.
pub fn reduce_eventually(
    psi: FormulaId,
    values: &[Tuple],
    ts: &TimestampMap,
    interval: Interval,
    stats: &mut GroupStats,
) -> Vec<Tuple> {
    let mut out = Vec::new();
    let mut sites: VecDeque<u32> = VecDeque::new();
    let mut child = Presence::new(values);
    for j in 1..=ts.size() {
        let tau_j = ts.get(j);
        while let Some(&z) = sites.front() {
            if interval.beyond(tau_j - ts.get(z)) {
                sites.pop_front();
            } else {
                break;
            }
        }
        if child.at(j) {
            while let Some(&z) = sites.front() {
                if interval.contains(tau_j - ts.get(z)) {
                    emit(&mut out, psi, z);
                    sites.pop_front();
                } else {
                    break;
                }
            }
        }
        sites.push_back(j);
        track_peak(stats, sites.len());
    }
    out
}

/// Always: a site is emitted once its window closes without having seen a
/// position where the child fails; sites still open at the end of the
/// trace hold vacuously.
pub fn reduce_always(
    psi: FormulaId,
    values: &[Tuple],
    ts: &TimestampMap,
    interval: Interval,
    stats: &mut GroupStats,
) -> Vec<Tuple> {
    let mut out = Vec::new();
    let mut sites: VecDeque<u32> = VecDeque::new();
    let mut child = Presence::new(values);
    for j in 1..=ts.size() {
        let tau_j = ts.get(j);
        // Sealed sites can no longer be violated.
        while let Some(&z) = sites.front() {
            if interval.beyond(tau_j - ts.get(z)) {
                emit(&mut out, psi, z);
                sites.pop_front();
            } else {
                break;
            }
        }
        if !child.at(j) {
            while let Some(&z) = sites.front() {
                if interval.contains(tau_j - ts.get(z)) {
                    sites.pop_front();
                } else {
                    break;
                }
            }
        }
        sites.push_back(j);
        track_peak(stats, sites.len());
    }
    out.extend(sites.into_iter().map(|z| Tuple {
        formula: psi,
        position: z,
    }));
    out
}

/// Next: the child at `j` makes `j - 1` hold when the step fits the
/// interval.
pub fn reduce_next(
    psi: FormulaId,
    values: &[Tuple],
    ts: &TimestampMap,
    interval: Interval,
) -> Vec<Tuple> {
    let mut out = Vec::new();
    for (j, _) in Batches::new(values) {
        if j >= 2 && interval.contains(ts.get(j) - ts.get(j - 1)) {
            emit(&mut out, psi, j - 1);
        }
    }
    out
}

/// Once: the past mirror of eventually, scanning descending.
pub fn reduce_once(
    psi: FormulaId,
    values: &[Tuple],
    ts: &TimestampMap,
    interval: Interval,
    stats: &mut GroupStats,
) -> Vec<Tuple> {
    let mut out = Vec::new();
    let mut sites: VecDeque<u32> = VecDeque::new();
    let positions: Vec<u32> = Batches::new(values).map(|(p, _)| p).collect();
    let mut next_value = positions.len();
    for j in (1..=ts.size()).rev() {
        let tau_j = ts.get(j);
        while let Some(&z) = sites.front() {
            if interval.beyond(ts.get(z) - tau_j) {
                sites.pop_front();
            } else {
                break;
            }
        }
        let holds = next_value > 0 && positions[next_value - 1] == j;
        if holds {
            next_value -= 1;
            while let Some(&z) = sites.front() {
                if interval.contains(ts.get(z) - tau_j) {
                    emit(&mut out, psi, z);
                    sites.pop_front();
                } else {
                    break;
                }
            }
        }
        sites.push_back(j);
        track_peak(stats, sites.len());
    }
    out
}

/// Historically: the past mirror of always.
pub fn reduce_historically(
    psi: FormulaId,
    values: &[Tuple],
    ts: &TimestampMap,
    interval: Interval,
    stats: &mut GroupStats,
) -> Vec<Tuple> {
    let mut out = Vec::new();
    let mut sites: VecDeque<u32> = VecDeque::new();
    let positions: Vec<u32> = Batches::new(values).map(|(p, _)| p).collect();
    let mut next_value = positions.len();
    for j in (1..=ts.size()).rev() {
        let tau_j = ts.get(j);
        while let Some(&z) = sites.front() {
            if interval.beyond(ts.get(z) - tau_j) {
                emit(&mut out, psi, z);
                sites.pop_front();
            } else {
                break;
            }
        }
        let holds = next_value > 0 && positions[next_value - 1] == j;
        if holds {
            next_value -= 1;
        } else {
            while let Some(&z) = sites.front() {
                if interval.contains(ts.get(z) - tau_j) {
                    sites.pop_front();
                } else {
                    break;
                }
            }
        }
        sites.push_back(j);
        track_peak(stats, sites.len());
    }
    out.extend(sites.into_iter().map(|z| Tuple {
        formula: psi,
        position: z,
    }));
    out
}

/// Previous: the child at `j` makes `j + 1` hold when the step fits.
pub fn reduce_prev(
    psi: FormulaId,
    values: &[Tuple],
    ts: &TimestampMap,
    interval: Interval,
) -> Vec<Tuple> {
    let mut out = Vec::new();
    for (j, _) in Batches::new(values) {
        if j < ts.size() && interval.contains(ts.get(j + 1) - ts.get(j)) {
            emit(&mut out, psi, j + 1);
        }
    }
    out
}

/// Count: every position (tuple or gap) is evaluated against the number of
/// child occurrences whose timestamps lie in the trailing window.
pub fn reduce_count(
    psi: FormulaId,
    values: &[Tuple],
    ts: &TimestampMap,
    cmp: Comparator,
    bound: u64,
    window: u64,
    stats: &mut GroupStats,
) -> Vec<Tuple> {
    let mut out = Vec::new();
    let mut tracked: VecDeque<u32> = VecDeque::new();
    let mut child = Presence::new(values);
    for j in 1..=ts.size() {
        let tau_j = ts.get(j);
        if child.at(j) {
            tracked.push_back(j);
        }
        while let Some(&s) = tracked.front() {
            if tau_j - ts.get(s) >= window {
                tracked.pop_front();
            } else {
                break;
            }
        }
        track_peak(stats, tracked.len());
        if tau_j >= window && cmp.test(tracked.len() as u64, bound) {
            emit(&mut out, psi, j);
        }
    }
    out
}

/// Max count: like count, but the tracked occurrences are bucketed into
/// right-aligned subwindows and the largest bucket is compared.
#[allow(clippy::too_many_arguments)]
pub fn reduce_max(
    psi: FormulaId,
    values: &[Tuple],
    ts: &TimestampMap,
    cmp: Comparator,
    bound: u64,
    window: u64,
    subwindow: u64,
    stats: &mut GroupStats,
) -> Vec<Tuple> {
    let mut out = Vec::new();
    let mut tracked: VecDeque<u32> = VecDeque::new();
    let mut child = Presence::new(values);
    let slices = (window / subwindow) as usize;
    let mut buckets = vec![0u64; slices + 1];
    for j in 1..=ts.size() {
        let tau_j = ts.get(j);
        if child.at(j) {
            tracked.push_back(j);
        }
        while let Some(&s) = tracked.front() {
            if tau_j - ts.get(s) >= window {
                tracked.pop_front();
            } else {
                break;
            }
        }
        track_peak(stats, tracked.len());
        if tau_j < window {
            continue;
        }
        buckets.iter_mut().for_each(|b| *b = 0);
        for &s in &tracked {
            let m = ((tau_j - ts.get(s)) / subwindow) as usize;
            buckets[m] += 1;
        }
        let max = buckets.iter().copied().max().expect("nonempty buckets");
        if cmp.test(max, bound) {
            emit(&mut out, psi, j);
        }
    }
    out
}

/// Average distance: tracks left occurrences awaiting their first later
/// right occurrence plus the completed pairs still inside the window,
/// keeping the pair count and the cumulative distance incremental.
#[allow(clippy::too_many_arguments)]
pub fn reduce_dist(
    psi: FormulaId,
    values: &[Tuple],
    ts: &TimestampMap,
    cmp: Comparator,
    bound: u64,
    window: u64,
    left: FormulaId,
    right: FormulaId,
    stats: &mut GroupStats,
) -> Vec<Tuple> {
    let mut out = Vec::new();
    // Left occurrences not yet matched, ascending.
    let mut unmatched: VecDeque<u32> = VecDeque::new();
    // Completed pairs (left position, right timestamp), ascending by left.
    let mut matched: VecDeque<(u32, u64)> = VecDeque::new();
    let mut dist = 0u64;
    let mut batches = Batches::new(values).peekable();
    for j in 1..=ts.size() {
        let tau_j = ts.get(j);
        // Window eviction happens against the current position before its
        // own arrivals are considered.
        while let Some(&(s, tau_t)) = matched.front() {
            if tau_j - ts.get(s) >= window {
                dist -= tau_t - ts.get(s);
                matched.pop_front();
            } else {
                break;
            }
        }
        while let Some(&s) = unmatched.front() {
            if tau_j - ts.get(s) >= window {
                unmatched.pop_front();
            } else {
                break;
            }
        }
        let batch: &[Tuple] = match batches.peek() {
            Some(&(pos, batch)) if pos == j => {
                batches.next();
                batch
            }
            _ => &[],
        };
        let has_left = batch.iter().any(|t| t.formula == left);
        let has_right = batch.iter().any(|t| t.formula == right);
        if has_left && has_right {
            stats.alternation_warning = true;
        }
        if has_right {
            if unmatched.len() > 1 {
                stats.alternation_warning = true;
            }
            while let Some(s) = unmatched.pop_front() {
                dist += tau_j - ts.get(s);
                matched.push_back((s, tau_j));
            }
        }
        if has_left {
            unmatched.push_back(j);
        }
        track_peak(stats, matched.len() + unmatched.len());
        let pairs = matched.len() as u64;
        if tau_j >= window && pairs > 0 && cmp.test(dist, bound * pairs) {
            emit(&mut out, psi, j);
        }
    }
    out
}
