//! The iterative map-shuffle-reduce driver.
//!
//! One iteration per level of the subformula lattice: iteration `l`
//! finalizes every subformula of height `l`. Iteration 1 is fed by the
//! input reader; later iterations consume the previous reducers' output.
//! Workers only affect scheduling — mapper chunks are concatenated in
//! input order and reducer groups are merged in id order, so the result is
//! identical for any worker count.

use std::time::{Duration, Instant};

use crate::formula::{Connective, Formula, FormulaId, FormulaTable};
use crate::holds::HoldsSet;
use crate::oracle::EvalWarning;
use crate::trace::{timestamp_map, TimestampMap, Trace};

use super::reduce::{reduce_group, stats_warning, ReduceOutput};
use super::tuples::{input_reader, map_lift, partition_slot, shuffle, Group, IntermediateTuple, Tuple};

/// Tuple counts and wall time for one iteration.
#[derive(Debug, Clone)]
pub struct IterationMetrics {
    pub iteration: u32,
    pub mapper_in: u64,
    pub intermediate: u64,
    pub reducer_out: u64,
    pub wall: Duration,
}

/// Engine configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Number of concurrent workers for the map and reduce phases.
    pub workers: usize,
    /// Collect every intermediate tuple, per iteration, in shuffle order.
    pub collect_intermediate: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            workers: 1,
            collect_intermediate: false,
        }
    }
}

/// Full result of one pipeline run.
#[derive(Debug)]
pub struct RunResult {
    /// Whether the root formula holds at position 1.
    pub verdict: bool,
    /// Positions for every subformula, root included.
    pub holds: HoldsSet,
    pub iterations: Vec<IterationMetrics>,
    /// Sum of mapper input tuples over all iterations.
    pub total_tuples: u64,
    /// Peak tracked-position counts of the windowed reducers, by formula.
    pub peak_tracked: Vec<(FormulaId, u64)>,
    pub warnings: Vec<EvalWarning>,
    /// Total wall time of the run.
    pub wall: Duration,
    /// Per-iteration intermediate tuples when requested.
    pub intermediate_dump: Option<Vec<Vec<IntermediateTuple>>>,
}

/// Runs the pipeline with the given worker count.
pub fn run_check(trace: &Trace, formula: &Formula, workers: usize) -> RunResult {
    run_check_with(
        trace,
        formula,
        &RunConfig {
            workers,
            ..RunConfig::default()
        },
    )
}

/// Runs the pipeline with full configuration.
pub fn run_check_with(trace: &Trace, formula: &Formula, config: &RunConfig) -> RunResult {
    let table = crate::formula::build_table(formula);
    assert!(
        table
            .reachable()
            .iter()
            .all(|&id| !matches!(formula.node(id), Connective::AvgCount { .. })),
        "average count must be rewritten into count before running the pipeline \
         (see expand_avg_count)"
    );
    let workers = config.workers.max(1);
    let start = Instant::now();
    let ts = timestamp_map(trace);
    let mut holds = HoldsSet::new(formula.node_count());
    let mut warnings = Vec::new();
    let mut peak_tracked = Vec::new();
    let mut metrics = Vec::new();
    let mut dump = config.collect_intermediate.then(Vec::new);

    // Iteration 1 is seeded by the input reader; the reader may process
    // trace fragments concurrently, in fragment order.
    let mut stream = read_phase(trace, &table, workers);
    record_leaf_holds(&mut holds, &stream);

    let height = table.root_height();
    for iteration in 1..=height {
        let t0 = Instant::now();
        let mapper_in = stream.len() as u64;

        let intermediate = map_phase(&stream, &table, workers);
        debug_assert_eq!(
            intermediate.len(),
            stream
                .iter()
                .map(|t| table.sup(t.formula).len())
                .sum::<usize>(),
            "each lift must emit exactly |sup(formula)| tuples"
        );
        let intermediate_count = intermediate.len() as u64;
        if let Some(dump) = dump.as_mut() {
            let mut sorted = intermediate.clone();
            sorted.sort_by_key(|t| (t.key.superformula, t.key.position, t.value.formula));
            dump.push(sorted);
        }

        let mut groups = shuffle(intermediate);
        instantiate_empty_groups(&mut groups, &table, iteration);

        let outputs = reduce_phase(formula, &table, &ts, groups, iteration, workers);

        let mut reducer_out = 0u64;
        let mut next_stream =
            Vec::with_capacity(outputs.iter().map(|(_, o)| o.tuples.len()).sum());
        for (superformula, output) in outputs {
            reducer_out += output.tuples.len() as u64;
            if output.finalized {
                holds.set(
                    superformula,
                    output.tuples.iter().map(|t| t.position).collect(),
                );
                if output.stats.peak_tracked > 0 {
                    peak_tracked.push((superformula, output.stats.peak_tracked));
                }
                if let Some(w) = stats_warning(superformula, &output.stats) {
                    warnings.push(w);
                }
            }
            next_stream.extend(output.tuples);
        }
        stream = next_stream;

        metrics.push(IterationMetrics {
            iteration,
            mapper_in,
            intermediate: intermediate_count,
            reducer_out,
            wall: t0.elapsed(),
        });
    }

    let total_tuples = metrics.iter().map(|m| m.mapper_in).sum();
    RunResult {
        verdict: holds.contains(table.root(), 1),
        holds,
        iterations: metrics,
        total_tuples,
        peak_tracked,
        warnings,
        wall: start.elapsed(),
        intermediate_dump: dump,
    }
}


fn read_phase(trace: &Trace, table: &FormulaTable, workers: usize) -> Vec<Tuple> {
    let entries = trace.entries();
    if workers <= 1 || entries.len() < 2 * workers {
        return input_reader(entries, table).0;
    }
    let chunk = entries.len().div_ceil(workers);
    let fragments: Vec<&[crate::trace::TraceEntry]> = entries.chunks(chunk).collect();
    let mut outputs: Vec<Vec<Tuple>> = Vec::with_capacity(fragments.len());
    std::thread::scope(|scope| {
        let handles: Vec<_> = fragments
            .into_iter()
            .map(|fragment| scope.spawn(move || input_reader(fragment, table).0))
            .collect();
        for handle in handles {
            outputs.push(handle.join().expect("reader worker panicked"));
        }
    });
    outputs.concat()
}

fn map_phase(stream: &[Tuple], table: &FormulaTable, workers: usize) -> Vec<IntermediateTuple> {
    if workers <= 1 || stream.len() < 2 * workers {
        return stream
            .iter()
            .flat_map(|&t| map_lift(t, table))
            .collect();
    }
    let chunk = stream.len().div_ceil(workers);
    let mut outputs: Vec<Vec<IntermediateTuple>> = Vec::with_capacity(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = stream
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .flat_map(|&t| map_lift(t, table))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for handle in handles {
            outputs.push(handle.join().expect("map worker panicked"));
        }
    });
    outputs.concat()
}

/// Reducers of the current height run even when no tuples reached them:
/// negation emits everywhere on empty input, and the guarded aggregates
/// can hold with an empty window.
fn instantiate_empty_groups(groups: &mut Vec<Group>, table: &FormulaTable, iteration: u32) {
    let mut missing: Vec<Group> = table
        .by_height(iteration)
        .iter()
        .filter(|id| groups.binary_search_by_key(id, |g| &g.superformula).is_err())
        .map(|&superformula| Group {
            superformula,
            values: Vec::new(),
        })
        .collect();
    if missing.is_empty() {
        return;
    }
    groups.append(&mut missing);
    groups.sort_by_key(|g| g.superformula);
}

fn reduce_phase(
    formula: &Formula,
    table: &FormulaTable,
    ts: &TimestampMap,
    groups: Vec<Group>,
    iteration: u32,
    workers: usize,
) -> Vec<(FormulaId, ReduceOutput)> {
    if groups.is_empty() {
        return Vec::new();
    }
    let slots = groups.len().min(workers).max(1);
    if slots <= 1 {
        return groups
            .into_iter()
            .map(|g| {
                let out = reduce_group(formula, table, ts, g.superformula, &g.values, iteration);
                (g.superformula, out)
            })
            .collect();
    }
    // Partition whole groups across slots by key hash; merge in id order so
    // the output does not depend on the slot count.
    let mut per_slot: Vec<Vec<Group>> = (0..slots).map(|_| Vec::new()).collect();
    for g in groups {
        per_slot[partition_slot(g.superformula, slots)].push(g);
    }
    let mut outputs: Vec<Vec<(FormulaId, ReduceOutput)>> = Vec::with_capacity(slots);
    std::thread::scope(|scope| {
        let handles: Vec<_> = per_slot
            .into_iter()
            .map(|slot_groups| {
                scope.spawn(move || {
                    slot_groups
                        .into_iter()
                        .map(|g| {
                            let out = reduce_group(
                                formula,
                                table,
                                ts,
                                g.superformula,
                                &g.values,
                                iteration,
                            );
                            (g.superformula, out)
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for handle in handles {
            outputs.push(handle.join().expect("reduce worker panicked"));
        }
    });
    let mut merged: Vec<(FormulaId, ReduceOutput)> = outputs.into_iter().flatten().collect();
    merged.sort_by_key(|(id, _)| *id);
    merged
}

fn record_leaf_holds(holds: &mut HoldsSet, stream: &[Tuple]) {
    let mut per_leaf: Vec<(FormulaId, Vec<u32>)> = Vec::new();
    for tuple in stream {
        match per_leaf.iter_mut().find(|(id, _)| *id == tuple.formula) {
            Some((_, positions)) => positions.push(tuple.position),
            None => per_leaf.push((tuple.formula, vec![tuple.position])),
        }
    }
    for (id, mut positions) in per_leaf {
        positions.sort_unstable();
        positions.dedup();
        holds.set(id, positions);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;
    use crate::trace::load_trace;

    fn t1() -> Trace {
        load_trace("1,1,a\n2,3,a;b\n3,6,b\n4,10,a;c\n5,12,c\n".as_bytes()).unwrap()
    }

    #[test]
    fn negation_run_matches_oracle_example() {
        let trace = t1();
        let f = parse_formula("!c").unwrap();
        let result = run_check(&trace, &f, 1);
        assert!(result.verdict);
        assert_eq!(result.holds.positions(f.root()), &[1, 2, 3]);
        assert_eq!(result.iterations.len(), 1);
    }

    #[test]
    fn iteration_count_equals_height() {
        let trace = crate::trace::generate_random_trace(5, 100, 6, 3, 5).unwrap();
        for (text, expected) in [
            ("C[<10,50](a0)", 1),
            ("(a0 & (a1 & a2)) U(50,200) ((a1 & a2) | a1)", 3),
            ("!a0", 1),
            ("a0", 0),
        ] {
            let f = parse_formula(text).unwrap();
            let result = run_check(&trace, &f, 1);
            assert_eq!(result.iterations.len(), expected, "formula {}", text);
        }
    }

    #[test]
    fn height_zero_root_uses_reader_output() {
        let trace = t1();
        let f = parse_formula("a").unwrap();
        let result = run_check(&trace, &f, 1);
        assert!(result.verdict);
        assert_eq!(result.holds.positions(f.root()), &[1, 2, 4]);
        assert_eq!(result.total_tuples, 0);
    }

    #[test]
    fn engine_matches_oracle_on_worked_examples() {
        let trace = t1();
        for text in [
            "!c",
            "a & b",
            "a | b",
            "a U(1,5) b",
            "b S(1,5) a",
            "C[>=1,5](a)",
            "F(0,5) b",
            "G(0,5) c",
            "X(0,5) b",
            "Y(0,5) a",
            "P(0,10) a",
            "H(50,60) a",
            "C[>=3,40](a & b) U(30,100) !c",
            "!(a & b) U[2,9] (c | b)",
        ] {
            let f = parse_formula(text).unwrap();
            let table = crate::formula::build_table(&f);
            let oracle = crate::oracle::eval_positions(&trace, &f, &table);
            let engine = run_check(&trace, &f, 1);
            for &id in table.reachable() {
                assert_eq!(
                    engine.holds.positions(id),
                    oracle.holds.positions(id),
                    "formula {} subformula {}",
                    text,
                    f.render(id)
                );
            }
        }
    }

    #[test]
    fn total_tuples_sums_mapper_inputs() {
        let trace = t1();
        let f = parse_formula("C[>=3,40](a & b) U(30,100) !c").unwrap();
        let result = run_check(&trace, &f, 1);
        let sum: u64 = result.iterations.iter().map(|m| m.mapper_in).sum();
        assert_eq!(result.total_tuples, sum);
        assert!(result.iterations.iter().all(|m| m.reducer_out > 0));
    }

    #[test]
    fn worker_counts_produce_identical_holds() {
        let trace = crate::trace::generate_random_trace(42, 500, 8, 3, 10).unwrap();
        let f = parse_formula("(C[>=1,30](a0) & !a1) U[0,200) (a2 | D[<5,50](a3, a4))").unwrap();
        let base = run_check(&trace, &f, 1);
        for workers in [2, 8] {
            let other = run_check(&trace, &f, workers);
            assert_eq!(base.holds, other.holds, "workers={}", workers);
            assert_eq!(base.verdict, other.verdict);
            let counts =
                |r: &RunResult| -> Vec<(u64, u64, u64)> {
                    r.iterations
                        .iter()
                        .map(|m| (m.mapper_in, m.intermediate, m.reducer_out))
                        .collect()
                };
            assert_eq!(counts(&base), counts(&other));
        }
    }

    #[test]
    fn early_tuples_survive_until_their_iteration() {
        // a0's conjunction partner has height 2, so a0 tuples must pass
        // through iterations 1 and 2 untouched before being consumed.
        let trace = crate::trace::generate_random_trace(7, 60, 4, 2, 5).unwrap();
        let f = parse_formula("a0 & ((a1 & a2) U(0,40) a3)").unwrap();
        let table = crate::formula::build_table(&f);
        let oracle = crate::oracle::eval_positions(&trace, &f, &table);
        let engine = run_check(&trace, &f, 1);
        for &id in table.reachable() {
            assert_eq!(engine.holds.positions(id), oracle.holds.positions(id));
        }
        assert_eq!(engine.iterations.len(), 3);
    }

    #[test]
    fn duplicate_superformula_routes_stay_single_copy() {
        // a0 feeds two height-3 conjunctions; the carrier rule must keep a
        // single copy of each early tuple so both finalize correctly.
        let trace = crate::trace::generate_random_trace(9, 80, 5, 3, 4).unwrap();
        let f =
            parse_formula("(a0 & ((a1 & a2) U(0,30) a3)) | (a0 & ((a1 & a2) U(0,30) a4))").unwrap();
        let table = crate::formula::build_table(&f);
        let oracle = crate::oracle::eval_positions(&trace, &f, &table);
        let engine = run_check(&trace, &f, 1);
        for &id in table.reachable() {
            assert_eq!(
                engine.holds.positions(id),
                oracle.holds.positions(id),
                "subformula {}",
                f.render(id)
            );
        }
    }

    #[test]
    fn intermediate_dump_collects_sorted_tuples() {
        let trace = t1();
        let f = parse_formula("a & b").unwrap();
        let result = run_check_with(
            &trace,
            &f,
            &RunConfig {
                workers: 1,
                collect_intermediate: true,
            },
        );
        let dump = result.intermediate_dump.unwrap();
        assert_eq!(dump.len(), 1);
        // a holds at {1,2,4}, b at {2,3}: five lifted tuples.
        assert_eq!(dump[0].len(), 5);
        assert!(dump[0]
            .windows(2)
            .all(|w| (w[0].key.superformula, w[0].key.position)
                <= (w[1].key.superformula, w[1].key.position)));
    }

    #[test]
    fn verdict_false_when_root_fails_at_position_one() {
        let trace = t1();
        let f = parse_formula("C[>=1,5](a)").unwrap();
        let result = run_check(&trace, &f, 1);
        assert!(!result.verdict);
        assert_eq!(result.holds.positions(f.root()), &[3, 4, 5]);
    }
}
