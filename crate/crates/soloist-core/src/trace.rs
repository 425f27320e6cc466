//! Timestamped event traces: validation, the line-based file format, the
//! shared position-to-timestamp map and seeded random generation.
//!
//! A trace is a finite sequence of entries `(position, timestamp, atoms)`
//! with positions exactly `1..=H`, strictly increasing integer timestamps
//! (seconds, granularity one) and a nonempty atom set per entry.
//!
//! File format, one entry per line:
//!
//! ```text
//! <position>,<timestamp>,<atom>(;<atom>)*
//! ```
//!
//! Lines starting with `#` are ignored. Atom names match
//! `[A-Za-z_][A-Za-z0-9_]*`.

use std::io::{BufRead, BufReader, Read, Write};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// One time instant of the trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub position: u32,
    pub timestamp: u64,
    /// Sorted, deduplicated, nonempty.
    pub atoms: Vec<String>,
}

/// A validated trace; positions are exactly `1..=len()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    entries: Vec<TraceEntry>,
}

/// Read-only position-to-timestamp association, total on `1..=size()`.
#[derive(Debug, Clone)]
pub struct TimestampMap {
    taus: Vec<u64>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: expected position {expected}, found {found} (positions must be 1,2,...)")]
    NonConsecutivePosition {
        line: usize,
        expected: u32,
        found: u32,
    },
    #[error("line {line}: timestamp {found} does not increase strictly over {prev}")]
    NonMonotoneTimestamp { line: usize, prev: u64, found: u64 },
    #[error("line {line}: entry has no atoms")]
    EmptyAtoms { line: usize },
    #[error("line {line}: invalid atom name {name:?}")]
    BadAtomName { line: usize, name: String },
    #[error("trace is empty")]
    Empty,
    #[error("timestamps must be at least 1, found {found}")]
    ZeroTimestamp { found: u64 },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn valid_atom(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Trace {
    /// Validates entry order, timestamps and atom sets.
    pub fn from_entries(mut entries: Vec<TraceEntry>) -> Result<Self, TraceError> {
        if entries.is_empty() {
            return Err(TraceError::Empty);
        }
        let mut prev_tau = 0u64;
        for (k, entry) in entries.iter_mut().enumerate() {
            let line = k + 1;
            let expected = (k + 1) as u32;
            if entry.position != expected {
                return Err(TraceError::NonConsecutivePosition {
                    line,
                    expected,
                    found: entry.position,
                });
            }
            if entry.timestamp == 0 {
                return Err(TraceError::ZeroTimestamp {
                    found: entry.timestamp,
                });
            }
            if entry.timestamp <= prev_tau {
                return Err(TraceError::NonMonotoneTimestamp {
                    line,
                    prev: prev_tau,
                    found: entry.timestamp,
                });
            }
            prev_tau = entry.timestamp;
            entry.atoms.sort_unstable();
            entry.atoms.dedup();
            if entry.atoms.is_empty() {
                return Err(TraceError::EmptyAtoms { line });
            }
            for a in &entry.atoms {
                if !valid_atom(a) {
                    return Err(TraceError::BadAtomName {
                        line,
                        name: a.clone(),
                    });
                }
            }
        }
        Ok(Trace { entries })
    }

    pub fn entries(&self) -> &[TraceEntry] {
        &self.entries
    }

    /// Trace length `H`.
    pub fn len(&self) -> u32 {
        self.entries.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, position: u32) -> &TraceEntry {
        &self.entries[(position - 1) as usize]
    }

    pub fn timestamp(&self, position: u32) -> u64 {
        self.entry(position).timestamp
    }

    /// Serializes to the line-based file format.
    pub fn write_to(&self, mut out: impl Write) -> std::io::Result<()> {
        for entry in &self.entries {
            writeln!(
                out,
                "{},{},{}",
                entry.position,
                entry.timestamp,
                entry.atoms.join(";")
            )?;
        }
        Ok(())
    }
}

impl TimestampMap {
    pub fn get(&self, position: u32) -> u64 {
        self.taus[(position - 1) as usize]
    }

    /// Number of positions (`H`).
    pub fn size(&self) -> u32 {
        self.taus.len() as u32
    }
}

/// Projects the trace onto its position-to-timestamp map.
pub fn timestamp_map(trace: &Trace) -> TimestampMap {
    TimestampMap {
        taus: trace.entries().iter().map(|e| e.timestamp).collect(),
    }
}

/// Parses and validates a trace from the line-based format.
pub fn load_trace(source: impl Read) -> Result<Trace, TraceError> {
    let reader = BufReader::new(source);
    let mut entries = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let mut fields = text.splitn(3, ',');
        let position = fields
            .next()
            .and_then(|s| s.trim().parse::<u32>().ok())
            .ok_or_else(|| TraceError::Malformed {
                line: line_no,
                message: "expected `<position>,<timestamp>,<atoms>`".to_owned(),
            })?;
        let timestamp = fields
            .next()
            .and_then(|s| s.trim().parse::<u64>().ok())
            .ok_or_else(|| TraceError::Malformed {
                line: line_no,
                message: "expected a numeric timestamp".to_owned(),
            })?;
        let atom_field = fields.next().ok_or_else(|| TraceError::Malformed {
            line: line_no,
            message: "missing atom list".to_owned(),
        })?;
        if atom_field.ends_with(';') {
            return Err(TraceError::Malformed {
                line: line_no,
                message: "trailing `;` in atom list".to_owned(),
            });
        }
        let atoms: Vec<String> = atom_field
            .split(';')
            .map(|a| a.trim().to_owned())
            .collect();
        if atoms.iter().any(|a| a.is_empty()) {
            return Err(TraceError::EmptyAtoms { line: line_no });
        }
        entries.push(TraceEntry {
            position,
            timestamp,
            atoms,
        });
    }
    // Re-map validation line numbers onto entry indices (comments were
    // skipped, so entry k corresponds to the k-th data line).
    Trace::from_entries(entries)
}

/// Generates a pseudo-random trace, deterministically for a fixed seed.
///
/// Each entry carries between 1 and `max_atoms_per_instant` distinct atoms
/// drawn uniformly from `a0..a{atom_universe-1}`; consecutive timestamps
/// differ by a uniform gap in `1..=max_gap`.
pub fn generate_random_trace(
    seed: u64,
    len: u32,
    atom_universe: u32,
    max_atoms_per_instant: u32,
    max_gap: u64,
) -> Result<Trace, TraceError> {
    if len == 0 {
        return Err(TraceError::InvalidParam("trace length must be at least 1".into()));
    }
    if atom_universe == 0 {
        return Err(TraceError::InvalidParam("atom universe must be at least 1".into()));
    }
    if max_atoms_per_instant == 0 || max_atoms_per_instant > atom_universe {
        return Err(TraceError::InvalidParam(format!(
            "atoms per instant must lie in 1..={}",
            atom_universe
        )));
    }
    if max_gap == 0 {
        return Err(TraceError::InvalidParam("max gap must be at least 1".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(len as usize);
    let mut tau = 0u64;
    for position in 1..=len {
        tau += rng.random_range(1..=max_gap);
        let k = rng.random_range(1..=max_atoms_per_instant) as usize;
        let mut atoms: Vec<String> = sample(&mut rng, atom_universe as usize, k)
            .into_iter()
            .map(|idx| format!("a{}", idx))
            .collect();
        atoms.sort_unstable();
        entries.push(TraceEntry {
            position,
            timestamp: tau,
            atoms,
        });
    }
    Trace::from_entries(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_simple_trace() {
        let t = load_trace("1,1,a\n2,3,a;b\n".as_bytes()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.entry(1).atoms, vec!["a"]);
        assert_eq!(t.entry(2).atoms, vec!["a", "b"]);
        assert_eq!(t.entry(2).timestamp, 3);
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let t = load_trace("# header\n\n1,1,a\n# middle\n2,2,b\n".as_bytes()).unwrap();
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn rejects_non_monotone_timestamps() {
        let err = load_trace("1,5,a\n2,5,b\n".as_bytes()).unwrap_err();
        assert!(matches!(err, TraceError::NonMonotoneTimestamp { .. }));
    }

    #[test]
    fn rejects_positions_not_starting_at_one() {
        let err = load_trace("2,1,a\n".as_bytes()).unwrap_err();
        assert!(matches!(
            err,
            TraceError::NonConsecutivePosition {
                expected: 1,
                found: 2,
                ..
            }
        ));
    }

    #[test]
    fn rejects_gapped_positions() {
        let err = load_trace("1,1,a\n3,2,b\n".as_bytes()).unwrap_err();
        assert!(matches!(err, TraceError::NonConsecutivePosition { .. }));
    }

    #[test]
    fn rejects_empty_trace_and_empty_atoms() {
        assert!(matches!(load_trace("".as_bytes()), Err(TraceError::Empty)));
        assert!(matches!(
            load_trace("1,1,\n".as_bytes()),
            Err(TraceError::EmptyAtoms { .. })
        ));
        assert!(matches!(
            load_trace("1,1,a;\n".as_bytes()),
            Err(TraceError::Malformed { .. })
        ));
    }

    #[test]
    fn rejects_bad_atom_names() {
        assert!(matches!(
            load_trace("1,1,9lives\n".as_bytes()),
            Err(TraceError::BadAtomName { .. })
        ));
    }

    #[test]
    fn timestamp_map_projects_trace() {
        let t = load_trace("1,1,a\n2,3,a;b\n3,6,b\n4,10,a;c\n5,12,c\n".as_bytes()).unwrap();
        let ts = timestamp_map(&t);
        assert_eq!(ts.size(), 5);
        for (pos, tau) in [(1, 1), (2, 3), (3, 6), (4, 10), (5, 12)] {
            assert_eq!(ts.get(pos), tau);
        }
    }

    #[test]
    fn save_load_round_trip() {
        let t = generate_random_trace(11, 50, 6, 3, 9).unwrap();
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        let back = load_trace(buf.as_slice()).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_random_trace(7, 30, 5, 2, 4).unwrap();
        let b = generate_random_trace(7, 30, 5, 2, 4).unwrap();
        assert_eq!(a, b);
        let c = generate_random_trace(8, 30, 5, 2, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn generated_timestamps_strictly_increase() {
        let t = generate_random_trace(3, 200, 10, 4, 7).unwrap();
        for w in t.entries().windows(2) {
            assert!(w[0].timestamp < w[1].timestamp);
        }
        assert!(t.entries().iter().all(|e| !e.atoms.is_empty()));
        assert!(t.entries().iter().all(|e| e.atoms.len() <= 4));
    }

    #[test]
    fn generation_rejects_bad_params() {
        assert!(generate_random_trace(1, 0, 5, 2, 4).is_err());
        assert!(generate_random_trace(1, 10, 5, 0, 4).is_err());
        assert!(generate_random_trace(1, 10, 5, 6, 4).is_err());
        assert!(generate_random_trace(1, 10, 5, 2, 0).is_err());
    }

    #[test]
    fn single_entry_trace() {
        let t = load_trace("1,1,a\n".as_bytes()).unwrap();
        assert_eq!(timestamp_map(&t).size(), 1);
    }
}
