//! Seeded random formula generation for differential test harnesses.

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

use crate::formula::{Comparator, Formula, FormulaBuilder, FormulaId, Interval};

/// Knobs for [`random_formula`].
#[derive(Debug, Clone)]
pub struct FormulaGenConfig {
    /// Upper bound on the generated formula's height.
    pub max_height: u32,
    /// Atom pool, e.g. `a0..a7`.
    pub atoms: u32,
    /// Cap on interval bounds and aggregate windows.
    pub max_window: u64,
    /// Cap on aggregate count bounds.
    pub max_bound: u64,
    /// Allow unbounded interval upper ends.
    pub allow_unbounded: bool,
}

impl Default for FormulaGenConfig {
    fn default() -> Self {
        FormulaGenConfig {
            max_height: 4,
            atoms: 8,
            max_window: 60,
            max_bound: 5,
            allow_unbounded: false,
        }
    }
}

/// Generates a random formula of height at most `config.max_height`,
/// deterministically for a fixed seed. All connectives are drawn,
/// including the derived modalities and average count.
pub fn random_formula(seed: u64, config: &FormulaGenConfig) -> Formula {
    let mut rng = SmallRng::seed_from_u64(seed);
    let mut b = FormulaBuilder::new();
    let root = gen(&mut rng, &mut b, config, config.max_height);
    b.build(root)
}

fn leaf(rng: &mut SmallRng, b: &mut FormulaBuilder, config: &FormulaGenConfig) -> FormulaId {
    match rng.random_range(0..10u32) {
        0 => b.tt(),
        1 => b.ff(),
        _ => {
            let idx = rng.random_range(0..config.atoms);
            b.atom(&format!("a{}", idx)).expect("generated name is valid")
        }
    }
}

fn interval(rng: &mut SmallRng, config: &FormulaGenConfig) -> Interval {
    let lo = rng.random_range(0..config.max_window);
    let unbounded = config.allow_unbounded && rng.random_ratio(1, 10);
    if unbounded {
        return Interval::new(lo, None, rng.random(), false).expect("nonempty");
    }
    // Point intervals [x,x] are valid; everything else needs lo < hi.
    if rng.random_ratio(1, 20) {
        return Interval::new(lo, Some(lo), true, true).expect("nonempty");
    }
    let hi = rng.random_range(lo + 1..=config.max_window);
    Interval::new(hi.min(lo), Some(hi), rng.random(), rng.random()).expect("nonempty")
}

fn gen(
    rng: &mut SmallRng,
    b: &mut FormulaBuilder,
    config: &FormulaGenConfig,
    budget: u32,
) -> FormulaId {
    if budget == 0 {
        return leaf(rng, b, config);
    }
    let below = budget - 1;
    match rng.random_range(0..13u32) {
        0 => {
            let c = gen(rng, b, config, below);
            b.not(c)
        }
        1 | 2 => {
            let arity = rng.random_range(2..=3usize);
            let children: Vec<_> = (0..arity).map(|_| gen(rng, b, config, below)).collect();
            b.and(children).expect("nonempty children")
        }
        3 | 4 => {
            let arity = rng.random_range(2..=3usize);
            let children: Vec<_> = (0..arity).map(|_| gen(rng, b, config, below)).collect();
            b.or(children).expect("nonempty children")
        }
        5 => {
            let i = interval(rng, config);
            let l = gen(rng, b, config, below);
            let r = gen(rng, b, config, below);
            b.until(i, l, r)
        }
        6 => {
            let i = interval(rng, config);
            let l = gen(rng, b, config, below);
            let r = gen(rng, b, config, below);
            b.since(i, l, r)
        }
        7 => {
            let i = interval(rng, config);
            let c = gen(rng, b, config, below);
            match rng.random_range(0..3u32) {
                0 => b.eventually(i, c),
                1 => b.always(i, c),
                _ => b.next(i, c),
            }
        }
        8 => {
            let i = interval(rng, config);
            let c = gen(rng, b, config, below);
            match rng.random_range(0..3u32) {
                0 => b.once(i, c),
                1 => b.historically(i, c),
                _ => b.prev(i, c),
            }
        }
        9 | 10 => {
            let cmp = comparator(rng);
            let bound = rng.random_range(0..=config.max_bound);
            let window = rng.random_range(1..=config.max_window);
            let c = gen(rng, b, config, below);
            b.count(cmp, bound, window, c)
        }
        11 => {
            let cmp = comparator(rng);
            let bound = rng.random_range(0..=config.max_bound);
            let window = rng.random_range(1..=config.max_window);
            let subwindow = rng.random_range(1..=window);
            let c = gen(rng, b, config, below);
            if rng.random() {
                b.max_count(cmp, bound, window, subwindow, c)
                    .expect("window >= subwindow")
            } else {
                b.avg_count(cmp, bound, window, subwindow, c)
                    .expect("window >= subwindow")
            }
        }
        _ => {
            let cmp = comparator(rng);
            let bound = rng.random_range(0..=config.max_bound);
            let window = rng.random_range(1..=config.max_window);
            let l = gen(rng, b, config, below);
            let r = gen(rng, b, config, below);
            b.avg_dist(cmp, bound, window, l, r)
        }
    }
}

fn comparator(rng: &mut SmallRng) -> Comparator {
    match rng.random_range(0..5u32) {
        0 => Comparator::Lt,
        1 => Comparator::Le,
        2 => Comparator::Ge,
        3 => Comparator::Gt,
        _ => Comparator::Eq,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::build_table;

    #[test]
    fn generation_is_deterministic() {
        let config = FormulaGenConfig::default();
        let a = random_formula(123, &config);
        let b = random_formula(123, &config);
        assert_eq!(a.to_string(), b.to_string());
    }

    #[test]
    fn height_stays_within_budget() {
        let config = FormulaGenConfig {
            max_height: 3,
            ..FormulaGenConfig::default()
        };
        for seed in 0..200 {
            let f = random_formula(seed, &config);
            let t = build_table(&f);
            assert!(t.root_height() <= 3, "seed {} formula {}", seed, f);
        }
    }

    #[test]
    fn generated_formulae_reparse() {
        let config = FormulaGenConfig::default();
        for seed in 0..100 {
            let f = random_formula(seed, &config);
            let text = f.to_string();
            let back = crate::formula::parse_formula(&text)
                .unwrap_or_else(|e| panic!("seed {}: {} — {}", seed, text, e));
            assert_eq!(back.to_string(), text, "seed {}", seed);
        }
    }
}
