//! Deterministic synthetic score caches for tests and benchmarks.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::scoring::{build_score_cache, Dataset, ScoreCache, ScoringConfig};

/// A seeded cache with `families_per_node` random candidate parent sets per
/// node (plus the empty set), sizes up to `max_in_degree`, scores negative
/// reals. Same arguments, same cache.
pub fn random_cache(n: usize, max_in_degree: usize, families_per_node: usize, seed: u64) -> ScoreCache {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EEDCACE);
    let names = (0..n).map(|i| format!("v{i}")).collect();
    let families = (0..n as u32)
        .map(|i| {
            let mut fams: Vec<(Vec<u32>, f64)> = vec![(Vec::new(), -(rng.random_range(1..60) as f64))];
            let mut tries = 0;
            while fams.len() < families_per_node + 1 && tries < families_per_node * 20 {
                tries += 1;
                let size = rng.random_range(1..=max_in_degree.min(n - 1));
                let mut set: Vec<u32> = Vec::with_capacity(size);
                while set.len() < size {
                    let cand = rng.random_range(0..n as u32);
                    if cand != i && !set.contains(&cand) {
                        set.push(cand);
                    }
                }
                set.sort_unstable();
                if fams.iter().any(|(f, _)| f == &set) {
                    continue;
                }
                let score = -(rng.random_range(1..60) as f64);
                fams.push((set, score));
            }
            fams
        })
        .collect();
    ScoreCache::new(names, families)
}

/// A cache holding every parent set up to `max_in_degree` with random integer
/// scores; exact methods need full enumeration semantics.
pub fn full_random_cache(n: usize, max_in_degree: usize, seed: u64) -> ScoreCache {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xF011CACE);
    let names = (0..n).map(|i| format!("v{i}")).collect();
    let cfg = crate::scoring::ScoringConfig {
        ess: 1.0,
        max_in_degree,
    };
    let families = (0..n as u32)
        .map(|i| {
            crate::scoring::enumerate_parent_sets(i, n, &cfg)
                .into_iter()
                .map(|ps| {
                    let score = -(rng.random_range(1..100) as f64);
                    (ps, score)
                })
                .collect()
        })
        .collect();
    ScoreCache::new(names, families)
}

/// A full BDeu cache over data sampled from a random sparse ground-truth
/// network: binary variables, strong conditional dependencies, every parent
/// set up to `max_in_degree` scored. This mirrors how real benchmark caches
/// look (most sets scored, informative differences), which matters when
/// comparing the two sampler versions.
pub fn synthetic_bdeu_cache(
    n: usize,
    rows: usize,
    max_in_degree: usize,
    seed: u64,
) -> ScoreCache {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xDA7ACACE);
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.shuffle(&mut rng);

    // parents drawn from recently ordered nodes so structure stays local
    let mut parents: Vec<Vec<u32>> = vec![Vec::new(); n];
    for pos in 1..n {
        let v = order[pos] as usize;
        let want = match rng.random_range(0..10u32) {
            0 => 0,
            1..=5 => 1,
            _ => 2,
        };
        let window = pos.min(8);
        let mut pool: Vec<u32> = order[pos - window..pos].to_vec();
        pool.shuffle(&mut rng);
        parents[v] = pool.into_iter().take(want.min(pos)).collect();
        parents[v].sort_unstable();
    }

    // bimodal conditional probabilities make the dependencies informative
    let cpts: Vec<Vec<f64>> = (0..n)
        .map(|v| {
            (0..1usize << parents[v].len())
                .map(|_| {
                    if rng.random::<bool>() {
                        rng.random_range(0.05..0.25)
                    } else {
                        rng.random_range(0.75..0.95)
                    }
                })
                .collect()
        })
        .collect();

    let mut columns = vec![vec![0u32; rows]; n];
    for r in 0..rows {
        for &v in &order {
            let v = v as usize;
            let mut idx = 0usize;
            for &p in &parents[v] {
                idx = (idx << 1) | columns[p as usize][r] as usize;
            }
            columns[v][r] = (rng.random::<f64>() < cpts[v][idx]) as u32;
        }
    }
    // guard against degenerate constant columns
    for col in columns.iter_mut() {
        col[0] = 0;
        col[1] = 1;
    }
    let names = (0..n).map(|i| format!("v{i}")).collect();
    let data = Dataset::from_columns(names, columns);
    build_score_cache(
        &data,
        &ScoringConfig {
            ess: 1.0,
            max_in_degree,
        },
    )
}
