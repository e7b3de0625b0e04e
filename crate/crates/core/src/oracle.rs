//! Brute-force ground truth for tiny instances: the optimal bounded-treewidth
//! structure by exhaustive enumeration of family combinations. Deliberately
//! plain; everything else is tested against it.

use std::collections::HashMap;

use thiserror::Error;

use crate::graph::{moral_graph, treewidth_exact, Dag};
use crate::ktree::KTree;
use crate::scoring::ScoreCache;

pub const ORACLE_MAX_NODES: usize = 6;
pub const ORACLE_MAX_COMBINATIONS: u128 = 100_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("instance too large for brute force: {0}")]
    InstanceTooLarge(String),
}

#[derive(Clone, Debug)]
pub struct OracleResult {
    pub dag: Dag,
    pub total_score: f64,
    /// Complete acyclic family combinations examined.
    pub enumerated_count: u64,
}

fn guard(cache: &ScoreCache) -> Result<(), OracleError> {
    let n = cache.n();
    if n > ORACLE_MAX_NODES {
        return Err(OracleError::InstanceTooLarge(format!("n = {n}")));
    }
    let combos: u128 = (0..n as u32)
        .map(|i| cache.families(i).len() as u128)
        .product();
    if combos > ORACLE_MAX_COMBINATIONS {
        return Err(OracleError::InstanceTooLarge(format!(
            "{combos} family combinations"
        )));
    }
    Ok(())
}

/// Exact argmax over all family combinations that are acyclic and whose
/// moral graph has treewidth at most `w`. Ties keep the first combination in
/// enumeration order (families as listed per node).
pub fn brute_force_learn(cache: &ScoreCache, w: usize) -> Result<OracleResult, OracleError> {
    guard(cache)?;
    let mut tw_cache: HashMap<Vec<(u32, u32)>, usize> = HashMap::new();
    brute_force_filtered(cache, |dag| {
        let moral = moral_graph(dag);
        let edges = moral.edges();
        let tw = *tw_cache
            .entry(edges)
            .or_insert_with(|| treewidth_exact(&moral).expect("oracle instances are tiny").0);
        tw <= w
    })
}

/// Exact argmax restricted to DAGs whose moral graph is a subgraph of the
/// k-tree; equivalently every family plus its node is a clique of it.
pub fn brute_force_learn_in_ktree(
    cache: &ScoreCache,
    t: &KTree,
) -> Result<OracleResult, OracleError> {
    guard(cache)?;
    brute_force_filtered(cache, |dag| {
        let moral = moral_graph(dag);
        moral.edges().iter().all(|&(u, v)| t.graph.has_edge(u, v))
    })
}

fn brute_force_filtered(
    cache: &ScoreCache,
    mut admit: impl FnMut(&Dag) -> bool,
) -> Result<OracleResult, OracleError> {
    let n = cache.n();
    let mut best: Option<(f64, Dag)> = None;
    let mut examined = 0u64;
    let mut choice = vec![0usize; n];

    // depth-first over nodes with incremental cycle pruning
    fn rec(
        i: usize,
        cache: &ScoreCache,
        choice: &mut Vec<usize>,
        best: &mut Option<(f64, Dag)>,
        examined: &mut u64,
        admit: &mut impl FnMut(&Dag) -> bool,
    ) {
        let n = cache.n();
        if i == n {
            let parents: Vec<Vec<u32>> = (0..n)
                .map(|v| cache.families(v as u32)[choice[v]].0.clone())
                .collect();
            let Ok(dag) = Dag::new(n, parents) else {
                return;
            };
            *examined += 1;
            if !admit(&dag) {
                return;
            }
            let score: f64 = (0..n)
                .map(|v| cache.families(v as u32)[choice[v]].1)
                .sum();
            let replace = match best {
                None => true,
                Some((bs, _)) => score > *bs,
            };
            if replace {
                *best = Some((score, dag));
            }
            return;
        }
        for t in 0..cache.families(i as u32).len() {
            choice[i] = t;
            // prune: a cycle among the first i+1 chosen families cannot heal
            let partial: Vec<Vec<u32>> = (0..n)
                .map(|v| {
                    if v <= i {
                        cache.families(v as u32)[choice[v]].0.clone()
                    } else {
                        Vec::new()
                    }
                })
                .collect();
            if Dag::new(n, partial).is_err() {
                continue;
            }
            rec(i + 1, cache, choice, best, examined, admit);
        }
    }
    rec(0, cache, &mut choice, &mut best, &mut examined, &mut admit);

    let (total_score, dag) = best.expect("empty families keep the space non-empty");
    Ok(OracleResult {
        dag,
        total_score,
        enumerated_count: examined,
    })
}
