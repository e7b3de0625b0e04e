//! The anytime sampling loop: uniformly drawn k-trees, exact in-k-tree
//! optimization (version 1), and partial-order sampling with greedy parent
//! selection (version 2).

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::time::{Duration, Instant};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::Dag;
use crate::ktree::{self, CliqueTree, DandelionCode, KTree, KtreeError};
use crate::scoring::{MemoScores, ScoreCache};

/// Exact per-k-tree optimization is exponential in the treewidth; refuse
/// beyond this bound.
pub const V1_TREEWIDTH_LIMIT: usize = 8;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("treewidth {k} too large for the exact in-k-tree method (limit {limit})")]
    TreewidthTooLarge { k: usize, limit: usize },
    #[error(transparent)]
    Ktree(#[from] KtreeError),
    #[error("order space {0} exceeds the enumeration limit {1}")]
    TooManyOrders(u128, usize),
}

/// Orientation of every k-tree edge; `precedes(u, v)` answers edge direction.
/// The oriented graph is acyclic; its underlying undirected graph is exactly
/// the k-tree it was sampled within.
#[derive(Clone, Debug)]
pub struct PartialOrder {
    n: usize,
    words: usize,
    dir: Vec<u64>,
}

impl PartialOrder {
    fn new(n: usize) -> Self {
        let words = n.div_ceil(64);
        PartialOrder {
            n,
            words,
            dir: vec![0; n * words],
        }
    }

    #[inline]
    fn orient(&mut self, earlier: u32, later: u32) {
        self.dir[earlier as usize * self.words + later as usize / 64] |= 1 << (later % 64);
    }

    /// True iff the edge {u, v} is oriented u before v.
    #[inline]
    pub fn precedes(&self, u: u32, v: u32) -> bool {
        self.dir[u as usize * self.words + v as usize / 64] >> (v % 64) & 1 == 1
    }

    /// Directed-edge list (earlier, later); one entry per k-tree edge.
    pub fn arcs(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for u in 0..self.n as u32 {
            for w in 0..self.words {
                let mut bits = self.dir[u as usize * self.words + w];
                while bits != 0 {
                    let b = bits.trailing_zeros();
                    bits &= bits - 1;
                    out.push((u, w as u32 * 64 + b));
                }
            }
        }
        out
    }

    /// Topological check over the oriented edges.
    pub fn is_acyclic(&self) -> bool {
        let arcs = self.arcs();
        let mut indeg = vec![0usize; self.n];
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v) in &arcs {
            indeg[v as usize] += 1;
            adj[u as usize].push(v);
        }
        let mut queue: Vec<u32> = (0..self.n as u32)
            .filter(|&v| indeg[v as usize] == 0)
            .collect();
        let mut seen = 0;
        let mut head = 0;
        while head < queue.len() {
            let v = queue[head];
            head += 1;
            seen += 1;
            for &c in &adj[v as usize] {
                indeg[c as usize] -= 1;
                if indeg[c as usize] == 0 {
                    queue.push(c);
                }
            }
        }
        seen == self.n
    }
}

/// Algorithm-2 sampling: orient the root clique uniformly over its (k+1)!
/// acyclic orientations, then place each attached vertex uniformly among the
/// k+1 positions relative to its already-ordered base clique.
pub fn sample_order(t: &KTree, ct: &CliqueTree, rng: &mut impl Rng) -> PartialOrder {
    let mut po = PartialOrder::new(t.n());
    let mut root = ct.bags[0].clone();
    root.shuffle(rng);
    for (i, &u) in root.iter().enumerate() {
        for &v in &root[i + 1..] {
            po.orient(u, v);
        }
    }
    for (v, base) in &ct.attach_order {
        let mut ordered = base.clone();
        ordered.sort_by(|&a, &b| {
            if po.precedes(a, b) {
                std::cmp::Ordering::Less
            } else {
                std::cmp::Ordering::Greater
            }
        });
        let pos = rng.random_range(0..=ordered.len());
        for &u in &ordered[..pos] {
            po.orient(u, *v);
        }
        for &u in &ordered[pos..] {
            po.orient(*v, u);
        }
    }
    po
}

pub const ORDER_ENUMERATION_LIMIT: usize = 1_000_000;

/// Every outcome of [`sample_order`]: root-clique permutations crossed with
/// per-vertex insertion positions. Test support.
pub fn enumerate_orders(t: &KTree, ct: &CliqueTree) -> Result<Vec<PartialOrder>, SearchError> {
    let k1 = ct.bags[0].len();
    let steps = ct.attach_order.len();
    let mut space: u128 = 1;
    for i in 1..=k1 {
        space *= i as u128;
    }
    space = space.saturating_mul((k1 as u128).pow(steps as u32));
    if space > ORDER_ENUMERATION_LIMIT as u128 {
        return Err(SearchError::TooManyOrders(space, ORDER_ENUMERATION_LIMIT));
    }

    let root = &ct.bags[0];
    let perms = permutations(k1);
    let mut out = Vec::with_capacity(space as usize);
    let mut positions = vec![0usize; steps];
    for perm in &perms {
        loop {
            let mut po = PartialOrder::new(t.n());
            for (a, &pa) in perm.iter().enumerate() {
                for &pb in &perm[a + 1..] {
                    po.orient(root[pa as usize], root[pb as usize]);
                }
            }
            for ((v, base), &pos) in ct.attach_order.iter().zip(&positions) {
                let mut ordered = base.clone();
                ordered.sort_by(|&a, &b| {
                    if po.precedes(a, b) {
                        std::cmp::Ordering::Less
                    } else {
                        std::cmp::Ordering::Greater
                    }
                });
                for &u in &ordered[..pos] {
                    po.orient(u, *v);
                }
                for &u in &ordered[pos..] {
                    po.orient(*v, u);
                }
            }
            out.push(po);
            // increment mixed-radix positions (each 0..=k)
            let mut i = 0;
            while i < steps {
                positions[i] += 1;
                if positions[i] <= k1 - 1 {
                    break;
                }
                positions[i] = 0;
                i += 1;
            }
            if i == steps {
                break;
            }
        }
    }
    Ok(out)
}

/// Cache families of node `i` admissible inside `t` under `order`: the family
/// plus `i` is a clique of `t` and every parent precedes `i`. Returns indices
/// into `cache.families(i)`; the empty set is always among them.
pub fn admissible_families(
    i: u32,
    t: &KTree,
    order: &PartialOrder,
    cache: &ScoreCache,
) -> Vec<usize> {
    cache
        .families(i)
        .iter()
        .enumerate()
        .filter(|(_, (parents, _))| {
            parents
                .iter()
                .all(|&j| t.graph.has_edge(i, j) && order.precedes(j, i))
                && t.graph.is_clique(parents)
        })
        .map(|(idx, _)| idx)
        .collect()
}

/// Hash lookup from sorted parent sets to (score, family index), per node.
/// Large caches (full parent-set enumerations) make scanning every family
/// per iteration the bottleneck; with the index the samplers enumerate the
/// clique subsets of a node's neighborhood instead and look each one up,
/// which computes the identical argmax.
pub struct ScoreIndex {
    per_node: Vec<std::collections::HashMap<Vec<u32>, (f64, u32)>>,
    pub max_family_size: usize,
}

impl ScoreIndex {
    pub fn new(cache: &ScoreCache) -> Self {
        let per_node = (0..cache.n() as u32)
            .map(|i| {
                cache
                    .families(i)
                    .iter()
                    .enumerate()
                    .map(|(idx, (fam, s))| (fam.clone(), (*s, idx as u32)))
                    .collect()
            })
            .collect();
        ScoreIndex {
            per_node,
            max_family_size: cache.max_family_size(),
        }
    }

    #[inline]
    fn get(&self, i: u32, parents: &[u32]) -> Option<(f64, u32)> {
        self.per_node[i as usize].get(parents).copied()
    }
}

fn better_family(
    cand: (f64, &[u32]),
    best: &Option<(f64, Vec<u32>)>,
) -> bool {
    match best {
        None => true,
        Some((bs, bf)) => cand.0 > *bs || (cand.0 == *bs && cand.1 < bf.as_slice()),
    }
}

/// Best admissible family of node `i` by enumerating clique subsets of its
/// preceding neighbors and looking each up in the index.
fn best_family_indexed(
    i: u32,
    t: &KTree,
    order: &PartialOrder,
    index: &ScoreIndex,
) -> (f64, Vec<u32>) {
    let preceding: Vec<u32> = t
        .graph
        .neighbors(i)
        .filter(|&j| order.precedes(j, i))
        .collect();
    let mut best: Option<(f64, Vec<u32>)> = None;
    if let Some((s, _)) = index.get(i, &[]) {
        best = Some((s, Vec::new()));
    }
    let mut stack: Vec<(usize, Vec<u32>)> = vec![(0, Vec::new())];
    while let Some((start, cur)) = stack.pop() {
        for idx in start..preceding.len() {
            let cand = preceding[idx];
            if cur.iter().all(|&u| t.graph.has_edge(u, cand)) {
                let mut next = cur.clone();
                next.push(cand);
                if let Some((s, _)) = index.get(i, &next) {
                    if better_family((s, &next), &best) {
                        best = Some((s, next.clone()));
                    }
                }
                if next.len() < index.max_family_size {
                    stack.push((idx + 1, next));
                }
            }
        }
    }
    best.expect("empty parent set is always present")
}

/// Per-node argmax over admissible families. Equal scores prefer the
/// lexicographically smallest parent set.
pub fn greedy_dag_given_order(t: &KTree, order: &PartialOrder, cache: &ScoreCache) -> (Dag, f64) {
    let n = t.n();
    let mut parents = Vec::with_capacity(n);
    let mut total = 0.0;
    for i in 0..n as u32 {
        let mut best: Option<(f64, Vec<u32>)> = None;
        for (fam, score) in cache.families(i) {
            let ok = fam
                .iter()
                .all(|&j| t.graph.has_edge(i, j) && order.precedes(j, i))
                && t.graph.is_clique(fam);
            if !ok {
                continue;
            }
            if better_family((*score, fam), &best) {
                best = Some((*score, fam.clone()));
            }
        }
        let (score, fam) = best.expect("empty parent set is always admissible");
        total += score;
        parents.push(fam);
    }
    let dag = Dag::new(n, parents).expect("order-consistent families are acyclic");
    (dag, total)
}

/// Same result as [`greedy_dag_given_order`] through the subset index.
pub fn greedy_dag_indexed(
    t: &KTree,
    order: &PartialOrder,
    index: &ScoreIndex,
) -> (Dag, f64) {
    let n = t.n();
    let mut parents = Vec::with_capacity(n);
    let mut total = 0.0;
    for i in 0..n as u32 {
        let (score, fam) = best_family_indexed(i, t, order, index);
        total += score;
        parents.push(fam);
    }
    let dag = Dag::new(n, parents).expect("order-consistent families are acyclic");
    (dag, total)
}

/// Greedy pass scoring on demand: candidate parent sets are the cliques of
/// preceding neighbors up to the memo's in-degree bound.
pub fn greedy_dag_on_demand(t: &KTree, order: &PartialOrder, memo: &MemoScores) -> (Dag, f64) {
    let n = t.n();
    let maxp = memo.max_in_degree;
    let mut parents_out = Vec::with_capacity(n);
    let mut total = 0.0;
    for i in 0..n as u32 {
        let preceding: Vec<u32> = t
            .graph
            .neighbors(i)
            .filter(|&j| order.precedes(j, i))
            .collect();
        let mut best_set: Vec<u32> = Vec::new();
        let mut best_score = memo.score(i, &[]);
        let mut stack: Vec<(usize, Vec<u32>)> = vec![(0, Vec::new())];
        while let Some((start, cur)) = stack.pop() {
            for idx in start..preceding.len() {
                let cand = preceding[idx];
                if cur.iter().all(|&u| t.graph.has_edge(u, cand)) {
                    let mut next = cur.clone();
                    next.push(cand);
                    let s = memo.score(i, &next);
                    if s > best_score || (s == best_score && next < best_set) {
                        best_score = s;
                        best_set = next.clone();
                    }
                    if next.len() < maxp {
                        stack.push((idx + 1, next));
                    }
                }
            }
        }
        total += best_score;
        parents_out.push(best_set);
    }
    let dag = Dag::new(n, parents_out).expect("order-consistent families are acyclic");
    (dag, total)
}

// ---------------------------------------------------------------------------
// Version 1: exact optimum within a k-tree by dynamic programming over the
// clique tree. A state is a total order of a bag's k+1 vertices plus a flag
// per vertex marking whether its family was already charged in the processed
// subtree; adjacent bags must agree on the shared order, flags merge
// disjointly, and each vertex is charged exactly once somewhere in its bag
// subtree.
// ---------------------------------------------------------------------------

fn permutations(len: usize) -> Vec<Vec<u8>> {
    fn rec(len: usize, cur: &mut Vec<u8>, used: &mut [bool], out: &mut Vec<Vec<u8>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for v in 0..len as u8 {
            if !used[v as usize] {
                used[v as usize] = true;
                cur.push(v);
                rec(len, cur, used, out);
                cur.pop();
                used[v as usize] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(len, &mut Vec::with_capacity(len), &mut vec![false; len], &mut out);
    out
}

fn rank_of_perm(perm: &[u8]) -> usize {
    // Lehmer code over values 0..len
    let len = perm.len();
    let mut rank = 0usize;
    for i in 0..len {
        let smaller = perm[i + 1..].iter().filter(|&&x| x < perm[i]).count();
        rank = rank * (len - i) + smaller;
    }
    rank
}

struct BagContext<'a> {
    cache: &'a ScoreCache,
    index: Option<&'a ScoreIndex>,
    k1: usize,                   // bag size k+1
    perms: Vec<Vec<u8>>,         // all bag orders
    kperms_count: usize,         // k! for message indexing
}

struct BagTables {
    /// One table per stage: init, after each child merge, after each charge.
    stages: Vec<Vec<f64>>,
}

impl<'a> BagContext<'a> {
    fn table_len(&self) -> usize {
        self.perms.len() << self.k1
    }
}

/// Best family score and argmax family index per (bag member, predecessor
/// mask): subset-max closure over the member's families that fit in the bag.
/// With an index and a large family list, candidates come from direct
/// lookups of the bag's subsets instead of a scan; the result is identical.
fn charge_tables(
    ctx: &BagContext,
    bag: &[u32],
) -> Vec<Vec<(f64, u32)>> {
    let k1 = ctx.k1;
    let size = 1usize << k1;
    bag.iter()
        .enumerate()
        .map(|(xl, &x)| {
            let mut arr: Vec<(f64, u32)> = vec![(f64::NEG_INFINITY, u32::MAX); size];
            let use_index = ctx
                .index
                .filter(|_| ctx.cache.families(x).len() > size)
                .is_some();
            if use_index {
                let index = ctx.index.unwrap();
                for mask in 0..size {
                    if mask >> xl & 1 == 1 {
                        continue;
                    }
                    let mut fam: Vec<u32> = (0..k1)
                        .filter(|&p| mask >> p & 1 == 1)
                        .map(|p| bag[p])
                        .collect();
                    fam.sort_unstable();
                    if fam.len() > index.max_family_size {
                        continue;
                    }
                    if let Some((s, fi)) = index.get(x, &fam) {
                        arr[mask] = (s, fi);
                    }
                }
            } else {
                for (fi, (fam, score)) in ctx.cache.families(x).iter().enumerate() {
                    let mut mask = 0usize;
                    let mut ok = true;
                    for &p in fam {
                        match bag.iter().position(|&b| b == p) {
                            Some(pos) => mask |= 1 << pos,
                            None => {
                                ok = false;
                                break;
                            }
                        }
                    }
                    if !ok {
                        continue;
                    }
                    let cur = &mut arr[mask];
                    let better = *score > cur.0
                        || (*score == cur.0
                            && cur.1 != u32::MAX
                            && fam < &ctx.cache.families(x)[cur.1 as usize].0);
                    if cur.1 == u32::MAX || better {
                        *cur = (*score, fi as u32);
                    }
                }
            }
            // superset closure: best over subsets of each mask
            for bit in 0..k1 {
                for mask in 0..size {
                    if mask >> bit & 1 == 1 {
                        let (s, f) = arr[mask ^ (1 << bit)];
                        let better = s > arr[mask].0
                            || (s == arr[mask].0
                                && f != u32::MAX
                                && arr[mask].1 != u32::MAX
                                && ctx.cache.families(x)[f as usize].0
                                    < ctx.cache.families(x)[arr[mask].1 as usize].0);
                        if arr[mask].1 == u32::MAX || better {
                            arr[mask] = (s, f);
                        }
                    }
                }
            }
            arr
        })
        .collect()
}

/// Predecessor mask of each member under each bag order.
fn pred_masks(ctx: &BagContext) -> Vec<Vec<usize>> {
    ctx.perms
        .iter()
        .map(|perm| {
            let mut masks = vec![0usize; ctx.k1];
            let mut seen = 0usize;
            for &local in perm {
                masks[local as usize] = seen;
                seen |= 1 << local;
            }
            masks
        })
        .collect()
}

/// Runs all stages for one bag: start table, one merge per child message,
/// then one charge pass per member. Children messages are indexed by the
/// induced order on the shared k vertices and flags over them.
fn run_bag(
    ctx: &BagContext,
    child_info: &[(Vec<usize>, Vec<f64>)], // (shared locals sorted by vertex, message)
    charge: &[Vec<(f64, u32)>],
    preds: &[Vec<usize>],
) -> BagTables {
    let k1 = ctx.k1;
    let flags = 1usize << k1;
    let len = ctx.table_len();
    let mut stages = Vec::with_capacity(1 + child_info.len() + k1);

    let mut cur = vec![f64::NEG_INFINITY; len];
    for p in 0..ctx.perms.len() {
        cur[p << k1] = 0.0;
    }
    stages.push(cur.clone());

    for (shared_locals, message) in child_info {
        let mut next = vec![f64::NEG_INFINITY; len];
        let shared_mask: usize = shared_locals.iter().map(|&l| 1 << l).sum();
        for (p, perm) in ctx.perms.iter().enumerate() {
            // induced order of the shared vertices under this bag order,
            // expressed over their sorted-by-vertex positions
            let mut induced: Vec<u8> = Vec::with_capacity(shared_locals.len());
            for &local in perm {
                if let Some(pos) = shared_locals.iter().position(|&s| s == local as usize) {
                    induced.push(pos as u8);
                }
            }
            let msg_base = rank_of_perm(&induced) << shared_locals.len();
            let base = p << k1;
            for f in 0..flags {
                let v = cur[base + f];
                if v == f64::NEG_INFINITY {
                    continue;
                }
                let avail = shared_mask & !f;
                // iterate subsets of avail, including empty
                let mut g_bag = avail;
                loop {
                    // translate bag-coordinate mask to child flag mask
                    let mut g_child = 0usize;
                    for (pos, &l) in shared_locals.iter().enumerate() {
                        if g_bag >> l & 1 == 1 {
                            g_child |= 1 << pos;
                        }
                    }
                    let mv = message[msg_base + g_child];
                    if mv != f64::NEG_INFINITY {
                        let tgt = &mut next[base + (f | g_bag)];
                        if v + mv > *tgt {
                            *tgt = v + mv;
                        }
                    }
                    if g_bag == 0 {
                        break;
                    }
                    g_bag = (g_bag - 1) & avail;
                }
            }
        }
        stages.push(next.clone());
        cur = next;
    }

    for x in 0..k1 {
        let bit = 1 << x;
        let mut next = cur.clone();
        for (p, _) in ctx.perms.iter().enumerate() {
            let base = p << k1;
            let pm = preds[p][x];
            let (best, fam) = charge[x][pm];
            if fam == u32::MAX {
                continue;
            }
            for f in 0..flags {
                if f & bit != 0 {
                    continue;
                }
                let v = cur[base + f];
                if v == f64::NEG_INFINITY {
                    continue;
                }
                let tgt = &mut next[base + (f | bit)];
                if v + best > *tgt {
                    *tgt = v + best;
                }
            }
        }
        stages.push(next.clone());
        cur = next;
    }
    BagTables { stages }
}

/// Projects a finished bag table to its parent: drop the private vertex
/// (its flag must be set), keeping the induced order and flags on the shared
/// k vertices.
fn project(
    ctx: &BagContext,
    table: &[f64],
    private_local: usize,
) -> Vec<f64> {
    let k1 = ctx.k1;
    let k = k1 - 1;
    let mut msg = vec![f64::NEG_INFINITY; ctx.kperms_count << k];
    for (p, perm) in ctx.perms.iter().enumerate() {
        let mut induced: Vec<u8> = Vec::with_capacity(k);
        for &local in perm {
            if local as usize != private_local {
                let shifted = if (local as usize) > private_local {
                    local - 1
                } else {
                    local
                };
                induced.push(shifted);
            }
        }
        let msg_base = rank_of_perm(&induced) << k;
        let base = p << k1;
        for f in 0..(1usize << k1) {
            if f >> private_local & 1 == 0 {
                continue;
            }
            let v = table[base + f];
            if v == f64::NEG_INFINITY {
                continue;
            }
            // flags over shared vertices in sorted-by-vertex order: locals
            // 0..k1 minus private, order preserved
            let mut g = 0usize;
            let mut pos = 0;
            for l in 0..k1 {
                if l == private_local {
                    continue;
                }
                if f >> l & 1 == 1 {
                    g |= 1 << pos;
                }
                pos += 1;
            }
            let tgt = &mut msg[msg_base + g];
            if v > *tgt {
                *tgt = v;
            }
        }
    }
    msg
}

/// Exact maximum-score DAG whose moral graph is a subgraph of the k-tree,
/// over families present in the cache.
pub fn best_dag_in_ktree_exact(
    t: &KTree,
    ct: &CliqueTree,
    cache: &ScoreCache,
) -> Result<(Dag, f64), SearchError> {
    best_dag_in_ktree_impl(t, ct, cache, None)
}

/// Same optimum through the subset index; sampling loops build the index
/// once and pass it here.
pub fn best_dag_in_ktree_indexed(
    t: &KTree,
    ct: &CliqueTree,
    cache: &ScoreCache,
    index: &ScoreIndex,
) -> Result<(Dag, f64), SearchError> {
    best_dag_in_ktree_impl(t, ct, cache, Some(index))
}

fn best_dag_in_ktree_impl(
    t: &KTree,
    ct: &CliqueTree,
    cache: &ScoreCache,
    index: Option<&ScoreIndex>,
) -> Result<(Dag, f64), SearchError> {
    let k = t.k;
    if k > V1_TREEWIDTH_LIMIT {
        return Err(SearchError::TreewidthTooLarge {
            k,
            limit: V1_TREEWIDTH_LIMIT,
        });
    }
    let n = t.n();
    let k1 = k + 1;
    let ctx = BagContext {
        cache,
        index,
        k1,
        perms: permutations(k1),
        kperms_count: (1..=k).product::<usize>().max(1),
    };
    let nbags = ct.bags.len();
    let children = ct.children();

    // private vertex per bag: the attached vertex (bags after the root)
    let mut private = vec![u32::MAX; nbags];
    for (i, (v, _)) in ct.attach_order.iter().enumerate() {
        private[i + 1] = *v;
    }

    // post-order over bags
    let mut order = Vec::with_capacity(nbags);
    let mut stack = vec![(0usize, false)];
    while let Some((b, expanded)) = stack.pop() {
        if expanded {
            order.push(b);
        } else {
            stack.push((b, true));
            for &c in &children[b] {
                stack.push((c, false));
            }
        }
    }

    let mut messages: Vec<Option<Vec<f64>>> = (0..nbags).map(|_| None).collect();
    let mut root_tables: Option<BagTables> = None;

    let bag_stage_inputs = |b: usize, messages: &Vec<Option<Vec<f64>>>| {
        let bag = &ct.bags[b];
        let child_info: Vec<(Vec<usize>, Vec<f64>)> = children[b]
            .iter()
            .map(|&c| {
                let shared: Vec<usize> = ct.bags[c]
                    .iter()
                    .filter(|&&v| v != private[c])
                    .map(|&v| bag.iter().position(|&x| x == v).expect("shared vertex"))
                    .collect();
                (shared, messages[c].clone().expect("child message ready"))
            })
            .collect();
        child_info
    };

    for &b in &order {
        let bag = &ct.bags[b];
        let child_info = bag_stage_inputs(b, &messages);
        let charge = charge_tables(&ctx, bag);
        let preds = pred_masks(&ctx);
        let tables = run_bag(&ctx, &child_info, &charge, &preds);
        if b == 0 {
            root_tables = Some(tables);
        } else {
            let pl = bag
                .iter()
                .position(|&v| v == private[b])
                .expect("private vertex in bag");
            messages[b] = Some(project(&ctx, tables.stages.last().unwrap(), pl));
        }
    }

    // best root state
    let root_tables = root_tables.expect("root processed");
    let full = (1usize << k1) - 1;
    let final_stage = root_tables.stages.last().unwrap();
    let mut best = f64::NEG_INFINITY;
    let mut best_perm = 0usize;
    for p in 0..ctx.perms.len() {
        let v = final_stage[(p << k1) + full];
        if v > best {
            best = v;
            best_perm = p;
        }
    }

    // Reconstruction: walk stages backwards per bag, recomputing child bags
    // on demand. Charges resolve to concrete families.
    let mut families: Vec<Option<u32>> = vec![None; n];
    struct Frame {
        bag: usize,
        perm: usize,
        flags: usize,
        tables: BagTables,
    }
    let mut work = vec![Frame {
        bag: 0,
        perm: best_perm,
        flags: full,
        tables: root_tables,
    }];
    while let Some(frame) = work.pop() {
        let b = frame.bag;
        let bag = &ct.bags[b];
        let charge = charge_tables(&ctx, bag);
        let preds = pred_masks(&ctx);
        let nchildren = children[b].len();
        let perm_idx = frame.perm;
        let mut f = frame.flags;
        // undo charge passes, last member first
        for x in (0..k1).rev() {
            let stage_after = &frame.tables.stages[1 + nchildren + x];
            let stage_before = &frame.tables.stages[nchildren + x];
            let here = stage_after[(perm_idx << k1) + f];
            let bit = 1 << x;
            if f & bit != 0 {
                let pm = preds[perm_idx][x];
                let (bs, bf) = charge[x][pm];
                let prev = stage_before[(perm_idx << k1) + (f ^ bit)];
                if bf != u32::MAX && prev != f64::NEG_INFINITY && prev + bs == here {
                    families[bag[x] as usize] = Some(bf);
                    f ^= bit;
                    continue;
                }
            }
            debug_assert_eq!(stage_before[(perm_idx << k1) + f], here);
        }
        // undo child merges, last child first
        let child_info = bag_stage_inputs(b, &messages);
        for ci in (0..nchildren).rev() {
            let stage_after = &frame.tables.stages[1 + ci];
            let stage_before = &frame.tables.stages[ci];
            let here = stage_after[(perm_idx << k1) + f];
            let (shared_locals, message) = &child_info[ci];
            let perm = &ctx.perms[perm_idx];
            let mut induced: Vec<u8> = Vec::new();
            for &local in perm {
                if let Some(pos) = shared_locals.iter().position(|&s| s == local as usize) {
                    induced.push(pos as u8);
                }
            }
            let msg_base = rank_of_perm(&induced) << shared_locals.len();
            let shared_mask: usize = shared_locals.iter().map(|&l| 1 << l).sum();
            // find the split: smallest g first for determinism
            let mut found = None;
            let within = f & shared_mask;
            let mut g_bag_list = Vec::new();
            let mut g = within;
            loop {
                g_bag_list.push(g);
                if g == 0 {
                    break;
                }
                g = (g - 1) & within;
            }
            g_bag_list.reverse(); // ascending
            for g_bag in g_bag_list {
                let mut g_child = 0usize;
                for (pos, &l) in shared_locals.iter().enumerate() {
                    if g_bag >> l & 1 == 1 {
                        g_child |= 1 << pos;
                    }
                }
                let mv = message[msg_base + g_child];
                let pv = stage_before[(perm_idx << k1) + (f ^ g_bag)];
                if mv != f64::NEG_INFINITY && pv != f64::NEG_INFINITY && pv + mv == here {
                    found = Some((g_bag, g_child, msg_base, mv));
                    break;
                }
            }
            let (g_bag, g_child, msg_base, mv) =
                found.expect("forward value must decompose");
            f ^= g_bag;

            // descend into the child: rebuild its tables, find a matching state
            let c = children[b][ci];
            let cbag = &ct.bags[c];
            let c_child_info = bag_stage_inputs(c, &messages);
            let c_charge = charge_tables(&ctx, cbag);
            let c_preds = pred_masks(&ctx);
            let c_tables = run_bag(&ctx, &c_child_info, &c_charge, &c_preds);
            let pl = cbag
                .iter()
                .position(|&v| v == private[c])
                .expect("private vertex");
            // child flags: shared bits g_child mapped into child-local bits,
            // plus the private bit
            let mut cf = 1usize << pl;
            let mut pos = 0;
            for l in 0..k1 {
                if l == pl {
                    continue;
                }
                if g_child >> pos & 1 == 1 {
                    cf |= 1 << l;
                }
                pos += 1;
            }
            let c_final = c_tables.stages.last().unwrap();
            let mut cperm = None;
            for (p, perm) in ctx.perms.iter().enumerate() {
                // induced order on child's shared vertices must match msg_base
                let mut ind: Vec<u8> = Vec::new();
                for &local in perm {
                    if local as usize != pl {
                        let shifted = if (local as usize) > pl { local - 1 } else { local };
                        ind.push(shifted);
                    }
                }
                if (rank_of_perm(&ind) << (k1 - 1)) != msg_base {
                    continue;
                }
                if c_final[(p << k1) + cf] == mv {
                    cperm = Some(p);
                    break;
                }
            }
            let cperm = cperm.expect("message value must be attained");
            work.push(Frame {
                bag: c,
                perm: cperm,
                flags: cf,
                tables: c_tables,
            });
        }
    }

    let parent_sets: Vec<Vec<u32>> = (0..n as u32)
        .map(|v| {
            let fi = families[v as usize].expect("every vertex charged once");
            cache.families(v)[fi as usize].0.clone()
        })
        .collect();
    let total: f64 = (0..n as u32)
        .map(|v| cache.families(v)[families[v as usize].unwrap() as usize].1)
        .sum();
    debug_assert!((total - best).abs() <= 1e-6 * total.abs().max(1.0));
    let dag = Dag::new(n, parent_sets).expect("bag orders certify acyclicity");
    Ok((dag, total))
}

// ---------------------------------------------------------------------------
// The anytime loop
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    V1,
    V2,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::V1 => write!(f, "v1"),
            Method::V2 => write!(f, "v2"),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Budget {
    Iterations(u64),
    WallClock(Duration),
}

#[derive(Clone, Debug)]
pub struct LearnOptions {
    pub seed: u64,
    pub workers: usize,
}

impl Default for LearnOptions {
    fn default() -> Self {
        LearnOptions { seed: 0, workers: 1 }
    }
}

/// Outcome of a learning run, with enough provenance to replay the winner.
#[derive(Clone, Debug)]
pub struct LearnResult {
    pub dag: Dag,
    pub total_score: f64,
    pub seed: u64,
    pub iteration: u64,
    pub winning_code: Option<DandelionCode>,
    pub method: Method,
    pub effective_treewidth: usize,
    pub iterations_run: u64,
    /// (iteration, score) whenever the best-so-far improved, in replay order.
    pub improvements: Vec<(u64, f64)>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Every iteration owns an independent random stream derived from
/// (seed, iteration index), so results do not depend on how iterations are
/// distributed over workers.
fn iteration_rng(seed: u64, iter: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(iter.wrapping_add(1))))
}

struct Candidate {
    score: f64,
    iteration: u64,
    dag: Dag,
    code: Option<DandelionCode>,
}

fn better(a: &Candidate, b: &Option<Candidate>) -> bool {
    match b {
        None => true,
        Some(b) => a.score > b.score || (a.score == b.score && a.iteration < b.iteration),
    }
}

/// Algorithm 1: repeat (sample code, decode, optimize within the k-tree,
/// keep best) until the budget runs out. Interruptible through `stop`; the
/// in-flight iteration completes and the best so far is returned.
pub fn learn(
    cache: &ScoreCache,
    treewidth: usize,
    method: Method,
    budget: Budget,
    opts: &LearnOptions,
    stop: Option<&AtomicBool>,
) -> Result<LearnResult, SearchError> {
    let n = cache.n();
    assert!(treewidth >= 1, "treewidth bound must be at least 1");
    let k = treewidth.min(n.saturating_sub(1)).max(1);
    if method == Method::V1 && k > V1_TREEWIDTH_LIMIT {
        return Err(SearchError::TreewidthTooLarge {
            k,
            limit: V1_TREEWIDTH_LIMIT,
        });
    }

    // k = n-1 admits a single k-tree: the complete graph; codes are bypassed
    let degenerate: Option<(KTree, CliqueTree)> = if k >= n - 1 || n < k + 2 {
        let t = KTree::new_unchecked(crate::graph::UndirectedGraph::complete(n), k.min(n - 1));
        let ct = ktree::clique_tree(&t)?;
        Some((t, ct))
    } else {
        None
    };

    let deadline = match budget {
        Budget::WallClock(d) => Some(Instant::now() + d),
        Budget::Iterations(_) => None,
    };
    let max_iters = match budget {
        Budget::Iterations(i) => i,
        Budget::WallClock(_) => u64::MAX,
    };

    let counter = AtomicU64::new(0);
    let workers = opts.workers.max(1);
    let seed = opts.seed;
    let index = ScoreIndex::new(cache);

    let run_iteration = |iter: u64| -> Result<Candidate, SearchError> {
        let mut rng = iteration_rng(seed, iter);
        let (t, ct, code) = match &degenerate {
            Some((t, ct)) => (t.clone(), ct.clone(), None),
            None => {
                let code = ktree::sample_code(n, k, &mut rng)?;
                let (t, ct) = ktree::decode_full(&code)?;
                (t, ct, Some(code))
            }
        };
        let (dag, score) = match method {
            Method::V1 => best_dag_in_ktree_indexed(&t, &ct, cache, &index)?,
            Method::V2 => {
                let order = sample_order(&t, &ct, &mut rng);
                greedy_dag_indexed(&t, &order, &index)
            }
        };
        Ok(Candidate {
            score,
            iteration: iter,
            dag,
            code,
        })
    };

    let results: Vec<Result<(Option<Candidate>, Vec<(u64, f64)>, u64), SearchError>> =
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|_| {
                    scope.spawn(|| {
                        let mut local_best: Option<Candidate> = None;
                        let mut improvements = Vec::new();
                        let mut ran = 0u64;
                        loop {
                            if let Some(stop) = stop {
                                if stop.load(Ordering::Relaxed) {
                                    break;
                                }
                            }
                            if let Some(deadline) = deadline {
                                if Instant::now() >= deadline {
                                    break;
                                }
                            }
                            let iter = counter.fetch_add(1, Ordering::Relaxed);
                            if iter >= max_iters {
                                break;
                            }
                            let cand = run_iteration(iter)?;
                            ran += 1;
                            if better(&cand, &local_best) {
                                improvements.push((cand.iteration, cand.score));
                                local_best = Some(cand);
                            }
                        }
                        Ok((local_best, improvements, ran))
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });

    let mut best: Option<Candidate> = None;
    let mut improvements: Vec<(u64, f64)> = Vec::new();
    let mut iterations_run = 0u64;
    for r in results {
        let (cand, imps, ran) = r?;
        iterations_run += ran;
        improvements.extend(imps);
        if let Some(c) = cand {
            if better(&c, &best) {
                best = Some(c);
            }
        }
    }
    improvements.sort_by(|a, b| a.0.cmp(&b.0));
    // replayed best-so-far trace across the merged streams
    let mut trace = Vec::new();
    let mut run_best = f64::NEG_INFINITY;
    for (it, s) in improvements {
        if s > run_best {
            run_best = s;
            trace.push((it, s));
        }
    }

    let best = best.unwrap_or_else(|| Candidate {
        score: (0..n as u32).map(|i| cache.empty_score(i)).sum(),
        iteration: 0,
        dag: Dag::empty(n),
        code: None,
    });
    Ok(LearnResult {
        dag: best.dag,
        total_score: best.score,
        seed,
        iteration: best.iteration,
        winning_code: best.code,
        method,
        effective_treewidth: k,
        iterations_run,
        improvements: trace,
    })
}

/// Systematic replacement for sampling on spaces small enough to exhaust:
/// every code, and for version 2 every partial order of every k-tree.
/// Test support.
pub fn learn_exhaustive(
    cache: &ScoreCache,
    treewidth: usize,
    method: Method,
) -> Result<LearnResult, SearchError> {
    let n = cache.n();
    let k = treewidth.min(n - 1);
    let mut best: Option<(f64, Dag, Option<DandelionCode>)> = None;
    let mut consider = |score: f64, dag: Dag, code: Option<DandelionCode>| {
        let replace = match &best {
            None => true,
            Some((bs, ..)) => score > *bs,
        };
        if replace {
            best = Some((score, dag, code));
        }
    };
    let mut count = 0u64;
    if k >= n - 1 {
        let t = KTree::new_unchecked(crate::graph::UndirectedGraph::complete(n), k);
        let ct = ktree::clique_tree(&t)?;
        match method {
            Method::V1 => {
                let (dag, s) = best_dag_in_ktree_exact(&t, &ct, cache)?;
                consider(s, dag, None);
                count += 1;
            }
            Method::V2 => {
                for order in enumerate_orders(&t, &ct)? {
                    let (dag, s) = greedy_dag_given_order(&t, &order, cache);
                    consider(s, dag, None);
                    count += 1;
                }
            }
        }
    } else {
        for code in ktree::enumerate_codes(n, k) {
            let (t, ct) = ktree::decode_full(&code)?;
            match method {
                Method::V1 => {
                    let (dag, s) = best_dag_in_ktree_exact(&t, &ct, cache)?;
                    consider(s, dag, Some(code));
                    count += 1;
                }
                Method::V2 => {
                    for order in enumerate_orders(&t, &ct)? {
                        let (dag, s) = greedy_dag_given_order(&t, &order, cache);
                        consider(s, dag, Some(code.clone()));
                        count += 1;
                    }
                }
            }
        }
    }
    let (score, dag, code) = best.expect("at least one candidate");
    Ok(LearnResult {
        dag,
        total_score: score,
        seed: 0,
        iteration: 0,
        winning_code: code,
        method,
        effective_treewidth: k,
        iterations_run: count,
        improvements: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{dag_treewidth_at_most_with_witness, moral_graph, EliminationOrder};
    use crate::ktree::{clique_tree, decode_full, enumerate_ktrees, sample_code};
    use crate::synth::random_cache;
    use std::collections::HashMap;

    #[test]
    fn permutations_are_lexicographic_and_ranked() {
        let ps = permutations(4);
        assert_eq!(ps.len(), 24);
        for (i, p) in ps.iter().enumerate() {
            assert_eq!(rank_of_perm(p), i);
        }
        assert!(ps.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn sample_order_single_clique_uniform() {
        let t = KTree::new(crate::graph::UndirectedGraph::complete(3), 2).unwrap();
        let ct = clique_tree(&t).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut counts: HashMap<Vec<(u32, u32)>, u64> = HashMap::new();
        let draws = 6000;
        for _ in 0..draws {
            let po = sample_order(&t, &ct, &mut rng);
            assert!(po.is_acyclic());
            *counts.entry(po.arcs()).or_insert(0) += 1;
        }
        assert_eq!(counts.len(), 6); // (k+1)! orientations
        for &c in counts.values() {
            assert!((c as f64 - 1000.0).abs() < 150.0, "roughly uniform: {c}");
        }
    }

    #[test]
    fn sample_order_tree_eight_outcomes() {
        // n=4, k=1: sample space k!(k+1)^{n-k} = 8; all orientations acyclic
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let code = sample_code(4, 1, &mut rng).unwrap();
        let (t, ct) = decode_full(&code).unwrap();
        let mut counts: HashMap<Vec<(u32, u32)>, u64> = HashMap::new();
        for _ in 0..16000 {
            let po = sample_order(&t, &ct, &mut rng);
            *counts.entry(po.arcs()).or_insert(0) += 1;
        }
        assert_eq!(counts.len(), 8);
        // and enumeration produces exactly those outcomes
        let enumerated = enumerate_orders(&t, &ct).unwrap();
        assert_eq!(enumerated.len(), 8);
        let set: std::collections::HashSet<Vec<(u32, u32)>> =
            enumerated.iter().map(|o| o.arcs()).collect();
        assert_eq!(set.len(), 8);
        for k in counts.keys() {
            assert!(set.contains(k));
        }
    }

    #[test]
    fn order_support_fifty_four_for_five_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (t, ct) = decode_full(&sample_code(5, 2, &mut rng).unwrap()).unwrap();
        let orders = enumerate_orders(&t, &ct).unwrap();
        assert_eq!(orders.len(), 54); // 3! * 3^3 / ... = (k+1)! (k+1)^{n-k-1}
        let distinct: std::collections::HashSet<Vec<(u32, u32)>> =
            orders.iter().map(|o| o.arcs()).collect();
        assert_eq!(distinct.len(), 54);
        for o in &orders {
            assert!(o.is_acyclic());
        }
    }

    #[test]
    fn admissible_families_respect_source_and_cliques() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (t, ct) = decode_full(&sample_code(6, 2, &mut rng).unwrap()).unwrap();
        let cache = random_cache(6, 3, 12, 0xC0FFEE);
        for _ in 0..50 {
            let po = sample_order(&t, &ct, &mut rng);
            for i in 0..6u32 {
                let adm = admissible_families(i, &t, &po, &cache);
                assert!(adm
                    .iter()
                    .any(|&idx| cache.families(i)[idx].0.is_empty()));
                for &idx in &adm {
                    let fam = &cache.families(i)[idx].0;
                    for &j in fam {
                        assert!(t.graph.has_edge(i, j));
                        assert!(po.precedes(j, i));
                    }
                }
                // a source node admits only the empty family
                if t.graph.neighbors(i).all(|j| po.precedes(i, j)) {
                    assert!(adm
                        .iter()
                        .all(|&idx| cache.families(i)[idx].0.is_empty()));
                }
            }
        }
    }

    #[test]
    fn greedy_zero_scores_give_empty_dag() {
        let names = (0..4).map(|i| format!("v{i}")).collect();
        let fams = (0..4u32)
            .map(|i| {
                let mut f = vec![(vec![], 0.0)];
                for j in 0..4u32 {
                    if j != i {
                        f.push((vec![j], -1.0));
                    }
                }
                f
            })
            .collect();
        let cache = ScoreCache::new(names, fams);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (t, ct) = decode_full(&sample_code(4, 1, &mut rng).unwrap()).unwrap();
        let po = sample_order(&t, &ct, &mut rng);
        let (dag, score) = greedy_dag_given_order(&t, &po, &cache);
        assert_eq!(score, 0.0);
        assert_eq!(dag.arc_count(), 0);
    }

    #[test]
    fn greedy_moral_graph_inside_ktree_and_width_witnessed() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for trial in 0..1000 {
            let n = rng.random_range(4..10usize);
            let k = rng.random_range(1..=3.min(n - 2));
            let cache = random_cache(n, 3.min(k + 1), 10, trial);
            let (t, ct) = decode_full(&sample_code(n, k, &mut rng).unwrap()).unwrap();
            let po = sample_order(&t, &ct, &mut rng);
            let (dag, score) = greedy_dag_given_order(&t, &po, &cache);
            assert!((cache.dag_score(&dag).unwrap() - score).abs() < 1e-9);
            let moral = moral_graph(&dag);
            for (u, v) in moral.edges() {
                assert!(t.graph.has_edge(u, v), "moral edge outside k-tree");
            }
            let witness =
                EliminationOrder::new(ct.elimination_witness(n), n).unwrap();
            assert!(dag_treewidth_at_most_with_witness(&dag, k, &witness));
        }
    }

    #[test]
    fn exact_dp_single_clique_matches_order_brute_force() {
        for trial in 0..20 {
            let n = 4;
            let k = 3;
            let cache = random_cache(n, 3, 14, 1000 + trial);
            let t = KTree::new(crate::graph::UndirectedGraph::complete(n), k).unwrap();
            let ct = clique_tree(&t).unwrap();
            let (_, dp_score) = best_dag_in_ktree_exact(&t, &ct, &cache).unwrap();
            // brute force over all vertex orders of the clique
            let mut best = f64::NEG_INFINITY;
            for perm in permutations(n) {
                let mut total = 0.0;
                for (pos, &v) in perm.iter().enumerate() {
                    let before: Vec<u8> = perm[..pos].to_vec();
                    let mut node_best = f64::NEG_INFINITY;
                    for (fam, s) in cache.families(v as u32) {
                        if fam.iter().all(|&p| before.contains(&(p as u8))) {
                            node_best = node_best.max(*s);
                        }
                    }
                    total += node_best;
                }
                best = best.max(total);
            }
            assert!((dp_score - best).abs() < 1e-9, "{dp_score} vs {best}");
        }
    }

    #[test]
    fn exact_dp_equals_exhausted_orders_on_two_trees() {
        // smaller pass of the acceptance criterion: a handful of 2-trees
        let trees = enumerate_ktrees(5, 2).unwrap();
        for (i, t) in trees.iter().enumerate().step_by(7) {
            let cache = random_cache(5, 3, 16, 31 * i as u64 + 1);
            let ct = clique_tree(t).unwrap();
            let (_, dp) = best_dag_in_ktree_exact(t, &ct, &cache).unwrap();
            let mut best = f64::NEG_INFINITY;
            for o in enumerate_orders(t, &ct).unwrap() {
                let (_, s) = greedy_dag_given_order(t, &o, &cache);
                best = best.max(s);
            }
            assert!((dp - best).abs() < 1e-9, "tree {i}: dp {dp} orders {best}");
        }
    }

    #[test]
    fn exact_dp_result_is_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for trial in 0..200 {
            let n = rng.random_range(4..9usize);
            let k = rng.random_range(1..=3.min(n - 2));
            let cache = random_cache(n, 3, 10, 500 + trial);
            let (t, ct) = decode_full(&sample_code(n, k, &mut rng).unwrap()).unwrap();
            let (dag, score) = best_dag_in_ktree_exact(&t, &ct, &cache).unwrap();
            assert!((cache.dag_score(&dag).unwrap() - score).abs() < 1e-9);
            let moral = moral_graph(&dag);
            for (u, v) in moral.edges() {
                assert!(t.graph.has_edge(u, v));
            }
            // dominates any sampled order
            for _ in 0..10 {
                let po = sample_order(&t, &ct, &mut rng);
                let (_, gs) = greedy_dag_given_order(&t, &po, &cache);
                assert!(score >= gs - 1e-9);
            }
        }
    }

    #[test]
    fn dp_refuses_large_treewidth() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (t, ct) = decode_full(&sample_code(12, 10, &mut rng).unwrap()).unwrap();
        let cache = random_cache(12, 2, 4, 9);
        assert!(matches!(
            best_dag_in_ktree_exact(&t, &ct, &cache),
            Err(SearchError::TreewidthTooLarge { .. })
        ));
    }

    #[test]
    fn learn_deterministic_and_monotone() {
        let cache = random_cache(8, 3, 20, 77);
        let opts = LearnOptions { seed: 7, workers: 1 };
        let r1 = learn(&cache, 2, Method::V2, Budget::Iterations(200), &opts, None).unwrap();
        let r2 = learn(&cache, 2, Method::V2, Budget::Iterations(200), &opts, None).unwrap();
        assert_eq!(r1.total_score, r2.total_score);
        assert_eq!(r1.dag, r2.dag);
        assert_eq!(r1.iteration, r2.iteration);
        assert!(r1
            .improvements
            .windows(2)
            .all(|w| w[0].1 < w[1].1 && w[0].0 < w[1].0));
        // single iteration is deterministic too
        let one = learn(&cache, 2, Method::V2, Budget::Iterations(1), &opts, None).unwrap();
        assert_eq!(one.iterations_run, 1);
    }

    #[test]
    fn learn_worker_count_invariance() {
        let cache = random_cache(7, 3, 15, 123);
        for method in [Method::V1, Method::V2] {
            let r1 = learn(
                &cache,
                2,
                method,
                Budget::Iterations(100),
                &LearnOptions { seed: 5, workers: 1 },
                None,
            )
            .unwrap();
            let r4 = learn(
                &cache,
                2,
                method,
                Budget::Iterations(100),
                &LearnOptions { seed: 5, workers: 4 },
                None,
            )
            .unwrap();
            assert_eq!(r1.total_score, r4.total_score);
            assert_eq!(r1.iteration, r4.iteration);
            assert_eq!(r1.dag, r4.dag);
        }
    }

    #[test]
    fn learn_v2_never_below_empty_dag() {
        let cache = random_cache(6, 3, 8, 321);
        let empty: f64 = (0..6u32).map(|i| cache.empty_score(i)).sum();
        let r = learn(
            &cache,
            2,
            Method::V2,
            Budget::Iterations(50),
            &LearnOptions::default(),
            None,
        )
        .unwrap();
        assert!(r.total_score >= empty);
    }

    #[test]
    fn learn_stop_flag_interrupts() {
        let cache = random_cache(10, 3, 20, 555);
        let stop = AtomicBool::new(true); // stop before the first iteration
        let r = learn(
            &cache,
            2,
            Method::V2,
            Budget::Iterations(1_000_000),
            &LearnOptions::default(),
            Some(&stop),
        )
        .unwrap();
        assert_eq!(r.iterations_run, 0);
        // still a valid (empty) incumbent
        assert_eq!(r.dag.arc_count(), 0);
    }

    #[test]
    fn learn_clamps_excessive_treewidth() {
        let cache = random_cache(4, 3, 8, 999);
        let r = learn(
            &cache,
            9,
            Method::V2,
            Budget::Iterations(20),
            &LearnOptions::default(),
            None,
        )
        .unwrap();
        assert_eq!(r.effective_treewidth, 3);
    }

    #[test]
    fn exhaustive_mode_attains_oracle_optimum() {
        // exhausting both sampling spaces (all 70 two-trees, all 54 orders
        // each) recovers the global bounded-treewidth optimum
        for seed in 0..3u64 {
            let cache = crate::synth::full_random_cache(5, 2, 9000 + seed);
            let oracle = crate::oracle::brute_force_learn(&cache, 2).unwrap();
            let v2 = learn_exhaustive(&cache, 2, Method::V2).unwrap();
            assert_eq!(v2.iterations_run, 70 * 54);
            assert_eq!(v2.total_score, oracle.total_score);
            let v1 = learn_exhaustive(&cache, 2, Method::V1).unwrap();
            assert_eq!(v1.total_score, oracle.total_score);
        }
    }

    #[test]
    fn indexed_paths_match_scanning_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..100 {
            let n = rng.random_range(5..10usize);
            let k = rng.random_range(1..=3.min(n - 2));
            let cache = if trial % 2 == 0 {
                random_cache(n, 3, 8, 7000 + trial) // sparse: scan branch
            } else {
                crate::synth::full_random_cache(n, 2, 7000 + trial) // dense
            };
            let index = ScoreIndex::new(&cache);
            let (t, ct) = decode_full(&sample_code(n, k, &mut rng).unwrap()).unwrap();
            let po = sample_order(&t, &ct, &mut rng);
            let (d1, s1) = greedy_dag_given_order(&t, &po, &cache);
            let (d2, s2) = greedy_dag_indexed(&t, &po, &index);
            assert_eq!(s1, s2);
            assert_eq!(d1, d2);
            let (e1, x1) = best_dag_in_ktree_exact(&t, &ct, &cache).unwrap();
            let (e2, x2) = best_dag_in_ktree_indexed(&t, &ct, &cache, &index).unwrap();
            assert_eq!(x1, x2);
            assert_eq!(e1, e2);
        }
    }

    #[test]
    fn on_demand_greedy_matches_cache_greedy_on_full_cache() {
        use crate::scoring::{build_score_cache, Dataset, MemoScores, ScoringConfig};
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let cols: Vec<Vec<u32>> = (0..6)
            .map(|_| (0..40).map(|_| rng.random_range(0..2u32)).collect())
            .collect();
        let names = (0..6).map(|i| format!("v{i}")).collect();
        let data = Dataset::from_columns(names, cols);
        let cfg = ScoringConfig {
            ess: 1.0,
            max_in_degree: 2,
        };
        let cache = build_score_cache(&data, &cfg);
        let memo = MemoScores::new(&data, &cfg);
        for _ in 0..30 {
            let (t, ct) = decode_full(&sample_code(6, 2, &mut rng).unwrap()).unwrap();
            let po = sample_order(&t, &ct, &mut rng);
            let (d1, s1) = greedy_dag_given_order(&t, &po, &cache);
            let (d2, s2) = greedy_dag_on_demand(&t, &po, &memo);
            assert!((s1 - s2).abs() < 1e-9);
            assert_eq!(d1, d2);
        }
    }
}
