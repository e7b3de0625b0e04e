//! k-trees (maximal graphs of treewidth k), their recognition, counting,
//! clique-tree extraction, exhaustive enumeration, and the Dandelion-code
//! bijection used for uniform sampling.

mod code;

pub use code::{decode, decode_full, encode, sample_code, DandelionCode};

use num_bigint::BigUint;
use thiserror::Error;

use crate::graph::UndirectedGraph;

#[derive(Debug, Error)]
pub enum KtreeError {
    #[error("invalid (n, k) = ({n}, {k}): need 1 <= k <= n-2")]
    Bounds { n: usize, k: usize },
    #[error("malformed Dandelion code: {0}")]
    MalformedCode(String),
    #[error("not a k-tree: {0}")]
    NotAKtree(String),
    #[error("instance too large: {0} k-trees exceed the enumeration limit {1}")]
    EnumerationTooLarge(BigUint, usize),
}

/// A maximal graph of treewidth k.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KTree {
    pub graph: UndirectedGraph,
    pub k: usize,
}

impl KTree {
    pub fn new(graph: UndirectedGraph, k: usize) -> Result<Self, KtreeError> {
        if !is_ktree(&graph, k) {
            return Err(KtreeError::NotAKtree(format!(
                "graph on {} nodes is not a {k}-tree",
                graph.n()
            )));
        }
        Ok(KTree { graph, k })
    }

    /// For internal constructions that are k-trees by construction.
    pub(crate) fn new_unchecked(graph: UndirectedGraph, k: usize) -> Self {
        KTree { graph, k }
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    /// k·n − k(k+1)/2, the edge count of every k-tree on n nodes.
    pub fn expected_edge_count(n: usize, k: usize) -> usize {
        k * n - k * (k + 1) / 2
    }
}

/// Rooted bag structure of a k-tree: n−k bags of size k+1, a parent pointer
/// per bag, and the vertex-attachment steps that replay the construction.
#[derive(Clone, Debug)]
pub struct CliqueTree {
    pub bags: Vec<Vec<u32>>,
    pub parent: Vec<Option<usize>>,
    /// (vertex, base k-clique) per construction step after the root bag.
    pub attach_order: Vec<(u32, Vec<u32>)>,
    pub k: usize,
}

impl CliqueTree {
    /// Builds the bag structure from a root bag and attachment steps. Each
    /// step's bag hangs off the bag of the newest vertex in its base clique.
    pub(crate) fn from_steps(
        n: usize,
        k: usize,
        root_bag: Vec<u32>,
        steps: Vec<(u32, Vec<u32>)>,
    ) -> CliqueTree {
        debug_assert_eq!(root_bag.len(), k + 1);
        let mut bags = vec![root_bag.clone()];
        let mut parent = vec![None];
        // bag index holding each vertex's attachment (root-bag vertices -> 0)
        let mut home = vec![0usize; n];
        for (v, base) in &steps {
            let mut bag = base.clone();
            bag.push(*v);
            bag.sort_unstable();
            let parent_bag = base.iter().map(|&u| home[u as usize]).max().unwrap();
            bags.push(bag);
            parent.push(Some(parent_bag));
            home[*v as usize] = bags.len() - 1;
        }
        CliqueTree {
            bags,
            parent,
            attach_order: steps,
            k,
        }
    }

    pub fn bag_count(&self) -> usize {
        self.bags.len()
    }

    /// Children lists derived from the parent pointers.
    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut ch = vec![Vec::new(); self.bags.len()];
        for (b, p) in self.parent.iter().enumerate() {
            if let Some(p) = p {
                ch[*p].push(b);
            }
        }
        ch
    }

    /// A construction-order elimination witness: attached vertices in reverse
    /// attachment order, then the root bag.
    pub fn elimination_witness(&self, n: usize) -> Vec<u32> {
        let mut order: Vec<u32> = self.attach_order.iter().rev().map(|(v, _)| *v).collect();
        let mut in_order = vec![false; n];
        for &v in &order {
            in_order[v as usize] = true;
        }
        for &v in self.bags[0].iter() {
            if !in_order[v as usize] {
                order.push(v);
            }
        }
        order
    }
}

/// Definition-chasing recognition: repeatedly remove a degree-k vertex whose
/// neighborhood is a clique until a (k+1)-clique remains.
pub fn is_ktree(g: &UndirectedGraph, k: usize) -> bool {
    let n = g.n();
    if k < 1 || n < k + 1 {
        return false;
    }
    if g.edge_count() != KTree::expected_edge_count(n, k) {
        return false;
    }
    let mut adj: Vec<Vec<u32>> = (0..n as u32).map(|v| g.neighbors(v).collect()).collect();
    let mut alive = vec![true; n];
    let mut remaining = n;
    while remaining > k + 1 {
        let mut pick = None;
        for v in 0..n as u32 {
            // clique test against the original adjacency: edges between
            // still-alive vertices are never removed by peeling
            if alive[v as usize] && adj[v as usize].len() == k && g.is_clique(&adj[v as usize]) {
                pick = Some(v);
                break;
            }
        }
        let Some(v) = pick else { return false };
        alive[v as usize] = false;
        let nbs = adj[v as usize].clone();
        for u in nbs {
            adj[u as usize].retain(|&x| x != v);
        }
        adj[v as usize].clear();
        remaining -= 1;
    }
    let rest: Vec<u32> = (0..n as u32).filter(|&v| alive[v as usize]).collect();
    g.is_clique(&rest)
}

/// |T_{n,k}| = C(n,k) · (k(n−k)+1)^(n−k−2), exactly; n = k+1 gives 1.
pub fn count_ktrees(n: usize, k: usize) -> BigUint {
    if n == k + 1 {
        return BigUint::from(1u32);
    }
    assert!(k >= 1 && n >= k + 2, "count_ktrees needs n >= k+1");
    let mut binom = BigUint::from(1u32);
    for i in 0..k {
        binom = binom * BigUint::from((n - i) as u64) / BigUint::from((i + 1) as u64);
    }
    let base = BigUint::from((k * (n - k) + 1) as u64);
    binom * base.pow((n - k - 2) as u32)
}

pub const ENUMERATION_LIMIT_DEFAULT: usize = 100_000;

/// All distinct k-trees on n nodes, each exactly once, by exhaustive
/// enumeration of the code space.
pub fn enumerate_ktrees(n: usize, k: usize) -> Result<Vec<KTree>, KtreeError> {
    enumerate_ktrees_limited(n, k, ENUMERATION_LIMIT_DEFAULT)
}

pub fn enumerate_ktrees_limited(
    n: usize,
    k: usize,
    limit: usize,
) -> Result<Vec<KTree>, KtreeError> {
    let total = count_ktrees(n, k);
    if total > BigUint::from(limit as u64) {
        return Err(KtreeError::EnumerationTooLarge(total, limit));
    }
    if n == k + 1 {
        return Ok(vec![KTree::new_unchecked(UndirectedGraph::complete(n), k)]);
    }
    let mut out = Vec::new();
    for code in enumerate_codes(n, k) {
        out.push(decode(&code)?);
    }
    Ok(out)
}

/// Every valid code for (n, k), in lexicographic order.
pub fn enumerate_codes(n: usize, k: usize) -> Vec<DandelionCode> {
    assert!(k >= 1 && n >= k + 2);
    let m = n - k;
    let span = k * m + 1;
    let eps = n as u32;
    let pair_of = |r: usize| -> (u32, u32) {
        if r == 0 {
            (0, eps)
        } else {
            (((r - 1) / k + 1) as u32, ((r - 1) % k + 1) as u32)
        }
    };
    let slots = n - k - 2;
    let mut out = Vec::new();
    let mut q_sel: Vec<u32> = (0..k as u32).collect();
    loop {
        let mut digits = vec![0usize; slots];
        loop {
            out.push(DandelionCode {
                n,
                k,
                q: q_sel.clone(),
                s: digits.iter().map(|&d| pair_of(d)).collect(),
            });
            // increment mixed-radix digits
            let mut i = 0;
            while i < slots {
                digits[i] += 1;
                if digits[i] < span {
                    break;
                }
                digits[i] = 0;
                i += 1;
            }
            if i == slots {
                break;
            }
        }
        // next k-combination of 0..n
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if q_sel[i] as usize != i + n - k {
                q_sel[i] += 1;
                for j in i + 1..k {
                    q_sel[j] = q_sel[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Canonical clique tree of a k-tree: bags are its maximal cliques, rooted at
/// the lexicographically smallest bag, with attachment steps replaying the
/// construction from that root.
pub fn clique_tree(t: &KTree) -> Result<CliqueTree, KtreeError> {
    let g = &t.graph;
    let (n, k) = (g.n(), t.k);
    if !is_ktree(g, k) {
        return Err(KtreeError::NotAKtree("clique_tree input".into()));
    }
    if n == k + 1 {
        let bag: Vec<u32> = (0..n as u32).collect();
        return Ok(CliqueTree {
            bags: vec![bag],
            parent: vec![None],
            attach_order: Vec::new(),
            k,
        });
    }

    // peel smallest simplicial vertices to find each vertex's attachment
    // clique and the final base (k+1)-clique
    let mut adj: Vec<Vec<u32>> = (0..n as u32).map(|v| g.neighbors(v).collect()).collect();
    let mut alive = vec![true; n];
    let mut peel_cliques: Vec<Option<Vec<u32>>> = vec![None; n];
    let mut remaining = n;
    while remaining > k + 1 {
        let mut pick = None;
        for v in 0..n as u32 {
            if alive[v as usize] && adj[v as usize].len() == k && g.is_clique(&adj[v as usize]) {
                pick = Some(v);
                break;
            }
        }
        let v = pick.expect("validated k-tree peels");
        let mut cl = adj[v as usize].clone();
        cl.sort_unstable();
        peel_cliques[v as usize] = Some(cl);
        alive[v as usize] = false;
        let nbs = adj[v as usize].clone();
        for u in nbs {
            adj[u as usize].retain(|&x| x != v);
        }
        remaining -= 1;
    }
    let base: Vec<u32> = (0..n as u32).filter(|&v| alive[v as usize]).collect();

    // assemble bags: the base clique plus one bag per peeled vertex
    let mut bags: Vec<Vec<u32>> = vec![base.clone()];
    let mut owners: Vec<u32> = vec![u32::MAX]; // private vertex per bag
    for v in 0..n as u32 {
        if let Some(cl) = &peel_cliques[v as usize] {
            let mut bag = cl.clone();
            bag.push(v);
            bag.sort_unstable();
            bags.push(bag);
            owners.push(v);
        }
    }
    // adjacency between bags sharing k vertices, following the construction:
    // a peeled vertex's bag connects to the bag of the newest vertex of its
    // attachment clique (or the base bag)
    let mut bag_of_vertex: Vec<usize> = vec![0; n];
    // peel order is reverse construction order: rebuild construction order
    let mut construction: Vec<u32> = (0..n as u32)
        .filter(|&v| peel_cliques[v as usize].is_some())
        .collect();
    // vertices peeled earlier were attached later; determine true order by
    // replaying attachability from the base
    construction.sort_unstable();
    let mut placed: Vec<bool> = (0..n).map(|v| alive[v]).collect();
    let mut ordered_steps: Vec<u32> = Vec::new();
    let mut pending: Vec<u32> = construction;
    while !pending.is_empty() {
        let mut progressed = false;
        let mut rest = Vec::new();
        for &v in &pending {
            let cl = peel_cliques[v as usize].as_ref().unwrap();
            if cl.iter().all(|&u| placed[u as usize]) {
                ordered_steps.push(v);
                placed[v as usize] = true;
                progressed = true;
            } else {
                rest.push(v);
            }
        }
        assert!(progressed, "attachment replay must progress");
        pending = rest;
    }
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let bag_index_of_owner: std::collections::HashMap<u32, usize> = owners
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, &v)| (v, i))
        .collect();
    // a bag hangs off the bag of the construction-newest vertex in its
    // attachment clique, which is guaranteed to contain the whole clique
    let mut placed_step = vec![0usize; n];
    for (s, &v) in ordered_steps.iter().enumerate() {
        placed_step[v as usize] = s + 1;
    }
    for &v in &ordered_steps {
        let cl = peel_cliques[v as usize].as_ref().unwrap();
        let newest = *cl.iter().max_by_key(|&&u| placed_step[u as usize]).unwrap();
        let parent_bag = if placed_step[newest as usize] == 0 {
            0
        } else {
            bag_of_vertex[newest as usize]
        };
        let this_bag = bag_index_of_owner[&v];
        edges.push((parent_bag, this_bag));
        bag_of_vertex[v as usize] = this_bag;
    }

    // re-root at the lexicographically smallest bag and emit deterministic
    // breadth-first attachment steps
    let root = (0..bags.len())
        .min_by(|&a, &b| bags[a].cmp(&bags[b]))
        .unwrap();
    let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); bags.len()];
    for &(a, b) in &edges {
        nbrs[a].push(b);
        nbrs[b].push(a);
    }
    for list in nbrs.iter_mut() {
        list.sort_by(|&a, &b| bags[a].cmp(&bags[b]));
    }
    let mut order = vec![root];
    let mut parent_of = vec![None; bags.len()];
    let mut visited = vec![false; bags.len()];
    visited[root] = true;
    let mut head = 0;
    while head < order.len() {
        let b = order[head];
        head += 1;
        for &c in &nbrs[b] {
            if !visited[c] {
                visited[c] = true;
                parent_of[c] = Some(b);
                order.push(c);
            }
        }
    }
    assert_eq!(order.len(), bags.len());

    let mut new_bags = Vec::with_capacity(bags.len());
    let mut new_parent = Vec::with_capacity(bags.len());
    let mut new_index = vec![usize::MAX; bags.len()];
    let mut steps = Vec::new();
    for (ni, &b) in order.iter().enumerate() {
        new_index[b] = ni;
        new_bags.push(bags[b].clone());
        match parent_of[b] {
            None => new_parent.push(None),
            Some(p) => {
                new_parent.push(Some(new_index[p]));
                let base: Vec<u32> = bags[b]
                    .iter()
                    .copied()
                    .filter(|v| bags[p].contains(v))
                    .collect();
                let private = bags[b]
                    .iter()
                    .copied()
                    .find(|v| !bags[p].contains(v))
                    .expect("child bag has one private vertex");
                debug_assert_eq!(base.len(), k);
                steps.push((private, base));
            }
        }
    }
    Ok(CliqueTree {
        bags: new_bags,
        parent: new_parent,
        attach_order: steps,
        k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::treewidth_exact;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    /// Independent generator: builds every k-tree by definition chasing
    /// (attach any unused vertex to any k-clique), deduplicated by edge set.
    fn gen_all_ktrees(n: usize, k: usize) -> HashSet<Vec<(u32, u32)>> {
        let mut out = HashSet::new();
        let verts: Vec<u32> = (0..n as u32).collect();
        // every (k+1)-subset as base clique
        let mut combo: Vec<usize> = (0..k + 1).collect();
        loop {
            let base: Vec<u32> = combo.iter().map(|&i| verts[i]).collect();
            let mut g = UndirectedGraph::new(n);
            for (i, &u) in base.iter().enumerate() {
                for &v in &base[i + 1..] {
                    g.add_edge(u, v);
                }
            }
            let used: Vec<bool> = (0..n as u32).map(|v| base.contains(&v)).collect();
            extend(&mut g, used, n, k, &mut out);
            // next combination
            let mut i = k + 1;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                if combo[i] != i + n - (k + 1) {
                    combo[i] += 1;
                    for j in i + 1..k + 1 {
                        combo[j] = combo[j - 1] + 1;
                    }
                    break;
                }
            }
        }

        fn extend(
            g: &mut UndirectedGraph,
            used: Vec<bool>,
            n: usize,
            k: usize,
            out: &mut HashSet<Vec<(u32, u32)>>,
        ) {
            if used.iter().all(|&u| u) {
                out.insert(g.edges());
                return;
            }
            // all k-cliques of the current graph among used vertices
            let used_verts: Vec<u32> = (0..n as u32).filter(|&v| used[v as usize]).collect();
            let cliques = k_subsets_cliques(g, &used_verts, k);
            for v in 0..n as u32 {
                if used[v as usize] {
                    continue;
                }
                for cl in &cliques {
                    let mut g2 = g.clone();
                    for &u in cl {
                        g2.add_edge(v, u);
                    }
                    let mut used2 = used.clone();
                    used2[v as usize] = true;
                    extend(&mut g2, used2, n, k, out);
                }
            }
        }

        fn k_subsets_cliques(g: &UndirectedGraph, verts: &[u32], k: usize) -> Vec<Vec<u32>> {
            let mut out = Vec::new();
            let mut cur = Vec::new();
            subsets(g, verts, 0, k, &mut cur, &mut out);
            return out;

            fn subsets(
                g: &UndirectedGraph,
                verts: &[u32],
                start: usize,
                k: usize,
                cur: &mut Vec<u32>,
                out: &mut Vec<Vec<u32>>,
            ) {
                if cur.len() == k {
                    out.push(cur.clone());
                    return;
                }
                for i in start..verts.len() {
                    let v = verts[i];
                    if cur.iter().all(|&u| g.has_edge(u, v)) {
                        cur.push(v);
                        subsets(g, verts, i + 1, k, cur, out);
                        cur.pop();
                    }
                }
            }
        }
    }

    #[test]
    fn counting_formula_known_values() {
        assert_eq!(count_ktrees(5, 2), BigUint::from(70u32));
        assert_eq!(count_ktrees(4, 1), BigUint::from(16u32)); // Cayley 4^2
        assert_eq!(count_ktrees(3, 2), BigUint::from(1u32)); // n = k+1
        assert_eq!(count_ktrees(6, 1), BigUint::from(1296u32)); // 6^4
        assert_eq!(count_ktrees(3, 1), BigUint::from(3u32));
    }

    #[test]
    fn enumeration_matches_independent_generator() {
        for (n, k) in [(3, 1), (4, 1), (5, 1), (4, 2), (5, 2), (6, 2), (5, 3), (6, 3), (6, 4)] {
            let via_codes = enumerate_ktrees(n, k).unwrap();
            let mut seen = HashSet::new();
            for t in &via_codes {
                assert!(is_ktree(&t.graph, k), "decode output must be a k-tree");
                assert_eq!(t.graph.edge_count(), KTree::expected_edge_count(n, k));
                assert!(seen.insert(t.graph.edges()), "codes must decode distinctly");
            }
            let independent = gen_all_ktrees(n, k);
            assert_eq!(seen, independent, "(n,k)=({n},{k})");
            assert_eq!(
                BigUint::from(seen.len() as u64),
                count_ktrees(n, k),
                "(n,k)=({n},{k})"
            );
        }
    }

    #[test]
    fn round_trip_random_codes() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..800 {
            let n = rng.random_range(5..40usize);
            let k = rng.random_range(1..=8.min(n - 2));
            let code = sample_code(n, k, &mut rng).unwrap();
            let t = decode(&code).unwrap();
            assert_eq!(t.graph.edge_count(), KTree::expected_edge_count(n, k));
            let back = encode(&t).unwrap();
            assert_eq!(back, code);
        }
    }

    #[test]
    fn round_trip_from_graph_side() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        for _ in 0..300 {
            let n = rng.random_range(5..25usize);
            let k = rng.random_range(1..=6.min(n - 2));
            let t = decode(&sample_code(n, k, &mut rng).unwrap()).unwrap();
            let c = encode(&t).unwrap();
            let t2 = decode(&c).unwrap();
            assert_eq!(t.graph, t2.graph);
        }
    }

    #[test]
    fn worked_example_decodes_to_valid_3_tree() {
        let code = DandelionCode {
            n: 11,
            k: 3,
            q: vec![2, 3, 9],
            s: vec![(0, 11), (2, 1), (8, 3), (8, 2), (1, 3), (5, 3)],
        };
        let t = decode(&code).unwrap();
        assert!(is_ktree(&t.graph, 3));
        assert_eq!(t.graph.edge_count(), KTree::expected_edge_count(11, 3));
    }

    #[test]
    fn smallest_case_has_empty_pair_list() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let code = sample_code(5, 3, &mut rng).unwrap();
        assert!(code.s.is_empty());
        let t = decode(&code).unwrap();
        assert_eq!(encode(&t).unwrap(), code);
    }

    #[test]
    fn sample_code_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            sample_code(4, 3, &mut rng),
            Err(KtreeError::Bounds { .. })
        ));
        assert!(matches!(
            sample_code(4, 0, &mut rng),
            Err(KtreeError::Bounds { .. })
        ));
    }

    #[test]
    fn is_ktree_cases() {
        assert!(is_ktree(&UndirectedGraph::complete(4), 3)); // K_{k+1}
        let tree = UndirectedGraph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (2, 4)]);
        assert!(is_ktree(&tree, 1));
        let c4 = UndirectedGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        assert!(!is_ktree(&c4, 2));
        assert!(!is_ktree(&UndirectedGraph::complete(4), 2));
    }

    #[test]
    fn encode_rejects_non_ktrees() {
        let c4 = UndirectedGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        let fake = KTree {
            graph: c4,
            k: 2,
        };
        assert!(matches!(encode(&fake), Err(KtreeError::NotAKtree(_))));
    }

    #[test]
    fn decoded_ktrees_have_treewidth_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let n = rng.random_range(5..10usize);
            let k = rng.random_range(1..=3.min(n - 2));
            let t = decode(&sample_code(n, k, &mut rng).unwrap()).unwrap();
            assert_eq!(treewidth_exact(&t.graph).unwrap().0, k);
        }
    }

    #[test]
    fn clique_tree_shapes() {
        // single bag for the (k+1)-clique
        let t = KTree::new(UndirectedGraph::complete(4), 3).unwrap();
        let ct = clique_tree(&t).unwrap();
        assert_eq!(ct.bag_count(), 1);
        assert!(ct.attach_order.is_empty());

        // a 1-tree's bags are its edges
        let tree = UndirectedGraph::from_edges(4, &[(0, 1), (1, 2), (1, 3)]);
        let t = KTree::new(tree.clone(), 1).unwrap();
        let ct = clique_tree(&t).unwrap();
        let mut bags: Vec<Vec<u32>> = ct.bags.clone();
        bags.sort();
        let mut edges: Vec<Vec<u32>> = tree.edges().iter().map(|&(a, b)| vec![a, b]).collect();
        edges.sort();
        assert_eq!(bags, edges);
    }

    #[test]
    fn clique_tree_structure_on_random_ktrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..1000 {
            let n = rng.random_range(5..20usize);
            let k = rng.random_range(1..=4.min(n - 2));
            let (t, sampled_ct) = decode_full(&sample_code(n, k, &mut rng).unwrap()).unwrap();
            for ct in [clique_tree(&t).unwrap(), sampled_ct] {
                assert_eq!(ct.bag_count(), n - k);
                // root is the lexicographically smallest bag (canonical form only)
                // every edge of the k-tree lies inside some bag
                for (u, v) in t.graph.edges() {
                    assert!(
                        ct.bags.iter().any(|b| b.contains(&u) && b.contains(&v)),
                        "edge ({u},{v}) not covered"
                    );
                }
                // running intersection: bags containing any vertex form a subtree
                for v in 0..n as u32 {
                    let holders: Vec<usize> = (0..ct.bags.len())
                        .filter(|&b| ct.bags[b].contains(&v))
                        .collect();
                    let set: HashSet<usize> = holders.iter().copied().collect();
                    let inside_links = holders
                        .iter()
                        .filter(|&&b| {
                            ct.parent[b].map(|p| set.contains(&p)).unwrap_or(false)
                        })
                        .count();
                    assert_eq!(inside_links, holders.len() - 1, "RIP violated for {v}");
                }
                // parent bags share exactly k vertices
                for (b, p) in ct.parent.iter().enumerate() {
                    if let Some(p) = p {
                        let share = ct.bags[b]
                            .iter()
                            .filter(|v| ct.bags[*p].contains(v))
                            .count();
                        assert_eq!(share, k);
                    }
                }
            }
        }
    }

    #[test]
    fn canonical_clique_tree_roots_at_lex_smallest_bag() {
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        for _ in 0..50 {
            let n = rng.random_range(5..12usize);
            let k = rng.random_range(1..=3.min(n - 2));
            let t = decode(&sample_code(n, k, &mut rng).unwrap()).unwrap();
            let ct = clique_tree(&t).unwrap();
            let min_bag = ct.bags.iter().min().unwrap();
            assert_eq!(&ct.bags[0], min_bag);
        }
    }

    #[test]
    fn enumeration_guard() {
        assert!(matches!(
            enumerate_ktrees_limited(30, 4, 1000),
            Err(KtreeError::EnumerationTooLarge(..))
        ));
    }

    #[test]
    fn uniformity_chi_square_smoke() {
        // acceptance runs the full 70k-sample test; this is a smaller gate
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut counts: std::collections::HashMap<Vec<(u32, u32)>, u64> =
            std::collections::HashMap::new();
        let draws = 21_000u64;
        for _ in 0..draws {
            let t = decode(&sample_code(5, 2, &mut rng).unwrap()).unwrap();
            *counts.entry(t.graph.edges()).or_insert(0) += 1;
        }
        assert_eq!(counts.len(), 70);
        let expect = draws as f64 / 70.0;
        let chi2: f64 = counts
            .values()
            .map(|&c| (c as f64 - expect).powi(2) / expect)
            .sum();
        let crit = ChiSquared::new(69.0).unwrap().inverse_cdf(0.999);
        assert!(chi2 < crit, "chi2 {chi2} >= {crit}");
    }
}
