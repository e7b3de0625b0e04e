//! Foundational graph types: undirected graphs with bitset adjacency, DAGs
//! as per-node parent sets, elimination orders, and exact treewidth for
//! small graphs via the subset dynamic program.
//!
//! Nodes are dense indices `0..n`. All types are immutable values after
//! construction; operations return new values.

use thiserror::Error;

/// Largest node count accepted by [`treewidth_exact`] (the subset DP walks
/// `2^n` states).
pub const TREEWIDTH_EXACT_MAX_NODES: usize = 16;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("instance too large: {what} supports up to {limit} nodes, got {n}")]
    InstanceTooLarge {
        what: &'static str,
        limit: usize,
        n: usize,
    },
    #[error("node index {node} out of range for graph of {n} nodes")]
    NodeOutOfRange { node: u32, n: usize },
    #[error("self-loop at node {0} is not allowed")]
    SelfLoop(u32),
    #[error("parent relation contains a directed cycle")]
    Cyclic,
    #[error("order is not a permutation of 0..{0}")]
    NotAPermutation(usize),
}

/// Simple undirected graph over nodes `0..n` with bitset rows.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct UndirectedGraph {
    n: usize,
    words: usize,
    adj: Vec<u64>,
}

impl std::fmt::Debug for UndirectedGraph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "UndirectedGraph(n={}, edges={:?})", self.n, self.edges())
    }
}

impl UndirectedGraph {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "graph needs at least one node");
        let words = n.div_ceil(64);
        UndirectedGraph {
            n,
            words,
            adj: vec![0u64; n * words],
        }
    }

    /// Complete graph on `n` nodes.
    pub fn complete(n: usize) -> Self {
        let mut g = UndirectedGraph::new(n);
        for i in 0..n as u32 {
            for j in (i + 1)..n as u32 {
                g.add_edge(i, j);
            }
        }
        g
    }

    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Self {
        let mut g = UndirectedGraph::new(n);
        for &(u, v) in edges {
            g.add_edge(u, v);
        }
        g
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn row(&self, i: u32) -> &[u64] {
        let i = i as usize;
        &self.adj[i * self.words..(i + 1) * self.words]
    }

    pub fn add_edge(&mut self, u: u32, v: u32) {
        assert!(u != v, "self-loop at {u}");
        assert!((u as usize) < self.n && (v as usize) < self.n);
        self.adj[u as usize * self.words + v as usize / 64] |= 1 << (v % 64);
        self.adj[v as usize * self.words + u as usize / 64] |= 1 << (u % 64);
    }

    #[inline]
    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.adj[u as usize * self.words + v as usize / 64] >> (v % 64) & 1 == 1
    }

    pub fn degree(&self, u: u32) -> usize {
        self.row(u).iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn neighbors(&self, u: u32) -> impl Iterator<Item = u32> + '_ {
        let row = self.row(u);
        row.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let b = w.trailing_zeros();
                    w &= w - 1;
                    Some(wi as u32 * 64 + b)
                }
            })
        })
    }

    /// Unordered edge list, `(u, v)` with `u < v`, ascending.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for u in 0..self.n as u32 {
            for v in self.neighbors(u) {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        let twice: usize = (0..self.n as u32).map(|u| self.degree(u)).sum();
        twice / 2
    }

    /// True iff the given nodes are pairwise adjacent.
    pub fn is_clique(&self, nodes: &[u32]) -> bool {
        for (a, &u) in nodes.iter().enumerate() {
            for &v in &nodes[a + 1..] {
                if !self.has_edge(u, v) {
                    return false;
                }
            }
        }
        true
    }

    /// Relabels nodes: node `i` becomes `perm[i]`.
    pub fn relabel(&self, perm: &[u32]) -> UndirectedGraph {
        let mut g = UndirectedGraph::new(self.n);
        for (u, v) in self.edges() {
            g.add_edge(perm[u as usize], perm[v as usize]);
        }
        g
    }
}

/// Directed acyclic graph stored as per-node sorted parent sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dag {
    n: usize,
    parents: Vec<Vec<u32>>,
}

impl Dag {
    /// Validates ranges, self-parenting and acyclicity.
    pub fn new(n: usize, mut parents: Vec<Vec<u32>>) -> Result<Self, GraphError> {
        assert_eq!(parents.len(), n);
        for (i, ps) in parents.iter_mut().enumerate() {
            ps.sort_unstable();
            ps.dedup();
            for &p in ps.iter() {
                if p as usize >= n {
                    return Err(GraphError::NodeOutOfRange { node: p, n });
                }
                if p as usize == i {
                    return Err(GraphError::SelfLoop(p));
                }
            }
        }
        let dag = Dag { n, parents };
        if dag.topological_order().is_none() {
            return Err(GraphError::Cyclic);
        }
        Ok(dag)
    }

    pub fn empty(n: usize) -> Self {
        Dag {
            n,
            parents: vec![Vec::new(); n],
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn parents(&self, i: u32) -> &[u32] {
        &self.parents[i as usize]
    }

    pub fn parent_sets(&self) -> &[Vec<u32>] {
        &self.parents
    }

    pub fn arc_count(&self) -> usize {
        self.parents.iter().map(|p| p.len()).sum()
    }

    /// Kahn topological order (parents before children), or `None` on a cycle.
    pub fn topological_order(&self) -> Option<Vec<u32>> {
        let mut indeg: Vec<usize> = self.parents.iter().map(|p| p.len()).collect();
        let mut children = vec![Vec::new(); self.n];
        for (i, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                children[p as usize].push(i as u32);
            }
        }
        let mut queue: Vec<u32> = (0..self.n as u32)
            .filter(|&i| indeg[i as usize] == 0)
            .collect();
        let mut order = Vec::with_capacity(self.n);
        let mut head = 0;
        while head < queue.len() {
            let v = queue[head];
            head += 1;
            order.push(v);
            for &c in &children[v as usize] {
                indeg[c as usize] -= 1;
                if indeg[c as usize] == 0 {
                    queue.push(c);
                }
            }
        }
        (order.len() == self.n).then_some(order)
    }
}

/// A linear ordering of the nodes; position in `order` is elimination time.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EliminationOrder {
    order: Vec<u32>,
}

impl EliminationOrder {
    pub fn new(order: Vec<u32>, n: usize) -> Result<Self, GraphError> {
        if order.len() != n {
            return Err(GraphError::NotAPermutation(n));
        }
        let mut seen = vec![false; n];
        for &v in &order {
            if v as usize >= n || seen[v as usize] {
                return Err(GraphError::NotAPermutation(n));
            }
            seen[v as usize] = true;
        }
        Ok(EliminationOrder { order })
    }

    #[inline]
    pub fn as_slice(&self) -> &[u32] {
        &self.order
    }

    /// `position[v]` = index of `v` in the order.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0usize; self.order.len()];
        for (t, &v) in self.order.iter().enumerate() {
            pos[v as usize] = t;
        }
        pos
    }
}

/// Moral graph: arcs undirected plus an edge between every pair of nodes
/// sharing a child.
pub fn moral_graph(d: &Dag) -> UndirectedGraph {
    let mut g = UndirectedGraph::new(d.n());
    for i in 0..d.n() as u32 {
        let ps = d.parents(i);
        for &p in ps {
            g.add_edge(p, i);
        }
        for (a, &p) in ps.iter().enumerate() {
            for &q in &ps[a + 1..] {
                g.add_edge(p, q);
            }
        }
    }
    g
}

/// Eliminates nodes in the given order, returning the filled (chordal) graph
/// and the width (max count of higher-ordered neighbors at elimination time).
///
/// Nodes are processed strictly in the given order; no reordering.
pub fn eliminate(g: &UndirectedGraph, order: &EliminationOrder) -> (UndirectedGraph, usize) {
    let n = g.n();
    debug_assert_eq!(order.as_slice().len(), n);
    let mut work = g.clone();
    let mut eliminated = vec![false; n];
    let mut width = 0usize;
    for &v in order.as_slice() {
        let later: Vec<u32> = work
            .neighbors(v)
            .filter(|&u| !eliminated[u as usize])
            .collect();
        width = width.max(later.len());
        for (a, &x) in later.iter().enumerate() {
            for &y in &later[a + 1..] {
                work.add_edge(x, y);
            }
        }
        eliminated[v as usize] = true;
    }
    (work, width)
}

/// True iff every node's higher-ordered neighbors are pairwise adjacent.
pub fn is_perfect_elimination_order(g: &UndirectedGraph, order: &EliminationOrder) -> bool {
    let pos = order.positions();
    for &v in order.as_slice() {
        let later: Vec<u32> = g
            .neighbors(v)
            .filter(|&u| pos[u as usize] > pos[v as usize])
            .collect();
        if !g.is_clique(&later) {
            return false;
        }
    }
    true
}

/// Exact treewidth with an optimal elimination order as witness.
///
/// Subset dynamic program: `dp[S]` is the best achievable width over
/// elimination prefixes with vertex set `S`, where eliminating `v` after
/// prefix `S` costs the number of vertices outside `S ∪ {v}` reachable from
/// `v` through `S`. Limited to [`TREEWIDTH_EXACT_MAX_NODES`].
pub fn treewidth_exact(g: &UndirectedGraph) -> Result<(usize, EliminationOrder), GraphError> {
    let n = g.n();
    if n > TREEWIDTH_EXACT_MAX_NODES {
        return Err(GraphError::InstanceTooLarge {
            what: "treewidth_exact",
            limit: TREEWIDTH_EXACT_MAX_NODES,
            n,
        });
    }
    let adj: Vec<u32> = (0..n as u32)
        .map(|v| g.neighbors(v).fold(0u32, |m, u| m | (1 << u)))
        .collect();
    let full: u32 = if n == 32 { u32::MAX } else { (1 << n) - 1 };

    // Neighbors of v in the graph where the vertices of `prefix` have been
    // eliminated: vertices outside prefix reachable via paths through it.
    let reach_degree = |prefix: u32, v: u32| -> u32 {
        let mut reached = adj[v as usize];
        let mut frontier = reached & prefix;
        while frontier != 0 {
            let x = frontier.trailing_zeros();
            frontier &= frontier - 1;
            let add = adj[x as usize] & !reached;
            reached |= add;
            frontier |= add & prefix;
        }
        (reached & !prefix & !(1 << v)).count_ones()
    };

    let size = 1usize << n;
    let mut dp = vec![u8::MAX; size];
    let mut choice = vec![u8::MAX; size];
    dp[0] = 0;
    for s in 0..size as u32 {
        if dp[s as usize] == u8::MAX {
            continue;
        }
        let cur = dp[s as usize];
        let mut rest = full & !s;
        while rest != 0 {
            let v = rest.trailing_zeros();
            rest &= rest - 1;
            let cost = reach_degree(s, v) as u8;
            let val = cur.max(cost);
            let t = (s | (1 << v)) as usize;
            if val < dp[t] {
                dp[t] = val;
                choice[t] = v as u8;
            }
        }
    }

    let mut order = Vec::with_capacity(n);
    let mut s = full;
    while s != 0 {
        let v = choice[s as usize] as u32;
        order.push(v);
        s &= !(1 << v);
    }
    order.reverse();
    let witness = EliminationOrder::new(order, n).expect("dp reconstruction is a permutation");
    Ok((dp[full as usize] as usize, witness))
}

/// True iff the moral graph of `d` has treewidth at most `w`.
pub fn dag_treewidth_at_most(d: &Dag, w: usize) -> Result<bool, GraphError> {
    let (tw, _) = treewidth_exact(&moral_graph(d))?;
    Ok(tw <= w)
}

/// Witnessed variant for graphs beyond the exact-DP limit: checks that the
/// supplied order eliminates the moral graph with width at most `w`.
pub fn dag_treewidth_at_most_with_witness(d: &Dag, w: usize, order: &EliminationOrder) -> bool {
    let (_, width) = eliminate(&moral_graph(d), order);
    width <= w
}
