//! Dandelion codes: the pair (Q, S) in bijection with labeled k-trees.
//!
//! The code space for n nodes and width k is
//!
//! ```text
//!   Q : a k-subset of the nodes,
//!   S : a list of n-k-2 pairs, each drawn from the (k(n-k)+1)-element set
//!       {(0, eps)} ∪ { (a, b) : 1 <= a <= n-k, 1 <= b <= k },
//! ```
//!
//! whose cardinality matches the number of labeled k-trees exactly, so
//! uniform sampling of codes gives uniform k-trees.
//!
//! Decoding pipeline: the pair list is unfolded (a Foata-style cycle
//! correspondence anchored at the highest characteristic node) into the
//! characteristic tree of a Rényi k-tree — a k-tree whose top k labels form
//! the root clique — which is materialized by replaying attachments, and a
//! label involution determined by Q moves the root clique onto Q. Encoding
//! runs the same steps backwards, rooting at the neighborhood of the
//! k-tree's maximum-labeled simplicial vertex; that choice is unique per
//! k-tree and recoverable after relabeling, which is what makes the map
//! one-to-one.

use rand::prelude::*;

use super::{CliqueTree, KTree, KtreeError};
use crate::graph::UndirectedGraph;

/// The (Q, S) pair coding a k-tree. In stored pairs the label sentinel
/// ε is represented as the value `n` (one past the largest node index).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DandelionCode {
    pub n: usize,
    pub k: usize,
    /// Sorted, distinct, of size k.
    pub q: Vec<u32>,
    /// n-k-2 pairs; first component in [0, n-k], second in {ε} ∪ [1, k].
    pub s: Vec<(u32, u32)>,
}

impl DandelionCode {
    /// The ε sentinel for this code's label components.
    pub fn eps(&self) -> u32 {
        self.n as u32
    }

    /// Textual form `n k | q1 … qk | (a1,b1) … (am,bm)` with `eps` for ε.
    pub fn to_text(&self) -> String {
        let q: Vec<String> = self.q.iter().map(|v| v.to_string()).collect();
        let eps = self.eps();
        let pairs: Vec<String> = self
            .s
            .iter()
            .map(|&(a, b)| {
                if b == eps {
                    format!("({a},eps)")
                } else {
                    format!("({a},{b})")
                }
            })
            .collect();
        format!("{} {} | {} | {}", self.n, self.k, q.join(" "), pairs.join(" "))
            .trim_end()
            .to_string()
    }

    pub fn from_text(text: &str) -> Result<Self, KtreeError> {
        let bad = |msg: &str| KtreeError::MalformedCode(msg.to_string());
        let mut sections = text.split('|');
        let head = sections.next().ok_or_else(|| bad("missing header"))?;
        let mut it = head.split_whitespace();
        let n: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("bad n"))?;
        let k: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("bad k"))?;
        let qsec = sections.next().ok_or_else(|| bad("missing Q section"))?;
        let mut q = Vec::new();
        for tok in qsec.split_whitespace() {
            q.push(tok.parse().map_err(|_| bad("bad Q element"))?);
        }
        let ssec = sections.next().unwrap_or("");
        if sections.next().is_some() {
            return Err(bad("too many sections"));
        }
        let mut s = Vec::new();
        for tok in ssec.split_whitespace() {
            let inner = tok
                .strip_prefix('(')
                .and_then(|t| t.strip_suffix(')'))
                .ok_or_else(|| bad("pair must be (a,b)"))?;
            let (a, b) = inner.split_once(',').ok_or_else(|| bad("pair must be (a,b)"))?;
            let a: u32 = a.trim().parse().map_err(|_| bad("bad pair component"))?;
            let b = b.trim();
            let b: u32 = if b == "eps" {
                n as u32
            } else {
                b.parse().map_err(|_| bad("bad pair component"))?
            };
            s.push((a, b));
        }
        let code = DandelionCode { n, k, q, s };
        code.validate()?;
        Ok(code)
    }

    pub fn validate(&self) -> Result<(), KtreeError> {
        let (n, k) = (self.n, self.k);
        if k < 1 || k + 2 > n {
            return Err(KtreeError::Bounds { n, k });
        }
        if self.q.len() != k
            || self.q.windows(2).any(|w| w[0] >= w[1])
            || self.q.iter().any(|&v| v as usize >= n)
        {
            return Err(KtreeError::MalformedCode("Q is not a sorted k-subset".into()));
        }
        let m = (n - k) as u32;
        if self.s.len() != n - k - 2 {
            return Err(KtreeError::MalformedCode(format!(
                "S has {} pairs, expected {}",
                self.s.len(),
                n - k - 2
            )));
        }
        let eps = self.eps();
        for &(a, b) in &self.s {
            let ok = (a == 0 && b == eps) || (a >= 1 && a <= m && b >= 1 && b <= k as u32);
            if !ok {
                return Err(KtreeError::MalformedCode(format!("invalid pair ({a},{b})")));
            }
        }
        Ok(())
    }
}

/// Pair token over characteristic-tree nodes; `target == 0` marks a root
/// child and carries no label.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Tok {
    target: u32,
    label: u32, // 0 = ε, else 1..=k
}

const EPS_TOK: Tok = Tok { target: 0, label: 0 };

/// Uniformly samples a code: Q uniform over k-subsets, each S entry uniform
/// over its (k(n-k)+1)-element domain.
pub fn sample_code(n: usize, k: usize, rng: &mut impl Rng) -> Result<DandelionCode, KtreeError> {
    if k < 1 || k + 2 > n {
        return Err(KtreeError::Bounds { n, k });
    }
    let mut q: Vec<u32> = rand::seq::index::sample(rng, n, k)
        .into_iter()
        .map(|v| v as u32)
        .collect();
    q.sort_unstable();
    let m = n - k;
    let span = (k * m + 1) as u32;
    let eps = n as u32;
    let s = (0..n - k - 2)
        .map(|_| {
            let r = rng.random_range(0..span);
            if r == 0 {
                (0, eps)
            } else {
                ((r - 1) / k as u32 + 1, (r - 1) % k as u32 + 1)
            }
        })
        .collect();
    Ok(DandelionCode { n, k, q, s })
}

/// Label involution that swaps Q onto the top-k labels pairwise (sorted
/// difference against sorted difference), fixing everything else.
pub(crate) fn swap_involution(n: usize, k: usize, q: &[u32]) -> Vec<u32> {
    let top: Vec<u32> = ((n - k) as u32..n as u32).collect();
    let a: Vec<u32> = q.iter().copied().filter(|v| !top.contains(v)).collect();
    let b: Vec<u32> = top.iter().copied().filter(|v| !q.contains(v)).collect();
    debug_assert_eq!(a.len(), b.len());
    let mut perm: Vec<u32> = (0..n as u32).collect();
    for (&x, &y) in a.iter().zip(&b) {
        perm[x as usize] = y;
        perm[y as usize] = x;
    }
    perm
}

// ---------------------------------------------------------------------------
// Foata-style fold/unfold between characteristic trees and token strings.
// ---------------------------------------------------------------------------

/// Folds the parent tokens of a characteristic tree on {0} ∪ [1, anchor]
/// into tokens for keys [1, anchor-1]. The path from the anchor to the root
/// becomes a set of cycles cut at left-to-right minima; the token pointing
/// at the root from the path's last node is dropped (it is always (0, ε)).
fn fold(d: &[Tok], anchor: usize) -> Vec<Tok> {
    debug_assert_eq!(d.len(), anchor + 1); // d[0] unused
    let mut path = vec![anchor as u32];
    loop {
        let last = *path.last().unwrap();
        let t = d[last as usize].target;
        if t == 0 {
            break;
        }
        path.push(t);
    }
    let interior = &path[1..];

    let mut e: Vec<Tok> = d[..anchor].to_vec(); // keys 0..=anchor-1 (0 unused)
    if interior.is_empty() {
        return e;
    }
    // Cut the interior word into cycles starting at each left-to-right
    // minimum; the closing key of a cycle receives the token that pointed at
    // the cycle's opener (the previous path node's token).
    let mut min = u32::MAX;
    let mut starts = Vec::new();
    for (i, &v) in interior.iter().enumerate() {
        if v < min {
            min = v;
            starts.push(i);
        }
    }
    starts.push(interior.len());
    for w in starts.windows(2) {
        let (a, b) = (w[0], w[1]);
        // cycle = interior[a..b]; its opener is interior[a]
        let closer = interior[b - 1];
        let prev_of_opener = if a == 0 { anchor as u32 } else { interior[a - 1] };
        e[closer as usize] = d[prev_of_opener as usize];
    }
    e
}

/// Inverse of [`fold`]: rebuilds parent tokens on {0} ∪ [1, anchor] from
/// tokens for keys [1, anchor-1]. Cycles among the keys are opened at their
/// minima, ordered by minimum descending, and strung back into the path from
/// the anchor to the root.
fn unfold(e: &[Tok], anchor: usize) -> Vec<Tok> {
    debug_assert_eq!(e.len(), anchor); // keys 1..=anchor-1
    let keys = anchor - 1;
    // locate cycles of v -> e[v].target restricted to [1, keys]
    let mut state = vec![0u8; keys + 1]; // 0 unseen, 1 in progress, 2 done
    let mut cycles: Vec<Vec<u32>> = Vec::new();
    for s in 1..=keys as u32 {
        if state[s as usize] != 0 {
            continue;
        }
        let mut trail = Vec::new();
        let mut v = s;
        while v >= 1 && (v as usize) <= keys && state[v as usize] == 0 {
            state[v as usize] = 1;
            trail.push(v);
            v = e[v as usize].target;
        }
        if v >= 1 && (v as usize) <= keys && state[v as usize] == 1 {
            // found a new cycle: suffix of trail starting at v
            let at = trail.iter().position(|&x| x == v).unwrap();
            cycles.push(trail[at..].to_vec());
        }
        for &x in &trail {
            state[x as usize] = 2;
        }
    }
    // open each cycle at its minimum, order cycles by minimum descending
    for c in cycles.iter_mut() {
        let at = (0..c.len()).min_by_key(|&i| c[i]).unwrap();
        c.rotate_left(at);
    }
    cycles.sort_by(|a, b| b[0].cmp(&a[0]));

    let mut d = vec![EPS_TOK; anchor + 1];
    for v in 1..=keys {
        d[v] = e[v];
    }
    let mut prev = anchor as u32;
    for cycle in &cycles {
        let closer = *cycle.last().unwrap();
        d[prev as usize] = e[closer as usize]; // token pointing at the opener
        for w in cycle.windows(2) {
            d[w[0] as usize] = e[w[0] as usize];
        }
        prev = closer;
    }
    d[prev as usize] = EPS_TOK;
    d
}

// ---------------------------------------------------------------------------
// Characteristic tree <-> Rényi k-tree
// ---------------------------------------------------------------------------

/// Replays a characteristic tree (tokens for char nodes 1..=m, graph vertices
/// 0..m-1, root clique = top k labels) into the k-tree it describes, along
/// with each vertex's attachment clique in breadth-first order.
fn build_renyi(
    tokens: &[Tok],
    n: usize,
    k: usize,
) -> Result<(UndirectedGraph, Vec<(u32, Vec<u32>)>), KtreeError> {
    let m = n - k;
    debug_assert_eq!(tokens.len(), m + 1);
    let root_clique: Vec<u32> = ((n - k) as u32..n as u32).collect();

    let mut children: Vec<Vec<u32>> = vec![Vec::new(); m + 1];
    for c in 1..=m as u32 {
        let t = tokens[c as usize].target;
        children[t as usize].push(c);
    }

    let mut g = UndirectedGraph::new(n);
    for (i, &u) in root_clique.iter().enumerate() {
        for &v in &root_clique[i + 1..] {
            g.add_edge(u, v);
        }
    }

    let mut attach: Vec<(u32, Vec<u32>)> = Vec::with_capacity(m);
    let mut cliques: Vec<Vec<u32>> = vec![Vec::new(); m + 1]; // K_v per char node
    let mut queue: Vec<u32> = children[0].clone();
    let mut head = 0;
    let mut placed = 0usize;
    while head < queue.len() {
        let c = queue[head];
        head += 1;
        let tok = tokens[c as usize];
        let clique: Vec<u32> = if tok.target == 0 {
            root_clique.clone()
        } else {
            let parent = tok.target;
            let pk = &cliques[parent as usize];
            debug_assert!(tok.label >= 1 && tok.label <= k as u32);
            let excluded = pk[tok.label as usize - 1];
            let mut cl: Vec<u32> = pk.iter().copied().filter(|&x| x != excluded).collect();
            cl.push(parent - 1); // the parent's graph vertex
            cl.sort_unstable();
            cl
        };
        let v = c - 1;
        for &u in &clique {
            g.add_edge(v, u);
        }
        attach.push((v, clique.clone()));
        cliques[c as usize] = clique;
        placed += 1;
        for &ch in &children[c as usize] {
            queue.push(ch);
        }
    }
    if placed != m {
        return Err(KtreeError::MalformedCode(
            "characteristic tokens do not form a tree".into(),
        ));
    }
    Ok((g, attach))
}

/// Canonical attachment cliques of a Rényi k-tree: peels the smallest
/// simplicial non-root vertex until only the root clique remains. The result
/// does not depend on the peel order.
fn renyi_attach_cliques(g: &UndirectedGraph, n: usize, k: usize) -> Result<Vec<Vec<u32>>, KtreeError> {
    let m = n - k;
    let mut adj: Vec<Vec<u32>> = (0..n as u32).map(|v| g.neighbors(v).collect()).collect();
    let mut alive = vec![true; n];
    let mut cliques: Vec<Vec<u32>> = vec![Vec::new(); m];
    let mut remaining = m;
    while remaining > 0 {
        let mut picked = None;
        'scan: for v in 0..m as u32 {
            if !alive[v as usize] || adj[v as usize].len() != k {
                continue;
            }
            let nb = &adj[v as usize];
            if g.is_clique(nb) {
                picked = Some(v);
                break 'scan;
            }
        }
        let v = picked.ok_or_else(|| KtreeError::NotAKtree("peeling stuck".into()))?;
        let mut clique = adj[v as usize].clone();
        clique.sort_unstable();
        cliques[v as usize] = clique;
        alive[v as usize] = false;
        let nbs = adj[v as usize].clone();
        for u in nbs {
            adj[u as usize].retain(|&x| x != v);
        }
        adj[v as usize].clear();
        remaining -= 1;
    }
    Ok(cliques)
}

/// Characteristic-tree tokens of a Rényi k-tree from its attachment cliques.
fn char_tokens(cliques: &[Vec<u32>], n: usize, k: usize) -> Vec<Tok> {
    let m = n - k;
    let root_clique: Vec<u32> = ((n - k) as u32..n as u32).collect();
    let mut tokens = vec![EPS_TOK; m + 1];
    for v in 0..m as u32 {
        let kv = &cliques[v as usize];
        if kv == &root_clique {
            tokens[v as usize + 1] = EPS_TOK;
            continue;
        }
        // the unique non-root u in K_v whose own clique contains K_v \ {u}
        let mut found = None;
        for &u in kv {
            if (u as usize) >= m {
                continue;
            }
            let ku = &cliques[u as usize];
            if kv
                .iter()
                .all(|&x| x == u || ku.binary_search(&x).is_ok())
            {
                debug_assert!(found.is_none(), "attachment parent must be unique");
                found = Some(u);
                #[cfg(not(debug_assertions))]
                break;
            }
        }
        let u = found.expect("valid k-tree structure has an attachment parent");
        let ku = &cliques[u as usize];
        let w = ku
            .iter()
            .copied()
            .find(|x| !kv.contains(x))
            .expect("K_u has exactly one vertex outside K_v");
        let label = ku.binary_search(&w).unwrap() as u32 + 1;
        tokens[v as usize + 1] = Tok {
            target: u + 1,
            label,
        };
    }
    tokens
}

// ---------------------------------------------------------------------------
// decode / encode
// ---------------------------------------------------------------------------

fn toks_from_code(code: &DandelionCode) -> Vec<Tok> {
    let eps = code.eps();
    code.s
        .iter()
        .map(|&(a, b)| Tok {
            target: a,
            label: if b == eps { 0 } else { b },
        })
        .collect()
}

/// Decodes a Dandelion code into a k-tree together with the attachment
/// structure produced along the way (root bag plus one step per remaining
/// vertex), which sampling reuses as a clique tree.
pub fn decode_full(code: &DandelionCode) -> Result<(KTree, CliqueTree), KtreeError> {
    code.validate()?;
    let (n, k) = (code.n, code.k);
    let m = n - k;
    let toks = toks_from_code(code);

    let perm = swap_involution(n, k, &code.q);
    // Unmentioned characteristic nodes are exactly the simplicial non-root
    // vertices of the k-tree being rebuilt; the special leaf among them is
    // the one whose relabeled (original) label is maximal, which decides the
    // keyspace and is computable from Q alone.
    let mut mentioned = vec![false; m + 1];
    for t in &toks {
        if t.target >= 1 {
            mentioned[t.target as usize] = true;
        }
    }
    let xbar = (1..=m as u32)
        .filter(|&c| !mentioned[c as usize])
        .max_by_key(|&c| perm[(c - 1) as usize])
        .expect("fewer tokens than characteristic nodes leaves one unmentioned");
    let tokens = if (xbar as usize) < m {
        let mut e = vec![EPS_TOK; m]; // keys 1..=m-1
        let mut it = toks.iter();
        for key in 1..m as u32 {
            if key == xbar {
                e[key as usize] = EPS_TOK;
            } else {
                e[key as usize] = *it.next().unwrap();
            }
        }
        unfold(&e, m)
    } else {
        // the special leaf is the highest characteristic node: code the rest
        // on one fewer node and attach it to the root clique afterwards
        let mut e = vec![EPS_TOK; m - 1]; // keys 1..=m-2
        for (key, t) in toks.iter().enumerate() {
            e[key + 1] = *t;
        }
        let mut d = unfold(&e, m - 1);
        d.push(EPS_TOK); // char node m: root child
        d
    };

    let (renyi, attach) = build_renyi(&tokens, n, k)?;
    let graph = renyi.relabel(&perm);

    // relabel the attachment structure and package it as a clique tree
    let root_clique: Vec<u32> = ((n - k) as u32..n as u32).collect();
    let mut steps: Vec<(u32, Vec<u32>)> = attach
        .iter()
        .map(|(v, cl)| {
            let mut c: Vec<u32> = cl.iter().map(|&x| perm[x as usize]).collect();
            c.sort_unstable();
            (perm[*v as usize], c)
        })
        .collect();
    let first = steps.remove(0);
    let mut root_bag: Vec<u32> = root_clique.iter().map(|&x| perm[x as usize]).collect();
    root_bag.push(first.0);
    root_bag.sort_unstable();
    let ct = CliqueTree::from_steps(n, k, root_bag, steps);

    let t = KTree::new_unchecked(graph, k);
    debug_assert!(super::is_ktree(&t.graph, k));
    Ok((t, ct))
}

pub fn decode(code: &DandelionCode) -> Result<KTree, KtreeError> {
    Ok(decode_full(code)?.0)
}

/// Encodes a k-tree into its Dandelion code: finds the unique root-clique
/// choice under which the relabeled k-tree has its highest simplicial vertex
/// attached exactly to the root clique, then folds the characteristic tree.
pub fn encode(t: &KTree) -> Result<DandelionCode, KtreeError> {
    let g = &t.graph;
    let (n, k) = (g.n(), t.k);
    if !super::is_ktree(g, k) {
        return Err(KtreeError::NotAKtree("encode input".into()));
    }
    if n < k + 2 {
        return Err(KtreeError::Bounds { n, k });
    }
    let m = n - k;

    // the root clique: neighborhood of the maximum-labeled simplicial vertex
    let max_leaf = (0..n as u32)
        .rev()
        .find(|&v| {
            g.degree(v) == k && {
                let nb: Vec<u32> = g.neighbors(v).collect();
                g.is_clique(&nb)
            }
        })
        .expect("every k-tree has simplicial vertices");
    let mut q: Vec<u32> = g.neighbors(max_leaf).collect();
    q.sort_unstable();
    let perm = swap_involution(n, k, &q);

    let renyi = g.relabel(&perm);
    let cliques = renyi_attach_cliques(&renyi, n, k)?;
    let d = char_tokens(&cliques, n, k);

    // the special leaf: the relabeled image of the maximum simplicial vertex
    let xbar = perm[max_leaf as usize] + 1; // characteristic node id
    debug_assert_eq!(d[xbar as usize], EPS_TOK, "special leaf hangs off the root");

    let toks: Vec<Tok> = if (xbar as usize) < m {
        let e = fold(&d, m);
        (1..m as u32)
            .filter(|&key| key != xbar)
            .map(|key| e[key as usize])
            .collect()
    } else {
        // strip char node m (graph vertex m-1, attached to the root clique)
        let e = fold(&d[..m], m - 1);
        (1..(m - 1) as u32).map(|key| e[key as usize]).collect()
    };

    let eps = n as u32;
    let s = toks
        .into_iter()
        .map(|t| {
            if t.target == 0 {
                (0, eps)
            } else {
                (t.target, t.label)
            }
        })
        .collect();
    Ok(DandelionCode { n, k, q, s })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok(target: u32, label: u32) -> Tok {
        Tok { target, label }
    }

    #[test]
    fn text_round_trip_including_worked_example() {
        let text = "11 3 | 2 3 9 | (0,eps) (2,1) (8,3) (8,2) (1,3) (5,3)";
        let code = DandelionCode::from_text(text).unwrap();
        assert_eq!(code.q, vec![2, 3, 9]);
        assert_eq!(code.s.len(), 6);
        assert_eq!(code.to_text(), text);
        // empty pair list keeps a trailing separator-free form
        let small = DandelionCode {
            n: 5,
            k: 3,
            q: vec![0, 2, 4],
            s: vec![],
        };
        let t = small.to_text();
        assert_eq!(DandelionCode::from_text(&t).unwrap(), small);
        assert!(DandelionCode::from_text("5 9 | 1 | ").is_err());
    }

    #[test]
    fn fold_unfold_worked_example() {
        // path 7 -> 5 -> 3 -> 6 -> 2 -> 4 -> 0 with node 1 hanging off 5
        let mut d = vec![EPS_TOK; 8];
        d[7] = tok(5, 1);
        d[5] = tok(3, 2);
        d[3] = tok(6, 1);
        d[6] = tok(2, 2);
        d[2] = tok(4, 1);
        d[4] = tok(0, 0);
        d[1] = tok(5, 2);
        let e = fold(&d, 7);
        assert_eq!(unfold(&e, 7), d);
        // cycles cut at left-to-right minima of (5, 3, 6, 2, 4)
        assert_eq!(e[5], tok(5, 1)); // closes (5): the anchor's token
        assert_eq!(e[3], tok(6, 1));
        assert_eq!(e[6], tok(3, 2)); // closes (3 6)
        assert_eq!(e[2], tok(4, 1));
        assert_eq!(e[4], tok(2, 2)); // closes (2 4)
        assert_eq!(e[1], tok(5, 2)); // off-path key untouched
    }

    #[test]
    fn fold_unfold_trivial_path() {
        let mut d = vec![EPS_TOK; 4];
        d[3] = EPS_TOK; // anchor is a root child
        d[1] = tok(3, 1);
        d[2] = tok(1, 1);
        let e = fold(&d, 3);
        assert_eq!(&e[1..], &d[1..3]);
        assert_eq!(unfold(&e, 3), d);
    }

    /// All valid token assignments on {0} ∪ [1, anchor] that form a tree.
    fn all_char_trees(anchor: usize, k: usize) -> Vec<Vec<Tok>> {
        let span = k * anchor + 1;
        let idx_tok = |r: usize| -> Tok {
            if r == 0 {
                EPS_TOK
            } else {
                tok(((r - 1) / k + 1) as u32, ((r - 1) % k + 1) as u32)
            }
        };
        let mut out = Vec::new();
        let total = span.pow(anchor as u32);
        for mut code in 0..total {
            let mut d = vec![EPS_TOK; anchor + 1];
            for v in 1..=anchor {
                d[v] = idx_tok(code % span);
                code /= span;
            }
            // acyclic check: every node walks to 0
            let mut ok = true;
            'nodes: for s in 1..=anchor {
                let mut v = s;
                for _ in 0..=anchor {
                    let t = d[v].target as usize;
                    if t == 0 {
                        continue 'nodes;
                    }
                    v = t;
                }
                ok = false;
                break;
            }
            if ok {
                out.push(d);
            }
        }
        out
    }

    #[test]
    fn fold_is_a_bijection_on_small_trees() {
        for k in 1..=2usize {
            for anchor in 1..=4usize {
                let trees = all_char_trees(anchor, k);
                let span = k * anchor + 1;
                // rooted labeled trees with these edge labels number
                // span^(anchor-1); fold maps them injectively onto strings
                assert_eq!(trees.len(), span.pow(anchor as u32 - 1));
                let mut images = std::collections::HashSet::new();
                for d in &trees {
                    let e = fold(d, anchor);
                    assert_eq!(&unfold(&e, anchor), d, "round trip failed");
                    let sig: Vec<(u32, u32)> =
                        e[1..].iter().map(|t| (t.target, t.label)).collect();
                    assert!(images.insert(sig), "fold collided");
                }
            }
        }
    }
}
