//! Undirected interaction graphs and their two-hop closure.
//!
//! Nodes are indexed `0..node_count`. Edges are stored canonically as
//! `(i, j)` with `i < j`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An unordered node pair, always stored with the smaller index first.
pub type Pair = (usize, usize);

pub(crate) fn canonical(i: usize, j: usize) -> Pair {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    node_count: usize,
    edges: BTreeSet<Pair>,
}

impl Graph {
    /// Builds a graph from arbitrary pairs. Pairs are canonicalised and
    /// deduplicated; self-loops and out-of-range endpoints are rejected.
    pub fn new(node_count: usize, pairs: impl IntoIterator<Item = Pair>) -> Result<Self> {
        let mut edges = BTreeSet::new();
        for (i, j) in pairs {
            if i == j {
                return Err(Error::invalid("edges", format!("self-loop on node {i}")));
            }
            if i >= node_count || j >= node_count {
                return Err(Error::invalid(
                    "edges",
                    format!("edge ({i}, {j}) out of range for {node_count} nodes"),
                ));
            }
            edges.insert(canonical(i, j));
        }
        Ok(Self { node_count, edges })
    }

    pub fn empty(node_count: usize) -> Self {
        Self {
            node_count,
            edges: BTreeSet::new(),
        }
    }

    /// Number of nodes, `p + 1`.
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Number of regressors per node, `p`.
    pub fn p(&self) -> usize {
        self.node_count.saturating_sub(1)
    }

    pub fn edges(&self) -> &BTreeSet<Pair> {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.edges.contains(&canonical(i, j))
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == i {
                    Some(b)
                } else if b == i {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }

    pub fn degree(&self, i: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == i || b == i).count()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency_lists()
            .iter()
            .map(Vec::len)
            .max()
            .unwrap_or(0)
    }

    /// Writes the edge-list format: the node count on the first line, then
    /// one `i j` pair per line (0-based).
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{}\n", self.node_count);
        for &(i, j) in &self.edges {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::invalid("edge list", "missing node count"))?;
        let node_count: usize = header
            .parse()
            .map_err(|_| Error::invalid("edge list", format!("bad node count `{header}`")))?;
        let mut pairs = Vec::new();
        for line in lines {
            let mut it = line.split_whitespace().map(str::parse::<usize>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(i)), Some(Ok(j)), None) => pairs.push((i, j)),
                _ => return Err(Error::invalid("edge list", format!("bad edge line `{line}`"))),
            }
        }
        Self::new(node_count, pairs)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_edge_list()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_edge_list(&text)
    }
}

/// The two-hop closure `E_M` of a graph together with its strict part.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoHopSet {
    pub pairs: BTreeSet<Pair>,
    pub strict_two_hop: BTreeSet<Pair>,
}

impl TwoHopSet {
    pub fn contains(&self, i: usize, j: usize) -> bool {
        i != j && self.pairs.contains(&canonical(i, j))
    }

    /// Degree of node `i` in `E_M`.
    pub fn degree(&self, i: usize) -> usize {
        self.pairs.iter().filter(|&&(a, b)| a == i || b == i).count()
    }

    /// `d`: the maximum `E_M`-degree over all nodes.
    pub fn max_degree(&self, node_count: usize) -> usize {
        let mut deg = vec![0usize; node_count];
        for &(a, b) in &self.pairs {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg.into_iter().max().unwrap_or(0)
    }
}

/// Pairs that are edges or share a common neighbour.
pub fn two_hop_closure(g: &Graph) -> TwoHopSet {
    let adj = g.adjacency_lists();
    let mut pairs = g.edges.clone();
    let mut strict = BTreeSet::new();
    for nbrs in &adj {
        for (a, &u) in nbrs.iter().enumerate() {
            for &v in &nbrs[a + 1..] {
                let pair = canonical(u, v);
                if !g.edges.contains(&pair) {
                    strict.insert(pair);
                }
                pairs.insert(pair);
            }
        }
    }
    TwoHopSet {
        pairs,
        strict_two_hop: strict,
    }
}

/// Row-major 4-neighbour lattice.
pub fn grid_graph(rows: usize, cols: usize) -> Result<Graph> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("grid", "rows and cols must be positive"));
    }
    let id = |r: usize, c: usize| r * cols + c;
    let mut pairs = Vec::with_capacity(rows * (cols - 1) + cols * (rows - 1));
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                pairs.push((id(r, c), id(r, c + 1)));
            }
            if r + 1 < rows {
                pairs.push((id(r, c), id(r + 1, c)));
            }
        }
    }
    Graph::new(rows * cols, pairs)
}

/// Path graph `0 - 1 - ... - (n-1)`.
pub fn chain_graph(n: usize) -> Result<Graph> {
    if n == 0 {
        return Err(Error::invalid("chain", "need at least one node"));
    }
    Graph::new(n, (1..n).map(|i| (i - 1, i)))
}

pub fn complete_graph(n: usize) -> Result<Graph> {
    if n == 0 {
        return Err(Error::invalid("complete", "need at least one node"));
    }
    Graph::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
}

/// Uniform random recursive tree: node `k` attaches to a uniformly chosen
/// earlier node.
pub fn random_tree(n: usize, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(Error::invalid("tree", "need at least one node"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Graph::new(n, (1..n).map(|k| (rng.random_range(0..k), k)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    fn bfs_distances(g: &Graph, src: usize) -> Vec<Option<usize>> {
        let adj = g.adjacency_lists();
        let mut dist = vec![None; g.node_count()];
        dist[src] = Some(0);
        let mut q = VecDeque::from([src]);
        while let Some(u) = q.pop_front() {
            for &v in &adj[u] {
                if dist[v].is_none() {
                    dist[v] = Some(dist[u].unwrap() + 1);
                    q.push_back(v);
                }
            }
        }
        dist
    }

    /// Common-neighbour enumeration straight from the definition.
    fn brute_force_two_hop(g: &Graph) -> BTreeSet<Pair> {
        let n = g.node_count();
        let mut out = BTreeSet::new();
        for i in 0..n {
            for j in i + 1..n {
                if g.has_edge(i, j) || (0..n).any(|k| g.has_edge(i, k) && g.has_edge(j, k)) {
                    out.insert((i, j));
                }
            }
        }
        out
    }

    #[test]
    fn grid_sizes() {
        let g = grid_graph(5, 5).unwrap();
        assert_eq!(g.node_count(), 25);
        assert_eq!(g.p(), 24);
        assert_eq!(g.edge_count(), 40);

        let g = grid_graph(1, 1).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (1, 0));

        let g = grid_graph(2, 2).unwrap();
        assert_eq!(g.edge_count(), 4);
        assert!((0..4).all(|i| g.degree(i) == 2));
        assert!(grid_graph(0, 3).is_err());
    }

    #[test]
    fn rejects_self_loops_and_out_of_range() {
        assert!(Graph::new(3, [(1, 1)]).is_err());
        assert!(Graph::new(3, [(0, 3)]).is_err());
        let g = Graph::new(3, [(2, 0), (0, 2)]).unwrap();
        assert_eq!(g.edges().iter().copied().collect::<Vec<_>>(), vec![(0, 2)]);
    }

    #[test]
    fn path_two_hop() {
        let g = chain_graph(3).unwrap();
        let th = two_hop_closure(&g);
        assert_eq!(th.pairs, BTreeSet::from([(0, 1), (1, 2), (0, 2)]));
        assert_eq!(th.strict_two_hop, BTreeSet::from([(0, 2)]));
        assert_eq!(th.max_degree(3), 2);
    }

    #[test]
    fn complete_graph_has_no_strict_pairs() {
        let g = complete_graph(4).unwrap();
        let th = two_hop_closure(&g);
        assert_eq!(&th.pairs, g.edges());
        assert!(th.strict_two_hop.is_empty());
    }

    #[test]
    fn four_cycle_adds_diagonals() {
        let g = grid_graph(2, 2).unwrap();
        let th = two_hop_closure(&g);
        assert_eq!(th.pairs, brute_force_two_hop(&g));
        assert_eq!(th.strict_two_hop.len(), 2);
        assert_eq!(th.pairs.len(), 6);
    }

    #[test]
    fn edge_list_round_trip() {
        let g = grid_graph(3, 4).unwrap();
        let back = Graph::from_edge_list(&g.to_edge_list()).unwrap();
        assert_eq!(g, back);
        assert!(Graph::from_edge_list("").is_err());
        assert!(Graph::from_edge_list("3\n0 1 2\n").is_err());
        assert!(Graph::from_edge_list("3\n0 x\n").is_err());
    }

    #[test]
    fn random_tree_is_connected_tree() {
        let g = random_tree(12, 7).unwrap();
        assert_eq!(g.edge_count(), 11);
        assert!(bfs_distances(&g, 0).iter().all(Option::is_some));
        assert_eq!(g, random_tree(12, 7).unwrap());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_graph() -> impl Strategy<Value = Graph> {
            (2usize..9).prop_flat_map(|n| {
                proptest::collection::vec((0..n, 0..n), 0..20).prop_map(move |pairs| {
                    Graph::new(n, pairs.into_iter().filter(|(a, b)| a != b)).unwrap()
                })
            })
        }

        proptest! {
            #[test]
            fn closure_matches_definition(g in arb_graph()) {
                let th = two_hop_closure(&g);
                prop_assert_eq!(&th.pairs, &brute_force_two_hop(&g));
                prop_assert!(g.edges().is_subset(&th.pairs));
                prop_assert!(th.strict_two_hop.is_disjoint(g.edges()));
                let union: BTreeSet<_> = th.strict_two_hop.union(g.edges()).copied().collect();
                prop_assert_eq!(union, th.pairs.clone());
                prop_assert_eq!(two_hop_closure(&g), th);
            }

            #[test]
            fn strict_pairs_are_at_distance_two(g in arb_graph()) {
                let th = two_hop_closure(&g);
                for &(i, j) in &th.strict_two_hop {
                    prop_assert_eq!(bfs_distances(&g, i)[j], Some(2));
                }
            }

            #[test]
            fn two_hop_degree_bounded_by_square_of_max_degree(g in arb_graph()) {
                let th = two_hop_closure(&g);
                let max_deg = g.max_degree();
                for i in 0..g.node_count() {
                    prop_assert!(th.degree(i) <= max_deg * max_deg);
                }
            }
        }
    }
}
