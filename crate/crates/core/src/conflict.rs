//! Enhanced conflict graph and its combinatorial machinery.
//!
//! One vertex per sub-flow, in canonical order. Two sub-flows conflict when
//! they belong to different flows at the same input (the crossbar can send
//! only one flow's data on an input line per slot) or when they target the
//! same output. Sub-flows of one flow never conflict with each other: a
//! multicast cell can reach several outputs in a single slot.
//!
//! Switch configurations are exactly the stable sets of this graph.

use crate::traffic::TrafficPattern;
use crate::{Error, Result};

/// Vertex cap for the branch enumerations (stable sets, cliques).
pub const ENUMERATION_CAP: usize = 40;
/// Vertex cap for perfect-graph testing.
pub const PERFECT_CAP: usize = 30;

/// Witness partition of a split graph: (clique side, stable side).
pub type SplitPartition = (Vec<usize>, Vec<usize>);

/// Undirected graph on sub-flow vertices with bitset adjacency rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictGraph {
    n: usize,
    adj: Vec<Vec<u64>>,
}

/// A set of pairwise non-adjacent vertices, sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct StableSet {
    pub vertices: Vec<usize>,
}

impl StableSet {
    pub fn new(mut vertices: Vec<usize>) -> Self {
        vertices.sort_unstable();
        vertices.dedup();
        StableSet { vertices }
    }

    /// 0/1 incidence vector over `n` vertices.
    pub fn incidence(&self, n: usize) -> Vec<u8> {
        let mut chi = vec![0u8; n];
        for &v in &self.vertices {
            chi[v] = 1;
        }
        chi
    }

    pub fn contains(&self, v: usize) -> bool {
        self.vertices.binary_search(&v).is_ok()
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

fn words_for(n: usize) -> usize {
    n.div_ceil(64).max(1)
}

impl ConflictGraph {
    pub fn new(n: usize) -> Self {
        ConflictGraph {
            n,
            adj: vec![vec![0u64; words_for(n)]; n],
        }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = ConflictGraph::new(n);
        for &(u, v) in edges {
            g.add_edge(u, v);
        }
        g
    }

    pub fn add_edge(&mut self, u: usize, v: usize) {
        assert!(u != v && u < self.n && v < self.n, "bad edge ({u}, {v})");
        self.adj[u][v / 64] |= 1 << (v % 64);
        self.adj[v][u / 64] |= 1 << (u % 64);
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u][v / 64] >> (v % 64) & 1 == 1
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.adj
            .iter()
            .map(|row| row.iter().map(|w| w.count_ones() as usize).sum::<usize>())
            .sum::<usize>()
            / 2
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adj[u].iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn neighbors(&self, u: usize) -> Vec<usize> {
        (0..self.n).filter(|&v| self.has_edge(u, v)).collect()
    }

    pub fn complement(&self) -> ConflictGraph {
        let mut g = ConflictGraph::new(self.n);
        for u in 0..self.n {
            for v in u + 1..self.n {
                if !self.has_edge(u, v) {
                    g.add_edge(u, v);
                }
            }
        }
        g
    }

    /// Subgraph induced by `vertices`; vertex k of the result corresponds
    /// to `vertices[k]`.
    pub fn induced_subgraph(&self, vertices: &[usize]) -> ConflictGraph {
        let mut g = ConflictGraph::new(vertices.len());
        for (a, &u) in vertices.iter().enumerate() {
            for (b, &v) in vertices.iter().enumerate().skip(a + 1) {
                if self.has_edge(u, v) {
                    g.add_edge(a, b);
                }
            }
        }
        g
    }

    /// Grows a stable set to an inclusion-maximal one, adding compatible
    /// vertices in ascending order.
    pub fn extend_to_maximal_stable(&self, set: &[usize]) -> StableSet {
        debug_assert!(self.is_stable_set(set));
        let mut out: Vec<usize> = set.to_vec();
        for v in 0..self.n {
            if !out.contains(&v) && out.iter().all(|&u| !self.has_edge(u, v)) {
                out.push(v);
            }
        }
        StableSet::new(out)
    }

    /// Sorted (u, v) pairs with u < v.
    pub fn edge_list(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::with_capacity(self.num_edges());
        for u in 0..self.n {
            for v in u + 1..self.n {
                if self.has_edge(u, v) {
                    edges.push((u, v));
                }
            }
        }
        edges
    }

    /// "u v" per line, 0-indexed.
    pub fn edge_list_text(&self) -> String {
        let mut out = String::new();
        for (u, v) in self.edge_list() {
            out.push_str(&format!("{u} {v}\n"));
        }
        out
    }

    pub fn is_stable_set(&self, vertices: &[usize]) -> bool {
        for (i, &u) in vertices.iter().enumerate() {
            for &v in &vertices[i + 1..] {
                if self.has_edge(u, v) {
                    return false;
                }
            }
        }
        true
    }

    pub fn is_clique(&self, vertices: &[usize]) -> bool {
        for (i, &u) in vertices.iter().enumerate() {
            for &v in &vertices[i + 1..] {
                if !self.has_edge(u, v) {
                    return false;
                }
            }
        }
        true
    }

    pub(crate) fn adjacency_masks(&self) -> Vec<u64> {
        debug_assert!(self.n <= 64);
        self.adj.iter().map(|row| row[0]).collect()
    }

    pub(crate) fn check_cap(&self, cap: usize, what: &str) -> Result<()> {
        if self.n > cap {
            return Err(Error::SizeCap(format!(
                "{what} supports at most {cap} vertices, graph has {}",
                self.n
            )));
        }
        Ok(())
    }

    /// All inclusion-maximal stable sets, in deterministic (lexicographic)
    /// order. Enumerated as maximal cliques of the complement.
    pub fn maximal_stable_sets(&self) -> Result<Vec<StableSet>> {
        self.check_cap(ENUMERATION_CAP, "stable set enumeration")?;
        let co = self.complement();
        let mut sets: Vec<Vec<usize>> = bron_kerbosch(&co);
        sets.sort();
        Ok(sets.into_iter().map(StableSet::new).collect())
    }

    /// All inclusion-maximal cliques, lexicographically sorted.
    pub fn maximal_cliques(&self) -> Result<Vec<Vec<usize>>> {
        self.check_cap(ENUMERATION_CAP, "clique enumeration")?;
        let mut sets = bron_kerbosch(self);
        sets.sort();
        Ok(sets)
    }

    /// Hammer-Simeone split test. On success returns the witness partition
    /// (clique side, stable side).
    pub fn is_split_graph(&self) -> (bool, Option<SplitPartition>) {
        let n = self.n;
        if n == 0 {
            return (true, Some((vec![], vec![])));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&v| (std::cmp::Reverse(self.degree(v)), v));
        let deg: Vec<usize> = order.iter().map(|&v| self.degree(v)).collect();
        let mut m = 0;
        for k in 1..=n {
            if deg[k - 1] >= k - 1 {
                m = k;
            } else {
                break;
            }
        }
        let top: usize = deg[..m].iter().sum();
        let rest: usize = deg[m..].iter().sum();
        if top != m * (m - 1) + rest {
            return (false, None);
        }
        let mut clique: Vec<usize> = order[..m].to_vec();
        let mut stable: Vec<usize> = order[m..].to_vec();
        clique.sort_unstable();
        stable.sort_unstable();
        debug_assert!(self.is_clique(&clique) && self.is_stable_set(&stable));
        (true, Some((clique, stable)))
    }

    /// Strong-perfect-graph check by explicit search for an induced odd
    /// cycle of length >= 5 in the graph and in its complement.
    pub fn is_perfect(&self) -> Result<bool> {
        self.check_cap(PERFECT_CAP, "perfect graph test")?;
        Ok(find_odd_hole(self).is_none() && find_odd_hole(&self.complement()).is_none())
    }
}

/// Builds the enhanced conflict graph for a pattern (one vertex per
/// sub-flow in canonical order).
pub fn build_enhanced_conflict_graph(pattern: &TrafficPattern) -> ConflictGraph {
    let subs = pattern.subflows();
    let mut g = ConflictGraph::new(subs.len());
    for u in 0..subs.len() {
        for v in u + 1..subs.len() {
            let a = &subs[u];
            let b = &subs[v];
            let input_conflict = a.input == b.input && a.flow != b.flow;
            let output_conflict = a.output == b.output;
            if input_conflict || output_conflict {
                g.add_edge(u, v);
            }
        }
    }
    g
}

/// Bron-Kerbosch with pivoting over u64 masks (callers enforce n <= 64).
fn bron_kerbosch(g: &ConflictGraph) -> Vec<Vec<usize>> {
    let n = g.num_vertices();
    if n == 0 {
        return vec![vec![]];
    }
    let adj = g.adjacency_masks();
    let mut out = Vec::new();
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    bk(&adj, 0, all, 0, &mut out);
    out.iter()
        .map(|&mask| (0..n).filter(|&v| mask >> v & 1 == 1).collect())
        .collect()
}

fn bk(adj: &[u64], r: u64, mut p: u64, mut x: u64, out: &mut Vec<u64>) {
    if p == 0 && x == 0 {
        out.push(r);
        return;
    }
    let mut pivot = usize::MAX;
    let mut best = usize::MAX;
    let mut scan = p | x;
    while scan != 0 {
        let u = scan.trailing_zeros() as usize;
        scan &= scan - 1;
        let uncovered = (p & !adj[u]).count_ones() as usize;
        if uncovered < best {
            best = uncovered;
            pivot = u;
        }
    }
    let mut cand = p & !adj[pivot];
    while cand != 0 {
        let v = cand.trailing_zeros() as usize;
        let vb = 1u64 << v;
        cand &= cand - 1;
        bk(adj, r | vb, p & adj[v], x & adj[v], out);
        p &= !vb;
        x |= vb;
    }
}

/// Returns some induced odd cycle of length >= 5, if one exists.
///
/// Enumerates induced cycles whose minimum vertex is the DFS root; a path
/// may only be extended by a vertex adjacent to its tip and to nothing else
/// on the path (the root closes the cycle instead of extending it).
pub fn find_odd_hole(g: &ConflictGraph) -> Option<Vec<usize>> {
    let n = g.num_vertices();
    let mut path: Vec<usize> = Vec::new();
    for s in 0..n {
        path.clear();
        path.push(s);
        if let Some(hole) = extend_hole(g, s, &mut path) {
            return Some(hole);
        }
    }
    None
}

fn extend_hole(g: &ConflictGraph, root: usize, path: &mut Vec<usize>) -> Option<Vec<usize>> {
    let tip = *path.last().unwrap();
    'next: for u in root + 1..g.num_vertices() {
        if !g.has_edge(tip, u) || path.contains(&u) {
            continue;
        }
        if path.len() > 2 {
            for &w in &path[1..path.len() - 1] {
                if g.has_edge(u, w) {
                    continue 'next;
                }
            }
        }
        if path.len() >= 2 && g.has_edge(u, root) {
            let len = path.len() + 1;
            if len >= 5 && len % 2 == 1 {
                let mut hole = path.clone();
                hole.push(u);
                return Some(hole);
            }
            // any longer cycle through u would carry the chord (u, root)
            continue;
        }
        path.push(u);
        if let Some(hole) = extend_hole(g, root, path) {
            return Some(hole);
        }
        path.pop();
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::rat;
    use crate::traffic::{pattern_2xn_vertex, pattern_fig1, Flow};

    fn cycle(n: usize) -> ConflictGraph {
        let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        ConflictGraph::from_edges(n, &edges)
    }

    /// 2^n brute-force maximal stable sets, for cross-checking.
    pub(crate) fn brute_force_maximal_stable_sets(g: &ConflictGraph) -> Vec<Vec<usize>> {
        let n = g.num_vertices();
        assert!(n <= 20);
        let mut stable: Vec<u32> = Vec::new();
        for mask in 0u32..1 << n {
            let verts: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
            if g.is_stable_set(&verts) {
                stable.push(mask);
            }
        }
        let mut out: Vec<Vec<usize>> = stable
            .iter()
            .filter(|&&m| !stable.iter().any(|&m2| m2 != m && m2 & m == m))
            .map(|&m| (0..n).filter(|&v| m >> v & 1 == 1).collect())
            .collect();
        out.sort();
        out
    }

    fn brute_force_is_split(g: &ConflictGraph) -> bool {
        let n = g.num_vertices();
        assert!(n <= 20);
        for mask in 0u32..1 << n {
            let clique: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
            let stable: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 0).collect();
            if g.is_clique(&clique) && g.is_stable_set(&stable) {
                return true;
            }
        }
        false
    }

    #[test]
    fn fig1_graph_shape() {
        let p = pattern_fig1();
        let g = build_enhanced_conflict_graph(&p);
        assert_eq!(g.num_vertices(), 6);
        assert_eq!(g.num_edges(), 6);
        // canonical order: m1 m2 m3 (broadcast sub-flows), then u1 u2 u3
        assert!(!g.has_edge(0, 1) && !g.has_edge(0, 2) && !g.has_edge(1, 2));
        assert!(g.has_edge(3, 4) && g.has_edge(3, 5) && g.has_edge(4, 5));
        assert!(g.has_edge(0, 3) && g.has_edge(1, 4) && g.has_edge(2, 5));
    }

    #[test]
    fn fig1_stable_sets_and_cliques() {
        let g = build_enhanced_conflict_graph(&pattern_fig1());
        let sets = g.maximal_stable_sets().unwrap();
        let got: Vec<Vec<usize>> = sets.iter().map(|s| s.vertices.clone()).collect();
        // {m1,m2,m3} and, per output j, u_j with the other two broadcast legs
        assert_eq!(
            got,
            vec![vec![0, 1, 2], vec![0, 1, 5], vec![0, 2, 4], vec![1, 2, 3]]
        );
        let cliques = g.maximal_cliques().unwrap();
        assert_eq!(
            cliques,
            vec![vec![0, 3], vec![1, 4], vec![2, 5], vec![3, 4, 5]]
        );
    }

    #[test]
    fn single_flow_graph_is_edgeless() {
        let p = crate::traffic::TrafficPattern::new(
            1,
            4,
            vec![Flow {
                input: 0,
                fanout: vec![0, 1, 2, 3],
                rate: rat(1, 2),
            }],
        )
        .unwrap();
        let g = build_enhanced_conflict_graph(&p);
        assert_eq!(g.num_edges(), 0);
        let sets = g.maximal_stable_sets().unwrap();
        assert_eq!(sets.len(), 1);
        assert_eq!(sets[0].vertices, vec![0, 1, 2, 3]);
        let cliques = g.maximal_cliques().unwrap();
        assert_eq!(cliques.len(), 4);
    }

    #[test]
    fn two_by_n_edge_count() {
        for n in 1..=8usize {
            let p = pattern_2xn_vertex(n).unwrap();
            let g = build_enhanced_conflict_graph(&p);
            assert_eq!(g.num_vertices(), 2 * n);
            assert_eq!(g.num_edges(), n * (n - 1) / 2 + n, "N = {n}");
        }
    }

    #[test]
    fn triangle_stable_sets_are_singletons() {
        let g = cycle(3);
        let sets = g.maximal_stable_sets().unwrap();
        assert_eq!(sets.len(), 3);
        assert!(sets.iter().all(|s| s.len() == 1));
    }

    #[test]
    fn enumerator_matches_brute_force_on_samples() {
        let graphs = vec![
            build_enhanced_conflict_graph(&pattern_fig1()),
            build_enhanced_conflict_graph(&pattern_2xn_vertex(5).unwrap()),
            cycle(5),
            cycle(7).complement(),
            ConflictGraph::new(6),
            ConflictGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]),
        ];
        for g in &graphs {
            let fast: Vec<Vec<usize>> = g
                .maximal_stable_sets()
                .unwrap()
                .into_iter()
                .map(|s| s.vertices)
                .collect();
            assert_eq!(fast, brute_force_maximal_stable_sets(g));
        }
    }

    #[test]
    fn stable_sets_satisfy_edge_constraints_and_cover() {
        for n in 2..=8usize {
            let g = build_enhanced_conflict_graph(&pattern_2xn_vertex(n).unwrap());
            let sets = g.maximal_stable_sets().unwrap();
            let mut covered = vec![false; g.num_vertices()];
            for s in &sets {
                assert!(g.is_stable_set(&s.vertices));
                let chi = s.incidence(g.num_vertices());
                for (u, v) in g.edge_list() {
                    assert!(chi[u] + chi[v] <= 1);
                }
                for &v in &s.vertices {
                    covered[v] = true;
                }
            }
            assert!(covered.iter().all(|&c| c));
        }
    }

    #[test]
    fn split_recognition() {
        let (split, part) = build_enhanced_conflict_graph(&pattern_fig1()).is_split_graph();
        assert!(split);
        let (clique, stable) = part.unwrap();
        assert_eq!(clique, vec![3, 4, 5]);
        assert_eq!(stable, vec![0, 1, 2]);

        for n in 1..=8 {
            let g = build_enhanced_conflict_graph(&pattern_2xn_vertex(n).unwrap());
            assert!(g.is_split_graph().0, "N = {n}");
        }

        let c5 = cycle(5);
        assert!(!c5.is_split_graph().0);
        assert!(!brute_force_is_split(&c5));

        let c4 = cycle(4);
        assert_eq!(c4.is_split_graph().0, brute_force_is_split(&c4));
    }

    #[test]
    fn split_matches_brute_force_on_random_graphs() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.random_range(1..=8);
            let mut g = ConflictGraph::new(n);
            for u in 0..n {
                for v in u + 1..n {
                    if rng.random_bool(0.4) {
                        g.add_edge(u, v);
                    }
                }
            }
            let (fast, witness) = g.is_split_graph();
            assert_eq!(fast, brute_force_is_split(&g));
            if let Some((k, s)) = witness {
                assert!(g.is_clique(&k) && g.is_stable_set(&s));
                assert_eq!(k.len() + s.len(), n);
            }
        }
    }

    #[test]
    fn perfect_recognition() {
        assert!(!cycle(5).is_perfect().unwrap());
        assert!(!cycle(7).complement().is_perfect().unwrap());
        assert!(cycle(4).is_perfect().unwrap());
        assert!(cycle(6).is_perfect().unwrap());
        assert!(build_enhanced_conflict_graph(&pattern_fig1())
            .is_perfect()
            .unwrap());
        for n in 2..=8 {
            let g = build_enhanced_conflict_graph(&pattern_2xn_vertex(n).unwrap());
            let (split, _) = g.is_split_graph();
            assert!(split && g.is_perfect().unwrap(), "N = {n}");
        }
    }

    #[test]
    fn odd_hole_search_finds_c5_inside_larger_graph() {
        // C5 plus a dominating apex vertex: still contains the induced C5.
        let mut g = cycle(5);
        let mut edges = g.edge_list();
        edges.extend((0..5).map(|v| (v, 5)));
        g = ConflictGraph::from_edges(6, &edges);
        let hole = find_odd_hole(&g).unwrap();
        assert_eq!(hole.len(), 5);
        // the apex is adjacent to all of C5, so no induced cycle can use it
        assert!(hole.iter().all(|&v| v < 5));
    }

    #[test]
    fn caps_are_enforced() {
        let g = ConflictGraph::new(41);
        assert!(matches!(g.maximal_stable_sets(), Err(Error::SizeCap(_))));
        assert!(matches!(g.maximal_cliques(), Err(Error::SizeCap(_))));
        let g = ConflictGraph::new(31);
        assert!(matches!(g.is_perfect(), Err(Error::SizeCap(_))));
    }

    #[test]
    fn edge_list_export() {
        let g = build_enhanced_conflict_graph(&pattern_fig1());
        let text = g.edge_list_text();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("0 3\n"));
    }
}
