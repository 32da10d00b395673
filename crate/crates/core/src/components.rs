//! Connected components (union-find), component censuses, and boundary
//! counts on generated graphs.

use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::graphgen::SpatialGraph;
use crate::model::VertexSet;
use std::collections::BTreeMap;

/// Disjoint-set forest with union by size and path halving.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        assert!(n <= u32::MAX as usize);
        UnionFind { parent: (0..n as u32).collect(), size: vec![1; n] }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Root of `x`'s set (with path halving).
    pub fn find(&mut self, mut x: u32) -> u32 {
        loop {
            let p = self.parent[x as usize];
            if p == x {
                return x;
            }
            let gp = self.parent[p as usize];
            self.parent[x as usize] = gp;
            x = gp;
        }
    }

    /// Union the sets of `a` and `b`; returns true if they were distinct.
    /// The larger set's root wins; equal sizes keep the smaller root id, so
    /// the forest shape is independent of union call order given the same
    /// edge multiset.
    pub fn union(&mut self, a: u32, b: u32) -> bool {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return false;
        }
        let (win, lose) = if self.size[ra as usize] > self.size[rb as usize]
            || (self.size[ra as usize] == self.size[rb as usize] && ra < rb)
        {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[lose as usize] = win;
        self.size[win as usize] += self.size[lose as usize];
        true
    }

    /// Size of `x`'s set.
    pub fn size_of(&mut self, x: u32) -> u32 {
        let r = self.find(x);
        self.size[r as usize]
    }
}

/// Component structure of one graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentSummary {
    /// All component sizes, descending.
    pub sizes: Vec<u64>,
    /// Largest component size (0 for the empty graph).
    pub giant: u64,
    /// Second-largest component size (0 if fewer than two components).
    pub second: u64,
    /// Map from component size to the number of components of that size.
    pub census: BTreeMap<u64, u64>,
    /// Size of the component containing the distinguished vertex.
    pub origin_cluster: Option<u64>,
    /// Whether the distinguished vertex lies in the largest component (ties
    /// broken toward the component containing the smallest vertex id).
    pub origin_in_giant: Option<bool>,
}

/// Compute the component structure of a graph given as an edge list over
/// vertices `0..n_vertices`.
pub fn components_from_edges(
    n_vertices: usize,
    edges: impl IntoIterator<Item = (u32, u32)>,
    origin: Option<u32>,
) -> ComponentSummary {
    let mut uf = UnionFind::new(n_vertices);
    for (u, v) in edges {
        debug_assert!((u as usize) < n_vertices && (v as usize) < n_vertices && u != v);
        uf.union(u, v);
    }
    summarize(&mut uf, origin)
}

/// Component structure from an already-built union-find.
pub fn summarize(uf: &mut UnionFind, origin: Option<u32>) -> ComponentSummary {
    let n = uf.len();
    let mut sizes = Vec::new();
    let mut census: BTreeMap<u64, u64> = BTreeMap::new();
    let mut giant_root = u32::MAX;
    let mut giant: u64 = 0;
    // One ascending pass: collect roots for the census, and track the largest
    // size with a strict comparison — the first vertex attaining it belongs
    // to the tied component with the smallest vertex id.
    for i in 0..n as u32 {
        let r = uf.find(i);
        let s = uf.size[r as usize] as u64;
        if s > giant {
            giant = s;
            giant_root = r;
        }
        if r == i {
            sizes.push(s);
            *census.entry(s).or_insert(0) += 1;
        }
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    let second = sizes.get(1).copied().unwrap_or(0);

    // Accounting identities: component sizes partition the vertex set.
    debug_assert_eq!(sizes.iter().sum::<u64>(), n as u64);
    debug_assert_eq!(census.iter().map(|(s, c)| s * c).sum::<u64>(), n as u64);

    let origin_cluster = origin.map(|o| uf.size_of(o) as u64);
    let origin_in_giant = origin.map(|o| uf.find(o) == giant_root);
    ComponentSummary { sizes, giant, second, census, origin_cluster, origin_in_giant }
}

/// Component structure of a [`SpatialGraph`].
pub fn components(g: &SpatialGraph) -> ComponentSummary {
    components_from_edges(g.vertices.len(), g.edges.iter().copied(), g.origin)
}

/// Vertex ids whose marks lie in `[wmin, wmax)`.
pub fn restrict_marks(vs: &VertexSet, wmin: f64, wmax: f64) -> Vec<u32> {
    (0..vs.len() as u32)
        .filter(|&i| {
            let w = vs.mark(i as usize);
            wmin <= w && w < wmax
        })
        .collect()
}

/// Vertex ids inside the concentric box of volume `vol`.
pub fn restrict_to_volume(g: &SpatialGraph, vol: f64) -> Vec<u32> {
    (0..g.vertices.len() as u32)
        .filter(|&i| g.box_spec.in_box_of_volume(g.vertices.position(i as usize), vol))
        .collect()
}

fn require_strict_enclosure(g: &SpatialGraph, n: f64) -> Result<()> {
    if g.box_spec.sampling_volume() <= n {
        return Err(Error::Geometry(format!(
            "boundary counts need the sampled region (volume {}) to strictly contain the \
             target box (volume {n}); increase the enlargement factor",
            g.box_spec.sampling_volume()
        )));
    }
    Ok(())
}

/// Number of vertices in the target region with a "downward" edge leaving the
/// box of volume `n`: vertices `u` with an incident edge to some `v` outside
/// the box such that the marks satisfy `w_u >= w_v`. With `half`, `u` ranges
/// over the concentric half-volume box only (isolating long edges from the
/// surface term); otherwise over the full box.
pub fn downward_boundary_count(g: &SpatialGraph, n: f64, half: bool) -> Result<u64> {
    require_strict_enclosure(g, n)?;
    let inner_vol = if half { n / 2.0 } else { n };
    let inner = HalfSide::of(inner_vol, g.box_spec.d);
    let outer = HalfSide::of(n, g.box_spec.d);
    let vs = &g.vertices;
    let mut has_downward = vec![false; vs.len()];
    for &(a, b) in &g.edges {
        for (u, v) in [(a, b), (b, a)] {
            let (ui, vi) = (u as usize, v as usize);
            if !has_downward[ui]
                && vs.mark(ui) >= vs.mark(vi)
                && inner.contains(vs.position(ui))
                && !outer.contains(vs.position(vi))
            {
                has_downward[ui] = true;
            }
        }
    }
    Ok(has_downward.iter().filter(|&&x| x).count() as u64)
}

/// Precomputed half side length of a concentric box, for tight loops.
#[derive(Clone, Copy)]
struct HalfSide(f64);

impl HalfSide {
    fn of(vol: f64, d: u32) -> Self {
        HalfSide(crate::pointprocess::side_of_volume(vol, d) / 2.0)
    }

    fn contains(self, pos: &[f64]) -> bool {
        pos.iter().all(|&x| -self.0 <= x && x < self.0)
    }
}

/// Number of edges from the half-volume box to the complement of the box of
/// volume `n`, with both endpoint marks below the natural ceiling
/// `n^(1/(tau-1))` (no ceiling for unit marks).
pub fn edge_boundary_count(g: &SpatialGraph, n: f64, tau: ExtReal) -> Result<u64> {
    require_strict_enclosure(g, n)?;
    let wmax = match tau {
        ExtReal::Finite(t) => n.powf(1.0 / (t - 1.0)),
        _ => f64::INFINITY,
    };
    let inner = HalfSide::of(n / 2.0, g.box_spec.d);
    let outer = HalfSide::of(n, g.box_spec.d);
    let vs = &g.vertices;
    let mut count = 0u64;
    for &(a, b) in &g.edges {
        let wa = vs.mark(a as usize);
        let wb = vs.mark(b as usize);
        if wa >= wmax || wb >= wmax {
            continue;
        }
        for (u, v) in [(a, b), (b, a)] {
            if inner.contains(vs.position(u as usize)) && !outer.contains(vs.position(v as usize)) {
                count += 1;
                break;
            }
        }
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointprocess::BoxSpec;

    #[test]
    fn union_find_basics() {
        let mut uf = UnionFind::new(6);
        assert!(uf.union(0, 1));
        assert!(uf.union(2, 3));
        assert!(!uf.union(1, 0));
        assert!(uf.union(0, 2));
        assert_eq!(uf.size_of(3), 4);
        assert_eq!(uf.size_of(4), 1);
        assert_eq!(uf.find(1), uf.find(3));
        assert_ne!(uf.find(4), uf.find(5));
    }

    #[test]
    fn union_order_does_not_change_partition() {
        // Same edge multiset in different orders induces the same partition
        // (root identities may differ; nothing downstream depends on them).
        let edges = [(0u32, 1u32), (2, 3), (1, 2), (4, 5)];
        let mut perms: Vec<Vec<(u32, u32)>> = vec![
            edges.to_vec(),
            vec![edges[3], edges[2], edges[1], edges[0]],
            vec![edges[1], edges[3], edges[0], edges[2]],
        ];
        let mut labelings: Vec<Vec<u32>> = Vec::new();
        for perm in perms.drain(..) {
            let mut uf = UnionFind::new(6);
            for (u, v) in perm {
                uf.union(u, v);
            }
            // Canonical label: smallest vertex id in the component.
            let mut label = vec![u32::MAX; 6];
            for i in 0..6u32 {
                let r = uf.find(i) as usize;
                label[r] = label[r].min(i);
            }
            labelings.push((0..6).map(|i| label[uf.find(i) as usize]).collect());
        }
        assert_eq!(labelings[0], vec![0, 0, 0, 0, 4, 4]);
        assert_eq!(labelings[0], labelings[1]);
        assert_eq!(labelings[0], labelings[2]);
    }

    #[test]
    fn component_summary_census() {
        // Path 0-1-2, edge 3-4, isolated 5.
        let s = components_from_edges(6, [(0, 1), (1, 2), (3, 4)], Some(5));
        assert_eq!(s.sizes, vec![3, 2, 1]);
        assert_eq!(s.giant, 3);
        assert_eq!(s.second, 2);
        assert_eq!(s.census.get(&1), Some(&1));
        assert_eq!(s.census.get(&2), Some(&1));
        assert_eq!(s.census.get(&3), Some(&1));
        assert_eq!(s.origin_cluster, Some(1));
        assert_eq!(s.origin_in_giant, Some(false));
    }

    #[test]
    fn giant_tie_breaks_to_smallest_vertex_id() {
        // Two components of size 2: {0,3} and {1,2}. The giant is the one
        // containing vertex 0.
        let s = components_from_edges(4, [(1, 2), (0, 3)], Some(3));
        assert_eq!(s.giant, 2);
        assert_eq!(s.second, 2);
        assert_eq!(s.origin_in_giant, Some(true));
        let s = components_from_edges(4, [(1, 2), (0, 3)], Some(2));
        assert_eq!(s.origin_in_giant, Some(false));
    }

    #[test]
    fn empty_and_edgeless_graphs() {
        let s = components_from_edges(0, [], None);
        assert_eq!(s.giant, 0);
        assert_eq!(s.second, 0);
        assert!(s.sizes.is_empty());
        let s = components_from_edges(3, [], Some(0));
        assert_eq!(s.sizes, vec![1, 1, 1]);
        assert_eq!(s.giant, 1);
        assert_eq!(s.second, 1);
        assert_eq!(s.origin_cluster, Some(1));
    }

    #[test]
    fn matches_bfs_on_random_graphs() {
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for trial in 0..40 {
            let n = 1 + rng.random_range(0..1000usize);
            let m = rng.random_range(0..(2 * n));
            let edges: Vec<(u32, u32)> = (0..m)
                .map(|_| {
                    let a = rng.random_range(0..n as u32);
                    let b = rng.random_range(0..n as u32);
                    (a, b)
                })
                .filter(|(a, b)| a != b)
                .collect();
            let origin = rng.random_range(0..n as u32);
            let got = components_from_edges(n, edges.iter().copied(), Some(origin));
            let want = crate::oracles::bfs_components(n, &edges, Some(origin));
            assert_eq!(got.sizes, want.sizes, "trial {trial}");
            assert_eq!(got.census, want.census, "trial {trial}");
            assert_eq!(got.origin_cluster, want.origin_cluster, "trial {trial}");
            assert_eq!(got.giant, want.giant, "trial {trial}");
            assert_eq!(got.second, want.second, "trial {trial}");
        }
    }

    fn tiny_graph() -> SpatialGraph {
        // Sampled box volume 12 around target volume 4 (d=1): target box
        // [-2, 2), sampled box [-6, 6). Half box is [-1, 1).
        let spec = BoxSpec::new(4.0, 1, 3.0).unwrap();
        let mut vs = VertexSet::new(1);
        vs.push(&[0.5], 5.0); // 0: in half box
        vs.push(&[1.5], 1.0); // 1: in target box, outside half box
        vs.push(&[3.0], 2.0); // 2: outside target box
        vs.push(&[-4.0], 8.0); // 3: outside target box
        vs.push(&[-0.5], 1.0); // 4: in half box
        SpatialGraph {
            vertices: vs,
            edges: vec![(0, 2), (1, 3), (3, 4), (1, 4)],
            box_spec: spec,
            origin: None,
        }
    }

    #[test]
    fn downward_boundary_counts_vertices() {
        let g = tiny_graph();
        // Full box: vertex 0 (mark 5 >= 2, edge to outside vertex 2) counts;
        // vertex 1 (mark 1 < 8) does not; vertex 4 (mark 1 < 8) does not.
        assert_eq!(downward_boundary_count(&g, 4.0, false).unwrap(), 1);
        // Half box: only vertices 0 and 4 are eligible.
        assert_eq!(downward_boundary_count(&g, 4.0, true).unwrap(), 1);
        // Enlargement 1 leaves no exterior: geometry error.
        let mut g1 = tiny_graph();
        g1.box_spec = BoxSpec::new(12.0, 1, 1.0).unwrap();
        assert!(matches!(downward_boundary_count(&g1, 12.0, false), Err(Error::Geometry(_))));
    }

    #[test]
    fn edge_boundary_counts_edges_with_mark_ceiling() {
        let g = tiny_graph();
        // Edges from half box [-1,1) to outside [-2,2): (0,2) and (3,4).
        // Unit ceiling n^(1/(tau-1)) with tau=3: sqrt(4) = 2, so marks must
        // be < 2: edge (0,2) has w=5, dropped; (3,4) has w=8, dropped.
        assert_eq!(edge_boundary_count(&g, 4.0, ExtReal::Finite(3.0)).unwrap(), 0);
        // tau=2.1: ceiling 4^(1/1.1) ~ 3.5: (0,2) still dropped (5 >= 3.5),
        // (3,4) dropped (8 >= 3.5).
        assert_eq!(edge_boundary_count(&g, 4.0, ExtReal::Finite(2.1)).unwrap(), 0);
        // No ceiling: both cross-edges count.
        assert_eq!(edge_boundary_count(&g, 4.0, ExtReal::PosInf).unwrap(), 2);
    }

    #[test]
    fn restriction_helpers() {
        let g = tiny_graph();
        assert_eq!(restrict_marks(&g.vertices, 1.0, 2.0), vec![1, 4]);
        assert_eq!(restrict_marks(&g.vertices, 2.0, f64::INFINITY), vec![0, 2, 3]);
        // Volume 4 -> box [-2, 2): vertices 0, 1, 4.
        assert_eq!(restrict_to_volume(&g, 4.0), vec![0, 1, 4]);
        // Volume 2 -> box [-1, 1): vertices 0, 4.
        assert_eq!(restrict_to_volume(&g, 2.0), vec![0, 4]);
    }
}
