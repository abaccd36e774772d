//! Weighted decoding graphs viewed as metric spaces.
//!
//! Every edge is an interval of length equal to its weight, glued at the
//! vertices. A radius assignment places a closed ball around each vertex; the
//! union of those balls is the cluster set. Coverage of an edge is computed
//! exactly from the *reach* of each endpoint, `reach(x) = max_v (r_v - d(v, x))`,
//! which a single max-priority Dijkstra pass produces for all vertices at once.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::BitVec;

/// Relative tolerance used when deciding whether an edge is fully covered.
pub const COVER_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeLabel {
    Space,
    Time,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    #[serde(rename = "w")]
    pub weight: f64,
    pub fault_id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<EdgeLabel>,
}

impl Edge {
    pub fn new(u: usize, v: usize, weight: f64, fault_id: usize) -> Self {
        Edge {
            u,
            v,
            weight,
            fault_id,
            label: None,
        }
    }

    pub fn other(&self, x: usize) -> usize {
        if x == self.u {
            self.v
        } else {
            self.u
        }
    }
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    num_vertices: usize,
    boundary: Vec<usize>,
    edges: Vec<Edge>,
}

/// Which logical operator the soft output measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LogicalSpan {
    /// Paths between two inequivalent boundary vertices.
    Boundaries(usize, usize),
    /// The graph is a single cycle whose full edge set is the logical operator.
    Cycle,
}

/// Decoding graph: syndrome vertices plus a set of boundary vertices.
///
/// Syndromes are bit vectors over the syndrome vertices in increasing vertex
/// order; edge sets are bit vectors over edge ids.
#[derive(Clone, Debug)]
pub struct DecodingGraph {
    num_vertices: usize,
    boundary: Vec<usize>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, usize)>>,
    is_boundary: Vec<bool>,
    syndrome_vertices: Vec<usize>,
    syndrome_index: Vec<Option<usize>>,
}

impl DecodingGraph {
    pub fn new(num_vertices: usize, boundary: Vec<usize>, edges: Vec<Edge>) -> Result<Self> {
        let mut is_boundary = vec![false; num_vertices];
        for &b in &boundary {
            if b >= num_vertices {
                return Err(Error::InvalidGraph(format!("boundary vertex {b} out of range")));
            }
            if is_boundary[b] {
                return Err(Error::InvalidGraph(format!("boundary vertex {b} listed twice")));
            }
            is_boundary[b] = true;
        }
        let mut adjacency = vec![Vec::new(); num_vertices];
        for (i, e) in edges.iter().enumerate() {
            if e.u >= num_vertices || e.v >= num_vertices {
                return Err(Error::InvalidGraph(format!("edge {i} has an endpoint out of range")));
            }
            if e.u == e.v {
                return Err(Error::InvalidGraph(format!("edge {i} is a self-loop")));
            }
            if !(e.weight.is_finite() && e.weight > 0.0) {
                return Err(Error::InvalidGraph(format!(
                    "edge {i} has non-positive weight {}",
                    e.weight
                )));
            }
            adjacency[e.u].push((i, e.v));
            adjacency[e.v].push((i, e.u));
        }
        let mut syndrome_index = vec![None; num_vertices];
        let mut syndrome_vertices = Vec::new();
        for v in 0..num_vertices {
            if !is_boundary[v] {
                syndrome_index[v] = Some(syndrome_vertices.len());
                syndrome_vertices.push(v);
            }
        }
        let g = DecodingGraph {
            num_vertices,
            boundary,
            edges,
            adjacency,
            is_boundary,
            syndrome_vertices,
            syndrome_index,
        };
        if num_vertices > 0 && !g.is_connected() {
            return Err(Error::InvalidGraph("graph is not connected".into()));
        }
        Ok(g)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: GraphFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::new(f.num_vertices, f.boundary, f.edges)
    }

    pub fn to_json(&self) -> String {
        let f = GraphFile {
            num_vertices: self.num_vertices,
            boundary: self.boundary.clone(),
            edges: self.edges.clone(),
        };
        serde_json::to_string_pretty(&f).expect("graph serialization cannot fail")
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.num_vertices];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(x) = stack.pop() {
            for &(_, y) in &self.adjacency[x] {
                if !seen[y] {
                    seen[y] = true;
                    count += 1;
                    stack.push(y);
                }
            }
        }
        count == self.num_vertices
    }

    /// Same topology, every weight replaced by `f(edge)`.
    pub fn reweighted(&self, f: impl Fn(&Edge) -> f64) -> Result<Self> {
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                weight: f(e),
                ..e.clone()
            })
            .collect();
        Self::new(self.num_vertices, self.boundary.clone(), edges)
    }

    pub fn with_uniform_weight(&self, w: f64) -> Result<Self> {
        self.reweighted(|_| w)
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> Result<&Edge> {
        self.edges.get(id).ok_or(Error::UnknownEdge(id))
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.is_boundary[v]
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    pub fn syndrome_vertices(&self) -> &[usize] {
        &self.syndrome_vertices
    }

    pub fn num_syndrome_vertices(&self) -> usize {
        self.syndrome_vertices.len()
    }

    pub fn syndrome_index(&self, v: usize) -> Option<usize> {
        self.syndrome_index[v]
    }

    pub fn min_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).fold(f64::INFINITY, f64::min)
    }

    pub fn is_cycle(&self) -> bool {
        self.boundary.is_empty()
            && self.num_vertices >= 2
            && self.edges.len() == self.num_vertices
            && self.adjacency.iter().all(|a| a.len() == 2)
    }

    /// The logical operator that the soft output is computed against.
    pub fn logical_span(&self) -> Result<LogicalSpan> {
        match self.boundary.len() {
            2 => Ok(LogicalSpan::Boundaries(self.boundary[0], self.boundary[1])),
            0 if self.is_cycle() => Ok(LogicalSpan::Cycle),
            n => Err(Error::InvalidGraph(format!(
                "soft output needs exactly two inequivalent boundaries or a cycle graph, found {n} boundary vertices"
            ))),
        }
    }

    /// Vertices incident to an odd number of edges of `edges`, restricted to syndrome vertices.
    pub fn syndrome_of(&self, edges: &BitVec) -> BitVec {
        assert_eq!(edges.len(), self.edges.len(), "edge set length mismatch");
        let mut s = BitVec::zeros(self.syndrome_vertices.len());
        for id in edges.support() {
            let e = &self.edges[id];
            for x in [e.u, e.v] {
                if let Some(i) = self.syndrome_index[x] {
                    s.flip(i);
                }
            }
        }
        s
    }

    /// Whether `edges` is a valid edge set for `syndrome`.
    pub fn is_valid_edge_set(&self, edges: &BitVec, syndrome: &BitVec) -> bool {
        &self.syndrome_of(edges) == syndrome
    }

    pub fn weight_of(&self, edges: &BitVec) -> f64 {
        edges.support().map(|i| self.edges[i].weight).sum()
    }

    /// Nontrivial syndrome vertices (graph vertex ids).
    pub fn defects(&self, syndrome: &BitVec) -> Vec<usize> {
        assert_eq!(syndrome.len(), self.syndrome_vertices.len(), "syndrome length mismatch");
        syndrome.support().map(|i| self.syndrome_vertices[i]).collect()
    }

    /// Single-source shortest paths under `weight`; returns distances and the
    /// predecessor edge of each reached vertex.
    pub fn shortest_paths_with(
        &self,
        sources: &[usize],
        weight: impl Fn(usize) -> f64,
    ) -> (Vec<f64>, Vec<Option<usize>>) {
        let mut dist = vec![f64::INFINITY; self.num_vertices];
        let mut pred = vec![None; self.num_vertices];
        let mut heap = BinaryHeap::new();
        for &s in sources {
            dist[s] = 0.0;
            heap.push(MinItem(0.0, s));
        }
        while let Some(MinItem(d, x)) = heap.pop() {
            if d > dist[x] {
                continue;
            }
            for &(eid, y) in &self.adjacency[x] {
                let nd = d + weight(eid);
                if nd < dist[y] {
                    dist[y] = nd;
                    pred[y] = Some(eid);
                    heap.push(MinItem(nd, y));
                }
            }
        }
        (dist, pred)
    }

    pub fn shortest_paths(&self, sources: &[usize]) -> (Vec<f64>, Vec<Option<usize>>) {
        self.shortest_paths_with(sources, |e| self.edges[e].weight)
    }

    /// Walks predecessor edges from `target` back to a source.
    pub fn path_edges(&self, pred: &[Option<usize>], target: usize) -> Vec<usize> {
        let mut path = Vec::new();
        let mut x = target;
        while let Some(e) = pred[x] {
            path.push(e);
            x = self.edges[e].other(x);
        }
        path
    }

    /// `reach(x) = max_v (r_v - d(v, x))` over ball centres; `-inf` where no ball reaches.
    ///
    /// Centres are the vertices with positive radius plus any `extra_centres`
    /// (zero-radius vertices that should still count as points of the cluster set).
    pub fn reach(&self, radii: &Radii, extra_centres: &[usize]) -> Vec<f64> {
        assert_eq!(radii.len(), self.num_vertices, "radii length mismatch");
        let mut reach = vec![f64::NEG_INFINITY; self.num_vertices];
        let mut heap = BinaryHeap::new();
        for (v, &r) in radii.values().iter().enumerate() {
            if r > 0.0 {
                reach[v] = r;
                heap.push(MaxItem(r, v));
            }
        }
        for &v in extra_centres {
            if reach[v] < 0.0 {
                reach[v] = radii.get(v);
                heap.push(MaxItem(reach[v], v));
            }
        }
        while let Some(MaxItem(r, x)) = heap.pop() {
            if r < reach[x] {
                continue;
            }
            for &(eid, y) in &self.adjacency[x] {
                let w = self.edges[eid].weight;
                let nr = r - w;
                if nr >= -cover_tol(w) && nr.max(0.0) > reach[y] {
                    reach[y] = nr.max(0.0);
                    heap.push(MaxItem(reach[y], y));
                }
            }
        }
        reach
    }

    /// Covered length of edge `eid` given per-vertex reach values.
    #[inline]
    pub fn covered_from_reach(&self, reach: &[f64], eid: usize) -> f64 {
        let e = &self.edges[eid];
        (reach[e.u].max(0.0) + reach[e.v].max(0.0)).min(e.weight)
    }
}

/// Measure of `edge` covered by the balls `B_{r_v}(v)` of all vertices.
pub fn covered_measure(graph: &DecodingGraph, radii: &Radii, edge: usize) -> Result<f64> {
    graph.edge(edge)?;
    let reach = graph.reach(radii, &[]);
    Ok(graph.covered_from_reach(&reach, edge))
}

#[derive(Clone, Copy, PartialEq)]
struct MinItem(f64, usize);
impl Eq for MinItem {}
impl Ord for MinItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}
impl PartialOrd for MinItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Copy, PartialEq)]
struct MaxItem(f64, usize);
impl Eq for MaxItem {}
impl Ord for MaxItem {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then_with(|| other.1.cmp(&self.1))
    }
}
impl PartialOrd for MaxItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Per-vertex ball radii; vertices never assigned have radius 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Radii {
    values: Vec<f64>,
}

impl Radii {
    pub fn zeros(num_vertices: usize) -> Self {
        Radii {
            values: vec![0.0; num_vertices],
        }
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if let Some((v, r)) = values
            .iter()
            .enumerate()
            .find(|(_, r)| !(r.is_finite() && **r >= 0.0))
        {
            return Err(Error::InvalidInput(format!("radius {r} at vertex {v} is not a finite non-negative number")));
        }
        Ok(Radii { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, v: usize) -> f64 {
        self.values[v]
    }

    pub fn set(&mut self, v: usize, r: f64) -> Result<()> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::InvalidInput(format!("radius {r} is not a finite non-negative number")));
        }
        self.values[v] = r;
        Ok(())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    pub vertices: Vec<usize>,
    /// Number of nontrivial syndrome vertices inside, mod 2.
    pub parity: bool,
    pub touches_boundary: bool,
    pub measure: f64,
}

/// Connected components of the union of balls.
#[derive(Clone, Debug)]
pub struct ClusterSet {
    reach: Vec<f64>,
    covered: Vec<f64>,
    component_of: Vec<Option<usize>>,
    clusters: Vec<Cluster>,
}

impl ClusterSet {
    /// Builds the cluster set for `radii`. Nontrivial syndrome vertices always
    /// belong to the cluster set, as degenerate balls when their radius is 0.
    pub fn new(graph: &DecodingGraph, radii: &Radii, syndrome: Option<&BitVec>) -> Self {
        let defects = syndrome.map(|s| graph.defects(s)).unwrap_or_default();
        let reach = graph.reach(radii, &defects);
        let covered: Vec<f64> = (0..graph.num_edges())
            .map(|e| graph.covered_from_reach(&reach, e))
            .collect();

        let n = graph.num_vertices();
        let mut dsu = Dsu::new(n);
        for (eid, e) in graph.edges().iter().enumerate() {
            if reach[e.u] >= 0.0 && reach[e.v] >= 0.0 && is_full(covered[eid], e.weight) {
                dsu.union(e.u, e.v);
            }
        }
        let mut is_defect = vec![false; n];
        for &d in &defects {
            is_defect[d] = true;
        }
        let mut component_of = vec![None; n];
        let mut clusters: Vec<Cluster> = Vec::new();
        let mut root_to_cluster = vec![usize::MAX; n];
        for v in 0..n {
            if reach[v] < 0.0 {
                continue;
            }
            let root = dsu.find(v);
            if root_to_cluster[root] == usize::MAX {
                root_to_cluster[root] = clusters.len();
                clusters.push(Cluster {
                    vertices: Vec::new(),
                    parity: false,
                    touches_boundary: false,
                    measure: 0.0,
                });
            }
            let c = root_to_cluster[root];
            component_of[v] = Some(c);
            let cl = &mut clusters[c];
            cl.vertices.push(v);
            cl.parity ^= is_defect[v];
            cl.touches_boundary |= graph.is_boundary(v);
        }
        for (eid, e) in graph.edges().iter().enumerate() {
            if covered[eid] <= 0.0 {
                continue;
            }
            if is_full(covered[eid], e.weight) && component_of[e.u] == component_of[e.v] {
                clusters[component_of[e.u].unwrap()].measure += e.weight;
            } else {
                let a = reach[e.u].max(0.0).min(e.weight);
                let b = reach[e.v].max(0.0).min(e.weight);
                if a > 0.0 {
                    clusters[component_of[e.u].unwrap()].measure += a;
                }
                if b > 0.0 {
                    clusters[component_of[e.v].unwrap()].measure += b;
                }
            }
        }
        ClusterSet {
            reach,
            covered,
            component_of,
            clusters,
        }
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn covered(&self, edge: usize) -> f64 {
        self.covered[edge]
    }

    pub fn covered_all(&self) -> &[f64] {
        &self.covered
    }

    pub fn reach(&self) -> &[f64] {
        &self.reach
    }

    pub fn component_of(&self, v: usize) -> Option<usize> {
        self.component_of[v]
    }

    /// `|C|_ω`, the total covered measure.
    pub fn total_measure(&self) -> f64 {
        self.covered.iter().sum()
    }

    pub fn is_edge_covered(&self, graph: &DecodingGraph, edge: usize) -> bool {
        is_full(self.covered[edge], graph.edges()[edge].weight)
    }

    /// Residual length `ω(e) - covered(e)`, clamped at zero.
    pub fn residual(&self, graph: &DecodingGraph, edge: usize) -> f64 {
        let w = graph.edges()[edge].weight;
        if is_full(self.covered[edge], w) {
            0.0
        } else {
            (w - self.covered[edge]).max(0.0)
        }
    }
}

#[inline]
pub(crate) fn cover_tol(weight: f64) -> f64 {
    COVER_EPS * weight.max(1.0)
}

#[inline]
pub(crate) fn is_full(covered: f64, weight: f64) -> bool {
    covered >= weight - cover_tol(weight)
}

/// Shortest path from `b1` to `b2` in the quotient of the graph by the cluster set.
pub fn quotient_shortest_path(
    graph: &DecodingGraph,
    clusters: &ClusterSet,
    b1: usize,
    b2: usize,
) -> Result<f64> {
    for b in [b1, b2] {
        if b >= graph.num_vertices() || !graph.is_boundary(b) {
            return Err(Error::InvalidInput(format!("vertex {b} is not a boundary vertex")));
        }
    }
    if b1 == b2 {
        return Err(Error::InvalidInput("boundaries must be inequivalent".into()));
    }
    let (dist, _) = graph.shortest_paths_with(&[b1], |e| clusters.residual(graph, e));
    let d = dist[b2];
    if d.is_finite() {
        Ok(d.max(0.0))
    } else {
        Err(Error::Disconnected(b1, b2))
    }
}

/// Length of the logical operator outside the clusters on a cycle graph.
pub fn quotient_cycle_length(graph: &DecodingGraph, clusters: &ClusterSet) -> Result<f64> {
    if !graph.is_cycle() {
        return Err(Error::InvalidGraph("graph is not a cycle".into()));
    }
    Ok((0..graph.num_edges()).map(|e| clusters.residual(graph, e)).sum())
}

/// Quotient length of the graph's logical span.
pub fn quotient_logical_length(graph: &DecodingGraph, clusters: &ClusterSet) -> Result<f64> {
    match graph.logical_span()? {
        LogicalSpan::Boundaries(b1, b2) => quotient_shortest_path(graph, clusters, b1, b2),
        LogicalSpan::Cycle => quotient_cycle_length(graph, clusters),
    }
}

/// Union-find with path halving and union by size.
#[derive(Clone, Debug)]
pub struct Dsu {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl Dsu {
    pub fn new(n: usize) -> Self {
        Dsu {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns the new root, or `None` if already joined.
    pub fn union(&mut self, a: usize, b: usize) -> Option<usize> {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return None;
        }
        if self.size[ra] < self.size[rb] || (self.size[ra] == self.size[rb] && rb < ra) {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        Some(ra)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle(n: usize, w: f64) -> DecodingGraph {
        let edges = (0..n).map(|i| Edge::new(i, (i + 1) % n, w, i)).collect();
        DecodingGraph::new(n, vec![], edges).unwrap()
    }

    /// Path b1 - 0 - 1 - ... - (k-2) - b2 with k edges.
    fn line(k: usize, w: f64) -> DecodingGraph {
        let b1 = k - 1;
        let b2 = k;
        let mut edges = vec![Edge::new(b1, 0, w, 0)];
        for i in 0..k - 2 {
            edges.push(Edge::new(i, i + 1, w, i + 1));
        }
        edges.push(Edge::new(k - 2, b2, w, k - 1));
        DecodingGraph::new(k + 1, vec![b1, b2], edges).unwrap()
    }

    #[test]
    fn rejects_bad_graphs() {
        assert!(DecodingGraph::new(2, vec![], vec![Edge::new(0, 1, 0.0, 0)]).is_err());
        assert!(DecodingGraph::new(2, vec![], vec![Edge::new(0, 2, 1.0, 0)]).is_err());
        assert!(DecodingGraph::new(3, vec![], vec![Edge::new(0, 1, 1.0, 0)]).is_err());
        assert!(DecodingGraph::new(2, vec![5], vec![Edge::new(0, 1, 1.0, 0)]).is_err());
    }

    #[test]
    fn zero_radii_cover_nothing() {
        let g = cycle(5, 1.5);
        let r = Radii::zeros(5);
        for e in 0..5 {
            assert_eq!(covered_measure(&g, &r, e).unwrap(), 0.0);
        }
        assert!(matches!(covered_measure(&g, &r, 9), Err(Error::UnknownEdge(9))));
    }

    #[test]
    fn two_half_balls_meet() {
        let w = 2.0;
        let g = line(3, w);
        let mut r = Radii::zeros(g.num_vertices());
        r.set(0, w / 2.0).unwrap();
        r.set(1, w / 2.0).unwrap();
        assert_eq!(covered_measure(&g, &r, 1).unwrap(), w);
        let cs = ClusterSet::new(&g, &r, None);
        assert!(cs.is_edge_covered(&g, 1));
    }

    #[test]
    fn one_half_radius_on_triangle() {
        let w = 3.0;
        let g = cycle(3, w);
        let mut r = Radii::zeros(3);
        r.set(0, w / 2.0).unwrap();
        let cs = ClusterSet::new(&g, &r, None);
        assert_eq!(cs.covered(0), w / 2.0);
        assert_eq!(cs.covered(2), w / 2.0);
        assert_eq!(cs.covered(1), 0.0);
        assert_eq!(cs.total_measure(), w);
    }

    #[test]
    fn balls_reach_through_vertices() {
        // radius 2.5 on a unit-weight line: covers two full edges and half of the third
        let g = line(5, 1.0);
        let mut r = Radii::zeros(g.num_vertices());
        r.set(0, 2.5).unwrap();
        let cs = ClusterSet::new(&g, &r, None);
        let covered: Vec<f64> = cs.covered_all().to_vec();
        assert_eq!(covered, vec![1.0, 1.0, 1.0, 0.5, 0.0]);
    }

    #[test]
    fn zero_radius_defects_are_isolated_points() {
        let g = cycle(4, 1.0);
        let r = Radii::zeros(4);
        let s = BitVec::from_support(4, [0, 2]);
        let cs = ClusterSet::new(&g, &r, Some(&s));
        assert_eq!(cs.clusters().len(), 2);
        assert!(cs.clusters().iter().all(|c| c.parity && c.measure == 0.0));
    }

    #[test]
    fn adjacent_defects_merge_into_even_cluster() {
        let g = cycle(4, 1.0);
        let mut r = Radii::zeros(4);
        r.set(0, 0.5).unwrap();
        r.set(1, 0.5).unwrap();
        let s = BitVec::from_support(4, [0, 1]);
        let cs = ClusterSet::new(&g, &r, Some(&s));
        assert_eq!(cs.clusters().len(), 1);
        assert!(!cs.clusters()[0].parity);
        assert!((cs.clusters()[0].measure - 2.0).abs() < 1e-12);
    }

    #[test]
    fn quotient_path_on_line() {
        let g = line(5, 2.0);
        let (b1, b2) = (4, 5);
        let empty = ClusterSet::new(&g, &Radii::zeros(6), None);
        assert_eq!(quotient_shortest_path(&g, &empty, b1, b2).unwrap(), 10.0);
        let mut r = Radii::zeros(6);
        r.set(1, 1.0).unwrap();
        let cs = ClusterSet::new(&g, &r, None);
        assert_eq!(quotient_shortest_path(&g, &cs, b1, b2).unwrap(), 8.0);
        assert!(quotient_shortest_path(&g, &cs, b1, b1).is_err());
        assert!(quotient_shortest_path(&g, &cs, 0, b2).is_err());
    }

    #[test]
    fn json_round_trip() {
        let g = line(4, 1.25);
        let back = DecodingGraph::from_json(&g.to_json()).unwrap();
        assert_eq!(back.edges(), g.edges());
        assert_eq!(back.boundary(), g.boundary());
        assert!(DecodingGraph::from_json("{\"num_vertices\": 2}").is_err());
    }
}
