//! Union-Find decoder: round-robin growth of odd clusters, then peeling.
//!
//! Radii live on nontrivial syndrome vertices. Each growth step adds the same
//! amount to every radius in the cluster, which raises the reach of every
//! covered vertex of that cluster by the same amount; the new reach is then
//! pushed outwards along edges.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::gf2::BitVec;
use crate::graph::{cover_tol, is_full, DecodingGraph, Dsu, Radii};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthStep {
    pub round: usize,
    /// Smallest vertex id in the cluster at the time it grew.
    pub cluster: usize,
    pub amount: f64,
}

#[derive(Clone, Debug)]
pub struct UfdResult {
    pub correction: BitVec,
    pub radii: Radii,
    pub growth: Vec<GrowthStep>,
}

#[derive(Clone, Debug, Default)]
struct ClusterInfo {
    members: Vec<usize>,
    defects: Vec<usize>,
    parity: bool,
    boundary: bool,
    min_vertex: usize,
}

struct Growth<'g> {
    graph: &'g DecodingGraph,
    reach: Vec<f64>,
    radius: Vec<f64>,
    dsu: Dsu,
    info: Vec<ClusterInfo>,
    heap: BinaryHeap<Reach>,
}

#[derive(PartialEq)]
struct Reach(f64, usize);
impl Eq for Reach {}
impl PartialOrd for Reach {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Reach {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0).then(other.1.cmp(&self.1))
    }
}

impl<'g> Growth<'g> {
    fn new(graph: &'g DecodingGraph, defects: &[usize]) -> Self {
        let n = graph.num_vertices();
        let mut g = Growth {
            graph,
            reach: vec![f64::NEG_INFINITY; n],
            radius: vec![0.0; n],
            dsu: Dsu::new(n),
            info: vec![ClusterInfo::default(); n],
            heap: BinaryHeap::new(),
        };
        for &d in defects {
            g.reach[d] = 0.0;
            g.info[d] = ClusterInfo {
                members: vec![d],
                defects: vec![d],
                parity: true,
                boundary: false,
                min_vertex: d,
            };
        }
        g
    }

    fn merge(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.dsu.find(a), self.dsu.find(b));
        if let Some(root) = self.dsu.union(ra, rb) {
            let other = if root == ra { rb } else { ra };
            let taken = std::mem::take(&mut self.info[other]);
            let dst = &mut self.info[root];
            dst.members.extend(taken.members);
            dst.defects.extend(taken.defects);
            dst.parity ^= taken.parity;
            dst.boundary |= taken.boundary;
            dst.min_vertex = dst.min_vertex.min(taken.min_vertex);
        }
    }

    /// Newly covered vertex `y` reached through `x`.
    fn attach(&mut self, y: usize, x: usize) {
        self.info[y] = ClusterInfo {
            members: vec![y],
            defects: Vec::new(),
            parity: false,
            boundary: self.graph.is_boundary(y),
            min_vertex: y,
        };
        self.merge(x, y);
    }

    fn odd_active(&mut self, v: usize) -> Option<usize> {
        let r = self.dsu.find(v);
        let c = &self.info[r];
        (c.parity && !c.boundary).then_some(r)
    }

    /// Growth quantum: half the smallest weight among not fully covered edges leaving `root`.
    fn quantum(&self, root: usize) -> Option<f64> {
        let mut best = f64::INFINITY;
        for &v in &self.info[root].members {
            for &(eid, _) in self.graph.neighbors(v) {
                let w = self.graph.edges()[eid].weight;
                if w < best && !is_full(self.graph.covered_from_reach(&self.reach, eid), w) {
                    best = w;
                }
            }
        }
        best.is_finite().then_some(best / 2.0)
    }

    fn grow(&mut self, root: usize, amount: f64) {
        let defects = self.info[root].defects.clone();
        for d in defects {
            self.radius[d] += amount;
        }
        let members = self.info[root].members.clone();
        for &v in &members {
            self.reach[v] += amount;
            self.heap.push(Reach(self.reach[v], v));
        }
        let mut touched = members;
        while let Some(Reach(r, x)) = self.heap.pop() {
            if r < self.reach[x] {
                continue;
            }
            for &(eid, y) in self.graph.neighbors(x) {
                let w = self.graph.edges()[eid].weight;
                let nr = r - w;
                if nr >= -cover_tol(w) && nr.max(0.0) > self.reach[y] {
                    let fresh = self.reach[y] < 0.0;
                    self.reach[y] = nr.max(0.0);
                    if fresh {
                        self.attach(y, x);
                    }
                    touched.push(y);
                    self.heap.push(Reach(self.reach[y], y));
                }
            }
        }
        for v in touched {
            for &(eid, y) in self.graph.neighbors(v) {
                if self.reach[y] >= 0.0
                    && is_full(self.graph.covered_from_reach(&self.reach, eid), self.graph.edges()[eid].weight)
                {
                    self.merge(v, y);
                }
            }
        }
    }

    /// Covered measure per cluster root.
    fn measures(&mut self) -> Vec<f64> {
        let mut m = vec![0.0; self.graph.num_vertices()];
        for e in self.graph.edges() {
            let (ru, rv) = (self.reach[e.u], self.reach[e.v]);
            if ru >= 0.0 {
                let part = if rv >= 0.0 && is_full(ru + rv, e.weight) {
                    e.weight
                } else {
                    ru.min(e.weight)
                };
                let root = self.dsu.find(e.u);
                m[root] += part;
                if part == e.weight {
                    continue;
                }
            }
            if rv >= 0.0 {
                let root = self.dsu.find(e.v);
                m[root] += rv.min(e.weight);
            }
        }
        m
    }
}

/// Decodes `syndrome` (one bit per syndrome vertex).
pub fn ufd_decode(graph: &DecodingGraph, syndrome: &BitVec) -> Result<UfdResult> {
    if syndrome.len() != graph.num_syndrome_vertices() {
        return Err(Error::InvalidInput(format!(
            "syndrome has length {}, graph has {} syndrome vertices",
            syndrome.len(),
            graph.num_syndrome_vertices()
        )));
    }
    let defects = graph.defects(syndrome);
    let mut st = Growth::new(graph, &defects);
    let mut growth = Vec::new();
    let mut round = 0;
    loop {
        let mut odd: Vec<usize> = Vec::new();
        for &d in &defects {
            if let Some(r) = st.odd_active(d) {
                if !odd.contains(&r) {
                    odd.push(r);
                }
            }
        }
        if odd.is_empty() {
            break;
        }
        let measure = st.measures();
        odd.sort_by(|&a, &b| {
            measure[a]
                .total_cmp(&measure[b])
                .then(st.info[a].min_vertex.cmp(&st.info[b].min_vertex))
        });
        let mut grown: Vec<usize> = Vec::new();
        for start in odd {
            let Some(root) = st.odd_active(start) else { continue };
            // a merged cluster counts as visited if any part of it was
            if grown.iter().any(|&g| st.dsu.find(g) == root) {
                continue;
            }
            let amount = st.quantum(root).ok_or(Error::UnsupportedSyndrome)?;
            growth.push(GrowthStep {
                round,
                cluster: st.info[root].min_vertex,
                amount,
            });
            st.grow(root, amount);
            grown.push(root);
        }
        round += 1;
    }
    let erasure = BitVec::from_bools(
        &(0..graph.num_edges())
            .map(|e| {
                let edge = &graph.edges()[e];
                st.reach[edge.u] >= 0.0
                    && st.reach[edge.v] >= 0.0
                    && is_full(graph.covered_from_reach(&st.reach, e), edge.weight)
            })
            .collect::<Vec<_>>(),
    );
    let correction = peel(graph, &erasure, syndrome)?;
    Ok(UfdResult {
        correction,
        radii: Radii::from_values(st.radius)?,
        growth,
    })
}

/// Finds a correction inside `erasure` whose syndrome is `syndrome`.
///
/// Each erased component gets a DFS spanning tree rooted at its lowest
/// boundary vertex, or its lowest vertex if it has none. Vertices are settled
/// leaf to root; boundary vertices absorb any parity.
pub fn peel(graph: &DecodingGraph, erasure: &BitVec, syndrome: &BitVec) -> Result<BitVec> {
    if erasure.len() != graph.num_edges() || syndrome.len() != graph.num_syndrome_vertices() {
        return Err(Error::InvalidInput("erasure or syndrome length mismatch".into()));
    }
    let n = graph.num_vertices();
    let mut parity = vec![false; n];
    for v in graph.defects(syndrome) {
        parity[v] = true;
    }
    let mut in_erasure = vec![false; n];
    for eid in erasure.support() {
        let e = &graph.edges()[eid];
        in_erasure[e.u] = true;
        in_erasure[e.v] = true;
    }
    if (0..n).any(|v| parity[v] && !in_erasure[v]) {
        return Err(Error::UnsupportedSyndrome);
    }
    let mut seen = vec![false; n];
    let mut parent_edge: Vec<Option<usize>> = vec![None; n];
    let mut correction = BitVec::zeros(graph.num_edges());
    let roots = graph
        .boundary()
        .iter()
        .copied()
        .filter(|&b| in_erasure[b])
        .chain((0..n).filter(|&v| in_erasure[v]));
    let mut order = Vec::new();
    for root in roots {
        if seen[root] {
            continue;
        }
        order.clear();
        seen[root] = true;
        let mut stack = vec![root];
        while let Some(x) = stack.pop() {
            order.push(x);
            // reversed so that lower edge ids are explored first
            for &(eid, y) in graph.neighbors(x).iter().rev() {
                if erasure.get(eid) && !seen[y] {
                    seen[y] = true;
                    parent_edge[y] = Some(eid);
                    stack.push(y);
                }
            }
        }
        for &x in order.iter().rev() {
            if graph.is_boundary(x) || !parity[x] {
                continue;
            }
            match parent_edge[x] {
                Some(eid) => {
                    correction.flip(eid);
                    parity[x] = false;
                    let up = graph.edges()[eid].other(x);
                    parity[up] ^= true;
                }
                None => return Err(Error::UnsupportedSyndrome),
            }
        }
    }
    Ok(correction)
}
