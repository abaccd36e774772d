//! Minimum-weight perfect matching with explicit dual certificates.
//!
//! Nontrivial syndrome vertices are matched to each other or to the boundary
//! (every vertex has its own zero-dual boundary partner). The solver is a
//! primal-dual blossom algorithm that grows one alternating tree at a time.
//! Duals use the odd-cut form: a pair `(u, v)` has slack
//! `w(u, v) - Σ y_S` over sets `S` containing exactly one of `u`, `v`, and the
//! boundary pair of `u` has slack `b(u) - Σ_{S ∋ u} y_S`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::{BitMatrix, BitVec};
use crate::graph::{DecodingGraph, LogicalSpan, Radii};

/// Pairwise shortest-path distances between nontrivial syndrome vertices.
#[derive(Clone, Debug)]
pub struct SyndromeGraph {
    /// Graph vertex id of each node.
    pub defects: Vec<usize>,
    pub dist: Vec<Vec<f64>>,
    /// Distance to the nearest boundary vertex (`inf` without boundary).
    pub boundary_dist: Vec<f64>,
    nearest_boundary: Vec<Option<usize>>,
    preds: Vec<Vec<Option<usize>>>,
}

impl SyndromeGraph {
    pub fn len(&self) -> usize {
        self.defects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defects.is_empty()
    }

    /// Edges of the stored shortest path from node `i` to node `j`, or to the boundary.
    pub fn witness(&self, graph: &DecodingGraph, i: usize, j: Option<usize>) -> Vec<usize> {
        let target = match j {
            Some(j) => self.defects[j],
            None => self.nearest_boundary[i].expect("node has no boundary partner"),
        };
        graph.path_edges(&self.preds[i], target)
    }
}

pub fn build_syndrome_graph(graph: &DecodingGraph, syndrome: &BitVec) -> Result<SyndromeGraph> {
    if syndrome.len() != graph.num_syndrome_vertices() {
        return Err(Error::InvalidInput("syndrome length mismatch".into()));
    }
    let defects = graph.defects(syndrome);
    let k = defects.len();
    let mut dist = vec![vec![0.0; k]; k];
    let mut boundary_dist = vec![f64::INFINITY; k];
    let mut nearest_boundary = vec![None; k];
    let mut preds = Vec::with_capacity(k);
    for (i, &s) in defects.iter().enumerate() {
        let (d, pred) = graph.shortest_paths(&[s]);
        for (j, &t) in defects.iter().enumerate() {
            dist[i][j] = d[t];
        }
        for &b in graph.boundary() {
            if d[b] < boundary_dist[i] {
                boundary_dist[i] = d[b];
                nearest_boundary[i] = Some(b);
            }
        }
        preds.push(pred);
    }
    Ok(SyndromeGraph {
        defects,
        dist,
        boundary_dist,
        nearest_boundary,
        preds,
    })
}

/// A dual variable over a set of nontrivial syndrome vertices (graph vertex ids).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualSet {
    pub vertices: Vec<usize>,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct MatchingResult {
    /// Matched graph vertices; `None` marks a boundary partner.
    pub pairs: Vec<(usize, Option<usize>)>,
    pub correction: BitVec,
    /// Nonzero duals only.
    pub duals: Vec<DualSet>,
    pub radii: Radii,
    pub objective: f64,
}

impl MatchingResult {
    pub fn dual_sum(&self) -> f64 {
        self.duals.iter().map(|s| s.value).sum()
    }

    pub fn duals_to_json(&self) -> String {
        serde_json::to_string_pretty(&self.duals).expect("dual serialization cannot fail")
    }

    /// `Σ y_S` over sets separating `u` from `v`; `None` stands for a boundary partner.
    pub fn separating_dual(&self, u: Option<usize>, v: Option<usize>) -> f64 {
        self.duals
            .iter()
            .filter(|s| {
                let has = |x: Option<usize>| x.is_some_and(|x| s.vertices.binary_search(&x).is_ok());
                has(u) != has(v)
            })
            .map(|s| s.value)
            .sum()
    }
}

pub fn mwpm_decode(graph: &DecodingGraph, syndrome: &BitVec) -> Result<MatchingResult> {
    let sg = build_syndrome_graph(graph, syndrome)?;
    let mut solver = Blossom::new(&sg);
    solver.solve()?;
    let mut correction = BitVec::zeros(graph.num_edges());
    let mut pairs = Vec::new();
    let mut objective = 0.0;
    for i in 0..sg.len() {
        let partner = match solver.mate[i] {
            Mate::Vertex(j) if j > i => Some(j),
            Mate::Vertex(_) => continue,
            Mate::Boundary => None,
            Mate::Exposed => return Err(Error::UnsupportedSyndrome),
        };
        objective += partner.map_or(sg.boundary_dist[i], |j| sg.dist[i][j]);
        for e in sg.witness(graph, i, partner) {
            correction.flip(e);
        }
        pairs.push((sg.defects[i], partner.map(|j| sg.defects[j])));
    }
    let mut radii = Radii::zeros(graph.num_vertices());
    for i in 0..sg.len() {
        radii.set(sg.defects[i], solver.potential(i).max(0.0))?;
    }
    let mut duals = Vec::new();
    for node in 0..solver.y.len() {
        if !solver.alive(node) || solver.y[node] <= 0.0 {
            continue;
        }
        let mut vertices: Vec<usize> = solver.leaves(node).into_iter().map(|i| sg.defects[i]).collect();
        vertices.sort_unstable();
        duals.push(DualSet {
            vertices,
            value: solver.y[node],
        });
    }
    Ok(MatchingResult {
        pairs,
        correction,
        duals,
        radii,
        objective,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Mate {
    Exposed,
    Boundary,
    Vertex(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Label {
    Free,
    Plus,
    Minus,
}

#[derive(Clone, Copy, Debug)]
enum Event {
    Boundary(usize),
    Grow(usize, usize),
    Shrink(usize, usize),
    Expand(usize),
}

const NONE: usize = usize::MAX;

/// Nodes `0..k` are vertices, `k..2k` are blossoms.
struct Blossom<'a> {
    sg: &'a SyndromeGraph,
    k: usize,
    tol: f64,
    y: Vec<f64>,
    parent: Vec<usize>,
    children: Vec<Vec<usize>>,
    /// `edges[b][t] = (x, z)` with `x` in child `t`, `z` in child `t + 1`.
    edges: Vec<Vec<(usize, usize)>>,
    base: Vec<usize>,
    label: Vec<Label>,
    /// For minus nodes: `(plus vertex, vertex inside this node)`.
    label_edge: Vec<(usize, usize)>,
    mate: Vec<Mate>,
    free_ids: Vec<usize>,
}

impl<'a> Blossom<'a> {
    fn new(sg: &'a SyndromeGraph) -> Self {
        let k = sg.len();
        let scale = sg
            .dist
            .iter()
            .flatten()
            .chain(sg.boundary_dist.iter())
            .copied()
            .filter(|d| d.is_finite())
            .fold(1.0, f64::max);
        Blossom {
            sg,
            k,
            tol: 1e-10 * scale,
            y: vec![0.0; 2 * k],
            parent: vec![NONE; 2 * k],
            children: vec![Vec::new(); 2 * k],
            edges: vec![Vec::new(); 2 * k],
            base: (0..2 * k).map(|i| if i < k { i } else { NONE }).collect(),
            label: vec![Label::Free; 2 * k],
            label_edge: vec![(NONE, NONE); 2 * k],
            mate: vec![Mate::Exposed; k],
            free_ids: (k..2 * k).rev().collect(),
        }
    }

    fn alive(&self, node: usize) -> bool {
        node < self.k || self.base[node] != NONE
    }

    fn top(&self, mut v: usize) -> usize {
        while self.parent[v] != NONE {
            v = self.parent[v];
        }
        v
    }

    /// Child of `b` containing vertex `v`.
    fn child_of(&self, b: usize, mut v: usize) -> usize {
        while self.parent[v] != b {
            v = self.parent[v];
        }
        v
    }

    fn potential(&self, mut v: usize) -> f64 {
        let mut r = self.y[v];
        while self.parent[v] != NONE {
            v = self.parent[v];
            r += self.y[v];
        }
        r
    }

    fn leaves(&self, node: usize) -> Vec<usize> {
        if node < self.k {
            return vec![node];
        }
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            if x < self.k {
                out.push(x);
            } else {
                stack.extend(self.children[x].iter().copied());
            }
        }
        out
    }

    fn top_nodes(&self) -> Vec<usize> {
        (0..2 * self.k)
            .filter(|&n| self.alive(n) && self.parent[n] == NONE)
            .collect()
    }

    fn solve(&mut self) -> Result<()> {
        while let Some(root) = (0..self.k).find(|&i| self.mate[i] == Mate::Exposed) {
            for n in self.top_nodes() {
                self.label[n] = Label::Free;
            }
            let r = self.top(root);
            self.label[r] = Label::Plus;
            self.run_stage()?;
            self.end_stage();
        }
        Ok(())
    }

    fn next_event(&self) -> Option<(f64, Event)> {
        let k = self.k;
        let top: Vec<usize> = (0..k).map(|i| self.top(i)).collect();
        let pot: Vec<f64> = (0..k).map(|i| self.potential(i)).collect();
        let mut best: Option<(f64, Event)> = None;
        let mut offer = |d: f64, e: Event| {
            if best.is_none_or(|(b, _)| d < b) {
                best = Some((d, e));
            }
        };
        for i in 0..k {
            if self.label[top[i]] != Label::Plus {
                continue;
            }
            if self.sg.boundary_dist[i].is_finite() {
                offer(self.sg.boundary_dist[i] - pot[i], Event::Boundary(i));
            }
            for j in 0..k {
                if top[j] == top[i] {
                    continue;
                }
                let slack = self.sg.dist[i][j] - pot[i] - pot[j];
                match self.label[top[j]] {
                    Label::Free => offer(slack, Event::Grow(i, j)),
                    Label::Plus if i < j => offer(slack / 2.0, Event::Shrink(i, j)),
                    _ => {}
                }
            }
        }
        for n in self.top_nodes() {
            if n >= k && self.label[n] == Label::Minus {
                offer(self.y[n], Event::Expand(n));
            }
        }
        best
    }

    fn run_stage(&mut self) -> Result<()> {
        loop {
            let (delta, event) = self
                .next_event()
                .ok_or(Error::UnsupportedSyndrome)?;
            let delta = delta.max(0.0);
            if delta > self.tol {
                for n in self.top_nodes() {
                    match self.label[n] {
                        Label::Plus => self.y[n] += delta,
                        Label::Minus => self.y[n] = (self.y[n] - delta).max(0.0),
                        Label::Free => {}
                    }
                }
            }
            match event {
                Event::Boundary(i) => {
                    self.augment_path(i, Mate::Boundary);
                    return Ok(());
                }
                Event::Grow(i, j) => {
                    let x = self.top(j);
                    match self.mate[self.base[x]] {
                        Mate::Vertex(m) => {
                            self.label[x] = Label::Minus;
                            self.label_edge[x] = (i, j);
                            let partner = self.top(m);
                            self.label[partner] = Label::Plus;
                        }
                        Mate::Exposed | Mate::Boundary => {
                            self.rotate(x, j);
                            self.mate[j] = Mate::Vertex(i);
                            self.augment_path(i, Mate::Vertex(j));
                            return Ok(());
                        }
                    }
                }
                Event::Shrink(i, j) => self.form_blossom(i, j),
                Event::Expand(b) => self.expand_minus(b),
            }
        }
    }

    /// Makes `v` the base of top-level node `x` if `x` is a blossom.
    fn rotate(&mut self, x: usize, v: usize) {
        if x >= self.k {
            self.augment_blossom(x, v);
        }
    }

    /// Flips the alternating path from plus vertex `i` to the tree root; `i` is matched to `partner`.
    fn augment_path(&mut self, mut i: usize, mut partner: Mate) {
        loop {
            let x = self.top(i);
            let old = self.mate[self.base[x]];
            self.rotate(x, i);
            self.mate[i] = partner;
            match old {
                Mate::Vertex(m) => {
                    let minus = self.top(m);
                    let (p, j) = self.label_edge[minus];
                    self.rotate(minus, j);
                    self.mate[j] = Mate::Vertex(p);
                    i = p;
                    partner = Mate::Vertex(j);
                }
                Mate::Exposed | Mate::Boundary => return,
            }
        }
    }

    fn augment_blossom(&mut self, b: usize, v: usize) {
        let t = self.child_of(b, v);
        if t >= self.k {
            self.augment_blossom(t, v);
        }
        let len = self.children[b].len() as isize;
        let i = self.children[b].iter().position(|&c| c == t).unwrap() as isize;
        let (mut j, step) = if i % 2 == 1 { (i - len, 1) } else { (i, -1) };
        let at = |j: isize| j.rem_euclid(len) as usize;
        while j != 0 {
            j += step;
            let (w, x) = if step == 1 {
                self.edges[b][at(j)]
            } else {
                let (a, c) = self.edges[b][at(j - 1)];
                (c, a)
            };
            let tw = self.children[b][at(j)];
            if tw >= self.k {
                self.augment_blossom(tw, w);
            }
            j += step;
            let tx = self.children[b][at(j)];
            if tx >= self.k {
                self.augment_blossom(tx, x);
            }
            self.mate[w] = Mate::Vertex(x);
            self.mate[x] = Mate::Vertex(w);
        }
        let i = i as usize;
        self.children[b].rotate_left(i);
        self.edges[b].rotate_left(i);
        self.base[b] = self.base[self.children[b][0]];
    }

    /// Tree parent of a top-level node and the edge `(inside node, inside parent)`.
    fn tree_parent(&self, n: usize) -> Option<(usize, (usize, usize))> {
        match self.label[n] {
            Label::Plus => match self.mate[self.base[n]] {
                Mate::Vertex(m) => Some((self.top(m), (self.base[n], m))),
                _ => None,
            },
            Label::Minus => {
                let (p, j) = self.label_edge[n];
                Some((self.top(p), (j, p)))
            }
            Label::Free => None,
        }
    }

    fn path_to(&self, from: usize, stop: usize) -> (Vec<usize>, Vec<(usize, usize)>) {
        let mut nodes = vec![from];
        let mut edges = Vec::new();
        let mut cur = from;
        while cur != stop {
            let (next, e) = self.tree_parent(cur).expect("tree path ended before its apex");
            edges.push(e);
            nodes.push(next);
            cur = next;
        }
        (nodes, edges)
    }

    fn form_blossom(&mut self, i: usize, j: usize) {
        let (x, y) = (self.top(i), self.top(j));
        let mut above_x = vec![x];
        let mut cur = x;
        while let Some((next, _)) = self.tree_parent(cur) {
            above_x.push(next);
            cur = next;
        }
        let mut apex = y;
        while !above_x.contains(&apex) {
            apex = self.tree_parent(apex).expect("plus nodes share a tree").0;
        }
        let (xs, xe) = self.path_to(x, apex);
        let (ys, ye) = self.path_to(y, apex);
        let mut children: Vec<usize> = xs.iter().rev().copied().collect();
        let mut edges: Vec<(usize, usize)> = xe.iter().rev().map(|&(a, b)| (b, a)).collect();
        edges.push((i, j));
        children.extend(ys[..ys.len() - 1].iter().copied());
        edges.extend(ye.iter().copied());
        debug_assert_eq!(children.len(), edges.len());
        debug_assert!(children.len() % 2 == 1);

        let b = self.free_ids.pop().expect("blossom ids exhausted");
        for &c in &children {
            self.parent[c] = b;
        }
        self.base[b] = self.base[apex];
        self.children[b] = children;
        self.edges[b] = edges;
        self.y[b] = 0.0;
        self.parent[b] = NONE;
        self.label[b] = Label::Plus;
    }

    fn dissolve(&mut self, b: usize) -> (Vec<usize>, Vec<(usize, usize)>) {
        let children = std::mem::take(&mut self.children[b]);
        let edges = std::mem::take(&mut self.edges[b]);
        for &c in &children {
            self.parent[c] = NONE;
        }
        self.base[b] = NONE;
        self.y[b] = 0.0;
        self.label[b] = Label::Free;
        self.free_ids.push(b);
        (children, edges)
    }

    /// Expands a minus blossom whose dual hit zero, relabelling the even path
    /// from the entry child to the base.
    fn expand_minus(&mut self, b: usize) {
        let (p, j) = self.label_edge[b];
        let entry = self.child_of(b, j);
        let (children, edges) = self.dissolve(b);
        for &c in &children {
            self.label[c] = Label::Free;
        }
        let len = children.len() as isize;
        let at = |j: isize| j.rem_euclid(len) as usize;
        let e = children.iter().position(|&c| c == entry).unwrap() as isize;
        let step: isize = if e % 2 == 1 { 1 } else { -1 };
        self.label[entry] = Label::Minus;
        self.label_edge[entry] = (p, j);
        let mut idx = e;
        while at(idx) != 0 {
            let plus = at(idx + step);
            self.label[children[plus]] = Label::Plus;
            let minus = at(idx + 2 * step);
            let edge = if step == 1 {
                edges[plus]
            } else {
                let (a, c) = edges[minus];
                (c, a)
            };
            self.label[children[minus]] = Label::Minus;
            self.label_edge[children[minus]] = edge;
            idx += 2 * step;
        }
    }

    fn end_stage(&mut self) {
        let mut stack: Vec<usize> = self.top_nodes();
        while let Some(n) = stack.pop() {
            self.label[n] = Label::Free;
            if n >= self.k && self.y[n] <= self.tol {
                let (children, _) = self.dissolve(n);
                stack.extend(children);
            }
        }
    }
}

/// Minimum-weight valid edge set in the opposite logical class to `correction`.
///
/// Enumerates the coset `correction + cycle space` exactly, so the cycle space
/// of the graph (relative to the boundary) must have dimension at most 24.
pub fn min_weight_opposite_class(
    graph: &DecodingGraph,
    syndrome: &BitVec,
    correction: &BitVec,
) -> Result<(BitVec, f64)> {
    if !graph.is_valid_edge_set(correction, syndrome) {
        return Err(Error::InvalidInput("correction does not match the syndrome".into()));
    }
    let m = graph.num_edges();
    let mut incidence = BitMatrix::zeros(graph.num_syndrome_vertices(), m);
    for (eid, e) in graph.edges().iter().enumerate() {
        for x in [e.u, e.v] {
            if let Some(i) = graph.syndrome_index(x) {
                incidence.flip(i, eid);
            }
        }
    }
    let kernel = incidence.kernel();
    if kernel.len() > 24 {
        return Err(Error::BudgetExceeded(format!(
            "cycle space has dimension {}",
            kernel.len()
        )));
    }
    let functional = logical_functional(graph)?;
    let weights: Vec<f64> = graph.edges().iter().map(|e| e.weight).collect();
    let supports: Vec<Vec<usize>> = kernel.iter().map(|v| v.support().collect()).collect();
    let flips: Vec<bool> = kernel.iter().map(|v| v.dot(&functional)).collect();

    let mut current = correction.clone();
    let mut weight = graph.weight_of(&current);
    let mut class = false;
    let mut best: Option<(u64, f64)> = None;
    let mut code: u64 = 0;
    for step in 1u64..(1u64 << kernel.len()) {
        let bit = step.trailing_zeros() as usize;
        code ^= 1 << bit;
        for &e in &supports[bit] {
            if current.get(e) {
                weight -= weights[e];
            } else {
                weight += weights[e];
            }
            current.flip(e);
        }
        class ^= flips[bit];
        if class && best.is_none_or(|(_, w)| weight < w) {
            best = Some((code, weight));
        }
    }
    let (code, _) = best.ok_or_else(|| Error::InvalidGraph("graph has no nontrivial logical".into()))?;
    let mut out = correction.clone();
    for (i, v) in kernel.iter().enumerate() {
        if code >> i & 1 == 1 {
            out.xor_assign(v);
        }
    }
    let w = graph.weight_of(&out);
    Ok((out, w))
}

/// Edge functional that is odd exactly on nontrivial logical cycles.
pub fn logical_functional(graph: &DecodingGraph) -> Result<BitVec> {
    Ok(match graph.logical_span()? {
        LogicalSpan::Boundaries(b1, _) => BitVec::from_bools(
            &graph
                .edges()
                .iter()
                .map(|e| e.u == b1 || e.v == b1)
                .collect::<Vec<_>>(),
        ),
        LogicalSpan::Cycle => BitVec::from_support(graph.num_edges(), [0]),
    })
}

/// Splits an edge set into edge-disjoint paths and returns their endpoint
/// pairs. Every boundary incidence is its own endpoint (`None`). Closed
/// cycles left over after all odd vertices are used are dropped.
pub fn path_endpoints(graph: &DecodingGraph, edges: &BitVec) -> Vec<(Option<usize>, Option<usize>)> {
    let n = graph.num_vertices();
    let m = graph.num_edges();
    // boundary incidences become fresh vertices n + eid
    let node = |eid: usize, x: usize| if graph.is_boundary(x) { n + eid } else { x };
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n + m];
    for eid in edges.support() {
        let e = &graph.edges()[eid];
        let (a, b) = (node(eid, e.u), node(eid, e.v));
        adj[a].push((eid, b));
        adj[b].push((eid, a));
    }
    let mut used = vec![false; m];
    let mut remaining: Vec<usize> = adj.iter().map(Vec::len).collect();
    let as_endpoint = |x: usize| (x < n).then_some(x);
    let mut out = Vec::new();
    for start in 0..n + m {
        while remaining[start] % 2 == 1 {
            let mut cur = start;
            loop {
                let Some(&(eid, next)) = adj[cur].iter().find(|(e, _)| !used[*e]) else { break };
                used[eid] = true;
                remaining[cur] -= 1;
                remaining[next] -= 1;
                cur = next;
            }
            out.push((as_endpoint(start), as_endpoint(cur)));
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OverlapReport {
    /// `|M ∩ C|_ω`.
    pub overlap: f64,
    /// `Σ_{e ∈ ∂M} Σ_{S ∈ δ(e)} y_S`.
    pub endpoint_duals: f64,
    /// `|F|_ω`.
    pub correction_weight: f64,
}

impl OverlapReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.overlap >= self.endpoint_duals - tol && self.endpoint_duals >= self.correction_weight - tol
    }
}

/// Evaluates both sides of the cluster-overlap and endpoint-dual inequalities for `other`.
pub fn overlap_check(
    graph: &DecodingGraph,
    result: &MatchingResult,
    clusters: &crate::graph::ClusterSet,
    other: &BitVec,
) -> OverlapReport {
    let overlap = other.support().map(|e| clusters.covered(e)).sum();
    let endpoint_duals = path_endpoints(graph, other)
        .into_iter()
        .map(|(a, b)| result.separating_dual(a, b))
        .sum();
    OverlapReport {
        overlap,
        endpoint_duals,
        correction_weight: graph.weight_of(&result.correction),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Certificate {
    pub min_slack: f64,
    pub dual_sum: f64,
    pub objective: f64,
    pub min_dual: f64,
}

/// Recomputes slacks of every pair and boundary pair against the reported duals.
pub fn certificate(graph: &DecodingGraph, syndrome: &BitVec, result: &MatchingResult) -> Result<Certificate> {
    let sg = build_syndrome_graph(graph, syndrome)?;
    let mut min_slack = f64::INFINITY;
    for i in 0..sg.len() {
        let u = Some(sg.defects[i]);
        if sg.boundary_dist[i].is_finite() {
            min_slack = min_slack.min(sg.boundary_dist[i] - result.separating_dual(u, None));
        }
        for j in i + 1..sg.len() {
            let v = Some(sg.defects[j]);
            min_slack = min_slack.min(sg.dist[i][j] - result.separating_dual(u, v));
        }
    }
    Ok(Certificate {
        min_slack,
        dual_sum: result.dual_sum(),
        objective: result.objective,
        min_dual: result.duals.iter().map(|s| s.value).fold(f64::INFINITY, f64::min),
    })
}
