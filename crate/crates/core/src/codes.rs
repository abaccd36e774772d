//! CSS codes and their decoding graphs.
//!
//! Decoding graphs here are built from `H_Z`: vertices are Z checks, edges are
//! qubits, and X errors on a qubit flip the checks at the edge's endpoints.
//! Every graph is returned with unit weights; noise parameters set weights later.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::{BitMatrix, BitVec, EchelonBasis};
use crate::graph::{DecodingGraph, Edge, EdgeLabel};

/// Largest qubit count accepted by the constructors.
pub const MAX_QUBITS: usize = 1 << 16;

#[derive(Clone, Debug, PartialEq)]
pub struct CssCode {
    pub hx: BitMatrix,
    pub hz: BitMatrix,
    pub n: usize,
    pub k: usize,
    /// Rows pair with `lz`: `lx · lzᵀ = I`.
    pub lx: BitMatrix,
    pub lz: BitMatrix,
}

impl CssCode {
    pub fn new(hx: BitMatrix, hz: BitMatrix) -> Result<Self> {
        if hx.num_cols() != hz.num_cols() {
            return Err(Error::InvalidInput(format!(
                "H_X has {} columns but H_Z has {}",
                hx.num_cols(),
                hz.num_cols()
            )));
        }
        let n = hx.num_cols();
        if n > MAX_QUBITS {
            return Err(Error::TooLarge(format!("{n} qubits")));
        }
        if !hx.mul_transpose(&hz).is_zero() {
            return Err(Error::InvalidInput("H_X H_Zᵀ is not zero".into()));
        }
        let (lx, lz) = logical_basis(&hx, &hz)?;
        let k = lz.num_rows();
        Ok(CssCode { hx, hz, n, k, lx, lz })
    }

    /// `H_Z e`: the checks flipped by X error `e`.
    pub fn z_syndrome(&self, e: &BitVec) -> Result<BitVec> {
        syndrome(&self.hz, e)
    }

    /// Whether the X error `e` anticommutes with any logical Z.
    pub fn flips_logical(&self, e: &BitVec) -> bool {
        self.lz.rows().iter().any(|l| l.dot(e))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&CodeFile {
            n: self.n,
            k: self.k,
            hx: self.hx.row_supports(),
            hz: self.hz.row_supports(),
        })
        .expect("code serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: CodeFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let build = |rows: &[Vec<usize>]| -> Result<BitMatrix> {
            if rows.iter().flatten().any(|&c| c >= f.n) {
                return Err(Error::Parse("column index out of range".into()));
            }
            Ok(BitMatrix::from_row_supports(rows.len(), f.n, rows))
        };
        let code = CssCode::new(build(&f.hx)?, build(&f.hz)?)?;
        if code.k != f.k {
            return Err(Error::Parse(format!("file says k={} but matrices give k={}", f.k, code.k)));
        }
        Ok(code)
    }
}

#[derive(Serialize, Deserialize)]
struct CodeFile {
    n: usize,
    k: usize,
    hx: Vec<Vec<usize>>,
    hz: Vec<Vec<usize>>,
}

pub fn syndrome(h: &BitMatrix, e: &BitVec) -> Result<BitVec> {
    if h.num_cols() != e.len() {
        return Err(Error::InvalidInput(format!(
            "matrix has {} columns, vector has length {}",
            h.num_cols(),
            e.len()
        )));
    }
    Ok(h.mul_vec(e))
}

/// Logical representatives `(L_X, L_Z)`, symplectically paired.
///
/// `L_Z` rows are kernel vectors of `H_X` independent modulo the row space of
/// `H_Z`, taken in kernel order (lowest free column first); `L_X` likewise
/// with the roles swapped, then transformed so that `L_X L_Zᵀ = I`.
pub fn logical_basis(hx: &BitMatrix, hz: &BitMatrix) -> Result<(BitMatrix, BitMatrix)> {
    let n = hx.num_cols();
    let lz = independent_cosets(&hx.kernel(), hz, n);
    let lx = independent_cosets(&hz.kernel(), hx, n);
    if lx.num_rows() != lz.num_rows() {
        return Err(Error::InvalidInput(format!(
            "found {} X logicals but {} Z logicals",
            lx.num_rows(),
            lz.num_rows()
        )));
    }
    let pairing = lx.mul_transpose(&lz);
    let inv = pairing
        .inverse()
        .ok_or_else(|| Error::InvalidInput("logical pairing matrix is singular".into()))?;
    Ok((inv.mul(&lx), lz))
}

fn independent_cosets(kernel: &[BitVec], stabilisers: &BitMatrix, n: usize) -> BitMatrix {
    let mut basis = EchelonBasis::new(n);
    for r in stabilisers.rows() {
        basis.insert(r);
    }
    let mut out = BitMatrix::zeros(0, n);
    for v in kernel {
        if basis.insert(v) {
            out.push_row(v.clone());
        }
    }
    out
}

/// A CSS code with its Z-check decoding graph. Edge `fault_id` is the qubit index.
#[derive(Clone, Debug)]
pub struct CodeGraph {
    pub code: CssCode,
    pub graph: DecodingGraph,
}

impl CodeGraph {
    /// Edges whose qubit lies in the support of the first logical Z.
    pub fn logical_mask(&self) -> BitVec {
        let lz = self.code.lz.row(0);
        BitVec::from_bools(
            &self
                .graph
                .edges()
                .iter()
                .map(|e| lz.get(e.fault_id))
                .collect::<Vec<_>>(),
        )
    }
}

/// Builds a graph with one vertex per row of `h` and boundary vertices `r`, `r+1`.
/// `side(q)` picks the boundary (0 or 1) for weight-one columns.
fn graph_from_checks(h: &BitMatrix, side: impl Fn(usize) -> usize) -> Result<DecodingGraph> {
    let r = h.num_rows();
    let mut edges = Vec::with_capacity(h.num_cols());
    for (q, checks) in h.col_supports().iter().enumerate() {
        let (u, v) = match checks.as_slice() {
            [a] => (*a, r + side(q)),
            [a, b] => (*a, *b),
            _ => {
                return Err(Error::InvalidGraph(format!(
                    "qubit {q} touches {} checks",
                    checks.len()
                )))
            }
        };
        edges.push(Edge {
            label: Some(EdgeLabel::Space),
            ..Edge::new(u, v, 1.0, q)
        });
    }
    DecodingGraph::new(r + 2, vec![r, r + 1], edges)
}

/// Length-`n` repetition code, including the redundant check that closes the cycle.
pub fn repetition_code(n: usize) -> Result<CodeGraph> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("repetition code needs n >= 2, got {n}")));
    }
    if n > MAX_QUBITS {
        return Err(Error::TooLarge(format!("{n} qubits")));
    }
    let supports: Vec<Vec<usize>> = (0..n).map(|c| vec![c, (c + 1) % n]).collect();
    let hz = BitMatrix::from_row_supports(n, n, &supports);
    let code = CssCode::new(BitMatrix::zeros(0, n), hz)?;
    // bit q sits between checks q-1 and q
    let edges = (0..n)
        .map(|q| Edge {
            label: Some(EdgeLabel::Space),
            ..Edge::new((q + n - 1) % n, q, 1.0, q)
        })
        .collect();
    let graph = DecodingGraph::new(n, vec![], edges)?;
    Ok(CodeGraph { code, graph })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceVariant {
    Planar,
    Rotated,
}

impl FromStr for SurfaceVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "planar" => Ok(SurfaceVariant::Planar),
            "rotated" => Ok(SurfaceVariant::Rotated),
            _ => Err(Error::InvalidInput(format!("unknown surface code variant `{s}`"))),
        }
    }
}

pub fn surface_code(d: usize, variant: SurfaceVariant) -> Result<CodeGraph> {
    if d < 3 || d % 2 == 0 {
        return Err(Error::InvalidInput(format!("distance must be odd and >= 3, got {d}")));
    }
    if d * d * 2 > MAX_QUBITS {
        return Err(Error::TooLarge(format!("distance {d}")));
    }
    match variant {
        SurfaceVariant::Rotated => rotated(d),
        SurfaceVariant::Planar => planar(d),
    }
}

/// Qubit `(i, j)` is `i*d + j`. Plaquette `(a, b)` holds qubits
/// `(a..=a+1) x (b..=b+1)` clipped to the lattice. Z-type boundary plaquettes
/// sit on the top and bottom edges, so X-error strings run left to right.
fn rotated(d: usize) -> Result<CodeGraph> {
    let di = d as i64;
    let mut z_rows = Vec::new();
    let mut x_rows = Vec::new();
    for a in -1..di {
        for b in -1..di {
            let bulk = (0..di - 1).contains(&a) && (0..di - 1).contains(&b);
            let even = (a + b).rem_euclid(2) == 0;
            let is_z = even
                && (bulk || ((a == -1 || a == di - 1) && (0..di - 1).contains(&b)));
            let is_x = !even
                && (bulk || ((b == -1 || b == di - 1) && (0..di - 1).contains(&a)));
            if !(is_z || is_x) {
                continue;
            }
            let mut support = Vec::new();
            for i in a..=a + 1 {
                for j in b..=b + 1 {
                    if (0..di).contains(&i) && (0..di).contains(&j) {
                        support.push((i * di + j) as usize);
                    }
                }
            }
            support.sort_unstable();
            if is_z {
                z_rows.push(support);
            } else {
                x_rows.push(support);
            }
        }
    }
    let n = d * d;
    let hz = BitMatrix::from_row_supports(z_rows.len(), n, &z_rows);
    let hx = BitMatrix::from_row_supports(x_rows.len(), n, &x_rows);
    let graph = graph_from_checks(&hz, |q| usize::from(q % d >= d / 2))?;
    let code = CssCode::new(hx, hz)?;
    Ok(CodeGraph { code, graph })
}

/// Z checks form a `d x (d-1)` vertex grid. Horizontal qubits `(r, c)` for
/// `c in 0..d` are `r*d + c`, with `c = 0` and `c = d-1` hanging off the left
/// and right boundaries; vertical qubits follow at `d² + r*(d-1) + c`.
fn planar(d: usize) -> Result<CodeGraph> {
    let cols = d - 1;
    let n = d * d + cols * cols;
    let vertex = |r: usize, c: usize| r * cols + c;
    let horizontal = |r: usize, c: usize| r * d + c;
    let vertical = |r: usize, c: usize| d * d + r * cols + c;

    let mut z_rows = vec![Vec::new(); d * cols];
    for r in 0..d {
        for c in 0..d {
            if c >= 1 {
                z_rows[vertex(r, c - 1)].push(horizontal(r, c));
            }
            if c < cols {
                z_rows[vertex(r, c)].push(horizontal(r, c));
            }
        }
    }
    for r in 0..cols {
        for c in 0..cols {
            z_rows[vertex(r, c)].push(vertical(r, c));
            z_rows[vertex(r + 1, c)].push(vertical(r, c));
        }
    }
    let mut x_rows = Vec::new();
    for r in 0..cols {
        for c in 0..d {
            let mut face = vec![horizontal(r, c), horizontal(r + 1, c)];
            if c >= 1 {
                face.push(vertical(r, c - 1));
            }
            if c < cols {
                face.push(vertical(r, c));
            }
            x_rows.push(face);
        }
    }
    for row in z_rows.iter_mut().chain(x_rows.iter_mut()) {
        row.sort_unstable();
    }
    let hz = BitMatrix::from_row_supports(z_rows.len(), n, &z_rows);
    let hx = BitMatrix::from_row_supports(x_rows.len(), n, &x_rows);
    let graph = graph_from_checks(&hz, |q| usize::from(q < d * d && q % d == d - 1))?;
    let code = CssCode::new(hx, hz)?;
    Ok(CodeGraph { code, graph })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    Data { round: usize, qubit: usize },
    Measurement { round: usize, check: usize },
}

/// Noise parameters of a repeated-measurement memory experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacetimeSpec {
    /// Total rounds, the last of which is measured perfectly.
    pub rounds: usize,
    pub p: f64,
    pub q: f64,
}

impl SpacetimeSpec {
    pub fn new(rounds: usize, p: f64, q: f64) -> Result<Self> {
        if rounds == 0 {
            return Err(Error::InvalidInput("need at least one round".into()));
        }
        for (name, x) in [("p", p), ("q", q)] {
            if !(x > 0.0 && x < 0.5) {
                return Err(Error::InvalidInput(format!("{name} = {x} is outside (0, 1/2)")));
            }
        }
        Ok(SpacetimeSpec { rounds, p, q })
    }
}

/// `ln((1-p)/p)`.
pub fn llr_weight(p: f64) -> f64 {
    ((1.0 - p) / p).ln()
}

/// Layered graph over difference syndromes. Syndrome vertex `(t, c)` is
/// `t*r + c`; boundary vertices (if any) come after all layers.
#[derive(Clone, Debug)]
pub struct SpacetimeGraph {
    pub graph: DecodingGraph,
    pub spec: SpacetimeSpec,
    pub num_qubits: usize,
    pub num_checks: usize,
    /// Edges whose data qubit lies in the first logical Z.
    pub logical_mask: BitVec,
}

impl SpacetimeGraph {
    pub fn new(base: &CodeGraph, spec: SpacetimeSpec) -> Result<Self> {
        let g = &base.graph;
        let n = base.code.n;
        let r = g.num_syndrome_vertices();
        let layers = spec.rounds;
        let wp = llr_weight(spec.p);
        let wq = llr_weight(spec.q);
        let num_b = g.boundary().len();
        let map = |v: usize, t: usize| -> usize {
            match g.syndrome_index(v) {
                Some(i) => t * r + i,
                None => layers * r + g.boundary().iter().position(|&b| b == v).unwrap(),
            }
        };
        let lz = base.code.lz.row(0);
        let mut edges = Vec::new();
        let mut mask = Vec::new();
        for t in 0..layers {
            for e in g.edges() {
                edges.push(Edge {
                    label: Some(EdgeLabel::Space),
                    ..Edge::new(map(e.u, t), map(e.v, t), wp, t * n + e.fault_id)
                });
                mask.push(lz.get(e.fault_id));
            }
            if t + 1 < layers {
                for c in 0..r {
                    edges.push(Edge {
                        label: Some(EdgeLabel::Time),
                        ..Edge::new(t * r + c, (t + 1) * r + c, wq, layers * n + t * r + c)
                    });
                    mask.push(false);
                }
            }
        }
        let boundary = (0..num_b).map(|i| layers * r + i).collect();
        let graph = DecodingGraph::new(layers * r + num_b, boundary, edges)?;
        Ok(SpacetimeGraph {
            graph,
            spec,
            num_qubits: n,
            num_checks: r,
            logical_mask: BitVec::from_bools(&mask),
        })
    }

    pub fn fault(&self, fault_id: usize) -> Fault {
        let dn = self.spec.rounds * self.num_qubits;
        if fault_id < dn {
            Fault::Data {
                round: fault_id / self.num_qubits,
                qubit: fault_id % self.num_qubits,
            }
        } else {
            let m = fault_id - dn;
            Fault::Measurement {
                round: m / self.num_checks,
                check: m % self.num_checks,
            }
        }
    }

    /// Whether the data part of `edges` flips the logical.
    pub fn flips_logical(&self, edges: &BitVec) -> bool {
        edges.dot(&self.logical_mask)
    }
}

/// Polynomial in the group algebra of the cyclic group of order `lift`, as an exponent list.
pub type Monomials = Vec<u32>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QclpSpec {
    pub base: Vec<Vec<Monomials>>,
    pub lift: u32,
}

impl QclpSpec {
    /// The 3x5 base matrix with lift 31 giving a `[[1054, 140]]` code.
    pub fn reference() -> Self {
        let rows: [[u32; 5]; 3] = [[1, 2, 4, 8, 16], [5, 10, 20, 9, 18], [25, 19, 7, 14, 28]];
        QclpSpec {
            base: rows
                .iter()
                .map(|r| r.iter().map(|&a| vec![a]).collect())
                .collect(),
            lift: 31,
        }
    }

    fn validate(&self) -> Result<(usize, usize)> {
        if self.lift == 0 {
            return Err(Error::InvalidInput("lift size must be positive".into()));
        }
        let m = self.base.len();
        let cols = self.base.first().map_or(0, |r| r.len());
        if m == 0 || cols == 0 || self.base.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidInput("base matrix must be a non-empty rectangle".into()));
        }
        if let Some(a) = self.base.iter().flatten().flatten().find(|&&a| a >= self.lift) {
            return Err(Error::InvalidInput(format!("exponent {a} not below lift {}", self.lift)));
        }
        Ok((m, cols))
    }
}

/// Lifts a block matrix: block `(i, j)` becomes the circulant sum of `W^a` over `entry(i, j)`.
fn lift_blocks<'a>(
    rows: usize,
    cols: usize,
    lift: usize,
    entry: impl Fn(usize, usize) -> Option<&'a Monomials>,
    antipode: impl Fn(usize, usize) -> bool,
) -> BitMatrix {
    let mut m = BitMatrix::zeros(rows * lift, cols * lift);
    for bi in 0..rows {
        for bj in 0..cols {
            let Some(poly) = entry(bi, bj) else { continue };
            let neg = antipode(bi, bj);
            for &a in poly {
                let a = a as usize % lift;
                let shift = if neg { (lift - a) % lift } else { a };
                for i in 0..lift {
                    m.flip(bi * lift + i, bj * lift + (i + shift) % lift);
                }
            }
        }
    }
    m
}

/// Lifted product of the base matrix with its conjugate transpose.
pub fn qclp_code(spec: &QclpSpec) -> Result<CssCode> {
    let (m, nb) = spec.validate()?;
    let lift = spec.lift as usize;
    let n = (m * m + nb * nb)
        .checked_mul(lift)
        .filter(|&n| n <= MAX_QUBITS)
        .ok_or_else(|| Error::TooLarge("lifted product is too large".into()))?;
    let a = |i: usize, j: usize| Some(&spec.base[i][j]);
    // conj(A)[i][j] = antipode(A[j][i])
    let a_conj = |i: usize, j: usize| Some(&spec.base[j][i]);

    // A ⊗ I_nb : (m*nb) x (nb*nb); block ((i1,i2),(j1,j2)) = A[i1][j1] δ(i2,j2)
    let a_kron_i = lift_blocks(
        m * nb,
        nb * nb,
        lift,
        |r, c| (r % nb == c % nb).then(|| a(r / nb, c / nb)).flatten(),
        |_, _| false,
    );
    // I_m ⊗ A* : (m*nb) x (m*m); block ((i1,i2),(j1,j2)) = δ(i1,j1) A*[i2][j2]
    let i_kron_conj = lift_blocks(
        m * nb,
        m * m,
        lift,
        |r, c| (r / nb == c / m).then(|| a_conj(r % nb, c % m)).flatten(),
        |_, _| true,
    );
    // I_nb ⊗ A : (nb*m) x (nb*nb); block ((i1,i2),(j1,j2)) = δ(i1,j1) A[i2][j2]
    let i_kron_a = lift_blocks(
        nb * m,
        nb * nb,
        lift,
        |r, c| (r / m == c / nb).then(|| a(r % m, c % nb)).flatten(),
        |_, _| false,
    );
    // A* ⊗ I_m : (nb*m) x (m*m); block ((i1,i2),(j1,j2)) = A*[i1][j1] δ(i2,j2)
    let conj_kron_i = lift_blocks(
        nb * m,
        m * m,
        lift,
        |r, c| (r % m == c % m).then(|| a_conj(r / m, c / m)).flatten(),
        |_, _| true,
    );
    let hz = a_kron_i.hstack(&i_kron_conj);
    let hx = i_kron_a.hstack(&conj_kron_i);
    debug_assert_eq!(hz.num_cols(), n);
    CssCode::new(hx, hz)
}

/// Sparse text format: header `cols rows`, max column/row weights, the weight
/// lists, then 1-based supports of every column and every row, zero padded.
pub fn to_alist(h: &BitMatrix) -> String {
    let cols = h.col_supports();
    let rows = h.row_supports();
    let max_c = cols.iter().map(Vec::len).max().unwrap_or(0);
    let max_r = rows.iter().map(Vec::len).max().unwrap_or(0);
    let mut s = String::new();
    let join = |v: &mut dyn Iterator<Item = usize>| {
        v.map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
    };
    writeln!(s, "{} {}", h.num_cols(), h.num_rows()).unwrap();
    writeln!(s, "{max_c} {max_r}").unwrap();
    writeln!(s, "{}", join(&mut cols.iter().map(Vec::len))).unwrap();
    writeln!(s, "{}", join(&mut rows.iter().map(Vec::len))).unwrap();
    for (list, width) in [(&cols, max_c), (&rows, max_r)] {
        for sup in list.iter() {
            let mut line: Vec<usize> = sup.iter().map(|x| x + 1).collect();
            line.resize(width, 0);
            writeln!(s, "{}", join(&mut line.into_iter())).unwrap();
        }
    }
    s
}

pub fn from_alist(text: &str) -> Result<BitMatrix> {
    let mut nums = text
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|e| Error::Parse(format!("`{t}`: {e}"))));
    let mut next = || nums.next().unwrap_or(Err(Error::Parse("unexpected end of input".into())));
    let (n, r) = (next()?, next()?);
    let (max_c, max_r) = (next()?, next()?);
    let col_w: Vec<usize> = (0..n).map(|_| next()).collect::<Result<_>>()?;
    let _row_w: Vec<usize> = (0..r).map(|_| next()).collect::<Result<_>>()?;
    let mut h = BitMatrix::zeros(r, n);
    for (c, &w) in col_w.iter().enumerate() {
        for i in 0..max_c {
            let x = next()?;
            if i < w {
                if x == 0 || x > r {
                    return Err(Error::Parse(format!("row index {x} out of range")));
                }
                h.set(x - 1, c, true);
            }
        }
    }
    for _ in 0..r * max_r {
        next()?;
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{quotient_shortest_path, ClusterSet, Radii};

    fn check_css(code: &CssCode) {
        assert!(code.hx.mul_transpose(&code.hz).is_zero());
        assert_eq!(code.k, code.n - code.hx.rank() - code.hz.rank());
        assert_eq!(code.lx.mul_transpose(&code.lz), BitMatrix::identity(code.k));
        assert!(code.hx.mul_transpose(&code.lz).is_zero());
        assert!(code.hz.mul_transpose(&code.lx).is_zero());
    }

    fn check_graph_matches(cg: &CodeGraph) {
        let g = &cg.graph;
        assert_eq!(g.num_edges(), cg.code.n);
        assert_eq!(g.num_syndrome_vertices(), cg.code.hz.num_rows());
        for q in 0..cg.code.n {
            let e = BitVec::from_support(cg.code.n, [q]);
            assert_eq!(g.syndrome_of(&e), cg.code.z_syndrome(&e).unwrap());
        }
    }

    #[test]
    fn repetition_shapes() {
        let c3 = repetition_code(3).unwrap();
        assert_eq!(c3.graph.num_vertices(), 3);
        assert_eq!(c3.graph.num_edges(), 3);
        assert!(c3.graph.is_cycle());
        assert_eq!(c3.code.k, 1);
        assert_eq!(c3.code.lx.row(0), &BitVec::ones(3));
        check_css(&c3.code);
        check_graph_matches(&c3);

        let c2 = repetition_code(2).unwrap();
        assert_eq!(c2.graph.num_vertices(), 2);
        assert!(c2.graph.edges().iter().all(|e| (e.u.min(e.v), e.u.max(e.v)) == (0, 1)));
        assert!(repetition_code(1).is_err());
        let c12 = repetition_code(12).unwrap();
        assert!(c12.graph.is_cycle());
        check_graph_matches(&c12);
    }

    #[test]
    fn surface_shapes() {
        let r3 = surface_code(3, SurfaceVariant::Rotated).unwrap();
        assert_eq!(r3.code.n, 9);
        assert_eq!(r3.code.hz.num_rows(), 4);
        assert_eq!(r3.code.k, 1);
        let p3 = surface_code(3, SurfaceVariant::Planar).unwrap();
        assert_eq!(p3.code.n, 13);
        assert_eq!(p3.code.k, 1);
        for d in [3, 5, 7] {
            for v in [SurfaceVariant::Rotated, SurfaceVariant::Planar] {
                let cg = surface_code(d, v).unwrap();
                check_css(&cg.code);
                check_graph_matches(&cg);
                let g = cg.graph.with_uniform_weight(1.0).unwrap();
                let cs = ClusterSet::new(&g, &Radii::zeros(g.num_vertices()), None);
                let (b1, b2) = (g.boundary()[0], g.boundary()[1]);
                assert_eq!(quotient_shortest_path(&g, &cs, b1, b2).unwrap(), d as f64);
            }
        }
        assert!(surface_code(4, SurfaceVariant::Rotated).is_err());
        assert!(surface_code(1, SurfaceVariant::Planar).is_err());
    }

    #[test]
    fn boundary_paths_are_logical() {
        for v in [SurfaceVariant::Rotated, SurfaceVariant::Planar] {
            let cg = surface_code(5, v).unwrap();
            let g = &cg.graph;
            let (_, pred) = g.shortest_paths(&[g.boundary()[0]]);
            let path = g.path_edges(&pred, g.boundary()[1]);
            let e = BitVec::from_support(cg.code.n, path.iter().map(|&i| g.edges()[i].fault_id));
            assert!(cg.code.z_syndrome(&e).unwrap().is_zero());
            assert!(cg.code.flips_logical(&e));
        }
    }

    #[test]
    fn rotated_d3_has_weight3_straight_logical() {
        let cg = surface_code(3, SurfaceVariant::Rotated).unwrap();
        let code = &cg.code;
        // enumerate lz + rowspace(hz)
        let rows = code.hz.rows();
        let mut best: Option<BitVec> = None;
        for mask in 0u32..(1 << rows.len()) {
            let mut v = code.lz.row(0).clone();
            for (i, r) in rows.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    v.xor_assign(r);
                }
            }
            if best.as_ref().map_or(true, |b| v.weight() < b.weight()) {
                best = Some(v);
            }
        }
        let best = best.unwrap();
        assert_eq!(best.weight(), 3);
        let support: Vec<usize> = best.support().collect();
        let same_row = support.iter().all(|q| q / 3 == support[0] / 3);
        let same_col = support.iter().all(|q| q % 3 == support[0] % 3);
        assert!(same_row || same_col);
    }

    #[test]
    fn spacetime_counts() {
        let base = surface_code(3, SurfaceVariant::Rotated).unwrap();
        let st = SpacetimeGraph::new(&base, SpacetimeSpec::new(3, 0.01, 0.02).unwrap()).unwrap();
        assert_eq!(st.graph.num_syndrome_vertices(), 12);
        let vertical = st
            .graph
            .edges()
            .iter()
            .filter(|e| e.label == Some(EdgeLabel::Time))
            .count();
        assert_eq!(vertical, 8);
        assert_eq!(st.graph.boundary().len(), 2);
        assert!(matches!(st.fault(9 + 4), Fault::Data { round: 1, qubit: 4 }));
        assert!(matches!(st.fault(27 + 5), Fault::Measurement { round: 1, check: 1 }));

        let flat = SpacetimeGraph::new(&base, SpacetimeSpec::new(1, 0.01, 0.01).unwrap()).unwrap();
        assert_eq!(flat.graph.num_edges(), base.graph.num_edges());
        for (a, b) in flat.graph.edges().iter().zip(base.graph.edges()) {
            assert_eq!((a.u, a.v, a.fault_id), (b.u, b.v, b.fault_id));
        }
        assert!(SpacetimeSpec::new(0, 0.1, 0.1).is_err());
        assert!(SpacetimeSpec::new(1, 0.6, 0.1).is_err());
    }

    #[test]
    fn qclp_small_cases() {
        let trivial = qclp_code(&QclpSpec {
            base: vec![vec![vec![0]]],
            lift: 1,
        })
        .unwrap();
        assert_eq!(trivial.n, 2);
        check_css(&trivial);

        let toric = qclp_code(&QclpSpec {
            base: vec![vec![vec![1]]],
            lift: 3,
        })
        .unwrap();
        assert_eq!(toric.n, 6);
        assert_eq!(toric.k, 6 - toric.hx.rank() - toric.hz.rank());
        check_css(&toric);

        assert!(qclp_code(&QclpSpec {
            base: vec![vec![vec![3]]],
            lift: 3
        })
        .is_err());
    }

    #[test]
    fn alist_and_json_round_trip() {
        let cg = surface_code(3, SurfaceVariant::Planar).unwrap();
        let back = from_alist(&to_alist(&cg.code.hz)).unwrap();
        assert_eq!(back, cg.code.hz);
        let code = CssCode::from_json(&cg.code.to_json()).unwrap();
        assert_eq!(code.hx, cg.code.hx);
        assert_eq!(code.k, 1);
        assert!(from_alist("3 2\n1").is_err());
    }
}
