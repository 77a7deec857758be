//! Simplicial meshes: the structured halved-squares family on (-0.5, 0.5)²,
//! validation, the angle condition, and a plain-text file format.
//!
//! Text format (all indices 0-based):
//!
//! ```text
//! dim N_nodes N_elem
//! x y            # N_nodes coordinate lines (dim values each)
//! i j k          # N_elem element lines (dim + 1 node indices each)
//! 0|1            # N_nodes boundary flags
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::linalg::{CooMatrix, CsrMatrix};

/// Off-diagonal stiffness entries above this value violate the angle condition.
pub const ANGLE_TOLERANCE: f64 = 1e-12;

/// Largest `r` accepted by [`build_structured_mesh`]: node and element counts
/// must fit in 32-bit indices.
pub const MAX_STRUCTURED_LEVEL: u32 = 15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("refinement level must be at least 1, got {0}")]
    LevelTooSmall(i64),
    #[error("refinement level {0} overflows index arithmetic (max {MAX_STRUCTURED_LEVEL})")]
    LevelTooLarge(i64),
    #[error("unsupported spatial dimension {0}")]
    UnsupportedDimension(usize),
    #[error("element {element} references node {node}, but the mesh has {n_nodes} nodes")]
    IndexOutOfRange { element: usize, node: usize, n_nodes: usize },
    #[error("element {0} has non-positive signed volume {1}")]
    Degenerate(usize, f64),
    #[error("node {0} is not referenced by any element")]
    OrphanNode(usize),
    #[error("node {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("{what} has length {got}, expected {expected}")]
    Length { what: &'static str, got: usize, expected: usize },
    #[error("line {line}: {kind}")]
    Parse { line: usize, kind: ParseErrorKind },
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseErrorKind {
    #[error("malformed header")]
    MalformedHeader,
    #[error("index out of range")]
    IndexOutOfRange,
    #[error("non-finite coordinate")]
    NonFiniteCoordinate,
    #[error("expected {expected} values, found {found}")]
    WrongArity { expected: usize, found: usize },
    #[error("cannot parse `{0}`")]
    BadToken(String),
    #[error("unexpected end of file")]
    UnexpectedEof,
    #[error("trailing content after boundary flags")]
    TrailingContent,
    #[error("invalid mesh: {0}")]
    Invalid(String),
}

/// A conforming simplicial mesh. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    dim: usize,
    coords: Vec<f64>,
    elements: Vec<usize>,
    boundary: Vec<bool>,
    h_max: f64,
}

impl Mesh {
    /// Validates and builds a mesh. `coords` has `dim` values per node,
    /// `elements` has `dim + 1` node indices per element.
    pub fn new(
        dim: usize,
        coords: Vec<f64>,
        elements: Vec<usize>,
        boundary: Vec<bool>,
    ) -> Result<Self, MeshError> {
        if dim != 2 && dim != 3 {
            return Err(MeshError::UnsupportedDimension(dim));
        }
        if coords.len() % dim != 0 {
            return Err(MeshError::Length {
                what: "coordinate array",
                got: coords.len(),
                expected: coords.len() / dim * dim,
            });
        }
        let n_nodes = coords.len() / dim;
        let nv = dim + 1;
        if elements.len() % nv != 0 {
            return Err(MeshError::Length {
                what: "element array",
                got: elements.len(),
                expected: elements.len() / nv * nv,
            });
        }
        if boundary.len() != n_nodes {
            return Err(MeshError::Length {
                what: "boundary mask",
                got: boundary.len(),
                expected: n_nodes,
            });
        }
        if let Some(i) = (0..n_nodes).find(|&i| coords[i * dim..(i + 1) * dim].iter().any(|c| !c.is_finite())) {
            return Err(MeshError::NonFinite(i));
        }
        let mut used = vec![false; n_nodes];
        for (e, conn) in elements.chunks(nv).enumerate() {
            for &node in conn {
                if node >= n_nodes {
                    return Err(MeshError::IndexOutOfRange { element: e, node, n_nodes });
                }
                used[node] = true;
            }
        }
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(MeshError::OrphanNode(i));
        }
        let mut mesh = Mesh { dim, coords, elements, boundary, h_max: 0.0 };
        let mut h_max: f64 = 0.0;
        for e in 0..mesh.n_elements() {
            let vol = mesh.signed_volume(e);
            if !(vol > 0.0) {
                return Err(MeshError::Degenerate(e, vol));
            }
            h_max = h_max.max(mesh.diameter(e));
        }
        mesh.h_max = h_max;
        Ok(mesh)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len() / (self.dim + 1)
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let nv = self.dim + 1;
        &self.elements[e * nv..(e + 1) * nv]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    /// Maximal element diameter.
    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    /// Node coordinates of a 2D mesh.
    pub fn point(&self, i: usize) -> [f64; 2] {
        debug_assert_eq!(self.dim, 2);
        [self.coords[2 * i], self.coords[2 * i + 1]]
    }

    /// Vertex indices of a triangle.
    pub fn triangle(&self, e: usize) -> [usize; 3] {
        debug_assert_eq!(self.dim, 2);
        [self.elements[3 * e], self.elements[3 * e + 1], self.elements[3 * e + 2]]
    }

    /// Signed area (2D) or volume (3D) of element `e`.
    pub fn signed_volume(&self, e: usize) -> f64 {
        let conn = self.element(e);
        let p0 = self.node(conn[0]);
        match self.dim {
            2 => {
                let (p1, p2) = (self.node(conn[1]), self.node(conn[2]));
                0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
            }
            _ => {
                let d = |k: usize| {
                    let p = self.node(conn[k]);
                    [p[0] - p0[0], p[1] - p0[1], p[2] - p0[2]]
                };
                let (a, b, c) = (d(1), d(2), d(3));
                let det = a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
                    + a[2] * (b[0] * c[1] - b[1] * c[0]);
                det / 6.0
            }
        }
    }

    fn diameter(&self, e: usize) -> f64 {
        let conn = self.element(e);
        let mut diam: f64 = 0.0;
        for a in 0..conn.len() {
            for b in a + 1..conn.len() {
                let (pa, pb) = (self.node(conn[a]), self.node(conn[b]));
                let d2: f64 = pa.iter().zip(pb).map(|(x, y)| (x - y) * (x - y)).sum();
                diam = diam.max(d2.sqrt());
            }
        }
        diam
    }

    /// Total measure of the domain.
    pub fn domain_measure(&self) -> f64 {
        (0..self.n_elements()).map(|e| self.signed_volume(e)).sum()
    }

    /// Gradients of the three barycentric coordinates on triangle `e`,
    /// together with its area.
    pub fn triangle_gradients(&self, e: usize) -> ([[f64; 2]; 3], f64) {
        let [a, b, c] = self.triangle(e);
        let (pa, pb, pc) = (self.point(a), self.point(b), self.point(c));
        let area = 0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]));
        let inv = 1.0 / (2.0 * area);
        // grad(lambda_i) is the inward normal of the opposite edge scaled by 1/(2|K|)
        let grads = [
            [(pb[1] - pc[1]) * inv, (pc[0] - pb[0]) * inv],
            [(pc[1] - pa[1]) * inv, (pa[0] - pc[0]) * inv],
            [(pa[1] - pb[1]) * inv, (pb[0] - pa[0]) * inv],
        ];
        (grads, area)
    }

    /// Nodes touching a facet that belongs to exactly one element.
    pub fn topological_boundary(&self) -> Vec<bool> {
        let nv = self.dim + 1;
        let mut count: HashMap<Vec<usize>, usize> = HashMap::new();
        for e in 0..self.n_elements() {
            let conn = self.element(e);
            for skip in 0..nv {
                let mut facet: Vec<usize> =
                    conn.iter().enumerate().filter(|&(k, _)| k != skip).map(|(_, &n)| n).collect();
                facet.sort_unstable();
                *count.entry(facet).or_insert(0) += 1;
            }
        }
        let mut mask = vec![false; self.n_nodes()];
        for (facet, c) in count {
            if c == 1 {
                for n in facet {
                    mask[n] = true;
                }
            }
        }
        mask
    }

    /// Node-to-node adjacency (including the node itself), sorted.
    pub fn node_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj: Vec<Vec<usize>> = (0..self.n_nodes()).map(|i| vec![i]).collect();
        for e in 0..self.n_elements() {
            let conn = self.element(e);
            for &a in conn {
                adj[a].extend_from_slice(conn);
            }
        }
        for row in &mut adj {
            row.sort_unstable();
            row.dedup();
        }
        adj
    }
}

/// The halved-squares triangulation of (-0.5, 0.5)² with grid spacing
/// `2^-r`: every square is cut along its lower-left to upper-right diagonal.
pub fn build_structured_mesh(r: i64) -> Result<Mesh, MeshError> {
    if r < 1 {
        return Err(MeshError::LevelTooSmall(r));
    }
    if r > MAX_STRUCTURED_LEVEL as i64 {
        return Err(MeshError::LevelTooLarge(r));
    }
    let cells = 1u32.checked_shl(r as u32).ok_or(MeshError::LevelTooLarge(r))?;
    let n = cells + 1;
    n.checked_mul(n).ok_or(MeshError::LevelTooLarge(r))?;
    2u32.checked_mul(cells * cells).ok_or(MeshError::LevelTooLarge(r))?;

    let (cells, n) = (cells as usize, n as usize);
    let h = 1.0 / cells as f64;
    let mut coords = Vec::with_capacity(2 * n * n);
    let mut boundary = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            coords.push(-0.5 + i as f64 * h);
            coords.push(-0.5 + j as f64 * h);
            boundary.push(i == 0 || j == 0 || i == cells || j == cells);
        }
    }
    let id = |i: usize, j: usize| j * n + i;
    let mut elements = Vec::with_capacity(6 * cells * cells);
    for j in 0..cells {
        for i in 0..cells {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            elements.extend_from_slice(&[a, b, c, a, c, d]);
        }
    }
    Mesh::new(2, coords, elements, boundary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngleReport {
    pub pass: bool,
    /// Largest off-diagonal entry of the scalar P1 stiffness matrix.
    pub worst_offdiag: f64,
    /// Node pair attaining `worst_offdiag`.
    pub worst_pair: Option<(usize, usize)>,
}

/// Scalar P1 stiffness matrix `∫ ∇ζ_i · ∇ζ_j` of a triangle mesh.
pub fn scalar_stiffness(mesh: &Mesh) -> Result<CsrMatrix, MeshError> {
    if mesh.dim() != 2 {
        return Err(MeshError::UnsupportedDimension(mesh.dim()));
    }
    let mut coo = CooMatrix::new(mesh.n_nodes(), mesh.n_nodes());
    for e in 0..mesh.n_elements() {
        let (g, area) = mesh.triangle_gradients(e);
        let tri = mesh.triangle(e);
        for a in 0..3 {
            for b in 0..3 {
                coo.push(tri[a], tri[b], area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]));
            }
        }
    }
    Ok(coo.to_csr())
}

/// Checks that all off-diagonal entries of the P1 stiffness matrix are
/// non-positive (up to [`ANGLE_TOLERANCE`]).
pub fn check_angle_condition(mesh: &Mesh) -> Result<AngleReport, MeshError> {
    check_angle_condition_with_tol(mesh, ANGLE_TOLERANCE)
}

pub fn check_angle_condition_with_tol(mesh: &Mesh, tol: f64) -> Result<AngleReport, MeshError> {
    let k = scalar_stiffness(mesh)?;
    let mut worst = f64::NEG_INFINITY;
    let mut pair = None;
    for i in 0..k.n_rows() {
        for (j, v) in k.row(i) {
            if j != i && v > worst {
                worst = v;
                pair = Some((i, j));
            }
        }
    }
    if pair.is_none() {
        worst = 0.0;
    }
    Ok(AngleReport { pass: worst <= tol, worst_offdiag: worst, worst_pair: pair })
}

pub fn save_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    fs::write(path, mesh_to_string(mesh)).map_err(|e| MeshError::Io(e.to_string()))
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh, MeshError> {
    let text = fs::read_to_string(path).map_err(|e| MeshError::Io(e.to_string()))?;
    parse_mesh(&text)
}

pub fn mesh_to_string(mesh: &Mesh) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {} {}", mesh.dim(), mesh.n_nodes(), mesh.n_elements());
    // `{:?}` on f64 prints the shortest representation that round-trips exactly
    for i in 0..mesh.n_nodes() {
        let line: Vec<String> = mesh.node(i).iter().map(|x| format!("{x:?}")).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    for e in 0..mesh.n_elements() {
        let line: Vec<String> = mesh.element(e).iter().map(|n| n.to_string()).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    for &b in mesh.boundary_mask() {
        let _ = writeln!(out, "{}", u8::from(b));
    }
    out
}

pub fn parse_mesh(text: &str) -> Result<Mesh, MeshError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let err = |line, kind| MeshError::Parse { line, kind };

    let (hline, header) = lines.next().ok_or(err(1, ParseErrorKind::MalformedHeader))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(err(hline, ParseErrorKind::MalformedHeader));
    }
    let parsed: Result<Vec<usize>, _> = fields.iter().map(|f| f.parse::<usize>()).collect();
    let [dim, n_nodes, n_elem] = match parsed.as_deref() {
        Ok(&[d, n, e]) if d == 2 || d == 3 => [d, n, e],
        _ => return Err(err(hline, ParseErrorKind::MalformedHeader)),
    };

    let mut next_values = |expected: usize| -> Result<(usize, Vec<&str>), MeshError> {
        let (line, content) = lines.next().ok_or(err(hline, ParseErrorKind::UnexpectedEof))?;
        let toks: Vec<&str> = content.split_whitespace().collect();
        if toks.len() != expected {
            return Err(err(line, ParseErrorKind::WrongArity { expected, found: toks.len() }));
        }
        Ok((line, toks))
    };

    let mut coords = Vec::with_capacity(dim * n_nodes);
    for _ in 0..n_nodes {
        let (line, toks) = next_values(dim)?;
        for t in toks {
            let x: f64 = t.parse().map_err(|_| err(line, ParseErrorKind::BadToken(t.to_string())))?;
            if !x.is_finite() {
                return Err(err(line, ParseErrorKind::NonFiniteCoordinate));
            }
            coords.push(x);
        }
    }
    let mut elements = Vec::with_capacity((dim + 1) * n_elem);
    for _ in 0..n_elem {
        let (line, toks) = next_values(dim + 1)?;
        for t in toks {
            let idx: usize = t.parse().map_err(|_| err(line, ParseErrorKind::BadToken(t.to_string())))?;
            if idx >= n_nodes {
                return Err(err(line, ParseErrorKind::IndexOutOfRange));
            }
            elements.push(idx);
        }
    }
    let mut boundary = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let (line, toks) = next_values(1)?;
        match toks[0] {
            "0" => boundary.push(false),
            "1" => boundary.push(true),
            t => return Err(err(line, ParseErrorKind::BadToken(t.to_string()))),
        }
    }
    if let Some((line, _)) = lines.find(|(_, l)| !l.is_empty()) {
        return Err(err(line, ParseErrorKind::TrailingContent));
    }
    Mesh::new(dim, coords, elements, boundary)
        .map_err(|e| err(hline, ParseErrorKind::Invalid(e.to_string())))
}
