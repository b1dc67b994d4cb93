//! Simplicial meshes for the four benchmark domains.
//!
//! Conventions:
//! - vertices carry three coordinates, 2D meshes keep z = 0
//! - refinement appends edge midpoints after the coarse vertices, so coarse
//!   vertex indices stay valid on every finer level
//! - all coordinates are dyadic rationals, so boundary predicates may compare
//!   floats exactly
//! - interior degrees of freedom are numbered in lexicographic coordinate
//!   order (z, then y, then x), independent of cell traversal order
//! - 2D cells are counterclockwise; 3D cells keep the vertex order required
//!   by the red refinement rule and are measured with absolute volumes

use std::collections::HashMap;
use std::fmt;

use serde_json::json;

/// Computational domain of the control problem benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    UnitSquare,
    Pentagon,
    UnitCube,
    LShape,
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::UnitCube => 3,
            _ => 2,
        }
    }

    /// Coarsest-level mesh scale h_0; level k has h = h_0 / 2^k.
    pub fn h0(&self) -> f64 {
        match self {
            Domain::UnitCube => 1.0,
            _ => 0.5,
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Domain::UnitSquare | Domain::UnitCube => 1.0,
            Domain::Pentagon => 0.875,
            Domain::LShape => 3.0,
        }
    }

    /// Deepest level the benchmark harness is expected to run.
    pub fn max_level(&self) -> usize {
        match self {
            Domain::UnitSquare => 7,
            Domain::Pentagon => 6,
            Domain::UnitCube => 5,
            Domain::LShape => 6,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Domain::UnitSquare => "unit-square",
            Domain::Pentagon => "pentagon",
            Domain::UnitCube => "unit-cube",
            Domain::LShape => "l-shape",
        }
    }

    /// Exact boundary predicate for points inside the closed domain.
    pub fn on_boundary(&self, p: [f64; 3]) -> bool {
        let [x, y, z] = p;
        match self {
            Domain::UnitSquare => x == 0.0 || x == 1.0 || y == 0.0 || y == 1.0,
            Domain::Pentagon => {
                x == 0.0 || y == 0.0 || (x == 1.0 && y <= 0.5) || (y == 1.0 && x <= 0.5)
                    || (x + y == 1.5 && x >= 0.5)
            }
            Domain::UnitCube => {
                x == 0.0 || x == 1.0 || y == 0.0 || y == 1.0 || z == 0.0 || z == 1.0
            }
            Domain::LShape => {
                x == -1.0
                    || x == 1.0
                    || y == -1.0
                    || y == 1.0
                    || (x == 0.0 && y <= 0.0)
                    || (y == 0.0 && x >= 0.0)
            }
        }
    }
}

impl std::str::FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unit-square" => Ok(Domain::UnitSquare),
            "pentagon" => Ok(Domain::Pentagon),
            "unit-cube" => Ok(Domain::UnitCube),
            "l-shape" => Ok(Domain::LShape),
            other => Err(format!(
                "unknown domain '{other}' (expected unit-square, pentagon, unit-cube or l-shape)"
            )),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where a vertex came from in the last refinement step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexParent {
    /// Same vertex on the coarse level.
    Coarse(usize),
    /// Midpoint of the coarse edge (a, b), a < b.
    Edge(usize, usize),
}

/// One level of the nested mesh hierarchy.
#[derive(Debug, Clone)]
pub struct MeshLevel {
    pub domain: Domain,
    pub level: usize,
    pub h: f64,
    pub vertices: Vec<[f64; 3]>,
    /// Cell vertex ids; 2D cells use the first three slots.
    pub cells: Vec<[usize; 4]>,
    pub is_interior: Vec<bool>,
    /// DOF index -> vertex id, in lexicographic coordinate order.
    pub interior: Vec<usize>,
    /// Vertex id -> DOF index for interior vertices.
    pub vertex_dof: Vec<Option<usize>>,
    /// Provenance of each vertex; empty on level 0.
    pub parents: Vec<VertexParent>,
}

impl MeshLevel {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        &self.cells[c][..self.dim() + 1]
    }

    /// Signed measure of a cell: area in 2D (positive when counterclockwise),
    /// 6 * signed volume determinant in 3D divided by 6.
    pub fn signed_measure(&self, c: usize) -> f64 {
        let cv = self.cell(c);
        let p: Vec<[f64; 3]> = cv.iter().map(|&v| self.vertices[v]).collect();
        if self.dim() == 2 {
            let (ax, ay) = (p[1][0] - p[0][0], p[1][1] - p[0][1]);
            let (bx, by) = (p[2][0] - p[0][0], p[2][1] - p[0][1]);
            0.5 * (ax * by - ay * bx)
        } else {
            let a = sub(p[1], p[0]);
            let b = sub(p[2], p[0]);
            let c3 = sub(p[3], p[0]);
            det3(a, b, c3) / 6.0
        }
    }

    pub fn measure(&self, c: usize) -> f64 {
        self.signed_measure(c).abs()
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.measure(c)).sum()
    }

    /// Scale-free shape quality of a cell: inradius / circumradius.
    pub fn cell_quality(&self, c: usize) -> f64 {
        let cv = self.cell(c);
        let p: Vec<[f64; 3]> = cv.iter().map(|&v| self.vertices[v]).collect();
        if self.dim() == 2 {
            let a = dist(p[1], p[2]);
            let b = dist(p[0], p[2]);
            let cl = dist(p[0], p[1]);
            let area = self.measure(c);
            let s = 0.5 * (a + b + cl);
            let r_in = area / s;
            let r_circ = a * b * cl / (4.0 * area);
            r_in / r_circ
        } else {
            let vol = self.measure(c);
            let faces = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
            let area_sum: f64 = faces.iter().map(|f| tri_area(p[f[0]], p[f[1]], p[f[2]])).sum();
            let r_in = 3.0 * vol / area_sum;
            let r_circ = circumradius_tet(&p);
            r_in / r_circ
        }
    }

    pub fn min_quality(&self) -> f64 {
        (0..self.n_cells())
            .map(|c| self.cell_quality(c))
            .fold(f64::INFINITY, f64::min)
    }

    /// Structural checks: nondegenerate cells, facet conformity, boundary
    /// facets on the domain boundary, exact total volume.
    pub fn validate(&self) -> Result<(), String> {
        for c in 0..self.n_cells() {
            let m = self.signed_measure(c);
            if m.abs() < 1e-14 {
                return Err(format!("cell {c} is degenerate (measure {m:e})"));
            }
            if self.dim() == 2 && m < 0.0 {
                return Err(format!("cell {c} has negative orientation"));
            }
        }
        let vol = self.total_volume();
        if (vol - self.domain.volume()).abs() > 1e-12 * self.domain.volume() {
            return Err(format!(
                "total volume {vol} does not match domain volume {}",
                self.domain.volume()
            ));
        }
        // every facet is shared by exactly two cells or lies on the boundary
        let mut facet_count: HashMap<Vec<usize>, usize> = HashMap::new();
        for c in 0..self.n_cells() {
            for f in self.cell_facets(c) {
                *facet_count.entry(f).or_insert(0) += 1;
            }
        }
        for (f, count) in &facet_count {
            if *count > 2 {
                return Err(format!("facet {f:?} shared by {count} cells"));
            }
            if *count == 1 {
                for &v in f {
                    if !self.domain.on_boundary(self.vertices[v]) {
                        return Err(format!(
                            "boundary facet {f:?} has interior vertex {v}"
                        ));
                    }
                }
            }
        }
        // DOF maps are mutually inverse and exhaust the interior vertices
        let count = self.is_interior.iter().filter(|&&b| b).count();
        if count != self.n_interior() {
            return Err("interior list does not match interior flags".into());
        }
        for (dof, &v) in self.interior.iter().enumerate() {
            if self.vertex_dof[v] != Some(dof) {
                return Err(format!("vertex_dof mismatch at dof {dof}"));
            }
        }
        Ok(())
    }

    fn cell_facets(&self, c: usize) -> Vec<Vec<usize>> {
        let cv = self.cell(c);
        let mut facets = Vec::new();
        for drop in 0..cv.len() {
            let mut f: Vec<usize> = cv
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != drop)
                .map(|(_, &v)| v)
                .collect();
            f.sort_unstable();
            facets.push(f);
        }
        facets
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn det3(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0])
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = sub(a, b);
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

fn tri_area(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    let u = sub(b, a);
    let v = sub(c, a);
    let cx = u[1] * v[2] - u[2] * v[1];
    let cy = u[2] * v[0] - u[0] * v[2];
    let cz = u[0] * v[1] - u[1] * v[0];
    0.5 * (cx * cx + cy * cy + cz * cz).sqrt()
}

fn circumradius_tet(p: &[[f64; 3]]) -> f64 {
    // circumcenter x solves 2 (p_i - p_0) . x = |p_i|^2 - |p_0|^2, i = 1..3
    let mut m = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    let n0 = p[0][0] * p[0][0] + p[0][1] * p[0][1] + p[0][2] * p[0][2];
    for i in 0..3 {
        let q = p[i + 1];
        for d in 0..3 {
            m[i][d] = 2.0 * (q[d] - p[0][d]);
        }
        rhs[i] = q[0] * q[0] + q[1] * q[1] + q[2] * q[2] - n0;
    }
    let x = solve3(m, rhs);
    dist(x, p[0])
}

fn solve3(mut m: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    // Gaussian elimination with partial pivoting on a 3x3 system
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
            .unwrap();
        m.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0f64; 3];
    for row in (0..3).rev() {
        let mut acc = b[row];
        for k in row + 1..3 {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    x
}

/// Builds the coarsest mesh of a domain.
pub fn initial_mesh(domain: Domain) -> MeshLevel {
    let (vertices, cells) = match domain {
        Domain::UnitSquare => {
            let mut verts = Vec::new();
            for j in 0..3 {
                for i in 0..3 {
                    verts.push([i as f64 * 0.5, j as f64 * 0.5, 0.0]);
                }
            }
            let id = |i: usize, j: usize| j * 3 + i;
            let mut cells = Vec::new();
            for j in 0..2 {
                for i in 0..2 {
                    push_split_square(
                        &mut cells,
                        id(i, j),
                        id(i + 1, j),
                        id(i + 1, j + 1),
                        id(i, j + 1),
                    );
                }
            }
            (verts, cells)
        }
        Domain::Pentagon => {
            // unit square with the corner triangle beyond x + y = 3/2 removed
            let mut verts = Vec::new();
            let mut id_map = HashMap::new();
            for j in 0..3 {
                for i in 0..3 {
                    if i == 2 && j == 2 {
                        continue;
                    }
                    id_map.insert((i, j), verts.len());
                    verts.push([i as f64 * 0.5, j as f64 * 0.5, 0.0]);
                }
            }
            let id = |i: usize, j: usize| id_map[&(i, j)];
            let mut cells = Vec::new();
            for (i, j) in [(0, 0), (1, 0), (0, 1)] {
                push_split_square(
                    &mut cells,
                    id(i, j),
                    id(i + 1, j),
                    id(i + 1, j + 1),
                    id(i, j + 1),
                );
            }
            cells.push([id(1, 1), id(2, 1), id(1, 2), 0]);
            (verts, cells)
        }
        Domain::UnitCube => {
            let mut verts = Vec::new();
            for k in 0..2 {
                for j in 0..2 {
                    for i in 0..2 {
                        verts.push([i as f64, j as f64, k as f64]);
                    }
                }
            }
            let id = |p: [usize; 3]| p[2] * 4 + p[1] * 2 + p[0];
            // one tetrahedron per monotone lattice path from the origin corner
            // to the opposite corner
            let mut cells = Vec::new();
            let perms = [
                [0, 1, 2],
                [0, 2, 1],
                [1, 0, 2],
                [1, 2, 0],
                [2, 0, 1],
                [2, 1, 0],
            ];
            for perm in perms {
                let mut p = [0usize; 3];
                let mut tet = [id(p), 0, 0, 0];
                for (step, &axis) in perm.iter().enumerate() {
                    p[axis] = 1;
                    tet[step + 1] = id(p);
                }
                cells.push(tet);
            }
            (verts, cells)
        }
        Domain::LShape => {
            let pts: [(f64, f64); 8] = [
                (-1.0, -1.0),
                (0.0, -1.0),
                (-1.0, 0.0),
                (0.0, 0.0),
                (1.0, 0.0),
                (-1.0, 1.0),
                (0.0, 1.0),
                (1.0, 1.0),
            ];
            let verts: Vec<[f64; 3]> = pts.iter().map(|&(x, y)| [x, y, 0.0]).collect();
            let mut cells = Vec::new();
            // squares: lower left, upper left, upper right
            for (ll, lr, ur, ul) in [(0, 1, 3, 2), (2, 3, 6, 5), (3, 4, 7, 6)] {
                push_split_square(&mut cells, ll, lr, ur, ul);
            }
            (verts, cells)
        }
    };
    finish_level(domain, 0, domain.h0(), vertices, cells, Vec::new())
}

fn push_split_square(cells: &mut Vec<[usize; 4]>, ll: usize, lr: usize, ur: usize, ul: usize) {
    cells.push([ll, lr, ur, 0]);
    cells.push([ll, ur, ul, 0]);
}

/// Uniform (red) refinement: every edge is bisected, each triangle yields
/// four children and each tetrahedron eight. Tetrahedron children follow the
/// interior-diagonal rule that preserves the similarity classes of the
/// lattice-path cubes, so shape quality does not degrade across levels.
pub fn refine(coarse: &MeshLevel) -> MeshLevel {
    let dim = coarse.dim();
    let mut vertices = coarse.vertices.clone();
    let mut parents: Vec<VertexParent> =
        (0..coarse.n_vertices()).map(VertexParent::Coarse).collect();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut mid = |a: usize, b: usize,
                   vertices: &mut Vec<[f64; 3]>,
                   parents: &mut Vec<VertexParent>|
     -> usize {
        let key = (a.min(b), a.max(b));
        if let Some(&v) = midpoint.get(&key) {
            return v;
        }
        let pa = vertices[key.0];
        let pb = vertices[key.1];
        let m = [
            0.5 * (pa[0] + pb[0]),
            0.5 * (pa[1] + pb[1]),
            0.5 * (pa[2] + pb[2]),
        ];
        let v = vertices.len();
        vertices.push(m);
        parents.push(VertexParent::Edge(key.0, key.1));
        midpoint.insert(key, v);
        v
    };

    let mut cells = Vec::with_capacity(coarse.n_cells() * (1 << dim));
    for c in 0..coarse.n_cells() {
        let cv = coarse.cell(c);
        if dim == 2 {
            let [a, b, cc] = [cv[0], cv[1], cv[2]];
            let mab = mid(a, b, &mut vertices, &mut parents);
            let mbc = mid(b, cc, &mut vertices, &mut parents);
            let mac = mid(a, cc, &mut vertices, &mut parents);
            cells.push([a, mab, mac, 0]);
            cells.push([mab, b, mbc, 0]);
            cells.push([mac, mbc, cc, 0]);
            cells.push([mab, mbc, mac, 0]);
        } else {
            let [v0, v1, v2, v3] = [cv[0], cv[1], cv[2], cv[3]];
            let m01 = mid(v0, v1, &mut vertices, &mut parents);
            let m02 = mid(v0, v2, &mut vertices, &mut parents);
            let m03 = mid(v0, v3, &mut vertices, &mut parents);
            let m12 = mid(v1, v2, &mut vertices, &mut parents);
            let m13 = mid(v1, v3, &mut vertices, &mut parents);
            let m23 = mid(v2, v3, &mut vertices, &mut parents);
            cells.push([v0, m01, m02, m03]);
            cells.push([m01, v1, m12, m13]);
            cells.push([m02, m12, v2, m23]);
            cells.push([m03, m13, m23, v3]);
            // octahedron split along the m02..m13 diagonal
            cells.push([m01, m02, m03, m13]);
            cells.push([m01, m02, m12, m13]);
            cells.push([m02, m03, m13, m23]);
            cells.push([m02, m12, m13, m23]);
        }
    }
    finish_level(
        coarse.domain,
        coarse.level + 1,
        coarse.h * 0.5,
        vertices,
        cells,
        parents,
    )
}

fn finish_level(
    domain: Domain,
    level: usize,
    h: f64,
    vertices: Vec<[f64; 3]>,
    cells: Vec<[usize; 4]>,
    parents: Vec<VertexParent>,
) -> MeshLevel {
    let is_interior: Vec<bool> = vertices.iter().map(|&p| !domain.on_boundary(p)).collect();
    let mut interior: Vec<usize> = (0..vertices.len()).filter(|&v| is_interior[v]).collect();
    interior.sort_by(|&a, &b| {
        let pa = vertices[a];
        let pb = vertices[b];
        (pa[2], pa[1], pa[0])
            .partial_cmp(&(pb[2], pb[1], pb[0]))
            .unwrap()
    });
    let mut vertex_dof = vec![None; vertices.len()];
    for (dof, &v) in interior.iter().enumerate() {
        vertex_dof[v] = Some(dof);
    }
    MeshLevel {
        domain,
        level,
        h,
        vertices,
        cells,
        is_interior,
        interior,
        vertex_dof,
        parents,
    }
}

/// Meshes for levels 0..=max_level.
pub fn hierarchy(domain: Domain, max_level: usize) -> Vec<MeshLevel> {
    let mut levels = vec![initial_mesh(domain)];
    for _ in 0..max_level {
        levels.push(refine(levels.last().unwrap()));
    }
    levels
}

/// JSON dump of one level: {level, h, vertices, cells, interior}.
pub fn dump_json(mesh: &MeshLevel) -> String {
    let dim = mesh.dim();
    let vertices: Vec<Vec<f64>> = mesh
        .vertices
        .iter()
        .map(|p| p[..dim].to_vec())
        .collect();
    let cells: Vec<Vec<usize>> = (0..mesh.n_cells())
        .map(|c| mesh.cell(c).to_vec())
        .collect();
    serde_json::to_string_pretty(&json!({
        "level": mesh.level,
        "h": mesh.h,
        "vertices": vertices,
        "cells": cells,
        "interior": mesh.is_interior,
    }))
    .expect("mesh serializes")
}
