//! P1 finite element assembly on the mesh hierarchy.
//!
//! All interior-DOF matrices eliminate boundary vertices (homogeneous
//! Dirichlet data). The discrete metric [u, v]_k = w_k u^T v uses the
//! weight w_k = h_k^2 on every domain, including the 3D cube; that literal
//! convention fixes the function-space restriction factor at 1/4 per level
//! regardless of dimension.

use crate::error::{Error, Result};
use crate::linalg::Csr;
use crate::mesh::{MeshLevel, VertexParent};

/// Weight of the mesh-dependent inner product [u, v]_k = w u^T v.
pub fn metric_weight(mesh: &MeshLevel) -> f64 {
    mesh.h * mesh.h
}

/// Ratio w_{k-1} / w_k between consecutive levels.
pub const COARSE_FINE_WEIGHT_RATIO: f64 = 4.0;

/// Gradients of the barycentric coordinates of a simplex, constant per cell.
/// Gradients of the barycentric coordinates (hat functions) of one cell.
pub fn barycentric_gradients(p: &[[f64; 3]], dim: usize) -> Vec<[f64; 3]> {
    // lambda(x) = B^{-1} (x - p0) with B's columns the edge vectors, so
    // grad lambda_i is row i of B^{-1}
    let mut grads = vec![[0.0f64; 3]; dim + 1];
    if dim == 2 {
        let b = [
            [p[1][0] - p[0][0], p[2][0] - p[0][0]],
            [p[1][1] - p[0][1], p[2][1] - p[0][1]],
        ];
        let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
        let inv = [
            [b[1][1] / det, -b[0][1] / det],
            [-b[1][0] / det, b[0][0] / det],
        ];
        for i in 0..2 {
            grads[i + 1] = [inv[i][0], inv[i][1], 0.0];
        }
    } else {
        let bt = [
            [p[1][0] - p[0][0], p[1][1] - p[0][1], p[1][2] - p[0][2]],
            [p[2][0] - p[0][0], p[2][1] - p[0][1], p[2][2] - p[0][2]],
            [p[3][0] - p[0][0], p[3][1] - p[0][1], p[3][2] - p[0][2]],
        ];
        for i in 0..3 {
            let mut e = [0.0f64; 3];
            e[i] = 1.0;
            grads[i + 1] = solve3(bt, e);
        }
    }
    for d in 0..3 {
        grads[0][d] = -(1..=dim).map(|i| grads[i][d]).sum::<f64>();
    }
    grads
}

fn solve3(mut m: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
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

/// Local stiffness matrix of one cell: measure * grad_i . grad_j.
pub fn local_stiffness(p: &[[f64; 3]], dim: usize, measure: f64) -> Vec<Vec<f64>> {
    let g = barycentric_gradients(p, dim);
    let n = dim + 1;
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            k[i][j] = measure * (g[i][0] * g[j][0] + g[i][1] * g[j][1] + g[i][2] * g[j][2]);
        }
    }
    k
}

/// Local mass matrix: measure / 12 * (1 + delta_ij) in 2D,
/// measure / 20 * (1 + delta_ij) in 3D.
pub fn local_mass(dim: usize, measure: f64) -> Vec<Vec<f64>> {
    let n = dim + 1;
    let scale = measure / if dim == 2 { 12.0 } else { 20.0 };
    let mut m = vec![vec![scale; n]; n];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 2.0 * scale;
    }
    m
}

fn check_cells(mesh: &MeshLevel) -> Result<()> {
    for c in 0..mesh.n_cells() {
        let v = mesh.measure(c);
        if v < 1e-14 {
            return Err(Error::DegenerateCell {
                level: mesh.level,
                cell: c,
                volume: v,
            });
        }
    }
    Ok(())
}

fn assemble(
    mesh: &MeshLevel,
    local: impl Fn(&[[f64; 3]], usize, f64) -> Vec<Vec<f64>>,
    interior_only: bool,
) -> Result<Csr> {
    check_cells(mesh)?;
    let dim = mesh.dim();
    let n = if interior_only {
        mesh.n_interior()
    } else {
        mesh.n_vertices()
    };
    let dof = |v: usize| -> Option<usize> {
        if interior_only {
            mesh.vertex_dof[v]
        } else {
            Some(v)
        }
    };
    let mut triplets = Vec::new();
    for c in 0..mesh.n_cells() {
        let cv = mesh.cell(c);
        let p: Vec<[f64; 3]> = cv.iter().map(|&v| mesh.vertices[v]).collect();
        let loc = local(&p, dim, mesh.measure(c));
        for (i, &vi) in cv.iter().enumerate() {
            let Some(di) = dof(vi) else { continue };
            for (j, &vj) in cv.iter().enumerate() {
                let Some(dj) = dof(vj) else { continue };
                triplets.push((di, dj, loc[i][j]));
            }
        }
    }
    Ok(Csr::from_triplets(n, n, &triplets))
}

/// Stiffness matrix on interior DOFs.
pub fn stiffness(mesh: &MeshLevel) -> Result<Csr> {
    assemble(mesh, local_stiffness, true)
}

/// Mass matrix on interior DOFs.
pub fn mass(mesh: &MeshLevel) -> Result<Csr> {
    assemble(mesh, |_, dim, meas| local_mass(dim, meas), true)
}

/// Mass matrix over all vertices, boundary included. Row sums add up to the
/// domain volume (hat functions partition unity).
pub fn mass_full(mesh: &MeshLevel) -> Result<Csr> {
    assemble(mesh, |_, dim, meas| local_mass(dim, meas), false)
}

/// Prolongation from the interior DOFs of `coarse` to those of `fine`:
/// identity on surviving vertices, averaging on edge midpoints. Rows of
/// midpoints whose coarse edge touches the boundary lose that contribution
/// (the coarse hat vanishes there).
pub fn prolongation(fine: &MeshLevel, coarse: &MeshLevel) -> Result<Csr> {
    if fine.level != coarse.level + 1 {
        return Err(Error::LevelMismatch {
            expected: coarse.level + 1,
            got: fine.level,
        });
    }
    let mut triplets = Vec::new();
    for (dof_f, &v) in fine.interior.iter().enumerate() {
        match fine.parents[v] {
            VertexParent::Coarse(c) => {
                if let Some(dof_c) = coarse.vertex_dof[c] {
                    triplets.push((dof_f, dof_c, 1.0));
                }
            }
            VertexParent::Edge(a, b) => {
                for parent in [a, b] {
                    if let Some(dof_c) = coarse.vertex_dof[parent] {
                        triplets.push((dof_f, dof_c, 0.5));
                    }
                }
            }
        }
    }
    Ok(Csr::from_triplets(
        fine.n_interior(),
        coarse.n_interior(),
        &triplets,
    ))
}

/// Function-space restriction: adjoint of prolongation in the mesh-dependent
/// inner products, which is P^T scaled by w_k / w_{k-1} = 1/4.
pub fn restrict_function(p: &Csr, fine: &[f64]) -> Vec<f64> {
    let mut out = p.matvec_transpose_alloc(fine);
    for v in out.iter_mut() {
        *v /= COARSE_FINE_WEIGHT_RATIO;
    }
    out
}

pub mod quadrature {
    //! Barycentric quadrature rules; weights sum to one, scale by cell measure.

    /// Degree-4 rule on triangles, 6 points.
    pub const TRI_DEG4: [([f64; 3], f64); 6] = {
        let a = 0.445948490915965;
        let wa = 0.223381589678011;
        let b = 0.091576213509771;
        let wb = 0.109951743655322;
        [
            ([a, a, 1.0 - 2.0 * a], wa),
            ([a, 1.0 - 2.0 * a, a], wa),
            ([1.0 - 2.0 * a, a, a], wa),
            ([b, b, 1.0 - 2.0 * b], wb),
            ([b, 1.0 - 2.0 * b, b], wb),
            ([1.0 - 2.0 * b, b, b], wb),
        ]
    };

    /// Degree-6 rule on triangles, 12 points.
    pub const TRI_DEG6: [([f64; 3], f64); 12] = {
        let a = 0.063089014491502;
        let wa = 0.050844906370207;
        let b = 0.249286745170910;
        let wb = 0.116786275726379;
        let c1 = 0.053145049844816;
        let c2 = 0.310352451033785;
        let c3 = 1.0 - c1 - c2;
        let wc = 0.082851075618374;
        [
            ([a, a, 1.0 - 2.0 * a], wa),
            ([a, 1.0 - 2.0 * a, a], wa),
            ([1.0 - 2.0 * a, a, a], wa),
            ([b, b, 1.0 - 2.0 * b], wb),
            ([b, 1.0 - 2.0 * b, b], wb),
            ([1.0 - 2.0 * b, b, b], wb),
            ([c1, c2, c3], wc),
            ([c1, c3, c2], wc),
            ([c2, c1, c3], wc),
            ([c2, c3, c1], wc),
            ([c3, c1, c2], wc),
            ([c3, c2, c1], wc),
        ]
    };

    /// Degree-2 rule on tetrahedra, 4 points.
    pub const TET_DEG2: [([f64; 4], f64); 4] = {
        let a = 0.585410196624969;
        let b = 0.138196601125011;
        [
            ([a, b, b, b], 0.25),
            ([b, a, b, b], 0.25),
            ([b, b, a, b], 0.25),
            ([b, b, b, a], 0.25),
        ]
    };
}

/// Load vector (f, phi_i) on interior DOFs. The 2D rule is exact through
/// polynomial degree 6, the 3D rule through degree 2.
pub fn load(mesh: &MeshLevel, f: impl Fn([f64; 3]) -> f64) -> Result<Vec<f64>> {
    check_cells(mesh)?;
    let dim = mesh.dim();
    let mut out = vec![0.0; mesh.n_interior()];
    for c in 0..mesh.n_cells() {
        let cv = mesh.cell(c);
        let p: Vec<[f64; 3]> = cv.iter().map(|&v| mesh.vertices[v]).collect();
        let meas = mesh.measure(c);
        let mut accumulate = |bary: &[f64], weight: f64| {
            let mut x = [0.0f64; 3];
            for (lam, q) in bary.iter().zip(&p) {
                for d in 0..3 {
                    x[d] += lam * q[d];
                }
            }
            let fx = f(x) * weight * meas;
            for (lam, &v) in bary.iter().zip(cv) {
                if let Some(dof) = mesh.vertex_dof[v] {
                    out[dof] += fx * lam;
                }
            }
        };
        if dim == 2 {
            for (bary, w) in quadrature::TRI_DEG6 {
                accumulate(&bary, w);
            }
        } else {
            for (bary, w) in quadrature::TET_DEG2 {
                accumulate(&bary, w);
            }
        }
    }
    Ok(out)
}

/// Coordinate triplet dump, 1-based indices, one entry per line.
pub fn dump_coo(a: &Csr) -> String {
    let mut s = String::new();
    for i in 0..a.n_rows {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            s.push_str(&format!("{} {} {:.16e}\n", i + 1, j + 1, v));
        }
    }
    s
}
