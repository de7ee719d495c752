//! Uniform right-triangle triangulation of the unit square.
//!
//! Nodes are numbered boundary first: the `4(N-1)` boundary nodes come in
//! counterclockwise order starting at the origin, followed by the interior
//! nodes row by row. Every grid cell is split along its lower-left to
//! upper-right diagonal.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct TriMesh<T> {
    grid_side: usize,
    h: T,
    coords: Vec<[T; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_nodes: Vec<usize>,
    /// Lattice position `(i, j)` of every node.
    lattice: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct MeshSummary {
    pub grid_side: usize,
    pub h: f64,
    pub n: usize,
    pub m_b: usize,
    pub triangles: usize,
    pub kkt_dof: usize,
}

/// Builds the `N x N` node triangulation of `(0,1)^2`.
pub fn build_mesh<T: Real>(grid_side: usize) -> Result<TriMesh<T>> {
    if grid_side < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid side must be at least 2, got {grid_side}"
        )));
    }
    let nn = grid_side;
    let cells = nn - 1;
    let h = T::one() / T::from_usize_lossy(cells);

    let mut boundary = Vec::with_capacity(4 * cells);
    boundary.extend((0..cells).map(|i| (i, 0)));
    boundary.extend((0..cells).map(|j| (cells, j)));
    boundary.extend((1..=cells).rev().map(|i| (i, cells)));
    boundary.extend((1..=cells).rev().map(|j| (0, j)));

    let mut index = vec![usize::MAX; nn * nn];
    let mut lattice = Vec::with_capacity(nn * nn);
    for &(i, j) in &boundary {
        index[j * nn + i] = lattice.len();
        lattice.push((i, j));
    }
    for j in 1..cells {
        for i in 1..cells {
            index[j * nn + i] = lattice.len();
            lattice.push((i, j));
        }
    }
    let coords = lattice
        .iter()
        .map(|&(i, j)| {
            // exact endpoints keep the boundary on x, y in {0, 1}
            let c = |k: usize| {
                if k == cells {
                    T::one()
                } else {
                    T::from_usize_lossy(k) * h
                }
            };
            [c(i), c(j)]
        })
        .collect();

    let mut triangles = Vec::with_capacity(2 * cells * cells);
    for j in 0..cells {
        for i in 0..cells {
            let sw = index[j * nn + i];
            let se = index[j * nn + i + 1];
            let ne = index[(j + 1) * nn + i + 1];
            let nw = index[(j + 1) * nn + i];
            triangles.push([sw, se, ne]);
            triangles.push([sw, ne, nw]);
        }
    }

    Ok(TriMesh {
        grid_side: nn,
        h,
        coords,
        triangles,
        boundary_nodes: (0..boundary.len()).collect(),
        lattice,
    })
}

impl<T: Real> TriMesh<T> {
    pub fn grid_side(&self) -> usize {
        self.grid_side
    }

    pub fn h(&self) -> T {
        self.h
    }

    /// Node count `n`.
    pub fn n(&self) -> usize {
        self.coords.len()
    }

    /// Boundary node count `m_B`.
    pub fn m_b(&self) -> usize {
        self.boundary_nodes.len()
    }

    pub fn coords(&self) -> &[[T; 2]] {
        &self.coords
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Boundary nodes in counterclockwise order; with boundary-first
    /// numbering this is `0..m_B`.
    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn lattice(&self) -> &[(usize, usize)] {
        &self.lattice
    }

    /// Boundary edges as consecutive counterclockwise node pairs.
    pub fn boundary_edges(&self) -> impl Iterator<Item = [usize; 2]> + '_ {
        let b = &self.boundary_nodes;
        (0..b.len()).map(move |k| [b[k], b[(k + 1) % b.len()]])
    }

    /// Signed area of triangle `t` (positive for counterclockwise vertices).
    pub fn signed_area(&self, t: usize) -> T {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.coords[a], self.coords[b], self.coords[c]);
        ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1])) * T::lit(0.5)
    }

    /// Arc length from the origin along the boundary, for boundary node `k`.
    pub fn boundary_arc_length(&self, k: usize) -> T {
        T::from_usize_lossy(k) * self.h
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        node < self.boundary_nodes.len()
    }

    pub fn summary(&self) -> MeshSummary {
        let n = self.n();
        let m_b = self.m_b();
        MeshSummary {
            grid_side: self.grid_side,
            h: self.h.as_f64(),
            n,
            m_b,
            triangles: self.triangles.len(),
            kkt_dof: 2 * n + m_b,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_small_grids() {
        let m = build_mesh::<f64>(2).unwrap();
        assert_eq!((m.n(), m.m_b(), m.triangles().len()), (4, 4, 2));
        let m = build_mesh::<f64>(3).unwrap();
        assert_eq!((m.n(), m.m_b(), m.triangles().len()), (9, 8, 8));
    }

    #[test]
    fn rejects_tiny_grid() {
        assert!(matches!(
            build_mesh::<f64>(1),
            Err(Error::InvalidArgument(_))
        ));
        assert!(build_mesh::<f64>(0).is_err());
    }

    #[test]
    fn n33_matches_table_dof() {
        let m = build_mesh::<f64>(33).unwrap();
        assert_eq!((m.n(), m.m_b()), (1089, 128));
        assert_eq!(m.summary().kkt_dof, 2306);
    }

    #[test]
    fn boundary_first_and_counterclockwise() {
        let m = build_mesh::<f64>(5).unwrap();
        let c = m.coords();
        assert_eq!(c[0], [0.0, 0.0]);
        assert_eq!(c[4], [1.0, 0.0]);
        assert_eq!(c[8], [1.0, 1.0]);
        assert_eq!(c[12], [0.0, 1.0]);
        for (k, p) in c.iter().enumerate() {
            let on_b = p[0] == 0.0 || p[0] == 1.0 || p[1] == 0.0 || p[1] == 1.0;
            assert_eq!(on_b, m.is_boundary(k), "node {k} at {p:?}");
        }
        for [a, b] in m.boundary_edges() {
            let d = ((c[a][0] - c[b][0]).powi(2) + (c[a][1] - c[b][1]).powi(2)).sqrt();
            assert!((d - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn positive_orientation_and_area() {
        let m = build_mesh::<f64>(9).unwrap();
        let h2 = m.h() * m.h() / 2.0;
        let mut total = 0.0;
        for t in 0..m.triangles().len() {
            let a = m.signed_area(t);
            assert!((a - h2).abs() < 1e-15);
            total += a;
        }
        assert!((total - 1.0).abs() < 1e-13);
    }

    #[test]
    fn f32_mesh_builds() {
        let m = build_mesh::<f32>(4).unwrap();
        assert_eq!(m.n(), 16);
        assert_eq!(m.coords()[3], [1.0f32, 0.0]);
    }
}
