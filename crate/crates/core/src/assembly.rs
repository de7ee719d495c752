//! P1 finite element operators for the Neumann boundary control problem.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::scalar::Real;
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Scalar field on the unit square.
pub type Field<T> = Arc<dyn Fn(T, T) -> T + Send + Sync>;

/// Desired state, source term and regularization parameter of one problem.
#[derive(Clone)]
pub struct ProblemInstance<T> {
    pub name: String,
    pub desired_state: Field<T>,
    pub source: Field<T>,
    pub beta: T,
}

impl<T: Real> fmt::Debug for ProblemInstance<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemInstance")
            .field("name", &self.name)
            .field("beta", &self.beta)
            .finish()
    }
}

fn in_lower_left_quadrant<T: Real>(x: T, y: T) -> bool {
    let half = T::lit(0.5);
    x <= half && y <= half
}

impl<T: Real> ProblemInstance<T> {
    pub fn new(
        name: impl Into<String>,
        desired_state: Field<T>,
        source: Field<T>,
        beta: T,
    ) -> Result<Self> {
        if !(beta > T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "beta must be positive, got {beta}"
            )));
        }
        Ok(Self {
            name: name.into(),
            desired_state,
            source,
            beta,
        })
    }

    /// Indicator of the closed quadrant `x <= 1/2, y <= 1/2`, zero source.
    pub fn example1(beta: T) -> Result<Self> {
        Self::new(
            "example1",
            Arc::new(|x, y| {
                if in_lower_left_quadrant(x, y) {
                    T::one()
                } else {
                    T::zero()
                }
            }),
            Arc::new(|_, _| T::zero()),
            beta,
        )
    }

    /// `(2x-1)^2 (2y-1)^2` on the closed quadrant `x <= 1/2, y <= 1/2`, zero source.
    pub fn example2(beta: T) -> Result<Self> {
        Self::new(
            "example2",
            Arc::new(|x, y| {
                if in_lower_left_quadrant(x, y) {
                    let two = T::lit(2.0);
                    let a = two * x - T::one();
                    let b = two * y - T::one();
                    a * a * b * b
                } else {
                    T::zero()
                }
            }),
            Arc::new(|_, _| T::zero()),
            beta,
        )
    }

    /// Constant desired state; the optimal control is zero.
    pub fn constant(gamma: T, beta: T) -> Result<Self> {
        Self::new(
            "constant",
            Arc::new(move |_, _| gamma),
            Arc::new(|_, _| T::zero()),
            beta,
        )
    }
}

/// Assembled matrices and load vectors for one mesh and problem.
#[derive(Debug, Clone)]
pub struct FemOperators<T> {
    pub n: usize,
    pub m_b: usize,
    pub h: T,
    /// Consistent mass matrix `M` (n x n).
    pub mass: CsrMatrix<T>,
    /// Stiffness matrix `K` (n x n), singular with `K 1 = 0`.
    pub stiffness: CsrMatrix<T>,
    /// Boundary mass matrix `M_b` (m_B x m_B).
    pub boundary_mass: CsrMatrix<T>,
    /// Boundary coupling `N_b` (n x m_B).
    pub boundary_coupling: CsrMatrix<T>,
    /// `omega = M 1`, the integrals of the basis functions.
    pub omega: Vec<T>,
    /// Desired-state load `b`.
    pub desired_load: Vec<T>,
    /// Source load `f`.
    pub source_load: Vec<T>,
    /// Row sums of `M`.
    pub lumped_mass: Vec<T>,
    /// Row sums of `M_b`.
    pub lumped_boundary_mass: Vec<T>,
}

/// Stiffness matrix of a P1 triangle with vertices `p` (counterclockwise).
pub fn element_stiffness<T: Real>(p: &[[T; 2]; 3]) -> [[T; 3]; 3] {
    let area2 =
        (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    // gradient of barycentric a is (y_b - y_c, x_c - x_b) / (2 area)
    let g = |a: usize| {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        [p[b][1] - p[c][1], p[c][0] - p[b][0]]
    };
    let grads = [g(0), g(1), g(2)];
    let scale = T::one() / (T::lit(2.0) * area2);
    let mut k = [[T::zero(); 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            k[a][b] = (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]) * scale;
        }
    }
    k
}

/// Consistent mass matrix of a P1 triangle: `area/12 (1 + delta_ab)`.
pub fn element_mass<T: Real>(p: &[[T; 2]; 3]) -> [[T; 3]; 3] {
    let area = ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
        - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
        .abs()
        * T::lit(0.5);
    let off = area / T::lit(12.0);
    let diag = off * T::lit(2.0);
    let mut m = [[off; 3]; 3];
    for (a, row) in m.iter_mut().enumerate() {
        row[a] = diag;
    }
    m
}

fn vertices<T: Real>(mesh: &TriMesh<T>, t: &[usize; 3]) -> [[T; 2]; 3] {
    let c = mesh.coords();
    [c[t[0]], c[t[1]], c[t[2]]]
}

// Barycentric coordinates of the interior three-point rule (degree 2).
const QUAD_BARY: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];

/// `v_j ~ int g phi_j` by the interior three-point rule on every triangle.
///
/// The quadrature points lie strictly inside the triangles, so data that is
/// piecewise constant on mesh-aligned regions is integrated exactly.
pub fn load_vector<T: Real>(mesh: &TriMesh<T>, g: &(dyn Fn(T, T) -> T + Send + Sync)) -> Vec<T> {
    let mut v = vec![T::zero(); mesh.n()];
    let third = T::lit(1.0 / 3.0);
    for t in mesh.triangles() {
        let p = vertices(mesh, t);
        let area = element_area(&p);
        for bary in QUAD_BARY {
            let l = bary.map(T::lit);
            let x = l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0];
            let y = l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1];
            let w = area * third * g(x, y);
            for a in 0..3 {
                v[t[a]] += w * l[a];
            }
        }
    }
    v
}

fn element_area<T: Real>(p: &[[T; 2]; 3]) -> T {
    ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1])).abs()
        * T::lit(0.5)
}

pub fn assemble_operators<T: Real>(
    mesh: &TriMesh<T>,
    problem: &ProblemInstance<T>,
) -> FemOperators<T> {
    let n = mesh.n();
    let m_b = mesh.m_b();
    let mut mass = TripletBuilder::with_capacity(n, n, 9 * mesh.triangles().len());
    let mut stiff = TripletBuilder::with_capacity(n, n, 9 * mesh.triangles().len());
    for t in mesh.triangles() {
        let p = vertices(mesh, t);
        let me = element_mass(&p);
        let ke = element_stiffness(&p);
        for a in 0..3 {
            mass.push(t[a], t[a], me[a][a]);
            stiff.push(t[a], t[a], ke[a][a]);
            for b in a + 1..3 {
                mass.push(t[a], t[b], me[a][b]);
                mass.push(t[b], t[a], me[a][b]);
                stiff.push(t[a], t[b], ke[a][b]);
                stiff.push(t[b], t[a], ke[a][b]);
            }
        }
    }
    let mass = mass.build();
    let stiffness = stiff.build();

    // boundary traces: boundary dof k is the trace of node boundary_nodes[k]
    let mut dof_of_node = vec![usize::MAX; n];
    for (k, &node) in mesh.boundary_nodes().iter().enumerate() {
        dof_of_node[node] = k;
    }
    let mut mb = TripletBuilder::with_capacity(m_b, m_b, 4 * m_b);
    let mut nb = TripletBuilder::with_capacity(n, m_b, 4 * m_b);
    let sixth = T::lit(1.0 / 6.0);
    for [a, b] in mesh.boundary_edges() {
        let (pa, pb) = (mesh.coords()[a], mesh.coords()[b]);
        let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
        let diag = len * sixth * T::lit(2.0);
        let off = len * sixth;
        let (da, db) = (dof_of_node[a], dof_of_node[b]);
        mb.push(da, da, diag);
        mb.push(db, db, diag);
        mb.push(da, db, off);
        mb.push(db, da, off);
        nb.push(a, da, diag);
        nb.push(b, db, diag);
        nb.push(a, db, off);
        nb.push(b, da, off);
    }
    let boundary_mass = mb.build();
    let boundary_coupling = nb.build();

    let omega = mass.row_sums();
    let lumped_mass = omega.clone();
    let lumped_boundary_mass = boundary_mass.row_sums();
    let desired_load = load_vector(mesh, problem.desired_state.as_ref());
    let source_load = load_vector(mesh, problem.source.as_ref());

    FemOperators {
        n,
        m_b,
        h: mesh.h(),
        mass,
        stiffness,
        boundary_mass,
        boundary_coupling,
        omega,
        desired_load,
        source_load,
        lumped_mass,
        lumped_boundary_mass,
    }
}
