//! Membrane finite element model on a pixel grid.
//!
//! Each pixel is a unit-square bilinear element whose stiffness is
//! `p_e * KP + q_e * KQ`. The fixed boundary is imposed by adding a large
//! penalty `sigma0` to the diagonal at boundary nodes, so the assembled
//! operator is symmetric positive definite and is kept in band storage with a
//! cached Cholesky factor.

mod band;
mod mesh;
pub mod spectral;

use std::ops::{Deref, DerefMut};

pub use band::{BandCholesky, SymBand};
pub use mesh::GridMesh;

use crate::error::{Error, Result};

/// Gradient-energy coefficients of a pixel element, as used throughout: a
/// quarter of `∫ ∇Nᵢ·∇Nⱼ` over the unit square, so `p` carries that factor.
pub const KP: [[f64; 4]; 4] = [
    [4.0 / 24.0, -1.0 / 24.0, -2.0 / 24.0, -1.0 / 24.0],
    [-1.0 / 24.0, 4.0 / 24.0, -1.0 / 24.0, -2.0 / 24.0],
    [-2.0 / 24.0, -1.0 / 24.0, 4.0 / 24.0, -1.0 / 24.0],
    [-1.0 / 24.0, -2.0 / 24.0, -1.0 / 24.0, 4.0 / 24.0],
];

/// Support (mass) coefficients `∫ Nᵢ Nⱼ` of a unit-square bilinear element.
pub const KQ: [[f64; 4]; 4] = [
    [4.0 / 36.0, 2.0 / 36.0, 1.0 / 36.0, 2.0 / 36.0],
    [2.0 / 36.0, 4.0 / 36.0, 2.0 / 36.0, 1.0 / 36.0],
    [1.0 / 36.0, 2.0 / 36.0, 4.0 / 36.0, 2.0 / 36.0],
    [2.0 / 36.0, 1.0 / 36.0, 2.0 / 36.0, 4.0 / 36.0],
];

/// Load share of each element node for a constant pixel value.
pub const NODE_SHARE: f64 = 0.25;

pub fn element_matrices() -> ([[f64; 4]; 4], [[f64; 4]; 4]) {
    (KP, KQ)
}

/// Two-node matrix of a boundary edge with support coefficient `sigma`,
/// in the reference coordinates of the edge.
pub fn boundary_edge_matrix(sigma: f64) -> [[f64; 2]; 2] {
    [
        [2.0 / 3.0 * sigma, 1.0 / 3.0 * sigma],
        [1.0 / 3.0 * sigma, 2.0 / 3.0 * sigma],
    ]
}

/// `xᵀ A y` for a 4x4 element matrix.
#[inline]
pub fn element_form(a: &[[f64; 4]; 4], x: &[f64; 4], y: &[f64; 4]) -> f64 {
    let mut acc = 0.0;
    for i in 0..4 {
        let row = &a[i];
        acc += x[i] * (row[0] * y[0] + row[1] * y[1] + row[2] * y[2] + row[3] * y[3]);
    }
    acc
}

/// Values indexed by global node number.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodeVector(pub Vec<f64>);

impl NodeVector {
    pub fn zeros(n: usize) -> Self {
        NodeVector(vec![0.0; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        assert_eq!(self.len(), other.len());
        self.iter().zip(other).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `a * self + b * other`
    pub fn combine(&self, a: f64, other: &[f64], b: f64) -> NodeVector {
        assert_eq!(self.len(), other.len());
        NodeVector(self.iter().zip(other).map(|(x, y)| a * x + b * y).collect())
    }
}

impl Deref for NodeVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for NodeVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for NodeVector {
    fn from(v: Vec<f64>) -> Self {
        NodeVector(v)
    }
}

/// Per-element elastic modulus `p` and support coefficient `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignField {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl DesignField {
    /// Budgets spread evenly over `ne` elements.
    pub fn uniform(ne: usize, tol_p: f64, tol_q: f64) -> Self {
        DesignField {
            p: vec![tol_p / ne as f64; ne],
            q: vec![tol_q / ne as f64; ne],
        }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn sum_p(&self) -> f64 {
        self.p.iter().sum()
    }

    pub fn sum_q(&self) -> f64 {
        self.q.iter().sum()
    }

    /// Checks the lower bounds and the budgets (to `1e-9`).
    pub fn validate(&self, p_min: f64, q_min: f64, tol_p: f64, tol_q: f64) -> Result<()> {
        if self.p.len() != self.q.len() {
            return Err(Error::DimensionMismatch(format!(
                "p has {} entries, q has {}",
                self.p.len(),
                self.q.len()
            )));
        }
        if let Some(e) = self.p.iter().position(|&v| !(v >= p_min)) {
            return Err(Error::Config(format!("p[{e}] = {} below p_min {p_min}", self.p[e])));
        }
        if let Some(e) = self.q.iter().position(|&v| !(v >= q_min)) {
            return Err(Error::Config(format!("q[{e}] = {} below q_min {q_min}", self.q[e])));
        }
        if (self.sum_p() - tol_p).abs() > 1e-9 || (self.sum_q() - tol_q).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "budgets Σp = {}, Σq = {} differ from {tol_p}, {tol_q}",
                self.sum_p(),
                self.sum_q()
            )));
        }
        Ok(())
    }
}

/// Assembled global stiffness with its Cholesky factor.
#[derive(Debug, Clone)]
pub struct StiffnessOperator {
    k: SymBand,
    factor: BandCholesky,
    sigma0: f64,
}

impl StiffnessOperator {
    /// Factorizes an already assembled symmetric matrix.
    pub fn from_matrix(k: SymBand, sigma0: f64) -> Result<Self> {
        let factor = k.cholesky()?;
        Ok(StiffnessOperator { k, factor, sigma0 })
    }

    pub fn matrix(&self) -> &SymBand {
        &self.k
    }

    pub fn factor(&self) -> &BandCholesky {
        &self.factor
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn dim(&self) -> usize {
        self.k.dim()
    }

    /// Solves `K x = rhs` with the cached factor.
    pub fn solve(&self, rhs: &[f64]) -> NodeVector {
        NodeVector(self.factor.solve(rhs))
    }

    pub fn apply(&self, x: &[f64]) -> NodeVector {
        NodeVector(self.k.mul_vec(x))
    }

    /// `aᵀ K b`; exactly symmetric in its arguments.
    pub fn mutual_energy(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != self.dim() || b.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "operator has {} nodes, vectors have {} and {}",
                self.dim(),
                a.len(),
                b.len()
            )));
        }
        Ok(self.k.bilinear(a, b))
    }

    /// `‖K x − rhs‖₂ / max(‖rhs‖₂, 1e-30)`
    pub fn relative_residual(&self, x: &[f64], rhs: &[f64]) -> f64 {
        let kx = self.k.mul_vec(x);
        let num: f64 = kx.iter().zip(rhs).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let den = rhs.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-30);
        num / den
    }
}

/// `Σ_e scatter(p_e KP + q_e KQ)`, without boundary terms.
pub fn assemble_design_matrix(mesh: &GridMesh, design: &DesignField) -> Result<SymBand> {
    let ne = mesh.element_count();
    if design.p.len() != ne || design.q.len() != ne {
        return Err(Error::DimensionMismatch(format!(
            "mesh has {ne} elements, design has {} / {}",
            design.p.len(),
            design.q.len()
        )));
    }
    let mut k = SymBand::zeros(mesh.node_count(), mesh.half_bandwidth());
    for (e, nodes) in mesh.theta().iter().enumerate() {
        let (pe, qe) = (design.p[e], design.q[e]);
        for a in 0..4 {
            for b in 0..=a {
                // one call per unordered pair; add() fills both triangles
                k.add(nodes[a], nodes[b], pe * KP[a][b] + qe * KQ[a][b]);
            }
        }
    }
    Ok(k)
}

/// Global stiffness with the `sigma0` penalty on boundary diagonals, factorized.
pub fn assemble_stiffness(
    mesh: &GridMesh,
    design: &DesignField,
    sigma0: f64,
) -> Result<StiffnessOperator> {
    let mut k = assemble_design_matrix(mesh, design)?;
    for &n in mesh.boundary_nodes() {
        k.add(n, n, sigma0);
    }
    StiffnessOperator::from_matrix(k, sigma0)
}

/// Adds distributed boundary support `sigma` along every boundary edge.
pub fn add_edge_support(k: &mut SymBand, mesh: &GridMesh, sigma: f64) {
    let m = boundary_edge_matrix(sigma);
    for [a, b] in mesh.boundary_edges() {
        k.add(a, a, m[0][0]);
        k.add(b, b, m[1][1]);
        k.add(a, b, m[0][1]);
    }
}

/// Equivalent nodal load of a per-element grayscale vector.
pub fn grayscale_to_force(mesh: &GridMesh, gray: &[f64]) -> Result<NodeVector> {
    if gray.len() != mesh.element_count() {
        return Err(Error::DimensionMismatch(format!(
            "mesh has {} elements, gray vector has {}",
            mesh.element_count(),
            gray.len()
        )));
    }
    let mut f = NodeVector::zeros(mesh.node_count());
    for (nodes, &g) in mesh.theta().iter().zip(gray) {
        for &n in nodes {
            f[n] += NODE_SHARE * g;
        }
    }
    Ok(f)
}

/// Per-element weights `w` with `wᵀ gray = αᵀ grayscale_to_force(gray)`.
pub fn element_projection(mesh: &GridMesh, alpha: &[f64]) -> Vec<f64> {
    mesh.theta()
        .iter()
        .map(|t| NODE_SHARE * (alpha[t[0]] + alpha[t[1]] + alpha[t[2]] + alpha[t[3]]))
        .collect()
}

/// `Σ_e scatter(KQ)`, the discrete `∫ u v` operator.
pub fn assemble_mass(mesh: &GridMesh) -> SymBand {
    let ne = mesh.element_count();
    let design = DesignField {
        p: vec![0.0; ne],
        q: vec![1.0; ne],
    };
    assemble_design_matrix(mesh, &design).expect("design sized from mesh")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn element_constants() {
        assert_eq!(KP[0][0], 4.0 / 24.0);
        assert_eq!(KP[0][2], -2.0 / 24.0);
        for row in KP {
            assert!(row.iter().sum::<f64>().abs() < 1e-15);
        }
        let total: f64 = KQ.iter().flatten().sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_element_hand_assembly() {
        let mesh = GridMesh::new(1, 1);
        let (a, b, s) = (0.7, 1.9, 1e5);
        let design = DesignField { p: vec![a], q: vec![b] };
        let k = assemble_stiffness(&mesh, &design, s).unwrap();
        let t = mesh.element_nodes(0);
        for i in 0..4 {
            for j in 0..4 {
                let expected = a * KP[i][j] + b * KQ[i][j] + if i == j { s } else { 0.0 };
                assert_eq!(k.matrix().get(t[i], t[j]), expected);
            }
        }
    }

    #[test]
    fn force_of_single_element() {
        let mesh = GridMesh::new(1, 1);
        let f = grayscale_to_force(&mesh, &[0.8]).unwrap();
        assert_eq!(f.0, vec![0.2; 4]);
        let z = grayscale_to_force(&GridMesh::new(3, 2), &[0.0; 6]).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn force_of_two_elements() {
        // 2 rows x 1 column: nodes 0,1,2 in column 0 and 3,4,5 in column 1;
        // element 0 = {0,1,4,3}, element 1 = {1,2,5,4}
        let mesh = GridMesh::new(2, 1);
        let (a, b) = (0.3, 0.9);
        let f = grayscale_to_force(&mesh, &[a, b]).unwrap();
        let mut oracle = [0.0; 6];
        for (e, g) in [(0usize, a), (1, b)] {
            for n in [e, e + 1, e + 4, e + 3] {
                oracle[n] += 0.25 * g;
            }
        }
        assert_eq!(f.0, oracle.to_vec());
        assert_eq!(f[1], 0.25 * (a + b));
        assert_eq!(f[4], 0.25 * (a + b));
        assert_eq!(f[0], 0.25 * a);
        assert_eq!(f[2], 0.25 * b);
    }

    #[test]
    fn identity_operator_solves_to_rhs() {
        let k = StiffnessOperator::from_matrix(SymBand::identity(4), 0.0).unwrap();
        let rhs = [1.0, -2.0, 3.5, 0.0];
        assert_eq!(k.solve(&rhs).0, rhs.to_vec());
    }

    #[test]
    fn mass_matrix_area_and_single_element() {
        let mesh = GridMesh::new(3, 5);
        let b = assemble_mass(&mesh);
        let total: f64 = b.to_dense().iter().flatten().sum();
        assert!((total - 15.0).abs() < 1e-12);
        let one = assemble_mass(&GridMesh::new(1, 1));
        let t = GridMesh::new(1, 1).element_nodes(0);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(one.get(t[i], t[j]), KQ[i][j]);
            }
        }
    }

    #[test]
    fn edge_support_matrix() {
        let m = boundary_edge_matrix(3.0);
        assert_eq!(m, [[2.0, 1.0], [1.0, 2.0]]);
        let mesh = GridMesh::new(2, 2);
        let mut k = SymBand::zeros(mesh.node_count(), mesh.half_bandwidth());
        add_edge_support(&mut k, &mesh, 3.0);
        // corner node touches two edges, mid-side node two edges, center none
        assert_eq!(k.get(0, 0), 4.0);
        assert_eq!(k.get(1, 1), 4.0);
        assert_eq!(k.get(4, 4), 0.0);
        assert_eq!(k.get(0, 1), 1.0);
        let total: f64 = k.to_dense().iter().flatten().sum();
        assert!((total - 8.0 * 6.0).abs() < 1e-12);
    }

    #[test]
    fn projection_matches_force_dot() {
        let mesh = GridMesh::new(3, 4);
        let gray: Vec<f64> = (0..12).map(|i| (i as f64 * 0.41).sin().abs()).collect();
        let alpha: Vec<f64> = (0..20).map(|i| (i as f64 * 0.23).cos()).collect();
        let f = grayscale_to_force(&mesh, &gray).unwrap();
        let w = element_projection(&mesh, &alpha);
        let direct: f64 = f.dot(&alpha);
        let fast: f64 = w.iter().zip(&gray).map(|(a, b)| a * b).sum();
        assert!((direct - fast).abs() < 1e-13);
    }
}
