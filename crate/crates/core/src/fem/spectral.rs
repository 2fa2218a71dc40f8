//! Dense generalized eigenproblem `K φ = λ B φ` for small meshes.
//!
//! Eigenvectors are normalized so that `φᵀ B φ = 1`; then `φᵀ K φ = λ` and
//! `K⁻¹ = Σ φ φᵀ / λ`, which is what makes the mutual energy of two loads a
//! spectrally weighted sum of their projections.

use nalgebra::{DMatrix, DVector};

use super::{NodeVector, StiffnessOperator, SymBand};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: NodeVector,
}

/// Largest node count accepted by [`generalized_eigenpairs`].
pub const MAX_DENSE_NODES: usize = 400;

fn dense(m: &SymBand) -> DMatrix<f64> {
    let n = m.dim();
    DMatrix::from_fn(n, n, |i, j| m.get(i, j))
}

/// Full spectrum in ascending order.
pub fn generalized_eigenpairs(k: &StiffnessOperator, b: &SymBand) -> Result<Vec<EigenPair>> {
    let n = k.dim();
    if b.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "stiffness is {n}x{n}, mass is {0}x{0}",
            b.dim()
        )));
    }
    if n > MAX_DENSE_NODES {
        return Err(Error::Eigen(format!(
            "{n} nodes exceeds the dense limit of {MAX_DENSE_NODES}"
        )));
    }
    let kd = dense(k.matrix());
    let chol = dense(b)
        .cholesky()
        .ok_or_else(|| Error::Eigen("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Eigen("singular mass factor".into()))?;
    let mut c = &l_inv * kd * l_inv.transpose();
    // symmetrize rounding before the symmetric solver
    c = (&c + c.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::try_new(c, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Eigen("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lt = l.transpose();
    Ok(order
        .into_iter()
        .map(|i| {
            let y: DVector<f64> = eig.eigenvectors.column(i).into_owned();
            let phi = lt
                .solve_upper_triangular(&y)
                .expect("triangular factor has a nonzero diagonal");
            EigenPair {
                value: eig.eigenvalues[i],
                vector: NodeVector(phi.iter().copied().collect()),
            }
        })
        .collect())
}
