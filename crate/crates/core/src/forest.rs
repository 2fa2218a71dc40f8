//! Growing many axes by recursively splitting the training set.
//!
//! The pool starts with the whole binary task. Each round picks the subset
//! whose smaller class is largest, optimizes an axis on it, and cuts the
//! subset at the midpoint of the two class means along that axis.

use log::{info, warn};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{element_projection, DesignField, GridMesh, NodeVector};
use crate::optimizer::{AxisProblem, ConvergedBy, OptimizerConfig, RefKind};

/// A subset of the task's samples with its class counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetNode {
    pub indices: Vec<usize>,
    /// Negatives.
    pub m0: usize,
    /// Positives.
    pub m1: usize,
    /// Cleared when a split of this subset came out one-sided.
    pub splittable: bool,
}

impl SubsetNode {
    pub fn new(indices: Vec<usize>, positive: &[bool]) -> Self {
        let m1 = indices.iter().filter(|&&i| positive[i]).count();
        SubsetNode {
            m0: indices.len() - m1,
            m1,
            indices,
            splittable: true,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn min_count(&self) -> usize {
        self.m0.min(self.m1)
    }
}

/// Grayscale samples with a positive/negative flag each.
#[derive(Debug, Clone, Copy)]
pub struct BinaryTask<'a> {
    pub samples: &'a [&'a [f64]],
    pub positive: &'a [bool],
}

impl<'a> BinaryTask<'a> {
    pub fn new(samples: &'a [&'a [f64]], positive: &'a [bool]) -> Result<Self> {
        if samples.len() != positive.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} samples, {} flags",
                samples.len(),
                positive.len()
            )));
        }
        Ok(BinaryTask { samples, positive })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn root(&self) -> SubsetNode {
        SubsetNode::new((0..self.len()).collect(), self.positive)
    }
}

/// Index of the subset maximizing `min(m0, m1)`; lowest index on ties.
/// Subsets marked unsplittable rank below every splittable one.
pub fn pick_subset(pool: &[SubsetNode]) -> Result<usize> {
    if pool.is_empty() {
        return Err(Error::EmptySet("subset pool"));
    }
    let key = |n: &SubsetNode| if n.splittable { n.min_count() as i64 } else { -1 };
    let mut best = 0;
    for (i, n) in pool.iter().enumerate() {
        if key(n) > key(&pool[best]) {
            best = i;
        }
    }
    Ok(best)
}

/// Cuts `subset` at `z_th = (μ0 + μ1) / 2` along `axis`: samples with
/// `z ≤ z_th` go to the first part, the rest to the second.
pub fn split_subset(
    subset: &SubsetNode,
    axis: &[f64],
    task: &BinaryTask,
    mesh: &GridMesh,
) -> Result<(SubsetNode, SubsetNode, f64)> {
    if subset.min_count() == 0 {
        return Err(Error::EmptySet("one class of the subset"));
    }
    let w = element_projection(mesh, axis);
    let z: Vec<f64> = subset
        .indices
        .iter()
        .map(|&i| w.iter().zip(task.samples[i]).map(|(a, b)| a * b).sum())
        .collect();
    let (mut s0, mut s1) = (0.0, 0.0);
    for (&i, &zi) in subset.indices.iter().zip(&z) {
        if task.positive[i] {
            s1 += zi;
        } else {
            s0 += zi;
        }
    }
    let threshold = 0.5 * (s0 / subset.m0 as f64 + s1 / subset.m1 as f64);
    let (mut low, mut high) = (Vec::new(), Vec::new());
    for (&i, &zi) in subset.indices.iter().zip(&z) {
        if zi <= threshold {
            low.push(i);
        } else {
            high.push(i);
        }
    }
    Ok((
        SubsetNode::new(low, task.positive),
        SubsetNode::new(high, task.positive),
        threshold,
    ))
}

/// Where an axis came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisProvenance {
    pub subset_size: usize,
    pub m0: usize,
    pub m1: usize,
    pub iterations: usize,
    pub converged_by: ConvergedBy,
    pub ref_kind: RefKind,
    pub j_final: f64,
    pub threshold: f64,
}

/// Optimized fields behind one axis, kept for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisFields {
    pub design: DesignField,
    pub f: NodeVector,
    pub g: NodeVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxisBundle {
    pub n1: usize,
    pub n2: usize,
    pub axes: Vec<NodeVector>,
    /// One entry per axis, or empty for derived bundles.
    pub provenance: Vec<AxisProvenance>,
    /// One entry per axis, or empty.
    pub fields: Vec<AxisFields>,
    /// Set when the pool ran out of two-class subsets early.
    pub exhausted: bool,
}

impl AxisBundle {
    pub fn new(n1: usize, n2: usize, axes: Vec<NodeVector>) -> Result<Self> {
        let m = (n1 + 1) * (n2 + 1);
        if let Some(a) = axes.iter().find(|a| a.len() != m) {
            return Err(Error::DimensionMismatch(format!(
                "axis has {} entries, a {n1}x{n2} mesh has {m} nodes",
                a.len()
            )));
        }
        if axes.iter().flat_map(|a| a.iter()).any(|v| !v.is_finite()) {
            return Err(Error::format("axis bundle", "non-finite axis entry"));
        }
        Ok(AxisBundle {
            n1,
            n2,
            axes,
            provenance: Vec::new(),
            fields: Vec::new(),
            exhausted: false,
        })
    }

    pub fn len(&self) -> usize {
        self.axes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axes.is_empty()
    }

    pub fn node_count(&self) -> usize {
        (self.n1 + 1) * (self.n2 + 1)
    }

    /// Concatenates bundles over the same mesh.
    pub fn concat(parts: Vec<AxisBundle>) -> Result<AxisBundle> {
        let first = parts.first().ok_or(Error::EmptySet("bundles"))?;
        let (n1, n2) = (first.n1, first.n2);
        let keep_prov = parts.iter().all(|b| b.provenance.len() == b.len());
        let keep_fields = parts.iter().all(|b| b.fields.len() == b.len());
        let mut out = AxisBundle::new(n1, n2, Vec::new())?;
        for b in parts {
            if (b.n1, b.n2) != (n1, n2) {
                return Err(Error::DimensionMismatch(format!(
                    "bundles on {n1}x{n2} and {}x{} meshes",
                    b.n1, b.n2
                )));
            }
            out.exhausted |= b.exhausted;
            out.axes.extend(b.axes);
            if keep_prov {
                out.provenance.extend(b.provenance);
            }
            if keep_fields {
                out.fields.extend(b.fields);
            }
        }
        Ok(out)
    }
}

/// Grows `n_axes` axes on `task`.
pub fn generate_axes(
    task: &BinaryTask,
    n_axes: usize,
    cfg: &OptimizerConfig,
    mesh: &GridMesh,
) -> Result<AxisBundle> {
    if n_axes == 0 {
        return Err(Error::Config("n_axes must be at least 1".into()));
    }
    let root = task.root();
    if root.min_count() == 0 {
        return Err(Error::EmptySet("one class of the task"));
    }
    let mut bundle = AxisBundle::new(mesh.n1(), mesh.n2(), Vec::new())?;
    let mut pool = vec![root];
    while bundle.len() < n_axes {
        let k = pick_subset(&pool)?;
        let node = &pool[k];
        if !node.splittable || node.min_count() == 0 {
            warn!("subset pool exhausted after {} of {n_axes} axes", bundle.len());
            bundle.exhausted = true;
            break;
        }
        let (d1, d0): (Vec<usize>, Vec<usize>) =
            node.indices.iter().partition(|&&i| task.positive[i]);
        let problem = AxisProblem::new(
            mesh,
            d1.iter().map(|&i| task.samples[i]).collect(),
            d0.iter().map(|&i| task.samples[i]).collect(),
        )?;
        let result = problem.optimize(cfg)?;
        let (low, high, threshold) = split_subset(node, &result.alpha, task, mesh)?;
        info!(
            "axis {}: subset {} ({} / {}), {} iterations, {}",
            bundle.len() + 1,
            node.len(),
            node.m0,
            node.m1,
            result.iterations,
            result.converged_by
        );
        bundle.provenance.push(AxisProvenance {
            subset_size: node.len(),
            m0: node.m0,
            m1: node.m1,
            iterations: result.iterations,
            converged_by: result.converged_by,
            ref_kind: result.ref_kind,
            j_final: *result.j_history.last().expect("history starts with the initial value"),
            threshold,
        });
        bundle.fields.push(AxisFields {
            design: result.design,
            f: result.f,
            g: result.g,
        });
        bundle.axes.push(result.alpha);
        if low.is_empty() || high.is_empty() {
            pool[k].splittable = false;
        } else {
            pool.splice(k..=k, [low, high]);
        }
    }
    Ok(bundle)
}

/// The `k` leading left singular vectors of the matrix whose columns are the axes.
pub fn orthonormalize(bundle: &AxisBundle, k: usize) -> Result<AxisBundle> {
    let n = bundle.len();
    let m = bundle.node_count();
    if k == 0 || k > n {
        return Err(Error::Config(format!("cannot keep {k} of {n} axes")));
    }
    let a = DMatrix::from_fn(m, n, |i, j| bundle.axes[j][i]);
    let svd = a.svd(true, false);
    let u = svd.u.as_ref().ok_or_else(|| Error::Eigen("SVD produced no left vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    let top = order.first().map_or(0.0, |&i| svd.singular_values[i]);
    let tol = m.max(n) as f64 * f64::EPSILON * top;
    let rank = order.iter().filter(|&&i| svd.singular_values[i] > tol).count();
    if k > rank {
        return Err(Error::RankDeficient { requested: k, rank });
    }
    let axes = order[..k]
        .iter()
        .map(|&j| {
            let col = u.column(j);
            // fix the sign so the largest entry is positive
            let big = col.iter().fold(0.0f64, |b, &v| if v.abs() > b.abs() { v } else { b });
            let s = if big < 0.0 { -1.0 } else { 1.0 };
            NodeVector(col.iter().map(|v| s * v).collect())
        })
        .collect();
    let mut out = AxisBundle::new(bundle.n1, bundle.n2, axes)?;
    out.exhausted = bundle.exhausted;
    Ok(out)
}
