//! Gaussian (quadratic discriminant) classifier over feature coordinates.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{element_projection, GridMesh, NodeVector};

pub const DEFAULT_RIDGE: f64 = 1e-6;

/// Per-class Gaussian with the quadratic discriminant
/// `β(z) = ½ zᵀHz + bᵀz + c`, `H = −Σ⁻¹`, `b = Σ⁻¹μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassGaussian {
    pub prior: f64,
    pub mean: Vec<f64>,
    /// Row-major covariance, already regularized.
    pub cov: Vec<f64>,
    h: Vec<f64>,
    b: Vec<f64>,
    c: f64,
}

impl ClassGaussian {
    pub fn new(prior: f64, mean: Vec<f64>, cov: Vec<f64>) -> Result<Self> {
        let d = mean.len();
        if cov.len() != d * d {
            return Err(Error::DimensionMismatch(format!(
                "mean has {d} entries, covariance has {}",
                cov.len()
            )));
        }
        if !(prior > 0.0 && prior <= 1.0) {
            return Err(Error::Config(format!("class prior {prior} outside (0, 1]")));
        }
        let sigma = DMatrix::from_row_slice(d, d, &cov);
        let chol = sigma.clone().cholesky().ok_or(Error::NotPositiveDefinite {
            pivot: 0,
            value: f64::NAN,
        })?;
        let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
        let inv = chol.inverse();
        let mu = DVector::from_column_slice(&mean);
        let b = &inv * &mu;
        let c = -0.5 * mu.dot(&b) - 0.5 * log_det + prior.ln();
        let h: Vec<f64> = (0..d * d).map(|k| -inv[(k / d, k % d)]).collect();
        Ok(ClassGaussian {
            prior,
            mean,
            cov,
            h,
            b: b.iter().copied().collect(),
            c,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `H = −Σ⁻¹`, row-major.
    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// `−½ μᵀΣ⁻¹μ − ½ ln|Σ| + ln π`
    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn discriminant(&self, z: &[f64]) -> f64 {
        let d = self.dim();
        let mut quad = 0.0;
        for i in 0..d {
            let row = &self.h[i * d..(i + 1) * d];
            quad += z[i] * row.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
        }
        0.5 * quad + self.b.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() + self.c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianClassifier {
    classes: Vec<ClassGaussian>,
}

impl GaussianClassifier {
    pub fn from_classes(classes: Vec<ClassGaussian>) -> Result<Self> {
        let d = classes.first().ok_or(Error::EmptySet("classes"))?.dim();
        if classes.iter().any(|c| c.dim() != d) {
            return Err(Error::DimensionMismatch("classes differ in feature dimension".into()));
        }
        Ok(GaussianClassifier { classes })
    }

    /// Fits priors, means and biased covariances; `ridge * trace(Σ)/dim` is
    /// added to each covariance diagonal.
    pub fn fit(features: &[Vec<f64>], labels: &[usize], n_classes: usize, ridge: f64) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows, {} labels",
                features.len(),
                labels.len()
            )));
        }
        let d = features.first().ok_or(Error::EmptySet("training features"))?.len();
        if features.iter().any(|z| z.len() != d) {
            return Err(Error::DimensionMismatch("feature rows differ in length".into()));
        }
        let n = features.len() as f64;
        let mut classes = Vec::with_capacity(n_classes);
        for j in 0..n_classes {
            let rows: Vec<&Vec<f64>> = features
                .iter()
                .zip(labels)
                .filter(|&(_, &l)| l == j)
                .map(|(z, _)| z)
                .collect();
            if rows.len() < 2 {
                return Err(Error::TooFewSamples { class: j, count: rows.len() });
            }
            let m = rows.len() as f64;
            let mut mean = vec![0.0; d];
            for z in &rows {
                for (a, b) in mean.iter_mut().zip(z.iter()) {
                    *a += b;
                }
            }
            mean.iter_mut().for_each(|a| *a /= m);
            let mut cov = vec![0.0; d * d];
            for z in &rows {
                for i in 0..d {
                    let di = z[i] - mean[i];
                    for k in 0..=i {
                        cov[i * d + k] += di * (z[k] - mean[k]);
                    }
                }
            }
            for i in 0..d {
                for k in 0..=i {
                    let v = cov[i * d + k] / m;
                    cov[i * d + k] = v;
                    cov[k * d + i] = v;
                }
            }
            let trace: f64 = (0..d).map(|i| cov[i * d + i]).sum();
            let scale = if trace > 0.0 { trace / d as f64 } else { 1.0 };
            for i in 0..d {
                cov[i * d + i] += ridge * scale;
            }
            classes.push(ClassGaussian::new(m / n, mean, cov)?);
        }
        GaussianClassifier::from_classes(classes)
    }

    pub fn classes(&self) -> &[ClassGaussian] {
        &self.classes
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn dim(&self) -> usize {
        self.classes[0].dim()
    }

    pub fn discriminants(&self, z: &[f64]) -> Vec<f64> {
        self.classes.iter().map(|c| c.discriminant(z)).collect()
    }

    /// Class posteriors; sums to one.
    pub fn posterior(&self, z: &[f64]) -> Vec<f64> {
        let beta = self.discriminants(z);
        let top = beta.iter().fold(f64::NEG_INFINITY, |m, &b| m.max(b));
        let mut p: Vec<f64> = beta.iter().map(|b| (b - top).exp()).collect();
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= s);
        p
    }

    /// Index of the largest discriminant; lowest index on ties.
    pub fn predict(&self, z: &[f64]) -> usize {
        let beta = self.discriminants(z);
        let mut best = 0;
        for (j, &b) in beta.iter().enumerate() {
            if b > beta[best] {
                best = j;
            }
        }
        best
    }
}

/// Counts indexed `[output class][target class]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(n: usize) -> Self {
        ConfusionMatrix { counts: vec![vec![0; n]; n] }
    }

    pub fn from_predictions(predicted: &[usize], target: &[usize], n: usize) -> Result<Self> {
        if predicted.len() != target.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} predictions, {} targets",
                predicted.len(),
                target.len()
            )));
        }
        let mut m = ConfusionMatrix::new(n);
        for (&o, &t) in predicted.iter().zip(target) {
            if o >= n || t >= n {
                return Err(Error::LabelOutOfRange { label: o.max(t), classes: n });
            }
            m.counts[o][t] += 1;
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.n()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.correct() as f64 / t as f64,
        }
    }

    /// Fraction of samples predicted as `class` that belong to it.
    pub fn precision(&self, class: usize) -> Option<f64> {
        let row: usize = self.counts[class].iter().sum();
        (row > 0).then(|| self.counts[class][class] as f64 / row as f64)
    }

    /// Fraction of samples of `class` predicted as it.
    pub fn recall(&self, class: usize) -> Option<f64> {
        let col: usize = self.counts.iter().map(|r| r[class]).sum();
        (col > 0).then(|| self.counts[class][class] as f64 / col as f64)
    }
}

impl fmt::Display for ConfusionMatrix {
    /// Counts with precision in the last column and recall in the last row.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{:.2}%", 100.0 * v));
        for (i, row) in self.counts.iter().enumerate() {
            for c in row {
                write!(f, "{c:>8}")?;
            }
            writeln!(f, "{:>10}", pct(self.precision(i)))?;
        }
        for j in 0..self.n() {
            write!(f, "{:>8}", pct(self.recall(j)))?;
        }
        writeln!(f, "{:>10}", pct(Some(self.accuracy())))
    }
}

/// Projects grayscale vectors onto a set of axes.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    weights: Vec<Vec<f64>>,
}

impl FeatureMap {
    pub fn new(mesh: &GridMesh, axes: &[NodeVector]) -> Result<Self> {
        if let Some(a) = axes.iter().find(|a| a.len() != mesh.node_count()) {
            return Err(Error::DimensionMismatch(format!(
                "axis has {} entries, mesh has {} nodes",
                a.len(),
                mesh.node_count()
            )));
        }
        Ok(FeatureMap {
            weights: axes.iter().map(|a| element_projection(mesh, a)).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// `z_m = α_mᵀ X`, with `X` the nodal load of `gray`.
    pub fn map(&self, gray: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| w.iter().zip(gray).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Feature coordinates of one grayscale vector.
pub fn extract_features(mesh: &GridMesh, axes: &[NodeVector], gray: &[f64]) -> Result<Vec<f64>> {
    if gray.len() != mesh.element_count() {
        return Err(Error::DimensionMismatch(format!(
            "gray vector has {} entries, mesh has {} elements",
            gray.len(),
            mesh.element_count()
        )));
    }
    Ok(FeatureMap::new(mesh, axes)?.map(gray))
}
