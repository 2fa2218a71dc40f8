//! Sequential linear programming over the membrane's material fields.
//!
//! One run takes two groups of grayscale samples, `D1` and `D0`, and shapes
//! the fields `p` and `q` so that the reference displacement `α` separates
//! the groups' projections `αᵀX` with small one-sided spread.

use std::fmt;
use std::str::FromStr;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{
    assemble_stiffness, element_form, element_projection, grayscale_to_force, DesignField,
    GridMesh, NodeVector, StiffnessOperator, KP, KQ,
};
use crate::lp::{solve_move_limit_lp, MoveLimitLp, PivotRule};

/// Which displacement serves as the feature axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RefKind {
    U,
    V,
    #[default]
    UMinusV,
}

impl RefKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RefKind::U => "U",
            RefKind::V => "V",
            RefKind::UMinusV => "U_MINUS_V",
        }
    }
}

impl fmt::Display for RefKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RefKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().replace('-', "_").as_str() {
            "U" => Ok(RefKind::U),
            "V" => Ok(RefKind::V),
            "U_MINUS_V" | "U_V" => Ok(RefKind::UMinusV),
            other => Err(Error::Config(format!("unknown reference kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub lambda: f64,
    pub tolp: f64,
    pub tolq: f64,
    pub p_min: f64,
    pub q_min: f64,
    pub sigma0: f64,
    pub dx_max: f64,
    pub eps_x: f64,
    pub eps_j: f64,
    pub gamma: f64,
    pub max_iters: usize,
    /// Consecutive rejected steps before giving up on the move limit.
    pub max_shrinks: usize,
    pub ref_kind: RefKind,
    /// Slack penalty of the LP; `None` scales it from the objective gradient.
    pub penalty: Option<f64>,
    pub pivot_rule: PivotRule,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            lambda: 0.3,
            tolp: 2.0,
            tolq: 2.0,
            p_min: 1e-3,
            q_min: 1e-3,
            sigma0: 1e5,
            dx_max: 0.08,
            eps_x: 8e-4,
            eps_j: 1e-7,
            gamma: 0.7,
            max_iters: 500,
            max_shrinks: 12,
            ref_kind: RefKind::UMinusV,
            penalty: None,
            pivot_rule: PivotRule::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self, element_count: usize) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda must lie in [0, 1]");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        for (name, v) in [
            ("tolp", self.tolp),
            ("tolq", self.tolq),
            ("p_min", self.p_min),
            ("q_min", self.q_min),
            ("sigma0", self.sigma0),
            ("dx_max", self.dx_max),
            ("eps_x", self.eps_x),
            ("eps_j", self.eps_j),
        ] {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let ne = element_count as f64;
        if self.tolp < ne * self.p_min || self.tolq < ne * self.q_min {
            return bad("budgets are smaller than the lower bounds allow");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConvergedBy {
    #[serde(rename = "EPS_J")]
    EpsJ,
    #[serde(rename = "EPS_X")]
    EpsX,
    #[serde(rename = "MAX_ITERS")]
    MaxIters,
}

impl fmt::Display for ConvergedBy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConvergedBy::EpsJ => "EPS_J",
            ConvergedBy::EpsX => "EPS_X",
            ConvergedBy::MaxIters => "MAX_ITERS",
        })
    }
}

/// Sample indices selected into the deviation terms.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Selection {
    pub s1: Vec<usize>,
    pub s0: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub design: DesignField,
    pub k: StiffnessOperator,
    pub u: NodeVector,
    pub v: NodeVector,
    pub w: NodeVector,
    pub c: NodeVector,
    pub alpha: NodeVector,
    /// Deviation load.
    pub h: NodeVector,
    pub mu1: f64,
    pub mu0: f64,
    pub selection: Selection,
    pub j0: f64,
    pub g0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub j_p: Vec<f64>,
    pub j_q: Vec<f64>,
    pub g_p: Vec<f64>,
    pub g_q: Vec<f64>,
}

/// One LP solve of the outer loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    /// Objective of the trial design.
    pub j0: f64,
    pub g0: f64,
    pub dx_max: f64,
    pub slack_used: f64,
    pub step: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct AxisResult {
    pub alpha: NodeVector,
    pub design: DesignField,
    /// Objective of the initial design followed by every accepted one.
    pub j_history: Vec<f64>,
    /// LP solves performed.
    pub iterations: usize,
    pub converged_by: ConvergedBy,
    pub trace: Vec<IterRecord>,
    pub f: NodeVector,
    pub g: NodeVector,
    pub ref_kind: RefKind,
}

/// Mean nodal loads of both groups, computed as loads of the mean images.
pub fn mean_forces(d1: &[&[f64]], d0: &[&[f64]], mesh: &GridMesh) -> Result<(NodeVector, NodeVector)> {
    let f = grayscale_to_force(mesh, &mean_gray(d1, "D1")?)?;
    let g = grayscale_to_force(mesh, &mean_gray(d0, "D0")?)?;
    Ok((f, g))
}

fn mean_gray(samples: &[&[f64]], name: &'static str) -> Result<Vec<f64>> {
    let first = samples.first().ok_or(Error::EmptySet(name))?;
    let mut m = vec![0.0; first.len()];
    for s in samples {
        if s.len() != m.len() {
            return Err(Error::DimensionMismatch(format!(
                "samples of {name} have lengths {} and {}",
                m.len(),
                s.len()
            )));
        }
        for (a, b) in m.iter_mut().zip(s.iter()) {
            *a += b;
        }
    }
    let inv = 1.0 / samples.len() as f64;
    m.iter_mut().for_each(|a| *a *= inv);
    Ok(m)
}

fn mean_gray_of(samples: &[&[f64]], idx: &[usize], ne: usize) -> Vec<f64> {
    let mut m = vec![0.0; ne];
    if idx.is_empty() {
        return m;
    }
    for &i in idx {
        for (a, b) in m.iter_mut().zip(samples[i].iter()) {
            *a += b;
        }
    }
    let inv = 1.0 / idx.len() as f64;
    m.iter_mut().for_each(|a| *a *= inv);
    m
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The two sample groups of one optimization on a fixed mesh.
pub struct AxisProblem<'a> {
    mesh: &'a GridMesh,
    d1: Vec<&'a [f64]>,
    d0: Vec<&'a [f64]>,
    f: NodeVector,
    g: NodeVector,
}

impl<'a> AxisProblem<'a> {
    pub fn new(mesh: &'a GridMesh, d1: Vec<&'a [f64]>, d0: Vec<&'a [f64]>) -> Result<Self> {
        let (f, g) = mean_forces(&d1, &d0, mesh)?;
        Ok(AxisProblem { mesh, d1, d0, f, g })
    }

    pub fn mesh(&self) -> &GridMesh {
        self.mesh
    }

    pub fn f(&self) -> &NodeVector {
        &self.f
    }

    pub fn g(&self) -> &NodeVector {
        &self.g
    }

    /// Indices of `D1` samples below `μ1` and of `D0` samples above `μ0`.
    pub fn select(&self, alpha: &[f64], mu1: f64, mu0: f64) -> Selection {
        let w = element_projection(self.mesh, alpha);
        let s1 = (0..self.d1.len()).filter(|&i| dot(&w, self.d1[i]) < mu1).collect();
        let s0 = (0..self.d0.len()).filter(|&i| dot(&w, self.d0[i]) > mu0).collect();
        Selection { s1, s0 }
    }

    /// Evaluates the state; `frozen` replaces the selection that would
    /// otherwise follow from the current axis.
    pub fn compute_state(
        &self,
        design: &DesignField,
        cfg: &OptimizerConfig,
        frozen: Option<&Selection>,
    ) -> Result<OptimizerState> {
        let ne = self.mesh.element_count();
        let k = assemble_stiffness(self.mesh, design, cfg.sigma0)?;
        let u = k.solve(&self.f);
        let v = k.solve(&self.g);
        let alpha = match cfg.ref_kind {
            RefKind::U => u.clone(),
            RefKind::V => v.clone(),
            RefKind::UMinusV => u.combine(1.0, &v, -1.0),
        };
        let mu1 = alpha.dot(&self.f);
        let mu0 = alpha.dot(&self.g);
        let selection = match frozen {
            Some(s) => s.clone(),
            None => self.select(&alpha, mu1, mu0),
        };
        // an empty side contributes nothing to the deviation load
        let m0 = mean_gray_of(&self.d0, &selection.s0, ne);
        let m1 = mean_gray_of(&self.d1, &selection.s1, ne);
        let diff: Vec<f64> = m0.iter().zip(&m1).map(|(a, b)| a - b).collect();
        let h = grayscale_to_force(self.mesh, &diff)?;
        let w = k.solve(&h);
        let lambda = cfg.lambda;
        let c = NodeVector(
            u.iter()
                .zip(v.iter())
                .zip(w.iter())
                .map(|((u, v), w)| (1.0 - 2.0 * lambda) * (u - v) + (1.0 - lambda) * w)
                .collect(),
        );
        let j0 = k.mutual_energy(&c, &alpha)?;
        let g0 = k.mutual_energy(&u, &v)?;
        Ok(OptimizerState {
            design: design.clone(),
            k,
            u,
            v,
            w,
            c,
            alpha,
            h,
            mu1,
            mu0,
            selection,
            j0,
            g0,
        })
    }

    /// `J0` from the load side: `((1−2λ)(f−g) + (1−λ)h)ᵀ α`.
    pub fn force_side_objective(&self, state: &OptimizerState, lambda: f64) -> f64 {
        (0..self.f.len())
            .map(|i| {
                let cf = (1.0 - 2.0 * lambda) * (self.f[i] - self.g[i]) + (1.0 - lambda) * state.h[i];
                cf * state.alpha[i]
            })
            .sum()
    }

    pub fn optimize(&self, cfg: &OptimizerConfig) -> Result<AxisResult> {
        let ne = self.mesh.element_count();
        cfg.validate(ne)?;
        let mut state = self.compute_state(&DesignField::uniform(ne, cfg.tolp, cfg.tolq), cfg, None)?;
        let mut j_history = vec![state.j0];
        let mut trace = Vec::new();
        let mut dx = cfg.dx_max;
        let mut shrinks = 0usize;
        let mut grads = gradients(self.mesh, &state);
        let mut iterations = 0usize;
        let converged_by = loop {
            if iterations >= cfg.max_iters {
                break ConvergedBy::MaxIters;
            }
            iterations += 1;
            let lp = build_lp(&state.design, &grads, state.g0, cfg, dx);
            let sol = solve_move_limit_lp(&lp)?;
            let step = sol
                .x_p
                .iter()
                .chain(&sol.x_q)
                .fold(0.0f64, |m, x| m.max(x.abs()));
            let trial = apply_step(&state.design, &sol.x_p, &sol.x_q, cfg);
            let next = self.compute_state(&trial, cfg, None)?;
            let improved = next.j0 < state.j0;
            let change = (next.j0 - state.j0).abs();
            let record = IterRecord {
                iter: iterations,
                j0: next.j0,
                g0: next.g0,
                dx_max: dx,
                slack_used: sol.slack_used,
                step,
                accepted: improved,
            };
            debug!(
                "iter {} J0 {:.9e} G0 {:.6e} dx {:.3e} slack {:.3e} {}",
                record.iter,
                record.j0,
                record.g0,
                record.dx_max,
                record.slack_used,
                if improved { "accepted" } else { "rejected" }
            );
            trace.push(record);
            if improved {
                state = next;
                j_history.push(state.j0);
                grads = gradients(self.mesh, &state);
                shrinks = 0;
            }
            if change <= cfg.eps_j {
                break ConvergedBy::EpsJ;
            }
            if step <= cfg.eps_x {
                break ConvergedBy::EpsX;
            }
            if !improved {
                dx *= cfg.gamma;
                shrinks += 1;
                if shrinks >= cfg.max_shrinks {
                    break ConvergedBy::EpsX;
                }
            }
        };
        Ok(AxisResult {
            alpha: state.alpha,
            design: state.design,
            j_history,
            iterations,
            converged_by,
            trace,
            f: self.f.clone(),
            g: self.g.clone(),
            ref_kind: cfg.ref_kind,
        })
    }
}

fn build_lp(design: &DesignField, grads: &Gradients, g0: f64, cfg: &OptimizerConfig, dx: f64) -> MoveLimitLp {
    let lower = |v: &[f64], min: f64| -> Vec<f64> {
        v.iter().map(|&x| (min - x).max(-dx).min(0.0)).collect()
    };
    MoveLimitLp {
        c_p: grads.j_p.clone(),
        c_q: grads.j_q.clone(),
        a_p: grads.g_p.clone(),
        a_q: grads.g_q.clone(),
        g0,
        tolx_p: cfg.tolp - design.sum_p(),
        tolx_q: cfg.tolq - design.sum_q(),
        lower_p: lower(&design.p, cfg.p_min),
        lower_q: lower(&design.q, cfg.q_min),
        upper: dx,
        penalty: cfg.penalty,
        rule: cfg.pivot_rule,
    }
}

fn apply_step(design: &DesignField, x_p: &[f64], x_q: &[f64], cfg: &OptimizerConfig) -> DesignField {
    DesignField {
        p: design.p.iter().zip(x_p).map(|(p, x)| (p + x).max(cfg.p_min)).collect(),
        q: design.q.iter().zip(x_q).map(|(q, x)| (q + x).max(cfg.q_min)).collect(),
    }
}

/// Adjoint gradients of `J = cᵀKα` and `G = uᵀKv` with respect to `p` and `q`.
pub fn gradients(mesh: &GridMesh, state: &OptimizerState) -> Gradients {
    let ne = mesh.element_count();
    let mut out = Gradients {
        j_p: Vec::with_capacity(ne),
        j_q: Vec::with_capacity(ne),
        g_p: Vec::with_capacity(ne),
        g_q: Vec::with_capacity(ne),
    };
    for e in 0..ne {
        let c = mesh.gather(e, &state.c);
        let a = mesh.gather(e, &state.alpha);
        let u = mesh.gather(e, &state.u);
        let v = mesh.gather(e, &state.v);
        out.j_p.push(-element_form(&KP, &c, &a));
        out.j_q.push(-element_form(&KQ, &c, &a));
        out.g_p.push(-element_form(&KP, &u, &v));
        out.g_q.push(-element_form(&KQ, &u, &v));
    }
    out
}

/// Runs one optimization on two groups of grayscale vectors.
pub fn optimize(d1: &[&[f64]], d0: &[&[f64]], cfg: &OptimizerConfig, mesh: &GridMesh) -> Result<AxisResult> {
    AxisProblem::new(mesh, d1.to_vec(), d0.to_vec())?.optimize(cfg)
}
