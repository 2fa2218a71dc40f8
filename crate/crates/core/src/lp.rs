//! Move-limit linear program of one sequential-linearization step.
//!
//! ```text
//! min  c_pᵀ x_p + c_qᵀ x_q + M s
//! s.t. Σ x_p = tolx_p
//!      Σ x_q = tolx_q
//!      a_pᵀ x_p + a_qᵀ x_q − s ≤ −G0
//!      lower ≤ x ≤ upper,  s ≥ 0
//! ```
//!
//! The elastic slack `s` lets a step start from a design that violates the
//! linearized constraint; its penalty `M` makes the solver reduce the
//! violation as far as the move limits allow before trading on the objective.
//!
//! The solver is a bounded-variable primal simplex with an explicit dense
//! basis inverse. Nonbasic variables always sit exactly on a bound, and the
//! number of rows is tiny, so each pivot costs one pass over the columns.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const REFACTOR_EVERY: usize = 64;
const FEAS_TOL: f64 = 1e-9;

/// Entering-variable rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum PivotRule {
    /// Lowest-index improving column enters; lowest-index basic leaves on ties.
    #[default]
    Bland,
    /// Most negative reduced cost enters (lowest index on ties). Falls back to
    /// Bland after a run of degenerate pivots, so it cannot cycle.
    Dantzig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoveLimitLp {
    /// Objective gradient with respect to `p`.
    pub c_p: Vec<f64>,
    pub c_q: Vec<f64>,
    /// Constraint gradient with respect to `p`.
    pub a_p: Vec<f64>,
    pub a_q: Vec<f64>,
    /// Constraint value at the current design.
    pub g0: f64,
    pub tolx_p: f64,
    pub tolx_q: f64,
    pub lower_p: Vec<f64>,
    pub lower_q: Vec<f64>,
    /// Common upper bound (the move limit).
    pub upper: f64,
    /// Slack penalty; `None` uses [`MoveLimitLp::default_penalty`].
    pub penalty: Option<f64>,
    pub rule: PivotRule,
}

impl MoveLimitLp {
    /// `1e3 (‖c_p‖∞ + ‖c_q‖∞ + 1)`
    pub fn default_penalty(&self) -> f64 {
        let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        1e3 * (inf(&self.c_p) + inf(&self.c_q) + 1.0)
    }

    pub fn penalty(&self) -> f64 {
        self.penalty.unwrap_or_else(|| self.default_penalty())
    }

    fn validate(&self) -> Result<()> {
        let n = self.c_p.len();
        let nq = self.c_q.len();
        let ok = self.a_p.len() == n
            && self.lower_p.len() == n
            && self.a_q.len() == nq
            && self.lower_q.len() == nq;
        if !ok {
            return Err(Error::DimensionMismatch("move-limit LP vectors differ in length".into()));
        }
        let finite = self
            .c_p
            .iter()
            .chain(&self.c_q)
            .chain(&self.a_p)
            .chain(&self.a_q)
            .chain(&self.lower_p)
            .chain(&self.lower_q)
            .chain([&self.g0, &self.tolx_p, &self.tolx_q, &self.upper])
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("move-limit LP has non-finite coefficients".into()));
        }
        if let Some(i) = self
            .lower_p
            .iter()
            .chain(&self.lower_q)
            .position(|&l| l > self.upper)
        {
            return Err(Error::Config(format!(
                "lower bound of variable {i} exceeds the move limit {}",
                self.upper
            )));
        }
        Ok(())
    }
}

/// Where a variable sits in the final basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x_p: Vec<f64>,
    pub x_q: Vec<f64>,
    /// `c_pᵀ x_p + c_qᵀ x_q`
    pub objective: f64,
    /// `objective + penalty * slack_used`
    pub penalized_objective: f64,
    /// Whether the linearized constraint holds without slack.
    pub feasible: bool,
    pub slack_used: f64,
    pub penalty: f64,
    /// Reduced costs of the `x_p` then `x_q` columns at the final basis.
    pub reduced_costs: Vec<f64>,
    pub status: Vec<VarStatus>,
    pub pivots: usize,
}

pub fn solve_move_limit_lp(lp: &MoveLimitLp) -> Result<LpSolution> {
    lp.validate()?;
    let np = lp.c_p.len();
    let nq = lp.c_q.len();
    let n = np + nq;
    let penalty = lp.penalty();

    // columns: x_p, x_q, logical t of the G row, elastic s
    let mut cols = Vec::with_capacity((n + 2) * 3);
    let mut cost = Vec::with_capacity(n + 2);
    let mut lb = Vec::with_capacity(n + 2);
    let mut ub = Vec::with_capacity(n + 2);
    for i in 0..np {
        cols.extend_from_slice(&[1.0, 0.0, lp.a_p[i]]);
        cost.push(lp.c_p[i]);
        lb.push(lp.lower_p[i]);
        ub.push(lp.upper);
    }
    for i in 0..nq {
        cols.extend_from_slice(&[0.0, 1.0, lp.a_q[i]]);
        cost.push(lp.c_q[i]);
        lb.push(lp.lower_q[i]);
        ub.push(lp.upper);
    }
    cols.extend_from_slice(&[0.0, 0.0, 1.0]);
    cost.push(0.0);
    lb.push(0.0);
    ub.push(f64::INFINITY);
    cols.extend_from_slice(&[0.0, 0.0, -1.0]);
    cost.push(penalty);
    lb.push(0.0);
    ub.push(f64::INFINITY);

    let rhs = vec![lp.tolx_p, lp.tolx_q, -lp.g0];
    let mut simplex = BoundedSimplex::new(3, cols, cost, lb, ub, rhs);
    simplex.solve(lp.rule, &["sum of p increments", "sum of q increments", "linearized constraint"])?;

    let x = &simplex.x;
    let x_p = x[..np].to_vec();
    let x_q = x[np..n].to_vec();
    let slack_used = x[n + 1];
    let objective: f64 = lp.c_p.iter().zip(&x_p).chain(lp.c_q.iter().zip(&x_q)).map(|(c, v)| c * v).sum();
    let reduced = simplex.reduced_costs();
    let status = (0..n)
        .map(|j| match simplex.status[j] {
            Status::Basic(_) => VarStatus::Basic,
            Status::AtLower => VarStatus::AtLower,
            Status::AtUpper => VarStatus::AtUpper,
        })
        .collect();
    Ok(LpSolution {
        x_p,
        x_q,
        objective,
        penalized_objective: objective + penalty * slack_used,
        feasible: slack_used <= FEAS_TOL,
        slack_used,
        penalty,
        reduced_costs: reduced[..n].to_vec(),
        status,
        pivots: simplex.pivots,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Basic(usize),
    AtLower,
    AtUpper,
}

/// Dense bounded-variable primal simplex for a handful of equality rows.
/// Two-phase: artificial columns are appended per row and driven to zero first.
struct BoundedSimplex {
    m: usize,
    /// Column-major constraint matrix, `m` entries per column.
    cols: Vec<f64>,
    cost: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    rhs: Vec<f64>,
    x: Vec<f64>,
    status: Vec<Status>,
    basis: Vec<usize>,
    /// Row-major `m x m` basis inverse.
    binv: Vec<f64>,
    /// Real columns; artificials follow.
    n_real: usize,
    pivots: usize,
    since_refactor: usize,
}

impl BoundedSimplex {
    fn new(m: usize, cols: Vec<f64>, cost: Vec<f64>, lb: Vec<f64>, ub: Vec<f64>, rhs: Vec<f64>) -> Self {
        let n_real = cost.len();
        let mut s = BoundedSimplex {
            m,
            cols,
            cost,
            lb,
            ub,
            rhs,
            x: Vec::new(),
            status: Vec::new(),
            basis: Vec::new(),
            binv: vec![0.0; m * m],
            n_real,
            pivots: 0,
            since_refactor: 0,
        };
        // start each real column on the bound its own cost prefers
        for j in 0..n_real {
            let at_upper = s.cost[j] < 0.0 && s.ub[j].is_finite();
            s.x.push(if at_upper { s.ub[j] } else { s.lb[j] });
            s.status.push(if at_upper { Status::AtUpper } else { Status::AtLower });
        }
        let mut resid = s.rhs.clone();
        for j in 0..n_real {
            for i in 0..m {
                resid[i] -= s.cols[j * m + i] * s.x[j];
            }
        }
        for (i, &r) in resid.iter().enumerate() {
            let sign = if r >= 0.0 { 1.0 } else { -1.0 };
            let j = s.cost.len();
            for k in 0..m {
                s.cols.push(if k == i { sign } else { 0.0 });
            }
            s.cost.push(0.0);
            s.lb.push(0.0);
            s.ub.push(f64::INFINITY);
            s.x.push(r.abs());
            s.status.push(Status::Basic(i));
            s.basis.push(j);
            s.binv[i * m + i] = sign;
        }
        s
    }

    fn n(&self) -> usize {
        self.cost.len()
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.cols[j * self.m..(j + 1) * self.m]
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (i, &bj) in self.basis.iter().enumerate() {
            let cb = cost[bj];
            if cb != 0.0 {
                for k in 0..m {
                    y[k] += cb * self.binv[i * m + k];
                }
            }
        }
        y
    }

    fn reduced_cost(&self, cost: &[f64], y: &[f64], j: usize) -> f64 {
        cost[j] - self.col(j).iter().zip(y).map(|(a, y)| a * y).sum::<f64>()
    }

    fn reduced_costs(&self) -> Vec<f64> {
        let y = self.duals(&self.cost);
        (0..self.n()).map(|j| self.reduced_cost(&self.cost, &y, j)).collect()
    }

    fn refactor(&mut self) {
        let m = self.m;
        // Gauss-Jordan on [B | I]
        let mut a = vec![0.0; m * m];
        for (i, &bj) in self.basis.iter().enumerate() {
            for k in 0..m {
                a[k * m + i] = self.cols[bj * m + k];
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let p = (c..m)
                .max_by(|&r1, &r2| a[r1 * m + c].abs().total_cmp(&a[r2 * m + c].abs()))
                .expect("nonempty");
            if p != c {
                for k in 0..m {
                    a.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            let d = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= d;
                inv[c * m + k] /= d;
            }
            for r in 0..m {
                if r != c {
                    let f = a[r * m + c];
                    if f != 0.0 {
                        for k in 0..m {
                            a[r * m + k] -= f * a[c * m + k];
                            inv[r * m + k] -= f * inv[c * m + k];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        // recompute basic values from the nonbasic ones
        let mut resid = self.rhs.clone();
        for j in 0..self.n() {
            if !matches!(self.status[j], Status::Basic(_)) && self.x[j] != 0.0 {
                for i in 0..m {
                    resid[i] -= self.cols[j * m + i] * self.x[j];
                }
            }
        }
        for (i, &bj) in self.basis.iter().enumerate() {
            self.x[bj] = (0..m).map(|k| self.binv[i * m + k] * resid[k]).sum();
        }
        self.since_refactor = 0;
    }

    fn choose_entering(&self, cost: &[f64], y: &[f64], tol: f64, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.n() {
            let improving = match self.status[j] {
                Status::Basic(_) => continue,
                Status::AtLower => self.ub[j] > self.lb[j],
                Status::AtUpper => true,
            };
            if !improving {
                continue;
            }
            let d = self.reduced_cost(cost, y, j);
            let gain = match self.status[j] {
                Status::AtLower if d < -tol => -d,
                Status::AtUpper if d > tol => d,
                _ => continue,
            };
            if bland {
                return Some((j, d));
            }
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((j, gain));
            }
        }
        best.map(|(j, _)| (j, self.reduced_cost(cost, y, j)))
    }

    /// Optimizes `cost`; returns the number of pivots taken.
    fn optimize(&mut self, cost: &[f64], rule: PivotRule) -> Result<()> {
        let m = self.m;
        let scale = 1.0 + cost.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        let tol = 1e-12 * scale;
        let limit = 50 * (self.n() + m) + 1000;
        let mut degenerate_run = 0usize;
        let mut steps = 0usize;
        loop {
            steps += 1;
            if steps > limit {
                return Err(Error::LpIterationLimit(limit));
            }
            let y = self.duals(cost);
            let bland = rule == PivotRule::Bland || degenerate_run > 50;
            let Some((j, d)) = self.choose_entering(cost, &y, tol, bland) else {
                return Ok(());
            };
            let dir = if d < 0.0 { 1.0 } else { -1.0 };
            let a = self.col(j).to_vec();
            let alpha: Vec<f64> = (0..m)
                .map(|i| (0..m).map(|k| self.binv[i * m + k] * a[k]).sum())
                .collect();

            let mut theta = self.ub[j] - self.lb[j];
            let mut leave: Option<(usize, bool)> = None;
            for i in 0..m {
                let rate = dir * alpha[i];
                let bj = self.basis[i];
                let (lim, to_upper) = if rate > PIVOT_TOL {
                    ((self.x[bj] - self.lb[bj]) / rate, false)
                } else if rate < -PIVOT_TOL && self.ub[bj].is_finite() {
                    ((self.ub[bj] - self.x[bj]) / -rate, true)
                } else {
                    continue;
                };
                let lim = lim.max(0.0);
                let slack = if theta.is_finite() { 1e-14 * (1.0 + theta) } else { 0.0 };
                let better = match leave {
                    _ if lim < theta - slack => true,
                    Some((k, _)) if lim <= theta + slack => bj < self.basis[k],
                    _ => false,
                };
                if better {
                    theta = lim;
                    leave = Some((i, to_upper));
                }
            }
            if !theta.is_finite() {
                return Err(Error::LpUnbounded { column: j });
            }
            degenerate_run = if theta <= 0.0 { degenerate_run + 1 } else { 0 };

            for i in 0..m {
                let bj = self.basis[i];
                self.x[bj] -= theta * dir * alpha[i];
            }
            self.pivots += 1;
            match leave {
                None => {
                    // bound flip
                    if dir > 0.0 {
                        self.x[j] = self.ub[j];
                        self.status[j] = Status::AtUpper;
                    } else {
                        self.x[j] = self.lb[j];
                        self.status[j] = Status::AtLower;
                    }
                }
                Some((r, to_upper)) => {
                    self.x[j] += dir * theta;
                    let out = self.basis[r];
                    if to_upper {
                        self.x[out] = self.ub[out];
                        self.status[out] = Status::AtUpper;
                    } else {
                        self.x[out] = self.lb[out];
                        self.status[out] = Status::AtLower;
                    }
                    self.basis[r] = j;
                    self.status[j] = Status::Basic(r);
                    let piv = alpha[r];
                    for k in 0..m {
                        self.binv[r * m + k] /= piv;
                    }
                    for i in 0..m {
                        if i != r && alpha[i] != 0.0 {
                            let f = alpha[i];
                            for k in 0..m {
                                self.binv[i * m + k] -= f * self.binv[r * m + k];
                            }
                        }
                    }
                    self.since_refactor += 1;
                    if self.since_refactor >= REFACTOR_EVERY {
                        self.refactor();
                    }
                }
            }
        }
    }

    fn solve(&mut self, rule: PivotRule, row_names: &[&'static str]) -> Result<()> {
        let n = self.n();
        let mut phase1 = vec![0.0; n];
        for c in &mut phase1[self.n_real..] {
            *c = 1.0;
        }
        self.optimize(&phase1, rule)?;
        self.refactor();
        let scale = 1.0 + self.rhs.iter().fold(0.0f64, |a, r| a.max(r.abs()));
        for (i, j) in (self.n_real..n).enumerate() {
            if self.x[j] > FEAS_TOL * scale {
                return Err(Error::LpInfeasible {
                    row: i,
                    name: row_names.get(i).copied().unwrap_or("row"),
                    residual: self.x[j],
                });
            }
            self.ub[j] = 0.0;
            if !matches!(self.status[j], Status::Basic(_)) {
                self.x[j] = 0.0;
                self.status[j] = Status::AtLower;
            }
        }
        let cost = self.cost.clone();
        self.optimize(&cost, rule)?;
        self.refactor();
        // basic values drift by rounding only; pin them into their boxes
        for &bj in &self.basis {
            self.x[bj] = self.x[bj].clamp(self.lb[bj], self.ub[bj]);
        }
        Ok(())
    }
}
