//! Oracles and fixtures shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use meip::fem::{DesignField, GridMesh};
use meip::lp::{MoveLimitLp, PivotRule};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Q = Ratio<i64>;

/// Polynomial in x, y with degree at most 2 in each variable; `c[i][j]` multiplies `x^i y^j`.
#[derive(Clone, Copy)]
pub struct Poly(pub [[Q; 3]; 3]);

impl Poly {
    pub fn zero() -> Self {
        Poly([[Q::from_integer(0); 3]; 3])
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        let mut r = Poly::zero();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let (a, b) = (self.0[i][j], o.0[k][l]);
                        if a != Q::from_integer(0) && b != Q::from_integer(0) {
                            assert!(i + k < 3 && j + l < 3, "degree overflow");
                            r.0[i + k][j + l] += a * b;
                        }
                    }
                }
            }
        }
        r
    }

    pub fn dx(&self) -> Poly {
        let mut r = Poly::zero();
        for i in 1..3 {
            for j in 0..3 {
                r.0[i - 1][j] = self.0[i][j] * Q::from_integer(i as i64);
            }
        }
        r
    }

    pub fn dy(&self) -> Poly {
        let mut r = Poly::zero();
        for i in 0..3 {
            for j in 1..3 {
                r.0[i][j - 1] = self.0[i][j] * Q::from_integer(j as i64);
            }
        }
        r
    }

    /// Integral over the unit square.
    pub fn integral(&self) -> Q {
        let mut s = Q::from_integer(0);
        for i in 0..3 {
            for j in 0..3 {
                s += self.0[i][j] / Q::from_integer(((i + 1) * (j + 1)) as i64);
            }
        }
        s
    }
}

fn shape(corner: (i64, i64)) -> Poly {
    // corner (row offset, column offset) -> product of 1D hat functions
    let hat = |on: i64| if on == 1 { [0, 1] } else { [1, -1] };
    let (hx, hy) = (hat(corner.0), hat(corner.1));
    let mut p = Poly::zero();
    for i in 0..2 {
        for j in 0..2 {
            p.0[i][j] = Q::from_integer(hx[i] * hy[j]);
        }
    }
    p
}

pub fn to_f64(q: Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

/// Exact `(∫ ∇Nᵢ·∇Nⱼ, ∫ NᵢNⱼ)` over one element, in the mesh's local node order.
pub fn exact_element_integrals() -> ([[Q; 4]; 4], [[Q; 4]; 4]) {
    let mesh = GridMesh::new(1, 1);
    let n: Vec<Poly> = mesh.theta()[0]
        .iter()
        .map(|&k| {
            let (r, c) = mesh.node_position(k);
            shape((r as i64, c as i64))
        })
        .collect();
    let mut grad = [[Q::from_integer(0); 4]; 4];
    let mut mass = grad;
    for a in 0..4 {
        for b in 0..4 {
            grad[a][b] = n[a].dx().mul(&n[b].dx()).integral() + n[a].dy().mul(&n[b].dy()).integral();
            mass[a][b] = n[a].mul(&n[b]).integral();
        }
    }
    (grad, mass)
}

pub fn random_lp(rng: &mut ChaCha8Rng, n: usize, rule: PivotRule) -> MoveLimitLp {
    let upper = rng.gen_range(0.2..1.0);
    let lower = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n)
            .map(|_| if rng.gen_bool(0.2) { 0.0 } else { -rng.gen_range(0.0..upper) })
            .collect()
    };
    let (lower_p, lower_q) = (lower(rng), lower(rng));
    let budget = |rng: &mut ChaCha8Rng, lo: &[f64]| {
        let a: f64 = lo.iter().sum();
        let b = upper * n as f64;
        a + rng.gen_range(0.05..0.95) * (b - a)
    };
    let tolx_p = budget(rng, &lower_p);
    let tolx_q = budget(rng, &lower_q);
    let vec = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect() };
    MoveLimitLp {
        c_p: vec(rng),
        c_q: vec(rng),
        a_p: vec(rng),
        a_q: vec(rng),
        g0: rng.gen_range(-1.0..1.0),
        tolx_p,
        tolx_q,
        lower_p,
        lower_q,
        upper,
        penalty: Some(rng.gen_range(0.5..20.0)),
        rule,
    }
}

/// Dense Gaussian elimination with partial pivoting; `None` when singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for k in col..n {
                    a[r][k] -= f * a[col][k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Minimum of `cᵀx + M max(0, g0 + aᵀx)` over the box and the two budget
/// rows, by enumerating every vertex of the box/budget polytope cut by the
/// hyperplane `g0 + aᵀx = 0`.
pub fn enumerate_optimum(lp: &MoveLimitLp) -> f64 {
    let n = lp.c_p.len();
    let nv = 2 * n;
    let c: Vec<f64> = lp.c_p.iter().chain(&lp.c_q).copied().collect();
    let a: Vec<f64> = lp.a_p.iter().chain(&lp.a_q).copied().collect();
    let lo: Vec<f64> = lp.lower_p.iter().chain(&lp.lower_q).copied().collect();
    let m = lp.penalty();
    let mut best = f64::INFINITY;
    for with_cut in [false, true] {
        let rows = if with_cut { 3 } else { 2 };
        for free in 0u32..(1 << nv) {
            if free.count_ones() as usize != rows {
                continue;
            }
            let free_idx: Vec<usize> = (0..nv).filter(|&j| free >> j & 1 == 1).collect();
            let fixed_idx: Vec<usize> = (0..nv).filter(|&j| free >> j & 1 == 0).collect();
            for bounds in 0u32..(1 << fixed_idx.len()) {
                let mut x = vec![0.0; nv];
                for (k, &j) in fixed_idx.iter().enumerate() {
                    x[j] = if bounds >> k & 1 == 1 { lp.upper } else { lo[j] };
                }
                let coef = |row: usize, j: usize| match row {
                    0 => f64::from(u8::from(j < n)),
                    1 => f64::from(u8::from(j >= n)),
                    _ => a[j],
                };
                let rhs_full = [lp.tolx_p, lp.tolx_q, -lp.g0];
                let mat: Vec<Vec<f64>> = (0..rows)
                    .map(|r| free_idx.iter().map(|&j| coef(r, j)).collect())
                    .collect();
                let rhs: Vec<f64> = (0..rows)
                    .map(|r| rhs_full[r] - fixed_idx.iter().map(|&j| coef(r, j) * x[j]).sum::<f64>())
                    .collect();
                let Some(sol) = solve_dense(mat, rhs) else { continue };
                for (k, &j) in free_idx.iter().enumerate() {
                    x[j] = sol[k];
                }
                let inside = (0..nv).all(|j| x[j] >= lo[j] - 1e-11 && x[j] <= lp.upper + 1e-11);
                if !inside {
                    continue;
                }
                let g = lp.g0 + a.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>();
                let val = c.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() + m * g.max(0.0);
                best = best.min(val);
            }
        }
    }
    best
}

pub fn penalized_value(lp: &MoveLimitLp, xp: &[f64], xq: &[f64]) -> f64 {
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let g = lp.g0 + dot(&lp.a_p, xp) + dot(&lp.a_q, xq);
    dot(&lp.c_p, xp) + dot(&lp.c_q, xq) + lp.penalty() * g.max(0.0)
}

/// Gaussian bump centred at (r0, c0) plus uniform noise, column-major.
pub fn blob(n1: usize, n2: usize, r0: f64, c0: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut g = vec![0.0; n1 * n2];
    let (dr, dc) = (rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
    for c in 0..n2 {
        for r in 0..n1 {
            let d2 = (r as f64 - r0 - dr).powi(2) + (c as f64 - c0 - dc).powi(2);
            g[c * n1 + r] = (-d2 / 2.0).exp() + rng.gen_range(0.0..0.05);
        }
    }
    g
}

/// Two groups of `count` blobs on an `n`×`n` grid, near opposite corners.
pub fn two_blobs(n: usize, count: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = 0.25 * n as f64;
    let hi = 0.7 * n as f64;
    let d1 = (0..count).map(|_| blob(n, n, lo, lo, &mut rng)).collect();
    let d0 = (0..count).map(|_| blob(n, n, hi, hi, &mut rng)).collect();
    (d1, d0)
}

pub fn refs(v: &[Vec<f64>]) -> Vec<&[f64]> {
    v.iter().map(|x| x.as_slice()).collect()
}

pub fn random_design(rng: &mut ChaCha8Rng, ne: usize, lo: f64, hi: f64) -> DesignField {
    DesignField {
        p: (0..ne).map(|_| rng.gen_range(lo..hi)).collect(),
        q: (0..ne).map(|_| rng.gen_range(lo..hi)).collect(),
    }
}
