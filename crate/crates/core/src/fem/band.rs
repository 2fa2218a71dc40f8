use crate::error::{Error, Result};

/// Symmetric matrix in lower band storage.
///
/// Row `i` keeps entries `j` in `i - kd ..= i` at `data[i * (kd + 1) + kd - (i - j)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBand {
    n: usize,
    kd: usize,
    data: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, kd: usize) -> Self {
        SymBand {
            n,
            kd,
            data: vec![0.0; n * (kd + 1)],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = SymBand::zeros(n, 0);
        for i in 0..n {
            m.add(i, i, 1.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.kd
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.kd);
        i * (self.kd + 1) + self.kd - (i - j)
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.kd {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    /// Adds `v` to the symmetric pair `(i, j)`, `(j, i)`.
    ///
    /// # Panics
    ///
    /// If `(i, j)` falls outside the band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.kd, "entry ({i}, {j}) outside band {}", self.kd);
        let k = self.slot(i, j);
        self.data[k] += v;
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kd);
            let row = &self.data[i * (self.kd + 1)..(i + 1) * (self.kd + 1)];
            let off = self.kd - (i - lo);
            let mut acc = row[self.kd] * x[i];
            for (j, &a) in (lo..i).zip(&row[off..self.kd]) {
                acc += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += acc;
        }
        y
    }

    /// `aᵀ A b`, evaluated so that swapping `a` and `b` gives the identical result.
    pub fn bilinear(&self, a: &[f64], b: &[f64]) -> f64 {
        assert_eq!(a.len(), self.n);
        assert_eq!(b.len(), self.n);
        let mut acc = 0.0;
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kd);
            let row = &self.data[i * (self.kd + 1)..(i + 1) * (self.kd + 1)];
            let off = self.kd - (i - lo);
            acc += row[self.kd] * (a[i] * b[i]);
            for (j, &v) in (lo..i).zip(&row[off..self.kd]) {
                acc += v * (a[i] * b[j] + a[j] * b[i]);
            }
        }
        acc
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Band Cholesky factor `A = L Lᵀ`.
    pub fn cholesky(&self) -> Result<BandCholesky> {
        let (n, kd) = (self.n, self.kd);
        let w = kd + 1;
        let mut l = self.data.clone();
        for j in 0..n {
            let lo = j.saturating_sub(kd);
            let mut d = l[j * w + kd];
            for k in lo..j {
                let v = l[j * w + kd - (j - k)];
                d -= v * v;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j, value: d });
            }
            let d = d.sqrt();
            l[j * w + kd] = d;
            for i in (j + 1)..n.min(j + kd + 1) {
                let lo_i = i.saturating_sub(kd);
                let mut s = l[i * w + kd - (i - j)];
                for k in lo_i.max(lo)..j {
                    s -= l[i * w + kd - (i - k)] * l[j * w + kd - (j - k)];
                }
                l[i * w + kd - (i - j)] = s / d;
            }
        }
        Ok(BandCholesky { n, kd, l })
    }
}

/// Lower band Cholesky factor, same storage layout as [`SymBand`].
#[derive(Debug, Clone, PartialEq)]
pub struct BandCholesky {
    n: usize,
    kd: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    /// Solves `L Lᵀ x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, kd) = (self.n, self.kd);
        let w = kd + 1;
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(kd);
            let mut s = x[i];
            for k in lo..i {
                s -= self.l[i * w + kd - (i - k)] * x[k];
            }
            x[i] = s / self.l[i * w + kd];
        }
        for i in (0..n).rev() {
            let x_i = x[i] / self.l[i * w + kd];
            x[i] = x_i;
            let lo = i.saturating_sub(kd);
            for k in lo..i {
                x[k] -= self.l[i * w + kd - (i - k)] * x_i;
            }
        }
        x
    }

    /// Diagonal of `L`.
    pub fn diagonal(&self) -> Vec<f64> {
        let w = self.kd + 1;
        (0..self.n).map(|i| self.l[i * w + self.kd]).collect()
    }
}
