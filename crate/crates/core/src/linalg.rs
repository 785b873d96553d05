//! Dense least squares via Householder QR.
//!
//! Designs here are tall and skinny (hundreds to thousands of rows, at most a
//! handful of columns), so a straightforward column-major QR is adequate.

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Self {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        assert!(columns.iter().all(|c| c.len() == rows), "ragged columns");
        Self {
            rows,
            cols,
            data: columns.concat(),
        }
    }

    /// Prepends a column of ones.
    pub fn with_intercept(columns: &[Vec<f64>], rows: usize) -> Self {
        let mut all = Vec::with_capacity(columns.len() + 1);
        all.push(vec![1.0; rows]);
        all.extend(columns.iter().cloned());
        Self::from_columns(&all)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    fn column_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.rows + i] = v;
    }

    pub fn mul_vec(&self, b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        for (j, &bj) in b.iter().enumerate() {
            for (o, x) in out.iter_mut().zip(self.column(j)) {
                *o += x * bj;
            }
        }
        out
    }
}

/// Index of the first column found to be linearly dependent on its predecessors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankDeficiency {
    pub column: usize,
}

#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Upper-triangular factor, row-major p x p.
    r: Vec<f64>,
}

const RANK_TOL: f64 = 1e-10;

/// Solves min ||y - X b|| by Householder QR without pivoting.
pub fn least_squares(x: &Matrix, y: &[f64]) -> Result<LeastSquares, RankDeficiency> {
    let (n, p) = (x.rows, x.cols);
    assert_eq!(y.len(), n, "response length must match design rows");
    if n < p {
        return Err(RankDeficiency { column: n });
    }
    let norms: Vec<f64> = (0..p)
        .map(|j| x.column(j).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();

    let mut a = x.clone();
    let mut qty = y.to_vec();
    for j in 0..p {
        let col = &a.column(j)[j..];
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= RANK_TOL * norms[j] || norms[j] == 0.0 {
            return Err(RankDeficiency { column: j });
        }
        let alpha = if col[0] > 0.0 { -norm } else { norm };
        let mut v = col.to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let reflect = |target: &mut [f64]| {
            let dot: f64 = v.iter().zip(target.iter()).map(|(a, b)| a * b).sum();
            let s = 2.0 * dot / vnorm2;
            for (t, vi) in target.iter_mut().zip(&v) {
                *t -= s * vi;
            }
        };
        for k in j..p {
            reflect(&mut a.column_mut(k)[j..]);
        }
        reflect(&mut qty[j..]);
        if a.get(j, j).abs() <= RANK_TOL * norms[j] {
            return Err(RankDeficiency { column: j });
        }
    }

    let mut r = vec![0.0; p * p];
    for i in 0..p {
        for k in i..p {
            r[i * p + k] = a.get(i, k);
        }
    }
    let mut b = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = qty[i];
        for k in i + 1..p {
            s -= r[i * p + k] * b[k];
        }
        b[i] = s / r[i * p + i];
    }
    let fitted = x.mul_vec(&b);
    let residuals = y.iter().zip(&fitted).map(|(yi, fi)| yi - fi).collect();
    Ok(LeastSquares {
        coefficients: b,
        residuals,
        r,
    })
}

impl LeastSquares {
    /// (X'X)^{-1} = R^{-1} R^{-T}, row-major p x p.
    pub fn xtx_inverse(&self) -> Vec<f64> {
        let p = self.coefficients.len();
        // R^{-1} by back substitution, column by column.
        let mut rinv = vec![0.0; p * p];
        for c in 0..p {
            for i in (0..=c).rev() {
                let mut s = if i == c { 1.0 } else { 0.0 };
                for k in i + 1..=c {
                    s -= self.r[i * p + k] * rinv[k * p + c];
                }
                rinv[i * p + c] = s / self.r[i * p + i];
            }
        }
        let mut out = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..p {
                out[i * p + j] = (0..p).map(|k| rinv[i * p + k] * rinv[j * p + k]).sum();
            }
        }
        out
    }
}
