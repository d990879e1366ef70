//! Minimal dense row-major f64 matrix used by the encoder and featurizer.
//!
//! Shapes here are tiny (tens of nodes, hidden widths ≤ a few hundred), so a
//! plain `Vec<f64>` with explicit loops is fast enough and keeps every
//! arithmetic step visible to the gradient checker.

/// Dense row-major matrix of f64.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds from a flat row-major buffer. Panics if the length disagrees.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer length != rows*cols");
        Mat { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `self · other`, (r×k)(k×c) → (r×c).
    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "inner dimensions disagree");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let out_row = out.row_mut(i);
                for (o, &b) in out_row.iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ · other`, (r×k)ᵀ(r×c) → (k×c).
    pub fn transpose_matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows, "row counts disagree");
        let mut out = Mat::zeros(self.cols, other.cols);
        for i in 0..self.rows {
            let srow = self.row(i);
            let orow = other.row(i);
            for (k, &a) in srow.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = out.row_mut(k);
                for (o, &b) in out_row.iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self · otherᵀ`, (r×k)(c×k)ᵀ → (r×c).
    pub fn matmul_transpose(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.cols, "column counts disagree");
        let mut out = Mat::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let srow = self.row(i);
            for j in 0..other.rows {
                let orow = other.row(j);
                let mut acc = 0.0;
                for (&a, &b) in srow.iter().zip(orow) {
                    acc += a * b;
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    pub fn add_row_vector(&mut self, bias: &[f64]) {
        assert_eq!(bias.len(), self.cols);
        for r in 0..self.rows {
            for (v, &b) in self.row_mut(r).iter_mut().zip(bias) {
                *v += b;
            }
        }
    }

    /// Column means; the mean-pooling step.
    pub fn column_means(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (o, &v) in out.iter_mut().zip(self.row(r)) {
                *o += v;
            }
        }
        let inv = 1.0 / self.rows as f64;
        for o in &mut out {
            *o *= inv;
        }
        out
    }

    pub fn map_in_place(&mut self, f: impl Fn(f64) -> f64) {
        for v in &mut self.data {
            *v = f(*v);
        }
    }
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small() {
        let a = Mat::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = Mat::from_vec(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let c = a.matmul(&b);
        assert_eq!(c.data(), &[58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn transpose_products_agree_with_explicit_transpose() {
        let a = Mat::from_vec(2, 3, vec![1.0, -2.0, 0.5, 3.0, 4.0, -1.0]);
        let b = Mat::from_vec(2, 2, vec![2.0, 1.0, 0.0, -3.0]);
        // aᵀ·b
        let atb = a.transpose_matmul(&b);
        let at = Mat::from_vec(3, 2, vec![1.0, 3.0, -2.0, 4.0, 0.5, -1.0]);
        assert_eq!(atb, at.matmul(&b));
        // b·aᵀ via matmul_transpose: b (2×2) ... use a (2×3): b·a = (2×3), b·aᵀ needs cols match
        let c = Mat::from_vec(2, 3, vec![1.0, 0.0, 2.0, -1.0, 1.0, 0.5]);
        let cat = c.matmul_transpose(&a);
        assert_eq!(cat.rows(), 2);
        assert_eq!(cat.cols(), 2);
        assert!((cat.get(0, 0) - (1.0 * 1.0 + 0.0 * -2.0 + 2.0 * 0.5)).abs() < 1e-15);
    }

    #[test]
    fn column_means_average_rows() {
        let m = Mat::from_vec(2, 2, vec![1.0, 3.0, 3.0, 5.0]);
        assert_eq!(m.column_means(), vec![2.0, 4.0]);
    }
}
