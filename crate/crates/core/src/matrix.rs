use num_complex::Complex64;

use crate::{Error, Result};

/// Dense `n x n` complex Hermitian matrix, stored row-major.
///
/// Every constructor enforces `h[j][k] == conj(h[k][j])` and a real diagonal,
/// so the invariant holds bit-exactly for all instances.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl HermitianMatrix {
    /// Build from a closure evaluated on the upper triangle (`j <= k`).
    /// Diagonal values keep only their real part; the lower triangle is mirrored.
    pub fn from_upper_fn<F>(n: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Complex64,
    {
        if n == 0 {
            return Err(Error::Domain("matrix dimension must be positive".into()));
        }
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            let d = f(j, j);
            data[j * n + j] = Complex64::new(d.re, 0.0);
            for k in j + 1..n {
                let v = f(j, k);
                data[j * n + k] = v;
                data[k * n + j] = v.conj();
            }
        }
        Ok(Self { n, data })
    }

    /// Wrap a row-major buffer, rejecting anything that is not exactly Hermitian.
    pub fn from_dense(n: usize, data: Vec<Complex64>) -> Result<Self> {
        if n == 0 || data.len() != n * n {
            return Err(Error::Domain(format!("expected {n}x{n} = {} entries, got {}", n * n, data.len())));
        }
        for j in 0..n {
            if data[j * n + j].im != 0.0 {
                return Err(Error::Domain(format!("diagonal entry {j} is not real")));
            }
            for k in j + 1..n {
                if data[j * n + k] != data[k * n + j].conj() {
                    return Err(Error::Domain(format!("entries ({j},{k}) and ({k},{j}) are not conjugate")));
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        Self::from_upper_fn(
            diag.len(),
            |j, k| {
                if j == k {
                    Complex64::new(diag[j], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            },
        )
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::from_upper_fn(n, |_, _| Complex64::new(0.0, 0.0))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> Complex64 {
        self.data[j * self.n + k]
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|j| self.data[j * self.n + j].re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn diagonal(&self, j: usize) -> f64 {
        self.data[j * self.n + j].re
    }

    /// Row `j` with its diagonal entry removed (length `n - 1`).
    pub fn row_without_diagonal(&self, j: usize) -> Vec<Complex64> {
        (0..self.n).filter(|&k| k != j).map(|k| self.get(j, k)).collect()
    }

    /// Delete row and column `j` (0-based). No rescaling is applied.
    pub fn minor(&self, j: usize) -> Result<Self> {
        if self.n < 2 {
            return Err(Error::Domain("a minor needs n >= 2".into()));
        }
        if j >= self.n {
            return Err(Error::Domain(format!("row index {j} out of range for n = {}", self.n)));
        }
        let keep: Vec<usize> = (0..self.n).filter(|&k| k != j).collect();
        let m = self.n - 1;
        let mut data = Vec::with_capacity(m * m);
        for &r in &keep {
            for &c in &keep {
                data.push(self.get(r, c));
            }
        }
        Ok(Self { n: m, data })
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n, "vector length must match matrix dimension");
        self.data.chunks_exact(self.n).map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }
}
