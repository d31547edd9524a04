//! Thomas algorithm for tridiagonal systems.

/// Tridiagonal matrix stored by diagonals; `lower[0]` and `upper[len-1]` are unused.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(len: usize) -> Self {
        Self {
            lower: vec![0.0; len],
            diag: vec![0.0; len],
            upper: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// First row violating weak diagonal dominance, if any.
    pub fn dominance_violation(&self) -> Option<usize> {
        (0..self.len()).find(|&i| {
            let off = self.lower[i].abs() + self.upper[i].abs();
            self.diag[i].abs() < off
        })
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let last = self.len() - 1;
        (0..self.len())
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.lower[i] * x[i - 1];
                }
                if i < last {
                    s += self.upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Solves `A x = rhs` in place. Returns the failing row on a zero pivot.
    pub fn solve_in_place(&self, rhs: &mut [f64]) -> Result<(), usize> {
        let n = self.len();
        assert_eq!(rhs.len(), n);
        let mut c = vec![0.0; n];
        let mut pivot = self.diag[0];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(0);
        }
        c[0] = self.upper[0] / pivot;
        rhs[0] /= pivot;
        for i in 1..n {
            pivot = self.diag[i] - self.lower[i] * c[i - 1];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(i);
            }
            c[i] = self.upper[i] / pivot;
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) / pivot;
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= c[i] * rhs[i + 1];
        }
        Ok(())
    }
}
