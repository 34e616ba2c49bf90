use crate::error::{Error, Result};
use crate::solver::Preconditioner;
use crate::sparse::{CsrMatrix, Tridiagonal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepOrder {
    Forward,
    Backward,
}

/// Block Gauss–Seidel over consecutive blocks of `line_len` unknowns.
///
/// With the line-major numbering of cylinder meshes a block is one vertical
/// line and its diagonal block is tridiagonal; `line_len = 1` gives point
/// Gauss–Seidel.
#[derive(Debug, Clone)]
pub struct LineSmoother {
    line_len: usize,
    blocks: Vec<Tridiagonal>,
}

impl LineSmoother {
    pub fn new(a: &CsrMatrix, line_len: usize) -> Result<Self> {
        let n = a.nrows();
        if line_len == 0 || n % line_len != 0 {
            return Err(Error::InvalidArgument(format!(
                "{n} unknowns cannot be split into lines of length {line_len}"
            )));
        }
        let lines = n / line_len;
        let mut blocks = Vec::with_capacity(lines);
        for l in 0..lines {
            let lo = l * line_len;
            let mut diag = vec![0.0; line_len];
            let mut sub = vec![0.0; line_len.saturating_sub(1)];
            for k in 0..line_len {
                let (cols, vals) = a.row(lo + k);
                for (&j, &v) in cols.iter().zip(vals) {
                    if j < lo || j >= lo + line_len {
                        continue;
                    }
                    let kk = j - lo;
                    if kk == k {
                        diag[k] = v;
                    } else if kk + 1 == k {
                        sub[kk] = v;
                    } else if kk != k + 1 && v != 0.0 {
                        return Err(Error::SingularBlock(format!(
                            "line {l} block is not tridiagonal (entry {k},{kk})"
                        )));
                    }
                }
            }
            let t = Tridiagonal::factor(&diag, &sub).map_err(|e| Error::SingularBlock(format!("line {l}: {e}")))?;
            blocks.push(t);
        }
        Ok(Self { line_len, blocks })
    }

    pub fn line_len(&self) -> usize {
        self.line_len
    }

    pub fn num_lines(&self) -> usize {
        self.blocks.len()
    }

    /// One Gauss–Seidel pass over all lines in the given order.
    pub fn sweep(&self, a: &CsrMatrix, x: &mut [f64], b: &[f64], order: SweepOrder) {
        let mut rhs = vec![0.0; self.line_len];
        let lines = self.blocks.len();
        for step in 0..lines {
            let l = match order {
                SweepOrder::Forward => step,
                SweepOrder::Backward => lines - 1 - step,
            };
            self.relax_line(a, x, b, l, &mut rhs);
        }
    }

    fn relax_line(&self, a: &CsrMatrix, x: &mut [f64], b: &[f64], l: usize, rhs: &mut [f64]) {
        let lo = l * self.line_len;
        let hi = lo + self.line_len;
        for (k, r) in rhs.iter_mut().enumerate() {
            let (cols, vals) = a.row(lo + k);
            let mut acc = b[lo + k];
            for (&j, &v) in cols.iter().zip(vals) {
                if j < lo || j >= hi {
                    acc -= v * x[j];
                }
            }
            *r = acc;
        }
        self.blocks[l].solve_in_place(rhs);
        x[lo..hi].copy_from_slice(rhs);
    }
}

/// Symmetric line Gauss–Seidel (forward then backward sweep from zero) as a
/// preconditioner.
pub struct SymmetricLineGs<'a> {
    pub matrix: &'a CsrMatrix,
    pub smoother: &'a LineSmoother,
}

impl Preconditioner for SymmetricLineGs<'_> {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.iter_mut().for_each(|v| *v = 0.0);
        self.smoother.sweep(self.matrix, z, r, SweepOrder::Forward);
        self.smoother.sweep(self.matrix, z, r, SweepOrder::Backward);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_2d(nx: usize, ny: usize) -> CsrMatrix {
        // ny unknowns per line, lines indexed by x
        let idx = |i: usize, j: usize| i * ny + j;
        let mut t = Vec::new();
        for i in 0..nx {
            for j in 0..ny {
                t.push((idx(i, j), idx(i, j), 4.0));
                if i > 0 {
                    t.push((idx(i, j), idx(i - 1, j), -1.0));
                }
                if i + 1 < nx {
                    t.push((idx(i, j), idx(i + 1, j), -1.0));
                }
                if j > 0 {
                    t.push((idx(i, j), idx(i, j - 1), -1.0));
                }
                if j + 1 < ny {
                    t.push((idx(i, j), idx(i, j + 1), -1.0));
                }
            }
        }
        CsrMatrix::from_triplets(nx * ny, nx * ny, t)
    }

    #[test]
    fn exact_solution_is_fixed_point() {
        let a = laplace_2d(4, 5);
        let x_star: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let b = a.mul_vec(&x_star);
        let sm = LineSmoother::new(&a, 5).unwrap();
        let mut x = x_star.clone();
        sm.sweep(&a, &mut x, &b, SweepOrder::Forward);
        for (u, v) in x.iter().zip(&x_star) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn single_line_is_solved_exactly() {
        let a = laplace_2d(1, 7);
        let b = vec![1.0; 7];
        let sm = LineSmoother::new(&a, 7).unwrap();
        let mut x = vec![0.0; 7];
        sm.sweep(&a, &mut x, &b, SweepOrder::Forward);
        let r = crate::solver::residual(&a, &x, &b);
        assert!(crate::solver::norm2(&r) < 1e-14);
    }

    #[test]
    fn rejects_non_tridiagonal_blocks() {
        let a = CsrMatrix::from_triplets(3, 3, [(0, 0, 2.0), (0, 2, 0.1), (1, 1, 2.0), (2, 0, 0.1), (2, 2, 2.0)]);
        assert!(matches!(LineSmoother::new(&a, 3), Err(Error::SingularBlock(_))));
        assert!(LineSmoother::new(&a, 2).is_err());
    }
}
