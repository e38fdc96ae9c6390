//! Dense LU factorization with partial pivoting, over real or complex scalars.
//!
//! One elimination routine serves both the real DC/transient systems and the
//! complex AC systems; the scalar field is a type parameter. Storage is dense:
//! the circuits this crate targets are desk-scale (a few hundred unknowns at
//! most), and sparse structures are left as future work.

use std::fmt;
use std::ops::{Add, Div, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

/// Pivot magnitudes below `PIVOT_RELTOL * max|a_ij|` are treated as zero.
/// The relative threshold distinguishes structural singularity from scaling;
/// the absolute floor keeps all-tiny matrices from passing.
const PIVOT_RELTOL: f64 = 1e-13;
const PIVOT_FLOOR: f64 = 1e-300;

/// Scalar field a matrix can be built over: `f64` or `Complex64`.
pub trait Scalar:
    Copy
    + PartialEq
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    /// Magnitude used for pivot selection and norms.
    fn modulus(self) -> f64;
    fn from_f64(x: f64) -> Self;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn from_f64(x: f64) -> Self {
        x
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    /// The pivot in the given column (1-based, for diagnostics) fell below
    /// the singularity threshold.
    #[error("matrix is singular at column {column}")]
    Singular { column: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Square dense matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<S: Scalar> {
    n: usize,
    data: Vec<S>,
}

impl<S: Scalar> DenseMatrix<S> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![S::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "row {i} has wrong length");
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Adds `v` to the entry at `(row, col)`; the natural operation for
    /// element stamping.
    pub fn add(&mut self, row: usize, col: usize, v: S) {
        let n = self.n;
        self.data[row * n + col] = self.data[row * n + col] + v;
    }

    /// Max-norm of all entries.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.modulus()).fold(0.0, f64::max)
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, x: &[S]) -> Vec<S> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![S::zero(); self.n];
        for i in 0..self.n {
            let mut acc = S::zero();
            for j in 0..self.n {
                acc = acc + self[(i, j)] * x[j];
            }
            y[i] = acc;
        }
        y
    }
}

impl<S: Scalar> Index<(usize, usize)> for DenseMatrix<S> {
    type Output = S;
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.n + j]
    }
}

impl<S: Scalar> IndexMut<(usize, usize)> for DenseMatrix<S> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.n + j]
    }
}

/// LU factors in combined L\U storage with a row permutation.
///
/// `perm[i]` is the original row now sitting at position `i`, so that
/// `(P·A)[i][j] = A[perm[i]][j] = (L·U)[i][j]`. A value is immutable after
/// creation and may be shared across solves.
#[derive(Debug, Clone)]
pub struct LuFactors<S: Scalar> {
    lu: DenseMatrix<S>,
    perm: Vec<usize>,
}

/// Factor a square matrix with partial (row) pivoting by maximum modulus.
pub fn lu_factor<S: Scalar>(a: &DenseMatrix<S>) -> Result<LuFactors<S>, LinalgError> {
    let n = a.dim();
    let threshold = PIVOT_RELTOL * a.max_abs().max(PIVOT_FLOOR);
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();

    for k in 0..n {
        let mut pivot_row = k;
        let mut pivot_mag = lu[(k, k)].modulus();
        for i in k + 1..n {
            let mag = lu[(i, k)].modulus();
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = i;
            }
        }
        if pivot_mag < threshold {
            return Err(LinalgError::Singular { column: k + 1 });
        }
        if pivot_row != k {
            for j in 0..n {
                let t = lu[(k, j)];
                lu[(k, j)] = lu[(pivot_row, j)];
                lu[(pivot_row, j)] = t;
            }
            perm.swap(k, pivot_row);
        }
        let pivot = lu[(k, k)];
        for i in k + 1..n {
            let m = lu[(i, k)] / pivot;
            lu[(i, k)] = m;
            for j in k + 1..n {
                let v = lu[(k, j)];
                lu[(i, j)] = lu[(i, j)] - m * v;
            }
        }
    }
    Ok(LuFactors { lu, perm })
}

impl<S: Scalar> LuFactors<S> {
    pub fn dim(&self) -> usize {
        self.lu.dim()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Solve `A x = b` by forward/back substitution.
    pub fn solve(&self, b: &[S]) -> Result<Vec<S>, LinalgError> {
        let n = self.lu.dim();
        if b.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                got: b.len(),
            });
        }
        // Ly = Pb
        let mut y = vec![S::zero(); n];
        for i in 0..n {
            let mut acc = b[self.perm[i]];
            for (j, &yj) in y.iter().enumerate().take(i) {
                acc = acc - self.lu[(i, j)] * yj;
            }
            y[i] = acc;
        }
        // Ux = y
        let mut x = vec![S::zero(); n];
        for i in (0..n).rev() {
            let mut acc = y[i];
            for (j, &xj) in x.iter().enumerate().skip(i + 1) {
                acc = acc - self.lu[(i, j)] * xj;
            }
            x[i] = acc / self.lu[(i, i)];
        }
        Ok(x)
    }

    /// The pivots (diagonal of U).
    pub fn u_diag(&self) -> Vec<S> {
        (0..self.lu.dim()).map(|i| self.lu[(i, i)]).collect()
    }

    /// Reconstruct `P·A` as `L·U`; used by tests to verify the factorization.
    pub fn reconstruct(&self) -> DenseMatrix<S> {
        let n = self.lu.dim();
        let mut pa = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = S::zero();
                let kmax = i.min(j);
                for k in 0..=kmax {
                    let l = if k == i { S::one() } else { self.lu[(i, k)] };
                    if k <= j {
                        acc = acc + l * self.lu[(k, j)];
                    }
                }
                // entries of L below the diagonal, U on/above
                pa[(i, j)] = acc;
            }
        }
        pa
    }
}

/// Convenience: factor and solve in one call.
pub fn lu_solve<S: Scalar>(a: &DenseMatrix<S>, b: &[S]) -> Result<Vec<S>, LinalgError> {
    lu_factor(a)?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identity_factors_trivially() {
        let a = DenseMatrix::<f64>::identity(3);
        let f = lu_factor(&a).unwrap();
        assert_eq!(f.permutation(), &[0, 1, 2]);
        let x = f.solve(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn rank_deficient_reports_failing_column() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        match lu_factor(&a) {
            Err(LinalgError::Singular { column }) => assert_eq!(column, 2),
            other => panic!("expected singular at column 2, got {other:?}"),
        }
    }

    #[test]
    fn random_8x8_reconstructs_pa() {
        let mut rng = StdRng::seed_from_u64(7);
        let n = 8;
        let mut a = DenseMatrix::<f64>::zeros(n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = rng.gen_range(-1.0..1.0);
            }
            // diagonal dominance keeps the sample well-conditioned
            a[(i, i)] += 4.0;
        }
        let f = lu_factor(&a).unwrap();
        let pa = f.reconstruct();
        let norm_a = a.max_abs();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let diff = (pa[(i, j)] - a[(f.permutation()[i], j)]).abs();
                worst = worst.max(diff);
            }
        }
        assert!(worst <= 1e-12 * norm_a, "‖PA−LU‖∞ = {worst:e}");
    }

    #[test]
    fn diagonal_solve() {
        let a = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 4.0]]);
        let x = lu_solve(&a, &[2.0, 4.0]).unwrap();
        assert_eq!(x, vec![1.0, 1.0]);
    }

    #[test]
    fn recovers_known_solution() {
        let mut rng = StdRng::seed_from_u64(11);
        let n = 6;
        let mut a = DenseMatrix::<f64>::zeros(n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = rng.gen_range(-1.0..1.0);
            }
            a[(i, i)] += 3.0;
        }
        let x_true: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let b = a.mul_vec(&x_true);
        let x = lu_solve(&a, &b).unwrap();
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi - ti).abs() <= 1e-10 * ti.abs().max(1.0));
        }
    }

    #[test]
    fn complex_scalar_division() {
        // (1+j)·x = 2  →  x = 1−j
        let a = DenseMatrix::from_rows(&[vec![Complex64::new(1.0, 1.0)]]);
        let x = lu_solve(&a, &[Complex64::new(2.0, 0.0)]).unwrap();
        assert!((x[0] - Complex64::new(1.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn permutation_is_a_bijection() {
        let a = DenseMatrix::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 2.0],
            vec![3.0, 0.0, 0.0],
        ]);
        let f = lu_factor(&a).unwrap();
        let mut seen = [false; 3];
        for &p in f.permutation() {
            assert!(!seen[p]);
            seen[p] = true;
        }
    }

    #[test]
    fn solving_column_k_gives_unit_vector() {
        let a = DenseMatrix::from_rows(&[
            vec![4.0, 1.0, -1.0],
            vec![2.0, 5.0, 0.5],
            vec![-1.0, 0.3, 6.0],
        ]);
        let f = lu_factor(&a).unwrap();
        for k in 0..3 {
            let b: Vec<f64> = (0..3).map(|i| a[(i, k)]).collect();
            let x = f.solve(&b).unwrap();
            for (i, xi) in x.iter().enumerate() {
                let expect = if i == k { 1.0 } else { 0.0 };
                assert!((xi - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn real_and_complex_paths_agree_on_real_data() {
        let ar = DenseMatrix::from_rows(&[vec![3.0, 1.0], vec![1.0, 2.0]]);
        let ac = DenseMatrix::from_rows(&[
            vec![Complex64::new(3.0, 0.0), Complex64::new(1.0, 0.0)],
            vec![Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)],
        ]);
        let xr = lu_solve(&ar, &[1.0, -1.0]).unwrap();
        let xc = lu_solve(&ac, &[Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]).unwrap();
        for (r, c) in xr.iter().zip(&xc) {
            assert!((r - c.re).abs() < 1e-15);
            assert_eq!(c.im, 0.0);
        }
    }
}
