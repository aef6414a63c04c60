//! Small dense complex matrices, row-major.
//!
//! Sized and shaped for per-subchannel detection algebra: `N_R x N_T` channel
//! slices and `N_T x N_T` Hermitian systems with `N_T ≤ 64`. Everything is
//! exact dense arithmetic; the only factorization is an unpivoted Cholesky,
//! which is the right tool because the matrices that reach it are Hermitian
//! positive definite by construction (`H^H H + diag(α)` with `α > 0`).

use num_complex::Complex64;

use super::check_finite;
use crate::{Error, Result};

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Builds from nested rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::EmptyInput { context: "matrix rows" });
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    context: format!("ragged rows: {} vs {}", row.len(), cols),
                });
            }
            data.extend_from_slice(row);
        }
        let m = Self { rows: rows.len(), cols, data };
        check_finite(&m.data)?;
        Ok(m)
    }

    /// Builds from a row-major slice.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: format!("{}x{} matrix needs {} entries, got {}", rows, cols, rows * cols, data.len()),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// Conjugate transpose.
    pub fn hermitian_transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.at(r, c).conj();
            }
        }
        out
    }

    /// Matrix product `self * rhs`.
    pub fn mul(&self, rhs: &Mat) -> Result<Mat> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                context: format!("{}x{} * {}x{}", self.rows, self.cols, rhs.rows, rhs.cols),
            });
        }
        let mut out = Mat::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            let lhs_row = self.row(r);
            let out_row = &mut out.data[r * rhs.cols..(r + 1) * rhs.cols];
            for (k, &l) in lhs_row.iter().enumerate() {
                if l.re == 0.0 && l.im == 0.0 {
                    continue;
                }
                let rhs_row = rhs.row(k);
                for (o, &x) in out_row.iter_mut().zip(rhs_row) {
                    *o += l * x;
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if self.cols != v.len() {
            return Err(Error::DimensionMismatch {
                context: format!("{}x{} * vec{}", self.rows, self.cols, v.len()),
            });
        }
        Ok((0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(v)
                    .fold(Complex64::new(0.0, 0.0), |acc, (&a, &b)| acc + a * b)
            })
            .collect())
    }

    /// Returns `self + diag(d)`; `self` must be square with `d.len()` rows.
    pub fn add_diag(&self, d: &[f64]) -> Result<Mat> {
        if self.rows != self.cols || self.rows != d.len() {
            return Err(Error::DimensionMismatch {
                context: format!("add_diag on {}x{} with {} entries", self.rows, self.cols, d.len()),
            });
        }
        let mut out = self.clone();
        for (i, &x) in d.iter().enumerate() {
            let v = out.at(i, i) + Complex64::new(x, 0.0);
            out.set(i, i, v);
        }
        Ok(out)
    }

    /// Gram matrix `self^H * self`, exploiting Hermitian symmetry of the
    /// result (computes the upper triangle, mirrors the rest).
    pub fn gram(&self) -> Mat {
        gram_of_rows(self.cols, (0..self.rows).map(|r| self.row(r)))
    }

    /// Largest entry-wise absolute difference to `other` (must be same shape).
    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Exact inverse of a Hermitian positive-definite matrix via Cholesky:
    /// `A = L L^H`, `A⁻¹ = L⁻ᴴ L⁻¹`.
    ///
    /// The factorization reads the full matrix and first checks that it is
    /// numerically Hermitian; a non-positive pivot reports which row broke,
    /// which callers translate into their own context (e.g. the subchannel
    /// whose system matrix was singular).
    pub fn invert_hermitian(&self) -> Result<Mat> {
        let n = self.rows;
        if n != self.cols {
            return Err(Error::DimensionMismatch {
                context: format!("invert_hermitian on {}x{}", self.rows, self.cols),
            });
        }
        check_finite(&self.data)?;
        // Cheap guard: the algorithm silently assumes A == A^H, so a grossly
        // non-Hermitian input is a caller bug worth rejecting loudly.
        let mut asym: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for r in 0..n {
            for c in r..n {
                asym = asym.max((self.at(r, c) - self.at(c, r).conj()).norm());
                scale = scale.max(self.at(r, c).norm());
            }
        }
        if asym > 1e-8 * scale.max(1e-300) {
            return Err(Error::NotHermitian { max_asymmetry: asym });
        }

        // L is lower triangular, row-major in `l`.
        let mut l = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            let mut diag = self.at(j, j).re;
            for k in 0..j {
                diag -= l[j * n + k].norm_sqr();
            }
            if !(diag.is_finite() && diag > 0.0) {
                return Err(Error::NotPositiveDefinite { pivot: j });
            }
            let ljj = diag.sqrt();
            l[j * n + j] = Complex64::new(ljj, 0.0);
            for i in (j + 1)..n {
                let mut v = self.at(i, j);
                for k in 0..j {
                    v -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = v / ljj;
            }
        }

        // Forward-substitute L X = I to get X = L⁻¹ (lower triangular).
        let mut linv = vec![Complex64::new(0.0, 0.0); n * n];
        for col in 0..n {
            for i in col..n {
                let mut v = if i == col {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                for k in col..i {
                    v -= l[i * n + k] * linv[k * n + col];
                }
                linv[i * n + col] = v / l[i * n + i].re;
            }
        }

        // A⁻¹ = L⁻ᴴ L⁻¹; the result is Hermitian, fill both triangles.
        let mut out = Mat::zeros(n, n);
        for r in 0..n {
            for c in r..n {
                let mut acc = Complex64::new(0.0, 0.0);
                // (L⁻ᴴ)_{r,k} = conj(L⁻¹_{k,r}); L⁻¹ is lower triangular so k ≥ max(r, c).
                for k in c.max(r)..n {
                    acc += linv[k * n + r].conj() * linv[k * n + c];
                }
                out.set(r, c, acc);
                if r != c {
                    out.set(c, r, acc.conj());
                }
            }
        }
        Ok(out)
    }
}

/// Gram accumulation `Σ_i row_i^H row_i` over an iterator of equal-length
/// rows. Shared by [`Mat::gram`] and the incremental antenna-prefix paths.
pub(crate) fn gram_of_rows<'a>(cols: usize, rows: impl Iterator<Item = &'a [Complex64]>) -> Mat {
    let mut g = Mat::zeros(cols, cols);
    accumulate_gram(&mut g, rows);
    g
}

/// Adds `Σ_i row_i^H row_i` into an existing Hermitian accumulator.
pub(crate) fn accumulate_gram<'a>(g: &mut Mat, rows: impl Iterator<Item = &'a [Complex64]>) {
    let n = g.cols();
    for row in rows {
        debug_assert_eq!(row.len(), n);
        for a in 0..n {
            let ca = row[a].conj();
            let out_row = &mut g.data[a * n..(a + 1) * n];
            for b in a..n {
                out_row[b] += ca * row[b];
            }
        }
    }
    // Mirror the strict upper triangle.
    for a in 0..n {
        for b in (a + 1)..n {
            let v = g.data[a * n + b].conj();
            g.data[b * n + a] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_mat(rows: usize, cols: usize, seed: u64) -> Mat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * cols)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        Mat::from_row_major(rows, cols, data).unwrap()
    }

    /// Random Hermitian positive-definite matrix `R^H R + I`.
    fn random_pd(n: usize, seed: u64) -> Mat {
        let r = random_mat(n, n, seed);
        r.gram().add_diag(&vec![1.0; n]).unwrap()
    }

    #[test]
    fn hermitian_transpose_small_example() {
        let m = Mat::from_rows(&[vec![c(1.0, 1.0), c(0.0, 0.0)], vec![c(2.0, 0.0), c(3.0, 0.0)]])
            .unwrap();
        let h = m.hermitian_transpose();
        assert_eq!(h.at(0, 0), c(1.0, -1.0));
        assert_eq!(h.at(0, 1), c(2.0, 0.0));
        assert_eq!(h.at(1, 0), c(0.0, 0.0));
        assert_eq!(h.at(1, 1), c(3.0, 0.0));
    }

    #[test]
    fn hermitian_transpose_is_involutive() {
        let m = random_mat(3, 5, 1);
        assert_eq!(m.hermitian_transpose().hermitian_transpose(), m);
    }

    #[test]
    fn product_transpose_identity() {
        let a = random_mat(3, 3, 2);
        let b = random_mat(3, 3, 3);
        let lhs = a.mul(&b).unwrap().hermitian_transpose();
        let rhs = b.hermitian_transpose().mul(&a.hermitian_transpose()).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn identity_inverts_to_identity() {
        let i = Mat::identity(5);
        assert!(i.invert_hermitian().unwrap().max_abs_diff(&i) < 1e-14);
    }

    #[test]
    fn diagonal_inverse() {
        let m = Mat::from_rows(&[vec![c(2.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(4.0, 0.0)]])
            .unwrap();
        let inv = m.invert_hermitian().unwrap();
        assert!((inv.at(0, 0) - c(0.5, 0.0)).norm() < 1e-15);
        assert!((inv.at(1, 1) - c(0.25, 0.0)).norm() < 1e-15);
        assert!(inv.at(0, 1).norm() < 1e-15);
    }

    #[test]
    fn random_pd_12x12_residual_below_1e10() {
        let a = random_pd(12, 4);
        let inv = a.invert_hermitian().unwrap();
        let residual = a.mul(&inv).unwrap().max_abs_diff(&Mat::identity(12));
        assert!(residual < 1e-10, "residual {residual:e}");
    }

    #[test]
    fn residual_stays_below_1e10_up_to_48() {
        for n in [4usize, 8, 16, 24, 32, 48] {
            let a = random_pd(n, 100 + n as u64);
            let inv = a.invert_hermitian().unwrap();
            let residual = a.mul(&inv).unwrap().max_abs_diff(&Mat::identity(n));
            assert!(residual < 1e-10, "n = {n}, residual {residual:e}");
        }
    }

    #[test]
    fn inverse_is_hermitian() {
        let a = random_pd(8, 5);
        let inv = a.invert_hermitian().unwrap();
        assert!(inv.max_abs_diff(&inv.hermitian_transpose()) < 1e-12);
    }

    #[test]
    fn indefinite_matrix_reports_pivot() {
        // diag(1, -1) fails at the second pivot.
        let m = Mat::from_rows(&[vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(-1.0, 0.0)]])
            .unwrap();
        match m.invert_hermitian() {
            Err(Error::NotPositiveDefinite { pivot }) => assert_eq!(pivot, 1),
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn non_hermitian_input_is_rejected() {
        let m = Mat::from_rows(&[vec![c(1.0, 0.0), c(1.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]])
            .unwrap();
        assert!(matches!(m.invert_hermitian(), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn gram_matches_explicit_product() {
        let h = random_mat(6, 4, 7);
        let explicit = h.hermitian_transpose().mul(&h).unwrap();
        assert!(h.gram().max_abs_diff(&explicit) < 1e-12);
    }

    #[test]
    fn gram_accumulation_over_row_prefixes_is_incremental() {
        let h = random_mat(6, 3, 8);
        let mut acc = Mat::zeros(3, 3);
        accumulate_gram(&mut acc, (0..4).map(|r| h.row(r)));
        let g4 = gram_of_rows(3, (0..4).map(|r| h.row(r)));
        assert!(acc.max_abs_diff(&g4) < 1e-14);
        accumulate_gram(&mut acc, (4..6).map(|r| h.row(r)));
        assert!(acc.max_abs_diff(&h.gram()) < 1e-12);
    }

    #[test]
    fn mul_vec_matches_mul() {
        let a = random_mat(4, 3, 9);
        let v: Vec<Complex64> = random_mat(3, 1, 10).as_slice().to_vec();
        let as_mat = a.mul(&Mat::from_row_major(3, 1, v.clone()).unwrap()).unwrap();
        let as_vec = a.mul_vec(&v).unwrap();
        for (i, x) in as_vec.iter().enumerate() {
            assert!((x - as_mat.at(i, 0)).norm() < 1e-13);
        }
    }
}
