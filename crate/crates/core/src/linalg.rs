//! Small dense complex linear algebra: just what the Monte Carlo estimators
//! need (Hermitian Gram products, Cholesky, log-determinants, solves).

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::new(T::zero(), T::zero()); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must equal rows * cols");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[Complex<T>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn conj_transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn mul_vec(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + *a * *b)
            })
            .collect()
    }

    /// `self^H v`.
    pub fn conj_transpose_mul_vec(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![Complex::new(T::zero(), T::zero()); self.cols];
        for (i, vi) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conj() * *vi;
            }
        }
        out
    }

    /// `self * self^H` plus the identity.
    pub fn identity_plus_gram_rows(&self) -> Self {
        let n = self.rows;
        let mut m = Self::identity(n);
        for i in 0..n {
            for j in i..n {
                let s = self
                    .row(i)
                    .iter()
                    .zip(self.row(j))
                    .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + *a * b.conj());
                m[(i, j)] += s;
                if j != i {
                    m[(j, i)] = m[(i, j)].conj();
                }
            }
        }
        m
    }
}

impl<T> std::ops::Index<(usize, usize)> for CMatrix<T> {
    type Output = Complex<T>;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for CMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.cols + j]
    }
}

/// `X^H diag(weights) X` for a `K x L` matrix `X`, returned as `L x L`.
///
/// Only the upper triangle is accumulated; the lower one is mirrored.
pub fn weighted_gram<T: Real>(x: &CMatrix<T>, weights: &[T]) -> CMatrix<T> {
    assert_eq!(weights.len(), x.rows());
    let l = x.cols();
    let mut re = vec![T::zero(); l * l];
    let mut im = vec![T::zero(); l * l];
    for (k, &w) in weights.iter().enumerate() {
        if w == T::zero() {
            continue;
        }
        let row = x.row(k);
        for i in 0..l {
            let a = row[i].conj() * w;
            let base = i * l;
            for j in i..l {
                let b = row[j];
                re[base + j] += a.re * b.re - a.im * b.im;
                im[base + j] += a.re * b.im + a.im * b.re;
            }
        }
    }
    let mut g = CMatrix::zeros(l, l);
    for i in 0..l {
        for j in i..l {
            let z = Complex::new(re[i * l + j], im[i * l + j]);
            g[(i, j)] = z;
            g[(j, i)] = z.conj();
        }
    }
    g
}

/// In-place Cholesky factorization `A = C C^H` of a Hermitian positive
/// definite matrix. On success the lower triangle holds `C`; the strict
/// upper triangle is left untouched.
pub fn cholesky_in_place<T: Real>(a: &mut CMatrix<T>) -> Result<()> {
    let n = a.rows();
    assert_eq!(n, a.cols(), "Cholesky needs a square matrix");
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= a[(j, k)].norm_sqr();
        }
        if !(d > T::zero()) {
            return Err(Error::Numerical(format!(
                "matrix not positive definite at pivot {j}"
            )));
        }
        let djj = d.sqrt();
        a[(j, j)] = Complex::new(djj, T::zero());
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= a[(i, k)] * a[(j, k)].conj();
            }
            a[(i, j)] = s / djj;
        }
    }
    Ok(())
}

/// Natural log-determinant of a Hermitian positive definite matrix.
pub fn ln_det_hpd<T: Real>(mut a: CMatrix<T>) -> Result<T> {
    cholesky_in_place(&mut a)?;
    let two = T::lit(2.0);
    Ok((0..a.rows()).map(|i| two * a[(i, i)].re.ln()).sum())
}

/// Solves `A x = b` for Hermitian positive definite `A`.
pub fn solve_hpd<T: Real>(a: &CMatrix<T>, b: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    let n = a.rows();
    assert_eq!(b.len(), n);
    let mut c = a.clone();
    cholesky_in_place(&mut c)?;
    // forward: C y = b
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= c[(i, k)] * y[k];
        }
        y[i] = s / c[(i, i)].re;
    }
    // backward: C^H x = y
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= c[(k, i)].conj() * y[k];
        }
        y[i] = s / c[(i, i)].re;
    }
    Ok(y)
}

pub fn norm<T: Real>(v: &[Complex<T>]) -> T {
    v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
}

/// `a^H b`.
pub fn inner<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter()
        .zip(b)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * *y)
}

pub fn normalize<T: Real>(v: &mut [Complex<T>]) -> Result<()> {
    let n = norm(v);
    if !(n > T::zero()) || !n.is_finite() {
        return Err(Error::Numerical("cannot normalize a zero vector".into()));
    }
    for z in v.iter_mut() {
        *z /= n;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{fill_complex_normal, stream, Domain};

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn ln_det_of_two_by_two() {
        // [[2, i], [-i, 3]] has determinant 6 - 1 = 5
        let a = CMatrix::from_vec(2, 2, vec![c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(3.0, 0.0)]);
        assert!((ln_det_hpd(a).unwrap() - 5f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn rejects_indefinite() {
        let a = CMatrix::from_vec(2, 2, vec![c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)]);
        assert!(ln_det_hpd(a).is_err());
    }

    #[test]
    fn weighted_gram_matches_naive_product() {
        let (k, l) = (7, 4);
        let mut data = vec![c(0.0, 0.0); k * l];
        fill_complex_normal(&mut stream(3, Domain::Signal, 0), &mut data);
        let x = CMatrix::from_vec(k, l, data);
        let w: Vec<f64> = (0..k).map(|i| 0.1 + i as f64).collect();
        let g = weighted_gram(&x, &w);
        for i in 0..l {
            for j in 0..l {
                let naive: Complex<f64> = (0..k).map(|r| x[(r, i)].conj() * w[r] * x[(r, j)]).sum();
                assert!((g[(i, j)] - naive).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn solve_recovers_rhs() {
        let (n, m) = (5, 9);
        let mut data = vec![c(0.0, 0.0); n * m];
        fill_complex_normal(&mut stream(4, Domain::Signal, 0), &mut data);
        let s = CMatrix::from_vec(n, m, data);
        let a = s.identity_plus_gram_rows();
        let b: Vec<_> = (0..n).map(|i| c(i as f64, 1.0 - i as f64)).collect();
        let x = solve_hpd(&a, &b).unwrap();
        let back = a.mul_vec(&x);
        for (u, v) in back.iter().zip(&b) {
            assert!((u - v).norm() < 1e-10);
        }
    }
}
