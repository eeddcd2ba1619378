//! Dense complex linear algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Dense complex matrix.
pub type CMat = DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVec = DVector<Complex64>;

/// Relative ridge added to a Hermitian system whose Cholesky factorization fails.
pub const RIDGE: f64 = 1e-10;
/// Smallest accepted squared ratio of Cholesky pivots before falling back.
pub const PIVOT_RATIO: f64 = 1e-12;

/// Column-stacking vectorization.
pub fn vec(m: &CMat) -> CVec {
    CVec::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`].
pub fn unvec(v: &CVec, rows: usize, cols: usize) -> Result<CMat> {
    if v.len() != rows * cols {
        return Err(Error::DimensionMismatch(format!(
            "cannot reshape a length-{} vector into {rows}x{cols}",
            v.len()
        )));
    }
    Ok(CMat::from_column_slice(rows, cols, v.as_slice()))
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// A ⊗ I_n without forming the identity.
pub fn kron_identity(a: &CMat, n: usize) -> CMat {
    let mut out = CMat::zeros(a.nrows() * n, a.ncols() * n);
    for c in 0..a.ncols() {
        for r in 0..a.nrows() {
            let v = a[(r, c)];
            if v == Complex64::ZERO {
                continue;
            }
            for i in 0..n {
                out[(r * n + i, c * n + i)] = v;
            }
        }
    }
    out
}

/// I_n ⊗ A without forming the identity.
pub fn identity_kron(n: usize, a: &CMat) -> CMat {
    let (r, c) = a.shape();
    let mut out = CMat::zeros(n * r, n * c);
    for i in 0..n {
        out.view_mut((i * r, i * c), (r, c)).copy_from(a);
    }
    out
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest entry-wise deviation from Hermitian symmetry.
pub fn hermitian_defect(a: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for c in 0..a.ncols() {
        for r in 0..a.nrows() {
            worst = worst.max((a[(r, c)] - a[(c, r)].conj()).norm());
        }
    }
    worst
}

fn hermitize(a: &CMat) -> CMat {
    (a + a.adjoint()) * Complex64::from(0.5)
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let eig = SymmetricEigen::new(hermitize(a));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(a.nrows(), a.ncols());
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn min_eigenvalue(a: &CMat) -> f64 {
    hermitian_eigen(a).0.first().copied().unwrap_or(0.0)
}

/// Hermitian square root of a PSD matrix.
///
/// Eigenvalues down to `-tol · max(1, λ_max)` are clamped to zero; anything
/// more negative is rejected.
pub fn psd_sqrt(a: &CMat, tol: f64) -> Result<CMat> {
    let (values, vectors) = hermitian_eigen(a);
    let scale = values.last().copied().unwrap_or(0.0).abs().max(1.0);
    if let Some(&min) = values.first() {
        if min < -tol * scale {
            return Err(Error::NotPositiveSemidefinite {
                min_eigenvalue: min,
            });
        }
    }
    let mut scaled = vectors.clone();
    for (j, &v) in values.iter().enumerate() {
        let s = Complex64::from(v.max(0.0).sqrt());
        scaled.column_mut(j).iter_mut().for_each(|z| *z *= s);
    }
    Ok(&scaled * vectors.adjoint())
}

/// Solution of a Hermitian (ideally positive definite) linear system.
#[derive(Debug, Clone)]
pub struct HermitianSolve {
    pub x: CMat,
    /// Set when the plain Cholesky factorization failed and a ridge or
    /// pseudo-inverse had to be used.
    pub regularized: bool,
}

/// Solves `a · x = b` for Hermitian `a`.
///
/// Tries Cholesky first, then Cholesky of `a + RIDGE·mean(diag)·I`, and
/// finally an SVD pseudo-inverse.
pub fn hermitian_solve(a: &CMat, b: &CMat) -> HermitianSolve {
    let a = hermitize(a);
    let n = a.nrows();
    if let Some(ch) = a.clone().cholesky() {
        // rank-deficient PSD input can still factor with tiny pivots
        let pivots = ch.l_dirty().diagonal().map(|z| z.re);
        let (lo, hi) = (pivots.min(), pivots.max());
        if lo * lo > PIVOT_RATIO * hi * hi {
            return HermitianSolve {
                x: ch.solve(b),
                regularized: false,
            };
        }
    }
    let mean_diag = (0..n).map(|i| a[(i, i)].re).sum::<f64>() / n.max(1) as f64;
    let ridge = RIDGE * mean_diag.abs().max(1.0);
    let mut shifted = a.clone();
    for i in 0..n {
        shifted[(i, i)] += ridge;
    }
    if let Some(ch) = shifted.cholesky() {
        return HermitianSolve {
            x: ch.solve(b),
            regularized: true,
        };
    }
    let pinv = a
        .pseudo_inverse(ridge)
        .expect("pseudo-inverse with non-negative epsilon");
    HermitianSolve {
        x: pinv * b,
        regularized: true,
    }
}

/// Circularly-symmetric complex Gaussian sample with unit variance.
pub fn cn<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn cn_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    // column-major fill keeps the draw order aligned with vec()
    let data: Vec<Complex64> = (0..rows * cols).map(|_| cn(rng)).collect();
    CMat::from_vec(rows, cols, data)
}

pub fn cn_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> CVec {
    CVec::from_iterator(len, (0..len).map(|_| cn(rng)))
}

/// Real diagonal matrix as a complex matrix.
pub fn real_diag(d: &DVector<f64>) -> CMat {
    CMat::from_diagonal(&d.map(Complex64::from))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn vec_is_column_major() {
        let m = CMat::from_fn(2, 3, |r, c| Complex64::new((r + 2 * c) as f64, 0.0));
        let v = vec(&m);
        let expect: Vec<f64> = (0..6).map(|i| i as f64).collect();
        assert_eq!(v.iter().map(|z| z.re).collect::<Vec<_>>(), expect);
        assert_eq!(unvec(&v, 2, 3).unwrap(), m);
        assert!(unvec(&v, 4, 2).is_err());
    }

    #[test]
    fn kron_helpers_match_kronecker() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = cn_matrix(&mut rng, 3, 2);
        let i4 = identity(4);
        assert!(frobenius(&(kron_identity(&a, 4) - kron(&a, &i4))) < 1e-14);
        assert!(frobenius(&(identity_kron(4, &a) - kron(&i4, &a))) < 1e-14);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = cn_matrix(&mut rng, 5, 3);
        let a = &g * g.adjoint();
        let s = psd_sqrt(&a, 1e-8).unwrap();
        assert!(frobenius(&(&s * &s - &a)) < 1e-10);
        assert!(hermitian_defect(&s) < 1e-12);

        let neg = -identity(2);
        assert!(matches!(
            psd_sqrt(&neg, 1e-8),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
    }

    #[test]
    fn singular_solve_falls_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = cn_matrix(&mut rng, 4, 2);
        let a = &g * g.adjoint();
        let b = &g * cn_matrix(&mut rng, 2, 1);
        let sol = hermitian_solve(&a, &b);
        assert!(sol.regularized);
        assert!(frobenius(&(&a * &sol.x - &b)) < 1e-6);

        let spd = &a + identity(4);
        let sol = hermitian_solve(&spd, &b);
        assert!(!sol.regularized);
        assert!(frobenius(&(&spd * &sol.x - &b)) < 1e-12);
    }
}
