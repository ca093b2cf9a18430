//! Small dense complex linear-algebra helpers shared by the model, network
//! and dynamics layers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Largest entrywise modulus; zero for an empty matrix.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Entrywise complex conjugate (the `#` operation).
pub fn conj(m: &CMatrix) -> CMatrix {
    m.map(|z| z.conj())
}

pub fn block_diag(blocks: &[&CMatrix]) -> CMatrix {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let (mut r, mut k) = (0, 0);
    for b in blocks {
        out.view_mut((r, k), (b.nrows(), b.ncols())).copy_from(*b);
        r += b.nrows();
        k += b.ncols();
    }
    out
}

/// Assemble `[[tl, tr], [bl, br]]`.
pub fn block2(tl: &CMatrix, tr: &CMatrix, bl: &CMatrix, br: &CMatrix) -> CMatrix {
    let (r0, c0) = tl.shape();
    let mut out = CMatrix::zeros(r0 + bl.nrows(), c0 + tr.ncols());
    out.view_mut((0, 0), tl.shape()).copy_from(tl);
    out.view_mut((0, c0), tr.shape()).copy_from(tr);
    out.view_mut((r0, 0), bl.shape()).copy_from(bl);
    out.view_mut((r0, c0), br.shape()).copy_from(br);
    out
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == ZERO {
                continue;
            }
            out.view_mut((i * br, j * bc), (br, bc)).copy_from(&(b * s));
        }
    }
    out
}

/// Solve `A X + X A† + Q = 0` by vectorisation.
///
/// Intended for the small state dimensions used here (the Kronecker system is
/// `n² × n²`).
pub fn solve_lyapunov(a: &CMatrix, q: &CMatrix) -> Result<CMatrix> {
    let n = a.nrows();
    if a.ncols() != n || q.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "lyapunov: A is {:?}, Q is {:?}",
            a.shape(),
            q.shape()
        )));
    }
    if n == 0 {
        return Ok(CMatrix::zeros(0, 0));
    }
    let id = CMatrix::identity(n, n);
    // column-major vec: vec(AX) = (I ⊗ A) vec X, vec(X A†) = (conj(A) ⊗ I) vec X
    let k = kron(&id, a) + kron(&conj(a), &id);
    let rhs = CVector::from_iterator(n * n, q.iter().map(|z| -z));
    let x = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("lyapunov operator is singular".into()))?;
    Ok(CMatrix::from_column_slice(n, n, x.as_slice()))
}

/// Matrix exponential (Padé scaling and squaring).
pub fn expm(a: &CMatrix) -> CMatrix {
    assert_eq!(a.nrows(), a.ncols(), "expm needs a square matrix");
    if a.is_empty() {
        return CMatrix::zeros(0, 0);
    }
    a.exp()
}

/// Eigenvalues of a general complex matrix via the complex Schur form, sorted
/// by decreasing real part then increasing imaginary part.
pub fn eigenvalues(a: &CMatrix) -> Vec<Complex64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let schur = nalgebra::linalg::Schur::new(a.clone());
    let (_, t) = schur.unpack();
    let mut ev: Vec<Complex64> = t.diagonal().iter().copied().collect();
    ev.sort_by(|x, y| {
        y.re.partial_cmp(&x.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.im.partial_cmp(&y.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    ev
}

/// `σ_min / σ_max`; an empty matrix counts as perfectly conditioned.
pub fn rcond(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0.0;
    }
    sv.min() / max
}

/// Orthonormal basis of `{ v : v† M = 0 }`, thresholded at `tol` on the
/// singular values of `M`.
pub fn left_null_space(m: &CMatrix, tol: f64) -> Vec<CVector> {
    let (r, cols) = m.shape();
    if r == 0 {
        return Vec::new();
    }
    // pad to at least square so the thin U is a full basis of C^r
    let padded = if cols < r {
        let mut p = CMatrix::zeros(r, r);
        p.view_mut((0, 0), (r, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(true, false);
    let u = svd.u.expect("requested U");
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= tol)
        .map(|(k, _)| u.column(k).into_owned())
        .collect()
}

/// Orthonormal basis of the column space of `m` (numerical rank at relative
/// tolerance `rtol`).
pub fn range_basis(m: &CMatrix, rtol: f64) -> CMatrix {
    let (r, _) = m.shape();
    if m.is_empty() {
        return CMatrix::zeros(r, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| smax > 0.0 && **s > rtol * smax)
        .map(|(k, _)| k)
        .collect();
    let mut out = CMatrix::zeros(r, keep.len());
    for (j, &k) in keep.iter().enumerate() {
        out.set_column(j, &u.column(k));
    }
    out
}

/// Orthonormal completion: columns spanning the orthogonal complement of the
/// (orthonormal) columns of `basis` in `C^n`.
pub fn orthogonal_complement(basis: &CMatrix, n: usize) -> CMatrix {
    let k = basis.ncols();
    if k == 0 {
        return CMatrix::identity(n, n);
    }
    let proj = CMatrix::identity(n, n) - basis * basis.adjoint();
    let comp = range_basis(&proj, 1e-9);
    debug_assert_eq!(comp.ncols(), n - k);
    comp
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_nilpotent_is_two_terms() {
        let a = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]);
        let e = expm(&a);
        let want = CMatrix::from_row_slice(2, 2, &[ONE, ONE, ZERO, ONE]);
        assert!(max_abs(&(e - want)) < 1e-15);
    }

    #[test]
    fn expm_matches_scalar_exponential() {
        let z = c(-0.5, -2.0);
        let e = expm(&CMatrix::from_element(1, 1, z));
        assert!((e[(0, 0)] - z.exp()).norm() < 1e-14);
    }

    /// Plain Taylor series with scaling and squaring, as an independent check.
    fn taylor_expm(a: &CMatrix) -> CMatrix {
        let n = a.nrows();
        let s = 8;
        let scaled = a * re(0.5f64.powi(s));
        let mut sum = CMatrix::identity(n, n);
        let mut term = CMatrix::identity(n, n);
        for k in 1..30 {
            term = &term * &scaled * re(1.0 / k as f64);
            sum += &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn expm_agrees_with_taylor_series() {
        let a = CMatrix::from_row_slice(
            3,
            3,
            &[
                c(-0.3, 1.0),
                c(0.2, 0.0),
                c(0.0, 0.5),
                c(1.5, -0.1),
                c(-2.0, 0.3),
                c(0.7, 0.0),
                c(0.0, 0.0),
                c(-0.4, 0.4),
                c(0.1, -3.0),
            ],
        ) * re(2.5);
        assert!(max_abs(&(expm(&a) - taylor_expm(&a))) < 1e-12);
        assert_eq!(expm(&CMatrix::zeros(0, 0)).shape(), (0, 0));
    }

    #[test]
    fn isotropic_lyapunov() {
        let n = 3;
        let a = -CMatrix::identity(n, n);
        let q = CMatrix::identity(n, n) * re(2.0);
        let x = solve_lyapunov(&a, &q).unwrap();
        assert!(max_abs(&(x - CMatrix::identity(n, n))) < 1e-14);
    }

    #[test]
    fn lyapunov_residual_vanishes() {
        let a = CMatrix::from_row_slice(2, 2, &[c(-1.0, 0.5), c(0.3, 0.0), c(-0.2, 0.1), c(-0.7, -1.0)]);
        let q = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.2, 0.1), c(0.2, -0.1), c(0.5, 0.0)]);
        let x = solve_lyapunov(&a, &q).unwrap();
        let res = &a * &x + &x * a.adjoint() + &q;
        assert!(max_abs(&res) < 1e-13);
    }

    #[test]
    fn left_null_space_finds_antisymmetric_mode() {
        // v† M = 0 for v ∝ (1, -1)
        let m = CMatrix::from_row_slice(2, 3, &[ONE, re(2.0), ZERO, ONE, re(2.0), ZERO]);
        let ns = left_null_space(&m, 1e-9);
        assert_eq!(ns.len(), 1);
        let v = &ns[0];
        assert!((v[0] + v[1]).norm() < 1e-12);
    }

    #[test]
    fn eigenvalues_of_jordan_block_are_exact() {
        let l = c(-0.25, -1.0);
        let a = CMatrix::from_row_slice(2, 2, &[l, ZERO, re(-0.5), l]);
        for ev in eigenvalues(&a) {
            assert!((ev - l).norm() < 1e-15);
        }
    }
}
