//! Matrix factorizations on rank-2 tensors: truncated SVD, thin QR,
//! Hermitian eigendecomposition and pseudo-inverse, plus the Arnoldi
//! iteration used for transfer-operator spectra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::DenseTensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub(crate) fn to_dmatrix<T: Scalar>(t: &DenseTensor<T>) -> DMatrix<T> {
    assert_eq!(t.rank(), 2, "matrix op on non-matrix tensor");
    DMatrix::from_row_iterator(t.dim(0), t.dim(1), t.data().iter().copied())
}

pub(crate) fn from_dmatrix<T: Scalar>(m: &DMatrix<T>) -> DenseTensor<T> {
    let (r, c) = m.shape();
    DenseTensor::from_fn(vec![r, c], |idx| m[(idx[0], idx[1])])
}

/// Result of a truncated singular value decomposition `m ≈ u · diag(s) · vt`.
///
/// `u` has orthonormal columns and `vt` orthonormal rows; `s` is
/// non-increasing and non-negative. `truncation_weight` is the discarded
/// spectral weight Σ_cut s² / Σ_all s² (zero for an all-zero input).
#[derive(Clone, Debug)]
pub struct SvdResult<T: Scalar> {
    pub u: DenseTensor<T>,
    pub s: Vec<f64>,
    pub vt: DenseTensor<T>,
    pub truncation_weight: f64,
}

impl<T: Scalar> SvdResult<T> {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `u · diag(s) · vt`.
    pub fn reconstruct(&self) -> DenseTensor<T> {
        let k = self.s.len();
        let mut us = self.u.clone();
        for i in 0..self.u.dim(0) {
            for j in 0..k {
                let v = us.data()[i * k + j] * T::from_real(self.s[j]);
                us.data_mut()[i * k + j] = v;
            }
        }
        super::contract(&us, &self.vt, &[(1, 0)]).expect("svd shapes agree")
    }
}

/// Truncated SVD of a matrix tensor.
///
/// Keeps `min(max_rank, #{s_i > rel_cutoff · s_0})` singular values but at
/// least one, so a zero matrix yields a single zero singular value. Ties at
/// the truncation boundary are broken by the factorization's ordering.
pub fn svd_truncated<T: Scalar>(
    m: &DenseTensor<T>,
    max_rank: usize,
    rel_cutoff: f64,
) -> Result<SvdResult<T>> {
    if !m.is_finite() {
        return Err(Error::NonFinite("svd input"));
    }
    assert!(max_rank >= 1, "max_rank must be at least 1");
    let (rows, cols) = (m.dim(0), m.dim(1));
    let k_full = rows.min(cols);

    if m.max_abs() == 0.0 {
        let mut u = DenseTensor::zeros(vec![rows, 1]);
        u.set(&[0, 0], T::one());
        let mut vt = DenseTensor::zeros(vec![1, cols]);
        vt.set(&[0, 0], T::one());
        return Ok(SvdResult {
            u,
            s: vec![0.0],
            vt,
            truncation_weight: 0.0,
        });
    }

    let svd = to_faer(m)
        .thin_svd()
        .map_err(|_| Error::EigDidNotConverge)?;
    let sd = svd.S().column_vector();
    let s: Vec<f64> = (0..k_full).map(|k| sd[k].real()).collect();

    let s0 = s[0];
    let above = if s0 > 0.0 {
        s.iter().filter(|&&x| x > rel_cutoff * s0).count()
    } else {
        0
    };
    let keep = max_rank.min(above).max(1).min(k_full);

    let total: f64 = s.iter().map(|x| x * x).sum();
    let cut: f64 = s[keep..].iter().map(|x| x * x).sum();
    let truncation_weight = if total > 0.0 { cut / total } else { 0.0 };

    let uf = svd.U();
    let vf = svd.V();
    let u = DenseTensor::from_fn(vec![rows, keep], |idx| uf[(idx[0], idx[1])]);
    let vt = DenseTensor::from_fn(vec![keep, cols], |idx| vf[(idx[1], idx[0])].conjugate());
    Ok(SvdResult {
        u,
        s: s[..keep].to_vec(),
        vt,
        truncation_weight,
    })
}

fn to_faer<T: Scalar>(t: &DenseTensor<T>) -> faer::Mat<T> {
    let cols = t.dim(1);
    faer::Mat::from_fn(t.dim(0), cols, |i, j| t.data()[i * cols + j])
}

/// Thin QR decomposition `m = q · r` with `q† q = 1`.
pub fn qr<T: Scalar>(m: &DenseTensor<T>) -> Result<(DenseTensor<T>, DenseTensor<T>)> {
    if !m.is_finite() {
        return Err(Error::NonFinite("qr input"));
    }
    let qr = to_faer(m).qr();
    let qf = qr.compute_thin_Q();
    let rf = qr.thin_R();
    let k = qf.ncols();
    let q = DenseTensor::from_fn(vec![m.dim(0), k], |idx| qf[(idx[0], idx[1])]);
    let r = DenseTensor::from_fn(vec![k, m.dim(1)], |idx| rf[(idx[0], idx[1])]);
    Ok((q, r))
}

/// Hermitian eigendecomposition; eigenpairs sorted by descending eigenvalue.
///
/// Returns `(eigenvalues, v)` with eigenvectors as the columns of `v`. The
/// input is symmetrized as `(g + g†)/2` before decomposing.
pub fn eigh<T: Scalar>(g: &DenseTensor<T>) -> Result<(Vec<f64>, DenseTensor<T>)> {
    if !g.is_finite() {
        return Err(Error::NonFinite("eigh input"));
    }
    if g.dim(0) != g.dim(1) {
        return Err(Error::Shape("eigh requires a square matrix".into()));
    }
    let n = g.dim(0);
    let m = to_faer(g);
    let herm = (&m + m.adjoint()) * faer::Scale(T::from_real(0.5));
    let eig = herm
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|_| Error::EigDidNotConverge)?;
    let lam = eig.S().column_vector();
    let q = eig.U();
    // ascending from the solver; flip to descending
    let vals: Vec<f64> = (0..n).map(|i| lam[n - 1 - i].real()).collect();
    let vecs = DenseTensor::from_fn(vec![n, n], |idx| q[(idx[0], n - 1 - idx[1])]);
    Ok((vals, vecs))
}

/// Apply a spectral map `g ↦ V f(Λ) V†` to a Hermitian matrix. The map may
/// return complex values (e.g. `exp(iλt)` for unitary gates).
pub fn herm_map<T: Scalar>(g: &DenseTensor<T>, f: impl Fn(f64) -> T) -> Result<DenseTensor<T>> {
    let (vals, v) = eigh(g)?;
    let n = vals.len();
    let mut scaled = v.clone();
    for i in 0..n {
        for j in 0..n {
            let x = scaled.data()[i * n + j] * f(vals[j]);
            scaled.data_mut()[i * n + j] = x;
        }
    }
    super::contract(&scaled, &v.dagger(), &[(1, 0)])
}

/// Pseudo-inverse of a Hermitian (caller-hermitized) matrix.
///
/// Eigenvalues `λ ≥ tol · λ_max` are inverted; everything else, negative
/// values included, maps to zero. Errors if no eigenvalue clears the cutoff.
pub fn pinv_hermitian<T: Scalar>(g: &DenseTensor<T>, tol: f64) -> Result<DenseTensor<T>> {
    let (vals, v) = eigh(g)?;
    let lam_max = vals.first().copied().unwrap_or(0.0);
    if lam_max <= 0.0 {
        return Err(Error::DegenerateMetric);
    }
    let cutoff = tol * lam_max;
    if !vals.iter().any(|&l| l >= cutoff && l > 0.0) {
        return Err(Error::DegenerateMetric);
    }
    let n = vals.len();
    let mut scaled = v.clone();
    for i in 0..n {
        for j in 0..n {
            let f = if vals[j] >= cutoff && vals[j] > 0.0 {
                1.0 / vals[j]
            } else {
                0.0
            };
            let x = scaled.data()[i * n + j] * T::from_real(f);
            scaled.data_mut()[i * n + j] = x;
        }
    }
    super::contract(&scaled, &v.dagger(), &[(1, 0)])
}

/// Leading eigenvalues (by modulus) of a linear operator, via an Arnoldi
/// iteration with a deterministic start vector. Returns up to `want`
/// eigenvalues sorted by descending modulus; fewer if the Krylov space
/// closes early (exact invariant subspace).
pub fn leading_eigenvalues(
    dim: usize,
    want: usize,
    mut matvec: impl FnMut(&[Complex64]) -> Vec<Complex64>,
) -> Result<Vec<Complex64>> {
    assert!(dim >= 1);
    let krylov = (4 * want + 12).min(dim);
    let mut basis: Vec<DVector<Complex64>> = Vec::with_capacity(krylov);
    let start = DVector::from_fn(dim, |i, _| {
        Complex64::new(1.0 + 0.37 * ((i + 1) as f64).sin(), 0.2 * ((i + 1) as f64).cos())
    });
    let nrm = start.norm();
    basis.push(start / Complex64::new(nrm, 0.0));

    let mut h = DMatrix::<Complex64>::zeros(krylov + 1, krylov);
    let mut steps = 0usize;
    for j in 0..krylov {
        let w = matvec(basis[j].as_slice());
        if w.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::NonFinite("arnoldi matvec"));
        }
        let mut w = DVector::from_vec(w);
        // Modified Gram-Schmidt, twice for stability.
        for _ in 0..2 {
            for (i, q) in basis.iter().enumerate() {
                let coeff = q.dotc(&w);
                h[(i, j)] += coeff;
                w -= q * coeff;
            }
        }
        steps = j + 1;
        let res = w.norm();
        h[(j + 1, j)] = Complex64::new(res, 0.0);
        let scale = h
            .view((0, 0), (j + 2, j + 1))
            .iter()
            .map(|x| x.norm())
            .fold(1e-300f64, f64::max);
        if res <= 1e-14 * scale || j + 1 == krylov {
            break;
        }
        basis.push(w / Complex64::new(res, 0.0));
    }

    let hk = h.view((0, 0), (steps, steps)).into_owned();
    let mut eigs = hessenberg_eigenvalues(hk)?;
    eigs.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap());
    eigs.truncate(want);
    Ok(eigs)
}

/// Eigenvalues of a small complex upper-Hessenberg matrix via the shifted QR
/// iteration with Givens rotations.
pub fn hessenberg_eigenvalues(mut h: DMatrix<Complex64>) -> Result<Vec<Complex64>> {
    let n = h.nrows();
    assert_eq!(n, h.ncols());
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut eigs = Vec::with_capacity(n);
    let mut hi = n; // active block is rows/cols [lo, hi)
    let mut iters_since_deflation = 0usize;
    let max_total = 300 * n + 100;
    let mut total = 0usize;

    let negligible = |h: &DMatrix<Complex64>, i: usize| -> bool {
        h[(i, i - 1)].norm() <= 1e-15 * (h[(i, i)].norm() + h[(i - 1, i - 1)].norm() + 1e-300)
    };

    while hi > 0 {
        if hi == 1 {
            eigs.push(h[(0, 0)]);
            break;
        }
        // Deflate converged 1x1 blocks at the bottom.
        if negligible(&h, hi - 1) {
            eigs.push(h[(hi - 1, hi - 1)]);
            hi -= 1;
            iters_since_deflation = 0;
            continue;
        }
        // Find the start of the active unreduced block.
        let mut lo = hi - 1;
        while lo > 0 && !negligible(&h, lo) {
            lo -= 1;
        }

        total += 1;
        iters_since_deflation += 1;
        if total > max_total {
            return Err(Error::EigDidNotConverge);
        }

        // Wilkinson shift from the trailing 2x2, with an occasional
        // exceptional shift to break symmetry stalls.
        let a = h[(hi - 2, hi - 2)];
        let b = h[(hi - 2, hi - 1)];
        let c = h[(hi - 1, hi - 2)];
        let d = h[(hi - 1, hi - 1)];
        let mu = if iters_since_deflation % 12 == 0 {
            d + Complex64::new(0.75 * c.norm(), 0.0)
        } else {
            let tr = a + d;
            let det = a * d - b * c;
            let disc = (tr * tr - det * Complex64::new(4.0, 0.0)).sqrt();
            let r1 = (tr + disc) * Complex64::new(0.5, 0.0);
            let r2 = (tr - disc) * Complex64::new(0.5, 0.0);
            if (r1 - d).norm() < (r2 - d).norm() {
                r1
            } else {
                r2
            }
        };

        // One implicit QR sweep on the active block: H - muI = QR, H <- RQ + muI.
        // Each rotation G is a 2x2 unitary with G† [x; y] = [r; 0].
        let mut rot: Vec<[Complex64; 4]> = Vec::with_capacity(hi - lo - 1);
        for i in lo..hi {
            h[(i, i)] -= mu;
        }
        for i in lo..hi - 1 {
            let x = h[(i, i)];
            let y = h[(i + 1, i)];
            let g = if y.norm() == 0.0 {
                [
                    Complex64::new(1.0, 0.0),
                    Complex64::new(0.0, 0.0),
                    Complex64::new(0.0, 0.0),
                    Complex64::new(1.0, 0.0),
                ]
            } else {
                let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
                [x / r, -(y / r).conj(), y / r, (x / r).conj()]
            };
            // G† from the left on rows i, i+1 (columns i..hi).
            for j in i..hi {
                let top = h[(i, j)];
                let bot = h[(i + 1, j)];
                h[(i, j)] = g[0].conj() * top + g[2].conj() * bot;
                h[(i + 1, j)] = g[1].conj() * top + g[3].conj() * bot;
            }
            rot.push(g);
        }
        // RQ: the same rotations from the right on columns i, i+1.
        for (idx, i) in (lo..hi - 1).enumerate() {
            let g = rot[idx];
            for row in lo..=(i + 1) {
                let left = h[(row, i)];
                let right = h[(row, i + 1)];
                h[(row, i)] = left * g[0] + right * g[2];
                h[(row, i + 1)] = left * g[1] + right * g[3];
            }
        }
        for i in lo..hi {
            h[(i, i)] += mu;
        }
    }
    Ok(eigs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::contract;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DenseTensor<Complex64> {
        DenseTensor::from_fn(vec![r, c], |_| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    fn rel_err(a: &DenseTensor<Complex64>, b: &DenseTensor<Complex64>) -> f64 {
        a.sub(b).unwrap().norm() / b.norm().max(1e-300)
    }

    #[test]
    fn svd_of_diagonal() {
        let m = DenseTensor::new(
            vec![3, 3],
            vec![3.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0],
        )
        .unwrap();
        let r = svd_truncated(&m, 2, 0.0).unwrap();
        assert_eq!(r.s.len(), 2);
        assert!((r.s[0] - 3.0).abs() < 1e-12 && (r.s[1] - 2.0).abs() < 1e-12);
        assert!((r.truncation_weight - 1.0 / 14.0).abs() < 1e-14);
    }

    #[test]
    fn svd_full_rank_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = rand_matrix(&mut rng, 6, 4);
        let r = svd_truncated(&m, 4, 0.0).unwrap();
        assert!(rel_err(&r.reconstruct(), &m) < 1e-11);
        // isometry checks
        let uu = contract(&r.u.dagger(), &r.u, &[(1, 0)]).unwrap();
        assert!(rel_err(&uu, &DenseTensor::identity(r.s.len())) < 1e-12);
        let vv = contract(&r.vt, &r.vt.dagger(), &[(1, 0)]).unwrap();
        assert!(rel_err(&vv, &DenseTensor::identity(r.s.len())) < 1e-12);
    }

    #[test]
    fn svd_rank_one_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = rand_matrix(&mut rng, 5, 1);
        let v = rand_matrix(&mut rng, 4, 1);
        let m = contract(&u, &v.transposed(), &[(1, 0)]).unwrap();
        let r = svd_truncated(&m, 3, 1e-12).unwrap();
        assert_eq!(r.s.len(), 1, "exactly one singular value survives");
    }

    #[test]
    fn svd_zero_matrix() {
        let m = DenseTensor::<f64>::zeros(vec![3, 2]);
        let r = svd_truncated(&m, 2, 0.0).unwrap();
        assert_eq!(r.s.len(), 1);
        assert_eq!(r.s[0], 0.0);
        assert_eq!(r.truncation_weight, 0.0);
    }

    #[test]
    fn qr_identity_and_column() {
        let id = DenseTensor::<f64>::identity(3);
        let (q, r) = qr(&id).unwrap();
        assert!((q.sub(&id).unwrap().norm()).abs() < 1e-14);
        assert!((r.sub(&id).unwrap().norm()).abs() < 1e-14);

        let col = DenseTensor::new(vec![2, 1], vec![3.0, 4.0]).unwrap();
        let (q, r) = qr(&col).unwrap();
        assert!((r.data()[0].abs() - 5.0).abs() < 1e-12);
        assert!((q.data()[0].abs() - 0.6).abs() < 1e-12);
        assert!((q.data()[1].abs() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn qr_random_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let m = rand_matrix(&mut rng, 6, 4);
        let (q, r) = qr(&m).unwrap();
        let qr_ = contract(&q, &r, &[(1, 0)]).unwrap();
        assert!(rel_err(&qr_, &m) < 1e-12);
        let qq = contract(&q.dagger(), &q, &[(1, 0)]).unwrap();
        assert!(rel_err(&qq, &DenseTensor::identity(q.dim(1))) < 1e-12);
    }

    #[test]
    fn pinv_identity_and_diag() {
        let id = DenseTensor::<f64>::identity(3);
        let p = pinv_hermitian(&id, 1e-6).unwrap();
        assert!(p.sub(&id).unwrap().norm() < 1e-12);

        let g = DenseTensor::new(
            vec![3, 3],
            vec![4.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1e-15],
        )
        .unwrap();
        let p = pinv_hermitian(&g, 1e-12).unwrap();
        let want = DenseTensor::new(
            vec![3, 3],
            vec![0.25, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        )
        .unwrap();
        assert!(p.sub(&want).unwrap().norm() < 1e-12);
    }

    #[test]
    fn pinv_penrose_identity_on_random_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = rand_matrix(&mut rng, 5, 5);
        let g = contract(&a, &a.dagger(), &[(1, 0)]).unwrap();
        let p = pinv_hermitian(&g, 1e-13).unwrap();
        let gpg = contract(&contract(&g, &p, &[(1, 0)]).unwrap(), &g, &[(1, 0)]).unwrap();
        assert!(rel_err(&gpg, &g) < 1e-10);
    }

    #[test]
    fn pinv_commutes_with_unitary_conjugation() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let a = rand_matrix(&mut rng, 4, 4);
        let g = contract(&a, &a.dagger(), &[(1, 0)]).unwrap();
        let (q, _) = qr(&rand_matrix(&mut rng, 4, 4)).unwrap();
        let ugu = contract(&contract(&q, &g, &[(1, 0)]).unwrap(), &q.dagger(), &[(1, 0)]).unwrap();
        let p1 = pinv_hermitian(&ugu, 1e-10).unwrap();
        let p2 = contract(
            &contract(&q, &pinv_hermitian(&g, 1e-10).unwrap(), &[(1, 0)]).unwrap(),
            &q.dagger(),
            &[(1, 0)],
        )
        .unwrap();
        assert!(rel_err(&p1, &p2) < 1e-10);
    }

    #[test]
    fn pinv_degenerate_errors() {
        let g = DenseTensor::<f64>::zeros(vec![2, 2]);
        assert!(matches!(
            pinv_hermitian(&g, 1e-10),
            Err(Error::DegenerateMetric)
        ));
    }

    #[test]
    fn hessenberg_eigs_companion() {
        // Companion matrix of (x-1)(x-2)(x-3) = x^3 - 6x^2 + 11x - 6.
        let h = DMatrix::from_row_slice(
            3,
            3,
            &[
                Complex64::new(6.0, 0.0),
                Complex64::new(-11.0, 0.0),
                Complex64::new(6.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
            ],
        );
        let mut eigs = hessenberg_eigenvalues(h).unwrap();
        eigs.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap());
        assert!((eigs[0] - Complex64::new(3.0, 0.0)).norm() < 1e-9);
        assert!((eigs[1] - Complex64::new(2.0, 0.0)).norm() < 1e-9);
        assert!((eigs[2] - Complex64::new(1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn arnoldi_recovers_known_spectrum() {
        // Operator = U diag(lams) U† with a random unitary U.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 24;
        let lams: Vec<Complex64> = (0..n)
            .map(|i| {
                Complex64::new(
                    1.5 * 0.8f64.powi(i as i32),
                    0.3 * 0.8f64.powi(i as i32) * ((i * 7) as f64).sin(),
                )
            })
            .collect();
        let (q, _) = qr(&rand_matrix(&mut rng, n, n)).unwrap();
        let qd = q.dagger();
        let apply = |v: &[Complex64]| -> Vec<Complex64> {
            let x = DenseTensor::new(vec![n], v.to_vec()).unwrap();
            let y = contract(&qd, &x, &[(1, 0)]).unwrap();
            let mut y = y;
            for (i, val) in y.data_mut().iter_mut().enumerate() {
                *val *= lams[i];
            }
            contract(&q, &y, &[(1, 0)]).unwrap().data().to_vec()
        };
        let eigs = leading_eigenvalues(n, 2, apply).unwrap();
        assert!((eigs[0] - lams[0]).norm() < 1e-8 * lams[0].norm());
        assert!((eigs[1] - lams[1]).norm() < 1e-7 * lams[0].norm());
    }
}
