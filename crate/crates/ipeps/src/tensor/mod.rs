//! Dense tensor algebra: contraction, permutation, reshaping, and the matrix
//! factorizations every other module consumes.
//!
//! A [`DenseTensor`] is a multi-index array with ordered legs and a fixed
//! row-major layout (last leg fastest). All permutations are explicit data
//! movements; `contract` canonicalizes a pairwise contraction into
//! permute → matrixize → GEMM, with the GEMM as the one parallel kernel.

pub mod kernel;
pub mod linalg;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use linalg::{eigh, pinv_hermitian, qr, svd_truncated, SvdResult};

/// Dense multi-index array of real or complex scalars.
///
/// Invariants: `dims.iter().product() == data.len()` and every dimension is
/// at least 1. A rank-0 tensor holds exactly one scalar.
#[derive(Clone, PartialEq)]
pub struct DenseTensor<T: Scalar> {
    dims: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> std::fmt::Debug for DenseTensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "DenseTensor{:?}<{} entries>", self.dims, self.data.len())
    }
}

impl<T: Scalar> DenseTensor<T> {
    pub fn new(dims: Vec<usize>, data: Vec<T>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Shape(format!("zero-sized leg in {dims:?}")));
        }
        let expect: usize = dims.iter().product();
        if expect != data.len() {
            return Err(Error::Shape(format!(
                "dims {:?} expect {} entries, got {}",
                dims,
                expect,
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let len = dims.iter().product();
        Self {
            dims,
            data: vec![T::default(); len],
        }
    }

    pub fn scalar(value: T) -> Self {
        Self {
            dims: Vec::new(),
            data: vec![value],
        }
    }

    /// Rank-2 identity.
    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(vec![n, n]);
        for i in 0..n {
            t.data[i * n + i] = T::one();
        }
        t
    }

    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> T) -> Self {
        let len: usize = dims.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; dims.len()];
        for _ in 0..len {
            data.push(f(&idx));
            for ax in (0..dims.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < dims[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Self { dims, data }
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self, leg: usize) -> usize {
        self.dims[leg]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1usize; self.dims.len()];
        for i in (0..self.dims.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.dims[i + 1];
        }
        s
    }

    pub fn at(&self, idx: &[usize]) -> T {
        debug_assert_eq!(idx.len(), self.dims.len());
        let s = self.strides();
        let lin: usize = idx.iter().zip(&s).map(|(&i, &st)| i * st).sum();
        self.data[lin]
    }

    pub fn set(&mut self, idx: &[usize], value: T) {
        let s = self.strides();
        let lin: usize = idx.iter().zip(&s).map(|(&i, &st)| i * st).sum();
        self.data[lin] = value;
    }

    /// Reorder legs: new leg `i` is old leg `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.dims.len(), "permutation rank mismatch");
        if perm.iter().enumerate().all(|(i, &p)| i == p) {
            return self.clone();
        }
        let old_strides = self.strides();
        let new_dims: Vec<usize> = perm.iter().map(|&p| self.dims[p]).collect();
        let mut out = Vec::with_capacity(self.data.len());
        // Gather: walk the output in row-major order, tracking the matching
        // linear offset into the input.
        let rank = new_dims.len();
        let gather_strides: Vec<usize> = perm.iter().map(|&p| old_strides[p]).collect();
        let mut idx = vec![0usize; rank];
        let mut src = 0usize;
        for _ in 0..self.data.len() {
            out.push(self.data[src]);
            for ax in (0..rank).rev() {
                idx[ax] += 1;
                src += gather_strides[ax];
                if idx[ax] < new_dims[ax] {
                    break;
                }
                idx[ax] = 0;
                src -= gather_strides[ax] * new_dims[ax];
            }
        }
        Self {
            dims: new_dims,
            data: out,
        }
    }

    /// Reinterpret legs without moving data; products must match.
    pub fn reshaped(&self, new_dims: Vec<usize>) -> Result<Self> {
        let expect: usize = new_dims.iter().product();
        if expect != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} to {:?}",
                self.dims, new_dims
            )));
        }
        Ok(Self {
            dims: new_dims,
            data: self.data.clone(),
        })
    }

    pub fn into_reshaped(mut self, new_dims: Vec<usize>) -> Result<Self> {
        let expect: usize = new_dims.iter().product();
        if expect != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} to {:?}",
                self.dims, new_dims
            )));
        }
        self.dims = new_dims;
        Ok(self)
    }

    pub fn conj(&self) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.iter().map(|x| x.conjugate()).collect(),
        }
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&x| x * factor).collect(),
        }
    }

    pub fn scale_mut(&mut self, factor: T) {
        for x in &mut self.data {
            *x *= factor;
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::Shape("add: dimension mismatch".into()));
        }
        Ok(Self {
            dims: self.dims.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::Shape("sub: dimension mismatch".into()));
        }
        Ok(Self {
            dims: self.dims.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data
            .iter()
            .map(|x| x.modulus())
            .fold(0.0f64, f64::max)
    }

    pub fn norm(&self) -> f64 {
        self.data
            .iter()
            .map(|x| {
                let m = x.modulus();
                m * m
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|x| x.real().is_finite() && x.imaginary().is_finite())
    }

    /// Hermitian conjugate of a rank-2 tensor.
    pub fn dagger(&self) -> Self {
        assert_eq!(self.rank(), 2, "dagger requires a matrix");
        self.permuted(&[1, 0]).conj()
    }

    /// Matrix transpose of a rank-2 tensor.
    pub fn transposed(&self) -> Self {
        assert_eq!(self.rank(), 2, "transpose requires a matrix");
        self.permuted(&[1, 0])
    }
}

/// Contract `a` with `b` over the given `(leg-of-a, leg-of-b)` pairs.
///
/// Result legs are the unpaired legs of `a` (in order) followed by the
/// unpaired legs of `b`. An empty pair list is an outer product; contracting
/// all legs yields a rank-0 scalar tensor.
pub fn contract<T: Scalar>(
    a: &DenseTensor<T>,
    b: &DenseTensor<T>,
    pairs: &[(usize, usize)],
) -> Result<DenseTensor<T>> {
    let mut a_paired = vec![false; a.rank()];
    let mut b_paired = vec![false; b.rank()];
    for &(la, lb) in pairs {
        if la >= a.rank() || lb >= b.rank() {
            return Err(Error::ContractShape(format!(
                "leg pair ({la},{lb}) out of range for ranks ({},{})",
                a.rank(),
                b.rank()
            )));
        }
        if a_paired[la] || b_paired[lb] {
            return Err(Error::ContractShape(format!(
                "leg pair ({la},{lb}) repeats a leg"
            )));
        }
        if a.dim(la) != b.dim(lb) {
            return Err(Error::ContractShape(format!(
                "legs ({la},{lb}) have dims {} vs {}",
                a.dim(la),
                b.dim(lb)
            )));
        }
        a_paired[la] = true;
        b_paired[lb] = true;
    }

    let a_free: Vec<usize> = (0..a.rank()).filter(|&l| !a_paired[l]).collect();
    let b_free: Vec<usize> = (0..b.rank()).filter(|&l| !b_paired[l]).collect();

    let mut a_perm: Vec<usize> = a_free.clone();
    a_perm.extend(pairs.iter().map(|&(la, _)| la));
    let mut b_perm: Vec<usize> = pairs.iter().map(|&(_, lb)| lb).collect();
    b_perm.extend(b_free.iter().copied());

    let a_mat = a.permuted(&a_perm);
    let b_mat = b.permuted(&b_perm);

    let m: usize = a_free.iter().map(|&l| a.dim(l)).product();
    let k: usize = pairs.iter().map(|&(la, _)| a.dim(la)).product();
    let n: usize = b_free.iter().map(|&l| b.dim(l)).product();

    let mut out_dims: Vec<usize> = a_free.iter().map(|&l| a.dim(l)).collect();
    out_dims.extend(b_free.iter().map(|&l| b.dim(l)));

    let mut c = vec![T::default(); m * n];
    kernel::matmul(m, k, n, a_mat.data(), b_mat.data(), &mut c);
    DenseTensor::new(out_dims, c)
}

/// Fuse a contiguous run of legs `[start, start + count)` into one leg.
pub fn fuse<T: Scalar>(t: &DenseTensor<T>, start: usize, count: usize) -> DenseTensor<T> {
    let dims = t.dims();
    let mut new_dims: Vec<usize> = dims[..start].to_vec();
    new_dims.push(dims[start..start + count].iter().product());
    new_dims.extend_from_slice(&dims[start + count..]);
    t.reshaped(new_dims).expect("fuse preserves length")
}
