//! Scalar kinds for tensor data.
//!
//! Real-time (quench) evolution runs on `Complex64`; thermal purifications
//! run on `f64`, where the Hermitian operator-basis parametrization keeps
//! every tensor entry real. Both kinds implement one trait so the rest of
//! the crate is generic over the scalar.

use nalgebra::ComplexField;
use num_complex::Complex64;

/// Tag identifying the scalar kind of a tensor, also stored in checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarKind {
    Real,
    Complex,
}

/// Element type of a [`crate::tensor::DenseTensor`].
///
/// `ComplexField` supplies conjugation, modulus and `from_real`; this trait
/// only pins the real field to `f64` and adds the kind tag.
pub trait Scalar:
    ComplexField<RealField = f64>
    + faer::traits::ComplexField<Real = f64>
    + Copy
    + Default
    + PartialEq
    + Send
    + Sync
    + 'static
{
    const KIND: ScalarKind;

    /// Build from separate real and imaginary parts (imaginary part must be
    /// negligible for the real kind).
    fn from_parts(re: f64, im: f64) -> Self;
}

impl Scalar for f64 {
    const KIND: ScalarKind = ScalarKind::Real;

    fn from_parts(re: f64, _im: f64) -> Self {
        re
    }
}

impl Scalar for Complex64 {
    const KIND: ScalarKind = ScalarKind::Complex;

    fn from_parts(re: f64, im: f64) -> Self {
        Complex64::new(re, im)
    }
}
