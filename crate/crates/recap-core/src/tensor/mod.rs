//! Dense tensors and reverse-mode automatic differentiation.
//!
//! The engine is deliberately small: a [`Tensor`] is a shape plus shared
//! storage, a [`Tape`] records primitive operations as they execute, and
//! [`Tape::backward`] walks the record once in reverse to accumulate
//! gradients into the leaves. Training runs in `f32`; gradient checks
//! instantiate the same code at `f64`, which is why everything is generic
//! over [`Element`].

mod adam;
mod kernels;
mod tape;

pub use adam::AdamState;
pub use tape::{CeTargets, Reduction, Tape, Var, WindowLayout};

use std::sync::Arc;

use crate::error::Error;
use crate::Result;

/// Scalar type the engine runs on. Implemented for `f32` and `f64`.
pub trait Element:
    Copy
    + PartialOrd
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
    + std::ops::AddAssign
    + std::iter::Sum
{
    const ZERO: Self;
    const ONE: Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn maximum(self, other: Self) -> Self;
    /// Gauss error function; exact GELU is defined through it.
    fn erf(self) -> Self;
    fn is_finite(self) -> bool;
}

impl Element for f32 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn exp(self) -> Self {
        f32::exp(self)
    }
    fn ln(self) -> Self {
        f32::ln(self)
    }
    fn sqrt(self) -> Self {
        f32::sqrt(self)
    }
    fn abs(self) -> Self {
        f32::abs(self)
    }
    fn maximum(self, other: Self) -> Self {
        f32::max(self, other)
    }
    fn erf(self) -> Self {
        libm::erf(self as f64) as f32
    }
    fn is_finite(self) -> bool {
        f32::is_finite(self)
    }
}

impl Element for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn maximum(self, other: Self) -> Self {
        f64::max(self, other)
    }
    fn erf(self) -> Self {
        libm::erf(self)
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

/// Shape plus shared row-major storage.
///
/// Storage sits behind an `Arc` so a parameter can be lent to many tapes
/// (one per batch sample) without copying; [`Tensor::data_mut`] copies on
/// write only if someone else still holds the buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F: Element> {
    shape: Vec<usize>,
    data: Arc<Vec<F>>,
}

impl<F: Element> Tensor<F> {
    pub fn from_vec(shape: Vec<usize>, data: Vec<F>) -> Result<Self> {
        let count: usize = shape.iter().product();
        if shape.iter().any(|&e| e == 0) {
            return Err(Error::InvalidInput(format!("zero extent in shape {shape:?}")));
        }
        if data.len() != count {
            return Err(Error::InvalidInput(format!(
                "shape {shape:?} wants {count} elements, buffer holds {}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape,
            data: Arc::new(data),
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let count = shape.iter().product();
        Tensor {
            shape,
            data: Arc::new(vec![F::ZERO; count]),
        }
    }

    pub fn scalar(v: F) -> Self {
        Tensor {
            shape: vec![1],
            data: Arc::new(vec![v]),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    /// Mutable view; copies the buffer first if it is shared.
    pub fn data_mut(&mut self) -> &mut [F] {
        Arc::make_mut(&mut self.data).as_mut_slice()
    }

    pub(crate) fn storage(&self) -> Arc<Vec<F>> {
        Arc::clone(&self.data)
    }

    pub(crate) fn from_storage(shape: Vec<usize>, data: Arc<Vec<F>>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor { shape, data }
    }

    /// Casts elementwise; used to lift an `f32` model into the `f64`
    /// gradient-check harness.
    pub fn cast<G: Element>(&self) -> Tensor<G> {
        Tensor {
            shape: self.shape.clone(),
            data: Arc::new(self.data.iter().map(|v| G::from_f64(v.to_f64())).collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn element_count_must_match_shape() {
        assert!(Tensor::<f32>::from_vec(vec![2, 3], vec![0.0; 6]).is_ok());
        assert!(Tensor::<f32>::from_vec(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::<f32>::from_vec(vec![2, 0], vec![]).is_err());
    }

    #[test]
    fn data_mut_copies_only_when_shared() {
        let mut a = Tensor::<f32>::zeros(vec![4]);
        let b = a.clone();
        a.data_mut()[0] = 5.0;
        assert_eq!(a.data()[0], 5.0);
        assert_eq!(b.data()[0], 0.0, "shared buffer must be preserved");
    }

    #[test]
    fn erf_matches_known_points() {
        // erf(0) = 0, erf(1) ≈ 0.8427007929497149, odd symmetry. Calls go
        // through the trait so they keep working if std ever grows f64::erf.
        assert_eq!(Element::erf(0.0f64), 0.0);
        assert!((Element::erf(1.0f64) - 0.842_700_792_949_714_9).abs() < 1e-15);
        assert!((Element::erf(0.5f64) + Element::erf(-0.5f64)).abs() < 1e-15);
    }
}
