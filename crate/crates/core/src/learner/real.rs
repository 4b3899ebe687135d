use std::fmt::{Debug, Display};

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, NumAssign};

/// Floating-point element type of the networks.
///
/// Training runs in `f32`; gradient checks instantiate the same code in `f64`.
pub trait Real:
    Float + NumAssign + LinalgScalar + ScalarOperand + Debug + Display + Default + Send + Sync + 'static
{
    /// Checkpoint dtype tag (element width in bytes).
    const TAG: u8;

    fn lit(v: f64) -> Self;
    fn as_f64(self) -> f64;
    fn put_le(self, out: &mut Vec<u8>);
    fn get_le(bytes: &[u8]) -> Self;

    /// Hidden-layer activation, applied in place.
    fn tanh_in_place(xs: &mut [Self]) {
        xs.iter_mut().for_each(|x| *x = x.tanh());
    }
}

/// Rational minimax approximation of `tanh` for `f32` (odd degree 13 over
/// even degree 6), within a few ulp of the correctly rounded value.
#[inline(always)]
pub fn tanh_f32(x: f32) -> f32 {
    const CLAMP: f32 = 7.905_311;
    let x = x.clamp(-CLAMP, CLAMP);
    let x2 = x * x;
    let mut p = -2.760_768_5e-16f32;
    p = p * x2 + 2.000_187_9e-13;
    p = p * x2 - 8.604_671_5e-11;
    p = p * x2 + 5.122_297e-8;
    p = p * x2 + 1.485_722_4e-5;
    p = p * x2 + 6.372_619_3e-4;
    p = p * x2 + 4.893_524_6e-3;
    let mut q = 1.198_258_4e-6f32;
    q = q * x2 + 1.185_347_1e-4;
    q = q * x2 + 2.268_434_6e-3;
    q = q * x2 + 4.893_525e-3;
    x * p / q
}

impl Real for f32 {
    const TAG: u8 = 4;

    #[inline]
    fn lit(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }

    fn put_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn get_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("4 bytes"))
    }

    fn tanh_in_place(xs: &mut [Self]) {
        xs.iter_mut().for_each(|x| *x = tanh_f32(*x));
    }
}

impl Real for f64 {
    const TAG: u8 = 8;

    #[inline]
    fn lit(v: f64) -> Self {
        v
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }

    fn put_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn get_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8 bytes"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_tanh_tracks_std() {
        let mut worst = 0.0f64;
        for i in -200_000..=200_000 {
            let x = i as f32 * 5e-5;
            let exact = (x as f64).tanh();
            let err = (tanh_f32(x) as f64 - exact).abs() / exact.abs().max(1e-30);
            if x != 0.0 {
                worst = worst.max(err);
            }
        }
        assert!(worst < 1e-6, "{worst:e}");
        assert_eq!(tanh_f32(0.0), 0.0);
        assert!((tanh_f32(1e-30) - 1e-30).abs() < 1e-36);
        assert!((tanh_f32(50.0) - 1.0).abs() < 1e-6);
        assert!((tanh_f32(-50.0) + 1.0).abs() < 1e-6);
    }
}
