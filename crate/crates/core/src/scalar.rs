use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the model and inference routines are generic over.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum<Self> + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable in scalar type")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + Sum<T>
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Log-sum-exp over a slice; `-inf` when every entry is `-inf` or the slice is empty.
pub fn log_sum_exp<T: Scalar>(xs: &[T]) -> T {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    let s: T = xs.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

/// Normalizes log-weights in place into probabilities. Falls back to the
/// uniform distribution when every weight is `-inf`.
pub(crate) fn normalize_log_weights<T: Scalar>(logw: &mut [T]) {
    let lse = log_sum_exp(logw);
    if lse == T::neg_infinity() || !lse.is_finite() {
        let u = T::one() / T::from_count(logw.len());
        logw.iter_mut().for_each(|x| *x = u);
        return;
    }
    logw.iter_mut().for_each(|x| *x = (*x - lse).exp());
    let total: T = logw.iter().copied().sum();
    logw.iter_mut().for_each(|x| *x = *x / total);
}
