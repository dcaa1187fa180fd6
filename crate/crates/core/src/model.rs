//! Worker–task interaction kernel.
//!
//! A worker of ability `e` answering a task of difficulty `d` with `k`
//! candidate labels picks the true label with probability
//!
//! ```text
//! p = d / k + (1 - d) * e^d
//! ```
//!
//! and otherwise spreads the remaining mass evenly over the `k - 1` wrong
//! labels. Easy tasks (`d = 0`) are answered correctly by everyone, the
//! hardest tasks (`d = 1`) reduce every worker to a random guess.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Smallest ability value; keeps `e^d` away from the `0^0` corner.
pub const ABILITY_FLOOR: f64 = 1e-6;

/// Difficulty at which tasks separate workers best, and where the ability
/// weight peaks.
pub const WEIGHT_PEAK: f64 = 0.4;

/// Index of a candidate label in `[0, k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct LabelId(pub usize);

impl LabelId {
    pub fn new(value: usize, k: usize) -> Result<Self> {
        if value < k {
            Ok(LabelId(value))
        } else {
            Err(Error::InvalidLabel { label: value, k })
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

/// Worker ability, kept in `[ABILITY_FLOOR, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Ability<T>(T);

impl<T: Scalar> Ability<T> {
    /// Validates `value ∈ [0, 1]` and lifts it to the ability floor.
    pub fn new(value: T) -> Result<Self> {
        if !(value >= T::zero() && value <= T::one()) {
            return Err(Error::OutOfRange {
                what: "ability",
                value: value.as_f64(),
                range: "[0, 1]",
            });
        }
        Ok(Self::clamped(value))
    }

    /// Clamps any value into `[ABILITY_FLOOR, 1]`. NaN maps to the floor.
    #[inline]
    pub fn clamped(value: T) -> Self {
        let floor = T::lit(ABILITY_FLOOR);
        if value.is_nan() {
            return Ability(floor);
        }
        Ability(value.max(floor).min(T::one()))
    }

    #[inline]
    pub fn get(self) -> T {
        self.0
    }
}

/// Task difficulty in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Difficulty<T>(T);

impl<T: Scalar> Difficulty<T> {
    pub fn new(value: T) -> Result<Self> {
        if value >= T::zero() && value <= T::one() {
            Ok(Difficulty(value))
        } else {
            Err(Error::OutOfRange {
                what: "difficulty",
                value: value.as_f64(),
                range: "[0, 1]",
            })
        }
    }

    #[inline]
    pub(crate) fn clamped(value: T) -> Self {
        Difficulty(value.max(T::zero()).min(T::one()))
    }

    #[inline]
    pub fn get(self) -> T {
        self.0
    }
}

/// Probability that a worker's answer is the true label; lies in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Confidence<T>(T);

impl<T: Scalar> Confidence<T> {
    pub fn new(value: T) -> Result<Self> {
        if value > T::zero() && value <= T::one() {
            Ok(Confidence(value))
        } else {
            Err(Error::OutOfRange {
                what: "confidence",
                value: value.as_f64(),
                range: "(0, 1]",
            })
        }
    }

    #[inline]
    pub fn get(self) -> T {
        self.0
    }
}

#[inline]
pub(crate) fn check_k(k: usize) -> Result<()> {
    if k < 2 {
        Err(Error::LabelSpace(k))
    } else {
        Ok(())
    }
}

/// Raw interaction function; callers guarantee the argument ranges.
#[inline]
pub(crate) fn confidence_value<T: Scalar>(d: T, e: T, k: usize) -> T {
    let chance = T::one() / T::from_count(k);
    d * chance + (T::one() - d) * e.powf(d)
}

/// Probability that a worker of ability `e` answers a task of difficulty `d`
/// correctly.
pub fn confidence<T: Scalar>(d: Difficulty<T>, e: Ability<T>, k: usize) -> Result<Confidence<T>> {
    check_k(k)?;
    Ok(Confidence(confidence_value(d.get(), e.get(), k)))
}

/// Probability of observing annotation `a` when the true label is `truth`.
pub fn annotation_likelihood<T: Scalar>(
    a: LabelId,
    truth: LabelId,
    p: Confidence<T>,
    k: usize,
) -> Result<T> {
    check_k(k)?;
    LabelId::new(a.0, k)?;
    LabelId::new(truth.0, k)?;
    Ok(likelihood_value(a == truth, p.get(), k))
}

#[inline]
pub(crate) fn likelihood_value<T: Scalar>(matches: bool, p: T, k: usize) -> T {
    if matches {
        p
    } else {
        (T::one() - p) / T::from_count(k - 1)
    }
}

/// Natural log of the annotation likelihood, `-inf` for impossible events.
#[inline]
pub(crate) fn log_likelihood_value<T: Scalar>(matches: bool, p: T, k: usize) -> T {
    let v = likelihood_value(matches, p, k);
    if v > T::zero() {
        v.ln()
    } else {
        T::neg_infinity()
    }
}

/// Tent-shaped weight of a task's contribution to a worker's ability:
/// 1 at `d = 0.4`, falling linearly to 0 at both ends.
pub fn difficulty_weight<T: Scalar>(d: Difficulty<T>) -> T {
    weight_value(d.get())
}

#[inline]
pub(crate) fn weight_value<T: Scalar>(d: T) -> T {
    let peak = T::lit(WEIGHT_PEAK);
    if d >= peak {
        T::one() - (d - peak) / (T::one() - peak)
    } else {
        T::one() - (peak - d) / peak
    }
}

/// Gap in correct-answer probability between two workers on a task of
/// difficulty `d`: `(1 - d) (e1^d - e2^d)`. Analysis only.
pub fn discriminability<T: Scalar>(e1: T, e2: T, d: Difficulty<T>) -> Result<T> {
    if !(e1 < T::one() && e1 > e2 && e2 > T::zero()) {
        return Err(Error::AbilityOrder {
            e1: e1.as_f64(),
            e2: e2.as_f64(),
        });
    }
    let d = d.get();
    Ok((T::one() - d) * (e1.powf(d) - e2.powf(d)))
}

/// Difficulty in `[0, 1]` maximizing [`discriminability`], by grid search.
pub fn most_discriminating_difficulty<T: Scalar>(e1: T, e2: T, step: T) -> Result<T> {
    let steps = (T::one() / step).round().to_usize().unwrap_or(0).max(1);
    let mut best = (T::zero(), T::neg_infinity());
    for i in 0..=steps {
        let d = T::from_count(i) / T::from_count(steps);
        let f = discriminability(e1, e2, Difficulty(d))?;
        if f > best.1 {
            best = (d, f);
        }
    }
    Ok(best.0)
}
