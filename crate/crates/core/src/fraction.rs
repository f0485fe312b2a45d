use std::fmt;

use serde::{Deserialize, Serialize};

/// Exact ratio of two pixel counts. Kept unreduced so the original
/// denominator is always recoverable for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl Fraction {
    pub const ONE: Fraction = Fraction { num: 1, den: 1 };
    pub const ZERO: Fraction = Fraction { num: 0, den: 1 };

    /// Panics if `den` is zero or `num > den`.
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den > 0, "fraction with zero denominator");
        assert!(num <= den, "fraction {num}/{den} exceeds one");
        Fraction { num, den }
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Compares by value using cross multiplication.
    pub fn same_value(self, other: Fraction) -> bool {
        self.num as u128 * other.den as u128 == other.num as u128 * self.den as u128
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Running exact (numerator, denominator) pair. Merging is associative and
/// commutative, so totals do not depend on how work was split.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub num: u64,
    pub den: u64,
}

impl Tally {
    pub fn add(&mut self, hit: bool) {
        self.den += 1;
        self.num += hit as u64;
    }

    pub fn merge(mut self, other: Tally) -> Tally {
        self.num += other.num;
        self.den += other.den;
        self
    }

    pub fn fraction(self) -> Option<Fraction> {
        (self.den > 0).then(|| Fraction::new(self.num, self.den))
    }
}

impl std::iter::Sum for Tally {
    fn sum<I: Iterator<Item = Tally>>(iter: I) -> Tally {
        iter.fold(Tally::default(), Tally::merge)
    }
}

/// Mean of exact ratios. The ratios are kept so the mean can be evaluated in
/// a canonical order, which makes it independent of insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RatioMean {
    ratios: Vec<Fraction>,
}

impl RatioMean {
    pub fn push(&mut self, f: Fraction) {
        self.ratios.push(f);
    }

    pub fn extend(&mut self, other: &RatioMean) {
        self.ratios.extend_from_slice(&other.ratios);
    }

    pub fn len(&self) -> usize {
        self.ratios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratios.is_empty()
    }

    pub fn ratios(&self) -> &[Fraction] {
        &self.ratios
    }

    /// `None` when empty.
    pub fn mean(&self) -> Option<f64> {
        if self.ratios.is_empty() {
            return None;
        }
        let mut sorted = self.ratios.clone();
        sorted.sort_unstable_by_key(|f| (f.num, f.den));
        Some(stable_sum(sorted.iter().map(|f| f.value())) / sorted.len() as f64)
    }
}

impl FromIterator<Fraction> for RatioMean {
    fn from_iter<I: IntoIterator<Item = Fraction>>(iter: I) -> Self {
        RatioMean {
            ratios: iter.into_iter().collect(),
        }
    }
}

/// Compensated (Neumaier) summation.
pub fn stable_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
