use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Truncation policy for the infinite class and matrix sums.
///
/// `coefficient_bound` caps the leading coefficient `a` of enumerated
/// quadratic forms and doubles as the maximum matrix height for group
/// sums.  `tail_tolerance` is the target absolute truncation error; the
/// enumerators derive secondary cutoffs (the `b`-width of a class slice,
/// the matrix height) from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SumPolicy {
    pub coefficient_bound: i64,
    pub tail_tolerance: f64,
}

impl SumPolicy {
    pub fn new(coefficient_bound: i64, tail_tolerance: f64) -> Result<Self> {
        if coefficient_bound < 1 {
            return Err(Error::Domain("coefficient_bound must be >= 1".into()));
        }
        if !(tail_tolerance > 0.0) {
            return Err(Error::Domain("tail_tolerance must be > 0".into()));
        }
        Ok(SumPolicy {
            coefficient_bound,
            tail_tolerance,
        })
    }
}

impl Default for SumPolicy {
    fn default() -> Self {
        SumPolicy {
            coefficient_bound: 500,
            tail_tolerance: 1e-9,
        }
    }
}

/// Weight parameter: the forms have weight `2k` with `k >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Weight(pub u32);

impl Weight {
    pub fn new(k: u32) -> Result<Self> {
        if k < 2 {
            return Err(Error::Domain(format!("weight parameter k = {k} must be >= 2")));
        }
        Ok(Weight(k))
    }

    pub fn k(self) -> u32 {
        self.0
    }
}

/// A truncated sum value together with a tail estimate and the number of
/// terms actually summed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub value: Complex64,
    pub tail_bound: f64,
    pub terms_used: usize,
}

impl EvalResult {
    pub fn new(value: Complex64, tail_bound: f64, terms_used: usize) -> Self {
        debug_assert!(tail_bound >= 0.0);
        EvalResult {
            value,
            tail_bound,
            terms_used,
        }
    }
}
