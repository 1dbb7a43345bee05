//! Error-sequence statistics: error probability, inter-error gaps, the
//! error-free run distribution Pr(0^m | 1), IID baselines and the
//! chi-squared / mean-squared-error goodness of fit between run curves.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{seeded_rng, ErrorSequence};

/// Smallest candidate value admitted as a chi-squared denominator.
pub const CHI2_DENOMINATOR_FLOOR: f64 = 1e-6;

/// Error-free run distribution: `values[m]` estimates the probability
/// that an error is followed by `m` or more error-free symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct EfrdCurve {
    /// `values[m] = Pr(0^m | 1)` for `m = 0..=max_m`; `values[0]` is 1 and
    /// the sequence is non-increasing.
    pub values: Vec<f64>,
    /// Number of completed inter-error gaps behind the estimate.
    pub gap_count: usize,
    /// Largest `m` with a defined estimate.
    pub max_m: usize,
}

impl EfrdCurve {
    /// Builds the curve from a list of completed gap lengths.
    pub fn from_gaps(gaps: &[usize]) -> Result<Self> {
        if gaps.is_empty() {
            return Err(Error::UndefinedEfrd { errors: 0 });
        }
        let longest = *gaps.iter().max().expect("nonempty");
        let max_m = longest + 1;
        // Count of gaps >= m via a reverse cumulative histogram.
        let mut at_least = vec![0usize; max_m + 1];
        for &gap in gaps {
            at_least[gap] += 1;
        }
        let mut running = 0usize;
        let mut values = vec![0.0; max_m + 1];
        for m in (0..=max_m).rev() {
            running += if m < at_least.len() { at_least[m] } else { 0 };
            values[m] = running as f64 / gaps.len() as f64;
        }
        Ok(EfrdCurve {
            values,
            gap_count: gaps.len(),
            max_m,
        })
    }
}

/// Goodness-of-fit numbers between a reference curve and a candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub chi_squared: f64,
    pub mse: f64,
    /// Inclusive index interval actually compared.
    pub m_range_used: (usize, usize),
}

/// Fraction of symbols that are errors.
pub fn error_probability(seq: &ErrorSequence) -> Result<f64> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    Ok(seq.error_count() as f64 / seq.len() as f64)
}

/// Lengths of the error-free runs strictly between consecutive errors.
///
/// Consecutive errors produce a gap of 0. The leading run before the
/// first error and the censored trailing run after the last one are
/// excluded. Fewer than two errors yield an empty list.
pub fn error_gaps(seq: &ErrorSequence) -> Vec<usize> {
    let mut gaps = Vec::new();
    let mut previous_error: Option<usize> = None;
    for (index, bit) in seq.iter().enumerate() {
        if bit == 1 {
            if let Some(prev) = previous_error {
                gaps.push(index - prev - 1);
            }
            previous_error = Some(index);
        }
    }
    gaps
}

/// Empirical error-free run distribution of a sequence.
///
/// `values[m]` is the fraction of completed gaps of length at least `m`,
/// for `m` up to one past the longest observed gap. Requires at least two
/// errors; sequences with fewer carry no completed gap and the
/// distribution is undefined (distinguishing "model perfect" from
/// "no data").
pub fn efrd(seq: &ErrorSequence) -> Result<EfrdCurve> {
    let gaps = error_gaps(seq);
    if gaps.is_empty() {
        return Err(Error::UndefinedEfrd {
            errors: seq.error_count(),
        });
    }
    EfrdCurve::from_gaps(&gaps)
}

/// Generates a memoryless error sequence: each symbol independently 1
/// with probability `pe`. Deterministic per seed.
pub fn generate_iid(pe: f64, length: usize, seed: u64) -> Result<ErrorSequence> {
    if !(0.0..=1.0).contains(&pe) {
        return Err(Error::config("pe", "must lie in [0, 1]"));
    }
    let mut rng = seeded_rng(seed);
    let bits = (0..length)
        .map(|_| u8::from(rng.random::<f64>() < pe))
        .collect();
    Ok(ErrorSequence::from_bits(bits).expect("symbols are 0/1 by construction"))
}

/// Chi-squared and mean-squared error between two run curves over the
/// shared index range `1..=min(max_m)`.
///
/// The chi-squared sum uses the candidate as the expected term and skips
/// indices where the candidate drops below [`CHI2_DENOMINATOR_FLOOR`].
/// The MSE averages over the whole shared range. Index 0 is excluded:
/// both curves are identically 1 there.
pub fn fit_metrics(reference: &EfrdCurve, candidate: &EfrdCurve) -> Result<FitReport> {
    let upper = reference.max_m.min(candidate.max_m);
    if upper < 1 {
        return Err(Error::EmptyRange);
    }
    let mut chi_squared = 0.0;
    let mut squared_sum = 0.0;
    for m in 1..=upper {
        let diff = reference.values[m] - candidate.values[m];
        squared_sum += diff * diff;
        if candidate.values[m] >= CHI2_DENOMINATOR_FLOOR {
            chi_squared += diff * diff / candidate.values[m];
        }
    }
    Ok(FitReport {
        chi_squared,
        mse: squared_sum / upper as f64,
        m_range_used: (1, upper),
    })
}
