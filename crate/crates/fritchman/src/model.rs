//! Fritchman model data types, validation, sequence generation and
//! stationary statistics.
//!
//! A Fritchman model is a Markov chain over `N` states partitioned into
//! `k` good (error-free) states followed by `N - k` bad (always-error)
//! states, with no transitions between good states. The emission matrix is
//! fully determined by the partition: good states emit `0`, bad states
//! emit `1`, which is why it is derived rather than stored.

use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Tolerance for row/vector stochasticity checks on input models.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// Residual tolerance used internally by the power iteration.
const STATIONARY_TOL: f64 = 1e-12;

/// Iteration budget for the power iteration.
const STATIONARY_MAX_ITERS: usize = 1_000_000;

/// A Fritchman semi-hidden Markov model.
///
/// States `0..n_good` are good, `n_good..n_states` are bad. `transition`
/// is row-stochastic with `transition[i][j]` the probability of moving
/// from state `i` to state `j`; entries between two distinct good states
/// must be zero. `initial` is the initial state distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct FritchmanModel {
    pub n_states: usize,
    pub n_good: usize,
    pub transition: Vec<Vec<f64>>,
    pub initial: Vec<f64>,
}

/// A single structural-constraint violation, with the offending index and
/// value where applicable.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// `n_good` must satisfy `1 <= n_good < n_states`.
    BadPartition { n_states: usize, n_good: usize },
    /// A matrix or vector dimension disagrees with `n_states`.
    Dimension { what: &'static str, got: usize, expected: usize },
    /// A transition row does not sum to 1 within tolerance.
    RowNotStochastic { row: usize, sum: f64 },
    /// A transition entry lies outside `[0, 1]`.
    EntryOutOfRange { row: usize, col: usize, value: f64 },
    /// The initial vector does not sum to 1 within tolerance.
    InitialNotStochastic { sum: f64 },
    /// An initial-vector entry lies outside `[0, 1]`.
    InitialOutOfRange { index: usize, value: f64 },
    /// A transition between two distinct good states is nonzero.
    GoodGoodTransition { row: usize, col: usize, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BadPartition { n_states, n_good } => write!(
                f,
                "partition invalid: n_good = {n_good} must satisfy 1 <= n_good < n_states = {n_states}"
            ),
            Violation::Dimension { what, got, expected } => {
                write!(f, "{what} has dimension {got}, expected {expected}")
            }
            Violation::RowNotStochastic { row, sum } => {
                write!(f, "row {row} not stochastic (sums to {sum})")
            }
            Violation::EntryOutOfRange { row, col, value } => {
                write!(f, "transition ({row},{col}) = {value} outside [0,1]")
            }
            Violation::InitialNotStochastic { sum } => {
                write!(f, "initial vector not stochastic (sums to {sum})")
            }
            Violation::InitialOutOfRange { index, value } => {
                write!(f, "initial[{index}] = {value} outside [0,1]")
            }
            Violation::GoodGoodTransition { row, col, value } => {
                write!(f, "good-good transition nonzero at ({row},{col}): {value}")
            }
        }
    }
}

impl FritchmanModel {
    /// Builds a model and validates it in one step.
    pub fn new(
        n_good: usize,
        transition: Vec<Vec<f64>>,
        initial: Vec<f64>,
    ) -> Result<Self> {
        let model = FritchmanModel {
            n_states: transition.len(),
            n_good,
            transition,
            initial,
        };
        model.check_valid()?;
        Ok(model)
    }

    /// Returns every violated structural constraint; an empty list means
    /// the model is valid. Violations are data, not failures.
    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();
        let n = self.n_states;

        if !(1..n).contains(&self.n_good) || n < 2 {
            violations.push(Violation::BadPartition {
                n_states: n,
                n_good: self.n_good,
            });
        }
        if self.transition.len() != n {
            violations.push(Violation::Dimension {
                what: "transition",
                got: self.transition.len(),
                expected: n,
            });
        }
        for (i, row) in self.transition.iter().enumerate() {
            if row.len() != n {
                violations.push(Violation::Dimension {
                    what: "transition row",
                    got: row.len(),
                    expected: n,
                });
                continue;
            }
            let mut sum = 0.0;
            for (j, &value) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                    violations.push(Violation::EntryOutOfRange { row: i, col: j, value });
                }
                sum += value;
            }
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                violations.push(Violation::RowNotStochastic { row: i, sum });
            }
        }
        if self.initial.len() != n {
            violations.push(Violation::Dimension {
                what: "initial",
                got: self.initial.len(),
                expected: n,
            });
        } else {
            let mut sum = 0.0;
            for (i, &value) in self.initial.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                    violations.push(Violation::InitialOutOfRange { index: i, value });
                }
                sum += value;
            }
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                violations.push(Violation::InitialNotStochastic { sum });
            }
        }
        // No transitions between distinct good states.
        let good = self.n_good.min(self.transition.len());
        for i in 0..good {
            for j in 0..good {
                if i != j {
                    let value = self.transition[i].get(j).copied().unwrap_or(0.0);
                    if value != 0.0 {
                        violations.push(Violation::GoodGoodTransition { row: i, col: j, value });
                    }
                }
            }
        }
        violations
    }

    /// Validation as a `Result`, for operations that must reject invalid
    /// models up front.
    pub fn check_valid(&self) -> Result<()> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidModel(violations))
        }
    }

    /// True when `state` is one of the error-free states.
    pub fn is_good(&self, state: usize) -> bool {
        state < self.n_good
    }

    /// The symbol deterministically emitted by `state`: 0 for good states,
    /// 1 for bad states.
    pub fn emitted_symbol(&self, state: usize) -> u8 {
        u8::from(!self.is_good(state))
    }

    /// Probability that `state` emits `symbol`; the derived two-row
    /// emission matrix, one column per state.
    pub fn emission(&self, symbol: u8, state: usize) -> f64 {
        if self.emitted_symbol(state) == symbol {
            1.0
        } else {
            0.0
        }
    }

    /// Rescales every transition row and the initial vector to sum to 1.
    /// Never done implicitly: callers opt in after inspecting violations.
    pub fn renormalize(&mut self) {
        for row in &mut self.transition {
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                for value in row.iter_mut() {
                    *value /= sum;
                }
            }
        }
        let sum: f64 = self.initial.iter().sum();
        if sum > 0.0 {
            for value in &mut self.initial {
                *value /= sum;
            }
        }
    }
}

/// A binary error sequence: `1` marks a bit received in error, `0` an
/// error-free bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorSequence {
    bits: Vec<u8>,
}

impl ErrorSequence {
    /// Wraps a symbol vector, rejecting anything outside `{0, 1}`.
    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(Error::parse_anon(format!(
                "symbol {} at position {pos} is not 0 or 1",
                bits[pos]
            )));
        }
        Ok(ErrorSequence { bits })
    }

    /// Builds a sequence from an ASCII string of `0`/`1` characters,
    /// ignoring whitespace. Convenient in tests and examples.
    pub fn from_str_symbols(s: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for (pos, c) in s.chars().enumerate() {
            match c {
                '0' => bits.push(0),
                '1' => bits.push(1),
                c if c.is_whitespace() => {}
                c => {
                    return Err(Error::parse_anon(format!(
                        "character {c:?} at position {pos} is not 0, 1 or whitespace"
                    )))
                }
            }
        }
        Ok(ErrorSequence { bits })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        self.bits.iter().copied()
    }

    /// Number of `1` symbols.
    pub fn error_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    /// True when both symbol values occur at least once.
    pub fn has_both_symbols(&self) -> bool {
        let errors = self.error_count();
        errors > 0 && errors < self.bits.len()
    }
}

impl From<ErrorSequence> for Vec<u8> {
    fn from(seq: ErrorSequence) -> Self {
        seq.bits
    }
}

/// Stationary distribution of a model's chain together with the total
/// probability mass on bad states.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryReport {
    /// The stationary vector, summing to 1.
    pub distribution: Vec<f64>,
    /// Sum of the stationary mass over bad states: the long-run error
    /// probability of generated sequences.
    pub error_probability: f64,
    /// Final infinity-norm residual of `pi * A - pi`.
    pub residual: f64,
    /// Set when the error probability is 0 or 1 (within 1e-9): the model
    /// generates one-symbol sequences, for which run statistics downstream
    /// are undefined.
    pub degenerate: bool,
}

/// Computes the stationary distribution by power iteration from the
/// uniform vector and reports the bad-state mass.
///
/// Fails with [`Error::NonConvergent`] when the residual does not reach
/// tolerance within the iteration budget, which signals a reducible or
/// periodic chain.
pub fn stationary_distribution(model: &FritchmanModel) -> Result<StationaryReport> {
    stationary_distribution_with(model, STATIONARY_MAX_ITERS, STATIONARY_TOL)
}

/// Power iteration with an explicit budget and tolerance.
pub fn stationary_distribution_with(
    model: &FritchmanModel,
    max_iterations: usize,
    tolerance: f64,
) -> Result<StationaryReport> {
    model.check_valid()?;
    let n = model.n_states;
    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;

    for _ in 0..max_iterations {
        for value in next.iter_mut() {
            *value = 0.0;
        }
        for (i, &mass) in pi.iter().enumerate() {
            for (j, &a) in model.transition[i].iter().enumerate() {
                next[j] += mass * a;
            }
        }
        // Renormalize against drift before measuring the residual.
        let sum: f64 = next.iter().sum();
        for value in next.iter_mut() {
            *value /= sum;
        }
        residual = pi
            .iter()
            .zip(next.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut pi, &mut next);
        if residual < tolerance {
            let error_probability: f64 = pi[model.n_good..].iter().sum();
            let degenerate =
                error_probability < 1e-9 || error_probability > 1.0 - 1e-9;
            return Ok(StationaryReport {
                distribution: pi,
                error_probability,
                residual,
                degenerate,
            });
        }
    }
    Err(Error::NonConvergent {
        iterations: max_iterations,
        residual,
    })
}

/// Name of the generator backing all sampling in this crate; recorded in
/// run reports so sequences can be reproduced across versions.
pub const RNG_ALGORITHM: &str = "chacha8";

/// Seeded generator used everywhere sampling is needed.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Samples an index from a probability row. Rows are validated to sum to
/// 1 within tolerance; any shortfall is assigned to the last state.
fn sample_index<R: Rng>(rng: &mut R, probabilities: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (index, &p) in probabilities.iter().enumerate() {
        acc += p;
        if u < acc {
            return index;
        }
    }
    probabilities.len() - 1
}

/// Generates an error sequence of `length` symbols from a valid model.
///
/// The initial state is sampled from the model's initial distribution;
/// each step emits the current state's deterministic symbol and then
/// samples the next state from the state's transition row. Identical
/// `(model, length, seed)` triples produce identical output.
pub fn generate_error_sequence(
    model: &FritchmanModel,
    length: usize,
    seed: u64,
) -> Result<ErrorSequence> {
    Ok(generate_with_states(model, length, seed)?.0)
}

/// Like [`generate_error_sequence`], additionally returning the hidden
/// state visited at every step. Useful for checking that each emitted
/// symbol matches its state's class.
pub fn generate_with_states(
    model: &FritchmanModel,
    length: usize,
    seed: u64,
) -> Result<(ErrorSequence, Vec<usize>)> {
    model.check_valid()?;
    let mut rng = seeded_rng(seed);
    let mut bits = Vec::with_capacity(length);
    let mut states = Vec::with_capacity(length);
    if length == 0 {
        return Ok((ErrorSequence { bits }, states));
    }
    let mut state = sample_index(&mut rng, &model.initial);
    for _ in 0..length {
        bits.push(model.emitted_symbol(state));
        states.push(state);
        state = sample_index(&mut rng, &model.transition[state]);
    }
    Ok((ErrorSequence { bits }, states))
}
