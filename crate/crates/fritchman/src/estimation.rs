//! Scaled forward-backward computation and Baum-Welch expectation
//! maximization for Fritchman model parameters.
//!
//! The forward pass normalizes the state mass at every step; the
//! normalization factors `C_t` are the per-step predictive probabilities,
//! so `prod C_t` is the sequence likelihood and `sum log10 C_t` its
//! base-10 log. Scaling is mandatory: unscaled forward variables vanish
//! long before the 1e5-symbol sequences this crate trains on.
//!
//! The emission matrix is structural (good states emit 0, bad states emit
//! 1) and is never re-estimated; only the transition matrix and the
//! initial distribution move. Zero transition entries stay exactly zero
//! because every expected transition count carries its `a_ij` factor.

use crate::error::{Error, Result};
use crate::model::{ErrorSequence, FritchmanModel};

/// Default iteration count for training runs.
pub const DEFAULT_MAX_ITERATIONS: usize = 20;

/// Training parameters: iteration cap, optional early-stop tolerance on
/// the per-iteration log10-likelihood improvement (0 disables the early
/// stop) and the starting model.
#[derive(Debug, Clone)]
pub struct TrainingConfig {
    pub max_iterations: usize,
    pub log_likelihood_tolerance: f64,
    pub initial_model: FritchmanModel,
}

impl TrainingConfig {
    /// Config with the stock initial model, the default 20-iteration cap
    /// and no early stop.
    pub fn with_defaults() -> Self {
        TrainingConfig {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            log_likelihood_tolerance: 0.0,
            initial_model: default_initial_model(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations", "must be at least 1"));
        }
        if !(self.log_likelihood_tolerance >= 0.0) {
            return Err(Error::config(
                "log_likelihood_tolerance",
                "must be nonnegative",
            ));
        }
        self.initial_model.check_valid()
    }
}

/// Outcome of a training run: the trained model plus the log10-likelihood
/// recorded at the start of each completed iteration.
#[derive(Debug, Clone)]
pub struct TrainingReport {
    pub final_model: FritchmanModel,
    /// One value per completed iteration: the log10-likelihood of the
    /// model that entered that iteration. Non-decreasing within numerical
    /// tolerance by the EM guarantee.
    pub log_likelihoods: Vec<f64>,
    pub iterations_run: usize,
    /// First iteration (1-based) whose improvement over the previous one
    /// fell below the tolerance; `None` when the run hit the iteration cap
    /// or the tolerance is 0.
    pub converged_at: Option<usize>,
}

/// Scaled forward variables: `alpha[t]` sums to 1 at every step and
/// `factors[t]` is the predictive probability of symbol `t` given the
/// prefix before it.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub alpha: Vec<Vec<f64>>,
    pub factors: Vec<f64>,
}

impl ForwardPass {
    /// Base-10 log-likelihood of the whole sequence: `sum log10 C_t`.
    pub fn log10_likelihood(&self) -> f64 {
        self.factors.iter().map(|c| c.log10()).sum()
    }
}

/// Runs the scaled forward recursion.
///
/// Fails with [`Error::ImpossibleObservation`] at the first step whose
/// predictive probability is zero, e.g. an error symbol under a model
/// whose reachable states are all good.
pub fn forward_scaled(model: &FritchmanModel, seq: &ErrorSequence) -> Result<ForwardPass> {
    model.check_valid()?;
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    let n = model.n_states;
    let t_len = seq.len();
    let bits = seq.bits();
    let mut alpha = vec![vec![0.0; n]; t_len];
    let mut factors = vec![0.0; t_len];

    let mut c = 0.0;
    for j in 0..n {
        let mass = model.initial[j] * model.emission(bits[0], j);
        alpha[0][j] = mass;
        c += mass;
    }
    if c == 0.0 {
        return Err(Error::ImpossibleObservation { t: 1 });
    }
    factors[0] = c;
    for value in alpha[0].iter_mut() {
        *value /= c;
    }

    for t in 1..t_len {
        let (before, after) = alpha.split_at_mut(t);
        let prev = &before[t - 1];
        let cur = &mut after[0];
        let mut c = 0.0;
        for j in 0..n {
            if model.emission(bits[t], j) == 0.0 {
                cur[j] = 0.0;
                continue;
            }
            let mut mass = 0.0;
            for i in 0..n {
                mass += prev[i] * model.transition[i][j];
            }
            cur[j] = mass;
            c += mass;
        }
        if c == 0.0 {
            return Err(Error::ImpossibleObservation { t: t + 1 });
        }
        factors[t] = c;
        for value in cur.iter_mut() {
            *value /= c;
        }
    }
    Ok(ForwardPass { alpha, factors })
}

/// Runs the scaled backward recursion using the forward pass's factors.
///
/// The returned `beta[t]` combine with the forward `alpha[t]` into
/// per-step state posteriors that sum to 1.
pub fn backward_scaled(
    model: &FritchmanModel,
    seq: &ErrorSequence,
    factors: &[f64],
) -> Result<Vec<Vec<f64>>> {
    model.check_valid()?;
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    if factors.len() != seq.len() {
        return Err(Error::LengthMismatch {
            what: "scaling factors",
            got: factors.len(),
            expected: seq.len(),
        });
    }
    let n = model.n_states;
    let t_len = seq.len();
    let bits = seq.bits();
    let mut beta = vec![vec![0.0; n]; t_len];
    beta[t_len - 1].fill(1.0);

    for t in (0..t_len - 1).rev() {
        let (before, after) = beta.split_at_mut(t + 1);
        let next = &after[0];
        let cur = &mut before[t];
        let c = factors[t + 1];
        for i in 0..n {
            let mut mass = 0.0;
            for j in 0..n {
                mass += model.transition[i][j] * model.emission(bits[t + 1], j) * next[j];
            }
            cur[i] = mass / c;
        }
    }
    Ok(beta)
}

/// Per-step state posteriors from matched scaled forward/backward passes.
pub fn state_posteriors(forward: &ForwardPass, beta: &[Vec<f64>]) -> Vec<Vec<f64>> {
    forward
        .alpha
        .iter()
        .zip(beta.iter())
        .map(|(a_row, b_row)| {
            let mut row: Vec<f64> = a_row.iter().zip(b_row.iter()).map(|(a, b)| a * b).collect();
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                for value in row.iter_mut() {
                    *value /= sum;
                }
            }
            row
        })
        .collect()
}

/// One expectation-maximization step.
///
/// Returns the re-estimated model together with the log10-likelihood of
/// the *input* model on the sequence. The transition matrix and initial
/// distribution are re-estimated from expected counts; the emission
/// matrix is fixed by the good/bad partition. A state with zero expected
/// occupancy keeps its previous transition row.
pub fn em_step(
    model: &FritchmanModel,
    seq: &ErrorSequence,
) -> Result<(FritchmanModel, f64)> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    if !seq.has_both_symbols() {
        let symbol = if seq.error_count() == 0 { 0 } else { 1 };
        return Err(Error::DegenerateSequence { symbol });
    }
    let forward = forward_scaled(model, seq)?;
    let beta = backward_scaled(model, seq, &forward.factors)?;
    let log10_likelihood = forward.log10_likelihood();

    let n = model.n_states;
    let t_len = seq.len();
    let bits = seq.bits();

    // Expected transition counts xi summed over t, row by row.
    let mut xi_sum = vec![vec![0.0; n]; n];
    for t in 0..t_len - 1 {
        let c_next = forward.factors[t + 1];
        for i in 0..n {
            let a_it = forward.alpha[t][i];
            if a_it == 0.0 {
                continue;
            }
            for j in 0..n {
                let a_ij = model.transition[i][j];
                if a_ij == 0.0 {
                    continue;
                }
                let term =
                    a_it * a_ij * model.emission(bits[t + 1], j) * beta[t + 1][j] / c_next;
                xi_sum[i][j] += term;
            }
        }
    }

    let mut transition = Vec::with_capacity(n);
    for i in 0..n {
        let occupancy: f64 = xi_sum[i].iter().sum();
        if occupancy == 0.0 {
            // State never visited in posterior expectation: keep its row.
            transition.push(model.transition[i].clone());
        } else {
            transition.push(xi_sum[i].iter().map(|&x| x / occupancy).collect());
        }
    }

    // New initial distribution: the state posterior at t = 1.
    let mut initial: Vec<f64> =
        forward.alpha[0].iter().zip(beta[0].iter()).map(|(a, b)| a * b).collect();
    let sum: f64 = initial.iter().sum();
    if sum > 0.0 {
        for value in initial.iter_mut() {
            *value /= sum;
        }
    }

    let updated = FritchmanModel {
        n_states: n,
        n_good: model.n_good,
        transition,
        initial,
    };
    updated.check_valid()?;
    Ok((updated, log10_likelihood))
}

/// Runs Baum-Welch until the iteration cap or the early-stop tolerance.
///
/// Iteration `i` records the log10-likelihood of the model entering it,
/// then applies the EM update. With a positive tolerance, training stops
/// after the first iteration whose recorded likelihood improved on the
/// previous one by less than the tolerance; that iteration's update is
/// still applied.
pub fn train(config: &TrainingConfig, seq: &ErrorSequence) -> Result<TrainingReport> {
    config.validate()?;
    let mut model = config.initial_model.clone();
    let mut log_likelihoods = Vec::with_capacity(config.max_iterations);
    let mut converged_at = None;

    for iteration in 1..=config.max_iterations {
        let (updated, log10_likelihood) = em_step(&model, seq)?;
        model = updated;
        if let Some(&previous) = log_likelihoods.last() {
            if config.log_likelihood_tolerance > 0.0
                && log10_likelihood - previous < config.log_likelihood_tolerance
            {
                log_likelihoods.push(log10_likelihood);
                converged_at = Some(iteration);
                break;
            }
        }
        log_likelihoods.push(log10_likelihood);
    }

    Ok(TrainingReport {
        final_model: model,
        iterations_run: log_likelihoods.len(),
        log_likelihoods,
        converged_at,
    })
}

/// The stock three-state starting point for Baum-Welch runs: two good
/// states, one bad state, mildly asymmetric rows so the good states can
/// differentiate during training.
pub fn default_initial_model() -> FritchmanModel {
    FritchmanModel {
        n_states: 3,
        n_good: 2,
        transition: vec![
            vec![0.9, 0.0, 0.1],
            vec![0.0, 0.8, 0.2],
            vec![0.1, 0.7, 0.2],
        ],
        initial: vec![0.4, 0.4, 0.2],
    }
}
