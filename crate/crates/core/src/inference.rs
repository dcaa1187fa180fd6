//! Iterative inference of task labels, task difficulties and worker
//! abilities.
//!
//! Each round first recomputes the label posteriors from the previous
//! round's difficulties and abilities, then re-derives difficulties as the
//! per-task error rate against the new labels, and finally re-derives
//! abilities as a difficulty-weighted correct rate.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{
    check_k, confidence_value, log_likelihood_value, weight_value, Ability, Difficulty, LabelId,
};
use crate::scalar::{log_sum_exp, normalize_log_weights, Scalar};

/// Posterior denominators below this fall back to the unweighted rate.
pub const WEIGHT_EPSILON: f64 = 1e-9;

/// Tie window of [`LabelPosterior::argmax`], in machine epsilons.
pub const TIE_ULPS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InitMethod {
    #[default]
    Mv,
    Wmv,
}

impl std::str::FromStr for InitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mv" => Ok(InitMethod::Mv),
            "wmv" => Ok(InitMethod::Wmv),
            other => Err(Error::Config(format!("unknown init method `{other}`"))),
        }
    }
}

/// How the difficulty and ability updates score an annotation: against the
/// argmax label (`Hard`) or by the posterior mass on the annotated label
/// (`Soft`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LabelUpdate {
    #[default]
    Hard,
    Soft,
}

impl std::str::FromStr for LabelUpdate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hard" => Ok(LabelUpdate::Hard),
            "soft" => Ok(LabelUpdate::Soft),
            other => Err(Error::Config(format!("unknown label update `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub init_method: InitMethod,
    pub max_iters: usize,
    /// Stop once the largest parameter change of a round drops below this.
    pub tolerance: f64,
    pub label_update: LabelUpdate,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            init_method: InitMethod::Mv,
            max_iters: 100,
            tolerance: 1e-4,
            label_update: LabelUpdate::Hard,
        }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Distribution over the `k` candidate labels of one task.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelPosterior<T> {
    probs: Vec<T>,
}

impl<T: Scalar> LabelPosterior<T> {
    /// Normalizes nonnegative weights. All-zero weights give the uniform
    /// distribution.
    pub fn from_weights(mut weights: Vec<T>) -> Self {
        let total: T = weights.iter().copied().sum();
        if total > T::zero() && total.is_finite() {
            weights.iter_mut().for_each(|w| *w = *w / total);
        } else {
            let u = T::one() / T::from_count(weights.len());
            weights.iter_mut().for_each(|w| *w = u);
        }
        LabelPosterior { probs: weights }
    }

    pub(crate) fn from_log_weights(mut logw: Vec<T>) -> Self {
        normalize_log_weights(&mut logw);
        LabelPosterior { probs: logw }
    }

    pub fn uniform(k: usize) -> Self {
        LabelPosterior {
            probs: vec![T::one() / T::from_count(k); k],
        }
    }

    pub fn one_hot(label: LabelId, k: usize) -> Self {
        let mut probs = vec![T::zero(); k];
        probs[label.0] = T::one();
        LabelPosterior { probs }
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    #[inline]
    pub fn prob(&self, label: LabelId) -> T {
        self.probs[label.0]
    }

    /// Most probable label; ties go to the smallest index. Probabilities
    /// within [`TIE_ULPS`] machine epsilons of each other count as tied, so
    /// algebraically equal weights summed in a different order still tie.
    pub fn argmax(&self) -> LabelId {
        let slack = T::epsilon() * T::from_count(TIE_ULPS);
        let mut best = 0;
        for (c, &p) in self.probs.iter().enumerate().skip(1) {
            if p > self.probs[best] + slack {
                best = c;
            }
        }
        LabelId(best)
    }
}

/// Per-round diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iteration: usize,
    pub max_delta_difficulty: f64,
    pub max_delta_ability: f64,
    pub log_likelihood: f64,
}

/// Current estimates, indexed like the dataset's tasks and workers.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceState<T> {
    pub posteriors: Vec<LabelPosterior<T>>,
    pub difficulties: Vec<Difficulty<T>>,
    pub abilities: Vec<Ability<T>>,
    pub iteration: usize,
    pub converged: bool,
    pub trace: Vec<IterationTrace>,
}

impl<T: Scalar> InferenceState<T> {
    pub fn labels(&self) -> Vec<LabelId> {
        hard_labels(&self.posteriors)
    }

    /// Fills difficulties and abilities from unweighted error and correct
    /// rates against the argmax of `posteriors`.
    pub(crate) fn from_posteriors(
        dataset: &Dataset,
        posteriors: Vec<LabelPosterior<T>>,
        iteration: usize,
        converged: bool,
    ) -> Result<Self> {
        let labels = hard_labels(&posteriors);
        Ok(InferenceState {
            difficulties: update_difficulties(dataset, &labels)?,
            abilities: correct_rates(dataset, &labels),
            posteriors,
            iteration,
            converged,
            trace: Vec::new(),
        })
    }
}

/// Vote tallies per task, each worker's vote scaled by `weights[worker]`,
/// normalized into a posterior.
pub fn weighted_vote<T: Scalar>(dataset: &Dataset, weights: &[T]) -> Vec<LabelPosterior<T>> {
    debug_assert_eq!(weights.len(), dataset.num_workers());
    let k = dataset.k();
    (0..dataset.num_tasks())
        .map(|i| {
            let mut tally = vec![T::zero(); k];
            for a in dataset.task_annotations(i) {
                tally[a.label.0] = tally[a.label.0] + weights[a.worker];
            }
            LabelPosterior::from_weights(tally)
        })
        .collect()
}

/// Plain majority-vote fractions.
pub fn majority_vote<T: Scalar>(dataset: &Dataset) -> Vec<LabelPosterior<T>> {
    weighted_vote(dataset, &vec![T::one(); dataset.num_workers()])
}

/// Argmax label per task, smallest index on ties.
pub fn hard_labels<T: Scalar>(posteriors: &[LabelPosterior<T>]) -> Vec<LabelId> {
    posteriors.iter().map(LabelPosterior::argmax).collect()
}

fn check_labels(dataset: &Dataset, labels: &[LabelId]) -> Result<()> {
    if labels.len() != dataset.num_tasks() {
        return Err(Error::Config(format!(
            "{} labels for {} tasks",
            labels.len(),
            dataset.num_tasks()
        )));
    }
    for l in labels {
        LabelId::new(l.0, dataset.k())?;
    }
    Ok(())
}

fn rates_by_task<T: Scalar>(
    dataset: &Dataset,
    credit: impl Fn(usize, LabelId) -> T,
) -> Result<Vec<Difficulty<T>>> {
    (0..dataset.num_tasks())
        .map(|i| {
            let n = dataset.task_degree(i);
            if n == 0 {
                return Err(Error::EmptyTask(dataset.tasks()[i].clone()));
            }
            let hits: T = dataset
                .task_annotations(i)
                .map(|a| credit(i, a.label))
                .sum();
            Ok(Difficulty::clamped(T::one() - hits / T::from_count(n)))
        })
        .collect()
}

/// Task difficulty as the fraction of its annotations that disagree with
/// the task's label.
pub fn update_difficulties<T: Scalar>(
    dataset: &Dataset,
    labels: &[LabelId],
) -> Result<Vec<Difficulty<T>>> {
    check_labels(dataset, labels)?;
    rates_by_task(dataset, |i, a| indicator(a == labels[i]))
}

/// Difficulty as one minus the mean posterior mass on the annotated labels.
pub fn update_difficulties_soft<T: Scalar>(
    dataset: &Dataset,
    posteriors: &[LabelPosterior<T>],
) -> Result<Vec<Difficulty<T>>> {
    rates_by_task(dataset, |i, a| posteriors[i].prob(a))
}

#[inline]
fn indicator<T: Scalar>(b: bool) -> T {
    if b {
        T::one()
    } else {
        T::zero()
    }
}

/// Unweighted worker correct rate against `labels`.
pub fn correct_rates<T: Scalar>(dataset: &Dataset, labels: &[LabelId]) -> Vec<Ability<T>> {
    (0..dataset.num_workers())
        .map(|j| {
            let n = dataset.worker_degree(j);
            let hits: T = dataset
                .worker_annotations(j)
                .map(|a| indicator::<T>(a.label == labels[a.task]))
                .sum();
            Ability::clamped(hits / T::from_count(n.max(1)))
        })
        .collect()
}

fn weighted_rates<T: Scalar>(
    dataset: &Dataset,
    difficulties: &[Difficulty<T>],
    credit: impl Fn(usize, LabelId) -> T,
) -> Vec<Ability<T>> {
    let eps = T::lit(WEIGHT_EPSILON);
    (0..dataset.num_workers())
        .map(|j| {
            let weights: Vec<T> = dataset
                .worker_annotations(j)
                .map(|a| weight_value(difficulties[a.task].get()))
                .collect();
            let total: T = weights.iter().copied().sum();
            if total < eps {
                let plain: T = dataset
                    .worker_annotations(j)
                    .map(|a| credit(a.task, a.label))
                    .sum();
                return Ability::clamped(plain / T::from_count(dataset.worker_degree(j).max(1)));
            }
            // rescaled by the largest weight so equal weights count exactly 1
            let top = weights.iter().copied().fold(T::zero(), T::max);
            let (mut num, mut den) = (T::zero(), T::zero());
            for (a, w) in dataset.worker_annotations(j).zip(&weights) {
                let w = *w / top;
                num = num + w * credit(a.task, a.label);
                den = den + w;
            }
            Ability::clamped(num / den)
        })
        .collect()
}

/// Worker ability as the correct rate over annotated tasks, each task
/// weighted by [`crate::model::difficulty_weight`] of its difficulty. A
/// worker whose tasks all carry zero weight gets the unweighted rate.
pub fn update_abilities<T: Scalar>(
    dataset: &Dataset,
    labels: &[LabelId],
    difficulties: &[Difficulty<T>],
) -> Result<Vec<Ability<T>>> {
    check_labels(dataset, labels)?;
    check_len("difficulties", difficulties.len(), dataset.num_tasks())?;
    Ok(weighted_rates(dataset, difficulties, |i, a| {
        indicator(a == labels[i])
    }))
}

/// Soft counterpart of [`update_abilities`].
pub fn update_abilities_soft<T: Scalar>(
    dataset: &Dataset,
    posteriors: &[LabelPosterior<T>],
    difficulties: &[Difficulty<T>],
) -> Result<Vec<Ability<T>>> {
    check_len("difficulties", difficulties.len(), dataset.num_tasks())?;
    Ok(weighted_rates(dataset, difficulties, |i, a| {
        posteriors[i].prob(a)
    }))
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{what}: expected {want} entries, got {got}"
        )))
    }
}

/// Log of the joint likelihood of task `i`'s annotations for every candidate
/// label, uniform prior included.
fn task_log_weights<T: Scalar>(
    dataset: &Dataset,
    i: usize,
    difficulty: T,
    abilities: &[Ability<T>],
) -> Vec<T> {
    let k = dataset.k();
    let prior = -T::from_count(k).ln();
    let mut logw = vec![prior; k];
    for a in dataset.task_annotations(i) {
        let p = confidence_value(difficulty, abilities[a.worker].get(), k);
        for (c, w) in logw.iter_mut().enumerate() {
            *w = *w + log_likelihood_value(a.label.0 == c, p, k);
        }
    }
    logw
}

/// Label posteriors for every task given difficulties and abilities.
pub fn estep_posteriors<T: Scalar>(
    dataset: &Dataset,
    difficulties: &[Difficulty<T>],
    abilities: &[Ability<T>],
) -> Result<Vec<LabelPosterior<T>>> {
    check_k(dataset.k())?;
    check_len("difficulties", difficulties.len(), dataset.num_tasks())?;
    check_len("abilities", abilities.len(), dataset.num_workers())?;
    Ok((0..dataset.num_tasks())
        .map(|i| {
            LabelPosterior::from_log_weights(task_log_weights(
                dataset,
                i,
                difficulties[i].get(),
                abilities,
            ))
        })
        .collect())
}

/// Log marginal likelihood of the observed annotations.
pub fn log_likelihood<T: Scalar>(dataset: &Dataset, state: &InferenceState<T>) -> Result<T> {
    log_likelihood_of(dataset, &state.difficulties, &state.abilities)
}

pub fn log_likelihood_of<T: Scalar>(
    dataset: &Dataset,
    difficulties: &[Difficulty<T>],
    abilities: &[Ability<T>],
) -> Result<T> {
    check_len("difficulties", difficulties.len(), dataset.num_tasks())?;
    check_len("abilities", abilities.len(), dataset.num_workers())?;
    Ok((0..dataset.num_tasks())
        .filter(|&i| dataset.task_degree(i) > 0)
        .map(|i| {
            log_sum_exp(&task_log_weights(
                dataset,
                i,
                difficulties[i].get(),
                abilities,
            ))
        })
        .sum())
}

/// Runs the count/weight loop of weighted majority voting until the worker
/// weights stop moving. Returns the final vote fractions, weights and the
/// number of rounds.
pub(crate) fn wmv_fixed_point<T: Scalar>(
    dataset: &Dataset,
    config: &InferenceConfig,
) -> (Vec<LabelPosterior<T>>, Vec<Ability<T>>, usize, bool) {
    let tol = T::lit(config.tolerance);
    let mut weights = vec![T::one(); dataset.num_workers()];
    let mut posteriors = weighted_vote(dataset, &weights);
    for round in 1..=config.max_iters {
        let labels = hard_labels(&posteriors);
        let next: Vec<T> = correct_rates::<T>(dataset, &labels)
            .into_iter()
            .map(Ability::get)
            .collect();
        let delta = max_abs_diff(&weights, &next);
        weights = next;
        posteriors = weighted_vote(dataset, &weights);
        if delta < tol {
            let abilities = weights.into_iter().map(Ability::clamped).collect();
            return (posteriors, abilities, round, true);
        }
    }
    let abilities = weights.into_iter().map(Ability::clamped).collect();
    (posteriors, abilities, config.max_iters, false)
}

fn max_abs_diff<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(x, y)| (*x - *y).abs())
        .fold(T::zero(), T::max)
}

/// Starting point: labels from (weighted) majority vote, difficulties from
/// error rates and abilities from unweighted correct rates.
pub fn initialize<T: Scalar>(
    dataset: &Dataset,
    method: InitMethod,
    config: &InferenceConfig,
) -> Result<InferenceState<T>> {
    dataset.require_annotated_tasks()?;
    let posteriors = match method {
        InitMethod::Mv => majority_vote(dataset),
        InitMethod::Wmv => wmv_fixed_point(dataset, config).0,
    };
    InferenceState::from_posteriors(dataset, posteriors, 0, false)
}

/// Full inference loop. Always terminates within `config.max_iters` rounds.
pub fn run_wtim<T: Scalar>(
    dataset: &Dataset,
    config: &InferenceConfig,
) -> Result<InferenceState<T>> {
    config.validate()?;
    let mut state: InferenceState<T> = initialize(dataset, config.init_method, config)?;
    let tol = T::lit(config.tolerance);
    for round in 1..=config.max_iters {
        let posteriors = estep_posteriors(dataset, &state.difficulties, &state.abilities)?;
        let (difficulties, abilities) = match config.label_update {
            LabelUpdate::Hard => {
                let labels = hard_labels(&posteriors);
                let d = update_difficulties(dataset, &labels)?;
                let e = update_abilities(dataset, &labels, &d)?;
                (d, e)
            }
            LabelUpdate::Soft => {
                let d = update_difficulties_soft(dataset, &posteriors)?;
                let e = update_abilities_soft(dataset, &posteriors, &d)?;
                (d, e)
            }
        };
        let dd = max_abs_diff(
            &state
                .difficulties
                .iter()
                .map(|d| d.get())
                .collect::<Vec<_>>(),
            &difficulties.iter().map(|d| d.get()).collect::<Vec<_>>(),
        );
        let de = max_abs_diff(
            &state.abilities.iter().map(|e| e.get()).collect::<Vec<_>>(),
            &abilities.iter().map(|e| e.get()).collect::<Vec<_>>(),
        );
        state.posteriors = posteriors;
        state.difficulties = difficulties;
        state.abilities = abilities;
        state.iteration = round;
        state.trace.push(IterationTrace {
            iteration: round,
            max_delta_difficulty: dd.as_f64(),
            max_delta_ability: de.as_f64(),
            log_likelihood: log_likelihood(dataset, &state)?.as_f64(),
        });
        if dd < tol && de < tol {
            state.converged = true;
            break;
        }
    }
    Ok(state)
}
