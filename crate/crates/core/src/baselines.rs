//! Comparison aggregators: majority vote (MV), weighted majority vote
//! (WMV), the one-coin accuracy model (ZC), Dawid–Skene confusion matrices
//! (DS) and the logistic ability/difficulty model (GLAD).
//!
//! All of them return an [`InferenceState`] whose difficulties and
//! abilities are the plain error and correct rates against the final
//! labels, so reports can treat every method alike. Model-specific
//! parameters are available through the `fit_*` variants.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::inference::{
    hard_labels, majority_vote, update_difficulties, weighted_vote, wmv_fixed_point,
    InferenceConfig, InferenceState, LabelPosterior,
};
use crate::model::{log_likelihood_value, Ability, LabelId};
use crate::scalar::Scalar;

/// Additive smoothing applied to every confusion-matrix cell.
pub const DS_SMOOTHING: f64 = 0.01;
/// Gradient-ascent step for the GLAD M-step.
pub const GLAD_STEP: f64 = 0.01;
/// Gradient steps per GLAD outer iteration.
pub const GLAD_INNER_STEPS: usize = 50;
/// ZC accuracies are kept strictly inside `(0, 1)`.
const ZC_CLAMP: f64 = 1e-6;

fn max_change<T: Scalar>(a: impl IntoIterator<Item = T>, b: impl IntoIterator<Item = T>) -> T {
    a.into_iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(T::zero(), T::max)
}

pub fn run_mv<T: Scalar>(dataset: &Dataset) -> Result<InferenceState<T>> {
    dataset.require_annotated_tasks()?;
    InferenceState::from_posteriors(dataset, majority_vote(dataset), 1, true)
}

/// Weighted majority vote; each worker's weight is its accuracy against the
/// previous round's labels.
pub fn run_wmv<T: Scalar>(
    dataset: &Dataset,
    config: &InferenceConfig,
) -> Result<InferenceState<T>> {
    config.validate()?;
    dataset.require_annotated_tasks()?;
    let (posteriors, abilities, rounds, converged) = wmv_fixed_point(dataset, config);
    let labels = hard_labels(&posteriors);
    Ok(InferenceState {
        difficulties: update_difficulties(dataset, &labels)?,
        abilities,
        posteriors,
        iteration: rounds,
        converged,
        trace: Vec::new(),
    })
}

/// Posteriors under the one-coin model: worker `j` answers correctly with
/// probability `accuracies[j]`, otherwise uniformly among wrong labels.
pub fn zc_estep<T: Scalar>(dataset: &Dataset, accuracies: &[T]) -> Vec<LabelPosterior<T>> {
    let k = dataset.k();
    let prior = -T::from_count(k).ln();
    (0..dataset.num_tasks())
        .map(|i| {
            let mut logw = vec![prior; k];
            for a in dataset.task_annotations(i) {
                let p = accuracies[a.worker];
                for (c, w) in logw.iter_mut().enumerate() {
                    *w = *w + log_likelihood_value(a.label.0 == c, p, k);
                }
            }
            LabelPosterior::from_log_weights(logw)
        })
        .collect()
}

fn zc_mstep<T: Scalar>(dataset: &Dataset, posteriors: &[LabelPosterior<T>]) -> Vec<T> {
    let lo = T::lit(ZC_CLAMP);
    let hi = T::one() - lo;
    (0..dataset.num_workers())
        .map(|j| {
            let mass: T = dataset
                .worker_annotations(j)
                .map(|a| posteriors[a.task].prob(a.label))
                .sum();
            (mass / T::from_count(dataset.worker_degree(j).max(1)))
                .max(lo)
                .min(hi)
        })
        .collect()
}

pub fn run_zc<T: Scalar>(dataset: &Dataset, config: &InferenceConfig) -> Result<InferenceState<T>> {
    config.validate()?;
    dataset.require_annotated_tasks()?;
    let tol = T::lit(config.tolerance);
    let mut posteriors = majority_vote::<T>(dataset);
    let mut accuracies = zc_mstep(dataset, &posteriors);
    let mut rounds = 0;
    let mut converged = false;
    while rounds < config.max_iters {
        rounds += 1;
        posteriors = zc_estep(dataset, &accuracies);
        let next = zc_mstep(dataset, &posteriors);
        let delta = max_change(accuracies.iter().copied(), next.iter().copied());
        accuracies = next;
        if delta < tol {
            converged = true;
            break;
        }
    }
    let labels = hard_labels(&posteriors);
    Ok(InferenceState {
        difficulties: update_difficulties(dataset, &labels)?,
        abilities: accuracies.into_iter().map(Ability::clamped).collect(),
        posteriors,
        iteration: rounds,
        converged,
        trace: Vec::new(),
    })
}

/// Per-worker `k × k` matrix; entry `(r, c)` is the probability of answering
/// `c` when the truth is `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix<T> {
    k: usize,
    cells: Vec<T>,
}

impl<T: Scalar> ConfusionMatrix<T> {
    /// Validates shape, nonnegativity and unit row sums (within 1e-9).
    pub fn new(k: usize, cells: Vec<T>) -> Result<Self> {
        if cells.len() != k * k {
            return Err(Error::Config(format!(
                "confusion matrix needs {} cells, got {}",
                k * k,
                cells.len()
            )));
        }
        let m = ConfusionMatrix { k, cells };
        for r in 0..k {
            let row = m.row(r);
            if row.iter().any(|&x| x < T::zero()) {
                return Err(Error::Config(format!("row {r} has a negative entry")));
            }
            let s: T = row.iter().copied().sum();
            if (s - T::one()).abs().as_f64() > 1e-9 {
                return Err(Error::Config(format!("row {r} sums to {s}")));
            }
        }
        Ok(m)
    }

    pub fn identity(k: usize) -> Self {
        let mut cells = vec![T::zero(); k * k];
        for r in 0..k {
            cells[r * k + r] = T::one();
        }
        ConfusionMatrix { k, cells }
    }

    #[inline]
    pub fn get(&self, truth: usize, answer: usize) -> T {
        self.cells[truth * self.k + answer]
    }

    pub fn row(&self, truth: usize) -> &[T] {
        &self.cells[truth * self.k..(truth + 1) * self.k]
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

/// Dawid–Skene parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DsParams<T> {
    pub matrices: Vec<ConfusionMatrix<T>>,
    pub priors: Vec<T>,
}

pub fn ds_estep<T: Scalar>(dataset: &Dataset, params: &DsParams<T>) -> Vec<LabelPosterior<T>> {
    let k = dataset.k();
    let log = |x: T| {
        if x > T::zero() {
            x.ln()
        } else {
            T::neg_infinity()
        }
    };
    (0..dataset.num_tasks())
        .map(|i| {
            let mut logw: Vec<T> = params.priors.iter().map(|&p| log(p)).collect();
            for a in dataset.task_annotations(i) {
                let m = &params.matrices[a.worker];
                for (r, w) in logw.iter_mut().enumerate().take(k) {
                    *w = *w + log(m.get(r, a.label.0));
                }
            }
            LabelPosterior::from_log_weights(logw)
        })
        .collect()
}

/// Re-estimates smoothed confusion matrices and class priors from soft
/// labels.
pub fn ds_mstep<T: Scalar>(dataset: &Dataset, posteriors: &[LabelPosterior<T>]) -> DsParams<T> {
    let k = dataset.k();
    let smooth = T::lit(DS_SMOOTHING);
    let matrices = (0..dataset.num_workers())
        .map(|j| {
            let mut cells = vec![smooth; k * k];
            for a in dataset.worker_annotations(j) {
                for (r, &t) in posteriors[a.task].probs().iter().enumerate() {
                    cells[r * k + a.label.0] = cells[r * k + a.label.0] + t;
                }
            }
            for r in 0..k {
                let s: T = cells[r * k..(r + 1) * k].iter().copied().sum();
                cells[r * k..(r + 1) * k]
                    .iter_mut()
                    .for_each(|x| *x = *x / s);
            }
            ConfusionMatrix { k, cells }
        })
        .collect();
    let n = T::from_count(dataset.num_tasks().max(1));
    let priors = (0..k)
        .map(|r| posteriors.iter().map(|p| p.probs()[r]).sum::<T>() / n)
        .collect();
    DsParams { matrices, priors }
}

pub fn fit_ds<T: Scalar>(
    dataset: &Dataset,
    config: &InferenceConfig,
) -> Result<(InferenceState<T>, DsParams<T>)> {
    config.validate()?;
    dataset.require_annotated_tasks()?;
    let tol = T::lit(config.tolerance);
    let mut posteriors = majority_vote::<T>(dataset);
    let mut params = ds_mstep(dataset, &posteriors);
    let mut rounds = 0;
    let mut converged = false;
    let flatten = |p: &DsParams<T>| -> Vec<T> {
        p.matrices
            .iter()
            .flat_map(|m| m.cells.iter().copied())
            .chain(p.priors.iter().copied())
            .collect()
    };
    while rounds < config.max_iters {
        rounds += 1;
        posteriors = ds_estep(dataset, &params);
        let next = ds_mstep(dataset, &posteriors);
        let delta = max_change(flatten(&params), flatten(&next));
        params = next;
        if delta < tol {
            converged = true;
            break;
        }
    }
    let state = InferenceState::from_posteriors(dataset, posteriors, rounds, converged)?;
    Ok((state, params))
}

pub fn run_ds<T: Scalar>(dataset: &Dataset, config: &InferenceConfig) -> Result<InferenceState<T>> {
    fit_ds(dataset, config).map(|(s, _)| s)
}

/// GLAD parameters. Task difficulty is `exp(log_difficulty)`, always
/// positive, larger meaning easier; worker ability is unconstrained.
#[derive(Debug, Clone, PartialEq)]
pub struct GladParams<T> {
    pub log_difficulty: Vec<T>,
    pub ability: Vec<T>,
}

/// Gradient of the expected complete-data log-likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct GladGradient<T> {
    pub log_difficulty: Vec<T>,
    pub ability: Vec<T>,
}

impl<T: Scalar> GladParams<T> {
    pub fn new(num_tasks: usize, num_workers: usize) -> Self {
        GladParams {
            log_difficulty: vec![T::zero(); num_tasks],
            ability: vec![T::one(); num_workers],
        }
    }

    #[inline]
    pub fn task_difficulty(&self, i: usize) -> T {
        self.log_difficulty[i].exp()
    }
}

#[inline]
fn softplus<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `1 / (1 + exp(-x))`.
#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let z = x.exp();
        z / (T::one() + z)
    }
}

/// Log-probabilities of a correct and of one particular wrong answer.
#[inline]
fn glad_log_probs<T: Scalar>(x: T, k: usize) -> (T, T) {
    (-softplus(-x), -softplus(x) - T::from_count(k - 1).ln())
}

pub fn glad_estep<T: Scalar>(dataset: &Dataset, params: &GladParams<T>) -> Vec<LabelPosterior<T>> {
    let k = dataset.k();
    let prior = -T::from_count(k).ln();
    (0..dataset.num_tasks())
        .map(|i| {
            let beta = params.task_difficulty(i);
            let mut logw = vec![prior; k];
            for a in dataset.task_annotations(i) {
                let (hit, miss) = glad_log_probs(params.ability[a.worker] * beta, k);
                for (c, w) in logw.iter_mut().enumerate() {
                    *w = *w + if a.label.0 == c { hit } else { miss };
                }
            }
            LabelPosterior::from_log_weights(logw)
        })
        .collect()
}

/// Expected log-likelihood of the annotations under `posteriors`, dropping
/// the parameter-free prior term.
pub fn glad_expected_loglik<T: Scalar>(
    dataset: &Dataset,
    posteriors: &[LabelPosterior<T>],
    params: &GladParams<T>,
) -> T {
    let k = dataset.k();
    dataset
        .annotations()
        .iter()
        .map(|a| {
            let mu = posteriors[a.task].prob(a.label);
            let x = params.ability[a.worker] * params.task_difficulty(a.task);
            let (hit, miss) = glad_log_probs(x, k);
            mu * hit + (T::one() - mu) * miss
        })
        .sum()
}

pub fn glad_gradient<T: Scalar>(
    dataset: &Dataset,
    posteriors: &[LabelPosterior<T>],
    params: &GladParams<T>,
) -> GladGradient<T> {
    let mut g = GladGradient {
        log_difficulty: vec![T::zero(); dataset.num_tasks()],
        ability: vec![T::zero(); dataset.num_workers()],
    };
    for a in dataset.annotations() {
        let mu = posteriors[a.task].prob(a.label);
        let beta = params.task_difficulty(a.task);
        let alpha = params.ability[a.worker];
        let r = mu - sigmoid(alpha * beta);
        g.ability[a.worker] = g.ability[a.worker] + r * beta;
        g.log_difficulty[a.task] = g.log_difficulty[a.task] + r * alpha * beta;
    }
    g
}

pub fn fit_glad<T: Scalar>(
    dataset: &Dataset,
    config: &InferenceConfig,
) -> Result<(InferenceState<T>, GladParams<T>)> {
    config.validate()?;
    dataset.require_annotated_tasks()?;
    let tol = T::lit(config.tolerance);
    let step = T::lit(GLAD_STEP);
    let mut params = GladParams::new(dataset.num_tasks(), dataset.num_workers());
    let mut posteriors = glad_estep(dataset, &params);
    let mut rounds = 0;
    let mut converged = false;
    while rounds < config.max_iters {
        rounds += 1;
        let before = params.clone();
        for _ in 0..GLAD_INNER_STEPS {
            let g = glad_gradient(dataset, &posteriors, &params);
            for (p, d) in params.ability.iter_mut().zip(&g.ability) {
                *p = *p + step * *d;
            }
            for (p, d) in params.log_difficulty.iter_mut().zip(&g.log_difficulty) {
                *p = *p + step * *d;
            }
        }
        posteriors = glad_estep(dataset, &params);
        let delta = max_change(
            before.ability.iter().chain(&before.log_difficulty).copied(),
            params.ability.iter().chain(&params.log_difficulty).copied(),
        );
        if delta < tol {
            converged = true;
            break;
        }
    }
    let state = InferenceState::from_posteriors(dataset, posteriors, rounds, converged)?;
    Ok((state, params))
}

pub fn run_glad<T: Scalar>(
    dataset: &Dataset,
    config: &InferenceConfig,
) -> Result<InferenceState<T>> {
    fit_glad(dataset, config).map(|(s, _)| s)
}

/// Labels from a single weighted vote with fixed weights.
pub fn weighted_vote_labels<T: Scalar>(dataset: &Dataset, weights: &[T]) -> Vec<LabelId> {
    hard_labels(&weighted_vote(dataset, weights))
}
