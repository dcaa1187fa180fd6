//! Synthetic crowds: worker and task populations, annotation sampling,
//! random campaigns and the two-phase budgeted assignment.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Annotation, Dataset};
use crate::error::{Error, Result};
use crate::inference::{run_wtim, InferenceConfig, InferenceState};
use crate::model::{confidence_value, Ability, LabelId};

/// Phase one of assignment tops every task up to this many annotations.
pub const PHASE_ONE_REDUNDANCY: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkerType {
    Expert,
    Normal,
    Sloppy,
    Spammer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskType {
    Hard,
    Medium,
    Easy,
}

impl fmt::Display for WorkerType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            WorkerType::Expert => "expert",
            WorkerType::Normal => "normal",
            WorkerType::Sloppy => "sloppy",
            WorkerType::Spammer => "spammer",
        };
        f.write_str(s)
    }
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TaskType::Hard => "hard",
            TaskType::Medium => "medium",
            TaskType::Easy => "easy",
        };
        f.write_str(s)
    }
}

/// Center of a class's value band. `Chance` is `1/k`; `Midpoint` is
/// halfway between chance and certainty, `(1 + 1/k) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawValue", into = "String")]
pub enum Baseline {
    Fixed(f64),
    Chance,
    Midpoint,
}

impl Baseline {
    pub fn value(self, k: usize) -> f64 {
        match self {
            Baseline::Fixed(x) => x,
            Baseline::Chance => 1.0 / k as f64,
            Baseline::Midpoint => (1.0 + 1.0 / k as f64) / 2.0,
        }
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        match compact.as_str() {
            "1/k" => Ok(Baseline::Chance),
            "(1+1/k)/2" => Ok(Baseline::Midpoint),
            other => other
                .parse::<f64>()
                .map(Baseline::Fixed)
                .map_err(|_| Error::Config(format!("bad baseline `{s}`"))),
        }
    }
}

impl From<Baseline> for String {
    fn from(b: Baseline) -> String {
        match b {
            Baseline::Fixed(x) => x.to_string(),
            Baseline::Chance => "1/k".into(),
            Baseline::Midpoint => "(1+1/k)/2".into(),
        }
    }
}

/// Absolute spread around the baseline: `±x` or one-sided `+x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawValue", into = "String")]
pub enum Fluctuation {
    Symmetric(f64),
    Upward(f64),
}

impl Fluctuation {
    pub fn band(self, center: f64) -> (f64, f64) {
        match self {
            Fluctuation::Symmetric(x) => (center - x, center + x),
            Fluctuation::Upward(x) => (center, center + x),
        }
    }
}

impl FromStr for Fluctuation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let bad = || Error::Config(format!("bad fluctuation `{s}`"));
        let (ctor, rest): (fn(f64) -> Fluctuation, &str) = if let Some(r) = t.strip_prefix('±') {
            (Fluctuation::Symmetric, r)
        } else if let Some(r) = t.strip_prefix("+-") {
            (Fluctuation::Symmetric, r)
        } else if let Some(r) = t.strip_prefix('+') {
            (Fluctuation::Upward, r)
        } else {
            (Fluctuation::Symmetric, t)
        };
        let x: f64 = rest.trim().parse().map_err(|_| bad())?;
        if x < 0.0 {
            return Err(bad());
        }
        Ok(ctor(x))
    }
}

impl From<Fluctuation> for String {
    fn from(f: Fluctuation) -> String {
        match f {
            Fluctuation::Symmetric(x) => format!("±{x}"),
            Fluctuation::Upward(x) => format!("+{x}"),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawValue {
    Num(f64),
    Text(String),
}

impl TryFrom<RawValue> for Baseline {
    type Error = Error;
    fn try_from(v: RawValue) -> Result<Self> {
        match v {
            RawValue::Num(x) => Ok(Baseline::Fixed(x)),
            RawValue::Text(s) => s.parse(),
        }
    }
}

impl TryFrom<RawValue> for Fluctuation {
    type Error = Error;
    fn try_from(v: RawValue) -> Result<Self> {
        match v {
            RawValue::Num(x) if x >= 0.0 => Ok(Fluctuation::Symmetric(x)),
            RawValue::Num(x) => Err(Error::Config(format!("negative fluctuation {x}"))),
            RawValue::Text(s) => s.parse(),
        }
    }
}

/// One row of a population table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow<C> {
    #[serde(rename = "type")]
    pub class: C,
    pub baseline: Baseline,
    pub fluctuation: Fluctuation,
    pub proportion: f64,
}

/// Task and worker class tables plus the campaign size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    /// Number of tasks.
    pub n: usize,
    /// Number of workers.
    pub m: usize,
    pub k: usize,
    /// Annotations per task in a random campaign.
    pub r: usize,
    #[serde(rename = "task")]
    pub tasks: Vec<ClassRow<TaskType>>,
    #[serde(rename = "worker")]
    pub workers: Vec<ClassRow<WorkerType>>,
}

impl PopulationSpec {
    /// Reference population: 100 tasks (10% hard, 60% medium, 30% easy),
    /// 10 workers (30% expert, 40% normal, 20% sloppy, 10% spammer), five
    /// annotations per task.
    pub fn standard(k: usize) -> Self {
        use Baseline::*;
        use Fluctuation::*;
        fn row<C>(
            class: C,
            baseline: Baseline,
            fluctuation: Fluctuation,
            proportion: f64,
        ) -> ClassRow<C> {
            ClassRow {
                class,
                baseline,
                fluctuation,
                proportion,
            }
        }
        PopulationSpec {
            n: 100,
            m: 10,
            k,
            r: 5,
            tasks: vec![
                row(TaskType::Hard, Fixed(0.85), Symmetric(0.05), 0.10),
                row(TaskType::Medium, Midpoint, Symmetric(0.10), 0.60),
                row(TaskType::Easy, Fixed(0.15), Symmetric(0.05), 0.30),
            ],
            workers: vec![
                row(WorkerType::Expert, Fixed(0.85), Symmetric(0.05), 0.30),
                row(WorkerType::Normal, Midpoint, Symmetric(0.10), 0.40),
                row(WorkerType::Sloppy, Chance, Upward(0.10), 0.20),
                row(WorkerType::Spammer, Fixed(0.15), Symmetric(0.05), 0.10),
            ],
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: PopulationSpec =
            toml::from_str(text).map_err(|e| Error::Config(format!("population spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("population spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        crate::model::check_k(self.k)?;
        if self.r < 1 {
            return Err(Error::Config("r must be at least 1".into()));
        }
        check_proportions("task", self.tasks.iter().map(|r| r.proportion))?;
        check_proportions("worker", self.workers.iter().map(|r| r.proportion))?;
        Ok(())
    }
}

fn check_proportions(side: &str, props: impl Iterator<Item = f64>) -> Result<()> {
    let props: Vec<f64> = props.collect();
    if props.iter().any(|p| p.is_nan() || *p < 0.0) {
        return Err(Error::Config(format!(
            "{side} proportions must be nonnegative"
        )));
    }
    let total: f64 = props.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "{side} proportions sum to {total}, expected 1"
        )));
    }
    Ok(())
}

/// Splits `total` items by `proportions` using largest-remainder rounding;
/// remainder ties go to the earlier row.
pub fn apportion(total: usize, proportions: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = proportions.iter().map(|p| p * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| (x + 1e-9).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..proportions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - counts[a] as f64;
        let rb = exact[b] - counts[b] as f64;
        rb.partial_cmp(&ra)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerProfile {
    pub id: String,
    #[serde(rename = "type")]
    pub class: WorkerType,
    pub ability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskProfile {
    pub id: String,
    #[serde(rename = "type")]
    pub class: TaskType,
    pub difficulty: f64,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub k: usize,
    pub workers: Vec<WorkerProfile>,
    pub tasks: Vec<TaskProfile>,
}

fn draw_band<R: Rng + ?Sized>(
    rng: &mut R,
    baseline: Baseline,
    fluctuation: Fluctuation,
    k: usize,
) -> f64 {
    let (lo, hi) = fluctuation.band(baseline.value(k));
    let x = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
    x.clamp(0.0, 1.0)
}

/// Draws a worker and task population. Class counts follow the table
/// proportions; each value is uniform over its class band.
pub fn sample_population<R: Rng + ?Sized>(
    spec: &PopulationSpec,
    rng: &mut R,
) -> Result<Population> {
    spec.validate()?;
    let k = spec.k;
    let mut workers = Vec::with_capacity(spec.m);
    let counts = apportion(
        spec.m,
        &spec
            .workers
            .iter()
            .map(|r| r.proportion)
            .collect::<Vec<_>>(),
    );
    for (row, &count) in spec.workers.iter().zip(&counts) {
        for _ in 0..count {
            let ability = draw_band(rng, row.baseline, row.fluctuation, k);
            workers.push(WorkerProfile {
                id: format!("w{}", workers.len()),
                class: row.class,
                ability,
            });
        }
    }
    let mut tasks = Vec::with_capacity(spec.n);
    let counts = apportion(
        spec.n,
        &spec.tasks.iter().map(|r| r.proportion).collect::<Vec<_>>(),
    );
    for (row, &count) in spec.tasks.iter().zip(&counts) {
        for _ in 0..count {
            let difficulty = draw_band(rng, row.baseline, row.fluctuation, k);
            let label = rng.gen_range(0..k);
            tasks.push(TaskProfile {
                id: format!("t{}", tasks.len()),
                class: row.class,
                difficulty,
                label,
            });
        }
    }
    Ok(Population { k, workers, tasks })
}

/// One simulated vote: the true label with probability equal to the
/// worker's confidence on this task, otherwise a uniformly chosen wrong
/// label.
pub fn sample_annotation<R: Rng + ?Sized>(
    worker: &WorkerProfile,
    task: &TaskProfile,
    k: usize,
    rng: &mut R,
) -> LabelId {
    let e = Ability::clamped(worker.ability).get();
    let p = confidence_value(task.difficulty.clamp(0.0, 1.0), e, k);
    if rng.gen::<f64>() < p {
        LabelId(task.label)
    } else {
        let wrong = rng.gen_range(0..k - 1);
        LabelId(if wrong >= task.label {
            wrong + 1
        } else {
            wrong
        })
    }
}

/// Builds a dataset over `(worker, task, label)` triples indexed into the
/// population. Workers without any annotation are left out; gold is the
/// true label of every task.
fn population_dataset(pop: &Population, triples: &[(usize, usize, LabelId)]) -> Result<Dataset> {
    let mut active = vec![false; pop.workers.len()];
    for &(w, _, _) in triples {
        active[w] = true;
    }
    let mut remap = vec![usize::MAX; pop.workers.len()];
    let mut names = Vec::new();
    for (j, w) in pop.workers.iter().enumerate() {
        if active[j] {
            remap[j] = names.len();
            names.push(w.id.clone());
        }
    }
    let annotations = triples
        .iter()
        .map(|&(w, t, label)| Annotation {
            worker: remap[w],
            task: t,
            label,
        })
        .collect();
    let tasks = pop.tasks.iter().map(|t| t.id.clone()).collect();
    let gold = pop.tasks.iter().map(|t| Some(LabelId(t.label))).collect();
    Dataset::new(pop.k, names, tasks, annotations)?.with_gold(gold)
}

/// Random campaign: every task gets exactly `r` annotations from `r`
/// distinct, uniformly chosen workers.
pub fn simulate_campaign<R: Rng + ?Sized>(
    pop: &Population,
    r: usize,
    rng: &mut R,
) -> Result<Dataset> {
    let m = pop.workers.len();
    if r > m {
        return Err(Error::Config(format!(
            "r = {r} exceeds the {m} available workers"
        )));
    }
    if r == 0 {
        return Err(Error::Config("r must be at least 1".into()));
    }
    let mut triples = Vec::with_capacity(pop.tasks.len() * r);
    for (t, task) in pop.tasks.iter().enumerate() {
        for w in sample(rng, m, r).into_iter() {
            let label = sample_annotation(&pop.workers[w], task, pop.k, rng);
            triples.push((w, t, label));
        }
    }
    population_dataset(pop, &triples)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TaskOrder {
    /// Hardest tasks are matched with the ablest workers.
    #[default]
    Descending,
    /// Easiest tasks are matched with the ablest workers.
    Ascending,
}

impl FromStr for TaskOrder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "descending" | "desc" => Ok(TaskOrder::Descending),
            "ascending" | "asc" => Ok(TaskOrder::Ascending),
            other => Err(Error::Config(format!("unknown task order `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AssignmentConfig {
    pub inference: InferenceConfig,
    pub task_order: TaskOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Random,
    Matched,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Random => "1",
            Phase::Matched => "2",
        })
    }
}

/// One annotation slot, indices into the population.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssignmentSlot {
    pub phase: Phase,
    pub worker: usize,
    pub task: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssignmentPlan {
    pub slots: Vec<AssignmentSlot>,
    pub remaining_budget: usize,
}

impl AssignmentPlan {
    pub fn phase_len(&self, phase: Phase) -> usize {
        self.slots.iter().filter(|s| s.phase == phase).count()
    }
}

#[derive(Debug, Clone)]
pub struct AssignmentOutcome {
    pub plan: AssignmentPlan,
    pub dataset: Dataset,
    /// Estimates after phase one, which drove the phase-two ordering.
    pub phase_one: InferenceState<f64>,
    pub state: InferenceState<f64>,
}

struct SlotBook {
    plan: AssignmentPlan,
    used: HashSet<(usize, usize)>,
    triples: Vec<(usize, usize, LabelId)>,
}

impl SlotBook {
    fn assign<R: Rng + ?Sized>(
        &mut self,
        pop: &Population,
        rng: &mut R,
        phase: Phase,
        worker: usize,
        task: usize,
    ) {
        self.used.insert((worker, task));
        self.plan.slots.push(AssignmentSlot {
            phase,
            worker,
            task,
        });
        self.plan.remaining_budget -= 1;
        let label = sample_annotation(&pop.workers[worker], &pop.tasks[task], pop.k, rng);
        self.triples.push((worker, task, label));
    }
}

/// Two-phase budgeted assignment.
///
/// Phase one assigns each task to three distinct random workers, then runs
/// inference. Phase two ranks tasks by inferred difficulty and workers by
/// inferred ability and spends the rest of the budget round-robin over the
/// ranked workers, never repeating a pair. Inference is re-run over the full
/// annotation set at the end.
pub fn run_assignment<R: Rng + ?Sized>(
    pop: &Population,
    budget: usize,
    config: &AssignmentConfig,
    rng: &mut R,
) -> Result<AssignmentOutcome> {
    let n = pop.tasks.len();
    let m = pop.workers.len();
    let min = PHASE_ONE_REDUNDANCY * n;
    if budget < min {
        return Err(Error::Budget { budget, min });
    }
    let mut book = SlotBook {
        plan: AssignmentPlan {
            slots: Vec::with_capacity(budget.min(n * m)),
            remaining_budget: budget,
        },
        used: HashSet::with_capacity(budget.min(n * m)),
        triples: Vec::with_capacity(budget.min(n * m)),
    };

    let per_task = PHASE_ONE_REDUNDANCY.min(m);
    for t in 0..n {
        for w in sample(rng, m, per_task).into_iter() {
            book.assign(pop, rng, Phase::Random, w, t);
        }
    }
    let phase_one_ds = population_dataset(pop, &book.triples)?;
    let phase_one = run_wtim::<f64>(&phase_one_ds, &config.inference)?;

    // Map inferred estimates back to population indices; workers absent
    // from phase one rank last.
    let mut ability = vec![f64::NEG_INFINITY; m];
    for (jj, name) in phase_one_ds.workers().iter().enumerate() {
        let j = pop
            .workers
            .iter()
            .position(|w| &w.id == name)
            .expect("known worker");
        ability[j] = phase_one.abilities[jj].get();
    }
    let mut task_rank: Vec<usize> = (0..n).collect();
    let difficulty = |t: usize| phase_one.difficulties[t].get();
    match config.task_order {
        TaskOrder::Descending => {
            task_rank.sort_by(|&a, &b| difficulty(b).total_cmp(&difficulty(a)))
        }
        TaskOrder::Ascending => task_rank.sort_by(|&a, &b| difficulty(a).total_cmp(&difficulty(b))),
    }
    let mut worker_rank: Vec<usize> = (0..m).collect();
    worker_rank.sort_by(|&a, &b| ability[b].total_cmp(&ability[a]));

    let mut cursor = 0;
    while book.plan.remaining_budget > 0 {
        let mut progressed = false;
        for &t in &task_rank {
            if book.plan.remaining_budget == 0 {
                break;
            }
            let pick = (0..m)
                .map(|off| (cursor + off) % m)
                .find(|&pos| !book.used.contains(&(worker_rank[pos], t)));
            if let Some(pos) = pick {
                book.assign(pop, rng, Phase::Matched, worker_rank[pos], t);
                cursor = (pos + 1) % m;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }

    let dataset = population_dataset(pop, &book.triples)?;
    let state = run_wtim::<f64>(&dataset, &config.inference)?;
    Ok(AssignmentOutcome {
        plan: book.plan,
        dataset,
        phase_one,
        state,
    })
}
