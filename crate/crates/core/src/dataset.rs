//! Immutable annotation sets.

use std::borrow::Cow;
use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::model::{check_k, LabelId};

/// One vote: `worker` chose `label` for `task`. Worker and task are indices
/// into the owning [`Dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Annotation {
    pub worker: usize,
    pub task: usize,
    pub label: LabelId,
}

/// Annotations over `k` candidate labels, with optional gold labels.
///
/// Every annotation references a declared worker and task, no worker
/// annotates the same task twice, and every declared worker has at least
/// one annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    k: usize,
    k_explicit: bool,
    label_names: Vec<String>,
    workers: Vec<String>,
    tasks: Vec<String>,
    annotations: Vec<Annotation>,
    gold: Vec<Option<LabelId>>,
    gold_unmatched: Vec<(String, String)>,
    by_task: Vec<Vec<usize>>,
    by_worker: Vec<Vec<usize>>,
}

impl Dataset {
    /// Builds a dataset from indexed annotations. Label names default to
    /// `"0"`, `"1"`, ….
    pub fn new(
        k: usize,
        workers: Vec<String>,
        tasks: Vec<String>,
        annotations: Vec<Annotation>,
    ) -> Result<Self> {
        check_k(k)?;
        let mut seen = HashSet::with_capacity(annotations.len());
        let mut by_task = vec![Vec::new(); tasks.len()];
        let mut by_worker = vec![Vec::new(); workers.len()];
        for (idx, a) in annotations.iter().enumerate() {
            if a.worker >= workers.len() || a.task >= tasks.len() {
                return Err(Error::Config(format!(
                    "annotation {idx} references an undeclared worker or task"
                )));
            }
            LabelId::new(a.label.0, k)?;
            if !seen.insert((a.worker, a.task)) {
                return Err(Error::DuplicatePair {
                    line: idx + 1,
                    worker: workers[a.worker].clone(),
                    task: tasks[a.task].clone(),
                });
            }
            by_task[a.task].push(idx);
            by_worker[a.worker].push(idx);
        }
        if let Some(j) = by_worker.iter().position(Vec::is_empty) {
            return Err(Error::IdleWorker(workers[j].clone()));
        }
        Ok(Dataset {
            k,
            k_explicit: true,
            label_names: (0..k).map(|c| c.to_string()).collect(),
            gold: vec![None; tasks.len()],
            workers,
            tasks,
            annotations,
            gold_unmatched: Vec::new(),
            by_task,
            by_worker,
        })
    }

    /// Convenience constructor over `(worker, task, label)` index triples;
    /// workers are named `w{j}` and tasks `t{i}`.
    pub fn from_triples(k: usize, triples: &[(usize, usize, usize)]) -> Result<Self> {
        let m = triples.iter().map(|t| t.0 + 1).max().unwrap_or(0);
        let n = triples.iter().map(|t| t.1 + 1).max().unwrap_or(0);
        let annotations = triples
            .iter()
            .map(|&(w, t, l)| Annotation {
                worker: w,
                task: t,
                label: LabelId(l),
            })
            .collect();
        Dataset::new(
            k,
            (0..m).map(|j| format!("w{j}")).collect(),
            (0..n).map(|i| format!("t{i}")).collect(),
            annotations,
        )
    }

    /// Names for the first `names.len()` labels; requires `names.len() <= k`.
    pub(crate) fn with_label_names(mut self, names: Vec<String>, k_explicit: bool) -> Self {
        debug_assert!(names.len() <= self.k);
        self.label_names = names;
        self.k_explicit = k_explicit;
        self
    }

    /// Attaches gold labels, one optional entry per task.
    pub fn with_gold(mut self, gold: Vec<Option<LabelId>>) -> Result<Self> {
        if gold.len() != self.tasks.len() {
            return Err(Error::Config(format!(
                "gold has {} entries for {} tasks",
                gold.len(),
                self.tasks.len()
            )));
        }
        for g in gold.iter().flatten() {
            LabelId::new(g.0, self.k)?;
        }
        self.gold = gold;
        Ok(self)
    }

    pub(crate) fn set_gold_parts(
        &mut self,
        label_names: Vec<String>,
        gold: Vec<Option<LabelId>>,
        unmatched: Vec<(String, String)>,
    ) {
        self.label_names = label_names;
        self.gold = gold;
        self.gold_unmatched = unmatched;
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    /// Whether `k` was fixed by the caller rather than inferred from tokens.
    pub fn k_explicit(&self) -> bool {
        self.k_explicit
    }

    /// Label dictionary in id order. With an explicit `k`, labels never
    /// seen in any file have no name and are not listed.
    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn label_name(&self, label: LabelId) -> Cow<'_, str> {
        match self.label_names.get(label.0) {
            Some(name) => Cow::Borrowed(name),
            None => Cow::Owned(format!("#{}", label.0)),
        }
    }

    pub fn label_id(&self, name: &str) -> Option<LabelId> {
        self.label_names.iter().position(|n| n == name).map(LabelId)
    }

    pub fn workers(&self) -> &[String] {
        &self.workers
    }

    pub fn tasks(&self) -> &[String] {
        &self.tasks
    }

    #[inline]
    pub fn num_workers(&self) -> usize {
        self.workers.len()
    }

    #[inline]
    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn annotations(&self) -> &[Annotation] {
        &self.annotations
    }

    /// Annotations received by task `i`.
    pub fn task_annotations(&self, i: usize) -> impl Iterator<Item = &Annotation> + '_ {
        self.by_task[i].iter().map(move |&a| &self.annotations[a])
    }

    /// Annotations given by worker `j`.
    pub fn worker_annotations(&self, j: usize) -> impl Iterator<Item = &Annotation> + '_ {
        self.by_worker[j].iter().map(move |&a| &self.annotations[a])
    }

    pub fn task_degree(&self, i: usize) -> usize {
        self.by_task[i].len()
    }

    pub fn worker_degree(&self, j: usize) -> usize {
        self.by_worker[j].len()
    }

    pub fn gold(&self) -> &[Option<LabelId>] {
        &self.gold
    }

    /// Gold entries naming tasks that received no annotations, as
    /// `(task_id, label)` pairs. They never enter accuracy denominators.
    pub fn gold_unmatched(&self) -> &[(String, String)] {
        &self.gold_unmatched
    }

    pub fn has_gold(&self) -> bool {
        self.gold.iter().any(Option::is_some)
    }

    /// Fails if some task has no annotations.
    pub fn require_annotated_tasks(&self) -> Result<()> {
        match self.by_task.iter().position(Vec::is_empty) {
            Some(i) => Err(Error::EmptyTask(self.tasks[i].clone())),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicate_pairs() {
        let err = Dataset::from_triples(2, &[(0, 0, 1), (0, 0, 0)]).unwrap_err();
        assert!(matches!(err, Error::DuplicatePair { line: 2, .. }));
    }

    #[test]
    fn rejects_out_of_range_labels() {
        assert!(Dataset::from_triples(2, &[(0, 0, 2)]).is_err());
        assert!(Dataset::from_triples(1, &[(0, 0, 0)]).is_err());
    }

    #[test]
    fn rejects_idle_workers() {
        let err = Dataset::new(
            2,
            vec!["a".into(), "b".into()],
            vec!["t".into()],
            vec![Annotation {
                worker: 0,
                task: 0,
                label: LabelId(0),
            }],
        )
        .unwrap_err();
        assert!(matches!(err, Error::IdleWorker(w) if w == "b"));
    }

    #[test]
    fn indexes_by_task_and_worker() {
        let ds = Dataset::from_triples(3, &[(0, 0, 1), (1, 0, 2), (1, 1, 0)]).unwrap();
        assert_eq!(ds.task_degree(0), 2);
        assert_eq!(ds.worker_degree(1), 2);
        let labels: Vec<_> = ds.worker_annotations(1).map(|a| a.label.0).collect();
        assert_eq!(labels, vec![2, 0]);
        assert!(ds.require_annotated_tasks().is_ok());
    }

    #[test]
    fn detects_unannotated_tasks() {
        let ds = Dataset::new(
            2,
            vec!["w".into()],
            vec!["t0".into(), "t1".into()],
            vec![Annotation {
                worker: 0,
                task: 0,
                label: LabelId(1),
            }],
        )
        .unwrap();
        assert!(matches!(ds.require_annotated_tasks(), Err(Error::EmptyTask(t)) if t == "t1"));
    }
}
