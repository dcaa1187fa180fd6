//! Text formats: tab-separated annotation triples and gold pairs, result
//! tables, and benchmark reports.
//!
//! Input files are UTF-8, one record per line, LF or CRLF endings. Blank
//! lines and lines starting with `#` are skipped.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Annotation, Dataset};
use crate::error::{Error, Result};
use crate::inference::InferenceState;
use crate::model::LabelId;
use crate::scalar::Scalar;
use crate::sim::{AssignmentPlan, Population};

/// Which column holds which field of an annotation triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnOrder {
    pub worker: usize,
    pub task: usize,
    pub label: usize,
}

impl Default for ColumnOrder {
    fn default() -> Self {
        ColumnOrder {
            worker: 0,
            task: 1,
            label: 2,
        }
    }
}

impl FromStr for ColumnOrder {
    type Err = Error;

    /// Three letters naming the columns left to right, e.g. `wtl` (the
    /// default) or `twl`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("column order `{s}` must permute `wtl`"));
        let chars: Vec<char> = s.trim().to_ascii_lowercase().chars().collect();
        if chars.len() != 3 {
            return Err(bad());
        }
        let find = |c| chars.iter().position(|&x| x == c).ok_or_else(bad);
        Ok(ColumnOrder {
            worker: find('w')?,
            task: find('t')?,
            label: find('l')?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ParseOptions {
    /// Label-space size; inferred from the distinct tokens when `None`.
    pub k: Option<usize>,
    pub columns: ColumnOrder,
}

fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.split('\n').enumerate().filter_map(|(i, line)| {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() || line.starts_with('#') {
            None
        } else {
            Some((i + 1, line.split('\t').map(str::trim).collect()))
        }
    })
}

/// Interns strings in first-seen order.
#[derive(Default)]
struct Interner {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Interner {
    fn from_names(names: &[String]) -> Self {
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        Interner {
            names: names.to_vec(),
            index,
        }
    }

    fn get(&self, s: &str) -> Option<usize> {
        self.index.get(s).copied()
    }

    fn intern(&mut self, s: &str) -> usize {
        if let Some(&i) = self.index.get(s) {
            return i;
        }
        let i = self.names.len();
        self.names.push(s.to_owned());
        self.index.insert(s.to_owned(), i);
        i
    }
}

/// Parses `worker<TAB>task<TAB>label` lines.
pub fn parse_annotations(text: &str, options: &ParseOptions) -> Result<Dataset> {
    let cols = options.columns;
    let mut workers = Interner::default();
    let mut tasks = Interner::default();
    let mut labels = Interner::default();
    let mut annotations = Vec::new();
    let mut seen = HashSet::new();
    for (line, fields) in records(text) {
        if fields.len() != 3 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let (w, t, l) = (fields[cols.worker], fields[cols.task], fields[cols.label]);
        if w.is_empty() || t.is_empty() || l.is_empty() {
            return Err(Error::Parse {
                line,
                msg: "empty field".into(),
            });
        }
        let a = Annotation {
            worker: workers.intern(w),
            task: tasks.intern(t),
            label: LabelId(labels.intern(l)),
        };
        if !seen.insert((a.worker, a.task)) {
            return Err(Error::DuplicatePair {
                line,
                worker: w.to_owned(),
                task: t.to_owned(),
            });
        }
        if let Some(k) = options.k {
            if labels.names.len() > k {
                return Err(Error::Parse {
                    line,
                    msg: format!("label `{l}` exceeds the declared k = {k}"),
                });
            }
        }
        annotations.push(a);
    }
    let k = options.k.unwrap_or(labels.names.len());
    let ds = Dataset::new(k, workers.names, tasks.names, annotations).map_err(|e| match e {
        Error::LabelSpace(k) if options.k.is_none() => Error::Parse {
            line: 0,
            msg: format!("found {k} distinct label(s); at least 2 are needed (or pass k)"),
        },
        other => other,
    })?;
    Ok(ds.with_label_names(labels.names, options.k.is_some()))
}

/// Parses `task<TAB>label` gold lines into `dataset`. Gold for tasks with no
/// annotations is kept aside and never counted.
pub fn parse_gold(text: &str, mut dataset: Dataset) -> Result<Dataset> {
    let task_index: HashMap<&str, usize> = dataset
        .tasks()
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();
    let mut labels = Interner::from_names(dataset.label_names());
    let mut gold: Vec<Option<LabelId>> = vec![None; dataset.num_tasks()];
    let mut unmatched = Vec::new();
    for (line, fields) in records(text) {
        if fields.len() != 2 || fields[0].is_empty() || fields[1].is_empty() {
            return Err(Error::Parse {
                line,
                msg: "expected `task<TAB>label`".into(),
            });
        }
        let (t, l) = (fields[0], fields[1]);
        let label = match labels.get(l) {
            Some(c) => c,
            None if dataset.k_explicit() && labels.names.len() < dataset.k() => labels.intern(l),
            None => {
                return Err(Error::Parse {
                    line,
                    msg: format!("gold label `{l}` is not in the label dictionary"),
                })
            }
        };
        match task_index.get(t) {
            Some(&i) => match gold[i] {
                Some(prev) if prev.0 != label => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("conflicting gold labels for task `{t}`"),
                    })
                }
                _ => gold[i] = Some(LabelId(label)),
            },
            None => unmatched.push((t.to_owned(), l.to_owned())),
        }
    }
    dataset.set_gold_parts(labels.names, gold, unmatched);
    Ok(dataset)
}

/// Fraction of gold tasks whose inferred label matches.
pub fn accuracy(labels: &[LabelId], gold: &[Option<LabelId>]) -> Result<f64> {
    let mut total = 0usize;
    let mut hits = 0usize;
    for (l, g) in labels.iter().zip(gold) {
        if let Some(g) = g {
            total += 1;
            hits += usize::from(l == g);
        }
    }
    if total == 0 {
        return Err(Error::EmptyGold);
    }
    Ok(hits as f64 / total as f64)
}

pub fn write_annotations(dataset: &Dataset) -> String {
    let mut out = String::new();
    for a in dataset.annotations() {
        let _ = writeln!(
            out,
            "{}\t{}\t{}",
            dataset.workers()[a.worker],
            dataset.tasks()[a.task],
            dataset.label_name(a.label)
        );
    }
    out
}

pub fn write_gold(dataset: &Dataset) -> String {
    let mut out = String::new();
    for (i, g) in dataset.gold().iter().enumerate() {
        if let Some(g) = g {
            let _ = writeln!(out, "{}\t{}", dataset.tasks()[i], dataset.label_name(*g));
        }
    }
    for (t, l) in dataset.gold_unmatched() {
        let _ = writeln!(out, "{t}\t{l}");
    }
    out
}

/// Per-task labels, difficulties and posteriors:
/// `task, label, difficulty, p(<label>)...`, with a `#` header.
pub fn write_task_results<T: Scalar>(dataset: &Dataset, state: &InferenceState<T>) -> String {
    let mut out = String::from("#task\tlabel\tdifficulty");
    for c in 0..dataset.k() {
        let _ = write!(out, "\tp({})", dataset.label_name(LabelId(c)));
    }
    out.push('\n');
    for (i, post) in state.posteriors.iter().enumerate() {
        let _ = write!(
            out,
            "{}\t{}\t{}",
            dataset.tasks()[i],
            dataset.label_name(post.argmax()),
            state.difficulties[i].get()
        );
        for p in post.probs() {
            let _ = write!(out, "\t{p}");
        }
        out.push('\n');
    }
    out
}

pub fn write_worker_results<T: Scalar>(dataset: &Dataset, state: &InferenceState<T>) -> String {
    let mut out = String::from("#worker\tability\n");
    for (j, e) in state.abilities.iter().enumerate() {
        let _ = writeln!(out, "{}\t{}", dataset.workers()[j], e.get());
    }
    out
}

/// Run summary written next to the result tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: String,
    pub tasks: usize,
    pub workers: usize,
    pub annotations: usize,
    pub k: usize,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_s: f64,
    pub accuracy: Option<f64>,
}

pub fn write_population(pop: &Population) -> (String, String) {
    let mut workers = String::from("#worker\ttype\tability\n");
    for w in &pop.workers {
        let _ = writeln!(workers, "{}\t{}\t{}", w.id, w.class, w.ability);
    }
    let mut tasks = String::from("#task\ttype\tdifficulty\tlabel\n");
    for t in &pop.tasks {
        let _ = writeln!(
            tasks,
            "{}\t{}\t{}\t{}",
            t.id, t.class, t.difficulty, t.label
        );
    }
    (workers, tasks)
}

pub fn write_assignment_log(pop: &Population, plan: &AssignmentPlan) -> String {
    let mut out = String::from("#phase\tworker\ttask\n");
    for s in &plan.slots {
        let _ = writeln!(
            out,
            "{}\t{}\t{}",
            s.phase, pop.workers[s.worker].id, pop.tasks[s.task].id
        );
    }
    out
}

/// One benchmark cell: a method on a dataset, averaged over `seeds` runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub method: String,
    /// Mean accuracy; absent when the dataset has no gold labels.
    pub accuracy: Option<f64>,
    pub accuracy_std: Option<f64>,
    pub wall_time_s: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<ReportRow>,
}

impl BenchmarkReport {
    pub fn row(&self, dataset: &str, method: &str) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.dataset == dataset && r.method == method)
    }
}

/// A report rendered for people (`table`) and for programs (`records`,
/// one JSON object per line).
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedReport {
    pub table: String,
    pub records: String,
}

fn first_seen<'a>(it: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for s in it {
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

fn fmt_acc(row: Option<&ReportRow>) -> String {
    match row.and_then(|r| r.accuracy.map(|a| (a, r.accuracy_std))) {
        Some((a, Some(sd))) if row.map_or(1, |r| r.seeds) > 1 => {
            format!("{:.1}%±{:.1}", a * 100.0, sd * 100.0)
        }
        Some((a, _)) => format!("{:.1}%", a * 100.0),
        None => "-".into(),
    }
}

fn fmt_time(row: Option<&ReportRow>) -> String {
    match row {
        Some(r) if r.wall_time_s < 1e-3 => "<1ms".into(),
        Some(r) if r.wall_time_s < 1.0 => format!("{:.1}ms", r.wall_time_s * 1e3),
        Some(r) => format!("{:.2}s", r.wall_time_s),
        None => "-".into(),
    }
}

/// Renders the report: datasets as rows, one ACC/Time column pair per
/// method.
pub fn write_report(report: &BenchmarkReport) -> RenderedReport {
    let methods = first_seen(report.rows.iter().map(|r| r.method.as_str()));
    let datasets = first_seen(report.rows.iter().map(|r| r.dataset.as_str()));

    let mut grid: Vec<Vec<String>> = Vec::new();
    let mut top = vec!["Dataset".to_string()];
    let mut sub = vec![String::new()];
    for m in &methods {
        top.push(m.to_uppercase());
        top.push(String::new());
        sub.push("ACC".into());
        sub.push("Time".into());
    }
    grid.push(top);
    grid.push(sub);
    for d in &datasets {
        let mut line = vec![d.to_string()];
        for m in &methods {
            let row = report.row(d, m);
            line.push(fmt_acc(row));
            line.push(fmt_time(row));
        }
        grid.push(line);
    }
    let ncols = grid[0].len();
    let widths: Vec<usize> = (0..ncols)
        .map(|c| grid.iter().map(|l| l[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut table = String::new();
    for line in &grid {
        let cells: Vec<String> = line
            .iter()
            .zip(&widths)
            .map(|(cell, &w)| format!("{cell:<w$}"))
            .collect();
        table.push_str(cells.join("  ").trim_end());
        table.push('\n');
    }

    let mut records = String::new();
    for row in &report.rows {
        records.push_str(&serde_json::to_string(row).expect("report row serializes"));
        records.push('\n');
    }
    RenderedReport { table, records }
}

/// Reads the line-per-record form produced by [`write_report`].
pub fn read_report_records(text: &str) -> Result<BenchmarkReport> {
    let rows = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect::<std::result::Result<Vec<ReportRow>, _>>()?;
    Ok(BenchmarkReport { rows })
}
