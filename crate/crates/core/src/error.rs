use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("label-space size must be at least 2, got {0}")]
    LabelSpace(usize),
    #[error("{what} = {value} is outside {range}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("label index {label} is invalid for k = {k}")]
    InvalidLabel { label: usize, k: usize },
    #[error("discriminability requires 1 > e1 > e2 > 0, got e1 = {e1}, e2 = {e2}")]
    AbilityOrder { e1: f64, e2: f64 },
    #[error("task `{0}` has no annotations")]
    EmptyTask(String),
    #[error("worker `{0}` has no annotations")]
    IdleWorker(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: duplicate annotation by worker `{worker}` on task `{task}`")]
    DuplicatePair {
        line: usize,
        worker: String,
        task: String,
    },
    #[error("gold label set is empty; accuracy is undefined")]
    EmptyGold,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("budget {budget} is below the phase-one minimum of {min} annotations (3 per task)")]
    Budget { budget: usize, min: usize },
    #[error("unknown method `{0}` (expected one of mv, wmv, zc, ds, glad, wtim)")]
    UnknownMethod(String),
    #[error("invalid report record: {0}")]
    Report(#[from] serde_json::Error),
}
