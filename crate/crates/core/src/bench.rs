//! Benchmark harness: runs aggregation methods over simulated seeds or
//! loaded datasets and collects accuracy and timing.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baselines::{run_ds, run_glad, run_mv, run_wmv, run_zc};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::inference::{run_wtim, InferenceConfig, InferenceState};
use crate::io::{accuracy, BenchmarkReport, ReportRow};
use crate::scalar::Scalar;
use crate::sim::{
    run_assignment, sample_population, simulate_campaign, AssignmentConfig, Population,
    PopulationSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Mv,
    Wmv,
    Zc,
    Ds,
    Glad,
    Wtim,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Mv,
        Method::Wmv,
        Method::Zc,
        Method::Ds,
        Method::Glad,
        Method::Wtim,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Mv => "mv",
            Method::Wmv => "wmv",
            Method::Zc => "zc",
            Method::Ds => "ds",
            Method::Glad => "glad",
            Method::Wtim => "wtim",
        }
    }

    pub fn run<T: Scalar>(
        self,
        dataset: &Dataset,
        config: &InferenceConfig,
    ) -> Result<InferenceState<T>> {
        match self {
            Method::Mv => run_mv(dataset),
            Method::Wmv => run_wmv(dataset, config),
            Method::Zc => run_zc(dataset, config),
            Method::Ds => run_ds(dataset, config),
            Method::Glad => run_glad(dataset, config),
            Method::Wtim => run_wtim(dataset, config),
        }
    }

    /// Runs in double precision, timing only the inference itself.
    pub fn timed_run(
        self,
        dataset: &Dataset,
        config: &InferenceConfig,
    ) -> Result<(InferenceState<f64>, f64)> {
        let start = Instant::now();
        let state = self.run(dataset, config)?;
        Ok((state, start.elapsed().as_secs_f64()))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.name() == lower)
            .ok_or_else(|| Error::UnknownMethod(s.trim().to_owned()))
    }
}

/// Parses a comma-separated method list such as `mv,wmv,wtim`.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let methods = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<_>>>()?;
    if methods.is_empty() {
        return Err(Error::Config("at least one method is required".into()));
    }
    Ok(methods)
}

/// Population and random campaign for one seed.
pub fn simulate_seed(spec: &PopulationSpec, seed: u64) -> Result<(Population, Dataset)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pop = sample_population(spec, &mut rng)?;
    let ds = simulate_campaign(&pop, spec.r, &mut rng)?;
    Ok((pop, ds))
}

/// Results of every method on one seed, in method order.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    pub accuracy: Vec<f64>,
    pub wall_time_s: Vec<f64>,
    pub iterations: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SimulationBench {
    pub spec: PopulationSpec,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    pub config: InferenceConfig,
}

impl SimulationBench {
    pub fn name(&self) -> String {
        format!("Simulation data (k = {})", self.spec.k)
    }

    /// Runs every method on every seed's dataset. Seeds run in parallel;
    /// each cell is single-threaded.
    pub fn run(&self) -> Result<(BenchmarkReport, Vec<SeedOutcome>)> {
        let outcomes = self
            .seeds
            .par_iter()
            .map(|&seed| {
                let (_, ds) = simulate_seed(&self.spec, seed)?;
                let mut out = SeedOutcome {
                    seed,
                    accuracy: Vec::new(),
                    wall_time_s: Vec::new(),
                    iterations: Vec::new(),
                };
                for m in &self.methods {
                    let (state, secs) = m.timed_run(&ds, &self.config)?;
                    out.accuracy.push(accuracy(&state.labels(), ds.gold())?);
                    out.wall_time_s.push(secs);
                    out.iterations.push(state.iteration);
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;

        let name = self.name();
        let rows = self
            .methods
            .iter()
            .enumerate()
            .map(|(mi, m)| {
                let acc: Vec<f64> = outcomes.iter().map(|o| o.accuracy[mi]).collect();
                let time: Vec<f64> = outcomes.iter().map(|o| o.wall_time_s[mi]).collect();
                let (mean, sd) = mean_std(&acc);
                ReportRow {
                    dataset: name.clone(),
                    method: m.name().to_owned(),
                    accuracy: Some(mean),
                    accuracy_std: Some(sd),
                    wall_time_s: mean_std(&time).0,
                    seeds: outcomes.len(),
                }
            })
            .collect();
        Ok((BenchmarkReport { rows }, outcomes))
    }
}

/// One run per method on a loaded dataset.
pub fn run_dataset_bench(
    name: &str,
    dataset: &Dataset,
    methods: &[Method],
    config: &InferenceConfig,
) -> Result<BenchmarkReport> {
    let rows = methods
        .iter()
        .map(|m| {
            let (state, secs) = m.timed_run(dataset, config)?;
            let acc = match accuracy(&state.labels(), dataset.gold()) {
                Ok(a) => Some(a),
                Err(Error::EmptyGold) => None,
                Err(e) => return Err(e),
            };
            Ok(ReportRow {
                dataset: name.to_owned(),
                method: m.name().to_owned(),
                accuracy: acc,
                accuracy_std: None,
                wall_time_s: secs,
                seeds: 1,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BenchmarkReport { rows })
}

/// Paired comparison on one seed: accuracy of a random campaign with the
/// population's `r`, and of budgeted assignment over the same population.
pub fn assignment_vs_random(
    spec: &PopulationSpec,
    seed: u64,
    budget: usize,
    config: &AssignmentConfig,
) -> Result<(f64, f64)> {
    let (pop, random_ds) = simulate_seed(spec, seed)?;
    let random_state = run_wtim::<f64>(&random_ds, &config.inference)?;
    let random_acc = accuracy(&random_state.labels(), random_ds.gold())?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_a551_9000_0000);
    let outcome = run_assignment(&pop, budget, config, &mut rng)?;
    let assigned_acc = accuracy(&outcome.state.labels(), outcome.dataset.gold())?;
    Ok((random_acc, assigned_acc))
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
