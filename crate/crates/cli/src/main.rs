use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wtim::bench::{parse_methods, run_dataset_bench, simulate_seed, Method, SimulationBench};
use wtim::io::{
    accuracy, parse_annotations, parse_gold, write_annotations, write_assignment_log, write_gold,
    write_population, write_report, write_task_results, write_worker_results, BenchmarkReport,
    ColumnOrder, ParseOptions, RunSummary,
};
use wtim::sim::{run_assignment, sample_population, AssignmentConfig, PopulationSpec, TaskOrder};
use wtim::{Dataset, InferenceConfig, InitMethod, LabelUpdate};

/// Truth inference, crowd simulation and budgeted assignment.
#[derive(Parser)]
#[command(name = "wtim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a population and a random campaign, write dataset files
    Simulate(SimulateArgs),
    /// Aggregate an annotation file with one method
    Infer(InferArgs),
    /// Compare methods on simulated seeds or on dataset files
    Bench(BenchArgs),
    /// Run two-phase budgeted assignment on a sampled population
    Assign(AssignArgs),
}

#[derive(Args)]
struct PopulationArgs {
    /// TOML population spec; the reference population when absent
    #[arg(long)]
    population: Option<PathBuf>,
    /// Number of tasks
    #[arg(long)]
    n: Option<usize>,
    /// Number of workers
    #[arg(long)]
    m: Option<usize>,
    /// Number of labels
    #[arg(long)]
    k: Option<usize>,
    /// Annotations per task in a random campaign
    #[arg(long)]
    r: Option<usize>,
}

impl PopulationArgs {
    fn spec(&self) -> Result<PopulationSpec> {
        let mut spec = match &self.population {
            Some(path) => PopulationSpec::from_toml(&read(path)?)
                .with_context(|| format!("loading {}", path.display()))?,
            None => PopulationSpec::standard(self.k.unwrap_or(4)),
        };
        spec.n = self.n.unwrap_or(spec.n);
        spec.m = self.m.unwrap_or(spec.m);
        spec.k = self.k.unwrap_or(spec.k);
        spec.r = self.r.unwrap_or(spec.r);
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args)]
struct InferenceArgs {
    /// Initial labels for the main model: mv or wmv
    #[arg(long, default_value = "mv")]
    init: InitMethod,
    /// Label update inside the loop: hard or soft
    #[arg(long, default_value = "hard")]
    label_update: LabelUpdate,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

impl InferenceArgs {
    fn config(&self) -> Result<InferenceConfig> {
        let config = InferenceConfig {
            init_method: self.init,
            max_iters: self.max_iters,
            tolerance: self.tolerance,
            label_update: self.label_update,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct DataArgs {
    /// Column order of annotation files, a permutation of `wtl`
    #[arg(long, default_value = "wtl")]
    columns: ColumnOrder,
    /// Declared label count for dataset files; inferred when absent
    #[arg(long = "labels")]
    labels: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    population: PopulationArgs,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InferArgs {
    /// Annotation file
    #[arg(long)]
    data: PathBuf,
    /// Gold label file
    #[arg(long)]
    gold: Option<PathBuf>,
    #[arg(long, default_value = "wtim")]
    method: Method,
    #[command(flatten)]
    data_format: DataArgs,
    #[command(flatten)]
    inference: InferenceArgs,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated methods
    #[arg(long, default_value = "mv,wmv,zc,ds,glad,wtim")]
    methods: String,
    /// Dataset files; simulation mode when none are given
    #[arg(long)]
    data: Vec<PathBuf>,
    /// Gold files, matched to --data by position
    #[arg(long)]
    gold: Vec<PathBuf>,
    /// First simulation seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of simulation seeds
    #[arg(long, default_value_t = 30)]
    seeds: u64,
    #[command(flatten)]
    population: PopulationArgs,
    #[command(flatten)]
    data_format: DataArgs,
    #[command(flatten)]
    inference: InferenceArgs,
    /// Output directory for the table and records
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AssignArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Total annotations to buy; at least three per task
    #[arg(long)]
    budget: usize,
    /// Phase-two task order by inferred difficulty
    #[arg(long, default_value = "descending")]
    task_order: TaskOrder,
    #[command(flatten)]
    population: PopulationArgs,
    #[command(flatten)]
    inference: InferenceArgs,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn out_dir(dir: &Path) -> Result<&Path> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn load_dataset(data: &Path, gold: Option<&Path>, format: &DataArgs) -> Result<Dataset> {
    let options = ParseOptions {
        k: format.labels,
        columns: format.columns,
    };
    let ds = parse_annotations(&read(data)?, &options)
        .with_context(|| format!("parsing {}", data.display()))?;
    match gold {
        Some(g) => parse_gold(&read(g)?, ds).with_context(|| format!("parsing {}", g.display())),
        None => Ok(ds),
    }
}

/// Writes label, worker and summary files for one method run and returns
/// the summary.
fn write_results(
    dir: &Path,
    ds: &Dataset,
    method: Method,
    config: &InferenceConfig,
) -> Result<RunSummary> {
    let (state, secs) = method.timed_run(ds, config)?;
    let acc = if ds.has_gold() {
        Some(accuracy(&state.labels(), ds.gold())?)
    } else {
        None
    };
    let summary = RunSummary {
        method: method.name().to_owned(),
        tasks: ds.num_tasks(),
        workers: ds.num_workers(),
        annotations: ds.annotations().len(),
        k: ds.k(),
        iterations: state.iteration,
        converged: state.converged,
        wall_time_s: secs,
        accuracy: acc,
    };
    write(dir, "labels.tsv", &write_task_results(ds, &state))?;
    write(dir, "workers.tsv", &write_worker_results(ds, &state))?;
    write(
        dir,
        "summary.json",
        &(serde_json::to_string_pretty(&summary)? + "\n"),
    )?;
    Ok(summary)
}

fn print_summary(s: &RunSummary) {
    print!(
        "{}: {} tasks, {} workers, {} annotations, {} iterations{}, {:.3}s",
        s.method,
        s.tasks,
        s.workers,
        s.annotations,
        s.iterations,
        if s.converged { "" } else { " (not converged)" },
        s.wall_time_s
    );
    match s.accuracy {
        Some(a) => println!(", accuracy {a:.4}"),
        None => println!(),
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let spec = args.population.spec()?;
    let (pop, ds) = simulate_seed(&spec, args.seed)?;
    let dir = out_dir(&args.out)?;
    let (workers, tasks) = write_population(&pop);
    write(dir, "annotations.tsv", &write_annotations(&ds))?;
    write(dir, "gold.tsv", &write_gold(&ds))?;
    write(dir, "population_workers.tsv", &workers)?;
    write(dir, "population_tasks.tsv", &tasks)?;
    println!(
        "seed {}: {} tasks, {} workers, {} annotations -> {}",
        args.seed,
        pop.tasks.len(),
        pop.workers.len(),
        ds.annotations().len(),
        dir.display()
    );
    Ok(())
}

fn infer(args: InferArgs) -> Result<()> {
    let config = args.inference.config()?;
    let ds = load_dataset(&args.data, args.gold.as_deref(), &args.data_format)?;
    let dir = out_dir(&args.out)?;
    let summary = write_results(dir, &ds, args.method, &config)?;
    print_summary(&summary);
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let methods = parse_methods(&args.methods)?;
    let config = args.inference.config()?;
    let report = if args.data.is_empty() {
        if !args.gold.is_empty() {
            bail!("--gold needs matching --data files");
        }
        let bench = SimulationBench {
            spec: args.population.spec()?,
            seeds: (args.seed..args.seed + args.seeds).collect(),
            methods,
            config,
        };
        bench.run()?.0
    } else {
        if !args.gold.is_empty() && args.gold.len() != args.data.len() {
            bail!(
                "got {} --gold files for {} --data files",
                args.gold.len(),
                args.data.len()
            );
        }
        let mut rows = Vec::new();
        for (i, data) in args.data.iter().enumerate() {
            let ds = load_dataset(
                data,
                args.gold.get(i).map(PathBuf::as_path),
                &args.data_format,
            )?;
            let name = data
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| data.display().to_string());
            rows.extend(run_dataset_bench(&name, &ds, &methods, &config)?.rows);
        }
        BenchmarkReport { rows }
    };
    let rendered = write_report(&report);
    print!("{}", rendered.table);
    if let Some(out) = &args.out {
        let dir = out_dir(out)?;
        write(dir, "report.txt", &rendered.table)?;
        write(dir, "report.jsonl", &rendered.records)?;
    }
    Ok(())
}

fn assign(args: AssignArgs) -> Result<()> {
    let spec = args.population.spec()?;
    let inference = args.inference.config()?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let pop = sample_population(&spec, &mut rng)?;
    let config = AssignmentConfig {
        inference,
        task_order: args.task_order,
    };
    let outcome = run_assignment(&pop, args.budget, &config, &mut rng)?;
    let dir = out_dir(&args.out)?;
    let ds = &outcome.dataset;
    let (workers, tasks) = write_population(&pop);
    write(dir, "annotations.tsv", &write_annotations(ds))?;
    write(dir, "gold.tsv", &write_gold(ds))?;
    write(dir, "population_workers.tsv", &workers)?;
    write(dir, "population_tasks.tsv", &tasks)?;
    write(
        dir,
        "assignment.tsv",
        &write_assignment_log(&pop, &outcome.plan),
    )?;
    let summary = write_results(dir, ds, Method::Wtim, &inference)?;
    println!(
        "budget {}: {} slots, {} left unspent",
        args.budget,
        outcome.plan.slots.len(),
        outcome.plan.remaining_budget
    );
    print_summary(&summary);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Infer(a) => infer(a),
        Command::Bench(a) => bench(a),
        Command::Assign(a) => assign(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
