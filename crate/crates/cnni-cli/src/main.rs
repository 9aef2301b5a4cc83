//! Command-line harness binding datasets, networks, objectives and
//! optimizers into reproducible runs. Every command is a pure function of
//! its input files, flags and seed; models and traces are byte-identical
//! across reruns (summaries additionally carry the wall time).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use cnni::data::{self, DataSet};
use cnni::evaluation::{
    active_labels, adjusted_rand_index, decision_boundary, model_select, predict, Candidate,
};
use cnni::network::{Head, LayerSpec, ModelFile, Network, TrainingMetadata};
use cnni::objectives::{ObjectiveEval, ObjectiveKind};
use cnni::optimizers::{train, OptimizerKind, TrainConfig};

#[derive(Parser)]
#[command(
    name = "cnni",
    version,
    about = "Cluster data with a feed-forward network trained against an internal validity index"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset as CSV
    Generate(GenerateArgs),
    /// Train a network on a dataset
    Train(TrainArgs),
    /// Label a dataset with a trained model
    Eval(EvalArgs),
    /// Export a trained model's decision-boundary grid
    Boundary(BoundaryArgs),
    /// Train candidate architectures and rank them by objective value
    Select(SelectArgs),
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => generate(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Boundary(args) => cmd_boundary(args),
        Command::Select(args) => cmd_select(args),
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// Generator: moons | circles | blobs | aniso | spirals
    #[arg(long)]
    kind: String,
    /// Number of points
    #[arg(long)]
    n: usize,
    /// Gaussian noise scale (moons, circles, spirals)
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    /// Number of blobs
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Blob standard deviation
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    /// Inner-to-outer radius ratio (circles)
    #[arg(long, default_value_t = 0.5)]
    gap: f64,
    /// Spiral turns
    #[arg(long, default_value_t = 1.5)]
    turns: f64,
    #[arg(long)]
    seed: u64,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

fn generate(args: GenerateArgs) -> Result<()> {
    let dataset = match args.kind.as_str() {
        "moons" => data::gen_moons(args.n, args.noise, args.seed),
        "circles" => data::gen_circles(args.n, args.noise, args.gap, args.seed),
        "blobs" => data::gen_blobs(args.n, args.k, None, args.spread, args.seed),
        "aniso" => data::gen_aniso(args.n, args.seed),
        "spirals" => data::gen_spirals(args.n, args.turns, args.noise, args.seed),
        other => bail!("unknown kind '{other}', valid kinds: moons, circles, blobs, aniso, spirals"),
    }?;
    data::save_csv(&dataset, &args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

#[derive(Args)]
struct NetArgs {
    /// Comma-separated layer sizes, e.g. 2,80,80,80,10
    #[arg(long)]
    net: String,
    /// Output head: raw | softmax
    #[arg(long, default_value = "raw")]
    head: String,
}

impl NetArgs {
    fn spec(&self) -> Result<LayerSpec> {
        Ok(parse_spec(&self.net, &self.head)?)
    }
}

fn parse_spec(net: &str, head: &str) -> Result<LayerSpec> {
    let sizes = net
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .with_context(|| format!("invalid --net '{net}', expected comma-separated sizes"))?;
    let head = parse_head(head)?;
    Ok(LayerSpec::new(sizes, head)?)
}

fn parse_head(head: &str) -> Result<Head> {
    match head {
        "raw" => Ok(Head::Raw),
        "softmax" => Ok(Head::Softmax),
        other => bail!("unknown head '{other}', expected raw or softmax"),
    }
}

#[derive(Args, Clone)]
struct OptimArgs {
    /// Objective: sc | mmj-sc | sci-v2 | kmeans | mmj-kmeans | mmj-kmeans-soft
    #[arg(long)]
    objective: String,
    /// Optimizer: cd | sbsbp | mb-sbsbp
    #[arg(long)]
    optimizer: String,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 100_000)]
    max_steps: usize,
    #[arg(long, default_value_t = 100)]
    iterations: usize,
    #[arg(long, default_value_t = 500)]
    inner_steps: usize,
    #[arg(long, default_value_t = 500)]
    patience: usize,
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
    #[arg(long, default_value_t = 1)]
    rho1: usize,
    #[arg(long, default_value_t = 50)]
    rho2: usize,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    #[arg(long, default_value_t = 0.25)]
    sample_fraction: f64,
}

impl OptimArgs {
    fn parse(&self, seed: u64) -> Result<(OptimizerKind, TrainConfig)> {
        let objective: ObjectiveKind = self.objective.parse()?;
        let optimizer: OptimizerKind = self.optimizer.parse()?;
        let config = TrainConfig {
            objective,
            epochs: self.epochs,
            max_steps: self.max_steps,
            iterations: self.iterations,
            inner_steps: self.inner_steps,
            patience: self.patience,
            tolerance: self.tolerance,
            rho1: self.rho1,
            rho2: self.rho2,
            sigma: self.sigma,
            sample_fraction: self.sample_fraction,
            seed,
            ..TrainConfig::default()
        };
        Ok((optimizer, config))
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset CSV
    #[arg(long)]
    data: PathBuf,
    /// Last CSV column holds ground-truth labels
    #[arg(long)]
    truth: bool,
    #[command(flatten)]
    net: NetArgs,
    #[command(flatten)]
    optim: OptimArgs,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Serialize)]
struct TrainSummary {
    objective: String,
    optimizer: String,
    seed: u64,
    best_value: f64,
    steps: u64,
    evaluations: u64,
    wall_time_ms: u128,
    active_labels: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    ari: Option<f64>,
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let dataset = load_data(&args.data, args.truth)?;
    let spec = args.net.spec()?;
    let (optimizer, config) = args.optim.parse(args.seed)?;
    let net = Network::init_random(spec, args.seed);

    let start = Instant::now();
    let outcome = train(net, &dataset, optimizer, &config)?;
    let wall_time_ms = start.elapsed().as_millis();

    let assignment = predict(&outcome.network, &dataset)?;
    let (active, _) = active_labels(&assignment);
    let ari = match &dataset.truth {
        Some(truth) => Some(adjusted_rand_index(assignment.hard(), truth)?),
        None => None,
    };

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;

    let mut model = ModelFile::from_network(&outcome.network);
    model.seed = Some(args.seed);
    model.objective = Some(config.objective.id().to_string());
    model.training_metadata = Some(TrainingMetadata {
        optimizer: optimizer.id().to_string(),
        steps: outcome.trace.records.last().map_or(0, |r| r.step),
        best_value: outcome.trace.best_value,
    });
    model.save(&args.out_dir.join("model.json"))?;
    outcome.trace.write_csv(&args.out_dir.join("trace.csv"))?;

    let summary = TrainSummary {
        objective: config.objective.id().to_string(),
        optimizer: optimizer.id().to_string(),
        seed: args.seed,
        best_value: outcome.trace.best_value,
        steps: outcome.trace.records.last().map_or(0, |r| r.step),
        evaluations: outcome.trace.evaluations,
        wall_time_ms,
        active_labels: active,
        ari,
    };
    write_json(&args.out_dir.join("summary.json"), &summary)?;
    Ok(())
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Last CSV column holds ground-truth labels
    #[arg(long)]
    truth: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Serialize)]
struct EvalSummary {
    n: usize,
    active_labels: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    objective: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    objective_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ari: Option<f64>,
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let dataset = load_data(&args.data, args.truth)?;
    let model = ModelFile::load(&args.model)?;
    let net = model.to_network()?;
    let assignment = predict(&net, &dataset)?;

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;

    // Labels CSV mirrors the dataset rows, appending the predicted label
    // and, under a softmax head, the chosen-cluster probability.
    let mut rows = String::new();
    for (i, point) in dataset.points.iter().enumerate() {
        let coords: Vec<String> = point.iter().map(f64::to_string).collect();
        rows.push_str(&coords.join(","));
        rows.push_str(&format!(",{}", assignment.hard()[i]));
        if let Some(p_max) = assignment.p_max() {
            rows.push_str(&format!(",{}", p_max[i]));
        }
        rows.push('\n');
    }
    std::fs::write(args.out_dir.join("labels.csv"), rows)
        .with_context(|| "writing labels.csv")?;

    let objective_value = match &model.objective {
        Some(id) => {
            let kind: ObjectiveKind = id.parse()?;
            let eval = ObjectiveEval::new(kind, dataset.points.clone(), None)?;
            Some(eval.score(&assignment))
        }
        None => None,
    };
    let ari = match &dataset.truth {
        Some(truth) => Some(adjusted_rand_index(assignment.hard(), truth)?),
        None => None,
    };
    let (active, _) = active_labels(&assignment);
    let summary = EvalSummary {
        n: dataset.n(),
        active_labels: active,
        objective: model.objective.clone(),
        objective_value,
        ari,
    };
    write_json(&args.out_dir.join("eval.json"), &summary)?;
    Ok(())
}

#[derive(Args)]
struct BoundaryArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Last CSV column holds ground-truth labels
    #[arg(long)]
    truth: bool,
    /// Cells per axis
    #[arg(long, default_value_t = 100)]
    resolution: usize,
    /// Also write an SVG plot of the grid with the data overlaid
    #[arg(long)]
    svg: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

fn cmd_boundary(args: BoundaryArgs) -> Result<()> {
    let dataset = load_data(&args.data, args.truth)?;
    let model = ModelFile::load(&args.model)?;
    let net = model.to_network()?;
    let grid = decision_boundary(&net, &dataset, args.resolution)?;

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    grid.write_csv(&args.out_dir.join("boundary.csv"))?;
    if args.svg {
        let assignment = predict(&net, &dataset)?;
        grid.write_svg(
            &args.out_dir.join("boundary.svg"),
            Some((&dataset, &assignment)),
        )?;
    }
    Ok(())
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    data: PathBuf,
    /// Last CSV column holds ground-truth labels
    #[arg(long)]
    truth: bool,
    /// Candidate layer sizes; repeat for several candidates
    #[arg(long, required = true)]
    net: Vec<String>,
    /// Output head: raw | softmax
    #[arg(long, default_value = "raw")]
    head: String,
    /// Comma-separated list of seeds, each applied to every candidate
    #[arg(long, default_value = "0")]
    seeds: String,
    #[command(flatten)]
    optim: OptimArgs,
    #[arg(long)]
    out_dir: PathBuf,
}

fn cmd_select(args: SelectArgs) -> Result<()> {
    let dataset = load_data(&args.data, args.truth)?;
    let seeds = args
        .seeds
        .split(',')
        .map(|s| s.trim().parse::<u64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .with_context(|| format!("invalid --seeds '{}'", args.seeds))?;
    let mut candidates = Vec::new();
    for net in &args.net {
        let spec = parse_spec(net, &args.head)?;
        for &seed in &seeds {
            candidates.push(Candidate {
                spec: spec.clone(),
                seed,
            });
        }
    }
    let (optimizer, config) = args.optim.parse(seeds[0])?;
    let report = model_select(&dataset, &candidates, optimizer, &config)?;

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    write_json(&args.out_dir.join("selection.json"), &report)?;

    let mut csv = String::from("sizes,head,seed,best_value,active_labels,ari,error\n");
    for row in &report.rows {
        let sizes: Vec<String> = row.sizes.iter().map(usize::to_string).collect();
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            sizes.join("x"),
            row.head,
            row.seed,
            row.best_value,
            row.active_labels,
            row.ari.map_or_else(String::new, |v| v.to_string()),
            row.error.clone().unwrap_or_default(),
        ));
    }
    std::fs::write(args.out_dir.join("selection.csv"), csv)
        .with_context(|| "writing selection.csv")?;
    Ok(())
}

fn load_data(path: &Path, has_truth: bool) -> Result<DataSet> {
    Ok(data::load_csv(path, has_truth)
        .with_context(|| format!("loading {}", path.display()))?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).context("serializing JSON")?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
