//! `netmend` command-line front end.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use netmend::io::{load_job_file, load_labeled_set, load_model, save_model, JobFile, LabeledSet};
use netmend::lp::Norm;
use netmend::report::{compare, format_compare_table, RepairReport};
use netmend::search::{proposal_queries, repair, Heuristic, JobContext};
use netmend::single_layer::build_final_layer_program;
use netmend::Network;

const EXIT_NOT_REPAIRED: u8 = 2;

#[derive(Parser)]
#[command(name = "netmend", version, about = "Minimal multi-layer repair of ReLU networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Repair a model so every job point meets its goal.
    Repair {
        model: PathBuf,
        job: PathBuf,
        /// Where to write the repaired model.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to write the JSON report.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Include the full search trace in the report.
        #[arg(long)]
        trace: bool,
        /// Write the LP tableaux of the best proposal's sub-queries.
        #[arg(long)]
        dump_lp: Option<PathBuf>,
        /// Labeled samples for accuracy before/after.
        #[arg(long)]
        accuracy_set: Option<PathBuf>,
        #[command(flatten)]
        knobs: Knobs,
    },
    /// Print a model's output on one input, e.g. `"[1]"` or `1,0.5`.
    Eval { model: PathBuf, input: String },
    /// Summarize a model's shape and weights.
    Inspect { model: PathBuf },
    /// Run several heuristics on one job under the same budget.
    Compare {
        model: PathBuf,
        job: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "random,greedy,mcts")]
        heuristics: Vec<Heuristic>,
        #[arg(long)]
        accuracy_set: Option<PathBuf>,
        #[command(flatten)]
        knobs: Knobs,
    },
}

/// Overrides for the job file's search knobs.
#[derive(Args, Default)]
struct Knobs {
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    heuristic: Option<Heuristic>,
    #[arg(long, value_parser = parse_norm)]
    norm: Option<Norm>,
    #[arg(long)]
    timeout_secs: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    separation_indices: Option<Vec<usize>>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    random_radius: Option<f64>,
    #[arg(long)]
    mcts_iterations: Option<usize>,
    #[arg(long)]
    mcts_depth: Option<usize>,
    #[arg(long)]
    mcts_simulations: Option<usize>,
    #[arg(long)]
    mcts_exploration: Option<f64>,
    #[arg(long)]
    max_evaluations: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    backend: Option<String>,
}

fn parse_norm(s: &str) -> std::result::Result<Norm, String> {
    s.parse::<Norm>().map_err(|e| e.to_string())
}

impl Knobs {
    fn apply(self, job: &mut JobFile) {
        macro_rules! set {
            ($($f:ident),*) => { $( if self.$f.is_some() { job.$f = self.$f; } )* };
        }
        set!(
            epsilon,
            heuristic,
            norm,
            timeout_secs,
            seed,
            separation_indices,
            margin,
            random_radius,
            mcts_iterations,
            mcts_depth,
            mcts_simulations,
            mcts_exploration,
            max_evaluations,
            workers,
            backend
        );
    }
}

fn load_inputs(model: &PathBuf, job: &PathBuf, knobs: Knobs) -> Result<(Network, netmend::io::Job)> {
    let net = load_model(model).with_context(|| format!("loading model {}", model.display()))?;
    let mut file = load_job_file(job).with_context(|| format!("loading job {}", job.display()))?;
    knobs.apply(&mut file);
    let job = file.resolve().with_context(|| format!("invalid job {}", job.display()))?;
    job.validate(&net).context("job does not fit the model")?;
    Ok((net, job))
}

fn load_set(path: Option<&PathBuf>, net: &Network) -> Result<Option<LabeledSet>> {
    let Some(path) = path else { return Ok(None) };
    let set = load_labeled_set(path).with_context(|| format!("loading samples {}", path.display()))?;
    set.validate(net).context("labeled set does not fit the model")?;
    if set.is_empty() {
        bail!("labeled set {} is empty", path.display());
    }
    Ok(Some(set))
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

fn parse_input(s: &str) -> Result<Vec<f64>> {
    let t = s.trim();
    if t.starts_with('[') {
        return serde_json::from_str(t).with_context(|| format!("input `{s}` is not a JSON number array"));
    }
    t.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<f64>().with_context(|| format!("bad number `{p}`")))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn cmd_repair(
    model: PathBuf,
    job_path: PathBuf,
    out: Option<PathBuf>,
    report_path: Option<PathBuf>,
    trace: bool,
    dump_lp: Option<PathBuf>,
    accuracy_set: Option<PathBuf>,
    knobs: Knobs,
) -> Result<ExitCode> {
    let (net, job) = load_inputs(&model, &job_path, knobs)?;
    let samples = load_set(accuracy_set.as_ref(), &net)?;
    let result = repair(&net, &job.points, &job.separation, &job.config)?;
    let report = RepairReport::build(&net, &job, &result, samples.as_ref(), trace)?;
    print!("{}", report.summary());

    if let Some(path) = out {
        save_model(&result.network, &path).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = report_path {
        fs::write(&path, report.to_json() + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = dump_lp {
        let text = match &result.best_proposal {
            Some(p) => {
                let backend = job.config.registry.get(&job.config.backend)?;
                let ctx = JobContext::new(
                    &net,
                    &job.points,
                    &job.separation,
                    job.config.epsilon,
                    job.config.norm,
                    backend,
                )?;
                let mut text = String::new();
                for (s, q) in proposal_queries(&ctx, p)?.iter().enumerate() {
                    text.push_str(&format!("## sub-network {s}\n"));
                    text.push_str(&build_final_layer_program(q)?.to_tableau_text());
                    text.push('\n');
                }
                text
            }
            None => "# no feasible proposal found\n".to_string(),
        };
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(if result.is_repaired() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NOT_REPAIRED)
    })
}

fn cmd_inspect(model: PathBuf) -> Result<ExitCode> {
    let net = load_model(&model).with_context(|| format!("loading model {}", model.display()))?;
    let params: usize = net.weights().iter().map(|w| w.rows() * w.cols()).sum();
    println!("layers: {}", net.num_layers());
    println!("layer sizes: {:?}", net.layer_sizes());
    println!("weights: {params}");
    println!("biases: {}", if net.has_biases() { "yes" } else { "no" });
    for (i, w) in net.weights().iter().enumerate() {
        println!(
            "  W{i}: {}x{}  L1 {}  Linf {}",
            w.rows(),
            w.cols(),
            w.l1_norm(),
            w.linf_norm()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Repair {
            model,
            job,
            out,
            report,
            trace,
            dump_lp,
            accuracy_set,
            knobs,
        } => cmd_repair(model, job, out, report, trace, dump_lp, accuracy_set, knobs),
        Command::Eval { model, input } => {
            let net = load_model(&model).with_context(|| format!("loading model {}", model.display()))?;
            let x = parse_input(&input)?;
            let y = net.output(&x)?;
            println!("{}", fmt_vec(&y));
            println!("label: {}", net.classify(&x)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Inspect { model } => cmd_inspect(model),
        Command::Compare {
            model,
            job,
            heuristics,
            accuracy_set,
            knobs,
        } => {
            let (net, job) = load_inputs(&model, &job, knobs)?;
            let samples = load_set(accuracy_set.as_ref(), &net)?;
            let rows = compare(&net, &job, &heuristics, samples.as_ref())?;
            print!("{}", format_compare_table(&rows));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
