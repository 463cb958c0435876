use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dagbandit::dag::load_graph;
use dagbandit::harness::{
    emit_outputs, paper_sim_model, run_experiment, swapped_paper_sim_model, AlgoSpec, Comparator,
    ExperimentConfig, HarnessError, LossModel, QueryRate, SeriesKind,
};

#[derive(Parser)]
#[command(name = "dagbandit", version, about = "Online shortest-path experiments on DAGs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run algorithms against a loss model and write regret traces.
    Run(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ComparatorArg {
    Fixed,
    Partition,
}

#[derive(Args)]
struct RunArgs {
    /// Graph file or `chain:K`.
    #[arg(long)]
    graph: String,
    /// edge, le, track, restricted, exp3, uniform or fixed:<path-id>; repeat or comma-separate.
    #[arg(long, value_delimiter = ',', required = true)]
    algo: Vec<String>,
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 0.001)]
    delta: f64,
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Query probability for the label-efficient learner.
    #[arg(long, conflicts_with = "query_budget")]
    epsilon: Option<f64>,
    /// Expected query budget for the label-efficient learner.
    #[arg(long)]
    query_budget: Option<f64>,
    /// Switch count for the tracking learner and the partition comparator.
    #[arg(long)]
    track: Option<usize>,
    /// Add the restricted learner.
    #[arg(long)]
    restricted: bool,
    #[arg(long, default_value_t = 2.0)]
    spanner_c: f64,
    /// Comparator; defaults to `partition` when `--track` is given.
    #[arg(long, value_enum)]
    comparator: Option<ComparatorArg>,
    /// `paper` (chain bands), `swapped` (bands swapped at n/3 and 2n/3) or a CSV loss matrix.
    #[arg(long, default_value = "paper")]
    losses: String,
    /// Also report every fixed path as a series.
    #[arg(long)]
    fixed_series: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    plot: bool,
}

fn parse_algo(s: &str, args: &RunArgs) -> Result<AlgoSpec, HarnessError> {
    let bad = |reason: String| HarnessError::Config { field: "algo", reason };
    Ok(match s.trim() {
        "edge" => AlgoSpec::Edge,
        "le" => AlgoSpec::LabelEfficient(match (args.epsilon, args.query_budget) {
            (Some(e), _) => QueryRate::Epsilon(e),
            (None, Some(m)) => QueryRate::Budget(m),
            (None, None) => return Err(bad("le needs --epsilon or --query-budget".into())),
        }),
        "track" => AlgoSpec::Tracking {
            switches: args.track.ok_or_else(|| bad("track needs --track <m>".into()))?,
        },
        "restricted" => AlgoSpec::Restricted {
            spanner_c: args.spanner_c,
        },
        "exp3" => AlgoSpec::Exp3,
        "uniform" => AlgoSpec::Uniform,
        other => match other.strip_prefix("fixed:").map(str::parse) {
            Some(Ok(i)) => AlgoSpec::Fixed(i),
            _ => return Err(bad(format!("unknown algorithm `{other}`"))),
        },
    })
}

fn read_loss_csv(path: &str) -> Result<LossModel, HarnessError> {
    let io = |msg: String| HarnessError::Io {
        path: path.into(),
        msg,
    };
    let text = std::fs::read_to_string(path).map_err(|e| io(e.to_string()))?;
    let rows = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            l.split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| io(format!("line {}: {e}", i + 1)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LossModel::Scripted(rows))
}

fn run(args: RunArgs) -> Result<(), HarnessError> {
    let dag = load_graph(&args.graph)?.dag;
    let mut algorithms = args
        .algo
        .iter()
        .map(|s| parse_algo(s, &args))
        .collect::<Result<Vec<_>, _>>()?;
    if args.restricted && !algorithms.iter().any(|a| matches!(a, AlgoSpec::Restricted { .. })) {
        algorithms.push(AlgoSpec::Restricted {
            spanner_c: args.spanner_c,
        });
    }
    let comparator = match (args.comparator, args.track) {
        (Some(ComparatorArg::Fixed), _) | (None, None) => Comparator::BestFixedPath,
        (_, Some(m)) => Comparator::Partition { switches: m },
        (Some(ComparatorArg::Partition), None) => {
            return Err(HarnessError::Config {
                field: "comparator",
                reason: "partition comparator needs --track <m>".into(),
            })
        }
    };
    let losses = match args.losses.as_str() {
        "paper" => paper_sim_model(&dag)?,
        "swapped" => swapped_paper_sim_model(&dag, args.n)?,
        file => read_loss_csv(file)?,
    };
    let config = ExperimentConfig {
        comparator,
        delta: args.delta,
        runs: args.runs,
        seed: args.seed,
        fixed_path_series: args.fixed_series,
        ..ExperimentConfig::new(dag, losses, algorithms, args.n)
    };
    let result = run_experiment(&config)?;
    let files = emit_outputs(&result, &args.out, args.plot)?;

    println!("graph {}  n={}  runs={}  comparator={}", config.dag.descriptor(), config.n, config.runs, comparator);
    for s in result.series.iter().filter(|s| s.kind == SeriesKind::Algorithm) {
        let setup = s.setup.as_ref().expect("algorithm setup");
        let bound = match (setup.bound, s.bound_violations) {
            (Some((b, _)), Some(v)) => format!("bound {b:.4} ({v}/{} runs above)", config.runs),
            (Some((b, c)), None) => format!("bound {b:.4} (vs {c}, not checked)"),
            _ => String::new(),
        };
        println!("  {:<12} mean final regret {:>9.5}  {bound}", s.series, s.mean_final_regret());
        for v in &setup.violations {
            println!("  {:<12} precondition not met: {v}", "");
        }
    }
    println!("wrote {}", files.csv.display());
    println!("wrote {}", files.metadata.display());
    if let Some(p) = files.plot {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
