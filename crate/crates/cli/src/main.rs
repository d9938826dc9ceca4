use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lanczos_net::io::{parse_graph, parse_matrix_csv};
use lanczos_net::lanczos::{LanczosOptions, StartVector};
use lanczos_net::{Graph, LaplacianKind, Matrix, OperatorKind};
use lanczos_net_cli::error::{read_file, write_file};
use lanczos_net_cli::run::{self, seed_dir};
use lanczos_net_cli::{sbm, tools, CliError, CliResult, RunConfig, SbmSpec};

#[derive(Parser)]
#[command(name = "lanczosnet", version, about = "Lanczos spectral graph convolution toolkit")]
struct Cli {
    /// Seed for every random choice of the command.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress reports on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Operator {
    Combinatorial,
    RandomWalk,
    SymNormalized,
    Affinity,
}

impl From<Operator> for OperatorKind {
    fn from(o: Operator) -> Self {
        match o {
            Operator::Combinatorial => OperatorKind::Combinatorial,
            Operator::RandomWalk => OperatorKind::RandomWalk,
            Operator::SymNormalized => OperatorKind::SymmetricNormalized,
            Operator::Affinity => OperatorKind::Affinity,
        }
    }
}

#[derive(Args)]
struct OperatorArgs {
    #[arg(long, value_enum, default_value = "affinity")]
    operator: Operator,
    /// Add self-loops before normalizing.
    #[arg(long)]
    self_loops: bool,
}

impl OperatorArgs {
    fn kind(&self) -> LaplacianKind {
        LaplacianKind::new(self.operator.into(), self.self_loops)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Lanczos decomposition of a graph operator; writes the decomposition to --out.
    Lanczos {
        graph: PathBuf,
        #[arg(short, long, default_value_t = 20)]
        k: usize,
        #[command(flatten)]
        op: OperatorArgs,
        #[arg(long)]
        reorthogonalize: bool,
        /// Breakdown threshold on β.
        #[arg(long, default_value_t = 1e-6)]
        epsilon: f64,
    },
    /// Observed Lanczos error against the a-priori bound over random start vectors.
    Bound {
        /// Graph file; its operator is the matrix under test.
        #[arg(long, conflicts_with = "matrix", required_unless_present = "matrix")]
        graph: Option<PathBuf>,
        /// Dense symmetric matrix as CSV instead of a graph.
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(short, long)]
        k: usize,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[command(flatten)]
        op: OperatorArgs,
    },
    /// Diffusion-map coordinates as CSV, one row per node.
    Embed {
        graph: PathBuf,
        #[arg(short, long, default_value_t = 1)]
        t: u32,
        /// Keep only the largest `top` eigenpairs.
        #[arg(long)]
        top: Option<usize>,
    },
    /// Stochastic block model: graph, features, labels and split files in --out.
    GenSbm {
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        blocks: usize,
        #[arg(long)]
        p_in: f64,
        #[arg(long)]
        p_out: f64,
        #[arg(long)]
        feature_dim: usize,
        #[arg(long, default_value_t = 1.0)]
        feature_noise: f64,
        #[arg(long)]
        label_fraction: f64,
    },
    /// Trains from a JSON run config.
    Train {
        config: PathBuf,
        /// Comma-separated seeds run concurrently; reports mean ± std.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Test metrics of a checkpoint on the data of a run config.
    Eval {
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

fn load_graph(path: &Path) -> CliResult<Graph> {
    parse_graph(&read_file(path)?).map_err(|e| CliError::core_in(path, e))
}

fn load_matrix(path: &Path) -> CliResult<Matrix> {
    parse_matrix_csv(&read_file(path)?).map_err(|e| CliError::core_in(path, e))
}

fn say(quiet: bool, text: &str) {
    if !quiet {
        print!("{text}");
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let seed = cli.seed.unwrap_or(0);
    let quiet = cli.quiet;
    match cli.command {
        Command::Lanczos {
            graph,
            k,
            op,
            reorthogonalize,
            epsilon,
        } => {
            let s = tools::operator(&load_graph(&graph)?, op.kind())?;
            let opts = LanczosOptions::new(k)
                .reorthogonalized(reorthogonalize)
                .with_epsilon(epsilon)
                .with_start(StartVector::SeededRandomUnit(seed));
            let rep = tools::run_lanczos(&s, &opts)?;
            write_file(&cli.out.unwrap_or_else(|| "decomposition.txt".into()), &rep.file)?;
            say(quiet, &rep.report);
        }
        Command::Bound {
            graph,
            matrix,
            k,
            trials,
            op,
        } => {
            let s = match (graph, matrix) {
                (Some(g), _) => tools::operator(&load_graph(&g)?, op.kind())?.to_dense(),
                (None, Some(m)) => load_matrix(&m)?,
                (None, None) => unreachable!("clap requires one of --graph and --matrix"),
            };
            let table = tools::run_bound(&s, k, trials, seed)?;
            if let Some(out) = &cli.out {
                write_file(out, &table.report)?;
            }
            say(quiet, &table.report);
            if table.violations() > 0 {
                return Err(CliError::Numerical(format!(
                    "{} trials violate the bound",
                    table.violations()
                )));
            }
        }
        Command::Embed { graph, t, top } => {
            let csv = tools::run_embed(&load_graph(&graph)?, t, top)?;
            match &cli.out {
                Some(out) => write_file(out, &csv)?,
                None => say(quiet, &csv),
            }
        }
        Command::GenSbm {
            nodes,
            blocks,
            p_in,
            p_out,
            feature_dim,
            feature_noise,
            label_fraction,
        } => {
            let spec = SbmSpec {
                num_nodes: nodes,
                num_blocks: blocks,
                p_in,
                p_out,
                feature_dim,
                feature_noise,
                label_fraction,
                seed: Some(seed),
            };
            let data = sbm::generate(&spec, seed)?;
            if !data.connected() {
                eprintln!(
                    "warning: no connected draw in {} attempts; emitting a disconnected graph",
                    sbm::MAX_ATTEMPTS
                );
            }
            let out = cli.out.unwrap_or_else(|| ".".into());
            for (name, text) in sbm::render(&data) {
                write_file(&out.join(name), &text)?;
            }
            say(
                quiet,
                &format!(
                    "nodes {} edges {} train {} val {} test {}\n",
                    nodes,
                    data.graph.num_edges(),
                    data.split.train.len(),
                    data.split.val.len(),
                    data.split.test.len()
                ),
            );
        }
        Command::Train { config, seeds } => {
            let cfg = RunConfig::load(&config)?;
            let out = cli
                .out
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| "run".into());
            match seeds {
                Some(seeds) => {
                    let (metrics, summary) = run::sweep(&cfg, &seeds, &out)?;
                    for m in &metrics {
                        say(
                            quiet,
                            &format!(
                                "seed {} {} {:?} -> {}\n",
                                m.seed,
                                m.metric,
                                m.test_metric,
                                seed_dir(&out, m.seed).display()
                            ),
                        );
                    }
                    say(
                        quiet,
                        &format!(
                            "{} {:.4} ± {:.4} over {} seeds\n",
                            summary.metric,
                            summary.mean,
                            summary.std,
                            summary.values.len()
                        ),
                    );
                }
                None => {
                    let m = run::train_to_dir(&cfg, cli.seed.unwrap_or(cfg.seed), &out)?;
                    say(quiet, &run::train_json(&m));
                }
            }
        }
        Command::Eval { config, checkpoint } => {
            let cfg = RunConfig::load(&config)?;
            let m = run::eval(&cfg, &checkpoint)?;
            let json = run::eval_json(&m);
            if let Some(out) = &cli.out {
                write_file(out, &json)?;
            }
            say(quiet, &json);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
