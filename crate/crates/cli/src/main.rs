use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use graphrag_irl::config::{config_reference, ExperimentConfig, Precision};
use graphrag_irl::data::{DatasetSource, MovieLensSource};
use graphrag_irl::eval::render_table;
use graphrag_irl::graph::concept_sweep;
use graphrag_irl::pipeline::{
    eval_dir, render_graph_stats, run_main_table, write_prepared, Experiment, Method,
};
use graphrag_irl::rerank::{run_rerank, tune_provider};
use graphrag_irl::Error;

/// Knowledge-graph features, listwise IRL ranking and LLM re-rank fusion for
/// next-item recommendation.
#[derive(Parser, Debug)]
#[command(name = "graphrag-irl", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Experiment configuration (TOML). Without it, defaults apply and
    /// `--data` names a MovieLens directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// MovieLens directory (ratings.csv, movies.csv, tags.csv).
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Overrides `output_dir`.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Overrides the master `seed` (and restricts evaluation to it).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 means all cores. Overrides `jobs`.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overrides `features.precision` (f32 or f64).
    #[arg(long, global = true)]
    precision: Option<String>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Filter, split and sample candidates; writes the stats report.
    Prepare,
    /// Builds the item graph and text index; writes graph stats.
    BuildGraph {
        /// Print concept counts for a range of thresholds, e.g. `2..10`.
        #[arg(long, value_name = "LO..HI")]
        sweep: Option<String>,
    },
    /// Trains one ranker and writes its checkpoint and log.
    Train {
        #[command(flatten)]
        method: MethodArgs,
    },
    /// Scores the test users with trained rankers and writes reports.
    Evaluate {
        /// Methods to evaluate (default: every method).
        #[arg(long = "method", value_name = "NAME")]
        methods: Vec<String>,
        /// Add the random and popularity rows.
        #[arg(long)]
        baselines: bool,
    },
    /// Re-ranks shortlists with a provider, tuning α on validation.
    Rerank {
        #[arg(long)]
        provider: String,
        #[arg(long, default_value = "irl_mlp_graph")]
        method: String,
        /// Use this α instead of tuning it.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Prints the validation α grid for a provider.
    TuneAlpha {
        #[arg(long)]
        provider: String,
        #[arg(long, default_value = "irl_mlp_graph")]
        method: String,
    },
    /// prepare, build-graph, train and evaluate over every configured seed.
    FullRun,
    /// Every {supervised, IRL-linear, IRL-MLP} x {with, without graph} cell
    /// with the ablation table and superadditivity terms.
    Ablations,
    /// Prints the annotated default configuration.
    ConfigReference,
}

#[derive(Args, Debug)]
struct MethodArgs {
    /// Linear reward instead of the MLP.
    #[arg(long)]
    linear: bool,
    /// Behavioral features only.
    #[arg(long)]
    no_graph: bool,
    /// The pointwise supervised baseline instead of IRL.
    #[arg(long)]
    supervised: bool,
}

impl MethodArgs {
    fn method(&self) -> Method {
        if self.supervised {
            if self.no_graph {
                Method::Supervised
            } else {
                Method::SupervisedGraph
            }
        } else {
            Method::from_flags(self.linear, !self.no_graph)
        }
    }
}

const MAIN_METHODS: [Method; 5] = [
    Method::Supervised,
    Method::SupervisedGraph,
    Method::IrlLinear,
    Method::IrlMlp,
    Method::IrlMlpGraph,
];

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        Error::Provider(_) => 4,
        Error::NonFinite(_) | Error::Dimension { .. } | Error::MismatchedRankings => 3,
        _ => 2,
    }
}

fn load_config(g: &Global) -> graphrag_irl::Result<ExperimentConfig> {
    let mut cfg = match (&g.config, &g.data) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(dir)) => ExperimentConfig::new(DatasetSource::Movielens(MovieLensSource { dir: dir.clone() })),
        (None, None) => return Err(Error::Config("either --config or --data is required".into())),
    };
    if let (Some(_), Some(dir)) = (&g.config, &g.data) {
        cfg.dataset = DatasetSource::Movielens(MovieLensSource { dir: dir.clone() });
    }
    if let Some(o) = &g.output {
        cfg.output_dir = o.clone();
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
        cfg.evaluation.seeds = vec![s];
    }
    if let Some(j) = g.jobs {
        cfg.jobs = j;
    }
    if let Some(p) = &g.precision {
        cfg.features.precision = match p.as_str() {
            "f32" => Precision::F32,
            "f64" => Precision::F64,
            other => return Err(Error::Config(format!("unknown precision {other:?}"))),
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_method(name: &str) -> graphrag_irl::Result<Method> {
    Method::parse(name).ok_or_else(|| {
        let known: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
        Error::Config(format!("unknown method {name:?}; expected one of {known:?}"))
    })
}

fn parse_sweep(spec: &str) -> graphrag_irl::Result<std::ops::RangeInclusive<usize>> {
    let bad = || Error::Config(format!("sweep {spec:?}: expected LO..HI"));
    let (lo, hi) = spec.split_once("..").ok_or_else(bad)?;
    let lo: usize = lo.trim().parse().map_err(|_| bad())?;
    let hi: usize = hi.trim_start_matches('=').trim().parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(bad());
    }
    Ok(lo..=hi)
}

fn write_text(path: &Path, text: &str) -> graphrag_irl::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
    }
    fs::write(path, text).map_err(|e| Error::Io { path: path.into(), source: e })
}

fn run(cli: Cli) -> graphrag_irl::Result<()> {
    if let Command::ConfigReference = cli.command {
        print!("{}", config_reference());
        return Ok(());
    }
    let cfg = load_config(&cli.global)?;
    if cfg.jobs > 0 {
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build_global();
    }
    log::info!("config hash {}", cfg.hash());

    match cli.command {
        Command::ConfigReference => unreachable!(),
        Command::Prepare => {
            let prepared = graphrag_irl::pipeline::prepare(&cfg)?;
            let dir = cfg.output_dir.join(format!("prepare-{}", prepared.hash));
            write_prepared(&prepared, &dir)?;
            print!("{}", prepared.stats_report());
            println!("artifacts in {}", dir.display());
        }
        Command::BuildGraph { sweep } => {
            let exp = Experiment::build(&cfg)?;
            exp.write_upstream()?;
            if let Some(spec) = sweep {
                let range = parse_sweep(&spec)?;
                let rows = concept_sweep(&exp.prepared.dataset.items, range);
                let mut table = String::from("threshold  concepts  nodes  edges\n");
                for (t, s) in rows {
                    table.push_str(&format!("{t:<10} {:<9} {:<6} {}\n", s.concept_nodes, s.nodes, s.edges));
                }
                write_text(&exp.context_dir().join("concept_sweep.txt"), &table)?;
                print!("{table}");
            } else {
                print!("{}", render_graph_stats(&exp.with_graph.graph.stats()));
            }
            println!("artifacts in {}", exp.context_dir().display());
        }
        Command::Train { method } => {
            let m = method.method();
            let exp = Experiment::build(&cfg)?;
            exp.write_upstream()?;
            match cfg.features.precision {
                Precision::F32 => drop(exp.model::<f32>(m)?),
                Precision::F64 => drop(exp.model::<f64>(m)?),
            }
            println!("{} checkpoint in {}", m.name(), exp.model_dir(m).display());
        }
        Command::Evaluate { methods, baselines } => {
            let methods = if methods.is_empty() {
                Method::ALL.to_vec()
            } else {
                methods.iter().map(|n| parse_method(n)).collect::<graphrag_irl::Result<_>>()?
            };
            let dir = eval_dir(&cfg);
            let table = run_main_table(&cfg, &methods, baselines, &dir)?;
            let reference = table.mean.iter().any(|r| r.method == "supervised").then_some("supervised");
            print!("{}", render_table("mean over seeds", &table.mean, reference));
            println!("reports in {}", dir.display());
        }
        Command::FullRun => {
            let dir = eval_dir(&cfg);
            let table = run_main_table(&cfg, &MAIN_METHODS, true, &dir)?;
            print!("{}", fs::read_to_string(dir.join("report.txt")).unwrap_or_default());
            println!("reports in {} ({} seeds)", dir.display(), table.per_seed.len());
        }
        Command::Ablations => {
            let dir = eval_dir(&cfg);
            run_main_table(&cfg, &Method::ALL, false, &dir)?;
            print!("{}", fs::read_to_string(dir.join("report.txt")).unwrap_or_default());
            println!("reports in {}", dir.display());
        }
        Command::Rerank { provider, method, alpha } => {
            let m = parse_method(&method)?;
            if let Some(a) = alpha {
                if !(0.0..=1.0).contains(&a) {
                    return Err(Error::Config(format!("alpha {a} outside [0, 1]")));
                }
            }
            let exp = Experiment::build(&cfg)?;
            let dir = eval_dir(&cfg);
            let outcome = run_rerank(&exp, m, &provider, alpha, &dir)?;
            print!("{}", outcome.render());
            println!("reports in {}", dir.display());
        }
        Command::TuneAlpha { provider, method } => {
            let m = parse_method(&method)?;
            let exp = Experiment::build(&cfg)?;
            let pcfg = cfg.provider(&provider)?.clone();
            let tuning = match cfg.features.precision {
                Precision::F32 => tune_provider::<f32>(&exp, m, &pcfg)?,
                Precision::F64 => tune_provider::<f64>(&exp, m, &pcfg)?,
            };
            let mut text = String::from("alpha  val_ndcg10\n");
            for (a, v) in &tuning.grid {
                text.push_str(&format!("{a:<6.1} {v:.6}\n"));
            }
            text.push_str(&format!("best {:.1}\n", tuning.alpha));
            write_text(&eval_dir(&cfg).join(format!("alpha_{}_{}.txt", m.name(), provider)), &text)?;
            print!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
