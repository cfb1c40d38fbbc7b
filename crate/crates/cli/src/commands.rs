use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rasphylo::io::{
    binning_report, bins_csv, certificate_report, parse_alignment, parse_lambdas, render_pipeline_report,
    statistics_csv, timing_report, write_alignment, write_distance_matrix, write_lambdas, write_pairs, FormatError,
    KeyValues,
};
use rasphylo::model::{check_assumption, simulate_alignment, ModelError, RateDistribution, SubstitutionModel};
use rasphylo::pipeline::{
    evaluate_against_truth, identifiability_witness, run_pipeline, PipelineConfig, PipelineError,
};
use rasphylo::reconstruct::ReconstructionConfig;
use rasphylo::tree::{
    generate_complete_binary, generate_random_regular, robinson_foulds, Phylogeny, RegularityParams, TreeError,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Format {
        path: String,
        #[source]
        source: FormatError,
    },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("assumption fails: Phi^-1(e^-6g) = {phi_inv_6g} exceeds M = {big_m}")]
    Assumption { phi_inv_6g: f64, big_m: f64 },
    #[error("{0}")]
    Mismatch(String),
}

type Result<T> = std::result::Result<T, CliError>;

/// Phylogeny reconstruction under rates-across-sites models.
#[derive(Debug, Parser)]
#[command(name = "rasphylo", version)]
pub struct Cli {
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate an alignment, its hidden rates and the tree.
    Simulate(SimulateArgs),
    /// Run the reconstruction pipeline on an alignment.
    Pipeline(PipelineArgs),
    /// Compare trees or models.
    #[command(subcommand)]
    Eval(EvalCommand),
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct SimulateArgs {
    /// Newick tree to simulate on.
    #[arg(long)]
    tree: Option<PathBuf>,
    /// Leaf count for a random tree with weights in [f, g].
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    f: Option<f64>,
    #[arg(long)]
    g: Option<f64>,
    /// Seed of the random tree; defaults to --seed.
    #[arg(long)]
    tree_seed: Option<u64>,
    /// Height of a complete binary tree with every weight --mu.
    #[arg(long)]
    complete_h: Option<u32>,
    #[arg(long)]
    mu: Option<f64>,
    /// `constant`, `discrete:l1,p1;l2,p2`, `gamma:shape` or `lognormal:sigma`.
    #[arg(long)]
    rates: String,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 4)]
    r: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Check the rate assumption against this M before simulating.
    #[arg(long)]
    big_m: Option<f64>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct PipelineArgs {
    #[arg(long)]
    alignment: PathBuf,
    #[arg(long)]
    f: f64,
    #[arg(long)]
    g: f64,
    #[arg(long)]
    big_m: f64,
    /// Rate distribution assumed for the assumption check.
    #[arg(long)]
    rates: String,
    #[arg(long)]
    gamma_u: Option<f64>,
    #[arg(long)]
    trust_cap: Option<f64>,
    #[arg(long, requires = "trust_cap")]
    tau: Option<f64>,
    #[arg(long, requires = "trust_cap")]
    witness_count: Option<usize>,
    /// True tree; its leaves in reading order label the alignment columns.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Hidden per-site rates, for diagnostics only.
    #[arg(long)]
    lambdas: Option<PathBuf>,
    /// Stop after the per-site statistic.
    #[arg(long)]
    stats_only: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
enum EvalCommand {
    /// Robinson-Foulds distance between two Newick trees.
    Rf(RfArgs),
    /// Exact total variation between the leaf distributions of two small models.
    Tv(TvArgs),
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct RfArgs {
    tree1: PathBuf,
    tree2: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct TvArgs {
    tree1: PathBuf,
    tree2: PathBuf,
    #[arg(long)]
    rates1: String,
    /// Defaults to --rates1.
    #[arg(long)]
    rates2: Option<String>,
    #[arg(long, default_value_t = 2)]
    r: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Pipeline(args) => pipeline(args),
        Command::Eval(EvalCommand::Rf(args)) => eval_rf(args),
        Command::Eval(EvalCommand::Tv(args)) => eval_tv(args),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.display().to_string(),
        source,
    })
}

fn format_err(path: &Path) -> impl FnOnce(FormatError) -> CliError + '_ {
    move |source| CliError::Format {
        path: path.display().to_string(),
        source,
    }
}

fn read_tree(path: &Path) -> Result<Phylogeny> {
    Ok(Phylogeny::parse_newick(&read(path)?)?)
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let rates: RateDistribution = args.rates.parse()?;
    let model = SubstitutionModel::poisson(args.r)?;
    let mut echo = KeyValues::default();

    let generated = match (&args.tree, args.n, args.complete_h) {
        (Some(path), None, None) => {
            echo.push("tree", path.display());
            read_tree(path)?
        }
        (None, Some(n), None) => {
            let (Some(f), Some(g)) = (args.f, args.g) else {
                return Err(CliError::Usage("--n needs --f and --g".into()));
            };
            let tree_seed = args.tree_seed.unwrap_or(args.seed);
            echo.push("n", n);
            echo.push("f", f);
            echo.push("g", g);
            echo.push("tree_seed", tree_seed);
            // The generator only reads f and g.
            let bounds = RegularityParams::new(f, g, args.big_m.unwrap_or(f64::MAX))?;
            generate_random_regular(n, &bounds, tree_seed)?
        }
        (None, None, Some(h)) => {
            let Some(mu) = args.mu else {
                return Err(CliError::Usage("--complete-h needs --mu".into()));
            };
            echo.push("complete_h", h);
            echo.push("mu", mu);
            generate_complete_binary(h, mu)?
        }
        _ => {
            return Err(CliError::Usage(
                "give exactly one tree source: --tree, --n with --f/--g, or --complete-h with --mu".into(),
            ))
        }
    };
    // Alignment columns follow the leaf order of the written Newick.
    let newick = generated.to_newick();
    let tree = Phylogeny::parse_newick(&newick)?;

    if let Some(big_m) = args.big_m {
        // Explicit bounds win over the observed weight range.
        let (lo, hi) = weight_range(&tree);
        let params = RegularityParams::new(args.f.unwrap_or(lo), args.g.unwrap_or(hi), big_m)?;
        let report = check_assumption(&rates, &params)?;
        if !report.holds {
            return Err(CliError::Assumption {
                phi_inv_6g: report.phi_inv_6g,
                big_m,
            });
        }
        echo.push("big_m", big_m);
    }
    echo.push("rates", &rates);
    echo.push("k", args.k);
    echo.push("r", args.r);
    echo.push("seed", args.seed);

    let sim = simulate_alignment(&tree, &model, &rates, args.k, args.seed)?;
    create_dir(&args.out_dir)?;
    write(&args.out_dir, "alignment.txt", &write_alignment(&sim.alignment))?;
    write(&args.out_dir, "lambdas.txt", &write_lambdas(&sim.hidden_lambdas))?;
    write(&args.out_dir, "tree.nwk", &format!("{newick}\n"))?;
    write(&args.out_dir, "config.txt", &echo.render())?;
    Ok(())
}

fn weight_range(tree: &Phylogeny) -> (f64, f64) {
    let w = tree.weights();
    let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

fn pipeline(args: PipelineArgs) -> Result<()> {
    let rates: RateDistribution = args.rates.parse()?;
    let params = RegularityParams::new(args.f, args.g, args.big_m)?;
    let alignment = parse_alignment(&read(&args.alignment)?).map_err(format_err(&args.alignment))?;
    let model = SubstitutionModel::poisson(alignment.r())?;

    let truth = args.truth.as_deref().map(read_tree).transpose()?;
    let hidden = match &args.lambdas {
        Some(path) => {
            let h = parse_lambdas(&read(path)?).map_err(format_err(path))?;
            if h.len() != alignment.k() {
                return Err(CliError::Mismatch(format!(
                    "{} has {} rates for {} sites",
                    path.display(),
                    h.len(),
                    alignment.k()
                )));
            }
            Some(h)
        }
        None => None,
    };

    let mut cfg = PipelineConfig::new(params, model, rates);
    cfg.gamma_u = args.gamma_u;
    cfg.stats_only = args.stats_only;
    cfg.labels = truth.as_ref().map(|t| t.labels().to_vec());
    if let Some(cap) = args.trust_cap {
        cfg.reconstruction = Some(
            ReconstructionConfig::new(cap, args.tau.unwrap_or(0.0), args.witness_count.unwrap_or(10))
                .map_err(|e| CliError::Usage(e.to_string()))?,
        );
    }

    let mut echo = KeyValues::default();
    echo.push("alignment", args.alignment.display());
    echo.push("f", args.f);
    echo.push("g", args.g);
    echo.push("big_m", args.big_m);
    echo.push("rates", &cfg.rates);
    if let Some(x) = args.gamma_u {
        echo.push("gamma_u", x);
    }
    if let Some(c) = &cfg.reconstruction {
        echo.push("trust_cap", c.trust_cap);
        echo.push("tau", c.tau);
        echo.push("witness_count", c.witness_count);
    }
    if let Some(p) = &args.truth {
        echo.push("truth", p.display());
    }
    if let Some(p) = &args.lambdas {
        echo.push("lambdas", p.display());
    }
    echo.push("stats_only", args.stats_only);
    create_dir(&args.out_dir)?;
    write(&args.out_dir, "config.txt", &echo.render())?;

    let mut report = run_pipeline(&alignment, &cfg)?;
    if let Some(t) = &truth {
        report.oracle = Some(evaluate_against_truth(&report, t, &params, hidden.as_deref())?);
    }

    let labels: Vec<String> = cfg
        .labels
        .clone()
        .unwrap_or_else(|| (0..alignment.n()).map(|i| format!("leaf_{i}")).collect());
    let dir = &args.out_dir;
    write(dir, "report.txt", &render_pipeline_report(&report))?;
    write(dir, "timing.txt", &timing_report(&report).render())?;
    write(
        dir,
        "statistics.csv",
        &statistics_csv(&report.u_values, hidden.as_deref()),
    )?;
    write(dir, "pairs.txt", &write_pairs(&report.pairs, &labels))?;
    let certificate = report.oracle.as_ref().map_or(&report.certificate, |o| &o.certificate);
    write(dir, "certificate.txt", &certificate_report(certificate).render())?;
    if let Some(t) = &report.tree {
        write(dir, "binning.txt", &binning_report(&t.binning).render())?;
        write(
            dir,
            "bins.csv",
            &bins_csv(&t.assignment, &t.binning, Some(t.abundant_bin)),
        )?;
        write(dir, "distances.phy", &write_distance_matrix(&t.dhat))?;
        write(dir, "tree.nwk", &format!("{}\n", t.topology.to_newick()))?;
    }
    if let Some(rf) = report.oracle.as_ref().and_then(|o| o.rf) {
        println!("rf={rf}");
    }
    Ok(())
}

fn emit(line: &str, out: Option<&Path>) -> Result<()> {
    println!("{line}");
    if let Some(path) = out {
        fs::write(path, format!("{line}\n")).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(())
}

fn eval_rf(args: RfArgs) -> Result<()> {
    let t1 = read_tree(&args.tree1)?;
    let t2 = read_tree(&args.tree2)?;
    let rf = robinson_foulds(t1.topology(), t2.topology())?;
    emit(&format!("rf={rf}"), args.out.as_deref())
}

fn eval_tv(args: TvArgs) -> Result<()> {
    let t1 = read_tree(&args.tree1)?;
    let t2 = read_tree(&args.tree2)?;
    let rates1: RateDistribution = args.rates1.parse()?;
    let rates2: RateDistribution = match &args.rates2 {
        Some(s) => s.parse()?,
        None => rates1.clone(),
    };
    let model = SubstitutionModel::poisson(args.r)?;
    let tv = identifiability_witness(&t1, &t2, &rates1, &rates2, &model)?;
    emit(&format!("tv={tv}"), args.out.as_deref())
}
