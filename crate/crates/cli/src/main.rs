//! `active-scan` command-line front end.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use active_scan::eval::{monte_carlo_ari_with, monte_carlo_roc, AriClusters, AriOptions, ARI_MAX_CLUSTERS};
use active_scan::generators::{generate_sbm, paper_params, SbmParams};
use active_scan::pipeline::{detect, PipelineConfig};
use active_scan::spectral::Sigma;
use active_scan::trimming::{bench_csv, bench_trim, run_topq};
use active_scan::{seed, Graph};

#[derive(Parser, Debug)]
#[command(
    name = "active-scan",
    version,
    about = "Find and cluster the most active vertices of a graph"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Top-Q selection, similarity, clustering and MDS in one run.
    Detect(DetectArgs),
    /// Top-Q vertices by locality statistic, with trimming counters.
    Topq(TopqArgs),
    /// Sample a stochastic block model graph.
    Sbm(SbmArgs),
    /// Monte-Carlo ROC or ARI evaluation on SBM graphs.
    Eval(EvalArgs),
    /// Trimming cost for a range of Q values.
    BenchTrim(BenchArgs),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct SigmaArg(Sigma);

impl FromStr for SigmaArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(SigmaArg(Sigma::Auto));
        }
        match s.parse::<f64>() {
            Ok(x) if x > 0.0 && x.is_finite() => Ok(SigmaArg(Sigma::Fixed(x))),
            _ => Err(format!("expected `auto` or a positive number, got `{s}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum ClustersArg {
    Auto,
    Blocks,
    Fixed(usize),
}

impl FromStr for ClustersArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(ClustersArg::Auto),
            "blocks" => Ok(ClustersArg::Blocks),
            t => match t.parse::<usize>() {
                Ok(c) if c > 0 => Ok(ClustersArg::Fixed(c)),
                _ => Err(format!("expected `auto`, `blocks` or a positive count, got `{s}`")),
            },
        }
    }
}

/// Parses `61,70,100` and inclusive ranges `61..200:10` (step defaults to 1).
fn parse_q_values(s: &str) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, rest)) = part.split_once("..") {
            let (b, step) = rest.split_once(':').unwrap_or((rest, "1"));
            let num = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("`{part}`: {e}"));
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if step == 0 || a > b {
                return Err(format!("`{part}`: need start ≤ end and step ≥ 1"));
            }
            out.extend((a..=b).step_by(step));
        } else {
            out.push(part.parse().map_err(|e| format!("`{part}`: {e}"))?);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
struct QValues(Vec<usize>);

impl FromStr for QValues {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        parse_q_values(s).map(QValues)
    }
}

#[derive(Args, Debug)]
struct WorkerArgs {
    /// Worker threads (defaults to the available parallelism).
    #[arg(long, env = "ACTIVE_SCAN_THREADS")]
    workers: Option<usize>,
}

impl WorkerArgs {
    fn resolve(&self) -> anyhow::Result<usize> {
        let w = self
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        if w == 0 {
            bail!(active_scan::Error::InvalidArgument("workers must be at least 1".into()));
        }
        Ok(w)
    }
}

#[derive(Args, Debug)]
struct DetectArgs {
    /// Edge list (`.bin` files are read as binary CSR).
    #[arg(long)]
    input: Option<PathBuf>,
    /// JSON config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the effective config as JSON and exit.
    #[arg(long)]
    dump_config: bool,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long = "Q")]
    q: Option<usize>,
    #[arg(long)]
    similarity_k: Option<usize>,
    /// `auto` or a positive bandwidth.
    #[arg(long)]
    sigma: Option<SigmaArg>,
    /// `auto` or a fixed count.
    #[arg(long)]
    clusters: Option<ClustersArg>,
    #[arg(long)]
    max_clusters: Option<usize>,
    #[arg(long, env = "ACTIVE_SCAN_THREADS")]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write similarity.csv.
    #[arg(long)]
    write_similarity: bool,
}

#[derive(Args, Debug)]
struct TopqArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long = "Q")]
    q: usize,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[command(flatten)]
    workers: WorkerArgs,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// `csv` writes the ranked entries; `json` writes the full report.
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Args, Debug)]
#[group(id = "model", required = true, multiple = false, args = ["paper", "params"])]
struct ModelArgs {
    /// Four blocks of 940, 20, 20, 20 vertices with P = 0.01 + diag(0, .19, .29, .39).
    #[arg(long)]
    paper: bool,
    /// JSON file with `block_sizes` and `p`.
    #[arg(long)]
    params: Option<PathBuf>,
}

impl ModelArgs {
    fn load(&self) -> anyhow::Result<SbmParams> {
        let params = match &self.params {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
                serde_json::from_str(&text)
                    .map_err(|e| active_scan::Error::Format(e.to_string()))
                    .with_context(|| format!("invalid SBM parameters in {}", path.display()))?
            }
            None => paper_params(),
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Args, Debug)]
struct SbmArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for graph.txt, labels.csv and params.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum EvalMode {
    Roc,
    Ari,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(value_enum)]
    mode: EvalMode,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 200)]
    runs: usize,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Q values for `ari`, e.g. `61..200:10` or `61,70,200`.
    #[arg(long, default_value = "61..200:1")]
    q_values: QValues,
    #[arg(long)]
    similarity_k: Option<usize>,
    #[arg(long)]
    sigma: Option<SigmaArg>,
    /// `auto` (eigengap) or `blocks` (number of true blocks present).
    #[arg(long, default_value = "auto")]
    clusters: ClustersArg,
    #[arg(long, default_value_t = ARI_MAX_CLUSTERS)]
    max_clusters: usize,
    #[command(flatten)]
    workers: WorkerArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (the summary table goes to stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    q_values: QValues,
    #[command(flatten)]
    workers: WorkerArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

fn load_graph(path: &Path) -> anyhow::Result<Graph> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let reader = BufReader::new(file);
    if path.extension().is_some_and(|e| e == "bin") {
        return Graph::read_binary(reader).with_context(|| format!("cannot read {}", path.display()));
    }
    let (g, report) = Graph::load_edge_list(reader).with_context(|| format!("cannot read {}", path.display()))?;
    log::info!(
        "{}: {} vertices, {} edges ({} self-loops and {} duplicates dropped)",
        path.display(),
        g.num_vertices(),
        g.num_edges(),
        report.self_loops_dropped,
        report.duplicates_dropped
    );
    Ok(g)
}

fn init_pool(workers: usize) {
    // only the first call takes effect; later calls keep the existing pool
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global() {
        log::debug!("global thread pool already set: {e}");
    }
}

fn to_json<T: Serialize>(x: &T) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(x)? + "\n")
}

/// Writes `text` to `out` or stdout.
fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
        }
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn detect_config(args: &DetectArgs) -> anyhow::Result<PipelineConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            serde_json::from_str::<PipelineConfig>(&text)
                .map_err(|e| active_scan::Error::Format(e.to_string()))
                .with_context(|| format!("invalid config {}", path.display()))?
        }
        None => PipelineConfig {
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            ..PipelineConfig::default()
        },
    };
    if let Some(x) = &args.input {
        cfg.input = Some(x.clone());
    }
    if let Some(x) = args.k {
        cfg.k = x;
    }
    if let Some(x) = args.q {
        cfg.q = x;
    }
    if let Some(x) = args.similarity_k {
        cfg.similarity_k = x;
    }
    if let Some(SigmaArg(x)) = args.sigma {
        cfg.sigma = x;
    }
    match args.clusters {
        Some(ClustersArg::Auto) => cfg.clusters = None,
        Some(ClustersArg::Fixed(c)) => cfg.clusters = Some(c),
        Some(ClustersArg::Blocks) => {
            bail!(active_scan::Error::InvalidArgument(
                "`blocks` needs ground truth; use `auto` or a count".into()
            ))
        }
        None => {}
    }
    if let Some(x) = args.max_clusters {
        cfg.max_clusters = x;
    }
    if let Some(x) = args.workers {
        cfg.workers = x;
    }
    if let Some(x) = args.seed {
        cfg.seed = x;
    }
    if let Some(x) = &args.out {
        cfg.out = x.clone();
    }
    if args.write_similarity {
        cfg.write_similarity = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_detect(args: &DetectArgs) -> anyhow::Result<()> {
    let cfg = detect_config(args)?;
    if args.dump_config {
        return emit(None, &to_json(&cfg)?);
    }
    let Some(input) = &cfg.input else {
        bail!(active_scan::Error::InvalidArgument(
            "no input graph given (--input or config `input`)".into()
        ));
    };
    init_pool(cfg.workers);
    let g = load_graph(input)?;
    let det = detect(&g, &cfg)?;
    det.write_artifacts(&cfg, &cfg.out)
        .with_context(|| format!("cannot write results to {}", cfg.out.display()))?;
    log::info!(
        "{} vertices in {} clusters written to {}",
        det.assignment.vertices.len(),
        det.assignment.num_clusters,
        cfg.out.display()
    );
    Ok(())
}

fn cmd_topq(args: &TopqArgs) -> anyhow::Result<()> {
    let workers = args.workers.resolve()?;
    init_pool(workers);
    let g = load_graph(&args.input)?;
    let report = run_topq(&g, args.q, args.k, workers)?;
    log::info!(
        "computed {} of {} statistics in {:.1} ms",
        report.computed_count,
        report.n,
        report.wall_ms
    );
    let text = match args.format {
        Format::Csv => report.entries_csv(),
        Format::Json => to_json(&report)?,
    };
    emit(args.out.as_deref(), &text)
}

fn cmd_sbm(args: &SbmArgs) -> anyhow::Result<()> {
    let params = args.model.load()?.with_seed(seed::derive(args.seed, "sbm"));
    let lg = generate_sbm(&params)?;
    fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    let mut w = BufWriter::new(File::create(args.out.join("graph.txt"))?);
    lg.graph.write_edge_list(&mut w)?;
    w.flush()?;
    let mut labels = String::from("vertex_id,block\n");
    for (v, l) in lg.labels.iter().enumerate() {
        labels.push_str(&format!("{v},{l}\n"));
    }
    fs::write(args.out.join("labels.csv"), labels)?;
    fs::write(args.out.join("params.json"), to_json(&params)?)?;
    log::info!(
        "sampled {} vertices and {} edges into {}",
        lg.graph.num_vertices(),
        lg.graph.num_edges(),
        args.out.display()
    );
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> anyhow::Result<()> {
    init_pool(args.workers.resolve()?);
    let params = args.model.load()?;
    let out = args.out.as_deref();
    match args.mode {
        EvalMode::Roc => {
            let summary = monte_carlo_roc(&params, args.runs, args.k, args.seed)?;
            match (out, args.format) {
                (Some(dir), Format::Csv) => {
                    emit(Some(&dir.join("roc_curve.csv")), &summary.curve_csv())?;
                    emit(Some(&dir.join("roc_runs.csv")), &summary.runs_csv())?;
                }
                (Some(dir), Format::Json) => emit(Some(&dir.join("roc.json")), &to_json(&summary)?)?,
                (None, Format::Csv) => emit(None, &summary.curve_csv())?,
                (None, Format::Json) => emit(None, &to_json(&summary)?)?,
            }
            log::info!("mean AUC over {} runs: {:.4}", args.runs, summary.mean_auc);
        }
        EvalMode::Ari => {
            let clusters = match args.clusters {
                ClustersArg::Auto => AriClusters::Eigengap { max: args.max_clusters },
                ClustersArg::Blocks => AriClusters::Blocks,
                ClustersArg::Fixed(_) => bail!(active_scan::Error::InvalidArgument(
                    "eval accepts `--clusters auto` or `--clusters blocks`".into()
                )),
            };
            let opts = AriOptions {
                similarity_k: args.similarity_k.unwrap_or(1),
                sigma: args.sigma.map_or(Sigma::Auto, |s| s.0),
                clusters,
            };
            let summary = monte_carlo_ari_with(&params, args.runs, args.k, &args.q_values.0, args.seed, &opts)?;
            match (out, args.format) {
                (Some(dir), Format::Csv) => {
                    emit(Some(&dir.join("ari_summary.csv")), &summary.summary_csv())?;
                    emit(Some(&dir.join("ari_runs.csv")), &summary.runs_csv())?;
                }
                (Some(dir), Format::Json) => emit(Some(&dir.join("ari.json")), &to_json(&summary)?)?,
                (None, Format::Csv) => emit(None, &summary.summary_csv())?,
                (None, Format::Json) => emit(None, &to_json(&summary)?)?,
            }
        }
    }
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> anyhow::Result<()> {
    let workers = args.workers.resolve()?;
    init_pool(workers);
    let g = load_graph(&args.input)?;
    let rows = bench_trim(&g, &args.q_values.0, workers)?;
    if rows.windows(2).any(|w| w[1].computed_count < w[0].computed_count) {
        log::warn!("computed_count decreased for a larger Q");
    }
    let text = match args.format {
        Format::Csv => bench_csv(&rows),
        Format::Json => to_json(&rows)?,
    };
    emit(args.out.as_deref(), &text)
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: ErrorBody<'a>,
}

fn error_json(err: &anyhow::Error) -> String {
    let kind = err
        .chain()
        .find_map(|e| {
            if let Some(e) = e.downcast_ref::<active_scan::Error>() {
                Some(e.kind())
            } else if e.is::<io::Error>() {
                Some("io")
            } else if e.is::<serde_json::Error>() {
                Some("format")
            } else {
                None
            }
        })
        .unwrap_or("error");
    let report = ErrorReport {
        error: ErrorBody {
            kind,
            message: format!("{err:#}"),
        },
    };
    serde_json::to_string(&report).unwrap_or_else(|_| format!("{{\"error\":{{\"message\":{:?}}}}}", err.to_string()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Detect(a) => cmd_detect(a),
        Command::Topq(a) => cmd_topq(a),
        Command::Sbm(a) => cmd_sbm(a),
        Command::Eval(a) => cmd_eval(a),
        Command::BenchTrim(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_value_syntax() {
        assert_eq!(parse_q_values("1,5,10").unwrap(), vec![1, 5, 10]);
        assert_eq!(parse_q_values("61..70:3").unwrap(), vec![61, 64, 67, 70]);
        assert_eq!(parse_q_values("2..4, 9").unwrap(), vec![2, 3, 4, 9]);
        assert!(parse_q_values("5..1").is_err());
        assert!(parse_q_values("1..5:0").is_err());
        assert!(parse_q_values("x").is_err());
    }

    #[test]
    fn sigma_and_cluster_syntax() {
        assert_eq!("auto".parse::<SigmaArg>().unwrap().0, Sigma::Auto);
        assert_eq!("0.5".parse::<SigmaArg>().unwrap().0, Sigma::Fixed(0.5));
        assert!("-1".parse::<SigmaArg>().is_err());
        assert_eq!("4".parse::<ClustersArg>().unwrap(), ClustersArg::Fixed(4));
        assert_eq!("Blocks".parse::<ClustersArg>().unwrap(), ClustersArg::Blocks);
        assert!("0".parse::<ClustersArg>().is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
