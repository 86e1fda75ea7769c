use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use collusion_core::analytics::{build_channel_graph, giant_component, network_stats, random_graph_baseline};
use collusion_core::artifact::{self, store, to_json_bytes, FeatureTable};
use collusion_core::classifiers::{train_dac, train_one_class, DacConfig, OneClassModel};
use collusion_core::comments::embed::provider_from_spec;
use collusion_core::config::Config;
use collusion_core::model::{write_atomic, write_jsonl, Corpus, Label, LoadOptions, RecordKind};
use collusion_core::pipeline::{
    check_inputs, feature_table, fit_corpus_detector, reference_time, run_task, score_corpus, Task,
};
use collusion_core::report::{parse_json, render, ReportFormat};
use collusion_core::rng::derive_seed;
use collusion_core::synth::generate_synthetic_corpus;
use collusion_core::Error;

#[derive(Parser)]
#[command(name = "collusion", version, about = "Collusive engagement detection toolkit")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// key = value config file
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,
    #[arg(long, global = true, value_name = "DIR")]
    input: Option<PathBuf>,
    #[arg(long, global = true, value_name = "DIR")]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    task: Option<TaskArg>,
    /// hash, hash:DIM, file:PATH or remote:URL
    #[arg(long, global = true)]
    embedder: Option<String>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate raw JSONL records and write the accepted corpus.
    Ingest,
    /// Generate a seeded synthetic corpus.
    Synth,
    /// Static feature table for a task.
    Features,
    /// Fit the anomaly detector on organic comment series.
    TrainAnomaly,
    /// Score every video with a trained detector and build fused features.
    Score,
    /// Train the task's classifiers on a feature table.
    Train,
    /// Cross-validated run of a task.
    Evaluate,
    /// Channel co-subscription graph statistics with a random baseline.
    Network,
    /// Render a JSON run report in another format.
    Report,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Likes,
    Subscriptions,
    Comments,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Task {
        match t {
            TaskArg::Likes => Task::Likes,
            TaskArg::Subscriptions => Task::Subscriptions,
            TaskArg::Comments => Task::Comments,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
    Markdown,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> ReportFormat {
        match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Markdown => ReportFormat::Markdown,
        }
    }
}

enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Run(e.into())
    }
}

type CliResult<T> = Result<T, Failure>;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        Error::Io { .. }
        | Error::InvalidInput(_)
        | Error::Serde(_)
        | Error::DimensionMismatch { .. }
        | Error::InsufficientData(_)
        | Error::Provider { .. } => 2,
        Error::Degenerate(_) | Error::Numerical(_) | Error::LabelLeak(_) => 3,
    }
}

struct Ctx {
    global: Global,
    config: Config,
}

impl Ctx {
    fn input(&self) -> CliResult<&Path> {
        self.global.input.as_deref().ok_or_else(|| Failure::Usage("--input is required".into()))
    }

    fn output(&self) -> CliResult<&Path> {
        self.global.output.as_deref().ok_or_else(|| Failure::Usage("--output is required".into()))
    }

    fn task(&self) -> CliResult<Task> {
        self.global
            .task
            .map(Task::from)
            .ok_or_else(|| Failure::Usage("--task is required".into()))
    }

    /// An upstream artifact: looked up in --output first, then --input.
    fn upstream(&self, name: &str) -> CliResult<PathBuf> {
        let dirs = [self.global.output.as_deref(), self.global.input.as_deref()];
        dirs.into_iter()
            .flatten()
            .map(|d| d.join(name))
            .find(|p| p.exists())
            .ok_or_else(|| Error::InvalidInput(format!("{name} not found in --output or --input; run the upstream stage first")).into())
    }

    fn corpus(&self) -> CliResult<Corpus> {
        Ok(Corpus::load_dir(self.input()?, &LoadOptions::default())?)
    }

    fn out_dir(&self) -> CliResult<PathBuf> {
        let dir = self.output()?.to_path_buf();
        std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        Ok(dir)
    }
}

/// Bytes of every record file present in `dir`, for content keys.
fn corpus_bytes(dir: &Path) -> CliResult<Vec<u8>> {
    let mut out = Vec::new();
    for kind in RecordKind::ALL {
        let p = dir.join(kind.file_name());
        if p.exists() {
            out.extend(kind.as_str().as_bytes());
            out.extend(artifact::read_bytes(&p)?);
        }
    }
    Ok(out)
}

fn load_config(g: &Global) -> CliResult<Config> {
    let mut c = match &g.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = g.seed {
        c.set("seed", &s.to_string())?;
    }
    if let Some(e) = &g.embedder {
        c.set("embedder", e)?;
    }
    Ok(c)
}

fn run(cli: Cli) -> CliResult<()> {
    let config = load_config(&cli.global)?;
    let ctx = Ctx {
        global: cli.global,
        config,
    };
    match cli.command {
        Command::Ingest => ingest(&ctx),
        Command::Synth => synth(&ctx),
        Command::Features => features(&ctx),
        Command::TrainAnomaly => train_anomaly(&ctx),
        Command::Score => score(&ctx),
        Command::Train => train(&ctx),
        Command::Evaluate => evaluate(&ctx),
        Command::Network => network(&ctx),
        Command::Report => report(&ctx),
    }
}

fn ingest(ctx: &Ctx) -> CliResult<()> {
    let corpus = ctx.corpus()?;
    let out = ctx.out_dir()?;
    corpus.write_dir(&out)?;
    write_atomic(&out.join("validation.json"), &to_json_bytes(&corpus.report)?)?;
    println!(
        "accepted {} records, rejected {}, flagged {}",
        corpus.report.accepted_total(),
        corpus.report.rejected.len(),
        corpus.report.flagged.len()
    );
    Ok(())
}

fn synth(ctx: &Ctx) -> CliResult<()> {
    let out = ctx.out_dir()?;
    let s = generate_synthetic_corpus(&ctx.config.synth)?;
    s.write_dir(&out)?;
    println!(
        "wrote {} videos, {} comments, {} channels, {} subscriptions to {}",
        s.corpus.videos.len(),
        s.corpus.comments.len(),
        s.corpus.channels.len(),
        s.corpus.subscriptions.len(),
        out.display()
    );
    Ok(())
}

fn features(ctx: &Ctx) -> CliResult<()> {
    let task = ctx.task()?;
    let corpus = ctx.corpus()?;
    let out = ctx.out_dir()?;
    let now = reference_time(&ctx.config.pipeline, &corpus)?;
    let stage = format!("features-{task}");
    let stored = store(
        &out,
        &stage,
        &format!("{stage}.json"),
        &[&corpus_bytes(ctx.input()?)?, &now.to_le_bytes()],
        || to_json_bytes(&feature_table(task, &corpus, now)?),
    )?;
    println!("{}", stored.named.display());
    Ok(())
}

fn train_anomaly(ctx: &Ctx) -> CliResult<()> {
    let corpus = ctx.corpus()?;
    check_inputs(Task::Comments, &corpus)?;
    let out = ctx.out_dir()?;
    let p = &ctx.config.pipeline;
    let mut det = p.detector.clone();
    det.gru.seed = derive_seed(p.seed, "train-anomaly/gru");
    let settings = serde_json::to_vec(&det)?;
    let stored = store(&out, "detector", "detector.json", &[&corpus_bytes(ctx.input()?)?, &settings], || {
        to_json_bytes(&fit_corpus_detector(&corpus, &det)?)
    })?;
    println!("{}", stored.named.display());
    Ok(())
}

fn score(ctx: &Ctx) -> CliResult<()> {
    let input = ctx.input()?;
    let corpus = ctx.corpus()?;
    check_inputs(Task::Comments, &corpus)?;
    let out = ctx.out_dir()?;
    let p = &ctx.config.pipeline;
    let det_path = ctx.upstream("detector.json")?;
    let det_bytes = artifact::read_bytes(&det_path)?;
    let now = reference_time(p, &corpus)?;
    let settings = format!("{}|{}|{now}", p.embedder, p.window);
    let stored = store(
        &out,
        "fused",
        "fused.json",
        &[&corpus_bytes(input)?, &det_bytes, settings.as_bytes(), &p.seed.to_le_bytes()],
        || {
            let detector = serde_json::from_slice(&det_bytes)?;
            let embedder = provider_from_spec(&p.embedder, derive_seed(p.seed, "embedder"))?;
            let (table, _) = score_corpus(&corpus, &detector, embedder.as_ref(), p.window, now)?;
            to_json_bytes(&table)
        },
    )?;
    println!("{}", stored.named.display());
    Ok(())
}

fn train(ctx: &Ctx) -> CliResult<()> {
    let task = ctx.task()?;
    let out = ctx.out_dir()?;
    let p = &ctx.config.pipeline;
    let (src, stage) = match task {
        Task::Comments => ("fused.json".to_string(), "dac".to_string()),
        _ => (format!("features-{task}.json"), format!("models-{task}")),
    };
    let bytes = artifact::read_bytes(&ctx.upstream(&src)?)?;
    let table: FeatureTable = serde_json::from_slice(&bytes)?;
    table.check()?;
    let settings = serde_json::to_vec(&(&p.dac, &p.one_class, &p.one_class_kinds, p.seed))?;
    let stored = store(&out, &stage, &format!("{stage}.json"), &[&bytes, &settings], || match task {
        Task::Comments => {
            let labeled: Vec<_> = table.rows.iter().filter(|r| r.label.is_some()).collect();
            let x: Vec<Vec<f64>> = labeled.iter().map(|r| r.values.clone()).collect();
            let y: Vec<Option<bool>> = labeled.iter().map(|r| r.label.map(Label::is_collusive)).collect();
            let cfg = DacConfig {
                seed: derive_seed(p.seed, "train/dac"),
                ..p.dac.clone()
            };
            to_json_bytes(&train_dac(&x, &y, &cfg)?)
        }
        _ => {
            let x: Vec<Vec<f64>> = table
                .rows
                .iter()
                .filter(|r| r.label == Some(Label::Collusive))
                .map(|r| r.values.clone())
                .collect();
            let models = p
                .one_class_kinds
                .iter()
                .map(|&kind| {
                    let mut params = p.one_class.clone();
                    params.seed = derive_seed(p.seed, &format!("train/{kind}"));
                    train_one_class(&x, kind, &params)
                })
                .collect::<collusion_core::Result<Vec<OneClassModel>>>()?;
            to_json_bytes(&models)
        }
    })?;
    println!("{}", stored.named.display());
    Ok(())
}

fn evaluate(ctx: &Ctx) -> CliResult<()> {
    let task = ctx.task()?;
    let corpus = ctx.corpus()?;
    let out = ctx.out_dir()?;
    let output = run_task(task, &corpus, &ctx.config)?;
    let json = render(&output.report, ReportFormat::Json)?;
    write_atomic(&out.join(format!("report-{task}.json")), json.as_bytes())?;
    write_jsonl(&out.join(format!("label-audit-{task}.jsonl")), &output.audit_log)?;
    let format: ReportFormat = ctx.global.format.map_or(ReportFormat::Markdown, Into::into);
    let text = render(&output.report, format)?;
    if format != ReportFormat::Json {
        write_atomic(&out.join(format!("report-{task}.{}", format.extension())), text.as_bytes())?;
    }
    print!("{text}");
    Ok(())
}

fn network(ctx: &Ctx) -> CliResult<()> {
    let corpus = ctx.corpus()?;
    let out = ctx.out_dir()?;
    let p = &ctx.config.pipeline;
    if corpus.subscriptions.is_empty() {
        return Err(Error::InsufficientData("network needs subscription records".into()).into());
    }
    // Restrict to collusive channels when the corpus carries channel labels.
    let collusive: std::collections::BTreeSet<&str> = corpus
        .channels
        .iter()
        .filter(|c| c.label == Some(Label::Collusive))
        .map(|c| c.channel_id.as_str())
        .collect();
    let edges: Vec<_> = if collusive.is_empty() {
        corpus.subscriptions.clone()
    } else {
        corpus
            .subscriptions
            .iter()
            .filter(|e| collusive.contains(e.channel_id.as_str()))
            .cloned()
            .collect()
    };
    let graph = build_channel_graph(&edges, p.min_shared);
    graph.write_edge_list(&out.join("channel-graph.txt"))?;
    let giant = giant_component(&graph)?;
    let stats = network_stats(&giant)?;
    let baseline = random_graph_baseline(
        giant.node_count(),
        giant.edge_count(),
        p.baseline_trials,
        derive_seed(p.seed, "network/gnm"),
    )?;
    let summary = serde_json::json!({
        "graph_nodes": graph.node_count(),
        "graph_edges": graph.edge_count(),
        "components": graph.components().len(),
        "giant_component": stats,
        "random_baseline": baseline,
    });
    write_atomic(&out.join("network.json"), &to_json_bytes(&summary)?)?;
    for (k, v) in stats.to_key_values() {
        println!("{k}: {v}");
    }
    println!(
        "random clustering: {:.6} +/- {:.6} over {} trials",
        baseline.clustering.mean, baseline.clustering.std, baseline.trials
    );
    Ok(())
}

fn report(ctx: &Ctx) -> CliResult<()> {
    let input = ctx.input()?;
    let path = if input.is_dir() {
        let task = ctx.task()?;
        input.join(format!("report-{task}.json"))
    } else {
        input.to_path_buf()
    };
    let text = String::from_utf8(artifact::read_bytes(&path)?)
        .map_err(|_| Error::InvalidInput(format!("{} is not UTF-8", path.display())))?;
    let parsed = parse_json(&text)?;
    let format: ReportFormat = ctx.global.format.map_or(ReportFormat::Markdown, Into::into);
    let rendered = render(&parsed, format)?;
    match &ctx.global.output {
        Some(out) => {
            let target = if out.is_dir() {
                out.join(format!("report-{}.{}", parsed.task, format.extension()))
            } else {
                out.clone()
            };
            write_atomic(&target, rendered.as_bytes())?;
            println!("{}", target.display());
        }
        None => print!("{rendered}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
