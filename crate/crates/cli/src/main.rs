mod config;

use std::fmt::Write as _;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use credcrf::ccrf::{ranking_csv, CcrfModel};
use credcrf::corpus::synth::{generate_synthetic, SynthConfig};
use credcrf::corpus::{load_corpus, write_corpus, CommunityGraph, CorpusPaths};
use credcrf::eval::{cross_validate, hypotheses_text, hypothesis_suite};
use credcrf::fmt::sig6;
use credcrf::pipeline::{train_system, TrainedSystem, CCRF_FILE};

use config::{write, RunConfig, RunFlags};

#[derive(Debug, Parser)]
#[command(
    name = "credcrf",
    version,
    about = "Joint credibility model for news communities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: RunFlags,
    /// more log output (repeat for debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print graph statistics of a corpus
    Stats,
    /// Fit topic, role and CRF models on all rated articles
    Train,
    /// Predict article ratings with trained models
    Predict,
    /// Cross-validate the full model and write report.txt
    Evaluate,
    /// Rank users by learned weight
    RankUsers,
    /// Rank sources by learned weight
    RankSources,
    /// Run the correlation tests
    Hypotheses,
    /// Generate a synthetic corpus with known noise levels
    Synth(SynthArgs),
}

#[derive(Debug, clap::Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    articles: usize,
    #[arg(long, default_value_t = 20)]
    users: usize,
    #[arg(long, default_value_t = 5)]
    sources: usize,
    #[arg(long, default_value_t = 3)]
    reviews_per_article: usize,
    /// every predictor exact
    #[arg(long)]
    noise_free: bool,
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::resolve(&cli.flags)?;
    match cli.command {
        Command::Stats => stats(&cfg),
        Command::Train => train(&cfg),
        Command::Predict => predict(&cfg),
        Command::Evaluate => evaluate(&cfg),
        Command::RankUsers => rank(&cfg, true),
        Command::RankSources => rank(&cfg, false),
        Command::Hypotheses => hypotheses(&cfg),
        Command::Synth(args) => synth(&cfg, &args),
    }
}

fn load(cfg: &RunConfig) -> Result<CommunityGraph> {
    let paths = CorpusPaths::in_dir(&cfg.corpus_dir);
    Ok(load_corpus(&paths)?)
}

fn header(cfg: &RunConfig) -> String {
    let mut s = String::from("[run]\n");
    for (k, v) in cfg.describe() {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

fn stats(cfg: &RunConfig) -> Result<()> {
    let mut graph = load(cfg)?;
    if let Some(k) = cfg.min_reviews {
        graph = graph.filter_min_reviews(k);
    }
    print!("{}", graph.stats());
    Ok(())
}

fn train(cfg: &RunConfig) -> Result<()> {
    let started = Instant::now();
    let graph = load(cfg)?.filter_min_reviews(cfg.min_reviews());
    let settings = cfg.model()?;
    let sys = train_system(&graph, cfg.lexicon()?, &settings)?;
    std::fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    sys.save(&cfg.out_dir)?;

    let mut log = header(cfg);
    let _ = writeln!(log, "\n[models]");
    let _ = writeln!(log, "user_models = {}", sys.roles.per_user.len());
    let _ = writeln!(log, "source_models = {}", sys.roles.per_source.len());
    let _ = writeln!(log, "crf_columns = {}", sys.ccrf.columns.len());
    let _ = writeln!(log, "\n[crf-objective]");
    for (i, v) in sys.ccrf.log.iter().enumerate() {
        let _ = writeln!(log, "{i} = {}", sig6(*v));
    }
    write(&cfg.out_file("train.log")?, &log)?;
    log::info!("trained in {:.1?}", started.elapsed());
    println!(
        "trained {} articles, {} CRF weights -> {}",
        graph.eligible_articles().len(),
        sys.ccrf.lambda.len(),
        cfg.out_dir.display()
    );
    Ok(())
}

fn predict(cfg: &RunConfig) -> Result<()> {
    let graph = load(cfg)?;
    let sys = TrainedSystem::load(&cfg.out_dir, cfg.lexicon()?)
        .with_context(|| format!("loading models from {}", cfg.out_dir.display()))?;
    let ids: Vec<String> = graph.articles().map(|a| a.id.clone()).collect();
    let pred = sys.predict(&graph, &ids)?;
    let mut csv = String::from("article_id,prediction\n");
    for (id, p) in ids.iter().zip(&pred) {
        let _ = writeln!(csv, "{id},{}", sig6(*p));
    }
    write(&cfg.out_file("predictions.csv")?, &csv)?;
    print!("{csv}");
    Ok(())
}

fn evaluate(cfg: &RunConfig) -> Result<()> {
    let graph = load(cfg)?;
    let report = cross_validate(&graph, &cfg.lexicon()?, &cfg.eval()?)?;
    let run: Vec<(String, String)> = cfg.describe();
    let text = report.to_text(&run);
    write(&cfg.out_file("report.txt")?, &text)?;
    write(
        &cfg.out_file("users.csv")?,
        &ranking_csv(&report.user_ranking),
    )?;
    write(
        &cfg.out_file("sources.csv")?,
        &ranking_csv(&report.source_ranking),
    )?;
    print!("{text}");
    Ok(())
}

fn rank(cfg: &RunConfig, users: bool) -> Result<()> {
    let path = cfg.out_dir.join(CCRF_FILE);
    let model = CcrfModel::load(&path).context("run `credcrf train` first")?;
    let (ranking, name) = if users {
        (model.rank_users(), "users.csv")
    } else {
        (model.rank_sources(), "sources.csv")
    };
    let csv = ranking_csv(&ranking);
    write(&cfg.out_file(name)?, &csv)?;
    print!("{csv}");
    Ok(())
}

fn hypotheses(cfg: &RunConfig) -> Result<()> {
    let graph = load(cfg)?;
    let text = hypotheses_text(&hypothesis_suite(&graph, cfg.min_reviews()));
    write(&cfg.out_file("hypotheses.txt")?, &text)?;
    print!("{text}");
    Ok(())
}

fn synth(cfg: &RunConfig, args: &SynthArgs) -> Result<()> {
    let base = if args.noise_free {
        SynthConfig::noise_free()
    } else {
        SynthConfig::default()
    };
    let sc = SynthConfig {
        n_articles: args.articles,
        n_users: args.users,
        n_sources: args.sources,
        reviews_per_article: args.reviews_per_article,
        ..base
    };
    let (graph, truth) = generate_synthetic(&sc, cfg.seed()?)?;
    write_corpus(&graph, &cfg.out_dir)?;
    let json = serde_json::to_string_pretty(&truth)?;
    write(&cfg.out_file("truth.json")?, &(json + "\n"))?;
    print!("{}", graph.stats());
    Ok(())
}
