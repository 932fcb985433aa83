use std::io::Write;
use std::path::PathBuf;

use blogrec::corpus::DEFAULT_APP_TOP_K;
use blogrec::fm::{
    build_instances, sample_negatives, train, write_model, FeatureSpace, Loss, TrainConfig,
};
use clap::Args;

use crate::commands::ingest::validate_top_apps;
use crate::commands::{open_apps, open_follows, write_artifact};
use crate::error::CliError;
use crate::manifest::{prepare_out_dir, Manifest};

/// Feature encodings that produce a trainable model.
#[derive(clap::ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum FmKind {
    Mf,
    AppFm,
}

impl FmKind {
    pub fn label(self) -> &'static str {
        match self {
            FmKind::Mf => "mf",
            FmKind::AppFm => "app-fm",
        }
    }
}

pub fn parse_loss(s: &str) -> Result<Loss, String> {
    match s {
        "logistic" => Ok(Loss::Logistic),
        "squared" => Ok(Loss::Squared),
        other => Err(format!("unknown loss {other:?}, expected logistic or squared")),
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Follow log: `user<TAB>blog` per line
    #[arg(long)]
    pub follows: PathBuf,
    /// App usage log; required for app-fm
    #[arg(long)]
    pub apps: Option<PathBuf>,
    /// Encoding to fit
    #[arg(long, value_enum)]
    pub model: FmKind,
    /// Keep each user's most-used apps, at most this many
    #[arg(long, default_value_t = DEFAULT_APP_TOP_K)]
    pub top_apps: usize,
    /// Factor rank
    #[arg(long, default_value_t = TrainConfig::default().k)]
    pub k: usize,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    pub lr: f64,
    /// L2 coefficient on touched parameters
    #[arg(long, default_value_t = TrainConfig::default().lambda)]
    pub lambda: f64,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    pub epochs: usize,
    /// Negatives drawn per observed follow
    #[arg(long, default_value_t = TrainConfig::default().neg_ratio)]
    pub neg_ratio: f64,
    #[arg(long, value_parser = parse_loss, default_value = "logistic")]
    pub loss: Loss,
    /// Standard deviation of the factor initialization
    #[arg(long, default_value_t = TrainConfig::default().init_scale)]
    pub init_scale: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: TrainArgs) -> Result<(), CliError> {
    validate_top_apps(args.top_apps)?;
    let follows = open_follows(&args.follows)?;

    let mut manifest = Manifest::new("train");
    manifest
        .seed(args.seed)
        .config("model", args.model.label())
        .config("top_apps", args.top_apps as u64)
        .config("k", args.k as u64)
        .config("lr", args.lr)
        .config("lambda", args.lambda)
        .config("epochs", args.epochs as u64)
        .config("neg_ratio", args.neg_ratio)
        .config("loss", args.loss.label())
        .config("init_scale", args.init_scale)
        .input(&args.follows)?;

    let usage = match args.model {
        FmKind::Mf => None,
        FmKind::AppFm => {
            let path = args.apps.as_ref().ok_or_else(|| {
                CliError::Usage("app-fm needs --apps".into())
            })?;
            let ingested = open_apps(path, &follows.users, args.top_apps)?;
            manifest
                .input(path)?
                .note("apps", ingested.apps.len() as u64)
                .note("usage_entries", ingested.usage.nnz() as u64);
            Some(ingested)
        }
    };

    let space = match &usage {
        None => FeatureSpace::mf(follows.users.len(), follows.blogs.len()),
        Some(ingested) => FeatureSpace::app_fm(
            follows.users.len(),
            follows.blogs.len(),
            ingested.apps.len(),
        ),
    };

    // Same stream layout as evaluate: negatives on seed+2, SGD on seed+3.
    let negatives = sample_negatives(&follows.graph, args.neg_ratio, args.seed + 2)?;
    let instances = build_instances::<f64>(
        &space,
        &follows.graph,
        usage.as_ref().map(|i| &i.usage),
        &negatives.pairs,
    );
    let config = TrainConfig {
        k: args.k,
        learning_rate: args.lr,
        lambda: args.lambda,
        epochs: args.epochs,
        loss: args.loss,
        neg_ratio: args.neg_ratio,
        init_scale: args.init_scale,
        seed: args.seed + 3,
    };
    let trained = train(&space, &instances, &config)?;

    prepare_out_dir(&args.out)?;
    write_artifact(&args.out, "model.txt", |w| write_model(w, &trained.model))?;
    write_artifact(&args.out, "training_log.csv", |w| {
        writeln!(w, "epoch,loss")?;
        for (epoch, loss) in trained.epoch_loss.iter().enumerate() {
            writeln!(w, "{},{loss:.6}", epoch + 1)?;
        }
        Ok(())
    })?;

    manifest
        .note("users", follows.users.len() as u64)
        .note("blogs", follows.blogs.len() as u64)
        .note("follow_edges", follows.graph.nnz() as u64)
        .note("instances", instances.len() as u64)
        .note("capped_users", negatives.capped_users as u64)
        .note(
            "final_loss",
            *trained.epoch_loss.last().expect("at least one epoch"),
        )
        .output("model.txt")
        .output("training_log.csv")
        .write(&args.out)?;
    Ok(())
}
