use std::io::Write;
use std::path::PathBuf;

use blogrec::corpus::{write_apps, write_follows, Vocab};
use blogrec::corpus::DEFAULT_APP_TOP_K;
use clap::Args;

use crate::commands::{open_apps, open_follows, write_artifact};
use crate::error::CliError;
use crate::manifest::{prepare_out_dir, Manifest};

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Follow log: `user<TAB>blog` per line
    #[arg(long)]
    pub follows: PathBuf,
    /// App usage log: `user<TAB>app<TAB>count` per line
    #[arg(long)]
    pub apps: Option<PathBuf>,
    /// Keep each user's most-used apps, at most this many
    #[arg(long, default_value_t = DEFAULT_APP_TOP_K)]
    pub top_apps: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// The per-user app cut must keep at least one app.
pub fn validate_top_apps(top_apps: usize) -> Result<(), CliError> {
    if top_apps == 0 {
        return Err(CliError::Usage("--top-apps must be at least 1".into()));
    }
    Ok(())
}

fn write_vocab(dir: &std::path::Path, name: &str, vocab: &Vocab) -> Result<(), CliError> {
    write_artifact(dir, name, |w| {
        for (_, entry) in vocab.iter() {
            writeln!(w, "{entry}")?;
        }
        Ok(())
    })
}

pub fn run(args: IngestArgs) -> Result<(), CliError> {
    validate_top_apps(args.top_apps)?;
    let follows = open_follows(&args.follows)?;
    prepare_out_dir(&args.out)?;

    write_artifact(&args.out, "follows.tsv", |w| {
        write_follows(w, &follows.users, &follows.blogs, &follows.graph)
    })?;
    write_vocab(&args.out, "vocab_users.tsv", &follows.users)?;
    write_vocab(&args.out, "vocab_blogs.tsv", &follows.blogs)?;

    let mut manifest = Manifest::new("ingest");
    manifest
        .config("top_apps", args.top_apps as u64)
        .input(&args.follows)?
        .note("users", follows.users.len() as u64)
        .note("blogs", follows.blogs.len() as u64)
        .note("follow_edges", follows.graph.nnz() as u64)
        .note("duplicate_follow_edges", follows.duplicate_edges as u64)
        .output("follows.tsv")
        .output("vocab_users.tsv")
        .output("vocab_blogs.tsv");

    if let Some(apps_path) = &args.apps {
        let ingested = open_apps(apps_path, &follows.users, args.top_apps)?;
        write_artifact(&args.out, "app_usage.tsv", |w| {
            write_apps(w, &follows.users, &ingested.apps, &ingested.usage)
        })?;
        write_vocab(&args.out, "vocab_apps.tsv", &ingested.apps)?;
        manifest
            .input(apps_path)?
            .note("apps", ingested.apps.len() as u64)
            .note("usage_entries", ingested.usage.nnz() as u64)
            .note("dropped_unknown_users", ingested.dropped_unknown_users as u64)
            .note("merged_duplicate_usage", ingested.merged_duplicates as u64)
            .output("app_usage.tsv")
            .output("vocab_apps.tsv");
    }

    manifest.write(&args.out)?;
    Ok(())
}
