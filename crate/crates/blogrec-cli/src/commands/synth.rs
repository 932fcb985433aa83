use std::io::Write;
use std::path::PathBuf;

use blogrec::corpus::{write_apps, write_follows, EntityKind, Vocab};
use blogrec::eval::{synth_generate, SynthConfig};
use clap::Args;

use crate::commands::write_artifact;
use crate::error::CliError;
use crate::manifest::{prepare_out_dir, Manifest};

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Number of users to generate
    #[arg(long, default_value_t = 2000)]
    pub users: usize,
    /// Number of blogs in the catalog
    #[arg(long, default_value_t = 500)]
    pub blogs: usize,
    /// Number of apps in the catalog
    #[arg(long, default_value_t = 100)]
    pub apps: usize,
    /// Number of planted topics shared by users, blogs, and apps
    #[arg(long, default_value_t = 8)]
    pub topics: usize,
    /// How strongly app choice follows the user's topic (0 = noise, 1 = fully)
    #[arg(long, default_value_t = 0.8)]
    pub coupling: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output directory for the corpus and its manifest
    #[arg(long)]
    pub out: PathBuf,
}

/// Index-aligned vocabulary with zero-padded synthetic names.
fn numbered_vocab(kind: EntityKind, prefix: char, count: usize) -> Vocab {
    let mut vocab = Vocab::new(kind);
    for i in 0..count {
        vocab.intern(&format!("{prefix}{i:06}"));
    }
    vocab
}

pub fn run(args: SynthArgs) -> Result<(), CliError> {
    let config = SynthConfig {
        users: args.users,
        blogs: args.blogs,
        apps: args.apps,
        topics: args.topics,
        app_coupling: args.coupling,
        seed: args.seed,
    };
    let corpus = synth_generate(&config)?;
    prepare_out_dir(&args.out)?;

    let users = numbered_vocab(EntityKind::User, 'u', args.users);
    let blogs = numbered_vocab(EntityKind::Blog, 'b', args.blogs);
    let apps = numbered_vocab(EntityKind::App, 'a', args.apps);

    write_artifact(&args.out, "follows.tsv", |w| {
        write_follows(w, &users, &blogs, &corpus.follows)
    })?;
    write_artifact(&args.out, "apps.tsv", |w| {
        write_apps(w, &users, &apps, &corpus.usage)
    })?;
    for (name, vocab, topics) in [
        ("user_topics.tsv", &users, &corpus.user_topics),
        ("blog_topics.tsv", &blogs, &corpus.blog_topics),
        ("app_topics.tsv", &apps, &corpus.app_topics),
    ] {
        write_artifact(&args.out, name, |w| {
            for (idx, topic) in topics.iter().enumerate() {
                writeln!(w, "{}\t{topic}", vocab.name(idx as u32))?;
            }
            Ok(())
        })?;
    }

    let mut manifest = Manifest::new("synth");
    manifest
        .seed(args.seed)
        .config("users", args.users as u64)
        .config("blogs", args.blogs as u64)
        .config("apps", args.apps as u64)
        .config("topics", args.topics as u64)
        .config("coupling", args.coupling)
        .note("follow_edges", corpus.follows.nnz() as u64)
        .note("usage_entries", corpus.usage.nnz() as u64)
        .output("follows.tsv")
        .output("apps.tsv")
        .output("user_topics.tsv")
        .output("blog_topics.tsv")
        .output("app_topics.tsv");
    manifest.write(&args.out)?;
    Ok(())
}
