use std::path::PathBuf;

use blogrec::corpus::{cross_heatmap, degree_histogram, DegreeAxis, DEFAULT_APP_TOP_K};
use clap::Args;

use crate::commands::ingest::validate_top_apps;
use crate::commands::{open_apps, open_follows, write_artifact};
use crate::error::CliError;
use crate::manifest::{prepare_out_dir, Manifest};

#[derive(Args, Debug)]
pub struct StatsArgs {
    /// Follow log: `user<TAB>blog` per line
    #[arg(long)]
    pub follows: PathBuf,
    /// App usage log; enables the app-side histograms and the heatmap
    #[arg(long)]
    pub apps: Option<PathBuf>,
    /// Keep each user's most-used apps, at most this many
    #[arg(long, default_value_t = DEFAULT_APP_TOP_K)]
    pub top_apps: usize,
    /// Heatmap rows: the most-used apps (clamped to the catalog)
    #[arg(long, default_value_t = 10)]
    pub heatmap_apps: usize,
    /// Heatmap columns: the most-followed blogs (clamped to the catalog)
    #[arg(long, default_value_t = 20)]
    pub heatmap_blogs: usize,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: StatsArgs) -> Result<(), CliError> {
    validate_top_apps(args.top_apps)?;
    let follows = open_follows(&args.follows)?;
    prepare_out_dir(&args.out)?;

    let mut manifest = Manifest::new("stats");
    manifest
        .config("top_apps", args.top_apps as u64)
        .config("heatmap_apps", args.heatmap_apps as u64)
        .config("heatmap_blogs", args.heatmap_blogs as u64)
        .input(&args.follows)?
        .note("users", follows.users.len() as u64)
        .note("blogs", follows.blogs.len() as u64)
        .note("follow_edges", follows.graph.nnz() as u64);

    let mut axes = vec![
        (DegreeAxis::BlogFollowers, follows.graph.follower_degrees()),
        (DegreeAxis::UserFollowees, follows.graph.followee_degrees()),
    ];

    let usage = match &args.apps {
        Some(path) => {
            let ingested = open_apps(path, &follows.users, args.top_apps)?;
            manifest
                .input(path)?
                .note("apps", ingested.apps.len() as u64)
                .note("usage_entries", ingested.usage.nnz() as u64);
            axes.push((DegreeAxis::AppUsers, ingested.usage.app_degrees()));
            axes.push((DegreeAxis::UserApps, ingested.usage.user_degrees()));
            Some(ingested)
        }
        None => None,
    };

    for (axis, degrees) in axes {
        let hist = degree_histogram(&degrees, axis)?;
        let name = format!("degree_hist_{}.csv", axis.label());
        write_artifact(&args.out, &name, |w| hist.write_csv(w))?;
        manifest.output(&name);
    }

    if let Some(ingested) = &usage {
        let rows = args.heatmap_apps.min(ingested.usage.app_count());
        let cols = args.heatmap_blogs.min(follows.graph.blog_count());
        let heatmap = cross_heatmap(&follows.graph, &ingested.usage, rows, cols)?;
        write_artifact(&args.out, "cross_heatmap.csv", |w| {
            heatmap.write_csv(w, &ingested.apps, &follows.blogs)
        })?;
        manifest
            .note("heatmap_apps_effective", rows as u64)
            .note("heatmap_blogs_effective", cols as u64)
            .output("cross_heatmap.csv");
    }

    manifest.write(&args.out)?;
    Ok(())
}
