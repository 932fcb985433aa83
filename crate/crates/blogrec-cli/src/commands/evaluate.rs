use std::io::Write;
use std::path::PathBuf;

use blogrec::corpus::{AppIngest, DEFAULT_APP_TOP_K};
use blogrec::eval::{
    evaluate_detailed, paired_sign_test, pop_baseline, split_follows, BucketSpec, EvalSplit,
    MetricReport, UserRr,
};
use blogrec::fm::{
    build_instances, sample_negatives, train, FeatureSpace, FmScorer, TrainConfig,
};
use blogrec::knn::{
    build_topk_cross_sim, build_topk_sim, learn_alpha, BlendWeight, BlendedScorer, ItemCfScorer,
    Measure, DEFAULT_K,
};
use clap::Args;

use crate::commands::ingest::validate_top_apps;
use crate::commands::train::parse_loss;
use crate::commands::{open_apps, open_follows, write_artifact};
use crate::error::CliError;
use crate::manifest::{prepare_out_dir, Manifest};

/// Precision cutoffs in every report.
const NS: [usize; 3] = [1, 5, 10];

/// Canonical model order for "all" and for the comparison table.
const ALL_MODELS: [&str; 5] = ["pop", "itemcf", "itemcf-app", "mf", "app-fm"];

pub fn parse_measure(s: &str) -> Result<Measure, String> {
    match s {
        "cosine" => Ok(Measure::Cosine),
        "pearson" => Ok(Measure::Pearson),
        other => Err(format!("unknown measure {other:?}, expected cosine or pearson")),
    }
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let value: f64 = s.parse().map_err(|_| format!("bad alpha {s:?}"))?;
    if !(0.0..=1.0).contains(&value) {
        return Err(format!("alpha must lie in [0, 1], got {value}"));
    }
    Ok(value)
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Follow log: `user<TAB>blog` per line
    #[arg(long)]
    pub follows: PathBuf,
    /// App usage log; required for itemcf-app and app-fm
    #[arg(long)]
    pub apps: Option<PathBuf>,
    /// Comma-separated model names, or "all"
    #[arg(long, default_value = "all", value_delimiter = ',')]
    pub model: Vec<String>,
    /// Keep each user's most-used apps, at most this many
    #[arg(long, default_value_t = DEFAULT_APP_TOP_K)]
    pub top_apps: usize,
    /// Per-user fraction of follows kept for training
    #[arg(long, default_value_t = 0.8)]
    pub train_frac: f64,
    /// Sampled non-followed candidates per held-out follow
    #[arg(long, default_value_t = 5)]
    pub neg_mult: usize,
    /// Neighbors kept per similarity row
    #[arg(long, default_value_t = DEFAULT_K)]
    pub knn_k: usize,
    #[arg(long, value_parser = parse_measure, default_value = "cosine")]
    pub measure: Measure,
    /// Fixed blend weight for itemcf-app; otherwise learned on a holdout
    #[arg(long, value_parser = parse_alpha, conflicts_with = "alpha_grid")]
    pub alpha: Option<f64>,
    /// Comma-separated blend weights to search (default 0.0 to 1.0 step 0.1)
    #[arg(long)]
    pub alpha_grid: Option<String>,
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
    /// Negatives drawn per observed follow during training
    #[arg(long, default_value_t = TrainConfig::default().neg_ratio)]
    pub neg_ratio: f64,
    #[arg(long, value_parser = parse_loss, default_value = "logistic")]
    pub loss: blogrec::fm::Loss,
    /// Standard deviation of the factor initialization
    #[arg(long, default_value_t = TrainConfig::default().init_scale)]
    pub init_scale: f64,
    /// Comma-separated activity thresholds for the report buckets
    #[arg(long, default_value = "5,10,20,50,100")]
    pub buckets: String,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_models(raw: &[String]) -> Result<Vec<&'static str>, CliError> {
    let mut out = Vec::new();
    for name in raw {
        let expanded: &[&str] = if name == "all" {
            &ALL_MODELS
        } else {
            match ALL_MODELS.iter().find(|m| *m == name) {
                Some(m) => std::slice::from_ref(m),
                None => {
                    return Err(CliError::Usage(format!(
                        "unknown model {name:?}, expected one of all, {}",
                        ALL_MODELS.join(", ")
                    )))
                }
            }
        };
        for &m in expanded {
            if !out.contains(&m) {
                out.push(m);
            }
        }
    }
    Ok(out)
}

fn parse_grid(raw: Option<&str>) -> Result<Vec<f64>, CliError> {
    match raw {
        None => Ok((0..=10).map(|i| i as f64 / 10.0).collect()),
        Some(csv) => csv
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("bad alpha grid value {tok:?}")))
            })
            .collect(),
    }
}

fn parse_buckets(csv: &str) -> Result<Vec<u64>, CliError> {
    csv.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<u64>()
                .map_err(|_| CliError::Usage(format!("bad bucket threshold {tok:?}")))
        })
        .collect()
}

struct ModelOutput {
    report: MetricReport,
    rrs: Vec<UserRr>,
    /// Blend weight actually used, when the model has one.
    alpha: Option<f64>,
}

fn run_model(
    args: &EvaluateArgs,
    usage: Option<&AppIngest>,
    split: &EvalSplit,
    buckets: &BucketSpec,
    which: &str,
) -> Result<ModelOutput, CliError> {
    let train_graph = &split.train;
    let wrap = |(report, rrs), alpha| ModelOutput { report, rrs, alpha };
    match which {
        "pop" => {
            let scorer = pop_baseline(train_graph);
            Ok(wrap(evaluate_detailed::<f64, _>(&scorer, split, &NS, buckets)?, None))
        }
        "itemcf" => {
            let cols = train_graph.blog_columns();
            let sim = build_topk_sim::<f64>(&cols, args.knn_k, args.measure)?;
            let scorer = ItemCfScorer { train: train_graph, sim: &sim };
            Ok(wrap(evaluate_detailed(&scorer, split, &NS, buckets)?, None))
        }
        "itemcf-app" => {
            let usage = &usage.expect("validated above").usage;
            let blog_cols = train_graph.blog_columns();
            let sim_bb = build_topk_sim::<f64>(&blog_cols, args.knn_k, args.measure)?;
            let app_cols = usage.app_columns();
            let sim_ab =
                build_topk_cross_sim::<f64>(&app_cols, &blog_cols, args.knn_k, args.measure)?;

            let alpha = match args.alpha {
                Some(value) => BlendWeight::new(value)?,
                None => {
                    // picked on a nested holdout carved from train
                    let holdout = split_follows(
                        train_graph,
                        args.train_frac,
                        args.neg_mult,
                        split.seed + 1,
                    )?;
                    let h_cols = holdout.train.blog_columns();
                    let h_bb = build_topk_sim::<f64>(&h_cols, args.knn_k, args.measure)?;
                    let h_ab = build_topk_cross_sim::<f64>(
                        &app_cols,
                        &h_cols,
                        args.knn_k,
                        args.measure,
                    )?;
                    let grid = parse_grid(args.alpha_grid.as_deref())?;
                    learn_alpha(&h_ab, &h_bb, usage, &holdout, &grid)?
                }
            };
            let scorer = BlendedScorer {
                train: train_graph,
                usage,
                sim_app_blog: &sim_ab,
                sim_blog_blog: &sim_bb,
                alpha,
            };
            Ok(wrap(
                evaluate_detailed(&scorer, split, &NS, buckets)?,
                Some(alpha.value()),
            ))
        }
        "mf" | "app-fm" => {
            let users = train_graph.user_count();
            let blogs = train_graph.blog_count();
            let (space, usage) = if which == "mf" {
                (FeatureSpace::mf(users, blogs), None)
            } else {
                let usage = &usage.expect("validated above").usage;
                (
                    FeatureSpace::app_fm(users, blogs, usage.app_count()),
                    Some(usage),
                )
            };
            let neg = sample_negatives(train_graph, args.neg_ratio, split.seed + 2)?;
            let xs = build_instances::<f64>(&space, train_graph, usage, &neg.pairs);
            let config = TrainConfig {
                k: args.k,
                learning_rate: args.lr,
                lambda: args.lambda,
                epochs: args.epochs,
                loss: args.loss,
                neg_ratio: args.neg_ratio,
                init_scale: args.init_scale,
                seed: split.seed + 3,
            };
            let trained = train(&space, &xs, &config)?;
            let scorer = FmScorer { model: &trained.model, usage };
            Ok(wrap(evaluate_detailed(&scorer, split, &NS, buckets)?, None))
        }
        other => Err(CliError::Usage(format!("unknown model {other:?}"))),
    }
}

pub fn run(args: EvaluateArgs) -> Result<(), CliError> {
    validate_top_apps(args.top_apps)?;
    let models = parse_models(&args.model)?;
    let needs_apps = models.iter().any(|m| matches!(*m, "itemcf-app" | "app-fm"));
    if needs_apps && args.apps.is_none() {
        return Err(CliError::Usage(
            "itemcf-app and app-fm need --apps".into(),
        ));
    }
    let buckets = BucketSpec::new(parse_buckets(&args.buckets)?)?;

    let follows = open_follows(&args.follows)?;
    let usage = match &args.apps {
        Some(path) => Some(open_apps(path, &follows.users, args.top_apps)?),
        None => None,
    };

    let split = split_follows(&follows.graph, args.train_frac, args.neg_mult, args.seed)?;
    prepare_out_dir(&args.out)?;
    split
        .export(&args.out, &follows.users, &follows.blogs)
        .map_err(crate::error::io_ctx(format!("{}", args.out.display())))?;

    let mut manifest = Manifest::new("evaluate");
    manifest
        .seed(args.seed)
        .config("models", models.join(","))
        .config("top_apps", args.top_apps as u64)
        .config("train_frac", args.train_frac)
        .config("neg_mult", args.neg_mult as u64)
        .config("knn_k", args.knn_k as u64)
        .config("measure", args.measure.label())
        .config("buckets", args.buckets.as_str())
        .config("k", args.k as u64)
        .config("lr", args.lr)
        .config("lambda", args.lambda)
        .config("epochs", args.epochs as u64)
        .config("neg_ratio", args.neg_ratio)
        .config("loss", args.loss.label())
        .config("init_scale", args.init_scale)
        .input(&args.follows)?
        .note("users", follows.users.len() as u64)
        .note("blogs", follows.blogs.len() as u64)
        .note("follow_edges", follows.graph.nnz() as u64)
        .output("train.tsv")
        .output("test.tsv")
        .output("candidates.tsv");
    if let Some(value) = args.alpha {
        manifest.config("alpha", value);
    }
    if let Some(csv) = &args.alpha_grid {
        manifest.config("alpha_grid", csv.as_str());
    }
    if let (Some(path), Some(ingested)) = (&args.apps, &usage) {
        manifest
            .input(path)?
            .note("apps", ingested.apps.len() as u64)
            .note("usage_entries", ingested.usage.nnz() as u64);
    }

    let mut outputs: Vec<(String, ModelOutput)> = Vec::new();
    for which in &models {
        let out = run_model(&args, usage.as_ref(), &split, &buckets, which)?;
        if let Some(alpha) = out.alpha {
            manifest.note(&format!("alpha_{which}"), alpha);
        }

        let report_name = format!("report_{which}.json");
        write_artifact(&args.out, &report_name, |w| {
            serde_json::to_writer_pretty(&mut *w, &out.report)?;
            writeln!(w)
        })?;
        let buckets_name = format!("buckets_{which}.csv");
        write_artifact(&args.out, &buckets_name, |w| {
            writeln!(w, "bucket,count,p@1,p@5,p@10,mrr")?;
            for label in buckets.labels() {
                let Some(b) = out.report.buckets.get(&label) else { continue };
                writeln!(
                    w,
                    "{label},{},{:.6},{:.6},{:.6},{:.6}",
                    b.count, b.p_at[&1], b.p_at[&5], b.p_at[&10], b.mrr
                )?;
            }
            Ok(())
        })?;
        manifest.output(&report_name).output(&buckets_name);
        outputs.push((which.to_string(), out));
    }

    write_artifact(&args.out, "comparison.csv", |w| {
        writeln!(w, "model,p@1,p@5,p@10,mrr,users")?;
        for (name, out) in &outputs {
            let r = &out.report;
            writeln!(
                w,
                "{name},{:.6},{:.6},{:.6},{:.6},{}",
                r.p_at[&1], r.p_at[&5], r.p_at[&10], r.mrr, r.users_evaluated
            )?;
        }
        Ok(())
    })?;
    manifest.output("comparison.csv");

    write_artifact(&args.out, "significance.csv", |w| {
        writeln!(w, "model_a,model_b,wins_a,wins_b,ties,p_value")?;
        for i in 0..outputs.len() {
            for j in i + 1..outputs.len() {
                let (name_a, a) = &outputs[i];
                let (name_b, b) = &outputs[j];
                // every model ranks the same eligible users in the same order
                assert!(a
                    .rrs
                    .iter()
                    .zip(&b.rrs)
                    .all(|(x, y)| x.user == y.user));
                let rr_a: Vec<f64> = a.rrs.iter().map(|x| x.rr).collect();
                let rr_b: Vec<f64> = b.rrs.iter().map(|x| x.rr).collect();
                let test = paired_sign_test(&rr_a, &rr_b);
                writeln!(
                    w,
                    "{name_a},{name_b},{},{},{},{:.6e}",
                    test.wins_a, test.wins_b, test.ties, test.p_value
                )?;
            }
        }
        Ok(())
    })?;
    manifest.output("significance.csv");

    if let Some((_, first)) = outputs.first() {
        manifest.note("users_evaluated", first.report.users_evaluated as u64);
    }
    manifest.write(&args.out)?;
    Ok(())
}
