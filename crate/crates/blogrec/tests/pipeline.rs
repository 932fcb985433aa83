//! End-to-end run over a generated corpus: split, train every model
//! family, and check the expected quality ordering.

use blogrec::corpus::AppUsage;
use blogrec::eval::{
    evaluate, pop_baseline, split_follows, synth_generate, BucketSpec, EvalSplit, MetricReport,
    SynthConfig,
};
use blogrec::fm::{
    build_instances, sample_negatives, train, FeatureSpace, FmScorer, TrainConfig,
};
use blogrec::knn::{
    build_topk_cross_sim, build_topk_sim, learn_alpha, BlendedScorer, ItemCfScorer, Measure,
};

const NS: [usize; 3] = [1, 5, 10];

struct Pipeline {
    usage: AppUsage,
    split: EvalSplit,
}

fn run_model(p: &Pipeline, which: &str) -> MetricReport {
    let buckets = BucketSpec::default();
    let train_graph = &p.split.train;
    match which {
        "pop" => {
            let scorer = pop_baseline(train_graph);
            evaluate::<f64, _>(&scorer, &p.split, &NS, &buckets).unwrap()
        }
        "itemcf" => {
            let cols = train_graph.blog_columns();
            let sim = build_topk_sim::<f64>(&cols, 50, Measure::Cosine).unwrap();
            let scorer = ItemCfScorer { train: train_graph, sim: &sim };
            evaluate(&scorer, &p.split, &NS, &buckets).unwrap()
        }
        "itemcf-app" => {
            let blog_cols = train_graph.blog_columns();
            let sim_bb = build_topk_sim::<f64>(&blog_cols, 50, Measure::Cosine).unwrap();
            let app_cols = p.usage.app_columns();
            let sim_ab =
                build_topk_cross_sim::<f64>(&app_cols, &blog_cols, 50, Measure::Cosine).unwrap();

            // alpha picked on a nested holdout carved from train
            let holdout = split_follows(train_graph, 0.8, 5, p.split.seed + 1).unwrap();
            let h_cols = holdout.train.blog_columns();
            let h_bb = build_topk_sim::<f64>(&h_cols, 50, Measure::Cosine).unwrap();
            let h_ab =
                build_topk_cross_sim::<f64>(&app_cols, &h_cols, 50, Measure::Cosine).unwrap();
            let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
            let alpha = learn_alpha(&h_ab, &h_bb, &p.usage, &holdout, &grid).unwrap();
            eprintln!("learned alpha = {}", alpha.value());

            let scorer = BlendedScorer {
                train: train_graph,
                usage: &p.usage,
                sim_app_blog: &sim_ab,
                sim_blog_blog: &sim_bb,
                alpha,
            };
            evaluate(&scorer, &p.split, &NS, &buckets).unwrap()
        }
        "mf" | "app-fm" => {
            let users = train_graph.user_count();
            let blogs = train_graph.blog_count();
            let (space, usage) = if which == "mf" {
                (FeatureSpace::mf(users, blogs), None)
            } else {
                (
                    FeatureSpace::app_fm(users, blogs, p.usage.app_count()),
                    Some(&p.usage),
                )
            };
            let neg = sample_negatives(train_graph, 1.0, p.split.seed + 2).unwrap();
            let xs = build_instances::<f64>(&space, train_graph, usage, &neg.pairs);
            let config = TrainConfig {
                epochs: 40,
                seed: p.split.seed + 3,
                ..TrainConfig::default()
            };
            let trained = train(&space, &xs, &config).unwrap();
            let scorer = FmScorer { model: &trained.model, usage };
            evaluate(&scorer, &p.split, &NS, &buckets).unwrap()
        }
        other => panic!("unknown model {other}"),
    }
}

fn describe(r: &MetricReport) -> String {
    let bucket = |label: &str| r.buckets.get(label).map(|b| b.mrr).unwrap_or(f64::NAN);
    format!(
        "{:<11} p@1 {:.4}  p@5 {:.4}  p@10 {:.4}  mrr {:.4}  G5 {:.4}  G100+ {:.4}  (n={})",
        r.model,
        r.p_at[&1],
        r.p_at[&5],
        r.p_at[&10],
        r.mrr,
        bucket("G5"),
        bucket("G100+"),
        r.users_evaluated
    )
}

fn run_all(seed: u64) -> Vec<MetricReport> {
    let corpus = synth_generate(&SynthConfig {
        users: 2000,
        blogs: 500,
        apps: 100,
        topics: 8,
        app_coupling: 0.8,
        seed,
    })
    .unwrap();
    let split = split_follows(&corpus.follows, 0.8, 5, seed).unwrap();
    let p = Pipeline { usage: corpus.usage, split };
    ["pop", "itemcf", "itemcf-app", "mf", "app-fm"]
        .iter()
        .map(|m| run_model(&p, m))
        .collect()
}

#[test]
fn model_families_order_as_expected() {
    let reports = run_all(42);
    for r in &reports {
        eprintln!("{}", describe(r));
    }
    let by_name = |name: &str| reports.iter().find(|r| r.model == name).unwrap();
    let pop = by_name("pop");
    let appfm = by_name("app-fm");
    let mf = by_name("mf");
    let itemcf = by_name("itemcf");

    for r in &reports {
        assert_eq!(r.users_evaluated, pop.users_evaluated, "same protocol for all");
    }
    // the app-augmented model should not trail its inputs
    assert!(appfm.mrr >= mf.mrr);
    assert!(appfm.mrr >= itemcf.mrr);
    // popularity alone is the weakest family, on every reported metric
    for r in &reports {
        if r.model == "pop" {
            continue;
        }
        assert!(r.mrr > pop.mrr, "{} should beat pop on MRR", r.model);
        for n in NS {
            assert!(r.p_at[&n] > pop.p_at[&n], "{} should beat pop on P@{n}", r.model);
        }
    }
    // app signal helps the follow-poor end of the user spectrum most
    let bucket = |r: &MetricReport, label: &str| r.buckets[label].mrr;
    let lift_g5 = bucket(appfm, "G5") / bucket(mf, "G5") - 1.0;
    let lift_g100 = bucket(appfm, "G100+") / bucket(mf, "G100+") - 1.0;
    assert!(
        lift_g5 > lift_g100,
        "expected the G5 lift ({lift_g5:.4}) to exceed the G100+ lift ({lift_g100:.4})"
    );
}

/// Seed sweep for the ordering properties above. Slow, so opt-in:
/// `cargo test -p blogrec --test pipeline --release -- --ignored --nocapture`.
///
/// The popularity baseline loses and the cold-start lift pattern holds on
/// every seed. The overall app-FM vs ItemCF ordering is a direction of
/// effect, not a law: ItemCF edges ahead on some corpus draws, so that
/// check is a majority vote.
#[test]
#[ignore]
fn model_ordering_holds_across_seeds() {
    let mut fm_order_wins = 0;
    for seed in 1..=10u64 {
        let reports = run_all(seed);
        let by_name = |name: &str| reports.iter().find(|r| r.model == name).unwrap();
        let pop = by_name("pop");
        let mf = by_name("mf");
        let appfm = by_name("app-fm");
        let itemcf = by_name("itemcf");
        let bucket = |r: &MetricReport, label: &str| r.buckets[label].mrr;
        let lift_g5 = bucket(appfm, "G5") / bucket(mf, "G5") - 1.0;
        let lift_g100 = bucket(appfm, "G100+") / bucket(mf, "G100+") - 1.0;

        let pop_worst = NS.iter().all(|n| {
            reports.iter().all(|r| r.model == "pop" || r.p_at[n] > pop.p_at[n])
        }) && reports.iter().all(|r| r.model == "pop" || r.mrr > pop.mrr);
        let fm_order = appfm.mrr >= mf.mrr && appfm.mrr >= itemcf.mrr;
        let cold_start = lift_g5 > lift_g100;
        eprintln!(
            "seed {seed:>2}: pop_worst={pop_worst} fm_order={fm_order} cold_start={cold_start} \
             (appfm {:.4} mf {:.4} itemcf {:.4} pop {:.4}; lift G5 {:+.3}% G100+ {:+.3}%)",
            appfm.mrr,
            mf.mrr,
            itemcf.mrr,
            pop.mrr,
            100.0 * lift_g5,
            100.0 * lift_g100
        );
        assert!(pop_worst, "pop beat a personalized model on seed {seed}");
        assert!(cold_start, "cold-start lift pattern broke on seed {seed}");
        fm_order_wins += usize::from(fm_order);
    }
    assert!(fm_order_wins >= 7, "app-fm led on only {fm_order_wins}/10 seeds");
}
