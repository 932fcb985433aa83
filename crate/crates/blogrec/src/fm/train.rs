//! SGD training with negative sampling.
//!
//! Unfollowed pairs are drawn per user to balance the positive follows,
//! instances are shuffled every epoch, and parameters take plain SGD steps
//! on a pointwise loss with L2 weight decay. Regularization is applied to
//! the parameters an instance touches, so each step stays O(k * nnz) and
//! the per-instance objective below is exactly what a step descends.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{encode_app_fm, encode_mf, forward, Encoding, FeatureSpace, FmError, FmModel, SparseInstance};
use crate::corpus::{AppUsage, FollowGraph};
use crate::sample::sample_excluding;
use crate::scalar::real;
use crate::Real;

/// Pointwise training loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// Cross entropy on a sigmoid of the score; labels in {0, 1}.
    Logistic,
    /// Half squared error on the raw score.
    Squared,
}

impl Loss {
    pub fn label(self) -> &'static str {
        match self {
            Loss::Logistic => "logistic",
            Loss::Squared => "squared",
        }
    }

    /// Loss value for a scored instance.
    fn value<S: Real>(self, score: S, y: S) -> S {
        match self {
            // softplus(s) - y*s, stable for large |s|
            Loss::Logistic => {
                let softplus = score.max(S::zero()) + (-score.abs()).exp().ln_1p();
                softplus - y * score
            }
            Loss::Squared => {
                let d = score - y;
                real::<S>(0.5) * d * d
            }
        }
    }

    /// d loss / d score.
    fn dscore<S: Real>(self, score: S, y: S) -> S {
        match self {
            Loss::Logistic => S::one() / (S::one() + (-score).exp()) - y,
            Loss::Squared => score - y,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Factor rank.
    pub k: usize,
    pub learning_rate: f64,
    /// L2 coefficient; the penalty is `lambda * ||theta_active||^2`.
    pub lambda: f64,
    pub epochs: usize,
    pub loss: Loss,
    /// Negatives drawn per positive.
    pub neg_ratio: f64,
    /// Standard deviation of the factor initialization.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k: 5,
            learning_rate: 0.05,
            // strong enough that desk-scale models generalize instead of
            // memorizing the follow matrix
            lambda: 0.05,
            epochs: 20,
            loss: Loss::Logistic,
            neg_ratio: 1.0,
            init_scale: 0.01,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), FmError> {
        let bad = |msg: String| Err(FmError::InvalidConfig(msg));
        if self.k < 1 {
            return bad(format!("k must be at least 1, got {}", self.k));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be nonnegative, got {}", self.lambda));
        }
        if self.epochs < 1 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.neg_ratio > 0.0 && self.neg_ratio.is_finite()) {
            return bad(format!("neg_ratio must be positive, got {}", self.neg_ratio));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return bad(format!("init_scale must be nonnegative, got {}", self.init_scale));
        }
        Ok(())
    }
}

/// Negative `(user, blog)` pairs drawn outside the follow graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegativeSamples {
    pub pairs: Vec<(u32, u32)>,
    /// Users whose draw was cut short because too few unfollowed blogs exist.
    pub capped_users: usize,
}

/// Draw `ceil(neg_ratio * degree)` unfollowed blogs per user, without
/// replacement, capped at the number of unfollowed blogs. Users are visited
/// in index order on one seeded stream.
pub fn sample_negatives(
    graph: &FollowGraph,
    neg_ratio: f64,
    seed: u64,
) -> Result<NegativeSamples, FmError> {
    if !(neg_ratio > 0.0 && neg_ratio.is_finite()) {
        return Err(FmError::InvalidConfig(format!(
            "neg_ratio must be positive, got {neg_ratio}"
        )));
    }
    let n = graph.blog_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    let mut capped_users = 0;
    for u in 0..graph.user_count() as u32 {
        let row = graph.row(u);
        if row.is_empty() {
            continue;
        }
        let want = (neg_ratio * row.len() as f64).ceil() as usize;
        let take = want.min(n - row.len());
        if take < want {
            capped_users += 1;
        }
        for b in sample_excluding(&mut rng, n, row, take) {
            pairs.push((u, b));
        }
    }
    Ok(NegativeSamples { pairs, capped_users })
}

/// Materialize training instances: every follow labeled 1 in row-major
/// order, then `negatives` labeled 0 in the given order. The app encoding
/// attaches the user's retained apps to both.
pub fn build_instances<S: Real>(
    space: &FeatureSpace,
    graph: &FollowGraph,
    usage: Option<&AppUsage>,
    negatives: &[(u32, u32)],
) -> Vec<SparseInstance<S>> {
    let encode = |user: u32, blog: u32, label: S| match space.encoding() {
        Encoding::Mf => encode_mf(space, user, blog, label),
        Encoding::AppFm => {
            let usage = usage.expect("app encoding needs usage data");
            encode_app_fm(space, user, blog, &usage.apps_of(user), label)
        }
    };
    let mut out = Vec::with_capacity(graph.nnz() + negatives.len());
    for (u, b) in graph.edges() {
        out.push(encode(u, b, S::one()));
    }
    for &(u, b) in negatives {
        out.push(encode(u, b, S::zero()));
    }
    out
}

/// Trained model plus the mean data loss per epoch.
#[derive(Debug, Clone)]
pub struct Trained<S> {
    pub model: FmModel<S>,
    pub epoch_loss: Vec<f64>,
}

impl<S: Real> FmModel<S> {
    /// Zero bias and weights, factors drawn from N(0, init_scale^2).
    fn init(space: FeatureSpace, k: usize, init_scale: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut model = FmModel::zeros(space, k);
        let normal = Normal::new(0.0, init_scale).expect("finite nonnegative scale");
        for z in &mut model.z {
            *z = real::<S>(normal.sample(rng));
        }
        model
    }
}

/// One SGD step on `x`; returns the data loss at the pre-step parameters,
/// or None if the score came out non-finite.
fn sgd_step<S: Real>(
    model: &mut FmModel<S>,
    x: &SparseInstance<S>,
    lr: S,
    lambda: S,
    loss: Loss,
) -> Option<f64> {
    let (score, sums) = forward(model, x);
    if !score.is_finite() {
        return None;
    }
    let y = x.label();
    let data_loss = loss.value(score, y);
    let dld = loss.dscore(score, y);
    let two_lambda = lambda + lambda;
    let k = model.k();

    model.w0 = model.w0 - lr * (dld + two_lambda * model.w0);
    for &(i, v) in x.entries() {
        let i = i as usize;
        let w = model.w[i];
        model.w[i] = w - lr * (dld * v + two_lambda * w);
    }
    // pre-step factor sums; each z cell is read once before its update
    for f in 0..k {
        let sum = sums[f];
        for &(i, v) in x.entries() {
            let idx = i as usize * k + f;
            let z = model.z[idx];
            let grad = dld * v * (sum - z * v) + two_lambda * z;
            model.z[idx] = z - lr * grad;
        }
    }
    data_loss.to_f64()
}

/// Train a factorization machine by SGD.
///
/// Instances are shuffled with a fresh permutation each epoch; the shuffle
/// and the factor initialization share one stream seeded from the config,
/// so equal inputs give bit-equal models. A non-finite score or epoch loss
/// aborts with [`FmError::Diverged`].
pub fn train<S: Real>(
    space: &FeatureSpace,
    instances: &[SparseInstance<S>],
    config: &TrainConfig,
) -> Result<Trained<S>, FmError> {
    config.validate()?;
    if instances.is_empty() {
        return Err(FmError::NoInstances);
    }
    let features = space.feature_count();
    assert!(
        instances
            .iter()
            .all(|x| x.entries().iter().all(|&(i, _)| (i as usize) < features)),
        "instance features must fit the space"
    );

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = FmModel::init(*space, config.k, config.init_scale, &mut rng);
    let lr = real::<S>(config.learning_rate);
    let lambda = real::<S>(config.lambda);

    let mut order: Vec<usize> = (0..instances.len()).collect();
    let mut epoch_loss = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0f64;
        for &idx in &order {
            match sgd_step(&mut model, &instances[idx], lr, lambda, config.loss) {
                Some(l) => loss_sum += l,
                None => return Err(FmError::Diverged { epoch }),
            }
        }
        let mean = loss_sum / instances.len() as f64;
        if !mean.is_finite() {
            return Err(FmError::Diverged { epoch });
        }
        epoch_loss.push(mean);
    }
    Ok(Trained { model, epoch_loss })
}

/// Per-instance objective: data loss plus `lambda` times the squared norm
/// of the parameters the instance activates (bias included). This is the
/// function whose gradient [`instance_gradient`] returns and whose step
/// SGD takes.
pub fn instance_objective<S: Real>(
    model: &FmModel<S>,
    x: &SparseInstance<S>,
    lambda: S,
    loss: Loss,
) -> S {
    let (score, _) = forward(model, x);
    let mut reg = model.w0 * model.w0;
    let k = model.k();
    for &(i, _) in x.entries() {
        let i = i as usize;
        reg += model.w[i] * model.w[i];
        for f in 0..k {
            let z = model.z[i * k + f];
            reg += z * z;
        }
    }
    loss.value(score, x.label()) + lambda * reg
}

/// Gradient of [`instance_objective`] with respect to the touched
/// parameters; `w` and `z` rows are keyed by feature in entry order.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceGradient<S> {
    pub w0: S,
    pub w: Vec<(u32, S)>,
    pub z: Vec<(u32, Vec<S>)>,
}

pub fn instance_gradient<S: Real>(
    model: &FmModel<S>,
    x: &SparseInstance<S>,
    lambda: S,
    loss: Loss,
) -> InstanceGradient<S> {
    let (score, sums) = forward(model, x);
    let dld = loss.dscore(score, x.label());
    let two_lambda = lambda + lambda;
    let k = model.k();

    let w0 = dld + two_lambda * model.w0;
    let w = x
        .entries()
        .iter()
        .map(|&(i, v)| (i, dld * v + two_lambda * model.w[i as usize]))
        .collect();
    let z = x
        .entries()
        .iter()
        .map(|&(i, v)| {
            let row = (0..k)
                .map(|f| {
                    let z = model.z[i as usize * k + f];
                    dld * v * (sums[f] - z * v) + two_lambda * z
                })
                .collect();
            (i, row)
        })
        .collect();
    InstanceGradient { w0, w, z }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fm::predict;

    fn tiny_graph() -> FollowGraph {
        FollowGraph::new(
            6,
            vec![
                vec![0, 1, 2],
                vec![0, 1],
                vec![3, 4, 5],
                vec![4, 5],
                vec![0, 2],
                vec![3, 5],
            ],
        )
    }

    #[test]
    fn config_validation_catches_nonsense() {
        let ok = TrainConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            TrainConfig { k: 0, ..ok.clone() },
            TrainConfig { learning_rate: 0.0, ..ok.clone() },
            TrainConfig { learning_rate: f64::NAN, ..ok.clone() },
            TrainConfig { lambda: -1.0, ..ok.clone() },
            TrainConfig { epochs: 0, ..ok.clone() },
            TrainConfig { neg_ratio: 0.0, ..ok.clone() },
            TrainConfig { init_scale: -0.5, ..ok.clone() },
        ] {
            assert!(matches!(train::<f64>(
                &FeatureSpace::mf(1, 1),
                &[encode_mf(&FeatureSpace::mf(1, 1), 0, 0, 1.0)],
                &bad
            ), Err(FmError::InvalidConfig(_))), "accepted {bad:?}");
        }
    }

    #[test]
    fn negatives_avoid_follows_and_scale_with_degree() {
        let g = tiny_graph();
        let neg = sample_negatives(&g, 1.0, 9).unwrap();
        let mut per_user = vec![0usize; 6];
        for &(u, b) in &neg.pairs {
            assert!(!g.contains(u, b), "({u}, {b}) is a follow");
            per_user[u as usize] += 1;
        }
        assert_eq!(per_user, vec![3, 2, 3, 2, 2, 2]);
        assert_eq!(neg.capped_users, 0);
    }

    #[test]
    fn negative_draws_cap_at_unfollowed_blogs() {
        // user follows 4 of 6 blogs: ceil(3 * 4) = 12 wanted, only 2 exist
        let g = FollowGraph::new(6, vec![vec![0, 1, 2, 3]]);
        let neg = sample_negatives(&g, 3.0, 1).unwrap();
        assert_eq!(neg.pairs.len(), 2);
        assert_eq!(neg.capped_users, 1);
    }

    #[test]
    fn fractional_ratio_rounds_up() {
        let g = FollowGraph::new(10, vec![vec![0, 1, 2]]);
        let neg = sample_negatives(&g, 0.5, 1).unwrap();
        assert_eq!(neg.pairs.len(), 2, "ceil(0.5 * 3)");
    }

    #[test]
    fn negative_sampling_is_deterministic() {
        let g = tiny_graph();
        assert_eq!(sample_negatives(&g, 1.0, 5).unwrap(), sample_negatives(&g, 1.0, 5).unwrap());
        assert_ne!(
            sample_negatives(&g, 1.0, 5).unwrap().pairs,
            sample_negatives(&g, 1.0, 6).unwrap().pairs
        );
    }

    #[test]
    fn build_instances_orders_positives_then_negatives() {
        let g = FollowGraph::new(3, vec![vec![0], vec![2]]);
        let space = FeatureSpace::mf(2, 3);
        let xs = build_instances::<f64>(&space, &g, None, &[(0, 1)]);
        assert_eq!(xs.len(), 3);
        assert_eq!(xs[0].label(), 1.0);
        assert_eq!(xs[1].label(), 1.0);
        assert_eq!(xs[2].label(), 0.0);
        let idx: Vec<u32> = xs[2].entries().iter().map(|&(i, _)| i).collect();
        assert_eq!(idx, vec![0, 2 + 1]);
    }

    fn train_tiny(loss: Loss, seed: u64) -> Trained<f64> {
        let g = tiny_graph();
        let space = FeatureSpace::mf(6, 6);
        let neg = sample_negatives(&g, 1.0, seed ^ 1).unwrap();
        let xs = build_instances::<f64>(&space, &g, None, &neg.pairs);
        let config = TrainConfig {
            epochs: 40,
            learning_rate: 0.1,
            init_scale: 0.1,
            loss,
            seed,
            ..TrainConfig::default()
        };
        train(&space, &xs, &config).unwrap()
    }

    #[test]
    fn loss_decreases_on_separable_data() {
        for loss in [Loss::Logistic, Loss::Squared] {
            let t = train_tiny(loss, 3);
            let first = t.epoch_loss[0];
            let last = *t.epoch_loss.last().unwrap();
            assert!(
                last < 0.5 * first,
                "{} loss barely moved: {first} -> {last}",
                loss.label()
            );
        }
    }

    #[test]
    fn trained_model_separates_positives_from_negatives() {
        let g = tiny_graph();
        let space = FeatureSpace::mf(6, 6);
        let t = train_tiny(Loss::Logistic, 3);
        let neg = sample_negatives(&g, 1.0, 2).unwrap();
        let mut pos_mean = 0.0;
        let mut pos_n = 0;
        for (u, b) in g.edges() {
            pos_mean += predict(&t.model, &encode_mf(&space, u, b, 1.0));
            pos_n += 1;
        }
        let mut neg_mean = 0.0;
        for &(u, b) in &neg.pairs {
            neg_mean += predict(&t.model, &encode_mf(&space, u, b, 0.0));
        }
        pos_mean /= pos_n as f64;
        neg_mean /= neg.pairs.len() as f64;
        assert!(
            pos_mean > neg_mean + 0.5,
            "positives {pos_mean:.3} should clear negatives {neg_mean:.3}"
        );
    }

    #[test]
    fn training_is_bit_reproducible() {
        let a = train_tiny(Loss::Logistic, 11);
        let b = train_tiny(Loss::Logistic, 11);
        assert_eq!(a.model, b.model);
        assert_eq!(a.epoch_loss, b.epoch_loss);
        let c = train_tiny(Loss::Logistic, 12);
        assert_ne!(a.model, c.model);
    }

    #[test]
    fn absurd_learning_rate_reports_divergence() {
        let g = tiny_graph();
        let space = FeatureSpace::mf(6, 6);
        let xs = build_instances::<f64>(&space, &g, None, &[]);
        let config = TrainConfig {
            learning_rate: 1e12,
            loss: Loss::Squared,
            epochs: 50,
            init_scale: 0.1,
            ..TrainConfig::default()
        };
        match train(&space, &xs, &config) {
            Err(FmError::Diverged { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn empty_instances_are_rejected() {
        let space = FeatureSpace::mf(1, 1);
        assert!(matches!(
            train::<f64>(&space, &[], &TrainConfig::default()),
            Err(FmError::NoInstances)
        ));
    }

    #[test]
    fn sgd_step_applies_exactly_the_reported_gradient() {
        let space = FeatureSpace::app_fm(3, 3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut model = FmModel::init(space, 2, 0.3, &mut rng);
        model.w0 = 0.2;
        for (i, w) in model.w.iter_mut().enumerate() {
            *w = 0.01 * i as f64 - 0.03;
        }
        let x = encode_app_fm(&space, 1, 2, &[0], 1.0);
        let lr = 0.05;
        let lambda = 0.01;

        let grad = instance_gradient(&model, &x, lambda, Loss::Logistic);
        let mut manual = model.clone();
        manual.w0 = manual.w0 - lr * grad.w0;
        for &(i, g) in &grad.w {
            manual.w[i as usize] -= lr * g;
        }
        for (i, row) in &grad.z {
            for (f, g) in row.iter().enumerate() {
                manual.z[*i as usize * 2 + f] -= lr * g;
            }
        }

        let mut stepped = model.clone();
        sgd_step(&mut stepped, &x, lr, lambda, Loss::Logistic).unwrap();
        assert_eq!(stepped.w0, manual.w0);
        assert_eq!(stepped.w, manual.w);
        assert_eq!(stepped.z, manual.z);
    }

    #[test]
    fn gradient_matches_finite_differences_spot_check() {
        let space = FeatureSpace::app_fm(4, 4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut model = FmModel::init(space, 3, 0.4, &mut rng);
        model.w0 = -0.1;
        for (i, w) in model.w.iter_mut().enumerate() {
            *w = 0.02 * (i as f64) - 0.1;
        }
        let x = encode_app_fm(&space, 2, 1, &[0, 2], 1.0);
        let lambda = 0.05;
        let h = 1e-5;

        for loss in [Loss::Logistic, Loss::Squared] {
            let grad = instance_gradient(&model, &x, lambda, loss);
            let check = |analytic: f64, fd: f64| {
                let denom = analytic.abs().max(fd.abs());
                if denom < 1e-6 {
                    assert!((analytic - fd).abs() < 1e-8);
                } else {
                    assert!(
                        ((analytic - fd) / denom).abs() < 1e-4,
                        "analytic {analytic} vs fd {fd}"
                    );
                }
            };
            let mut m = model.clone();
            m.w0 = model.w0 + h;
            let up = instance_objective(&m, &x, lambda, loss);
            m.w0 = model.w0 - h;
            let down = instance_objective(&m, &x, lambda, loss);
            check(grad.w0, (up - down) / (2.0 * h));

            for &(i, g) in &grad.w {
                let mut m = model.clone();
                m.w[i as usize] = model.w[i as usize] + h;
                let up = instance_objective(&m, &x, lambda, loss);
                m.w[i as usize] = model.w[i as usize] - h;
                let down = instance_objective(&m, &x, lambda, loss);
                check(g, (up - down) / (2.0 * h));
            }
        }
    }

    #[test]
    fn untouched_parameters_have_zero_objective_sensitivity() {
        let space = FeatureSpace::mf(3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = FmModel::init(space, 2, 0.2, &mut rng);
        let x = encode_mf(&space, 0, 0, 1.0);
        let base = instance_objective(&model, &x, 0.5, Loss::Logistic);
        // feature 5 (blog 2) is inactive: moving its weight does nothing
        let mut m = model.clone();
        m.w[5] = 100.0;
        assert_eq!(instance_objective(&m, &x, 0.5, Loss::Logistic), base);
    }

    #[test]
    fn epoch_prefix_is_stable_across_longer_runs() {
        let g = tiny_graph();
        let space = FeatureSpace::mf(6, 6);
        let xs = build_instances::<f64>(&space, &g, None, &[]);
        let short = train(&space, &xs, &TrainConfig { epochs: 3, ..TrainConfig::default() }).unwrap();
        let long = train(&space, &xs, &TrainConfig { epochs: 6, ..TrainConfig::default() }).unwrap();
        assert_eq!(short.epoch_loss[..], long.epoch_loss[..3]);
    }
}
