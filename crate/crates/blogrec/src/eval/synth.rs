//! Synthetic corpus generator with planted topic structure.
//!
//! Every user, blog, and app gets a topic. Users follow blogs mostly inside
//! their own topic and use apps inside it with probability `app_coupling`,
//! so the same latent structure drives both matrices: at coupling 1 the app
//! matrix reveals user topics, at 0 it is popularity noise. Blog and app
//! popularity is heavy-tailed, follow counts per user span hobbyists to
//! heavy followers, and everything is a pure function of the seed.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::EvalError;
use crate::corpus::{AppUsage, FollowGraph};

/// Probability a follow draw stays inside the user's own topic. Kept well
/// below 1 so a handful of follows leaves the topic ambiguous while a
/// coupled app history still resolves it.
const BLOG_AFFINITY: f64 = 0.75;
/// Per-user app count range before capping at the catalog size.
const APPS_PER_USER: std::ops::RangeInclusive<usize> = 4..=10;
/// Pareto shapes for item popularity. Blogs keep a heavy head but not so
/// heavy that raw popularity alone ranks held-out follows well.
const BLOG_POP_SHAPE: f64 = 2.0;
const APP_POP_SHAPE: f64 = 2.0;
/// Usage counts are uniform in this range.
const MAX_USAGE_COUNT: u32 = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub users: usize,
    pub blogs: usize,
    pub apps: usize,
    pub topics: usize,
    /// 1 ties app choice fully to the user's topic, 0 makes apps noise.
    pub app_coupling: f64,
    pub seed: u64,
}

impl SynthConfig {
    fn validate(&self) -> Result<(), EvalError> {
        if self.topics == 0 {
            return Err(EvalError::InvalidConfig("topics must be at least 1".into()));
        }
        if self.users == 0 {
            return Err(EvalError::InvalidConfig("users must be at least 1".into()));
        }
        if self.blogs < self.topics || self.apps < self.topics {
            return Err(EvalError::InvalidConfig(format!(
                "need at least one blog and app per topic: {} blogs, {} apps, {} topics",
                self.blogs, self.apps, self.topics
            )));
        }
        if !(0.0..=1.0).contains(&self.app_coupling) {
            return Err(EvalError::InvalidConfig(format!(
                "app_coupling must lie in [0, 1], got {}",
                self.app_coupling
            )));
        }
        Ok(())
    }
}

/// Generated corpus plus the planted assignments that produced it, so tests
/// can check recovery against ground truth.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub follows: FollowGraph,
    pub usage: AppUsage,
    pub user_topics: Vec<u32>,
    pub blog_topics: Vec<u32>,
    pub app_topics: Vec<u32>,
}

/// Heavy-tailed popularity weight: inverse-CDF Pareto with shape `alpha`.
fn pareto_weight(rng: &mut ChaCha8Rng, alpha: f64) -> f64 {
    (1.0 - rng.gen::<f64>()).powf(-1.0 / alpha)
}

/// Items grouped by topic with popularity-weighted samplers per topic and
/// one over the whole catalog.
struct TopicPools {
    members: Vec<Vec<u32>>,
    by_topic: Vec<WeightedIndex<f64>>,
    global: WeightedIndex<f64>,
    all: Vec<u32>,
}

impl TopicPools {
    fn build(topics: &[u32], weights: &[f64], topic_count: usize) -> Self {
        let mut members = vec![Vec::new(); topic_count];
        for (item, &t) in topics.iter().enumerate() {
            members[t as usize].push(item as u32);
        }
        let by_topic = members
            .iter()
            .map(|items| {
                let w: Vec<f64> = items.iter().map(|&i| weights[i as usize]).collect();
                WeightedIndex::new(w).expect("every topic has members with positive weight")
            })
            .collect();
        let global = WeightedIndex::new(weights.to_vec()).expect("positive weights");
        TopicPools {
            members,
            by_topic,
            global,
            all: (0..topics.len() as u32).collect(),
        }
    }

    fn draw_in_topic(&self, rng: &mut ChaCha8Rng, topic: u32) -> u32 {
        self.members[topic as usize][self.by_topic[topic as usize].sample(rng)]
    }

    fn draw_global(&self, rng: &mut ChaCha8Rng) -> u32 {
        self.all[self.global.sample(rng)]
    }
}

/// Per-user follow budget: mostly light users, a thin heavy head.
fn follow_budget(rng: &mut ChaCha8Rng, blogs: usize) -> usize {
    let r = rng.gen::<f64>();
    let d = if r < 0.50 {
        rng.gen_range(1..=5)
    } else if r < 0.80 {
        rng.gen_range(6..=20)
    } else if r < 0.92 {
        rng.gen_range(21..=60)
    } else {
        rng.gen_range(61..=240)
    };
    d.min((blogs / 2).max(1))
}

/// Generate a corpus from planted topics. One seeded RNG stream is consumed
/// in a fixed order (assignments, popularities, then users in index order),
/// so equal configs yield byte-equal corpora.
pub fn synth_generate(config: &SynthConfig) -> Result<SynthCorpus, EvalError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let t = config.topics;

    // popular topics attract more users, blogs, and apps
    let topic_weight: Vec<f64> = (0..t).map(|i| 1.0 / (i + 1) as f64).collect();
    let topic_dist = WeightedIndex::new(&topic_weight).expect("positive weights");

    // the first item of each kind per topic guarantees nonempty pools
    let assign = |rng: &mut ChaCha8Rng, count: usize| -> Vec<u32> {
        (0..count)
            .map(|i| {
                if i < t {
                    i as u32
                } else {
                    topic_dist.sample(rng) as u32
                }
            })
            .collect()
    };
    let blog_topics = assign(&mut rng, config.blogs);
    let app_topics = assign(&mut rng, config.apps);
    let user_topics: Vec<u32> = (0..config.users)
        .map(|_| topic_dist.sample(&mut rng) as u32)
        .collect();

    let blog_weight: Vec<f64> = (0..config.blogs)
        .map(|_| pareto_weight(&mut rng, BLOG_POP_SHAPE))
        .collect();
    let app_weight: Vec<f64> = (0..config.apps)
        .map(|_| pareto_weight(&mut rng, APP_POP_SHAPE))
        .collect();
    let blog_pools = TopicPools::build(&blog_topics, &blog_weight, t);
    let app_pools = TopicPools::build(&app_topics, &app_weight, t);

    let mut follow_rows = Vec::with_capacity(config.users);
    let mut app_rows = Vec::with_capacity(config.users);
    for u in 0..config.users {
        let topic = user_topics[u];
        let budget = follow_budget(&mut rng, config.blogs);
        let mut follows = std::collections::BTreeSet::new();
        let mut attempts = 0;
        while follows.len() < budget && attempts < 60 * budget {
            attempts += 1;
            let blog = if rng.gen::<f64>() < BLOG_AFFINITY {
                blog_pools.draw_in_topic(&mut rng, topic)
            } else {
                blog_pools.draw_global(&mut rng)
            };
            follows.insert(blog);
        }
        if follows.is_empty() {
            follows.insert(blog_pools.draw_global(&mut rng));
        }
        follow_rows.push(follows.into_iter().collect::<Vec<u32>>());

        let app_budget = rng
            .gen_range(APPS_PER_USER)
            .min(config.apps);
        let mut apps = std::collections::BTreeSet::new();
        let mut attempts = 0;
        while apps.len() < app_budget && attempts < 60 * app_budget {
            attempts += 1;
            let app = if rng.gen::<f64>() < config.app_coupling {
                app_pools.draw_in_topic(&mut rng, topic)
            } else {
                app_pools.draw_global(&mut rng)
            };
            apps.insert(app);
        }
        if apps.is_empty() {
            apps.insert(app_pools.draw_global(&mut rng));
        }
        let row: Vec<(u32, u32)> = apps
            .into_iter()
            .map(|a| (a, rng.gen_range(1..=MAX_USAGE_COUNT)))
            .collect();
        app_rows.push(row);
    }

    Ok(SynthCorpus {
        follows: FollowGraph::new(config.blogs, follow_rows),
        usage: AppUsage::new(config.apps, app_rows),
        user_topics,
        blog_topics,
        app_topics,
    })
}
