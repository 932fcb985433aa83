//! Descriptive corpus statistics: degree histograms on a 1-2-5 log ladder
//! and an app-by-blog cosine heatmap over the most popular columns.

use std::io::{self, Write};

use super::{AppUsage, CorpusError, FollowGraph, Vocab};
use crate::knn::cosine_sim;

/// Which degree sequence a histogram describes. The label doubles as the
/// file-name fragment for CSV export.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegreeAxis {
    BlogFollowers,
    UserFollowees,
    AppUsers,
    UserApps,
}

impl DegreeAxis {
    pub fn label(self) -> &'static str {
        match self {
            DegreeAxis::BlogFollowers => "blog-followers",
            DegreeAxis::UserFollowees => "user-followees",
            DegreeAxis::AppUsers => "app-users",
            DegreeAxis::UserApps => "user-apps",
        }
    }
}

/// Histogram over logarithmic buckets 1, 2, 5, 10, 20, 50, ... where each
/// degree lands in the largest bucket floor not exceeding it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeHistogram {
    pub axis: DegreeAxis,
    /// `(bucket floor, entity count)` pairs, ascending by floor, counts > 0.
    pub bins: Vec<(u64, u64)>,
}

impl DegreeHistogram {
    /// Entities binned, zero-degree entities excluded.
    pub fn total(&self) -> u64 {
        self.bins.iter().map(|&(_, c)| c).sum()
    }

    /// CSV with a `bucket,count` header.
    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "bucket,count")?;
        for &(bucket, count) in &self.bins {
            writeln!(w, "{bucket},{count}")?;
        }
        Ok(())
    }
}

/// Largest ladder value (1, 2, 5, 10, 20, 50, ...) not exceeding `d`.
fn bucket_floor(d: u64) -> u64 {
    debug_assert!(d >= 1);
    let mut best = 1u64;
    let mut mag = 1u64;
    'ladder: loop {
        for f in [1u64, 2, 5] {
            let Some(bound) = f.checked_mul(mag) else {
                break 'ladder;
            };
            if bound <= d {
                best = bound;
            } else {
                break 'ladder;
            }
        }
        match mag.checked_mul(10) {
            Some(next) => mag = next,
            None => break,
        }
    }
    best
}

/// Bin a degree sequence. Degrees of zero are skipped since the ladder
/// starts at 1; `degrees` itself must be nonempty.
pub fn degree_histogram(degrees: &[u64], axis: DegreeAxis) -> Result<DegreeHistogram, CorpusError> {
    if degrees.is_empty() {
        return Err(CorpusError::EmptyDegrees);
    }
    let mut counts = std::collections::BTreeMap::new();
    for &d in degrees {
        if d >= 1 {
            *counts.entry(bucket_floor(d)).or_insert(0u64) += 1;
        }
    }
    Ok(DegreeHistogram {
        axis,
        bins: counts.into_iter().collect(),
    })
}

/// Cosine similarity between the most popular apps and blogs, computed on
/// binary incidence columns over the shared user axis.
#[derive(Debug, Clone)]
pub struct CrossSimHeatmap {
    /// Row apps, popularity descending (ties toward the smaller index).
    pub apps: Vec<u32>,
    /// Column blogs, same ordering rule.
    pub blogs: Vec<u32>,
    /// `values[i][j]` pairs `apps[i]` with `blogs[j]`.
    pub values: Vec<Vec<f64>>,
}

impl CrossSimHeatmap {
    /// CSV matrix with external ids on the header row and first column,
    /// similarities printed with six fractional digits.
    pub fn write_csv(
        &self,
        mut w: impl Write,
        apps: &Vocab,
        blogs: &Vocab,
    ) -> io::Result<()> {
        write!(w, "app")?;
        for &b in &self.blogs {
            write!(w, ",{}", blogs.name(b))?;
        }
        writeln!(w)?;
        for (i, &a) in self.apps.iter().enumerate() {
            write!(w, "{}", apps.name(a))?;
            for v in &self.values[i] {
                write!(w, ",{v:.6}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Top indices by degree descending, ties toward the smaller index.
fn top_by_degree(degrees: &[u64], top: usize) -> Vec<u32> {
    let mut idx: Vec<u32> = (0..degrees.len() as u32).collect();
    idx.sort_by(|&a, &b| {
        degrees[b as usize]
            .cmp(&degrees[a as usize])
            .then(a.cmp(&b))
    });
    idx.truncate(top);
    idx
}

/// Build the heatmap for the `top_apps` most-used apps against the
/// `top_blogs` most-followed blogs. Zero-degree columns yield similarity 0.
pub fn cross_heatmap(
    graph: &FollowGraph,
    usage: &AppUsage,
    top_apps: usize,
    top_blogs: usize,
) -> Result<CrossSimHeatmap, CorpusError> {
    if top_apps > usage.app_count() {
        return Err(CorpusError::HeatmapSize {
            requested: top_apps,
            available: usage.app_count(),
            what: "apps",
        });
    }
    if top_blogs > graph.blog_count() {
        return Err(CorpusError::HeatmapSize {
            requested: top_blogs,
            available: graph.blog_count(),
            what: "blogs",
        });
    }
    let apps = top_by_degree(&usage.app_degrees(), top_apps);
    let blogs = top_by_degree(&graph.follower_degrees(), top_blogs);
    let app_cols = usage.app_columns();
    let blog_cols = graph.blog_columns();
    let values = apps
        .iter()
        .map(|&a| {
            blogs
                .iter()
                .map(|&b| cosine_sim::<f64>(app_cols.column(a), blog_cols.column(b)))
                .collect()
        })
        .collect();
    Ok(CrossSimHeatmap { apps, blogs, values })
}
