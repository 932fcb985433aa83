//! TSV readers and writers for follow and app-usage data.
//!
//! Follow files carry `user<TAB>blog` edges; app files carry
//! `user<TAB>app<TAB>count` triples. Both are read line by line with
//! malformed lines reported by number, and written back in index order so a
//! round trip through [`write_follows`]/[`write_apps`] re-ingests to the
//! same matrices.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use super::{AppUsage, CorpusError, EntityKind, FollowGraph, Vocab};

/// Result of reading a follow file: vocabularies, the graph, and how many
/// repeated edges were collapsed.
#[derive(Debug)]
pub struct FollowIngest {
    pub users: Vocab,
    pub blogs: Vocab,
    pub graph: FollowGraph,
    pub duplicate_edges: usize,
}

/// Result of reading an app-usage file against an existing user vocabulary.
#[derive(Debug)]
pub struct AppIngest {
    pub apps: Vocab,
    pub usage: AppUsage,
    /// Lines whose user never appeared in the follow data.
    pub dropped_unknown_users: usize,
    /// Repeated `(user, app)` observations merged by summing counts.
    pub merged_duplicates: usize,
}

pub fn ingest_follows(path: &Path) -> Result<FollowIngest, CorpusError> {
    let file = File::open(path)?;
    ingest_follows_from(BufReader::new(file), &path.display().to_string())
}

/// Reader-based variant of [`ingest_follows`]; `source_name` labels errors.
pub fn ingest_follows_from(
    reader: impl BufRead,
    source_name: &str,
) -> Result<FollowIngest, CorpusError> {
    let mut users = Vocab::new(EntityKind::User);
    let mut blogs = Vocab::new(EntityKind::Blog);
    let mut rows: Vec<Vec<u32>> = Vec::new();
    let mut accepted = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        let (user_id, blog_id) = split2(line).ok_or_else(|| CorpusError::FieldCount {
            source_name: source_name.to_owned(),
            line: lineno + 1,
            expected: 2,
        })?;
        let u = users.intern(user_id);
        if u as usize == rows.len() {
            rows.push(Vec::new());
        }
        let b = blogs.intern(blog_id);
        rows[u as usize].push(b);
        accepted += 1;
    }

    if accepted == 0 {
        return Err(CorpusError::Empty {
            source_name: source_name.to_owned(),
        });
    }

    let graph = FollowGraph::new(blogs.len(), rows);
    let duplicate_edges = accepted - graph.nnz();
    Ok(FollowIngest {
        users,
        blogs,
        graph,
        duplicate_edges,
    })
}

pub fn ingest_apps(path: &Path, users: &Vocab, top_k: usize) -> Result<AppIngest, CorpusError> {
    let file = File::open(path)?;
    ingest_apps_from(BufReader::new(file), &path.display().to_string(), users, top_k)
}

/// Reader-based variant of [`ingest_apps`].
///
/// Rows align with `users`: every user from the follow data gets a row,
/// possibly empty. Per user only the `top_k` apps by count are kept, ties
/// resolved toward the smaller app index.
pub fn ingest_apps_from(
    reader: impl BufRead,
    source_name: &str,
    users: &Vocab,
    top_k: usize,
) -> Result<AppIngest, CorpusError> {
    assert!(top_k >= 1, "top_k must be at least 1");
    let mut apps = Vocab::new(EntityKind::App);
    // raw[u] accumulates (app, summed count) before the top-k cut
    let mut raw: Vec<Vec<(u32, u32)>> = vec![Vec::new(); users.len()];
    let mut dropped_unknown_users = 0usize;
    let mut merged_duplicates = 0usize;
    let mut accepted = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        let (user_id, app_id, count_str) =
            split3(line).ok_or_else(|| CorpusError::FieldCount {
                source_name: source_name.to_owned(),
                line: lineno + 1,
                expected: 3,
            })?;
        let count: u32 = match count_str.parse() {
            Ok(c) if c > 0 => c,
            _ => {
                return Err(CorpusError::BadCount {
                    source_name: source_name.to_owned(),
                    line: lineno + 1,
                    value: count_str.to_owned(),
                })
            }
        };
        let Some(u) = users.index_of(user_id) else {
            dropped_unknown_users += 1;
            continue;
        };
        let a = apps.intern(app_id);
        let row = &mut raw[u as usize];
        match row.iter_mut().find(|(app, _)| *app == a) {
            Some((_, c)) => {
                *c = c.saturating_add(count);
                merged_duplicates += 1;
            }
            None => row.push((a, count)),
        }
        accepted += 1;
    }

    if accepted == 0 && dropped_unknown_users == 0 {
        return Err(CorpusError::Empty {
            source_name: source_name.to_owned(),
        });
    }

    for row in &mut raw {
        if row.len() > top_k {
            // count descending, then smaller app index wins
            row.sort_unstable_by(|&(a1, c1), &(a2, c2)| c2.cmp(&c1).then(a1.cmp(&a2)));
            row.truncate(top_k);
        }
    }

    let usage = AppUsage::new(apps.len(), raw);
    Ok(AppIngest {
        apps,
        usage,
        dropped_unknown_users,
        merged_duplicates,
    })
}

/// Write `user<TAB>blog` edges in row-major index order.
pub fn write_follows(
    mut w: impl Write,
    users: &Vocab,
    blogs: &Vocab,
    graph: &FollowGraph,
) -> io::Result<()> {
    for (u, b) in graph.edges() {
        writeln!(w, "{}\t{}", users.name(u), blogs.name(b))?;
    }
    Ok(())
}

/// Write `user<TAB>app<TAB>count` triples in row-major index order.
pub fn write_apps(
    mut w: impl Write,
    users: &Vocab,
    apps: &Vocab,
    usage: &AppUsage,
) -> io::Result<()> {
    for u in 0..usage.user_count() {
        for &(a, count) in usage.row(u as u32) {
            writeln!(w, "{}\t{}\t{}", users.name(u as u32), apps.name(a), count)?;
        }
    }
    Ok(())
}

fn split2(line: &str) -> Option<(&str, &str)> {
    let mut it = line.split('\t');
    let a = it.next()?;
    let b = it.next()?;
    if it.next().is_some() || a.is_empty() || b.is_empty() {
        return None;
    }
    Some((a, b))
}

fn split3(line: &str) -> Option<(&str, &str, &str)> {
    let mut it = line.split('\t');
    let a = it.next()?;
    let b = it.next()?;
    let c = it.next()?;
    if it.next().is_some() || a.is_empty() || b.is_empty() || c.is_empty() {
        return None;
    }
    Some((a, b, c))
}
