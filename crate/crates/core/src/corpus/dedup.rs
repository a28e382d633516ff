use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{Article, CorpusError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DedupConfig {
    threshold: f64,
    shingle_size: usize,
}

impl DedupConfig {
    pub const DEFAULT_THRESHOLD: f64 = 0.85;
    pub const DEFAULT_SHINGLE: usize = 5;

    pub fn new(threshold: f64) -> Result<Self, CorpusError> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(CorpusError::Threshold(threshold));
        }
        Ok(Self {
            threshold,
            shingle_size: Self::DEFAULT_SHINGLE,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

impl Default for DedupConfig {
    fn default() -> Self {
        Self {
            threshold: Self::DEFAULT_THRESHOLD,
            shingle_size: Self::DEFAULT_SHINGLE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DedupReason {
    Url,
    Title,
    Content,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Removal {
    pub duplicate_id: String,
    pub kept_id: String,
    pub reason: DedupReason,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub similarity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DedupOutcome {
    pub kept: Vec<Article>,
    pub removed: Vec<Removal>,
}

/// Lowercases the host and drops scheme, query, fragment and trailing slashes.
pub fn normalize_url(url: &str) -> String {
    let url = url.trim();
    let rest = url.split_once("://").map_or(url, |(_, r)| r);
    let rest = rest.split(['?', '#']).next().unwrap_or_default();
    let (host, path) = rest.split_once('/').map_or((rest, ""), |(h, p)| (h, p));
    let mut out = host.to_ascii_lowercase();
    let path = path.trim_end_matches('/');
    if !path.is_empty() {
        out.push('/');
        out.push_str(path);
    }
    out
}

/// Case-folds, strips punctuation and collapses whitespace.
pub fn normalize_title(title: &str) -> String {
    words(title).collect::<Vec<_>>().join(" ")
}

fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
}

/// Word `size`-grams of the lowercased, punctuation-stripped text. Texts
/// shorter than `size` words yield a single shingle of all their words.
pub fn shingles(text: &str, size: usize) -> HashSet<String> {
    let tokens: Vec<String> = words(text).collect();
    if tokens.is_empty() {
        return HashSet::new();
    }
    if tokens.len() < size {
        return HashSet::from([tokens.join(" ")]);
    }
    tokens.windows(size).map(|w| w.join(" ")).collect()
}

/// Jaccard similarity of two shingle sets; two empty sets score 0.
pub fn shingle_jaccard(a: &HashSet<String>, b: &HashSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

struct Fingerprint {
    url: String,
    title: String,
    shingles: HashSet<String>,
}

impl Fingerprint {
    fn of(article: &Article, size: usize) -> Self {
        Self {
            url: normalize_url(&article.url),
            title: normalize_title(&article.title),
            shingles: shingles(&article.body, size),
        }
    }
}

/// Keeps the first occurrence of every duplicate cluster in input order.
///
/// A later article is a duplicate of a kept one when their normalized URLs or
/// normalized titles are equal, or their body shingle similarity reaches the
/// threshold. Comparison is against kept articles only, so the kept set is
/// pairwise distinct and a second pass removes nothing.
pub fn dedup_corpus(articles: &[Article], config: &DedupConfig) -> DedupOutcome {
    let mut kept: Vec<(Article, Fingerprint)> = Vec::new();
    let mut removed = Vec::new();

    'outer: for article in articles {
        let fp = Fingerprint::of(article, config.shingle_size);
        let url_hit = kept.iter().find(|(_, k)| !fp.url.is_empty() && k.url == fp.url);
        if let Some((k, _)) = url_hit {
            removed.push(removal(article, k, DedupReason::Url, None));
            continue;
        }
        let title_hit = kept.iter().find(|(_, k)| !fp.title.is_empty() && k.title == fp.title);
        if let Some((k, _)) = title_hit {
            removed.push(removal(article, k, DedupReason::Title, None));
            continue;
        }
        for (k, kfp) in &kept {
            let sim = shingle_jaccard(&fp.shingles, &kfp.shingles);
            if sim >= config.threshold {
                removed.push(removal(article, k, DedupReason::Content, Some(sim)));
                continue 'outer;
            }
        }
        kept.push((article.clone(), fp));
    }

    DedupOutcome {
        kept: kept.into_iter().map(|(a, _)| a).collect(),
        removed,
    }
}

fn removal(dup: &Article, kept: &Article, reason: DedupReason, similarity: Option<f64>) -> Removal {
    Removal {
        duplicate_id: dup.id.clone(),
        kept_id: kept.id.clone(),
        reason,
        similarity,
    }
}
