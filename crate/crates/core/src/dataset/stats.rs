use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bundled function-word lexicon (determiners, prepositions, conjunctions,
/// wh-words, existential "there", adverbs).
pub const DEFAULT_STOPLIST: &str = include_str!("../../data/stoplist.txt");

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stoplist {
    words: BTreeSet<String>,
}

impl Stoplist {
    /// One token per line, `#` starts a comment, blank lines ignored.
    /// Tokens are lowercased.
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(|line| line.split('#').next().unwrap_or("").trim())
            .filter(|t| !t.is_empty())
            .map(str::to_lowercase)
            .collect();
        Self { words }
    }

    pub fn bundled() -> Self {
        Self::parse(DEFAULT_STOPLIST)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Whitespace-delimited word count.
pub fn word_count(caption: &str) -> usize {
    caption.split_whitespace().count()
}

/// Caption lengths in fixed-width bins: bin `i` covers `[i·w, (i+1)·w)` words.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthHistogram {
    pub bin_width: usize,
    pub counts: Vec<u64>,
}

impl LengthHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Bins that are strictly greater than both neighbours (or plateaus'
    /// first bin), ignoring empty bins.
    pub fn modes(&self) -> Vec<usize> {
        let c = &self.counts;
        (0..c.len())
            .filter(|&i| {
                c[i] > 0 && (i == 0 || c[i - 1] < c[i]) && (i + 1 == c.len() || c[i + 1] <= c[i])
            })
            .collect()
    }
}

pub fn caption_length_histogram<'a, I>(captions: I, bin_width: usize) -> Result<LengthHistogram>
where
    I: IntoIterator<Item = &'a str>,
{
    if bin_width == 0 {
        return Err(Error::InvalidArgument {
            field: "bin_width",
            reason: "must be at least 1",
        });
    }
    let mut counts: Vec<u64> = Vec::new();
    for caption in captions {
        let bin = word_count(caption) / bin_width;
        if bin >= counts.len() {
            counts.resize(bin + 1, 0);
        }
        counts[bin] += 1;
    }
    Ok(LengthHistogram { bin_width, counts })
}

/// Lowercased token counts with edge punctuation stripped and stoplist
/// members dropped.
pub fn token_frequency<'a, I>(captions: I, stoplist: &Stoplist) -> BTreeMap<String, u64>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut freq = BTreeMap::new();
    for caption in captions {
        for raw in caption.split_whitespace() {
            let token = raw
                .trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase();
            if token.is_empty() || stoplist.contains(&token) {
                continue;
            }
            *freq.entry(token).or_insert(0) += 1;
        }
    }
    freq
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionStats {
    pub total_pairs: u64,
    pub histogram: LengthHistogram,
    pub frequencies: BTreeMap<String, u64>,
}

impl CaptionStats {
    /// The `n` most frequent tokens, ties broken alphabetically.
    pub fn top_tokens(&self, n: usize) -> Vec<(String, u64)> {
        let mut items: Vec<(String, u64)> = self
            .frequencies
            .iter()
            .map(|(k, &v)| (k.to_string(), v))
            .collect();
        items.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        items.truncate(n);
        items
    }
}

pub fn caption_stats(
    captions: &[&str],
    stoplist: &Stoplist,
    bin_width: usize,
) -> Result<CaptionStats> {
    Ok(CaptionStats {
        total_pairs: captions.len() as u64,
        histogram: caption_length_histogram(captions.iter().copied(), bin_width)?,
        frequencies: token_frequency(captions.iter().copied(), stoplist),
    })
}
