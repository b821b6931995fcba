//! Weak labeling of posts from a stance hashtag lexicon.
//!
//! The lexicon starts from hand-picked seed tags and grows by co-occurrence.
//! Posts are labeled only when all their lexicon tags agree, and the
//! lexicon tags are then stripped so the label cannot leak into features.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Embeddings;
use crate::graph::{EdgeRecord, EdgeType};
use crate::nn::Matrix;

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("duplicate post id '{0}'")]
    DuplicateId(String),
    #[error("hashtag '{0}' listed with both polarities")]
    Conflict(String),
    #[error("seed lexicon is empty")]
    EmptySeed,
    #[error("purity {0} not in (0.5, 1]")]
    Purity(f64),
    #[error("feature dimension must be positive")]
    Dim,
    #[error("no external features for post '{0}'")]
    MissingFeatures(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawPost {
    pub id: String,
    pub text: String,
    pub author: String,
    #[serde(default)]
    pub retweeters: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<i64>,
    /// Id of the original post, when this post is a retweet and the
    /// original is known from metadata.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retweet_of: Option<String>,
}

pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<RawPost>, LabelError> {
    let mut posts = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let post: RawPost = serde_json::from_str(&line).map_err(|e| LabelError::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        posts.push(post);
    }
    Ok(posts)
}

pub fn write_corpus<W: Write>(mut w: W, posts: &[RawPost]) -> std::io::Result<()> {
    for p in posts {
        serde_json::to_writer(&mut w, p)?;
        writeln!(w)?;
    }
    Ok(())
}

/// Stance of a hashtag. `ProA` maps to label 0 and `ProB` to label 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Polarity {
    ProA,
    ProB,
}

impl Polarity {
    pub fn label(self) -> u8 {
        match self {
            Polarity::ProA => 0,
            Polarity::ProB => 1,
        }
    }

    fn other(self) -> Polarity {
        match self {
            Polarity::ProA => Polarity::ProB,
            Polarity::ProB => Polarity::ProA,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::ProA => "proA",
            Polarity::ProB => "proB",
        }
    }

    pub fn parse(s: &str) -> Option<Polarity> {
        match s {
            "proA" => Some(Polarity::ProA),
            "proB" => Some(Polarity::ProB),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Seed,
    Expanded,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Seed => "seed",
            Provenance::Expanded => "expanded",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HashtagLexicon {
    /// Lowercase tag without '#' -> (polarity, provenance).
    pub entries: BTreeMap<String, (Polarity, Provenance)>,
}

impl HashtagLexicon {
    pub fn from_seeds<'a>(seeds: impl IntoIterator<Item = (&'a str, Polarity)>) -> Result<Self, LabelError> {
        let mut lex = HashtagLexicon::default();
        for (tag, p) in seeds {
            lex.insert(tag, p, Provenance::Seed)?;
        }
        Ok(lex)
    }

    pub fn insert(&mut self, tag: &str, polarity: Polarity, provenance: Provenance) -> Result<(), LabelError> {
        let key = tag.trim_start_matches('#').to_lowercase();
        match self.entries.get(&key) {
            Some((p, _)) if *p != polarity => Err(LabelError::Conflict(key)),
            Some(_) => Ok(()),
            None => {
                self.entries.insert(key, (polarity, provenance));
                Ok(())
            }
        }
    }

    pub fn polarity(&self, tag: &str) -> Option<Polarity> {
        self.entries.get(tag).map(|(p, _)| *p)
    }

    pub fn contains(&self, tag: &str) -> bool {
        self.entries.contains_key(tag)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `tag<TAB>{proA|proB}<TAB>{seed|expanded}`; the provenance column is optional.
    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self, LabelError> {
        let mut lex = HashtagLexicon::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |msg: &str| LabelError::Parse {
                line: i + 1,
                msg: msg.to_owned(),
            };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 2 || cols.len() > 3 {
                return Err(parse_err("expected tag, polarity and optional provenance"));
            }
            let pol = Polarity::parse(cols[1]).ok_or_else(|| parse_err("polarity must be proA or proB"))?;
            let prov = match cols.get(2).copied() {
                None | Some("seed") => Provenance::Seed,
                Some("expanded") => Provenance::Expanded,
                Some(_) => return Err(parse_err("provenance must be seed or expanded")),
            };
            lex.insert(cols[0], pol, prov)?;
        }
        Ok(lex)
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (tag, (p, prov)) in &self.entries {
            writeln!(w, "{tag}\t{}\t{}", p.as_str(), prov.as_str())?;
        }
        Ok(())
    }
}

fn is_tag_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Byte spans `(start, end)` of every `#tag` occurrence, '#' included.
fn hashtag_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut iter = text.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        if c != '#' {
            continue;
        }
        let mut end = i + 1;
        while let Some(&(j, d)) = iter.peek() {
            if !is_tag_char(d) {
                break;
            }
            end = j + d.len_utf8();
            iter.next();
        }
        if end > i + 1 {
            spans.push((i, end));
        }
    }
    spans
}

/// Lowercased tags in order of appearance, duplicates kept.
pub fn extract_hashtags(text: &str) -> Vec<String> {
    hashtag_spans(text)
        .into_iter()
        .map(|(s, e)| text[s + 1..e].to_lowercase())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpansionConfig {
    pub min_cooccur: usize,
    pub purity: f64,
    pub rounds: usize,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        ExpansionConfig {
            min_cooccur: 5,
            purity: 0.9,
            rounds: 1,
        }
    }
}

/// Per-tag counts of posts that contain the tag and at least one lexicon
/// tag of each polarity.
pub fn cooccurrence_counts(lexicon: &HashtagLexicon, posts: &[RawPost]) -> BTreeMap<String, [usize; 2]> {
    let mut counts: BTreeMap<String, [usize; 2]> = BTreeMap::new();
    for post in posts {
        let mut tags = extract_hashtags(&post.text);
        tags.sort();
        tags.dedup();
        let mut has = [false; 2];
        for t in &tags {
            if let Some(p) = lexicon.polarity(t) {
                has[p.label() as usize] = true;
            }
        }
        if !has[0] && !has[1] {
            continue;
        }
        for t in tags.into_iter().filter(|t| !lexicon.contains(t)) {
            let c = counts.entry(t).or_default();
            for k in 0..2 {
                c[k] += usize::from(has[k]);
            }
        }
    }
    counts
}

/// Adds tags that co-occur often and predominantly with one polarity.
/// Each round uses the lexicon produced by the previous one.
pub fn expand_lexicon(
    seed: &HashtagLexicon,
    posts: &[RawPost],
    cfg: &ExpansionConfig,
) -> Result<HashtagLexicon, LabelError> {
    if seed.is_empty() {
        return Err(LabelError::EmptySeed);
    }
    if !(cfg.purity > 0.5 && cfg.purity <= 1.0) {
        return Err(LabelError::Purity(cfg.purity));
    }
    let mut lex = seed.clone();
    for _ in 0..cfg.rounds {
        let mut added = Vec::new();
        for (tag, c) in cooccurrence_counts(&lex, posts) {
            let qualifies = |p: Polarity| {
                let own = c[p.label() as usize];
                let other = c[p.other().label() as usize];
                own >= cfg.min_cooccur && own as f64 / (own + other) as f64 >= cfg.purity
            };
            match (qualifies(Polarity::ProA), qualifies(Polarity::ProB)) {
                (true, false) => added.push((tag, Polarity::ProA)),
                (false, true) => added.push((tag, Polarity::ProB)),
                _ => {}
            }
        }
        if added.is_empty() {
            break;
        }
        for (tag, p) in added {
            lex.insert(&tag, p, Provenance::Expanded)?;
        }
    }
    Ok(lex)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPost {
    pub id: String,
    pub text: String,
    pub label: u8,
    pub author: String,
    pub retweeters: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanReport {
    pub input_posts: usize,
    pub retweets_folded: usize,
    pub retweets_unresolved: usize,
    pub no_lexicon_tag: usize,
    pub mixed_polarity: usize,
    pub labeled: usize,
}

pub const RETWEET_PREFIX: &str = "RT @";

/// Removes every lexicon hashtag, repeating until none remains, and
/// collapses the whitespace left behind.
pub fn strip_lexicon_tags(text: &str, lexicon: &HashtagLexicon) -> String {
    let mut cur = text.to_owned();
    loop {
        let spans: Vec<_> = hashtag_spans(&cur)
            .into_iter()
            .filter(|&(s, e)| lexicon.contains(&cur[s + 1..e].to_lowercase()))
            .collect();
        if spans.is_empty() {
            break;
        }
        let mut next = String::with_capacity(cur.len());
        let mut last = 0;
        for (s, e) in spans {
            next.push_str(&cur[last..s]);
            next.push(' ');
            last = e;
        }
        next.push_str(&cur[last..]);
        cur = next;
    }
    cur.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Folds retweets into their originals, labels by unanimous lexicon
/// polarity, and strips lexicon tags. Output keeps input order.
pub fn label_and_clean(
    posts: &[RawPost],
    lexicon: &HashtagLexicon,
) -> Result<(Vec<LabeledPost>, CleanReport), LabelError> {
    let mut report = CleanReport {
        input_posts: posts.len(),
        ..CleanReport::default()
    };
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, p) in posts.iter().enumerate() {
        if index.insert(p.id.as_str(), i).is_some() {
            return Err(LabelError::DuplicateId(p.id.clone()));
        }
    }
    let is_retweet = |p: &RawPost| p.text.starts_with(RETWEET_PREFIX);

    let mut extra: Vec<Vec<String>> = vec![Vec::new(); posts.len()];
    for p in posts.iter().filter(|p| is_retweet(p)) {
        let target = p
            .retweet_of
            .as_deref()
            .and_then(|id| index.get(id))
            .filter(|&&i| !is_retweet(&posts[i]));
        match target {
            Some(&i) => {
                extra[i].push(p.author.clone());
                report.retweets_folded += 1;
            }
            None => report.retweets_unresolved += 1,
        }
    }

    let mut out = Vec::new();
    for (i, p) in posts.iter().enumerate() {
        if is_retweet(p) {
            continue;
        }
        let mut seen = [false; 2];
        for t in extract_hashtags(&p.text) {
            if let Some(pol) = lexicon.polarity(&t) {
                seen[pol.label() as usize] = true;
            }
        }
        let label = match seen {
            [false, false] => {
                report.no_lexicon_tag += 1;
                continue;
            }
            [true, true] => {
                report.mixed_polarity += 1;
                continue;
            }
            [true, false] => 0,
            [false, true] => 1,
        };
        let mut retweeters = Vec::new();
        for u in p.retweeters.iter().chain(&extra[i]) {
            if !retweeters.contains(u) {
                retweeters.push(u.clone());
            }
        }
        out.push(LabeledPost {
            id: p.id.clone(),
            text: strip_lexicon_tags(&p.text, lexicon),
            label,
            author: p.author.clone(),
            retweeters,
        });
    }
    report.labeled = out.len();
    Ok((out, report))
}

/// One post edge per post and one retweet edge per retweeter.
pub fn corpus_edges(posts: &[LabeledPost]) -> Vec<EdgeRecord> {
    let mut edges = Vec::new();
    for p in posts {
        edges.push(EdgeRecord::new(p.id.clone(), p.author.clone(), EdgeType::Post));
        for u in &p.retweeters {
            edges.push(EdgeRecord::new(p.id.clone(), u.clone(), EdgeType::Retweet));
        }
    }
    edges
}

/// Lowercase runs of alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Bucket and sign of a hashed token.
pub fn hash_token(token: &str, dim: usize) -> (usize, f64) {
    let h = fnv1a(token.as_bytes());
    let bucket = (h % dim as u64) as usize;
    let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
    (bucket, sign)
}

/// Signed feature hashing of unigrams and bigrams, then L2 row normalization.
pub fn hashed_features(texts: &[&str], dim: usize) -> Result<Matrix, LabelError> {
    if dim == 0 {
        return Err(LabelError::Dim);
    }
    let mut m = Matrix::zeros(texts.len(), dim);
    for (r, text) in texts.iter().enumerate() {
        let tokens = tokenize(text);
        let row = m.row_mut(r);
        let mut add = |tok: &str| {
            let (b, s) = hash_token(tok, dim);
            row[b] += s;
        };
        for t in &tokens {
            add(t);
        }
        for w in tokens.windows(2) {
            add(&format!("{} {}", w[0], w[1]));
        }
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|x| *x /= norm);
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMode<'a> {
    HashedTokens { dim: usize },
    ExternalFile(&'a Path),
}

/// Feature rows aligned with `posts`.
pub fn featurize(posts: &[LabeledPost], mode: &FeatureMode) -> Result<Matrix, LabelError> {
    match mode {
        FeatureMode::HashedTokens { dim } => {
            let texts: Vec<&str> = posts.iter().map(|p| p.text.as_str()).collect();
            hashed_features(&texts, *dim)
        }
        FeatureMode::ExternalFile(path) => {
            let emb = crate::dataset::read_embeddings(path).map_err(|e| match e {
                crate::dataset::DataError::Io(io) => LabelError::Io(io),
                other => LabelError::Parse {
                    line: 0,
                    msg: other.to_string(),
                },
            })?;
            align_external(posts, &emb)
        }
    }
}

fn align_external(posts: &[LabeledPost], emb: &Embeddings) -> Result<Matrix, LabelError> {
    let rows: HashMap<&str, usize> = emb.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let order = posts
        .iter()
        .map(|p| rows.get(p.id.as_str()).copied().ok_or_else(|| LabelError::MissingFeatures(p.id.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(emb.rows.gather_rows(&order))
}
