//! User-tweet bipartite interaction graph.
//!
//! Tweets and users live in separate index spaces, so an edge always joins
//! one tweet row to one user row. Adjacency is stored twice, as CSR in
//! both directions, and every entry carries the behavior type of the edge.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const GRAPH_MAGIC: &[u8; 4] = b"SAGG";
pub const GRAPH_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("edge list is empty")]
    Empty,
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("tweet '{tweet}' has {count} post edges, expected exactly one")]
    Author { tweet: String, count: usize },
    #[error("refusing to save an empty graph")]
    EmptySave,
    #[error("not a graph file (bad magic)")]
    BadMagic,
    #[error("unsupported graph format version {0}")]
    Version(u32),
    #[error("graph file is truncated or corrupt: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Behavior an edge records. The integer codes are part of the file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum EdgeType {
    Post = 0,
    Retweet = 1,
}

impl EdgeType {
    pub const ALL: [EdgeType; 2] = [EdgeType::Post, EdgeType::Retweet];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(EdgeType::Post),
            1 => Some(EdgeType::Retweet),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeType::Post => "post",
            EdgeType::Retweet => "retweet",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "post" => Some(EdgeType::Post),
            "retweet" => Some(EdgeType::Retweet),
            _ => None,
        }
    }
}

impl std::fmt::Display for EdgeType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One raw behavior record, keyed by external ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EdgeRecord {
    pub tweet: String,
    pub user: String,
    pub kind: EdgeType,
}

impl EdgeRecord {
    pub fn new(tweet: impl Into<String>, user: impl Into<String>, kind: EdgeType) -> Self {
        Self {
            tweet: tweet.into(),
            user: user.into(),
            kind,
        }
    }
}

/// Compressed sparse rows with a typed entry per neighbor.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Csr {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    kinds: Vec<EdgeType>,
}

impl Csr {
    fn from_rows(rows: Vec<Vec<(u32, EdgeType)>>) -> Self {
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        let total = rows.iter().map(Vec::len).sum();
        let mut targets = Vec::with_capacity(total);
        let mut kinds = Vec::with_capacity(total);
        offsets.push(0);
        for mut row in rows {
            row.sort_unstable();
            row.dedup();
            for (t, k) in row {
                targets.push(t);
                kinds.push(k);
            }
            offsets.push(targets.len());
        }
        Csr {
            offsets,
            targets,
            kinds,
        }
    }

    pub fn num_rows(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn num_entries(&self) -> usize {
        self.targets.len()
    }

    pub fn degree(&self, row: usize) -> usize {
        self.offsets[row + 1] - self.offsets[row]
    }

    pub fn targets(&self, row: usize) -> &[u32] {
        &self.targets[self.offsets[row]..self.offsets[row + 1]]
    }

    pub fn kinds(&self, row: usize) -> &[EdgeType] {
        &self.kinds[self.offsets[row]..self.offsets[row + 1]]
    }

    pub fn entry(&self, row: usize, i: usize) -> (u32, EdgeType) {
        let at = self.offsets[row] + i;
        (self.targets[at], self.kinds[at])
    }

    pub fn row(&self, row: usize) -> impl Iterator<Item = (u32, EdgeType)> + '_ {
        self.targets(row)
            .iter()
            .copied()
            .zip(self.kinds(row).iter().copied())
    }
}

/// Immutable bipartite graph; safe to share across threads.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BipartiteGraph {
    tweet_to_user: Csr,
    user_to_tweet: Csr,
    tweet_ids: Vec<String>,
    user_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub num_tweets: usize,
    pub num_users: usize,
    pub num_post_edges: usize,
    pub num_retweet_edges: usize,
    /// `tweet_degree_hist[d]` is the number of tweets with `d` incident edges.
    pub tweet_degree_hist: Vec<usize>,
    pub user_degree_hist: Vec<usize>,
}

/// Builds the graph, assigning dense indices in first-appearance order.
///
/// Repeated `(tweet, user, type)` triples collapse to a single edge. With
/// `strict_author` every tweet must carry exactly one post edge.
pub fn build_graph(edges: &[EdgeRecord], strict_author: bool) -> Result<BipartiteGraph, GraphError> {
    if edges.is_empty() {
        return Err(GraphError::Empty);
    }
    let mut tweet_index: HashMap<&str, u32> = HashMap::new();
    let mut user_index: HashMap<&str, u32> = HashMap::new();
    let mut tweet_ids = Vec::new();
    let mut user_ids = Vec::new();
    let mut t2u: Vec<Vec<(u32, EdgeType)>> = Vec::new();

    for e in edges {
        let t = *tweet_index.entry(e.tweet.as_str()).or_insert_with(|| {
            tweet_ids.push(e.tweet.clone());
            t2u.push(Vec::new());
            (tweet_ids.len() - 1) as u32
        });
        let u = *user_index.entry(e.user.as_str()).or_insert_with(|| {
            user_ids.push(e.user.clone());
            (user_ids.len() - 1) as u32
        });
        t2u[t as usize].push((u, e.kind));
    }

    let tweet_to_user = Csr::from_rows(t2u);
    if strict_author {
        for (t, id) in tweet_ids.iter().enumerate() {
            let count = tweet_to_user
                .kinds(t)
                .iter()
                .filter(|&&k| k == EdgeType::Post)
                .count();
            if count != 1 {
                return Err(GraphError::Author {
                    tweet: id.clone(),
                    count,
                });
            }
        }
    }
    let user_to_tweet = transpose(&tweet_to_user, user_ids.len());
    Ok(BipartiteGraph {
        tweet_to_user,
        user_to_tweet,
        tweet_ids,
        user_ids,
    })
}

fn transpose(csr: &Csr, num_cols: usize) -> Csr {
    let mut rows: Vec<Vec<(u32, EdgeType)>> = vec![Vec::new(); num_cols];
    for r in 0..csr.num_rows() {
        for (c, k) in csr.row(r) {
            rows[c as usize].push((r as u32, k));
        }
    }
    Csr::from_rows(rows)
}

impl BipartiteGraph {
    pub fn num_tweets(&self) -> usize {
        self.tweet_ids.len()
    }

    pub fn num_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn num_edges(&self) -> usize {
        self.tweet_to_user.num_entries()
    }

    pub fn is_empty(&self) -> bool {
        self.tweet_ids.is_empty()
    }

    pub fn tweet_to_user(&self) -> &Csr {
        &self.tweet_to_user
    }

    pub fn user_to_tweet(&self) -> &Csr {
        &self.user_to_tweet
    }

    pub fn tweet_ids(&self) -> &[String] {
        &self.tweet_ids
    }

    pub fn user_ids(&self) -> &[String] {
        &self.user_ids
    }

    pub fn tweet_index(&self, id: &str) -> Option<u32> {
        self.tweet_ids.iter().position(|t| t == id).map(|i| i as u32)
    }

    pub fn tweet_index_map(&self) -> HashMap<&str, u32> {
        self.tweet_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i as u32))
            .collect()
    }

    pub fn user_index(&self, id: &str) -> Option<u32> {
        self.user_ids.iter().position(|u| u == id).map(|i| i as u32)
    }

    /// All `(tweet, user, type)` triples read from the tweet-side rows.
    pub fn triples_from_tweets(&self) -> Vec<(u32, u32, EdgeType)> {
        let mut out = Vec::with_capacity(self.num_edges());
        for t in 0..self.num_tweets() {
            for (u, k) in self.tweet_to_user.row(t) {
                out.push((t as u32, u, k));
            }
        }
        out
    }

    /// All `(tweet, user, type)` triples read from the user-side rows, sorted.
    pub fn triples_from_users(&self) -> Vec<(u32, u32, EdgeType)> {
        let mut out = Vec::with_capacity(self.num_edges());
        for u in 0..self.num_users() {
            for (t, k) in self.user_to_tweet.row(u) {
                out.push((t, u as u32, k));
            }
        }
        out.sort_unstable();
        out
    }

    /// Distinct tweets reachable in exactly two steps, excluding `tweet` itself.
    pub fn second_order_tweets(&self, tweet: u32) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        for &u in self.tweet_to_user.targets(tweet as usize) {
            for &t in self.user_to_tweet.targets(u as usize) {
                if t != tweet {
                    out.insert(t);
                }
            }
        }
        out
    }

    /// Distinct users adjacent to `tweet`.
    pub fn first_order_users(&self, tweet: u32) -> BTreeSet<u32> {
        self.tweet_to_user.targets(tweet as usize).iter().copied().collect()
    }

    /// Edge list in graph index order, suitable for re-serializing as TSV.
    pub fn edge_records(&self) -> Vec<EdgeRecord> {
        self.triples_from_tweets()
            .into_iter()
            .map(|(t, u, k)| {
                EdgeRecord::new(
                    self.tweet_ids[t as usize].clone(),
                    self.user_ids[u as usize].clone(),
                    k,
                )
            })
            .collect()
    }
}

pub fn stats(graph: &BipartiteGraph) -> GraphStats {
    let mut post = 0;
    let mut retweet = 0;
    for t in 0..graph.num_tweets() {
        for &k in graph.tweet_to_user.kinds(t) {
            match k {
                EdgeType::Post => post += 1,
                EdgeType::Retweet => retweet += 1,
            }
        }
    }
    GraphStats {
        num_tweets: graph.num_tweets(),
        num_users: graph.num_users(),
        num_post_edges: post,
        num_retweet_edges: retweet,
        tweet_degree_hist: degree_histogram(&graph.tweet_to_user),
        user_degree_hist: degree_histogram(&graph.user_to_tweet),
    }
}

fn degree_histogram(csr: &Csr) -> Vec<usize> {
    let max = (0..csr.num_rows()).map(|r| csr.degree(r)).max().unwrap_or(0);
    let mut hist = vec![0; max + 1];
    for r in 0..csr.num_rows() {
        hist[csr.degree(r)] += 1;
    }
    hist
}

// ---------------------------------------------------------------------------
// Text edge list

/// Parses `tweet_id<TAB>user_id<TAB>{post|retweet}` lines. Blank lines are skipped.
pub fn read_edge_tsv<R: BufRead>(reader: R) -> Result<Vec<EdgeRecord>, GraphError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(GraphError::Malformed {
                line: lineno,
                msg: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(GraphError::Malformed {
                line: lineno,
                msg: "empty id".into(),
            });
        }
        let kind = EdgeType::parse(fields[2].trim_end_matches('\r')).ok_or_else(|| {
            GraphError::Malformed {
                line: lineno,
                msg: format!("unknown edge type '{}'", fields[2]),
            }
        })?;
        out.push(EdgeRecord::new(fields[0], fields[1], kind));
    }
    Ok(out)
}

pub fn read_edge_tsv_file(path: &Path) -> Result<Vec<EdgeRecord>, GraphError> {
    read_edge_tsv(BufReader::new(File::open(path)?))
}

pub fn write_edge_tsv<W: Write>(mut w: W, edges: &[EdgeRecord]) -> std::io::Result<()> {
    for e in edges {
        writeln!(w, "{}\t{}\t{}", e.tweet, e.user, e.kind)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Binary graph file

pub fn save_graph(graph: &BipartiteGraph, path: &Path) -> Result<(), GraphError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_graph(graph, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_graph<W: Write>(graph: &BipartiteGraph, w: &mut W) -> Result<(), GraphError> {
    if graph.is_empty() {
        return Err(GraphError::EmptySave);
    }
    w.write_all(GRAPH_MAGIC)?;
    w.write_all(&GRAPH_FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(graph.num_tweets() as u64).to_le_bytes())?;
    w.write_all(&(graph.num_users() as u64).to_le_bytes())?;
    w.write_all(&(graph.num_edges() as u64).to_le_bytes())?;
    write_csr(w, &graph.tweet_to_user)?;
    write_csr(w, &graph.user_to_tweet)?;
    write_ids(w, &graph.tweet_ids)?;
    write_ids(w, &graph.user_ids)?;
    Ok(())
}

fn write_csr<W: Write>(w: &mut W, csr: &Csr) -> std::io::Result<()> {
    for &o in &csr.offsets {
        w.write_all(&(o as u64).to_le_bytes())?;
    }
    for &t in &csr.targets {
        w.write_all(&t.to_le_bytes())?;
    }
    let codes: Vec<u8> = csr.kinds.iter().map(|k| k.code()).collect();
    w.write_all(&codes)
}

fn write_ids<W: Write>(w: &mut W, ids: &[String]) -> std::io::Result<()> {
    for id in ids {
        w.write_all(&(id.len() as u32).to_le_bytes())?;
        w.write_all(id.as_bytes())?;
    }
    Ok(())
}

pub fn load_graph(path: &Path) -> Result<BipartiteGraph, GraphError> {
    let mut buf = Vec::new();
    File::open(path)?.read_to_end(&mut buf)?;
    read_graph(&buf)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], GraphError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| GraphError::Corrupt(format!("need {} bytes at offset {}", n, self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, GraphError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, GraphError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len(&mut self) -> Result<usize, GraphError> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| GraphError::Corrupt(format!("count {v} too large")))
    }
}

pub fn read_graph(buf: &[u8]) -> Result<BipartiteGraph, GraphError> {
    let mut c = Cursor { buf, pos: 0 };
    if c.take(4)? != GRAPH_MAGIC {
        return Err(GraphError::BadMagic);
    }
    let version = c.u32()?;
    if version != GRAPH_FORMAT_VERSION {
        return Err(GraphError::Version(version));
    }
    let num_tweets = c.len()?;
    let num_users = c.len()?;
    let num_edges = c.len()?;
    let tweet_to_user = read_csr(&mut c, num_tweets, num_edges, num_users)?;
    let user_to_tweet = read_csr(&mut c, num_users, num_edges, num_tweets)?;
    let tweet_ids = read_ids(&mut c, num_tweets)?;
    let user_ids = read_ids(&mut c, num_users)?;
    if c.pos != buf.len() {
        return Err(GraphError::Corrupt("trailing bytes".into()));
    }
    let g = BipartiteGraph {
        tweet_to_user,
        user_to_tweet,
        tweet_ids,
        user_ids,
    };
    if g.triples_from_tweets() != g.triples_from_users() {
        return Err(GraphError::Corrupt("adjacency directions disagree".into()));
    }
    Ok(g)
}

fn read_csr(c: &mut Cursor<'_>, rows: usize, entries: usize, cols: usize) -> Result<Csr, GraphError> {
    let mut offsets = Vec::with_capacity(rows + 1);
    for _ in 0..=rows {
        offsets.push(c.len()?);
    }
    if offsets[0] != 0 || offsets[rows] != entries || offsets.windows(2).any(|w| w[0] > w[1]) {
        return Err(GraphError::Corrupt("bad row offsets".into()));
    }
    let mut targets = Vec::with_capacity(entries);
    for _ in 0..entries {
        let t = c.u32()?;
        if t as usize >= cols {
            return Err(GraphError::Corrupt(format!("neighbor index {t} out of range")));
        }
        targets.push(t);
    }
    let kinds = c
        .take(entries)?
        .iter()
        .map(|&b| EdgeType::from_code(b).ok_or_else(|| GraphError::Corrupt(format!("edge type code {b}"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Csr {
        offsets,
        targets,
        kinds,
    })
}

fn read_ids(c: &mut Cursor<'_>, n: usize) -> Result<Vec<String>, GraphError> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let len = c.u32()? as usize;
        let bytes = c.take(len)?;
        let s = std::str::from_utf8(bytes).map_err(|e| GraphError::Corrupt(e.to_string()))?;
        out.push(s.to_owned());
    }
    Ok(out)
}
