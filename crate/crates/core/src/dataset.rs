//! On-disk dataset layout shared by the annotation pipeline, the synthetic
//! generator and the training commands.
//!
//! A dataset directory holds:
//!
//! * `edges.tsv`: `tweet_id<TAB>user_id<TAB>{post|retweet}`
//! * `labels.tsv`: `id<TAB>{0|1}`
//! * `features.tsv`: header `dim <d>`, then `id<TAB>f1<TAB>...<TAB>fd`
//! * `low_signal.tsv` (optional): `id<TAB>{0|1}`

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::graph::{build_graph, read_edge_tsv_file, write_edge_tsv, BipartiteGraph, EdgeRecord, GraphError};
use crate::nn::Matrix;

pub const EDGES_FILE: &str = "edges.tsv";
pub const LABELS_FILE: &str = "labels.tsv";
pub const FEATURES_FILE: &str = "features.tsv";
pub const LOW_SIGNAL_FILE: &str = "low_signal.tsv";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{file}:{line}: {msg}")]
    Parse { file: String, line: usize, msg: String },
    #[error("{0}")]
    Missing(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn parse_err(file: &Path, line: usize, msg: impl Into<String>) -> DataError {
    DataError::Parse {
        file: file.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Dense rows keyed by id, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub ids: Vec<String>,
    pub rows: Matrix,
}

pub fn write_embeddings<W: Write>(mut w: W, ids: &[String], rows: &Matrix) -> std::io::Result<()> {
    writeln!(w, "dim {}", rows.cols())?;
    for (i, id) in ids.iter().enumerate() {
        write!(w, "{id}")?;
        for x in rows.row(i) {
            write!(w, "\t{x}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_embeddings(path: &Path) -> Result<Embeddings, DataError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().ok_or_else(|| parse_err(path, 1, "missing 'dim <d>' header"))??;
    let dim: usize = header
        .strip_prefix("dim ")
        .and_then(|d| d.trim().parse().ok())
        .filter(|&d| d > 0)
        .ok_or_else(|| parse_err(path, 1, format!("bad header '{header}'")))?;
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let id = fields.next().unwrap_or_default();
        let before = data.len();
        for f in fields {
            let v: f64 = f.parse().map_err(|_| parse_err(path, lineno, format!("bad number '{f}'")))?;
            data.push(v);
        }
        if data.len() - before != dim {
            return Err(parse_err(path, lineno, format!("expected {dim} values, found {}", data.len() - before)));
        }
        ids.push(id.to_owned());
    }
    let rows = Matrix::from_vec(ids.len(), dim, data).expect("row lengths checked");
    Ok(Embeddings { ids, rows })
}

/// Writes `id<TAB>value` lines.
pub fn write_id_flags<W: Write>(mut w: W, rows: impl IntoIterator<Item = (impl AsRef<str>, u8)>) -> std::io::Result<()> {
    for (id, v) in rows {
        writeln!(w, "{}\t{}", id.as_ref(), v)?;
    }
    Ok(())
}

/// Reads `id<TAB>{0|1}` lines.
pub fn read_id_flags(path: &Path) -> Result<Vec<(String, u8)>, DataError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let (id, v) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(path, i + 1, "expected id<TAB>value"))?;
        let v = match v {
            "0" => 0,
            "1" => 1,
            _ => return Err(parse_err(path, i + 1, format!("value '{v}' is not 0 or 1"))),
        };
        out.push((id.to_owned(), v));
    }
    Ok(out)
}

/// A graph with per-tweet features and labels, all indexed by graph tweet index.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: BipartiteGraph,
    pub features: Matrix,
    pub labels: Vec<u8>,
    pub low_signal: Option<Vec<bool>>,
}

impl Dataset {
    /// Aligns id-keyed rows to the graph's tweet order.
    pub fn assemble(
        graph: BipartiteGraph,
        features: &Embeddings,
        labels: &[(String, u8)],
        low_signal: Option<&[(String, u8)]>,
    ) -> Result<Dataset, DataError> {
        let feat_rows: HashMap<&str, usize> = features.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let label_of: HashMap<&str, u8> = labels.iter().map(|(id, v)| (id.as_str(), *v)).collect();
        let flag_of: Option<HashMap<&str, u8>> = low_signal.map(|l| l.iter().map(|(id, v)| (id.as_str(), *v)).collect());

        let n = graph.num_tweets();
        let mut order = Vec::with_capacity(n);
        let mut out_labels = Vec::with_capacity(n);
        let mut out_flags = flag_of.as_ref().map(|_| Vec::with_capacity(n));
        for id in graph.tweet_ids() {
            let row = *feat_rows
                .get(id.as_str())
                .ok_or_else(|| DataError::Missing(format!("no features for tweet '{id}'")))?;
            order.push(row);
            out_labels.push(
                *label_of
                    .get(id.as_str())
                    .ok_or_else(|| DataError::Missing(format!("no label for tweet '{id}'")))?,
            );
            if let (Some(flags), Some(map)) = (out_flags.as_mut(), flag_of.as_ref()) {
                flags.push(
                    *map.get(id.as_str())
                        .ok_or_else(|| DataError::Missing(format!("no low-signal flag for tweet '{id}'")))?
                        == 1,
                );
            }
        }
        Ok(Dataset {
            features: features.rows.gather_rows(&order),
            graph,
            labels: out_labels,
            low_signal: out_flags,
        })
    }

    pub fn load(dir: &Path) -> Result<Dataset, DataError> {
        let edges = read_edge_tsv_file(&dir.join(EDGES_FILE))?;
        let graph = build_graph(&edges, true)?;
        let features = read_embeddings(&dir.join(FEATURES_FILE))?;
        let labels = read_id_flags(&dir.join(LABELS_FILE))?;
        let low_path = dir.join(LOW_SIGNAL_FILE);
        let low = if low_path.exists() {
            Some(read_id_flags(&low_path)?)
        } else {
            None
        };
        Dataset::assemble(graph, &features, &labels, low.as_deref())
    }
}

/// Writes the standard files for an id-ordered set of posts.
pub fn write_dataset_files(
    dir: &Path,
    ids: &[String],
    labels: &[u8],
    features: &Matrix,
    edges: &[EdgeRecord],
    low_signal: Option<&[bool]>,
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(File::create(dir.join(EDGES_FILE))?);
    write_edge_tsv(&mut w, edges)?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(dir.join(LABELS_FILE))?);
    write_id_flags(&mut w, ids.iter().zip(labels.iter().copied()))?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(dir.join(FEATURES_FILE))?);
    write_embeddings(&mut w, ids, features)?;
    w.flush()?;
    if let Some(flags) = low_signal {
        let mut w = BufWriter::new(File::create(dir.join(LOW_SIGNAL_FILE))?);
        write_id_flags(&mut w, ids.iter().zip(flags.iter().map(|&f| u8::from(f))))?;
        w.flush()?;
    }
    Ok(())
}
