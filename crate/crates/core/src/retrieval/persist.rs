//! On-disk index directories.
//!
//! ```text
//! header.json      magic, version, kind, params, counts, profile
//! ids.txt          snippet ids, one per line, ascending
//! doc_lengths.bin  lexical: u32 per document
//! postings.bin     lexical: "CRPS" u32 version, u32 terms, then per term
//!                  u32 byte length, UTF-8 term, u32 n, n x (u32 doc, u32 tf)
//! vectors.bin      dense: "CRVX" u32 version, u32 dim, u64 count, f32 values
//! ```
//! All integers and floats are little-endian.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dense::DenseIndex;
use super::lexical::{Bm25Params, LexicalIndex, Posting};
use super::RetrievalError;

pub const INDEX_MAGIC: &str = "CHEMRAG-INDEX";
pub const FORMAT_VERSION: u32 = 1;
const POSTINGS_MAGIC: &[u8; 4] = b"CRPS";
const VECTORS_MAGIC: &[u8; 4] = b"CRVX";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexKind {
    Lexical,
    Dense,
}

impl std::str::FromStr for IndexKind {
    type Err = RetrievalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lexical" => Ok(IndexKind::Lexical),
            "dense" => Ok(IndexKind::Dense),
            other => Err(RetrievalError::InvalidParams(format!(
                "unknown index kind {other:?} (expected lexical or dense)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexHeader {
    pub magic: String,
    pub format_version: u32,
    pub kind: IndexKind,
    pub doc_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg_doc_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bm25: Option<Bm25Params>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedder_profile: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub enum StoredIndex {
    Lexical(LexicalIndex),
    Dense(DenseIndex),
}

#[derive(Clone, Debug)]
pub struct LoadedIndex {
    pub header: IndexHeader,
    pub index: StoredIndex,
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> RetrievalError + '_ {
    move |e| RetrievalError::Io { path: path.to_path_buf(), source: e }
}

/// Writes the files into a scratch directory beside `dir` and renames it
/// into place, so a failed write never leaves a readable partial index.
fn write_atomically(
    dir: &Path,
    files: Vec<(&str, Vec<u8>)>,
) -> Result<(), RetrievalError> {
    let parent = match dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(io_err(&parent))?;
    let tmp = tempfile::Builder::new()
        .prefix(".index-")
        .tempdir_in(&parent)
        .map_err(io_err(&parent))?;
    for (name, bytes) in files {
        let p = tmp.path().join(name);
        fs::write(&p, bytes).map_err(io_err(&p))?;
    }
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(io_err(dir))?;
    }
    let staged = tmp.keep();
    fs::rename(&staged, dir).map_err(io_err(dir))?;
    Ok(())
}

fn ids_bytes(ids: &[String]) -> Vec<u8> {
    let mut s = String::new();
    for id in ids {
        s.push_str(id);
        s.push('\n');
    }
    s.into_bytes()
}

fn header_bytes(h: &IndexHeader) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(h).expect("header serializes");
    v.push(b'\n');
    v
}

pub fn save_lexical(index: &LexicalIndex, dir: &Path, corpus: Option<&Path>) -> Result<IndexHeader, RetrievalError> {
    let header = IndexHeader {
        magic: INDEX_MAGIC.into(),
        format_version: FORMAT_VERSION,
        kind: IndexKind::Lexical,
        doc_count: index.doc_count(),
        avg_doc_length: Some(index.avg_doc_length()),
        bm25: Some(index.params()),
        embedder_profile: None,
        dim: None,
        corpus: corpus.map(Path::to_path_buf),
    };
    let lengths: Vec<u8> = index.doc_lengths().iter().flat_map(|l| l.to_le_bytes()).collect();

    let mut terms: Vec<&str> = index.terms().collect();
    terms.sort_unstable();
    let mut postings = Vec::new();
    postings.extend_from_slice(POSTINGS_MAGIC);
    postings.extend(FORMAT_VERSION.to_le_bytes());
    postings.extend((terms.len() as u32).to_le_bytes());
    for t in terms {
        let list = index.postings(t).unwrap_or_default();
        postings.extend((t.len() as u32).to_le_bytes());
        postings.extend_from_slice(t.as_bytes());
        postings.extend((list.len() as u32).to_le_bytes());
        for p in list {
            postings.extend(p.doc.to_le_bytes());
            postings.extend(p.tf.to_le_bytes());
        }
    }
    write_atomically(
        dir,
        vec![
            ("header.json", header_bytes(&header)),
            ("ids.txt", ids_bytes(index.ids())),
            ("doc_lengths.bin", lengths),
            ("postings.bin", postings),
        ],
    )?;
    Ok(header)
}

pub fn save_dense(index: &DenseIndex, dir: &Path, corpus: Option<&Path>) -> Result<IndexHeader, RetrievalError> {
    let header = IndexHeader {
        magic: INDEX_MAGIC.into(),
        format_version: FORMAT_VERSION,
        kind: IndexKind::Dense,
        doc_count: index.len(),
        avg_doc_length: None,
        bm25: None,
        embedder_profile: Some(index.profile().to_string()),
        dim: Some(index.dim()),
        corpus: corpus.map(Path::to_path_buf),
    };
    let mut vectors = Vec::with_capacity(20 + index.raw_vectors().len() * 4);
    vectors.extend_from_slice(VECTORS_MAGIC);
    vectors.extend(FORMAT_VERSION.to_le_bytes());
    vectors.extend((index.dim() as u32).to_le_bytes());
    vectors.extend((index.len() as u64).to_le_bytes());
    for x in index.raw_vectors() {
        vectors.extend(x.to_le_bytes());
    }
    write_atomically(
        dir,
        vec![
            ("header.json", header_bytes(&header)),
            ("ids.txt", ids_bytes(index.ids())),
            ("vectors.bin", vectors),
        ],
    )?;
    Ok(header)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    file: &'static str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], RetrievalError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            RetrievalError::Corrupt(format!("{} truncated at byte {}", self.file, self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, RetrievalError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, RetrievalError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn expect_magic(&mut self, magic: &[u8; 4]) -> Result<(), RetrievalError> {
        if self.take(4)? != magic {
            return Err(RetrievalError::Corrupt(format!("{} has a bad magic number", self.file)));
        }
        let v = self.u32()?;
        if v != FORMAT_VERSION {
            return Err(RetrievalError::Corrupt(format!("{} has unsupported version {v}", self.file)));
        }
        Ok(())
    }

    fn finish(&self) -> Result<(), RetrievalError> {
        if self.pos != self.bytes.len() {
            return Err(RetrievalError::Corrupt(format!("{} has trailing bytes", self.file)));
        }
        Ok(())
    }
}

pub fn read_header(dir: &Path) -> Result<IndexHeader, RetrievalError> {
    let path = dir.join("header.json");
    if !path.exists() {
        return Err(RetrievalError::MissingIndex(format!(
            "no index at {} (build one with `chemrag index build`)",
            dir.display()
        )));
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let header: IndexHeader = serde_json::from_str(&text)
        .map_err(|e| RetrievalError::Corrupt(format!("{}: {e}", path.display())))?;
    if header.magic != INDEX_MAGIC {
        return Err(RetrievalError::Corrupt(format!("{} is not a chemrag index", dir.display())));
    }
    if header.format_version != FORMAT_VERSION {
        return Err(RetrievalError::Corrupt(format!(
            "index format version {} is not supported",
            header.format_version
        )));
    }
    Ok(header)
}

fn read_file(dir: &Path, name: &str) -> Result<Vec<u8>, RetrievalError> {
    let p = dir.join(name);
    fs::read(&p).map_err(io_err(&p))
}

pub fn load_index(dir: &Path) -> Result<LoadedIndex, RetrievalError> {
    let header = read_header(dir)?;
    let ids_text = String::from_utf8(read_file(dir, "ids.txt")?)
        .map_err(|_| RetrievalError::Corrupt("ids.txt is not UTF-8".into()))?;
    let ids: Vec<String> = ids_text.lines().map(str::to_string).collect();
    if ids.len() != header.doc_count {
        return Err(RetrievalError::Corrupt(format!(
            "header says {} documents, ids.txt has {}",
            header.doc_count,
            ids.len()
        )));
    }
    let index = match header.kind {
        IndexKind::Lexical => {
            let bytes = read_file(dir, "doc_lengths.bin")?;
            let mut r = Reader { bytes: &bytes, pos: 0, file: "doc_lengths.bin" };
            let lengths = (0..ids.len()).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
            r.finish()?;

            let bytes = read_file(dir, "postings.bin")?;
            let mut r = Reader { bytes: &bytes, pos: 0, file: "postings.bin" };
            r.expect_magic(POSTINGS_MAGIC)?;
            let nterms = r.u32()?;
            let mut postings = HashMap::with_capacity(nterms as usize);
            for _ in 0..nterms {
                let len = r.u32()? as usize;
                let term = std::str::from_utf8(r.take(len)?)
                    .map_err(|_| RetrievalError::Corrupt("postings.bin has a non-UTF-8 term".into()))?
                    .to_string();
                let n = r.u32()?;
                let list = (0..n)
                    .map(|_| Ok(Posting { doc: r.u32()?, tf: r.u32()? }))
                    .collect::<Result<Vec<_>, RetrievalError>>()?;
                postings.insert(term, list);
            }
            r.finish()?;
            let params = header.bm25.unwrap_or_default();
            StoredIndex::Lexical(LexicalIndex::from_parts(params, ids, lengths, postings)?)
        }
        IndexKind::Dense => {
            let bytes = read_file(dir, "vectors.bin")?;
            let mut r = Reader { bytes: &bytes, pos: 0, file: "vectors.bin" };
            r.expect_magic(VECTORS_MAGIC)?;
            let dim = r.u32()? as usize;
            let count = r.u64()? as usize;
            if count != ids.len() || Some(dim) != header.dim {
                return Err(RetrievalError::Corrupt("vectors.bin disagrees with header".into()));
            }
            let vectors = (0..dim * count)
                .map(|_| Ok(f32::from_le_bytes(r.take(4)?.try_into().unwrap())))
                .collect::<Result<Vec<_>, RetrievalError>>()?;
            r.finish()?;
            let profile = header
                .embedder_profile
                .clone()
                .ok_or_else(|| RetrievalError::Corrupt("dense header lacks embedder_profile".into()))?;
            StoredIndex::Dense(DenseIndex::from_parts(profile, dim, ids, vectors)?)
        }
    };
    Ok(LoadedIndex { header, index })
}
