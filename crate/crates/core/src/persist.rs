//! On-disk artifacts: embedding models (text), indexes (binary), query sets
//! and match listings (text).

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::embedding::{EmbeddingError, LabelEmbeddingTable};
use crate::graph::{Graph, GraphError, LabelId, VertexId};
use crate::index::{BPlusTree, ILabelIndex, KeyMap};
use crate::matcher::MatchSet;

pub const MODEL_MAGIC: &str = "live-model";
pub const MODEL_VERSION: &str = "v1";
pub const INDEX_MAGIC: &[u8; 8] = b"LIVEIDX1";
pub const INDEX_FORMAT_VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("I/O error")]
    Io(#[from] io::Error),
    #[error("not a valid {expected} file")]
    BadMagic { expected: &'static str },
    #[error("unsupported format version {found}")]
    UnsupportedVersion { found: String },
    #[error("file is truncated")]
    Truncated,
    #[error("checksum mismatch")]
    ChecksumMismatch,
    #[error("malformed file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn malformed(msg: impl Into<String>) -> PersistError {
    PersistError::Malformed(msg.into())
}

// ---------------------------------------------------------------- models

/// Writes the model header and one line of raw parameters per label.
/// `f64` values use the shortest representation that parses back to the
/// same bits.
pub fn write_model<W: Write>(table: &LabelEmbeddingTable, mut w: W) -> io::Result<()> {
    writeln!(
        w,
        "{MODEL_MAGIC} {MODEL_VERSION} {} {} {:?} {:?} {}",
        table.dim(),
        table.label_count(),
        table.alpha(),
        table.beta(),
        u8::from(table.is_l1_normalized())
    )?;
    for l in 0..table.label_count() {
        let row: Vec<String> = table
            .raw_row(l as LabelId)
            .iter()
            .map(|x| format!("{x:?}"))
            .collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn model_to_string(table: &LabelEmbeddingTable) -> String {
    let mut buf = Vec::new();
    write_model(table, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("model text is ASCII")
}

pub fn read_model<R: BufRead>(reader: R) -> Result<LabelEmbeddingTable, PersistError> {
    let mut lines = reader.lines();
    let header = lines.next().ok_or(PersistError::Truncated)??;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.first() != Some(&MODEL_MAGIC) {
        return Err(PersistError::BadMagic { expected: "model" });
    }
    match fields.get(1) {
        Some(&MODEL_VERSION) => {}
        Some(other) => {
            return Err(PersistError::UnsupportedVersion {
                found: other.to_string(),
            })
        }
        None => return Err(PersistError::Truncated),
    }
    if fields.len() != 7 {
        return Err(malformed(format!("model header has {} fields, expected 7", fields.len())));
    }
    let dim: usize = parse(fields[2], "dimension")?;
    let labels: usize = parse(fields[3], "label count")?;
    let alpha: f64 = parse(fields[4], "alpha")?;
    let beta: f64 = parse(fields[5], "beta")?;
    let l1 = match fields[6] {
        "0" => false,
        "1" => true,
        other => return Err(malformed(format!("l1 flag must be 0 or 1, found {other:?}"))),
    };
    let mut raw = Vec::with_capacity(labels * dim);
    for l in 0..labels {
        let line = lines.next().ok_or(PersistError::Truncated)??;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|f| parse(f, "raw parameter"))
            .collect::<Result<_, _>>()?;
        if row.len() != dim {
            return Err(malformed(format!("label {l} has {} values, expected {dim}", row.len())));
        }
        raw.extend(row);
    }
    if let Some(extra) = lines.next() {
        if !extra?.trim().is_empty() {
            return Err(malformed("trailing data after the last label row"));
        }
    }
    Ok(LabelEmbeddingTable::from_raw(labels, dim, raw, alpha, beta, l1)?)
}

fn parse<T: std::str::FromStr>(field: &str, what: &str) -> Result<T, PersistError> {
    field
        .parse()
        .map_err(|_| malformed(format!("invalid {what} {field:?}")))
}

pub fn save_model(table: &LabelEmbeddingTable, path: &Path) -> Result<(), PersistError> {
    fs::write(path, model_to_string(table))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<LabelEmbeddingTable, PersistError> {
    read_model(io::BufReader::new(fs::File::open(path)?))
}

// --------------------------------------------------------------- indexes

#[derive(Default)]
struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    fn u32(&mut self, x: u32) {
        self.buf.extend_from_slice(&x.to_le_bytes());
    }
    fn u64(&mut self, x: u64) {
        self.buf.extend_from_slice(&x.to_le_bytes());
    }
    fn f64(&mut self, x: f64) {
        self.buf.extend_from_slice(&x.to_le_bytes());
    }
    fn f64s(&mut self, xs: &[f64]) {
        self.u64(xs.len() as u64);
        xs.iter().for_each(|&x| self.f64(x));
    }
    fn u32s(&mut self, xs: &[u32]) {
        self.u64(xs.len() as u64);
        xs.iter().for_each(|&x| self.u32(x));
    }
    fn u64s(&mut self, xs: &[usize]) {
        self.u64(xs.len() as u64);
        xs.iter().for_each(|&x| self.u64(x as u64));
    }
}

struct Decoder<'a> {
    buf: &'a [u8],
}

impl<'a> Decoder<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], PersistError> {
        if self.buf.len() < n {
            return Err(PersistError::Truncated);
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }
    fn u32(&mut self) -> Result<u32, PersistError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, PersistError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize, PersistError> {
        usize::try_from(self.u64()?).map_err(|_| malformed("value exceeds the address space"))
    }
    fn f64(&mut self) -> Result<f64, PersistError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self, elem: usize) -> Result<usize, PersistError> {
        let n = self.usize()?;
        if n.checked_mul(elem).is_none_or(|bytes| bytes > self.buf.len()) {
            return Err(PersistError::Truncated);
        }
        Ok(n)
    }
    fn f64s(&mut self) -> Result<Vec<f64>, PersistError> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn u32s(&mut self) -> Result<Vec<u32>, PersistError> {
        let n = self.len(4)?;
        (0..n).map(|_| self.u32()).collect()
    }
    fn usizes(&mut self) -> Result<Vec<usize>, PersistError> {
        let n = self.len(8)?;
        (0..n).map(|_| self.usize()).collect()
    }
}

/// Serializes `index`: magic, format version, header, payload arrays and a
/// SHA-256 trailer over everything before it. The tree itself is not stored;
/// it is rebuilt from the sorted keys on load.
pub fn index_to_bytes(index: &ILabelIndex) -> Vec<u8> {
    let mut e = Encoder::default();
    e.buf.extend_from_slice(INDEX_MAGIC);
    e.u32(INDEX_FORMAT_VERSION);
    e.u64(index.vertex_count() as u64);
    e.u64(index.dim as u64);
    e.u64(index.t_max as u64);
    e.f64(index.alpha());
    e.f64(index.beta());
    e.u64(index.fanout as u64);

    e.f64s(&index.keys);
    e.u32s(&index.ids);
    e.f64s(&index.vertex_keys);
    e.f64s(&index.mve);
    e.f64s(&index.hop);
    e.u64s(&index.degree_offsets);
    e.f64s(&index.degree);

    let km = &index.key_map;
    e.u32s(&km.label_order);
    e.f64s(&km.label_norms);
    e.f64s(&km.base_key);
    e.f64s(&km.next_key);
    e.u32s(&km.position);
    e.f64(km.max_vse_norm);
    match km.delta_min {
        Some(d) => {
            e.u32(1);
            e.f64(d);
        }
        None => {
            e.u32(0);
            e.f64(0.0);
        }
    }

    let digest = Sha256::digest(&e.buf);
    e.buf.extend_from_slice(&digest);
    e.buf
}

pub fn index_from_bytes(bytes: &[u8]) -> Result<ILabelIndex, PersistError> {
    if bytes.len() < INDEX_MAGIC.len() || &bytes[..INDEX_MAGIC.len()] != INDEX_MAGIC {
        return Err(PersistError::BadMagic { expected: "index" });
    }
    let mut d = Decoder {
        buf: &bytes[INDEX_MAGIC.len()..],
    };
    let version = d.u32()?;
    if version != INDEX_FORMAT_VERSION {
        return Err(PersistError::UnsupportedVersion {
            found: version.to_string(),
        });
    }
    if bytes.len() < INDEX_MAGIC.len() + 4 + CHECKSUM_LEN {
        return Err(PersistError::Truncated);
    }
    let (body, trailer) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    if Sha256::digest(body).as_slice() != trailer {
        return Err(PersistError::ChecksumMismatch);
    }
    let mut d = Decoder {
        buf: &body[INDEX_MAGIC.len() + 4..],
    };
    let n = d.usize()?;
    let dim = d.usize()?;
    let t_max = d.usize()?;
    let alpha = d.f64()?;
    let beta = d.f64()?;
    let fanout = d.usize()?;
    let keys = d.f64s()?;
    let ids = d.u32s()?;
    let vertex_keys = d.f64s()?;
    let mve = d.f64s()?;
    let hop = d.f64s()?;
    let degree_offsets = d.usizes()?;
    let degree = d.f64s()?;
    let label_order = d.u32s()?;
    let label_norms = d.f64s()?;
    let base_key = d.f64s()?;
    let next_key = d.f64s()?;
    let position = d.u32s()?;
    let max_vse_norm = d.f64()?;
    let has_delta = d.u32()?;
    let delta = d.f64()?;
    if !d.buf.is_empty() {
        return Err(malformed("trailing bytes before the checksum"));
    }

    let check = |ok: bool, what: &str| if ok { Ok(()) } else { Err(malformed(what.to_string())) };
    check(dim > 0 || n == 0, "zero dimension")?;
    check(t_max > 0 && fanout >= 2, "invalid t_max or fanout")?;
    check(keys.len() == n && ids.len() == n && vertex_keys.len() == n, "key arrays do not match n")?;
    check(ids.iter().all(|&v| (v as usize) < n), "vertex id out of range")?;
    check(keys.windows(2).all(|w| w[0] <= w[1]), "keys are not sorted")?;
    check(mve.len() == n * dim, "MVE array has the wrong length")?;
    check(hop.len() == n * t_max * 2 * dim, "hop synopses have the wrong length")?;
    check(
        degree_offsets.len() == n + 1
            && degree_offsets[0] == 0
            && degree_offsets.windows(2).all(|w| w[0] <= w[1] && (w[1] - w[0]) % (2 * dim.max(1)) == 0)
            && *degree_offsets.last().unwrap() == degree.len(),
        "degree synopsis offsets are inconsistent",
    )?;
    let clusters = label_order.len();
    check(
        label_norms.len() == clusters && base_key.len() == clusters && next_key.len() == clusters,
        "key map arrays disagree",
    )?;
    check(
        position
            .iter()
            .enumerate()
            .all(|(l, &p)| p == u32::MAX || label_order.get(p as usize) == Some(&(l as LabelId))),
        "key map positions are inconsistent",
    )?;
    check(has_delta <= 1, "invalid delta flag")?;

    let key_map = KeyMap {
        label_order,
        label_norms,
        base_key,
        next_key,
        position,
        max_vse_norm,
        delta_min: (has_delta == 1).then_some(delta),
        alpha,
        beta,
    };
    let mut index = ILabelIndex {
        dim,
        t_max,
        fanout,
        keys,
        ids,
        vertex_keys,
        mve,
        hop,
        degree_offsets,
        degree,
        key_map,
        tree: BPlusTree::bulk_load(&[], 2),
    };
    index.rebuild_tree();
    Ok(index)
}

/// Writes to a temporary sibling first so a failed write never leaves a
/// partial index behind.
pub fn save_index(index: &ILabelIndex, path: &Path) -> Result<(), PersistError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = Path::new(&tmp);
    fs::write(tmp, index_to_bytes(index))?;
    fs::rename(tmp, path)?;
    Ok(())
}

pub fn load_index(path: &Path) -> Result<ILabelIndex, PersistError> {
    index_from_bytes(&fs::read(path)?)
}

// ---------------------------------------------------------------- graphs

pub fn load_graph(path: &Path) -> Result<Graph, PersistError> {
    Ok(Graph::read_from(io::BufReader::new(fs::File::open(path)?))?)
}

pub fn save_graph(g: &Graph, path: &Path) -> Result<(), PersistError> {
    fs::write(path, g.to_text())?;
    Ok(())
}

/// Splits a file holding one or more graphs back to back; each graph starts
/// at its `t` header line.
pub fn parse_graph_set(text: &str) -> Result<Vec<Graph>, PersistError> {
    let mut chunks: Vec<String> = Vec::new();
    for line in text.lines() {
        let is_header = line.split_whitespace().next() == Some("t");
        if is_header || chunks.is_empty() {
            chunks.push(String::new());
        }
        let chunk = chunks.last_mut().unwrap();
        chunk.push_str(line);
        chunk.push('\n');
    }
    chunks
        .iter()
        .filter(|c| {
            c.lines()
                .any(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        })
        .map(|c| Graph::parse_str(c).map_err(PersistError::from))
        .collect()
}

pub fn graph_set_to_string(graphs: &[Graph]) -> String {
    graphs.iter().map(Graph::to_text).collect()
}

pub fn load_graph_set(path: &Path) -> Result<Vec<Graph>, PersistError> {
    parse_graph_set(&fs::read_to_string(path)?)
}

// --------------------------------------------------------------- matches

/// One `m` line per mapping (data vertices in query-vertex-id order), then
/// the summary `s <count> <filter_us> <order_us> <refine_us> <pruning_power>`.
/// With `timings` off the three time fields are written as 0.
pub fn write_matches<W: Write>(matches: &MatchSet, timings: bool, mut w: W) -> io::Result<()> {
    for m in &matches.mappings {
        write!(w, "m")?;
        for v in m {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    let t = &matches.timings;
    let us = |d: std::time::Duration| if timings { d.as_micros() } else { 0 };
    let power = matches.pruning.as_ref().map_or(0.0, |p| p.power);
    writeln!(
        w,
        "s {} {} {} {} {:.4}",
        matches.count(),
        us(t.filter),
        us(t.order),
        us(t.refine),
        power
    )
}

/// Parses the mappings of a match listing, ignoring summary lines.
pub fn parse_match_lines(text: &str) -> Result<Vec<Vec<VertexId>>, PersistError> {
    text.lines()
        .filter(|l| l.starts_with("m"))
        .map(|l| {
            l.split_whitespace()
                .skip(1)
                .map(|f| parse(f, "vertex id"))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate_synthetic, LabelDistribution};
    use crate::index::{build_index, IndexConfig};
    use crate::test_support::figure_table;

    fn sample() -> (Graph, LabelEmbeddingTable, ILabelIndex) {
        let g = generate_synthetic(400, 4, 0.25, &LabelDistribution::uniform(5), 11).unwrap();
        let t = LabelEmbeddingTable::random(5, 3, 1e5, 1.0, 11).unwrap();
        let idx = build_index(&g, &t, IndexConfig::default()).unwrap();
        (g, t, idx)
    }

    #[test]
    fn model_round_trip_is_bit_exact() {
        let (_, t, _) = sample();
        for table in [t, figure_table()] {
            let text = model_to_string(&table);
            let back = read_model(text.as_bytes()).unwrap();
            assert_eq!(back, table);
            assert_eq!(back.vle_matrix(), table.vle_matrix());
        }
    }

    #[test]
    fn model_header_errors() {
        assert!(matches!(read_model("".as_bytes()), Err(PersistError::Truncated)));
        assert!(matches!(
            read_model("other v1 2 1 1 1 0\n0 0\n".as_bytes()),
            Err(PersistError::BadMagic { .. })
        ));
        assert!(matches!(
            read_model("live-model v2 2 1 1 1 0\n0 0\n".as_bytes()),
            Err(PersistError::UnsupportedVersion { .. })
        ));
        assert!(matches!(
            read_model("live-model v1 2 2 1 1 0\n0 0\n".as_bytes()),
            Err(PersistError::Truncated)
        ));
        assert!(matches!(
            read_model("live-model v1 2 1 1 1 0\n0 0 0\n".as_bytes()),
            Err(PersistError::Malformed(_))
        ));
    }

    #[test]
    fn index_round_trip_preserves_everything() {
        let (_, _, idx) = sample();
        let bytes = index_to_bytes(&idx);
        let back = index_from_bytes(&bytes).unwrap();
        assert_eq!(back, idx);
        assert_eq!(index_to_bytes(&back), bytes);
    }

    #[test]
    fn corrupted_indexes_are_rejected() {
        let (_, _, idx) = sample();
        let bytes = index_to_bytes(&idx);
        let mut bad = bytes.clone();
        bad[0] ^= 0xff;
        assert!(matches!(index_from_bytes(&bad), Err(PersistError::BadMagic { .. })));
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(matches!(index_from_bytes(&bad), Err(PersistError::UnsupportedVersion { .. })));
        let mut bad = bytes.clone();
        bad[40] ^= 1;
        assert!(matches!(index_from_bytes(&bad), Err(PersistError::ChecksumMismatch)));
        for cut in [4, 10, 100, bytes.len() - 1] {
            assert!(index_from_bytes(&bytes[..cut]).is_err(), "cut at {cut}");
        }
    }

    #[test]
    fn save_index_leaves_no_partial_file() {
        let (_, _, idx) = sample();
        let dir = std::env::temp_dir().join(format!("live-persist-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("i.bin");
        save_index(&idx, &path).unwrap();
        assert_eq!(load_index(&path).unwrap(), idx);
        assert!(!dir.join("i.bin.partial").exists());
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn graph_sets_split_on_headers() {
        let a = Graph::from_edges(vec![0, 1], &[(0, 1)], None).unwrap();
        let b = Graph::from_edges(vec![2, 2, 0], &[(0, 1), (1, 2)], None).unwrap();
        let text = graph_set_to_string(&[a.clone(), b.clone()]);
        assert_eq!(parse_graph_set(&text).unwrap(), vec![a, b]);
        assert!(parse_graph_set("").unwrap().is_empty());
    }

    #[test]
    fn match_listing_format() {
        let m = MatchSet {
            mappings: vec![vec![3, 1], vec![1, 3]],
            timings: Default::default(),
            pruning: None,
        };
        let mut out = Vec::new();
        write_matches(&m, false, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "m 3 1\nm 1 3\ns 2 0 0 0 0.0000\n");
        assert_eq!(parse_match_lines(&text).unwrap(), m.mappings);
    }
}
