//! Undirected vertex-labeled graphs and their text format.
//!
//! The same [`Graph`] type holds both data graphs and query graphs. Adjacency
//! is stored in compressed form with every neighbor list sorted, so edge
//! lookups are binary searches.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use thiserror::Error;

pub type VertexId = u32;
pub type LabelId = u32;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: self-loop on vertex {vertex}")]
    SelfLoop { line: usize, vertex: VertexId },
    #[error("duplicate edge ({u}, {v})")]
    DuplicateEdge { u: VertexId, v: VertexId },
    #[error("vertex {vertex} declares degree {declared} but has {actual} incident edges")]
    DegreeMismatch {
        vertex: VertexId,
        declared: usize,
        actual: usize,
    },
    #[error("header declares {declared} edges but {actual} were given")]
    EdgeCountMismatch { declared: usize, actual: usize },
    #[error("vertex {vertex} out of range for a graph of {count} vertices")]
    VertexOutOfRange { vertex: u64, count: usize },
    #[error("vertex {vertex} has label {label} outside the alphabet of size {alphabet}")]
    LabelOutOfRange {
        vertex: VertexId,
        label: LabelId,
        alphabet: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("query generation gave up after {attempts} attempts: {reason}")]
    RetriesExhausted { attempts: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// An immutable undirected vertex-labeled graph without self-loops or
/// parallel edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    labels: Vec<LabelId>,
    offsets: Vec<usize>,
    neighbors: Vec<VertexId>,
    alphabet: usize,
}

impl Graph {
    /// Builds a graph from a label per vertex and an undirected edge list.
    ///
    /// `alphabet` fixes the label alphabet size; when `None` it is one past
    /// the largest label in use.
    pub fn from_edges(
        labels: Vec<LabelId>,
        edges: &[(VertexId, VertexId)],
        alphabet: Option<usize>,
    ) -> Result<Self, GraphError> {
        let n = labels.len();
        if n > VertexId::MAX as usize {
            return Err(GraphError::InvalidParameter(format!(
                "{n} vertices exceed the supported maximum"
            )));
        }
        let alphabet = match alphabet {
            Some(a) => a,
            None => labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0),
        };
        if let Some((v, &label)) = labels
            .iter()
            .enumerate()
            .find(|(_, &l)| l as usize >= alphabet)
        {
            return Err(GraphError::LabelOutOfRange {
                vertex: v as VertexId,
                label,
                alphabet,
            });
        }

        let mut degree = vec![0usize; n];
        for &(u, v) in edges {
            for w in [u, v] {
                if w as usize >= n {
                    return Err(GraphError::VertexOutOfRange {
                        vertex: w as u64,
                        count: n,
                    });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop { line: 0, vertex: u });
            }
            degree[u as usize] += 1;
            degree[v as usize] += 1;
        }

        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut neighbors = vec![0; offsets[n]];
        for &(u, v) in edges {
            neighbors[fill[u as usize]] = v;
            fill[u as usize] += 1;
            neighbors[fill[v as usize]] = u;
            fill[v as usize] += 1;
        }
        for v in 0..n {
            let list = &mut neighbors[offsets[v]..offsets[v + 1]];
            list.sort_unstable();
            if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
                let (a, b) = (v as VertexId, w[0]);
                return Err(GraphError::DuplicateEdge {
                    u: a.min(b),
                    v: a.max(b),
                });
            }
        }

        Ok(Self {
            labels,
            offsets,
            neighbors,
            alphabet,
        })
    }

    pub fn empty() -> Self {
        Self {
            labels: Vec::new(),
            offsets: vec![0],
            neighbors: Vec::new(),
            alphabet: 0,
        }
    }

    #[inline]
    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn label(&self, v: VertexId) -> LabelId {
        self.labels[v as usize]
    }

    pub fn labels(&self) -> &[LabelId] {
        &self.labels
    }

    pub fn label_alphabet_size(&self) -> usize {
        self.alphabet
    }

    #[inline]
    pub fn neighbors(&self, v: VertexId) -> &[VertexId] {
        let v = v as usize;
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: VertexId) -> usize {
        let v = v as usize;
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.vertex_count() as VertexId)
            .map(|v| self.degree(v))
            .max()
            .unwrap_or(0)
    }

    #[inline]
    pub fn has_edge(&self, u: VertexId, v: VertexId) -> bool {
        let (a, b) = if self.degree(u) <= self.degree(v) {
            (u, v)
        } else {
            (v, u)
        };
        self.neighbors(a).binary_search(&b).is_ok()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> {
        0..self.vertex_count() as VertexId
    }

    /// Every undirected edge once, as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        self.vertices().flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .filter(move |&&v| v > u)
                .map(move |&v| (u, v))
        })
    }

    /// The labels that occur on at least one vertex, ascending.
    pub fn labels_in_use(&self) -> Vec<LabelId> {
        let mut seen = vec![false; self.alphabet];
        for &l in &self.labels {
            seen[l as usize] = true;
        }
        (0..self.alphabet as LabelId)
            .filter(|&l| seen[l as usize])
            .collect()
    }

    /// All vertices within `t` hops of `v`, `v` included, sorted by id.
    pub fn khop_neighborhood(&self, v: VertexId, t: usize) -> Vec<VertexId> {
        let mut dist = std::collections::HashMap::new();
        dist.insert(v, 0usize);
        let mut queue = VecDeque::from([v]);
        while let Some(u) = queue.pop_front() {
            let du = dist[&u];
            if du == t {
                continue;
            }
            for &w in self.neighbors(u) {
                if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(w) {
                    e.insert(du + 1);
                    queue.push_back(w);
                }
            }
        }
        let mut out: Vec<_> = dist.into_keys().collect();
        out.sort_unstable();
        out
    }

    pub fn is_connected(&self) -> bool {
        if self.vertex_count() <= 1 {
            return true;
        }
        let mut seen = vec![false; self.vertex_count()];
        let mut stack = vec![0 as VertexId];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &w in self.neighbors(u) {
                if !seen[w as usize] {
                    seen[w as usize] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.vertex_count()
    }

    /// Parses the `t`/`v`/`e` text format.
    ///
    /// Blank lines and lines starting with `#` are ignored. Vertex lines must
    /// appear in id order; edge lines may list either endpoint first.
    pub fn read_from<R: BufRead>(reader: R) -> Result<Self, GraphError> {
        Self::read_with_alphabet(reader, None)
    }

    pub fn read_with_alphabet<R: BufRead>(
        reader: R,
        alphabet: Option<usize>,
    ) -> Result<Self, GraphError> {
        let mut header: Option<(usize, usize)> = None;
        let mut labels = Vec::new();
        let mut declared_degree = Vec::new();
        let mut edges = Vec::new();
        let mut edge_lines = Vec::new();

        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut fields = trimmed.split_whitespace();
            let tag = fields.next().unwrap();
            let nums: Vec<u64> = fields
                .map(|f| {
                    f.parse::<u64>().map_err(|_| GraphError::Parse {
                        line: line_no,
                        message: format!("expected a non-negative integer, found {f:?}"),
                    })
                })
                .collect::<Result<_, _>>()?;
            let expect = |count: usize| {
                if nums.len() == count {
                    Ok(())
                } else {
                    Err(GraphError::Parse {
                        line: line_no,
                        message: format!(
                            "'{tag}' line takes {count} fields, found {}",
                            nums.len()
                        ),
                    })
                }
            };
            match tag {
                "t" => {
                    expect(2)?;
                    if header.is_some() {
                        return Err(GraphError::Parse {
                            line: line_no,
                            message: "duplicate header".into(),
                        });
                    }
                    let n = nums[0] as usize;
                    if n > VertexId::MAX as usize {
                        return Err(GraphError::Parse {
                            line: line_no,
                            message: format!("vertex count {n} is too large"),
                        });
                    }
                    header = Some((n, nums[1] as usize));
                    labels.reserve(n);
                    declared_degree.reserve(n);
                }
                "v" => {
                    expect(3)?;
                    let (n, _) = header.ok_or_else(|| missing_header(line_no))?;
                    if nums[0] != labels.len() as u64 {
                        return Err(GraphError::Parse {
                            line: line_no,
                            message: format!(
                                "expected vertex {} next, found {}",
                                labels.len(),
                                nums[0]
                            ),
                        });
                    }
                    if labels.len() >= n {
                        return Err(GraphError::VertexOutOfRange {
                            vertex: nums[0],
                            count: n,
                        });
                    }
                    let label = LabelId::try_from(nums[1]).map_err(|_| GraphError::Parse {
                        line: line_no,
                        message: format!("label {} is too large", nums[1]),
                    })?;
                    labels.push(label);
                    declared_degree.push(nums[2] as usize);
                }
                "e" => {
                    expect(2)?;
                    let (n, _) = header.ok_or_else(|| missing_header(line_no))?;
                    for &w in &nums {
                        if w >= n as u64 {
                            return Err(GraphError::VertexOutOfRange {
                                vertex: w,
                                count: n,
                            });
                        }
                    }
                    let (u, v) = (nums[0] as VertexId, nums[1] as VertexId);
                    if u == v {
                        return Err(GraphError::SelfLoop {
                            line: line_no,
                            vertex: u,
                        });
                    }
                    edges.push((u.min(v), u.max(v)));
                    edge_lines.push(line_no);
                }
                other => {
                    return Err(GraphError::Parse {
                        line: line_no,
                        message: format!("unknown record type {other:?}"),
                    })
                }
            }
        }

        let (n, m) = header.ok_or_else(|| missing_header(0))?;
        if labels.len() != n {
            return Err(GraphError::Parse {
                line: 0,
                message: format!("header declares {n} vertices, found {}", labels.len()),
            });
        }
        if edges.len() != m {
            return Err(GraphError::EdgeCountMismatch {
                declared: m,
                actual: edges.len(),
            });
        }
        let graph = Self::from_edges(labels, &edges, alphabet)?;
        for v in graph.vertices() {
            let declared = declared_degree[v as usize];
            if graph.degree(v) != declared {
                return Err(GraphError::DegreeMismatch {
                    vertex: v,
                    declared,
                    actual: graph.degree(v),
                });
            }
        }
        Ok(graph)
    }

    pub fn parse_str(text: &str) -> Result<Self, GraphError> {
        Self::read_from(text.as_bytes())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t {} {}", self.vertex_count(), self.edge_count())?;
        for v in self.vertices() {
            writeln!(w, "v {} {} {}", v, self.label(v), self.degree(v))?;
        }
        for (u, v) in self.edges() {
            writeln!(w, "e {u} {v}")?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "t {} {}", self.vertex_count(), self.edge_count());
        for v in self.vertices() {
            let _ = writeln!(out, "v {} {} {}", v, self.label(v), self.degree(v));
        }
        for (u, v) in self.edges() {
            let _ = writeln!(out, "e {u} {v}");
        }
        out
    }
}

fn missing_header(line: usize) -> GraphError {
    GraphError::Parse {
        line,
        message: "missing 't <vertices> <edges>' header".into(),
    }
}
