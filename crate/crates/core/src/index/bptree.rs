//! Bulk-loaded, read-only B+-tree over sorted `f64` keys.
//!
//! Leaves reference contiguous runs of the sorted key array instead of
//! copying entries, and are chained left to right for sequential scans.
//! Every node records the smallest and largest key below it so descent can
//! skip subtrees that miss the requested range.

pub const DEFAULT_FANOUT: usize = 64;

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
        next: Option<usize>,
    },
    Internal {
        children: Vec<usize>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BPlusTree {
    fanout: usize,
    nodes: Vec<Node>,
    min_key: Vec<f64>,
    max_key: Vec<f64>,
    root: Option<usize>,
    height: usize,
}

impl BPlusTree {
    /// Builds the tree bottom-up in one pass over `keys`, which must be
    /// sorted ascending.
    pub fn bulk_load(keys: &[f64], fanout: usize) -> Self {
        assert!(fanout >= 2, "fanout must be at least 2");
        debug_assert!(keys.windows(2).all(|w| w[0] <= w[1]), "keys must be sorted");
        let mut tree = Self {
            fanout,
            nodes: Vec::new(),
            min_key: Vec::new(),
            max_key: Vec::new(),
            root: None,
            height: 0,
        };
        if keys.is_empty() {
            return tree;
        }

        let mut level: Vec<usize> = Vec::with_capacity(keys.len().div_ceil(fanout));
        for start in (0..keys.len()).step_by(fanout) {
            let end = (start + fanout).min(keys.len());
            let id = tree.push(Node::Leaf { start, end, next: None }, keys[start], keys[end - 1]);
            if let Some(&prev) = level.last() {
                if let Node::Leaf { next, .. } = &mut tree.nodes[prev] {
                    *next = Some(id);
                }
            }
            level.push(id);
        }
        tree.height = 1;
        while level.len() > 1 {
            let mut parents = Vec::with_capacity(level.len().div_ceil(fanout));
            for group in level.chunks(fanout) {
                let lo = tree.min_key[group[0]];
                let hi = tree.max_key[*group.last().unwrap()];
                parents.push(tree.push(Node::Internal { children: group.to_vec() }, lo, hi));
            }
            level = parents;
            tree.height += 1;
        }
        tree.root = level.first().copied();
        tree
    }

    fn push(&mut self, node: Node, lo: f64, hi: f64) -> usize {
        self.nodes.push(node);
        self.min_key.push(lo);
        self.max_key.push(hi);
        self.nodes.len() - 1
    }

    pub fn fanout(&self) -> usize {
        self.fanout
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Descends to the first leaf that can hold a key in `[lo, hi)` and
    /// returns it together with the first position in it whose key is `>= lo`.
    fn seek(&self, keys: &[f64], lo: f64, hi: f64) -> Option<(usize, usize)> {
        let mut node = self.root?;
        if !(self.max_key[node] >= lo && self.min_key[node] < hi) {
            return None;
        }
        loop {
            match &self.nodes[node] {
                Node::Internal { children } => {
                    // children are in key order, so the first one reaching lo is the
                    // leftmost that can intersect the range
                    let child = *children.iter().find(|&&c| self.max_key[c] >= lo)?;
                    if self.min_key[child] >= hi {
                        return None;
                    }
                    node = child;
                }
                Node::Leaf { start, end, .. } => {
                    let offset = keys[*start..*end].partition_point(|&k| k < lo);
                    return Some((node, start + offset));
                }
            }
        }
    }

    /// Positions (indices into the sorted key array) of all keys in `[lo, hi)`.
    pub fn range<'a>(&'a self, keys: &'a [f64], lo: f64, hi: f64) -> RangePositions<'a> {
        let state = if lo < hi { self.seek(keys, lo, hi) } else { None };
        RangePositions {
            tree: self,
            keys,
            hi,
            state,
        }
    }
}

/// Iterator over sorted-array positions produced by [`BPlusTree::range`].
pub struct RangePositions<'a> {
    tree: &'a BPlusTree,
    keys: &'a [f64],
    hi: f64,
    state: Option<(usize, usize)>,
}

impl Iterator for RangePositions<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        loop {
            let (leaf, pos) = self.state?;
            let Node::Leaf { end, next, .. } = &self.tree.nodes[leaf] else {
                unreachable!("scan state always points at a leaf");
            };
            if pos < *end {
                if self.keys[pos] >= self.hi {
                    self.state = None;
                    return None;
                }
                self.state = Some((leaf, pos + 1));
                return Some(pos);
            }
            self.state = next.map(|n| match &self.tree.nodes[n] {
                Node::Leaf { start, .. } => (n, *start),
                Node::Internal { .. } => unreachable!("leaf chain links leaves only"),
            });
        }
    }
}
