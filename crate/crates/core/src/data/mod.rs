//! Dataset generation and CSV ingestion for the three evaluation tasks.

pub mod preflib;
mod toy;

pub use toy::gen_toy_2d;

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::encoders::{endpoint_evidence, grid_simple_path, EncodeError, GridSpec};
use crate::learn::TrainExample;
use crate::logic::State;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {msg}")]
    Schema { line: usize, msg: String },
    #[error("could not reach {want} examples within {attempts} attempts")]
    RetryBudgetExhausted { want: usize, attempts: usize },
    #[error("generated label fails the constraint (generator bug)")]
    LabelViolatesConstraint,
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Circuit(#[from] crate::circuit::CircuitError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Train/validation/test partition tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }

    fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "valid" => Some(Split::Valid),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// One example: features, binary labels, split tag, and whether the label
/// is visible during training (the toy task hides most of them).
#[derive(Debug, Clone)]
pub struct DataRow {
    pub features: Vec<f64>,
    pub labels: Vec<bool>,
    pub split: Split,
    pub labeled: bool,
}

/// In-memory dataset with fixed feature and label widths.
#[derive(Debug, Clone)]
pub struct Dataset {
    n_features: usize,
    n_labels: usize,
    rows: Vec<DataRow>,
    provenance: Option<String>,
}

impl Dataset {
    pub fn new(n_features: usize, n_labels: usize, provenance: Option<String>) -> Dataset {
        Dataset { n_features, n_labels, rows: Vec::new(), provenance }
    }

    pub fn push(&mut self, row: DataRow) {
        assert_eq!(row.features.len(), self.n_features);
        assert_eq!(row.labels.len(), self.n_labels);
        self.rows.push(row);
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn rows(&self) -> &[DataRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn provenance(&self) -> Option<&str> {
        self.provenance.as_deref()
    }

    pub fn split_len(&self, split: Split) -> usize {
        self.rows.iter().filter(|r| r.split == split).count()
    }

    /// Rows of one split as trainer examples; hidden labels become `None`.
    pub fn examples(&self, split: Split) -> Vec<TrainExample> {
        self.rows
            .iter()
            .filter(|r| r.split == split)
            .map(|r| TrainExample {
                features: r.features.clone(),
                label: r.labeled.then(|| State::new(r.labels.clone())),
            })
            .collect()
    }

    /// Serializes to CSV: header `f0..,y0..,split[,labeled]`, one row per
    /// example, floats in shortest round-trip form. A provenance comment
    /// line, when present, precedes the header. Byte-deterministic.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Some(p) = &self.provenance {
            out.push_str("# ");
            out.push_str(p);
            out.push('\n');
        }
        let with_mask = self.rows.iter().any(|r| !r.labeled);
        let mut header: Vec<String> = (0..self.n_features).map(|i| format!("f{i}")).collect();
        header.extend((0..self.n_labels).map(|i| format!("y{i}")));
        header.push("split".to_string());
        if with_mask {
            header.push("labeled".to_string());
        }
        out.push_str(&header.join(","));
        out.push('\n');
        for row in &self.rows {
            let mut fields: Vec<String> =
                row.features.iter().map(|v| format!("{v}")).collect();
            fields.extend(row.labels.iter().map(|&b| u8::from(b).to_string()));
            fields.push(row.split.as_str().to_string());
            if with_mask {
                fields.push(u8::from(row.labeled).to_string());
            }
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses the CSV format written by [`Dataset::to_csv`].
    pub fn from_csv(text: &str) -> Result<Dataset, DataError> {
        let mut lines = text.lines().enumerate().peekable();
        let provenance = match lines.peek() {
            Some((_, l)) if l.starts_with('#') => {
                let p = l.trim_start_matches('#').trim().to_string();
                lines.next();
                Some(p)
            }
            _ => None,
        };
        let (header_line, header) = lines
            .next()
            .ok_or_else(|| schema_err(1, "missing header row"))?;
        let columns: Vec<&str> = header.split(',').collect();
        let n_features = columns.iter().take_while(|c| c.starts_with('f')).count();
        let n_labels = columns[n_features..].iter().take_while(|c| c.starts_with('y')).count();
        let split_idx = n_features + n_labels;
        if columns.get(split_idx) != Some(&"split") {
            return Err(schema_err(header_line + 1, "expected a split column after the labels"));
        }
        let with_mask = match columns.len() - split_idx {
            1 => false,
            2 if columns[split_idx + 1] == "labeled" => true,
            _ => return Err(schema_err(header_line + 1, "unexpected trailing columns")),
        };
        let mut ds = Dataset::new(n_features, n_labels, provenance);
        for (lineno, line) in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != columns.len() {
                return Err(schema_err(
                    lineno + 1,
                    &format!("expected {} fields, got {}", columns.len(), fields.len()),
                ));
            }
            let features = fields[..n_features]
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
                .map_err(|e| schema_err(lineno + 1, &format!("bad feature: {e}")))?;
            let labels = fields[n_features..split_idx]
                .iter()
                .map(|s| parse_bit(s))
                .collect::<Option<Vec<bool>>>()
                .ok_or_else(|| schema_err(lineno + 1, "labels must be 0 or 1"))?;
            let split = Split::parse(fields[split_idx])
                .ok_or_else(|| schema_err(lineno + 1, "split must be train/valid/test"))?;
            let labeled = if with_mask {
                parse_bit(fields[split_idx + 1])
                    .ok_or_else(|| schema_err(lineno + 1, "labeled must be 0 or 1"))?
            } else {
                true
            };
            ds.push(DataRow { features, labels, split, labeled });
        }
        Ok(ds)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), DataError> {
        Ok(std::fs::write(path, self.to_csv())?)
    }

    pub fn load(path: &std::path::Path) -> Result<Dataset, DataError> {
        Dataset::from_csv(&std::fs::read_to_string(path)?)
    }
}

fn parse_bit(s: &str) -> Option<bool> {
    match s {
        "0" => Some(false),
        "1" => Some(true),
        _ => None,
    }
}

fn schema_err(line: usize, msg: &str) -> DataError {
    DataError::Schema { line, msg: msg.to_string() }
}

/// Assigns 60/20/20 split tags by row position.
fn positional_split(index: usize, count: usize) -> Split {
    let train_end = count * 6 / 10;
    let valid_end = count * 8 / 10;
    if index < train_end {
        Split::Train
    } else if index < valid_end {
        Split::Valid
    } else {
        Split::Test
    }
}

/// Generates shortest-path examples on `g`.
///
/// Per example: a third of the edges (rounded down) are removed uniformly at
/// random, components smaller than five nodes are discarded, a connected
/// source/destination pair is drawn from what remains, and the label is the
/// breadth-first shortest path with ties broken toward smaller node ids.
/// Features are `|V|` endpoint indicators followed by `|E|` removal
/// indicators (1 = removed); labels are `|E|` path-edge indicators.
pub fn gen_grid_dataset(g: &GridSpec, count: usize, seed: u64) -> Result<Dataset, DataError> {
    let constraint = grid_simple_path(g)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_nodes = g.n_nodes();
    let n_edges = g.n_edges();
    let remove_count = n_edges / 3;
    let provenance = format!(
        "generator=grid rows={} cols={} count={count} seed={seed} removed_edges={remove_count}",
        g.rows(),
        g.cols()
    );
    let mut ds = Dataset::new(n_nodes + n_edges, n_edges, Some(provenance));

    let mut edge_id: HashMap<(usize, usize), usize> = HashMap::new();
    for (id, &(u, v)) in g.edges().iter().enumerate() {
        edge_id.insert((u, v), id);
    }

    let max_attempts = count * 100;
    let mut attempts = 0;
    while ds.len() < count {
        attempts += 1;
        if attempts > max_attempts {
            return Err(DataError::RetryBudgetExhausted { want: count, attempts });
        }
        // Remove a fixed number of edges.
        let mut removed = vec![false; n_edges];
        for id in rand::seq::index::sample(&mut rng, n_edges, remove_count) {
            removed[id] = true;
        }
        // Adjacency over the surviving edges, neighbors in ascending order.
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
        for (id, &(u, v)) in g.edges().iter().enumerate() {
            if !removed[id] {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        for nb in &mut adj {
            nb.sort_unstable();
        }
        // Connected components; only components with at least 5 nodes may
        // contribute endpoint pairs.
        let mut comp = vec![usize::MAX; n_nodes];
        let mut comp_size = Vec::new();
        for start in 0..n_nodes {
            if comp[start] != usize::MAX {
                continue;
            }
            let id = comp_size.len();
            let mut size = 0;
            let mut stack = vec![start];
            comp[start] = id;
            while let Some(x) = stack.pop() {
                size += 1;
                for &nb in &adj[x] {
                    if comp[nb] == usize::MAX {
                        comp[nb] = id;
                        stack.push(nb);
                    }
                }
            }
            comp_size.push(size);
        }
        let mut candidates = Vec::new();
        for s in 0..n_nodes {
            if comp_size[comp[s]] < 5 {
                continue;
            }
            for t in s + 1..n_nodes {
                if comp[t] == comp[s] {
                    candidates.push((s, t));
                }
            }
        }
        if candidates.is_empty() {
            continue;
        }
        let (s, t) = candidates[rng.gen_range(0..candidates.len())];

        // BFS shortest path; FIFO order with ascending neighbors makes the
        // parent choice (and hence the label) deterministic.
        let mut parent = vec![usize::MAX; n_nodes];
        let mut dist = vec![usize::MAX; n_nodes];
        let mut queue = std::collections::VecDeque::new();
        dist[s] = 0;
        queue.push_back(s);
        while let Some(x) = queue.pop_front() {
            if x == t {
                break;
            }
            for &nb in &adj[x] {
                if dist[nb] == usize::MAX {
                    dist[nb] = dist[x] + 1;
                    parent[nb] = x;
                    queue.push_back(nb);
                }
            }
        }
        debug_assert_ne!(dist[t], usize::MAX, "candidates are connected");
        let mut labels = vec![false; n_edges];
        let mut node = t;
        while node != s {
            let prev = parent[node];
            let key = (prev.min(node), prev.max(node));
            labels[edge_id[&key]] = true;
            node = prev;
        }

        let mut features = vec![0.0; n_nodes + n_edges];
        features[s] = 1.0;
        features[t] = 1.0;
        for (id, &r) in removed.iter().enumerate() {
            if r {
                features[n_nodes + id] = 1.0;
            }
        }

        // Generation invariant: the label satisfies the conditioned
        // constraint.
        let conditioned = constraint.condition(&endpoint_evidence(g, s, t))?;
        let mut full_state = vec![false; g.universe_size()];
        full_state[s] = true;
        full_state[t] = true;
        for (id, &b) in labels.iter().enumerate() {
            full_state[n_nodes + id] = b;
        }
        if !conditioned.eval_state(&State::new(full_state)).unwrap_or(false) {
            return Err(DataError::LabelViolatesConstraint);
        }

        let split = positional_split(ds.len(), count);
        ds.push(DataRow { features, labels, split, labeled: true });
    }
    Ok(ds)
}

/// Seeded shuffle-based 60/20/20 split assignment for `count` rows.
pub fn shuffled_splits(count: usize, seed: u64) -> Vec<Split> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(&mut rng);
    let mut splits = vec![Split::Train; count];
    for (position, &row) in order.iter().enumerate() {
        splits[row] = positional_split(position, count);
    }
    splits
}
