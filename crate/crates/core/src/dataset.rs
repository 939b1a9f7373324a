//! Node-classification datasets and the `GNNDS1` binary container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "GNNDS1"                         6 bytes
//! num_nodes, num_features,
//! num_classes, num_edges           u32 each
//! flags                            u8   (bit 0: feature names present)
//! name                             u32 length + UTF-8
//! features                         num_nodes·num_features f32, row-major
//! edges                            num_edges × (u32 u, u32 v), u < v
//! labels                           num_nodes × u16 (0xFFFF = unlabeled)
//! train, val, test masks           ceil(num_nodes/8) bytes each, LSB first
//! class names                      num_classes × (u32 length + UTF-8)
//! feature names (if flag)          num_features × (u32 length + UTF-8)
//! ```

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::matrix::Matrix;

pub const DATASET_MAGIC: &[u8; 6] = b"GNNDS1";
/// Label value of nodes outside every split.
pub const UNLABELED: u16 = u16::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct GraphDataset {
    pub name: String,
    pub num_classes: usize,
    pub features: Matrix<f32>,
    /// Undirected edges, each stored once as `(u, v)` with `u < v`, sorted.
    pub edges: Vec<(usize, usize)>,
    pub labels: Vec<u16>,
    pub train_mask: Vec<bool>,
    pub val_mask: Vec<bool>,
    pub test_mask: Vec<bool>,
    pub class_names: Vec<String>,
    pub feature_names: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitKind {
    PlanetoidFile,
    RandomPerClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub kind: SplitKind,
    pub train_per_class: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { kind: SplitKind::RandomPerClass, train_per_class: 20, val_size: 500, test_size: 1000, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl GraphDataset {
    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn label(&self, node: usize) -> Option<usize> {
        match self.labels.get(node) {
            Some(&l) if l != UNLABELED => Some(l as usize),
            _ => None,
        }
    }

    pub fn mask(&self, split: Split) -> &[bool] {
        match split {
            Split::Train => &self.train_mask,
            Split::Val => &self.val_mask,
            Split::Test => &self.test_mask,
        }
    }

    pub fn class_name(&self, class: usize) -> &str {
        self.class_names.get(class).map_or("?", String::as_str)
    }

    /// Sorted neighbor lists built from the canonical edge list.
    pub fn neighbor_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_nodes()];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }

    /// Checks every invariant of the type.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_nodes();
        if self.labels.len() != n || self.train_mask.len() != n || self.val_mask.len() != n || self.test_mask.len() != n {
            return Err(Error::ShapeMismatch(format!("per-node arrays must have {n} entries")));
        }
        if self.class_names.len() != self.num_classes {
            return Err(Error::ShapeMismatch(format!(
                "{} class names for {} classes",
                self.class_names.len(),
                self.num_classes
            )));
        }
        if let Some(f) = &self.feature_names {
            if f.len() != self.num_features() {
                return Err(Error::ShapeMismatch(format!("{} feature names for {} features", f.len(), self.num_features())));
            }
        }
        let mut prev: Option<(usize, usize)> = None;
        for &(u, v) in &self.edges {
            for x in [u, v] {
                if x >= n {
                    return Err(Error::IndexOutOfRange { node: x as u64, num_nodes: n, offset: 0 });
                }
            }
            if u >= v {
                return Err(Error::Malformed { offset: 0, reason: format!("edge ({u}, {v}) is not canonical (u < v)") });
            }
            if prev.is_some_and(|p| p >= (u, v)) {
                return Err(Error::Malformed { offset: 0, reason: format!("edge ({u}, {v}) duplicated or out of order") });
            }
            prev = Some((u, v));
        }
        check_masks(self)?;
        if !self.features.is_finite() {
            return Err(Error::Malformed { offset: 0, reason: "non-finite feature value".into() });
        }
        Ok(())
    }
}

fn check_masks(ds: &GraphDataset) -> Result<()> {
    for i in 0..ds.num_nodes() {
        let count = ds.train_mask[i] as u8 + ds.val_mask[i] as u8 + ds.test_mask[i] as u8;
        if count > 1 {
            return Err(Error::OverlappingMasks { node: i });
        }
        let l = ds.labels[i];
        if l != UNLABELED && l as usize >= ds.num_classes {
            return Err(Error::Malformed { offset: 0, reason: format!("node {i} has label {l} >= {}", ds.num_classes) });
        }
        if count == 1 && l == UNLABELED {
            return Err(Error::Malformed { offset: 0, reason: format!("split node {i} is unlabeled") });
        }
    }
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Truncated { offset: self.pos, needed: n - (self.buf.len() - self.pos), what });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn string(&mut self, what: &'static str) -> Result<String> {
        let len = self.u32(what)? as usize;
        let at = self.pos;
        let bytes = self.take(len, what)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::Malformed { offset: at, reason: format!("{what} is not valid UTF-8") })
    }

    fn bits(&mut self, n: usize, what: &'static str) -> Result<Vec<bool>> {
        let bytes = self.take(n.div_ceil(8), what)?;
        Ok((0..n).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect())
    }
}

/// Parses and validates a container held in memory.
pub fn parse_dataset(buf: &[u8]) -> Result<GraphDataset> {
    if buf.len() < DATASET_MAGIC.len() || &buf[..DATASET_MAGIC.len()] != DATASET_MAGIC {
        return Err(Error::BadMagic { expected: "GNNDS1" });
    }
    let mut r = Reader { buf, pos: DATASET_MAGIC.len() };
    let num_nodes = r.u32("header")? as usize;
    let num_features = r.u32("header")? as usize;
    let num_classes = r.u32("header")? as usize;
    let num_edges = r.u32("header")? as usize;
    let flags = r.u8("header")?;
    let name = r.string("name")?;

    let raw = r.take(num_nodes * num_features * 4, "features")?;
    let feats: Vec<f32> = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    let features = Matrix::from_vec(num_nodes, num_features, feats)?;

    let mut edges = Vec::with_capacity(num_edges);
    let mut seen = BTreeSet::new();
    for _ in 0..num_edges {
        let at = r.pos;
        let u = r.u32("edges")?;
        let v = r.u32("edges")?;
        for x in [u, v] {
            if x as usize >= num_nodes {
                return Err(Error::IndexOutOfRange { node: x as u64, num_nodes, offset: at });
            }
        }
        if u >= v {
            return Err(Error::Malformed { offset: at, reason: format!("edge ({u}, {v}) is not canonical (u < v)") });
        }
        if !seen.insert((u, v)) {
            return Err(Error::Malformed { offset: at, reason: format!("duplicate edge ({u}, {v})") });
        }
        edges.push((u as usize, v as usize));
    }
    edges.sort_unstable();

    let mut labels = Vec::with_capacity(num_nodes);
    for _ in 0..num_nodes {
        labels.push(r.u16("labels")?);
    }
    let train_mask = r.bits(num_nodes, "train mask")?;
    let val_mask = r.bits(num_nodes, "val mask")?;
    let test_mask = r.bits(num_nodes, "test mask")?;
    let class_names = (0..num_classes).map(|_| r.string("class names")).collect::<Result<Vec<_>>>()?;
    let feature_names = if flags & 1 == 1 {
        Some((0..num_features).map(|_| r.string("feature names")).collect::<Result<Vec<_>>>()?)
    } else {
        None
    };
    if r.pos != buf.len() {
        return Err(Error::Malformed { offset: r.pos, reason: format!("{} trailing bytes", buf.len() - r.pos) });
    }
    let ds = GraphDataset {
        name,
        num_classes,
        features,
        edges,
        labels,
        train_mask,
        val_mask,
        test_mask,
        class_names,
        feature_names,
    };
    check_masks(&ds)?;
    if !ds.features.is_finite() {
        return Err(Error::Malformed { offset: 0, reason: "non-finite feature value".into() });
    }
    Ok(ds)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<GraphDataset> {
    let path = path.as_ref();
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&buf)
}

/// Serializes a validated dataset to the container layout.
pub fn encode_dataset(ds: &GraphDataset) -> Result<Vec<u8>> {
    ds.validate()?;
    let n = ds.num_nodes();
    let mut out = Vec::with_capacity(64 + n * ds.num_features() * 4 + ds.edges.len() * 8 + n * 2);
    out.extend_from_slice(DATASET_MAGIC);
    for v in [n, ds.num_features(), ds.num_classes, ds.edges.len()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.push(ds.feature_names.is_some() as u8);
    put_string(&mut out, &ds.name);
    for &x in ds.features.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    for &(u, v) in &ds.edges {
        out.extend_from_slice(&(u as u32).to_le_bytes());
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for &l in &ds.labels {
        out.extend_from_slice(&l.to_le_bytes());
    }
    for mask in [&ds.train_mask, &ds.val_mask, &ds.test_mask] {
        let mut bytes = vec![0u8; n.div_ceil(8)];
        for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
            bytes[i / 8] |= 1 << (i % 8);
        }
        out.extend_from_slice(&bytes);
    }
    for s in &ds.class_names {
        put_string(&mut out, s);
    }
    if let Some(names) = &ds.feature_names {
        for s in names {
            put_string(&mut out, s);
        }
    }
    Ok(out)
}

fn put_string(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

pub fn export_dataset(ds: &GraphDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_dataset(ds)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Returns a copy of `ds` with fresh seeded masks: `train_per_class` nodes of
/// every class, then `val_size` and `test_size` nodes drawn from the rest.
pub fn make_random_split(ds: &GraphDataset, spec: &SplitSpec) -> Result<GraphDataset> {
    if spec.kind != SplitKind::RandomPerClass {
        return Err(Error::InvalidConfig("planetoid-file splits are read from the container, not generated".into()));
    }
    let n = ds.num_nodes();
    let needed = spec.train_per_class * ds.num_classes + spec.val_size + spec.test_size;
    if needed > n {
        return Err(Error::InvalidConfig(format!("split needs {needed} nodes, dataset has {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = vec![false; n];
    for class in 0..ds.num_classes {
        let mut members: Vec<usize> = (0..n).filter(|&i| ds.label(i) == Some(class)).collect();
        if members.len() < spec.train_per_class {
            return Err(Error::InsufficientClassPopulation {
                class,
                name: ds.class_name(class).to_string(),
                available: members.len(),
                required: spec.train_per_class,
            });
        }
        members.shuffle(&mut rng);
        for &i in &members[..spec.train_per_class] {
            train[i] = true;
        }
    }
    let mut rest: Vec<usize> = (0..n).filter(|&i| !train[i] && ds.label(i).is_some()).collect();
    if rest.len() < spec.val_size + spec.test_size {
        return Err(Error::InvalidConfig(format!(
            "only {} labeled nodes left for {} validation and {} test nodes",
            rest.len(),
            spec.val_size,
            spec.test_size
        )));
    }
    rest.shuffle(&mut rng);
    let mut val = vec![false; n];
    let mut test = vec![false; n];
    for &i in &rest[..spec.val_size] {
        val[i] = true;
    }
    for &i in &rest[spec.val_size..spec.val_size + spec.test_size] {
        test[i] = true;
    }
    Ok(GraphDataset { train_mask: train, val_mask: val, test_mask: test, ..ds.clone() })
}

/// Canonicalizes an arbitrary undirected edge list: drops self-loops and
/// duplicates, orders each pair `u < v`, sorts.
pub fn canonical_edges(edges: impl IntoIterator<Item = (usize, usize)>) -> Vec<(usize, usize)> {
    let set: BTreeSet<(usize, usize)> =
        edges.into_iter().filter(|(u, v)| u != v).map(|(u, v)| (u.min(v), u.max(v))).collect();
    set.into_iter().collect()
}
