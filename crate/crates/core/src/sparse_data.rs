//! Sparse labeled datasets: the SVMlight-style text format, the grouped
//! (common feature) format, grouping, sharding and synthetic generators.
//!
//! Instance lines look like `label id:value id:value ...`. Labels `0`/`-1`
//! map to the negative class and `1`/`+1` to the positive one. Zero-valued
//! entries are dropped on read, so every stored entry is nonzero.
//!
//! Grouped files are a sequence of blocks. Each block starts with a header
//! `G <k> id:value ...` carrying the common features, followed by exactly `k`
//! instance lines that hold only the non-common features of each sample.
//!
//! Feature id 0 is reserved by convention for a bias feature with value 1.0.
//! Nothing adds it implicitly; [`gen_synthetic`] emits it explicitly.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type FeatureId = u32;

/// Id of the always-present bias feature emitted by the generators.
pub const BIAS_ID: FeatureId = 0;

/// Sorted list of `(feature_id, value)` pairs with strictly increasing ids
/// and finite nonzero values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    entries: Vec<(FeatureId, f64)>,
}

impl SparseVector {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a vector from pairs in any order. Zero values are dropped;
    /// duplicate ids and non-finite values are rejected.
    pub fn from_pairs(mut entries: Vec<(FeatureId, f64)>) -> Result<Self> {
        entries.sort_by_key(|&(id, _)| id);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidArgument(format!("duplicate feature id {}", w[0].0)));
            }
        }
        if let Some(&(id, v)) = entries.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("feature {id} has non-finite value {v}")));
        }
        entries.retain(|&(_, v)| v != 0.0);
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(FeatureId, f64)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (FeatureId, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_id(&self) -> Option<FeatureId> {
        self.entries.last().map(|&(id, _)| id)
    }

    pub fn get(&self, id: FeatureId) -> Option<f64> {
        self.entries
            .binary_search_by_key(&id, |&(i, _)| i)
            .ok()
            .map(|k| self.entries[k].1)
    }

    /// Merges two vectors with disjoint ids.
    pub fn union(&self, other: &SparseVector) -> Result<SparseVector> {
        let mut all = Vec::with_capacity(self.len() + other.len());
        all.extend_from_slice(&self.entries);
        all.extend_from_slice(&other.entries);
        SparseVector::from_pairs(all)
    }

    /// Splits into (entries whose id is in `ids`, the rest).
    pub fn partition(&self, ids: &BTreeSet<FeatureId>) -> (SparseVector, SparseVector) {
        let (inside, outside): (Vec<_>, Vec<_>) =
            self.entries.iter().partition(|(id, _)| ids.contains(id));
        (SparseVector { entries: inside }, SparseVector { entries: outside })
    }

    fn dim_required(&self) -> usize {
        self.max_id().map_or(0, |id| id as usize + 1)
    }
}

impl fmt::Display for SparseVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, &(id, v)) in self.entries.iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{id}:{}", fmt_real(v))?;
        }
        Ok(())
    }
}

/// A labeled example. `label == true` is the positive (clicked) class.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub features: SparseVector,
    pub label: bool,
}

impl Instance {
    pub fn new(features: SparseVector, label: bool) -> Self {
        Self { features, label }
    }

    pub fn target(&self) -> f64 {
        if self.label {
            1.0
        } else {
            0.0
        }
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.label { "1" } else { "0" })?;
        if !self.features.is_empty() {
            write!(f, " {}", self.features)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub instances: Vec<Instance>,
    pub dim: usize,
}

impl Dataset {
    /// Builds a dataset with `dim = 1 + max feature id`.
    pub fn new(instances: Vec<Instance>) -> Self {
        let dim = instances
            .iter()
            .map(|i| i.features.dim_required())
            .max()
            .unwrap_or(0);
        Self { instances, dim }
    }

    /// Overrides the dimension. Fails if some feature id would fall outside.
    pub fn with_dim(mut self, dim: usize) -> Result<Self> {
        if dim < self.dim {
            return Err(Error::Dimension { id: self.dim - 1, dim });
        }
        self.dim = dim;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.instances.iter().map(|i| i.label).collect()
    }

    /// Wraps every instance in its own block with an empty common part.
    pub fn ungrouped(&self) -> GroupedDataset {
        GroupedDataset {
            blocks: self
                .instances
                .iter()
                .map(|inst| GroupedBlock {
                    common: SparseVector::empty(),
                    samples: vec![inst.clone()],
                })
                .collect(),
            dim: self.dim,
        }
    }
}

/// Samples sharing one common feature part. Sample features hold only the
/// non-common part and never reuse a common id.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedBlock {
    pub common: SparseVector,
    pub samples: Vec<Instance>,
}

impl GroupedBlock {
    pub fn new(common: SparseVector, samples: Vec<Instance>) -> Result<Self> {
        let block = Self { common, samples };
        block.validate()?;
        Ok(block)
    }

    fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::Format("block has no samples".into()));
        }
        for (k, s) in self.samples.iter().enumerate() {
            if let Some((id, _)) = s.features.iter().find(|&(id, _)| self.common.get(id).is_some()) {
                return Err(Error::Format(format!(
                    "sample {k} repeats common feature id {id}"
                )));
            }
        }
        Ok(())
    }

    fn dim_required(&self) -> usize {
        self.samples
            .iter()
            .map(|s| s.features.dim_required())
            .chain(std::iter::once(self.common.dim_required()))
            .max()
            .unwrap_or(0)
    }

    /// Full feature vectors (common plus non-common) of every sample.
    pub fn flatten(&self) -> Vec<Instance> {
        self.samples
            .iter()
            .map(|s| {
                let features = self
                    .common
                    .union(&s.features)
                    .expect("block parts are disjoint by construction");
                Instance::new(features, s.label)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroupedDataset {
    pub blocks: Vec<GroupedBlock>,
    pub dim: usize,
}

impl GroupedDataset {
    pub fn new(blocks: Vec<GroupedBlock>) -> Self {
        let dim = blocks.iter().map(GroupedBlock::dim_required).max().unwrap_or(0);
        Self { blocks, dim }
    }

    pub fn with_dim(mut self, dim: usize) -> Result<Self> {
        if dim < self.dim {
            return Err(Error::Dimension { id: self.dim - 1, dim });
        }
        self.dim = dim;
        Ok(self)
    }

    pub fn n_samples(&self) -> usize {
        self.blocks.iter().map(|b| b.samples.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.n_samples() == 0
    }

    pub fn flatten(&self) -> Dataset {
        Dataset {
            instances: self.blocks.iter().flat_map(GroupedBlock::flatten).collect(),
            dim: self.dim,
        }
    }
}

fn parse_label(tok: &str) -> Option<bool> {
    match tok {
        "1" | "+1" => Some(true),
        "0" | "-1" => Some(false),
        _ => None,
    }
}

fn parse_features<'a>(
    tokens: impl Iterator<Item = &'a str>,
    line: usize,
    text: &str,
) -> Result<SparseVector> {
    let err = |msg: String| Error::Parse {
        line,
        content: text.to_string(),
        msg,
    };
    let mut pairs = Vec::new();
    for tok in tokens {
        let (id, val) = tok
            .split_once(':')
            .ok_or_else(|| err(format!("expected id:value, got `{tok}`")))?;
        if id.starts_with('-') {
            return Err(err(format!("negative feature id `{id}`")));
        }
        let id: FeatureId = id.parse().map_err(|_| err(format!("bad feature id `{id}`")))?;
        let val: f64 = val.parse().map_err(|_| err(format!("bad value `{val}`")))?;
        if !val.is_finite() {
            return Err(err(format!("non-finite value `{val}`")));
        }
        pairs.push((id, val));
    }
    SparseVector::from_pairs(pairs).map_err(|e| match e {
        Error::InvalidArgument(msg) => err(msg),
        other => other,
    })
}

fn strip_comment(text: &str) -> &str {
    text.split_once('#').map_or(text, |(head, _)| head).trim()
}

fn parse_record(text: &str, line: usize) -> Result<Instance> {
    let body = strip_comment(text);
    let mut tokens = body.split_whitespace();
    let label_tok = tokens.next().ok_or_else(|| Error::Parse {
        line,
        content: text.to_string(),
        msg: "empty record".into(),
    })?;
    let label = parse_label(label_tok).ok_or_else(|| Error::Parse {
        line,
        content: text.to_string(),
        msg: format!("label `{label_tok}` is not binary"),
    })?;
    let features = parse_features(tokens, line, text)?;
    Ok(Instance { features, label })
}

/// Parses one instance record.
pub fn parse_line(text: &str) -> Result<Instance> {
    parse_record(text, 1)
}

fn is_skippable(text: &str) -> bool {
    let t = text.trim_start();
    t.is_empty() || t.starts_with('#')
}

/// Reads newline-delimited instance records, skipping blank and `#` lines.
pub fn load_dataset(source: impl BufRead) -> Result<Dataset> {
    let mut instances = Vec::new();
    for (k, line) in source.lines().enumerate() {
        let line = line?;
        if is_skippable(&line) {
            continue;
        }
        instances.push(parse_record(&line, k + 1)?);
    }
    Ok(Dataset::new(instances))
}

/// True when the first record of `text` is a grouped block header.
pub fn looks_grouped(text: &str) -> bool {
    text.lines()
        .find(|l| !is_skippable(l))
        .is_some_and(|l| l.trim_start().starts_with("G "))
}

/// Reads the grouped format.
pub fn load_grouped(source: impl BufRead) -> Result<GroupedDataset> {
    let mut blocks = Vec::new();
    let mut current: Option<(usize, usize, SparseVector, Vec<Instance>)> = None;

    for (k, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = k + 1;
        if is_skippable(&line) {
            continue;
        }
        match current.take() {
            None => {
                let body = strip_comment(&line);
                let mut tokens = body.split_whitespace();
                if tokens.next() != Some("G") {
                    return Err(Error::Parse {
                        line: lineno,
                        content: line.clone(),
                        msg: "expected block header `G <k> ...`".into(),
                    });
                }
                let count: usize = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .filter(|&c| c > 0)
                    .ok_or_else(|| Error::Parse {
                        line: lineno,
                        content: line.clone(),
                        msg: "block sample count must be a positive integer".into(),
                    })?;
                let common = parse_features(tokens, lineno, &line)?;
                current = Some((lineno, count, common, Vec::with_capacity(count)));
            }
            Some((header_line, count, common, mut samples)) => {
                samples.push(parse_record(&line, lineno)?);
                if samples.len() == count {
                    let block = GroupedBlock::new(common, samples).map_err(|e| {
                        Error::Format(format!("block starting at line {header_line}: {e}"))
                    })?;
                    blocks.push(block);
                } else {
                    current = Some((header_line, count, common, samples));
                }
            }
        }
    }
    if let Some((header_line, count, _, samples)) = current {
        return Err(Error::Format(format!(
            "block starting at line {header_line} declares {count} samples but only {} follow",
            samples.len()
        )));
    }
    Ok(GroupedDataset::new(blocks))
}

pub fn write_dataset(mut sink: impl Write, data: &Dataset) -> Result<()> {
    for inst in &data.instances {
        writeln!(sink, "{inst}")?;
    }
    Ok(())
}

pub fn write_grouped(mut sink: impl Write, data: &GroupedDataset) -> Result<()> {
    for block in &data.blocks {
        write!(sink, "G {}", block.samples.len())?;
        if !block.common.is_empty() {
            write!(sink, " {}", block.common)?;
        }
        writeln!(sink)?;
        for s in &block.samples {
            writeln!(sink, "{s}")?;
        }
    }
    Ok(())
}

/// Merges runs of consecutive instances whose restriction to `common_ids`
/// is identical into one block. Non-consecutive repeats stay separate, and
/// instances with an empty common part always get a block of their own.
pub fn group_by_common(data: &Dataset, common_ids: &BTreeSet<FeatureId>) -> GroupedDataset {
    let mut blocks: Vec<GroupedBlock> = Vec::new();
    for inst in &data.instances {
        let (common, rest) = inst.features.partition(common_ids);
        let sample = Instance::new(rest, inst.label);
        match blocks.last_mut() {
            Some(block) if !common.is_empty() && block.common == common => {
                block.samples.push(sample)
            }
            _ => blocks.push(GroupedBlock {
                common,
                samples: vec![sample],
            }),
        }
    }
    GroupedDataset {
        blocks,
        dim: data.dim,
    }
}

/// Splits blocks round-robin over `n_workers` shards. Blocks are never split.
pub fn shard(data: &GroupedDataset, n_workers: usize) -> Result<Vec<GroupedDataset>> {
    if n_workers == 0 {
        return Err(Error::InvalidArgument("shard count must be at least 1".into()));
    }
    let mut shards = vec![
        GroupedDataset {
            blocks: Vec::new(),
            dim: data.dim,
        };
        n_workers
    ];
    for (k, block) in data.blocks.iter().enumerate() {
        shards[k % n_workers].blocks.push(block.clone());
    }
    Ok(shards)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    /// Positive iff both coordinates have the same sign.
    Xor,
    /// Positive iff the point lies within 0.5 of the diagonal `x1 == x2`.
    Band,
}

impl std::str::FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xor" => Ok(Pattern::Xor),
            "band" => Ok(Pattern::Band),
            other => Err(Error::InvalidArgument(format!("unknown pattern `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub n: usize,
    pub noise: f64,
    pub pattern: Pattern,
    pub seed: u64,
}

impl Pattern {
    pub fn label(self, x1: f64, x2: f64) -> bool {
        match self {
            Pattern::Xor => x1.signum() * x2.signum() > 0.0 && x1 != 0.0 && x2 != 0.0,
            Pattern::Band => (x1 - x2).abs() < 0.5,
        }
    }
}

/// Two-dimensional benchmark data. Each instance carries the bias feature
/// (id 0, value 1.0) and coordinates at ids 1 and 2, drawn uniformly from
/// [-1, 1]. Labels follow the pattern and are flipped with probability
/// `noise`.
pub fn gen_synthetic(spec: &SynthSpec) -> Result<Dataset> {
    if spec.n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&spec.noise) {
        return Err(Error::InvalidArgument(format!(
            "noise must lie in [0, 1), got {}",
            spec.noise
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let instances = (0..spec.n)
        .map(|_| {
            let x1: f64 = rng.gen_range(-1.0..=1.0);
            let x2: f64 = rng.gen_range(-1.0..=1.0);
            let flip = rng.gen::<f64>() < spec.noise;
            let label = spec.pattern.label(x1, x2) ^ flip;
            let features = SparseVector::from_pairs(vec![(BIAS_ID, 1.0), (1, x1), (2, x2)])
                .expect("generated entries are finite and distinct");
            Instance::new(features, label)
        })
        .collect();
    Ok(Dataset::new(instances).with_dim(3).expect("dim 3 covers ids 0..=2"))
}

/// Shortest decimal that reads back to the same `f64`.
pub(crate) fn fmt_real(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}
