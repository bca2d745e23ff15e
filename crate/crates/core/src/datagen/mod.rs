//! Synthetic instruction/behavior-tree corpora built from a template bank.
//!
//! Record `i` draws everything from its own ChaCha8 stream (`seed`, stream
//! `i`), so any index range can be generated independently and the output
//! does not depend on how generation is partitioned.

mod notation;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bt_model::{parse_document, serialize_tree, BehaviorTree, NodeWhitelist};

pub use notation::parse_tree;

pub const DEFAULT_BANK_JSON: &str = include_str!("../../templates/default_bank.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Template {
    /// Primary behavior this template illustrates; must be a leaf of `tree`.
    pub behavior: String,
    /// Tree in the compact notation, may contain `{slot}` placeholders.
    pub tree: String,
    pub phrasings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemplateBank {
    pub version: u32,
    pub slots: BTreeMap<String, Vec<String>>,
    pub templates: Vec<Template>,
}

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("template bank: {0}")]
    Bank(String),
    #[error("weights: {0}")]
    Weights(String),
    #[error("corpus size must be at least 1")]
    EmptyCorpus,
    #[error("reading {path}: {message}")]
    Read { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn fill(text: &str, values: &BTreeMap<&str, &str>) -> String {
    let mut out = text.to_string();
    for (k, v) in values {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

impl TemplateBank {
    pub fn default_bank() -> Self {
        serde_json::from_str(DEFAULT_BANK_JSON).expect("bundled bank parses")
    }

    pub fn from_json_str(text: &str) -> Result<Self, DatagenError> {
        serde_json::from_str(text).map_err(|e| DatagenError::Bank(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self, DatagenError> {
        let text = std::fs::read_to_string(path).map_err(|e| DatagenError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json_str(&text)
    }

    /// Distinct behaviors, sorted.
    pub fn behaviors(&self) -> Vec<String> {
        self.templates
            .iter()
            .map(|t| t.behavior.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Every template must yield a valid tree containing its behavior for
    /// every value of every slot, and have at least one phrasing.
    pub fn validate(&self, whitelist: &NodeWhitelist) -> Result<(), DatagenError> {
        if self.templates.is_empty() {
            return Err(DatagenError::Bank("no templates".into()));
        }
        for (name, values) in &self.slots {
            if values.is_empty() {
                return Err(DatagenError::Bank(format!("slot `{name}` has no values")));
            }
        }
        let first: BTreeMap<&str, &str> = self.slots.iter().map(|(k, v)| (k.as_str(), v[0].as_str())).collect();
        for (i, t) in self.templates.iter().enumerate() {
            let ctx = |m: String| DatagenError::Bank(format!("template {i} ({}): {m}", t.behavior));
            if t.phrasings.is_empty() {
                return Err(ctx("no phrasings".into()));
            }
            for (slot, values) in &self.slots {
                if !t.tree.contains(&format!("{{{slot}}}")) {
                    continue;
                }
                for v in values {
                    let mut assignment = first.clone();
                    assignment.insert(slot, v);
                    self.realize(t, &assignment, whitelist).map_err(ctx)?;
                }
            }
            let tree = self.realize(t, &first, whitelist).map_err(ctx)?;
            if !tree.leaf_names().contains(&t.behavior.as_str()) {
                return Err(ctx("behavior is not a leaf of the tree".into()));
            }
            for p in &t.phrasings {
                let leftover = fill(p, &first);
                if leftover.contains('{') {
                    return Err(ctx(format!("unknown slot in phrasing `{p}`")));
                }
            }
        }
        Ok(())
    }

    fn realize(
        &self,
        t: &Template,
        values: &BTreeMap<&str, &str>,
        whitelist: &NodeWhitelist,
    ) -> Result<BehaviorTree, String> {
        let root = parse_tree(&fill(&t.tree, values), whitelist)?;
        let tree = BehaviorTree::new(root);
        serialize_tree(&tree, whitelist).map_err(|e| e.to_string())?;
        Ok(tree)
    }
}

/// Sampling weight per behavior; behaviors left out get weight 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BehaviorWeights(pub BTreeMap<String, f64>);

impl BehaviorWeights {
    pub fn uniform(bank: &TemplateBank) -> Self {
        BehaviorWeights(bank.behaviors().into_iter().map(|b| (b, 1.0)).collect())
    }

    /// Weights normalised to sum to one.
    pub fn normalized(&self) -> BTreeMap<String, f64> {
        let total: f64 = self.0.values().sum();
        self.0.iter().map(|(k, v)| (k.clone(), v / total)).collect()
    }

    fn check(&self, bank: &TemplateBank) -> Result<(), DatagenError> {
        let known = bank.behaviors();
        for (name, w) in &self.0 {
            if !known.contains(name) {
                return Err(DatagenError::Weights(format!("no template for behavior `{name}`")));
            }
            if !(w.is_finite() && *w >= 0.0) {
                return Err(DatagenError::Weights(format!("weight for `{name}` must be a finite non-negative number")));
            }
        }
        if !self.0.values().any(|w| *w > 0.0) {
            return Err(DatagenError::Weights("at least one weight must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub instruction: String,
    pub reference_xml: String,
    pub behavior: String,
}

pub fn generate_corpus(
    n: usize,
    seed: u64,
    bank: &TemplateBank,
    weights: &BehaviorWeights,
    whitelist: &NodeWhitelist,
) -> Result<Vec<CorpusRecord>, DatagenError> {
    if n == 0 {
        return Err(DatagenError::EmptyCorpus);
    }
    bank.validate(whitelist)?;
    weights.check(bank)?;
    let behaviors: Vec<(&String, f64)> = weights.0.iter().map(|(k, v)| (k, *v)).collect();
    let dist = WeightedIndex::new(behaviors.iter().map(|(_, w)| *w)).map_err(|e| DatagenError::Weights(e.to_string()))?;
    let by_behavior: BTreeMap<&str, Vec<&Template>> = bank.templates.iter().fold(BTreeMap::new(), |mut m, t| {
        m.entry(t.behavior.as_str()).or_insert_with(Vec::new).push(t);
        m
    });
    let width = n.to_string().len().max(5);

    (0..n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let behavior = behaviors[dist.sample(&mut rng)].0;
            let options = &by_behavior[behavior.as_str()];
            let template = options[rng.random_range(0..options.len())];
            let phrasing = &template.phrasings[rng.random_range(0..template.phrasings.len())];
            let values: BTreeMap<&str, &str> = bank
                .slots
                .iter()
                .map(|(k, v)| (k.as_str(), v[rng.random_range(0..v.len())].as_str()))
                .collect();
            let tree = bank
                .realize(template, &values, whitelist)
                .map_err(DatagenError::Bank)?;
            let reference_xml = serialize_tree(&tree, whitelist).map_err(|e| DatagenError::Bank(e.to_string()))?;
            Ok(CorpusRecord {
                id: format!("syn-{i:0width$}"),
                instruction: capitalize(&fill(phrasing, &values)),
                reference_xml,
                behavior: behavior.clone(),
            })
        })
        .collect()
}

pub fn write_jsonl(records: &[CorpusRecord], mut out: impl Write) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Occurrences of each leaf name across all reference trees.
pub fn behavior_histogram(records: &[CorpusRecord], whitelist: &NodeWhitelist) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for r in records {
        if let Some(tree) = parse_document(&r.reference_xml, whitelist).tree {
            for name in tree.leaf_names() {
                *counts.entry(name.to_string()).or_insert(0) += 1;
            }
        }
    }
    counts
}

/// Share of records per sampled primary behavior.
pub fn behavior_frequencies(records: &[CorpusRecord]) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for r in records {
        *counts.entry(r.behavior.clone()).or_insert(0) += 1;
    }
    let n = records.len().max(1) as f64;
    counts.into_iter().map(|(k, c)| (k, c as f64 / n)).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub validation: Vec<T>,
    pub test: Vec<T>,
}

/// Seeded 80/10/10 shuffle split; the test part takes the remainder.
pub fn split<T: Clone>(items: &[T], seed: u64) -> Split<T> {
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = items.len() * 8 / 10;
    let n_val = items.len() / 10;
    let pick = |r: &[usize]| r.iter().map(|&i| items[i].clone()).collect();
    Split {
        train: pick(&idx[..n_train]),
        validation: pick(&idx[n_train..n_train + n_val]),
        test: pick(&idx[n_train + n_val..]),
    }
}
