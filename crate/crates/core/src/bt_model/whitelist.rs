use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::LeafKind;

/// Colors accepted by `ChangeColor` in the default whitelist.
pub const DEFAULT_COLORS: [&str; 5] = ["red", "green", "blue", "yellow", "white"];

#[derive(Debug, Error)]
pub enum WhitelistError {
    #[error("node `{0}` is listed as both an action and a condition")]
    OverlappingKinds(String),
    #[error("node `{0}` is listed more than once")]
    Duplicate(String),
    #[error("`{0}` is a control node and cannot be whitelisted as a leaf")]
    ReservedName(String),
    #[error("node `{node}` parameter `{key}` allows no values")]
    EmptyParamDomain { node: String, key: String },
    #[error("invalid node name `{0}`")]
    InvalidName(String),
    #[error("reading whitelist: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing whitelist: {0}")]
    Json(#[from] serde_json::Error),
}

/// Legal values of one leaf parameter.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValues {
    OneOf(Vec<String>),
    /// Serialized as the string `"free"`; any non-empty value is legal.
    Free(FreeMarker),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FreeMarker {
    Free,
}

impl ParamValues {
    pub fn free() -> Self {
        ParamValues::Free(FreeMarker::Free)
    }

    pub fn one_of<I, S>(values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ParamValues::OneOf(values.into_iter().map(Into::into).collect())
    }

    pub fn admits(&self, value: &str) -> bool {
        if value.is_empty() {
            return false;
        }
        match self {
            ParamValues::OneOf(values) => values.iter().any(|v| v == value),
            ParamValues::Free(_) => true,
        }
    }
}

/// One whitelisted leaf. Every listed parameter is required.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, ParamValues>,
}

impl NodeSpec {
    pub fn new(name: impl Into<String>) -> Self {
        NodeSpec {
            name: name.into(),
            params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, key: impl Into<String>, values: ParamValues) -> Self {
        self.params.insert(key.into(), values);
        self
    }

    /// Checks a leaf's attributes against this spec, returning one message per
    /// problem in a stable order.
    pub fn check_params<'a>(
        &self,
        params: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Vec<String> {
        let mut problems = Vec::new();
        let mut seen = BTreeSet::new();
        for (key, value) in params {
            seen.insert(key);
            match self.params.get(key) {
                None => problems.push(format!(
                    "node `{}` does not accept parameter `{key}`",
                    self.name
                )),
                Some(domain) if !domain.admits(value) => problems.push(format!(
                    "node `{}` parameter `{key}` has illegal value `{value}`",
                    self.name
                )),
                Some(_) => {}
            }
        }
        for key in self.params.keys() {
            if !seen.contains(key.as_str()) {
                problems.push(format!(
                    "node `{}` is missing required parameter `{key}`",
                    self.name
                ));
            }
        }
        problems
    }
}

/// The closed set of executable leaves.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "WhitelistFile", into = "WhitelistFile")]
pub struct NodeWhitelist {
    actions: Vec<NodeSpec>,
    conditions: Vec<NodeSpec>,
}

#[derive(Serialize, Deserialize)]
struct WhitelistFile {
    actions: Vec<NodeSpec>,
    #[serde(default)]
    conditions: Vec<NodeSpec>,
}

impl TryFrom<WhitelistFile> for NodeWhitelist {
    type Error = WhitelistError;

    fn try_from(file: WhitelistFile) -> Result<Self, Self::Error> {
        NodeWhitelist::new(file.actions, file.conditions)
    }
}

impl From<NodeWhitelist> for WhitelistFile {
    fn from(wl: NodeWhitelist) -> Self {
        WhitelistFile {
            actions: wl.actions,
            conditions: wl.conditions,
        }
    }
}

impl NodeWhitelist {
    pub fn new(actions: Vec<NodeSpec>, conditions: Vec<NodeSpec>) -> Result<Self, WhitelistError> {
        let mut action_names = BTreeSet::new();
        for spec in &actions {
            validate_spec(spec)?;
            if !action_names.insert(spec.name.as_str()) {
                return Err(WhitelistError::Duplicate(spec.name.clone()));
            }
        }
        let mut condition_names = BTreeSet::new();
        for spec in &conditions {
            validate_spec(spec)?;
            if action_names.contains(spec.name.as_str()) {
                return Err(WhitelistError::OverlappingKinds(spec.name.clone()));
            }
            if !condition_names.insert(spec.name.as_str()) {
                return Err(WhitelistError::Duplicate(spec.name.clone()));
            }
        }
        Ok(NodeWhitelist {
            actions,
            conditions,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self, WhitelistError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, WhitelistError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("whitelist serializes")
    }

    pub fn actions(&self) -> &[NodeSpec] {
        &self.actions
    }

    pub fn conditions(&self) -> &[NodeSpec] {
        &self.conditions
    }

    pub fn len(&self) -> usize {
        self.actions.len() + self.conditions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lookup(&self, name: &str) -> Option<(LeafKind, &NodeSpec)> {
        if let Some(spec) = self.actions.iter().find(|s| s.name == name) {
            return Some((LeafKind::Action, spec));
        }
        self.conditions
            .iter()
            .find(|s| s.name == name)
            .map(|spec| (LeafKind::Condition, spec))
    }

    pub fn kind_of(&self, name: &str) -> Option<LeafKind> {
        self.lookup(name).map(|(kind, _)| kind)
    }

    /// All entries, actions first, each in configured order.
    pub fn entries(&self) -> impl Iterator<Item = (LeafKind, &NodeSpec)> {
        self.actions
            .iter()
            .map(|s| (LeafKind::Action, s))
            .chain(self.conditions.iter().map(|s| (LeafKind::Condition, s)))
    }
}

fn validate_spec(spec: &NodeSpec) -> Result<(), WhitelistError> {
    if matches!(spec.name.as_str(), "Sequence" | "Fallback") {
        return Err(WhitelistError::ReservedName(spec.name.clone()));
    }
    let mut chars = spec.name.chars();
    let valid_start = chars
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
    if !valid_start || !chars.all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(WhitelistError::InvalidName(spec.name.clone()));
    }
    for (key, values) in &spec.params {
        if let ParamValues::OneOf(v) = values {
            if v.is_empty() {
                return Err(WhitelistError::EmptyParamDomain {
                    node: spec.name.clone(),
                    key: key.clone(),
                });
            }
        }
    }
    Ok(())
}

/// The stock 13-entry vocabulary of swarm primitives.
pub fn default_whitelist() -> NodeWhitelist {
    let actions = vec![
        NodeSpec::new("Wander"),
        NodeSpec::new("AvoidObstacle"),
        NodeSpec::new("ChangeColor").with_param("color", ParamValues::one_of(DEFAULT_COLORS)),
        NodeSpec::new("ApproachTarget"),
        NodeSpec::new("FormLine"),
        NodeSpec::new("AlignWithSwarm"),
        NodeSpec::new("FreezeMovement"),
        NodeSpec::new("FindGoal"),
    ];
    let conditions = vec![
        NodeSpec::new("ObstacleDetected"),
        NodeSpec::new("TargetDetected"),
        NodeSpec::new("PathClear"),
        NodeSpec::new("GoalFound"),
        NodeSpec::new("TargetReached"),
    ];
    NodeWhitelist::new(actions, conditions).expect("default whitelist is consistent")
}
