//! Run manifests: a series of linked experiment stages.
//!
//! ```toml
//! [[stage]]
//! name = "tutor-1"
//! command = "tutor"
//! args = { lookahead = 1, games = 1000 }
//!
//! [[stage]]
//! name = "final"
//! command = "tournament"
//! inputs = ["tutor-1", "m-0123456789abcdef"]
//! args = { mode = "synthesis" }
//! ```
//!
//! An input naming another stage is a data-flow edge: the stage consumes the
//! models that stage wrote. Any other input must be a model id already in
//! the store. `after` adds ordering edges that carry no data.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub command: String,
    #[serde(default)]
    pub args: BTreeMap<String, toml::Value>,
    #[serde(default)]
    pub inputs: Vec<String>,
    #[serde(default)]
    pub after: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(rename = "stage", default)]
    pub stages: Vec<Stage>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ManifestInput<'a> {
    Stage(&'a str),
    Model(&'a str),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ManifestError {
    #[error("manifest parse error: {0}")]
    Parse(String),
    #[error("manifest has no stages")]
    Empty,
    #[error("duplicate stage name {0:?}")]
    DuplicateStage(String),
    #[error("stage {stage:?} depends on unknown stage {missing:?}")]
    UnknownStage { stage: String, missing: String },
    #[error("stage {stage:?} references model {model:?} which is not in the store")]
    UnknownModel { stage: String, model: String },
    #[error("stage dependencies form a cycle through {0:?}")]
    Cycle(String),
}

impl Stage {
    pub fn classify<'a>(&self, input: &'a str, stages: &HashMap<&str, usize>) -> ManifestInput<'a> {
        if stages.contains_key(input) {
            ManifestInput::Stage(input)
        } else {
            ManifestInput::Model(input)
        }
    }
}

impl RunManifest {
    pub fn parse(text: &str) -> Result<Self, ManifestError> {
        toml::from_str(text).map_err(|e| ManifestError::Parse(e.to_string()))
    }

    fn index(&self) -> Result<HashMap<&str, usize>, ManifestError> {
        let mut idx = HashMap::new();
        for (i, s) in self.stages.iter().enumerate() {
            if idx.insert(s.name.as_str(), i).is_some() {
                return Err(ManifestError::DuplicateStage(s.name.clone()));
            }
        }
        Ok(idx)
    }

    /// Checks structure and model references, returning stage indices in an
    /// execution order. Ties keep listing order.
    pub fn validate(&self, model_exists: impl Fn(&str) -> bool) -> Result<Vec<usize>, ManifestError> {
        if self.stages.is_empty() {
            return Err(ManifestError::Empty);
        }
        let idx = self.index()?;
        let mut deps: Vec<Vec<usize>> = vec![Vec::new(); self.stages.len()];
        for (i, s) in self.stages.iter().enumerate() {
            for input in &s.inputs {
                match s.classify(input, &idx) {
                    ManifestInput::Stage(name) => deps[i].push(idx[name]),
                    ManifestInput::Model(id) => {
                        if !model_exists(id) {
                            return Err(ManifestError::UnknownModel {
                                stage: s.name.clone(),
                                model: id.to_string(),
                            });
                        }
                    }
                }
            }
            for a in &s.after {
                let &j = idx.get(a.as_str()).ok_or_else(|| ManifestError::UnknownStage {
                    stage: s.name.clone(),
                    missing: a.clone(),
                })?;
                deps[i].push(j);
            }
        }

        let mut done = vec![false; self.stages.len()];
        let mut order = Vec::with_capacity(self.stages.len());
        while order.len() < self.stages.len() {
            let next = (0..self.stages.len()).find(|&i| !done[i] && deps[i].iter().all(|&d| done[d]));
            match next {
                Some(i) => {
                    done[i] = true;
                    order.push(i);
                }
                None => {
                    let stuck = (0..self.stages.len()).find(|&i| !done[i]).expect("an unfinished stage");
                    return Err(ManifestError::Cycle(self.stages[stuck].name.clone()));
                }
            }
        }
        Ok(order)
    }

    /// Inputs of a stage split into upstream stage names and model ids.
    pub fn inputs_of<'a>(&'a self, stage: &'a Stage) -> Vec<ManifestInput<'a>> {
        let idx: HashMap<&str, usize> = self.stages.iter().enumerate().map(|(i, s)| (s.name.as_str(), i)).collect();
        stage.inputs.iter().map(|i| stage.classify(i, &idx)).collect()
    }
}
