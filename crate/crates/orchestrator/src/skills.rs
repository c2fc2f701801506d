//! Skill map: which policy realizes a learned relation.
//!
//! Trigger entries map a functional relation to its pick-style policy by
//! (predicate, object class); effect entries map a placement relation to its
//! place-style policy by (predicate, landmark class). The config file is a
//! JSON object with `triggers` and `effects` lists of
//! `{predicate, class, policy}` records.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct SkillEntry {
    predicate: String,
    class: String,
    policy: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SkillMapFile", into = "SkillMapFile")]
pub struct SkillMap {
    triggers: BTreeMap<(String, String), String>,
    effects: BTreeMap<(String, String), String>,
}

#[derive(Serialize, Deserialize)]
struct SkillMapFile {
    #[serde(default)]
    triggers: Vec<SkillEntry>,
    #[serde(default)]
    effects: Vec<SkillEntry>,
}

#[derive(Debug, Error)]
pub enum SkillMapError {
    #[error("failed to read skill map {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed skill map: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("duplicate {section} entry for ({predicate}, {class})")]
    Duplicate { section: &'static str, predicate: String, class: String },
}

impl TryFrom<SkillMapFile> for SkillMap {
    type Error = SkillMapError;

    fn try_from(file: SkillMapFile) -> Result<Self, Self::Error> {
        let mut map = SkillMap::default();
        for entry in file.triggers {
            map.insert_trigger(&entry.predicate, &entry.class, &entry.policy)?;
        }
        for entry in file.effects {
            map.insert_effect(&entry.predicate, &entry.class, &entry.policy)?;
        }
        Ok(map)
    }
}

impl From<SkillMap> for SkillMapFile {
    fn from(map: SkillMap) -> Self {
        let to_entries = |m: BTreeMap<(String, String), String>| {
            m.into_iter()
                .map(|((predicate, class), policy)| SkillEntry { predicate, class, policy })
                .collect()
        };
        SkillMapFile { triggers: to_entries(map.triggers), effects: to_entries(map.effects) }
    }
}

impl SkillMap {
    /// The scenario default: one pick per cutlery class, one place per zone.
    pub fn default_scenario() -> Self {
        let mut map = SkillMap::default();
        for (class, policy) in
            [("knife", "pick_knife"), ("fork", "pick_fork"), ("spoon", "pick_spoon")]
        {
            map.insert_trigger("holding", class, policy).unwrap();
        }
        for (predicate, policy) in
            [("left_of", "place_left"), ("right_of", "place_right"), ("inside", "place_inside")]
        {
            map.insert_effect(predicate, "plate", policy).unwrap();
        }
        map
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SkillMapError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| SkillMapError::Io { path: path.display().to_string(), source })?;
        let file: SkillMapFile = serde_json::from_str(&text)?;
        SkillMap::try_from(file)
    }

    pub fn insert_trigger(
        &mut self,
        predicate: &str,
        class: &str,
        policy: &str,
    ) -> Result<(), SkillMapError> {
        let key = (predicate.to_string(), class.to_string());
        if self.triggers.contains_key(&key) {
            return Err(SkillMapError::Duplicate {
                section: "triggers",
                predicate: predicate.into(),
                class: class.into(),
            });
        }
        self.triggers.insert(key, policy.to_string());
        Ok(())
    }

    pub fn insert_effect(
        &mut self,
        predicate: &str,
        class: &str,
        policy: &str,
    ) -> Result<(), SkillMapError> {
        let key = (predicate.to_string(), class.to_string());
        if self.effects.contains_key(&key) {
            return Err(SkillMapError::Duplicate {
                section: "effects",
                predicate: predicate.into(),
                class: class.into(),
            });
        }
        self.effects.insert(key, policy.to_string());
        Ok(())
    }

    pub fn trigger_policy(&self, predicate: &str, class: &str) -> Option<&str> {
        self.triggers.get(&(predicate.to_string(), class.to_string())).map(String::as_str)
    }

    pub fn effect_policy(&self, predicate: &str, class: &str) -> Option<&str> {
        self.effects.get(&(predicate.to_string(), class.to_string())).map(String::as_str)
    }
}
