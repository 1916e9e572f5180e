//! Validation knowledge base: the local stand-in for a retrieval stack.
//! Read-only during a run.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationKB {
    entries: BTreeMap<String, String>,
}

impl ValidationKB {
    pub fn from_entries(entries: Vec<(String, String)>) -> Self {
        ValidationKB {
            entries: entries.into_iter().collect(),
        }
    }

    pub fn insert(&mut self, id: String, fact: String) {
        self.entries.insert(id, fact);
    }

    pub fn lookup(&self, id: &str) -> Option<&str> {
        self.entries.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&String, &String)> {
        self.entries.iter()
    }
}
