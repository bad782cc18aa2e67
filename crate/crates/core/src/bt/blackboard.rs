use std::any::{type_name, Any};
use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::NodeId;

/// Blackboard key. Keys live either in the shared namespace (data exchanged
/// between the allocation nodes) or in the private namespace of one node.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoardKey {
    Shared(String),
    Node(NodeId, String),
}

impl BoardKey {
    pub fn shared(name: impl Into<String>) -> Self {
        BoardKey::Shared(name.into())
    }

    pub fn node(id: NodeId, name: impl Into<String>) -> Self {
        BoardKey::Node(id, name.into())
    }
}

impl fmt::Display for BoardKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoardKey::Shared(name) => write!(f, "shared/{name}"),
            BoardKey::Node(id, name) => write!(f, "node{}/{name}", id.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoardError {
    #[error("blackboard entry `{0}` was never written")]
    Missing(BoardKey),
    #[error("blackboard entry `{key}` does not hold a `{expected}`")]
    TypeMismatch { key: BoardKey, expected: &'static str },
}

/// Typed key/value store used by nodes to exchange data.
///
/// Reading a key that was never written yields [`BoardError::Missing`]; there
/// is no implicit default value.
#[derive(Default)]
pub struct Blackboard {
    entries: BTreeMap<BoardKey, Box<dyn Any + Send>>,
}

impl Blackboard {
    pub fn new() -> Self {
        Self::default()
    }

    /// Writes `value`, replacing any previous entry under `key`.
    pub fn set<T: Any + Send>(&mut self, key: BoardKey, value: T) {
        self.entries.insert(key, Box::new(value));
    }

    pub fn get<T: Any>(&self, key: &BoardKey) -> Result<&T, BoardError> {
        let entry = self
            .entries
            .get(key)
            .ok_or_else(|| BoardError::Missing(key.clone()))?;
        entry
            .downcast_ref::<T>()
            .ok_or_else(|| BoardError::TypeMismatch {
                key: key.clone(),
                expected: type_name::<T>(),
            })
    }

    pub fn get_mut<T: Any>(&mut self, key: &BoardKey) -> Result<&mut T, BoardError> {
        let entry = self
            .entries
            .get_mut(key)
            .ok_or_else(|| BoardError::Missing(key.clone()))?;
        entry
            .downcast_mut::<T>()
            .ok_or_else(|| BoardError::TypeMismatch {
                key: key.clone(),
                expected: type_name::<T>(),
            })
    }

    pub fn contains(&self, key: &BoardKey) -> bool {
        self.entries.contains_key(key)
    }

    pub fn remove(&mut self, key: &BoardKey) -> bool {
        self.entries.remove(key).is_some()
    }

    pub fn keys(&self) -> impl Iterator<Item = &BoardKey> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl fmt::Debug for Blackboard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.entries.keys()).finish()
    }
}
