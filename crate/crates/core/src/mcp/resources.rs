use std::collections::BTreeMap;
use std::sync::RwLock;

use super::{ResourceBody, ResourceContent, ResourceDef, Root};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ResourceError {
    #[error("resource not found: {0}")]
    NotFound(String),
    #[error("resource {0} is outside the declared roots")]
    OutsideRoots(String),
}

/// Read-mostly uri table. Updates are serialized by the lock.
#[derive(Debug, Default)]
pub struct ResourceStore {
    entries: RwLock<BTreeMap<String, ResourceDef>>,
}

impl ResourceStore {
    pub fn new(resources: impl IntoIterator<Item = ResourceDef>) -> Self {
        Self {
            entries: RwLock::new(resources.into_iter().map(|r| (r.uri.clone(), r)).collect()),
        }
    }

    pub fn get(&self, uri: &str) -> Option<ResourceDef> {
        self.entries
            .read()
            .expect("resource store poisoned")
            .get(uri)
            .cloned()
    }

    pub fn list(&self) -> Vec<ResourceDef> {
        self.entries
            .read()
            .expect("resource store poisoned")
            .values()
            .cloned()
            .collect()
    }

    /// Replaces the content of an existing resource. Returns false if the uri is unknown.
    pub fn update(&self, uri: &str, body: ResourceBody) -> bool {
        match self
            .entries
            .write()
            .expect("resource store poisoned")
            .get_mut(uri)
        {
            Some(def) => {
                def.content = body;
                true
            }
            None => false,
        }
    }

    pub fn insert(&self, def: ResourceDef) {
        self.entries
            .write()
            .expect("resource store poisoned")
            .insert(def.uri.clone(), def);
    }
}

/// True when `uri` falls under some root, or when no roots are declared.
pub fn within_roots(uri: &str, roots: &[Root]) -> bool {
    roots.is_empty() || roots.iter().any(|r| uri.starts_with(&r.uri_prefix))
}

/// Reads `uri` from the store, confined to `roots`. Confinement is checked
/// first so that probing outside the roots reveals nothing about existence.
pub fn resolve_resource(
    uri: &str,
    roots: &[Root],
    store: &ResourceStore,
) -> Result<ResourceContent, ResourceError> {
    if !within_roots(uri, roots) {
        return Err(ResourceError::OutsideRoots(uri.to_string()));
    }
    store
        .get(uri)
        .map(|d| d.read())
        .ok_or_else(|| ResourceError::NotFound(uri.to_string()))
}
