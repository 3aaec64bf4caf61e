//! Name-keyed registries of interchangeable strategy implementations.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

type Constructor<T> = Box<dyn Fn() -> Box<T> + Send + Sync>;

/// Maps strategy names to constructors of boxed trait objects.
pub struct Registry<T: ?Sized> {
    entries: BTreeMap<String, Constructor<T>>,
}

impl<T: ?Sized> Default for Registry<T> {
    fn default() -> Self {
        Self { entries: BTreeMap::new() }
    }
}

impl<T: ?Sized> Registry<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers `ctor` under `name`, replacing any previous entry.
    pub fn register<F>(&mut self, name: &str, ctor: F)
    where
        F: Fn() -> Box<T> + Send + Sync + 'static,
    {
        self.entries.insert(name.to_ascii_lowercase(), Box::new(ctor));
    }

    pub fn create(&self, name: &str) -> Result<Box<T>> {
        match self.entries.get(&name.to_ascii_lowercase()) {
            Some(ctor) => Ok(ctor()),
            None => Err(Error::UnknownStrategy { name: name.to_string(), available: self.names().join(", ") }),
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(&name.to_ascii_lowercase())
    }

    /// Registered names in sorted order.
    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }
}
