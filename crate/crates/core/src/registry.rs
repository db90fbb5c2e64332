//! In-process service registration center.
//!
//! Sellers advertise a product category together with the public option menus
//! they negotiate over; buyers discover matching sellers and then negotiate
//! with them directly. Ratings and weights never enter the registry.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{AgentId, PreferenceProfile};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RegistryError {
    #[error("seller '{0}' is already registered")]
    AlreadyRegistered(AgentId),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("no live registration for handle {0}")]
    NotFound(u64),
}

/// Public part of an issue: its name and option labels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssueMenu {
    pub name: String,
    pub options: Vec<String>,
}

impl IssueMenu {
    pub fn new(
        name: impl Into<String>,
        options: impl IntoIterator<Item = impl Into<String>>,
    ) -> Self {
        Self {
            name: name.into(),
            options: options.into_iter().map(Into::into).collect(),
        }
    }

    /// Strips the ratings from a profile.
    pub fn from_profile(profile: &PreferenceProfile) -> Vec<IssueMenu> {
        profile
            .issues()
            .iter()
            .map(|i| IssueMenu::new(i.name.clone(), i.labels()))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceRecord {
    pub seller: AgentId,
    pub category: String,
    pub template: Vec<IssueMenu>,
    /// Assigned by the registry; strictly increasing across registrations.
    pub registered_at: u64,
}

impl ServiceRecord {
    pub fn new(
        seller: impl Into<AgentId>,
        category: impl Into<String>,
        template: Vec<IssueMenu>,
    ) -> Self {
        Self {
            seller: seller.into(),
            category: category.into(),
            template,
            registered_at: 0,
        }
    }

    pub fn has_issue(&self, name: &str) -> bool {
        self.template.iter().any(|i| i.name == name)
    }

    fn validate(&self) -> Result<(), RegistryError> {
        let invalid = |msg: String| Err(RegistryError::InvalidRecord(msg));
        if self.seller.as_str().is_empty() {
            return invalid("empty seller id".into());
        }
        if self.category.trim().is_empty() {
            return invalid("empty product category".into());
        }
        if self.template.is_empty() {
            return invalid("empty issue template".into());
        }
        let mut names = BTreeSet::new();
        for issue in &self.template {
            if issue.name.is_empty() {
                return invalid("issue with empty name".into());
            }
            if !names.insert(issue.name.as_str()) {
                return invalid(format!("duplicate issue '{}'", issue.name));
            }
            if issue.options.is_empty() {
                return invalid(format!("issue '{}' has no options", issue.name));
            }
            let mut labels = BTreeSet::new();
            if let Some(dup) = issue.options.iter().find(|o| !labels.insert(o.as_str())) {
                return invalid(format!("issue '{}' lists option '{dup}' twice", issue.name));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscoveryQuery {
    pub category: String,
    #[serde(default)]
    pub required_issues: Vec<String>,
}

impl DiscoveryQuery {
    pub fn category(category: impl Into<String>) -> Self {
        Self {
            category: category.into(),
            required_issues: Vec::new(),
        }
    }

    pub fn requiring(mut self, issue: impl Into<String>) -> Self {
        self.required_issues.push(issue.into());
        self
    }

    pub fn matches(&self, record: &ServiceRecord) -> bool {
        record.category == self.category && self.required_issues.iter().all(|i| record.has_issue(i))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct RegistrationHandle(u64);

impl RegistrationHandle {
    /// Handle for a sequence number kept elsewhere, e.g. in a snapshot.
    pub fn from_sequence(sequence: u64) -> Self {
        Self(sequence)
    }

    pub fn sequence(self) -> u64 {
        self.0
    }
}

#[derive(Debug, Default)]
struct Inner {
    last_seq: u64,
    /// Live records keyed by sequence number, so iteration is registration order.
    live: BTreeMap<u64, ServiceRecord>,
}

/// Thread-safe registry; readers share the lock.
#[derive(Debug, Default)]
pub struct Registry {
    inner: RwLock<Inner>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, Inner> {
        self.inner.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, Inner> {
        self.inner.write().unwrap_or_else(|e| e.into_inner())
    }

    pub fn register(&self, mut record: ServiceRecord) -> Result<RegistrationHandle, RegistryError> {
        record.validate()?;
        let mut inner = self.write();
        if inner.live.values().any(|r| r.seller == record.seller) {
            return Err(RegistryError::AlreadyRegistered(record.seller));
        }
        inner.last_seq += 1;
        let seq = inner.last_seq;
        record.registered_at = seq;
        inner.live.insert(seq, record);
        Ok(RegistrationHandle(seq))
    }

    pub fn deregister(&self, handle: RegistrationHandle) -> Result<ServiceRecord, RegistryError> {
        self.write()
            .live
            .remove(&handle.0)
            .ok_or(RegistryError::NotFound(handle.0))
    }

    /// Live records matching `query`, in registration order.
    pub fn discover(&self, query: &DiscoveryQuery) -> Result<Vec<ServiceRecord>, RegistryError> {
        if query.category.trim().is_empty() {
            return Err(RegistryError::InvalidQuery("empty product category".into()));
        }
        Ok(self
            .read()
            .live
            .values()
            .filter(|r| query.matches(r))
            .cloned()
            .collect())
    }

    pub fn len(&self) -> usize {
        self.read().live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Live records as pretty-printed JSON.
    pub fn snapshot(&self) -> String {
        let records: Vec<ServiceRecord> = self.read().live.values().cloned().collect();
        serde_json::to_string_pretty(&records).expect("records serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn aircraft(seller: &str, issues: &[&str]) -> ServiceRecord {
        let template = issues
            .iter()
            .map(|i| IssueMenu::new(*i, ["a", "b"]))
            .collect();
        ServiceRecord::new(seller, "aircraft", template)
    }

    #[test]
    fn register_then_discover() {
        let reg = Registry::new();
        reg.register(aircraft("A", &["price", "warranty"])).unwrap();
        reg.register(aircraft("B", &["price"])).unwrap();
        let found = reg.discover(&DiscoveryQuery::category("aircraft")).unwrap();
        let ids: Vec<_> = found.iter().map(|r| r.seller.as_str()).collect();
        assert_eq!(ids, ["A", "B"]);
        assert!(found[0].registered_at < found[1].registered_at);
        let warranty = reg
            .discover(&DiscoveryQuery::category("aircraft").requiring("warranty"))
            .unwrap();
        assert_eq!(warranty.len(), 1);
        assert!(reg
            .discover(&DiscoveryQuery::category("boats"))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn duplicates_and_invalid_records() {
        let reg = Registry::new();
        reg.register(aircraft("A", &["price"])).unwrap();
        assert_eq!(
            reg.register(aircraft("A", &["price"])),
            Err(RegistryError::AlreadyRegistered("A".into()))
        );
        assert!(matches!(
            reg.register(aircraft("C", &[])),
            Err(RegistryError::InvalidRecord(_))
        ));
        assert!(reg.discover(&DiscoveryQuery::category(" ")).is_err());
    }

    #[test]
    fn deregister_lifecycle() {
        let reg = Registry::new();
        let h = reg.register(aircraft("A", &["price"])).unwrap();
        reg.deregister(h).unwrap();
        assert!(reg
            .discover(&DiscoveryQuery::category("aircraft"))
            .unwrap()
            .is_empty());
        assert_eq!(
            reg.deregister(h),
            Err(RegistryError::NotFound(h.sequence()))
        );
        let again = reg.register(aircraft("A", &["price"])).unwrap();
        assert!(again > h);
    }

    #[test]
    fn snapshot_is_json() {
        let reg = Registry::new();
        reg.register(aircraft("A", &["price"])).unwrap();
        let v: serde_json::Value = serde_json::from_str(&reg.snapshot()).unwrap();
        assert_eq!(v[0]["seller"], "A");
    }
}
