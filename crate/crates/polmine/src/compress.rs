//! Attribute-level log compression. Entries collapse into records keyed by
//! (user attribute tuple, resource attribute tuple, operation, decision);
//! multiplicities keep the entry mass, so mining a re-expanded log covers
//! exactly what mining the raw log covers.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Dataset, Decision, Entity, LogEntry, Side};

#[derive(Debug, Error)]
pub enum CompressError {
    #[error("unresolvable {side:?} id {id:?} in log entry {index}")]
    UnresolvableId { side: Side, id: String, index: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompressedRecord {
    pub user_attrs: BTreeMap<String, String>,
    pub resource_attrs: BTreeMap<String, String>,
    pub operation: String,
    pub decision: Decision,
    pub multiplicity: usize,
    /// Timestamp of the first raw entry collapsed into this record.
    pub first_timestamp: String,
}

/// Records in first-occurrence order of their pattern in the raw log.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CompressedLog {
    pub records: Vec<CompressedRecord>,
}

pub fn compress_log(
    logs: &[LogEntry],
    users: &BTreeMap<String, Entity>,
    resources: &BTreeMap<String, Entity>,
) -> Result<CompressedLog, CompressError> {
    let mut index: HashMap<(String, String, String, Decision), usize> = HashMap::new();
    let mut records: Vec<CompressedRecord> = Vec::new();
    for (i, entry) in logs.iter().enumerate() {
        let user = users.get(&entry.user_id).ok_or_else(|| CompressError::UnresolvableId {
            side: Side::User,
            id: entry.user_id.clone(),
            index: i,
        })?;
        let resource =
            resources.get(&entry.resource_id).ok_or_else(|| CompressError::UnresolvableId {
                side: Side::Resource,
                id: entry.resource_id.clone(),
                index: i,
            })?;
        // BTreeMap serialization is order-stable, so the JSON string is a
        // usable grouping key.
        let key = (
            serde_json::to_string(&user.attributes).expect("string map serializes"),
            serde_json::to_string(&resource.attributes).expect("string map serializes"),
            entry.operation.clone(),
            entry.decision,
        );
        match index.get(&key) {
            Some(&slot) => records[slot].multiplicity += 1,
            None => {
                index.insert(key, records.len());
                records.push(CompressedRecord {
                    user_attrs: user.attributes.clone(),
                    resource_attrs: resource.attributes.clone(),
                    operation: entry.operation.clone(),
                    decision: entry.decision,
                    multiplicity: 1,
                    first_timestamp: entry.timestamp.clone(),
                });
            }
        }
    }
    Ok(CompressedLog { records })
}

impl CompressedLog {
    pub fn total_multiplicity(&self) -> usize {
        self.records.iter().map(|r| r.multiplicity).sum()
    }

    /// Compressed record count relative to the raw entry count.
    pub fn compression_ratio(&self) -> f64 {
        let total = self.total_multiplicity();
        if total == 0 {
            return 0.0;
        }
        self.records.len() as f64 / total as f64
    }

    /// Rebuilds a dataset with synthetic entity ids, one per distinct
    /// attribute tuple, replaying each record `multiplicity` times so the
    /// entry mass matches the raw log.
    pub fn expand(&self) -> Dataset {
        let mut users: BTreeMap<String, Entity> = BTreeMap::new();
        let mut resources: BTreeMap<String, Entity> = BTreeMap::new();
        let mut user_ids: HashMap<String, String> = HashMap::new();
        let mut resource_ids: HashMap<String, String> = HashMap::new();
        let mut logs = Vec::with_capacity(self.total_multiplicity());
        for record in &self.records {
            let ukey = serde_json::to_string(&record.user_attrs).expect("string map serializes");
            let user_id = user_ids
                .entry(ukey)
                .or_insert_with(|| {
                    let id = format!("cu{:03}", users.len());
                    users.insert(id.clone(), Entity::new(id.clone(), record.user_attrs.clone()));
                    id
                })
                .clone();
            let rkey =
                serde_json::to_string(&record.resource_attrs).expect("string map serializes");
            let resource_id = resource_ids
                .entry(rkey)
                .or_insert_with(|| {
                    let id = format!("cr{:03}", resources.len());
                    resources
                        .insert(id.clone(), Entity::new(id.clone(), record.resource_attrs.clone()));
                    id
                })
                .clone();
            for k in 0..record.multiplicity {
                logs.push(LogEntry {
                    user_id: user_id.clone(),
                    resource_id: resource_id.clone(),
                    operation: record.operation.clone(),
                    timestamp: if k == 0 {
                        record.first_timestamp.clone()
                    } else {
                        format!("{}+{k}", record.first_timestamp)
                    },
                    decision: record.decision,
                });
            }
        }
        Dataset { users, resources, logs }
    }

    /// One line per record:
    /// `<k:v ... | k:v ... | op decision> xN`
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            let fmt = |attrs: &BTreeMap<String, String>| {
                attrs.iter().map(|(k, v)| format!("{k}:{v}")).collect::<Vec<_>>().join(" ")
            };
            out.push_str(&format!(
                "<{} | {} | {} {}> x{}\n",
                fmt(&record.user_attrs),
                fmt(&record.resource_attrs),
                record.operation,
                record.decision.as_str(),
                record.multiplicity,
            ));
        }
        out
    }
}
