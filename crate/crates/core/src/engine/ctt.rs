use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{TupleId, TxnId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CttStatus {
    Suspected,
    Confirmed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CttEntry {
    pub status: CttStatus,
    pub source_malicious: TxnId,
    pub added_at: u64,
    /// Recoveries that still need this tuple blocked.
    pub holders: BTreeSet<TxnId>,
}

/// Corrupted tuples table. A tuple appears at most once; the entry lives
/// until every recovery holding it has released it.
#[derive(Debug, Clone, Default)]
pub struct CorruptedTuplesTable {
    entries: BTreeMap<TupleId, CttEntry>,
}

impl CorruptedTuplesTable {
    pub fn contains(&self, o: TupleId) -> bool {
        self.entries.contains_key(&o)
    }

    pub fn get(&self, o: TupleId) -> Option<&CttEntry> {
        self.entries.get(&o)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&TupleId, &CttEntry)> {
        self.entries.iter()
    }

    pub fn add(&mut self, o: TupleId, status: CttStatus, holder: TxnId, now: u64) {
        let e = self.entries.entry(o).or_insert_with(|| CttEntry {
            status,
            source_malicious: holder,
            added_at: now,
            holders: BTreeSet::new(),
        });
        e.holders.insert(holder);
        if status == CttStatus::Confirmed {
            e.status = CttStatus::Confirmed;
        }
    }

    /// Drops `holder`'s claim; returns true if the tuple left the table.
    pub fn release(&mut self, o: TupleId, holder: TxnId) -> bool {
        let Some(e) = self.entries.get_mut(&o) else { return false };
        e.holders.remove(&holder);
        if e.holders.is_empty() {
            self.entries.remove(&o);
            true
        } else {
            false
        }
    }

    /// Removes the tuple outright, returning the recoveries that held it.
    pub fn evict(&mut self, o: TupleId) -> BTreeSet<TxnId> {
        self.entries.remove(&o).map(|e| e.holders).unwrap_or_default()
    }

    pub fn held_by(&self, holder: TxnId) -> Vec<TupleId> {
        self.entries
            .iter()
            .filter(|(_, e)| e.holders.contains(&holder))
            .map(|(&o, _)| o)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_entries_need_every_holder() {
        let mut ctt = CorruptedTuplesTable::default();
        ctt.add(TupleId(1), CttStatus::Suspected, TxnId(5), 10);
        ctt.add(TupleId(1), CttStatus::Confirmed, TxnId(7), 12);
        let e = ctt.get(TupleId(1)).unwrap();
        assert_eq!((e.source_malicious, e.added_at, e.status), (TxnId(5), 10, CttStatus::Confirmed));
        assert!(!ctt.release(TupleId(1), TxnId(5)));
        assert!(ctt.release(TupleId(1), TxnId(7)));
        assert!(ctt.is_empty());
    }

    #[test]
    fn evict_returns_holders() {
        let mut ctt = CorruptedTuplesTable::default();
        ctt.add(TupleId(2), CttStatus::Suspected, TxnId(1), 0);
        ctt.add(TupleId(2), CttStatus::Suspected, TxnId(3), 0);
        assert_eq!(ctt.evict(TupleId(2)), [TxnId(1), TxnId(3)].into_iter().collect());
        assert!(ctt.evict(TupleId(2)).is_empty());
    }
}
