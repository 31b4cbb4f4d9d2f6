use crate::model::TupleId;

/// The `Checking` table: one integer-cent balance per account.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Store {
    balances: Vec<i64>,
    initial: i64,
    /// Last sequence number handed out to a commit or compensation.
    pub commit_seq: u64,
}

impl Store {
    pub fn new(n: usize, initial: i64) -> Self {
        Store { balances: vec![initial; n], initial, commit_seq: 0 }
    }

    pub fn get(&self, o: TupleId) -> i64 {
        self.balances[o.index()]
    }

    pub(crate) fn set(&mut self, o: TupleId, v: i64) {
        self.balances[o.index()] = v;
    }

    pub(crate) fn next_seq(&mut self) -> u64 {
        self.commit_seq += 1;
        self.commit_seq
    }

    pub fn initial_balance(&self) -> i64 {
        self.initial
    }

    pub fn balances(&self) -> &[i64] {
        &self.balances
    }

    pub fn total(&self) -> i64 {
        self.balances.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.balances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balances.is_empty()
    }
}
