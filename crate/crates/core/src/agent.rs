//! Agents: a semantic description plus the state that travels with every
//! copy (migration history, migration counter, embedded recognizer).

use std::sync::{Arc, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{EcoError, Result};
use crate::recognition::{Recognizer, RecognizerKind, RecognizerParams};
use crate::semantic::SemanticDescription;

/// Lineage identifier. Copies made by migration keep their parent's id; a
/// habitat hosts at most one instance of a lineage.
pub type AgentId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HistoryEntry {
    pub habitat: usize,
    pub arrival_step: u64,
    pub uses: u32,
    pub successes: u32,
}

impl HistoryEntry {
    pub fn success_rate(&self) -> f64 {
        if self.uses == 0 {
            0.0
        } else {
            self.successes as f64 / self.uses as f64
        }
    }
}

/// Habitats visited, oldest first.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MigrationHistory {
    entries: Vec<HistoryEntry>,
}

impl MigrationHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[HistoryEntry] {
        &self.entries
    }

    pub fn push(&mut self, habitat: usize, step: u64) {
        debug_assert!(self.entries.last().map_or(true, |e| e.arrival_step <= step));
        self.entries.push(HistoryEntry { habitat, arrival_step: step, uses: 0, successes: 0 });
    }

    pub fn contains(&self, habitat: usize) -> bool {
        self.entries.iter().any(|e| e.habitat == habitat)
    }

    /// Most recent entry for a habitat.
    pub fn latest(&self, habitat: usize) -> Option<&HistoryEntry> {
        self.entries.iter().rev().find(|e| e.habitat == habitat)
    }

    /// Counts one use at `habitat` against its most recent entry.
    pub fn record(&mut self, habitat: usize, success: bool) -> Result<()> {
        let e = self
            .entries
            .iter_mut()
            .rev()
            .find(|e| e.habitat == habitat)
            .ok_or(EcoError::UnknownHabitat(habitat))?;
        e.uses += 1;
        if success {
            e.successes += 1;
        }
        Ok(())
    }

    /// Habitats with at least one recorded success, in first-visit order.
    pub fn successful_habitats(&self) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        for e in &self.entries {
            if e.successes > 0 && !out.contains(&e.habitat) {
                out.push(e.habitat);
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct MigrationCounter {
    remaining: u32,
}

impl MigrationCounter {
    pub fn new(remaining: u32) -> Self {
        MigrationCounter { remaining }
    }

    pub fn remaining(&self) -> u32 {
        self.remaining
    }

    pub fn increment(&mut self) {
        self.remaining = self.remaining.saturating_add(1);
    }

    /// Spends one migration; `None` when the budget is exhausted.
    pub fn spend(&mut self) -> Option<u32> {
        self.remaining = self.remaining.checked_sub(1)?;
        Some(self.remaining)
    }
}

fn mix(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Recognizer slot shared between copies until one of them learns.
///
/// Training draws from a stream seeded by the owning lineage, so the trained
/// state does not depend on when it is first needed.
#[derive(Clone, Debug)]
pub struct EmbeddedRecognizer {
    kind: RecognizerKind,
    own: SemanticDescription,
    params: RecognizerParams,
    seed: u64,
    updates: u64,
    cell: OnceLock<Recognizer>,
}

impl EmbeddedRecognizer {
    pub fn new(kind: RecognizerKind, own: SemanticDescription, params: RecognizerParams, seed: u64) -> Self {
        EmbeddedRecognizer { kind, own, params, seed, updates: 0, cell: OnceLock::new() }
    }

    pub fn kind(&self) -> RecognizerKind {
        self.kind
    }

    pub fn is_trained(&self) -> bool {
        self.cell.get().is_some()
    }

    pub fn get(&self) -> Result<&Recognizer> {
        if let Some(r) = self.cell.get() {
            return Ok(r);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let r = Recognizer::build(self.kind, &self.own, &self.params, &mut rng)?;
        Ok(self.cell.get_or_init(|| r))
    }

    pub fn is_similar(&self, other: &SemanticDescription) -> Result<bool> {
        self.get()?.is_similar(other)
    }

    pub fn extend(&mut self, other: &SemanticDescription, success: bool) -> Result<()> {
        self.get()?;
        self.updates += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(mix(self.seed, self.updates));
        let r = self.cell.get_mut().expect("trained above");
        r.extend_training_set(other, success, &mut rng)
    }
}

impl PartialEq for EmbeddedRecognizer {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.own == other.own
            && self.seed == other.seed
            && self.updates == other.updates
            && self.cell.get() == other.cell.get()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Agent {
    pub id: AgentId,
    pub description: SemanticDescription,
    pub history: MigrationHistory,
    pub counter: MigrationCounter,
    pub recognizer: Option<Arc<EmbeddedRecognizer>>,
}

impl Agent {
    pub fn new(id: AgentId, description: SemanticDescription, counter: u32) -> Self {
        Agent {
            id,
            description,
            history: MigrationHistory::new(),
            counter: MigrationCounter::new(counter),
            recognizer: None,
        }
    }

    pub fn with_recognizer(mut self, kind: RecognizerKind, params: RecognizerParams, seed: u64) -> Self {
        let slot = EmbeddedRecognizer::new(kind, self.description.clone(), params, mix(seed, self.id as u64));
        self.recognizer = Some(Arc::new(slot));
        self
    }

    /// Counts one participation in an executed response.
    pub fn on_execution(&mut self) {
        self.counter.increment();
    }

    /// Similarity as judged by this agent; agents without a recognizer
    /// never report similarity.
    pub fn is_similar(&self, other: &SemanticDescription) -> Result<bool> {
        match &self.recognizer {
            Some(r) => r.is_similar(other),
            None => Ok(false),
        }
    }

    /// Appends a visit outcome to this instance's recognizer, detaching it
    /// from copies that share it.
    pub fn learn(&mut self, other: &SemanticDescription, success: bool) -> Result<()> {
        match &mut self.recognizer {
            Some(r) => Arc::make_mut(r).extend(other, success),
            None => Ok(()),
        }
    }

    /// A copy arriving at `habitat`, carrying the full state plus a new
    /// history entry.
    pub fn copy_to(&self, habitat: usize, step: u64) -> Agent {
        let mut copy = self.clone();
        copy.history.push(habitat, step);
        copy
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desc() -> SemanticDescription {
        SemanticDescription::from_pairs(&[(1, 25), (2, 35), (3, 55)]).unwrap()
    }

    #[test]
    fn counter_budget() {
        let mut c = MigrationCounter::new(0);
        assert_eq!(c.spend(), None);
        c.increment();
        assert_eq!(c.remaining(), 1);
        assert_eq!(c.spend(), Some(0));
        assert_eq!(c.spend(), None);
        assert_eq!(c.remaining(), 0);
    }

    #[test]
    fn history_records_latest_entry() {
        let mut h = MigrationHistory::new();
        h.push(3, 0);
        h.push(5, 2);
        h.push(3, 7);
        h.record(3, true).unwrap();
        h.record(5, false).unwrap();
        assert_eq!(h.entries()[0].uses, 0);
        assert_eq!(h.latest(3).unwrap().successes, 1);
        assert_eq!(h.latest(5).unwrap().uses, 1);
        assert_eq!(h.successful_habitats(), vec![3]);
        assert!(h.record(9, true).is_err());
    }

    #[test]
    fn copy_carries_state() {
        let mut a = Agent::new(4, desc(), 3).with_recognizer(RecognizerKind::Distance, RecognizerParams::default(), 1);
        a.history.push(0, 0);
        a.on_execution();
        let b = a.copy_to(7, 10);
        assert_eq!(b.counter.remaining(), 4);
        assert_eq!(b.history.entries().len(), 2);
        assert_eq!(b.history.entries()[1].habitat, 7);
        assert!(b.is_similar(&desc()).unwrap());
    }

    #[test]
    fn lazy_training_independent_of_timing() {
        let a = Agent::new(9, desc(), 3).with_recognizer(RecognizerKind::Mlp, RecognizerParams::default(), 42);
        let b = a.clone();
        let probe = SemanticDescription::from_pairs(&[(1, 26), (2, 35), (3, 50)]).unwrap();
        let sa = a.is_similar(&probe).unwrap();
        let fresh = Agent::new(9, desc(), 3).with_recognizer(RecognizerKind::Mlp, RecognizerParams::default(), 42);
        assert_eq!(fresh.is_similar(&probe).unwrap(), sa);
        assert!(b.recognizer.as_ref().unwrap().is_trained());
        assert!(a.is_similar(&desc()).unwrap());
    }

    #[test]
    fn learning_detaches_copy() {
        let a = Agent::new(2, desc(), 3).with_recognizer(RecognizerKind::Svm, RecognizerParams::default(), 5);
        let mut b = a.copy_to(1, 1);
        let other = SemanticDescription::from_pairs(&[(7, 1), (8, 2), (9, 3)]).unwrap();
        b.learn(&other, true).unwrap();
        assert_eq!(b.recognizer.as_ref().unwrap().get().unwrap().training_len(), 22);
        assert_eq!(a.recognizer.as_ref().unwrap().get().unwrap().training_len(), 21);
    }
}
