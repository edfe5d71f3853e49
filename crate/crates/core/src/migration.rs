//! Targeted migration: one-on-one interactions between agents, history
//! exchange, and budgeted copy migration, plus the random-destination
//! control.

use rand::Rng;

use crate::agent::{Agent, AgentId, MigrationHistory};
use crate::error::{EcoError, Result};
use crate::network::HabitatNetwork;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MigrationKind {
    Passive,
    Targeted,
    Control,
}

impl MigrationKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MigrationKind::Passive => "passive",
            MigrationKind::Targeted => "targeted",
            MigrationKind::Control => "control",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MigrationEvent {
    pub step: u64,
    pub agent: AgentId,
    pub source: usize,
    pub dest: usize,
    pub kind: MigrationKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Refusal {
    /// The counter is at zero.
    Budget,
    /// The destination already hosts this lineage.
    AlreadyHosted,
    SameHabitat,
    /// The destination is at capacity.
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MigrationOutcome {
    Migrated { dest: usize, remaining: u32 },
    Refused(Refusal),
}

/// Habitats where the resident succeeded and the arriver has never been.
pub fn exchange_candidates(arriver: &Agent, resident: &Agent) -> Vec<usize> {
    resident
        .history
        .successful_habitats()
        .into_iter()
        .filter(|&h| !arriver.history.contains(h))
        .collect()
}

/// Each side judges the other with its own recognizer; candidates are shared
/// only when both report similarity.
pub fn interact(arriver: &Agent, resident: &Agent) -> Result<Option<Vec<usize>>> {
    if !arriver.is_similar(&resident.description)? || !resident.is_similar(&arriver.description)? {
        return Ok(None);
    }
    Ok(Some(exchange_candidates(arriver, resident)))
}

/// Candidate with the best success rate in the resident's history (latest
/// entry per habitat); ties go to the more recent entry, then the lower id.
pub fn select_promising(candidates: &[usize], resident_history: &MigrationHistory) -> Result<usize> {
    let entries = resident_history.entries();
    let score = |h: usize| -> (f64, usize) {
        match entries.iter().rposition(|e| e.habitat == h) {
            Some(pos) => (entries[pos].success_rate(), pos),
            None => (f64::NEG_INFINITY, 0),
        }
    };
    let mut best: Option<(usize, (f64, usize))> = None;
    for &h in candidates {
        let s = score(h);
        let better = match best {
            None => true,
            Some((bh, bs)) => s.0 > bs.0 || (s.0 == bs.0 && (s.1 > bs.1 || (s.1 == bs.1 && h < bh))),
        };
        if better {
            best = Some((h, s));
        }
    }
    best.map(|(h, _)| h).ok_or(EcoError::EmptyPool)
}

/// Copies a resident of `from` to `dest`. Both the copy and the original
/// are left with one migration fewer.
pub fn targeted_migrate(net: &mut HabitatNetwork, from: usize, id: AgentId, dest: usize, step: u64) -> Result<MigrationOutcome> {
    net.habitat(dest)?;
    let agent = net.habitat(from)?.agent(id).ok_or(EcoError::UnknownAgent(id))?;
    if agent.counter.remaining() == 0 {
        return Ok(MigrationOutcome::Refused(Refusal::Budget));
    }
    if dest == from {
        return Ok(MigrationOutcome::Refused(Refusal::SameHabitat));
    }
    if net.habitat(dest)?.contains(id) {
        return Ok(MigrationOutcome::Refused(Refusal::AlreadyHosted));
    }
    if !net.has_room(dest) {
        return Ok(MigrationOutcome::Refused(Refusal::Full));
    }
    let original = net.habitat_mut(from)?.agent_mut(id).expect("checked above");
    let remaining = original.counter.spend().expect("budget checked");
    let copy = original.copy_to(dest, step);
    net.habitat_mut(dest)?.insert(copy)?;
    Ok(MigrationOutcome::Migrated { dest, remaining })
}

/// Same mechanics and budget as a targeted move, destination uniform over
/// every other habitat.
pub fn random_migrate_control<R: Rng + ?Sized>(
    net: &mut HabitatNetwork,
    from: usize,
    id: AgentId,
    step: u64,
    rng: &mut R,
) -> Result<MigrationOutcome> {
    let agent = net.habitat(from)?.agent(id).ok_or(EcoError::UnknownAgent(id))?;
    if agent.counter.remaining() == 0 {
        return Ok(MigrationOutcome::Refused(Refusal::Budget));
    }
    if net.len() < 2 {
        return Err(EcoError::TooFewHabitats(net.len()));
    }
    let dest = random_other(net.len(), from, rng);
    targeted_migrate(net, from, id, dest, step)
}

/// Uniform over `0..n` excluding `current`.
pub fn random_other<R: Rng + ?Sized>(n: usize, current: usize, rng: &mut R) -> usize {
    let d = rng.gen_range(0..n - 1);
    if d >= current {
        d + 1
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::HebbianParams;
    use crate::recognition::{RecognizerKind, RecognizerParams};
    use crate::semantic::SemanticDescription;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn desc(v: u8) -> SemanticDescription {
        SemanticDescription::from_pairs(&[(1, v), (2, 35), (3, 55)]).unwrap()
    }

    fn distance_agent(id: AgentId, d: SemanticDescription) -> Agent {
        Agent::new(id, d, 3).with_recognizer(RecognizerKind::Distance, RecognizerParams::default(), 0)
    }

    #[test]
    fn interaction_gate() {
        let mut a = distance_agent(1, desc(25));
        let mut r = distance_agent(2, desc(25));
        a.history.push(0, 0);
        r.history.push(4, 0);
        r.history.record(4, true).unwrap();
        r.history.push(0, 1);
        assert_eq!(interact(&a, &r).unwrap(), Some(vec![4]));
        let far = distance_agent(3, SemanticDescription::from_pairs(&[(7, 1), (8, 1), (9, 1)]).unwrap());
        assert_eq!(interact(&a, &far).unwrap(), None);
        let fresh = distance_agent(4, desc(25));
        assert_eq!(interact(&a, &fresh).unwrap(), Some(vec![]));
        // One side without a recognizer never agrees.
        let blind = Agent::new(5, desc(25), 3);
        assert_eq!(interact(&a, &blind).unwrap(), None);
    }

    #[test]
    fn promising_rules() {
        let mut h = MigrationHistory::new();
        h.push(1, 0);
        for s in [true, true, true, true, true, true, true, true, true, false] {
            h.record(1, s).unwrap();
        }
        h.push(2, 1);
        for s in [true, false, false] {
            h.record(2, s).unwrap();
        }
        assert_eq!(select_promising(&[2], &h).unwrap(), 2);
        assert_eq!(select_promising(&[2, 1], &h).unwrap(), 1);
        let mut t = MigrationHistory::new();
        t.push(1, 0);
        t.record(1, true).unwrap();
        t.push(2, 5);
        t.record(2, true).unwrap();
        assert_eq!(select_promising(&[1, 2], &t).unwrap(), 2);
        assert!(select_promising(&[], &t).is_err());
    }

    #[test]
    fn budgeted_copy() {
        let mut net = HabitatNetwork::from_edges(4, &[(0, 1)], HebbianParams::default()).unwrap();
        let mut a = Agent::new(9, desc(30), 1);
        a.history.push(0, 0);
        net.habitat_mut(0).unwrap().insert(a).unwrap();
        let before = net.total_instances();
        // Habitat 3 is not connected to 0.
        let out = targeted_migrate(&mut net, 0, 9, 3, 5).unwrap();
        assert_eq!(out, MigrationOutcome::Migrated { dest: 3, remaining: 0 });
        assert_eq!(net.total_instances(), before + 1);
        assert_eq!(net.habitat(3).unwrap().agent(9).unwrap().counter.remaining(), 0);
        assert_eq!(net.habitat(0).unwrap().agent(9).unwrap().counter.remaining(), 0);
        assert_eq!(targeted_migrate(&mut net, 0, 9, 2, 6).unwrap(), MigrationOutcome::Refused(Refusal::Budget));
        let hist = net.habitat(3).unwrap().agent(9).unwrap().history.entries().to_vec();
        assert_eq!(hist.iter().map(|e| e.habitat).collect::<Vec<_>>(), vec![0, 3]);
    }

    #[test]
    fn control_never_picks_current() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..1000 {
            assert_ne!(random_other(5, 2, &mut rng), 2);
        }
        let mut net = HabitatNetwork::from_edges(3, &[], HebbianParams::default()).unwrap();
        let mut a = Agent::new(1, desc(30), 1);
        a.history.push(1, 0);
        net.habitat_mut(1).unwrap().insert(a).unwrap();
        match random_migrate_control(&mut net, 1, 1, 1, &mut rng).unwrap() {
            MigrationOutcome::Migrated { dest, .. } => assert_ne!(dest, 1),
            other => panic!("{other:?}"),
        }
        assert_eq!(
            random_migrate_control(&mut net, 1, 1, 2, &mut rng).unwrap(),
            MigrationOutcome::Refused(Refusal::Budget)
        );
    }
}
