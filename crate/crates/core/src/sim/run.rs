//! One simulation run: request events, evolution, execution feedback and
//! migration.
//!
//! A run draws from independent streams. The main stream drives everything
//! the baseline does (users, requests, evolution, passive migration,
//! deployments), so scenario extensions that only read the interaction
//! stream cannot perturb the baseline trajectory.

use std::collections::{HashMap, VecDeque};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Scenario, ScenarioConfig};
use super::world::{generate_request, World};
use crate::agent::{Agent, AgentId};
use crate::error::{EcoError, Result};
use crate::evolution::{evolve, AgentSequence};
use crate::migration::{
    exchange_candidates, interact, random_migrate_control, select_promising, targeted_migrate, MigrationEvent,
    MigrationKind, MigrationOutcome,
};
use crate::network::HabitatNetwork;
use crate::recognition::RecognizerKind;
use crate::semantic::{flatten, SemanticDescription, UserRequest};

/// splitmix64 of `seed` salted with `index`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_MAIN: u64 = 1;
const STREAM_INTERACTION: u64 = 2;
const STREAM_RECOGNIZER: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    /// 1-based.
    pub step: u64,
    pub user: usize,
    pub match_percent: f64,
    pub generations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSeries {
    pub scenario: Scenario,
    pub run: usize,
    pub records: Vec<StepRecord>,
    pub events: Vec<MigrationEvent>,
    pub topology: String,
    pub instances: usize,
}

impl RunSeries {
    pub fn match_percents(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.match_percent).collect()
    }
}

#[derive(Clone, Debug)]
enum Pending {
    /// Hebbian feedback for the connection that delivered a passive copy.
    Passive { from: usize },
    /// Training feedback for a targeted copy about the resident that sent it.
    Visit { partner: SemanticDescription },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunStats {
    pub passive: usize,
    pub targeted: usize,
    pub control: usize,
    pub refused: usize,
    pub interactions: usize,
    pub similar: usize,
    pub visit_successes: usize,
    pub visit_failures: usize,
}

pub struct Simulation {
    cfg: ScenarioConfig,
    run: usize,
    world: World,
    net: HabitatNetwork,
    main: ChaCha8Rng,
    interaction: ChaCha8Rng,
    recognizer_seed: u64,
    recognizer: Option<RecognizerKind>,
    step: u64,
    requests: Vec<u32>,
    next_id: AgentId,
    pending: HashMap<(usize, AgentId), Pending>,
    deadlines: VecDeque<(u64, usize, AgentId)>,
    records: Vec<StepRecord>,
    events: Vec<MigrationEvent>,
    stats: RunStats,
    last_request: Option<UserRequest>,
}

impl Simulation {
    /// Builds the world and network and deploys the initial agents.
    pub fn new(cfg: &ScenarioConfig, run: usize) -> Result<Self> {
        cfg.validate()?;
        let run_seed = derive_seed(cfg.seed, run as u64);
        let mut main = ChaCha8Rng::seed_from_u64(derive_seed(run_seed, STREAM_MAIN));
        let world = World::generate(cfg.users, &cfg.world, &mut main)?;
        let mut net = HabitatNetwork::init(cfg.users, cfg.init_degree, cfg.hebbian, &mut main)?;
        net.set_capacity((cfg.max_pool > 0).then_some(cfg.max_pool));
        let mut sim = Simulation {
            cfg: cfg.clone(),
            run,
            world,
            net,
            main,
            interaction: ChaCha8Rng::seed_from_u64(derive_seed(run_seed, STREAM_INTERACTION)),
            recognizer_seed: derive_seed(run_seed, STREAM_RECOGNIZER),
            recognizer: cfg.recognizer_kind(),
            step: 0,
            requests: vec![0; cfg.users],
            next_id: 0,
            pending: HashMap::new(),
            deadlines: VecDeque::new(),
            records: Vec::with_capacity(cfg.steps),
            events: Vec::new(),
            stats: RunStats::default(),
            last_request: None,
        };
        for user in 0..cfg.users {
            let catalog = &sim.world.community_of(user).catalog;
            let n = cfg.initial_agents.min(catalog.len());
            let mut picks = sample(&mut sim.main, catalog.len(), n).into_vec();
            while picks.len() < cfg.initial_agents {
                picks.push(sim.main.gen_range(0..catalog.len()));
            }
            for i in picks {
                let desc = sim.world.community_of(user).catalog[i].clone();
                let agent = sim.new_agent(desc);
                sim.net.deploy_agent(user, agent, 0)?;
            }
        }
        Ok(sim)
    }

    fn new_agent(&mut self, desc: SemanticDescription) -> Agent {
        let id = self.next_id;
        self.next_id += 1;
        let agent = Agent::new(id, desc, self.cfg.initial_counter);
        match self.recognizer {
            Some(kind) => agent.with_recognizer(kind, self.cfg.recognition, self.recognizer_seed),
            None => agent,
        }
    }

    pub fn network(&self) -> &HabitatNetwork {
        &self.net
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn events(&self) -> &[MigrationEvent] {
        &self.events
    }

    pub fn stats(&self) -> RunStats {
        self.stats
    }

    /// Request served by the most recent step.
    pub fn last_request(&self) -> Option<&UserRequest> {
        self.last_request.as_ref()
    }

    /// One user request event.
    pub fn step(&mut self) -> Result<StepRecord> {
        self.step += 1;
        let step = self.step;
        let user = self.main.gen_range(0..self.cfg.users);
        self.requests[user] += 1;
        let request = generate_request(self.world.community_of(user), &self.cfg.world, &mut self.main)?;
        let h = user;

        // Evolve over the habitat's residents and similar stored responses.
        let hab = self.net.habitat(h)?;
        let pool: Vec<SemanticDescription> = hab.agents().iter().map(|a| a.description.clone()).collect();
        let stored: Vec<AgentSequence> = hab
            .similar_stored(&request, self.cfg.stored_match)
            .into_iter()
            .filter_map(|s| s.agents.iter().map(|&id| hab.position(id)).collect::<Option<Vec<usize>>>())
            .collect();
        let result = evolve(&flatten(&request), &pool, &stored, &self.cfg.evolution, &mut self.main)?;
        let record = StepRecord { step, user, match_percent: 100.0 * result.fitness, generations: result.generations };
        self.records.push(record);

        // Execute the best sequence.
        let sequence: Vec<AgentId> = result.best.iter().map(|&i| hab.agents()[i].id).collect();
        let mut members: Vec<AgentId> = Vec::with_capacity(sequence.len());
        for &id in &sequence {
            if !members.contains(&id) {
                members.push(id);
            }
        }
        let success = result.fitness >= self.cfg.success_threshold;
        for &id in &members {
            self.net.habitat_mut(h)?.agent_mut(id).ok_or(EcoError::UnknownAgent(id))?.on_execution();
            self.net.record_usage(h, id, success)?;
            if success {
                self.resolve(h, id, true)?;
            }
        }
        self.net.habitat_mut(h)?.store_sequence(&request, sequence, result.fitness);

        let mut arrivals: VecDeque<(usize, AgentId)> = VecDeque::new();
        for a in self.passive_migrate(h, &members, step)? {
            arrivals.push_back(a);
        }
        if self.requests[user] % self.cfg.deploy_every == 0 {
            let catalog = &self.world.community_of(user).catalog;
            let desc = catalog[self.main.gen_range(0..catalog.len())].clone();
            let agent = self.new_agent(desc);
            let id = agent.id;
            self.net.deploy_agent(h, agent, step)?;
            arrivals.push_back((h, id));
        }
        if self.recognizer.is_some() {
            while let Some((at, id)) = arrivals.pop_front() {
                if let Some(dest) = self.on_arrival(at, id, step)? {
                    arrivals.push_back((dest, id));
                }
            }
        }
        self.expire(step)?;
        self.last_request = Some(request);
        Ok(record)
    }

    fn passive_migrate(&mut self, h: usize, members: &[AgentId], step: u64) -> Result<Vec<(usize, AgentId)>> {
        let arrivals = self.net.passive_migrate(h, members, step, &mut self.main)?;
        let mut out = Vec::with_capacity(arrivals.len());
        for a in arrivals {
            self.events.push(MigrationEvent { step, agent: a.agent, source: a.from, dest: a.to, kind: MigrationKind::Passive });
            self.stats.passive += 1;
            self.pending.insert((a.to, a.agent), Pending::Passive { from: a.from });
            self.deadlines.push_back((step + self.cfg.visit_window, a.to, a.agent));
            out.push((a.to, a.agent));
        }
        Ok(out)
    }

    /// Interactions of an agent that just arrived at `h`. Returns the
    /// destination of the copy it sent, if any.
    fn on_arrival(&mut self, h: usize, id: AgentId, step: u64) -> Result<Option<usize>> {
        let hab = self.net.habitat(h)?;
        let arriver = match hab.agent(id) {
            Some(a) if a.counter.remaining() > 0 => a,
            _ => return Ok(None),
        };
        let others: Vec<usize> = (0..hab.len()).filter(|&i| hab.agents()[i].id != id).collect();
        if others.is_empty() {
            return Ok(None);
        }
        let k = self.cfg.interaction_k.min(others.len());
        let chosen = sample(&mut self.interaction, others.len(), k).into_vec();
        let control = self.cfg.scenario == Scenario::MigrationControl;
        let net = &self.net;
        let open = |d: &usize| !net.habitats()[*d].contains(id) && net.has_room(*d);
        for c in chosen {
            let resident = &hab.agents()[others[c]];
            if !exchange_candidates(arriver, resident).iter().any(open) {
                continue;
            }
            self.stats.interactions += 1;
            let Some(shared) = interact(arriver, resident)? else {
                continue;
            };
            self.stats.similar += 1;
            let shared: Vec<usize> = shared.into_iter().filter(open).collect();
            let partner = resident.description.clone();
            if control {
                let outcome = random_migrate_control(&mut self.net, h, id, step, &mut self.interaction)?;
                return self.finish_migration(h, id, step, outcome, MigrationKind::Control, Some(partner));
            }
            let dest = select_promising(&shared, &resident.history)?;
            let outcome = targeted_migrate(&mut self.net, h, id, dest, step)?;
            return self.finish_migration(h, id, step, outcome, MigrationKind::Targeted, Some(partner));
        }
        Ok(None)
    }

    fn finish_migration(
        &mut self,
        h: usize,
        id: AgentId,
        step: u64,
        outcome: MigrationOutcome,
        kind: MigrationKind,
        partner: Option<SemanticDescription>,
    ) -> Result<Option<usize>> {
        match outcome {
            MigrationOutcome::Migrated { dest, .. } => {
                self.events.push(MigrationEvent { step, agent: id, source: h, dest, kind });
                match kind {
                    MigrationKind::Control => self.stats.control += 1,
                    _ => self.stats.targeted += 1,
                }
                if let Some(partner) = partner {
                    self.pending.insert((dest, id), Pending::Visit { partner });
                    self.deadlines.push_back((step + self.cfg.visit_window, dest, id));
                }
                Ok(Some(dest))
            }
            MigrationOutcome::Refused(_) => {
                self.stats.refused += 1;
                Ok(None)
            }
        }
    }

    fn resolve(&mut self, h: usize, id: AgentId, success: bool) -> Result<()> {
        let Some(p) = self.pending.remove(&(h, id)) else {
            return Ok(());
        };
        match p {
            Pending::Passive { from } => {
                self.net.hebbian_update(from, h, success)?;
            }
            Pending::Visit { partner } => {
                if success {
                    self.stats.visit_successes += 1;
                } else {
                    self.stats.visit_failures += 1;
                }
                let agent = self.net.habitat_mut(h)?.agent_mut(id).ok_or(EcoError::UnknownAgent(id))?;
                agent.learn(&partner, success)?;
            }
        }
        Ok(())
    }

    /// Arrivals whose window closed without a success count as failures.
    fn expire(&mut self, step: u64) -> Result<()> {
        while let Some(&(deadline, h, id)) = self.deadlines.front() {
            if deadline > step {
                break;
            }
            self.deadlines.pop_front();
            self.resolve(h, id, false)?;
        }
        Ok(())
    }

    pub fn into_series(self) -> RunSeries {
        RunSeries {
            scenario: self.cfg.scenario,
            run: self.run,
            topology: self.net.topology_csv(),
            instances: self.net.total_instances(),
            records: self.records,
            events: self.events,
        }
    }
}

/// Runs `cfg.steps` request events for run index `run`.
pub fn run_simulation(cfg: &ScenarioConfig, run: usize) -> Result<RunSeries> {
    let mut sim = Simulation::new(cfg, run)?;
    for _ in 0..cfg.steps {
        sim.step()?;
    }
    Ok(sim.into_series())
}
