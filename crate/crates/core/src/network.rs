//! Habitats and the weighted peer network connecting them.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rand::Rng;

use crate::agent::{Agent, AgentId};
use crate::error::{EcoError, Result};
use crate::semantic::{difference, SemanticDescription, UserRequest};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HebbianParams {
    pub eta: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub p_init: f64,
}

impl Default for HebbianParams {
    fn default() -> Self {
        HebbianParams { eta: 0.1, p_min: 0.05, p_max: 0.95, p_init: 0.5 }
    }
}

impl HebbianParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.eta >= 0.0
            && self.eta <= 1.0
            && 0.0 <= self.p_min
            && self.p_min <= self.p_init
            && self.p_init <= self.p_max
            && self.p_max <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(EcoError::Config("need 0 <= p_min <= p_init <= p_max <= 1 and eta in [0, 1]".into()))
        }
    }
}

/// Success pulls `p` toward `p_max`, failure toward `p_min`.
pub fn hebbian_update(p: f64, success: bool, h: &HebbianParams) -> f64 {
    let next = if success { p + h.eta * (h.p_max - p) } else { p - h.eta * (p - h.p_min) };
    next.clamp(h.p_min, h.p_max)
}

/// Undirected edge `a < b` with one migration probability per direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Connection {
    pub a: usize,
    pub b: usize,
    pub p_ab: f64,
    pub p_ba: f64,
}

impl Connection {
    pub fn probability(&self, from: usize) -> f64 {
        if from == self.a {
            self.p_ab
        } else {
            self.p_ba
        }
    }

    fn probability_mut(&mut self, from: usize) -> &mut f64 {
        if from == self.a {
            &mut self.p_ab
        } else {
            &mut self.p_ba
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Usage {
    pub uses: u32,
    pub successes: u32,
}

/// Best response found for a request, as agent lineages.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredSequence {
    pub request: UserRequest,
    pub centroid: SemanticDescription,
    pub agents: Vec<AgentId>,
    pub fitness: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Habitat {
    pub id: usize,
    pub owner: usize,
    agents: Vec<Agent>,
    index: HashMap<AgentId, usize>,
    stored: Vec<StoredSequence>,
    usage: BTreeMap<AgentId, Usage>,
}

impl Habitat {
    pub fn new(id: usize, owner: usize) -> Self {
        Habitat { id, owner, agents: Vec::new(), index: HashMap::new(), stored: Vec::new(), usage: BTreeMap::new() }
    }

    /// Residents in arrival order.
    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn contains(&self, id: AgentId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn position(&self, id: AgentId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn agent(&self, id: AgentId) -> Option<&Agent> {
        self.index.get(&id).map(|&i| &self.agents[i])
    }

    pub fn agent_mut(&mut self, id: AgentId) -> Option<&mut Agent> {
        self.index.get(&id).map(|&i| &mut self.agents[i])
    }

    pub fn insert(&mut self, agent: Agent) -> Result<()> {
        if self.index.contains_key(&agent.id) {
            return Err(EcoError::DuplicateDeployment(agent.id));
        }
        self.index.insert(agent.id, self.agents.len());
        self.agents.push(agent);
        Ok(())
    }

    pub fn usage(&self, id: AgentId) -> Usage {
        self.usage.get(&id).copied().unwrap_or_default()
    }

    pub fn stored(&self) -> &[StoredSequence] {
        &self.stored
    }

    /// Keeps the best sequence per distinct request.
    pub fn store_sequence(&mut self, request: &UserRequest, agents: Vec<AgentId>, fitness: f64) {
        if let Some(s) = self.stored.iter_mut().find(|s| &s.request == request) {
            if fitness > s.fitness {
                s.agents = agents;
                s.fitness = fitness;
            }
            return;
        }
        self.stored.push(StoredSequence { request: request.clone(), centroid: request.centroid(), agents, fitness });
    }

    /// Stored sequences whose request centroid differs from this request's
    /// by less than `max_difference`.
    pub fn similar_stored(&self, request: &UserRequest, max_difference: f64) -> Vec<&StoredSequence> {
        let c = request.centroid();
        self.stored.iter().filter(|s| difference(&s.centroid, &c) < max_difference).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PassiveArrival {
    pub agent: AgentId,
    pub from: usize,
    pub to: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HabitatNetwork {
    habitats: Vec<Habitat>,
    connections: Vec<Connection>,
    /// Per habitat: `(neighbor, connection index)`, sorted by neighbor.
    adjacency: Vec<Vec<(usize, usize)>>,
    hebbian: HebbianParams,
    /// Migrations into a habitat holding this many agents are skipped.
    capacity: Option<usize>,
}

impl HabitatNetwork {
    /// One habitat per user, each wired to at least `degree` distinct random
    /// peers.
    pub fn init<R: Rng + ?Sized>(n_users: usize, degree: usize, hebbian: HebbianParams, rng: &mut R) -> Result<Self> {
        if n_users < 2 {
            return Err(EcoError::TooFewHabitats(n_users));
        }
        if degree >= n_users {
            return Err(EcoError::DegreeTooLarge { degree, users: n_users });
        }
        let mut net = Self::empty(n_users, hebbian);
        for h in 0..n_users {
            while net.adjacency[h].len() < degree {
                let peer = rng.gen_range(0..n_users - 1);
                let peer = if peer >= h { peer + 1 } else { peer };
                if !net.connected(h, peer) {
                    net.connect(h, peer);
                }
            }
        }
        Ok(net)
    }

    /// Network with the given undirected edges; duplicates and self-loops are
    /// ignored.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], hebbian: HebbianParams) -> Result<Self> {
        let mut net = Self::empty(n, hebbian);
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(EcoError::UnknownHabitat(a.max(b)));
            }
            if a != b && !net.connected(a, b) {
                net.connect(a, b);
            }
        }
        Ok(net)
    }

    fn empty(n: usize, hebbian: HebbianParams) -> Self {
        HabitatNetwork {
            habitats: (0..n).map(|i| Habitat::new(i, i)).collect(),
            connections: Vec::new(),
            adjacency: vec![Vec::new(); n],
            hebbian,
            capacity: None,
        }
    }

    fn connect(&mut self, x: usize, y: usize) {
        let (a, b) = (x.min(y), x.max(y));
        let idx = self.connections.len();
        let p = self.hebbian.p_init;
        self.connections.push(Connection { a, b, p_ab: p, p_ba: p });
        for (u, v) in [(a, b), (b, a)] {
            let list = &mut self.adjacency[u];
            let at = list.partition_point(|&(n, _)| n < v);
            list.insert(at, (v, idx));
        }
    }

    pub fn set_capacity(&mut self, capacity: Option<usize>) {
        self.capacity = capacity;
    }

    /// Whether a migrating copy may still be placed at `h`.
    pub fn has_room(&self, h: usize) -> bool {
        self.capacity.map_or(true, |c| self.habitats[h].len() < c)
    }

    pub fn connected(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search_by_key(&b, |&(n, _)| n).is_ok()
    }

    pub fn len(&self) -> usize {
        self.habitats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.habitats.is_empty()
    }

    pub fn hebbian(&self) -> &HebbianParams {
        &self.hebbian
    }

    pub fn habitats(&self) -> &[Habitat] {
        &self.habitats
    }

    pub fn habitat(&self, h: usize) -> Result<&Habitat> {
        self.habitats.get(h).ok_or(EcoError::UnknownHabitat(h))
    }

    pub fn habitat_mut(&mut self, h: usize) -> Result<&mut Habitat> {
        self.habitats.get_mut(h).ok_or(EcoError::UnknownHabitat(h))
    }

    pub fn connections(&self) -> &[Connection] {
        &self.connections
    }

    pub fn neighbors(&self, h: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[h].iter().map(|&(n, _)| n)
    }

    pub fn degree(&self, h: usize) -> usize {
        self.adjacency[h].len()
    }

    fn edge(&self, from: usize, to: usize) -> Option<usize> {
        let list = self.adjacency.get(from)?;
        list.binary_search_by_key(&to, |&(n, _)| n).ok().map(|i| list[i].1)
    }

    /// Migration probability in the direction `from -> to`.
    pub fn probability(&self, from: usize, to: usize) -> Option<f64> {
        self.edge(from, to).map(|e| self.connections[e].probability(from))
    }

    pub fn hebbian_update(&mut self, from: usize, to: usize, success: bool) -> Result<f64> {
        let e = self.edge(from, to).ok_or(EcoError::UnknownHabitat(to))?;
        let h = self.hebbian;
        let p = self.connections[e].probability_mut(from);
        *p = hebbian_update(*p, success, &h);
        Ok(*p)
    }

    /// Places a new agent and opens its history at the habitat.
    pub fn deploy_agent(&mut self, h: usize, mut agent: Agent, step: u64) -> Result<()> {
        agent.history.push(h, step);
        self.habitat_mut(h)?.insert(agent)
    }

    /// Copies each listed resident of `from` to each neighbor with that
    /// connection's outgoing probability. A neighbor already hosting the
    /// lineage, or full, is skipped.
    pub fn passive_migrate<R: Rng + ?Sized>(
        &mut self,
        from: usize,
        agents: &[AgentId],
        step: u64,
        rng: &mut R,
    ) -> Result<Vec<PassiveArrival>> {
        let src = self.habitat(from)?;
        let mut members: Vec<&Agent> = Vec::with_capacity(agents.len());
        for &id in agents {
            let a = src.agent(id).ok_or(EcoError::UnknownAgent(id))?;
            if !members.iter().any(|m| m.id == id) {
                members.push(a);
            }
        }
        let mut copies: Vec<(usize, Agent)> = Vec::new();
        for &(to, e) in &self.adjacency[from] {
            let p = self.connections[e].probability(from);
            let mut room = self.capacity.map_or(usize::MAX, |c| c.saturating_sub(self.habitats[to].len()));
            for m in &members {
                if rng.gen_bool(p) && !self.habitats[to].contains(m.id) && room > 0 {
                    room -= 1;
                    copies.push((to, m.copy_to(to, step)));
                }
            }
        }
        let mut arrivals = Vec::with_capacity(copies.len());
        for (to, copy) in copies {
            arrivals.push(PassiveArrival { agent: copy.id, from, to });
            self.habitats[to].insert(copy)?;
        }
        Ok(arrivals)
    }

    /// Logs one use of a resident and counts it in the resident's history.
    pub fn record_usage(&mut self, h: usize, id: AgentId, success: bool) -> Result<()> {
        let hab = self.habitat_mut(h)?;
        let agent = hab.agent_mut(id).ok_or(EcoError::UnknownAgent(id))?;
        agent.history.record(h, success)?;
        let u = hab.usage.entry(id).or_default();
        u.uses += 1;
        if success {
            u.successes += 1;
        }
        Ok(())
    }

    pub fn total_instances(&self) -> usize {
        self.habitats.iter().map(Habitat::len).sum()
    }

    /// Mean local clustering coefficient; nodes with fewer than two
    /// neighbors contribute zero.
    pub fn clustering_coefficient(&self) -> f64 {
        let n = self.habitats.len();
        if n == 0 {
            return 0.0;
        }
        let mut total = 0.0;
        for h in 0..n {
            let nb: Vec<usize> = self.neighbors(h).collect();
            let k = nb.len();
            if k < 2 {
                continue;
            }
            let mut links = 0usize;
            for i in 0..k {
                for j in i + 1..k {
                    if self.connected(nb[i], nb[j]) {
                        links += 1;
                    }
                }
            }
            total += 2.0 * links as f64 / (k * (k - 1)) as f64;
        }
        total / n as f64
    }

    /// Edge list `from,to,p_forward,p_backward` with a header line.
    pub fn topology_csv(&self) -> String {
        let mut out = String::from("from,to,p_forward,p_backward\n");
        let mut edges: Vec<&Connection> = self.connections.iter().collect();
        edges.sort_by_key(|c| (c.a, c.b));
        for c in edges {
            let _ = writeln!(out, "{},{},{},{}", c.a, c.b, c.p_ab, c.p_ba);
        }
        out
    }
}
