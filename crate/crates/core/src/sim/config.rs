//! Scenario configuration and the `key = value` config file format.

use std::fmt;
use std::str::FromStr;

use crate::error::{EcoError, Result};
use crate::evolution::EvolutionParams;
use crate::network::HebbianParams;
use crate::recognition::{RecognizerKind, RecognizerParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    Baseline,
    MigrationControl,
    PatternControl,
    TargetedNn,
    TargetedSvm,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::Baseline,
        Scenario::MigrationControl,
        Scenario::PatternControl,
        Scenario::TargetedNn,
        Scenario::TargetedSvm,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Baseline => "baseline",
            Scenario::MigrationControl => "migration-control",
            Scenario::PatternControl => "pattern-control",
            Scenario::TargetedNn => "targeted-nn",
            Scenario::TargetedSvm => "targeted-svm",
        }
    }

    /// Recognizer carried by agents in this scenario, if any. The migration
    /// control runs the neural-network interactions but sends copies to
    /// random habitats.
    pub fn recognizer(&self) -> Option<RecognizerKind> {
        match self {
            Scenario::Baseline => None,
            Scenario::PatternControl => Some(RecognizerKind::Distance),
            Scenario::TargetedNn | Scenario::MigrationControl => Some(RecognizerKind::Mlp),
            Scenario::TargetedSvm => Some(RecognizerKind::Svm),
        }
    }

    pub fn is_targeted(&self) -> bool {
        self.recognizer().is_some() && *self != Scenario::MigrationControl
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = EcoError;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|x| x.name() == s.trim())
            .ok_or_else(|| EcoError::Config(format!("unknown scenario '{s}'")))
    }
}

/// Replaces the scenario's recognizer kind; `Auto` keeps it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RecognizerChoice {
    #[default]
    Auto,
    Fixed(RecognizerKind),
}

impl FromStr for RecognizerChoice {
    type Err = EcoError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "auto" => RecognizerChoice::Auto,
            "mlp" => RecognizerChoice::Fixed(RecognizerKind::Mlp),
            "svm" => RecognizerChoice::Fixed(RecognizerKind::Svm),
            "distance" => RecognizerChoice::Fixed(RecognizerKind::Distance),
            "never" => RecognizerChoice::Fixed(RecognizerKind::Never),
            other => return Err(EcoError::Config(format!("unknown recognizer '{other}'"))),
        })
    }
}

/// Shape of the user base and its requests.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorldParams {
    pub communities: usize,
    /// Services known to each community.
    pub catalog_size: usize,
    /// Service families per community; catalog entries cycle through them.
    pub families: usize,
    /// Largest value shift of a family member from its prototype.
    pub family_spread: u8,
    pub templates: usize,
    pub min_parts: usize,
    pub max_parts: usize,
    /// Requests perturb every template value by up to this much.
    pub value_jitter: u8,
    /// Probability of dropping or adding one part.
    pub part_change_prob: f64,
}

impl Default for WorldParams {
    fn default() -> Self {
        WorldParams {
            communities: 10,
            catalog_size: 8,
            families: 1,
            family_spread: 25,
            templates: 3,
            min_parts: 2,
            max_parts: 8,
            value_jitter: 0,
            part_change_prob: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub users: usize,
    pub steps: usize,
    pub runs: usize,
    pub seed: u64,
    pub world: WorldParams,
    pub initial_agents: usize,
    pub deploy_every: u32,
    pub initial_counter: u32,
    pub init_degree: usize,
    /// Residents an arriving agent interacts with.
    pub interaction_k: usize,
    /// Steps a visiting copy has to prove useful.
    pub visit_window: u64,
    pub success_threshold: f64,
    /// Stored sequences seed evolution when request centroids differ by
    /// less than this.
    pub stored_match: f64,
    /// Migration into a habitat holding this many agents is skipped;
    /// zero means unlimited.
    pub max_pool: usize,
    pub recognizer: RecognizerChoice,
    pub evolution: EvolutionParams,
    pub hebbian: HebbianParams,
    pub recognition: RecognizerParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario: Scenario::Baseline,
            users: 100,
            steps: 1000,
            runs: 30,
            seed: 1,
            world: WorldParams::default(),
            initial_agents: 5,
            deploy_every: 3,
            initial_counter: 3,
            init_degree: 4,
            interaction_k: 10,
            visit_window: 50,
            success_threshold: 0.5,
            stored_match: 0.2,
            max_pool: 0,
            recognizer: RecognizerChoice::Auto,
            evolution: EvolutionParams::default(),
            hebbian: HebbianParams::default(),
            recognition: RecognizerParams::default(),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| EcoError::Config(format!("invalid value '{value}' for '{key}'")))
}

impl ScenarioConfig {
    pub fn with_scenario(mut self, scenario: Scenario) -> Self {
        self.scenario = scenario;
        self
    }

    /// Recognizer agents carry in this configuration.
    pub fn recognizer_kind(&self) -> Option<RecognizerKind> {
        match (self.scenario.recognizer(), self.recognizer) {
            (None, _) => None,
            (Some(k), RecognizerChoice::Auto) => Some(k),
            (Some(_), RecognizerChoice::Fixed(k)) => Some(k),
        }
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "scenario" => self.scenario = v.parse()?,
            "users" => self.users = parse_value(key, v)?,
            "steps" => self.steps = parse_value(key, v)?,
            "runs" => self.runs = parse_value(key, v)?,
            "seed" => self.seed = parse_value(key, v)?,
            "communities" => self.world.communities = parse_value(key, v)?,
            "catalog_size" => self.world.catalog_size = parse_value(key, v)?,
            "families" => self.world.families = parse_value(key, v)?,
            "family_spread" => self.world.family_spread = parse_value(key, v)?,
            "templates" => self.world.templates = parse_value(key, v)?,
            "min_parts" => self.world.min_parts = parse_value(key, v)?,
            "max_parts" => self.world.max_parts = parse_value(key, v)?,
            "value_jitter" => self.world.value_jitter = parse_value(key, v)?,
            "part_change_prob" => self.world.part_change_prob = parse_value(key, v)?,
            "initial_agents" => self.initial_agents = parse_value(key, v)?,
            "deploy_every" => self.deploy_every = parse_value(key, v)?,
            "initial_counter" => self.initial_counter = parse_value(key, v)?,
            "init_degree" => self.init_degree = parse_value(key, v)?,
            "interaction_k" => self.interaction_k = parse_value(key, v)?,
            "visit_window" => self.visit_window = parse_value(key, v)?,
            "success_threshold" => self.success_threshold = parse_value(key, v)?,
            "stored_match" => self.stored_match = parse_value(key, v)?,
            "max_pool" => self.max_pool = parse_value(key, v)?,
            "recognizer" => self.recognizer = v.parse()?,
            "base_size" => self.evolution.base_size = parse_value(key, v)?,
            "size_coeff" => self.evolution.size_coeff = parse_value(key, v)?,
            "crossover_fraction" => self.evolution.crossover_fraction = parse_value(key, v)?,
            "mutation_fraction" => self.evolution.mutation_fraction = parse_value(key, v)?,
            "max_generations" => self.evolution.max_generations = parse_value(key, v)?,
            "id_penalty" => self.evolution.id_penalty = parse_value(key, v)?,
            "parsimony" => self.evolution.parsimony = parse_value(key, v)?,
            "seed_min_len" => self.evolution.seed_min_len = parse_value(key, v)?,
            "seed_max_len" => self.evolution.seed_max_len = parse_value(key, v)?,
            "stored_share" => self.evolution.stored_share = parse_value(key, v)?,
            "eta" => self.hebbian.eta = parse_value(key, v)?,
            "p_min" => self.hebbian.p_min = parse_value(key, v)?,
            "p_max" => self.hebbian.p_max = parse_value(key, v)?,
            "p_init" => self.hebbian.p_init = parse_value(key, v)?,
            "n_variants" => self.recognition.n_variants = parse_value(key, v)?,
            "mlp_learning_rate" => self.recognition.mlp.learning_rate = parse_value(key, v)?,
            "mlp_max_epochs" => self.recognition.mlp.max_epochs = parse_value(key, v)?,
            "mlp_margin" => self.recognition.mlp.margin = parse_value(key, v)?,
            "mlp_threshold" => self.recognition.mlp.threshold = parse_value(key, v)?,
            "mlp_init_scale" => self.recognition.mlp.init_scale = parse_value(key, v)?,
            "mlp_retrain_epochs" => self.recognition.mlp.retrain_epochs = parse_value(key, v)?,
            "svm_c" => self.recognition.svm.c = parse_value(key, v)?,
            "svm_gamma" => self.recognition.svm.gamma = Some(parse_value(key, v)?),
            "svm_tol" => self.recognition.svm.tol = parse_value(key, v)?,
            "distance_threshold" => self.recognition.distance_threshold = parse_value(key, v)?,
            other => return Err(EcoError::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Parses a config file on top of the defaults. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ScenarioConfig::default();
        cfg.apply(text)?;
        Ok(cfg)
    }

    pub fn apply(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| EcoError::Config(format!("line {}: expected 'key = value'", n + 1)))?;
            self.set(k, v)
                .map_err(|e| EcoError::Config(format!("line {}: {}", n + 1, e.detail())))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(EcoError::Config(m.to_string()));
        if self.steps == 0 || self.runs == 0 {
            return fail("steps and runs must be at least 1");
        }
        if self.users < 2 {
            return fail("need at least 2 users");
        }
        if self.init_degree >= self.users {
            return fail("init_degree must be below the user count");
        }
        let w = &self.world;
        if w.communities == 0 || w.communities > self.users || w.communities > 33 {
            return fail("communities must lie in 1..=min(users, 33)");
        }
        if w.catalog_size == 0 || w.templates == 0 {
            return fail("catalog_size and templates must be positive");
        }
        if w.min_parts == 0 || w.min_parts > w.max_parts {
            return fail("parts must satisfy 1 <= min_parts <= max_parts");
        }
        if !(0.0..=1.0).contains(&w.part_change_prob) {
            return fail("part_change_prob must lie in [0, 1]");
        }
        if self.initial_agents == 0 || self.deploy_every == 0 {
            return fail("initial_agents and deploy_every must be positive");
        }
        if !(0.0..=1.0).contains(&self.success_threshold) {
            return fail("success_threshold must lie in [0, 1]");
        }
        if self.recognition.n_variants < 2 {
            return fail("n_variants must be at least 2");
        }
        self.evolution.validate()?;
        self.hebbian.validate()
    }
}
