use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::agents::{AgentConfig, CriticVariant, EntropyForm};
use crate::envs::{garnet_generate, GarnetSpec, GridWorldSpec};
use crate::error::{Error, Result};
use crate::mdp::TabularMdp;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentKind {
    ActorCritic,
    QLearning,
    Pgql,
    ExpectedSarsa,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] = [
        AgentKind::ActorCritic,
        AgentKind::QLearning,
        AgentKind::Pgql,
        AgentKind::ExpectedSarsa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::ActorCritic => "actor-critic",
            AgentKind::QLearning => "q-learning",
            AgentKind::Pgql => "pgql",
            AgentKind::ExpectedSarsa => "expected-sarsa",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config("agent", format!("unknown agent {s:?}")))
    }
}

/// How the PGQL agent combines its two updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgqlMode {
    /// Actor-critic step, then a Q-learning step at rate `lr-q`.
    Sequential,
    /// Single `(1 − η)`/`η` blend computed from the same parameters.
    Blend,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnvConfig {
    GridWorld(GridWorldSpec),
    Garnet(GarnetSpec),
}

impl EnvConfig {
    pub fn name(&self) -> &'static str {
        match self {
            EnvConfig::GridWorld(_) => "gridworld",
            EnvConfig::Garnet(_) => "garnet",
        }
    }

    pub fn build(&self) -> Result<TabularMdp> {
        match self {
            EnvConfig::GridWorld(spec) => crate::envs::gridworld_to_mdp(spec),
            EnvConfig::Garnet(spec) => garnet_generate(spec),
        }
    }
}

/// Everything needed to reproduce one experiment.
///
/// Parsed from flat `key=value` lines; keys are the CLI flag names without the
/// leading dashes (underscores are accepted for dashes).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub agent: AgentKind,
    pub pgql_mode: PgqlMode,
    pub params: AgentConfig,
    pub steps: u64,
    pub eval_every: u64,
    pub seeds: Vec<u64>,
    pub workers: usize,
    pub out: Option<PathBuf>,
    pub layout_file: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            env: EnvConfig::GridWorld(GridWorldSpec::default()),
            agent: AgentKind::Pgql,
            pgql_mode: PgqlMode::Sequential,
            params: AgentConfig::default(),
            steps: 20_000,
            eval_every: 50,
            seeds: vec![0, 1, 2, 3, 4],
            workers: 1,
            out: None,
            layout_file: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse {value:?}")))
}

fn parse_seeds(value: &str) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((lo, hi)) = part.split_once("..") {
            let (lo, hi): (u64, u64) = (parse("seeds", lo)?, parse("seeds", hi)?);
            seeds.extend(lo..hi);
        } else {
            seeds.push(parse("seeds", part)?);
        }
    }
    Ok(seeds)
}

impl ExperimentConfig {
    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        let p = &mut self.params;
        match key.as_str() {
            "env" => {
                let gamma = p.gamma;
                self.env = match value {
                    "gridworld" | "grid" => EnvConfig::GridWorld(GridWorldSpec {
                        gamma,
                        ..GridWorldSpec::default()
                    }),
                    "garnet" => EnvConfig::Garnet(GarnetSpec {
                        n_states: 10,
                        n_actions: 4,
                        branching: 3,
                        gamma,
                        seed: 0,
                    }),
                    other => return Err(Error::config("env", format!("unknown environment {other:?}"))),
                };
                if let Some(path) = self.layout_file.clone() {
                    self.load_layout(&path)?;
                }
            }
            "agent" => self.agent = value.parse()?,
            "pgql-mode" => {
                self.pgql_mode = match value {
                    "sequential" => PgqlMode::Sequential,
                    "blend" => PgqlMode::Blend,
                    other => return Err(Error::config("pgql-mode", format!("unknown mode {other:?}"))),
                }
            }
            "critic" => {
                p.critic = match value {
                    "sarsa" => CriticVariant::Sarsa,
                    "expected-sarsa" => CriticVariant::ExpectedSarsa,
                    "q-learning" => CriticVariant::QLearning,
                    "monte-carlo" => CriticVariant::MonteCarlo,
                    other => return Err(Error::config("critic", format!("unknown critic {other:?}"))),
                }
            }
            "entropy-form" => {
                p.entropy_form = match value {
                    "baseline" => EntropyForm::Baseline,
                    "explicit" => EntropyForm::Explicit,
                    other => return Err(Error::config("entropy-form", format!("unknown form {other:?}"))),
                }
            }
            "alpha" => p.alpha = parse(&key, value)?,
            "gamma" => {
                p.gamma = parse(&key, value)?;
                match &mut self.env {
                    EnvConfig::GridWorld(spec) => spec.gamma = p.gamma,
                    EnvConfig::Garnet(spec) => spec.gamma = p.gamma,
                }
            }
            "eta" => p.eta = parse(&key, value)?,
            "lr-actor" => p.lr_actor = parse(&key, value)?,
            "lr-critic" => p.lr_critic = parse(&key, value)?,
            "lr-q" => p.lr_q = parse(&key, value)?,
            "replay-capacity" => p.replay_capacity = parse(&key, value)?,
            "batch-size" => p.batch_size = parse(&key, value)?,
            "steps" => self.steps = parse(&key, value)?,
            "eval-every" => self.eval_every = parse(&key, value)?,
            "seeds" => self.seeds = parse_seeds(value)?,
            "workers" => self.workers = parse(&key, value)?,
            "out" => self.out = (!value.is_empty()).then(|| PathBuf::from(value)),
            "layout-file" => {
                if value.is_empty() {
                    self.layout_file = None;
                } else {
                    let path = PathBuf::from(value);
                    self.load_layout(&path)?;
                    self.layout_file = Some(path);
                }
            }
            "garnet-states" | "garnet-actions" | "garnet-branching" | "garnet-seed" => {
                let EnvConfig::Garnet(spec) = &mut self.env else {
                    return Err(Error::config(&key, "only valid with env=garnet (set env first)"));
                };
                match key.as_str() {
                    "garnet-states" => spec.n_states = parse(&key, value)?,
                    "garnet-actions" => spec.n_actions = parse(&key, value)?,
                    "garnet-branching" => spec.branching = parse(&key, value)?,
                    _ => spec.seed = parse(&key, value)?,
                }
            }
            _ => return Err(Error::config(key.clone(), "unknown key")),
        }
        Ok(())
    }

    fn load_layout(&mut self, path: &Path) -> Result<()> {
        if let EnvConfig::GridWorld(spec) = &mut self.env {
            *spec = GridWorldSpec::from_layout_file(path, self.params.gamma)
                .map_err(|e| match e {
                    Error::Io { .. } => e,
                    other => Error::config("layout-file", other.to_string()),
                })?;
        }
        Ok(())
    }

    /// Parses `key=value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key=value, got {line:?}", lineno + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.eval_every == 0 {
            return Err(Error::config("eval-every", "must be at least 1"));
        }
        if self.workers == 0 {
            return Err(Error::config("workers", "must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "must not be empty"));
        }
        match &self.env {
            EnvConfig::GridWorld(spec) => spec.validate().map_err(|e| Error::config("env", e.to_string()))?,
            EnvConfig::Garnet(spec) => {
                if spec.branching == 0 || spec.branching > spec.n_states {
                    return Err(Error::config("garnet-branching", "must lie in [1, garnet-states]"));
                }
            }
        }
        Ok(())
    }

    /// Every effective setting as `(key, value)`, in a stable order.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let p = &self.params;
        let mut pairs: Vec<(&str, String)> = vec![
            ("env", self.env.name().to_string()),
            ("agent", self.agent.to_string()),
            (
                "pgql-mode",
                match self.pgql_mode {
                    PgqlMode::Sequential => "sequential",
                    PgqlMode::Blend => "blend",
                }
                .to_string(),
            ),
            (
                "critic",
                match p.critic {
                    CriticVariant::Sarsa => "sarsa",
                    CriticVariant::ExpectedSarsa => "expected-sarsa",
                    CriticVariant::QLearning => "q-learning",
                    CriticVariant::MonteCarlo => "monte-carlo",
                }
                .to_string(),
            ),
            (
                "entropy-form",
                match p.entropy_form {
                    EntropyForm::Baseline => "baseline",
                    EntropyForm::Explicit => "explicit",
                }
                .to_string(),
            ),
            ("alpha", p.alpha.to_string()),
            ("gamma", p.gamma.to_string()),
            ("eta", p.eta.to_string()),
            ("lr-actor", p.lr_actor.to_string()),
            ("lr-critic", p.lr_critic.to_string()),
            ("lr-q", p.lr_q.to_string()),
            ("replay-capacity", p.replay_capacity.to_string()),
            ("batch-size", p.batch_size.to_string()),
            ("steps", self.steps.to_string()),
            ("eval-every", self.eval_every.to_string()),
            (
                "seeds",
                self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
            ),
            ("workers", self.workers.to_string()),
            (
                "out",
                self.out.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            ),
        ];
        match &self.env {
            EnvConfig::GridWorld(spec) => {
                if let Some(path) = &self.layout_file {
                    pairs.push(("layout-file", path.display().to_string()));
                }
                pairs.push(("layout", spec.to_layout().trim_end().replace('\n', "/")));
            }
            EnvConfig::Garnet(spec) => {
                pairs.push(("garnet-states", spec.n_states.to_string()));
                pairs.push(("garnet-actions", spec.n_actions.to_string()));
                pairs.push(("garnet-branching", spec.branching.to_string()));
                pairs.push(("garnet-seed", spec.seed.to_string()));
            }
        }
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}
