use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{mc_critic, ReplayBuffer, Transition};
use crate::envs::sample_categorical;
use crate::error::{Error, Result};
use crate::fixed_point::q_tilde_from_policy;
use crate::tables::{log_sum_exp, QTable, TabularPolicy, VTable};

/// How the actor-critic update estimates `Q^π(s,a)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticVariant {
    /// `r + γ Q̃(s', b)` with `b` drawn from the current policy.
    Sarsa,
    /// `r + γ V(s')`: TD actor-critic.
    ExpectedSarsa,
    /// `r + γ max_b Q̃(s', b)`.
    QLearning,
    /// Discounted return to the end of the episode; updates are applied when
    /// the episode terminates.
    MonteCarlo,
}

/// Where entropy regularization enters the actor update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntropyForm {
    /// Baseline `Q̃(s,a) = α(log π + H) + V`, i.e. `δ = q̂ − Q̃(s,a)`.
    Baseline,
    /// Plain `V(s)` baseline plus an explicit `α ∇H` term.
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub eta: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub lr_q: f64,
    pub critic: CriticVariant,
    pub entropy_form: EntropyForm,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            alpha: 0.001,
            gamma: 0.95,
            eta: 0.5,
            lr_actor: 1.0,
            lr_critic: 1.0,
            lr_q: 1.0,
            critic: CriticVariant::ExpectedSarsa,
            entropy_form: EntropyForm::Baseline,
            replay_capacity: 10_000,
            batch_size: 8,
            seed: 0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha", self.alpha),
            ("lr_actor", self.lr_actor),
            ("lr_critic", self.lr_critic),
            ("lr_q", self.lr_q),
        ];
        for (field, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(field, format!("must be positive, got {v}")));
            }
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config("gamma", format!("must lie in (0, 1), got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::config("eta", format!("must lie in [0, 1], got {}", self.eta)));
        }
        if self.replay_capacity == 0 {
            return Err(Error::config("replay_capacity", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        Ok(())
    }
}

/// Additive change to the agent parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamDelta {
    pub theta: Vec<f64>,
    pub w: Vec<f64>,
}

impl ParamDelta {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        ParamDelta {
            theta: vec![0.0; n_states * n_actions],
            w: vec![0.0; n_states],
        }
    }
}

/// The error an action-value update regresses on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueError {
    /// `r + γ max_b Q(s',b) − Q(s,a)`.
    QLearning,
    /// `r + γ Σ_b π(s',b) Q(s',b) − Q(s,a)`.
    ExpectedSarsa,
}

/// Tabular policy-and-value learner.
///
/// The policy is `π(s,·) = softmax(θ(s,·)/α)` and the value table is `w`.
/// Both the actor-critic and the action-value updates act on the same
/// parameters; the latter sees them through the dueling composition
/// `Q(s,a) = θ(s,a) − Σ_b π(s,b) θ(s,b) + w(s)`.
#[derive(Debug, Clone)]
pub struct AgentState {
    n_states: usize,
    n_actions: usize,
    theta: Vec<f64>,
    w: Vec<f64>,
    config: AgentConfig,
    replay: ReplayBuffer,
    rng: ChaCha8Rng,
    episode: Vec<Transition>,
}

impl AgentState {
    pub fn new(n_states: usize, n_actions: usize, config: AgentConfig) -> Result<Self> {
        config.validate()?;
        Ok(AgentState {
            n_states,
            n_actions,
            theta: vec![0.0; n_states * n_actions],
            w: vec![0.0; n_states],
            replay: ReplayBuffer::new(config.replay_capacity)?,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            episode: Vec::new(),
        })
    }

    /// Replaces the parameters (e.g. for a shared initialization).
    pub fn with_params(mut self, theta: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if theta.len() != self.n_states * self.n_actions {
            return Err(Error::Dimension {
                what: "theta",
                expected: self.n_states * self.n_actions,
                got: theta.len(),
            });
        }
        if w.len() != self.n_states {
            return Err(Error::Dimension {
                what: "w",
                expected: self.n_states,
                got: w.len(),
            });
        }
        self.theta = theta;
        self.w = w;
        Ok(self)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn policy(&self) -> TabularPolicy {
        policy_from_params(&self.theta, self.n_states, self.n_actions, self.config.alpha)
    }

    pub fn value(&self) -> VTable {
        VTable::new(self.w.clone())
    }

    /// `Q̃ = α(log π + H) + w`.
    pub fn q_tilde(&self) -> QTable {
        q_tilde_from_policy(&self.policy(), &self.value(), self.config.alpha).expect("alpha validated")
    }

    /// Dueling composition `θ − Σ_b π θ + w` with `μ = π`.
    pub fn dueling_q(&self) -> QTable {
        QTable::from_fn(self.n_states, self.n_actions, |s, a| {
            let (probs, _) = self.row_policy(s);
            self.dueling_entry(s, a, &probs)
        })
    }

    fn row_theta(&self, s: usize) -> &[f64] {
        &self.theta[s * self.n_actions..(s + 1) * self.n_actions]
    }

    /// Probabilities and log-probabilities of state `s`.
    fn row_policy(&self, s: usize) -> (Vec<f64>, Vec<f64>) {
        let alpha = self.config.alpha;
        let scaled: Vec<f64> = self.row_theta(s).iter().map(|t| t / alpha).collect();
        let lse = log_sum_exp(&scaled);
        let log_probs: Vec<f64> = scaled.iter().map(|x| x - lse).collect();
        (log_probs.iter().map(|lp| lp.exp()).collect(), log_probs)
    }

    fn dueling_entry(&self, s: usize, a: usize, probs: &[f64]) -> f64 {
        let row = self.row_theta(s);
        let mean: f64 = probs.iter().zip(row).map(|(p, t)| p * t).sum();
        row[a] - mean + self.w[s]
    }

    fn q_tilde_entry(&self, s: usize, a: usize) -> f64 {
        let (probs, log_probs) = self.row_policy(s);
        let entropy = -probs.iter().zip(&log_probs).map(|(p, lp)| p * lp).sum::<f64>();
        self.config.alpha * (log_probs[a] + entropy) + self.w[s]
    }

    /// `π(s,·)` computed from the current parameters.
    pub fn action_probs(&self, s: usize) -> Vec<f64> {
        self.row_policy(s).0
    }

    /// Samples an action from the current policy with the agent's RNG.
    pub fn act(&mut self, s: usize) -> usize {
        let (probs, _) = self.row_policy(s);
        sample_categorical(&mut self.rng, &probs)
    }

    pub fn apply(&mut self, delta: &ParamDelta, weight: f64) {
        for (t, d) in self.theta.iter_mut().zip(&delta.theta) {
            *t += weight * d;
        }
        for (w, d) in self.w.iter_mut().zip(&delta.w) {
            *w += weight * d;
        }
    }

    fn bootstrap(&mut self, t: &Transition) -> f64 {
        if t.done {
            return 0.0;
        }
        let s = t.s_next;
        match self.config.critic {
            CriticVariant::ExpectedSarsa | CriticVariant::MonteCarlo => self.w[s],
            CriticVariant::QLearning => (0..self.n_actions)
                .map(|b| self.q_tilde_entry(s, b))
                .fold(f64::NEG_INFINITY, f64::max),
            CriticVariant::Sarsa => {
                let b = self.act(s);
                self.q_tilde_entry(s, b)
            }
        }
    }

    /// Actor-critic change for one transition given its critic estimate `q̂`.
    pub fn ac_delta_with_critic(&self, t: &Transition, q_hat: f64) -> ParamDelta {
        let mut delta = ParamDelta::zeros(self.n_states, self.n_actions);
        self.accumulate_ac(&mut delta, t, q_hat);
        delta
    }

    fn accumulate_ac(&self, delta: &mut ParamDelta, t: &Transition, q_hat: f64) {
        let (s, a) = (t.s, t.a);
        let (probs, log_probs) = self.row_policy(s);
        let cfg = &self.config;
        match cfg.entropy_form {
            EntropyForm::Baseline => {
                let err = q_hat - self.q_tilde_entry(s, a);
                for b in 0..self.n_actions {
                    let ind = if b == a { 1.0 } else { 0.0 };
                    delta.theta[s * self.n_actions + b] += cfg.lr_actor * err * (ind - probs[b]);
                }
                delta.w[s] += cfg.lr_critic * err;
            }
            EntropyForm::Explicit => {
                let err = q_hat - self.w[s];
                let entropy = -probs.iter().zip(&log_probs).map(|(p, lp)| p * lp).sum::<f64>();
                for b in 0..self.n_actions {
                    let ind = if b == a { 1.0 } else { 0.0 };
                    let grad_h = -probs[b] * (log_probs[b] + entropy);
                    delta.theta[s * self.n_actions + b] += cfg.lr_actor * (err * (ind - probs[b]) + cfg.alpha * grad_h);
                }
                delta.w[s] += cfg.lr_critic * err;
            }
        }
    }

    /// Actor-critic change for `t`, or `None` while a Monte-Carlo critic is
    /// still collecting its episode.
    pub fn ac_delta(&mut self, t: &Transition) -> Option<ParamDelta> {
        if self.config.critic == CriticVariant::MonteCarlo {
            self.episode.push(*t);
            if !t.done {
                return None;
            }
            let episode = std::mem::take(&mut self.episode);
            let returns = mc_critic(&episode, self.config.gamma).expect("episode ends with done");
            let mut delta = ParamDelta::zeros(self.n_states, self.n_actions);
            for (tr, q_hat) in episode.iter().zip(returns) {
                self.accumulate_ac(&mut delta, tr, q_hat);
            }
            return Some(delta);
        }
        let q_hat = t.r + self.config.gamma * self.bootstrap(t);
        Some(self.ac_delta_with_critic(t, q_hat))
    }

    /// One actor-critic update.
    pub fn ac_step(&mut self, t: &Transition) {
        if let Some(delta) = self.ac_delta(t) {
            self.apply(&delta, 1.0);
        }
    }

    /// Batch-averaged action-value change with `μ` equal to the current policy.
    pub fn av_delta(&self, batch: &[Transition], error: ValueError) -> Result<ParamDelta> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let (n, na) = (self.n_states, self.n_actions);
        let rows: Vec<Vec<f64>> = (0..n).map(|s| self.row_policy(s).0).collect();
        let q = |s: usize, a: usize| self.dueling_entry(s, a, &rows[s]);
        let scale = self.config.lr_q / batch.len() as f64;
        let mut delta = ParamDelta::zeros(n, na);
        for t in batch {
            let next = if t.done {
                0.0
            } else {
                match error {
                    ValueError::QLearning => (0..na).map(|b| q(t.s_next, b)).fold(f64::NEG_INFINITY, f64::max),
                    ValueError::ExpectedSarsa => (0..na).map(|b| rows[t.s_next][b] * q(t.s_next, b)).sum(),
                }
            };
            let err = t.r + self.config.gamma * next - q(t.s, t.a);
            for b in 0..na {
                let ind = if b == t.a { 1.0 } else { 0.0 };
                delta.theta[t.s * na + b] += scale * err * (ind - rows[t.s][b]);
            }
            delta.w[t.s] += scale * err;
        }
        Ok(delta)
    }

    /// One Q-learning step on the dueling composition.
    pub fn av_step(&mut self, batch: &[Transition]) -> Result<()> {
        let delta = self.av_delta(batch, ValueError::QLearning)?;
        self.apply(&delta, 1.0);
        Ok(())
    }

    /// One expected-SARSA step on the dueling composition.
    pub fn expected_sarsa_step(&mut self, batch: &[Transition]) -> Result<()> {
        let delta = self.av_delta(batch, ValueError::ExpectedSarsa)?;
        self.apply(&delta, 1.0);
        Ok(())
    }

    pub fn push_replay(&mut self, t: Transition) {
        self.replay.push(t);
    }

    /// Samples a replay batch with the agent's RNG, if enough data is stored.
    pub fn sample_replay(&mut self) -> Option<Vec<Transition>> {
        if self.replay.len() < self.config.batch_size {
            return None;
        }
        self.replay.sample(self.config.batch_size, &mut self.rng).ok()
    }

    /// Combined update: `(1 − η)` times the actor-critic change plus `η`
    /// times the Q-learning change on a replay batch, both computed from the
    /// same parameters. The Q-learning part is skipped while the replay holds
    /// fewer than `batch_size` transitions.
    pub fn pgql_step(&mut self, t: &Transition) {
        let eta = self.config.eta;
        self.replay.push(*t);
        let ac = self.ac_delta(t);
        let av = if eta > 0.0 {
            self.sample_replay()
                .map(|batch| self.av_delta(&batch, ValueError::QLearning).expect("non-empty batch"))
        } else {
            None
        };
        if let Some(d) = ac {
            self.apply(&d, 1.0 - eta);
        }
        if let Some(d) = av {
            self.apply(&d, eta);
        }
    }

    /// The online scheme: a full actor-critic update on the fresh transition,
    /// then one Q-learning step (learning rate `lr_q`) on a replay batch.
    pub fn pgql_step_sequential(&mut self, t: &Transition) {
        self.ac_step(t);
        self.replay.push(*t);
        if let Some(batch) = self.sample_replay() {
            self.av_step(&batch).expect("non-empty batch");
        }
    }

    /// Replay-only Q-learning: store `t`, then one step on a replay batch.
    pub fn q_learning_step(&mut self, t: &Transition) {
        self.replay.push(*t);
        if let Some(batch) = self.sample_replay() {
            self.av_step(&batch).expect("non-empty batch");
        }
    }
}

pub(crate) fn policy_from_params(theta: &[f64], n_states: usize, n_actions: usize, alpha: f64) -> TabularPolicy {
    let logits = QTable::from_fn(n_states, n_actions, |s, a| theta[s * n_actions + a] / alpha);
    TabularPolicy::from_logits(logits).with_temperature(alpha)
}

/// Free-function form of [`AgentState::ac_step`].
pub fn ac_step(agent: &mut AgentState, t: &Transition) {
    agent.ac_step(t);
}

/// Free-function form of [`AgentState::av_step`].
pub fn av_step(agent: &mut AgentState, batch: &[Transition]) -> Result<()> {
    agent.av_step(batch)
}

/// Free-function form of [`AgentState::pgql_step`].
pub fn pgql_step(agent: &mut AgentState, t: &Transition) {
    agent.pgql_step(t);
}
