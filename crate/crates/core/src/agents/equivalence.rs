//! Side-by-side run of TD actor-critic and a dueling expected-SARSA learner.
//!
//! With `W⁰ = Y⁰`, equal value tables, and the dueling measure `μ` taken to
//! be the current Boltzmann policy, the two parameter sequences coincide.
//! Freezing `μ` at the initial policy breaks this.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AgentConfig, AgentState, CriticVariant, EntropyForm, Transition};
use crate::envs::{garnet_generate, sample_categorical, EpisodeStepper, GarnetSpec};
use crate::error::Result;
use crate::tables::log_sum_exp;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureMode {
    /// `μ = π^k`, recomputed before every update.
    CurrentPolicy,
    /// `μ = π⁰` for the whole run.
    FrozenInitial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceConfig {
    pub seed: u64,
    pub n_states: usize,
    pub n_actions: usize,
    pub n_steps: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub lr: f64,
    pub measure: MeasureMode,
}

impl EquivalenceConfig {
    pub fn new(seed: u64, n_states: usize, n_actions: usize, n_steps: usize) -> Self {
        EquivalenceConfig {
            seed,
            n_states,
            n_actions,
            n_steps,
            alpha: 0.5,
            gamma: 0.9,
            lr: 0.2,
            measure: MeasureMode::CurrentPolicy,
        }
    }
}

/// Dueling learner `Q(s,a) = Y(s,a) − Σ_b μ(s,b) Y(s,b) + V(s)` with
/// Boltzmann exploration over `Y/α`, updated by the expected-SARSA error.
struct DuelingLearner {
    n_actions: usize,
    y: Vec<f64>,
    v: Vec<f64>,
    alpha: f64,
    gamma: f64,
    lr: f64,
    frozen_mu: Option<Vec<f64>>,
}

impl DuelingLearner {
    fn boltzmann(&self, s: usize) -> Vec<f64> {
        let row: Vec<f64> = self.y[s * self.n_actions..(s + 1) * self.n_actions]
            .iter()
            .map(|y| y / self.alpha)
            .collect();
        let lse = log_sum_exp(&row);
        row.iter().map(|x| (x - lse).exp()).collect()
    }

    fn mu(&self, s: usize) -> Vec<f64> {
        match &self.frozen_mu {
            Some(mu) => mu[s * self.n_actions..(s + 1) * self.n_actions].to_vec(),
            None => self.boltzmann(s),
        }
    }

    fn q(&self, s: usize, a: usize) -> f64 {
        let mu = self.mu(s);
        let row = &self.y[s * self.n_actions..(s + 1) * self.n_actions];
        let baseline: f64 = mu.iter().zip(row).map(|(m, y)| m * y).sum();
        row[a] - baseline + self.v[s]
    }

    fn update(&mut self, t: &Transition) {
        let na = self.n_actions;
        let next = if t.done {
            0.0
        } else {
            let pi = self.boltzmann(t.s_next);
            (0..na).map(|b| pi[b] * self.q(t.s_next, b)).sum::<f64>()
        };
        let err = t.r + self.gamma * next - self.q(t.s, t.a);
        let mu = self.mu(t.s);
        for b in 0..na {
            let ind = if b == t.a { 1.0 } else { 0.0 };
            self.y[t.s * na + b] += self.lr * err * (ind - mu[b]);
        }
        self.v[t.s] += self.lr * err;
    }
}

/// Largest `‖θ_ac − θ_av‖∞ + ‖w_ac − w_av‖∞` observed over the run.
pub fn equivalence_run(config: &EquivalenceConfig) -> Result<f64> {
    let (n, na) = (config.n_states, config.n_actions);
    let mdp = garnet_generate(&GarnetSpec {
        n_states: n,
        n_actions: na,
        branching: n.min(3),
        gamma: config.gamma,
        seed: config.seed,
    })?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let theta0: Vec<f64> = (0..n * na).map(|_| init_rng.random_range(-1.0..1.0)).collect();
    let w0: Vec<f64> = (0..n).map(|_| init_rng.random_range(-1.0..1.0)).collect();

    let mut ac = AgentState::new(
        n,
        na,
        AgentConfig {
            alpha: config.alpha,
            gamma: config.gamma,
            lr_actor: config.lr.max(f64::MIN_POSITIVE),
            lr_critic: config.lr.max(f64::MIN_POSITIVE),
            critic: CriticVariant::ExpectedSarsa,
            entropy_form: EntropyForm::Baseline,
            seed: config.seed,
            ..AgentConfig::default()
        },
    )?
    .with_params(theta0.clone(), w0.clone())?;
    let mut av = DuelingLearner {
        n_actions: na,
        y: theta0,
        v: w0,
        alpha: config.alpha,
        gamma: config.gamma,
        lr: config.lr,
        frozen_mu: None,
    };
    if config.measure == MeasureMode::FrozenInitial {
        av.frozen_mu = Some((0..n).flat_map(|s| av.boltzmann(s)).collect());
    }

    let mut env = EpisodeStepper::new(&mdp, config.seed.wrapping_add(1));
    let mut act_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(2));
    let mut worst: f64 = 0.0;
    for _ in 0..config.n_steps {
        let s = env.state();
        let a = sample_categorical(&mut act_rng, ac.policy().probs().row(s));
        let out = env.step(a)?;
        let t = Transition {
            s,
            a,
            r: out.reward,
            s_next: out.next_state,
            done: out.done,
        };
        if out.done {
            env.reset();
        }
        // A zero learning rate must leave both learners untouched.
        if config.lr > 0.0 {
            ac.ac_step(&t);
        }
        av.update(&t);
        let theta_gap = ac.theta().iter().zip(&av.y).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        let w_gap = ac.w().iter().zip(&av.v).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        worst = worst.max(theta_gap + w_gap);
    }
    Ok(worst)
}

/// [`equivalence_run`] with default temperature, discount and step size.
pub fn equivalence_check(seed: u64, n_states: usize, n_actions: usize, n_steps: usize) -> Result<f64> {
    equivalence_run(&EquivalenceConfig::new(seed, n_states, n_actions, n_steps))
}
