//! Online tabular learners: TD actor-critic, replay Q-learning on a dueling
//! parameterization, expected-SARSA, and their combination.

mod agent;
mod equivalence;
mod replay;

pub use agent::{
    ac_step, av_step, pgql_step, AgentConfig, AgentState, CriticVariant, EntropyForm, ParamDelta, ValueError,
};
pub(crate) use agent::policy_from_params;
pub use equivalence::{equivalence_check, equivalence_run, EquivalenceConfig, MeasureMode};
pub use replay::{replay_push, replay_sample, ReplayBuffer};

use crate::error::{Error, Result};

/// One `(s, a, r, s', done)` experience record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: usize,
    pub a: usize,
    pub r: f64,
    pub s_next: usize,
    pub done: bool,
}

/// Discounted returns `q̂_t = Σ_{k≥t} γ^{k−t} r_k` of a terminated episode.
pub fn mc_critic(episode: &[Transition], gamma: f64) -> Result<Vec<f64>> {
    match episode.last() {
        Some(last) if last.done => {}
        _ => return Err(Error::UnterminatedEpisode),
    }
    let mut returns = vec![0.0; episode.len()];
    let mut acc = 0.0;
    for (i, t) in episode.iter().enumerate().rev() {
        acc = t.r + gamma * acc;
        returns[i] = acc;
    }
    Ok(returns)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(r: f64, done: bool) -> Transition {
        Transition {
            s: 0,
            a: 0,
            r,
            s_next: 0,
            done,
        }
    }

    #[test]
    fn single_step_return() {
        assert_eq!(mc_critic(&[step(1.0, true)], 0.9).unwrap(), vec![1.0]);
    }

    #[test]
    fn discounted_tail() {
        let ret = mc_critic(&[step(0.0, false), step(0.0, false), step(1.0, true)], 0.95).unwrap();
        let expected = [0.9025, 0.95, 1.0];
        for (r, e) in ret.iter().zip(expected) {
            assert!((r - e).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rewards_zero_returns() {
        let ret = mc_critic(&[step(0.0, false), step(0.0, true)], 0.5).unwrap();
        assert_eq!(ret, vec![0.0, 0.0]);
    }

    #[test]
    fn unterminated_episode_rejected() {
        assert!(matches!(mc_critic(&[step(1.0, false)], 0.9), Err(Error::UnterminatedEpisode)));
        assert!(mc_critic(&[], 0.9).is_err());
    }
}
