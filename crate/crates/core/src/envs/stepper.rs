use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mdp::TabularMdp;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next_state: usize,
    pub reward: f64,
    pub done: bool,
}

/// Samples episodes from an exact MDP. One stepper per worker.
#[derive(Debug, Clone)]
pub struct EpisodeStepper<'a> {
    mdp: &'a TabularMdp,
    state: usize,
    rng: ChaCha8Rng,
    steps: u64,
    finished: bool,
}

impl<'a> EpisodeStepper<'a> {
    /// Creates a stepper and samples the first state from the initial distribution.
    pub fn new(mdp: &'a TabularMdp, seed: u64) -> Self {
        let mut stepper = EpisodeStepper {
            mdp,
            state: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            steps: 0,
            finished: false,
        };
        stepper.reset();
        stepper
    }

    pub fn reset(&mut self) -> usize {
        self.state = sample_categorical(&mut self.rng, self.mdp.initial_dist());
        self.finished = false;
        self.state
    }

    pub fn state(&self) -> usize {
        self.state
    }

    /// Total steps taken over all episodes.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn mdp(&self) -> &'a TabularMdp {
        self.mdp
    }

    pub fn step(&mut self, action: usize) -> Result<StepOutcome> {
        if self.finished {
            return Err(Error::EpisodeFinished);
        }
        if action >= self.mdp.n_actions() {
            return Err(Error::Dimension {
                what: "action index",
                expected: self.mdp.n_actions(),
                got: action,
            });
        }
        let s = self.state;
        let next_state = sample_categorical(&mut self.rng, self.mdp.transition_row(s, action));
        let reward = self.mdp.reward(s, action);
        let done = self.mdp.is_terminal(next_state);
        self.state = next_state;
        self.steps += 1;
        self.finished = done;
        Ok(StepOutcome {
            next_state,
            reward,
            done,
        })
    }
}

/// Draws an index with probability proportional to `probs`.
pub fn sample_categorical<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{garnet_generate, GarnetSpec, GridWorld, GridWorldSpec, Move};

    #[test]
    fn grid_steps() {
        let world = GridWorld::new(GridWorldSpec::default()).unwrap();
        let mdp = world.to_mdp().unwrap();
        let mut env = EpisodeStepper::new(&mdp, 0);
        assert_eq!(env.state(), world.start_state());
        let out = env.step(Move::Right.index()).unwrap();
        assert_eq!(out.next_state, world.state_of((0, 1)).unwrap());
        assert_eq!((out.reward, out.done), (0.0, false));
    }

    #[test]
    fn entering_goal_ends_episode() {
        let spec = GridWorldSpec {
            start: (3, 4),
            ..GridWorldSpec::default()
        };
        let mdp = crate::envs::gridworld_to_mdp(&spec).unwrap();
        let mut env = EpisodeStepper::new(&mdp, 0);
        let out = env.step(Move::Right.index()).unwrap();
        assert_eq!((out.reward, out.done), (1.0, true));
        assert!(matches!(env.step(Move::Left.index()), Err(Error::EpisodeFinished)));
        env.reset();
        assert!(env.step(Move::Left.index()).is_ok());
    }

    #[test]
    fn empirical_frequencies_match_transition_kernel() {
        let mdp = garnet_generate(&GarnetSpec {
            n_states: 5,
            n_actions: 2,
            branching: 3,
            gamma: 0.9,
            seed: 17,
        })
        .unwrap();
        let n_steps = 100_000;
        let mut counts = vec![[0u64; 5]; 10];
        let mut visits = [0u64; 10];
        let mut env = EpisodeStepper::new(&mdp, 99);
        let mut pick = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..n_steps {
            let s = env.state();
            let a = pick.random_range(0..2);
            let out = env.step(a).unwrap();
            counts[s * 2 + a][out.next_state] += 1;
            visits[s * 2 + a] += 1;
        }
        for sa in 0..10 {
            let n = visits[sa] as f64;
            assert!(n > 1000.0);
            for sn in 0..5 {
                let p = mdp.prob(sa / 2, sa % 2, sn);
                let sigma = (n * p * (1.0 - p)).sqrt();
                let diff = (counts[sa][sn] as f64 - n * p).abs();
                assert!(diff <= 3.0 * sigma + 1e-9, "({sa},{sn}): {diff} > 3σ={}", 3.0 * sigma);
            }
        }
    }
}
