use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mdp::TabularMdp;

/// Random MDP with `branching` reachable successors per state-action pair,
/// rewards drawn from `U[0,1]` and a uniform initial distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct GarnetSpec {
    pub n_states: usize,
    pub n_actions: usize,
    pub branching: usize,
    pub gamma: f64,
    pub seed: u64,
}

pub fn garnet_generate(spec: &GarnetSpec) -> Result<TabularMdp> {
    let GarnetSpec {
        n_states: n,
        n_actions: na,
        branching,
        gamma,
        seed,
    } = *spec;
    if n == 0 || na == 0 {
        return Err(Error::Spec("garnet needs at least one state and action".into()));
    }
    if branching == 0 || branching > n {
        return Err(Error::Spec(format!("branching factor {branching} not in [1, {n}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transition = vec![0.0; n * na * n];
    let mut reward = vec![0.0; n * na];
    for s in 0..n {
        for a in 0..na {
            let successors = sample(&mut rng, n, branching);
            // 1 − U[0,1) lies in (0, 1], so no successor gets zero mass.
            let weights: Vec<f64> = (0..branching).map(|_| 1.0 - rng.random::<f64>()).collect();
            let total: f64 = weights.iter().sum();
            let row = &mut transition[(s * na + a) * n..(s * na + a + 1) * n];
            for (sn, w) in successors.iter().zip(&weights) {
                row[sn] = w / total;
            }
            reward[s * na + a] = rng.random::<f64>();
        }
    }
    TabularMdp::new(
        n,
        na,
        transition,
        reward,
        gamma,
        vec![false; n],
        vec![1.0 / n as f64; n],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(branching: usize, seed: u64) -> GarnetSpec {
        GarnetSpec {
            n_states: 10,
            n_actions: 4,
            branching,
            gamma: 0.9,
            seed,
        }
    }

    #[test]
    fn same_seed_same_mdp() {
        assert_eq!(garnet_generate(&spec(3, 7)).unwrap(), garnet_generate(&spec(3, 7)).unwrap());
        assert_ne!(garnet_generate(&spec(3, 7)).unwrap(), garnet_generate(&spec(3, 8)).unwrap());
    }

    #[test]
    fn rows_are_stochastic_with_exact_branching() {
        let mdp = garnet_generate(&spec(3, 1)).unwrap();
        for s in 0..10 {
            for a in 0..4 {
                let row = mdp.transition_row(s, a);
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert_eq!(row.iter().filter(|&&p| p > 0.0).count(), 3);
                assert!((0.0..=1.0).contains(&mdp.reward(s, a)));
            }
        }
    }

    #[test]
    fn unit_branching_is_deterministic() {
        let mdp = garnet_generate(&spec(1, 2)).unwrap();
        for s in 0..10 {
            for a in 0..4 {
                assert!(mdp.transition_row(s, a).contains(&1.0));
            }
        }
    }

    #[test]
    fn oversized_branching_rejected() {
        assert!(matches!(garnet_generate(&spec(11, 0)), Err(Error::Spec(_))));
        assert!(garnet_generate(&spec(0, 0)).is_err());
    }
}
