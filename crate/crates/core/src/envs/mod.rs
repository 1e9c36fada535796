//! Environments exportable as exact [`TabularMdp`](crate::mdp::TabularMdp)s
//! and steppable for online agents.

mod garnet;
mod grid;
mod stepper;

pub use garnet::{garnet_generate, GarnetSpec};
pub use grid::{gridworld_to_mdp, Cell, GridWorld, GridWorldSpec, Move};
pub use stepper::{sample_categorical, EpisodeStepper, StepOutcome};
