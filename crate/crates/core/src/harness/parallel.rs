//! Several actor threads share one parameter table and one replay buffer
//! while a learner thread runs Q-learning steps on replay batches.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Mutex, MutexGuard};
use std::thread;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{AgentKind, ExperimentConfig};
use super::run::{agent_config, env_seed, evaluate_snapshot, is_eval_step, run_experiment, write_outputs, ExperimentRun, Snapshot};
use crate::agents::{AgentState, CriticVariant, ReplayBuffer, Transition};
use crate::envs::{sample_categorical, EpisodeStepper};
use crate::error::{Error, Result};
use crate::mdp::TabularMdp;

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    // A panicking thread leaves the data as it was before its update.
    m.lock().unwrap_or_else(|e| e.into_inner())
}

/// Parameter table behind a mutex; each update is applied whole.
#[derive(Debug)]
pub struct SharedParams {
    inner: Mutex<(AgentState, u64)>,
}

impl SharedParams {
    pub fn new(agent: AgentState) -> Self {
        SharedParams {
            inner: Mutex::new((agent, 0)),
        }
    }

    /// Runs `f` under the lock and bumps the update counter.
    pub fn update<R>(&self, f: impl FnOnce(&mut AgentState) -> R) -> R {
        let mut guard = lock(&self.inner);
        let out = f(&mut guard.0);
        guard.1 += 1;
        out
    }

    /// Read-only access under the lock.
    pub fn read<R>(&self, f: impl FnOnce(&AgentState) -> R) -> R {
        f(&lock(&self.inner).0)
    }

    /// `(θ, w, updates)` taken atomically.
    pub fn snapshot(&self) -> (Vec<f64>, Vec<f64>, u64) {
        let guard = lock(&self.inner);
        (guard.0.theta().to_vec(), guard.0.w().to_vec(), guard.1)
    }

    pub fn updates(&self) -> u64 {
        lock(&self.inner).1
    }

    pub fn into_inner(self) -> AgentState {
        self.inner.into_inner().unwrap_or_else(|e| e.into_inner()).0
    }
}

/// Replay buffer shared between actors and the learner.
#[derive(Debug)]
pub struct SharedReplay {
    inner: Mutex<ReplayBuffer>,
}

impl SharedReplay {
    pub fn new(capacity: usize) -> Result<Self> {
        Ok(SharedReplay {
            inner: Mutex::new(ReplayBuffer::new(capacity)?),
        })
    }

    pub fn push(&self, t: Transition) {
        lock(&self.inner).push(t);
    }

    pub fn len(&self) -> usize {
        lock(&self.inner).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn capacity(&self) -> usize {
        lock(&self.inner).capacity()
    }

    /// `None` until `batch_size` transitions are stored.
    pub fn sample(&self, batch_size: usize, rng: &mut ChaCha8Rng) -> Option<Vec<Transition>> {
        let buf = lock(&self.inner);
        if buf.len() < batch_size {
            return None;
        }
        buf.sample(batch_size, rng).ok()
    }
}

struct Shared<'a> {
    config: &'a ExperimentConfig,
    mdp: &'a TabularMdp,
    params: SharedParams,
    replay: SharedReplay,
    steps_claimed: AtomicU64,
    steps_done: AtomicU64,
    actors_running: AtomicUsize,
    snapshots: Mutex<Vec<Snapshot>>,
}

/// Decrements the live-actor count even if the actor panics.
struct RunningGuard<'a>(&'a AtomicUsize);

impl Drop for RunningGuard<'_> {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

fn actor(shared: &Shared<'_>, seed: u64, worker: usize) -> Result<()> {
    let cfg = shared.config;
    let mut env = EpisodeStepper::new(shared.mdp, env_seed(seed ^ ((worker as u64 + 1) << 32)));
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5851_f42d_4c95_7f2d_u64.wrapping_mul(worker as u64 + 1)));
    loop {
        let step = shared.steps_claimed.fetch_add(1, Ordering::SeqCst) + 1;
        if step > cfg.steps {
            return Ok(());
        }
        let s = env.state();
        let probs = shared.params.read(|agent| agent.action_probs(s));
        let a = sample_categorical(&mut rng, &probs);
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
        let eval = is_eval_step(step, cfg) && step < cfg.steps;
        let snap = shared.params.update(|agent| {
            agent.ac_step(&t);
            eval.then(|| Snapshot {
                step,
                theta: agent.theta().to_vec(),
                w: agent.w().to_vec(),
            })
        });
        if let Some(snap) = snap {
            lock(&shared.snapshots).push(snap);
        }
        shared.replay.push(t);
        shared.steps_done.fetch_add(1, Ordering::SeqCst);
    }
}

/// One replay step per environment step, as long as actors are producing.
fn learner(shared: &Shared<'_>, seed: u64) {
    let cfg = shared.config;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x2545_f491_4f6c_dd1d);
    let mut learned = 0u64;
    loop {
        let produced = shared.steps_done.load(Ordering::SeqCst);
        let running = shared.actors_running.load(Ordering::SeqCst) > 0;
        if learned >= produced {
            if !running {
                return;
            }
            thread::yield_now();
            continue;
        }
        // Steps taken before the replay holds a full batch get no replay update.
        if let Some(batch) = shared.replay.sample(cfg.params.batch_size, &mut rng) {
            shared.params.update(|agent| agent.av_step(&batch)).expect("non-empty batch");
        }
        learned += 1;
    }
}

fn run_seed_async(config: &ExperimentConfig, mdp: &TabularMdp, seed: u64) -> Result<ExperimentRun> {
    let agent = AgentState::new(mdp.n_states(), mdp.n_actions(), agent_config(config, seed))?;
    let shared = Shared {
        config,
        mdp,
        params: SharedParams::new(agent),
        replay: SharedReplay::new(config.params.replay_capacity)?,
        steps_claimed: AtomicU64::new(0),
        steps_done: AtomicU64::new(0),
        actors_running: AtomicUsize::new(config.workers),
        snapshots: Mutex::new(Vec::new()),
    };
    let (theta, w, _) = shared.params.snapshot();
    lock(&shared.snapshots).push(Snapshot { step: 0, theta, w });

    thread::scope(|scope| -> Result<()> {
        let shared = &shared;
        let actors: Vec<_> = (0..config.workers)
            .map(|worker| {
                scope.spawn(move || {
                    let _guard = RunningGuard(&shared.actors_running);
                    actor(shared, seed, worker)
                })
            })
            .collect();
        let learner = scope.spawn(move || learner(shared, seed));
        let mut result = Ok(());
        for handle in actors {
            let out = handle.join().unwrap_or_else(|_| Err(Error::Spec("actor thread panicked".into())));
            result = result.and(out);
        }
        learner.join().map_err(|_| Error::Spec("learner thread panicked".into()))?;
        result
    })?;

    let Shared { params, snapshots, .. } = shared;
    let agent = params.into_inner();
    let mut snapshots = snapshots.into_inner().unwrap_or_else(|e| e.into_inner());
    snapshots.push(Snapshot {
        step: config.steps,
        theta: agent.theta().to_vec(),
        w: agent.w().to_vec(),
    });
    snapshots.sort_by_key(|s| s.step);
    snapshots.dedup_by_key(|s| s.step);

    let mut rows = Vec::with_capacity(snapshots.len());
    let mut policies = Vec::with_capacity(snapshots.len());
    for snap in &snapshots {
        let (row, policy) = evaluate_snapshot(mdp, config.params.alpha, seed, snap)?;
        rows.push(row);
        policies.push(policy);
    }
    Ok(ExperimentRun {
        agent: config.agent,
        seed,
        rows,
        policies,
        final_theta: agent.theta().to_vec(),
        final_w: agent.w().to_vec(),
    })
}

/// Asynchronous variant of [`run_experiment`] with `workers` actor threads.
///
/// PGQL only. Actors apply actor-critic steps; a learner thread applies
/// Q-learning steps on replay batches. Results depend on thread scheduling.
/// With `workers = 1` this is exactly [`run_experiment`].
pub fn run_async(config: &ExperimentConfig) -> Result<Vec<ExperimentRun>> {
    config.validate()?;
    if config.workers == 1 {
        return run_experiment(config);
    }
    if config.agent != AgentKind::Pgql {
        return Err(Error::config("agent", "parallel runs need the pgql agent"));
    }
    if config.params.critic == CriticVariant::MonteCarlo {
        return Err(Error::config("critic", "monte-carlo episodes cannot be split across workers"));
    }
    let mdp = config.env.build()?;
    let runs = config
        .seeds
        .iter()
        .map(|&seed| run_seed_async(config, &mdp, seed))
        .collect::<Result<Vec<_>>>()?;
    if let Some(out) = &config.out {
        write_outputs(config, &mdp, &runs, out)?;
    }
    Ok(runs)
}
