use std::fs;
use std::io::Write;
use std::path::Path;

use super::config::{AgentKind, ExperimentConfig, PgqlMode};
use crate::agents::{policy_from_params, AgentConfig, AgentState, Transition};
use crate::envs::EpisodeStepper;
use crate::error::{Error, Result};
use crate::fixed_point::q_tilde_from_policy;
use crate::mdp::{apply_bellman_star, optimal_performance, policy_performance, TabularMdp};
use crate::tables::{TabularPolicy, VTable};

/// One evaluation point of a learning curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: u64,
    /// Exact `J(π)` of the current policy.
    pub j_true: f64,
    /// `‖T*Q̃ − Q̃‖∞` of the agent's reconstructed action values.
    pub bellman_residual: f64,
    /// Mean policy entropy over non-terminal states.
    pub mean_entropy: f64,
    pub seed: u64,
}

pub const TRACE_COLUMNS: &str = "step,j_true,bellman_residual,mean_entropy,seed";

/// Trace and policy checkpoints of one seed.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub agent: AgentKind,
    pub seed: u64,
    pub rows: Vec<TraceRow>,
    /// Policy at each row, same order.
    pub policies: Vec<TabularPolicy>,
    pub final_theta: Vec<f64>,
    pub final_w: Vec<f64>,
}

impl ExperimentRun {
    pub fn final_j(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.j_true)
    }

    /// Mean of `j_true` over the trace.
    pub fn auc(&self) -> f64 {
        self.rows.iter().map(|r| r.j_true).sum::<f64>() / self.rows.len() as f64
    }
}

/// Parameters captured at one step, evaluated later.
#[derive(Debug, Clone)]
pub(crate) struct Snapshot {
    pub step: u64,
    pub theta: Vec<f64>,
    pub w: Vec<f64>,
}

pub(crate) fn evaluate_snapshot(mdp: &TabularMdp, alpha: f64, seed: u64, snap: &Snapshot) -> Result<(TraceRow, TabularPolicy)> {
    let policy = policy_from_params(&snap.theta, mdp.n_states(), mdp.n_actions(), alpha);
    let j_true = policy_performance(mdp, &policy)?;
    let q_tilde = q_tilde_from_policy(&policy, &VTable::new(snap.w.clone()), alpha)?;
    let bellman_residual = apply_bellman_star(&q_tilde, mdp)?.sup_distance(&q_tilde);
    let live: Vec<usize> = (0..mdp.n_states()).filter(|&s| !mdp.is_terminal(s)).collect();
    let mean_entropy = if live.is_empty() {
        0.0
    } else {
        live.iter().map(|&s| policy.entropy(s)).sum::<f64>() / live.len() as f64
    };
    let row = TraceRow {
        step: snap.step,
        j_true,
        bellman_residual,
        mean_entropy,
        seed,
    };
    Ok((row, policy))
}

/// Environment seed derived from the run seed, so agent and environment
/// draw from unrelated streams.
pub(crate) fn env_seed(seed: u64) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1)
}

pub(crate) fn agent_config(config: &ExperimentConfig, seed: u64) -> AgentConfig {
    AgentConfig {
        seed,
        ..config.params.clone()
    }
}

fn expected_sarsa_replay_step(agent: &mut AgentState, t: &Transition) {
    agent.push_replay(*t);
    if let Some(batch) = agent.sample_replay() {
        agent.expected_sarsa_step(&batch).expect("non-empty batch");
    }
}

fn update(agent: &mut AgentState, kind: AgentKind, mode: PgqlMode, t: &Transition) {
    match (kind, mode) {
        (AgentKind::ActorCritic, _) => agent.ac_step(t),
        (AgentKind::QLearning, _) => agent.q_learning_step(t),
        (AgentKind::ExpectedSarsa, _) => expected_sarsa_replay_step(agent, t),
        (AgentKind::Pgql, PgqlMode::Sequential) => agent.pgql_step_sequential(t),
        (AgentKind::Pgql, PgqlMode::Blend) => agent.pgql_step(t),
    }
}

/// Whether a row is recorded after `step` environment steps.
pub(crate) fn is_eval_step(step: u64, config: &ExperimentConfig) -> bool {
    step.is_multiple_of(config.eval_every) || step == config.steps
}

fn run_seed(config: &ExperimentConfig, mdp: &TabularMdp, seed: u64) -> Result<ExperimentRun> {
    let mut agent = AgentState::new(mdp.n_states(), mdp.n_actions(), agent_config(config, seed))?;
    let mut env = EpisodeStepper::new(mdp, env_seed(seed));
    let alpha = config.params.alpha;
    let mut rows = Vec::new();
    let mut policies = Vec::new();
    let mut record = |agent: &AgentState, step: u64| -> Result<()> {
        let snap = Snapshot {
            step,
            theta: agent.theta().to_vec(),
            w: agent.w().to_vec(),
        };
        let (row, policy) = evaluate_snapshot(mdp, alpha, seed, &snap)?;
        rows.push(row);
        policies.push(policy);
        Ok(())
    };
    record(&agent, 0)?;
    for step in 1..=config.steps {
        let s = env.state();
        let a = agent.act(s);
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
        update(&mut agent, config.agent, config.pgql_mode, &t);
        if is_eval_step(step, config) {
            record(&agent, step)?;
        }
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

/// Runs every seed of `config` sequentially.
///
/// Rows are taken at step 0, every `eval_every` steps, and after the last
/// step. With `out` set, traces, policy checkpoints and a summary are written
/// there. Same config, same bits.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ExperimentRun>> {
    config.validate()?;
    let mdp = config.env.build()?;
    let runs = config
        .seeds
        .iter()
        .map(|&seed| run_seed(config, &mdp, seed))
        .collect::<Result<Vec<_>>>()?;
    if let Some(out) = &config.out {
        write_outputs(config, &mdp, &runs, out)?;
    }
    Ok(runs)
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

fn header(config: &ExperimentConfig) -> String {
    config
        .to_pairs()
        .into_iter()
        .map(|(k, v)| format!("# {k}={v}\n"))
        .collect()
}

/// Writes one trace CSV with the effective config as `#` lines.
pub fn write_trace(path: &Path, config: &ExperimentConfig, rows: &[TraceRow]) -> Result<()> {
    let mut text = header(config);
    text.push_str(TRACE_COLUMNS);
    text.push('\n');
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            r.step, r.j_true, r.bellman_residual, r.mean_entropy, r.seed
        ));
    }
    create(path)?.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_outputs(config: &ExperimentConfig, mdp: &TabularMdp, runs: &[ExperimentRun], out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let name = config.agent.name();
    let na = mdp.n_actions();
    for run in runs {
        write_trace(&out.join(format!("{name}-seed{}.csv", run.seed)), config, &run.rows)?;

        let policy = run.policies.last().expect("at least the step-0 row");
        let mut text = header(config);
        text.push_str("state,action,theta,w,prob\n");
        for s in 0..mdp.n_states() {
            for a in 0..na {
                text.push_str(&format!(
                    "{s},{a},{},{},{}\n",
                    run.final_theta[s * na + a],
                    run.final_w[s],
                    policy.prob(s, a)
                ));
            }
        }
        let path = out.join(format!("{name}-seed{}-policy.csv", run.seed));
        create(&path)?.write_all(text.as_bytes()).map_err(|e| Error::io(&path, e))?;
    }

    let j_star = optimal_performance(mdp)?;
    let mut text = header(config);
    text.push_str("agent,seed,final_j_true,auc,j_star\n");
    for run in runs {
        text.push_str(&format!("{name},{},{},{},{j_star}\n", run.seed, run.final_j(), run.auc()));
    }
    let path = out.join(format!("{name}-summary.csv"));
    create(&path)?.write_all(text.as_bytes()).map_err(|e| Error::io(&path, e))
}

/// Parsed trace file: header settings plus rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub settings: Vec<(String, String)>,
    pub rows: Vec<TraceRow>,
}

impl TraceFile {
    pub fn setting(&self, key: &str) -> Option<&str> {
        self.settings.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

pub fn read_trace(path: &Path) -> Result<TraceFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trace(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_trace(text: &str) -> Result<TraceFile> {
    let mut settings = Vec::new();
    let mut rows = Vec::new();
    let mut seen_columns = false;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('=') {
                settings.push((k.to_string(), v.to_string()));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        if !seen_columns {
            if line != TRACE_COLUMNS {
                return Err(Error::Parse(format!("line {}: expected header {TRACE_COLUMNS:?}", i + 1)));
            }
            seen_columns = true;
            continue;
        }
        let bad = || Error::Parse(format!("line {}: malformed row {line:?}", i + 1));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad());
        }
        rows.push(TraceRow {
            step: f[0].parse().map_err(|_| bad())?,
            j_true: f[1].parse().map_err(|_| bad())?,
            bellman_residual: f[2].parse().map_err(|_| bad())?,
            mean_entropy: f[3].parse().map_err(|_| bad())?,
            seed: f[4].parse().map_err(|_| bad())?,
        });
    }
    if !seen_columns {
        return Err(Error::Parse("missing column header".into()));
    }
    Ok(TraceFile { settings, rows })
}
