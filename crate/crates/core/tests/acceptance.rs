//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pgql::agents::{
    equivalence_run, AgentConfig, AgentState, EquivalenceConfig, MeasureMode, ParamDelta, ReplayBuffer, Transition,
};
use pgql::envs::{garnet_generate, gridworld_to_mdp, GarnetSpec, GridWorldSpec};
use pgql::fixed_point::{
    bellman_residual_report, q_tilde_from_policy, solve_pgql_fixed_point, solve_qtilde_modified,
    solve_regularized_fixed_point, verify_appendix_bounds, CHAIN_SLACK,
};
use pgql::harness::{run_async, run_experiment, AgentKind, ExperimentConfig, ExperimentRun, SharedParams, SharedReplay};
use pgql::mdp::{
    apply_bellman_star, evaluate_policy, exact_policy_gradient, optimal_performance, policy_performance,
    softmax_policy, solve_q_star, DistributionMode, TabularMdp,
};
use pgql::tables::{QTable, TabularPolicy, VTable};

const SOLVER_TOL: f64 = 1e-10;
const DAMPING: f64 = 0.1;
const ALPHAS: [f64; 3] = [1.0, 0.1, 0.01];
const ETAS: [f64; 3] = [0.25, 0.5, 0.75];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn garnet(seed: u64) -> TabularMdp {
    garnet_generate(&GarnetSpec {
        n_states: 10,
        n_actions: 4,
        branching: 3,
        gamma: 0.9,
        seed,
    })
    .unwrap()
}

fn residual_bound() -> Outcome {
    let start = Instant::now();
    let mut worst_low = f64::INFINITY;
    let mut worst_margin = f64::INFINITY;
    let mut failures = 0;
    for seed in 0..20 {
        let mdp = garnet(seed);
        for alpha in ALPHAS {
            let fp = solve_regularized_fixed_point(&mdp, alpha, SOLVER_TOL, DAMPING).unwrap();
            let report = bellman_residual_report(&mdp, &fp, alpha).unwrap();
            worst_low = worst_low.min(report.residual_min);
            worst_margin = worst_margin.min(report.bound - report.residual_max);
            if !report.residual_bound_holds(1e-8) {
                failures += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures == 0 && elapsed < Duration::from_secs(10),
        format!(
            "60 instances, {failures} violations, min residual {worst_low:.2e}, min bound margin {worst_margin:.3e}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn limit_behavior() -> Outcome {
    let mut failures = 0;
    let mut worst_ratio: f64 = 0.0;
    for seed in 0..20 {
        let mdp = garnet(seed);
        let q_star = solve_q_star(&mdp, 1e-13).unwrap();
        let gap = |alpha| {
            let fp = solve_regularized_fixed_point(&mdp, alpha, SOLVER_TOL, DAMPING).unwrap();
            fp.q_pi.sup_distance(&q_star)
        };
        let (hot, cold) = (gap(1.0), gap(0.01));
        worst_ratio = worst_ratio.max(cold / hot);
        if cold >= hot || cold.is_nan() {
            failures += 1;
        }
    }
    outcome(
        failures == 0,
        format!("20 instances, {failures} not improved, worst gap ratio (α=0.01 / α=1) {worst_ratio:.3e}"),
    )
}

fn one_state() -> TabularMdp {
    TabularMdp::new(1, 2, vec![1.0, 1.0], vec![0.0, 1.0], 0.5, vec![false], vec![1.0]).unwrap()
}

fn modified_fixed_point() -> Outcome {
    let mut worst_eq: f64 = 0.0;
    let mut chain_failures = 0;
    for seed in 0..20 {
        let mdp = garnet(seed);
        for alpha in ALPHAS {
            for eta in ETAS {
                let fp = solve_pgql_fixed_point(&mdp, alpha, eta, SOLVER_TOL, DAMPING).unwrap();
                let star = apply_bellman_star(&fp.q_tilde, &mdp).unwrap();
                let rhs = QTable::from_fn(mdp.n_states(), mdp.n_actions(), |s, a| {
                    (1.0 - eta) * fp.q_pi.get(s, a) + eta * star.get(s, a)
                });
                worst_eq = worst_eq.max(fp.q_tilde.sup_distance(&rhs));
                let report = verify_appendix_bounds(&mdp, &fp, alpha, eta, mdp.gamma()).unwrap();
                if !report.chains_hold(CHAIN_SLACK) {
                    chain_failures += 1;
                }
            }
        }
    }
    // Hand-solved: Q̃₁ = 0.75 + 0.5 + 0.25·Q̃₁ and Q̃₀ = 0.25 + 0.25·Q̃₁.
    let q_pi = QTable::from_vec(1, 2, vec![0.5, 1.5]).unwrap();
    let q = solve_qtilde_modified(&q_pi, 0.5, &one_state(), 1e-12).unwrap();
    let example_err = (q.get(0, 0) - 2.0 / 3.0).abs().max((q.get(0, 1) - 5.0 / 3.0).abs());
    outcome(
        worst_eq <= 1e-8 && chain_failures == 0 && example_err <= 1e-9,
        format!(
            "180 instances, fixed-point gap {worst_eq:.2e}, {chain_failures} chain violations, worked example error {example_err:.1e}"
        ),
    )
}

fn equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut frozen_min = f64::INFINITY;
    for seed in 0..10 {
        let cfg = EquivalenceConfig::new(seed, 6, 3, 100);
        worst = worst.max(equivalence_run(&cfg).unwrap());
        let frozen = EquivalenceConfig {
            measure: MeasureMode::FrozenInitial,
            ..cfg
        };
        frozen_min = frozen_min.min(equivalence_run(&frozen).unwrap());
    }
    outcome(
        worst <= 1e-12 && frozen_min > 1e-6,
        format!("max discrepancy {worst:.2e} over 10 seeds; frozen measure min discrepancy {frozen_min:.2e}"),
    )
}

fn roundtrip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (n, na) = (rng.random_range(1..6), rng.random_range(2..6));
        let alpha = 10f64.powf(rng.random_range(-2.0..1.0));
        let q = QTable::from_fn(n, na, |_, _| rng.random_range(-5.0..5.0));
        let pi = softmax_policy(&q, alpha).unwrap();
        let v = VTable::new((0..n).map(|s| pi.expectation(s, q.row(s))).collect());
        let back = q_tilde_from_policy(&pi, &v, alpha).unwrap();
        worst = worst.max(back.sup_distance(&q));
    }
    outcome(worst <= 1e-10, format!("1000 pairs, max error {worst:.2e}"))
}

fn gradient() -> Outcome {
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let mdp = garnet_generate(&GarnetSpec {
            n_states: 5,
            n_actions: 3,
            branching: 2,
            gamma: 0.9,
            seed: 100 + seed,
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let logits = QTable::from_fn(5, 3, |_, _| rng.random_range(-1.0..1.0));
        let exact = exact_policy_gradient(
            &mdp,
            &TabularPolicy::from_logits(logits.clone()),
            0.0,
            DistributionMode::DiscountedUnnormalized,
        )
        .unwrap();
        let j = |w: &QTable| policy_performance(&mdp, &TabularPolicy::from_logits(w.clone())).unwrap();
        let fd = QTable::from_fn(5, 3, |s, a| {
            let (mut plus, mut minus) = (logits.clone(), logits.clone());
            plus.set(s, a, logits.get(s, a) + h);
            minus.set(s, a, logits.get(s, a) - h);
            (j(&plus) - j(&minus)) / (2.0 * h)
        });
        worst = worst.max(exact.sup_distance(&fd) / fd.sup_norm());
    }
    outcome(worst <= 1e-5, format!("10 MDPs, max relative error {worst:.2e}"))
}

fn grid_config(agent: AgentKind) -> ExperimentConfig {
    ExperimentConfig {
        agent,
        ..ExperimentConfig::default()
    }
}

fn grid_world() -> Outcome {
    let start = Instant::now();
    let mdp = gridworld_to_mdp(&GridWorldSpec::default()).unwrap();
    let j_star = optimal_performance(&mdp).unwrap();
    // Shortest path is 8 moves; only the last one is rewarded.
    let j_star_oracle = 0.95f64.powi(7);
    let run = |kind| run_experiment(&grid_config(kind)).unwrap();
    let (pgql, ac, q) = (run(AgentKind::Pgql), run(AgentKind::ActorCritic), run(AgentKind::QLearning));
    let elapsed = start.elapsed();
    let near_opt = pgql.iter().filter(|r| r.final_j() >= 0.95 * j_star).count();
    let auc_wins = (0..pgql.len())
        .filter(|&i| pgql[i].auc() >= ac[i].auc() && pgql[i].auc() >= q[i].auc())
        .count();
    let aucs = |runs: &[ExperimentRun]| runs.iter().map(|r| format!("{:.3}", r.auc())).collect::<Vec<_>>().join("/");
    outcome(
        near_opt >= 4 && auc_wins >= 3 && (j_star - j_star_oracle).abs() < 1e-9 && elapsed < Duration::from_secs(120),
        format!(
            "J* {j_star:.5}, pgql ≥ 0.95·J* on {near_opt}/5, best AUC on {auc_wins}/5 (pgql {} ac {} q {}), {:.1}s",
            aucs(&pgql),
            aucs(&ac),
            aucs(&q),
            elapsed.as_secs_f64()
        ),
    )
}

fn bits(runs: &[ExperimentRun]) -> Vec<(u64, u64, u64, u64)> {
    runs.iter()
        .flat_map(|r| &r.rows)
        .map(|row| {
            (
                row.step,
                row.j_true.to_bits(),
                row.bellman_residual.to_bits(),
                row.mean_entropy.to_bits(),
            )
        })
        .collect()
}

fn replay_checks() -> bool {
    let t = |s| Transition {
        s,
        a: 0,
        r: 0.0,
        s_next: s,
        done: false,
    };
    let mut buf = ReplayBuffer::new(3).unwrap();
    (0..5).for_each(|s| buf.push(t(s)));
    let fifo = buf.iter().map(|x| x.s).collect::<Vec<_>>() == vec![2, 3, 4];

    let mut buf = ReplayBuffer::new(10).unwrap();
    (0..10).for_each(|s| buf.push(t(s)));
    let n = 100_000;
    let mut counts = [0.0f64; 10];
    for x in buf.sample(n, &mut ChaCha8Rng::seed_from_u64(8)).unwrap() {
        counts[x.s] += 1.0;
    }
    let expected = n as f64 / 10.0;
    let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
    // 99.9% quantile of χ² with 9 degrees of freedom.
    fifo && chi2 < 27.877
}

/// Writers add all-ones deltas; readers must only ever see `θ = w = updates·1`.
fn no_torn_updates() -> bool {
    let (n, na) = (8, 4);
    let params = Arc::new(SharedParams::new(AgentState::new(n, na, AgentConfig::default()).unwrap()));
    let torn = Arc::new(AtomicBool::new(false));
    let delta = ParamDelta {
        theta: vec![1.0; n * na],
        w: vec![1.0; n],
    };
    thread::scope(|scope| {
        for _ in 0..4 {
            scope.spawn(|| {
                for _ in 0..2000 {
                    params.update(|agent| agent.apply(&delta, 1.0));
                }
            });
        }
        for _ in 0..2 {
            scope.spawn(|| {
                for _ in 0..2000 {
                    let (theta, w, updates) = params.snapshot();
                    let k = updates as f64;
                    if theta.iter().chain(&w).any(|&x| x != k) {
                        torn.store(true, Ordering::SeqCst);
                    }
                }
            });
        }
    });
    let (theta, _, updates) = params.snapshot();
    !torn.load(Ordering::SeqCst) && updates == 8000 && theta[0] == 8000.0
}

fn replay_capacity_under_contention() -> bool {
    let replay = SharedReplay::new(64).unwrap();
    let over = AtomicBool::new(false);
    thread::scope(|scope| {
        for w in 0..4 {
            let (replay, over) = (&replay, &over);
            scope.spawn(move || {
                for i in 0..5000 {
                    replay.push(Transition {
                        s: w,
                        a: 0,
                        r: i as f64,
                        s_next: w,
                        done: false,
                    });
                    if replay.len() > replay.capacity() {
                        over.store(true, Ordering::SeqCst);
                    }
                }
            });
        }
    });
    !over.load(Ordering::SeqCst) && replay.len() == 64
}

fn determinism_and_async() -> Outcome {
    let small = ExperimentConfig {
        steps: 3000,
        seeds: vec![0, 1],
        ..ExperimentConfig::default()
    };
    let a = run_experiment(&small).unwrap();
    let b = run_experiment(&small).unwrap();
    let reproducible = bits(&a) == bits(&b);

    // Re-evaluating a checkpointed policy reproduces its row.
    let mdp = small.env.build().unwrap();
    let recheck = a.iter().all(|run| {
        run.rows.iter().zip(&run.policies).all(|(row, pi)| {
            let (_, v) = evaluate_policy(&mdp, pi, 1e-13).unwrap();
            let j: f64 = mdp.initial_dist().iter().zip(v.as_slice()).map(|(p, v)| p * v).sum();
            (j - row.j_true).abs() <= 1e-10
        })
    });

    let replay_ok = replay_checks();
    let j_star = optimal_performance(&mdp).unwrap();
    let async_cfg = ExperimentConfig {
        workers: 4,
        ..ExperimentConfig::default()
    };
    let runs = run_async(&async_cfg).unwrap();
    let good = runs.iter().filter(|r| r.final_j() >= 0.90 * j_star).count();
    let torn_ok = no_torn_updates();
    let capacity_ok = replay_capacity_under_contention();
    outcome(
        reproducible && recheck && replay_ok && 2 * good > runs.len() && torn_ok && capacity_ok,
        format!(
            "bit-reproducible {reproducible}, checkpoint re-evaluation {recheck}, replay {replay_ok}, \
             async ≥ 0.90·J* on {good}/{}, no torn updates {torn_ok}, capacity held {capacity_ok}",
            runs.len()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 residual bound", residual_bound),
        ("2 limit behavior", limit_behavior),
        ("3 modified fixed point", modified_fixed_point),
        ("4 equivalence", equivalence),
        ("5 roundtrip identity", roundtrip),
        ("6 gradient", gradient),
        ("7 grid world", grid_world),
        ("8 determinism and replay", determinism_and_async),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let Outcome { passed, detail } = check();
        if !passed {
            failed += 1;
        }
        println!("{} criterion {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
