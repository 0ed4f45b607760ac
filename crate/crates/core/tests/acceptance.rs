//! Acceptance checks, one test per criterion. Each writes a single
//! `criterion N: PASS|FAIL ...` line to stderr (bypassing capture) before
//! asserting, so a full `cargo test` log lists all ten.

use std::io::Write;
use std::time::Instant;

use rand::Rng;

use drac::agents::actor::{deterministic_gradient, deterministic_objective, sac_gradient, sac_objective};
use drac::agents::{AgentConfig, Policy, PolicyKind, RoundReport, RunSchedule, SacNoise, Trainer};
use drac::approx::{Activation, Mlp, OutputActivation, ParameterVector};
use drac::dr_critic::{CriticConfig, CriticMode, DrCritic};
use drac::envs::{make_env, NoiseConfig, TabularMdp};
use drac::harness::{run_config, MetricsRow, RunConfig};
use drac::ope::{
    build_model, constant_policy, dm_estimate, dr_sequential, estimator_study, is_estimate, sample_trajectory,
    Estimator, MdpModel, ModelQuality, StudySetup,
};
use drac::replay::Transition;
use drac::reward_model::{QvConfig, QvModel, RewardNet};
use drac::rng::from_seed;

fn report(n: u32, pass: bool, detail: &str, start: Instant) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {n}: {verdict} {detail} [{:.1}s]\n", start.elapsed().as_secs_f64());
    let _ = std::io::stderr().write_all(line.as_bytes());
}

// ---------------------------------------------------------------- 1

const FD_STEP: f64 = 1e-5;
const FD_COORDS: usize = 12;

/// Worst relative error between `analytic` and central differences of `f`
/// over `FD_COORDS` random coordinates.
fn fd_worst(
    f: impl Fn(&ParameterVector<f64>) -> f64,
    params: &ParameterVector<f64>,
    analytic: &ParameterVector<f64>,
    rng: &mut impl Rng,
) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..FD_COORDS {
        let i = rng.random_range(0..params.len());
        let mut up = params.clone();
        up.values_mut()[i] += FD_STEP;
        let mut down = params.clone();
        down.values_mut()[i] -= FD_STEP;
        let numeric = (f(&up) - f(&down)) / (2.0 * FD_STEP);
        let a = analytic.values()[i];
        let scale = a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((a - numeric).abs() / scale);
    }
    worst
}

fn random_transitions(n: usize, obs_dim: usize, action_dim: usize, rng: &mut impl Rng) -> Vec<Transition> {
    (0..n)
        .map(|i| Transition {
            obs: (0..obs_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            action: (0..action_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            reward: rng.random_range(-2.0..2.0),
            next_obs: (0..obs_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            done: i % 7 == 0,
            truncated: false,
        })
        .collect()
}

fn small_critic(twin: bool, rng: &mut impl Rng) -> DrCritic {
    let config = CriticConfig {
        gamma: 0.99,
        tau: 0.005,
        learning_rate: 1e-3,
        twin,
        entropy_coeff: 0.2,
        target_clip: None,
    };
    DrCritic::new(3, 2, &[16, 16], CriticMode::Dr, config, rng).unwrap()
}

#[test]
fn criterion_1_gradients_match_finite_differences() {
    let start = Instant::now();
    let mut rng = from_seed(101);
    let data = random_transitions(24, 3, 2, &mut rng);
    let batch: Vec<&Transition> = data.iter().collect();
    let states: Vec<&[f64]> = data.iter().map(|t| t.obs.as_slice()).collect();
    let targets: Vec<f64> = (0..batch.len()).map(|_| rng.random_range(-3.0..3.0)).collect();
    let mut results = Vec::new();

    let reward = RewardNet::new(3, 2, &[16, 16], 1e-3, &mut rng).unwrap();
    let p = reward.mlp.init(&mut rng);
    let (_, g) = reward.loss_and_gradient(&p, &batch).unwrap();
    results.push(("reward", fd_worst(|q| reward.loss_with(q, &batch).unwrap(), &p, &g, &mut rng)));

    let qv = QvModel::new(
        3,
        2,
        &[16, 16],
        QvConfig {
            gamma: 0.99,
            tau: 0.01,
            learning_rate: 1e-3,
        },
        &mut rng,
    )
    .unwrap();
    let p = qv.q_mlp.init(&mut rng);
    let (_, g) = qv.q_loss_and_gradient(&p, &targets, &batch).unwrap();
    results.push(("q_model", fd_worst(|q| qv.q_loss_with(q, &targets, &batch).unwrap(), &p, &g, &mut rng)));
    let p = qv.v_mlp.init(&mut rng);
    let (_, g) = qv.v_loss_and_gradient(&p, &targets, &batch).unwrap();
    results.push(("v_model", fd_worst(|q| qv.v_loss_with(q, &targets, &batch).unwrap(), &p, &g, &mut rng)));

    let critic = small_critic(false, &mut rng);
    let p = critic.mlp.init(&mut rng);
    let (_, g) = critic.loss_and_gradient(&p, &targets, &batch).unwrap();
    results.push(("critic", fd_worst(|q| critic.loss_with(q, &targets, &batch).unwrap(), &p, &g, &mut rng)));

    let policy = Policy::new(PolicyKind::Deterministic, 3, 2, 1.5, &[16, 16], 1e-3, &mut rng).unwrap();
    let p = policy.params.clone();
    let (_, g) = deterministic_gradient(&policy, &p, &critic, &states).unwrap();
    results.push((
        "actor_det",
        fd_worst(|q| deterministic_objective(&policy, q, &critic, &states).unwrap(), &p, &g, &mut rng),
    ));

    let twin = small_critic(true, &mut rng);
    let gauss = Policy::new(PolicyKind::SquashedGaussian, 3, 2, 1.5, &[16, 16], 1e-3, &mut rng).unwrap();
    let eps: Vec<Vec<f64>> = states
        .iter()
        .map(|_| (0..2).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let noise = SacNoise { eps: &eps, alpha: 0.2 };
    let p = gauss.params.clone();
    let (_, g) = sac_gradient(&gauss, &p, &twin, &states, &noise).unwrap();
    results.push((
        "actor_sac",
        fd_worst(|q| sac_objective(&gauss, q, &twin, &states, &noise).unwrap(), &p, &g, &mut rng),
    ));

    let pass = results.iter().all(|(_, e)| *e <= 1e-4);
    let detail: Vec<String> = results.iter().map(|(n, e)| format!("{n}={e:.1e}")).collect();
    report(1, pass, &format!("worst rel err {} (tol 1e-4)", detail.join(" ")), start);
    assert!(pass, "{results:?}");
}

// ---------------------------------------------------------------- 2

fn collect_rounds(mut t: Trainer, rounds: usize) -> (Vec<RoundReport>, Trainer) {
    let mut out = Vec::new();
    while out.len() < rounds {
        out.extend(t.env_step().unwrap());
    }
    out.truncate(rounds);
    (out, t)
}

fn bits(xs: &[f64]) -> Vec<u64> {
    xs.iter().map(|x| x.to_bits()).collect()
}

#[test]
fn criterion_2_zero_model_dr_matches_baseline() {
    let start = Instant::now();
    let dr = AgentConfig {
        critic_mode: CriticMode::Dr,
        freeze_model: true,
        ..AgentConfig::default()
    };
    let td = AgentConfig {
        critic_mode: CriticMode::BaselineTd,
        ..AgentConfig::default()
    };
    let new = |c: &AgentConfig| Trainer::new(make_env("pendulum").unwrap(), NoiseConfig::clean(), c.clone(), 7).unwrap();
    let (a, ta) = collect_rounds(new(&dr), 100);
    let (b, tb) = collect_rounds(new(&td), 100);
    let mut mismatches = 0;
    for (x, y) in a.iter().zip(&b) {
        let same = bits(&x.targets.targets) == bits(&y.targets.targets)
            && bits(&x.targets.corrections) == bits(&y.targets.corrections)
            && x.critic_loss.to_bits() == y.critic_loss.to_bits()
            && x.actor_objective.map(f64::to_bits) == y.actor_objective.map(f64::to_bits)
            && x.ac_slots == y.ac_slots;
        mismatches += usize::from(!same);
    }
    let params_same = ta.policy.params == tb.policy.params && ta.critic.heads[0].params == tb.critic.heads[0].params;

    let schedule = RunSchedule {
        total_steps: dr.warmup_steps + 99,
        eval_interval: 20,
        eval_episodes: 2,
        seed: 7,
        record_wall_time: false,
    };
    let rows_a: Vec<String> = new(&dr).run_with(&schedule, |_| {}).unwrap().iter().map(MetricsRow::to_csv_line).collect();
    let rows_b: Vec<String> = new(&td).run_with(&schedule, |_| {}).unwrap().iter().map(MetricsRow::to_csv_line).collect();
    let pass = a.len() == 100 && mismatches == 0 && params_same && !rows_a.is_empty() && rows_a == rows_b;
    report(
        2,
        pass,
        &format!(
            "{} rounds, {mismatches} target/loss mismatches, params identical={params_same}, {} metric rows identical={}",
            a.len(),
            rows_a.len(),
            rows_a == rows_b
        ),
        start,
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 3

/// Finite-horizon value by backward recursion, written out independently.
fn horizon_value(mdp: &TabularMdp<f64>, pi: &[Vec<f64>], horizon: usize) -> f64 {
    let n = mdp.n_states();
    let mut v = vec![0.0; n];
    for _ in 0..horizon {
        let mut next = vec![0.0; n];
        for s in 0..n {
            for a in 0..mdp.n_actions() {
                let mut q = mdp.reward(s, a);
                for (s2, p) in mdp.transition(s, a).iter().enumerate() {
                    q += mdp.discount() * p * v[s2];
                }
                next[s] += pi[s][a] * q;
            }
        }
        v = next;
    }
    (0..n).map(|s| mdp.initial_distribution()[s] * v[s]).sum()
}

#[test]
fn criterion_3_sequential_dr_is_unbiased() {
    let start = Instant::now();
    let mdp = TabularMdp::<f64>::chain(5, 0.9).unwrap();
    let pi = constant_policy::<f64>(5, 0.8);
    let beta = constant_policy::<f64>(5, 0.5);
    let oracle = horizon_value(&mdp, &pi, 10);
    let setup = StudySetup {
        mdp: &mdp,
        pi: &pi,
        beta: &beta,
        horizon: 10,
        n_trajectories: 10,
        n_resamples: 10_000,
        seed: 3,
    };
    let mut pass = true;
    let mut detail = format!("V_pi={oracle:.5}");
    let mut var_exact = f64::NAN;
    let mut var_is = f64::NAN;
    for quality in [ModelQuality::Exact, ModelQuality::Zero, ModelQuality::Perturbed(0.3)] {
        let r = estimator_study(&setup, quality).unwrap();
        let dr = r.get(Estimator::Dr);
        let z = (dr.mean - oracle).abs() / dr.std_error;
        pass &= (r.truth - oracle).abs() < 1e-12 && z <= 3.0;
        detail.push_str(&format!(" {}: |dr-V|/se={z:.2}", quality.label()));
        if quality == ModelQuality::Exact {
            var_exact = dr.variance;
            var_is = r.get(Estimator::Is).variance;
        }
    }
    pass &= var_exact <= var_is;
    detail.push_str(&format!(" var_dr_exact={var_exact:.4} var_is={var_is:.4}"));
    report(3, pass, &detail, start);
    assert!(pass, "{detail}");
}

// ---------------------------------------------------------------- 4

#[test]
fn criterion_4_dr_reductions_are_exact() {
    let start = Instant::now();
    let mdp = TabularMdp::<f64>::chain(5, 0.9).unwrap();
    let mut rng = from_seed(44);

    // pi never takes the logged action, so every weight is zero
    let never_right = constant_policy::<f64>(5, 0.0);
    let always_right = constant_policy::<f64>(5, 1.0);
    let model = build_model(&mdp, &constant_policy::<f64>(5, 0.8), ModelQuality::Perturbed(0.7), &mut rng).unwrap();
    let dm = dm_estimate(&model, mdp.initial_distribution()).unwrap();
    let mut dm_mismatch = 0;
    for _ in 0..500 {
        let traj = sample_trajectory(&mdp, &always_right, 10, &mut rng).unwrap();
        let dr = dr_sequential(&traj, &never_right, &model).unwrap();
        dm_mismatch += usize::from(dr.to_bits() != dm.to_bits());
    }

    let pi = constant_policy::<f64>(5, 0.8);
    let beta = constant_policy::<f64>(5, 0.5);
    let zero = MdpModel::zeros(5, 2, mdp.discount());
    let mut is_mismatch = 0;
    for _ in 0..2000 {
        let traj = sample_trajectory(&mdp, &beta, 10, &mut rng).unwrap();
        let dr = dr_sequential(&traj, &pi, &zero).unwrap();
        let is = is_estimate(&traj, &pi, mdp.discount()).unwrap();
        is_mismatch += usize::from(dr.to_bits() != is.to_bits());
    }
    let pass = dm_mismatch == 0 && is_mismatch == 0;
    report(
        4,
        pass,
        &format!("rho=0: {dm_mismatch}/500 DR!=DM; zero model: {is_mismatch}/2000 DR!=IS"),
        start,
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 5

#[test]
fn criterion_5_reward_model_denoises() {
    let start = Instant::now();
    let noise = NoiseConfig { mu: 0.0, sigma: 1.0 };
    let mut t = Trainer::new(make_env("constant").unwrap(), noise, AgentConfig::default(), 5).unwrap();
    while t.env_steps() < 3000 {
        t.env_step().unwrap();
    }
    let clean = 1.0;
    let mut sq = 0.0;
    let observed: Vec<f64> = t.buffer.iter_chronological().map(|tr| tr.reward).collect();
    for tr in t.buffer.iter_chronological() {
        let e = t.reward.predict_reward(&tr.obs, &tr.action).unwrap() - clean;
        sq += e * e;
    }
    let n = observed.len() as f64;
    let rmse = (sq / n).sqrt();
    let mean = observed.iter().sum::<f64>() / n;
    let std = (observed.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0)).sqrt();
    let pass = rmse <= 0.33 && (std - 1.0).abs() <= 0.05;
    report(
        5,
        pass,
        &format!("rmse(R^, clean)={rmse:.4} (tol 0.33) observed noise std={std:.4} over {} transitions", observed.len()),
        start,
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 6

#[test]
fn criterion_6_model_reaches_geometric_fixed_point() {
    let start = Instant::now();
    let gamma: f64 = 0.9;
    let expected: f64 = (0..2000).map(|k| gamma.powi(k)).sum();
    let mut rng = from_seed(6);
    let mut reward = RewardNet::new(1, 1, &[16, 16], 1e-3, &mut rng).unwrap();
    let last = reward.mlp.num_layers() - 1;
    reward.params.set_bias(last, 0, 1.0);
    let policy = Policy::new(PolicyKind::Deterministic, 1, 1, 1.0, &[16, 16], 1e-3, &mut rng).unwrap();
    let mut qv = QvModel::new(
        1,
        1,
        &[16, 16],
        QvConfig {
            gamma,
            tau: 0.01,
            learning_rate: 1e-3,
        },
        &mut rng,
    )
    .unwrap();
    let data: Vec<Transition> = (0..64)
        .map(|_| Transition {
            obs: vec![0.0],
            action: vec![rng.random_range(-1.0..1.0)],
            reward: 1.0,
            next_obs: vec![0.0],
            done: false,
            truncated: false,
        })
        .collect();
    let batch: Vec<&Transition> = data.iter().collect();
    for _ in 0..20_000 {
        qv.train_qv_step(&reward, &policy, &batch).unwrap();
    }
    let a_pi = policy.act(&[0.0]).unwrap();
    let mut worst: f64 = (qv.predict_q(&[0.0], &a_pi).unwrap() - expected).abs();
    for a in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        worst = worst.max((qv.predict_q(&[0.0], &[a]).unwrap() - expected).abs());
    }
    let v_err = (qv.predict_v(&[0.0]).unwrap() - expected).abs();
    let pass = worst <= 0.1 && v_err <= 0.1;
    report(
        6,
        pass,
        &format!("target {expected:.4}: max |Q^-target|={worst:.4} |V^-target|={v_err:.4} (tol 0.1)"),
        start,
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 7, 8

/// Mean over the last two evaluation rows.
fn final_return(rows: &[MetricsRow]) -> f64 {
    let tail = &rows[rows.len().saturating_sub(2)..];
    tail.iter().map(|r| r.eval_return_mean).sum::<f64>() / tail.len() as f64
}

fn pendulum_run(critic: &str, sigma: f64, seed: u64) -> f64 {
    let sigma = sigma.to_string();
    let seed = seed.to_string();
    let config = RunConfig::from_pairs([
        ("env", "pendulum"),
        ("agent", "ddpg"),
        ("critic", critic),
        ("sigma", sigma.as_str()),
        ("steps", "30000"),
        ("seed", seed.as_str()),
    ])
    .unwrap();
    final_return(&run_config(&config, 0).unwrap())
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt())
}

#[test]
fn criterion_7_ddpg_dr_swings_up_pendulum() {
    let start = Instant::now();
    let finals: Vec<f64> = (0..3).map(|s| pendulum_run("dr", 0.0, s)).collect();
    let (mean, _) = mean_std(&finals);
    let pass = mean >= -300.0;
    report(
        7,
        pass,
        &format!("DDPG+DR final returns {finals:.1?} mean={mean:.1} (threshold -300)"),
        start,
    );
    assert!(pass);
}

#[test]
fn criterion_8_dr_beats_baseline_under_reward_noise() {
    let start = Instant::now();
    let seeds = 0..5;
    let dr: Vec<f64> = seeds.clone().map(|s| pendulum_run("dr", 1.0, s)).collect();
    let td: Vec<f64> = seeds.map(|s| pendulum_run("td", 1.0, s)).collect();
    let (dm, ds) = mean_std(&dr);
    let (tm, ts) = mean_std(&td);
    let pass = dm >= tm && ds <= ts;
    report(
        8,
        pass,
        &format!("sigma=1: DR {dr:.1?} mean={dm:.1} std={ds:.1}; baseline {td:.1?} mean={tm:.1} std={ts:.1}"),
        start,
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 9

fn fixed_head_policy(mean: f64, log_std: f64) -> Policy {
    let mlp = Mlp::new(vec![1, 2], Activation::Relu, OutputActivation::Identity).unwrap();
    let mut p = mlp.zeros();
    p.set_bias(0, 0, mean);
    p.set_bias(0, 1, log_std);
    Policy::from_parts(PolicyKind::SquashedGaussian, mlp, p, 1.0, 1e-3).unwrap()
}

#[test]
fn criterion_9_squashed_density_integrates_to_one() {
    let start = Instant::now();
    let n = 1_000_000;
    let width = 2.0 / n as f64;
    let mut detail = String::new();
    let mut pass = true;
    for (mean, log_std) in [(0.0, 0.0), (0.5, -1.0), (-1.0, 0.5), (2.0, -0.5), (0.0, -3.0)] {
        let policy = fixed_head_policy(mean, log_std);
        let mut total = 0.0;
        for i in 0..n {
            let y: f64 = -1.0 + (i as f64 + 0.5) * width;
            let u = y.atanh();
            total += policy.sac_log_prob(&[0.0], &[u]).unwrap().exp() * width;
        }
        pass &= (total - 1.0).abs() <= 0.02;
        detail.push_str(&format!(" ({mean},{log_std})={total:.5}"));
    }
    report(9, pass, &format!("midpoint integrals over 1e6 cells:{detail} (tol 0.02)"), start);
    assert!(pass);
}

// ---------------------------------------------------------------- 10

#[test]
fn criterion_10_train_is_reproducible() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 3] = [
        &["--agent", "ddpg", "--critic", "dr", "--noise-sigma", "0.5"],
        &["--agent", "td3", "--critic", "td"],
        &["--agent", "sac", "--critic", "dr", "--noise-sigma", "1.0"],
    ];
    let mut identical = 0;
    for (i, case) in cases.iter().enumerate() {
        let mut files = Vec::new();
        for rep in 0..2 {
            let out = dir.path().join(format!("{i}_{rep}"));
            let status = std::process::Command::new(env!("CARGO_BIN_EXE_drac"))
                .args(["train", "--env", "pendulum", "--steps", "1300", "--seed", "11"])
                .args(*case)
                .args(["--set", "eval_interval=100", "--out"])
                .arg(&out)
                .output()
                .unwrap();
            assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
            let path = std::fs::read_dir(&out).unwrap().next().unwrap().unwrap().path();
            files.push(std::fs::read(path).unwrap());
        }
        identical += usize::from(files[0] == files[1] && !files[0].is_empty());
    }
    let pass = identical == cases.len();
    report(10, pass, &format!("{identical}/{} configurations byte-identical across repeats", cases.len()), start);
    assert!(pass);
}
