//! Property tests for the module invariants.

use proptest::prelude::*;
use rand::Rng;

use drac::agents::{actor_update, ActorObjective, Policy, PolicyKind};
use drac::approx::{polyak_update, Activation, AdamState, LossTarget, Mlp, OutputActivation, ParameterVector, Sample};
use drac::dr_critic::{CriticConfig, CriticMode, DrCritic, NextActions};
use drac::envs::{make_env, tabular_policy_value, wrap_noisy, Environment, NoiseConfig, TabularMdp};
use drac::harness::{metrics_to_csv, parse_metrics_csv, MetricsRow};
use drac::ope::{
    build_model, constant_policy, dm_estimate, dr_sequential, is_estimate, sample_trajectory, MdpModel,
    ModelQuality,
};
use drac::replay::{ReplayBuffer, Transition};
use drac::reward_model::{QvConfig, QvModel, RewardNet};
use drac::rng::from_seed;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 32,
        ..ProptestConfig::default()
    }
}

fn transitions(n: usize, obs_dim: usize, action_dim: usize, rng: &mut impl Rng) -> Vec<Transition> {
    (0..n)
        .map(|_| Transition {
            obs: (0..obs_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            action: (0..action_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            reward: rng.random_range(-2.0..2.0),
            next_obs: (0..obs_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            done: rng.random_bool(0.1),
            truncated: false,
        })
        .collect()
}

fn critic(twin: bool, seed: u64) -> DrCritic {
    let cfg = CriticConfig {
        gamma: 0.95,
        tau: 0.01,
        learning_rate: 1e-3,
        twin,
        entropy_coeff: 0.0,
        target_clip: None,
    };
    DrCritic::new(3, 1, &[8], CriticMode::Dr, cfg, &mut from_seed(seed)).unwrap()
}

fn qv(seed: u64) -> QvModel {
    let cfg = QvConfig {
        gamma: 0.95,
        tau: 0.01,
        learning_rate: 1e-3,
    };
    QvModel::new(3, 1, &[8], cfg, &mut from_seed(seed)).unwrap()
}

fn random_mdp(n: usize, rng: &mut impl Rng, discount: f64) -> TabularMdp<f64> {
    let mut transition = vec![vec![vec![0.0; n]; 2]; n];
    let mut reward = vec![vec![0.0; 2]; n];
    for s in 0..n {
        for a in 0..2 {
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let z: f64 = w.iter().sum();
            transition[s][a] = w.iter().map(|x| x / z).collect();
            reward[s][a] = rng.random_range(-1.0..1.0);
        }
    }
    let mut initial = vec![0.0; n];
    initial[0] = 1.0;
    TabularMdp::new(transition, reward, discount, initial).unwrap()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn mlp_gradient_matches_central_differences(
        widths in prop::collection::vec(1usize..=16, 1..=3),
        tanh in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let mut rng = from_seed(seed);
        let mut sizes = vec![3];
        sizes.extend(&widths);
        sizes.push(2);
        let act = if tanh { Activation::Tanh } else { Activation::Relu };
        let mlp = Mlp::<f64>::new(sizes, act, OutputActivation::Identity).unwrap();
        let params = mlp.init(&mut rng);
        let xs: Vec<Vec<f64>> = (0..6).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let ts: Vec<Vec<f64>> = (0..6).map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let batch: Vec<Sample<'_, f64>> = xs
            .iter()
            .zip(&ts)
            .map(|(x, t)| Sample { input: x, target: LossTarget::Squared(t) })
            .collect();
        let (_, grad) = mlp.loss_and_gradient(&params, &batch).unwrap();
        let h = 1e-5;
        for _ in 0..8 {
            let i = rng.random_range(0..params.len());
            let mut up = params.clone();
            up.values_mut()[i] += h;
            let mut down = params.clone();
            down.values_mut()[i] -= h;
            let numeric = (mlp.loss(&up, &batch).unwrap() - mlp.loss(&down, &batch).unwrap()) / (2.0 * h);
            let a = grad.values()[i];
            prop_assert!((a - numeric).abs() <= 1e-4 * a.abs().max(numeric.abs()) + 1e-8, "coord {i}: {a} vs {numeric}");
        }
    }

    #[test]
    fn forward_is_deterministic(seed in any::<u64>(), x in prop::collection::vec(-5.0f64..5.0, 4)) {
        let mlp = Mlp::<f64>::new(vec![4, 16, 16, 3], Activation::Relu, OutputActivation::Tanh).unwrap();
        let params = mlp.init(&mut from_seed(seed));
        let a = mlp.forward(&params, &x).unwrap();
        let b = mlp.forward(&params, &x).unwrap();
        prop_assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn polyak_stays_between_endpoints(tau in 0.0f64..=1.0, seed in any::<u64>()) {
        let mlp = Mlp::<f64>::new(vec![2, 4, 1], Activation::Relu, OutputActivation::Identity).unwrap();
        let a = mlp.init(&mut from_seed(seed));
        let b = mlp.init(&mut from_seed(seed ^ 1));
        let mixed = polyak_update(&b, &a, tau).unwrap();
        for ((m, x), y) in mixed.values().iter().zip(a.values()).zip(b.values()) {
            prop_assert!(*m >= x.min(*y) - 1e-15 && *m <= x.max(*y) + 1e-15);
        }
    }

    #[test]
    fn clean_and_zero_noise_envs_agree(seed in any::<u64>(), actions in prop::collection::vec(-2.0f64..2.0, 1..120)) {
        for name in ["pendulum", "pointmass", "massspring"] {
            let mut clean = make_env(name).unwrap();
            let mut noisy = wrap_noisy(make_env(name).unwrap(), NoiseConfig::clean(), seed).unwrap();
            let mut corrupted = wrap_noisy(make_env(name).unwrap(), NoiseConfig { mu: 0.3, sigma: 1.0 }, seed).unwrap();
            let dim = clean.spec().action_dim;
            prop_assert_eq!(clean.reset(seed), noisy.reset(seed));
            corrupted.reset(seed);
            for a in &actions {
                let act = vec![*a; dim];
                let x = clean.step(&act).unwrap();
                let y = noisy.step(&act).unwrap();
                let z = corrupted.step(&act).unwrap();
                prop_assert_eq!(x.reward.to_bits(), y.reward.to_bits());
                prop_assert_eq!(&x.next_obs, &y.next_obs);
                prop_assert_eq!(&x.next_obs, &z.next_obs);
                if x.episode_over() {
                    break;
                }
            }
        }
    }

    #[test]
    fn tabular_value_solves_bellman(n in 1usize..8, seed in any::<u64>(), discount in 0.0f64..0.99) {
        let mut rng = from_seed(seed);
        let mdp = random_mdp(n, &mut rng, discount);
        let p: f64 = rng.random_range(0.0..1.0);
        let pi = constant_policy::<f64>(n, p);
        let v = tabular_policy_value(&mdp, &pi).unwrap();
        prop_assert!(mdp.bellman_residual(&pi, &v) <= 1e-10);
    }

    #[test]
    fn replay_fifo_and_disjoint(capacity in 1usize..40, pushes in 0usize..120, seed in any::<u64>()) {
        let mut buf = ReplayBuffer::new(capacity, 1, 1).unwrap();
        for i in 0..pushes {
            buf.push(Transition {
                obs: vec![i as f64],
                action: vec![0.0],
                reward: 0.0,
                next_obs: vec![0.0],
                done: false,
                truncated: false,
            }).unwrap();
        }
        let kept: Vec<f64> = buf.iter_chronological().map(|t| t.obs[0]).collect();
        let start = pushes.saturating_sub(capacity);
        prop_assert_eq!(kept, (start..pushes).map(|i| i as f64).collect::<Vec<_>>());
        if buf.len() >= 2 {
            let n_model = buf.len() / 2;
            let n_ac = buf.len() - n_model;
            let (m, a) = buf.sample_disjoint_indices(&mut from_seed(seed), n_model, n_ac).unwrap();
            prop_assert!(m.iter().all(|i| !a.contains(i)));
            let again = buf.sample_disjoint_indices(&mut from_seed(seed), n_model, n_ac).unwrap();
            prop_assert_eq!((m, a), again);
        }
    }

    #[test]
    fn zero_model_dr_target_equals_td_target(seed in any::<u64>()) {
        let mut rng = from_seed(seed);
        let data = transitions(16, 3, 1, &mut rng);
        let batch: Vec<&Transition> = data.iter().collect();
        let c = critic(false, seed);
        let pol = Policy::new(PolicyKind::Deterministic, 3, 1, 1.0, &[8], 1e-3, &mut rng).unwrap();
        let next = NextActions::from_target_policy(&pol, &batch).unwrap();
        let dr = c.dr_target(&qv(seed), &pol, &next, &batch).unwrap();
        let td = c.baseline_td_target(&next, &batch).unwrap();
        prop_assert_eq!(
            dr.targets.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            td.targets.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn dr_minus_td_is_model_gap(seed in any::<u64>()) {
        let mut rng = from_seed(seed);
        let data = transitions(16, 3, 1, &mut rng);
        let batch: Vec<&Transition> = data.iter().collect();
        let c = critic(false, seed);
        let pol = Policy::new(PolicyKind::Deterministic, 3, 1, 1.0, &[8], 1e-3, &mut rng).unwrap();
        let mut model = qv(seed);
        model.q_params = model.q_mlp.init(&mut rng);
        model.v_params = model.v_mlp.init(&mut rng);
        let next = NextActions::from_target_policy(&pol, &batch).unwrap();
        let dr = c.dr_target(&model, &pol, &next, &batch).unwrap();
        let td = c.baseline_td_target(&next, &batch).unwrap();
        let n = batch.len() as f64;
        let gap: f64 = batch
            .iter()
            .map(|t| {
                let a = pol.act(&t.obs).unwrap();
                model.predict_q(&t.obs, &a).unwrap() - model.predict_v(&t.obs).unwrap()
            })
            .sum::<f64>() / n;
        let diff = dr.targets.iter().sum::<f64>() / n - td.targets.iter().sum::<f64>() / n;
        prop_assert!((diff - gap).abs() <= 1e-10 * (1.0 + gap.abs()));
    }

    #[test]
    fn identical_twins_reduce_to_single_head(seed in any::<u64>()) {
        let mut rng = from_seed(seed);
        let data = transitions(12, 3, 1, &mut rng);
        let batch: Vec<&Transition> = data.iter().collect();
        let single = critic(false, seed);
        let head = single.heads[0].clone();
        let mut cfg = single.config;
        cfg.twin = true;
        let twin = DrCritic::from_parts(
            single.mlp.clone(),
            vec![head.clone(), head],
            CriticMode::BaselineTd,
            cfg,
        ).unwrap();
        let base = DrCritic::from_parts(single.mlp.clone(), single.heads.clone(), CriticMode::BaselineTd, single.config).unwrap();
        let pol = Policy::new(PolicyKind::Deterministic, 3, 1, 1.0, &[8], 1e-3, &mut rng).unwrap();
        let next = NextActions::from_target_policy(&pol, &batch).unwrap();
        prop_assert_eq!(
            twin.baseline_td_target(&next, &batch).unwrap().targets,
            base.baseline_td_target(&next, &batch).unwrap().targets
        );
    }

    #[test]
    fn updates_touch_only_their_own_parameters(seed in any::<u64>()) {
        let mut rng = from_seed(seed);
        let data = transitions(16, 3, 1, &mut rng);
        let batch: Vec<&Transition> = data.iter().collect();
        let states: Vec<&[f64]> = data.iter().map(|t| t.obs.as_slice()).collect();
        let mut c = critic(false, seed);
        let mut pol = Policy::new(PolicyKind::Deterministic, 3, 1, 1.0, &[8], 1e-3, &mut rng).unwrap();
        let mut reward = RewardNet::new(3, 1, &[8], 1e-3, &mut rng).unwrap();
        let mut model = qv(seed);

        let (pol0, c0) = (pol.params.clone(), c.heads[0].params.clone());
        reward.train_reward_step(&batch).unwrap();
        model.train_qv_step(&reward, &pol, &batch).unwrap();
        prop_assert_eq!(&pol.params, &pol0);
        prop_assert_eq!(&c.heads[0].params, &c0);

        let (r0, q0) = (reward.params.clone(), model.q_params.clone());
        let next = NextActions::from_target_policy(&pol, &batch).unwrap();
        let y = c.dr_target(&model, &pol, &next, &batch).unwrap();
        c.critic_update(&y, &batch).unwrap();
        prop_assert_eq!(&pol.params, &pol0);
        prop_assert_eq!(&reward.params, &r0);
        prop_assert_eq!(&model.q_params, &q0);

        let c1 = c.heads[0].params.clone();
        actor_update(&mut pol, &c, &states, &ActorObjective::Deterministic, 0.01).unwrap();
        prop_assert_eq!(&c.heads[0].params, &c1);
        prop_assert_eq!(&reward.params, &r0);
    }

    #[test]
    fn ope_reductions_hold(seed in any::<u64>(), n in 2usize..8, horizon in 1usize..15) {
        let mut rng = from_seed(seed);
        let mdp = random_mdp(n, &mut rng, 0.9);
        let pi = constant_policy::<f64>(n, rng.random_range(0.05..0.95));
        let beta = constant_policy::<f64>(n, rng.random_range(0.05..0.95));
        let zero = MdpModel::zeros(n, 2, 0.9);
        let model = build_model(&mdp, &pi, ModelQuality::Perturbed(0.5), &mut rng).unwrap();
        let traj = sample_trajectory(&mdp, &beta, horizon, &mut rng).unwrap();
        prop_assert_eq!(
            dr_sequential(&traj, &pi, &zero).unwrap().to_bits(),
            is_estimate(&traj, &pi, 0.9).unwrap().to_bits()
        );
        let only_right = constant_policy::<f64>(n, 1.0);
        let only_left = constant_policy::<f64>(n, 0.0);
        let logged_right = sample_trajectory(&mdp, &only_right, horizon, &mut rng).unwrap();
        prop_assert_eq!(
            dr_sequential(&logged_right, &only_left, &model).unwrap().to_bits(),
            dm_estimate(&model, mdp.initial_distribution()).unwrap().to_bits()
        );
    }

    #[test]
    fn metrics_csv_round_trips(rows in prop::collection::vec((-1e6f64..1e6, 0.0f64..1e3, 0u64..1000), 1..20)) {
        let rows: Vec<MetricsRow> = rows
            .iter()
            .enumerate()
            .map(|(i, &(ret, loss, wall))| MetricsRow {
                step: (i as u64 + 1) * 100,
                episode: i as u64,
                eval_return_mean: ret,
                eval_return_std: loss / 3.0,
                critic_loss: loss,
                reward_model_mse: loss * 0.1,
                qv_loss: loss * 0.7,
                dr_correction_mean: -ret / 7.0,
                actor_objective: ret * 0.01,
                wall_ms: wall,
                seed: 4,
            })
            .collect();
        let text = metrics_to_csv(&rows);
        prop_assert_eq!(parse_metrics_csv(&text, std::path::Path::new("x.csv")).unwrap(), rows);
    }
}

#[test]
fn adam_descends_a_quadratic() {
    let mut rng = from_seed(12);
    let mlp = Mlp::<f64>::new(vec![1, 8], Activation::Relu, OutputActivation::Identity).unwrap();
    let mut params = mlp.init(&mut rng);
    for v in params.values_mut() {
        *v = rng.random_range(-3.0..3.0);
    }
    let loss = |p: &ParameterVector<f64>| p.values().iter().map(|x| (x - 0.5) * (x - 0.5)).sum::<f64>();
    let start = loss(&params);
    let mut adam = AdamState::new(params.len(), 1e-2);
    for _ in 0..500 {
        let mut g = params.zeros_like();
        for (gi, x) in g.values_mut().iter_mut().zip(params.values()) {
            *gi = 2.0 * (x - 0.5);
        }
        adam.step(&mut params, &g).unwrap();
    }
    assert!(loss(&params) * 100.0 <= start, "{} -> {}", start, loss(&params));
}

#[test]
fn episodes_respect_their_limit() {
    for name in ["pendulum", "pointmass", "massspring", "constant", "chain-4"] {
        let mut env: Box<dyn Environment> = make_env(name).unwrap();
        let limit = env.spec().max_episode_steps;
        env.reset(3);
        let mut steps = 0;
        loop {
            steps += 1;
            if env.step(&vec![0.3; env.spec().action_dim]).unwrap().episode_over() {
                break;
            }
            assert!(steps <= limit, "{name}");
        }
        assert!(steps <= limit);
    }
}
