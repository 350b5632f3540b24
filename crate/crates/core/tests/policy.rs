use oppa_core::domain::EnvConfig;
use oppa_core::harness::{OpponentKind, TaskEnv};
use oppa_core::nn::Activation;
use oppa_core::nn::{grad_check, NnError, Tape};
use oppa_core::policy::{
    bellman_target, bellman_value, candidate_distribution, decay_beta, dqn_loss, estimator_loss, q_batch_loss,
    reg_loss, reinforce_update, sample_candidate, sample_from, select_action, total_loss, ChainMdp, EnvDims,
    EpisodeTrace, OppaAgent, OppositeEstimator, PolicyError, PolicyNet, QDims, QFunction, ReinforceAgent, ReplayBuffer,
    RlEnv, TrainingConfig, Transition, VanillaDqn, CHAIN_RIGHT,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn nn(e: PolicyError) -> NnError {
    match e {
        PolicyError::Nn(n) => n,
        other => panic!("unexpected {other}"),
    }
}

fn chi_square_p(counts: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let stat: f64 = counts
        .iter()
        .zip(probs)
        .filter(|(_, p)| **p > 0.0)
        .map(|(c, p)| {
            let e = p * n as f64;
            (*c as f64 - e).powi(2) / e
        })
        .sum();
    let dof = probs.iter().filter(|p| **p > 0.0).count() - 1;
    1.0 - ChiSquared::new(dof as f64).unwrap().cdf(stat)
}

/// Q function whose output equals `bias` for every input.
fn constant_q(bias: &[f64], state_dim: usize, n_opposite: usize) -> QFunction {
    let dims = QDims {
        state_dim,
        d_emb: 2,
        hidden: 3,
        n_actions: bias.len(),
        n_opposite,
    };
    let mut q = QFunction::new(dims, Activation::Tanh, &mut rng(0)).unwrap();
    let ids: Vec<_> = q.store.ids().collect();
    for id in ids {
        q.store.value_mut(id).fill(0.0);
    }
    let b = q.store.id("q.l2.b").unwrap();
    q.store.value_mut(b).data_mut().copy_from_slice(bias);
    q.sync_target().unwrap();
    q
}

#[test]
fn candidate_distribution_fixture() {
    let p = candidate_distribution(&[1.0, 2.0, 3.0], 1.0).unwrap();
    let z: f64 = [1.0f64, 2.0, 3.0].iter().map(|v| v.exp()).sum();
    for (i, expected) in [0.09003, 0.24473, 0.66524].iter().enumerate() {
        assert!((p[i] - expected).abs() < 5e-6);
        assert!((p[i] - (i as f64 + 1.0).exp() / z).abs() < 1e-12);
    }
    let sharp = candidate_distribution(&[1.0, 2.0, 3.0], 0.1).unwrap();
    assert!(sharp[2] > 0.9999);
    assert!(matches!(
        candidate_distribution(&[1.0], 0.0),
        Err(PolicyError::InvalidTemperature(_))
    ));
}

#[test]
fn sampled_candidates_follow_the_distribution() {
    let q = constant_q(&[1.0, 2.0, 3.0], 4, 2);
    let state = vec![0.3, -0.2, 0.1, 0.0];
    let mut r = rng(5);
    let mut counts = [0u64; 3];
    let mut dist = Vec::new();
    for _ in 0..100_000 {
        let (c, d) = sample_candidate(&state, &q, 0, 1.0, None, false, &mut r).unwrap();
        counts[c] += 1;
        dist = d;
    }
    assert!(chi_square_p(&counts, &dist) > 0.01);
    let (g, _) = sample_candidate(&state, &q, 0, 1.0, None, true, &mut r).unwrap();
    assert_eq!(g, 2);
}

#[test]
fn masked_candidates_never_pick_illegal_acts() {
    let q = constant_q(&[1.0, 2.0, 3.0], 4, 2);
    let mask = [true, true, false];
    let mut r = rng(6);
    for _ in 0..2_000 {
        let (c, d) = sample_candidate(&[0.0; 4], &q, 1, 0.5, Some(&mask), false, &mut r).unwrap();
        assert_ne!(c, 2);
        assert!(d[2] < 1e-12);
    }
}

#[test]
fn inverse_cdf_sampling_is_unbiased() {
    let dist = [0.1, 0.0, 0.6, 0.3];
    let mut r = rng(7);
    let mut counts = [0u64; 4];
    for _ in 0..100_000 {
        counts[sample_from(&dist, &mut r)] += 1;
    }
    assert_eq!(counts[1], 0);
    assert!(chi_square_p(&counts, &dist) > 0.01);
}

#[test]
fn epsilon_greedy_selection() {
    let q = constant_q(&[0.0, 5.0, 1.0, 2.0], 3, 2);
    let aug = q
        .net
        .augmented(&q.store, &[0.0; 3], oppa_core::policy::OppInput::Index(0))
        .unwrap();
    let mut r = rng(8);
    for _ in 0..100 {
        assert_eq!(select_action(&aug, &q, 0.0, None, &mut r).unwrap(), 1);
    }
    let mask = [true, false, true, true];
    let mut counts = [0u64; 4];
    for _ in 0..30_000 {
        counts[select_action(&aug, &q, 1.0, Some(&mask), &mut r).unwrap()] += 1;
    }
    assert_eq!(counts[1], 0);
    assert!(chi_square_p(&counts, &[1.0 / 3.0, 0.0, 1.0 / 3.0, 1.0 / 3.0]) > 0.01);
}

#[test]
fn epsilon_schedule_is_linear_then_flat() {
    let cfg = TrainingConfig {
        eps_start: 0.5,
        eps_end: 0.1,
        eps_decay_frac: 0.5,
        episodes: 100,
        ..Default::default()
    };
    assert_eq!(cfg.epsilon(0), 0.5);
    assert!((cfg.epsilon(25) - 0.3).abs() < 1e-12);
    assert!((cfg.epsilon(50) - 0.1).abs() < 1e-12);
    assert_eq!(cfg.epsilon(99), cfg.epsilon(50));
}

#[test]
fn bellman_fixtures() {
    assert_eq!(bellman_value(1.0, 5.0, false, 0.5), 3.5);
    assert_eq!(bellman_value(1.0, 5.0, true, 0.5), 1.0);
    assert_eq!(bellman_value(-2.0, 4.0, false, 1.0), 2.0);
    let q = constant_q(&[1.0, 3.0], 2, 2);
    let aug = q
        .net
        .augmented(&q.target, &[0.5, 0.5], oppa_core::policy::OppInput::Index(1))
        .unwrap();
    assert_eq!(bellman_target(1.0, &aug, None, false, &q, 0.5).unwrap(), 2.5);
    assert_eq!(
        bellman_target(1.0, &aug, Some(&[true, false]), false, &q, 0.5).unwrap(),
        1.5
    );
    assert_eq!(bellman_target(1.0, &aug, None, true, &q, 0.5).unwrap(), 1.0);
}

#[test]
fn loss_fixtures() {
    assert_eq!(dqn_loss(&[1.0, 2.0], &[2.0, 4.0]).unwrap(), 2.5);
    assert_eq!(dqn_loss(&[3.0], &[3.0]).unwrap(), 0.0);
    assert!(matches!(dqn_loss(&[], &[]), Err(PolicyError::EmptyBatch)));
    let l = reg_loss(&[0.25, 0.25, 0.5], 2, 0.5).unwrap();
    assert!((l - 0.5 * std::f64::consts::LN_2).abs() < 1e-12);
    assert!((reg_loss(&[0.25, 0.25, 0.5], 0, 1.0).unwrap() - 4f64.ln()).abs() < 1e-12);
    assert_eq!(reg_loss(&[0.25, 0.25, 0.5], 0, 0.0).unwrap(), 0.0);
    assert_eq!(total_loss(2.5, 0.5, 1.0, 2.0), 3.5);
    assert_eq!(total_loss(3.0, 4.0, 0.0, 1.0), 4.0);
}

#[test]
fn beta_decays_geometrically() {
    assert_eq!(decay_beta(2.0, 0.5), 1.0);
    let cfg = TrainingConfig {
        beta0: 0.8,
        gamma_beta: 0.9,
        epoch_episodes: 10,
        ..Default::default()
    };
    let mut expected = 0.8;
    for k in 0..20 {
        for ep in k * 10..(k + 1) * 10 {
            assert_eq!(cfg.beta(ep), expected);
        }
        assert!((expected - 0.8 * 0.9f64.powi(k as i32)).abs() < 1e-15);
        expected *= 0.9;
    }
}

fn small_agent(use_obe: bool, use_action_reg: bool, seed: u64) -> OppaAgent {
    let dims = EnvDims {
        state_dim: 5,
        n_actions: 4,
        n_opposite: 3,
        placeholder: 0,
    };
    let cfg = TrainingConfig {
        hidden: 6,
        estimator_hidden: 5,
        d_emb: 3,
        use_obe,
        use_action_reg,
        ..Default::default()
    };
    OppaAgent::new(dims, cfg, &mut rng(seed)).unwrap()
}

fn random_batch(r: &mut ChaCha8Rng, n: usize) -> Vec<Transition> {
    (0..n)
        .map(|_| {
            let mask: Vec<bool> = (0..4).map(|i| i == 0 || r.random_bool(0.7)).collect();
            let legal: Vec<usize> = (0..4).filter(|i| mask[*i]).collect();
            Transition {
                state: (0..5).map(|_| r.random_range(-1.0..1.0)).collect(),
                action: legal[r.random_range(0..legal.len())],
                mask: Some(mask),
                opp_est: r.random_range(0..3),
                opp_soft: None,
                reward: r.random_range(-1.0..1.0),
                next_state: (0..5).map(|_| r.random_range(-1.0..1.0)).collect(),
                next_mask: None,
                next_opp_est: r.random_range(0..3),
                next_opp_soft: None,
                done: r.random_bool(0.3),
                opp_observed: Some(r.random_range(0..3)),
            }
        })
        .collect()
}

#[test]
fn q_network_gradients_match_finite_differences() {
    for (obe, reg) in [(true, true), (false, false)] {
        let agent = small_agent(obe, reg, 11);
        let batch = random_batch(&mut rng(12), 4);
        let targets = agent.targets(&batch).unwrap();
        let mut store = agent.q.store.clone();
        let err = grad_check(&mut store, 1e-5, |tape| {
            q_batch_loss(tape, &agent, &batch, &targets, 0.7)
                .map(|(l, _, _)| l)
                .map_err(nn)
        })
        .unwrap();
        assert!(err < 1e-4, "relative error {err}");
    }
}

#[test]
fn soft_embedding_gradients_match_finite_differences() {
    let mut agent = small_agent(true, true, 13);
    agent.config.soft_embedding = true;
    let mut batch = random_batch(&mut rng(14), 3);
    for t in &mut batch {
        t.opp_soft = Some(vec![0.2, 0.5, 0.3]);
    }
    let targets = agent.targets(&batch).unwrap();
    let mut store = agent.q.store.clone();
    let err = grad_check(&mut store, 1e-5, |tape| {
        q_batch_loss(tape, &agent, &batch, &targets, 0.3)
            .map(|(l, _, _)| l)
            .map_err(nn)
    })
    .unwrap();
    assert!(err < 1e-4, "relative error {err}");
}

#[test]
fn estimator_gradients_match_finite_differences() {
    let est = OppositeEstimator::new(6, 4, 7, 5, Activation::Tanh, &mut rng(15)).unwrap();
    let mut r = rng(16);
    let states: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..6).map(|_| r.random_range(-1.0..1.0)).collect())
        .collect();
    let samples: Vec<(&[f64], usize, usize)> = states
        .iter()
        .map(|s| (s.as_slice(), r.random_range(0..4), r.random_range(0..5)))
        .collect();
    let mut store = est.store.clone();
    let err = grad_check(&mut store, 1e-5, |tape| {
        estimator_loss(tape, &est, &samples).map_err(nn)
    })
    .unwrap();
    assert!(err < 1e-4, "relative error {err}");
}

#[test]
fn total_loss_node_matches_its_parts() {
    let agent = small_agent(true, true, 17);
    let batch = random_batch(&mut rng(18), 5);
    let targets = agent.targets(&batch).unwrap();
    let mut tape = Tape::new(&agent.q.store);
    let (total, l1, l2) = q_batch_loss(&mut tape, &agent, &batch, &targets, 0.4).unwrap();
    let (t, a, b) = (tape.scalar(total), tape.scalar(l1), tape.scalar(l2.unwrap()));
    assert!((t - total_loss(a, b, agent.config.w1, agent.config.w2)).abs() < 1e-12);
    let predicted: Vec<f64> = batch
        .iter()
        .map(|tr| {
            agent
                .q
                .q_values(&tr.state, oppa_core::policy::OppInput::Index(tr.opp_est))
                .unwrap()[tr.action]
        })
        .collect();
    assert!((a - dqn_loss(&predicted, &targets).unwrap()).abs() < 1e-12);
}

#[test]
fn estimator_learns_a_deterministic_reply_rule() {
    // The opposite agent answers candidate act a with reply (a + 1) mod 3.
    let mut est = OppositeEstimator::new(4, 3, 16, 3, Activation::Tanh, &mut rng(19)).unwrap();
    let mut r = rng(20);
    let data: Vec<(Vec<f64>, usize)> = (0..60)
        .map(|_| {
            (
                (0..4).map(|_| r.random_range(-1.0..1.0)).collect(),
                r.random_range(0..3),
            )
        })
        .collect();
    let samples: Vec<(&[f64], usize, usize)> = data.iter().map(|(s, a)| (s.as_slice(), *a, (a + 1) % 3)).collect();
    for _ in 0..300 {
        oppa_core::policy::estimator_step(&mut est, &samples, 1e-2).unwrap();
    }
    let correct = samples
        .iter()
        .filter(|(s, a, o)| oppa_core::nn::argmax(&est.distribution(s, *a).unwrap()) == *o)
        .count();
    assert_eq!(correct, samples.len());
}

fn identity_config() -> TrainingConfig {
    TrainingConfig {
        hidden: 8,
        d_emb: 3,
        batch_size: 8,
        episodes: 40,
        eps_start: 0.5,
        sync_period: 3,
        use_obe: false,
        use_action_reg: false,
        ..Default::default()
    }
}

fn ablation_matches_reference<E: RlEnv>(mut env_a: E, mut env_b: E, seed: u64) {
    let cfg = identity_config();
    let dims = EnvDims::of(&env_a);
    let mut ra = rng(seed);
    let mut rb = rng(seed);
    let mut agent = OppaAgent::new(dims, cfg.clone(), &mut ra).unwrap();
    let mut reference = VanillaDqn::new(dims, cfg.clone(), &mut rb).unwrap();
    let (mut ba, mut bb) = (
        ReplayBuffer::new(cfg.buffer_capacity),
        ReplayBuffer::new(cfg.buffer_capacity),
    );
    for ep in 0..cfg.episodes {
        let a = agent
            .train_iteration(&mut env_a, &mut ba, ep, ep as u64, &mut ra)
            .unwrap()
            .actions;
        let b = reference.episode(&mut env_b, &mut bb, ep, ep as u64, &mut rb).unwrap();
        assert_eq!(a, b, "episode {ep}");
    }
    assert!(agent.q.store.values_bit_equal(&reference.q.store));
}

#[test]
fn ablated_agent_is_the_reference_dqn_on_the_chain() {
    for seed in 0..3 {
        ablation_matches_reference(ChainMdp::new(5), ChainMdp::new(5), seed);
    }
}

#[test]
fn ablated_agent_is_the_reference_dqn_on_dialogue_tasks() {
    let coop = EnvConfig::Cooperative(Default::default());
    let nego = EnvConfig::Negotiation(Default::default());
    for env in [coop, nego] {
        let a = TaskEnv::new(&env, &OpponentKind::default(), 4).unwrap();
        let b = TaskEnv::new(&env, &OpponentKind::default(), 4).unwrap();
        ablation_matches_reference(a, b, 21);
    }
}

#[test]
fn reinforce_learns_the_two_state_chain() {
    let mut env = ChainMdp::new(2);
    let dims = EnvDims::of(&env);
    let mut r = rng(22);
    let mut agent = ReinforceAgent::new(dims, 8, 0.9, 0.05, 4, Activation::Tanh, &mut r).unwrap();
    for ep in 0..200 {
        agent.train_episode(&mut env, ep, &mut r).unwrap();
    }
    let p = agent.net.distribution(&env.observation(0), None).unwrap();
    assert!(p[CHAIN_RIGHT] > 0.9, "p(right) = {}", p[CHAIN_RIGHT]);
}

#[test]
fn reinforce_with_zero_rewards_leaves_parameters() {
    let mut net = PolicyNet::new(3, 4, 2, Activation::Tanh, &mut rng(23)).unwrap();
    let before = net.store.clone();
    let trace = EpisodeTrace {
        states: vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
        masks: vec![None, None],
        actions: vec![0, 1],
        rewards: vec![0.0, 0.0],
    };
    let loss = reinforce_update(&mut net, &[trace.clone(), trace], 0.9, 0.1).unwrap();
    assert_eq!(loss, 0.0);
    assert!(net.store.values_bit_equal(&before));
}

#[test]
fn discounted_returns() {
    let trace = EpisodeTrace {
        states: vec![vec![]; 3],
        masks: vec![None; 3],
        actions: vec![0; 3],
        rewards: vec![1.0, 0.0, 2.0],
    };
    assert_eq!(trace.returns(0.5), vec![1.5, 1.0, 2.0]);
}

#[test]
fn chain_mdp_is_solved_quickly_by_the_dqn_machinery() {
    let env = ChainMdp::new(5);
    let (_, optimal) = env.value_iteration(0.9);
    let got = solve_chain(0, 1000);
    assert_eq!(got, optimal);
}

fn solve_chain(seed: u64, episodes: usize) -> Vec<usize> {
    let mut env = ChainMdp::new(5);
    let cfg = TrainingConfig {
        gamma_q: 0.9,
        hidden: 16,
        d_emb: 2,
        lr: 1e-2,
        eps_start: 1.0,
        eps_end: 0.05,
        eps_decay_frac: 0.5,
        batch_size: 32,
        sync_period: 10,
        episodes,
        use_obe: false,
        use_action_reg: false,
        ..Default::default()
    };
    let mut r = rng(seed);
    let mut agent = OppaAgent::new(EnvDims::of(&env), cfg.clone(), &mut r).unwrap();
    let mut buf = ReplayBuffer::new(cfg.buffer_capacity);
    for ep in 0..episodes {
        agent
            .train_iteration(&mut env, &mut buf, ep, ep as u64, &mut r)
            .unwrap();
    }
    (0..4)
        .map(|s| agent.greedy_action(&env.observation(s), None).unwrap())
        .collect()
}
