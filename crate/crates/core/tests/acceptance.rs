//! Acceptance criteria, one pass/fail line each.
//!
//! Runs as a plain binary so every criterion reports even when an earlier one
//! fails; the process exits non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use oppa_core::domain::{
    reference_scenario, Actor, DialogueAct, DomainGoal, EnvConfig, Goal, NegotiationConfig, Scenario,
};
use oppa_core::envs::{
    inform_f1, match_rate, pareto_optimal, success, GameStatus, NegotiationGame, Outcome, SessionRecord, SessionStatus,
};
use oppa_core::harness::{
    load_policy, run_ablations, run_crossplay_battery, run_eval, run_train, save_policy, AgentMeta, ExperimentConfig,
    OpponentKind, TaskEnv, Variant,
};
use oppa_core::nn::{
    attention, bigru_forward, grad_check, one_hot, Activation, Attention, Dense, GruCell, NnError, ParamStore,
};
use oppa_core::policy::{
    bellman_target, bellman_value, dqn_loss, estimator_loss, q_batch_loss, reg_loss, total_loss, ChainMdp, EnvDims,
    OppInput, OppaAgent, OppositeEstimator, PolicyError, QDims, QFunction, ReplayBuffer, RlEnv, TrainingConfig,
    Transition, VanillaDqn,
};
use oppa_core::reward::{synthetic_corpus, task_reward, train_reward_model, RewardModel, RewardModelConfig, Vocab};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn nn(e: PolicyError) -> NnError {
    match e {
        PolicyError::Nn(n) => n,
        other => panic!("unexpected {other}"),
    }
}

fn jitter(store: &mut ParamStore, r: &mut ChaCha8Rng) {
    for id in store.ids().collect::<Vec<_>>() {
        for v in store.value_mut(id).data_mut() {
            *v += r.random_range(-0.2..0.2);
        }
    }
}

fn random_vec(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
}

fn chi_square_uniform_p(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let e = n as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|c| (*c as f64 - e).powi(2) / e).sum();
    1.0 - ChiSquared::new((counts.len() - 1) as f64).unwrap().cdf(stat)
}

fn transition(tag: f64) -> Transition {
    Transition {
        state: vec![tag],
        action: 0,
        mask: None,
        opp_est: 0,
        opp_soft: None,
        reward: tag,
        next_state: vec![tag],
        next_mask: None,
        next_opp_est: 0,
        next_opp_soft: None,
        done: true,
        opp_observed: None,
    }
}

fn gradient_fidelity() -> Verdict {
    let start = Instant::now();
    let mut r = rng(1);
    let mut worst: Vec<(&str, f64)> = Vec::new();
    let mut record = |name: &'static str, err: f64| worst.push((name, err));

    for _ in 0..3 {
        let (i, h, o) = (r.random_range(2..=32), r.random_range(2..=32), r.random_range(2..=32));
        let mut store = ParamStore::new();
        let l1 = Dense::new(&mut store, "l1", i, h, Activation::Tanh, &mut r).unwrap();
        let l2 = Dense::new(&mut store, "l2", h, o, Activation::Identity, &mut r).unwrap();
        jitter(&mut store, &mut r);
        let x = random_vec(&mut r, i);
        let target = one_hot(r.random_range(0..o), o);
        let err = grad_check(&mut store, 1e-5, |tape| {
            let xv = tape.input_vec(x.clone());
            let hv = l1.forward(tape, xv)?;
            let z = l2.forward(tape, hv)?;
            let p = tape.softmax(z)?;
            tape.cross_entropy(&target, p)
        })
        .unwrap();
        record("dense", err);
    }

    {
        let (i, h) = (r.random_range(2..=12), r.random_range(2..=12));
        let mut store = ParamStore::new();
        let cell = GruCell::new(&mut store, "g", i, h, &mut r).unwrap();
        let read = Dense::new(&mut store, "read", h, 1, Activation::Identity, &mut r).unwrap();
        jitter(&mut store, &mut r);
        let seq: Vec<Vec<f64>> = (0..4).map(|_| random_vec(&mut r, i)).collect();
        let err = grad_check(&mut store, 1e-5, |tape| {
            let xs: Vec<_> = seq.iter().map(|x| tape.input_vec(x.clone())).collect();
            let hs = cell.unroll(tape, &xs)?;
            let out = read.forward(tape, *hs.last().unwrap())?;
            let sq = tape.mul(out, out)?;
            Ok(tape.sum(sq))
        })
        .unwrap();
        record("gru", err);
    }

    {
        let (i, h, a, c) = (
            r.random_range(2..=8),
            r.random_range(2..=8),
            r.random_range(2..=8),
            r.random_range(2..=6),
        );
        let mut store = ParamStore::new();
        let fwd = GruCell::new(&mut store, "f", i, h, &mut r).unwrap();
        let bwd = GruCell::new(&mut store, "b", i, h, &mut r).unwrap();
        let att = Attention::new(&mut store, "att", 2 * h, a, &mut r).unwrap();
        let head = Dense::new(&mut store, "head", 2 * h, c, Activation::Identity, &mut r).unwrap();
        jitter(&mut store, &mut r);
        let seq: Vec<Vec<f64>> = (0..4).map(|_| random_vec(&mut r, i)).collect();
        let target = one_hot(0, c);
        let err = grad_check(&mut store, 1e-5, |tape| {
            let xs: Vec<_> = seq.iter().map(|x| tape.input_vec(x.clone())).collect();
            let hs = bigru_forward(tape, &xs, &fwd, &bwd)?;
            let (_, ctx) = attention(tape, &hs, &att)?;
            let z = head.forward(tape, ctx)?;
            let p = tape.softmax(z)?;
            tape.cross_entropy(&target, p)
        })
        .unwrap();
        record("bigru+attention", err);
    }

    for (obe, reg) in [(true, true), (true, false), (false, false)] {
        let dims = EnvDims {
            state_dim: r.random_range(2..=16),
            n_actions: r.random_range(2..=12),
            n_opposite: r.random_range(2..=8),
            placeholder: 0,
        };
        let cfg = TrainingConfig {
            hidden: r.random_range(2..=16),
            estimator_hidden: r.random_range(2..=16),
            d_emb: r.random_range(2..=6),
            use_obe: obe,
            use_action_reg: reg,
            ..Default::default()
        };
        let agent = OppaAgent::new(dims, cfg, &mut r).unwrap();
        let batch: Vec<Transition> = (0..4)
            .map(|_| Transition {
                state: random_vec(&mut r, dims.state_dim),
                action: r.random_range(0..dims.n_actions),
                mask: None,
                opp_est: r.random_range(0..dims.n_opposite),
                opp_soft: None,
                reward: r.random_range(-1.0..1.0),
                next_state: random_vec(&mut r, dims.state_dim),
                next_mask: None,
                next_opp_est: r.random_range(0..dims.n_opposite),
                next_opp_soft: None,
                done: r.random_bool(0.3),
                opp_observed: Some(r.random_range(0..dims.n_opposite)),
            })
            .collect();
        let targets = agent.targets(&batch).unwrap();
        let mut store = agent.q.store.clone();
        let err = grad_check(&mut store, 1e-5, |tape| {
            q_batch_loss(tape, &agent, &batch, &targets, 0.6)
                .map(|(l, _, _)| l)
                .map_err(nn)
        })
        .unwrap();
        record("q-net", err);
    }

    {
        let (s, a, h, o) = (
            r.random_range(2..=16),
            r.random_range(2..=12),
            r.random_range(2..=16),
            r.random_range(2..=8),
        );
        let est = OppositeEstimator::new(s, a, h, o, Activation::Tanh, &mut r).unwrap();
        let states: Vec<Vec<f64>> = (0..4).map(|_| random_vec(&mut r, s)).collect();
        let samples: Vec<(&[f64], usize, usize)> = states
            .iter()
            .map(|x| (x.as_slice(), r.random_range(0..a), r.random_range(0..o)))
            .collect();
        let mut store = est.store.clone();
        let err = grad_check(&mut store, 1e-5, |tape| {
            estimator_loss(tape, &est, &samples).map_err(nn)
        })
        .unwrap();
        record("opposite estimator", err);
    }

    {
        let nc = NegotiationConfig::default();
        let vocab = Vocab::for_negotiation(&nc);
        let cfg = RewardModelConfig {
            d_word: r.random_range(2..=6),
            gru_w: r.random_range(2..=5),
            gru_o: r.random_range(2..=5),
            gru_g: r.random_range(2..=5),
            attn: r.random_range(2..=5),
            d_session: r.random_range(2..=6),
            ..Default::default()
        };
        let model = RewardModel::new(vocab.len(), nc.item_caps, cfg, &mut r).unwrap();
        let ex = synthetic_corpus(&nc, 4, 5)
            .unwrap()
            .into_iter()
            .find(|e| e.agreed)
            .unwrap();
        let (s, o) = ex.encode(&vocab);
        let mut store = model.store.clone();
        jitter(&mut store, &mut r);
        let err = grad_check(&mut store, 1e-5, |tape| {
            Ok(model.loss(tape, &s, &o).expect("reward loss"))
        })
        .unwrap();
        record("reward model", err);
    }

    let elapsed = start.elapsed();
    let max = worst.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    let bad: Vec<_> = worst.iter().filter(|(_, e)| e.is_nan() || *e >= 1e-4).collect();
    ensure(bad.is_empty(), format!("errors above 1e-4: {bad:?}"))?;
    ensure(elapsed < Duration::from_secs(30), format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} checks, max relative error {max:.2e}, {:.1}s",
        worst.len(),
        elapsed.as_secs_f64()
    ))
}

fn loss_oracles() -> Verdict {
    ensure(bellman_value(1.0, 5.0, false, 0.5) == 3.5, "bellman value")?;
    ensure(bellman_value(1.0, 5.0, true, 0.5) == 1.0, "terminal bellman value")?;

    // A Q function with zero weights outputs its last-layer bias everywhere.
    let dims = QDims {
        state_dim: 2,
        d_emb: 2,
        hidden: 3,
        n_actions: 2,
        n_opposite: 2,
    };
    let mut q = QFunction::new(dims, Activation::Tanh, &mut rng(0)).unwrap();
    for id in q.store.ids().collect::<Vec<_>>() {
        q.store.value_mut(id).fill(0.0);
    }
    let b = q.store.id("q.l2.b").unwrap();
    q.store.value_mut(b).data_mut().copy_from_slice(&[1.0, 3.0]);
    q.sync_target().unwrap();
    let aug = q.net.augmented(&q.target, &[0.5, 0.5], OppInput::Index(1)).unwrap();
    ensure(
        bellman_target(1.0, &aug, None, false, &q, 0.5).unwrap() == 2.5,
        "bellman target",
    )?;
    ensure(
        bellman_target(1.0, &aug, Some(&[true, false]), false, &q, 0.5).unwrap() == 1.5,
        "masked bellman target",
    )?;
    ensure(
        bellman_target(1.0, &aug, None, true, &q, 0.5).unwrap() == 1.0,
        "terminal bellman target",
    )?;

    ensure(dqn_loss(&[1.0, 2.0], &[2.0, 4.0]).unwrap() == 2.5, "dqn loss")?;
    ensure(dqn_loss(&[3.0], &[3.0]).unwrap() == 0.0, "zero dqn loss")?;
    let l = reg_loss(&[0.25, 0.25, 0.5], 2, 0.5).unwrap();
    ensure(
        (l - 0.5 * std::f64::consts::LN_2).abs() < 1e-12,
        format!("reg loss {l}"),
    )?;
    let l = reg_loss(&[0.25, 0.25, 0.5], 0, 1.0).unwrap();
    ensure((l - 4f64.ln()).abs() < 1e-12, format!("reg loss {l}"))?;
    ensure(total_loss(2.5, 0.5, 1.0, 2.0) == 3.5, "total loss")?;
    ensure(total_loss(3.0, 4.0, 0.0, 1.0) == 4.0, "total loss without dqn term")?;
    Ok("bellman_target, dqn_loss, reg_loss, total_loss match hand-computed fixtures".into())
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

fn tabular_sanity() -> Verdict {
    let start = Instant::now();
    let (_, optimal) = ChainMdp::new(5).value_iteration(0.9);
    let mut solved = 0;
    for seed in 0..5 {
        if solve_chain(seed, 2000) == optimal {
            solved += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(solved == 5, format!("{solved}/5 seeds reach the optimal greedy policy"))?;
    ensure(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
    Ok(format!(
        "5/5 seeds optimal at 2000 episodes, {:.1}s",
        elapsed.as_secs_f64()
    ))
}

fn pareto_oracle(s: &Scenario, a: u32, b: u32) -> bool {
    let mut frontier = Vec::new();
    for x in 0..=s.item_counts[0] {
        for y in 0..=s.item_counts[1] {
            for z in 0..=s.item_counts[2] {
                let sa = x * s.values_a[0] + y * s.values_a[1] + z * s.values_a[2];
                let sb = (s.item_counts[0] - x) * s.values_b[0]
                    + (s.item_counts[1] - y) * s.values_b[1]
                    + (s.item_counts[2] - z) * s.values_b[2];
                frontier.push((sa, sb));
            }
        }
    }
    frontier
        .iter()
        .all(|(x, y)| !(*x >= a && *y >= b && (*x > a || *y > b)))
}

fn oracle_equivalence() -> Verdict {
    let mut r = rng(4);
    let mut checked = 0usize;
    for _ in 0..1000 {
        let s = Scenario {
            item_counts: [r.random_range(0..=4), r.random_range(0..=4), r.random_range(0..=4)],
            values_a: [r.random_range(0..=10), r.random_range(0..=10), r.random_range(0..=10)],
            values_b: [r.random_range(0..=10), r.random_range(0..=10), r.random_range(0..=10)],
        };
        for x in 0..=s.item_counts[0] {
            for y in 0..=s.item_counts[1] {
                for z in 0..=s.item_counts[2] {
                    let a = x * s.values_a[0] + y * s.values_a[1] + z * s.values_a[2];
                    let b = (s.item_counts[0] - x) * s.values_b[0]
                        + (s.item_counts[1] - y) * s.values_b[1]
                        + (s.item_counts[2] - z) * s.values_b[2];
                    ensure(
                        pareto_optimal(&s, a, b) == pareto_oracle(&s, a, b),
                        format!("pareto mismatch on {s:?} at ({a}, {b})"),
                    )?;
                    checked += 1;
                }
            }
        }
        // Scores no division reaches, including the no-deal point.
        for (a, b) in [(0, 0), (1, 0), (0, 1), (200, 0)] {
            ensure(
                pareto_optimal(&s, a, b) == pareto_oracle(&s, a, b),
                format!("pareto mismatch on {s:?} at ({a}, {b})"),
            )?;
            checked += 1;
        }
    }

    let domains = ["hotel", "restaurant", "taxi"];
    let requests = ["phone", "address", "postcode"];
    for _ in 0..100 {
        let mut goal = Goal { domains: vec![] };
        for d in domains {
            if r.random_bool(0.6) {
                let picked: Vec<String> = requests
                    .iter()
                    .filter(|_| r.random_bool(0.5))
                    .map(|s| s.to_string())
                    .collect();
                goal.domains.push(DomainGoal {
                    domain: d.to_string(),
                    constraints: vec![],
                    requests: picked,
                    book: true,
                });
            }
        }
        let mut informed = BTreeSet::new();
        for d in domains {
            for q in requests {
                if r.random_bool(0.4) {
                    informed.insert(format!("{d}.{q}"));
                }
            }
        }
        let mut booked = BTreeMap::new();
        for d in domains {
            if r.random_bool(0.7) {
                booked.insert(d.to_string(), r.random_bool(0.6));
            }
        }

        let requested: Vec<String> = goal
            .domains
            .iter()
            .flat_map(|g| g.requests.iter().map(move |q| format!("{}.{q}", g.domain)))
            .collect();
        let hits = informed.iter().filter(|s| requested.contains(s)).count() as f64;
        let precision = if informed.is_empty() {
            0.0
        } else {
            hits / informed.len() as f64
        };
        let recall = if requested.is_empty() {
            1.0
        } else {
            hits / requested.len() as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        let matched = goal
            .domains
            .iter()
            .filter(|g| booked.get(&g.domain) == Some(&true))
            .count();
        let match_expected = if goal.domains.is_empty() {
            1.0
        } else {
            matched as f64 / goal.domains.len() as f64
        };
        let success_expected = recall == 1.0 && match_expected == 1.0;

        let record = SessionRecord {
            acts: vec![],
            status: SessionStatus::Failure,
            outcome: Outcome::Cooperative { goal, informed, booked },
            turns: 0,
        };
        ensure(inform_f1(&record).unwrap() == f1, format!("inform_f1 on {record:?}"))?;
        ensure(
            match_rate(&record).unwrap() == match_expected,
            format!("match on {record:?}"),
        )?;
        ensure(
            success(&record).unwrap() == success_expected,
            format!("success on {record:?}"),
        )?;
    }
    Ok(format!(
        "{checked} Pareto queries over 1000 scenarios and 100 session records agree exactly"
    ))
}

fn reference_fixture() -> Verdict {
    let s = reference_scenario();
    let mut g =
        NegotiationGame::new(s.clone(), NegotiationConfig::default(), Actor::Target).map_err(|e| e.to_string())?;
    g.step(&DialogueAct::propose(Actor::Target, [0, 1, 1]))
        .map_err(|e| e.to_string())?;
    g.step(&DialogueAct::bare(Actor::Opposite, oppa_core::domain::ActKind::Agree))
        .map_err(|e| e.to_string())?;
    ensure(g.status == GameStatus::Agreed, format!("status {:?}", g.status))?;
    let (a, b) = (g.score(Actor::Target).unwrap(), g.score(Actor::Opposite).unwrap());
    ensure((a, b) == (10, 3), format!("scores {a}/{b}"))?;
    ensure(pareto_optimal(&s, a, b), "not judged Pareto-optimal")?;
    ensure(pareto_oracle(&s, a, b), "enumeration disagrees")?;
    Ok(format!("scores {a}/10 and {b}/10, Pareto-optimal"))
}

fn replay_semantics() -> Verdict {
    let mut buf = ReplayBuffer::new(500);
    for i in 0..1234 {
        buf.push(transition(i as f64));
        let expected_len = (i + 1).min(500);
        ensure(
            buf.len() == expected_len,
            format!("length {} after {} pushes", buf.len(), i + 1),
        )?;
    }
    let order: Vec<f64> = buf.iter_fifo().map(|t| t.reward).collect();
    let expected: Vec<f64> = (734..1234).map(|i| i as f64).collect();
    ensure(
        order == expected,
        "FIFO order does not hold the newest 500 oldest-first",
    )?;

    let mut counts = vec![0u64; 500];
    let mut r = rng(6);
    for _ in 0..100 {
        for t in buf.sample(1000, &mut r).map_err(|e| e.to_string())? {
            counts[t.reward as usize - 734] += 1;
        }
    }
    let p = chi_square_uniform_p(&counts);
    ensure(p > 0.01, format!("chi-square p = {p}"))?;
    Ok(format!(
        "capacity 500 keeps the newest transitions in order; chi-square p = {p:.3} over 1e5 draws"
    ))
}

fn coop_config() -> ExperimentConfig {
    ExperimentConfig::from_json(
        r#"{"env": {"kind": "cooperative"},
            "training": {"episodes": 500, "hidden": 64, "estimator_hidden": 64, "lr": 0.001},
            "pretrain": {"epochs": 5},
            "corpus": {"episodes": 100, "explore": 0.3},
            "snapshot_every": 100, "snapshot_episodes": 20, "eval_episodes": 100,
            "seeds": [0, 1, 2, 3, 4]}"#,
    )
    .expect("cooperative config")
}

fn cooperative_ordering() -> Verdict {
    let cfg = coop_config();
    let mut times = Vec::new();
    let mut means = Vec::new();
    for v in [Variant::Oppa, Variant::OppaNoReg, Variant::Dqn] {
        let t = Instant::now();
        let report = run_ablations(&cfg, &[v]).map_err(|e| e.to_string())?;
        times.push(t.elapsed());
        means.push(report.mean(v, "success").ok_or("missing success metric")?);
    }
    let (oppa, no_a, dqn) = (means[0], means[1], means[2]);
    let detail = format!(
        "success over {} seeds: OPPA {oppa:.1}, w/o A {no_a:.1}, DQN {dqn:.1}; slowest variant {:.0}s",
        cfg.seeds.len(),
        times.iter().max().unwrap().as_secs_f64()
    );
    ensure(oppa >= dqn + 5.0, format!("OPPA not 5 points above DQN; {detail}"))?;
    ensure(oppa >= no_a, format!("OPPA below OPPA w/o A; {detail}"))?;
    ensure(
        times.iter().all(|t| *t < Duration::from_secs(600)),
        format!("over 10 min per variant; {detail}"),
    )?;
    Ok(detail)
}

fn negotiation_crossplay() -> Verdict {
    let cfg = ExperimentConfig::from_json(
        r#"{"env": {"kind": "negotiation"},
            "training": {"episodes": 2000, "hidden": 64, "estimator_hidden": 64, "lr": 0.001},
            "pretrain": {"epochs": 5},
            "corpus": {"episodes": 100, "explore": 0.3},
            "snapshot_every": 500, "snapshot_episodes": 20, "eval_episodes": 100,
            "seeds": [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]}"#,
    )
    .expect("negotiation config");
    let battery = run_crossplay_battery(&cfg, Variant::Oppa, Variant::Dqn, 200).map_err(|e| e.to_string())?;
    for (seed, r) in &battery.per_seed {
        ensure(
            r.agreed.0 >= r.all.0 && r.agreed.1 >= r.all.1,
            format!("seed {seed}: agreed {:?} below all {:?}", r.agreed, r.all),
        )?;
    }
    let (a, b) = battery.mean_all();
    let wins = battery.per_seed.iter().filter(|(_, r)| r.all.0 > r.all.1).count();
    let detail = format!(
        "All-score OPPA {a:.2} vs. DQN {b:.2} over {} seeds (OPPA ahead on {wins})",
        battery.per_seed.len()
    );
    ensure(a > b, detail.clone())?;
    Ok(detail)
}

fn ablation_identity() -> Verdict {
    let cfg = TrainingConfig {
        hidden: 8,
        d_emb: 3,
        batch_size: 8,
        episodes: 40,
        eps_start: 0.5,
        sync_period: 3,
        use_obe: false,
        use_action_reg: false,
        ..Default::default()
    };
    fn compare<E: RlEnv>(mut ea: E, mut eb: E, cfg: &TrainingConfig, seed: u64) -> Result<usize, String> {
        let dims = EnvDims::of(&ea);
        let (mut ra, mut rb) = (rng(seed), rng(seed));
        let mut agent = OppaAgent::new(dims, cfg.clone(), &mut ra).map_err(|e| e.to_string())?;
        let mut reference = VanillaDqn::new(dims, cfg.clone(), &mut rb).map_err(|e| e.to_string())?;
        let (mut ba, mut bb) = (
            ReplayBuffer::new(cfg.buffer_capacity),
            ReplayBuffer::new(cfg.buffer_capacity),
        );
        let mut steps = 0;
        for ep in 0..cfg.episodes {
            let a = agent
                .train_iteration(&mut ea, &mut ba, ep, ep as u64, &mut ra)
                .map_err(|e| e.to_string())?
                .actions;
            let b = reference
                .episode(&mut eb, &mut bb, ep, ep as u64, &mut rb)
                .map_err(|e| e.to_string())?;
            ensure(a == b, format!("action sequences diverge at episode {ep}"))?;
            steps += a.len();
        }
        ensure(
            agent.q.store.values_bit_equal(&reference.q.store),
            "final parameters differ",
        )?;
        Ok(steps)
    }
    let mut steps = 0;
    for seed in 0..3 {
        steps += compare(ChainMdp::new(5), ChainMdp::new(5), &cfg, seed)?;
    }
    for env in [
        EnvConfig::Cooperative(Default::default()),
        EnvConfig::Negotiation(Default::default()),
    ] {
        let a = TaskEnv::new(&env, &OpponentKind::default(), 4).map_err(|e| e.to_string())?;
        let b = TaskEnv::new(&env, &OpponentKind::default(), 4).map_err(|e| e.to_string())?;
        steps += compare(a, b, &cfg, 21)?;
    }
    Ok(format!(
        "{steps} actions identical across chain, cooperative and negotiation runs"
    ))
}

fn beta_schedule() -> Verdict {
    let mut cfg = coop_config();
    cfg.pretrain = None;
    cfg.seeds = vec![0];
    cfg.training.episodes = 60;
    cfg.training.hidden = 16;
    cfg.training.estimator_hidden = 16;
    cfg.training.epoch_episodes = 10;
    cfg.training.beta0 = 0.7;
    cfg.training.gamma_beta = 0.85;
    cfg.snapshot_every = 5;
    cfg.snapshot_episodes = 2;
    let out = run_train(&cfg, Variant::Oppa, 0).map_err(|e| e.to_string())?;
    let mut expected = vec![cfg.training.beta0];
    for k in 1..=cfg.training.episodes / cfg.training.epoch_episodes {
        let prev = expected[k - 1];
        expected.push(prev * cfg.training.gamma_beta);
    }
    for row in &out.curve {
        let k = (row.episode - 1) / cfg.training.epoch_episodes;
        ensure(
            row.beta == expected[k],
            format!("episode {}: beta {} vs {}", row.episode, row.beta, expected[k]),
        )?;
        let closed = 0.7 * 0.85f64.powi(k as i32);
        ensure(
            (row.beta - closed).abs() <= 1e-15 * closed,
            format!("episode {}: beta {} vs closed form {closed}", row.episode, row.beta),
        )?;
    }
    Ok(format!("{} logged beta values equal beta0 * gamma^k", out.curve.len()))
}

fn reward_model() -> Verdict {
    let start = Instant::now();
    let nc = NegotiationConfig::default();
    let vocab = Vocab::for_negotiation(&nc);
    let corpus = synthetic_corpus(&nc, 1000, 7).map_err(|e| e.to_string())?;
    let mut agreed = 0;
    for ex in &corpus {
        if !ex.agreed {
            continue;
        }
        agreed += 1;
        let counts: Vec<u32> = ex
            .goal_tokens
            .iter()
            .step_by(2)
            .map(|t| t.split_once('=').unwrap().1.parse().unwrap())
            .collect();
        let counts = [counts[0], counts[1], counts[2]];
        let r = task_reward(&ex.outcome, &counts, &ex.values).map_err(|e| e.to_string())?;
        ensure(
            r == ex.score,
            format!("task_reward {r} vs nego_score {} on {ex:?}", ex.score),
        )?;
    }
    let cfg = RewardModelConfig {
        d_word: 16,
        gru_w: 16,
        gru_o: 16,
        gru_g: 8,
        attn: 16,
        d_session: 32,
        lr: 0.005,
        epochs: 20,
        batch_size: 8,
        holdout_frac: 0.2,
    };
    let mut r = rng(8);
    let mut model = RewardModel::new(vocab.len(), nc.item_caps, cfg, &mut r).map_err(|e| e.to_string())?;
    let data: Vec<_> = corpus.iter().map(|e| e.encode(&vocab)).collect();
    let report = train_reward_model(&mut model, &data, &mut r).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let acc = &report.issue_accuracy;
    let detail = format!(
        "held-out per-issue accuracy {:?} on {} sessions, task_reward == nego_score on {agreed} agreed sessions, {:.0}s",
        acc.iter().map(|a| (a * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
        report.heldout,
        elapsed.as_secs_f64()
    );
    ensure(acc.iter().all(|a| *a >= 0.95), detail.clone())?;
    ensure(elapsed < Duration::from_secs(120), detail.clone())?;
    Ok(detail)
}

fn determinism_and_checkpoints() -> Verdict {
    let mut cfg = coop_config();
    cfg.env = EnvConfig::Negotiation(Default::default());
    cfg.seeds = vec![3];
    cfg.training.episodes = 60;
    cfg.training.hidden = 16;
    cfg.training.estimator_hidden = 16;
    cfg.corpus.episodes = 10;
    cfg.pretrain = Some(Default::default());
    cfg.snapshot_every = 20;
    cfg.snapshot_episodes = 5;
    cfg.eval_episodes = 20;
    let mut files = 0;
    for v in Variant::ALL {
        let a = run_train(&cfg, v, 3).map_err(|e| e.to_string())?;
        let b = run_train(&cfg, v, 3).map_err(|e| e.to_string())?;
        ensure(a.curve == b.curve, format!("{}: curves differ", v.label()))?;
        let (mut pa, mut pb) = (a.policy, b.policy);
        let ra = run_eval(&cfg.env, &cfg.opponent, &mut pa, 20, &[3]).map_err(|e| e.to_string())?;
        let rb = run_eval(&cfg.env, &cfg.opponent, &mut pb, 20, &[3]).map_err(|e| e.to_string())?;
        ensure(ra.to_json() == rb.to_json(), format!("{}: reports differ", v.label()))?;

        let meta = AgentMeta::describe(&cfg, v, &pa).map_err(|e| e.to_string())?;
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let (first, second) = (dir.path().join("a"), dir.path().join("b"));
        save_policy(&pa, &meta, &first).map_err(|e| e.to_string())?;
        let (loaded, meta2) = load_policy(&first).map_err(|e| e.to_string())?;
        save_policy(&loaded, &meta2, &second).map_err(|e| e.to_string())?;
        for entry in std::fs::read_dir(&first).map_err(|e| e.to_string())? {
            let name = entry.map_err(|e| e.to_string())?.file_name();
            let x = std::fs::read(first.join(&name)).map_err(|e| e.to_string())?;
            let y = std::fs::read(second.join(&name)).map_err(|e| e.to_string())?;
            ensure(x == y, format!("{}: {name:?} differs after reload", v.label()))?;
            files += 1;
        }
    }
    Ok(format!(
        "identical curves and reports for all variants; {files} checkpoint files byte-identical"
    ))
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("gradient fidelity", gradient_fidelity),
        ("bellman/loss oracles", loss_oracles),
        ("tabular sanity", tabular_sanity),
        ("oracle equivalence", oracle_equivalence),
        ("reference fixture", reference_fixture),
        ("replay semantics", replay_semantics),
        ("cooperative ordering", cooperative_ordering),
        ("negotiation cross-play", negotiation_crossplay),
        ("ablation identity", ablation_identity),
        ("beta schedule", beta_schedule),
        ("reward model", reward_model),
        ("determinism & checkpoints", determinism_and_checkpoints),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("PASS  {name}: {detail} [{:.1}s]", start.elapsed().as_secs_f64()),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} [{:.1}s]", start.elapsed().as_secs_f64());
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
