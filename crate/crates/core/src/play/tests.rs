use std::sync::Arc;
use std::thread;

use super::*;
use crate::domain::{reference_scenario, ActKind};
use crate::envs::{play_negotiation, Negotiator, ThresholdNegotiator};
use crate::harness::{build_agent, ExperimentConfig, PolicyNegotiator, Variant};
use crate::nn::Activation;
use crate::policy::PolicyNet;

/// A policy whose greedy choice follows a fixed preference: agree, then
/// claim hat and ball, then anything else in catalog order.
fn scripted(config: &NegotiationConfig) -> TrainedPolicy {
    let catalog = negotiation_catalog(config, AGENT_SEAT).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut net = PolicyNet::new(config.state_dim, 4, catalog.len(), Activation::Tanh, &mut rng).unwrap();
    let ids: Vec<_> = net.store.ids().collect();
    for id in ids {
        net.store.value_mut(id).fill(0.0);
    }
    let bias = net.store.id("pi.l2.b").unwrap();
    let agree = catalog
        .index_of(&DialogueAct::bare(AGENT_SEAT, ActKind::Agree))
        .unwrap();
    let claim = catalog.index_of(&DialogueAct::propose(AGENT_SEAT, [0, 1, 1])).unwrap();
    let data = net.store.value_mut(bias).data_mut();
    for (i, v) in data.iter_mut().enumerate() {
        *v = -(i as f64) * 1e-3;
    }
    data[agree] = 2.0;
    data[claim] = 1.0;
    TrainedPolicy::Reinforce(net)
}

fn untrained_oppa(config: &NegotiationConfig) -> TrainedPolicy {
    let cfg = ExperimentConfig {
        env: EnvConfig::Negotiation(config.clone()),
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    TrainedPolicy::Oppa(build_agent(&cfg, Variant::Oppa, 3, &mut rng).unwrap())
}

fn service(policy: TrainedPolicy, config: &NegotiationConfig) -> PlayService {
    PlayService::new(DEFAULT_IDLE).with_agent("ckpt", ServedAgent::new(policy, config.clone()).unwrap())
}

fn create(svc: &PlayService, seed: u64, scenario: Option<Scenario>) -> SessionView {
    svc.create_session(&CreateSession {
        checkpoint: "ckpt".into(),
        seed: Some(seed),
        scenario,
    })
    .unwrap()
}

fn human(kind: ActKind) -> DialogueAct {
    DialogueAct::bare(HUMAN_SEAT, kind)
}

#[test]
fn fixed_seed_fixes_scenario_and_first_mover() {
    let cfg = NegotiationConfig::default();
    let svc = service(scripted(&cfg), &cfg);
    for seed in 0..10 {
        let a = create(&svc, seed, None);
        let b = create(&svc, seed, None);
        assert_ne!(a.id, b.id);
        assert_eq!(
            SessionView { id: String::new(), ..a },
            SessionView { id: String::new(), ..b }
        );
    }
}

#[test]
fn both_first_movers_occur() {
    let cfg = NegotiationConfig::default();
    let svc = service(scripted(&cfg), &cfg);
    let firsts: Vec<Side> = (0..20)
        .map(|s| create(&svc, s, None).transcript.first().map_or(Side::Human, |e| e.side))
        .collect();
    assert!(firsts.contains(&Side::Human) && firsts.contains(&Side::Agent));
}

#[test]
fn human_view_hides_agent_values() {
    let cfg = NegotiationConfig::default();
    let svc = service(scripted(&cfg), &cfg);
    let view = create(&svc, 1, Some(reference_scenario()));
    assert_eq!(view.my_values, reference_scenario().values_b);
    let json = serde_json::to_value(&view).unwrap();
    let mut keys: Vec<&str> = json.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort();
    assert_eq!(
        keys,
        [
            "checkpoint",
            "id",
            "item_counts",
            "my_values",
            "scores",
            "standing_share",
            "status",
            "transcript",
            "whose_turn"
        ]
    );
    let text = json.to_string();
    assert!(!text.contains("values_a") && !text.contains("values_b"));
}

#[test]
fn reference_scenario_plays_to_ten_and_three() {
    let cfg = NegotiationConfig::default();
    let svc = service(scripted(&cfg), &cfg);
    let seed = (0..50)
        .find(|s| create(&svc, *s, Some(reference_scenario())).transcript.len() == 1)
        .expect("some seed lets the agent open");
    let view = create(&svc, seed, Some(reference_scenario()));
    assert_eq!(view.transcript[0].act, DialogueAct::propose(AGENT_SEAT, [0, 1, 1]));
    assert_eq!(view.standing_share, Some([3, 0, 0]));
    let out = svc.post_act(&view.id, &human(ActKind::Agree)).unwrap();
    assert_eq!(out.agent_reply, None);
    assert_eq!(out.view.status, GameStatus::Agreed);
    assert_eq!(
        out.view.scores,
        Some(FinalScores {
            human: 3,
            agent: 10,
            pareto_optimal: true
        })
    );
    assert_eq!(out.view.whose_turn, None);
}

#[test]
fn infeasible_proposal_names_the_cap() {
    let cfg = NegotiationConfig::default();
    let svc = service(scripted(&cfg), &cfg);
    let view = create(&svc, 2, Some(reference_scenario()));
    let err = svc
        .post_act(&view.id, &DialogueAct::propose(HUMAN_SEAT, [4, 0, 0]))
        .unwrap_err();
    match err {
        PlayError::IllegalAct(msg) => assert!(msg.contains("book") && msg.contains('3'), "{msg}"),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(svc.get_state(&view.id).unwrap(), view);
}

#[test]
fn wrong_actor_and_finished_sessions_are_rejected() {
    let cfg = NegotiationConfig::default();
    let svc = service(scripted(&cfg), &cfg);
    let view = create(&svc, 4, None);
    let as_agent = DialogueAct::bare(AGENT_SEAT, ActKind::Greet);
    assert!(matches!(
        svc.post_act(&view.id, &as_agent),
        Err(PlayError::IllegalAct(_))
    ));
    let out = svc.post_act(&view.id, &human(ActKind::End)).unwrap();
    assert_eq!(out.view.status, GameStatus::NoDeal);
    assert_eq!(out.view.transcript.len(), view.transcript.len() + 1);
    assert!(matches!(
        svc.post_act(&view.id, &human(ActKind::Greet)),
        Err(PlayError::Finished)
    ));
    assert!(svc.list_actions(&view.id).unwrap().is_empty());
    assert!(matches!(svc.get_state("nope"), Err(PlayError::UnknownSession(_))));
    assert!(matches!(
        svc.create_session(&CreateSession {
            checkpoint: "other".into(),
            ..Default::default()
        }),
        Err(PlayError::UnknownCheckpoint(_))
    ));
}

#[test]
fn transcript_grows_by_two_per_exchange() {
    let cfg = NegotiationConfig::default();
    let svc = service(untrained_oppa(&cfg), &cfg);
    for seed in 0..5 {
        let mut view = create(&svc, seed, None);
        let mut turn = 0;
        while view.status == GameStatus::Running {
            let acts = svc.list_actions(&view.id).unwrap();
            let act = acts[turn % acts.len()].clone();
            let before = view.transcript.len();
            let out = svc.post_act(&view.id, &act).unwrap();
            let grew = out.view.transcript.len() - before;
            assert_eq!(grew, if out.agent_reply.is_some() { 2 } else { 1 });
            assert!(out.agent_reply.is_some() || out.view.status != GameStatus::Running);
            view = out.view;
            turn += 7;
        }
    }
}

#[test]
fn listed_actions_are_exactly_the_accepted_ones() {
    let cfg = NegotiationConfig {
        item_caps: [1, 1, 1],
        ..Default::default()
    };
    let catalog = negotiation_catalog(&cfg, HUMAN_SEAT).unwrap();
    let svc = service(scripted(&cfg), &cfg);
    for seed in 0..12 {
        let listed = svc.list_actions(&create(&svc, seed, None).id).unwrap();
        assert!(!listed.is_empty());
        for act in catalog.acts() {
            let view = create(&svc, seed, None);
            let ok = svc.post_act(&view.id, act).is_ok();
            assert_eq!(ok, listed.contains(act), "seed {seed} act {act}");
        }
    }
}

/// Plays the scripted human through the service, mirroring the game locally
/// so the human sees exactly what it would see through the library.
fn play_through_service(svc: &PlayService, cfg: &NegotiationConfig, seed: u64) -> Vec<DialogueAct> {
    let view = create(svc, seed, None);
    let first = view.transcript.first().map_or(
        HUMAN_SEAT,
        |e| if e.side == Side::Agent { AGENT_SEAT } else { HUMAN_SEAT },
    );
    let scenario = {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ScenarioSpace::new(cfg).unwrap().sample(&mut rng)
    };
    let mut mirror = NegotiationGame::new(scenario, cfg.clone(), first).unwrap();
    for e in &view.transcript {
        mirror.step(&e.act).unwrap();
    }
    let catalog = negotiation_catalog(cfg, HUMAN_SEAT).unwrap();
    let mut threshold = ThresholdNegotiator::default();
    let mut status = view.status;
    while status == GameStatus::Running {
        let legal = mirror.legal_mask(catalog.acts());
        let i = threshold.choose(&mirror.view(HUMAN_SEAT), &legal, &catalog).unwrap();
        let out = svc.post_act(&view.id, catalog.act(i)).unwrap();
        mirror.step(catalog.act(i)).unwrap();
        if let Some(r) = &out.agent_reply {
            mirror.step(r).unwrap();
        }
        status = out.view.status;
    }
    svc.get_state(&view.id)
        .unwrap()
        .transcript
        .into_iter()
        .map(|e| e.act)
        .collect()
}

#[test]
fn service_replay_matches_library_play() {
    let cfg = NegotiationConfig::default();
    let policy = untrained_oppa(&cfg);
    let svc = service(policy.clone(), &cfg);
    for seed in 0..6 {
        let served = play_through_service(&svc, &cfg, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scenario = ScenarioSpace::new(&cfg).unwrap().sample(&mut rng);
        let first = if rng.random_bool(0.5) { AGENT_SEAT } else { HUMAN_SEAT };
        let mut game = NegotiationGame::new(scenario, cfg.clone(), first).unwrap();
        let mut agent = PolicyNegotiator::new("a", policy.clone(), &cfg).unwrap();
        play_negotiation(&mut game, &mut agent, &mut ThresholdNegotiator::default()).unwrap();
        assert_eq!(served, game.transcript, "seed {seed}");
    }
}

#[test]
fn idle_sessions_expire() {
    let cfg = NegotiationConfig::default();
    let svc = PlayService::new(Duration::from_secs(60))
        .with_agent("ckpt", ServedAgent::new(scripted(&cfg), cfg.clone()).unwrap());
    let view = create(&svc, 0, None);
    assert_eq!(svc.sweep(Instant::now()), 0);
    assert_eq!(svc.sweep(Instant::now() + Duration::from_secs(61)), 1);
    assert!(matches!(svc.get_state(&view.id), Err(PlayError::UnknownSession(_))));
}

#[test]
fn concurrent_posts_are_serialized() {
    let cfg = NegotiationConfig::default();
    let svc = Arc::new(service(scripted(&cfg), &cfg));
    let shared = create(&svc, 5, Some(reference_scenario())).id;
    let own: Vec<String> = (0..4).map(|s| create(&svc, 100 + s, None).id).collect();
    let handles: Vec<_> = (0..8)
        .map(|t| {
            let svc = Arc::clone(&svc);
            let id = if t % 2 == 0 { shared.clone() } else { own[t / 2].clone() };
            thread::spawn(move || {
                (0..5)
                    .filter(|_| svc.post_act(&id, &human(ActKind::Greet)).is_ok())
                    .count()
            })
        })
        .collect();
    let counts: Vec<usize> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    let shared_ok: usize = counts.iter().step_by(2).sum();
    let view = svc.get_state(&shared).unwrap();
    let opening = usize::from(view.transcript.first().is_some_and(|e| e.side == Side::Agent));
    let human_acts = view.transcript.iter().filter(|e| e.side == Side::Human).count();
    assert_eq!(human_acts, shared_ok);
    assert!(view.transcript.len() >= opening + shared_ok);
    let mut replay = NegotiationGame::new(
        reference_scenario(),
        cfg.clone(),
        view.transcript.first().map_or(HUMAN_SEAT, |e| e.act.actor),
    )
    .unwrap();
    for e in &view.transcript {
        replay.step(&e.act).unwrap();
    }
    for (k, id) in own.iter().enumerate() {
        let v = svc.get_state(id).unwrap();
        let humans = v.transcript.iter().filter(|e| e.side == Side::Human).count();
        assert_eq!(humans, counts[2 * k + 1]);
    }
}

#[test]
fn finished_sessions_are_logged() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sessions.jsonl");
    let cfg = NegotiationConfig::default();
    let svc = service(scripted(&cfg), &cfg).with_transcript_log(path.clone());
    let view = create(&svc, 0, None);
    svc.post_act(&view.id, &human(ActKind::End)).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.contains(&view.id));
}
