use bdg_core::candidates::ground_metric;
use bdg_core::harness::decide;
use bdg_core::scorer::{synthesize_instance, LabelScores};
use bdg_core::{
    run_game, DecisionRule, GameConfig, InstanceTrace, StoppingMode, SyntheticSpec, Termination,
};

fn two_pairs() -> SyntheticSpec {
    SyntheticSpec {
        n_clusters: 2,
        cluster_sizes: vec![2, 2],
        intra_cluster_distance: 0.05,
        inter_cluster_distance: 0.9,
        generator_noise: 0.0,
        verifier_noise: 0.0,
        correct_cluster: 0,
        seed: 3,
        generator_margin: 1.0,
        verifier_margin: 1.0,
        instances: 1,
        temperatures: vec![0.5, 1.0],
    }
}

fn set_scores(trace: &mut InstanceTrace, generator: [f64; 4], verifier: [f64; 4]) {
    // BTreeMap keys iterate in sorted order
    let keys: Vec<String> = trace.generator_logprob.keys().cloned().collect();
    for (k, key) in keys.iter().enumerate() {
        let g = generator[k];
        trace.generator_logprob.insert(
            key.clone(),
            LabelScores {
                correct: g.ln(),
                incorrect: generator[3 - k].ln(),
            },
        );
        let v = verifier[k];
        trace.verifier_logprob.insert(
            key.clone(),
            LabelScores {
                correct: v.ln(),
                incorrect: (1.0 - v).ln(),
            },
        );
    }
}

/// Generator and verifier agree on the mass of each cluster but swap the
/// ranks inside the correct one.
fn swapped_ranks() -> InstanceTrace {
    let mut trace = synthesize_instance(&two_pairs()).unwrap();
    // keys sort as "concept 0 variant 0", "concept 0 variant 1", "concept 1 ..."
    set_scores(
        &mut trace,
        [0.40, 0.35, 0.15, 0.10],
        [0.80, 0.85, 0.30, 0.20],
    );
    trace
}

#[test]
fn metric_has_two_tight_clusters() {
    let trace = swapped_ranks();
    let cfg = GameConfig::default();
    let set = trace.candidate_set(&cfg).unwrap();
    let d = ground_metric(&set).unwrap();
    let texts: Vec<&str> = set.texts().collect();
    for i in 0..4 {
        for j in 0..4 {
            let same = texts[i].split(' ').nth(1) == texts[j].split(' ').nth(1);
            let want = if i == j {
                0.0
            } else if same {
                0.05
            } else {
                0.9
            };
            assert!((d.get(i, j) - want).abs() < 1e-6, "{i} {j} {}", d.get(i, j));
        }
    }
}

#[test]
fn near_synonym_swap_ends_earlier_under_wasserstein() {
    let trace = swapped_ranks();
    let cfg = GameConfig::default();
    let set = trace.candidate_set(&cfg).unwrap();
    let scores = trace.init_scores(&set).unwrap();
    let metric = ground_metric(&set).unwrap();
    let w = run_game(
        &scores,
        &set,
        &metric,
        &cfg.clone().with_stopping(StoppingMode::Wasserstein),
    )
    .unwrap();
    let c = run_game(
        &scores,
        &set,
        &metric,
        &cfg.with_stopping(StoppingMode::Classic),
    )
    .unwrap();
    assert_eq!(w.iterations_used, 1);
    assert_eq!(w.termination, Termination::WassersteinConsensus);
    assert!(!w.trace.records[0].order_match);
    assert!(
        c.iterations_used > w.iterations_used,
        "classic {}",
        c.iterations_used
    );
    // both winners come from the correct cluster
    for winner in [&w.winner_text, &c.winner_text] {
        assert!(winner.starts_with("concept 0"), "{winner}");
    }
}

#[test]
fn harness_rules_follow_the_game() {
    let trace = swapped_ranks();
    let cfg = GameConfig::default();
    let w = decide(DecisionRule::BdgWasserstein, &trace, &cfg).unwrap();
    let c = decide(DecisionRule::BdgClassic, &trace, &cfg).unwrap();
    assert_eq!(w.iterations, Some(1));
    assert!(c.iterations.unwrap() > 1);
    assert_eq!(
        decide(DecisionRule::Greedy, &trace, &cfg)
            .unwrap()
            .iterations,
        None
    );
    // the verifier prefers the second variant of the correct concept
    assert_eq!(
        decide(DecisionRule::VerifierOnly, &trace, &cfg)
            .unwrap()
            .answer,
        "concept 0 variant 1"
    );
}

#[test]
fn agreeing_state_stops_both_modes_at_first_iteration() {
    let mut trace = synthesize_instance(&two_pairs()).unwrap();
    set_scores(
        &mut trace,
        [0.40, 0.35, 0.15, 0.10],
        [0.86, 0.75, 0.32, 0.21],
    );
    let cfg = GameConfig::default();
    let set = trace.candidate_set(&cfg).unwrap();
    let scores = trace.init_scores(&set).unwrap();
    let metric = ground_metric(&set).unwrap();
    let w = run_game(
        &scores,
        &set,
        &metric,
        &cfg.clone().with_stopping(StoppingMode::Wasserstein),
    )
    .unwrap();
    let c = run_game(
        &scores,
        &set,
        &metric,
        &cfg.with_stopping(StoppingMode::Classic),
    )
    .unwrap();
    assert_eq!((w.iterations_used, c.iterations_used), (1, 1));
    assert_eq!(w.winner_text, c.winner_text);
}

#[test]
fn matching_order_alone_does_not_stop_wasserstein() {
    // Same preference order, but the verifier spreads mass across clusters the
    // generator keeps apart, so W1 / σ_V stays above δ_W.
    let mut trace = synthesize_instance(&two_pairs()).unwrap();
    set_scores(
        &mut trace,
        [0.70, 0.25, 0.04, 0.01],
        [0.66, 0.64, 0.62, 0.60],
    );
    let cfg = GameConfig::default();
    let set = trace.candidate_set(&cfg).unwrap();
    let scores = trace.init_scores(&set).unwrap();
    let metric = ground_metric(&set).unwrap();
    let c = run_game(
        &scores,
        &set,
        &metric,
        &cfg.clone().with_stopping(StoppingMode::Classic),
    )
    .unwrap();
    let w = run_game(
        &scores,
        &set,
        &metric,
        &cfg.clone().with_stopping(StoppingMode::Wasserstein),
    )
    .unwrap();
    assert_eq!(c.iterations_used, 1);
    let first = &w.trace.records[0];
    assert!(first.order_match);
    assert!(first.w1_weighted.unwrap() >= cfg.delta_w);
    assert!(w.iterations_used > 1);
}
