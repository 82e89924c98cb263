// SPDX-License-Identifier: MIT OR Apache-2.0

use proptest::prelude::*;
use rudder::card::extract_card;
use rudder::gate::{gate_value, steering_strength, GateConfig};
use rudder::model::{checkpoint, ForwardCounter, Model, ModelConfig, NoHooks};
use rudder::numerics::{norm, pool, PoolMode};
use rudder::steer::{generate, DecodeStrategy, GenerateOptions, SteerConfig, SteerMode};
use rudder::taskgen::{evaluate, CaptionJudgment};
use std::collections::BTreeSet;

fn small(seed: u64) -> Model {
    Model::init(ModelConfig {
        n_layers: 3,
        max_seq_len: 48,
        ..ModelConfig::tiny(seed)
    })
    .unwrap()
}

fn strategy(which: u8, seed: u64) -> DecodeStrategy {
    match which % 3 {
        0 => DecodeStrategy::Greedy,
        1 => DecodeStrategy::Beam { width: 3 },
        _ => DecodeStrategy::nucleus(seed),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cached_decode_matches_full_pass(seed in 0u64..1000, prompt in prop::collection::vec(0u32..32, 1..12), tail in prop::collection::vec(0u32..32, 1..8)) {
        let m = small(seed);
        let mut all = prompt.clone();
        all.extend(&tail);
        let full = m.forward_logits(&all, &mut NoHooks).unwrap();
        let mut cache = m.new_cache();
        let mut counter = ForwardCounter::default();
        m.prefill(&mut cache, &prompt, &mut NoHooks, &mut counter).unwrap();
        for (i, &t) in tail.iter().enumerate() {
            let step = m.decode_step(&mut cache, t, &mut NoHooks, &mut counter).unwrap();
            let row = &full[prompt.len() + i];
            for (a, b) in step.iter().zip(row) {
                prop_assert!((a - b).abs() <= 1e-9, "step {i}: {a} vs {b}");
            }
        }
        prop_assert_eq!(counter.decode_calls, tail.len() as u64);
    }

    #[test]
    fn gate_is_monotone_in_similarity(k in 0.01f64..30.0, c in -4.0f64..4.0, a in -1.0f64..=1.0, b in -1.0f64..=1.0) {
        let cfg = GateConfig { k, c, ..GateConfig::default() };
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(gate_value(lo, &cfg).g_raw <= gate_value(hi, &cfg).g_raw);
        let out = gate_value(hi, &cfg);
        prop_assert!(out.alpha > 0.0 && out.beta > 0.0);
    }

    #[test]
    fn steering_norm_is_capped(g in 0.0f64..=1.0, alpha in 0.0f64..40.0, tau in 0.1f64..10.0, raw in prop::collection::vec(-5.0f64..5.0, 4)) {
        prop_assume!(norm(&raw) > 1e-3);
        let n = norm(&raw);
        let dir: Vec<f64> = raw.iter().map(|x| x / n).collect();
        let cfg = GateConfig { alpha_max: alpha, tau: Some(tau), ..GateConfig::default() };
        let v = steering_strength(g, &cfg, &dir).unwrap();
        prop_assert!(v.norm() <= tau + 1e-12);
        prop_assert!((v.norm() - (alpha * g).min(tau)).abs() <= 1e-9);
    }

    #[test]
    fn card_is_unit_and_order_free(
        rows in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 6), 1..10),
        scale in 0.01f64..100.0,
        weighted in any::<bool>(),
    ) {
        let mode = if weighted { PoolMode::NormWeightedMean } else { PoolMode::Mean };
        let Ok(card) = extract_card(&rows, mode, 0) else { return Ok(()); };
        prop_assert!((card.direction.norm() - 1.0).abs() <= 1e-12);
        let mut rev = rows.clone();
        rev.reverse();
        let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| x * scale).collect()).collect();
        for other in [rev, scaled] {
            let d = extract_card(&other, mode, 0).unwrap();
            for (a, b) in d.direction.as_slice().iter().zip(card.direction.as_slice()) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn mean_pool_is_linear(rows in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 5), 1..8)) {
        let p = pool(&rows, PoolMode::Mean).unwrap();
        for j in 0..5 {
            let m: f64 = rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64;
            prop_assert!((p.as_slice()[j] - m).abs() <= 1e-12);
        }
    }

    #[test]
    fn forward_counts_are_structural(seed in 0u64..500, which in 0u8..3, mode_ix in 0usize..4, prompt in prop::collection::vec(0u32..32, 2..10), t in 1usize..10) {
        let m = small(seed);
        let steer = SteerConfig { layer: 1, ..SteerConfig::default() }.with_mode(SteerMode::ALL[mode_ix]);
        let g = generate(&m, &prompt, &steer, &strategy(which, seed), &GenerateOptions::new(t)).unwrap();
        let c = g.trace.forward_counter;
        let passes = if steer.mode == SteerMode::ContrastiveTwoPass { 2 } else { 1 };
        prop_assert_eq!(c.prefill_calls, passes);
        prop_assert_eq!(c.decode_calls, passes * g.trace.decode_steps as u64);
    }

    #[test]
    fn trace_matches_gate(seed in 0u64..500, prompt in prop::collection::vec(0u32..32, 2..10), alpha in 0.0f64..30.0, add in any::<bool>()) {
        let m = small(seed);
        let mut steer = SteerConfig { layer: 2, ..SteerConfig::default() };
        steer.gate.alpha_max = alpha;
        let steer = steer.with_mode(if add { SteerMode::RudderAdd } else { SteerMode::RudderBeta });
        let g = generate(&m, &prompt, &steer, &DecodeStrategy::Greedy, &GenerateOptions::new(6)).unwrap();
        for r in g.trace.answer_records() {
            let want = if add { alpha } else { alpha * r.g.unwrap() };
            prop_assert!((r.steer_norm - want).abs() <= 1e-9);
        }
        prop_assert!(g.trace.records.iter().filter(|r| !r.in_answer_span).all(|r| r.steer_norm == 0.0));
    }

    #[test]
    fn nucleus_is_reproducible_from_its_seed(seed in 0u64..500, prompt in prop::collection::vec(0u32..32, 2..8)) {
        let m = small(seed);
        let steer = SteerConfig { layer: 1, ..SteerConfig::default() };
        let opts = GenerateOptions::new(8);
        let a = generate(&m, &prompt, &steer, &DecodeStrategy::nucleus(seed), &opts).unwrap();
        let b = generate(&m, &prompt, &steer, &DecodeStrategy::nucleus(seed), &opts).unwrap();
        prop_assert_eq!(a.tokens, b.tokens);
        prop_assert_eq!(a.trace.records, b.trace.records);
    }

    #[test]
    fn chair_metrics_stay_in_range(caps in prop::collection::vec((prop::collection::btree_set(0u32..10, 0..6), prop::collection::btree_set(0u32..10, 0..6)), 0..12)) {
        let js: Vec<CaptionJudgment> = caps.iter().map(|(m, p)| CaptionJudgment::from_sets(m.clone(), p)).collect();
        let r = evaluate(&js);
        for x in [r.chair_s, r.chair_i, r.recall] {
            prop_assert!((0.0..=1.0).contains(&x));
        }
        prop_assert!(r.n_hallucinated <= r.n_mentioned);
        let none: BTreeSet<u32> = BTreeSet::new();
        let clean: Vec<CaptionJudgment> = caps.iter().map(|(_, p)| CaptionJudgment::from_sets(none.clone(), p)).collect();
        prop_assert_eq!(evaluate(&clean).chair_s, 0.0);
    }
}

#[test]
fn checkpoint_roundtrip_is_exact() {
    let m = small(11);
    let mut bytes = Vec::new();
    checkpoint::write_checkpoint(&m, &mut bytes).unwrap();
    let back = checkpoint::read_checkpoint(bytes.as_slice()).unwrap();
    assert_eq!(back.config(), m.config());
    for ((na, a), (nb, b)) in m.named_params().into_iter().zip(back.named_params()) {
        assert_eq!(na, nb);
        assert_eq!(a, b);
    }
    bytes[0] = b'X';
    assert!(checkpoint::read_checkpoint(bytes.as_slice()).is_err());
}
