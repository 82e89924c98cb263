// SPDX-License-Identifier: MIT OR Apache-2.0

use super::*;
use crate::model::ModelConfig;

fn model() -> Model {
    Model::init(ModelConfig::tiny(21)).unwrap()
}

fn beta(alpha_max: f64) -> SteerConfig {
    SteerConfig {
        mode: SteerMode::RudderBeta,
        layer: 1,
        gate: GateConfig {
            alpha_max,
            ..GateConfig::default()
        },
        ..SteerConfig::default()
    }
}

fn strategies() -> [DecodeStrategy; 3] {
    [
        DecodeStrategy::Greedy,
        DecodeStrategy::Beam { width: 3 },
        DecodeStrategy::nucleus(9),
    ]
}

const PROMPT: [TokenId; 7] = [1, 7, 3, 9, 2, 11, 4];

fn logits_opts(n: usize) -> GenerateOptions {
    GenerateOptions {
        record_logits: true,
        ..GenerateOptions::new(n)
    }
}

#[test]
fn forward_counts_follow_mode() {
    let m = model();
    for strategy in strategies() {
        for mode in SteerMode::ALL {
            let steer = beta(3.0).with_mode(mode);
            let out = generate(&m, &PROMPT, &steer, &strategy, &GenerateOptions::new(12)).unwrap();
            assert_eq!(out.tokens.len(), 12);
            let mult = if mode == SteerMode::ContrastiveTwoPass { 2 } else { 1 };
            assert_eq!(
                out.trace.forward_counter,
                ForwardCounter {
                    prefill_calls: mult,
                    decode_calls: 12 * mult
                },
                "{mode:?} {strategy:?}"
            );
        }
    }
}

#[test]
fn zero_strength_is_transparent() {
    let m = model();
    for strategy in strategies() {
        let off = generate(&m, &PROMPT, &SteerConfig::default(), &strategy, &logits_opts(10)).unwrap();
        let zero = generate(&m, &PROMPT, &beta(0.0), &strategy, &logits_opts(10)).unwrap();
        assert_eq!(off.tokens, zero.tokens);
        let bits = |g: &Generation| -> Vec<u64> {
            g.trace
                .logits
                .as_ref()
                .unwrap()
                .iter()
                .flatten()
                .map(|x| x.to_bits())
                .collect()
        };
        assert_eq!(bits(&off), bits(&zero));
        assert!(zero.trace.records.iter().all(|r| r.steer_norm == 0.0));
    }
}

#[test]
fn steering_changes_logits_and_respects_answer_span() {
    let m = model();
    let off = generate(
        &m,
        &PROMPT,
        &SteerConfig::default(),
        &DecodeStrategy::Greedy,
        &logits_opts(6),
    )
    .unwrap();
    let on = generate(&m, &PROMPT, &beta(5.0), &DecodeStrategy::Greedy, &logits_opts(6)).unwrap();
    assert_ne!(off.trace.logits, on.trace.logits);
    let prefill: Vec<_> = on.trace.records.iter().filter(|r| !r.in_answer_span).collect();
    assert_eq!(prefill.len(), PROMPT.len() - 1);
    assert!(prefill.iter().all(|r| r.steer_norm == 0.0 && r.g.is_none()));
    for r in on.trace.answer_records() {
        let g = r.g.unwrap();
        assert!((r.steer_norm - 5.0 * g).abs() <= 1e-9);
        assert!(r.s.unwrap().abs() <= 1.0);
    }
    let positions: Vec<usize> = on.trace.records.iter().map(|r| r.position).collect();
    assert_eq!(positions, (0..PROMPT.len() - 1 + 6).collect::<Vec<_>>());
}

#[test]
fn add_mode_uses_constant_strength_and_cap() {
    let m = model();
    let mut steer = beta(4.0).with_mode(SteerMode::RudderAdd);
    steer.gate.k = 0.0; // ignored by the constant-strength mode
    let out = generate(&m, &PROMPT, &steer, &DecodeStrategy::Greedy, &GenerateOptions::new(5)).unwrap();
    for r in out.trace.answer_records() {
        assert_eq!(r.g, Some(1.0));
        assert!(r.s.is_none());
        assert!((r.steer_norm - 4.0).abs() <= 1e-9);
    }
    steer.gate.tau = Some(1.5);
    let capped = generate(&m, &PROMPT, &steer, &DecodeStrategy::Greedy, &GenerateOptions::new(5)).unwrap();
    assert!(capped
        .trace
        .answer_records()
        .all(|r| (r.steer_norm - 1.5).abs() <= 1e-9));
}

#[test]
fn width_one_beam_matches_greedy() {
    let m = model();
    for steer in [SteerConfig::default(), beta(6.0)] {
        let g = generate(&m, &PROMPT, &steer, &DecodeStrategy::Greedy, &logits_opts(15)).unwrap();
        let b = generate(
            &m,
            &PROMPT,
            &steer,
            &DecodeStrategy::Beam { width: 1 },
            &logits_opts(15),
        )
        .unwrap();
        assert_eq!(g.tokens, b.tokens);
        assert_eq!(g.trace.records, b.trace.records);
    }
}

#[test]
fn nucleus_is_seeded_and_cold_limit_is_greedy() {
    let m = model();
    let opts = GenerateOptions::new(15);
    let a = generate(&m, &PROMPT, &beta(2.0), &DecodeStrategy::nucleus(3), &opts).unwrap();
    let b = generate(&m, &PROMPT, &beta(2.0), &DecodeStrategy::nucleus(3), &opts).unwrap();
    assert_eq!(a.tokens, b.tokens);
    assert_eq!(a.trace.records, b.trace.records);

    let cold = DecodeStrategy::Nucleus {
        top_p: 1.0,
        temperature: 1e-6,
        seed: 4,
    };
    let greedy = generate(&m, &PROMPT, &beta(2.0), &DecodeStrategy::Greedy, &opts).unwrap();
    let sampled = generate(&m, &PROMPT, &beta(2.0), &cold, &opts).unwrap();
    assert_eq!(greedy.tokens, sampled.tokens);
}

#[test]
fn contrastive_with_zero_lambda_is_vanilla() {
    let m = model();
    let vanilla = generate(
        &m,
        &PROMPT,
        &SteerConfig::default(),
        &DecodeStrategy::Greedy,
        &GenerateOptions::new(10),
    )
    .unwrap();
    let perturbed = perturb_prompt(&PROMPT, 5);
    assert_eq!(perturbed, vec![1, 5, 3, 5, 2, 5, 4]);
    let c = generate_contrastive(
        &m,
        &PROMPT,
        &perturbed,
        0.0,
        &DecodeStrategy::Greedy,
        &GenerateOptions::new(10),
    )
    .unwrap();
    assert_eq!(vanilla.tokens, c.tokens);
    assert_eq!(
        c.trace.forward_counter,
        ForwardCounter {
            prefill_calls: 2,
            decode_calls: 20
        }
    );
}

#[test]
fn stop_token_ends_generation() {
    let m = model();
    let free = generate(
        &m,
        &PROMPT,
        &SteerConfig::default(),
        &DecodeStrategy::Greedy,
        &GenerateOptions::new(10),
    )
    .unwrap();
    let stop = free.tokens[3];
    let first = free.tokens.iter().position(|&t| t == stop).unwrap();
    let opts = GenerateOptions {
        stop_token: Some(stop),
        ..GenerateOptions::new(10)
    };
    let out = generate(&m, &PROMPT, &SteerConfig::default(), &DecodeStrategy::Greedy, &opts).unwrap();
    assert_eq!(out.tokens, free.tokens[..=first].to_vec());
    assert_eq!(out.trace.forward_counter.decode_calls as usize, out.tokens.len());

    let beam = generate(&m, &PROMPT, &SteerConfig::default(), &DecodeStrategy::beam(), &opts).unwrap();
    assert_eq!(
        beam.trace.forward_counter.decode_calls as usize,
        beam.trace.decode_steps
    );
    assert!(beam.tokens.len() <= beam.trace.decode_steps);
}

#[test]
fn input_validation() {
    let m = model();
    let g = DecodeStrategy::Greedy;
    assert!(matches!(
        generate(&m, &[1], &SteerConfig::default(), &g, &GenerateOptions::new(1)),
        Err(RudderError::PromptTooShort(1))
    ));
    assert!(matches!(
        generate(&m, &PROMPT, &SteerConfig::default(), &g, &GenerateOptions::new(60)),
        Err(RudderError::SpanExceedsContext { .. })
    ));
    let mut bad_layer = beta(1.0);
    bad_layer.layer = 2;
    assert!(matches!(
        generate(&m, &PROMPT, &bad_layer, &g, &GenerateOptions::new(1)),
        Err(RudderError::LayerOutOfRange { .. })
    ));
    let mut flat = beta(1.0);
    flat.gate.k = 0.0;
    assert!(generate(&m, &PROMPT, &flat, &g, &GenerateOptions::new(1)).is_err());
}

#[test]
fn observer_does_not_perturb_generation() {
    use crate::model::{CaptureHooks, HookPoint, HookSite};
    let m = model();
    let plain = generate(&m, &PROMPT, &beta(3.0), &DecodeStrategy::beam(), &logits_opts(8)).unwrap();
    let mut capture = CaptureHooks::new((0..2).flat_map(|l| {
        [
            HookPoint::new(l, HookSite::AttnOut),
            HookPoint::new(l, HookSite::PreAttnLayerNormOut),
        ]
    }));
    let seen = generate_observed(
        &m,
        &PROMPT,
        &beta(3.0),
        &DecodeStrategy::beam(),
        &logits_opts(8),
        &mut capture,
    )
    .unwrap();
    assert_eq!(plain.tokens, seen.tokens);
    assert_eq!(plain.trace.records, seen.trace.records);
    assert_eq!(plain.trace.logits, seen.trace.logits);
    assert!(capture.get(HookPoint::new(0, HookSite::AttnOut)).unwrap().len() >= PROMPT.len() - 1);
}

#[test]
fn jsonl_header_leads_with_provenance() {
    let m = model();
    let out = generate(
        &m,
        &PROMPT,
        &beta(1.0),
        &DecodeStrategy::Greedy,
        &GenerateOptions::new(3),
    )
    .unwrap();
    let header = TraceHeader {
        config_hash: "abc".into(),
        seed: 7,
        engine_version: "0.1.0".into(),
    };
    let text = out.trace.to_jsonl(&header);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + PROMPT.len() - 1 + 3);
    assert!(lines[0].starts_with(r#"{"config_hash":"abc","seed":7,"engine_version":"0.1.0""#));
    assert!(lines[0].contains(r#""card":{"layer":1,"pool_mode":"mean","prefill_len":6}"#));
    assert!(!text.contains("timing"));
}
