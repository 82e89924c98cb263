// SPDX-License-Identifier: MIT OR Apache-2.0

//! Read-only geometry diagnostics: per-layer attention update statistics,
//! text-only CARD, and how the steering direction relates to it.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::card::{extract_card_from_prefill, CardVector};
use crate::error::{Result, RudderError};
use crate::gate::check_unit;
use crate::model::{CaptureHooks, ForwardCounter, HookPoint, HookSite, Model, TokenId};
use crate::numerics::{cosine_similarity, dot, kahan_sum, norm, PoolMode};
use crate::steer::{generate_observed, DecodeStrategy, GenerateOptions, Generation, GenerationTrace, SteerConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDynamics {
    pub layer: usize,
    /// Prefill tokens pooled over all prompts.
    pub n_tokens: usize,
    /// Mean ‖AttnOut‖.
    pub abs_strength: f64,
    /// Mean ‖AttnOut‖ / ‖pre-attention LayerNorm output‖ over tokens whose
    /// LayerNorm output is nonzero.
    pub rel_strength: f64,
    /// Mean pairwise cosine of the nonzero updates; `None` with fewer than
    /// two of them.
    pub coherence: Option<f64>,
}

/// Mean cosine over all unordered pairs of nonzero vectors.
pub fn pairwise_coherence(vectors: &[Vec<f64>]) -> Option<f64> {
    let live: Vec<&Vec<f64>> = vectors.iter().filter(|v| norm(v) > 0.0).collect();
    if live.len() < 2 {
        return None;
    }
    let mut cosines = Vec::with_capacity(live.len() * (live.len() - 1) / 2);
    for i in 0..live.len() {
        for j in i + 1..live.len() {
            cosines.push(cosine_similarity(live[i], live[j]).ok()?);
        }
    }
    Some(kahan_sum(cosines.iter().copied()) / cosines.len() as f64)
}

/// One prefill per prompt with every layer's `AttnOut` and
/// `PreAttnLayerNormOut` captured.
pub fn layer_dynamics(model: &Model, prompts: &[Vec<TokenId>]) -> Result<Vec<LayerDynamics>> {
    if prompts.is_empty() {
        return Err(RudderError::EmptyPool);
    }
    let n_layers = model.config().n_layers;
    let points: Vec<HookPoint> = (0..n_layers)
        .flat_map(|l| {
            [
                HookPoint::new(l, HookSite::AttnOut),
                HookPoint::new(l, HookSite::PreAttnLayerNormOut),
            ]
        })
        .collect();
    let captures: Vec<CaptureHooks> = prompts
        .par_iter()
        .map(|p| {
            let mut cap = CaptureHooks::new(points.iter().copied());
            let mut cache = model.new_cache();
            model.prefill(&mut cache, p, &mut cap, &mut ForwardCounter::default())?;
            Ok(cap)
        })
        .collect::<Result<_>>()?;

    (0..n_layers)
        .map(|l| {
            let mut updates = Vec::new();
            let mut pre = Vec::new();
            for cap in &captures {
                updates.extend_from_slice(cap.get(HookPoint::new(l, HookSite::AttnOut)).unwrap_or_default());
                pre.extend_from_slice(
                    cap.get(HookPoint::new(l, HookSite::PreAttnLayerNormOut))
                        .unwrap_or_default(),
                );
            }
            let norms: Vec<f64> = updates.iter().map(|u| norm(u)).collect();
            let ratios: Vec<f64> = norms
                .iter()
                .zip(&pre)
                .filter_map(|(&n, h)| {
                    let hn = norm(h);
                    (hn > 0.0).then(|| n / hn)
                })
                .collect();
            let mean = |xs: &[f64]| {
                if xs.is_empty() {
                    0.0
                } else {
                    kahan_sum(xs.iter().copied()) / xs.len() as f64
                }
            };
            Ok(LayerDynamics {
                layer: l,
                n_tokens: updates.len(),
                abs_strength: mean(&norms),
                rel_strength: mean(&ratios),
                coherence: pairwise_coherence(&updates),
            })
        })
        .collect()
}

/// CARD of a prompt with the scene prefix removed; same pipeline as the
/// steering path.
pub fn card_text_only(model: &Model, prompt: &[TokenId], layer: usize, mode: PoolMode) -> Result<CardVector> {
    Ok(extract_card_from_prefill(model, prompt, layer, mode)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalEvidence {
    /// Angle between the text-only and scene-conditioned CARD, in radians.
    pub delta_theta: f64,
    /// ⟨v_full, ŝ⟩ − ⟨v_text, ŝ⟩ for the unit steering direction ŝ.
    pub alignment_gain: f64,
    /// Mean gate over the answer span; `None` for ungated runs.
    pub mean_gate: Option<f64>,
}

/// Mean of the injected steering vectors over the answer span: the CARD
/// direction scaled by the mean injected norm. Zero when nothing was
/// injected.
pub fn mean_steering_vector(trace: &GenerationTrace) -> Vec<f64> {
    let Some(card) = &trace.card else {
        return Vec::new();
    };
    let norms: Vec<f64> = trace.answer_records().map(|r| r.steer_norm).collect();
    let scale = if norms.is_empty() {
        0.0
    } else {
        kahan_sum(norms.iter().copied()) / norms.len() as f64
    };
    card.direction.iter().map(|x| scale * x).collect()
}

pub fn directional_evidence(
    v_text: &CardVector,
    v_full: &CardVector,
    v_steer: &[f64],
    trace: &GenerationTrace,
) -> Result<DirectionalEvidence> {
    check_unit(&v_text.direction)?;
    check_unit(&v_full.direction)?;
    let t = v_text.direction.as_slice();
    let f = v_full.direction.as_slice();
    if t.len() != f.len() || (!v_steer.is_empty() && v_steer.len() != f.len()) {
        return Err(RudderError::DimMismatch {
            expected: f.len(),
            got: if t.len() != f.len() { t.len() } else { v_steer.len() },
        });
    }
    let delta_theta = dot(t, f).clamp(-1.0, 1.0).acos();
    let sn = norm(v_steer);
    let alignment_gain = if sn > 0.0 {
        (dot(f, v_steer) - dot(t, v_steer)) / sn
    } else {
        0.0
    };
    Ok(DirectionalEvidence {
        delta_theta,
        alignment_gain,
        mean_gate: trace.mean_gate(),
    })
}

/// Per-sample diagnostics of one steered generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEvidence {
    pub index: usize,
    pub tokens: Vec<TokenId>,
    #[serde(flatten)]
    pub evidence: DirectionalEvidence,
}

/// Steered generation on `prompt` and its directional evidence against the
/// CARD of `text_prompt`. Both CARDs use the prefill context, i.e. the
/// prompt without its last token.
pub fn sample_evidence(
    model: &Model,
    prompt: &[TokenId],
    text_prompt: &[TokenId],
    steer: &SteerConfig,
    strategy: &DecodeStrategy,
    opts: &GenerateOptions,
) -> Result<(Generation, DirectionalEvidence)> {
    let gen = generate_observed(model, prompt, steer, strategy, opts, &mut crate::model::NoHooks)?;
    let ctx = |p: &[TokenId]| -> Result<Vec<TokenId>> {
        if p.len() < 2 {
            return Err(RudderError::PromptTooShort(p.len()));
        }
        Ok(p[..p.len() - 1].to_vec())
    };
    let v_full = match &gen.trace.card {
        Some(c) => c.clone(),
        None => card_text_only(model, &ctx(prompt)?, steer.layer, steer.pool_mode)?,
    };
    let v_text = card_text_only(model, &ctx(text_prompt)?, steer.layer, steer.pool_mode)?;
    let v_steer = mean_steering_vector(&gen.trace);
    let ev = directional_evidence(&v_text, &v_full, &v_steer, &gen.trace)?;
    Ok((gen, ev))
}

/// Generation with every read site of every layer captured alongside.
pub fn capture_generation(
    model: &Model,
    prompt: &[TokenId],
    steer: &SteerConfig,
    strategy: &DecodeStrategy,
    opts: &GenerateOptions,
) -> Result<(Generation, CaptureHooks)> {
    let points = (0..model.config().n_layers).flat_map(|l| {
        [
            HookPoint::new(l, HookSite::AttnOut),
            HookPoint::new(l, HookSite::PreAttnLayerNormOut),
        ]
    });
    let mut cap = CaptureHooks::new(points);
    let gen = generate_observed(model, prompt, steer, strategy, opts, &mut cap)?;
    Ok((gen, cap))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceSummary {
    pub n: usize,
    pub delta_theta_deg_mean: f64,
    pub delta_theta_deg_median: f64,
    pub alignment_gain_mean: f64,
    pub alignment_gain_median: f64,
    pub mean_gate: Option<f64>,
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => 0.0,
        n if n % 2 == 1 => v[n / 2],
        n => (v[n / 2 - 1] + v[n / 2]) / 2.0,
    }
}

pub fn summarize(evidence: &[DirectionalEvidence]) -> EvidenceSummary {
    let n = evidence.len();
    let mean = |xs: &[f64]| {
        if xs.is_empty() {
            0.0
        } else {
            kahan_sum(xs.iter().copied()) / xs.len() as f64
        }
    };
    let theta: Vec<f64> = evidence.iter().map(|e| e.delta_theta.to_degrees()).collect();
    let gain: Vec<f64> = evidence.iter().map(|e| e.alignment_gain).collect();
    let gates: Vec<f64> = evidence.iter().filter_map(|e| e.mean_gate).collect();
    EvidenceSummary {
        n,
        delta_theta_deg_mean: mean(&theta),
        delta_theta_deg_median: median(&theta),
        alignment_gain_mean: mean(&gain),
        alignment_gain_median: median(&gain),
        mean_gate: (!gates.is_empty()).then(|| mean(&gates)),
    }
}

impl fmt::Display for EvidenceSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} delta_theta mean ≈{:.1}°, median ≈{:.1}°; alignment gain mean ≈{:.3}, median ≈{:.3}",
            self.n,
            self.delta_theta_deg_mean,
            self.delta_theta_deg_median,
            self.alignment_gain_mean,
            self.alignment_gain_median
        )?;
        if let Some(g) = self.mean_gate {
            write!(f, "; mean gate {g:.3}")?;
        }
        Ok(())
    }
}

/// CSV of per-layer dynamics; an undefined coherence is an empty field.
pub fn dynamics_to_csv(rows: &[LayerDynamics], provenance: &str) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["layer", "n_tokens", "abs_strength", "rel_strength", "coherence"])
        .map_err(|e| RudderError::Io(std::io::Error::other(e)))?;
    for r in rows {
        w.write_record([
            r.layer.to_string(),
            r.n_tokens.to_string(),
            r.abs_strength.to_string(),
            r.rel_strength.to_string(),
            r.coherence.map(|c| c.to_string()).unwrap_or_default(),
        ])
        .map_err(|e| RudderError::Io(std::io::Error::other(e)))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| RudderError::Io(std::io::Error::other(e.to_string())))?;
    Ok(format!(
        "# {provenance}\n{}",
        String::from_utf8(bytes).expect("csv output is utf-8")
    ))
}

/// Static SVG with one panel per statistic, layers on the x axis.
pub fn dynamics_to_svg(rows: &[LayerDynamics]) -> String {
    let series: [(&str, Vec<Option<f64>>); 3] = [
        ("absolute strength", rows.iter().map(|r| Some(r.abs_strength)).collect()),
        ("relative strength", rows.iter().map(|r| Some(r.rel_strength)).collect()),
        ("coherence", rows.iter().map(|r| r.coherence).collect()),
    ];
    let (pw, ph, pad) = (320.0, 200.0, 30.0);
    let width = 3.0 * pw;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{ph}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    for (k, (title, ys)) in series.iter().enumerate() {
        let x0 = k as f64 * pw;
        let vals: Vec<f64> = ys.iter().flatten().copied().collect();
        let lo = vals.iter().copied().fold(0.0, f64::min);
        let hi = vals.iter().copied().fold(0.0, f64::max).max(lo + 1e-12);
        let n = ys.len().max(1);
        let bw = (pw - 2.0 * pad) / n as f64;
        let y = |v: f64| ph - pad - (v - lo) / (hi - lo) * (ph - 2.0 * pad);
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"16\">{title}</text>\n<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
            x0 + pad,
            x0 + pad,
            y(0.0),
            x0 + pw - pad,
            y(0.0)
        ));
        for (i, v) in ys.iter().enumerate() {
            let Some(v) = v else { continue };
            let (top, bottom) = if *v >= 0.0 { (y(*v), y(0.0)) } else { (y(0.0), y(*v)) };
            svg.push_str(&format!(
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"steelblue\"/>\n",
                x0 + pad + i as f64 * bw + 1.0,
                top,
                (bw - 2.0).max(1.0),
                bottom - top
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::numerics::RealVector;
    use crate::steer::SteerMode;
    use std::f64::consts::FRAC_PI_2;

    fn card(v: Vec<f64>) -> CardVector {
        CardVector {
            layer: 0,
            pool_mode: PoolMode::Mean,
            prefill_len: 1,
            direction: RealVector::new(v).unwrap(),
        }
    }

    fn empty_trace() -> GenerationTrace {
        let m = Model::init(ModelConfig::tiny(0)).unwrap();
        generate_observed(
            &m,
            &[1, 2],
            &SteerConfig::default(),
            &DecodeStrategy::Greedy,
            &GenerateOptions::new(1),
            &mut crate::model::NoHooks,
        )
        .unwrap()
        .trace
    }

    #[test]
    fn coherence_fixtures() {
        assert_eq!(pairwise_coherence(&[vec![1.0, 2.0], vec![1.0, 2.0]]), Some(1.0));
        assert_eq!(pairwise_coherence(&[vec![1.0, 0.0], vec![0.0, 3.0]]), Some(0.0));
        assert_eq!(pairwise_coherence(&[vec![1.0, 0.0]]), None);
        assert_eq!(pairwise_coherence(&[vec![0.0, 0.0], vec![0.0, 0.0]]), None);
    }

    #[test]
    fn hand_evidence() {
        let t = empty_trace();
        let ev = directional_evidence(&card(vec![1.0, 0.0]), &card(vec![0.0, 1.0]), &[0.0, 2.0], &t).unwrap();
        assert!((ev.delta_theta - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(ev.alignment_gain, 1.0);
        let same = directional_evidence(&card(vec![0.6, 0.8]), &card(vec![0.6, 0.8]), &[1.0, 1.0], &t).unwrap();
        assert_eq!(same.delta_theta, 0.0);
        assert_eq!(same.alignment_gain, 0.0);
        let bad = card(vec![0.0, 1.0]);
        let long = CardVector {
            direction: RealVector::new(vec![0.0, 2.0]).unwrap(),
            ..bad.clone()
        };
        assert!(matches!(
            directional_evidence(&long, &bad, &[1.0, 0.0], &t),
            Err(RudderError::NonUnitDirection { .. })
        ));
    }

    #[test]
    fn zeroed_attention_layer_has_no_coherence() {
        let mut m = Model::init(ModelConfig::tiny(3)).unwrap();
        m.param_mut("blocks.1.attn.o.weight").unwrap().fill(0.0);
        m.param_mut("blocks.1.attn.o.bias").unwrap().fill(0.0);
        let rows = layer_dynamics(&m, &[vec![1, 2, 3, 4], vec![5, 6, 7]]).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].abs_strength, 0.0);
        assert_eq!(rows[1].rel_strength, 0.0);
        assert_eq!(rows[1].coherence, None);
        assert!(rows[0].abs_strength > 0.0);
        let c = rows[0].coherence.unwrap();
        assert!((-1.0..=1.0).contains(&c));
        assert_eq!(rows[0].n_tokens, 7);
        let csv = dynamics_to_csv(&rows, "x").unwrap();
        assert!(csv.lines().nth(3).unwrap().ends_with(','));
        assert!(dynamics_to_svg(&rows).starts_with("<svg"));
    }

    #[test]
    fn observing_does_not_perturb() {
        let m = Model::init(ModelConfig::tiny(8)).unwrap();
        let steer = SteerConfig {
            mode: SteerMode::RudderBeta,
            layer: 1,
            ..SteerConfig::default()
        };
        let opts = GenerateOptions {
            record_logits: true,
            ..GenerateOptions::new(6)
        };
        let plain = crate::steer::generate(&m, &[1, 2, 3], &steer, &DecodeStrategy::Greedy, &opts).unwrap();
        let (seen, cap) = capture_generation(&m, &[1, 2, 3], &steer, &DecodeStrategy::Greedy, &opts).unwrap();
        assert_eq!(plain.tokens, seen.tokens);
        assert_eq!(plain.trace.records, seen.trace.records);
        assert_eq!(plain.trace.logits, seen.trace.logits);
        // prefill of 2 plus 6 decode steps
        assert_eq!(cap.get(HookPoint::new(0, HookSite::AttnOut)).unwrap().len(), 8);
    }

    #[test]
    fn summary_format() {
        let ev = [
            DirectionalEvidence {
                delta_theta: 0.7,
                alignment_gain: 0.2,
                mean_gate: Some(0.5),
            },
            DirectionalEvidence {
                delta_theta: 0.71,
                alignment_gain: 0.25,
                mean_gate: None,
            },
        ];
        let s = summarize(&ev);
        assert_eq!(s.n, 2);
        assert_eq!(s.mean_gate, Some(0.5));
        assert!(s.to_string().contains("median ≈"));
    }
}
