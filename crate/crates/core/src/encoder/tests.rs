use proptest::prelude::*;

use super::*;
use crate::rng::SplitMix64;

fn emb(rows: &[&[f64]]) -> ContextualEmbeddings {
    ContextualEmbeddings::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

fn scalar_params(w1: [f64; 3], w2: [f64; 3]) -> EncoderParams {
    let mut p = EncoderParams::zeros(1, 3);
    p.w1 = w1.to_vec();
    p.w2 = w2.to_vec();
    p
}

#[test]
fn token_stage_hand_example() {
    let t = emb(&[&[0.0], &[-1.0], &[2.0], &[0.5]]);
    let st = gather_spans(&t, &[1..4], 1, 4).unwrap();
    let c = token_stage(&st, &EncoderParams::center_identity(1, 3)).unwrap();
    assert_eq!(c.row(0), [2.0]);
    assert!(c.is_valid(0));
}

#[test]
fn token_stage_zero_span() {
    let t = emb(&[&[1.0, 1.0], &[0.0, 0.0], &[0.0, 0.0]]);
    let st = gather_spans(&t, &[1..3], 2, 3).unwrap();
    let c = token_stage(&st, &EncoderParams::center_identity(2, 3)).unwrap();
    assert_eq!(c.row(0), [0.0, 0.0]);
    assert_eq!(c.row(1), [0.0, 0.0]);
    assert!(!c.is_valid(1));
}

#[test]
fn token_stage_ignores_padding_length() {
    let t = emb(&[&[0.0], &[2.0]]);
    let mut rng = SplitMix64::new(3);
    let p = EncoderParams::init(1, 3, 1.0, &mut rng);
    let a = token_stage(&gather_spans(&t, &[1..2], 1, 4).unwrap(), &p).unwrap();
    let b = token_stage(&gather_spans(&t, &[1..2], 1, 2).unwrap(), &p).unwrap();
    assert_eq!(a.row(0), b.row(0));
}

#[test]
fn gather_places_and_pads() {
    let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, -(i as f64)]).collect();
    let t = ContextualEmbeddings::from_rows(&rows).unwrap();
    let st = gather_spans(&t, &[1..3, 3..5], 3, 4).unwrap();
    assert_eq!(st.span_count(), 2);
    assert_eq!(st.slot(0, 0), t.row(1));
    assert_eq!(st.slot(0, 1), t.row(2));
    assert_eq!(st.slot(1, 1), t.row(4));
    for (span, slot) in [(0, 2), (0, 3), (1, 2), (2, 0), (2, 3)] {
        assert!(!st.mask(span, slot));
        assert_eq!(st.slot(span, slot), [0.0, 0.0]);
    }
    assert!(st.mask(1, 0));
}

#[test]
fn gather_truncates() {
    let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64]).collect();
    let t = ContextualEmbeddings::from_rows(&rows).unwrap();
    let st = gather_spans(&t, &[1..7], 1, 4).unwrap();
    assert_eq!(st.span_lengths(), [4]);
    assert_eq!(st.slot(0, 3), [4.0]);

    let spans: Vec<_> = (1..21).map(|i| i..i + 1).collect();
    let st = gather_spans(&t, &spans, 16, 1).unwrap();
    assert_eq!(st.span_count(), 16);
    assert_eq!(st.slot(15, 0), [16.0]);
}

#[test]
fn gather_errors() {
    let t = emb(&[&[0.0], &[1.0]]);
    assert!(matches!(
        gather_spans(&t, &[], 2, 2),
        Err(Error::EmptySpans)
    ));
    assert!(gather_spans(&t, &[0..2], 2, 2).is_err());
    assert!(gather_spans(&t, &[1..3], 2, 2).is_err());
}

#[test]
fn span_stage_examples() {
    let p = EncoderParams::center_identity(3, 3);
    let c = SpanVectors::new(2, 3, vec![1.5, -2.0, 0.0, 0.0, 0.0, 0.0], vec![true, false]).unwrap();
    assert_eq!(span_stage(&c, &p).unwrap(), [1.5, 0.0, 0.0]);

    let zeros = SpanVectors::new(2, 3, vec![0.0; 6], vec![true, true]).unwrap();
    assert_eq!(span_stage(&zeros, &p).unwrap(), [0.0; 3]);

    let mut rng = SplitMix64::new(11);
    let p = EncoderParams::init(3, 3, 1.0, &mut rng);
    let data: Vec<f64> = (0..6).map(|_| rng.uniform(0.0, 1.0)).collect();
    let short = SpanVectors::new(2, 3, data.clone(), vec![true, true]).unwrap();
    let mut padded = data;
    padded.extend([0.0; 9]);
    let long = SpanVectors::new(5, 3, padded, vec![true, true, false, false, false]).unwrap();
    assert_eq!(
        span_stage(&short, &p).unwrap(),
        span_stage(&long, &p).unwrap()
    );

    let none = SpanVectors::new(1, 3, vec![0.0; 3], vec![false]).unwrap();
    assert!(matches!(span_stage(&none, &p), Err(Error::EmptySpans)));
}

#[test]
fn attention_pool_examples() {
    let mut rng = SplitMix64::new(5);
    let p = EncoderParams::init(2, 3, 1.0, &mut rng).token_attn;
    assert_eq!(
        self_attentive_pool(&[0.3, -0.7], 1, &p).unwrap(),
        [0.3, -0.7]
    );

    let same = self_attentive_pool(&[0.25, 0.5, 0.25, 0.5, 0.25, 0.5], 3, &p).unwrap();
    assert!((same[0] - 0.25).abs() < 1e-15 && (same[1] - 0.5).abs() < 1e-15);

    // W = I, v = (1, 0): scores tanh(1) and tanh(0).
    let hand = AttentionParams {
        d: 2,
        hidden: 2,
        w: vec![1.0, 0.0, 0.0, 1.0],
        v: vec![1.0, 0.0],
    };
    let out = self_attentive_pool(&[1.0, 0.0, 0.0, 1.0], 2, &hand).unwrap();
    let a1 = 1f64.tanh().exp();
    let alpha = a1 / (a1 + 1.0);
    assert!((out[0] - alpha).abs() < 1e-15);
    assert!((out[1] - (1.0 - alpha)).abs() < 1e-15);

    assert!(self_attentive_pool(&[1.0, 2.0, 3.0], 2, &hand).is_err());
}

#[test]
fn concat_order() {
    let t = emb(&[&[3.0, 4.0], &[9.0, 9.0]]);
    let s = concat_cls(&[1.0, 2.0], &t).unwrap();
    assert_eq!(s.as_slice(), [1.0, 2.0, 3.0, 4.0]);
    assert_eq!(
        concat_cls(&[0.0, 0.0], &t).unwrap().as_slice(),
        [0.0, 0.0, 3.0, 4.0]
    );
    assert!(concat_cls(&[1.0], &t).is_err());
}

#[test]
fn token_level_equals_token_stage() {
    let mut rng = SplitMix64::new(8);
    let rows: Vec<Vec<f64>> = (0..7)
        .map(|_| (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect())
        .collect();
    let t = ContextualEmbeddings::from_rows(&rows).unwrap();
    let p = EncoderParams::init(3, 3, 0.5, &mut rng);
    let st = gather_spans(&t, &[1..3, 3..4, 4..7], 5, 3).unwrap();
    let a = encode_token_level(&st, &p).unwrap();
    let b = token_stage(&st, &p).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.row(3), [0.0; 3]);
    assert_eq!(a.row(4), [0.0; 3]);
}

#[test]
fn forward_cnn_cnn_hand_trace() {
    // c = (max(0, 2, 0.5), 3) = (2, 3); stage two taps (0.5, 1, -1):
    // s'_0 = 2 - 3 = -1 -> 0, s'_1 = 0.5 * 2 + 3 = 4.
    let t = emb(&[&[0.7], &[-1.0], &[2.0], &[0.5], &[3.0]]);
    let p = scalar_params([0.0, 1.0, 0.0], [0.5, 1.0, -1.0]);
    let (rep, cache) = forward(
        &t,
        &[1..4, 4..5],
        SpanLimits::new(4, 4),
        &p,
        Variant::CnnCnn,
    )
    .unwrap();
    assert_eq!(rep.as_slice(), [4.0, 0.7]);
    assert_eq!(cache.span_vectors().unwrap().row(0), [2.0]);
    assert_eq!(cache.span_vectors().unwrap().row(1), [3.0]);
}

#[test]
fn forward_cnn_max_single_span() {
    let mut rng = SplitMix64::new(21);
    let rows: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect())
        .collect();
    let t = ContextualEmbeddings::from_rows(&rows).unwrap();
    let p = EncoderParams::init(3, 3, 0.5, &mut rng);
    let (rep, cache) = forward(&t, &[1..4], SpanLimits::new(2, 4), &p, Variant::CnnMax).unwrap();
    assert_eq!(rep.span_part(), cache.span_vectors().unwrap().row(0));
}

#[test]
fn every_variant_has_width_2d() {
    let mut rng = SplitMix64::new(4);
    let rows: Vec<Vec<f64>> = (0..6)
        .map(|_| (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect())
        .collect();
    let t = ContextualEmbeddings::from_rows(&rows).unwrap();
    let p = EncoderParams::init(4, 3, 0.5, &mut rng);
    for v in [
        Variant::CnnCnn,
        Variant::CnnMax,
        Variant::AttnMax,
        Variant::AttnAttn,
        Variant::TokenCnn,
    ] {
        let (rep, _) = forward(&t, &[1..3, 3..6], SpanLimits::new(4, 4), &p, v).unwrap();
        assert_eq!(rep.as_slice().len(), 8, "{v}");
        assert_eq!(rep.cls_part(), t.cls());
    }
}

#[test]
fn within_span_order_matters() {
    let t1 = emb(&[&[0.0], &[1.0], &[-1.0]]);
    let t2 = emb(&[&[0.0], &[-1.0], &[1.0]]);
    let p = scalar_params([1.0, 0.0, -1.0], [0.0, 1.0, 0.0]);
    let c1 = token_stage(&gather_spans(&t1, &[1..3], 1, 2).unwrap(), &p).unwrap();
    let c2 = token_stage(&gather_spans(&t2, &[1..3], 1, 2).unwrap(), &p).unwrap();
    assert_ne!(c1.row(0), c2.row(0));
}

#[test]
fn backward_basics() {
    let mut rng = SplitMix64::new(17);
    let rows: Vec<Vec<f64>> = (0..6)
        .map(|_| (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect())
        .collect();
    let t = ContextualEmbeddings::from_rows(&rows).unwrap();
    let p = EncoderParams::init(3, 3, 0.5, &mut rng);
    for v in [
        Variant::CnnCnn,
        Variant::CnnMax,
        Variant::AttnMax,
        Variant::AttnAttn,
        Variant::TokenCnn,
    ] {
        let (_, cache) = forward(&t, &[1..3, 3..6], SpanLimits::new(2, 4), &p, v).unwrap();
        let g = backward(&cache, &p, &[0.0; 6]).unwrap();
        assert!(g
            .params
            .tensors()
            .iter()
            .all(|t| t.iter().all(|&x| x == 0.0)));
        assert!(g.embeddings.iter().all(|&x| x == 0.0));

        // Only the concatenation reaches t1.
        let up = [0.3, -0.2, 0.9, 1.0, 2.0, 3.0];
        let g = backward(&cache, &p, &up).unwrap();
        assert_eq!(&g.embeddings[..3], &up[3..]);

        let mut stale = p.clone();
        stale.b1[0] += 1.0;
        assert!(matches!(
            backward(&cache, &stale, &up),
            Err(Error::Cache(_))
        ));
        assert!(backward(&cache, &p, &up[..4]).is_err());
    }
}

#[test]
fn masked_slots_get_no_gradient() {
    let mut rng = SplitMix64::new(2);
    let rows: Vec<Vec<f64>> = (0..8)
        .map(|_| (0..2).map(|_| rng.uniform(-1.0, 1.0)).collect())
        .collect();
    let t = ContextualEmbeddings::from_rows(&rows).unwrap();
    let p = EncoderParams::init(2, 3, 0.5, &mut rng);
    // Rows 3 and 4 are cut by l = 2; rows 6.. are beyond r = 2.
    let (_, cache) = forward(
        &t,
        &[1..5, 5..6, 6..8],
        SpanLimits::new(2, 2),
        &p,
        Variant::CnnCnn,
    )
    .unwrap();
    let g = backward(&cache, &p, &[1.0, 1.0, 0.0, 0.0]).unwrap();
    for row in [3, 4, 6, 7] {
        assert_eq!(&g.embeddings[row * 2..row * 2 + 2], [0.0, 0.0], "row {row}");
    }
}

#[test]
fn grad_check_small_instances() {
    for v in [
        Variant::CnnCnn,
        Variant::CnnMax,
        Variant::AttnMax,
        Variant::AttnAttn,
        Variant::TokenCnn,
    ] {
        let dims = GradCheckDims {
            d: 3,
            r: 2,
            l: 4,
            k: 3,
            variant: v,
        };
        let report = grad_check(dims, 42, 1e-5, 1e-4).unwrap();
        assert!(report.passed, "{v}: {report:?}");
        let strict = grad_check(dims, 42, 1e-5, 0.0).unwrap();
        assert!(!strict.passed && strict.max_rel_error > 0.0);
    }
}

fn random_problem(
    seed: u64,
) -> (
    ContextualEmbeddings,
    Vec<std::ops::Range<usize>>,
    EncoderParams,
    usize,
    usize,
) {
    let mut rng = SplitMix64::new(seed);
    let d = 1 + rng.below(4) as usize;
    let spans = 1 + rng.below(5) as usize;
    let mut bounds = Vec::new();
    let mut pos = 1;
    let mut longest = 0;
    for _ in 0..spans {
        let len = 1 + rng.below(4) as usize;
        longest = longest.max(len);
        bounds.push(pos..pos + len);
        pos += len;
    }
    let data = (0..pos * d).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let t = ContextualEmbeddings::new(pos, d, data).unwrap();
    let p = EncoderParams::init(d, 3, 0.5, &mut rng);
    (t, bounds, p, spans, longest)
}

proptest! {
    #[test]
    fn padding_is_invisible(seed in any::<u64>(), extra_r in 0usize..5, extra_l in 0usize..5, vi in 0usize..4) {
        let (t, bounds, p, spans, longest) = random_problem(seed);
        let v = Variant::SPAN_VARIANTS[vi];
        let (a, _) = forward(&t, &bounds, SpanLimits::new(spans, longest), &p, v).unwrap();
        let (b, _) = forward(&t, &bounds, SpanLimits::new(spans + extra_r, longest + extra_l), &p, v).unwrap();
        let bits = |r: &SentenceRepresentation| r.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn cnn_outputs_are_non_negative(seed in any::<u64>(), cnn_max in any::<bool>()) {
        let (t, bounds, p, spans, longest) = random_problem(seed);
        let v = if cnn_max { Variant::CnnMax } else { Variant::CnnCnn };
        let (rep, cache) = forward(&t, &bounds, SpanLimits::new(spans, longest), &p, v).unwrap();
        prop_assert!(rep.span_part().iter().all(|&x| x >= 0.0));
        prop_assert!(cache.span_vectors().unwrap().as_slice().iter().all(|&x| x >= 0.0));
    }
}
