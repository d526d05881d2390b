use super::table::TableModel;
use super::*;
use crate::model::{Dims, PAD};
use crate::npad::NoiseSchedule;

const A: usize = 3;
const B: usize = 4;

fn limits(n: usize) -> DecodeLimits {
    DecodeLimits::new(n).unwrap()
}

/// Step-1 argmax `a` leaves little mass after it; `b` then EOS is better.
fn garden_path() -> TableModel {
    TableModel::new(
        5,
        &[
            (&[], &[(A, 0.6), (B, 0.4)]),
            (&[A], &[(A, 0.35), (B, 0.35), (EOS, 0.3)]),
            (&[B], &[(EOS, 0.9), (A, 0.1)]),
        ],
    )
}

fn tiny_dims(vocab: usize) -> Dims {
    Dims {
        src_vocab: 5,
        tgt_vocab: vocab,
        d_emb: 2,
        d_hid: 3,
    }
}

fn random_model(vocab: usize, seed: u64) -> ModelParams {
    ModelParams::random(tiny_dims(vocab), 1.5, seed).unwrap()
}

fn source(seed: u64) -> Vec<usize> {
    let mut rng = RngStream::new(seed ^ 0xabc);
    (0..1 + rng.below(3)).map(|_| 3 + rng.below(2)).collect()
}

/// Greedy path read off full-sequence replays: at each step extend the
/// prefix with the token whose extended prefix scores highest.
fn greedy_oracle<M: StepModel>(model: &M, max_len: usize) -> Vec<usize> {
    let mut prefix = Vec::new();
    while prefix.len() < max_len {
        let best = (0..model.vocab_size())
            .map(|tok| {
                let mut p = prefix.clone();
                p.push(tok);
                (score_tokens(model, &p).unwrap(), tok)
            })
            .fold(
                (f64::NEG_INFINITY, 0),
                |acc, x| if x.0 > acc.0 { x } else { acc },
            );
        prefix.push(best.1);
        if best.1 == EOS {
            break;
        }
    }
    prefix
}

#[test]
fn greedy_point_mass_on_eos() {
    let m = TableModel::new(5, &[(&[], &[(EOS, 1.0)])]);
    let out = greedy_decode(&m, &mut NoiseSource::Silent, limits(5)).unwrap();
    assert_eq!(out.best.tokens, vec![EOS]);
    assert!(out.best.logp.abs() < 1e-6);
    assert!(out.is_complete());
}

#[test]
fn greedy_is_deterministic_and_matches_oracle() {
    for seed in 0..20 {
        let p = random_model(3, seed);
        let m = SourceModel::new(&p, &source(seed)).unwrap();
        let a = greedy_decode(&m, &mut NoiseSource::Silent, limits(3)).unwrap();
        let b = greedy_decode(&m, &mut NoiseSource::Silent, limits(3)).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.best.tokens, greedy_oracle(&m, 3), "seed {seed}");
    }
}

#[test]
fn greedy_flags_runaway() {
    let m = TableModel::new(
        5,
        &[
            (&[], &[(A, 1.0)]),
            (&[A], &[(A, 1.0)]),
            (&[A, A], &[(A, 1.0)]),
        ],
    );
    let out = greedy_decode(&m, &mut NoiseSource::Silent, limits(3)).unwrap();
    assert!(!out.is_complete());
    assert_eq!(out.best.tokens.len(), 3);
    assert!(out.completed.is_empty());
}

#[test]
fn beam_escapes_garden_path() {
    let m = garden_path();
    let g = greedy_decode(&m, &mut NoiseSource::Silent, limits(4)).unwrap();
    assert_eq!(g.best.tokens, vec![A, A, EOS]);
    let b = beam_decode(&m, 2, &mut NoiseSource::Silent, limits(4)).unwrap();
    assert_eq!(b.best.tokens, vec![B, EOS]);
    assert!(b.best.logp > g.best.logp);
    let exact = exact_decode(&m, limits(4)).unwrap();
    assert_eq!(exact.best.tokens, vec![B, EOS]);
}

#[test]
fn beam_width_shrinks_as_hypotheses_complete() {
    // both step-1 children of a width-2 beam end immediately after
    let m = TableModel::new(5, &[(&[], &[(EOS, 0.5), (A, 0.3), (B, 0.2)])]);
    let out = beam_decode(&m, 2, &mut NoiseSource::Silent, limits(6)).unwrap();
    // step 1 keeps [EOS] (complete, width→1) and [a]; step 2 keeps [a, EOS]
    assert_eq!(out.steps, 2);
    let done: Vec<&[usize]> = out.completed.iter().map(|h| &h.tokens[..]).collect();
    assert_eq!(done, vec![&[EOS][..], &[A, EOS][..]]);
    assert_eq!(out.best.tokens, vec![EOS]);
}

#[test]
fn beam_width_one_is_greedy() {
    // randomized corpus: 1000 (model, source) cases, noisy and silent
    for case in 0..1000u64 {
        let vocab = 3 + (case % 4) as usize;
        let p = random_model(vocab, case);
        let m = SourceModel::new(&p, &source(case)).unwrap();
        let lim = limits(1 + (case % 6) as usize);
        let g = greedy_decode(&m, &mut NoiseSource::Silent, lim).unwrap();
        let b = beam_decode(&m, 1, &mut NoiseSource::Silent, lim).unwrap();
        assert_eq!(g.best.tokens, b.best.tokens, "case {case}");
        assert_eq!(g.best.logp.to_bits(), b.best.logp.to_bits());
        assert_eq!(g.best.complete, b.best.complete);

        let sched = NoiseSchedule::inverse_t(0.5).unwrap();
        let g = greedy_decode(&m, &mut NoiseSource::scheduled(case, sched), lim).unwrap();
        let b = beam_decode(&m, 1, &mut NoiseSource::scheduled(case, sched), lim).unwrap();
        assert_eq!(g.best.tokens, b.best.tokens, "noisy case {case}");
    }
}

#[test]
fn wide_beam_equals_exhaustive_search() {
    for seed in 0..50 {
        let vocab = 3 + (seed % 2) as usize;
        let max_len = 3;
        let p = random_model(vocab, seed);
        let m = SourceModel::new(&p, &source(seed)).unwrap();
        let k = vocab.pow(max_len as u32);
        let b = beam_decode(&m, k, &mut NoiseSource::Silent, limits(max_len)).unwrap();
        let e = exact_decode(&m, limits(max_len)).unwrap();
        assert_eq!(b.best.tokens, e.best.tokens, "seed {seed}");
    }
}

#[test]
fn exact_point_mass_and_uniform() {
    let m = TableModel::new(
        5,
        &[
            (&[], &[(B, 1.0)]),
            (&[B], &[(A, 1.0)]),
            (&[B, A], &[(EOS, 1.0)]),
        ],
    );
    assert_eq!(
        exact_decode(&m, limits(4)).unwrap().best.tokens,
        vec![B, A, EOS]
    );

    let mut p = random_model(4, 1);
    p.out_w.fill(0.0);
    p.out_b.fill(0.0);
    let m = SourceModel::new(&p, &[3]).unwrap();
    let e = exact_decode(&m, limits(4)).unwrap();
    assert_eq!(e.best.tokens, vec![EOS]);
    assert!((e.best.logp + 4f64.ln()).abs() < 1e-12);
}

#[test]
fn exact_refuses_large_spaces() {
    let p = random_model(11, 1);
    let m = SourceModel::new(&p, &[3]).unwrap();
    assert!(matches!(
        exact_decode(&m, limits(6)),
        Err(Error::SearchSpace { .. })
    ));
    // 10^6 is exactly at the limit
    let p = random_model(10, 1);
    let m = SourceModel::new(&p, &[3]).unwrap();
    assert!(exact_decode(&m, limits(6)).is_ok());
}

#[test]
fn exact_dominates_and_everything_replays() {
    for seed in 0..30 {
        let p = random_model(4, 100 + seed);
        let m = SourceModel::new(&p, &source(seed)).unwrap();
        let lim = limits(4);
        let e = exact_decode(&m, lim).unwrap();
        let b = beam_decode(&m, 10, &mut NoiseSource::Silent, lim).unwrap();
        let g = greedy_decode(&m, &mut NoiseSource::Silent, lim).unwrap();
        let d = diverse_beam_decode(&m, 3, 0.5, &mut NoiseSource::Silent, lim).unwrap();
        let s =
            sample_decode(&m, &mut RngStream::new(seed), &mut NoiseSource::Silent, lim).unwrap();
        for out in [&e, &b, &g, &d, &s] {
            let replayed = score_tokens(&m, &out.best.tokens).unwrap();
            assert!((replayed - out.best.logp).abs() < 1e-9);
            assert!(out.best.tokens.len() <= lim.max_len);
            if out.best.complete {
                assert!(e.best.logp >= out.best.logp);
            }
        }
        if g.best.complete {
            assert!(b.best.complete);
            assert!(b.best.logp >= g.best.logp, "seed {seed}");
        }
    }
}

#[test]
fn sampling_point_mass_and_determinism() {
    let m = TableModel::new(5, &[(&[], &[(B, 1.0)]), (&[B], &[(EOS, 1.0)])]);
    for seed in 0..20 {
        let out = sample_decode(
            &m,
            &mut RngStream::new(seed),
            &mut NoiseSource::Silent,
            limits(4),
        )
        .unwrap();
        assert_eq!(out.best.tokens, vec![B, EOS]);
    }
    let p = random_model(5, 9);
    let sm = SourceModel::new(&p, &[3, 4]).unwrap();
    let a = sample_decode(
        &sm,
        &mut RngStream::new(4),
        &mut NoiseSource::Silent,
        limits(6),
    )
    .unwrap();
    let b = sample_decode(
        &sm,
        &mut RngStream::new(4),
        &mut NoiseSource::Silent,
        limits(6),
    )
    .unwrap();
    assert_eq!(a.best, b.best);
}

#[test]
fn sampling_frequencies_match_enumeration() {
    // |V| = 3, max_len = 2: outcomes are [EOS], [x, EOS] and the four
    // EOS-free pairs, whose probabilities are read off replays
    let p = random_model(3, 21);
    let m = SourceModel::new(&p, &[3, 4]).unwrap();
    let mut outcomes: Vec<Vec<usize>> = vec![vec![EOS]];
    for x in [PAD, BOS] {
        outcomes.push(vec![x, EOS]);
        for y in [PAD, BOS] {
            outcomes.push(vec![x, y]);
        }
    }
    let probs: Vec<f64> = outcomes
        .iter()
        .map(|o| score_tokens(&m, o).unwrap().exp())
        .collect();
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);

    let n = 100_000;
    let mut counts = vec![0usize; outcomes.len()];
    let mut rng = RngStream::new(2);
    for _ in 0..n {
        let out = sample_decode(&m, &mut rng, &mut NoiseSource::Silent, limits(2)).unwrap();
        let i = outcomes.iter().position(|o| *o == out.best.tokens).unwrap();
        counts[i] += 1;
    }
    for (c, p) in counts.iter().zip(&probs) {
        let f = *c as f64 / n as f64;
        assert!((f - p).abs() < 0.01, "freq {f} vs prob {p}");
    }
}

#[test]
fn diverse_zero_eta_is_beam() {
    for case in 0..300u64 {
        let p = random_model(3 + (case % 3) as usize, case);
        let m = SourceModel::new(&p, &source(case)).unwrap();
        let k = 1 + (case % 5) as usize;
        let lim = limits(5);
        let b = beam_decode(&m, k, &mut NoiseSource::Silent, lim).unwrap();
        let d = diverse_beam_decode(&m, k, 0.0, &mut NoiseSource::Silent, lim).unwrap();
        assert_eq!(b.best, d.best);
        assert_eq!(b.completed, d.completed);
        assert_eq!(b.steps, d.steps);
    }
}

#[test]
fn diverse_width_one_is_greedy() {
    for case in 0..100u64 {
        let p = random_model(5, case);
        let m = SourceModel::new(&p, &source(case)).unwrap();
        let g = greedy_decode(&m, &mut NoiseSource::Silent, limits(5)).unwrap();
        for eta in [0.001, 0.1, 1.0, 10.0] {
            let d = diverse_beam_decode(&m, 1, eta, &mut NoiseSource::Silent, limits(5)).unwrap();
            assert_eq!(g.best.tokens, d.best.tokens);
            assert_eq!(g.best.logp.to_bits(), d.best.logp.to_bits());
        }
    }
}

#[test]
fn diverse_penalty_moves_second_slot_to_other_parent() {
    // after step 2 the plain beam holds a·a (.25) and a·b (.245), both
    // children of `a`; b·a (.225) loses by ln(.245/.225) ≈ 0.0852
    let m = TableModel::new(
        5,
        &[
            (&[], &[(A, 0.5), (B, 0.5 - 1e-3)]),
            (&[A], &[(A, 0.5), (B, 0.49), (EOS, 0.01)]),
            (&[B], &[(A, 0.45), (B, 0.405), (EOS, 0.145)]),
        ],
    );
    let second_parents = |eta: f64| -> Vec<Vec<usize>> {
        let out = diverse_beam_decode(&m, 2, eta, &mut NoiseSource::Silent, limits(3)).unwrap();
        out.completed
            .iter()
            .map(|h| h.tokens[..2].to_vec())
            .collect()
    };
    assert_eq!(second_parents(0.0), vec![vec![A, A], vec![A, B]]);
    assert_eq!(second_parents(0.01), vec![vec![A, A], vec![A, B]]);
    assert_eq!(second_parents(0.1), vec![vec![A, A], vec![B, A]]);
    // reported scores are unpenalized
    let out = diverse_beam_decode(&m, 2, 0.1, &mut NoiseSource::Silent, limits(3)).unwrap();
    for h in &out.completed {
        assert!((score_tokens(&m, &h.tokens).unwrap() - h.logp).abs() < 1e-12);
    }
}

#[test]
fn diverse_rejects_negative_eta() {
    let m = garden_path();
    assert!(diverse_beam_decode(&m, 2, -0.1, &mut NoiseSource::Silent, limits(3)).is_err());
    assert!(beam_decode(&m, 0, &mut NoiseSource::Silent, limits(3)).is_err());
}

#[test]
fn noisy_greedy_reports_noisy_score() {
    let p = random_model(6, 3);
    let m = SourceModel::new(&p, &[3, 4, 3]).unwrap();
    let sched = NoiseSchedule::inverse_t(2.0).unwrap();
    let out = greedy_decode(&m, &mut NoiseSource::scheduled(1, sched), limits(6)).unwrap();
    let clean = score_tokens(&m, &out.best.tokens).unwrap();
    assert!((clean - out.best.logp).abs() > 1e-6);
}

#[test]
fn default_limits() {
    assert_eq!(DecodeLimits::for_source(4).max_len, 13);
    assert!(DecodeLimits::new(0).is_err());
}
