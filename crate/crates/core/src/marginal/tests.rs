use super::*;
use crate::codec::Merge;
use crate::lm::toy::SeededLm;
use crate::lm::{ConditionalTableLm, NextTokenDistribution, StringTableLm};
use crate::text::{focal_area, segment_rois, Convention, FocalSpec};

fn toy_codec() -> Codec {
    Codec::new(vec!["a".into(), "b".into(), "ab".into()], vec![Merge { left: 0, right: 1 }]).unwrap()
}

// p([a]) = .3, p([a,b]) = .2, p([ab]) = .2, p([b]) = .3
fn toy_lm() -> StringTableLm {
    StringTableLm::new(3, vec![(vec![0], 0.3), (vec![0, 1], 0.2), (vec![2], 0.2), (vec![1], 0.3)]).unwrap()
}

/// Character prefix probability straight from the finite support.
fn support_prefix_prob(codec: &Codec, lm: &StringTableLm, text: &str) -> f64 {
    lm.support().filter(|(s, _)| codec.decode(s).unwrap().starts_with(text)).map(|(_, p)| p).sum()
}

fn support_string_prob(codec: &Codec, lm: &StringTableLm, text: &str) -> f64 {
    lm.support().filter(|(s, _)| codec.decode(s).unwrap() == text).map(|(_, p)| p).sum()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn toy_prefix_probabilities() {
    let codec = toy_codec();
    let lm = toy_lm();
    for method in [Method::Exact, Method::Beam(BeamConfig::unbounded())] {
        let m = CharLm::new(&codec, &lm, method).unwrap();
        assert_eq!(m.prefix_prob("").unwrap(), 1.0);
        assert!(close(m.prefix_prob("a").unwrap(), 0.7, 1e-12));
        assert!(close(m.prefix_prob("ab").unwrap(), 0.4, 1e-12));
        assert!(close(m.prefix_prob("b").unwrap(), 0.3, 1e-12));
        assert_eq!(m.prefix_prob("ba").unwrap(), 0.0);
        assert!(close(m.conditional_prob("b", "a").unwrap(), 0.4 / 0.7, 1e-12));
        assert_eq!(m.conditional_prob("", "a").unwrap(), 1.0);
        assert!(close(m.eos_prob("ab").unwrap(), 1.0, 1e-12));
        assert!(close(m.eos_prob("a").unwrap(), 0.3 / 0.7, 1e-12));
        assert!(matches!(m.conditional_prob("a", "ba"), Err(MarginalError::UndefinedConditional { .. })));
    }
}

#[test]
fn toy_cover() {
    let codec = toy_codec();
    let lm = toy_lm();
    let m = CharLm::new(&codec, &lm, Method::Exact).unwrap();
    assert_eq!(m.prefix_cover_exact("ab").unwrap(), vec![vec![0, 1], vec![2]]);
    assert_eq!(m.prefix_cover_exact("a").unwrap(), vec![vec![0], vec![2]]);
    assert_eq!(m.prefix_cover_exact("").unwrap(), vec![Vec::<TokenId>::new()]);
}

#[test]
fn vocab_mismatch_rejected() {
    let codec = toy_codec();
    let lm = SeededLm::new(4, 0);
    assert!(matches!(CharLm::new(&codec, &lm, Method::Exact), Err(MarginalError::VocabMismatch { codec: 3, lm: 4 })));
}

#[test]
fn method_parsing() {
    assert_eq!("exact".parse::<Method>().unwrap(), Method::Exact);
    assert_eq!("beam".parse::<Method>().unwrap(), Method::Beam(BeamConfig { width: 5 }));
    assert_eq!("beam:3".parse::<Method>().unwrap().to_string(), "beam:3");
    assert!("beam:0".parse::<Method>().is_err());
    assert!("greedy".parse::<Method>().is_err());
}

#[test]
fn uniform_characters_give_log_two() {
    let codec = Codec::from_decodings(["a", "b"]).unwrap();
    let lm = ConditionalTableLm::new(NextTokenDistribution::from_probs(&[0.5, 0.5], 0.0).unwrap());
    let stim = Stimulus::new("s", "abba").unwrap();
    for method in [Method::Exact, Method::Beam(BeamConfig::default())] {
        let m = CharLm::new(&codec, &lm, method).unwrap();
        for start in 1..=4 {
            let area = FocalArea { interval: Interval { start, end: start + 1 }, roi_index: 1 };
            assert!(close(m.surprisal(&stim, &area, false).unwrap(), std::f64::consts::LN_2, 1e-12));
        }
        let bits = CharLm::new(&codec, &lm, method).unwrap().with_log_base(2.0);
        let area = FocalArea { interval: Interval { start: 2, end: 4 }, roi_index: 1 };
        assert!(close(bits.surprisal(&stim, &area, false).unwrap(), 2.0, 1e-12));
    }
}

#[test]
fn deterministic_model_has_zero_surprisal() {
    let codec = Codec::from_decodings(["a", "b", " "]).unwrap();
    let lm = StringTableLm::new(3, vec![(vec![0, 2, 1], 1.0)]).unwrap();
    let stim = Stimulus::new("s", "a b").unwrap();
    let m = CharLm::new(&codec, &lm, Method::Exact).unwrap();
    for (start, end) in [(1, 2), (2, 4), (1, 4), (3, 4)] {
        let area = FocalArea { interval: Interval { start, end }, roi_index: 1 };
        assert_eq!(m.surprisal(&stim, &area, false).unwrap(), 0.0);
        assert_eq!(m.surprisal(&stim, &area, true).unwrap(), 0.0);
    }
    assert_eq!(m.conditional_prob("b", "a ").unwrap(), 1.0);
    assert_eq!(m.conditional_prob("a", "a ").unwrap(), 0.0);
}

#[test]
fn always_stop_model() {
    let codec = toy_codec();
    let lm = ConditionalTableLm::new(NextTokenDistribution::stop(3));
    let m = CharLm::new(&codec, &lm, Method::Exact).unwrap();
    assert_eq!(m.eos_prob("").unwrap(), 1.0);
    assert_eq!(m.prefix_prob("a").unwrap(), 0.0);
}

#[test]
fn zero_completion_mass_gives_zero_eos() {
    let codec = toy_codec();
    let lm = toy_lm();
    let m = CharLm::new(&codec, &lm, Method::Exact).unwrap();
    // "a" continues to "ab" with probability .4 and stops with .3; "" never stops
    assert_eq!(m.eos_prob("").unwrap(), 0.0);
}

#[test]
fn toy_surprisal_matches_hand_value() {
    let codec = toy_codec();
    let lm = toy_lm();
    let stim = Stimulus::new("s", "ab").unwrap();
    let area = FocalArea { interval: Interval { start: 2, end: 3 }, roi_index: 1 };
    for method in [Method::Exact, Method::Beam(BeamConfig::default())] {
        let m = CharLm::new(&codec, &lm, method).unwrap();
        assert!(close(m.surprisal(&stim, &area, false).unwrap(), -(0.4f64 / 0.7).ln(), 1e-12));
        // "ab" always ends there
        assert!(close(m.surprisal(&stim, &area, true).unwrap(), -(0.4f64 / 0.7).ln(), 1e-12));
    }
}

#[test]
fn exact_matches_support_enumeration() {
    // a richer codec with overlapping merges
    let codec = Codec::new(
        vec!["a".into(), "b".into(), "ab".into(), "ba".into(), "aba".into()],
        vec![Merge { left: 0, right: 1 }, Merge { left: 1, right: 0 }, Merge { left: 2, right: 0 }],
    )
    .unwrap();
    let mut table = Vec::new();
    let mut seed = 7u64;
    let mut total = 0.0;
    for a in 0..5u32 {
        for b in 0..6u32 {
            for c in 0..6u32 {
                let mut s = vec![a];
                if b < 5 {
                    s.push(b);
                    if c < 5 {
                        s.push(c);
                    }
                } else if c < 5 {
                    continue;
                }
                seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let w = 1.0 + (seed >> 40) as f64 / (1u64 << 24) as f64;
                total += w;
                table.push((s, w));
            }
        }
    }
    let table: Vec<_> = table.into_iter().map(|(s, w)| (s, w / total)).collect();
    let lm = StringTableLm::new(5, table).unwrap();
    let m = CharLm::new(&codec, &lm, Method::Exact).unwrap();
    let beam = CharLm::new(&codec, &lm, Method::Beam(BeamConfig::unbounded())).unwrap();
    for text in ["a", "b", "ab", "ba", "aba", "abab", "babab", "aaa", "bab", "ababab", "abba"] {
        let want = support_prefix_prob(&codec, &lm, text);
        assert!(close(m.prefix_prob(text).unwrap(), want, 1e-12), "{text}");
        assert!(close(beam.prefix_prob(text).unwrap(), want, 1e-12), "{text}");
        let want_s = support_string_prob(&codec, &lm, text);
        assert!(close(m.string_logprob(text).unwrap().exp(), want_s, 1e-12), "{text}");
        assert!(close(beam.string_logprob(text).unwrap().exp(), want_s, 1e-12), "{text}");
    }
}

#[test]
fn character_normalization_under_exact() {
    let codec = Codec::new(
        vec!["a".into(), "b".into(), "c".into(), "ab".into(), "bc".into(), "abc".into()],
        vec![Merge { left: 0, right: 1 }, Merge { left: 1, right: 2 }, Merge { left: 3, right: 2 }],
    )
    .unwrap();
    let lm = SeededLm::new(6, 11).with_eos_boost(1.0);
    let m = CharLm::new(&codec, &lm, Method::Exact).unwrap();
    for ctx in ["", "a", "ab", "abc", "cab", "bbca"] {
        let total: f64 = ['a', 'b', 'c'].iter().map(|c| m.conditional_prob(&c.to_string(), ctx).unwrap()).sum::<f64>()
            + m.eos_prob(ctx).unwrap();
        assert!((total - 1.0).abs() < 1e-9, "{ctx}: {total}");
    }
}

#[test]
fn batch_matches_single_calls() {
    let stim = Stimulus::new("t1", "Anne lost control and laughed.").unwrap();
    let chars: String = {
        let mut cs: Vec<char> = stim.chars().to_vec();
        cs.sort();
        cs.dedup();
        cs.into_iter().collect()
    };
    let codec = crate::codec::train_bpe(&[stim.text(), "Anne and control"], chars.chars().count() + 12).unwrap();
    let lm = SeededLm::new(codec.vocab_size(), 5);
    let specs = FocalSpec::standard();
    for method in [Method::Beam(BeamConfig::default()), Method::Beam(BeamConfig::new(1).unwrap())] {
        let m = CharLm::new(&codec, &lm, method).unwrap();
        for conv in Convention::ALL {
            let rois = segment_rois(&stim, conv).unwrap();
            let table = surprisal_batch(&m, &rois, &specs, true);
            assert_eq!(table.rows.len(), 4);
            assert_eq!(table.roi_surprisal.len(), 5);
            for row in &table.rows {
                assert_eq!(row.cells.len(), 10);
                for (j, cell) in row.cells.iter().enumerate() {
                    let area = focal_area(&rois, row.roi_index, specs[j]).unwrap().unwrap();
                    let single = m.surprisal(&stim, &area, true).unwrap();
                    let v = cell.value().unwrap();
                    assert!(v.is_finite() && v > 0.0);
                    assert!(close(v, single, 1e-12), "{} {}: {v} vs {single}", row.roi_index, specs[j]);
                }
            }
        }
        let empty = surprisal_batch(&m, &segment_rois(&stim, Convention::TrailingWhitespace).unwrap(), &[], false);
        assert!(empty.rows.iter().all(|r| r.cells.is_empty()));
    }
}

#[test]
fn batch_marks_missing_cells() {
    // a long previous region leaves no dynamic span for the next one
    let stim = Stimulus::new("t", "Extraordinarily x y").unwrap();
    let codec = Codec::from_decodings(stim.chars().iter().copied().collect::<std::collections::BTreeSet<_>>().into_iter().map(String::from)).unwrap();
    let lm = SeededLm::new(codec.vocab_size(), 1);
    let m = CharLm::new(&codec, &lm, Method::Beam(BeamConfig::default())).unwrap();
    let rois = segment_rois(&stim, Convention::TrailingWhitespace).unwrap();
    let table = surprisal_batch(&m, &rois, &[FocalSpec::Dynamic(7), FocalSpec::FullRoi], false);
    assert_eq!(table.cell(2, 0), Some(&SurprisalCell::Missing));
    assert!(table.cell(2, 1).unwrap().value().is_some());
    assert!(table.cell(3, 0).unwrap().value().is_some());
}

#[test]
fn exact_profile_reports_explosion_per_cell() {
    let codec = toy_codec();
    let lm = SeededLm::new(3, 2);
    let stim = Stimulus::new("s", "ab").unwrap();
    let m = CharLm::new(&codec, &lm, Method::Exact).unwrap().with_state_cap(2);
    let rois = segment_rois(&stim, Convention::LeadingWhitespace).unwrap();
    let t = surprisal_batch(&m, &rois, &[FocalSpec::FullRoi], false);
    assert!(t.rows.is_empty());
    assert_eq!(t.roi_surprisal[0].status(), "error");
}
