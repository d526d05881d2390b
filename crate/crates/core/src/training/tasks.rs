use serde::{Deserialize, Serialize};

use super::data::SequencePair;
use crate::error::{Error, Result};
use crate::model::Vocab;
use crate::numeric::{derive_seed, RngStream};

/// Offset of the first content symbol (after PAD, BOS, EOS).
const CONTENT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    Copy,
    Reverse,
    /// word-by-word translation through a fixed bijection, then reversed
    LexicalTranslate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub kind: TaskKind,
    /// number of content symbols (reserved symbols excluded)
    pub src_symbols: usize,
    pub tgt_symbols: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub count: usize,
    pub seed: u64,
}

/// Vocabularies for a task: copy and reverse share one symbol set,
/// lexical translation uses `s*` on the source side and `t*` on the target.
pub fn task_vocabs(
    kind: TaskKind,
    src_symbols: usize,
    tgt_symbols: usize,
) -> Result<(Vocab, Vocab)> {
    match kind {
        TaskKind::Copy | TaskKind::Reverse => {
            let v = Vocab::synthetic("w", src_symbols)?;
            Ok((v.clone(), v))
        }
        TaskKind::LexicalTranslate => Ok((
            Vocab::synthetic("s", src_symbols)?,
            Vocab::synthetic("t", tgt_symbols)?,
        )),
    }
}

/// The source→target symbol bijection of the lexical task. It depends only
/// on the vocabulary size, so separately generated splits agree.
pub fn lexicon(symbols: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (CONTENT..CONTENT + symbols).collect();
    RngStream::new(derive_seed(0x1e81_ca17, symbols as u64)).shuffle(&mut perm);
    perm
}

pub fn gen_task(spec: &TaskSpec) -> Result<Vec<SequencePair>> {
    if spec.src_symbols == 0 || spec.tgt_symbols == 0 {
        return Err(Error::Config("task vocabulary is empty".into()));
    }
    if spec.min_len < 1 || spec.max_len > 20 || spec.min_len > spec.max_len {
        return Err(Error::Config(format!(
            "length range {}..={} must lie within 1..=20",
            spec.min_len, spec.max_len
        )));
    }
    if spec.count == 0 {
        return Err(Error::Config("count must be at least 1".into()));
    }
    let map = match spec.kind {
        TaskKind::LexicalTranslate => {
            if spec.src_symbols != spec.tgt_symbols {
                return Err(Error::Config(
                    "lexical-translate needs equally sized vocabularies".into(),
                ));
            }
            Some(lexicon(spec.src_symbols))
        }
        _ => None,
    };

    let mut rng = RngStream::new(spec.seed);
    (0..spec.count)
        .map(|_| {
            let len = spec.min_len + rng.below(spec.max_len - spec.min_len + 1);
            let source: Vec<usize> = (0..len)
                .map(|_| CONTENT + rng.below(spec.src_symbols))
                .collect();
            let target = match (spec.kind, &map) {
                (TaskKind::Copy, _) => source.clone(),
                (TaskKind::Reverse, _) => source.iter().rev().copied().collect(),
                (TaskKind::LexicalTranslate, Some(m)) => {
                    source.iter().rev().map(|&t| m[t - CONTENT]).collect()
                }
                (TaskKind::LexicalTranslate, None) => unreachable!(),
            };
            SequencePair::new(source, target)
        })
        .collect()
}

/// Train, validation and test sets with pairwise disjoint sources, drawn
/// from one stream seeded by `spec.seed`. `spec.count` is ignored.
pub fn gen_splits(spec: &TaskSpec, sizes: [usize; 3]) -> Result<[Vec<SequencePair>; 3]> {
    let total: usize = sizes.iter().sum();
    let mut seen = std::collections::HashSet::new();
    let mut unique = Vec::with_capacity(total);
    let mut round = 0u64;
    while unique.len() < total {
        if round == 64 {
            return Err(Error::Config(format!(
                "could not draw {total} distinct sources; widen the length range or vocabulary"
            )));
        }
        let batch = gen_task(&TaskSpec {
            count: total,
            seed: derive_seed(spec.seed, round),
            ..spec.clone()
        })?;
        for p in batch {
            if unique.len() < total && seen.insert(p.source.clone()) {
                unique.push(p);
            }
        }
        round += 1;
    }
    let test = unique.split_off(sizes[0] + sizes[1]);
    let valid = unique.split_off(sizes[0]);
    Ok([unique, valid, test])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EOS;

    fn spec(kind: TaskKind) -> TaskSpec {
        TaskSpec {
            kind,
            src_symbols: 5,
            tgt_symbols: 5,
            min_len: 1,
            max_len: 6,
            count: 50,
            seed: 3,
        }
    }

    #[test]
    fn copy_and_reverse_definitions() {
        for p in gen_task(&spec(TaskKind::Copy)).unwrap() {
            let mut s = p.source.clone();
            s.push(EOS);
            assert_eq!(p.target, s);
        }
        for p in gen_task(&spec(TaskKind::Reverse)).unwrap() {
            let mut s: Vec<usize> = p.source.iter().rev().copied().collect();
            s.push(EOS);
            assert_eq!(p.target, s);
        }
    }

    #[test]
    fn lexical_is_reversed_bijection() {
        let m = lexicon(5);
        let mut sorted = m.clone();
        sorted.sort();
        assert_eq!(sorted, (3..8).collect::<Vec<_>>());
        for p in gen_task(&spec(TaskKind::LexicalTranslate)).unwrap() {
            let n = p.source.len();
            assert_eq!(p.target.len(), n + 1);
            for i in 0..n {
                assert_eq!(p.target[i], m[p.source[n - 1 - i] - 3]);
            }
        }
    }

    #[test]
    fn deterministic_and_in_range() {
        let a = gen_task(&spec(TaskKind::Reverse)).unwrap();
        assert_eq!(a, gen_task(&spec(TaskKind::Reverse)).unwrap());
        assert!(a.iter().all(|p| (1..=6).contains(&p.source.len())));
        assert!(a
            .iter()
            .flat_map(|p| &p.source)
            .all(|&t| (3..8).contains(&t)));
    }

    #[test]
    fn config_errors() {
        let mut s = spec(TaskKind::Copy);
        s.src_symbols = 0;
        assert!(matches!(gen_task(&s), Err(Error::Config(_))));
        let mut s = spec(TaskKind::Copy);
        s.max_len = 21;
        assert!(gen_task(&s).is_err());
        let mut s = spec(TaskKind::LexicalTranslate);
        s.tgt_symbols = 4;
        assert!(gen_task(&s).is_err());
    }

    #[test]
    fn splits_are_disjoint() {
        let [tr, va, te] = gen_splits(&spec(TaskKind::Copy), [40, 10, 10]).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (40, 10, 10));
        let mut all: Vec<_> = tr
            .iter()
            .chain(&va)
            .chain(&te)
            .map(|p| p.source.clone())
            .collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 60);
        let tiny = TaskSpec {
            src_symbols: 1,
            max_len: 2,
            ..spec(TaskKind::Copy)
        };
        assert!(gen_splits(&tiny, [2, 1, 1]).is_err());
    }
}
