use std::collections::HashMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::window::{Dataset, WindowedSample};
use crate::error::{Error, Result};
use crate::rng::stream;

/// Requested class counts per split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train_pos: usize,
    pub train_neg: usize,
    /// Positives and, separately, negatives in the validation split.
    pub val_each: usize,
    /// Positives and, separately, negatives in the test split.
    pub test_each: usize,
}

impl SplitCounts {
    /// 2040 train (1020 + 1020), 300 validation and 300 test, all balanced.
    pub const REFERENCE: SplitCounts = SplitCounts {
        train_pos: 1020,
        train_neg: 1020,
        val_each: 150,
        test_each: 150,
    };
}

impl Default for SplitCounts {
    fn default() -> Self {
        Self::REFERENCE
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    /// Indices into the input sample list, per split.
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

/// Positive windows are those labelled 1. Negative windows are labelled 0
/// and contain no warning timestep.
fn class_of(s: &WindowedSample) -> Option<bool> {
    match (s.label, s.warning_in_window) {
        (1, _) => Some(true),
        (_, false) => Some(false),
        _ => None,
    }
}

struct Pool {
    pos: Vec<usize>,
    neg: Vec<usize>,
}

impl Pool {
    fn from(indices: impl IntoIterator<Item = usize>, samples: &[WindowedSample]) -> Self {
        let mut pool = Pool {
            pos: Vec::new(),
            neg: Vec::new(),
        };
        for i in indices {
            match class_of(&samples[i]) {
                Some(true) => pool.pos.push(i),
                Some(false) => pool.neg.push(i),
                None => {}
            }
        }
        pool
    }
}

fn capacity(class: &'static str, split: &'static str, requested: usize, available: usize) -> Error {
    Error::Capacity {
        class,
        split,
        requested,
        available,
        shortfall: requested - available,
    }
}

/// Draws balanced, disjoint train/validation/test sets.
///
/// With `segment_exclusive`, every recording contributes windows to at most
/// one split: whole recordings are dealt to test, then validation, until
/// each split's class quotas can be met, and the rest go to training.
pub fn balance_and_split(
    samples: &[WindowedSample],
    counts: SplitCounts,
    seed: u64,
    segment_exclusive: bool,
) -> Result<Splits> {
    let mut rng = stream(seed, 0);
    let plan: [(&'static str, usize, usize); 3] = [
        ("test", counts.test_each, counts.test_each),
        ("val", counts.val_each, counts.val_each),
        ("train", counts.train_pos, counts.train_neg),
    ];
    let mut chosen: Vec<Vec<usize>> = Vec::with_capacity(3);

    if segment_exclusive {
        let mut order: Vec<&str> = Vec::new();
        let mut groups: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, s) in samples.iter().enumerate() {
            let key = s.provenance.source.as_str();
            groups
                .entry(key)
                .or_insert_with(|| {
                    order.push(key);
                    Vec::new()
                })
                .push(i);
        }
        order.shuffle(&mut rng);
        let mut taken = vec![false; order.len()];
        for (split, need_pos, need_neg) in plan {
            let pool = if split == "train" {
                let idx = order
                    .iter()
                    .zip(&taken)
                    .filter(|(_, t)| !**t)
                    .flat_map(|(k, _)| groups[k].iter().copied());
                Pool::from(idx, samples)
            } else {
                let (mut have_pos, mut have_neg) = (0, 0);
                let mut members = Vec::new();
                for (g, key) in order.iter().enumerate() {
                    if have_pos >= need_pos && have_neg >= need_neg {
                        break;
                    }
                    if taken[g] {
                        continue;
                    }
                    let p = Pool::from(groups[key].iter().copied(), samples);
                    let useful = (have_pos < need_pos && !p.pos.is_empty())
                        || (have_neg < need_neg && !p.neg.is_empty());
                    if useful {
                        taken[g] = true;
                        have_pos += p.pos.len();
                        have_neg += p.neg.len();
                        members.extend(groups[key].iter().copied());
                    }
                }
                Pool::from(members, samples)
            };
            chosen.push(draw(pool, split, need_pos, need_neg, &mut rng)?);
        }
    } else {
        let mut pool = Pool::from(0..samples.len(), samples);
        let total_pos = counts.train_pos + counts.val_each + counts.test_each;
        let total_neg = counts.train_neg + counts.val_each + counts.test_each;
        if pool.pos.len() < total_pos {
            return Err(capacity("positive", "all", total_pos, pool.pos.len()));
        }
        if pool.neg.len() < total_neg {
            return Err(capacity("negative", "all", total_neg, pool.neg.len()));
        }
        pool.pos.shuffle(&mut rng);
        pool.neg.shuffle(&mut rng);
        let (mut p, mut n) = (pool.pos.into_iter(), pool.neg.into_iter());
        for (_, need_pos, need_neg) in plan {
            let mut idx: Vec<usize> = p.by_ref().take(need_pos).collect();
            idx.extend(n.by_ref().take(need_neg));
            idx.shuffle(&mut rng);
            chosen.push(idx);
        }
    }

    let pick = |idx: &[usize]| Dataset::new(idx.iter().map(|&i| samples[i].clone()).collect());
    let train_idx = chosen.pop().unwrap();
    let val_idx = chosen.pop().unwrap();
    let test_idx = chosen.pop().unwrap();
    Ok(Splits {
        train: pick(&train_idx),
        val: pick(&val_idx),
        test: pick(&test_idx),
        train_idx,
        val_idx,
        test_idx,
    })
}

fn draw(
    mut pool: Pool,
    split: &'static str,
    need_pos: usize,
    need_neg: usize,
    rng: &mut impl rand::Rng,
) -> Result<Vec<usize>> {
    if pool.pos.len() < need_pos {
        return Err(capacity("positive", split, need_pos, pool.pos.len()));
    }
    if pool.neg.len() < need_neg {
        return Err(capacity("negative", split, need_neg, pool.neg.len()));
    }
    pool.pos.shuffle(rng);
    pool.neg.shuffle(rng);
    let mut idx: Vec<usize> = pool.pos[..need_pos].to_vec();
    idx.extend_from_slice(&pool.neg[..need_neg]);
    idx.shuffle(rng);
    Ok(idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::window::Provenance;
    use crate::nn::Matrix;
    use std::collections::HashSet;

    fn pool(sources: usize, per_source: usize, pos_every: usize) -> Vec<WindowedSample> {
        let mut out = Vec::new();
        for s in 0..sources {
            for i in 0..per_source {
                let label = u8::from(i % pos_every == 0);
                out.push(WindowedSample {
                    x: Matrix::zeros(1, 1),
                    label,
                    warning_in_window: false,
                    provenance: Provenance {
                        source: format!("flight{s}"),
                        start: i,
                        end: i,
                        label_index: i + 1,
                    },
                });
            }
        }
        out
    }

    fn check(splits: &Splits, counts: SplitCounts) {
        assert_eq!(splits.train.positives(), counts.train_pos);
        assert_eq!(splits.train.negatives(), counts.train_neg);
        assert_eq!(splits.val.positives(), counts.val_each);
        assert_eq!(splits.val.negatives(), counts.val_each);
        assert_eq!(splits.test.positives(), counts.test_each);
        assert_eq!(splits.test.negatives(), counts.test_each);
        let a: HashSet<_> = splits.train_idx.iter().collect();
        let b: HashSet<_> = splits.val_idx.iter().collect();
        let c: HashSet<_> = splits.test_idx.iter().collect();
        assert!(a.is_disjoint(&b) && a.is_disjoint(&c) && b.is_disjoint(&c));
    }

    #[test]
    fn reference_counts_from_sufficient_pool() {
        let samples = pool(60, 100, 3);
        for exclusive in [false, true] {
            let s = balance_and_split(&samples, SplitCounts::REFERENCE, 9, exclusive).unwrap();
            check(&s, SplitCounts::REFERENCE);
            assert_eq!(s.train.len(), 2040);
            assert_eq!(s.val.len(), 300);
            assert_eq!(s.test.len(), 300);
        }
    }

    #[test]
    fn segment_exclusive_never_shares_a_recording() {
        let samples = pool(60, 100, 3);
        let s = balance_and_split(&samples, SplitCounts::REFERENCE, 3, true).unwrap();
        let src = |d: &Dataset| -> HashSet<String> {
            d.samples.iter().map(|x| x.provenance.source.clone()).collect()
        };
        assert!(src(&s.train).is_disjoint(&src(&s.val)));
        assert!(src(&s.train).is_disjoint(&src(&s.test)));
        assert!(src(&s.val).is_disjoint(&src(&s.test)));
    }

    #[test]
    fn shortfall_is_reported() {
        let samples = pool(1, 9, 3); // 3 positives
        let counts = SplitCounts {
            train_pos: 5,
            train_neg: 1,
            val_each: 0,
            test_each: 0,
        };
        match balance_and_split(&samples, counts, 1, false).unwrap_err() {
            Error::Capacity {
                class, shortfall, ..
            } => {
                assert_eq!(class, "positive");
                assert_eq!(shortfall, 2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn contaminated_negatives_are_skipped() {
        let mut samples = pool(1, 10, 100); // one positive, nine negatives
        for s in samples.iter_mut().skip(1) {
            s.warning_in_window = true;
        }
        let counts = SplitCounts {
            train_pos: 1,
            train_neg: 1,
            val_each: 0,
            test_each: 0,
        };
        assert!(matches!(
            balance_and_split(&samples, counts, 1, false),
            Err(Error::Capacity { class: "negative", .. })
        ));
    }

    #[test]
    fn deterministic_per_seed() {
        let samples = pool(30, 50, 2);
        let counts = SplitCounts {
            train_pos: 200,
            train_neg: 200,
            val_each: 50,
            test_each: 50,
        };
        for exclusive in [false, true] {
            let a = balance_and_split(&samples, counts, 5, exclusive).unwrap();
            let b = balance_and_split(&samples, counts, 5, exclusive).unwrap();
            assert_eq!(a.train_idx, b.train_idx);
            assert_eq!(a.val_idx, b.val_idx);
            assert_eq!(a.test_idx, b.test_idx);
            let c = balance_and_split(&samples, counts, 6, exclusive).unwrap();
            assert_ne!(a.train_idx, c.train_idx);
        }
    }
}
