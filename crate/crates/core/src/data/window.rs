use serde::{Deserialize, Serialize};

use super::flight::TimeSeries;
use crate::nn::Matrix;

/// Where a window came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Provenance {
    /// Recording identifier (file name or generated flight name).
    pub source: String,
    /// First timestep covered by the window.
    pub start: usize,
    /// Last timestep covered by the window (`t`).
    pub end: usize,
    /// Timestep whose warning state is the label (`t + horizon`).
    pub label_index: usize,
}

/// One `features x window_len` input matrix and its label.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSample {
    pub x: Matrix,
    pub label: u8,
    /// True when any timestep inside the window already has the warning on.
    pub warning_in_window: bool,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub samples: Vec<WindowedSample>,
}

impl Dataset {
    pub fn new(samples: Vec<WindowedSample>) -> Self {
        Dataset { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn windows(&self) -> Vec<&Matrix> {
        self.samples.iter().map(|s| &s.x).collect()
    }

    pub fn positives(&self) -> usize {
        self.samples.iter().filter(|s| s.label == 1).count()
    }

    pub fn negatives(&self) -> usize {
        self.len() - self.positives()
    }

    /// `(features, window_len)` of the first sample.
    pub fn shape(&self) -> Option<(usize, usize)> {
        self.samples.first().map(|s| s.x.shape())
    }
}

/// Slides a window over one recording.
///
/// Produces one sample per end index `t` in `[window_len - 1, L - 1 - horizon]`,
/// labelled with the warning state at `t + horizon`. A series too short for
/// any window yields nothing.
pub fn extract_windows(ts: &TimeSeries, window_len: usize, horizon: usize) -> Vec<WindowedSample> {
    let len = ts.len();
    if window_len == 0 || len < window_len + horizon {
        return Vec::new();
    }
    let features = ts.feature_count();
    let mut out = Vec::with_capacity(len + 1 - window_len - horizon);
    for t in (window_len - 1)..=(len - 1 - horizon) {
        let start = t + 1 - window_len;
        let x = Matrix::from_fn(features, window_len, |f, k| ts.rows[start + k][f]);
        let warning_in_window = ts.stall_warning[start..=t].iter().any(|&w| w);
        out.push(WindowedSample {
            x,
            label: u8::from(ts.stall_warning[t + horizon]),
            warning_in_window,
            provenance: Provenance {
                source: ts.name.clone(),
                start,
                end: t,
                label_index: t + horizon,
            },
        });
    }
    out
}

/// Windows every recording independently, so no window spans two flights.
pub fn window_corpus(series: &[TimeSeries], window_len: usize, horizon: usize) -> Vec<WindowedSample> {
    series
        .iter()
        .flat_map(|ts| extract_windows(ts, window_len, horizon))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::flight::FEATURE_COUNT;
    use proptest::prelude::*;

    fn series(len: usize, warn_at: &[usize]) -> TimeSeries {
        let rows = (0..len)
            .map(|t| {
                let mut r = [0.0; FEATURE_COUNT];
                r[0] = t as f64;
                r
            })
            .collect();
        let mut warn = vec![false; len];
        for &i in warn_at {
            warn[i] = true;
        }
        TimeSeries::new("s", 1.0, rows, warn).unwrap()
    }

    #[test]
    fn counts_for_reference_geometry() {
        assert_eq!(extract_windows(&series(30, &[]), 10, 10).len(), 11);
        assert!(extract_windows(&series(19, &[]), 10, 10).is_empty());
        assert_eq!(extract_windows(&series(20, &[]), 10, 10).len(), 1);
    }

    #[test]
    fn single_warning_gives_one_positive_ending_at_15() {
        let ws = extract_windows(&series(30, &[25]), 10, 10);
        let pos: Vec<_> = ws.iter().filter(|w| w.label == 1).collect();
        assert_eq!(pos.len(), 1);
        assert_eq!(pos[0].provenance.end, 15);
        assert!(!pos[0].warning_in_window);
        // column k of the window holds timestep start + k
        assert_eq!(pos[0].x.get(0, 0), 6.0);
        assert_eq!(pos[0].x.get(0, 9), 15.0);
    }

    proptest! {
        #[test]
        fn count_formula_and_label_alignment(
            len in 0usize..80,
            window in 1usize..15,
            horizon in 1usize..15,
            warn in proptest::collection::vec(any::<bool>(), 80),
        ) {
            let flags: Vec<usize> = (0..len).filter(|&i| warn[i]).collect();
            let ts = series(len, &flags);
            let ws = extract_windows(&ts, window, horizon);
            let expected = (len as isize - window as isize - horizon as isize + 1).max(0) as usize;
            prop_assert_eq!(ws.len(), expected);
            for w in &ws {
                let p = &w.provenance;
                prop_assert_eq!(p.end + horizon, p.label_index);
                prop_assert_eq!(u8::from(ts.stall_warning[p.label_index]), w.label);
                prop_assert_eq!(p.end + 1 - p.start, window);
                prop_assert_eq!(w.x.get(0, window - 1), p.end as f64);
            }
        }
    }
}
