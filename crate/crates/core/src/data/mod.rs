//! Flight recordings, windowing, class balancing and standardization.

pub mod flight;
pub mod prepared;
pub mod split;
pub mod standardize;
pub mod window;

use serde::{Deserialize, Serialize};

pub use flight::{
    parse_flight_csv, parse_flight_reader, write_flight_csv, ColumnMap, TimeSeries, CHANNELS,
    FEATURE_COUNT,
};
pub use prepared::{PreparedDataset, Retention};
pub use split::{balance_and_split, SplitCounts, Splits};
pub use standardize::{apply_standardizer, fit_standardizer, Standardizer};
pub use window::{extract_windows, window_corpus, Dataset, Provenance, WindowedSample};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepareConfig {
    pub window_len: usize,
    pub horizon: usize,
    pub counts: SplitCounts,
    pub segment_exclusive: bool,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        PrepareConfig {
            window_len: 10,
            horizon: 10,
            counts: SplitCounts::REFERENCE,
            segment_exclusive: true,
        }
    }
}

/// Windows every recording, draws balanced splits, fits the standardizer on
/// the training split and applies it to all three.
pub fn prepare(series: &[TimeSeries], cfg: &PrepareConfig, seed: u64) -> Result<PreparedDataset> {
    let windows = window_corpus(series, cfg.window_len, cfg.horizon);
    let positive_windows = windows.iter().filter(|w| w.label == 1).count();
    let contaminated = windows
        .iter()
        .filter(|w| w.label == 0 && w.warning_in_window)
        .count();
    let splits = balance_and_split(&windows, cfg.counts, seed, cfg.segment_exclusive)?;
    let standardizer = fit_standardizer(&splits.train)?;
    let retention = Retention {
        recordings: series.len(),
        timesteps: series.iter().map(TimeSeries::len).sum(),
        windows: windows.len(),
        positive_windows,
        negative_windows: windows.len() - positive_windows,
        contaminated_negatives: contaminated,
        selected: splits.train.len() + splits.val.len() + splits.test.len(),
    };
    Ok(PreparedDataset {
        seed,
        window_len: cfg.window_len,
        horizon: cfg.horizon,
        counts: cfg.counts,
        segment_exclusive: cfg.segment_exclusive,
        train: apply_standardizer(&standardizer, &splits.train)?,
        val: apply_standardizer(&standardizer, &splits.val)?,
        test: apply_standardizer(&standardizer, &splits.test)?,
        standardizer,
        retention,
    })
}
