//! Windows a small synthetic corpus, draws flight-exclusive balanced splits
//! and standardizes them with statistics from the training split only.

use stallcast::data::{extract_windows, prepare, PrepareConfig, SplitCounts};
use stallcast::synth::{generate_corpus, CorpusConfig};

fn main() -> stallcast::Result<()> {
    let flights = generate_corpus(&CorpusConfig::counts(6, 20, 0), 3)?;

    let first = &flights[flights.len() - 1];
    let windows = extract_windows(first, 10, 10);
    let onset = windows.iter().position(|w| w.label == 1);
    println!(
        "{}: {} rows -> {} windows (10 s history, 10 s horizon); first positive window starts at row {:?}",
        first.name,
        first.len(),
        windows.len(),
        onset.map(|i| windows[i].provenance.start),
    );

    let cfg = PrepareConfig {
        counts: SplitCounts {
            train_pos: 200,
            train_neg: 200,
            val_each: 30,
            test_each: 30,
        },
        ..PrepareConfig::default()
    };
    let prepared = prepare(&flights, &cfg, 3)?;
    let r = &prepared.retention;
    println!(
        "{} recordings, {} timesteps, {} windows ({} positive, {} negatives rejected for containing a warning), {} selected",
        r.recordings, r.timesteps, r.windows, r.positive_windows, r.contaminated_negatives, r.selected
    );
    for name in ["train", "val", "test"] {
        let ds = prepared.split(name).unwrap();
        println!("{name:>5}: {} windows, {} positive", ds.len(), ds.positives());
    }
    Ok(())
}
