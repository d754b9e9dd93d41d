//! Runs a full experiment from a JSON config: synthesize, prepare, train,
//! evaluate, and write every artifact to the output directory.
//!
//! cargo run --release --example experiment_from_config [config.json] [out_dir]

use std::path::PathBuf;

use stallcast::experiment::{run_experiment, Overrides};

fn main() -> stallcast::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/arch_a.json"));
    let overrides = Overrides {
        output_dir: args.next().map(PathBuf::from),
        ..Overrides::default()
    };
    let outcome = run_experiment(&config, &overrides)?;
    let last = outcome.history.epochs.last().expect("at least one epoch");
    println!(
        "{} epochs, final val loss {:.4}; test accuracy {:.4}, recall {:.4}, AUC {:?}",
        outcome.history.len(),
        last.val_loss,
        outcome.report.accuracy,
        outcome.report.recall,
        outcome.report.auc
    );
    if let Some(abrupt) = &outcome.abrupt {
        println!("abrupt-stall recall {:.4}", abrupt.recall);
    }
    println!("artifacts in {}", outcome.output_dir.display());
    Ok(())
}
