//! Confusion matrix, derived metrics, ROC AUC and ROC curve for a handful
//! of scores, including the degenerate cases the report flags.

use stallcast::metrics::{classification_metrics, confusion, roc_curve, roc_curve_csv, ConfusionMatrix, EvalReport};

fn main() -> stallcast::Result<()> {
    let scores = [0.95, 0.81, 0.80, 0.62, 0.55, 0.41, 0.40, 0.22, 0.10, 0.05];
    let labels = [1, 1, 0, 1, 0, 1, 0, 0, 0, 0];
    println!("{:?}", confusion(&scores, &labels, 0.5)?);
    print!("{}", EvalReport::from_scores(&scores, &labels, 0.5)?.to_json()?);
    print!("{}", roc_curve_csv(&roc_curve(&scores, &labels)?));

    // No predicted positives: precision is undefined and reported as 0.
    let m = classification_metrics(&ConfusionMatrix::new(0, 0, 8, 2))?;
    println!("precision {} (undefined: {})", m.precision, m.undefined.precision);
    Ok(())
}
