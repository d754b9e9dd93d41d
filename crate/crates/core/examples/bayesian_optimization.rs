//! Maximizes a two-parameter function over a mixed search space with the
//! GP / expected-improvement tuner and prints the trial trace.

use stallcast::hyperopt::{tune, DimKind, Dimension, SearchSpace};

fn main() -> stallcast::Result<()> {
    let space = SearchSpace::new(vec![
        Dimension {
            name: "learning_rate".into(),
            kind: DimKind::LogContinuous { low: 1e-5, high: 1e-1 },
        },
        Dimension {
            name: "units".into(),
            kind: DimKind::Integer { low: 8, high: 128 },
        },
    ])?;
    // Stand-in for validation accuracy: peaks near lr = 3e-3, 64 units.
    let objective = |x: &[f64]| {
        let v = space.decode(x).expect("point inside the space");
        let lr = v[0].as_f64().unwrap();
        let units = v[1].as_f64().unwrap();
        -(lr.log10() + 2.5).powi(2) - ((units - 64.0) / 64.0).powi(2)
    };
    let result = tune(objective, &space, 20, 5, 17)?;
    print!("{}", result.trace_csv(&space)?);
    println!("best after {} trials: {:?}", result.trace.len(), result.best_params(&space)?);
    Ok(())
}
