//! Generates one flight of each kind and summarizes when the stall warning
//! fires relative to the angle-of-attack peak.
//!
//! cargo run --example synthetic_flights [out_dir]

use stallcast::data::write_flight_csv;
use stallcast::synth::{generate_flight, FlightKind, FlightProfile};

fn main() -> stallcast::Result<()> {
    let out = std::env::args().nth(1).map(std::path::PathBuf::from);
    for kind in FlightKind::ALL {
        let profile = FlightProfile::new(kind, 42);
        let ts = generate_flight(&profile)?;
        let aoa = ts.channel("angle_of_attack").expect("aoa channel");
        let speed = ts.channel("indicated_airspeed").expect("airspeed channel");
        let (peak_t, peak) = aoa
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::MIN), |b, (t, a)| if a > b.1 { (t, a) } else { b });
        println!(
            "{:<14} {} steps, speed {:.0}..{:.0} kt, peak AoA {peak:.1} deg at t={peak_t}, \
             warning threshold {:.2} deg, first warning {:?}, {} warning steps",
            kind.name(),
            ts.len(),
            speed.iter().copied().fold(f64::MAX, f64::min),
            speed.iter().copied().fold(f64::MIN, f64::max),
            profile.warning_aoa(),
            ts.first_warning(),
            ts.warning_count(),
        );
        if let Some(dir) = &out {
            std::fs::create_dir_all(dir).expect("create output directory");
            write_flight_csv(&ts, dir.join(format!("{}.csv", ts.name)))?;
        }
    }
    Ok(())
}
