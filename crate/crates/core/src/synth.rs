//! Synthetic flight recordings with a stall-warning channel.
//!
//! Each flight is a 1 Hz longitudinal point-mass sketch, not a flight model.
//! Airspeed `V` is integrated from a throttle/drag balance. Angle of attack
//! follows the lift balance `alpha = ALPHA0 + n * LIFT_K / V^2`, so slowing
//! down at constant load factor `n` raises it. The other channels are driven
//! from `V`, `alpha`, throttle and vertical speed:
//!
//! - pitch is `alpha` plus the flight-path angle implied by vertical speed
//! - elevator input grows with `alpha` and load factor
//! - elevator deflection mirrors elevator input
//! - thrust and rpm follow the throttle through a 2 s spool lag
//! - vertical speed sinks as `alpha` passes the warning angle and in the pull-out
//! - roll wanders slowly, and aileron input opposes it
//!
//! `stall_warning[t]` is exactly `alpha[t] >= warning_margin * stall_aoa_deg`.
//!
//! The three kinds of flight behave as follows:
//!
//! - cruise holds `alpha` at most 9 deg (and at least 1.5 deg under the warning
//!   angle), so it never warns.
//! - gradual stall cuts the throttle, bleeds off speed for at least 20 s with
//!   `alpha` rising monotonically, holds the warning for 15-30 s and recovers.
//! - abrupt stall flies steady until a sudden pull ramps `alpha` past the
//!   warning angle within 3 s, holds for 2-4 s and recovers. The seconds before
//!   the pull carry no precursor.
//!
//! Physical ranges of the emitted channels:
//!
//! | channel | range |
//! |---|---|
//! | airspeeds | 60..330 kt |
//! | control inputs | -1..1 |
//! | pitch | -30..40 deg |
//! | roll | -40..40 deg |
//! | angle of attack | -5..25 deg |
//! | throttles | 0..1 |
//! | thrust | 0..60 000 N |
//! | rpm | 800..3200 |
//! | elevator deflection | -25..25 deg |
//! | vertical speed | -6000..6000 ft/min |

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::flight::{Row, TimeSeries, FEATURE_COUNT};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlightKind {
    Cruise,
    GradualStall,
    AbruptStall,
}

impl FlightKind {
    pub const ALL: [FlightKind; 3] = [
        FlightKind::Cruise,
        FlightKind::GradualStall,
        FlightKind::AbruptStall,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FlightKind::Cruise => "cruise",
            FlightKind::GradualStall => "gradual_stall",
            FlightKind::AbruptStall => "abrupt_stall",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    fn is_stall(self) -> bool {
        self != FlightKind::Cruise
    }
}

/// Zero-lift angle of attack, deg.
const ALPHA0: f64 = -1.0;
/// Lift constant, deg * kt^2: `alpha` is 3 deg at 240 kt in level flight.
const LIFT_K: f64 = 230_400.0;
/// Highest `alpha` a cruise flight reaches, deg.
const CRUISE_ALPHA_CAP: f64 = 9.0;
const FPM_PER_KT: f64 = 101.269;

/// Default per-channel noise standard deviations, in channel units.
/// Angle of attack is noise-free so the warning channel stays a clean
/// function of the dynamics.
pub const DEFAULT_NOISE: [f64; FEATURE_COUNT] = [
    0.5, 0.5, 0.02, 0.02, 0.01, 0.1, 0.2, 0.0, 0.005, 0.005, 150.0, 150.0, 8.0, 8.0, 0.1, 20.0,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightProfile {
    pub kind: FlightKind,
    pub duration_s: usize,
    /// Airspeed at the start of the flight, kt.
    pub base_speed_kt: f64,
    /// Critical angle of attack, deg.
    pub stall_aoa_deg: f64,
    /// The warning fires at this fraction of the critical angle.
    pub warning_margin: f64,
    pub noise_level: [f64; FEATURE_COUNT],
    pub seed: u64,
}

impl FlightProfile {
    /// Defaults: 300 s, 15 deg critical angle, 0.85 margin, and a base speed
    /// of 210 kt (cruise), 220 kt (gradual) or 170 kt (abrupt).
    pub fn new(kind: FlightKind, seed: u64) -> Self {
        FlightProfile {
            kind,
            duration_s: 300,
            base_speed_kt: match kind {
                FlightKind::Cruise => 210.0,
                FlightKind::GradualStall => 220.0,
                FlightKind::AbruptStall => 170.0,
            },
            stall_aoa_deg: 15.0,
            warning_margin: 0.85,
            noise_level: DEFAULT_NOISE,
            seed,
        }
    }

    /// Angle of attack at which the warning fires.
    pub fn warning_aoa(&self) -> f64 {
        self.warning_margin * self.stall_aoa_deg
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.warning_margin > 0.0 && self.warning_margin < 1.0) {
            return Err(Error::invalid(format!(
                "warning_margin {} outside (0, 1)",
                self.warning_margin
            )));
        }
        if !(self.stall_aoa_deg.is_finite() && self.stall_aoa_deg > 0.0 && self.stall_aoa_deg <= 25.0)
        {
            return Err(Error::invalid(format!("stall_aoa_deg {}", self.stall_aoa_deg)));
        }
        if self.kind.is_stall() && self.duration_s < 40 {
            return Err(Error::invalid(format!(
                "{} needs at least 40 s, got {}",
                self.kind.name(),
                self.duration_s
            )));
        }
        if self.duration_s == 0 {
            return Err(Error::invalid("duration_s must be positive"));
        }
        if !(90.0..=300.0).contains(&self.base_speed_kt) {
            return Err(Error::invalid(format!(
                "base_speed_kt {} outside 90..300",
                self.base_speed_kt
            )));
        }
        if self.noise_level.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::invalid("noise levels must be finite and non-negative"));
        }
        let level_alpha = level_alpha(self.base_speed_kt);
        match self.kind {
            FlightKind::AbruptStall if level_alpha >= self.warning_aoa() - 1.0 => {
                Err(Error::invalid(format!(
                    "base speed {} kt is already within 1 deg of the warning angle",
                    self.base_speed_kt
                )))
            }
            FlightKind::GradualStall if level_alpha >= self.warning_aoa() - 3.0 => {
                Err(Error::invalid(format!(
                    "base speed {} kt leaves no room for a gradual approach",
                    self.base_speed_kt
                )))
            }
            _ => Ok(()),
        }
    }
}

fn level_alpha(v: f64) -> f64 {
    ALPHA0 + LIFT_K / (v * v)
}

/// Speed at which level flight reaches `alpha`.
fn level_speed(alpha: f64) -> f64 {
    (LIFT_K / (alpha - ALPHA0)).sqrt()
}

/// Idle-power deceleration, kt/s, before scaling.
fn idle_decel(v: f64) -> f64 {
    0.9 * (v / 240.0).powi(2) + 0.25 * (150.0 / v).powi(2)
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Noise-free state trajectory shared by all kinds.
struct Track {
    v: Vec<f64>,
    alpha: Vec<f64>,
    lever: Vec<f64>,
    vs: Vec<f64>,
    roll: Vec<f64>,
    /// Extra pilot pitch input on top of the trim law.
    pull: Vec<f64>,
}

impl Track {
    fn with_capacity(n: usize) -> Self {
        Track {
            v: Vec::with_capacity(n),
            alpha: Vec::with_capacity(n),
            lever: Vec::with_capacity(n),
            vs: Vec::with_capacity(n),
            roll: Vec::with_capacity(n),
            pull: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, v: f64, alpha: f64, lever: f64, vs: f64, roll: f64, pull: f64) {
        self.v.push(v);
        self.alpha.push(alpha);
        self.lever.push(lever);
        self.vs.push(vs);
        self.roll.push(roll);
        self.pull.push(pull);
    }

    fn len(&self) -> usize {
        self.v.len()
    }

    fn last(&self) -> (f64, f64, f64, f64, f64) {
        let i = self.len() - 1;
        (self.v[i], self.alpha[i], self.lever[i], self.vs[i], self.roll[i])
    }
}

/// Throttle that holds `v` in level flight.
fn cruise_lever(v: f64) -> f64 {
    (0.25 + 0.6 * (v / 260.0).powi(2)).min(1.0)
}

/// Slow roll wander with a restoring pull toward wings level.
fn next_roll(roll: f64, rng: &mut ChaCha8Rng, amplitude: f64) -> f64 {
    let step: f64 = rng.sample(StandardNormal);
    (0.95 * roll + amplitude * step).clamp(-30.0, 30.0)
}

fn cruise_track(p: &FlightProfile, rng: &mut ChaCha8Rng) -> Track {
    let n = p.duration_s;
    let cap = CRUISE_ALPHA_CAP.min(p.warning_aoa() - 1.5);
    let mut t = Track::with_capacity(n);
    let mut v = p.base_speed_kt;
    let mut target = v;
    let mut vs: f64 = 0.0;
    let mut roll = 0.0;
    let mut next_change = 0;
    for k in 0..n {
        if k == next_change {
            target = uniform(rng, 160.0, 255.0);
            next_change = k + rng.random_range(30..90);
        }
        let lever = cruise_lever(target);
        v += (target - v) / 20.0;
        roll = next_roll(roll, rng, 1.0);
        let load = 1.0 / roll.to_radians().cos();
        let alpha = (ALPHA0 + load * LIFT_K / (v * v)).min(cap);
        let vs_target = 6.0 * (target - v);
        vs += (vs_target - vs) / 8.0;
        t.push(v, alpha, lever, vs, roll, 0.0);
    }
    t
}

/// Pull-out shared by both stall kinds: nose down, full power, climb back.
fn recover(t: &mut Track, p: &FlightProfile, rng: &mut ChaCha8Rng, until: usize) {
    let (mut v, alpha_start, _, mut vs, mut roll) = t.last();
    let alpha_rec = uniform(rng, 2.0, 4.0);
    let ceiling = p.warning_aoa() - 1.5;
    let mut j: f64 = 0.0;
    while t.len() < until {
        j += 1.0;
        let alpha = (alpha_rec + (alpha_start - alpha_rec) * (-j / 1.5).exp()).min(ceiling);
        v = (v + 2.0 * (1.0 - idle_decel(v) / 2.5)).min(p.base_speed_kt + 20.0);
        let vs_target = if j < 6.0 { -1500.0 } else { 800.0 };
        vs += (vs_target - vs) / 4.0;
        roll = next_roll(roll, rng, 0.8);
        t.push(v, alpha, 1.0, vs, roll, -0.3 * (-j / 3.0).exp());
    }
}

/// Holds `alpha` past the warning angle for `hold` steps, easing toward `peak`.
fn hold_warning(t: &mut Track, rng: &mut ChaCha8Rng, hold: usize, peak: f64, tau: f64, decel: f64) {
    let (mut v, alpha_on, lever, mut vs, mut roll) = t.last();
    let peak = peak.max(alpha_on + 0.5);
    for j in 1..=hold {
        let alpha = alpha_on + (peak - alpha_on) * (1.0 - (-(j as f64) / tau).exp());
        v = (v - decel * idle_decel(v)).max(60.0);
        let vs_target = -200.0 - 300.0 * (alpha - alpha_on);
        vs += (vs_target - vs) / 3.0;
        // buffet
        roll = next_roll(roll, rng, 2.0);
        t.push(v, alpha, lever, vs, roll, 0.1);
    }
}

fn gradual_track(p: &FlightProfile, rng: &mut ChaCha8Rng) -> Track {
    let n = p.duration_s;
    let warn = p.warning_aoa();
    let v0 = p.base_speed_kt;
    let cut = ((n as f64 * uniform(rng, 0.08, 0.2)).round() as usize).max(5);
    let idle = uniform(rng, 0.0, 0.08);
    let hold_wanted = rng.random_range(15..=30);
    let peak = p.stall_aoa_deg + uniform(rng, -0.3, 1.0);
    let mut scale = uniform(rng, 0.85, 1.15);

    // Deceleration must finish at least 15 s before the end of the flight.
    let v_warn = level_speed(warn);
    let budget = n.saturating_sub(cut + 15).max(20);
    let steps_at = |scale: f64| {
        let mut v = v0;
        let mut k = 0;
        while level_alpha(v) < warn {
            v -= scale * idle_decel(v);
            k += 1;
        }
        k
    };
    debug_assert!(v_warn < v0);
    while steps_at(scale) > budget {
        scale *= 1.1;
    }

    let mut t = Track::with_capacity(n);
    let mut roll = 0.0;
    for _ in 0..cut {
        roll = next_roll(roll, rng, 0.6);
        t.push(v0, level_alpha(v0), cruise_lever(v0), 0.0, roll, 0.0);
    }
    let mut v = v0;
    let mut j: f64 = 0.0;
    loop {
        j += 1.0;
        v -= scale * idle_decel(v);
        let alpha = level_alpha(v);
        let lever = idle + (cruise_lever(v0) - idle) * (1.0 - j / 3.0).max(0.0);
        // level flight until the wing nears its limit, then a slow sink
        let vs = -40.0 * (alpha - (warn - 2.0)).max(0.0);
        roll = next_roll(roll, rng, 0.6);
        t.push(v, alpha, lever, vs, roll, 0.0);
        if alpha >= warn {
            break;
        }
    }
    let left = n.saturating_sub(t.len());
    let hold = hold_wanted.min(left / 2).max(1) - 1;
    hold_warning(&mut t, rng, hold, peak, 4.0, 0.3 * scale);
    recover(&mut t, p, rng, n);
    t
}

fn abrupt_track(p: &FlightProfile, rng: &mut ChaCha8Rng) -> Track {
    let n = p.duration_s;
    let warn = p.warning_aoa();
    let v0 = p.base_speed_kt;
    let onset = (n as f64 * uniform(rng, 0.35, 0.6)).round() as usize;
    let ramp = uniform(rng, 1.5, 3.0);
    let peak = p.stall_aoa_deg + uniform(rng, 0.5, 2.5);
    let hold = rng.random_range(2..=4);
    let base = level_alpha(v0);

    let mut t = Track::with_capacity(n);
    let mut roll = 0.0;
    for _ in 0..onset {
        roll = next_roll(roll, rng, 0.6);
        t.push(v0, base, cruise_lever(v0), 0.0, roll, 0.0);
    }
    // Linear pull from `base` to `peak` over `ramp` seconds; `peak` is past
    // the warning angle, so the ramp ends within ceil(ramp) samples.
    let mut v = v0;
    let mut j: f64 = 0.0;
    loop {
        j += 1.0;
        let alpha = base + (peak - base) * (j / ramp).min(1.0);
        v -= 0.5 * idle_decel(v);
        roll = next_roll(roll, rng, 1.0);
        t.push(v, alpha, cruise_lever(v0), 300.0 * j, roll, 0.5);
        if alpha >= warn {
            break;
        }
    }
    hold_warning(&mut t, rng, hold, peak, 1.0, 0.5);
    recover(&mut t, p, rng, n);
    t
}

/// Renders a trajectory into the sixteen recorded channels, with noise.
fn render(t: &Track, p: &FlightProfile, noise_rng: &mut ChaCha8Rng) -> Vec<Row> {
    let mut spool: f64 = t.lever.first().copied().unwrap_or(0.0);
    (0..t.len())
        .map(|k| {
            let (v, alpha, lever, vs, roll) = (t.v[k], t.alpha[k], t.lever[k], t.vs[k], t.roll[k]);
            spool += (lever - spool) / 2.0;
            let load = (alpha - ALPHA0) * v * v / LIFT_K;
            let gamma = (vs / (v * FPM_PER_KT)).clamp(-1.0, 1.0).asin().to_degrees();
            let elevator = (0.06 * (alpha - 3.0) + 0.1 * (load - 1.0) + t.pull[k]).clamp(-1.0, 1.0);
            let thrust = 55_000.0 * spool * (1.0 - 0.25 * v / 250.0);
            let rpm = 1000.0 + 1800.0 * spool;
            let clean: Row = [
                v,
                1.08 * v,
                elevator,
                -0.02 * roll,
                0.0,
                alpha + gamma,
                roll,
                alpha,
                lever,
                lever,
                thrust,
                thrust,
                rpm,
                rpm,
                -20.0 * elevator,
                vs,
            ];
            let mut row = [0.0; FEATURE_COUNT];
            for (i, (&c, &s)) in clean.iter().zip(&p.noise_level).enumerate() {
                let z: f64 = noise_rng.sample(StandardNormal);
                row[i] = c + s * z;
            }
            for i in [2, 3, 4] {
                row[i] = row[i].clamp(-1.0, 1.0);
            }
            for i in [8, 9] {
                row[i] = row[i].clamp(0.0, 1.0);
            }
            for i in [10, 11] {
                row[i] = row[i].max(0.0);
            }
            row
        })
        .collect()
}

/// Generates one flight. Dynamics and sensor noise draw from separate
/// streams, so changing the noise levels leaves the trajectory untouched.
pub fn generate_flight(p: &FlightProfile) -> Result<TimeSeries> {
    p.validate()?;
    let mut dyn_rng = stream(p.seed, 0);
    let mut noise_rng = stream(p.seed, 1);
    let mut track = match p.kind {
        FlightKind::Cruise => cruise_track(p, &mut dyn_rng),
        FlightKind::GradualStall => gradual_track(p, &mut dyn_rng),
        FlightKind::AbruptStall => abrupt_track(p, &mut dyn_rng),
    };
    for column in [
        &mut track.v,
        &mut track.alpha,
        &mut track.lever,
        &mut track.vs,
        &mut track.roll,
        &mut track.pull,
    ] {
        column.truncate(p.duration_s);
    }
    let rows = render(&track, p, &mut noise_rng);
    let warn = p.warning_aoa();
    let warning = rows.iter().map(|r| r[7] >= warn).collect();
    let mut ts = TimeSeries::new(
        format!("{}_{:016x}", p.kind.name(), p.seed),
        1.0,
        rows,
        warning,
    )?;
    ts.kind = Some(p.kind);
    Ok(ts)
}

/// How many flights of each kind to generate, and how long each runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub cruise: usize,
    pub gradual_stall: usize,
    pub abrupt_stall: usize,
    pub duration_s: usize,
    pub stall_aoa_deg: f64,
    pub warning_margin: f64,
    pub noise_level: [f64; FEATURE_COUNT],
}

impl Default for CorpusConfig {
    /// Enough gradual stalls for 1320 positive windows with whole-flight
    /// splitting, plus cruise flights for variety among the negatives.
    fn default() -> Self {
        CorpusConfig {
            cruise: 30,
            gradual_stall: 100,
            abrupt_stall: 0,
            duration_s: 300,
            stall_aoa_deg: 15.0,
            warning_margin: 0.85,
            noise_level: DEFAULT_NOISE,
        }
    }
}

impl CorpusConfig {
    pub fn counts(cruise: usize, gradual_stall: usize, abrupt_stall: usize) -> Self {
        CorpusConfig {
            cruise,
            gradual_stall,
            abrupt_stall,
            ..Self::default()
        }
    }
}

/// Generates `cruise`, then `gradual_stall`, then `abrupt_stall` flights.
/// Flight `i` (in that order) is seeded with `derive_seed(seed, i)` and gets
/// a base speed drawn from the range suited to its kind.
pub fn generate_corpus(cfg: &CorpusConfig, seed: u64) -> Result<Vec<TimeSeries>> {
    let plan = [
        (FlightKind::Cruise, cfg.cruise, 160.0, 250.0),
        (FlightKind::GradualStall, cfg.gradual_stall, 180.0, 240.0),
        (FlightKind::AbruptStall, cfg.abrupt_stall, 150.0, 190.0),
    ];
    let mut out = Vec::with_capacity(cfg.cruise + cfg.gradual_stall + cfg.abrupt_stall);
    let mut index = 0u64;
    for (kind, count, lo, hi) in plan {
        for _ in 0..count {
            let flight_seed = derive_seed(seed, index);
            let mut profile = FlightProfile::new(kind, flight_seed);
            profile.duration_s = cfg.duration_s;
            profile.stall_aoa_deg = cfg.stall_aoa_deg;
            profile.warning_margin = cfg.warning_margin;
            profile.noise_level = cfg.noise_level;
            profile.base_speed_kt = uniform(&mut stream(flight_seed, 2), lo, hi);
            let mut ts = generate_flight(&profile)?;
            ts.name = format!("{}_{index:04}", kind.name());
            out.push(ts);
            index += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::flight::{channel_index, parse_flight_reader, write_flight_writer};
    use crate::data::window_corpus;

    const AOA: usize = 7;

    fn aoa(ts: &TimeSeries) -> Vec<f64> {
        ts.rows.iter().map(|r| r[AOA]).collect()
    }

    #[test]
    fn cruise_never_warns() {
        for seed in 0..20 {
            let mut p = FlightProfile::new(FlightKind::Cruise, seed);
            p.duration_s = 600;
            p.base_speed_kt = 150.0 + 5.0 * seed as f64;
            let ts = generate_flight(&p).unwrap();
            assert_eq!(ts.len(), 600);
            assert_eq!(ts.warning_count(), 0);
            assert!(aoa(&ts).iter().all(|&a| a <= CRUISE_ALPHA_CAP));
        }
    }

    #[test]
    fn gradual_stall_rises_monotonically_before_warning() {
        for seed in 0..30 {
            let ts = generate_flight(&FlightProfile::new(FlightKind::GradualStall, seed)).unwrap();
            let first = ts.first_warning().expect("no warning");
            assert!(first >= 25, "warning at {first}");
            let a = aoa(&ts);
            for k in first - 15..first {
                assert!(a[k + 1] >= a[k], "seed {seed}: alpha fell at {k}");
            }
            // throttle is already at idle 20 s before the warning
            let lever = ts.channel("throttle_1").unwrap();
            assert!(lever[first - 20] < 0.15);
            let warned = ts.warning_count();
            assert!((10..=31).contains(&warned), "{warned} warning steps");
        }
    }

    #[test]
    fn abrupt_ramp_is_short() {
        for seed in 0..30 {
            let p = FlightProfile::new(FlightKind::AbruptStall, seed);
            let ts = generate_flight(&p).unwrap();
            let first = ts.first_warning().unwrap();
            let a = aoa(&ts);
            let steady = a[first - 4];
            assert!(a[first - 3..first].iter().all(|&x| x < p.warning_aoa()));
            assert!(a[..first - 3].iter().all(|&x| (x - steady).abs() < 1e-12));
            assert!(ts.warning_count() <= 8);
        }
    }

    #[test]
    fn warning_is_exactly_the_threshold_indicator() {
        let cfg = CorpusConfig::counts(5, 5, 5);
        for ts in generate_corpus(&cfg, 11).unwrap() {
            for (row, &w) in ts.rows.iter().zip(&ts.stall_warning) {
                assert_eq!(w, row[AOA] >= 0.85 * 15.0);
            }
        }
    }

    #[test]
    fn abrupt_onset_is_much_steeper_than_gradual() {
        let cfg = CorpusConfig::counts(0, 40, 40);
        let corpus = generate_corpus(&cfg, 3).unwrap();
        let slope = |kind| {
            let s: Vec<f64> = corpus
                .iter()
                .filter(|ts| ts.kind == Some(kind))
                .map(|ts| {
                    let a = aoa(ts);
                    let f = ts.first_warning().unwrap();
                    (a[f] - a[f - 10]) / 10.0
                })
                .collect();
            s.iter().sum::<f64>() / s.len() as f64
        };
        let (g, a) = (slope(FlightKind::GradualStall), slope(FlightKind::AbruptStall));
        assert!(a >= 3.0 * g, "abrupt {a} vs gradual {g}");
    }

    #[test]
    fn channels_stay_in_physical_ranges() {
        let ranges: [(&str, f64, f64); 10] = [
            ("indicated_airspeed", 60.0, 330.0),
            ("true_airspeed", 60.0, 330.0),
            ("pitch", -30.0, 40.0),
            ("roll", -40.0, 40.0),
            ("angle_of_attack", -5.0, 25.0),
            ("throttle_1", 0.0, 1.0),
            ("thrust_1", 0.0, 60_000.0),
            ("rpm_1", 800.0, 3200.0),
            ("elevator_deflection", -25.0, 25.0),
            ("vertical_speed", -6000.0, 6000.0),
        ];
        for ts in generate_corpus(&CorpusConfig::counts(10, 10, 10), 5).unwrap() {
            assert!(ts.rows.iter().flatten().all(|v| v.is_finite()));
            for (name, lo, hi) in ranges {
                let i = channel_index(name).unwrap();
                for r in &ts.rows {
                    assert!((lo..=hi).contains(&r[i]), "{} {name} = {}", ts.name, r[i]);
                }
            }
        }
    }

    #[test]
    fn same_seed_same_series() {
        for kind in FlightKind::ALL {
            let p = FlightProfile::new(kind, 42);
            let a = generate_flight(&p).unwrap();
            let b = generate_flight(&p).unwrap();
            assert_eq!(a, b);
            let c = generate_flight(&FlightProfile { seed: 43, ..p }).unwrap();
            assert_ne!(a.rows, c.rows);
        }
        let cfg = CorpusConfig::counts(2, 2, 2);
        assert_eq!(generate_corpus(&cfg, 1).unwrap(), generate_corpus(&cfg, 1).unwrap());
    }

    #[test]
    fn corpus_kinds_are_recoverable() {
        let corpus = generate_corpus(&CorpusConfig::counts(10, 10, 10), 0).unwrap();
        assert_eq!(corpus.len(), 30);
        for kind in FlightKind::ALL {
            assert_eq!(corpus.iter().filter(|t| t.kind == Some(kind)).count(), 10);
        }
    }

    #[test]
    fn default_corpus_yields_enough_positive_windows() {
        let corpus = generate_corpus(&CorpusConfig::default(), 0).unwrap();
        let windows = window_corpus(&corpus, 10, 10);
        let positives = windows.iter().filter(|w| w.label == 1).count();
        assert!(positives >= 1020 + 300, "{positives} positive windows");
    }

    #[test]
    fn noise_does_not_move_the_trajectory() {
        let p = FlightProfile::new(FlightKind::GradualStall, 9);
        let quiet = generate_flight(&FlightProfile {
            noise_level: [0.0; FEATURE_COUNT],
            ..p.clone()
        })
        .unwrap();
        let loud = generate_flight(&p).unwrap();
        assert_eq!(aoa(&quiet), aoa(&loud));
        assert_eq!(quiet.stall_warning, loud.stall_warning);
    }

    #[test]
    fn csv_round_trip() {
        let ts = generate_flight(&FlightProfile::new(FlightKind::AbruptStall, 8)).unwrap();
        let mut buf = Vec::new();
        write_flight_writer(&ts, &mut buf).unwrap();
        let back = parse_flight_reader(buf.as_slice(), ts.name.clone()).unwrap();
        assert_eq!(back.rows, ts.rows);
        assert_eq!(back.stall_warning, ts.stall_warning);
    }

    #[test]
    fn invalid_profiles_are_rejected() {
        let mut p = FlightProfile::new(FlightKind::GradualStall, 0);
        p.duration_s = 39;
        assert!(generate_flight(&p).is_err());
        let mut p = FlightProfile::new(FlightKind::Cruise, 0);
        p.warning_margin = 1.0;
        assert!(generate_flight(&p).is_err());
        let mut p = FlightProfile::new(FlightKind::AbruptStall, 0);
        p.base_speed_kt = 125.0;
        assert!(generate_flight(&p).is_err());
    }

    #[test]
    fn short_stall_flights_still_fit() {
        for kind in [FlightKind::GradualStall, FlightKind::AbruptStall] {
            for seed in 0..10 {
                let mut p = FlightProfile::new(kind, seed);
                p.duration_s = 40;
                let ts = generate_flight(&p).unwrap();
                assert_eq!(ts.len(), 40);
                assert!(ts.warning_count() >= 1);
            }
        }
    }
}
