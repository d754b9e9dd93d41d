use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DimKind {
    /// Uniform in `ln(value)`.
    LogContinuous { low: f64, high: f64 },
    Linear { low: f64, high: f64 },
    /// Inclusive integer range.
    Integer { low: i64, high: i64 },
    Categorical { choices: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    #[serde(flatten)]
    pub kind: DimKind,
}

/// A decoded coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Choice(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(i) => Some(*i as f64),
            ParamValue::Real(x) => Some(*x),
            ParamValue::Choice(_) => None,
        }
    }
}

impl std::fmt::Display for ParamValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Real(x) => write!(f, "{x}"),
            ParamValue::Choice(s) => f.write_str(s),
        }
    }
}

/// Hyperparameter box. Points live in the unit cube, one coordinate per
/// dimension; [`SearchSpace::decode`] maps them to parameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub dims: Vec<Dimension>,
}

impl SearchSpace {
    pub fn new(dims: Vec<Dimension>) -> Result<Self> {
        let space = SearchSpace { dims };
        space.validate()?;
        Ok(space)
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(Error::invalid("search space has no dimensions"));
        }
        for d in &self.dims {
            let bad = |why: &str| Err(Error::invalid(format!("dimension `{}`: {why}", d.name)));
            match &d.kind {
                DimKind::LogContinuous { low, high } => {
                    if !(low.is_finite() && high.is_finite() && *low < *high) {
                        return bad("needs low < high");
                    }
                    if *low <= 0.0 {
                        return bad("log scale needs positive bounds");
                    }
                }
                DimKind::Linear { low, high } => {
                    if !(low.is_finite() && high.is_finite() && *low < *high) {
                        return bad("needs low < high");
                    }
                }
                DimKind::Integer { low, high } => {
                    if low >= high {
                        return bad("needs low < high");
                    }
                }
                DimKind::Categorical { choices } => {
                    if choices.len() < 2 {
                        return bad("needs at least two choices");
                    }
                }
            }
        }
        Ok(())
    }

    fn check_point(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.len() {
            return Err(Error::invalid(format!(
                "point has {} coordinates, space has {}",
                u.len(),
                self.len()
            )));
        }
        if u.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::invalid("point outside the unit box"));
        }
        Ok(())
    }

    pub fn decode(&self, u: &[f64]) -> Result<Vec<ParamValue>> {
        self.check_point(u)?;
        Ok(self
            .dims
            .iter()
            .zip(u)
            .map(|(d, &x)| match &d.kind {
                DimKind::LogContinuous { low, high } => {
                    ParamValue::Real((low.ln() + x * (high.ln() - low.ln())).exp())
                }
                DimKind::Linear { low, high } => ParamValue::Real(low + x * (high - low)),
                DimKind::Integer { low, high } => {
                    ParamValue::Int(*low + (x * (high - low) as f64).round() as i64)
                }
                DimKind::Categorical { choices } => {
                    let i = ((x * choices.len() as f64) as usize).min(choices.len() - 1);
                    ParamValue::Choice(choices[i].clone())
                }
            })
            .collect())
    }

    pub fn decode_named(&self, u: &[f64]) -> Result<BTreeMap<String, ParamValue>> {
        Ok(self
            .dims
            .iter()
            .map(|d| d.name.clone())
            .zip(self.decode(u)?)
            .collect())
    }

    /// Moves integer and categorical coordinates onto the point that
    /// represents their decoded value; continuous coordinates are unchanged.
    pub fn snap(&self, u: &[f64]) -> Vec<f64> {
        self.dims
            .iter()
            .zip(u)
            .map(|(d, &x)| {
                let x = x.clamp(0.0, 1.0);
                match &d.kind {
                    DimKind::Integer { low, high } => {
                        let span = (high - low) as f64;
                        (x * span).round() / span
                    }
                    DimKind::Categorical { choices } => {
                        let k = choices.len();
                        let i = ((x * k as f64) as usize).min(k - 1);
                        (i as f64 + 0.5) / k as f64
                    }
                    _ => x,
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> SearchSpace {
        SearchSpace::new(vec![
            Dimension {
                name: "lr".into(),
                kind: DimKind::LogContinuous { low: 1e-5, high: 1e-2 },
            },
            Dimension {
                name: "units".into(),
                kind: DimKind::Integer { low: 8, high: 64 },
            },
            Dimension {
                name: "act".into(),
                kind: DimKind::Categorical {
                    choices: vec!["relu".into(), "tanh".into(), "sigmoid".into()],
                },
            },
            Dimension {
                name: "drop".into(),
                kind: DimKind::Linear { low: 0.0, high: 0.5 },
            },
        ])
        .unwrap()
    }

    #[test]
    fn decodes_each_kind() {
        let s = space();
        let v = s.decode(&[0.0, 1.0, 0.5, 0.5]).unwrap();
        assert!(matches!(v[0], ParamValue::Real(x) if (x - 1e-5).abs() < 1e-18));
        assert_eq!(v[1], ParamValue::Int(64));
        assert_eq!(v[2], ParamValue::Choice("tanh".into()));
        assert_eq!(v[3], ParamValue::Real(0.25));
        let mid = s.decode(&[0.5, 0.0, 1.0, 0.0]).unwrap();
        assert!(matches!(mid[0], ParamValue::Real(x) if (x - 10f64.powf(-3.5)).abs() < 1e-15));
        assert_eq!(mid[2], ParamValue::Choice("sigmoid".into()));
        assert!(s.decode(&[0.5, 0.5, 0.5]).is_err());
        assert!(s.decode(&[0.5, 0.5, 0.5, 1.5]).is_err());
    }

    #[test]
    fn snapping_is_idempotent_and_preserves_decoding() {
        let s = space();
        for i in 0..50 {
            let u: Vec<f64> = (0..4).map(|k| ((i * 7 + k * 13) % 50) as f64 / 49.0).collect();
            let snapped = s.snap(&u);
            assert_eq!(s.snap(&snapped), snapped);
            assert_eq!(s.decode(&snapped).unwrap()[1..3], s.decode(&u).unwrap()[1..3]);
            assert_eq!(snapped[0], u[0]);
        }
    }

    #[test]
    fn invalid_bounds_are_rejected() {
        let one = |kind| SearchSpace::new(vec![Dimension { name: "x".into(), kind }]);
        assert!(one(DimKind::LogContinuous { low: 0.0, high: 1.0 }).is_err());
        assert!(one(DimKind::Linear { low: 1.0, high: 1.0 }).is_err());
        assert!(one(DimKind::Integer { low: 3, high: 2 }).is_err());
        assert!(one(DimKind::Categorical { choices: vec!["a".into()] }).is_err());
        assert!(SearchSpace::new(vec![]).is_err());
    }

    #[test]
    fn json_shape() {
        let json = serde_json::to_string(&space().dims[0]).unwrap();
        assert_eq!(json, r#"{"name":"lr","kind":"log_continuous","low":0.00001,"high":0.01}"#);
        let back: SearchSpace = serde_json::from_str(&serde_json::to_string(&space()).unwrap()).unwrap();
        assert_eq!(back, space());
    }
}
