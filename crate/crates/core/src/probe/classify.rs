use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OpponencyClass {
    Opponent,
    NonOpponent,
    Unresponsive,
}

impl OpponencyClass {
    pub const ALL: [OpponencyClass; 3] = [
        OpponencyClass::Opponent,
        OpponencyClass::NonOpponent,
        OpponencyClass::Unresponsive,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OpponencyClass::Opponent => "opponent",
            OpponencyClass::NonOpponent => "non_opponent",
            OpponencyClass::Unresponsive => "unresponsive",
        }
    }
}

impl fmt::Display for OpponencyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OpponencyClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OpponencyClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Format(format!("unknown class '{s}'")))
    }
}

/// Margins used to decide "above", "below" and "the same".
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// A response counts as above (below) baseline only beyond this margin.
    pub delta: f64,
    /// Curves whose range is at most this are unresponsive.
    pub epsilon: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            delta: 1e-5,
            epsilon: 1e-4,
        }
    }
}

impl Tolerances {
    /// Requires `0 ≤ δ ≤ ε/2`, so an opponent curve always has range above ε.
    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0 && self.epsilon >= 0.0 && self.delta <= self.epsilon / 2.0) {
            return Err(Error::InvalidConfig(format!(
                "tolerances need 0 <= delta <= epsilon/2 (delta={}, epsilon={})",
                self.delta, self.epsilon
            )));
        }
        Ok(())
    }
}

/// Responses of one cell to an ordered family of stimuli, plus its zero-image response.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseCurve {
    pub parameters: Vec<f64>,
    pub responses: Vec<f64>,
    pub baseline: f64,
}

impl ResponseCurve {
    pub fn new(parameters: Vec<f64>, responses: Vec<f64>, baseline: f64) -> Result<Self> {
        if parameters.len() != responses.len() {
            return Err(Error::Shape(format!(
                "{} parameters for {} responses",
                parameters.len(),
                responses.len()
            )));
        }
        if !baseline.is_finite() || responses.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite { op: "response curve" });
        }
        Ok(Self {
            parameters,
            responses,
            baseline,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn min(&self) -> f64 {
        self.responses.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.responses.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Three-way classification of a response curve against its baseline.
///
/// Flat curves (range ≤ ε) are unresponsive. Otherwise a curve that rises
/// above baseline + δ somewhere and falls below baseline − δ somewhere is
/// opponent; anything else is non-opponent.
pub fn classify(curve: &ResponseCurve, tol: &Tolerances) -> Result<OpponencyClass> {
    tol.validate()?;
    if curve.is_empty() {
        return Err(Error::EmptyCurve);
    }
    if curve.max() - curve.min() <= tol.epsilon {
        return Ok(OpponencyClass::Unresponsive);
    }
    let above = curve.responses.iter().any(|&r| r > curve.baseline + tol.delta);
    let below = curve.responses.iter().any(|&r| r < curve.baseline - tol.delta);
    Ok(if above && below {
        OpponencyClass::Opponent
    } else {
        OpponencyClass::NonOpponent
    })
}

/// (most excitatory, most inhibitory) stimulus parameter of an opponent curve.
/// Ties go to the smaller parameter.
pub fn extremal_hues(curve: &ResponseCurve, tol: &Tolerances) -> Result<(f64, f64)> {
    let class = classify(curve, tol)?;
    if class != OpponencyClass::Opponent {
        return Err(Error::NotOpponent(class.to_string()));
    }
    let pick = |better: fn(f64, f64) -> bool| {
        let mut best = 0;
        for i in 1..curve.len() {
            let (r, b) = (curve.responses[i], curve.responses[best]);
            if better(r, b) || (r == b && curve.parameters[i] < curve.parameters[best]) {
                best = i;
            }
        }
        curve.parameters[best]
    };
    Ok((pick(|a, b| a > b), pick(|a, b| a < b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(responses: &[f64], baseline: f64) -> ResponseCurve {
        let params = (0..responses.len()).map(|i| i as f64 * 10.0).collect();
        ResponseCurve::new(params, responses.to_vec(), baseline).unwrap()
    }

    #[test]
    fn named_examples() {
        let tol = Tolerances::default();
        assert_eq!(classify(&curve(&[1.2, 1.5, 1.8], 1.0), &tol).unwrap(), OpponencyClass::NonOpponent);
        assert_eq!(classify(&curve(&[0.5, 1.0, 1.5], 1.0), &tol).unwrap(), OpponencyClass::Opponent);
        assert_eq!(classify(&curve(&[0.7; 5], 0.7), &tol).unwrap(), OpponencyClass::Unresponsive);
        // all below is also non-opponent
        assert_eq!(classify(&curve(&[0.1, 0.4], 1.0), &tol).unwrap(), OpponencyClass::NonOpponent);
    }

    #[test]
    fn empty_curve_and_bad_tolerances() {
        let tol = Tolerances::default();
        assert!(matches!(classify(&curve(&[], 0.0), &tol), Err(Error::EmptyCurve)));
        let bad = Tolerances {
            delta: 1e-3,
            epsilon: 1e-4,
        };
        assert!(classify(&curve(&[1.0, 2.0], 0.0), &bad).is_err());
    }

    #[test]
    fn extremal_examples() {
        let tol = Tolerances::default();
        let hues: Vec<f64> = (0..8).map(|i| i as f64 * 45.0).collect();
        let mut r = vec![1.0; 8];
        r[0] = 2.0; // 0° red
        r[4] = 0.0; // 180° cyan
        let c = ResponseCurve::new(hues.clone(), r.clone(), 1.0).unwrap();
        assert_eq!(extremal_hues(&c, &tol).unwrap(), (0.0, 180.0));

        let shifted = ResponseCurve::new(hues.clone(), r.iter().map(|v| v + 3.25).collect(), 4.25).unwrap();
        assert_eq!(extremal_hues(&shifted, &tol).unwrap(), (0.0, 180.0));

        // tie: two equal maxima → smaller hue
        let mut tied = r.clone();
        tied[6] = 2.0;
        let c = ResponseCurve::new(hues.clone(), tied, 1.0).unwrap();
        assert_eq!(extremal_hues(&c, &tol).unwrap().0, 0.0);

        let flat = ResponseCurve::new(hues, vec![1.5; 8], 1.0).unwrap();
        assert!(matches!(extremal_hues(&flat, &tol), Err(Error::NotOpponent(_))));
    }

    #[test]
    fn spike_is_most_excitatory() {
        let tol = Tolerances::default();
        let mut r = vec![0.5; 16];
        r[11] = 0.9;
        r[3] = 0.2;
        let c = curve(&r, 0.5);
        assert_eq!(extremal_hues(&c, &tol).unwrap().0, 110.0);
    }

    #[test]
    fn non_finite_curve_rejected() {
        assert!(ResponseCurve::new(vec![0.0], vec![f64::NAN], 0.0).is_err());
        assert!(ResponseCurve::new(vec![0.0, 1.0], vec![0.0], 0.0).is_err());
    }

    #[test]
    fn class_names_round_trip() {
        for c in OpponencyClass::ALL {
            assert_eq!(c.as_str().parse::<OpponencyClass>().unwrap(), c);
        }
    }
}
