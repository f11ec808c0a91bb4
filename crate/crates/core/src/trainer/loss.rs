use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::Real;
use crate::scorer::{Polarity, Score};

/// Clamp for the BCE probability.
pub const P_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Loss {
    #[default]
    Margin,
    Bce,
}

impl Loss {
    pub fn name(self) -> &'static str {
        match self {
            Loss::Margin => "margin",
            Loss::Bce => "bce",
        }
    }

    pub fn code(self) -> u32 {
        self as u32
    }

    pub fn from_code(c: u32) -> Option<Loss> {
        [Loss::Margin, Loss::Bce].get(c as usize).copied()
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Loss {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "margin" => Ok(Loss::Margin),
            "bce" => Ok(Loss::Bce),
            _ => Err(Error::Config(format!("unknown loss `{s}` (expected margin or bce)"))),
        }
    }
}

/// Distance-like view of a score: similarities `c` become `1 - c`.
pub fn as_distance(s: Score) -> f64 {
    match s.polarity {
        Polarity::DistanceLike => s.value,
        Polarity::SimilarityLike => 1.0 - s.value,
    }
}

/// Hinge `max(0, γ − y(1 − s))` and its derivative in `s` (zero at the kink).
pub(crate) fn margin<T: Real>(s: T, y: i8, gamma: T) -> (T, T) {
    let y = T::of(y as f64);
    let z = gamma - y * (T::one() - s);
    if z > T::zero() {
        (z, y)
    } else {
        (T::zero(), T::zero())
    }
}

pub fn margin_loss(s: Score, y: i8, gamma: f64) -> Result<f64> {
    if s.polarity != Polarity::DistanceLike {
        return Err(Error::Config(
            "margin loss needs a distance-like score; train cosine on 1 - cos".into(),
        ));
    }
    if gamma <= 0.0 || gamma.is_nan() {
        return Err(Error::Config(format!("margin must be positive, got {gamma}")));
    }
    Ok(margin(s.value, y, gamma).0)
}

pub(crate) struct BceOut<T> {
    pub loss: T,
    pub ds: T,
    pub dw: T,
    pub db: T,
}

/// Logistic loss on `w(1 − s) + b`, with gradients in `s`, `w` and `b`.
pub(crate) fn bce<T: Real>(s: T, y: i8, w: T, b: T) -> BceOut<T> {
    let u = T::one() - s;
    let z = w * u + b;
    let p = T::one() / (T::one() + (-z).exp());
    let (lo, hi) = (T::of(P_CLAMP), T::of(1.0 - P_CLAMP));
    let target = if y > 0 { T::one() } else { T::zero() };
    let pc = p.max(lo).min(hi);
    let loss = -(target * pc.ln() + (T::one() - target) * (T::one() - pc).ln());
    let dz = if p < lo || p > hi { T::zero() } else { p - target };
    BceOut {
        loss,
        ds: -dz * w,
        dw: dz * u,
        db: dz,
    }
}

pub fn bce_loss(s: Score, y: i8, w: f64, b: f64) -> f64 {
    bce(as_distance(s), y, w, b).loss
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(v: f64) -> Score {
        Score {
            value: v,
            polarity: Polarity::DistanceLike,
        }
    }

    #[test]
    fn margin_values() {
        assert_eq!(margin_loss(dist(0.4), 1, 0.5).unwrap(), 0.0);
        assert!((margin_loss(dist(0.8), 1, 0.5).unwrap() - 0.3).abs() < 1e-15);
        assert!((margin_loss(dist(1.2), -1, 0.5).unwrap() - 0.3).abs() < 1e-15);
        let cos = Score {
            value: 0.3,
            polarity: Polarity::SimilarityLike,
        };
        assert!(matches!(margin_loss(cos, 1, 0.5), Err(Error::Config(_))));
        assert!(margin_loss(dist(0.5), 1, 0.0).is_err());
    }

    #[test]
    fn margin_slope_and_kink() {
        assert_eq!(margin(0.8f64, 1, 0.5).1, 1.0);
        assert_eq!(margin(1.2f64, -1, 0.5).1, -1.0);
        assert_eq!(margin(0.5f64, 1, 0.5), (0.0, 0.0));
    }

    #[test]
    fn bce_values() {
        let ln2 = std::f64::consts::LN_2;
        assert!((bce_loss(dist(0.3), 1, 0.0, 0.0) - ln2).abs() < 1e-12);
        assert!((bce_loss(dist(0.3), -1, 0.0, 0.0) - ln2).abs() < 1e-12);
        assert!((bce_loss(dist(1.0), 1, 7.0, 0.0) - ln2).abs() < 1e-12);
        // σ(2) = 0.8807970779778823, −ln σ(2) = 0.12692801104297263
        assert!((bce_loss(dist(0.5), 1, 4.0, 0.0) - 0.126_928_011_042_972_63).abs() < 1e-12);
    }

    #[test]
    fn bce_gradients_match_differences() {
        let h = 1e-6;
        for &(s, y, w, b) in &[(0.3, 1i8, 2.0, 0.1), (1.4, -1, 4.0, -0.5), (0.9, -1, 1.5, 0.2)] {
            let g = bce(s, y, w, b);
            let f = |s: f64, w: f64, b: f64| bce(s, y, w, b).loss;
            assert!((g.ds - (f(s + h, w, b) - f(s - h, w, b)) / (2.0 * h)).abs() < 1e-7);
            assert!((g.dw - (f(s, w + h, b) - f(s, w - h, b)) / (2.0 * h)).abs() < 1e-7);
            assert!((g.db - (f(s, w, b + h) - f(s, w, b - h)) / (2.0 * h)).abs() < 1e-7);
        }
    }
}
