//! Closed-form scalar fields on the unit box: the source weight `f` and the
//! absolutely continuous part of a measure.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Result};

/// Callback form of a [`ScalarField`].
pub type FieldFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum ScalarField {
    Zero,
    Constant(f64),
    /// `scale · Π sin(π x_i)`.
    SinProduct { scale: f64 },
    /// `dim · π² · S^(1+γ)` with `S = Π sin(π x_i)`. Paired with `h(s) = s^-γ`
    /// the exact solution is `S`.
    Manufactured { gamma: f64 },
    /// `scale · exp(-|x - center|² / (2 width²))`; `center` is broadcast over
    /// the coordinates when it has a single entry.
    GaussianBump {
        center: Vec<f64>,
        width: f64,
        scale: f64,
    },
    Custom(FieldFn),
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarField::Zero => write!(f, "zero"),
            ScalarField::Constant(c) => write!(f, "constant({c})"),
            ScalarField::SinProduct { scale } => write!(f, "sin_product({scale})"),
            ScalarField::Manufactured { gamma } => write!(f, "manufactured({gamma})"),
            ScalarField::GaussianBump {
                center,
                width,
                scale,
            } => write!(f, "gaussian_bump({center:?}, {width}, {scale})"),
            ScalarField::Custom(_) => write!(f, "custom"),
        }
    }
}

impl ScalarField {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ScalarField::Zero => 0.0,
            ScalarField::Constant(c) => *c,
            ScalarField::SinProduct { scale } => scale * sin_product(x),
            ScalarField::Manufactured { gamma } => {
                let s = sin_product(x).max(0.0);
                x.len() as f64 * PI * PI * s.powf(1.0 + gamma)
            }
            ScalarField::GaussianBump {
                center,
                width,
                scale,
            } => {
                let r2: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(i, &xi)| {
                        let c = if center.len() == 1 { center[0] } else { center[i] };
                        (xi - c).powi(2)
                    })
                    .sum();
                scale * (-r2 / (2.0 * width * width)).exp()
            }
            ScalarField::Custom(f) => f(x),
        }
    }

    /// True when the field vanishes identically by construction.
    pub fn is_zero(&self) -> bool {
        match self {
            ScalarField::Zero => true,
            ScalarField::Constant(c) => *c == 0.0,
            ScalarField::SinProduct { scale } => *scale == 0.0,
            ScalarField::GaussianBump { scale, .. } => *scale == 0.0,
            _ => false,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            ScalarField::Constant(c) if !(c.is_finite() && *c >= 0.0) => {
                Err(invalid("field", format!("constant {c} must be finite and >= 0")))
            }
            ScalarField::SinProduct { scale } if !(scale.is_finite() && *scale >= 0.0) => {
                Err(invalid("field", format!("scale {scale} must be finite and >= 0")))
            }
            ScalarField::Manufactured { gamma } if !(*gamma > 0.0) => {
                Err(invalid("field", format!("gamma {gamma} must be positive")))
            }
            ScalarField::GaussianBump {
                center,
                width,
                scale,
            } => {
                if !(center.len() == 1 || center.len() >= dim) {
                    return Err(invalid("field", "gaussian_bump center has too few coordinates"));
                }
                if !(*width > 0.0) || !(scale.is_finite() && *scale >= 0.0) {
                    return Err(invalid("field", "gaussian_bump needs width > 0 and scale >= 0"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

fn sin_product(x: &[f64]) -> f64 {
    x.iter().map(|&xi| (PI * xi).sin()).product()
}
