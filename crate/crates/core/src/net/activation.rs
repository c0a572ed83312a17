use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Entrywise activation function. Every variant is Lipschitz continuous.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Sigmoid,
    Tanh,
    SoftPlus,
    Identity,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu(slope) => {
                if x > 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            // log(1 + e^x) without overflow
            Activation::SoftPlus => x.max(0.0) + (-x.abs()).exp().ln_1p(),
            Activation::Identity => x,
        }
    }

    /// Derivative at `x`. At the kink of ReLU / LeakyReLU (x == 0) the
    /// left derivative is used, so ReLU'(0) = 0.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(slope) => {
                if x > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::SoftPlus => sigmoid(x),
            Activation::Identity => 1.0,
        }
    }

    /// Lipschitz constant, i.e. sup |f'|.
    pub fn lipschitz(self) -> f64 {
        match self {
            Activation::Relu | Activation::Tanh | Activation::SoftPlus | Activation::Identity => 1.0,
            Activation::LeakyRelu(slope) => slope.abs().max(1.0),
            Activation::Sigmoid => 0.25,
        }
    }

    /// True for activations with a derivative discontinuity at 0.
    pub fn has_kink(self) -> bool {
        matches!(self, Activation::Relu | Activation::LeakyRelu(_))
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Relu => f.write_str("relu"),
            Activation::LeakyRelu(s) => write!(f, "leaky_relu:{s}"),
            Activation::Sigmoid => f.write_str("sigmoid"),
            Activation::Tanh => f.write_str("tanh"),
            Activation::SoftPlus => f.write_str("softplus"),
            Activation::Identity => f.write_str("identity"),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        let act = match s.as_str() {
            "relu" => Activation::Relu,
            "sigmoid" => Activation::Sigmoid,
            "tanh" => Activation::Tanh,
            "softplus" => Activation::SoftPlus,
            "identity" | "linear" => Activation::Identity,
            "leaky_relu" => Activation::LeakyRelu(0.01),
            other => match other.strip_prefix("leaky_relu:") {
                Some(slope) => {
                    let slope: f64 = slope
                        .parse()
                        .map_err(|_| Error::validation(format!("bad leaky_relu slope in {other:?}")))?;
                    if !slope.is_finite() {
                        return Err(Error::validation("leaky_relu slope must be finite"));
                    }
                    Activation::LeakyRelu(slope)
                }
                None => return Err(Error::validation(format!("unknown activation {other:?}"))),
            },
        };
        Ok(act)
    }
}

impl TryFrom<String> for Activation {
    type Error = Error;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Activation> for String {
    fn from(a: Activation) -> String {
        a.to_string()
    }
}
