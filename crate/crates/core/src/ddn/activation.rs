use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// `(1/β) log(1 + exp(βx))`
    Softplus,
    /// Identity.
    Linear,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub fn value(self, beta: f64, x: f64) -> f64 {
        match self {
            Activation::Softplus => {
                let z = beta * x;
                // z + log(1 + e^{-z}) for positive z keeps exp from overflowing
                let sp = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
                sp / beta
            }
            Activation::Linear => x,
        }
    }

    pub fn first(self, beta: f64, x: f64) -> f64 {
        match self {
            Activation::Softplus => sigmoid(beta * x),
            Activation::Linear => 1.0,
        }
    }

    pub fn second(self, beta: f64, x: f64) -> f64 {
        match self {
            Activation::Softplus => {
                let s = sigmoid(beta * x);
                beta * s * (1.0 - s)
            }
            Activation::Linear => 0.0,
        }
    }
}
