use serde::{Deserialize, Serialize};

/// Unary functions available to formulas. [`LIBRARY`] lists the fitting
/// candidates in tie-break order; `Sign` only appears in derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnaryFn {
    Identity,
    Square,
    Cube,
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
    Tanh,
    Abs,
    Reciprocal,
    Sign,
}

pub const LIBRARY: [UnaryFn; 11] = [
    UnaryFn::Identity,
    UnaryFn::Square,
    UnaryFn::Cube,
    UnaryFn::Sqrt,
    UnaryFn::Exp,
    UnaryFn::Log,
    UnaryFn::Sin,
    UnaryFn::Cos,
    UnaryFn::Tanh,
    UnaryFn::Abs,
    UnaryFn::Reciprocal,
];

impl UnaryFn {
    pub fn name(self) -> &'static str {
        match self {
            UnaryFn::Identity => "identity",
            UnaryFn::Square => "square",
            UnaryFn::Cube => "cube",
            UnaryFn::Sqrt => "sqrt",
            UnaryFn::Exp => "exp",
            UnaryFn::Log => "log",
            UnaryFn::Sin => "sin",
            UnaryFn::Cos => "cos",
            UnaryFn::Tanh => "tanh",
            UnaryFn::Abs => "abs",
            UnaryFn::Reciprocal => "reciprocal",
            UnaryFn::Sign => "sign",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        LIBRARY
            .iter()
            .chain(&[UnaryFn::Sign])
            .copied()
            .find(|f| f.name() == s)
    }

    /// Whether `u` lies in the domain.
    pub fn admits(self, u: f64) -> bool {
        match self {
            UnaryFn::Sqrt => u >= 0.0,
            UnaryFn::Log => u > 0.0,
            UnaryFn::Reciprocal => u != 0.0,
            _ => true,
        }
    }

    /// `f(u)`, or `None` outside the domain or on overflow.
    pub fn apply(self, u: f64) -> Option<f64> {
        if !u.is_finite() || !self.admits(u) {
            return None;
        }
        let v = self.raw(u);
        v.is_finite().then_some(v)
    }

    fn raw(self, u: f64) -> f64 {
        match self {
            UnaryFn::Identity => u,
            UnaryFn::Square => u * u,
            UnaryFn::Cube => u * u * u,
            UnaryFn::Sqrt => u.sqrt(),
            UnaryFn::Exp => u.exp(),
            UnaryFn::Log => u.ln(),
            UnaryFn::Sin => u.sin(),
            UnaryFn::Cos => u.cos(),
            UnaryFn::Tanh => u.tanh(),
            UnaryFn::Abs => u.abs(),
            UnaryFn::Reciprocal => 1.0 / u,
            UnaryFn::Sign => {
                if u > 0.0 {
                    1.0
                } else if u < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `f'(u)` where defined (0 for `abs`/`sign` kinks taken one-sided).
    pub fn derivative(self, u: f64) -> f64 {
        match self {
            UnaryFn::Identity => 1.0,
            UnaryFn::Square => 2.0 * u,
            UnaryFn::Cube => 3.0 * u * u,
            UnaryFn::Sqrt => 0.5 / u.sqrt(),
            UnaryFn::Exp => u.exp(),
            UnaryFn::Log => 1.0 / u,
            UnaryFn::Sin => u.cos(),
            UnaryFn::Cos => -u.sin(),
            UnaryFn::Tanh => 1.0 - u.tanh().powi(2),
            UnaryFn::Abs => UnaryFn::Sign.raw(u),
            UnaryFn::Reciprocal => -1.0 / (u * u),
            UnaryFn::Sign => 0.0,
        }
    }
}
