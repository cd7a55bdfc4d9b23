use serde::{Deserialize, Serialize};

/// A scalar function of `r > 0` used as a driving term or error function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    Zero,
    Constant { c: f64 },
    /// `c · r^b`.
    Power { c: f64, b: f64 },
    /// Piecewise linear in `log r` through `(r, value)` knots, constant
    /// outside the knot range.
    Tabulated { knots: Vec<(f64, f64)> },
}

impl Profile {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Constant { c } => *c,
            Profile::Power { c, b } => c * r.powf(*b),
            Profile::Tabulated { knots } => {
                let Some(first) = knots.first() else { return 0.0 };
                if r <= first.0 {
                    return first.1;
                }
                let last = knots[knots.len() - 1];
                if r >= last.0 {
                    return last.1;
                }
                let i = knots.partition_point(|k| k.0 <= r);
                let (r0, v0) = knots[i - 1];
                let (r1, v1) = knots[i];
                let w = (r.ln() - r0.ln()) / (r1.ln() - r0.ln());
                v0 + w * (v1 - v0)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Profile::Zero => true,
            Profile::Constant { c } | Profile::Power { c, .. } => *c == 0.0,
            Profile::Tabulated { knots } => knots.iter().all(|k| k.1 == 0.0),
        }
    }

    /// Value assumed beyond the tabulation horizon.
    pub fn tail_value(&self, horizon: f64) -> f64 {
        self.eval(horizon)
    }
}
