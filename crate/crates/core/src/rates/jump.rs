use serde::{Deserialize, Serialize};

use super::RatesError;

/// How a tabulated jump rate continues beyond its table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailRule {
    /// `g(k) = slope * k` beyond the table.
    Linear { slope: f64 },
    /// Constant at the last tabulated value.
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpRateKind {
    /// `g(k) = slope * k`; independent particles for `slope = 1`.
    Linear { slope: f64 },
    /// `g(k) = 1(k >= 1)`.
    Indicator,
    /// `g(k) = min(k, cap)`.
    Capped { cap: u32 },
    /// Explicit table for `k = 0..values.len()`, with a declared tail.
    Table { values: Vec<f64>, tail: TailRule },
}

/// Zero-range jump rate `g`, with `g(0) = 0` and `g(k) > 0` for `k >= 1`,
/// bounded by `lipschitz_c * k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpRate {
    kind: JumpRateKind,
    lipschitz_c: f64,
}

impl JumpRate {
    pub fn linear() -> Self {
        Self::new(JumpRateKind::Linear { slope: 1.0 }).unwrap()
    }

    pub fn indicator() -> Self {
        Self::new(JumpRateKind::Indicator).unwrap()
    }

    pub fn capped(cap: u32) -> Self {
        Self::new(JumpRateKind::Capped { cap }).unwrap()
    }

    pub fn new(kind: JumpRateKind) -> Result<Self, RatesError> {
        let lipschitz_c = match &kind {
            JumpRateKind::Linear { slope } => {
                if *slope <= 0.0 {
                    return Err(RatesError::InvalidRate("linear slope must be > 0".into()));
                }
                *slope
            }
            JumpRateKind::Indicator => 1.0,
            JumpRateKind::Capped { cap } => {
                if *cap == 0 {
                    return Err(RatesError::InvalidRate("cap must be >= 1".into()));
                }
                1.0
            }
            JumpRateKind::Table { values, tail } => {
                if values.is_empty() || values[0] != 0.0 {
                    return Err(RatesError::InvalidRate("table must start with g(0)=0".into()));
                }
                if values.iter().skip(1).any(|&v| !(v > 0.0) || !v.is_finite()) {
                    return Err(RatesError::InvalidRate(
                        "g(k) must be positive and finite for k >= 1".into(),
                    ));
                }
                let mut c: f64 = 0.0;
                for (k, &v) in values.iter().enumerate().skip(1) {
                    c = c.max(v / k as f64);
                }
                if let TailRule::Linear { slope } = tail {
                    if *slope <= 0.0 {
                        return Err(RatesError::InvalidRate("tail slope must be > 0".into()));
                    }
                    c = c.max(*slope);
                }
                c
            }
        };
        Ok(Self { kind, lipschitz_c })
    }

    #[inline]
    pub fn g(&self, k: u64) -> f64 {
        if k == 0 {
            return 0.0;
        }
        match &self.kind {
            JumpRateKind::Linear { slope } => slope * k as f64,
            JumpRateKind::Indicator => 1.0,
            JumpRateKind::Capped { cap } => (k as f64).min(*cap as f64),
            JumpRateKind::Table { values, tail } => {
                if (k as usize) < values.len() {
                    values[k as usize]
                } else {
                    match tail {
                        TailRule::Linear { slope } => slope * k as f64,
                        TailRule::Constant => *values.last().unwrap(),
                    }
                }
            }
        }
    }

    /// Radius of the fugacity interval, `phi* = liminf g(k)`.
    pub fn phi_star(&self) -> f64 {
        match &self.kind {
            JumpRateKind::Linear { .. } => f64::INFINITY,
            JumpRateKind::Indicator => 1.0,
            JumpRateKind::Capped { cap } => *cap as f64,
            JumpRateKind::Table { values, tail } => match tail {
                TailRule::Linear { .. } => f64::INFINITY,
                TailRule::Constant => *values.last().unwrap(),
            },
        }
    }

    pub fn lipschitz_c(&self) -> f64 {
        self.lipschitz_c
    }

    pub fn kind(&self) -> &JumpRateKind {
        &self.kind
    }
}
