use crate::error::{Error, Result};

/// One-to-one map from welfare `E` to the modelled response `Y = T(E)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum TransformSpec {
    #[default]
    Identity,
    /// `Y = ln(E + shift)`, `shift >= 0`.
    LogShift { shift: f64 },
}

impl TransformSpec {
    pub fn log_shift(shift: f64) -> Result<Self> {
        if !(shift >= 0.0) || !shift.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "log-shift constant must be finite and >= 0, got {shift}"
            )));
        }
        Ok(TransformSpec::LogShift { shift })
    }

    pub fn apply(&self, welfare: f64) -> Result<f64> {
        match *self {
            TransformSpec::Identity => Ok(welfare),
            TransformSpec::LogShift { shift } => {
                let arg = welfare + shift;
                if arg > 0.0 {
                    Ok(arg.ln())
                } else {
                    Err(Error::TransformDomain {
                        row: 0,
                        welfare,
                        shift,
                    })
                }
            }
        }
    }

    #[inline]
    pub fn invert(&self, response: f64) -> f64 {
        match *self {
            TransformSpec::Identity => response,
            TransformSpec::LogShift { shift } => response.exp() - shift,
        }
    }

    /// Image of a welfare threshold on the response scale. Both transforms are
    /// increasing, so `E < z` iff `Y < T(z)` up to rounding.
    pub fn threshold(&self, welfare: f64) -> Option<f64> {
        self.apply(welfare).ok()
    }
}
