use serde::{Deserialize, Serialize};

/// Default comparison tolerance, applied relative to [`Residual::scale`].
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Worst discrepancy of an identity together with the magnitude of the terms
/// that entered it. The identity holds when `abs <= tol * scale`, with
/// `scale = max(1, largest |term|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub abs: f64,
    pub scale: f64,
}

impl Default for Residual {
    fn default() -> Self {
        Residual::ZERO
    }
}

impl Residual {
    pub const ZERO: Residual = Residual {
        abs: 0.0,
        scale: 1.0,
    };

    pub fn new(abs: f64, scale: f64) -> Self {
        Residual {
            abs,
            scale: scale.abs().max(1.0),
        }
    }

    /// Residual of `lhs == rhs` over paired components.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut abs: f64 = 0.0;
        let mut scale: f64 = 1.0;
        let mut nan = false;
        for (a, b) in pairs {
            // f64::max silently drops NaN, so track it separately
            nan |= a.is_nan() || b.is_nan();
            abs = abs.max((a - b).abs());
            scale = scale.max(a.abs()).max(b.abs());
        }
        if nan {
            return Residual {
                abs: f64::INFINITY,
                scale: 1.0,
            };
        }
        Residual { abs, scale }
    }

    /// Residual of an expression that should vanish, with the magnitudes of
    /// the terms that were summed to build it.
    pub fn vanishing(value: f64, terms: impl IntoIterator<Item = f64>) -> Self {
        let scale = terms.into_iter().fold(1.0f64, |s, t| s.max(t.abs()));
        if value.is_nan() {
            return Residual {
                abs: f64::INFINITY,
                scale: 1.0,
            };
        }
        Residual {
            abs: value.abs(),
            scale,
        }
    }

    /// Raises the scale to include `magnitude`, the size of a field that was
    /// differentiated to build the compared sides. Derivatives computed from
    /// a field carry roundoff relative to the field, not to the derivative.
    pub fn with_magnitude(self, magnitude: f64) -> Self {
        Residual {
            abs: self.abs,
            scale: self.scale.max(magnitude.abs()),
        }
    }

    pub fn normalized(&self) -> f64 {
        self.abs / self.scale
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.abs <= tolerance * self.scale
    }

    /// Keeps whichever residual is worse relative to its scale.
    pub fn worst(self, other: Residual) -> Residual {
        if other.normalized() > self.normalized() || other.abs.is_nan() {
            other
        } else {
            self
        }
    }
}

impl std::iter::FromIterator<Residual> for Residual {
    fn from_iter<I: IntoIterator<Item = Residual>>(iter: I) -> Self {
        iter.into_iter().fold(Residual::ZERO, Residual::worst)
    }
}
