use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Input range `[lo, hi]` of a uniform quantizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizerRange {
    pub lo: f64,
    pub hi: f64,
}

impl QuantizerRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        let r = QuantizerRange { lo, hi };
        r.check()?;
        Ok(r)
    }

    pub fn check(&self) -> Result<()> {
        if self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "quantizer range [{}, {}] is empty",
                self.lo, self.hi
            )))
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Cell width with `bits` bits.
    pub fn step(&self, bits: u32) -> f64 {
        self.width() / 2f64.powi(bits as i32)
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// A quantized measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizedObservation {
    /// Midpoint of the cell the input fell in.
    pub value: f64,
    pub bits: u32,
    pub step: f64,
}

/// Maps `y` to the midpoint of its cell among `2^bits` equal cells of
/// `range`. Inputs outside the range land in the nearest boundary cell; the
/// top edge `hi` belongs to the last cell.
pub fn quantize(y: f64, bits: u32, range: QuantizerRange) -> QuantizedObservation {
    let step = range.step(bits);
    let cells = 2f64.powi(bits as i32);
    let cell = ((y - range.lo) / step).floor().clamp(0.0, cells - 1.0);
    QuantizedObservation {
        value: range.lo + (cell + 0.5) * step,
        bits,
        step,
    }
}
