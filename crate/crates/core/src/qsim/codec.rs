use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unsigned fixed point: `value = offset + code · scale`,
/// `code ∈ [0, 2^bits − 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointCodec {
    pub bits: usize,
    pub scale: f64,
    pub offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Encoded {
    pub code: usize,
    pub saturated: bool,
}

impl FixedPointCodec {
    pub fn new(bits: usize, scale: f64, offset: f64) -> Result<Self> {
        if !(1..=24).contains(&bits) {
            return Err(Error::invalid("bits", bits as f64, "codec width must lie in [1, 24]"));
        }
        if !(scale > 0.0 && scale.is_finite()) || !offset.is_finite() {
            return Err(Error::invalid("scale", scale, "must be positive and finite"));
        }
        Ok(Self { bits, scale, offset })
    }

    /// Codes spanning `[0, max]` with the top code decoding to `max` exactly.
    pub fn for_range(bits: usize, max: f64) -> Result<Self> {
        if !(max > 0.0 && max.is_finite()) {
            return Err(Error::invalid("max", max, "must be positive and finite"));
        }
        let top = ((1u64 << bits.min(63)) - 1) as f64;
        Self::new(bits, max / top, 0.0)
    }

    pub fn max_code(&self) -> usize {
        (1usize << self.bits) - 1
    }

    /// Nearest code; values beyond half a step outside the range saturate.
    pub fn encode(&self, value: f64) -> Encoded {
        let x = (value - self.offset) / self.scale;
        let top = self.max_code() as f64;
        if !x.is_finite() || x < -0.5 || x > top + 0.5 {
            let code = if x.is_nan() || x < 0.0 { 0 } else { self.max_code() };
            return Encoded { code, saturated: true };
        }
        Encoded {
            code: x.round().clamp(0.0, top) as usize,
            saturated: false,
        }
    }

    pub fn decode(&self, code: usize) -> f64 {
        if code == self.max_code() && self.offset == 0.0 {
            // Exact top value so the range maximum survives the round trip.
            return self.scale * self.max_code() as f64;
        }
        self.offset + code as f64 * self.scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn saturation() {
        let c = FixedPointCodec::for_range(8, 10.0).unwrap();
        assert_eq!(c.encode(10.0), Encoded { code: 255, saturated: false });
        assert_eq!(c.encode(11.0), Encoded { code: 255, saturated: true });
        assert_eq!(c.encode(-1.0), Encoded { code: 0, saturated: true });
        assert!(FixedPointCodec::new(0, 1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_within_half_step(bits in 1usize..16, max in 0.1f64..1e4, u in 0.0f64..=1.0) {
            let c = FixedPointCodec::for_range(bits, max).unwrap();
            let v = u * max;
            let e = c.encode(v);
            prop_assert!(!e.saturated);
            prop_assert!((c.decode(e.code) - v).abs() <= c.scale / 2.0 * (1.0 + 1e-12));
        }
    }
}
