use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// One constant-rate piece of a shear protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShearPiece {
    pub t_start: f64,
    pub rate: f64,
}

/// Piecewise-constant shear rate b(t); the last piece extends to +∞.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ShearPiece>", into = "Vec<ShearPiece>")]
pub struct ShearProtocol {
    pieces: Vec<ShearPiece>,
}

impl TryFrom<Vec<ShearPiece>> for ShearProtocol {
    type Error = crate::Error;
    fn try_from(pieces: Vec<ShearPiece>) -> Result<Self> {
        Self::new(pieces)
    }
}

impl From<ShearProtocol> for Vec<ShearPiece> {
    fn from(p: ShearProtocol) -> Self {
        p.pieces
    }
}

impl ShearProtocol {
    pub fn new(pieces: Vec<ShearPiece>) -> Result<Self> {
        let Some(first) = pieces.first() else {
            return invalid("shear protocol needs at least one piece");
        };
        if first.t_start != 0.0 {
            return invalid(format!(
                "first shear piece must start at 0, got {}",
                first.t_start
            ));
        }
        if let Some(p) = pieces
            .iter()
            .find(|p| !(p.t_start.is_finite() && p.rate.is_finite()))
        {
            return invalid(format!("shear piece ({}, {}) is not finite", p.t_start, p.rate));
        }
        if let Some(w) = pieces.windows(2).find(|w| w[1].t_start <= w[0].t_start) {
            return invalid(format!(
                "shear piece starts must increase strictly: {} then {}",
                w[0].t_start, w[1].t_start
            ));
        }
        Ok(Self { pieces })
    }

    pub fn constant(rate: f64) -> Self {
        Self::new(vec![ShearPiece { t_start: 0.0, rate }]).expect("finite constant rate")
    }

    pub fn pieces(&self) -> &[ShearPiece] {
        &self.pieces
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(|p| p.rate == 0.0)
    }

    fn piece_index(&self, t: f64) -> usize {
        self.pieces.partition_point(|p| p.t_start <= t).saturating_sub(1)
    }

    /// Rate in force on `[t, next breakpoint)`.
    pub fn rate_at(&self, t: f64) -> f64 {
        self.pieces[self.piece_index(t)].rate
    }

    /// χ(t) = ∫₀ᵗ b.
    pub fn chi(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return invalid(format!("shear integral needs t ≥ 0, got {t}"));
        }
        let mut acc = 0.0;
        for (k, p) in self.pieces.iter().enumerate() {
            if p.t_start >= t {
                break;
            }
            let end = self.pieces.get(k + 1).map_or(t, |q| q.t_start.min(t));
            acc += p.rate * (end - p.t_start);
        }
        Ok(acc)
    }

    /// Mean rate over `[t0, t1]`; the rate at `t0` when the interval is empty.
    pub fn mean_rate(&self, t0: f64, t1: f64) -> Result<f64> {
        if t1 <= t0 {
            return Ok(self.rate_at(t0));
        }
        Ok((self.chi(t1)? - self.chi(t0)?) / (t1 - t0))
    }

    /// Breakpoints strictly inside `(0, t)`.
    pub fn breakpoints_before(&self, t: f64) -> Vec<f64> {
        self.pieces
            .iter()
            .skip(1)
            .map(|p| p.t_start)
            .take_while(|&s| s < t)
            .collect()
    }

    /// ‖b‖ in L²(0, T).
    pub fn l2_norm(&self, t_end: f64) -> f64 {
        let mut acc = 0.0;
        for (k, p) in self.pieces.iter().enumerate() {
            if p.t_start >= t_end {
                break;
            }
            let end = self.pieces.get(k + 1).map_or(t_end, |q| q.t_start.min(t_end));
            acc += p.rate * p.rate * (end - p.t_start);
        }
        acc.sqrt()
    }

    pub fn max_abs_rate(&self, t_end: f64) -> f64 {
        self.pieces
            .iter()
            .take_while(|p| p.t_start < t_end.max(f64::MIN_POSITIVE))
            .map(|p| p.rate.abs())
            .fold(0.0, f64::max)
    }
}

/// χ(t) for a protocol.
pub fn shear_integral(protocol: &ShearProtocol, t: f64) -> Result<f64> {
    protocol.chi(t)
}
