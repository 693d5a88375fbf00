//! Random band-limited fields.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::{SurfaceError, TorusShape};

/// Fields `Σ a_{pq} cos(2π(px + qy) + θ_{pq})` over `0 < max(|p|,|q|) ≤ max_frequency`,
/// rescaled to sup norm `amplitude`. They have zero mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandLimited {
    pub max_frequency: usize,
    pub amplitude: f64,
}

impl BandLimited {
    pub fn new(max_frequency: usize, amplitude: f64) -> Self {
        Self {
            max_frequency,
            amplitude,
        }
    }
}

pub fn random_field<R: Rng>(shape: TorusShape, spec: BandLimited, rng: &mut R) -> Result<Vec<f64>, SurfaceError> {
    let limit = shape.n() / 4;
    if spec.max_frequency > limit || spec.max_frequency == 0 {
        return Err(SurfaceError::BandTooWide {
            max_frequency: spec.max_frequency,
            limit,
        });
    }
    let k = spec.max_frequency as i64;
    let phase = Uniform::new(0.0, 2.0 * PI).expect("valid range");
    let mut modes = Vec::new();
    // One representative per ± pair.
    for q in 0..=k {
        for p in -k..=k {
            if q == 0 && p <= 0 {
                continue;
            }
            let a: f64 = rng.sample(StandardNormal);
            modes.push((p as f64, q as f64, a, rng.sample(phase)));
        }
    }
    let mut f = shape.sample(|x, y| {
        modes
            .iter()
            .map(|(p, q, a, t)| a * (2.0 * PI * (p * x + q * y) + t).cos())
            .sum()
    });
    let sup = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if sup > 0.0 {
        f.iter_mut().for_each(|v| *v *= spec.amplitude / sup);
    }
    Ok(f)
}
