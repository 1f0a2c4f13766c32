//! Measures as oracles: a sampler, bracketed masses of balls and of
//! slab-within-ball regions, and support metadata.

mod counterexample;
mod ifs;
mod lebesgue;
mod product;
mod pushforward;
mod simple;
mod spec;

pub use counterexample::{stern_brocot, Counterexample, Spike};
pub use ifs::{cantor_dust, cantor_middle_thirds, IfsSpec, MapSpec, SelfSimilar};
pub use lebesgue::LebesgueCube;
pub use product::Product;
pub use pushforward::{moment_curve, Pushforward};
pub use simple::{PointMass, UniformSegment};
pub use spec::MeasureSpec;

use rand::{Rng as _, RngCore};
use serde::Serialize;

use crate::geometry::{Ball, Hyperplane, Norm};
use crate::rational::Q;
use crate::stats::wilson;

/// `{y : dist(y, plane) ≤ half_width}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Slab {
    pub plane: Hyperplane<f64>,
    pub half_width: f64,
}

impl Slab {
    pub fn contains(&self, y: &[f64]) -> bool {
        self.plane.dist(y).map(|d| d <= self.half_width).unwrap_or(false)
    }

    /// Range `[a, b]` of allowed values of `normal · y`.
    pub fn value_range(&self) -> (f64, f64) {
        let w = self.half_width * self.plane.normal_sq().sqrt();
        (self.plane.offset - w, self.plane.offset + w)
    }
}

/// A closed ball, optionally intersected with a slab.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub ball: Ball<f64>,
    pub slab: Option<Slab>,
}

impl Region {
    pub fn ball(ball: &Ball<f64>) -> Self {
        Region { ball: ball.clone(), slab: None }
    }

    pub fn slab_in_ball(ball: &Ball<f64>, plane: &Hyperplane<f64>, half_width: f64) -> Self {
        Region {
            ball: ball.clone(),
            slab: Some(Slab { plane: plane.clone(), half_width }),
        }
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        self.ball.contains(y) && self.slab.as_ref().is_none_or(|s| s.contains(y))
    }

    /// Stable 64-bit fingerprint, used to seed Monte Carlo estimates.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        for c in &self.ball.center {
            eat(c.to_bits());
        }
        eat(self.ball.radius.to_bits());
        eat(matches!(self.ball.norm, Norm::Sup) as u64);
        if let Some(s) = &self.slab {
            for c in &s.plane.normal {
                eat(c.to_bits());
            }
            eat(s.plane.offset.to_bits());
            eat(s.half_width.to_bits());
        }
        h
    }

    /// Bounding box of the ball.
    pub fn bbox(&self) -> (Vec<f64>, Vec<f64>) {
        let r = self.ball.radius;
        (
            self.ball.center.iter().map(|c| c - r).collect(),
            self.ball.center.iter().map(|c| c + r).collect(),
        )
    }
}

/// Box classification against a region.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Side {
    Inside,
    Outside,
    Straddle,
}

pub(crate) fn classify_box(lo: &[f64], hi: &[f64], region: &Region) -> Side {
    let b = &region.ball;
    let ball_side = match b.norm {
        Norm::Sup => {
            let mut inside = true;
            for i in 0..lo.len() {
                let (a, c) = (b.center[i] - b.radius, b.center[i] + b.radius);
                if hi[i] < a || lo[i] > c {
                    return Side::Outside;
                }
                if lo[i] < a || hi[i] > c {
                    inside = false;
                }
            }
            if inside {
                Side::Inside
            } else {
                Side::Straddle
            }
        }
        Norm::Euclidean => {
            let (mut near, mut far) = (0.0, 0.0);
            for i in 0..lo.len() {
                let c = b.center[i];
                let dn = if c < lo[i] {
                    lo[i] - c
                } else if c > hi[i] {
                    c - hi[i]
                } else {
                    0.0
                };
                let df = (c - lo[i]).abs().max((hi[i] - c).abs());
                near += dn * dn;
                far += df * df;
            }
            let r2 = b.radius * b.radius;
            if near > r2 {
                return Side::Outside;
            }
            if far <= r2 {
                Side::Inside
            } else {
                Side::Straddle
            }
        }
    };
    let Some(slab) = &region.slab else {
        return ball_side;
    };
    let (a, c) = slab.value_range();
    let (mut vl, mut vh) = (0.0, 0.0);
    for i in 0..lo.len() {
        let n = slab.plane.normal[i];
        let (p, q) = (n * lo[i], n * hi[i]);
        vl += p.min(q);
        vh += p.max(q);
    }
    if vh < a || vl > c {
        return Side::Outside;
    }
    let slab_inside = vl >= a && vh <= c;
    if slab_inside && ball_side == Side::Inside {
        Side::Inside
    } else {
        Side::Straddle
    }
}

/// Mass known to lie in `[lo, hi]`; `flagged` when the requested tolerance
/// could not be reached.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MassBracket {
    pub lo: f64,
    pub hi: f64,
    pub flagged: bool,
}

impl MassBracket {
    pub fn exact(m: f64) -> Self {
        MassBracket { lo: m, hi: m, flagged: false }
    }

    pub fn estimate(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, m: f64, slack: f64) -> bool {
        self.lo - slack <= m && m <= self.hi + slack
    }
}

pub(crate) fn mc_sample_count(tol: f64) -> usize {
    let n = (2.25 / (tol * tol)).ceil();
    n.clamp(2000.0, 400_000.0) as usize
}

/// Monte Carlo estimate of `scale · P(region)` for draws from `draw`, with a
/// three-sigma Wilson bracket.
pub(crate) fn mc_bracket(
    region: &Region,
    n: usize,
    scale: f64,
    mut draw: impl FnMut(&mut crate::Rng) -> Vec<f64>,
) -> MassBracket {
    let mut rng = crate::stream_rng(region.fingerprint(), 7);
    let hits = (0..n).filter(|_| region.contains(&draw(&mut rng))).count();
    let (_, lo, hi) = wilson(hits, n, 3.0);
    MassBracket { lo: lo * scale, hi: hi * scale, flagged: false }
}

pub trait MeasureOracle: Send + Sync {
    fn dim(&self) -> usize;

    fn total_mass(&self) -> f64;

    /// Whether sup-ball masses are computed exactly (up to float rounding).
    fn is_exact(&self) -> bool;

    fn support_descriptor(&self) -> String;

    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64>;

    /// Exact rational sample where the construction allows it.
    fn sample_exact(&self, _rng: &mut dyn RngCore) -> Option<Vec<Q>> {
        None
    }

    /// Axis-aligned box containing the support.
    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>);

    /// Bracketed mass of `region`; the default is Monte Carlo over `sample`.
    fn region_mass(&self, region: &Region, tol: f64) -> MassBracket {
        let n = mc_sample_count(tol / self.total_mass().max(1e-300));
        mc_bracket(region, n, self.total_mass(), |rng| self.sample(rng))
    }

    fn ball_mass(&self, ball: &Ball<f64>, tol: f64) -> MassBracket {
        self.region_mass(&Region::ball(ball), tol)
    }

    /// Up to `n` samples conditioned on `ball`, using at most `budget` draws.
    fn sample_in_ball(&self, ball: &Ball<f64>, n: usize, rng: &mut dyn RngCore, budget: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for _ in 0..budget {
            if out.len() >= n {
                break;
            }
            let y = self.sample(rng);
            if ball.contains(&y) {
                out.push(y);
            }
        }
        out
    }
}

pub(crate) fn uniform_in_box(lo: &[f64], hi: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
    lo.iter().zip(hi).map(|(a, b)| a + (b - a) * rng.gen::<f64>()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classify_boxes() {
        let ball = Ball::new(vec![0.5, 0.5], 0.25, Norm::Sup).unwrap();
        let r = Region::ball(&ball);
        assert_eq!(classify_box(&[0.3, 0.3], &[0.7, 0.7], &r), Side::Inside);
        assert_eq!(classify_box(&[0.0, 0.0], &[0.2, 0.2], &r), Side::Outside);
        assert_eq!(classify_box(&[0.0, 0.0], &[0.5, 0.5], &r), Side::Straddle);
        let plane = Hyperplane::new(vec![1.0, 0.0], 0.5).unwrap();
        let s = Region::slab_in_ball(&ball, &plane, 0.05);
        assert_eq!(classify_box(&[0.3, 0.3], &[0.4, 0.4], &s), Side::Outside);
        assert_eq!(classify_box(&[0.46, 0.3], &[0.54, 0.4], &s), Side::Inside);
    }

    #[test]
    fn fingerprint_is_stable() {
        let ball = Ball::new(vec![0.5], 0.25, Norm::Sup).unwrap();
        assert_eq!(Region::ball(&ball).fingerprint(), Region::ball(&ball).fingerprint());
        let other = Ball::new(vec![0.5], 0.26, Norm::Sup).unwrap();
        assert_ne!(Region::ball(&ball).fingerprint(), Region::ball(&other).fingerprint());
    }
}
