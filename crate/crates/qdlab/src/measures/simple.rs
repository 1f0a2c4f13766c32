use rand::{Rng as _, RngCore};

use super::{MassBracket, MeasureOracle, Region};
use crate::error::{check_dim, Error, Result};
use crate::geometry::Norm;
use crate::rational::{pow2, to_f64, Q};

/// Atom of mass `mass` at `point`.
#[derive(Clone, Debug)]
pub struct PointMass {
    point: Vec<Q>,
    pointf: Vec<f64>,
    mass: f64,
}

impl PointMass {
    pub fn new(point: Vec<Q>, mass: f64) -> Result<Self> {
        if point.is_empty() || mass <= 0.0 {
            return Err(Error::invalid("point mass needs a point and positive mass"));
        }
        let pointf = point.iter().map(to_f64).collect();
        Ok(PointMass { point, pointf, mass })
    }
}

impl MeasureOracle for PointMass {
    fn dim(&self) -> usize {
        self.point.len()
    }

    fn total_mass(&self) -> f64 {
        self.mass
    }

    fn is_exact(&self) -> bool {
        true
    }

    fn support_descriptor(&self) -> String {
        let p: Vec<String> = self.point.iter().map(crate::rational::fmt_q).collect();
        format!("point mass {} at ({})", self.mass, p.join(", "))
    }

    fn sample(&self, _rng: &mut dyn RngCore) -> Vec<f64> {
        self.pointf.clone()
    }

    fn sample_exact(&self, _rng: &mut dyn RngCore) -> Option<Vec<Q>> {
        Some(self.point.clone())
    }

    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        (self.pointf.clone(), self.pointf.clone())
    }

    fn region_mass(&self, region: &Region, _tol: f64) -> MassBracket {
        MassBracket::exact(if region.contains(&self.pointf) { self.mass } else { 0.0 })
    }
}

/// Normalized length measure on the segment `[a, b]`.
#[derive(Clone, Debug)]
pub struct UniformSegment {
    a: Vec<Q>,
    b: Vec<Q>,
    af: Vec<f64>,
    df: Vec<f64>,
}

impl UniformSegment {
    pub fn new(a: Vec<Q>, b: Vec<Q>) -> Result<Self> {
        check_dim(a.len(), b.len())?;
        if a.is_empty() || a == b {
            return Err(Error::invalid("segment endpoints must differ"));
        }
        let af: Vec<f64> = a.iter().map(to_f64).collect();
        let df = a.iter().zip(&b).map(|(x, y)| to_f64(&(y - x))).collect();
        Ok(UniformSegment { a, b, af, df })
    }

    /// Parameter interval `{s ∈ [0,1] : a + s(b − a) ∈ region}`, which is convex.
    fn param_interval(&self, region: &Region) -> (f64, f64) {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let linear = |p: f64, q: f64, lo_v: f64, hi_v: f64, lo: &mut f64, hi: &mut f64| {
            // lo_v ≤ p + s q ≤ hi_v
            if q == 0.0 {
                if p < lo_v || p > hi_v {
                    *hi = -1.0;
                }
            } else {
                let (s0, s1) = ((lo_v - p) / q, (hi_v - p) / q);
                *lo = lo.max(s0.min(s1));
                *hi = hi.min(s0.max(s1));
            }
        };
        let ball = &region.ball;
        match ball.norm {
            Norm::Sup => {
                for i in 0..self.af.len() {
                    let c = ball.center[i];
                    linear(self.af[i], self.df[i], c - ball.radius, c + ball.radius, &mut lo, &mut hi);
                }
            }
            Norm::Euclidean => {
                let w: Vec<f64> = self.af.iter().zip(&ball.center).map(|(x, c)| x - c).collect();
                let qa: f64 = self.df.iter().map(|x| x * x).sum();
                let qb: f64 = 2.0 * w.iter().zip(&self.df).map(|(x, y)| x * y).sum::<f64>();
                let qc: f64 = w.iter().map(|x| x * x).sum::<f64>() - ball.radius * ball.radius;
                let disc = qb * qb - 4.0 * qa * qc;
                if disc < 0.0 {
                    return (0.0, 0.0);
                }
                let r = disc.sqrt();
                lo = lo.max((-qb - r) / (2.0 * qa));
                hi = hi.min((-qb + r) / (2.0 * qa));
            }
        }
        if let Some(slab) = &region.slab {
            let (va, vc) = slab.value_range();
            let p: f64 = slab.plane.normal.iter().zip(&self.af).map(|(n, x)| n * x).sum();
            let q: f64 = slab.plane.normal.iter().zip(&self.df).map(|(n, x)| n * x).sum();
            linear(p, q, va, vc, &mut lo, &mut hi);
        }
        (lo, hi)
    }
}

impl MeasureOracle for UniformSegment {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn total_mass(&self) -> f64 {
        1.0
    }

    fn is_exact(&self) -> bool {
        true
    }

    fn support_descriptor(&self) -> String {
        let f = |v: &[Q]| v.iter().map(crate::rational::fmt_q).collect::<Vec<_>>().join(", ");
        format!("uniform measure on the segment ({}) -- ({})", f(&self.a), f(&self.b))
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let s: f64 = rng.gen();
        self.af.iter().zip(&self.df).map(|(a, d)| a + s * d).collect()
    }

    fn sample_exact(&self, rng: &mut dyn RngCore) -> Option<Vec<Q>> {
        let s = Q::from_integer((rng.next_u64() >> 11).into()) * pow2(-53);
        Some(self.a.iter().zip(&self.b).map(|(a, b)| a + &s * (b - a)).collect())
    }

    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        self.af
            .iter()
            .zip(&self.df)
            .map(|(a, d)| (a.min(a + d), a.max(a + d)))
            .unzip()
    }

    fn region_mass(&self, region: &Region, _tol: f64) -> MassBracket {
        let (lo, hi) = self.param_interval(region);
        MassBracket::exact((hi - lo).max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Ball, Hyperplane};
    use crate::rational::{qi, qr};

    #[test]
    fn segment_masses() {
        let s = UniformSegment::new(vec![qi(0), qi(0)], vec![qi(1), qi(0)]).unwrap();
        let b = Ball::new(vec![0.5, 0.0], 0.25, Norm::Euclidean).unwrap();
        assert!((s.ball_mass(&b, 1e-6).lo - 0.5).abs() < 1e-12);
        let b = Ball::new(vec![0.5, 0.2], 0.25, Norm::Sup).unwrap();
        assert!((s.ball_mass(&b, 1e-6).lo - 0.5).abs() < 1e-12);
        let l = Hyperplane::new(vec![0.0, 1.0], 0.0).unwrap();
        let r = Region::slab_in_ball(&b, &l, 0.0);
        assert!((s.region_mass(&r, 1e-6).lo - 0.5).abs() < 1e-12);
        let l = Hyperplane::new(vec![1.0, 0.0], 0.5).unwrap();
        let r = Region::slab_in_ball(&b, &l, 0.1);
        assert!((s.region_mass(&r, 1e-6).lo - 0.2).abs() < 1e-12);
    }

    #[test]
    fn point_mass() {
        let p = PointMass::new(vec![qr(1, 2)], 1.0).unwrap();
        let b = Ball::new(vec![0.4], 0.1, Norm::Sup).unwrap();
        assert_eq!(p.ball_mass(&b, 0.1).lo, 1.0);
        let b = Ball::new(vec![0.3], 0.1, Norm::Sup).unwrap();
        assert_eq!(p.ball_mass(&b, 0.1).hi, 0.0);
    }
}
