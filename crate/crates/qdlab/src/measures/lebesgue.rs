use rand::RngCore;

use super::{mc_bracket, mc_sample_count, uniform_in_box, MassBracket, MeasureOracle, Region, Slab};
use crate::error::{Error, Result};
use crate::geometry::{Ball, Norm};
use crate::rational::{pow2, Q};

/// Lebesgue measure on `[0,1]^d`.
#[derive(Clone, Debug)]
pub struct LebesgueCube {
    d: usize,
}

impl LebesgueCube {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        Ok(LebesgueCube { d })
    }

    /// Intersection of the ball's bounding box with the cube; `None` if empty.
    fn clipped_box(&self, region: &Region) -> Option<(Vec<f64>, Vec<f64>)> {
        let (lo, hi) = region.bbox();
        let lo: Vec<f64> = lo.iter().map(|x| x.max(0.0)).collect();
        let hi: Vec<f64> = hi.iter().map(|x| x.min(1.0)).collect();
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            None
        } else {
            Some((lo, hi))
        }
    }

    fn mc_in_box(&self, region: &Region, lo: &[f64], hi: &[f64], tol: f64) -> MassBracket {
        let vol: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
        if vol == 0.0 {
            return MassBracket::exact(0.0);
        }
        let n = mc_sample_count(tol / vol);
        mc_bracket(region, n, vol, |rng| uniform_in_box(lo, hi, rng))
    }
}

fn ball_volume(d: usize, r: f64) -> f64 {
    let mut v = [1.0, 2.0 * r];
    if d < 2 {
        return v[d];
    }
    let mut k = 2;
    while k <= d {
        let next = v[k % 2] * 2.0 * std::f64::consts::PI / k as f64 * r * r;
        v[k % 2] = next;
        k += 1;
    }
    v[d % 2]
}

/// Area of the rectangle `[lo, hi]` intersected with `a ≤ n·y ≤ c`.
fn rect_slab_area(lo: &[f64], hi: &[f64], slab: &Slab) -> f64 {
    let mut poly = vec![
        [lo[0], lo[1]],
        [hi[0], lo[1]],
        [hi[0], hi[1]],
        [lo[0], hi[1]],
    ];
    let n = [slab.plane.normal[0], slab.plane.normal[1]];
    let (a, c) = slab.value_range();
    // keep n·p ≥ a, then −n·p ≥ −c
    poly = clip(&poly, n, a);
    poly = clip(&poly, [-n[0], -n[1]], -c);
    shoelace(&poly)
}

fn clip(poly: &[[f64; 2]], n: [f64; 2], a: f64) -> Vec<[f64; 2]> {
    let val = |p: &[f64; 2]| n[0] * p[0] + n[1] * p[1] - a;
    let mut out = Vec::new();
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let (vp, vq) = (val(&p), val(&q));
        if vp >= 0.0 {
            out.push(p);
        }
        if (vp >= 0.0) != (vq >= 0.0) {
            let t = vp / (vp - vq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

fn shoelace(poly: &[[f64; 2]]) -> f64 {
    let mut s = 0.0;
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        s += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * s.abs()
}

impl MeasureOracle for LebesgueCube {
    fn dim(&self) -> usize {
        self.d
    }

    fn total_mass(&self) -> f64 {
        1.0
    }

    fn is_exact(&self) -> bool {
        true
    }

    fn support_descriptor(&self) -> String {
        format!("Lebesgue measure on [0,1]^{}", self.d)
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        uniform_in_box(&vec![0.0; self.d], &vec![1.0; self.d], rng)
    }

    fn sample_exact(&self, rng: &mut dyn RngCore) -> Option<Vec<Q>> {
        let scale = pow2(-53);
        Some(
            (0..self.d)
                .map(|_| Q::from_integer((rng.next_u64() >> 11).into()) * &scale)
                .collect(),
        )
    }

    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; self.d], vec![1.0; self.d])
    }

    fn region_mass(&self, region: &Region, tol: f64) -> MassBracket {
        let Some((lo, hi)) = self.clipped_box(region) else {
            return MassBracket::exact(0.0);
        };
        let interval_like = region.ball.norm == Norm::Sup || self.d == 1;
        if interval_like {
            match (&region.slab, self.d) {
                (None, _) => {
                    return MassBracket::exact(lo.iter().zip(&hi).map(|(a, b)| b - a).product());
                }
                (Some(slab), 1) => {
                    let n = slab.plane.normal[0];
                    let (a, c) = slab.value_range();
                    let (s0, s1) = (a / n, c / n);
                    let (s0, s1) = (s0.min(s1), s0.max(s1));
                    return MassBracket::exact((hi[0].min(s1) - lo[0].max(s0)).max(0.0));
                }
                (Some(slab), 2) => return MassBracket::exact(rect_slab_area(&lo, &hi, slab)),
                _ => return self.mc_in_box(region, &lo, &hi, tol),
            }
        }
        if region.slab.is_none() {
            let b = &region.ball;
            if b.center.iter().all(|&c| c - b.radius >= 0.0 && c + b.radius <= 1.0) {
                return MassBracket::exact(ball_volume(self.d, b.radius));
            }
            let corners_in = (0..1usize << self.d).all(|m| {
                let p: Vec<f64> = (0..self.d).map(|i| ((m >> i) & 1) as f64).collect();
                b.contains(&p)
            });
            if corners_in {
                return MassBracket::exact(1.0);
            }
        }
        self.mc_in_box(region, &lo, &hi, tol)
    }

    fn sample_in_ball(&self, ball: &Ball<f64>, n: usize, rng: &mut dyn RngCore, budget: usize) -> Vec<Vec<f64>> {
        let Some((lo, hi)) = self.clipped_box(&Region::ball(ball)) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for _ in 0..budget {
            if out.len() >= n {
                break;
            }
            let y = uniform_in_box(&lo, &hi, rng);
            if ball.contains(&y) {
                out.push(y);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Hyperplane;

    #[test]
    fn interval_and_box_masses() {
        let l1 = LebesgueCube::new(1).unwrap();
        let b = Ball::new(vec![0.5], 0.25, Norm::Euclidean).unwrap();
        assert_eq!(l1.ball_mass(&b, 1e-3).lo, 0.5);
        let b = Ball::new(vec![0.5], 2.0, Norm::Euclidean).unwrap();
        assert_eq!(l1.ball_mass(&b, 1e-3).hi, 1.0);
        let l2 = LebesgueCube::new(2).unwrap();
        let b = Ball::new(vec![0.0, 0.0], 0.5, Norm::Sup).unwrap();
        assert_eq!(l2.ball_mass(&b, 1e-3), MassBracket::exact(0.25));
    }

    #[test]
    fn slab_area_is_exact() {
        let l2 = LebesgueCube::new(2).unwrap();
        let b = Ball::new(vec![0.5, 0.5], 0.5, Norm::Sup).unwrap();
        let diag = Hyperplane::new(vec![1.0, -1.0], 0.0).unwrap();
        let w = 0.1;
        let m = l2.region_mass(&Region::slab_in_ball(&b, &diag, w), 1e-3);
        // band |x - y| ≤ w√2 in the unit square: 1 - (1 - w√2)^2
        let s = w * 2f64.sqrt();
        let expect = 1.0 - (1.0 - s) * (1.0 - s);
        assert!((m.lo - expect).abs() < 1e-12);
    }

    #[test]
    fn euclidean_disc_inside_cube() {
        let l2 = LebesgueCube::new(2).unwrap();
        let b = Ball::new(vec![0.5, 0.5], 0.25, Norm::Euclidean).unwrap();
        let m = l2.ball_mass(&b, 1e-3);
        assert!((m.lo - std::f64::consts::PI / 16.0).abs() < 1e-12);
        assert!((ball_volume(3, 1.0) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_brackets_exact_value() {
        let l2 = LebesgueCube::new(2).unwrap();
        let b = Ball::new(vec![0.0, 0.0], 0.5, Norm::Euclidean).unwrap();
        let m = l2.ball_mass(&b, 1e-3);
        assert!(m.contains(std::f64::consts::PI / 16.0, 0.0));
    }
}
