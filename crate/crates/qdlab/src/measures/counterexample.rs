use std::collections::VecDeque;

use num_traits::{One, Zero};
use rand::{Rng as _, RngCore};
use serde::Serialize;

use super::{MassBracket, MeasureOracle, Region};
use crate::error::{Error, Result};
use crate::rational::{pow2, q_from_f64, qi, to_f64, Q};

/// Largest truncation level; `1/b_n = 2^{-2^n}` needs `2^n` bits.
pub const MAX_LEVEL: u32 = 16;

/// The first `n` rationals of `[0,1]` in Stern-Brocot breadth-first order:
/// `0, 1, 1/2, 1/3, 2/3, 1/4, 2/5, 3/5, 3/4, …`.
pub fn stern_brocot(n: usize) -> Vec<Q> {
    let mut out: Vec<Q> = [qi(0), qi(1)].into_iter().take(n).collect();
    let mut queue = VecDeque::from([((0i64, 1i64), (1i64, 1i64))]);
    while out.len() < n {
        let ((a, b), (c, d)) = queue.pop_front().unwrap();
        let m = (a + c, b + d);
        out.push(Q::new(m.0.into(), m.1.into()));
        queue.push_back(((a, b), m));
        queue.push_back((m, (c, d)));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Spike {
    pub n: u32,
    #[serde(with = "crate::rational::serde_q")]
    pub center: Q,
    /// `1/b_n`.
    #[serde(with = "crate::rational::serde_q")]
    pub half_width: Q,
    /// `a_n b_n`.
    #[serde(with = "crate::rational::serde_q")]
    pub height: Q,
}

/// Density `1 + Σ_{n ≤ n_max} a_n b_n 1_{B(q_n, 1/b_n)}` on `[0,1]`,
/// `a_n = 2^{-n}`, `b_n = 2^{2^n}`.
#[derive(Clone, Debug)]
pub struct Counterexample {
    spikes: Vec<Spike>,
    total: Q,
    total_f: f64,
    clipped: Vec<f64>,
}

impl Counterexample {
    pub fn new(n_max: u32) -> Result<Self> {
        if n_max > MAX_LEVEL {
            return Err(Error::Budget(format!(
                "n_max = {n_max} needs 1/b_n = 2^-(2^{n_max}); the limit is {MAX_LEVEL}"
            )));
        }
        let qs = stern_brocot(n_max as usize);
        let spikes: Vec<Spike> = qs
            .into_iter()
            .enumerate()
            .map(|(i, q)| {
                let n = i as u32 + 1;
                let b_exp = 1i64 << n;
                Spike { n, center: q, half_width: pow2(-b_exp), height: pow2(b_exp - n as i64) }
            })
            .collect();
        let mut me = Counterexample { spikes, total: Q::zero(), total_f: 0.0, clipped: Vec::new() };
        me.total = me.interval_mass(&Q::zero(), &Q::one());
        me.total_f = to_f64(&me.total);
        me.clipped = me
            .spikes
            .iter()
            .map(|s| to_f64(&(clip_len(s, &Q::zero(), &Q::one()) * &s.height)))
            .collect();
        Ok(me)
    }

    pub fn spikes(&self) -> &[Spike] {
        &self.spikes
    }

    pub fn total_exact(&self) -> &Q {
        &self.total
    }

    /// Exact mass of `[lo, hi] ∩ [0,1]`.
    pub fn interval_mass(&self, lo: &Q, hi: &Q) -> Q {
        let a = lo.max(&Q::zero()).clone();
        let b = hi.min(&Q::one()).clone();
        if a >= b {
            return Q::zero();
        }
        let mut m = &b - &a;
        for s in &self.spikes {
            m += clip_len(s, &a, &b) * &s.height;
        }
        m
    }
}

fn clip_len(s: &Spike, a: &Q, b: &Q) -> Q {
    let lo = (&s.center - &s.half_width).max(a.clone());
    let hi = (&s.center + &s.half_width).min(b.clone());
    if hi > lo {
        hi - lo
    } else {
        Q::zero()
    }
}

impl MeasureOracle for Counterexample {
    fn dim(&self) -> usize {
        1
    }

    fn total_mass(&self) -> f64 {
        self.total_f
    }

    fn is_exact(&self) -> bool {
        true
    }

    fn support_descriptor(&self) -> String {
        format!("(1 + f) Lebesgue on [0,1] with {} spikes", self.spikes.len())
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let mut u = rng.gen::<f64>() * self.total_f;
        if u < 1.0 || self.spikes.is_empty() {
            return vec![rng.gen::<f64>()];
        }
        u -= 1.0;
        let mut k = self.spikes.len() - 1;
        for (i, m) in self.clipped.iter().enumerate() {
            if u < *m {
                k = i;
                break;
            }
            u -= m;
        }
        let s = &self.spikes[k];
        let lo = to_f64(&(&s.center - &s.half_width)).max(0.0);
        let hi = to_f64(&(&s.center + &s.half_width)).min(1.0);
        vec![lo + (hi - lo) * rng.gen::<f64>()]
    }

    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0], vec![1.0])
    }

    fn region_mass(&self, region: &Region, _tol: f64) -> MassBracket {
        let b = &region.ball;
        let (mut lo, mut hi) = (b.center[0] - b.radius, b.center[0] + b.radius);
        if let Some(slab) = &region.slab {
            let n = slab.plane.normal[0];
            let (a, c) = slab.value_range();
            lo = lo.max((a / n).min(c / n));
            hi = hi.min((a / n).max(c / n));
        }
        if lo > hi {
            return MassBracket::exact(0.0);
        }
        MassBracket::exact(to_f64(&self.interval_mass(&q_from_f64(lo), &q_from_f64(hi))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Ball, Norm};
    use crate::rational::qr;

    #[test]
    fn enumeration_order() {
        let q = stern_brocot(9);
        let expect = [qi(0), qi(1), qr(1, 2), qr(1, 3), qr(2, 3), qr(1, 4), qr(2, 5), qr(3, 5), qr(3, 4)];
        assert_eq!(q, expect);
    }

    #[test]
    fn masses() {
        let c = Counterexample::new(1).unwrap();
        // spike at 0 of height 2 and half-width 1/4, clipped to [0, 1/4]
        assert_eq!(c.total_exact(), &qr(3, 2));
        assert!(c.total_exact() <= &qi(2));
        let plain = Counterexample::new(0).unwrap();
        assert_eq!(plain.total_exact(), &qi(1));
        let c3 = Counterexample::new(3).unwrap();
        let s = &c3.spikes()[2];
        let m = c3.interval_mass(&(&s.center - &s.half_width), &(&s.center + &s.half_width));
        assert!(m >= qr(1, 4));
        let b = Ball::new(vec![0.5], 2.0, Norm::Euclidean).unwrap();
        assert!((c3.ball_mass(&b, 0.0).lo - to_f64(c3.total_exact())).abs() < 1e-12);
        assert!(Counterexample::new(MAX_LEVEL + 1).is_err());
    }
}
