use rand::RngCore;

use super::{MassBracket, MeasureOracle, Region};
use crate::error::{Error, Result};
use crate::geometry::{Ball, Norm};
use crate::rational::Q;

/// Product of probability measures; coordinates are concatenated.
pub struct Product {
    factors: Vec<Box<dyn MeasureOracle>>,
}

impl Product {
    pub fn new(factors: Vec<Box<dyn MeasureOracle>>) -> Result<Self> {
        if factors.len() < 2 {
            return Err(Error::invalid("a product needs at least two factors"));
        }
        for f in &factors {
            if (f.total_mass() - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!(
                    "product factors must be probability measures; `{}` has mass {}",
                    f.support_descriptor(),
                    f.total_mass()
                )));
            }
        }
        Ok(Product { factors })
    }

    fn split<'a>(&self, y: &'a [f64]) -> Vec<&'a [f64]> {
        let mut out = Vec::new();
        let mut at = 0;
        for f in &self.factors {
            out.push(&y[at..at + f.dim()]);
            at += f.dim();
        }
        out
    }
}

impl MeasureOracle for Product {
    fn dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim()).sum()
    }

    fn total_mass(&self) -> f64 {
        1.0
    }

    fn is_exact(&self) -> bool {
        self.factors.iter().all(|f| f.is_exact())
    }

    fn support_descriptor(&self) -> String {
        let parts: Vec<String> = self.factors.iter().map(|f| f.support_descriptor()).collect();
        format!("product of [{}]", parts.join("] x ["))
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.factors.iter().flat_map(|f| f.sample(rng)).collect()
    }

    fn sample_exact(&self, rng: &mut dyn RngCore) -> Option<Vec<Q>> {
        let mut out = Vec::new();
        for f in &self.factors {
            out.extend(f.sample_exact(rng)?);
        }
        Some(out)
    }

    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for f in &self.factors {
            let (a, b) = f.bounding_box();
            lo.extend(a);
            hi.extend(b);
        }
        (lo, hi)
    }

    fn region_mass(&self, region: &Region, tol: f64) -> MassBracket {
        if region.ball.norm != Norm::Sup || region.slab.is_some() {
            let n = super::mc_sample_count(tol);
            return super::mc_bracket(region, n, 1.0, |rng| self.sample(rng));
        }
        let parts = self.split(&region.ball.center);
        let k = self.factors.len() as f64;
        let (mut lo, mut hi, mut flagged) = (1.0, 1.0, false);
        for (f, c) in self.factors.iter().zip(parts) {
            let b = Ball { center: c.to_vec(), radius: region.ball.radius, norm: Norm::Sup };
            let m = f.ball_mass(&b, tol / k);
            lo *= m.lo;
            hi *= m.hi;
            flagged |= m.flagged;
        }
        MassBracket { lo, hi, flagged }
    }

    fn sample_in_ball(&self, ball: &Ball<f64>, n: usize, rng: &mut dyn RngCore, budget: usize) -> Vec<Vec<f64>> {
        if ball.norm != Norm::Sup {
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
            return out;
        }
        // sup balls are products of marginal balls: condition each factor separately
        let parts = self.split(&ball.center);
        let mut cols: Vec<Vec<Vec<f64>>> = Vec::new();
        for (f, c) in self.factors.iter().zip(parts) {
            let b = Ball { center: c.to_vec(), radius: ball.radius, norm: Norm::Sup };
            cols.push(f.sample_in_ball(&b, n, rng, budget));
        }
        let m = cols.iter().map(|c| c.len()).min().unwrap_or(0);
        (0..m).map(|i| cols.iter().flat_map(|c| c[i].clone()).collect()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{cantor_middle_thirds, Counterexample, LebesgueCube};

    #[test]
    fn product_masses() {
        let p = Product::new(vec![
            Box::new(LebesgueCube::new(1).unwrap()),
            Box::new(LebesgueCube::new(1).unwrap()),
        ])
        .unwrap();
        let b = Ball::new(vec![0.5, 0.5], 0.25, Norm::Sup).unwrap();
        assert!(p.ball_mass(&b, 1e-6).contains(0.25, 1e-12));
        let c = Product::new(vec![Box::new(cantor_middle_thirds()), Box::new(cantor_middle_thirds())]).unwrap();
        let b = Ball::new(vec![1.0 / 6.0, 1.0 / 6.0], 1.0 / 6.0, Norm::Sup).unwrap();
        assert!(c.ball_mass(&b, 1e-9).contains(0.25, 1e-8));
    }

    #[test]
    fn rejects_unnormalized_factor() {
        let r = Product::new(vec![
            Box::new(LebesgueCube::new(1).unwrap()),
            Box::new(Counterexample::new(2).unwrap()),
        ]);
        assert!(r.is_err());
    }
}
