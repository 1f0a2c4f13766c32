use rand::RngCore;

use super::{MeasureOracle, Region, MassBracket};
use crate::error::{check_dim, Error, Result};
use crate::poly::Poly;
use crate::rational::Q;

/// Image of a measure under a polynomial map.
pub struct Pushforward {
    base: Box<dyn MeasureOracle>,
    components: Vec<Poly>,
}

impl Pushforward {
    pub fn new(base: Box<dyn MeasureOracle>, components: Vec<Poly>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("map needs at least one component"));
        }
        for c in &components {
            check_dim(base.dim(), c.nvars)?;
        }
        Ok(Pushforward { base, components })
    }

    pub fn map(&self, x: &[f64]) -> Vec<f64> {
        self.components.iter().map(|p| p.eval(x)).collect()
    }
}

/// `x ↦ (x, x², …, x^degree)` pushed from Lebesgue on `[0,1]`.
pub fn moment_curve(degree: u32) -> Result<Pushforward> {
    if degree == 0 {
        return Err(Error::invalid("degree must be at least 1"));
    }
    let comps = (1..=degree).map(|k| Poly::monomial(1, 0, k)).collect();
    Pushforward::new(Box::new(super::LebesgueCube::new(1)?), comps)
}

impl MeasureOracle for Pushforward {
    fn dim(&self) -> usize {
        self.components.len()
    }

    fn total_mass(&self) -> f64 {
        self.base.total_mass()
    }

    fn is_exact(&self) -> bool {
        false
    }

    fn support_descriptor(&self) -> String {
        format!(
            "polynomial image in R^{} of {}",
            self.components.len(),
            self.base.support_descriptor()
        )
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.map(&self.base.sample(rng))
    }

    fn sample_exact(&self, rng: &mut dyn RngCore) -> Option<Vec<Q>> {
        let x = self.base.sample_exact(rng)?;
        Some(self.components.iter().map(|p| p.eval_exact(&x)).collect())
    }

    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let (lo, hi) = self.base.bounding_box();
        self.components.iter().map(|p| p.range_on_box(&lo, &hi)).unzip()
    }

    fn region_mass(&self, region: &Region, tol: f64) -> MassBracket {
        let n = super::mc_sample_count(tol / self.total_mass());
        super::mc_bracket(region, n, self.total_mass(), |rng| self.sample(rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Ball, Norm};
    use crate::Rng;
    use rand::SeedableRng;

    #[test]
    fn parabola_mass_and_exact_samples() {
        let c = moment_curve(2).unwrap();
        let b = Ball::new(vec![0.0, 0.0], 0.25, Norm::Sup).unwrap();
        let m = c.ball_mass(&b, 0.005);
        assert!(m.contains(0.25, 0.0));
        let mut rng = Rng::seed_from_u64(1);
        for _ in 0..20 {
            let y = c.sample_exact(&mut rng).unwrap();
            assert_eq!(&y[0] * &y[0], y[1]);
        }
        let (lo, hi) = c.bounding_box();
        assert_eq!(lo, vec![0.0, 0.0]);
        assert_eq!(hi, vec![1.0, 1.0]);
    }
}
