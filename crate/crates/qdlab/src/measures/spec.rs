use serde::{Deserialize, Serialize};

use super::{
    cantor_dust, cantor_middle_thirds, Counterexample, IfsSpec, LebesgueCube, MeasureOracle, PointMass,
    Product, Pushforward, SelfSimilar, UniformSegment,
};
use crate::error::{Error, Result};
use crate::poly::{Poly, TermSpec};
use crate::rational::{parse_q, to_f64};

fn one() -> String {
    "1".into()
}

/// JSON description of a measure. Numbers are exact decimal strings.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    Lebesgue { d: usize },
    SelfSimilar(IfsSpec),
    CantorMiddleThirds,
    CantorDust { d: usize },
    Product { factors: Vec<MeasureSpec> },
    Pushforward { base: Box<MeasureSpec>, components: Vec<Vec<TermSpec>> },
    Counterexample { n_max: u32 },
    PointMass {
        point: Vec<String>,
        #[serde(default = "one")]
        mass: String,
    },
    Segment { a: Vec<String>, b: Vec<String> },
}

impl MeasureSpec {
    pub fn build(&self) -> Result<Box<dyn MeasureOracle>> {
        Ok(match self {
            MeasureSpec::Lebesgue { d } => Box::new(LebesgueCube::new(*d)?),
            MeasureSpec::SelfSimilar(s) => Box::new(SelfSimilar::new(s)?),
            MeasureSpec::CantorMiddleThirds => Box::new(cantor_middle_thirds()),
            MeasureSpec::CantorDust { d } => Box::new(cantor_dust(*d)?),
            MeasureSpec::Product { factors } => {
                Box::new(Product::new(factors.iter().map(|f| f.build()).collect::<Result<_>>()?)?)
            }
            MeasureSpec::Pushforward { base, components } => {
                let b = base.build()?;
                let polys = components
                    .iter()
                    .map(|c| Poly::from_spec(b.dim(), c))
                    .collect::<Result<Vec<_>>>()?;
                Box::new(Pushforward::new(b, polys)?)
            }
            MeasureSpec::Counterexample { n_max } => Box::new(Counterexample::new(*n_max)?),
            MeasureSpec::PointMass { point, mass } => {
                let p = point.iter().map(|s| parse_q(s)).collect::<Result<Vec<_>>>()?;
                Box::new(PointMass::new(p, to_f64(&parse_q(mass)?))?)
            }
            MeasureSpec::Segment { a, b } => {
                let a = a.iter().map(|s| parse_q(s)).collect::<Result<Vec<_>>>()?;
                let b = b.iter().map(|s| parse_q(s)).collect::<Result<Vec<_>>>()?;
                Box::new(UniformSegment::new(a, b)?)
            }
        })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::invalid(format!("measure spec: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Ball, Norm};

    #[test]
    fn round_trip_and_build() {
        let s = MeasureSpec::from_json(
            r#"{"kind":"product","factors":[{"kind":"cantor_middle_thirds"},{"kind":"lebesgue","d":1}]}"#,
        )
        .unwrap();
        let back = MeasureSpec::from_json(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(s, back);
        let m = s.build().unwrap();
        assert_eq!(m.dim(), 2);
        let p = MeasureSpec::from_json(
            r#"{"kind":"pushforward","base":{"kind":"lebesgue","d":1},
                "components":[[{"coeff":"1","exp":[1]}],[{"coeff":"1","exp":[2]}]]}"#,
        )
        .unwrap()
        .build()
        .unwrap();
        let b = Ball::new(vec![0.0, 0.0], 0.25, Norm::Sup).unwrap();
        assert!(p.ball_mass(&b, 0.005).contains(0.25, 0.0));
        assert!(MeasureSpec::from_json(r#"{"kind":"lebesgue","d":1,"extra":2}"#).is_err());
        assert!(MeasureSpec::from_json(r#"{"kind":"point_mass","point":["1/3"]}"#).unwrap().build().is_ok());
    }
}
