use std::collections::VecDeque;

use num_traits::{One, Signed, Zero};
use rand::{Rng as _, RngCore};
use serde::{Deserialize, Serialize};

use super::{classify_box, MassBracket, MeasureOracle, Region, Side};
use crate::error::{check_dim, Error, Result};
use crate::geometry::Ball;
use crate::rational::{parse_q, qr, to_f64, Q};

/// One similarity `x ↦ ratio · rotation · x + translation`, as exact decimal strings.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub ratio: String,
    pub translation: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<Vec<Vec<String>>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct IfsSpec {
    pub maps: Vec<MapSpec>,
    pub weights: Vec<String>,
}

#[derive(Clone, Debug)]
struct Sim {
    ratio: f64,
    rot: Option<Vec<Vec<f64>>>,
    trans: Vec<f64>,
    exact: Option<(Q, Vec<Q>)>,
}

impl Sim {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let rx = match &self.rot {
            Some(o) => o.iter().map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum()).collect(),
            None => x.to_vec(),
        };
        rx.iter().zip(&self.trans).map(|(v, t)| self.ratio * v + t).collect()
    }

    /// `self ∘ other`.
    fn compose(&self, other: &Sim) -> Sim {
        let rot = match (&self.rot, &other.rot) {
            (None, None) => None,
            (Some(a), None) => Some(a.clone()),
            (None, Some(b)) => Some(b.clone()),
            (Some(a), Some(b)) => Some(
                a.iter()
                    .map(|r| (0..b[0].len()).map(|j| r.iter().zip(b).map(|(x, br)| x * br[j]).sum()).collect())
                    .collect(),
            ),
        };
        let trans = self.apply(&other.trans);
        Sim { ratio: self.ratio * other.ratio, rot, trans, exact: None }
    }

    /// Bounding box of the image of the box `[lo, hi]`.
    fn image_box(&self, lo: &[f64], hi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        if self.rot.is_none() {
            return (self.apply(lo), self.apply(hi));
        }
        let d = lo.len();
        let mut a = vec![f64::INFINITY; d];
        let mut b = vec![f64::NEG_INFINITY; d];
        for m in 0..1usize << d {
            let c: Vec<f64> = (0..d).map(|i| if (m >> i) & 1 == 1 { hi[i] } else { lo[i] }).collect();
            let y = self.apply(&c);
            for i in 0..d {
                a[i] = a[i].min(y[i]);
                b[i] = b[i].max(y[i]);
            }
        }
        (a, b)
    }
}

#[derive(Clone, Debug)]
struct Cylinder {
    map: Sim,
    lo: Vec<f64>,
    hi: Vec<f64>,
    mass: f64,
    depth: u32,
}

/// Self-similar measure of an iterated function system of similarities.
#[derive(Clone, Debug)]
pub struct SelfSimilar {
    d: usize,
    maps: Vec<Sim>,
    weights: Vec<f64>,
    weights_exact: Vec<Q>,
    cumulative: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    anchor: Vec<f64>,
    anchor_exact: Option<Vec<Q>>,
    strongly_separated: bool,
    label: String,
}

const MAX_DEPTH: u32 = 64;
const NODE_BUDGET: usize = 4_000_000;

impl SelfSimilar {
    pub fn new(spec: &IfsSpec) -> Result<Self> {
        if spec.maps.is_empty() || spec.maps.len() != spec.weights.len() {
            return Err(Error::invalid("need one weight per map and at least one map"));
        }
        let d = spec.maps[0].translation.len();
        if d == 0 {
            return Err(Error::invalid("maps need dimension at least 1"));
        }
        let weights_exact = spec.weights.iter().map(|w| parse_q(w)).collect::<Result<Vec<_>>>()?;
        if weights_exact.iter().any(|w| !w.is_positive()) {
            return Err(Error::invalid("weights must be positive"));
        }
        if weights_exact.iter().fold(Q::zero(), |a, w| a + w) != Q::one() {
            return Err(Error::invalid("weights must sum to 1"));
        }
        let mut maps = Vec::new();
        for m in &spec.maps {
            check_dim(d, m.translation.len())?;
            let r = parse_q(&m.ratio)?;
            if !r.is_positive() || r >= Q::one() {
                return Err(Error::invalid("contraction ratios must lie in (0,1)"));
            }
            let t = m.translation.iter().map(|s| parse_q(s)).collect::<Result<Vec<_>>>()?;
            let rot = match &m.rotation {
                None => None,
                Some(rows) => {
                    check_dim(d, rows.len())?;
                    let mut o = Vec::new();
                    for row in rows {
                        check_dim(d, row.len())?;
                        o.push(row.iter().map(|s| parse_q(s).map(|q| to_f64(&q))).collect::<Result<Vec<f64>>>()?);
                    }
                    for i in 0..d {
                        for j in 0..d {
                            let g: f64 = (0..d).map(|k| o[k][i] * o[k][j]).sum();
                            if (g - if i == j { 1.0 } else { 0.0 }).abs() > 1e-9 {
                                return Err(Error::invalid("rotation part must be orthogonal"));
                            }
                        }
                    }
                    Some(o)
                }
            };
            let exact = if rot.is_none() { Some((r.clone(), t.clone())) } else { None };
            maps.push(Sim { ratio: to_f64(&r), rot, trans: t.iter().map(to_f64).collect(), exact });
        }
        let weights: Vec<f64> = weights_exact.iter().map(to_f64).collect();
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cumulative.push(acc);
        }
        // fixed point of the first map
        let mut anchor = maps[0].trans.clone();
        for _ in 0..2000 {
            anchor = maps[0].apply(&anchor);
        }
        let anchor_exact = maps[0].exact.as_ref().map(|(r, t)| {
            let k = (Q::one() - r).recip();
            t.iter().map(|x| x * &k).collect::<Vec<Q>>()
        });
        if let Some(a) = &anchor_exact {
            anchor = a.iter().map(to_f64).collect();
        }
        // invariant ball around the anchor, then shrink its box by iterating hulls
        let mut radius: f64 = 0.0;
        for m in &maps {
            let y = m.apply(&anchor);
            let dist = y.iter().zip(&anchor).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            radius = radius.max(dist / (1.0 - m.ratio));
        }
        radius *= 1.0 + 1e-12;
        let mut lo: Vec<f64> = anchor.iter().map(|a| a - radius).collect();
        let mut hi: Vec<f64> = anchor.iter().map(|a| a + radius).collect();
        for _ in 0..60 {
            let mut nl = vec![f64::INFINITY; d];
            let mut nh = vec![f64::NEG_INFINITY; d];
            for m in &maps {
                let (a, b) = m.image_box(&lo, &hi);
                for i in 0..d {
                    nl[i] = nl[i].min(a[i]);
                    nh[i] = nh[i].max(b[i]);
                }
            }
            lo = nl;
            hi = nh;
        }
        // absorb rounding from the iteration
        let pad = 1e-12 * hi.iter().zip(&lo).map(|(a, b)| a - b).fold(1.0, f64::max);
        lo.iter_mut().for_each(|x| *x -= pad);
        hi.iter_mut().for_each(|x| *x += pad);
        let boxes: Vec<(Vec<f64>, Vec<f64>)> = maps.iter().map(|m| m.image_box(&lo, &hi)).collect();
        let mut strongly_separated = true;
        for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                let overlap = (0..d).all(|k| boxes[i].0[k] <= boxes[j].1[k] && boxes[j].0[k] <= boxes[i].1[k]);
                if overlap {
                    strongly_separated = false;
                }
            }
        }
        Ok(SelfSimilar {
            d,
            maps,
            weights,
            weights_exact,
            cumulative,
            lo,
            hi,
            anchor,
            anchor_exact,
            strongly_separated,
            label: format!("self-similar measure in R^{d}"),
        })
    }

    fn with_label(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }

    pub fn strongly_separated(&self) -> bool {
        self.strongly_separated
    }

    pub fn num_maps(&self) -> usize {
        self.maps.len()
    }

    /// Exact mass of the cylinder of `word` (product of the weights).
    pub fn cylinder_mass(&self, word: &[usize]) -> Q {
        word.iter().fold(Q::one(), |a, &i| a * &self.weights_exact[i])
    }

    /// Bounding box of the cylinder of `word`.
    pub fn cylinder_box(&self, word: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let map = self.word_map(word);
        map.image_box(&self.lo, &self.hi)
    }

    fn identity(&self) -> Sim {
        Sim { ratio: 1.0, rot: None, trans: vec![0.0; self.d], exact: None }
    }

    fn word_map(&self, word: &[usize]) -> Sim {
        word.iter().fold(self.identity(), |acc, &i| acc.compose(&self.maps[i]))
    }

    fn pick(&self, rng: &mut dyn RngCore) -> usize {
        let u: f64 = rng.gen::<f64>();
        self.cumulative.iter().position(|&c| u < c).unwrap_or(self.maps.len() - 1)
    }

    fn random_word(&self, rng: &mut dyn RngCore) -> Vec<usize> {
        let mut word = Vec::new();
        let mut scale = 1.0;
        let size = self.hi.iter().zip(&self.lo).map(|(a, b)| a - b).fold(0.0, f64::max).max(1.0);
        while scale * size > 1e-13 {
            let i = self.pick(rng);
            scale *= self.maps[i].ratio;
            word.push(i);
        }
        word
    }

    fn point_of(&self, word: &[usize]) -> Vec<f64> {
        word.iter().rev().fold(self.anchor.clone(), |x, &i| self.maps[i].apply(&x))
    }

    fn root(&self) -> Cylinder {
        Cylinder { map: self.identity(), lo: self.lo.clone(), hi: self.hi.clone(), mass: 1.0, depth: 0 }
    }

    fn children(&self, c: &Cylinder) -> impl Iterator<Item = Cylinder> + '_ {
        let parent = c.clone();
        self.maps.iter().enumerate().map(move |(i, m)| {
            let map = parent.map.compose(m);
            let (lo, hi) = map.image_box(&self.lo, &self.hi);
            Cylinder { map, lo, hi, mass: parent.mass * self.weights[i], depth: parent.depth + 1 }
        })
    }
}

pub fn cantor_middle_thirds() -> SelfSimilar {
    let spec = IfsSpec {
        maps: vec![
            MapSpec { ratio: "1/3".into(), translation: vec!["0".into()], rotation: None },
            MapSpec { ratio: "1/3".into(), translation: vec!["2/3".into()], rotation: None },
        ],
        weights: vec!["1/2".into(), "1/2".into()],
    };
    SelfSimilar::new(&spec).unwrap().with_label("middle-thirds Cantor measure")
}

/// `d`-fold product of the middle-thirds Cantor measure, as a single IFS with `2^d` maps.
pub fn cantor_dust(d: usize) -> Result<SelfSimilar> {
    if d == 0 || d > 12 {
        return Err(Error::invalid("cantor dust dimension must be in 1..=12"));
    }
    let n = 1usize << d;
    let w = qr(1, n as i64);
    let maps = (0..n)
        .map(|m| MapSpec {
            ratio: "1/3".into(),
            translation: (0..d).map(|i| if (m >> i) & 1 == 1 { "2/3".into() } else { "0".into() }).collect(),
            rotation: None,
        })
        .collect();
    let spec = IfsSpec { maps, weights: vec![crate::rational::fmt_q(&w); n] };
    Ok(SelfSimilar::new(&spec)?.with_label(&format!("Cantor dust (middle-thirds)^{d}")))
}

impl MeasureOracle for SelfSimilar {
    fn dim(&self) -> usize {
        self.d
    }

    fn total_mass(&self) -> f64 {
        1.0
    }

    fn is_exact(&self) -> bool {
        self.strongly_separated
    }

    fn support_descriptor(&self) -> String {
        format!(
            "{} ({} maps, strong separation {})",
            self.label,
            self.maps.len(),
            if self.strongly_separated { "verified" } else { "not verified" }
        )
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let w = self.random_word(rng);
        self.point_of(&w)
    }

    fn sample_exact(&self, rng: &mut dyn RngCore) -> Option<Vec<Q>> {
        let anchor = self.anchor_exact.clone()?;
        if self.maps.iter().any(|m| m.exact.is_none()) {
            return None;
        }
        let w = self.random_word(rng);
        Some(w.iter().rev().fold(anchor, |x, &i| {
            let (r, t) = self.maps[i].exact.as_ref().unwrap();
            x.iter().zip(t).map(|(a, b)| a * r + b).collect()
        }))
    }

    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        (self.lo.clone(), self.hi.clone())
    }

    fn region_mass(&self, region: &Region, tol: f64) -> MassBracket {
        let root = self.root();
        let mut inside = 0.0;
        let mut frontier = Vec::new();
        match classify_box(&root.lo, &root.hi, region) {
            Side::Inside => return MassBracket::exact(1.0),
            Side::Outside => return MassBracket::exact(0.0),
            Side::Straddle => frontier.push(root),
        }
        let mut nodes = 0usize;
        let mut flagged = false;
        loop {
            let straddle: f64 = frontier.iter().map(|c| c.mass).sum();
            if straddle <= tol || frontier.is_empty() {
                break;
            }
            if frontier[0].depth >= MAX_DEPTH || nodes + frontier.len() * self.maps.len() > NODE_BUDGET {
                flagged = true;
                break;
            }
            let mut next = Vec::new();
            for c in &frontier {
                for child in self.children(c) {
                    nodes += 1;
                    match classify_box(&child.lo, &child.hi, region) {
                        Side::Inside => inside += child.mass,
                        Side::Outside => {}
                        Side::Straddle => next.push(child),
                    }
                }
            }
            frontier = next;
        }
        let straddle: f64 = frontier.iter().map(|c| c.mass).sum();
        MassBracket { lo: inside, hi: (inside + straddle).min(1.0), flagged }
    }

    fn sample_in_ball(&self, ball: &Ball<f64>, n: usize, rng: &mut dyn RngCore, budget: usize) -> Vec<Vec<f64>> {
        // proposal: cylinders meeting the ball, refined to about a quarter of its radius
        let region = Region::ball(ball);
        let mut pool: Vec<Cylinder> = Vec::new();
        let mut queue = VecDeque::from([self.root()]);
        let mut nodes = 0usize;
        while let Some(c) = queue.pop_front() {
            let side = classify_box(&c.lo, &c.hi, &region);
            if side == Side::Outside {
                continue;
            }
            let size = c.hi.iter().zip(&c.lo).map(|(a, b)| a - b).fold(0.0, f64::max);
            if side == Side::Inside || size <= ball.radius / 4.0 || c.depth >= MAX_DEPTH || nodes > 200_000 {
                pool.push(c);
                continue;
            }
            for child in self.children(&c) {
                nodes += 1;
                queue.push_back(child);
            }
        }
        let total: f64 = pool.iter().map(|c| c.mass).sum();
        let mut out = Vec::new();
        if pool.is_empty() || total <= 0.0 {
            return out;
        }
        for _ in 0..budget {
            if out.len() >= n {
                break;
            }
            let mut u = rng.gen::<f64>() * total;
            let mut k = pool.len() - 1;
            for (i, c) in pool.iter().enumerate() {
                if u < c.mass {
                    k = i;
                    break;
                }
                u -= c.mass;
            }
            let inner = self.sample(rng);
            let y = pool[k].map.apply(&inner);
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
    use crate::geometry::Norm;
    use crate::Rng;
    use rand::SeedableRng;

    fn interval(a: f64, b: f64) -> Ball<f64> {
        Ball::new(vec![(a + b) / 2.0], (b - a) / 2.0, Norm::Euclidean).unwrap()
    }

    #[test]
    fn cantor_cylinder_masses() {
        let c = cantor_middle_thirds();
        assert!(c.strongly_separated());
        assert!(c.ball_mass(&interval(0.0, 1.0 / 3.0), 1e-9).contains(0.5, 1e-9));
        assert_eq!(c.ball_mass(&interval(0.0, 1.0), 1e-9), MassBracket::exact(1.0));
        let gap = c.ball_mass(&interval(1.0 / 3.0 + 1e-6, 2.0 / 3.0 - 1e-6), 1e-9);
        assert_eq!(gap, MassBracket::exact(0.0));
        assert_eq!(c.cylinder_mass(&[0, 1, 1]), qr(1, 8));
    }

    #[test]
    fn samples_stay_in_support_boxes() {
        let c = cantor_middle_thirds();
        let mut rng = Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x = c.sample(&mut rng)[0];
            assert!((0.0..=1.0 / 3.0 + 1e-12).contains(&x) || (2.0 / 3.0 - 1e-12..=1.0).contains(&x));
        }
        let e = c.sample_exact(&mut rng).unwrap();
        assert!(e[0] >= Q::zero() && e[0] <= Q::one());
    }

    #[test]
    fn conditioned_samples_land_in_ball() {
        let dust = cantor_dust(2).unwrap();
        let ball = Ball::new(vec![1.0 / 6.0, 5.0 / 6.0], 1.0 / 6.0, Norm::Sup).unwrap();
        let mut rng = Rng::seed_from_u64(5);
        let pts = dust.sample_in_ball(&ball, 50, &mut rng, 1000);
        assert_eq!(pts.len(), 50);
        assert!(pts.iter().all(|p| ball.contains(p)));
        assert!(dust.ball_mass(&ball, 1e-9).contains(0.25, 1e-9));
    }

    #[test]
    fn rejects_bad_specs() {
        let bad = IfsSpec {
            maps: vec![MapSpec { ratio: "1".into(), translation: vec!["0".into()], rotation: None }],
            weights: vec!["1".into()],
        };
        assert!(SelfSimilar::new(&bad).is_err());
        let bad = IfsSpec {
            maps: vec![MapSpec { ratio: "1/2".into(), translation: vec!["0".into()], rotation: None }],
            weights: vec!["1/2".into()],
        };
        assert!(SelfSimilar::new(&bad).is_err());
    }
}
