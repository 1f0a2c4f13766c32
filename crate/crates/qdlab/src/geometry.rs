//! Points, balls, hyperplanes, thickenings, separated nets and the 4r-covering
//! selection.
//!
//! Types are generic over [`Scalar`], which is implemented for `f64` (float
//! track) and [`Q`] (exact track). Converting between tracks is explicit.

use std::collections::HashMap;
use std::fmt::Debug;

use num_traits::{Num, Signed};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::measures::MeasureOracle;
use crate::rational::{q_from_f64, to_f64, Q};

pub trait Scalar: Clone + PartialOrd + Debug + Num + Signed + Send + Sync + 'static {
    const EXACT: bool;
    fn as_f64(&self) -> f64;
}

impl Scalar for f64 {
    const EXACT: bool = false;
    fn as_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for Q {
    const EXACT: bool = true;
    fn as_f64(&self) -> f64 {
        to_f64(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    #[default]
    Euclidean,
    Sup,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Point<S: Scalar>(pub Vec<S>);

impl<S: Scalar> Point<S> {
    pub fn new(coords: Vec<S>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("points need dimension at least 1"));
        }
        Ok(Point(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn to_float(&self) -> Point<f64> {
        Point(self.0.iter().map(|x| x.as_f64()).collect())
    }
}

impl Point<f64> {
    /// Exact value of each float coordinate.
    pub fn to_exact(&self) -> Point<Q> {
        Point(self.0.iter().map(|&x| q_from_f64(x)).collect())
    }
}

pub fn dist_sq_euclid<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (x, y)| {
        let d = x.clone() - y.clone();
        acc + d.clone() * d
    })
}

pub fn dist_sup<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (x, y)| {
        let d = (x.clone() - y.clone()).abs();
        if d > acc {
            d
        } else {
            acc
        }
    })
}

/// Distance in `norm`, as a float.
pub fn dist<S: Scalar>(a: &[S], b: &[S], norm: Norm) -> f64 {
    match norm {
        Norm::Euclidean => dist_sq_euclid(a, b).as_f64().sqrt(),
        Norm::Sup => dist_sup(a, b).as_f64(),
    }
}

/// `dist(a, b) <= r`, decided exactly on the exact track.
pub fn within<S: Scalar>(a: &[S], b: &[S], r: &S, norm: Norm) -> bool {
    match norm {
        Norm::Euclidean => dist_sq_euclid(a, b) <= r.clone() * r.clone(),
        Norm::Sup => dist_sup(a, b) <= *r,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ball<S: Scalar> {
    pub center: Vec<S>,
    pub radius: S,
    pub norm: Norm,
}

impl<S: Scalar> Ball<S> {
    pub fn new(center: Vec<S>, radius: S, norm: Norm) -> Result<Self> {
        if radius <= S::zero() {
            return Err(Error::invalid("ball radius must be positive"));
        }
        if center.is_empty() {
            return Err(Error::invalid("ball center needs dimension at least 1"));
        }
        Ok(Ball { center, radius, norm })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, y: &[S]) -> bool {
        within(&self.center, y, &self.radius, self.norm)
    }

    pub fn scaled(&self, k: S) -> Ball<S> {
        Ball { center: self.center.clone(), radius: self.radius.clone() * k, norm: self.norm }
    }

    /// Closed balls intersect iff the center distance is at most the radius sum.
    pub fn intersects(&self, other: &Ball<S>) -> bool {
        let r = self.radius.clone() + other.radius.clone();
        within(&self.center, &other.center, &r, self.norm)
    }

    pub fn to_float(&self) -> Ball<f64> {
        Ball {
            center: self.center.iter().map(|x| x.as_f64()).collect(),
            radius: self.radius.as_f64(),
            norm: self.norm,
        }
    }
}

/// Affine hyperplane `{y : normal · y = offset}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Hyperplane<S: Scalar> {
    pub normal: Vec<S>,
    pub offset: S,
}

impl<S: Scalar> Hyperplane<S> {
    /// Builds the plane in canonical sign (first nonzero normal coordinate positive).
    pub fn new(normal: Vec<S>, offset: S) -> Result<Self> {
        let Some(first) = normal.iter().find(|x| !x.is_zero()) else {
            return Err(Error::invalid("hyperplane normal must be nonzero"));
        };
        if first.is_negative() {
            Ok(Hyperplane {
                normal: normal.iter().map(|x| -x.clone()).collect(),
                offset: -offset,
            })
        } else {
            Ok(Hyperplane { normal, offset })
        }
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    pub fn normal_sq(&self) -> S {
        self.normal.iter().fold(S::zero(), |a, x| a + x.clone() * x.clone())
    }

    /// `normal · y − offset`.
    pub fn value(&self, y: &[S]) -> S {
        self.normal
            .iter()
            .zip(y)
            .fold(S::zero(), |a, (n, x)| a + n.clone() * x.clone())
            - self.offset.clone()
    }

    /// Squared Euclidean distance, exact on the exact track.
    pub fn dist_sq(&self, y: &[S]) -> Result<S> {
        check_dim(self.dim(), y.len())?;
        let v = self.value(y);
        Ok(v.clone() * v / self.normal_sq())
    }

    pub fn dist(&self, y: &[S]) -> Result<f64> {
        check_dim(self.dim(), y.len())?;
        let v = self.value(y).as_f64().abs();
        Ok(v / self.normal_sq().as_f64().sqrt())
    }

    /// Same plane as `other` (up to a nonzero rescaling).
    pub fn same_plane(&self, other: &Hyperplane<S>) -> bool {
        if self.dim() != other.dim() {
            return false;
        }
        let i = self.normal.iter().position(|x| !x.is_zero()).unwrap();
        let (a, b) = (self.normal[i].clone(), other.normal[i].clone());
        if b.is_zero() {
            return false;
        }
        self.normal
            .iter()
            .zip(&other.normal)
            .all(|(x, y)| x.clone() * b.clone() == y.clone() * a.clone())
            && self.offset.clone() * b == other.offset.clone() * a
    }

    pub fn to_float(&self) -> Hyperplane<f64> {
        Hyperplane {
            normal: self.normal.iter().map(|x| x.as_f64()).collect(),
            offset: self.offset.as_f64(),
        }
    }
}

/// Hyperplane distance, `|normal·y − offset| / ‖normal‖`.
pub fn dist_to_hyperplane<S: Scalar>(y: &[S], plane: &Hyperplane<S>) -> Result<f64> {
    plane.dist(y)
}

/// Membership in the closed (or open) `eps`-thickening of `plane`.
pub fn in_thickening<S: Scalar>(y: &[S], plane: &Hyperplane<S>, eps: &S, open: bool) -> Result<bool> {
    if *eps < S::zero() {
        return Err(Error::invalid("thickening radius must be nonnegative"));
    }
    let d2 = plane.dist_sq(y)?;
    let e2 = eps.clone() * eps.clone();
    Ok(if open { d2 < e2 } else { d2 <= e2 })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum SupDist {
    Value { sup: f64, hits: usize },
    /// No sample landed in the ball within the rejection budget.
    Empty { draws: usize },
}

/// Largest distance to `plane` over `n` support samples of `mu` lying in `ball`.
pub fn sup_dist_on_support(
    mu: &dyn MeasureOracle,
    plane: &Hyperplane<f64>,
    ball: &Ball<f64>,
    n: usize,
    rng: &mut dyn RngCore,
    budget: usize,
) -> Result<SupDist> {
    if n == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    check_dim(mu.dim(), plane.dim())?;
    let pts = mu.sample_in_ball(ball, n, rng, budget);
    if pts.is_empty() {
        return Ok(SupDist::Empty { draws: budget });
    }
    let mut sup = 0.0f64;
    for p in &pts {
        sup = sup.max(plane.dist(p)?);
    }
    Ok(SupDist::Value { sup, hits: pts.len() })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Net<S: Scalar> {
    pub points: Vec<Vec<S>>,
    /// Indices into the candidate list.
    pub indices: Vec<usize>,
    pub separation: S,
}

type Cell = Vec<i64>;

fn cell_of<S: Scalar>(p: &[S], size: f64) -> Cell {
    p.iter().map(|x| (x.as_f64() / size).floor() as i64).collect()
}

fn neighbor_cells(c: &Cell) -> Vec<Cell> {
    let mut out = vec![c.clone()];
    for i in 0..c.len() {
        let mut next = Vec::with_capacity(out.len() * 3);
        for base in &out {
            for d in [-1, 0, 1] {
                let mut x = base.clone();
                x[i] += d;
                next.push(x);
            }
        }
        out = next;
    }
    out
}

/// Greedy maximal `rho`-separated subset, scanning candidates in order.
///
/// A candidate is kept when its distance to every kept point is at least `rho`.
pub fn greedy_maximal_net<S: Scalar>(candidates: &[Vec<S>], rho: &S, norm: Norm) -> Result<Net<S>> {
    if *rho <= S::zero() {
        return Err(Error::invalid("net separation must be positive"));
    }
    let size = rho.as_f64() * (1.0 + 1e-9);
    let mut grid: HashMap<Cell, Vec<usize>> = HashMap::new();
    let mut indices = Vec::new();
    'cand: for (i, c) in candidates.iter().enumerate() {
        let cell = cell_of(c, size);
        for nb in neighbor_cells(&cell) {
            if let Some(list) = grid.get(&nb) {
                for &j in list {
                    let other = &candidates[j];
                    let close = match norm {
                        Norm::Euclidean => dist_sq_euclid(c, other) < rho.clone() * rho.clone(),
                        Norm::Sup => dist_sup(c, other) < *rho,
                    };
                    if close {
                        continue 'cand;
                    }
                }
            }
        }
        grid.entry(cell).or_default().push(i);
        indices.push(i);
    }
    Ok(Net {
        points: indices.iter().map(|&i| candidates[i].clone()).collect(),
        indices,
        separation: rho.clone(),
    })
}

/// Greedy Vitali selection: by decreasing radius, keep a ball when its
/// quarter-radius shrink misses every kept quarter-shrink. Returns indices.
pub fn four_r_select<S: Scalar>(balls: &[Ball<S>]) -> Result<Vec<usize>> {
    if let Some(b) = balls.first() {
        for o in balls {
            check_dim(b.dim(), o.dim())?;
        }
    }
    let mut order: Vec<usize> = (0..balls.len()).collect();
    order.sort_by(|&a, &b| {
        balls[b]
            .radius
            .partial_cmp(&balls[a].radius)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let quarter = |b: &Ball<S>| {
        let four = S::one() + S::one() + S::one() + S::one();
        Ball { center: b.center.clone(), radius: b.radius.clone() / four, norm: b.norm }
    };
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let qi = quarter(&balls[i]);
        if kept.iter().all(|&k| !quarter(&balls[k]).intersects(&qi)) {
            kept.push(i);
        }
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{qi, qr};

    #[test]
    fn hyperplane_distances() {
        let l = Hyperplane::new(vec![1.0, 0.0], 0.0).unwrap();
        assert_eq!(dist_to_hyperplane(&[0.0, 0.0], &l).unwrap(), 0.0);
        assert_eq!(dist_to_hyperplane(&[3.0, 4.0], &l).unwrap(), 3.0);
        let l = Hyperplane::new(vec![qi(3), qi(4)], qi(0)).unwrap();
        assert_eq!(l.dist_sq(&[qi(1), qi(1)]).unwrap(), qr(49, 25));
        assert!(l.dist(&[qi(1)]).is_err());
    }

    #[test]
    fn canonical_sign() {
        let a = Hyperplane::new(vec![qi(-2), qi(1)], qi(3)).unwrap();
        assert_eq!(a.normal, vec![qi(2), qi(-1)]);
        assert_eq!(a.offset, qi(-3));
        assert!(Hyperplane::new(vec![qi(0), qi(0)], qi(1)).is_err());
        let b = Hyperplane::new(vec![qi(4), qi(-2)], qi(-6)).unwrap();
        assert!(a.same_plane(&b));
    }

    #[test]
    fn thickening_boundaries() {
        let l = Hyperplane::new(vec![qi(1), qi(0)], qi(0)).unwrap();
        let on = [qi(0), qi(5)];
        assert!(in_thickening(&on, &l, &qi(0), false).unwrap());
        assert!(!in_thickening(&on, &l, &qi(0), true).unwrap());
        assert!(in_thickening(&[qi(3), qi(4)], &l, &qi(3), false).unwrap());
        assert!(in_thickening(&on, &l, &qi(-1), false).is_err());
    }

    #[test]
    fn net_examples() {
        let c: Vec<Vec<f64>> = [0.0, 0.25, 0.5, 0.75, 1.0].iter().map(|&x| vec![x]).collect();
        let net = greedy_maximal_net(&c, &0.5, Norm::Euclidean).unwrap();
        assert_eq!(net.points, vec![vec![0.0], vec![0.5], vec![1.0]]);
        let one = greedy_maximal_net(&c[..1], &0.5, Norm::Euclidean).unwrap();
        assert_eq!(one.points.len(), 1);
        let big = greedy_maximal_net(&c, &5.0, Norm::Sup).unwrap();
        assert_eq!(big.points.len(), 1);
        assert!(greedy_maximal_net(&c, &0.0, Norm::Sup).is_err());
    }

    #[test]
    fn four_r_examples() {
        let b = |x: f64, r: f64| Ball::new(vec![x], r, Norm::Euclidean).unwrap();
        assert_eq!(four_r_select(&[b(0.0, 1.0)]).unwrap(), vec![0]);
        assert_eq!(four_r_select(&[b(0.0, 1.0), b(0.0, 1.0)]).unwrap().len(), 1);
        let sel = four_r_select(&[b(0.0, 1.0), b(0.1, 0.5), b(3.0, 1.0)]).unwrap();
        let mut s = sel.clone();
        s.sort();
        assert_eq!(s, vec![0, 2]);
    }
}
