use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::geometry::Hyperplane;
use crate::linalg::{dot, nullspace, rank};
use crate::rational::{fmt_q, ln_abs, Q};

/// `ε_d = (2^d (d+1)!)^{−1/(d+1)} / 2`.
pub fn default_eps(d: usize) -> f64 {
    let fact: f64 = (1..=d + 1).map(|k| k as f64).product();
    (2f64.powi(d as i32) * fact).powf(-1.0 / (d as f64 + 1.0)) / 2.0
}

#[derive(Clone, Debug, PartialEq)]
pub enum SimplexHull {
    Empty,
    Point(Vec<Q>),
    Hyperplane(Hyperplane<Q>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimplexResult {
    pub q: u64,
    /// All `p/q` with `q ≤ Q` in the closed sup ball, reduced and sorted.
    pub points: Vec<Vec<Q>>,
    pub hull: SimplexHull,
}

/// `Q = ⌊ε ρ^{−d/(d+1)}⌋`, shaved slightly so rounding never enlarges it.
pub fn height_bound(rho: &Q, d: usize, eps: f64) -> u64 {
    let v = (eps.ln() - ln_abs(rho) * d as f64 / (d as f64 + 1.0)).exp() * (1.0 - 1e-12);
    if v < 1.0 {
        0
    } else {
        v.floor().min(u64::MAX as f64 / 2.0) as u64
    }
}

/// Rational points of height `≤ q_max` in the closed sup ball `B(y, ρ)` and their affine hull.
pub fn simplex_hyperplane_with_q(y: &[Q], rho: &Q, q_max: u64) -> Result<SimplexResult> {
    let d = y.len();
    if d == 0 {
        return Err(Error::invalid("empty point"));
    }
    if rho <= &Q::zero() {
        return Err(Error::invalid("radius must be positive"));
    }
    let mut work: f64 = 1.0;
    for q in 1..=q_max {
        let per: f64 = (2.0 * crate::rational::to_f64(rho) * q as f64 + 1.0).powi(d as i32);
        work += per;
        if work > 5e7 {
            return Err(Error::Budget("more than 5e7 candidate rationals".into()));
        }
    }
    let mut points: Vec<Vec<Q>> = Vec::new();
    for q in 1..=q_max {
        let qb = BigInt::from(q);
        let qq = Q::from_integer(qb.clone());
        let ranges: Vec<(BigInt, BigInt)> = y
            .iter()
            .map(|c| ((c - rho) * &qq).ceil().to_integer())
            .zip(y.iter().map(|c| ((c + rho) * &qq).floor().to_integer()))
            .collect();
        if ranges.iter().any(|(lo, hi)| lo > hi) {
            continue;
        }
        let mut p: Vec<BigInt> = ranges.iter().map(|r| r.0.clone()).collect();
        loop {
            // keep only reduced representatives so each point appears once
            let g = p.iter().fold(qb.clone(), |g, x| g.gcd(x));
            if g.is_one() {
                points.push(p.iter().map(|x| Q::new(x.clone(), qb.clone())).collect());
            }
            let mut i = 0;
            loop {
                if i == d {
                    break;
                }
                p[i] += 1;
                if p[i] > ranges[i].1 {
                    p[i] = ranges[i].0.clone();
                    i += 1;
                } else {
                    break;
                }
            }
            if i == d {
                break;
            }
        }
    }
    points.sort();
    let hull = affine_hull(&points, d)?;
    Ok(SimplexResult { q: q_max, points, hull })
}

/// Simplex lemma with `ε_d` (default [`default_eps`]).
pub fn simplex_hyperplane(y: &[Q], rho: &Q, eps: Option<f64>) -> Result<SimplexResult> {
    let d = y.len();
    let eps = eps.unwrap_or_else(|| default_eps(d));
    if !(eps > 0.0) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    simplex_hyperplane_with_q(y, rho, height_bound(rho, d, eps))
}

fn affine_hull(points: &[Vec<Q>], d: usize) -> Result<SimplexHull> {
    let Some(p0) = points.first() else {
        return Ok(SimplexHull::Empty);
    };
    let diffs: Vec<Vec<Q>> = points[1..]
        .iter()
        .map(|p| p.iter().zip(p0).map(|(a, b)| a - b).collect())
        .collect();
    let r = rank(&diffs);
    if r == 0 {
        return Ok(SimplexHull::Point(p0.clone()));
    }
    if r < d {
        let normal = nullspace(&diffs, d).into_iter().next().expect("nullspace is nonempty");
        let offset = dot(&normal, p0);
        return Ok(SimplexHull::Hyperplane(Hyperplane::new(normal, offset)?));
    }
    // full rank: collect d+1 affinely independent points as the witness
    let mut chosen = vec![p0.clone()];
    let mut kept: Vec<Vec<Q>> = Vec::new();
    for (p, v) in points[1..].iter().zip(&diffs) {
        let mut trial = kept.clone();
        trial.push(v.clone());
        if rank(&trial) == trial.len() {
            kept = trial;
            chosen.push(p.clone());
            if kept.len() == d {
                break;
            }
        }
    }
    let fmt: Vec<String> = chosen
        .iter()
        .map(|p| format!("[{}]", p.iter().map(|x| format!("\"{}\"", fmt_q(x))).collect::<Vec<_>>().join(",")))
        .collect();
    Err(Error::assertion(
        "rational points span a full-dimensional simplex; epsilon is too large",
        format!("{{\"simplex\":[{}]}}", fmt.join(",")),
    ))
}

/// Height of a reduced rational point (common denominator).
pub fn point_height(p: &[Q]) -> u64 {
    p.iter()
        .fold(BigInt::one(), |l, x| l.lcm(x.denom()))
        .to_u64()
        .unwrap_or(u64::MAX)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{qi, qr};

    #[test]
    fn constants() {
        assert!((default_eps(1) - 0.25).abs() < 1e-15);
        assert!((default_eps(2) - 0.5 * 24f64.powf(-1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn one_dimensional_example() {
        let r = simplex_hyperplane(&[qr(1, 2)], &qr(1, 100), None).unwrap();
        assert_eq!(r.q, 2);
        assert_eq!(r.points, vec![vec![qr(1, 2)]]);
        assert_eq!(r.hull, SimplexHull::Point(vec![qr(1, 2)]));
    }

    #[test]
    fn two_dimensional_example() {
        let r = simplex_hyperplane(&[qr(1, 3), qr(1, 3)], &qr(1, 1000), None).unwrap();
        assert!(r.points.contains(&vec![qr(1, 3), qr(1, 3)]));
        assert!(!matches!(r.hull, SimplexHull::Empty));
    }

    #[test]
    fn tiny_epsilon_is_vacuous() {
        let r = simplex_hyperplane(&[qr(1, 2), qi(0)], &qi(2), Some(1e-6)).unwrap();
        assert_eq!(r.q, 0);
        assert_eq!(r.hull, SimplexHull::Empty);
    }

    #[test]
    fn oversized_height_reports_simplex() {
        let e = simplex_hyperplane_with_q(&[qr(1, 2), qr(1, 2)], &qr(1, 2), 2).unwrap_err();
        assert!(e.is_assertion());
    }

    #[test]
    fn collinear_points_give_a_line() {
        // heights ≤ 3 near (1/2, 1/2) with a thin radius: 1/2·(1,1) only, or a line
        let r = simplex_hyperplane_with_q(&[qr(1, 2), qi(0)], &qr(1, 7), 3).unwrap();
        match r.hull {
            SimplexHull::Hyperplane(h) => {
                for p in &r.points {
                    assert_eq!(h.value(p), h.offset);
                }
            }
            SimplexHull::Point(_) => assert_eq!(r.points.len(), 1),
            SimplexHull::Empty => panic!("expected points"),
        }
        assert_eq!(point_height(&[qr(1, 2), qr(1, 3)]), 6);
    }
}
