//! Exponents of irrationality by direct search: continued fractions, brute
//! force enumeration and lattice reduction; and the simplex lemma as an exact
//! procedure.
//!
//! Approximation errors use the sup norm. A vector `x ∈ R^d` is handled as the
//! `d × 1` matrix with column `x`, so `ω(x) = ω(A) + 1` holds record by record.

mod matrix;
mod simplex;
mod vector;

pub use matrix::{mult_exponent_at, omega_matrix, omega_mult_matrix};
pub use simplex::{default_eps, height_bound, point_height, simplex_hyperplane, simplex_hyperplane_with_q, SimplexHull, SimplexResult};
pub use vector::{cf_convergents, omega_mult_vector, omega_vector, Method};

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rational::{split_q, Q};

pub(crate) fn ser_f64<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else if x.is_nan() {
        s.serialize_str("nan")
    } else if *x > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ApproximationRecord {
    pub q: Vec<i64>,
    pub p: Vec<i64>,
    /// Height used in the exponent: `q`, `‖q‖∞`, or `Π(|q_j| ∨ 1)`.
    pub height: u64,
    /// Sup-norm error `‖Aq − p‖∞`, or the product of coordinate errors.
    #[serde(serialize_with = "ser_f64")]
    pub error: f64,
    #[serde(serialize_with = "ser_f64")]
    pub exponent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentEstimate {
    /// Max exponent over the final third of the record sequence.
    #[serde(serialize_with = "ser_f64")]
    pub value: f64,
    /// Max over all records; nondecreasing in the height bound.
    #[serde(serialize_with = "ser_f64")]
    pub sup_value: f64,
    pub height_reached: u64,
    pub records: Vec<ApproximationRecord>,
    /// The search was not exhaustive, so records may have been missed.
    pub lower_bound_flag: bool,
    /// Exact solution `Aq = p` found: the exponent is infinite.
    pub rational_witness: Option<ApproximationRecord>,
}

impl ExponentEstimate {
    pub fn is_infinite(&self) -> bool {
        self.rational_witness.is_some()
    }

    pub(crate) fn infinite(witness: ApproximationRecord, height: u64) -> Self {
        ExponentEstimate {
            value: f64::INFINITY,
            sup_value: f64::INFINITY,
            height_reached: height,
            records: vec![witness.clone()],
            lower_bound_flag: false,
            rational_witness: Some(witness),
        }
    }

    pub(crate) fn from_records(records: Vec<ApproximationRecord>, height: u64, lower_bound_flag: bool) -> Result<Self> {
        let scored: Vec<&ApproximationRecord> = records.iter().filter(|r| r.exponent.is_finite()).collect();
        if scored.is_empty() {
            return Err(Error::Degenerate("no approximation records above height 1".into()));
        }
        let start = scored.len() - scored.len().div_ceil(3);
        let value = scored[start..].iter().map(|r| r.exponent).fold(f64::NEG_INFINITY, f64::max);
        let sup_value = scored.iter().map(|r| r.exponent).fold(f64::NEG_INFINITY, f64::max);
        Ok(ExponentEstimate { value, sup_value, height_reached: height, records, lower_bound_flag, rational_witness: None })
    }
}

/// A matrix held both exactly and as double-double entries for fast scans.
#[derive(Clone, Debug)]
pub(crate) struct Target {
    pub exact: Vec<Vec<Q>>,
    pub dd: Vec<Vec<(f64, f64)>>,
}

/// Residual below which the fast path defers to exact arithmetic.
const EXACT_CUTOFF: f64 = 1e-25;

impl Target {
    pub fn new(a: &[Vec<Q>]) -> Result<Self> {
        if a.is_empty() || a[0].is_empty() || a.iter().any(|r| r.len() != a[0].len()) {
            return Err(Error::invalid("matrix must be nonempty and rectangular"));
        }
        let dd = a.iter().map(|r| r.iter().map(split_q).collect()).collect();
        Ok(Target { exact: a.to_vec(), dd })
    }

    pub fn m(&self) -> usize {
        self.exact.len()
    }

    pub fn n(&self) -> usize {
        self.exact[0].len()
    }

    /// Nearest integer vector `p` to `Aq` and residuals `Aq − p`.
    /// Residuals are exact when tiny; an exact zero stays zero.
    pub fn residual(&self, q: &[i64]) -> (Vec<i64>, Vec<f64>) {
        let mut ps = Vec::with_capacity(self.m());
        let mut rs = Vec::with_capacity(self.m());
        for (i, row) in self.dd.iter().enumerate() {
            let mut n_acc: i64 = 0;
            let mut r = 0.0f64;
            for (&(hi, lo), &qj) in row.iter().zip(q) {
                if qj == 0 {
                    continue;
                }
                let qf = qj as f64;
                let prod = qf * hi;
                let err = qf.mul_add(hi, -prod);
                let n = prod.round();
                r += (prod - n) + err + qf * lo;
                n_acc += n as i64;
            }
            let k = r.round();
            r -= k;
            n_acc += k as i64;
            if r.abs() < EXACT_CUTOFF {
                let (p, e) = self.exact_residual(i, q);
                ps.push(p);
                rs.push(e);
            } else {
                ps.push(n_acc);
                rs.push(r);
            }
        }
        (ps, rs)
    }

    fn exact_residual(&self, i: usize, q: &[i64]) -> (i64, f64) {
        let v: Q = self.exact[i]
            .iter()
            .zip(q)
            .map(|(a, &qj)| a * Q::from_integer(qj.into()))
            .fold(Q::from_integer(0.into()), |s, t| s + t);
        let p = crate::rational::round_q(&v);
        let r = v - Q::from_integer(p.clone());
        (num_traits::ToPrimitive::to_i64(&p).unwrap_or(i64::MAX), crate::rational::to_f64(&r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{parse_q, qr};

    #[test]
    fn residuals_are_accurate() {
        let x = parse_q("0.618033988749894848204586834365638117720309179805762862135448").unwrap();
        let t = Target::new(&[vec![x.clone()]]).unwrap();
        let (p, r) = t.residual(&[832040]);
        let exact = &x * Q::from_integer(832040.into()) - Q::from_integer(p[0].into());
        assert_eq!(p[0], 514229);
        assert!((r[0] - crate::rational::to_f64(&exact)).abs() < 1e-20);
        let half = Target::new(&[vec![qr(1, 2)]]).unwrap();
        assert_eq!(half.residual(&[2]).1[0], 0.0);
    }
}
