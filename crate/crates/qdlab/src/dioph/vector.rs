use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::matrix::{hyperbolic_scan, records_from, shell_scan, witness, Hit, Scan};
use super::{ApproximationRecord, ExponentEstimate, Target};
use crate::error::{Error, Result};
use crate::lattice::{lll, shortest_vector};
use crate::rational::{floor_q, ln_abs, pow2, qr, Q};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cf,
    Brute,
    Lattice,
}

fn column(x: &[Q]) -> Vec<Vec<Q>> {
    x.iter().map(|v| vec![v.clone()]).collect()
}

/// Convergents `(p_k, q_k)` of `x` with `q_k ≤ q_max`, and whether the
/// expansion terminated (so the last convergent equals `x`).
pub fn cf_convergents(x: &Q, q_max: u64) -> (Vec<(BigInt, BigInt)>, bool) {
    let limit = BigInt::from(q_max);
    let (mut h0, mut h1) = (BigInt::zero(), BigInt::one());
    let (mut k0, mut k1) = (BigInt::one(), BigInt::zero());
    let mut rest = x.clone();
    let mut out = Vec::new();
    loop {
        let a = floor_q(&rest);
        let h2 = &a * &h1 + &h0;
        let k2 = &a * &k1 + &k0;
        if k2 > limit {
            return (out, false);
        }
        out.push((h2.clone(), k2.clone()));
        let frac = &rest - Q::from_integer(a);
        if frac.is_zero() {
            return (out, true);
        }
        rest = frac.recip();
        (h0, h1) = (h1, h2);
        (k0, k1) = (k1, k2);
    }
}

fn omega_cf(x: &Q, q_max: u64) -> Result<ExponentEstimate> {
    let (conv, done) = cf_convergents(x, q_max);
    let to_i = |v: &BigInt| v.to_i64().ok_or_else(|| Error::invalid("convergent exceeds 64 bits"));
    if done {
        let (p, q) = conv.last().unwrap();
        let q = to_i(q)?;
        let w = ApproximationRecord { q: vec![q], p: vec![to_i(p)?], height: q as u64, error: 0.0, exponent: f64::INFINITY };
        return Ok(ExponentEstimate::infinite(w, q_max));
    }
    let mut records = Vec::new();
    let mut best: Option<Q> = None;
    for (p, q) in &conv {
        let err = (x * Q::from_integer(q.clone()) - Q::from_integer(p.clone())).abs();
        if best.as_ref().is_some_and(|b| &err >= b) {
            continue;
        }
        best = Some(err.clone());
        let qi = to_i(q)?;
        if qi >= 2 {
            records.push(ApproximationRecord {
                q: vec![qi],
                p: vec![to_i(p)?],
                height: qi as u64,
                error: crate::rational::to_f64(&err),
                exponent: -ln_abs(&err) / (qi as f64).ln() + 1.0,
            });
        }
    }
    ExponentEstimate::from_records(records, q_max, false)
}

/// Candidate denominators from LLL-reduced approximation lattices at heights `2^j`.
fn lattice_candidates(x: &[Q], q_max: u64) -> Result<Vec<i64>> {
    let d = x.len();
    let mut qs = Vec::new();
    let top = 64 - q_max.leading_zeros() as i64;
    for j in 1..=top {
        let eps = pow2(-j);
        let s = pow2((j as f64 / d as f64).round() as i64);
        let mut rows = Vec::with_capacity(d + 1);
        let mut first = vec![eps];
        first.extend(x.iter().map(|v| v * &s));
        rows.push(first);
        for i in 0..d {
            let mut r = vec![Q::zero(); d + 1];
            r[i + 1] = -s.clone();
            rows.push(r);
        }
        let red = lll(&rows, &qr(3, 4))?;
        let mut coeffs: Vec<BigInt> = red.transform.iter().map(|t| t[0].clone()).collect();
        if let Ok(sv) = shortest_vector(&rows, 200_000) {
            coeffs.push(sv.coeffs[0].clone());
        }
        for c in coeffs {
            if let Some(q) = c.abs().to_i64() {
                if q >= 1 && q as u64 <= q_max {
                    qs.push(q);
                }
            }
        }
    }
    qs.sort_unstable();
    qs.dedup();
    Ok(qs)
}

fn hits_for(t: &Target, qs: &[i64], mult: bool) -> Vec<Hit> {
    qs.iter()
        .map(|&q| {
            let (p, r) = t.residual(&[q]);
            let err = if mult {
                r.iter().map(|v| v.abs()).product()
            } else {
                r.iter().fold(0.0, |a: f64, v| a.max(v.abs()))
            };
            Hit { q: vec![q], p, height: q as u64, err }
        })
        .collect()
}

/// `ω(x)` for `x ∈ Q^d` (exact input), heights up to `q_max`.
pub fn omega_vector(x: &[Q], q_max: u64, method: Method) -> Result<ExponentEstimate> {
    if x.is_empty() {
        return Err(Error::invalid("empty vector"));
    }
    match method {
        Method::Cf => {
            if x.len() != 1 {
                return Err(Error::invalid("the continued fraction method needs d = 1"));
            }
            omega_cf(&x[0], q_max)
        }
        Method::Brute => {
            let t = Target::new(&column(x))?;
            match shell_scan(&t, q_max)? {
                Scan::Exact(h) => Ok(ExponentEstimate::infinite(witness(&h), q_max)),
                Scan::Hits(h) => ExponentEstimate::from_records(records_from(&h, 1.0), q_max, false),
            }
        }
        Method::Lattice => {
            let t = Target::new(&column(x))?;
            let mut qs = lattice_candidates(x, q_max)?;
            if !qs.contains(&1) {
                qs.insert(0, 1);
            }
            let hits = hits_for(&t, &qs, false);
            if let Some(h) = hits.iter().find(|h| h.err == 0.0) {
                return Ok(ExponentEstimate::infinite(witness(h), q_max));
            }
            ExponentEstimate::from_records(records_from(&hits, 1.0), q_max, true)
        }
    }
}

/// `ω_×(x)`: records of `Π|q x_i − p_i|`, exponent `−ln Π / ln q + d`.
pub fn omega_mult_vector(x: &[Q], q_max: u64) -> Result<ExponentEstimate> {
    if x.is_empty() {
        return Err(Error::invalid("empty vector"));
    }
    let t = Target::new(&column(x))?;
    match hyperbolic_scan(&t, q_max)? {
        Scan::Exact(h) => Ok(ExponentEstimate::infinite(witness(&h), q_max)),
        Scan::Hits(h) => ExponentEstimate::from_records(records_from(&h, x.len() as f64), q_max, false),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{parse_q, qi};

    fn golden() -> Q {
        parse_q("0.618033988749894848204586834365638117720309179805762862135448").unwrap()
    }

    #[test]
    fn rational_sentinel() {
        let e = omega_vector(&[qr(1, 2)], 100, Method::Brute).unwrap();
        assert!(e.is_infinite());
        assert_eq!(e.rational_witness.as_ref().unwrap().q, vec![2]);
        let c = omega_vector(&[qr(1, 2)], 100, Method::Cf).unwrap();
        assert!(c.is_infinite());
    }

    #[test]
    fn golden_convergents_are_fibonacci() {
        let (conv, done) = cf_convergents(&golden(), 1000);
        assert!(!done);
        let qs: Vec<i64> = conv.iter().map(|(_, q)| q.to_i64().unwrap()).collect();
        assert_eq!(qs, vec![1, 1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144, 233, 377, 610, 987]);
    }

    #[test]
    fn golden_cf_matches_fibonacci_oracle() {
        let x = golden();
        let (mut a, mut b) = (1i64, 2i64);
        let mut exps = Vec::new();
        while b <= 1_000_000 {
            let err = (&x - qr(a, b)).abs();
            exps.push(-crate::rational::ln_abs(&err) / (b as f64).ln());
            (a, b) = (b, a + b);
        }
        let tail = &exps[exps.len() - exps.len().div_ceil(3)..];
        let oracle = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e = omega_vector(&[x], 1_000_000, Method::Cf).unwrap();
        assert!((e.value - oracle).abs() < 1e-9, "{} vs {oracle}", e.value);
        // the bias ln√5 / ln q keeps every finite-height value above 2.05
        assert!(e.value > 2.05 && e.value < 2.1);
    }

    #[test]
    fn brute_and_cf_agree_in_one_dimension() {
        let x = [golden()];
        let a = omega_vector(&x, 100_000, Method::Cf).unwrap();
        let b = omega_vector(&x, 100_000, Method::Brute).unwrap();
        let qa: Vec<_> = a.records.iter().map(|r| r.q.clone()).collect();
        let qb: Vec<_> = b.records.iter().map(|r| r.q.clone()).collect();
        assert_eq!(qa, qb);
        assert!((a.value - b.value).abs() < 1e-9);
        let l = omega_vector(&x, 100_000, Method::Lattice).unwrap();
        assert!(l.lower_bound_flag);
        assert!((l.value - a.value).abs() < 1e-9);
    }

    #[test]
    fn mult_dominates_simple() {
        let x = [parse_q("1.41421356237309504880168872420969807856967187537694").unwrap() - qi(1),
                 parse_q("1.73205080756887729352744634150587236694280525381038").unwrap() - qi(1)];
        let s = omega_vector(&x, 20_000, Method::Brute).unwrap();
        let m = omega_mult_vector(&x, 20_000).unwrap();
        assert!(m.sup_value >= s.sup_value);
        assert!(m.value >= 3.0 - 0.1);
    }
}
