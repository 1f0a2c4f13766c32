use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{ApproximationRecord, ExponentEstimate, Target};
use crate::error::{Error, Result};
use crate::rational::Q;

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Hit {
    pub q: Vec<i64>,
    pub p: Vec<i64>,
    pub height: u64,
    pub err: f64,
}

impl Hit {
    /// Smaller error first; ties broken by height then lexicographic `q`.
    fn better(&self, other: &Hit) -> bool {
        (self.err, self.height, &self.q) < (other.err, other.height, &other.q)
    }
}

pub(crate) enum Scan {
    /// Candidates in increasing height order; the first entry is the baseline
    /// at height 1 when present.
    Hits(Vec<Hit>),
    Exact(Hit),
}

fn sup_err(r: &[f64]) -> f64 {
    r.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn prod_err(r: &[f64]) -> f64 {
    r.iter().map(|x| x.abs()).product()
}

fn min_exact(a: Option<Hit>, b: Option<Hit>) -> Option<Hit> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if (x.height, &x.q) <= (y.height, &y.q) { x } else { y }),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Best sup-norm error on each shell `‖q‖∞ = k`, `k = 1..=q_max`.
pub(crate) fn shell_scan(t: &Target, q_max: u64) -> Result<Scan> {
    let n = t.n();
    if q_max == 0 {
        return Err(Error::invalid("height bound must be at least 1"));
    }
    if n == 1 {
        if q_max > 50_000_000 {
            return Err(Error::Budget("brute force scans are limited to heights 5e7".into()));
        }
        let hits: Vec<Hit> = (1..=q_max as i64)
            .into_par_iter()
            .map(|q| {
                let (p, r) = t.residual(&[q]);
                Hit { q: vec![q], p, height: q as u64, err: sup_err(&r) }
            })
            .collect();
        if let Some(h) = hits.iter().find(|h| h.err == 0.0) {
            return Ok(Scan::Exact(h.clone()));
        }
        return Ok(Scan::Hits(hits));
    }
    let total = (2.0 * q_max as f64 + 1.0).powi(n as i32) / 2.0;
    if total > 2e9 {
        return Err(Error::Budget(format!("{total:.2e} lattice points exceed the scan budget")));
    }
    let k_max = q_max as usize;
    type Acc = (Vec<Option<Hit>>, Option<Hit>);
    let (best, exact): Acc = (0..=q_max as i64)
        .into_par_iter()
        .fold(
            || (vec![None; k_max + 1], None),
            |(mut best, mut exact): Acc, q1| {
                let mut q = vec![0i64; n];
                q[0] = q1;
                let mut visit = |q: &[i64]| {
                    let k = q.iter().map(|x| x.unsigned_abs()).max().unwrap() as usize;
                    let (p, r) = t.residual(q);
                    let h = Hit { q: q.to_vec(), p, height: k as u64, err: sup_err(&r) };
                    if h.err == 0.0 {
                        exact = min_exact(exact.take(), Some(h.clone()));
                    }
                    if best[k].as_ref().is_none_or(|b| h.better(b)) {
                        best[k] = Some(h);
                    }
                };
                rest_box(&mut q, 1, q1 != 0, q_max as i64, &mut visit);
                (best, exact)
            },
        )
        .reduce(
            || (vec![None; k_max + 1], None),
            |(mut a, ea), (b, eb)| {
                for (x, y) in a.iter_mut().zip(b) {
                    if let Some(y) = y {
                        if x.as_ref().is_none_or(|v| y.better(v)) {
                            *x = Some(y);
                        }
                    }
                }
                (a, min_exact(ea, eb))
            },
        );
    if let Some(h) = exact {
        return Ok(Scan::Exact(h));
    }
    Ok(Scan::Hits(best.into_iter().flatten().collect()))
}

/// Enumerates coordinates `j..` in the box `|q_i| ≤ bound`, first nonzero positive.
fn rest_box(q: &mut Vec<i64>, j: usize, seen: bool, bound: i64, visit: &mut impl FnMut(&[i64])) {
    if j == q.len() {
        if seen {
            visit(q);
        }
        return;
    }
    let lo = if seen { -bound } else { 0 };
    for v in lo..=bound {
        q[j] = v;
        rest_box(q, j + 1, seen || v != 0, bound, visit);
    }
    q[j] = 0;
}

/// Enumerates coordinates `j..` with `Π(|q_i| ∨ 1) ≤ budget`, first nonzero positive.
fn rest_hyperbolic(q: &mut Vec<i64>, j: usize, seen: bool, budget: i64, visit: &mut impl FnMut(&[i64])) {
    if j == q.len() {
        if seen {
            visit(q);
        }
        return;
    }
    let lo = if seen { -budget } else { 0 };
    for v in lo..=budget {
        q[j] = v;
        let next = budget / v.abs().max(1);
        rest_hyperbolic(q, j + 1, seen || v != 0, next, visit);
    }
    q[j] = 0;
}

/// Candidates not dominated (smaller height and smaller product) within a bucket.
#[derive(Clone, Default)]
struct Frontier(Vec<Hit>);

impl Frontier {
    fn insert(&mut self, h: Hit) {
        if self.0.iter().any(|o| o.height <= h.height && (o.err < h.err || (o.err == h.err && !h.better(o)))) {
            return;
        }
        self.0.retain(|o| !(h.height <= o.height && (h.err < o.err || (h.err == o.err && h.better(o)))));
        self.0.push(h);
    }
}

fn bucket(h: u64) -> u32 {
    ((h as f64).ln() * 64.0).floor() as u32
}

/// Multiplicative scan over `Π(|q_j| ∨ 1) ≤ q_max`.
pub(crate) fn hyperbolic_scan(t: &Target, q_max: u64) -> Result<Scan> {
    let n = t.n();
    if q_max == 0 {
        return Err(Error::invalid("height bound must be at least 1"));
    }
    let est = q_max as f64 * (1.0 + (q_max as f64).ln()).powi(n as i32 - 1) * 2f64.powi(n as i32 - 1);
    if est > 2e9 || q_max > 50_000_000 {
        return Err(Error::Budget(format!("{est:.2e} lattice points exceed the scan budget")));
    }
    type Acc = (BTreeMap<u32, Frontier>, Option<Hit>);
    let merge_hit = |(mut m, mut exact): Acc, q: &[i64], p: Vec<i64>, r: Vec<f64>| -> Acc {
        let height = q.iter().map(|x| x.unsigned_abs().max(1)).product();
        let h = Hit { q: q.to_vec(), p, height, err: prod_err(&r) };
        if h.err == 0.0 {
            exact = min_exact(exact, Some(h));
        } else {
            m.entry(bucket(height)).or_default().insert(h);
        }
        (m, exact)
    };
    let (buckets, exact): Acc = (0..=q_max as i64)
        .into_par_iter()
        .fold(
            || (BTreeMap::new(), None),
            |acc: Acc, q1| {
                let mut q = vec![0i64; n];
                q[0] = q1;
                let mut acc = Some(acc);
                let mut visit = |q: &[i64]| {
                    let (p, r) = t.residual(q);
                    acc = Some(merge_hit(acc.take().unwrap(), q, p, r));
                };
                rest_hyperbolic(&mut q, 1, q1 != 0, q_max as i64 / q1.max(1), &mut visit);
                acc.unwrap()
            },
        )
        .reduce(
            || (BTreeMap::new(), None),
            |(mut a, ea), (b, eb)| {
                for (k, f) in b {
                    let e = a.entry(k).or_default();
                    for h in f.0 {
                        e.insert(h);
                    }
                }
                (a, min_exact(ea, eb))
            },
        );
    if let Some(h) = exact {
        return Ok(Scan::Exact(h));
    }
    let mut hits: Vec<Hit> = buckets.into_values().flat_map(|f| f.0).collect();
    hits.sort_by(|a, b| (a.height, a.err, &a.q).partial_cmp(&(b.height, b.err, &b.q)).unwrap());
    Ok(Scan::Hits(hits))
}

/// Strict running minima of the error in height order; height 1 is the baseline.
/// `offset` is added to `−ln(err)/ln(height)`.
pub(crate) fn records_from(hits: &[Hit], offset: f64) -> Vec<ApproximationRecord> {
    let mut best = f64::INFINITY;
    let mut out = Vec::new();
    for h in hits {
        if h.err < best {
            best = h.err;
            if h.height >= 2 {
                out.push(ApproximationRecord {
                    q: h.q.clone(),
                    p: h.p.clone(),
                    height: h.height,
                    error: h.err,
                    exponent: -h.err.ln() / (h.height as f64).ln() + offset,
                });
            }
        }
    }
    out
}

pub(crate) fn witness(h: &Hit) -> ApproximationRecord {
    ApproximationRecord { q: h.q.clone(), p: h.p.clone(), height: h.height, error: 0.0, exponent: f64::INFINITY }
}

/// `ω(A)`: records of `‖Aq − p‖∞` over `0 < ‖q‖∞ ≤ q_max`.
pub fn omega_matrix(a: &[Vec<Q>], q_max: u64) -> Result<ExponentEstimate> {
    let t = Target::new(a)?;
    match shell_scan(&t, q_max)? {
        Scan::Exact(h) => Ok(ExponentEstimate::infinite(witness(&h), q_max)),
        Scan::Hits(h) => ExponentEstimate::from_records(records_from(&h, 0.0), q_max, false),
    }
}

/// `ω_×(A)`: records of `Π|(Aq − p)_i|` against `Π(|q_j| ∨ 1) ≤ q_max`.
pub fn omega_mult_matrix(a: &[Vec<Q>], q_max: u64) -> Result<ExponentEstimate> {
    let t = Target::new(a)?;
    match hyperbolic_scan(&t, q_max)? {
        Scan::Exact(h) => Ok(ExponentEstimate::infinite(witness(&h), q_max)),
        Scan::Hits(h) => ExponentEstimate::from_records(records_from(&h, 0.0), q_max, false),
    }
}

/// `−ln Π|(Aq − p)_i| / ln Π(|q_j| ∨ 1)` for one `q` (the nearest `p`).
pub fn mult_exponent_at(a: &[Vec<Q>], q: &[i64]) -> Result<f64> {
    let t = Target::new(a)?;
    let (_, r) = t.residual(q);
    let h: f64 = q.iter().map(|x| x.unsigned_abs().max(1) as f64).product();
    Ok(-prod_err(&r).ln() / h.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{parse_q, qr};

    fn golden() -> Q {
        parse_q("0.618033988749894848204586834365638117720309179805762862135448").unwrap()
    }

    #[test]
    fn rational_row_gives_sentinel() {
        let a = vec![vec![qr(1, 3), qr(2, 5)]];
        let e = omega_matrix(&a, 20).unwrap();
        assert!(e.is_infinite());
        let w = e.rational_witness.unwrap();
        assert_eq!(w.height, 3);
        let m = omega_mult_matrix(&a, 20).unwrap();
        assert!(m.is_infinite());
    }

    #[test]
    fn one_by_one_agrees() {
        let a = vec![vec![golden()]];
        let s = omega_matrix(&a, 10_000).unwrap();
        let m = omega_mult_matrix(&a, 10_000).unwrap();
        assert_eq!(s.records, m.records);
        assert_eq!(s.value, m.value);
        assert!((s.value - 1.0).abs() < 0.15);
    }

    #[test]
    fn frontier_keeps_nondominated() {
        let mk = |h, e| Hit { q: vec![h as i64], p: vec![0], height: h, err: e };
        let mut f = Frontier::default();
        f.insert(mk(10, 0.5));
        f.insert(mk(12, 0.6));
        f.insert(mk(11, 0.1));
        f.insert(mk(9, 0.2));
        let mut hs: Vec<u64> = f.0.iter().map(|h| h.height).collect();
        hs.sort();
        assert_eq!(hs, vec![9, 11]);
    }
}
