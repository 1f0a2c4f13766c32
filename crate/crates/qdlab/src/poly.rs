//! Multivariate polynomials with rational coefficients.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rational::{parse_q, to_f64, Q};

#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    pub nvars: usize,
    /// `(coefficient, exponents)`; merged and free of zero coefficients.
    pub terms: Vec<(Q, Vec<u32>)>,
}

/// JSON form: `{"coeff": "1/2", "exp": [1, 0]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub coeff: String,
    pub exp: Vec<u32>,
}

impl Poly {
    pub fn new(nvars: usize, terms: Vec<(Q, Vec<u32>)>) -> Result<Self> {
        if nvars == 0 {
            return Err(Error::invalid("polynomial needs at least one variable"));
        }
        let mut merged: Vec<(Q, Vec<u32>)> = Vec::new();
        for (c, e) in terms {
            check_dim(nvars, e.len())?;
            match merged.iter_mut().find(|(_, f)| *f == e) {
                Some(t) => t.0 += c,
                None => merged.push((c, e)),
            }
        }
        merged.retain(|(c, _)| !c.is_zero());
        merged.sort_by(|a, b| a.1.cmp(&b.1));
        Ok(Poly { nvars, terms: merged })
    }

    pub fn from_spec(nvars: usize, spec: &[TermSpec]) -> Result<Self> {
        let terms = spec
            .iter()
            .map(|t| Ok((parse_q(&t.coeff)?, t.exp.clone())))
            .collect::<Result<Vec<_>>>()?;
        Poly::new(nvars, terms)
    }

    /// The coordinate function `x_i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Poly { nvars, terms: vec![(Q::one(), e)] }
    }

    /// `x_i^k`.
    pub fn monomial(nvars: usize, i: usize, k: u32) -> Self {
        let mut e = vec![0; nvars];
        e[i] = k;
        Poly { nvars, terms: vec![(Q::one(), e)] }
    }

    pub fn constant(nvars: usize, c: Q) -> Self {
        Poly::new(nvars, vec![(c, vec![0; nvars])]).unwrap()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(_, e)| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| {
                to_f64(c) * e.iter().zip(x).map(|(&k, &v)| v.powi(k as i32)).product::<f64>()
            })
            .sum()
    }

    pub fn eval_exact(&self, x: &[Q]) -> Q {
        let mut acc = Q::zero();
        for (c, e) in &self.terms {
            let mut t = c.clone();
            for (&k, v) in e.iter().zip(x) {
                for _ in 0..k {
                    t *= v;
                }
            }
            acc += t;
        }
        acc
    }

    pub fn derivative(&self, i: usize) -> Poly {
        let terms = self
            .terms
            .iter()
            .filter(|(_, e)| e[i] > 0)
            .map(|(c, e)| {
                let mut f = e.clone();
                f[i] -= 1;
                (c * Q::from_integer(e[i].into()), f)
            })
            .collect();
        Poly::new(self.nvars, terms).unwrap()
    }

    pub fn gradient(&self) -> Vec<Poly> {
        (0..self.nvars).map(|i| self.derivative(i)).collect()
    }

    /// Sum of absolute coefficients, an upper bound for the sup on the unit cube.
    pub fn l1_coeffs(&self) -> Q {
        self.terms.iter().fold(Q::zero(), |a, (c, _)| a + c.abs())
    }

    /// Linear part `(a, c)` with `f = a·x + c` when `degree ≤ 1`.
    pub fn as_affine(&self) -> Option<(Vec<Q>, Q)> {
        if self.degree() > 1 {
            return None;
        }
        let mut a = vec![Q::zero(); self.nvars];
        let mut c = Q::zero();
        for (k, e) in &self.terms {
            match e.iter().position(|&p| p == 1) {
                Some(i) => a[i] = k.clone(),
                None => c = k.clone(),
            }
        }
        Some((a, c))
    }

    /// Interval enclosure of the values on the box `lo ≤ x ≤ hi`.
    pub fn range_on_box(&self, lo: &[f64], hi: &[f64]) -> (f64, f64) {
        let mut a = 0.0;
        let mut b = 0.0;
        for (c, e) in &self.terms {
            let (mut ml, mut mh) = (1.0f64, 1.0f64);
            for ((&k, &l), &h) in e.iter().zip(lo).zip(hi) {
                let (pl, ph) = pow_interval(l, h, k);
                let cands = [ml * pl, ml * ph, mh * pl, mh * ph];
                ml = cands.iter().cloned().fold(f64::INFINITY, f64::min);
                mh = cands.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            }
            let c = to_f64(c);
            let (tl, th) = if c >= 0.0 { (c * ml, c * mh) } else { (c * mh, c * ml) };
            a += tl;
            b += th;
        }
        (a, b)
    }
}

fn pow_interval(l: f64, h: f64, k: u32) -> (f64, f64) {
    if k == 0 {
        return (1.0, 1.0);
    }
    let (pl, ph) = (l.powi(k as i32), h.powi(k as i32));
    if k.is_multiple_of(2) && l < 0.0 && h > 0.0 {
        (0.0, pl.max(ph))
    } else {
        (pl.min(ph), pl.max(ph))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{qi, qr};

    #[test]
    fn derivative_and_eval() {
        // f = x^2 y + 3 y - 1/2
        let f = Poly::new(
            2,
            vec![(qi(1), vec![2, 1]), (qi(3), vec![0, 1]), (qr(-1, 2), vec![0, 0])],
        )
        .unwrap();
        assert_eq!(f.eval_exact(&[qi(2), qi(1)]), qr(13, 2));
        assert_eq!(f.derivative(0).eval_exact(&[qi(2), qi(5)]), qi(20));
        assert_eq!(f.derivative(1).eval_exact(&[qi(2), qi(5)]), qi(7));
        assert_eq!(f.degree(), 3);
        assert!((f.eval(&[2.0, 1.0]) - 6.5).abs() < 1e-12);
    }

    #[test]
    fn merging_and_affine() {
        let f = Poly::new(1, vec![(qi(2), vec![1]), (qi(-2), vec![1]), (qi(1), vec![0])]).unwrap();
        assert_eq!(f.terms.len(), 1);
        let g = Poly::new(2, vec![(qi(3), vec![1, 0]), (qi(1), vec![0, 0])]).unwrap();
        assert_eq!(g.as_affine().unwrap(), (vec![qi(3), qi(0)], qi(1)));
    }

    #[test]
    fn range_encloses_values() {
        let f = Poly::new(1, vec![(qi(1), vec![2]), (qi(-1), vec![1])]).unwrap();
        let (a, b) = f.range_on_box(&[-1.0], &[1.0]);
        for i in 0..=20 {
            let x = -1.0 + i as f64 / 10.0;
            let v = f.eval(&[x]);
            assert!(a <= v && v <= b);
        }
    }
}
