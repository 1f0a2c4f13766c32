//! Exact LLL reduction and Fincke-Pohst enumeration of shortest vectors.
//!
//! Lattices are given by generator rows (one basis vector per row). All
//! decisions that matter are exact; floats only steer the enumeration.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dot, gram};
use crate::rational::{qr, round_q, to_f64, Q};

pub const DEFAULT_NODE_BUDGET: usize = 5_000_000;

/// Gram-Schmidt vectors and squared lengths.
fn gram_schmidt(b: &[Vec<Q>]) -> (Vec<Vec<Q>>, Vec<Q>) {
    let mut bs: Vec<Vec<Q>> = Vec::with_capacity(b.len());
    let mut nn: Vec<Q> = Vec::with_capacity(b.len());
    for v in b {
        let mut w = v.clone();
        for (s, n) in bs.iter().zip(&nn) {
            if n.is_zero() {
                continue;
            }
            let mu = dot(v, s) / n;
            for (x, y) in w.iter_mut().zip(s) {
                *x -= &mu * y;
            }
        }
        nn.push(dot(&w, &w));
        bs.push(w);
    }
    (bs, nn)
}

#[derive(Clone, Debug)]
pub struct Reduced {
    pub basis: Vec<Vec<Q>>,
    /// `basis = transform · input`, unimodular.
    pub transform: Vec<Vec<BigInt>>,
}

/// LLL reduction with parameter `delta` (use 3/4). Input rows must be independent.
pub fn lll(input: &[Vec<Q>], delta: &Q) -> Result<Reduced> {
    let n = input.len();
    let mut b = input.to_vec();
    let mut t: Vec<Vec<BigInt>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect())
        .collect();
    if n == 0 {
        return Ok(Reduced { basis: b, transform: t });
    }
    let (mut bs, mut nn) = gram_schmidt(&b);
    if nn.iter().any(|x| x.is_zero()) {
        return Err(Error::Degenerate("lattice generators are linearly dependent".into()));
    }
    let mut k = 1;
    let mut steps = 0usize;
    while k < n {
        steps += 1;
        if steps > 1_000_000 {
            return Err(Error::Budget("LLL did not terminate within 10^6 steps".into()));
        }
        for j in (0..k).rev() {
            let mu = dot(&b[k], &bs[j]) / &nn[j];
            let r = round_q(&mu);
            if !r.is_zero() {
                let rq = Q::from_integer(r.clone());
                let (bj, tj) = (b[j].clone(), t[j].clone());
                for (x, y) in b[k].iter_mut().zip(&bj) {
                    *x -= &rq * y;
                }
                for (x, y) in t[k].iter_mut().zip(&tj) {
                    *x -= &r * y;
                }
            }
        }
        let mu = dot(&b[k], &bs[k - 1]) / &nn[k - 1];
        if nn[k] >= (delta - &mu * &mu) * &nn[k - 1] {
            k += 1;
        } else {
            b.swap(k, k - 1);
            t.swap(k, k - 1);
            let (s, m) = gram_schmidt(&b[..=k]);
            bs.splice(..=k, s);
            nn.splice(..=k, m);
            k = k.saturating_sub(1).max(1);
        }
        // b*_k depends on earlier rows only; refresh it after size reduction
        if k < n {
            let (s, m) = gram_schmidt(&b[..=k]);
            bs[k] = s[k].clone();
            nn[k] = m[k].clone();
        }
    }
    Ok(Reduced { basis: b, transform: t })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Shortest {
    /// Integer coefficients with respect to the input rows.
    #[serde(with = "crate::rational::serde_bigvec")]
    pub coeffs: Vec<BigInt>,
    #[serde(with = "crate::rational::serde_qvec")]
    pub vector: Vec<Q>,
    #[serde(with = "crate::rational::serde_q")]
    pub len_sq: Q,
    pub nodes: usize,
}

struct Enum<'a> {
    mu: Vec<Vec<f64>>,
    bn: Vec<f64>,
    gram: &'a [Vec<Q>],
    x: Vec<i64>,
    best: Q,
    best_x: Vec<i64>,
    radius: f64,
    nodes: usize,
    budget: usize,
}

impl Enum<'_> {
    fn exact_len(&self) -> Q {
        let n = self.x.len();
        let mut s = Q::zero();
        for i in 0..n {
            if self.x[i] == 0 {
                continue;
            }
            for j in 0..n {
                if self.x[j] != 0 {
                    s += &self.gram[i][j] * Q::from_integer((self.x[i] * self.x[j]).into());
                }
            }
        }
        s
    }

    fn go(&mut self, level: usize, partial: f64) -> Result<()> {
        let n = self.x.len();
        let c: f64 = -(level + 1..n).map(|j| self.x[j] as f64 * self.mu[j][level]).sum::<f64>();
        let rem = (self.radius - partial).max(0.0);
        let half = (rem / self.bn[level]).sqrt();
        let lo = (c - half).ceil() as i64 - 1;
        let hi = (c + half).floor() as i64 + 1;
        for xi in lo..=hi {
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(Error::Budget(format!(
                    "enumeration exceeded {} nodes; best length^2 so far {}",
                    self.budget,
                    to_f64(&self.best)
                )));
            }
            let p = partial + self.bn[level] * (xi as f64 - c) * (xi as f64 - c);
            if p > self.radius * (1.0 + 1e-9) + 1e-300 {
                continue;
            }
            self.x[level] = xi;
            if level == 0 {
                if self.x.iter().any(|&v| v != 0) {
                    let l = self.exact_len();
                    if l < self.best {
                        self.radius = to_f64(&l) * (1.0 + 1e-9);
                        self.best = l;
                        self.best_x = self.x.clone();
                    }
                }
            } else {
                self.go(level - 1, p)?;
            }
        }
        self.x[level] = 0;
        Ok(())
    }
}

fn idot(a: &[BigInt], b: &[BigInt]) -> BigInt {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lagrange-Gauss reduction on integer rows after clearing denominators.
fn shortest_2d(basis: &[Vec<Q>]) -> Result<Shortest> {
    use num_integer::Integer;
    let den = basis.iter().flatten().fold(BigInt::one(), |l, q| l.lcm(q.denom()));
    let scaled: Vec<Vec<BigInt>> = basis.iter().map(|r| r.iter().map(|q| (q * &den).to_integer()).collect()).collect();
    let (mut u, mut v) = (scaled[0].clone(), scaled[1].clone());
    let (mut tu, mut tv) = (vec![BigInt::one(), BigInt::zero()], vec![BigInt::zero(), BigInt::one()]);
    let (mut nu, mut nv) = (idot(&u, &u), idot(&v, &v));
    let mut nodes = 0;
    loop {
        nodes += 1;
        if nv < nu {
            std::mem::swap(&mut u, &mut v);
            std::mem::swap(&mut tu, &mut tv);
            std::mem::swap(&mut nu, &mut nv);
        }
        if nu.is_zero() {
            return Err(Error::invalid("basis rows are linearly dependent"));
        }
        // nearest integer to <u,v>/|u|², ties toward +∞
        let two = BigInt::from(2);
        let m = (&two * idot(&u, &v) + &nu).div_floor(&(&two * &nu));
        if m.is_zero() {
            break;
        }
        for (x, y) in v.iter_mut().zip(&u) {
            *x -= &m * y;
        }
        for (x, y) in tv.iter_mut().zip(&tu) {
            *x -= &m * y;
        }
        nv = idot(&v, &v);
    }
    if nv.is_zero() {
        return Err(Error::invalid("basis rows are linearly dependent"));
    }
    if tu.iter().find(|c| !c.is_zero()).is_some_and(|c| c.is_negative()) {
        tu.iter_mut().for_each(|c| *c = -&*c);
        u.iter_mut().for_each(|c| *c = -&*c);
    }
    let d = Q::from_integer(den.clone());
    let vector = u.into_iter().map(|x| Q::new(x, den.clone())).collect();
    Ok(Shortest { coeffs: tu, vector, len_sq: Q::from_integer(nu) / (&d * &d), nodes })
}

/// Exact shortest nonzero vector of the lattice generated by the rows of `basis`.
pub fn shortest_vector(basis: &[Vec<Q>], budget: usize) -> Result<Shortest> {
    let n = basis.len();
    if n == 0 {
        return Err(Error::invalid("empty basis"));
    }
    if n > 8 {
        return Err(Error::invalid("enumeration supports dimension at most 8"));
    }
    if n == 2 {
        return shortest_2d(basis);
    }
    let red = lll(basis, &qr(3, 4))?;
    let b = &red.basis;
    let g = gram(b);
    let (bs, nn) = gram_schmidt(b);
    let mu: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if j < i { to_f64(&(dot(&b[i], &bs[j]) / &nn[j])) } else { 0.0 }).collect())
        .collect();
    let bn: Vec<f64> = nn.iter().map(to_f64).collect();
    let (first, _) = (0..n).map(|i| (i, &g[i][i])).min_by(|a, b| a.1.cmp(b.1)).unwrap();
    let mut best_x = vec![0i64; n];
    best_x[first] = 1;
    let best = g[first][first].clone();
    let mut e = Enum {
        mu,
        bn,
        gram: &g,
        x: vec![0; n],
        radius: to_f64(&best) * (1.0 + 1e-9),
        best,
        best_x,
        nodes: 0,
        budget,
    };
    e.go(n - 1, 0.0)?;
    let x = e.best_x.clone();
    // canonical sign: first nonzero coefficient in the reduced basis positive
    let sign = if x.iter().find(|&&v| v != 0).copied().unwrap_or(1) < 0 { -1 } else { 1 };
    let x: Vec<i64> = x.iter().map(|v| v * sign).collect();
    let dim = b[0].len();
    let mut vector = vec![Q::zero(); dim];
    for (i, &xi) in x.iter().enumerate() {
        if xi != 0 {
            let k = Q::from_integer(xi.into());
            for (v, bij) in vector.iter_mut().zip(&b[i]) {
                *v += &k * bij;
            }
        }
    }
    let coeffs = (0..n)
        .map(|j| x.iter().zip(&red.transform).map(|(&xi, row)| BigInt::from(xi) * &row[j]).sum())
        .collect();
    Ok(Shortest { coeffs, vector, len_sq: e.best, nodes: e.nodes })
}

/// Brute-force minimum over coefficient vectors with `|c_i| ≤ k` (test oracle).
pub fn brute_shortest_len_sq(basis: &[Vec<Q>], k: i64) -> Q {
    let n = basis.len();
    let g = gram(basis);
    let mut best: Option<Q> = None;
    let mut c = vec![-k; n];
    loop {
        if c.iter().any(|&v| v != 0) {
            let mut s = Q::zero();
            for i in 0..n {
                for j in 0..n {
                    s += &g[i][j] * Q::from_integer((c[i] * c[j]).into());
                }
            }
            if best.as_ref().is_none_or(|b| &s < b) {
                best = Some(s);
            }
        }
        let mut i = 0;
        loop {
            if i == n {
                return best.unwrap();
            }
            c[i] += 1;
            if c[i] > k {
                c[i] = -k;
                i += 1;
            } else {
                break;
            }
        }
    }
}

pub fn bigint_to_i64(v: &BigInt) -> Option<i64> {
    v.to_i64()
}

pub fn abs_max(v: &[BigInt]) -> BigInt {
    v.iter().map(|x| x.abs()).max().unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::qi;

    fn rows(m: &[&[Q]]) -> Vec<Vec<Q>> {
        m.iter().map(|r| r.to_vec()).collect()
    }

    #[test]
    fn small_examples() {
        let z2 = rows(&[&[qi(1), qi(0)], &[qi(0), qi(1)]]);
        assert_eq!(shortest_vector(&z2, 1000).unwrap().len_sq, qi(1));
        // columns of u_A with A = 1/2: (1,0) and (1/2,1)
        let ua = rows(&[&[qi(1), qi(0)], &[qr(1, 2), qi(1)]]);
        assert_eq!(shortest_vector(&ua, 1000).unwrap().len_sq, qi(1));
        let d = rows(&[&[qi(4), qi(0)], &[qi(0), qr(1, 4)]]);
        let s = shortest_vector(&d, 1000).unwrap();
        assert_eq!(s.len_sq, qr(1, 16));
        assert_eq!(s.vector, vec![qi(0), qr(1, 4)]);
    }

    #[test]
    fn skewed_lattice_matches_brute_force() {
        let b = rows(&[&[qi(1), qi(0), qi(0)], &[qr(7, 3), qr(1, 5), qi(0)], &[qr(-2, 7), qi(3), qr(1, 9)]]);
        let s = shortest_vector(&b, 100_000).unwrap();
        assert_eq!(s.len_sq, brute_shortest_len_sq(&b, 45), "{:?}", s.coeffs);
        // the coefficients reproduce the vector from the input rows
        let mut v = vec![Q::zero(); 3];
        for (c, row) in s.coeffs.iter().zip(&b) {
            for (x, y) in v.iter_mut().zip(row) {
                *x += Q::from_integer(c.clone()) * y;
            }
        }
        assert_eq!(v, s.vector);
    }

    #[test]
    fn lll_transform_is_consistent() {
        let b = rows(&[&[qi(201), qi(37)], &[qi(1648), qi(297)]]);
        let r = lll(&b, &qr(3, 4)).unwrap();
        for (row, t) in r.basis.iter().zip(&r.transform) {
            let mut v = vec![Q::zero(); 2];
            for (c, src) in t.iter().zip(&b) {
                for (x, y) in v.iter_mut().zip(src) {
                    *x += Q::from_integer(c.clone()) * y;
                }
            }
            assert_eq!(&v, row);
        }
    }
}
