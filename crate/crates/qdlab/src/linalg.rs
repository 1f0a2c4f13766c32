//! Exact linear algebra over Q and Z. Matrices are row-major `Vec<Vec<_>>`.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::Q;

pub fn dot(a: &[Q], b: &[Q]) -> Q {
    a.iter().zip(b).fold(Q::zero(), |acc, (x, y)| acc + x * y)
}

pub fn norm_sq(a: &[Q]) -> Q {
    dot(a, a)
}

pub fn transpose<T: Clone>(m: &[Vec<T>]) -> Vec<Vec<T>> {
    if m.is_empty() {
        return Vec::new();
    }
    (0..m[0].len()).map(|j| m.iter().map(|r| r[j].clone()).collect()).collect()
}

pub fn mat_vec(m: &[Vec<Q>], v: &[Q]) -> Vec<Q> {
    m.iter().map(|r| dot(r, v)).collect()
}

pub fn mat_mul(a: &[Vec<Q>], b: &[Vec<Q>]) -> Vec<Vec<Q>> {
    let bt = transpose(b);
    a.iter().map(|r| bt.iter().map(|c| dot(r, c)).collect()).collect()
}

pub fn identity(n: usize) -> Vec<Vec<Q>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { Q::one() } else { Q::zero() }).collect())
        .collect()
}

/// Reduced row echelon form and pivot columns.
pub fn rref(rows: &[Vec<Q>]) -> (Vec<Vec<Q>>, Vec<usize>) {
    let mut a: Vec<Vec<Q>> = rows.to_vec();
    let m = a.len();
    let n = if m == 0 { 0 } else { a[0].len() };
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..n {
        if r == m {
            break;
        }
        let Some(p) = (r..m).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(r, p);
        let inv = a[r][c].recip();
        for x in a[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..m {
            if i != r && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                for j in c..n {
                    let t = &f * &a[r][j];
                    a[i][j] -= t;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    a.truncate(r);
    (a, pivots)
}

pub fn rank(rows: &[Vec<Q>]) -> usize {
    rref(rows).1.len()
}

/// Basis of `{x : rows · x = 0}`.
pub fn nullspace(rows: &[Vec<Q>], ncols: usize) -> Vec<Vec<Q>> {
    let (r, piv) = rref(rows);
    let free: Vec<usize> = (0..ncols).filter(|c| !piv.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut x = vec![Q::zero(); ncols];
            x[f] = Q::one();
            for (i, &p) in piv.iter().enumerate() {
                x[p] = -r[i][f].clone();
            }
            x
        })
        .collect()
}

pub fn det(m: &[Vec<Q>]) -> Q {
    let n = m.len();
    let mut a = m.to_vec();
    let mut d = Q::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !a[i][c].is_zero()) else {
            return Q::zero();
        };
        if p != c {
            a.swap(p, c);
            d = -d;
        }
        d *= &a[c][c];
        let inv = a[c][c].recip();
        for i in c + 1..n {
            if a[i][c].is_zero() {
                continue;
            }
            let f = &a[i][c] * &inv;
            for j in c..n {
                let t = &f * &a[c][j];
                a[i][j] -= t;
            }
        }
    }
    d
}

pub fn inverse(m: &[Vec<Q>]) -> Option<Vec<Vec<Q>>> {
    let n = m.len();
    let aug: Vec<Vec<Q>> = m
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { Q::one() } else { Q::zero() }));
            row
        })
        .collect();
    let (r, piv) = rref(&aug);
    if piv.len() < n || piv[n - 1] >= n {
        return None;
    }
    Some(r.into_iter().map(|row| row[n..].to_vec()).collect())
}

pub fn gram(vectors: &[Vec<Q>]) -> Vec<Vec<Q>> {
    vectors
        .iter()
        .map(|a| vectors.iter().map(|b| dot(a, b)).collect())
        .collect()
}

/// Squared covolume of the group generated by `vectors`.
pub fn gram_det(vectors: &[Vec<Q>]) -> Q {
    if vectors.is_empty() {
        return Q::one();
    }
    det(&gram(vectors))
}

/// Orthogonal projection onto the span of `dirs` (assumed independent).
pub fn projection(dirs: &[Vec<Q>], n: usize) -> Vec<Vec<Q>> {
    if dirs.is_empty() {
        return vec![vec![Q::zero(); n]; n];
    }
    let g_inv = inverse(&gram(dirs)).expect("independent directions");
    let dt = transpose(dirs); // n x k
    let tmp = mat_mul(&dt, &g_inv); // n x k
    mat_mul(&tmp, dirs)
}

/// Maximal independent subset, in input order.
pub fn independent_subset(vectors: &[Vec<Q>]) -> Vec<Vec<Q>> {
    let mut out: Vec<Vec<Q>> = Vec::new();
    for v in vectors {
        let mut trial = out.clone();
        trial.push(v.clone());
        if rank(&trial) == trial.len() {
            out = trial;
        }
    }
    out
}

pub fn to_q_rows(m: &[Vec<i128>]) -> Vec<Vec<Q>> {
    m.iter()
        .map(|r| r.iter().map(|&x| BigRational::from_integer(x.into())).collect())
        .collect()
}

fn overflow() -> Error {
    Error::Budget("integer overflow in lattice reduction".into())
}

fn egcd(a: i128, b: i128) -> (i128, i128, i128) {
    // returns (g, s, t) with s a + t b = g >= 0
    let (mut r0, mut r1) = (a, b);
    let (mut s0, mut s1) = (1i128, 0i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0.div_euclid(r1);
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 < 0 {
        (-r0, -s0, -t0)
    } else {
        (r0, s0, t0)
    }
}

fn comb(x: i128, a: i128, y: i128, b: i128) -> Result<i128> {
    x.checked_mul(a)
        .and_then(|p| y.checked_mul(b).and_then(|q| p.checked_add(q)))
        .ok_or_else(overflow)
}

/// Basis of the integer kernel `{x ∈ Z^n : rows · x = 0}`.
pub fn int_kernel(rows: &[Vec<i128>], n: usize) -> Result<Vec<Vec<i128>>> {
    let mut a: Vec<Vec<i128>> = rows.to_vec();
    let mut u: Vec<Vec<i128>> = (0..n)
        .map(|i| (0..n).map(|j| i128::from(i == j)).collect())
        .collect(); // u[row][col], columns are transforms
    let mut r = 0;
    for i in 0..a.len() {
        if r == n {
            break;
        }
        for j in r + 1..n {
            let (x, y) = (a[i][r], a[i][j]);
            if y == 0 {
                continue;
            }
            let (g, s, t) = egcd(x, y);
            let (xa, ya) = (x / g, y / g);
            for m in a.iter_mut().chain(u.iter_mut()) {
                let (cr, cj) = (m[r], m[j]);
                m[r] = comb(cr, s, cj, t)?;
                m[j] = comb(cr, -ya, cj, xa)?;
            }
        }
        if a[i][r] != 0 {
            r += 1;
        }
    }
    Ok((r..n).map(|c| u.iter().map(|row| row[c]).collect()).collect())
}

/// Row Hermite normal form of a full-row-rank integer matrix.
pub fn row_hnf(rows: &[Vec<i128>]) -> Result<Vec<Vec<i128>>> {
    let mut a = rows.to_vec();
    let m = a.len();
    if m == 0 {
        return Ok(a);
    }
    let n = a[0].len();
    let mut pr = 0;
    for c in 0..n {
        if pr == m {
            break;
        }
        for i in pr + 1..m {
            let (x, y) = (a[pr][c], a[i][c]);
            if y == 0 {
                continue;
            }
            let (g, s, t) = egcd(x, y);
            let (xa, ya) = (x / g, y / g);
            for k in 0..n {
                let (p, q) = (a[pr][k], a[i][k]);
                a[pr][k] = comb(p, s, q, t)?;
                a[i][k] = comb(p, -ya, q, xa)?;
            }
        }
        if a[pr][c] == 0 {
            continue;
        }
        if a[pr][c] < 0 {
            for x in a[pr].iter_mut() {
                *x = -*x;
            }
        }
        let p = a[pr][c];
        for i in 0..pr {
            let q = a[i][c].div_euclid(p);
            if q != 0 {
                for k in 0..n {
                    a[i][k] = comb(a[i][k], 1, a[pr][k], -q)?;
                }
            }
        }
        pr += 1;
    }
    a.truncate(pr);
    Ok(a)
}

/// Basis (in row HNF) of `span(vectors) ∩ Z^n`.
pub fn saturate(vectors: &[Vec<i128>], n: usize) -> Result<Vec<Vec<i128>>> {
    let perp = int_kernel(vectors, n)?;
    let sat = int_kernel(&perp, n)?;
    row_hnf(&sat)
}

pub fn gcd_vec(v: &[i128]) -> i128 {
    v.iter().fold(0i128, |g, &x| egcd(g, x).0)
}

pub fn is_zero_vec(v: &[Q]) -> bool {
    v.iter().all(|x| x.is_zero())
}

pub fn max_abs(v: &[Q]) -> Q {
    v.iter().map(|x| x.abs()).max().unwrap_or_else(Q::zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{qi, qr};

    #[test]
    fn determinant_and_inverse() {
        let m = vec![vec![qi(2), qi(1)], vec![qi(7), qi(4)]];
        assert_eq!(det(&m), qi(1));
        let inv = inverse(&m).unwrap();
        assert_eq!(mat_mul(&m, &inv), identity(2));
        assert!(inverse(&[vec![qi(1), qi(2)], vec![qi(2), qi(4)]]).is_none());
    }

    #[test]
    fn gram_determinant_example() {
        let v = vec![vec![qi(1), qi(0), qi(0)], vec![qi(1), qi(1), qi(0)]];
        assert_eq!(gram_det(&v), qi(1));
        assert_eq!(gram_det(&[vec![qi(3), qi(4)]]), qi(25));
    }

    #[test]
    fn nullspace_is_annihilated() {
        let rows = vec![vec![qi(1), qi(2), qi(3)], vec![qr(1, 2), qi(1), qi(0)]];
        let ns = nullspace(&rows, 3);
        assert_eq!(ns.len(), 1);
        for r in &rows {
            assert!(dot(r, &ns[0]).is_zero());
        }
    }

    #[test]
    fn saturation_recovers_full_lattice() {
        let v = vec![vec![2, 0, 0], vec![0, 2, 0]];
        let s = saturate(&v, 3).unwrap();
        assert_eq!(s, vec![vec![1, 0, 0], vec![0, 1, 0]]);
        let w = [vec![2, 2], vec![-1, -1]];
        // rank-deficient input: row HNF of the saturation is the primitive vector
        let s = saturate(&w[..1], 2).unwrap();
        assert_eq!(s, vec![vec![1, 1]]);
    }

    #[test]
    fn hnf_is_canonical() {
        let a = row_hnf(&[vec![1, 1, 0], vec![0, 1, 1]]).unwrap();
        let b = row_hnf(&[vec![1, 2, 1], vec![0, -1, -1]]).unwrap();
        assert_eq!(a, b);
        assert_eq!(row_hnf(&a).unwrap(), a);
    }
}
