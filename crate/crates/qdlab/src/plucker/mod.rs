//! Exterior algebra over Q: wedge products, the Pluecker embedding `ψ`,
//! rational subspaces in Hermite normal form, vertex pools, and the affine
//! maps `F_{t,V}` whose norms are the covolumes `f_{t,V}`.
//!
//! Indices are 1-based as in `e_1, …, e_{M+N}`; an index set is a sorted `Vec`.

mod affine;

pub use affine::{
    build_f_tau, build_f_tv, check_affine_comparison, f_tv_sq, norm_f_restricted, omega_affine, verify_ftv_identity,
    AffineEstimate, AffineMapOnE, AffinePoint, AffineSubspaceOfE, IdentityCheck, AffineComparison,
};

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;
use serde::{Serialize, Serializer};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{gram_det, int_kernel, rank, saturate, to_q_rows};
use crate::rational::{fmt_q, Q};

/// Degree-`k` element of `⋀^k R^n`; zero coordinates are omitted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WedgeVector {
    pub n: usize,
    pub degree: usize,
    pub coords: BTreeMap<Vec<usize>, Q>,
}

impl Serialize for WedgeVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let m: BTreeMap<String, String> = self
            .coords
            .iter()
            .map(|(k, v)| (k.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(","), fmt_q(v)))
            .collect();
        m.serialize(s)
    }
}

/// Sorts `seq`; returns the sorted sequence and the parity of the sorting
/// permutation, or `None` when an index repeats.
pub fn sort_sign(seq: &[usize]) -> Option<(Vec<usize>, i32)> {
    let mut v = seq.to_vec();
    let mut sign = 1;
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some((v, sign))
    }
}

impl WedgeVector {
    pub fn zero(n: usize, degree: usize) -> Self {
        WedgeVector { n, degree, coords: BTreeMap::new() }
    }

    pub fn basis(n: usize, index: &[usize]) -> Result<Self> {
        let (sorted, sign) = sort_sign(index).ok_or_else(|| Error::invalid("repeated index"))?;
        if sorted.iter().any(|&i| i == 0 || i > n) {
            return Err(Error::invalid("index out of range"));
        }
        let mut w = Self::zero(n, index.len());
        w.coords.insert(sorted, Q::from_integer(sign.into()));
        Ok(w)
    }

    pub fn coord(&self, index: &[usize]) -> Q {
        self.coords.get(index).cloned().unwrap_or_else(Q::zero)
    }

    pub fn add_term(&mut self, index: Vec<usize>, c: Q) {
        if c.is_zero() {
            return;
        }
        let e = self.coords.entry(index.clone()).or_insert_with(Q::zero);
        *e += c;
        if e.is_zero() {
            self.coords.remove(&index);
        }
    }

    pub fn add(&self, other: &WedgeVector) -> WedgeVector {
        let mut out = self.clone();
        for (k, v) in &other.coords {
            out.add_term(k.clone(), v.clone());
        }
        out
    }

    pub fn scale(&self, c: &Q) -> WedgeVector {
        let mut out = WedgeVector::zero(self.n, self.degree);
        for (k, v) in &self.coords {
            out.add_term(k.clone(), v * c);
        }
        out
    }

    pub fn norm_sq(&self) -> Q {
        self.coords.values().fold(Q::zero(), |s, v| s + v * v)
    }

    pub fn is_zero(&self) -> bool {
        self.coords.is_empty()
    }

    /// `self ∧ v` for a vector `v ∈ R^n`.
    pub fn wedge_vec(&self, v: &[Q]) -> Result<WedgeVector> {
        check_dim(self.n, v.len())?;
        let mut out = WedgeVector::zero(self.n, self.degree + 1);
        for (idx, c) in &self.coords {
            for (i, x) in v.iter().enumerate() {
                if x.is_zero() {
                    continue;
                }
                let mut seq = idx.clone();
                seq.push(i + 1);
                if let Some((sorted, sign)) = sort_sign(&seq) {
                    out.add_term(sorted, c * x * Q::from_integer(sign.into()));
                }
            }
        }
        Ok(out)
    }
}

/// `v_1 ∧ … ∧ v_k`.
pub fn wedge(vectors: &[Vec<Q>]) -> Result<WedgeVector> {
    let Some(first) = vectors.first() else {
        return Err(Error::invalid("wedge of no vectors"));
    };
    let n = first.len();
    if vectors.len() > n {
        return Err(Error::invalid("more vectors than dimensions"));
    }
    let mut w = WedgeVector { n, degree: 0, coords: BTreeMap::from([(Vec::new(), Q::from_integer(1.into()))]) };
    for v in vectors {
        w = w.wedge_vec(v)?;
    }
    Ok(w)
}

/// Squared covolume (Gram determinant) of the group generated by independent `vectors`.
pub fn covolume_sq(vectors: &[Vec<Q>]) -> Q {
    gram_det(vectors)
}

fn shape(a: &[Vec<Q>]) -> Result<(usize, usize)> {
    let m = a.len();
    if m == 0 || a[0].is_empty() || a.iter().any(|r| r.len() != a[0].len()) {
        return Err(Error::invalid("matrix must be nonempty and rectangular"));
    }
    Ok((m, a[0].len()))
}

/// `{M+1, …, M+N}`, the index of `⋀(0 ⊕ e_j)`.
pub fn q_set(m: usize, n: usize) -> Vec<usize> {
    (m + 1..=m + n).collect()
}

/// `ψ(A) = ⋀_j (Ae_j ⊕ e_j) − ⋀_j (0 ⊕ e_j)`.
pub fn plucker_embed(a: &[Vec<Q>]) -> Result<WedgeVector> {
    let (m, n) = shape(a)?;
    let cols: Vec<Vec<Q>> = (0..n)
        .map(|j| {
            let mut v: Vec<Q> = a.iter().map(|r| r[j].clone()).collect();
            v.extend((0..n).map(|k| Q::from_integer(((k == j) as i64).into())));
            v
        })
        .collect();
    let mut w = wedge(&cols)?;
    w.add_term(q_set(m, n), Q::from_integer((-1).into()));
    Ok(w)
}

/// All `k`-subsets of `{1..n}` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..=n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(1, n, k, &mut Vec::new(), &mut out);
    out
}

/// Coordinates of `ℰ`: the `N`-subsets of `{1..M+N}` other than `{M+1..M+N}`.
pub fn e_coords(m: usize, n: usize) -> Vec<Vec<usize>> {
    let qs = q_set(m, n);
    subsets(m + n, n).into_iter().filter(|s| s != &qs).collect()
}

pub fn to_e_vector(w: &WedgeVector, m: usize, n: usize) -> Vec<Q> {
    e_coords(m, n).iter().map(|k| w.coord(k)).collect()
}

pub fn from_e_vector(v: &[Q], m: usize, n: usize) -> Result<WedgeVector> {
    let coords = e_coords(m, n);
    check_dim(coords.len(), v.len())?;
    let mut w = WedgeVector::zero(m + n, n);
    for (k, x) in coords.into_iter().zip(v) {
        w.add_term(k, x.clone());
    }
    Ok(w)
}

/// Rational subspace of `R^n`, stored as the row HNF basis of `V ∩ Z^n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct RationalSubspace {
    pub n: usize,
    pub basis: Vec<Vec<i128>>,
}

impl RationalSubspace {
    pub fn span(vectors: &[Vec<i128>], n: usize) -> Result<Self> {
        if vectors.iter().any(|v| v.len() != n) {
            return Err(Error::invalid("vector length differs from ambient dimension"));
        }
        let nonzero: Vec<Vec<i128>> = vectors.iter().filter(|v| v.iter().any(|&x| x != 0)).cloned().collect();
        let basis = if nonzero.is_empty() { Vec::new() } else { saturate(&nonzero, n)? };
        Ok(RationalSubspace { n, basis })
    }

    pub fn zero(n: usize) -> Self {
        RationalSubspace { n, basis: Vec::new() }
    }

    pub fn full(n: usize) -> Self {
        let basis = (0..n).map(|i| (0..n).map(|j| i128::from(i == j)).collect()).collect();
        RationalSubspace { n, basis }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis_q(&self) -> Vec<Vec<Q>> {
        to_q_rows(&self.basis)
    }

    pub fn contains_vec(&self, v: &[i128]) -> bool {
        let mut rows = self.basis.clone();
        rows.push(v.to_vec());
        rank(&to_q_rows(&rows)) == self.dim()
    }

    pub fn contains(&self, other: &RationalSubspace) -> bool {
        other.basis.iter().all(|v| self.contains_vec(v))
    }

    /// `V + W`.
    pub fn join(&self, other: &RationalSubspace) -> Result<RationalSubspace> {
        let mut rows = self.basis.clone();
        rows.extend(other.basis.iter().cloned());
        Self::span(&rows, self.n)
    }

    /// `V ∩ W`.
    pub fn meet(&self, other: &RationalSubspace) -> Result<RationalSubspace> {
        // x ∈ V ∩ W iff x ⟂ V^⟂ and x ⟂ W^⟂
        let perp_of = |s: &RationalSubspace| -> Result<Vec<Vec<i128>>> {
            if s.dim() == 0 {
                Ok(RationalSubspace::full(s.n).basis)
            } else {
                int_kernel(&s.basis, s.n)
            }
        };
        let mut perp = perp_of(self)?;
        perp.extend(perp_of(other)?);
        let perp: Vec<Vec<i128>> = perp.into_iter().filter(|v| v.iter().any(|&x| x != 0)).collect();
        if perp.is_empty() {
            return Ok(RationalSubspace::full(self.n));
        }
        let k = int_kernel(&perp, self.n)?;
        Self::span(&k, self.n)
    }

    /// `b_1 ∧ … ∧ b_v` of the integral basis (the empty wedge is `1`).
    pub fn wedge(&self) -> Result<WedgeVector> {
        if self.dim() == 0 {
            return Ok(WedgeVector { n: self.n, degree: 0, coords: BTreeMap::from([(Vec::new(), Q::from_integer(1.into()))]) });
        }
        wedge(&self.basis_q())
    }
}

/// Primitive vectors with entries in `[−h, h]`, first nonzero entry positive.
pub fn primitive_vectors(n: usize, h: i128) -> Vec<Vec<i128>> {
    let mut out = Vec::new();
    let mut v = vec![-h; n];
    loop {
        let first = v.iter().find(|&&x| x != 0).copied();
        if first.is_some_and(|f| f > 0) && crate::linalg::gcd_vec(&v) == 1 {
            out.push(v.clone());
        }
        let mut i = n;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            v[i] += 1;
            if v[i] > h {
                v[i] = -h;
            } else {
                break;
            }
        }
    }
}

/// Subspaces of dimensions `1..n−1` spanned by primitive vectors of height `≤ h`.
/// Coordinate subspaces are always included.
pub fn enumerate_vertices(n: usize, h: i128, budget: usize) -> Result<Vec<RationalSubspace>> {
    if n < 2 || h < 1 {
        return Err(Error::invalid("need n ≥ 2 and h ≥ 1"));
    }
    let pool = primitive_vectors(n, h);
    let mut all: BTreeSet<RationalSubspace> = BTreeSet::new();
    let mut layer: BTreeSet<RationalSubspace> = BTreeSet::new();
    for v in &pool {
        layer.insert(RationalSubspace::span(std::slice::from_ref(v), n)?);
    }
    let mut work = 0usize;
    for dim in 1..n {
        if dim > 1 {
            let mut next = BTreeSet::new();
            for s in &layer {
                for v in &pool {
                    work += 1;
                    if work > budget {
                        return Err(Error::Budget(format!(
                            "vertex enumeration needs more than {budget} span computations ({} vectors in the pool)",
                            pool.len()
                        )));
                    }
                    if s.contains_vec(v) {
                        continue;
                    }
                    let mut rows = s.basis.clone();
                    rows.push(v.clone());
                    next.insert(RationalSubspace::span(&rows, n)?);
                }
            }
            layer = next;
        }
        all.extend(layer.iter().cloned());
    }
    for k in 1..n {
        for idx in subsets(n, k) {
            let rows: Vec<Vec<i128>> = idx.iter().map(|&i| (0..n).map(|j| i128::from(j + 1 == i)).collect()).collect();
            all.insert(RationalSubspace::span(&rows, n)?);
        }
    }
    Ok(all.into_iter().collect())
}

/// `‖ψ(A)‖` on the float track.
pub fn psi_norm(a: &[Vec<Q>]) -> Result<f64> {
    Ok(crate::rational::to_f64(&plucker_embed(a)?.norm_sq()).sqrt())
}

/// Exact check that `ψ(A + B) = ψ(A) + ψ(B)` (true when `M = 1` or `N = 1`).
pub fn is_additive(a: &[Vec<Q>], b: &[Vec<Q>]) -> Result<bool> {
    let sum: Vec<Vec<Q>> = a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect()).collect();
    Ok(plucker_embed(&sum)? == plucker_embed(a)?.add(&plucker_embed(b)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{qi, qr};

    fn e(n: usize, i: usize) -> Vec<Q> {
        (1..=n).map(|j| qi((i == j) as i64)).collect()
    }

    #[test]
    fn wedge_examples() {
        let w = wedge(&[e(2, 1), e(2, 2)]).unwrap();
        assert_eq!(w.coords, BTreeMap::from([(vec![1, 2], qi(1))]));
        let v = vec![qi(1), qr(2, 3), qi(-4)];
        assert!(wedge(&[v.clone(), v]).unwrap().is_zero());
        let a: Vec<Q> = vec![qi(1), qi(0), qi(1), qi(0)];
        let b: Vec<Q> = vec![qi(0), qi(1), qi(0), qi(1)];
        let w = wedge(&[a, b]).unwrap();
        let expect = BTreeMap::from([(vec![1, 2], qi(1)), (vec![1, 4], qi(1)), (vec![2, 3], qi(-1)), (vec![3, 4], qi(1))]);
        assert_eq!(w.coords, expect);
    }

    #[test]
    fn embedding_examples() {
        let w = plucker_embed(&[vec![qr(3, 7)]]).unwrap();
        assert_eq!(w.coords, BTreeMap::from([(vec![1], qr(3, 7))]));
        let w = plucker_embed(&[vec![qi(2)], vec![qi(-5)]]).unwrap();
        assert_eq!(w.coords, BTreeMap::from([(vec![1], qi(2)), (vec![2], qi(-5))]));
        let id = vec![vec![qi(1), qi(0)], vec![qi(0), qi(1)]];
        let w = plucker_embed(&id).unwrap();
        let expect = BTreeMap::from([(vec![1, 2], qi(1)), (vec![1, 4], qi(1)), (vec![2, 3], qi(-1))]);
        assert_eq!(w.coords, expect);
        assert_eq!(w.coord(&q_set(2, 2)), qi(0));
    }

    #[test]
    fn linear_when_one_side_is_one() {
        let a = vec![vec![qr(1, 3), qi(2)]];
        let b = vec![vec![qr(-5, 2), qr(1, 7)]];
        assert!(is_additive(&a, &b).unwrap());
        let a = vec![vec![qi(1), qi(0)], vec![qi(0), qi(1)]];
        assert!(!is_additive(&a, &a).unwrap());
    }

    #[test]
    fn covolumes() {
        assert_eq!(covolume_sq(&[vec![qi(3), qi(4)]]), qi(25));
        assert_eq!(covolume_sq(&[e(3, 1), vec![qi(1), qi(1), qi(0)]]), qi(1));
        assert_eq!(covolume_sq(&[e(4, 1), e(4, 2), e(4, 3), e(4, 4)]), qi(1));
    }

    #[test]
    fn vertices_small() {
        let v = enumerate_vertices(2, 1, 1000).unwrap();
        assert_eq!(v.len(), 4);
        let a = RationalSubspace::span(&[vec![-1, -1]], 2).unwrap();
        let b = RationalSubspace::span(&[vec![1, 1]], 2).unwrap();
        assert_eq!(a, b);
        assert!(v.contains(&a));
        let v3 = enumerate_vertices(3, 1, 100_000).unwrap();
        for s in &v3 {
            assert_eq!(&RationalSubspace::span(&s.basis, 3).unwrap(), s);
        }
        assert!(v3.contains(&RationalSubspace::span(&[vec![0, 0, 1]], 3).unwrap()));
    }

    #[test]
    fn lattice_operations() {
        let x = RationalSubspace::span(&[vec![2, 0, 0]], 3).unwrap();
        assert_eq!(x.basis, vec![vec![1, 0, 0]]);
        let p = RationalSubspace::span(&[vec![1, 0, 0], vec![0, 1, 0]], 3).unwrap();
        let q = RationalSubspace::span(&[vec![0, 1, 0], vec![0, 0, 1]], 3).unwrap();
        assert_eq!(p.meet(&q).unwrap(), RationalSubspace::span(&[vec![0, 1, 0]], 3).unwrap());
        assert_eq!(p.join(&q).unwrap(), RationalSubspace::full(3));
        assert!(p.contains(&x));
        assert!(!q.contains(&x));
    }
}
