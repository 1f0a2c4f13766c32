use std::collections::BTreeMap;

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use super::{e_coords, plucker_embed, q_set, sort_sign, subsets, to_e_vector, enumerate_vertices, RationalSubspace, WedgeVector};
use crate::dioph::ser_f64;
use crate::error::{check_dim, Error, Result};
use crate::homdyn::{omega_dynamical, unipotent, RationalFlowPoint, SChain};
use crate::linalg::{gram_det, independent_subset, mat_vec, projection, rank};
use crate::rational::{fmt_q, to_f64, Q};

/// Affine map `ℰ → ⋀^v R^{M+N}`: `σ ↦ constant + Σ_K σ_K · linear[K]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AffineMapOnE {
    pub m: usize,
    pub n: usize,
    pub degree: usize,
    pub constant: WedgeVector,
    /// Image of each `ℰ` basis vector `e_K`, keyed by `K`.
    #[serde(serialize_with = "ser_linear")]
    pub linear: BTreeMap<Vec<usize>, WedgeVector>,
}

fn ser_linear<S: serde::Serializer>(m: &BTreeMap<Vec<usize>, WedgeVector>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let out: BTreeMap<String, &WedgeVector> = m
        .iter()
        .map(|(k, v)| (k.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(","), v))
        .collect();
    out.serialize(s)
}

impl AffineMapOnE {
    pub fn eval(&self, sigma: &WedgeVector) -> WedgeVector {
        let mut out = self.constant.clone();
        for (k, img) in &self.linear {
            let c = sigma.coord(k);
            if !c.is_zero() {
                out = out.add(&img.scale(&c));
            }
        }
        out
    }

    /// Evaluation on a point given in `ℰ` coordinates.
    pub fn eval_e(&self, v: &[Q]) -> Result<WedgeVector> {
        Ok(self.eval(&super::from_e_vector(v, self.m, self.n)?))
    }

    /// Composition with `g_t`: output coordinate `J` scaled by `Π_{j∈J} r_j`.
    pub fn apply_flow(&self, r: &RationalFlowPoint) -> Result<AffineMapOnE> {
        check_dim(self.m + self.n, r.r.len())?;
        let scale = |w: &WedgeVector| {
            let mut out = WedgeVector::zero(w.n, w.degree);
            for (j, c) in &w.coords {
                let f = j.iter().fold(Q::one(), |p, &i| p * &r.r[i - 1]);
                out.add_term(j.clone(), c * f);
            }
            out
        };
        Ok(AffineMapOnE {
            m: self.m,
            n: self.n,
            degree: self.degree,
            constant: scale(&self.constant),
            linear: self.linear.iter().map(|(k, v)| (k.clone(), scale(v))).collect(),
        })
    }

    /// Output index sets that occur, sorted.
    fn outputs(&self) -> Vec<Vec<usize>> {
        let mut all: Vec<Vec<usize>> = self.constant.coords.keys().cloned().collect();
        for w in self.linear.values() {
            all.extend(w.coords.keys().cloned());
        }
        all.sort();
        all.dedup();
        all
    }
}

/// Replaces the entries of `base` that lie in `cols` (in order) by `rows` (in order).
fn substitute(base: &[usize], cols: &[usize], rows: &[usize]) -> Vec<usize> {
    base.iter()
        .map(|x| match cols.iter().position(|c| c == x) {
            Some(k) => rows[k],
            None => *x,
        })
        .collect()
}

/// `F_τ` with `F_τ(ψ(A)) = u_A τ`. Each term `τ_I e_I` contributes
/// `ε_{IJ} τ_I σ_{K(I,J)} e_J` for `J = (I ∖ C) ∪ R`, where `C ⊂ I` are
/// `q`-indices and `R` are `p`-indices outside `I` with `#R = #C`, and
/// `K(I,J) = R ∪ ({M+1..M+N} ∖ C)`. The sign `ε_{IJ}` is the product of
/// the sorting parities of `I` and of `{M+1..M+N}` with `C` replaced by `R`.
/// `C = ∅` gives the constant part.
pub fn build_f_tau(m: usize, n: usize, tau: &WedgeVector) -> Result<AffineMapOnE> {
    check_dim(m + n, tau.n)?;
    let qs = q_set(m, n);
    let mut constant = WedgeVector::zero(m + n, tau.degree);
    let mut linear: BTreeMap<Vec<usize>, WedgeVector> = BTreeMap::new();
    for (i_set, t_i) in &tau.coords {
        let p_part: Vec<usize> = i_set.iter().copied().filter(|&x| x <= m).collect();
        let q_part: Vec<usize> = i_set.iter().copied().filter(|&x| x > m).collect();
        let free_p: Vec<usize> = (1..=m).filter(|x| !p_part.contains(x)).collect();
        for k in 0..=q_part.len().min(free_p.len()) {
            for c_pos in subsets(q_part.len(), k) {
                let cols: Vec<usize> = c_pos.iter().map(|&i| q_part[i - 1]).collect();
                for r_pos in subsets(free_p.len(), k) {
                    let rows: Vec<usize> = r_pos.iter().map(|&i| free_p[i - 1]).collect();
                    let (j_set, s1) = sort_sign(&substitute(i_set, &cols, &rows)).expect("distinct indices");
                    if k == 0 {
                        constant.add_term(j_set, t_i.clone());
                        continue;
                    }
                    let (k_set, s2) = sort_sign(&substitute(&qs, &cols, &rows)).expect("distinct indices");
                    let eps = Q::from_integer((s1 * s2).into());
                    linear
                        .entry(k_set)
                        .or_insert_with(|| WedgeVector::zero(m + n, tau.degree))
                        .add_term(j_set, eps * t_i);
                }
            }
        }
    }
    linear.retain(|_, w| !w.is_zero());
    Ok(AffineMapOnE { m, n, degree: tau.degree, constant, linear })
}

/// `F_{t,V} = g_t ∘ F_{b_1 ∧ … ∧ b_v}` for the integral basis of `V`.
pub fn build_f_tv(m: usize, n: usize, r: &RationalFlowPoint, v: &RationalSubspace) -> Result<AffineMapOnE> {
    if v.dim() == 0 {
        return Err(Error::invalid("the zero subspace has no covolume map"));
    }
    build_f_tau(m, n, &v.wedge()?)?.apply_flow(r)
}

/// `f_{t,V}(A)²` as the Gram determinant of `g_t u_A b_i`.
pub fn f_tv_sq(a: &[Vec<Q>], r: &RationalFlowPoint, v: &RationalSubspace) -> Result<Q> {
    let u = unipotent(a)?;
    check_dim(u.len(), v.n)?;
    let imgs: Vec<Vec<Q>> = v
        .basis_q()
        .iter()
        .map(|b| mat_vec(&u, b).into_iter().zip(&r.r).map(|(x, s)| x * s).collect())
        .collect();
    Ok(gram_det(&imgs))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityCheck {
    #[serde(with = "crate::rational::serde_q")]
    pub covolume_sq: Q,
    #[serde(with = "crate::rational::serde_q")]
    pub norm_sq: Q,
    pub holds: bool,
}

/// Exact comparison of `f_{t,V}(A)²` with `‖F_{t,V}(ψ(A))‖²`.
pub fn verify_ftv_identity(a: &[Vec<Q>], r: &RationalFlowPoint, v: &RationalSubspace) -> Result<IdentityCheck> {
    let m = a.len();
    let n = a.first().map_or(0, |r| r.len());
    let lhs = f_tv_sq(a, r, v)?;
    let f = build_f_tv(m, n, r, v)?;
    let rhs = f.eval(&plucker_embed(a)?).norm_sq();
    Ok(IdentityCheck { holds: lhs == rhs, covolume_sq: lhs, norm_sq: rhs })
}

/// Affine subspace of `ℰ` in `ℰ` coordinates: the minimal-norm point and directions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AffineSubspaceOfE {
    pub m: usize,
    pub n: usize,
    #[serde(with = "crate::rational::serde_qvec")]
    pub origin: Vec<Q>,
    #[serde(with = "crate::rational::serde_qmat")]
    pub directions: Vec<Vec<Q>>,
    #[serde(skip)]
    ortho: Vec<Vec<f64>>,
}

impl AffineSubspaceOfE {
    pub fn new(m: usize, n: usize, point: Vec<Q>, directions: Vec<Vec<Q>>) -> Result<Self> {
        let dim = e_coords(m, n).len();
        check_dim(dim, point.len())?;
        for d in &directions {
            check_dim(dim, d.len())?;
        }
        let directions = independent_subset(&directions);
        let p = projection(&directions, dim);
        let shift = mat_vec(&p, &point);
        let origin: Vec<Q> = point.iter().zip(&shift).map(|(x, y)| x - y).collect();
        let mut ortho: Vec<Vec<f64>> = Vec::new();
        for d in &directions {
            let mut w: Vec<f64> = d.iter().map(to_f64).collect();
            for _ in 0..2 {
                for u in &ortho {
                    let c: f64 = w.iter().zip(u).map(|(a, b)| a * b).sum();
                    for (x, y) in w.iter_mut().zip(u) {
                        *x -= c * y;
                    }
                }
            }
            let l = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            ortho.push(w.iter().map(|x| x / l).collect());
        }
        Ok(AffineSubspaceOfE { m, n, origin, directions, ortho })
    }

    pub fn whole(m: usize, n: usize) -> Self {
        let dim = e_coords(m, n).len();
        let dirs = (0..dim).map(|i| (0..dim).map(|j| Q::from_integer(((i == j) as i64).into())).collect()).collect();
        Self::new(m, n, vec![Q::zero(); dim], dirs).expect("consistent dimensions")
    }

    pub fn point(m: usize, n: usize, sigma: Vec<Q>) -> Result<Self> {
        Self::new(m, n, sigma, Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.directions.len()
    }

    pub fn contains(&self, x: &[Q]) -> bool {
        if x.len() != self.origin.len() {
            return false;
        }
        let mut rows = self.directions.clone();
        rows.push(x.iter().zip(&self.origin).map(|(a, b)| a - b).collect());
        rank(&rows) == self.dim()
    }

    pub fn contains_matrix(&self, a: &[Vec<Q>]) -> Result<bool> {
        Ok(self.contains(&to_e_vector(&plucker_embed(a)?, self.m, self.n)))
    }
}

fn top_eigenvalue(a: Vec<Vec<f64>>) -> f64 {
    let k = a.len();
    if k == 0 {
        return 0.0;
    }
    let m = nalgebra::DMatrix::from_fn(k, k, |i, j| a[i][j]);
    m.symmetric_eigenvalues().iter().cloned().fold(0.0, f64::max)
}

/// `‖F|𝒜‖ = ‖F(0_𝒜)‖ ∨ sup_{σ∈𝒜, ‖σ−0_𝒜‖≤1} ‖F(σ) − F(0_𝒜)‖`, Euclidean on both
/// sides (the second term is the spectral norm of the restricted linear part).
pub fn norm_f_restricted(f: &AffineMapOnE, asub: &AffineSubspaceOfE) -> Result<f64> {
    if (f.m, f.n) != (asub.m, asub.n) {
        return Err(Error::invalid("map and subspace live in different spaces"));
    }
    let at_origin = to_f64(&f.eval_e(&asub.origin)?.norm_sq()).sqrt();
    if asub.dim() == 0 || f.linear.is_empty() {
        return Ok(at_origin);
    }
    let coords = e_coords(f.m, f.n);
    let outs = f.outputs();
    // columns: images of the orthonormal direction vectors
    let cols: Vec<Vec<f64>> = asub
        .ortho
        .iter()
        .map(|u| {
            outs.iter()
                .map(|j| {
                    coords
                        .iter()
                        .zip(u)
                        .filter(|(_, x)| **x != 0.0)
                        .map(|(k, x)| f.linear.get(k).map_or(0.0, |w| to_f64(&w.coord(j)) * x))
                        .sum()
                })
                .collect()
        })
        .collect();
    let g: Vec<Vec<f64>> = cols
        .iter()
        .map(|a| cols.iter().map(|b| a.iter().zip(b).map(|(x, y)| x * y).sum()).collect())
        .collect();
    let lin = top_eigenvalue(g).max(0.0).sqrt();
    Ok(at_origin.max(lin))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AffinePoint {
    #[serde(serialize_with = "ser_f64")]
    pub s: f64,
    /// `sup_V −ln‖F_{t,V}|𝒜‖ / (s dim V)` over the pool.
    #[serde(serialize_with = "ser_f64")]
    pub inner: f64,
    pub witness: RationalSubspace,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AffineEstimate {
    #[serde(serialize_with = "ser_f64")]
    pub value: f64,
    pub height: i128,
    pub pool_size: usize,
    pub points: Vec<AffinePoint>,
}

const VERTEX_BUDGET: usize = 2_000_000;

fn pool_maps(m: usize, n: usize, h: i128) -> Result<Vec<(RationalSubspace, AffineMapOnE)>> {
    let mut pool = enumerate_vertices(m + n, h, VERTEX_BUDGET)?;
    pool.push(RationalSubspace::full(m + n));
    pool.into_par_iter()
        .map(|v| {
            let f = build_f_tau(m, n, &v.wedge()?)?;
            Ok((v, f))
        })
        .collect()
}

fn inner_sup(maps: &[(RationalSubspace, AffineMapOnE)], asub: &AffineSubspaceOfE, r: &RationalFlowPoint, s: f64) -> Result<(f64, RationalSubspace, Vec<(usize, f64)>)> {
    let mut best = f64::NEG_INFINITY;
    let mut witness = maps[0].0.clone();
    let mut logs = Vec::with_capacity(maps.len());
    for (v, f) in maps {
        let norm = norm_f_restricted(&f.apply_flow(r)?, asub)?;
        let val = -norm.ln() / (s * v.dim() as f64);
        logs.push((v.dim(), norm.ln()));
        if val > best {
            best = val;
            witness = v.clone();
        }
    }
    Ok((best, witness, logs))
}

/// `ω(𝒜; S, s)` over the vertex pool of height `h` (plus `R^{M+N}`), with the
/// limsup read as the max over the final third of the chain.
pub fn omega_affine(asub: &AffineSubspaceOfE, chain: &SChain, h: i128) -> Result<AffineEstimate> {
    if (chain.m, chain.n) != (asub.m, asub.n) || chain.points.is_empty() {
        return Err(Error::invalid("chain must be nonempty and match the subspace shape"));
    }
    let maps = pool_maps(asub.m, asub.n, h)?;
    let points: Vec<AffinePoint> = chain
        .points
        .par_iter()
        .map(|cp| {
            let (inner, witness, _) = inner_sup(&maps, asub, &cp.flow, cp.s)?;
            Ok(AffinePoint { s: cp.s, inner, witness })
        })
        .collect::<Result<_>>()?;
    let inners: Vec<f64> = points.iter().map(|p| p.inner).collect();
    let start = inners.len() - inners.len().div_ceil(3);
    let value = inners[start..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(AffineEstimate { value, height: h, pool_size: maps.len(), points })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AffineComparison {
    /// Finite-chain `ω(A; S, s)`.
    #[serde(serialize_with = "ser_f64")]
    pub lhs: f64,
    /// Finite-pool `ω(𝒜; S, s)`.
    #[serde(serialize_with = "ser_f64")]
    pub rhs: f64,
    /// Max over the final third of `(ln 2 + ln(1 + ‖ψ(A)‖))/s`.
    #[serde(serialize_with = "ser_f64")]
    pub tol: f64,
    /// Pairs `(t, V)` where `Δ ≥ (−ln‖F|𝒜‖ − ln(1+‖ψ(A)‖))/dim V − ln 2` failed.
    pub pointwise_violations: usize,
    pub pointwise_checked: usize,
    pub witnesses: Vec<RationalSubspace>,
    pub holds: bool,
}

/// Checks `ω(A; S, s) ≥ ω(𝒜; S, s) − tol` and, at every chain point and pool
/// vertex, the Minkowski bound used to derive it.
pub fn check_affine_comparison(a: &[Vec<Q>], asub: &AffineSubspaceOfE, chain: &SChain, h: i128) -> Result<AffineComparison> {
    if !asub.contains_matrix(a)? {
        let psi: Vec<String> = to_e_vector(&plucker_embed(a)?, asub.m, asub.n).iter().map(fmt_q).collect();
        return Err(Error::invalid(format!("ψ(A) = ({}) is not in the affine subspace", psi.join(", "))));
    }
    let dynamic = omega_dynamical(a, chain)?;
    let affine = omega_affine(asub, chain, h)?;
    let psi_norm = super::psi_norm(a)?;
    let log_c = (1.0 + psi_norm).ln();
    let maps = pool_maps(asub.m, asub.n, h)?;
    let mut violations = 0;
    let mut checked = 0;
    for (tp, cp) in dynamic.trajectory.iter().zip(&chain.points) {
        let (_, _, logs) = inner_sup(&maps, asub, &cp.flow, cp.s)?;
        for (dim, log_norm) in logs {
            checked += 1;
            let bound = (-log_norm - log_c) / dim as f64 - std::f64::consts::LN_2;
            if tp.delta < bound - 1e-9 * (1.0 + bound.abs()) {
                violations += 1;
            }
        }
    }
    let ss: Vec<f64> = chain.points.iter().map(|p| p.s).collect();
    let start = ss.len() - ss.len().div_ceil(3);
    let tol = ss[start..].iter().map(|s| (std::f64::consts::LN_2 + log_c) / s).fold(0.0, f64::max);
    let holds = violations == 0 && dynamic.value >= affine.value - tol;
    let mut witnesses: Vec<RationalSubspace> = affine.points.iter().map(|p| p.witness.clone()).collect();
    witnesses.sort();
    witnesses.dedup();
    Ok(AffineComparison {
        lhs: dynamic.value,
        rhs: affine.value,
        tol,
        pointwise_violations: violations,
        pointwise_checked: checked,
        witnesses,
        holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{pow2, qi, qr};

    fn flow(r: &[Q]) -> RationalFlowPoint {
        RationalFlowPoint::new(r.to_vec()).unwrap()
    }

    #[test]
    fn one_by_one_axis() {
        let v = RationalSubspace::span(&[vec![0, 1]], 2).unwrap();
        let t0 = flow(&[qi(1), qi(1)]);
        let f = build_f_tv(1, 1, &t0, &v).unwrap();
        let a = qr(2, 5);
        let img = f.eval(&plucker_embed(&[vec![a.clone()]]).unwrap());
        assert_eq!(img.coord(&[1]), a);
        assert_eq!(img.coord(&[2]), qi(1));
        // r = (1/4, 4): f² = a²/16 + 16
        let r = flow(&[qr(1, 4), qi(4)]);
        let c = verify_ftv_identity(&[vec![a.clone()]], &r, &v).unwrap();
        assert!(c.holds);
        assert_eq!(c.covolume_sq, &a * &a / qi(16) + qi(16));
        let z = verify_ftv_identity(&[vec![qi(0)]], &r, &v).unwrap();
        assert_eq!(z.covolume_sq, qi(16));
    }

    #[test]
    fn full_space_has_norm_one() {
        let a = vec![vec![qr(1, 3), qr(-7, 2)], vec![qi(2), qr(5, 9)]];
        let r = flow(&[pow2(3), pow2(-1), pow2(-1), pow2(-1)]);
        let full = RationalSubspace::full(4);
        let c = verify_ftv_identity(&a, &r, &full).unwrap();
        assert!(c.holds);
        assert_eq!(c.norm_sq, qi(1));
        assert_eq!(crate::linalg::det(&crate::homdyn::lattice_rows(&a, &r).unwrap()), Q::one());
    }

    #[test]
    fn identity_on_two_by_two() {
        let a = vec![vec![qr(1, 3), qr(-7, 2)], vec![qi(2), qr(5, 9)]];
        let r = flow(&[pow2(2), pow2(-1), pow2(1), pow2(-2)]);
        for v in enumerate_vertices(4, 1, 1_000_000).unwrap() {
            let c = verify_ftv_identity(&a, &r, &v).unwrap();
            assert!(c.holds, "{v:?}");
        }
    }

    #[test]
    fn restricted_norms() {
        // constant map
        let mut f = build_f_tau(1, 1, &WedgeVector::basis(2, &[1]).unwrap()).unwrap();
        assert!(f.linear.is_empty());
        let whole = AffineSubspaceOfE::whole(1, 1);
        assert_eq!(norm_f_restricted(&f, &whole).unwrap(), 1.0);
        // coordinate projection with a small constant
        f = build_f_tau(1, 1, &WedgeVector::basis(2, &[2]).unwrap()).unwrap();
        f.constant = f.constant.scale(&qr(1, 3));
        assert!((norm_f_restricted(&f, &whole).unwrap() - 1.0).abs() < 1e-12);
        let pt = AffineSubspaceOfE::point(1, 1, vec![qi(2)]).unwrap();
        let expect = to_f64(&(qr(1, 9) + qi(4)));
        assert!((norm_f_restricted(&f, &pt).unwrap() - expect.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn whole_space_estimate_is_small() {
        let chain = SChain::s0_integer_ray(1, 1, 25).unwrap();
        let e = omega_affine(&AffineSubspaceOfE::whole(1, 1), &chain, 2).unwrap();
        assert!(e.value <= 0.1, "{}", e.value);
    }

    #[test]
    fn golden_affine_comparison_holds() {
        let g = crate::rational::parse_q("0.618033988749894848204586834365638117720309179805762862135448").unwrap();
        let chain = SChain::s0_integer_ray(1, 1, 20).unwrap();
        let rep = check_affine_comparison(&[vec![g]], &AffineSubspaceOfE::whole(1, 1), &chain, 2).unwrap();
        assert!(rep.holds, "{rep:?}");
        assert!((rep.lhs - rep.rhs).abs() <= 0.1);
    }
}
