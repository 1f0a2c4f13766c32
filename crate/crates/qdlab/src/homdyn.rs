//! The dynamical side: `u_A`, diagonal flows `g_t`, shortest vectors and
//! `Δ(g_t u_A Z^{M+N})`, the correspondence map `ξ`, the multiplicative
//! criterion score and membership in `W_{κ,t}`.
//!
//! Conventions: `u_A = [[I_M, A], [0, I_N]]` acts on column vectors `(p, q)`,
//! so lattice vectors are `(p + Aq, q)`. The ray used for `s₀` is
//! `t = (τ/M, …, τ/M, −τ/N, …, −τ/N)` with `s₀(t) = τ`, and `𝔞₊` is the cone
//! `t_i ≥ 0` for `i ≤ M`, `t_i ≤ 0` for `i > M`.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::dioph::{self, ser_f64, ExponentEstimate, Method};
use crate::error::{Error, Result};
use crate::geometry::Norm;
use crate::lattice::{self, DEFAULT_NODE_BUDGET};
use crate::linalg::{det, identity};
use crate::rational::{ln_abs, pow_q, q_from_f64, qi, Q};
use crate::stats::linear_fit;

fn shape(a: &[Vec<Q>]) -> Result<(usize, usize)> {
    let m = a.len();
    if m == 0 || a[0].is_empty() || a.iter().any(|r| r.len() != a[0].len()) {
        return Err(Error::invalid("matrix must be nonempty and rectangular"));
    }
    Ok((m, a[0].len()))
}

/// `u_A`, an `(M+N) × (M+N)` unipotent matrix.
pub fn unipotent(a: &[Vec<Q>]) -> Result<Vec<Vec<Q>>> {
    let (m, n) = shape(a)?;
    let mut u = identity(m + n);
    for i in 0..m {
        for j in 0..n {
            u[i][m + j] = a[i][j].clone();
        }
    }
    Ok(u)
}

/// `t ∈ 𝔞` on the float track.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowPoint {
    pub t: Vec<f64>,
}

impl FlowPoint {
    pub fn new(t: Vec<f64>) -> Result<Self> {
        let scale = t.iter().fold(1.0f64, |a, x| a.max(x.abs()));
        if t.is_empty() || t.iter().sum::<f64>().abs() > 1e-12 * scale {
            return Err(Error::invalid("flow coordinates must sum to zero"));
        }
        Ok(FlowPoint { t })
    }

    /// Point on the `s₀` ray at parameter `τ`.
    pub fn s0_ray(m: usize, n: usize, tau: f64) -> Self {
        let mut t = vec![tau / m as f64; m];
        t.extend(std::iter::repeat_n(-tau / n as f64, n));
        FlowPoint { t }
    }

    /// Dyadic multipliers approximating `e^{t_i}`; the last one is chosen so the
    /// product is exactly one.
    pub fn to_rational(&self) -> RationalFlowPoint {
        let k = self.t.len();
        let mut r: Vec<Q> = self.t[..k - 1].iter().map(|x| q_from_f64(x.exp())).collect();
        let prod = r.iter().fold(Q::one(), |p, x| p * x);
        r.push(prod.recip());
        RationalFlowPoint { r }
    }
}

/// Exact multipliers `r_i = e^{t_i}` with `Π r_i = 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RationalFlowPoint {
    #[serde(with = "crate::rational::serde_qvec")]
    pub r: Vec<Q>,
}

impl RationalFlowPoint {
    pub fn new(r: Vec<Q>) -> Result<Self> {
        if r.is_empty() || r.iter().any(|x| !x.is_positive()) {
            return Err(Error::invalid("multipliers must be positive"));
        }
        if r.iter().fold(Q::one(), |p, x| p * x) != Q::one() {
            return Err(Error::invalid("multipliers must have product one"));
        }
        Ok(RationalFlowPoint { r })
    }

    /// `r_i = 2^{kN}` on the first `M` coordinates and `2^{−kM}` on the rest.
    pub fn dyadic_ray(m: usize, n: usize, k: u32) -> Self {
        let up = crate::rational::pow2((k as usize * n) as i64);
        let down = crate::rational::pow2(-((k as usize * m) as i64));
        let mut r = vec![up; m];
        r.extend(std::iter::repeat_n(down, n));
        RationalFlowPoint { r }
    }

    pub fn t(&self) -> Vec<f64> {
        self.r.iter().map(ln_abs).collect()
    }

    /// `max_i max(r_i, 1/r_i) = e^{‖t‖∞}`.
    pub fn sup_multiplier(&self) -> Q {
        self.r
            .iter()
            .map(|x| if x >= &Q::one() { x.clone() } else { x.recip() })
            .max()
            .unwrap()
    }
}

pub fn flow_matrix(t: &FlowPoint) -> Vec<Vec<f64>> {
    let k = t.t.len();
    (0..k).map(|i| (0..k).map(|j| if i == j { t.t[i].exp() } else { 0.0 }).collect()).collect()
}

pub fn flow_matrix_exact(r: &RationalFlowPoint) -> Vec<Vec<Q>> {
    let k = r.r.len();
    (0..k)
        .map(|i| (0..k).map(|j| if i == j { r.r[i].clone() } else { Q::zero() }).collect())
        .collect()
}

/// Generator rows of `g_t u_A Z^{M+N}`: row `j` is the image of `e_j`.
pub fn lattice_rows(a: &[Vec<Q>], r: &RationalFlowPoint) -> Result<Vec<Vec<Q>>> {
    let u = unipotent(a)?;
    let k = u.len();
    if r.r.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: r.r.len() });
    }
    Ok((0..k).map(|j| (0..k).map(|i| &r.r[i] * &u[i][j]).collect()).collect())
}

/// `det(g_t u_A)`.
pub fn covolume(a: &[Vec<Q>], r: &RationalFlowPoint) -> Result<Q> {
    Ok(det(&lattice_rows(a, r)?).abs())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LatticeMinimum {
    /// Integer coordinates `(p, q)` of the minimizer.
    #[serde(with = "crate::rational::serde_bigvec")]
    pub coeffs: Vec<BigInt>,
    #[serde(with = "crate::rational::serde_qvec")]
    pub vector: Vec<Q>,
    #[serde(with = "crate::rational::serde_q")]
    pub len_sq: Q,
}

/// Exact shortest nonzero vector of the lattice spanned by `rows`.
pub fn shortest_vector(rows: &[Vec<Q>]) -> Result<LatticeMinimum> {
    let s = lattice::shortest_vector(rows, DEFAULT_NODE_BUDGET)?;
    Ok(LatticeMinimum { coeffs: s.coeffs, vector: s.vector, len_sq: s.len_sq })
}

/// `Δ = −½ ln(length²)`.
pub fn delta_of(len_sq: &Q) -> f64 {
    -0.5 * ln_abs(len_sq)
}

pub fn delta(rows: &[Vec<Q>]) -> Result<f64> {
    Ok(delta_of(&shortest_vector(rows)?.len_sq))
}

/// One sample of a chain: exact multipliers, the float `t`, and `s(t)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainPoint {
    pub flow: RationalFlowPoint,
    pub t: Vec<f64>,
    #[serde(serialize_with = "ser_f64")]
    pub s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SChain {
    pub m: usize,
    pub n: usize,
    pub points: Vec<ChainPoint>,
}

impl SChain {
    /// `s₀` ray sampled at the given `τ`, multipliers rationalized.
    pub fn s0_ray(m: usize, n: usize, taus: &[f64]) -> Result<Self> {
        if m == 0 || n == 0 || taus.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::invalid("ray needs M, N ≥ 1 and positive τ"));
        }
        let points = taus
            .iter()
            .map(|&tau| {
                let flow = FlowPoint::s0_ray(m, n, tau).to_rational();
                let t = flow.t();
                ChainPoint { s: m as f64 * t[0], t, flow }
            })
            .collect();
        Ok(SChain { m, n, points })
    }

    /// `s₀` ray at `τ = 1..=t_max`.
    pub fn s0_integer_ray(m: usize, n: usize, t_max: u32) -> Result<Self> {
        let taus: Vec<f64> = (1..=t_max).map(f64::from).collect();
        Self::s0_ray(m, n, &taus)
    }

    /// Exact dyadic `s₀` ray, `τ = kMN ln 2` for `k = 1..=k_max`.
    pub fn s0_dyadic_ray(m: usize, n: usize, k_max: u32) -> Self {
        let points = (1..=k_max)
            .map(|k| {
                let flow = RationalFlowPoint::dyadic_ray(m, n, k);
                let t = flow.t();
                ChainPoint { s: m as f64 * t[0], t, flow }
            })
            .collect();
        SChain { m, n, points }
    }

    /// Ray `τ·(a, −b)` in `𝔞₊` for barycentric weights `a`, `b`, with `s = ‖t‖`.
    pub fn cone_ray(a: &[f64], b: &[f64], t_max: u32, norm: Norm) -> Result<Self> {
        let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
        if a.iter().chain(b).any(|x| *x < 0.0) || (sa - 1.0).abs() > 1e-9 || (sb - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("cone weights must be barycentric"));
        }
        let points = (1..=t_max)
            .map(|tau| {
                let tau = tau as f64;
                let mut t: Vec<f64> = a.iter().map(|x| x * tau).collect();
                t.extend(b.iter().map(|x| -x * tau));
                let flow = FlowPoint { t }.to_rational();
                let t = flow.t();
                let s = match norm {
                    Norm::Sup => t.iter().fold(0.0f64, |m, x| m.max(x.abs())),
                    Norm::Euclidean => t.iter().map(|x| x * x).sum::<f64>().sqrt(),
                };
                ChainPoint { flow, t, s }
            })
            .collect();
        Ok(SChain { m: a.len(), n: b.len(), points })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    #[serde(serialize_with = "ser_f64")]
    pub s: f64,
    pub t: Vec<f64>,
    #[serde(serialize_with = "ser_f64")]
    pub delta: f64,
    #[serde(serialize_with = "ser_f64")]
    pub ratio: f64,
    #[serde(with = "crate::rational::serde_bigvec")]
    pub coeffs: Vec<BigInt>,
    #[serde(with = "crate::rational::serde_q")]
    pub len_sq: Q,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DynamicalEstimate {
    /// Max of `Δ/s` over the final third of the chain.
    #[serde(serialize_with = "ser_f64")]
    pub value: f64,
    pub trajectory: Vec<TrajectoryPoint>,
    /// Slope of `Δ` against `s` over the second half of the chain.
    #[serde(serialize_with = "ser_f64")]
    pub trend_slope: f64,
    #[serde(serialize_with = "ser_f64")]
    pub trend_r_squared: f64,
    pub divergent: bool,
    /// Chain indices where the shortest vector could not be computed.
    pub skipped: Vec<usize>,
}

fn final_third_max(v: &[f64]) -> f64 {
    let start = v.len() - v.len().div_ceil(3);
    v[start..].iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `ω(A; S, s)` along a chain. `divergent` is set when `Δ` grows along the chain
/// at least `0.9 × reference` per unit of `s` (`reference = 1/N` on the `s₀`
/// ray, the slope for `A = 0`).
pub fn omega_dynamical(a: &[Vec<Q>], chain: &SChain) -> Result<DynamicalEstimate> {
    let (m, n) = shape(a)?;
    if (m, n) != (chain.m, chain.n) || chain.points.is_empty() {
        return Err(Error::invalid("chain must be nonempty and match the matrix shape"));
    }
    let results: Vec<Result<TrajectoryPoint>> = chain
        .points
        .par_iter()
        .map(|cp| {
            let rows = lattice_rows(a, &cp.flow)?;
            let sv = shortest_vector(&rows)?;
            let delta = delta_of(&sv.len_sq);
            Ok(TrajectoryPoint { s: cp.s, t: cp.t.clone(), delta, ratio: delta / cp.s, coeffs: sv.coeffs, len_sq: sv.len_sq })
        })
        .collect();
    let mut trajectory = Vec::new();
    let mut skipped = Vec::new();
    let mut refs = Vec::new();
    for (i, (r, cp)) in results.into_iter().zip(&chain.points).enumerate() {
        match r {
            Ok(p) => {
                // Δ for A = 0 is max_i(−t_i)
                refs.push(cp.t.iter().fold(f64::NEG_INFINITY, |m, x| m.max(-x)) / cp.s);
                trajectory.push(p);
            }
            Err(Error::Budget(_)) => skipped.push(i),
            Err(e) => return Err(e),
        }
    }
    if trajectory.is_empty() {
        return Err(Error::Budget("no chain point could be evaluated".into()));
    }
    let ratios: Vec<f64> = trajectory.iter().map(|p| p.ratio).collect();
    let value = final_third_max(&ratios);
    let half = trajectory.len() / 2;
    let tail = &trajectory[half..];
    let (slope, r2) = if tail.len() >= 3 {
        let xs: Vec<f64> = tail.iter().map(|p| p.s).collect();
        let ys: Vec<f64> = tail.iter().map(|p| p.delta).collect();
        linear_fit(&xs, &ys).map(|f| (f.slope, f.r_squared)).unwrap_or((0.0, 0.0))
    } else {
        (0.0, 0.0)
    };
    let reference = refs[half..].iter().copied().fold(f64::INFINITY, f64::min);
    let divergent = tail.len() >= 3 && r2 >= 0.95 && slope >= 0.9 * reference;
    Ok(DynamicalEstimate { value, trajectory, trend_slope: slope, trend_r_squared: r2, divergent, skipped })
}

/// `ξ(c) = (N/M)(1 + Mc)/(1 − Nc)` for `c < 1/N`.
pub fn xi(c: f64, m: usize, n: usize) -> Result<f64> {
    let (mf, nf) = (m as f64, n as f64);
    if c.is_infinite() && c > 0.0 || c * nf >= 1.0 {
        return Err(Error::invalid("ξ has a pole at c = 1/N"));
    }
    Ok(nf / mf * (1.0 + mf * c) / (1.0 - nf * c))
}

pub fn xi_exact(c: &Q, m: usize, n: usize) -> Result<Q> {
    let (mq, nq) = (qi(m as i64), qi(n as i64));
    let den = Q::one() - &nq * c;
    if !den.is_positive() {
        return Err(Error::invalid("ξ has a pole at c = 1/N"));
    }
    Ok(&nq / &mq * (Q::one() + &mq * c) / den)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Correspondence {
    #[serde(serialize_with = "ser_f64")]
    pub omega_direct: f64,
    #[serde(serialize_with = "ser_f64")]
    pub omega_dynamical: f64,
    #[serde(serialize_with = "ser_f64")]
    pub xi_of_dynamical: f64,
    #[serde(serialize_with = "ser_f64")]
    pub discrepancy: f64,
    pub direct: ExponentEstimate,
    pub dynamical: DynamicalEstimate,
}

/// Both sides of `ω(A) = ξ(ω(A; 𝔞₊*, s₀))`. For `M = N = 1` the direct side
/// uses continued fractions.
pub fn correspondence_check(a: &[Vec<Q>], q_max: u64, chain: &SChain) -> Result<Correspondence> {
    let (m, n) = shape(a)?;
    let direct = if m == 1 && n == 1 {
        let mut e = dioph::omega_vector(&[a[0][0].clone()], q_max, Method::Cf)?;
        for r in &mut e.records {
            r.exponent -= 1.0;
        }
        e.value -= 1.0;
        e.sup_value -= 1.0;
        e
    } else {
        dioph::omega_matrix(a, q_max)?
    };
    let dynamical = omega_dynamical(a, chain)?;
    let omega_dyn = if dynamical.divergent { f64::INFINITY } else { dynamical.value };
    let xi_dyn = if dynamical.divergent { f64::INFINITY } else { xi(omega_dyn, m, n).unwrap_or(f64::INFINITY) };
    let discrepancy = if direct.value.is_infinite() && xi_dyn.is_infinite() {
        0.0
    } else {
        (direct.value - xi_dyn).abs()
    };
    Ok(Correspondence { omega_direct: direct.value, omega_dynamical: omega_dyn, xi_of_dynamical: xi_dyn, discrepancy, direct, dynamical })
}

/// Barycentric net of the `(k−1)`-simplex with denominator `g`.
fn barycentric(k: usize, g: usize) -> Vec<Vec<f64>> {
    fn rec(k: usize, left: usize, g: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() == k - 1 {
            cur.push(left);
            out.push(cur.iter().map(|&x| x as f64 / g as f64).collect());
            cur.pop();
            return;
        }
        for v in 0..=left {
            cur.push(v);
            rec(k, left - v, g, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, g, g, &mut Vec::new(), &mut out);
    out
}

/// Directions of `𝔞₊`: pairs of barycentric weights, about `10(M+N)` in all.
pub fn cone_directions(m: usize, n: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    let target = 10 * (m + n);
    let mut g = 1;
    loop {
        let dirs: Vec<_> = barycentric(m, g)
            .into_iter()
            .flat_map(|a| barycentric(n, g).into_iter().map(move |b| (a.clone(), b)))
            .collect();
        if dirs.len() >= target || g > 64 {
            return dirs;
        }
        g += 1;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VwmaScore {
    /// Max over directions of the per-direction estimate of `ω(A; 𝔞₊, s)`.
    #[serde(serialize_with = "ser_f64")]
    pub score: f64,
    pub divergent: bool,
    pub per_direction: Vec<DirectionScore>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DirectionScore {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    #[serde(serialize_with = "ser_f64")]
    pub value: f64,
    pub divergent: bool,
}

/// Estimate of `ω(A; 𝔞₊, s)` on a net of cone directions and `τ = 1..=t_max`.
pub fn vwma_score(a: &[Vec<Q>], t_max: u32, norm: Norm) -> Result<VwmaScore> {
    let (m, n) = shape(a)?;
    let per: Vec<Result<DirectionScore>> = cone_directions(m, n)
        .into_par_iter()
        .map(|(wa, wb)| {
            let chain = SChain::cone_ray(&wa, &wb, t_max, norm)?;
            let e = omega_dynamical(a, &chain)?;
            Ok(DirectionScore { a: wa, b: wb, value: e.value, divergent: e.divergent })
        })
        .collect();
    let per_direction = per.into_iter().collect::<Result<Vec<_>>>()?;
    let score = per_direction.iter().map(|d| d.value).fold(f64::NEG_INFINITY, f64::max);
    let divergent = per_direction.iter().any(|d| d.divergent);
    Ok(VwmaScore { score, divergent, per_direction })
}

/// Whether some `v ∈ Z^{M+N} ∖ {0}` has `‖g_t u_A v‖ ≤ e^{−γ‖t‖∞} κ`, decided
/// exactly for rational `γ = a/b ≥ 0` as `len²^b · e^{2a‖t‖∞} ≤ κ^{2b}`.
pub fn in_w_kappa_t(a: &[Vec<Q>], kappa: &Q, t: &RationalFlowPoint, gamma: &Q) -> Result<bool> {
    if !kappa.is_positive() || kappa > &Q::one() {
        return Err(Error::invalid("κ must lie in (0, 1]"));
    }
    if gamma.is_negative() {
        return Err(Error::invalid("γ must be nonnegative"));
    }
    let len_sq = shortest_vector(&lattice_rows(a, t)?)?.len_sq;
    let num: u32 = num_traits::ToPrimitive::to_u32(gamma.numer()).ok_or_else(|| Error::invalid("γ too large"))?;
    let den: u32 = num_traits::ToPrimitive::to_u32(gamma.denom()).ok_or_else(|| Error::invalid("γ too finely specified"))?;
    let lhs = pow_q(&len_sq, den) * pow_q(&t.sup_multiplier(), 2 * num);
    Ok(lhs <= pow_q(kappa, 2 * den))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{parse_q, qr};

    #[test]
    fn unipotent_examples() {
        assert_eq!(unipotent(&[vec![qi(0)]]).unwrap(), identity(2));
        let u = unipotent(&[vec![qr(1, 3)]]).unwrap();
        assert_eq!(u, vec![vec![qi(1), qr(1, 3)], vec![qi(0), qi(1)]]);
        let a = vec![vec![qr(1, 3), qr(-2, 7)], vec![qr(5, 2), qi(4)]];
        assert_eq!(det(&unipotent(&a).unwrap()), qi(1));
    }

    #[test]
    fn flows() {
        let r = RationalFlowPoint::new(vec![qi(2), qr(1, 2)]).unwrap();
        assert_eq!(det(&flow_matrix_exact(&r)), qi(1));
        assert!(RationalFlowPoint::new(vec![qi(2), qi(1)]).is_err());
        let p = FlowPoint::s0_ray(2, 3, 6.0);
        assert!((p.t[0] * 2.0 - 6.0).abs() < 1e-12);
        assert_eq!(det(&flow_matrix_exact(&p.to_rational())), qi(1));
    }

    #[test]
    fn delta_examples() {
        let d = vec![vec![qi(4), qi(0)], vec![qi(0), qr(1, 4)]];
        assert!((delta(&d).unwrap() - 4f64.ln()).abs() < 1e-12);
        let d = vec![vec![qi(2), qi(0)], vec![qi(0), qr(1, 2)]];
        assert!((delta(&d).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert_eq!(delta(&identity(3)).unwrap(), 0.0);
    }

    #[test]
    fn zero_matrix_has_slope_one_over_n() {
        let chain = SChain::s0_dyadic_ray(1, 1, 12);
        let e = omega_dynamical(&[vec![qi(0)]], &chain).unwrap();
        for p in &e.trajectory {
            assert!((p.ratio - 1.0).abs() < 1e-12);
        }
        assert!(e.divergent);
    }

    #[test]
    fn rational_diverges_golden_stays_bounded() {
        let chain = SChain::s0_integer_ray(1, 1, 30).unwrap();
        let e = omega_dynamical(&[vec![qr(1, 2)]], &chain).unwrap();
        assert!(e.divergent);
        let g = parse_q("0.618033988749894848204586834365638117720309179805762862135448").unwrap();
        let e = omega_dynamical(&[vec![g]], &chain).unwrap();
        assert!(!e.divergent);
        assert!(e.value <= 0.05, "{}", e.value);
    }

    #[test]
    fn xi_values() {
        assert_eq!(xi_exact(&qi(0), 2, 3).unwrap(), qr(3, 2));
        assert_eq!(xi_exact(&qr(1, 3), 1, 1).unwrap(), qi(2));
        assert!(xi(1.0, 1, 1).is_err());
        assert!(xi(0.49, 1, 2).unwrap() > xi(0.4, 1, 2).unwrap());
    }

    #[test]
    fn w_kappa_boundaries() {
        let a = vec![vec![qr(1, 3)]];
        let t0 = RationalFlowPoint::new(vec![qi(1), qi(1)]).unwrap();
        assert!(in_w_kappa_t(&a, &qi(1), &t0, &qr(7, 2)).unwrap());
        assert!(!in_w_kappa_t(&a, &qr(1, 1_000_000_000), &t0, &qi(1)).unwrap());
        // A = 0 on the dyadic ray: shortest e^{−τ}, ‖t‖∞ = τ, so γ = 1 needs κ = 1
        let t = RationalFlowPoint::dyadic_ray(1, 1, 3);
        let z = vec![vec![qi(0)]];
        assert!(in_w_kappa_t(&z, &qi(1), &t, &qi(1)).unwrap());
        assert!(!in_w_kappa_t(&z, &qr(99, 100), &t, &qi(1)).unwrap());
        // γ = 1/2: threshold κ = 2^{−3/2} ≈ 0.3536
        assert!(in_w_kappa_t(&z, &qr(36, 100), &t, &qr(1, 2)).unwrap());
        assert!(!in_w_kappa_t(&z, &qr(35, 100), &t, &qr(1, 2)).unwrap());
    }

    #[test]
    fn cone_net_size() {
        assert!(cone_directions(1, 2).len() >= 30);
        for (a, b) in cone_directions(2, 2) {
            assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
