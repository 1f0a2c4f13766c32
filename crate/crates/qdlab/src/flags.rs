//! Flags of rational subspaces, the functions `η`, permissible balls and the
//! exact base case / inductive step / small-vertex routines on a truncated
//! vertex pool, plus a Monte Carlo decay experiment for `W_{κ,t}`.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{four_r_select, Ball, Norm};
use crate::homdyn::{in_w_kappa_t, lattice_rows, shortest_vector, RationalFlowPoint};
use crate::measures::MeasureOracle;
use crate::plucker::{enumerate_vertices, f_tv_sq, RationalSubspace};
use crate::rational::{pow2, pow_q, q_from_f64, qi, to_f64, Q, Surd};
use crate::stats::{weighted_fit, wilson};

/// Integer tables `C_i = 4^{i(n−i)}`, `λ_i = 2·8^i` and the normalizers
/// `8^{i(n−i)}` actually used by [`base_case`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Constants {
    pub c: Vec<BigInt>,
    pub lambda: Vec<BigInt>,
    pub normalizer: Vec<BigInt>,
}

pub fn constants_c_lambda(m: usize, n: usize) -> Constants {
    let d = m + n;
    let pw = |b: u32, e: usize| BigInt::from(b).pow(e as u32);
    Constants {
        c: (0..=d).map(|i| pw(4, i * (d - i))).collect(),
        lambda: (0..=d).map(|i| BigInt::from(2) * pw(8, i)).collect(),
        normalizer: (0..=d).map(|i| pw(8, i * (d - i))).collect(),
    }
}

/// `{0}` and `R^n` together with the height-`h` vertices, sorted by dimension.
pub fn vertex_pool(n: usize, h: i128) -> Result<Vec<RationalSubspace>> {
    let mut pool = vec![RationalSubspace::zero(n)];
    pool.extend(enumerate_vertices(n, h, 2_000_000)?);
    pool.push(RationalSubspace::full(n));
    pool.sort_by_key(|v| v.dim());
    Ok(pool)
}

/// Strictly increasing chain from `{0}` to `R^n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Flag {
    pub members: Vec<RationalSubspace>,
}

impl Flag {
    pub fn new(members: Vec<RationalSubspace>) -> Result<Self> {
        let n = members.first().map(|v| v.n).ok_or_else(|| Error::invalid("empty flag"))?;
        if members[0].dim() != 0 || members.last().unwrap().dim() != n {
            return Err(Error::invalid("a flag runs from {0} to the whole space"));
        }
        for w in members.windows(2) {
            if w[0].n != n || w[1].n != n || w[0].dim() >= w[1].dim() || !w[1].contains(&w[0]) {
                return Err(Error::invalid("flag members must be strictly nested"));
            }
        }
        Ok(Flag { members })
    }

    /// `{{0}, R^n}`.
    pub fn trivial(n: usize) -> Self {
        Flag { members: vec![RationalSubspace::zero(n), RationalSubspace::full(n)] }
    }

    pub fn ambient(&self) -> usize {
        self.members[0].n
    }

    /// Number of strict inclusions.
    pub fn length(&self) -> usize {
        self.members.len() - 1
    }

    pub fn is_maximal(&self) -> bool {
        self.length() == self.ambient()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.members.iter().map(|v| v.dim()).collect()
    }

    /// Index `i` with `V_i ⊊ v ⊊ V_{i+1}`, if `v` can be inserted.
    pub fn slot(&self, v: &RationalSubspace) -> Option<usize> {
        let d = v.dim();
        let i = self.members.iter().rposition(|w| w.dim() < d)?;
        let (lo, hi) = (&self.members[i], self.members.get(i + 1)?);
        (hi.dim() > d && v.contains(lo) && hi.contains(v)).then_some(i)
    }

    pub fn is_addable(&self, v: &RationalSubspace) -> bool {
        self.slot(v).is_some()
    }

    pub fn with(&self, v: &RationalSubspace) -> Result<Flag> {
        let i = self.slot(v).ok_or_else(|| Error::invalid("vertex is not addable"))?;
        let mut members = self.members.clone();
        members.insert(i + 1, v.clone());
        Ok(Flag { members })
    }
}

/// Exact positive values `η(0), …, η(n)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EtaProfile {
    pub values: Vec<Surd>,
}

impl EtaProfile {
    pub fn constant(n: usize, q: Q) -> Result<Self> {
        Ok(EtaProfile { values: vec![Surd::rational(q)?; n + 1] })
    }

    pub fn at(&self, j: usize) -> &Surd {
        &self.values[j]
    }

    pub fn doubled(&self) -> EtaProfile {
        let two = Surd { radicand: qi(2), index: 1 };
        EtaProfile { values: self.values.iter().map(|s| s.mul(&two)).collect() }
    }

    /// `η(j)² ≥ 64 η(j−1)η(j+1)` for every `j` off the flag dimensions.
    pub fn concavity_failures(&self, flag_dims: &[usize]) -> Vec<usize> {
        let n = self.values.len() - 1;
        let k64 = Surd { radicand: qi(64), index: 1 };
        (1..n)
            .filter(|j| !flag_dims.contains(j))
            .filter(|&j| {
                let lhs = self.values[j].mul(&self.values[j]);
                let rhs = self.values[j - 1].mul(&self.values[j + 1]).mul(&k64);
                lhs.cmp_surd(&rhs) == Ordering::Less
            })
            .collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(Surd::to_f64).collect()
    }
}

/// `sqrt(f_sq) ≤ η`.
fn below(f_sq: &Q, eta: &Surd) -> bool {
    f_sq.is_zero() || eta.cmp_sqrt(f_sq) != Ordering::Less
}

/// Where a sup-ball is evaluated: an axis box (exact for `min(M,N) = 1`,
/// where `f²` is a convex quadratic in `A`) or explicit support samples.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Support {
    Box {
        #[serde(with = "crate::rational::serde_qvec")]
        lo: Vec<Q>,
        #[serde(with = "crate::rational::serde_qvec")]
        hi: Vec<Q>,
    },
    Samples(#[serde(with = "crate::rational::serde_qmat")] Vec<Vec<Q>>),
}

/// Ball `B_X(A₀, ρ)` in the sup norm on the `M×N` entries (row-major).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SupportBall {
    pub m: usize,
    pub n: usize,
    #[serde(with = "crate::rational::serde_qvec")]
    pub center: Vec<Q>,
    #[serde(with = "crate::rational::serde_q")]
    pub radius: Q,
    pub support: Support,
}

impl SupportBall {
    pub fn new(m: usize, n: usize, center: Vec<Q>, radius: Q, support: Support) -> Result<Self> {
        if m == 0 || n == 0 || center.len() != m * n {
            return Err(Error::invalid("center must have M·N entries"));
        }
        if !radius.is_positive() {
            return Err(Error::invalid("radius must be positive"));
        }
        match &support {
            Support::Box { lo, hi } => {
                if lo.len() != m * n || hi.len() != m * n || lo.iter().zip(hi).any(|(a, b)| a > b) {
                    return Err(Error::invalid("support box is malformed"));
                }
            }
            Support::Samples(s) => {
                if s.iter().any(|p| p.len() != m * n) {
                    return Err(Error::invalid("support samples must have M·N entries"));
                }
            }
        }
        Ok(SupportBall { m, n, center, radius, support })
    }

    /// Lebesgue-type support `[0,1]^{MN}`.
    pub fn unit_box(m: usize, n: usize, center: Vec<Q>, radius: Q) -> Result<Self> {
        let k = m * n;
        Self::new(m, n, center, radius, Support::Box { lo: vec![Q::zero(); k], hi: vec![Q::one(); k] })
    }

    pub fn with_ball(&self, center: Vec<Q>, radius: Q) -> Result<Self> {
        Self::new(self.m, self.n, center, radius, self.support.clone())
    }

    pub fn dilate(&self, lambda: &Q) -> SupportBall {
        SupportBall { radius: &self.radius * lambda, ..self.clone() }
    }

    pub fn sup_is_exact(&self) -> bool {
        matches!(self.support, Support::Box { .. }) && self.m.min(self.n) == 1
    }

    pub fn matrix(&self, flat: &[Q]) -> Vec<Vec<Q>> {
        flat.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    fn dist(&self, a: &[Q]) -> Q {
        a.iter().zip(&self.center).map(|(x, c)| (x - c).abs()).max().unwrap_or_else(Q::zero)
    }

    pub fn contains(&self, a: &[Q]) -> bool {
        if a.len() != self.center.len() || self.dist(a) > self.radius {
            return false;
        }
        match &self.support {
            Support::Box { lo, hi } => a.iter().zip(lo.iter().zip(hi)).all(|(x, (l, h))| l <= x && x <= h),
            Support::Samples(s) => s.iter().any(|p| p.as_slice() == a),
        }
    }

    /// Points whose maximum of `f_{t,V}` realizes (or bounds below) the sup over the ball.
    pub fn extreme_points(&self) -> Vec<Vec<Q>> {
        match &self.support {
            Support::Box { lo, hi } => {
                let mut ranges = Vec::with_capacity(lo.len());
                for i in 0..lo.len() {
                    let a = (&self.center[i] - &self.radius).max(lo[i].clone());
                    let b = (&self.center[i] + &self.radius).min(hi[i].clone());
                    if a > b {
                        return Vec::new();
                    }
                    ranges.push(if a == b { vec![a] } else { vec![a, b] });
                }
                let mut out: Vec<Vec<Q>> = vec![Vec::new()];
                for r in ranges {
                    out = out
                        .into_iter()
                        .flat_map(|p| {
                            r.iter().map(move |x| {
                                let mut q = p.clone();
                                q.push(x.clone());
                                q
                            })
                        })
                        .collect();
                }
                out
            }
            Support::Samples(s) => s.iter().filter(|p| self.dist(p) <= self.radius).cloned().collect(),
        }
    }
}

/// `f_t(S, V)²`: the largest `f_{t,V}(A)²` over the extreme points of `S`.
pub fn f_t_set(s: &SupportBall, v: &RationalSubspace, t: &RationalFlowPoint) -> Result<Q> {
    let pts = s.extreme_points();
    if pts.is_empty() {
        return Err(Error::invalid("the ball contains no support samples"));
    }
    let mut best = Q::zero();
    for p in &pts {
        let f = f_tv_sq(&s.matrix(p), t, v)?;
        if f > best {
            best = f;
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Classification {
    /// Pool indices with `f_t(S,V) ≤ η(dim V)`.
    pub approximable: Vec<usize>,
    pub bad: Vec<usize>,
    #[serde(with = "crate::rational::serde_qvec")]
    pub f_sq: Vec<Q>,
}

/// Split the pool into `𝒲(η,S)` and `ℬ(η,S)`.
pub fn classify_vertices(eta: &EtaProfile, s: &SupportBall, t: &RationalFlowPoint, pool: &[RationalSubspace]) -> Result<Classification> {
    let mut c = Classification { approximable: Vec::new(), bad: Vec::new(), f_sq: Vec::new() };
    for (i, v) in pool.iter().enumerate() {
        let f = f_t_set(s, v, t)?;
        if below(&f, eta.at(v.dim())) {
            c.approximable.push(i);
        } else {
            c.bad.push(i);
        }
        c.f_sq.push(f);
    }
    Ok(c)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Permissibility {
    /// `F ⊂ 𝒲(2η, 2B)`.
    pub flag_in_w: bool,
    /// Every `F`-addable pool vertex lies in `ℬ(η, λB)`.
    pub addable_in_b: bool,
    pub addable_checked: usize,
    pub failures: Vec<String>,
}

impl Permissibility {
    pub fn holds(&self) -> bool {
        self.flag_in_w && self.addable_in_b
    }
}

fn describe(v: &RationalSubspace) -> String {
    format!("{:?}", v.basis)
}

/// Whether `B` is `(F, η, λ)`-permissible, tested on the pool.
pub fn check_permissible(
    b: &SupportBall,
    flag: &Flag,
    eta: &EtaProfile,
    lambda: &Q,
    t: &RationalFlowPoint,
    pool: &[RationalSubspace],
) -> Result<Permissibility> {
    let two = qi(2);
    let (b2, bl) = (b.dilate(&two), b.dilate(lambda));
    let eta2 = eta.doubled();
    let mut p = Permissibility { flag_in_w: true, addable_in_b: true, addable_checked: 0, failures: Vec::new() };
    for v in &flag.members {
        if !below(&f_t_set(&b2, v, t)?, eta2.at(v.dim())) {
            p.flag_in_w = false;
            p.failures.push(format!("flag member {} is not in W(2eta, 2B)", describe(v)));
        }
    }
    for v in pool.iter().filter(|v| flag.is_addable(v)) {
        p.addable_checked += 1;
        if below(&f_t_set(&bl, v, t)?, eta.at(v.dim())) {
            p.addable_in_b = false;
            p.failures.push(format!("addable vertex {} is not in B(eta, lambda B)", describe(v)));
        }
    }
    Ok(p)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BaseCertificate {
    pub permissible: Permissibility,
    pub flag_in_bad: bool,
    pub eta_below_normalizer: bool,
    pub concavity_failures: Vec<usize>,
    /// `κ = min(1, min_V f(V)^{1/dim V})`, so the lower bound hypothesis holds by construction.
    pub kappa: f64,
    /// `min_j η(j+1)/η(j)` and the constant `c` with `η(j+1)/η(j) ≥ c κ` predicted by the proof.
    pub min_ratio: f64,
    pub c: f64,
    pub ratio_holds: bool,
    pub sup_exact: bool,
    pub pool_size: usize,
}

impl BaseCertificate {
    pub fn holds(&self) -> bool {
        self.permissible.holds()
            && self.flag_in_bad
            && self.eta_below_normalizer
            && self.concavity_failures.is_empty()
            && self.ratio_holds
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BaseCase {
    pub flag: Flag,
    pub eta: EtaProfile,
    #[serde(with = "crate::rational::serde_qvec")]
    pub flag_f_sq: Vec<Q>,
    pub certificate: BaseCertificate,
}

fn report_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).unwrap_or_default()
}

/// Greedy flag and `θ`-linear `η` on the pool, with checks (i)–(iv).
pub fn base_case(b0: &SupportBall, t: &RationalFlowPoint, pool: &[RationalSubspace]) -> Result<BaseCase> {
    let n = b0.m + b0.n;
    if t.r.len() != n || pool.iter().any(|v| v.n != n) {
        return Err(Error::DimensionMismatch { expected: n, got: t.r.len() });
    }
    let norm: Vec<Q> = constants_c_lambda(b0.m, b0.n).normalizer.into_iter().map(Q::from_integer).collect();
    let b2 = b0.dilate(&qi(2));
    let f: Vec<Q> = pool.iter().map(|v| f_t_set(&b2, v, t)).collect::<Result<_>>()?;
    // g(V) = log(f/C)/dim as the surd (f²/C²)^{1/(2 dim)}
    let g = |i: usize| -> Option<Surd> {
        let d = pool[i].dim();
        (d > 0 && f[i].is_positive()).then(|| Surd { radicand: &f[i] / (&norm[d] * &norm[d]), index: 2 * d as u32 })
    };
    let mut chain = vec![RationalSubspace::zero(n)];
    let mut chain_f = vec![Q::one()];
    while chain.last().unwrap().dim() < n {
        let cur = chain.last().unwrap().clone();
        let mut best: Option<(usize, Surd)> = None;
        for i in 0..pool.len() {
            if pool[i].dim() <= cur.dim() || !pool[i].contains(&cur) {
                continue;
            }
            let Some(gi) = g(i) else {
                return Err(Error::Degenerate("a vertex has vanishing covolume".into()));
            };
            if best.as_ref().is_none_or(|(_, b)| gi.cmp_surd(b) == Ordering::Less) {
                best = Some((i, gi));
            }
        }
        let (i, _) = best.ok_or_else(|| Error::invalid("the pool lacks the whole space"))?;
        chain.push(pool[i].clone());
        chain_f.push(f[i].clone());
    }
    let flag = Flag::new(chain)?;
    let dims = flag.dims();
    let mut values = Vec::with_capacity(n + 1);
    for w in 0..dims.len() - 1 {
        let (j0, j1) = (dims[w], dims[w + 1]);
        let m = (j1 - j0) as u32;
        let e0 = &chain_f[w] / (&norm[j0] * &norm[j0]);
        let e1 = &chain_f[w + 1] / (&norm[j1] * &norm[j1]);
        for j in j0..j1 {
            let k = (j - j0) as u32;
            let half = &norm[j] / qi(2);
            let radicand = pow_q(&half, 2 * m) * pow_q(&e0, m - k) * pow_q(&e1, k);
            values.push(Surd::new(radicand, 2 * m)?);
        }
    }
    values.push(Surd::new(&chain_f[dims.len() - 1] / qi(4), 2)?);
    let eta = EtaProfile { values };

    let permissible = check_permissible(b0, &flag, &eta, &qi(2), t, pool)?;
    let flag_in_bad = flag.members.iter().zip(&chain_f).all(|(v, fv)| !below(fv, eta.at(v.dim())));
    let eta_below_normalizer = (0..=n).all(|j| {
        let cap = Surd { radicand: &norm[j] / qi(2), index: 1 };
        eta.at(j).cmp_surd(&cap) != Ordering::Greater
    });
    let concavity_failures = eta.concavity_failures(&dims);

    let mut ln_kappa: f64 = 0.0;
    for (i, v) in pool.iter().enumerate() {
        if v.dim() > 0 {
            ln_kappa = ln_kappa.min(0.5 * crate::rational::ln_abs(&f[i]) / v.dim() as f64);
        }
    }
    let nf: Vec<f64> = norm.iter().map(to_f64).collect();
    let step = (0..n).map(|j| nf[j + 1] / nf[j]).fold(f64::INFINITY, f64::min);
    let root = (1..=n).map(|d| nf[d].powf(-1.0 / d as f64)).fold(f64::INFINITY, f64::min);
    let c = step * root;
    let ln_eta: Vec<f64> = eta.values.iter().map(Surd::ln).collect();
    let min_ln_ratio = (0..n).map(|j| ln_eta[j + 1] - ln_eta[j]).fold(f64::INFINITY, f64::min);
    let ratio_holds = min_ln_ratio >= c.ln() + ln_kappa - 1e-9;
    let certificate = BaseCertificate {
        permissible,
        flag_in_bad,
        eta_below_normalizer,
        concavity_failures,
        kappa: ln_kappa.exp(),
        min_ratio: min_ln_ratio.exp(),
        c,
        ratio_holds,
        sup_exact: b0.sup_is_exact(),
        pool_size: pool.len(),
    };
    let out = BaseCase { flag, eta, flag_f_sq: chain_f, certificate };
    if !out.certificate.holds() {
        return Err(Error::assertion("base case properties (i)-(iv)", report_json(&out)));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VertexRadius {
    pub vertex: RationalSubspace,
    /// `log2 ρ_{A,V}`; `None` when the condition holds at every dyadic scale (`ρ = 0`).
    pub log2_rho: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InductiveStep {
    pub v_a: RationalSubspace,
    #[serde(with = "crate::rational::serde_q")]
    pub rho_a: Q,
    pub ball: SupportBall,
    pub radii: Vec<VertexRadius>,
    pub vpermissible: bool,
    pub containment: bool,
    pub rx3t: bool,
    pub new_flag: Flag,
    #[serde(with = "crate::rational::serde_q")]
    pub new_lambda: Q,
    pub new_certificate: Permissibility,
}

impl InductiveStep {
    pub fn holds(&self) -> bool {
        self.vpermissible && self.containment && self.rx3t
    }
}

const LOG2_RHO_MIN: i64 = -160;

/// Smallest `k` such that `V ∈ ℬ(η, B(A, 8λ 2^k))`, or `None` if every scale works.
fn dyadic_radius(
    b: &SupportBall,
    a: &[Q],
    v: &RationalSubspace,
    eta: &Surd,
    lambda: &Q,
    t: &RationalFlowPoint,
    k_max: i64,
) -> Result<Option<i64>> {
    let cond = |k: i64| -> Result<bool> {
        let ball = b.with_ball(a.to_vec(), qi(8) * lambda * pow2(k))?;
        Ok(!below(&f_t_set(&ball, v, t)?, eta))
    };
    if !cond(k_max)? {
        return Err(Error::assertion(
            "addable vertex never becomes bad",
            format!("{{\"vertex\":\"{}\",\"log2_rho_max\":{k_max}}}", describe(v)),
        ));
    }
    if cond(LOG2_RHO_MIN)? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (LOG2_RHO_MIN, k_max);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if cond(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// One refinement step from a permissible ball `B` at a support point `A ∈ B`.
pub fn inductive_step(
    b: &SupportBall,
    flag: &Flag,
    eta: &EtaProfile,
    lambda: &Q,
    a: &[Q],
    t: &RationalFlowPoint,
    pool: &[RationalSubspace],
) -> Result<InductiveStep> {
    if flag.is_maximal() {
        return Err(Error::invalid("the flag is maximal"));
    }
    if !b.contains(a) {
        return Err(Error::invalid("A must be a support point of B"));
    }
    if lambda < &qi(2) {
        return Err(Error::invalid("λ must be at least 2"));
    }
    let pre = check_permissible(b, flag, eta, lambda, t, pool)?;
    if !pre.holds() {
        return Err(Error::invalid(format!("B is not permissible: {}", pre.failures.join("; "))));
    }
    // 8λ·2^k ≥ (λ+1)ρ once 2^k ≥ ρ, so λB ⊂ B(A, 8λ2^k)
    let k_max = crate::rational::ln_abs(&b.radius) / std::f64::consts::LN_2;
    let k_max = k_max.ceil() as i64 + 1;
    let mut radii = Vec::new();
    for v in pool.iter().filter(|v| flag.is_addable(v)) {
        let k = dyadic_radius(b, a, v, eta.at(v.dim()), lambda, t, k_max)?;
        radii.push(VertexRadius { vertex: v.clone(), log2_rho: k });
    }
    let best = radii
        .iter()
        .max_by_key(|r| r.log2_rho.unwrap_or(i64::MIN))
        .ok_or_else(|| Error::invalid("no addable vertex in the pool"))?;
    let v_a = best.vertex.clone();
    let rho_a = best.log2_rho.map_or_else(Q::zero, pow2);
    let eight_lambda = qi(8) * lambda;

    let vpermissible = rho_a.is_positive() && {
        let big = b.with_ball(a.to_vec(), &eight_lambda * &rho_a)?;
        !below(&f_t_set(&big, &v_a, t)?, eta.at(v_a.dim()))
    };
    let d = a.iter().zip(&b.center).map(|(x, c)| (x - c).abs()).max().unwrap_or_else(Q::zero);
    let containment = d + qi(2) * &rho_a <= qi(2) * &b.radius;
    let sm = t.sup_multiplier();
    let rx3t = &eight_lambda * &rho_a * &sm * &sm >= pow2(-((b.m + b.n) as i64));

    let new_flag = flag.with(&v_a)?;
    let (new_ball, new_certificate) = if rho_a.is_positive() {
        let nb = b.with_ball(a.to_vec(), rho_a.clone())?;
        let cert = check_permissible(&nb, &new_flag, eta, &eight_lambda, t, pool)?;
        (nb, cert)
    } else {
        let fail = Permissibility { flag_in_w: false, addable_in_b: false, addable_checked: 0, failures: vec!["zero radius".into()] };
        (b.clone(), fail)
    };
    let out = InductiveStep {
        v_a,
        rho_a,
        ball: new_ball,
        radii,
        vpermissible,
        containment,
        rx3t,
        new_flag,
        new_lambda: eight_lambda,
        new_certificate,
    };
    if !out.holds() {
        return Err(Error::assertion("inductive step checks", report_json(&out)));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmallVertex {
    pub vertex: RationalSubspace,
    /// Flag index `i` with `v ∉ V_i`, `v ∈ V_{i+1}`.
    pub index: usize,
    pub shortest: Vec<i128>,
    #[serde(with = "crate::rational::serde_q")]
    pub shortest_len_sq: Q,
    #[serde(with = "crate::rational::serde_q")]
    pub f_sq: Q,
    /// `ln` of both sides of `f_{t,V}(A) ≤ e^{−γ‖t‖∞} κ η(dim V − 1)`.
    pub ln_lhs: f64,
    pub ln_rhs: f64,
    pub bound_holds: bool,
    pub sub_invariant_holds: bool,
}

/// Vertex of a maximal flag in `𝒲(η,S)` with small covolume at `A ∈ W_{κ,t}`.
pub fn extract_small_vertex(
    s: &SupportBall,
    flag: &Flag,
    eta: &EtaProfile,
    a: &[Q],
    t: &RationalFlowPoint,
    gamma: &Q,
    kappa: &Q,
) -> Result<SmallVertex> {
    if !flag.is_maximal() {
        return Err(Error::invalid("the flag must be maximal"));
    }
    if !s.contains(a) {
        return Err(Error::invalid("A must be a support point of S"));
    }
    let am = s.matrix(a);
    if !in_w_kappa_t(&am, kappa, t, gamma)? {
        return Err(Error::invalid("A is not in W_{κ,t}"));
    }
    for v in &flag.members {
        if !below(&f_t_set(s, v, t)?, eta.at(v.dim())) {
            return Err(Error::invalid(format!("flag member {} is not in W(eta, S)", describe(v))));
        }
    }
    let sv = shortest_vector(&lattice_rows(&am, t)?)?;
    let coeffs: Vec<i128> = sv
        .coeffs
        .iter()
        .map(|c| c.to_i128().ok_or_else(|| Error::invalid("shortest vector exceeds 128 bits")))
        .collect::<Result<_>>()?;
    let index = flag
        .members
        .iter()
        .rposition(|v| !v.contains_vec(&coeffs))
        .ok_or_else(|| Error::Degenerate("zero shortest vector".into()))?;
    let vertex = flag.members[index + 1].clone();
    let f_sq = f_tv_sq(&am, t, &vertex)?;
    let f_prev = f_tv_sq(&am, t, &flag.members[index])?;
    let sub_invariant_holds = f_sq <= &sv.len_sq * &f_prev;

    let eta_j = eta.at(vertex.dim() - 1);
    let (ga, gb) = (
        gamma.numer().to_u32().ok_or_else(|| Error::invalid("γ too large"))?,
        gamma.denom().to_u32().ok_or_else(|| Error::invalid("γ too finely specified"))?,
    );
    let l = gb.lcm(&eta_j.index);
    let sm = t.sup_multiplier();
    // f^{2L} e^{2γL‖t‖} ≤ κ^{2L} η^{2L}
    let lhs = pow_q(&f_sq, l) * pow_q(&sm, 2 * ga * (l / gb));
    let rhs = pow_q(kappa, 2 * l) * pow_q(&eta_j.radicand, 2 * (l / eta_j.index));
    let bound_holds = lhs <= rhs;
    let ln_sm = crate::rational::ln_abs(&sm);
    let out = SmallVertex {
        vertex,
        index,
        shortest: coeffs,
        shortest_len_sq: sv.len_sq,
        ln_lhs: 0.5 * crate::rational::ln_abs(&f_sq),
        ln_rhs: -to_f64(gamma) * ln_sm + crate::rational::ln_abs(kappa) + eta_j.ln(),
        f_sq,
        bound_holds,
        sub_invariant_holds,
    };
    if !(out.bound_holds && out.sub_invariant_holds) {
        return Err(Error::assertion("small vertex bound", report_json(&out)));
    }
    Ok(out)
}

/// `κ_t` as a function of `s = ‖t‖∞`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KappaRule {
    Constant { kappa: String },
    /// `κ_t = e^{−rate·s}`, rounded to a dyadic rational.
    Exponential { rate: f64 },
}

impl KappaRule {
    pub fn kappa(&self, s: f64) -> Result<Q> {
        let k = match self {
            KappaRule::Constant { kappa } => crate::rational::parse_q(kappa)?,
            KappaRule::Exponential { rate } => q_from_f64((-rate * s).exp()),
        };
        if !k.is_positive() || k > Q::one() {
            return Err(Error::invalid("κ must lie in (0, 1]"));
        }
        Ok(k)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayRow {
    pub tau: f64,
    pub s: f64,
    pub kappa: f64,
    pub hits: usize,
    pub samples: usize,
    pub fraction: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Lower bound hypothesis `sup f_{t,V} ≥ κ^{dim V}` on the first samples and the height-1 pool.
    pub lower_bound_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TreeDemo {
    pub tau: f64,
    pub balls: usize,
    pub children: usize,
    pub disjoint: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayExperiment {
    pub rows: Vec<DecayRow>,
    /// `−slope` of the weighted fit of `ln(fraction)` against `s`.
    pub epsilon_hat: Option<f64>,
    pub epsilon_se: Option<f64>,
    pub decays: bool,
    pub note: String,
    pub tree: Option<TreeDemo>,
}

/// Draw an exact `M×N` sample from `mu` restricted to `b0`.
fn draw(mu: &dyn MeasureOracle, b0: &Ball<f64>, rng: &mut dyn RngCore) -> Option<Vec<Q>> {
    for _ in 0..10_000 {
        let p = mu.sample_exact(rng).unwrap_or_else(|| mu.sample(rng).into_iter().map(q_from_f64).collect());
        let pf: Vec<f64> = p.iter().map(to_f64).collect();
        if b0.contains(&pf) {
            return Some(p);
        }
    }
    None
}

/// Monte Carlo estimate of `μ(W_{κ,t} ∩ B₀)` along a ray of exact flows.
#[allow(clippy::too_many_arguments)]
pub fn measure_decay_experiment(
    mu: &dyn MeasureOracle,
    m: usize,
    n: usize,
    b0: &Ball<f64>,
    gamma: &Q,
    ray: &[RationalFlowPoint],
    kappa_rule: &KappaRule,
    n_samples: usize,
    seed: u64,
) -> Result<DecayExperiment> {
    if mu.dim() != m * n || b0.dim() != m * n {
        return Err(Error::DimensionMismatch { expected: m * n, got: mu.dim() });
    }
    if n_samples == 0 || ray.len() < 2 {
        return Err(Error::invalid("need samples and at least two flow points"));
    }
    let pool = vertex_pool(m + n, 1)?;
    let mut rows = Vec::with_capacity(ray.len());
    let mut hit_sets: Vec<Vec<Vec<Q>>> = Vec::new();
    for (idx, t) in ray.iter().enumerate() {
        let s = t.t().iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let kappa = kappa_rule.kappa(s)?;
        let mut rng = crate::stream_rng(seed, idx as u64);
        let samples: Vec<Vec<Q>> = (0..n_samples)
            .map(|_| draw(mu, b0, &mut rng))
            .collect::<Option<_>>()
            .ok_or_else(|| Error::Degenerate("the measure gives B₀ no visible mass".into()))?;
        let flags: Vec<bool> = samples
            .par_iter()
            .map(|a| in_w_kappa_t(&a.chunks(n).map(|r| r.to_vec()).collect::<Vec<_>>(), &kappa, t, gamma))
            .collect::<Result<_>>()?;
        let hits = flags.iter().filter(|&&f| f).count();
        let (p, lo, hi) = wilson(hits, n_samples, 1.96);
        let probe: Vec<Vec<Q>> = samples.iter().take(64).cloned().collect();
        let center: Vec<Q> = b0.center.iter().map(|&c| q_from_f64(c)).collect();
        let sball = SupportBall::new(m, n, center, q_from_f64(b0.radius), Support::Samples(probe))?;
        let mut lower_bound_ok = true;
        for v in pool.iter().filter(|v| v.dim() > 0) {
            let f = f_t_set(&sball, v, t)?;
            if f < pow_q(&kappa, 2 * v.dim() as u32) {
                lower_bound_ok = false;
            }
        }
        hit_sets.push(samples.into_iter().zip(&flags).filter(|(_, &f)| f).map(|(a, _)| a).collect());
        rows.push(DecayRow { tau: t.t()[0] * m as f64, s, kappa: to_f64(&kappa), hits, samples: n_samples, fraction: p, ci_lo: lo, ci_hi: hi, lower_bound_ok });
    }

    let used: Vec<&DecayRow> = rows.iter().filter(|r| r.hits > 0).collect();
    let (mut epsilon_hat, mut epsilon_se, mut note) = (None, None, String::new());
    if used.len() >= 2 {
        let x: Vec<f64> = used.iter().map(|r| r.s).collect();
        let y: Vec<f64> = used.iter().map(|r| r.fraction.ln()).collect();
        // inverse delta-method variance of ln p̂
        let w: Vec<f64> = used
            .iter()
            .map(|r| r.hits as f64 / (1.0 - r.fraction).max(1.0 / r.samples as f64))
            .collect();
        let fit = weighted_fit(&x, &y, &w)?;
        let sw: f64 = w.iter().sum();
        let mx = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
        let sxx: f64 = x.iter().zip(&w).map(|(a, b)| b * (a - mx) * (a - mx)).sum();
        epsilon_hat = Some(-fit.slope);
        epsilon_se = Some((1.0 / sxx).sqrt());
    } else {
        note = "at most one flow point has hits; decay rate is at or below the resolution 1/n".into();
    }
    if rows.iter().any(|r| r.hits == 0) && note.is_empty() {
        note = "flow points without hits are excluded from the fit (fraction below 1/n)".into();
    }
    let first = rows.first().map_or(0.0, |r| r.fraction);
    let last = rows.last().map_or(0.0, |r| r.fraction);
    let decays = match (epsilon_hat, epsilon_se) {
        (Some(e), Some(se)) => e > 2.0 * se && e > 0.0,
        _ => first > 0.0 && last == 0.0,
    };

    let tree = rows.iter().zip(&hit_sets).rev().find(|(r, h)| r.hits >= 2 && h.len() >= 2).map(|(r, h)| {
        let radius = (-r.s).exp();
        let balls: Vec<Ball<f64>> = h
            .iter()
            .map(|a| Ball { center: a.iter().map(to_f64).collect(), radius, norm: Norm::Sup })
            .collect();
        let kept = four_r_select(&balls).unwrap_or_default();
        let quarter = |b: &Ball<f64>| Ball { center: b.center.clone(), radius: b.radius / 4.0, norm: b.norm };
        let disjoint = kept
            .iter()
            .enumerate()
            .all(|(i, &x)| kept[i + 1..].iter().all(|&y| !quarter(&balls[x]).intersects(&quarter(&balls[y]))));
        TreeDemo { tau: r.tau, balls: balls.len(), children: kept.len(), disjoint }
    });
    Ok(DecayExperiment { rows, epsilon_hat, epsilon_se, decays, note, tree })
}

/// Exact flows `t = (τ/M, …, −τ/N, …)` with dyadic multipliers.
pub fn s0_flows(m: usize, n: usize, taus: &[f64]) -> Vec<RationalFlowPoint> {
    taus.iter().map(|&tau| crate::homdyn::FlowPoint::s0_ray(m, n, tau).to_rational()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::qr;

    fn line(v: &[i128]) -> RationalSubspace {
        RationalSubspace::span(&[v.to_vec()], v.len()).unwrap()
    }

    #[test]
    fn constant_tables() {
        let c = constants_c_lambda(1, 1);
        assert_eq!(c.c, vec![BigInt::from(1), BigInt::from(4), BigInt::from(1)]);
        for (m, n) in [(1, 2), (2, 2), (3, 1)] {
            let c = constants_c_lambda(m, n);
            let d = m + n;
            assert_eq!(c.c[0], BigInt::one());
            assert_eq!(c.c[d], BigInt::one());
            for i in 1..d {
                // C_i = 4 sqrt(C_{i−1} C_{i+1})  ⟺  C_i² = 16 C_{i−1} C_{i+1}
                assert_eq!(&c.c[i] * &c.c[i], BigInt::from(16) * &c.c[i - 1] * &c.c[i + 1]);
                assert_eq!(&c.normalizer[i] * &c.normalizer[i], BigInt::from(64) * &c.normalizer[i - 1] * &c.normalizer[i + 1]);
            }
            assert_eq!(c.lambda[2], BigInt::from(128));
        }
    }

    #[test]
    fn addability() {
        let f = Flag::trivial(2);
        assert!(f.is_addable(&line(&[1, 1])));
        let max = f.with(&line(&[1, 0])).unwrap();
        assert!(max.is_maximal());
        assert!(vertex_pool(2, 2).unwrap().iter().all(|v| !max.is_addable(v)));
        let plane = RationalSubspace::span(&[vec![1, 0, 0], vec![0, 1, 0]], 3).unwrap();
        let f3 = Flag::trivial(3).with(&plane).unwrap();
        assert!(f3.is_addable(&line(&[1, 1, 0])));
        assert!(!f3.is_addable(&line(&[0, 0, 1])));
        assert!(!f3.is_addable(&RationalSubspace::span(&[vec![1, 0, 0], vec![0, 0, 1]], 3).unwrap()));
    }

    #[test]
    fn f_t_set_examples() {
        let t = RationalFlowPoint::new(vec![qi(4), qr(1, 4)]).unwrap();
        let s = SupportBall::new(1, 1, vec![qr(1, 3)], qr(1, 10), Support::Samples(vec![vec![qr(1, 3)]])).unwrap();
        let v = line(&[1, 1]);
        assert_eq!(f_t_set(&s, &v, &t).unwrap(), f_tv_sq(&[vec![qr(1, 3)]], &t, &v).unwrap());
        assert_eq!(f_t_set(&s, &RationalSubspace::full(2), &t).unwrap(), qi(1));
        let b = SupportBall::unit_box(1, 1, vec![qr(1, 2)], qr(1, 8)).unwrap();
        let small = f_t_set(&b, &v, &t).unwrap();
        let big = f_t_set(&b.dilate(&qi(2)), &v, &t).unwrap();
        assert!(big >= small);
        // exact sup on an interval: f² is a convex quadratic in a, compare with a fine grid
        for k in 0..=32 {
            let a = qr(3, 8) + qr(k, 128);
            assert!(f_tv_sq(&[vec![a]], &t, &v).unwrap() <= small);
        }
    }

    #[test]
    fn classification_by_hand() {
        // t = 0, A = 0: the lattice is Z², f of a line spanned by (p,q) is sqrt(p²+q²)
        let t = RationalFlowPoint::new(vec![qi(1), qi(1)]).unwrap();
        let s = SupportBall::new(1, 1, vec![qi(0)], qr(1, 4), Support::Samples(vec![vec![qi(0)]])).unwrap();
        let pool = enumerate_vertices(2, 1, 1000).unwrap();
        assert_eq!(pool.len(), 4);
        let eta = EtaProfile::constant(2, qr(6, 5)).unwrap();
        let c = classify_vertices(&eta, &s, &t, &pool).unwrap();
        for (i, v) in pool.iter().enumerate() {
            let b = &v.basis[0];
            let norm_sq = b[0] * b[0] + b[1] * b[1];
            assert_eq!(c.f_sq[i], qi(norm_sq as i64));
            assert_eq!(c.approximable.contains(&i), norm_sq == 1);
        }
        let all = classify_vertices(&EtaProfile::constant(2, qi(100)).unwrap(), &s, &t, &pool).unwrap();
        assert!(all.bad.is_empty());
        let none = classify_vertices(&EtaProfile::constant(2, qr(1, 2)).unwrap(), &s, &t, &pool).unwrap();
        assert!(none.approximable.is_empty());
    }

    #[test]
    fn trivial_base_case() {
        // coordinate pool, A = 0, t = 0: every line has f = 1, so g = log(1/8) < 0
        let t = RationalFlowPoint::new(vec![qi(1), qi(1)]).unwrap();
        let s = SupportBall::new(1, 1, vec![qi(0)], qr(1, 4), Support::Samples(vec![vec![qi(0)]])).unwrap();
        let pool = vec![RationalSubspace::zero(2), line(&[1, 0]), line(&[0, 1]), RationalSubspace::full(2)];
        let bc = base_case(&s, &t, &pool).unwrap();
        assert!(bc.flag.is_maximal());
        assert_eq!(bc.eta.at(2), &Surd { radicand: qr(1, 4), index: 2 });
        assert!(bc.certificate.holds());
    }

    #[test]
    fn golden_base_case() {
        let g = crate::rational::parse_q("0.6180339887498948482045868343656381177203").unwrap();
        let t = RationalFlowPoint::dyadic_ray(1, 1, 2);
        let s = SupportBall::unit_box(1, 1, vec![g.clone()], qr(1, 16)).unwrap();
        let pool = vertex_pool(2, 2).unwrap();
        let bc = base_case(&s, &t, &pool).unwrap();
        assert!(bc.certificate.sup_exact);
        assert!(bc.eta.concavity_failures(&bc.flag.dims()).is_empty());
    }

    #[test]
    fn inductive_step_from_base_case() {
        // e^τ = 16 on 2B₀ = [0,1]: every line is bad, the base flag is trivial
        let t = RationalFlowPoint::dyadic_ray(1, 1, 4);
        let s = SupportBall::unit_box(1, 1, vec![qr(1, 2)], qr(1, 4)).unwrap();
        let pool = vertex_pool(2, 2).unwrap();
        let bc = base_case(&s, &t, &pool).unwrap();
        assert_eq!(bc.flag.length(), 1);
        let step = inductive_step(&s, &bc.flag, &bc.eta, &qi(2), &[qr(9, 16)], &t, &pool).unwrap();
        assert!(step.holds());
        assert!(step.new_flag.is_maximal());
        let err = inductive_step(&s, &step.new_flag, &bc.eta, &qi(2), &[qr(1, 2)], &t, &pool).unwrap_err();
        assert!(!err.is_assertion());
    }

    #[test]
    fn radius_condition_is_monotone() {
        let t = RationalFlowPoint::dyadic_ray(1, 1, 4);
        let s = SupportBall::unit_box(1, 1, vec![qr(1, 2)], qr(1, 8)).unwrap();
        let v = line(&[1, 2]);
        let eta = Surd::rational(qi(4)).unwrap();
        let mut prev = false;
        for k in -20..2 {
            let ball = s.with_ball(vec![qr(5, 11)], qi(16) * pow2(k)).unwrap();
            let now = !below(&f_t_set(&ball, &v, &t).unwrap(), &eta);
            assert!(!prev || now);
            prev = now;
        }
    }

    #[test]
    fn small_vertex_diagonal() {
        // A = 0, t on the ray: shortest vector e_2-type with length e^{−τ}
        let t = RationalFlowPoint::dyadic_ray(1, 1, 3);
        let a = vec![qi(0)];
        let s = SupportBall::new(1, 1, a.clone(), qr(1, 4), Support::Samples(vec![a.clone()])).unwrap();
        let flag = Flag::trivial(2).with(&line(&[0, 1])).unwrap();
        let eta = EtaProfile { values: flag.members.iter().map(|v| Surd::sqrt(f_t_set(&s, v, &t).unwrap()).unwrap()).collect() };
        let r = extract_small_vertex(&s, &flag, &eta, &a, &t, &qr(1, 2), &qr(1, 2)).unwrap();
        assert_eq!(r.vertex, line(&[0, 1]));
        assert_eq!(r.index, 0);
        let t0 = RationalFlowPoint::new(vec![qi(1), qi(1)]).unwrap();
        let eta0 = EtaProfile { values: flag.members.iter().map(|v| Surd::sqrt(f_t_set(&s, v, &t0).unwrap()).unwrap()).collect() };
        let r1 = extract_small_vertex(&s, &flag, &eta0, &a, &t0, &qi(0), &qi(1));
        assert!(r1.unwrap().bound_holds);
    }

    #[test]
    fn point_mass_does_not_decay() {
        let mu = crate::measures::PointMass::new(vec![qr(1, 2)], 1.0).unwrap();
        let b0 = Ball::new(vec![0.5], 0.5, Norm::Sup).unwrap();
        let ray = s0_flows(1, 1, &[2.0, 4.0, 6.0]);
        let rule = KappaRule::Constant { kappa: "1".into() };
        let e = measure_decay_experiment(&mu, 1, 1, &b0, &qr(1, 2), &ray, &rule, 50, 1).unwrap();
        assert!(e.rows.iter().all(|r| r.hits == 50));
        assert!(!e.decays);
    }
}
