//! Seeded random instance suites for the exact identity checks.

use num_traits::{One, ToPrimitive};
use rand::Rng as _;
use serde::Serialize;

use crate::dioph::{simplex_hyperplane, SimplexHull};
use crate::error::{Error, Result};
use crate::flags::{
    base_case, extract_small_vertex, f_t_set, inductive_step, vertex_pool, EtaProfile, Flag, Support, SupportBall,
};
use crate::homdyn::{in_w_kappa_t, lattice_rows, shortest_vector, RationalFlowPoint};
use crate::plucker::{enumerate_vertices, primitive_vectors, verify_ftv_identity, RationalSubspace};
use crate::rational::{pow2, qi, qr, Surd, Q};
use crate::Rng;

/// `p/q` with `1 ≤ q ≤ max_den` and `|p/q| ≤ bound`.
pub fn random_rational(rng: &mut Rng, max_den: i64, bound: i64) -> Q {
    let q = rng.gen_range(1..=max_den);
    let p = rng.gen_range(-bound * q..=bound * q);
    qr(p, q)
}

/// Multipliers `2^{k_i}` with `|k_i| ≤ max_k` and `Σ k_i = 0`.
pub fn random_dyadic_flow(rng: &mut Rng, dim: usize, max_k: i64) -> RationalFlowPoint {
    loop {
        let mut k: Vec<i64> = (0..dim - 1).map(|_| rng.gen_range(-max_k..=max_k)).collect();
        let last = -k.iter().sum::<i64>();
        if last.abs() <= max_k {
            k.push(last);
            return RationalFlowPoint::new(k.into_iter().map(pow2).collect()).expect("product one");
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PluckerCase {
    pub m: usize,
    pub n: usize,
    #[serde(with = "crate::rational::serde_qmat")]
    pub a: Vec<Vec<Q>>,
    pub flow: RationalFlowPoint,
    pub vertex: RationalSubspace,
    #[serde(with = "crate::rational::serde_q")]
    pub covolume_sq: Q,
    #[serde(with = "crate::rational::serde_q")]
    pub norm_sq: Q,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PluckerSuite {
    pub trials: usize,
    pub passes: usize,
    pub cases: Vec<PluckerCase>,
}

/// Subspace spanned by `k` random primitive vectors of height `≤ h`, `k`
/// uniform in `1..=n` (redrawn until the span has dimension `k`).
pub fn random_vertex(rng: &mut Rng, prim: &[Vec<i128>], n: usize) -> Result<RationalSubspace> {
    let k = rng.gen_range(1..=n);
    loop {
        let vs: Vec<Vec<i128>> = (0..k).map(|_| prim[rng.gen_range(0..prim.len())].clone()).collect();
        let v = RationalSubspace::span(&vs, n)?;
        if v.dim() == k {
            return Ok(v);
        }
    }
}

/// Random `(A, t, V)`: entries with denominators `≤ max_den` in `[−2, 2]`,
/// multipliers `2^{±k}` with `k ≤ max_k`, `V` spanned by vectors of height `≤ h`.
pub fn random_plucker_case(rng: &mut Rng, m: usize, n: usize, max_den: i64, max_k: i64, h: i128) -> Result<(Vec<Vec<Q>>, RationalFlowPoint, RationalSubspace)> {
    let a: Vec<Vec<Q>> = (0..m).map(|_| (0..n).map(|_| random_rational(rng, max_den, 2)).collect()).collect();
    let flow = random_dyadic_flow(rng, m + n, max_k);
    let v = random_vertex(rng, &primitive_vectors(m + n, h), m + n)?;
    Ok((a, flow, v))
}

/// `trials` instances with `(M, N)` drawn from `shapes`.
pub fn plucker_suite(shapes: &[(usize, usize)], trials: usize, max_den: i64, max_k: i64, h: i128, seed: u64) -> Result<PluckerSuite> {
    if shapes.is_empty() {
        return Err(Error::invalid("no shapes given"));
    }
    let mut rng = crate::stream_rng(seed, 0x42);
    let mut cases = Vec::with_capacity(trials);
    for _ in 0..trials {
        let (m, n) = shapes[rng.gen_range(0..shapes.len())];
        let (a, flow, vertex) = random_plucker_case(&mut rng, m, n, max_den, max_k, h)?;
        let c = verify_ftv_identity(&a, &flow, &vertex)?;
        cases.push(PluckerCase { m, n, a, flow, vertex, covolume_sq: c.covolume_sq, norm_sq: c.norm_sq, holds: c.holds });
    }
    let passes = cases.iter().filter(|c| c.holds).count();
    Ok(PluckerSuite { trials, passes, cases })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimplexCase {
    #[serde(with = "crate::rational::serde_qvec")]
    pub y: Vec<Q>,
    #[serde(with = "crate::rational::serde_q")]
    pub rho: Q,
    pub q: u64,
    pub points: usize,
    /// `"empty"`, `"point"` or `"hyperplane"`; `"simplex"` on failure.
    pub hull: String,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimplexSuite {
    pub trials: usize,
    pub passes: usize,
    pub cases: Vec<SimplexCase>,
}

/// Random `y ∈ [0,1]^d` (denominators `≤ 1000`) and `ρ = 2^{−k}`, `2 ≤ k ≤ max_k`.
pub fn simplex_suite(dims: &[usize], trials: usize, max_k: i64, seed: u64) -> Result<SimplexSuite> {
    let mut rng = crate::stream_rng(seed, 0x23);
    let mut cases = Vec::with_capacity(trials);
    for _ in 0..trials {
        let d = dims[rng.gen_range(0..dims.len())];
        let y: Vec<Q> = (0..d).map(|_| qr(rng.gen_range(0..=1000), 1000)).collect();
        let rho = pow2(-rng.gen_range(2..=max_k));
        let case = match simplex_hyperplane(&y, &rho, None) {
            Ok(r) => SimplexCase {
                hull: match r.hull {
                    SimplexHull::Empty => "empty",
                    SimplexHull::Point(_) => "point",
                    SimplexHull::Hyperplane(_) => "hyperplane",
                }
                .into(),
                q: r.q,
                points: r.points.len(),
                y,
                rho,
                holds: true,
            },
            Err(e) if e.is_assertion() => SimplexCase { y, rho, q: 0, points: 0, hull: "simplex".into(), holds: false },
            Err(e) => return Err(e),
        };
        cases.push(case);
    }
    let passes = cases.iter().filter(|c| c.holds).count();
    Ok(SimplexSuite { trials, passes, cases })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlagCase {
    #[serde(with = "crate::rational::serde_q")]
    pub center: Q,
    #[serde(with = "crate::rational::serde_q")]
    pub radius: Q,
    #[serde(with = "crate::rational::serde_q")]
    pub a: Q,
    pub k: u32,
    pub base_ok: bool,
    pub base_flag_dims: Vec<usize>,
    /// `(dim V, ln f_t(B,V))` over the base flag.
    pub flag_plot: Vec<(usize, f64)>,
    /// `(j, ln η(j))`.
    pub eta_plot: Vec<(usize, f64)>,
    pub step_ok: Option<bool>,
    pub vpermissible: Option<bool>,
    pub containment: Option<bool>,
    pub rx3t: Option<bool>,
    pub small_vertex_ok: bool,
    #[serde(with = "crate::rational::serde_q")]
    pub small_vertex_gamma: Q,
    /// Matrix used for extraction: `A` itself, or a redraw when no `κ ≤ 1` puts `A` in `W_{κ,t}`.
    #[serde(with = "crate::rational::serde_q")]
    pub small_vertex_a: Q,
    pub errors: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlagSuite {
    pub trials: usize,
    pub base_passes: usize,
    pub step_passes: usize,
    pub step_applicable: usize,
    pub small_vertex_passes: usize,
    pub cases: Vec<FlagCase>,
}

impl FlagSuite {
    pub fn all_pass(&self) -> bool {
        self.base_passes == self.trials && self.step_passes == self.step_applicable && self.small_vertex_passes == self.trials
    }
}

/// Smallest `2^j ≥ x` with `j ≤ 0`, as an exact dyadic, or `None` if `x > 1`.
fn dyadic_ceiling(x: f64) -> Option<Q> {
    if x > 1.0 {
        return None;
    }
    let mut k = 0i64;
    while pow2(-(k + 1)).to_f64().unwrap_or(0.0) >= x && k < 1000 {
        k += 1;
    }
    Some(pow2(-k))
}

/// Flag-machine suite for `M = N = 1`, pool height `h`. Each instance draws
/// `B₀ = B(c, 1/4)` with `c` within `1/32` of `1/2`, `t` on the dyadic ray
/// `e^τ = 16`, and `A` within `1/16` of `1/2`.
pub fn flag_suite(trials: usize, h: i128, seed: u64) -> Result<FlagSuite> {
    let pool = vertex_pool(2, h)?;
    let mut rng = crate::stream_rng(seed, 0x48);
    let k = 4;
    let t = RationalFlowPoint::dyadic_ray(1, 1, k);
    let mut cases = Vec::with_capacity(trials);
    for _ in 0..trials {
        let center = qr(1, 2) + qr(rng.gen_range(-4..=4), 128);
        let radius = qr(1, 4);
        let a = qr(1, 2) + qr(rng.gen_range(-8..=8), 128);
        let gamma_pick = rng.gen_range(0..3usize);
        let b0 = SupportBall::unit_box(1, 1, vec![center.clone()], radius.clone())?;
        let mut case = FlagCase {
            center: center.clone(),
            radius: radius.clone(),
            a: a.clone(),
            k,
            base_ok: false,
            base_flag_dims: Vec::new(),
            flag_plot: Vec::new(),
            eta_plot: Vec::new(),
            step_ok: None,
            vpermissible: None,
            containment: None,
            rx3t: None,
            small_vertex_ok: false,
            small_vertex_gamma: qi(0),
            small_vertex_a: a.clone(),
            errors: Vec::new(),
        };
        match base_case(&b0, &t, &pool) {
            Ok(bc) => {
                case.base_ok = bc.certificate.holds();
                case.base_flag_dims = bc.flag.dims();
                case.flag_plot = bc.flag.members.iter().zip(&bc.flag_f_sq).map(|(v, f)| (v.dim(), 0.5 * crate::rational::ln_abs(f))).collect();
                case.eta_plot = (0..=2).map(|j| (j, bc.eta.at(j).ln())).collect();
                if !bc.flag.is_maximal() && b0.contains(std::slice::from_ref(&a)) {
                    match inductive_step(&b0, &bc.flag, &bc.eta, &qi(2), std::slice::from_ref(&a), &t, &pool) {
                        Ok(st) => {
                            case.step_ok = Some(st.holds());
                            case.vpermissible = Some(st.vpermissible);
                            case.containment = Some(st.containment);
                            case.rx3t = Some(st.rx3t);
                        }
                        Err(e) => {
                            case.step_ok = Some(false);
                            case.errors.push(format!("inductive step: {e}"));
                        }
                    }
                }
            }
            Err(e) => case.errors.push(format!("base case: {e}")),
        }
        match small_vertex_instance(&mut rng, &t, &a, gamma_pick, h) {
            Ok((ok, g, used)) => {
                case.small_vertex_ok = ok;
                case.small_vertex_gamma = g;
                case.small_vertex_a = used;
            }
            Err(e) => case.errors.push(format!("small vertex: {e}")),
        }
        cases.push(case);
    }
    let base_passes = cases.iter().filter(|c| c.base_ok).count();
    let step_applicable = cases.iter().filter(|c| c.step_ok.is_some()).count();
    let step_passes = cases.iter().filter(|c| c.step_ok == Some(true)).count();
    let small_vertex_passes = cases.iter().filter(|c| c.small_vertex_ok).count();
    Ok(FlagSuite { trials, base_passes, step_passes, step_applicable, small_vertex_passes, cases })
}

/// `‖g_t u_A‖`-shortest length and `e^{‖t‖∞}` as floats.
fn shortest_and_scale(a: &Q, t: &RationalFlowPoint) -> Result<(f64, f64)> {
    let am = vec![vec![a.clone()]];
    let len = shortest_vector(&lattice_rows(&am, t)?)?.len_sq.to_f64().unwrap_or(f64::MAX).sqrt();
    Ok((len, t.sup_multiplier().to_f64().unwrap_or(f64::MAX)))
}

/// Random maximal flag `{0} ⊂ ℓ ⊂ R²` with `η` the exact covolumes and the
/// smallest dyadic `κ` putting `A` in `W_{κ,t}`. `γ` is the `pick`-th feasible
/// value of `0, 1/4, 1/2` (cyclically). When no `κ ≤ 1` works for `A`, a fresh
/// `A = 1/2 + j/128` is drawn until one does.
fn small_vertex_instance(rng: &mut Rng, t: &RationalFlowPoint, a: &Q, pick: usize, h: i128) -> Result<(bool, Q, Q)> {
    let lines = enumerate_vertices(2, h, 10_000)?;
    let line = lines[rng.gen_range(0..lines.len())].clone();
    let flag = Flag::trivial(2).with(&line)?;
    let feasible_for = |a: &Q| -> Result<Vec<Q>> {
        let (len, sm) = shortest_and_scale(a, t)?;
        Ok([qi(0), qr(1, 4), qr(1, 2)].into_iter().filter(|g| len * sm.powf(g.to_f64().unwrap_or(0.0)) <= 1.0).collect())
    };
    let mut a = a.clone();
    let mut feasible = feasible_for(&a)?;
    for _ in 0..256 {
        if !feasible.is_empty() {
            break;
        }
        a = qr(1, 2) + qr(rng.gen_range(-8..=8), 128);
        feasible = feasible_for(&a)?;
    }
    if feasible.is_empty() {
        return Err(Error::Degenerate("no γ admits κ ≤ 1".into()));
    }
    let s = SupportBall::new(1, 1, vec![a.clone()], qr(1, 4), Support::Samples(vec![vec![a.clone()]]))?;
    let eta = EtaProfile {
        values: flag.members.iter().map(|v| Surd::sqrt(f_t_set(&s, v, t)?)).collect::<Result<_>>()?,
    };
    let am = vec![vec![a.clone()]];
    let (len, sm) = shortest_and_scale(&a, t)?;
    let gamma = &feasible[pick % feasible.len()];
    let gf = gamma.to_f64().unwrap_or(0.0);
    let Some(mut kappa) = dyadic_ceiling(len * sm.powf(gf)) else {
        return Err(Error::Degenerate("no κ ≤ 1 puts A in W_{κ,t}".into()));
    };
    // float rounding may land one dyadic short
    while !in_w_kappa_t(&am, &kappa, t, gamma)? {
        kappa *= qi(2);
        if kappa > Q::one() {
            return Err(Error::Degenerate("no κ ≤ 1 puts A in W_{κ,t}".into()));
        }
    }
    let r = extract_small_vertex(&s, &flag, &eta, std::slice::from_ref(&a), t, gamma, &kappa)?;
    Ok((r.bound_holds && r.sub_invariant_holds, gamma.clone(), a))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plucker_suite_passes() {
        let s = plucker_suite(&[(1, 1), (1, 2), (2, 1), (2, 2)], 20, 16, 3, 2, 1).unwrap();
        assert_eq!(s.passes, 20);
    }

    #[test]
    fn simplex_suite_passes() {
        let s = simplex_suite(&[1, 2], 20, 8, 2).unwrap();
        assert_eq!(s.passes, 20, "{:?}", s.cases.iter().find(|c| !c.holds));
    }

    #[test]
    fn flag_suite_small() {
        let s = flag_suite(6, 2, 3).unwrap();
        for c in &s.cases {
            assert!(c.errors.is_empty(), "{:?}", c.errors);
        }
        assert!(s.all_pass());
    }
}
