//! Empirical testers for doubling and decay conditions: local dimension,
//! Federer ratios, adversarial hyperplane search, decay profiles, the
//! sublevel-set cover, the simplex covering sum, and the spike-measure search.

use num_traits::{Signed, ToPrimitive, Zero};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dioph::{default_eps, height_bound, simplex_hyperplane_with_q, SimplexHull};
use crate::error::{Error, Result};
use crate::geometry::{greedy_maximal_net, Ball, Hyperplane, Norm};
use crate::measures::{Counterexample, MassBracket, MeasureOracle, Region};
use crate::poly::Poly;
use crate::rational::{ln_abs, pow_q, q_from_f64, to_f64, Q};
use crate::stats::{linear_fit, slope_interval, LineFit};

/// Mass bracket refined until its width is at most `rel` times its lower end.
pub fn region_mass_rel(mu: &dyn MeasureOracle, region: &Region, rel: f64) -> MassBracket {
    let total = mu.total_mass();
    let mut tol = 1e-2 * total;
    let mut b = mu.region_mass(region, tol);
    for _ in 0..4 {
        if b.hi <= 0.0 || b.flagged || b.width() <= rel * b.lo {
            break;
        }
        let next = (0.5 * rel * b.estimate()).max(1e-14 * total);
        if next >= tol {
            break;
        }
        tol = next;
        b = mu.region_mass(region, tol);
    }
    b
}

pub fn ball_mass_rel(mu: &dyn MeasureOracle, ball: &Ball<f64>, rel: f64) -> MassBracket {
    region_mass_rel(mu, &Region::ball(ball), rel)
}

const REL: f64 = 0.02;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScaleMass {
    pub rho: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalDimension {
    pub slope: f64,
    pub slope_lo: f64,
    pub slope_hi: f64,
    pub r_squared: f64,
    pub scales: Vec<ScaleMass>,
    /// Scales whose bracket contains zero.
    pub dropped: Vec<f64>,
}

fn check_geometric(rhos: &[f64]) -> Result<()> {
    if rhos.len() < 4 {
        return Err(Error::invalid("need at least four scales"));
    }
    if rhos.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
        return Err(Error::invalid("scales must lie in (0, 1]"));
    }
    let q = rhos[1] / rhos[0];
    if rhos.windows(2).any(|w| ((w[1] / w[0]) / q - 1.0).abs() > 1e-6) {
        return Err(Error::invalid("scales must form a geometric grid"));
    }
    Ok(())
}

/// `ρ_k = base^k` for `k = k0..=k1`.
pub fn geometric_grid(base: f64, k0: i32, k1: i32) -> Vec<f64> {
    (k0..=k1).map(|k| base.powi(k)).collect()
}

/// Slope of `log μ(B(x,ρ))` against `log ρ`.
pub fn local_dimension(mu: &dyn MeasureOracle, x: &[f64], rhos: &[f64], norm: Norm) -> Result<LocalDimension> {
    check_geometric(rhos)?;
    let mut scales = Vec::new();
    let mut dropped = Vec::new();
    for &rho in rhos {
        let b = ball_mass_rel(mu, &Ball::new(x.to_vec(), rho, norm)?, REL);
        if b.lo <= 0.0 {
            dropped.push(rho);
        } else {
            scales.push(ScaleMass { rho, lo: b.lo, hi: b.hi });
        }
    }
    if scales.len() < 2 {
        return Err(Error::Degenerate("fewer than two scales carry visible mass".into()));
    }
    let lx: Vec<f64> = scales.iter().map(|s| s.rho.ln()).collect();
    let lo: Vec<f64> = scales.iter().map(|s| s.lo.ln()).collect();
    let hi: Vec<f64> = scales.iter().map(|s| s.hi.ln()).collect();
    let mid: Vec<f64> = scales.iter().map(|s| (0.5 * (s.lo + s.hi)).ln()).collect();
    let fit = linear_fit(&lx, &mid)?;
    let (a, b) = slope_interval(&lx, &lo, &hi);
    let (slope_lo, slope_hi) = (a.min(fit.slope), b.max(fit.slope));
    Ok(LocalDimension { slope: fit.slope, slope_lo, slope_hi, r_squared: fit.r_squared, scales, dropped })
}

/// Which centers are admitted as probe centers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EFilter {
    #[default]
    All,
    /// Keep centers whose local dimension estimate lies in `[min, max]`.
    LocalDimension { min: f64, max: f64, rhos: Vec<f64> },
}

impl EFilter {
    pub fn admits(&self, mu: &dyn MeasureOracle, x: &[f64], norm: Norm) -> bool {
        match self {
            EFilter::All => true,
            EFilter::LocalDimension { min, max, rhos } => local_dimension(mu, x, rhos, norm)
                .map(|l| *min <= l.slope && l.slope <= *max)
                .unwrap_or(false),
        }
    }
}

/// `n` centers drawn from `mu` and admitted by `filter`.
pub fn sample_centers(mu: &dyn MeasureOracle, n: usize, filter: &EFilter, norm: Norm, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = crate::stream_rng(seed, 0xce);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n.saturating_mul(50).max(50) {
        if out.len() == n {
            break;
        }
        let x = mu.sample(&mut rng);
        if filter.admits(mu, &x, norm) {
            out.push(x);
        }
    }
    if out.len() < n {
        return Err(Error::Degenerate(format!("only {} of {n} centers passed the filter", out.len())));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FedererEstimate {
    pub worst: f64,
    pub worst_center: Vec<f64>,
    pub worst_rho: f64,
    pub checked: usize,
    pub skipped: usize,
}

/// `max μ(B(x,Kρ))/μ(B(x,ρ))` over probes, outer bracket over inner bracket.
pub fn federer_ratio(mu: &dyn MeasureOracle, k: f64, probes: &[(Vec<f64>, f64)], norm: Norm) -> Result<FedererEstimate> {
    if !(k > 1.0) {
        return Err(Error::invalid("K must exceed 1"));
    }
    let mut est = FedererEstimate { worst: 0.0, worst_center: Vec::new(), worst_rho: 0.0, checked: 0, skipped: 0 };
    for (x, rho) in probes {
        let inner = ball_mass_rel(mu, &Ball::new(x.clone(), *rho, norm)?, REL);
        if inner.lo <= 0.0 {
            est.skipped += 1;
            continue;
        }
        let outer = ball_mass_rel(mu, &Ball::new(x.clone(), k * rho, norm)?, REL);
        est.checked += 1;
        let r = outer.hi / inner.lo;
        if r > est.worst {
            est.worst = r;
            est.worst_center = x.clone();
            est.worst_rho = *rho;
        }
    }
    Ok(est)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuasiFederer {
    pub holds: bool,
    pub c2_hat: f64,
    pub delta: f64,
    /// `(⌊log10 ρ⌋, sup ratio)` per decade.
    pub decades: Vec<(i32, f64)>,
    pub checked: usize,
    pub skipped: usize,
}

/// `δ = ε/(2 log₂ N_X)` with the sup-norm doubling constant `N_X = 6^d`.
pub fn default_delta(eps: f64, d: usize) -> f64 {
    eps / (2.0 * (6f64.powi(d as i32)).log2())
}

/// Sup of `μ(B(x,ρ^{1−δ}))·ρ^ε/μ(B(x,ρ))`; holds when the smallest decade does
/// not exceed the next one by more than half.
pub fn quasi_federer_check(
    mu: &dyn MeasureOracle,
    eps: f64,
    delta: Option<f64>,
    probes: &[(Vec<f64>, f64)],
    norm: Norm,
) -> Result<QuasiFederer> {
    if !(eps > 0.0) {
        return Err(Error::invalid("ε must be positive"));
    }
    let delta = delta.unwrap_or_else(|| default_delta(eps, mu.dim()));
    let mut per: std::collections::BTreeMap<i32, f64> = Default::default();
    let (mut checked, mut skipped) = (0, 0);
    for (x, rho) in probes {
        let inner = ball_mass_rel(mu, &Ball::new(x.clone(), *rho, norm)?, REL);
        if inner.lo <= 0.0 {
            skipped += 1;
            continue;
        }
        let outer = ball_mass_rel(mu, &Ball::new(x.clone(), rho.powf(1.0 - delta), norm)?, REL);
        checked += 1;
        let r = outer.hi * rho.powf(eps) / inner.lo;
        let dec = rho.log10().floor() as i32;
        let e = per.entry(dec).or_insert(0.0);
        *e = e.max(r);
    }
    let decades: Vec<(i32, f64)> = per.into_iter().collect();
    if decades.is_empty() {
        return Err(Error::Degenerate("no probe carried visible mass".into()));
    }
    let c2_hat = decades.iter().map(|d| d.1).fold(0.0, f64::max);
    let holds = decades.len() < 2 || decades[0].1 <= 1.5 * decades[1].1;
    Ok(QuasiFederer { holds, c2_hat, delta, decades, checked, skipped })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WorstPlane {
    pub normal: Vec<f64>,
    pub offset: f64,
    pub half_width: f64,
    pub ratio: f64,
    pub ratio_lo: f64,
    pub ratio_hi: f64,
    pub degenerate: bool,
    pub samples: usize,
}

impl WorstPlane {
    pub fn plane(&self) -> Hyperplane<f64> {
        Hyperplane { normal: self.normal.clone(), offset: self.offset }
    }
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

/// Quasi-uniform unit normals (one per antipodal pair).
fn normal_net(d: usize, count: usize) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0]],
        2 => (0..count)
            .map(|k| {
                let a = std::f64::consts::PI * k as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - (k as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * k as f64;
                    vec![r * a.cos(), r * a.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut rng = crate::stream_rng(d as u64, 0x6e);
            (0..count)
                .map(|_| {
                    let g: Vec<f64> = (0..d)
                        .map(|_| {
                            let (u, v): (f64, f64) = (rng.gen::<f64>().max(1e-300), rng.gen());
                            (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
                        })
                        .collect();
                    unit(&g)
                })
                .collect()
        }
    }
}

/// Multi-scale slab counts: `Σ_s count(s·hw)/s` for `s = 1, 2, 4, 8`, maximized over offsets.
fn best_offset(samples: &[Vec<f64>], normal: &[f64], hw: f64) -> (f64, f64) {
    let mut proj: Vec<f64> = samples.iter().map(|p| p.iter().zip(normal).map(|(a, b)| a * b).sum()).collect();
    proj.sort_by(|a, b| a.total_cmp(b));
    let count = |c: f64, w: f64| -> usize {
        let lo = proj.partition_point(|&v| v < c - w);
        let hi = proj.partition_point(|&v| v <= c + w);
        hi - lo
    };
    let mut best = (f64::NEG_INFINITY, 0.0);
    for &c in &proj {
        let s: f64 = [1.0, 2.0, 4.0, 8.0].iter().map(|&k| count(c, k * hw) as f64 / k).sum();
        if s > best.0 {
            best = (s, c);
        }
    }
    best
}

/// Eigenvector of the smallest eigenvalue of the sample covariance, and the mean.
fn pca_plane(samples: &[Vec<f64>], d: usize) -> (Vec<f64>, f64) {
    let n = samples.len().max(1) as f64;
    let mean: Vec<f64> = (0..d).map(|i| samples.iter().map(|p| p[i]).sum::<f64>() / n).collect();
    let cov = nalgebra::DMatrix::from_fn(d, d, |i, j| {
        samples.iter().map(|p| (p[i] - mean[i]) * (p[j] - mean[j])).sum::<f64>() / n
    });
    let eig = cov.symmetric_eigen();
    let k = (0..d).min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap_or(0);
    let normal: Vec<f64> = unit(&eig.eigenvectors.column(k).iter().cloned().collect::<Vec<_>>());
    let offset = normal.iter().zip(&mean).map(|(a, b)| a * b).sum();
    (normal, offset)
}

/// Adversarial hyperplane for `μ(𝒩(L, half_width) ∩ B)/μ(B)`: PCA plane, a net of
/// `64·d` normals at their densest offsets, 20 refinement steps; the three best
/// by sample score are evaluated with the mass oracle. A lower-bound witness.
pub fn worst_hyperplane(
    mu: &dyn MeasureOracle,
    ball: &Ball<f64>,
    half_width: f64,
    samples: &[Vec<f64>],
) -> Result<WorstPlane> {
    let d = ball.dim();
    if mu.dim() != d {
        return Err(Error::DimensionMismatch { expected: mu.dim(), got: d });
    }
    if !(half_width > 0.0) {
        return Err(Error::invalid("slab half-width must be positive"));
    }
    let degenerate = samples.len() < d + 1;
    let mut cands: Vec<(f64, Vec<f64>, f64)> = Vec::new();
    let (pn, po) = if samples.is_empty() {
        (unit(&vec![1.0; d]), ball.center.iter().sum::<f64>() / (d as f64).sqrt())
    } else {
        pca_plane(samples, d)
    };
    let pca_score = if samples.is_empty() { 0.0 } else { best_offset(samples, &pn, half_width).0 };
    cands.push((pca_score, pn, po));
    if !samples.is_empty() {
        for n in normal_net(d, 64 * d) {
            let (s, c) = best_offset(samples, &n, half_width);
            cands.push((s, n, c));
        }
        cands.sort_by(|a, b| b.0.total_cmp(&a.0));
        let (mut bs, mut bn, mut bo) = cands[0].clone();
        let mut step = 0.25;
        for _ in 0..20 {
            let mut improved = false;
            for i in 0..d {
                for sgn in [-1.0, 1.0] {
                    let mut n = bn.clone();
                    n[i] += sgn * step;
                    let n = unit(&n);
                    let (s, c) = best_offset(samples, &n, half_width);
                    if s > bs {
                        (bs, bn, bo) = (s, n, c);
                        improved = true;
                    }
                }
            }
            if !improved {
                step /= 2.0;
            }
        }
        cands.push((bs, bn, bo));
        cands.sort_by(|a, b| b.0.total_cmp(&a.0));
    }
    let denom = ball_mass_rel(mu, ball, REL);
    if denom.lo <= 0.0 {
        return Err(Error::Degenerate("the ball carries no visible mass".into()));
    }
    let mut best: Option<WorstPlane> = None;
    let mut tried: Vec<(Vec<f64>, f64)> = Vec::new();
    for (_, n, o) in cands.iter() {
        if tried.len() == 3 {
            break;
        }
        if tried.iter().any(|(tn, to)| tn.iter().zip(n).all(|(a, b)| (a - b).abs() < 1e-12) && (to - o).abs() < 1e-12) {
            continue;
        }
        tried.push((n.clone(), *o));
        let plane = Hyperplane { normal: n.clone(), offset: *o };
        let m = region_mass_rel(mu, &Region::slab_in_ball(ball, &plane, half_width), REL);
        let wp = WorstPlane {
            normal: n.clone(),
            offset: *o,
            half_width,
            ratio: (m.estimate() / denom.estimate()).min(1.0),
            ratio_lo: m.lo / denom.hi,
            ratio_hi: (m.hi / denom.lo).min(1.0),
            degenerate,
            samples: samples.len(),
        };
        if best.as_ref().is_none_or(|b| wp.ratio > b.ratio) {
            best = Some(wp);
        }
    }
    Ok(best.expect("at least the PCA candidate"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayMode {
    Absolute,
    Quasi,
    Decaying,
    WeakQuasi,
}

/// Probe grid for [`decay_profile`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbePlan {
    pub centers: usize,
    pub rhos: Vec<f64>,
    pub betas: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples_per_ball: usize,
    #[serde(default)]
    pub euclidean: bool,
}

fn default_samples() -> usize {
    256
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Probe {
    pub x: Vec<f64>,
    pub rho: f64,
    pub beta: f64,
    pub thickness: f64,
    pub normal: Vec<f64>,
    pub offset: f64,
    pub ratio: f64,
    pub ratio_lo: f64,
    pub ratio_hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub mode: DecayMode,
    pub alpha_hat: f64,
    pub c1_hat: f64,
    pub r_squared: f64,
    /// `(β, max ratio)` over all probes at that `β`.
    pub envelope: Vec<(f64, f64)>,
    pub fitted_betas: Vec<f64>,
    pub probes: Vec<Probe>,
    pub skipped: usize,
    pub verdict: String,
}

/// Regression of `log(max ratio)` on `log β` over the smallest half of the `β` values.
pub fn envelope_fit(probes: &[(f64, f64)]) -> Result<(Vec<(f64, f64)>, Vec<f64>, LineFit)> {
    let mut env: Vec<(f64, f64)> = Vec::new();
    for &(b, r) in probes {
        match env.iter_mut().find(|e| e.0 == b) {
            Some(e) => e.1 = e.1.max(r),
            None => env.push((b, r)),
        }
    }
    env.sort_by(|a, b| a.0.total_cmp(&b.0));
    let usable: Vec<(f64, f64)> = env.iter().cloned().filter(|e| e.1 > 0.0).collect();
    let half = usable.len().div_ceil(2).max(2);
    if usable.len() < 2 {
        return Err(Error::Degenerate("fewer than two β values with positive ratio".into()));
    }
    let used = &usable[..half.min(usable.len())];
    let x: Vec<f64> = used.iter().map(|e| e.0.ln()).collect();
    let y: Vec<f64> = used.iter().map(|e| e.1.ln()).collect();
    let fit = linear_fit(&x, &y)?;
    Ok((env, used.iter().map(|e| e.0).collect(), fit))
}

/// Probe ratios `μ(𝒩(L, thickness) ∩ B)/μ(B)` with `L` from [`worst_hyperplane`].
pub fn decay_profile(
    mu: &dyn MeasureOracle,
    mode: DecayMode,
    gamma: f64,
    filter: &EFilter,
    plan: &ProbePlan,
    seed: u64,
) -> Result<DecayFit> {
    if matches!(mode, DecayMode::Quasi | DecayMode::WeakQuasi) && !(gamma > 0.0) {
        return Err(Error::invalid("γ must be positive in the quasi modes"));
    }
    if plan.rhos.iter().any(|&r| !(r > 0.0 && r <= 1.0)) || plan.betas.iter().any(|&b| !(b > 0.0)) {
        return Err(Error::invalid("need 0 < ρ ≤ 1 and β > 0"));
    }
    let norm = if plan.euclidean { Norm::Euclidean } else { Norm::Sup };
    let centers = sample_centers(mu, plan.centers, filter, norm, seed)?;
    let per: Vec<Result<(Vec<Probe>, usize)>> = centers
        .par_iter()
        .enumerate()
        .map(|(ci, x)| {
            let mut rng = crate::stream_rng(seed, 1 + ci as u64);
            let mut out = Vec::new();
            let mut skipped = 0;
            for &rho in &plan.rhos {
                let ball = Ball::new(x.clone(), rho, norm)?;
                let samples = mu.sample_in_ball(&ball, plan.samples_per_ball, &mut rng, 50 * plan.samples_per_ball);
                for &beta in &plan.betas {
                    let quasi = matches!(mode, DecayMode::Quasi | DecayMode::WeakQuasi);
                    if quasi && beta > rho.powf(gamma) * (1.0 + 1e-12) {
                        continue;
                    }
                    let first = worst_hyperplane(mu, &ball, beta * rho, &samples);
                    let wp = match (mode, first) {
                        (_, Err(Error::Degenerate(_))) => {
                            skipped += 1;
                            continue;
                        }
                        (_, Err(e)) => return Err(e),
                        (DecayMode::Absolute | DecayMode::Quasi, Ok(w)) => w,
                        (DecayMode::Decaying | DecayMode::WeakQuasi, Ok(w)) => {
                            let plane = w.plane();
                            let sup = samples.iter().map(|p| plane.dist(p).unwrap_or(0.0)).fold(0.0, f64::max);
                            if sup <= 0.0 {
                                skipped += 1;
                                continue;
                            }
                            worst_hyperplane(mu, &ball, beta * sup, &samples)?
                        }
                    };
                    out.push(Probe {
                        x: x.clone(),
                        rho,
                        beta,
                        thickness: wp.half_width,
                        normal: wp.normal.clone(),
                        offset: wp.offset,
                        ratio: wp.ratio,
                        ratio_lo: wp.ratio_lo,
                        ratio_hi: wp.ratio_hi,
                    });
                }
            }
            Ok((out, skipped))
        })
        .collect();
    let mut probes = Vec::new();
    let mut skipped = 0;
    for r in per {
        let (p, s) = r?;
        probes.extend(p);
        skipped += s;
    }
    if probes.is_empty() {
        return Err(Error::Degenerate("every probe was degenerate".into()));
    }
    let pairs: Vec<(f64, f64)> = probes.iter().map(|p| (p.beta, p.ratio)).collect();
    let (envelope, fitted_betas, fit) = envelope_fit(&pairs)?;
    let alpha_hat = fit.slope;
    let verdict = format!(
        "consistent with exponent {alpha_hat:.4} on {} probes (adversarial lower-bound witness, not a certificate)",
        probes.len()
    );
    Ok(DecayFit {
        mode,
        alpha_hat,
        c1_hat: fit.intercept.exp(),
        r_squared: fit.r_squared,
        envelope,
        fitted_betas,
        probes,
        skipped,
        verdict,
    })
}

/// Slab `𝒩(L, half_width) ∩ B(center, radius)` of a sublevel cover.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverPiece {
    pub normal: Vec<f64>,
    pub offset: f64,
    pub half_width: f64,
    pub center: Vec<f64>,
    pub radius: f64,
}

impl CoverPiece {
    fn contains(&self, y: &[f64]) -> bool {
        let nn = self.normal.iter().map(|x| x * x).sum::<f64>().sqrt();
        let v = self.normal.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() - self.offset;
        v.abs() / nn <= self.half_width * (1.0 + 1e-9)
            && self.center.iter().zip(y).all(|(c, x)| (c - x).abs() <= self.radius * (1.0 + 1e-9))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SublevelCover {
    /// `C_1, …, C_ℓ`.
    pub collections: Vec<Vec<CoverPiece>>,
    pub beta_k: Vec<f64>,
    /// Coordinate `i` differentiated at each level.
    pub directions: Vec<usize>,
    pub grid_points: usize,
    pub points_in_z: usize,
    pub uncovered: Vec<Vec<f64>>,
    pub uncovered_count: usize,
    pub covered: bool,
    /// Estimated `‖f^{(ℓ)}‖_{C^ε}/‖f‖`.
    pub hypothesis_ratio: f64,
}

fn grid_points(d: usize, step: f64) -> Vec<Vec<f64>> {
    let k = (2.0 / step).round() as i64;
    let axis: Vec<f64> = (0..=k).map(|i| -1.0 + 2.0 * i as f64 / k as f64).collect();
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&a| {
                    let mut q = p.clone();
                    q.push(a);
                    q
                })
            })
            .collect();
    }
    out
}

fn sup_on(f: &Poly, pts: &[Vec<f64>]) -> f64 {
    pts.iter().map(|p| f.eval(p).abs()).fold(0.0, f64::max)
}

fn derivatives_of_order(f: &Poly, ell: usize) -> Vec<Poly> {
    let mut cur = vec![f.clone()];
    for _ in 0..ell {
        cur = cur.iter().flat_map(|g| g.gradient()).filter(|g| !g.is_zero()).collect();
    }
    cur
}

/// Recursive cover of `Z(f, β) = {|f| ≤ β‖f‖}` on `Δ = [−1,1]^d`; level
/// `k` pieces have radius `β^{1/2^{2k−1}}`.
fn cover_rec(f: &Poly, ell: usize, eps: f64, beta: f64, pts: &[Vec<f64>], out: &mut SublevelCover, level: usize) -> Result<()> {
    let norm = sup_on(f, pts);
    if norm <= 0.0 {
        return Err(Error::Degenerate("f vanishes on the grid".into()));
    }
    let in_z = |p: &Vec<f64>| f.eval(p).abs() <= beta * norm;
    if ell == 0 || !pts.iter().any(in_z) {
        return Ok(());
    }
    if let Some((a, c)) = f.as_affine() {
        // linear f: Z is exactly one slab
        let a: Vec<f64> = a.iter().map(to_f64).collect();
        let an = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        if an > 0.0 {
            out.collections[level].push(CoverPiece {
                normal: a,
                offset: -to_f64(&c),
                half_width: beta * norm / an,
                center: vec![0.0; f.nvars],
                radius: 1.0,
            });
        }
        return Ok(());
    }
    let grads = f.gradient();
    let (i, _) = grads
        .iter()
        .enumerate()
        .map(|(i, g)| (i, sup_on(g, pts)))
        .fold((0, f64::NEG_INFINITY), |b, x| if x.1 > b.1 { x } else { b });
    out.directions.push(i);
    let di = &grads[i];
    let gamma = if ell == 1 { eps } else { 1.0 };
    let beta_sub = beta.powf(gamma / 4.0);
    cover_rec(di, ell - 1, eps, beta_sub, pts, out, level + 1)?;
    let di_norm = sup_on(di, pts);
    let beta1 = beta.sqrt();
    // centers: points of Z(f,β) outside Z(∂_i f, β^{γ/4})
    let cands: Vec<Vec<f64>> = pts
        .iter()
        .filter(|p| in_z(p) && di.eval(p).abs() > beta_sub * di_norm)
        .cloned()
        .collect();
    let net = greedy_maximal_net(&cands, &beta1, Norm::Sup)?;
    let hw = beta1.powf(1.0 + gamma / 3.0);
    for p in net.points {
        let g: Vec<f64> = grads.iter().map(|g| g.eval(&p)).collect();
        if g.iter().all(|x| *x == 0.0) {
            continue;
        }
        let offset = g.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>() - f.eval(&p);
        out.collections[level].push(CoverPiece { normal: g, offset, half_width: hw, center: p, radius: beta1 });
    }
    Ok(())
}

/// Cover of the sublevel set following the inductive construction, verified on a grid.
pub fn cover_sublevel(f: &Poly, ell: usize, eps: f64, beta: f64, grid_step: f64) -> Result<SublevelCover> {
    if f.degree() as usize > ell && ell == 0 {
        return Err(Error::invalid("ℓ must be at least the degree for nonconstant f"));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::invalid("ε must lie in (0, 1]"));
    }
    if !(beta > 0.0 && beta < 0.5) {
        return Err(Error::invalid("β must lie in (0, 1/2)"));
    }
    if !(grid_step > 0.0 && grid_step <= 0.5) {
        return Err(Error::invalid("grid step must lie in (0, 1/2]"));
    }
    let d = f.nvars;
    let pts = grid_points(d, grid_step);
    let mut out = SublevelCover {
        collections: vec![Vec::new(); ell.max(1)],
        beta_k: (1..=ell.max(1)).map(|k| beta.powf(1.0 / 2f64.powi(2 * k as i32 - 1))).collect(),
        directions: Vec::new(),
        grid_points: pts.len(),
        points_in_z: 0,
        uncovered: Vec::new(),
        uncovered_count: 0,
        covered: true,
        hypothesis_ratio: 0.0,
    };
    cover_rec(f, ell, eps, beta, &pts, &mut out, 0)?;
    let norm = sup_on(f, &pts);
    let pieces: Vec<&CoverPiece> = out.collections.iter().flatten().collect();
    for p in &pts {
        if f.eval(p).abs() > beta * norm {
            continue;
        }
        out.points_in_z += 1;
        if !pieces.iter().any(|c| c.contains(p)) {
            out.uncovered_count += 1;
            if out.uncovered.len() < 20 {
                out.uncovered.push(p.clone());
            }
        }
    }
    out.covered = out.uncovered_count == 0;
    // Hölder seminorm of the ℓ-th derivatives on a coarse grid
    let coarse = grid_points(d, if d == 1 { 0.05 } else { 0.2 });
    let mut h: f64 = 0.0;
    for g in derivatives_of_order(f, ell) {
        let vals: Vec<f64> = coarse.iter().map(|p| g.eval(p)).collect();
        for a in 0..coarse.len() {
            for b in a + 1..coarse.len() {
                let dist = coarse[a].iter().zip(&coarse[b]).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                h = h.max((vals[a] - vals[b]).abs() / dist.powf(eps));
            }
        }
    }
    out.hypothesis_ratio = h / norm;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimplexCoverRow {
    pub n: u32,
    pub q_n: u64,
    pub rho_n: f64,
    pub centers: usize,
    pub empty_terms: usize,
    pub sum: f64,
    pub ball_sum: f64,
    /// `sum / ball_sum`, compared against `ρ_n^{γα}`.
    pub normalized: f64,
    pub bound: f64,
    pub containment_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimplexCoverSum {
    pub rows: Vec<SimplexCoverRow>,
    /// Slope of `log(normalized)` against `n` and the value `−γα(d+1) log H`.
    pub slope: Option<f64>,
    pub expected_slope: f64,
}

/// `Σ_{y∈E_n} μ(𝒩(L_{n,y}, ρ_n^{1+γ}) ∩ B(y,ρ_n))` over a `ρ_n`-net of support samples.
#[allow(clippy::too_many_arguments)]
pub fn simplex_cover_sum(
    mu: &dyn MeasureOracle,
    gamma: f64,
    alpha: f64,
    h: u32,
    n_max: u32,
    samples: usize,
    filter: &EFilter,
    seed: u64,
) -> Result<SimplexCoverSum> {
    if h < 2 || n_max == 0 || !(gamma > 0.0) {
        return Err(Error::invalid("need H ≥ 2, n ≥ 1, γ > 0"));
    }
    let d = mu.dim();
    let eps = default_eps(d);
    let pts = sample_centers(mu, samples, filter, Norm::Sup, seed)?;
    let mut rows = Vec::new();
    for n in 1..=n_max {
        let hq = Q::from_integer((h as i64).into());
        let rho_q = pow_q(&hq.recip(), (d as u32 + 1) * n) / Q::from_integer(2.into());
        let rho_n = to_f64(&rho_q);
        let q_n = height_bound(&(Q::from_integer(2.into()) * &rho_q), d, eps)
            .min((eps * (h as f64).powi((d as u32 * n) as i32)).floor() as u64);
        let net = greedy_maximal_net(&pts, &rho_n, Norm::Sup)?;
        let thick = rho_n.powf(1.0 + gamma);
        let mut row = SimplexCoverRow {
            n,
            q_n,
            rho_n,
            centers: net.points.len(),
            empty_terms: 0,
            sum: 0.0,
            ball_sum: 0.0,
            normalized: 0.0,
            bound: rho_n.powf(gamma * alpha),
            containment_ok: true,
        };
        for y in &net.points {
            let ball = Ball::new(y.clone(), rho_n, Norm::Sup)?;
            let bm = ball_mass_rel(mu, &ball, REL);
            row.ball_sum += bm.estimate();
            let yq: Vec<Q> = y.iter().map(|&c| q_from_f64(c)).collect();
            let res = simplex_hyperplane_with_q(&yq, &(Q::from_integer(2.into()) * &rho_q), q_n)?;
            let plane = match res.hull {
                SimplexHull::Empty => {
                    row.empty_terms += 1;
                    continue;
                }
                SimplexHull::Point(p) => {
                    let mut normal = vec![0.0; d];
                    normal[0] = 1.0;
                    Hyperplane { normal, offset: to_f64(&p[0]) }
                }
                SimplexHull::Hyperplane(hp) => hp.to_float(),
            };
            let m = region_mass_rel(mu, &Region::slab_in_ball(&ball, &plane, thick), REL);
            if m.lo > bm.hi * (1.0 + 1e-9) {
                row.containment_ok = false;
            }
            row.sum += m.estimate();
        }
        row.normalized = if row.ball_sum > 0.0 { row.sum / row.ball_sum } else { 0.0 };
        rows.push(row);
    }
    let used: Vec<&SimplexCoverRow> = rows.iter().filter(|r| r.normalized > 0.0).collect();
    let slope = if used.len() >= 2 {
        let x: Vec<f64> = used.iter().map(|r| r.n as f64).collect();
        let y: Vec<f64> = used.iter().map(|r| r.normalized.ln()).collect();
        Some(linear_fit(&x, &y)?.slope)
    } else {
        None
    };
    let expected_slope = -gamma * alpha * (d as f64 + 1.0) * (h as f64).ln();
    Ok(SimplexCoverSum { rows, slope, expected_slope })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpikeRow {
    pub n: u32,
    #[serde(with = "crate::rational::serde_q")]
    pub y: Q,
    #[serde(with = "crate::rational::serde_q")]
    pub beta: Q,
    #[serde(with = "crate::rational::serde_q")]
    pub slab_mass: Q,
    #[serde(with = "crate::rational::serde_q")]
    pub ball_mass: Q,
    /// `μ(B(y,βρ) ∩ B(x,ρ)) / (β^α μ(B(x,ρ)))`.
    pub ratio: f64,
    pub exceeds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpikeSearch {
    pub rho: f64,
    pub witness: Option<SpikeRow>,
    pub rows: Vec<SpikeRow>,
}

/// Scan the spikes `q_n ∈ B(x, ρ/2)` of the truncated counterexample density
/// with `βρ = 1/b_n`; a witness has ratio `> C`, decided exactly.
pub fn counterexample_search(n_max: u32, c: &Q, alpha: &Q, rho0: &Q, x: &Q) -> Result<SpikeSearch> {
    if !c.is_positive() || !alpha.is_positive() || !rho0.is_positive() {
        return Err(Error::invalid("C, α and ρ₀ must be positive"));
    }
    let (an, ad) = (
        alpha.numer().to_u32().ok_or_else(|| Error::invalid("α too large"))?,
        alpha.denom().to_u32().ok_or_else(|| Error::invalid("α too finely specified"))?,
    );
    let mu = Counterexample::new(n_max)?;
    let rho = rho0.clone();
    let ball_mass = mu.interval_mass(&(x - &rho), &(x + &rho));
    if !ball_mass.is_positive() {
        return Err(Error::invalid("B(x, ρ) misses [0, 1]"));
    }
    let half = &rho / Q::from_integer(2.into());
    let mut rows = Vec::new();
    for s in mu.spikes() {
        if (&s.center - x).abs() > half {
            continue;
        }
        let r = &s.half_width;
        let lo = (&s.center - r).max(x - &rho);
        let hi = (&s.center + r).min(x + &rho);
        let slab_mass = if hi > lo { mu.interval_mass(&lo, &hi) } else { Q::zero() };
        let beta = r / &rho;
        // (m/(β^α M))^{den} > C^{den}  ⟺  m^{den} > C^{den} β^{num} M^{den}
        let lhs = pow_q(&slab_mass, ad);
        let rhs = pow_q(c, ad) * pow_q(&beta, an) * pow_q(&ball_mass, ad);
        let exceeds = lhs > rhs;
        let ratio = if slab_mass.is_zero() {
            0.0
        } else {
            (ln_abs(&slab_mass) - to_f64(alpha) * ln_abs(&beta) - ln_abs(&ball_mass)).exp()
        };
        rows.push(SpikeRow { n: s.n, y: s.center.clone(), beta, slab_mass, ball_mass: ball_mass.clone(), ratio, exceeds });
    }
    let witness = rows.iter().find(|r| r.exceeds).cloned();
    let out = SpikeSearch { rho: to_f64(&rho), witness, rows };
    if out.witness.is_none() {
        let best = out.rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
        return Err(Error::assertion(
            format!("no witness up to n = {n_max}; largest ratio {best:.6}"),
            serde_json::to_string(&out).unwrap_or_default(),
        ));
    }
    Ok(out)
}

/// `(x, ρ)` pairs: `count` centers from `mu` crossed with `rhos`.
pub fn probe_pairs(mu: &dyn MeasureOracle, count: usize, rhos: &[f64], seed: u64) -> Result<Vec<(Vec<f64>, f64)>> {
    let centers = sample_centers(mu, count, &EFilter::All, Norm::Sup, seed)?;
    Ok(centers.into_iter().flat_map(|x| rhos.iter().map(move |&r| (x.clone(), r))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{cantor_middle_thirds, LebesgueCube, Pushforward, UniformSegment};
    use crate::rational::{qi, qr};

    #[test]
    fn lebesgue_local_dimension_is_exact() {
        let mu = LebesgueCube::new(2).unwrap();
        let l = local_dimension(&mu, &[0.5, 0.5], &geometric_grid(0.5, 2, 8), Norm::Sup).unwrap();
        assert!((l.slope - 2.0).abs() < 1e-9);
        assert!(l.slope_lo <= l.slope && l.slope <= l.slope_hi);
        assert!(local_dimension(&mu, &[0.5, 0.5], &[0.1, 0.01], Norm::Sup).is_err());
    }

    #[test]
    fn cantor_local_dimension() {
        let mu = cantor_middle_thirds();
        let l = local_dimension(&mu, &[0.25], &geometric_grid(1.0 / 3.0, 1, 12), Norm::Sup).unwrap();
        assert!((l.slope - 2f64.ln() / 3f64.ln()).abs() < 0.02, "{}", l.slope);
    }

    #[test]
    fn federer_examples() {
        let mu = LebesgueCube::new(1).unwrap();
        let e = federer_ratio(&mu, 2.0, &[(vec![0.5], 0.1), (vec![0.4], 0.05)], Norm::Sup).unwrap();
        assert!((e.worst - 2.0).abs() < 1e-9);
        let mu3 = LebesgueCube::new(3).unwrap();
        let e3 = federer_ratio(&mu3, 2.0, &[(vec![0.5; 3], 0.1)], Norm::Sup).unwrap();
        assert!((e3.worst - 8.0).abs() < 1e-6);
        assert!(federer_ratio(&mu, 1.0, &[], Norm::Sup).is_err());
    }

    #[test]
    fn quasi_federer_lebesgue() {
        let mu = LebesgueCube::new(1).unwrap();
        let probes: Vec<(Vec<f64>, f64)> = [1e-2, 3e-3, 1e-3, 3e-4].iter().map(|&r| (vec![0.5], r)).collect();
        let q = quasi_federer_check(&mu, 0.1, None, &probes, Norm::Sup).unwrap();
        assert!(q.holds);
        assert!(q.c2_hat <= 1.0 + 1e-9);
        let same = quasi_federer_check(&mu, 0.1, Some(0.0), &[(vec![0.5], 1.0)], Norm::Sup).unwrap();
        assert!((same.c2_hat - 1.0).abs() < 1e-12);
    }

    #[test]
    fn worst_plane_on_a_parabola_is_tangent() {
        let base = LebesgueCube::new(1).unwrap();
        let curve = Pushforward::new(
            Box::new(base),
            vec![Poly::var(1, 0), Poly::monomial(1, 0, 2)],
        )
        .unwrap();
        let ball = Ball::new(vec![0.02, 0.0], 0.02, Norm::Sup).unwrap();
        let mut rng = crate::stream_rng(3, 0);
        let s = curve.sample_in_ball(&ball, 200, &mut rng, 200_000);
        let w = worst_hyperplane(&curve, &ball, 1e-4, &s).unwrap();
        let angle = (w.normal[1].abs()).acos();
        assert!(angle < 0.1, "{angle}");
    }

    #[test]
    fn worst_plane_lebesgue_and_flat_support() {
        let mu = LebesgueCube::new(2).unwrap();
        let ball = Ball::new(vec![0.5, 0.5], 0.2, Norm::Sup).unwrap();
        let mut rng = crate::stream_rng(4, 0);
        let s = mu.sample_in_ball(&ball, 256, &mut rng, 10_000);
        let beta = 0.01;
        let w = worst_hyperplane(&mu, &ball, beta * 0.2, &s).unwrap();
        assert!(w.ratio <= 3.0 * beta);
        let seg = UniformSegment::new(vec![qi(0), qr(1, 2)], vec![qi(1), qr(1, 2)]).unwrap();
        let s2 = seg.sample_in_ball(&ball, 64, &mut rng, 10_000);
        let w2 = worst_hyperplane(&seg, &ball, 1e-6, &s2).unwrap();
        assert!(w2.ratio > 0.999);
        assert!(w2.normal[0].abs() < 1e-6);
    }

    #[test]
    fn absolute_profile_on_the_square() {
        let mu = LebesgueCube::new(2).unwrap();
        let plan = ProbePlan {
            centers: 4,
            rhos: vec![0.1],
            betas: geometric_grid(0.5, 2, 8),
            samples_per_ball: 128,
            euclidean: false,
        };
        let filter = EFilter::LocalDimension { min: 1.9, max: 2.1, rhos: geometric_grid(0.5, 5, 9) };
        let fit = decay_profile(&mu, DecayMode::Absolute, 1.0, &filter, &plan, 7).unwrap();
        assert!((fit.alpha_hat - 1.0).abs() < 0.1, "{}", fit.alpha_hat);
        let quasi = decay_profile(&mu, DecayMode::Quasi, 1.0, &EFilter::All, &ProbePlan { rhos: vec![0.1, 0.01], ..plan }, 7).unwrap();
        assert!(quasi.probes.iter().all(|p| p.beta <= p.rho * (1.0 + 1e-12)));
    }

    #[test]
    fn envelope_recovers_unit_slope() {
        let pairs: Vec<(f64, f64)> = geometric_grid(0.5, 1, 10).into_iter().map(|b| (b, b)).collect();
        let (_, used, fit) = envelope_fit(&pairs).unwrap();
        assert_eq!(used.len(), 5);
        assert!((fit.slope - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_cover_is_one_exact_slab() {
        let f = Poly::var(1, 0);
        let c = cover_sublevel(&f, 1, 1.0, 1e-3, 1e-4).unwrap();
        let pieces: Vec<&CoverPiece> = c.collections.iter().flatten().collect();
        assert_eq!(pieces.len(), 1);
        assert!((pieces[0].half_width - 1e-3).abs() < 1e-15);
        assert!(c.covered);
    }

    #[test]
    fn product_cover_verifies() {
        let f = Poly::new(2, vec![(qi(1), vec![1, 1])]).unwrap();
        let c = cover_sublevel(&f, 2, 1.0, 1e-4, 1e-3).unwrap();
        assert!(c.points_in_z > 0);
        assert!(c.covered, "{} uncovered, e.g. {:?}", c.uncovered_count, c.uncovered.first());
        assert_eq!(c.hypothesis_ratio, 0.0);
    }

    #[test]
    fn constant_has_empty_cover() {
        let f = Poly::constant(2, qi(1));
        let c = cover_sublevel(&f, 0, 1.0, 0.25, 0.1).unwrap();
        assert_eq!(c.points_in_z, 0);
        assert!(c.collections.iter().all(|k| k.is_empty()));
    }

    #[test]
    fn simplex_sum_terms_are_contained() {
        let mu = LebesgueCube::new(1).unwrap();
        let s = simplex_cover_sum(&mu, 1.0, 1.0, 2, 6, 400, &EFilter::All, 5).unwrap();
        assert!(s.rows.iter().all(|r| r.containment_ok));
        assert!(s.rows.iter().all(|r| r.sum <= r.ball_sum + 1e-12));
    }

    #[test]
    fn spike_search_finds_a_witness() {
        let r = counterexample_search(5, &qi(1), &qr(1, 2), &qi(1), &qr(1, 2)).unwrap();
        let w = r.witness.unwrap();
        assert_eq!(w.n, 3);
        assert!(w.ratio > 1.0);
        assert!((r.rows[0].ratio - 0.75 / (0.5 * 2.1875)).abs() < 1e-12);
        let fail = counterexample_search(3, &qi(1_000_000_000), &qr(1, 2), &qi(1), &qr(1, 2)).unwrap_err();
        assert!(fail.is_assertion());
    }
}
