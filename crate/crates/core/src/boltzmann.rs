//! Partition functions of the skewness family `g_p = p(1-p)/3`,
//! `z_p = (1-p)/4`, the offspring pair of the tree of components, and
//! Boltzmann samplers.
//!
//! Throughout, `t_s = F̂_s(g_p) (z_p F²)^s` for `s ≥ 1`; then
//! `μ•(2s-1) = t_s / (F - 1)` and `Σ_s t_s = F - 1`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use serde::Serialize;

use crate::bdg::{phi_finite, sample_gw_forest, PointedQuadrangulation};
use crate::error::{Error, Result};
use crate::planar_map::{HalfEdgeMap, QuadrangulationWithBoundary};
use crate::trees::{sample_uniform_bridge, to_f64, Offspring, DEFAULT_SIZE_CAP};

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn check_p(p: &BigRational) -> Result<()> {
    if p.is_negative() || *p > q(1, 2) {
        return Err(Error::OutOfRange(format!("p = {p} not in [0, 1/2]")));
    }
    Ok(())
}

fn check_pf(p: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::OutOfRange(format!("p = {p} not in [0, 1/2]")));
    }
    Ok(())
}

/// Exact rational from a decimal `f64` such as `0.45`, via its shortest
/// decimal representation.
pub fn rational_from_decimal(x: f64) -> Result<BigRational> {
    let s = format!("{x}");
    let (int_part, frac) = s.split_once('.').unwrap_or((&s, ""));
    let digits: String = format!("{int_part}{frac}");
    let n: BigInt = digits.parse().map_err(|_| Error::Parse(s.clone()))?;
    Ok(BigRational::new(n, num_traits::pow(BigInt::from(10), frac.len())))
}

/// Skewness parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SkewParams {
    pub p: BigRational,
}

impl SkewParams {
    pub fn new(p: BigRational) -> Result<Self> {
        check_p(&p)?;
        Ok(SkewParams { p })
    }

    pub fn g(&self) -> BigRational {
        &self.p * (int(1) - &self.p) / int(3)
    }

    pub fn z(&self) -> BigRational {
        (int(1) - &self.p) / int(4)
    }
}

/// `F(g_p, z_p) = (2/3)(3-4p)/(1-p)`.
pub fn f_closed(p: &BigRational) -> Result<BigRational> {
    check_p(p)?;
    Ok(q(2, 3) * (int(3) - int(4) * p) / (int(1) - p))
}

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |a, k| a * BigInt::from(k))
}

/// `F_σ(g_p) = (2σ)!/(σ!(σ+2)!) (2 + σ(1-2p)/(1-p)) (1-p)^{-σ}`.
pub fn f_sigma(p: &BigRational, sigma: usize) -> Result<BigRational> {
    check_p(p)?;
    let s = sigma as i64;
    let c = BigRational::new(factorial(2 * sigma), factorial(sigma) * factorial(sigma + 2));
    let one_p = int(1) - p;
    Ok(c * (int(2) + int(s) * (int(1) - int(2) * p) / &one_p) / num_traits::pow(one_p, sigma))
}

/// Simple-boundary partition function
/// `F̂_σ(g_p) = (p/(3(1-p)²))^σ (3σ-3)!/(σ!(2σ-1)!) (3σ(1-p)/p + 2 - 3σ)`,
/// `F̂_0 = 1`, and `F̂_σ(0) = δ_0(σ) + δ_1(σ)`.
pub fn fhat_sigma(p: &BigRational, sigma: usize) -> Result<BigRational> {
    check_p(p)?;
    if sigma == 0 {
        return Ok(int(1));
    }
    if p.is_zero() {
        return Ok(if sigma == 1 { int(1) } else { int(0) });
    }
    let s = sigma as i64;
    let one_p = int(1) - p;
    let base = p / (int(3) * &one_p * &one_p);
    let c = BigRational::new(factorial(3 * sigma - 3), factorial(sigma) * factorial(2 * sigma - 1));
    Ok(num_traits::pow(base, sigma) * c * (int(3 * s) * &one_p / p + int(2) - int(3 * s)))
}

/// Pointed partition function `F•_σ(g_p) = C(2σ,σ) (1-p)^{-σ}`.
pub fn fbullet_sigma(p: &BigRational, sigma: usize) -> Result<BigRational> {
    check_p(p)?;
    let c = BigRational::from_integer(BigInt::from(crate::trees::binomial(2 * sigma, sigma)));
    Ok(c / num_traits::pow(int(1) - p, sigma))
}

/// `z_p F²(g_p, z_p) = (3-4p)²/(9(1-p))`.
pub fn zf2(p: &BigRational) -> BigRational {
    let a = int(3) - int(4) * p;
    &a * &a / (int(9) * (int(1) - p))
}

/// `t_{s+1} / t_s` in floating point, written without dividing by `p`.
fn term_ratio(p: f64, s: f64) -> f64 {
    let a = 3.0 - 4.0 * p;
    let lead = p * a * a * (3.0 * s - 1.0) * (3.0 * s - 2.0) / (18.0 * (1.0 - p).powi(3) * (s + 1.0) * (2.0 * s + 1.0));
    let l = |s: f64| 3.0 * s * (1.0 - 2.0 * p) + 2.0 * p;
    lead * l(s + 1.0) / l(s)
}

/// `t_1 = z_p F² F̂_1(g_p) = (3-4p)³ / (27 (1-p)³)`.
fn first_term(p: f64) -> f64 {
    (3.0 - 4.0 * p).powi(3) / (27.0 * (1.0 - p).powi(3))
}

/// Exact `t_{s+1} / t_s` for `p > 0`.
fn exact_ratio(p: &BigRational, s: usize) -> BigRational {
    let a = int(3) - int(4) * p;
    let one_p = int(1) - p;
    let s = s as i64;
    let lead = p * &a * &a * int((3 * s - 1) * (3 * s - 2))
        / (int(18) * num_traits::pow(one_p, 3) * int((s + 1) * (2 * s + 1)));
    let l = |s: i64| int(3 * s) * (int(1) - int(2) * p) + int(2) * p;
    lead * l(s + 1) / l(s)
}

/// Upper bounds for `Σ_{s>T} t_s` and `Σ_{s>T} (2s-1) t_s` given `t_T`.
/// For p < 1/2 the ratio is bounded by `ρ L(T+1)/L(T)`; at p = 1/2 it is
/// below `1 - 2.25/(s+1)` for `s ≥ 4`, giving a power-law bound.
fn tail_bounds(p: f64, t: usize, t_t: f64) -> Option<(f64, f64)> {
    if p == 0.0 {
        return Some((0.0, 0.0));
    }
    let tf = t as f64;
    if p < 0.5 {
        let a = 3.0 - 4.0 * p;
        let rho = p * a * a / (4.0 * (1.0 - p).powi(3));
        let l = |s: f64| 3.0 * s * (1.0 - 2.0 * p) + 2.0 * p;
        let r = rho * l(tf + 1.0) / l(tf);
        let r2 = r * (2.0 * tf + 1.0) / (2.0 * tf - 1.0);
        if r2 >= 1.0 {
            return None;
        }
        Some((t_t * r / (1.0 - r), (2.0 * tf - 1.0) * t_t * r2 / (1.0 - r2)))
    } else {
        if t < 4 {
            return None;
        }
        let beta = 2.25;
        Some((t_t * tf / (beta - 1.0), 2.0 * t_t * tf * tf / (beta - 2.0)))
    }
}

/// Floating-point series `Σ t_s`, `Σ (2s-1) t_s` up to the first `T` where
/// the tail bound is below `eps` (or `max_terms`).
#[derive(Clone, Debug, Serialize)]
pub struct SeriesSummary {
    pub terms: usize,
    pub sum: f64,
    pub sum_tail: f64,
    pub mean_sum: f64,
    pub mean_tail: f64,
}

/// Relative pad for floating-point accumulation over the series.
const FP_PAD: f64 = 1e-12;

pub fn series_f64(p: f64, eps: f64, max_terms: usize) -> Result<SeriesSummary> {
    check_pf(p)?;
    let mut t = first_term(p);
    let (mut sum, mut mean) = (t, t);
    let mut s = 1usize;
    loop {
        if let Some((a, b)) = tail_bounds(p, s, t) {
            if (a <= eps && b <= eps) || s >= max_terms {
                let pad = FP_PAD * (1.0 + s as f64 * f64::EPSILON * 1e3);
                return Ok(SeriesSummary {
                    terms: s,
                    sum,
                    sum_tail: a + pad * sum,
                    mean_sum: mean,
                    mean_tail: b + pad * mean,
                });
            }
        } else if s >= max_terms {
            return Err(Error::TailNotCertifiable(format!("p = {p}, {s} terms")));
        }
        t *= term_ratio(p, s as f64);
        s += 1;
        sum += t;
        mean += (2 * s - 1) as f64 * t;
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityCheck {
    pub p: f64,
    pub truncation: usize,
    pub partial: f64,
    pub tail_bracket: f64,
    pub target: f64,
    pub residual: f64,
    pub pass: bool,
}

/// Checks `F̂(g_p, z_p F²) = Σ_σ F̂_σ (z_p F²)^σ = F(g_p, z_p)` with the
/// series cut at `truncation` and its certified tail bracket.
pub fn identity_2_8_check(p: f64, truncation: usize, eps: f64) -> Result<IdentityCheck> {
    check_pf(p)?;
    if p >= 0.5 {
        return Err(Error::OutOfRange("identity check needs p < 1/2".into()));
    }
    let target = 2.0 / 3.0 * (3.0 - 4.0 * p) / (1.0 - p);
    let s = series_f64(p, 0.0, truncation.max(1))?;
    let partial = 1.0 + s.sum;
    let resid = (partial - target).abs().max((partial + s.sum_tail - target).abs());
    Ok(IdentityCheck {
        p,
        truncation: s.terms,
        partial,
        tail_bracket: s.sum_tail,
        target,
        residual: resid,
        pass: resid <= eps,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Criticality {
    pub p: f64,
    pub m_circ: f64,
    pub m_bullet: (f64, f64),
    pub product: (f64, f64),
    pub verdict: String,
}

/// `m◦ = F - 1`, `m•` bracketed by the truncated series and its tail.
pub fn criticality_check(p: f64) -> Result<Criticality> {
    check_pf(p)?;
    let f = 2.0 / 3.0 * (3.0 - 4.0 * p) / (1.0 - p);
    let mc = f - 1.0;
    let (eps, cap) = if p < 0.5 { (1e-13, 10_000_000) } else { (0.0, 20_000_000) };
    let s = series_f64(p, eps, cap)?;
    let lo = s.mean_sum / mc;
    let hi = (s.mean_sum + s.mean_tail) / mc;
    let pad = 4.0 * f64::EPSILON;
    let prod = (mc * lo * (1.0 - pad), mc * hi * (1.0 + pad));
    let verdict = if prod.0 <= 1.0 && 1.0 <= prod.1 {
        "critical"
    } else if prod.1 < 1.0 {
        "subcritical"
    } else {
        "supercritical"
    };
    Ok(Criticality { p, m_circ: mc, m_bullet: (lo, hi), product: prod, verdict: verdict.into() })
}

/// The offspring pair of the tree of components.
#[derive(Clone, Debug)]
pub struct OffspringPair {
    pub p: BigRational,
    pub f: BigRational,
    /// geometric with `P(k) = (1/F)(1-1/F)^k`
    pub mu_circ: Offspring,
    /// exact `μ•(2k+1)` for `k < exact.len()`
    pub exact: Vec<BigRational>,
    /// certified bound on the mass beyond the exact table
    pub tail_bound: f64,
    /// floating table used for sampling, extended until the remaining mass
    /// is below f64 resolution
    pub mu_bullet: Offspring,
    pub m_circ: BigRational,
}

impl OffspringPair {
    pub fn exact_mass(&self) -> BigRational {
        self.exact.iter().fold(BigRational::zero(), |a, b| a + b)
    }

    /// `k, numerator, denominator` lines of the exact μ• table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,numerator,denominator\n");
        for (k, x) in self.exact.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", 2 * k + 1, x.numer(), x.denom()));
        }
        out
    }
}

/// Builds the pair; the exact table covers mass at least `1 - tail_eps`.
pub fn offspring_pair(p: &BigRational, tail_eps: f64) -> Result<OffspringPair> {
    check_p(p)?;
    let pf = to_f64(p);
    let f = f_closed(p)?;
    let fm1 = &f - int(1);
    let mu_circ = Offspring::Geometric(1.0 - 1.0 / to_f64(&f));
    let max_exact = 4000;
    let fm1f = to_f64(&fm1);
    // locate the truncation in floating point, then fill it exactly
    let terms = if pf == 0.0 {
        1
    } else {
        let mut t = first_term(pf);
        let mut k = 1usize;
        loop {
            if let Some((a, _)) = tail_bounds(pf, k, t) {
                // margin for the floating evaluation of t_k
                if a * (1.0 + 1e-9) / fm1f <= tail_eps {
                    break k;
                }
            }
            if k >= max_exact {
                return Err(Error::TailNotCertifiable(format!("p = {p}: {max_exact} exact terms not enough")));
            }
            t *= term_ratio(pf, k as f64);
            k += 1;
        }
    };
    let mut exact = Vec::with_capacity(terms);
    let mut t = fhat_sigma(p, 1)? * zf2(p);
    for s in 1..=terms {
        exact.push(&t / &fm1);
        if s < terms {
            t *= exact_ratio(p, s);
        }
    }
    let tail_bound = if pf == 0.0 {
        0.0
    } else {
        let (a, _) = tail_bounds(pf, terms, to_f64(&t)).expect("certified above");
        a / fm1f
    };
    if tail_bound > tail_eps {
        return Err(Error::TailNotCertifiable(format!("p = {p}: bound {tail_bound:e}")));
    }
    // sampling table on 0..2S (odd entries), pushed to f64 resolution
    let mut pmf = vec![0.0; 2 * exact.len()];
    for (k, x) in exact.iter().enumerate() {
        pmf[2 * k + 1] = to_f64(x);
    }
    if pf > 0.0 && pf < 0.5 {
        let mut s = exact.len();
        let mut t = to_f64(&exact[s - 1]) * fm1f;
        loop {
            let (a, _) = tail_bounds(pf, s, t).unwrap();
            if a / fm1f < 1e-17 {
                break;
            }
            t *= term_ratio(pf, s as f64);
            s += 1;
            pmf.push(0.0);
            pmf.push(t / fm1f);
        }
    }
    Ok(OffspringPair { p: p.clone(), f: f.clone(), mu_circ, exact, tail_bound, mu_bullet: Offspring::table(pmf), m_circ: fm1 })
}

/// Exact `P•^σ_{g_p}` sample: Φ of σ uniformly labeled p-GW trees and a
/// uniform bridge.
pub fn sample_pointed_boltzmann<R: Rng + ?Sized>(sigma: usize, p: f64, rng: &mut R) -> Result<PointedQuadrangulation> {
    check_pf(p)?;
    if sigma == 0 {
        return Err(Error::OutOfRange("σ ≥ 1 required".into()));
    }
    let f = sample_gw_forest(sigma, p, DEFAULT_SIZE_CAP, rng)?;
    let b = sample_uniform_bridge(sigma, rng);
    phi_finite(&f, &b)
}

/// Rejection telemetry.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct Attempts {
    pub attempts: usize,
    pub accepted: usize,
}

/// Exact `P^σ_{g_p}` sample: a pointed sample kept with probability
/// `(σ+1)/#V`.
pub fn sample_boltzmann<R: Rng + ?Sized>(
    sigma: usize,
    p: f64,
    rng: &mut R,
    max_attempts: usize,
) -> Result<QuadrangulationWithBoundary> {
    sample_boltzmann_counted(sigma, p, rng, max_attempts, &mut Attempts::default())
}

pub fn sample_boltzmann_counted<R: Rng + ?Sized>(
    sigma: usize,
    p: f64,
    rng: &mut R,
    max_attempts: usize,
    tele: &mut Attempts,
) -> Result<QuadrangulationWithBoundary> {
    for _ in 0..max_attempts {
        tele.attempts += 1;
        let q = sample_pointed_boltzmann(sigma, p, rng)?;
        let nv = q.quad.num_vertices();
        if rng.gen::<f64>() * (nv as f64) < (sigma + 1) as f64 {
            tele.accepted += 1;
            return Ok(q.quad);
        }
    }
    Err(Error::MaxAttemptsExceeded { attempts: max_attempts, rate: tele.accepted as f64 / tele.attempts.max(1) as f64 })
}

/// Exact `P̂^σ_{g_p}` sample by rejection on the simple-boundary event.
pub fn sample_simple_boltzmann<R: Rng + ?Sized>(
    sigma: usize,
    p: f64,
    rng: &mut R,
    max_attempts: usize,
) -> Result<QuadrangulationWithBoundary> {
    let mut tele = Attempts::default();
    let mut tries = 0;
    while tries < max_attempts {
        tries += 1;
        let q = sample_boltzmann_counted(sigma, p, rng, max_attempts, &mut tele)?;
        if q.map.is_simple_boundary() {
            return Ok(q);
        }
    }
    Err(Error::MaxAttemptsExceeded { attempts: max_attempts, rate: 0.0 })
}

/// Exact sampler for `P̂^k` (simple boundary of perimeter `2k`), by peeling
/// the inner face at the root edge.
///
/// Removing that face `(a, b, c, d)` leaves a region whose boundary walk
/// `a d c b v₂ … v_{2k-1}` has length `2k + 2` and can only pinch at `c` and
/// `d`. The walk splits into one, two or three simple-boundary holes, each of
/// which is filled independently:
///
/// `F̂_k = [k=1] + g (F̂_{k+1} + 2 Σ F̂_m F̂_{k+1-m} + Σ F̂_{m₁} F̂_{m₂} F̂_{m₃})`.
///
/// The expected work is linear in the number of faces, unlike rejection from
/// `P^k`, which has acceptance exponentially small in `k`.
#[derive(Clone, Debug)]
pub struct SimplePieceSampler {
    pub p: f64,
    /// `(g/w)` where `w = 4(1-p)²/(9p)` rescales `F̂_k` to `Ĝ_k = F̂_k w^k`
    gw: f64,
    w: f64,
    /// `Ĝ_k`, index 0 unused
    ghat: Vec<f64>,
    /// `Σ_{a+b=n, a,b≥1} Ĝ_a Ĝ_b`
    conv: Vec<f64>,
}

impl SimplePieceSampler {
    pub fn new(p: f64) -> Result<Self> {
        check_pf(p)?;
        let (gw, w) = if p == 0.0 { (0.0, 1.0) } else { (3.0 * p * p / (4.0 * (1.0 - p)), 4.0 * (1.0 - p).powi(2) / (9.0 * p)) };
        let g1 = if p == 0.0 { 1.0 } else { (3.0 - 4.0 * p) / (3.0 * (1.0 - p).powi(2)) * w };
        Ok(SimplePieceSampler { p, gw, w, ghat: vec![0.0, g1], conv: vec![0.0, 0.0] })
    }

    fn grow(&mut self, k: usize) {
        let p = self.p;
        while self.ghat.len() <= k {
            let s = (self.ghat.len() - 1) as f64;
            let lr = (3.0 * (s + 1.0) * (1.0 - 2.0 * p) + 2.0 * p) / (3.0 * s * (1.0 - 2.0 * p) + 2.0 * p);
            let r = 4.0 / 27.0 * (3.0 * s) * (3.0 * s - 1.0) * (3.0 * s - 2.0) / ((s + 1.0) * (2.0 * s + 1.0) * (2.0 * s)) * lr;
            let last = *self.ghat.last().unwrap();
            self.ghat.push(if p == 0.0 { 0.0 } else { last * r });
        }
        while self.conv.len() <= k {
            let n = self.conv.len();
            self.conv.push((1..n).map(|a| self.ghat[a] * self.ghat[n - a]).sum());
        }
    }

    /// `F̂_k w^k`
    pub fn scaled_weight(&mut self, k: usize) -> f64 {
        self.grow(k);
        self.ghat[k]
    }

    /// One piece of perimeter `2k`, rooted with the outer face on the right.
    pub fn sample<R: Rng + ?Sized>(&mut self, k: usize, rng: &mut R) -> Result<QuadrangulationWithBoundary> {
        if k == 0 {
            return Err(Error::OutOfRange("pieces have perimeter ≥ 2".into()));
        }
        if self.p == 0.0 && k != 1 {
            return Err(Error::OutOfRange(format!("no simple-boundary piece of perimeter {} at p = 0", 2 * k)));
        }
        const NONE: usize = usize::MAX;
        let mut alpha: Vec<usize> = Vec::new();
        let mut phi: Vec<usize> = Vec::new();
        let new_edge = |alpha: &mut Vec<usize>, phi: &mut Vec<usize>| {
            let x = alpha.len();
            alpha.extend([x + 1, x]);
            phi.extend([NONE, NONE]);
            (x, x + 1)
        };
        // outer cycle: h_i with the hole on the left, o_i = alpha(h_i) outside
        let mut hole = Vec::with_capacity(2 * k);
        let mut outer = Vec::with_capacity(2 * k);
        for _ in 0..2 * k {
            let (h, o) = new_edge(&mut alpha, &mut phi);
            hole.push(h);
            outer.push(o);
        }
        for i in 0..2 * k {
            phi[outer[i]] = outer[(i + 2 * k - 1) % (2 * k)];
        }
        let mut dead = vec![false; alpha.len()];
        let mut stack = vec![hole];
        while let Some(h) = stack.pop() {
            let k = h.len() / 2;
            if self.ghat.len() <= k + 1 {
                self.grow(2 * k + 2);
            }
            let mut u = rng.gen::<f64>() * self.ghat[k];
            if k == 1 {
                u -= self.w;
                if u < 0.0 {
                    // single edge: the two sides of the hole are one edge
                    let (a0, a1) = (alpha[h[0]], alpha[h[1]]);
                    if a0 == h[1] {
                        return Err(Error::InvalidMap("hole bounded by both sides of one edge".into()));
                    }
                    alpha[a0] = a1;
                    alpha[a1] = a0;
                    dead[h[0]] = true;
                    dead[h[1]] = true;
                    continue;
                }
            }
            // the face a→b→c→d→a inside, and the walk W = a d c b v₂ …
            let (x1, y1) = new_edge(&mut alpha, &mut phi);
            let (x2, y2) = new_edge(&mut alpha, &mut phi);
            let (x3, y3) = new_edge(&mut alpha, &mut phi);
            dead.extend([false; 6]);
            phi[h[0]] = x1;
            phi[x1] = x2;
            phi[x2] = x3;
            phi[x3] = h[0];
            let mut wk = vec![y3, y2, y1];
            wk.extend_from_slice(&h[1..]);
            let n = wk.len();
            let seg = |from: usize, to: usize| -> Vec<usize> { (from..to).map(|t| wk[t % n]).collect() };
            let gh = &self.ghat;
            let pick = |u: &mut f64, wgt: f64| {
                *u -= self.gw * wgt;
                *u < 0.0
            };
            if pick(&mut u, gh[k + 1]) {
                stack.push(wk);
                continue;
            }
            let mut done = false;
            // c pinched onto the boundary (d inner), then d pinched (c inner)
            'bc: for side in 0..2 {
                for m in 1..=k {
                    if pick(&mut u, gh[m] * gh[k + 1 - m]) {
                        if side == 0 {
                            let i = 2 * m + 2;
                            stack.push(seg(2, i));
                            stack.push(seg(i, n + 2));
                        } else {
                            let j = 2 * m + 1;
                            stack.push(seg(1, j));
                            stack.push(seg(j, n + 1));
                        }
                        done = true;
                        break 'bc;
                    }
                }
            }
            if done {
                continue;
            }
            // both pinched: 2 < i < j; rounding residue falls on the last term
            if k < 2 {
                stack.push(wk);
                continue;
            }
            let mut m1 = 1;
            while m1 + 1 < k && !pick(&mut u, gh[m1] * self.conv[k + 1 - m1]) {
                m1 += 1;
            }
            let rest = k + 1 - m1;
            let mut u2 = rng.gen::<f64>() * self.conv[rest];
            let mut m2 = 1;
            while m2 + 1 < rest {
                u2 -= gh[m2] * gh[rest - m2];
                if u2 < 0.0 {
                    break;
                }
                m2 += 1;
            }
            let i = 2 * m1 + 2;
            let j = i + 2 * m2 - 1;
            stack.push(seg(2, i));
            let mut b2 = vec![wk[1]];
            b2.extend(seg(i, j));
            stack.push(b2);
            stack.push(seg(j, n + 1));
        }
        let root = alpha[outer[0]];
        let mut id = vec![NONE; alpha.len()];
        let mut next = 0;
        for h in 0..alpha.len() {
            if !dead[h] {
                id[h] = next;
                next += 1;
            }
        }
        let mut a = vec![0; next];
        let mut f = vec![0; next];
        for h in 0..alpha.len() {
            if !dead[h] {
                a[id[h]] = id[alpha[h]];
                f[id[h]] = id[phi[h]];
            }
        }
        QuadrangulationWithBoundary::new(HalfEdgeMap::from_alpha_phi(a, &f, Some(id[root])))
    }
}

/// `[g^n] F_1(g)` as a function of `g`: the number of rooted quadrangulations
/// of perimeter 2 with `n` inner faces, from the pointed counts
/// `3^n C(2n+1, n)/(2n+1) · 2` and the depointing weight `1/(n+2)`.
pub fn perimeter2_counts(n_max: usize) -> Vec<BigRational> {
    (0..=n_max)
        .map(|n| {
            let forests = BigRational::from_integer(BigInt::from(crate::trees::count_forests(n, 1)));
            forests * int(2) * num_traits::pow(int(3), n) / int(n as i64 + 2)
        })
        .collect()
}

pub fn f64_of(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
