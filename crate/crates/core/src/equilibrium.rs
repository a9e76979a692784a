//! Equilibrium measure of the logarithmic energy with external field `v` on a
//! union of `g + 1` intervals.
//!
//! On cut `k` the density is written `σ = Q / (ε_k r)` with a real numerator
//! `Q = Q_p + q`: `Q_p` comes from the finite Hilbert inversion of `v′` and `q`
//! is a real polynomial of degree at most `g`. Gap masses use the analytic
//! continuation of `Q` into the gap, where `σ` continues to `i Q / y`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perturbation::{horner, Perturbation};
use crate::quadrature::{integrate_ray_offset, ChebSeries, RayMesh, SqrtSeries, DEFAULT_ORDER};
use crate::surface::{CycleFamily, Support, SurfaceCache, DEFAULT_FAMILY};

/// External field `v(x) = Σ c_k x^k + Σ extras`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    /// Ascending polynomial coefficients.
    pub coeffs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extras: Vec<Perturbation>,
}

impl PotentialSpec {
    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        let p = Self {
            coeffs,
            extras: vec![],
        };
        p.validate()?;
        Ok(p)
    }

    /// Confinement: the polynomial part (including polynomial extras) has even
    /// degree ≥ 2 and a positive leading coefficient; other extras must not
    /// outgrow it.
    pub fn validate(&self) -> Result<()> {
        let mut total = self.coeffs.clone();
        for e in &self.extras {
            if let Perturbation::Polynomial { coeffs } = e {
                if total.len() < coeffs.len() {
                    total.resize(coeffs.len(), 0.0);
                }
                for (t, c) in total.iter_mut().zip(coeffs) {
                    *t += c;
                }
            }
        }
        if total.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPotential("non-finite coefficient".into()));
        }
        let deg = match total.iter().rposition(|&c| c != 0.0) {
            Some(d) => d,
            None => return Err(Error::InvalidPotential("potential is identically zero".into())),
        };
        if deg < 2 || deg % 2 != 0 {
            return Err(Error::InvalidPotential(format!(
                "polynomial degree {deg} is not even and at least 2 (no confinement)"
            )));
        }
        if total[deg] <= 0.0 {
            return Err(Error::InvalidPotential(
                "leading coefficient must be positive (no confinement)".into(),
            ));
        }
        for e in &self.extras {
            if let Perturbation::Chebyshev { degree, .. } = e {
                if *degree >= deg {
                    return Err(Error::InvalidPotential(format!(
                        "Chebyshev extra of degree {degree} dominates the polynomial part"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Degree of the potential when every term is polynomial.
    pub fn polynomial_degree(&self) -> Option<usize> {
        let mut deg = self.coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0);
        for e in &self.extras {
            deg = deg.max(e.degree()?);
        }
        Some(deg)
    }

    pub fn v(&self, x: f64) -> f64 {
        horner(&self.coeffs, x) + self.extras.iter().map(|e| e.value(x)).sum::<f64>()
    }

    pub fn dv(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = acc * x + c * k as f64;
        }
        acc + self.extras.iter().map(|e| e.deriv(x)).sum::<f64>()
    }

    /// `v + eps · dv`.
    pub fn perturbed(&self, dv: &Perturbation, eps: f64) -> PotentialSpec {
        let mut p = self.clone();
        p.extras.push(dv.scaled(eps));
        p
    }
}

/// Finite Hilbert inversion of a smooth source `f` on the cuts:
/// `Q_p(x) = (1/2π²) Σ_k ε_k h_k ∫ sqrt(1-u²) ρ_k f / (u - ξ_k) du`.
#[derive(Debug, Clone)]
pub(crate) struct SourceTerm {
    series: Vec<SqrtSeries<f64>>,
}

impl SourceTerm {
    pub(crate) fn new(cache: &SurfaceCache, f: impl Fn(f64) -> f64) -> Self {
        let series = (0..cache.support().n_cuts())
            .map(|k| {
                let m = cache.cut_mesh(k);
                let g: Vec<f64> = m
                    .nodes()
                    .iter()
                    .zip(cache.cut_rho(k))
                    .map(|(&x, &rho)| rho * f(x))
                    .collect();
                SqrtSeries::from_samples(m, &g)
            })
            .collect();
        Self { series }
    }

    /// `Q_p(x)`: on a cut this is the real numerator of the particular density; off
    /// the cuts it is the exterior transform (not the continuation).
    pub(crate) fn particular(&self, cache: &SurfaceCache, x: f64) -> f64 {
        let s = cache.support();
        let mut acc = 0.0;
        for (k, ser) in self.series.iter().enumerate() {
            let m = cache.cut_mesh(k);
            acc += s.cut_sign(k) * m.half_width() * ser.transform(m.to_local(x));
        }
        acc / (2.0 * PI * PI)
    }

    /// `Q_p` at the right endpoint of cut `k`, with the local coordinate pinned to 1.
    pub(crate) fn particular_at_right_end(&self, cache: &SurfaceCache, k: usize) -> f64 {
        let s = cache.support();
        let b = s.cut(k).1;
        let mut acc = 0.0;
        for (m, ser) in self.series.iter().enumerate() {
            let mesh = cache.cut_mesh(m);
            let xi = if m == k { 1.0 } else { mesh.to_local(b) };
            acc += s.cut_sign(m) * mesh.half_width() * ser.transform(xi);
        }
        acc / (2.0 * PI * PI)
    }

    /// `∫_{gap j} Q_p^cont / (η_j r) dx`, the gap mass carried by the particular part.
    pub(crate) fn gap_mass(&self, cache: &SurfaceCache, j: usize, f: impl Fn(f64) -> f64) -> f64 {
        let s = cache.support();
        let eta = s.gap_sign(j);
        cache.gap_integral(j, |x| {
            self.particular(cache, x) - eta * s.r(x) * f(x) / (2.0 * PI)
        }) / eta
    }
}

/// Gap mass of the homogeneous term `x^l / (η_j r)`.
pub(crate) fn poly_gap_mass(cache: &SurfaceCache, j: usize, l: usize) -> f64 {
    cache.gap_integral(j, |x| x.powi(l as i32)) / cache.support().gap_sign(j)
}

/// Equilibrium density at a given support.
#[derive(Debug, Clone)]
pub struct Density {
    cache: SurfaceCache,
    potential: PotentialSpec,
    source: SourceTerm,
    q: Vec<f64>,
    numer: Vec<Vec<f64>>,
    samples: Vec<Vec<f64>>,
    homogeneous: Vec<f64>,
}

impl Density {
    pub fn support(&self) -> &Support {
        self.cache.support()
    }

    pub fn cache(&self) -> &SurfaceCache {
        &self.cache
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    /// Ascending coefficients of the real polynomial part `q` of the numerator.
    pub fn numerator_poly(&self) -> &[f64] {
        &self.q
    }

    /// `c_k = ∮_{α_k} (homogeneous part of σ)` with `α_k` encircling cut `k`.
    pub fn homogeneous(&self) -> &[f64] {
        &self.homogeneous
    }

    pub fn nodes(&self, k: usize) -> &[f64] {
        self.cache.cut_mesh(k).nodes()
    }

    /// `σ` at the quadrature nodes of cut `k`.
    pub fn samples(&self, k: usize) -> &[f64] {
        &self.samples[k]
    }

    fn numerator(&self, x: f64) -> f64 {
        self.source.particular(&self.cache, x) + horner(&self.q, x)
    }

    /// `σ(x)`, zero off the support.
    pub fn sigma(&self, x: f64) -> f64 {
        let s = self.support();
        match s.classify(x) {
            crate::surface::Region::Cut(k) => self.numerator(x) / (s.cut_sign(k) * s.r(x)),
            _ => 0.0,
        }
    }

    /// `∫_J f σ dx`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let s = self.support();
        (0..s.n_cuts())
            .map(|k| {
                let m = self.cache.cut_mesh(k);
                let inner: f64 = m
                    .nodes()
                    .iter()
                    .zip(m.weights())
                    .zip(&self.numer[k])
                    .zip(self.cache.cut_rho(k))
                    .map(|(((&x, &w), &qn), &rho)| w * f(x) * qn / rho)
                    .sum();
                s.cut_sign(k) * inner
            })
            .sum()
    }

    pub fn mass(&self) -> f64 {
        self.integrate(|_| 1.0)
    }

    /// `∫_J ln|x0 - t| σ(t) dt`.
    pub fn log_potential(&self, x0: f64) -> f64 {
        let s = self.support();
        (0..s.n_cuts())
            .map(|k| {
                let m = self.cache.cut_mesh(k);
                let eps = s.cut_sign(k);
                let g: Vec<f64> = self.numer[k]
                    .iter()
                    .zip(self.cache.cut_rho(k))
                    .map(|(qn, rho)| qn / (eps * rho))
                    .collect();
                let ser = ChebSeries::from_samples(m, &g);
                m.half_width().ln() * ser.weighted_integral() + ser.log_potential(m.to_local(x0))
            })
            .sum()
    }

    /// `v(x0) - 2 ∫ ln|x0 - t| σ(t) dt`.
    pub fn direct_a(&self, x0: f64) -> f64 {
        self.potential.v(x0) - 2.0 * self.log_potential(x0)
    }

    /// Gap masses `∫_{gap j} σ` of the continued density (imaginary unit dropped).
    pub fn gap_masses(&self) -> Vec<f64> {
        let p = &self.potential;
        (0..self.support().genus())
            .map(|j| {
                self.source.gap_mass(&self.cache, j, |x| p.dv(x))
                    + self
                        .q
                        .iter()
                        .enumerate()
                        .map(|(l, c)| c * poly_gap_mass(&self.cache, j, l))
                        .sum::<f64>()
            })
            .collect()
    }
}

fn build_density(
    cache: SurfaceCache,
    potential: PotentialSpec,
    source: SourceTerm,
    q: Vec<f64>,
) -> Density {
    let s = cache.support().clone();
    let mut numer = Vec::with_capacity(s.n_cuts());
    let mut samples = Vec::with_capacity(s.n_cuts());
    for k in 0..s.n_cuts() {
        let m = cache.cut_mesh(k);
        let h = m.half_width();
        let eps = s.cut_sign(k);
        let qn: Vec<f64> = m
            .nodes()
            .iter()
            .map(|&x| source.particular(&cache, x) + horner(&q, x))
            .collect();
        let sig = qn
            .iter()
            .zip(cache.cut_rho(k))
            .zip(m.angles())
            .map(|((qv, rho), th)| qv / (eps * rho * h * th.sin()))
            .collect();
        numer.push(qn);
        samples.push(sig);
    }
    let g = s.genus();
    let ug = cache.ug();
    let homogeneous = (0..g)
        .map(|k| {
            2.0 * s.cut_sign(k)
                * cache.cut_integral(k, |x| horner(&q, x) - ug.poly(x) / PI)
        })
        .collect();
    Density {
        cache,
        potential,
        source,
        q,
        numer,
        samples,
        homogeneous,
    }
}

/// `σ = σ_p + U_g/y + Σ c_k φ_k / y` with the `c_k` fixed by zero gap masses.
/// The `U_g` term carries the unit mass; `σ_p` and the `φ_k` terms carry none.
pub fn density(s: &Support, p: &PotentialSpec, order: usize) -> Result<Density> {
    let cache = SurfaceCache::new(s, order, DEFAULT_FAMILY)?;
    density_with_cache(cache, p)
}

pub(crate) fn density_with_cache(cache: SurfaceCache, p: &PotentialSpec) -> Result<Density> {
    let g = cache.genus();
    let source = SourceTerm::new(&cache, |x| p.dv(x));
    let mut q = cache.ug().kappas().iter().map(|k| k / PI).collect::<Vec<_>>();
    q.push(1.0 / PI);
    if g > 0 {
        let h = solve_gap_conditions(&cache, &source, |x| p.dv(x))?;
        for (qi, hi) in q.iter_mut().zip(&h) {
            *qi += hi;
        }
    }
    Ok(build_density(cache, p.clone(), source, q))
}

/// Real polynomial `h` of degree < g with zero total gap masses for `Q_p + h`.
pub(crate) fn solve_gap_conditions(
    cache: &SurfaceCache,
    source: &SourceTerm,
    f: impl Fn(f64) -> f64 + Copy,
) -> Result<Vec<f64>> {
    let g = cache.genus();
    let a = DMatrix::from_fn(g, g, |j, l| poly_gap_mass(cache, j, l));
    let rhs = DVector::from_fn(g, |j, _| -source.gap_mass(cache, j, f));
    let sol = a
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularSystem("homogeneous coefficients from gap masses"))?;
    Ok(sol.iter().copied().collect())
}

/// Density with the numerator polynomial fixed by `Q(b_j) = 0` at every right
/// endpoint. At a solved support it coincides with [`density`].
fn anchored_density(cache: SurfaceCache, p: &PotentialSpec) -> Result<Density> {
    let s = cache.support().clone();
    let n = s.n_cuts();
    let source = SourceTerm::new(&cache, |x| p.dv(x));
    let rights: Vec<f64> = (0..n).map(|k| s.cut(k).1).collect();
    let a = DMatrix::from_fn(n, n, |j, l| rights[j].powi(l as i32));
    let rhs = DVector::from_fn(n, |j, _| -source.particular_at_right_end(&cache, j));
    let q = a
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularSystem("endpoint anchoring"))?;
    Ok(build_density(cache, p.clone(), source, q.iter().copied().collect()))
}

/// `[M_0..M_g, G_1..G_g, N]`: moment conditions `∫_J x^k v′/(ε r)`, gap masses and
/// the mass defect of the endpoint-anchored density.
pub fn residuals(s: &Support, p: &PotentialSpec, order: usize) -> Result<Vec<f64>> {
    let cache = SurfaceCache::new(s, order, CycleFamily::CutLoops)?;
    let g = s.genus();
    let mut out = Vec::with_capacity(2 * g + 2);
    for k in 0..=g {
        out.push(
            (0..=g)
                .map(|m| s.cut_sign(m) * cache.cut_integral(m, |x| x.powi(k as i32) * p.dv(x)))
                .sum(),
        );
    }
    let d = anchored_density(cache, p)?;
    out.extend(d.gap_masses());
    out.push(d.mass() - 1.0);
    Ok(out)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    pub order: usize,
    /// Relative width (w.r.t. the support span) below which a cut or gap counts as vanished.
    pub collapse_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 50,
            max_halvings: 40,
            order: DEFAULT_ORDER,
            collapse_tol: 1e-6,
        }
    }
}

fn check_widths(e: &[f64], collapse_tol: f64) -> Result<()> {
    let span = e[e.len() - 1] - e[0];
    let tol = collapse_tol * span;
    for k in 0..e.len() / 2 {
        if e[2 * k + 1] - e[2 * k] < tol {
            return Err(Error::CutCollapse { cut: k });
        }
        if k + 1 < e.len() / 2 && e[2 * k + 2] - e[2 * k + 1] < tol {
            return Err(Error::CutCollision {
                left: k,
                right: k + 1,
            });
        }
    }
    Ok(())
}

/// After a stalled iteration, a cut or gap that lost most of its initial width
/// (relative to the span) points at the wrong genus.
fn diagnose_shrinkage(init: &[f64], last: &[f64]) -> Result<()> {
    let rel = |e: &[f64], i: usize| (e[i + 1] - e[i]) / (e[e.len() - 1] - e[0]);
    let (mut worst, mut at) = (SHRINK_RATIO, None);
    for i in 0..init.len() - 1 {
        let ratio = rel(last, i) / rel(init, i);
        if ratio < worst {
            worst = ratio;
            at = Some(i);
        }
    }
    match at {
        Some(i) if i % 2 == 0 => Err(Error::CutCollapse { cut: i / 2 }),
        Some(i) => Err(Error::CutCollision {
            left: i / 2,
            right: i / 2 + 1,
        }),
        None => Ok(()),
    }
}

const SHRINK_RATIO: f64 = 0.25;

/// A cut carrying negative mass at the stalled iterate cannot belong to the support.
fn diagnose_negative_mass(e: &[f64], p: &PotentialSpec, order: usize) -> Result<()> {
    let d = density(&Support::new(e.to_vec())?, p, order)?;
    let masses = cut_masses(&d);
    let (k, m) = masses
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    if masses.len() > 1 && m < 0.0 {
        return Err(Error::CutCollapse { cut: k });
    }
    Ok(())
}

fn ordered(e: &[f64]) -> bool {
    e.windows(2).all(|w| w[0] < w[1])
}

/// Damped Newton iteration on [`residuals`] with a forward-difference Jacobian.
pub fn solve_endpoints(p: &PotentialSpec, init: &Support, opts: &SolveOptions) -> Result<Support> {
    p.validate()?;
    let g = init.genus();
    if let Some(degree) = p.polynomial_degree() {
        // ∫_J x^k v′/y is π times the z⁻¹ coefficient of x^k v′/y, a nonzero constant
        // for k = 0 once deg v′ = g; no support of this genus can exist
        if degree < 2 * g + 2 {
            return Err(Error::GenusTooHigh {
                genus: g,
                degree,
                needed: 2 * g + 2,
            });
        }
    }
    let mut e = init.endpoints().to_vec();
    let n = e.len();
    let eval = |e: &[f64]| -> Result<Vec<f64>> {
        residuals(&Support::new(e.to_vec())?, p, opts.order)
    };
    let mut r = eval(&e)?;
    let mut rn = norm(&r);
    for _ in 0..opts.max_iter {
        if rn < opts.tol {
            return Support::new(e);
        }
        let cols: Vec<Result<Vec<f64>>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let h = 1e-7 * (1.0 + e[i].abs());
                let mut ep = e.clone();
                ep[i] += h;
                let (ep, h) = if ordered(&ep) {
                    (ep, h)
                } else {
                    let mut em = e.clone();
                    em[i] -= h;
                    (em, -h)
                };
                let rp = eval(&ep)?;
                Ok(rp.iter().zip(&r).map(|(a, b)| (a - b) / h).collect())
            })
            .collect();
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for (i, c) in cols.into_iter().enumerate() {
            let c = match c {
                Ok(c) => c,
                Err(err) => {
                    diagnose_shrinkage(init.endpoints(), &e)?;
                    return Err(err);
                }
            };
            for (row, v) in c.into_iter().enumerate() {
                jac[(row, i)] = v;
            }
        }
        let step = jac
            .lu()
            .solve(&DVector::from_iterator(n, r.iter().map(|x| -x)))
            .ok_or(Error::SingularSystem("endpoint Jacobian"))?;
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let cand: Vec<f64> = e.iter().zip(step.iter()).map(|(a, d)| a + lambda * d).collect();
            if ordered(&cand) {
                if let Ok(rc) = eval(&cand) {
                    let rcn = norm(&rc);
                    if rcn < rn {
                        accepted = Some((cand, rc, rcn));
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((cand, rc, rcn)) => {
                check_widths(&cand, opts.collapse_tol)?;
                e = cand;
                r = rc;
                rn = rcn;
            }
            None => break,
        }
    }
    if rn < opts.tol {
        return Support::new(e);
    }
    check_widths(&e, opts.collapse_tol)?;
    diagnose_shrinkage(init.endpoints(), &e)?;
    diagnose_negative_mass(&e, p, opts.order)?;
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: rn,
        last: e,
    })
}

/// `V[J] = ∫_{b}^{∞} (P(t)/r(t) - 1/t) dt - ln b` with `b` the rightmost endpoint,
/// `P` the monic numerator of `U_g`. Requires `b > 0`.
pub fn v_of_j(cache: &SurfaceCache) -> Result<f64> {
    let s = cache.support();
    let e = s.endpoints();
    let b = e[e.len() - 1];
    if b <= 0.0 {
        return Err(Error::InvalidSupport(format!(
            "rightmost endpoint {b} must be positive; translate first"
        )));
    }
    let scale = b - e[e.len() - 2];
    let mesh = RayMesh::new(b, scale, 2 * cache.order())?;
    let ug = cache.ug();
    let inner = &e[..e.len() - 1];
    let tail = integrate_ray_offset(
        |t, d| {
            let r = d.sqrt() * inner.iter().map(|x| (t - x).sqrt()).product::<f64>();
            ug.poly(t) / r - 1.0 / t
        },
        &mesh,
    )?;
    Ok(tail - b.ln())
}

/// `∫_J v U_g / y dx`.
fn v_against_ug(cache: &SurfaceCache, v: impl Fn(f64) -> f64) -> f64 {
    let s = cache.support();
    let ug = cache.ug();
    (0..s.n_cuts())
        .map(|k| s.cut_sign(k) * cache.cut_integral(k, |x| v(x) * ug.poly(x)))
        .sum::<f64>()
        / PI
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangeReport {
    pub a: f64,
    pub v_j: f64,
    /// `(x0, v(x0) - 2∫ ln|x0 - t| σ)` at interior probe points.
    pub probes: Vec<(f64, f64)>,
    pub spread: f64,
    pub deviation: f64,
}

pub const PROBE_SPREAD_TOL: f64 = 1e-8;
pub const A_AGREEMENT_TOL: f64 = 1e-7;

/// `A = 2 V[J] + ∫ v U_g / y`, cross-checked against the constancy of
/// `v - 2∫ ln|x - t| σ` on the support.
pub fn lagrange_a(d: &Density) -> Result<LagrangeReport> {
    let report = lagrange_a_unchecked(d)?;
    if !(report.spread < PROBE_SPREAD_TOL) {
        return Err(Error::Inconsistent {
            what: "probe spread of v - 2∫ln|x-t|σ",
            value: report.spread,
            tol: PROBE_SPREAD_TOL,
        });
    }
    if !(report.deviation < A_AGREEMENT_TOL) {
        return Err(Error::Inconsistent {
            what: "|A - direct A|",
            value: report.deviation,
            tol: A_AGREEMENT_TOL,
        });
    }
    Ok(report)
}

pub fn lagrange_a_unchecked(d: &Density) -> Result<LagrangeReport> {
    let s = d.support();
    let e = s.endpoints();
    let b = e[e.len() - 1];
    // A is translation invariant; V[J] alone is not and needs b > 0
    let v_j = if b > 0.0 {
        v_of_j(d.cache())?
    } else {
        let moved = SurfaceCache::new(&s.translated(1.0 - b), d.cache().order(), d.cache().family())?;
        v_of_j(&moved)?
    };
    let a = 2.0 * v_j + v_against_ug(d.cache(), |x| d.potential().v(x));
    let mut probes = Vec::new();
    for k in 0..s.n_cuts() {
        let (lo, hi) = s.cut(k);
        for f in [0.25, 0.5, 0.75] {
            let x = lo + f * (hi - lo);
            probes.push((x, d.direct_a(x)));
        }
    }
    let max = probes.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let min = probes.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let deviation = probes.iter().map(|p| (p.1 - a).abs()).fold(0.0, f64::max);
    Ok(LagrangeReport {
        a,
        v_j,
        probes,
        spread: max - min,
        deviation,
    })
}

/// `I[σ] = -∬ ln|x - t| σσ + ∫ vσ = (A + ∫ vσ) / 2`.
pub fn continuum_energy(d: &Density, a: f64) -> f64 {
    0.5 * (a + d.integrate(|x| d.potential().v(x)))
}

/// Solved equilibrium: support, density and Lagrange multiplier.
#[derive(Debug, Clone)]
pub struct EquilibriumSolution {
    density: Density,
    lagrange: LagrangeReport,
    residuals: Vec<f64>,
}

/// Serializable summary of an [`EquilibriumSolution`]; enough to rebuild it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub support: Support,
    pub potential: PotentialSpec,
    pub order: usize,
    pub a: f64,
    pub v_j: f64,
    pub residual_norm: f64,
    pub residuals: Vec<f64>,
    pub homogeneous: Vec<f64>,
    pub cut_masses: Vec<f64>,
}

impl EquilibriumSolution {
    pub fn from_support(s: &Support, p: &PotentialSpec, order: usize) -> Result<Self> {
        let residuals = residuals(s, p, order)?;
        let density = density(s, p, order)?;
        let lagrange = lagrange_a(&density)?;
        Ok(Self {
            density,
            lagrange,
            residuals,
        })
    }

    pub fn from_record(rec: &SolutionRecord) -> Result<Self> {
        Self::from_support(&rec.support, &rec.potential, rec.order)
    }

    pub fn record(&self) -> SolutionRecord {
        let s = self.support();
        SolutionRecord {
            support: s.clone(),
            potential: self.density.potential.clone(),
            order: self.density.cache.order(),
            a: self.lagrange.a,
            v_j: self.lagrange.v_j,
            residual_norm: self.residual_norm(),
            residuals: self.residuals.clone(),
            homogeneous: self.density.homogeneous.clone(),
            cut_masses: self.cut_masses(),
        }
    }

    pub fn density(&self) -> &Density {
        &self.density
    }

    pub fn support(&self) -> &Support {
        self.density.support()
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.density.potential
    }

    pub fn cache(&self) -> &SurfaceCache {
        self.density.cache()
    }

    pub fn a(&self) -> f64 {
        self.lagrange.a
    }

    pub fn v_j(&self) -> f64 {
        self.lagrange.v_j
    }

    pub fn lagrange(&self) -> &LagrangeReport {
        &self.lagrange
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn residual_norm(&self) -> f64 {
        norm(&self.residuals)
    }

    pub fn cut_masses(&self) -> Vec<f64> {
        cut_masses(&self.density)
    }

    pub fn energy(&self) -> f64 {
        continuum_energy(&self.density, self.lagrange.a)
    }
}

fn cut_masses(d: &Density) -> Vec<f64> {
        let s = d.support();
        (0..s.n_cuts())
            .map(|k| {
                let m = d.cache.cut_mesh(k);
                s.cut_sign(k)
                    * m.weights()
                        .iter()
                        .zip(&d.numer[k])
                        .zip(d.cache.cut_rho(k))
                        .map(|((w, q), rho)| w * q / rho)
                        .sum::<f64>()
            })
            .collect()
}

/// Solve for the endpoints from `init`, then build the density and `A`.
pub fn solve(p: &PotentialSpec, init: &Support, opts: &SolveOptions) -> Result<EquilibriumSolution> {
    let s = solve_endpoints(p, init, opts)?;
    let sol = EquilibriumSolution::from_support(&s, p, opts.order)?;
    check_positive(sol.density())?;
    Ok(sol)
}

pub const NEGATIVE_DENSITY_TOL: f64 = 1e-8;

/// `σ ≥ -tol · max σ` at every node.
pub fn check_positive(d: &Density) -> Result<()> {
    let n = d.support().n_cuts();
    let max = (0..n)
        .flat_map(|k| d.samples(k).iter().copied())
        .fold(0.0, f64::max);
    for k in 0..n {
        for (&x, &v) in d.nodes(k).iter().zip(d.samples(k)) {
            if v < -NEGATIVE_DENSITY_TOL * max {
                return Err(Error::NegativeDensity { cut: k, x, value: v });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::Support;

    fn quad(c: f64) -> PotentialSpec {
        PotentialSpec::polynomial(vec![0.0, 0.0, c / 2.0]).unwrap()
    }

    fn sup(e: &[f64]) -> Support {
        Support::new(e.to_vec()).unwrap()
    }

    #[test]
    fn potential_validation() {
        assert!(PotentialSpec::polynomial(vec![0.0, 1.0]).is_err());
        assert!(PotentialSpec::polynomial(vec![0.0, 0.0, -1.0]).is_err());
        assert!(PotentialSpec::polynomial(vec![0.0, 0.0, 0.0, 1.0]).is_err());
        assert!(PotentialSpec::polynomial(vec![0.0, 0.0, 0.0, 0.0, 0.25]).is_ok());
        let p = quad(1.0);
        assert_eq!(p.dv(3.0), 3.0);
        assert_eq!(p.v(2.0), 2.0);
    }

    #[test]
    fn semicircle_residuals_vanish() {
        let r = residuals(&sup(&[-2.0, 2.0]), &quad(1.0), 128).unwrap();
        assert_eq!(r.len(), 2);
        assert!(r.iter().all(|x| x.abs() < 1e-10), "{r:?}");
    }

    #[test]
    fn wrong_support_mass_defect() {
        // anchored σ = x²/(2π sqrt(1-x²)): mass ∫ x²/sqrt(1-x²) / (2π) = 1/4
        let r = residuals(&sup(&[-1.0, 1.0]), &quad(1.0), 128).unwrap();
        assert!((r[1] + 0.75).abs() < 1e-13);
        assert!(r[0].abs() < 1e-14);
        let r = residuals(&sup(&[-1.0, 1.5]), &quad(1.0), 128).unwrap();
        // ∫ x / sqrt((x+1)(1.5-x)) dx = π · 0.25
        assert!((r[0] - PI * 0.25).abs() < 1e-13);
    }

    #[test]
    fn symmetric_odd_moments_vanish() {
        let p = PotentialSpec::polynomial(vec![0.0, 0.0, -1.5, 0.0, 0.25]).unwrap();
        let r = residuals(&sup(&[-2.3, -0.9, 0.9, 2.3]), &p, 128).unwrap();
        assert!(r[1].abs() < 1e-13, "{r:?}");
        assert!(r[0].abs() > 1e-3);
    }

    #[test]
    fn semicircle_density() {
        let d = density(&sup(&[-2.0, 2.0]), &quad(1.0), 128).unwrap();
        for (x, s) in d.nodes(0).iter().zip(d.samples(0)) {
            assert!((s - (4.0 - x * x).sqrt() / (2.0 * PI)).abs() < 1e-12);
        }
        assert!((d.mass() - 1.0).abs() < 1e-13);
        assert!((d.sigma(0.3) - (4.0f64 - 0.09).sqrt() / (2.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn semicircle_solve() {
        let s = solve_endpoints(&quad(1.0), &sup(&[-1.5, 1.5]), &SolveOptions::default()).unwrap();
        assert!((s.endpoints()[0] + 2.0).abs() < 1e-10);
        assert!((s.endpoints()[1] - 2.0).abs() < 1e-10);
        let s = solve_endpoints(&quad(4.0), &sup(&[-1.2, 1.2]), &SolveOptions::default()).unwrap();
        assert!((s.endpoints()[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn scaling_covariance() {
        for c in [0.5, 1.0, 2.0, 4.0] {
            let s = solve_endpoints(&quad(c), &sup(&[-1.0, 1.3]), &SolveOptions::default()).unwrap();
            let want = 2.0 / c.sqrt();
            assert!((s.endpoints()[0] + want).abs() < 1e-9, "c={c}: {:?}", s.endpoints());
            assert!((s.endpoints()[1] - want).abs() < 1e-9);
        }
    }

    /// v = x⁴/4 - (3/2)x²: two cuts ±[1, √5], σ = |x| sqrt((x²-1)(5-x²)) / (2π).
    #[test]
    fn supercritical_quartic_two_cut() {
        let p = PotentialSpec::polynomial(vec![0.0, 0.0, -1.5, 0.0, 0.25]).unwrap();
        let r5 = 5f64.sqrt();
        let exact = sup(&[-r5, -1.0, 1.0, r5]);
        let r = residuals(&exact, &p, 128).unwrap();
        assert!(norm(&r) < 1e-11, "{r:?}");
        let d = density(&exact, &p, 128).unwrap();
        for k in 0..2 {
            for (x, s) in d.nodes(k).iter().zip(d.samples(k)) {
                let want = x.abs() * ((x * x - 1.0) * (5.0 - x * x)).sqrt() / (2.0 * PI);
                assert!((s - want).abs() < 1e-11, "{x}: {s} vs {want}");
            }
        }
        let s = solve_endpoints(&p, &sup(&[-2.0, -1.2, 0.8, 2.4]), &SolveOptions::default()).unwrap();
        for (a, b) in s.endpoints().iter().zip(exact.endpoints()) {
            assert!((a - b).abs() < 1e-10, "{:?}", s.endpoints());
        }
    }

    #[test]
    fn anchored_and_gap_densities_agree_at_solution() {
        let p = PotentialSpec::polynomial(vec![0.0, 0.3, -1.5, 0.0, 0.25]).unwrap();
        let s = solve_endpoints(&p, &sup(&[-2.3, -1.1, 0.9, 2.2]), &SolveOptions::default()).unwrap();
        let cache = SurfaceCache::new(&s, 128, CycleFamily::CutLoops).unwrap();
        let a = anchored_density(cache, &p).unwrap();
        let d = density(&s, &p, 128).unwrap();
        for (x, y) in a.numerator_poly().iter().zip(d.numerator_poly()) {
            assert!((x - y).abs() < 1e-9, "{x} {y}");
        }
        for k in 0..2 {
            for (x, y) in a.samples(k).iter().zip(d.samples(k)) {
                assert!((x - y).abs() < 1e-9);
            }
            assert!(d.samples(k).iter().all(|&v| v > -1e-10));
        }
        assert!(d.gap_masses()[0].abs() < 1e-12);
    }

    #[test]
    fn gap_mass_is_spectrally_accurate() {
        let p = PotentialSpec::polynomial(vec![0.0, 0.3, -1.5, 0.0, 0.25]).unwrap();
        let s = sup(&[-2.3, -1.1, 0.9, 2.2]);
        let g1 = residuals(&s, &p, 96).unwrap();
        let g2 = residuals(&s, &p, 192).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() < 1e-12, "{g1:?} {g2:?}");
        }
    }

    #[test]
    fn v_of_j_examples() {
        let c = SurfaceCache::new(&sup(&[-1.0, 1.0]), 128, CycleFamily::CutLoops).unwrap();
        assert!((v_of_j(&c).unwrap() - 2f64.ln()).abs() < 1e-12);
        let c = SurfaceCache::new(&sup(&[-3.0, 3.0]), 128, CycleFamily::CutLoops).unwrap();
        assert!((v_of_j(&c).unwrap() - (2f64.ln() - 3f64.ln())).abs() < 1e-12);
        let c = SurfaceCache::new(&sup(&[-3.0, -1.0]), 128, CycleFamily::CutLoops).unwrap();
        assert!(v_of_j(&c).is_err());
    }

    /// ∫_{-2}^{2} ln|t| sqrt(4-t²)/(2π) dt = -1/2 by direct quadrature of the log moment.
    #[test]
    fn semicircle_multiplier() {
        let sol = EquilibriumSolution::from_support(&sup(&[-2.0, 2.0]), &quad(1.0), 128).unwrap();
        assert!((sol.a() - 1.0).abs() < 1e-12);
        let (gx, gw) = crate::quadrature::gauss_legendre::<f64>(200);
        // t = 2 sin θ on (0, π/2), doubled; the log singularity at 0 is mild enough for 200 nodes
        let mut log_moment = 0.0;
        for (u, w) in gx.iter().zip(&gw) {
            let th = (u + 1.0) * PI / 4.0;
            log_moment += w * PI / 4.0 * 2.0 * (2.0 * th.sin()).ln() * 4.0 * th.cos().powi(2) / (2.0 * PI);
        }
        assert!((log_moment + 0.5).abs() < 1e-4, "{log_moment}");
        assert!((sol.density().direct_a(0.0) - 1.0).abs() < 1e-12);
        assert!(sol.lagrange().spread < 1e-12);
    }

    #[test]
    fn multiplier_translation_invariant() {
        let p = quad(1.0);
        let shifted = PotentialSpec::polynomial(vec![4.5, 3.0, 0.5]).unwrap(); // (x+3)²/2
        let a0 = EquilibriumSolution::from_support(&sup(&[-2.0, 2.0]), &p, 128).unwrap().a();
        let a1 = EquilibriumSolution::from_support(&sup(&[-5.0, -1.0]), &shifted, 128).unwrap().a();
        assert!((a0 - a1).abs() < 1e-9, "{a0} {a1}");
    }

    #[test]
    fn two_cut_multiplier_consistent() {
        let p = PotentialSpec::polynomial(vec![0.0, 0.3, -1.5, 0.0, 0.25]).unwrap();
        let sol = solve(&p, &sup(&[-2.3, -1.1, 0.9, 2.2]), &SolveOptions::default()).unwrap();
        let l = sol.lagrange();
        assert!(l.spread < 1e-8 && l.deviation < 1e-7, "{l:?}");
    }

    #[test]
    fn record_round_trip_is_exact() {
        let p = quad(1.0);
        let sol = EquilibriumSolution::from_support(&sup(&[-2.0, 2.0]), &p, 64).unwrap();
        let back = EquilibriumSolution::from_record(&sol.record()).unwrap();
        assert_eq!(sol.record(), back.record());
    }

    #[test]
    fn genus_too_high_is_reported() {
        let err = solve_endpoints(&quad(1.0), &sup(&[-2.0, -0.5, 0.5, 2.0]), &SolveOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::GenusTooHigh { genus: 1, .. }), "{err:?}");
        assert!(err.to_string().contains("genus too high"));
    }

    #[test]
    fn genus_too_low_is_reported() {
        let p = PotentialSpec::polynomial(vec![0.0, 0.0, -3.0, 0.0, 0.25]).unwrap();
        let err = solve(&p, &sup(&[-3.0, 3.0]), &SolveOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NegativeDensity { .. }), "{err:?}");
        assert!(err.to_string().contains("genus too low / cut vanishes"));
    }
}
