//! Linear response of the equilibrium density and the density-density
//! correlation kernel `C(x, t) = δσ(x)/δv(t)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::equilibrium::{solve_gap_conditions, EquilibriumSolution, SourceTerm};
use crate::error::{Error, Result};
use crate::perturbation::{horner, Perturbation};
use crate::surface::{Region, Support, SurfaceCache};

/// Tolerance on the total mass of a response.
pub const RESPONSE_MASS_TOL: f64 = 1e-9;
/// Tolerance on the imaginary part of a kernel value, relative to its size.
pub const KERNEL_IMAG_TOL: f64 = 1e-10;

/// `δσ` for a potential variation `δv`, sampled on the cut nodes.
#[derive(Debug, Clone)]
pub struct ResponseSample {
    cache: SurfaceCache,
    source: SourceTerm,
    poly: Vec<f64>,
    numer: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    delta_a: f64,
    mass: f64,
    gap_masses: Vec<f64>,
}

impl ResponseSample {
    pub fn support(&self) -> &Support {
        self.cache.support()
    }

    pub fn nodes(&self, k: usize) -> &[f64] {
        self.cache.cut_mesh(k).nodes()
    }

    /// `δσ` at the nodes of cut `k`.
    pub fn values(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    /// `δσ(x) · ε_k r(x)` at the nodes of cut `k`; bounded up to the endpoints.
    pub fn numerators(&self, k: usize) -> &[f64] {
        &self.numer[k]
    }

    pub fn delta_a(&self) -> f64 {
        self.delta_a
    }

    /// `∫_J δσ`, asserted to vanish.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn gap_masses(&self) -> &[f64] {
        &self.gap_masses
    }

    /// Coefficients of `δσ_hom = i h / y`, ascending.
    pub fn homogeneous_poly(&self) -> &[f64] {
        &self.poly
    }

    /// `δσ(x)` for `x` inside a cut, zero elsewhere.
    pub fn eval(&self, x: f64) -> f64 {
        let s = self.support();
        match s.classify(x) {
            Region::Cut(k) => {
                (self.source.particular(&self.cache, x) + horner(&self.poly, x))
                    / (s.cut_sign(k) * s.r(x))
            }
            _ => 0.0,
        }
    }

    /// `∫_J f δσ dx`.
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
                    .map(|(((&x, &w), &q), &rho)| w * f(x) * q / rho)
                    .sum();
                s.cut_sign(k) * inner
            })
            .sum()
    }
}

/// Solve `2 P∫ δσ(t)/(x - t) dt = δv′(x)` with zero gap masses. The total mass is
/// not imposed; it is checked afterwards.
pub fn respond(sol: &EquilibriumSolution, dv: &Perturbation) -> Result<ResponseSample> {
    respond_with_cache(sol.cache(), dv)
}

pub fn respond_with_cache(cache: &SurfaceCache, dv: &Perturbation) -> Result<ResponseSample> {
    let s = cache.support().clone();
    let f = |x: f64| dv.deriv(x);
    let source = SourceTerm::new(cache, f);
    let poly = if s.genus() > 0 {
        solve_gap_conditions(cache, &source, f)?
    } else {
        vec![]
    };
    let mut numer = Vec::with_capacity(s.n_cuts());
    let mut values = Vec::with_capacity(s.n_cuts());
    for k in 0..s.n_cuts() {
        let m = cache.cut_mesh(k);
        let h = m.half_width();
        let eps = s.cut_sign(k);
        let q: Vec<f64> = m
            .nodes()
            .iter()
            .map(|&x| source.particular(cache, x) + horner(&poly, x))
            .collect();
        values.push(
            q.iter()
                .zip(cache.cut_rho(k))
                .zip(m.angles())
                .map(|((q, rho), th)| q / (eps * rho * h * th.sin()))
                .collect(),
        );
        numer.push(q);
    }
    let gap_masses = (0..s.genus())
        .map(|j| {
            source.gap_mass(cache, j, f)
                + poly
                    .iter()
                    .enumerate()
                    .map(|(l, c)| c * crate::equilibrium::poly_gap_mass(cache, j, l))
                    .sum::<f64>()
        })
        .collect();
    let mut out = ResponseSample {
        cache: cache.clone(),
        source,
        poly,
        numer,
        values,
        delta_a: delta_a_with_cache(cache, dv),
        mass: 0.0,
        gap_masses,
    };
    out.mass = out.integrate(|_| 1.0);
    let scale = out
        .values
        .iter()
        .flatten()
        .fold(1.0, |a: f64, b| a.max(b.abs()));
    if !(out.mass.abs() < RESPONSE_MASS_TOL * scale) {
        return Err(Error::Inconsistent {
            what: "total mass of the response",
            value: out.mass.abs(),
            tol: RESPONSE_MASS_TOL * scale,
        });
    }
    Ok(out)
}

/// `δA = ∫_J U_g δv / y dx`.
pub fn delta_a(sol: &EquilibriumSolution, dv: &Perturbation) -> f64 {
    delta_a_with_cache(sol.cache(), dv)
}

fn delta_a_with_cache(cache: &SurfaceCache, dv: &Perturbation) -> f64 {
    let s = cache.support();
    let ug = cache.ug();
    (0..s.n_cuts())
        .map(|k| s.cut_sign(k) * cache.cut_integral(k, |x| ug.poly(x) * dv.value(x)))
        .sum::<f64>()
        / PI
}

fn check_pair(cache: &SurfaceCache, x: f64, t: f64, exclusion: f64) -> Result<()> {
    let s = cache.support();
    for p in [x, t] {
        if !matches!(s.classify(p), Region::Cut(_)) {
            return Err(Error::InvalidSupport(format!(
                "kernel argument {p} is not interior to a cut"
            )));
        }
    }
    if !((x - t).abs() > exclusion) {
        return Err(Error::DiagonalBand { x, t });
    }
    Ok(())
}

fn real_part(z: Complex64, what: &'static str) -> Result<f64> {
    if !(z.im.abs() <= KERNEL_IMAG_TOL * z.re.abs().max(1.0)) {
        return Err(Error::Inconsistent {
            what,
            value: z.im.abs(),
            tol: KERNEL_IMAG_TOL * z.re.abs().max(1.0),
        });
    }
    Ok(z.re)
}

/// `∂_t` of `[y(t)/(x-t) - Σ_k φ_k(x) y(t) I_k(t)] / (2π² y(x))`, differentiated analytically.
pub fn kernel_direct(cache: &SurfaceCache, x: f64, t: f64, exclusion: f64) -> Result<f64> {
    check_pair(cache, x, t, exclusion)?;
    kernel_direct_complex(cache, x, t).and_then(|z| real_part(z, "imaginary part of kernel_direct"))
}

pub fn kernel_direct_complex(cache: &SurfaceCache, x: f64, t: f64) -> Result<Complex64> {
    let s = cache.support();
    let yx = s.eval_y(x)?;
    let yt = s.eval_y(t)?;
    let dyt = s.eval_dy(t)?;
    let d = x - t;
    let mut acc = dyt / d + yt / (d * d);
    let phi = cache.phi();
    for k in 0..s.genus() {
        let (ik, dik) = cache.alpha_cauchy(k, t);
        acc -= phi.eval(k, x) * (dyt * ik + yt * dik);
    }
    Ok(acc / (2.0 * PI * PI * yx))
}

/// Closed form through the second-kind differentials:
/// `2π² C = y′(t)/(y(x)(x-t)) + y(t)/(y(x)(x-t)²) + Σ_k x^{g-k} Σ_{j≤k} j Γ_{k-j} π_j(t) / (y(x) y(t))`
/// with `π_j / y = t^{j-1} + O(t⁻²)` at infinity.
pub fn kernel_pi(cache: &SurfaceCache, x: f64, t: f64, exclusion: f64) -> Result<f64> {
    check_pair(cache, x, t, exclusion)?;
    kernel_pi_complex(cache, x, t).and_then(|z| real_part(z, "imaginary part of kernel_pi"))
}

pub fn kernel_pi_complex(cache: &SurfaceCache, x: f64, t: f64) -> Result<Complex64> {
    let s = cache.support();
    let yx = s.eval_y(x)?;
    let yt = s.eval_y(t)?;
    let dyt = s.eval_dy(t)?;
    let d = x - t;
    let total = dyt / (yx * d) + yt / (yx * d * d) + pi_sum(cache, x, t, 1.0) / (yx * yt);
    Ok(total / (2.0 * PI * PI))
}

/// `Σ_k x^{g-k} Σ_{j≤k} w·j Γ_{k-j} π_j(t)`.
fn pi_sum(cache: &SurfaceCache, x: f64, t: f64, w: f64) -> f64 {
    let g = cache.genus();
    let gamma = cache.gamma().coeffs();
    let pis: Vec<f64> = cache.pis().iter().map(|p| p.eval(t)).collect();
    let mut sum = 0.0;
    for k in 1..=g {
        let inner: f64 = (1..=k)
            .map(|j| w * j as f64 * gamma[k - j] * pis[j - 1])
            .sum();
        sum += x.powi((g - k) as i32) * inner;
    }
    sum
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelMethod {
    Direct,
    Pi,
}

/// `C` on a product grid; `None` inside the diagonal band.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGrid {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub values: Vec<Vec<Option<f64>>>,
    pub method: KernelMethod,
    pub exclusion: f64,
}

/// `n` points spread over the support by arc length, at the midpoints of equal pieces.
pub fn support_points(s: &Support, n: usize) -> Vec<f64> {
    let widths: Vec<f64> = (0..s.n_cuts()).map(|k| s.cut(k).1 - s.cut(k).0).collect();
    let total: f64 = widths.iter().sum();
    (0..n)
        .map(|i| {
            let mut u = (i as f64 + 0.5) / n as f64 * total;
            for (k, w) in widths.iter().enumerate() {
                if u < *w || k + 1 == widths.len() {
                    return s.cut(k).0 + u.min(*w);
                }
                u -= w;
            }
            unreachable!()
        })
        .collect()
}

/// Default exclusion radius: `1e-3` of the narrowest cut.
pub fn default_exclusion(s: &Support) -> f64 {
    1e-3 * (0..s.n_cuts())
        .map(|k| s.cut(k).1 - s.cut(k).0)
        .fold(f64::INFINITY, f64::min)
}

pub fn kernel_grid(
    sol: &EquilibriumSolution,
    nx: usize,
    nt: usize,
    exclusion: f64,
    method: KernelMethod,
) -> Result<KernelGrid> {
    let cache = sol.cache();
    let x = support_points(sol.support(), nx);
    let t = support_points(sol.support(), nt);
    let values = x
        .par_iter()
        .map(|&xi| {
            t.iter()
                .map(|&tj| {
                    if (xi - tj).abs() <= exclusion {
                        return Ok(None);
                    }
                    let v = match method {
                        KernelMethod::Direct => kernel_direct(cache, xi, tj, exclusion)?,
                        KernelMethod::Pi => kernel_pi(cache, xi, tj, exclusion)?,
                    };
                    Ok(Some(v))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KernelGrid {
        x,
        t,
        values,
        method,
        exclusion,
    })
}

/// `-∫_J f δσ_f dx` with `δσ_f` the response to `δv = f`.
pub fn variance(sol: &EquilibriumSolution, f: &Perturbation) -> Result<f64> {
    let r = respond(sol, f)?;
    Ok(-r.integrate(|x| f.value(x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{solve, PotentialSpec, SolveOptions};
    use crate::quadrature::gauss_legendre;
    use crate::surface::{CycleFamily, DEFAULT_FAMILY};

    fn cache(e: &[f64]) -> SurfaceCache {
        SurfaceCache::new(&Support::new(e.to_vec()).unwrap(), 128, DEFAULT_FAMILY).unwrap()
    }

    fn two_cut() -> EquilibriumSolution {
        let p = PotentialSpec::polynomial(vec![0.0, 0.3, -1.5, 0.0, 0.25]).unwrap();
        let init = Support::new(vec![-2.3, -1.1, 0.9, 2.2]).unwrap();
        solve(&p, &init, &SolveOptions::default()).unwrap()
    }

    const G2: [f64; 6] = [-2.0, -1.2, -0.3, 0.4, 1.1, 2.5];

    /// `∫ C(x, t) f(t) dt` over every cut by Gauss–Legendre, for smooth `f` vanishing near `x`.
    fn kernel_against(c: &SurfaceCache, x: f64, f: impl Fn(f64) -> f64) -> f64 {
        let (gx, gw) = gauss_legendre::<f64>(400);
        let s = c.support();
        let mut acc = 0.0;
        for k in 0..s.n_cuts() {
            let (lo, hi) = s.cut(k);
            for (u, w) in gx.iter().zip(&gw) {
                let t = lo + (u + 1.0) * (hi - lo) / 2.0;
                acc += w * (hi - lo) / 2.0 * kernel_direct_complex(c, x, t).unwrap().re * f(t);
            }
        }
        acc
    }

    #[test]
    fn one_cut_closed_form() {
        let c = cache(&[-1.0, 1.0]);
        for &(x, t) in &[(0.3, -0.5), (-0.9, 0.2), (0.7, 0.75)] {
            let sx = (1.0f64 - x * x).sqrt();
            let st = (1.0f64 - t * t).sqrt();
            let want = (-t / st * (x - t) + st) / ((x - t) * (x - t) * sx) / (2.0 * PI * PI);
            let got = kernel_direct(&c, x, t, 1e-6).unwrap();
            assert!((got - want).abs() < 1e-12 * want.abs().max(1.0), "{got} {want}");
            let pi = kernel_pi(&c, x, t, 1e-6).unwrap();
            assert!((pi - got).abs() <= 1e-15 * got.abs().max(1.0));
        }
    }

    #[test]
    fn kernel_rejects_diagonal_band_and_exterior() {
        let c = cache(&[-1.0, 1.0]);
        assert!(matches!(kernel_direct(&c, 0.1, 0.1005, 1e-3), Err(Error::DiagonalBand { .. })));
        assert!(kernel_pi(&c, 1.5, 0.0, 1e-3).is_err());
    }

    #[test]
    fn symmetric_and_formulas_agree() {
        let sol = two_cut();
        for c in [cache(&[-1.3, 0.8]), sol.cache().clone(), cache(&G2)] {
            let pts = support_points(c.support(), 20);
            let mut worst_sym: f64 = 0.0;
            let mut worst_pi: f64 = 0.0;
            for &x in &pts {
                for &t in &pts {
                    if x == t {
                        continue;
                    }
                    let a = kernel_direct(&c, x, t, 1e-9).unwrap();
                    let b = kernel_direct(&c, t, x, 1e-9).unwrap();
                    let p = kernel_pi(&c, x, t, 1e-9).unwrap();
                    let q = kernel_pi(&c, t, x, 1e-9).unwrap();
                    worst_sym = worst_sym.max((a - b).abs()).max((p - q).abs());
                    worst_pi = worst_pi.max((a - p).abs());
                }
            }
            assert!(worst_sym < 1e-8, "symmetry {worst_sym}");
            assert!(worst_pi < 1e-8, "pi vs direct {worst_pi}");
        }
    }

    /// With the printed weight `2j Γ_{k-j}` the closed form is not symmetric.
    #[test]
    fn doubled_pi_weight_breaks_symmetry() {
        let c = cache(&G2);
        let printed = |x: f64, t: f64| {
            let s = c.support();
            let (yx, yt) = (s.eval_y(x).unwrap(), s.eval_y(t).unwrap());
            let d = x - t;
            (s.eval_dy(t).unwrap() / (yx * d) + yt / (yx * d * d) + pi_sum(&c, x, t, 2.0) / (yx * yt)).re
        };
        let (x, t) = (-1.5, 1.5);
        let gap = (printed(x, t) - printed(t, x)).abs();
        assert!(gap > 1e-4 * printed(x, t).abs(), "{gap}");
        let doubled = pi_sum(&c, x, t, 2.0);
        assert!((doubled - 2.0 * pi_sum(&c, x, t, 1.0)).abs() < 1e-12 * doubled.abs());
    }

    #[test]
    fn cut_loops_give_a_different_real_kernel() {
        let s = two_cut().support().clone();
        let cut = SurfaceCache::new(&s, 128, CycleFamily::CutLoops).unwrap();
        let nested = SurfaceCache::new(&s, 128, CycleFamily::NestedCutLoops).unwrap();
        let gap = SurfaceCache::new(&s, 128, CycleFamily::GapLoops).unwrap();
        let (x, t) = (-1.6, 1.4);
        let a = kernel_direct(&cut, x, t, 1e-9).unwrap();
        let b = kernel_direct(&nested, x, t, 1e-9).unwrap();
        let c = kernel_direct(&gap, x, t, 1e-9).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!((a - kernel_direct(&cut, t, x, 1e-9).unwrap()).abs() < 1e-10);
        assert!((a - c).abs() > 1e-3);
    }

    #[test]
    fn constant_shift_has_no_response() {
        for c in [cache(&[-2.0, 2.0]), two_cut().cache().clone(), cache(&G2)] {
            let r = respond_with_cache(&c, &Perturbation::Constant { value: 0.7 }).unwrap();
            let worst = (0..c.support().n_cuts())
                .flat_map(|k| r.values(k).iter())
                .fold(0.0f64, |a, b| a.max(b.abs()));
            assert!(worst < 1e-10);
            assert!((r.delta_a() - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn response_conserves_mass_and_gap_masses() {
        for c in [two_cut().cache().clone(), cache(&G2)] {
            let dv = Perturbation::Bump {
                center: 0.5,
                width: 0.4,
                amplitude: 1.0,
            };
            let r = respond_with_cache(&c, &dv).unwrap();
            assert!(r.mass().abs() < 1e-12);
            assert!(r.gap_masses().iter().all(|g| g.abs() < 1e-12));
        }
    }

    #[test]
    fn kernel_reproduces_response() {
        for c in [cache(&[-2.0, 2.0]), two_cut().cache().clone(), cache(&G2)] {
            let s = c.support().clone();
            let (lo, hi) = s.cut(0);
            let t0 = lo + 0.4 * (hi - lo);
            let dv = Perturbation::Bump {
                center: t0,
                width: 0.03 * (hi - lo),
                amplitude: 1.0,
            };
            let r = respond_with_cache(&c, &dv).unwrap();
            let (lo2, hi2) = s.cut(s.n_cuts() - 1);
            let x = lo2 + 0.8 * (hi2 - lo2);
            let want = r.eval(x);
            let got = kernel_against(&c, x, |t| dv.value(t));
            assert!((got - want).abs() < 1e-5 * want.abs(), "{got} {want}");
        }
    }

    #[test]
    fn bilinear_symmetry() {
        let c = cache(&G2);
        let fs = [
            Perturbation::Bump {
                center: -1.5,
                width: 0.2,
                amplitude: 1.0,
            },
            Perturbation::Polynomial {
                coeffs: vec![0.0, 1.0, 0.3, -0.2],
            },
        ];
        let r0 = respond_with_cache(&c, &fs[0]).unwrap();
        let r1 = respond_with_cache(&c, &fs[1]).unwrap();
        let a = r1.integrate(|x| fs[0].value(x));
        let b = r0.integrate(|x| fs[1].value(x));
        assert!((a - b).abs() < 1e-6 * a.abs(), "{a} {b}");
    }

    #[test]
    fn delta_a_parity() {
        let c = cache(&[-2.0, -0.5, 0.5, 2.0]);
        let r = respond_with_cache(
            &c,
            &Perturbation::Polynomial {
                coeffs: vec![0.0, 1.0, 0.0, 2.0],
            },
        )
        .unwrap();
        assert!(r.delta_a().abs() < 1e-13);
    }

    #[test]
    fn one_cut_variance_is_linear_in_degree() {
        let p = PotentialSpec::polynomial(vec![0.0, 0.0, 2.0]).unwrap();
        let sol = solve(&p, &Support::new(vec![-1.2, 1.2]).unwrap(), &SolveOptions::default()).unwrap();
        let ratios: Vec<f64> = (1..=5)
            .map(|k| {
                let f = Perturbation::Chebyshev {
                    lo: -1.0,
                    hi: 1.0,
                    degree: k,
                    amplitude: 1.0,
                };
                variance(&sol, &f).unwrap() / k as f64
            })
            .collect();
        for r in &ratios {
            assert!((r - ratios[0]).abs() < 1e-6, "{ratios:?}");
        }
        assert!(variance(&sol, &Perturbation::Constant { value: 3.0 }).unwrap().abs() < 1e-10);
    }

    #[test]
    fn grid_excludes_band_and_is_symmetric() {
        let sol = two_cut();
        let g = kernel_grid(&sol, 15, 15, default_exclusion(sol.support()), KernelMethod::Pi).unwrap();
        for i in 0..15 {
            assert!(g.values[i][i].is_none());
            for j in 0..15 {
                if let (Some(a), Some(b)) = (g.values[i][j], g.values[j][i]) {
                    assert!((a - b).abs() < 1e-8);
                }
            }
        }
    }
}
