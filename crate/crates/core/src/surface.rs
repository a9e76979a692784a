//! The two-sheeted curve `y² = ∏ (z - a_j)(z - b_j)` attached to a support
//! `J = ∪ (a_j, b_j)`: branch evaluation on the real line, the expansion of
//! `y` at infinity, and the normalized differentials built on it.
//!
//! Branch: the upper sheet is fixed by `y ~ +z^{g+1}` at `+∞`. On the real
//! line `y(x + i0) = r(x) · i^{m(x)}` where `r = ∏ sqrt|x - e|` and `m(x)` counts
//! the endpoints to the right of `x`. With this choice `y` is imaginary on the
//! cuts and real on gaps and exteriors.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{make_mesh, ChebSeries, IntervalMesh};
use crate::scalar::Scalar;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Ordered endpoints `a_1 < b_1 < a_2 < … < b_{g+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Support {
    endpoints: Vec<f64>,
}

impl TryFrom<Vec<f64>> for Support {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Support::new(v)
    }
}

impl From<Support> for Vec<f64> {
    fn from(s: Support) -> Self {
        s.endpoints
    }
}

/// Location of a real point relative to the support. Indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Cut(usize),
    Gap(usize),
    ExteriorLeft,
    ExteriorRight,
    Endpoint(usize),
}

impl Support {
    pub fn new(endpoints: Vec<f64>) -> Result<Self> {
        if endpoints.len() < 2 || !endpoints.len().is_multiple_of(2) {
            return Err(Error::InvalidSupport(format!(
                "expected an even, nonzero number of endpoints, got {}",
                endpoints.len()
            )));
        }
        if endpoints.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidSupport("non-finite endpoint".into()));
        }
        if let Some(i) = endpoints.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSupport(format!(
                "endpoints not strictly increasing at position {}",
                i + 1
            )));
        }
        Ok(Self { endpoints })
    }

    pub fn endpoints(&self) -> &[f64] {
        &self.endpoints
    }

    pub fn genus(&self) -> usize {
        self.endpoints.len() / 2 - 1
    }

    pub fn n_cuts(&self) -> usize {
        self.endpoints.len() / 2
    }

    /// `(a_k, b_k)`.
    pub fn cut(&self, k: usize) -> (f64, f64) {
        (self.endpoints[2 * k], self.endpoints[2 * k + 1])
    }

    /// `(b_j, a_{j+1})`.
    pub fn gap(&self, j: usize) -> (f64, f64) {
        (self.endpoints[2 * j + 1], self.endpoints[2 * j + 2])
    }

    pub fn translated(&self, shift: f64) -> Support {
        Support {
            endpoints: self.endpoints.iter().map(|e| e + shift).collect(),
        }
    }

    fn endpoint_tol(e: f64) -> f64 {
        1e-12 * (1.0 + e.abs())
    }

    pub fn classify(&self, x: f64) -> Region {
        if let Some(i) = self
            .endpoints
            .iter()
            .position(|&e| (x - e).abs() < Self::endpoint_tol(e))
        {
            return Region::Endpoint(i);
        }
        let m = self.endpoints.iter().filter(|&&e| e > x).count();
        let total = self.endpoints.len();
        match m {
            0 => Region::ExteriorRight,
            m if m == total => Region::ExteriorLeft,
            m => {
                let left = total - m; // endpoints at or left of x
                if left % 2 == 1 {
                    Region::Cut(left / 2)
                } else {
                    Region::Gap(left / 2 - 1)
                }
            }
        }
    }

    /// `r(x) = ∏ sqrt|x - e|`.
    pub fn r(&self, x: f64) -> f64 {
        self.endpoints.iter().map(|e| (x - e).abs().sqrt()).product()
    }

    /// `r(x)` with the two endpoints `skip` removed; smooth on the interval they bound.
    pub(crate) fn rho(&self, x: f64, skip: (usize, usize)) -> f64 {
        self.endpoints
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != skip.0 && *i != skip.1)
            .map(|(_, e)| (x - e).abs().sqrt())
            .product()
    }

    /// `ε_k` with `y(x + i0) = i ε_k r(x)` on cut `k`.
    pub fn cut_sign(&self, k: usize) -> f64 {
        if (self.genus() - k).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    /// `η_j` with `y(x) = η_j r(x)` on gap `j`.
    pub fn gap_sign(&self, j: usize) -> f64 {
        if (self.genus() - j).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    /// Boundary value `y(x + i0)` on the upper sheet.
    pub fn eval_y(&self, x: f64) -> Result<Complex64> {
        if let Region::Endpoint(_) = self.classify(x) {
            return Err(Error::NearEndpoint { x });
        }
        let m = self.endpoints.iter().filter(|&&e| e > x).count();
        let phase = match m % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => I,
            2 => Complex64::new(-1.0, 0.0),
            _ => -I,
        };
        Ok(phase * self.r(x))
    }

    /// `dy/dx` along the real line, `y · ½ Σ 1/(x - e)`.
    pub fn eval_dy(&self, x: f64) -> Result<Complex64> {
        let y = self.eval_y(x)?;
        let s: f64 = self.endpoints.iter().map(|e| 0.5 / (x - e)).sum();
        Ok(y * s)
    }
}

/// Laurent coefficients of `y(z)/z^{g+1}` at `z = ∞` (upper sheet).
#[derive(Debug, Clone, PartialEq)]
pub struct GammaCoeffs<T: Scalar> {
    coeffs: Vec<T>,
    symmetric: Vec<T>,
}

impl<T: Scalar> GammaCoeffs<T> {
    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Largest deviation between the coefficients of `(Σ Γ_k u^k)²` and of
    /// `∏ (1 - e u)` through the stored order.
    pub fn squaring_residual(&self) -> T {
        let mut worst = T::zero();
        for k in 0..self.coeffs.len() {
            let mut sq = T::zero();
            for i in 0..=k {
                sq = sq + self.coeffs[i] * self.coeffs[k - i];
            }
            let e = self.symmetric.get(k).copied().unwrap_or(T::zero());
            worst = worst.max((sq - e).abs());
        }
        worst
    }
}

/// Square-root series recursion from the signed elementary symmetric
/// functions `E_k` of the endpoints (`∏ (1 - e u) = Σ E_k u^k`).
pub fn gamma_coeffs<T: Scalar>(endpoints: &[T], order: usize) -> GammaCoeffs<T> {
    let mut sym = vec![T::one()];
    for &e in endpoints {
        let mut next = vec![T::zero(); sym.len() + 1];
        for (k, &c) in sym.iter().enumerate() {
            next[k] = next[k] + c;
            next[k + 1] = next[k + 1] - e * c;
        }
        sym = next;
    }
    let half = T::from_f64(0.5).unwrap();
    let mut g = vec![T::one()];
    for k in 1..=order {
        let e = sym.get(k).copied().unwrap_or(T::zero());
        let mut cross = T::zero();
        for i in 1..k {
            cross = cross + g[i] * g[k - i];
        }
        g.push((e - cross) * half);
    }
    GammaCoeffs {
        coeffs: g,
        symmetric: sym,
    }
}

/// Homology basis used for the α-periods. Kernels only depend on the span of
/// the chosen cycles, so [`CycleFamily::CutLoops`] and
/// [`CycleFamily::NestedCutLoops`] are interchangeable, while
/// [`CycleFamily::GapLoops`] spans the complementary classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CycleFamily {
    /// `α_k` encircles cut `k`: `∮ f ds/y = 2∫_{a_k}^{b_k} f / y(s + i0) ds`.
    CutLoops,
    /// `α_k` encircles cuts `0..=k`.
    NestedCutLoops,
    /// `α_k` passes through gap `k` on both sheets: `∮ f ds/y = 2∫_{b_k}^{a_{k+1}} f / y ds`.
    GapLoops,
}

/// Cycle family used by default for kernels and periods.
pub const DEFAULT_FAMILY: CycleFamily = CycleFamily::GapLoops;

/// `U_g(x) = (i/π)(x^g + Σ κ_j x^j)` with vanishing gap integrals of `U_g / y`.
#[derive(Debug, Clone, PartialEq)]
pub struct UgCoeffs {
    kappas: Vec<f64>,
    total: f64,
}

impl UgCoeffs {
    pub fn kappas(&self) -> &[f64] {
        &self.kappas
    }

    /// `∫_J U_g / y dx`, computed after the gap conditions were imposed.
    pub fn total(&self) -> f64 {
        self.total
    }

    /// The real monic polynomial `x^g + Σ κ_j x^j`, so that `U_g = (i/π)·poly`.
    pub fn poly(&self, x: f64) -> f64 {
        let mut acc = 1.0;
        for &k in self.kappas.iter().rev() {
            acc = acc * x + k;
        }
        acc
    }
}

/// `φ_k(x) = Σ_l γ_{kl} x^{g-l}`, normalized on the α-cycles.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiBasis {
    gammas: DMatrix<Complex64>,
}

impl PhiBasis {
    pub fn gammas(&self) -> &DMatrix<Complex64> {
        &self.gammas
    }

    pub fn eval(&self, k: usize, x: f64) -> Complex64 {
        let g = self.gammas.ncols();
        let mut acc = Complex64::new(0.0, 0.0);
        for l in 0..g {
            acc = acc * x + self.gammas[(k, l)];
        }
        acc
    }
}

/// Second-kind differential `π_j(t) dt / y(t)` with vanishing α-periods and
/// `π_j / y = t^{j-1} + O(t⁻²)` at infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct PiDiff {
    index: usize,
    /// Descending powers: `Γ_0 … Γ_j` followed by `𝖺_1 … 𝖺_g`.
    coeffs: Vec<f64>,
}

impl PiDiff {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().fold(0.0, |acc, &c| acc * t + c)
    }

    pub fn eval_deriv(&self, t: f64) -> f64 {
        let deg = self.coeffs.len() - 1;
        let mut acc = 0.0;
        for (i, &c) in self.coeffs.iter().enumerate().take(deg) {
            acc = acc * t + c * (deg - i) as f64;
        }
        acc
    }
}

/// Meshes, expansions and normalized differentials for a fixed support.
#[derive(Debug, Clone)]
pub struct SurfaceCache {
    support: Support,
    family: CycleFamily,
    cut_meshes: Vec<IntervalMesh<f64>>,
    gap_meshes: Vec<IntervalMesh<f64>>,
    cut_rho: Vec<Vec<f64>>,
    gap_rho: Vec<Vec<f64>>,
    cut_inv_rho: Vec<ChebSeries<f64>>,
    gap_inv_rho: Vec<ChebSeries<f64>>,
    gamma: GammaCoeffs<f64>,
    ug: UgCoeffs,
    period_matrix: DMatrix<Complex64>,
    phi: PhiBasis,
    pis: Vec<PiDiff>,
}

/// Tolerance on `|∫_J U_g/y - 1|`.
pub const UG_TOTAL_TOL: f64 = 1e-10;

impl SurfaceCache {
    pub fn new(support: &Support, order: usize, family: CycleFamily) -> Result<Self> {
        let g = support.genus();
        let mut cut_meshes = Vec::with_capacity(g + 1);
        let mut cut_rho = Vec::with_capacity(g + 1);
        let mut cut_inv_rho = Vec::with_capacity(g + 1);
        for k in 0..=g {
            let (a, b) = support.cut(k);
            let m = make_mesh(a, b, order)?;
            let rho: Vec<f64> = m
                .nodes()
                .iter()
                .map(|&x| support.rho(x, (2 * k, 2 * k + 1)))
                .collect();
            let inv: Vec<f64> = rho.iter().map(|r| 1.0 / r).collect();
            cut_inv_rho.push(ChebSeries::from_samples(&m, &inv));
            cut_rho.push(rho);
            cut_meshes.push(m);
        }
        let mut gap_meshes = Vec::with_capacity(g);
        let mut gap_rho = Vec::with_capacity(g);
        let mut gap_inv_rho = Vec::with_capacity(g);
        for j in 0..g {
            let (lo, hi) = support.gap(j);
            let m = make_mesh(lo, hi, order)?;
            let rho: Vec<f64> = m
                .nodes()
                .iter()
                .map(|&x| support.rho(x, (2 * j + 1, 2 * j + 2)))
                .collect();
            let inv: Vec<f64> = rho.iter().map(|r| 1.0 / r).collect();
            gap_inv_rho.push(ChebSeries::from_samples(&m, &inv));
            gap_rho.push(rho);
            gap_meshes.push(m);
        }
        let gamma = gamma_coeffs(support.endpoints(), 2 * g + 6);
        let mut cache = SurfaceCache {
            support: support.clone(),
            family,
            cut_meshes,
            gap_meshes,
            cut_rho,
            gap_rho,
            cut_inv_rho,
            gap_inv_rho,
            gamma,
            ug: UgCoeffs {
                kappas: vec![],
                total: 1.0,
            },
            period_matrix: DMatrix::zeros(g, g),
            phi: PhiBasis {
                gammas: DMatrix::zeros(g, g),
            },
            pis: vec![],
        };
        cache.ug = cache.compute_ug()?;
        if g > 0 {
            cache.period_matrix = cache.compute_period_matrix();
            cache.phi = cache.compute_phi()?;
            cache.pis = (1..=g).map(|j| cache.compute_pi(j)).collect::<Result<_>>()?;
        }
        Ok(cache)
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn genus(&self) -> usize {
        self.support.genus()
    }

    pub fn family(&self) -> CycleFamily {
        self.family
    }

    pub fn order(&self) -> usize {
        self.cut_meshes[0].order()
    }

    pub fn cut_mesh(&self, k: usize) -> &IntervalMesh<f64> {
        &self.cut_meshes[k]
    }

    pub fn gap_mesh(&self, j: usize) -> &IntervalMesh<f64> {
        &self.gap_meshes[j]
    }

    /// Smooth factor `r / sqrt((x - a_k)(b_k - x))` at the nodes of cut `k`.
    pub fn cut_rho(&self, k: usize) -> &[f64] {
        &self.cut_rho[k]
    }

    pub fn gap_rho(&self, j: usize) -> &[f64] {
        &self.gap_rho[j]
    }

    pub fn gamma(&self) -> &GammaCoeffs<f64> {
        &self.gamma
    }

    pub fn ug(&self) -> &UgCoeffs {
        &self.ug
    }

    pub fn phi(&self) -> &PhiBasis {
        &self.phi
    }

    /// `A_{jl} = ∮_{α_j} x^{g-l} / y dx`.
    pub fn period_matrix(&self) -> &DMatrix<Complex64> {
        &self.period_matrix
    }

    /// `π_1 … π_g`.
    pub fn pis(&self) -> &[PiDiff] {
        &self.pis
    }

    /// `∫_{cut k} f(x) / r(x) dx`.
    pub fn cut_integral(&self, k: usize, f: impl Fn(f64) -> f64) -> f64 {
        let m = &self.cut_meshes[k];
        m.nodes()
            .iter()
            .zip(m.weights())
            .zip(&self.cut_rho[k])
            .map(|((&x, &w), &rho)| w * f(x) / rho)
            .sum()
    }

    /// `∫_{gap j} f(x) / r(x) dx`.
    pub fn gap_integral(&self, j: usize, f: impl Fn(f64) -> f64) -> f64 {
        let m = &self.gap_meshes[j];
        m.nodes()
            .iter()
            .zip(m.weights())
            .zip(&self.gap_rho[j])
            .map(|((&x, &w), &rho)| w * f(x) / rho)
            .sum()
    }

    /// `∫_J f(x) / y(x + i0) dx`, which equals `-i Σ_k ε_k ∫_{cut k} f / r`.
    pub fn support_integral_over_y(&self, f: impl Fn(f64) -> f64) -> Complex64 {
        let s: f64 = (0..self.support.n_cuts())
            .map(|k| self.support.cut_sign(k) * self.cut_integral(k, &f))
            .sum();
        -I * s
    }

    /// `∮_{α_k} f(s) ds / y(s)` for real-valued `f`.
    pub fn alpha_period(&self, k: usize, f: impl Fn(f64) -> f64) -> Complex64 {
        match self.family {
            CycleFamily::CutLoops => self.cut_loop_period(k, &f),
            CycleFamily::NestedCutLoops => (0..=k).map(|m| self.cut_loop_period(m, &f)).sum(),
            CycleFamily::GapLoops => {
                Complex64::new(2.0 * self.gap_integral(k, &f) / self.support.gap_sign(k), 0.0)
            }
        }
    }

    fn cut_loop_period(&self, k: usize, f: &impl Fn(f64) -> f64) -> Complex64 {
        // 2 ∫ f/(i ε r) = -2 i ε ∫ f/r
        -I * (2.0 * self.support.cut_sign(k) * self.cut_integral(k, f))
    }

    /// `I_k(t) = ∮_{α_k} ds / ((s - t) y(s))` and `dI_k/dt = ∮_{α_k} ds / ((s - t)² y(s))`.
    ///
    /// For a cut loop enclosing `t` the collapsed contour is twice the principal
    /// value plus the residue circle `2πi / y(t)` (derivative `-2πi y′(t) / y(t)²`).
    /// The residue pair drops out of `y′ I_k + y I_k′`, so kernels do not see it.
    pub fn alpha_cauchy(&self, k: usize, t: f64) -> (Complex64, Complex64) {
        match self.family {
            CycleFamily::CutLoops => self.cut_loop_cauchy(k, t),
            CycleFamily::NestedCutLoops => (0..=k).fold(
                (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)),
                |(a, b), m| {
                    let (c, d) = self.cut_loop_cauchy(m, t);
                    (a + c, b + d)
                },
            ),
            CycleFamily::GapLoops => {
                let m = &self.gap_meshes[k];
                let h = m.half_width();
                let tau = m.to_local(t);
                let s = &self.gap_inv_rho[k];
                let f = 2.0 / self.support.gap_sign(k);
                (
                    Complex64::new(f * s.cauchy(tau) / h, 0.0),
                    Complex64::new(f * s.cauchy_deriv(tau) / (h * h), 0.0),
                )
            }
        }
    }

    fn cut_loop_cauchy(&self, k: usize, t: f64) -> (Complex64, Complex64) {
        let m = &self.cut_meshes[k];
        let h = m.half_width();
        let tau = m.to_local(t);
        let s = &self.cut_inv_rho[k];
        let f = -I * (2.0 * self.support.cut_sign(k));
        let mut ik = f * (s.cauchy(tau) / h);
        let mut dik = f * (s.cauchy_deriv(tau) / (h * h));
        if self.support.classify(t) == Region::Cut(k) {
            if let (Ok(y), Ok(dy)) = (self.support.eval_y(t), self.support.eval_dy(t)) {
                let res = 2.0 * std::f64::consts::PI * I;
                ik += res / y;
                dik -= res * dy / (y * y);
            }
        }
        (ik, dik)
    }

    fn compute_ug(&self) -> Result<UgCoeffs> {
        let g = self.genus();
        let mut kappas = vec![];
        if g > 0 {
            let mut a = DMatrix::<f64>::zeros(g, g);
            let mut rhs = nalgebra::DVector::<f64>::zeros(g);
            for j in 0..g {
                for l in 0..g {
                    a[(j, l)] = self.gap_integral(j, |x| x.powi(l as i32));
                }
                rhs[j] = -self.gap_integral(j, |x| x.powi(g as i32));
            }
            let sol = a
                .lu()
                .solve(&rhs)
                .ok_or(Error::SingularSystem("U_g gap conditions"))?;
            kappas = sol.iter().copied().collect();
        }
        let mut ug = UgCoeffs { kappas, total: 0.0 };
        // ∫_J (i/π) P / y = (1/π) Σ ε_k ∫_{cut k} P / r
        ug.total = (0..=g)
            .map(|k| self.support.cut_sign(k) * self.cut_integral(k, |x| ug.poly(x)))
            .sum::<f64>()
            / std::f64::consts::PI;
        if !((ug.total - 1.0).abs() < UG_TOTAL_TOL) {
            return Err(Error::Inconsistent {
                what: "∫_J U_g/y - 1",
                value: (ug.total - 1.0).abs(),
                tol: UG_TOTAL_TOL,
            });
        }
        Ok(ug)
    }

    fn compute_period_matrix(&self) -> DMatrix<Complex64> {
        let g = self.genus();
        DMatrix::from_fn(g, g, |j, l| {
            let p = (g - 1 - l) as i32;
            self.alpha_period(j, |x| x.powi(p))
        })
    }

    fn compute_phi(&self) -> Result<PhiBasis> {
        let a = &self.period_matrix;
        check_conditioning(a, "α-period matrix")?;
        let gammas = a
            .transpose()
            .try_inverse()
            .ok_or(Error::SingularSystem("α-period matrix"))?;
        Ok(PhiBasis { gammas })
    }

    fn compute_pi(&self, j: usize) -> Result<PiDiff> {
        let g = self.genus();
        let lead: Vec<f64> = self.gamma.coeffs()[..=j].to_vec();
        let lead_poly = |x: f64| -> f64 {
            let mut acc = 0.0;
            for &c in &lead {
                acc = acc * x + c;
            }
            acc * x.powi(g as i32)
        };
        let rhs = nalgebra::DVector::from_fn(g, |k, _| -self.alpha_period(k, lead_poly));
        let sol = self
            .period_matrix
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or(Error::SingularSystem("π_j α-period conditions"))?;
        let scale = sol.iter().map(|c| c.norm()).fold(1.0, f64::max);
        let worst_im = sol.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
        if worst_im > 1e-9 * scale {
            return Err(Error::Inconsistent {
                what: "imaginary part of π_j coefficients",
                value: worst_im,
                tol: 1e-9 * scale,
            });
        }
        let mut coeffs = lead;
        coeffs.extend(sol.iter().map(|c| c.re));
        Ok(PiDiff { index: j, coeffs })
    }
}

fn check_conditioning(a: &DMatrix<Complex64>, what: &'static str) -> Result<()> {
    let sv = a.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 1e-13 * max) {
        return Err(Error::SingularSystem(what));
    }
    Ok(())
}
