//! Brute-force ground truth: direct minimization of the discretized energy
//! `-∬ ln|x - t| dμ dμ + ∫ v dμ` over probability vectors on a uniform grid,
//! and finite-difference functional derivatives through full re-solves.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::equilibrium::{solve, EquilibriumSolution, PotentialSpec, SolveOptions};
use crate::error::{Error, Result};
use crate::kernel::ResponseSample;
use crate::perturbation::Perturbation;
use crate::quadrature::gauss_legendre;
use crate::surface::{Region, SurfaceCache};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleStatus {
    Converged,
    /// Iteration budget exhausted before the gradient-mapping tolerance was met.
    BudgetExhausted,
}

/// Probability weights on the cell centers of a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub lo: f64,
    pub hi: f64,
    pub grid: Vec<f64>,
    pub weights: Vec<f64>,
    pub energy: f64,
    pub iterations: usize,
    pub gradient_mapping_norm: f64,
    pub status: OracleStatus,
    /// Energy after every accepted step.
    #[serde(skip)]
    pub energy_trace: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / self.grid.len() as f64
    }

    /// `w_i / h`.
    pub fn density(&self) -> Vec<f64> {
        let h = self.spacing();
        self.weights.iter().map(|w| w / h).collect()
    }

    /// Maximal runs of cells with weight above `threshold`, as `(first, last)` cell centers.
    pub fn support_estimate(&self, threshold: f64) -> Vec<(f64, f64)> {
        let mut runs = Vec::new();
        let mut start = None;
        for (i, &w) in self.weights.iter().enumerate() {
            match (w > threshold, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    runs.push((self.grid[s], self.grid[i - 1]));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            runs.push((self.grid[s], self.grid[self.grid.len() - 1]));
        }
        runs
    }

    /// Largest `|w_i - w_{n-1-i}|`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.weights.len();
        (0..n)
            .map(|i| (self.weights[i] - self.weights[n - 1 - i]).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleOptions {
    pub iters: usize,
    /// Stop when `L · ‖w - P(w - ∇E/L)‖_∞` falls below this.
    pub tol: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            iters: 20_000,
            tol: 1e-6,
        }
    }
}

/// Second antiderivative of `ln|u|`.
fn phi2(u: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        0.5 * u * u * u.abs().ln() - 0.75 * u * u
    }
}

/// `-(1/h²) ∫_cell_i ∫_cell_j ln|x - t|` for cells `m` apart.
fn cell_kernel(m: usize, h: f64) -> f64 {
    let d = m as f64 * h;
    if m < 50 {
        -(phi2(d + h) - 2.0 * phi2(d) + phi2(d - h)) / (h * h)
    } else {
        // average of ln(d + u) under the triangle law of u on (-h, h)
        let r = (h / d) * (h / d);
        -(d.ln() - r / 12.0 - r * r / 60.0 - r * r * r / 168.0)
    }
}

/// Symmetric Toeplitz matrix-vector product through circulant embedding.
struct Toeplitz {
    n: usize,
    spectrum: Vec<Complex<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Toeplitz {
    fn new(col: &[f64]) -> Self {
        let n = col.len();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(2 * n);
        let inv = planner.plan_fft_inverse(2 * n);
        let mut spectrum = vec![Complex::new(0.0, 0.0); 2 * n];
        for (i, &c) in col.iter().enumerate() {
            spectrum[i].re = c;
            if i > 0 {
                spectrum[2 * n - i].re = c;
            }
        }
        fwd.process(&mut spectrum);
        Self {
            n,
            spectrum,
            fwd,
            inv,
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut buf = vec![Complex::new(0.0, 0.0); 2 * n];
        for (b, &v) in buf.iter_mut().zip(x) {
            b.re = v;
        }
        self.fwd.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b *= s;
        }
        self.inv.process(&mut buf);
        let scale = 1.0 / (2 * n) as f64;
        buf[..n].iter().map(|c| c.re * scale).collect()
    }
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_simplex(u: &[f64]) -> Vec<f64> {
    let mut s = u.to_vec();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &v) in s.iter().enumerate() {
        cum += v;
        let t = (cum - 1.0) / (j + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    u.iter().map(|&v| (v - theta).max(0.0)).collect()
}

struct Problem {
    k: Toeplitz,
    pot: Vec<f64>,
}

impl Problem {
    fn energy_and_kw(&self, w: &[f64]) -> (f64, Vec<f64>) {
        let kw = self.k.apply(w);
        let e = w
            .iter()
            .zip(&kw)
            .zip(&self.pot)
            .map(|((w, k), p)| w * (k + p))
            .sum();
        (e, kw)
    }

    fn gradient(&self, kw: &[f64]) -> Vec<f64> {
        kw.iter().zip(&self.pot).map(|(k, p)| 2.0 * k + p).collect()
    }
}

fn lipschitz(k: &Toeplitz, n: usize) -> f64 {
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i * 7919) % 13) as f64 / 13.0).collect();
    let mut lambda = 0.0;
    for _ in 0..60 {
        let y = k.apply(&x);
        let nrm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        lambda = nrm / x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x = y.iter().map(|v| v / nrm).collect();
    }
    // 2K is the Hessian; pad the power-iteration estimate
    2.0 * lambda * 1.01
}

/// Minimize the discrete energy on `n` cells of `[lo, hi]`. The log kernel is
/// integrated exactly over pairs of cells (piecewise-constant Galerkin), which
/// keeps the self-interaction finite; the optimizer is accelerated projected
/// gradient with a restart whenever the energy would increase.
pub fn discrete_equilibrium(
    p: &PotentialSpec,
    lo: f64,
    hi: f64,
    n: usize,
    opts: &OracleOptions,
) -> Result<DiscreteMeasure> {
    if !(hi > lo) || n < 2 {
        return Err(Error::InvalidSupport(format!("bad oracle box [{lo}, {hi}] with n = {n}")));
    }
    let h = (hi - lo) / n as f64;
    let grid: Vec<f64> = (0..n).map(|i| lo + (i as f64 + 0.5) * h).collect();
    let col: Vec<f64> = (0..n).map(|m| cell_kernel(m, h)).collect();
    let (gx, gw) = gauss_legendre::<f64>(3);
    let pot: Vec<f64> = grid
        .par_iter()
        .map(|&c| {
            gx.iter()
                .zip(&gw)
                .map(|(u, w)| 0.5 * w * p.v(c + 0.5 * h * u))
                .sum()
        })
        .collect();
    let prob = Problem {
        k: Toeplitz::new(&col),
        pot,
    };
    let l = lipschitz(&prob.k, n);
    let mut w = vec![1.0 / n as f64; n];
    let (mut e, mut kw) = prob.energy_and_kw(&w);
    let mut z = w.clone();
    let mut tk: f64 = 1.0;
    let mut gm = f64::INFINITY;
    let mut iterations = 0;
    let mut status = OracleStatus::BudgetExhausted;
    let mut trace = vec![e];
    while iterations < opts.iters {
        iterations += 1;
        let (_, kz) = prob.energy_and_kw(&z);
        let gz = prob.gradient(&kz);
        let step: Vec<f64> = z.iter().zip(&gz).map(|(z, g)| z - g / l).collect();
        let cand = project_simplex(&step);
        let (ec, kc) = prob.energy_and_kw(&cand);
        if ec > e {
            // restart from the last accepted point with a plain projected step
            tk = 1.0;
            z = w.clone();
            continue;
        }
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * tk * tk).sqrt());
        let beta = (tk - 1.0) / tn;
        z = cand
            .iter()
            .zip(&w)
            .map(|(c, o)| c + beta * (c - o))
            .collect();
        tk = tn;
        w = cand;
        e = ec;
        kw = kc;
        trace.push(e);
        if iterations % 25 == 0 || iterations == opts.iters {
            gm = gradient_mapping(&prob, &w, &kw, l);
            if gm < opts.tol {
                status = OracleStatus::Converged;
                break;
            }
        }
    }
    if status != OracleStatus::Converged {
        gm = gradient_mapping(&prob, &w, &kw, l);
    }
    Ok(DiscreteMeasure {
        lo,
        hi,
        grid,
        weights: w,
        energy: e,
        iterations,
        gradient_mapping_norm: gm,
        status,
        energy_trace: trace,
    })
}

fn gradient_mapping(prob: &Problem, w: &[f64], kw: &[f64], l: f64) -> f64 {
    let g = prob.gradient(kw);
    let step: Vec<f64> = w.iter().zip(&g).map(|(w, g)| w - g / l).collect();
    let pw = project_simplex(&step);
    l * w
        .iter()
        .zip(&pw)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// `(σ[v + ε δv] - σ[v - ε δv]) / (2ε)` at the base solution's cut nodes, each
/// side re-solved from the base support.
pub fn fd_response(
    p: &PotentialSpec,
    base: &EquilibriumSolution,
    dv: &Perturbation,
    eps: f64,
    opts: &SolveOptions,
) -> Result<Vec<Vec<f64>>> {
    let side = |sgn: f64| -> Result<EquilibriumSolution> {
        let q = p.perturbed(dv, sgn * eps);
        let sol = solve(&q, base.support(), opts).map_err(|e| {
            Error::GenusChange(format!("re-solve at {sgn:+}ε failed: {e}"))
        })?;
        if sol.support().genus() != base.support().genus() {
            return Err(Error::GenusChange(format!(
                "genus {} became {}",
                base.support().genus(),
                sol.support().genus()
            )));
        }
        Ok(sol)
    };
    let plus = side(1.0)?;
    let minus = side(-1.0)?;
    let s = base.support();
    Ok((0..s.n_cuts())
        .map(|k| {
            base.density()
                .nodes(k)
                .iter()
                .map(|&x| (plus.density().sigma(x) - minus.density().sigma(x)) / (2.0 * eps))
                .collect()
        })
        .collect())
}

/// `‖a - b‖ / ‖b‖` in the norm `Σ_i (π/n) sin²θ_i g(x_i)²` per cut, which keeps the
/// inverse-square-root edges of a response bounded.
pub fn weighted_relative_error(cache: &SurfaceCache, a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..cache.support().n_cuts() {
        let m = cache.cut_mesh(k);
        for ((th, w), (x, y)) in m.angles().iter().zip(m.weights()).zip(a[k].iter().zip(&b[k])) {
            let wt = w * th.sin() * th.sin();
            num += wt * (x - y) * (x - y);
            den += wt * y * y;
        }
    }
    (num / den).sqrt()
}

/// Response node values as nested vectors.
pub fn response_values(r: &ResponseSample) -> Vec<Vec<f64>> {
    (0..r.support().n_cuts()).map(|k| r.values(k).to_vec()).collect()
}

/// Oracle density at `x` by linear interpolation between cell centers.
pub fn interpolate_density(m: &DiscreteMeasure, x: f64) -> f64 {
    let h = m.spacing();
    let d = m.density();
    let u = (x - m.lo) / h - 0.5;
    if u <= 0.0 {
        return d[0];
    }
    let i = u.floor() as usize;
    if i + 1 >= d.len() {
        return d[d.len() - 1];
    }
    let f = u - i as f64;
    d[i] * (1.0 - f) + d[i + 1] * f
}

/// Whether `x` lies strictly inside a cut of the cache's support.
pub fn inside_cut(cache: &SurfaceCache, x: f64) -> bool {
    matches!(cache.support().classify(x), Region::Cut(_))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn simplex_projection() {
        let p = project_simplex(&[0.5, 0.5, 0.5]);
        for v in &p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let p = project_simplex(&[2.0, 0.0, -1.0]);
        assert_eq!(p, vec![1.0, 0.0, 0.0]);
        let p = project_simplex(&[0.3, 0.2, 0.1]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(p.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn cell_kernel_matches_direct_quadrature() {
        let h = 0.01;
        let (gx, gw) = gauss_legendre::<f64>(20);
        for m in [3usize, 49, 50, 51, 400] {
            let d = m as f64 * h;
            let mut acc = 0.0;
            for (u, wu) in gx.iter().zip(&gw) {
                for (v, wv) in gx.iter().zip(&gw) {
                    let x = d + 0.5 * h * u;
                    let t = 0.5 * h * v;
                    acc += 0.25 * wu * wv * (x - t).abs().ln();
                }
            }
            assert!((cell_kernel(m, h) + acc).abs() < 1e-9 * acc.abs().max(1.0), "m={m}");
        }
        assert!((cell_kernel(0, h) - (1.5 - h.ln())).abs() < 1e-13);
        // touching cells
        let want = -(h.ln() + 2.0 * 2f64.ln() - 1.5);
        assert!((cell_kernel(1, h) - want).abs() < 1e-12);
    }

    #[test]
    fn toeplitz_product_matches_dense() {
        let col: Vec<f64> = (0..7).map(|m| cell_kernel(m, 0.1)).collect();
        let t = Toeplitz::new(&col);
        let x: Vec<f64> = (0..7).map(|i| (i as f64).sin()).collect();
        let y = t.apply(&x);
        for i in 0..7usize {
            let want: f64 = (0..7).map(|j| col[i.abs_diff(j)] * x[j]).sum();
            assert!((y[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn semicircle_oracle() {
        let p = PotentialSpec::polynomial(vec![0.0, 0.0, 0.5]).unwrap();
        let m = discrete_equilibrium(&p, -3.0, 3.0, 1000, &OracleOptions::default()).unwrap();
        assert!((m.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let sup = m.support_estimate(1e-8);
        assert_eq!(sup.len(), 1);
        assert!(sup[0].0 > -2.03 && sup[0].1 < 2.03, "{sup:?}");
        assert!(m.asymmetry() < 1e-6);
        let mid = interpolate_density(&m, 0.0);
        assert!((mid - 1.0 / PI).abs() < 5e-3, "{mid}");
        assert_eq!(m.status, OracleStatus::Converged);
        assert!(m.energy_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn energy_gap_shrinks_under_refinement() {
        let p = PotentialSpec::polynomial(vec![0.0, 0.0, -1.5, 0.0, 0.25]).unwrap();
        let exact = -1.875;
        let mut last = f64::INFINITY;
        for n in [500, 1000, 2000] {
            let m = discrete_equilibrium(&p, -3.0, 3.0, n, &OracleOptions::default()).unwrap();
            let gap = m.energy - exact;
            assert!(gap > 0.0 && gap < last, "n={n} gap={gap}");
            last = gap;
            assert!(m.asymmetry() < 1e-6);
            assert_eq!(m.support_estimate(1e-8).len(), 2);
        }
    }
}
