//! Self-verification suite. Every check builds its own cases, measures the
//! quantities it is about and compares them with a tolerance; nothing here
//! panics on a numerical failure, it is reported instead.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{solve, EquilibriumSolution, PotentialSpec, SolveOptions};
use crate::error::Result;
use crate::kernel::{
    default_exclusion, delta_a, kernel_direct, kernel_grid, respond, variance, KernelMethod,
};
use crate::oracle::{
    discrete_equilibrium, fd_response, response_values, weighted_relative_error, OracleOptions,
};
use crate::perturbation::Perturbation;
use crate::surface::{gamma_coeffs, Support, SurfaceCache, DEFAULT_FAMILY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    /// Tolerance key, overridable through [`VerifyConfig::tolerances`].
    pub key: String,
    pub label: String,
    pub value: f64,
    pub tol: f64,
    pub bound: Bound,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub id: u32,
    pub name: String,
    pub measurements: Vec<Measurement>,
    pub notes: Vec<String>,
    pub seconds: f64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        !self.measurements.is_empty() && self.measurements.iter().all(|m| m.passed)
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{status} {:>2} {} [{:.2} s]:", self.id, self.name, self.seconds)?;
        for (i, m) in self.measurements.iter().enumerate() {
            let op = match m.bound {
                Bound::AtMost => "<=",
                Bound::AtLeast => ">=",
            };
            let sep = if i == 0 { " " } else { "; " };
            write!(f, "{sep}{} = {:.3e} (need {op} {:.1e})", m.label, m.value, m.tol)?;
        }
        for n in &self.notes {
            write!(f, " | {n}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub order: usize,
    pub oracle_n: usize,
    pub seed: u64,
    /// Overrides by measurement key, e.g. `"semicircle.endpoints": 1e-9`.
    pub tolerances: BTreeMap<String, f64>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            order: 128,
            oracle_n: 4000,
            seed: 20240607,
            tolerances: BTreeMap::new(),
        }
    }
}

struct Check<'a> {
    cfg: &'a VerifyConfig,
    report: CheckReport,
}

impl<'a> Check<'a> {
    fn new(cfg: &'a VerifyConfig, id: u32, name: &str) -> Self {
        Self {
            cfg,
            report: CheckReport {
                id,
                name: name.to_string(),
                measurements: Vec::new(),
                notes: Vec::new(),
                seconds: 0.0,
            },
        }
    }

    fn measure(&mut self, key: &str, label: &str, value: f64, default_tol: f64, bound: Bound) {
        let tol = self.cfg.tolerances.get(key).copied().unwrap_or(default_tol);
        let passed = match bound {
            Bound::AtMost => value <= tol,
            Bound::AtLeast => value >= tol,
        };
        self.report.measurements.push(Measurement {
            key: key.to_string(),
            label: label.to_string(),
            value,
            tol,
            bound,
            passed,
        });
    }

    fn at_most(&mut self, key: &str, label: &str, value: f64, tol: f64) {
        self.measure(key, label, value, tol, Bound::AtMost);
    }

    fn at_least(&mut self, key: &str, label: &str, value: f64, tol: f64) {
        self.measure(key, label, value, tol, Bound::AtLeast);
    }

    fn note(&mut self, s: impl Into<String>) {
        self.report.notes.push(s.into());
    }

    /// Unwraps a result, recording the error as a note.
    fn ok<T>(&mut self, what: &str, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.note(format!("{what}: {e}"));
                None
            }
        }
    }
}

/// A named potential with an initial support of the intended genus.
#[derive(Debug, Clone)]
pub struct Case {
    pub label: &'static str,
    pub potential: PotentialSpec,
    pub init: Support,
}

fn case(label: &'static str, coeffs: &[f64], init: &[f64]) -> Case {
    Case {
        label,
        potential: PotentialSpec::polynomial(coeffs.to_vec()).expect("corpus potential"),
        init: Support::new(init.to_vec()).expect("corpus support"),
    }
}

/// Default corpus: one case per genus 0, 1, 2.
pub fn corpus() -> Vec<Case> {
    vec![
        case("g0 x²/2", &[0.0, 0.0, 0.5], &[-1.6, 2.4]),
        case(
            "g1 x⁴/4 - 1.5x² + 0.3x",
            &[0.0, 0.3, -1.5, 0.0, 0.25],
            &[-2.3, -1.1, 0.9, 2.2],
        ),
        case(
            "g2 x²(x²-4)²/4 + 0.2x",
            &[0.0, 0.2, 4.0, 0.0, -2.0, 0.0, 0.25],
            &[-2.3, -1.7, -0.5, 0.4, 1.7, 2.2],
        ),
    ]
}

fn options(cfg: &VerifyConfig) -> SolveOptions {
    SolveOptions {
        order: cfg.order,
        ..SolveOptions::default()
    }
}

fn solve_corpus(c: &mut Check, genera: &[usize]) -> Vec<(usize, EquilibriumSolution)> {
    let opts = options(c.cfg);
    let mut out = Vec::new();
    for (g, case) in corpus().into_iter().enumerate() {
        if !genera.contains(&g) {
            continue;
        }
        if let Some(sol) = c.ok(case.label, solve(&case.potential, &case.init, &opts)) {
            out.push((g, sol));
        }
    }
    if out.len() < genera.len() {
        c.at_most("corpus.solved", "unsolved corpus cases", (genera.len() - out.len()) as f64, 0.0);
    }
    out
}

fn max_abs(it: impl IntoIterator<Item = f64>) -> f64 {
    // f64::max drops NaN, which would hide a failed sample
    it.into_iter()
        .fold(0.0, |m: f64, v: f64| if m.is_nan() || v.is_nan() { f64::NAN } else { m.max(v.abs()) })
}

fn check_semicircle(cfg: &VerifyConfig) -> CheckReport {
    let mut c = Check::new(cfg, 1, "semicircle pipeline");
    let case = &corpus()[0];
    let sol = c.ok("solve", solve(&case.potential, &case.init, &options(cfg)));
    let (ends, nodes, res) = match &sol {
        Some(sol) => {
            let e = sol.support().endpoints();
            let d = sol.density();
            let node_err = max_abs(d.nodes(0).iter().zip(d.samples(0)).map(|(&x, &s)| {
                s - (4.0 - x * x).max(0.0).sqrt() / (2.0 * PI)
            }));
            (max_abs([e[0] + 2.0, e[1] - 2.0]), node_err, sol.residual_norm())
        }
        None => (f64::NAN, f64::NAN, f64::NAN),
    };
    c.at_most("semicircle.endpoints", "endpoint error", ends, 1e-8);
    c.at_most("semicircle.density", "node error", nodes, 1e-8);
    c.at_most("semicircle.residual", "residual norm", res, 1e-10);
    c.report
}

fn check_two_cut(cfg: &VerifyConfig) -> CheckReport {
    let mut c = Check::new(cfg, 2, "two-cut pipeline vs discrete oracle");
    let p = PotentialSpec::polynomial(vec![0.0, 0.0, -1.0, 0.0, 0.25]).unwrap();
    let init = Support::new(vec![-2.1, -0.6, 0.6, 2.1]).unwrap();
    let sol = c.ok("genus-1 solve of x⁴/4 - x²", solve(&p, &init, &options(cfg)));
    c.at_most(
        "two_cut.residual",
        "residual norm",
        sol.as_ref().map_or(f64::NAN, |s| s.residual_norm()),
        1e-10,
    );
    let oracle = c.ok(
        "oracle",
        discrete_equilibrium(&p, -3.0, 3.0, cfg.oracle_n, &OracleOptions::default()),
    );
    let mut agree = f64::NAN;
    if let Some(m) = &oracle {
        let runs = m.support_estimate(1e-8);
        let shown: Vec<String> = runs.iter().map(|(a, b)| format!("[{a:.4}, {b:.4}]")).collect();
        c.note(format!("oracle support {}", shown.join(" ")));
        if let Some(sol) = &sol {
            let e = sol.support().endpoints();
            if runs.len() == sol.support().n_cuts() {
                agree = max_abs(
                    runs.iter()
                        .flat_map(|(a, b)| [*a, *b])
                        .zip(e)
                        .map(|(o, s)| o - s),
                );
            } else {
                c.note(format!("oracle has {} runs, solution {} cuts", runs.len(), e.len() / 2));
            }
        }
    }
    c.at_most("two_cut.oracle", "endpoint disagreement", agree, 2e-3);
    c.report
}

fn check_ug(cfg: &VerifyConfig) -> CheckReport {
    let mut c = Check::new(cfg, 3, "U_g normalization from gap conditions");
    let supports: [&[f64]; 3] = [
        &[-1.0, 2.0],
        &[-2.0, -0.5, 0.3, 1.8],
        &[-2.0, -1.2, -0.3, 0.4, 1.1, 2.5],
    ];
    for (g, e) in supports.iter().enumerate() {
        let s = Support::new(e.to_vec()).unwrap();
        let dev = c
            .ok("cache", SurfaceCache::new(&s, cfg.order, DEFAULT_FAMILY))
            .map_or(f64::NAN, |cache| (cache.ug().total() - 1.0).abs());
        c.at_most("ug.total", &format!("g{g} |∫U_g/y - 1|"), dev, 1e-10);
    }
    c.report
}

fn random_support(rng: &mut ChaCha8Rng, g: usize) -> Vec<f64> {
    loop {
        let mut e: Vec<f64> = (0..2 * g + 2).map(|_| rng.gen_range(-2.0..2.0)).collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if e.windows(2).all(|w| w[1] - w[0] > 1e-3) {
            return e;
        }
    }
}

fn check_gamma(cfg: &VerifyConfig) -> CheckReport {
    let mut c = Check::new(cfg, 4, "Γ squaring identity");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for g in 0..=2 {
        let worst = max_abs((0..10).map(|_| {
            let e = random_support(&mut rng, g);
            gamma_coeffs(&e, 2 * g + 6).squaring_residual()
        }));
        c.at_most("gamma.squaring", &format!("g{g} residual"), worst, 1e-13);
    }
    c.report
}

fn check_sum_rule(cfg: &VerifyConfig) -> CheckReport {
    let mut c = Check::new(cfg, 5, "sum rule");
    let sols = solve_corpus(&mut c, &[0, 1, 2]);
    let shift = 0.7;
    for (g, sol) in &sols {
        let resp = c.ok("respond", respond(sol, &Perturbation::Constant { value: 1.0 }));
        let worst = resp.map_or(f64::NAN, |r| {
            max_abs(response_values(&r).into_iter().flatten())
        });
        c.at_most("sum_rule.response", &format!("g{g} max|δσ|"), worst, 1e-10);
        let da = delta_a(sol, &Perturbation::Constant { value: shift });
        c.at_most("sum_rule.delta_a", &format!("g{g} |δA(c) - c|"), (da - shift).abs(), 1e-12);
    }
    c.report
}

/// Ten smooth test functions spread over the corpus supports.
pub fn function_corpus() -> Vec<Perturbation> {
    let poly = |c: &[f64]| Perturbation::Polynomial { coeffs: c.to_vec() };
    let bump = |center, width| Perturbation::Bump {
        center,
        width,
        amplitude: 1.0,
    };
    let cheb = |degree| Perturbation::Chebyshev {
        lo: -2.5,
        hi: 2.5,
        degree,
        amplitude: 1.0,
    };
    vec![
        poly(&[0.0, 1.0]),
        poly(&[0.0, 0.0, 1.0]),
        poly(&[0.0, 0.0, 0.0, 1.0]),
        poly(&[0.0, 0.0, 0.0, 0.0, 1.0]),
        poly(&[0.0, -1.0, 0.0, 0.0, 0.0, 1.0]),
        cheb(4),
        cheb(6),
        bump(-1.5, 0.4),
        bump(0.3, 0.5),
        bump(1.8, 0.3),
    ]
}

fn check_symmetry(cfg: &VerifyConfig) -> CheckReport {
    let mut c = Check::new(cfg, 6, "symmetry");
    let sols = solve_corpus(&mut c, &[0, 1, 2]);
    let funcs = function_corpus();
    for (g, sol) in &sols {
        let resp: Option<Vec<_>> = c.ok(
            "respond",
            funcs.iter().map(|f| respond(sol, f)).collect::<Result<Vec<_>>>(),
        );
        let rel = resp.map_or(f64::NAN, |resp| {
            let form = |i: usize, j: usize| resp[j].integrate(|x| funcs[i].value(x));
            let mut worst = 0.0f64;
            for i in 0..funcs.len() {
                for j in i + 1..funcs.len() {
                    let scale = (form(i, i) * form(j, j)).abs().sqrt();
                    worst = worst.max((form(i, j) - form(j, i)).abs() / scale);
                }
            }
            worst
        });
        c.at_most("symmetry.bilinear", &format!("g{g} bilinear asymmetry"), rel, 1e-6);
        let grid = c.ok(
            "kernel grid",
            kernel_grid(sol, 20, 20, default_exclusion(sol.support()), KernelMethod::Direct),
        );
        let pointwise = grid.map_or(f64::NAN, |k| {
            let mut worst = 0.0f64;
            for i in 0..20 {
                for j in 0..20 {
                    if let (Some(a), Some(b)) = (k.values[i][j], k.values[j][i]) {
                        worst = worst.max((a - b).abs());
                    }
                }
            }
            worst
        });
        c.at_most("symmetry.pointwise", &format!("g{g} max|C(x,t) - C(t,x)|"), pointwise, 1e-8);
    }
    c.report
}

fn check_formulas(cfg: &VerifyConfig) -> CheckReport {
    let mut c = Check::new(cfg, 7, "closed-form kernel equivalence");
    let sols = solve_corpus(&mut c, &[0, 1, 2]);
    for (g, sol) in &sols {
        let ex = default_exclusion(sol.support());
        let d = c.ok("direct grid", kernel_grid(sol, 20, 20, ex, KernelMethod::Direct));
        let p = c.ok("pi grid", kernel_grid(sol, 20, 20, ex, KernelMethod::Pi));
        let diff = match (d, p) {
            (Some(d), Some(p)) => max_abs(
                d.values
                    .iter()
                    .flatten()
                    .zip(p.values.iter().flatten())
                    .filter_map(|(a, b)| Some(a.as_ref()? - b.as_ref()?)),
            ),
            _ => f64::NAN,
        };
        if *g == 0 {
            c.at_most("formulas.g0", "g0 max|pi - direct|", diff, 1e-12);
        } else {
            c.at_most("formulas.higher", &format!("g{g} max|pi - direct|"), diff, 1e-8);
        }
    }
    c.report
}

fn check_fd(cfg: &VerifyConfig) -> CheckReport {
    let mut c = Check::new(cfg, 8, "finite-difference response oracle");
    let sols = solve_corpus(&mut c, &[0, 1, 2]);
    let opts = options(cfg);
    for (g, sol) in &sols {
        // bump centered in the widest cut
        let s = sol.support();
        let k = (0..s.n_cuts())
            .max_by(|&a, &b| {
                let w = |k| s.cut(k).1 - s.cut(k).0;
                w(a).partial_cmp(&w(b)).unwrap()
            })
            .unwrap();
        let (lo, hi) = s.cut(k);
        let width = 0.15 * (hi - lo);
        let dv = Perturbation::Bump {
            center: 0.5 * (lo + hi) + 0.1 * (hi - lo),
            width,
            amplitude: 1.0,
        };
        let spacing = sol
            .density()
            .nodes(k)
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max);
        c.at_least("fd.width", &format!("g{g} bump width / spacing"), width / spacing, 5.0);
        let Some(resp) = c.ok("respond", respond(sol, &dv)) else {
            c.at_most("fd.error", &format!("g{g} error"), f64::NAN, 1e-3);
            continue;
        };
        let exact = response_values(&resp);
        let err = |c: &mut Check, eps: f64| {
            c.ok("fd_response", fd_response(sol.potential(), sol, &dv, eps, &opts))
                .map_or(f64::NAN, |fd| weighted_relative_error(sol.cache(), &fd, &exact))
        };
        let e5 = err(&mut c, 1e-5);
        let e4 = err(&mut c, 1e-4);
        c.at_most("fd.error", &format!("g{g} error at ε=1e-5"), e5, 1e-3);
        c.at_least("fd.reduction", &format!("g{g} error ratio 1e-4/1e-5"), e4 / e5, 10.0);
    }
    c.report
}

fn check_delta_a(cfg: &VerifyConfig) -> CheckReport {
    let mut c = Check::new(cfg, 9, "δA first-order check");
    let sols = solve_corpus(&mut c, &[0, 1]);
    let opts = options(cfg);
    let f = Perturbation::Bump {
        center: 0.4,
        width: 0.7,
        amplitude: 1.0,
    };
    for (g, sol) in &sols {
        let da = delta_a(sol, &f);
        let defect = |c: &mut Check, eps: f64| {
            let p = sol.potential().perturbed(&f, eps);
            c.ok("perturbed solve", solve(&p, sol.support(), &opts))
                .map_or(f64::NAN, |s| ((s.a() - sol.a()) / eps - da).abs())
        };
        let d3 = defect(&mut c, 1e-3);
        let d4 = defect(&mut c, 1e-4);
        c.note(format!("g{g} defects {d3:.3e}, {d4:.3e}"));
        // linear decay means a tenfold drop per decade
        c.at_most(
            "delta_a.slope",
            &format!("g{g} |log10(d(1e-3)/d(1e-4)) - 1|"),
            ((d3 / d4).log10() - 1.0).abs(),
            0.15,
        );
    }
    c.report
}

fn check_lagrange(cfg: &VerifyConfig) -> CheckReport {
    let mut c = Check::new(cfg, 10, "Lagrange multiplier consistency");
    for (g, sol) in solve_corpus(&mut c, &[0, 1]) {
        let r = sol.lagrange();
        c.at_most("lagrange.spread", &format!("g{g} probe spread"), r.spread, 1e-8);
        c.at_most("lagrange.agreement", &format!("g{g} |A - direct A|"), r.deviation, 1e-7);
    }
    c.report
}

/// Least-squares `a` in `C(x, x + δ) ≈ a/δ² + b/δ + c`.
pub fn short_distance_coefficient(cache: &SurfaceCache, x: f64) -> Result<f64> {
    let ds: Vec<f64> = [1e-3, 2e-3, 5e-3, 1e-2]
        .iter()
        .flat_map(|&d| [d, -d])
        .collect();
    let a = DMatrix::from_fn(ds.len(), 3, |i, j| ds[i].powi(j as i32 - 2));
    let b = DVector::from_iterator(
        ds.len(),
        ds.iter()
            .map(|d| kernel_direct(cache, x, x + d, 0.0))
            .collect::<Result<Vec<_>>>()?,
    );
    let fit = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|_| crate::error::Error::SingularSystem("short-distance fit"))?;
    Ok(fit[0])
}

fn check_short_distance(cfg: &VerifyConfig) -> CheckReport {
    let mut c = Check::new(cfg, 11, "short-distance law");
    let target = -1.0 / (2.0 * PI * PI);
    for (g, sol) in solve_corpus(&mut c, &[0, 1]) {
        let s = sol.support();
        let mut worst = 0.0f64;
        let mut fitted = Vec::new();
        for k in 0..s.n_cuts() {
            let (lo, hi) = s.cut(k);
            for f in [0.3, 0.5, 0.7] {
                let a = c
                    .ok("fit", short_distance_coefficient(sol.cache(), lo + f * (hi - lo)))
                    .unwrap_or(f64::NAN);
                fitted.push(a);
                worst = if a.is_nan() { f64::NAN } else { worst.max((a - target).abs() / target.abs()) };
            }
        }
        c.note(format!(
            "g{g} fitted {:.8} vs target {target:.8}",
            fitted.iter().sum::<f64>() / fitted.len() as f64
        ));
        c.at_most("short_distance", &format!("g{g} relative deviation"), worst, 0.01);
    }
    c.report
}

fn check_variance(cfg: &VerifyConfig) -> CheckReport {
    let mut c = Check::new(cfg, 12, "variance properties");
    let sols = solve_corpus(&mut c, &[0, 1, 2]);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let mut lowest = f64::INFINITY;
    let mut constant = 0.0f64;
    for (_, sol) in &sols {
        let v = c
            .ok("variance", variance(sol, &Perturbation::Constant { value: 1.0 }))
            .unwrap_or(f64::NAN);
        constant = if v.is_nan() { f64::NAN } else { constant.max(v.abs()) };
    }
    if !sols.is_empty() {
        for i in 0..20 {
            let degree = rng.gen_range(1..=6);
            let coeffs: Vec<f64> = (0..=degree).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let sol = &sols[i % sols.len()].1;
            let v = c
                .ok("variance", variance(sol, &Perturbation::Polynomial { coeffs }))
                .unwrap_or(f64::NAN);
            lowest = if v.is_nan() { f64::NAN } else { lowest.min(v) };
        }
    }
    c.at_most("variance.constant", "max|variance(const)|", constant, 1e-10);
    c.at_least("variance.nonnegative", "min variance over 20 polynomials", lowest, -1e-10);
    let spread = sols
        .iter()
        .find(|(g, _)| *g == 0)
        .and_then(|(_, sol)| {
            let (lo, hi) = sol.support().cut(0);
            let ratios: Option<Vec<f64>> = (1..=5)
                .map(|k| {
                    let t = Perturbation::Chebyshev {
                        lo,
                        hi,
                        degree: k,
                        amplitude: 1.0,
                    };
                    c.ok("variance", variance(sol, &t)).map(|v| v / k as f64)
                })
                .collect();
            let r = ratios?;
            Some(max_abs(r.iter().map(|v| (v - r[0]) / r[0])))
        })
        .unwrap_or(f64::NAN);
    c.at_most("variance.chebyshev", "one-cut spread of variance(T_k)/k", spread, 1e-6);
    c.report
}

pub const CHECK_COUNT: u32 = 12;

/// Runs check `id` (1-based).
pub fn run_check(id: u32, cfg: &VerifyConfig) -> Option<CheckReport> {
    let start = Instant::now();
    let mut r = match id {
        1 => check_semicircle(cfg),
        2 => check_two_cut(cfg),
        3 => check_ug(cfg),
        4 => check_gamma(cfg),
        5 => check_sum_rule(cfg),
        6 => check_symmetry(cfg),
        7 => check_formulas(cfg),
        8 => check_fd(cfg),
        9 => check_delta_a(cfg),
        10 => check_lagrange(cfg),
        11 => check_short_distance(cfg),
        12 => check_variance(cfg),
        _ => return None,
    };
    r.seconds = start.elapsed().as_secs_f64();
    Some(r)
}

pub fn run_suite(cfg: &VerifyConfig) -> Vec<CheckReport> {
    (1..=CHECK_COUNT).filter_map(|id| run_check(id, cfg)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_tolerance_forces_failure() {
        let mut cfg = VerifyConfig::default();
        cfg.tolerances.insert("gamma.squaring".into(), 0.0);
        let r = run_check(4, &cfg).unwrap();
        assert!(!r.passed());
        assert!(run_check(4, &VerifyConfig::default()).unwrap().passed());
    }

    #[test]
    fn report_line_format() {
        let r = run_check(3, &VerifyConfig::default()).unwrap();
        let line = r.to_string();
        assert!(line.starts_with("PASS  3 U_g normalization"), "{line}");
        assert!(line.contains("need <= 1.0e-10"));
    }

    #[test]
    fn nan_is_sticky() {
        assert!(max_abs([1.0, f64::NAN, 2.0]).is_nan());
        assert_eq!(max_abs([1.0, -3.0]), 3.0);
    }

    #[test]
    fn unknown_check_is_none() {
        assert!(run_check(13, &VerifyConfig::default()).is_none());
    }
}
