use std::fs;
use std::path::{Path, PathBuf};

use eqkernel::equilibrium::solve;
use eqkernel::kernel::{default_exclusion, delta_a, kernel_grid, respond, variance};
use eqkernel::oracle::{discrete_equilibrium, OracleOptions, OracleStatus};
use eqkernel::verify::{run_suite, CheckReport};
use eqkernel::{EquilibriumSolution, SolutionRecord};
use serde::{Deserialize, Serialize};

use crate::config::Loaded;
use crate::output::{csv, emit, float, json, pick};
use crate::CliError;

/// Command-line overrides shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub grid: Option<usize>,
    pub exclusion: Option<f64>,
}

/// On-disk solution: a readable summary plus the record needed to rebuild it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub genus: usize,
    pub endpoints: Vec<f64>,
    pub a: f64,
    pub v_j: f64,
    pub energy: f64,
    pub residual_norm: f64,
    pub lagrange_spread: f64,
    pub density_table: Option<PathBuf>,
    pub record: SolutionRecord,
}

fn compute(e: impl std::fmt::Display) -> CliError {
    CliError::Compute(e.to_string())
}

fn solve_from_config(cfg: &Loaded) -> Result<EquilibriumSolution, CliError> {
    let init = cfg.init.as_ref().ok_or_else(|| {
        CliError::Config("initial_support is required unless a solution file is given".into())
    })?;
    solve(&cfg.potential, init, &cfg.raw.solver).map_err(compute)
}

pub fn read_solution(path: &Path) -> Result<EquilibriumSolution, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let file: SolutionFile = serde_json::from_str(&text).map_err(|e| {
        CliError::Config(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))
    })?;
    EquilibriumSolution::from_record(&file.record).map_err(compute)
}

/// The configured solution file if any, otherwise a fresh solve.
fn solution(cfg: &Loaded) -> Result<EquilibriumSolution, CliError> {
    match &cfg.raw.solution {
        Some(p) => read_solution(p),
        None => solve_from_config(cfg),
    }
}

fn density_csv(sol: &EquilibriumSolution) -> Result<Vec<u8>, CliError> {
    let d = sol.density();
    let rows = (0..sol.support().n_cuts()).flat_map(|k| {
        d.nodes(k)
            .iter()
            .zip(d.samples(k))
            .map(move |(&x, &s)| vec![k.to_string(), float(x), float(s)])
    });
    csv(&["cut", "x", "sigma"], rows)
}

pub fn solve_cmd(cfg: &Loaded, o: &Overrides) -> Result<(), CliError> {
    let sol = solve_from_config(cfg)?;
    let table = cfg.raw.outputs.density.clone();
    if let Some(p) = &table {
        emit(Some(p), &density_csv(&sol)?)?;
    }
    let s = sol.support();
    let file = SolutionFile {
        genus: s.genus(),
        endpoints: s.endpoints().to_vec(),
        a: sol.a(),
        v_j: sol.v_j(),
        energy: sol.energy(),
        residual_norm: sol.residual_norm(),
        lagrange_spread: sol.lagrange().spread,
        density_table: table,
        record: sol.record(),
    };
    emit(pick(&o.out, &cfg.raw.outputs.solution), &json(&file)?)
}

pub fn density_cmd(cfg: &Loaded, o: &Overrides) -> Result<(), CliError> {
    let sol = solution(cfg)?;
    emit(pick(&o.out, &cfg.raw.outputs.density), &density_csv(&sol)?)
}

pub fn kernel_cmd(cfg: &Loaded, o: &Overrides) -> Result<(), CliError> {
    let sol = solution(cfg)?;
    let n = o.grid.unwrap_or(cfg.raw.kernel.grid);
    let ex = o
        .exclusion
        .or(cfg.raw.kernel.exclusion)
        .unwrap_or_else(|| default_exclusion(sol.support()));
    if n == 0 || !(ex > 0.0) {
        return Err(CliError::Config(format!("bad kernel grid {n} or exclusion {ex}")));
    }
    let k = kernel_grid(&sol, n, n, ex, cfg.raw.kernel.method()).map_err(compute)?;
    let mut rows = Vec::new();
    for (i, x) in k.x.iter().enumerate() {
        for (j, t) in k.t.iter().enumerate() {
            if let Some(c) = k.values[i][j] {
                rows.push(vec![float(*x), float(*t), float(c)]);
            }
        }
    }
    emit(pick(&o.out, &cfg.raw.outputs.kernel), &csv(&["x", "t", "C"], rows)?)
}

fn perturbation(cfg: &Loaded) -> Result<&eqkernel::Perturbation, CliError> {
    cfg.raw
        .perturbation
        .as_ref()
        .ok_or_else(|| CliError::Config("this command needs a perturbation".into()))
}

pub fn respond_cmd(cfg: &Loaded, o: &Overrides) -> Result<(), CliError> {
    let sol = solution(cfg)?;
    let dv = perturbation(cfg)?;
    let r = respond(&sol, dv).map_err(compute)?;
    let rows = (0..sol.support().n_cuts()).flat_map(|k| {
        r.nodes(k)
            .iter()
            .zip(r.values(k))
            .map(move |(&x, &v)| vec![k.to_string(), float(x), float(v)])
            .collect::<Vec<_>>()
    });
    let dest = pick(&o.out, &cfg.raw.outputs.response);
    emit(dest, &csv(&["cut", "x", "delta_sigma"], rows)?)?;
    let da = delta_a(&sol, dv);
    if dest.is_some() {
        println!("{{\"delta_a\": {}}}", float(da));
    } else {
        eprintln!("delta_a = {}", float(da));
    }
    Ok(())
}

#[derive(Serialize)]
struct VarianceOut {
    variance: f64,
}

pub fn variance_cmd(cfg: &Loaded, o: &Overrides) -> Result<(), CliError> {
    let sol = solution(cfg)?;
    let v = variance(&sol, perturbation(cfg)?).map_err(compute)?;
    emit(pick(&o.out, &cfg.raw.outputs.variance), &json(&VarianceOut { variance: v })?)
}

pub fn oracle_cmd(cfg: &Loaded, o: &Overrides) -> Result<(), CliError> {
    let sec = &cfg.raw.oracle;
    let n = o.grid.unwrap_or(sec.n);
    let opts = OracleOptions {
        iters: sec.iters,
        tol: sec.tol,
    };
    let [lo, hi] = sec.bounds;
    let m = discrete_equilibrium(&cfg.potential, lo, hi, n, &opts).map_err(compute)?;
    if m.status == OracleStatus::BudgetExhausted {
        eprintln!(
            "warning: oracle stopped after {} iterations with gradient mapping {:.3e} > {:.1e}",
            m.iterations, m.gradient_mapping_norm, opts.tol
        );
    }
    eprintln!("energy = {}", float(m.energy));
    let dens = m.density();
    let rows = m
        .grid
        .iter()
        .zip(&m.weights)
        .zip(&dens)
        .map(|((x, w), d)| vec![float(*x), float(*w), float(*d)]);
    emit(pick(&o.out, &cfg.raw.outputs.oracle), &csv(&["x", "weight", "density"], rows)?)
}

/// Prints one line per check; `Ok(false)` if any failed.
pub fn verify_cmd(cfg: &Loaded, o: &Overrides) -> Result<bool, CliError> {
    let reports: Vec<CheckReport> = run_suite(&cfg.raw.verify);
    for r in &reports {
        println!("{r}");
    }
    let passed = reports.iter().filter(|r| r.passed()).count();
    println!("{passed}/{} checks passed", reports.len());
    if let Some(p) = pick(&o.out, &cfg.raw.outputs.verify) {
        emit(Some(p), &json(&reports)?)?;
    }
    Ok(passed == reports.len())
}
