use std::fs;
use std::path::{Path, PathBuf};

use eqkernel::equilibrium::{PotentialSpec, SolveOptions};
use eqkernel::kernel::KernelMethod;
use eqkernel::oracle::OracleOptions;
use eqkernel::surface::Support;
use eqkernel::verify::VerifyConfig;
use eqkernel::Perturbation;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialForm {
    /// Ascending monomial coefficients.
    Polynomial,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub form: PotentialForm,
    pub coeffs: Vec<f64>,
    #[serde(default)]
    pub extras: Vec<Perturbation>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    #[serde(rename = "box")]
    pub bounds: [f64; 2],
    pub n: usize,
    pub iters: usize,
    pub tol: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        let o = OracleOptions::default();
        Self {
            bounds: [-3.0, 3.0],
            n: 4000,
            iters: o.iters,
            tol: o.tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    Direct,
    Pi,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub grid: usize,
    /// Half width of the excluded diagonal band; default scales with the narrowest cut.
    pub exclusion: Option<f64>,
    pub method: MethodName,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            grid: 40,
            exclusion: None,
            method: MethodName::Direct,
        }
    }
}

impl KernelSection {
    pub fn method(&self) -> KernelMethod {
        match self.method {
            MethodName::Direct => KernelMethod::Direct,
            MethodName::Pi => KernelMethod::Pi,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub solution: Option<PathBuf>,
    pub density: Option<PathBuf>,
    pub kernel: Option<PathBuf>,
    pub response: Option<PathBuf>,
    pub variance: Option<PathBuf>,
    pub oracle: Option<PathBuf>,
    pub verify: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub potential: PotentialConfig,
    /// Optional cross-check against the initial support.
    #[serde(default)]
    pub genus: Option<usize>,
    #[serde(default)]
    pub initial_support: Option<Vec<f64>>,
    /// Previously written solution file, used instead of solving.
    #[serde(default)]
    pub solution: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub kernel: KernelSection,
    /// `δv` for `respond`, the linear statistic for `variance`.
    #[serde(default)]
    pub perturbation: Option<Perturbation>,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub verify: VerifyConfig,
}

/// Parsed and validated configuration, with paths resolved against the config's directory.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub raw: RunConfig,
    pub potential: PotentialSpec,
    pub init: Option<Support>,
}

fn config_err(path: &Path, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{}: {msg}", path.display()))
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = fs::read_to_string(path).map_err(|e| config_err(path, e))?;
    let mut raw: RunConfig = serde_json::from_str(&text).map_err(|e| {
        CliError::Config(format!(
            "{}:{}:{}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &mut Option<PathBuf>| {
        if let Some(q) = p {
            if q.is_relative() {
                *q = base.join(&*q);
            }
        }
    };
    resolve(&mut raw.solution);
    let o = &mut raw.outputs;
    for p in [
        &mut o.solution,
        &mut o.density,
        &mut o.kernel,
        &mut o.response,
        &mut o.variance,
        &mut o.oracle,
        &mut o.verify,
    ] {
        resolve(p);
    }
    validate(path, raw)
}

fn validate(path: &Path, raw: RunConfig) -> Result<Loaded, CliError> {
    let err = |m: String| config_err(path, m);
    let potential = match raw.potential.form {
        PotentialForm::Polynomial => PotentialSpec {
            coeffs: raw.potential.coeffs.clone(),
            extras: raw.potential.extras.clone(),
        },
    };
    potential.validate().map_err(|e| err(e.to_string()))?;
    let init = match &raw.initial_support {
        Some(e) => {
            let s = Support::new(e.clone()).map_err(|e| err(format!("initial_support: {e}")))?;
            if let Some(g) = raw.genus {
                if g != s.genus() {
                    return Err(err(format!(
                        "genus {g} does not match initial_support with {} endpoints",
                        e.len()
                    )));
                }
            }
            Some(s)
        }
        None => None,
    };
    let s = &raw.solver;
    for (name, v) in [
        ("solver.tol", s.tol),
        ("solver.collapse_tol", s.collapse_tol),
        ("oracle.tol", raw.oracle.tol),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(err(format!("{name} must be positive, got {v}")));
        }
    }
    if s.order < 8 || s.max_iter == 0 {
        return Err(err("solver.order must be at least 8 and solver.max_iter positive".into()));
    }
    if let Some(x) = raw.kernel.exclusion {
        if !(x > 0.0 && x.is_finite()) {
            return Err(err(format!("kernel.exclusion must be positive, got {x}")));
        }
    }
    if raw.kernel.grid == 0 {
        return Err(err("kernel.grid must be positive".into()));
    }
    let [lo, hi] = raw.oracle.bounds;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(err(format!("oracle.box [{lo}, {hi}] is not an interval")));
    }
    if raw.oracle.n < 1000 {
        return Err(err(format!("oracle.n must be at least 1000, got {}", raw.oracle.n)));
    }
    if raw.verify.tolerances.values().any(|t| !(*t >= 0.0)) {
        return Err(err("verify.tolerances must be non-negative".into()));
    }
    Ok(Loaded {
        raw,
        potential,
        init,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Loaded, CliError> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, s).unwrap();
        load(&p)
    }

    #[test]
    fn minimal_config() {
        let l = parse(
            r#"{"potential": {"form": "polynomial", "coeffs": [0, 0, 0.5]},
                "initial_support": [-1, 1]}"#,
        )
        .unwrap();
        assert_eq!(l.init.unwrap().genus(), 0);
        assert_eq!(l.raw.oracle.n, 4000);
    }

    #[test]
    fn malformed_json_reports_position() {
        let e = parse("{\n  \"potential\": {\"form\": \"polynomial\",\n   \"coeffs\": [0, 0, 0.5}\n}")
            .unwrap_err();
        let CliError::Config(m) = e else { panic!() };
        assert!(m.contains("c.json:3:"), "{m}");
    }

    #[test]
    fn rejections() {
        let base = r#""potential": {"form": "polynomial", "coeffs": [0, 0, 0.5]}"#;
        for extra in [
            r#""initial_support": [1, -1]"#,
            r#""initial_support": [-1, 1], "genus": 1"#,
            r#""solver": {"tol": 0}"#,
            r#""kernel": {"exclusion": -1}"#,
            r#""oracle": {"box": [3, -3]}"#,
            r#""unknown": 1"#,
        ] {
            let r = parse(&format!("{{{base}, {extra}}}"));
            assert!(matches!(r, Err(CliError::Config(_))), "{extra}");
        }
        let r = parse(r#"{"potential": {"form": "polynomial", "coeffs": [0, 0, -1]}}"#);
        assert!(matches!(r, Err(CliError::Config(_))));
    }
}
