//! Batch experiments: convergence studies, multigrid benchmarks, adaptive
//! runs and time stepping, with CSV output and a JSON summary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::afem::{afem_loop, estimate, AfemConfig};
use crate::assembly::{alpha_of, assemble_stiffness, base_load, embed_trace, normalization_ds};
use crate::caputo::{first_mode_decay, run_parabolic_with, trace_l2_error, ParabolicConfig};
use crate::data::Datum;
use crate::error::{invalid, Error, Result};
use crate::exec::Exec;
use crate::mesh::{
    build_tensor, default_grading, graded_points, matching_cells, truncation_height, uniform_base, TensorMesh,
};
use crate::solver::{build_hierarchy, mg_solve, solve_cylinder, HierarchyConfig};
use crate::spectral::{spectral_solve, trace_error_hs_with, SineExpansion};
use crate::FieldVector;

/// Least-squares fit of `log(error)` against `log(x)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
    pub log_corrected: bool,
}

/// Fit `error ≈ C x^slope`. With `log_correct`, errors are first divided by
/// `|log x|^s`.
pub fn fit_rate(points: &[(f64, f64)], log_correct: bool, s: f64) -> Result<RateFit> {
    if points.len() < 3 {
        return invalid(format!("rate fit needs at least 3 points, got {}", points.len()));
    }
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for &(x, e) in points {
        if !(x > 0.0 && e > 0.0 && x.is_finite() && e.is_finite()) {
            return invalid(format!("rate fit needs positive finite points, got ({x}, {e})"));
        }
        let mut e = e;
        if log_correct {
            let l = x.ln().abs();
            if l == 0.0 {
                return invalid("log correction undefined at x = 1");
            }
            e /= l.powf(s);
        }
        xs.push(x.ln());
        ys.push(e.ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return invalid("rate fit needs distinct abscissae");
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(RateFit {
        slope,
        intercept,
        residual,
        log_corrected: log_correct,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Elliptic,
    MgBench,
    Afem,
    Parabolic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum Grading {
    Uniform,
    /// Graded with the given exponent, or the default for `s` when absent.
    Graded {
        exponent: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DataSelector {
    /// The source whose solution is the first eigenfunction (`f`), or the
    /// first eigenfunction itself (`u0`).
    Eig1,
    ConstantOne,
    Zero,
    /// Coefficients in the orthonormal sine basis (1D).
    CustomSineCoeffs {
        coeffs: Vec<f64>,
    },
}

fn default_cutoff() -> usize {
    2000
}

fn default_theta() -> f64 {
    0.5
}

fn default_mg_tol() -> f64 {
    1e-12
}

fn default_one() -> usize {
    1
}

fn default_two() -> usize {
    2
}

/// One experiment, read from a JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default = "default_one")]
    pub n: usize,
    /// Fractional order; `mg-bench` may list several in `s-values` instead.
    #[serde(default)]
    pub s: Option<f64>,
    #[serde(default)]
    pub s_values: Vec<f64>,
    /// Caputo order (parabolic).
    #[serde(default)]
    pub gamma: Option<f64>,
    /// Cells per side (elliptic), multigrid levels `J` (mg-bench) or initial
    /// cells (afem, first entry).
    #[serde(default)]
    pub ladder: Vec<usize>,
    #[serde(default = "Grading::default_graded")]
    pub grading: Grading,
    /// Fixed truncation height; chosen from the mesh when absent.
    #[serde(default)]
    pub height: Option<f64>,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default)]
    pub max_iterations: Option<usize>,
    #[serde(default)]
    pub max_dofs: Option<usize>,
    /// Time steps per run (parabolic).
    #[serde(default)]
    pub steps: Vec<usize>,
    #[serde(default)]
    pub final_time: Option<f64>,
    /// Cells per side of the spatial mesh (parabolic).
    #[serde(default)]
    pub cells: Option<usize>,
    #[serde(default)]
    pub data: Option<DataSelector>,
    #[serde(default)]
    pub initial: Option<DataSelector>,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
    #[serde(default)]
    pub log_correction: bool,
    #[serde(default)]
    pub expected_slope: Option<f64>,
    #[serde(default)]
    pub slope_tol: Option<f64>,
    /// Expected multigrid iterations, one row per ladder entry and one
    /// column per `s` value.
    #[serde(default)]
    pub expected_iterations: Option<Vec<Vec<usize>>>,
    #[serde(default)]
    pub iteration_tol: Option<usize>,
    #[serde(default = "default_mg_tol")]
    pub mg_tol: f64,
    #[serde(default = "default_two")]
    pub coarse_cells: usize,
    #[serde(default = "default_two")]
    pub coarse_m: usize,
    #[serde(default = "default_one")]
    pub smoothing_steps: usize,
    #[serde(default)]
    pub output: Option<String>,
}

impl Grading {
    fn default_graded() -> Self {
        Grading::Graded { exponent: None }
    }

    pub fn exponent(&self, s: f64) -> Result<f64> {
        match self {
            Grading::Uniform => Ok(1.0),
            Grading::Graded { exponent: Some(g) } => {
                if !(*g > 0.0 && g.is_finite()) {
                    return invalid(format!("grading exponent must be positive, got {g}"));
                }
                Ok(*g)
            }
            Grading::Graded { exponent: None } => default_grading(s),
        }
    }
}

fn check_order(s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Config(format!("s must lie in (0,1), got {s}")));
    }
    Ok(s)
}

fn check_increasing(name: &str, v: &[usize]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Config(format!("{name} must not be empty")));
    }
    if v.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!("{name} must be increasing")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn order(&self) -> Result<f64> {
        check_order(self.s.ok_or_else(|| Error::Config("missing s".into()))?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.n) {
            return Err(Error::Config(format!("n must be 1 or 2, got {}", self.n)));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::Config(format!("theta must lie in (0,1], got {}", self.theta)));
        }
        match self.kind {
            Kind::Elliptic => {
                self.order()?;
                check_increasing("ladder", &self.ladder)?;
            }
            Kind::MgBench => {
                if self.s_values.is_empty() {
                    self.order()?;
                }
                for &s in &self.s_values {
                    check_order(s)?;
                }
                check_increasing("ladder", &self.ladder)?;
            }
            Kind::Afem => {
                self.order()?;
                if self.n != 1 {
                    return Err(Error::Config("adaptive runs need n = 1".into()));
                }
            }
            Kind::Parabolic => {
                self.order()?;
                let g = self.gamma.ok_or_else(|| Error::Config("missing gamma".into()))?;
                if !(g > 0.0 && g <= 1.0) {
                    return Err(Error::Config(format!("gamma must lie in (0,1], got {g}")));
                }
                check_increasing("steps", &self.steps)?;
                if let Some(t) = self.final_time {
                    if !(t > 0.0) {
                        return Err(Error::Config("final-time must be positive".into()));
                    }
                }
            }
        }
        if let Grading::Graded { exponent: Some(g) } = self.grading {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Config(format!("grading exponent must be positive, got {g}")));
            }
        }
        if self.cutoff == 0 {
            return Err(Error::Config("cutoff must be at least 1".into()));
        }
        if !(self.mg_tol > 0.0) || self.smoothing_steps == 0 || self.coarse_cells < 2 || self.coarse_m == 0 {
            return Err(Error::Config("multigrid settings out of range".into()));
        }
        if let Some(tol) = self.slope_tol {
            if !(tol >= 0.0) {
                return Err(Error::Config("slope-tol must be non-negative".into()));
            }
        }
        Ok(())
    }

    fn s_list(&self) -> Vec<f64> {
        if self.s_values.is_empty() {
            self.s.into_iter().collect()
        } else {
            self.s_values.clone()
        }
    }
}

/// Right-hand side for a selector; `Eig1` is the source of the first
/// eigenfunction.
pub fn source_datum(sel: &DataSelector, n: usize, s: f64) -> Result<Datum> {
    match sel {
        DataSelector::Eig1 => Datum::first_eigen_source(n, s),
        DataSelector::ConstantOne => Datum::constant_one(n),
        DataSelector::Zero => Datum::zero(n),
        DataSelector::CustomSineCoeffs { coeffs } => {
            if n != 1 {
                return Err(Error::Config("custom sine coefficients are supported for n = 1".into()));
            }
            Ok(Datum::sine(SineExpansion::new(
                crate::spectral::Domain::Interval,
                coeffs.len(),
                coeffs.clone(),
            )?))
        }
    }
}

/// Initial datum for a selector; `Eig1` is `φ₁` (unit `L²` norm).
pub fn initial_datum(sel: &DataSelector, n: usize) -> Result<Datum> {
    match sel {
        DataSelector::Eig1 => Datum::first_mode(n, 2f64.powf(n as f64 / 2.0)),
        other => source_datum(other, n, 0.5),
    }
}

/// Uniform base with `cells` per side and matched graded interval.
pub fn cylinder_mesh(n: usize, cells: usize, grading: f64, height: Option<f64>) -> Result<TensorMesh> {
    let base = uniform_base(n, cells)?;
    let total = base.num_cells();
    let y = match height {
        Some(y) => y,
        None => truncation_height(total)?,
    };
    Ok(build_tensor(base, graded_points(matching_cells(total, n), grading, y)?))
}

/// Discrete solution of the elliptic problem and its right-hand side.
pub fn solve_elliptic(mesh: &TensorMesh, f: &Datum, s: f64, exec: Exec) -> Result<(FieldVector, FieldVector)> {
    let a = assemble_stiffness(mesh, alpha_of(s))?;
    let load = base_load(mesh.base(), |x| f.eval(x), exec);
    let b = embed_trace(mesh, &load, normalization_ds(s)?);
    let v = solve_cylinder(&a, &b, None, mesh.m(), 1e-12)?.x;
    Ok((v, b))
}

/// `‖∇(𝒰 − V)‖_{L²(y^α, C)}` against the exact extension, from
/// `‖∇𝒰‖² = d_s Σ λ_k^{−s} f_k²`, `a(𝒰, V) = bᵀv` and `a(V, V) = vᵀAv`.
pub fn energy_error(mesh: &TensorMesh, v: &[f64], b: &[f64], f: &SineExpansion, s: f64) -> Result<f64> {
    let a = assemble_stiffness(mesh, alpha_of(s))?;
    let ds = normalization_ds(s)?;
    let exact: f64 = ds * crate::spectral::hs_norm(f, -s).powi(2);
    let cross: f64 = b.iter().zip(v).map(|(x, y)| x * y).sum();
    let err2 = exact - 2.0 * cross + a.quad_form(v);
    Ok(err2.max(0.0).sqrt())
}

/// Outcome of one experiment.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub kind: Kind,
    pub params: serde_json::Value,
    pub slope: Option<f64>,
    pub slope_tol: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub summary: Summary,
    /// `(file name, contents)`.
    pub tables: Vec<(String, String)>,
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, fmt_f)
}

fn judge(slope: Option<f64>, cfg: &ExperimentConfig) -> bool {
    match (slope, cfg.expected_slope, cfg.slope_tol) {
        (Some(s), Some(want), Some(tol)) => (s - want).abs() <= tol,
        (None, Some(_), _) => false,
        _ => true,
    }
}

/// Run an experiment and return its tables and summary.
pub fn run(cfg: &ExperimentConfig, exec: Exec) -> Result<Report> {
    cfg.validate()?;
    match cfg.kind {
        Kind::Elliptic => run_elliptic(cfg, exec),
        Kind::MgBench => run_mg_bench(cfg),
        Kind::Afem => run_afem(cfg, exec),
        Kind::Parabolic => run_parabolic_study(cfg, exec),
    }
}

/// One rung of an elliptic convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticRow {
    pub dofs: usize,
    pub elements: usize,
    pub h_base: f64,
    pub m: usize,
    pub height: f64,
    pub energy_err: Option<f64>,
    pub hs_trace_err: f64,
    pub est_total: Option<f64>,
}

pub fn elliptic_row(
    mesh: &TensorMesh,
    f: &Datum,
    s: f64,
    cutoff: usize,
    with_estimator: bool,
    exec: Exec,
) -> Result<EllipticRow> {
    let (v, b) = solve_elliptic(mesh, f, s, exec)?;
    let fexp = f.expansion(cutoff)?;
    let (energy_err, hs) = match &fexp {
        Some(fe) => {
            let u = spectral_solve(fe, s);
            (
                Some(energy_error(mesh, &v, &b, fe, s)?),
                trace_error_hs_with(mesh, &v, &u, s, exec)?.value,
            )
        }
        None => (None, f64::NAN),
    };
    let est_total = if with_estimator && mesh.dim() == 1 {
        Some(estimate(mesh, &v, f, s, exec)?.total())
    } else {
        None
    };
    Ok(EllipticRow {
        dofs: mesh.num_free(),
        elements: mesh.num_elements(),
        h_base: mesh.base().mesh_size(),
        m: mesh.m(),
        height: mesh.height(),
        energy_err,
        hs_trace_err: hs,
        est_total,
    })
}

fn run_elliptic(cfg: &ExperimentConfig, exec: Exec) -> Result<Report> {
    let s = cfg.order()?;
    let f = source_datum(cfg.data.as_ref().unwrap_or(&DataSelector::Eig1), cfg.n, s)?;
    let grading = cfg.grading.exponent(s)?;
    let mut csv = String::from("dofs,h_base,M,Y,energy_err,hs_trace_err,est_total\n");
    let mut points = Vec::new();
    for &cells in &cfg.ladder {
        let mesh = cylinder_mesh(cfg.n, cells, grading, cfg.height)?;
        let row = elliptic_row(&mesh, &f, s, cfg.cutoff, cfg.n == 1, exec)?;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            row.dofs,
            fmt_f(row.h_base),
            row.m,
            fmt_f(row.height),
            fmt_opt(row.energy_err),
            fmt_f(row.hs_trace_err),
            fmt_opt(row.est_total)
        );
        if let Some(e) = row.energy_err {
            points.push((row.dofs as f64, e));
        }
    }
    let slope = if points.len() >= 3 {
        Some(fit_rate(&points, cfg.log_correction, s)?.slope)
    } else {
        None
    };
    Ok(Report {
        summary: Summary {
            kind: cfg.kind,
            params: serde_json::json!({
                "n": cfg.n, "s": s, "grading": grading, "ladder": cfg.ladder,
                "log_correction": cfg.log_correction, "expected_slope": cfg.expected_slope,
            }),
            slope,
            slope_tol: cfg.slope_tol,
            pass: judge(slope, cfg),
        },
        tables: vec![("elliptic.csv".into(), csv)],
    })
}

/// Iterations and contraction of the stationary V-cycle on one hierarchy.
#[derive(Debug, Clone, PartialEq)]
pub struct MgRow {
    pub h_base: f64,
    pub s: f64,
    pub dofs: usize,
    pub iterations: Option<usize>,
    pub delta: f64,
}

/// Dirichlet-inclusive node count, as in the usual tables: `(N+1)^n (M+1)`.
fn table_dofs(mesh: &TensorMesh) -> usize {
    mesh.num_nodes()
}

pub fn mg_bench_row(cfg: &HierarchyConfig, s: f64, tol: f64) -> Result<MgRow> {
    let h = build_hierarchy(cfg)?;
    let mesh = &h.finest().mesh;
    let f = match cfg.dim {
        1 => Datum::callable(1, move |x| {
            (3.0 * std::f64::consts::PI).powf(2.0 * s) * (3.0 * std::f64::consts::PI * x[0]).sin()
        })?,
        _ => Datum::callable(2, move |x| {
            let pi = std::f64::consts::PI;
            (8.0 * pi * pi).powf(s) * (2.0 * pi * x[0]).sin() * (2.0 * pi * x[1]).sin()
        })?,
    };
    let load = base_load(mesh.base(), |x| f.eval(x), Exec::default());
    let b = embed_trace(mesh, &load, normalization_ds(s)?);
    let (iterations, delta) = match mg_solve(&h, &b, tol) {
        Ok(r) => (Some(r.iterations), r.contraction),
        Err(Error::NotConverged { .. }) => (None, crate::solver::contraction_factor(&h, 40)),
        Err(e) => return Err(e),
    };
    Ok(MgRow {
        h_base: mesh.base().mesh_size(),
        s,
        dofs: table_dofs(mesh),
        iterations,
        delta,
    })
}

fn run_mg_bench(cfg: &ExperimentConfig) -> Result<Report> {
    let mut csv = String::from("h_base,s,dofs,iters,delta\n");
    let s_list = cfg.s_list();
    let mut pass = true;
    let tol = cfg.iteration_tol.unwrap_or(2);
    for (row_idx, &levels) in cfg.ladder.iter().enumerate() {
        for (col, &s) in s_list.iter().enumerate() {
            let hc = HierarchyConfig {
                dim: cfg.n,
                coarse_cells: cfg.coarse_cells,
                coarse_m: cfg.coarse_m,
                levels,
                grading: cfg.grading.exponent(s)?,
                height: cfg.height.unwrap_or(1.0),
                alpha: alpha_of(s),
                smoothing_steps: cfg.smoothing_steps,
                line_smoother: true,
            };
            let row = mg_bench_row(&hc, s, cfg.mg_tol)?;
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                fmt_f(row.h_base),
                fmt_f(s),
                row.dofs,
                row.iterations.map_or_else(String::new, |i| i.to_string()),
                fmt_f(row.delta)
            );
            if let Some(exp) = &cfg.expected_iterations {
                let want = exp.get(row_idx).and_then(|r| r.get(col));
                pass &= match (want, row.iterations) {
                    (Some(&w), Some(got)) => got.abs_diff(w) <= tol,
                    (Some(_), None) => false,
                    (None, _) => true,
                };
            }
        }
    }
    Ok(Report {
        summary: Summary {
            kind: cfg.kind,
            params: serde_json::json!({
                "n": cfg.n, "s": s_list, "levels": cfg.ladder, "tol": cfg.mg_tol,
                "coarse_cells": cfg.coarse_cells, "coarse_m": cfg.coarse_m,
                "smoothing_steps": cfg.smoothing_steps,
            }),
            slope: None,
            slope_tol: None,
            pass,
        },
        tables: vec![("mg_bench.csv".into(), csv)],
    })
}

fn run_afem(cfg: &ExperimentConfig, exec: Exec) -> Result<Report> {
    let s = cfg.order()?;
    let f = source_datum(cfg.data.as_ref().unwrap_or(&DataSelector::Eig1), 1, s)?;
    let exact = f.expansion(cfg.cutoff)?.map(|fe| spectral_solve(&fe, s));
    let acfg = AfemConfig {
        s,
        f,
        theta: cfg.theta,
        initial_cells: cfg.ladder.first().copied().unwrap_or(4),
        grading: cfg.grading.exponent(s)?,
        max_iterations: cfg.max_iterations.unwrap_or(10),
        max_dofs: cfg.max_dofs.unwrap_or(100_000),
        exact,
        overkill: None,
    };
    let run = afem_loop(&acfg, exec)?;
    if let Some(e) = run.failure {
        return Err(e);
    }
    let mut csv = String::from("iter,dofs,est,osc,hs_err\n");
    let mut points = Vec::new();
    for r in &run.records {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            r.iteration,
            r.dofs,
            fmt_f(r.estimator),
            fmt_f(r.oscillation),
            fmt_opt(r.hs_error)
        );
        if let Some(e) = r.hs_error {
            points.push((r.dofs as f64, e));
        }
    }
    let slope = if points.len() >= 3 {
        Some(fit_rate(&points, cfg.log_correction, s)?.slope)
    } else {
        None
    };
    Ok(Report {
        summary: Summary {
            kind: cfg.kind,
            params: serde_json::json!({
                "n": 1, "s": s, "theta": cfg.theta, "grading": acfg.grading,
                "initial_cells": acfg.initial_cells, "max_iterations": acfg.max_iterations,
            }),
            slope,
            slope_tol: cfg.slope_tol,
            pass: judge(slope, cfg),
        },
        tables: vec![("afem.csv".into(), csv)],
    })
}

fn run_parabolic_study(cfg: &ExperimentConfig, exec: Exec) -> Result<Report> {
    let s = cfg.order()?;
    let gamma = cfg.gamma.expect("validated");
    let t_end = cfg.final_time.unwrap_or(1.0);
    let cells = cfg.cells.unwrap_or(64);
    let mesh = cylinder_mesh(cfg.n, cells, cfg.grading.exponent(s)?, cfg.height)?;
    let u0 = initial_datum(cfg.initial.as_ref().unwrap_or(&DataSelector::Eig1), cfg.n)?;
    let forcing = match cfg.data.as_ref().unwrap_or(&DataSelector::Zero) {
        DataSelector::Zero => None,
        sel => Some(crate::caputo::Forcing::steady(source_datum(sel, cfg.n, s)?)),
    };
    let exact = match (&forcing, u0.single_mode()) {
        (None, true) => Some(first_mode_decay(
            &u0.expansion(cfg.cutoff)?.expect("single mode"),
            s,
            gamma,
            t_end,
        )?),
        _ => None,
    };
    let mut tables = Vec::new();
    let mut errors = Vec::new();
    let mut finals: Vec<Vec<f64>> = Vec::new();
    let mut stable = true;
    for &k in &cfg.steps {
        let pc = ParabolicConfig {
            s,
            gamma,
            final_time: t_end,
            steps: k,
            u0: u0.clone(),
            forcing: forcing.clone(),
            cutoff: cfg.cutoff,
            tol: 1e-12,
        };
        let run = run_parabolic_with(&mesh, &pc, exec)?;
        stable &= run.stability.holds;
        let mut csv = String::from("step,t,trace_l2,energy,ledger\n");
        for r in &run.records {
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                r.step,
                fmt_f(r.t),
                fmt_f(r.trace_l2),
                fmt_f(r.energy),
                fmt_f(r.ledger)
            );
        }
        tables.push((format!("parabolic_k{k}.csv"), csv));
        let last = run.traces.last().expect("at least one step").clone();
        if let Some(u) = &exact {
            errors.push((t_end / k as f64, trace_l2_error(&mesh, &last, u)?));
        }
        finals.push(last);
    }
    if exact.is_none() {
        // successive differences of the final traces
        let mass = crate::assembly::base_operators(mesh.base()).1;
        for (i, w) in finals.windows(2).enumerate() {
            let d: Vec<f64> = w[0].iter().zip(&w[1]).map(|(a, b)| a - b).collect();
            errors.push((t_end / cfg.steps[i] as f64, mass.quad_form(&d).max(0.0).sqrt()));
        }
    }
    let slope = if errors.len() >= 3 {
        // error ≈ C τ^p: slope in τ is the order
        Some(fit_rate(&errors, false, s)?.slope)
    } else {
        None
    };
    Ok(Report {
        summary: Summary {
            kind: cfg.kind,
            params: serde_json::json!({
                "n": cfg.n, "s": s, "gamma": gamma, "final_time": t_end, "cells": cells,
                "steps": cfg.steps, "stable": stable, "reference": if exact.is_some() { "mittag-leffler" } else { "self-convergence" },
            }),
            slope,
            slope_tol: cfg.slope_tol,
            pass: stable && judge(slope, cfg),
        },
        tables,
    })
}

/// Write the tables and `summary.json` into `dir`.
pub fn write_report(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, body) in &report.tables {
        let p = dir.join(name);
        std::fs::write(&p, body)?;
        written.push(p);
    }
    let p = dir.join("summary.json");
    std::fs::write(&p, serde_json::to_string_pretty(&report.summary)? + "\n")?;
    written.push(p);
    Ok(written)
}

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const ACCEPTANCE_FAILURE: i32 = 1;
    pub const CONFIG_ERROR: i32 = 2;
    pub const NUMERICAL_FAILURE: i32 = 3;
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Json(_) => exit::CONFIG_ERROR,
        Error::Io(_) => exit::CONFIG_ERROR,
        _ => exit::NUMERICAL_FAILURE,
    }
}
