//! The four experiment drivers. Each writes its files into the output
//! directory and returns the summary it serialized.

use std::path::Path;

use nalgebra::{Complex, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use crate::assembly::{assemble_mode_system, Domain, ModeSystem};
use crate::diagnostics::{
    compare_with_oracle, disk_dirichlet_eigencheck, observed_orders, refinement_study, refinement_to_csv, FormKind,
    OracleGrid, SmoothProfile,
};
use crate::dynamics::{
    classify_energy, default_initial_datum, lyapunov_report, simulate, Monotonicity, PolynomialFit, RateFit, Window,
};
use crate::error::{Error, Result};
use crate::model::{check_geometric_condition, ExpectedDecay, GeometricCheck};
use crate::spectral::{
    check_imaginary_axis_clear, eigenvalues_near, estimate_growth_exponent, samples_to_csv, sweep_resolvent,
    AxisReport, EigenEntry, GrowthFit, CERTIFIED_ALPHA_CEILING,
};

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub command: &'static str,
    pub version: &'static str,
    pub config_hash: String,
}

impl Provenance {
    fn new(command: &'static str, cfg: &ExperimentConfig) -> Self {
        Provenance { command, version: env!("CARGO_PKG_VERSION"), config_hash: cfg.hash() }
    }
}

pub fn build_systems(cfg: &ExperimentConfig) -> Result<Vec<ModeSystem>> {
    let params = cfg.params()?;
    let geom = cfg.geometry()?;
    let disc = cfg.discretization();
    cfg.modes.par_iter().map(|&m| assemble_mode_system(&params, &geom, &disc, m)).collect()
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(dir, name, &text)
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub provenance: Provenance,
    pub regime: &'static str,
    pub expected_decay: ExpectedDecay,
    pub modes: Vec<u32>,
    pub steps: usize,
    pub kappa_window: Window,
    pub kappa_fit: Option<RateFit>,
    pub p_window: Window,
    pub p_fit: Option<PolynomialFit>,
    /// `sup_{t ∈ [1, T]} t^{1/30} ‖U(t)‖ / ‖𝒜U₀‖`.
    pub certificate: Option<f64>,
    pub fit_errors: Vec<String>,
    pub monotonicity: Monotonicity,
    pub max_balance_residual: f64,
    pub lyapunov_c5: Option<f64>,
}

/// Energy relative tolerance for the monotonicity flag.
const MONOTONICITY_TOL: f64 = 1e-10;

pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<SimulateSummary> {
    let systems = build_systems(cfg)?;
    let initial: Vec<_> = systems.iter().map(|s| default_initial_datum(s, cfg.initial)).collect();
    let trace = simulate(&systems, &initial, cfg.horizon, cfg.dt)?;
    write(&cfg.out_dir, "energy.csv", &trace.to_csv())?;

    let mut fit_errors = Vec::new();
    let kappa_window = Window::latter(trace.horizon(), 0.5);
    let kappa_fit = trace.fit_exponential(kappa_window).map_err(|e| fit_errors.push(format!("kappa: {e}"))).ok();
    let p_window = Window { start: 1.0, end: trace.horizon() };
    let p_fit = trace.fit_polynomial(p_window).map_err(|e| fit_errors.push(format!("p: {e}"))).ok();
    let regime = cfg.params()?.regime();
    let summary = SimulateSummary {
        provenance: Provenance::new("simulate", cfg),
        regime: regime.name(),
        expected_decay: regime.expected_decay(),
        modes: cfg.modes.clone(),
        steps: trace.times.len() - 1,
        kappa_window,
        kappa_fit,
        p_window,
        certificate: p_fit.map(|p| p.certificate),
        p_fit,
        fit_errors,
        monotonicity: classify_energy(&trace.energies(), MONOTONICITY_TOL),
        max_balance_residual: trace.max_balance_residual(),
        lyapunov_c5: lyapunov_report(&trace, 0.0, trace.horizon()).c5,
    };
    write_json(&cfg.out_dir, "summary.json", &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSummary {
    pub provenance: Provenance,
    pub regime: &'static str,
    pub eigenvalue_count: usize,
    pub max_real_part: f64,
    pub min_abs_real_part: f64,
    pub imaginary_detected: bool,
    pub unconverged: usize,
    pub axis: AxisReport,
}

pub fn cmd_spectrum(cfg: &ExperimentConfig) -> Result<(Vec<EigenEntry>, SpectrumSummary)> {
    let systems = build_systems(cfg)?;
    let shift = Complex::new(cfg.shift[0], cfg.shift[1]);
    let reports = systems
        .par_iter()
        .map(|s| eigenvalues_near(s, shift, cfg.eigen_count.min(s.state_dim())))
        .collect::<Result<Vec<_>>>()?;
    let entries: Vec<EigenEntry> = reports.iter().flat_map(|r| r.eigenvalues.iter().copied()).collect();
    write_json(&cfg.out_dir, "spectrum.json", &entries)?;
    let axis = check_imaginary_axis_clear(&systems, &cfg.lambda_grid.points())?;
    let summary = SpectrumSummary {
        provenance: Provenance::new("spectrum", cfg),
        regime: cfg.params()?.regime().name(),
        eigenvalue_count: entries.len(),
        max_real_part: reports.iter().map(|r| r.max_real_part).fold(f64::NEG_INFINITY, f64::max),
        min_abs_real_part: reports.iter().map(|r| r.min_abs_real_part).fold(f64::INFINITY, f64::min),
        imaginary_detected: reports.iter().any(|r| r.imaginary_detected),
        unconverged: reports.iter().map(|r| r.unconverged).sum(),
        axis,
    };
    write_json(&cfg.out_dir, "spectrum_summary.json", &summary)?;
    Ok((entries, summary))
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolventSummary {
    pub provenance: Provenance,
    pub regime: &'static str,
    /// The sweep maximizes over these modes only.
    pub truncated_modes: Vec<u32>,
    pub samples: usize,
    pub sentinel_count: usize,
    pub fit: GrowthFit,
    pub within_ceiling: bool,
}

pub fn cmd_resolvent(cfg: &ExperimentConfig) -> Result<ResolventSummary> {
    let systems = build_systems(cfg)?;
    let samples = sweep_resolvent(&systems, &cfg.lambda_grid.points())?;
    write(&cfg.out_dir, "resolvent.csv", &samples_to_csv(&samples))?;
    let fit = estimate_growth_exponent(&samples)?;
    let summary = ResolventSummary {
        provenance: Provenance::new("resolvent", cfg),
        regime: cfg.params()?.regime().name(),
        truncated_modes: cfg.modes.clone(),
        samples: samples.len(),
        sentinel_count: samples.iter().filter(|s| s.is_sentinel()).count(),
        within_ceiling: fit.alpha > 0.0 && fit.alpha <= CERTIFIED_ALPHA_CEILING,
        fit,
    };
    write_json(&cfg.out_dir, "resolvent_fit.json", &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub provenance: Provenance,
    pub checks: Vec<Check>,
    pub all_passed: bool,
    pub geometric_condition: GeometricCheck,
}

impl VerifyReport {
    pub fn failed(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect()
    }
}

fn check(name: &'static str, outcome: Result<(bool, String)>) -> Check {
    match outcome {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check { name, passed: false, detail: format!("error: {e}") },
    }
}

fn check_structure(systems: &[ModeSystem]) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for s in systems {
        let f = s.forms();
        for a in [&f.plate, &f.grad1, &f.mass1, &f.grad2, &f.mass2] {
            worst = worst.max((a - a.transpose()).amax());
        }
        let (m, b) = (s.pencil_m(), s.pencil_b());
        worst = worst.max((&m - m.transpose()).amax());
        let n = s.block_dim();
        let mut expect = nalgebra::DMatrix::zeros(2 * n, 2 * n);
        expect.view_mut((n, n), (n, n)).copy_from(&(s.damping() * -2.0));
        worst = worst.max((&b + b.transpose() - expect).amax());
    }
    Ok((worst == 0.0, format!("max asymmetry {worst:e}")))
}

fn check_dissipativity(systems: &[ModeSystem]) -> Result<(bool, String)> {
    let mut worst = f64::NEG_INFINITY;
    for s in systems {
        let g = s.whitening().generator();
        let sym = (g + g.transpose()) * 0.5;
        let top = SymmetricEigen::new(sym).eigenvalues.max() / g.amax().max(1.0);
        worst = worst.max(top);
    }
    Ok((worst <= 1e-12, format!("largest scaled eigenvalue of sym(G): {worst:e}")))
}

fn check_energy_identity(cfg: &ExperimentConfig, systems: &[ModeSystem]) -> Result<(bool, String)> {
    let initial: Vec<_> = systems.iter().map(|s| default_initial_datum(s, cfg.initial)).collect();
    let horizon = (200.0 * cfg.dt).min(cfg.horizon);
    let trace = simulate(systems, &initial, horizon, cfg.dt)?;
    let r = trace.max_balance_residual();
    Ok((r <= 1e-11, format!("max relative balance residual {r:e} over {} steps", trace.times.len() - 1)))
}

fn check_oracle(cfg: &ExperimentConfig) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let grid = OracleGrid { radial: 128, angular: 128 };
    let annulus = Domain::Annulus { inner: cfg.r_interface, outer: cfg.r_outer };
    let disk = Domain::Disk { radius: cfg.r_interface };
    let mut cases = Vec::new();
    for &m in &cfg.modes {
        let p = SmoothProfile::random_annulus(&mut rng);
        for which in [FormKind::Plate, FormKind::Grad, FormKind::Mass] {
            cases.push((p.clone(), annulus, cfg.n1, m, which));
        }
        let p = SmoothProfile::random_disk(&mut rng, m);
        for which in [FormKind::Grad, FormKind::Mass] {
            cases.push((p.clone(), disk, cfg.n2, m, which));
        }
    }
    let results = cases
        .par_iter()
        .map(|(p, d, n, m, w)| compare_with_oracle(p, *d, *n, *m, cfg.mu, *w, grid))
        .collect::<Result<Vec<_>>>()?;
    let failures = results.iter().filter(|c| !c.agrees(5e-2)).count();
    let worst = results.iter().map(|c| c.relative_difference).fold(0.0, f64::max);
    Ok((
        failures == 0,
        format!(
            "{} comparisons, {failures} outside error estimate, worst relative difference {worst:e}",
            results.len()
        ),
    ))
}

fn check_eigen_convergence(cfg: &ExperimentConfig) -> Result<(bool, String)> {
    let mut ok = true;
    let mut detail = Vec::new();
    for m in [0u32, 1] {
        let errs = [cfg.n2, 2 * cfg.n2, 4 * cfg.n2]
            .iter()
            .map(|&n| Ok(disk_dirichlet_eigencheck(n, m, 1, cfg.r_interface)?[0].relative_error))
            .collect::<Result<Vec<_>>>()?;
        let orders = observed_orders(&errs);
        ok &= orders.iter().all(|o| (o - 2.0).abs() <= 0.3);
        detail.push(format!("m={m} orders {orders:.3?}"));
    }
    Ok((ok, detail.join("; ")))
}

fn check_traces(cfg: &ExperimentConfig) -> Result<(bool, String)> {
    let params = cfg.params()?;
    let geom = cfg.geometry()?;
    let mut ok = true;
    let mut detail = Vec::new();
    for (k, &m) in cfg.modes.iter().enumerate() {
        let rows = refinement_study(&params, &geom, m, &[cfg.n1, 2 * cfg.n1, 4 * cfg.n1])?;
        if k == 0 {
            write(&cfg.out_dir, "refinement.csv", &refinement_to_csv(&rows))?;
        }
        let exact = rows.iter().all(|r| r.continuity <= 1e-14 && r.clamped <= 1e-14);
        let b1 = rows.windows(2).all(|w| w[1].residual_b1 < w[0].residual_b1);
        let b2 = rows.windows(2).all(|w| w[1].residual_b2 < w[0].residual_b2);
        ok &= exact && b1 && b2;
        let r1: Vec<f64> = rows.iter().map(|r| r.residual_b1).collect();
        let r2: Vec<f64> = rows.iter().map(|r| r.residual_b2).collect();
        detail.push(format!("m={m} b1 rates {:.2?} b2 rates {:.2?}", observed_orders(&r1), observed_orders(&r2)));
    }
    Ok((ok, detail.join("; ")))
}

pub fn cmd_verify(cfg: &ExperimentConfig) -> Result<VerifyReport> {
    let geom = cfg.geometry()?;
    let systems = build_systems(cfg)?;
    let geometric = check_geometric_condition(&geom);
    let checks = vec![
        check("assembly_symmetry", check_structure(&systems)),
        check("dissipativity", check_dissipativity(&systems)),
        check("energy_identity", check_energy_identity(cfg, &systems)),
        check("oracle_equivalence", check_oracle(cfg)),
        check("eigenvalue_convergence", check_eigen_convergence(cfg)),
        check("trace_residual_refinement", check_traces(cfg)),
        Check {
            name: "geometric_condition",
            passed: geometric.holds,
            detail: format!("max (x - x0)·nu over the interface = {:e}", geometric.max_q_dot_nu),
        },
    ];
    let report = VerifyReport {
        provenance: Provenance::new("verify", cfg),
        all_passed: checks.iter().all(|c| c.passed),
        checks,
        geometric_condition: geometric,
    };
    write_json(&cfg.out_dir, "verify.json", &report)?;
    Ok(report)
}
