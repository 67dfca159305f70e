//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use platewave::assembly::{assemble_mode_system, Discretization, Domain, ModeSystem, StateVector};
use platewave::diagnostics::{
    compare_with_oracle, disk_dirichlet_eigencheck, observed_orders, refinement_study, FormKind, OracleGrid,
    SmoothProfile,
};
use platewave::dynamics::{default_initial_datum, lyapunov_report, simulate, InitialKind, Window};
use platewave::model::{check_geometric_condition, AnnulusGeometry, PhysicalParams};
use platewave::spectral::{
    all_eigenvalues, check_imaginary_axis_clear, estimate_growth_exponent, log_grid, octave_maxima, running_maximum,
    static_residual, static_solve, sweep_resolvent, CERTIFIED_ALPHA_CEILING,
};
use platewave::Result;

const REGIMES: [(&str, f64, f64); 4] = [
    ("damped-damped", 1.0, 1.0),
    ("damped-undamped", 1.0, 0.0),
    ("undamped-damped", 0.0, 1.0),
    ("conservative", 0.0, 0.0),
];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome { passed, detail: detail.into() })
}

fn systems(rho: f64, beta: f64, n: usize, modes: impl IntoIterator<Item = u32>) -> Result<Vec<ModeSystem>> {
    let p = PhysicalParams::new(rho, beta, 0.3)?;
    let g = AnnulusGeometry::default();
    modes.into_iter().map(|m| assemble_mode_system(&p, &g, &Discretization::new(n, n), m)).collect()
}

fn velocity_bumps(s: &[ModeSystem]) -> Vec<StateVector> {
    s.iter().map(|s| default_initial_datum(s, InitialKind::VelocityBump)).collect()
}

fn dissipation_identity() -> Result<Outcome> {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (_, rho, beta) in REGIMES {
        let s = systems(rho, beta, 32, 0..3)?;
        let trace = simulate(&s, &velocity_bumps(&s), 10.0, 0.01)?;
        assert_eq!(trace.times.len(), 1001);
        worst = worst.max(trace.max_balance_residual());
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-11 && elapsed <= Duration::from_secs(10),
        format!("max relative balance residual {worst:.2e} over 1000 steps x 4 regimes x modes 0..2, {elapsed:.2?}"),
    )
}

fn conservative_energy() -> Result<Outcome> {
    let s = systems(0.0, 0.0, 32, 0..3)?;
    let trace = simulate(&s, &velocity_bumps(&s), 10.0, 0.01)?;
    let e = trace.energies();
    let drift = e.iter().map(|v| (v - e[0]).abs() / e[0]).fold(0.0, f64::max);
    outcome(drift <= 1e-10, format!("max |E(t) - E(0)|/E(0) = {drift:.2e} over 1000 steps"))
}

fn exponential_stability() -> Result<Outcome> {
    let s = systems(1.0, 1.0, 32, 0..3)?;
    let trace = simulate(&s, &velocity_bumps(&s), 20.0, 0.01)?;
    let fit = trace.fit_exponential(Window::latter(20.0, 0.5))?;
    let lyap = lyapunov_report(&trace, 0.0, 20.0);
    outcome(
        fit.rate > 0.0 && fit.r_squared >= 0.99 && lyap.c5.is_some(),
        format!("kappa = {:.4}, R^2 = {:.4} on [10, 20]; c5 = {:?}", fit.rate, fit.r_squared, lyap.c5),
    )
}

fn non_exponential_stability() -> Result<Outcome> {
    // (a) windowed decay rates on the default discretization.
    let s = systems(1.0, 0.0, 32, 0..3)?;
    let trace = simulate(&s, &velocity_bumps(&s), 160.0, 0.01)?;
    let k40 = trace.fit_exponential(Window::latter(40.0, 0.5))?.rate;
    let k160 = trace.fit_exponential(Window::latter(160.0, 0.5))?.rate;
    let a = k160 <= 0.5 * k40;

    // (b) running maximum of the resolvent sweep, per octave.
    let s = systems(1.0, 0.0, 64, 0..5)?;
    let samples = sweep_resolvent(&s, &log_grid(1.0, 1e3, 64))?;
    let octaves = octave_maxima(&running_maximum(&samples));
    let strict = octaves.windows(2).all(|w| w[1].1 > w[0].1);
    let b = octaves.len() >= 3 && strict;
    let levels: Vec<String> = octaves.iter().map(|(l, v)| format!("{l:.0}:{v:.3e}")).collect();
    outcome(
        a && b,
        format!(
            "(a) {} kappa[20,40] = {k40:.4}, kappa[80,160] = {k160:.4}; (b) {} running max by octave [{}]",
            if a { "PASS" } else { "FAIL" },
            if b { "PASS" } else { "FAIL" },
            levels.join(", ")
        ),
    )
}

fn polynomial_consistency() -> Result<Outcome> {
    let start = Instant::now();
    let s = systems(1.0, 0.0, 64, 0..5)?;
    let trace = simulate(&s, &velocity_bumps(&s), 160.0, 0.01)?;
    let poly = trace.fit_polynomial(Window { start: 1.0, end: 160.0 })?;
    let samples = sweep_resolvent(&s, &log_grid(1.0, 1e3, 64))?;
    let growth = estimate_growth_exponent(&samples)?;
    let alpha = growth.alpha;
    let elapsed = start.elapsed();
    let alpha_ok = alpha > 0.0 && alpha <= CERTIFIED_ALPHA_CEILING;
    let consistent = alpha_ok && poly.p >= 0.8 / alpha;
    outcome(
        poly.certificate.is_finite() && alpha_ok && consistent && elapsed <= Duration::from_secs(300),
        format!(
            "certificate {:.4e}; alpha = {alpha:.4} (R^2 {:.3}); p = {:.4} (R^2 {:.3}); need 0 < alpha <= 30 and p >= 0.8/alpha; {elapsed:.2?}",
            poly.certificate, growth.r_squared, poly.p, poly.r_squared
        ),
    )
}

fn invertibility_and_axis() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for (_, rho, beta) in REGIMES {
        for s in systems(rho, beta, 32, 0..3)? {
            let random = StateVector::new(s.mode(), DVector::from_fn(s.state_dim(), |_, _| rng.gen_range(-1.0..1.0)));
            for f in [random, platewave::diagnostics::smooth_load(&s)] {
                let u = static_solve(&s, &f)?;
                worst = worst.max(static_residual(&s, &u, &f));
            }
        }
    }
    let grid = log_grid(1.0, 1e3, 64);
    let mut details = vec![format!("static residual max {worst:.2e}")];
    let mut ok = worst <= 1e-10;
    for (name, rho, beta) in &REGIMES[..2] {
        let rep = check_imaginary_axis_clear(&systems(*rho, *beta, 32, 0..3)?, &grid)?;
        ok &= rep.clear;
        details.push(format!("{name} min |Re| {:.3e}", rep.min_abs_real_part));
    }
    let mut conservative_max = 0.0f64;
    for s in systems(0.0, 0.0, 32, 0..3)? {
        for e in all_eigenvalues(s.whitening().generator())? {
            conservative_max = conservative_max.max(e.re.abs());
        }
    }
    ok &= conservative_max <= 1e-9;
    details.push(format!("conservative max |Re| {conservative_max:.3e}"));
    outcome(ok, details.join("; "))
}

fn oracle_equivalence() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let grid = OracleGrid { radial: 512, angular: 512 };
    let annulus = Domain::Annulus { inner: 1.0, outer: 2.0 };
    let disk = Domain::Disk { radius: 1.0 };
    let (mut total, mut failures, mut worst_annulus, mut worst_disk) = (0, 0, 0.0f64, 0.0f64);
    for m in 0..4 {
        for _ in 0..10 {
            let p = SmoothProfile::random_annulus(&mut rng);
            for which in [FormKind::Plate, FormKind::Grad, FormKind::Mass] {
                let c = compare_with_oracle(&p, annulus, 64, m, 0.3, which, grid)?;
                total += 1;
                failures += usize::from(!c.agrees(1e-4));
                worst_annulus = worst_annulus.max(c.relative_difference);
            }
            let p = SmoothProfile::random_disk(&mut rng, m);
            for which in [FormKind::Grad, FormKind::Mass] {
                let c = compare_with_oracle(&p, disk, 64, m, 0.3, which, grid)?;
                total += 1;
                failures += usize::from(!c.agrees(f64::INFINITY));
                worst_disk = worst_disk.max(c.relative_difference);
            }
        }
    }
    outcome(
        failures == 0,
        format!(
            "{total} comparisons, {failures} outside combined error; worst relative difference annulus {worst_annulus:.2e} (cap 1e-4), disk {worst_disk:.2e}"
        ),
    )
}

fn disk_eigen_convergence() -> Result<Outcome> {
    let mut ok = true;
    let mut details = Vec::new();
    for m in [0, 1] {
        let errs = [32, 64, 128]
            .iter()
            .map(|&n| Ok(disk_dirichlet_eigencheck(n, m, 1, 1.0)?[0].relative_error))
            .collect::<Result<Vec<f64>>>()?;
        let orders = observed_orders(&errs);
        ok &= orders.iter().all(|o| (o - 2.0).abs() <= 0.3) && errs[2] <= 1e-3;
        let errs: Vec<String> = errs.iter().map(|e| format!("{e:.2e}")).collect();
        details.push(format!("m={m} errors [{}] orders {orders:.3?}", errs.join(", ")));
    }
    outcome(ok, details.join("; "))
}

fn strong_traces() -> Result<Outcome> {
    let g = AnnulusGeometry::default();
    let mut ok = true;
    let mut details = Vec::new();
    for (name, rho, beta) in &REGIMES[..2] {
        let p = PhysicalParams::new(*rho, *beta, 0.3)?;
        for m in 0..3 {
            let rows = refinement_study(&p, &g, m, &[32, 64, 128])?;
            let exact = rows.iter().all(|r| r.continuity <= 1e-14 && r.clamped <= 1e-14);
            let b1: Vec<f64> = rows.iter().map(|r| r.residual_b1).collect();
            let b2: Vec<f64> = rows.iter().map(|r| r.residual_b2).collect();
            let decreasing = b1.windows(2).all(|w| w[1] < w[0]) && b2.windows(2).all(|w| w[1] < w[0]);
            ok &= exact && decreasing;
            details.push(format!(
                "{name} m={m} b1 rates {:.2?} b2 rates {:.2?}",
                observed_orders(&b1),
                observed_orders(&b2)
            ));
        }
    }
    outcome(ok, details.join("; "))
}

fn geometric_condition() -> Result<Outcome> {
    let origin = check_geometric_condition(&AnnulusGeometry::default());
    let outside = check_geometric_condition(&AnnulusGeometry::new(1.0, 2.0, [1.5, 0.0])?);
    let boundary = check_geometric_condition(&AnnulusGeometry::new(1.0, 2.0, [0.6, 0.8])?);
    let on_circle = check_geometric_condition(&AnnulusGeometry::new(1.0, 2.0, [1.0, 0.0])?);
    let ok = origin.holds
        && origin.max_q_dot_nu == -1.0
        && !outside.holds
        && on_circle.holds
        && on_circle.max_q_dot_nu == 0.0
        && boundary.holds == (boundary.max_q_dot_nu <= 0.0);
    outcome(
        ok,
        format!(
            "origin margin {}; |x0| = 1.5 margin {} (fails); |x0| = 1 margin {} (passes)",
            origin.max_q_dot_nu, outside.max_q_dot_nu, on_circle.max_q_dot_nu
        ),
    )
}

type Criterion = (&'static str, fn() -> Result<Outcome>);

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 discrete dissipation identity", dissipation_identity),
        ("2 conservative energy", conservative_energy),
        ("3 exponential stability (damped-damped)", exponential_stability),
        ("4 non-exponential stability (damped-undamped)", non_exponential_stability),
        ("5 polynomial-decay consistency", polynomial_consistency),
        ("6 invertibility and axis clearance", invertibility_and_axis),
        ("7 oracle equivalence", oracle_equivalence),
        ("8 disk eigenvalue convergence", disk_eigen_convergence),
        ("9 strong traces under refinement", strong_traces),
        ("10 geometric condition", geometric_condition),
    ];
    let mut failed = Vec::new();
    for (name, run) in criteria {
        let start = Instant::now();
        let result = run().unwrap_or_else(|e| Outcome { passed: false, detail: format!("error: {e}") });
        println!(
            "{} criterion {name}: {} [{:.1?}]",
            if result.passed { "PASS" } else { "FAIL" },
            result.detail,
            start.elapsed()
        );
        if !result.passed {
            failed.push(name);
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed.len(), criteria.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
