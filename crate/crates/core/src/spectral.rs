//! Spectrum and resolvent of the generator pencil `(M, B)`.
//!
//! Everything is measured in the energy norm: with `M = L Lᵀ` the pencil is
//! replaced by the whitened generator `G = L⁻¹ B L⁻ᵀ`, so that
//! `‖(iλM − B)⁻¹M‖` in the `M`-norm equals the spectral norm of
//! `(iλ − G)⁻¹`.

use std::fmt::Write as _;

use nalgebra::{Cholesky, Complex, DMatrix, DVector, Schur};
use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::{ModeSystem, StateVector};
use crate::error::{Error, Result};
use crate::fit::fit_line;

type C64 = Complex<f64>;

/// Resolvent norms above this are treated as "iλ is an eigenvalue".
pub const RESOLVENT_SENTINEL: f64 = 1e14;

/// Polynomial order ceiling `α = 30` certified for the damped–undamped case.
pub const CERTIFIED_ALPHA_CEILING: f64 = 30.0;

/// Error-free `a + b = s + e`.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// `Σ_k sign_k · (A_k x_k)` with compensated products and sums, so the
/// result is accurate to about working precision even under cancellation.
fn compensated_combination(terms: &[(f64, &DMatrix<f64>, &DVector<f64>)]) -> DVector<f64> {
    let n = terms[0].1.nrows();
    DVector::from_fn(n, |i, _| {
        let (mut sum, mut err) = (0.0, 0.0);
        for &(sign, a, x) in terms {
            for j in 0..a.ncols() {
                let p = sign * a[(i, j)] * x[j];
                let ep = (sign * a[(i, j)]).mul_add(x[j], -p);
                let (s, e) = two_sum(sum, p);
                sum = s;
                err += e + ep;
            }
        }
        sum + err
    })
}

const REFINEMENT_SWEEPS: usize = 4;

/// Solves `−𝒜U = F`, i.e. `−B U = M F`.
///
/// With `F = (f, g)` this is `v = −f` and `K u = M_v g + D f`. The Cholesky
/// solve is followed by iterative refinement with compensated residuals.
pub fn static_solve(system: &ModeSystem, rhs: &StateVector) -> Result<StateVector> {
    system.check_state(rhs)?;
    let f = rhs.u().into_owned();
    let g = rhs.v().into_owned();
    let v = -&f;
    let (k, mv, d) = (system.stiffness(), system.kinetic_mass(), system.damping());
    let chol =
        Cholesky::new(k.clone()).ok_or_else(|| Error::Singular("stiffness K is not positive definite".into()))?;
    let load = compensated_combination(&[(1.0, mv, &g), (1.0, d, &f)]);
    let mut u = chol.solve(&load);
    let scale = load.norm();
    for _ in 0..REFINEMENT_SWEEPS {
        let r = compensated_combination(&[(1.0, mv, &g), (1.0, d, &f), (-1.0, k, &u)]);
        if r.norm() <= 1e-15 * scale {
            break;
        }
        u += chol.solve(&r);
    }
    Ok(StateVector::from_blocks(system.mode(), &u, &v))
}

/// `‖−BU − MF‖ / ‖MF‖` (absolute when `F = 0`), evaluated with compensated
/// arithmetic.
pub fn static_residual(system: &ModeSystem, state: &StateVector, rhs: &StateVector) -> f64 {
    let (k, mv, d) = (system.stiffness(), system.kinetic_mass(), system.damping());
    let (u, v) = (state.u().into_owned(), state.v().into_owned());
    let (f, g) = (rhs.u().into_owned(), rhs.v().into_owned());
    // −BU − MF = (−K v − K f, K u + D v − M_v g)
    let r1 = compensated_combination(&[(-1.0, k, &v), (-1.0, k, &f)]);
    let r2 = compensated_combination(&[(1.0, k, &u), (1.0, d, &v), (-1.0, mv, &g)]);
    let mf1 = compensated_combination(&[(1.0, k, &f)]);
    let mf2 = compensated_combination(&[(1.0, mv, &g)]);
    let r = (r1.norm_squared() + r2.norm_squared()).sqrt();
    let scale = (mf1.norm_squared() + mf2.norm_squared()).sqrt();
    if scale > 0.0 {
        r / scale
    } else {
        r
    }
}

/// Whitened generator of an arbitrary pencil with `M` symmetric positive
/// definite.
pub fn whitened_generator(m: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let l =
        Cholesky::new(m.clone()).ok_or_else(|| Error::Singular("pencil M is not positive definite".into()))?.unpack();
    let x = l.solve_lower_triangular(b).expect("nonsingular Cholesky factor");
    let g = l.solve_lower_triangular(&x.transpose()).expect("nonsingular Cholesky factor");
    Ok(g.transpose())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenEntry {
    pub re: f64,
    pub im: f64,
    /// `‖Bx − λMx‖_{M⁻¹} / ‖x‖_M`.
    pub residual: f64,
    pub mode: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<EigenEntry>,
    pub max_real_part: f64,
    pub min_abs_real_part: f64,
    pub imaginary_detected: bool,
    /// Pairs whose residual exceeded the tolerance after refinement.
    pub unconverged: usize,
}

pub const EIGEN_RESIDUAL_TOL: f64 = 1e-8;
pub const IMAGINARY_AXIS_TOL: f64 = 1e-9;
const REFINE_ITERATIONS: usize = 4;

/// All eigenvalues of a real matrix from its real Schur form.
pub fn all_eigenvalues(g: &DMatrix<f64>) -> Result<Vec<C64>> {
    let schur = Schur::try_new(g.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Singular("Schur iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

fn to_complex(g: &DMatrix<f64>) -> DMatrix<C64> {
    g.map(|x| C64::new(x, 0.0))
}

/// Shift-invert refinement of an eigenvalue estimate: a few inverse
/// iterations with `(G − σ)`, then the Rayleigh quotient.
fn refine(gc: &DMatrix<C64>, estimate: C64) -> (C64, f64) {
    let n = gc.nrows();
    let scale = 1.0 + estimate.norm();
    let mut shift = estimate + C64::new(1e-11 * scale, 1e-11 * scale);
    let mut lu = None;
    for _ in 0..5 {
        let mut a = gc.clone();
        for i in 0..n {
            a[(i, i)] -= shift;
        }
        let f = a.lu();
        if f.is_invertible() {
            lu = Some(f);
            break;
        }
        shift += C64::new(1e-9 * scale, -1e-9 * scale);
    }
    let Some(lu) = lu else {
        return (estimate, f64::INFINITY);
    };
    let mut x = DVector::from_fn(n, |i, _| C64::new(1.0 + (i % 7) as f64 * 0.1, (i % 3) as f64 * 0.05));
    for _ in 0..REFINE_ITERATIONS {
        let Some(y) = lu.solve(&x) else { break };
        let nrm = y.norm();
        if !(nrm > 0.0 && nrm.is_finite()) {
            break;
        }
        x = y.unscale(nrm);
    }
    let gx = gc * &x;
    let lambda = x.dotc(&gx) / x.dotc(&x);
    let residual = (&gx - &x * lambda).norm() / x.norm();
    (lambda, residual)
}

fn spectrum_of_generator(g: &DMatrix<f64>, mode: u32, shift: C64, k: usize) -> Result<Vec<EigenEntry>> {
    let mut eig = all_eigenvalues(g)?;
    eig.sort_by(|a, b| (a - shift).norm().total_cmp(&(b - shift).norm()));
    eig.truncate(k);
    let gc = to_complex(g);
    Ok(eig
        .into_iter()
        .map(|e| {
            let (lambda, residual) = refine(&gc, e);
            EigenEntry { re: lambda.re, im: lambda.im, residual, mode }
        })
        .collect())
}

fn report(eigenvalues: Vec<EigenEntry>) -> SpectrumReport {
    let max_real_part = eigenvalues.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
    let min_abs_real_part = eigenvalues.iter().map(|e| e.re.abs()).fold(f64::INFINITY, f64::min);
    let unconverged = eigenvalues
        .iter()
        .filter(|e| e.residual.is_nan() || e.residual > EIGEN_RESIDUAL_TOL * (1.0 + e.im.hypot(e.re)))
        .count();
    SpectrumReport {
        imaginary_detected: min_abs_real_part <= IMAGINARY_AXIS_TOL,
        eigenvalues,
        max_real_part,
        min_abs_real_part,
        unconverged,
    }
}

/// The `k` pencil eigenvalues nearest `shift`, residual-certified.
pub fn eigenvalues_near(system: &ModeSystem, shift: C64, k: usize) -> Result<SpectrumReport> {
    Ok(report(spectrum_of_generator(system.whitening().generator(), system.mode(), shift, k)?))
}

/// Same as [`eigenvalues_near`] for an explicit pencil `B x = λ M x`.
pub fn pencil_eigenvalues_near(m: &DMatrix<f64>, b: &DMatrix<f64>, shift: C64, k: usize) -> Result<SpectrumReport> {
    let g = whitened_generator(m, b)?;
    Ok(report(spectrum_of_generator(&g, 0, shift, k)?))
}

/// `‖(iλ − G)⁻¹‖₂` by a dense SVD: the reciprocal of the smallest singular
/// value of `iλ − G`.
pub fn resolvent_norm_of_generator(g: &DMatrix<f64>, lambda: f64) -> f64 {
    let n = g.nrows();
    let mut a = to_complex(g).map(|x| -x);
    for i in 0..n {
        a[(i, i)] += C64::new(0.0, lambda);
    }
    let sv = a.singular_values();
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if smin > 0.0 {
        1.0 / smin
    } else {
        f64::INFINITY
    }
}

/// Energy-norm resolvent `sup ‖U‖_M / ‖F‖_M` over `(iλM − B)U = MF`.
pub fn resolvent_norm(system: &ModeSystem, lambda: f64) -> f64 {
    resolvent_norm_of_generator(system.whitening().generator(), lambda)
}

/// Resolvent evaluator that factors `G = Q T Qᴴ` once and then estimates
/// `‖(iλ − T)⁻¹‖₂` by power iteration with triangular solves.
#[derive(Debug, Clone)]
pub struct SchurResolvent {
    /// Upper triangular Schur factor, column-major.
    t: DMatrix<C64>,
}

const POWER_MAX_ITERATIONS: usize = 2000;
const POWER_TOL: f64 = 1e-11;

impl SchurResolvent {
    pub fn new(g: &DMatrix<f64>) -> Result<Self> {
        let schur = Schur::try_new(to_complex(g), f64::EPSILON, 10_000)
            .ok_or_else(|| Error::Singular("complex Schur iteration did not converge".into()))?;
        let (_, t) = schur.unpack();
        Ok(SchurResolvent { t })
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        self.t.diagonal().iter().copied().collect()
    }

    /// `z ← (iλ − T)⁻¹ z` in place.
    fn solve(&self, lambda: f64, z: &mut [C64]) -> bool {
        let n = z.len();
        let il = C64::new(0.0, lambda);
        for j in (0..n).rev() {
            let d = il - self.t[(j, j)];
            if d == C64::new(0.0, 0.0) {
                return false;
            }
            z[j] /= d;
            let zj = z[j];
            let col = self.t.column(j);
            for i in 0..j {
                z[i] += col[i] * zj;
            }
        }
        true
    }

    /// `w ← (iλ − T)⁻ᴴ w` in place.
    fn solve_adjoint(&self, lambda: f64, w: &mut [C64]) -> bool {
        let n = w.len();
        let il = C64::new(0.0, lambda);
        for i in 0..n {
            let col = self.t.column(i);
            let mut s = w[i];
            for k in 0..i {
                s += col[k].conj() * w[k];
            }
            let d = (il - self.t[(i, i)]).conj();
            if d == C64::new(0.0, 0.0) {
                return false;
            }
            w[i] = s / d;
        }
        true
    }

    /// Power iteration on `XᴴX`, `X = (iλ − T)⁻¹`, warm-started from `start`.
    pub fn norm_with_start(&self, lambda: f64, start: &mut Vec<C64>) -> f64 {
        let n = self.t.nrows();
        if start.len() != n {
            *start = (0..n).map(|i| C64::new(1.0, 0.37 * ((i * 7919) % 13) as f64 / 13.0)).collect();
        }
        let mut x = start.clone();
        let nrm = x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        x.iter_mut().for_each(|c| *c /= nrm);
        let mut sigma = 0.0;
        for _ in 0..POWER_MAX_ITERATIONS {
            let mut z = x.clone();
            if !self.solve(lambda, &mut z) {
                return f64::INFINITY;
            }
            let zn = z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if !zn.is_finite() {
                return f64::INFINITY;
            }
            if !self.solve_adjoint(lambda, &mut z) {
                return f64::INFINITY;
            }
            let wn = z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if !(wn > 0.0 && wn.is_finite()) {
                return if wn > 0.0 { f64::INFINITY } else { zn };
            }
            // ‖X x‖ for unit x converges upwards to σ_max(X).
            let converged = (zn - sigma).abs() <= POWER_TOL * zn;
            sigma = zn;
            x = z.into_iter().map(|c| c / wn).collect();
            if converged {
                break;
            }
        }
        *start = x;
        sigma
    }

    pub fn norm(&self, lambda: f64) -> f64 {
        let mut start = Vec::new();
        self.norm_with_start(lambda, &mut start)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolventSample {
    pub lambda: f64,
    pub norm: f64,
    pub mode_argmax: u32,
}

impl ResolventSample {
    /// Treated as an eigenvalue hit rather than a data point.
    pub fn is_sentinel(&self) -> bool {
        self.norm.is_nan() || self.norm > RESOLVENT_SENTINEL
    }
}

/// Logarithmic grid with `per_decade` points per decade on `[min, max]`.
pub fn log_grid(min: f64, max: f64, per_decade: usize) -> Vec<f64> {
    assert!(min > 0.0 && max >= min && per_decade >= 1);
    let decades = (max / min).log10();
    let n = (decades * per_decade as f64).round() as usize;
    if n == 0 {
        return vec![min];
    }
    (0..=n).map(|k| min * 10f64.powf(decades * k as f64 / n as f64)).collect()
}

/// Per-λ maximum of the resolvent norm over the mode set ("truncated"
/// operator norm).
pub fn sweep_resolvent(systems: &[ModeSystem], grid: &[f64]) -> Result<Vec<ResolventSample>> {
    if grid.is_empty() {
        return Err(Error::validation("lambda_grid", "must not be empty"));
    }
    if systems.is_empty() {
        return Err(Error::validation("modes", "must not be empty"));
    }
    let per_mode: Vec<(u32, Vec<f64>)> = systems
        .par_iter()
        .map(|s| {
            let r = SchurResolvent::new(s.whitening().generator())?;
            let mut start = Vec::new();
            let norms = grid.iter().map(|&l| r.norm_with_start(l, &mut start)).collect();
            Ok((s.mode(), norms))
        })
        .collect::<Result<_>>()?;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(k, &lambda)| {
            let (mode, norm) = per_mode
                .iter()
                .map(|(m, v)| (*m, v[k]))
                .fold((per_mode[0].0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
            ResolventSample { lambda, norm, mode_argmax: mode }
        })
        .collect())
}

pub fn samples_to_csv(samples: &[ResolventSample]) -> String {
    let mut out = String::from("lambda,norm,mode_argmax\n");
    for s in samples {
        let _ = writeln!(out, "{:.17e},{:.17e},{}", s.lambda, s.norm, s.mode_argmax);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthFit {
    pub alpha: f64,
    pub r_squared: f64,
    pub samples: usize,
    pub certified_ceiling: f64,
}

/// Log–log slope of the resolvent norm against `λ`.
pub fn estimate_growth_exponent(samples: &[ResolventSample]) -> Result<GrowthFit> {
    if samples.iter().any(|s| s.lambda <= 0.0) {
        return Err(Error::Fit("growth fit needs positive frequencies".into()));
    }
    let usable: Vec<&ResolventSample> = samples.iter().filter(|s| !s.is_sentinel() && s.norm > 0.0).collect();
    if usable.len() < 5 {
        return Err(Error::Fit(format!("growth exponent needs at least 5 finite samples, got {}", usable.len())));
    }
    let x: Vec<f64> = usable.iter().map(|s| s.lambda.ln()).collect();
    let y: Vec<f64> = usable.iter().map(|s| s.norm.ln()).collect();
    let line = fit_line(&x, &y)?;
    Ok(GrowthFit {
        alpha: line.slope,
        r_squared: line.r_squared,
        samples: line.samples,
        certified_ceiling: CERTIFIED_ALPHA_CEILING,
    })
}

/// Running maximum of the samples, i.e. `sup_{1 ≤ s ≤ λ} ‖(is − 𝒜)⁻¹‖`.
pub fn running_maximum(samples: &[ResolventSample]) -> Vec<ResolventSample> {
    let mut best: Option<ResolventSample> = None;
    samples
        .iter()
        .filter(|s| !s.is_sentinel())
        .map(|s| {
            let b = match best {
                Some(b) if b.norm >= s.norm => ResolventSample { lambda: s.lambda, ..b },
                _ => *s,
            };
            best = Some(b);
            b
        })
        .collect()
}

/// Maximum sample in each octave `[λ₀ 2ᵏ, λ₀ 2ᵏ⁺¹)` of the grid.
pub fn octave_maxima(samples: &[ResolventSample]) -> Vec<(f64, f64)> {
    let Some(first) = samples.first() else { return Vec::new() };
    let base = first.lambda;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for s in samples.iter().filter(|s| !s.is_sentinel()) {
        let k = ((s.lambda / base).log2() + 1e-12).floor() as i32;
        let lo = base * 2f64.powi(k);
        match out.last_mut() {
            Some((l, m)) if *l == lo => *m = m.max(s.norm),
            _ => out.push((lo, s.norm)),
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct AxisReport {
    pub clear: bool,
    /// Smallest `|Re λ|` over the pencil spectra of all modes.
    pub min_abs_real_part: f64,
    pub max_real_part: f64,
    pub grid_norms_finite: bool,
    pub max_grid_norm: f64,
}

/// `iℝ ∩ σ = ∅` check: no certified eigenvalue within `1e-9` of the axis
/// and finite resolvent norms on the grid.
pub fn check_imaginary_axis_clear(systems: &[ModeSystem], grid: &[f64]) -> Result<AxisReport> {
    const REFINED_PER_MODE: usize = 8;
    let per_mode: Vec<(f64, f64, f64)> = systems
        .par_iter()
        .map(|s| {
            let g = s.whitening().generator();
            let mut eig = all_eigenvalues(g)?;
            eig.sort_by(|a, b| a.re.abs().total_cmp(&b.re.abs()));
            let gc = to_complex(g);
            let mut min_re = f64::INFINITY;
            let mut max_re = eig.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
            for (i, e) in eig.iter().enumerate() {
                let re = if i < REFINED_PER_MODE { refine(&gc, *e).0.re } else { e.re };
                min_re = min_re.min(re.abs());
                max_re = max_re.max(re);
            }
            let r = SchurResolvent::new(g)?;
            let mut start = Vec::new();
            let max_norm = grid.iter().map(|&l| r.norm_with_start(l, &mut start)).fold(0.0, f64::max);
            Ok((min_re, max_re, max_norm))
        })
        .collect::<Result<_>>()?;
    let min_abs_real_part = per_mode.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let max_real_part = per_mode.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let max_grid_norm = per_mode.iter().map(|p| p.2).fold(0.0, f64::max);
    let grid_norms_finite = max_grid_norm <= RESOLVENT_SENTINEL;
    Ok(AxisReport {
        clear: min_abs_real_part > IMAGINARY_AXIS_TOL && grid_norms_finite,
        min_abs_real_part,
        max_real_part,
        grid_norms_finite,
        max_grid_norm,
    })
}
