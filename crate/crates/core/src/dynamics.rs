//! Time evolution of the semi-discrete system, energy bookkeeping and decay
//! fits.
//!
//! Stepping runs in whitened coordinates `y = Lᵀ U`, where the energy is
//! `½|y|²` and the implicit midpoint rule is an exact contraction with
//! `½|y⁺|² − ½|y|² = −dt · dissipation((y + y⁺)/2)`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{ModeSystem, StateVector};
use crate::error::{Error, Result};
use crate::fit::fit_line;

/// Energy split by subsystem.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct EnergyRecord {
    pub total: f64,
    pub plate_elastic: f64,
    pub plate_kinetic: f64,
    pub membrane_elastic: f64,
    pub membrane_kinetic: f64,
}

impl EnergyRecord {
    fn add(&mut self, other: &EnergyRecord) {
        self.total += other.total;
        self.plate_elastic += other.plate_elastic;
        self.plate_kinetic += other.plate_kinetic;
        self.membrane_elastic += other.membrane_elastic;
        self.membrane_kinetic += other.membrane_kinetic;
    }
}

fn energy_unchecked(system: &ModeSystem, state: &StateVector) -> EnergyRecord {
    let forms = &system.sparse;
    let u = state.u();
    let v = state.v();
    let (u, v) = (u.as_slice(), v.as_slice());
    let plate_elastic = 0.5 * forms.plate.quadratic(u);
    let plate_kinetic = 0.5 * forms.mass1.quadratic(v);
    let membrane_elastic = 0.5 * forms.grad2.quadratic(u);
    let membrane_kinetic = 0.5 * forms.mass2.quadratic(v);
    EnergyRecord {
        total: plate_elastic + plate_kinetic + membrane_elastic + membrane_kinetic,
        plate_elastic,
        plate_kinetic,
        membrane_elastic,
        membrane_kinetic,
    }
}

/// `E = ½(uᵀ K u + vᵀ M_v v)` and its four components.
pub fn energy(system: &ModeSystem, state: &StateVector) -> Result<EnergyRecord> {
    system.check_state(state)?;
    Ok(energy_unchecked(system, state))
}

fn dissipation_unchecked(system: &ModeSystem, state: &StateVector) -> f64 {
    let p = system.params();
    let v = state.v();
    let v = v.as_slice();
    let mut d = 0.0;
    if p.rho() > 0.0 {
        d += p.rho() * system.sparse.grad1.quadratic(v);
    }
    if p.beta() > 0.0 {
        d += p.beta() * system.sparse.mass2.quadratic(v);
    }
    d
}

/// `ρ‖∇v₁‖² + β‖v₂‖²`, the rate at which energy is lost.
pub fn dissipation(system: &ModeSystem, state: &StateVector) -> Result<f64> {
    system.check_state(state)?;
    Ok(dissipation_unchecked(system, state))
}

/// `F = ⟨u₁, v₁⟩ + ⟨u₂, v₂⟩`.
pub fn lyapunov_cross_term(system: &ModeSystem, state: &StateVector) -> Result<f64> {
    system.check_state(state)?;
    Ok(cross_term_unchecked(system, state))
}

fn cross_term_unchecked(system: &ModeSystem, state: &StateVector) -> f64 {
    let u = state.u();
    let v = state.v();
    system.sparse.mass1.bilinear(u.as_slice(), v.as_slice()) + system.sparse.mass2.bilinear(u.as_slice(), v.as_slice())
}

/// `‖𝒜U‖` in the energy norm.
pub fn graph_norm(system: &ModeSystem, state: &StateVector) -> Result<f64> {
    system.check_state(state)?;
    let y = system.to_whitened(state);
    Ok((system.whitening().generator() * y).norm())
}

/// One implicit midpoint step of the pencil `M U′ = B U`.
pub fn midpoint_step_pencil(m: &DMatrix<f64>, b: &DMatrix<f64>, u: &DVector<f64>, dt: f64) -> Result<DVector<f64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::validation("dt", format!("must be positive, got {dt}")));
    }
    let lhs = m - b * (0.5 * dt);
    let rhs = (m + b * (0.5 * dt)) * u;
    lhs.lu().solve(&rhs).ok_or_else(|| Error::Singular("M − (dt/2)B".into()))
}

/// Solves `(M − (dt/2)B) U⁺ = (M + (dt/2)B) U`.
pub fn step_implicit_midpoint(system: &ModeSystem, state: &StateVector, dt: f64) -> Result<StateVector> {
    system.check_state(state)?;
    let prop = MidpointPropagator::new(system, dt)?;
    let y = system.to_whitened(state);
    Ok(system.from_whitened(&prop.apply(&y)))
}

/// Precomputed midpoint map `(I − (dt/2)G)⁻¹(I + (dt/2)G)` in whitened
/// coordinates.
#[derive(Debug, Clone)]
pub struct MidpointPropagator {
    map: DMatrix<f64>,
    dt: f64,
}

impl MidpointPropagator {
    pub fn new(system: &ModeSystem, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::validation("dt", format!("must be positive, got {dt}")));
        }
        let g = system.whitening().generator();
        let n = g.nrows();
        let id = DMatrix::<f64>::identity(n, n);
        let lhs = &id - g * (0.5 * dt);
        let rhs = &id + g * (0.5 * dt);
        let map = lhs.lu().solve(&rhs).ok_or_else(|| Error::Singular("I − (dt/2)G".into()))?;
        Ok(MidpointPropagator { map, dt })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn apply(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.map * y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    DisplacementBump,
    VelocityBump,
}

/// Reproducible initial data: `(r_outer − r)²(r − r_interface)²` on the
/// annulus and `(r_interface² − r²) r^m` on the disk, placed in either the
/// displacement or the velocity block. Both profiles vanish on the
/// interface.
pub fn default_initial_datum(system: &ModeSystem, kind: InitialKind) -> StateVector {
    let geom = system.geometry();
    let (ri, ro) = (geom.r_interface(), geom.r_outer());
    let m = system.mode() as i32;
    let plate = move |r: f64| (ro - r).powi(2) * (r - ri).powi(2);
    let plate_d = move |r: f64| -2.0 * (ro - r) * (r - ri).powi(2) + 2.0 * (ro - r).powi(2) * (r - ri);
    let membrane = move |r: f64| (ri * ri - r * r) * r.powi(m);
    let bump = system.block_from_profiles((plate, plate_d), membrane);
    let zero = DVector::zeros(system.block_dim());
    match kind {
        InitialKind::DisplacementBump => StateVector::from_blocks(system.mode(), &bump, &zero),
        InitialKind::VelocityBump => StateVector::from_blocks(system.mode(), &zero, &bump),
    }
}

/// Per-mode time series.
#[derive(Debug, Clone, Serialize)]
pub struct ModeTrace {
    pub mode: u32,
    pub energy: Vec<EnergyRecord>,
    pub dissipation: Vec<f64>,
    pub cross_term: Vec<f64>,
    /// `|E(Uₙ₊₁) − E(Uₙ) + dt·dissipation(midpoint)| / E(Uₙ)` for each step.
    pub balance_residual: Vec<f64>,
    /// Largest `‖Uₙ₊₁‖_M / ‖Uₙ‖_M`.
    pub max_norm_ratio: f64,
    pub graph_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyTrace {
    pub dt: f64,
    pub times: Vec<f64>,
    pub modes: Vec<ModeTrace>,
    pub total: Vec<EnergyRecord>,
    pub dissipation: Vec<f64>,
    pub cross_term: Vec<f64>,
    /// `‖𝒜U₀‖` over all simulated modes.
    pub graph_norm: f64,
}

fn whitened_dissipation(system: &ModeSystem, y: &DVector<f64>) -> f64 {
    let n = system.block_dim();
    let yv = y.rows(n, n);
    yv.dot(&(system.whitening().damping() * yv))
}

fn simulate_mode(system: &ModeSystem, initial: &StateVector, steps: usize, dt: f64) -> Result<ModeTrace> {
    system.check_state(initial)?;
    let prop = MidpointPropagator::new(system, dt)?;
    let mut y = system.to_whitened(initial);
    // Totals come from the whitened norm, which avoids the conditioning of
    // the stiffness forms; the components stay form-based.
    let record = |state: &StateVector, y: &DVector<f64>| EnergyRecord {
        total: 0.5 * y.norm_squared(),
        ..energy_unchecked(system, state)
    };
    let mut trace = ModeTrace {
        mode: system.mode(),
        energy: Vec::with_capacity(steps + 1),
        dissipation: Vec::with_capacity(steps + 1),
        cross_term: Vec::with_capacity(steps + 1),
        balance_residual: Vec::with_capacity(steps),
        max_norm_ratio: 0.0,
        graph_norm: (system.whitening().generator() * &y).norm(),
    };
    trace.energy.push(record(initial, &y));
    trace.dissipation.push(dissipation_unchecked(system, initial));
    trace.cross_term.push(cross_term_unchecked(system, initial));
    for _ in 0..steps {
        let y_next = prop.apply(&y);
        let next = system.from_whitened(&y_next);
        let (e0, e1) = (0.5 * y.norm_squared(), 0.5 * y_next.norm_squared());
        let mid = (&y + &y_next) * 0.5;
        let balance = e1 - e0 + dt * whitened_dissipation(system, &mid);
        trace.balance_residual.push(if e0 > 0.0 { balance.abs() / e0 } else { balance.abs() });
        let (n0, n1) = (y.norm(), y_next.norm());
        if n0 > 0.0 {
            trace.max_norm_ratio = trace.max_norm_ratio.max(n1 / n0);
        }
        trace.energy.push(record(&next, &y_next));
        trace.dissipation.push(dissipation_unchecked(system, &next));
        trace.cross_term.push(cross_term_unchecked(system, &next));
        y = y_next;
    }
    Ok(trace)
}

/// Evolves every mode independently over `[0, horizon]` and sums the
/// per-mode records.
pub fn simulate(systems: &[ModeSystem], initial: &[StateVector], horizon: f64, dt: f64) -> Result<EnergyTrace> {
    if systems.len() != initial.len() {
        return Err(Error::Dimension { expected: systems.len(), got: initial.len() });
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::validation("T", format!("must be positive, got {horizon}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::validation("dt", format!("must be positive, got {dt}")));
    }
    let steps = (horizon / dt + 1e-9).floor() as usize;
    let modes: Vec<ModeTrace> = systems
        .par_iter()
        .zip(initial.par_iter())
        .map(|(s, u0)| simulate_mode(s, u0, steps, dt))
        .collect::<Result<_>>()?;

    let times = (0..=steps).map(|k| k as f64 * dt).collect();
    let mut total = vec![EnergyRecord::default(); steps + 1];
    let mut dissipation = vec![0.0; steps + 1];
    let mut cross_term = vec![0.0; steps + 1];
    let mut graph_sq = 0.0;
    for mt in &modes {
        for k in 0..=steps {
            total[k].add(&mt.energy[k]);
            dissipation[k] += mt.dissipation[k];
            cross_term[k] += mt.cross_term[k];
        }
        graph_sq += mt.graph_norm * mt.graph_norm;
    }
    Ok(EnergyTrace { dt, times, modes, total, dissipation, cross_term, graph_norm: graph_sq.sqrt() })
}

impl EnergyTrace {
    pub fn energies(&self) -> Vec<f64> {
        self.total.iter().map(|r| r.total).collect()
    }

    /// `‖U(t)‖ = √(2E(t))`.
    pub fn norms(&self) -> Vec<f64> {
        self.total.iter().map(|r| (2.0 * r.total).sqrt()).collect()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn max_balance_residual(&self) -> f64 {
        self.modes.iter().flat_map(|m| m.balance_residual.iter().copied()).fold(0.0, f64::max)
    }

    pub fn max_norm_ratio(&self) -> f64 {
        self.modes.iter().map(|m| m.max_norm_ratio).fold(0.0, f64::max)
    }

    /// CSV with header `t,E_total,E_plate_el,E_plate_kin,E_mem_el,E_mem_kin,dissipation,F`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,E_total,E_plate_el,E_plate_kin,E_mem_el,E_mem_kin,dissipation,F\n");
        for (k, t) in self.times.iter().enumerate() {
            let e = &self.total[k];
            let _ = writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                t,
                e.total,
                e.plate_elastic,
                e.plate_kinetic,
                e.membrane_elastic,
                e.membrane_kinetic,
                self.dissipation[k],
                self.cross_term[k]
            );
        }
        out
    }
}

/// How the energy behaved along a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    Constant,
    NonIncreasing,
    StrictlyDecreasing,
    Increasing,
}

/// Classifies `E` with relative tolerance `tol` on `E(0)`.
pub fn classify_energy(energies: &[f64], tol: f64) -> Monotonicity {
    let Some(&e0) = energies.first() else { return Monotonicity::Constant };
    let scale = e0.abs().max(f64::MIN_POSITIVE);
    if energies.iter().all(|e| (e - e0).abs() <= tol * scale) {
        return Monotonicity::Constant;
    }
    let steps = energies.windows(2);
    if steps.clone().any(|w| w[1] > w[0] + tol * scale) {
        return Monotonicity::Increasing;
    }
    if energies.windows(2).all(|w| w[1] < w[0]) {
        Monotonicity::StrictlyDecreasing
    } else {
        Monotonicity::NonIncreasing
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovReport {
    pub f_values: Vec<f64>,
    /// Smallest `c₅ ∈ {1, 2, 4, …, 2²⁰}` for which `c₅E + F` is
    /// non-increasing on the window.
    pub c5: Option<f64>,
}

/// Searches the power-of-two grid for a multiplier making `c₅E + F`
/// non-increasing on samples with `t_start <= t <= t_end`.
pub fn lyapunov_report(trace: &EnergyTrace, t_start: f64, t_end: f64) -> LyapunovReport {
    let idx: Vec<usize> = trace
        .times
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= t_start - 1e-12 && t <= t_end + 1e-12)
        .map(|(i, _)| i)
        .collect();
    let e: Vec<f64> = idx.iter().map(|&i| trace.total[i].total).collect();
    let f: Vec<f64> = idx.iter().map(|&i| trace.cross_term[i]).collect();
    let c5 = lyapunov_multiplier(&e, &f);
    LyapunovReport { f_values: f, c5 }
}

/// Smallest power of two `c ≤ 2²⁰` with `cE + F` non-increasing.
pub fn lyapunov_multiplier(e: &[f64], f: &[f64]) -> Option<f64> {
    let scale = e.iter().chain(f).fold(0.0f64, |a, v| a.max(v.abs()));
    (0..=20).map(|k| f64::from(1u32 << k)).find(|&c| {
        let tol = 1e-12 * (c + 1.0) * scale;
        e.windows(2).zip(f.windows(2)).all(|(we, wf)| c * we[1] + wf[1] <= c * we[0] + wf[0] + tol)
    })
}

/// Time window `[start, end]` for fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    /// The last `fraction` of `[0, horizon]`.
    pub fn latter(horizon: f64, fraction: f64) -> Self {
        Window { start: horizon * (1.0 - fraction), end: horizon }
    }

    fn select<'a>(&self, t: &'a [f64], y: &'a [f64]) -> (Vec<f64>, Vec<f64>) {
        t.iter()
            .zip(y)
            .filter(|(&ti, _)| ti >= self.start - 1e-12 && ti <= self.end + 1e-12)
            .map(|(&ti, &yi)| (ti, yi))
            .unzip()
    }
}

pub const MIN_FIT_SAMPLES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub rate: f64,
    pub r_squared: f64,
    pub samples: usize,
}

/// Slope of `log E` on the window: `E ≈ C e^{−κt}`.
pub fn fit_exponential_rate(t: &[f64], energy: &[f64], window: Window) -> Result<RateFit> {
    if energy.first().is_some_and(|&e0| e0 == 0.0) {
        return Err(Error::Fit("zero datum".into()));
    }
    let (x, y) = window.select(t, energy);
    if x.len() < MIN_FIT_SAMPLES {
        return Err(Error::Fit(format!("window holds {} samples, need {MIN_FIT_SAMPLES}", x.len())));
    }
    if y.iter().any(|&e| e <= 0.0) {
        return Err(Error::Fit("nonpositive energy in window".into()));
    }
    let logs: Vec<f64> = y.iter().map(|e| e.ln()).collect();
    let line = fit_line(&x, &logs)?;
    Ok(RateFit { rate: -line.slope, r_squared: line.r_squared, samples: line.samples })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolynomialFit {
    /// Exponent `p` in `‖U(t)‖ ≈ C t^{−p}`.
    pub p: f64,
    pub r_squared: f64,
    pub samples: usize,
    /// `sup_{t ∈ [1, T]} t^{1/30} ‖U(t)‖ / ‖𝒜U₀‖`.
    pub certificate: f64,
}

/// Log–log slope of `‖U(t)‖` on the window plus the order-1/30
/// certificate.
pub fn fit_polynomial_rate(t: &[f64], norm: &[f64], graph_norm: f64, window: Window) -> Result<PolynomialFit> {
    if norm.first().is_some_and(|&n0| n0 == 0.0) || graph_norm == 0.0 {
        return Err(Error::Fit("zero datum".into()));
    }
    if window.start <= 0.0 {
        return Err(Error::Fit("polynomial fit window must start after t = 0".into()));
    }
    let (x, y) = window.select(t, norm);
    if x.len() < MIN_FIT_SAMPLES {
        return Err(Error::Fit(format!("window holds {} samples, need {MIN_FIT_SAMPLES}", x.len())));
    }
    if y.iter().any(|&v| v <= 0.0) {
        return Err(Error::Fit("nonpositive norm in window".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let line = fit_line(&lx, &ly)?;
    let certificate = t
        .iter()
        .zip(norm)
        .filter(|(&ti, _)| ti >= 1.0)
        .map(|(&ti, &n)| ti.powf(1.0 / 30.0) * n / graph_norm)
        .fold(0.0, f64::max);
    Ok(PolynomialFit { p: -line.slope, r_squared: line.r_squared, samples: line.samples, certificate })
}

impl EnergyTrace {
    pub fn fit_exponential(&self, window: Window) -> Result<RateFit> {
        fit_exponential_rate(&self.times, &self.energies(), window)
    }

    pub fn fit_polynomial(&self, window: Window) -> Result<PolynomialFit> {
        fit_polynomial_rate(&self.times, &self.norms(), self.graph_norm, window)
    }
}
