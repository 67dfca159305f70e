//! Independent checks of the discretization: a brute-force Cartesian
//! quadrature of the bilinear forms, Bessel-zero eigenvalue oracles, and
//! strong-form transmission residuals evaluated by finite differences.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{Cholesky, DVector, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::{
    assemble_grad_form, assemble_mass, assemble_mode_system, assemble_plate_form, build_radial_mesh, Discretization,
    Domain, GaussLegendre, ModeSystem, RadialBasis, StateVector,
};
use crate::error::{Error, Result};
use crate::model::{AnnulusGeometry, PhysicalParams};
use crate::spectral::static_solve;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormKind {
    Plate,
    Grad,
    Mass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleGrid {
    pub radial: usize,
    pub angular: usize,
}

impl Default for OracleGrid {
    fn default() -> Self {
        OracleGrid { radial: 512, angular: 512 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleValue {
    pub value: f64,
    /// Change against the half-resolution grid.
    pub quadrature_error: f64,
    /// Change when the finite-difference step is doubled.
    pub stencil_error: f64,
}

impl OracleValue {
    pub fn error_estimate(&self) -> f64 {
        self.quadrature_error + self.stencil_error
    }
}

const HESSIAN_STEP: f64 = 2e-3;
const GRADIENT_STEP: f64 = 1e-3;

fn chebyshev(m: u32, c: f64) -> f64 {
    let (mut t0, mut t1) = (1.0, c);
    if m == 0 {
        return 1.0;
    }
    for _ in 1..m {
        let t2 = 2.0 * c * t1 - t0;
        t0 = t1;
        t1 = t2;
    }
    t1
}

/// `u(x, y) = f(r) cos(mθ)` evaluated in Cartesian coordinates.
fn cartesian_field(profile: &(dyn Fn(f64) -> f64 + Sync), m: u32, x: f64, y: f64) -> f64 {
    let r = x.hypot(y);
    if r == 0.0 {
        return if m == 0 { profile(0.0) } else { 0.0 };
    }
    profile(r) * chebyshev(m, (x / r).clamp(-1.0, 1.0))
}

fn d1(g: impl Fn(f64) -> f64, h: f64) -> f64 {
    (g(-2.0 * h) - 8.0 * g(-h) + 8.0 * g(h) - g(2.0 * h)) / (12.0 * h)
}

fn d2(g: impl Fn(f64) -> f64, h: f64) -> f64 {
    (-g(-2.0 * h) + 16.0 * g(-h) - 30.0 * g(0.0) + 16.0 * g(h) - g(2.0 * h)) / (12.0 * h * h)
}

/// Fourth-order central-difference Hessian `[u_xx, u_xy, u_yy]`.
pub fn cartesian_hessian(u: &dyn Fn(f64, f64) -> f64, x: f64, y: f64, h: f64) -> [f64; 3] {
    let uxx = d2(|s| u(x + s, y), h);
    let uyy = d2(|s| u(x, y + s), h);
    let uxy = d1(|s| d1(|t| u(x + t, y + s), h), h);
    [uxx, uxy, uyy]
}

fn cartesian_gradient(u: &dyn Fn(f64, f64) -> f64, x: f64, y: f64, h: f64) -> [f64; 2] {
    [d1(|s| u(x + s, y), h), d1(|s| u(x, y + s), h)]
}

fn polar_product_quadrature(
    profile: &(dyn Fn(f64) -> f64 + Sync),
    m: u32,
    mu: f64,
    which: FormKind,
    (a, b): (f64, f64),
    grid: OracleGrid,
    step_scale: f64,
) -> f64 {
    let rule = GaussLegendre::new(grid.radial);
    let nodes: Vec<(f64, f64)> = rule.on_interval(a, b).collect();
    let dtheta = 2.0 * PI / grid.angular as f64;
    let total: f64 = nodes
        .par_iter()
        .map(|&(r, w)| {
            let u = |x: f64, y: f64| cartesian_field(profile, m, x, y);
            let mut ring = 0.0;
            for j in 0..grid.angular {
                let theta = (j as f64 + 0.5) * dtheta;
                let (x, y) = (r * theta.cos(), r * theta.sin());
                ring += match which {
                    FormKind::Mass => u(x, y).powi(2),
                    FormKind::Grad => {
                        let g = cartesian_gradient(&u, x, y, GRADIENT_STEP * step_scale);
                        g[0] * g[0] + g[1] * g[1]
                    }
                    FormKind::Plate => {
                        let [xx, xy, yy] = cartesian_hessian(&u, x, y, HESSIAN_STEP * step_scale);
                        mu * (xx + yy).powi(2) + (1.0 - mu) * (xx * xx + 2.0 * xy * xy + yy * yy)
                    }
                };
            }
            w * r * ring * dtheta
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    let angular = if m == 0 { 2.0 * PI } else { PI };
    total / angular
}

/// Brute-force value of the plate, gradient or mass form of
/// `u = f(r) cos(mθ)` over the radial interval `[a, b]`, using Cartesian
/// finite-difference derivatives on a Gauss × trapezoid polar grid.
///
/// The result is divided by the angular factor (`2π` for `m = 0`, `π`
/// otherwise) so it compares directly with the per-mode assembled forms.
/// `tolerance` bounds the relative error estimate.
pub fn cartesian_oracle_form(
    profile: &(dyn Fn(f64) -> f64 + Sync),
    m: u32,
    mu: f64,
    which: FormKind,
    interval: (f64, f64),
    grid: OracleGrid,
    tolerance: f64,
) -> Result<OracleValue> {
    if grid.radial < 8 || grid.angular < 8 || grid.angular <= 2 * m as usize {
        return Err(Error::Diagnostic(format!("oracle grid {}x{} too coarse", grid.radial, grid.angular)));
    }
    let half = OracleGrid { radial: grid.radial / 2, angular: grid.angular / 2 };
    let fine = polar_product_quadrature(profile, m, mu, which, interval, grid, 1.0);
    let coarse = polar_product_quadrature(profile, m, mu, which, interval, half, 1.0);
    let stencil_error = match which {
        FormKind::Mass => 0.0,
        _ => (coarse - polar_product_quadrature(profile, m, mu, which, interval, half, 2.0)).abs(),
    };
    let out = OracleValue { value: fine, quadrature_error: (fine - coarse).abs(), stencil_error };
    let bound = tolerance * fine.abs().max(f64::MIN_POSITIVE);
    if (out.error_estimate().is_nan() || out.error_estimate() > bound) && fine != 0.0 {
        return Err(Error::Diagnostic(format!(
            "oracle grid too coarse: estimated error {:.3e} exceeds tolerance",
            out.error_estimate()
        )));
    }
    Ok(out)
}

/// `r^p Σ c_k r^{s k}`, a smooth radial profile with closed-form derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothProfile {
    pub power: u32,
    pub stride: u32,
    pub coeffs: Vec<f64>,
}

impl SmoothProfile {
    /// Random quintic, for the annulus.
    pub fn random_annulus(rng: &mut impl Rng) -> Self {
        SmoothProfile { power: 0, stride: 1, coeffs: (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect() }
    }

    /// `r^m` times a random cubic in `r²`, smooth through the origin.
    pub fn random_disk(rng: &mut impl Rng, m: u32) -> Self {
        SmoothProfile { power: m, stride: 2, coeffs: (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect() }
    }

    pub fn value(&self, r: f64) -> f64 {
        self.coeffs.iter().enumerate().map(|(k, c)| c * r.powi((self.power + self.stride * k as u32) as i32)).sum()
    }

    pub fn derivative(&self, r: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let e = self.power + self.stride * k as u32;
                if e == 0 {
                    0.0
                } else {
                    c * f64::from(e) * r.powi(e as i32 - 1)
                }
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleComparison {
    pub which: FormKind,
    pub mode: u32,
    pub assembled: f64,
    pub oracle: OracleValue,
    /// Change of the assembled value against the half-resolution mesh.
    pub interpolation_error: f64,
    pub relative_difference: f64,
}

impl OracleComparison {
    /// Agreement within the combined error estimate and under `cap`.
    pub fn agrees(&self, cap: f64) -> bool {
        let scale = self.oracle.value.abs().max(f64::MIN_POSITIVE);
        let diff = (self.assembled - self.oracle.value).abs();
        diff <= self.oracle.error_estimate() + self.interpolation_error + 1e-12 * scale
            && self.relative_difference <= cap
    }
}

fn assembled_value(profile: &SmoothProfile, domain: Domain, n: usize, m: u32, mu: f64, which: FormKind) -> Result<f64> {
    let mesh = build_radial_mesh(domain, n)?;
    let basis = if domain.contains_origin() { RadialBasis::for_mode(mesh, m)? } else { RadialBasis::full(mesh) };
    let a = match which {
        FormKind::Mass => assemble_mass(&basis),
        FormKind::Grad => assemble_grad_form(&basis, m)?,
        FormKind::Plate => assemble_plate_form(&basis, m, mu)?,
    };
    let c = basis.interpolate(|r| profile.value(r), |r| profile.derivative(r));
    Ok(c.dot(&(a * &c)))
}

/// Assembled form of the interpolant at `n` elements against the Cartesian
/// oracle.
pub fn compare_with_oracle(
    profile: &SmoothProfile,
    domain: Domain,
    n: usize,
    m: u32,
    mu: f64,
    which: FormKind,
    grid: OracleGrid,
) -> Result<OracleComparison> {
    let fine = assembled_value(profile, domain, n, m, mu, which)?;
    let coarse = assembled_value(profile, domain, (n / 2).max(1), m, mu, which)?;
    let f = |r: f64| profile.value(r);
    let oracle = cartesian_oracle_form(&f, m, mu, which, domain.bounds(), grid, 1e-6)?;
    Ok(OracleComparison {
        which,
        mode: m,
        assembled: fine,
        oracle,
        interpolation_error: (fine - coarse).abs(),
        relative_difference: (fine - oracle.value).abs() / oracle.value.abs().max(f64::MIN_POSITIVE),
    })
}

fn bessel_series(n: u32, x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = half.powi(n as i32) / (1..=n).map(f64::from).product::<f64>();
    let mut sum = term;
    let q = -half * half;
    for k in 1..200 {
        term *= q / (f64::from(k) * f64::from(k + n));
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

fn bessel_trapezoid(n: u32, x: f64) -> f64 {
    let points = 64 + 2 * (x.abs().ceil() as usize + n as usize);
    let dt = 2.0 * PI / points as f64;
    let s: f64 = (0..points)
        .map(|k| {
            let t = k as f64 * dt;
            (f64::from(n) * t - x * t.sin()).cos()
        })
        .sum();
    s / points as f64
}

/// `J_n(x)`: power series for small arguments, otherwise the periodic
/// trapezoid rule on `(1/2π) ∫ cos(nτ − x sin τ) dτ`, which converges
/// geometrically.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    if x.abs() < 8.0 {
        bessel_series(n, x)
    } else {
        bessel_trapezoid(n, x)
    }
}

/// `index`-th positive zero of `J_order`, by sign-change scan and bisection.
pub fn bessel_zero(order: u32, index: u32) -> Result<f64> {
    if order > 10 || index == 0 || index > 10 {
        return Err(Error::validation("bessel_zero", format!("order {order}, index {index} outside 0..=10 × 1..=10")));
    }
    const SCAN: f64 = 0.05;
    let mut a = f64::from(order).max(0.1);
    let mut fa = bessel_j(order, a);
    let mut found = 0;
    let limit = f64::from(order) + 4.0 * f64::from(index) + 20.0;
    while a < limit {
        let b = a + SCAN;
        let fb = bessel_j(order, b);
        if fa == 0.0 || fa.signum() != fb.signum() {
            found += 1;
            if found == index {
                let (mut lo, mut hi, mut flo) = (a, b, fa);
                while hi - lo > 1e-13 {
                    let mid = 0.5 * (lo + hi);
                    let fm = bessel_j(order, mid);
                    if fm == 0.0 {
                        return Ok(mid);
                    }
                    if fm.signum() == flo.signum() {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                }
                return Ok(0.5 * (lo + hi));
            }
        }
        a = b;
        fa = fb;
    }
    Err(Error::Bracketing { order, index })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenCheck {
    pub computed: f64,
    pub oracle: f64,
    pub relative_error: f64,
}

/// Lowest `k` eigenvalues of the disk Dirichlet Laplacian in mode `m` (the
/// interface DOF clamped) against `(j_{m,k} / r_interface)²`.
pub fn disk_dirichlet_eigencheck(n2: usize, m: u32, k: usize, r_interface: f64) -> Result<Vec<EigenCheck>> {
    let mesh = build_radial_mesh(Domain::Disk { radius: r_interface }, n2)?;
    let basis = RadialBasis::for_mode(mesh, m)?;
    let boundary = basis
        .value_dof(basis.mesh().n_nodes() - 1)
        .ok_or_else(|| Error::Diagnostic("disk basis lacks an interface DOF".into()))?;
    let keep: Vec<usize> = (0..basis.n_dofs()).filter(|&i| i != boundary).collect();
    if keep.len() < k {
        return Err(Error::Diagnostic(format!("{} interior DOFs cannot supply {k} eigenvalues", keep.len())));
    }
    let g = assemble_grad_form(&basis, m)?.select_rows(&keep).select_columns(&keep);
    let mass = assemble_mass(&basis).select_rows(&keep).select_columns(&keep);
    let l =
        Cholesky::new(mass).ok_or_else(|| Error::Singular("disk mass matrix not positive definite".into()))?.unpack();
    let x = l.solve_lower_triangular(&g).expect("nonsingular factor");
    let mut a = l.solve_lower_triangular(&x.transpose()).expect("nonsingular factor");
    a = (&a + a.transpose()) * 0.5;
    let mut eig: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    (0..k)
        .map(|i| {
            let j = bessel_zero(m, i as u32 + 1)? / r_interface;
            let oracle = j * j;
            Ok(EigenCheck { computed: eig[i], oracle, relative_error: (eig[i] - oracle).abs() / oracle })
        })
        .collect()
}

/// Value and first three radial derivatives of a profile at a point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RadialJet3 {
    pub f: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

/// Angular-reduced `𝓑₁u = Δu + (1−μ)B₁u` on a circle with `ν = −e_r`,
/// `τ = −e_θ`: `f″ + μ (f′/r − m² f / r²)`.
pub fn polar_bending_moment(m: u32, mu: f64, r: f64, j: &RadialJet3) -> f64 {
    let m2 = f64::from(m * m);
    j.d2 + mu * (j.d1 / r - m2 * j.f / (r * r))
}

/// Angular-reduced `𝓑₂u = ∂_νΔu + (1−μ)∂_τB₂u` on a circle with `ν = −e_r`,
/// `τ = −e_θ`: `−(Δ_m f)′ + (1−μ) m² (f′/r − f/r²) / r`.
pub fn polar_shear(m: u32, mu: f64, r: f64, j: &RadialJet3) -> f64 {
    let m2 = f64::from(m * m);
    let dlap = j.d3 + j.d2 / r - j.d1 / (r * r) - m2 * j.d1 / (r * r) + 2.0 * m2 * j.f / (r * r * r);
    let twist = j.d1 / r - j.f / (r * r);
    -dlap + (1.0 - mu) * m2 * twist / r
}

/// `(𝓑₁u, 𝓑₂u)` of a Cartesian field at the point of the circle of radius
/// `r` at angle `theta`, by nested finite differences.
pub fn cartesian_interface_operators(u: &dyn Fn(f64, f64) -> f64, mu: f64, r: f64, theta: f64) -> (f64, f64) {
    let h = HESSIAN_STEP;
    let nu = |x: f64, y: f64| {
        let n = x.hypot(y);
        [-x / n, -y / n]
    };
    let tau = |x: f64, y: f64| {
        let n = x.hypot(y);
        [y / n, -x / n]
    };
    let quad = |a: [f64; 2], hs: [f64; 3], b: [f64; 2]| {
        a[0] * (hs[0] * b[0] + hs[1] * b[1]) + a[1] * (hs[1] * b[0] + hs[2] * b[1])
    };
    let (x, y) = (r * theta.cos(), r * theta.sin());
    let hs = cartesian_hessian(u, x, y, h);
    let t = tau(x, y);
    let n = nu(x, y);
    let b1 = hs[0] + hs[2] - (1.0 - mu) * quad(t, hs, t);

    let lap = |px: f64, py: f64| {
        let q = cartesian_hessian(u, px, py, h);
        q[0] + q[2]
    };
    let b2_field = |px: f64, py: f64| quad(tau(px, py), cartesian_hessian(u, px, py, h), nu(px, py));
    let s = 2e-2;
    let dn_lap = d1(|e| lap(x + e * n[0], y + e * n[1]), s);
    let dt_b2 = d1(|e| b2_field(x + e * t[0], y + e * t[1]), s);
    (b1, dn_lap + (1.0 - mu) * dt_b2)
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceResidualReport {
    pub mode: u32,
    pub h_annulus: f64,
    pub h_disk: f64,
    /// `|u₁ − u₂|` and `|v₁ − v₂|` at the interface.
    pub continuity: f64,
    pub b1: f64,
    pub b2: f64,
    /// Largest of `|u₁|, |∂_r u₁|, |v₁|, |∂_r v₁|` at the outer circle.
    pub clamped: f64,
}

// One-sided five-point stencils at x₀ on nodes x₀, x₀+h, …, x₀+4h.
const FWD_D1: [f64; 5] = [-25.0 / 12.0, 4.0, -3.0, 4.0 / 3.0, -0.25];
const FWD_D2: [f64; 5] = [35.0 / 12.0, -26.0 / 3.0, 19.0 / 2.0, -14.0 / 3.0, 11.0 / 12.0];
const FWD_D3: [f64; 5] = [-5.0 / 2.0, 9.0, -12.0, 7.0, -3.0 / 2.0];

fn one_sided_jet(samples: &[f64; 5], h: f64) -> RadialJet3 {
    let apply = |w: &[f64; 5]| w.iter().zip(samples).map(|(a, b)| a * b).sum::<f64>();
    RadialJet3 { f: samples[0], d1: apply(&FWD_D1) / h, d2: apply(&FWD_D2) / (h * h), d3: apply(&FWD_D3) / (h * h * h) }
}

fn nodal_samples(basis: &RadialBasis, coeffs: &DVector<f64>, from_end: bool) -> Result<[f64; 5]> {
    let nodes = basis.mesh().nodes();
    if nodes.len() < 5 {
        return Err(Error::Diagnostic(format!(
            "mesh with {} elements is too coarse for the width-4 stencil",
            nodes.len() - 1
        )));
    }
    let mut out = [0.0; 5];
    for (k, o) in out.iter_mut().enumerate() {
        let r = if from_end { nodes[nodes.len() - 1 - k] } else { nodes[k] };
        *o = basis.evaluate(coeffs, r).map(|j| j.value).unwrap_or(0.0);
    }
    Ok(out)
}

/// Strong-form transmission and clamping residuals of a discrete state at
/// the interface, from one-sided differences of nodal values. `∂_ν = −∂_r`
/// on the interface.
pub fn transmission_residuals(system: &ModeSystem, state: &StateVector) -> Result<TraceResidualReport> {
    system.check_state(state)?;
    let m = system.mode();
    let mu = system.params().mu();
    let rho = system.params().rho();
    let ri = system.geometry().r_interface();
    let ro = system.geometry().r_outer();
    let ab = system.annulus_basis();
    let db = system.disk_basis();
    let u1 = system.annulus_coefficients(&state.u());
    let v1 = system.annulus_coefficients(&state.v());
    let u2 = system.disk_coefficients(&state.u());
    let v2 = system.disk_coefficients(&state.v());

    let (h1, h2) = (ab.mesh().h(), db.mesh().h());
    let ju1 = one_sided_jet(&nodal_samples(ab, &u1, false)?, h1);
    let jv1 = one_sided_jet(&nodal_samples(ab, &v1, false)?, h1);
    // Samples run inwards, so the first derivative flips sign.
    let du2 = -one_sided_jet(&nodal_samples(db, &u2, true)?, h2).d1;

    let eval = |b: &RadialBasis, c: &DVector<f64>, r: f64| b.evaluate(c, r).unwrap_or_default();
    let continuity = (eval(ab, &u1, ri).value - eval(db, &u2, ri).value)
        .abs()
        .max((eval(ab, &v1, ri).value - eval(db, &v2, ri).value).abs());
    let (cu, cv) = (eval(ab, &u1, ro), eval(ab, &v1, ro));
    let clamped = [cu.value, cu.d1, cv.value, cv.d1].iter().fold(0.0f64, |a, b| a.max(b.abs()));

    let b1 = polar_bending_moment(m, mu, ri, &ju1);
    let b2 = polar_shear(m, mu, ri, &ju1) + rho * jv1.d1 - du2;
    Ok(TraceResidualReport { mode: m, h_annulus: h1, h_disk: h2, continuity, b1: b1.abs(), b2: b2.abs(), clamped })
}

/// Smooth load `F` with nonzero slopes at the interface in both blocks.
pub fn smooth_load(system: &ModeSystem) -> StateVector {
    let g = system.geometry();
    let (ri, ro) = (g.r_interface(), g.r_outer());
    let m = system.mode() as i32;
    let disp = system.block_from_profiles(
        (move |r: f64| (ro - r).powi(2) * (1.0 + r), move |r: f64| (ro - r) * (ro - 3.0 * r - 2.0)),
        move |r: f64| (ro - ri).powi(2) * (1.0 + ri) * (r / ri).powi(m),
    );
    let vel = system.block_from_profiles(
        (move |r: f64| (ro - r).powi(2) * r * r, move |r: f64| 2.0 * r * (ro - r) * (ro - 2.0 * r)),
        move |r: f64| (ro - ri).powi(2) * ri * ri * (r / ri).powi(m) * (2.0 - (r / ri).powi(2)),
    );
    StateVector::from_blocks(system.mode(), &disp, &vel)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefinementRow {
    pub h: f64,
    pub residual_b1: f64,
    pub residual_b2: f64,
    pub eig_err: f64,
    pub continuity: f64,
    pub clamped: f64,
}

/// Trace residuals of the static solve with [`smooth_load`] and the lowest
/// disk eigenvalue error, at `n1 = n2 = n` for each resolution.
pub fn refinement_study(
    params: &PhysicalParams,
    geometry: &AnnulusGeometry,
    m: u32,
    resolutions: &[usize],
) -> Result<Vec<RefinementRow>> {
    resolutions
        .iter()
        .map(|&n| {
            let system = assemble_mode_system(params, geometry, &Discretization::new(n, n), m)?;
            let u = static_solve(&system, &smooth_load(&system))?;
            let rep = transmission_residuals(&system, &u)?;
            let eig = disk_dirichlet_eigencheck(n, m, 1, geometry.r_interface())?;
            Ok(RefinementRow {
                h: rep.h_annulus,
                residual_b1: rep.b1,
                residual_b2: rep.b2,
                eig_err: eig[0].relative_error,
                continuity: rep.continuity,
                clamped: rep.clamped,
            })
        })
        .collect()
}

pub fn refinement_to_csv(rows: &[RefinementRow]) -> String {
    let mut out = String::from("h,residual_b1,residual_b2,eig_err\n");
    for r in rows {
        let _ = writeln!(out, "{:.17e},{:.17e},{:.17e},{:.17e}", r.h, r.residual_b1, r.residual_b2, r.eig_err);
    }
    out
}

/// `log₂(eᵢ / eᵢ₊₁)` between successive halvings.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const SMALL: OracleGrid = OracleGrid { radial: 64, angular: 64 };

    #[test]
    fn bessel_zero_oracles() {
        assert!((bessel_zero(0, 1).unwrap() - 2.404825557695773).abs() < 1e-12);
        assert!((bessel_zero(1, 1).unwrap() - 3.831705970207512).abs() < 1e-12);
        assert!((bessel_zero(0, 2).unwrap() - 5.520078110286311).abs() < 1e-12);
        assert!(bessel_zero(11, 1).is_err());
        assert!(bessel_zero(0, 0).is_err());
        // Largest supported pair stays bracketed.
        let z = bessel_zero(10, 10).unwrap();
        assert!(bessel_j(10, z).abs() < 1e-12);
    }

    #[test]
    fn bessel_branches_agree() {
        for n in [0, 1, 5, 10] {
            for x in [0.5, 3.0, 7.5, 7.999] {
                let (a, b) = (bessel_series(n, x), bessel_trapezoid(n, x));
                assert!((a - b).abs() < 1e-13, "n={n} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn oracle_trivial_and_closed_form() {
        let one = |_: f64| 1.0;
        let v = cartesian_oracle_form(&one, 0, 0.3, FormKind::Plate, (1.0, 2.0), SMALL, 1e-6).unwrap();
        assert!(v.value.abs() < 1e-8);
        let para = |r: f64| 1.0 - r * r;
        let v = cartesian_oracle_form(&para, 0, 0.3, FormKind::Grad, (0.0, 1.0), SMALL, 1e-6).unwrap();
        assert!((v.value - 1.0).abs() < 1e-9, "{v:?}");
        let sq = |r: f64| r * r;
        let v = cartesian_oracle_form(&sq, 0, 0.3, FormKind::Plate, (1.0, 2.0), SMALL, 1e-6).unwrap();
        assert!((v.value - 15.6).abs() < 1e-6 * 15.6, "{v:?}");
        let v = cartesian_oracle_form(&sq, 0, 0.3, FormKind::Mass, (1.0, 2.0), SMALL, 1e-10).unwrap();
        assert!((v.value - 10.5).abs() < 1e-12); // ∫₁² r⁵ dr
        let bad = OracleGrid { radial: 4, angular: 4 };
        assert!(cartesian_oracle_form(&sq, 0, 0.3, FormKind::Mass, (1.0, 2.0), bad, 1e-6).is_err());
    }

    #[test]
    fn oracle_rejects_unresolved_grid() {
        let wiggly = |r: f64| (40.0 * r).sin();
        let grid = OracleGrid { radial: 8, angular: 16 };
        assert!(cartesian_oracle_form(&wiggly, 0, 0.3, FormKind::Mass, (1.0, 2.0), grid, 1e-8).is_err());
    }

    #[test]
    fn assembled_forms_match_oracle_on_small_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in 0..3 {
            let p = SmoothProfile::random_annulus(&mut rng);
            for which in [FormKind::Plate, FormKind::Grad, FormKind::Mass] {
                let c = compare_with_oracle(&p, Domain::Annulus { inner: 1.0, outer: 2.0 }, 16, m, 0.3, which, SMALL)
                    .unwrap();
                assert!(c.agrees(1e-4), "{c:?}");
            }
            let p = SmoothProfile::random_disk(&mut rng, m);
            for which in [FormKind::Grad, FormKind::Mass] {
                // Linear interpolation error dominates on the disk.
                let c = compare_with_oracle(&p, Domain::Disk { radius: 1.0 }, 64, m, 0.3, which, SMALL).unwrap();
                assert!(c.agrees(1e-2), "{c:?}");
            }
        }
    }

    #[test]
    fn profile_derivative_is_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = SmoothProfile::random_disk(&mut rng, 2);
        let h = 1e-6;
        for r in [0.2, 0.7, 1.0] {
            let fd = (p.value(r + h) - p.value(r - h)) / (2.0 * h);
            assert!((fd - p.derivative(r)).abs() < 1e-8);
        }
    }

    #[test]
    fn interface_reductions_match_cartesian() {
        for m in 0..4u32 {
            for mu in [0.0, 0.3, 0.5] {
                let f = |r: f64| 0.3 + r * r - 0.4 * r.powi(3) + 0.05 * r.powi(4);
                let jet = |r: f64| RadialJet3 {
                    f: f(r),
                    d1: 2.0 * r - 1.2 * r * r + 0.2 * r.powi(3),
                    d2: 2.0 - 2.4 * r + 0.6 * r * r,
                    d3: -2.4 + 1.2 * r,
                };
                let u = |x: f64, y: f64| cartesian_field(&f, m, x, y);
                let r = 1.3;
                for theta in [0.0, 0.4, 1.1] {
                    let (b1, b2) = cartesian_interface_operators(&u, mu, r, theta);
                    let c = (f64::from(m) * theta).cos();
                    let p1 = polar_bending_moment(m, mu, r, &jet(r)) * c;
                    let p2 = polar_shear(m, mu, r, &jet(r)) * c;
                    assert!((b1 - p1).abs() < 1e-6, "m={m} mu={mu} θ={theta}: B1 {b1} vs {p1}");
                    assert!((b2 - p2).abs() < 1e-5, "m={m} mu={mu} θ={theta}: B2 {b2} vs {p2}");
                }
            }
        }
    }

    #[test]
    fn one_sided_stencils_exact_on_quartics() {
        let f = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x + 0.25 * x.powi(3) - 0.1 * x.powi(4);
        let h = 0.1;
        let s = [f(0.0), f(h), f(2.0 * h), f(3.0 * h), f(4.0 * h)];
        let j = one_sided_jet(&s, h);
        assert!((j.d1 + 2.0).abs() < 1e-10);
        assert!((j.d2 - 1.0).abs() < 1e-9);
        assert!((j.d3 - 1.5).abs() < 1e-7);
    }

    #[test]
    fn eigencheck_examples() {
        let c = disk_dirichlet_eigencheck(64, 0, 1, 1.0).unwrap();
        assert!((c[0].oracle - 5.783185962947).abs() < 1e-9);
        assert!(c[0].relative_error <= 1e-3, "{c:?}");
        let c1 = disk_dirichlet_eigencheck(32, 0, 1, 1.0).unwrap();
        let ratio = c1[0].relative_error / c[0].relative_error;
        assert!((ratio - 4.0).abs() <= 0.8, "ratio {ratio}");
        let m1 = disk_dirichlet_eigencheck(64, 1, 1, 1.0).unwrap();
        assert!((m1[0].oracle - 14.6820).abs() < 1e-3);
    }

    #[test]
    fn trace_residuals_exact_parts_and_refinement() {
        let params = PhysicalParams::new(1.0, 0.5, 0.3).unwrap();
        let geom = AnnulusGeometry::default();
        for m in [0, 2] {
            let rows = refinement_study(&params, &geom, m, &[8, 16, 32]).unwrap();
            for r in &rows {
                assert!(r.continuity <= 1e-14 && r.clamped <= 1e-14, "{r:?}");
            }
            assert!(rows.windows(2).all(|w| w[1].residual_b1 < w[0].residual_b1), "{rows:?}");
            assert!(rows.windows(2).all(|w| w[1].residual_b2 < w[0].residual_b2), "{rows:?}");
        }
        let s = assemble_mode_system(&params, &geom, &Discretization::new(2, 2), 0).unwrap();
        assert!(transmission_residuals(&s, &StateVector::zeros(0, s.block_dim())).is_err());
    }

    #[test]
    fn refinement_csv_header() {
        let row =
            RefinementRow { h: 0.5, residual_b1: 1.0, residual_b2: 2.0, eig_err: 0.1, continuity: 0.0, clamped: 0.0 };
        let csv = refinement_to_csv(&[row]);
        assert!(csv.starts_with("h,residual_b1,residual_b2,eig_err\n5.00000000000000000e-1,"));
        assert_eq!(observed_orders(&[4.0, 1.0, 0.25]), vec![2.0, 2.0]);
    }
}
