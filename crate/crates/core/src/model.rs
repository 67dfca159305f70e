//! Physical parameters, annulus/disk geometry and damping regimes.
//!
//! The plate occupies the annulus `r_interface < r < r_outer`, the membrane
//! the disk `r < r_interface`. Both circles are centered at the origin.
//! On the interface the normal `ν` is the outer normal of the annulus, so it
//! points towards the origin: `ν = -e_r`, `τ = (-ν₂, ν₁) = -e_θ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unvalidated parameter record, as read from a configuration file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawParams {
    pub rho: f64,
    pub beta: f64,
    pub mu: f64,
}

/// Damping coefficients and Poisson ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalParams {
    rho: f64,
    beta: f64,
    mu: f64,
}

impl PhysicalParams {
    pub fn new(rho: f64, beta: f64, mu: f64) -> Result<Self> {
        validate_params(RawParams { rho, beta, mu })
    }

    /// Structural damping of the plate.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Viscous damping of the membrane.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Poisson ratio.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn regime(&self) -> Regime {
        damping_regime(self)
    }
}

pub fn validate_params(raw: RawParams) -> Result<PhysicalParams> {
    if !raw.rho.is_finite() || raw.rho < 0.0 {
        return Err(Error::validation("rho", format!("must be a finite value >= 0, got {}", raw.rho)));
    }
    if !raw.beta.is_finite() || raw.beta < 0.0 {
        return Err(Error::validation("beta", format!("must be a finite value >= 0, got {}", raw.beta)));
    }
    if !(raw.mu > 0.0 && raw.mu < 0.5) {
        return Err(Error::validation("mu", format!("must lie in the open interval (0, 1/2), got {}", raw.mu)));
    }
    Ok(PhysicalParams { rho: raw.rho, beta: raw.beta, mu: raw.mu })
}

/// Sign pattern of the two damping coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    Conservative,
    DampedDamped,
    DampedUndamped,
    UndampedDamped,
}

/// Qualitative long-time behavior of the energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedDecay {
    /// Energy is conserved.
    Constant,
    /// `E(t) <= C e^{-κt} E(0)`.
    Exponential,
    /// Non-exponential, polynomial of order at least 1/30 for data in the
    /// generator domain.
    Polynomial,
    /// Dissipative, no decay class certified.
    Dissipative,
}

impl Regime {
    pub fn expected_decay(self) -> ExpectedDecay {
        match self {
            Regime::Conservative => ExpectedDecay::Constant,
            Regime::DampedDamped => ExpectedDecay::Exponential,
            Regime::DampedUndamped => ExpectedDecay::Polynomial,
            Regime::UndampedDamped => ExpectedDecay::Dissipative,
        }
    }

    pub fn is_exponentially_stable(self) -> bool {
        self == Regime::DampedDamped
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::Conservative => "conservative",
            Regime::DampedDamped => "damped-damped",
            Regime::DampedUndamped => "damped-undamped",
            Regime::UndampedDamped => "undamped-damped",
        }
    }
}

pub fn damping_regime(params: &PhysicalParams) -> Regime {
    match (params.rho > 0.0, params.beta > 0.0) {
        (false, false) => Regime::Conservative,
        (true, true) => Regime::DampedDamped,
        (true, false) => Regime::DampedUndamped,
        (false, true) => Regime::UndampedDamped,
    }
}

/// Concentric annulus/disk geometry with the multiplier center `x0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnnulusGeometry {
    r_interface: f64,
    r_outer: f64,
    x0: [f64; 2],
}

impl AnnulusGeometry {
    pub fn new(r_interface: f64, r_outer: f64, x0: [f64; 2]) -> Result<Self> {
        if !(r_interface.is_finite() && r_interface > 0.0) {
            return Err(Error::validation("r_interface", format!("must be positive, got {r_interface}")));
        }
        if !(r_outer.is_finite() && r_outer > r_interface) {
            return Err(Error::validation(
                "r_outer",
                format!("must exceed r_interface = {r_interface}, got {r_outer}"),
            ));
        }
        if !x0.iter().all(|c| c.is_finite()) {
            return Err(Error::validation("x0", "coordinates must be finite"));
        }
        Ok(AnnulusGeometry { r_interface, r_outer, x0 })
    }

    pub fn r_interface(&self) -> f64 {
        self.r_interface
    }

    pub fn r_outer(&self) -> f64 {
        self.r_outer
    }

    pub fn x0(&self) -> [f64; 2] {
        self.x0
    }

    pub fn with_x0(self, x0: [f64; 2]) -> Result<Self> {
        AnnulusGeometry::new(self.r_interface, self.r_outer, x0)
    }

    /// Normal on the interface at angle `theta` (outer normal of the annulus).
    pub fn interface_normal(&self, theta: f64) -> [f64; 2] {
        [-theta.cos(), -theta.sin()]
    }

    /// Tangent `τ = (-ν₂, ν₁)` on the interface at angle `theta`.
    pub fn interface_tangent(&self, theta: f64) -> [f64; 2] {
        let nu = self.interface_normal(theta);
        [-nu[1], nu[0]]
    }
}

impl Default for AnnulusGeometry {
    fn default() -> Self {
        AnnulusGeometry { r_interface: 1.0, r_outer: 2.0, x0: [0.0, 0.0] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeometricCheck {
    pub holds: bool,
    /// Maximum of `(x - x0)·ν(x)` over the interface circle.
    pub max_q_dot_nu: f64,
}

/// Multiplier condition `(x - x0)·ν <= 0` on the interface.
///
/// With `ν = -x/R` on the circle of radius `R`, `(x - x0)·ν = -R + x0·x/R`,
/// whose maximum over the circle is `|x0| - R`.
pub fn check_geometric_condition(geom: &AnnulusGeometry) -> GeometricCheck {
    let [a, b] = geom.x0;
    let max_q_dot_nu = a.hypot(b) - geom.r_interface;
    GeometricCheck { holds: max_q_dot_nu <= 0.0, max_q_dot_nu }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute-force maximum of `(x - x0)·ν` over `n` points on the circle.
    fn sampled_max(geom: &AnnulusGeometry, n: usize) -> f64 {
        let r = geom.r_interface();
        (0..n)
            .map(|k| {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                let x = [r * theta.cos(), r * theta.sin()];
                let nu = geom.interface_normal(theta);
                (x[0] - geom.x0[0]) * nu[0] + (x[1] - geom.x0[1]) * nu[1]
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn validation_examples() {
        assert!(PhysicalParams::new(1.0, 1.0, 0.3).is_ok());
        let p = PhysicalParams::new(0.0, 0.0, 0.3).unwrap();
        assert_eq!(p.regime(), Regime::Conservative);
        match PhysicalParams::new(1.0, 0.0, 0.6) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "mu"),
            other => panic!("expected mu rejection, got {other:?}"),
        }
        assert!(PhysicalParams::new(1.0, 0.0, 0.5).is_err());
        assert!(PhysicalParams::new(1.0, 0.0, 0.0).is_err());
        assert!(matches!(PhysicalParams::new(-1.0, 0.0, 0.3), Err(Error::Validation { field: "rho", .. })));
        assert!(matches!(PhysicalParams::new(0.0, -0.1, 0.3), Err(Error::Validation { field: "beta", .. })));
        assert!(PhysicalParams::new(f64::NAN, 0.0, 0.3).is_err());
    }

    #[test]
    fn regime_examples() {
        let dd = PhysicalParams::new(1.0, 1.0, 0.3).unwrap().regime();
        assert_eq!(dd, Regime::DampedDamped);
        assert_eq!(dd.expected_decay(), ExpectedDecay::Exponential);
        let du = PhysicalParams::new(1.0, 0.0, 0.3).unwrap().regime();
        assert_eq!(du, Regime::DampedUndamped);
        assert_eq!(du.expected_decay(), ExpectedDecay::Polynomial);
        assert!(!du.is_exponentially_stable());
        let c = PhysicalParams::new(0.0, 0.0, 0.3).unwrap().regime();
        assert_eq!(c.expected_decay(), ExpectedDecay::Constant);
        assert_eq!(PhysicalParams::new(0.0, 2.0, 0.3).unwrap().regime(), Regime::UndampedDamped);
    }

    #[test]
    fn geometric_condition_examples() {
        let g = AnnulusGeometry::new(1.0, 2.0, [0.0, 0.0]).unwrap();
        let c = check_geometric_condition(&g);
        assert!(c.holds);
        assert_eq!(c.max_q_dot_nu, -1.0);

        let g = g.with_x0([0.5, 0.0]).unwrap();
        let c = check_geometric_condition(&g);
        assert!(c.holds);
        assert!((c.max_q_dot_nu - -0.5).abs() < 1e-15);
        assert!((sampled_max(&g, 3600) - -0.5).abs() < 1e-9);

        let g = g.with_x0([2.0, 0.0]).unwrap();
        let c = check_geometric_condition(&g);
        assert!(!c.holds);
        assert!((c.max_q_dot_nu - 1.0).abs() < 1e-15);
        assert!((sampled_max(&g, 3600) - 1.0).abs() < 1e-9);

        let c = check_geometric_condition(&g.with_x0([1.0, 0.0]).unwrap());
        assert!(c.holds);
        assert_eq!(c.max_q_dot_nu, 0.0);
    }

    #[test]
    fn tangent_is_rotated_normal() {
        let g = AnnulusGeometry::default();
        let t = g.interface_tangent(0.3);
        let n = g.interface_normal(0.3);
        assert!((t[0] * n[0] + t[1] * n[1]).abs() < 1e-15);
        // τ = -e_θ
        assert!((t[0] - 0.3f64.sin()).abs() < 1e-15 && (t[1] + 0.3f64.cos()).abs() < 1e-15);
    }

    #[test]
    fn geometry_validation() {
        assert!(AnnulusGeometry::new(1.0, 1.0, [0.0, 0.0]).is_err());
        assert!(AnnulusGeometry::new(0.0, 1.0, [0.0, 0.0]).is_err());
        assert!(AnnulusGeometry::new(1.0, 2.0, [f64::INFINITY, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn condition_matches_dense_sampling(r in 0.2f64..3.0, ang in 0.0f64..std::f64::consts::TAU, scale in 0.0f64..2.0) {
            let d = r * scale;
            let g = AnnulusGeometry::new(r, r + 1.0, [d * ang.cos(), d * ang.sin()]).unwrap();
            let c = check_geometric_condition(&g);
            prop_assert_eq!(c.holds, d <= r);
            let sampled = sampled_max(&g, 20_000);
            prop_assert!(sampled <= c.max_q_dot_nu + 1e-12);
            prop_assert!(c.max_q_dot_nu - sampled < 1e-6 * (1.0 + d));
        }

        #[test]
        fn regime_depends_only_on_sign_pattern(rho in 0.0f64..10.0, beta in 0.0f64..10.0, s in 0.01f64..100.0, t in 0.01f64..100.0) {
            let a = PhysicalParams::new(rho, beta, 0.3).unwrap().regime();
            let b = PhysicalParams::new(rho * s, beta * t, 0.3).unwrap().regime();
            prop_assert_eq!(a, b);
        }
    }
}
